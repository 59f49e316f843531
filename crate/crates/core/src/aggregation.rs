//! Aggregation functions over pairwise data, the bootstrap harness, and
//! ranking derivation.
//!
//! Every score function takes decisive records over `n` dense proposal
//! indices and returns one value per proposal. Win percentage leaves a
//! proposal undefined when it never took part in a contest; Copeland, Elo
//! and AHP are defined for every proposal.

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pairwise::{PairwiseRecord, PairwiseTally};

/// Point scores, one per proposal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub values: Vec<Option<f64>>,
    pub comparisons: Vec<u64>,
}

impl Scores {
    pub fn n(&self) -> usize {
        self.values.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreEntry {
    pub mean: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub n_comparisons: u64,
}

impl ScoreEntry {
    pub fn defined(&self) -> bool {
        self.mean.is_some()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub function: String,
    pub entries: Vec<ScoreEntry>,
}

impl ScoreTable {
    /// Table with zero-width intervals.
    pub fn from_scores(function: &str, scores: &Scores) -> Self {
        Self {
            function: function.to_string(),
            entries: scores
                .values
                .iter()
                .zip(&scores.comparisons)
                .map(|(&v, &n)| ScoreEntry {
                    mean: v,
                    ci_low: v,
                    ci_high: v,
                    n_comparisons: n,
                })
                .collect(),
        }
    }

    pub fn means(&self) -> Vec<Option<f64>> {
        self.entries.iter().map(|e| e.mean).collect()
    }
}

// ---------------------------------------------------------------------------
// Score functions

pub fn win_percentage(tally: &PairwiseTally) -> Scores {
    let n = tally.n();
    let mut values = Vec::with_capacity(n);
    let mut comparisons = Vec::with_capacity(n);
    for i in 0..n {
        let wins: u64 = (0..n).map(|j| tally.wins(i, j)).sum();
        let total = tally.appearances(i);
        values.push((total > 0).then(|| wins as f64 / total as f64));
        comparisons.push(total);
    }
    Scores {
        values,
        comparisons,
    }
}

pub fn copeland(tally: &PairwiseTally) -> Result<Scores> {
    let m = tally.n();
    if m < 2 {
        return Err(Error::Parameter(
            "Copeland needs at least two proposals".into(),
        ));
    }
    let mut values = Vec::with_capacity(m);
    for i in 0..m {
        let mut score = 0.0;
        for j in (0..m).filter(|&j| j != i) {
            let (a, b) = (tally.wins(i, j), tally.wins(j, i));
            score += match a.cmp(&b) {
                std::cmp::Ordering::Greater => 1.0,
                std::cmp::Ordering::Equal => 0.5,
                std::cmp::Ordering::Less => 0.0,
            };
        }
        values.push(Some(score / (m - 1) as f64));
    }
    Ok(Scores {
        values,
        comparisons: (0..m).map(|i| tally.appearances(i)).collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EloParams {
    pub k_factor: f64,
    /// Initial rating and logistic scale.
    pub s0: f64,
    pub shuffles: usize,
    pub seed: u64,
}

impl Default for EloParams {
    fn default() -> Self {
        Self {
            k_factor: 10.0,
            s0: 400.0,
            shuffles: 30,
            seed: 0,
        }
    }
}

/// Expected score of a player rated `ra` against one rated `rb`.
pub fn elo_expected(ra: f64, rb: f64, s0: f64) -> f64 {
    1.0 / (1.0 + 10f64.powf((rb - ra) / s0))
}

/// One Elo pass over records in the given order. The winner gains exactly
/// what the loser gives up, so the rating sum stays `n * s0`.
pub fn elo_pass<'r>(
    records: impl IntoIterator<Item = &'r PairwiseRecord>,
    n: usize,
    k_factor: f64,
    s0: f64,
) -> Vec<f64> {
    let mut ratings = vec![s0; n];
    for r in records {
        let (Some(w), Some(l)) = (r.winner(), r.loser()) else {
            continue;
        };
        let (w, l) = (w as usize, l as usize);
        let delta = k_factor * (1.0 - elo_expected(ratings[w], ratings[l], s0));
        ratings[w] += delta;
        ratings[l] -= delta;
    }
    ratings
}

/// Mean rating over `shuffles` seeded permutations of the record stream.
/// The stream is first put in timestamp order so the result does not
/// depend on input order.
pub fn elo(records: &[PairwiseRecord], n: usize, params: &EloParams) -> Result<Scores> {
    if params.shuffles < 1 {
        return Err(Error::Parameter("Elo needs at least one shuffle".into()));
    }
    let mut base: Vec<&PairwiseRecord> = records.iter().filter(|r| !r.is_tie()).collect();
    base.sort_by_key(|r| r.timestamp);
    let mut comparisons = vec![0u64; n];
    for r in &base {
        comparisons[r.pair.low as usize] += 1;
        comparisons[r.pair.high as usize] += 1;
    }
    let runs: Vec<Vec<f64>> = (0..params.shuffles)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(s as u64);
            let mut order = base.clone();
            order.shuffle(&mut rng);
            elo_pass(order, n, params.k_factor, params.s0)
        })
        .collect();
    let values = (0..n)
        .map(|i| Some(runs.iter().map(|r| r[i]).sum::<f64>() / runs.len() as f64))
        .collect();
    Ok(Scores {
        values,
        comparisons,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AhpParams {
    /// Win rates are clamped to `[epsilon, 1 - epsilon]` before reciprocals.
    pub epsilon: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Treat never-compared pairs as even (0.5) instead of failing.
    pub smoothing: bool,
}

impl Default for AhpParams {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            tolerance: 1e-10,
            max_iterations: 10_000,
            smoothing: false,
        }
    }
}

/// Column-normalized reciprocal matrix (row-major `m x m`). Entry `(i, j)`
/// is the win ratio `w / (1 - w)` of i over j, with `w` the clamped win rate.
pub fn ahp_matrix(tally: &PairwiseTally, params: &AhpParams) -> Result<Vec<f64>> {
    let m = tally.n();
    let mut a = vec![1.0; m * m];
    for i in 0..m {
        for j in i + 1..m {
            let (x, y) = (tally.wins(i, j), tally.wins(j, i));
            let w = if x + y == 0 {
                if !params.smoothing {
                    return Err(Error::InsufficientData(format!(
                        "proposals {i} and {j} were never compared (enable smoothing)"
                    )));
                }
                0.5
            } else {
                x as f64 / (x + y) as f64
            };
            let w = w.clamp(params.epsilon, 1.0 - params.epsilon);
            let ratio = w / (1.0 - w);
            a[i * m + j] = ratio;
            a[j * m + i] = 1.0 / ratio;
        }
    }
    for j in 0..m {
        let col: f64 = (0..m).map(|i| a[i * m + j]).sum();
        for i in 0..m {
            a[i * m + j] /= col;
        }
    }
    Ok(a)
}

/// Principal eigenvector of the normalized reciprocal matrix by power
/// iteration, scaled to sum 1. Iterates on `(A + I) / 2`, which has the
/// same eigenvector but no other eigenvalue on the unit circle, so strongly
/// cyclic data cannot make the iteration oscillate.
pub fn ahp(tally: &PairwiseTally, params: &AhpParams) -> Result<Scores> {
    let m = tally.n();
    if m == 0 {
        return Err(Error::InsufficientData("no proposals".into()));
    }
    let a = ahp_matrix(tally, params)?;
    let mut v = vec![1.0 / m as f64; m];
    let mut residual = f64::INFINITY;
    for _ in 0..params.max_iterations {
        let mut next: Vec<f64> = (0..m)
            .map(|i| 0.5 * ((0..m).map(|j| a[i * m + j] * v[j]).sum::<f64>() + v[i]))
            .collect();
        let s: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= s);
        residual = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
        v = next;
        if residual < params.tolerance {
            return Ok(Scores {
                values: v.into_iter().map(Some).collect(),
                comparisons: (0..m).map(|i| tally.appearances(i)).collect(),
            });
        }
    }
    Err(Error::Convergence {
        iterations: params.max_iterations,
        residual,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "function", rename_all = "lowercase")]
pub enum ScoreFunction {
    Win,
    Copeland,
    Elo(EloParams),
    Ahp(AhpParams),
}

impl ScoreFunction {
    pub fn name(&self) -> &'static str {
        match self {
            ScoreFunction::Win => "win",
            ScoreFunction::Copeland => "copeland",
            ScoreFunction::Elo(_) => "elo",
            ScoreFunction::Ahp(_) => "ahp",
        }
    }

    pub fn score(&self, records: &[PairwiseRecord], n: usize) -> Result<Scores> {
        match self {
            ScoreFunction::Win => Ok(win_percentage(&PairwiseTally::build(records, n)?)),
            ScoreFunction::Copeland => copeland(&PairwiseTally::build(records, n)?),
            ScoreFunction::Elo(p) => elo(records, n, p),
            ScoreFunction::Ahp(p) => ahp(&PairwiseTally::build(records, n)?, p),
        }
    }
}

// ---------------------------------------------------------------------------
// Bootstrap

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapParams {
    pub iterations: usize,
    pub fraction: f64,
    pub seed: u64,
}

impl Default for BootstrapParams {
    fn default() -> Self {
        Self {
            iterations: 30,
            fraction: 0.5,
            seed: 0,
        }
    }
}

impl BootstrapParams {
    fn validate(&self) -> Result<()> {
        if self.iterations < 1 {
            return Err(Error::Parameter(
                "bootstrap needs at least one iteration".into(),
            ));
        }
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return Err(Error::Parameter(format!(
                "bootstrap fraction {} outside (0, 1]",
                self.fraction
            )));
        }
        Ok(())
    }
}

/// Uniform subsample of `k` of `len` indices without replacement, in
/// ascending order. `stream` selects an independent sequence for `seed`.
pub fn subsample_indices(len: usize, k: usize, seed: u64, stream: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut idx = sample(&mut rng, len, k).into_vec();
    idx.sort_unstable();
    idx
}

/// Runs `metric` on `iterations` half-samples (or `fraction`-samples) of
/// the records and returns the per-iteration outputs in iteration order.
pub fn resample<F>(
    records: &[PairwiseRecord],
    params: &BootstrapParams,
    metric: F,
) -> Result<Vec<Vec<Option<f64>>>>
where
    F: Fn(&[PairwiseRecord]) -> Result<Vec<Option<f64>>> + Sync,
{
    params.validate()?;
    let k = (params.fraction * records.len() as f64).floor() as usize;
    (0..params.iterations)
        .into_par_iter()
        .map(|it| {
            let sample: Vec<PairwiseRecord> = if k == records.len() {
                records.to_vec()
            } else {
                subsample_indices(records.len(), k, params.seed, it as u64)
                    .into_iter()
                    .map(|i| records[i].clone())
                    .collect()
            };
            metric(&sample)
        })
        .collect()
}

/// Linear-interpolation percentile of sorted data, `q` in [0, 1].
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Mean and 2.5/97.5 percentiles per component over the iterations in
/// which it was defined.
pub fn summarize(
    samples: &[Vec<Option<f64>>],
    n: usize,
) -> Vec<(Option<f64>, Option<f64>, Option<f64>)> {
    (0..n)
        .map(|i| {
            let mut v: Vec<f64> = samples.iter().filter_map(|s| s[i]).collect();
            if v.is_empty() {
                return (None, None, None);
            }
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            v.sort_by(f64::total_cmp);
            let lo = percentile(&v, 0.025).min(mean);
            let hi = percentile(&v, 0.975).max(mean);
            (Some(mean), Some(lo), Some(hi))
        })
        .collect()
}

/// Bootstrapped score table: mean score and 95% percentile interval over
/// the resampling iterations. Comparison counts come from the full data.
pub fn bootstrap(
    function: &ScoreFunction,
    records: &[PairwiseRecord],
    n: usize,
    params: &BootstrapParams,
) -> Result<ScoreTable> {
    let samples = resample(records, params, |s| {
        function.score(s, n).map(|sc| sc.values)
    })?;
    let full = PairwiseTally::build(records, n)?;
    Ok(ScoreTable {
        function: function.name().to_string(),
        entries: summarize(&samples, n)
            .into_iter()
            .enumerate()
            .map(|(i, (mean, lo, hi))| ScoreEntry {
                mean,
                ci_low: lo,
                ci_high: hi,
                n_comparisons: full.appearances(i),
            })
            .collect(),
    })
}

// ---------------------------------------------------------------------------
// Ranking

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ranking {
    /// Proposal indices best first; undefined proposals trail in index order.
    pub order: Vec<usize>,
    /// 1-based position of each proposal.
    pub position: Vec<usize>,
    pub defined: Vec<bool>,
}

impl Ranking {
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn positions_f64(&self) -> Vec<f64> {
        self.position.iter().map(|&p| p as f64).collect()
    }

    pub fn from_order(order: Vec<usize>) -> Self {
        let mut position = vec![0; order.len()];
        for (k, &i) in order.iter().enumerate() {
            position[i] = k + 1;
        }
        let defined = vec![true; order.len()];
        Self {
            order,
            position,
            defined,
        }
    }
}

/// Descending by score; equal scores by ascending index; undefined last.
pub fn rank_from_scores(values: &[Option<f64>]) -> Result<Ranking> {
    let mut defined: Vec<usize> = (0..values.len()).filter(|&i| values[i].is_some()).collect();
    if defined.is_empty() {
        return Err(Error::InsufficientData(
            "no proposal has a defined score".into(),
        ));
    }
    defined.sort_by(|&a, &b| {
        let (x, y) = (values[a].unwrap(), values[b].unwrap());
        y.total_cmp(&x).then(a.cmp(&b))
    });
    let undefined = (0..values.len()).filter(|&i| values[i].is_none());
    let order: Vec<usize> = defined.into_iter().chain(undefined).collect();
    let mut ranking = Ranking::from_order(order);
    ranking.defined = values.iter().map(Option::is_some).collect();
    Ok(ranking)
}
