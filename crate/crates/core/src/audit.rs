//! Axiomatic and spectral diagnostics: pairwise efficiency, IIA
//! robustness, sample-size convergence and SVD factor analysis.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregation::{percentile, subsample_indices, Ranking};
use crate::error::{Error, Result};
use crate::pairwise::{PairwiseRecord, PairwiseTally};
use crate::stats::{kendall_tau, ols_standardized, pearson_r2, RegressionSummary};

/// Builds a ranking from a record set.
pub type RankBuilder<'a> = dyn Fn(&[PairwiseRecord]) -> Result<Ranking> + Sync + 'a;

// ---------------------------------------------------------------------------
// Pairwise matrix and efficiency

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairwiseMatrix {
    pub n: usize,
    /// Row-major; `w[i * n + j]` is i's win rate against j.
    pub w: Vec<f64>,
    pub observed: Vec<bool>,
}

impl PairwiseMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.n + j]
    }

    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        self.observed[i * self.n + j]
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        Self {
            n,
            w: rows.iter().flatten().copied().collect(),
            observed: (0..n * n).map(|k| k / n != k % n).collect(),
        }
    }
}

/// Head-to-head win rates; never-compared pairs get `impute` and stay
/// unmasked, the diagonal is 0.5.
pub fn pairwise_matrix(tally: &PairwiseTally, impute: f64) -> PairwiseMatrix {
    let n = tally.n();
    let mut w = vec![0.5; n * n];
    let mut observed = vec![false; n * n];
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            let (a, b) = (tally.wins(i, j), tally.wins(j, i));
            if a + b > 0 {
                w[i * n + j] = a as f64 / (a + b) as f64;
                observed[i * n + j] = true;
            } else {
                w[i * n + j] = impute;
            }
        }
    }
    PairwiseMatrix { n, w, observed }
}

fn efficiency_over(
    n: usize,
    ranking: &Ranking,
    cell: impl Fn(usize, usize) -> Option<(f64, f64)>,
) -> Result<f64> {
    if ranking.len() != n {
        return Err(Error::LengthMismatch(n, ranking.len()));
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..n {
        for j in (0..n).filter(|&j| ranking.position[i] < ranking.position[j]) {
            if let Some((a, b)) = cell(i, j) {
                sum += if a > b {
                    1.0
                } else if a == b {
                    0.5
                } else {
                    0.0
                };
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::InsufficientData("no observed pairs".into()));
    }
    Ok(sum / count as f64)
}

/// Share of observed pairs in which the higher-ranked proposal beat the
/// lower-ranked one head to head, ties counting half.
pub fn pairwise_efficiency(matrix: &PairwiseMatrix, ranking: &Ranking) -> Result<f64> {
    efficiency_over(matrix.n, ranking, |i, j| {
        matrix
            .is_observed(i, j)
            .then(|| (matrix.get(i, j), matrix.get(j, i)))
    })
}

// ---------------------------------------------------------------------------
// IIA

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IiaReport {
    pub threshold: usize,
    /// `distances[removed][other]`, `None` on the diagonal.
    pub distances: Vec<Vec<Option<usize>>>,
    /// Ranking on the full data.
    pub ranking: Ranking,
    pub robustness: f64,
    pub top_robustness: f64,
}

impl IiaReport {
    /// Share of (removed, remaining) cells whose displacement is at most `k`.
    pub fn robustness_at(&self, k: usize) -> f64 {
        let cells: Vec<usize> = self.distances.iter().flatten().flatten().copied().collect();
        cells.iter().filter(|&&d| d <= k).count() as f64 / cells.len() as f64
    }

    /// Share of removals after which the full-data winner moved at most `k`.
    pub fn top_robustness_at(&self, k: usize) -> f64 {
        let top = self.ranking.order[0];
        let cells: Vec<usize> = self.distances.iter().filter_map(|row| row[top]).collect();
        cells.iter().filter(|&&d| d <= k).count() as f64 / cells.len() as f64
    }
}

/// Displacement of every remaining proposal when `removed` is dropped:
/// `full` with `removed` excised and ranks closed, against `reduced`.
/// `reduced` ranks the remaining proposals and must not contain `removed`.
pub fn iia_distances(
    full: &[usize],
    removed: usize,
    reduced: &[usize],
    n: usize,
) -> Vec<Option<usize>> {
    let mut before = vec![0usize; n];
    for (k, &p) in full.iter().filter(|&&p| p != removed).enumerate() {
        before[p] = k;
    }
    let mut out = vec![None; n];
    for (k, &p) in reduced.iter().enumerate() {
        out[p] = Some(before[p].abs_diff(k));
    }
    out
}

pub fn iia_robustness(
    records: &[PairwiseRecord],
    n: usize,
    rank: &RankBuilder<'_>,
    threshold: usize,
) -> Result<IiaReport> {
    if n < 3 {
        return Err(Error::InsufficientData(format!(
            "IIA needs at least 3 proposals, got {n}"
        )));
    }
    let full = rank(records)?;
    let distances = (0..n)
        .into_par_iter()
        .map(|removed| {
            let kept: Vec<PairwiseRecord> = records
                .iter()
                .filter(|r| !r.involves(removed as u32))
                .cloned()
                .collect();
            let reduced = rank(&kept)?;
            let order: Vec<usize> = reduced
                .order
                .into_iter()
                .filter(|&p| p != removed)
                .collect();
            Ok(iia_distances(&full.order, removed, &order, n))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = IiaReport {
        threshold,
        distances,
        ranking: full,
        robustness: 0.0,
        top_robustness: 0.0,
    };
    report.robustness = report.robustness_at(threshold);
    report.top_robustness = report.top_robustness_at(threshold);
    Ok(report)
}

// ---------------------------------------------------------------------------
// Convergence

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub size: usize,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub taus: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceCurve {
    pub rows: Vec<ConvergenceRow>,
    pub target: f64,
    /// Smallest size whose median tau reaches `target`.
    pub converged_at: Option<usize>,
}

pub const CONVERGENCE_TARGET: f64 = 0.75;

/// Kendall tau-b between rankings of uniform subsamples and the full-data
/// ranking, `iterations` subsamples per size.
pub fn convergence_curve(
    records: &[PairwiseRecord],
    rank: &RankBuilder<'_>,
    sizes: &[usize],
    iterations: usize,
    seed: u64,
) -> Result<ConvergenceCurve> {
    if iterations == 0 {
        return Err(Error::Parameter(
            "convergence needs at least one iteration".into(),
        ));
    }
    if let Some(&s) = sizes.iter().find(|&&s| s > records.len() || s == 0) {
        return Err(Error::Parameter(format!(
            "sample size {s} outside 1..={}",
            records.len()
        )));
    }
    let full = rank(records)?.positions_f64();
    let jobs: Vec<(usize, usize)> = (0..sizes.len())
        .flat_map(|s| (0..iterations).map(move |it| (s, it)))
        .collect();
    let taus = jobs
        .par_iter()
        .map(|&(s, it)| {
            let size = sizes[s];
            let sample: Vec<PairwiseRecord> = if size == records.len() {
                records.to_vec()
            } else {
                let stream = ((s as u64) << 32) | it as u64;
                subsample_indices(records.len(), size, seed, stream)
                    .into_iter()
                    .map(|k| records[k].clone())
                    .collect()
            };
            let sub = rank(&sample)?.positions_f64();
            Ok(kendall_tau(&sub, &full)?.0)
        })
        .collect::<Result<Vec<f64>>>()?;
    let rows: Vec<ConvergenceRow> = sizes
        .iter()
        .enumerate()
        .map(|(s, &size)| {
            let taus = taus[s * iterations..(s + 1) * iterations].to_vec();
            let mut sorted = taus.clone();
            sorted.sort_by(f64::total_cmp);
            ConvergenceRow {
                size,
                median: percentile(&sorted, 0.5),
                q25: percentile(&sorted, 0.25),
                q75: percentile(&sorted, 0.75),
                taus,
            }
        })
        .collect();
    let converged_at = rows
        .iter()
        .filter(|r| r.median >= CONVERGENCE_TARGET)
        .map(|r| r.size)
        .min();
    Ok(ConvergenceCurve {
        rows,
        target: CONVERGENCE_TARGET,
        converged_at,
    })
}

// ---------------------------------------------------------------------------
// Spectral analysis

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub n: usize,
    /// Descending.
    pub singular_values: Vec<f64>,
    pub variance_share: Vec<f64>,
    /// `left[t]` is the t-th left singular vector.
    pub left: Vec<Vec<f64>>,
    pub right: Vec<Vec<f64>>,
    /// Rank-1 factor matrices (row-major) for the first `k` factors.
    pub factors: Vec<Vec<f64>>,
}

impl SpectralReport {
    /// `sigma_t u_t v_t^T`, row-major.
    pub fn factor(&self, t: usize) -> Vec<f64> {
        let n = self.n;
        let s = self.singular_values[t];
        let (u, v) = (&self.left[t], &self.right[t]);
        (0..n * n).map(|k| s * u[k / n] * v[k % n]).collect()
    }

    /// Pairwise efficiency of `ranking` judged by factor `t` alone.
    pub fn factor_efficiency(&self, t: usize, ranking: &Ranking) -> Result<f64> {
        let m = self.factor(t);
        let n = self.n;
        efficiency_over(n, ranking, |i, j| Some((m[i * n + j], m[j * n + i])))
    }
}

/// Full SVD of the win-rate matrix. Each left vector is signed so its
/// largest-magnitude entry is positive; the right vector flips with it.
pub fn svd_factors(matrix: &PairwiseMatrix, k: usize) -> Result<SpectralReport> {
    let n = matrix.n;
    if k > n {
        return Err(Error::Parameter(format!(
            "asked for {k} factors of a {n}x{n} matrix"
        )));
    }
    let m = DMatrix::from_row_slice(n, n, &matrix.w);
    let svd = m
        .clone()
        .try_svd(true, true, 1e-15, 10_000)
        .ok_or(Error::Convergence {
            iterations: 10_000,
            residual: f64::NAN,
        })?;
    let (u, vt) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let mut singular_values = Vec::with_capacity(n);
    let mut left = Vec::with_capacity(n);
    let mut right = Vec::with_capacity(n);
    for &t in &idx {
        let mut uc: Vec<f64> = u.column(t).iter().copied().collect();
        let mut vc: Vec<f64> = vt.row(t).iter().copied().collect();
        let pivot = uc
            .iter()
            .copied()
            .max_by(|a, b| a.abs().total_cmp(&b.abs()))
            .unwrap_or(0.0);
        if pivot < 0.0 {
            uc.iter_mut().for_each(|x| *x = -*x);
            vc.iter_mut().for_each(|x| *x = -*x);
        }
        singular_values.push(svd.singular_values[t]);
        left.push(uc);
        right.push(vc);
    }
    let total: f64 = singular_values.iter().map(|s| s * s).sum();
    let variance_share = singular_values
        .iter()
        .map(|s| if total > 0.0 { s * s / total } else { 0.0 })
        .collect();
    let mut report = SpectralReport {
        n,
        singular_values,
        variance_share,
        left,
        right,
        factors: Vec::new(),
    };
    report.factors = (0..k).map(|t| report.factor(t)).collect();

    // the decomposition must reproduce the input
    let mut residual = 0.0f64;
    let full: Vec<Vec<f64>> = (0..n).map(|t| report.factor(t)).collect();
    for c in 0..n * n {
        let sum: f64 = full.iter().map(|f| f[c]).sum();
        residual = residual.max((sum - matrix.w[c]).abs());
    }
    if residual > 1e-8 {
        return Err(Error::Convergence {
            iterations: 10_000,
            residual,
        });
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentRow {
    /// 1-based factor index.
    pub index: usize,
    pub sigma: f64,
    pub variance_share: f64,
    pub r2_vs_win: Option<f64>,
    pub p_vs_win: Option<f64>,
    pub r2_vs_div: Option<f64>,
    pub p_vs_div: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub rows: Vec<AlignmentRow>,
    /// Standardized OLS of the metric on the first three left vectors.
    pub ols_win: Option<RegressionSummary>,
    pub ols_div: Option<RegressionSummary>,
}

fn defined_pairs(v: &[f64], metric: &[Option<f64>]) -> (Vec<f64>, Vec<f64>) {
    v.iter()
        .zip(metric)
        .filter_map(|(&x, &m)| Some((x, m?)))
        .unzip()
}

/// r² of each of the first `k` left singular vectors against the win
/// rates and the divisiveness values, plus the three-vector regressions.
pub fn eigenvector_alignment(
    report: &SpectralReport,
    win: &[Option<f64>],
    div: &[Option<f64>],
    k: usize,
) -> Result<AlignmentReport> {
    for m in [win, div] {
        if m.len() != report.n {
            return Err(Error::LengthMismatch(report.n, m.len()));
        }
    }
    let k = k.min(report.n);
    let r2 = |t: usize, metric: &[Option<f64>]| -> Result<(Option<f64>, Option<f64>)> {
        let (x, y) = defined_pairs(&report.left[t], metric);
        match pearson_r2(&x, &y) {
            Ok((r2, p)) => Ok((Some(r2), Some(p))),
            Err(Error::ZeroVariance(_)) | Err(Error::InsufficientData(_)) => Ok((None, None)),
            Err(e) => Err(e),
        }
    };
    let rows = (0..k)
        .map(|t| {
            let (r2_vs_win, p_vs_win) = r2(t, win)?;
            let (r2_vs_div, p_vs_div) = r2(t, div)?;
            Ok(AlignmentRow {
                index: t + 1,
                sigma: report.singular_values[t],
                variance_share: report.variance_share[t],
                r2_vs_win,
                p_vs_win,
                r2_vs_div,
                p_vs_div,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let ols = |metric: &[Option<f64>]| -> Option<RegressionSummary> {
        let q = 3.min(report.n);
        let keep: Vec<usize> = (0..report.n).filter(|&i| metric[i].is_some()).collect();
        if keep.len() <= q + 1 {
            return None;
        }
        let columns: Vec<(String, Vec<f64>)> = (0..q)
            .map(|t| {
                (
                    format!("eig{}", t + 1),
                    keep.iter().map(|&i| report.left[t][i]).collect(),
                )
            })
            .collect();
        let y: Vec<f64> = keep.iter().map(|&i| metric[i].unwrap()).collect();
        ols_standardized(&columns, &y, true).ok()
    };
    Ok(AlignmentReport {
        rows,
        ols_win: ols(win),
        ols_div: ols(div),
    })
}
