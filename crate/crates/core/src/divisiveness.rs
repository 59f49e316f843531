//! Demographic-split divisiveness, demographic-free pairwise divisiveness,
//! aggregate split divisiveness and the political-responsiveness matrix.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregation::{resample, summarize, BootstrapParams, ScoreFunction, Scores};
use crate::corpus::{Agreement, ApprovalRecord, Catalog, Dimension, Profiles, ProposalId};
use crate::error::{Error, Result};
use crate::pairwise::{PairId, PairwiseData, PairwiseRecord, Selection};
use crate::stats::{ols_standardized, pearson_r2, RegressionSummary};

// ---------------------------------------------------------------------------
// Splits

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    A,
    B,
    Excluded,
}

/// Maps one demographic dimension onto two groups. Labels not listed fall
/// to `unlisted`; participants with no label are always excluded.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub dimension: Dimension,
    pub a_name: String,
    pub a_labels: BTreeSet<i32>,
    pub b_name: String,
    pub b_labels: BTreeSet<i32>,
    #[serde(default)]
    pub excluded: BTreeSet<i32>,
    #[serde(default = "excluded_side")]
    pub unlisted: Side,
}

fn excluded_side() -> Side {
    Side::Excluded
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Country {
    France,
    Brazil,
}

impl SplitSpec {
    pub fn new(
        dimension: Dimension,
        a: (&str, &[i32]),
        b: (&str, &[i32]),
        excluded: &[i32],
    ) -> Result<Self> {
        let spec = Self {
            dimension,
            a_name: a.0.to_string(),
            a_labels: a.1.iter().copied().collect(),
            b_name: b.0.to_string(),
            b_labels: b.1.iter().copied().collect(),
            excluded: excluded.iter().copied().collect(),
            unlisted: Side::Excluded,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let overlap = |x: &BTreeSet<i32>, y: &BTreeSet<i32>| x.intersection(y).next().copied();
        if let Some(l) = overlap(&self.a_labels, &self.b_labels)
            .or_else(|| overlap(&self.a_labels, &self.excluded))
            .or_else(|| overlap(&self.b_labels, &self.excluded))
        {
            return Err(Error::Config(format!(
                "split {}: label {l} is assigned to more than one group",
                self.dimension
            )));
        }
        if self.a_labels.is_empty() && self.unlisted != Side::A {
            return Err(Error::Config(format!(
                "split {}: group A has no labels",
                self.dimension
            )));
        }
        if self.b_labels.is_empty() && self.unlisted != Side::B {
            return Err(Error::Config(format!(
                "split {}: group B has no labels",
                self.dimension
            )));
        }
        Ok(())
    }

    pub fn side_of_label(&self, label: Option<i32>) -> Side {
        match label {
            None => Side::Excluded,
            Some(l) if self.a_labels.contains(&l) => Side::A,
            Some(l) if self.b_labels.contains(&l) => Side::B,
            Some(l) if self.excluded.contains(&l) => Side::Excluded,
            Some(_) => self.unlisted,
        }
    }

    pub fn side_of(&self, profiles: &Profiles, user_id: &str) -> Side {
        self.side_of_label(profiles.get(user_id).and_then(|p| p.label(self.dimension)))
    }

    /// The same split with the groups exchanged.
    pub fn swapped(&self) -> Self {
        let unlisted = match self.unlisted {
            Side::A => Side::B,
            Side::B => Side::A,
            Side::Excluded => Side::Excluded,
        };
        Self {
            dimension: self.dimension,
            a_name: self.b_name.clone(),
            a_labels: self.b_labels.clone(),
            b_name: self.a_name.clone(),
            b_labels: self.a_labels.clone(),
            excluded: self.excluded.clone(),
            unlisted,
        }
    }

    /// Shipped label tables for the two platforms. Group A is the first
    /// category listed for each dimension.
    pub fn defaults(country: Country) -> Vec<SplitSpec> {
        let mut out = vec![
            // politics: 3 is the centre of the 1..5 scale
            SplitSpec::new(
                Dimension::Politics,
                ("Conservative", &[4, 5]),
                ("Liberal", &[1, 2]),
                &[3],
            ),
            SplitSpec::new(Dimension::Sex, ("Female", &[1]), ("Male", &[2]), &[98, 99]),
            SplitSpec::new(
                Dimension::Age,
                ("Young", &[1, 2, 3, 4]),
                ("Old", &[5, 6, 7]),
                &[98, 99],
            ),
            SplitSpec::new(
                Dimension::Education,
                ("Less than Undergraduate", &[1, 2, 3]),
                ("Undergraduate or More", &[4, 5, 6, 7]),
                &[99],
            ),
            SplitSpec::new(Dimension::Zone, ("Urban", &[1]), ("Rural", &[2]), &[99]),
        ]
        .into_iter()
        .map(|s| s.expect("shipped split tables are consistent"))
        .collect::<Vec<_>>();
        let location = match country {
            Country::France => {
                const REGION: &[i32] = &[
                    1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 16, 17, 18, 21, 22, 24, 25, 26,
                    27, 28, 29, 30, 31, 32, 33, 34, 35, 37, 38, 39, 41, 42, 44, 45, 46, 47, 49, 50,
                    51, 53, 54, 55, 56, 57, 58, 59, 60, 62, 63, 64, 65, 66, 67, 68, 69, 70, 71, 73,
                    74, 76, 79, 80, 81, 82, 83, 84, 85, 86, 87, 88, 89, 90, 972, 973,
                ];
                SplitSpec::new(
                    Dimension::Location,
                    ("Region", REGION),
                    ("Capital", &[75, 77, 78, 91, 92, 93, 94, 95]),
                    &[998, 999],
                )
                .expect("shipped split tables are consistent")
            }
            Country::Brazil => SplitSpec {
                dimension: Dimension::Location,
                a_name: "Region".into(),
                a_labels: BTreeSet::new(),
                b_name: "Capital".into(),
                b_labels: [3516, 2699, 2392].into_iter().collect(),
                excluded: [998, 999].into_iter().collect(),
                unlisted: Side::A,
            },
        };
        out.insert(1, location);
        out
    }
}

// ---------------------------------------------------------------------------
// Tables

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivisivenessEntry {
    pub proposal_id: ProposalId,
    pub value: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    /// Pairwise divisiveness only.
    pub n_valid_terms: Option<usize>,
    pub flags: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivisivenessTable {
    pub metric: String,
    pub entries: Vec<DivisivenessEntry>,
}

pub const FLAG_UNDEFINED: &str = "undefined";
pub const FLAG_NO_VALID_TERMS: &str = "no_valid_terms";

impl DivisivenessTable {
    pub fn values(&self) -> Vec<Option<f64>> {
        self.entries.iter().map(|e| e.value).collect()
    }

    /// Replaces the interval bounds with bootstrap percentiles.
    fn attach_intervals(&mut self, samples: &[Vec<Option<f64>>]) {
        for (e, (_, lo, hi)) in self
            .entries
            .iter_mut()
            .zip(summarize(samples, samples[0].len()))
        {
            if let (Some(v), Some(lo), Some(hi)) = (e.value, lo, hi) {
                e.ci_low = Some(lo.min(v));
                e.ci_high = Some(hi.max(v));
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Split divisiveness

/// Records of each side of a split: users whose label maps to A or B.
pub fn partition_records(
    data: &PairwiseData,
    profiles: &Profiles,
    split: &SplitSpec,
) -> (Vec<PairwiseRecord>, Vec<PairwiseRecord>) {
    let sides: Vec<Side> = data
        .users
        .iter()
        .map(|u| split.side_of(profiles, u))
        .collect();
    let mut a = Vec::new();
    let mut b = Vec::new();
    for r in &data.records {
        match sides[r.user as usize] {
            Side::A => a.push(r.clone()),
            Side::B => b.push(r.clone()),
            Side::Excluded => {}
        }
    }
    (a, b)
}

pub fn split_scores(
    data: &PairwiseData,
    profiles: &Profiles,
    split: &SplitSpec,
    function: &ScoreFunction,
) -> Result<(Scores, Scores)> {
    let (a, b) = partition_records(data, profiles, split);
    for (records, name) in [(&a, &split.a_name), (&b, &split.b_name)] {
        if records.is_empty() {
            return Err(Error::EmptySide(format!(
                "{} group '{}' has no participants with records",
                split.dimension, name
            )));
        }
    }
    Ok((function.score(&a, data.n())?, function.score(&b, data.n())?))
}

fn difference_entries(
    proposals: &[ProposalId],
    a: &[Option<f64>],
    b: &[Option<f64>],
) -> Vec<DivisivenessEntry> {
    proposals
        .iter()
        .enumerate()
        .map(|(i, &id)| {
            let value = match (a[i], b[i]) {
                (Some(x), Some(y)) => Some(x - y),
                _ => None,
            };
            DivisivenessEntry {
                proposal_id: id,
                value,
                ci_low: value,
                ci_high: value,
                n_valid_terms: None,
                flags: if value.is_none() {
                    vec![FLAG_UNDEFINED.to_string()]
                } else {
                    Vec::new()
                },
            }
        })
        .collect()
}

/// Signed score difference between the two groups of a split, in the
/// units of the score function. With `bootstrap`, each side is resampled
/// independently and the interval is taken over the differences.
pub fn split_divisiveness(
    data: &PairwiseData,
    profiles: &Profiles,
    split: &SplitSpec,
    function: &ScoreFunction,
    bootstrap: Option<&BootstrapParams>,
) -> Result<DivisivenessTable> {
    let (sa, sb) = split_scores(data, profiles, split, function)?;
    let mut table = DivisivenessTable {
        metric: format!("d_{}", split.dimension),
        entries: difference_entries(&data.proposals, &sa.values, &sb.values),
    };
    if let Some(params) = bootstrap {
        let (a, b) = partition_records(data, profiles, split);
        let n = data.n();
        let score = |s: &[PairwiseRecord]| function.score(s, n).map(|x| x.values);
        let ra = resample(&a, params, score)?;
        let pb = BootstrapParams {
            seed: params.seed ^ 0x0005_eedb,
            ..params.clone()
        };
        let rb = resample(&b, &pb, score)?;
        let diffs: Vec<Vec<Option<f64>>> = ra
            .iter()
            .zip(&rb)
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| Some((*p)? - (*q)?)).collect())
            .collect();
        table.attach_intervals(&diffs);
    }
    Ok(table)
}

/// One minus the squared Pearson correlation of two score vectors over the
/// proposals defined in both.
pub fn aggregate_divisiveness(a: &[Option<f64>], b: &[Option<f64>]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = a
        .iter()
        .zip(b)
        .filter_map(|(p, q)| Some(((*p)?, (*q)?)))
        .unzip();
    if x.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "aggregate divisiveness needs 3 proposals defined on both sides, got {}",
            x.len()
        )));
    }
    Ok(1.0 - pearson_r2(&x, &y)?.0)
}

// ---------------------------------------------------------------------------
// Pairwise divisiveness

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Membership {
    /// A user belongs to the side they chose more often on the pair; users
    /// tied on the pair are left out.
    #[default]
    Majority,
    /// A user belongs to every side they chose at least once.
    AnyRecord,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Divide by the number of terms that could be evaluated.
    #[default]
    ValidTerms,
    /// Divide by N - 1 regardless of skipped terms.
    Literal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairwiseOptions {
    pub membership: Membership,
    pub normalization: Normalization,
    /// Use per-user additive statistics for win percentage.
    pub fast_path: bool,
}

impl Default for PairwiseOptions {
    fn default() -> Self {
        Self {
            membership: Membership::Majority,
            normalization: Normalization::ValidTerms,
            fast_path: true,
        }
    }
}

/// Users on each side of every observed pair: `(chose low, chose high)`,
/// both sorted by user index.
type PairSides = BTreeMap<PairId, (Vec<u32>, Vec<u32>)>;

fn pair_sides(records: &[PairwiseRecord], membership: Membership) -> PairSides {
    let mut keyed: Vec<(PairId, u32, Selection)> = records
        .iter()
        .filter(|r| !r.is_tie())
        .map(|r| (r.pair, r.user, r.selected))
        .collect();
    keyed.sort_unstable_by_key(|&(p, u, _)| (p, u));
    let mut out = PairSides::new();
    let mut k = 0;
    while k < keyed.len() {
        let (pair, user, _) = keyed[k];
        let (mut l, mut h) = (0u32, 0u32);
        while k < keyed.len() && keyed[k].0 == pair && keyed[k].1 == user {
            match keyed[k].2 {
                Selection::Low => l += 1,
                _ => h += 1,
            }
            k += 1;
        }
        let (low, high) = out.entry(pair).or_default();
        match membership {
            Membership::Majority => {
                if l > h {
                    low.push(user)
                } else if h > l {
                    high.push(user)
                }
            }
            Membership::AnyRecord => {
                if l > 0 {
                    low.push(user)
                }
                if h > 0 {
                    high.push(user)
                }
            }
        }
    }
    out
}

/// `terms[i * n + j]`: |S_i(chose i over j) - S_i(chose j over i)|, when
/// both sides are present and S_i is defined on each.
fn pairwise_terms(
    records: &[PairwiseRecord],
    n: usize,
    function: &ScoreFunction,
    options: &PairwiseOptions,
) -> Result<Vec<Option<f64>>> {
    let sides = pair_sides(records, options.membership);
    let pairs: Vec<_> = sides
        .iter()
        .filter(|(_, (l, h))| !l.is_empty() && !h.is_empty())
        .collect();

    let per_pair: Vec<(PairId, Option<f64>, Option<f64>)> =
        if options.fast_path && matches!(function, ScoreFunction::Win) {
            let stats = UserStats::build(records, n);
            pairs
                .par_iter()
                .map(|(pair, (low, high))| {
                    let (i, j) = (pair.low as usize, pair.high as usize);
                    let (li, lj) = stats.win_rates(low, i, j);
                    let (hi, hj) = stats.win_rates(high, i, j);
                    let di = li.zip(hi).map(|(x, y)| (x - y).abs());
                    let dj = lj.zip(hj).map(|(x, y)| (y - x).abs());
                    (**pair, di, dj)
                })
                .collect()
        } else {
            let mut by_user: HashMap<u32, Vec<&PairwiseRecord>> = HashMap::new();
            for r in records {
                by_user.entry(r.user).or_default().push(r);
            }
            let gather = |users: &[u32]| -> Vec<PairwiseRecord> {
                users
                    .iter()
                    .flat_map(|u| by_user[u].iter().map(|r| (*r).clone()))
                    .collect()
            };
            pairs
                .par_iter()
                .map(|(pair, (low, high))| {
                    let (i, j) = (pair.low as usize, pair.high as usize);
                    let sl = function.score(&gather(low), n)?;
                    let sh = function.score(&gather(high), n)?;
                    let di = sl.values[i].zip(sh.values[i]).map(|(x, y)| (x - y).abs());
                    let dj = sl.values[j].zip(sh.values[j]).map(|(x, y)| (x - y).abs());
                    Ok((**pair, di, dj))
                })
                .collect::<Result<_>>()?
        };

    let mut terms = vec![None; n * n];
    for (pair, di, dj) in per_pair {
        let (i, j) = (pair.low as usize, pair.high as usize);
        terms[i * n + j] = di;
        terms[j * n + i] = dj;
    }
    Ok(terms)
}

/// Per-user (wins, appearances) for every proposal, so win percentage of
/// any user subset is a sum over its members.
struct UserStats {
    n: usize,
    index: HashMap<u32, usize>,
    wins: Vec<u32>,
    apps: Vec<u32>,
}

impl UserStats {
    fn build(records: &[PairwiseRecord], n: usize) -> Self {
        let mut index = HashMap::new();
        for r in records {
            let next = index.len();
            index.entry(r.user).or_insert(next);
        }
        let mut wins = vec![0u32; index.len() * n];
        let mut apps = vec![0u32; index.len() * n];
        for r in records {
            let Some(w) = r.winner() else { continue };
            let base = index[&r.user] * n;
            wins[base + w as usize] += 1;
            apps[base + r.pair.low as usize] += 1;
            apps[base + r.pair.high as usize] += 1;
        }
        Self {
            n,
            index,
            wins,
            apps,
        }
    }

    fn win_rates(&self, users: &[u32], i: usize, j: usize) -> (Option<f64>, Option<f64>) {
        let (mut wi, mut ai, mut wj, mut aj) = (0u64, 0u64, 0u64, 0u64);
        for u in users {
            let base = self.index[u] * self.n;
            wi += self.wins[base + i] as u64;
            ai += self.apps[base + i] as u64;
            wj += self.wins[base + j] as u64;
            aj += self.apps[base + j] as u64;
        }
        let rate = |w: u64, a: u64| (a > 0).then(|| w as f64 / a as f64);
        (rate(wi, ai), rate(wj, aj))
    }
}

/// D_i and the number of valid terms for every proposal.
pub fn pairwise_divisiveness_values(
    records: &[PairwiseRecord],
    n: usize,
    function: &ScoreFunction,
    options: &PairwiseOptions,
) -> Result<Vec<(f64, usize)>> {
    let terms = pairwise_terms(records, n, function, options)?;
    Ok((0..n)
        .map(|i| {
            let mut sum = 0.0;
            let mut valid = 0;
            for j in (0..n).filter(|&j| j != i) {
                if let Some(t) = terms[i * n + j] {
                    sum += t;
                    valid += 1;
                }
            }
            let denom = match options.normalization {
                Normalization::ValidTerms => valid,
                Normalization::Literal => n.saturating_sub(1),
            };
            (if valid == 0 { 0.0 } else { sum / denom as f64 }, valid)
        })
        .collect())
}

/// Mean absolute score gap of each proposal between the users who chose it
/// and those who chose its opponent, over all opponents.
pub fn pairwise_divisiveness(
    data: &PairwiseData,
    function: &ScoreFunction,
    options: &PairwiseOptions,
    bootstrap: Option<&BootstrapParams>,
) -> Result<DivisivenessTable> {
    let n = data.n();
    let values = pairwise_divisiveness_values(&data.records, n, function, options)?;
    let mut table = DivisivenessTable {
        metric: format!("D_{}", function.name()),
        entries: values
            .iter()
            .zip(&data.proposals)
            .map(|(&(v, valid), &id)| DivisivenessEntry {
                proposal_id: id,
                value: Some(v),
                ci_low: Some(v),
                ci_high: Some(v),
                n_valid_terms: Some(valid),
                flags: if valid == 0 {
                    vec![FLAG_NO_VALID_TERMS.to_string()]
                } else {
                    Vec::new()
                },
            })
            .collect(),
    };
    if let Some(params) = bootstrap {
        let samples = resample(&data.records, params, |s| {
            Ok(pairwise_divisiveness_values(s, n, function, options)?
                .into_iter()
                .map(|(v, valid)| (valid > 0).then_some(v))
                .collect())
        })?;
        table.attach_intervals(&samples);
    }
    Ok(table)
}

// ---------------------------------------------------------------------------
// Multidimensional report

/// Per-proposal columns of |d| for each split plus pairwise D.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultidimensionalTable {
    pub proposals: Vec<ProposalId>,
    pub columns: Vec<(String, Vec<Option<f64>>)>,
}

impl MultidimensionalTable {
    pub fn column(&self, name: &str) -> Option<&[Option<f64>]> {
        self.columns
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    pub fn add_column(&mut self, name: &str, values: Vec<Option<f64>>) -> Result<()> {
        if values.len() != self.proposals.len() {
            return Err(Error::LengthMismatch(self.proposals.len(), values.len()));
        }
        self.columns.push((name.to_string(), values));
        Ok(())
    }

    /// Standardized OLS of `response` on `predictors` over the proposals
    /// where every involved column is defined.
    pub fn regress(&self, response: &str, predictors: &[&str]) -> Result<RegressionSummary> {
        let get = |name: &str| {
            self.column(name)
                .ok_or_else(|| Error::Parameter(format!("no column named '{name}'")))
        };
        let y = get(response)?;
        let xs = predictors
            .iter()
            .map(|p| get(p))
            .collect::<Result<Vec<_>>>()?;
        let rows: Vec<usize> = (0..self.proposals.len())
            .filter(|&i| y[i].is_some() && xs.iter().all(|x| x[i].is_some()))
            .collect();
        let pick = |c: &[Option<f64>]| rows.iter().map(|&i| c[i].unwrap()).collect::<Vec<_>>();
        let columns: Vec<(String, Vec<f64>)> = predictors
            .iter()
            .zip(&xs)
            .map(|(name, x)| (name.to_string(), pick(x)))
            .collect();
        ols_standardized(&columns, &pick(y), true)
    }
}

pub const PAIRWISE_COLUMN: &str = "pairwise";

pub fn multidimensional_report(
    data: &PairwiseData,
    profiles: &Profiles,
    splits: &[SplitSpec],
    function: &ScoreFunction,
    options: &PairwiseOptions,
) -> Result<MultidimensionalTable> {
    if splits.is_empty() {
        return Err(Error::Parameter("at least one split is required".into()));
    }
    let mut table = MultidimensionalTable {
        proposals: data.proposals.clone(),
        columns: Vec::new(),
    };
    for split in splits {
        let d = split_divisiveness(data, profiles, split, function, None)?;
        table.add_column(
            split.dimension.name(),
            d.values().into_iter().map(|v| v.map(f64::abs)).collect(),
        )?;
    }
    let pd = pairwise_divisiveness(data, function, options, None)?;
    table.add_column(PAIRWISE_COLUMN, pd.values())?;
    Ok(table)
}

// ---------------------------------------------------------------------------
// Political responsiveness

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Left,
    Right,
    Centrist,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    ExcludeCentrist,
    CentristRight,
    CentristLeft,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [
        Scenario::ExcludeCentrist,
        Scenario::CentristRight,
        Scenario::CentristLeft,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::ExcludeCentrist => "exclude-centrist",
            Scenario::CentristRight => "centrist-right",
            Scenario::CentristLeft => "centrist-left",
        }
    }

    fn resolve(self, o: Orientation) -> Option<Lean> {
        match (o, self) {
            (Orientation::Left, _) | (Orientation::Centrist, Scenario::CentristLeft) => {
                Some(Lean::Left)
            }
            (Orientation::Right, _) | (Orientation::Centrist, Scenario::CentristRight) => {
                Some(Lean::Right)
            }
            (Orientation::Centrist, Scenario::ExcludeCentrist) => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lean {
    Left,
    Right,
}

impl Lean {
    fn index(self) -> usize {
        match self {
            Lean::Left => 0,
            Lean::Right => 1,
        }
    }
}

/// Labels each proposal left, right or neither from the candidates whose
/// programmes include it: a side needs at least half of its own candidates
/// and less than half of the other side's.
pub fn label_proposals(
    catalog: &Catalog,
    orientations: &BTreeMap<String, Orientation>,
    scenario: Scenario,
) -> Result<Vec<Option<Lean>>> {
    let mut size = [0usize; 2];
    for o in orientations.values() {
        if let Some(l) = scenario.resolve(*o) {
            size[l.index()] += 1;
        }
    }
    if size.contains(&0) {
        return Err(Error::Config(format!(
            "scenario {} leaves a side without candidates",
            scenario.name()
        )));
    }
    catalog
        .proposals()
        .iter()
        .map(|p| {
            let mut count = [0usize; 2];
            for c in &p.candidate_ids {
                let o = orientations.get(c).ok_or_else(|| {
                    Error::Config(format!(
                        "candidate '{c}' of proposal {} has no orientation",
                        p.id
                    ))
                })?;
                if let Some(l) = scenario.resolve(*o) {
                    count[l.index()] += 1;
                }
            }
            let share = |k: usize| count[k] as f64 / size[k] as f64;
            Ok(if share(0) >= 0.5 && share(1) < 0.5 {
                Some(Lean::Left)
            } else if share(1) >= 0.5 && share(0) < 0.5 {
                Some(Lean::Right)
            } else {
                None
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResponsivenessMatrix {
    pub scenario: Scenario,
    /// `rates[participant][proposal]`, index 0 = left, 1 = right.
    pub rates: [[Option<f64>; 2]; 2],
    pub approvals: [[u64; 2]; 2],
    pub judgments: [[u64; 2]; 2],
    pub proposals_per_side: [usize; 2],
}

impl ResponsivenessMatrix {
    pub fn rate(&self, participant: Lean, proposal: Lean) -> Option<f64> {
        self.rates[participant.index()][proposal.index()]
    }
}

/// Approval rate of left and right participants on left and right
/// proposals. Participants are placed by `split`, reading group A as
/// right-leaning and group B as left-leaning.
pub fn responsiveness_matrix(
    approvals: &[ApprovalRecord],
    catalog: &Catalog,
    profiles: &Profiles,
    split: &SplitSpec,
    orientations: &BTreeMap<String, Orientation>,
    scenario: Scenario,
) -> Result<ResponsivenessMatrix> {
    let labels = label_proposals(catalog, orientations, scenario)?;
    let mut approved = [[0u64; 2]; 2];
    let mut judged = [[0u64; 2]; 2];
    for a in approvals {
        let participant = match split.side_of(profiles, &a.user_id) {
            Side::A => Lean::Right,
            Side::B => Lean::Left,
            Side::Excluded => continue,
        };
        let Some(proposal) = catalog.index_of(a.proposal_id).and_then(|i| labels[i]) else {
            continue;
        };
        let (p, q) = (participant.index(), proposal.index());
        match a.agree {
            Agreement::Approve => {
                approved[p][q] += 1;
                judged[p][q] += 1;
            }
            Agreement::Disapprove => judged[p][q] += 1,
            Agreement::Abstain => {}
        }
    }
    let mut rates = [[None; 2]; 2];
    for p in 0..2 {
        for q in 0..2 {
            rates[p][q] = (judged[p][q] > 0).then(|| approved[p][q] as f64 / judged[p][q] as f64);
        }
    }
    let mut per_side = [0; 2];
    for l in labels.iter().flatten() {
        per_side[l.index()] += 1;
    }
    Ok(ResponsivenessMatrix {
        scenario,
        rates,
        approvals: approved,
        judgments: judged,
        proposals_per_side: per_side,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_timestamp, ParticipantProfile, Proposal};
    use crate::pairwise::Source;

    fn rec(user: u32, winner: u32, loser: u32) -> PairwiseRecord {
        let pair = PairId::new(winner, loser);
        PairwiseRecord {
            user,
            pair,
            selected: if pair.low == winner {
                Selection::Low
            } else {
                Selection::High
            },
            source: Source::Rank,
            universe: 5,
            score: None,
            timestamp: parse_timestamp("2022-04-01T00:00:00Z").unwrap(),
        }
    }

    fn data(n: usize, users: usize, records: Vec<PairwiseRecord>) -> PairwiseData {
        PairwiseData {
            proposals: (1..=n as u32).map(ProposalId).collect(),
            users: (0..users).map(|u| format!("u{u}")).collect(),
            records,
        }
    }

    fn profile(user: &str, politics: Option<i32>) -> ParticipantProfile {
        ParticipantProfile {
            user_id: user.into(),
            politics,
            location: None,
            age: None,
            sex: None,
            education: None,
            zone: None,
            universe: None,
            timestamp: parse_timestamp("2022-04-01T00:00:00Z").unwrap(),
        }
    }

    fn politics_split() -> SplitSpec {
        SplitSpec::defaults(Country::France)
            .into_iter()
            .find(|s| s.dimension == Dimension::Politics)
            .unwrap()
    }

    fn profiles(labels: &[(&str, i32)]) -> Profiles {
        labels
            .iter()
            .map(|(u, l)| (u.to_string(), profile(u, Some(*l))))
            .collect()
    }

    #[test]
    fn default_tables_are_consistent() {
        for c in [Country::France, Country::Brazil] {
            let splits = SplitSpec::defaults(c);
            assert_eq!(splits.len(), 6);
            for s in &splits {
                s.validate().unwrap();
            }
        }
        let br = SplitSpec::defaults(Country::Brazil);
        let loc = &br[1];
        assert_eq!(loc.side_of_label(Some(1234)), Side::A);
        assert_eq!(loc.side_of_label(Some(3516)), Side::B);
        assert_eq!(loc.side_of_label(Some(999)), Side::Excluded);
        assert_eq!(politics_split().side_of_label(Some(3)), Side::Excluded);
    }

    #[test]
    fn overlapping_split_rejected() {
        assert!(SplitSpec::new(Dimension::Sex, ("F", &[1]), ("M", &[1, 2]), &[]).is_err());
    }

    #[test]
    fn split_with_empty_side_errors() {
        let d = data(2, 2, vec![rec(0, 0, 1), rec(1, 1, 0)]);
        let p = profiles(&[("u0", 4), ("u1", 5)]);
        let err = split_scores(&d, &p, &politics_split(), &ScoreFunction::Win).unwrap_err();
        assert!(err.to_string().contains("Liberal"), "{err}");
    }

    #[test]
    fn split_sixty_forty() {
        // A: proposal 0 wins 3 of 5; B: wins 2 of 5
        let mut r = Vec::new();
        for k in 0..5 {
            r.push(if k < 3 { rec(0, 0, 1) } else { rec(0, 1, 0) });
            r.push(if k < 2 { rec(1, 0, 1) } else { rec(1, 1, 0) });
        }
        let d = data(2, 2, r);
        let p = profiles(&[("u0", 5), ("u1", 1)]);
        let t = split_divisiveness(&d, &p, &politics_split(), &ScoreFunction::Win, None).unwrap();
        assert!((t.entries[0].value.unwrap() - 0.2).abs() < 1e-12);
        let s = split_divisiveness(
            &d,
            &p,
            &politics_split().swapped(),
            &ScoreFunction::Win,
            None,
        )
        .unwrap();
        assert!((s.entries[0].value.unwrap() + 0.2).abs() < 1e-12);
    }

    #[test]
    fn split_matches_direct_per_side() {
        let r = vec![
            rec(0, 0, 1),
            rec(0, 2, 1),
            rec(1, 1, 2),
            rec(2, 2, 0),
            rec(3, 0, 2),
            rec(3, 1, 0),
        ];
        let d = data(3, 4, r.clone());
        let p = profiles(&[("u0", 4), ("u1", 5), ("u2", 1), ("u3", 2)]);
        let (sa, sb) = split_scores(&d, &p, &politics_split(), &ScoreFunction::Win).unwrap();
        let direct = |users: &[u32], i: u32| {
            let w = r
                .iter()
                .filter(|x| users.contains(&x.user) && x.winner() == Some(i))
                .count();
            let a = r
                .iter()
                .filter(|x| users.contains(&x.user) && x.involves(i))
                .count();
            w as f64 / a as f64
        };
        for i in 0..3 {
            assert_eq!(sa.values[i as usize], Some(direct(&[0, 1], i)));
            assert_eq!(sb.values[i as usize], Some(direct(&[2, 3], i)));
        }
    }

    #[test]
    fn identical_sides_zero() {
        let r = vec![rec(0, 0, 1), rec(0, 1, 2), rec(1, 0, 1), rec(1, 1, 2)];
        let d = data(3, 2, r);
        let p = profiles(&[("u0", 4), ("u1", 1)]);
        let t = split_divisiveness(&d, &p, &politics_split(), &ScoreFunction::Win, None).unwrap();
        assert!(t.values().iter().all(|v| *v == Some(0.0)));
    }

    #[test]
    fn aggregate_cases() {
        let a = [Some(0.1), Some(0.5), Some(0.9), None];
        assert!(aggregate_divisiveness(&a, &a).unwrap().abs() < 1e-12);
        let b = [Some(0.9), Some(0.5), Some(0.1), Some(0.3)];
        assert!(aggregate_divisiveness(&a, &b).unwrap().abs() < 1e-12);
        assert!(aggregate_divisiveness(&a[..2], &b[..2]).is_err());
    }

    #[test]
    fn two_proposals_unanimous_users() {
        let d = data(
            2,
            4,
            vec![rec(0, 0, 1), rec(1, 0, 1), rec(2, 1, 0), rec(3, 1, 0)],
        );
        let t = pairwise_divisiveness(&d, &ScoreFunction::Win, &PairwiseOptions::default(), None)
            .unwrap();
        assert_eq!(t.entries[0].value, Some(1.0));
        assert_eq!(t.entries[1].value, Some(1.0));
        assert_eq!(t.entries[0].n_valid_terms, Some(1));
    }

    #[test]
    fn homogeneous_population_flags_no_terms() {
        let d = data(
            3,
            3,
            (0..3)
                .flat_map(|u| [rec(u, 0, 1), rec(u, 1, 2), rec(u, 0, 2)])
                .collect(),
        );
        let t = pairwise_divisiveness(&d, &ScoreFunction::Win, &PairwiseOptions::default(), None)
            .unwrap();
        for e in &t.entries {
            assert_eq!(e.value, Some(0.0));
            assert_eq!(e.flags, vec![FLAG_NO_VALID_TERMS.to_string()]);
        }
    }

    #[test]
    fn tied_user_is_left_out_under_majority() {
        // u2 chose each side once; under majority they are in neither side
        let r = vec![rec(0, 0, 1), rec(1, 1, 0), rec(2, 0, 1), rec(2, 1, 0)];
        let d = data(2, 3, r);
        let maj = pairwise_divisiveness(&d, &ScoreFunction::Win, &PairwiseOptions::default(), None)
            .unwrap();
        assert_eq!(maj.entries[0].value, Some(1.0));
        let any = PairwiseOptions {
            membership: Membership::AnyRecord,
            ..Default::default()
        };
        let t = pairwise_divisiveness(&d, &ScoreFunction::Win, &any, None).unwrap();
        // low side {u0,u2}: W_0 = 2/3; high side {u1,u2}: W_0 = 1/3
        assert!((t.entries[0].value.unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn literal_normalization_divides_by_n_minus_one() {
        let d = data(3, 2, vec![rec(0, 0, 1), rec(1, 1, 0)]);
        let lit = PairwiseOptions {
            normalization: Normalization::Literal,
            ..Default::default()
        };
        let t = pairwise_divisiveness(&d, &ScoreFunction::Win, &lit, None).unwrap();
        assert_eq!(t.entries[0].value, Some(0.5));
        assert_eq!(t.entries[0].n_valid_terms, Some(1));
    }

    #[test]
    fn fast_and_generic_paths_agree() {
        let mut r = Vec::new();
        for u in 0..6u32 {
            for (a, b) in [(0, 1), (1, 2), (2, 3), (0, 3), (1, 3)] {
                if (u + a + b) % 3 == 0 {
                    r.push(rec(u, b, a));
                } else {
                    r.push(rec(u, a, b));
                }
            }
        }
        let d = data(4, 6, r);
        let fast =
            pairwise_divisiveness(&d, &ScoreFunction::Win, &PairwiseOptions::default(), None)
                .unwrap();
        let slow_opts = PairwiseOptions {
            fast_path: false,
            ..Default::default()
        };
        let slow = pairwise_divisiveness(&d, &ScoreFunction::Win, &slow_opts, None).unwrap();
        for (a, b) in fast.values().iter().zip(slow.values()) {
            assert!((a.unwrap() - b.unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn multidimensional_columns() {
        let r = vec![rec(0, 0, 1), rec(0, 1, 2), rec(1, 2, 0), rec(1, 1, 0)];
        let d = data(3, 2, r);
        let p = profiles(&[("u0", 4), ("u1", 1)]);
        let t = multidimensional_report(
            &d,
            &p,
            &[politics_split()],
            &ScoreFunction::Win,
            &Default::default(),
        )
        .unwrap();
        assert_eq!(t.columns.len(), 2);
        assert!(t.column("politics").is_some() && t.column(PAIRWISE_COLUMN).is_some());
    }

    fn catalog(spec: &[(u32, &[&str])]) -> Catalog {
        Catalog::new(
            spec.iter()
                .map(|(id, c)| Proposal {
                    id: ProposalId(*id),
                    text: format!("p{id}"),
                    candidate_ids: c.iter().map(|s| s.to_string()).collect(),
                })
                .collect(),
        )
        .unwrap()
    }

    fn orientations() -> BTreeMap<String, Orientation> {
        [
            ("l1", Orientation::Left),
            ("l2", Orientation::Left),
            ("r1", Orientation::Right),
            ("r2", Orientation::Right),
            ("c", Orientation::Centrist),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    #[test]
    fn labeling_and_centrist_scenarios() {
        let cat = catalog(&[
            (1, &["l1"]),
            (2, &["r1", "r2"]),
            (3, &["c"]),
            (4, &["l1", "c"]),
            (5, &[]),
        ]);
        let ex = label_proposals(&cat, &orientations(), Scenario::ExcludeCentrist).unwrap();
        assert_eq!(
            ex,
            vec![
                Some(Lean::Left),
                Some(Lean::Right),
                None,
                Some(Lean::Left),
                None
            ]
        );
        let cr = label_proposals(&cat, &orientations(), Scenario::CentristRight).unwrap();
        // right side is {r1, r2, c}: "c" alone is 1/3
        assert_eq!(cr[2], None);
        assert_eq!(cr[3], Some(Lean::Left));
        let cl = label_proposals(&cat, &orientations(), Scenario::CentristLeft).unwrap();
        // left side is {l1, l2, c}: "c" alone is 1/3, l1+c is 2/3
        assert_eq!(cl[2], None);
        assert_eq!(cl[3], Some(Lean::Left));
        let bad = catalog(&[(1, &["ghost"])]);
        assert!(label_proposals(&bad, &orientations(), Scenario::ExcludeCentrist).is_err());
    }

    #[test]
    fn responsiveness_matches_direct_tabulation() {
        let cat = catalog(&[
            (1, &["l1", "l2"]),
            (2, &["l1"]),
            (3, &["r1"]),
            (4, &["r1", "r2"]),
        ]);
        let orient: BTreeMap<String, Orientation> = orientations()
            .into_iter()
            .filter(|(k, _)| k != "c")
            .collect();
        let t = parse_timestamp("2022-04-01T00:00:00Z").unwrap();
        let mk = |u: &str, p: u32, a: Agreement| ApprovalRecord {
            user_id: u.into(),
            proposal_id: ProposalId(p),
            agree: a,
            universe: 5,
            score: Some(0.9),
            timestamp: t,
            locale: "fr".into(),
        };
        use Agreement::*;
        let approvals = vec![
            mk("left", 1, Approve),
            mk("left", 2, Approve),
            mk("left", 3, Disapprove),
            mk("left", 4, Abstain),
            mk("right", 1, Disapprove),
            mk("right", 2, Approve),
            mk("right", 3, Approve),
            mk("right", 4, Approve),
        ];
        let p = profiles(&[("left", 1), ("right", 5)]);
        let m = responsiveness_matrix(
            &approvals,
            &cat,
            &p,
            &politics_split(),
            &orient,
            Scenario::ExcludeCentrist,
        )
        .unwrap();
        assert_eq!(m.rate(Lean::Left, Lean::Left), Some(1.0));
        assert_eq!(m.rate(Lean::Left, Lean::Right), Some(0.0));
        assert_eq!(m.rate(Lean::Right, Lean::Left), Some(0.5));
        assert_eq!(m.rate(Lean::Right, Lean::Right), Some(1.0));
        assert_eq!(m.proposals_per_side, [2, 2]);
    }
}
