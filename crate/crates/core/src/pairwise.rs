//! Pairwise-comparison records, the win-count tally, and the
//! consistency/transitivity diagnostics.
//!
//! Proposal references inside this module are dense indices into the
//! catalog (sorted by id), so `low < high` holds for indices exactly when
//! it holds for the proposal ids.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::corpus::{
    format_timestamp, parse_timestamp, Agreement, ApprovalRecord, Catalog, ProposalId, RankRecord,
    Timestamp,
};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PairId {
    pub low: u32,
    pub high: u32,
}

impl PairId {
    /// Orders the two indices; panics on `a == b`.
    pub fn new(a: u32, b: u32) -> Self {
        assert_ne!(a, b, "a pair needs two distinct proposals");
        if a < b {
            PairId { low: a, high: b }
        } else {
            PairId { low: b, high: a }
        }
    }

    pub fn contains(&self, p: u32) -> bool {
        self.low == p || self.high == p
    }

    /// Position of this pair in row-major upper-triangle order.
    pub fn triangle_index(&self, n: usize) -> usize {
        let (i, j) = (self.low as usize, self.high as usize);
        i * (2 * n - i - 1) / 2 + (j - i - 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selection {
    Low,
    High,
    /// "Don't have preference"; kept in the data, excluded from every metric.
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Approval,
    Rank,
}

impl Source {
    pub fn label(self) -> &'static str {
        match self {
            Source::Approval => "agree",
            Source::Rank => "rank",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairwiseRecord {
    /// Index into [`PairwiseData::users`].
    pub user: u32,
    pub pair: PairId,
    pub selected: Selection,
    pub source: Source,
    pub universe: i32,
    pub score: Option<f64>,
    pub timestamp: Timestamp,
}

impl PairwiseRecord {
    pub fn winner(&self) -> Option<u32> {
        match self.selected {
            Selection::Low => Some(self.pair.low),
            Selection::High => Some(self.pair.high),
            Selection::None => None,
        }
    }

    pub fn loser(&self) -> Option<u32> {
        match self.selected {
            Selection::Low => Some(self.pair.high),
            Selection::High => Some(self.pair.low),
            Selection::None => None,
        }
    }

    pub fn is_tie(&self) -> bool {
        self.selected == Selection::None
    }

    pub fn involves(&self, p: u32) -> bool {
        self.pair.contains(p)
    }
}

/// Pairwise records together with the id tables needed to interpret them.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PairwiseData {
    /// Dense index → proposal id, ascending.
    pub proposals: Vec<ProposalId>,
    /// Dense index → external user id.
    pub users: Vec<String>,
    pub records: Vec<PairwiseRecord>,
}

impl PairwiseData {
    pub fn n(&self) -> usize {
        self.proposals.len()
    }

    /// `"low-high"` in proposal ids.
    pub fn card_id(&self, pair: PairId) -> String {
        format!(
            "{}-{}",
            self.proposals[pair.low as usize], self.proposals[pair.high as usize]
        )
    }

    pub fn index_of(&self, id: ProposalId) -> Option<u32> {
        self.proposals.binary_search(&id).ok().map(|i| i as u32)
    }

    pub fn with_records(&self, records: Vec<PairwiseRecord>) -> PairwiseData {
        PairwiseData {
            proposals: self.proposals.clone(),
            users: self.users.clone(),
            records,
        }
    }

    /// Records with ties removed.
    pub fn decisive(&self) -> Vec<PairwiseRecord> {
        self.records
            .iter()
            .filter(|r| !r.is_tie())
            .cloned()
            .collect()
    }
}

/// Accumulates pairwise records from approval and rank ballots.
pub struct PairwiseBuilder<'a> {
    catalog: &'a Catalog,
    users: Vec<String>,
    user_index: HashMap<String, u32>,
    records: Vec<PairwiseRecord>,
}

impl<'a> PairwiseBuilder<'a> {
    pub fn new(catalog: &'a Catalog) -> Self {
        Self {
            catalog,
            users: Vec::new(),
            user_index: HashMap::new(),
            records: Vec::new(),
        }
    }

    fn user(&mut self, id: &str) -> u32 {
        if let Some(&u) = self.user_index.get(id) {
            return u;
        }
        let u = self.users.len() as u32;
        self.users.push(id.to_string());
        self.user_index.insert(id.to_string(), u);
        u
    }

    fn index(&self, id: ProposalId) -> Result<u32> {
        self.catalog
            .index_of(id)
            .map(|i| i as u32)
            .ok_or_else(|| Error::Catalog(format!("unknown proposal {id}")))
    }

    /// Every approved proposal beats every disapproved one, per user.
    /// When a user judged a proposal more than once, the latest judgment
    /// counts. Each derived record takes universe, score and timestamp from
    /// the more recent of its two source rows. Abstentions contribute
    /// nothing.
    pub fn add_approvals(&mut self, approvals: &[ApprovalRecord]) -> Result<()> {
        let mut by_user: BTreeMap<&str, BTreeMap<ProposalId, &ApprovalRecord>> = BTreeMap::new();
        for a in approvals {
            let slot = by_user.entry(a.user_id.as_str()).or_default();
            match slot.get(&a.proposal_id) {
                Some(prev) if prev.timestamp > a.timestamp => {}
                _ => {
                    slot.insert(a.proposal_id, a);
                }
            }
        }
        for (user_id, latest) in by_user {
            let approved: Vec<&ApprovalRecord> = latest
                .values()
                .filter(|a| a.agree == Agreement::Approve)
                .copied()
                .collect();
            let disapproved: Vec<&ApprovalRecord> = latest
                .values()
                .filter(|a| a.agree == Agreement::Disapprove)
                .copied()
                .collect();
            if approved.is_empty() || disapproved.is_empty() {
                continue;
            }
            let user = self.user(user_id);
            for win in &approved {
                let w = self.index(win.proposal_id)?;
                for lose in &disapproved {
                    let l = self.index(lose.proposal_id)?;
                    let meta = if lose.timestamp > win.timestamp {
                        lose
                    } else {
                        win
                    };
                    let pair = PairId::new(w, l);
                    self.records.push(PairwiseRecord {
                        user,
                        pair,
                        selected: if pair.low == w {
                            Selection::Low
                        } else {
                            Selection::High
                        },
                        source: Source::Approval,
                        universe: meta.universe,
                        score: meta.score,
                        timestamp: meta.timestamp,
                    });
                }
            }
        }
        Ok(())
    }

    /// A panel of length k yields k(k-1)/2 records, each higher-listed
    /// proposal selected over each lower-listed one.
    pub fn add_ranks(&mut self, ranks: &[RankRecord]) -> Result<()> {
        for r in ranks {
            let user = self.user(&r.user_id);
            let idx = r
                .panel
                .iter()
                .map(|id| self.index(*id))
                .collect::<Result<Vec<_>>>()?;
            for (a, &w) in idx.iter().enumerate() {
                for &l in &idx[a + 1..] {
                    if w == l {
                        return Err(Error::Catalog(format!(
                            "panel of {} repeats a proposal",
                            r.user_id
                        )));
                    }
                    let pair = PairId::new(w, l);
                    self.records.push(PairwiseRecord {
                        user,
                        pair,
                        selected: if pair.low == w {
                            Selection::Low
                        } else {
                            Selection::High
                        },
                        source: Source::Rank,
                        universe: r.universe,
                        score: r.score,
                        timestamp: r.timestamp,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn finish(self) -> PairwiseData {
        PairwiseData {
            proposals: self.catalog.ids(),
            users: self.users,
            records: self.records,
        }
    }
}

pub fn approvals_to_pairs(catalog: &Catalog, approvals: &[ApprovalRecord]) -> Result<PairwiseData> {
    let mut b = PairwiseBuilder::new(catalog);
    b.add_approvals(approvals)?;
    Ok(b.finish())
}

pub fn ranks_to_pairs(catalog: &Catalog, ranks: &[RankRecord]) -> Result<PairwiseData> {
    let mut b = PairwiseBuilder::new(catalog);
    b.add_ranks(ranks)?;
    Ok(b.finish())
}

/// `x[i][j]` = number of times `i` was selected over `j`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairwiseTally {
    n: usize,
    x: Vec<u64>,
}

impl PairwiseTally {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            x: vec![0; n * n],
        }
    }

    /// Ties are skipped.
    pub fn build<'r>(
        records: impl IntoIterator<Item = &'r PairwiseRecord>,
        n: usize,
    ) -> Result<Self> {
        let mut t = Self::zeros(n);
        for r in records {
            let high = r.pair.high as usize;
            if high >= n {
                return Err(Error::UnknownProposal { index: high, n });
            }
            if let (Some(w), Some(l)) = (r.winner(), r.loser()) {
                t.x[w as usize * n + l as usize] += 1;
            }
        }
        Ok(t)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn wins(&self, i: usize, j: usize) -> u64 {
        self.x[i * self.n + j]
    }

    pub fn add_win(&mut self, winner: usize, loser: usize) {
        self.x[winner * self.n + loser] += 1;
    }

    pub fn total(&self) -> u64 {
        self.x.iter().sum()
    }

    /// Number of contests proposal `i` took part in.
    pub fn appearances(&self, i: usize) -> u64 {
        (0..self.n).map(|j| self.wins(i, j) + self.wins(j, i)).sum()
    }

    pub fn merge(&mut self, other: &PairwiseTally) {
        assert_eq!(self.n, other.n);
        for (a, b) in self.x.iter_mut().zip(&other.x) {
            *a += b;
        }
    }
}

pub fn build_tally(records: &[PairwiseRecord], n: usize) -> Result<PairwiseTally> {
    PairwiseTally::build(records, n)
}

// ---------------------------------------------------------------------------
// Consistency

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConsistencyMode {
    /// Share of a repeated cell's observations that follow its modal
    /// direction, weighted by observation count.
    #[default]
    ModalFraction,
    /// Share of observation pairs within a cell that agree, weighted by the
    /// number of observation pairs.
    PairAgreement,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    /// `None` when no user judged any pair twice.
    pub overall: Option<f64>,
    pub repeated_cells: usize,
    pub per_user: BTreeMap<String, f64>,
}

fn cell_counts(records: &[PairwiseRecord]) -> BTreeMap<(u32, PairId), (u64, u64)> {
    let mut cells: BTreeMap<(u32, PairId), (u64, u64)> = BTreeMap::new();
    for r in records {
        let c = cells.entry((r.user, r.pair)).or_default();
        match r.selected {
            Selection::Low => c.0 += 1,
            Selection::High => c.1 += 1,
            Selection::None => {}
        }
    }
    cells
}

pub fn consistency(data: &PairwiseData, mode: ConsistencyMode) -> ConsistencyReport {
    let cells = cell_counts(&data.records);
    let mut per_user: BTreeMap<u32, (f64, f64)> = BTreeMap::new();
    let mut repeated = 0usize;
    for (&(user, _), &(lo, hi)) in &cells {
        let obs = lo + hi;
        if obs < 2 {
            continue;
        }
        repeated += 1;
        let (num, den) = match mode {
            ConsistencyMode::ModalFraction => (lo.max(hi) as f64, obs as f64),
            ConsistencyMode::PairAgreement => {
                let c2 = |k: u64| (k * k.saturating_sub(1) / 2) as f64;
                (c2(lo) + c2(hi), c2(obs))
            }
        };
        let e = per_user.entry(user).or_default();
        e.0 += num;
        e.1 += den;
    }
    let (num, den) = per_user
        .values()
        .fold((0.0, 0.0), |acc, v| (acc.0 + v.0, acc.1 + v.1));
    ConsistencyReport {
        overall: (den > 0.0).then(|| num / den),
        repeated_cells: repeated,
        per_user: per_user
            .into_iter()
            .map(|(u, (n, d))| (data.users[u as usize].clone(), n / d))
            .collect(),
    }
}

// ---------------------------------------------------------------------------
// Transitivity

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitivityReport {
    /// Mean over (user, triplet) acyclic percentages; `None` without any
    /// qualifying triplet.
    pub overall: Option<f64>,
    pub triplets: usize,
}

/// Acyclic share of a triplet `a < b < c` given `(low, high)` counts for the
/// pairs ab, bc and ac.
pub fn triplet_transitivity(ab: (u64, u64), bc: (u64, u64), ac: (u64, u64)) -> Option<f64> {
    let total = (ab.0 + ab.1) * (bc.0 + bc.1) * (ac.0 + ac.1);
    if total == 0 {
        return None;
    }
    // a>b, b>c, c>a  and  b>a, c>b, a>c
    let cyclic = ab.0 * bc.0 * ac.1 + ab.1 * bc.1 * ac.0;
    Some((total - cyclic) as f64 / total as f64)
}

/// Per user, every triplet whose three pairs were all observed contributes
/// its acyclic share; triplets that sit together inside any one of the
/// user's rank panels are skipped since a single panel is transitive by
/// construction.
pub fn transitivity(data: &PairwiseData, panels: &[RankRecord]) -> TransitivityReport {
    let user_index: HashMap<&str, u32> = data
        .users
        .iter()
        .enumerate()
        .map(|(i, u)| (u.as_str(), i as u32))
        .collect();
    let mut same_panel: HashMap<u32, HashSet<(u32, u32, u32)>> = HashMap::new();
    for r in panels {
        let Some(&u) = user_index.get(r.user_id.as_str()) else {
            continue;
        };
        let mut idx: Vec<u32> = r.panel.iter().filter_map(|id| data.index_of(*id)).collect();
        idx.sort_unstable();
        let set = same_panel.entry(u).or_default();
        for a in 0..idx.len() {
            for b in a + 1..idx.len() {
                for c in b + 1..idx.len() {
                    set.insert((idx[a], idx[b], idx[c]));
                }
            }
        }
    }

    let cells = cell_counts(&data.records);
    let mut by_user: BTreeMap<u32, BTreeMap<PairId, (u64, u64)>> = BTreeMap::new();
    for ((user, pair), counts) in cells {
        if counts.0 + counts.1 > 0 {
            by_user.entry(user).or_default().insert(pair, counts);
        }
    }

    let empty = HashSet::new();
    let mut sum = 0.0;
    let mut count = 0usize;
    for (user, pairs) in &by_user {
        let skip = same_panel.get(user).unwrap_or(&empty);
        let mut neighbours: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
        for p in pairs.keys() {
            neighbours.entry(p.low).or_default().insert(p.high);
        }
        for (&a, above_a) in &neighbours {
            for &b in above_a {
                let Some(above_b) = neighbours.get(&b) else {
                    continue;
                };
                for &c in above_b.intersection(above_a) {
                    if skip.contains(&(a, b, c)) {
                        continue;
                    }
                    let ab = pairs[&PairId { low: a, high: b }];
                    let bc = pairs[&PairId { low: b, high: c }];
                    let ac = pairs[&PairId { low: a, high: c }];
                    if let Some(t) = triplet_transitivity(ab, bc, ac) {
                        sum += t;
                        count += 1;
                    }
                }
            }
        }
    }
    TransitivityReport {
        overall: (count > 0).then(|| sum / count as f64),
        triplets: count,
    }
}

// ---------------------------------------------------------------------------
// Pairwise table (option_a_sorted, option_b_sorted, card_id, selected, ...)

const PAIRWISE_HEADER: [&str; 12] = [
    "id",
    "user_id",
    "option_a",
    "option_b",
    "option_a_sorted",
    "option_b_sorted",
    "card_id",
    "selected",
    "created_at",
    "score",
    "universe",
    "source",
];

/// Writes records as a pairwise table. Display order is not retained, so
/// `option_a`/`option_b` repeat the sorted ids; `selected` is the chosen
/// proposal id or 0 for no preference.
pub fn write_pairwise<W: Write>(w: W, data: &PairwiseData) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(PAIRWISE_HEADER)?;
    for (i, r) in data.records.iter().enumerate() {
        let low = data.proposals[r.pair.low as usize].to_string();
        let high = data.proposals[r.pair.high as usize].to_string();
        let selected = r.winner().map_or_else(
            || "0".to_string(),
            |w| data.proposals[w as usize].to_string(),
        );
        out.write_record([
            (i + 1).to_string(),
            data.users[r.user as usize].clone(),
            low.clone(),
            high.clone(),
            low,
            high,
            data.card_id(r.pair),
            selected,
            format_timestamp(&r.timestamp),
            r.score.map(|s| s.to_string()).unwrap_or_default(),
            r.universe.to_string(),
            r.source.label().to_string(),
        ])?;
    }
    out.flush().map_err(|e| Error::io("<pairwise>", e))?;
    Ok(())
}

/// Reads a pairwise table written by [`write_pairwise`] or exported by the
/// platform. Proposal ids must resolve in `catalog`.
pub fn read_pairwise<R: Read>(reader: R, name: &str, catalog: &Catalog) -> Result<PairwiseData> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |c: &str| {
        headers
            .iter()
            .position(|h| h == c)
            .ok_or_else(|| Error::Schema {
                file: name.to_string(),
                column: c.to_string(),
            })
    };
    let (c_user, c_a, c_b, c_sel, c_time, c_score, c_uni, c_src) = (
        col("user_id")?,
        col("option_a")?,
        col("option_b")?,
        col("selected")?,
        col("created_at")?,
        col("score")?,
        col("universe")?,
        col("source")?,
    );
    let mut users = Vec::new();
    let mut user_index: HashMap<String, u32> = HashMap::new();
    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let err = |m: String| Error::Row {
            file: name.to_string(),
            line,
            message: m,
        };
        let get = |c: usize| rec.get(c).unwrap_or("");
        let prop = |c: usize| -> Result<u32> {
            let raw = get(c);
            let id = raw
                .parse::<u32>()
                .map_err(|_| err(format!("invalid proposal id `{raw}`")))?;
            catalog
                .index_of(ProposalId(id))
                .map(|i| i as u32)
                .ok_or_else(|| err(format!("unknown proposal {id}")))
        };
        let (a, b) = (prop(c_a)?, prop(c_b)?);
        if a == b {
            return Err(err("option_a equals option_b".into()));
        }
        let pair = PairId::new(a, b);
        let selected = match get(c_sel) {
            "0" => Selection::None,
            _ => {
                let s = prop(c_sel)?;
                if s == pair.low {
                    Selection::Low
                } else if s == pair.high {
                    Selection::High
                } else {
                    return Err(err("selected proposal is not part of the pair".into()));
                }
            }
        };
        let source = match get(c_src) {
            "agree" | "approval" => Source::Approval,
            "rank" => Source::Rank,
            other => return Err(err(format!("unknown source `{other}`"))),
        };
        let timestamp = parse_timestamp(get(c_time))
            .ok_or_else(|| err(format!("invalid timestamp `{}`", get(c_time))))?;
        let score = match get(c_score) {
            "" => None,
            raw => Some(
                raw.parse::<f64>()
                    .map_err(|_| err(format!("invalid score `{raw}`")))?,
            ),
        };
        let universe = get(c_uni)
            .parse()
            .map_err(|_| err(format!("invalid universe `{}`", get(c_uni))))?;
        let uid = get(c_user).to_string();
        let user = *user_index.entry(uid.clone()).or_insert_with(|| {
            users.push(uid);
            users.len() as u32 - 1
        });
        records.push(PairwiseRecord {
            user,
            pair,
            selected,
            source,
            universe,
            score,
            timestamp,
        });
    }
    Ok(PairwiseData {
        proposals: catalog.ids(),
        users,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_timestamp;

    fn t0() -> Timestamp {
        parse_timestamp("2022-04-01T00:00:00Z").unwrap()
    }

    fn approval(user: &str, id: u32, agree: Agreement) -> ApprovalRecord {
        ApprovalRecord {
            user_id: user.into(),
            proposal_id: ProposalId(id),
            agree,
            universe: 5,
            score: Some(0.9),
            timestamp: t0(),
            locale: "fr".into(),
        }
    }

    fn panel(user: &str, ids: &[u32]) -> RankRecord {
        RankRecord {
            user_id: user.into(),
            panel: ids.iter().map(|&i| ProposalId(i)).collect(),
            updated: true,
            universe: ids.len() as i32,
            score: Some(0.9),
            timestamp: t0(),
        }
    }

    fn winners(data: &PairwiseData) -> BTreeSet<(ProposalId, ProposalId)> {
        data.records
            .iter()
            .map(|r| {
                (
                    data.proposals[r.winner().unwrap() as usize],
                    data.proposals[r.loser().unwrap() as usize],
                )
            })
            .collect()
    }

    #[test]
    fn approvals_cross_product() {
        use Agreement::*;
        let cat = Catalog::numbered(4);
        let a = [
            approval("u", 1, Approve),
            approval("u", 2, Approve),
            approval("u", 3, Disapprove),
            approval("u", 4, Disapprove),
        ];
        let data = approvals_to_pairs(&cat, &a).unwrap();
        let p = |x, y| (ProposalId(x), ProposalId(y));
        assert_eq!(
            winners(&data),
            [p(1, 3), p(1, 4), p(2, 3), p(2, 4)].into_iter().collect()
        );
        assert!(data.records.iter().all(|r| r.source == Source::Approval));
    }

    #[test]
    fn all_approved_yields_nothing() {
        use Agreement::*;
        let cat = Catalog::numbered(3);
        let a = [
            approval("u", 1, Approve),
            approval("u", 2, Approve),
            approval("u", 3, Approve),
        ];
        assert!(approvals_to_pairs(&cat, &a).unwrap().records.is_empty());
    }

    #[test]
    fn abstention_omitted() {
        use Agreement::*;
        let cat = Catalog::numbered(3);
        let a = [
            approval("u", 1, Approve),
            approval("u", 2, Abstain),
            approval("u", 3, Disapprove),
        ];
        let data = approvals_to_pairs(&cat, &a).unwrap();
        assert_eq!(data.records.len(), 1);
        assert_eq!(
            winners(&data),
            [(ProposalId(1), ProposalId(3))].into_iter().collect()
        );
    }

    #[test]
    fn panel_sizes() {
        let cat = Catalog::numbered(4);
        assert_eq!(
            ranks_to_pairs(&cat, &[panel("u", &[1, 2, 3, 4])])
                .unwrap()
                .records
                .len(),
            6
        );
        assert_eq!(
            ranks_to_pairs(&cat, &[panel("u", &[3])])
                .unwrap()
                .records
                .len(),
            0
        );
        assert_eq!(
            ranks_to_pairs(&cat, &[panel("u", &[3, 1])])
                .unwrap()
                .records
                .len(),
            1
        );
    }

    #[test]
    fn panel_pairs_follow_order() {
        let cat = Catalog::numbered(4);
        let data = ranks_to_pairs(&cat, &[panel("u", &[2, 4, 1, 3])]).unwrap();
        let p = |x, y| (ProposalId(x), ProposalId(y));
        assert_eq!(
            winners(&data),
            [p(2, 4), p(2, 1), p(2, 3), p(4, 1), p(4, 3), p(1, 3)]
                .into_iter()
                .collect()
        );
    }

    #[test]
    fn tally_basics() {
        let cat = Catalog::numbered(3);
        let data = ranks_to_pairs(&cat, &[panel("u", &[1, 2])]).unwrap();
        assert_eq!(build_tally(&[], 3).unwrap().total(), 0);
        let t = build_tally(&data.records, 3).unwrap();
        assert_eq!(t.wins(0, 1), 1);
        assert_eq!(t.wins(1, 0), 0);
        assert!(build_tally(&data.records, 1).is_err());
    }

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
            timestamp: t0(),
        }
    }

    fn data_of(records: Vec<PairwiseRecord>, n: usize) -> PairwiseData {
        let users = records.iter().map(|r| r.user).max().map_or(0, |u| u + 1);
        PairwiseData {
            proposals: (1..=n as u32).map(ProposalId).collect(),
            users: (0..users).map(|u| format!("u{u}")).collect(),
            records,
        }
    }

    #[test]
    fn consistency_unanimous_cell() {
        let d = data_of(vec![rec(0, 0, 1), rec(0, 0, 1), rec(0, 0, 1)], 2);
        assert_eq!(
            consistency(&d, ConsistencyMode::ModalFraction).overall,
            Some(1.0)
        );
    }

    #[test]
    fn consistency_three_to_one() {
        let d = data_of(
            vec![rec(0, 0, 1), rec(0, 0, 1), rec(0, 0, 1), rec(0, 1, 0)],
            2,
        );
        let r = consistency(&d, ConsistencyMode::ModalFraction);
        assert_eq!(r.overall, Some(0.75));
        assert_eq!(r.per_user["u0"], 0.75);
        // 3 agreeing observation pairs of 6
        assert_eq!(
            consistency(&d, ConsistencyMode::PairAgreement).overall,
            Some(0.5)
        );
    }

    #[test]
    fn consistency_without_repeats_is_undefined() {
        let d = data_of(vec![rec(0, 0, 1), rec(1, 1, 0)], 2);
        assert_eq!(
            consistency(&d, ConsistencyMode::ModalFraction).overall,
            None
        );
    }

    #[test]
    fn consistency_ignores_ties() {
        let mut tie = rec(0, 0, 1);
        tie.selected = Selection::None;
        let d = data_of(vec![rec(0, 0, 1), tie], 2);
        assert_eq!(
            consistency(&d, ConsistencyMode::ModalFraction).overall,
            None
        );
    }

    #[test]
    fn worked_triplet_is_fifty_percent() {
        // A>B x5, B>C x5, A>C x1, C>A x1
        assert_eq!(triplet_transitivity((5, 0), (5, 0), (1, 1)), Some(0.5));
        let mut v = Vec::new();
        v.extend(std::iter::repeat_n(rec(0, 0, 1), 5));
        v.extend(std::iter::repeat_n(rec(0, 1, 2), 5));
        v.push(rec(0, 0, 2));
        v.push(rec(0, 2, 0));
        let r = transitivity(&data_of(v, 3), &[]);
        assert_eq!(r.overall, Some(0.5));
        assert_eq!(r.triplets, 1);
    }

    #[test]
    fn linear_user_fully_transitive() {
        let v = vec![
            rec(0, 0, 1),
            rec(0, 1, 2),
            rec(0, 0, 2),
            rec(0, 2, 3),
            rec(0, 0, 3),
            rec(0, 1, 3),
        ];
        assert_eq!(transitivity(&data_of(v, 4), &[]).overall, Some(1.0));
    }

    #[test]
    fn pure_cycle_is_zero() {
        let v = vec![rec(0, 0, 1), rec(0, 1, 2), rec(0, 2, 0)];
        assert_eq!(transitivity(&data_of(v, 3), &[]).overall, Some(0.0));
    }

    #[test]
    fn single_panel_triplets_excluded() {
        let cat = Catalog::numbered(4);
        let panels = [panel("u", &[1, 2, 3, 4])];
        let data = ranks_to_pairs(&cat, &panels).unwrap();
        let r = transitivity(&data, &panels);
        assert_eq!(r.overall, None);
        assert_eq!(r.triplets, 0);
        // without the exclusion the four triplets would count
        assert_eq!(transitivity(&data, &[]).triplets, 4);
    }

    #[test]
    fn pairwise_table_round_trip() {
        let cat = Catalog::numbered(3);
        let mut data =
            ranks_to_pairs(&cat, &[panel("u1", &[3, 1, 2]), panel("u2", &[2, 3])]).unwrap();
        let mut tie = data.records[0].clone();
        tie.selected = Selection::None;
        tie.source = Source::Approval;
        data.records.push(tie);
        let mut buf = Vec::new();
        write_pairwise(&mut buf, &data).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.lines().nth(1).unwrap().contains(",1-3,3,"));
        let back = read_pairwise(buf.as_slice(), "p.csv", &cat).unwrap();
        assert_eq!(back, data);
    }

    #[test]
    fn triangle_index_is_dense() {
        let n = 6;
        let mut seen = Vec::new();
        for i in 0..n as u32 {
            for j in i + 1..n as u32 {
                seen.push(PairId { low: i, high: j }.triangle_index(n));
            }
        }
        assert_eq!(seen, (0..n * (n - 1) / 2).collect::<Vec<_>>());
    }
}
