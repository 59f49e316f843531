//! Suspicious-participant detection and duplicate-preference curation.
//!
//! Criteria, numbered as reported:
//! 1. a record in a universe outside the accepted set
//! 2. no consent entry (needs a consent table)
//! 3. static rank screen: enough multi-item panels, too few reordered
//! 4. low mean reCAPTCHA score over the user's own records
//! 5. low mean reCAPTCHA score of the user's IP (needs IP tables)
//! 6. more approval rows than the catalog bound

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::PreferenceCorpus;
use crate::error::{Error, Result};
use crate::pairwise::{PairId, PairwiseData, PairwiseRecord};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurationConfig {
    pub accepted_universes: BTreeSet<i32>,
    pub recaptcha_threshold: f64,
    pub static_rank_max_update_rate: f64,
    pub static_rank_min_panels: usize,
    /// Defaults to the catalog size.
    pub max_approvals: Option<usize>,
    pub consent_ids: Option<BTreeSet<String>>,
    /// user id → opaque IP hash.
    pub user_ips: Option<BTreeMap<String, String>>,
    /// IP hash → reCAPTCHA scores observed from it.
    pub ip_scores: Option<BTreeMap<String, Vec<f64>>>,
}

impl Default for CurationConfig {
    fn default() -> Self {
        Self {
            accepted_universes: [2, 4, 5, 6].into_iter().collect(),
            recaptcha_threshold: 0.7,
            static_rank_max_update_rate: 0.10,
            static_rank_min_panels: 3,
            max_approvals: None,
            consent_ids: None,
            user_ips: None,
            ip_scores: None,
        }
    }
}

impl CurationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.accepted_universes.is_empty() {
            return Err(Error::Config("accepted_universes is empty".into()));
        }
        for (name, v) in [
            ("recaptcha_threshold", self.recaptcha_threshold),
            (
                "static_rank_max_update_rate",
                self.static_rank_max_update_rate,
            ),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} = {v} is outside [0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SuspicionReport {
    /// Every participant, with the criteria they triggered.
    pub users: BTreeMap<String, BTreeSet<u8>>,
    /// Criteria that could not be evaluated, with the reason.
    pub disabled: BTreeMap<u8, String>,
}

impl SuspicionReport {
    pub fn is_flagged(&self, user: &str) -> bool {
        self.users.get(user).is_some_and(|c| !c.is_empty())
    }

    pub fn flagged(&self) -> BTreeSet<&str> {
        self.users
            .iter()
            .filter(|(_, c)| !c.is_empty())
            .map(|(u, _)| u.as_str())
            .collect()
    }
}

#[derive(Serialize, Deserialize)]
struct UserRow {
    user_id: String,
    criteria: Vec<u8>,
    flagged: bool,
}

#[derive(Serialize, Deserialize)]
struct DisabledRow {
    criterion: u8,
    reason: String,
}

#[derive(Serialize, Deserialize)]
struct ReportJson {
    users: Vec<UserRow>,
    disabled_criteria: Vec<DisabledRow>,
}

impl Serialize for SuspicionReport {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ReportJson {
            users: self
                .users
                .iter()
                .map(|(u, c)| UserRow {
                    user_id: u.clone(),
                    criteria: c.iter().copied().collect(),
                    flagged: !c.is_empty(),
                })
                .collect(),
            disabled_criteria: self
                .disabled
                .iter()
                .map(|(&criterion, reason)| DisabledRow {
                    criterion,
                    reason: reason.clone(),
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SuspicionReport {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = ReportJson::deserialize(d)?;
        Ok(Self {
            users: raw
                .users
                .into_iter()
                .map(|r| (r.user_id, r.criteria.into_iter().collect()))
                .collect(),
            disabled: raw
                .disabled_criteria
                .into_iter()
                .map(|r| (r.criterion, r.reason))
                .collect(),
        })
    }
}

#[derive(Default)]
struct UserActivity {
    bad_universe: bool,
    score_sum: f64,
    score_count: usize,
    panels: usize,
    updated_panels: usize,
    approvals: usize,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn detect_suspicious(
    corpus: &PreferenceCorpus,
    config: &CurationConfig,
) -> Result<SuspicionReport> {
    config.validate()?;
    let mut activity: BTreeMap<&str, UserActivity> = BTreeMap::new();
    for a in &corpus.approvals {
        let u = activity.entry(&a.user_id).or_default();
        u.bad_universe |= !config.accepted_universes.contains(&a.universe);
        if let Some(s) = a.score {
            u.score_sum += s;
            u.score_count += 1;
        }
        u.approvals += 1;
    }
    for r in &corpus.ranks {
        let u = activity.entry(&r.user_id).or_default();
        u.bad_universe |= !config.accepted_universes.contains(&r.universe);
        if let Some(s) = r.score {
            u.score_sum += s;
            u.score_count += 1;
        }
        // a single-item panel cannot be reordered
        if r.panel.len() >= 2 {
            u.panels += 1;
            u.updated_panels += r.updated as usize;
        }
    }
    for p in corpus.profiles.keys() {
        activity.entry(p).or_default();
    }

    let mut disabled = BTreeMap::new();
    if config.consent_ids.is_none() {
        disabled.insert(2, "no consent table supplied".to_string());
    }
    if !activity.values().any(|u| u.score_count > 0) {
        disabled.insert(4, "no reCAPTCHA scores in the corpus".to_string());
    }
    #[allow(clippy::type_complexity)]
    let ip_means: Option<(&BTreeMap<String, String>, HashMap<&str, f64>)> =
        match (&config.user_ips, &config.ip_scores) {
            (Some(users), Some(scores)) => Some((
                users,
                scores
                    .iter()
                    .filter_map(|(ip, s)| Some((ip.as_str(), mean(s)?)))
                    .collect(),
            )),
            _ => {
                disabled.insert(
                    5,
                    "no user-to-IP map and IP score table supplied".to_string(),
                );
                None
            }
        };
    let max_approvals = config.max_approvals.unwrap_or(corpus.catalog.len());

    let users = activity
        .into_iter()
        .map(|(user, u)| {
            let mut c = BTreeSet::new();
            if u.bad_universe {
                c.insert(1);
            }
            if let Some(consent) = &config.consent_ids {
                if !consent.contains(user) {
                    c.insert(2);
                }
            }
            if u.panels >= config.static_rank_min_panels
                && (u.updated_panels as f64 / u.panels as f64) < config.static_rank_max_update_rate
            {
                c.insert(3);
            }
            if u.score_count > 0
                && u.score_sum / (u.score_count as f64) < config.recaptcha_threshold
            {
                c.insert(4);
            }
            if let Some((map, means)) = &ip_means {
                if let Some(m) = map.get(user).and_then(|ip| means.get(ip.as_str())) {
                    if *m < config.recaptcha_threshold {
                        c.insert(5);
                    }
                }
            }
            if u.approvals > max_approvals {
                c.insert(6);
            }
            (user.to_string(), c)
        })
        .collect();
    Ok(SuspicionReport { users, disabled })
}

/// Drops every record of a flagged user.
pub fn remove_flagged(data: &PairwiseData, report: &SuspicionReport) -> PairwiseData {
    let flagged: Vec<bool> = data.users.iter().map(|u| report.is_flagged(u)).collect();
    data.with_records(
        data.records
            .iter()
            .filter(|r| !flagged[r.user as usize])
            .cloned()
            .collect(),
    )
}

/// Keeps only the latest record per (user, pair); on equal timestamps the
/// later one in input order wins. Survivors keep their input order.
pub fn deduplicate(records: &[PairwiseRecord]) -> Vec<PairwiseRecord> {
    let mut latest: HashMap<(u32, PairId), usize> = HashMap::new();
    for (k, r) in records.iter().enumerate() {
        let slot = latest.entry((r.user, r.pair)).or_insert(k);
        if r.timestamp >= records[*slot].timestamp {
            *slot = k;
        }
    }
    let mut keep: Vec<usize> = latest.into_values().collect();
    keep.sort_unstable();
    keep.into_iter().map(|k| records[k].clone()).collect()
}

pub fn curate(data: &PairwiseData, report: &SuspicionReport) -> PairwiseData {
    let clean = remove_flagged(data, report);
    let records = deduplicate(&clean.records);
    clean.with_records(records)
}
