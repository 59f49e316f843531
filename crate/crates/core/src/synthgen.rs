//! Synthetic electorates with planted structure.
//!
//! Users answer rank panels of uniformly drawn proposals; the model decides
//! how each panel is ordered:
//!
//! * `uniform-random`: a uniformly random order, so every pair is a fair coin.
//! * `two-bloc`: the first `bloc_fraction` of users rank the divisive set
//!   above everything else, the rest rank it below everything else in the
//!   opposite order; both blocs share one order on the remaining proposals.
//! * `transitive-noise`: one global order (lower id preferred).
//!
//! After ordering, one left-to-right pass swaps each adjacent pair with
//! probability `noise`. Users in the first bloc get politics label 4, the
//! rest label 1; other demographic labels are random.

use std::collections::BTreeSet;

use chrono::{Duration, TimeZone, Utc};
use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Catalog, ParticipantProfile, PreferenceCorpus, ProposalId, RankRecord};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    UniformRandom,
    TwoBloc,
    TransitiveNoise,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ElectorateSpec {
    pub n_proposals: usize,
    pub n_users: usize,
    pub model: Model,
    pub bloc_fraction: f64,
    /// Proposal ids (1-based).
    pub divisive: BTreeSet<u32>,
    pub noise: f64,
    pub seed: u64,
    pub panel_size: usize,
    pub panels_per_user: usize,
}

impl Default for ElectorateSpec {
    fn default() -> Self {
        Self {
            n_proposals: 20,
            n_users: 200,
            model: Model::UniformRandom,
            bloc_fraction: 0.5,
            divisive: BTreeSet::new(),
            noise: 0.0,
            seed: 0,
            panel_size: 5,
            panels_per_user: 10,
        }
    }
}

pub const BLOC_A_POLITICS: i32 = 4;
pub const BLOC_B_POLITICS: i32 = 1;

impl ElectorateSpec {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let spec: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("spec is plain data")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.n_proposals < 2 {
            return fail(format!(
                "n_proposals = {} (need at least 2)",
                self.n_proposals
            ));
        }
        if self.n_users == 0 || self.panels_per_user == 0 {
            return fail("n_users and panels_per_user must be positive".into());
        }
        if self.panel_size < 2 || self.panel_size > self.n_proposals {
            return fail(format!(
                "panel_size = {} outside 2..={}",
                self.panel_size, self.n_proposals
            ));
        }
        if !(self.bloc_fraction > 0.0 && self.bloc_fraction < 1.0) {
            return fail(format!(
                "bloc_fraction = {} outside (0, 1)",
                self.bloc_fraction
            ));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return fail(format!("noise = {} outside [0, 1]", self.noise));
        }
        if let Some(&p) = self
            .divisive
            .iter()
            .find(|&&p| p == 0 || p as usize > self.n_proposals)
        {
            return fail(format!(
                "divisive proposal {p} is not in 1..={}",
                self.n_proposals
            ));
        }
        if self.model == Model::TwoBloc && self.divisive.is_empty() {
            return fail("two-bloc model needs a nonempty divisive set".into());
        }
        let a = self.bloc_a_size();
        if a == 0 || a == self.n_users {
            return fail(format!(
                "bloc_fraction {} leaves a bloc empty with {} users",
                self.bloc_fraction, self.n_users
            ));
        }
        Ok(())
    }

    /// Users `0..bloc_a_size()` form the first bloc.
    pub fn bloc_a_size(&self) -> usize {
        (self.bloc_fraction * self.n_users as f64).round() as usize
    }

    pub fn user_id(u: usize) -> String {
        format!("user{u:06}")
    }

    /// Sort key of each proposal index for a user of the given bloc; lower
    /// is preferred.
    fn preference_keys(&self, bloc_a: bool) -> Vec<i64> {
        let n = self.n_proposals as i64;
        (0..self.n_proposals)
            .map(|i| {
                let id = i as u32 + 1;
                let base = i as i64;
                match self.model {
                    Model::TwoBloc if self.divisive.contains(&id) => {
                        if bloc_a {
                            base - n
                        } else {
                            2 * n - base
                        }
                    }
                    _ => base,
                }
            })
            .collect()
    }
}

fn user_records(
    spec: &ElectorateSpec,
    catalog_ids: &[ProposalId],
    u: usize,
) -> (Vec<RankRecord>, ParticipantProfile) {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(u as u64);
    let bloc_a = u < spec.bloc_a_size();
    let keys = spec.preference_keys(bloc_a);
    let epoch = Utc.with_ymd_and_hms(2022, 3, 1, 0, 0, 0).unwrap();
    let user_id = ElectorateSpec::user_id(u);
    let mut records = Vec::with_capacity(spec.panels_per_user);
    for p in 0..spec.panels_per_user {
        let mut panel = sample(&mut rng, spec.n_proposals, spec.panel_size).into_vec();
        match spec.model {
            Model::UniformRandom => panel.shuffle(&mut rng),
            Model::TwoBloc | Model::TransitiveNoise => panel.sort_by_key(|&i| keys[i]),
        }
        for k in 0..panel.len() - 1 {
            if rng.random_bool(spec.noise) {
                panel.swap(k, k + 1);
            }
        }
        let seq = (u * spec.panels_per_user + p) as i64;
        records.push(RankRecord {
            user_id: user_id.clone(),
            panel: panel.into_iter().map(|i| catalog_ids[i]).collect(),
            updated: true,
            universe: spec.panel_size as i32,
            score: Some(0.9),
            timestamp: epoch + Duration::seconds(seq),
        });
    }
    let profile = ParticipantProfile {
        user_id,
        politics: Some(if bloc_a {
            BLOC_A_POLITICS
        } else {
            BLOC_B_POLITICS
        }),
        location: Some(if rng.random_bool(0.5) { 75 } else { 31 }),
        age: Some(rng.random_range(1..=7)),
        sex: Some(rng.random_range(1..=2)),
        education: Some(rng.random_range(1..=7)),
        zone: Some(rng.random_range(1..=2)),
        universe: Some(spec.panel_size as i32),
        timestamp: epoch,
    };
    (records, profile)
}

pub fn generate(spec: &ElectorateSpec) -> Result<PreferenceCorpus> {
    spec.validate()?;
    let catalog = Catalog::numbered(spec.n_proposals);
    let ids = catalog.ids();
    let per_user: Vec<(Vec<RankRecord>, ParticipantProfile)> = (0..spec.n_users)
        .into_par_iter()
        .map(|u| user_records(spec, &ids, u))
        .collect();
    let mut ranks = Vec::with_capacity(spec.n_users * spec.panels_per_user);
    let mut profiles = std::collections::BTreeMap::new();
    for (r, p) in per_user {
        ranks.extend(r);
        profiles.insert(p.user_id.clone(), p);
    }
    Ok(PreferenceCorpus {
        catalog,
        approvals: Vec::new(),
        ranks,
        profiles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_bloc(noise: f64, seed: u64) -> ElectorateSpec {
        ElectorateSpec {
            n_proposals: 8,
            n_users: 40,
            model: Model::TwoBloc,
            divisive: [1, 2].into_iter().collect(),
            noise,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn deterministic() {
        let s = two_bloc(0.1, 3);
        assert_eq!(generate(&s).unwrap(), generate(&s).unwrap());
        assert_ne!(generate(&s).unwrap(), generate(&two_bloc(0.1, 4)).unwrap());
    }

    #[test]
    fn noiseless_blocs_follow_their_orders() {
        let c = generate(&two_bloc(0.0, 1)).unwrap();
        for r in &c.ranks {
            let bloc_a = c.profiles[&r.user_id].politics == Some(BLOC_A_POLITICS);
            let div: Vec<bool> = r.panel.iter().map(|p| p.0 <= 2).collect();
            // divisive proposals form a prefix for bloc A and a suffix for bloc B
            let first_non = div.iter().position(|d| !d).unwrap_or(div.len());
            let last_non = div.iter().rposition(|d| !d);
            if bloc_a {
                assert!(div[first_non..].iter().all(|d| !d));
            } else if let Some(l) = last_non {
                assert!(div[..=l].iter().all(|d| !d));
            }
        }
    }

    #[test]
    fn spec_round_trips_through_toml() {
        let s = two_bloc(0.05, 9);
        assert_eq!(
            ElectorateSpec::from_toml_str(&s.to_toml_string()).unwrap(),
            s
        );
        let parsed = ElectorateSpec::from_toml_str(
            "n_proposals = 6\nn_users = 10\nmodel = \"transitive-noise\"\nnoise = 0.1\n",
        )
        .unwrap();
        assert_eq!(parsed.model, Model::TransitiveNoise);
        assert_eq!(parsed.panel_size, 5);
    }

    #[test]
    fn inconsistent_specs_rejected() {
        for bad in [
            ElectorateSpec {
                bloc_fraction: 1.0,
                ..Default::default()
            },
            ElectorateSpec {
                divisive: [99].into_iter().collect(),
                ..Default::default()
            },
            ElectorateSpec {
                model: Model::TwoBloc,
                ..Default::default()
            },
            ElectorateSpec {
                panel_size: 30,
                ..Default::default()
            },
            ElectorateSpec {
                noise: -0.1,
                ..Default::default()
            },
        ] {
            assert!(generate(&bad).is_err(), "{bad:?}");
        }
        assert!(ElectorateSpec::from_toml_str("bogus = 1").is_err());
    }
}
