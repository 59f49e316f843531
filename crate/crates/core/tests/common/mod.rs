#![allow(dead_code)]

pub mod oracle;

use chrono::{TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dissent_core::{PairId, PairwiseRecord, Selection, Source};

/// `user` chose `winner` over `loser`; `t` orders the stream.
pub fn rec(user: u32, winner: u32, loser: u32, t: i64) -> PairwiseRecord {
    let pair = PairId::new(winner, loser);
    PairwiseRecord {
        user,
        pair,
        selected: if winner == pair.low {
            Selection::Low
        } else {
            Selection::High
        },
        source: Source::Rank,
        universe: 4,
        score: Some(0.9),
        timestamp: Utc.timestamp_opt(1_650_000_000 + t, 0).unwrap(),
    }
}

pub fn tie(user: u32, a: u32, b: u32, t: i64) -> PairwiseRecord {
    PairwiseRecord {
        selected: Selection::None,
        ..rec(user, a, b, t)
    }
}

/// Up to `max_n` proposals and `max_users` users; a handful of repeats and
/// ties so every branch of the metrics is reached.
pub fn random_corpus(seed: u64, max_n: usize, max_users: u32) -> (usize, Vec<PairwiseRecord>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=max_n);
    let users = rng.random_range(1..=max_users);
    let count = rng.random_range(1..=6 * n * users as usize);
    let records = (0..count)
        .map(|t| {
            let user = rng.random_range(0..users);
            let a = rng.random_range(0..n as u32);
            let mut b = rng.random_range(0..n as u32 - 1);
            if b >= a {
                b += 1;
            }
            if rng.random_bool(0.05) {
                tie(user, a, b, t as i64)
            } else {
                rec(user, a, b, t as i64)
            }
        })
        .collect();
    (n, records)
}
