//! Naive re-implementations that read raw records only.

use dissent_core::{Membership, Normalization, PairwiseRecord};

fn beats(records: &[PairwiseRecord], i: u32, j: u32) -> u64 {
    records
        .iter()
        .filter(|r| r.winner() == Some(i) && r.loser() == Some(j))
        .count() as u64
}

pub fn win(records: &[PairwiseRecord], n: usize) -> Vec<Option<f64>> {
    (0..n as u32)
        .map(|i| {
            let wins = records.iter().filter(|r| r.winner() == Some(i)).count();
            let losses = records.iter().filter(|r| r.loser() == Some(i)).count();
            (wins + losses > 0).then(|| wins as f64 / (wins + losses) as f64)
        })
        .collect()
}

pub fn copeland(records: &[PairwiseRecord], n: usize) -> Vec<f64> {
    (0..n as u32)
        .map(|i| {
            let mut s = 0.0;
            for j in (0..n as u32).filter(|&j| j != i) {
                let (a, b) = (beats(records, i, j), beats(records, j, i));
                s += if a > b {
                    1.0
                } else if a == b {
                    0.5
                } else {
                    0.0
                };
            }
            s / (n - 1) as f64
        })
        .collect()
}

/// Users whose choices on {i, j} put them on i's side.
fn side(records: &[PairwiseRecord], i: u32, j: u32, membership: Membership) -> Vec<u32> {
    let mut users: Vec<u32> = records.iter().map(|r| r.user).collect();
    users.sort_unstable();
    users.dedup();
    users
        .into_iter()
        .filter(|&u| {
            let mine: Vec<&PairwiseRecord> = records.iter().filter(|r| r.user == u).collect();
            let for_i = mine
                .iter()
                .filter(|r| r.winner() == Some(i) && r.loser() == Some(j))
                .count();
            let for_j = mine
                .iter()
                .filter(|r| r.winner() == Some(j) && r.loser() == Some(i))
                .count();
            match membership {
                Membership::Majority => for_i > for_j,
                Membership::AnyRecord => for_i > 0,
            }
        })
        .collect()
}

pub fn divisiveness(
    records: &[PairwiseRecord],
    n: usize,
    membership: Membership,
    normalization: Normalization,
) -> Vec<(f64, usize)> {
    (0..n as u32)
        .map(|i| {
            let mut sum = 0.0;
            let mut valid = 0;
            for j in (0..n as u32).filter(|&j| j != i) {
                let chose_i = side(records, i, j, membership);
                let chose_j = side(records, j, i, membership);
                if chose_i.is_empty() || chose_j.is_empty() {
                    continue;
                }
                let of = |users: &[u32]| -> Vec<PairwiseRecord> {
                    records
                        .iter()
                        .filter(|r| users.contains(&r.user))
                        .cloned()
                        .collect()
                };
                let a = win(&of(&chose_i), n)[i as usize];
                let b = win(&of(&chose_j), n)[i as usize];
                if let (Some(a), Some(b)) = (a, b) {
                    sum += (a - b).abs();
                    valid += 1;
                }
            }
            let denom = match normalization {
                Normalization::ValidTerms => valid,
                Normalization::Literal => n - 1,
            };
            (if valid == 0 { 0.0 } else { sum / denom as f64 }, valid)
        })
        .collect()
}
