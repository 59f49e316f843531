//! Score and divisiveness functions against the naive oracles.

mod common;

use common::oracle;
use dissent_core::aggregation::{copeland, win_percentage};
use dissent_core::divisiveness::pairwise_divisiveness_values;
use dissent_core::{Membership, Normalization, PairwiseOptions, PairwiseTally, ScoreFunction};

const CORPORA: u64 = 200;
const TOL: f64 = 1e-12;

#[test]
fn win_percentage_matches_oracle() {
    for seed in 0..CORPORA {
        let (n, records) = common::random_corpus(seed, 6, 20);
        let got = win_percentage(&PairwiseTally::build(&records, n).unwrap()).values;
        let want = oracle::win(&records, n);
        for (g, w) in got.iter().zip(&want) {
            match (g, w) {
                (Some(g), Some(w)) => assert!((g - w).abs() <= TOL, "seed {seed}: {g} vs {w}"),
                (None, None) => {}
                _ => panic!("seed {seed}: definedness differs {got:?} vs {want:?}"),
            }
        }
    }
}

#[test]
fn copeland_matches_oracle() {
    for seed in 0..CORPORA {
        let (n, records) = common::random_corpus(seed, 6, 20);
        let got = copeland(&PairwiseTally::build(&records, n).unwrap())
            .unwrap()
            .values;
        for (g, w) in got.iter().zip(oracle::copeland(&records, n)) {
            assert!((g.unwrap() - w).abs() <= TOL, "seed {seed}");
        }
    }
}

#[test]
fn pairwise_divisiveness_matches_oracle() {
    for membership in [Membership::Majority, Membership::AnyRecord] {
        for normalization in [Normalization::ValidTerms, Normalization::Literal] {
            for fast_path in [true, false] {
                let opts = PairwiseOptions {
                    membership,
                    normalization,
                    fast_path,
                };
                for seed in 0..CORPORA {
                    let (n, records) = common::random_corpus(seed, 6, 20);
                    let got = pairwise_divisiveness_values(&records, n, &ScoreFunction::Win, &opts)
                        .unwrap();
                    let want = oracle::divisiveness(&records, n, membership, normalization);
                    for (g, w) in got.iter().zip(&want) {
                        assert_eq!(g.1, w.1, "seed {seed} {opts:?}");
                        assert!(
                            (g.0 - w.0).abs() <= TOL,
                            "seed {seed} {opts:?}: {} vs {}",
                            g.0,
                            w.0
                        );
                    }
                }
            }
        }
    }
}
