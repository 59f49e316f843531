//! Pairwise preference aggregation and divisiveness measurement for
//! participatory-budgeting style corpora.
//!
//! The pipeline runs corpus ingestion ([`corpus`]), bot filtering and
//! deduplication ([`curation`]), conversion to pairwise records
//! ([`pairwise`]), scoring ([`aggregation`]), divisiveness
//! ([`divisiveness`]) and diagnostics ([`audit`]). [`synthgen`] builds
//! synthetic electorates with known structure.

pub mod aggregation;
pub mod audit;
pub mod corpus;
pub mod curation;
pub mod divisiveness;
pub mod error;
pub mod pairwise;
pub mod stats;
pub mod synthgen;

pub use aggregation::{
    bootstrap, rank_from_scores, BootstrapParams, Ranking, ScoreEntry, ScoreFunction, ScoreTable,
    Scores,
};
pub use audit::{AlignmentReport, ConvergenceCurve, IiaReport, PairwiseMatrix, SpectralReport};
pub use corpus::{
    Agreement, ApprovalRecord, Catalog, Dimension, ParticipantProfile, PreferenceCorpus, Profiles,
    Proposal, ProposalId, RankRecord, Timestamp,
};
pub use curation::{CurationConfig, SuspicionReport};
pub use divisiveness::{
    Country, DivisivenessEntry, DivisivenessTable, Membership, Normalization, PairwiseOptions,
    Side, SplitSpec,
};
pub use error::{Error, Result};
pub use pairwise::{PairId, PairwiseData, PairwiseRecord, PairwiseTally, Selection, Source};
pub use synthgen::{ElectorateSpec, Model};
