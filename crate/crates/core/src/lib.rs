//! Fair re-ranking built around utility elasticity between item groups.
//!
//! The crate is organised as:
//!
//! - [`model`]: scores, group catalog, utility vectors and ranked lists.
//! - [`fairness`]: the generalized fairness family `f(v; t)`, its partial
//!   derivatives, elasticity, rich/poor threshold, the EF-Curve and EF integral,
//!   and transfer-ratio diagnostics.
//! - [`quadrature`]: integration rules used by the EF integral, selectable by name.
//! - [`rerank`]: ElasticRank and baseline re-rankers behind a common
//!   [`rerank::Reranker`] trait, looked up by name in a [`rerank::Registry`].
//! - [`eval`]: NDCG@K, Loss@K, EF@K, Pareto sweeps and NDCG-band tuning.
//! - [`ingest`]: CSV loading, k-core / infrequent-group preprocessing and
//!   synthetic fixtures.

pub mod error;
pub mod eval;
pub mod fairness;
pub mod ingest;
pub mod model;
pub mod quadrature;
pub mod rerank;

pub use error::{Error, Result};
pub use model::{
    Candidate, GroupCatalog, GroupId, ItemId, RankedEntry, RankedList, ScoreTable, UserEntry,
    UserId, UtilityVector,
};
