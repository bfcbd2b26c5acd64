//! Clustering of units described by weighted compositions.
//!
//! Each unit carries, for every variable, a composition (a distribution
//! over a fixed, ordered set of categories) and a nonnegative weight. The
//! crate provides
//!
//! * the leader method ([`leader`]) and a criterion-compatible
//!   agglomerative hierarchical method ([`hclust`]), both minimizing the
//!   sum over clusters of weighted squared Euclidean errors ([`dissim`]);
//! * specificity/contrast diagnostics and indicator ANOVA ([`diag`]);
//! * ingestion of death counts into weighted cause-of-death compositions
//!   ([`ingest`]), file formats ([`formats`]) and SVG plots ([`plot`]).

pub mod diag;
pub mod dissim;
pub mod error;
pub mod formats;
pub mod hclust;
pub mod ingest;
pub mod leader;
pub mod model;
pub mod numeric;
pub mod plot;
pub mod synth;

pub use error::{Error, Result};
pub use hclust::{agglomerate, cut, Dendrogram, Merge};
pub use leader::{compute_leader, run_leader_method, InitStrategy, LeaderConfig, LeaderRun};
pub use model::{
    set_uniform_weights, validate_composition, CategorySchema, Cluster, Composition, Dataset, Leader, Partition,
    SymbolicUnit, VariableSchema,
};
