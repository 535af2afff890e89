//! ML-guided primal heuristics for mixed binary quadratic programs.
//!
//! The crate covers the full pipeline at desk scale: benchmark instance
//! generation, a continuous relaxation, a deterministic branch-and-bound
//! solver, randomized relax-search training-data collection, a tripartite
//! graph encoding with a graph attention network trained under weighted
//! cross-entropy / contrastive / combined losses, neural-diving inference,
//! and a primal-gap / primal-integral benchmark harness.
//!
//! See the book under `book/` for a guided tour; its code snippets are run
//! as doc-tests.

pub mod bench;
pub mod bnb;
pub mod datagen;
pub mod error;
pub mod generators;
pub mod graph;
pub mod heuristic;
pub mod instance;
pub mod neural;
pub mod relaxation;
pub mod rng;

pub use error::{Error, Result};
pub use instance::{energy_weights, MbqpInstance, Solution, FEASIBILITY_TOL};

// Book chapters double as doc-tests so the guide cannot drift from the API.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/instances.md")]
    pub mod instances {}
    #[doc = include_str!("../../../book/src/generators.md")]
    pub mod generators {}
    #[doc = include_str!("../../../book/src/relaxation.md")]
    pub mod relaxation {}
    #[doc = include_str!("../../../book/src/branch-and-bound.md")]
    pub mod branch_and_bound {}
    #[doc = include_str!("../../../book/src/data-collection.md")]
    pub mod data_collection {}
    #[doc = include_str!("../../../book/src/graph-encoding.md")]
    pub mod graph_encoding {}
    #[doc = include_str!("../../../book/src/model-and-losses.md")]
    pub mod model_and_losses {}
    #[doc = include_str!("../../../book/src/training.md")]
    pub mod training {}
    #[doc = include_str!("../../../book/src/inference.md")]
    pub mod inference {}
    #[doc = include_str!("../../../book/src/benchmarking.md")]
    pub mod benchmarking {}
}
