//! Nonparametric clustering priors (Dirichlet, Pitman-Yor and uniform
//! processes), their partition statistics, and a collapsed Gibbs document
//! clustering model with held-out evaluation.

pub mod corpus_io;
pub mod doc_model;
pub mod error;
pub mod evaluation;
pub mod exchangeability;
pub mod math;
pub mod partition_stats;
pub mod prior_process;
pub mod rng;
pub mod slice;

pub use error::{Error, Result};
pub use prior_process::{Partition, PriorKind, PriorSpec};
pub use rng::RandomStream;
