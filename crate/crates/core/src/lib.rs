//! Multi-sample cancer lineage inference.
//!
//! SSNVs are grouped by their presence pattern across samples, clustered by
//! allele frequency, and arranged into a constraint network whose spanning
//! trees are the candidate lineages. Trees that keep children frequency sums
//! within their parents are enumerated, ranked by a quadratic deviation
//! program, and used to decompose each sample into subclones.
//!
//! The [`simulator`] and [`evaluation`] modules generate ground-truth
//! lineages and score reconstructions against them.

pub mod calling;
pub mod clustering;
pub mod error;
pub mod evaluation;
pub mod io;
pub mod model;
pub mod network;
pub mod pipeline;
pub mod ranking;
pub mod rng;
pub mod search;
pub mod simulator;

pub use error::{Error, Result};
