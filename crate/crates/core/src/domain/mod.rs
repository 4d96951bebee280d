//! Finite categorical domains, datasets and exact discrete-distribution algebra.

mod dataset;
mod divergence;
mod pmf;
mod schema;

pub use dataset::{read_delimited, Dataset, IngestOptions, Record, RowFilter};
pub use divergence::{kl_divergence, l1_distance};
pub use pmf::{condition, marginalize, ConditionalPmf, Distribution, JointPmf, VarDim};
pub use schema::{Alphabet, Quantizer, Role, Schema, Variable, COMPOSITE_SEP};

/// Tolerance on the total mass of stored joint pmfs.
pub const STORAGE_TOL: f64 = 1e-12;
/// Tolerance on the row sums of conditional distributions and kernels.
pub const ROW_TOL: f64 = 1e-9;
