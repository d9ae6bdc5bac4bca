//! Density estimation with squared tensor-ring expansions in uniform
//! quadratic B-splines.
//!
//! The density of a `D`-dimensional point in the unit cube is
//! `q(x) / Z` with `q(x) = T(x)^2` and
//! `T(x) = Tr(Q_1(x_1) ... Q_D(x_D))`, where each `Q_d` mixes the lateral
//! slices of one tensor-ring core with the spline basis values at `x_d`.
//! Normalization, marginals, conditionals and exact sampling are all
//! closed-form contractions.

// `!(x >= lo)` style checks reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops mirror the block and tensor subscripts they fill.
#![allow(clippy::needless_range_loop)]

pub mod band;
pub mod datasets;
pub mod error;
pub mod linalg;
pub mod mixture;
pub mod model;
pub mod sampler;
pub mod splines;
pub mod stats;
pub mod tensor_ring;
pub mod trainer;

pub use band::BandMatrix;
pub use datasets::{Dataset, Split};
pub use error::{Error, Result};
pub use mixture::{enumerate_circular, mixture_sample, PermutationSet, TermModel};
pub use model::{DensityQuery, Gradient, TrdeModel};
pub use sampler::{build_plan, sample_batch, sample_one, SamplePlan};
pub use splines::BasisGrid;
pub use tensor_ring::{kron_sum, Core, SliceWeights, TrCores};
pub use trainer::{evaluate_nll, fit, Optimizer, TrainConfig, TrainReport, Trainable};
