//! Matrix completion for data with one structurally missing block and
//! heterogeneous sporadic missingness.
//!
//! The input is a [`MaskedMatrix`] in block layout: observable rows and
//! columns first, structurally missing block at the bottom right. [`macomss`]
//! estimates the rank-one observation probabilities, normalizes the
//! zero-filled observations, rotates the observable blocks into the leading
//! singular bases, picks a rank with the Schur-complement criterion and
//! assembles the full estimate.
//!
//! Everything numerical is generic over [`Scalar`] (`f32`, `f64`); the
//! aliases below name the common `f64` instantiations.

pub mod baselines;
pub mod completion;
pub mod error;
pub mod evaluation;
pub mod matrix;
pub mod missingness;
pub mod numerics;
pub mod rng;
pub mod scalar;
pub mod synthgen;
pub mod types;

pub use completion::{
    assemble, build_stacks, choose_r0, complete_with_theta, macomss, rotate, select_rank, CompletionOptions,
    CompletionResult, CriterionSide, R0Mode, RotatedBlocks, StackWeightMode,
};
pub use error::{Error, Result};
pub use matrix::Matrix;
pub use missingness::{estimate_theta, estimate_theta_raw, normalize, ThetaClamp, ThetaEstimate};
pub use numerics::{frobenius_norm, invert_leading, spectral_norm, svd, SvdResult};
pub use scalar::Scalar;
pub use types::{BlockId, BlockPartition, LayoutMap, Mask, MaskedMatrix};

pub type Mat = Matrix<f64>;
pub type Mat32 = Matrix<f32>;
pub type Masked = MaskedMatrix<f64>;
pub type Masked32 = MaskedMatrix<f32>;
pub type Options = CompletionOptions<f64>;
pub type Options32 = CompletionOptions<f32>;
pub type Completion = CompletionResult<f64>;
pub type Completion32 = CompletionResult<f32>;
pub type Theta = ThetaEstimate<f64>;
pub type Svd = SvdResult<f64>;
