//! Verification and decomposition of generalized channels, combs and
//! testers on finite-dimensional C*-algebras.
//!
//! Every algebra is a direct sum of full matrix algebras, stored
//! block-diagonally. Operators carry a [`Layout`] of labeled tensor
//! factors, and maps are represented by their Choi matrices.

pub mod algebra;
pub mod choi;
pub mod comb;
pub mod decompose;
mod dense;
pub mod error;
pub mod gchannel;
pub mod io;
pub mod sampler;
pub mod subspace;
pub mod tensor;

#[cfg(test)]
pub(crate) mod testutil;

pub use algebra::{AlgOperator, AlgebraShape};
pub use choi::CpMapChoi;
pub use comb::SupermapSpec;
pub use error::{Error, Result};
pub use gchannel::{GeneralizedPovm, SectionSpec};
pub use subspace::Subspace;
pub use tensor::{Factor, FactorLabel, LabeledOperator, Layout};

pub use num_complex::Complex64;

/// Dense complex matrix used for all operator storage.
pub type CMat = nalgebra::DMatrix<Complex64>;

/// Default absolute/relative tolerance.
pub const DEFAULT_TOL: f64 = 1e-9;

/// `tol · max(1, scale)`.
pub(crate) fn rel(tol: f64, scale: f64) -> f64 {
    tol * scale.max(1.0)
}
