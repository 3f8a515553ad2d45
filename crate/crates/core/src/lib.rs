//! Optimizing the spectral gap of parent Hamiltonians of matrix product states.
//!
//! A translation-invariant MPS with local tensor `A` has a family of frustration-free
//! parent Hamiltonians `H(S) = Σ_i Φ S Φ†` acting on blocks of `L` sites, where `Φ`
//! spans the kernel of the block's injectivity map and `S > 0` is an `M × M` matrix.
//! The crate builds these operators for three interpolation families, restricts
//! them to symmetry sectors, computes gaps and their derivatives with respect to
//! `S`, and maximizes the gap along a path in the MPS parameter.

pub mod config;
pub mod error;
pub mod linalg;
pub mod model;
pub mod opt;
pub mod parent;
pub mod path;
pub mod run;
pub mod spectra;
pub mod symmetry;
pub mod tensor;

pub use error::{Error, Result};
pub use model::{Family, Model};
