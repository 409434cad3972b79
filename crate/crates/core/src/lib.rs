//! Numerical toolkit for Riesz and Bessel energies of occupation measures.
//!
//! The crate covers the whole pipeline from sampled parametrizations
//! `X: [0,1]^k -> R^n` to their occupation measures, potentials and energies,
//! Gaussian witnesses (fractional Brownian fields and bridges), Hölder-constrained
//! energy minimization, fractal-dimension diagnostics, explicit constants of the
//! Gaussian feasibility bounds, and a grid-based check of the BV composition
//! estimate.
//!
//! All numerical entry points are pure functions of their inputs. Parallel
//! reductions collect per-row partial results in index order and combine them by
//! pairwise summation, so results do not depend on the rayon worker count.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod composition;
pub mod constants;
pub mod error;
pub mod field;
pub mod fields;
pub mod io;
pub mod kernels;
pub mod measure;
pub mod measures;
pub mod minimize;
pub mod numeric;
pub mod quadrature;
pub mod witness;

pub use error::{Error, Result};
pub use field::{FieldMeta, SampledField};
pub use kernels::{KernelFamily, KernelSpec};
pub use measure::DiscreteMeasure;
pub use minimize::{MinimizerResult, Objective, ProblemSpec};
