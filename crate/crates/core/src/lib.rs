//! Phase transitions of l1 recovery and the escape/trapped-in-a-mesh
//! dichotomy for random null spaces.
//!
//! * [`thresholds`]: the weak threshold `alpha_w(beta)`, its perturbed
//!   bounds and the escape probability bound;
//! * [`cone`]: the l1 descent functional and Monte Carlo Gaussian widths;
//! * [`trap`]: does a random null space meet the descent set;
//! * [`l1`]: basis pursuit and planted recovery trials;
//! * [`phase`]: grid sweeps and their artifacts;
//! * [`cli`]: the `l1mesh` binary.
//!
//! Numerical kernels are generic over [`Real`] (`f32`, `f64`); the aliases
//! below fix the common `f64` instances.

pub mod cli;
pub mod cone;
pub mod error;
pub mod l1;
pub mod linalg;
pub mod phase;
pub mod scalar;
pub mod seed;
pub mod specfn;
pub mod thresholds;
pub mod trap;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Matrix = linalg::Mat<f64>;
pub type Matrix32 = linalg::Mat<f32>;
pub type Basis = linalg::NullBasis<f64>;
pub type Basis32 = linalg::NullBasis<f32>;
pub type TrapResult = trap::TrapVerdict<f64>;
pub type TrapResult32 = trap::TrapVerdict<f32>;
pub type Solution = l1::BasisPursuit<f64>;
pub type Solution32 = l1::BasisPursuit<f32>;
