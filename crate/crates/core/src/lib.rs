//! Numerical laboratory for affine approximation of elliptic solutions on the
//! upper half-space.
//!
//! The crate discretizes `L = -div(A ∇)` on truncated boxes
//! `[-R, R]^d x [0, R]` (`d ∈ {1, 2}`), computes the multiscale quantities
//! `α₂`, `ᾱ`, `γ`, `λ`, `E`, `J`, `β` on dyadic nets, estimates Carleson
//! norms, and carries closed-form oracles for the diagonal counterexample
//! family `A = a_n(t) Id`.

pub mod carleson;
pub mod coefficients;
pub mod experiments;
pub mod functionals;
mod error;
pub mod geometry;
pub mod oracles;
pub mod quadrature;
pub mod solver;

pub use error::{Error, Result};
