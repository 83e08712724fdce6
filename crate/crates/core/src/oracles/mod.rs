//! Closed-form ground truth: piecewise profiles, the counterexample family,
//! Green profiles with pole at infinity and the sinh test solution.

pub mod counterexample;
pub mod profile;
pub mod sinh;
