//! Green profiles with pole at infinity and the harmonic test solution
//! `u = t + ε sin(k x1) sinh(k t)`.

use crate::error::{Error, Result};
use crate::geometry::{BoxKind, HalfSpaceGrid, Point};
use crate::oracles::profile::Profile1D;
use crate::quadrature::gl20;
use crate::solver::{BoundaryData, DiscreteSolution};

/// `g(t) = ∫_0^t 1/a`.
pub fn g_profile(a: &Profile1D, t: f64) -> f64 {
    a.g(t)
}

/// `g(t)` sampled on every node (independent of `x`).
pub fn green_infinity(a: &Profile1D, grid: &HalfSpaceGrid) -> Result<DiscreteSolution> {
    let a = a.clone();
    DiscreteSolution::from_fn(grid.clone(), move |p| a.g(p.t))
}

/// Dirichlet data `g(t) / g(R)`: zero on the bottom, positive elsewhere.
pub fn green_boundary_data(a: &Profile1D, box_height: f64) -> BoundaryData {
    let a = a.clone();
    let scale = 1.0 / a.g(box_height);
    BoundaryData::vanishing_bottom(move |p| a.g(p.t) * scale)
}

/// `u(x, t) = t + ε sin(k x1) sinh(k t)`, harmonic for `A = Id`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinhTestSolution {
    pub eps: f64,
    pub k: f64,
}

/// `(λ, E, J, β)` over one box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinhFunctionals {
    pub lambda: f64,
    pub energy: f64,
    pub nonaffine: f64,
    pub beta: f64,
}

impl SinhTestSolution {
    /// Requires `ε sinh(k R) < R`, which keeps `u > 0` for `0 < t <= R`.
    pub fn new(eps: f64, k: f64, box_height: f64) -> Result<Self> {
        if !(eps >= 0.0 && k > 0.0 && box_height > 0.0) {
            return Err(Error::InvalidParameter(format!("ε = {eps}, k = {k}, R = {box_height}")));
        }
        if eps * (k * box_height).sinh() >= box_height {
            return Err(Error::PositivityViolation(format!(
                "ε sinh(kR) = {} is not below R = {box_height}",
                eps * (k * box_height).sinh()
            )));
        }
        Ok(Self { eps, k })
    }

    pub fn value(&self, p: &Point) -> f64 {
        p.t + self.eps * (self.k * p.x[0]).sin() * (self.k * p.t).sinh()
    }

    /// `(∂x1, ∂x2, ∂t)`.
    pub fn gradient(&self, p: &Point) -> [f64; 3] {
        let (s, c) = (self.k * p.x[0]).sin_cos();
        let ek = self.eps * self.k;
        [ek * c * (self.k * p.t).sinh(), 0.0, 1.0 + ek * s * (self.k * p.t).cosh()]
    }

    /// Hessian in the `(x1, t)` plane.
    pub fn hessian(&self, p: &Point) -> [[f64; 2]; 2] {
        let (s, c) = (self.k * p.x[0]).sin_cos();
        let ek2 = self.eps * self.k * self.k;
        let (sh, ch) = ((self.k * p.t).sinh(), (self.k * p.t).cosh());
        [[-ek2 * s * sh, ek2 * c * ch], [ek2 * c * ch, ek2 * s * sh]]
    }

    pub fn sample(&self, grid: &HalfSpaceGrid) -> Result<DiscreteSolution> {
        let me = *self;
        DiscreteSolution::from_fn(grid.clone(), move |p| me.value(p))
    }

    pub fn boundary_data(&self) -> BoundaryData {
        let me = *self;
        BoundaryData::from_fn(move |p| me.value(p))
    }

    /// Mean of `f(x1)` over the surface ball `Δ(c, r)`.
    fn lateral_mean<F: Fn(f64) -> f64>(d: usize, c: f64, r: f64, f: F) -> f64 {
        match d {
            1 => gl20().integrate_composite(c - r, c + r, 8, &f) / (2.0 * r),
            _ => {
                // x1 = c + r sin θ turns the chord weight into cos² θ.
                let half = std::f64::consts::FRAC_PI_2;
                2.0 / std::f64::consts::PI
                    * gl20().integrate_composite(-half, half, 8, |th| f(c + r * th.sin()) * th.cos().powi(2))
            }
        }
    }

    fn vertical_mean<F: Fn(f64) -> f64>(r: f64, f: F) -> f64 {
        gl20().integrate_composite(0.0, r, 8, f) / r
    }

    /// Functionals over the pencil box `Δ(x, r) x (0, r]`, by separable
    /// quadrature.
    pub fn functionals(&self, d: usize, center: [f64; 2], r: f64, kind: BoxKind) -> Result<SinhFunctionals> {
        if kind != BoxKind::Pencil {
            return Err(Error::InvalidParameter("sinh functionals are separable only on pencil boxes".into()));
        }
        let k = self.k;
        let c = center[0];
        let sx = Self::lateral_mean(d, c, r, |x| (k * x).sin());
        let var_sx = Self::lateral_mean(d, c, r, |x| ((k * x).sin() - sx).powi(2));
        let cx2 = Self::lateral_mean(d, c, r, |x| (k * x).cos().powi(2));
        let ch = Self::vertical_mean(r, |t| (k * t).cosh());
        let var_ch = Self::vertical_mean(r, |t| ((k * t).cosh() - ch).powi(2));
        let sh2 = Self::vertical_mean(r, |t| (k * t).sinh().powi(2));
        let ch2 = ch * ch + var_ch;
        let ek = self.eps * k;
        let lambda = 1.0 + ek * sx * ch;
        // Horizontal energy plus the variance of ∂t u, without cancellation.
        let nonaffine = ek * ek * (cx2 * sh2 + ch2 * var_sx + sx * sx * var_ch);
        let energy = lambda * lambda + nonaffine;
        Ok(SinhFunctionals { lambda, energy, nonaffine, beta: nonaffine / energy })
    }
}
