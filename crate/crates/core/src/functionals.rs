//! Solution functionals over boxes: the slope `λ`, the energy `E`, the
//! non-affine energy `J` and `β = J / E`, sampled on dyadic nets; the
//! second-derivative density `|∇²u|² t³ / u²`; and the decay-contraction scan.
//!
//! All box means use the cached cell gradients of a [`DiscreteSolution`]
//! over the cells whose centers lie in the box.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::carleson::{Density, MultiscaleSample};
use crate::coefficients::{gamma, SampledField};
use crate::error::{Error, Result};
use crate::geometry::{BoxKind, DyadicNet, HalfSpaceGrid, Region};
use crate::solver::DiscreteSolution;

/// Largest accepted `β` before clamping to 1.
pub const BETA_SLACK: f64 = 1e-12;

/// Floor on `γ²` when fitting contraction constants.
pub const GAMMA_SQ_FLOOR: f64 = 1e-14;

/// The four functionals over one box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoxFunctionals {
    pub lambda: f64,
    pub energy: f64,
    pub nonaffine: f64,
    pub beta: f64,
}

fn box_cells(grid: &HalfSpaceGrid, region: &Region) -> Result<Vec<usize>> {
    if !grid.contains(region) {
        return Err(Error::RegionOutsideGrid(region.to_string()));
    }
    Ok(grid.cells_in(region)?.linear().collect())
}

/// Splits `|∇u|²` into horizontal and vertical parts.
fn split(g: &[f64; 3], d: usize) -> (f64, f64) {
    let horizontal: f64 = g[..d].iter().map(|v| v * v).sum();
    (horizontal, g[d])
}

/// Mean of `∂t u` over the region.
pub fn lambda_slope(u: &DiscreteSolution, region: &Region) -> Result<f64> {
    let d = u.grid().d();
    let cells = box_cells(u.grid(), region)?;
    let grads = u.gradients();
    Ok(cells.iter().map(|&k| grads[k][d]).sum::<f64>() / cells.len() as f64)
}

/// Mean of `|∇u|²` over the region.
pub fn energy(u: &DiscreteSolution, region: &Region) -> Result<f64> {
    let d = u.grid().d();
    let cells = box_cells(u.grid(), region)?;
    let grads = u.gradients();
    let sum: f64 = cells
        .iter()
        .map(|&k| {
            let (hz, gt) = split(&grads[k], d);
            hz + gt * gt
        })
        .sum();
    Ok(sum / cells.len() as f64)
}

/// Mean of `|∇u - μ e_t|²` over the region, for any slope `μ`.
pub fn affine_defect(u: &DiscreteSolution, region: &Region, mu: f64) -> Result<f64> {
    let d = u.grid().d();
    let cells = box_cells(u.grid(), region)?;
    let grads = u.gradients();
    let sum: f64 = cells
        .iter()
        .map(|&k| {
            let (hz, gt) = split(&grads[k], d);
            hz + (gt - mu).powi(2)
        })
        .sum();
    Ok(sum / cells.len() as f64)
}

/// `J`: the affine defect at the box's own slope.
pub fn nonaffine(u: &DiscreteSolution, region: &Region) -> Result<f64> {
    affine_defect(u, region, lambda_slope(u, region)?)
}

/// `λ`, `E`, `J` and `β` in two passes over the region's cells.
pub fn box_functionals(u: &DiscreteSolution, region: &Region) -> Result<BoxFunctionals> {
    let d = u.grid().d();
    let cells = box_cells(u.grid(), region)?;
    let grads = u.gradients();
    let n = cells.len() as f64;
    let mut slope = 0.0;
    let mut energy = 0.0;
    for &k in &cells {
        let (hz, gt) = split(&grads[k], d);
        slope += gt;
        energy += hz + gt * gt;
    }
    let lambda = slope / n;
    let energy = energy / n;
    let nonaffine = cells
        .iter()
        .map(|&k| {
            let (hz, gt) = split(&grads[k], d);
            hz + (gt - lambda).powi(2)
        })
        .sum::<f64>()
        / n;
    if !(energy > 0.0) {
        return Err(Error::DegenerateSolution(region.to_string()));
    }
    let ratio = nonaffine / energy;
    if ratio > 1.0 + BETA_SLACK {
        return Err(Error::InvalidParameter(format!("β = {ratio} on {region} exceeds 1")));
    }
    Ok(BoxFunctionals { lambda, energy, nonaffine, beta: ratio.min(1.0) })
}

/// `β = J / E` over the region.
pub fn beta(u: &DiscreteSolution, region: &Region) -> Result<f64> {
    Ok(box_functionals(u, region)?.beta)
}

/// `β(x, r)` on every net sample, boxes of the given kind.
pub fn beta_field(u: &DiscreteSolution, net: Arc<DyadicNet>, kind: BoxKind) -> Result<MultiscaleSample> {
    net.check_resolved(u.grid())?;
    MultiscaleSample::from_fn(net, Density::Beta, |s| beta(u, &kind.region(s.center, s.radius)))
}

/// Per-cell values of `|∇²u|² t³ / u²`.
///
/// Cells without a Hessian (within two steps of a face) hold 0 and are
/// flagged as excluded.
#[derive(Debug, Clone)]
pub struct SecondDerivativeDensity {
    grid: HalfSpaceGrid,
    values: Vec<f64>,
    excluded: Vec<bool>,
}

/// Builds the second-derivative density of a positive solution.
pub fn second_deriv_density(u: &DiscreteSolution) -> Result<SecondDerivativeDensity> {
    let grid = u.grid().clone();
    let dim = grid.d() + 1;
    let hessians = u.hessians();
    let cells: Vec<Result<(f64, bool)>> = (0..grid.cell_count())
        .into_par_iter()
        .map(|k| {
            let Some(hess) = hessians[k] else {
                return Ok((0.0, true));
            };
            let c = grid.cell_from_linear(k);
            let value = u.cell_value(c);
            if !(value > 0.0) {
                let p = grid.cell_center(c);
                return Err(Error::PositivityViolation(format!(
                    "cell centered at ({}, {}, {}), u = {value}",
                    p.x[0], p.x[1], p.t
                )));
            }
            let t = grid.cell_height(c.t);
            let frob: f64 = (0..dim).flat_map(|i| (0..dim).map(move |j| (i, j))).map(|(i, j)| hess[i][j].powi(2)).sum();
            Ok((frob * t.powi(3) / (value * value), false))
        })
        .collect();
    let mut values = Vec::with_capacity(cells.len());
    let mut excluded = Vec::with_capacity(cells.len());
    for c in cells {
        let (v, e) = c?;
        values.push(v);
        excluded.push(e);
    }
    Ok(SecondDerivativeDensity { grid, values, excluded })
}

impl SecondDerivativeDensity {
    pub fn grid(&self) -> &HalfSpaceGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn excluded(&self) -> &[bool] {
        &self.excluded
    }

    /// `∫ density dx dt` over the cells of a region.
    pub fn integral(&self, region: &Region) -> Result<f64> {
        let cells = box_cells(&self.grid, region)?;
        Ok(cells.iter().map(|&k| self.values[k]).sum::<f64>() * self.grid.cell_volume())
    }

    /// Net sample carrying the measure `density dx dt`.
    ///
    /// A sample `(x, r)` stands for the slab `Q = x + [-r/4, r/4)^d` times
    /// `(r/2, r]`, which the level's lattice tiles. Its value is chosen so
    /// that `value · weight = ∫_Q density`, i.e. `r · mean_Q / (2 ln 2)`.
    pub fn to_multiscale(&self, net: Arc<DyadicNet>) -> Result<MultiscaleSample> {
        net.check_resolved(&self.grid)?;
        let grid = &self.grid;
        let d = grid.d();
        let h = grid.h();
        let half_width = grid.half_width();
        let [nx1, nx2, nt] = grid.cell_dims();
        // Cells with center in [lo, hi) along one lateral axis.
        let lateral = |c: f64, q: f64, n: usize| {
            let lo = ((c - q + half_width) / h - 0.5).ceil().max(0.0) as usize;
            let hi = (((c + q + half_width) / h - 0.5).ceil().max(0.0) as usize).min(n);
            lo..hi
        };
        MultiscaleSample::from_fn(net, Density::SecondDerivative, |s| {
            let r = s.radius;
            let q = 0.25 * r;
            let region = Region::pencil_box(s.center, r);
            if !grid.contains(&region) {
                return Err(Error::RegionOutsideGrid(region.to_string()));
            }
            let r1 = lateral(s.center[0], q, nx1);
            let r2 = if d == 2 { lateral(s.center[1], q, nx2) } else { 0..1 };
            // Heights (r/2, r] hold the cell centers (j + 1/2) h.
            let j_lo = (0.5 * r / h - 0.5).floor().max(-1.0) as i64 + 1;
            let j_hi = ((r / h - 0.5).floor() as i64 + 1).min(nt as i64);
            let mut sum = 0.0;
            let mut count = 0usize;
            for j in j_lo.max(0) as usize..j_hi.max(0) as usize {
                for i2 in r2.clone() {
                    for i1 in r1.clone() {
                        sum += self.values[grid.cell_linear(crate::geometry::CellIndex { t: j, x2: i2, x1: i1 })];
                        count += 1;
                    }
                }
            }
            if count == 0 {
                return Err(Error::UnresolvedRegion(region.to_string()));
            }
            Ok(r * (sum / count as f64) / (2.0 * std::f64::consts::LN_2))
        })
    }
}

/// Fitted contraction constant for one `τ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContractionFit {
    pub tau: f64,
    /// `max(0, β(x, τr) - β(x, r)/2) / max(γ(x, r)², floor)`, maximized over samples.
    pub fitted_c: f64,
    /// Largest raw residual `β(x, τr) - β(x, r)/2`.
    pub max_residual: f64,
    pub admissible: usize,
    pub positive_residuals: usize,
}

/// Fits `C` in `β(x, τr) <= β(x, r)/2 + C γ(x, r)²` for each `τ`.
///
/// A sample `(x, r)` is used when `T(x, 5r)` lies in the grid box and
/// `r >= r_floor`.
pub fn decay_contraction_scan(
    u: &DiscreteSolution,
    field: &SampledField,
    net: &DyadicNet,
    taus: &[f64],
    kind: BoxKind,
    r_floor: f64,
) -> Result<Vec<ContractionFit>> {
    let grid = u.grid();
    let admissible: Vec<_> = net
        .samples()
        .iter()
        .filter(|s| s.radius >= r_floor * (1.0 - 1e-12) && grid.contains(&Region::carleson_box(s.center, 5.0 * s.radius)))
        .copied()
        .collect();
    if admissible.is_empty() {
        return Err(Error::NoAdmissibleSamples(format!(
            "no sample with r >= {r_floor} has T(x, 5r) inside the grid box"
        )));
    }
    let base: Vec<(f64, f64)> = admissible
        .par_iter()
        .map(|s| {
            let b = beta(u, &kind.region(s.center, s.radius))?;
            let g = gamma(field, s.center, s.radius, kind)?;
            Ok((b, g * g))
        })
        .collect::<Result<_>>()?;
    taus.iter()
        .map(|&tau| {
            if !(tau > 0.0 && tau < 1.0) {
                return Err(Error::InvalidParameter(format!("τ = {tau}")));
            }
            let residuals: Vec<f64> = admissible
                .par_iter()
                .zip(base.par_iter())
                .map(|(s, (b, _))| Ok(beta(u, &kind.region(s.center, tau * s.radius))? - 0.5 * b))
                .collect::<Result<_>>()?;
            let mut fit = ContractionFit {
                tau,
                fitted_c: 0.0,
                max_residual: f64::NEG_INFINITY,
                admissible: admissible.len(),
                positive_residuals: 0,
            };
            for (res, (_, g2)) in residuals.iter().zip(&base) {
                fit.max_residual = fit.max_residual.max(*res);
                if *res > 0.0 {
                    fit.positive_residuals += 1;
                    fit.fitted_c = fit.fitted_c.max(res / g2.max(GAMMA_SQ_FLOOR));
                }
            }
            Ok(fit)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{smooth_step_profile, CoefficientField};
    use crate::oracles::counterexample::beta_closed;
    use crate::oracles::sinh::{green_infinity, SinhTestSolution};
    use proptest::prelude::*;
    use std::sync::OnceLock;

    fn grid(d: usize, n: usize) -> HalfSpaceGrid {
        HalfSpaceGrid::with_resolution(d, 1.0, n).unwrap()
    }

    fn sinh_sample(d: usize, n: usize) -> DiscreteSolution {
        SinhTestSolution::new(0.05, 2.0, 1.0).unwrap().sample(&grid(d, n)).unwrap()
    }

    #[test]
    fn linear_solution() {
        for d in [1, 2] {
            let u = DiscreteSolution::from_fn(grid(d, 16), |p| 3.0 * p.t).unwrap();
            for kind in [BoxKind::Pencil, BoxKind::HalfBall] {
                let f = box_functionals(&u, &kind.region([0.1, 0.0], 0.5)).unwrap();
                assert!((f.lambda - 3.0).abs() < 1e-12);
                assert!((f.energy - 9.0).abs() < 1e-11);
                assert!(f.nonaffine < 1e-20 && f.beta < 1e-20);
            }
        }
    }

    #[test]
    fn constant_solution_is_degenerate() {
        let u = DiscreteSolution::from_fn(grid(1, 16), |_| 2.0).unwrap();
        assert!(matches!(beta(&u, &Region::pencil_box([0.0, 0.0], 0.5)), Err(Error::DegenerateSolution(_))));
    }

    #[test]
    fn region_outside_grid_is_rejected() {
        let u = sinh_sample(1, 16);
        assert!(matches!(energy(&u, &Region::pencil_box([0.8, 0.0], 0.5)), Err(Error::RegionOutsideGrid(_))));
    }

    #[test]
    fn scale_invariance() {
        let u = sinh_sample(1, 64);
        let v = DiscreteSolution::from_nodal(u.grid().clone(), u.values().iter().map(|x| 7.3 * x).collect()).unwrap();
        for r in [0.5, 0.25, 0.125] {
            let region = Region::pencil_box([0.2, 0.0], r);
            let (a, b) = (beta(&u, &region).unwrap(), beta(&v, &region).unwrap());
            assert!((a - b).abs() <= 1e-14 * a.max(1e-300), "{a} vs {b}");
        }
    }

    #[test]
    fn sinh_functionals_match_quadrature() {
        let s = SinhTestSolution::new(0.05, 2.0, 1.0).unwrap();
        let mut errs = Vec::new();
        for n in [64, 128] {
            let u = s.sample(&grid(1, n)).unwrap();
            let f = box_functionals(&u, &Region::pencil_box([0.25, 0.0], 0.5)).unwrap();
            let exact = s.functionals(1, [0.25, 0.0], 0.5, BoxKind::Pencil).unwrap();
            assert!((f.lambda - exact.lambda).abs() < 1e-3);
            errs.push((f.nonaffine - exact.nonaffine).abs());
        }
        assert!(errs[0] / errs[1] > 3.0, "{errs:?}");
    }

    fn smooth_profile() -> crate::oracles::profile::Profile1D {
        smooth_step_profile(1.0, 2.0, 0.2, 0.6).unwrap()
    }

    #[test]
    fn green_profile_beta_matches_closed_form() {
        let a = smooth_profile();
        let mut errs = Vec::new();
        for n in [64, 128] {
            let u = green_infinity(&a, &grid(1, n)).unwrap();
            let mut worst: f64 = 0.0;
            for r in [0.25, 0.5, 0.75] {
                let b = beta(&u, &Region::pencil_box([0.0, 0.0], r)).unwrap();
                worst = worst.max((b - beta_closed(&a, r)).abs());
            }
            errs.push(worst);
        }
        assert!(errs[1] < 1e-4 && errs[0] / errs[1] > 3.0, "{errs:?}");
    }

    #[test]
    fn green_profile_beta_is_x_independent() {
        let a = smooth_profile();
        let u = green_infinity(&a, &grid(1, 64)).unwrap();
        let net = Arc::new(DyadicNet::new(1, Region::surface_ball([0.0, 0.0], 0.5), 1.0 / 8.0).unwrap());
        let sample = beta_field(&u, net.clone(), BoxKind::Pencil).unwrap();
        for level in net.levels() {
            let first = level.first_sample;
            let b0 = sample.values()[first];
            for k in first..first + level.sample_count {
                assert!((sample.values()[k] - b0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn nonaffine_is_energy_minus_slope_squared_for_profiles() {
        let u = green_infinity(&smooth_profile(), &grid(2, 16)).unwrap();
        let f = box_functionals(&u, &Region::carleson_box([0.0, 0.0], 0.75)).unwrap();
        assert!((f.nonaffine - (f.energy - f.lambda * f.lambda)).abs() < 1e-13);
    }

    fn solved() -> &'static DiscreteSolution {
        static U: OnceLock<DiscreteSolution> = OnceLock::new();
        U.get_or_init(|| {
            let field = crate::coefficients::SmoothDkp::new(crate::coefficients::SmoothDkpParams::new(1, 3)).unwrap();
            let a = CoefficientField::smooth_dkp(field);
            let g = grid(1, 32);
            crate::solver::solve_dirichlet(&a, &g, &crate::solver::BoundaryData::linear(1.0), &Default::default()).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn orthogonality_identity(mu in -3.0f64..3.0, x in -0.4f64..0.4, r in 0.15f64..0.6, half in any::<bool>()) {
            let u = solved();
            let kind = if half { BoxKind::HalfBall } else { BoxKind::Pencil };
            let region = kind.region([x, 0.0], r);
            prop_assume!(u.grid().contains(&region));
            let f = box_functionals(u, &region).unwrap();
            let lhs = affine_defect(u, &region, mu).unwrap();
            let rhs = (mu - f.lambda).powi(2) + f.nonaffine;
            prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.max(1e-300));
            prop_assert!(lhs / f.energy >= f.beta * (1.0 - 1e-14));
            prop_assert!((0.0..=1.0).contains(&f.beta));
        }
    }

    #[test]
    fn density_vanishes_for_linear_solution() {
        let u = DiscreteSolution::from_fn(grid(2, 16), |p| p.t).unwrap();
        let dens = second_deriv_density(&u).unwrap();
        assert!(dens.values().iter().all(|&v| v == 0.0));
        assert!(dens.excluded().iter().any(|&e| e));
    }

    #[test]
    fn density_matches_profile_oracle() {
        let a = smooth_profile();
        let g = grid(1, 128);
        let u = green_infinity(&a, &g).unwrap();
        let dens = second_deriv_density(&u).unwrap();
        for t in [0.3, 0.45, 0.8] {
            let j = (t / g.h()) as usize;
            let c = crate::geometry::CellIndex { t: j, x2: 0, x1: 100 };
            let tc = g.cell_height(j);
            let exact = (a.derivative(tc) / a.value(tc).powi(2)).powi(2) * tc.powi(3) / a.g(tc).powi(2);
            let got = dens.values()[g.cell_linear(c)];
            assert!((got - exact).abs() < 1e-2 * exact.max(1e-3), "t={tc}: {got} vs {exact}");
        }
    }

    #[test]
    fn density_requires_positive_solution() {
        let u = DiscreteSolution::from_fn(grid(1, 16), |p| p.t - 0.5).unwrap();
        assert!(matches!(second_deriv_density(&u), Err(Error::PositivityViolation(_))));
    }

    #[test]
    fn multiscale_density_preserves_slab_integrals() {
        let g = grid(1, 64);
        let u = DiscreteSolution::from_fn(g.clone(), |p| p.t + 0.3 * p.t * p.t + 0.1 * p.x[0] * p.x[0]).unwrap();
        let dens = second_deriv_density(&u).unwrap();
        let net = Arc::new(DyadicNet::new(1, Region::surface_ball([0.0, 0.0], 0.5), 1.0 / 8.0).unwrap());
        let ms = dens.to_multiscale(net.clone()).unwrap();
        for level in net.levels() {
            let r = level.radius;
            let total: f64 = (level.first_sample..level.first_sample + level.sample_count)
                .map(|k| ms.values()[k] * net.samples()[k].weight)
                .sum();
            let mut slab = 0.0;
            for k in 0..g.cell_count() {
                let c = g.cell_from_linear(k);
                let p = g.cell_center(c);
                if p.x[0].abs() < 0.5 && p.t > 0.5 * r && p.t <= r {
                    slab += dens.values()[k] * g.cell_volume();
                }
            }
            assert!((total - slab).abs() < 1e-12 * slab, "r={r}: {total} vs {slab}");
        }
    }

    #[test]
    fn contraction_for_linear_solution_is_zero() {
        let g = grid(1, 128);
        let u = DiscreteSolution::from_fn(g.clone(), |p| 2.0 * p.t).unwrap();
        let field = CoefficientField::identity(1).sample(&g).unwrap();
        let net = DyadicNet::new(1, Region::surface_ball([0.0, 0.0], 1.0), 1.0 / 8.0).unwrap();
        let fits = decay_contraction_scan(&u, &field, &net, &[0.25, 0.125], BoxKind::Pencil, 0.0).unwrap();
        for f in fits {
            assert_eq!(f.fitted_c, 0.0);
            assert!(f.max_residual.abs() < 1e-20);
        }
    }

    #[test]
    fn contraction_for_constant_coefficients_is_zero() {
        let g = grid(1, 256);
        let u = SinhTestSolution::new(0.05, 2.0, 1.0).unwrap().sample(&g).unwrap();
        let field = CoefficientField::identity(1).sample(&g).unwrap();
        let net = DyadicNet::new(1, Region::surface_ball([0.0, 0.0], 1.0), 1.0 / 8.0).unwrap();
        let fits = decay_contraction_scan(&u, &field, &net, &[0.25], BoxKind::Pencil, 32.0 * g.h()).unwrap();
        assert!(fits[0].admissible > 0);
        assert_eq!(fits[0].fitted_c, 0.0, "{:?}", fits[0]);
    }

    #[test]
    fn contraction_without_admissible_samples() {
        let g = grid(1, 16);
        let u = DiscreteSolution::from_fn(g.clone(), |p| p.t).unwrap();
        let field = CoefficientField::identity(1).sample(&g).unwrap();
        let net = DyadicNet::new(1, Region::surface_ball([0.0, 0.0], 1.0), 0.5).unwrap();
        assert!(matches!(
            decay_contraction_scan(&u, &field, &net, &[0.25], BoxKind::Pencil, 0.0),
            Err(Error::NoAdmissibleSamples(_))
        ));
    }
}
