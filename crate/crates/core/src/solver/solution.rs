use rayon::prelude::*;

use super::krylov::KrylovOutcome;
use super::Layout;
use crate::error::{Error, Result};
use crate::geometry::{BoxKind, CellIndex, HalfSpaceGrid, Point, Region};

/// Nodal values of a solution with cached cell gradients and Hessians.
///
/// Gradients are averages of the edge differences of each cell (second
/// order at the cell center). Hessians are central second differences at
/// nodes at least two steps from every face, averaged over the cell's
/// corners; cells with a corner closer than that have no Hessian.
#[derive(Debug, Clone)]
pub struct DiscreteSolution {
    grid: HalfSpaceGrid,
    values: Vec<f64>,
    gradients: Vec<[f64; 3]>,
    hessians: Vec<Option<[[f64; 3]; 3]>>,
    iterations: usize,
    relative_residual: f64,
    residual_history: Vec<f64>,
    vanishing_bottom: bool,
}

impl DiscreteSolution {
    /// Wraps nodal values (node order as in [`HalfSpaceGrid::node_linear`]).
    pub fn from_nodal(grid: HalfSpaceGrid, values: Vec<f64>) -> Result<Self> {
        let layout = Layout::new(&grid);
        if values.len() != layout.len() {
            return Err(Error::InvalidParameter(format!(
                "{} nodal values for {} nodes",
                values.len(),
                layout.len()
            )));
        }
        let (gradients, hessians) = differentiate_nodal(&grid, &layout, &values);
        Ok(Self {
            grid,
            values,
            gradients,
            hessians,
            iterations: 0,
            relative_residual: 0.0,
            residual_history: Vec::new(),
            vanishing_bottom: false,
        })
    }

    /// Samples `f` on the nodes.
    pub fn from_fn<F: Fn(&Point) -> f64 + Sync>(grid: HalfSpaceGrid, f: F) -> Result<Self> {
        let layout = Layout::new(&grid);
        let values = (0..layout.len())
            .into_par_iter()
            .map(|k| f(&layout.point(&grid, layout.index(k))))
            .collect();
        Self::from_nodal(grid, values)
    }

    pub(crate) fn set_solver_outcome(&mut self, outcome: KrylovOutcome, vanishing_bottom: bool) {
        self.iterations = outcome.iterations;
        self.relative_residual = outcome.relative_residual;
        self.residual_history = outcome.history;
        self.vanishing_bottom = vanishing_bottom;
    }

    pub fn grid(&self) -> &HalfSpaceGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn relative_residual(&self) -> f64 {
        self.relative_residual
    }

    pub fn residual_history(&self) -> &[f64] {
        &self.residual_history
    }

    /// Cell gradient, components `(∂x1, [∂x2,] ∂t)` with `∂t` at index `d`.
    pub fn gradient(&self, c: CellIndex) -> [f64; 3] {
        self.gradients[self.grid.cell_linear(c)]
    }

    pub fn gradients(&self) -> &[[f64; 3]] {
        &self.gradients
    }

    /// Cell Hessian, `None` within two steps of a face.
    pub fn hessian(&self, c: CellIndex) -> Option<[[f64; 3]; 3]> {
        self.hessians[self.grid.cell_linear(c)]
    }

    pub fn hessians(&self) -> &[Option<[[f64; 3]; 3]>] {
        &self.hessians
    }

    /// Both caches, by linear cell index.
    pub fn differentiate(&self) -> (&[[f64; 3]], &[Option<[[f64; 3]; 3]>]) {
        (&self.gradients, &self.hessians)
    }

    /// Average of the cell's corner values.
    pub fn cell_value(&self, c: CellIndex) -> f64 {
        let layout = Layout::new(&self.grid);
        let dim = layout.dim;
        let lower = cell_corner(&layout, c);
        let mut s = 0.0;
        for corner in 0..(1usize << dim) {
            let mut idx = lower;
            for (a, v) in idx.iter_mut().enumerate().take(dim) {
                *v += (corner >> a) & 1;
            }
            s += self.values[layout.linear(idx)];
        }
        s / (1usize << dim) as f64
    }

    /// Multilinear interpolation at a point of the grid box.
    pub fn interpolate(&self, p: &Point) -> f64 {
        let layout = Layout::new(&self.grid);
        let dim = layout.dim;
        let d = dim - 1;
        let r = self.grid.half_width();
        let h = self.grid.h();
        let coords: Vec<f64> = (0..dim)
            .map(|a| if a == d { p.t / h } else { (p.x[a] + r) / h })
            .collect();
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..dim {
            let max_cell = layout.nodes[a] - 2;
            let f = coords[a].clamp(0.0, (layout.nodes[a] - 1) as f64);
            let i = (f.floor() as usize).min(max_cell);
            base[a] = i;
            frac[a] = f - i as f64;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << dim) {
            let mut w = 1.0;
            let mut idx = base;
            for a in 0..dim {
                if (corner >> a) & 1 == 1 {
                    w *= frac[a];
                    idx[a] += 1;
                } else {
                    w *= 1.0 - frac[a];
                }
            }
            acc += w * self.values[layout.linear(idx)];
        }
        acc
    }

    /// Smallest value over interior nodes.
    pub fn min_interior(&self) -> f64 {
        let layout = Layout::new(&self.grid);
        (0..layout.len())
            .filter(|&k| !layout.is_boundary(layout.index(k)))
            .map(|k| self.values[k])
            .fold(f64::INFINITY, f64::min)
    }

    /// Whether data vanishing on the bottom and positive elsewhere produced a
    /// positive interior; `None` when the data were not of that kind.
    pub fn maximum_principle_holds(&self) -> Option<bool> {
        self.vanishing_bottom.then(|| self.min_interior() > 0.0)
    }

    /// Nodes of the closed region (centers within distance `r`).
    fn node_values_in(&self, region: &Region) -> Vec<f64> {
        let layout = Layout::new(&self.grid);
        let d = self.grid.d();
        let r = region.radius;
        let tol = 1e-12 * r;
        (0..layout.len())
            .filter_map(|k| {
                let p = layout.point(&self.grid, layout.index(k));
                let lat: f64 = (0..d).map(|a| (p.x[a] - region.center[a]).powi(2)).sum();
                let inside = match region.kind {
                    crate::geometry::RegionKind::CarlesonBox => lat + p.t * p.t <= (r + tol).powi(2),
                    _ => lat <= (r + tol).powi(2) && p.t <= r + tol,
                };
                inside.then_some(self.values[k])
            })
            .collect()
    }
}

fn cell_corner(layout: &Layout, c: CellIndex) -> [usize; 3] {
    if layout.dim == 2 {
        [c.x1, c.t, 0]
    } else {
        [c.x1, c.x2, c.t]
    }
}

#[allow(clippy::type_complexity)]
fn differentiate_nodal(
    grid: &HalfSpaceGrid,
    layout: &Layout,
    u: &[f64],
) -> (Vec<[f64; 3]>, Vec<Option<[[f64; 3]; 3]>>) {
    let dim = layout.dim;
    let h = grid.h();
    let n_cells = grid.cell_count();

    let nodal_hessian = |idx: [usize; 3]| -> Option<[[f64; 3]; 3]> {
        for a in 0..dim {
            if idx[a] < 2 || idx[a] + 3 > layout.nodes[a] {
                return None;
            }
        }
        let at = |delta: [i64; 3]| u[layout.neighbor(idx, delta).unwrap()];
        let mut hess = [[0.0; 3]; 3];
        let c = at([0, 0, 0]);
        for p in 0..dim {
            let mut e = [0i64; 3];
            e[p] = 1;
            let m = [-e[0], -e[1], -e[2]];
            hess[p][p] = (at(e) - 2.0 * c + at(m)) / (h * h);
            for q in (p + 1)..dim {
                let mut pp = [0i64; 3];
                let mut pm = [0i64; 3];
                let mut mp = [0i64; 3];
                let mut mm = [0i64; 3];
                pp[p] = 1;
                pp[q] = 1;
                pm[p] = 1;
                pm[q] = -1;
                mp[p] = -1;
                mp[q] = 1;
                mm[p] = -1;
                mm[q] = -1;
                let v = (at(pp) - at(pm) - at(mp) + at(mm)) / (4.0 * h * h);
                hess[p][q] = v;
                hess[q][p] = v;
            }
        }
        Some(hess)
    };

    let results: Vec<([f64; 3], Option<[[f64; 3]; 3]>)> = (0..n_cells)
        .into_par_iter()
        .map(|k| {
            let c = grid.cell_from_linear(k);
            let lower = cell_corner(layout, c);
            let mut grad = [0.0; 3];
            let mut hess = Some([[0.0; 3]; 3]);
            let corners = 1usize << dim;
            for corner in 0..corners {
                let mut idx = lower;
                for (a, v) in idx.iter_mut().enumerate().take(dim) {
                    *v += (corner >> a) & 1;
                }
                let val = u[layout.linear(idx)];
                for (p, g) in grad.iter_mut().enumerate().take(dim) {
                    let sign = if (corner >> p) & 1 == 1 { 1.0 } else { -1.0 };
                    *g += sign * val;
                }
                if let Some(acc) = hess.as_mut() {
                    match nodal_hessian(idx) {
                        Some(hn) => {
                            for p in 0..dim {
                                for q in 0..dim {
                                    acc[p][q] += hn[p][q];
                                }
                            }
                        }
                        None => hess = None,
                    }
                }
            }
            let edges = (corners / 2) as f64;
            for g in grad.iter_mut().take(dim) {
                *g /= edges * h;
            }
            if let Some(acc) = hess.as_mut() {
                for row in acc.iter_mut() {
                    for v in row.iter_mut() {
                        *v /= corners as f64;
                    }
                }
            }
            (grad, hess)
        })
        .collect();
    results.into_iter().unzip()
}

/// Scale-invariant boundary ratios of a solution vanishing on the bottom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    /// `E_u(x, r) r² / u(x, r)²`.
    pub corkscrew: f64,
    /// `sup_{T(x, r)} u / u(x, r)`.
    pub harnack: f64,
    /// `r² mean_{T(x,r)} |∇u|² / mean_{T(x,2r)} u²`.
    pub caccioppoli: f64,
}

/// Corkscrew, Harnack and Caccioppoli ratios at `(x, r)`; requires the box
/// of radius `2r` inside the grid.
pub fn diagnostics(u: &DiscreteSolution, center: [f64; 2], r: f64, kind: BoxKind) -> Result<Diagnostics> {
    let grid = u.grid();
    let small = kind.region(center, r);
    let large = kind.region(center, 2.0 * r);
    if !grid.contains(&large) {
        return Err(Error::RegionOutsideGrid(large.to_string()));
    }
    let d = grid.d();
    let cells_small = grid.cells_in(&small)?;
    let cells_large = grid.cells_in(&large)?;
    let energy = cells_small
        .iter()
        .map(|c| {
            let g = u.gradient(c);
            (0..=d).map(|a| g[a] * g[a]).sum::<f64>()
        })
        .sum::<f64>()
        / cells_small.len() as f64;
    let mean_sq = cells_large.iter().map(|c| u.cell_value(c).powi(2)).sum::<f64>() / cells_large.len() as f64;
    let corkscrew_value = u.interpolate(&Point::new(center, r));
    if !(corkscrew_value > 0.0) {
        return Err(Error::PositivityViolation(format!("u = {corkscrew_value} at the corkscrew point")));
    }
    let sup = u.node_values_in(&small).into_iter().fold(f64::NEG_INFINITY, f64::max);
    Ok(Diagnostics {
        corkscrew: energy * r * r / (corkscrew_value * corkscrew_value),
        harnack: sup / corkscrew_value,
        caccioppoli: r * r * energy / mean_sq,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_function_derivatives_are_exact() {
        for d in [1, 2] {
            let g = HalfSpaceGrid::with_resolution(d, 1.0, 8).unwrap();
            let u = DiscreteSolution::from_fn(g.clone(), |p| p.t).unwrap();
            for k in 0..g.cell_count() {
                let c = g.cell_from_linear(k);
                let grad = u.gradient(c);
                assert!((grad[d] - 1.0).abs() < 1e-12);
                assert!(grad[..d].iter().all(|v| v.abs() < 1e-12));
                if let Some(hs) = u.hessian(c) {
                    assert!(hs.iter().flatten().all(|v| v.abs() < 1e-9));
                }
            }
        }
    }

    #[test]
    fn hessian_exclusion_band() {
        let g = HalfSpaceGrid::with_resolution(1, 1.0, 8).unwrap();
        let u = DiscreteSolution::from_fn(g.clone(), |p| p.t * p.t).unwrap();
        // Cells (x1, t) with t in 2..=n-3 and x1 in 2..=2n-3 carry Hessians.
        let n = 8;
        for k in 0..g.cell_count() {
            let c = g.cell_from_linear(k);
            let inside = (2..=n - 3).contains(&c.t) && (2..=2 * n - 3).contains(&c.x1);
            assert_eq!(u.hessian(c).is_some(), inside, "{c:?}");
            if let Some(hs) = u.hessian(c) {
                assert!((hs[1][1] - 2.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn sinh_hessian_is_second_order() {
        let eps = 0.05;
        let k = 2.0;
        let exact = |x: f64, t: f64| {
            let s = eps * k * k;
            [[-s * (k * x).sin() * (k * t).sinh(), s * (k * x).cos() * (k * t).cosh()], [s * (k * x).cos() * (k * t).cosh(), s * (k * x).sin() * (k * t).sinh()]]
        };
        let mut errs = Vec::new();
        for n in [32, 64] {
            let g = HalfSpaceGrid::with_resolution(1, 1.0, n).unwrap();
            let u = DiscreteSolution::from_fn(g.clone(), |p| p.t + eps * (k * p.x[0]).sin() * (k * p.t).sinh()).unwrap();
            let mut err: f64 = 0.0;
            for kk in 0..g.cell_count() {
                let c = g.cell_from_linear(kk);
                if let Some(hs) = u.hessian(c) {
                    let p = g.cell_center(c);
                    let e = exact(p.x[0], p.t);
                    for a in 0..2 {
                        for b in 0..2 {
                            err = err.max((hs[a][b] - e[a][b]).abs());
                        }
                    }
                }
            }
            errs.push(err);
        }
        assert!(errs[0] / errs[1] > 3.5, "{errs:?}");
    }

    #[test]
    fn interpolation_reproduces_bilinear() {
        let g = HalfSpaceGrid::with_resolution(2, 1.0, 8).unwrap();
        let u = DiscreteSolution::from_fn(g, |p| 1.0 + p.x[0] - 2.0 * p.x[1] + 3.0 * p.t).unwrap();
        let p = Point::new([0.123, -0.456], 0.789);
        assert!((u.interpolate(&p) - (1.0 + 0.123 + 0.912 + 3.0 * 0.789)).abs() < 1e-12);
    }

    #[test]
    fn diagnostics_of_linear_solution() {
        let g = HalfSpaceGrid::with_resolution(1, 1.0, 64).unwrap();
        let u = DiscreteSolution::from_fn(g, |p| p.t).unwrap();
        let diag = diagnostics(&u, [0.0, 0.0], 0.25, BoxKind::Pencil).unwrap();
        assert!((diag.corkscrew - 1.0).abs() < 1e-12);
        assert!((diag.harnack - 1.0).abs() < 1e-12);
        let diag = diagnostics(&u, [0.0, 0.0], 0.25, BoxKind::HalfBall).unwrap();
        assert!((diag.harnack - 1.0).abs() < 1e-12);
    }
}
