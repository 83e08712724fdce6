//! Conservative finite-difference discretization of `-div(A ∇u) = 0` on the
//! grid box with Dirichlet data, and its iterative solution.
//!
//! The bilinear form is a per-cell quadrature:
//!
//! * diagonal entries `a_pp` act on edge differences along axis `p`, each
//!   edge carrying the average of `a_pp` over the cells that share it;
//! * off-diagonal entries `a_pq` act on the products of `∂_q u` and `∂_p v`,
//!   both averaged over the cell's `(p, q)` faces.
//!
//! For diagonal `A` this is the 5-point (7-point) stencil; with cross terms it
//! has 9 (19) points. The form is exact on affine functions when `A` is
//! constant, and symmetric whenever `A` is.

mod krylov;
mod solution;

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

pub use krylov::KrylovOutcome;
pub use solution::{diagnostics, Diagnostics, DiscreteSolution};

use crate::coefficients::{CellSampling, CoefficientField, SampledField};
use crate::error::{Error, Result};
use crate::geometry::{HalfSpaceGrid, Point};

/// Edge coefficient rule for the diagonal entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FaceAverage {
    #[default]
    Arithmetic,
    /// Harmonic mean of the adjacent cells; `a(t) Id` profiles are also
    /// sampled by their harmonic cell means along `t`.
    Harmonic,
}

impl FaceAverage {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "arithmetic" => Some(Self::Arithmetic),
            "harmonic" => Some(Self::Harmonic),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Arithmetic => "arithmetic",
            Self::Harmonic => "harmonic",
        }
    }

    pub fn cell_sampling(self) -> CellSampling {
        match self {
            Self::Arithmetic => CellSampling::Midpoint,
            Self::Harmonic => CellSampling::HarmonicVertical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub tol: f64,
    pub max_iter: usize,
    pub face_average: FaceAverage,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 100_000, face_average: FaceAverage::Arithmetic }
    }
}

type BoundaryFn = Arc<dyn Fn(&Point) -> f64 + Send + Sync>;

/// Dirichlet data: `bottom` on `{t = 0}`, `lateral_top` on the other faces.
#[derive(Clone)]
pub struct BoundaryData {
    bottom: BoundaryFn,
    lateral_top: BoundaryFn,
    vanishing_bottom: bool,
}

impl fmt::Debug for BoundaryData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BoundaryData").field("vanishing_bottom", &self.vanishing_bottom).finish()
    }
}

impl BoundaryData {
    pub fn new<B, L>(bottom: B, lateral_top: L) -> Self
    where
        B: Fn(&Point) -> f64 + Send + Sync + 'static,
        L: Fn(&Point) -> f64 + Send + Sync + 'static,
    {
        Self { bottom: Arc::new(bottom), lateral_top: Arc::new(lateral_top), vanishing_bottom: false }
    }

    /// Bottom `0`, other faces `lateral_top`; the solution is expected to be
    /// positive inside.
    pub fn vanishing_bottom<L>(lateral_top: L) -> Self
    where
        L: Fn(&Point) -> f64 + Send + Sync + 'static,
    {
        Self { bottom: Arc::new(|_| 0.0), lateral_top: Arc::new(lateral_top), vanishing_bottom: true }
    }

    /// The same function on every face.
    pub fn from_fn<F>(f: F) -> Self
    where
        F: Fn(&Point) -> f64 + Send + Sync + 'static,
    {
        let f: BoundaryFn = Arc::new(f);
        Self { bottom: f.clone(), lateral_top: f, vanishing_bottom: false }
    }

    /// Bottom `0`, other faces `t / R`.
    pub fn linear(box_height: f64) -> Self {
        Self::vanishing_bottom(move |p| p.t / box_height)
    }

    pub fn has_vanishing_bottom(&self) -> bool {
        self.vanishing_bottom
    }

    pub fn value(&self, p: &Point, on_bottom: bool) -> f64 {
        if on_bottom {
            (self.bottom)(p)
        } else {
            (self.lateral_top)(p)
        }
    }
}

/// Node layout of a grid with the vertical axis last.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Layout {
    pub dim: usize,
    pub nodes: [usize; 3],
    pub stride: [usize; 3],
}

impl Layout {
    pub fn new(grid: &HalfSpaceGrid) -> Self {
        let [n1, n2, nt] = grid.node_dims();
        if grid.d() == 1 {
            Self { dim: 2, nodes: [n1, nt, 1], stride: [1, n1, 0] }
        } else {
            Self { dim: 3, nodes: [n1, n2, nt], stride: [1, n1, n1 * n2] }
        }
    }

    pub fn len(&self) -> usize {
        self.nodes[..self.dim].iter().product()
    }

    pub fn index(&self, k: usize) -> [usize; 3] {
        let mut out = [0; 3];
        let mut rem = k;
        for a in 0..self.dim {
            out[a] = rem % self.nodes[a];
            rem /= self.nodes[a];
        }
        out
    }

    pub fn linear(&self, idx: [usize; 3]) -> usize {
        (0..self.dim).map(|a| idx[a] * self.stride[a]).sum()
    }

    pub fn is_boundary(&self, idx: [usize; 3]) -> bool {
        (0..self.dim).any(|a| idx[a] == 0 || idx[a] + 1 == self.nodes[a])
    }

    pub fn stencil_size(&self) -> usize {
        3usize.pow(self.dim as u32)
    }

    /// Offset `δ ∈ {-1, 0, 1}^D` of stencil slot `o`.
    pub fn slot_offset(&self, o: usize) -> [i64; 3] {
        let mut out = [0; 3];
        let mut rem = o;
        for v in out.iter_mut().take(self.dim) {
            *v = (rem % 3) as i64 - 1;
            rem /= 3;
        }
        out
    }

    pub fn slot(&self, delta: [i64; 3]) -> usize {
        (0..self.dim).rev().fold(0, |acc, a| acc * 3 + (delta[a] + 1) as usize)
    }

    /// Linear index of `idx + delta`, if inside the grid.
    pub fn neighbor(&self, idx: [usize; 3], delta: [i64; 3]) -> Option<usize> {
        let mut k = 0;
        for a in 0..self.dim {
            let v = idx[a] as i64 + delta[a];
            if v < 0 || v >= self.nodes[a] as i64 {
                return None;
            }
            k += v as usize * self.stride[a];
        }
        Some(k)
    }

    /// Position of a node; axis order `(x1, [x2,] t)`.
    pub fn point(&self, grid: &HalfSpaceGrid, idx: [usize; 3]) -> Point {
        let d = self.dim - 1;
        let x2 = if d == 2 { grid.node_coord(idx[1]) } else { 0.0 };
        Point::new([grid.node_coord(idx[0]), x2], grid.node_height(idx[d]))
    }

    /// Linear cell index of the cell with lower corner `c` (axis order as nodes).
    pub fn cell(&self, grid: &HalfSpaceGrid, c: [usize; 3]) -> usize {
        let d = self.dim - 1;
        grid.cell_linear(crate::geometry::CellIndex { t: c[d], x2: if d == 2 { c[1] } else { 0 }, x1: c[0] })
    }
}

/// Stencil coefficients for every node (boundary rows included, so the
/// operator can be applied to full node vectors), scaled by `1/h^D`.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    grid: HalfSpaceGrid,
    layout: Layout,
    stencil: Vec<f64>,
    boundary_values: Vec<f64>,
    symmetric: bool,
    bottom_vanishes: bool,
}

impl DiscreteOperator {
    pub fn grid(&self) -> &HalfSpaceGrid {
        &self.grid
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Stencil of a node as `(offset, coefficient)` pairs with nonzero
    /// coefficient; offsets in axis order `(x1, [x2,] t)`.
    pub fn stencil_at(&self, node: [usize; 3]) -> Vec<([i64; 3], f64)> {
        let s = self.layout.stencil_size();
        let k = self.layout.linear(node);
        (0..s)
            .filter_map(|o| {
                let c = self.stencil[k * s + o];
                (c != 0.0).then(|| (self.layout.slot_offset(o), c))
            })
            .collect()
    }

    /// Dirichlet values on boundary nodes, zero inside.
    pub fn boundary_values(&self) -> &[f64] {
        &self.boundary_values
    }

    fn row(&self, k: usize, x: &[f64]) -> f64 {
        let s = self.layout.stencil_size();
        let idx = self.layout.index(k);
        let row = &self.stencil[k * s..(k + 1) * s];
        let mut acc = 0.0;
        if self.layout.is_boundary(idx) {
            for (o, &c) in row.iter().enumerate() {
                if c != 0.0 {
                    if let Some(j) = self.layout.neighbor(idx, self.layout.slot_offset(o)) {
                        acc += c * x[j];
                    }
                }
            }
        } else {
            for (o, &c) in row.iter().enumerate() {
                if c != 0.0 {
                    let delta = self.layout.slot_offset(o);
                    let j = (k as i64 + (0..self.layout.dim).map(|a| delta[a] * self.layout.stride[a] as i64).sum::<i64>()) as usize;
                    acc += c * x[j];
                }
            }
        }
        acc
    }

    /// `K x` on every node.
    pub fn apply_full(&self, x: &[f64]) -> Vec<f64> {
        (0..self.layout.len()).into_par_iter().map(|k| self.row(k, x)).collect()
    }

    /// `K x` on interior rows, zero on boundary rows.
    fn apply_interior(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().for_each(|(k, y)| {
            *y = if self.layout.is_boundary(self.layout.index(k)) { 0.0 } else { self.row(k, x) };
        });
    }

    /// `Kᵀ x` restricted to interior rows and columns.
    fn apply_interior_t(&self, x: &[f64], y: &mut [f64]) {
        let s = self.layout.stencil_size();
        y.par_iter_mut().enumerate().for_each(|(k, y)| {
            let idx = self.layout.index(k);
            if self.layout.is_boundary(idx) {
                *y = 0.0;
                return;
            }
            let mut acc = 0.0;
            for o in 0..s {
                let delta = self.layout.slot_offset(o);
                let back = [-delta[0], -delta[1], -delta[2]];
                if let Some(j) = self.layout.neighbor(idx, back) {
                    if !self.layout.is_boundary(self.layout.index(j)) {
                        acc += self.stencil[j * s + o] * x[j];
                    }
                }
            }
            *y = acc;
        });
    }

    /// Interior residual `K u` (zero on boundary rows) of a full node vector.
    pub fn residual(&self, u: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; u.len()];
        self.apply_interior(u, &mut y);
        y
    }

    /// Unscaled bilinear form `B(u, v) = h^D vᵀ K u` over all nodes.
    pub fn bilinear(&self, u: &[f64], v: &[f64]) -> f64 {
        let ku = self.apply_full(u);
        self.grid.h().powi(self.layout.dim as i32) * krylov::dot(&ku, v)
    }

    /// `h^D Σ_{boundary nodes} u (K u)`, the discrete flux pairing.
    pub fn boundary_flux(&self, u: &[f64]) -> f64 {
        let ku = self.apply_full(u);
        let s: f64 = (0..u.len())
            .filter(|&k| self.layout.is_boundary(self.layout.index(k)))
            .map(|k| u[k] * ku[k])
            .sum();
        self.grid.h().powi(self.layout.dim as i32) * s
    }
}

/// Samples `field` on `grid` and assembles the operator and right-hand side.
pub fn assemble(
    field: &CoefficientField,
    grid: &HalfSpaceGrid,
    bc: &BoundaryData,
    face: FaceAverage,
) -> Result<(DiscreteOperator, Vec<f64>)> {
    let sampled = field.sample_with(grid, face.cell_sampling())?;
    assemble_sampled(&sampled, bc, face)
}

/// Assembles from cell matrices that were already validated.
pub fn assemble_sampled(field: &SampledField, bc: &BoundaryData, face: FaceAverage) -> Result<(DiscreteOperator, Vec<f64>)> {
    let grid = field.grid().clone();
    let layout = Layout::new(&grid);
    let dim = layout.dim;
    let s = layout.stencil_size();
    let h = grid.h();
    let cells = field.cells();
    let cell_dims: Vec<usize> = (0..dim).map(|a| layout.nodes[a] - 1).collect();
    let faces = if dim == 3 { 2.0 } else { 1.0 };

    let mut stencil = vec![0.0; layout.len() * s];
    stencil.par_chunks_mut(s).enumerate().for_each(|(k, row)| {
        let idx = layout.index(k);
        // Diagonal entries on edges.
        for p in 0..dim {
            for dir in [-1i64, 1] {
                if (dir < 0 && idx[p] == 0) || (dir > 0 && idx[p] + 1 == layout.nodes[p]) {
                    continue;
                }
                let lower = if dir < 0 { idx[p] - 1 } else { idx[p] };
                let mut vals = Vec::with_capacity(4);
                let others: Vec<usize> = (0..dim).filter(|&q| q != p).collect();
                for mask in 0..(1usize << others.len()) {
                    let mut c = [0usize; 3];
                    c[p] = lower;
                    let mut ok = true;
                    for (bit, &q) in others.iter().enumerate() {
                        let shift = (mask >> bit) & 1;
                        if shift == 0 {
                            if idx[q] == 0 {
                                ok = false;
                                break;
                            }
                            c[q] = idx[q] - 1;
                        } else {
                            if idx[q] >= cell_dims[q] {
                                ok = false;
                                break;
                            }
                            c[q] = idx[q];
                        }
                    }
                    if ok {
                        vals.push(cells[layout.cell(&grid, c)].get(p, p));
                    }
                }
                let full = (1usize << others.len()) as f64;
                let coef = match face {
                    FaceAverage::Arithmetic => vals.iter().sum::<f64>() / full,
                    FaceAverage::Harmonic => {
                        let m = vals.len() as f64;
                        (m / vals.iter().map(|v| 1.0 / v).sum::<f64>()) * (m / full)
                    }
                };
                let w = coef / (h * h);
                let mut delta = [0i64; 3];
                delta[p] = dir;
                row[layout.slot([0, 0, 0])] += w;
                row[layout.slot(delta)] -= w;
            }
        }
        // Cross terms from each adjacent cell.
        for corner in 0..(1usize << dim) {
            // `corner` gives this node's position inside the cell (bit a set:
            // node is the upper corner along axis a).
            let mut c = [0usize; 3];
            let mut ok = true;
            for a in 0..dim {
                if (corner >> a) & 1 == 1 {
                    if idx[a] == 0 {
                        ok = false;
                        break;
                    }
                    c[a] = idx[a] - 1;
                } else {
                    if idx[a] >= cell_dims[a] {
                        ok = false;
                        break;
                    }
                    c[a] = idx[a];
                }
            }
            if !ok {
                continue;
            }
            let a_cell = cells[layout.cell(&grid, c)];
            let bv = corner;
            for p in 0..dim {
                for q in 0..dim {
                    if p == q {
                        continue;
                    }
                    let apq = a_cell.get(p, q);
                    if apq == 0.0 {
                        continue;
                    }
                    let rest = (0..dim).find(|&r| r != p && r != q);
                    let sign = |b: usize, axis: usize| if (b >> axis) & 1 == 1 { 1.0 } else { -1.0 };
                    for bu in 0..(1usize << dim) {
                        // Both corners must lie on a common (p, q) face.
                        let same_face = rest.is_none_or(|r| ((bu >> r) & 1) == ((bv >> r) & 1));
                        if !same_face {
                            continue;
                        }
                        let gv = sign(bv, p);
                        let gu = sign(bu, q);
                        let w = apq * gv * gu / (4.0 * h * h * faces);
                        let mut delta = [0i64; 3];
                        for a in 0..dim {
                            delta[a] = ((bu >> a) & 1) as i64 - ((bv >> a) & 1) as i64;
                        }
                        row[layout.slot(delta)] += w;
                    }
                }
            }
        }
    });

    let boundary_values: Vec<f64> = (0..layout.len())
        .into_par_iter()
        .map(|k| {
            let idx = layout.index(k);
            if !layout.is_boundary(idx) {
                return 0.0;
            }
            let p = layout.point(&grid, idx);
            bc.value(&p, idx[dim - 1] == 0)
        })
        .collect();

    let op = DiscreteOperator {
        grid,
        layout,
        stencil,
        boundary_values,
        symmetric: field.is_symmetric(),
        bottom_vanishes: bc.has_vanishing_bottom(),
    };
    let mut rhs = vec![0.0; layout.len()];
    op.apply_interior(&op.boundary_values, &mut rhs);
    rhs.par_iter_mut().for_each(|v| *v = -*v);
    Ok((op, rhs))
}

/// Solves `K u = rhs` for the interior values and attaches the boundary data.
pub fn solve(op: &DiscreteOperator, rhs: &[f64], settings: &SolverSettings) -> Result<DiscreteSolution> {
    let n = op.layout.len();
    if rhs.len() != n {
        return Err(Error::InvalidParameter(format!("rhs has {} entries for {n} nodes", rhs.len())));
    }
    let s = op.layout.stencil_size();
    let center = op.layout.slot([0, 0, 0]);
    let mut x = vec![0.0; n];
    let outcome = if op.symmetric {
        let inv_diag: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|k| {
                if op.layout.is_boundary(op.layout.index(k)) {
                    0.0
                } else {
                    1.0 / op.stencil[k * s + center]
                }
            })
            .collect();
        krylov::pcg(|a, b| op.apply_interior(a, b), &inv_diag, rhs, &mut x, settings.tol, settings.max_iter)?
    } else {
        krylov::cgls(
            |a, b| op.apply_interior(a, b),
            |a, b| op.apply_interior_t(a, b),
            rhs,
            &mut x,
            settings.tol,
            settings.max_iter,
        )?
    };
    x.par_iter_mut().zip(op.boundary_values.par_iter()).for_each(|(x, b)| *x += b);
    let mut sol = DiscreteSolution::from_nodal(op.grid.clone(), x)?;
    sol.set_solver_outcome(outcome, op.bottom_vanishes);
    Ok(sol)
}

/// Assemble and solve in one call.
pub fn solve_dirichlet(
    field: &CoefficientField,
    grid: &HalfSpaceGrid,
    bc: &BoundaryData,
    settings: &SolverSettings,
) -> Result<DiscreteSolution> {
    let (op, rhs) = assemble(field, grid, bc, settings.face_average)?;
    solve(&op, &rhs, settings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::ConstantMatrix;
    use crate::oracles::profile::{Piece, Profile1D};

    fn grid(d: usize, n: usize) -> HalfSpaceGrid {
        HalfSpaceGrid::with_resolution(d, 1.0, n).unwrap()
    }

    #[test]
    fn identity_gives_five_point_stencil() {
        let g = grid(1, 8);
        let (op, _) = assemble(&CoefficientField::identity(1), &g, &BoundaryData::linear(1.0), FaceAverage::Arithmetic).unwrap();
        let h2 = g.h() * g.h();
        let mut st = op.stencil_at([4, 3, 0]);
        st.sort_by(|a, b| a.0.cmp(&b.0));
        let expect = vec![
            ([-1, 0, 0], -1.0 / h2),
            ([0, -1, 0], -1.0 / h2),
            ([0, 0, 0], 4.0 / h2),
            ([0, 1, 0], -1.0 / h2),
            ([1, 0, 0], -1.0 / h2),
        ];
        let mut expect_sorted = expect.clone();
        expect_sorted.sort_by(|a, b| a.0.cmp(&b.0));
        assert_eq!(st.len(), 5);
        for (got, want) in st.iter().zip(&expect_sorted) {
            assert_eq!(got.0, want.0);
            assert!((got.1 - want.1).abs() < 1e-9 * want.1.abs());
        }
    }

    #[test]
    fn three_d_identity_gives_seven_points_and_cross_terms_nineteen() {
        let g = grid(2, 8);
        let (op, _) = assemble(&CoefficientField::identity(2), &g, &BoundaryData::linear(1.0), FaceAverage::Arithmetic).unwrap();
        assert_eq!(op.stencil_at([4, 4, 3]).len(), 7);
        let a = ConstantMatrix::from_rows(&[&[2.0, 0.2, 0.1], &[0.2, 2.0, 0.3], &[0.1, 0.3, 2.0]]);
        let f = CoefficientField::constant(a, 4.0).unwrap();
        let (op, _) = assemble(&f, &g, &BoundaryData::linear(1.0), FaceAverage::Arithmetic).unwrap();
        assert_eq!(op.stencil_at([4, 4, 3]).len(), 19);
    }

    #[test]
    fn constant_rows_sum_to_zero_and_affine_is_exact() {
        let a = ConstantMatrix::from_rows(&[&[1.5, 0.4], &[0.4, 1.0]]);
        let f = CoefficientField::constant(a, 3.0).unwrap();
        let g = grid(1, 16);
        let bc = BoundaryData::from_fn(|p| 0.3 * p.x[0] + 1.7 * p.t - 0.2);
        let (op, _) = assemble(&f, &g, &bc, FaceAverage::Arithmetic).unwrap();
        let layout = Layout::new(&g);
        let ones = vec![1.0; layout.len()];
        let affine: Vec<f64> = (0..layout.len())
            .map(|k| {
                let p = layout.point(&g, layout.index(k));
                0.3 * p.x[0] + 1.7 * p.t - 0.2
            })
            .collect();
        let scale = 1.0 / (g.h() * g.h());
        assert!(op.residual(&ones).iter().all(|v| v.abs() < 1e-12 * scale));
        assert!(op.residual(&affine).iter().all(|v| v.abs() < 1e-11 * scale));
    }

    #[test]
    fn piecewise_profile_stencil_matches_hand_scheme() {
        // a = 1 below t = 1/2, 2 above; node at height 1/2 sits on the jump.
        let prof = Profile1D::new(vec![0.5], vec![Piece::Constant(1.0), Piece::Constant(2.0)]).unwrap();
        let f = CoefficientField::diagonal_profile(1, prof, 2.0).unwrap();
        let g = grid(1, 8);
        let (op, _) = assemble(&f, &g, &BoundaryData::linear(1.0), FaceAverage::Arithmetic).unwrap();
        let h2 = g.h() * g.h();
        // Vertical flux: a below = 1, above = 2; lateral edges average the two
        // adjacent cells: (1 + 2)/2.
        let st = op.stencil_at([8, 4, 0]);
        let get = |d: [i64; 3]| st.iter().find(|e| e.0 == d).map(|e| e.1).unwrap_or(0.0);
        assert!((get([0, -1, 0]) + 1.0 / h2).abs() < 1e-9);
        assert!((get([0, 1, 0]) + 2.0 / h2).abs() < 1e-9);
        assert!((get([-1, 0, 0]) + 1.5 / h2).abs() < 1e-9);
        assert!((get([1, 0, 0]) + 1.5 / h2).abs() < 1e-9);
        assert!((get([0, 0, 0]) - 6.0 / h2).abs() < 1e-9);
    }

    #[test]
    fn linear_data_is_reproduced() {
        let g = grid(1, 16);
        let settings = SolverSettings { tol: 1e-15, ..Default::default() };
        let sol = solve_dirichlet(&CoefficientField::identity(1), &g, &BoundaryData::from_fn(|p| p.t), &settings).unwrap();
        let layout = Layout::new(&g);
        for k in 0..layout.len() {
            let p = layout.point(&g, layout.index(k));
            assert!((sol.values()[k] - p.t).abs() < 1e-13);
        }
    }

    #[test]
    fn nonsymmetric_constant_field_uses_normal_equations() {
        let a = ConstantMatrix::from_rows(&[&[1.0, 0.3], &[-0.3, 1.0]]);
        let f = CoefficientField::constant(a, 2.0).unwrap();
        let g = grid(1, 8);
        let bc = BoundaryData::from_fn(|p| 0.5 * p.x[0] + p.t);
        let (op, rhs) = assemble(&f, &g, &bc, FaceAverage::Arithmetic).unwrap();
        assert!(!op.is_symmetric());
        let sol = solve(&op, &rhs, &SolverSettings { tol: 1e-12, ..Default::default() }).unwrap();
        let layout = Layout::new(&g);
        for k in 0..layout.len() {
            let p = layout.point(&g, layout.index(k));
            assert!((sol.values()[k] - (0.5 * p.x[0] + p.t)).abs() < 1e-9);
        }
    }

    #[test]
    fn energy_identity_holds() {
        let a = ConstantMatrix::from_rows(&[&[1.5, 0.2], &[0.2, 1.0]]);
        let f = CoefficientField::constant(a, 3.0).unwrap();
        let g = grid(1, 16);
        let bc = BoundaryData::linear(1.0);
        let (op, rhs) = assemble(&f, &g, &bc, FaceAverage::Arithmetic).unwrap();
        let settings = SolverSettings { tol: 1e-12, ..Default::default() };
        let sol = solve(&op, &rhs, &settings).unwrap();
        let u = sol.values();
        let b = op.bilinear(u, u);
        let flux = op.boundary_flux(u);
        let unorm = crate::solver::krylov::norm(u);
        assert!((b - flux).abs() <= 1e-9 * unorm.max(1.0), "{b} vs {flux}");
        assert!(b > 0.0);
    }

    #[test]
    fn maximum_principle_for_positive_data() {
        let g = grid(1, 16);
        let sol = solve_dirichlet(&CoefficientField::identity(1), &g, &BoundaryData::linear(1.0), &SolverSettings::default()).unwrap();
        assert!(sol.min_interior() > 0.0);
    }
}
