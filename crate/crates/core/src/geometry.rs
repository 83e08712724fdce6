//! Discretization of the truncated half-space box `[-R, R]^d x [0, R]`, the
//! regions used by the multiscale functionals, and dyadic nets of
//! `(center, radius)` samples that discretize the measure `dx dr / r`.
//!
//! Regions are realized as sets of grid cells by center membership: a cell
//! belongs to a region when its center does. Cell sets are stored as runs
//! along the first lateral axis, ordered lexicographically by
//! `(t, x2, x1)` index.

use std::f64::consts::{LN_2, PI};
use std::fmt;

use crate::error::{Error, Result};

/// Lebesgue measure of the unit ball in `R^d` for `d ∈ {1, 2}`.
pub fn unit_ball_measure(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => PI,
        _ => panic!("unsupported boundary dimension {d}"),
    }
}

/// Measure of the surface ball `Δ(x, r)` in `R^d`.
pub fn surface_ball_measure(d: usize, r: f64) -> f64 {
    unit_ball_measure(d) * r.powi(d as i32)
}

/// Uniform tensor grid on `[-R, R]^d x [0, R]` with spacing `h`.
///
/// Nodes sit at `(-R + i h, j h)`; cell `(i, j)` is the square (or cube)
/// with lower corner at node `(i, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpaceGrid {
    d: usize,
    half_width: f64,
    h: f64,
    n: usize,
}

impl HalfSpaceGrid {
    /// `half_width / h` must be an integer `>= 8`.
    pub fn new(d: usize, half_width: f64, h: f64) -> Result<Self> {
        if d != 1 && d != 2 {
            return Err(Error::InvalidGrid(format!("boundary dimension {d} not in {{1, 2}}")));
        }
        if !(half_width > 0.0 && h > 0.0) || !half_width.is_finite() || !h.is_finite() {
            return Err(Error::InvalidGrid(format!("R = {half_width}, h = {h}")));
        }
        let ratio = half_width / h;
        let n = ratio.round();
        if (ratio - n).abs() > 1e-9 * ratio || n < 8.0 {
            return Err(Error::InvalidGrid(format!(
                "R/h = {ratio} must be an integer >= 8"
            )));
        }
        Ok(Self { d, half_width, h, n: n as usize })
    }

    /// Grid with `cells_per_height` cells along the vertical axis.
    pub fn with_resolution(d: usize, half_width: f64, cells_per_height: usize) -> Result<Self> {
        Self::new(d, half_width, half_width / cells_per_height as f64)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Number of cells along the vertical axis (`R / h`).
    pub fn layers(&self) -> usize {
        self.n
    }

    /// Cells per lateral axis `(x1, x2)`; the second entry is 1 when `d = 1`.
    pub fn lateral_cells(&self) -> [usize; 2] {
        [2 * self.n, if self.d == 2 { 2 * self.n } else { 1 }]
    }

    /// Node counts along `(x1, x2, t)`; the `x2` count is 1 when `d = 1`.
    pub fn node_dims(&self) -> [usize; 3] {
        [2 * self.n + 1, if self.d == 2 { 2 * self.n + 1 } else { 1 }, self.n + 1]
    }

    /// Cell counts along `(x1, x2, t)`.
    pub fn cell_dims(&self) -> [usize; 3] {
        let [a, b] = self.lateral_cells();
        [a, b, self.n]
    }

    pub fn cell_count(&self) -> usize {
        self.cell_dims().iter().product()
    }

    pub fn node_count(&self) -> usize {
        self.node_dims().iter().product()
    }

    /// Volume of one cell, `h^(d+1)`.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.d as i32 + 1)
    }

    pub fn cell_linear(&self, c: CellIndex) -> usize {
        let [a, b, _] = self.cell_dims();
        c.x1 + a * (c.x2 + b * c.t)
    }

    pub fn cell_from_linear(&self, k: usize) -> CellIndex {
        let [a, b, _] = self.cell_dims();
        CellIndex { t: k / (a * b), x2: (k / a) % b, x1: k % a }
    }

    pub fn node_linear(&self, i1: usize, i2: usize, j: usize) -> usize {
        let [a, b, _] = self.node_dims();
        i1 + a * (i2 + b * j)
    }

    /// Lateral coordinate of node index `i` along any lateral axis.
    pub fn node_coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.h
    }

    /// Height of node layer `j`.
    pub fn node_height(&self, j: usize) -> f64 {
        j as f64 * self.h
    }

    /// Lateral coordinate of the center of cell column `i`.
    pub fn cell_coord(&self, i: usize) -> f64 {
        -self.half_width + (i as f64 + 0.5) * self.h
    }

    /// Height of the center of cell layer `j`.
    pub fn cell_height(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.h
    }

    /// Position `(x1, x2, t)` of a cell center; `x2 = 0` when `d = 1`.
    pub fn cell_center(&self, c: CellIndex) -> Point {
        let x2 = if self.d == 2 { self.cell_coord(c.x2) } else { 0.0 };
        Point::new([self.cell_coord(c.x1), x2], self.cell_height(c.t))
    }

    /// Whether the closure of `region` lies inside the grid box.
    pub fn contains(&self, region: &Region) -> bool {
        let tol = 1e-12 * self.half_width;
        let lateral_ok = (0..self.d)
            .all(|a| region.center[a].abs() + region.radius <= self.half_width + tol);
        let top = match region.kind {
            RegionKind::SurfaceBall => 0.0,
            _ => region.radius,
        };
        lateral_ok && top <= self.half_width + tol
    }

    /// All cells whose centers lie in `region`.
    ///
    /// Fails with [`Error::UnresolvedRegion`] when no cell center falls
    /// inside the region.
    pub fn cells_in(&self, region: &Region) -> Result<CellSet> {
        let set = self.cells_in_unchecked(region);
        if set.is_empty() {
            return Err(Error::UnresolvedRegion(region.to_string()));
        }
        Ok(set)
    }

    fn cells_in_unchecked(&self, region: &Region) -> CellSet {
        let [nx1, nx2, nt] = self.cell_dims();
        let r = region.radius;
        let c = region.center;
        let mut runs = Vec::new();

        let (t_lo, t_hi) = match region.kind {
            RegionKind::SurfaceBall => (0, 1.min(nt)),
            _ => {
                let top = r;
                let hi = (((top / self.h) - 0.5).ceil().max(0.0) as usize + 1).min(nt);
                (0, hi)
            }
        };
        let x2_range = if self.d == 2 {
            let lo = (((c[1] - r + self.half_width) / self.h - 1.5).floor().max(0.0)) as usize;
            let hi = ((((c[1] + r + self.half_width) / self.h) + 1.5).ceil().max(0.0) as usize).min(nx2);
            lo..hi
        } else {
            0..1
        };

        for j in t_lo..t_hi {
            let t = self.cell_height(j);
            let t_ok = match region.kind {
                RegionKind::SurfaceBall => true,
                RegionKind::CarlesonBox => t < r,
                RegionKind::WhitneyRegion => t > 0.5 * r && t <= r,
                RegionKind::PencilBox => t <= r,
            };
            if !t_ok {
                continue;
            }
            let vertical = if region.kind == RegionKind::CarlesonBox { t * t } else { 0.0 };
            for i2 in x2_range.clone() {
                let dx2 = if self.d == 2 { self.cell_coord(i2) - c[1] } else { 0.0 };
                let budget = r * r - vertical - dx2 * dx2;
                if budget <= 0.0 {
                    continue;
                }
                let w = budget.sqrt();
                let lo = (((c[0] - w + self.half_width) / self.h - 1.5).floor().max(0.0)) as usize;
                let hi = ((((c[0] + w + self.half_width) / self.h) + 1.5).ceil().max(0.0) as usize).min(nx1);
                let mut start = None;
                let mut end = 0;
                for i1 in lo..hi {
                    let dx1 = self.cell_coord(i1) - c[0];
                    if dx1 * dx1 + dx2 * dx2 + vertical < r * r {
                        if start.is_none() {
                            start = Some(i1);
                        }
                        end = i1 + 1;
                    }
                }
                if let Some(s) = start {
                    runs.push(CellRun { t: j, x2: i2, x1_start: s, x1_end: end });
                }
            }
        }
        CellSet::new(runs, [nx1, nx2])
    }
}

/// A point `(x, t)` of the closed half-space; `x[1]` is unused when `d = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: [f64; 2],
    pub t: f64,
}

impl Point {
    pub fn new(x: [f64; 2], t: f64) -> Self {
        Self { x, t }
    }

    /// Coordinate along axis `a`, with the vertical axis last (`a = d`).
    pub fn coord(&self, d: usize, a: usize) -> f64 {
        if a == d {
            self.t
        } else {
            self.x[a]
        }
    }
}

/// Index of a cell; field order gives the lexicographic `(t, x2, x1)` order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellIndex {
    pub t: usize,
    pub x2: usize,
    pub x1: usize,
}

/// A maximal run of consecutive cells along the `x1` axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellRun {
    pub t: usize,
    pub x2: usize,
    pub x1_start: usize,
    pub x1_end: usize,
}

/// Cells of a region, stored as ordered runs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellSet {
    runs: Vec<CellRun>,
    lateral: [usize; 2],
    len: usize,
}

impl CellSet {
    fn new(runs: Vec<CellRun>, lateral: [usize; 2]) -> Self {
        let len = runs.iter().map(|r| r.x1_end - r.x1_start).sum();
        Self { runs, lateral, len }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn runs(&self) -> &[CellRun] {
        &self.runs
    }

    pub fn iter(&self) -> impl Iterator<Item = CellIndex> + '_ {
        self.runs
            .iter()
            .flat_map(|r| (r.x1_start..r.x1_end).map(move |x1| CellIndex { t: r.t, x2: r.x2, x1 }))
    }

    /// Linear cell indices in the grid this set was built on.
    pub fn linear(&self) -> impl Iterator<Item = usize> + '_ {
        let [a, b] = self.lateral;
        self.runs.iter().flat_map(move |r| {
            let base = a * (r.x2 + b * r.t);
            (base + r.x1_start)..(base + r.x1_end)
        })
    }

    pub fn contains(&self, c: CellIndex) -> bool {
        self.runs
            .iter()
            .any(|r| r.t == c.t && r.x2 == c.x2 && (r.x1_start..r.x1_end).contains(&c.x1))
    }

    pub fn is_subset_of(&self, other: &CellSet) -> bool {
        self.iter().all(|c| other.contains(c))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegionKind {
    /// `Δ(x, r)`, realized on the grid as the bottom cell layer.
    SurfaceBall,
    /// `T(x, r) = B(x, r) ∩ {t > 0}`.
    CarlesonBox,
    /// `W(x, r) = Δ(x, r) x (r/2, r]`.
    WhitneyRegion,
    /// `Δ(x, r) x (0, r]`.
    PencilBox,
}

/// Which box the multiscale functionals average over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum BoxKind {
    HalfBall,
    #[default]
    Pencil,
}

impl BoxKind {
    pub fn region(self, center: [f64; 2], radius: f64) -> Region {
        match self {
            BoxKind::HalfBall => Region::carleson_box(center, radius),
            BoxKind::Pencil => Region::pencil_box(center, radius),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "halfball" => Some(BoxKind::HalfBall),
            "pencil" => Some(BoxKind::Pencil),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BoxKind::HalfBall => "halfball",
            BoxKind::Pencil => "pencil",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub kind: RegionKind,
    pub center: [f64; 2],
    pub radius: f64,
}

impl Region {
    pub fn new(kind: RegionKind, center: [f64; 2], radius: f64) -> Self {
        assert!(radius > 0.0, "region radius must be positive, got {radius}");
        Self { kind, center, radius }
    }

    pub fn surface_ball(center: [f64; 2], radius: f64) -> Self {
        Self::new(RegionKind::SurfaceBall, center, radius)
    }

    pub fn carleson_box(center: [f64; 2], radius: f64) -> Self {
        Self::new(RegionKind::CarlesonBox, center, radius)
    }

    pub fn whitney(center: [f64; 2], radius: f64) -> Self {
        Self::new(RegionKind::WhitneyRegion, center, radius)
    }

    pub fn pencil_box(center: [f64; 2], radius: f64) -> Self {
        Self::new(RegionKind::PencilBox, center, radius)
    }

    /// Same center and kind, radius scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(self.kind, self.center, self.radius * factor)
    }

    /// Whether the lateral center lies strictly inside `Δ(center, radius)`.
    pub fn lateral_contains(&self, d: usize, x: [f64; 2]) -> bool {
        lateral_dist2(d, self.center, x) < self.radius * self.radius
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.kind {
            RegionKind::SurfaceBall => "Δ",
            RegionKind::CarlesonBox => "T",
            RegionKind::WhitneyRegion => "W",
            RegionKind::PencilBox => "P",
        };
        write!(f, "{name}(({}, {}), {})", self.center[0], self.center[1], self.radius)
    }
}

pub(crate) fn lateral_dist2(d: usize, a: [f64; 2], b: [f64; 2]) -> f64 {
    (0..d).map(|k| (a[k] - b[k]).powi(2)).sum()
}

/// One `(x, r)` sample of a dyadic net with its quadrature weight for `dx dr / r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetSample {
    pub center: [f64; 2],
    pub radius: f64,
    pub weight: f64,
    /// Level `j >= 1`, with `radius = r0 * 2^-j`.
    pub level: usize,
}

/// Samples of one dyadic radius.
///
/// Centers sit on the lattice `x0 - r0 + (k + 1/2) r/2`, `k = 0..m` per
/// lateral axis; only lattice points inside the base ball are kept.
#[derive(Debug, Clone, PartialEq)]
pub struct NetLevel {
    pub level: usize,
    pub radius: f64,
    pub spacing: f64,
    /// Lattice points per lateral axis.
    pub lattice_len: usize,
    pub first_sample: usize,
    pub sample_count: usize,
    /// Sample index for each lattice point (row-major, `k1` fastest), if kept.
    lattice_to_sample: Vec<Option<usize>>,
}

impl NetLevel {
    pub fn sample_at(&self, k: [usize; 2]) -> Option<usize> {
        self.lattice_to_sample[k[0] + self.lattice_len * k[1]]
    }

    /// Lateral coordinate of lattice index `k` along axis `a`.
    pub fn lattice_coord(&self, base: &Region, a: usize, k: usize) -> f64 {
        base.center[a] - base.radius + (k as f64 + 0.5) * self.spacing
    }
}

/// Dyadic `(center, radius)` sampling of `T_{Δ0}` for the measure `dx dr / r`.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadicNet {
    d: usize,
    base: Region,
    r_min: f64,
    levels: Vec<NetLevel>,
    samples: Vec<NetSample>,
}

impl DyadicNet {
    /// Builds levels `j = 1 ..= floor(log2(r0 / r_min))` over the base ball.
    pub fn new(d: usize, base: Region, r_min: f64) -> Result<Self> {
        if d != 1 && d != 2 {
            return Err(Error::InvalidNet(format!("boundary dimension {d}")));
        }
        let r0 = base.radius;
        if !(r_min > 0.0) || r_min >= r0 {
            return Err(Error::InvalidNet(format!("r_min = {r_min} is not below r0 = {r0}")));
        }
        let base = Region::surface_ball(base.center, r0);
        // The top level r0/2 is always kept.
        let mut count = 1usize;
        while r0 * 0.5f64.powi(count as i32 + 1) >= r_min * (1.0 - 1e-12) {
            count += 1;
        }

        let mut levels = Vec::with_capacity(count);
        let mut samples = Vec::new();
        for level in 1..=count {
            let radius = r0 * 0.5f64.powi(level as i32);
            let spacing = 0.5 * radius;
            let lattice_len = 1usize << (level + 2);
            let weight = spacing.powi(d as i32) * LN_2;
            let rows = if d == 2 { lattice_len } else { 1 };
            let first_sample = samples.len();
            let mut lattice_to_sample = Vec::with_capacity(lattice_len * rows);
            for k2 in 0..rows {
                for k1 in 0..lattice_len {
                    let x1 = base.center[0] - r0 + (k1 as f64 + 0.5) * spacing;
                    let x2 = if d == 2 { base.center[1] - r0 + (k2 as f64 + 0.5) * spacing } else { 0.0 };
                    let center = [x1, x2];
                    if base.lateral_contains(d, center) {
                        lattice_to_sample.push(Some(samples.len()));
                        samples.push(NetSample { center, radius, weight, level });
                    } else {
                        lattice_to_sample.push(None);
                    }
                }
            }
            levels.push(NetLevel {
                level,
                radius,
                spacing,
                lattice_len,
                first_sample,
                sample_count: samples.len() - first_sample,
                lattice_to_sample,
            });
        }
        Ok(Self { d, base, r_min, levels, samples })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn base(&self) -> &Region {
        &self.base
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    /// Smallest sampled radius.
    pub fn finest_radius(&self) -> f64 {
        self.levels.last().map_or(self.base.radius, |l| l.radius)
    }

    pub fn levels(&self) -> &[NetLevel] {
        &self.levels
    }

    pub fn samples(&self) -> &[NetSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Samples of one level.
    pub fn level_samples(&self, level: &NetLevel) -> &[NetSample] {
        &self.samples[level.first_sample..level.first_sample + level.sample_count]
    }

    /// Fails when the finest radius is below `8 h`, where `β` is meaningless.
    pub fn check_resolved(&self, grid: &HalfSpaceGrid) -> Result<()> {
        if self.finest_radius() < 8.0 * grid.h() * (1.0 - 1e-12) {
            return Err(Error::InvalidNet(format!(
                "finest radius {} is below 8h = {}",
                self.finest_radius(),
                8.0 * grid.h()
            )));
        }
        Ok(())
    }
}
