//! Multiscale samples on dyadic nets and their Carleson norms.
//!
//! A [`MultiscaleSample`] stores one value per `(x, r)` net sample and stands
//! for the measure `value(x, r) dx dr / r`. The Carleson norm over a base
//! ball is the supremum of `box_integral(Δ) / |Δ|` over net-aligned balls
//! `Δ ⊆ Δ0`; the truncation radius is carried alongside every norm.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{lateral_dist2, surface_ball_measure, DyadicNet, NetLevel, Region};

/// Which density a sample carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Density {
    Beta,
    GammaSq,
    Alpha2Sq,
    TildeAlphaSq,
    SecondDerivative,
    Other,
}

impl fmt::Display for Density {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Density::Beta => "beta",
            Density::GammaSq => "gamma2",
            Density::Alpha2Sq => "alpha2_sq",
            Density::TildeAlphaSq => "tilde_alpha_sq",
            Density::SecondDerivative => "second_derivative",
            Density::Other => "other",
        };
        f.write_str(s)
    }
}

/// One value per net sample.
#[derive(Debug, Clone)]
pub struct MultiscaleSample {
    net: Arc<DyadicNet>,
    values: Vec<f64>,
    label: Density,
}

impl MultiscaleSample {
    /// Values must be finite and nonnegative; `β` values must lie in `[0, 1]`.
    pub fn new(net: Arc<DyadicNet>, values: Vec<f64>, label: Density) -> Result<Self> {
        if values.len() != net.len() {
            return Err(Error::InvalidParameter(format!(
                "{} values for a net of {} samples",
                values.len(),
                net.len()
            )));
        }
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParameter(format!("{label} sample {i} has value {v}")));
            }
            if label == Density::Beta && v > 1.0 {
                return Err(Error::InvalidParameter(format!("beta sample {i} = {v} exceeds 1")));
            }
        }
        Ok(Self { net, values, label })
    }

    pub fn constant(net: Arc<DyadicNet>, value: f64, label: Density) -> Result<Self> {
        let n = net.len();
        Self::new(net, vec![value; n], label)
    }

    /// Evaluates `f` on every sample in parallel.
    pub fn from_fn<F>(net: Arc<DyadicNet>, label: Density, f: F) -> Result<Self>
    where
        F: Fn(&crate::geometry::NetSample) -> Result<f64> + Sync,
    {
        let values = net.samples().par_iter().map(&f).collect::<Result<Vec<f64>>>()?;
        Self::new(net, values, label)
    }

    pub fn net(&self) -> &Arc<DyadicNet> {
        &self.net
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn label(&self) -> Density {
        self.label
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.net.clone(), self.values.iter().map(|v| v * c).collect(), self.label)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

/// Result of a Carleson-norm computation.
#[derive(Debug, Clone, PartialEq)]
pub struct CarlesonNorm {
    pub norm: f64,
    pub argmax: Region,
    /// Smallest radius sampled by the underlying net.
    pub r_min: f64,
    pub candidates: usize,
}

fn check_inside(d: usize, outer: &Region, inner: &Region) -> Result<()> {
    let dist = lateral_dist2(d, outer.center, inner.center).sqrt();
    if dist + inner.radius > outer.radius * (1.0 + 1e-12) + 1e-15 {
        return Err(Error::OutsideBaseBall(format!("{inner} is not inside {outer}")));
    }
    Ok(())
}

/// `Σ value · weight` over samples whose center lies in `Δ` and whose radius
/// is at most the radius of `Δ`.
pub fn box_integral(sample: &MultiscaleSample, ball: &Region) -> Result<f64> {
    let net = sample.net();
    let d = net.d();
    check_inside(d, net.base(), ball)?;
    let r2 = ball.radius * ball.radius;
    let mut total = 0.0;
    for level in net.levels() {
        if level.radius > ball.radius * (1.0 + 1e-12) {
            continue;
        }
        let first = level.first_sample;
        for (i, s) in net.level_samples(level).iter().enumerate() {
            if lateral_dist2(d, s.center, ball.center) < r2 {
                total += sample.values[first + i] * s.weight;
            }
        }
    }
    Ok(total)
}

/// Row prefix sums of `value * weight` on one level's lattice.
struct LevelTable {
    radius: f64,
    spacing: f64,
    len: usize,
    rows: usize,
    /// `prefix[row * (len + 1) + k]` = sum over lattice points `< k` in `row`.
    prefix: Vec<f64>,
}

impl LevelTable {
    fn build(sample: &MultiscaleSample, level: &NetLevel) -> Self {
        let d = sample.net.d();
        let len = level.lattice_len;
        let rows = if d == 2 { len } else { 1 };
        let mut prefix = vec![0.0; rows * (len + 1)];
        let samples = sample.net.samples();
        for row in 0..rows {
            let mut acc = 0.0;
            for k in 0..len {
                if let Some(i) = level.sample_at([k, row]) {
                    acc += sample.values[i] * samples[i].weight;
                }
                prefix[row * (len + 1) + k + 1] = acc;
            }
        }
        Self { radius: level.radius, spacing: level.spacing, len, rows, prefix }
    }

    fn row_sum(&self, row: usize, lo: usize, hi: usize) -> f64 {
        let base = row * (self.len + 1);
        self.prefix[base + hi] - self.prefix[base + lo]
    }

    /// Lattice indices `k` with `|origin + (k + 1/2) spacing - c| < w`.
    fn index_range(&self, origin: f64, c: f64, w: f64) -> (usize, usize) {
        let lo = ((c - w - origin) / self.spacing - 0.5).floor().max(-1.0) as i64 + 1;
        let hi = ((c + w - origin) / self.spacing - 0.5).ceil().min(self.len as f64) as i64;
        let mut lo = lo.clamp(0, self.len as i64) as usize;
        let mut hi = hi.clamp(0, self.len as i64) as usize;
        let coord = |k: usize| origin + (k as f64 + 0.5) * self.spacing;
        while lo < hi && (coord(lo) - c).abs() >= w {
            lo += 1;
        }
        while hi > lo && (coord(hi - 1) - c).abs() >= w {
            hi -= 1;
        }
        (lo, hi)
    }
}

/// Net-aligned candidate balls inside `base`: radii `ρ = r_base 2^-j`
/// down to the finest net radius, centers `c_base + m ρ/2`.
fn candidate_balls(d: usize, base: &Region, finest: f64) -> Vec<Region> {
    let mut out = Vec::new();
    let mut rho = base.radius;
    while rho >= finest * (1.0 - 1e-12) {
        let step = 0.5 * rho;
        let m_max = ((base.radius - rho) / step + 1e-9).floor() as i64;
        let m2_range = if d == 2 { -m_max..=m_max } else { 0..=0 };
        for m2 in m2_range {
            for m1 in -m_max..=m_max {
                let off = [m1 as f64 * step, m2 as f64 * step];
                let dist = (off[0] * off[0] + off[1] * off[1]).sqrt();
                if dist + rho <= base.radius * (1.0 + 1e-12) {
                    let c = [base.center[0] + off[0], if d == 2 { base.center[1] + off[1] } else { 0.0 }];
                    out.push(Region::surface_ball(c, rho));
                }
            }
        }
        rho *= 0.5;
    }
    out
}

fn ball_integral(tables: &[LevelTable], origin: [f64; 2], d: usize, ball: &Region) -> f64 {
    let mut total = 0.0;
    let r = ball.radius;
    for t in tables {
        if t.radius > r * (1.0 + 1e-12) {
            continue;
        }
        if d == 1 {
            let (lo, hi) = t.index_range(origin[0], ball.center[0], r);
            total += t.row_sum(0, lo, hi);
        } else {
            let (rlo, rhi) = t.index_range(origin[1], ball.center[1], r);
            for row in rlo..rhi.min(t.rows) {
                let y = origin[1] + (row as f64 + 0.5) * t.spacing - ball.center[1];
                let w2 = r * r - y * y;
                if w2 <= 0.0 {
                    continue;
                }
                let (lo, hi) = t.index_range(origin[0], ball.center[0], w2.sqrt());
                // index_range uses |dx| < w; recheck the disc condition exactly at the ends.
                let coord = |k: usize| origin[0] + (k as f64 + 0.5) * t.spacing - ball.center[0];
                let (mut lo, mut hi) = (lo, hi);
                while lo < hi && coord(lo).powi(2) + y * y >= r * r {
                    lo += 1;
                }
                while hi > lo && coord(hi - 1).powi(2) + y * y >= r * r {
                    hi -= 1;
                }
                total += t.row_sum(row, lo, hi);
            }
        }
    }
    total
}

/// Carleson norm of `sample` restricted to the net's base ball.
pub fn carleson_norm(sample: &MultiscaleSample) -> Result<CarlesonNorm> {
    let base = *sample.net().base();
    carleson_norm_within(sample, &base)
}

/// Carleson norm over the balls `Δ ⊆ base`, with `base` inside the net's
/// base ball.
pub fn carleson_norm_within(sample: &MultiscaleSample, base: &Region) -> Result<CarlesonNorm> {
    let net = sample.net();
    let d = net.d();
    if net.is_empty() {
        return Err(Error::InvalidNet("empty net".into()));
    }
    let base = Region::surface_ball(base.center, base.radius);
    check_inside(d, net.base(), &base)?;
    let tables: Vec<LevelTable> = net.levels().iter().map(|l| LevelTable::build(sample, l)).collect();
    let net_base = net.base();
    let origin = [net_base.center[0] - net_base.radius, net_base.center[1] - net_base.radius];
    let candidates = candidate_balls(d, &base, net.finest_radius());
    let ratios: Vec<f64> = candidates
        .par_iter()
        .map(|ball| ball_integral(&tables, origin, d, ball) / surface_ball_measure(d, ball.radius))
        .collect();

    let mut best = 0usize;
    for i in 1..candidates.len() {
        if ratios[i] > ratios[best] || (ratios[i] == ratios[best] && tie_break(&candidates[i], &candidates[best])) {
            best = i;
        }
    }
    Ok(CarlesonNorm {
        norm: ratios[best],
        argmax: candidates[best],
        r_min: net.finest_radius(),
        candidates: candidates.len(),
    })
}

/// Lexicographically smallest center first, then largest radius.
fn tie_break(a: &Region, b: &Region) -> bool {
    match a.center[0].total_cmp(&b.center[0]).then(a.center[1].total_cmp(&b.center[1])) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => a.radius > b.radius,
    }
}

/// Both sides of the discrete Hardy inequality
/// `Σ_m (mean_{j<=m} a_j)^q <= (q/(q-1))^q Σ_m a_m^q`.
pub fn hardy_check(a: &[f64], q: f64) -> Result<(f64, f64)> {
    if !(q > 1.0) {
        return Err(Error::InvalidParameter(format!("Hardy exponent q = {q} must exceed 1")));
    }
    if let Some(v) = a.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("negative or non-finite entry {v}")));
    }
    let mut partial = 0.0;
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    for (m, &v) in a.iter().enumerate() {
        partial += v;
        lhs += (partial / (m + 1) as f64).powf(q);
        rhs += v.powf(q);
    }
    Ok((lhs, (q / (q - 1.0)).powf(q) * rhs))
}
