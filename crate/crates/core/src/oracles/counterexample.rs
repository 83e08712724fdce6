//! The dyadic block-oscillation family `a_n` and its closed-form quantities:
//! averages of `b_n = 1/a_n`, the pencil-box `β_n(r)`, the Carleson lower
//! bound witness, and the DKP-constant growth.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::geometry::unit_ball_measure;
use crate::oracles::profile::{Piece, Profile1D, Shape};
use crate::quadrature::adaptive;

/// Largest dyadic exponent carrying a strip; `a = 3/2` above `2^100`.
pub const TOP_EXPONENT: i32 = 100;

/// Shape of the smoothing transitions inside each strip.
pub const STRIP_SHAPE: Shape = Shape::Cubic;

/// `a_n` for cutoff index `n` and smoothing width `c0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CounterexampleFamily {
    pub n: u32,
    pub c0: f64,
}

impl CounterexampleFamily {
    pub fn new(n: u32, c0: f64) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidParameter("cutoff index n must be >= 1".into()));
        }
        if !(0.0..=0.125).contains(&c0) {
            return Err(Error::InvalidParameter(format!("smoothing width c0 = {c0} not in [0, 1/8]")));
        }
        Ok(Self { n, c0 })
    }

    /// `2^{-2n}`, below which `a_n = 3/2`.
    pub fn cutoff(&self) -> f64 {
        2f64.powi(-2 * self.n as i32)
    }

    /// `2^{-2n+2}`, from where on `β_n >= C0`.
    pub fn lower_bound_start(&self) -> f64 {
        2f64.powi(-2 * self.n as i32 + 2)
    }

    /// `C0 = (3/4 - 4 c0) / 1000`.
    pub fn beta_floor(&self) -> f64 {
        (0.75 - 4.0 * self.c0) / 1000.0
    }
}

/// Value of `a` on the dyadic block `[2^k, 2^{k+1})` away from strips.
fn block_value(k: i32) -> f64 {
    if k.rem_euclid(2) == 0 {
        1.0
    } else {
        2.0
    }
}

/// Builds `a_n`: `3/2` below `2^{-2n}`, alternating `1` and `2` on dyadic
/// blocks, `3/2` above `2^100`. For `c0 > 0` each strip
/// `S_k = (2^k - c0 2^{k-1}, 2^k + c0 2^{k-1})` holds a flat `3/2` core of
/// width `c0 2^{k-2}` joined to the neighbouring blocks by cubic smoothsteps.
pub fn counterexample_profile(fam: &CounterexampleFamily) -> Result<Profile1D> {
    let lowest = -2 * fam.n as i32;
    let mut breakpoints = Vec::new();
    let mut pieces = vec![Piece::Constant(1.5)];

    for k in lowest..=TOP_EXPONENT {
        let center = 2f64.powi(k);
        let left = if k == lowest { 1.5 } else { block_value(k - 1) };
        let right = if k == TOP_EXPONENT { 1.5 } else { block_value(k) };
        if fam.c0 == 0.0 {
            breakpoints.push(center);
            pieces.push(Piece::Constant(right));
            continue;
        }
        let w = fam.c0 * 2f64.powi(k - 1);
        if left != 1.5 {
            breakpoints.push(center - w);
            pieces.push(Piece::Transition { from: left, to: 1.5, shape: STRIP_SHAPE });
            breakpoints.push(center - 0.25 * w);
            pieces.push(Piece::Constant(1.5));
        }
        if right != 1.5 {
            breakpoints.push(center + 0.25 * w);
            pieces.push(Piece::Transition { from: 1.5, to: right, shape: STRIP_SHAPE });
            breakpoints.push(center + w);
            pieces.push(Piece::Constant(right));
        }
    }
    Ok(Profile1D::new(breakpoints, pieces)?.with_smoothing(fam.c0))
}

/// `(1/r) ∫_0^r b_n`, by the profile's own piecewise integration.
pub fn avg_b(profile: &Profile1D, r: f64) -> f64 {
    profile.integral_b(0.0, r) / r
}

/// The two-case closed form displayed alongside the lower-bound argument,
/// including its `2^{-2n}/(2r)` term. Reported next to [`avg_b`] as a
/// cross-check only; valid for `c0 = 0` and `2^{-2n+2} <= r`.
pub fn avg_b_displayed(fam: &CounterexampleFamily, r: f64) -> f64 {
    let e = r.log2().floor() as i32;
    let tail = fam.cutoff() / (2.0 * r);
    if e.rem_euclid(2) == 0 {
        1.0 + tail - 2f64.powi(e) / (3.0 * r)
    } else {
        0.5 + tail + 2f64.powi(e) / (3.0 * r)
    }
}

/// Pencil-box `β_n(r) = ∫_0^r |b_n - avg|² / ∫_0^r b_n²`; independent of `x`.
pub fn beta_closed(profile: &Profile1D, r: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    if profile.breakpoints().first().is_none_or(|&b| r <= b) {
        return 0.0;
    }
    let m = avg_b(profile, r);
    let num = profile.integrate(0.0, r, |a| (1.0 / a - m).powi(2)).max(0.0);
    let den = profile.integral_b2(0.0, r);
    (num / den).min(1.0)
}

/// `(1 / R0^d) |Δ_{R0}| ∫_{r'}^{R0} β_n(r) dr / r` with
/// `r' = max(r_min, 2^{-2n+2})`: the Carleson ratio of the witness ball.
pub fn counterexample_carleson_lower(
    fam: &CounterexampleFamily,
    profile: &Profile1D,
    d: usize,
    r0: f64,
    r_min: f64,
) -> Result<f64> {
    if !(1.0..2f64.powi(TOP_EXPONENT)).contains(&r0) {
        return Err(Error::InvalidParameter(format!("R0 = {r0} not in [1, 2^100)")));
    }
    if r_min > fam.lower_bound_start() {
        return Err(Error::InvalidParameter(format!(
            "r_min = {r_min} exceeds 2^(-2n+2) = {}",
            fam.lower_bound_start()
        )));
    }
    let lo = r_min.max(fam.lower_bound_start());
    // split at dyadic points, where β_n has kinks
    let mut cuts = vec![lo.ln()];
    let mut k = lo.log2().floor() as i32 + 1;
    while 2f64.powi(k) < r0 {
        cuts.push(2f64.powi(k).ln());
        k += 1;
    }
    cuts.push(r0.ln());
    let integral: f64 = cuts
        .windows(2)
        .map(|w| adaptive(w[0], w[1], 1e-12, |s| beta_closed(profile, s.exp())))
        .sum();
    Ok(unit_ball_measure(d) * integral)
}

/// Carleson constant of `|a'|² t dx dt`, or infinity when `c0 = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DkpConstant {
    Finite(f64),
    Infinite,
}

impl DkpConstant {
    pub fn value(self) -> f64 {
        match self {
            DkpConstant::Finite(v) => v,
            DkpConstant::Infinite => f64::INFINITY,
        }
    }
}

/// Strip constant `κ` of the smoothing shape: an interior strip contributes
/// about `κ / c0` to `∫ |a'|² t dt`.
pub fn strip_kappa() -> f64 {
    4.0 * STRIP_SHAPE.slope_energy() / 3.0
}

/// `sup_r ∫_0^r |a_n'|² t dt = ∫_0^∞ |a_n'|² t dt`, the one-dimensional
/// reduction of the classical DKP constant for `A_n = a_n(t) I`.
pub fn dkp_constant_estimate(fam: &CounterexampleFamily) -> Result<DkpConstant> {
    if fam.c0 == 0.0 {
        return Ok(DkpConstant::Infinite);
    }
    let profile = counterexample_profile(fam)?;
    let top = 2f64.powi(TOP_EXPONENT) * (1.0 + fam.c0);
    Ok(DkpConstant::Finite(profile.integral_slope_sq_t(0.0, top)))
}

/// Level-by-level `β_n(r0 2^{-j})` for `j = 1..=levels`, with the `ln 2`
/// weight per level: the exact radial density of the family.
pub fn beta_levels(profile: &Profile1D, r0: f64, levels: usize) -> Vec<(f64, f64)> {
    (1..=levels)
        .map(|j| {
            let r = r0 * 0.5f64.powi(j as i32);
            (r, beta_closed(profile, r))
        })
        .collect()
}

/// `ln 2 · Σ_j β_n(r0 2^{-j})`: Carleson ratio of the base ball for an
/// x-independent density sampled on dyadic levels.
pub fn radial_level_sum(levels: &[(f64, f64)]) -> f64 {
    LN_2 * levels.iter().map(|(_, b)| b).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fam(n: u32, c0: f64) -> (CounterexampleFamily, Profile1D) {
        let f = CounterexampleFamily::new(n, c0).unwrap();
        let p = counterexample_profile(&f).unwrap();
        (f, p)
    }

    #[test]
    fn block_pattern() {
        let (_, p) = fam(1, 0.0);
        assert_eq!(p.value(0.1), 1.5);
        assert_eq!(p.value(0.3), 1.0);
        assert_eq!(p.value(0.6), 2.0);
        assert_eq!(p.value(1.5), 1.0);
        assert_eq!(p.value(3.0), 2.0);
        assert_eq!(p.value(2f64.powi(100)), 1.5);
        assert_eq!(p.value(2f64.powi(101)), 1.5);
        assert_eq!(p.value(2f64.powi(99) * 1.5), 2.0);
        assert_eq!(p.ellipticity(), 2.0);
    }

    #[test]
    fn smoothed_profile_respects_strip_bounds() {
        let (f, p) = fam(2, 1.0 / 32.0);
        for k in -4..=8 {
            let center = 2f64.powi(k);
            let w = f.c0 * 2f64.powi(k - 1);
            assert_eq!(p.value(center), 1.5);
            assert_eq!(p.value(center + 0.2 * w), 1.5);
            let sup = p.sup_abs_derivative(center - w, center + w);
            assert!(sup <= 100.0 / (f.c0 * center), "k={k}: {sup}");
            assert_eq!(p.value(center + 1.01 * w), block_value(k));
        }
        assert_eq!(p.value(0.5 * f.cutoff()), 1.5);
    }

    #[test]
    fn rejects_wide_strips() {
        assert!(CounterexampleFamily::new(2, 0.2).is_err());
        assert!(CounterexampleFamily::new(0, 0.0).is_err());
    }

    #[test]
    fn averages_of_b() {
        let (_, p) = fam(3, 0.0);
        assert!((avg_b(&p, 1e-3) - 2.0 / 3.0).abs() < 1e-15);
        assert!((avg_b(&p, 1.0) - 2.0 / 3.0).abs() < 1e-14);
        // [1, 2) is an even block, a = 1, so ∫_0^2 b = 2/3 + 1.
        assert!((avg_b(&p, 2.0) - 5.0 / 6.0).abs() < 1e-14);
        // [2, 4) is odd, a = 2: ∫_0^4 b = 5/3 + 1.
        assert!((avg_b(&p, 4.0) - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn displayed_average_differs_by_the_cutoff_term() {
        let (f, p) = fam(3, 0.0);
        for &r in &[2f64.powi(-4), 0.1, 0.37, 1.0, 1.5, 3.0, 40.0] {
            let own = avg_b(&p, r);
            let shown = avg_b_displayed(&f, r);
            assert!((shown - own - f.cutoff() / (2.0 * r)).abs() < 1e-13, "r={r}");
        }
    }

    #[test]
    fn beta_vanishes_below_cutoff_and_is_bounded() {
        let (f, p) = fam(4, 0.0);
        assert_eq!(beta_closed(&p, 0.5 * f.cutoff()), 0.0);
        for j in -10..6 {
            let b = beta_closed(&p, 2f64.powf(j as f64 + 0.3));
            assert!((0.0..=1.0).contains(&b));
        }
    }

    #[test]
    fn beta_at_one_matches_block_sum() {
        // Independent oracle: sum the constant blocks of b directly.
        let n = 6;
        let (f, p) = fam(n, 0.0);
        let mut blocks = vec![(0.0, f.cutoff(), 2.0 / 3.0)];
        for k in (-2 * n as i32)..0 {
            let b = 1.0 / block_value(k);
            blocks.push((2f64.powi(k), 2f64.powi(k + 1), b));
        }
        let total: f64 = blocks.iter().map(|(a, b, v)| (b - a) * v).sum();
        let m = total;
        let num: f64 = blocks.iter().map(|(a, b, v)| (b - a) * (v - m).powi(2)).sum();
        let den: f64 = blocks.iter().map(|(a, b, v)| (b - a) * v * v).sum();
        assert!((beta_closed(&p, 1.0) - num / den).abs() < 1e-14);
    }

    #[test]
    fn beta_floor_holds_on_lower_bound_range() {
        for &c0 in &[0.0, 1.0 / 64.0, 1.0 / 32.0] {
            let (f, p) = fam(5, c0);
            let mut r = f.lower_bound_start();
            while r <= 8.0 {
                assert!(beta_closed(&p, r) >= f.beta_floor(), "c0={c0} r={r}");
                r *= 1.19;
            }
        }
    }

    #[test]
    fn beta_continuous_when_smoothed() {
        let (_, p) = fam(3, 1.0 / 32.0);
        let mut r = 0.05;
        while r < 4.0 {
            let a = beta_closed(&p, r);
            let b = beta_closed(&p, r * (1.0 + 1e-7));
            assert!((a - b).abs() < 1e-5, "jump at r={r}");
            r *= 1.013;
        }
    }

    #[test]
    fn lower_witness_grows_with_n() {
        let values: Vec<f64> = (2..=6)
            .map(|n| {
                let (f, p) = fam(n, 0.0);
                counterexample_carleson_lower(&f, &p, 1, 1.0, f.lower_bound_start()).unwrap()
            })
            .collect();
        for (i, v) in values.iter().enumerate() {
            let n = i as f64 + 2.0;
            assert!(*v >= 2.0 * 0.00075 * (2.0 * n - 2.0) * LN_2);
            let r_prime = 2f64.powf(-2.0 * n + 2.0);
            assert!(*v <= 2.0 * (1.0 / r_prime).ln());
        }
        assert!(values.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn n_one_witness_is_zero_range() {
        let (f, p) = fam(1, 0.0);
        assert_eq!(counterexample_carleson_lower(&f, &p, 1, 1.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn dkp_constant() {
        let f0 = CounterexampleFamily::new(3, 0.0).unwrap();
        assert_eq!(dkp_constant_estimate(&f0).unwrap(), DkpConstant::Infinite);
        let c0 = 1.0 / 32.0;
        let kappa = strip_kappa();
        let v: Vec<f64> = (2..=5)
            .map(|n| dkp_constant_estimate(&CounterexampleFamily::new(n, c0).unwrap()).unwrap().value())
            .collect();
        for (i, val) in v.iter().enumerate() {
            let n = (i + 2) as f64;
            let scale = (2.0 * n + 100.0) / c0 * kappa;
            assert!(*val >= scale / 4.0 && *val <= 4.0 * scale, "n={n}: {val} vs {scale}");
        }
        let step = v[1] - v[0];
        assert!((step / (2.0 * kappa / c0) - 1.0).abs() < 0.05, "step {step}");
    }
}
