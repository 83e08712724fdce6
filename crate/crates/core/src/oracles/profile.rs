//! Piecewise scalar profiles `a(t)` on `(0, ∞)` with exact piecewise
//! integration of `1/a`, `1/a²` and `|a'|² t`.

use crate::error::{Error, Result};
use crate::quadrature::gl20;

/// Monotone smoothstep used on transition pieces; both have zero end slopes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    /// `3σ² - 2σ³`
    Cubic,
    /// `6σ⁵ - 15σ⁴ + 10σ³`, also zero second derivative at the ends.
    Quintic,
}

impl Shape {
    pub fn value(self, s: f64) -> f64 {
        match self {
            Shape::Cubic => s * s * (3.0 - 2.0 * s),
            Shape::Quintic => s * s * s * (s * (6.0 * s - 15.0) + 10.0),
        }
    }

    pub fn slope(self, s: f64) -> f64 {
        match self {
            Shape::Cubic => 6.0 * s * (1.0 - s),
            Shape::Quintic => 30.0 * s * s * (1.0 - s) * (1.0 - s),
        }
    }

    /// `∫_0^1 slope(σ)² dσ`.
    pub fn slope_energy(self) -> f64 {
        match self {
            Shape::Cubic => 6.0 / 5.0,
            Shape::Quintic => 10.0 / 7.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Piece {
    Constant(f64),
    Transition { from: f64, to: f64, shape: Shape },
}

/// A piecewise profile; piece `i` covers `[start_i, start_{i+1})` and the
/// last piece extends to infinity.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile1D {
    starts: Vec<f64>,
    pieces: Vec<Piece>,
    /// `∫_0^{start_i} 1/a`.
    cum_b: Vec<f64>,
    /// Smoothing width parameter carried for reporting.
    smoothing: f64,
}

impl Profile1D {
    /// `breakpoints` are the interior piece boundaries (strictly increasing,
    /// positive); there must be exactly one more piece than breakpoints.
    pub fn new(breakpoints: Vec<f64>, pieces: Vec<Piece>) -> Result<Self> {
        if pieces.len() != breakpoints.len() + 1 {
            return Err(Error::InvalidParameter(format!(
                "{} pieces for {} breakpoints",
                pieces.len(),
                breakpoints.len()
            )));
        }
        if breakpoints.iter().any(|&b| !(b > 0.0) || !b.is_finite())
            || breakpoints.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::InvalidParameter("breakpoints must be positive and increasing".into()));
        }
        if !matches!(pieces.last(), Some(Piece::Constant(_))) {
            return Err(Error::InvalidParameter("the unbounded last piece must be constant".into()));
        }
        for p in &pieces {
            let ok = match *p {
                Piece::Constant(v) => v > 0.0 && v.is_finite(),
                Piece::Transition { from, to, .. } => from > 0.0 && to > 0.0 && from.is_finite() && to.is_finite(),
            };
            if !ok {
                return Err(Error::InvalidParameter(format!("non-positive profile piece {p:?}")));
            }
        }
        let mut starts = Vec::with_capacity(pieces.len());
        starts.push(0.0);
        starts.extend_from_slice(&breakpoints);
        let mut profile = Self { starts, pieces, cum_b: Vec::new(), smoothing: 0.0 };
        let mut cum = Vec::with_capacity(profile.pieces.len());
        let mut acc = 0.0;
        for i in 0..profile.pieces.len() {
            cum.push(acc);
            if i + 1 < profile.pieces.len() {
                let (a, b) = (profile.starts[i], profile.starts[i + 1]);
                acc += profile.piece_integral(i, a, b, |v| 1.0 / v);
            }
        }
        profile.cum_b = cum;
        Ok(profile)
    }

    pub fn constant(value: f64) -> Result<Self> {
        Self::new(Vec::new(), vec![Piece::Constant(value)])
    }

    pub fn with_smoothing(mut self, c0: f64) -> Self {
        self.smoothing = c0;
        self
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.starts[1..]
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    fn piece_index(&self, t: f64) -> usize {
        self.starts.partition_point(|&s| s <= t).saturating_sub(1)
    }

    fn piece_end(&self, i: usize) -> f64 {
        self.starts.get(i + 1).copied().unwrap_or(f64::INFINITY)
    }

    fn eval_piece(&self, i: usize, t: f64) -> f64 {
        match self.pieces[i] {
            Piece::Constant(v) => v,
            Piece::Transition { from, to, shape } => {
                let (a, b) = (self.starts[i], self.piece_end(i));
                let s = ((t - a) / (b - a)).clamp(0.0, 1.0);
                from + (to - from) * shape.value(s)
            }
        }
    }

    fn slope_piece(&self, i: usize, t: f64) -> f64 {
        match self.pieces[i] {
            Piece::Constant(_) => 0.0,
            Piece::Transition { from, to, shape } => {
                let (a, b) = (self.starts[i], self.piece_end(i));
                let s = ((t - a) / (b - a)).clamp(0.0, 1.0);
                (to - from) * shape.slope(s) / (b - a)
            }
        }
    }

    /// `a(t)`.
    pub fn value(&self, t: f64) -> f64 {
        self.eval_piece(self.piece_index(t), t)
    }

    /// `a'(t)` (right derivative at breakpoints).
    pub fn derivative(&self, t: f64) -> f64 {
        self.slope_piece(self.piece_index(t), t)
    }

    /// `(min a, max a)`.
    pub fn range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for p in &self.pieces {
            let (a, b) = match *p {
                Piece::Constant(v) => (v, v),
                Piece::Transition { from, to, .. } => (from.min(to), from.max(to)),
            };
            lo = lo.min(a);
            hi = hi.max(b);
        }
        (lo, hi)
    }

    /// Smallest `μ0` with `1/μ0 <= a <= μ0`.
    pub fn ellipticity(&self) -> f64 {
        let (lo, hi) = self.range();
        hi.max(1.0 / lo)
    }

    fn piece_integral<F: Fn(f64) -> f64>(&self, i: usize, t0: f64, t1: f64, f: F) -> f64 {
        if t1 <= t0 {
            return 0.0;
        }
        match self.pieces[i] {
            Piece::Constant(v) => f(v) * (t1 - t0),
            Piece::Transition { .. } => {
                gl20().integrate_composite(t0, t1, 4, |t| f(self.eval_piece(i, t)))
            }
        }
    }

    /// `∫_{t0}^{t1} f(a(t)) dt`, piece by piece.
    pub fn integrate<F: Fn(f64) -> f64>(&self, t0: f64, t1: f64, f: F) -> f64 {
        if t1 <= t0 {
            return 0.0;
        }
        let first = self.piece_index(t0);
        let mut total = 0.0;
        for i in first..self.pieces.len() {
            let a = self.starts[i].max(t0);
            let b = self.piece_end(i).min(t1);
            total += self.piece_integral(i, a, b, &f);
            if self.piece_end(i) >= t1 {
                break;
            }
        }
        total
    }

    /// `∫_{t0}^{t1} w(t, a(t), a'(t)) dt`, piece by piece.
    pub fn integrate_with<F: Fn(f64, f64, f64) -> f64>(&self, t0: f64, t1: f64, w: F) -> f64 {
        if t1 <= t0 {
            return 0.0;
        }
        let first = self.piece_index(t0);
        let mut total = 0.0;
        for i in first..self.pieces.len() {
            let a = self.starts[i].max(t0);
            let b = self.piece_end(i).min(t1);
            if b > a {
                total += gl20().integrate_composite(a, b, 4, |t| w(t, self.eval_piece(i, t), self.slope_piece(i, t)));
            }
            if self.piece_end(i) >= t1 {
                break;
            }
        }
        total
    }

    /// `g(t) = ∫_0^t 1/a`, the Green profile with pole at infinity.
    pub fn g(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let i = self.piece_index(t);
        self.cum_b[i] + self.piece_integral(i, self.starts[i], t, |v| 1.0 / v)
    }

    /// `∫_{t0}^{t1} 1/a`.
    pub fn integral_b(&self, t0: f64, t1: f64) -> f64 {
        self.g(t1) - self.g(t0)
    }

    /// `∫_{t0}^{t1} 1/a²`.
    pub fn integral_b2(&self, t0: f64, t1: f64) -> f64 {
        self.integrate(t0, t1, |v| 1.0 / (v * v))
    }

    /// `∫_{t0}^{t1} |a'(t)|² t dt`.
    pub fn integral_slope_sq_t(&self, t0: f64, t1: f64) -> f64 {
        let first = self.piece_index(t0);
        let mut total = 0.0;
        for i in first..self.pieces.len() {
            if matches!(self.pieces[i], Piece::Transition { .. }) {
                let a = self.starts[i].max(t0);
                let b = self.piece_end(i).min(t1);
                if b > a {
                    total += gl20().integrate_composite(a, b, 4, |t| self.slope_piece(i, t).powi(2) * t);
                }
            }
            if self.piece_end(i) >= t1 {
                break;
            }
        }
        total
    }

    /// `sup |a'|` over `[t0, t1]`; exact because each smoothstep slope is
    /// unimodal with its peak at the middle of the piece.
    pub fn sup_abs_derivative(&self, t0: f64, t1: f64) -> f64 {
        let first = self.piece_index(t0);
        let mut sup: f64 = 0.0;
        for i in first..self.pieces.len() {
            if let Piece::Transition { .. } = self.pieces[i] {
                let (a, b) = (self.starts[i], self.piece_end(i));
                let lo = a.max(t0);
                let hi = b.min(t1);
                if hi >= lo {
                    let peak = (0.5 * (a + b)).clamp(lo, hi);
                    sup = sup.max(self.slope_piece(i, peak).abs());
                }
            }
            if self.piece_end(i) > t1 {
                break;
            }
        }
        sup
    }
}
