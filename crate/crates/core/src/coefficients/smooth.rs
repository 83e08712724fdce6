//! Seeded smooth coefficient fields satisfying the classical DKP condition.
//!
//! `A(x, t) = b·Id + s·P(x, t)` with
//! `P = Σ_k M_k Π_i cos(2π 2^k x_i / L + θ_{k,i}) ψ(2^k t / L)`,
//! where each `M_k` is a random symmetric matrix of unit Frobenius norm and
//! `ψ(σ) = exp(-log2(2σ)² / (2w²))` is a bump in `log t` centered at
//! `t = L 2^{-k-1}`. Every mode oscillates laterally on the scale of its
//! height, so `|∇A| t` stays bounded and the oscillation numbers are spread
//! evenly over `K` dyadic scales.

use std::f64::consts::{LN_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ConstantMatrix;
use crate::error::{Error, Result};
use crate::geometry::Point;

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothDkpParams {
    pub d: usize,
    /// Diagonal of the background matrix `b·Id`.
    pub base: f64,
    pub mu0: f64,
    /// Number of dyadic modes `K`.
    pub levels: u32,
    /// Lateral period and height scale `L` of the coarsest mode.
    pub length: f64,
    /// Width `w` of the bump in units of `log2 t`.
    pub width: f64,
    /// Amplitude `s` multiplying the unit perturbation.
    pub amplitude: f64,
    pub seed: u64,
}

impl SmoothDkpParams {
    pub fn new(d: usize, seed: u64) -> Self {
        Self { d, base: 2.0, mu0: 4.0, levels: 5, length: 1.0, width: 0.5, amplitude: 0.5, seed }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Mode {
    level: u32,
    matrix: ConstantMatrix,
    phase: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothDkp {
    params: SmoothDkpParams,
    modes: Vec<Mode>,
    /// `sup_t Σ_k ψ(2^k t / L)`, bounding the operator norm of `P`.
    envelope: f64,
}

impl SmoothDkp {
    /// Fails when `b ± s·sup|P|` cannot be certified inside `[1/μ0, μ0]`.
    pub fn new(params: SmoothDkpParams) -> Result<Self> {
        let p = &params;
        if p.d != 1 && p.d != 2 {
            return Err(Error::InvalidParameter(format!("boundary dimension {}", p.d)));
        }
        if !(p.length > 0.0 && p.width > 0.0 && p.amplitude >= 0.0 && p.levels >= 1) {
            return Err(Error::InvalidParameter(format!("smooth field parameters {p:?}")));
        }
        let n = p.d + 1;
        let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
        let mut modes = Vec::with_capacity(p.levels as usize);
        for level in 0..p.levels {
            let mut m = ConstantMatrix::zeros(n);
            for i in 0..n {
                for j in 0..=i {
                    let v: f64 = rng.gen_range(-1.0..1.0);
                    m.set(i, j, v);
                    m.set(j, i, v);
                }
            }
            let norm = m.frobenius();
            let matrix = m * (1.0 / norm);
            let phase = [rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..2.0 * PI)];
            modes.push(Mode { level, matrix, phase });
        }
        let envelope = envelope_sup(p.levels, p.width);
        let field = Self { params, modes, envelope };
        field.check_ellipticity()?;
        Ok(field)
    }

    fn check_ellipticity(&self) -> Result<()> {
        let p = &self.params;
        let spread = p.amplitude * self.envelope;
        if p.base - spread < 1.0 / p.mu0 || p.base + spread > p.mu0 {
            return Err(Error::Ellipticity {
                location: "smooth field".into(),
                detail: format!(
                    "background {} with perturbation up to {spread:.4} leaves [1/μ0, μ0] for μ0 = {}",
                    p.base, p.mu0
                ),
            });
        }
        Ok(())
    }

    /// Same modes with a different amplitude.
    pub fn with_amplitude(&self, amplitude: f64) -> Result<Self> {
        let mut out = self.clone();
        out.params.amplitude = amplitude;
        out.check_ellipticity()?;
        Ok(out)
    }

    /// Amplitude 1 without the ellipticity certificate; only its
    /// oscillation numbers are meaningful.
    pub(crate) fn unit_perturbation(&self) -> Self {
        let mut out = self.clone();
        out.params.amplitude = 1.0;
        out
    }

    /// Largest amplitude that keeps the ellipticity certificate.
    pub fn max_amplitude(&self) -> f64 {
        let p = &self.params;
        (p.base - 1.0 / p.mu0).min(p.mu0 - p.base) / self.envelope
    }

    pub fn params(&self) -> &SmoothDkpParams {
        &self.params
    }

    pub fn d(&self) -> usize {
        self.params.d
    }

    fn bump(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        let l = (2.0 * s).log2();
        (-l * l / (2.0 * self.params.width * self.params.width)).exp()
    }

    fn bump_slope(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        let w2 = self.params.width * self.params.width;
        let l = (2.0 * s).log2();
        -self.bump(s) * l / (w2 * s * LN_2)
    }

    /// Scalar factors of one mode: value and its partial derivatives
    /// `(∂x1, ∂x2, ∂t)`.
    fn mode_factors(&self, m: &Mode, p: &Point) -> (f64, [f64; 3]) {
        let d = self.params.d;
        let freq = 2.0 * PI * (1u64 << m.level) as f64 / self.params.length;
        let scale = (1u64 << m.level) as f64 / self.params.length;
        let s = scale * p.t;
        let psi = self.bump(s);
        let dpsi = self.bump_slope(s) * scale;
        let mut c = [1.0; 2];
        let mut dc = [0.0; 2];
        for i in 0..d {
            let arg = freq * p.x[i] + m.phase[i];
            c[i] = arg.cos();
            dc[i] = -freq * arg.sin();
        }
        let lateral = c[0] * c[1];
        let value = lateral * psi;
        let grad = [dc[0] * c[1] * psi, c[0] * dc[1] * psi, lateral * dpsi];
        (value, grad)
    }

    /// `A(x, t)`.
    pub fn value(&self, p: &Point) -> ConstantMatrix {
        let n = self.params.d + 1;
        let mut a = ConstantMatrix::scaled_identity(n, self.params.base);
        for m in &self.modes {
            let (v, _) = self.mode_factors(m, p);
            a = a + m.matrix * (self.params.amplitude * v);
        }
        a
    }

    /// `|∇A(x, t)|` as the Frobenius norm of the third-order tensor.
    pub fn gradient_norm(&self, p: &Point) -> f64 {
        let d = self.params.d;
        let n = d + 1;
        let mut partials = [ConstantMatrix::zeros(n); 3];
        for m in &self.modes {
            let (_, g) = self.mode_factors(m, p);
            for (axis, part) in partials.iter_mut().enumerate() {
                *part = *part + m.matrix * g[axis];
            }
        }
        let axes: &[usize] = if d == 2 { &[0, 1, 2] } else { &[0, 2] };
        let sq: f64 = axes.iter().map(|&a| partials[a].frobenius_sq()).sum();
        self.params.amplitude * sq.sqrt()
    }

    /// Finest lateral wavelength `L 2^{1-K}`.
    pub fn finest_wavelength(&self) -> f64 {
        self.params.length / (1u64 << (self.params.levels - 1)) as f64
    }
}

/// `sup_{t>0} Σ_{k<K} ψ(2^k t)`, scanned finely in `log2 t` then padded.
fn envelope_sup(levels: u32, width: f64) -> f64 {
    let bump = |s: f64| {
        let l = (2.0 * s).log2();
        (-l * l / (2.0 * width * width)).exp()
    };
    let mut sup: f64 = 0.0;
    let steps = 4000;
    let (lo, hi) = (-(levels as f64) - 4.0, 4.0);
    for i in 0..=steps {
        let u = lo + (hi - lo) * i as f64 / steps as f64;
        let t = u.exp2();
        let s: f64 = (0..levels).map(|k| bump((1u64 << k) as f64 * t)).sum();
        sup = sup.max(s);
    }
    sup * 1.001
}
