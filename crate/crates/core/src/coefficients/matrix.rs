use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::DMatrix;

/// A real `(d+1) x (d+1)` matrix, `d+1 <= 3`, stored inline.
#[derive(Clone, Copy, PartialEq)]
pub struct ConstantMatrix {
    n: usize,
    a: [[f64; 3]; 3],
}

impl ConstantMatrix {
    pub fn zeros(n: usize) -> Self {
        assert!((1..=3).contains(&n), "matrix dimension {n} not in 1..=3");
        Self { n, a: [[0.0; 3]; 3] }
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0)
    }

    pub fn scaled_identity(n: usize, s: f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.a[i][i] = s;
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n, "row {i} has wrong length");
            m.a[i][..n].copy_from_slice(row);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i][j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i][j] = v;
    }

    pub fn transpose(&self) -> Self {
        let mut m = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                m.a[i][j] = self.a[j][i];
            }
        }
        m
    }

    pub fn frobenius_sq(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += self.a[i][j] * self.a[i][j];
            }
        }
        s
    }

    pub fn frobenius(&self) -> f64 {
        self.frobenius_sq().sqrt()
    }

    pub fn dist_sq(&self, other: &Self) -> f64 {
        (*self - *other).frobenius_sq()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| (self.a[i][j] - self.a[j][i]).abs() <= tol))
    }

    pub fn mul_vec(&self, v: &[f64]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for i in 0..self.n {
            for j in 0..self.n {
                out[i] += self.a[i][j] * v[j];
            }
        }
        out
    }

    fn to_dmatrix(self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.a[i][j])
    }

    /// Smallest eigenvalue of the symmetric part, `min <Aξ, ξ> / |ξ|²`.
    pub fn coercivity(&self) -> f64 {
        let m = self.to_dmatrix();
        let sym = (&m + m.transpose()) * 0.5;
        sym.symmetric_eigenvalues().min()
    }

    /// Operator norm, `sup <Aξ, ζ> / (|ξ| |ζ|)`.
    pub fn operator_norm(&self) -> f64 {
        let m = self.to_dmatrix();
        m.singular_values().max()
    }

    /// Checks `<Aξ,ζ> <= μ0 |ξ||ζ|` and `<Aξ,ξ> >= |ξ|² / μ0`.
    pub fn check_elliptic(&self, mu0: f64) -> Result<(), String> {
        let tol = 1e-12 * mu0;
        let lo = self.coercivity();
        if lo < 1.0 / mu0 - tol {
            return Err(format!("coercivity {lo:.6} < 1/μ0 = {:.6}", 1.0 / mu0));
        }
        let hi = self.operator_norm();
        if hi > mu0 + tol {
            return Err(format!("operator norm {hi:.6} > μ0 = {mu0:.6}"));
        }
        Ok(())
    }
}

impl Add for ConstantMatrix {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        debug_assert_eq!(self.n, rhs.n);
        for i in 0..3 {
            for j in 0..3 {
                self.a[i][j] += rhs.a[i][j];
            }
        }
        self
    }
}

impl Sub for ConstantMatrix {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        debug_assert_eq!(self.n, rhs.n);
        for i in 0..3 {
            for j in 0..3 {
                self.a[i][j] -= rhs.a[i][j];
            }
        }
        self
    }
}

impl Mul<f64> for ConstantMatrix {
    type Output = Self;
    fn mul(mut self, s: f64) -> Self {
        for row in &mut self.a {
            for v in row {
                *v *= s;
            }
        }
        self
    }
}

impl fmt::Debug for ConstantMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[f64]> = (0..self.n).map(|i| &self.a[i][..self.n]).collect();
        f.debug_tuple("ConstantMatrix").field(&rows).finish()
    }
}
