//! Preconditioned conjugate gradients and CGLS on a masked full-grid vector.
//!
//! Reductions are summed over fixed-size chunks in a fixed order, so
//! results do not depend on the thread count.

use rayon::prelude::*;

use crate::error::{Error, Result};

const CHUNK: usize = 4096;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let partial: Vec<f64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .collect();
    partial.iter().sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    y.par_chunks_mut(CHUNK).zip(x.par_chunks(CHUNK)).for_each(|(ys, xs)| {
        for (y, x) in ys.iter_mut().zip(xs) {
            *y += alpha * x;
        }
    });
}

/// `p = z + beta * p`
fn xpby(p: &mut [f64], z: &[f64], beta: f64) {
    p.par_chunks_mut(CHUNK).zip(z.par_chunks(CHUNK)).for_each(|(ps, zs)| {
        for (p, z) in ps.iter_mut().zip(zs) {
            *p = z + beta * *p;
        }
    });
}

#[derive(Debug, Clone, PartialEq)]
pub struct KrylovOutcome {
    pub iterations: usize,
    pub relative_residual: f64,
    pub history: Vec<f64>,
}

/// Jacobi-preconditioned CG for an SPD operator. `inv_diag` is zero on
/// masked (Dirichlet) entries, which keeps the iterates zero there.
pub(crate) fn pcg<A>(apply: A, inv_diag: &[f64], b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<KrylovOutcome>
where
    A: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(KrylovOutcome { iterations: 0, relative_residual: 0.0, history: vec![0.0] });
    }
    let mut r = vec![0.0; n];
    apply(x, &mut r);
    r.par_iter_mut().zip(b.par_iter()).for_each(|(r, b)| *r = b - *r);
    let mut z: Vec<f64> = r.iter().zip(inv_diag).map(|(r, m)| r * m).collect();
    let mut p = z.clone();
    let mut q = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut history = vec![norm(&r) / b_norm];
    for it in 1..=max_iter {
        apply(&p, &mut q);
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            return Err(Error::SolverFailure {
                iterations: it,
                final_residual: *history.last().unwrap(),
                history,
            });
        }
        let alpha = rz / pq;
        axpy(x, alpha, &p);
        axpy(&mut r, -alpha, &q);
        let rel = norm(&r) / b_norm;
        history.push(rel);
        if rel <= tol {
            return Ok(KrylovOutcome { iterations: it, relative_residual: rel, history });
        }
        z.par_iter_mut()
            .zip(r.par_iter().zip(inv_diag.par_iter()))
            .for_each(|(z, (r, m))| *z = r * m);
        let rz_new = dot(&r, &z);
        xpby(&mut p, &z, rz_new / rz);
        rz = rz_new;
    }
    Err(Error::SolverFailure { iterations: max_iter, final_residual: *history.last().unwrap(), history })
}

/// CGLS on the normal equations `KᵀK x = Kᵀ b`, monitoring `‖b - Kx‖`.
pub(crate) fn cgls<A, T>(apply: A, apply_t: T, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<KrylovOutcome>
where
    A: Fn(&[f64], &mut [f64]),
    T: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(KrylovOutcome { iterations: 0, relative_residual: 0.0, history: vec![0.0] });
    }
    let mut r = vec![0.0; n];
    apply(x, &mut r);
    r.par_iter_mut().zip(b.par_iter()).for_each(|(r, b)| *r = b - *r);
    let mut s = vec![0.0; n];
    apply_t(&r, &mut s);
    let mut p = s.clone();
    let mut q = vec![0.0; n];
    let mut gamma = dot(&s, &s);
    let mut history = vec![norm(&r) / b_norm];
    for it in 1..=max_iter {
        apply(&p, &mut q);
        let qq = dot(&q, &q);
        if !(qq > 0.0) {
            return Err(Error::SolverFailure { iterations: it, final_residual: *history.last().unwrap(), history });
        }
        let alpha = gamma / qq;
        axpy(x, alpha, &p);
        axpy(&mut r, -alpha, &q);
        let rel = norm(&r) / b_norm;
        history.push(rel);
        if rel <= tol {
            return Ok(KrylovOutcome { iterations: it, relative_residual: rel, history });
        }
        apply_t(&r, &mut s);
        let gamma_new = dot(&s, &s);
        xpby(&mut p, &s, gamma_new / gamma);
        gamma = gamma_new;
    }
    Err(Error::SolverFailure { iterations: max_iter, final_residual: *history.last().unwrap(), history })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(x: &[f64], y: &mut [f64]) {
        let n = x.len();
        for i in 0..n {
            let mut v = 2.0 * x[i];
            if i > 0 {
                v -= x[i - 1];
            }
            if i + 1 < n {
                v -= x[i + 1];
            }
            y[i] = v;
        }
    }

    #[test]
    fn pcg_solves_tridiagonal() {
        let n = 50;
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut x = vec![0.0; n];
        let out = pcg(tridiag, &vec![0.5; n], &b, &mut x, 1e-12, 200).unwrap();
        let mut y = vec![0.0; n];
        tridiag(&x, &mut y);
        let err: f64 = y.iter().zip(&b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10 && out.iterations <= n + 1);
    }

    #[test]
    fn cgls_solves_nonsymmetric() {
        let n = 30;
        let apply = |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                y[i] = 3.0 * x[i] + if i + 1 < n { x[i + 1] } else { 0.0 };
            }
        };
        let apply_t = |x: &[f64], y: &mut [f64]| {
            for i in 0..n {
                y[i] = 3.0 * x[i] + if i > 0 { x[i - 1] } else { 0.0 };
            }
        };
        let b = vec![1.0; n];
        let mut x = vec![0.0; n];
        cgls(apply, apply_t, &b, &mut x, 1e-12, 500).unwrap();
        let mut y = vec![0.0; n];
        apply(&x, &mut y);
        assert!(y.iter().all(|v| (v - 1.0).abs() < 1e-10));
    }

    #[test]
    fn failure_carries_history() {
        let n = 100;
        let b = vec![1.0; n];
        let mut x = vec![0.0; n];
        match pcg(tridiag, &vec![0.5; n], &b, &mut x, 1e-14, 3) {
            Err(Error::SolverFailure { iterations, history, .. }) => {
                assert_eq!(iterations, 3);
                assert_eq!(history.len(), 4);
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
