use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::ql;
use crate::ensemble::{Entries, HermitianMatrix};
use crate::error::{Error, Result};
use crate::scalar::{axpy, dotc, norm2, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extreme {
    Max,
    Min,
    /// max(|lambda_min|, |lambda_max|)
    SpectralRadius,
}

#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    /// Absolute residual tolerance ||H y - theta y||.
    pub tol: f64,
    /// Maximum Krylov dimension (capped at n).
    pub max_iter: usize,
}

/// Compressed rows restricted to the allowed positions of the pattern.
struct SparseRows<T> {
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<T>,
}

impl<T: Scalar> SparseRows<T> {
    fn new(h: &HermitianMatrix, a: &[T]) -> Self {
        let n = h.n();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        offsets.push(0);
        for i in 0..n {
            for j in h.pattern().row(i) {
                let v = a[i * n + j];
                if v != T::zero() {
                    cols.push(j);
                    vals.push(v);
                }
            }
            offsets.push(cols.len());
        }
        SparseRows { offsets, cols, vals }
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let (lo, hi) = (self.offsets[i], self.offsets[i + 1]);
            let mut acc = T::zero();
            for (&j, &v) in self.cols[lo..hi].iter().zip(&self.vals[lo..hi]) {
                acc += v * x[j];
            }
            *yi = acc;
        }
    }
}

/// Extreme eigenvalue by Lanczos with full reorthogonalization. Returns
/// (value, residual) where residual = ||H y - theta y|| for the normalized
/// Ritz vector y (the larger of the two for `SpectralRadius`).
pub fn lambda_extreme<R: Rng + ?Sized>(
    h: &HermitianMatrix,
    which: Extreme,
    tol: f64,
    max_iter: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    lambda_extreme_with(h, which, LanczosOptions { tol, max_iter }, rng)
}

pub fn lambda_extreme_with<R: Rng + ?Sized>(
    h: &HermitianMatrix,
    which: Extreme,
    opts: LanczosOptions,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if h.n() == 0 {
        return Err(Error::invalid("empty matrix"));
    }
    match h.entries() {
        Entries::Real(a) => run(h, &SparseRows::new(h, a), which, opts, rng),
        Entries::Complex(a) => run(h, &SparseRows::new(h, a), which, opts, rng),
    }
}

fn random_unit<T: Scalar, R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<T> {
    let v: Vec<T> = (0..n)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = if T::IS_COMPLEX { rng.sample(StandardNormal) } else { 0.0 };
            T::from_c64(Complex64::new(re, im))
        })
        .collect();
    let nv = norm2(&v);
    v.into_iter().map(|x| x.scale(1.0 / nv)).collect()
}

/// Two passes of classical Gram–Schmidt against the basis.
fn reorthogonalize<T: Scalar>(basis: &[Vec<T>], w: &mut [T]) {
    for _ in 0..2 {
        for v in basis {
            let c = dotc(v, w);
            axpy(-c, v, w);
        }
    }
}

struct Ritz {
    theta: f64,
    index: usize,
    residual_estimate: f64,
}

/// Extreme Ritz values of T_m and their residual estimates beta * |s_m|.
fn ritz_extremes(alpha: &[f64], beta: &[f64], next_beta: f64) -> Result<(Ritz, Ritz)> {
    let m = alpha.len();
    let mut last = vec![0.0; m];
    last[m - 1] = 1.0;
    let theta = ql::tql(alpha, &beta[..m - 1], Some(&mut last))?;
    let (mut imin, mut imax) = (0, 0);
    for i in 0..m {
        if theta[i] < theta[imin] {
            imin = i;
        }
        if theta[i] > theta[imax] {
            imax = i;
        }
    }
    let mk = |i: usize| Ritz {
        theta: theta[i],
        index: i,
        residual_estimate: next_beta * last[i].abs(),
    };
    Ok((mk(imin), mk(imax)))
}

fn run<T: Scalar, R: Rng + ?Sized>(
    h: &HermitianMatrix,
    op: &SparseRows<T>,
    which: Extreme,
    opts: LanczosOptions,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let n = h.n();
    let max_dim = opts.max_iter.clamp(1, n);
    let scale = h.frobenius_norm().max(f64::MIN_POSITIVE);
    let breakdown = 1e-12 * scale;

    let mut basis: Vec<Vec<T>> = vec![random_unit(n, rng)];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut restarted = false;
    let mut w = vec![T::zero(); n];

    loop {
        let j = basis.len() - 1;
        op.apply(&basis[j], &mut w);
        let a = dotc(&basis[j], &w).re();
        alpha.push(a);
        axpy(T::from_re(-a), &basis[j], &mut w);
        if j > 0 {
            axpy(T::from_re(-beta[j - 1]), &basis[j - 1], &mut w);
        }
        reorthogonalize(&basis, &mut w);
        let b = norm2(&w);

        let exhausted = basis.len() >= max_dim;
        let broke = b <= breakdown;
        if broke && !restarted && basis.len() < n {
            // invariant subspace found: continue from a fresh orthogonal direction
            restarted = true;
            let mut fresh: Vec<T> = random_unit(n, rng);
            reorthogonalize(&basis, &mut fresh);
            let nf = norm2(&fresh);
            if nf > 1e-8 {
                beta.push(0.0);
                basis.push(fresh.into_iter().map(|x| x.scale(1.0 / nf)).collect());
                continue;
            }
        }

        let (lo, hi) = ritz_extremes(&alpha, &beta_with(&beta, b), b)?;
        let (_, est_res) = combine(which, &lo, &hi);
        let done = est_res <= 0.5 * opts.tol || broke || exhausted;
        if done {
            let (value, residual) = certify(op, &basis, &alpha, &beta, which, &lo, &hi)?;
            if residual <= opts.tol {
                return Ok((value, residual));
            }
            if broke || exhausted {
                return Err(Error::NoConvergence {
                    context: format!("Lanczos after {} steps", basis.len()),
                    estimate: value,
                    residual,
                });
            }
        }
        beta.push(b);
        basis.push(w.iter().map(|x| x.scale(1.0 / b)).collect());
    }
}

fn beta_with(beta: &[f64], b: f64) -> Vec<f64> {
    let mut v = beta.to_vec();
    v.push(b);
    v
}

fn combine(which: Extreme, lo: &Ritz, hi: &Ritz) -> (f64, f64) {
    match which {
        Extreme::Max => (hi.theta, hi.residual_estimate),
        Extreme::Min => (lo.theta, lo.residual_estimate),
        Extreme::SpectralRadius => (
            lo.theta.abs().max(hi.theta.abs()),
            lo.residual_estimate.max(hi.residual_estimate),
        ),
    }
}

/// Forms Ritz vectors explicitly and measures the true residuals.
fn certify<T: Scalar>(
    op: &SparseRows<T>,
    basis: &[Vec<T>],
    alpha: &[f64],
    beta: &[f64],
    which: Extreme,
    lo: &Ritz,
    hi: &Ritz,
) -> Result<(f64, f64)> {
    let m = alpha.len();
    let n = basis[0].len();
    let mut s = vec![0.0; m * m];
    for i in 0..m {
        s[i * m + i] = 1.0;
    }
    let theta = ql::tql(alpha, &beta[..m - 1], Some(&mut s))?;
    let residual_of = |r: &Ritz| -> f64 {
        debug_assert_eq!(theta[r.index], r.theta);
        let mut y = vec![T::zero(); n];
        for (k, v) in basis.iter().enumerate() {
            axpy(T::from_re(s[k * m + r.index]), v, &mut y);
        }
        let ny = norm2(&y);
        let mut hy = vec![T::zero(); n];
        op.apply(&y, &mut hy);
        axpy(T::from_re(-r.theta), &y, &mut hy);
        norm2(&hy) / ny
    };
    Ok(match which {
        Extreme::Max => (hi.theta, residual_of(hi)),
        Extreme::Min => (lo.theta, residual_of(lo)),
        Extreme::SpectralRadius => (
            lo.theta.abs().max(hi.theta.abs()),
            residual_of(lo).max(residual_of(hi)),
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigensolve::eigenvalues;
    use crate::ensemble::{build_pattern, sample_matrix, EntryLaw, PatternKind};
    use crate::rng;
    use std::f64::consts::PI;

    #[test]
    fn diagonal_extremes() {
        let h = HermitianMatrix::diagonal(&[3.0, 1.0, -2.0]);
        let mut r = rng::stream(1, 0);
        assert!((lambda_extreme(&h, Extreme::Max, 1e-10, 10, &mut r).unwrap().0 - 3.0).abs() < 1e-12);
        assert!((lambda_extreme(&h, Extreme::Min, 1e-10, 10, &mut r).unwrap().0 + 2.0).abs() < 1e-12);
        assert!((lambda_extreme(&h, Extreme::SpectralRadius, 1e-10, 10, &mut r).unwrap().0 - 3.0).abs() < 1e-12);
        let h2 = HermitianMatrix::diagonal(&[-5.0, 1.0]);
        assert!((lambda_extreme(&h2, Extreme::SpectralRadius, 1e-10, 10, &mut r).unwrap().0 - 5.0).abs() < 1e-12);
    }

    #[test]
    fn toeplitz_top_eigenvalue() {
        let n = 1000;
        let mut a = vec![0.0; n * n];
        for i in 0..n - 1 {
            a[i * n + i + 1] = 1.0;
            a[(i + 1) * n + i] = 1.0;
        }
        let h = HermitianMatrix::from_real_dense(n, a).unwrap();
        let mut r = rng::stream(2, 0);
        let (v, res) = lambda_extreme(&h, Extreme::Max, 1e-9, n, &mut r).unwrap();
        assert!((v - 2.0 * (PI / 1001.0).cos()).abs() <= 1e-8, "{v} res {res}");
    }

    #[test]
    fn agrees_with_full_solver() {
        for seed in 0..5 {
            let p = build_pattern(PatternKind::Full, 64, 64).unwrap();
            let h = sample_matrix(&EntryLaw::gaussian_complex(), &p, seed);
            let ev = eigenvalues(&h).unwrap();
            let mut r = rng::stream(seed, 1);
            let (v, _) = lambda_extreme(&h, Extreme::Max, 1e-9, 64, &mut r).unwrap();
            assert!((v - ev[63]).abs() < 1e-6);
        }
    }

    #[test]
    fn degenerate_diagonal_restarts() {
        let p = build_pattern(PatternKind::CyclicBand, 200, 1).unwrap();
        let h = sample_matrix(&EntryLaw::rademacher(), &p, 3);
        let mut r = rng::stream(3, 1);
        let (v, _) = lambda_extreme(&h, Extreme::Max, 1e-10, 200, &mut r).unwrap();
        assert_eq!(v.round(), 1.0);
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn band_matrix_radius() {
        let p = build_pattern(PatternKind::CyclicBand, 300, 31).unwrap();
        let h = sample_matrix(&EntryLaw::gaussian_real(), &p, 4);
        let ev = eigenvalues(&h).unwrap();
        let exact = ev[0].abs().max(ev[299].abs());
        let mut r = rng::stream(4, 1);
        let (v, res) = lambda_extreme(&h, Extreme::SpectralRadius, 1e-8, 300, &mut r).unwrap();
        assert!(res <= 1e-8);
        assert!((v - exact).abs() < 1e-7, "{v} vs {exact}");
    }

    #[test]
    fn reports_non_convergence() {
        let p = build_pattern(PatternKind::Full, 50, 50).unwrap();
        let h = sample_matrix(&EntryLaw::gaussian_real(), &p, 4);
        let mut r = rng::stream(4, 1);
        match lambda_extreme(&h, Extreme::Max, 1e-14, 3, &mut r) {
            Err(Error::NoConvergence { estimate, residual, .. }) => {
                assert!(estimate.is_finite() && residual > 1e-14)
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
