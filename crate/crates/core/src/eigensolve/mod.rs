//! Hermitian eigensolvers.
//!
//! * [`eigen_full`]: Householder tridiagonalization followed by implicit-shift
//!   QL, eigenvalues ascending, optional eigenvectors with a residual
//!   certificate.
//! * [`lambda_extreme`]: Lanczos with full reorthogonalization for the extreme
//!   eigenvalues of large sparse (band) matrices.

mod lanczos;
pub mod ql;
mod tridiag;

pub use lanczos::{lambda_extreme, lambda_extreme_with, Extreme, LanczosOptions};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::ensemble::{Entries, HermitianMatrix};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Eigenvectors stored column by column: vector `j` is contiguous.
#[derive(Debug, Clone, PartialEq)]
pub enum Eigenvectors {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Option<Eigenvectors>,
    /// max_j ||X v_j - lambda_j v_j||_2; zero when no vectors were computed.
    pub residual_bound: f64,
}

impl Spectrum {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn lambda_max(&self) -> f64 {
        *self.eigenvalues.last().expect("non-empty spectrum")
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// max |lambda| = operator norm.
    pub fn spectral_radius(&self) -> f64 {
        self.lambda_min().abs().max(self.lambda_max().abs())
    }

    /// Eigenvector `j` as complex coordinates.
    pub fn vector(&self, j: usize) -> Option<Vec<Complex64>> {
        let n = self.n();
        match self.eigenvectors.as_ref()? {
            Eigenvectors::Real(v) => Some(v[j * n..(j + 1) * n].iter().map(|&x| Complex64::new(x, 0.0)).collect()),
            Eigenvectors::Complex(v) => Some(v[j * n..(j + 1) * n].to_vec()),
        }
    }

    /// |v_j|^2 coordinatewise for eigenvector `j`.
    pub fn vector_abs2(&self, j: usize) -> Option<Vec<f64>> {
        let n = self.n();
        match self.eigenvectors.as_ref()? {
            Eigenvectors::Real(v) => Some(v[j * n..(j + 1) * n].iter().map(|x| x * x).collect()),
            Eigenvectors::Complex(v) => Some(v[j * n..(j + 1) * n].iter().map(|x| x.norm_sqr()).collect()),
        }
    }
}

/// Real symmetric tridiagonal form T = Q* H Q with Q unitary.
#[derive(Debug, Clone)]
pub struct Tridiagonal {
    pub diag: Vec<f64>,
    pub offdiag: Vec<f64>,
    /// Row-major n×n.
    pub q: Vec<Complex64>,
}

pub fn tridiagonalize(h: &HermitianMatrix) -> Tridiagonal {
    let n = h.n();
    match h.entries() {
        Entries::Real(a) => {
            let red = tridiag::reduce(n, a.clone(), true);
            let q = red.unitary().into_iter().map(|x| Complex64::new(x, 0.0)).collect();
            Tridiagonal {
                diag: red.diag,
                offdiag: red.offdiag,
                q,
            }
        }
        Entries::Complex(a) => {
            let red = tridiag::reduce(n, a.clone(), true);
            let q = red.unitary();
            Tridiagonal {
                diag: red.diag,
                offdiag: red.offdiag,
                q,
            }
        }
    }
}

/// Default residual tolerance: 1e-10 ||H||_F (absolute floor for the zero matrix).
pub fn default_tol(h: &HermitianMatrix) -> f64 {
    1e-10 * h.frobenius_norm().max(f64::MIN_POSITIVE)
}

/// Full spectrum of `h`. With `want_vectors`, eigenvectors are returned with
/// the phase convention "first non-negligible coordinate real positive", and
/// the residual certificate must be at most `tol`.
pub fn eigen_full(h: &HermitianMatrix, want_vectors: bool, tol: f64) -> Result<Spectrum> {
    match h.entries() {
        Entries::Real(a) => eigen_generic(h, a, want_vectors, tol, Eigenvectors::Real),
        Entries::Complex(a) => eigen_generic(h, a, want_vectors, tol, Eigenvectors::Complex),
    }
}

/// Eigenvalues only, ascending.
pub fn eigenvalues(h: &HermitianMatrix) -> Result<Vec<f64>> {
    Ok(eigen_full(h, false, f64::INFINITY)?.eigenvalues)
}

fn eigen_generic<T: Scalar>(
    h: &HermitianMatrix,
    a: &[T],
    want_vectors: bool,
    tol: f64,
    wrap: fn(Vec<T>) -> Eigenvectors,
) -> Result<Spectrum> {
    let n = h.n();
    if n == 0 {
        return Err(Error::invalid("empty matrix"));
    }
    let red = tridiag::reduce(n, a.to_vec(), want_vectors);
    if !want_vectors {
        let mut ev = ql::tql(&red.diag, &red.offdiag, None)?;
        ev.sort_by(f64::total_cmp);
        return Ok(Spectrum {
            eigenvalues: ev,
            eigenvectors: None,
            residual_bound: 0.0,
        });
    }

    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }
    let ev = ql::tql(&red.diag, &red.offdiag, Some(&mut z))?;
    let qd = red.unitary();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| ev[i].total_cmp(&ev[j]).then(i.cmp(&j)));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| ev[i]).collect();

    // V = (QD) Z, stored transposed: vectors[j*n + r] = V[r][order[j]]
    let mut vt = vec![T::zero(); n * n];
    vt.par_chunks_mut(n).enumerate().for_each(|(j, col)| {
        let src = order[j];
        let zc: Vec<f64> = (0..n).map(|i| z[i * n + src]).collect();
        for (r, out) in col.iter_mut().enumerate() {
            let qrow = &qd[r * n..(r + 1) * n];
            *out = qrow.iter().zip(&zc).fold(T::zero(), |acc, (&q, &zi)| acc + q.scale(zi));
        }
    });
    // phase convention
    vt.par_chunks_mut(n).for_each(|col| {
        let max = col.iter().map(|x| x.abs()).fold(0.0, f64::max);
        if let Some(first) = col.iter().find(|x| x.abs() > 1e-12 * max) {
            let ph = first.phase().conj();
            for x in col.iter_mut() {
                *x = *x * ph;
            }
        }
    });

    let residual_bound = residuals(h, a, &eigenvalues, &vt)
        .into_iter()
        .fold(0.0, f64::max);
    if residual_bound > tol {
        return Err(Error::NoConvergence {
            context: format!("eigenvector residual certificate exceeds tolerance {tol:e}"),
            estimate: eigenvalues[n - 1],
            residual: residual_bound,
        });
    }
    Ok(Spectrum {
        eigenvalues,
        eigenvectors: Some(wrap(vt)),
        residual_bound,
    })
}

/// ||H v_j - lambda_j v_j||_2 for every column, using only allowed positions.
fn residuals<T: Scalar>(h: &HermitianMatrix, a: &[T], eigenvalues: &[f64], vt: &[T]) -> Vec<f64> {
    let n = h.n();
    let rows: Vec<Vec<usize>> = (0..n).map(|i| h.pattern().row(i)).collect();
    vt.par_chunks(n)
        .zip(eigenvalues.par_iter())
        .map(|(v, &lambda)| {
            let mut s = 0.0;
            for (i, cols) in rows.iter().enumerate() {
                let mut acc = -v[i].scale(lambda);
                for &j in cols {
                    acc += a[i * n + j] * v[j];
                }
                s += acc.abs2();
            }
            s.sqrt()
        })
        .collect()
}
