//! Householder reduction of a dense Hermitian matrix to real symmetric
//! tridiagonal form.
//!
//! Complex input is reduced with complex reflectors directly; the complex
//! subdiagonal that results is made real afterwards with a diagonal unitary
//! scaling. Only the lower triangle is stored and updated. Each step updates the
//! trailing block and, in the same pass over a row, accumulates that row's
//! contribution to the next step's matrix-vector product, so the trailing
//! block is streamed once per column.

use rayon::prelude::*;

use crate::scalar::{dotc, Scalar};

pub(crate) struct Reduction<T: Scalar> {
    pub diag: Vec<f64>,
    pub offdiag: Vec<f64>,
    /// Reflectors (u_k, beta_k) with H_k = I - beta u u*, u supported on k+1..n.
    reflectors: Vec<(Vec<T>, f64)>,
    /// Unit phases making the subdiagonal real: T_real = D* T D.
    phases: Vec<T>,
    n: usize,
}

/// Reflector for column data `x` (entries k+1..n of column k).
/// Returns (u, beta, new subdiagonal value), or None when x is already e1-aligned.
fn reflector<T: Scalar>(x: &[T]) -> Option<(Vec<T>, f64, T)> {
    let tail: f64 = x[1..].iter().map(|v| v.abs2()).sum();
    if tail == 0.0 {
        return None;
    }
    let alpha = (x[0].abs2() + tail).sqrt();
    let theta = x[0].phase();
    let mut u = x.to_vec();
    u[0] += theta.scale(alpha);
    let unorm2 = u[0].abs2() + tail;
    Some((u, 2.0 / unorm2, -theta.scale(alpha)))
}

/// Rows per block in the trailing-matrix pass; partial matvec sums are merged
/// in block order, so results do not depend on the thread count.
const BLOCK: usize = 32;

/// Rank-2 update A -= u q* + q u* on indices >= off.
struct Update<'a, T> {
    off: usize,
    u: &'a [T],
    q: &'a [T],
    uc: &'a [T],
    qc: &'a [T],
}

/// One pass over the lower triangle of rows/columns s..n: applies `upd` to
/// entries (i, j) with s <= j <= i, then returns A[s.., s..] v when `v` is given.
fn pass<T: Scalar>(a: &mut [T], n: usize, s: usize, upd: Option<&Update<T>>, v: Option<&[T]>) -> Option<Vec<T>> {
    let parts: Vec<Vec<T>> = a[s * n..]
        .par_chunks_mut(BLOCK * n)
        .enumerate()
        .map(|(b, block)| {
            let first = s + b * BLOCK;
            let rows = block.len() / n;
            let mut part = match v {
                Some(_) => vec![T::zero(); first + rows - s],
                None => Vec::new(),
            };
            for r in 0..rows {
                let i = first + r;
                let row = &mut block[r * n + s..r * n + i + 1];
                if let Some(up) = upd {
                    let o = s - up.off;
                    let (ui, qi) = (up.u[i - up.off], up.q[i - up.off]);
                    for ((x, &qcj), &ucj) in row.iter_mut().zip(&up.qc[o..]).zip(&up.uc[o..]) {
                        *x -= ui * qcj + qi * ucj;
                    }
                }
                if let Some(v) = v {
                    let ii = i - s;
                    let vi = v[ii];
                    let mut acc = row[ii] * vi;
                    for (j, &x) in row[..ii].iter().enumerate() {
                        acc += x * v[j];
                        part[j] += x.conj() * vi;
                    }
                    part[ii] += acc;
                }
            }
            part
        })
        .collect();
    v.map(|v| {
        let mut p = vec![T::zero(); v.len()];
        for part in parts {
            for (pi, x) in p.iter_mut().zip(part) {
                *pi += x;
            }
        }
        p
    })
}

/// Reflector for column `k` (entries k+1..n) of the lower triangle, with the
/// subdiagonal entry it produces.
fn column_reflector<T: Scalar>(a: &[T], n: usize, k: usize, sub: &mut [T]) -> Option<(Vec<T>, f64)> {
    let x: Vec<T> = (k + 1..n).map(|i| a[i * n + k]).collect();
    match reflector(&x) {
        None => {
            sub[k] = x[0];
            None
        }
        Some((u, beta, s)) => {
            sub[k] = s;
            Some((u, beta))
        }
    }
}

/// Only the lower triangle of `a` is read or written.
pub(crate) fn reduce<T: Scalar>(n: usize, mut a: Vec<T>, keep_reflectors: bool) -> Reduction<T> {
    assert_eq!(a.len(), n * n);
    let mut sub: Vec<T> = vec![T::zero(); n.saturating_sub(1)];
    let mut reflectors = Vec::new();

    // reflector for column k with p = beta A22 u, carried over from the previous pass
    let mut pending: Option<(Vec<T>, f64, Vec<T>)> = None;

    for k in 0..n.saturating_sub(2) {
        let off = k + 1;
        let (u, beta, p) = match pending.take() {
            Some(x) => x,
            None => match column_reflector(&a, n, k, &mut sub) {
                None => {
                    if keep_reflectors {
                        reflectors.push((Vec::new(), 0.0));
                    }
                    continue;
                }
                Some((u, beta)) => {
                    let p: Vec<T> = pass(&mut a, n, off, None, Some(&u)).unwrap().iter().map(|x| x.scale(beta)).collect();
                    (u, beta, p)
                }
            },
        };
        // q = p - kappa u, kappa = beta/2 * u* p (real)
        let kappa = 0.5 * beta * dotc(&u, &p).re();
        let q: Vec<T> = p.iter().zip(&u).map(|(&pi, &ui)| pi - ui.scale(kappa)).collect();
        let uc: Vec<T> = u.iter().map(|v| v.conj()).collect();
        let qc: Vec<T> = q.iter().map(|v| v.conj()).collect();
        let upd = Update {
            off,
            u: &u,
            q: &q,
            uc: &uc,
            qc: &qc,
        };

        // column `off` first: it determines the next reflector
        for i in off..n {
            a[i * n + off] -= u[i - off] * qc[0] + q[i - off] * uc[0];
        }
        let next = if k + 1 < n - 2 { column_reflector(&a, n, off, &mut sub) } else { None };

        let next_p = pass(&mut a, n, off + 1, Some(&upd), next.as_ref().map(|(u2, _)| u2.as_slice()));
        if let (Some((u2, b2)), Some(p2)) = (next, next_p) {
            let p2: Vec<T> = p2.iter().map(|v| v.scale(b2)).collect();
            pending = Some((u2, b2, p2));
        }
        if keep_reflectors {
            reflectors.push((u, beta));
        }
    }

    if n >= 2 {
        sub[n - 2] = a[(n - 1) * n + n - 2];
    }
    let diag: Vec<f64> = (0..n).map(|i| a[i * n + i].re()).collect();

    let mut phases = vec![T::one(); n];
    let mut offdiag = vec![0.0; n.saturating_sub(1)];
    for k in 0..n.saturating_sub(1) {
        offdiag[k] = sub[k].abs();
        phases[k + 1] = phases[k] * sub[k].phase();
    }
    Reduction {
        diag,
        offdiag,
        reflectors,
        phases,
        n,
    }
}

impl<T: Scalar> Reduction<T> {
    /// Dense Q·D (row-major), so that (QD)* H (QD) is the real tridiagonal.
    pub fn unitary(&self) -> Vec<T> {
        let n = self.n;
        let mut q = vec![T::zero(); n * n];
        for i in 0..n {
            q[i * n + i] = T::one();
        }
        for (k, (u, beta)) in self.reflectors.iter().enumerate().rev() {
            if u.is_empty() {
                continue;
            }
            let off = k + 1;
            // w = u* Q[off.., off..]
            let mut w = vec![T::zero(); n - off];
            for (r, &ur) in u.iter().enumerate() {
                let row = &q[(off + r) * n + off..(off + r) * n + n];
                let c = ur.conj();
                for (wj, &x) in w.iter_mut().zip(row) {
                    *wj += c * x;
                }
            }
            let beta = *beta;
            q[off * n..]
                .par_chunks_mut(n)
                .zip(u.par_iter())
                .for_each(|(row, &ur)| {
                    let f = ur.scale(beta);
                    for (x, &wj) in row[off..].iter_mut().zip(&w) {
                        *x -= f * wj;
                    }
                });
        }
        for row in q.chunks_mut(n) {
            for (x, &d) in row.iter_mut().zip(&self.phases) {
                *x = *x * d;
            }
        }
        q
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use rand::Rng;

    fn check<T: Scalar>(n: usize, a: Vec<T>) {
        let red = reduce(n, a.clone(), true);
        let q = red.unitary();
        // Q* A Q == T
        let fro: f64 = a.iter().map(|x| x.abs2()).sum::<f64>().sqrt();
        let mut aq = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                let mut s = T::zero();
                for l in 0..n {
                    s += a[i * n + l] * q[l * n + j];
                }
                aq[i * n + j] = s;
            }
        }
        let mut err = 0.0;
        let mut orth = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let mut s = T::zero();
                let mut g = T::zero();
                for l in 0..n {
                    s += q[l * n + i].conj() * aq[l * n + j];
                    g += q[l * n + i].conj() * q[l * n + j];
                }
                let t = if i == j {
                    red.diag[i]
                } else if i == j + 1 {
                    red.offdiag[j]
                } else if j == i + 1 {
                    red.offdiag[i]
                } else {
                    0.0
                };
                err += (s - T::from_re(t)).abs2();
                let id = if i == j { 1.0 } else { 0.0 };
                orth = orth.max((g - T::from_re(id)).abs());
            }
        }
        assert!(err.sqrt() <= 1e-12 * fro.max(1.0), "reconstruction error {}", err.sqrt());
        assert!(orth < 1e-13, "orthogonality {orth}");
        assert!(red.offdiag.iter().all(|&e| e >= 0.0));
    }

    fn random_hermitian(n: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = crate::rng::stream(seed, 0);
        let mut a = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            a[i * n + i] = Complex64::new(rng.gen_range(-1.0..1.0), 0.0);
            for j in (i + 1)..n {
                let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                a[i * n + j] = z;
                a[j * n + i] = z.conj();
            }
        }
        a
    }

    #[test]
    fn random_complex_reconstructs() {
        for n in [1, 2, 3, 8, 17] {
            check(n, random_hermitian(n, n as u64));
        }
    }

    #[test]
    fn random_real_reconstructs() {
        for n in [3, 8, 20] {
            let a: Vec<f64> = random_hermitian(n, 7).iter().map(|z| z.re).collect();
            let sym: Vec<f64> = (0..n * n)
                .map(|p| {
                    let (i, j) = (p / n, p % n);
                    if i <= j {
                        a[i * n + j]
                    } else {
                        a[j * n + i]
                    }
                })
                .collect();
            check(n, sym);
        }
    }

    #[test]
    fn tridiagonal_input_is_preserved() {
        let n = 6;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = i as f64;
            if i + 1 < n {
                a[i * n + i + 1] = 1.0 + i as f64;
                a[(i + 1) * n + i] = 1.0 + i as f64;
            }
        }
        let red = reduce(n, a.clone(), true);
        assert_eq!(red.diag, (0..n).map(|i| i as f64).collect::<Vec<_>>());
        assert_eq!(red.offdiag, (0..n - 1).map(|i| 1.0 + i as f64).collect::<Vec<_>>());
        let q = red.unitary();
        for i in 0..n {
            for j in 0..n {
                assert_eq!(q[i * n + j], if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn sparse_columns_are_handled() {
        // block structure forces skipped reflections mid-way
        let n = 7;
        let mut a = vec![Complex64::new(0.0, 0.0); n * n];
        let mut set = |i: usize, j: usize, z: Complex64| {
            a[i * n + j] = z;
            a[j * n + i] = z.conj();
        };
        set(0, 0, Complex64::new(1.0, 0.0));
        set(1, 3, Complex64::new(0.5, -0.25));
        set(2, 4, Complex64::new(0.0, 1.0));
        set(5, 6, Complex64::new(2.0, 1.0));
        set(3, 3, Complex64::new(-1.0, 0.0));
        check(n, a);
    }
}
