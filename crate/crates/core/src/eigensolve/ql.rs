//! Implicit-shift QL iteration for real symmetric tridiagonal matrices.
//!
//! Rotations of one sweep are collected and then applied to every row of the
//! eigenvector matrix in a single pass; rows are independent, so the pass is
//! split across threads without changing the result.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Maximum QL sweeps spent on any single eigenvalue.
pub const MAX_SWEEPS: usize = 50;

/// Eigenvalues (unsorted) of the tridiagonal (diag, offdiag). If `z` is given
/// (row-major n×n, typically the identity), rotations are accumulated into it
/// so that column j becomes the eigenvector of eigenvalue j.
pub fn tql(diag: &[f64], offdiag: &[f64], mut z: Option<&mut [f64]>) -> Result<Vec<f64>> {
    let n = diag.len();
    assert_eq!(offdiag.len(), n.saturating_sub(1));
    let mut d = diag.to_vec();
    let mut e = offdiag.to_vec();
    e.push(0.0);
    let mut rotations: Vec<(usize, f64, f64)> = Vec::new();

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd || e[m] == 0.0 {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_SWEEPS {
                return Err(Error::NoConvergence {
                    context: format!("tridiagonal QL at index {l}"),
                    estimate: d[l],
                    residual: e[l].abs(),
                });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0f64, 1.0f64, 0.0f64);
            let mut underflow = false;
            rotations.clear();
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                rotations.push((i, c, s));
            }
            if let Some(z) = z.as_deref_mut() {
                apply_rotations(z, n, &rotations);
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(d)
}

fn apply_rotations(z: &mut [f64], n: usize, rotations: &[(usize, f64, f64)]) {
    if rotations.is_empty() {
        return;
    }
    // Rows are processed GROUP at a time so the per-row dependency chains
    // through consecutive rotations interleave.
    const GROUP: usize = 16;
    z.par_chunks_mut(n * GROUP).for_each(|block| {
        let rows = block.len() / n;
        if rows == GROUP {
            let mut r: [&mut [f64]; GROUP] = split_rows(block, n);
            for &(i, c, s) in rotations {
                for row in r.iter_mut() {
                    let f = row[i + 1];
                    let zi = row[i];
                    row[i + 1] = s * zi + c * f;
                    row[i] = c * zi - s * f;
                }
            }
        } else {
            for row in block.chunks_mut(n) {
                for &(i, c, s) in rotations {
                    let f = row[i + 1];
                    let zi = row[i];
                    row[i + 1] = s * zi + c * f;
                    row[i] = c * zi - s * f;
                }
            }
        }
    });
}

fn split_rows<const G: usize>(block: &mut [f64], n: usize) -> [&mut [f64]; G] {
    let mut it = block.chunks_mut(n);
    std::array::from_fn(|_| it.next().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn toeplitz_closed_form() {
        let n = 100;
        let mut ev = tql(&vec![0.0; n], &vec![1.0; n - 1], None).unwrap();
        ev.sort_by(f64::total_cmp);
        let mut exact: Vec<f64> = (1..=n).map(|j| 2.0 * (j as f64 * PI / (n as f64 + 1.0)).cos()).collect();
        exact.sort_by(f64::total_cmp);
        let err = ev.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn vectors_diagonalize() {
        let n = 30;
        let diag: Vec<f64> = (0..n).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
        let off: Vec<f64> = (0..n - 1).map(|i| 0.3 + ((i * 3) % 5) as f64).collect();
        let mut z = vec![0.0; n * n];
        for i in 0..n {
            z[i * n + i] = 1.0;
        }
        let ev = tql(&diag, &off, Some(&mut z)).unwrap();
        for j in 0..n {
            // T v = lambda v
            for i in 0..n {
                let mut tv = diag[i] * z[i * n + j];
                if i > 0 {
                    tv += off[i - 1] * z[(i - 1) * n + j];
                }
                if i + 1 < n {
                    tv += off[i] * z[(i + 1) * n + j];
                }
                assert!((tv - ev[j] * z[i * n + j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_and_empty() {
        assert_eq!(tql(&[4.0], &[], None).unwrap(), vec![4.0]);
        assert!(tql(&[], &[], None).unwrap().is_empty());
    }
}
