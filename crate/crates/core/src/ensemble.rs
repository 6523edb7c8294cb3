//! Sparsity patterns, entry laws and Hermitian random matrices.
//!
//! Entries are sampled row by row: row `i` draws its upper-triangle entries
//! `(i, j), j >= i` from its own ChaCha stream derived from the matrix seed,
//! so the sampled matrix does not depend on how rows are scheduled.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quadrature;
use crate::rng;
use crate::scalar::Scalar;

const SQRT_3: f64 = 1.732_050_807_568_877_2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LawKind {
    GaussianReal,
    GaussianComplex,
    Rademacher,
    /// Uniform on [-√3, √3].
    UniformCentered,
    /// Standard Gaussian conditioned on |x| <= cutoff, rescaled to variance one.
    TruncatedGaussian { cutoff: f64 },
}

impl LawKind {
    pub fn name(&self) -> &'static str {
        match self {
            LawKind::GaussianReal => "gaussian_real",
            LawKind::GaussianComplex => "gaussian_complex",
            LawKind::Rademacher => "rademacher",
            LawKind::UniformCentered => "uniform",
            LawKind::TruncatedGaussian { .. } => "truncated_gaussian",
        }
    }
}

/// Moment bound E|X|^k <= (C k)^(alpha k) for k >= 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentProfile {
    pub c: f64,
    pub alpha: f64,
}

/// Gaussian integrability E exp(delta |X|^2) <= K.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubgaussProfile {
    pub delta: f64,
    pub k: f64,
}

/// A centered, variance-one scalar law together with its declared moment and
/// subgaussian constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntryLaw {
    pub kind: LawKind,
    pub moment: MomentProfile,
    pub subgauss: SubgaussProfile,
}

impl EntryLaw {
    /// Law with the built-in constants: (C, alpha) = (1, 1/2) for every kind,
    /// and delta = 1 for Rademacher, 1/4 otherwise, with K = E exp(delta |X|^2).
    pub fn new(kind: LawKind) -> Result<Self> {
        if let LawKind::TruncatedGaussian { cutoff } = kind {
            if !(cutoff.is_finite() && cutoff > 0.0) {
                return Err(Error::invalid(format!(
                    "truncated gaussian cutoff must be positive and finite, got {cutoff}"
                )));
            }
        }
        let delta = match kind {
            LawKind::Rademacher => 1.0,
            _ => 0.25,
        };
        let mut law = EntryLaw {
            kind,
            moment: MomentProfile { c: 1.0, alpha: 0.5 },
            subgauss: SubgaussProfile { delta, k: 1.0 },
        };
        law.subgauss.k = law
            .exp_sq_moment(delta)
            .ok_or_else(|| Error::invalid("E exp(delta X^2) diverges for the default delta"))?;
        Ok(law)
    }

    pub fn gaussian_real() -> Self {
        Self::new(LawKind::GaussianReal).expect("built-in law")
    }

    pub fn gaussian_complex() -> Self {
        Self::new(LawKind::GaussianComplex).expect("built-in law")
    }

    pub fn rademacher() -> Self {
        Self::new(LawKind::Rademacher).expect("built-in law")
    }

    pub fn uniform() -> Self {
        Self::new(LawKind::UniformCentered).expect("built-in law")
    }

    pub fn truncated_gaussian(cutoff: f64) -> Result<Self> {
        Self::new(LawKind::TruncatedGaussian { cutoff })
    }

    pub fn with_moment_profile(mut self, c: f64, alpha: f64) -> Result<Self> {
        if !(c >= 0.0 && alpha >= 0.0) {
            return Err(Error::invalid("moment profile needs C >= 0 and alpha >= 0"));
        }
        self.moment = MomentProfile { c, alpha };
        Ok(self)
    }

    pub fn with_subgauss_profile(mut self, delta: f64, k: f64) -> Result<Self> {
        if !(delta > 0.0 && k >= 1.0) {
            return Err(Error::invalid("subgaussian profile needs delta > 0 and K >= 1"));
        }
        self.subgauss = SubgaussProfile { delta, k };
        Ok(self)
    }

    pub fn is_complex(&self) -> bool {
        matches!(self.kind, LawKind::GaussianComplex)
    }

    /// Law used on the diagonal: the real variance-one counterpart.
    pub fn diagonal_law(&self) -> EntryLaw {
        match self.kind {
            LawKind::GaussianComplex => EntryLaw {
                kind: LawKind::GaussianReal,
                ..*self
            },
            _ => *self,
        }
    }

    /// Support bound for bounded laws.
    pub fn support_bound(&self) -> Option<f64> {
        match self.kind {
            LawKind::Rademacher => Some(1.0),
            LawKind::UniformCentered => Some(SQRT_3),
            LawKind::TruncatedGaussian { cutoff } => Some(cutoff * truncated_scale(cutoff)),
            _ => None,
        }
    }

    /// Density of a real law with a density (uniform, truncated Gaussian, Gaussian).
    fn density(&self, x: f64) -> f64 {
        match self.kind {
            LawKind::GaussianReal => (-0.5 * x * x).exp() / (2.0 * PI).sqrt(),
            LawKind::UniformCentered => {
                if x.abs() <= SQRT_3 {
                    1.0 / (2.0 * SQRT_3)
                } else {
                    0.0
                }
            }
            LawKind::TruncatedGaussian { cutoff } => {
                let s = truncated_scale(cutoff);
                let y = x / s;
                if y.abs() > cutoff {
                    0.0
                } else {
                    let mass = statrs_erf(cutoff / SQRT_2);
                    (-0.5 * y * y).exp() / ((2.0 * PI).sqrt() * mass * s)
                }
            }
            _ => f64::NAN,
        }
    }

    /// Exact E|X|^k (closed form, or 64-point Gauss–Legendre on bounded support).
    pub fn abs_moment(&self, k: u32) -> f64 {
        let kf = k as f64;
        match self.kind {
            LawKind::Rademacher => 1.0,
            LawKind::GaussianReal => {
                2f64.powf(kf / 2.0) * statrs::function::gamma::gamma((kf + 1.0) / 2.0) / PI.sqrt()
            }
            LawKind::GaussianComplex => statrs::function::gamma::gamma(kf / 2.0 + 1.0),
            LawKind::UniformCentered => SQRT_3.powf(kf) / (kf + 1.0),
            LawKind::TruncatedGaussian { .. } => {
                let b = self.support_bound().unwrap();
                2.0 * quadrature::integrate_composite(|x| x.powf(kf) * self.density(x), 0.0, b, 8, 64)
            }
        }
    }

    /// E exp(delta |X|^2), or `None` when it diverges.
    pub fn exp_sq_moment(&self, delta: f64) -> Option<f64> {
        match self.kind {
            LawKind::Rademacher => Some(delta.exp()),
            LawKind::GaussianReal => (delta < 0.5).then(|| (1.0 - 2.0 * delta).powf(-0.5)),
            LawKind::GaussianComplex => (delta < 1.0).then(|| 1.0 / (1.0 - delta)),
            LawKind::UniformCentered | LawKind::TruncatedGaussian { .. } => {
                let b = self.support_bound().unwrap();
                Some(2.0 * quadrature::integrate_composite(|x| (delta * x * x).exp() * self.density(x), 0.0, b, 8, 64))
            }
        }
    }

    /// E exp(r X) for real laws.
    pub fn mgf(&self, r: f64) -> Option<f64> {
        match self.kind {
            LawKind::Rademacher => Some(r.cosh()),
            LawKind::GaussianReal => Some((0.5 * r * r).exp()),
            LawKind::GaussianComplex => None,
            LawKind::UniformCentered => {
                let a = SQRT_3 * r;
                Some(if a == 0.0 { 1.0 } else { a.sinh() / a })
            }
            LawKind::TruncatedGaussian { .. } => {
                let b = self.support_bound().unwrap();
                Some(quadrature::integrate_composite(|x| (r * x).exp() * self.density(x), -b, b, 16, 64))
            }
        }
    }
}

impl fmt::Display for EntryLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            LawKind::TruncatedGaussian { cutoff } => write!(f, "truncated_gaussian({cutoff})"),
            k => f.write_str(k.name()),
        }
    }
}

fn statrs_erf(x: f64) -> f64 {
    statrs::function::erf::erf(x)
}

/// Factor making N(0,1) conditioned on |x| <= c have variance one.
fn truncated_scale(c: f64) -> f64 {
    let phi = (-0.5 * c * c).exp() / (2.0 * PI).sqrt();
    let mass = statrs_erf(c / SQRT_2);
    let var = 1.0 - 2.0 * c * phi / mass;
    1.0 / var.sqrt()
}

/// One draw from `law`. Complex laws have independent real and imaginary
/// parts of variance 1/2 each.
pub fn sample_entry<R: Rng + ?Sized>(law: &EntryLaw, rng: &mut R) -> Complex64 {
    match law.kind {
        LawKind::GaussianComplex => {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re * std::f64::consts::FRAC_1_SQRT_2, im * std::f64::consts::FRAC_1_SQRT_2)
        }
        _ => Complex64::new(sample_real(law, rng), 0.0),
    }
}

/// One draw from a real law (the diagonal law for complex ones).
pub fn sample_real<R: Rng + ?Sized>(law: &EntryLaw, rng: &mut R) -> f64 {
    match law.kind {
        LawKind::GaussianReal | LawKind::GaussianComplex => rng.sample(StandardNormal),
        LawKind::Rademacher => {
            if rng.gen::<bool>() {
                1.0
            } else {
                -1.0
            }
        }
        LawKind::UniformCentered => rng.gen_range(-SQRT_3..=SQRT_3),
        LawKind::TruncatedGaussian { cutoff } => {
            let s = truncated_scale(cutoff);
            loop {
                let z: f64 = rng.sample(StandardNormal);
                if z.abs() <= cutoff {
                    return z * s;
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PatternKind {
    StandardBand,
    CyclicBand,
    Full,
    /// Row-major n×n boolean mask.
    CustomMask(Vec<bool>),
}

impl PatternKind {
    pub fn name(&self) -> &'static str {
        match self {
            PatternKind::StandardBand => "standard_band",
            PatternKind::CyclicBand => "cyclic_band",
            PatternKind::Full => "full",
            PatternKind::CustomMask(_) => "custom",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparsityPattern {
    n: usize,
    w: usize,
    kind: PatternKind,
}

/// Builds a pattern, checking the width conventions (W = 2b + 1 for bands).
pub fn build_pattern(kind: PatternKind, n: usize, w: usize) -> Result<SparsityPattern> {
    if n == 0 {
        return Err(Error::invalid("matrix size must be positive"));
    }
    if w == 0 {
        return Err(Error::invalid("band width must be positive"));
    }
    if w > n {
        return Err(Error::invalid(format!("band width {w} exceeds matrix size {n}")));
    }
    match &kind {
        PatternKind::StandardBand | PatternKind::CyclicBand => {
            if w % 2 == 0 {
                return Err(Error::invalid(format!("band width must be odd (W = 2b+1), got {w}")));
            }
        }
        PatternKind::Full => {
            if w != n {
                return Err(Error::invalid(format!("full pattern needs w = n = {n}, got {w}")));
            }
        }
        PatternKind::CustomMask(mask) => {
            if mask.len() != n * n {
                return Err(Error::invalid(format!(
                    "custom mask has {} cells, expected {}",
                    mask.len(),
                    n * n
                )));
            }
            for i in 0..n {
                for j in (i + 1)..n {
                    if mask[i * n + j] != mask[j * n + i] {
                        return Err(Error::invalid(format!("custom mask is not symmetric at ({i}, {j})")));
                    }
                }
            }
        }
    }
    Ok(SparsityPattern { n, w, kind })
}

impl SparsityPattern {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn w(&self) -> usize {
        self.w
    }

    pub fn kind(&self) -> &PatternKind {
        &self.kind
    }

    /// Band half-width b for band kinds.
    pub fn halfwidth(&self) -> usize {
        (self.w - 1) / 2
    }

    pub fn allowed(&self, i: usize, j: usize) -> bool {
        let n = self.n;
        debug_assert!(i < n && j < n);
        match &self.kind {
            PatternKind::StandardBand => i.abs_diff(j) <= self.halfwidth(),
            PatternKind::CyclicBand => {
                let d = i.abs_diff(j);
                d.min(n - d) <= self.halfwidth()
            }
            PatternKind::Full => true,
            PatternKind::CustomMask(mask) => mask[i * n + j],
        }
    }

    /// Allowed column indices of row `i`, ascending.
    pub fn row(&self, i: usize) -> Vec<usize> {
        let n = self.n;
        match &self.kind {
            PatternKind::StandardBand => {
                let b = self.halfwidth();
                (i.saturating_sub(b)..=(i + b).min(n - 1)).collect()
            }
            PatternKind::CyclicBand if self.w < n => {
                let b = self.halfwidth();
                let mut cols: Vec<usize> = (0..self.w).map(|d| (i + n + d - b) % n).collect();
                cols.sort_unstable();
                cols
            }
            PatternKind::CyclicBand | PatternKind::Full => (0..n).collect(),
            PatternKind::CustomMask(mask) => (0..n).filter(|&j| mask[i * n + j]).collect(),
        }
    }

    pub fn row_counts(&self) -> Vec<usize> {
        (0..self.n).map(|i| self.row(i).len()).collect()
    }

    /// Total number of allowed (i, j) positions.
    pub fn allowed_count(&self) -> usize {
        self.row_counts().iter().sum()
    }
}

/// Dense row-major storage; real laws keep real storage.
#[derive(Debug, Clone, PartialEq)]
pub enum Entries {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

/// An n×n Hermitian matrix with its sparsity pattern. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    n: usize,
    pattern: SparsityPattern,
    entries: Entries,
}

impl HermitianMatrix {
    /// Wraps a real dense matrix, checking symmetry bit-exactly.
    pub fn from_real_dense(n: usize, data: Vec<f64>) -> Result<Self> {
        check_dense(n, &data)?;
        let pattern = mask_of(n, |i, j| data[i * n + j] != 0.0);
        Ok(HermitianMatrix {
            n,
            pattern,
            entries: Entries::Real(data),
        })
    }

    /// Wraps a complex dense matrix, checking Hermitian symmetry bit-exactly.
    pub fn from_complex_dense(n: usize, data: Vec<Complex64>) -> Result<Self> {
        check_dense(n, &data)?;
        let pattern = mask_of(n, |i, j| data[i * n + j] != Complex64::new(0.0, 0.0));
        Ok(HermitianMatrix {
            n,
            pattern,
            entries: Entries::Complex(data),
        })
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let n = values.len();
        let mut data = vec![0.0; n * n];
        for (i, &v) in values.iter().enumerate() {
            data[i * n + i] = v;
        }
        Self::from_real_dense(n, data).expect("diagonal matrices are symmetric")
    }

    pub fn zeros(pattern: SparsityPattern) -> Self {
        let n = pattern.n();
        HermitianMatrix {
            n,
            pattern,
            entries: Entries::Real(vec![0.0; n * n]),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pattern(&self) -> &SparsityPattern {
        &self.pattern
    }

    pub fn entries(&self) -> &Entries {
        &self.entries
    }

    pub fn is_complex(&self) -> bool {
        matches!(self.entries, Entries::Complex(_))
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        match &self.entries {
            Entries::Real(d) => Complex64::new(d[i * self.n + j], 0.0),
            Entries::Complex(d) => d[i * self.n + j],
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i).re).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        match &self.entries {
            Entries::Real(d) => d.iter().map(|x| x * x).sum::<f64>().sqrt(),
            Entries::Complex(d) => d.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt(),
        }
    }

    /// Returns X / s (same pattern).
    pub fn scaled(&self, s: f64) -> Self {
        let entries = match &self.entries {
            Entries::Real(d) => Entries::Real(d.iter().map(|x| x / s).collect()),
            Entries::Complex(d) => Entries::Complex(d.iter().map(|x| x / s).collect()),
        };
        HermitianMatrix {
            n: self.n,
            pattern: self.pattern.clone(),
            entries,
        }
    }

    /// H[S, S] for an index set S (order preserved).
    pub fn principal_submatrix(&self, idx: &[usize]) -> Self {
        let l = idx.len();
        let n = self.n;
        match &self.entries {
            Entries::Real(d) => {
                let sub: Vec<f64> = idx.iter().flat_map(|&i| idx.iter().map(move |&j| d[i * n + j])).collect();
                HermitianMatrix::from_real_dense(l, sub).expect("principal submatrix of a symmetric matrix")
            }
            Entries::Complex(d) => {
                let sub: Vec<Complex64> = idx.iter().flat_map(|&i| idx.iter().map(move |&j| d[i * n + j])).collect();
                HermitianMatrix::from_complex_dense(l, sub).expect("principal submatrix of a Hermitian matrix")
            }
        }
    }

    /// Dense complex copy (row-major).
    pub fn to_complex_dense(&self) -> Vec<Complex64> {
        match &self.entries {
            Entries::Real(d) => d.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            Entries::Complex(d) => d.clone(),
        }
    }

    /// y = X v.
    pub fn matvec(&self, v: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        (0..n)
            .map(|i| {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..n {
                    acc += self.get(i, j) * v[j];
                }
                acc
            })
            .collect()
    }

    /// Writes allowed positions as `row,col,re,im` lines.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "row,col,re,im")?;
        for i in 0..self.n {
            for j in self.pattern.row(i) {
                let z = self.get(i, j);
                writeln!(out, "{i},{j},{:.16e},{:.16e}", z.re, z.im)?;
            }
        }
        Ok(())
    }
}

fn check_dense<T: Scalar>(n: usize, data: &[T]) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("matrix size must be positive"));
    }
    if data.len() != n * n {
        return Err(Error::invalid(format!("expected {} entries, got {}", n * n, data.len())));
    }
    for i in 0..n {
        if data[i * n + i].im() != 0.0 {
            return Err(Error::invalid(format!("diagonal entry ({i}, {i}) is not real")));
        }
        for j in (i + 1)..n {
            if data[i * n + j] != data[j * n + i].conj() {
                return Err(Error::invalid(format!("matrix is not Hermitian at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

fn mask_of(n: usize, nonzero: impl Fn(usize, usize) -> bool) -> SparsityPattern {
    let mask: Vec<bool> = (0..n * n).map(|p| nonzero(p / n, p % n)).collect();
    SparsityPattern {
        n,
        w: n,
        kind: PatternKind::CustomMask(mask),
    }
}

/// Samples a Hermitian matrix: the upper triangle (diagonal included) is
/// drawn independently on allowed positions and mirrored by conjugation.
/// Row `i` uses stream `i` of `seed`, so the result is independent of the
/// thread count.
pub fn sample_matrix(law: &EntryLaw, pattern: &SparsityPattern, seed: u64) -> HermitianMatrix {
    let n = pattern.n();
    let diag_law = law.diagonal_law();
    let rows: Vec<Vec<(usize, Complex64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng::stream(seed, i as u64);
            pattern
                .row(i)
                .into_iter()
                .filter(|&j| j >= i)
                .map(|j| {
                    let z = if j == i {
                        Complex64::new(sample_real(&diag_law, &mut rng), 0.0)
                    } else {
                        sample_entry(law, &mut rng)
                    };
                    (j, z)
                })
                .collect()
        })
        .collect();

    let entries = if law.is_complex() {
        let mut d = vec![Complex64::new(0.0, 0.0); n * n];
        for (i, row) in rows.iter().enumerate() {
            for &(j, z) in row {
                d[i * n + j] = z;
                d[j * n + i] = z.conj();
            }
        }
        Entries::Complex(d)
    } else {
        let mut d = vec![0.0; n * n];
        for (i, row) in rows.iter().enumerate() {
            for &(j, z) in row {
                d[i * n + j] = z.re;
                d[j * n + i] = z.re;
            }
        }
        Entries::Real(d)
    };
    HermitianMatrix {
        n,
        pattern: pattern.clone(),
        entries,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentCheck {
    pub k: u32,
    pub empirical: f64,
    pub bound: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisReport {
    pub row_counts: Vec<usize>,
    /// Rows with exactly W allowed entries, as a fraction of n.
    pub full_row_fraction: f64,
    /// Rows with more than W allowed entries.
    pub oversized_rows: Vec<usize>,
    pub sample_mean: Complex64,
    pub sample_second_moment: f64,
    pub moment_checks: Vec<MomentCheck>,
}

impl HypothesisReport {
    pub fn rows_ok(&self) -> bool {
        self.oversized_rows.is_empty()
    }

    pub fn moments_ok(&self) -> bool {
        self.moment_checks.iter().all(|m| m.ok)
    }

    pub fn ok(&self) -> bool {
        self.rows_ok() && self.moments_ok()
    }
}

/// Row-count diagnostics for the pattern plus empirical moment checks of the
/// law (`samples` draws from `seed`) against E|X|^k <= (Ck)^(alpha k), k = 2..=12.
pub fn validate_hypotheses(law: &EntryLaw, pattern: &SparsityPattern, samples: usize, seed: u64) -> HypothesisReport {
    let w = pattern.w();
    let row_counts = pattern.row_counts();
    let full = row_counts.iter().filter(|&&c| c == w).count();
    let oversized_rows = row_counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > w)
        .map(|(i, _)| i)
        .collect();

    let mut rng = rng::stream(seed, 0);
    let draws: Vec<Complex64> = (0..samples).map(|_| sample_entry(law, &mut rng)).collect();
    let m = draws.len().max(1) as f64;
    let sample_mean = draws.iter().sum::<Complex64>() / m;
    let abs: Vec<f64> = draws.iter().map(|z| z.norm()).collect();
    let sample_second_moment = abs.iter().map(|a| a * a).sum::<f64>() / m;
    let moment_checks = (2..=12u32)
        .map(|k| {
            let empirical = abs.iter().map(|a| a.powi(k as i32)).sum::<f64>() / m;
            let bound = (law.moment.c * k as f64).powf(law.moment.alpha * k as f64);
            MomentCheck {
                k,
                empirical,
                bound,
                ok: empirical <= bound,
            }
        })
        .collect();

    HypothesisReport {
        full_row_fraction: full as f64 / pattern.n() as f64,
        row_counts,
        oversized_rows,
        sample_mean,
        sample_second_moment,
        moment_checks,
    }
}
