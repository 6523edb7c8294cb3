//! Tail experiments for the operator norm, quadratic forms and ρ_L; ε-nets of
//! the complex unit sphere; closed-form checks of two scalar exponential
//! moment inequalities.

use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::eigensolve;
use crate::ensemble::{sample_entry, sample_matrix, EntryLaw, HermitianMatrix, SparsityPattern};
use crate::error::{Error, Result};
use crate::localization::{self, RhoL};
use crate::rng;
use crate::stats;

pub const TAIL_CSV_HEADER: &str = "statistic,n,L,t,exceed,lo95,hi95,trials";
pub const NET_CSV_HEADER: &str = "n,epsilon,size,bound,coverage_samples,coverage_ok";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailStatistic {
    /// ‖X‖ / √W
    OpNormOverSqrtN,
    /// ‖Xz‖² / W
    QuadraticForm,
    /// ρ_L / √(L ln N)
    RhoLOverSqrtLLogN,
}

impl TailStatistic {
    pub fn name(&self) -> &'static str {
        match self {
            TailStatistic::OpNormOverSqrtN => "op_norm_over_sqrtN",
            TailStatistic::QuadraticForm => "quadratic_form",
            TailStatistic::RhoLOverSqrtLLogN => "rhoL_over_sqrt_LlogN",
        }
    }

    /// The norm event is strict (> t), the other two are not (≥ t).
    fn exceeds(&self, value: f64, t: f64) -> bool {
        match self {
            TailStatistic::OpNormOverSqrtN => value > t,
            _ => value >= t,
        }
    }
}

/// Least-squares fit of −ln p / scale against a transform of t.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailFit {
    pub slope: f64,
    pub intercept: f64,
    /// −intercept / slope: the shift inside the exponent.
    pub shift: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailEstimate {
    pub statistic: TailStatistic,
    pub n: usize,
    /// Subset size for ρ_L; zero otherwise.
    pub l: usize,
    pub thresholds: Vec<f64>,
    pub exceed_counts: Vec<usize>,
    pub exceed_prob: Vec<f64>,
    pub lo95: Vec<f64>,
    pub hi95: Vec<f64>,
    pub trials: usize,
    /// Per-trial statistic values, in trial order.
    pub values: Vec<f64>,
    pub fit: Option<TailFit>,
    /// Trials whose ρ_L came from local search (a lower bound).
    pub search_trials: usize,
}

impl TailEstimate {
    fn from_values(statistic: TailStatistic, n: usize, l: usize, thresholds: &[f64], values: Vec<f64>, scale: f64) -> Self {
        let trials = values.len();
        let exceed_counts: Vec<usize> = thresholds
            .iter()
            .map(|&t| values.iter().filter(|&&v| statistic.exceeds(v, t)).count())
            .collect();
        let mut order: Vec<usize> = (0..thresholds.len()).collect();
        order.sort_by(|&a, &b| thresholds[a].total_cmp(&thresholds[b]));
        assert!(order.windows(2).all(|w| exceed_counts[w[0]] >= exceed_counts[w[1]]));
        let exceed_prob: Vec<f64> = exceed_counts.iter().map(|&c| c as f64 / trials as f64).collect();
        let (lo95, hi95) = exceed_counts
            .iter()
            .map(|&c| stats::wilson_interval(c as u64, trials as u64, 0.95))
            .unzip();
        let fit = fit_tail(statistic, thresholds, &exceed_prob, scale);
        TailEstimate {
            statistic,
            n,
            l,
            thresholds: thresholds.to_vec(),
            exceed_counts,
            exceed_prob,
            lo95,
            hi95,
            trials,
            values,
            fit,
            search_trials: 0,
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W, header: bool) -> Result<()> {
        if header {
            writeln!(out, "{TAIL_CSV_HEADER}")?;
        }
        for i in 0..self.thresholds.len() {
            writeln!(
                out,
                "{},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                self.statistic.name(),
                self.n,
                self.l,
                self.thresholds[i],
                self.exceed_prob[i],
                self.lo95[i],
                self.hi95[i],
                self.trials
            )?;
        }
        Ok(())
    }
}

/// Fits −ln p / scale = slope · x(t) + intercept over thresholds with
/// 0 < p, where x(t) = t² for norm-type statistics and t for the quadratic form.
fn fit_tail(statistic: TailStatistic, thresholds: &[f64], prob: &[f64], scale: f64) -> Option<TailFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = thresholds
        .iter()
        .zip(prob)
        .filter(|(_, &p)| p > 0.0)
        .map(|(&t, &p)| {
            let x = match statistic {
                TailStatistic::QuadraticForm => t,
                _ => t * t,
            };
            (x, -p.ln() / scale)
        })
        .unzip();
    if xs.len() < 3 {
        return None;
    }
    let (slope, intercept) = stats::least_squares(&xs, &ys)?;
    Some(TailFit {
        slope,
        intercept,
        shift: -intercept / slope,
    })
}

fn check_grid(t_grid: &[f64], trials: usize) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::invalid("threshold grid is empty"));
    }
    if t_grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::invalid("thresholds must be finite"));
    }
    if trials == 0 {
        return Err(Error::invalid("trials must be positive"));
    }
    Ok(())
}

pub const NORM_TAG: &str = "norm_tail";
pub const QUAD_TAG: &str = "quad_tail";
pub const RHO_TAG: &str = "rhoL_tail";

/// Empirical P(‖X‖ > t√W) for each t (W = N for the full pattern).
pub fn norm_tail_experiment(law: &EntryLaw, pattern: &SparsityPattern, t_grid: &[f64], trials: usize, seed: u64) -> Result<TailEstimate> {
    check_grid(t_grid, trials)?;
    let n = pattern.n();
    let w = pattern.w() as f64;
    let values: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let s = rng::trial_seed(seed, NORM_TAG, n as u64, trial as u64);
            let x = sample_matrix(law, pattern, s);
            let ev = eigensolve::eigenvalues(&x).map_err(|e| e.context(format!("norm tail n={n} trial={trial}")))?;
            Ok(ev[0].abs().max(ev[n - 1].abs()) / w.sqrt())
        })
        .collect::<Result<_>>()?;
    Ok(TailEstimate::from_values(TailStatistic::OpNormOverSqrtN, n, 0, t_grid, values, n as f64))
}

/// Empirical P(‖Xz‖² ≥ W t) for each t.
pub fn quadratic_form_tail(
    law: &EntryLaw,
    pattern: &SparsityPattern,
    z: &[Complex64],
    t_grid: &[f64],
    trials: usize,
    seed: u64,
) -> Result<TailEstimate> {
    check_grid(t_grid, trials)?;
    let n = pattern.n();
    if z.len() != n {
        return Err(Error::invalid(format!("z has length {}, expected {n}", z.len())));
    }
    let znorm = z.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if znorm > 1.0 + 1e-12 {
        return Err(Error::invalid(format!("|z| = {znorm} exceeds 1")));
    }
    let w = pattern.w() as f64;
    let values: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let s = rng::trial_seed(seed, QUAD_TAG, n as u64, trial as u64);
            let x = sample_matrix(law, pattern, s);
            x.matvec(z).iter().map(|c| c.norm_sqr()).sum::<f64>() / w
        })
        .collect();
    Ok(TailEstimate::from_values(TailStatistic::QuadraticForm, n, 0, t_grid, values, n as f64))
}

/// Empirical P(ρ_L ≥ t√(L ln N)). Uses exhaustive ρ_L within `budget`, local
/// search otherwise; such trials are counted in `search_trials`.
pub fn rho_l_tail_experiment(
    law: &EntryLaw,
    pattern: &SparsityPattern,
    l: usize,
    t_grid: &[f64],
    trials: usize,
    seed: u64,
    budget: u128,
) -> Result<TailEstimate> {
    check_grid(t_grid, trials)?;
    let n = pattern.n();
    if n < 2 {
        return Err(Error::invalid("ρ_L tail needs n >= 2 (ln n = 0)"));
    }
    if l == 0 || l > n {
        return Err(Error::invalid(format!("L must lie in 1..={n}, got {l}")));
    }
    let scale = (l as f64 * (n as f64).ln()).sqrt();
    let results: Vec<RhoL> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let s = rng::trial_seed(seed, RHO_TAG, (n * (n + 1) + l) as u64, trial as u64);
            let x = sample_matrix(law, pattern, s);
            let mut r = rng::stream(s, u64::MAX);
            localization::rho_l(&x, l, budget, &mut r).map_err(|e| e.context(format!("ρ_L tail n={n} L={l} trial={trial}")))
        })
        .collect::<Result<_>>()?;
    let search_trials = results.iter().filter(|r| matches!(r, RhoL::LowerBound(_))).count();
    let values = results.iter().map(|r| r.value() / scale).collect();
    let mut est = TailEstimate::from_values(TailStatistic::RhoLOverSqrtLLogN, n, l, t_grid, values, l as f64 * (n as f64).ln());
    est.search_trials = search_trials;
    Ok(est)
}

/// Uniform point on the unit sphere of C^n as 2n interleaved real coordinates.
fn sphere_point<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let x: Vec<f64> = (0..2 * n).map(|_| rng.sample(StandardNormal)).collect();
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            return x.into_iter().map(|v| v / norm).collect();
        }
    }
}

pub fn random_sphere_point<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<Complex64> {
    to_complex(&sphere_point(n, rng))
}

fn to_complex(x: &[f64]) -> Vec<Complex64> {
    x.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect()
}

/// Uniform grid over the first few coordinates, with cell side at least the
/// query radius so that neighbouring cells suffice.
struct GridIndex {
    dim: usize,
    cells: usize,
    side: f64,
    heads: Vec<u32>,
    next: Vec<u32>,
    coords: Vec<f64>,
    stride: usize,
    offsets: Vec<Vec<i64>>,
}

const EMPTY: u32 = u32::MAX;
const MAX_CELLS: usize = 1 << 22;

impl GridIndex {
    fn new(stride: usize, radius: f64) -> Self {
        let dim = stride.min(6);
        let mut side = radius;
        while ((2.0 / side).floor() as usize + 1).pow(dim as u32) > MAX_CELLS {
            side *= 1.25;
        }
        let cells = (2.0 / side).floor() as usize + 1;
        let mut offsets = vec![vec![]];
        for _ in 0..dim {
            offsets = offsets
                .into_iter()
                .flat_map(|o: Vec<i64>| {
                    (-1..=1).map(move |d| {
                        let mut o = o.clone();
                        o.push(d);
                        o
                    })
                })
                .collect();
        }
        // own cell first: most rejections resolve there
        offsets.sort_by_key(|o| o.iter().map(|v| v.abs()).sum::<i64>());
        GridIndex {
            dim,
            cells,
            side,
            heads: vec![EMPTY; cells.pow(dim as u32)],
            next: Vec::new(),
            coords: Vec::new(),
            stride,
            offsets,
        }
    }

    fn len(&self) -> usize {
        self.next.len()
    }

    fn cell_of(&self, x: &[f64]) -> Vec<i64> {
        (0..self.dim)
            .map(|d| (((x[d] + 1.0) / self.side).floor() as i64).clamp(0, self.cells as i64 - 1))
            .collect()
    }

    fn linear(&self, c: &[i64]) -> Option<usize> {
        let mut idx = 0usize;
        for &v in c {
            if v < 0 || v >= self.cells as i64 {
                return None;
            }
            idx = idx * self.cells + v as usize;
        }
        Some(idx)
    }

    fn insert(&mut self, x: &[f64]) {
        let id = self.len() as u32;
        let cell = self.linear(&self.cell_of(x)).unwrap();
        self.coords.extend_from_slice(x);
        self.next.push(self.heads[cell]);
        self.heads[cell] = id;
    }

    /// Some point within `radius` (radius <= side).
    fn within(&self, x: &[f64], radius: f64) -> bool {
        let r2 = radius * radius;
        let base = self.cell_of(x);
        let mut c = vec![0i64; self.dim];
        for off in &self.offsets {
            for d in 0..self.dim {
                c[d] = base[d] + off[d];
            }
            let Some(cell) = self.linear(&c) else { continue };
            let mut p = self.heads[cell];
            while p != EMPTY {
                let y = &self.coords[p as usize * self.stride..(p as usize + 1) * self.stride];
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                if d2 <= r2 {
                    return true;
                }
                p = self.next[p as usize];
            }
        }
        false
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonNet {
    pub n: usize,
    pub epsilon: f64,
    pub points: Vec<Vec<Complex64>>,
    pub coverage_samples: usize,
    pub coverage_ok: bool,
    /// (2/ε)^{2n}
    pub bound: f64,
    /// Points added by the coverage passes.
    pub added_in_coverage: usize,
    /// Coverage passes run (1, or 2 after a retry).
    pub coverage_passes: usize,
}

impl EpsilonNet {
    pub fn size(&self) -> usize {
        self.points.len()
    }

    pub fn csv_line(&self) -> String {
        format!(
            "{},{:.16e},{},{:.16e},{},{}",
            self.n,
            self.epsilon,
            self.size(),
            self.bound,
            self.coverage_samples,
            self.coverage_ok
        )
    }
}

/// Candidate rejections in a row that end the packing phase.
pub const NET_PATIENCE: usize = 2_000;

/// Packing separation as a fraction of ε.
pub const NET_SEPARATION: f64 = 0.8;

/// Greedy packing of the complex unit sphere of C^n, grown by random
/// sequential insertion: a uniform candidate joins when it is farther than
/// `NET_SEPARATION`·ε from every current point, until `NET_PATIENCE`
/// consecutive candidates are rejected. `coverage_samples` fresh uniform points are then
/// tested; any that is farther than ε is added (separation is kept) and the
/// test is repeated once with fresh points.
pub fn build_epsilon_net<R: Rng + ?Sized>(n: usize, epsilon: f64, rng: &mut R, coverage_samples: usize) -> Result<EpsilonNet> {
    if n == 0 || n > 4 {
        return Err(Error::invalid(format!("ε-nets are built for 1 <= n <= 4, got {n}")));
    }
    if !(epsilon > 0.0 && epsilon < 0.25) {
        return Err(Error::invalid(format!("epsilon must lie in (0, 1/4), got {epsilon}")));
    }
    let bound = (2.0 / epsilon).powi(2 * n as i32);
    let mut index = GridIndex::new(2 * n, epsilon);
    let check_size = |index: &GridIndex| -> Result<()> {
        if index.len() as f64 > bound {
            Err(Error::Construction(format!(
                "net size {} exceeds the cardinality bound {bound}",
                index.len()
            )))
        } else {
            Ok(())
        }
    };

    let mut rejected = 0;
    while rejected < NET_PATIENCE {
        let x = sphere_point(n, rng);
        if index.within(&x, NET_SEPARATION * epsilon) {
            rejected += 1;
        } else {
            index.insert(&x);
            rejected = 0;
            check_size(&index)?;
        }
    }

    let mut added = 0;
    let mut passes = 0;
    let mut coverage_ok = false;
    for _ in 0..2 {
        passes += 1;
        let mut missed = 0;
        for _ in 0..coverage_samples {
            let x = sphere_point(n, rng);
            if !index.within(&x, epsilon) {
                missed += 1;
                index.insert(&x);
            }
        }
        added += missed;
        check_size(&index)?;
        if missed == 0 {
            coverage_ok = true;
            break;
        }
    }
    if !coverage_ok {
        return Err(Error::Construction(format!(
            "ε-net coverage failed twice on {coverage_samples} samples (n={n}, ε={epsilon})"
        )));
    }
    let points = index.coords.chunks(2 * n).map(to_complex).collect();
    Ok(EpsilonNet {
        n,
        epsilon,
        points,
        coverage_samples,
        coverage_ok,
        bound,
        added_in_coverage: added,
        coverage_passes: passes,
    })
}

/// Fraction of `samples` fresh uniform sphere points within ε of the net.
pub fn net_coverage<R: Rng + ?Sized>(net: &EpsilonNet, samples: usize, rng: &mut R) -> f64 {
    let mut index = GridIndex::new(2 * net.n, net.epsilon);
    for p in &net.points {
        let x: Vec<f64> = p.iter().flat_map(|c| [c.re, c.im]).collect();
        index.insert(&x);
    }
    let hit = (0..samples).filter(|_| index.within(&sphere_point(net.n, rng), net.epsilon)).count();
    hit as f64 / samples.max(1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetLambdaCheck {
    /// λ_max(P)
    pub lhs: f64,
    /// max_i z_i* P z_i / (1 − 2ε)
    pub rhs: f64,
    pub ok: bool,
}

pub fn net_lambda_bound_check(net: &EpsilonNet, p: &HermitianMatrix) -> Result<NetLambdaCheck> {
    let n = net.n;
    if p.n() != n {
        return Err(Error::invalid(format!("matrix is {}x{}, net lives in C^{n}", p.n(), p.n())));
    }
    let ev = eigensolve::eigenvalues(p)?;
    let scale = p.frobenius_norm();
    if ev[0] < -1e-10 * scale {
        return Err(Error::invalid(format!("matrix is not positive semidefinite: λ_min = {}", ev[0])));
    }
    let a = p.to_complex_dense();
    let best = net
        .points
        .iter()
        .map(|z| {
            let mut s = 0.0;
            for i in 0..n {
                let row: Complex64 = (0..n).map(|j| a[i * n + j] * z[j]).sum();
                s += (z[i].conj() * row).re;
            }
            s
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let lhs = ev[n - 1];
    let rhs = best / (1.0 - 2.0 * net.epsilon);
    Ok(NetLambdaCheck {
        lhs,
        rhs,
        ok: lhs <= rhs + 1e-9 * scale,
    })
}

/// A*A with A an n×n matrix of standard complex Gaussians.
pub fn random_psd<R: Rng + ?Sized>(n: usize, rng: &mut R) -> HermitianMatrix {
    let law = EntryLaw::gaussian_complex();
    let a: Vec<Complex64> = (0..n * n).map(|_| sample_entry(&law, rng)).collect();
    let mut p = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in i..n {
            let s: Complex64 = (0..n).map(|l| a[l * n + i].conj() * a[l * n + j]).sum();
            if i == j {
                p[i * n + i] = Complex64::new(s.re, 0.0);
            } else {
                p[i * n + j] = s;
                p[j * n + i] = s.conj();
            }
        }
    }
    HermitianMatrix::from_complex_dense(n, p).expect("A*A is Hermitian by construction")
}

pub const NET_TAG: &str = "net_check";

#[derive(Debug, Clone, PartialEq)]
pub struct NetExperiment {
    pub net: EpsilonNet,
    pub checks: Vec<NetLambdaCheck>,
}

impl NetExperiment {
    pub fn violations(&self) -> usize {
        self.checks.iter().filter(|c| !c.ok).count()
    }
}

/// Builds a net and checks the λ_max inequality on `matrices` random PSD matrices.
pub fn net_experiment(n: usize, epsilon: f64, coverage_samples: usize, matrices: usize, seed: u64) -> Result<NetExperiment> {
    let mut r = rng::stream(rng::trial_seed(seed, NET_TAG, n as u64, 0), 0);
    let net = build_epsilon_net(n, epsilon, &mut r, coverage_samples)?;
    let checks = (0..matrices)
        .into_par_iter()
        .map(|m| {
            let mut r = rng::stream(rng::trial_seed(seed, NET_TAG, n as u64, m as u64 + 1), 0);
            net_lambda_bound_check(&net, &random_psd(n, &mut r))
        })
        .collect::<Result<_>>()?;
    Ok(NetExperiment { net, checks })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MgfRow {
    pub r: f64,
    /// E e^{rX}
    pub lhs: f64,
    /// 1 + 3 E[e^{δX²}] (e^{r²/δ} − 1)
    pub mid: f64,
    /// exp(3 r² E[e^{δX²}] / δ)
    pub outer: f64,
    pub ln_lhs: f64,
    pub ln_mid: f64,
    pub ln_outer: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MgfReport {
    pub delta: f64,
    /// E e^{δX²}
    pub exp_sq: f64,
    pub rows: Vec<MgfRow>,
}

impl MgfReport {
    pub fn violations(&self) -> usize {
        self.rows.iter().filter(|r| !r.ok).count()
    }
}

pub const MGF_CSV_HEADER: &str = "law,delta,r,lhs,mid,outer,ok";

/// Checks E e^{rX} ≤ 1 + 3E[e^{δX²}](e^{r²/δ} − 1) ≤ exp(3r²E[e^{δX²}]/δ)
/// for each r, comparing logarithms.
pub fn mgf_bound_check(law: &EntryLaw, delta: f64, r_grid: &[f64]) -> Result<MgfReport> {
    if law.is_complex() {
        return Err(Error::invalid("the moment generating function check needs a real law"));
    }
    if !(delta > 0.0) {
        return Err(Error::invalid(format!("delta must be positive, got {delta}")));
    }
    let k = law
        .exp_sq_moment(delta)
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::invalid(format!("E exp(δX²) diverges for {law} at δ = {delta}")))?;
    let rows = r_grid
        .iter()
        .map(|&r| {
            let lhs = law.mgf(r).expect("real law");
            let x = r * r / delta;
            let ln_mid = if x < 700.0 {
                (3.0 * k * x.exp_m1()).ln_1p()
            } else {
                (3.0 * k).ln() + x + (-x).exp_m1().ln_1p()
            };
            let ln_outer = 3.0 * r * r * k / delta;
            let ln_lhs = lhs.ln();
            let tol = 1e-12;
            MgfRow {
                r,
                lhs,
                mid: ln_mid.exp(),
                outer: ln_outer.exp(),
                ln_lhs,
                ln_mid,
                ln_outer,
                ok: ln_lhs <= ln_mid + tol && ln_mid <= ln_outer + tol,
            }
        })
        .collect();
    Ok(MgfReport { delta, exp_sq: k, rows })
}

/// Root a* of −½ ln(1 − a) = a in (0, 1): for a ≤ a*, (1 − a)^{−1/2} ≤ e^a.
pub fn linearization_root() -> f64 {
    let g = |a: f64| -0.5 * (1.0 - a).ln() - a;
    let (mut lo, mut hi) = (0.5, 0.99);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// (τ, C) for the linearized bound E e^{|Y·z|²} ≤ e^{C|z|²}, |z| ≤ τ.
/// Real law and real z: τ_R = √(a* δ / (12K)), C_R = 12K/δ.
/// Otherwise: τ = τ_R/√8, C = 4 C_R.
pub fn linearization_constants(law: &EntryLaw, complex: bool) -> (f64, f64) {
    let (delta, k) = (law.subgauss.delta, law.subgauss.k);
    let tau_r = (linearization_root() * delta / (12.0 * k)).sqrt();
    let c_r = 12.0 * k / delta;
    if complex || law.is_complex() {
        (tau_r / 8f64.sqrt(), 4.0 * c_r)
    } else {
        (tau_r, c_r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearizationRow {
    pub z_norm: f64,
    pub tau: f64,
    pub c: f64,
    /// Monte Carlo mean of e^{|Y·z|²}.
    pub estimate: f64,
    pub std_err: f64,
    /// e^{C|z|²}
    pub bound: f64,
    pub ok: bool,
}

pub const LIN_CSV_HEADER: &str = "z_norm,tau,c,estimate,std_err,bound,ok";
pub const LIN_TAG: &str = "linearization";
const LIN_CHUNK: usize = 8192;

/// Monte Carlo check of E e^{|Y·z|²} ≤ e^{C|z|²} with Y of i.i.d. `law`
/// components; passes when estimate − 4·stderr ≤ bound.
pub fn gaussian_linearization_check(
    law: &EntryLaw,
    n: usize,
    z_grid: &[Vec<Complex64>],
    trials: usize,
    seed: u64,
) -> Result<Vec<LinearizationRow>> {
    if trials < 2 {
        return Err(Error::invalid("linearization check needs at least 2 trials"));
    }
    z_grid
        .iter()
        .enumerate()
        .map(|(g, z)| {
            if z.len() != n {
                return Err(Error::invalid(format!("z has length {}, expected {n}", z.len())));
            }
            let complex = z.iter().any(|c| c.im != 0.0);
            let (tau, c) = linearization_constants(law, complex);
            let z_norm = z.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            if z_norm > tau * (1.0 + 1e-12) {
                return Err(Error::invalid(format!("|z| = {z_norm} exceeds tau = {tau}")));
            }
            let chunks = trials.div_ceil(LIN_CHUNK);
            let sums: Vec<(f64, f64)> = (0..chunks)
                .into_par_iter()
                .map(|ch| {
                    let mut r = rng::stream(rng::trial_seed(seed, LIN_TAG, g as u64, ch as u64), 0);
                    let count = LIN_CHUNK.min(trials - ch * LIN_CHUNK);
                    let (mut s1, mut s2) = (0.0, 0.0);
                    for _ in 0..count {
                        let dot: Complex64 = z.iter().map(|&zi| sample_entry(law, &mut r) * zi).sum();
                        let v = dot.norm_sqr().exp();
                        s1 += v;
                        s2 += v * v;
                    }
                    (s1, s2)
                })
                .collect();
            let (s1, s2) = sums.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
            let m = trials as f64;
            let estimate = s1 / m;
            let var = ((s2 - m * estimate * estimate) / (m - 1.0)).max(0.0);
            let std_err = (var / m).sqrt();
            let bound = (c * z_norm * z_norm).exp();
            Ok(LinearizationRow {
                z_norm,
                tau,
                c,
                estimate,
                std_err,
                bound,
                ok: estimate - 4.0 * std_err <= bound,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{build_pattern, PatternKind};
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn full(n: usize) -> SparsityPattern {
        build_pattern(PatternKind::Full, n, n).unwrap()
    }

    #[test]
    fn norm_tail_extremes() {
        let est = norm_tail_experiment(&EntryLaw::gaussian_real(), &full(50), &[0.0, 2.1, 3.0], 200, 1).unwrap();
        assert_eq!(est.exceed_prob[0], 1.0);
        assert_eq!(est.exceed_counts[2], 0);
        assert!(est.hi95[2] < 0.02);
        assert!(est.values.iter().all(|v| (1.5..2.5).contains(v)));
    }

    #[test]
    fn tail_monotone_and_csv() {
        let est = norm_tail_experiment(&EntryLaw::rademacher(), &full(20), &[2.2, 1.5, 1.9, 2.0], 100, 4).unwrap();
        assert!(est.exceed_counts[1] >= est.exceed_counts[2]);
        assert!(est.exceed_counts[2] >= est.exceed_counts[3]);
        assert!(est.exceed_counts[3] >= est.exceed_counts[0]);
        let mut buf = Vec::new();
        est.write_csv(&mut buf, true).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), TAIL_CSV_HEADER);
        assert!(text.lines().nth(1).unwrap().starts_with("op_norm_over_sqrtN,20,0,"));
    }

    #[test]
    fn quadratic_form_is_chi_square() {
        let n = 30;
        let mut z = vec![Complex64::new(0.0, 0.0); n];
        z[0] = Complex64::new(1.0, 0.0);
        let t_grid = [0.8, 1.0, 1.3];
        let est = quadratic_form_tail(&EntryLaw::gaussian_real(), &full(n), &z, &t_grid, 4000, 2).unwrap();
        let chi = ChiSquared::new(n as f64).unwrap();
        for (i, &t) in t_grid.iter().enumerate() {
            let p = 1.0 - chi.cdf(n as f64 * t);
            assert!(est.lo95[i] - 0.01 <= p && p <= est.hi95[i] + 0.01, "t={t} p={p} est={}", est.exceed_prob[i]);
        }
    }

    #[test]
    fn quadratic_form_zero_vector() {
        let z = vec![Complex64::new(0.0, 0.0); 10];
        let est = quadratic_form_tail(&EntryLaw::gaussian_real(), &full(10), &z, &[0.1, 1.0], 50, 3).unwrap();
        assert!(est.exceed_counts.iter().all(|&c| c == 0));
        let long = vec![Complex64::new(1.0, 0.0); 10];
        assert!(quadratic_form_tail(&EntryLaw::gaussian_real(), &full(10), &long, &[1.0], 5, 3).is_err());
    }

    #[test]
    fn rho_one_rademacher_diagonal() {
        let p = build_pattern(PatternKind::CyclicBand, 10, 1).unwrap();
        let ln = (10f64).ln().sqrt();
        let est = rho_l_tail_experiment(&EntryLaw::rademacher(), &p, 1, &[0.9 / ln, 1.01 / ln], 20, 1, 1000).unwrap();
        assert_eq!(est.exceed_counts, vec![20, 0]);
        assert_eq!(est.search_trials, 0);
        assert!(est.values.iter().all(|&v| (v * ln - 1.0).abs() < 1e-12));
    }

    #[test]
    fn rho_full_subset_is_norm() {
        let n = 6;
        let p = full(n);
        let est = rho_l_tail_experiment(&EntryLaw::gaussian_real(), &p, n, &[1.0], 5, 9, 1000).unwrap();
        for (trial, v) in est.values.iter().enumerate() {
            let s = rng::trial_seed(9, RHO_TAG, (n * (n + 1) + n) as u64, trial as u64);
            let ev = eigensolve::eigenvalues(&sample_matrix(&EntryLaw::gaussian_real(), &p, s)).unwrap();
            let radius = ev[0].abs().max(ev[n - 1].abs());
            assert!((v * ((n as f64) * (n as f64).ln()).sqrt() - radius).abs() < 1e-12);
        }
    }

    #[test]
    fn circle_net() {
        let mut r = rng::stream(1, 0);
        let net = build_epsilon_net(1, 0.2, &mut r, 20_000).unwrap();
        assert!(net.coverage_ok);
        assert!(net.size() as f64 <= 100.0);
        // separation 0.8ε on the circle caps the size at 2π/(0.8ε)
        assert!(net.size() >= 16 && net.size() <= 39, "{}", net.size());
        for p in &net.points {
            assert!((p[0].norm() - 1.0).abs() < 1e-12);
        }
        for (i, a) in net.points.iter().enumerate() {
            for b in &net.points[..i] {
                assert!((a[0] - b[0]).norm() > NET_SEPARATION * 0.2);
            }
        }
    }

    #[test]
    fn net_is_deterministic() {
        let a = build_epsilon_net(2, 0.24, &mut rng::stream(3, 0), 1000).unwrap();
        let b = build_epsilon_net(2, 0.24, &mut rng::stream(3, 0), 1000).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn net_rejects_bad_parameters() {
        let mut r = rng::stream(1, 0);
        assert!(build_epsilon_net(5, 0.2, &mut r, 10).is_err());
        assert!(build_epsilon_net(1, 0.25, &mut r, 10).is_err());
        assert!(build_epsilon_net(1, 0.0, &mut r, 10).is_err());
    }

    #[test]
    fn net_lambda_identity_and_zero() {
        let net = build_epsilon_net(2, 0.1, &mut rng::stream(2, 0), 1000).unwrap();
        let id = HermitianMatrix::diagonal(&[1.0, 1.0]);
        let c = net_lambda_bound_check(&net, &id).unwrap();
        assert!((c.lhs - 1.0).abs() < 1e-12);
        assert!((c.rhs - 1.25).abs() < 1e-12);
        assert!(c.ok);
        let zero = net_lambda_bound_check(&net, &HermitianMatrix::diagonal(&[0.0, 0.0])).unwrap();
        assert_eq!((zero.lhs, zero.rhs, zero.ok), (0.0, 0.0, true));
        assert!(net_lambda_bound_check(&net, &HermitianMatrix::diagonal(&[1.0, -1.0])).is_err());
    }

    #[test]
    fn random_psd_is_psd() {
        let mut r = rng::stream(5, 0);
        for _ in 0..20 {
            let p = random_psd(3, &mut r);
            assert!(eigensolve::eigenvalues(&p).unwrap()[0] >= -1e-12);
        }
    }

    #[test]
    fn mgf_examples() {
        let rad = mgf_bound_check(&EntryLaw::rademacher(), 1.0, &[0.0, 1.0]).unwrap();
        let r0 = rad.rows[0];
        assert_eq!((r0.lhs, r0.mid, r0.outer), (1.0, 1.0, 1.0));
        let r1 = rad.rows[1];
        assert!((r1.lhs - 1.0f64.cosh()).abs() < 1e-15);
        assert!((r1.lhs - 1.5431).abs() < 1e-4);
        assert!((r1.mid - (1.0 + 3.0 * 1f64.exp() * (1f64.exp() - 1.0))).abs() < 1e-9);
        assert!((r1.mid - 15.01).abs() < 0.01);
        assert!(r1.ok);

        let g = mgf_bound_check(&EntryLaw::gaussian_real(), 0.25, &[2.0]).unwrap();
        assert!((g.exp_sq - 2f64.sqrt()).abs() < 1e-14);
        let row = g.rows[0];
        assert!((row.lhs - 2f64.exp()).abs() < 1e-12);
        let mid = 1.0 + 3.0 * 2f64.sqrt() * (16f64.exp() - 1.0);
        assert!((row.mid / mid - 1.0).abs() < 1e-12);
        assert!(row.ok);
    }

    #[test]
    fn mgf_chain_for_builtin_laws() {
        let grid: Vec<f64> = (-3..=3).map(f64::from).collect();
        for (law, delta) in [
            (EntryLaw::rademacher(), 1.0),
            (EntryLaw::gaussian_real(), 0.25),
            (EntryLaw::uniform(), 0.25),
            (EntryLaw::truncated_gaussian(2.0).unwrap(), 0.25),
        ] {
            assert_eq!(mgf_bound_check(&law, delta, &grid).unwrap().violations(), 0, "{law}");
        }
    }

    #[test]
    fn mgf_errors() {
        assert!(mgf_bound_check(&EntryLaw::gaussian_real(), 0.5, &[1.0]).is_err());
        assert!(mgf_bound_check(&EntryLaw::gaussian_complex(), 0.25, &[1.0]).is_err());
    }

    #[test]
    fn linearization_root_value() {
        let a = linearization_root();
        assert!((-0.5 * (1.0 - a).ln() - a).abs() < 1e-12);
        assert!((a - 0.7968).abs() < 1e-3);
    }

    #[test]
    fn linearization_recipe() {
        let law = EntryLaw::rademacher();
        let (tau, c) = linearization_constants(&law, false);
        assert!((c - 12.0 * 1f64.exp()).abs() < 1e-12);
        assert!((tau * tau * c - linearization_root()).abs() < 1e-12);
        let (tc, cc) = linearization_constants(&law, true);
        assert!((tc * 8f64.sqrt() - tau).abs() < 1e-15);
        assert_eq!(cc, 4.0 * c);
    }

    #[test]
    fn linearization_zero_and_axis() {
        let law = EntryLaw::rademacher();
        let (tau, c) = linearization_constants(&law, false);
        let zero = vec![Complex64::new(0.0, 0.0); 4];
        let mut axis = zero.clone();
        axis[0] = Complex64::new(tau, 0.0);
        let rows = gaussian_linearization_check(&law, 4, &[zero, axis], 1000, 1).unwrap();
        assert_eq!((rows[0].estimate, rows[0].bound), (1.0, 1.0));
        // |Y_1|² = 1 for Rademacher: the statistic is the constant e^{τ²}
        assert!((rows[1].estimate - (tau * tau).exp()).abs() < 1e-12);
        assert!(rows[1].std_err < 1e-12);
        assert!(rows[1].bound >= (tau * tau).exp() && (rows[1].bound - (c * tau * tau).exp()).abs() < 1e-12);
        assert!(rows.iter().all(|r| r.ok));
    }

    #[test]
    fn linearization_rejects_large_z() {
        let law = EntryLaw::rademacher();
        let (tau, _) = linearization_constants(&law, false);
        let z = vec![Complex64::new(tau * 1.1, 0.0)];
        match gaussian_linearization_check(&law, 1, &[z], 10, 1) {
            Err(Error::InvalidParameter(msg)) => assert!(msg.contains("tau")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn builtin_laws_meet_their_moment_profile() {
        for law in [
            EntryLaw::rademacher(),
            EntryLaw::gaussian_real(),
            EntryLaw::gaussian_complex(),
            EntryLaw::uniform(),
            EntryLaw::truncated_gaussian(1.5).unwrap(),
        ] {
            for k in 2..=12u32 {
                let bound = (law.moment.c * k as f64).powf(law.moment.alpha * k as f64);
                assert!(law.abs_moment(k) <= bound * (1.0 + 1e-12), "{law} k={k}");
            }
            assert!(law.exp_sq_moment(law.subgauss.delta).unwrap() <= law.subgauss.k * (1.0 + 1e-12));
        }
    }
}
