//! (L, η)-localization of eigenvectors, the principal-submatrix spectral
//! radius ρ_L, the deterministic eigenvalue bound for localized eigenvectors,
//! and the delocalization experiment in the spectral window |λ| ≥ 2κ√W.
//!
//! A unit vector is (L, η)-localized when some set of L coordinates carries
//! all but at most η of its squared mass. The L largest-magnitude coordinates
//! are an optimal such set, so every test here works on the magnitude-sorted
//! prefix (ties broken by lower index).

use std::io::Write;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::eigensolve::{self, Spectrum};
use crate::ensemble::{build_pattern, sample_matrix, EntryLaw, HermitianMatrix, PatternKind};
use crate::error::{Error, Result};
use crate::rng;

/// Absolute slack on squared-mass comparisons, absorbing rounding in sums of
/// |v_j|^2 (e.g. ten coordinates of 1/√10 summing to 0.5 ± ulp).
pub const MASS_TOL: f64 = 1e-12;

/// Default subset budget for exhaustive ρ_L.
pub const DEFAULT_SUBSET_BUDGET: u128 = 2_000_000;

/// Coordinates sorted by decreasing |v_j|^2, lower index first on ties.
pub fn magnitude_order(abs2: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..abs2.len()).collect();
    idx.sort_by(|&a, &b| abs2[b].total_cmp(&abs2[a]).then(a.cmp(&b)));
    idx
}

/// The L largest-magnitude coordinates.
pub fn top_support(abs2: &[f64], l: usize) -> Vec<usize> {
    let mut s = magnitude_order(abs2);
    s.truncate(l);
    s
}

/// Σ_{j ∉ top-L} |v_j|^2.
pub fn tail_mass(abs2: &[f64], l: usize) -> f64 {
    let order = magnitude_order(abs2);
    // sum from the smallest entries up for accuracy
    order[l.min(order.len())..].iter().rev().map(|&j| abs2[j]).sum()
}

fn unit_abs2(v: &[Complex64]) -> Result<Vec<f64>> {
    let abs2: Vec<f64> = v.iter().map(|z| z.norm_sqr()).collect();
    let norm = abs2.iter().sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::invalid(format!("vector is not unit: norm {norm}")));
    }
    Ok(abs2)
}

fn check_eta(eta: f64) -> Result<()> {
    if !(0.0..1.0).contains(&eta) {
        return Err(Error::invalid(format!("eta must lie in [0, 1), got {eta}")));
    }
    Ok(())
}

/// Whether `v` is (L, η)-localized.
pub fn is_localized(v: &[Complex64], l: usize, eta: f64) -> Result<bool> {
    let abs2 = unit_abs2(v)?;
    check_eta(eta)?;
    if l == 0 || l > v.len() {
        return Err(Error::invalid(format!("L must lie in 1..={}, got {l}", v.len())));
    }
    Ok(tail_mass(&abs2, l) <= eta + MASS_TOL)
}

/// Smallest L such that `v` is (L, η)-localized.
pub fn loc_length(v: &[Complex64], eta: f64) -> Result<usize> {
    let abs2 = unit_abs2(v)?;
    check_eta(eta)?;
    Ok(loc_length_abs2(&abs2, eta))
}

/// [`loc_length`] on squared magnitudes (no unit check).
pub fn loc_length_abs2(abs2: &[f64], eta: f64) -> usize {
    let order = magnitude_order(abs2);
    let n = order.len();
    // suffix[k] = mass outside the first k sorted coordinates
    let mut tail = 0.0;
    let mut suffix = vec![0.0; n + 1];
    for k in (0..n).rev() {
        tail += abs2[order[k]];
        suffix[k] = tail;
    }
    (1..=n).find(|&l| suffix[l] <= eta + MASS_TOL).unwrap_or(n)
}

/// Per-eigenvector localization summary.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenLocalization {
    pub index: usize,
    pub lambda: f64,
    /// (η, minimal L) for each η of the grid.
    pub loc_len: Vec<(f64, usize)>,
    pub top_support: Vec<usize>,
    pub tail_mass: f64,
}

/// Localization report for every eigenvector of `spectrum` at support size `l`.
pub fn localization_report(spectrum: &Spectrum, eta_grid: &[f64], l: usize) -> Result<Vec<EigenLocalization>> {
    for &eta in eta_grid {
        check_eta(eta)?;
    }
    if spectrum.eigenvectors.is_none() {
        return Err(Error::invalid("localization report needs eigenvectors"));
    }
    (0..spectrum.n())
        .map(|i| {
            let abs2 = spectrum.vector_abs2(i).unwrap();
            Ok(EigenLocalization {
                index: i,
                lambda: spectrum.eigenvalues[i],
                loc_len: eta_grid.iter().map(|&eta| (eta, loc_length_abs2(&abs2, eta))).collect(),
                top_support: top_support(&abs2, l),
                tail_mass: tail_mass(&abs2, l),
            })
        })
        .collect()
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
    }
    c
}

/// Spectral radius of H[S, S].
pub fn submatrix_radius(h: &HermitianMatrix, idx: &[usize]) -> Result<f64> {
    match idx.len() {
        0 => Ok(0.0),
        1 => Ok(h.get(idx[0], idx[0]).re.abs()),
        2 => {
            let a = h.get(idx[0], idx[0]).re;
            let c = h.get(idx[1], idx[1]).re;
            let b = h.get(idx[0], idx[1]).norm();
            let mid = 0.5 * (a + c);
            let r = (0.25 * (a - c) * (a - c) + b * b).sqrt();
            Ok((mid - r).abs().max((mid + r).abs()))
        }
        _ => {
            let ev = eigensolve::eigenvalues(&h.principal_submatrix(idx))?;
            Ok(ev[0].abs().max(ev[ev.len() - 1].abs()))
        }
    }
}

/// The `rank`-th L-subset of {0..n} in lexicographic order.
fn unrank_combination(n: usize, l: usize, mut rank: u128) -> Vec<usize> {
    let mut out = Vec::with_capacity(l);
    let mut next = 0;
    for slot in 0..l {
        let mut v = next;
        loop {
            let c = binomial(n - v - 1, l - slot - 1);
            if rank < c {
                break;
            }
            rank -= c;
            v += 1;
        }
        out.push(v);
        next = v + 1;
    }
    out
}

/// Advances `c` to the next L-subset in lexicographic order.
fn next_combination(c: &mut [usize], n: usize) -> bool {
    let l = c.len();
    let mut i = l;
    while i > 0 {
        i -= 1;
        if c[i] < n - l + i {
            c[i] += 1;
            for j in i + 1..l {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Exact ρ_L: maximum spectral radius over all L×L principal submatrices.
/// Subsets are enumerated lexicographically in contiguous rank blocks; the
/// maximum does not depend on how blocks are distributed over threads.
pub fn rho_l_exhaustive(h: &HermitianMatrix, l: usize, budget: u128) -> Result<f64> {
    let n = h.n();
    if l == 0 || l > n {
        return Err(Error::invalid(format!("L must lie in 1..={n}, got {l}")));
    }
    let count = binomial(n, l);
    if count > budget {
        return Err(Error::BudgetExceeded { n, l, count, budget });
    }
    const BLOCK: u128 = 2048;
    let blocks = count.div_ceil(BLOCK);
    let maxima: Vec<Result<f64>> = (0..blocks as u64)
        .into_par_iter()
        .map(|b| {
            let start = b as u128 * BLOCK;
            let end = (start + BLOCK).min(count);
            let mut c = unrank_combination(n, l, start);
            let mut best = 0.0f64;
            for r in start..end {
                best = best.max(submatrix_radius(h, &c)?);
                if r + 1 < end {
                    next_combination(&mut c, n);
                }
            }
            Ok(best)
        })
        .collect();
    let mut best = 0.0f64;
    for m in maxima {
        best = best.max(m?);
    }
    Ok(best)
}

/// Lower bound on ρ_L by randomized single-swap local search: `restarts`
/// random initial subsets, each improved by best-improvement swaps until no
/// swap helps or `swap_budget` swap evaluations are spent.
pub fn rho_l_search<R: Rng + ?Sized>(
    h: &HermitianMatrix,
    l: usize,
    restarts: usize,
    swap_budget: usize,
    rng: &mut R,
) -> Result<f64> {
    let n = h.n();
    if l == 0 || l > n {
        return Err(Error::invalid(format!("L must lie in 1..={n}, got {l}")));
    }
    let all: Vec<usize> = (0..n).collect();
    if l == n {
        return submatrix_radius(h, &all);
    }
    let mut best = 0.0f64;
    for _ in 0..restarts.max(1) {
        let mut perm = all.clone();
        perm.shuffle(rng);
        let mut inside: Vec<usize> = perm[..l].to_vec();
        let mut outside: Vec<usize> = perm[l..].to_vec();
        inside.sort_unstable();
        let mut value = submatrix_radius(h, &inside)?;
        let mut spent = 0usize;
        'improve: loop {
            let mut step: Option<(usize, usize, f64)> = None;
            for a in 0..inside.len() {
                for b in 0..outside.len() {
                    if spent >= swap_budget {
                        break 'improve;
                    }
                    spent += 1;
                    let mut trial = inside.clone();
                    trial[a] = outside[b];
                    trial.sort_unstable();
                    let v = submatrix_radius(h, &trial)?;
                    if v > step.map_or(value, |s| s.2) {
                        step = Some((a, b, v));
                    }
                }
            }
            match step {
                Some((a, b, v)) => {
                    std::mem::swap(&mut inside[a], &mut outside[b]);
                    inside.sort_unstable();
                    value = v;
                }
                None => break,
            }
        }
        best = best.max(value);
    }
    Ok(best)
}

/// How ρ_L was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RhoL {
    Exact(f64),
    /// Local-search lower bound; cannot certify an upper-bound inequality.
    LowerBound(f64),
}

impl RhoL {
    pub fn value(&self) -> f64 {
        match *self {
            RhoL::Exact(v) | RhoL::LowerBound(v) => v,
        }
    }
}

/// ρ_L exhaustively when the subset count fits the budget, else by search.
pub fn rho_l<R: Rng + ?Sized>(h: &HermitianMatrix, l: usize, budget: u128, rng: &mut R) -> Result<RhoL> {
    match rho_l_exhaustive(h, l, budget) {
        Ok(v) => Ok(RhoL::Exact(v)),
        Err(Error::BudgetExceeded { .. }) => Ok(RhoL::LowerBound(rho_l_search(h, l, 8, 20_000, rng)?)),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaCheck {
    pub index: usize,
    pub lambda: f64,
    /// Tail mass outside the top-L support of v_i.
    pub eta: f64,
    /// |λ_i| √(1 − η_i)
    pub lhs: f64,
    /// ρ_L + √η_i ρ(X)
    pub rhs: f64,
    pub margin: f64,
    pub ok: bool,
}

/// Checks |λ_i| √(1 − η_i) ≤ ρ_L + √η_i ρ(X) for every eigenpair, with η_i the
/// tail mass of v_i outside its top-L support (so v_i is (L, η_i)-localized).
/// Computes ρ_L exhaustively when `rho_l` is not supplied. Tolerance 1e-8 ρ(X).
pub fn lemma_bound_check(spectrum: &Spectrum, h: &HermitianMatrix, l: usize, rho_l: Option<f64>) -> Result<Vec<LemmaCheck>> {
    if spectrum.eigenvectors.is_none() {
        return Err(Error::invalid("lemma check needs eigenvectors"));
    }
    let rho_l = match rho_l {
        Some(v) => v,
        None => rho_l_exhaustive(h, l, DEFAULT_SUBSET_BUDGET)?,
    };
    let rho = spectrum.spectral_radius();
    let tol = 1e-8 * rho;
    (0..spectrum.n())
        .map(|i| {
            let abs2 = spectrum.vector_abs2(i).unwrap();
            let eta = tail_mass(&abs2, l).max(0.0);
            if eta >= 1.0 {
                return Err(Error::invalid(format!("eigenvector {i} has tail mass {eta} >= 1")));
            }
            let lambda = spectrum.eigenvalues[i];
            let lhs = lambda.abs() * (1.0 - eta).sqrt();
            let rhs = rho_l + eta.sqrt() * rho;
            Ok(LemmaCheck {
                index: i,
                lambda,
                eta,
                lhs,
                rhs,
                margin: rhs - lhs,
                ok: lhs <= rhs + tol,
            })
        })
        .collect()
}

/// L = max(1, floor(W / (c ln N))).
pub fn default_l(n: usize, w: usize, c: f64) -> usize {
    ((w as f64 / (c * (n as f64).ln())).floor() as usize).max(1)
}

/// Validates √(η/(1−η)) < κ < 1.
pub fn check_window_parameters(eta: f64, kappa: f64) -> Result<()> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::invalid(format!("eta must lie in (0, 1), got {eta}")));
    }
    let floor = (eta / (1.0 - eta)).sqrt();
    if !(floor < kappa && kappa < 1.0) {
        return Err(Error::invalid(format!(
            "kappa must satisfy sqrt(eta/(1-eta)) = {floor:.6} < kappa < 1, got kappa = {kappa}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct DelocalizationConfig {
    pub law: EntryLaw,
    pub pattern: PatternKind,
    pub n: usize,
    pub w: usize,
    pub l: usize,
    pub eta: f64,
    pub kappa: f64,
    pub trials: usize,
    pub master_seed: u64,
}

pub const DELOC_TAG: &str = "delocalization";
pub const DELOC_CSV_HEADER: &str =
    "n,w,trial,seed,eig_index,lambda,eta_at_L,loc_len_eta10,loc_len_eta25,loc_len_eta50,in_window,localized";

#[derive(Debug, Clone, PartialEq)]
pub struct EigenRecord {
    pub index: usize,
    pub lambda: f64,
    pub eta_at_l: f64,
    /// Minimal L at η = 0.10, 0.25, 0.50.
    pub loc_len: [usize; 3],
    pub in_window: bool,
    pub localized: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelocalizationTrial {
    pub trial: usize,
    pub seed: u64,
    pub in_window: usize,
    pub localized_in_window: usize,
    pub records: Vec<EigenRecord>,
}

impl DelocalizationTrial {
    pub fn violates(&self) -> bool {
        self.localized_in_window > 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelocalizationResult {
    pub n: usize,
    pub w: usize,
    pub trials: Vec<DelocalizationTrial>,
}

impl DelocalizationResult {
    pub fn total_in_window(&self) -> usize {
        self.trials.iter().map(|t| t.in_window).sum()
    }

    pub fn total_localized(&self) -> usize {
        self.trials.iter().map(|t| t.localized_in_window).sum()
    }

    /// Trials with at least one localized eigenvector in the window.
    pub fn violations(&self) -> usize {
        self.trials.iter().filter(|t| t.violates()).count()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{DELOC_CSV_HEADER}")?;
        for t in &self.trials {
            for r in &t.records {
                writeln!(
                    out,
                    "{},{},{},{},{},{:.16e},{:.16e},{},{},{},{},{}",
                    self.n,
                    self.w,
                    t.trial,
                    t.seed,
                    r.index,
                    r.lambda,
                    r.eta_at_l,
                    r.loc_len[0],
                    r.loc_len[1],
                    r.loc_len[2],
                    u8::from(r.in_window),
                    u8::from(r.localized)
                )?;
            }
        }
        Ok(())
    }
}

/// Counts eigenvectors with |λ_i| ≥ 2κ√W and, among them, the (L, η)-localized ones.
pub fn delocalization_experiment(cfg: &DelocalizationConfig) -> Result<DelocalizationResult> {
    check_window_parameters(cfg.eta, cfg.kappa)?;
    if cfg.l == 0 || cfg.l > cfg.n {
        return Err(Error::invalid(format!("L must lie in 1..={}, got {}", cfg.n, cfg.l)));
    }
    let pattern = build_pattern(cfg.pattern.clone(), cfg.n, cfg.w)?;
    let threshold = 2.0 * cfg.kappa * (cfg.w as f64).sqrt();
    let trials: Vec<Result<DelocalizationTrial>> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let seed = rng::trial_seed(cfg.master_seed, DELOC_TAG, 0, trial as u64);
            let x = sample_matrix(&cfg.law, &pattern, seed);
            let ctx = || format!("delocalization n={} w={} trial={trial} seed={seed}", cfg.n, cfg.w);
            let spectrum = eigensolve::eigen_full(&x, true, eigensolve::default_tol(&x)).map_err(|e| e.context(ctx()))?;
            let records: Vec<EigenRecord> = (0..cfg.n)
                .map(|i| {
                    let abs2 = spectrum.vector_abs2(i).unwrap();
                    let lambda = spectrum.eigenvalues[i];
                    let eta_at_l = tail_mass(&abs2, cfg.l);
                    EigenRecord {
                        index: i,
                        lambda,
                        eta_at_l,
                        loc_len: [0.10, 0.25, 0.50].map(|eta| loc_length_abs2(&abs2, eta)),
                        in_window: lambda.abs() >= threshold,
                        localized: eta_at_l <= cfg.eta + MASS_TOL,
                    }
                })
                .collect();
            let in_window = records.iter().filter(|r| r.in_window).count();
            let localized_in_window = records.iter().filter(|r| r.in_window && r.localized).count();
            Ok(DelocalizationTrial {
                trial,
                seed,
                in_window,
                localized_in_window,
                records,
            })
        })
        .collect();
    Ok(DelocalizationResult {
        n: cfg.n,
        w: cfg.w,
        trials: trials.into_iter().collect::<Result<_>>()?,
    })
}

pub const LEMMA_TAG: &str = "localization";
pub const LEMMA_CSV_HEADER: &str = "n,w,trial,seed,L,rho_L,rho,min_margin,violations";

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaRow {
    pub l: usize,
    pub rho_l: f64,
    /// Smallest rhs − lhs over the eigenpairs.
    pub min_margin: f64,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaTrial {
    pub trial: usize,
    pub seed: u64,
    /// Spectral radius from the eigenvalue-only solver, the path ρ_L uses.
    pub rho: f64,
    pub rows: Vec<LemmaRow>,
}

impl LemmaTrial {
    /// ρ_L ≤ ρ_L' for L < L', every ρ_L ≤ ρ(X), and ρ_n = ρ(X) when L = n is present.
    pub fn monotone(&self, n: usize) -> bool {
        let mut rows: Vec<&LemmaRow> = self.rows.iter().collect();
        rows.sort_by_key(|r| r.l);
        rows.windows(2).all(|w| w[0].rho_l <= w[1].rho_l)
            && rows.iter().filter(|r| r.l == n).all(|r| r.rho_l == self.rho)
            && rows.iter().all(|r| r.rho_l <= self.rho)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaExperiment {
    pub n: usize,
    pub w: usize,
    pub trials: Vec<LemmaTrial>,
}

impl LemmaExperiment {
    pub fn violations(&self) -> usize {
        self.trials.iter().flat_map(|t| &t.rows).map(|r| r.violations).sum()
    }

    pub fn monotone(&self) -> bool {
        self.trials.iter().all(|t| t.monotone(self.n))
    }

    pub fn write_csv<W: Write>(&self, mut out: W, header: bool) -> Result<()> {
        if header {
            writeln!(out, "{LEMMA_CSV_HEADER}")?;
        }
        for t in &self.trials {
            for r in &t.rows {
                writeln!(
                    out,
                    "{},{},{},{},{},{:.16e},{:.16e},{:.16e},{}",
                    self.n, self.w, t.trial, t.seed, r.l, r.rho_l, t.rho, r.min_margin, r.violations
                )?;
            }
        }
        Ok(())
    }
}

/// Exhaustive ρ_L for every L in `ls` and the eigenvalue bound check for
/// localized eigenvectors, on `trials` seeded matrices.
#[allow(clippy::too_many_arguments)]
pub fn lemma_experiment(
    law: &EntryLaw,
    pattern: PatternKind,
    n: usize,
    w: usize,
    ls: &[usize],
    trials: usize,
    master_seed: u64,
    budget: u128,
) -> Result<LemmaExperiment> {
    let pattern = build_pattern(pattern, n, w)?;
    if ls.is_empty() {
        return Err(Error::invalid("no subset sizes given"));
    }
    for &l in ls {
        if l == 0 || l > n {
            return Err(Error::invalid(format!("L must lie in 1..={n}, got {l}")));
        }
        let count = binomial(n, l);
        if count > budget {
            return Err(Error::BudgetExceeded { n, l, count, budget });
        }
    }
    let trials = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let seed = rng::trial_seed(master_seed, LEMMA_TAG, 0, trial as u64);
            let x = sample_matrix(law, &pattern, seed);
            let ctx = || format!("lemma check n={n} w={w} trial={trial} seed={seed}");
            let spectrum = eigensolve::eigen_full(&x, true, eigensolve::default_tol(&x)).map_err(|e| e.context(ctx()))?;
            let ev = eigensolve::eigenvalues(&x).map_err(|e| e.context(ctx()))?;
            let rho = ev[0].abs().max(ev[n - 1].abs());
            let rows = ls
                .iter()
                .map(|&l| {
                    let rho_l = rho_l_exhaustive(&x, l, budget)?;
                    let checks = lemma_bound_check(&spectrum, &x, l, Some(rho_l))?;
                    Ok(LemmaRow {
                        l,
                        rho_l,
                        min_margin: checks.iter().map(|c| c.margin).fold(f64::INFINITY, f64::min),
                        violations: checks.iter().filter(|c| !c.ok).count(),
                    })
                })
                .collect::<Result<_>>()
                .map_err(|e: Error| e.context(ctx()))?;
            Ok(LemmaTrial { trial, seed, rho, rows })
        })
        .collect::<Result<_>>()?;
    Ok(LemmaExperiment { n, w, trials })
}
