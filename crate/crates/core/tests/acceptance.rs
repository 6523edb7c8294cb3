//! Acceptance suite. Runs every criterion in sequence, prints one
//! PASS/FAIL line each and exits non-zero if any failed.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use bandlab::cli::{self, parse_config};
use bandlab::concentration::{self, linearization_constants};
use bandlab::eigensolve;
use bandlab::ensemble::{build_pattern, EntryLaw, HermitianMatrix, PatternKind};
use bandlab::localization::{self, DelocalizationConfig};
use bandlab::rng;
use bandlab::spectral_stats::{self, EdgeConfig};
use bandlab::walks;
use bandlab::Error;
use num_complex::Complex64;
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: String) -> Outcome {
    Outcome { ok, detail }
}

fn within(elapsed: Duration, limit_secs: u64) -> bool {
    elapsed < Duration::from_secs(limit_secs)
}

fn toeplitz_oracle() -> Outcome {
    let start = Instant::now();
    let n = 100;
    let mut a = vec![0.0; n * n];
    for i in 0..n - 1 {
        a[i * n + i + 1] = 1.0;
        a[(i + 1) * n + i] = 1.0;
    }
    let ev = eigensolve::eigenvalues(&HermitianMatrix::from_real_dense(n, a).unwrap()).unwrap();
    let elapsed = start.elapsed();
    let mut exact: Vec<f64> = (1..=n)
        .map(|j| 2.0 * (j as f64 * std::f64::consts::PI / 101.0).cos())
        .collect();
    exact.sort_by(f64::total_cmp);
    let err = ev.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    outcome(
        err <= 1e-8 && within(elapsed, 1),
        format!("max abs error {err:.3e}, {:.3}s", elapsed.as_secs_f64()),
    )
}

fn big_edge(trials: usize) -> (Vec<spectral_stats::EdgeExperimentRow>, Duration) {
    let start = Instant::now();
    let rows = spectral_stats::edge_experiment(&EdgeConfig {
        law: EntryLaw::gaussian_real(),
        pattern: PatternKind::CyclicBand,
        grid: vec![(4000, 401)],
        trials,
        master_seed: 2024,
    })
    .unwrap();
    (rows, start.elapsed())
}

fn semicircle(rows3: &[spectral_stats::EdgeExperimentRow], elapsed: Duration) -> Outcome {
    let max_ks = rows3.iter().map(|r| r.ks).fold(0.0, f64::max);
    outcome(
        rows3.len() == 3 && max_ks <= 0.06 && within(elapsed, 300),
        format!("max KS {max_ks:.5} over {} trials, {:.1}s", rows3.len(), elapsed.as_secs_f64()),
    )
}

fn edge(rows10: &[spectral_stats::EdgeExperimentRow], rows3: &[spectral_stats::EdgeExperimentRow], elapsed: Duration) -> Outcome {
    let mean = rows10.iter().map(|r| r.ratio).sum::<f64>() / rows10.len() as f64;
    let prefix_same = rows10[..3] == *rows3;
    let diag = spectral_stats::edge_experiment(&EdgeConfig {
        law: EntryLaw::rademacher(),
        pattern: PatternKind::CyclicBand,
        grid: vec![(500, 1)],
        trials: 5,
        master_seed: 7,
    })
    .unwrap();
    let diag_exact = diag.iter().all(|r| r.ratio == 1.0);
    outcome(
        rows10.len() == 10 && (1.85..=2.15).contains(&mean) && diag_exact && prefix_same && within(elapsed, 600),
        format!(
            "mean ratio {mean:.5} over {} trials, w=1 ratio exactly 1: {diag_exact}, first trials reproduced: {prefix_same}, {:.1}s",
            rows10.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn lemma_corpus() -> (localization::LemmaExperiment, Duration) {
    let start = Instant::now();
    let ls: Vec<usize> = (1..=12).collect();
    let e = localization::lemma_experiment(&EntryLaw::gaussian_complex(), PatternKind::Full, 12, 12, &ls, 100, 43, 1_000_000).unwrap();
    (e, start.elapsed())
}

fn lemma_bound(e: &localization::LemmaExperiment, elapsed: Duration) -> Outcome {
    let checked: usize = e.trials.iter().flat_map(|t| &t.rows).filter(|r| r.l <= 6).count();
    let violations: usize = e
        .trials
        .iter()
        .flat_map(|t| &t.rows)
        .filter(|r| r.l <= 6)
        .map(|r| r.violations)
        .sum();
    outcome(
        e.trials.len() == 100 && violations == 0 && within(elapsed, 120),
        format!("{checked} (matrix, L) pairs, {violations} violations, {:.1}s", elapsed.as_secs_f64()),
    )
}

fn rho_monotone(e: &localization::LemmaExperiment) -> Outcome {
    let bad = e.trials.iter().filter(|t| !t.monotone(12)).count();
    outcome(bad == 0, format!("{bad} of {} matrices break the chain", e.trials.len()))
}

fn delocalization() -> Outcome {
    let start = Instant::now();
    let r = localization::delocalization_experiment(&DelocalizationConfig {
        law: EntryLaw::gaussian_real(),
        pattern: PatternKind::CyclicBand,
        n: 2048,
        w: 257,
        l: 16,
        eta: 0.1,
        kappa: 0.9,
        trials: 5,
        master_seed: 99,
    })
    .unwrap();
    let elapsed = start.elapsed();
    outcome(
        r.violations() == 0 && within(elapsed, 900),
        format!(
            "{} eigenvectors in the window, {} localized, {} violations, {:.1}s",
            r.total_in_window(),
            r.total_localized(),
            r.violations(),
            elapsed.as_secs_f64()
        ),
    )
}

fn loc_length_optimal() -> Outcome {
    let mut r = rng::stream(77, 0);
    let mut mismatches = 0;
    for _ in 0..10_000 {
        let n = r.gen_range(1..=10);
        let raw: Vec<Complex64> = (0..n).map(|_| Complex64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0))).collect();
        let norm = raw.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let v: Vec<Complex64> = raw.iter().map(|c| c / norm).collect();
        let eta: f64 = r.gen_range(0.0..1.0);
        let abs2: Vec<f64> = v.iter().map(|c| c.norm_sqr()).collect();
        let total: f64 = abs2.iter().sum();
        let mut best = n;
        for mask in 1u32..(1 << n) {
            let inside: f64 = (0..n).filter(|&j| mask >> j & 1 == 1).map(|j| abs2[j]).sum();
            if total - inside <= eta + localization::MASS_TOL {
                best = best.min(mask.count_ones() as usize);
            }
        }
        if localization::loc_length(&v, eta).unwrap() != best {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches} mismatches in 10000 vectors"))
}

fn walk_census() -> Outcome {
    let start = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for k in 1..=3 {
        let fk = walks::verify_fk_inequalities(k).unwrap();
        let counts = walks::count_bound_check(k).unwrap();
        ok &= fk.ok() && counts.iter().all(|r| r.ok);
        parts.push(format!("k={k}: {} classes", fk.classes_checked));
    }
    let k1 = walks::class_counts(&walks::enumerate_classes(1).unwrap(), 1);
    let oracle = brute_force_counts(1);
    let k1_ok = k1 == vec![(1, 1), (2, 1)] && k1 == oracle;
    let elapsed = start.elapsed();
    outcome(
        ok && k1_ok && within(elapsed, 60),
        format!("{}, k=1 counts {k1:?}, {:.2}s", parts.join(", "), elapsed.as_secs_f64()),
    )
}

/// Class counts by vertex count from all closed index sequences over {0..2k}.
fn brute_force_counts(k: usize) -> Vec<(usize, usize)> {
    let len = 2 * k;
    let alphabet = 2 * k;
    let mut classes = std::collections::BTreeSet::new();
    let mut idx = vec![0usize; len];
    loop {
        let mut edges = std::collections::BTreeMap::new();
        for s in 0..len {
            let (a, b) = (idx[s], idx[(s + 1) % len]);
            *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
        if edges.values().all(|&m| m >= 2) {
            classes.insert(walks::canonical_walk(&idx).unwrap());
        }
        let mut p = 0;
        while p < len {
            idx[p] += 1;
            if idx[p] < alphabet {
                break;
            }
            idx[p] = 0;
            p += 1;
        }
        if p == len {
            break;
        }
    }
    let mut counts = std::collections::BTreeMap::new();
    for w in &classes {
        let t = w.iter().collect::<std::collections::BTreeSet<_>>().len();
        *counts.entry(t).or_insert(0) += 1;
    }
    counts.into_iter().collect()
}

fn trace_moment() -> Outcome {
    // A cyclic band with W = 101 needs N >= 101.
    let (n, w) = (101, 101);
    let pattern = build_pattern(PatternKind::CyclicBand, n, w).unwrap();
    let est = walks::trace_moment_mc(&EntryLaw::rademacher(), &pattern, 1, 200, 5).unwrap();
    let expected = (n * w) as f64;
    // Rademacher entries make Tr X^2 constant, so the standard error is rounding noise.
    let agrees = (est.mean - expected).abs() <= 4.0 * est.std_err + 1e-9 * expected;
    let bound = walks::trace_moment_bound(100, 101, 1, 1.0, 0.0).unwrap();
    let below = est.mean <= bound.value;
    let invalid = matches!(walks::trace_moment_bound(100, 50, 1, 1.0, 0.0), Err(Error::BoundInvalid { .. }));
    let near = (bound.value / 1.1027e5 - 1.0).abs() < 1e-3;
    outcome(
        agrees && below && invalid && near,
        format!(
            "mean {:.6} (expected {expected}), stderr {:.2e}, bound {:.2}, w=50 rejected: {invalid}",
            est.mean, est.std_err, bound.value
        ),
    )
}

fn norm_tail() -> Outcome {
    let start = Instant::now();
    let t_grid = [2.1, 3.0];
    let mut at_21 = Vec::new();
    let mut above_3 = 0;
    for n in [50, 100, 200] {
        let p = build_pattern(PatternKind::Full, n, n).unwrap();
        let est = concentration::norm_tail_experiment(&EntryLaw::gaussian_real(), &p, &t_grid, 2000, 11).unwrap();
        at_21.push(est.exceed_prob[0]);
        above_3 += est.exceed_counts[1];
    }
    let elapsed = start.elapsed();
    outcome(
        above_3 == 0 && at_21[2] <= at_21[0] + 0.01 && within(elapsed, 600),
        format!(
            "exceedances of 3 sqrt(N): {above_3}; P(t=2.1) n=50: {:.4}, n=100: {:.4}, n=200: {:.4}; {:.1}s",
            at_21[0],
            at_21[1],
            at_21[2],
            elapsed.as_secs_f64()
        ),
    )
}

fn quadratic_tail() -> Outcome {
    let n = 100;
    let t_grid = [1.5, 2.0, 3.0];
    let mut z = vec![Complex64::new(0.0, 0.0); n];
    z[0] = Complex64::new(1.0, 0.0);
    let p = build_pattern(PatternKind::Full, n, n).unwrap();
    let est = concentration::quadratic_form_tail(&EntryLaw::gaussian_real(), &p, &z, &t_grid, 20_000, 13).unwrap();
    let chi = ChiSquared::new(n as f64).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, &t) in t_grid.iter().enumerate() {
        let oracle = chi.sf(n as f64 * t);
        ok &= est.lo95[i] <= oracle && oracle <= est.hi95[i];
        parts.push(format!(
            "t={t}: {:.2e} in [{:.2e}, {:.2e}] vs {oracle:.2e}",
            est.exceed_prob[i], est.lo95[i], est.hi95[i]
        ));
    }
    outcome(ok, parts.join("; "))
}

fn epsilon_net() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for n in 1..=3 {
        let e = concentration::net_experiment(n, 0.2, 100_000, 1000, 17).unwrap();
        let bound = (2.0f64 / 0.2).powi(2 * n as i32);
        let size_ok = (e.net.size() as f64) <= bound;
        ok &= size_ok && e.net.coverage_ok && e.checks.len() == 1000 && e.violations() == 0;
        parts.push(format!(
            "n={n}: size {} <= {bound:e}: {size_ok}, coverage {}, violations {}",
            e.net.size(),
            e.net.coverage_ok,
            e.violations()
        ));
    }
    outcome(ok, parts.join("; "))
}

fn scalar_lemmas() -> Outcome {
    let r_grid: Vec<f64> = (-3..=3).map(f64::from).collect();
    let rad = concentration::mgf_bound_check(&EntryLaw::rademacher(), 1.0, &r_grid).unwrap();
    let gau = concentration::mgf_bound_check(&EntryLaw::gaussian_real(), 0.25, &r_grid).unwrap();
    let law = EntryLaw::rademacher();
    let n = 4;
    let (tau, _) = linearization_constants(&law, false);
    let z = vec![Complex64::new(tau / 2.0 / (n as f64).sqrt(), 0.0); n];
    let lin = concentration::gaussian_linearization_check(&law, n, &[z], 1_000_000, 19).unwrap();
    let row = lin[0];
    outcome(
        rad.violations() == 0 && gau.violations() == 0 && row.ok,
        format!(
            "chain violations: rademacher {}, gaussian {}; linearization |z|={:.4} estimate {:.6} +- {:.1e} vs bound {:.6}",
            rad.violations(),
            gau.violations(),
            row.z_norm,
            row.estimate,
            row.std_err,
            row.bound
        ),
    )
}

const DETERMINISM_CONFIGS: &[&str] = &[
    "experiment=edge\nn=300,400\nw=31,41\ntrials=3\nmaster_seed=1",
    "experiment=semicircle\nn=300\nw=61\ntrials=3\nbins=40\nmaster_seed=2",
    "experiment=localization\nlaw=gaussian_complex\nn=9\nL=1,2,3,9\ntrials=6\nmaster_seed=3",
    "experiment=delocalization\nn=256\nw=33\nL=4\ntrials=3\nmaster_seed=4",
    "experiment=walks\nk=1,2,3",
    "experiment=trace_moment\nlaw=gaussian_complex\nn=40\nw=11\nk=1,2,3\ntrials=20\nmaster_seed=6",
    "experiment=norm_tail\nn=20,40\nt_grid=1.8,2,2.2\ntrials=50\nmaster_seed=7",
    "experiment=quad_tail\nn=30\nt_grid=0.8,1,1.3\ntrials=500\nmaster_seed=8",
    "experiment=rhoL_tail\npattern=cyclic_band\nn=40\nw=9\nL=2,30\nt_grid=0.5,1\ntrials=8\nbudget=10000\nmaster_seed=9",
    "experiment=net_check\nn=1,2\nepsilon=0.2\ncoverage_samples=2000\nmatrices=50\nmaster_seed=10",
    "experiment=mgf_check\nlaw=rademacher\ndelta=1\nr_grid=-2,-1,0,1,2",
    "experiment=linearization_check\nlaw=rademacher\nn=3\nz_scale=0.25,0.5\ntrials=20000\nmaster_seed=12",
];

fn read_outputs(files: &[std::path::PathBuf]) -> Vec<(String, Vec<u8>)> {
    files
        .iter()
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(p).unwrap()))
        .collect()
}

fn determinism(root: &Path) -> Outcome {
    let mut covered = std::collections::BTreeSet::new();
    let mut differing = Vec::new();
    for (i, text) in DETERMINISM_CONFIGS.iter().enumerate() {
        let cfg = parse_config(text).unwrap();
        covered.insert(cfg.experiment.name());
        let mut outputs = Vec::new();
        for threads in [1, 2, 4] {
            let dir = root.join(format!("{i}_{threads}"));
            let out = cli::run_with_threads(&cfg, Some(threads), &dir).unwrap();
            outputs.push(read_outputs(&out.files));
        }
        if outputs.windows(2).any(|w| w[0] != w[1]) || outputs[0].is_empty() {
            differing.push(cfg.experiment.name());
        }
    }
    let all = covered.len() == cli::ExperimentKind::all().len();
    outcome(
        all && differing.is_empty(),
        format!(
            "{} experiments at 1, 2 and 4 threads, differing: {:?}",
            covered.len(),
            differing
        ),
    )
}

fn main() {
    let suite_start = Instant::now();
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut record = |id: usize, name: &'static str, o: Outcome| {
        println!("{} criterion {id:>2} {name}: {}", if o.ok { "PASS" } else { "FAIL" }, o.detail);
        results.push((id, name, o));
    };

    record(1, "eigensolver oracle", toeplitz_oracle());
    let (rows3, t3) = big_edge(3);
    record(2, "semicircle", semicircle(&rows3, t3));
    let (rows10, t10) = big_edge(10);
    record(3, "spectral edge", edge(&rows10, &rows3, t10));
    let (corpus, tc) = lemma_corpus();
    record(4, "localized eigenvalue bound", lemma_bound(&corpus, tc));
    record(5, "rho_L monotone", rho_monotone(&corpus));
    record(6, "delocalization", delocalization());
    record(7, "loc_length optimality", loc_length_optimal());
    record(8, "walk census", walk_census());
    record(9, "trace moment bound", trace_moment());
    record(10, "norm tail", norm_tail());
    record(11, "quadratic form tail", quadratic_tail());
    record(12, "epsilon net", epsilon_net());
    record(13, "scalar lemmas", scalar_lemmas());
    let tmp = tempfile::tempdir().unwrap();
    record(14, "determinism", determinism(tmp.path()));

    let failed: Vec<usize> = results.iter().filter(|r| !r.2.ok).map(|r| r.0).collect();
    println!(
        "acceptance: {}/{} passed in {:.1}s",
        results.len() - failed.len(),
        results.len(),
        suite_start.elapsed().as_secs_f64()
    );
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
