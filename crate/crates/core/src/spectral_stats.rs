//! Semicircle reference law, exact Kolmogorov–Smirnov distance of the scaled
//! empirical spectral distribution, and the spectral-edge experiment.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;

use crate::eigensolve;
use crate::ensemble::{build_pattern, sample_matrix, EntryLaw, PatternKind};
use crate::error::{Error, Result};
use crate::rng;
use crate::stats;

pub const EDGE_CSV_HEADER: &str = "n,w,trial,seed,lambda_max,ratio,ks";

/// Density (1/2π)√(4−x²) on [−2, 2].
pub fn semicircle_pdf(x: f64) -> f64 {
    if x.abs() >= 2.0 {
        0.0
    } else {
        (4.0 - x * x).sqrt() / (2.0 * PI)
    }
}

pub fn semicircle_cdf(x: f64) -> f64 {
    if x <= -2.0 {
        0.0
    } else if x >= 2.0 {
        1.0
    } else {
        0.5 + x * (4.0 - x * x).sqrt() / (4.0 * PI) + (x / 2.0).asin() / PI
    }
}

/// Inverse of [`semicircle_cdf`] on (0, 1), by bisection to machine precision.
pub fn semicircle_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return -2.0;
    }
    if p >= 1.0 {
        return 2.0;
    }
    let (mut lo, mut hi) = (-2.0f64, 2.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if semicircle_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * 4.0 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// sup_x |F_n(x) − F(x)| for the empirical law of `eigenvalues / scale`
/// against the semicircle CDF. Exact: evaluated on both sides of every jump,
/// with ties grouped into a single jump.
pub fn ks_distance(eigenvalues: &[f64], scale: f64) -> Result<f64> {
    if eigenvalues.is_empty() {
        return Err(Error::invalid("empty spectrum"));
    }
    if !(scale > 0.0) {
        return Err(Error::invalid(format!("scale must be positive, got {scale}")));
    }
    let mut x: Vec<f64> = eigenvalues.iter().map(|v| v / scale).collect();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut d = 0.0f64;
    let mut i = 0;
    while i < x.len() {
        let mut j = i;
        while j + 1 < x.len() && x[j + 1] == x[i] {
            j += 1;
        }
        let f = semicircle_cdf(x[i]);
        let below = i as f64 / n;
        let above = (j + 1) as f64 / n;
        d = d.max((f - below).abs()).max((above - f).abs());
        i = j + 1;
    }
    Ok(d.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeExperimentRow {
    pub n: usize,
    pub w: usize,
    pub trial: usize,
    pub seed: u64,
    pub lambda_max: f64,
    /// lambda_max / sqrt(w), with the declared w.
    pub ratio: f64,
    pub ks: f64,
}

impl EdgeExperimentRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{:.16e},{:.16e},{:.16e}",
            self.n, self.w, self.trial, self.seed, self.lambda_max, self.ratio, self.ks
        )
    }
}

#[derive(Debug, Clone)]
pub struct EdgeConfig {
    pub law: EntryLaw,
    pub pattern: PatternKind,
    /// (n, w) grid points.
    pub grid: Vec<(usize, usize)>,
    pub trials: usize,
    pub master_seed: u64,
}

pub const EDGE_TAG: &str = "edge";

/// One row per (grid point, trial), ordered by grid index then trial.
/// Trials run in parallel; each uses its own derived seed.
pub fn edge_experiment(cfg: &EdgeConfig) -> Result<Vec<EdgeExperimentRow>> {
    Ok(edge_experiment_with_spectra(cfg)?.into_iter().map(|(row, _)| row).collect())
}

/// As [`edge_experiment`], also returning each trial's ascending spectrum.
pub fn edge_experiment_with_spectra(cfg: &EdgeConfig) -> Result<Vec<(EdgeExperimentRow, Vec<f64>)>> {
    if cfg.grid.is_empty() {
        return Err(Error::invalid("edge experiment grid is empty"));
    }
    let mut rows = Vec::new();
    for (g, &(n, w)) in cfg.grid.iter().enumerate() {
        let pattern = build_pattern(cfg.pattern.clone(), n, w)?;
        let chunk: Vec<Result<(EdgeExperimentRow, Vec<f64>)>> = (0..cfg.trials)
            .into_par_iter()
            .map(|trial| {
                let seed = rng::trial_seed(cfg.master_seed, EDGE_TAG, g as u64, trial as u64);
                let x = sample_matrix(&cfg.law, &pattern, seed);
                let ev = eigensolve::eigenvalues(&x)
                    .map_err(|e| e.context(format!("edge experiment n={n} w={w} trial={trial} seed={seed}")))?;
                let lambda_max = *ev.last().unwrap();
                let scale = (w as f64).sqrt();
                let row = EdgeExperimentRow {
                    n,
                    w,
                    trial,
                    seed,
                    lambda_max,
                    ratio: lambda_max / scale,
                    ks: ks_distance(&ev, scale)?,
                };
                Ok((row, ev))
            })
            .collect();
        for r in chunk {
            rows.push(r?);
        }
    }
    Ok(rows)
}

pub const HISTOGRAM_CSV_HEADER: &str = "n,w,bin_lo,bin_hi,empirical_density,semicircle_density";

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    /// Fraction of scaled eigenvalues in the bin divided by its width.
    pub empirical: f64,
    /// Semicircle mass of the bin divided by its width.
    pub semicircle: f64,
}

/// Density histogram of the pooled `spectra / scale` on `bins` equal bins of
/// [−range, range], next to the semicircle's bin-averaged density.
pub fn esd_histogram(spectra: &[&[f64]], scale: f64, bins: usize, range: f64) -> Result<Vec<HistogramBin>> {
    if bins == 0 || !(range > 0.0) || !(scale > 0.0) {
        return Err(Error::invalid("histogram needs bins >= 1, range > 0 and scale > 0"));
    }
    let width = 2.0 * range / bins as f64;
    let mut counts = vec![0usize; bins];
    let mut total = 0usize;
    for ev in spectra {
        for &v in *ev {
            total += 1;
            let x = v / scale;
            if x >= -range && x < range {
                counts[(((x + range) / width) as usize).min(bins - 1)] += 1;
            }
        }
    }
    if total == 0 {
        return Err(Error::invalid("empty spectrum"));
    }
    Ok((0..bins)
        .map(|b| {
            let lo = -range + b as f64 * width;
            let hi = lo + width;
            HistogramBin {
                lo,
                hi,
                empirical: counts[b] as f64 / (total as f64 * width),
                semicircle: (semicircle_cdf(hi) - semicircle_cdf(lo)) / width,
            }
        })
        .collect())
}

pub fn write_edge_csv<W: Write>(rows: &[EdgeExperimentRow], mut out: W) -> Result<()> {
    writeln!(out, "{EDGE_CSV_HEADER}")?;
    for r in rows {
        writeln!(out, "{}", r.csv_line())?;
    }
    Ok(())
}

/// (mean, sample standard deviation) of the ratio column.
pub fn ratio_summary(rows: &[EdgeExperimentRow]) -> (f64, f64) {
    let r: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    let s = stats::Summary::of(&r);
    (s.mean, s.std_dev)
}
