//! Closed-walk equivalence classes of the moment method.
//!
//! A closed index sequence (i_1, ..., i_2k) (with i_{2k+1} = i_1) traverses the
//! undirected edges {i_l, i_{l+1}}; loops {i, i} count as edges. Its class
//! under relabeling is represented by the canonical word that numbers vertices
//! 1, 2, 3, ... in order of first appearance. A class contributes to E Tr X^{2k}
//! only if every edge is traversed at least twice.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::ensemble::{sample_matrix, Entries, EntryLaw, SparsityPattern};
use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Scalar;
use crate::stats;

/// Default largest k for exhaustive enumeration.
pub const DEFAULT_K_LIMIT: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct WalkClass {
    /// Canonical word, labels starting at 1.
    pub word: Vec<u8>,
    /// Number of distinct vertices.
    pub t: usize,
    /// Undirected edge (a <= b) → traversal count.
    pub edge_multiplicities: BTreeMap<(u8, u8), u32>,
    /// Edges traversed exactly twice.
    pub l: usize,
    /// Edges traversed at least three times.
    pub m: usize,
}

impl WalkClass {
    /// Builds the class record of a canonical word.
    pub fn from_word(word: Vec<u8>) -> Self {
        let edge_multiplicities = edge_counts(&word);
        let t = word.iter().copied().max().unwrap_or(0) as usize;
        let l = edge_multiplicities.values().filter(|&&c| c == 2).count();
        let m = edge_multiplicities.values().filter(|&&c| c >= 3).count();
        WalkClass {
            word,
            t,
            edge_multiplicities,
            l,
            m,
        }
    }

    pub fn k(&self) -> usize {
        self.word.len() / 2
    }

    /// Every edge traversed at least twice.
    pub fn is_admissible(&self) -> bool {
        self.edge_multiplicities.values().all(|&c| c >= 2)
    }

    pub fn distinct_edges(&self) -> usize {
        self.edge_multiplicities.len()
    }
}

fn edge_counts(word: &[u8]) -> BTreeMap<(u8, u8), u32> {
    let mut counts = BTreeMap::new();
    let len = word.len();
    for i in 0..len {
        let (a, b) = (word[i], word[(i + 1) % len]);
        *counts.entry((a.min(b), a.max(b))).or_insert(0) += 1;
    }
    counts
}

/// Relabels by first appearance: (7, 3, 7, 3) → (1, 2, 1, 2).
pub fn canonical_walk<T: Copy + Eq>(tuple: &[T]) -> Result<Vec<u8>> {
    if tuple.len() < 2 || tuple.len() % 2 != 0 {
        return Err(Error::invalid(format!("walk length must be even and >= 2, got {}", tuple.len())));
    }
    if tuple.len() > 254 {
        return Err(Error::invalid("walk too long for byte labels"));
    }
    let mut seen: Vec<T> = Vec::new();
    Ok(tuple
        .iter()
        .map(|x| match seen.iter().position(|y| y == x) {
            Some(p) => p as u8 + 1,
            None => {
                seen.push(*x);
                seen.len() as u8
            }
        })
        .collect())
}

/// All admissible classes of length 2k, sorted by (t, word).
pub fn enumerate_classes(k: usize) -> Result<Vec<WalkClass>> {
    enumerate_classes_with_limit(k, DEFAULT_K_LIMIT)
}

pub fn enumerate_classes_with_limit(k: usize, limit: usize) -> Result<Vec<WalkClass>> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if k > limit {
        return Err(Error::invalid(format!(
            "k = {k} exceeds the enumeration limit {limit}; canonical words grow like Bell(2k)"
        )));
    }
    let len = 2 * k;
    // split on the second symbol: (1, 1) or (1, 2)
    let mut classes: Vec<WalkClass> = [1u8, 2u8]
        .par_iter()
        .flat_map_iter(|&second| {
            let mut out = Vec::new();
            let mut word = vec![1u8, second];
            extend(&mut word, len, second.max(1), &mut out);
            out
        })
        .collect();
    classes.sort_by(|a, b| a.t.cmp(&b.t).then_with(|| a.word.cmp(&b.word)));
    Ok(classes)
}

/// Depth-first generation of restricted-growth words (next label ≤ 1 + max).
fn extend(word: &mut Vec<u8>, len: usize, max: u8, out: &mut Vec<WalkClass>) {
    if word.len() == len {
        let class = WalkClass::from_word(word.clone());
        if class.is_admissible() {
            out.push(class);
        }
        return;
    }
    // a vertex introduced now must still be revisited; prune words with more
    // distinct vertices than the remaining length can close up
    for next in 1..=max + 1 {
        word.push(next);
        let new_max = max.max(next);
        if (new_max as usize) <= len / 2 + 1 {
            extend(word, len, new_max, out);
        }
        word.pop();
    }
}

/// #W_{2k,t} for t = 1..=k+1 (zero entries included).
pub fn class_counts(classes: &[WalkClass], k: usize) -> Vec<(usize, usize)> {
    (1..=k + 1).map(|t| (t, classes.iter().filter(|c| c.t == t).count())).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FkInequality {
    /// 2l + 3m ≤ 2k
    EdgeBudget,
    /// t ≤ l + m + 1
    Connectivity,
    /// 2k − 2l ≤ 6(k − t + 1)
    ExcessEdges,
    /// t ≤ k + 1
    VertexCount,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FkReport {
    pub k: usize,
    pub classes_checked: usize,
    pub counterexample: Option<(WalkClass, FkInequality)>,
}

impl FkReport {
    pub fn ok(&self) -> bool {
        self.counterexample.is_none()
    }
}

/// First failed inequality for a class, if any.
pub fn check_class(class: &WalkClass) -> Option<FkInequality> {
    let k = class.k() as i64;
    let (t, l, m) = (class.t as i64, class.l as i64, class.m as i64);
    if 2 * l + 3 * m > 2 * k {
        Some(FkInequality::EdgeBudget)
    } else if t > l + m + 1 {
        Some(FkInequality::Connectivity)
    } else if 2 * k - 2 * l > 6 * (k - t + 1) {
        Some(FkInequality::ExcessEdges)
    } else if t > k + 1 {
        Some(FkInequality::VertexCount)
    } else {
        None
    }
}

pub fn verify_fk_inequalities(k: usize) -> Result<FkReport> {
    let classes = enumerate_classes(k)?;
    let counterexample = classes.iter().find_map(|c| check_class(c).map(|ineq| (c.clone(), ineq)));
    Ok(FkReport {
        k,
        classes_checked: classes.len(),
        counterexample,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountRow {
    pub k: usize,
    pub t: usize,
    pub count: usize,
    /// 4^k (2k)^{6(k − t + 1)}
    pub bound: f64,
    pub ok: bool,
}

pub const COUNT_CSV_HEADER: &str = "k,t,count,bound,ok";

pub fn count_bound(k: usize, t: usize) -> f64 {
    4f64.powi(k as i32) * ((2 * k) as f64).powi(6 * (k as i32 - t as i32 + 1))
}

pub fn count_bound_check(k: usize) -> Result<Vec<CountRow>> {
    let classes = enumerate_classes(k)?;
    Ok(class_counts(&classes, k)
        .into_iter()
        .map(|(t, count)| {
            let bound = count_bound(k, t);
            CountRow {
                k,
                t,
                count,
                bound,
                ok: (count as f64) <= bound,
            }
        })
        .collect())
}

/// `word,t,l,m` line with the word space separated, e.g. `1 2 1 3,3,2,0`.
pub fn class_dump_line(c: &WalkClass) -> String {
    let w: Vec<String> = c.word.iter().map(|x| x.to_string()).collect();
    format!("{},{},{},{}", w.join(" "), c.t, c.l, c.m)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceMoment {
    pub k: usize,
    pub trials: usize,
    /// Sample mean of Tr X^{2k}.
    pub mean: f64,
    pub std_err: f64,
    /// ln of the sample mean.
    pub log_mean: f64,
}

pub const TRACE_TAG: &str = "trace_moment";

/// Monte Carlo estimate of E Tr X^{2k}. Each trial forms (X/s)^k by repeated
/// multiplication with s the maximal absolute row sum, so that
/// Tr X^{2k} = s^{2k} ||(X/s)^k||_F^2 is accumulated in log form.
pub fn trace_moment_mc(law: &EntryLaw, pattern: &SparsityPattern, k: usize, trials: usize, seed: u64) -> Result<TraceMoment> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if trials == 0 {
        return Err(Error::invalid("trials must be positive"));
    }
    let logs: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let s = rng::trial_seed(seed, TRACE_TAG, k as u64, trial as u64);
            let x = sample_matrix(law, pattern, s);
            match x.entries() {
                Entries::Real(a) => log_trace_power(a, x.n(), k),
                Entries::Complex(a) => log_trace_power(a, x.n(), k),
            }
        })
        .collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return Ok(TraceMoment {
            k,
            trials,
            mean: 0.0,
            std_err: 0.0,
            log_mean: f64::NEG_INFINITY,
        });
    }
    let scaled: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let summary = stats::Summary::of(&scaled);
    let log_mean = top + summary.mean.ln();
    let factor = top.exp();
    if !factor.is_finite() || !(summary.mean * factor).is_finite() {
        return Err(Error::Overflow(format!(
            "E Tr X^{} ≈ exp({log_mean:.3}) exceeds the double range",
            2 * k
        )));
    }
    let std_err = if trials > 1 { summary.std_err * factor } else { 0.0 };
    Ok(TraceMoment {
        k,
        trials,
        mean: summary.mean * factor,
        std_err,
        log_mean,
    })
}

fn log_trace_power<T: Scalar>(a: &[T], n: usize, k: usize) -> f64 {
    let s = (0..n)
        .map(|i| a[i * n..(i + 1) * n].iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    if s == 0.0 {
        return f64::NEG_INFINITY;
    }
    let base: Vec<T> = a.iter().map(|x| x.scale(1.0 / s)).collect();
    let mut power = base.clone();
    for _ in 1..k {
        power = matmul(&power, &base, n);
    }
    let fro2: f64 = power.iter().map(|x| x.abs2()).sum();
    fro2.ln() + 2.0 * k as f64 * s.ln()
}

fn matmul<T: Scalar>(a: &[T], b: &[T], n: usize) -> Vec<T> {
    let mut c = vec![T::zero(); n * n];
    for i in 0..n {
        let crow = &mut c[i * n..(i + 1) * n];
        for l in 0..n {
            let ail = a[i * n + l];
            if ail == T::zero() {
                continue;
            }
            for (cij, &blj) in crow.iter_mut().zip(&b[l * n..(l + 1) * n]) {
                *cij += ail * blj;
            }
        }
    }
    c
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceBound {
    /// N W^k 4^k (1 − (2k(6Ck)^α)^6 / W)^{-1}
    pub value: f64,
    pub log_value: f64,
    /// (2k(6Ck)^α)^6; the bound needs W above it.
    pub threshold: f64,
    /// Lower end ln N of the admissible k window.
    pub k_window_low: f64,
    /// Upper end W^{1/(6(1+α))}.
    pub k_window_high: f64,
}

pub fn trace_moment_bound(n: usize, w: usize, k: usize, c: f64, alpha: f64) -> Result<TraceBound> {
    if n == 0 || w == 0 || k == 0 {
        return Err(Error::invalid("n, w and k must be positive"));
    }
    let kf = k as f64;
    let threshold = (2.0 * kf * (6.0 * c * kf).powf(alpha)).powi(6);
    let wf = w as f64;
    if !(wf > threshold) {
        return Err(Error::BoundInvalid { w, threshold });
    }
    let log_value = (n as f64).ln() + kf * wf.ln() + kf * 4f64.ln() - (1.0 - threshold / wf).ln();
    Ok(TraceBound {
        value: log_value.exp(),
        log_value,
        threshold,
        k_window_low: (n as f64).ln(),
        k_window_high: wf.powf(1.0 / (6.0 * (1.0 + alpha))),
    })
}
