//! Experiment runner: flat `key=value` configs, per-experiment CSV output,
//! summary lines and the built-in self test.
//!
//! Config format: one `key=value` per line, `#` starts a comment, lists are
//! comma separated. Unknown and repeated keys are errors.

use std::collections::HashMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::Rng;

use crate::concentration;
use crate::eigensolve;
use crate::ensemble::{build_pattern, sample_matrix, EntryLaw, HermitianMatrix, LawKind, PatternKind};
use crate::error::{Error, Result};
use crate::localization::{self, DelocalizationConfig};
use crate::rng;
use crate::spectral_stats::{self, EdgeConfig};
use crate::stats;
use crate::walks;

pub const THREADS_ENV: &str = "BANDLAB_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_ASSERTION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Edge,
    Semicircle,
    Localization,
    Delocalization,
    Walks,
    TraceMoment,
    NormTail,
    QuadTail,
    RhoLTail,
    NetCheck,
    MgfCheck,
    LinearizationCheck,
}

const EXPERIMENTS: [ExperimentKind; 12] = [
    ExperimentKind::Edge,
    ExperimentKind::Semicircle,
    ExperimentKind::Localization,
    ExperimentKind::Delocalization,
    ExperimentKind::Walks,
    ExperimentKind::TraceMoment,
    ExperimentKind::NormTail,
    ExperimentKind::QuadTail,
    ExperimentKind::RhoLTail,
    ExperimentKind::NetCheck,
    ExperimentKind::MgfCheck,
    ExperimentKind::LinearizationCheck,
];

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Edge => "edge",
            ExperimentKind::Semicircle => "semicircle",
            ExperimentKind::Localization => "localization",
            ExperimentKind::Delocalization => "delocalization",
            ExperimentKind::Walks => "walks",
            ExperimentKind::TraceMoment => "trace_moment",
            ExperimentKind::NormTail => "norm_tail",
            ExperimentKind::QuadTail => "quad_tail",
            ExperimentKind::RhoLTail => "rhoL_tail",
            ExperimentKind::NetCheck => "net_check",
            ExperimentKind::MgfCheck => "mgf_check",
            ExperimentKind::LinearizationCheck => "linearization_check",
        }
    }

    pub fn all() -> &'static [ExperimentKind] {
        &EXPERIMENTS
    }

    fn parse(s: &str) -> Option<Self> {
        EXPERIMENTS.iter().copied().find(|e| e.name() == s)
    }

    /// Experiments driven by an (n, w) grid.
    fn uses_grid(&self) -> bool {
        !matches!(
            self,
            ExperimentKind::Walks | ExperimentKind::NetCheck | ExperimentKind::MgfCheck | ExperimentKind::LinearizationCheck
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Threads {
    Auto,
    Count(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZDirection {
    /// Along the first coordinate axis.
    Axis,
    /// Along (1, …, 1)/√n.
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub law: EntryLaw,
    pub pattern: PatternKind,
    pub n: Vec<usize>,
    /// Empty: w = n (full pattern only).
    pub w: Vec<usize>,
    pub k: Vec<usize>,
    /// Empty: experiment default.
    pub l: Vec<usize>,
    /// c in L = max(1, floor(W / (c ln N))).
    pub l_rule_c: f64,
    pub eta: f64,
    pub kappa: f64,
    pub t_grid: Vec<f64>,
    pub epsilon: f64,
    /// None: the law's declared δ.
    pub delta: Option<f64>,
    pub r_grid: Vec<f64>,
    /// |z| as fractions of τ.
    pub z_scale: Vec<f64>,
    pub z_direction: ZDirection,
    pub bins: usize,
    pub trials: usize,
    pub master_seed: u64,
    pub out_path: String,
    pub threads: Threads,
    pub budget: u128,
    pub coverage_samples: usize,
    pub matrices: usize,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        ExperimentConfig {
            experiment,
            law: EntryLaw::gaussian_real(),
            pattern: match experiment {
                ExperimentKind::NormTail | ExperimentKind::QuadTail | ExperimentKind::Localization => PatternKind::Full,
                _ => PatternKind::CyclicBand,
            },
            n: Vec::new(),
            w: Vec::new(),
            k: vec![1],
            l: Vec::new(),
            l_rule_c: 4.0,
            eta: 0.1,
            kappa: 0.9,
            t_grid: Vec::new(),
            epsilon: 0.2,
            delta: None,
            r_grid: (-3..=3).map(f64::from).collect(),
            z_scale: vec![0.5],
            z_direction: ZDirection::Uniform,
            bins: 80,
            trials: 1,
            master_seed: 0,
            out_path: "bandlab_out".into(),
            threads: Threads::Auto,
            budget: localization::DEFAULT_SUBSET_BUDGET,
            coverage_samples: 100_000,
            matrices: 1000,
        }
    }

    /// (n, w) pairs: equal-length lists pair up, a single value broadcasts.
    pub fn grid(&self) -> std::result::Result<Vec<(usize, usize)>, String> {
        if self.n.is_empty() {
            return Err("n is required".into());
        }
        if self.w.is_empty() {
            return if self.pattern == PatternKind::Full {
                Ok(self.n.iter().map(|&n| (n, n)).collect())
            } else {
                Err("w is required for band patterns".into())
            };
        }
        match (self.n.len(), self.w.len()) {
            (a, b) if a == b => Ok(self.n.iter().copied().zip(self.w.iter().copied()).collect()),
            (1, _) => Ok(self.w.iter().map(|&w| (self.n[0], w)).collect()),
            (_, 1) => Ok(self.n.iter().map(|&n| (n, self.w[0])).collect()),
            (a, b) => Err(format!("n has {a} values and w has {b}; lists must match or have one value")),
        }
    }

    /// Subset sizes for the given grid point.
    pub fn l_values(&self, n: usize, w: usize) -> Vec<usize> {
        if !self.l.is_empty() {
            return self.l.clone();
        }
        match self.experiment {
            ExperimentKind::Localization => (1..=n).filter(|&l| localization::binomial(n, l) <= self.budget).collect(),
            _ => vec![localization::default_l(n, w, self.l_rule_c)],
        }
    }

    /// Key/value lines that parse back to this config.
    pub fn to_text(&self) -> String {
        let list = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let flist = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            s.push_str(k);
            s.push('=');
            s.push_str(&v);
            s.push('\n');
        };
        put("experiment", self.experiment.name().into());
        put("law", self.law.to_string());
        put("moment_c", self.law.moment.c.to_string());
        put("moment_alpha", self.law.moment.alpha.to_string());
        put("subgauss_delta", self.law.subgauss.delta.to_string());
        put("subgauss_k", self.law.subgauss.k.to_string());
        put("pattern", self.pattern.name().into());
        put("n", list(&self.n));
        put("w", list(&self.w));
        put("k", list(&self.k));
        put("L", if self.l.is_empty() { "auto".into() } else { list(&self.l) });
        put("l_rule_c", self.l_rule_c.to_string());
        put("eta", self.eta.to_string());
        put("kappa", self.kappa.to_string());
        put("t_grid", flist(&self.t_grid));
        put("epsilon", self.epsilon.to_string());
        put("delta", self.delta.map_or("auto".into(), |d| d.to_string()));
        put("r_grid", flist(&self.r_grid));
        put("z_scale", flist(&self.z_scale));
        put(
            "z_direction",
            match self.z_direction {
                ZDirection::Axis => "axis",
                ZDirection::Uniform => "uniform",
            }
            .into(),
        );
        put("bins", self.bins.to_string());
        put("trials", self.trials.to_string());
        put("master_seed", self.master_seed.to_string());
        put("out_path", self.out_path.clone());
        put(
            "threads",
            match self.threads {
                Threads::Auto => "auto".into(),
                Threads::Count(k) => k.to_string(),
            },
        );
        put("budget", self.budget.to_string());
        put("coverage_samples", self.coverage_samples.to_string());
        put("matrices", self.matrices.to_string());
        s
    }

    /// `to_text` as a commented header block followed by the pairs.
    pub fn resolved_block(&self) -> String {
        format!("# resolved config\n{}# end resolved config\n", self.to_text())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "config error at line {l}: {}", self.message),
            None => write!(f, "config error: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

const KEYS: &[&str] = &[
    "experiment",
    "law",
    "moment_c",
    "moment_alpha",
    "subgauss_delta",
    "subgauss_k",
    "pattern",
    "n",
    "w",
    "k",
    "L",
    "l_rule_c",
    "eta",
    "kappa",
    "t_grid",
    "epsilon",
    "delta",
    "r_grid",
    "z_scale",
    "z_direction",
    "bins",
    "trials",
    "master_seed",
    "out_path",
    "threads",
    "budget",
    "coverage_samples",
    "matrices",
];

fn parse_law(s: &str) -> std::result::Result<EntryLaw, String> {
    let kind = match s {
        "gaussian" | "gaussian_real" => LawKind::GaussianReal,
        "gaussian_complex" => LawKind::GaussianComplex,
        "rademacher" => LawKind::Rademacher,
        "uniform" => LawKind::UniformCentered,
        _ => {
            let inner = s
                .strip_prefix("truncated_gaussian(")
                .and_then(|r| r.strip_suffix(')'))
                .ok_or_else(|| format!("unknown law '{s}'"))?;
            let cutoff: f64 = inner.trim().parse().map_err(|_| format!("bad truncation cutoff '{inner}'"))?;
            LawKind::TruncatedGaussian { cutoff }
        }
    };
    EntryLaw::new(kind).map_err(|e| e.to_string())
}

fn parse_pattern(s: &str) -> std::result::Result<PatternKind, String> {
    match s {
        "cyclic_band" | "cyclic" => Ok(PatternKind::CyclicBand),
        "standard_band" | "band" => Ok(PatternKind::StandardBand),
        "full" => Ok(PatternKind::Full),
        _ => Err(format!("unknown pattern '{s}' (cyclic_band, standard_band, full)")),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, s: &str) -> std::result::Result<T, String> {
    s.parse().map_err(|_| format!("malformed value '{s}' for {key}"))
}

fn parse_list<T: std::str::FromStr>(key: &str, s: &str) -> std::result::Result<Vec<T>, String> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|p| parse_num(key, p.trim())).collect()
}

/// Parses and validates a config. Errors carry the line of the offending key.
pub fn parse_config(text: &str) -> std::result::Result<ExperimentConfig, ConfigError> {
    let mut values: HashMap<&str, (usize, String)> = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| ConfigError {
            line: Some(line_no),
            message,
        };
        let (key, value) = line.split_once('=').ok_or_else(|| err(format!("expected key=value, got '{line}'")))?;
        let key = key.trim();
        let Some(&known) = KEYS.iter().find(|k| **k == key) else {
            return Err(err(format!("unknown key '{key}'")));
        };
        if let Some((first, _)) = values.get(known) {
            return Err(err(format!("key '{key}' repeated (first set at line {first})")));
        }
        values.insert(known, (line_no, value.trim().to_string()));
    }

    let line_of = |k: &str| values.get(k).map(|(l, _)| *l);
    let at = |k: &str| {
        let line = line_of(k);
        move |message: String| ConfigError { line, message }
    };
    let get = |k: &str| values.get(k).map(|(_, v)| v.as_str());

    let experiment = match get("experiment") {
        None => {
            return Err(ConfigError {
                line: None,
                message: "missing key 'experiment'".into(),
            })
        }
        Some(v) => ExperimentKind::parse(v).ok_or_else(|| {
            let names: Vec<&str> = EXPERIMENTS.iter().map(|e| e.name()).collect();
            at("experiment")(format!("unknown experiment '{v}' (one of {})", names.join(", ")))
        })?,
    };
    let mut cfg = ExperimentConfig::new(experiment);

    if let Some(v) = get("law") {
        cfg.law = parse_law(v).map_err(at("law"))?;
    }
    if get("moment_c").is_some() || get("moment_alpha").is_some() {
        let c = get("moment_c").map_or(Ok(cfg.law.moment.c), |v| parse_num("moment_c", v)).map_err(at("moment_c"))?;
        let a = get("moment_alpha")
            .map_or(Ok(cfg.law.moment.alpha), |v| parse_num("moment_alpha", v))
            .map_err(at("moment_alpha"))?;
        cfg.law = cfg.law.with_moment_profile(c, a).map_err(|e| at("moment_c")(e.to_string()))?;
    }
    if get("subgauss_delta").is_some() || get("subgauss_k").is_some() {
        let d = get("subgauss_delta")
            .map_or(Ok(cfg.law.subgauss.delta), |v| parse_num("subgauss_delta", v))
            .map_err(at("subgauss_delta"))?;
        let k = get("subgauss_k").map_or(Ok(cfg.law.subgauss.k), |v| parse_num("subgauss_k", v)).map_err(at("subgauss_k"))?;
        cfg.law = cfg.law.with_subgauss_profile(d, k).map_err(|e| at("subgauss_delta")(e.to_string()))?;
    }
    if let Some(v) = get("pattern") {
        cfg.pattern = parse_pattern(v).map_err(at("pattern"))?;
    }
    macro_rules! list {
        ($key:literal, $field:ident) => {
            if let Some(v) = get($key) {
                cfg.$field = parse_list($key, v).map_err(at($key))?;
            }
        };
    }
    macro_rules! num {
        ($key:literal, $field:ident) => {
            if let Some(v) = get($key) {
                cfg.$field = parse_num($key, v).map_err(at($key))?;
            }
        };
    }
    list!("n", n);
    list!("w", w);
    list!("k", k);
    if let Some(v) = get("L") {
        cfg.l = if v == "auto" { Vec::new() } else { parse_list("L", v).map_err(at("L"))? };
    }
    num!("l_rule_c", l_rule_c);
    num!("eta", eta);
    num!("kappa", kappa);
    list!("t_grid", t_grid);
    num!("epsilon", epsilon);
    if let Some(v) = get("delta") {
        cfg.delta = if v == "auto" { None } else { Some(parse_num("delta", v).map_err(at("delta"))?) };
    }
    list!("r_grid", r_grid);
    list!("z_scale", z_scale);
    if let Some(v) = get("z_direction") {
        cfg.z_direction = match v {
            "axis" => ZDirection::Axis,
            "uniform" => ZDirection::Uniform,
            _ => return Err(at("z_direction")(format!("z_direction must be axis or uniform, got '{v}'"))),
        };
    }
    num!("bins", bins);
    num!("trials", trials);
    num!("master_seed", master_seed);
    if let Some(v) = get("out_path") {
        if v.is_empty() {
            return Err(at("out_path")("out_path is empty".into()));
        }
        cfg.out_path = v.to_string();
    }
    if let Some(v) = get("threads") {
        cfg.threads = if v == "auto" {
            Threads::Auto
        } else {
            match parse_num::<usize>("threads", v).map_err(at("threads"))? {
                0 => return Err(at("threads")("threads must be positive or auto".into())),
                k => Threads::Count(k),
            }
        };
    }
    num!("budget", budget);
    num!("coverage_samples", coverage_samples);
    num!("matrices", matrices);

    validate(&cfg, &|k| line_of(k))?;
    Ok(cfg)
}

/// Domain checks run before any computation.
fn validate(cfg: &ExperimentConfig, line_of: &dyn Fn(&str) -> Option<usize>) -> std::result::Result<(), ConfigError> {
    let fail = |key: &str, message: String| Err(ConfigError {
        line: line_of(key),
        message,
    });
    use ExperimentKind::*;
    if cfg.trials == 0 {
        return fail("trials", "trials must be positive".into());
    }
    if cfg.experiment.uses_grid() {
        let grid = match cfg.grid() {
            Ok(g) => g,
            Err(m) => return fail(if cfg.n.is_empty() { "n" } else { "w" }, m),
        };
        for &(n, w) in &grid {
            if let Err(e) = build_pattern(cfg.pattern.clone(), n, w) {
                return fail(if line_of("w").is_some() { "w" } else { "n" }, root_message(&e));
            }
            if cfg.l.iter().any(|&l| l == 0 || l > n) {
                return fail("L", format!("L values must lie in 1..={n}"));
            }
        }
        match cfg.experiment {
            Semicircle if cfg.bins == 0 => return fail("bins", "bins must be positive".into()),
            Localization => {
                for &(n, w) in &grid {
                    for l in cfg.l_values(n, w) {
                        let count = localization::binomial(n, l);
                        if count > cfg.budget {
                            return fail("L", format!("binomial({n}, {l}) = {count} exceeds budget {}", cfg.budget));
                        }
                    }
                }
            }
            Delocalization => {
                if let Err(e) = localization::check_window_parameters(cfg.eta, cfg.kappa) {
                    return fail("kappa", root_message(&e));
                }
                if !(cfg.l_rule_c > 0.0) {
                    return fail("l_rule_c", "l_rule_c must be positive".into());
                }
            }
            TraceMoment if cfg.k.is_empty() || cfg.k.contains(&0) => return fail("k", "k values must be positive".into()),
            NormTail | QuadTail | RhoLTail => {
                if cfg.t_grid.is_empty() {
                    return fail("t_grid", "t_grid is required".into());
                }
                if cfg.t_grid.iter().any(|t| !t.is_finite()) {
                    return fail("t_grid", "thresholds must be finite".into());
                }
                if cfg.experiment == RhoLTail && grid.iter().any(|&(n, _)| n < 2) {
                    return fail("n", "ρ_L tail needs n >= 2".into());
                }
            }
            _ => {}
        }
        return Ok(());
    }
    match cfg.experiment {
        Walks => {
            if cfg.k.is_empty() || cfg.k.iter().any(|&k| k == 0 || k > walks::DEFAULT_K_LIMIT) {
                return fail("k", format!("k values must lie in 1..={}", walks::DEFAULT_K_LIMIT));
            }
        }
        NetCheck => {
            if cfg.n.is_empty() || cfg.n.iter().any(|&n| n == 0 || n > 4) {
                return fail("n", "net_check needs n values in 1..=4".into());
            }
            if !(cfg.epsilon > 0.0 && cfg.epsilon < 0.25) {
                return fail("epsilon", format!("epsilon must lie in (0, 1/4), got {}", cfg.epsilon));
            }
            if cfg.coverage_samples == 0 {
                return fail("coverage_samples", "coverage_samples must be positive".into());
            }
        }
        MgfCheck => {
            if cfg.law.is_complex() {
                return fail("law", "mgf_check needs a real law".into());
            }
            let delta = cfg.delta.unwrap_or(cfg.law.subgauss.delta);
            if !(delta > 0.0) || cfg.law.exp_sq_moment(delta).is_none() {
                return fail("delta", format!("E exp(δX²) diverges for {} at δ = {delta}", cfg.law));
            }
            if cfg.r_grid.is_empty() {
                return fail("r_grid", "r_grid is empty".into());
            }
        }
        LinearizationCheck => {
            if cfg.n.is_empty() || cfg.n.contains(&0) {
                return fail("n", "n values must be positive".into());
            }
            if cfg.z_scale.is_empty() || cfg.z_scale.iter().any(|s| !(0.0..=1.0).contains(s)) {
                return fail("z_scale", "z_scale values must lie in [0, 1]".into());
            }
            if cfg.trials < 2 {
                return fail("trials", "linearization_check needs at least 2 trials".into());
            }
        }
        _ => {}
    }
    Ok(())
}

fn root_message(e: &Error) -> String {
    match e.root() {
        Error::InvalidParameter(m) => m.clone(),
        other => other.to_string(),
    }
}

/// Exit code for an error raised while running a validated config.
pub fn exit_code(e: &Error) -> i32 {
    match e.root() {
        Error::InvalidParameter(_) | Error::BudgetExceeded { .. } | Error::BoundInvalid { .. } => EXIT_CONFIG,
        _ => EXIT_NUMERICAL,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
    pub passed: bool,
}

struct Report {
    out_dir: PathBuf,
    files: Vec<PathBuf>,
    summary: Vec<String>,
    passed: bool,
}

impl Report {
    fn file(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.out_dir.join(name);
        let f = File::create(&path)?;
        self.files.push(path);
        Ok(BufWriter::new(f))
    }

    fn line(&mut self, s: String) {
        self.summary.push(s);
    }

    fn assert(&mut self, name: &str, ok: bool) {
        self.summary.push(format!("assert {name}: {}", if ok { "pass" } else { "FAIL" }));
        self.passed &= ok;
    }
}

/// Runs `cfg` on the current rayon pool, writing CSV files into `out_dir`.
pub fn run(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutcome> {
    fs::create_dir_all(out_dir)?;
    let mut rep = Report {
        out_dir: out_dir.to_path_buf(),
        files: Vec::new(),
        summary: Vec::new(),
        passed: true,
    };
    use ExperimentKind::*;
    match cfg.experiment {
        Edge | Semicircle => run_edge(cfg, &mut rep)?,
        Localization => run_localization(cfg, &mut rep)?,
        Delocalization => run_delocalization(cfg, &mut rep)?,
        Walks => run_walks(cfg, &mut rep)?,
        TraceMoment => run_trace(cfg, &mut rep)?,
        NormTail | QuadTail | RhoLTail => run_tail(cfg, &mut rep)?,
        NetCheck => run_net(cfg, &mut rep)?,
        MgfCheck => run_mgf(cfg, &mut rep)?,
        LinearizationCheck => run_linearization(cfg, &mut rep)?,
    }
    Ok(RunOutcome {
        files: rep.files,
        summary: rep.summary,
        passed: rep.passed,
    })
}

/// Thread count: explicit flag, then the config, then the environment, then rayon's default.
pub fn resolve_threads(flag: Option<usize>, cfg: Threads) -> Option<usize> {
    flag.filter(|&k| k > 0)
        .or(match cfg {
            Threads::Count(k) => Some(k),
            Threads::Auto => None,
        })
        .or_else(|| std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse().ok()).filter(|&k| k > 0))
}

/// Runs `cfg` on a dedicated pool of `threads` workers (None: rayon default).
pub fn run_with_threads(cfg: &ExperimentConfig, threads: Option<usize>, out_dir: &Path) -> Result<RunOutcome> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = threads {
        builder = builder.num_threads(k);
    }
    let pool = builder.build().map_err(|e| Error::Construction(format!("thread pool: {e}")))?;
    pool.install(|| run(cfg, out_dir))
}

fn grid_or_err(cfg: &ExperimentConfig) -> Result<Vec<(usize, usize)>> {
    cfg.grid().map_err(Error::InvalidParameter)
}

fn grid_seed(cfg: &ExperimentConfig, g: usize) -> u64 {
    rng::derive(cfg.master_seed, &[rng::tag_hash(cfg.experiment.name()), g as u64])
}

fn run_edge(cfg: &ExperimentConfig, rep: &mut Report) -> Result<()> {
    let grid = grid_or_err(cfg)?;
    let ec = EdgeConfig {
        law: cfg.law,
        pattern: cfg.pattern.clone(),
        grid: grid.clone(),
        trials: cfg.trials,
        master_seed: cfg.master_seed,
    };
    let results = spectral_stats::edge_experiment_with_spectra(&ec)?;
    let rows: Vec<_> = results.iter().map(|(r, _)| r.clone()).collect();
    let name = if cfg.experiment == ExperimentKind::Semicircle { "semicircle.csv" } else { "edge.csv" };
    spectral_stats::write_edge_csv(&rows, rep.file(name)?)?;
    for &(n, w) in &grid {
        let point: Vec<&(spectral_stats::EdgeExperimentRow, Vec<f64>)> =
            results.iter().filter(|(r, _)| r.n == n && r.w == w).collect();
        let ratios: Vec<f64> = point.iter().map(|(r, _)| r.ratio).collect();
        let ks: Vec<f64> = point.iter().map(|(r, _)| r.ks).collect();
        let (rs, kss) = (stats::Summary::of(&ratios), stats::Summary::of(&ks));
        rep.line(format!(
            "n={n} w={w} trials={} mean_ratio={:.6} stderr_ratio={:.6} sd_ratio={:.6} mean_ks={:.6} max_ks={:.6}",
            rs.count,
            rs.mean,
            rs.std_err,
            rs.std_dev,
            kss.mean,
            ks.iter().cloned().fold(0.0, f64::max)
        ));
    }
    rep.assert(
        "ks in [0,1] and finite ratios",
        rows.iter().all(|r| (0.0..=1.0).contains(&r.ks) && r.ratio.is_finite()),
    );
    if cfg.experiment == ExperimentKind::Semicircle {
        let mut out = rep.file("semicircle_histogram.csv")?;
        writeln!(out, "{}", spectral_stats::HISTOGRAM_CSV_HEADER)?;
        for &(n, w) in &grid {
            let spectra: Vec<&[f64]> = results
                .iter()
                .filter(|(r, _)| r.n == n && r.w == w)
                .map(|(_, ev)| ev.as_slice())
                .collect();
            for b in spectral_stats::esd_histogram(&spectra, (w as f64).sqrt(), cfg.bins, 2.5)? {
                writeln!(out, "{n},{w},{:.16e},{:.16e},{:.16e},{:.16e}", b.lo, b.hi, b.empirical, b.semicircle)?;
            }
        }
        out.flush()?;
    }
    Ok(())
}

fn run_localization(cfg: &ExperimentConfig, rep: &mut Report) -> Result<()> {
    let grid = grid_or_err(cfg)?;
    let mut out = rep.file("localization.csv")?;
    let mut violations = 0;
    let mut monotone = true;
    for (g, &(n, w)) in grid.iter().enumerate() {
        let ls = cfg.l_values(n, w);
        let e = localization::lemma_experiment(&cfg.law, cfg.pattern.clone(), n, w, &ls, cfg.trials, grid_seed(cfg, g), cfg.budget)?;
        e.write_csv(&mut out, g == 0)?;
        rep.line(format!(
            "n={n} w={w} trials={} L={:?} violations={} monotone={}",
            cfg.trials,
            ls,
            e.violations(),
            e.monotone()
        ));
        violations += e.violations();
        monotone &= e.monotone();
    }
    out.flush()?;
    rep.assert("zero eigenvalue-bound violations", violations == 0);
    rep.assert("rho_L monotone in L", monotone);
    Ok(())
}

fn run_delocalization(cfg: &ExperimentConfig, rep: &mut Report) -> Result<()> {
    let grid = grid_or_err(cfg)?;
    let mut out = rep.file("delocalization.csv")?;
    let mut violations = 0;
    let mut first = true;
    for (g, &(n, w)) in grid.iter().enumerate() {
        for l in cfg.l_values(n, w) {
            let dc = DelocalizationConfig {
                law: cfg.law,
                pattern: cfg.pattern.clone(),
                n,
                w,
                l,
                eta: cfg.eta,
                kappa: cfg.kappa,
                trials: cfg.trials,
                master_seed: grid_seed(cfg, g),
            };
            let r = localization::delocalization_experiment(&dc)?;
            let mut buf = Vec::new();
            r.write_csv(&mut buf)?;
            let text = String::from_utf8(buf).expect("ascii csv");
            let body = if first { text.as_str() } else { text.split_once('\n').map_or("", |(_, rest)| rest) };
            out.write_all(body.as_bytes())?;
            first = false;
            rep.line(format!(
                "n={n} w={w} L={l} eta={} kappa={} in_window={} localized={} violations={}",
                cfg.eta,
                cfg.kappa,
                r.total_in_window(),
                r.total_localized(),
                r.violations()
            ));
            violations += r.violations();
        }
    }
    out.flush()?;
    rep.assert("no localized eigenvector in the spectral window", violations == 0);
    Ok(())
}

fn run_walks(cfg: &ExperimentConfig, rep: &mut Report) -> Result<()> {
    let mut classes_out = rep.file("walks_classes.csv")?;
    writeln!(classes_out, "k,word,t,l,m")?;
    let mut counts_out = rep.file("walks_counts.csv")?;
    writeln!(counts_out, "{}", walks::COUNT_CSV_HEADER)?;
    let mut all_ok = true;
    for &k in &cfg.k {
        let classes = walks::enumerate_classes(k)?;
        for c in &classes {
            writeln!(classes_out, "{k},{}", walks::class_dump_line(c))?;
        }
        let fk = walks::verify_fk_inequalities(k)?;
        let rows = walks::count_bound_check(k)?;
        for r in &rows {
            writeln!(counts_out, "{},{},{},{:.16e},{}", r.k, r.t, r.count, r.bound, r.ok)?;
        }
        let counts: Vec<String> = rows.iter().map(|r| format!("{}:{}", r.t, r.count)).collect();
        rep.line(format!(
            "k={k} classes={} counts_by_t={} inequalities_ok={} counts_ok={}",
            classes.len(),
            counts.join(" "),
            fk.ok(),
            rows.iter().all(|r| r.ok)
        ));
        all_ok &= fk.ok() && rows.iter().all(|r| r.ok);
    }
    classes_out.flush()?;
    counts_out.flush()?;
    rep.assert("walk inequalities and count bounds", all_ok);
    Ok(())
}

pub const TRACE_CSV_HEADER: &str = "n,w,k,trials,mean,std_err,bound,threshold,bound_valid,ok";

fn run_trace(cfg: &ExperimentConfig, rep: &mut Report) -> Result<()> {
    let grid = grid_or_err(cfg)?;
    let mut out = rep.file("trace_moment.csv")?;
    writeln!(out, "{TRACE_CSV_HEADER}")?;
    let mut ok_all = true;
    for (g, &(n, w)) in grid.iter().enumerate() {
        let pattern = build_pattern(cfg.pattern.clone(), n, w)?;
        for &k in &cfg.k {
            let est = walks::trace_moment_mc(&cfg.law, &pattern, k, cfg.trials, rng::derive(grid_seed(cfg, g), &[k as u64]))?;
            let (bound, threshold, valid) = match walks::trace_moment_bound(n, w, k, cfg.law.moment.c, cfg.law.moment.alpha) {
                Ok(b) => (b.value, b.threshold, true),
                Err(Error::BoundInvalid { threshold, .. }) => (f64::NAN, threshold, false),
                Err(e) => return Err(e),
            };
            let ok = !valid || est.mean <= bound;
            writeln!(
                out,
                "{n},{w},{k},{},{:.16e},{:.16e},{:.16e},{:.16e},{valid},{ok}",
                cfg.trials, est.mean, est.std_err, bound, threshold
            )?;
            rep.line(format!(
                "n={n} w={w} k={k} mean={:.6e} stderr={:.3e} bound={}",
                est.mean,
                est.std_err,
                if valid { format!("{bound:.6e}") } else { format!("invalid (W <= {threshold:.3e})") }
            ));
            ok_all &= ok;
        }
    }
    out.flush()?;
    rep.assert("estimate <= bound where the bound is valid", ok_all);
    Ok(())
}

fn run_tail(cfg: &ExperimentConfig, rep: &mut Report) -> Result<()> {
    let grid = grid_or_err(cfg)?;
    let name = format!("{}.csv", cfg.experiment.name());
    let mut out = rep.file(&name)?;
    let mut first = true;
    for (g, &(n, w)) in grid.iter().enumerate() {
        let pattern = build_pattern(cfg.pattern.clone(), n, w)?;
        let seed = grid_seed(cfg, g);
        let ests = match cfg.experiment {
            ExperimentKind::NormTail => vec![concentration::norm_tail_experiment(&cfg.law, &pattern, &cfg.t_grid, cfg.trials, seed)?],
            ExperimentKind::QuadTail => {
                let z = direction(cfg.z_direction, n, 1.0);
                vec![concentration::quadratic_form_tail(&cfg.law, &pattern, &z, &cfg.t_grid, cfg.trials, seed)?]
            }
            _ => cfg
                .l_values(n, w)
                .into_iter()
                .map(|l| concentration::rho_l_tail_experiment(&cfg.law, &pattern, l, &cfg.t_grid, cfg.trials, seed, cfg.budget))
                .collect::<Result<_>>()?,
        };
        for est in ests {
            est.write_csv(&mut out, first)?;
            first = false;
            let probs: Vec<String> = est
                .thresholds
                .iter()
                .zip(&est.exceed_prob)
                .map(|(t, p)| format!("{t}:{p:.4}"))
                .collect();
            let fit = est
                .fit
                .map_or("fit=none".into(), |f| format!("fit_slope={:.4} fit_shift={:.4}", f.slope, f.shift));
            let search = if est.search_trials > 0 {
                format!(" search_trials={} (lower bounds)", est.search_trials)
            } else {
                String::new()
            };
            rep.line(format!(
                "statistic={} n={n} w={w} L={} trials={} exceed={} {fit}{search}",
                est.statistic.name(),
                est.l,
                est.trials,
                probs.join(" ")
            ));
        }
    }
    out.flush()?;
    Ok(())
}

fn direction(d: ZDirection, n: usize, norm: f64) -> Vec<Complex64> {
    match d {
        ZDirection::Axis => {
            let mut z = vec![Complex64::new(0.0, 0.0); n];
            z[0] = Complex64::new(norm, 0.0);
            z
        }
        ZDirection::Uniform => vec![Complex64::new(norm / (n as f64).sqrt(), 0.0); n],
    }
}

fn run_net(cfg: &ExperimentConfig, rep: &mut Report) -> Result<()> {
    let mut nets = rep.file("net.csv")?;
    writeln!(nets, "{}", concentration::NET_CSV_HEADER)?;
    let mut checks = rep.file("net_checks.csv")?;
    writeln!(checks, "n,matrix,lhs,rhs,ok")?;
    let mut ok_all = true;
    for &n in &cfg.n {
        let e = concentration::net_experiment(n, cfg.epsilon, cfg.coverage_samples, cfg.matrices, cfg.master_seed)?;
        writeln!(nets, "{}", e.net.csv_line())?;
        for (m, c) in e.checks.iter().enumerate() {
            writeln!(checks, "{n},{m},{:.16e},{:.16e},{}", c.lhs, c.rhs, c.ok)?;
        }
        let size_ok = e.net.size() as f64 <= e.net.bound;
        rep.line(format!(
            "n={n} epsilon={} size={} bound={:.3e} coverage_ok={} coverage_passes={} matrices={} violations={}",
            cfg.epsilon,
            e.net.size(),
            e.net.bound,
            e.net.coverage_ok,
            e.net.coverage_passes,
            e.checks.len(),
            e.violations()
        ));
        ok_all &= size_ok && e.net.coverage_ok && e.violations() == 0;
    }
    nets.flush()?;
    checks.flush()?;
    rep.assert("net size, coverage and lambda_max bound", ok_all);
    Ok(())
}

fn run_mgf(cfg: &ExperimentConfig, rep: &mut Report) -> Result<()> {
    let delta = cfg.delta.unwrap_or(cfg.law.subgauss.delta);
    let report = concentration::mgf_bound_check(&cfg.law, delta, &cfg.r_grid)?;
    let mut out = rep.file("mgf.csv")?;
    writeln!(out, "{}", concentration::MGF_CSV_HEADER)?;
    for r in &report.rows {
        writeln!(out, "{},{},{},{:.16e},{:.16e},{:.16e},{}", cfg.law, delta, r.r, r.lhs, r.mid, r.outer, r.ok)?;
    }
    out.flush()?;
    rep.line(format!(
        "law={} delta={delta} E_exp_dX2={:.6} points={} violations={}",
        cfg.law,
        report.exp_sq,
        report.rows.len(),
        report.violations()
    ));
    rep.assert("lhs <= mid <= outer", report.violations() == 0);
    Ok(())
}

fn run_linearization(cfg: &ExperimentConfig, rep: &mut Report) -> Result<()> {
    let mut out = rep.file("linearization.csv")?;
    writeln!(out, "n,{}", concentration::LIN_CSV_HEADER)?;
    let mut ok_all = true;
    for (g, &n) in cfg.n.iter().enumerate() {
        let (tau, _) = concentration::linearization_constants(&cfg.law, false);
        let zs: Vec<Vec<Complex64>> = cfg.z_scale.iter().map(|&s| direction(cfg.z_direction, n, s * tau)).collect();
        let rows = concentration::gaussian_linearization_check(&cfg.law, n, &zs, cfg.trials, grid_seed(cfg, g))?;
        for r in &rows {
            writeln!(
                out,
                "{n},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                r.z_norm, r.tau, r.c, r.estimate, r.std_err, r.bound, r.ok
            )?;
            rep.line(format!(
                "n={n} |z|={:.6} tau={:.6} C={:.4} estimate={:.6} stderr={:.2e} bound={:.6} ok={}",
                r.z_norm, r.tau, r.c, r.estimate, r.std_err, r.bound, r.ok
            ));
            ok_all &= r.ok;
        }
    }
    out.flush()?;
    rep.assert("estimate - 4 stderr <= exp(C|z|^2)", ok_all);
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfCheck {
    pub name: &'static str,
    pub ok: bool,
    pub detail: String,
}

/// Fast invariant suite covering every module.
pub fn selftest() -> Vec<SelfCheck> {
    let mut out = Vec::new();
    let mut check = |name: &'static str, f: &dyn Fn() -> Result<(bool, String)>| {
        let (ok, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
        out.push(SelfCheck { name, ok, detail });
    };

    check("toeplitz eigenvalues", &|| {
        let n = 100;
        let mut a = vec![0.0; n * n];
        for i in 0..n - 1 {
            a[i * n + i + 1] = 1.0;
            a[(i + 1) * n + i] = 1.0;
        }
        let ev = eigensolve::eigenvalues(&HermitianMatrix::from_real_dense(n, a)?)?;
        let mut exact: Vec<f64> = (1..=n).map(|j| 2.0 * (j as f64 * std::f64::consts::PI / (n + 1) as f64).cos()).collect();
        exact.sort_by(f64::total_cmp);
        let err = ev.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        Ok((err <= 1e-8, format!("max error {err:.2e}")))
    });

    check("eigenvector residuals", &|| {
        let p = build_pattern(PatternKind::CyclicBand, 60, 11)?;
        let x = sample_matrix(&EntryLaw::gaussian_complex(), &p, 1);
        let s = eigensolve::eigen_full(&x, true, eigensolve::default_tol(&x))?;
        let trace_err = (s.eigenvalues.iter().sum::<f64>() - x.trace()).abs();
        Ok((trace_err < 1e-9 * x.frobenius_norm(), format!("residual {:.2e}", s.residual_bound)))
    });

    check("semicircle ks", &|| {
        let n = 200;
        let ev: Vec<f64> = (1..=n)
            .map(|j| spectral_stats::semicircle_quantile((j as f64 - 0.5) / n as f64))
            .collect();
        let d = spectral_stats::ks_distance(&ev, 1.0)?;
        Ok((d <= 0.5 / n as f64 + 1e-12, format!("ks {d:.2e}")))
    });

    check("diagonal edge ratio", &|| {
        let rows = spectral_stats::edge_experiment(&EdgeConfig {
            law: EntryLaw::rademacher(),
            pattern: PatternKind::CyclicBand,
            grid: vec![(50, 1)],
            trials: 2,
            master_seed: 3,
        })?;
        Ok((rows.iter().all(|r| r.ratio == 1.0), "ratio 1".into()))
    });

    check("eigenvalue bound for localized vectors", &|| {
        let ls: Vec<usize> = (1..=4).collect();
        let e = localization::lemma_experiment(&EntryLaw::gaussian_complex(), PatternKind::Full, 8, 8, &ls, 10, 5, 1_000_000)?;
        Ok((
            e.violations() == 0 && e.monotone(),
            format!("violations {} monotone {}", e.violations(), e.monotone()),
        ))
    });

    check("localization length vs brute force", &|| {
        let mut r = rng::stream(11, 0);
        let mut bad = 0;
        for _ in 0..200 {
            let n = r.gen_range(1..=8);
            let mut abs2: Vec<f64> = (0..n).map(|_| r.gen::<f64>()).collect();
            let total: f64 = abs2.iter().sum();
            abs2.iter_mut().for_each(|v| *v /= total);
            let eta: f64 = r.gen_range(0.0..0.9);
            let mut best = n;
            for mask in 0u32..(1 << n) {
                let outside: f64 = (0..n).filter(|&j| mask >> j & 1 == 0).map(|j| abs2[j]).sum();
                if outside <= eta + localization::MASS_TOL {
                    best = best.min((mask.count_ones() as usize).max(1));
                }
            }
            bad += usize::from(localization::loc_length_abs2(&abs2, eta) != best);
        }
        Ok((bad == 0, format!("{bad} mismatches")))
    });

    check("walk census", &|| {
        let mut ok = walks::class_counts(&walks::enumerate_classes(1)?, 1) == vec![(1, 1), (2, 1)];
        for k in 1..=3 {
            ok &= walks::verify_fk_inequalities(k)?.ok();
            ok &= walks::count_bound_check(k)?.iter().all(|r| r.ok);
        }
        Ok((ok, "k <= 3".into()))
    });

    check("trace bound arithmetic", &|| {
        let b = walks::trace_moment_bound(100, 100, 1, 1.0, 0.0)?;
        let invalid = matches!(walks::trace_moment_bound(100, 50, 1, 1.0, 0.0), Err(Error::BoundInvalid { .. }));
        Ok(((b.value - 40000.0 / 0.36).abs() < 1e-6 && invalid, format!("bound {:.2}", b.value)))
    });

    check("scalar mgf chain", &|| {
        let grid: Vec<f64> = (-3..=3).map(f64::from).collect();
        let v = concentration::mgf_bound_check(&EntryLaw::rademacher(), 1.0, &grid)?.violations()
            + concentration::mgf_bound_check(&EntryLaw::gaussian_real(), 0.25, &grid)?.violations();
        Ok((v == 0, format!("{v} violations")))
    });

    check("circle net", &|| {
        let net = concentration::build_epsilon_net(1, 0.2, &mut rng::stream(1, 0), 10_000)?;
        Ok((
            net.coverage_ok && net.size() as f64 <= net.bound,
            format!("size {}", net.size()),
        ))
    });

    check("linearization closed form", &|| {
        let law = EntryLaw::rademacher();
        let (tau, _) = concentration::linearization_constants(&law, false);
        let z = direction(ZDirection::Axis, 3, tau);
        let r = concentration::gaussian_linearization_check(&law, 3, &[z], 100, 1)?;
        Ok((
            r[0].ok && (r[0].estimate - (tau * tau).exp()).abs() < 1e-12,
            format!("estimate {:.6}", r[0].estimate),
        ))
    });

    check("seeded sampling is reproducible", &|| {
        let p = build_pattern(PatternKind::StandardBand, 40, 7)?;
        let a = sample_matrix(&EntryLaw::gaussian_complex(), &p, 9);
        let b = sample_matrix(&EntryLaw::gaussian_complex(), &p, 9);
        Ok((a == b, String::new()))
    });

    check("config round trip", &|| {
        let cfg = parse_config("experiment=edge\nn=1000\nw=101\ntrials=5\nmaster_seed=42").map_err(|e| Error::invalid(e.to_string()))?;
        let again = parse_config(&cfg.resolved_block()).map_err(|e| Error::invalid(e.to_string()))?;
        Ok((cfg == again, String::new()))
    });

    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn example_config_parses() {
        let cfg = parse_config("experiment=edge\nn=1000\nw=101\ntrials=5\nmaster_seed=42").unwrap();
        assert_eq!(cfg.experiment, ExperimentKind::Edge);
        assert_eq!(cfg.grid().unwrap(), vec![(1000, 101)]);
        assert_eq!(cfg.trials, 5);
        assert_eq!(cfg.master_seed, 42);
    }

    #[test]
    fn even_band_width_rejected() {
        let e = parse_config("experiment=edge\npattern=standard_band\nn=200\nw=100").unwrap_err();
        assert_eq!(e.line, Some(4));
        assert!(e.message.contains("band width must be odd"), "{e}");
    }

    #[test]
    fn window_parameters_checked() {
        let e = parse_config("experiment=delocalization\nn=100\nw=11\neta=0.4\nkappa=0.5").unwrap_err();
        assert!(e.message.contains("sqrt(eta/(1-eta))"), "{e}");
        assert_eq!(e.line, Some(5));
    }

    #[test]
    fn unknown_and_repeated_keys() {
        let e = parse_config("experiment=edge\n# comment\nfoo=1").unwrap_err();
        assert_eq!(e.line, Some(3));
        assert!(e.message.contains("unknown key 'foo'"));
        let e = parse_config("experiment=edge\nn=10\nn=11").unwrap_err();
        assert_eq!(e.line, Some(3));
        let e = parse_config("experiment=edge\nn=ten\nw=3").unwrap_err();
        assert!(e.message.contains("malformed"));
        let e = parse_config("n=10").unwrap_err();
        assert_eq!(e.line, None);
        assert!(parse_config("experiment=edge\njunk").unwrap_err().message.contains("key=value"));
    }

    #[test]
    fn comments_and_lists() {
        let cfg = parse_config("experiment=norm_tail # trailing\n\n  n = 50, 100 ,200\nt_grid=0,2.1,3\ntrials=10").unwrap();
        assert_eq!(cfg.n, vec![50, 100, 200]);
        assert_eq!(cfg.grid().unwrap(), vec![(50, 50), (100, 100), (200, 200)]);
        assert_eq!(cfg.t_grid, vec![0.0, 2.1, 3.0]);
    }

    #[test]
    fn resolved_config_round_trips() {
        let texts = [
            "experiment=edge\nn=1000\nw=101\ntrials=5\nmaster_seed=42",
            "experiment=mgf_check\nlaw=truncated_gaussian(2.5)\ndelta=0.3\nr_grid=-1,0.5",
            "experiment=delocalization\nlaw=gaussian_complex\nn=256\nw=33\nL=4\neta=0.05\nkappa=0.8\nthreads=3",
            "experiment=trace_moment\nlaw=rademacher\nmoment_alpha=0\nn=100\nw=99\nk=1,2\nout_path=/tmp/x y",
            "experiment=linearization_check\nlaw=rademacher\nn=4\nz_scale=0.5,1\nz_direction=axis\ntrials=100",
        ];
        for t in texts {
            let cfg = parse_config(t).unwrap();
            let block = cfg.resolved_block();
            assert_eq!(parse_config(&block).unwrap(), cfg, "{block}");
        }
    }

    #[test]
    fn experiment_specific_validation() {
        assert!(parse_config("experiment=walks\nk=6").is_err());
        assert!(parse_config("experiment=net_check\nn=5").is_err());
        assert!(parse_config("experiment=net_check\nn=2\nepsilon=0.3").is_err());
        assert!(parse_config("experiment=mgf_check\nlaw=gaussian_complex").is_err());
        assert!(parse_config("experiment=mgf_check\nlaw=gaussian\ndelta=0.5").is_err());
        assert!(parse_config("experiment=norm_tail\nn=10").is_err());
        assert!(parse_config("experiment=edge\nn=10,20\nw=3,5,7").is_err());
        assert!(parse_config("experiment=localization\nn=30\nL=15\nbudget=1000").is_err());
        assert!(parse_config("experiment=edge\nn=10\nw=3\ntrials=0").is_err());
        assert!(parse_config("experiment=edge\nn=10\nw=3\nthreads=0").is_err());
        assert!(parse_config("experiment=bogus").is_err());
    }

    #[test]
    fn thread_resolution_order() {
        assert_eq!(resolve_threads(Some(2), Threads::Count(5)), Some(2));
        assert_eq!(resolve_threads(None, Threads::Count(5)), Some(5));
    }

    #[test]
    fn walks_run_writes_tables() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = parse_config("experiment=walks\nk=1,2,3").unwrap();
        let out = run(&cfg, dir.path()).unwrap();
        assert!(out.passed);
        let counts = fs::read_to_string(dir.path().join("walks_counts.csv")).unwrap();
        assert!(counts.lines().skip(1).all(|l| l.ends_with(",true")));
        assert_eq!(counts.lines().nth(1).unwrap(), "1,1,1,2.5600000000000000e2,true");
    }

    #[test]
    fn selftest_passes() {
        for c in selftest() {
            assert!(c.ok, "{}: {}", c.name, c.detail);
        }
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::invalid("x").context("y")), EXIT_CONFIG);
        assert_eq!(exit_code(&Error::Overflow("x".into())), EXIT_NUMERICAL);
    }
}
