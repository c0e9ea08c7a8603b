//! Batch experiment runner: a plain-text config, dispatch to the modules,
//! CSV and summary artifacts.
//!
//! Config format: `key = value` lines, `#` comments, and one field block
//! between `begin fields` and `end fields` lines. Every artifact starts
//! with `#` lines echoing the parsed config, and numbers are written with
//! 17 significant digits, so identical configs give identical files.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::ergodicity::{convergence_experiment, default_checkpoints, fou_stationary_experiment, ConvergenceConfig};
use crate::error::{Error, Result};
use crate::expr::{parse_expr, Expr, Program, VectorFieldSet};
use crate::flow::{apriori_report, FlowOptions, FlowSolver};
use crate::holder::{lemma_suite, LemmaSuiteConfig, LemmaSuiteReport};
use crate::hormander::{dissipativity_check, hormander_rank, sampled_sigma_min};
use crate::malliavin::{gradient_estimator, malliavin_ensemble, tail_from_samples, GradientConfig};
use crate::noise::{fbm_covariance, fbm_sample_exact, sample_past, weighted_norm, ConditionalDrift, ConditionedNoise, HurstParams};
use crate::path::SampledPath;
use crate::rng::stream_rng;
use crate::stats::mean_stderr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    SampleFbm,
    Solve,
    Hormander,
    MalliavinTail,
    Gradient,
    Ergodicity,
    LemmaSuite,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::SampleFbm => "sample-fbm",
            Self::Solve => "solve",
            Self::Hormander => "hormander",
            Self::MalliavinTail => "malliavin-tail",
            Self::Gradient => "gradient",
            Self::Ergodicity => "ergodicity",
            Self::LemmaSuite => "lemma-suite",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "sample-fbm" => Self::SampleFbm,
            "solve" => Self::Solve,
            "hormander" => Self::Hormander,
            "malliavin-tail" => Self::MalliavinTail,
            "gradient" => Self::Gradient,
            "ergodicity" => Self::Ergodicity,
            "lemma-suite" => Self::LemmaSuite,
            _ => {
                return Err(format!(
                    "unknown experiment kind `{s}` (expected sample-fbm, solve, hormander, malliavin-tail, gradient, ergodicity or lemma-suite)"
                ))
            }
        })
    }
}

/// A parsed experiment.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub hurst: Option<HurstParams>,
    pub fields: Option<VectorFieldSet>,
    pub x0: Option<Vec<f64>>,
    pub x0_b: Option<Vec<f64>>,
    pub horizon: f64,
    pub dt: f64,
    pub n_mc: usize,
    pub seed: u64,
    /// 0 means a zero past
    pub past_horizon: f64,
    pub past_dt: f64,
    pub past_seed: Option<u64>,
    pub level: usize,
    pub radius: Option<f64>,
    pub xi: Option<Vec<f64>>,
    pub control_horizon: f64,
    pub psi: Option<(String, Expr)>,
    pub fd_step: f64,
    pub checkpoints: Option<Vec<f64>>,
    pub doubling: bool,
    pub eps_grid: Option<Vec<f64>>,
    pub write_paths: usize,
    pub dim: usize,
    pub fou_stationary: bool,
    pub n_pasts: usize,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    fn new(kind: ExperimentKind) -> Self {
        Self {
            kind,
            hurst: None,
            fields: None,
            x0: None,
            x0_b: None,
            horizon: 1.0,
            dt: 1.0 / 64.0,
            n_mc: 1,
            seed: 0,
            past_horizon: 0.0,
            past_dt: 1.0 / 32.0,
            past_seed: None,
            level: 2,
            radius: None,
            xi: None,
            control_horizon: 1.0,
            psi: None,
            fd_step: 1e-2,
            checkpoints: None,
            doubling: false,
            eps_grid: None,
            write_paths: 16,
            dim: 1,
            fou_stationary: false,
            n_pasts: 100,
            out: None,
        }
    }

    /// Seed of the sampled past; derived from `seed` unless given.
    pub fn past_seed(&self) -> u64 {
        self.past_seed.unwrap_or(self.seed ^ 0x9e37_79b9_7f4a_7c15)
    }

    /// The config in canonical `key = value` form (field block last).
    pub fn echo(&self) -> Vec<String> {
        let mut v = vec![format!("kind = {}", self.kind.as_str())];
        if let Some(h) = &self.hurst {
            v.push(format!("hurst = {}", h.h()));
            v.push(format!("gamma = {}", h.gamma()));
            v.push(format!("delta = {}", h.delta()));
        }
        let list = |x: &[f64]| x.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(", ");
        if let Some(x) = &self.x0 {
            v.push(format!("x0 = {}", list(x)));
        }
        if let Some(x) = &self.x0_b {
            v.push(format!("x0_b = {}", list(x)));
        }
        v.push(format!("horizon = {}", self.horizon));
        v.push(format!("dt = {}", self.dt));
        v.push(format!("n_mc = {}", self.n_mc));
        v.push(format!("seed = {}", self.seed));
        v.push(format!("past_horizon = {}", self.past_horizon));
        v.push(format!("past_dt = {}", self.past_dt));
        v.push(format!("past_seed = {}", self.past_seed()));
        v.push(format!("level = {}", self.level));
        if let Some(r) = self.radius {
            v.push(format!("radius = {r}"));
        }
        if let Some(x) = &self.xi {
            v.push(format!("xi = {}", list(x)));
        }
        v.push(format!("control_horizon = {}", self.control_horizon));
        if let Some((text, _)) = &self.psi {
            v.push(format!("psi = {text}"));
        }
        v.push(format!("fd_step = {}", self.fd_step));
        if let Some(x) = &self.checkpoints {
            v.push(format!("checkpoints = {}", list(x)));
        }
        v.push(format!("doubling = {}", self.doubling));
        if let Some(x) = &self.eps_grid {
            v.push(format!("eps_grid = {}", list(x)));
        }
        v.push(format!("write_paths = {}", self.write_paths));
        v.push(format!("dim = {}", self.dim));
        v.push(format!("fou_stationary = {}", self.fou_stationary));
        v.push(format!("n_pasts = {}", self.n_pasts));
        if let Some(f) = &self.fields {
            v.push("begin fields".into());
            v.extend(f.to_string().lines().map(str::to_string));
            v.push("end fields".into());
        }
        v
    }

    fn hurst(&self) -> Result<HurstParams> {
        self.hurst.ok_or_else(|| cfg_err(0, format!("kind {} needs `hurst`", self.kind.as_str())))
    }

    fn fields(&self) -> Result<&VectorFieldSet> {
        self.fields
            .as_ref()
            .ok_or_else(|| cfg_err(0, format!("kind {} needs a field block", self.kind.as_str())))
    }

    fn x0(&self) -> Result<&[f64]> {
        self.x0
            .as_deref()
            .ok_or_else(|| cfg_err(0, format!("kind {} needs `x0`", self.kind.as_str())))
    }
}

fn cfg_err(line: usize, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        message: message.into(),
    }
}

fn steps(len: f64, dt: f64, what: &str, line: usize) -> Result<usize> {
    let n = len / dt;
    let r = n.round();
    if (n - r).abs() > 1e-9 * n.max(1.0) {
        return Err(cfg_err(line, format!("{what} = {len} is not a whole number of steps of {dt}")));
    }
    Ok(r as usize)
}

/// Parse a config file's text.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut entries: HashMap<String, (usize, String)> = HashMap::new();
    let mut block: Option<(usize, String)> = None;
    let mut in_block = false;
    let mut block_start = 0;
    let mut block_text = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if in_block {
            if line == "end fields" {
                in_block = false;
                block = Some((block_start, std::mem::take(&mut block_text)));
            } else {
                block_text.push_str(raw);
                block_text.push('\n');
            }
            continue;
        }
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if content == "begin fields" {
            if block.is_some() {
                return Err(cfg_err(line_no, "second field block"));
            }
            in_block = true;
            block_start = line_no + 1;
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(cfg_err(line_no, format!("expected `key = value`, found `{content}`")));
        };
        let key = key.trim().to_string();
        if let Some((prev, _)) = entries.get(&key) {
            return Err(cfg_err(line_no, format!("`{key}` already set on line {prev}")));
        }
        entries.insert(key, (line_no, value.trim().to_string()));
    }
    if in_block {
        return Err(cfg_err(block_start - 1, "field block is not closed by `end fields`"));
    }

    let (kind_line, kind) = entries.remove("kind").ok_or_else(|| cfg_err(0, "missing `kind`"))?;
    let kind = ExperimentKind::from_str(&kind).map_err(|m| cfg_err(kind_line, m))?;
    let mut cfg = ExperimentConfig::new(kind);
    let mut lines: HashMap<&'static str, usize> = HashMap::new();

    fn num<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
        v.parse().map_err(|_| cfg_err(line, format!("`{key}`: cannot parse `{v}`")))
    }
    fn list(line: usize, key: &str, v: &str) -> Result<Vec<f64>> {
        v.split(',').map(|s| num::<f64>(line, key, s.trim())).collect()
    }
    fn flag(line: usize, key: &str, v: &str) -> Result<bool> {
        match v {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            _ => Err(cfg_err(line, format!("`{key}`: expected true or false, found `{v}`"))),
        }
    }

    let mut hurst: Option<(usize, f64)> = None;
    let (mut gamma, mut delta) = (None, None);
    let mut psi_text: Option<(usize, String)> = None;
    let mut sorted: Vec<(String, (usize, String))> = entries.into_iter().collect();
    sorted.sort_by_key(|(_, (l, _))| *l);
    for (key, (line, v)) in sorted {
        let v = v.as_str();
        match key.as_str() {
            "hurst" => hurst = Some((line, num(line, &key, v)?)),
            "gamma" => gamma = Some(num(line, &key, v)?),
            "delta" => delta = Some(num(line, &key, v)?),
            "x0" => {
                cfg.x0 = Some(list(line, &key, v)?);
                lines.insert("x0", line);
            }
            "x0_b" => {
                cfg.x0_b = Some(list(line, &key, v)?);
                lines.insert("x0_b", line);
            }
            "horizon" => {
                cfg.horizon = num(line, &key, v)?;
                lines.insert("horizon", line);
            }
            "dt" => {
                cfg.dt = num(line, &key, v)?;
                lines.insert("dt", line);
            }
            "n_mc" => cfg.n_mc = num(line, &key, v)?,
            "seed" => cfg.seed = num(line, &key, v)?,
            "past_horizon" => {
                cfg.past_horizon = num(line, &key, v)?;
                lines.insert("past_horizon", line);
            }
            "past_dt" => {
                cfg.past_dt = num(line, &key, v)?;
                lines.insert("past_dt", line);
            }
            "past_seed" => cfg.past_seed = Some(num(line, &key, v)?),
            "level" => cfg.level = num(line, &key, v)?,
            "radius" => cfg.radius = Some(num(line, &key, v)?),
            "xi" => {
                cfg.xi = Some(list(line, &key, v)?);
                lines.insert("xi", line);
            }
            "control_horizon" => {
                cfg.control_horizon = num(line, &key, v)?;
                lines.insert("control_horizon", line);
            }
            "psi" => psi_text = Some((line, v.to_string())),
            "fd_step" => cfg.fd_step = num(line, &key, v)?,
            "checkpoints" => {
                cfg.checkpoints = Some(list(line, &key, v)?);
                lines.insert("checkpoints", line);
            }
            "doubling" => cfg.doubling = flag(line, &key, v)?,
            "eps_grid" => cfg.eps_grid = Some(list(line, &key, v)?),
            "write_paths" => cfg.write_paths = num(line, &key, v)?,
            "dim" => cfg.dim = num(line, &key, v)?,
            "fou_stationary" => cfg.fou_stationary = flag(line, &key, v)?,
            "n_pasts" => cfg.n_pasts = num(line, &key, v)?,
            "out" => cfg.out = Some(PathBuf::from(v)),
            _ => return Err(cfg_err(line, format!("unknown key `{key}`"))),
        }
    }

    if let Some((line, h)) = hurst {
        let p = match (gamma, delta) {
            (None, None) => HurstParams::with_defaults(h),
            (Some(g), Some(d)) => HurstParams::new(h, g, d),
            _ => return Err(cfg_err(line, "give both `gamma` and `delta` or neither")),
        };
        cfg.hurst = Some(p.map_err(|e| cfg_err(line, e.to_string()))?);
    } else if gamma.is_some() || delta.is_some() {
        return Err(cfg_err(0, "`gamma`/`delta` given without `hurst`"));
    }
    if let Some((start, text)) = block {
        cfg.fields = Some(VectorFieldSet::parse_block(&text, start, None)?);
    }
    if let Some((line, text)) = psi_text {
        let n = cfg.fields.as_ref().map(|f| f.n());
        let e = parse_expr(&text, n).map_err(|e| cfg_err(line, format!("`psi`: {e}")))?;
        cfg.psi = Some((text, e));
    }
    validate(&cfg, &lines)?;
    Ok(cfg)
}

fn validate(cfg: &ExperimentConfig, lines: &HashMap<&'static str, usize>) -> Result<()> {
    let at = |k: &str| lines.get(k).copied().unwrap_or(0);
    if !(cfg.dt > 0.0) {
        return Err(cfg_err(at("dt"), "`dt` must be positive"));
    }
    if !(cfg.horizon > 0.0) {
        return Err(cfg_err(at("horizon"), "`horizon` must be positive"));
    }
    steps(cfg.horizon, cfg.dt, "horizon", at("horizon"))?;
    if cfg.past_horizon < 0.0 || !(cfg.past_dt > 0.0) {
        return Err(cfg_err(at("past_horizon"), "past horizon must be non-negative and `past_dt` positive"));
    }
    steps(cfg.past_horizon, cfg.past_dt, "past_horizon", at("past_horizon"))?;
    if cfg.n_mc == 0 {
        return Err(cfg_err(0, "`n_mc` must be positive"));
    }
    if let Some(f) = &cfg.fields {
        for (key, v) in [("x0", &cfg.x0), ("x0_b", &cfg.x0_b), ("xi", &cfg.xi)] {
            if let Some(v) = v {
                if v.len() != f.n() {
                    return Err(cfg_err(at(key), format!("`{key}` has {} entries, the fields live in R^{}", v.len(), f.n())));
                }
            }
        }
    }
    if let Some(cps) = &cfg.checkpoints {
        for &t in cps {
            steps(t, cfg.dt, "checkpoint", at("checkpoints"))?;
        }
        if cps.windows(2).any(|w| w[1] <= w[0]) || cps.iter().any(|&t| t <= 0.0 || t > cfg.horizon * (1.0 + 1e-12)) {
            return Err(cfg_err(at("checkpoints"), "checkpoints must increase within (0, horizon]"));
        }
    }
    if !(cfg.control_horizon > 0.0) || cfg.control_horizon > cfg.horizon * (1.0 + 1e-12) {
        return Err(cfg_err(at("control_horizon"), "`control_horizon` must lie in (0, horizon]"));
    }
    Ok(())
}

/// Read and parse a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    parse_config(&fs::read_to_string(path)?)
}

/// `{:.16e}`: 17 significant digits.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Ordered `key = value` lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary {
    pub entries: Vec<(String, String)>,
}

impl Summary {
    pub fn num(&mut self, key: impl Into<String>, v: f64) {
        self.entries.push((key.into(), fmt_num(v)));
    }
    pub fn int(&mut self, key: impl Into<String>, v: usize) {
        self.entries.push((key.into(), v.to_string()));
    }
    pub fn text(&mut self, key: impl Into<String>, v: impl ToString) {
        self.entries.push((key.into(), v.to_string()));
    }
    pub fn nums(&mut self, key: impl Into<String>, v: &[f64]) {
        let s = v.iter().map(|x| fmt_num(*x)).collect::<Vec<_>>().join(", ");
        self.entries.push((key.into(), s));
    }
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

/// Files written by one run, with the summary.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub files: Vec<PathBuf>,
    pub summary: Summary,
}

struct Writer {
    dir: PathBuf,
    header: String,
    files: Vec<PathBuf>,
}

impl Writer {
    fn new(dir: &Path, cfg: &ExperimentConfig) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let mut header = String::new();
        for l in cfg.echo() {
            let _ = writeln!(header, "# {l}");
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            header,
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, format!("{}{}", self.header, body))?;
        self.files.push(path);
        Ok(())
    }

    fn csv(&mut self, name: &str, columns: &[String], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
        let mut body = columns.join(",");
        body.push('\n');
        for r in rows {
            body.push_str(&r.iter().map(|x| fmt_num(*x)).collect::<Vec<_>>().join(","));
            body.push('\n');
        }
        self.write(name, &body)
    }
}

fn path_columns(prefix: &str, dim: usize) -> Vec<String> {
    (1..=dim).map(|i| format!("{prefix}_{i}")).collect()
}

/// Conditioned noise for the config: a sampled past of length
/// `past_horizon` (or a zero past) and a future of `horizon`.
pub fn build_noise(cfg: &ExperimentConfig, d: usize, horizon: f64) -> Result<(ConditionedNoise, Option<f64>)> {
    let params = cfg.hurst()?;
    let n_steps = steps(horizon, cfg.dt, "horizon", 0)?;
    if cfg.past_horizon == 0.0 {
        return Ok((ConditionedNoise::zero_past(params.h(), d, cfg.dt, n_steps), None));
    }
    let n_past = steps(cfg.past_horizon, cfg.past_dt, "past_horizon", 0)?;
    let omega = sample_past(params.h(), cfg.past_dt, n_past, d, cfg.past_seed())?;
    let norm = weighted_norm(&omega, params.gamma(), params.delta());
    let drift = ConditionalDrift::new(params, cfg.past_dt, n_past, cfg.dt, n_steps)?;
    Ok((ConditionedNoise::new(&drift, omega)?, Some(norm)))
}

/// Six probe pairs on `[0, T]` for covariance checks.
pub fn probe_pairs(t: f64) -> Vec<(f64, f64)> {
    vec![
        (0.25 * t, 0.25 * t),
        (0.25 * t, 0.5 * t),
        (0.5 * t, 0.5 * t),
        (0.5 * t, t),
        (0.25 * t, t),
        (t, t),
    ]
}

/// Run an experiment, writing artifacts into `out`.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<RunOutput> {
    let mut w = Writer::new(out, cfg)?;
    let mut s = Summary::default();
    s.text("run.kind", cfg.kind.as_str());
    s.int("run.seed", cfg.seed as usize);
    match cfg.kind {
        ExperimentKind::SampleFbm => run_sample_fbm(cfg, &mut w, &mut s)?,
        ExperimentKind::Solve => run_solve(cfg, &mut w, &mut s)?,
        ExperimentKind::Hormander => run_hormander(cfg, &mut s)?,
        ExperimentKind::MalliavinTail => run_tail(cfg, &mut w, &mut s)?,
        ExperimentKind::Gradient => run_gradient(cfg, &mut w, &mut s)?,
        ExperimentKind::Ergodicity => run_ergodicity(cfg, &mut w, &mut s)?,
        ExperimentKind::LemmaSuite => {
            let h = cfg.hurst.map_or(0.7, |p| p.h());
            let rep = lemma_suite(&LemmaSuiteConfig {
                n_paths: cfg.n_mc.max(1),
                n_pasts: cfg.n_pasts,
                h,
                seed: cfg.seed,
            })?;
            lemma_summary(&rep, &mut s);
        }
    }
    w.write("summary.txt", &s.render())?;
    Ok(RunOutput { files: w.files, summary: s })
}

/// Summary keys of the lemma suite.
pub fn lemma_summary(rep: &LemmaSuiteReport, s: &mut Summary) {
    s.int("lemma.n_paths", rep.n_paths);
    s.int("lemma.n_pasts", rep.n_pasts);
    s.int("lemma.interpolation_violations", rep.interpolation_violations);
    s.int("lemma.subdivision_violations", rep.subdivision_violations);
    s.int("lemma.drift_violations", rep.drift_violations);
    s.num("lemma.interpolation_max_ratio", rep.interpolation_max_ratio);
    s.num("lemma.subdivision_max_ratio", rep.subdivision_max_ratio);
    s.num("lemma.drift_max_holder_ratio", rep.drift_max_ratio);
    s.int("lemma.violations", rep.violations());
}

fn run_sample_fbm(cfg: &ExperimentConfig, w: &mut Writer, s: &mut Summary) -> Result<()> {
    let h = cfg.hurst()?.h();
    let d = cfg.fields.as_ref().map_or(cfg.dim, |f| f.d());
    let n = steps(cfg.horizon, cfg.dt, "horizon", 0)?;
    let paths = fbm_sample_exact(h, 0.0, cfg.dt, n, d, cfg.n_mc, cfg.seed)?;
    let mut cols = vec!["t".to_string()];
    cols.extend(path_columns("B", d));
    for (p, path) in paths.iter().enumerate().take(cfg.write_paths) {
        let rows = (0..path.len()).map(|k| {
            let mut r = vec![path.time(k)];
            r.extend_from_slice(path.value(k));
            r
        });
        w.csv(&format!("path_{p:04}.csv"), &cols, rows)?;
    }
    s.int("fbm.n_paths", cfg.n_mc);
    for (i, (a, b)) in probe_pairs(cfg.horizon).into_iter().enumerate() {
        let (ka, kb) = ((a / cfg.dt).round() as usize, (b / cfg.dt).round() as usize);
        let prod: Vec<f64> = paths.iter().map(|p| p.value(ka)[0] * p.value(kb)[0]).collect();
        let e = mean_stderr(&prod);
        let exact = fbm_covariance(a, b, h);
        s.num(format!("fbm.cov.{i}.s"), a);
        s.num(format!("fbm.cov.{i}.t"), b);
        s.num(format!("fbm.cov.{i}.empirical"), e.mean);
        s.num(format!("fbm.cov.{i}.stderr"), e.stderr);
        s.num(format!("fbm.cov.{i}.exact"), exact);
    }
    Ok(())
}

fn run_solve(cfg: &ExperimentConfig, w: &mut Writer, s: &mut Summary) -> Result<()> {
    let fields = cfg.fields()?;
    let x0 = cfg.x0()?;
    let (noise, past_norm) = build_noise(cfg, fields.d(), cfg.horizon)?;
    if let Some(v) = past_norm {
        s.num("noise.past_norm", v);
    }
    let params = cfg.hurst()?;
    let solver = FlowSolver::new(fields, FlowOptions::default());
    let n = fields.n();
    let mut cols = vec!["t".to_string()];
    cols.extend(path_columns("X", n));
    cols.extend((1..=n).flat_map(|a| (1..=n).map(move |b| format!("J_{a}{b}"))));
    cols.extend((1..=n).flat_map(|a| (1..=n).map(move |b| format!("Jinv_{a}{b}"))));
    let mut failures = 0;
    let mut worst_defect = 0.0f64;
    for p in 0..cfg.n_mc {
        let mut rng = stream_rng(cfg.seed, p as u64);
        let driver = noise.draw_driver(&mut rng);
        let flow = match solver.solve(x0, &driver) {
            Ok(f) => f,
            Err(e @ (Error::BlowUp { .. } | Error::Consistency { .. })) => {
                failures += 1;
                s.text(format!("flow.{p}.error"), e);
                continue;
            }
            Err(e) => return Err(e),
        };
        worst_defect = worst_defect.max(flow.max_inverse_defect);
        s.nums(format!("flow.{p}.x_end"), flow.x.last());
        let ap = apriori_report(&flow, params.gamma());
        s.num(format!("flow.{p}.holder_x"), ap.holder_x);
        s.num(format!("flow.{p}.holder_j"), ap.holder_j);
        s.num(format!("flow.{p}.holder_b"), ap.holder_b);
        s.num(format!("flow.{p}.ratio_x"), ap.ratio_x);
        s.num(format!("flow.{p}.log_sup_j"), ap.log_sup_j);
        if p < cfg.write_paths {
            let rows = (0..flow.x.len()).map(|k| {
                let mut r = vec![flow.x.time(k)];
                r.extend_from_slice(flow.x.value(k));
                r.extend_from_slice(flow.j.value(k));
                r.extend_from_slice(flow.jinv.value(k));
                r
            });
            w.csv(&format!("flow_{p:04}.csv"), &cols, rows)?;
        }
    }
    s.int("flow.failures", failures);
    s.num("flow.max_inverse_defect", worst_defect);
    Ok(())
}

fn run_hormander(cfg: &ExperimentConfig, s: &mut Summary) -> Result<()> {
    let fields = cfg.fields()?;
    let x0 = cfg.x0()?;
    let mut first = None;
    let mut last = None;
    for k in 1..=cfg.level.max(1) {
        let r = hormander_rank(fields, k, x0)?;
        s.int(format!("hormander.level.{k}.rank"), r.rank);
        s.num(format!("hormander.level.{k}.sigma_min"), r.sigma_min);
        if r.satisfied && first.is_none() {
            first = Some(k);
        }
        last = Some(r);
    }
    let r = last.expect("at least one level");
    s.int("hormander.level", cfg.level.max(1));
    s.int("hormander.rank", r.rank);
    s.num("hormander.sigma_min", r.sigma_min);
    s.num("hormander.sigma_n", r.sigma_n);
    s.int("hormander.family_size", r.family_size);
    s.text("hormander.satisfied", r.satisfied);
    s.text("hormander.first_level", first.map_or("none".to_string(), |k| k.to_string()));
    if let Some(radius) = cfg.radius {
        s.num(
            "hormander.sampled_sigma_min",
            sampled_sigma_min(fields, cfg.level.max(1), radius, 256, cfg.seed)?,
        );
        let d = dissipativity_check(fields.drift(), radius, 64, cfg.seed)?;
        s.num("dissipativity.radius", radius);
        s.num("dissipativity.m1", d.m1);
        s.num("dissipativity.m2", d.m2);
        s.text("dissipativity.satisfied", d.satisfied);
        s.int("dissipativity.n_points", d.n_points);
        if let Some(c) = &d.counterexample {
            s.nums("dissipativity.counterexample", c);
        }
    }
    Ok(())
}

fn run_tail(cfg: &ExperimentConfig, w: &mut Writer, s: &mut Summary) -> Result<()> {
    let fields = cfg.fields()?;
    let x0 = cfg.x0()?;
    let rank = hormander_rank(fields, cfg.level.max(1), x0)?;
    s.text("hormander.satisfied", rank.satisfied);
    let (noise, past_norm) = build_noise(cfg, fields.d(), cfg.horizon)?;
    if let Some(v) = past_norm {
        s.num("noise.past_norm", v);
    }
    let diags = malliavin_ensemble(fields, x0, &noise, cfg.n_mc, cfg.seed, cfg.xi.as_deref())?;
    let kept: Vec<_> = diags.iter().flatten().collect();
    let mut lam: Vec<f64> = kept.iter().map(|d| d.lambda_min).collect();
    lam.sort_by(|a, b| a.total_cmp(b));
    let tail = tail_from_samples(&lam, cfg.n_mc - kept.len(), cfg.eps_grid.as_deref());
    w.csv(
        "tail.csv",
        &["eps", "p_hat", "stderr", "n_mc"].map(String::from),
        tail.rows.iter().map(|r| vec![r.eps, r.p_hat, r.stderr, r.n_mc as f64]),
    )?;
    s.int("malliavin.n_mc", cfg.n_mc);
    s.int("malliavin.failures", tail.failures);
    s.num("malliavin.lambda_median", tail.lambda_median);
    s.num("malliavin.lambda_min", lam.first().copied().unwrap_or(f64::NAN));
    s.text("malliavin.tail_strictly_monotone", tail.strictly_monotone);
    s.text("malliavin.tail_slope", tail.slope.map_or("none".to_string(), fmt_num));
    let gap = kept.iter().map(|d| d.loewner_gap).fold(f64::INFINITY, f64::min);
    s.num("malliavin.loewner_gap_min", gap);
    s.int(
        "malliavin.loewner_violations",
        kept.iter().filter(|d| d.loewner_gap < -1e-10).count(),
    );
    if cfg.xi.is_some() {
        let res: Vec<f64> = kept.iter().filter_map(|d| d.control_residual).collect();
        s.int("malliavin.controls_built", res.len());
        s.num("malliavin.control_residual_max", res.iter().cloned().fold(0.0, f64::max));
    }
    Ok(())
}

fn run_gradient(cfg: &ExperimentConfig, w: &mut Writer, s: &mut Summary) -> Result<()> {
    let fields = cfg.fields()?;
    let x0 = cfg.x0()?;
    let xi = cfg.xi.clone().ok_or_else(|| cfg_err(0, "kind gradient needs `xi`"))?;
    let psi_expr = cfg.psi.as_ref().map(|p| p.1.clone()).unwrap_or_else(|| Expr::Const(1.0));
    let prog = Program::compile(&psi_expr);
    let psi = move |x: &SampledPath| prog.eval(x.last(), &mut Vec::new());
    let (noise, past_norm) = build_noise(cfg, fields.d(), cfg.horizon)?;
    if let Some(v) = past_norm {
        s.num("noise.past_norm", v);
    }
    let rep = gradient_estimator(
        fields,
        x0,
        &noise,
        &psi,
        &GradientConfig {
            xi,
            control_horizon: cfg.control_horizon,
            n_mc: cfg.n_mc,
            seed: cfg.seed,
            fd_step: cfg.fd_step,
        },
    )?;
    w.csv(
        "gradient.csv",
        &["estimate", "stderr", "fd_oracle", "fd_stderr", "rel_err", "n_mc"].map(String::from),
        [vec![
            rep.estimate.mean,
            rep.estimate.stderr,
            rep.fd_oracle.mean,
            rep.fd_oracle.stderr,
            rep.rel_err,
            cfg.n_mc as f64,
        ]],
    )?;
    s.num("gradient.estimate", rep.estimate.mean);
    s.num("gradient.stderr", rep.estimate.stderr);
    s.num("gradient.fd_oracle", rep.fd_oracle.mean);
    s.num("gradient.fd_stderr", rep.fd_oracle.stderr);
    s.num("gradient.rel_err", rep.rel_err);
    s.num("gradient.control_residual", rep.control_residual);
    Ok(())
}

fn run_ergodicity(cfg: &ExperimentConfig, w: &mut Writer, s: &mut Summary) -> Result<()> {
    let fields = cfg.fields()?;
    let x0_a = cfg.x0()?.to_vec();
    let x0_b = cfg.x0_b.clone().ok_or_else(|| cfg_err(0, "kind ergodicity needs `x0_b`"))?;
    let checkpoints = cfg.checkpoints.clone().unwrap_or_else(|| default_checkpoints(cfg.horizon));
    let last = *checkpoints.last().expect("non-empty");
    let noise_horizon = if cfg.doubling { 2.0 * last } else { cfg.horizon.max(last) };
    let (noise, past_norm) = build_noise(cfg, fields.d(), noise_horizon)?;
    if let Some(v) = past_norm {
        s.num("noise.past_norm", v);
    }
    let mut summary = convergence_experiment(
        fields,
        &noise,
        &ConvergenceConfig {
            x0_a,
            x0_b,
            checkpoints,
            n_mc: cfg.n_mc,
            seed: cfg.seed,
            doubling: cfg.doubling,
        },
    )?;
    summary.hormander = Some(hormander_rank(fields, cfg.level.max(1), &summary.x0_a)?);
    summary.dissipativity = Some(dissipativity_check(fields.drift(), cfg.radius.unwrap_or(10.0), 64, cfg.seed)?);
    let n = fields.n();
    let mut cols: Vec<String> = ["t", "coordinate", "ks", "w1"].map(String::from).to_vec();
    cols.extend(["mean_a", "stderr_a", "mean_b", "stderr_b"].map(String::from));
    let law_means = crate::ergodicity::conditional_law_sample(
        fields,
        &[summary.x0_a.clone(), summary.x0_b.clone()],
        &noise,
        &summary.checkpoints,
        cfg.n_mc,
        cfg.seed,
    )?;
    let mut rows = Vec::new();
    for (c, d) in summary.distances.iter().enumerate() {
        for i in 0..n {
            let (ma, mb) = (law_means.mean(0, c, i), law_means.mean(1, c, i));
            rows.push(vec![d.t, (i + 1) as f64, d.distances.ks[i], d.distances.w1[i], ma.mean, ma.stderr, mb.mean, mb.stderr]);
        }
    }
    w.csv("distances.csv", &cols, rows)?;
    s.text("ergodicity.distance_proxy", "ks,w1 per coordinate (total variation is not estimated)");
    s.num("ergodicity.initial_separation", summary.initial_separation);
    for d in &summary.distances {
        s.num(format!("ergodicity.w1_total.t={}", d.t), d.distances.w1_total());
    }
    s.text("ergodicity.monotone_decay", summary.monotone_decay);
    s.num("ergodicity.final_ratio", summary.final_ratio);
    s.int("ergodicity.failures", summary.failures);
    if let Some(dt) = summary.doubling {
        s.num("ergodicity.doubling.w1_t_2t", dt.w1_t_2t);
        s.num("ergodicity.doubling.floor", dt.floor);
        s.text("ergodicity.doubling.stationary", dt.stationary);
    }
    let hr = summary.hormander.as_ref().expect("set above");
    s.text("hormander.satisfied", hr.satisfied);
    s.int("hormander.rank", hr.rank);
    let dr = summary.dissipativity.as_ref().expect("set above");
    s.text("dissipativity.satisfied", dr.satisfied);
    s.num("dissipativity.m1", dr.m1);
    s.num("dissipativity.m2", dr.m2);
    if cfg.fou_stationary {
        let h = cfg.hurst()?.h();
        let r = fou_stationary_experiment(h, cfg.horizon, cfg.dt, cfg.n_mc, cfg.seed)?;
        s.num("ergodicity.fou.second_moment", r.second_moment.mean);
        s.num("ergodicity.fou.stderr", r.second_moment.stderr);
        s.num("ergodicity.fou.oracle", r.oracle);
        s.num("ergodicity.fou.z_score", r.z_score);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_errors_carry_lines() {
        let e = parse_config("kind = solve\nhurst = 0.4\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: 2, .. }), "{e}");
        let e = parse_config("kind = solve\nfoo = 1\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: 2, .. }));
        let e = parse_config("kind = solve\nbegin fields\nV0 = [x1\nend fields\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3 | 4, .. }), "{e}");
    }

    #[test]
    fn echo_round_trips() {
        let text = "kind = hormander\nx0 = 0, 0\nlevel = 2\nbegin fields\nV0 = [0, x1]\nV1 = [1, 0]\nend fields\n";
        let cfg = parse_config(text).unwrap();
        let again = parse_config(&cfg.echo().join("\n")).unwrap();
        assert_eq!(cfg.echo(), again.echo());
    }
}
