//! Strict TOML experiment configuration.
//!
//! Unknown keys and type mismatches are reported by the TOML deserializer
//! with line and column. Missing required fields are collected and reported
//! together. Range checks run on the resolved values and point back at the
//! line of the offending key.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};

use entangle_core::entanglement::AverageMode;
use entangle_core::riccati::{SolverOptions, StepRule};
use entangle_core::SystemParams;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{path}: missing required fields: {}", fields.join(", "))]
    Missing { path: PathBuf, fields: Vec<String> },

    #[error("{path}:{}: `{field}` {reason}", line.map_or_else(|| "?".to_string(), |l| l.to_string()))]
    Invalid {
        path: PathBuf,
        line: Option<usize>,
        field: String,
        reason: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Map,
    Boundary,
    Trace,
    Montecarlo,
    Solve,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Map => "map",
            Mode::Boundary => "boundary",
            Mode::Trace => "trace",
            Mode::Montecarlo => "montecarlo",
            Mode::Solve => "solve",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub g0: f64,
    pub g1: f64,
    pub omega_mod: f64,
    pub gamma_ba: f64,
    pub gamma_th: f64,
    pub eta: f64,
    pub q: f64,
    #[serde(default = "default_phi")]
    pub phi: f64,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default = "default_omega0")]
    pub omega0: f64,
}

fn default_phi() -> f64 {
    PI
}

fn default_omega0() -> f64 {
    1.0
}

impl ParamsConfig {
    pub fn to_params(&self) -> SystemParams {
        SystemParams {
            omega0: self.omega0,
            g0: self.g0,
            g1: self.g1,
            omega_mod: self.omega_mod,
            gamma: self.gamma,
            gamma_ba: self.gamma_ba,
            gamma_th: self.gamma_th,
            eta: self.eta,
            q: self.q,
            phi: self.phi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepRuleName {
    Midpoint,
    #[default]
    Magnus4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AverageName {
    #[default]
    Signed,
    Clamped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub n_steps: usize,
    pub tolerance: f64,
    pub max_periods: usize,
    pub step_rule: StepRuleName,
    pub average: AverageName,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = SolverOptions::default();
        Self {
            n_steps: d.n_steps,
            tolerance: d.tolerance,
            max_periods: d.max_periods,
            step_rule: StepRuleName::default(),
            average: AverageName::default(),
        }
    }
}

impl SolverConfig {
    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            n_steps: self.n_steps,
            tolerance: self.tolerance,
            max_periods: self.max_periods,
            step_rule: match self.step_rule {
                StepRuleName::Midpoint => StepRule::Midpoint,
                StepRuleName::Magnus4 => StepRule::Magnus4,
            },
            ..SolverOptions::default()
        }
    }

    pub fn average_mode(&self) -> AverageMode {
        match self.average {
            AverageName::Signed => AverageMode::Signed,
            AverageName::Clamped => AverageMode::Clamped,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Output directory; `--out` takes precedence.
    pub dir: Option<PathBuf>,
    /// File name stem; defaults to the mode name.
    pub prefix: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

/// A parameter grid: either `start`/`stop`/`count` (with `scale`) or an
/// explicit `values` list.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub count: Option<usize>,
    #[serde(default)]
    pub scale: Scale,
    pub values: Option<Vec<f64>>,
}

impl Axis {
    pub fn linear(start: f64, stop: f64, count: usize) -> Self {
        Self { start: Some(start), stop: Some(stop), count: Some(count), scale: Scale::Linear, values: None }
    }

    pub fn values(values: Vec<f64>) -> Self {
        Self { values: Some(values), ..Self::default() }
    }

    fn check(&self) -> Result<(), String> {
        match (&self.values, self.start, self.stop, self.count) {
            (Some(v), None, None, None) => {
                if v.is_empty() {
                    return Err("needs at least one value".into());
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err("values must be finite".into());
                }
                Ok(())
            }
            (None, Some(a), Some(b), Some(n)) => {
                if n < 1 {
                    return Err("count must be >= 1".into());
                }
                if !a.is_finite() || !b.is_finite() {
                    return Err("start and stop must be finite".into());
                }
                if self.scale == Scale::Log && (a <= 0.0 || b <= 0.0) {
                    return Err("log scale needs positive start and stop".into());
                }
                Ok(())
            }
            _ => Err("give either `values` or all of `start`, `stop`, `count`".into()),
        }
    }

    /// Grid points. Call only on a validated axis.
    pub fn points(&self) -> Vec<f64> {
        if let Some(v) = &self.values {
            return v.clone();
        }
        let (a, b, n) = (self.start.unwrap_or(0.0), self.stop.unwrap_or(0.0), self.count.unwrap_or(1));
        if n == 1 {
            return vec![a];
        }
        let step = |i: usize| i as f64 / (n - 1) as f64;
        match self.scale {
            Scale::Linear => (0..n).map(|i| a + (b - a) * step(i)).collect(),
            Scale::Log => (0..n).map(|i| a * (b / a).powf(step(i))).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    pub g1: Axis,
    pub omega_mod: Axis,
    /// Skip the controller and excess noise; only `mean_c` is computed.
    #[serde(default)]
    pub conditional_only: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Attractive,
    Repulsive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryConfig {
    pub branch: Branch,
    pub g0: Axis,
    /// `g₁ = g1_ratio·|g₀|`. Exactly one of `g1_ratio` and `g1` is required.
    pub g1_ratio: Option<f64>,
    pub g1: Option<f64>,
    #[serde(default = "default_etas")]
    pub eta: Vec<f64>,
    /// Ω scan window around each resonance, as multiples of it.
    #[serde(default = "default_window")]
    pub window: [f64; 2],
    #[serde(default = "default_omega_points")]
    pub omega_points: usize,
    #[serde(default = "default_bisection_tol")]
    pub bisection_tol: f64,
    #[serde(default)]
    pub conditional_only: bool,
}

fn default_etas() -> Vec<f64> {
    vec![0.25, 0.5, 0.75, 1.0]
}

fn default_window() -> [f64; 2] {
    [0.8, 1.2]
}

fn default_omega_points() -> usize {
    61
}

fn default_bisection_tol() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceConfig {
    /// Modulation amplitudes to trace; the unmodulated reference is always
    /// added.
    pub g1: Vec<f64>,
    /// Periods written to the time series.
    #[serde(default = "default_trace_periods")]
    pub periods: usize,
}

fn default_trace_periods() -> usize {
    3
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseName {
    #[default]
    Gaussian,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloConfig {
    pub trajectories: usize,
    /// Euler–Maruyama steps per solver grid step.
    #[serde(default = "default_substeps")]
    pub substeps: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in_periods: usize,
    /// Number of equally spaced intra-period phases compared with Ξ.
    #[serde(default = "default_phases")]
    pub phases: usize,
    #[serde(default = "default_z_threshold")]
    pub z_threshold: f64,
    #[serde(default)]
    pub noise: NoiseName,
    /// Trajectories written in full with `--dump-trajectories`.
    #[serde(default = "default_dump_count")]
    pub dump_count: usize,
}

fn default_substeps() -> usize {
    4
}

fn default_burn_in() -> usize {
    10
}

fn default_phases() -> usize {
    4
}

fn default_z_threshold() -> f64 {
    3.0
}

fn default_dump_count() -> usize {
    16
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
    pub params: ParamsConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
    pub map: Option<MapConfig>,
    pub boundary: Option<BoundaryConfig>,
    pub trace: Option<TraceConfig>,
    pub montecarlo: Option<MonteCarloConfig>,
}

const REQUIRED_PARAMS: [&str; 7] = ["g0", "g1", "omega_mod", "gamma_ba", "gamma_th", "eta", "q"];

/// 1-based line of `key` inside `[section]` (or at top level for `""`).
fn locate(src: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, line) in src.lines().enumerate() {
        let t = line.trim();
        if let Some(rest) = t.strip_prefix('[') {
            current = rest.trim_end_matches(']').trim().to_string();
            if current == section && key.is_empty() {
                return Some(i + 1);
            }
            continue;
        }
        if current == section && !key.is_empty() {
            if let Some((k, _)) = t.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

fn missing_fields(table: &toml::Table) -> Vec<String> {
    let mut missing = Vec::new();
    if !table.contains_key("mode") {
        missing.push("mode".to_string());
    }
    match table.get("params").and_then(|v| v.as_table()) {
        Some(p) => missing.extend(
            REQUIRED_PARAMS
                .iter()
                .filter(|k| !p.contains_key(**k))
                .map(|k| format!("params.{k}")),
        ),
        None => missing.extend(REQUIRED_PARAMS.iter().map(|k| format!("params.{k}"))),
    }
    if let Some(mode) = table.get("mode").and_then(|v| v.as_str()) {
        if ["map", "boundary", "trace", "montecarlo"].contains(&mode) && !table.contains_key(mode) {
            missing.push(format!("[{mode}]"));
        }
    }
    missing
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let src = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Self::from_str_at(&src, path)
    }

    /// Parses `src`; `path` is only used in diagnostics.
    pub fn from_str_at(src: &str, path: &Path) -> Result<Self, ConfigError> {
        let parse_err = |e: toml::de::Error| ConfigError::Parse { path: path.into(), message: e.to_string() };
        let table: toml::Table = toml::from_str(src).map_err(parse_err)?;
        let missing = missing_fields(&table);
        if !missing.is_empty() {
            return Err(ConfigError::Missing { path: path.into(), fields: missing });
        }
        let cfg: ExperimentConfig = toml::from_str(src).map_err(parse_err)?;
        cfg.validate().map_err(|(section, key, reason)| ConfigError::Invalid {
            path: path.into(),
            line: locate(src, section, key).or_else(|| locate(src, section, "")),
            field: if section.is_empty() { key.to_string() } else { format!("{section}.{key}") },
            reason,
        })?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), (&'static str, &'static str, String)> {
        let p = &self.params;
        let fail = |key: &'static str, reason: &str| Err(("params", key, reason.to_string()));
        let fields = [
            ("g0", p.g0),
            ("g1", p.g1),
            ("omega_mod", p.omega_mod),
            ("gamma_ba", p.gamma_ba),
            ("gamma_th", p.gamma_th),
            ("eta", p.eta),
            ("q", p.q),
            ("phi", p.phi),
            ("gamma", p.gamma),
            ("omega0", p.omega0),
        ];
        for (k, v) in fields {
            if !v.is_finite() {
                return fail(k, "must be finite");
            }
        }
        if !(0.0..=1.0).contains(&p.eta) {
            return fail("eta", "must lie in [0, 1]");
        }
        if p.q <= 0.0 {
            return fail("q", "must be > 0");
        }
        for (k, v) in [("gamma_ba", p.gamma_ba), ("gamma_th", p.gamma_th), ("gamma", p.gamma)] {
            if v < 0.0 {
                return fail(k, "must be >= 0");
            }
        }
        if p.omega_mod <= 0.0 {
            return fail("omega_mod", "must be > 0");
        }
        if p.omega0 <= 0.0 {
            return fail("omega0", "must be > 0");
        }

        let s = &self.solver;
        let opts = s.options();
        if opts.validate().is_err() {
            if s.n_steps < SolverOptions::MIN_STEPS || !s.n_steps.is_power_of_two() {
                return Err(("solver", "n_steps", "must be a power of two and at least 256".into()));
            }
            if !(s.tolerance > 0.0) {
                return Err(("solver", "tolerance", "must be > 0".into()));
            }
            return Err(("solver", "max_periods", "must be at least 20".into()));
        }

        match self.mode {
            Mode::Map => {
                let m = self.map.as_ref().ok_or(("map", "", "section is required".into()))?;
                m.g1.check().map_err(|r| ("map", "g1", r))?;
                m.omega_mod.check().map_err(|r| ("map", "omega_mod", r))?;
                if m.omega_mod.points().iter().any(|w| *w <= 0.0) {
                    return Err(("map", "omega_mod", "values must be > 0".into()));
                }
            }
            Mode::Boundary => {
                let b = self.boundary.as_ref().ok_or(("boundary", "", "section is required".into()))?;
                b.g0.check().map_err(|r| ("boundary", "g0", r))?;
                let g0 = b.g0.points();
                let sign_ok = match b.branch {
                    Branch::Attractive => g0.iter().all(|g| *g > 0.0),
                    Branch::Repulsive => g0.iter().all(|g| *g < 0.0),
                };
                if !sign_ok {
                    return Err(("boundary", "g0", "sign must match `branch`".into()));
                }
                match (b.g1_ratio, b.g1) {
                    (Some(r), None) if r.is_finite() && r >= 0.0 => {}
                    (None, Some(g)) if g.is_finite() && g >= 0.0 => {}
                    (Some(_), Some(_)) | (None, None) => {
                        return Err(("boundary", "g1_ratio", "give exactly one of `g1_ratio` and `g1`".into()))
                    }
                    _ => return Err(("boundary", "g1_ratio", "must be finite and >= 0".into())),
                }
                if b.eta.is_empty() || b.eta.iter().any(|e| !(0.0..=1.0).contains(e)) {
                    return Err(("boundary", "eta", "values must lie in [0, 1]".into()));
                }
                if !(b.window[0] > 0.0 && b.window[0] < b.window[1]) {
                    return Err(("boundary", "window", "needs 0 < lo < hi".into()));
                }
                if b.omega_points < 2 {
                    return Err(("boundary", "omega_points", "must be >= 2".into()));
                }
                if !(b.bisection_tol > 0.0) {
                    return Err(("boundary", "bisection_tol", "must be > 0".into()));
                }
            }
            Mode::Trace => {
                let t = self.trace.as_ref().ok_or(("trace", "", "section is required".into()))?;
                if t.g1.iter().any(|g| !g.is_finite()) {
                    return Err(("trace", "g1", "values must be finite".into()));
                }
                if t.periods < 1 {
                    return Err(("trace", "periods", "must be >= 1".into()));
                }
            }
            Mode::Montecarlo => {
                let m = self.montecarlo.as_ref().ok_or(("montecarlo", "", "section is required".into()))?;
                if m.trajectories < 2 {
                    return Err(("montecarlo", "trajectories", "must be >= 2".into()));
                }
                if m.substeps < 1 {
                    return Err(("montecarlo", "substeps", "must be >= 1".into()));
                }
                if m.phases < 1 || m.phases > s.n_steps {
                    return Err(("montecarlo", "phases", "must lie in [1, n_steps]".into()));
                }
                if !(m.z_threshold > 0.0) {
                    return Err(("montecarlo", "z_threshold", "must be > 0".into()));
                }
            }
            Mode::Solve => {}
        }
        Ok(())
    }

    pub fn system_params(&self) -> SystemParams {
        self.params.to_params()
    }

    pub fn prefix(&self) -> String {
        self.output.prefix.clone().unwrap_or_else(|| self.mode.to_string())
    }

    /// The resolved configuration as sorted `key=value` pairs.
    pub fn provenance(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        if let Ok(toml::Value::Table(t)) = toml::Value::try_from(self) {
            flatten("", &toml::Value::Table(t), &mut out);
        }
        out
    }
}

fn flatten(prefix: &str, value: &toml::Value, out: &mut Vec<(String, String)>) {
    match value {
        toml::Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        toml::Value::String(s) => out.push((prefix.to_string(), s.clone())),
        toml::Value::Float(f) => out.push((prefix.to_string(), format!("{f:?}"))),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const REFERENCE: &str = r#"
mode = "map"
seed = 7

[params]
g0 = 0.2
g1 = 0.17
omega_mod = 2.7
gamma_ba = 0.05
gamma_th = 0.0025
eta = 0.5
q = 0.1

[map]
g1 = { start = 0.0, stop = 0.2, count = 60 }
omega_mod = { start = 1.5, stop = 3.5, count = 60 }
"#;

    fn parse(src: &str) -> Result<ExperimentConfig, ConfigError> {
        ExperimentConfig::from_str_at(src, Path::new("test.toml"))
    }

    #[test]
    fn reference_config_parses_to_default_set() {
        let cfg = parse(REFERENCE).unwrap();
        let p = cfg.system_params();
        let d = SystemParams::default();
        assert_eq!(SystemParams { gamma_th: d.gamma_th, ..p }, d);
        assert!((p.gamma_th - d.gamma_th).abs() < 1e-15);
        assert_eq!(cfg.map.unwrap().g1.points().len(), 60);
        assert_eq!(cfg.solver, SolverConfig::default());
    }

    #[test]
    fn empty_file_lists_required_fields() {
        match parse("").unwrap_err() {
            ConfigError::Missing { fields, .. } => {
                assert!(fields.contains(&"mode".to_string()));
                for k in REQUIRED_PARAMS {
                    assert!(fields.contains(&format!("params.{k}")), "{k}");
                }
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn missing_mode_section_is_reported() {
        let src = REFERENCE.replace("[map]", "[other]").replace("g1 = { start", "#").replace("omega_mod = { start", "#");
        let err = parse(&src).unwrap_err().to_string();
        assert!(err.contains("[map]"), "{err}");
    }

    #[test]
    fn unknown_key_is_rejected_with_line() {
        let src = REFERENCE.replace("q = 0.1", "q = 0.1\nkappa = 3.0");
        let err = parse(&src).unwrap_err().to_string();
        assert!(err.contains("kappa"), "{err}");
        assert!(err.contains("line 13"), "{err}");
    }

    #[test]
    fn type_mismatch_is_rejected() {
        let src = REFERENCE.replace("eta = 0.5", "eta = \"half\"");
        assert!(matches!(parse(&src), Err(ConfigError::Parse { .. })));
    }

    #[test]
    fn out_of_range_eta_is_rejected_with_line() {
        let src = REFERENCE.replace("eta = 0.5", "eta = 1.5");
        match parse(&src).unwrap_err() {
            ConfigError::Invalid { line, field, .. } => {
                assert_eq!(field, "params.eta");
                assert_eq!(line, Some(11));
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn solver_and_axis_checks() {
        let src = format!("{REFERENCE}\n[solver]\nn_steps = 1000\n");
        assert!(parse(&src).unwrap_err().to_string().contains("solver.n_steps"));
        let src = REFERENCE.replace("count = 60 }\nomega", "count = 0 }\nomega");
        assert!(parse(&src).unwrap_err().to_string().contains("map.g1"));
        let src = REFERENCE.replace("{ start = 1.5, stop = 3.5, count = 60 }", "{ values = [2.0], count = 3 }");
        assert!(parse(&src).is_err());
    }

    #[test]
    fn axis_points() {
        assert_eq!(Axis::linear(0.0, 1.0, 3).points(), vec![0.0, 0.5, 1.0]);
        assert_eq!(Axis::linear(2.0, 5.0, 1).points(), vec![2.0]);
        let log = Axis { scale: Scale::Log, ..Axis::linear(1.0, 100.0, 3) };
        let p = log.points();
        assert!((p[1] - 10.0).abs() < 1e-12);
        assert_eq!(Axis::values(vec![3.0, 1.0]).points(), vec![3.0, 1.0]);
    }

    #[test]
    fn provenance_is_sorted_and_complete() {
        let cfg = parse(REFERENCE).unwrap();
        let prov = cfg.provenance();
        let keys: Vec<_> = prov.iter().map(|(k, _)| k.as_str()).collect();
        assert!(keys.contains(&"params.eta"));
        assert!(keys.contains(&"solver.tolerance"));
        assert!(keys.contains(&"seed"));
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }
}
