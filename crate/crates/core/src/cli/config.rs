//! Scenario files: TOML with `[model]`, `[run]` and `[outputs]` sections.
//!
//! Parsing is strict. Keys that do not exist, or that do not apply to the
//! chosen model kind, are rejected.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{InvalidParameter, ValidationReport};
use crate::homogenization::{BoundaryCase, BoundaryCondition};
use crate::model::{
    stratonovich_to_ito, AdditiveModel, Forcing, InitialLogLaw, KpzModel, ModeLaw, Model, MultiplicativeModel,
    NoiseAmplitudes, NoiseSpec, TimeSignal, Trig, Validate,
};

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    Io { path: PathBuf, reason: String },
    Parse { line: usize, reason: String },
    UnknownKey(String),
    Invalid(ValidationReport),
}

impl ConfigError {
    pub fn class(&self) -> &'static str {
        match self {
            ConfigError::Io { .. } => "IoError",
            ConfigError::Parse { .. } => "ParseError",
            ConfigError::UnknownKey(_) => "UnknownKey",
            ConfigError::Invalid(_) => "InvalidParameter",
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io { path, reason } => write!(f, "IoError({}): {reason}", path.display()),
            ConfigError::Parse { line, reason } => write!(f, "ParseError(line {line}): {reason}"),
            ConfigError::UnknownKey(k) => write!(f, "UnknownKey({k})"),
            ConfigError::Invalid(r) => write!(f, "{r}"),
        }
    }
}

impl std::error::Error for ConfigError {}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(ValidationReport(vec![InvalidParameter::new(field, reason)]))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: Option<String>,
    model: RawModel,
    #[serde(default)]
    run: RawRun,
    #[serde(default)]
    outputs: RawOutputs,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawSignal {
    Number(f64),
    Name(String),
    Trig {
        #[serde(default)]
        constant: f64,
        #[serde(default)]
        sin: f64,
        #[serde(default)]
        cos: f64,
    },
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawForcing {
    Name(String),
    Mode { mode: usize, signal: RawSignal },
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawNoise {
    Name(String),
    List(Vec<f64>),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawBoundary {
    Name(String),
    Row(u8),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    kind: Option<String>,
    a: Option<f64>,
    b: Option<f64>,
    c: Option<f64>,
    sigma: Option<f64>,
    alpha: Option<f64>,
    epsilon: Option<f64>,
    theta: Option<f64>,
    xi: Option<f64>,
    m: Option<usize>,
    q_m: Option<f64>,
    noise: Option<RawNoise>,
    truncation: Option<usize>,
    forcing: Option<RawForcing>,
    boundary: Option<RawBoundary>,
    gamma: Option<f64>,
    gamma1: Option<f64>,
    gamma2: Option<f64>,
    g: Option<RawSignal>,
    h: Option<RawSignal>,
    initial_mean: Option<Vec<f64>>,
    initial_variance: Option<Vec<f64>>,
    initial_log_mean: Option<f64>,
    initial_log_variance: Option<f64>,
    stratonovich: Option<bool>,
    window: Option<[f64; 2]>,
}

impl RawModel {
    fn present_keys(&self) -> Vec<&'static str> {
        let mut keys = Vec::new();
        macro_rules! mark {
            ($($f:ident),*) => { $( if self.$f.is_some() { keys.push(stringify!($f)); } )* };
        }
        mark!(
            a, b, c, sigma, alpha, epsilon, theta, xi, m, q_m, noise, truncation, forcing, boundary, gamma, gamma1,
            gamma2, g, h, initial_mean, initial_variance, initial_log_mean, initial_log_variance, stratonovich, window
        );
        keys
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
enum RawGrid {
    Name(String),
    List(Vec<f64>),
    Range { min: f64, max: f64, count: usize },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    t: Option<Vec<f64>>,
    x: Option<Vec<f64>>,
    u: Option<RawGrid>,
    u_count: Option<usize>,
    u_width: Option<f64>,
    horizon: Option<f64>,
    dt: Option<f64>,
    n_paths: Option<usize>,
    seed: Option<u64>,
    n_modes: Option<usize>,
    tail_tol: Option<f64>,
    oracle_samples: Option<usize>,
    scheme: Option<String>,
    residual: Option<RawResidual>,
    ck: Option<RawCk>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawResidual {
    x: Option<f64>,
    t: Option<[f64; 2]>,
    t_count: Option<usize>,
    z_count: Option<usize>,
    z_width: Option<f64>,
    du: Option<f64>,
    dt: Option<f64>,
    levels: Option<usize>,
    coefficients: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCk {
    s: Option<f64>,
    r: Option<f64>,
    t: Option<f64>,
    w: Option<f64>,
    x: Option<f64>,
    mode: Option<usize>,
    u_count: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutputs {
    density: Option<String>,
    fk: Option<String>,
    oracle: Option<String>,
    residual: Option<String>,
    ck: Option<String>,
}

/// Evaluation grid in `u` (or `κ`).
#[derive(Debug, Clone, PartialEq)]
pub enum UGrid {
    /// `count` points spanning `width` standard deviations either side of the
    /// centre of the law at each `(t, x)` (in log-space for log-normal laws).
    Auto { count: usize, width: f64 },
    List(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeChoice {
    Euler,
    ExactGbm,
    Exact,
    StepAveraged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoefficientChoice {
    Corrected,
    Uncorrected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualConfig {
    pub x: f64,
    pub t_range: [f64; 2],
    pub t_count: usize,
    pub z_count: usize,
    pub z_width: f64,
    pub du: f64,
    pub dt: f64,
    pub levels: usize,
    pub coefficients: CoefficientChoice,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CkConfig {
    pub s: f64,
    pub r: f64,
    pub t: f64,
    pub w: f64,
    pub x: f64,
    pub mode: usize,
    pub u_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub u: UGrid,
    pub horizon: f64,
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub n_modes: Option<usize>,
    pub tail_tol: Option<f64>,
    pub oracle_samples: usize,
    pub scheme: SchemeChoice,
    pub residual: ResidualConfig,
    pub ck: CkConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outputs {
    pub density: String,
    pub fk: String,
    pub oracle: String,
    pub residual: String,
    pub ck: String,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub model: Model,
    pub run: RunConfig,
    pub outputs: Outputs,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn map_toml_error(text: &str, e: toml::de::Error) -> ConfigError {
    let msg = e.message().to_string();
    if let Some(rest) = msg.strip_prefix("unknown field `") {
        if let Some(end) = rest.find('`') {
            return ConfigError::UnknownKey(rest[..end].to_string());
        }
    }
    let span = e.span();
    let line = span.as_ref().map(|s| line_of(text, s.start)).unwrap_or(1);
    let mut reason = msg.trim().to_string();
    if reason.starts_with("duplicate key") {
        if let Some(key) = span.and_then(|s| text.get(s)) {
            reason = format!("duplicate key `{}`", key.trim());
        }
    }
    ConfigError::Parse { line, reason }
}

pub fn parse_config(path: &Path) -> Result<Scenario, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let default_name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
    parse_config_str(&text, default_name)
}

pub fn parse_config_str(text: &str, default_name: &str) -> Result<Scenario, ConfigError> {
    if text.trim().is_empty() {
        return Err(ConfigError::Parse {
            line: 1,
            reason: "empty configuration; a [model] section is required".into(),
        });
    }
    let raw: RawScenario = toml::from_str(text).map_err(|e| map_toml_error(text, e))?;
    let model = build_model(&raw.model)?;
    let report = model.violations();
    if !report.is_empty() {
        return Err(ConfigError::Invalid(ValidationReport(report)));
    }
    let run = build_run(raw.run, &model)?;
    let o = raw.outputs;
    Ok(Scenario {
        name: raw.name.unwrap_or_else(|| default_name.to_string()),
        model,
        run,
        outputs: Outputs {
            density: o.density.unwrap_or_else(|| "density.csv".into()),
            fk: o.fk.unwrap_or_else(|| "fk.csv".into()),
            oracle: o.oracle.unwrap_or_else(|| "oracle.csv".into()),
            residual: o.residual.unwrap_or_else(|| "residual.csv".into()),
            ck: o.ck.unwrap_or_else(|| "ck.csv".into()),
        },
    })
}

fn signal(field: &str, raw: &Option<RawSignal>) -> Result<TimeSignal, ConfigError> {
    Ok(match raw {
        None => TimeSignal::zero(),
        Some(RawSignal::Number(c)) => TimeSignal::constant(*c),
        Some(RawSignal::Name(n)) => match n.as_str() {
            "sin" => TimeSignal::sin(),
            "cos" => TimeSignal::cos(),
            "zero" => TimeSignal::zero(),
            other => return Err(invalid(field, format!("unknown signal `{other}`; use sin, cos, zero, a number or a table"))),
        },
        Some(RawSignal::Trig { constant, sin, cos }) => TimeSignal::from(Trig {
            constant: *constant,
            sin: *sin,
            cos: *cos,
        }),
    })
}

fn require<T: Copy>(field: &str, v: Option<T>) -> Result<T, ConfigError> {
    v.ok_or_else(|| invalid(field, "required key is missing"))
}

fn reject_foreign(raw: &RawModel, allowed: &[&str]) -> Result<(), ConfigError> {
    match raw.present_keys().into_iter().find(|k| !allowed.contains(k)) {
        Some(k) => Err(ConfigError::UnknownKey(k.to_string())),
        None => Ok(()),
    }
}

fn log_law(raw: &RawModel) -> Result<InitialLogLaw, ConfigError> {
    Ok(InitialLogLaw {
        mean: require("initial_log_mean", raw.initial_log_mean)?,
        variance: require("initial_log_variance", raw.initial_log_variance)?,
    })
}

fn build_model(raw: &RawModel) -> Result<Model, ConfigError> {
    let kind = raw.kind.as_deref().ok_or_else(|| invalid("kind", "required key is missing"))?;
    match kind {
        "additive" => {
            reject_foreign(
                raw,
                &[
                    "a", "b", "sigma", "noise", "truncation", "forcing", "boundary", "gamma", "gamma1", "gamma2", "g",
                    "h", "initial_mean", "initial_variance",
                ],
            )?;
            let truncation = raw.truncation.unwrap_or(10);
            let amplitudes = match &raw.noise {
                None => NoiseAmplitudes::Reciprocal,
                Some(RawNoise::List(v)) => NoiseAmplitudes::Explicit(v.clone()),
                Some(RawNoise::Name(n)) if n == "reciprocal" => NoiseAmplitudes::Reciprocal,
                Some(RawNoise::Name(n)) => match n.strip_prefix("single:").map(str::parse::<usize>) {
                    Some(Ok(mode)) => NoiseAmplitudes::SingleMode { mode, amplitude: 1.0 },
                    _ => {
                        return Err(invalid(
                            "noise",
                            format!("expected \"reciprocal\", a list, or \"single:m\"; got `{n}`"),
                        ))
                    }
                },
            };
            let forcing = match &raw.forcing {
                None => Forcing::Zero,
                Some(RawForcing::Name(n)) if n == "zero" => Forcing::Zero,
                Some(RawForcing::Name(n)) => return Err(invalid("forcing", format!("unknown forcing `{n}`"))),
                Some(RawForcing::Mode { mode, signal: s }) => Forcing::Mode {
                    n: *mode,
                    signal: signal("forcing.signal", &Some(clone_signal(s)))?,
                },
            };
            let (gamma, gamma1, gamma2) = (raw.gamma.unwrap_or(1.0), raw.gamma1.unwrap_or(1.0), raw.gamma2.unwrap_or(1.0));
            let condition = match &raw.boundary {
                None => BoundaryCondition::MainNeumannDirichlet,
                Some(RawBoundary::Name(n)) if n == "main" => BoundaryCondition::MainNeumannDirichlet,
                Some(RawBoundary::Name(n)) => {
                    return Err(invalid("boundary", format!("expected \"main\" or a catalogue row 1..8, got `{n}`")))
                }
                Some(RawBoundary::Row(r)) => BoundaryCondition::table_row(*r, gamma, gamma1, gamma2)
                    .ok_or_else(|| invalid("boundary", format!("catalogue rows are 1..8, got {r}")))?,
            };
            let means = raw.initial_mean.clone().unwrap_or_default();
            let vars = raw.initial_variance.clone().unwrap_or_default();
            let initial_modes = (0..means.len().max(vars.len()))
                .map(|i| ModeLaw {
                    mean: means.get(i).copied().unwrap_or(0.0),
                    variance: vars.get(i).copied().unwrap_or(0.0),
                })
                .collect();
            Ok(Model::Additive(AdditiveModel {
                a: require("a", raw.a)?,
                b: require("b", raw.b)?,
                sigma: require("sigma", raw.sigma)?,
                forcing,
                boundary: BoundaryCase::new(condition, signal("g", &raw.g)?, signal("h", &raw.h)?),
                noise: NoiseSpec::new(amplitudes, truncation),
                initial_modes,
            }))
        }
        "multiplicative" => {
            reject_foreign(
                raw,
                &[
                    "a", "b", "c", "alpha", "epsilon", "m", "q_m", "initial_log_mean", "initial_log_variance",
                    "stratonovich",
                ],
            )?;
            let epsilon = require("epsilon", raw.epsilon)?;
            let q_m = raw.q_m.unwrap_or(1.0);
            let c = require("c", raw.c)?;
            let c = if raw.stratonovich.unwrap_or(false) {
                stratonovich_to_ito(c, epsilon, q_m)
            } else {
                c
            };
            Ok(Model::Multiplicative(MultiplicativeModel {
                a: require("a", raw.a)?,
                b: require("b", raw.b)?,
                c,
                alpha: require("alpha", raw.alpha)?,
                epsilon,
                m: require("m", raw.m)?,
                q_m,
                initial: log_law(raw)?,
            }))
        }
        "kpz" => {
            reject_foreign(
                raw,
                &["theta", "xi", "epsilon", "m", "q_m", "initial_log_mean", "initial_log_variance", "window"],
            )?;
            let m = require("m", raw.m)?;
            let window = match raw.window {
                Some([lo, hi]) => (lo, hi),
                // the first nodal interval, trimmed by 5% of its width at each end
                None if m > 0 => (0.05 / m as f64, 0.95 / m as f64),
                None => (0.0, 1.0),
            };
            Ok(Model::Kpz(KpzModel {
                theta: require("theta", raw.theta)?,
                xi: require("xi", raw.xi)?,
                epsilon: require("epsilon", raw.epsilon)?,
                m,
                q_m: raw.q_m.unwrap_or(1.0),
                initial: log_law(raw)?,
                window,
            }))
        }
        other => Err(invalid("kind", format!("expected additive, multiplicative or kpz, got `{other}`"))),
    }
}

fn clone_signal(s: &RawSignal) -> RawSignal {
    match s {
        RawSignal::Number(c) => RawSignal::Number(*c),
        RawSignal::Name(n) => RawSignal::Name(n.clone()),
        RawSignal::Trig { constant, sin, cos } => RawSignal::Trig {
            constant: *constant,
            sin: *sin,
            cos: *cos,
        },
    }
}

fn check_finite_list(field: &str, v: &[f64]) -> Result<(), ConfigError> {
    if v.is_empty() {
        return Err(invalid(field, "grid must not be empty"));
    }
    if let Some(bad) = v.iter().find(|x| !x.is_finite()) {
        return Err(invalid(field, format!("grid values must be finite, got {bad}")));
    }
    Ok(())
}

fn positive(field: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(invalid(field, format!("must be positive and finite, got {v}")))
    }
}

fn build_run(raw: RawRun, model: &Model) -> Result<RunConfig, ConfigError> {
    let (default_t, default_dt, default_scheme) = match model {
        Model::Additive(_) => (1.0, 1e-2, SchemeChoice::Euler),
        Model::Multiplicative(_) => (0.3, 1e-4, SchemeChoice::ExactGbm),
        Model::Kpz(_) => (0.3, 1e-2, SchemeChoice::Euler),
    };
    let t = raw.t.unwrap_or_else(|| vec![default_t]);
    check_finite_list("run.t", &t)?;
    if let Some(bad) = t.iter().find(|v| **v < 0.0) {
        return Err(invalid("run.t", format!("times must be nonnegative, got {bad}")));
    }
    let x = raw.x.unwrap_or_else(|| vec![0.5]);
    check_finite_list("run.x", &x)?;
    if let Some(bad) = x.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(invalid("run.x", format!("positions must lie in [0, 1], got {bad}")));
    }
    let u_count = raw.u_count.unwrap_or(20);
    let u = match raw.u {
        None => UGrid::Auto {
            count: u_count,
            width: raw.u_width.unwrap_or(3.0),
        },
        Some(RawGrid::Name(n)) if n == "auto" => UGrid::Auto {
            count: u_count,
            width: raw.u_width.unwrap_or(3.0),
        },
        Some(RawGrid::Name(n)) => return Err(invalid("run.u", format!("expected \"auto\", a list or a range, got `{n}`"))),
        Some(RawGrid::List(v)) => {
            check_finite_list("run.u", &v)?;
            UGrid::List(v)
        }
        Some(RawGrid::Range { min, max, count }) => {
            if count < 2 || min.partial_cmp(&max) != Some(std::cmp::Ordering::Less) {
                return Err(invalid("run.u", "range needs min < max and count >= 2"));
            }
            UGrid::List((0..count).map(|i| min + (max - min) * i as f64 / (count - 1) as f64).collect())
        }
    };
    if let UGrid::Auto { count, width } = u {
        if count < 2 {
            return Err(invalid("run.u_count", "need at least 2 points"));
        }
        positive("run.u_width", width)?;
    }
    let t_max = t.iter().cloned().fold(0.0, f64::max);
    let horizon = raw.horizon.unwrap_or(match model {
        Model::Additive(_) => 2.0 * t_max.max(0.5),
        _ => t_max.max(0.5),
    });
    if horizon < t_max {
        return Err(invalid("run.horizon", format!("T = {horizon} is smaller than the largest t = {t_max}")));
    }
    let scheme = match raw.scheme.as_deref() {
        None => default_scheme,
        Some("euler") => SchemeChoice::Euler,
        Some("exact-gbm") if matches!(model, Model::Multiplicative(_)) => SchemeChoice::ExactGbm,
        Some("exact") if matches!(model, Model::Kpz(_)) => SchemeChoice::Exact,
        Some("step-averaged") if matches!(model, Model::Additive(_)) => SchemeChoice::StepAveraged,
        Some(other) => return Err(invalid("run.scheme", format!("scheme `{other}` is not available for this model"))),
    };
    let n_paths = raw.n_paths.unwrap_or(10_000);
    if n_paths < 2 {
        return Err(invalid("run.n_paths", "need at least 2 paths"));
    }
    let oracle_samples = raw.oracle_samples.unwrap_or(10_000);
    if oracle_samples < 2 {
        return Err(invalid("run.oracle_samples", "need at least 2 samples"));
    }
    if let Some(n) = raw.n_modes {
        if n == 0 || n > crate::spectral::MAX_MODES {
            return Err(invalid("run.n_modes", format!("must lie in 1..={}", crate::spectral::MAX_MODES)));
        }
    }
    if let Some(tol) = raw.tail_tol {
        positive("run.tail_tol", tol)?;
    }

    let rr = raw.residual.unwrap_or_default();
    let (rt, rdu, rdt) = match model {
        Model::Additive(_) => ([0.5, 1.5], 0.1, 0.1),
        Model::Multiplicative(_) => ([0.1, 0.5], 0.0, 0.0),
        Model::Kpz(_) => ([0.1, 0.5], 0.1, 0.01),
    };
    let residual = ResidualConfig {
        x: rr.x.unwrap_or(x[0]),
        t_range: rr.t.unwrap_or(rt),
        t_count: rr.t_count.unwrap_or(5),
        z_count: rr.z_count.unwrap_or(21),
        z_width: rr.z_width.unwrap_or(3.0),
        du: rr.du.unwrap_or(rdu),
        dt: rr.dt.unwrap_or(rdt),
        levels: rr.levels.unwrap_or(3),
        coefficients: match rr.coefficients.as_deref() {
            None | Some("corrected") => CoefficientChoice::Corrected,
            Some("uncorrected") => CoefficientChoice::Uncorrected,
            Some(other) => {
                return Err(invalid(
                    "run.residual.coefficients",
                    format!("expected corrected or uncorrected, got `{other}`"),
                ))
            }
        },
    };
    if !matches!(model, Model::Multiplicative(_)) {
        positive("run.residual.du", residual.du)?;
        positive("run.residual.dt", residual.dt)?;
        if residual.levels == 0 {
            return Err(invalid("run.residual.levels", "need at least one level"));
        }
    }
    if residual.t_count == 0 || residual.z_count == 0 || residual.t_range[0].partial_cmp(&residual.t_range[1]).is_none_or(|o| o.is_gt()) {
        return Err(invalid("run.residual", "need t_count, z_count >= 1 and t[0] <= t[1]"));
    }

    let rc = raw.ck.unwrap_or_default();
    let ck = CkConfig {
        s: rc.s.unwrap_or(0.2),
        r: rc.r.unwrap_or(0.5),
        t: rc.t.unwrap_or(1.0),
        w: rc.w.unwrap_or(match model {
            Model::Multiplicative(m) => crate::spectral::basis_eval(crate::spectral::Basis::Sine, m.m, x[0]).signum(),
            _ => 0.0,
        }),
        x: rc.x.unwrap_or(x[0]),
        mode: rc.mode.unwrap_or(1),
        u_count: rc.u_count.unwrap_or(20),
    };
    if !(0.0 <= ck.s && ck.s <= ck.r && ck.r < ck.t) {
        return Err(invalid("run.ck", "need 0 <= s <= r < t"));
    }

    Ok(RunConfig {
        t,
        x,
        u,
        horizon,
        dt: positive("run.dt", raw.dt.unwrap_or(default_dt))?,
        n_paths,
        seed: raw.seed.unwrap_or(0),
        n_modes: raw.n_modes,
        tail_tol: raw.tail_tol,
        oracle_samples,
        scheme,
        residual,
        ck,
    })
}
