//! Model parameters for the three equations and their invariants.
//!
//! * [`AdditiveModel`]: heat equation with additive Q-Wiener noise, a
//!   deterministic forcing and non-homogeneous boundary data.
//! * [`MultiplicativeModel`]: heat equation with a fractional (nonlocal)
//!   diffusion term, multiplicative noise and a single excited sine mode.
//! * [`KpzModel`]: the KPZ equation obtained from the multiplicative model
//!   through the Cole-Hopf map `K = 2θ ln|U| / ξ`.
//!
//! Models are plain immutable data. [`Validate::validate`] checks every
//! invariant at once and reports all violations with their field paths.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{InvalidParameter, ValidationReport};
use crate::homogenization::BoundaryCase;

/// Step used for central differences when a signal has no analytic derivative.
pub const FD_STEP: f64 = 1e-6;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type FieldFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// A scalar function of time, either in closed trigonometric form
/// `constant + sin·sin(t) + cos·cos(t)` or an arbitrary handle.
#[derive(Clone)]
pub enum TimeSignal {
    Trig { constant: f64, sin: f64, cos: f64 },
    Custom {
        value: ScalarFn,
        derivative: Option<ScalarFn>,
    },
}

/// Coefficients of `c + s·sin(t) + k·cos(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Trig {
    pub constant: f64,
    pub sin: f64,
    pub cos: f64,
}

impl Trig {
    pub fn eval(&self, t: f64) -> f64 {
        self.constant + self.sin * t.sin() + self.cos * t.cos()
    }

    pub fn derivative(&self) -> Trig {
        Trig {
            constant: 0.0,
            sin: -self.cos,
            cos: self.sin,
        }
    }

    pub fn scale(&self, k: f64) -> Trig {
        Trig {
            constant: k * self.constant,
            sin: k * self.sin,
            cos: k * self.cos,
        }
    }

    pub fn add(&self, other: &Trig) -> Trig {
        Trig {
            constant: self.constant + other.constant,
            sin: self.sin + other.sin,
            cos: self.cos + other.cos,
        }
    }
}

impl TimeSignal {
    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn constant(c: f64) -> Self {
        TimeSignal::Trig {
            constant: c,
            sin: 0.0,
            cos: 0.0,
        }
    }

    pub fn sin() -> Self {
        TimeSignal::Trig {
            constant: 0.0,
            sin: 1.0,
            cos: 0.0,
        }
    }

    pub fn cos() -> Self {
        TimeSignal::Trig {
            constant: 0.0,
            sin: 0.0,
            cos: 1.0,
        }
    }

    /// Arbitrary handle; the derivative falls back to central differences.
    pub fn custom(value: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        TimeSignal::Custom {
            value: Arc::new(value),
            derivative: None,
        }
    }

    pub fn custom_with_derivative(
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        derivative: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        TimeSignal::Custom {
            value: Arc::new(value),
            derivative: Some(Arc::new(derivative)),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeSignal::Trig { constant, sin, cos } => constant + sin * t.sin() + cos * t.cos(),
            TimeSignal::Custom { value, .. } => value(t),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match self {
            TimeSignal::Trig { sin, cos, .. } => sin * t.cos() - cos * t.sin(),
            TimeSignal::Custom {
                derivative: Some(d),
                ..
            } => d(t),
            TimeSignal::Custom { value, .. } => {
                (value(t + FD_STEP) - value(t - FD_STEP)) / (2.0 * FD_STEP)
            }
        }
    }

    /// Whether [`derivative`](Self::derivative) is exact rather than a finite difference.
    pub fn has_analytic_derivative(&self) -> bool {
        !matches!(
            self,
            TimeSignal::Custom {
                derivative: None,
                ..
            }
        )
    }

    pub fn as_trig(&self) -> Option<Trig> {
        match *self {
            TimeSignal::Trig { constant, sin, cos } => Some(Trig { constant, sin, cos }),
            TimeSignal::Custom { .. } => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.as_trig(), Some(t) if t == Trig::default())
    }
}

impl From<Trig> for TimeSignal {
    fn from(t: Trig) -> Self {
        TimeSignal::Trig {
            constant: t.constant,
            sin: t.sin,
            cos: t.cos,
        }
    }
}

impl fmt::Debug for TimeSignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeSignal::Trig { constant, sin, cos } => {
                write!(f, "Trig({constant} + {sin} sin t + {cos} cos t)")
            }
            TimeSignal::Custom { derivative, .. } => write!(
                f,
                "Custom(analytic derivative: {})",
                derivative.is_some()
            ),
        }
    }
}

/// Deterministic forcing `f(t, x)` of the additive equation.
#[derive(Clone)]
pub enum Forcing {
    Zero,
    /// `signal(t) · √2 cos((n − ½)πx)`, a single cosine eigenmode.
    Mode { n: usize, signal: TimeSignal },
    Custom(FieldFn),
}

impl Forcing {
    pub fn custom(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Forcing::Custom(Arc::new(f))
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        match self {
            Forcing::Zero => 0.0,
            Forcing::Mode { n, signal } => {
                signal.eval(t) * crate::spectral::basis_eval(crate::spectral::Basis::Cosine, *n, x)
            }
            Forcing::Custom(f) => f(t, x),
        }
    }
}

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Forcing::Zero => f.write_str("Zero"),
            Forcing::Mode { n, signal } => write!(f, "Mode({n}, {signal:?})"),
            Forcing::Custom(_) => f.write_str("Custom"),
        }
    }
}

/// Rule producing the noise amplitudes `q_n`.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseAmplitudes {
    /// `q_n = 1/n`.
    Reciprocal,
    /// `q_1, q_2, …`; amplitudes past the end of the list are zero.
    Explicit(Vec<f64>),
    /// `q_mode = amplitude`, all others zero.
    SingleMode { mode: usize, amplitude: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub amplitudes: NoiseAmplitudes,
    /// Number of modes `N` retained by default.
    pub truncation: usize,
}

impl NoiseSpec {
    pub fn new(amplitudes: NoiseAmplitudes, truncation: usize) -> Self {
        Self {
            amplitudes,
            truncation,
        }
    }

    /// `q_n`, one-based.
    pub fn q(&self, n: usize) -> f64 {
        match &self.amplitudes {
            NoiseAmplitudes::Reciprocal => 1.0 / n as f64,
            NoiseAmplitudes::Explicit(v) => v.get(n.wrapping_sub(1)).copied().unwrap_or(0.0),
            NoiseAmplitudes::SingleMode { mode, amplitude } => {
                if n == *mode {
                    *amplitude
                } else {
                    0.0
                }
            }
        }
    }

    /// `Σ_{n≤N} q_n²`.
    pub fn truncated_trace(&self, n_modes: usize) -> f64 {
        (1..=n_modes).map(|n| self.q(n).powi(2)).sum()
    }

    /// `Σ_{n>N} q_n²`, the part of the trace left out by truncation at `N`.
    pub fn trace_tail(&self, n_modes: usize) -> f64 {
        match &self.amplitudes {
            NoiseAmplitudes::Reciprocal => {
                // Partial sums summed smallest-first; the tail is small next to π²/6.
                let head: f64 = (1..=n_modes).rev().map(|n| 1.0 / (n as f64).powi(2)).sum();
                (PI * PI / 6.0 - head).max(0.0)
            }
            NoiseAmplitudes::Explicit(v) => v.iter().skip(n_modes).map(|q| q * q).sum(),
            NoiseAmplitudes::SingleMode { mode, amplitude } => {
                if *mode > n_modes {
                    amplitude * amplitude
                } else {
                    0.0
                }
            }
        }
    }

    fn violations(&self, prefix: &str, out: &mut Vec<InvalidParameter>) {
        if self.truncation == 0 {
            out.push(InvalidParameter::new(
                format!("{prefix}.truncation"),
                "truncation order must be positive",
            ));
        }
        match &self.amplitudes {
            NoiseAmplitudes::Reciprocal => {}
            NoiseAmplitudes::Explicit(v) => {
                for (i, q) in v.iter().enumerate() {
                    if !(q.is_finite() && *q >= 0.0) {
                        out.push(InvalidParameter::new(
                            format!("{prefix}.amplitudes[{}]", i + 1),
                            format!("q_n must be finite and nonnegative, got {q}"),
                        ));
                    }
                }
            }
            NoiseAmplitudes::SingleMode { mode, amplitude } => {
                if *mode == 0 {
                    out.push(InvalidParameter::new(
                        format!("{prefix}.amplitudes.mode"),
                        "mode index is one-based",
                    ));
                }
                if !(amplitude.is_finite() && *amplitude >= 0.0) {
                    out.push(InvalidParameter::new(
                        format!("{prefix}.amplitudes.amplitude"),
                        format!("q_m must be finite and nonnegative, got {amplitude}"),
                    ));
                }
            }
        }
    }
}

/// Normal law `N(mean, variance)` of one initial Fourier coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ModeLaw {
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone)]
pub struct AdditiveModel {
    pub a: f64,
    pub b: f64,
    pub sigma: f64,
    pub forcing: Forcing,
    pub boundary: BoundaryCase,
    pub noise: NoiseSpec,
    /// Laws of `⟨U(0,·), e_n⟩` for n = 1, 2, …; missing modes are deterministic zeros.
    pub initial_modes: Vec<ModeLaw>,
}

impl AdditiveModel {
    pub fn initial_mode(&self, n: usize) -> ModeLaw {
        self.initial_modes
            .get(n.wrapping_sub(1))
            .copied()
            .unwrap_or_default()
    }
}

/// Law of `ln U_m(0)`: mean and variance of a normal distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialLogLaw {
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiplicativeModel {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub m: usize,
    pub q_m: f64,
    pub initial: InitialLogLaw,
}

impl MultiplicativeModel {
    /// `λ_m = c − a²(mπ)² − b(mπ)^α`.
    pub fn lambda_m(&self) -> f64 {
        crate::spectral::lambda_nonlocal(self.m, self.a, self.b, self.c, self.alpha)
    }

    /// `ε_m = ε q_m`.
    pub fn eps_m(&self) -> f64 {
        self.epsilon * self.q_m
    }

    /// Log-drift `b_m = λ_m − ε_m²/2`.
    pub fn b_m(&self) -> f64 {
        self.lambda_m() - 0.5 * self.eps_m().powi(2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KpzModel {
    pub theta: f64,
    pub xi: f64,
    pub epsilon: f64,
    pub m: usize,
    pub q_m: f64,
    pub initial: InitialLogLaw,
    /// Open spatial window `(lower, upper)` between two zeros of `sin(mπx)`.
    pub window: (f64, f64),
}

impl KpzModel {
    /// `b̃_m = −θ(mπ)² − (ε q_m)²/2`.
    pub fn b_tilde(&self) -> f64 {
        -self.theta * (self.m as f64 * PI).powi(2) - 0.5 * (self.epsilon * self.q_m).powi(2)
    }

    /// Cole-Hopf scale `2θ/ξ`.
    pub fn scale(&self) -> f64 {
        2.0 * self.theta / self.xi
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.window.0 && x < self.window.1
    }
}

/// One of the three supported models.
#[derive(Debug, Clone)]
pub enum Model {
    Additive(AdditiveModel),
    Multiplicative(MultiplicativeModel),
    Kpz(KpzModel),
}

/// Invariant checking shared by all model types.
pub trait Validate: Sized {
    /// All violated invariants; empty when the value is valid.
    fn violations(&self) -> Vec<InvalidParameter>;

    fn validate(self) -> Result<Self, ValidationReport> {
        let v = self.violations();
        if v.is_empty() {
            Ok(self)
        } else {
            Err(ValidationReport(v))
        }
    }
}

fn check_finite(out: &mut Vec<InvalidParameter>, field: &str, value: f64) {
    if !value.is_finite() {
        out.push(InvalidParameter::new(field, format!("must be finite, got {value}")));
    }
}

fn log_law_violations(law: &InitialLogLaw, out: &mut Vec<InvalidParameter>) {
    check_finite(out, "initial.mean", law.mean);
    if !(law.variance.is_finite() && law.variance >= 0.0) {
        out.push(InvalidParameter::new(
            "initial.variance",
            format!("Var[ln U_m(0)] must be finite and nonnegative, got {}", law.variance),
        ));
    }
}

impl Validate for AdditiveModel {
    fn violations(&self) -> Vec<InvalidParameter> {
        let mut out = Vec::new();
        check_finite(&mut out, "a", self.a);
        check_finite(&mut out, "b", self.b);
        check_finite(&mut out, "sigma", self.sigma);
        self.noise.violations("noise", &mut out);
        out.extend(self.boundary.violations());
        if let Forcing::Mode { n: 0, .. } = self.forcing {
            out.push(InvalidParameter::new("forcing.mode", "mode index is one-based"));
        }
        let mut abs_mean = 0.0;
        let mut var_sum = 0.0;
        for (i, law) in self.initial_modes.iter().enumerate() {
            let n = i + 1;
            if !law.mean.is_finite() {
                out.push(InvalidParameter::new(
                    format!("initial_modes[{n}].mean"),
                    format!("must be finite, got {}", law.mean),
                ));
            }
            if !(law.variance.is_finite() && law.variance >= 0.0) {
                out.push(InvalidParameter::new(
                    format!("initial_modes[{n}].variance"),
                    format!("nu_n(0) must be finite and nonnegative, got {}", law.variance),
                ));
            }
            abs_mean += law.mean.abs();
            var_sum += law.variance.abs();
        }
        if !abs_mean.is_finite() {
            out.push(InvalidParameter::new("initial_modes", "sum of |mu_n(0)| diverges"));
        }
        if !var_sum.is_finite() {
            out.push(InvalidParameter::new("initial_modes", "sum of nu_n(0) diverges"));
        }
        out
    }
}

impl Validate for MultiplicativeModel {
    fn violations(&self) -> Vec<InvalidParameter> {
        let mut out = Vec::new();
        check_finite(&mut out, "a", self.a);
        check_finite(&mut out, "b", self.b);
        check_finite(&mut out, "c", self.c);
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            out.push(InvalidParameter::new(
                "alpha",
                format!("fractional order must lie in (0, 2), got {}", self.alpha),
            ));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            out.push(InvalidParameter::new(
                "epsilon",
                format!("noise intensity must be positive, got {}", self.epsilon),
            ));
        }
        if self.m == 0 {
            out.push(InvalidParameter::new("m", "excited mode must be >= 1"));
        }
        if !(self.q_m.is_finite() && self.q_m >= 0.0) {
            out.push(InvalidParameter::new(
                "q_m",
                format!("noise amplitude must be nonnegative, got {}", self.q_m),
            ));
        }
        log_law_violations(&self.initial, &mut out);
        if out.is_empty() && !self.b_m().is_finite() {
            out.push(InvalidParameter::new("b_m", "derived log-drift is not finite"));
        }
        out
    }
}

impl Validate for KpzModel {
    fn violations(&self) -> Vec<InvalidParameter> {
        let mut out = Vec::new();
        if !(self.theta.is_finite() && self.theta > 0.0) {
            out.push(InvalidParameter::new(
                "theta",
                format!("must be positive, got {}", self.theta),
            ));
        }
        if !(self.xi.is_finite() && self.xi != 0.0) {
            out.push(InvalidParameter::new(
                "xi",
                format!("must be finite and nonzero, got {}", self.xi),
            ));
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            out.push(InvalidParameter::new(
                "epsilon",
                format!("noise intensity must be positive, got {}", self.epsilon),
            ));
        }
        if self.m == 0 {
            out.push(InvalidParameter::new("m", "excited mode must be >= 1"));
        }
        if !(self.q_m.is_finite() && self.q_m >= 0.0) {
            out.push(InvalidParameter::new(
                "q_m",
                format!("noise amplitude must be nonnegative, got {}", self.q_m),
            ));
        }
        log_law_violations(&self.initial, &mut out);
        let (lo, hi) = self.window;
        if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo < hi && hi <= 1.0) {
            out.push(InvalidParameter::new(
                "window",
                format!("need 0 <= lower < upper <= 1, got ({lo}, {hi})"),
            ));
        } else if self.m > 0 {
            let m = self.m as f64;
            let on_zero = |x: f64| ((m * x).round() - m * x).abs() <= 1e-12;
            if on_zero(lo) || on_zero(hi) {
                out.push(InvalidParameter::new(
                    "window",
                    format!("endpoints of ({lo}, {hi}) must avoid the zeros k/{} of sin(m pi x)", self.m),
                ));
            } else if (m * lo).floor() != (m * hi).floor() {
                out.push(InvalidParameter::new(
                    "window",
                    format!("({lo}, {hi}) straddles a zero of sin({} pi x)", self.m),
                ));
            }
        }
        if out.is_empty() && !self.b_tilde().is_finite() {
            out.push(InvalidParameter::new("b_tilde", "derived log-drift is not finite"));
        }
        out
    }
}

impl Validate for Model {
    fn violations(&self) -> Vec<InvalidParameter> {
        match self {
            Model::Additive(m) => m.violations(),
            Model::Multiplicative(m) => m.violations(),
            Model::Kpz(m) => m.violations(),
        }
    }
}

/// Itô reaction coefficient of a Stratonovich equation with noise `ε ∘ U dW_m`:
/// `c = drift + (ε q_m)²/2`.
pub fn stratonovich_to_ito(drift_constant: f64, epsilon: f64, q_m: f64) -> f64 {
    drift_constant + 0.5 * (epsilon * q_m).powi(2)
}

/// Inverse of [`stratonovich_to_ito`].
pub fn ito_to_stratonovich(c: f64, epsilon: f64, q_m: f64) -> f64 {
    c - 0.5 * (epsilon * q_m).powi(2)
}
