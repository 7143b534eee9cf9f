//! Eigenfunction expansion of the additive equation.
//!
//! With the lift `Y` removed, each cosine mode `V_n(t)` of the homogeneous
//! problem is an Ornstein-Uhlenbeck process
//!
//! ```text
//! dV_n = (λ_n V_n + f̃_n(t)) dt + σ q_n dW_n,   λ_n = b − (a β_n)²,
//! ```
//!
//! so `U(t,x) = Y(t,x) + Σ V_n(t) e_n(x)` is Gaussian with mean `μ(t,x)` and
//! variance `ν(t,x)` given as mode sums. [`AdditiveSpectrum`] evaluates those
//! sums, their exact time derivatives, and rigorous bounds on the neglected
//! tails.

use std::f64::consts::{PI, SQRT_2};

use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::homogenization::{build_lift, effective_forcing, BoundaryCondition, EffectiveForcing, LiftFunction};
use crate::model::{AdditiveModel, Forcing, Trig, Validate};
use crate::quadrature::{adaptive_simpson, gauss_legendre, DEFAULT_LEGENDRE_ORDER};

/// Largest supported truncation order.
pub const MAX_MODES: usize = 10_000;

/// Absolute tolerance of the adaptive time convolution on the quadrature route.
pub const TIME_QUADRATURE_TOL: f64 = 1e-10;

const TAIL_EXPLICIT_TERMS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    /// `e_n(x) = √2 cos((n − ½)πx)`: Neumann at 0, Dirichlet at 1.
    Cosine,
    /// `ẽ_n(x) = √2 sin(nπx)`: Dirichlet at both ends.
    Sine,
}

/// `sin(πy)`, exactly zero at integers.
pub fn sin_pi(y: f64) -> f64 {
    let r = y % 2.0;
    let r = if r < 0.0 { r + 2.0 } else { r };
    // r in [0, 2); reduce to a quarter period.
    let (r, sign) = if r >= 1.0 { (r - 1.0, -1.0) } else { (r, 1.0) };
    let v = if r == 0.0 {
        0.0
    } else if r <= 0.25 {
        (PI * r).sin()
    } else if r <= 0.75 {
        (PI * (0.5 - r)).cos()
    } else {
        (PI * (1.0 - r)).sin()
    };
    sign * v
}

/// `cos(πy)`, exactly zero at half-integers.
pub fn cos_pi(y: f64) -> f64 {
    sin_pi(y + 0.5)
}

pub fn basis_eval(basis: Basis, n: usize, x: f64) -> f64 {
    match basis {
        Basis::Cosine => SQRT_2 * cos_pi((n as f64 - 0.5) * x),
        Basis::Sine => SQRT_2 * sin_pi(n as f64 * x),
    }
}

/// `β_n = (n − ½)π`.
pub fn beta(n: usize) -> f64 {
    (n as f64 - 0.5) * PI
}

/// `λ_n = b − (a β_n)²`.
pub fn lambda_additive(n: usize, a: f64, b: f64) -> f64 {
    b - (a * beta(n)).powi(2)
}

/// `λ_n = c − a²(nπ)² − b(nπ)^α`.
pub fn lambda_nonlocal(n: usize, a: f64, b: f64, c: f64, alpha: f64) -> f64 {
    let k = n as f64 * PI;
    c - a * a * k * k - b * k.powf(alpha)
}

/// `(e^{2λt} − 1)/(2λ)`, continuous through `λ = 0` where it equals `t`.
pub fn exprel2(lambda: f64, t: f64) -> f64 {
    let z = 2.0 * lambda * t;
    if z.abs() < 1e-4 {
        t * (1.0 + lambda * t + z * z / 6.0)
    } else {
        z.exp_m1() / (2.0 * lambda)
    }
}

/// `(e^{λt} − 1)/λ`, continuous through `λ = 0`.
pub fn exprel1(lambda: f64, t: f64) -> f64 {
    2.0 * exprel2(0.5 * lambda, t)
}

/// `∫₀¹ f(x) basis_n(x) dx` by composite Gauss-Legendre with `order` nodes per panel.
pub fn fourier_coefficient<F: Fn(f64) -> f64>(f: F, basis: Basis, n: usize, order: usize) -> f64 {
    let panels = 1 + n / 32;
    gauss_legendre(|x| f(x) * basis_eval(basis, n, x), 0.0, 1.0, order, panels)
}

/// `ν_n(t,x) = ν_n(0)e_n² e^{2λt} + (σ q_n e_n)² (e^{2λt} − 1)/(2λ)`, where
/// `basis_value = e_n(x)` and `noise = σ q_n`.
pub fn mode_variance(basis_value: f64, t: f64, noise: f64, nu0: f64, lambda: f64) -> f64 {
    let e2 = basis_value * basis_value;
    nu0 * e2 * (2.0 * lambda * t).exp() + noise * noise * e2 * exprel2(lambda, t)
}

/// `∫ₛᵗ e^{λ(t−r)} (c + α sin r + κ cos r) dr` in closed form.
pub fn trig_response(lambda: f64, s: f64, t: f64, f: &Trig) -> f64 {
    let tau = t - s;
    let decay = (lambda * tau).exp();
    let denom = 1.0 + lambda * lambda;
    let sin_part = ((-lambda * t.sin() - t.cos()) - decay * (-lambda * s.sin() - s.cos())) / denom;
    let cos_part = ((t.sin() - lambda * t.cos()) - decay * (s.sin() - lambda * s.cos())) / denom;
    f.constant * exprel1(lambda, tau) + f.sin * sin_part + f.cos * cos_part
}

/// `⟨x^k, e_n⟩` for `k = 0, 1, 2` on the cosine basis, in closed form.
fn cosine_monomial_moments(n: usize) -> [f64; 3] {
    let b = beta(n);
    let s = if n % 2 == 1 { 1.0 } else { -1.0 }; // sin β_n
    [
        SQRT_2 * s / b,
        SQRT_2 * (s / b - 1.0 / (b * b)),
        SQRT_2 * (s / b - 2.0 * s / (b * b * b)),
    ]
}

fn project(profile: &crate::homogenization::Quadratic, moments: &[f64; 3]) -> f64 {
    profile.0.iter().zip(moments).map(|(c, m)| c * m).sum()
}

/// How `f̃_n(s)` and its time convolution are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForcingRoute {
    /// Closed form whenever forcing and boundary data are trigonometric,
    /// quadrature otherwise.
    Auto,
    /// Always project `f̃` by Gauss-Legendre and convolve by adaptive Simpson.
    Quadrature,
}

#[derive(Debug, Clone)]
struct ModeData {
    lambda: f64,
    noise: f64,
    mean0: f64,
    var0: f64,
    g_proj: f64,
    h_proj: f64,
    forcing: Option<Trig>,
}

/// Mean and variance of `U(t,x)` from `n_modes` terms, with tail certificates.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentField {
    pub t: f64,
    pub x: f64,
    pub mu: f64,
    pub nu: f64,
    pub n_modes: usize,
    /// Bound on `|Σ_{n>N} μ_n(t,x)|`.
    pub tail_bound_mu: f64,
    /// Bound on `Σ_{n>N} ν_n(t,x)`.
    pub tail_bound_nu: f64,
    /// Both tails are below the tolerance requested from [`AdditiveSpectrum::sum_series`].
    pub certified: bool,
}

impl MomentField {
    pub fn certify(self, tol: f64) -> Result<Self> {
        if self.certified {
            Ok(self)
        } else {
            Err(Error::TailNotCertified {
                cap: self.n_modes,
                tail_mu: self.tail_bound_mu,
                tail_nu: self.tail_bound_nu,
                tol,
            })
        }
    }
}

/// `M = −∂ₜμ` and `G = ∂ₜν` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftDiffusion {
    pub t: f64,
    pub x: f64,
    pub m: f64,
    pub g: f64,
}

impl DriftDiffusion {
    pub fn require_positive(self) -> Result<Self> {
        if self.g > 0.0 {
            Ok(self)
        } else {
            Err(Error::NonPositiveDiffusion {
                t: self.t,
                x: self.x,
                value: self.g,
            })
        }
    }
}

/// Per-mode data of a validated additive model on the cosine basis.
#[derive(Debug, Clone)]
pub struct AdditiveSpectrum {
    model: AdditiveModel,
    lift: LiftFunction,
    forcing: EffectiveForcing,
    route: ForcingRoute,
    modes: Vec<ModeData>,
}

impl AdditiveSpectrum {
    /// Validates the model and tabulates `max(truncation, #initial modes)` modes.
    pub fn new(model: AdditiveModel) -> Result<Self> {
        let cap = model.noise.truncation.max(model.initial_modes.len());
        Self::with_options(model, cap, ForcingRoute::Auto)
    }

    pub fn with_options(model: AdditiveModel, mode_cap: usize, route: ForcingRoute) -> Result<Self> {
        let model = model.validate()?;
        if model.boundary.condition != BoundaryCondition::MainNeumannDirichlet {
            return Err(Error::UnsupportedBoundary(model.boundary.condition.name()));
        }
        if mode_cap == 0 || mode_cap > MAX_MODES {
            return Err(Error::InvalidArgument(format!(
                "mode cap must lie in 1..={MAX_MODES}, got {mode_cap}"
            )));
        }
        let lift = build_lift(&model.boundary)?;
        let forcing = effective_forcing(&model.forcing, &lift, model.b);
        let trig_data = match (&model.forcing, lift.g.as_trig(), lift.h.as_trig()) {
            (Forcing::Zero, Some(g), Some(h)) => Some((None, g, h)),
            (Forcing::Mode { n, signal }, Some(g), Some(h)) => signal.as_trig().map(|s| (Some((*n, s)), g, h)),
            _ => None,
        };
        let modes = (1..=mode_cap)
            .map(|n| {
                let moments = cosine_monomial_moments(n);
                let g_proj = project(&lift.g_profile, &moments);
                let h_proj = project(&lift.h_profile, &moments);
                let law = model.initial_mode(n);
                let forcing = trig_data.as_ref().map(|(mode, g, h)| {
                    // f̃_n = f_n − g'G_n − h'H_n + b(gG_n + hH_n)
                    let mut f = g
                        .scale(model.b)
                        .add(&g.derivative().scale(-1.0))
                        .scale(g_proj)
                        .add(&h.scale(model.b).add(&h.derivative().scale(-1.0)).scale(h_proj));
                    if let Some((k, s)) = mode {
                        if *k == n {
                            f = f.add(s);
                        }
                    }
                    f
                });
                ModeData {
                    lambda: lambda_additive(n, model.a, model.b),
                    noise: model.sigma * model.noise.q(n),
                    mean0: law.mean,
                    var0: law.variance,
                    g_proj,
                    h_proj,
                    forcing,
                }
            })
            .collect();
        Ok(Self {
            model,
            lift,
            forcing,
            route,
            modes,
        })
    }

    pub fn model(&self) -> &AdditiveModel {
        &self.model
    }

    pub fn lift(&self) -> &LiftFunction {
        &self.lift
    }

    pub fn effective_forcing(&self) -> &EffectiveForcing {
        &self.forcing
    }

    pub fn mode_cap(&self) -> usize {
        self.modes.len()
    }

    /// Truncation order from the model's noise specification.
    pub fn default_modes(&self) -> usize {
        self.model.noise.truncation.min(self.mode_cap())
    }

    /// Whether mode convolutions use the trigonometric closed form.
    pub fn uses_closed_form(&self) -> bool {
        self.route == ForcingRoute::Auto && self.modes[0].forcing.is_some()
    }

    fn mode(&self, n: usize) -> Result<&ModeData> {
        self.modes.get(n.wrapping_sub(1)).ok_or_else(|| {
            Error::InvalidArgument(format!("mode {n} outside 1..={}", self.modes.len()))
        })
    }

    pub fn lambda(&self, n: usize) -> Result<f64> {
        Ok(self.mode(n)?.lambda)
    }

    /// `σ q_n`.
    pub fn noise(&self, n: usize) -> Result<f64> {
        Ok(self.mode(n)?.noise)
    }

    /// `y_n(t) = ⟨Y(t,·), e_n⟩`.
    pub fn lift_coefficient(&self, n: usize, t: f64) -> Result<f64> {
        let m = self.mode(n)?;
        Ok(self.lift.g.eval(t) * m.g_proj + self.lift.h.eval(t) * m.h_proj)
    }

    /// `f̃_n(s) = ⟨f̃(s,·), e_n⟩`.
    pub fn mode_forcing(&self, n: usize, s: f64) -> Result<f64> {
        let m = self.mode(n)?;
        Ok(match (self.route, &m.forcing) {
            (ForcingRoute::Auto, Some(trig)) => trig.eval(s),
            _ => fourier_coefficient(|x| self.forcing.eval(s, x), Basis::Cosine, n, DEFAULT_LEGENDRE_ORDER),
        })
    }

    /// `∫ₛᵗ e^{λ_n(t−r)} f̃_n(r) dr`.
    pub fn forced_response(&self, n: usize, s: f64, t: f64) -> Result<f64> {
        let m = self.mode(n)?;
        match (self.route, &m.forcing) {
            (ForcingRoute::Auto, Some(trig)) => Ok(trig_response(m.lambda, s, t, trig)),
            _ => {
                let lambda = m.lambda;
                adaptive_simpson(
                    |r| {
                        let fr = fourier_coefficient(
                            |x| self.forcing.eval(r, x),
                            Basis::Cosine,
                            n,
                            DEFAULT_LEGENDRE_ORDER,
                        );
                        (lambda * (t - r)).exp() * fr
                    },
                    s,
                    t,
                    TIME_QUADRATURE_TOL,
                    50,
                )
            }
        }
    }

    /// Mean of the homogeneous-problem coefficient `V_n(t)`.
    fn v_mean(&self, n: usize, t: f64) -> Result<f64> {
        let m = self.mode(n)?;
        let y0 = self.lift_coefficient(n, 0.0)?;
        Ok((m.mean0 - y0) * (m.lambda * t).exp() + self.forced_response(n, 0.0, t)?)
    }

    /// `μ_n(t,x) = [μ_n(0)e_n(x) − Y_n(0,x)]e^{λ_n t} + ∫₀ᵗ e^{λ_n(t−s)} f̃_n(s,x) ds + Y_n(t,x)`.
    pub fn mode_mean(&self, n: usize, t: f64, x: f64) -> Result<f64> {
        let e = basis_eval(Basis::Cosine, n, x);
        Ok((self.v_mean(n, t)? + self.lift_coefficient(n, t)?) * e)
    }

    /// `ν_n(t,x)`.
    pub fn mode_variance(&self, n: usize, t: f64, x: f64) -> Result<f64> {
        let m = self.mode(n)?;
        Ok(mode_variance(basis_eval(Basis::Cosine, n, x), t, m.noise, m.var0, m.lambda))
    }

    /// Moments from exactly `n_modes` terms. The lift enters exactly, so only the
    /// homogeneous part is truncated (`μ(t,1) = g(t)` holds for every `N`).
    pub fn moments(&self, t: f64, x: f64, n_modes: usize) -> Result<MomentField> {
        if n_modes == 0 || n_modes > self.mode_cap() {
            return Err(Error::InvalidArgument(format!(
                "n_modes must lie in 1..={}, got {n_modes}",
                self.mode_cap()
            )));
        }
        let mut mu = self.lift.value(t, x);
        let mut nu = 0.0;
        for n in 1..=n_modes {
            let e = basis_eval(Basis::Cosine, n, x);
            let m = &self.modes[n - 1];
            mu += self.v_mean(n, t)? * e;
            nu += mode_variance(e, t, m.noise, m.var0, m.lambda);
        }
        let tails = TailBounds::new(self, t);
        Ok(MomentField {
            t,
            x,
            mu,
            nu,
            n_modes,
            tail_bound_mu: tails.mu(n_modes),
            tail_bound_nu: tails.nu(n_modes),
            certified: false,
        })
    }

    /// Moments with the smallest `N ≤ mode_cap` whose tail bounds are both `≤ tol`.
    /// If the cap is reached first the result carries `certified = false`.
    pub fn sum_series(&self, t: f64, x: f64, tol: f64) -> Result<MomentField> {
        let tails = TailBounds::new(self, t);
        let cap = self.mode_cap();
        let n = (1..=cap)
            .find(|&n| tails.mu(n) <= tol && tails.nu(n) <= tol)
            .unwrap_or(cap);
        let mut field = self.moments(t, x, n)?;
        field.certified = field.tail_bound_mu <= tol && field.tail_bound_nu <= tol;
        Ok(field)
    }

    /// Term-wise analytic `M(t,x) = −∂ₜμ` and `G(t,x) = ∂ₜν`.
    pub fn drift_diffusion(&self, t: f64, x: f64, n_modes: usize) -> Result<DriftDiffusion> {
        if n_modes == 0 || n_modes > self.mode_cap() {
            return Err(Error::InvalidArgument(format!(
                "n_modes must lie in 1..={}, got {n_modes}",
                self.mode_cap()
            )));
        }
        let mut dmu = self.lift.dt(t, x);
        let mut g = 0.0;
        for n in 1..=n_modes {
            let e = basis_eval(Basis::Cosine, n, x);
            let m = &self.modes[n - 1];
            dmu += (m.lambda * self.v_mean(n, t)? + self.mode_forcing(n, t)?) * e;
            g += (2.0 * m.lambda * m.var0 + m.noise * m.noise) * e * e * (2.0 * m.lambda * t).exp();
        }
        Ok(DriftDiffusion { t, x, m: -dmu, g })
    }

    /// Time-reversed coefficients `M̃(s,x) = M(T−s,x)`, `G̃(s,x) = G(T−s,x)`.
    pub fn reversed_drift_diffusion(&self, horizon: f64, s: f64, x: f64, n_modes: usize) -> Result<DriftDiffusion> {
        self.drift_diffusion(horizon - s, x, n_modes)
    }

    /// `max |f̃|` over a 33 × 33 grid of `[0,t] × [0,1]`.
    fn forcing_sup_estimate(&self, t: f64) -> f64 {
        let k = 32;
        let mut sup: f64 = 0.0;
        for i in 0..=k {
            let s = t * i as f64 / k as f64;
            for j in 0..=k {
                let x = j as f64 / k as f64;
                sup = sup.max(self.forcing.eval(s, x).abs());
            }
        }
        sup
    }
}

/// Suffix sums behind the tail certificates.
///
/// Mean: `Σ_{n>N} √2|μ_n(0)|e^{λ_n t} + 2 max|Y(0,·)| Σ e^{λ_n t} + 2 max|f̃| Σ (e^{λ_n t} − 1)/λ_n`.
/// Variance: `2 max(1, e^{2λ_{N+1}t}) Σ_{n>N} ν_n(0) + σ² max(1, 2·exprel2(λ_{N+1}, t)) Σ_{n>N} q_n²`.
struct TailBounds<'a> {
    spectrum: &'a AdditiveSpectrum,
    t: f64,
    y0_max: f64,
    f_max: f64,
    /// Suffix sums over n ≥ index+1 of (√2|μ_n(0)|e^{λt}, e^{λt}, exprel1) up to the explicit range.
    suffix: Vec<[f64; 3]>,
    remainder: [f64; 2],
}

impl<'a> TailBounds<'a> {
    fn new(spectrum: &'a AdditiveSpectrum, t: f64) -> Self {
        let model = &spectrum.model;
        let y0_max = spectrum.lift.max_abs(0.0);
        let f_max = spectrum.forcing_sup_estimate(t);
        let last = spectrum.mode_cap() + TAIL_EXPLICIT_TERMS;
        let mut suffix = vec![[0.0; 3]; last + 1];
        for n in (1..=last).rev() {
            let lambda = lambda_additive(n, model.a, model.b);
            let mean0 = model.initial_mode(n).mean.abs();
            let term = [
                SQRT_2 * mean0 * (lambda * t).exp(),
                (lambda * t).exp(),
                exprel1(lambda, t),
            ];
            let next = suffix.get(n).copied().unwrap_or([0.0; 3]);
            suffix[n - 1] = [next[0] + term[0], next[1] + term[1], next[2] + term[2]];
        }
        // Beyond the explicit range: integral comparison for the decaying terms.
        let a = model.a.abs();
        let b = model.b;
        let start = last as f64 - 0.5;
        let exp_rem = if a == 0.0 || t <= 0.0 {
            f64::INFINITY
        } else {
            let k = a * PI * t.sqrt();
            (b * t).exp() * PI.sqrt() / (2.0 * k) * erfc(k * start)
        };
        let rel_rem = if a == 0.0 || (a * PI * start).powi(2) < 2.0 * b {
            f64::INFINITY
        } else {
            2.0 / (a * a * PI * PI * start)
        };
        let beyond_means: f64 = model.initial_modes.iter().skip(last).map(|l| l.mean.abs()).sum();
        let mean_rem = SQRT_2 * beyond_means * if b > 0.0 { (b * t).exp() } else { 1.0 };
        if mean_rem > 0.0 {
            suffix.iter_mut().for_each(|s| s[0] += mean_rem);
        }
        Self {
            spectrum,
            t,
            y0_max,
            f_max,
            suffix,
            remainder: [exp_rem, rel_rem],
        }
    }

    fn mu(&self, n_modes: usize) -> f64 {
        let s = self.suffix.get(n_modes).copied().unwrap_or([0.0; 3]);
        let mut bound = s[0];
        if self.y0_max > 0.0 {
            bound += 2.0 * self.y0_max * (s[1] + self.remainder[0]);
        }
        if self.f_max > 0.0 {
            bound += 2.0 * self.f_max * (s[2] + self.remainder[1]);
        }
        bound
    }

    fn nu(&self, n_modes: usize) -> f64 {
        let model = &self.spectrum.model;
        let next_lambda = lambda_additive(n_modes + 1, model.a, model.b);
        let var_tail: f64 = model.initial_modes.iter().skip(n_modes).map(|l| l.variance).sum();
        let trace_tail = model.noise.trace_tail(n_modes);
        let mut bound = 0.0;
        if var_tail > 0.0 {
            bound += 2.0 * (2.0 * next_lambda * self.t).exp().max(1.0) * var_tail;
        }
        if trace_tail > 0.0 {
            bound += model.sigma.powi(2) * (2.0 * exprel2(next_lambda, self.t)).max(1.0) * trace_tail;
        }
        bound
    }
}
