//! Closed-form laws of `U(t,x)` and `K(t,x)`, and the Markov transition
//! kernels used by the Chapman-Kolmogorov checks.

use std::f64::consts::{PI, SQRT_2};

use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::model::{KpzModel, MultiplicativeModel};
use crate::spectral::{basis_eval, exprel2, AdditiveSpectrum, Basis, MomentField};

/// Variances at or below this are treated as a point mass.
pub const VARIANCE_FLOOR: f64 = 1e-300;

/// Absolute tolerance on `|x − k/m|` for membership in the zero set Γ.
pub const GAMMA_TOL: f64 = 1e-12;

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Where a point `(u, x)` sits relative to the support of the multiplicative law.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// `x ∈ {0, 1/m, …, 1}`: the law is the atom at 0.
    Gamma,
    /// `u > 0`, `x ∈ (2k/m, (2k+1)/m)`.
    D1(usize),
    /// `u < 0`, `x ∈ ((2k+1)/m, (2k+2)/m)`.
    D2(usize),
    OffSupport,
}

impl Region {
    pub fn in_support(&self) -> bool {
        matches!(self, Region::D1(_) | Region::D2(_))
    }
}

pub fn classify_region(u: f64, x: f64, m: usize) -> Region {
    let mf = m as f64;
    let y = mf * x;
    if (y - y.round()).abs() <= GAMMA_TOL * mf {
        return Region::Gamma;
    }
    let j = y.floor();
    let (lo, hi) = (j / mf, (j + 1.0) / mf);
    debug_assert!(x > lo && x < hi);
    let k = (j / 2.0).floor() as usize;
    let even = (j as i64) % 2 == 0;
    match (even, u) {
        (true, u) if u > 0.0 => Region::D1(k),
        (false, u) if u < 0.0 => Region::D2(k),
        _ => Region::OffSupport,
    }
}

/// One-dimensional law with evaluable density and distribution function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DensityLaw {
    Gaussian { mean: f64, variance: f64 },
    /// `sign · exp(Z)` with `Z ~ N(log_mean, log_var)`.
    SignedLogNormal { sign: f64, log_mean: f64, log_var: f64 },
    DegenerateAtom(f64),
}

impl DensityLaw {
    pub fn gaussian(mean: f64, variance: f64) -> Self {
        if variance <= VARIANCE_FLOOR {
            DensityLaw::DegenerateAtom(mean)
        } else {
            DensityLaw::Gaussian { mean, variance }
        }
    }

    pub fn signed_lognormal(sign: f64, log_mean: f64, log_var: f64) -> Self {
        if log_var <= VARIANCE_FLOOR {
            DensityLaw::DegenerateAtom(sign * log_mean.exp())
        } else {
            DensityLaw::SignedLogNormal {
                sign: sign.signum(),
                log_mean,
                log_var,
            }
        }
    }

    pub fn is_atom(&self) -> bool {
        matches!(self, DensityLaw::DegenerateAtom(_))
    }

    /// Pointwise density. Atoms have none.
    pub fn pdf(&self, u: f64) -> Result<f64> {
        match *self {
            DensityLaw::Gaussian { mean, variance } => {
                let sd = variance.sqrt();
                Ok(normal_pdf((u - mean) / sd) / sd)
            }
            DensityLaw::SignedLogNormal { sign, log_mean, log_var } => {
                let v = sign * u;
                if v <= 0.0 {
                    return Ok(0.0);
                }
                let sd = log_var.sqrt();
                Ok(normal_pdf((v.ln() - log_mean) / sd) / (sd * v))
            }
            DensityLaw::DegenerateAtom(_) => Err(Error::DegenerateLaw("a point mass has no pointwise density")),
        }
    }

    pub fn cdf(&self, u: f64) -> f64 {
        match *self {
            DensityLaw::Gaussian { mean, variance } => normal_cdf((u - mean) / variance.sqrt()),
            DensityLaw::SignedLogNormal { sign, log_mean, log_var } => {
                let sd = log_var.sqrt();
                if sign > 0.0 {
                    if u <= 0.0 {
                        0.0
                    } else {
                        normal_cdf((u.ln() - log_mean) / sd)
                    }
                } else if u >= 0.0 {
                    1.0
                } else {
                    // P(−e^Z ≤ u) = P(Z ≥ ln(−u))
                    normal_cdf((log_mean - (-u).ln()) / sd)
                }
            }
            DensityLaw::DegenerateAtom(a) => {
                if u >= a {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `P(lo < U ≤ hi)`.
    pub fn interval_mass(&self, lo: f64, hi: f64) -> f64 {
        (self.cdf(hi) - self.cdf(lo)).max(0.0)
    }

    pub fn mean(&self) -> f64 {
        match *self {
            DensityLaw::Gaussian { mean, .. } => mean,
            DensityLaw::SignedLogNormal { sign, log_mean, log_var } => sign * (log_mean + 0.5 * log_var).exp(),
            DensityLaw::DegenerateAtom(a) => a,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            DensityLaw::Gaussian { variance, .. } => variance,
            DensityLaw::SignedLogNormal { log_mean, log_var, .. } => {
                log_var.exp_m1() * (2.0 * log_mean + log_var).exp()
            }
            DensityLaw::DegenerateAtom(_) => 0.0,
        }
    }
}

/// A density value, or the statement that the law is a point mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PointDensity {
    Finite(f64),
    Atom { location: f64 },
}

impl PointDensity {
    pub fn finite(self) -> Option<f64> {
        match self {
            PointDensity::Finite(v) => Some(v),
            PointDensity::Atom { .. } => None,
        }
    }
}

/// Gaussian density of the additive solution.
pub fn additive_pdf(u: f64, field: &MomentField) -> Result<f64> {
    if field.nu <= VARIANCE_FLOOR {
        return Err(Error::DegenerateVariance {
            t: field.t,
            x: field.x,
            variance: field.nu,
        });
    }
    DensityLaw::Gaussian {
        mean: field.mu,
        variance: field.nu,
    }
    .pdf(u)
}

pub fn additive_law(field: &MomentField) -> DensityLaw {
    DensityLaw::gaussian(field.mu, field.nu)
}

/// `(μ(t,x), ν(t))` of `ln|U(t,x)|`; `μ = −∞` on Γ.
pub fn multiplicative_log_moments(t: f64, x: f64, model: &MultiplicativeModel) -> (f64, f64) {
    let e = basis_eval(Basis::Sine, model.m, x);
    let mu = model.initial.mean + model.b_m() * t + e.abs().ln();
    let nu = model.initial.variance + model.eps_m().powi(2) * t;
    (mu, nu)
}

/// Law of `U(t,x) = U_m(t) ẽ_m(x)`: the zero atom on Γ, a signed log-normal elsewhere.
pub fn multiplicative_law(t: f64, x: f64, model: &MultiplicativeModel) -> DensityLaw {
    let e = basis_eval(Basis::Sine, model.m, x);
    if classify_region(1.0, x, model.m) == Region::Gamma || e == 0.0 {
        return DensityLaw::DegenerateAtom(0.0);
    }
    let (mu, nu) = multiplicative_log_moments(t, x, model);
    DensityLaw::signed_lognormal(e.signum(), mu, nu)
}

pub fn multiplicative_pdf(u: f64, t: f64, x: f64, model: &MultiplicativeModel) -> PointDensity {
    match multiplicative_law(t, x, model) {
        DensityLaw::DegenerateAtom(a) => PointDensity::Atom { location: a },
        law => match classify_region(u, x, model.m) {
            Region::D1(_) | Region::D2(_) => PointDensity::Finite(law.pdf(u).unwrap_or(0.0)),
            _ => PointDensity::Finite(0.0),
        },
    }
}

/// Analytic `(∂ₜp, ∂ᵤp, ∂ᵤᵤp)` of the log-normal density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogNormalPartials {
    pub p: f64,
    pub dt: f64,
    pub du: f64,
    pub duu: f64,
}

pub fn lognormal_partials(u: f64, t: f64, x: f64, model: &MultiplicativeModel) -> Result<LogNormalPartials> {
    if !classify_region(u, x, model.m).in_support() {
        return Err(Error::RegionViolation { u, x });
    }
    let (mu, nu) = multiplicative_log_moments(t, x, model);
    let e2 = model.eps_m().powi(2);
    let b = model.b_m();
    let p = multiplicative_law(t, x, model).pdf(u)?;
    let w = (u.abs().ln() - mu) / nu;
    Ok(LogNormalPartials {
        p,
        dt: p * (-e2 / (2.0 * nu) + w * b + 0.5 * e2 * w * w),
        du: -(1.0 + w) * p / u,
        duu: ((1.0 + w) * (2.0 + w) - 1.0 / nu) * p / (u * u),
    })
}

/// `(μ̃(t,x), ν̃(t))` of the KPZ field.
pub fn kpz_moments(t: f64, x: f64, model: &KpzModel) -> Result<(f64, f64)> {
    if !model.contains(x) {
        return Err(Error::WindowViolation {
            x,
            lower: model.window.0,
            upper: model.window.1,
        });
    }
    let k = model.scale();
    let e = basis_eval(Basis::Sine, model.m, x);
    let mu = k * (model.initial.mean + model.b_tilde() * t + e.abs().ln());
    let nu = k * k * (model.initial.variance + (model.epsilon * model.q_m).powi(2) * t);
    Ok((mu, nu))
}

pub fn kpz_law(t: f64, x: f64, model: &KpzModel) -> Result<DensityLaw> {
    let (mu, nu) = kpz_moments(t, x, model)?;
    Ok(DensityLaw::gaussian(mu, nu))
}

pub fn kpz_pdf(kappa: f64, t: f64, x: f64, model: &KpzModel) -> Result<f64> {
    let (mu, nu) = kpz_moments(t, x, model)?;
    if nu <= VARIANCE_FLOOR {
        return Err(Error::DegenerateVariance { t, x, variance: nu });
    }
    DensityLaw::Gaussian { mean: mu, variance: nu }.pdf(kappa)
}

/// `P(|U(t,x)| ≤ δ) = Φ((ln δ − μ(t,x))/√ν(t))`.
pub fn dirac_limit_mass(t: f64, x: f64, delta: f64, model: &MultiplicativeModel) -> f64 {
    let (mu, nu) = multiplicative_log_moments(t, x, model);
    if mu == f64::NEG_INFINITY {
        return 1.0;
    }
    if nu <= VARIANCE_FLOOR {
        return if delta.ln() >= mu { 1.0 } else { 0.0 };
    }
    normal_cdf((delta.ln() - mu) / nu.sqrt())
}

/// Markov transition kernel `p(·, t | w, s)`.
#[derive(Debug, Clone, Copy)]
pub enum TransitionKernel<'a> {
    /// Single cosine mode `U_n(·,x) = (V_n + y_n) e_n(x)` of the additive solution.
    AdditiveMode {
        spectrum: &'a AdditiveSpectrum,
        n: usize,
        x: f64,
    },
    /// `U_m(t) = U_m(s) exp{b_m(t−s) + ε_m(W(t) − W(s))}`.
    MultiplicativeGbm { b_m: f64, eps_m: f64 },
    /// `K(t) = K(s) + drift·(t−s) + diffusion·(B(t) − B(s))`.
    KpzBrownian { drift: f64, diffusion: f64 },
}

impl<'a> TransitionKernel<'a> {
    pub fn additive_mode(spectrum: &'a AdditiveSpectrum, n: usize, x: f64) -> Self {
        TransitionKernel::AdditiveMode { spectrum, n, x }
    }

    pub fn multiplicative(model: &MultiplicativeModel) -> Self {
        TransitionKernel::MultiplicativeGbm {
            b_m: model.b_m(),
            eps_m: model.eps_m(),
        }
    }

    pub fn kpz(model: &KpzModel) -> Self {
        let k = model.scale();
        TransitionKernel::KpzBrownian {
            drift: k * model.b_tilde(),
            diffusion: (k * model.epsilon * model.q_m).abs(),
        }
    }

    /// Law of the state at time `t` given state `w` at time `s ≤ t`.
    pub fn law(&self, w: f64, s: f64, t: f64) -> Result<DensityLaw> {
        if t < s {
            return Err(Error::InvalidArgument(format!("kernel needs s <= t, got s = {s}, t = {t}")));
        }
        let tau = t - s;
        Ok(match *self {
            TransitionKernel::AdditiveMode { spectrum, n, x } => {
                let e = basis_eval(Basis::Cosine, n, x);
                let lambda = spectrum.lambda(n)?;
                let y = |r: f64| spectrum.lift_coefficient(n, r).map(|c| c * e);
                let mean = (w - y(s)?) * (lambda * tau).exp() + e * spectrum.forced_response(n, s, t)? + y(t)?;
                let variance = (spectrum.noise(n)? * e).powi(2) * exprel2(lambda, tau);
                DensityLaw::gaussian(mean, variance)
            }
            TransitionKernel::MultiplicativeGbm { b_m, eps_m } => {
                if w == 0.0 {
                    DensityLaw::DegenerateAtom(0.0)
                } else {
                    DensityLaw::signed_lognormal(w.signum(), w.abs().ln() + b_m * tau, eps_m * eps_m * tau)
                }
            }
            TransitionKernel::KpzBrownian { drift, diffusion } => {
                DensityLaw::gaussian(w + drift * tau, diffusion * diffusion * tau)
            }
        })
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::model::InitialLogLaw;
    use crate::quadrature::adaptive_simpson;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn example3() -> MultiplicativeModel {
        MultiplicativeModel {
            a: 1.0,
            b: 1.0,
            c: 5.5 + (2.0 * PI).sqrt() + (2.0 * PI).powi(2),
            alpha: 0.5,
            epsilon: SQRT_2 / 2.0,
            m: 2,
            q_m: 1.0,
            initial: InitialLogLaw {
                mean: 1.0,
                variance: 0.25,
            },
        }
    }

    pub(crate) fn example4() -> KpzModel {
        KpzModel {
            theta: 1.0,
            xi: 1.0,
            epsilon: SQRT_2 / 2.0,
            m: 1,
            q_m: 1.0,
            initial: InitialLogLaw {
                mean: 1.0,
                variance: 0.25,
            },
            window: (0.05, 0.95),
        }
    }

    #[test]
    fn regions() {
        assert_eq!(classify_region(1.0, 0.25, 2), Region::D1(0));
        assert_eq!(classify_region(-1.0, 0.75, 2), Region::D2(0));
        assert_eq!(classify_region(0.5, 0.5, 2), Region::Gamma);
        assert_eq!(classify_region(-1.0, 0.25, 2), Region::OffSupport);
        assert_eq!(classify_region(3.0, 0.0, 5), Region::Gamma);
        assert_eq!(classify_region(3.0, 1.0, 5), Region::Gamma);
        assert_eq!(classify_region(0.0, 0.3, 1), Region::OffSupport);
        assert_eq!(classify_region(2.0, 0.85, 5), Region::D1(2));
        assert_eq!(classify_region(-2.0, 0.65, 5), Region::D2(1));
        assert_eq!(classify_region(1.0, 0.5 + 1e-13, 2), Region::Gamma);
    }

    proptest! {
        #[test]
        fn region_matches_set_definitions(u in -5.0f64..5.0, x in 0.0f64..=1.0, m in 1usize..9) {
            let r = classify_region(u, x, m);
            let mf = m as f64;
            let near_zero = (0..=m).any(|k| (x - k as f64 / mf).abs() <= 1e-12);
            if near_zero {
                prop_assert_eq!(r, Region::Gamma);
            } else {
                let e = (m as f64 * PI * x).sin();
                match r {
                    Region::D1(k) => {
                        prop_assert!(u > 0.0 && e > 0.0);
                        prop_assert!(x > 2.0 * k as f64 / mf && x < (2 * k + 1) as f64 / mf);
                    }
                    Region::D2(k) => {
                        prop_assert!(u < 0.0 && e < 0.0);
                        prop_assert!(x > (2 * k + 1) as f64 / mf && x < (2 * k + 2) as f64 / mf);
                    }
                    Region::OffSupport => prop_assert!(u * e <= 0.0),
                    Region::Gamma => prop_assert!(false),
                }
                if let Region::D1(k) | Region::D2(k) = r {
                    prop_assert!(k <= (m - 1) / 2);
                }
            }
        }
    }

    #[test]
    fn example3_closed_form() {
        let model = example3();
        assert!((model.lambda_m() - 5.5).abs() < 1e-12);
        assert!((model.b_m() - 5.25).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let t: f64 = rng.random_range(0.0..2.0);
            let x: f64 = rng.random_range(0.01..0.49);
            let (mu, nu) = multiplicative_log_moments(t, x, &model);
            let expected = (4.0 + 21.0 * t) / 4.0 + (SQRT_2 * (2.0 * PI * x).sin()).abs().ln();
            assert!((mu - expected).abs() < 1e-12);
            assert!((nu - (1.0 + 2.0 * t) / 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn multiplicative_support_and_mode() {
        let model = example3();
        let (t, x) = (0.3, 0.125);
        assert_eq!(multiplicative_pdf(-1.0, t, x, &model), PointDensity::Finite(0.0));
        assert_eq!(multiplicative_pdf(1.0, t, 0.625, &model), PointDensity::Finite(0.0));
        assert!(matches!(multiplicative_pdf(0.0, t, 0.5, &model), PointDensity::Atom { location } if location == 0.0));
        let (mu, nu) = multiplicative_log_moments(t, x, &model);
        let mode = (mu - nu).exp();
        let p = |u: f64| multiplicative_pdf(u, t, x, &model).finite().unwrap();
        let h = 1e-4 * mode;
        assert!(p(mode) > p(mode - h) && p(mode) > p(mode + h));
        // reflection through u ↦ −u on D2
        let law = multiplicative_law(t, 0.625, &model);
        let (mu2, nu2) = multiplicative_log_moments(t, 0.625, &model);
        let pos = DensityLaw::signed_lognormal(1.0, mu2, nu2);
        assert_eq!(law.pdf(-2.5).unwrap(), pos.pdf(2.5).unwrap());
    }

    #[test]
    fn laws_integrate_to_one() {
        let model = example3();
        let laws = [
            DensityLaw::gaussian(0.3, 0.7),
            multiplicative_law(0.3, 0.125, &model),
            multiplicative_law(0.3, 0.625, &model),
            kpz_law(0.3, 0.125, &example4()).unwrap(),
        ];
        for law in laws {
            let (lo, hi) = match law {
                DensityLaw::Gaussian { mean, variance } => (mean - 12.0 * variance.sqrt(), mean + 12.0 * variance.sqrt()),
                DensityLaw::SignedLogNormal { sign, log_mean, log_var } => {
                    let a = (log_mean - 12.0 * log_var.sqrt()).exp();
                    let b = (log_mean + 12.0 * log_var.sqrt()).exp();
                    if sign > 0.0 {
                        (a, b)
                    } else {
                        (-b, -a)
                    }
                }
                DensityLaw::DegenerateAtom(_) => unreachable!(),
            };
            // integrate in log-space for the log-normal to keep the integrand smooth
            let total = match law {
                DensityLaw::SignedLogNormal { sign, .. } => adaptive_simpson(
                    |z| {
                        let u = sign * z.exp();
                        law.pdf(u).unwrap() * z.exp()
                    },
                    lo.abs().min(hi.abs()).ln(),
                    lo.abs().max(hi.abs()).ln(),
                    1e-12,
                    50,
                )
                .unwrap(),
                _ => adaptive_simpson(|u| law.pdf(u).unwrap(), lo, hi, 1e-12, 50).unwrap(),
            };
            assert!((total - 1.0).abs() < 1e-8, "{law:?}: {total}");
            assert!((law.cdf(hi) - law.cdf(lo) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_peak_and_atoms() {
        let law = DensityLaw::gaussian(1.2, 0.09);
        assert!((law.pdf(1.2).unwrap() - 1.0 / (2.0 * PI * 0.09).sqrt()).abs() < 1e-15);
        let atom = DensityLaw::gaussian(0.4, 0.0);
        assert!(atom.is_atom());
        assert!(matches!(atom.pdf(0.4), Err(Error::DegenerateLaw(_))));
        assert_eq!(atom.interval_mass(0.3, 0.5), 1.0);
        assert_eq!(atom.interval_mass(0.5, 0.9), 0.0);
        assert_eq!(atom.cdf(0.4), 1.0);
    }

    #[test]
    fn additive_degenerate_variance() {
        let sp = AdditiveSpectrum::new(crate::spectral::tests::example1()).unwrap();
        let at_one = sp.moments(1.0, 1.0, 10).unwrap();
        assert!(matches!(additive_pdf(0.0, &at_one), Err(Error::DegenerateVariance { .. })));
        assert!(additive_law(&at_one).is_atom());
        let inside = sp.moments(1.0, 0.5, 10).unwrap();
        let peak = additive_pdf(inside.mu, &inside).unwrap();
        assert!((peak - 1.0 / (2.0 * PI * inside.nu).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn partials_against_finite_differences() {
        let model = example3();
        let (u, t, x) = (12.0, 0.3, 0.125);
        let exact = lognormal_partials(u, t, x, &model).unwrap();
        let p = |u: f64, t: f64| multiplicative_pdf(u, t, x, &model).finite().unwrap();
        let err = |h: f64| {
            let du = (p(u + h, t) - p(u - h, t)) / (2.0 * h);
            let duu = (p(u + h, t) - 2.0 * p(u, t) + p(u - h, t)) / (h * h);
            let dt = (p(u, t + h) - p(u, t - h)) / (2.0 * h);
            [(du - exact.du).abs(), (duu - exact.duu).abs(), (dt - exact.dt).abs()]
        };
        let coarse = err(1e-2);
        let fine = err(5e-3);
        for i in 0..3 {
            let r = coarse[i] / fine[i];
            assert!((3.5..4.5).contains(&r), "partial {i}: ratio {r}");
        }
        let fine5 = err(1e-5);
        assert!(fine5[0] < 1e-8 && fine5[2] < 1e-8);
        // at ln|u| = μ the second factor is 1
        let (mu, _) = multiplicative_log_moments(t, x, &model);
        let q = lognormal_partials(mu.exp(), t, x, &model).unwrap();
        assert!((q.du + q.p / mu.exp()).abs() < 1e-15);
        assert!(matches!(lognormal_partials(-1.0, t, x, &model), Err(Error::RegionViolation { .. })));
    }

    #[test]
    fn example4_closed_form() {
        let model = example4();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let t: f64 = rng.random_range(0.0..2.0);
            let x: f64 = rng.random_range(0.06..0.94);
            let (mu, nu) = kpz_moments(t, x, &model).unwrap();
            let expected = 2.0 * (1.0 - (PI * PI + 0.25) * t + (SQRT_2 * (PI * x).sin()).ln());
            assert!((mu - expected).abs() < 1e-12);
            assert!((nu - (1.0 + 2.0 * t)).abs() < 1e-12);
        }
        let (mu, nu) = kpz_moments(0.0, 0.5, &model).unwrap();
        assert!((mu - (2.0 + 2f64.ln())).abs() < 1e-15);
        assert_eq!(nu, 1.0);
        assert!(matches!(kpz_pdf(0.0, 0.3, 0.01, &model), Err(Error::WindowViolation { .. })));
    }

    #[test]
    fn kpz_xi_sign_flip_negates_mean() {
        let model = example4();
        let flipped = KpzModel { xi: -1.0, ..model.clone() };
        let (a, va) = kpz_moments(0.4, 0.3, &model).unwrap();
        let (b, vb) = kpz_moments(0.4, 0.3, &flipped).unwrap();
        assert_eq!(a, -b);
        assert_eq!(va, vb);
    }

    #[test]
    fn dirac_limit_is_monotone() {
        let model = example3();
        let masses: Vec<f64> = (1..=6)
            .map(|j| dirac_limit_mass(0.3, 0.5 + 10f64.powi(-j), 0.1, &model))
            .collect();
        for w in masses.windows(2) {
            assert!(w[1] > w[0], "{masses:?}");
        }
        assert!(masses[5] > 0.999);
        assert_eq!(dirac_limit_mass(0.3, 0.5, 0.1, &model), 1.0);
        assert!((dirac_limit_mass(0.3, 0.2, 1e300, &model) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn kernels() {
        let model = example3();
        let gbm = TransitionKernel::multiplicative(&model);
        assert_eq!(gbm.law(-2.0, 0.4, 0.4).unwrap(), DensityLaw::DegenerateAtom(-2.0));
        let law = gbm.law(-2.0, 0.1, 0.6).unwrap();
        assert_eq!(law.cdf(0.0), 1.0);
        assert_eq!(law.pdf(0.5).unwrap(), 0.0);
        let kpz = TransitionKernel::kpz(&example4());
        match kpz.law(0.3, 0.0, 1.0).unwrap() {
            DensityLaw::Gaussian { mean, variance } => {
                assert!((mean - (0.3 - 2.0 * (PI * PI + 0.25))).abs() < 1e-12);
                assert!((variance - 2.0).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
        let mut m = crate::spectral::tests::example1();
        m.b = 1.0;
        m.a = 2.0 / PI; // λ_1 = 1 − 1 = 0
        let sp = AdditiveSpectrum::new(m).unwrap();
        assert!(sp.lambda(1).unwrap().abs() < 1e-15);
        let k = TransitionKernel::additive_mode(&sp, 1, 0.3);
        let e = basis_eval(Basis::Cosine, 1, 0.3);
        let v = k.law(0.2, 0.1, 0.9).unwrap().variance();
        assert!((v - e * e * 0.8).abs() < 1e-12);
    }

    #[test]
    fn marginalization_recovers_time_t_law() {
        // E over the time-s law of the s→t kernel equals the time-t density
        let model = example3();
        let x = 0.125;
        let (s, t) = (0.2, 0.7);
        let kernel = TransitionKernel::multiplicative(&model);
        let (mu_s, nu_s) = multiplicative_log_moments(s, x, &model);
        let target = multiplicative_law(t, x, &model);
        for &u in &[5.0, 10.0, 20.0, 40.0] {
            let v = crate::quadrature::normal_expectation(
                |z| kernel.law(z.exp(), s, t).unwrap().pdf(u).unwrap(),
                mu_s,
                nu_s,
                80,
            );
            assert!((v - target.pdf(u).unwrap()).abs() < 1e-10);
        }
    }
}
