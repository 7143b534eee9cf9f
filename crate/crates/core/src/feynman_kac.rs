//! Monte Carlo density estimates from the probabilistic representations.
//!
//! Every path draws its normals from its own ChaCha stream selected by the
//! path index, so estimates do not depend on how paths are scheduled across
//! threads. Path values are reduced by pairwise summation in index order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::densities::{classify_region, kpz_moments, multiplicative_law, DensityLaw, VARIANCE_FLOOR};
use crate::error::{Error, Result};
use crate::fokker_planck::MultiplicativeFpCoefficients;
use crate::model::{KpzModel, MultiplicativeModel};
use crate::quadrature::gauss_legendre;
use crate::spectral::AdditiveSpectrum;

/// Default step for the additive and KPZ estimators.
pub const DEFAULT_DT: f64 = 1e-2;
/// Default step for Euler-Maruyama on the multiplicative equation.
pub const DEFAULT_DT_MULTIPLICATIVE: f64 = 1e-4;

/// Random stream of one path: seed selects the key, path index the stream.
pub fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub dt: f64,
}

/// Pairwise sum in a fixed tree order.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        return v.iter().sum();
    }
    let (a, b) = v.split_at(v.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Mean and `sd/√n` of `f(path_rng(seed, i))` over `n_paths` paths, evaluated in parallel.
pub fn monte_carlo<F>(n_paths: usize, seed: u64, dt: f64, f: F) -> Result<McEstimate>
where
    F: Fn(&mut ChaCha8Rng) -> Result<f64> + Sync,
{
    if n_paths < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 paths, got {n_paths}")));
    }
    let values = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| f(&mut path_rng(seed, i)))
        .collect::<Result<Vec<f64>>>()?;
    let n = n_paths as f64;
    let mean = pairwise_sum(&values) / n;
    let sq: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
    let var = pairwise_sum(&sq) / (n - 1.0);
    Ok(McEstimate {
        value: mean,
        stderr: (var / n).sqrt(),
        n_paths,
        seed,
        dt,
    })
}

/// Step times from `start` to `end`: spacing `dt`, last step shortened to land on `end`.
pub fn step_grid(start: f64, end: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0 && dt.is_finite()) || end < start {
        return Err(Error::InvalidArgument(format!(
            "need dt > 0 and start <= end, got dt = {dt}, [{start}, {end}]"
        )));
    }
    let span = end - start;
    let n = ((span / dt) - 1e-9).ceil().max(0.0) as usize;
    let mut grid: Vec<f64> = (0..n).map(|k| start + k as f64 * dt).collect();
    grid.push(end);
    Ok(grid)
}

/// Drift and diffusion of a scalar SDE.
pub trait SdeCoefficients {
    fn drift(&self, s: f64, x: f64) -> f64;
    fn diffusion(&self, s: f64, x: f64) -> f64;
}

/// Euler-Maruyama from `init` at `start` to `end`.
pub fn euler_maruyama<C: SdeCoefficients, R: Rng>(
    coeffs: &C,
    init: f64,
    start: f64,
    end: f64,
    dt: f64,
    rng: &mut R,
) -> Result<f64> {
    let grid = step_grid(start, end, dt)?;
    let mut x = init;
    for w in grid.windows(2) {
        let (s, h) = (w[0], w[1] - w[0]);
        let sigma = coeffs.diffusion(s, x);
        if sigma < 0.0 {
            return Err(Error::NegativeDiffusion { s, value: sigma });
        }
        let z: f64 = rng.sample(StandardNormal);
        x += coeffs.drift(s, x) * h + sigma * h.sqrt() * z;
    }
    Ok(x)
}

/// How the additive coefficients enter each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdditiveScheme {
    /// `M̃` and `G̃` frozen at the left end of each step.
    Euler,
    /// `M̃` and `G̃` averaged over each step by Gauss-Legendre quadrature.
    /// Exact in law for state-independent coefficients.
    StepAveraged,
}

const STEP_AVERAGE_ORDER: usize = 16;

/// Time-reversed additive SDE with state-independent coefficients tabulated on
/// the step grid: `dÛ = M̃(s)ds + √G̃(s) dB`, `s ∈ [T−t, T]`.
#[derive(Debug, Clone)]
pub struct AdditiveFk {
    t: f64,
    x: f64,
    dt: f64,
    grid: Vec<f64>,
    drift: Vec<f64>,
    diffusion: Vec<f64>,
    initial: DensityLaw,
}

impl AdditiveFk {
    pub fn new(spectrum: &AdditiveSpectrum, t: f64, x: f64, horizon: f64, dt: f64, n_modes: usize) -> Result<Self> {
        Self::with_scheme(spectrum, t, x, horizon, dt, n_modes, AdditiveScheme::Euler)
    }

    pub fn with_scheme(
        spectrum: &AdditiveSpectrum,
        t: f64,
        x: f64,
        horizon: f64,
        dt: f64,
        n_modes: usize,
        scheme: AdditiveScheme,
    ) -> Result<Self> {
        if !(0.0 <= t && t <= horizon) {
            return Err(Error::InvalidArgument(format!("need 0 <= t <= T, got t = {t}, T = {horizon}")));
        }
        let initial = spectrum.moments(0.0, x, n_modes)?;
        if initial.nu <= VARIANCE_FLOOR {
            return Err(Error::DegenerateInitialLaw { x });
        }
        let coeffs = |s: f64| -> Result<(f64, f64)> {
            let dd = spectrum.reversed_drift_diffusion(horizon, s, x, n_modes)?.require_positive()?;
            Ok((dd.m, dd.g))
        };
        let grid = step_grid(horizon - t, horizon, dt)?;
        let mut drift = Vec::with_capacity(grid.len());
        let mut diffusion = Vec::with_capacity(grid.len());
        for w in grid.windows(2) {
            let (m, g) = match scheme {
                AdditiveScheme::Euler => coeffs(w[0])?,
                AdditiveScheme::StepAveraged => {
                    let h = w[1] - w[0];
                    let mut failure = None;
                    let mut eval = |s: f64, pick: fn((f64, f64)) -> f64| match coeffs(s) {
                        Ok(c) => pick(c),
                        Err(e) => {
                            failure.get_or_insert(e);
                            f64::NAN
                        }
                    };
                    let m = gauss_legendre(|s| eval(s, |c| c.0), w[0], w[1], STEP_AVERAGE_ORDER, 1) / h;
                    let g = gauss_legendre(|s| eval(s, |c| c.1), w[0], w[1], STEP_AVERAGE_ORDER, 1) / h;
                    if let Some(e) = failure {
                        return Err(e);
                    }
                    (m, g)
                }
            };
            drift.push(m);
            diffusion.push(g.sqrt());
        }
        Ok(Self {
            t,
            x,
            dt,
            grid,
            drift,
            diffusion,
            initial: DensityLaw::gaussian(initial.mu, initial.nu),
        })
    }

    /// Mean and variance of `Û(T)` given `Û(T−t) = u` under the discrete scheme.
    pub fn terminal_moments(&self, u: f64) -> (f64, f64) {
        let mut mean = u;
        let mut var = 0.0;
        for (k, w) in self.grid.windows(2).enumerate() {
            let h = w[1] - w[0];
            mean += self.drift[k] * h;
            var += self.diffusion[k].powi(2) * h;
        }
        (mean, var)
    }

    fn terminal<R: Rng>(&self, u: f64, rng: &mut R) -> f64 {
        let mut v = u;
        for (k, w) in self.grid.windows(2).enumerate() {
            let h = w[1] - w[0];
            let z: f64 = rng.sample(StandardNormal);
            v += self.drift[k] * h + self.diffusion[k] * h.sqrt() * z;
        }
        v
    }

    /// `E[p(Û(T), 0, x) | Û(T−t) = u]`.
    pub fn estimate(&self, u: f64, n_paths: usize, seed: u64) -> Result<McEstimate> {
        if self.t == 0.0 {
            return Ok(McEstimate {
                value: self.initial.pdf(u)?,
                stderr: 0.0,
                n_paths,
                seed,
                dt: self.dt,
            });
        }
        monte_carlo(n_paths, seed, self.dt, |rng| self.initial.pdf(self.terminal(u, rng)))
    }

    pub fn x(&self) -> f64 {
        self.x
    }
}

/// Additive estimate at a single `u`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_additive_pdf(
    spectrum: &AdditiveSpectrum,
    u: f64,
    t: f64,
    x: f64,
    horizon: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
    n_modes: usize,
) -> Result<McEstimate> {
    AdditiveFk::new(spectrum, t, x, horizon, dt, n_modes)?.estimate(u, n_paths, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GbmScheme {
    Euler,
    ExactGbm,
}

struct Linear {
    drift: f64,
    diffusion: f64,
}

impl SdeCoefficients for Linear {
    fn drift(&self, _s: f64, x: f64) -> f64 {
        self.drift * x
    }
    fn diffusion(&self, _s: f64, x: f64) -> f64 {
        self.diffusion * x.abs()
    }
}

/// `e^{Ct} E[p(Û(t), 0, x) | Û(0) = u]` with `dÛ = BÛ ds + ε_m Û dB`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_multiplicative_pdf(
    model: &MultiplicativeModel,
    u: f64,
    t: f64,
    x: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
    scheme: GbmScheme,
) -> Result<McEstimate> {
    if !classify_region(u, x, model.m).in_support() {
        return Err(Error::RegionViolation { u, x });
    }
    let coeffs = MultiplicativeFpCoefficients::corrected(model);
    let eps = model.eps_m();
    let initial = multiplicative_law(0.0, x, model);
    let p0 = |v: f64| match initial {
        DensityLaw::DegenerateAtom(_) => Err(Error::DegenerateInitialLaw { x }),
        law => law.pdf(v),
    };
    if t == 0.0 {
        return Ok(McEstimate {
            value: p0(u)?,
            stderr: 0.0,
            n_paths,
            seed,
            dt,
        });
    }
    let weight = (coeffs.c * t).exp();
    let sde = Linear {
        drift: coeffs.b,
        diffusion: eps,
    };
    let mut est = monte_carlo(n_paths, seed, dt, |rng| {
        let terminal = match scheme {
            GbmScheme::ExactGbm => {
                let z: f64 = rng.sample(StandardNormal);
                u * ((coeffs.b - 0.5 * eps * eps) * t + eps * t.sqrt() * z).exp()
            }
            GbmScheme::Euler => euler_maruyama(&sde, u, 0.0, t, dt, rng)?,
        };
        p0(terminal)
    })?;
    est.value *= weight;
    est.stderr *= weight;
    Ok(est)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KpzScheme {
    Euler,
    /// One Gaussian increment over the whole horizon.
    Exact,
}

/// `E[p(K̂(T), 0, x) | K̂(T−t) = κ]` with constant drift and diffusion.
#[allow(clippy::too_many_arguments)]
pub fn estimate_kpz_pdf(
    model: &KpzModel,
    kappa: f64,
    t: f64,
    x: f64,
    horizon: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
    scheme: KpzScheme,
) -> Result<McEstimate> {
    let (mu0, nu0) = kpz_moments(0.0, x, model)?;
    if !(0.0 <= t && t <= horizon) {
        return Err(Error::InvalidArgument(format!("need 0 <= t <= T, got t = {t}, T = {horizon}")));
    }
    let initial = DensityLaw::gaussian(mu0, nu0);
    if initial.is_atom() {
        return Err(Error::DegenerateInitialLaw { x });
    }
    if t == 0.0 {
        return Ok(McEstimate {
            value: initial.pdf(kappa)?,
            stderr: 0.0,
            n_paths,
            seed,
            dt,
        });
    }
    let k = model.scale();
    let drift = -k * model.b_tilde();
    let diffusion = (k * model.epsilon * model.q_m).abs();
    let grid = step_grid(horizon - t, horizon, dt)?;
    monte_carlo(n_paths, seed, dt, |rng| {
        let terminal = match scheme {
            KpzScheme::Exact => {
                let z: f64 = rng.sample(StandardNormal);
                kappa + drift * t + diffusion * t.sqrt() * z
            }
            KpzScheme::Euler => {
                let mut v = kappa;
                for w in grid.windows(2) {
                    let h = w[1] - w[0];
                    let z: f64 = rng.sample(StandardNormal);
                    v += drift * h + diffusion * h.sqrt() * z;
                }
                v
            }
        };
        initial.pdf(terminal)
    })
}
