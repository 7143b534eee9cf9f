//! Checks that the closed-form densities solve their Fokker-Planck equations
//! and that the transition kernels compose (Chapman-Kolmogorov).

use rand::Rng;
use rand_distr::StandardNormal;

use crate::densities::{
    additive_pdf, kpz_moments, kpz_pdf, lognormal_partials, DensityLaw, TransitionKernel,
};
use crate::error::{Error, Result};
use crate::feynman_kac::path_rng;
use crate::model::{KpzModel, MultiplicativeModel};
use crate::quadrature::adaptive_normal_expectation;
use crate::spectral::AdditiveSpectrum;
use crate::spectral_oracle::ks_statistic;

/// Evaluation points `(u, t)` and stencil steps of one finite-difference run.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualGrid {
    pub points: Vec<(f64, f64)>,
    pub du: f64,
    pub dt: f64,
}

impl ResidualGrid {
    /// Tensor grid of `u_values × t_values`.
    pub fn tensor(u_values: &[f64], t_values: &[f64], du: f64, dt: f64) -> Self {
        let points = t_values
            .iter()
            .flat_map(|&t| u_values.iter().map(move |&u| (u, t)))
            .collect();
        Self { points, du, dt }
    }

    /// Points `u = mean(t) + z·sd(t)` that follow a moving law.
    pub fn standardized<F>(z_values: &[f64], t_values: &[f64], du: f64, dt: f64, law: F) -> Result<Self>
    where
        F: Fn(f64) -> Result<(f64, f64)>,
    {
        let mut points = Vec::with_capacity(z_values.len() * t_values.len());
        for &t in t_values {
            let (mean, variance) = law(t)?;
            points.extend(z_values.iter().map(|&z| (mean + z * variance.sqrt(), t)));
        }
        Ok(Self { points, du, dt })
    }

    pub fn halved(&self) -> Self {
        Self {
            du: 0.5 * self.du,
            dt: 0.5 * self.dt,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualReport {
    pub du: f64,
    pub dt: f64,
    pub max_abs_residual: f64,
    /// Residual of the previous (coarser) level divided by this one; NaN on
    /// the first level.
    pub ratio: f64,
}

impl ResidualReport {
    /// Observed order `log2(ratio)`.
    pub fn order(&self) -> f64 {
        self.ratio.log2()
    }
}

/// `max |∂ₜp − M∂ᵤp − ½G∂ᵤᵤp|` over the grid with second-order stencils:
/// central in `u`, central in `t` unless `t − Δt < 0`, then one-sided.
fn max_residual<P, C>(p: &P, coeffs: &C, grid: &ResidualGrid) -> Result<f64>
where
    P: Fn(f64, f64) -> Result<f64>,
    C: Fn(f64) -> Result<(f64, f64)>,
{
    if !(grid.du > 0.0 && grid.dt > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "stencil steps must be positive, got du = {}, dt = {}",
            grid.du, grid.dt
        )));
    }
    let (h, k) = (grid.du, grid.dt);
    let mut worst: f64 = 0.0;
    for &(u, t) in &grid.points {
        let (m, g) = coeffs(t)?;
        let p0 = p(u, t)?;
        let pu = (p(u + h, t)? - p(u - h, t)?) / (2.0 * h);
        let puu = (p(u + h, t)? - 2.0 * p0 + p(u - h, t)?) / (h * h);
        let pt = if t - k >= 0.0 {
            (p(u, t + k)? - p(u, t - k)?) / (2.0 * k)
        } else {
            (-3.0 * p0 + 4.0 * p(u, t + k)? - p(u, t + 2.0 * k)?) / (2.0 * k)
        };
        worst = worst.max((pt - m * pu - 0.5 * g * puu).abs());
    }
    Ok(worst)
}

/// Residuals at `levels` successive halvings of the stencil steps.
fn residual_study<P, C>(p: P, coeffs: C, grid: &ResidualGrid, levels: usize) -> Result<Vec<ResidualReport>>
where
    P: Fn(f64, f64) -> Result<f64>,
    C: Fn(f64) -> Result<(f64, f64)>,
{
    if levels == 0 {
        return Err(Error::InvalidArgument("a residual study needs at least one level".into()));
    }
    let mut out: Vec<ResidualReport> = Vec::with_capacity(levels);
    let mut level = grid.clone();
    for _ in 0..levels {
        let r = max_residual(&p, &coeffs, &level)?;
        let ratio = out.last().map_or(f64::NAN, |prev| prev.max_abs_residual / r);
        out.push(ResidualReport {
            du: level.du,
            dt: level.dt,
            max_abs_residual: r,
            ratio,
        });
        level = level.halved();
    }
    Ok(out)
}

/// Finite-difference residual of the additive Gaussian density against
/// `∂ₜp = M∂ᵤp + ½G∂ᵤᵤp` at fixed `x`, using `n_modes` terms throughout.
pub fn fp_residual_additive(
    spectrum: &AdditiveSpectrum,
    x: f64,
    n_modes: usize,
    grid: &ResidualGrid,
    levels: usize,
) -> Result<Vec<ResidualReport>> {
    residual_study(
        |u, t| additive_pdf(u, &spectrum.moments(t, x, n_modes)?),
        |t| {
            let dd = spectrum.drift_diffusion(t, x, n_modes)?;
            Ok((dd.m, dd.g))
        },
        grid,
        levels,
    )
}

/// Finite-difference residual of the KPZ Gaussian with its constant coefficients.
pub fn fp_residual_kpz(model: &KpzModel, x: f64, grid: &ResidualGrid, levels: usize) -> Result<Vec<ResidualReport>> {
    kpz_moments(0.0, x, model)?;
    let k = model.scale();
    let m = -k * model.b_tilde();
    let g = (k * model.epsilon * model.q_m).powi(2);
    residual_study(|kappa, t| kpz_pdf(kappa, t, x, model), |_| Ok((m, g)), grid, levels)
}

/// Coefficients of `∂ₜp = A u²∂ᵤᵤp + B u∂ᵤp + C p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiplicativeFpCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl MultiplicativeFpCoefficients {
    /// `A = ε_m²/2`, `B = 3ε_m²/2 − b_m`, `C = ε_m²/2 − b_m`.
    pub fn corrected(model: &MultiplicativeModel) -> Self {
        let e2 = model.eps_m().powi(2);
        let b_m = model.b_m();
        Self {
            a: 0.5 * e2,
            b: 1.5 * e2 - b_m,
            c: 0.5 * e2 - b_m,
        }
    }

    /// `B = (3ε_m² − b_m)/2`, `C = (ε_m² − b_m)/2`: halves `b_m` in both.
    /// It does not annihilate the log-normal density.
    pub fn uncorrected(model: &MultiplicativeModel) -> Self {
        let e2 = model.eps_m().powi(2);
        let b_m = model.b_m();
        Self {
            a: 0.5 * e2,
            b: 0.5 * (3.0 * e2 - b_m),
            c: 0.5 * (e2 - b_m),
        }
    }
}

/// `∂ₜp − [A u²∂ᵤᵤp + B u∂ᵤp + C p]` from the analytic partials.
pub fn fp_identity_multiplicative(
    u: f64,
    t: f64,
    x: f64,
    model: &MultiplicativeModel,
    coeffs: &MultiplicativeFpCoefficients,
) -> Result<f64> {
    let d = lognormal_partials(u, t, x, model)?;
    Ok(d.dt - (coeffs.a * u * u * d.duu + coeffs.b * u * d.du + coeffs.c * d.p))
}

/// Max over `u_grid` of `|∫ p(u,t|v,r) p(v,r|w,s) dv − p(u,t|w,s)|`.
///
/// The `v`-integral is an expectation under the `s→r` law, computed by
/// adaptive Gauss-Hermite (in log-space for log-normal legs).
pub fn ck_check(kernel: &TransitionKernel<'_>, w: f64, s: f64, r: f64, t: f64, u_grid: &[f64]) -> Result<f64> {
    if !(0.0 <= s && s <= r && r < t) {
        return Err(Error::InvalidArgument(format!(
            "Chapman-Kolmogorov needs 0 <= s <= r < t, got ({s}, {r}, {t})"
        )));
    }
    let first = kernel.law(w, s, r)?;
    let mut worst: f64 = 0.0;
    for &u in u_grid {
        let direct = kernel.law(w, s, t)?.pdf(u)?;
        let composed = match first {
            DensityLaw::DegenerateAtom(v) => kernel.law(v, r, t)?.pdf(u)?,
            DensityLaw::Gaussian { mean, variance } => adaptive_normal_expectation(
                |v| kernel.law(v, r, t).and_then(|l| l.pdf(u)).unwrap_or(f64::NAN),
                mean,
                variance,
                1e-12,
                direct.max(1.0),
                1024,
            )?,
            DensityLaw::SignedLogNormal { sign, log_mean, log_var } => adaptive_normal_expectation(
                |z| kernel.law(sign * z.exp(), r, t).and_then(|l| l.pdf(u)).unwrap_or(f64::NAN),
                log_mean,
                log_var,
                1e-12,
                direct.max(1.0),
                1024,
            )?,
        };
        if !composed.is_finite() {
            return Err(Error::QuadratureFailure(format!("non-finite convolution at u = {u}")));
        }
        worst = worst.max((composed - direct).abs());
    }
    Ok(worst)
}

/// Empirical Chapman-Kolmogorov check: KS distance between samples pushed
/// `s→r→t` through exact kernel draws and the direct `s→t` law.
pub fn empirical_ck(kernel: &TransitionKernel<'_>, w: f64, s: f64, r: f64, t: f64, n: usize, seed: u64) -> Result<f64> {
    let first = kernel.law(w, s, r)?;
    let samples = (0..n as u64)
        .map(|i| {
            let mut rng = path_rng(seed, i);
            let v = draw(&first, &mut rng);
            Ok(draw(&kernel.law(v, r, t)?, &mut rng))
        })
        .collect::<Result<Vec<f64>>>()?;
    ks_statistic(&samples, &kernel.law(w, s, t)?)
}

fn draw<R: Rng>(law: &DensityLaw, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    match *law {
        DensityLaw::Gaussian { mean, variance } => mean + variance.sqrt() * z,
        DensityLaw::SignedLogNormal { sign, log_mean, log_var } => sign * (log_mean + log_var.sqrt() * z).exp(),
        DensityLaw::DegenerateAtom(a) => a,
    }
}
