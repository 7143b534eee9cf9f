//! One function per command, each producing a CSV table.

use crate::densities::{
    additive_law, kpz_law, kpz_moments, multiplicative_law, multiplicative_pdf, DensityLaw, PointDensity,
    TransitionKernel,
};
use crate::error::{Error, Result};
use crate::feynman_kac::{
    estimate_kpz_pdf, estimate_multiplicative_pdf, AdditiveFk, AdditiveScheme, GbmScheme, KpzScheme, McEstimate,
};
use crate::fokker_planck::{
    ck_check, fp_identity_multiplicative, fp_residual_additive, fp_residual_kpz, MultiplicativeFpCoefficients,
    ResidualGrid,
};
use crate::model::{KpzModel, Model, MultiplicativeModel};
use crate::spectral::{basis_eval, AdditiveSpectrum, Basis, ForcingRoute, MomentField};
use crate::spectral_oracle::{sample_additive, sample_kpz, sample_multiplicative, EnsembleStats};

use super::config::{CoefficientChoice, RunConfig, Scenario, SchemeChoice, UGrid};
use super::csv::CsvTable;

pub const DENSITY_HEADER: &[&str] = &["u", "t", "x", "p_closed"];
pub const FK_HEADER: &[&str] = &["u", "t", "x", "p_closed", "p_fk", "stderr", "n_paths", "dt", "seed"];
pub const ORACLE_HEADER: &[&str] = &[
    "t", "x", "n", "ks", "mean_emp", "mean_analytic", "var_emp", "var_analytic",
];
pub const RESIDUAL_HEADER: &[&str] = &["du", "dt", "max_residual", "order"];
pub const CK_HEADER: &[&str] = &["s", "r", "t", "max_error"];

/// Seed for the `index`-th independent estimate of a run.
pub fn derived_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add((index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// A scenario's model with its additive spectrum built once.
pub enum Prepared<'a> {
    Additive { spectrum: Box<AdditiveSpectrum>, n_modes: usize, tail_tol: Option<f64> },
    Multiplicative(&'a MultiplicativeModel),
    Kpz(&'a KpzModel),
}

impl<'a> Prepared<'a> {
    pub fn new(scenario: &'a Scenario) -> Result<Self> {
        Ok(match &scenario.model {
            Model::Additive(m) => {
                let base = AdditiveSpectrum::new(m.clone())?;
                let n_modes = scenario.run.n_modes.unwrap_or_else(|| base.default_modes());
                let spectrum = if n_modes > base.mode_cap() {
                    AdditiveSpectrum::with_options(m.clone(), n_modes, ForcingRoute::Auto)?
                } else {
                    base
                };
                Prepared::Additive {
                    spectrum: Box::new(spectrum),
                    n_modes,
                    tail_tol: scenario.run.tail_tol,
                }
            }
            Model::Multiplicative(m) => Prepared::Multiplicative(m),
            Model::Kpz(m) => Prepared::Kpz(m),
        })
    }

    fn additive_field(spectrum: &AdditiveSpectrum, n_modes: usize, tail_tol: Option<f64>, t: f64, x: f64) -> Result<MomentField> {
        match tail_tol {
            Some(tol) => spectrum.sum_series(t, x, tol)?.certify(tol),
            None => spectrum.moments(t, x, n_modes),
        }
    }

    /// The law of `U(t,x)` (or `K(t,x)`).
    pub fn law(&self, t: f64, x: f64) -> Result<DensityLaw> {
        match self {
            Prepared::Additive { spectrum, n_modes, tail_tol } => {
                Ok(additive_law(&Self::additive_field(spectrum, *n_modes, *tail_tol, t, x)?))
            }
            Prepared::Multiplicative(m) => Ok(multiplicative_law(t, x, m)),
            Prepared::Kpz(m) => kpz_law(t, x, m),
        }
    }

    /// Closed-form density at one point. Atoms of the multiplicative law are
    /// reported as an error since no finite density exists there.
    pub fn pdf(&self, u: f64, t: f64, x: f64) -> Result<f64> {
        match self {
            Prepared::Multiplicative(m) => match multiplicative_pdf(u, t, x, m) {
                PointDensity::Finite(p) => Ok(p),
                PointDensity::Atom { .. } => Err(Error::DegenerateLaw("the law at this x is an atom")),
            },
            _ => self.law(t, x)?.pdf(u),
        }
    }

    /// Evaluation grid at `(t, x)`.
    pub fn u_grid(&self, grid: &UGrid, t: f64, x: f64) -> Result<Vec<f64>> {
        let sign = match self {
            Prepared::Multiplicative(m) => basis_eval(Basis::Sine, m.m, x).signum(),
            _ => 1.0,
        };
        match grid {
            // listed multiplicative points are magnitudes, placed on the side of the support
            UGrid::List(v) if matches!(self, Prepared::Multiplicative(_)) => {
                Ok(v.iter().map(|u| sign * u.abs()).collect())
            }
            UGrid::List(v) => Ok(v.clone()),
            UGrid::Auto { count, width } => Ok(auto_grid(&self.law(t, x)?, *count, *width)),
        }
    }
}

/// `count` points spanning `width` standard deviations either side of the
/// centre, in log-space for log-normal laws. An atom yields its location.
pub fn auto_grid(law: &DensityLaw, count: usize, width: f64) -> Vec<f64> {
    match *law {
        DensityLaw::Gaussian { mean, variance } => {
            let sd = variance.sqrt();
            linspace(mean - width * sd, mean + width * sd, count)
        }
        DensityLaw::SignedLogNormal { sign, log_mean, log_var } => {
            let sd = log_var.sqrt();
            linspace(log_mean - width * sd, log_mean + width * sd, count)
                .into_iter()
                .map(|z| sign * z.exp())
                .collect()
        }
        DensityLaw::DegenerateAtom(a) => vec![a],
    }
}

fn each_point<F>(run: &RunConfig, mut f: F) -> Result<()>
where
    F: FnMut(f64, f64) -> Result<()>,
{
    for &t in &run.t {
        for &x in &run.x {
            f(t, x)?;
        }
    }
    Ok(())
}

pub fn density(scenario: &Scenario) -> Result<CsvTable> {
    let prepared = Prepared::new(scenario)?;
    let mut table = CsvTable::new(DENSITY_HEADER);
    each_point(&scenario.run, |t, x| {
        for u in prepared.u_grid(&scenario.run.u, t, x)? {
            table.push(vec![u.into(), t.into(), x.into(), prepared.pdf(u, t, x)?.into()]);
        }
        Ok(())
    })?;
    Ok(table)
}

pub fn fk_estimate(scenario: &Scenario, seed: u64) -> Result<CsvTable> {
    let prepared = Prepared::new(scenario)?;
    let run = &scenario.run;
    let mut table = CsvTable::new(FK_HEADER);
    let mut index = 0;
    each_point(run, |t, x| {
        let grid = prepared.u_grid(&run.u, t, x)?;
        let additive = match &prepared {
            Prepared::Additive { spectrum, n_modes, .. } => {
                let scheme = match run.scheme {
                    SchemeChoice::StepAveraged => AdditiveScheme::StepAveraged,
                    _ => AdditiveScheme::Euler,
                };
                Some(AdditiveFk::with_scheme(spectrum, t, x, run.horizon, run.dt, *n_modes, scheme)?)
            }
            _ => None,
        };
        for u in grid {
            let point_seed = derived_seed(seed, index);
            index += 1;
            let est: McEstimate = match &prepared {
                Prepared::Additive { .. } => additive
                    .as_ref()
                    .expect("built above for additive models")
                    .estimate(u, run.n_paths, point_seed)?,
                Prepared::Multiplicative(m) => {
                    let scheme = match run.scheme {
                        SchemeChoice::Euler => GbmScheme::Euler,
                        _ => GbmScheme::ExactGbm,
                    };
                    estimate_multiplicative_pdf(m, u, t, x, run.dt, run.n_paths, point_seed, scheme)?
                }
                Prepared::Kpz(m) => {
                    let scheme = match run.scheme {
                        SchemeChoice::Exact => KpzScheme::Exact,
                        _ => KpzScheme::Euler,
                    };
                    estimate_kpz_pdf(m, u, t, x, run.horizon, run.dt, run.n_paths, point_seed, scheme)?
                }
            };
            table.push(vec![
                u.into(),
                t.into(),
                x.into(),
                prepared.pdf(u, t, x)?.into(),
                est.value.into(),
                est.stderr.into(),
                est.n_paths.into(),
                est.dt.into(),
                est.seed.into(),
            ]);
        }
        Ok(())
    })?;
    Ok(table)
}

pub fn oracle_sample(scenario: &Scenario, seed: u64) -> Result<CsvTable> {
    let prepared = Prepared::new(scenario)?;
    let run = &scenario.run;
    let n = run.oracle_samples;
    let mut table = CsvTable::new(ORACLE_HEADER);
    let mut index = 0;
    each_point(run, |t, x| {
        let point_seed = derived_seed(seed, index);
        index += 1;
        let stats: EnsembleStats = match &prepared {
            Prepared::Additive { spectrum, n_modes, .. } => sample_additive(spectrum, t, x, n, *n_modes, point_seed)?,
            Prepared::Multiplicative(m) => sample_multiplicative(m, t, x, n, point_seed),
            Prepared::Kpz(m) => sample_kpz(m, t, x, n, point_seed)?,
        };
        let law = prepared.law(t, x)?;
        let ks = if law.is_atom() { f64::NAN } else { stats.ks_statistic(&law)? };
        table.push(vec![
            t.into(),
            x.into(),
            stats.n.into(),
            ks.into(),
            stats.mean.into(),
            law.mean().into(),
            stats.variance.into(),
            law.variance().into(),
        ]);
        Ok(())
    })?;
    Ok(table)
}

pub fn fp_residual(scenario: &Scenario) -> Result<CsvTable> {
    let prepared = Prepared::new(scenario)?;
    let rc = &scenario.run.residual;
    let ts = linspace(rc.t_range[0], rc.t_range[1], rc.t_count);
    let zs = linspace(-rc.z_width, rc.z_width, rc.z_count);
    let mut table = CsvTable::new(RESIDUAL_HEADER);
    let reports = match &prepared {
        Prepared::Additive { spectrum, n_modes, .. } => {
            let grid = ResidualGrid::standardized(&zs, &ts, rc.du, rc.dt, |t| {
                let f = spectrum.moments(t, rc.x, *n_modes)?;
                Ok((f.mu, f.nu))
            })?;
            fp_residual_additive(spectrum, rc.x, *n_modes, &grid, rc.levels)?
        }
        Prepared::Kpz(m) => {
            let grid = ResidualGrid::standardized(&zs, &ts, rc.du, rc.dt, |t| kpz_moments(t, rc.x, m))?;
            fp_residual_kpz(m, rc.x, &grid, rc.levels)?
        }
        Prepared::Multiplicative(m) => {
            let coeffs = match rc.coefficients {
                CoefficientChoice::Corrected => MultiplicativeFpCoefficients::corrected(m),
                CoefficientChoice::Uncorrected => MultiplicativeFpCoefficients::uncorrected(m),
            };
            let mut worst: f64 = 0.0;
            for &t in &ts {
                for u in auto_grid(&multiplicative_law(t, rc.x, m), rc.z_count, rc.z_width) {
                    worst = worst.max(fp_identity_multiplicative(u, t, rc.x, m, &coeffs)?.abs());
                }
            }
            // analytic identity: no stencil, no refinement order
            table.push(vec![0.0.into(), 0.0.into(), worst.into(), f64::NAN.into()]);
            return Ok(table);
        }
    };
    for r in reports {
        table.push(vec![r.du.into(), r.dt.into(), r.max_abs_residual.into(), r.order().into()]);
    }
    Ok(table)
}

pub fn ck(scenario: &Scenario) -> Result<CsvTable> {
    let prepared = Prepared::new(scenario)?;
    let c = &scenario.run.ck;
    let kernel = match &prepared {
        Prepared::Additive { spectrum, .. } => TransitionKernel::additive_mode(spectrum, c.mode, c.x),
        Prepared::Multiplicative(m) => TransitionKernel::multiplicative(m),
        Prepared::Kpz(m) => TransitionKernel::kpz(m),
    };
    let grid = auto_grid(&kernel.law(c.w, c.s, c.t)?, c.u_count, 3.0);
    let err = ck_check(&kernel, c.w, c.s, c.r, c.t, &grid)?;
    let mut table = CsvTable::new(CK_HEADER);
    table.push(vec![c.s.into(), c.r.into(), c.t.into(), err.into()]);
    Ok(table)
}
