//! Exact sampling of the solutions from their mode representations.
//!
//! No time stepping is involved: each Ornstein-Uhlenbeck mode and the
//! geometric Brownian mode have explicit Gaussian (log-Gaussian) laws at any
//! fixed time, so the samples carry no discretization bias.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::densities::DensityLaw;
use crate::error::{Error, Result};
use crate::feynman_kac::{pairwise_sum, path_rng};
use crate::model::{KpzModel, MultiplicativeModel};
use crate::spectral::{basis_eval, exprel2, AdditiveSpectrum, Basis};

/// 1% two-sided critical value of the asymptotic Kolmogorov distribution, times `√n`.
pub const KS_CRITICAL_1PCT: f64 = 1.63;

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub samples: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
    pub n: usize,
    pub seed: u64,
}

impl EnsembleStats {
    fn new(samples: Vec<f64>, seed: u64) -> Self {
        let n = samples.len();
        let mean = pairwise_sum(&samples) / n as f64;
        let sq: Vec<f64> = samples.iter().map(|v| (v - mean).powi(2)).collect();
        let variance = if n > 1 { pairwise_sum(&sq) / (n as f64 - 1.0) } else { 0.0 };
        Self {
            samples,
            mean,
            variance,
            n,
            seed,
        }
    }

    pub fn ks_statistic(&self, law: &DensityLaw) -> Result<f64> {
        ks_statistic(&self.samples, law)
    }

    /// Critical KS value at the 1% level for this sample size.
    pub fn ks_critical(&self) -> f64 {
        KS_CRITICAL_1PCT / (self.n as f64).sqrt()
    }
}

fn parallel_samples<F>(n: usize, seed: u64, f: F) -> Vec<f64>
where
    F: Fn(&mut rand_chacha::ChaCha8Rng) -> f64 + Sync,
{
    (0..n as u64).into_par_iter().map(|i| f(&mut path_rng(seed, i))).collect()
}

/// Samples of `U(t,x) = Y(t,x) + Σ_{n≤N} V_n(t) e_n(x)` with each `V_n(t)` drawn exactly.
pub fn sample_additive(
    spectrum: &AdditiveSpectrum,
    t: f64,
    x: f64,
    n_samples: usize,
    n_modes: usize,
    seed: u64,
) -> Result<EnsembleStats> {
    if n_modes == 0 || n_modes > spectrum.mode_cap() {
        return Err(Error::InvalidArgument(format!(
            "n_modes must lie in 1..={}, got {n_modes}",
            spectrum.mode_cap()
        )));
    }
    // per mode: (basis value, e^{λt}, initial mean of V_n, initial sd, forced response, noise sd)
    let modes = (1..=n_modes)
        .map(|n| {
            let law = spectrum.model().initial_mode(n);
            let lambda = spectrum.lambda(n)?;
            Ok([
                basis_eval(Basis::Cosine, n, x),
                (lambda * t).exp(),
                law.mean - spectrum.lift_coefficient(n, 0.0)?,
                law.variance.sqrt(),
                spectrum.forced_response(n, 0.0, t)?,
                spectrum.noise(n)?.abs() * exprel2(lambda, t).sqrt(),
            ])
        })
        .collect::<Result<Vec<[f64; 6]>>>()?;
    let lift = spectrum.lift().value(t, x);
    let samples = parallel_samples(n_samples, seed, |rng| {
        let mut u = lift;
        for &[e, growth, m0, sd0, forced, noise] in &modes {
            let z0: f64 = rng.sample(StandardNormal);
            let z1: f64 = rng.sample(StandardNormal);
            let v0 = m0 + sd0 * z0;
            u += (v0 * growth + forced + noise * z1) * e;
        }
        u
    });
    Ok(EnsembleStats::new(samples, seed))
}

/// Samples of `U(t,x) = U_m(0) e^{b_m t + ε_m W_m(t)} ẽ_m(x)`.
pub fn sample_multiplicative(model: &MultiplicativeModel, t: f64, x: f64, n_samples: usize, seed: u64) -> EnsembleStats {
    let e = basis_eval(Basis::Sine, model.m, x);
    let (mean0, sd0) = (model.initial.mean, model.initial.variance.sqrt());
    let (b, eps) = (model.b_m(), model.eps_m());
    let samples = parallel_samples(n_samples, seed, |rng| {
        let z0: f64 = rng.sample(StandardNormal);
        let z1: f64 = rng.sample(StandardNormal);
        let ln_u0 = mean0 + sd0 * z0;
        (ln_u0 + b * t + eps * t.sqrt() * z1).exp() * e
    });
    EnsembleStats::new(samples, seed)
}

/// Samples of `K(t,x) = (2θ/ξ) ln|U(t,x)|`.
pub fn sample_kpz(model: &KpzModel, t: f64, x: f64, n_samples: usize, seed: u64) -> Result<EnsembleStats> {
    if !model.contains(x) {
        return Err(Error::WindowViolation {
            x,
            lower: model.window.0,
            upper: model.window.1,
        });
    }
    let log_e = basis_eval(Basis::Sine, model.m, x).abs().ln();
    let (mean0, sd0) = (model.initial.mean, model.initial.variance.sqrt());
    let (b, eps, k) = (model.b_tilde(), model.epsilon * model.q_m, model.scale());
    let samples = parallel_samples(n_samples, seed, |rng| {
        let z0: f64 = rng.sample(StandardNormal);
        let z1: f64 = rng.sample(StandardNormal);
        let ln_u = mean0 + sd0 * z0 + b * t + eps * t.sqrt() * z1;
        k * (ln_u + log_e)
    });
    Ok(EnsembleStats::new(samples, seed))
}

/// `sup_u |F_n(u) − F(u)|` for the empirical CDF of `samples`.
pub fn ks_statistic(samples: &[f64], law: &DensityLaw) -> Result<f64> {
    if law.is_atom() {
        return Err(Error::DegenerateLaw("KS distance against a point mass; compare interval masses"));
    }
    if samples.is_empty() {
        return Err(Error::InvalidArgument("KS statistic of an empty sample".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = law.cdf(v);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densities::tests::{example3, example4};
    use crate::densities::{additive_law, kpz_law, multiplicative_law};
    use crate::homogenization::{BoundaryCase, BoundaryCondition};
    use crate::model::{AdditiveModel, Forcing, ModeLaw, NoiseAmplitudes, NoiseSpec, TimeSignal};
    use crate::spectral::tests::example1;

    #[test]
    fn ks_trivial_cases() {
        let law = DensityLaw::gaussian(0.0, 1.0);
        assert!((ks_statistic(&[0.0], &law).unwrap() - 0.5).abs() < 1e-15);
        let far = vec![-1e6; 10];
        assert!((ks_statistic(&far, &law).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(
            ks_statistic(&[0.0], &DensityLaw::DegenerateAtom(0.0)),
            Err(Error::DegenerateLaw(_))
        ));
    }

    #[test]
    fn additive_oracle_example1() {
        let sp = AdditiveSpectrum::new(example1()).unwrap();
        let stats = sample_additive(&sp, 1.0, 0.5, 10_000, 10, 42).unwrap();
        let f = sp.moments(1.0, 0.5, 10).unwrap();
        let ks = stats.ks_statistic(&additive_law(&f)).unwrap();
        assert!(ks < stats.ks_critical(), "ks = {ks}");
        assert!((stats.mean - f.mu).abs() < 3.0 * (f.nu / 1e4).sqrt());
    }

    #[test]
    fn deterministic_additive_has_no_spread() {
        let model = AdditiveModel {
            a: 0.5,
            b: -0.2,
            sigma: 0.0,
            forcing: Forcing::Zero,
            boundary: BoundaryCase::new(BoundaryCondition::MainNeumannDirichlet, TimeSignal::constant(0.3), TimeSignal::zero()),
            noise: NoiseSpec::new(NoiseAmplitudes::Reciprocal, 4),
            initial_modes: vec![ModeLaw { mean: 1.0, variance: 0.0 }],
        };
        let sp = AdditiveSpectrum::new(model).unwrap();
        let stats = sample_additive(&sp, 0.7, 0.2, 50, 4, 1).unwrap();
        let f = sp.moments(0.7, 0.2, 4).unwrap();
        assert!(stats.samples.iter().all(|&v| (v - f.mu).abs() < 1e-14));
        assert!(stats.variance < 1e-28);
    }

    #[test]
    fn multiplicative_oracle() {
        let model = example3();
        let stats = sample_multiplicative(&model, 0.3, 0.125, 10_000, 7);
        let ks = stats.ks_statistic(&multiplicative_law(0.3, 0.125, &model)).unwrap();
        assert!(ks < stats.ks_critical(), "ks = {ks}");
        let neg = sample_multiplicative(&model, 0.3, 0.625, 1000, 7);
        assert!(neg.samples.iter().all(|&v| v < 0.0));
        let zero = sample_multiplicative(&model, 0.3, 0.5, 100, 7);
        assert!(zero.samples.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn kpz_oracle_and_cole_hopf() {
        let model = example4();
        let stats = sample_kpz(&model, 0.3, 0.125, 10_000, 8).unwrap();
        let ks = stats.ks_statistic(&kpz_law(0.3, 0.125, &model).unwrap()).unwrap();
        assert!(ks < stats.ks_critical(), "ks = {ks}");

        // same streams drive the multiplicative sampler with the KPZ log-drift
        let mult = MultiplicativeModel {
            a: 0.0,
            b: 0.0,
            c: -model.theta * std::f64::consts::PI.powi(2),
            alpha: 1.0,
            epsilon: model.epsilon,
            m: model.m,
            q_m: model.q_m,
            initial: model.initial,
        };
        assert!((mult.b_m() - model.b_tilde()).abs() < 1e-12);
        let u = sample_multiplicative(&mult, 0.3, 0.125, 100, 8);
        let k = sample_kpz(&model, 0.3, 0.125, 100, 8).unwrap();
        for (a, b) in u.samples.iter().zip(&k.samples) {
            let back = (model.xi * b / (2.0 * model.theta)).exp();
            assert!((back - a.abs()).abs() <= 1e-12 * a.abs());
        }
        let flipped = KpzModel { xi: -1.0, ..model.clone() };
        let kf = sample_kpz(&flipped, 0.3, 0.125, 100, 8).unwrap();
        assert!(k.samples.iter().zip(&kf.samples).all(|(a, b)| *a == -*b));
    }

    #[test]
    fn lifted_and_direct_constructions_agree() {
        // U_n = V_n + y_n with V_n(0) = U_n(0) − y_n(0): same draws give the same samples
        let sp = AdditiveSpectrum::new(example1()).unwrap();
        let a = sample_additive(&sp, 0.6, 0.35, 200, 10, 3).unwrap();
        let direct: Vec<f64> = (0..200u64)
            .map(|i| {
                let mut rng = path_rng(3, i);
                let mut u = sp.lift().value(0.6, 0.35);
                for n in 1..=10 {
                    let e = basis_eval(Basis::Cosine, n, 0.35);
                    let lambda = sp.lambda(n).unwrap();
                    let law = sp.model().initial_mode(n);
                    let z0: f64 = rng.sample(StandardNormal);
                    let z1: f64 = rng.sample(StandardNormal);
                    let un0 = law.mean + law.variance.sqrt() * z0;
                    let un_t = (un0 - sp.lift_coefficient(n, 0.0).unwrap()) * (lambda * 0.6).exp()
                        + sp.forced_response(n, 0.0, 0.6).unwrap()
                        + sp.lift_coefficient(n, 0.6).unwrap()
                        + sp.noise(n).unwrap() * exprel2(lambda, 0.6).sqrt() * z1;
                    u += (un_t - sp.lift_coefficient(n, 0.6).unwrap()) * e;
                }
                u
            })
            .collect();
        for (x, y) in a.samples.iter().zip(&direct) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
