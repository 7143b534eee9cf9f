//! Quadrature rules: composite Gauss-Legendre on intervals, Gauss-Hermite
//! expectations under normal laws, and adaptive Simpson.
//!
//! Node/weight tables come from `gauss-quad` and are cached per degree.

use std::collections::HashMap;
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex, OnceLock};

use gauss_quad::{GaussHermite, GaussLegendre};

use crate::error::{Error, Result};

/// Gauss-Legendre nodes per unit interval for spatial inner products.
pub const DEFAULT_LEGENDRE_ORDER: usize = 64;

fn legendre_rule(order: usize) -> Arc<GaussLegendre> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussLegendre>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().expect("quadrature cache poisoned");
    map.entry(order)
        .or_insert_with(|| Arc::new(GaussLegendre::new(NonZeroUsize::new(order.max(1)).unwrap())))
        .clone()
}

fn hermite_rule(order: usize) -> Arc<GaussHermite> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussHermite>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().expect("quadrature cache poisoned");
    map.entry(order)
        .or_insert_with(|| Arc::new(GaussHermite::new(NonZeroUsize::new(order.max(1)).unwrap())))
        .clone()
}

/// `∫_a^b f` with `panels` equal panels of an `order`-point Gauss-Legendre rule.
pub fn gauss_legendre<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, order: usize, panels: usize) -> f64 {
    let rule = legendre_rule(order);
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|k| {
            let lo = a + k as f64 * h;
            rule.integrate(lo, lo + h, &mut f)
        })
        .sum()
}

/// `E[f(Z)]` for `Z ~ N(mean, variance)` by `order`-point Gauss-Hermite.
pub fn normal_expectation<F: FnMut(f64) -> f64>(mut f: F, mean: f64, variance: f64, order: usize) -> f64 {
    let rule = hermite_rule(order);
    let scale = (2.0 * variance).sqrt();
    rule.integrate(|z| f(mean + scale * z)) / std::f64::consts::PI.sqrt()
}

/// [`normal_expectation`] with the order doubled from 32 until two successive
/// results agree to `rel_tol` (relative to `scale`), up to `max_order` nodes.
pub fn adaptive_normal_expectation<F: FnMut(f64) -> f64>(
    mut f: F,
    mean: f64,
    variance: f64,
    rel_tol: f64,
    scale: f64,
    max_order: usize,
) -> Result<f64> {
    let mut order = 32;
    let mut prev = normal_expectation(&mut f, mean, variance, order);
    while order < max_order {
        order *= 2;
        let next = normal_expectation(&mut f, mean, variance, order);
        if (next - prev).abs() <= rel_tol * scale.abs().max(f64::MIN_POSITIVE) {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::QuadratureFailure(format!(
        "Gauss-Hermite did not settle to {rel_tol:e} within {max_order} nodes"
    )))
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64, max_depth: u32) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut budget = 1usize << 22;
    simpson_step(&f, a, b, fa, fm, fb, whole, tol, max_depth, &mut budget)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    budget: &mut usize,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 || *budget == 0 {
        return Err(Error::QuadratureFailure(format!(
            "adaptive Simpson on [{a}, {b}] exhausted its refinement budget"
        )));
    }
    *budget -= 1;
    Ok(simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, budget)?
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, budget)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn legendre_integrates_trig() {
        let v = gauss_legendre(|x| (PI * x).sin(), 0.0, 1.0, 64, 1);
        assert!((v - 2.0 / PI).abs() < 1e-15);
        let w = gauss_legendre(|x| x.powi(5), -1.0, 2.0, 8, 3);
        assert!((w - (64.0 - 1.0) / 6.0).abs() < 1e-12);
    }

    #[test]
    fn hermite_moments() {
        let m2 = normal_expectation(|z| z * z, 1.5, 0.3, 20);
        assert!((m2 - (0.3 + 2.25)).abs() < 1e-13);
        let e = normal_expectation(|z| z.exp(), 0.2, 0.5, 40);
        assert!((e - (0.2f64 + 0.25).exp()).abs() < 1e-13);
    }

    #[test]
    fn simpson_matches_closed_form() {
        let v = adaptive_simpson(|s| (0.7 * s).exp() * s.cos(), 0.0, 2.0, 1e-12, 40).unwrap();
        // ∫ e^{as} cos s ds = e^{as}(a cos s + sin s)/(1 + a²)
        let a: f64 = 0.7;
        let exact = ((a * 2.0).exp() * (a * 2f64.cos() + 2f64.sin()) - a) / (1.0 + a * a);
        assert!((v - exact).abs() < 1e-11);
    }

    #[test]
    fn simpson_reports_exhausted_budget() {
        let r = adaptive_simpson(|s| (1.0 / s).sin(), 1e-9, 1.0, 1e-14, 3);
        assert!(matches!(r, Err(Error::QuadratureFailure(_))));
    }
}
