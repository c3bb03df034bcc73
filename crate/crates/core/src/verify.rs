//! Self-checks bundling the property suites of every module.
//!
//! Each check returns a [`CheckResult`] instead of an error so a failing
//! check is reported by name alongside the others.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::fiber::{analyze_fiber, psi, psi_prime, sign_changes, xi_turning_point};
use crate::functionals::{energy, l2_gradient, norm_bundle, pohozaev, NormBundle};
use crate::grid::{build_grid, laplacian, laplacian_order, RadialField, RadialGrid};
use crate::landscape::{
    comparison_check, critical_exponent, derive_exponents, f_landscape, mass_threshold, rho_star,
    LandscapeParams,
};
use crate::scalar::{bisect, golden_max};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub cases: usize,
    /// Worst observed error (or failure count) against `tolerance`.
    pub worst: f64,
    pub tolerance: f64,
    pub detail: String,
}

impl CheckResult {
    fn from_worst(name: &str, cases: usize, worst: f64, tolerance: f64, detail: String) -> Self {
        Self {
            name: name.into(),
            passed: worst <= tolerance,
            cases,
            worst,
            tolerance,
            detail,
        }
    }

    fn failed(name: &str, detail: String) -> Self {
        Self {
            name: name.into(),
            passed: false,
            cases: 0,
            worst: f64::NAN,
            tolerance: f64::NAN,
            detail,
        }
    }

    fn wrap(name: &str, run: impl FnOnce() -> Result<CheckResult>) -> Self {
        run().unwrap_or_else(|e| Self::failed(name, e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyConfig {
    /// Grid for the quadrature and Laplacian-order checks.
    pub n: usize,
    pub r_max: f64,
    pub seed: u64,
    pub gradient_samples: usize,
    pub gradient_n: usize,
    pub rho_star_sets: usize,
    pub fiber_bundles: usize,
    pub comparison_samples: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            n: 4097,
            r_max: 12.0,
            seed: 1,
            gradient_samples: 20,
            gradient_n: 1025,
            rho_star_sets: 50,
            fiber_bundles: 1000,
            comparison_samples: 200,
        }
    }
}

/// Runs every check; the problem's `dim`, `q` and `μ` drive the
/// field-based ones.
pub fn run_checks(params: &LandscapeParams, config: &VerifyConfig) -> Vec<CheckResult> {
    vec![
        check_exponent_identities(),
        check_rho_star(config.seed, config.rho_star_sets),
        check_quadrature(params.dim, config.n, config.r_max),
        check_laplacian_order(params.dim, config.n, config.r_max),
        check_gradient(
            params,
            config.gradient_n,
            config.seed,
            config.gradient_samples,
        ),
        check_pohozaev_is_fiber_slope(params, config.seed),
        check_fiber_structure(params.mu, config.seed, config.fiber_bundles),
        check_comparison(params, config.seed, config.comparison_samples),
    ]
}

/// `α₀+α₁ = (q−2)/2`, `γ_q − 2 = 2α₀`, `4* − 2 = 2α₂` over `N = 5..10` and
/// 20 subcritical exponents each.
pub fn check_exponent_identities() -> CheckResult {
    let name = "exponent-identities";
    CheckResult::wrap(name, || {
        let mut worst = 0.0f64;
        let mut cases = 0;
        for dim in 5..=10 {
            let span = 8.0 / dim as f64;
            for k in 0..20 {
                let q = 2.0 + span * (k as f64 + 0.5) / 20.0;
                let e = derive_exponents(&LandscapeParams::new(dim, q, 1.0, 1.0, 1.0)?)?;
                worst = worst
                    .max((e.alpha0 + e.alpha1 - (q - 2.0) / 2.0).abs())
                    .max((e.gamma_q - 2.0 - 2.0 * e.alpha0).abs())
                    .max((e.p_crit - 2.0 - 2.0 * e.alpha2).abs())
                    .max((e.p_crit - critical_exponent(dim)).abs());
                cases += 1;
            }
        }
        Ok(CheckResult::from_worst(
            name,
            cases,
            worst,
            1e-12,
            String::new(),
        ))
    })
}

fn random_params(rng: &mut ChaCha8Rng) -> Result<LandscapeParams> {
    let dim = rng.random_range(5..=10);
    let span = 8.0 / dim as f64;
    let q = 2.0 + span * rng.random_range(0.05..0.95);
    let log_uniform =
        |rng: &mut ChaCha8Rng, lo: f64, hi: f64| rng.random_range(lo.ln()..hi.ln()).exp();
    let mu = log_uniform(rng, 0.1, 10.0);
    let c_gn = log_uniform(rng, 0.1, 3.0);
    let s_sob = log_uniform(rng, 0.01, 1.0);
    LandscapeParams::new(dim, q, mu, c_gn, s_sob)
}

/// Brute-force maximizer of `t ↦ h_c(e^t)`: a coarse scan, golden section,
/// then bisection on a central difference of `h`.
fn brute_force_rho(params: &LandscapeParams, c: f64) -> Result<(f64, f64)> {
    let h = |t: f64| f_landscape(params, c, t.exp()).unwrap_or(f64::NEG_INFINITY);
    let (lo, hi, steps) = (-200.0, 200.0, 1600);
    let dt = (hi - lo) / steps as f64;
    let best = (0..=steps)
        .map(|k| lo + k as f64 * dt)
        .max_by(|a, b| h(*a).total_cmp(&h(*b)))
        .expect("nonempty scan");
    let (t, _) = golden_max(h, best - dt, best + dt, 1e-12, 200);
    let delta = 1e-5;
    let slope = |t: f64| h(t + delta) - h(t - delta);
    let t = bisect(slope, t - 1e-3, t + 1e-3, 200, 1e-15)?;
    Ok((t.exp(), h(t)))
}

/// `ρ_c` against a brute-force argmax on random parameter sets, and `c₀`
/// against bisection of the brute-force maximum.
pub fn check_rho_star(seed: u64, sets: usize) -> CheckResult {
    let name = "rho-star-argmax";
    CheckResult::wrap(name, || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst_rho = 0.0f64;
        let mut worst_zero = 0.0f64;
        let mut worst_c0 = 0.0f64;
        for _ in 0..sets {
            let p = random_params(&mut rng)?;
            let t = mass_threshold(&p)?;
            let c = t.c0 * rng.random_range(0.05..0.95);
            let (rho, _) = brute_force_rho(&p, c)?;
            worst_rho = worst_rho.max((rho / rho_star(&p, c)? - 1.0).abs());
            worst_zero = worst_zero.max(f_landscape(&p, t.c0, t.rho0)?.abs());
            let c0 = bisect(
                |c| brute_force_rho(&p, c).map_or(f64::NAN, |(_, v)| v),
                0.5 * t.c0,
                2.0 * t.c0,
                200,
                1e-14,
            )?;
            worst_c0 = worst_c0.max((c0 / t.c0 - 1.0).abs());
        }
        // one number against one tolerance: scale the zero and c₀ checks
        let worst = worst_rho.max(worst_zero * 1e-8 / 1e-10).max(worst_c0);
        Ok(CheckResult::from_worst(
            name,
            sets,
            worst,
            1e-8,
            format!(
                "rho rel err {worst_rho:.2e}, |h(c0, rho0)| {worst_zero:.2e} (tol 1e-10), c0 rel err {worst_c0:.2e}"
            ),
        ))
    })
}

/// `∫e^{−r²}dx = π^{N/2}` and `‖Δe^{−r²/2}‖₂² = N(N+2)/4·π^{N/2}`.
pub fn check_quadrature(dim: usize, n: usize, r_max: f64) -> CheckResult {
    let name = "quadrature-oracles";
    CheckResult::wrap(name, || {
        let grid = build_grid(dim, n, r_max)?;
        let half_n = dim as f64 / 2.0;
        let exact_mass = PI.powf(half_n);
        let u = RadialField::from_fn(grid.clone(), |r| (-0.5 * r * r).exp())?;
        let mass_err = (u.mass() / exact_mass - 1.0).abs();
        let lap = laplacian(&u);
        let bend = lap.inner(&lap)?;
        let exact_bend = dim as f64 * (dim as f64 + 2.0) / 4.0 * exact_mass;
        let bend_err = (bend / exact_bend - 1.0).abs();
        Ok(CheckResult::from_worst(
            name,
            2,
            mass_err.max(bend_err),
            1e-6,
            format!(
                "mass rel err {mass_err:.2e}, bend rel err {bend_err:.2e} (n = {n}, R = {r_max})"
            ),
        ))
    })
}

/// Largest node count used for the order estimate: on finer grids the
/// `O(ε/h²)` round-off of the stencil swamps the truncation error and the
/// error ratio stops measuring the order.
pub const ORDER_PROBE_NODES: usize = 257;

/// Observed order of `Δ_h` between `n` and `2n − 1` nodes (with `n` capped
/// at [`ORDER_PROBE_NODES`]) must reach 3.9.
pub fn check_laplacian_order(dim: usize, n: usize, r_max: f64) -> CheckResult {
    let name = "laplacian-order";
    CheckResult::wrap(name, || {
        let n = n.min(ORDER_PROBE_NODES);
        let order = laplacian_order(dim, n, r_max)?;
        Ok(CheckResult {
            name: name.into(),
            passed: order >= 3.9,
            cases: 1,
            worst: order,
            tolerance: 3.9,
            detail: format!("observed order {order:.3} (n = {n}, R = {r_max}); must be >= 3.9"),
        })
    })
}

fn random_gaussian_sum(grid: &Arc<RadialGrid>, rng: &mut ChaCha8Rng) -> Result<RadialField> {
    let terms: Vec<(f64, f64)> = (0..3)
        .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(1.0..3.0)))
        .collect();
    RadialField::from_fn(grid.clone(), |r| {
        terms
            .iter()
            .map(|(a, w)| a * (-(r * r) / (2.0 * w * w)).exp())
            .sum()
    })
}

/// `⟨∇J, v⟩` against central differences of the discrete energy.
pub fn check_gradient(
    params: &LandscapeParams,
    n: usize,
    seed: u64,
    samples: usize,
) -> CheckResult {
    let name = "gradient-finite-difference";
    CheckResult::wrap(name, || {
        let grid = build_grid(params.dim, n, 20.0)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        for _ in 0..samples {
            let u = random_gaussian_sum(&grid, &mut rng)?;
            let v = random_gaussian_sum(&grid, &mut rng)?;
            let g = l2_gradient(params, &u)?;
            let exact = g.inner(&v)?;
            let eps = 1e-4;
            let j = |t: f64| -> Result<f64> {
                let w = u.axpy(t, &v)?;
                Ok(energy(params, &norm_bundle(params, &w)?))
            };
            let fd = (j(eps)? - j(-eps)?) / (2.0 * eps);
            worst = worst.max(((fd - exact) / exact).abs());
        }
        Ok(CheckResult::from_worst(
            name,
            samples,
            worst,
            1e-5,
            format!("max relative error {worst:.2e} (n = {n})"),
        ))
    })
}

/// `Q(u) = ψ′(1)` on random fields.
pub fn check_pohozaev_is_fiber_slope(params: &LandscapeParams, seed: u64) -> CheckResult {
    let name = "pohozaev-fiber-slope";
    CheckResult::wrap(name, || {
        let grid = build_grid(params.dim, 1025, 20.0)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let mut worst = 0.0f64;
        let cases = 10;
        for _ in 0..cases {
            let b = norm_bundle(params, &random_gaussian_sum(&grid, &mut rng)?)?;
            let q = pohozaev(params, &b);
            let scale = b.bend + params.mu * b.subcrit + b.crit;
            worst = worst.max((q - psi_prime(params, &b, 1.0)?).abs() / scale);
        }
        Ok(CheckResult::from_worst(
            name,
            cases,
            worst,
            1e-12,
            String::new(),
        ))
    })
}

/// At most two zeros of `ψ′`; with two, `s₁ < s* < s₂` and `ψ(s₁) < 0`.
pub fn check_fiber_structure(mu: f64, seed: u64, bundles: usize) -> CheckResult {
    let name = "fiber-zero-structure";
    CheckResult::wrap(name, || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xf1be);
        let mut failures = Vec::new();
        for k in 0..bundles {
            let dim = rng.random_range(5..=10);
            let q = 2.0 + 8.0 / dim as f64 * rng.random_range(0.02..0.98);
            let params = LandscapeParams::new(dim, q, mu, 1.0, 1.0)?;
            let mut log_uniform = || rng.random_range(-3.0f64..3.0).exp();
            let b = NormBundle::new(1.0, log_uniform(), log_uniform(), log_uniform());
            let a = analyze_fiber(&params, &b)?;
            let s_turn = xi_turning_point(&params, &b).unwrap_or(1.0);
            let changes = sign_changes((0..4000).map(|i| {
                let s = s_turn * (-12.0 + 24.0 * i as f64 / 3999.0).exp();
                psi_prime(&params, &b, s).unwrap_or(f64::NAN)
            }));
            let mut ok = changes <= 2 && a.zero_count() <= 2;
            if let (Some(s1), Some(s2)) = (a.s1, a.s2) {
                if s1 != s2 {
                    ok &= s1 < s_turn && s_turn < s2 && psi(&params, &b, s1)? < 0.0;
                }
            }
            if !ok {
                failures.push(k);
            }
        }
        Ok(CheckResult::from_worst(
            name,
            bundles,
            failures.len() as f64,
            0.0,
            if failures.is_empty() {
                String::new()
            } else {
                format!("failing bundles {failures:?}")
            },
        ))
    })
}

/// `f(c₂, ρ) >= f(c₁, ρ₁)` on `[(c₂/c₁)ρ₁, ρ₁]` for random `c₂ <= c₁`.
pub fn check_comparison(params: &LandscapeParams, seed: u64, samples: usize) -> CheckResult {
    let name = "comparison-inequality";
    CheckResult::wrap(name, || {
        let t = mass_threshold(params)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xc0de);
        let mut failures = 0usize;
        for k in 0..samples {
            let c1 = t.c0 * rng.random_range(0.01..0.99);
            let c2 = if k == 0 {
                c1
            } else {
                c1 * rng.random_range(0.01..1.0)
            };
            let rho1 = t.rho0 * rng.random_range(-3.0f64..3.0).exp();
            if !comparison_check(params, c1, rho1, c2, 50)? {
                failures += 1;
            }
        }
        Ok(CheckResult::from_worst(
            name,
            samples,
            failures as f64,
            0.0,
            String::new(),
        ))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic() -> LandscapeParams {
        LandscapeParams::new(5, 3.0, 1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn default_suite_passes() {
        let config = VerifyConfig {
            fiber_bundles: 200,
            rho_star_sets: 10,
            gradient_samples: 5,
            ..VerifyConfig::default()
        };
        for check in run_checks(&synthetic(), &config) {
            assert!(check.passed, "{check:?}");
        }
    }

    #[test]
    fn coarse_grid_fails_laplacian_order_by_name() {
        let check = check_laplacian_order(5, 8, 12.0);
        assert!(!check.passed);
        assert_eq!(check.name, "laplacian-order");
        assert!(check.detail.contains("64"), "{}", check.detail);
    }
}
