//! Numerical lower bounds for the Gagliardo–Nirenberg and Sobolev constants.
//!
//! Both are achieved quotients of concrete radial fields, hence certified
//! lower bounds on the best constants (up to quadrature error).

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{dot, scaled_stiffness, Preconditioner};
use crate::error::{Error, Result};
use crate::functionals::{bundle_from_parts, signed_power, NormBundle};
use crate::grid::{build_grid, RadialField, RadialGrid};
use crate::landscape::{exponents_unchecked, LandscapeParams};
use crate::scalar::golden_max;

fn bundle_of(params: &LandscapeParams, grid: &RadialGrid, x: &[f64]) -> NormBundle {
    let lap = grid.apply_laplacian(x);
    bundle_from_parts(grid, params.q, params.p_crit(), x, &lap)
}

fn ln_gn(beta: f64, q: f64, b: &NormBundle) -> f64 {
    b.subcrit.ln() / q - 0.5 * beta * b.bend.ln() - 0.5 * (1.0 - beta) * b.mass.ln()
}

/// `‖u‖_q / (‖Δu‖₂^β ‖u‖₂^{1−β})`.
pub fn gn_quotient(params: &LandscapeParams, field: &RadialField) -> Result<f64> {
    let b = bundle_of(params, field.grid(), field.values());
    if !(b.mass > 0.0 && b.bend > 0.0) {
        return Err(Error::DegenerateBundle(
            "the Gagliardo–Nirenberg quotient needs a nonzero field".into(),
        ));
    }
    let beta = exponents_unchecked(params.dim, params.q).beta;
    Ok(ln_gn(beta, params.q, &b).exp())
}

/// Quotient of a Gaussian, from its exact norms.
pub fn gaussian_gn_quotient(params: &LandscapeParams) -> f64 {
    let b = super::gaussian_bundle(params, 1.0, 1.0);
    let beta = exponents_unchecked(params.dim, params.q).beta;
    ln_gn(beta, params.q, &b).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GnEstimate {
    pub value: f64,
    /// Discrete quotient of the starting Gaussian.
    pub start: f64,
    pub iters: usize,
}

const GN_MAX_ITER: usize = 3000;
const GN_SLOPE_TOL: f64 = 1e-18;

/// Maximizes the Gagliardo–Nirenberg quotient by preconditioned ascent on
/// its logarithm, starting from a Gaussian of width `R/15`.
pub fn estimate_gn_constant(
    params: &LandscapeParams,
    grid: &Arc<RadialGrid>,
) -> Result<GnEstimate> {
    params.validate()?;
    if grid.dim() != params.dim {
        return Err(Error::InvalidArgument(
            "grid dimension does not match the problem".into(),
        ));
    }
    let q = params.q;
    let beta = exponents_unchecked(params.dim, q).beta;
    let width = grid.r_max() / 15.0;
    let start_field =
        RadialField::from_fn(grid.clone(), |r| (-(r * r) / (2.0 * width * width)).exp())?;
    let mut x = start_field
        .scaled(1.0 / start_field.mass().sqrt())
        .into_values();
    let w = grid.weights();
    let stiffness = scaled_stiffness(grid);
    let mut b = bundle_of(params, grid, &x);
    let start = ln_gn(beta, q, &b).exp();
    let mut f0 = ln_gn(beta, q, &b);
    let mut tau = 1.0f64;
    let mut precond: Option<Preconditioner> = None;
    let mut slope = f64::INFINITY;
    for iter in 0..GN_MAX_ITER {
        // ∇ log Q = W f_q(u)/B − β K u/A − (1−β) W u/m
        let lap = grid.apply_laplacian(&x);
        let wl: Vec<f64> = lap.iter().zip(w).map(|(l, w)| l * w).collect();
        let ku = grid.apply_laplacian_transpose(&wl);
        let mut g = vec![0.0; x.len()];
        for j in 1..x.len() {
            g[j] = w[j] * signed_power(x[j], q) / b.subcrit
                - beta * ku[j] / b.bend
                - (1.0 - beta) * w[j] * x[j] / b.mass;
        }
        if iter % 20 == 0 || precond.is_none() {
            precond = Some(Preconditioner::new(
                &stiffness,
                grid,
                1.0 / b.bend,
                1.0 / b.mass,
            )?);
        }
        let d = precond.as_ref().expect("built above").apply(&g);
        slope = dot(&g, &d);
        if slope < GN_SLOPE_TOL {
            return Ok(GnEstimate {
                value: f0.exp(),
                start,
                iters: iter,
            });
        }
        let accepted = loop {
            let mut trial: Vec<f64> = x.iter().zip(&d).map(|(x, d)| x + tau * d).collect();
            let m: f64 = trial.iter().zip(w).map(|(v, w)| w * v * v).sum();
            let s = 1.0 / m.sqrt();
            trial.iter_mut().for_each(|v| *v *= s);
            let tb = bundle_of(params, grid, &trial);
            let f1 = ln_gn(beta, q, &tb);
            if f1 >= f0 + 1e-4 * tau * slope {
                break Some((trial, tb, f1));
            }
            if tau * slope < 1e-15 * f0.abs().max(1.0) {
                break None;
            }
            tau *= 0.5;
        };
        match accepted {
            Some((trial, tb, f1)) => {
                x = trial;
                b = tb;
                f0 = f1;
                tau = (2.0 * tau).min(1.0);
            }
            // no further progress above round-off
            None => {
                return Ok(GnEstimate {
                    value: f0.exp(),
                    start,
                    iters: iter,
                })
            }
        }
    }
    Err(Error::NotConverged {
        iters: GN_MAX_ITER,
        grad_norm: slope.sqrt(),
        q_residual: 0.0,
    })
}

/// `‖u‖_{4*} / ‖Δu‖₂`.
pub fn sobolev_quotient(params: &LandscapeParams, field: &RadialField) -> Result<f64> {
    let b = bundle_of(params, field.grid(), field.values());
    if !(b.bend > 0.0) {
        return Err(Error::DegenerateBundle(
            "the Sobolev quotient needs a nonzero field".into(),
        ));
    }
    Ok(b.crit.powf(1.0 / params.p_crit()) / b.bend.sqrt())
}

/// `(ε + r²)^{−(N−4)/2}·χ(r)` with a C⁴ cutoff `χ` falling from 1 at
/// `cutoff_start·R` to 0 at `R`.
pub fn sobolev_profile(grid: &Arc<RadialGrid>, eps: f64, cutoff_start: f64) -> Result<RadialField> {
    if !(eps > 0.0) || !(0.0..1.0).contains(&cutoff_start) {
        return Err(Error::InvalidArgument(format!(
            "need eps > 0 and cutoff_start in [0, 1), got {eps}, {cutoff_start}"
        )));
    }
    let k = (grid.dim() as f64 - 4.0) / 2.0;
    let r_max = grid.r_max();
    let a = cutoff_start * r_max;
    RadialField::from_fn(grid.clone(), |r| {
        let t = ((r - a) / (r_max - a)).clamp(0.0, 1.0);
        let smooth = t.powi(5) * (126.0 + t * (-420.0 + t * (540.0 + t * (-315.0 + 70.0 * t))));
        (eps + r * r).powf(-k) * (1.0 - smooth)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SobolevConfig {
    /// Cutoff onset as a fraction of `R`.
    pub cutoff_start: f64,
    /// Largest accepted relative change when `R` is doubled at fixed `h`.
    pub truncation_tol: f64,
    pub check_truncation: bool,
}

impl Default for SobolevConfig {
    fn default() -> Self {
        Self {
            cutoff_start: 0.1,
            truncation_tol: 1e-3,
            check_truncation: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SobolevEstimate {
    pub value: f64,
    pub epsilon: f64,
    /// Relative change on the grid with twice the radius and the same spacing.
    pub truncation_change: Option<f64>,
}

/// Maximizes the quotient over `ε ∈ [(4h)², (R/4)²]` by golden section in
/// `ln ε`. Below `(4h)²` the profile's core is unresolved and the discrete
/// Laplacian underestimates the bending energy.
fn sobolev_on_grid(
    params: &LandscapeParams,
    grid: &Arc<RadialGrid>,
    cutoff: f64,
) -> Result<(f64, f64)> {
    let lo = (4.0 * grid.spacing()).powi(2).ln();
    let hi = (grid.r_max() / 4.0).powi(2).ln();
    let mut failure = None;
    let (arg, value) = golden_max(
        |le| match sobolev_profile(grid, le.exp(), cutoff)
            .and_then(|u| sobolev_quotient(params, &u))
        {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NEG_INFINITY
            }
        },
        lo,
        hi,
        1e-7,
        200,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok((value, arg.exp()))
}

pub fn estimate_sobolev_constant(
    params: &LandscapeParams,
    grid: &Arc<RadialGrid>,
    config: &SobolevConfig,
) -> Result<SobolevEstimate> {
    if grid.dim() != params.dim {
        return Err(Error::InvalidArgument(
            "grid dimension does not match the problem".into(),
        ));
    }
    let (value, epsilon) = sobolev_on_grid(params, grid, config.cutoff_start)?;
    let mut truncation_change = None;
    if config.check_truncation {
        let wide = build_grid(grid.dim(), 2 * grid.len() - 1, 2.0 * grid.r_max())?;
        let (wide_value, _) = sobolev_on_grid(params, &wide, config.cutoff_start)?;
        let change = ((wide_value - value) / value).abs();
        truncation_change = Some(change);
        if change > config.truncation_tol {
            return Err(Error::TruncationSensitive {
                rel_change: change,
                tolerance: config.truncation_tol,
            });
        }
    }
    Ok(SobolevEstimate {
        value,
        epsilon,
        truncation_change,
    })
}

/// Grids for the two estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateConfig {
    pub gn_n: usize,
    pub gn_r_max: f64,
    pub sobolev_n: usize,
    pub sobolev_r_max: f64,
    pub sobolev: SobolevConfig,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self {
            gn_n: 2049,
            gn_r_max: 30.0,
            sobolev_n: 16385,
            sobolev_r_max: 60.0,
            sobolev: SobolevConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimatedConstants {
    pub gn: GnEstimate,
    pub sobolev: SobolevEstimate,
}

/// Both constants for the problem's `N` and `q`; `params` supplies only the
/// problem data, its constants are ignored.
pub fn estimate_constants(
    params: &LandscapeParams,
    config: &EstimateConfig,
) -> Result<EstimatedConstants> {
    params.validate()?;
    let gn_grid = build_grid(params.dim, config.gn_n, config.gn_r_max)?;
    let gn = estimate_gn_constant(params, &gn_grid)?;
    let sob_grid = build_grid(params.dim, config.sobolev_n, config.sobolev_r_max)?;
    let sobolev = estimate_sobolev_constant(params, &sob_grid, &config.sobolev)?;
    Ok(EstimatedConstants { gn, sobolev })
}
