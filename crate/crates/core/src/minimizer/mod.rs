//! Constrained minimization of `J` on `{‖u‖₂² = c, ‖Δu‖₂² < ρ₀}`.
//!
//! The iteration is a preconditioned Riemannian descent on the mass sphere:
//!
//! 1. `G` is the exact gradient of the discrete energy, `P = K + σW` with
//!    `K = LᵀWL` and `σ = |λ|` (refreshed every few iterations).
//! 2. The search direction `d = P⁻¹G − α P⁻¹Wu` is the `P`-metric gradient
//!    projected onto the tangent space, `α` chosen so that `⟨u, W d⟩ = 0`.
//! 3. `u ← √(c/mass) · (u − τd)` with Armijo backtracking on `J` and a
//!    barrier safeguard keeping `‖Δu‖₂²` below `ρ₀`.
//!
//! `P` is factored in the diagonally scaled variables `W^{1/2}u`. Without
//! that scaling the origin weights (`~h^N`) make the system hopelessly
//! ill-conditioned.
//!
//! The seed follows the small-dilation construction: a Gaussian with the
//! target mass is compressed along its fiber until `J < 0` and the bending
//! energy is below `ρ₀`. Ground states for small `μ` are very wide, so unless
//! a radius is configured, the domain is sized from the seed's Lagrange
//! multiplier. Biharmonic profiles decay like `exp(−|λ|^{1/4} r/√2)`.

mod constants;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::banded::{BandedCholesky, SymBanded};
use crate::error::{Error, Result};
use crate::fiber::psi;
use crate::functionals::{
    bundle_from_parts, energy, euclidean_gradient, lagrange_multiplier, pohozaev, NormBundle,
};
use crate::grid::{build_grid, RadialField, RadialGrid};
use crate::landscape::{exponents_unchecked, mass_threshold, LandscapeParams, MassThreshold};

pub use constants::{
    estimate_constants, estimate_gn_constant, estimate_sobolev_constant, gaussian_gn_quotient,
    gn_quotient, sobolev_profile, sobolev_quotient, EstimateConfig, EstimatedConstants, GnEstimate,
    SobolevConfig, SobolevEstimate,
};

/// Iteration controls for [`minimize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// First trial step.
    pub step0: f64,
    /// Backtracking factor, in `(0, 1)`.
    pub shrink: f64,
    /// Step growth after an accepted step, `> 1`.
    pub grow: f64,
    /// Upper bound on the step; with the `K + |λ|W` metric a unit step is
    /// the natural Newton-like scale.
    pub max_step: f64,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
    /// Stop when the tangential L² gradient, relative to the full gradient,
    /// falls below this.
    pub grad_tol: f64,
    /// Stop only once `|Q(u)| / ‖Δu‖₂²` is below this as well.
    pub q_tol: f64,
    pub max_iter: usize,
    /// Width of the Gaussian seed before the fiber compression.
    pub seed_width: f64,
    /// Grid nodes.
    pub n: usize,
    /// Domain radius; `None` sizes the domain from the seed.
    pub r_max: Option<f64>,
    /// Seed amplitude decay (in e-folds) required at `r_max` when sizing
    /// automatically.
    pub tail_efolds: f64,
    /// Lower bound of the automatic radius, in seed widths.
    pub width_multiple: f64,
    /// Relative interior margin of the bending barrier.
    pub safeguard_margin: f64,
    /// Largest fraction of iterations allowed to hit the barrier.
    pub safeguard_max_fraction: f64,
    /// Preconditioner refresh period.
    pub refactor_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            step0: 1.0,
            shrink: 0.5,
            grow: 2.0,
            max_step: 1.0,
            armijo: 1e-4,
            grad_tol: 1e-6,
            q_tol: 5e-7,
            max_iter: 5000,
            seed_width: 1.0,
            n: 2049,
            r_max: None,
            tail_efolds: 18.5,
            width_multiple: 12.0,
            safeguard_margin: 1e-3,
            safeguard_max_fraction: 0.5,
            refactor_every: 20,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("step0", self.step0),
            ("max_step", self.max_step),
            ("armijo", self.armijo),
            ("grad_tol", self.grad_tol),
            ("q_tol", self.q_tol),
            ("seed_width", self.seed_width),
            ("tail_efolds", self.tail_efolds),
            ("width_multiple", self.width_multiple),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "solver.{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "solver.shrink must lie in (0, 1), got {}",
                self.shrink
            )));
        }
        if !(self.grow > 1.0 && self.grow.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "solver.grow must exceed 1, got {}",
                self.grow
            )));
        }
        if self.armijo >= 1.0 {
            return Err(Error::InvalidArgument(
                "solver.armijo must be below 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.safeguard_margin) {
            return Err(Error::InvalidArgument(
                "solver.safeguard_margin must lie in [0, 1)".into(),
            ));
        }
        if !(self.safeguard_max_fraction > 0.0 && self.safeguard_max_fraction <= 1.0) {
            return Err(Error::InvalidArgument(
                "solver.safeguard_max_fraction must lie in (0, 1]".into(),
            ));
        }
        if self.max_iter == 0 || self.refactor_every == 0 {
            return Err(Error::InvalidArgument(
                "solver.max_iter and solver.refactor_every must be positive".into(),
            ));
        }
        if let Some(r) = self.r_max {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "solver.r_max must be positive, got {r}"
                )));
            }
        }
        Ok(())
    }
}

/// One accepted descent step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub energy: f64,
    pub step: f64,
    /// Accepted at the round-off floor rather than by the Armijo test.
    pub roundoff: bool,
}

/// A converged constrained minimizer.
#[derive(Debug, Clone, Serialize)]
pub struct GroundState {
    #[serde(skip)]
    pub field: RadialField,
    pub c: f64,
    pub m: f64,
    pub lambda: f64,
    pub q_residual: f64,
    pub bend: f64,
    pub subcrit: f64,
    pub crit: f64,
    pub grad_norm: f64,
    pub iters: usize,
    pub constraint_active: bool,
    pub safeguard_hits: usize,
    pub roundoff_steps: usize,
    pub rho0: f64,
    pub c0: f64,
    pub n: usize,
    pub r_max: f64,
    #[serde(skip)]
    pub trace: Vec<IterationRecord>,
}

impl GroundState {
    pub fn bundle(&self) -> NormBundle {
        NormBundle::new(self.c, self.bend, self.subcrit, self.crit)
    }
}

/// Outcome of the analytic fiber compression of the Gaussian seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeedScale {
    /// Fiber scale applied to the unit Gaussian.
    pub s: f64,
    pub halvings: usize,
    /// Width of the compressed Gaussian, `width/√s`.
    pub width: f64,
    /// Lagrange multiplier of the compressed Gaussian.
    pub lambda: f64,
    pub energy: f64,
    pub bend: f64,
}

const MAX_HALVINGS: usize = 60;

/// Exact bundle of `a·exp(−r²/(2w²))` in ℝ^N.
pub fn gaussian_bundle(params: &LandscapeParams, amplitude: f64, width: f64) -> NormBundle {
    let n = params.dim as f64;
    let pi = std::f64::consts::PI;
    let p = params.p_crit();
    let a = amplitude.abs();
    let w2 = width * width;
    NormBundle {
        mass: a * a * (pi * w2).powf(n / 2.0),
        bend: a * a * n * (n + 2.0) / 4.0 * pi.powf(n / 2.0) * width.powf(n - 4.0),
        subcrit: a.powf(params.q) * (2.0 * pi * w2 / params.q).powf(n / 2.0),
        crit: a.powf(p) * (2.0 * pi * w2 / p).powf(n / 2.0),
    }
}

fn check_mass(c: f64, threshold: &MassThreshold) -> Result<()> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "mass must be positive, got {c}"
        )));
    }
    if c >= threshold.c0 {
        return Err(Error::MassAboveThreshold {
            c,
            c0: threshold.c0,
        });
    }
    Ok(())
}

fn seed_accepts(params: &LandscapeParams, bundle: &NormBundle, bend_cap: f64) -> bool {
    energy(params, bundle) < 0.0 && bundle.bend < bend_cap
}

/// Compresses the mass-`c` Gaussian of the given width along its fiber,
/// halving `s` until `J < 0` and `‖Δu‖₂² < ρ₀(1 − margin)`.
pub fn seed_scale(
    params: &LandscapeParams,
    threshold: &MassThreshold,
    c: f64,
    width: f64,
    margin: f64,
) -> Result<SeedScale> {
    check_mass(c, threshold)?;
    let unit = gaussian_bundle(params, 1.0, width);
    let amp = (c / unit.mass).sqrt();
    let base = gaussian_bundle(params, amp, width);
    let e = exponents_unchecked(params.dim, params.q);
    let cap = threshold.rho0 * (1.0 - margin);
    let mut s = 1.0f64;
    for halvings in 0..=MAX_HALVINGS {
        let b = NormBundle::new(
            c,
            s * s * base.bend,
            s.powf(e.gamma_q) * base.subcrit,
            s.powf(e.p_crit) * base.crit,
        );
        if seed_accepts(params, &b, cap) {
            return Ok(SeedScale {
                s,
                halvings,
                width: width / s.sqrt(),
                lambda: lagrange_multiplier(params, &b)?,
                energy: psi(params, &base, s)?,
                bend: b.bend,
            });
        }
        s *= 0.5;
    }
    Err(Error::InvalidArgument(format!(
        "fiber compression of the seed did not reach J < 0 with bend < ρ₀ in {MAX_HALVINGS} halvings"
    )))
}

/// Radius at which a profile with the seed's multiplier has decayed by
/// `tail_efolds` e-folds, but at least `width_multiple` seed widths.
pub fn auto_radius(seed: &SeedScale, config: &SolverConfig) -> f64 {
    let by_width = config.width_multiple * seed.width;
    if seed.lambda < 0.0 {
        let rate = (-seed.lambda).powf(0.25) / std::f64::consts::SQRT_2;
        by_width.max(config.tail_efolds / rate)
    } else {
        by_width
    }
}

/// Samples the compressed Gaussian seed on `grid` and normalizes it to mass
/// `c`; keeps halving `s` if the sampled field misses either condition.
pub fn seed(
    params: &LandscapeParams,
    threshold: &MassThreshold,
    c: f64,
    grid: &Arc<RadialGrid>,
    config: &SolverConfig,
) -> Result<(RadialField, SeedScale)> {
    let mut info = seed_scale(
        params,
        threshold,
        c,
        config.seed_width,
        config.safeguard_margin,
    )?;
    let cap = threshold.rho0 * (1.0 - config.safeguard_margin);
    while info.halvings <= MAX_HALVINGS {
        let w = info.width;
        let field = RadialField::from_fn(grid.clone(), |r| (-(r * r) / (2.0 * w * w)).exp())?;
        let mass = field.mass();
        if mass > 0.0 {
            let field = field.scaled((c / mass).sqrt());
            let b = field_bundle(params, &field);
            if seed_accepts(params, &b, cap) {
                info.lambda = lagrange_multiplier(params, &b)?;
                info.energy = energy(params, &b);
                info.bend = b.bend;
                return Ok((field, info));
            }
        }
        info.s *= 0.5;
        info.halvings += 1;
        info.width = config.seed_width / info.s.sqrt();
    }
    Err(Error::InvalidArgument(format!(
        "seed on the grid (R = {}) did not reach J < 0 with bend < ρ₀ in {MAX_HALVINGS} halvings",
        grid.r_max()
    )))
}

fn field_bundle(params: &LandscapeParams, field: &RadialField) -> NormBundle {
    let grid = field.grid();
    let lap = grid.apply_laplacian(field.values());
    bundle_from_parts(grid, params.q, params.p_crit(), field.values(), &lap)
}

/// `K = LᵀWL` on the free nodes in the scaled variables `W^{1/2}u`, i.e.
/// `D K D` with `D = W^{-1/2}`; row `j − 1` corresponds to node `j`.
pub(crate) fn scaled_stiffness(grid: &RadialGrid) -> SymBanded {
    let n = grid.len();
    let w = grid.weights();
    let mut k = SymBanded::zeros(n - 1, 4);
    for (i, row) in grid.rows().iter().enumerate() {
        if w[i] == 0.0 {
            continue;
        }
        for a in 0..row.len {
            let ja = row.start + a;
            for b in 0..=a {
                let jb = row.start + b;
                let v = w[i] * row.coefs[a] * row.coefs[b] / (w[ja] * w[jb]).sqrt();
                k.add(ja - 1, jb - 1, v);
            }
        }
    }
    k
}

/// `(αK + βW)⁻¹` applied through the scaled factorization.
pub(crate) struct Preconditioner {
    factor: BandedCholesky,
    inv_sqrt_w: Vec<f64>,
}

impl Preconditioner {
    pub(crate) fn new(
        scaled_k: &SymBanded,
        grid: &RadialGrid,
        alpha: f64,
        beta: f64,
    ) -> Result<Self> {
        let mut p = scaled_k.clone();
        p.scale(alpha);
        for j in 0..p.len() {
            p.add(j, j, beta);
        }
        Ok(Self {
            factor: p.cholesky()?,
            inv_sqrt_w: grid.weights()[1..].iter().map(|w| 1.0 / w.sqrt()).collect(),
        })
    }

    /// Applies the inverse to a full-length vector; entry 0 is ignored and
    /// returned as zero.
    pub(crate) fn apply(&self, b: &[f64]) -> Vec<f64> {
        let rhs: Vec<f64> = b[1..]
            .iter()
            .zip(&self.inv_sqrt_w)
            .map(|(v, d)| v * d)
            .collect();
        let y = self.factor.solve(&rhs);
        let mut out = Vec::with_capacity(b.len());
        out.push(0.0);
        out.extend(y.iter().zip(&self.inv_sqrt_w).map(|(v, d)| v * d));
        out
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn weighted_dot(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    w.iter()
        .zip(a.iter().zip(b))
        .map(|(w, (x, y))| w * x * y)
        .sum()
}

/// Solves the constrained problem at mass `c`, building the grid from `config`.
pub fn minimize(params: &LandscapeParams, c: f64, config: &SolverConfig) -> Result<GroundState> {
    config.validate()?;
    params.validate()?;
    let threshold = mass_threshold(params)?;
    let info = seed_scale(
        params,
        &threshold,
        c,
        config.seed_width,
        config.safeguard_margin,
    )?;
    let r_max = config.r_max.unwrap_or_else(|| auto_radius(&info, config));
    let grid = build_grid(params.dim, config.n, r_max)?;
    let (initial, _) = seed(params, &threshold, c, &grid, config)?;
    minimize_from(params, c, initial, config)
}

/// Runs the descent from a given initial field, which must have mass `c`
/// (within `1e-8`) and bending energy below the barrier.
pub fn minimize_from(
    params: &LandscapeParams,
    c: f64,
    initial: RadialField,
    config: &SolverConfig,
) -> Result<GroundState> {
    config.validate()?;
    let threshold = mass_threshold(params)?;
    check_mass(c, &threshold)?;
    let grid = initial.grid().clone();
    if grid.dim() != params.dim {
        return Err(Error::InvalidArgument(format!(
            "problem dimension {} does not match grid dimension {}",
            params.dim,
            grid.dim()
        )));
    }
    let mass = initial.mass();
    if (mass - c).abs() > 1e-8 * c {
        return Err(Error::MassDrift { mass, target: c });
    }
    let (mu, q, p) = (params.mu, params.q, params.p_crit());
    let w = grid.weights();
    let cap = threshold.rho0 * (1.0 - config.safeguard_margin);

    let mut x = initial.into_values();
    let bundle_of = |x: &[f64]| {
        let lap = grid.apply_laplacian(x);
        bundle_from_parts(&grid, q, p, x, &lap)
    };
    let mut b = bundle_of(&x);
    if b.bend >= cap {
        return Err(Error::InvalidArgument(format!(
            "initial bending energy {:e} is not below the barrier {cap:e}",
            b.bend
        )));
    }
    let stiffness = scaled_stiffness(&grid);
    let mut precond: Option<Preconditioner> = None;
    let mut tau = config.step0.min(config.max_step);
    let mut trace = Vec::new();
    let mut safeguard_hits = 0usize;
    let mut roundoff_steps = 0usize;

    for iter in 0..=config.max_iter {
        let e0 = energy(params, &b);
        let lambda = lagrange_multiplier(params, &b)?;
        let g = euclidean_gradient(&grid, mu, q, p, &x);
        // relative tangential L² gradient
        let gl: Vec<f64> = g
            .iter()
            .zip(w)
            .map(|(g, w)| if *w > 0.0 { g / w } else { 0.0 })
            .collect();
        let xx = weighted_dot(w, &x, &x);
        let coef = weighted_dot(w, &gl, &x) / xx;
        let full = weighted_dot(w, &gl, &gl);
        let tangential = (full - coef * coef * xx).max(0.0);
        let grad_norm = if full > 0.0 {
            (tangential / full).sqrt()
        } else {
            0.0
        };
        let q_residual = (pohozaev(params, &b) / b.bend).abs();
        if grad_norm < config.grad_tol && q_residual < config.q_tol {
            let mut values = x;
            grid.close_origin(&mut values);
            return Ok(GroundState {
                field: RadialField::new(grid.clone(), values)?,
                c,
                m: e0,
                lambda,
                q_residual,
                bend: b.bend,
                subcrit: b.subcrit,
                crit: b.crit,
                grad_norm,
                iters: iter,
                constraint_active: safeguard_hits > 0,
                safeguard_hits,
                roundoff_steps,
                rho0: threshold.rho0,
                c0: threshold.c0,
                n: grid.len(),
                r_max: grid.r_max(),
                trace,
            });
        }
        if iter == config.max_iter {
            return Err(Error::NotConverged {
                iters: iter,
                grad_norm,
                q_residual,
            });
        }
        if iter % config.refactor_every == 0 || precond.is_none() {
            let sigma = lambda.abs().max(1e-300);
            precond = Some(Preconditioner::new(&stiffness, &grid, 1.0, sigma)?);
        }
        let pc = precond.as_ref().expect("preconditioner is built above");
        let wx: Vec<f64> = x.iter().zip(w).map(|(x, w)| x * w).collect();
        let pg = pc.apply(&g);
        let pu = pc.apply(&wx);
        let alpha = dot(&wx, &pg) / dot(&wx, &pu);
        let d: Vec<f64> = pg.iter().zip(&pu).map(|(a, b)| a - alpha * b).collect();
        let slope = dot(&g, &d);
        if !(slope > 0.0) || !slope.is_finite() {
            return Err(Error::NotConverged {
                iters: iter,
                grad_norm,
                q_residual,
            });
        }
        let floor = 1e-14 * (0.5 * b.bend + mu * b.subcrit / q + b.crit / p);
        let mut hit_barrier = false;
        let (next, next_bundle, roundoff) = loop {
            let mut trial: Vec<f64> = x.iter().zip(&d).map(|(x, d)| x - tau * d).collect();
            let tm = weighted_dot(w, &trial, &trial);
            let scale = (c / tm).sqrt();
            trial.iter_mut().for_each(|v| *v *= scale);
            let tb = bundle_of(&trial);
            if tb.bend >= cap || !tb.bend.is_finite() {
                hit_barrier = true;
            } else {
                let e1 = energy(params, &tb);
                if e1 <= e0 - config.armijo * tau * slope {
                    break (trial, tb, false);
                }
                if tau * slope < floor {
                    break (trial, tb, true);
                }
            }
            tau *= config.shrink;
            if tau < 1e-300 {
                return Err(Error::NotConverged {
                    iters: iter,
                    grad_norm,
                    q_residual,
                });
            }
        };
        if hit_barrier {
            safeguard_hits += 1;
        }
        if roundoff {
            roundoff_steps += 1;
        }
        x = next;
        b = next_bundle;
        trace.push(IterationRecord {
            energy: energy(params, &b),
            step: tau,
            roundoff,
        });
        tau = (tau * config.grow).min(config.max_step);
        let done = iter + 1;
        if done >= 10 && safeguard_hits as f64 > config.safeguard_max_fraction * done as f64 {
            return Err(Error::SafeguardSaturated {
                fraction: safeguard_hits as f64 / done as f64,
            });
        }
    }
    unreachable!("the loop returns at iter == max_iter")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::norm_bundle;

    fn synthetic() -> LandscapeParams {
        LandscapeParams::new(5, 3.0, 1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn gaussian_bundle_matches_quadrature() {
        let p = synthetic();
        let g = build_grid(5, 4097, 24.0).unwrap();
        let (a, w) = (0.7, 1.6);
        let u = RadialField::from_fn(g, |r| a * (-(r * r) / (2.0 * w * w)).exp()).unwrap();
        let num = norm_bundle(&p, &u).unwrap();
        let exact = gaussian_bundle(&p, a, w);
        assert!((num.mass / exact.mass - 1.0).abs() < 1e-9);
        assert!((num.bend / exact.bend - 1.0).abs() < 1e-7);
        assert!((num.subcrit / exact.subcrit - 1.0).abs() < 1e-9);
        assert!((num.crit / exact.crit - 1.0).abs() < 1e-9);
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = SolverConfig {
            shrink: 1.5,
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SolverConfig {
            grad_tol: 0.0,
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn seed_rejects_large_mass() {
        let p = synthetic();
        let t = mass_threshold(&p).unwrap();
        assert!(matches!(
            seed_scale(&p, &t, t.c0, 1.0, 1e-3),
            Err(Error::MassAboveThreshold { .. })
        ));
        assert!(seed_scale(&p, &t, -1.0, 1.0, 1e-3).is_err());
    }

    #[test]
    fn seed_enters_the_well() {
        let p = synthetic();
        let t = mass_threshold(&p).unwrap();
        for &frac in &[0.1, 0.5, 0.9] {
            let c = frac * t.c0;
            let s = seed_scale(&p, &t, c, 1.0, 1e-3).unwrap();
            assert!(s.halvings <= 60);
            assert!(s.energy < 0.0 && s.bend < t.rho0);
            assert!(s.lambda < 0.0);
        }
    }

    #[test]
    fn stiffness_matches_operator() {
        let g = build_grid(5, 128, 6.0).unwrap();
        let k = scaled_stiffness(&g);
        let w = g.weights();
        let x: Vec<f64> = (0..128).map(|i| ((i as f64) * 0.3).cos()).collect();
        // xᵀKx with K = LᵀWL
        let lap = g.apply_laplacian(&x);
        let direct: f64 = lap.iter().zip(w).map(|(l, w)| w * l * l).sum();
        let y: Vec<f64> = x[1..]
            .iter()
            .zip(&w[1..])
            .map(|(x, w)| x * w.sqrt())
            .collect();
        let ky = k.mul(&y);
        let banded = dot(&y, &ky);
        assert!((direct - banded).abs() < 1e-10 * direct);
    }
}
