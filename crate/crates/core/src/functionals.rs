//! Norms, energy, Pohozaev functional and gradients.
//!
//! With `A = ‖Δu‖₂²`, `B = ‖u‖_q^q` and `C = ‖u‖_{4*}^{4*}`:
//!
//! ```text
//! J(u) = A/2 − (μ/q)·B − C/4*
//! Q(u) = A − μN(q−2)/(4q)·B − C
//! λ    = (A − μB − C)/‖u‖₂²
//! ```
//!
//! The discrete energy is `½ Σ wᵢ (L u)ᵢ² − Σ wᵢ F(uᵢ)` with `L` the grid
//! Laplacian, so its exact gradient with respect to the free nodes is
//! `Lᵀ W L u − W f(u)`. Dividing by the weights gives the L² gradient; away
//! from the boundary it approximates `Δ²u − μ|u|^{q−2}u − |u|^{4*−2}u`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{RadialField, RadialGrid};
use crate::landscape::LandscapeParams;

/// Mass and the three energy norms of a field.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NormBundle {
    /// `‖u‖₂²`
    pub mass: f64,
    /// `‖Δu‖₂²`
    pub bend: f64,
    /// `‖u‖_q^q`
    pub subcrit: f64,
    /// `‖u‖_{4*}^{4*}`
    pub crit: f64,
}

impl NormBundle {
    pub fn new(mass: f64, bend: f64, subcrit: f64, crit: f64) -> Self {
        Self {
            mass,
            bend,
            subcrit,
            crit,
        }
    }
}

/// `sign(u)·|u|^{p−1}`, the derivative of `|u|^p / p`.
#[inline]
pub(crate) fn signed_power(u: f64, p: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else {
        u.signum() * u.abs().powf(p - 1.0)
    }
}

fn check_dim(params: &LandscapeParams, grid: &RadialGrid) -> Result<()> {
    if params.dim != grid.dim() {
        return Err(Error::InvalidArgument(format!(
            "problem dimension {} does not match grid dimension {}",
            params.dim,
            grid.dim()
        )));
    }
    Ok(())
}

/// Bundle from raw free-node samples and their discrete Laplacian.
pub(crate) fn bundle_from_parts(
    grid: &RadialGrid,
    q: f64,
    p: f64,
    values: &[f64],
    lap: &[f64],
) -> NormBundle {
    let mut b = NormBundle::default();
    for ((w, &u), &d) in grid.weights().iter().zip(values).zip(lap).skip(1) {
        let a = u.abs();
        b.mass += w * u * u;
        b.bend += w * d * d;
        if a > 0.0 {
            b.subcrit += w * a.powf(q);
            b.crit += w * a.powf(p);
        }
    }
    b
}

pub fn norm_bundle(params: &LandscapeParams, field: &RadialField) -> Result<NormBundle> {
    check_dim(params, field.grid())?;
    let grid = field.grid();
    let lap = grid.apply_laplacian(field.values());
    Ok(bundle_from_parts(
        grid,
        params.q,
        params.p_crit(),
        field.values(),
        &lap,
    ))
}

/// `J = A/2 − (μ/q)B − C/4*`.
pub fn energy(params: &LandscapeParams, bundle: &NormBundle) -> f64 {
    0.5 * bundle.bend - params.mu / params.q * bundle.subcrit - bundle.crit / params.p_crit()
}

/// `Q = A − μN(q−2)/(4q)·B − C`.
pub fn pohozaev(params: &LandscapeParams, bundle: &NormBundle) -> f64 {
    bundle.bend - params.pohozaev_coefficient() * bundle.subcrit - bundle.crit
}

/// `λ = (A − μB − C)/mass`.
pub fn lagrange_multiplier(params: &LandscapeParams, bundle: &NormBundle) -> Result<f64> {
    if !(bundle.mass > 0.0) {
        return Err(Error::DegenerateBundle(
            "the Lagrange multiplier needs positive mass".into(),
        ));
    }
    Ok((bundle.bend - params.mu * bundle.subcrit - bundle.crit) / bundle.mass)
}

/// Euclidean gradient of the discrete energy with respect to `values[1..]`;
/// entry 0 is zero.
pub(crate) fn euclidean_gradient(
    grid: &RadialGrid,
    mu: f64,
    q: f64,
    p: f64,
    values: &[f64],
) -> Vec<f64> {
    let lap = grid.apply_laplacian(values);
    let weighted: Vec<f64> = lap.iter().zip(grid.weights()).map(|(d, w)| d * w).collect();
    let mut g = grid.apply_laplacian_transpose(&weighted);
    for ((gj, &u), w) in g.iter_mut().zip(values).zip(grid.weights()).skip(1) {
        *gj -= w * (mu * signed_power(u, q) + signed_power(u, p));
    }
    g[0] = 0.0;
    g
}

/// L² gradient of `J`, `Δ²u − μ|u|^{q−2}u − |u|^{4*−2}u` in its discrete
/// adjoint form.
pub fn l2_gradient(params: &LandscapeParams, field: &RadialField) -> Result<RadialField> {
    check_dim(params, field.grid())?;
    let grid = field.grid();
    let mut g = euclidean_gradient(grid, params.mu, params.q, params.p_crit(), field.values());
    for (gj, w) in g.iter_mut().zip(grid.weights()).skip(1) {
        *gj /= w;
    }
    RadialField::new(grid.clone(), g)
}

/// Tangential part `g − (⟨g,u⟩/⟨u,u⟩)·u` of the L² gradient on the sphere of
/// mass `c`. The field's mass must be within `1e-8` (relative) of `c`.
pub fn projected_gradient(
    params: &LandscapeParams,
    field: &RadialField,
    c: f64,
) -> Result<RadialField> {
    let mass = field.mass();
    if !(c > 0.0) || (mass - c).abs() > 1e-8 * c {
        return Err(Error::MassDrift { mass, target: c });
    }
    let g = l2_gradient(params, field)?;
    let coef = g.inner(field)? / mass;
    g.axpy(-coef, field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use std::f64::consts::PI;

    fn synthetic() -> LandscapeParams {
        LandscapeParams::new(5, 3.0, 1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn closed_forms() {
        let p = synthetic();
        let b = NormBundle::new(1.0, 1.0, 1.0, 1.0);
        assert!((energy(&p, &b) - 1.0 / 15.0).abs() < 1e-15);
        assert!((pohozaev(&p, &b) + 5.0 / 12.0).abs() < 1e-15);
        assert!((lagrange_multiplier(&p, &b).unwrap() + 1.0).abs() < 1e-15);
        let z = NormBundle::default();
        assert_eq!(energy(&p, &z), 0.0);
        assert_eq!(pohozaev(&p, &z), 0.0);
        assert!(lagrange_multiplier(&p, &z).is_err());
        let linear = NormBundle::new(2.0, 3.0, 0.0, 0.0);
        assert_eq!(lagrange_multiplier(&p, &linear).unwrap(), 1.5);
    }

    #[test]
    fn gaussian_bundle() {
        let p = synthetic();
        let g = build_grid(5, 4097, 12.0).unwrap();
        let u = RadialField::from_fn(g.clone(), |r| (-0.5 * r * r).exp()).unwrap();
        let b = norm_bundle(&p, &u).unwrap();
        let s = PI.powf(2.5);
        assert!((b.mass / s - 1.0).abs() < 1e-8);
        assert!((b.bend / (8.75 * s) - 1.0).abs() < 1e-6);
        assert!((b.subcrit / (2.0 * PI / 3.0).powf(2.5) - 1.0).abs() < 1e-8);
        assert!((b.crit / (PI / 5.0).powf(2.5) - 1.0).abs() < 1e-8);
        let zero = norm_bundle(&p, &RadialField::zeros(g)).unwrap();
        assert_eq!(zero, NormBundle::default());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let g = build_grid(6, 64, 5.0).unwrap();
        let u = RadialField::zeros(g);
        assert!(norm_bundle(&synthetic(), &u).is_err());
    }

    #[test]
    fn linear_gradient_is_bilaplacian() {
        let p = LandscapeParams::new(5, 3.0, 1e-300, 1.0, 1.0).unwrap();
        let g = build_grid(5, 2049, 12.0).unwrap();
        // amplitude small enough that the nonlinear terms are negligible
        let amp = 1e-12;
        let u = RadialField::from_fn(g.clone(), |r| amp * (-0.5 * r * r).exp()).unwrap();
        let grad = l2_gradient(&p, &u).unwrap();
        // Δ²e^{−r²/2} in ℝ⁵ = (r⁴ − 14r² + 35) e^{−r²/2}
        for (&r, &v) in g.nodes().iter().zip(grad.values()).skip(100).take(800) {
            let exact = amp * (r.powi(4) - 14.0 * r * r + 35.0) * (-0.5 * r * r).exp();
            assert!((v - exact).abs() < 1e-5 * amp, "r = {r}: {v} vs {exact}");
        }
    }

    #[test]
    fn projection_is_orthogonal() {
        let p = synthetic();
        let g = build_grid(5, 513, 10.0).unwrap();
        let u = RadialField::from_fn(g.clone(), |r| 0.3 * (-0.3 * r * r).exp() * (1.0 + 0.2 * r))
            .unwrap();
        let c = u.mass();
        let pg = projected_gradient(&p, &u, c).unwrap();
        let full = l2_gradient(&p, &u).unwrap();
        let scale = full.inner(&full).unwrap().sqrt() * c.sqrt();
        assert!(pg.inner(&u).unwrap().abs() < 1e-10 * scale);
        assert!(projected_gradient(&p, &u, 1.1 * c).is_err());
    }

    #[test]
    fn gradient_matches_central_differences() {
        let p = synthetic();
        let g = build_grid(5, 513, 10.0).unwrap();
        let u = RadialField::from_fn(g.clone(), |r| 0.4 * (-0.2 * r * r).exp()).unwrap();
        let v = RadialField::from_fn(g.clone(), |r| (1.0 - 0.1 * r * r) * (-0.1 * r * r).exp())
            .unwrap();
        let j = |f: &RadialField| energy(&p, &norm_bundle(&p, f).unwrap());
        let eps = 1e-5;
        let fd = (j(&u.axpy(eps, &v).unwrap()) - j(&u.axpy(-eps, &v).unwrap())) / (2.0 * eps);
        let an = l2_gradient(&p, &u).unwrap().inner(&v).unwrap();
        assert!(((fd - an) / an).abs() < 1e-6, "{fd} vs {an}");
    }
}
