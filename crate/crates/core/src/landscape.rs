//! Closed-form energy landscape.
//!
//! Combining the Gagliardo–Nirenberg bound for the subcritical term with the
//! Sobolev bound for the critical term gives `J(u) >= A * f(c, A)` for every
//! `u` of mass `c` and bending energy `A = ‖Δu‖₂²`, where
//!
//! ```text
//! f(c, ρ) = 1/2 − (μ/q)·C_gn^q·ρ^α₀·c^α₁ − (S^{4*}/4*)·ρ^α₂
//! ```
//!
//! Everything here is an explicit formula in the problem data. Products of
//! powers are evaluated in log space so extreme masses neither overflow nor
//! underflow.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Problem data plus the two inequality constants that close the landscape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandscapeParams {
    /// Spatial dimension `N`.
    pub dim: usize,
    /// Subcritical exponent, `2 < q < 2 + 8/N`.
    pub q: f64,
    /// Coefficient of the subcritical term.
    pub mu: f64,
    /// Gagliardo–Nirenberg constant `C_{N,q}`.
    pub c_gn: f64,
    /// Sobolev constant for `‖u‖_{4*} <= S ‖Δu‖₂`.
    pub s_sob: f64,
}

impl LandscapeParams {
    pub fn new(dim: usize, q: f64, mu: f64, c_gn: f64, s_sob: f64) -> Result<Self> {
        let params = Self {
            dim,
            q,
            mu,
            c_gn,
            s_sob,
        };
        params.validate()?;
        Ok(params)
    }

    /// Same problem with different inequality constants.
    pub fn with_constants(&self, c_gn: f64, s_sob: f64) -> Result<Self> {
        Self::new(self.dim, self.q, self.mu, c_gn, s_sob)
    }

    pub fn validate(&self) -> Result<()> {
        validate_problem(self.dim, self.q, self.mu)?;
        if !(self.c_gn > 0.0 && self.c_gn.is_finite()) {
            return Err(Error::ParameterOutOfRange(format!(
                "C_gn must be positive, got {}",
                self.c_gn
            )));
        }
        if !(self.s_sob > 0.0 && self.s_sob.is_finite()) {
            return Err(Error::ParameterOutOfRange(format!(
                "S_sob must be positive, got {}",
                self.s_sob
            )));
        }
        Ok(())
    }

    /// `4* = 2N/(N − 4)`.
    pub fn p_crit(&self) -> f64 {
        critical_exponent(self.dim)
    }

    /// Coefficient `μN(q − 2)/(4q)` of the subcritical term in the Pohozaev functional.
    pub fn pohozaev_coefficient(&self) -> f64 {
        let n = self.dim as f64;
        self.mu * n * (self.q - 2.0) / (4.0 * self.q)
    }
}

/// Checks `N >= 5`, `2 < q < 2 + 8/N` and `μ > 0`.
pub fn validate_problem(dim: usize, q: f64, mu: f64) -> Result<()> {
    if dim < 5 {
        return Err(Error::ParameterOutOfRange(format!(
            "dimension must be at least 5, got {dim}"
        )));
    }
    let upper = 2.0 + 8.0 / dim as f64;
    if !(q > 2.0 && q < upper) {
        return Err(Error::ParameterOutOfRange(format!(
            "q must lie in (2, {upper}) for N = {dim}, got {q}"
        )));
    }
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::ParameterOutOfRange(format!(
            "mu must be positive, got {mu}"
        )));
    }
    Ok(())
}

pub fn critical_exponent(dim: usize) -> f64 {
    let n = dim as f64;
    2.0 * n / (n - 4.0)
}

/// Exponents appearing in the landscape and in the fiber maps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentSet {
    pub alpha0: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    /// Gagliardo–Nirenberg interpolation exponent for `r = q`.
    pub beta: f64,
    /// `4*`.
    pub p_crit: f64,
    /// Dilation exponent of `‖u_s‖_q^q`, i.e. `N(q − 2)/4`.
    pub gamma_q: f64,
}

pub fn derive_exponents(params: &LandscapeParams) -> Result<ExponentSet> {
    params.validate()?;
    Ok(exponents_unchecked(params.dim, params.q))
}

pub(crate) fn exponents_unchecked(dim: usize, q: f64) -> ExponentSet {
    let n = dim as f64;
    ExponentSet {
        alpha0: (q - 2.0) * n / 8.0 - 1.0,
        alpha1: (2.0 * n - q * (n - 4.0)) / 8.0,
        alpha2: 4.0 / (n - 4.0),
        beta: 0.5 * n * (0.5 - 1.0 / q),
        p_crit: 2.0 * n / (n - 4.0),
        gamma_q: n * (q - 2.0) / 4.0,
    }
}

fn require_positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{name} must be positive and finite, got {value}"
        )))
    }
}

/// The two negative terms of `f`, as `(subcritical, critical)`.
fn landscape_terms(params: &LandscapeParams, e: &ExponentSet, c: f64, rho: f64) -> (f64, f64) {
    let ln_rho = rho.ln();
    let sub = ((params.mu / params.q).ln()
        + params.q * params.c_gn.ln()
        + e.alpha0 * ln_rho
        + e.alpha1 * c.ln())
    .exp();
    let crit = (e.p_crit * params.s_sob.ln() - e.p_crit.ln() + e.alpha2 * ln_rho).exp();
    (sub, crit)
}

/// `f(c, ρ)`.
pub fn f_landscape(params: &LandscapeParams, c: f64, rho: f64) -> Result<f64> {
    let e = derive_exponents(params)?;
    require_positive("c", c)?;
    require_positive("rho", rho)?;
    let (sub, crit) = landscape_terms(params, &e, c, rho);
    Ok(0.5 - sub - crit)
}

/// `ln K` with `K = (−α₀/α₂)·μ·C_gn^q·4*/(q·S^{4*})`, the base of `ρ_c`.
fn ln_rho_base(params: &LandscapeParams, e: &ExponentSet) -> f64 {
    (-e.alpha0 / e.alpha2).ln() + params.mu.ln() + params.q * params.c_gn.ln() + e.p_crit.ln()
        - params.q.ln()
        - e.p_crit * params.s_sob.ln()
}

/// Unique maximizer `ρ_c` of `ρ ↦ f(c, ρ)`.
pub fn rho_star(params: &LandscapeParams, c: f64) -> Result<f64> {
    let e = derive_exponents(params)?;
    require_positive("c", c)?;
    let span = e.alpha2 - e.alpha0;
    Ok(((ln_rho_base(params, &e) + e.alpha1 * c.ln()) / span).exp())
}

/// The constant `M` with `max_ρ f(c, ρ) = 1/2 − M c^{4/N}`.
pub fn landscape_constant(params: &LandscapeParams) -> Result<f64> {
    let e = derive_exponents(params)?;
    let span = e.alpha2 - e.alpha0;
    let ln_k = ln_rho_base(params, &e);
    let sub =
        ((params.mu / params.q).ln() + params.q * params.c_gn.ln() + e.alpha0 / span * ln_k).exp();
    let crit = (e.p_crit * params.s_sob.ln() - e.p_crit.ln() + e.alpha2 / span * ln_k).exp();
    Ok(sub + crit)
}

/// `max_ρ f(c, ρ) = h_c(ρ_c) = 1/2 − M c^{4/N}`.
pub fn landscape_max(params: &LandscapeParams, c: f64) -> Result<f64> {
    require_positive("c", c)?;
    let m = landscape_constant(params)?;
    let n = params.dim as f64;
    Ok(0.5 - (m.ln() + 4.0 / n * c.ln()).exp())
}

/// `M`, the mass threshold `c₀` where the landscape maximum touches zero, and
/// the barrier radius `ρ₀ = ρ_{c₀}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MassThreshold {
    #[serde(rename = "M")]
    pub m_const: f64,
    pub c0: f64,
    pub rho0: f64,
}

pub fn mass_threshold(params: &LandscapeParams) -> Result<MassThreshold> {
    let m_const = landscape_constant(params)?;
    let n = params.dim as f64;
    let c0 = (-(n / 4.0) * (2.0 * m_const).ln()).exp();
    let rho0 = rho_star(params, c0)?;
    Ok(MassThreshold { m_const, c0, rho0 })
}

/// Tests whether `f(c2, ρ) >= f(c1, ρ1)` on `samples` points of
/// `[(c2/c1)·ρ1, ρ1]`.
///
/// The comparison allows round-off of `1e-12` relative to the largest term so
/// that the degenerate case `c1 == c2` evaluates to `true`.
pub fn comparison_check(
    params: &LandscapeParams,
    c1: f64,
    rho1: f64,
    c2: f64,
    samples: usize,
) -> Result<bool> {
    let e = derive_exponents(params)?;
    require_positive("c1", c1)?;
    require_positive("rho1", rho1)?;
    require_positive("c2", c2)?;
    if c2 > c1 {
        return Err(Error::InvalidArgument(format!(
            "comparison needs c2 <= c1, got c2 = {c2}, c1 = {c1}"
        )));
    }
    let (sub1, crit1) = landscape_terms(params, &e, c1, rho1);
    let reference = 0.5 - sub1 - crit1;
    let lo = c2 / c1 * rho1;
    let count = samples.max(2);
    for k in 0..count {
        let t = k as f64 / (count - 1) as f64;
        let rho = if lo == rho1 {
            rho1
        } else {
            (lo.ln() + t * (rho1.ln() - lo.ln())).exp()
        };
        let (sub, crit) = landscape_terms(params, &e, c2, rho);
        let value = 0.5 - sub - crit;
        let scale = 0.5 + sub.max(sub1) + crit.max(crit1);
        if value < reference - 1e-12 * scale {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic() -> LandscapeParams {
        LandscapeParams::new(5, 3.0, 1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn exponents_n5_q3() {
        let e = derive_exponents(&synthetic()).unwrap();
        assert!((e.alpha0 + 0.375).abs() < 1e-15);
        assert!((e.alpha1 - 0.875).abs() < 1e-15);
        assert!((e.alpha2 - 4.0).abs() < 1e-15);
        assert!((e.p_crit - 10.0).abs() < 1e-15);
        assert!((e.gamma_q - 1.25).abs() < 1e-15);
        assert!((e.beta - 5.0 / 12.0).abs() < 1e-15);
        assert!((e.alpha0 + e.alpha1 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn exponents_n6_q2_5() {
        let p = LandscapeParams::new(6, 2.5, 1.0, 1.0, 1.0).unwrap();
        let e = derive_exponents(&p).unwrap();
        assert!((e.alpha2 - 2.0).abs() < 1e-15);
        assert!((e.alpha0 + 0.625).abs() < 1e-15);
        assert!((e.alpha1 - 0.875).abs() < 1e-15);
    }

    #[test]
    fn parameter_validation() {
        assert!(LandscapeParams::new(4, 3.0, 1.0, 1.0, 1.0).is_err());
        assert!(LandscapeParams::new(5, 3.6, 1.0, 1.0, 1.0).is_err());
        assert!(LandscapeParams::new(5, 3.7, 1.0, 1.0, 1.0).is_err());
        assert!(LandscapeParams::new(5, 2.0, 1.0, 1.0, 1.0).is_err());
        assert!(LandscapeParams::new(5, 3.0, 0.0, 1.0, 1.0).is_err());
        assert!(LandscapeParams::new(5, 3.0, 1.0, -1.0, 1.0).is_err());
        assert!(LandscapeParams::new(5, 3.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn f_at_unit_point() {
        let f = f_landscape(&synthetic(), 1.0, 1.0).unwrap();
        assert!((f - 1.0 / 15.0).abs() < 1e-15);
    }

    #[test]
    fn f_diverges_near_zero() {
        let p = synthetic();
        assert!(f_landscape(&p, 1.0, 1e-12).unwrap() < -1e3);
        assert!(f_landscape(&p, 1.0, 0.0).is_err());
        assert!(f_landscape(&p, -1.0, 1.0).is_err());
    }

    #[test]
    fn rho_star_closed_form() {
        let p = synthetic();
        let rho = rho_star(&p, 1.0).unwrap();
        assert!((rho - 0.3125f64.powf(1.0 / 4.375)).abs() < 1e-14);
        let ratio = rho_star(&p, 2.0).unwrap() / rho;
        assert!((ratio - 2f64.powf(0.2)).abs() < 1e-13);
    }

    #[test]
    fn max_value_matches_f_at_rho_star() {
        let p = synthetic();
        for &c in &[0.01, 0.3, 1.0, 7.5] {
            let rho = rho_star(&p, c).unwrap();
            let direct = f_landscape(&p, c, rho).unwrap();
            let closed = landscape_max(&p, c).unwrap();
            assert!((direct - closed).abs() < 1e-14, "c = {c}");
        }
    }

    #[test]
    fn threshold_values() {
        // Direct evaluation of the closed forms for the synthetic constants.
        let t = mass_threshold(&synthetic()).unwrap();
        assert!((t.m_const - 0.402_805_489_798_527).abs() < 1e-12);
        assert!((t.c0 - 1.310_217_148_542_877).abs() < 1e-11);
        assert!((t.rho0 - 0.809_106_711_570_221).abs() < 1e-11);
        assert!(f_landscape(&synthetic(), t.c0, t.rho0).unwrap().abs() < 1e-14);
    }

    #[test]
    fn below_threshold_is_positive_at_rho0() {
        let p = synthetic();
        let t = mass_threshold(&p).unwrap();
        for k in 1..100 {
            let c = t.c0 * k as f64 / 100.0;
            assert!(f_landscape(&p, c, t.rho0).unwrap() > 0.0);
        }
    }

    #[test]
    fn doubling_mu_lowers_threshold() {
        let p = synthetic();
        let q = LandscapeParams { mu: 2.0, ..p };
        let (a, b) = (mass_threshold(&p).unwrap(), mass_threshold(&q).unwrap());
        assert!(b.m_const > a.m_const);
        assert!(b.c0 < a.c0);
    }

    #[test]
    fn comparison_cases() {
        let p = synthetic();
        assert!(comparison_check(&p, 0.9, 0.7, 0.9, 10).unwrap());
        assert!(comparison_check(&p, 0.9, 0.7, 0.45, 1000).unwrap());
        assert!(comparison_check(&p, 0.9, 0.7, 1.2, 10).is_err());
    }

    #[test]
    fn extreme_masses_stay_finite() {
        let p = LandscapeParams::new(10, 2.1, 1.0, 3.0, 0.01).unwrap();
        for &c in &[1e-200, 1e-50, 1e50, 1e200] {
            let rho = rho_star(&p, c).unwrap();
            assert!(rho.is_finite() && rho > 0.0, "c = {c}");
            assert!(f_landscape(&p, c, rho).unwrap().is_finite());
        }
    }
}
