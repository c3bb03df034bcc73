//! Fiber maps `ψ_u(s) = J(u_s)` along the mass-preserving dilation
//! `u_s(x) = s^{N/4} u(s^{1/2} x)`.
//!
//! The three norms scale exactly (`A ↦ s²A`, `B ↦ s^γ B`, `C ↦ s^{4*} C`
//! with `γ = N(q−2)/4`), so everything here is a scalar function of the
//! bundle:
//!
//! ```text
//! ψ(s)  = s²A/2 − (μ/q)s^γ B − s^{4*}C/4*
//! ψ′(s) = sA − κ s^{γ−1} B − s^{4*−1} C = Q(u_s)/s,   κ = μN(q−2)/(4q)
//! ξ(s)  = ψ′(s)/s = A − κ s^{γ−2} B − s^{4*−2} C
//! ```
//!
//! Since `γ − 2 < 0 < 4* − 2`, `ξ` rises from `−∞`, peaks once at `s*` and
//! falls back to `−∞`; `ψ′` therefore has at most two zeros.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::functionals::NormBundle;
use crate::landscape::{exponents_unchecked, LandscapeParams};
use crate::scalar::bisect;

const BISECT_ITERS: usize = 60;
const BISECT_TOL: f64 = 1e-10;
const TANGENCY_TOL: f64 = 1e-10;

fn require_s(s: f64) -> Result<()> {
    if s > 0.0 && s.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "fiber scale must be positive, got {s}"
        )))
    }
}

/// `(γ, 4*)`.
fn fiber_exponents(params: &LandscapeParams) -> (f64, f64) {
    let e = exponents_unchecked(params.dim, params.q);
    (e.gamma_q, e.p_crit)
}

pub fn psi(params: &LandscapeParams, bundle: &NormBundle, s: f64) -> Result<f64> {
    require_s(s)?;
    let (gamma, p) = fiber_exponents(params);
    Ok(0.5 * s * s * bundle.bend
        - params.mu / params.q * s.powf(gamma) * bundle.subcrit
        - s.powf(p) * bundle.crit / p)
}

pub fn psi_prime(params: &LandscapeParams, bundle: &NormBundle, s: f64) -> Result<f64> {
    require_s(s)?;
    Ok(s * xi_unchecked(params, bundle, s))
}

pub fn xi(params: &LandscapeParams, bundle: &NormBundle, s: f64) -> Result<f64> {
    require_s(s)?;
    Ok(xi_unchecked(params, bundle, s))
}

fn xi_unchecked(params: &LandscapeParams, bundle: &NormBundle, s: f64) -> f64 {
    let (gamma, p) = fiber_exponents(params);
    bundle.bend
        - params.pohozaev_coefficient() * s.powf(gamma - 2.0) * bundle.subcrit
        - s.powf(p - 2.0) * bundle.crit
}

/// Magnitude of the terms of `ξ(s)`, the scale for "equals zero" decisions.
fn xi_scale(params: &LandscapeParams, bundle: &NormBundle, s: f64) -> f64 {
    let (gamma, p) = fiber_exponents(params);
    bundle.bend
        + params.pohozaev_coefficient() * s.powf(gamma - 2.0) * bundle.subcrit
        + s.powf(p - 2.0) * bundle.crit
}

/// The unique maximizer of `ξ`, or `None` when `B = 0` or `C = 0` (then `ξ`
/// is monotone).
pub fn xi_turning_point(params: &LandscapeParams, bundle: &NormBundle) -> Option<f64> {
    if !(bundle.subcrit > 0.0 && bundle.crit > 0.0) {
        return None;
    }
    let e = exponents_unchecked(params.dim, params.q);
    let ratio =
        -e.alpha0 * params.pohozaev_coefficient() * bundle.subcrit / (e.alpha2 * bundle.crit);
    let s = (ratio.ln() / (2.0 * (e.alpha2 - e.alpha0))).exp();
    s.is_finite().then_some(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZeroKind {
    LocalMinimum,
    LocalMaximum,
    DegenerateTangency,
}

impl ZeroKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ZeroKind::LocalMinimum => "local-minimum",
            ZeroKind::LocalMaximum => "local-maximum",
            ZeroKind::DegenerateTangency => "degenerate-tangency",
        }
    }
}

/// Zero structure of `ψ′`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiberAnalysis {
    pub s_turn: f64,
    pub xi_at_turn: f64,
    pub s1: Option<f64>,
    pub s2: Option<f64>,
    pub kind1: Option<ZeroKind>,
    pub kind2: Option<ZeroKind>,
    pub psi_at_s1: Option<f64>,
    pub psi_at_s2: Option<f64>,
}

impl FiberAnalysis {
    pub fn zero_count(&self) -> usize {
        self.s1.iter().count() + self.s2.iter().count()
    }
}

/// Locates the zeros of `ψ′` by bracketed bisection on either side of `s*`.
pub fn analyze_fiber(params: &LandscapeParams, bundle: &NormBundle) -> Result<FiberAnalysis> {
    let s_turn = xi_turning_point(params, bundle).ok_or_else(|| {
        Error::DegenerateBundle(format!(
            "fiber analysis needs B > 0 and C > 0 (B = {:e}, C = {:e})",
            bundle.subcrit, bundle.crit
        ))
    })?;
    let f = |s: f64| xi_unchecked(params, bundle, s);
    let peak = f(s_turn);
    let mut out = FiberAnalysis {
        s_turn,
        xi_at_turn: peak,
        s1: None,
        s2: None,
        kind1: None,
        kind2: None,
        psi_at_s1: None,
        psi_at_s2: None,
    };
    if peak.abs() <= TANGENCY_TOL * xi_scale(params, bundle, s_turn) {
        let value = psi(params, bundle, s_turn)?;
        out.s1 = Some(s_turn);
        out.s2 = Some(s_turn);
        out.kind1 = Some(ZeroKind::DegenerateTangency);
        out.kind2 = Some(ZeroKind::DegenerateTangency);
        out.psi_at_s1 = Some(value);
        out.psi_at_s2 = Some(value);
        return Ok(out);
    }
    if peak < 0.0 {
        return Ok(out);
    }
    let mut lo = s_turn;
    while f(lo) > 0.0 {
        lo *= 0.5;
        if lo < f64::MIN_POSITIVE {
            return Err(Error::DegenerateBundle("no lower bracket for ψ′".into()));
        }
    }
    let mut hi = s_turn;
    while f(hi) > 0.0 {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::DegenerateBundle("no upper bracket for ψ′".into()));
        }
    }
    let s1 = bisect(f, lo, s_turn, BISECT_ITERS, BISECT_TOL)?;
    let s2 = bisect(f, s_turn, hi, BISECT_ITERS, BISECT_TOL)?;
    out.s1 = Some(s1);
    out.s2 = Some(s2);
    // ψ′ changes sign − → + at s1 and + → − at s2
    out.kind1 = Some(ZeroKind::LocalMinimum);
    out.kind2 = Some(ZeroKind::LocalMaximum);
    out.psi_at_s1 = Some(psi(params, bundle, s1)?);
    out.psi_at_s2 = Some(psi(params, bundle, s2)?);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FiberPoint {
    pub s: f64,
    pub psi: f64,
    pub psi_prime: f64,
    pub xi: f64,
}

/// `ψ`, `ψ′`, `ξ` on `points` log-spaced scales in `[s_min, s_max]`.
pub fn fiber_curve(
    params: &LandscapeParams,
    bundle: &NormBundle,
    s_min: f64,
    s_max: f64,
    points: usize,
) -> Result<Vec<FiberPoint>> {
    require_s(s_min)?;
    require_s(s_max)?;
    if s_max < s_min || points < 2 {
        return Err(Error::InvalidArgument(
            "fiber curve needs s_min <= s_max and at least two points".into(),
        ));
    }
    let (a, b) = (s_min.ln(), s_max.ln());
    (0..points)
        .map(|k| {
            let s = (a + (b - a) * k as f64 / (points - 1) as f64).exp();
            Ok(FiberPoint {
                s,
                psi: psi(params, bundle, s)?,
                psi_prime: psi_prime(params, bundle, s)?,
                xi: xi(params, bundle, s)?,
            })
        })
        .collect()
}

/// CSV with header `s,psi,psi_prime,xi`.
pub fn write_curve_csv<W: Write>(curve: &[FiberPoint], mut out: W) -> Result<()> {
    writeln!(out, "s,psi,psi_prime,xi")?;
    for p in curve {
        writeln!(out, "{:e},{:e},{:e},{:e}", p.s, p.psi, p.psi_prime, p.xi)?;
    }
    Ok(())
}

/// Number of strict sign changes in a sequence, ignoring exact zeros.
pub fn sign_changes(values: impl IntoIterator<Item = f64>) -> usize {
    let mut last = 0.0f64;
    let mut count = 0;
    for v in values {
        if v == 0.0 || v.is_nan() {
            continue;
        }
        if last != 0.0 && v.signum() != last.signum() {
            count += 1;
        }
        last = v;
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::pohozaev;

    fn synthetic() -> LandscapeParams {
        LandscapeParams::new(5, 3.0, 1.0, 1.0, 1.0).unwrap()
    }

    fn ones() -> NormBundle {
        NormBundle::new(1.0, 1.0, 1.0, 1.0)
    }

    #[test]
    fn closed_form_values() {
        let p = synthetic();
        let b = ones();
        assert!((psi(&p, &b, 1.0).unwrap() - 1.0 / 15.0).abs() < 1e-15);
        assert!((psi_prime(&p, &b, 1.0).unwrap() + 5.0 / 12.0).abs() < 1e-15);
        let expect = 2.0 - 2f64.powf(1.25) / 3.0 - 102.4;
        assert!((psi(&p, &b, 2.0).unwrap() - expect).abs() < 1e-12);
        assert!((psi(&p, &b, 2.0).unwrap() + 101.192805).abs() < 1e-6);
        assert!(psi(&p, &b, 0.0).is_err());
        assert!(psi(&p, &b, 1e-8).unwrap() < 0.0);
    }

    #[test]
    fn derivative_matches_central_difference() {
        let p = synthetic();
        let b = NormBundle::new(1.0, 2.0, 0.7, 0.3);
        for &s in &[0.1, 0.5, 1.0, 1.7] {
            let eps = 1e-6 * s;
            let fd = (psi(&p, &b, s + eps).unwrap() - psi(&p, &b, s - eps).unwrap()) / (2.0 * eps);
            let an = psi_prime(&p, &b, s).unwrap();
            assert!(((fd - an) / an).abs() < 1e-8, "s = {s}");
        }
    }

    #[test]
    fn pohozaev_is_derivative_at_one() {
        let p = synthetic();
        let b = NormBundle::new(1.0, 3.0, 0.2, 1.5);
        assert!((pohozaev(&p, &b) - psi_prime(&p, &b, 1.0).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn subcritical_only_root() {
        let p = synthetic();
        let b = NormBundle::new(1.0, 1.0, 1.0, 0.0);
        assert!(xi_turning_point(&p, &b).is_none());
        assert!(analyze_fiber(&p, &b).is_err());
        let expect = (5f64 / 12.0).powf(4.0 / 3.0);
        let root = bisect(|s| psi_prime(&p, &b, s).unwrap(), 1e-3, 10.0, 200, 1e-14).unwrap();
        assert!((root / expect - 1.0).abs() < 1e-10);
    }

    #[test]
    fn turning_point_of_unit_bundle() {
        let p = synthetic();
        let s = xi_turning_point(&p, &ones()).unwrap();
        assert!((s - (5f64 / 128.0).powf(1.0 / 8.75)).abs() < 1e-14);
        let shifted = NormBundle::new(1.0, 7.0, 1.0, 1.0);
        assert_eq!(xi_turning_point(&p, &shifted), Some(s));
    }

    #[test]
    fn two_zeros_for_unit_bundle() {
        let p = synthetic();
        let a = analyze_fiber(&p, &ones()).unwrap();
        assert!((a.xi_at_turn - 0.398254).abs() < 1e-6);
        let (s1, s2) = (a.s1.unwrap(), a.s2.unwrap());
        assert!(s1 < a.s_turn && a.s_turn < s2);
        assert!(psi_prime(&p, &ones(), s1).unwrap().abs() < 1e-9);
        assert!(psi_prime(&p, &ones(), s2).unwrap().abs() < 1e-8);
        assert!(a.psi_at_s1.unwrap() < 0.0);
        assert_eq!(a.kind1, Some(ZeroKind::LocalMinimum));
        assert_eq!(a.kind2, Some(ZeroKind::LocalMaximum));
        let at = |s: f64| psi(&p, &ones(), s).unwrap();
        assert!(at(s1) < at(s1 * (1.0 + 1e-3)) && at(s1) < at(s1 * (1.0 - 1e-3)));
    }

    #[test]
    fn no_zeros_when_peak_negative() {
        let p = synthetic();
        // ξ(s*) = 0.1 − 0.6017 < 0
        let b = NormBundle::new(1.0, 0.1, 1.0, 1.0);
        let a = analyze_fiber(&p, &b).unwrap();
        assert!(a.xi_at_turn < 0.0);
        assert_eq!(a.zero_count(), 0);
    }

    #[test]
    fn tangency_is_reported() {
        let p = synthetic();
        let b0 = NormBundle::new(1.0, 0.0, 1.0, 1.0);
        let s = xi_turning_point(&p, &b0).unwrap();
        // choose A so that ξ(s*) = 0 exactly
        let a = -xi_unchecked(&p, &b0, s);
        let b = NormBundle::new(1.0, a, 1.0, 1.0);
        let r = analyze_fiber(&p, &b).unwrap();
        assert_eq!(r.kind1, Some(ZeroKind::DegenerateTangency));
        assert_eq!(r.s1, r.s2);
    }

    #[test]
    fn curve_and_sign_changes() {
        let p = synthetic();
        let c = fiber_curve(&p, &ones(), 1e-3, 10.0, 400).unwrap();
        assert_eq!(sign_changes(c.iter().map(|x| x.psi_prime)), 2);
        let mut buf = Vec::new();
        write_curve_csv(&c, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("s,psi,psi_prime,xi\n"));
        assert_eq!(text.lines().count(), 401);
        assert_eq!(sign_changes([1.0, 0.0, -1.0, -2.0, 3.0]), 2);
    }
}
