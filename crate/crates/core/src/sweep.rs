//! Mass sweeps of the ground-state energy and sampling of the barrier.
//!
//! A sweep solves at several masses and checks, from the arrays alone, that
//! `m(c)` is negative, strictly decreasing, subadditive on every triple
//! `c_i = c_j + c_k` of the grid, and sub-homogeneous, `m(θα) <= θ·m(α)` for
//! `θ >= 1`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{energy, norm_bundle, NormBundle};
use crate::grid::{build_grid, RadialField};
use crate::landscape::{f_landscape, mass_threshold, LandscapeParams};
use crate::minimizer::{minimize, GroundState, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    /// `c_i = i·Δ`, `Δ = c_max_frac·c₀/k`: every sum of two grid masses that
    /// stays below the largest one is itself on the grid.
    Multiples,
    /// Geometric spacing from `c_min_frac·c₀` to `c_max_frac·c₀`.
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub k: usize,
    pub c_min_frac: f64,
    pub c_max_frac: f64,
    pub spacing: Spacing,
    /// Worker threads for the independent solves.
    pub threads: usize,
    /// Required relative decrease between consecutive masses.
    pub monotone_tol: f64,
    pub subadditivity_tol: f64,
    pub homogeneity_tol: f64,
    /// Random barrier fields per mass.
    pub boundary_samples: usize,
    pub rng_seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            k: 8,
            c_min_frac: 0.05,
            c_max_frac: 0.9,
            spacing: Spacing::Multiples,
            threads: 1,
            monotone_tol: 1e-8,
            subadditivity_tol: 1e-6,
            homogeneity_tol: 1e-6,
            boundary_samples: 100,
            rng_seed: 1,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 4 {
            return Err(Error::InvalidArgument(format!(
                "sweep.k must be at least 4, got {}",
                self.k
            )));
        }
        if !(self.c_min_frac > 0.0 && self.c_min_frac < self.c_max_frac && self.c_max_frac < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "sweep needs 0 < c_min_frac < c_max_frac < 1, got {} and {}",
                self.c_min_frac, self.c_max_frac
            )));
        }
        if self.threads == 0 {
            return Err(Error::InvalidArgument(
                "sweep.threads must be positive".into(),
            ));
        }
        for (name, v) in [
            ("monotone_tol", self.monotone_tol),
            ("subadditivity_tol", self.subadditivity_tol),
            ("homogeneity_tol", self.homogeneity_tol),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "sweep.{name} must be nonnegative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// The masses of a sweep, ascending.
pub fn sweep_masses(c0: f64, config: &SweepConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let k = config.k;
    let masses: Vec<f64> = match config.spacing {
        Spacing::Multiples => {
            let step = config.c_max_frac * c0 / k as f64;
            if step < config.c_min_frac * c0 {
                return Err(Error::InvalidArgument(format!(
                    "with k = {k} the smallest mass {:.4}·c0 is below c_min_frac = {}",
                    step / c0,
                    config.c_min_frac
                )));
            }
            (1..=k).map(|i| i as f64 * step).collect()
        }
        Spacing::Log => {
            let (a, b) = ((config.c_min_frac * c0).ln(), (config.c_max_frac * c0).ln());
            (0..k)
                .map(|i| (a + (b - a) * i as f64 / (k - 1) as f64).exp())
                .collect()
        }
    };
    Ok(masses)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Triple {
    /// `c[i] = c[j] + c[k]`
    pub i: usize,
    pub j: usize,
    pub k: usize,
    /// `m[i] − m[j] − m[k]`
    pub excess: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Pair {
    /// `c[j] = θ·c[i]`, `θ >= 1`
    pub i: usize,
    pub j: usize,
    pub theta: f64,
    /// `m[j] − θ·m[i]`
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepFlags {
    pub all_negative: bool,
    pub nonnegative_indices: Vec<usize>,
    pub monotone_decreasing: bool,
    /// Indices `i` with `m[i+1]` not below `m[i]` by the required margin.
    pub monotonicity_violations: Vec<usize>,
    pub subadditivity_checked: usize,
    pub subadditivity_violations: Vec<Triple>,
    pub max_subadditivity_excess: Option<f64>,
    pub homogeneity_checked: usize,
    pub homogeneity_violations: Vec<Pair>,
    /// Over pairs with `θ > 1`.
    pub max_homogeneity_excess: Option<f64>,
}

impl SweepFlags {
    pub fn all_pass(&self) -> bool {
        self.all_negative
            && self.monotone_decreasing
            && self.subadditivity_violations.is_empty()
            && self.homogeneity_violations.is_empty()
    }
}

/// Flags computed from aligned `(c, m)` arrays with `c` ascending.
pub fn analyze_energies(c: &[f64], m: &[f64], config: &SweepConfig) -> Result<SweepFlags> {
    if c.len() != m.len() {
        return Err(Error::LengthMismatch {
            expected: c.len(),
            got: m.len(),
        });
    }
    if c.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "masses must be strictly ascending".into(),
        ));
    }
    let nonnegative_indices: Vec<usize> = (0..m.len()).filter(|&i| !(m[i] < 0.0)).collect();
    let monotonicity_violations: Vec<usize> = (0..m.len().saturating_sub(1))
        .filter(|&i| !(m[i + 1] < m[i] - config.monotone_tol * m[i].abs()))
        .collect();
    let same = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs());
    let mut triples = Vec::new();
    for i in 0..c.len() {
        for j in 0..i {
            for k in j..i {
                if same(c[i], c[j] + c[k]) {
                    triples.push(Triple {
                        i,
                        j,
                        k,
                        excess: m[i] - m[j] - m[k],
                    });
                }
            }
        }
    }
    let mut pairs = Vec::new();
    for i in 0..c.len() {
        for j in i..c.len() {
            let theta = c[j] / c[i];
            pairs.push(Pair {
                i,
                j,
                theta,
                excess: m[j] - theta * m[i],
            });
        }
    }
    let max_of = |v: &mut dyn Iterator<Item = f64>| {
        v.fold(None, |acc: Option<f64>, x| {
            Some(acc.map_or(x, |a| a.max(x)))
        })
    };
    Ok(SweepFlags {
        all_negative: nonnegative_indices.is_empty(),
        nonnegative_indices,
        monotone_decreasing: monotonicity_violations.is_empty(),
        monotonicity_violations,
        subadditivity_checked: triples.len(),
        max_subadditivity_excess: max_of(&mut triples.iter().map(|t| t.excess)),
        subadditivity_violations: triples
            .iter()
            .copied()
            .filter(|t| t.excess > config.subadditivity_tol)
            .collect(),
        homogeneity_checked: pairs.len(),
        max_homogeneity_excess: max_of(&mut pairs.iter().filter(|p| p.j != p.i).map(|p| p.excess)),
        homogeneity_violations: pairs
            .iter()
            .copied()
            .filter(|p| p.excess > config.homogeneity_tol)
            .collect(),
    })
}

/// Barrier sampling at one mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryReport {
    pub c: f64,
    pub samples: usize,
    /// Samples with `J > 0`.
    pub positive: usize,
    /// Samples with `J >= ρ₀·f(c, ρ₀)` up to round-off.
    pub bound_holds: usize,
    pub min_energy: f64,
    /// `ρ₀·f(c, ρ₀)`.
    pub analytic_bound: f64,
    /// Largest relative deviation of the normalized samples from `(c, ρ₀)`.
    pub max_constraint_error: f64,
}

impl BoundaryReport {
    pub fn all_positive(&self) -> bool {
        self.positive == self.samples
    }
}

/// Random sum of Gaussians `Σ a_k exp(−r²/(2w_k²))` carried analytically
/// through mass scaling and fiber dilation.
struct GaussianSum {
    amps: Vec<f64>,
    widths: Vec<f64>,
}

impl GaussianSum {
    fn random(rng: &mut ChaCha8Rng) -> Self {
        let terms = rng.random_range(1..=4);
        let mut amps = Vec::with_capacity(terms);
        let mut widths = Vec::with_capacity(terms);
        for t in 0..terms {
            let a: f64 = rng.random_range(-1.0..1.0);
            amps.push(if t == 0 { 1.0 } else { a });
            widths.push(rng.random_range(-1.0f64..1.0).exp());
        }
        Self { amps, widths }
    }

    fn scale(&mut self, t: f64) {
        self.amps.iter_mut().for_each(|a| *a *= t);
    }

    /// `u ↦ s^{N/4} u(s^{1/2} x)`.
    fn dilate(&mut self, dim: usize, s: f64) {
        let amp = s.powf(dim as f64 / 4.0);
        self.scale(amp);
        let shrink = s.sqrt();
        self.widths.iter_mut().for_each(|w| *w /= shrink);
    }

    fn bundle(&self, params: &LandscapeParams, n: usize) -> Result<NormBundle> {
        let widest = self.widths.iter().cloned().fold(0.0, f64::max);
        let grid = build_grid(params.dim, n, 12.0 * widest)?;
        let field = RadialField::from_fn(Arc::clone(&grid), |r| {
            self.amps
                .iter()
                .zip(&self.widths)
                .map(|(a, w)| a * (-(r * r) / (2.0 * w * w)).exp())
                .sum()
        })?;
        norm_bundle(params, &field)
    }
}

/// Draws `count` random fields, normalizes each to mass `c` and bending
/// energy `ρ₀`, and records the sign of `J`.
pub fn boundary_samples(
    params: &LandscapeParams,
    c: f64,
    count: usize,
    rng_seed: u64,
) -> Result<BoundaryReport> {
    let threshold = mass_threshold(params)?;
    if !(c > 0.0 && c < threshold.c0) {
        return Err(Error::MassAboveThreshold {
            c,
            c0: threshold.c0,
        });
    }
    let rho0 = threshold.rho0;
    let analytic_bound = rho0 * f_landscape(params, c, rho0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let n = 2049;
    let mut report = BoundaryReport {
        c,
        samples: count,
        positive: 0,
        bound_holds: 0,
        min_energy: f64::INFINITY,
        analytic_bound,
        max_constraint_error: 0.0,
    };
    for _ in 0..count {
        let mut u = GaussianSum::random(&mut rng);
        let mut b = u.bundle(params, n)?;
        // mass by amplitude, bend by fiber dilation; a few rounds absorb the
        // quadrature error of the dilated grids
        for _ in 0..4 {
            u.scale((c / b.mass).sqrt());
            b = u.bundle(params, n)?;
            u.dilate(params.dim, (rho0 / b.bend).sqrt());
            b = u.bundle(params, n)?;
        }
        let err = ((b.mass - c) / c).abs().max(((b.bend - rho0) / rho0).abs());
        report.max_constraint_error = report.max_constraint_error.max(err);
        let j = energy(params, &b);
        report.min_energy = report.min_energy.min(j);
        if j > 0.0 {
            report.positive += 1;
        }
        if j >= analytic_bound - 1e-9 * (0.5 * rho0) {
            report.bound_holds += 1;
        }
    }
    Ok(report)
}

/// One solved mass.
#[derive(Debug, Clone, Serialize)]
pub struct SweepEntry {
    pub c: f64,
    pub m: f64,
    pub lambda: f64,
    pub bend: f64,
    pub q_residual: f64,
    pub iters: usize,
    pub r_max: f64,
}

impl From<&GroundState> for SweepEntry {
    fn from(g: &GroundState) -> Self {
        Self {
            c: g.c,
            m: g.m,
            lambda: g.lambda,
            bend: g.bend,
            q_residual: g.q_residual,
            iters: g.iters,
            r_max: g.r_max,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub c0: f64,
    pub rho0: f64,
    pub c: Vec<f64>,
    pub m: Vec<f64>,
    pub lambda: Vec<f64>,
    pub bend: Vec<f64>,
    pub q_residual: Vec<f64>,
    pub iters: Vec<usize>,
    pub flags: Option<SweepFlags>,
    pub boundary: Vec<BoundaryReport>,
    pub boundary_positive_samples: usize,
    pub boundary_total_samples: usize,
    pub complete: bool,
    /// First failure, for partial reports.
    pub failure: Option<String>,
}

impl SweepReport {
    pub fn all_pass(&self) -> bool {
        self.complete
            && self.flags.as_ref().is_some_and(|f| f.all_pass())
            && self.boundary_positive_samples == self.boundary_total_samples
    }
}

/// Solves at every sweep mass (concurrently on `threads` workers), then
/// analyzes the energies and samples the barrier at each mass. A failed
/// solve yields the report of the masses below it together with the error.
pub fn run_sweep(
    params: &LandscapeParams,
    solver: &SolverConfig,
    config: &SweepConfig,
) -> std::result::Result<SweepReport, (Box<SweepReport>, Error)> {
    let empty = |failure: Option<String>| SweepReport {
        c0: f64::NAN,
        rho0: f64::NAN,
        c: vec![],
        m: vec![],
        lambda: vec![],
        bend: vec![],
        q_residual: vec![],
        iters: vec![],
        flags: None,
        boundary: vec![],
        boundary_positive_samples: 0,
        boundary_total_samples: 0,
        complete: false,
        failure,
    };
    let threshold =
        mass_threshold(params).map_err(|e| (Box::new(empty(Some(e.to_string()))), e))?;
    let masses = sweep_masses(threshold.c0, config)
        .map_err(|e| (Box::new(empty(Some(e.to_string()))), e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| {
            let err = Error::InvalidArgument(format!("thread pool: {e}"));
            (Box::new(empty(Some(err.to_string()))), err)
        })?;
    let results: Vec<Result<(SweepEntry, BoundaryReport)>> = pool.install(|| {
        masses
            .par_iter()
            .enumerate()
            .map(|(i, &c)| {
                let gs = minimize(params, c, solver)?;
                let seed = config.rng_seed.wrapping_add(i as u64);
                let boundary = boundary_samples(params, c, config.boundary_samples, seed)?;
                Ok((SweepEntry::from(&gs), boundary))
            })
            .collect()
    });
    let mut report = empty(None);
    report.c0 = threshold.c0;
    report.rho0 = threshold.rho0;
    for result in results {
        match result {
            Ok((entry, boundary)) => {
                report.c.push(entry.c);
                report.m.push(entry.m);
                report.lambda.push(entry.lambda);
                report.bend.push(entry.bend);
                report.q_residual.push(entry.q_residual);
                report.iters.push(entry.iters);
                report.boundary_positive_samples += boundary.positive;
                report.boundary_total_samples += boundary.samples;
                report.boundary.push(boundary);
            }
            Err(e) => {
                report.failure = Some(format!("mass {}: {e}", masses[report.c.len()]));
                if report.c.len() >= 2 {
                    report.flags = analyze_energies(&report.c, &report.m, config).ok();
                }
                return Err((Box::new(report), e));
            }
        }
    }
    report.flags = Some(
        analyze_energies(&report.c, &report.m, config)
            .map_err(|e| (Box::new(report.clone()), e))?,
    );
    report.complete = true;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multiples_spacing_is_grid_closed() {
        let cfg = SweepConfig::default();
        let c = sweep_masses(1.0, &cfg).unwrap();
        assert_eq!(c.len(), 8);
        assert!((c[0] - 0.1125).abs() < 1e-15);
        assert!((c[7] - 0.9).abs() < 1e-15);
        let flags =
            analyze_energies(&c, &c.iter().map(|x| -x * x).collect::<Vec<_>>(), &cfg).unwrap();
        // i = j + k with 1-based multiples: 16 triples among 1..8
        assert_eq!(flags.subadditivity_checked, 16);
        assert!(flags.all_pass());
    }

    #[test]
    fn log_spacing_bounds() {
        let cfg = SweepConfig {
            spacing: Spacing::Log,
            ..SweepConfig::default()
        };
        let c = sweep_masses(2.0, &cfg).unwrap();
        assert!((c[0] - 0.1).abs() < 1e-14 && (c[7] - 1.8).abs() < 1e-14);
        assert!(sweep_masses(
            1.0,
            &SweepConfig {
                k: 3,
                ..SweepConfig::default()
            }
        )
        .is_err());
    }

    #[test]
    fn corrupted_monotonicity_is_flagged() {
        let cfg = SweepConfig::default();
        let c: Vec<f64> = (1..=8).map(|i| i as f64).collect();
        let mut m: Vec<f64> = c.iter().map(|x| -x * x).collect();
        m[4] = m[3] + 0.5;
        let f = analyze_energies(&c, &m, &cfg).unwrap();
        assert!(!f.monotone_decreasing);
        assert_eq!(f.monotonicity_violations, vec![3]);
    }

    #[test]
    fn identity_ratio_is_equality() {
        let cfg = SweepConfig::default();
        let c = [1.0, 2.0, 3.0, 4.0];
        let m = [-1.0, -4.0, -9.0, -16.0];
        let f = analyze_energies(&c, &m, &cfg).unwrap();
        assert_eq!(f.homogeneity_checked, 10);
        assert!(f.homogeneity_violations.is_empty());
        let pos = analyze_energies(&c, &[-1.0, -2.0, 0.5, -5.0], &cfg).unwrap();
        assert!(!pos.all_negative);
        assert_eq!(pos.nonnegative_indices, vec![2]);
    }

    #[test]
    fn superadditive_data_violates() {
        let cfg = SweepConfig::default();
        let c = [1.0, 2.0, 3.0, 4.0];
        // linear energies are exactly additive; make m(2) too high
        let m = [-1.0, -1.5, -3.0, -4.0];
        let f = analyze_energies(&c, &m, &cfg).unwrap();
        assert!(f
            .subadditivity_violations
            .iter()
            .any(|t| (t.i, t.j, t.k) == (1, 0, 0)));
        assert!(!f.homogeneity_violations.is_empty());
    }

    #[test]
    fn boundary_fields_have_positive_energy() {
        let p = LandscapeParams::new(5, 3.0, 1.0, 1.0, 1.0).unwrap();
        let t = mass_threshold(&p).unwrap();
        let r = boundary_samples(&p, 0.5 * t.c0, 10, 7).unwrap();
        assert_eq!(r.samples, 10);
        assert!(r.all_positive());
        assert_eq!(r.bound_holds, 10);
        assert!(r.max_constraint_error < 1e-6);
    }
}
