use bnls_core::landscape::mass_threshold;
use bnls_core::minimizer::{
    estimate_gn_constant, estimate_sobolev_constant, gaussian_gn_quotient, SobolevConfig,
};
use bnls_core::{
    analyze_fiber, build_grid, energy, lagrange_multiplier, mass_dilate, minimize, minimize_from,
    norm_bundle, pohozaev, Error, LandscapeParams, RadialField, SolverConfig,
};

fn synthetic(dim: usize, q: f64) -> LandscapeParams {
    LandscapeParams::new(dim, q, 1.0, 1.0, 1.0).unwrap()
}

#[test]
fn runs_are_bit_identical() {
    let p = synthetic(5, 3.0);
    let c = 0.4 * mass_threshold(&p).unwrap().c0;
    let a = minimize(&p, c, &SolverConfig::default()).unwrap();
    let b = minimize(&p, c, &SolverConfig::default()).unwrap();
    assert_eq!(a.field, b.field);
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.m.to_bits(), b.m.to_bits());
}

#[test]
fn armijo_steps_descend_and_mass_is_kept() {
    let p = synthetic(5, 3.0);
    let c = 0.7 * mass_threshold(&p).unwrap().c0;
    let gs = minimize(&p, c, &SolverConfig::default()).unwrap();
    for pair in gs.trace.windows(2) {
        if !pair[1].roundoff {
            assert!(pair[1].energy < pair[0].energy, "{pair:?}");
        }
    }
    assert!((gs.field.mass() / c - 1.0).abs() < 1e-10);
    // reported quantities are those of the returned field
    let b = norm_bundle(&p, &gs.field).unwrap();
    assert!((energy(&p, &b) - gs.m).abs() <= 1e-12 * gs.m.abs());
    assert!((lagrange_multiplier(&p, &b).unwrap() - gs.lambda).abs() <= 1e-10 * gs.lambda.abs());
    assert!(gs.lambda < 0.0);
}

#[test]
fn ground_states_across_dimensions() {
    for (dim, q) in [(6, 2.5), (8, 2.6), (10, 2.4)] {
        let p = synthetic(dim, q);
        let t = mass_threshold(&p).unwrap();
        for frac in [0.2, 0.8] {
            let gs = minimize(&p, frac * t.c0, &SolverConfig::default())
                .unwrap_or_else(|e| panic!("N = {dim}, c = {frac}c0: {e}"));
            assert!(gs.m < 0.0 && gs.bend < t.rho0);
            assert!(pohozaev(&p, &gs.bundle()).abs() / gs.bend < 1e-6);
            let s1 = analyze_fiber(&p, &gs.bundle()).unwrap().s1.unwrap();
            assert!((s1 - 1.0).abs() < 1e-3, "N = {dim}: s1 = {s1}");
        }
    }
}

#[test]
fn warm_start_from_a_dilated_ground_state() {
    let p = synthetic(5, 3.0);
    let t = mass_threshold(&p).unwrap();
    let (c1, c2) = (0.3 * t.c0, 0.45 * t.c0);
    let config = SolverConfig::default();
    let gs1 = minimize(&p, c1, &config).unwrap();
    let start = mass_dilate(&gs1.field, c1, c2).unwrap();
    let start = start.scaled((c2 / start.mass()).sqrt());
    let warm = minimize_from(&p, c2, start, &config).unwrap();
    let cold = minimize(&p, c2, &config).unwrap();
    assert!(
        (warm.m / cold.m - 1.0).abs() < 1e-4,
        "{} vs {}",
        warm.m,
        cold.m
    );
    assert!(warm.m < gs1.m);
}

#[test]
fn solver_rejects_bad_input() {
    let p = synthetic(5, 3.0);
    let t = mass_threshold(&p).unwrap();
    assert!(matches!(
        minimize(&p, t.c0, &SolverConfig::default()),
        Err(Error::MassAboveThreshold { .. })
    ));
    let capped = SolverConfig {
        max_iter: 2,
        ..SolverConfig::default()
    };
    assert!(matches!(
        minimize(&p, 0.5 * t.c0, &capped),
        Err(Error::NotConverged { .. })
    ));
    let grid = build_grid(5, 513, 20.0).unwrap();
    let u = RadialField::from_fn(grid, |r| (-(r * r) / 2.0).exp()).unwrap();
    assert!(matches!(
        minimize_from(&p, 0.5 * t.c0, u, &SolverConfig::default()),
        Err(Error::MassDrift { .. })
    ));
}

#[test]
fn gagliardo_nirenberg_estimate_beats_the_gaussian() {
    let p = synthetic(5, 3.0);
    let coarse = estimate_gn_constant(&p, &build_grid(5, 1025, 30.0).unwrap()).unwrap();
    let fine = estimate_gn_constant(&p, &build_grid(5, 2049, 30.0).unwrap()).unwrap();
    assert!(fine.value > gaussian_gn_quotient(&p));
    assert!(fine.value >= fine.start);
    assert!((fine.value / coarse.value - 1.0).abs() < 1e-6);
}

#[test]
fn sobolev_estimate_is_a_tight_lower_bound() {
    // ‖u‖₁₀/‖Δu‖₂ of (1 + r²)^{−1/2} in five dimensions
    let exact = 0.098_829_248_856_893_2;
    let p = synthetic(5, 3.0);
    let grid = build_grid(5, 16385, 60.0).unwrap();
    let est = estimate_sobolev_constant(&p, &grid, &SobolevConfig::default()).unwrap();
    assert!(est.value < exact);
    assert!(est.value > 0.997 * exact, "{}", est.value);
    assert!(est.truncation_change.unwrap() < 1e-3);
}

#[test]
fn sobolev_estimate_flags_truncation() {
    let p = synthetic(5, 3.0);
    let grid = build_grid(5, 2049, 4.0).unwrap();
    let err = estimate_sobolev_constant(&p, &grid, &SobolevConfig::default()).unwrap_err();
    assert!(matches!(err, Error::TruncationSensitive { .. }), "{err}");
}
