use std::sync::Arc;

use bnls_core::grid::{load_field, save_field};
use bnls_core::{build_grid, minimize, Error, LandscapeParams, RadialField, SolverConfig};

#[test]
fn ground_state_survives_a_round_trip() {
    let p = LandscapeParams::new(5, 3.0, 1.0, 1.0, 1.0).unwrap();
    let gs = minimize(&p, 0.6, &SolverConfig::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("u.csv");
    save_field(&gs.field, &path).unwrap();

    let back = load_field(&path, None).unwrap();
    assert!(back.grid().same_as(gs.field.grid()));
    assert_eq!(back.values(), gs.field.values());
    let onto = load_field(&path, Some(gs.field.grid())).unwrap();
    assert!(Arc::ptr_eq(onto.grid(), gs.field.grid()));
}

#[test]
fn mismatched_and_corrupt_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let grid = build_grid(5, 65, 4.0).unwrap();
    let u = RadialField::from_fn(grid, |r| (-r * r).exp()).unwrap();
    let path = dir.path().join("u.csv");
    save_field(&u, &path).unwrap();

    let other = build_grid(6, 65, 4.0).unwrap();
    assert!(load_field(&path, Some(&other)).is_err());

    let text = std::fs::read_to_string(&path).unwrap();
    let truncated: String = text.lines().take(20).map(|l| format!("{l}\n")).collect();
    std::fs::write(&path, truncated).unwrap();
    assert!(matches!(
        load_field(&path, None),
        Err(Error::FieldFormat(_))
    ));

    assert!(matches!(
        load_field(&dir.path().join("missing.csv"), None),
        Err(Error::Io(_))
    ));
}
