use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use bnls_core::fiber::{fiber_curve, write_curve_csv};
use bnls_core::grid::{load_field, save_field};
use bnls_core::landscape::{landscape_max, validate_problem, ExponentSet};
use bnls_core::minimizer::{estimate_constants, EstimatedConstants};
use bnls_core::scalar::bisect;
use bnls_core::sweep::{boundary_samples, run_sweep};
use bnls_core::verify::{run_checks, VerifyConfig};
use bnls_core::{
    analyze_fiber, derive_exponents, energy, f_landscape, mass_threshold, minimize, norm_bundle,
    pohozaev, rho_star, LandscapeParams, MassThreshold,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Config, ConstantsMode};
use crate::error::CliError;

/// JSON-lines records on stdout, warnings on stderr.
pub struct Emitter<W: Write> {
    out: W,
}

impl<W: Write> Emitter<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn record<T: Serialize>(&mut self, kind: &str, body: &T) -> Result<(), CliError> {
        let mut value = serde_json::to_value(body).map_err(|e| CliError::Output(e.to_string()))?;
        match &mut value {
            Value::Object(map) => {
                map.insert("record".into(), Value::String(kind.into()));
            }
            other => {
                value = json!({ "record": kind, "value": other.take() });
            }
        }
        writeln!(self.out, "{value}").map_err(|e| CliError::Output(e.to_string()))?;
        self.out
            .flush()
            .map_err(|e| CliError::Output(e.to_string()))
    }
}

pub fn warn(message: &str) {
    eprintln!("{}", json!({ "warning": message }));
}

/// Problem data and the inequality constants in use.
pub struct Resolved {
    pub params: LandscapeParams,
    pub threshold: MassThreshold,
    pub estimate: Option<EstimatedConstants>,
}

pub fn resolve(config: &Config) -> Result<Resolved, CliError> {
    let p = &config.problem;
    validate_problem(p.dim, p.q, p.mu)?;
    let (params, estimate) = match config.constants.mode {
        ConstantsMode::Synthetic => (
            LandscapeParams::new(
                p.dim,
                p.q,
                p.mu,
                config.constants.c_gn,
                config.constants.s_sob,
            )?,
            None,
        ),
        ConstantsMode::Estimated => {
            let base = LandscapeParams::new(p.dim, p.q, p.mu, 1.0, 1.0)?;
            let est = estimate_constants(&base, &config.constants.estimate_config())?;
            warn(
                "estimated constants are lower bounds on the best constants; the resulting c0 and \
                 rho0 over-estimate the true threshold and barrier, so check the sign pattern of m(c)",
            );
            (
                base.with_constants(est.gn.value, est.sobolev.value)?,
                Some(est),
            )
        }
    };
    let threshold = mass_threshold(&params)?;
    Ok(Resolved {
        params,
        threshold,
        estimate,
    })
}

fn output_path(config: &Config, name: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(&config.output.dir)
        .map_err(|e| CliError::Output(format!("{}: {e}", config.output.dir.display())))?;
    Ok(config.output.dir.join(name))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Output(format!("{}: {e}", path.display()))
}

#[derive(Serialize)]
struct ConstantsRecord<'a> {
    mode: ConstantsMode,
    dim: usize,
    q: f64,
    mu: f64,
    c_gn: f64,
    s_sob: f64,
    #[serde(flatten)]
    threshold: MassThreshold,
    exponents: ExponentSet,
    estimate: Option<&'a EstimatedConstants>,
}

pub fn constants<W: Write>(config: &Config, out: &mut Emitter<W>) -> Result<(), CliError> {
    let r = resolve(config)?;
    out.record(
        "constants",
        &ConstantsRecord {
            mode: config.constants.mode,
            dim: r.params.dim,
            q: r.params.q,
            mu: r.params.mu,
            c_gn: r.params.c_gn,
            s_sob: r.params.s_sob,
            threshold: r.threshold,
            exponents: derive_exponents(&r.params)?,
            estimate: r.estimate.as_ref(),
        },
    )
}

#[derive(Serialize)]
struct LandscapeRow {
    c: f64,
    rho_c: f64,
    h_max: f64,
    boundary_samples: Option<usize>,
    boundary_positive: Option<usize>,
    boundary_bound_holds: Option<usize>,
    boundary_pass: Option<bool>,
}

/// `(c, ρ_c, h_c(ρ_c))` rows for `c = c₀·k/rows` with barrier sampling below
/// `c₀`, plus an `f(c, ρ)` grid table.
pub fn landscape<W: Write>(config: &Config, out: &mut Emitter<W>) -> Result<(), CliError> {
    let r = resolve(config)?;
    let (params, t) = (&r.params, r.threshold);
    let c0_bisection = bisect(
        |c| landscape_max(params, c).unwrap_or(f64::NAN),
        0.5 * t.c0,
        2.0 * t.c0,
        200,
        1e-15,
    )?;
    let rows_path = output_path(config, "landscape.csv")?;
    let grid_path = output_path(config, "landscape_f.csv")?;
    out.record(
        "landscape-header",
        &json!({
            "M": t.m_const,
            "c0": t.c0,
            "rho0": t.rho0,
            "c0_bisection": c0_bisection,
            "c_gn": params.c_gn,
            "s_sob": params.s_sob,
            "rows_csv": rows_path,
            "f_csv": grid_path,
        }),
    )?;
    let settings = &config.landscape;
    let mut rows_csv = create(&rows_path)?;
    let mut grid_csv = create(&grid_path)?;
    writeln!(
        rows_csv,
        "c,rho_c,h_max,boundary_samples,boundary_positive,boundary_pass"
    )
    .map_err(io_err(&rows_path))?;
    writeln!(grid_csv, "c,rho,f").map_err(io_err(&grid_path))?;
    let mut boundary_failures = 0;
    for k in 1..=settings.rows {
        let c = if k == settings.rows {
            t.c0
        } else {
            t.c0 * k as f64 / settings.rows as f64
        };
        let rho_c = rho_star(params, c)?;
        let h_max = f_landscape(params, c, rho_c)?;
        let boundary = if c < t.c0 && settings.boundary_samples > 0 {
            Some(boundary_samples(
                params,
                c,
                settings.boundary_samples,
                config.output.seed.wrapping_add(k as u64),
            )?)
        } else {
            None
        };
        let row = LandscapeRow {
            c,
            rho_c,
            h_max,
            boundary_samples: boundary.map(|b| b.samples),
            boundary_positive: boundary.map(|b| b.positive),
            boundary_bound_holds: boundary.map(|b| b.bound_holds),
            boundary_pass: boundary.map(|b| b.all_positive()),
        };
        if row.boundary_pass == Some(false) {
            boundary_failures += 1;
        }
        let opt = |v: Option<String>| v.unwrap_or_default();
        writeln!(
            rows_csv,
            "{:e},{:e},{:e},{},{},{}",
            c,
            rho_c,
            h_max,
            opt(row.boundary_samples.map(|v| v.to_string())),
            opt(row.boundary_positive.map(|v| v.to_string())),
            opt(row.boundary_pass.map(|v| v.to_string())),
        )
        .map_err(io_err(&rows_path))?;
        out.record("landscape-row", &row)?;
        let (lo, hi) = ((t.rho0 / 100.0).ln(), (t.rho0 * 100.0).ln());
        for j in 0..settings.rho_points {
            let rho = (lo + (hi - lo) * j as f64 / (settings.rho_points - 1) as f64).exp();
            writeln!(
                grid_csv,
                "{:e},{:e},{:e}",
                c,
                rho,
                f_landscape(params, c, rho)?
            )
            .map_err(io_err(&grid_path))?;
        }
    }
    rows_csv.flush().map_err(io_err(&rows_path))?;
    grid_csv.flush().map_err(io_err(&grid_path))?;
    if boundary_failures > 0 {
        return Err(CliError::Verification {
            failed: boundary_failures,
            names: "boundary-positivity".into(),
        });
    }
    Ok(())
}

pub enum MassArg {
    Absolute(f64),
    FractionOfThreshold(f64),
}

#[derive(Serialize)]
struct SolveRecord<'a> {
    #[serde(flatten)]
    state: &'a bnls_core::GroundState,
    fiber_s1: Option<f64>,
    fiber_zeros: usize,
    field_csv: PathBuf,
}

pub fn solve<W: Write>(
    config: &Config,
    mass: MassArg,
    field_out: Option<PathBuf>,
    out: &mut Emitter<W>,
) -> Result<(), CliError> {
    let r = resolve(config)?;
    let c = match mass {
        MassArg::Absolute(c) => c,
        MassArg::FractionOfThreshold(f) => f * r.threshold.c0,
    };
    let state = minimize(&r.params, c, &config.solver)?;
    let fiber = analyze_fiber(&r.params, &state.bundle())?;
    let path = match field_out {
        Some(p) => p,
        None => output_path(config, "ground_state.csv")?,
    };
    save_field(&state.field, &path)?;
    out.record(
        "ground-state",
        &SolveRecord {
            state: &state,
            fiber_s1: fiber.s1,
            fiber_zeros: fiber.zero_count(),
            field_csv: path,
        },
    )
}

pub fn sweep<W: Write>(config: &Config, out: &mut Emitter<W>) -> Result<(), CliError> {
    let r = resolve(config)?;
    let path = output_path(config, "sweep_report.json")?;
    let persist = |report: &bnls_core::sweep::SweepReport| -> Result<(), CliError> {
        let text =
            serde_json::to_string_pretty(report).map_err(|e| CliError::Output(e.to_string()))?;
        std::fs::write(&path, text + "\n").map_err(io_err(&path))
    };
    match run_sweep(&r.params, &config.solver, &config.sweep) {
        Ok(report) => {
            persist(&report)?;
            out.record("sweep", &report)?;
            if report.all_pass() {
                Ok(())
            } else {
                let flags = report.flags.as_ref();
                let mut names = Vec::new();
                if !flags.is_some_and(|f| f.all_negative) {
                    names.push("all-negative");
                }
                if !flags.is_some_and(|f| f.monotone_decreasing) {
                    names.push("monotone-decreasing");
                }
                if !flags.is_some_and(|f| f.subadditivity_violations.is_empty()) {
                    names.push("subadditivity");
                }
                if !flags.is_some_and(|f| f.homogeneity_violations.is_empty()) {
                    names.push("sub-homogeneity");
                }
                if report.boundary_positive_samples != report.boundary_total_samples {
                    names.push("boundary-positivity");
                }
                Err(CliError::Verification {
                    failed: names.len(),
                    names: names.join(", "),
                })
            }
        }
        Err((partial, e)) => {
            persist(&partial)?;
            out.record("sweep-partial", &*partial)?;
            Err(e.into())
        }
    }
}

pub struct FiberArgs {
    pub field: PathBuf,
    pub s_min: f64,
    pub s_max: f64,
    pub points: usize,
}

pub fn fiber<W: Write>(
    config: &Config,
    args: &FiberArgs,
    out: &mut Emitter<W>,
) -> Result<(), CliError> {
    let r = resolve(config)?;
    let field = load_field(&args.field, None)?;
    if field.grid().dim() != r.params.dim {
        return Err(CliError::Config(format!(
            "field file has dim = {} but the problem has N = {}",
            field.grid().dim(),
            r.params.dim
        )));
    }
    let bundle = norm_bundle(&r.params, &field)?;
    let analysis = analyze_fiber(&r.params, &bundle)?;
    let curve = fiber_curve(&r.params, &bundle, args.s_min, args.s_max, args.points)?;
    let path = output_path(config, "fiber_curve.csv")?;
    write_curve_csv(&curve, create(&path)?)?;
    out.record(
        "fiber",
        &json!({
            "bundle": bundle,
            "energy": energy(&r.params, &bundle),
            "pohozaev": pohozaev(&r.params, &bundle),
            "analysis": analysis,
            "curve_csv": path,
        }),
    )
}

pub fn verify<W: Write>(config: &Config, out: &mut Emitter<W>) -> Result<(), CliError> {
    let r = resolve(config)?;
    let v = &config.verify;
    let checks = run_checks(
        &r.params,
        &VerifyConfig {
            n: config.grid.n,
            r_max: v.r_max,
            seed: config.output.seed,
            gradient_samples: v.gradient_samples,
            gradient_n: VerifyConfig::default().gradient_n,
            rho_star_sets: v.rho_star_sets,
            fiber_bundles: v.fiber_bundles,
            comparison_samples: v.comparison_samples,
        },
    );
    let mut failed = Vec::new();
    for check in &checks {
        out.record("check", check)?;
        if !check.passed {
            failed.push(check.name.clone());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification {
            failed: failed.len(),
            names: failed.join(", "),
        })
    }
}
