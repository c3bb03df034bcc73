//! Run configuration: a TOML file, then `BNLS_<SECTION>__<KEY>` environment
//! overrides, then validation.

use std::path::{Path, PathBuf};

use bnls_core::minimizer::{EstimateConfig, SobolevConfig};
use bnls_core::sweep::SweepConfig;
use bnls_core::SolverConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const ENV_PREFIX: &str = "BNLS_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSection {
    #[serde(alias = "N")]
    pub dim: usize,
    pub q: f64,
    pub mu: f64,
}

impl Default for ProblemSection {
    fn default() -> Self {
        Self {
            dim: 5,
            q: 3.0,
            mu: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstantsMode {
    /// Use `c_gn` and `s_sob` as given.
    Synthetic,
    /// Estimate both numerically (certified lower bounds).
    Estimated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstantsSection {
    pub mode: ConstantsMode,
    #[serde(alias = "C_gn")]
    pub c_gn: f64,
    #[serde(alias = "S_sob")]
    pub s_sob: f64,
    pub gn_n: usize,
    pub gn_r_max: f64,
    pub sobolev_n: usize,
    pub sobolev_r_max: f64,
    pub sobolev_cutoff_start: f64,
    pub sobolev_truncation_tol: f64,
}

impl ConstantsSection {
    pub fn estimate_config(&self) -> EstimateConfig {
        EstimateConfig {
            gn_n: self.gn_n,
            gn_r_max: self.gn_r_max,
            sobolev_n: self.sobolev_n,
            sobolev_r_max: self.sobolev_r_max,
            sobolev: SobolevConfig {
                cutoff_start: self.sobolev_cutoff_start,
                truncation_tol: self.sobolev_truncation_tol,
                check_truncation: true,
            },
        }
    }
}

impl Default for ConstantsSection {
    fn default() -> Self {
        let estimate = EstimateConfig::default();
        Self {
            mode: ConstantsMode::Estimated,
            c_gn: 1.0,
            s_sob: 1.0,
            gn_n: estimate.gn_n,
            gn_r_max: estimate.gn_r_max,
            sobolev_n: estimate.sobolev_n,
            sobolev_r_max: estimate.sobolev_r_max,
            sobolev_cutoff_start: estimate.sobolev.cutoff_start,
            sobolev_truncation_tol: estimate.sobolev.truncation_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub n: usize,
    /// Solver radius; chosen from the seed when absent.
    pub r_max: Option<f64>,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            n: 2049,
            r_max: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LandscapeSection {
    /// Rows `c = c₀·k/rows`, `k = 1..=rows`.
    pub rows: usize,
    /// `ρ` points per row of the `f(c, ρ)` table.
    pub rho_points: usize,
    pub boundary_samples: usize,
}

impl Default for LandscapeSection {
    fn default() -> Self {
        Self {
            rows: 10,
            rho_points: 41,
            boundary_samples: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    /// Radius of the quadrature and Laplacian-order grid (node count from `grid.n`).
    pub r_max: f64,
    pub fiber_bundles: usize,
    pub gradient_samples: usize,
    pub rho_star_sets: usize,
    pub comparison_samples: usize,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            r_max: 12.0,
            fiber_bundles: 1000,
            gradient_samples: 20,
            rho_star_sets: 50,
            comparison_samples: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    /// Directory for field files, CSV tables and sweep reports.
    pub dir: PathBuf,
    pub seed: u64,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("bnls-out"),
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub problem: ProblemSection,
    pub constants: ConstantsSection,
    pub grid: GridSection,
    pub solver: SolverConfig,
    pub sweep: SweepConfig,
    pub landscape: LandscapeSection,
    pub verify: VerifySection,
    pub output: OutputSection,
}

impl Config {
    /// Reads `path` (or starts from defaults), applies environment overrides
    /// and validates every section except the problem data, which is checked
    /// by the domain layer.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound => CliError::ConfigNotFound(p.to_path_buf()),
                _ => CliError::Config(format!("{}: {e}", p.display())),
            })?,
            None => String::new(),
        };
        Self::from_parts(&text, std::env::vars())
    }

    pub fn from_parts(
        text: &str,
        env: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self, CliError> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        let mut overrides: Vec<(String, String)> = env
            .into_iter()
            .filter(|(k, _)| k.starts_with(ENV_PREFIX))
            .collect();
        overrides.sort();
        for (key, value) in overrides {
            apply_override(&mut table, &key, &value)?;
        }
        if let Some(solver) = table.get("solver").and_then(|s| s.as_table()) {
            for key in ["n", "r_max"] {
                if solver.contains_key(key) {
                    return Err(CliError::Config(format!(
                        "solver.{key} is not accepted; set grid.{key}"
                    )));
                }
            }
        }
        let mut config: Config = table
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        config.solver.n = config.grid.n;
        config.solver.r_max = config.grid.r_max;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), CliError> {
        let invalid = |e: bnls_core::Error| CliError::Config(e.to_string());
        self.solver.validate().map_err(invalid)?;
        self.sweep.validate().map_err(invalid)?;
        if self.constants.mode == ConstantsMode::Synthetic
            && !(self.constants.c_gn > 0.0 && self.constants.s_sob > 0.0)
        {
            return Err(CliError::Config(
                "synthetic constants need positive c_gn and s_sob".into(),
            ));
        }
        if self.landscape.rows == 0 || self.landscape.rho_points < 2 {
            return Err(CliError::Config(
                "landscape needs rows >= 1 and rho_points >= 2".into(),
            ));
        }
        Ok(())
    }
}

/// `BNLS_SOLVER__GRAD_TOL=1e-8` sets `solver.grad_tol`. The value is read
/// as a TOML value, falling back to a plain string.
fn apply_override(table: &mut toml::Table, key: &str, value: &str) -> Result<(), CliError> {
    let path = &key[ENV_PREFIX.len()..];
    let Some((section, field)) = path.split_once("__") else {
        return Err(CliError::Config(format!(
            "environment override {key} must look like {ENV_PREFIX}<SECTION>__<KEY>"
        )));
    };
    let (section, field) = (section.to_ascii_lowercase(), field.to_ascii_lowercase());
    let parsed = format!("v = {value}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    let entry = table
        .entry(section.clone())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    match entry {
        toml::Value::Table(t) => {
            t.insert(field, parsed);
            Ok(())
        }
        _ => Err(CliError::Config(format!("{section} is not a section"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    #[test]
    fn defaults_without_file() {
        let c = Config::from_parts("", env(&[])).unwrap();
        assert_eq!(c.problem.dim, 5);
        assert_eq!(c.constants.mode, ConstantsMode::Estimated);
        assert_eq!(c.solver.n, 2049);
        assert_eq!(c.sweep.k, 8);
    }

    #[test]
    fn file_values_and_env_overrides() {
        let text =
            "[problem]\nN = 6\nq = 2.5\n[constants]\nmode = \"synthetic\"\n[grid]\nn = 1025\n";
        let c = Config::from_parts(
            text,
            env(&[
                ("BNLS_SOLVER__GRAD_TOL", "1e-8"),
                ("BNLS_GRID__R_MAX", "40"),
                ("BNLS_OUTPUT__DIR", "/tmp/x"),
                ("OTHER", "1"),
            ]),
        )
        .unwrap();
        assert_eq!(c.problem.dim, 6);
        assert_eq!(c.constants.mode, ConstantsMode::Synthetic);
        assert_eq!(c.solver.n, 1025);
        assert_eq!(c.solver.grad_tol, 1e-8);
        assert_eq!(c.solver.r_max, Some(40.0));
        assert_eq!(c.output.dir, PathBuf::from("/tmp/x"));
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(Config::from_parts("[problem]\nfoo = 1\n", env(&[])).is_err());
        assert!(Config::from_parts("[solver]\nn = 10\n", env(&[])).is_err());
        assert!(Config::from_parts("[solver]\narmijo = 2.0\n", env(&[])).is_err());
        assert!(Config::from_parts("[sweep]\nk = 2\n", env(&[])).is_err());
        assert!(Config::from_parts("", env(&[("BNLS_SOLVER", "1")])).is_err());
        assert!(Config::from_parts("not toml [", env(&[])).is_err());
    }
}
