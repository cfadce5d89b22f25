//! Run configuration: a TOML file, overridden by command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use branchsys::branching::{build_standard, doubling_map, example_o_infinity, example_quadratic};
use branchsys::description::{MatrixDesc, SystemDescription};
use branchsys::sets::pair_to_rational;
use branchsys::BranchingSystem;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const BUILTINS: [&str; 4] = ["doubling", "o-infinity", "quadratic", "standard"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub system: SystemSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub validate: ValidateSection,
    #[serde(default)]
    pub relations: RelationsSection,
    #[serde(default)]
    pub pf: PfSection,
    #[serde(default)]
    pub invariant: InvariantSection,
    #[serde(default)]
    pub truncation: TruncationSection,
}

fn default_seed() -> u64 {
    1
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("branchsys-out")
}

impl Default for RunConfig {
    fn default() -> Self {
        toml::from_str("").expect("every field has a default")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    /// Ambient length of the quadratic builtin.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ambient: Option<[i64; 2]>,
    /// Matrix of the standard builtin.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<MatrixDesc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "default_cells")]
    pub cells: usize,
}

fn default_cells() -> usize {
    4096
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { cells: default_cells() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub relations: f64,
    pub adjoint: f64,
    pub defining: f64,
    pub monte_carlo: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            relations: 1e-9,
            adjoint: 1e-9,
            defining: 1e-6,
            monte_carlo: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateSection {
    pub grid_points: usize,
    pub cover_required: bool,
}

impl Default for ValidateSection {
    fn default() -> Self {
        ValidateSection {
            grid_points: 1000,
            cover_required: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RelationsSection {
    pub test_functions: usize,
}

impl Default for RelationsSection {
    fn default() -> Self {
        RelationsSection { test_functions: 10 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PfSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Monte-Carlo samples for the oracle comparison; 0 skips it.
    pub samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InvariantSection {
    /// Initial density as CSV; uniform when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    pub max_iters: usize,
    pub tol_l1: f64,
}

impl Default for InvariantSection {
    fn default() -> Self {
        InvariantSection {
            input: None,
            max_iters: 200,
            tol_l1: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TruncationSection {
    /// Input as CSV; the indicator of the instantiated ranges when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    pub ns: Vec<usize>,
}

impl Default for TruncationSection {
    fn default() -> Self {
        TruncationSection {
            input: None,
            ns: vec![1, 2, 4, 8, 16],
        }
    }
}

/// Values given on the command line; `None` leaves the config untouched.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub system: Option<String>,
    pub n_max: Option<usize>,
    pub cells: Option<usize>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("{origin}: {e}")))
    }

    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
                Self::parse(&text, &p.display().to_string())
            }
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = &o.system {
            if BUILTINS.contains(&s.as_str()) {
                self.system.builtin = Some(s.clone());
                self.system.file = None;
            } else {
                self.system.file = Some(PathBuf::from(s));
                self.system.builtin = None;
            }
        }
        if let Some(n) = o.n_max {
            self.system.n_max = Some(n);
        }
        if let Some(c) = o.cells {
            self.grid.cells = c;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(d) = &o.output_dir {
            self.output_dir = d.clone();
        }
    }

    pub fn check(&self) -> Result<(), CliError> {
        if self.grid.cells < 2 {
            return Err(CliError::Usage(format!(
                "grid.cells must be at least 2, got {}",
                self.grid.cells
            )));
        }
        if self.system.n_max == Some(0) {
            return Err(CliError::Usage("system.n_max must be at least 1".into()));
        }
        match (&self.system.builtin, &self.system.file) {
            (Some(_), Some(_)) => return Err(CliError::Usage("give system.builtin or system.file, not both".into())),
            (None, None) => return Err(CliError::Usage("no system: set system.builtin or system.file".into())),
            (Some(b), None) if !BUILTINS.contains(&b.as_str()) => {
                return Err(CliError::Usage(format!(
                    "unknown builtin `{b}`; expected one of {}",
                    BUILTINS.join(", ")
                )))
            }
            _ => {}
        }
        if let Some(bins) = self.pf.bins {
            if bins == 0 || !self.grid.cells.is_multiple_of(bins) {
                return Err(CliError::Usage(format!(
                    "pf.bins ({bins}) must divide grid.cells ({})",
                    self.grid.cells
                )));
            }
        }
        Ok(())
    }

    /// The resolved configuration as `# `-prefixed TOML lines.
    pub fn header(&self) -> String {
        let body = toml::to_string(self).expect("config serializes");
        let mut out = String::from("# resolved configuration\n");
        for line in body.lines() {
            out.push('#');
            if !line.is_empty() {
                out.push(' ');
                out.push_str(line);
            }
            out.push('\n');
        }
        out
    }

    pub fn build_system(&self) -> Result<BranchingSystem, CliError> {
        let usage = |e: &dyn std::fmt::Display| CliError::Usage(e.to_string());
        if let Some(path) = &self.system.file {
            let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            let desc = SystemDescription::from_toml_str(&text)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            return desc
                .build()
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())));
        }
        let n_max = self.system.n_max;
        match self.system.builtin.as_deref() {
            Some("doubling") => match n_max {
                None | Some(2) => Ok(doubling_map()),
                Some(n) => Err(CliError::Usage(format!("the doubling map has 2 branches, not {n}"))),
            },
            Some("o-infinity") => example_o_infinity(n_max.unwrap_or(8)).map_err(|e| usage(&e)),
            Some("quadratic") => {
                let [p, q] = self.system.ambient.unwrap_or([3, 1]);
                let ambient = pair_to_rational(p, q).map_err(|e| usage(&e))?;
                example_quadratic(n_max.unwrap_or(6), ambient).map_err(|e| usage(&e))
            }
            Some("standard") => {
                let desc = self.system.matrix.clone().unwrap_or(MatrixDesc::Explicit {
                    rows: vec![vec![1, 1], vec![1, 0]],
                });
                let matrix = desc.build().map_err(|e| usage(&e))?;
                let n = n_max.unwrap_or(matrix.n_max());
                let matrix = matrix.with_n_max(n).map_err(|e| usage(&e))?;
                build_standard(&matrix, n).map_err(|e| usage(&e))
            }
            other => Err(CliError::Usage(format!("unknown builtin {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = RunConfig::default();
        assert_eq!(c.grid.cells, 4096);
        assert_eq!(c.seed, 1);
        assert_eq!(c.truncation.ns, vec![1, 2, 4, 8, 16]);
    }

    #[test]
    fn strict_keys() {
        let err = RunConfig::parse("[grid]\ncells = 64\nsize = 2\n", "cfg").unwrap_err();
        assert!(err.to_string().contains("size"), "{err}");
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn flags_override() {
        let mut c = RunConfig::parse("[system]\nbuiltin = \"doubling\"\n[grid]\ncells = 64\n", "cfg").unwrap();
        c.apply(&Overrides {
            system: Some("sys.toml".into()),
            cells: Some(128),
            ..Overrides::default()
        });
        assert_eq!(c.system.builtin, None);
        assert_eq!(c.system.file, Some(PathBuf::from("sys.toml")));
        assert_eq!(c.grid.cells, 128);
    }

    #[test]
    fn invariants_checked() {
        let c = RunConfig::parse("[system]\nbuiltin = \"doubling\"\n[grid]\ncells = 1\n", "cfg").unwrap();
        assert!(c.check().is_err());
        let c = RunConfig::parse("[system]\nbuiltin = \"doubling\"\nn_max = 0\n", "cfg").unwrap();
        assert!(c.check().is_err());
        let c = RunConfig::parse("[system]\nbuiltin = \"tent\"\n", "cfg").unwrap();
        assert!(c.check().is_err());
    }

    #[test]
    fn standard_matrix_from_config() {
        let text = "[system]\nbuiltin = \"standard\"\n[system.matrix]\nkind = \"explicit\"\nrows = [[1, 1, 0], [0, 0, 1], [1, 0, 0]]\n";
        let sys = RunConfig::parse(text, "cfg").unwrap().build_system().unwrap();
        assert_eq!(sys.n_branches(), 3);
    }
}
