//! Run configuration: JSON schema, loading and validation.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use ebk_core::{EnergyWindow, SymbolSpec};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolConfig {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    pub e1: f64,
    pub e2: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_trace_tol")]
    pub trace_tol: f64,
    #[serde(default = "default_oracle_tol")]
    pub oracle_tol: f64,
    #[serde(default = "default_action_samples")]
    pub action_samples: usize,
}

fn default_trace_tol() -> f64 {
    1e-10
}

fn default_oracle_tol() -> f64 {
    1e-5
}

fn default_action_samples() -> usize {
    129
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            trace_tol: default_trace_tol(),
            oracle_tol: default_oracle_tol(),
            action_samples: default_action_samples(),
        }
    }
}

/// Pipeline stages in dependency order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Trace,
    Actions,
    Spectrum,
    Oracle,
    Compare,
    Weyl,
    Branches,
    Doublets,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Trace,
        Stage::Actions,
        Stage::Spectrum,
        Stage::Oracle,
        Stage::Compare,
        Stage::Weyl,
        Stage::Branches,
        Stage::Doublets,
    ];

    pub fn dependencies(self) -> &'static [Stage] {
        match self {
            Stage::Trace | Stage::Oracle => &[],
            Stage::Actions => &[Stage::Trace],
            Stage::Spectrum => &[Stage::Actions],
            Stage::Compare | Stage::Weyl | Stage::Doublets => &[Stage::Spectrum, Stage::Oracle],
            Stage::Branches => &[Stage::Actions],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Stage::Trace => "trace",
            Stage::Actions => "actions",
            Stage::Spectrum => "spectrum",
            Stage::Oracle => "oracle",
            Stage::Compare => "compare",
            Stage::Weyl => "weyl",
            Stage::Branches => "branches",
            Stage::Doublets => "doublets",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub symbol: SymbolConfig,
    pub window: WindowConfig,
    pub hbars: Vec<f64>,
    pub pipeline: Vec<Stage>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("ebk-out")
}

/// Resolved stage list with the stages added to satisfy dependencies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StagePlan {
    pub stages: Vec<Stage>,
    pub auto_inserted: Vec<Stage>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let config: RunConfig = serde_json::from_str(text).map_err(|e| {
            CliError::Config(format!("line {} column {}: {e}", e.line(), e.column()))
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Canonical JSON form of the configuration.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.symbol_spec()?;
        self.energy_window()?;
        if self.hbars.is_empty() {
            return Err(CliError::Config("hbars must not be empty".into()));
        }
        if self.hbars.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
            return Err(CliError::Config(format!("hbars must be positive, got {:?}", self.hbars)));
        }
        if self.hbars.windows(2).any(|w| w[0] <= w[1]) {
            return Err(CliError::Config(format!(
                "hbars must be strictly descending, got {:?}",
                self.hbars
            )));
        }
        if self.pipeline.is_empty() {
            return Err(CliError::Config("pipeline must name at least one stage".into()));
        }
        if self.symbol.name == "nonlinear_oscillator" && self.stage_plan().stages.contains(&Stage::Oracle) {
            return Err(CliError::Config(
                "the finite-difference oracle needs a Schrödinger symbol; drop oracle-dependent stages".into(),
            ));
        }
        let t = &self.tolerances;
        if !(t.trace_tol > 0.0 && t.oracle_tol > 0.0) {
            return Err(CliError::Config("tolerances must be positive".into()));
        }
        if t.action_samples < 9 {
            return Err(CliError::Config(format!(
                "action_samples must be at least 9, got {}",
                t.action_samples
            )));
        }
        Ok(())
    }

    pub fn energy_window(&self) -> Result<EnergyWindow, CliError> {
        let w = self.window;
        EnergyWindow::new(w.e1, w.e2, w.margin).map_err(|e| CliError::Config(format!("window: {e}")))
    }

    pub fn symbol_spec(&self) -> Result<SymbolSpec, CliError> {
        let s = &self.symbol;
        let allowed: &[&str] = match s.name.as_str() {
            "harmonic" | "quartic" => &[],
            "polynomial" => &["coefficients"],
            "double_well" => &["a"],
            "morse" => &["D", "a"],
            "nonlinear_oscillator" => &["omega", "beta"],
            other => {
                return Err(CliError::Config(format!(
                    "unknown symbol {other:?}; expected harmonic, quartic, polynomial, double_well, morse or nonlinear_oscillator"
                )))
            }
        };
        if let Some(key) = s.params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(CliError::Config(format!("unknown parameter {key:?} for symbol {}", s.name)));
        }
        let num = |key: &str| -> Result<f64, CliError> {
            s.params
                .get(key)
                .and_then(|v| v.as_f64())
                .ok_or_else(|| CliError::Config(format!("symbol {} needs numeric parameter {key:?}", s.name)))
        };
        let spec = match s.name.as_str() {
            "harmonic" => Ok(SymbolSpec::harmonic()),
            "quartic" => Ok(SymbolSpec::quartic()),
            "polynomial" => {
                let coefficients = s
                    .params
                    .get("coefficients")
                    .and_then(|v| v.as_array())
                    .and_then(|a| a.iter().map(|c| c.as_f64()).collect::<Option<Vec<f64>>>())
                    .ok_or_else(|| CliError::Config("polynomial needs a numeric array \"coefficients\"".into()))?;
                SymbolSpec::polynomial(coefficients)
            }
            "double_well" => SymbolSpec::double_well(num("a")?),
            "morse" => SymbolSpec::morse(num("D")?, num("a")?),
            _ => SymbolSpec::nonlinear_oscillator(num("omega")?, num("beta")?),
        };
        spec.map_err(|e| CliError::Config(format!("symbol: {e}")))
    }

    /// Requested stages plus their transitive dependencies, in execution
    /// order.
    pub fn stage_plan(&self) -> StagePlan {
        let mut wanted: Vec<Stage> = self.pipeline.clone();
        let mut i = 0;
        while i < wanted.len() {
            for dep in wanted[i].dependencies() {
                if !wanted.contains(dep) {
                    wanted.push(*dep);
                }
            }
            i += 1;
        }
        let stages: Vec<Stage> = Stage::ALL.into_iter().filter(|s| wanted.contains(s)).collect();
        let auto_inserted = stages.iter().copied().filter(|s| !self.pipeline.contains(s)).collect();
        StagePlan { stages, auto_inserted }
    }
}
