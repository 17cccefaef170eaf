//! Experiment configuration (JSON).
//!
//! ```json
//! {
//!   "seed": 7,
//!   "trials": 32,
//!   "problem": { "generate": { "n": 4096, "d": 128, "profile": "geometric",
//!                              "kappa": 1e6, "noise_level": 0.01 } },
//!   "lambda": "optimal",
//!   "solvers": [
//!     { "name": "mihs-exact", "sketch": "gaussian", "m_factor": 2.0, "iters": 30 },
//!     { "name": "mihs-inexact", "sketch": "srht", "m": 256, "eps_sub": 0.1 },
//!     { "name": "lsqr", "iters": 200 }
//!   ],
//!   "eta": [1e-2, 1e-4],
//!   "output": "out/fig1",
//!   "record_wall_time": false
//! }
//! ```
//!
//! `problem` may instead be `{ "files": "path/to/problem.json" }`, resolved
//! against the config file's directory. `lambda` is `"optimal"` (needs a
//! known `x_true`), `"problem"` (the value stored with the problem) or a
//! number.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use mihs_core::problems::{Signal, SingularProfile};
use mihs_core::SketchKind;
use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::files::read_json;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SolverName {
    MihsExact,
    MihsInexact,
    DualMihsExact,
    DualMihsInexact,
    PdMihsOver,
    PdMihsUnder,
    Lsqr,
}

impl SolverName {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolverName::MihsExact => "mihs-exact",
            SolverName::MihsInexact => "mihs-inexact",
            SolverName::DualMihsExact => "dual-mihs-exact",
            SolverName::DualMihsInexact => "dual-mihs-inexact",
            SolverName::PdMihsOver => "pd-mihs-over",
            SolverName::PdMihsUnder => "pd-mihs-under",
            SolverName::Lsqr => "lsqr",
        }
    }

    /// Solvers iterating on `ν ∈ ℝⁿ` and sketching `Aᵀ`.
    pub fn is_dual(&self) -> bool {
        matches!(
            self,
            SolverName::DualMihsExact | SolverName::DualMihsInexact | SolverName::PdMihsUnder
        )
    }

    pub fn is_primal_dual(&self) -> bool {
        matches!(self, SolverName::PdMihsOver | SolverName::PdMihsUnder)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub problem: ProblemSource,
    #[serde(default)]
    pub lambda: LambdaChoice,
    pub solvers: Vec<SolverEntry>,
    #[serde(default = "default_eta")]
    pub eta: Vec<f64>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub record_wall_time: bool,
}

fn default_trials() -> usize {
    32
}

fn default_eta() -> Vec<f64> {
    vec![1e-2, 1e-4, 1e-6]
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemSource {
    Generate(GenerateSpec),
    Files(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateSpec {
    pub n: usize,
    pub d: usize,
    #[serde(default = "default_profile")]
    pub profile: SingularProfile,
    pub kappa: f64,
    #[serde(default)]
    pub noise_level: f64,
    #[serde(default)]
    pub signal: Signal,
}

fn default_profile() -> SingularProfile {
    SingularProfile::Geometric
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaChoice {
    Value(f64),
    Named(LambdaKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaKeyword {
    Optimal,
    Problem,
}

impl Default for LambdaChoice {
    fn default() -> Self {
        LambdaChoice::Named(LambdaKeyword::Optimal)
    }
}

impl std::str::FromStr for LambdaChoice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "optimal" => Ok(LambdaChoice::Named(LambdaKeyword::Optimal)),
            "problem" => Ok(LambdaChoice::Named(LambdaKeyword::Problem)),
            _ => s
                .parse::<f64>()
                .ok()
                .filter(|v| *v >= 0.0 && v.is_finite())
                .map(LambdaChoice::Value)
                .ok_or_else(|| format!("expected `optimal`, `problem` or a number >= 0, got `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MomentumChoice {
    /// `β = sd/m`, `α = (1 − β)²`.
    #[default]
    Empirical,
    Theoretical {
        eps: f64,
    },
    Fixed {
        alpha: f64,
        beta: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SdSource {
    /// From the SVD of `A`.
    #[default]
    Exact,
    /// Hutchinson on the solver's own sketch; needs an explicit `m`.
    Hutchinson { samples: usize, eps_tr: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverEntry {
    pub name: SolverName,
    /// Output file stem; defaults to the solver name.
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default = "default_sketch")]
    pub sketch: SketchKind,
    #[serde(default)]
    pub sketch2: Option<SketchKind>,
    /// Sketch size; alternatively `m_factor · sd`.
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default)]
    pub m_factor: Option<f64>,
    #[serde(default)]
    pub m2: Option<usize>,
    #[serde(default)]
    pub m2_factor: Option<f64>,
    #[serde(default = "default_iters")]
    pub iters: usize,
    #[serde(default = "default_inner_iters")]
    pub inner_iters: usize,
    #[serde(default = "default_eps_sub")]
    pub eps_sub: f64,
    #[serde(default)]
    pub momentum: MomentumChoice,
    #[serde(default)]
    pub sd: SdSource,
    /// LSQR stopping tolerance on the relative normal-equation residual.
    #[serde(default)]
    pub tol: f64,
}

fn default_sketch() -> SketchKind {
    SketchKind::Gaussian
}

fn default_iters() -> usize {
    30
}

fn default_inner_iters() -> usize {
    25
}

fn default_eps_sub() -> f64 {
    0.1
}

impl SolverEntry {
    pub fn new(name: SolverName) -> Self {
        Self {
            name,
            label: None,
            sketch: default_sketch(),
            sketch2: None,
            m: None,
            m_factor: None,
            m2: None,
            m2_factor: None,
            iters: default_iters(),
            inner_iters: default_inner_iters(),
            eps_sub: default_eps_sub(),
            momentum: MomentumChoice::default(),
            sd: SdSource::default(),
            tol: 0.0,
        }
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.name.as_str().to_string())
    }

    fn validate(&self) -> Result<()> {
        let who = self.label();
        if self.iters == 0 {
            return Err(config(format!("{who}: iters must be >= 1")));
        }
        if self.name == SolverName::Lsqr {
            return Ok(());
        }
        if self.m.is_some() == self.m_factor.is_some() {
            return Err(config(format!("{who}: give exactly one of `m` and `m_factor`")));
        }
        if self.m2.is_some() && self.m2_factor.is_some() {
            return Err(config(format!("{who}: give at most one of `m2` and `m2_factor`")));
        }
        if let Some(f) = self.m_factor.or(self.m2_factor) {
            if !(f > 0.0 && f.is_finite()) {
                return Err(config(format!("{who}: sketch size factors must be positive")));
            }
        }
        if let SdSource::Hutchinson { samples, .. } = self.sd {
            if self.m.is_none() || samples == 0 {
                return Err(config(format!(
                    "{who}: Hutchinson sd needs an explicit `m` and samples >= 1"
                )));
            }
        }
        Ok(())
    }
}

impl ExperimentConfig {
    /// Reads a config and resolves problem file paths against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg: ExperimentConfig = read_json(path)?;
        if let (ProblemSource::Files(p), Some(dir)) = (&mut cfg.problem, path.parent()) {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(config("trials must be >= 1"));
        }
        if self.solvers.is_empty() {
            return Err(config("at least one solver is required"));
        }
        let mut labels: Vec<String> = self.solvers.iter().map(SolverEntry::label).collect();
        labels.sort();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(config("solver labels must be unique"));
        }
        if self.eta.iter().any(|e| !e.is_finite() || *e <= 0.0) {
            return Err(config("eta values must be positive"));
        }
        self.solvers.iter().try_for_each(SolverEntry::validate)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_example() {
        let text = r#"{
          "seed": 7,
          "problem": { "generate": { "n": 64, "d": 8, "kappa": 1e3, "noise_level": 0.01 } },
          "solvers": [
            { "name": "mihs-exact", "sketch": "gaussian", "m_factor": 2.0 },
            { "name": "pd-mihs-over", "sketch": { "osnap": { "s": 2 } }, "m": 32,
              "momentum": { "theoretical": { "eps": 0.5 } } },
            { "name": "lsqr", "iters": 100, "label": "baseline" }
          ],
          "lambda": 0.001
        }"#;
        let cfg: ExperimentConfig = serde_json::from_str(text).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.trials, 32);
        assert_eq!(cfg.lambda, LambdaChoice::Value(1e-3));
        assert_eq!(cfg.solvers[1].sketch, SketchKind::Osnap { s: 2 });
        assert_eq!(cfg.solvers[2].label(), "baseline");
        assert!(!cfg.record_wall_time);
    }

    #[test]
    fn rejects_bad_configs() {
        let base = r#"{"problem": {"files": "p.json"}, "solvers": SOLVERS, "trials": TRIALS}"#;
        let parse = |solvers: &str, trials: &str| -> Result<ExperimentConfig> {
            let text = base.replace("SOLVERS", solvers).replace("TRIALS", trials);
            let cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| config(e.to_string()))?;
            cfg.validate()?;
            Ok(cfg)
        };
        assert!(parse(r#"[{"name": "lsqr"}]"#, "1").is_ok());
        assert!(parse(r#"[{"name": "lsqr"}]"#, "0").is_err());
        assert!(parse("[]", "1").is_err());
        assert!(parse(r#"[{"name": "mihs-exact"}]"#, "1").is_err());
        assert!(parse(r#"[{"name": "mihs-exact", "m": 4, "m_factor": 2}]"#, "1").is_err());
        assert!(parse(r#"[{"name": "nope"}]"#, "1").is_err());
        assert!(parse(r#"[{"name": "lsqr"}, {"name": "lsqr"}]"#, "1").is_err());
        assert!(parse(r#"[{"name": "lsqr", "typo": 1}]"#, "1").is_err());
    }

    #[test]
    fn lambda_from_cli_text() {
        assert_eq!("optimal".parse::<LambdaChoice>().unwrap(), LambdaChoice::default());
        assert_eq!("0.5".parse::<LambdaChoice>().unwrap(), LambdaChoice::Value(0.5));
        assert!("-1".parse::<LambdaChoice>().is_err());
    }
}
