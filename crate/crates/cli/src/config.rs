//! Run configuration: a JSON file plus command-line overrides.

use std::path::{Path, PathBuf};

use bicusp::continuation::ContinuationOptions;
use bicusp::stationary::{SolveMode, SolverOptions};
use bicusp::PotentialConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NaSpec {
    Scalar(f64),
    Sweep { from: f64, to: f64, step0: Option<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GammaSpec {
    Scalar(f64),
    List(Vec<f64>),
    Grid { from: f64, to: f64, count: usize },
}

impl GammaSpec {
    pub fn values(&self) -> Result<Vec<f64>, CliError> {
        let v = match self {
            GammaSpec::Scalar(g) => vec![*g],
            GammaSpec::List(v) => v.clone(),
            GammaSpec::Grid { from, to, count } => {
                if *count == 0 {
                    return Err(CliError::Config("gamma grid needs count >= 1".into()));
                }
                bicusp::scenario::linspace(*from, *to, *count)
            }
        };
        if v.is_empty() || v.iter().any(|g| !g.is_finite()) {
            return Err(CliError::Config("gamma values must be finite and non-empty".into()));
        }
        Ok(v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSection {
    pub tol: f64,
    pub max_iter: usize,
    pub mode: SolveMode,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverOptions::default();
        Self {
            tol: d.tol,
            max_iter: d.max_iter,
            mode: d.mode,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContinuationSection {
    pub step0: f64,
    pub max_points: usize,
}

impl Default for ContinuationSection {
    fn default() -> Self {
        let d = ContinuationOptions::default();
        Self {
            step0: d.step0,
            max_points: d.max_points,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputSection {
    /// Output directory.
    pub path: PathBuf,
    /// Format of tabular outputs.
    pub format: Format,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            path: PathBuf::from("bicusp-out"),
            format: Format::Csv,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeedMode {
    /// Seeds from the linear problem (`Na = 0`), continued to the target `Na`.
    #[default]
    Linear,
    /// Initial guess read from a state JSON file.
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NormalFormSection {
    pub rho: Vec<f64>,
    pub sigma: (f64, f64),
    pub samples: usize,
}

impl Default for NormalFormSection {
    fn default() -> Self {
        Self {
            rho: vec![-0.3, 0.0, 0.3],
            sigma: (-1.0, 1.0),
            samples: 201,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PropagateSection {
    /// State JSON holding the initial ansatz.
    pub initial: Option<PathBuf>,
    pub t_final: f64,
    pub stride: f64,
    pub tol: f64,
}

impl Default for PropagateSection {
    fn default() -> Self {
        Self {
            initial: None,
            t_final: 10.0,
            stride: 0.1,
            tol: 1e-10,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub potential: PotentialConfig,
    pub na: Option<NaSpec>,
    pub gamma: Option<GammaSpec>,
    pub solver: SolverSection,
    pub continuation: ContinuationSection,
    pub output: OutputSection,
    pub seed_mode: SeedMode,
    pub bicomplex: bool,
    pub jobs: Option<usize>,
    pub normal_form: NormalFormSection,
    pub propagate: PropagateSection,
}

/// Command-line overrides applied on top of the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub na: Option<f64>,
    pub gamma: Option<Vec<f64>>,
    pub out: Option<PathBuf>,
    pub bicomplex: bool,
    pub tol: Option<f64>,
    pub jobs: Option<usize>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        let mut cfg: RunConfig = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => RunConfig::default(),
        };
        if let Some(na) = overrides.na {
            cfg.na = Some(NaSpec::Scalar(na));
        }
        if let Some(g) = &overrides.gamma {
            cfg.gamma = Some(match g.as_slice() {
                [one] => GammaSpec::Scalar(*one),
                many => GammaSpec::List(many.to_vec()),
            });
        }
        if let Some(out) = &overrides.out {
            cfg.output.path = out.clone();
        }
        cfg.bicomplex |= overrides.bicomplex;
        if let Some(tol) = overrides.tol {
            cfg.solver.tol = tol;
        }
        if overrides.jobs.is_some() {
            cfg.jobs = overrides.jobs;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        self.potential.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if !(self.solver.tol > 0.0) {
            return Err(CliError::Config("solver.tol must be positive".into()));
        }
        if self.solver.max_iter == 0 {
            return Err(CliError::Config("solver.max_iter must be positive".into()));
        }
        if !(self.continuation.step0 > 0.0) || self.continuation.max_points < 2 {
            return Err(CliError::Config(
                "continuation needs step0 > 0 and max_points >= 2".into(),
            ));
        }
        if self.jobs == Some(0) {
            return Err(CliError::Config("jobs must be at least 1".into()));
        }
        Ok(())
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.solver.tol,
            max_iter: self.solver.max_iter,
            mode: self.solver.mode,
            ..SolverOptions::default()
        }
    }

    pub fn continuation_options(&self) -> ContinuationOptions {
        ContinuationOptions {
            step0: self.continuation.step0,
            max_points: self.continuation.max_points,
            tol: self.solver.tol,
            ..ContinuationOptions::default()
        }
    }

    pub fn scalar_na(&self) -> Result<f64, CliError> {
        match self.na {
            Some(NaSpec::Scalar(na)) if na.is_finite() => Ok(na),
            Some(NaSpec::Scalar(_)) => Err(CliError::Config("na must be finite".into())),
            Some(NaSpec::Sweep { .. }) => Err(CliError::Config("this command needs a scalar na".into())),
            None => Ok(0.0),
        }
    }

    pub fn scalar_gamma(&self) -> Result<f64, CliError> {
        match &self.gamma {
            None => Ok(self.potential.gamma),
            Some(spec) => match spec.values()?.as_slice() {
                [g] => Ok(*g),
                _ => Err(CliError::Config("this command needs a scalar gamma".into())),
            },
        }
    }

    pub fn gamma_values(&self) -> Result<Vec<f64>, CliError> {
        match &self.gamma {
            None => Ok(vec![self.potential.gamma]),
            Some(spec) => spec.values(),
        }
    }

    /// Sweep window and initial step; the default window when no sweep is set.
    pub fn na_sweep(&self) -> Result<((f64, f64), Option<f64>), CliError> {
        match self.na {
            Some(NaSpec::Sweep { from, to, step0 }) => {
                if !from.is_finite() || !to.is_finite() || from == to {
                    return Err(CliError::Config("na sweep needs finite, distinct from/to".into()));
                }
                if step0.is_some_and(|s| !(s > 0.0)) {
                    return Err(CliError::Config("na sweep step0 must be positive".into()));
                }
                Ok(((from, to), step0))
            }
            Some(NaSpec::Scalar(_)) => Err(CliError::Config("this command needs an na sweep {from, to}".into())),
            None => Ok((bicusp::scenario::DEFAULT_WINDOW, None)),
        }
    }
}
