use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vqpd::instances::{Instance, InstanceDescriptor};
use vqpd::oracle::ReferenceSolution;
use vqpd::problem::config::load_problem;
use vqpd::problem::Problem;
use vqpd::solvers::{Algorithm, SolverConfig};

use crate::CliError;

/// Everything needed to reproduce one run.
///
/// ```toml
/// algorithm = "new-adaptive"
///
/// [instance]
/// name = "gmv-l2"
/// n = 50
/// seed = 7
///
/// [solver]
/// max_iters = 10000
/// stride = 100
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    /// Generated instance. Exactly one of `instance` and `problem_file`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<InstanceDescriptor>,
    /// TOML problem file, relative to the working directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem_file: Option<PathBuf>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Output directory; `--out` and `VQPD_OUT_DIR` take precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// File stem for the trace and summary; defaults to `<instance>-<algorithm>`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stem: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::NewConstant,
            instance: None,
            problem_file: None,
            solver: SolverConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

/// A problem ready to solve, with a closed-form reference when the
/// generator knows one.
pub struct Loaded {
    pub problem: Problem,
    pub reference: Option<ReferenceSolution>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Identifies the problem, for checking that compared runs agree.
    pub fn problem_key(&self) -> String {
        match (&self.instance, &self.problem_file) {
            (Some(d), _) => serde_json::to_string(d).unwrap_or_default(),
            (None, Some(p)) => p.display().to_string(),
            (None, None) => String::new(),
        }
    }

    pub fn problem_name(&self) -> String {
        match (&self.instance, &self.problem_file) {
            (Some(d), _) => d.name.clone(),
            (None, Some(p)) => p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default(),
            (None, None) => "problem".into(),
        }
    }

    pub fn stem(&self) -> String {
        self.output
            .stem
            .clone()
            .unwrap_or_else(|| format!("{}-{}", self.problem_name(), self.algorithm))
    }

    pub fn load(&self) -> Result<Loaded, CliError> {
        match (&self.instance, &self.problem_file) {
            (Some(_), Some(_)) => Err(CliError::Config(
                "give either an instance or a problem file, not both".into(),
            )),
            (None, None) => Err(CliError::Config("no instance or problem file given".into())),
            (Some(d), None) => {
                let Instance {
                    problem, reference, ..
                } = d.build().map_err(|e| CliError::Config(e.to_string()))?;
                Ok(Loaded { problem, reference })
            }
            (None, Some(path)) => {
                let problem = load_problem(path)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                Ok(Loaded {
                    problem,
                    reference: None,
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use vqpd::solvers::TargetGap;

    #[test]
    fn full_config_round_trips() {
        let mut instance = InstanceDescriptor::new("gmv-l1", 40, 9).with_b(1.5);
        instance.equality = true;
        let cfg = RunConfig {
            algorithm: Algorithm::YuNeely,
            instance: Some(instance),
            problem_file: None,
            solver: SolverConfig {
                max_iters: 1234,
                stride: 7,
                alpha: Some(0.1 + 0.2),
                start: Some(vec![1.0 / 3.0, -2e-17, 0.0]),
                diagnostics: true,
                record_wall_time: true,
                target: Some(TargetGap {
                    objective: 1e-6,
                    violation: 1e-5,
                }),
                step_size: Some(std::f64::consts::PI),
                lambda_max: Some(12.5),
                lambda_start: Some(vec![0.25, 0.75]),
                ..SolverConfig::default()
            },
            output: OutputConfig {
                dir: Some("runs/a".into()),
                stem: Some("first".into()),
            },
        };
        let text = cfg.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg, "{text}");
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = RunConfig::from_toml("algorithm = \"new-adaptive\"\nproblem_file = \"p.toml\"\n")
            .unwrap();
        assert_eq!(cfg.solver, SolverConfig::default());
        assert_eq!(cfg.stem(), "p-new-adaptive");
        let back = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_and_algorithms_are_rejected() {
        assert!(RunConfig::from_toml("algorithm = \"newton\"").is_err());
        assert!(RunConfig::from_toml("algorithm = \"yu-neely\"\nitters = 5").is_err());
    }

    #[test]
    fn instance_and_file_are_exclusive() {
        let cfg = RunConfig {
            instance: Some(InstanceDescriptor::new("qp1", 1, 0)),
            problem_file: Some("p.toml".into()),
            ..RunConfig::default()
        };
        assert!(matches!(cfg.load(), Err(CliError::Config(_))));
        assert!(matches!(
            RunConfig::default().load(),
            Err(CliError::Config(_))
        ));
    }
}
