use std::fs;
use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::acquisition::{Cost, TerminationRule};
use crate::data::{synthetic, PrepConfig, TaskDefinition};
use crate::eval::ImportanceConfig;
use crate::strategies::{PredictorConfig, StrategyConfig};

/// Input locations. Relative paths are resolved against the working
/// directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataPaths {
    /// Directory of variable tables written by `ingest`.
    pub variables: Option<PathBuf>,
    /// Dataset bundle written by `prepare`.
    pub bundle: Option<PathBuf>,
    /// Survey responses used to derive category costs.
    pub survey: Option<PathBuf>,
    /// Directory of strategy checkpoints written by `train`.
    pub checkpoints: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrid {
    pub budgets: Vec<Cost>,
    /// Also trace the point with every feature acquired.
    pub unlimited: bool,
    /// λ values to evaluate; empty means every trained policy.
    pub lambdas: Vec<f64>,
    pub confidence: Option<f64>,
    pub mc_samples: usize,
    /// Which split the curves are computed on.
    pub split: String,
    /// Episodes sampled for the acquisition order matrix.
    pub order_samples: usize,
    pub importance: ImportanceConfig,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid {
            budgets: [1, 2, 4, 6, 8, 10, 15, 20].map(Cost::from_units).to_vec(),
            unlimited: true,
            lambdas: Vec::new(),
            confidence: None,
            mc_samples: crate::nn::DEFAULT_MC_SAMPLES,
            split: "test".into(),
            order_samples: 200,
            importance: ImportanceConfig::default(),
        }
    }
}

/// One document configuring every subcommand. Command-line flags override
/// the values read from file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// `diabetes`, `heart`, `hypertension`, `custom`, or a synthetic task.
    pub task: String,
    /// Task definition used when `task = "custom"`.
    pub custom: Option<TaskDefinition>,
    /// Rows generated for synthetic tasks.
    pub synthetic_rows: usize,
    pub seed: Option<u64>,
    pub data: DataPaths,
    pub output: PathBuf,
    pub prep: PrepConfig,
    pub predictor: PredictorConfig,
    pub strategies: Vec<StrategyConfig>,
    /// Termination rule of interactive sessions and order matrices.
    pub rule: TerminationRule,
    pub sweep: SweepGrid,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            task: "diabetes".into(),
            custom: None,
            synthetic_rows: 2000,
            seed: None,
            data: DataPaths::default(),
            output: PathBuf::from("results"),
            prep: PrepConfig::default(),
            predictor: PredictorConfig::default(),
            strategies: Vec::new(),
            rule: TerminationRule::AllAcquired,
            sweep: SweepGrid::default(),
        }
    }
}

impl RunConfig {
    /// Reads TOML, or JSON when the file name ends in `.json`.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
        } else {
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
        }
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        self.seed.ok_or_else(|| CliError::Config("no seed given; pass --seed or set `seed` in the config".into()))
    }

    pub fn is_synthetic(&self) -> bool {
        synthetic::TASKS.contains(&self.task.as_str())
    }

    /// Definition of a survey-backed task.
    pub fn task_definition(&self) -> Result<TaskDefinition, CliError> {
        if self.task == "custom" {
            return self
                .custom
                .clone()
                .ok_or_else(|| CliError::Config("task `custom` needs a [custom] table".into()));
        }
        TaskDefinition::named(&self.task).ok_or_else(|| CliError::Config(format!("unknown task {:?}", self.task)))
    }

    /// Configured strategies, or the defaults for `names`. Names not
    /// configured explicitly fall back to their defaults.
    pub fn strategy_configs(&self, names: &[String]) -> Result<Vec<StrategyConfig>, CliError> {
        if names.is_empty() {
            if self.strategies.is_empty() {
                return Err(CliError::Config("no strategies configured; pass --strategy".into()));
            }
            return Ok(self.strategies.clone());
        }
        names
            .iter()
            .map(|n| {
                let canonical = StrategyConfig::default_for(n)
                    .ok_or_else(|| CliError::Config(format!("unknown strategy {n:?}")))?;
                Ok(self
                    .strategies
                    .iter()
                    .find(|s| s.name() == canonical.name())
                    .cloned()
                    .unwrap_or(canonical))
            })
            .collect()
    }

    /// Checks that the paths needed by a command exist.
    pub fn require(&self, path: Option<&PathBuf>, what: &str) -> Result<PathBuf, CliError> {
        let p = path.ok_or_else(|| CliError::Config(format!("no {what} given")))?;
        if !p.exists() {
            return Err(CliError::Config(format!("{what} {} does not exist", p.display())));
        }
        Ok(p.clone())
    }

    /// Copy with every path expressed relative to `base`, for manifests that
    /// must not depend on where a run was placed.
    pub fn relative_to(&self, base: &Path) -> RunConfig {
        let rel = |p: &Option<PathBuf>| p.as_ref().map(|p| relative_path(p, base));
        let mut c = self.clone();
        c.data = DataPaths {
            variables: rel(&self.data.variables),
            bundle: rel(&self.data.bundle),
            survey: rel(&self.data.survey),
            checkpoints: rel(&self.data.checkpoints),
        };
        c.output = relative_path(&self.output, base);
        c
    }
}

fn absolute(p: &Path) -> PathBuf {
    let abs = std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf());
    let mut out = PathBuf::new();
    for c in abs.components() {
        match c {
            Component::CurDir => {}
            Component::ParentDir => {
                out.pop();
            }
            other => out.push(other),
        }
    }
    out
}

/// `path` as seen from `base`, with `..` steps where needed.
pub fn relative_path(path: &Path, base: &Path) -> PathBuf {
    let (p, b) = (absolute(path), absolute(base));
    let pc: Vec<_> = p.components().collect();
    let bc: Vec<_> = b.components().collect();
    let common = pc.iter().zip(&bc).take_while(|(x, y)| x == y).count();
    if common == 0 {
        return p;
    }
    let mut out = PathBuf::new();
    for _ in common..bc.len() {
        out.push("..");
    }
    for c in &pc[common..] {
        out.push(c);
    }
    if out.as_os_str().is_empty() {
        out.push(".");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_paths() {
        assert_eq!(relative_path(Path::new("/a/b/data"), Path::new("/a/b/out/x")), PathBuf::from("../../data"));
        assert_eq!(relative_path(Path::new("/a/b"), Path::new("/a/b")), PathBuf::from("."));
        assert_eq!(relative_path(Path::new("/a/./c/../d"), Path::new("/a")), PathBuf::from("d"));
    }

    #[test]
    fn toml_round_trip() {
        let mut c = RunConfig { seed: Some(3), task: "informative".into(), ..Default::default() };
        c.strategies = vec![StrategyConfig::default_for("fact").unwrap(), StrategyConfig::default_for("rl").unwrap()];
        c.sweep.confidence = Some(0.9);
        let text = toml::to_string(&c).unwrap();
        assert_eq!(toml::from_str::<RunConfig>(&text).unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("tsak = \"diabetes\"").is_err());
    }

    #[test]
    fn configured_strategy_wins_over_default() {
        let text = "[[strategies]]\nkind = \"exhaustive\"\nbins = 4\n";
        let c: RunConfig = toml::from_str(text).unwrap();
        let got = c.strategy_configs(&["exhaustive".into(), "random".into()]).unwrap();
        assert_eq!(got[0], StrategyConfig::Exhaustive { bins: 4, neighbors: 50 });
        assert_eq!(got[1].name(), "random");
    }
}
