use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::agents::{BehaviorKind, GolfConfig, LsviConfig, UcbviConfig, AGENT_NAMES};
use crate::env::{BlockParams, ForestParams, TetrisConfig, ENV_NAMES};
use crate::error::{Error, Result};

/// Metric names accepted in `metrics`.
pub const METRIC_NAMES: [&str; 7] = [
    "coverage",
    "visits",
    "avg_reward",
    "regret",
    "eig_coverage",
    "confidence_set",
    "latent_coverage",
];

/// Which plots and CSV files to write.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Svg,
    #[default]
    Both,
}

impl OutputFormat {
    pub fn csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }

    pub fn svg(self) -> bool {
        matches!(self, OutputFormat::Svg | OutputFormat::Both)
    }
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "svg" => Ok(OutputFormat::Svg),
            "both" => Ok(OutputFormat::Both),
            _ => Err(Error::UnknownName {
                kind: "output format",
                name: s.into(),
                known: "csv, svg, both".into(),
            }),
        }
    }
}

/// A registered name plus free-form parameters decoded once the name is known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Component {
    pub name: String,
    #[serde(default = "empty_object")]
    pub params: Value,
}

fn empty_object() -> Value {
    Value::Object(Default::default())
}

/// Parameters of a random tabular environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomParams {
    pub num_states: usize,
    pub num_actions: usize,
    pub horizon: usize,
    pub sparsity: f64,
    pub mdp_seed: u64,
}

impl Default for RandomParams {
    fn default() -> Self {
        Self {
            num_states: 5,
            num_actions: 2,
            horizon: 10,
            sparsity: 0.5,
            mdp_seed: 0,
        }
    }
}

/// How the offline/online split is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PartitionSpec {
    /// Tabular: occupancy threshold, default `1 / (S A)`.
    pub threshold: Option<f64>,
    /// Linear: rank of the subspace estimated from the offline features.
    pub rank: Option<usize>,
    /// Linear: how many leading directions form the offline side.
    pub split: Option<usize>,
}

/// Typed environment parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvSpec {
    Forest(ForestParams),
    Tetris(TetrisConfig),
    Random(RandomParams),
    Block(BlockParams),
}

/// Typed agent hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub enum AgentSpec {
    Ucbvi(UcbviConfig),
    LsviUcb(LsviConfig),
    DiscGolf(GolfConfig),
}

impl AgentSpec {
    pub fn name(&self) -> &'static str {
        match self {
            AgentSpec::Ucbvi(_) => "ucbvi",
            AgentSpec::LsviUcb(_) => "lsvi_ucb",
            AgentSpec::DiscGolf(_) => "disc_golf",
        }
    }
}

/// An experiment as written in a TOML or JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub environment: Component,
    pub agent: Component,
    #[serde(default = "default_behaviors")]
    pub behaviors: Vec<String>,
    pub n_off: usize,
    pub n_on: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub partition: PartitionSpec,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<String>,
}

fn default_behaviors() -> Vec<String> {
    vec!["uniform".into()]
}

fn default_trials() -> usize {
    1
}

fn default_metrics() -> Vec<String> {
    vec!["avg_reward".into()]
}

fn decode<T: serde::de::DeserializeOwned>(what: &str, value: &Value) -> Result<T> {
    serde_json::from_value(value.clone()).map_err(|e| Error::Config(format!("{what} params: {e}")))
}

/// A checked config with typed components.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    pub raw: ExperimentConfig,
    pub env: EnvSpec,
    pub agent: AgentSpec,
    pub behaviors: Vec<BehaviorKind>,
}

impl ExperimentConfig {
    /// Parses TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid JSON config: {e}")))
        } else {
            toml::from_str(text).map_err(|e| Error::Config(format!("invalid TOML config: {e}")))
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot encode config: {e}")))
    }

    /// Checks names, ranges and metric/agent compatibility.
    pub fn resolve(&self) -> Result<ResolvedConfig> {
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return Err(Error::Config(format!(
                "experiment name `{}` must be nonempty and use only letters, digits, `_` and `-`",
                self.name
            )));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.n_on == 0 {
            return Err(Error::Config("n_on must be at least 1".into()));
        }
        let env = match self.environment.name.as_str() {
            "forest" => {
                let p: ForestParams = decode("forest", &self.environment.params)?;
                p.validate()?;
                EnvSpec::Forest(p)
            }
            "tetris" => {
                let p: TetrisConfig = decode("tetris", &self.environment.params)?;
                p.validate()?;
                EnvSpec::Tetris(p)
            }
            "random" => EnvSpec::Random(decode("random", &self.environment.params)?),
            "block" => EnvSpec::Block(decode("block", &self.environment.params)?),
            other => {
                return Err(Error::UnknownName {
                    kind: "environment",
                    name: other.into(),
                    known: ENV_NAMES.join(", "),
                })
            }
        };
        let agent = match self.agent.name.as_str() {
            "ucbvi" => AgentSpec::Ucbvi(decode("ucbvi", &self.agent.params)?),
            "lsvi_ucb" => AgentSpec::LsviUcb(decode("lsvi_ucb", &self.agent.params)?),
            "disc_golf" => AgentSpec::DiscGolf(decode("disc_golf", &self.agent.params)?),
            other => {
                return Err(Error::UnknownName {
                    kind: "agent",
                    name: other.into(),
                    known: AGENT_NAMES.join(", "),
                })
            }
        };
        if self.behaviors.is_empty() {
            return Err(Error::Config("at least one behavior policy is required".into()));
        }
        let behaviors = self
            .behaviors
            .iter()
            .map(|b| b.parse())
            .collect::<Result<Vec<BehaviorKind>>>()?;
        for m in &self.metrics {
            if !METRIC_NAMES.contains(&m.as_str()) {
                return Err(Error::UnknownName {
                    kind: "metric",
                    name: m.clone(),
                    known: METRIC_NAMES.join(", "),
                });
            }
        }

        let tabular = matches!(env, EnvSpec::Forest(_) | EnvSpec::Random(_));
        let incompatible = |what: &str| Err(Error::Config(format!("{what} with environment `{}`", self.environment.name)));
        match (&agent, &env) {
            (AgentSpec::Ucbvi(_), EnvSpec::Tetris(_)) => return incompatible("ucbvi needs a tabular state space; it cannot run"),
            (AgentSpec::DiscGolf(_), _) if !tabular => {
                return incompatible("disc_golf needs a known tabular MDP to build its function class; it cannot run")
            }
            _ => {}
        }
        if matches!(env, EnvSpec::Tetris(_)) && behaviors.iter().any(|b| *b != BehaviorKind::Uniform) {
            return incompatible("only the uniform behavior policy is available (no optimal values)");
        }
        for m in &self.metrics {
            let ok = match m.as_str() {
                "coverage" => tabular && !matches!(agent, AgentSpec::LsviUcb(_)),
                "eig_coverage" => matches!(agent, AgentSpec::LsviUcb(_)),
                "confidence_set" => matches!(agent, AgentSpec::DiscGolf(_)),
                "latent_coverage" => matches!(env, EnvSpec::Block(_)),
                "visits" => !matches!(env, EnvSpec::Tetris(_)),
                "regret" => !matches!(env, EnvSpec::Tetris(_)),
                _ => true,
            };
            if !ok {
                return Err(Error::Config(format!(
                    "metric `{m}` is not available for agent `{}` on environment `{}`",
                    self.agent.name, self.environment.name
                )));
            }
        }
        if let Some(t) = self.partition.threshold {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Config(format!("partition threshold must lie in [0, 1], got {t}")));
            }
        }
        if let (Some(r), Some(k)) = (self.partition.rank, self.partition.split) {
            if k > r {
                return Err(Error::Config(format!("partition split {k} exceeds rank {r}")));
            }
        }
        Ok(ResolvedConfig {
            raw: self.clone(),
            env,
            agent,
            behaviors,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "smoke"
n_off = 5
n_on = 3

[environment]
name = "forest"

[agent]
name = "ucbvi"
params = { bonus_scale = 2.0 }
"#;

    #[test]
    fn toml_and_json_agree() {
        let a = ExperimentConfig::parse(MINIMAL).unwrap();
        let json = serde_json::to_string(&a).unwrap();
        let b = ExperimentConfig::parse(&json).unwrap();
        assert_eq!(a, b);
        let r = a.resolve().unwrap();
        assert_eq!(r.agent, AgentSpec::Ucbvi(UcbviConfig { bonus_scale: 2.0, ..UcbviConfig::default() }));
        assert_eq!(r.behaviors, vec![BehaviorKind::Uniform]);
        assert_eq!(ExperimentConfig::parse(&a.to_toml().unwrap()).unwrap(), a);
    }

    #[test]
    fn unknown_agent_is_named() {
        let text = MINIMAL.replace("\"ucbvi\"", "\"ucbvii\"");
        let err = ExperimentConfig::parse(&text).unwrap().resolve().unwrap_err();
        assert!(err.is_config_error());
        assert!(err.to_string().contains("ucbvii"));
    }

    #[test]
    fn unknown_params_are_rejected() {
        let text = MINIMAL.replace("bonus_scale", "bonus_scael");
        assert!(ExperimentConfig::parse(&text).unwrap().resolve().is_err());
    }

    #[test]
    fn incompatible_combinations() {
        let text = MINIMAL.replace("\"forest\"", "\"tetris\"");
        assert!(ExperimentConfig::parse(&text).unwrap().resolve().is_err());
        let text = MINIMAL.replace("n_on = 3", "n_on = 3\nmetrics = [\"eig_coverage\"]");
        assert!(ExperimentConfig::parse(&text).unwrap().resolve().is_err());
        let text = MINIMAL.replace("n_on = 3", "n_on = 0");
        assert!(ExperimentConfig::parse(&text).unwrap().resolve().is_err());
    }
}
