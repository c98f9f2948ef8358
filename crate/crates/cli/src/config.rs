//! Flat run configuration.
//!
//! Files hold `key = value` lines; `#` starts a comment. Layers apply in
//! order: built-in defaults, the config file, `DQN_<KEY>` environment
//! variables, then `--set key=value` flags. A value of `auto` takes the
//! per-environment default listed in [`KEYS`].

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use dqn_core::agent::{AgentConfig, AllocMode, EpsilonSchedule, TrainSchedule};
use dqn_core::env::EnvKind;
use dqn_core::neural::InitScheme;
use dqn_core::optim::{ClipMode, OptimizerConfig, Variant};
use dqn_core::proto::Endpoint;
use dqn_core::wrappers::WrapperConfig;
use thiserror::Error;

/// Prefix for environment-variable overrides: `DQN_LEARNING_RATE=0.001`.
pub const ENV_PREFIX: &str = "DQN_";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{origin}: unknown key `{key}`")]
    UnknownKey { key: String, origin: String },

    #[error("missing required key `{0}`")]
    Missing(&'static str),

    #[error("key `{key}`: invalid value `{value}` ({reason})")]
    Invalid { key: String, value: String, reason: String },

    #[error("{origin} line {line}: expected `key = value`, got `{text}`")]
    Syntax { origin: String, line: usize, text: String },

    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

pub struct KeyDoc {
    pub key: &'static str,
    /// Default value; `auto` resolves per environment (see `auto`).
    pub default: &'static str,
    pub auto: Option<(&'static str, &'static str)>,
    pub doc: &'static str,
}

const fn key(key: &'static str, default: &'static str, doc: &'static str) -> KeyDoc {
    KeyDoc { key, default, auto: None, doc }
}

/// `auto` with (gridworld, minibreakout) values.
const fn auto(key: &'static str, gridworld: &'static str, breakout: &'static str, doc: &'static str) -> KeyDoc {
    KeyDoc { key, default: "auto", auto: Some((gridworld, breakout)), doc }
}

/// Every accepted key with its default. `epsilon_anneal_steps` and
/// `learning_rate` have computed `auto` values, noted in their docs.
pub const KEYS: &[KeyDoc] = &[
    key("env", "", "gridworld | minibreakout (required)"),
    key("remote", "", "train against a served env: unix:<path> | fifo:<dir>; empty = in-process"),
    key("precision", "f32", "f32 | f64"),
    key("topology", "toy", "toy | linear | full descriptor, e.g. in=4x32x32;conv8k4s2;relu;dense4"),
    key("init", "fan_in_uniform", "fan_in_uniform | zero"),
    auto("action_repeat", "1", "2", "frames per agent step"),
    auto("history_len", "1", "4", "frames per network input"),
    auto("noop_max", "0", "30", "up to this many no-ops at game start"),
    auto("life_loss_terminal", "false", "true", "treat a lost life as terminal while training"),
    key("max_pool", "false", "max over the last two frames of each repeat window"),
    auto("total_steps", "50000", "200000", "agent steps"),
    auto("warmup_steps", "1000", "5000", "random-policy steps before learning"),
    key("update_frequency", "4", "agent steps per gradient step"),
    auto("target_sync", "500", "1000", "agent steps between target-network syncs"),
    auto("eval_interval", "2500", "10000", "agent steps between evaluations"),
    key("eval_episodes", "30", "games per evaluation"),
    key("eval_epsilon", "0.05", "exploration during evaluation"),
    key("batch_size", "32", "minibatch size"),
    key("epsilon_start", "1.0", "exploration at the end of warmup"),
    key("epsilon_end", "0.1", "exploration after annealing"),
    auto("epsilon_anneal_steps", "5000", "", "annealing length; minibreakout auto = total_steps / 10"),
    auto("discount", "0.9", "0.99", "reward discount"),
    key("replay_capacity", "50000", "experiences kept"),
    key("optimizer", "rmsprop_deepmind", "sgd | rmsprop_hinton | rmsprop_deepmind"),
    auto("learning_rate", "0.001", "0.001", "auto is the env value for rmsprop_deepmind, else the optimizer default"),
    key("rms_decay", "0.95", "squared-gradient average decay"),
    key("momentum_decay", "0.95", "gradient average decay (rmsprop_deepmind)"),
    auto("rms_epsilon", "0.01", "0.00001", "added under the square root"),
    key("clip", "td_error", "td_error | param_grad | none"),
    key("reward_clip", "false", "clamp rewards to [-1, 1] before storing"),
    auto("max_episode_steps", "100", "0", "truncate episodes and eval games; 0 = never"),
    key("seed", "0", "master seed"),
    key("out_dir", "dqn-run", "output directory"),
    key("alloc", "preallocated", "preallocated | naive (benchmark baseline)"),
];

fn lookup(key: &str) -> Option<&'static KeyDoc> {
    KEYS.iter().find(|k| k.key == key)
}

/// Unresolved key/value layers.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn set(&mut self, key: &str, value: &str, origin: &str) -> Result<(), ConfigError> {
        if lookup(key).is_none() {
            return Err(ConfigError::UnknownKey { key: key.into(), origin: origin.into() });
        }
        self.values.insert(key.into(), value.trim().into());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// Applies `key = value` lines.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<(), ConfigError> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ConfigError::Syntax { origin: origin.into(), line: i + 1, text: line.into() });
            };
            self.set(k.trim(), v, &format!("{origin} line {}", i + 1))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        self.apply_text(&text, &path.display().to_string())
    }

    /// `DQN_<KEY>` variables; any other `DQN_` variable is an error.
    pub fn apply_env(&mut self, vars: impl IntoIterator<Item = (String, String)>) -> Result<(), ConfigError> {
        for (name, value) in vars {
            if let Some(k) = name.strip_prefix(ENV_PREFIX) {
                // DQN_NO_SIMD is a kernel switch, not a config key
                if k == "NO_SIMD" {
                    continue;
                }
                self.set(&k.to_ascii_lowercase(), &value, &format!("environment variable {name}"))?;
            }
        }
        Ok(())
    }

    /// `key=value` command-line overrides.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<(), ConfigError> {
        for o in overrides {
            let Some((k, v)) = o.split_once('=') else {
                return Err(ConfigError::Syntax { origin: "--set".into(), line: 0, text: o.clone() });
            };
            self.set(k.trim(), v, "--set")?;
        }
        Ok(())
    }

    /// Defaults, then `file`, then the process environment, then `overrides`.
    pub fn load(file: Option<&Path>, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut raw = Self::default();
        if let Some(f) = file {
            raw.apply_file(f)?;
        }
        raw.apply_env(std::env::vars())?;
        raw.apply_overrides(overrides)?;
        Ok(raw)
    }

    pub fn resolve(&self) -> Result<RunConfig, ConfigError> {
        RunConfig::resolve(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

/// A fully resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub env: EnvKind,
    pub remote: Option<Endpoint>,
    pub precision: Precision,
    pub topology: String,
    pub wrapper: WrapperConfig,
    pub agent: AgentConfig,
    pub out_dir: PathBuf,
    /// Every key with its concrete value, in [`KEYS`] order.
    pub resolved: Vec<(&'static str, String)>,
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::Invalid {
        key: key.into(),
        value: value.into(),
        reason: e.to_string(),
    })
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(ConfigError::Invalid { key: key.into(), value: value.into(), reason: "expected true or false".into() }),
    }
}

impl RunConfig {
    fn resolve(raw: &RawConfig) -> Result<Self, ConfigError> {
        let env_name = raw.get("env").filter(|v| !v.is_empty()).ok_or(ConfigError::Missing("env"))?;
        let env = EnvKind::parse(env_name).map_err(|e| ConfigError::Invalid {
            key: "env".into(),
            value: env_name.into(),
            reason: e.to_string(),
        })?;

        let mut values: BTreeMap<&'static str, String> = BTreeMap::new();
        for k in KEYS {
            let v = raw.get(k.key).unwrap_or(k.default);
            let v = match (v, k.auto) {
                ("auto", Some((g, b))) => match env {
                    EnvKind::GridWorld => g,
                    EnvKind::MiniBreakout => b,
                },
                _ => v,
            };
            values.insert(k.key, v.to_string());
        }
        // computed autos
        if values["epsilon_anneal_steps"].is_empty() {
            let total: u64 = parse("total_steps", &values["total_steps"])?;
            values.insert("epsilon_anneal_steps", (total / 10).to_string());
        }
        let variant: Variant = parse("optimizer", &values["optimizer"])?;
        if raw.get("learning_rate").is_some_and(|v| v != "auto") || variant == Variant::RmspropDeepmind {
            // keep the explicit or env-tuned value
        } else {
            values.insert("learning_rate", OptimizerConfig::for_variant(variant).learning_rate.to_string());
        }

        let v = |k: &str| values[k].as_str();
        let num = |k: &'static str| parse::<u64>(k, v(k));
        let real = |k: &'static str| parse::<f64>(k, v(k));
        let flag = |k: &'static str| parse_bool(k, v(k));

        let remote = match v("remote") {
            "" => None,
            s => Some(parse::<Endpoint>("remote", s)?),
        };
        let precision = match v("precision") {
            "f32" => Precision::F32,
            "f64" => Precision::F64,
            other => {
                return Err(ConfigError::Invalid { key: "precision".into(), value: other.into(), reason: "expected f32 or f64".into() })
            }
        };
        let alloc = match v("alloc") {
            "preallocated" => AllocMode::Preallocated,
            "naive" => AllocMode::Naive,
            other => {
                return Err(ConfigError::Invalid { key: "alloc".into(), value: other.into(), reason: "expected preallocated or naive".into() })
            }
        };
        let wrapper = WrapperConfig {
            action_repeat: num("action_repeat")? as usize,
            history_len: num("history_len")? as usize,
            noop_max: num("noop_max")? as usize,
            life_loss_terminal: flag("life_loss_terminal")?,
            max_pool: flag("max_pool")?,
            ..WrapperConfig::default()
        };
        let agent = AgentConfig {
            schedule: TrainSchedule {
                total_steps: num("total_steps")?,
                warmup_steps: num("warmup_steps")?,
                update_frequency: num("update_frequency")?,
                target_sync: num("target_sync")?,
                eval_interval: num("eval_interval")?,
                eval_episodes: num("eval_episodes")? as usize,
                eval_epsilon: real("eval_epsilon")?,
                batch_size: num("batch_size")? as usize,
            },
            epsilon: EpsilonSchedule {
                start: real("epsilon_start")?,
                end: real("epsilon_end")?,
                anneal_steps: num("epsilon_anneal_steps")?,
            },
            discount: real("discount")?,
            replay_capacity: num("replay_capacity")? as usize,
            optimizer: OptimizerConfig {
                variant,
                learning_rate: real("learning_rate")?,
                rms_decay: real("rms_decay")?,
                momentum_decay: real("momentum_decay")?,
                epsilon: real("rms_epsilon")?,
            },
            clip: parse::<ClipMode>("clip", v("clip"))?,
            reward_clip: flag("reward_clip")?,
            max_episode_steps: num("max_episode_steps")?,
            init: parse::<InitScheme>("init", v("init"))?,
            seed: num("seed")?,
            alloc,
        };
        let invalid = |e: dqn_core::Error| ConfigError::Invalid { key: "(schedule)".into(), value: String::new(), reason: e.to_string() };
        wrapper.validate().map_err(invalid)?;
        agent.validate().map_err(invalid)?;
        agent.optimizer.validate().map_err(invalid)?;

        let resolved = KEYS.iter().map(|k| (k.key, values[k.key].clone())).collect();
        Ok(Self {
            env,
            remote,
            precision,
            topology: v("topology").to_string(),
            wrapper,
            agent,
            out_dir: PathBuf::from(v("out_dir")),
            resolved,
        })
    }

    /// The resolved configuration as a loadable config file.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# dqn {} resolved configuration", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(out, "# csv schemas: {}", crate::schema::versions());
        for (k, v) in &self.resolved {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Same configuration with one key replaced.
    pub fn with(&self, key: &str, value: &str) -> Result<Self, ConfigError> {
        let mut raw = RawConfig::default();
        for (k, v) in &self.resolved {
            raw.set(k, v, "resolved")?;
        }
        raw.set(key, value, "override")?;
        raw.resolve()
    }
}
