//! Experiment configuration files.
//!
//! The format is TOML: top-level `key = value` pairs plus one
//! `[[strategy]]` table per exploration strategy. Every constraint is checked
//! at load time and all violations are reported together.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use toml::{Table, Value};

use crate::envs::EnvKind;
use crate::error::{EbeError, Result};
use crate::learners::{DqnSettings, OptimizerKind};
use crate::strategies::{EpsilonVariant, LinearSchedule, StrategyKind, DEFAULT_HASH_BITS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LearnerKind {
    Tabular,
    Dqn,
}

impl LearnerKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Tabular => "tabular",
            Self::Dqn => "dqn",
        }
    }
}

/// Training length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Budget {
    /// Checkpoints are indexed by training episode.
    Episodes(u64),
    /// Fixed environment-step epochs; checkpoints are indexed by epoch.
    Epochs { epochs: u64, steps_per_epoch: u64 },
}

impl Budget {
    /// Number of schedule units (episodes or epochs).
    pub fn units(self) -> u64 {
        match self {
            Self::Episodes(n) => n,
            Self::Epochs { epochs, .. } => epochs,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategySpec {
    pub name: String,
    pub kind: StrategyKind<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub environment: EnvKind,
    pub learner: LearnerKind,
    pub strategies: Vec<StrategySpec>,
    pub budget: Budget,
    pub max_episode_steps: usize,
    pub gamma: f64,
    pub alpha: f64,
    pub eval_episodes: usize,
    pub eval_every: u64,
    pub seeds: Vec<u64>,
    pub smoothing_weight: f64,
    pub output_dir: PathBuf,
    pub record_wall_time: bool,
    pub save_models: bool,
    pub dqn: DqnSettings,
}

const TOP_KEYS: &[&str] = &[
    "environment",
    "learner",
    "episodes",
    "epochs",
    "steps_per_epoch",
    "max_episode_steps",
    "gamma",
    "alpha",
    "eval_episodes",
    "eval_every",
    "seeds",
    "smoothing_weight",
    "output_dir",
    "record_wall_time",
    "save_models",
    "hidden",
    "optimizer",
    "learning_rate",
    "momentum",
    "replay_capacity",
    "batch_size",
    "target_sync",
    "train_start",
    "train_every",
    "strategy",
];

const STRATEGY_KEYS: &[&str] = &["name", "kind", "start", "end", "begin", "until", "variant", "beta", "bits"];

/// Reads a table while recording every problem it finds.
struct Fields<'a> {
    table: &'a Table,
    scope: String,
    errors: &'a mut Vec<String>,
}

impl<'a> Fields<'a> {
    fn err(&mut self, key: &str, msg: impl std::fmt::Display) {
        self.errors.push(format!("{}{key}: {msg}", self.scope));
    }

    fn check_unknown(&mut self, allowed: &[&str]) {
        let unknown: Vec<String> =
            self.table.keys().filter(|k| !allowed.contains(&k.as_str())).cloned().collect();
        for k in unknown {
            self.err(&k, "unknown key");
        }
    }

    fn raw(&self, key: &str) -> Option<&'a Value> {
        self.table.get(key)
    }

    fn require<T>(&mut self, key: &str, v: Option<T>) -> Option<T> {
        if v.is_none() && self.raw(key).is_none() {
            self.err(key, "missing required key");
        }
        v
    }

    fn string(&mut self, key: &str) -> Option<String> {
        match self.raw(key)? {
            Value::String(s) => Some(s.clone()),
            other => {
                self.err(key, format!("expected a string, found {}", other.type_str()));
                None
            }
        }
    }

    fn float(&mut self, key: &str) -> Option<f64> {
        match self.raw(key)? {
            Value::Float(f) => Some(*f),
            Value::Integer(i) => Some(*i as f64),
            other => {
                self.err(key, format!("expected a number, found {}", other.type_str()));
                None
            }
        }
    }

    fn uint(&mut self, key: &str) -> Option<u64> {
        match self.raw(key)? {
            Value::Integer(i) if *i >= 0 => Some(*i as u64),
            Value::Integer(i) => {
                self.err(key, format!("must be non-negative, got {i}"));
                None
            }
            other => {
                self.err(key, format!("expected an integer, found {}", other.type_str()));
                None
            }
        }
    }

    fn positive(&mut self, key: &str) -> Option<u64> {
        let v = self.uint(key)?;
        if v == 0 {
            self.err(key, "must be at least 1");
            return None;
        }
        Some(v)
    }

    fn boolean(&mut self, key: &str) -> Option<bool> {
        match self.raw(key)? {
            Value::Boolean(b) => Some(*b),
            other => {
                self.err(key, format!("expected true or false, found {}", other.type_str()));
                None
            }
        }
    }

    fn uint_list(&mut self, key: &str) -> Option<Vec<u64>> {
        match self.raw(key)? {
            Value::Array(items) => {
                let mut out = Vec::with_capacity(items.len());
                for item in items {
                    match item {
                        Value::Integer(i) if *i >= 0 => out.push(*i as u64),
                        other => {
                            self.err(key, format!("entries must be non-negative integers, found {other}"));
                            return None;
                        }
                    }
                }
                Some(out)
            }
            other => {
                self.err(key, format!("expected an array, found {}", other.type_str()));
                None
            }
        }
    }

    /// Number in `range`, described as `legal` in messages.
    fn ranged(&mut self, key: &str, ok: impl Fn(f64) -> bool, legal: &str) -> Option<f64> {
        let v = self.float(key)?;
        if !v.is_finite() || !ok(v) {
            self.err(key, format!("{v} is outside the legal range {legal}"));
            return None;
        }
        Some(v)
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EbeError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            EbeError::Config(msg) => EbeError::Config(format!("{}:\n{msg}", path.display())),
            other => other,
        })
    }

    /// Parses and validates; on failure the message lists every problem, one per line.
    pub fn parse(text: &str) -> Result<Self> {
        let table: Table = text.parse().map_err(|e: toml::de::Error| EbeError::Config(syntax_error(text, &e)))?;
        let mut errors = Vec::new();
        let cfg = Self::from_table(&table, &mut errors);
        match cfg {
            Some(cfg) if errors.is_empty() => Ok(cfg),
            _ if errors.is_empty() => Err(EbeError::Config("invalid configuration".into())),
            _ => Err(EbeError::Config(errors.join("\n"))),
        }
    }

    fn from_table(table: &Table, errors: &mut Vec<String>) -> Option<Self> {
        let mut f = Fields { table, scope: String::new(), errors };
        f.check_unknown(TOP_KEYS);

        let environment = f.string("environment");
        let environment = f.require("environment", environment).and_then(|name| {
            let env = EnvKind::parse(&name);
            if env.is_none() {
                f.err("environment", format!("unknown environment {name:?}; expected \"chain\" or \"mini_breakout\""));
            }
            env
        });
        let learner = f.string("learner");
        let learner = f.require("learner", learner).and_then(|name| match name.as_str() {
            "tabular" => Some(LearnerKind::Tabular),
            "dqn" => Some(LearnerKind::Dqn),
            _ => {
                f.err("learner", format!("unknown learner {name:?}; expected \"tabular\" or \"dqn\""));
                None
            }
        });
        if let (Some(EnvKind::MiniBreakout), Some(LearnerKind::Tabular)) = (environment, learner) {
            f.err("learner", "tabular learning needs an enumerable environment (chain)");
        }

        let episodes = f.positive("episodes");
        let epochs = f.positive("epochs");
        let steps_per_epoch = f.positive("steps_per_epoch");
        let budget = match (episodes, epochs, steps_per_epoch) {
            (Some(n), None, None) => Some(Budget::Episodes(n)),
            (None, Some(epochs), Some(steps_per_epoch)) => Some(Budget::Epochs { epochs, steps_per_epoch }),
            (None, Some(_), None) if f.raw("steps_per_epoch").is_none() => {
                f.err("steps_per_epoch", "missing required key (needed with epochs)");
                None
            }
            (Some(_), Some(_), _) => {
                f.err("episodes", "set either episodes or epochs, not both");
                None
            }
            (Some(_), None, Some(_)) => {
                f.err("steps_per_epoch", "only valid together with epochs");
                None
            }
            _ => {
                if ["episodes", "epochs"].iter().all(|k| f.raw(k).is_none()) {
                    f.err("episodes", "missing required key (or epochs with steps_per_epoch)");
                }
                None
            }
        };

        let max_episode_steps = f.positive("max_episode_steps");
        let max_episode_steps = f.require("max_episode_steps", max_episode_steps);
        let gamma = f.ranged("gamma", |g| g > 0.0 && g <= 1.0, "(0, 1]");
        let gamma = f.require("gamma", gamma);
        if environment == Some(EnvKind::Chain) && gamma == Some(1.0) {
            f.err("gamma", "1 is outside the legal range (0, 1) for the chain, whose oracle needs discounting");
        }
        let alpha = f.ranged("alpha", |a| a > 0.0 && a <= 1.0, "(0, 1]");
        let alpha = if learner == Some(LearnerKind::Tabular) { f.require("alpha", alpha) } else { alpha.or(Some(1.0)) };
        let eval_episodes = f.uint("eval_episodes").unwrap_or(10);
        let eval_every = f.positive("eval_every").unwrap_or(1);

        let seeds = f.uint_list("seeds");
        let seeds = f.require("seeds", seeds).and_then(|s| {
            if s.is_empty() {
                f.err("seeds", "seed list must not be empty");
                return None;
            }
            if s.iter().collect::<BTreeSet<_>>().len() != s.len() {
                f.err("seeds", "seed list contains duplicates");
                return None;
            }
            Some(s)
        });
        let smoothing_weight = f.ranged("smoothing_weight", |w| (0.0..1.0).contains(&w), "[0, 1)").or_else(|| {
            f.raw("smoothing_weight").is_none().then_some(0.99)
        });
        let output_dir = f.string("output_dir").unwrap_or_else(|| "results".into());
        let record_wall_time = f.boolean("record_wall_time").unwrap_or(false);
        let save_models = f.boolean("save_models").unwrap_or(true);
        let dqn = dqn_settings(&mut f, gamma.unwrap_or(0.99));

        let units = budget.map_or(1, Budget::units);
        let strategies = strategies(&mut f, units);

        Some(Self {
            environment: environment?,
            learner: learner?,
            strategies: strategies?,
            budget: budget?,
            max_episode_steps: max_episode_steps? as usize,
            gamma: gamma?,
            alpha: alpha?,
            eval_episodes: eval_episodes as usize,
            eval_every,
            seeds: seeds?,
            smoothing_weight: smoothing_weight?,
            output_dir: output_dir.into(),
            record_wall_time,
            save_models,
            dqn: dqn?,
        })
    }
}

fn dqn_settings(f: &mut Fields<'_>, gamma: f64) -> Option<DqnSettings> {
    let defaults = DqnSettings::default();
    let hidden = match f.uint_list("hidden") {
        Some(h) if h.contains(&0) => {
            f.err("hidden", "layer widths must be at least 1");
            None
        }
        Some(h) => Some(h.into_iter().map(|w| w as usize).collect()),
        None => f.raw("hidden").is_none().then(|| defaults.hidden.clone()),
    };
    let learning_rate = f.ranged("learning_rate", |v| v > 0.0, "(0, inf)");
    let momentum = f.ranged("momentum", |v| (0.0..1.0).contains(&v), "[0, 1)");
    let (default_lr, default_mu) = match defaults.optimizer {
        OptimizerKind::SgdMomentum { learning_rate, momentum } => (learning_rate, momentum),
        OptimizerKind::Adam { learning_rate, .. } => (learning_rate, 0.9),
    };
    let lr = learning_rate.unwrap_or(default_lr);
    let optimizer = match f.string("optimizer").as_deref() {
        None | Some("sgd_momentum") => Some(OptimizerKind::sgd_momentum(lr, momentum.unwrap_or(default_mu))),
        Some("adam") => {
            if f.raw("momentum").is_some() {
                f.err("momentum", "only valid with optimizer = \"sgd_momentum\"");
            }
            Some(OptimizerKind::adam(lr))
        }
        Some(other) => {
            f.err("optimizer", format!("unknown optimizer {other:?}; expected \"sgd_momentum\" or \"adam\""));
            None
        }
    };
    let replay_capacity = f.positive("replay_capacity").map_or(defaults.replay_capacity, |v| v as usize);
    let batch_size = f.positive("batch_size").map_or(defaults.batch_size, |v| v as usize);
    let target_sync = f.positive("target_sync").unwrap_or(defaults.target_sync);
    let train_start = f.uint("train_start").map_or(defaults.train_start, |v| v as usize);
    let train_every = f.positive("train_every").unwrap_or(defaults.train_every);
    if batch_size > replay_capacity {
        f.err("batch_size", format!("{batch_size} exceeds replay_capacity {replay_capacity}"));
    }
    Some(DqnSettings { hidden: hidden?, optimizer: optimizer?, gamma, replay_capacity, batch_size, target_sync, train_start, train_every })
}

fn strategies(f: &mut Fields<'_>, units: u64) -> Option<Vec<StrategySpec>> {
    let list = match f.raw("strategy") {
        None => {
            f.err("strategy", "missing required key (at least one [[strategy]] table)");
            return None;
        }
        Some(Value::Array(items)) if !items.is_empty() => items.clone(),
        Some(_) => {
            f.err("strategy", "expected one or more [[strategy]] tables");
            return None;
        }
    };
    let mut out = Vec::new();
    let mut names = BTreeSet::new();
    let mut ok = true;
    for (i, item) in list.iter().enumerate() {
        let Value::Table(t) = item else {
            f.err("strategy", format!("entry {} is not a table", i + 1));
            ok = false;
            continue;
        };
        let mut sf = Fields { table: t, scope: format!("strategy[{}].", i + 1), errors: f.errors };
        match strategy(&mut sf, units) {
            Some(spec) => {
                if !names.insert(spec.name.clone()) {
                    sf.err("name", format!("duplicate strategy name {:?}", spec.name));
                    ok = false;
                }
                out.push(spec);
            }
            None => ok = false,
        }
    }
    ok.then_some(out)
}

fn strategy(f: &mut Fields<'_>, units: u64) -> Option<StrategySpec> {
    f.check_unknown(STRATEGY_KEYS);
    let kind_name = f.string("kind");
    let kind_name = f.require("kind", kind_name)?;
    let name = f.string("name").unwrap_or_else(|| kind_name.clone());
    if name.is_empty() || name.contains([',', '"', '\n', '\r']) {
        f.err("name", format!("{name:?} must be non-empty without commas, quotes or newlines"));
        return None;
    }
    let allowed: &[&str] = match kind_name.as_str() {
        "greedy" | "ebe" | "ucb" => &[],
        "epsilon_greedy" | "boltzmann" => &["start", "end", "begin", "until", "variant"],
        "mbie_eb" | "pseudo_count" => &["beta"],
        "hash_count" => &["beta", "bits"],
        other => {
            f.err("kind", format!(
                "unknown strategy {other:?}; expected one of greedy, ebe, epsilon_greedy, boltzmann, ucb, mbie_eb, pseudo_count, hash_count"
            ));
            return None;
        }
    };
    for key in STRATEGY_KEYS.iter().filter(|k| !["name", "kind"].contains(k) && !allowed.contains(k)) {
        if f.raw(key).is_some() {
            f.err(key, format!("not used by strategy kind {kind_name:?}"));
        }
    }
    let kind = match kind_name.as_str() {
        "greedy" => StrategyKind::Greedy,
        "ebe" => StrategyKind::Ebe,
        "ucb" => StrategyKind::Ucb,
        "epsilon_greedy" => StrategyKind::EpsilonGreedy(schedule(f, units, |v| (0.0..=1.0).contains(&v), "[0, 1]")?),
        "boltzmann" => StrategyKind::Boltzmann(schedule(f, units, |v| v > 0.0, "(0, inf)")?),
        "mbie_eb" => StrategyKind::MbieEb { beta: required_beta(f)? },
        "pseudo_count" => StrategyKind::PseudoCount { beta: required_beta(f)? },
        "hash_count" => {
            let beta = required_beta(f);
            let bits = match f.uint("bits") {
                Some(b) if (1..=64).contains(&b) => Some(b as usize),
                Some(b) => {
                    f.err("bits", format!("{b} is outside the legal range [1, 64]"));
                    None
                }
                None => f.raw("bits").is_none().then_some(DEFAULT_HASH_BITS),
            };
            StrategyKind::HashCount { beta: beta?, bits: bits? }
        }
        _ => unreachable!("kind checked above"),
    };
    Some(StrategySpec { name, kind })
}

fn required_beta(f: &mut Fields<'_>) -> Option<f64> {
    let beta = f.ranged("beta", |b| b >= 0.0, "[0, inf)");
    f.require("beta", beta)
}

fn schedule(
    f: &mut Fields<'_>,
    units: u64,
    ok: impl Fn(f64) -> bool + Copy,
    legal: &str,
) -> Option<LinearSchedule<f64>> {
    if let Some(v) = f.string("variant") {
        for k in ["start", "end", "begin", "until"] {
            if f.raw(k).is_some() {
                f.err(k, "cannot be combined with variant");
            }
        }
        return match EpsilonVariant::parse(&v) {
            Some(variant) => Some(variant.schedule(units)),
            None => {
                f.err("variant", format!("unknown variant {v:?}; expected I, II or III"));
                None
            }
        };
    }
    if f.raw("variant").is_some() {
        return None;
    }
    let start = f.ranged("start", ok, legal);
    let start = f.require("start", start);
    let end = f.ranged("end", ok, legal);
    let end = f.require("end", end);
    let begin = f.uint("begin").or_else(|| f.raw("begin").is_none().then_some(0));
    let until = f.uint("until").or_else(|| f.raw("until").is_none().then_some(units));
    let (begin, until) = (begin?, until?);
    if begin > until {
        f.err("begin", format!("{begin} is after until = {until}"));
        return None;
    }
    LinearSchedule::new(start?, end?, begin, until).ok()
}

/// Formats a TOML syntax error with its line number.
fn syntax_error(text: &str, e: &toml::de::Error) -> String {
    match e.span() {
        Some(span) => {
            let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
            format!("line {line}: {}", e.message())
        }
        None => e.message().to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CHAIN: &str = r#"
environment = "chain"
learner = "tabular"
episodes = 200
max_episode_steps = 50
gamma = 0.9
alpha = 0.2
seeds = [0, 1, 2, 3, 4]

[[strategy]]
kind = "ebe"

[[strategy]]
name = "eps"
kind = "epsilon_greedy"
start = 1.0
end = 0.0
"#;

    #[test]
    fn parses_minimal_chain_config() {
        let cfg = ExperimentConfig::parse(CHAIN).unwrap();
        assert_eq!(cfg.environment, EnvKind::Chain);
        assert_eq!(cfg.budget, Budget::Episodes(200));
        assert_eq!(cfg.eval_episodes, 10);
        assert_eq!(cfg.smoothing_weight, 0.99);
        assert_eq!(cfg.strategies[0].name, "ebe");
        let StrategyKind::EpsilonGreedy(s) = &cfg.strategies[1].kind else { panic!() };
        assert_eq!((s.begin_step(), s.end_step()), (0, 200));
    }

    #[test]
    fn reports_every_problem() {
        let text = CHAIN.replace("gamma = 0.9", "gamma = 1.5").replace("seeds = [0, 1, 2, 3, 4]", "colour = 3");
        let EbeError::Config(msg) = ExperimentConfig::parse(&text).unwrap_err() else { panic!() };
        assert!(msg.contains("gamma: 1.5 is outside the legal range (0, 1]"), "{msg}");
        assert!(msg.contains("seeds: missing required key"), "{msg}");
        assert!(msg.contains("colour: unknown key"), "{msg}");
        assert_eq!(msg.lines().count(), 3, "{msg}");
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let text = "environment = \"chain\"\ngamma = = 3\n";
        let EbeError::Config(msg) = ExperimentConfig::parse(text).unwrap_err() else { panic!() };
        assert!(msg.starts_with("line 2:"), "{msg}");
    }

    #[test]
    fn strategy_errors_are_scoped() {
        let text = format!("{CHAIN}\n[[strategy]]\nkind = \"mbie_eb\"\nbits = 3\n");
        let EbeError::Config(msg) = ExperimentConfig::parse(&text).unwrap_err() else { panic!() };
        assert!(msg.contains("strategy[3].bits: not used"), "{msg}");
        assert!(msg.contains("strategy[3].beta: missing required key"), "{msg}");
    }

    #[test]
    fn epochs_and_variants() {
        let text = r#"
environment = "mini_breakout"
learner = "dqn"
epochs = 20
steps_per_epoch = 1000
max_episode_steps = 200
gamma = 0.99
seeds = [1]
optimizer = "adam"
learning_rate = 0.0005

[[strategy]]
name = "eps_I"
kind = "epsilon_greedy"
variant = "I"
"#;
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.budget, Budget::Epochs { epochs: 20, steps_per_epoch: 1000 });
        assert_eq!(cfg.dqn.optimizer, OptimizerKind::adam(0.0005));
        assert_eq!(cfg.dqn.gamma, 0.99);
        let StrategyKind::EpsilonGreedy(s) = &cfg.strategies[0].kind else { panic!() };
        assert_eq!(s.end_step(), 600);
    }

    #[test]
    fn rejects_duplicates_and_empty_seeds() {
        let text = CHAIN.replace("seeds = [0, 1, 2, 3, 4]", "seeds = []").replace("name = \"eps\"", "name = \"ebe\"");
        let EbeError::Config(msg) = ExperimentConfig::parse(&text).unwrap_err() else { panic!() };
        assert!(msg.contains("seeds: seed list must not be empty"), "{msg}");
        assert!(msg.contains("duplicate strategy name"), "{msg}");
    }
}
