//! Multi-seed training sweeps.

use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{Budget, ExperimentConfig, LearnerKind, StrategySpec};
use super::plot::{ema_smooth, render_curves, PlotOptions};
use super::record::{csv_string, write_atomic, Phase, RecordSink, RunRow};
use crate::entropy::{argmax, mean_episode_entropy, scaled_entropy, ScaledEntropy};
use crate::envs::{fnv1a, ChainEnv, EnvKind, Environment, CHAIN_STATES};
use crate::error::{EbeError, Result};
use crate::learners::{squared_error, value_iteration_oracle, DqnAgent, QModel, QTable, Transition, VecTransition, Workspace};
use crate::strategies::{LinearSchedule, StateRef, Strategy, StrategyKind};

/// Environment variable capping sweep parallelism.
pub const THREADS_ENV: &str = "EBE_THREADS";
const ORACLE_TOLERANCE: f64 = 1e-12;
const EVAL_SEED_SALT: u64 = 0x5eed_e7a1_0000_0001;

/// Learner owned by a single cell.
#[derive(Debug, Clone)]
pub enum Learner {
    Tabular(QTable<f64>),
    Dqn(Box<DqnAgent<f64>>),
}

impl Learner {
    pub fn build(cfg: &ExperimentConfig, env: &dyn Environment, seed: u64) -> Result<Self> {
        match cfg.learner {
            LearnerKind::Tabular => {
                let states = match cfg.environment {
                    EnvKind::Chain => CHAIN_STATES,
                    EnvKind::MiniBreakout => return Err(EbeError::Config("tabular learner needs the chain".into())),
                };
                Ok(Self::Tabular(QTable::new(states, env.num_actions(), cfg.alpha, cfg.gamma)?))
            }
            LearnerKind::Dqn => {
                let mut init = ChaCha8Rng::seed_from_u64(seed);
                init.set_stream(1);
                let settings = crate::learners::DqnSettings { gamma: cfg.gamma, ..cfg.dqn.clone() };
                Ok(Self::Dqn(Box::new(DqnAgent::new(env.observation_dim(), env.num_actions(), settings, &mut init)?)))
            }
        }
    }

    /// Q-values in the environment's current state; never mutates the learner.
    pub fn q_values(&self, env: &dyn Environment, obs: &[f64], ws: &mut Workspace<f64>) -> Result<Vec<f64>> {
        match self {
            Self::Tabular(t) => {
                let s = env.state_index().ok_or(EbeError::Empty("tabular state index"))?;
                Ok(t.row(s).to_vec())
            }
            Self::Dqn(agent) => Ok(agent.online().forward_with(obs, ws)?.to_vec()),
        }
    }

    pub fn model(&self) -> QModel<f64> {
        match self {
            Self::Tabular(t) => QModel::Table(t.clone()),
            Self::Dqn(agent) => QModel::Network(agent.online().clone()),
        }
    }

    /// Chain Q-table implied by the learner, for the squared-error metric.
    fn chain_table(&self, oracle: &QTable<f64>) -> Result<QTable<f64>> {
        match self {
            Self::Tabular(t) => Ok(t.clone()),
            Self::Dqn(agent) => {
                let mut values = Vec::with_capacity(CHAIN_STATES * 2);
                for s in 0..CHAIN_STATES {
                    values.extend(agent.online().forward(&ChainEnv::one_hot(s))?);
                }
                QTable::from_values(CHAIN_STATES, 2, values, oracle.alpha(), oracle.gamma())
            }
        }
    }
}

fn rescale_kind(kind: &StrategyKind<f64>, factor: u64) -> StrategyKind<f64> {
    let r = |s: &LinearSchedule<f64>| s.rescaled(factor);
    match kind {
        StrategyKind::EpsilonGreedy(s) => StrategyKind::EpsilonGreedy(r(s)),
        StrategyKind::Boltzmann(s) => StrategyKind::Boltzmann(r(s)),
        other => other.clone(),
    }
}

/// Greedy rollouts under `q`; returns (mean reward, mean steps, mean H₀).
pub fn evaluate_with(
    mut q: impl FnMut(&dyn Environment, &[f64]) -> Result<Vec<f64>>,
    env: &mut dyn Environment,
    episodes: usize,
    max_steps: usize,
) -> Result<(f64, f64, f64)> {
    let (mut reward, mut steps, mut h0) = (0.0, 0.0, 0.0);
    for _ in 0..episodes {
        let mut obs = env.reset();
        let mut entropies = Vec::new();
        let mut total = 0.0;
        let mut n = 0;
        loop {
            let values = q(env, &obs)?;
            entropies.push(scaled_entropy(&values)?);
            let r = env.step(argmax(&values))?;
            total += r.reward;
            n += 1;
            obs = r.observation;
            if r.terminal || r.truncated || n >= max_steps {
                break;
            }
        }
        reward += total;
        steps += n as f64;
        h0 += mean_episode_entropy(&entropies)?;
    }
    let k = episodes.max(1) as f64;
    Ok((reward / k, steps / k, h0 / k))
}

/// Greedy rollouts of a learner; the learner is not modified.
pub fn evaluate(learner: &Learner, env: &mut dyn Environment, episodes: usize, max_steps: usize) -> Result<(f64, f64, f64)> {
    let mut ws = Workspace::default();
    evaluate_with(|env, obs| learner.q_values(env, obs, &mut ws), env, episodes, max_steps)
}

struct EpisodeStats {
    reward: f64,
    steps: usize,
    h0: f64,
    wall_ms: f64,
}

/// Training state of one cell between environment steps.
struct Trainer<'a> {
    cfg: &'a ExperimentConfig,
    env: Box<dyn Environment + Send>,
    learner: Learner,
    strategy: Strategy<f64>,
    rng: ChaCha8Rng,
    ws: Workspace<f64>,
    obs: Vec<f64>,
    episode_reward: f64,
    episode_steps: usize,
    entropies: Vec<ScaledEntropy<f64>>,
    started: Instant,
    total_steps: u64,
}

impl Trainer<'_> {
    /// One environment step; returns stats when an episode ends.
    fn step(&mut self, schedule_t: u64) -> Result<Option<EpisodeStats>> {
        let env = self.env.as_mut();
        let q = self.learner.q_values(env, &self.obs, &mut self.ws)?;
        self.entropies.push(scaled_entropy(&q)?);
        let state = StateRef { key: env.state_key(), features: &self.obs };
        let action = self.strategy.select_action(&q, state, schedule_t, &mut self.rng)?;
        let s_index = env.state_index();
        let r = env.step(action)?;
        self.episode_reward += r.reward;
        self.episode_steps += 1;
        self.total_steps += 1;
        let cut = r.truncated || self.episode_steps >= self.cfg.max_episode_steps;
        match &mut self.learner {
            Learner::Tabular(t) => {
                let (state, next_state) = (s_index.expect("tabular env"), env.state_index().expect("tabular env"));
                t.td_update(&Transition { state, action, reward: r.reward, next_state, terminal: r.terminal })?;
                if !t.row(state).iter().all(|v| v.is_finite()) {
                    return Err(EbeError::NonFinite("q-table entry".into()));
                }
            }
            Learner::Dqn(agent) => {
                let tr = VecTransition {
                    state: std::mem::take(&mut self.obs),
                    action,
                    reward: r.reward,
                    next_state: r.observation.clone(),
                    terminal: r.terminal,
                };
                agent.observe(tr, &mut self.rng)?;
            }
        }
        self.obs = r.observation;
        if !(r.terminal || cut) {
            return Ok(None);
        }
        let stats = EpisodeStats {
            reward: self.episode_reward,
            steps: self.episode_steps,
            h0: mean_episode_entropy(&self.entropies)?,
            wall_ms: self.started.elapsed().as_secs_f64() * 1e3,
        };
        self.obs = self.env.reset();
        self.episode_reward = 0.0;
        self.episode_steps = 0;
        self.entropies.clear();
        self.started = Instant::now();
        Ok(Some(stats))
    }
}

/// Everything one (strategy, seed) cell produced.
#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub strategy: String,
    pub seed: u64,
    pub rows: Vec<RunRow>,
    pub model: Option<QModel<f64>>,
    pub failure: Option<String>,
}

fn cell_rng(seed: u64, name: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(name.bytes()) | 2);
    rng
}

/// Trains and evaluates one cell. Errors become a `failed` row.
pub fn run_cell(cfg: &ExperimentConfig, spec: &StrategySpec, seed: u64, oracle: Option<&QTable<f64>>) -> CellOutcome {
    let mut rows = Vec::new();
    let result = run_cell_inner(cfg, spec, seed, oracle, &mut rows);
    let (model, failure) = match result {
        Ok(model) => (Some(model), None),
        Err(e) => {
            let episode = rows.iter().filter(|r| r.phase == Phase::Train).map(|r| r.episode + 1).max().unwrap_or(0);
            rows.push(RunRow {
                seed,
                strategy: spec.name.clone(),
                episode,
                phase: Phase::Failed,
                reward: None,
                steps: None,
                h0: None,
                sq_error: None,
                wall_ms: None,
            });
            (None, Some(e.to_string()))
        }
    };
    CellOutcome { strategy: spec.name.clone(), seed, rows, model, failure }
}

fn run_cell_inner(
    cfg: &ExperimentConfig,
    spec: &StrategySpec,
    seed: u64,
    oracle: Option<&QTable<f64>>,
    rows: &mut Vec<RunRow>,
) -> Result<QModel<f64>> {
    let mut env = cfg.environment.build(seed, cfg.max_episode_steps);
    let mut eval_env = cfg.environment.build(seed ^ EVAL_SEED_SALT, cfg.max_episode_steps);
    let learner = Learner::build(cfg, env.as_ref(), seed)?;
    let kind = match cfg.budget {
        Budget::Episodes(_) => spec.kind.clone(),
        Budget::Epochs { steps_per_epoch, .. } => rescale_kind(&spec.kind, steps_per_epoch),
    };
    let strategy = Strategy::new(kind)?.with_hash_seed(seed);
    let obs = env.reset();
    let mut tr = Trainer {
        cfg,
        env,
        learner,
        strategy,
        rng: cell_rng(seed, &spec.name),
        ws: Workspace::default(),
        obs,
        episode_reward: 0.0,
        episode_steps: 0,
        entropies: Vec::new(),
        started: Instant::now(),
        total_steps: 0,
    };
    let row = |episode: u64, phase: Phase, reward: f64, steps: f64, h0: f64| RunRow {
        seed,
        strategy: spec.name.clone(),
        episode,
        phase,
        reward: Some(reward),
        steps: Some(steps),
        h0: Some(h0),
        sq_error: None,
        wall_ms: None,
    };
    let finite = |vals: &[f64]| -> Result<()> {
        if vals.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(EbeError::NonFinite("metric".into()))
        }
    };
    let train_row = |tr: &Trainer<'_>, episode: u64, st: EpisodeStats| -> Result<RunRow> {
        let mut r = row(episode, Phase::Train, st.reward, st.steps as f64, st.h0);
        if let Some(o) = oracle {
            r.sq_error = Some(squared_error(&tr.learner.chain_table(o)?, o)?);
        }
        if cfg.record_wall_time {
            r.wall_ms = Some(st.wall_ms);
        }
        finite(&[st.reward, st.h0, r.sq_error.unwrap_or(0.0)])?;
        Ok(r)
    };
    let test_row = |tr: &Trainer<'_>, index: u64, eval_env: &mut dyn Environment| -> Result<RunRow> {
        let started = Instant::now();
        let (reward, steps, h0) = evaluate(&tr.learner, eval_env, cfg.eval_episodes, cfg.max_episode_steps)?;
        finite(&[reward, h0])?;
        let mut r = row(index, Phase::Test, reward, steps, h0);
        if cfg.record_wall_time {
            r.wall_ms = Some(started.elapsed().as_secs_f64() * 1e3);
        }
        Ok(r)
    };

    match cfg.budget {
        Budget::Episodes(episodes) => {
            for ep in 0..episodes {
                let stats = loop {
                    if let Some(s) = tr.step(ep)? {
                        break s;
                    }
                };
                rows.push(train_row(&tr, ep, stats)?);
                if cfg.eval_episodes > 0 && ((ep + 1) % cfg.eval_every == 0 || ep + 1 == episodes) {
                    rows.push(test_row(&tr, ep, eval_env.as_mut())?);
                }
            }
        }
        Budget::Epochs { epochs, steps_per_epoch } => {
            let mut episode = 0;
            for epoch in 0..epochs {
                for _ in 0..steps_per_epoch {
                    let t = tr.total_steps;
                    if let Some(stats) = tr.step(t)? {
                        rows.push(train_row(&tr, episode, stats)?);
                        episode += 1;
                    }
                }
                if cfg.eval_episodes > 0 && ((epoch + 1) % cfg.eval_every == 0 || epoch + 1 == epochs) {
                    rows.push(test_row(&tr, epoch, eval_env.as_mut())?);
                }
            }
        }
    }
    Ok(tr.learner.model())
}

/// Per-strategy statistic across seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub strategy: String,
    pub metric: String,
    pub seeds: usize,
    pub failed: usize,
    pub mean: Option<f64>,
    /// Sample (n − 1) standard deviation; absent for fewer than two seeds.
    pub std: Option<f64>,
}

pub const SUMMARY_HEADER: &str = "strategy,metric,seeds,failed,mean,std";

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub rows: Vec<RunRow>,
    pub summary: Vec<SummaryRow>,
    pub cells: Vec<CellOutcome>,
}

/// Final per-seed metrics of a successful cell.
pub fn final_metrics(rows: &[RunRow], smoothing: f64) -> Result<Vec<(&'static str, f64)>> {
    let train: Vec<&RunRow> = rows.iter().filter(|r| r.phase == Phase::Train).collect();
    let test: Vec<&RunRow> = rows.iter().filter(|r| r.phase == Phase::Test).collect();
    let mut out = Vec::new();
    if let Some(v) = train.last().and_then(|r| r.sq_error) {
        out.push(("final_sq_error", v));
    }
    let rewards: Vec<f64> = train.iter().filter_map(|r| r.reward).collect();
    if let Some(&v) = ema_smooth(&rewards, smoothing)?.smoothed.last() {
        out.push(("final_smoothed_train_reward", v));
    }
    if let Some(r) = test.last() {
        out.extend(r.reward.map(|v| ("final_test_reward", v)));
        out.extend(r.h0.map(|v| ("final_test_h0", v)));
    }
    Ok(out)
}

pub fn mean_and_sample_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.len() > 1)
        .then(|| (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt());
    (Some(mean), std)
}

fn summarize(cfg: &ExperimentConfig, cells: &[CellOutcome]) -> Result<Vec<SummaryRow>> {
    let mut out = Vec::new();
    for spec in &cfg.strategies {
        let mine: Vec<&CellOutcome> = cells.iter().filter(|c| c.strategy == spec.name).collect();
        let failed = mine.iter().filter(|c| c.failure.is_some()).count();
        let mut per_metric: Vec<(&'static str, Vec<f64>)> = Vec::new();
        for c in mine.iter().filter(|c| c.failure.is_none()) {
            for (name, v) in final_metrics(&c.rows, cfg.smoothing_weight)? {
                match per_metric.iter_mut().find(|(n, _)| *n == name) {
                    Some((_, vals)) => vals.push(v),
                    None => per_metric.push((name, vec![v])),
                }
            }
        }
        for (metric, vals) in per_metric {
            let (mean, std) = mean_and_sample_std(&vals);
            out.push(SummaryRow { strategy: spec.name.clone(), metric: metric.into(), seeds: vals.len(), failed, mean, std });
        }
        if mine.iter().all(|c| c.failure.is_some()) {
            out.push(SummaryRow { strategy: spec.name.clone(), metric: "none".into(), seeds: 0, failed, mean: None, std: None });
        }
    }
    Ok(out)
}

pub fn summary_csv(summary: &[SummaryRow]) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for s in summary {
        out.push_str(&format!("{},{},{},{},{},{}\n", s.strategy, s.metric, s.seeds, s.failed, opt(s.mean), opt(s.std)));
    }
    out
}

/// Worker count from [`THREADS_ENV`], defaulting to the available cores.
pub fn thread_count() -> usize {
    let available = std::thread::available_parallelism().map_or(1, |n| n.get());
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(available)
}

/// Runs every (strategy, seed) cell, in parallel where allowed.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let oracle = match cfg.environment {
        EnvKind::Chain => Some(value_iteration_oracle(cfg.gamma, ORACLE_TOLERANCE)?),
        EnvKind::MiniBreakout => None,
    };
    let jobs: Vec<(&StrategySpec, u64)> =
        cfg.strategies.iter().flat_map(|s| cfg.seeds.iter().map(move |&seed| (s, seed))).collect();
    let sink = RecordSink::new();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count())
        .build()
        .map_err(|e| EbeError::Config(format!("thread pool: {e}")))?;
    let mut cells: Vec<CellOutcome> = pool.install(|| {
        jobs.par_iter()
            .map(|&(spec, seed)| {
                let mut cell = run_cell(cfg, spec, seed, oracle.as_ref());
                sink.extend(std::mem::take(&mut cell.rows));
                cell
            })
            .collect()
    });
    let rows = sink.into_rows();
    for c in &mut cells {
        c.rows = rows.iter().filter(|r| r.strategy == c.strategy && r.seed == c.seed).cloned().collect();
        c.rows.sort_by_key(|r| (r.phase, r.episode));
    }
    let summary = summarize(cfg, &cells)?;
    Ok(ExperimentResult { rows, summary, cells })
}

/// Metrics plotted by default for an experiment.
pub fn default_metrics(cfg: &ExperimentConfig) -> Vec<String> {
    let mut m = vec!["reward".to_string(), "h0".to_string()];
    if cfg.environment == EnvKind::Chain {
        m.push("sq_error".into());
    }
    m
}

/// Writes `runs.csv`, `summary.csv`, `curves.svg` and, if enabled, `models/`.
pub fn write_outputs(cfg: &ExperimentConfig, result: &ExperimentResult, dir: &Path) -> Result<()> {
    let csv = csv_string(&result.rows)?;
    let svg = render_curves(
        &result.rows,
        &PlotOptions { metrics: default_metrics(cfg), smoothing: cfg.smoothing_weight, phase: Phase::Train },
    )?;
    std::fs::create_dir_all(dir)?;
    write_atomic(&dir.join("runs.csv"), csv.as_bytes())?;
    write_atomic(&dir.join("summary.csv"), summary_csv(&result.summary).as_bytes())?;
    write_atomic(&dir.join("curves.svg"), svg.as_bytes())?;
    if cfg.save_models {
        let models = dir.join("models");
        std::fs::create_dir_all(&models)?;
        for c in &result.cells {
            if let Some(m) = &c.model {
                write_atomic(&models.join(format!("{}_seed{}.ebeq", c.strategy, c.seed)), &m.to_bytes())?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_std_convention() {
        let (m, s) = mean_and_sample_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, Some(2.5));
        assert!((s.unwrap() - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_and_sample_std(&[7.0]), (Some(7.0), None));
        assert_eq!(mean_and_sample_std(&[]), (None, None));
    }
}
