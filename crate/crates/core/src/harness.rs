//! Episode runner, evaluation over transfer sets, reports and traces.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{Agent, AgentError, AgentObservation, PlannerAgent, RandomAgent};
use crate::env::{Action, EnvState, TrapTube};
use crate::error::{ConfigError, EnvError, GenerationExhausted};
use crate::rng::{self, derive_seed};
use crate::task::{sample_task, Provenance, TaskConfig, TransferSet, SCHEMA_VERSION};

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const TRACE_SCHEMA_VERSION: u32 = 1;

/// Outcome of one episode. Only the final reward can be 1.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub task: Provenance,
    pub actions: Vec<Action>,
    pub rewards: Vec<u8>,
    pub solved: bool,
    pub steps: u32,
}

impl EpisodeResult {
    pub fn new(task: Provenance) -> Self {
        EpisodeResult {
            task,
            actions: Vec::new(),
            rewards: Vec::new(),
            solved: false,
            steps: 0,
        }
    }

    pub fn record(&mut self, action: Action, reward: u8) {
        self.actions.push(action);
        self.rewards.push(reward);
        self.steps += 1;
        self.solved = reward == 1;
    }
}

/// Everything needed to replay an episode: the task, each visited state
/// (initial state first), and the actions and rewards between them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub schema_version: u32,
    pub task: TaskConfig,
    pub states: Vec<EnvState>,
    pub actions: Vec<Action>,
    pub rewards: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EpisodeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{source} (episode marked failed after {} steps)", partial.steps)]
    Agent {
        source: AgentError,
        partial: EpisodeResult,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Generation(#[from] GenerationExhausted),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("could not build agent: {0}")]
    Agent(AgentError),
    #[error("{0}")]
    InvalidArgument(String),
}

fn drive(
    env: &TrapTube,
    agent: &mut dyn Agent,
    mut visit: impl FnMut(&EnvState),
) -> Result<EpisodeResult, EpisodeError> {
    let task = env.config().seed_provenance;
    let mut result = EpisodeResult::new(task);
    agent.begin_episode(&task);
    let mut state = env.reset();
    visit(&state);
    let mut prev_action = None;
    let mut prev_reward = 0;
    while !state.done {
        let obs = AgentObservation {
            observation: env.observe(&state),
            prev_action,
            prev_reward,
        };
        let action = match agent.act(&obs) {
            Ok(a) => a,
            Err(source) => {
                agent.end_episode(&result);
                return Err(EpisodeError::Agent {
                    source,
                    partial: result,
                });
            }
        };
        let step = env
            .step(&state, action)
            .expect("loop only steps live states");
        result.record(action, step.reward);
        state = step.state;
        visit(&state);
        prev_action = Some(action);
        prev_reward = step.reward;
    }
    agent.end_episode(&result);
    Ok(result)
}

/// Resets the task and steps it until done, feeding the agent each observation.
pub fn run_episode(
    config: &TaskConfig,
    agent: &mut dyn Agent,
) -> Result<EpisodeResult, EpisodeError> {
    let env = TrapTube::new(config)?;
    drive(&env, agent, |_| {})
}

/// Like [`run_episode`], also recording every visited state.
pub fn run_episode_traced(
    config: &TaskConfig,
    agent: &mut dyn Agent,
) -> Result<(EpisodeResult, EpisodeTrace), EpisodeError> {
    let env = TrapTube::new(config)?;
    let mut states = Vec::new();
    let result = drive(&env, agent, |s| states.push(*s))?;
    let trace = EpisodeTrace {
        schema_version: TRACE_SCHEMA_VERSION,
        task: config.clone(),
        states,
        actions: result.actions.clone(),
        rewards: result.rewards.clone(),
    };
    Ok((result, trace))
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReplayError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("trace holds {states} states for {actions} actions")]
    Length { states: usize, actions: usize },
    #[error("state {0} differs from the simulation")]
    State(usize),
    #[error("reward at step {0} differs from the simulation")]
    Reward(usize),
}

/// Re-simulates a trace and checks every stored state and reward.
/// Returns the final state.
pub fn replay(trace: &EpisodeTrace) -> Result<EnvState, ReplayError> {
    let env = TrapTube::new(&trace.task)?;
    let n = trace.actions.len();
    if trace.states.len() != n + 1 || trace.rewards.len() != n {
        return Err(ReplayError::Length {
            states: trace.states.len(),
            actions: n,
        });
    }
    let mut state = env.reset();
    if state != trace.states[0] {
        return Err(ReplayError::State(0));
    }
    for (i, &action) in trace.actions.iter().enumerate() {
        let step = env.step(&state, action)?;
        if step.reward != trace.rewards[i] {
            return Err(ReplayError::Reward(i));
        }
        state = step.state;
        if state != trace.states[i + 1] {
            return Err(ReplayError::State(i + 1));
        }
    }
    Ok(state)
}

/// Identifies one episode of an evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EpisodeSpec {
    pub trial: u32,
    pub set: TransferSet,
    pub index: u64,
    pub task_seed: u64,
}

/// Builds a fresh agent per episode so episodes can run in parallel.
pub trait AgentFactory: Sync {
    fn id(&self) -> String;

    fn agent_seed(&self) -> Option<u64> {
        None
    }

    fn build(
        &self,
        spec: &EpisodeSpec,
        config: &TaskConfig,
    ) -> Result<Box<dyn Agent + Send>, AgentError>;
}

/// Random agents seeded per episode from a root agent seed.
#[derive(Clone, Copy, Debug)]
pub struct RandomAgents {
    pub seed: u64,
}

impl AgentFactory for RandomAgents {
    fn id(&self) -> String {
        "random".to_owned()
    }

    fn agent_seed(&self) -> Option<u64> {
        Some(self.seed)
    }

    fn build(
        &self,
        spec: &EpisodeSpec,
        _config: &TaskConfig,
    ) -> Result<Box<dyn Agent + Send>, AgentError> {
        Ok(Box::new(RandomAgent::new(derive_seed(
            self.seed,
            rng::AGENT,
            spec.task_seed,
        ))))
    }
}

/// A planner agent constructed for each sampled task.
#[derive(Clone, Copy, Debug, Default)]
pub struct PlannerAgents;

impl AgentFactory for PlannerAgents {
    fn id(&self) -> String {
        "planner".to_owned()
    }

    fn build(
        &self,
        _spec: &EpisodeSpec,
        config: &TaskConfig,
    ) -> Result<Box<dyn Agent + Send>, AgentError> {
        Ok(Box::new(PlannerAgent::new(config)?))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub index: u64,
    pub task_seed: u64,
    pub solved: bool,
    pub steps: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetStats {
    pub transfer_set: TransferSet,
    pub label: String,
    pub n_tasks: u64,
    pub n_solved: u64,
    pub solve_rate: f64,
    pub episodes: Vec<EpisodeRecord>,
}

/// Task seed of episode `index` in an evaluation seeded with `seed`.
pub fn task_seed(seed: u64, index: u64) -> u64 {
    derive_seed(seed, rng::TASK, index)
}

fn run_one(factory: &dyn AgentFactory, spec: EpisodeSpec) -> Result<EpisodeRecord, HarnessError> {
    let config = sample_task(spec.set, spec.task_seed)?;
    let mut agent = factory.build(&spec, &config).map_err(HarnessError::Agent)?;
    let record = match run_episode(&config, &mut agent) {
        Ok(r) => EpisodeRecord {
            index: spec.index,
            task_seed: spec.task_seed,
            solved: r.solved,
            steps: r.steps,
            error: None,
        },
        Err(EpisodeError::Agent { source, partial }) => EpisodeRecord {
            index: spec.index,
            task_seed: spec.task_seed,
            solved: false,
            steps: partial.steps,
            error: Some(source.to_string()),
        },
        Err(EpisodeError::Config(e)) => return Err(e.into()),
    };
    Ok(record)
}

fn evaluate_trial(
    factory: &dyn AgentFactory,
    trial: u32,
    set: TransferSet,
    n_tasks: u64,
    seed: u64,
) -> Result<SetStats, HarnessError> {
    if n_tasks == 0 {
        return Err(HarnessError::InvalidArgument(
            "n_tasks must be at least 1".into(),
        ));
    }
    let episodes = (0..n_tasks)
        .into_par_iter()
        .map(|index| {
            run_one(
                factory,
                EpisodeSpec {
                    trial,
                    set,
                    index,
                    task_seed: task_seed(seed, index),
                },
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let n_solved = episodes.iter().filter(|e| e.solved).count() as u64;
    Ok(SetStats {
        transfer_set: set,
        label: set.label(),
        n_tasks,
        n_solved,
        solve_rate: n_solved as f64 / n_tasks as f64,
        episodes,
    })
}

/// Runs one episode on each of `n_tasks` tasks sampled from `set`.
/// Episode `i` uses task seed [`task_seed`]`(seed, i)`.
pub fn evaluate(
    factory: &dyn AgentFactory,
    set: TransferSet,
    n_tasks: u64,
    seed: u64,
) -> Result<SetStats, HarnessError> {
    evaluate_trial(factory, 0, set, n_tasks, seed)
}

/// How each trial is scored per transfer set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Fraction of sampled tasks solved.
    #[default]
    PerTask,
    /// 1 if any task was solved during the trial, else 0.
    AnySuccess,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetSummary {
    pub transfer_set: TransferSet,
    pub label: String,
    pub mean: f64,
    pub std: f64,
    pub trial_scores: Vec<f64>,
    pub n_tasks: u64,
    pub n_solved: u64,
    pub trials_with_success: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub trial: u32,
    pub seed: u64,
    pub sets: Vec<SetStats>,
}

/// Mean and standard deviation of solve scores over trials for the base set
/// and all seven transfer sets, with the per-episode records behind them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub task_schema_version: u32,
    pub agent: String,
    pub agent_seed: Option<u64>,
    pub eval_seed: u64,
    pub trials: u32,
    pub n_tasks: u64,
    pub aggregation: Aggregation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
    pub summary: Vec<SetSummary>,
    pub trial_reports: Vec<TrialReport>,
}

/// Sample standard deviation (n - 1 denominator); 0 for a single value.
pub fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Trial seed `t` of an experiment seeded with `seed`.
pub fn trial_seed(seed: u64, trial: u32) -> u64 {
    derive_seed(seed, rng::TRIAL, trial as u64)
}

/// Evaluates on every transfer set once per trial and aggregates over trials.
pub fn experiment_eval(
    factory: &dyn AgentFactory,
    trials: u32,
    n_tasks: u64,
    seed: u64,
    aggregation: Aggregation,
) -> Result<EvalReport, HarnessError> {
    if trials == 0 {
        return Err(HarnessError::InvalidArgument(
            "trials must be at least 1".into(),
        ));
    }
    let mut trial_reports = Vec::with_capacity(trials as usize);
    for trial in 0..trials {
        let seed = trial_seed(seed, trial);
        let sets = TransferSet::ALL
            .iter()
            .map(|&set| evaluate_trial(factory, trial, set, n_tasks, seed))
            .collect::<Result<Vec<_>, _>>()?;
        trial_reports.push(TrialReport { trial, seed, sets });
    }
    let summary = TransferSet::ALL
        .iter()
        .enumerate()
        .map(|(i, &set)| {
            let stats: Vec<&SetStats> = trial_reports.iter().map(|t| &t.sets[i]).collect();
            let scores: Vec<f64> = stats
                .iter()
                .map(|s| match aggregation {
                    Aggregation::PerTask => s.solve_rate,
                    Aggregation::AnySuccess => (s.n_solved > 0) as u8 as f64,
                })
                .collect();
            SetSummary {
                transfer_set: set,
                label: set.label(),
                mean: scores.iter().sum::<f64>() / scores.len() as f64,
                std: sample_std(&scores),
                n_tasks: stats.iter().map(|s| s.n_tasks).sum(),
                n_solved: stats.iter().map(|s| s.n_solved).sum(),
                trials_with_success: stats.iter().filter(|s| s.n_solved > 0).count() as u32,
                trial_scores: scores,
            }
        })
        .collect();
    Ok(EvalReport {
        schema_version: REPORT_SCHEMA_VERSION,
        task_schema_version: SCHEMA_VERSION,
        agent: factory.id(),
        agent_seed: factory.agent_seed(),
        eval_seed: seed,
        trials,
        n_tasks,
        aggregation,
        timestamp: None,
        summary,
        trial_reports,
    })
}

impl EvalReport {
    pub fn to_canonical_json(&self) -> String {
        crate::json::canonical(self)
    }

    /// Aligned text table, one row per transfer set.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let seed = self
            .agent_seed
            .map(|s| format!(" (seed {s})"))
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "agent {}{seed}, {} trial(s) x {} task(s), scoring {}",
            self.agent,
            self.trials,
            self.n_tasks,
            match self.aggregation {
                Aggregation::PerTask => "per task",
                Aggregation::AnySuccess => "any success",
            }
        );
        let _ = writeln!(
            out,
            "{:<10} {:>8} {:>8} {:>14}",
            "set", "mean %", "std %", "solved"
        );
        for row in &self.summary {
            let _ = writeln!(
                out,
                "{:<10} {:>8.1} {:>8.1} {:>14}",
                row.label,
                row.mean * 100.0,
                row.std * 100.0,
                format!("{}/{}", row.n_solved, row.n_tasks)
            );
        }
        out
    }
}
