//! The interface the harness drives, plus two bundled agents.

use thiserror::Error;

use crate::env::{Action, Dynamics, Kinematics};
use crate::error::ConfigError;
use crate::harness::EpisodeResult;
use crate::planner::{self, Plan};
use crate::render::Observation;
use crate::rng::Stream;
use crate::task::{Provenance, TaskConfig};

/// What an agent sees before each action: the rendered grid plus the
/// previous action and reward (`None` / 0 on the first step).
#[derive(Clone, Debug, PartialEq)]
pub struct AgentObservation {
    pub observation: Observation,
    pub prev_action: Option<Action>,
    pub prev_reward: u8,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AgentError {
    #[error("task has no solution within its horizon")]
    Unsolvable,
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("agent produced an action outside the action set: {0}")]
    InvalidAction(String),
    #[error("remote agent failed: {0}")]
    Remote(String),
}

pub trait Agent {
    fn id(&self) -> String;

    fn begin_episode(&mut self, _task: &Provenance) {}

    fn act(&mut self, obs: &AgentObservation) -> Result<Action, AgentError>;

    fn end_episode(&mut self, _result: &EpisodeResult) {}
}

impl<A: Agent + ?Sized> Agent for Box<A> {
    fn id(&self) -> String {
        (**self).id()
    }

    fn begin_episode(&mut self, task: &Provenance) {
        (**self).begin_episode(task)
    }

    fn act(&mut self, obs: &AgentObservation) -> Result<Action, AgentError> {
        (**self).act(obs)
    }

    fn end_episode(&mut self, result: &EpisodeResult) {
        (**self).end_episode(result)
    }
}

/// Uniform over the 16 actions, reproducible per seed.
#[derive(Clone, Debug)]
pub struct RandomAgent {
    seed: u64,
    stream: Stream,
}

impl RandomAgent {
    pub fn new(seed: u64) -> Self {
        RandomAgent {
            seed,
            stream: Stream::from_seed(seed),
        }
    }

    pub fn next_action(&mut self) -> Action {
        Action::ALL[self.stream.index(Action::ALL.len())]
    }
}

pub fn random_agent(seed: u64) -> RandomAgent {
    RandomAgent::new(seed)
}

impl Agent for RandomAgent {
    fn id(&self) -> String {
        format!("random(seed={})", self.seed)
    }

    fn act(&mut self, _obs: &AgentObservation) -> Result<Action, AgentError> {
        Ok(self.next_action())
    }
}

/// Replays the shortest plan of one task. Its internal simulation of that
/// task picks a no-effect action once the plan runs out, which only happens
/// when it is played on some other task.
#[derive(Clone, Debug)]
pub struct PlannerAgent {
    plan: Plan,
    dynamics: Dynamics,
    cursor: usize,
    simulated: Kinematics,
}

impl PlannerAgent {
    pub fn new(config: &TaskConfig) -> Result<Self, AgentError> {
        let plan = planner::solve(config)?.ok_or(AgentError::Unsolvable)?;
        let dynamics = Dynamics::new(config)?;
        let simulated = dynamics.initial();
        Ok(PlannerAgent {
            plan,
            dynamics,
            cursor: 0,
            simulated,
        })
    }

    pub fn plan(&self) -> &Plan {
        &self.plan
    }

    fn idle_action(&self) -> Action {
        Action::ALL
            .iter()
            .copied()
            .find(|&a| self.dynamics.transition(self.simulated, a) == self.simulated)
            .unwrap_or(Action::ALL[0])
    }
}

pub fn planner_agent(config: &TaskConfig) -> Result<PlannerAgent, AgentError> {
    PlannerAgent::new(config)
}

impl Agent for PlannerAgent {
    fn id(&self) -> String {
        "planner".to_owned()
    }

    fn begin_episode(&mut self, _task: &Provenance) {
        self.cursor = 0;
        self.simulated = self.dynamics.initial();
    }

    fn act(&mut self, _obs: &AgentObservation) -> Result<Action, AgentError> {
        let action = match self.plan.actions.get(self.cursor) {
            Some(&a) => {
                self.cursor += 1;
                a
            }
            None => self.idle_action(),
        };
        self.simulated = self.dynamics.transition(self.simulated, action);
        Ok(action)
    }
}
