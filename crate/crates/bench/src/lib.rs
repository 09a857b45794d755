//! Benchmarks for the simulator, planner and samplers live in `benches/`.
//! This library only provides the fixtures they share.

use traptube::env::{Action, TrapTube};
use traptube::task::base_config;

/// Steps the base task `n` times with a fixed cyclic action sequence,
/// resetting whenever an episode ends. Returns the total reward.
pub fn step_cycle(env: &TrapTube, n: usize) -> u64 {
    let mut state = env.reset();
    let mut total = 0u64;
    for i in 0..n {
        if state.done {
            state = env.reset();
        }
        let r = env.step(&state, Action::ALL[i % 16]).expect("live state");
        total += r.reward as u64;
        state = r.state;
    }
    total
}

pub fn base_env() -> TrapTube {
    TrapTube::new(&base_config()).expect("base task is valid")
}
