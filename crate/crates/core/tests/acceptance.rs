//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Run alone with `cargo test --test acceptance`.

mod common;

use std::net::TcpListener;
use std::thread;
use std::time::{Duration, Instant};

use common::{from_kinematics, mini_config, random_small_config, to_kinematics, RefSim};
use traptube::grid::color_to_sphere_point;
use traptube::harness::{
    evaluate, experiment_eval, replay, run_episode, run_episode_traced, task_seed, Aggregation,
    EpisodeTrace, PlannerAgents, RandomAgents,
};
use traptube::json::canonical;
use traptube::planner::solve;
use traptube::protocol::{drive_episode, serve_tcp, RemoteEnv, ResetCommand};
use traptube::rng::Stream;
use traptube::task::in_support;
use traptube::{
    base_config, sample_task, Action, Agent, Dynamics, ObjectCategory, Plan, PlannerAgent,
    RandomAgent, TaskConfig, TransferSet, TrapTube,
};

const TASKS_PER_SET: u64 = 500;
const MAX_PLAN_LENGTH: usize = 50;
const SOLVABILITY_BUDGET: Duration = Duration::from_secs(600);
const OPTIMALITY_CONFIGS: usize = 50;
const GEOMETRIES: u64 = 100;
const RESAMPLES: u64 = 10;
const PARTNER_DRAWS: u64 = 100_000;
const PARTNER_TOLERANCE: f64 = 0.01;
const ACTION_DRAWS: usize = 160_000;
const ACTION_TOLERANCE: f64 = 0.005;
const SPHERE_DRAWS: usize = 100_000;
const SPHERE_TOLERANCE: f64 = 0.02;
const BASELINE_EPISODES: u64 = 10_000;
const BASELINE_BAND: f64 = 0.05;
const MIN_STEPS_PER_SEC: f64 = 50_000.0;
const BASE_SOLVE_BUDGET: Duration = Duration::from_secs(5);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn replays(config: &TaskConfig, plan: &Plan) -> bool {
    let env = TrapTube::new(config).unwrap();
    let mut s = env.reset();
    for &a in &plan.actions {
        let r = env.step(&s, a).unwrap();
        s = r.state;
        if r.done {
            return r.reward == 1;
        }
    }
    false
}

fn oracle_solvability() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut longest = 0;
    for set in TransferSet::ALL {
        for i in 0..TASKS_PER_SET {
            let seed = task_seed(0, i);
            let config = match sample_task(set, seed) {
                Ok(c) => c,
                Err(e) => {
                    failures.push(format!("{set}#{i}: {e}"));
                    continue;
                }
            };
            match solve(&config) {
                Ok(Some(plan)) if plan.len() <= MAX_PLAN_LENGTH && replays(&config, &plan) => {
                    longest = longest.max(plan.len());
                }
                other => failures.push(format!("{set}#{i}: {other:?}")),
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        failures.is_empty() && elapsed < SOLVABILITY_BUDGET,
        format!(
            "{} tasks, {} failures, longest plan {longest}, {:.1}s (budget {}s){}",
            TASKS_PER_SET * 8,
            failures.len(),
            elapsed.as_secs_f64(),
            SOLVABILITY_BUDGET.as_secs(),
            failures
                .first()
                .map(|f| format!(", first: {f}"))
                .unwrap_or_default()
        ),
    )
}

fn dynamics_equivalence() -> Outcome {
    let config = mini_config();
    let reference = RefSim::new(&config);
    let dynamics = Dynamics::new(&config).unwrap();
    let states = reference.reachable();
    let mut mismatches = 0;
    for s in &states {
        let k = to_kinematics(s, config.tool);
        for action in Action::ALL {
            if from_kinematics(&dynamics.transition(k, action)) != reference.next(s, action) {
                mismatches += 1;
            }
            let r = dynamics
                .step(&dynamics.state_of(k, 0, false), action)
                .unwrap();
            let (_, reward, done) = reference.step(s, 0, action);
            if (r.reward, r.done) != (reward, done) {
                mismatches += 1;
            }
        }
    }
    outcome(
        mismatches == 0,
        format!(
            "6x6 miniature, {} reachable states x 16 actions, {mismatches} mismatches",
            states.len()
        ),
    )
}

fn plan_optimality() -> Outcome {
    let mut rng = Stream::from_seed(77);
    let mut mismatches = 0;
    let mut unsound = 0;
    let mut solvable = 0;
    for _ in 0..OPTIMALITY_CONFIGS {
        let config = random_small_config(&mut rng, 12);
        let plan = solve(&config).unwrap();
        let reference = RefSim::new(&config).iddfs(config.horizon);
        if plan.as_ref().map(|p| p.len() as u32) != reference {
            mismatches += 1;
        }
        if let Some(plan) = plan {
            solvable += 1;
            let d = Dynamics::new(&config).unwrap();
            let mut s = d.reset();
            let mut ok = false;
            for &a in &plan.actions {
                let r = d.step(&s, a).unwrap();
                s = r.state;
                ok = r.reward == 1;
            }
            unsound += (!ok) as u32;
        }
    }
    outcome(
        mismatches == 0 && unsound == 0,
        format!(
            "{OPTIMALITY_CONFIGS} small configs ({solvable} solvable), {mismatches} length mismatches vs iterative deepening, {unsound} unsound plans"
        ),
    )
}

fn appearance_invariance() -> Outcome {
    let mut differing = 0;
    for g in 0..GEOMETRIES {
        let config = sample_task(TransferSet::new(true, false, false), task_seed(1, g)).unwrap();
        let plan = solve(&config).unwrap();
        for r in 0..RESAMPLES {
            let look = sample_task(
                TransferSet::new(false, true, true),
                task_seed(2, g * RESAMPLES + r),
            )
            .unwrap();
            let mut recolored = config.clone();
            recolored.palette = look.palette;
            recolored.symbols = look.symbols;
            if solve(&recolored).unwrap() != plan {
                differing += 1;
            }
        }
    }
    outcome(
        differing == 0,
        format!("{GEOMETRIES} geometries x {RESAMPLES} resamples, {differing} differing plans"),
    )
}

fn base_support() -> Outcome {
    let base = base_config();
    let missing: Vec<String> = TransferSet::ALL
        .iter()
        .filter(|&&s| !in_support(&base, s))
        .map(|s| s.label())
        .collect();
    outcome(missing.is_empty(), format!("base outside: {missing:?}"))
}

fn determinism() -> Outcome {
    let a = experiment_eval(&RandomAgents { seed: 0 }, 3, 20, 0, Aggregation::PerTask).unwrap();
    let b = experiment_eval(&RandomAgents { seed: 0 }, 3, 20, 0, Aggregation::PerTask).unwrap();
    let p = experiment_eval(&PlannerAgents, 2, 10, 4, Aggregation::PerTask).unwrap();
    let q = experiment_eval(&PlannerAgents, 2, 10, 4, Aggregation::PerTask).unwrap();
    let reports_equal = a.to_canonical_json() == b.to_canonical_json()
        && p.to_canonical_json() == q.to_canonical_json();
    let mut traces = 0;
    let mut bad = 0;
    for set in TransferSet::ALL {
        for i in 0..10 {
            let config = sample_task(set, task_seed(3, i)).unwrap();
            let mut agents: [Box<dyn Agent>; 2] = [
                Box::new(RandomAgent::new(i)),
                Box::new(PlannerAgent::new(&config).unwrap()),
            ];
            for agent in agents.iter_mut() {
                let (result, trace) = run_episode_traced(&config, agent).unwrap();
                let parsed: EpisodeTrace = serde_json::from_str(&canonical(&trace)).unwrap();
                let last = replay(&parsed);
                traces += 1;
                let ok = last.as_ref().ok() == trace.states.last()
                    && parsed == trace
                    && parsed.rewards == result.rewards;
                bad += (!ok) as u32;
            }
        }
    }
    outcome(
        reports_equal && bad == 0,
        format!("reports byte-identical: {reports_equal}, {traces} traces, {bad} replay failures"),
    )
}

fn statistics() -> Outcome {
    let mut partners = [0u64; 4];
    for seed in 0..PARTNER_DRAWS {
        let m = sample_task(TransferSet::new(false, false, true), seed)
            .unwrap()
            .symbols;
        let i = ObjectCategory::SWAP_PARTNERS
            .iter()
            .position(|&c| c == m.partner())
            .unwrap();
        partners[i] += 1;
    }
    let partner_dev = partners
        .iter()
        .map(|&n| (n as f64 / PARTNER_DRAWS as f64 - 0.25).abs())
        .fold(0.0, f64::max);

    let mut agent = RandomAgent::new(0);
    let mut counts = [0usize; 16];
    for _ in 0..ACTION_DRAWS {
        counts[agent.next_action().index()] += 1;
    }
    let action_dev = counts
        .iter()
        .map(|&n| (n as f64 / ACTION_DRAWS as f64 - 1.0 / 16.0).abs())
        .fold(0.0, f64::max);

    // accepted structural draws, five resampled categories per palette
    let mut sum = [0.0f64; 3];
    let mut draws = 0;
    let mut seed = 0;
    while draws < SPHERE_DRAWS {
        let palette = sample_task(TransferSet::new(false, true, false), seed)
            .unwrap()
            .palette;
        seed += 1;
        for c in ObjectCategory::RESAMPLED {
            let p = color_to_sphere_point(palette.get(c)).unwrap();
            for i in 0..3 {
                sum[i] += p[i];
            }
            draws += 1;
        }
    }
    let accepted_dev = sum
        .iter()
        .map(|s| (s / draws as f64).abs())
        .fold(0.0, f64::max);
    let mut raw = [0.0f64; 3];
    let mut rng = Stream::from_seed(0);
    for _ in 0..SPHERE_DRAWS {
        let p = rng.unit_sphere();
        for i in 0..3 {
            raw[i] += p[i];
        }
    }
    let raw_dev = raw
        .iter()
        .map(|s| (s / SPHERE_DRAWS as f64).abs())
        .fold(0.0, f64::max);

    outcome(
        partner_dev <= PARTNER_TOLERANCE
            && action_dev <= ACTION_TOLERANCE
            && accepted_dev <= SPHERE_TOLERANCE
            && raw_dev <= SPHERE_TOLERANCE,
        format!(
            "partner max dev {partner_dev:.4} (tol {PARTNER_TOLERANCE}), action max dev {action_dev:.4} (tol {ACTION_TOLERANCE}), sphere mean max |axis| accepted {accepted_dev:.4} / raw {raw_dev:.4} (tol {SPHERE_TOLERANCE})"
        ),
    )
}

fn random_baseline() -> Outcome {
    let stats = evaluate(
        &RandomAgents { seed: 0 },
        TransferSet::BASE,
        BASELINE_EPISODES,
        0,
    )
    .unwrap();
    outcome(
        stats.solve_rate < BASELINE_BAND,
        format!(
            "{}/{} solved, rate {:.4} (band < {BASELINE_BAND})",
            stats.n_solved, stats.n_tasks, stats.solve_rate
        ),
    )
}

fn protocol_equivalence() -> Outcome {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let server = thread::spawn(move || serve_tcp(listener, Some(1)).unwrap());
    let mut env = RemoteEnv::connect(addr).unwrap();
    let mut episodes = 0;
    let mut differing = 0;
    for set in TransferSet::ALL {
        for i in 0..5 {
            let seed = task_seed(5, i);
            let config = sample_task(set, seed).unwrap();
            let pairs: [(Box<dyn Agent>, Box<dyn Agent>); 2] = [
                (Box::new(RandomAgent::new(i)), Box::new(RandomAgent::new(i))),
                (
                    Box::new(PlannerAgent::new(&config).unwrap()),
                    Box::new(PlannerAgent::new(&config).unwrap()),
                ),
            ];
            for (mut local, mut remote) in pairs {
                let expected = run_episode(&config, &mut local).unwrap();
                let got =
                    drive_episode(&mut env, &mut remote, ResetCommand::sampled(set, seed)).unwrap();
                episodes += 1;
                differing += (canonical(&got) != canonical(&expected)) as u32;
            }
        }
    }
    env.close().unwrap();
    server.join().unwrap();
    outcome(
        differing == 0,
        format!("{episodes} episodes over TCP, {differing} differing results"),
    )
}

fn throughput() -> Outcome {
    let env = TrapTube::new(&base_config()).unwrap();
    let n = 2_000_000;
    let start = Instant::now();
    let mut state = env.reset();
    let mut rewards = 0u64;
    let mut rng = Stream::from_seed(1);
    for _ in 0..n {
        if state.done {
            state = env.reset();
        }
        let r = env.step(&state, Action::ALL[rng.index(16)]).unwrap();
        rewards += r.reward as u64;
        state = r.state;
    }
    let rate = n as f64 / start.elapsed().as_secs_f64();
    std::hint::black_box(rewards);
    let start = Instant::now();
    let plan = solve(&base_config()).unwrap();
    let solve_time = start.elapsed();
    outcome(
        rate >= MIN_STEPS_PER_SEC && plan.is_some() && solve_time < BASE_SOLVE_BUDGET,
        format!(
            "{:.0} steps/s single-threaded (min {MIN_STEPS_PER_SEC:.0}), base solved in {:.3}s (budget {}s)",
            rate,
            solve_time.as_secs_f64(),
            BASE_SOLVE_BUDGET.as_secs()
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("oracle solvability", oracle_solvability),
        ("exhaustive dynamics equivalence", dynamics_equivalence),
        ("plan soundness and optimality", plan_optimality),
        ("appearance invariance", appearance_invariance),
        ("base support", base_support),
        ("determinism", determinism),
        ("statistical sanity", statistics),
        ("random baseline band", random_baseline),
        ("protocol equivalence", protocol_equivalence),
        ("throughput", throughput),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        failed += (!result.pass) as u32;
        println!(
            "{} [{:>2}] {name}: {} ({:.1}s)",
            if result.pass { "PASS" } else { "FAIL" },
            i + 1,
            result.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() as u32 - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
