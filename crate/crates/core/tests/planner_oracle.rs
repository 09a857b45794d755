mod common;

use std::collections::{HashSet, VecDeque};

use common::{from_kinematics, mini_config, random_small_config, RefSim};
use traptube::planner::{search, solve, SearchKey};
use traptube::rng::Stream;
use traptube::{base_config, Action, Dynamics, Plan, Position, TaskConfig};

fn replays_to_success(config: &TaskConfig, plan: &Plan) -> bool {
    let d = Dynamics::new(config).unwrap();
    let mut s = d.reset();
    for (i, &a) in plan.actions.iter().enumerate() {
        let r = d.step(&s, a).unwrap();
        s = r.state;
        if r.done {
            return r.reward == 1 && i + 1 == plan.len();
        }
    }
    false
}

/// Breadth-first shortest length over the reference rules.
fn reference_bfs(config: &TaskConfig) -> Option<u32> {
    let sim = RefSim::new(config);
    let mut seen = HashSet::from([sim.start.clone()]);
    let mut queue = VecDeque::from([(sim.start.clone(), 0)]);
    while let Some((s, d)) = queue.pop_front() {
        if d == config.horizon || s.food.is_none() {
            continue;
        }
        for a in Action::ALL {
            let n = sim.next(&s, a);
            if RefSim::success(&n) {
                return Some(d + 1);
            }
            if seen.insert(n.clone()) {
                queue.push_back((n, d + 1));
            }
        }
    }
    None
}

#[test]
fn plan_lengths_match_iterative_deepening() {
    let mut rng = Stream::from_seed(77);
    let mut solvable = 0;
    for i in 0..50 {
        let config = random_small_config(&mut rng, 12);
        let plan = solve(&config).unwrap();
        let reference = RefSim::new(&config).iddfs(config.horizon);
        assert_eq!(
            plan.as_ref().map(|p| p.len() as u32),
            reference,
            "config {i}"
        );
        if let Some(plan) = plan {
            assert!(replays_to_success(&config, &plan), "config {i}");
            solvable += 1;
        }
    }
    assert!(
        solvable >= 15,
        "only {solvable} of 50 configs were solvable"
    );
}

#[test]
fn base_plan_is_shortest() {
    let config = base_config();
    let plan = solve(&config).unwrap().unwrap();
    assert!(replays_to_success(&config, &plan));
    assert_eq!(Some(plan.len() as u32), reference_bfs(&config));
}

#[test]
fn depth_eight_classification_matches_enumeration() {
    let mut seen = [false; 2];
    let base = mini_config();
    let foods = [(2, 3), (0, 5), (5, 5), (3, 0), (2, 5)];
    for (fr, fc) in foods {
        for row in 0..6u8 {
            for col in 0..6u8 {
                let mut config = base.clone();
                config.food_start = Position::new(fr, fc);
                config.agent_start = Position::new(row, col);
                let Ok(dynamics) = Dynamics::new(&config) else {
                    continue;
                };
                let planner = search(&dynamics, 8).is_some();
                let brute = RefSim::new(&config).solvable_within(8);
                assert_eq!(planner, brute, "food at {fr},{fc}, agent at {row},{col}");
                seen[planner as usize] = true;
            }
        }
    }
    assert_eq!(seen, [true, true], "fixture should have both classes");
}

#[test]
fn equal_search_keys_step_identically() {
    let config = base_config();
    let dynamics = Dynamics::new(&config).unwrap();
    let mut rng = Stream::from_seed(3);
    let mut k = dynamics.initial();
    for _ in 0..2000 {
        let a = Action::ALL[rng.index(16)];
        let t1 = rng.below(49) as u32;
        let t2 = rng.below(49) as u32;
        let s1 = dynamics.state_of(k, t1, false);
        let s2 = dynamics.state_of(k, t2, false);
        assert_eq!(
            SearchKey::of(&s1.kinematics()),
            SearchKey::of(&s2.kinematics())
        );
        for action in Action::ALL {
            let r1 = dynamics.step(&s1, action).unwrap();
            let r2 = dynamics.step(&s2, action).unwrap();
            assert_eq!(r1.state.kinematics(), r2.state.kinematics());
            assert_eq!(r1.reward, r2.reward);
            assert_eq!(
                from_kinematics(&r1.state.kinematics()),
                from_kinematics(&r2.state.kinematics())
            );
        }
        let next = dynamics.transition(k, a);
        k = if next.success() {
            dynamics.initial()
        } else {
            next
        };
    }
}
