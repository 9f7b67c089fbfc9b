mod common;

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rltraj::cost::CostWeights;
use rltraj::env::{
    decode_action, generate_scene, DrivingEnv, EnvError, EpisodeConfig, Scene, SceneGenerator,
    TerminalKind,
};
use rltraj::safety::SafetyConfig;

fn env(config: EpisodeConfig) -> DrivingEnv {
    DrivingEnv::new(config, CostWeights::default(), SafetyConfig::default()).unwrap()
}

fn random_action(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

fn uniform_limits(scene: &mut Scene, limit: f64) {
    for r in 0..scene.depth() {
        for k in 0..scene.lanes() {
            scene.set_speed_limit(r, k, limit);
        }
    }
}

#[test]
fn same_seed_and_actions_give_the_same_episode() {
    let run = || {
        let mut e = env(EpisodeConfig::default());
        e.seed(77);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut trace = vec![e.reset()];
        let mut rewards = Vec::new();
        for _ in 0..3 {
            loop {
                let out = e.step(&random_action(&mut rng, 6)).unwrap();
                trace.push(out.observation);
                rewards.push((out.reward.to_bits(), out.info.terminal));
                if out.done {
                    break;
                }
            }
            trace.push(e.reset());
        }
        (trace, rewards)
    };
    assert_eq!(run(), run());
}

#[test]
fn observation_shape_and_range() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for (lanes, depth) in [(1, 1), (2, 5), (3, 10), (5, 7)] {
        let config = EpisodeConfig {
            lanes,
            sensor_depth: depth,
            plan_horizon: 1,
            move_layers: 1,
            ..EpisodeConfig::default()
        };
        let mut e = env(config.clone());
        let mut obs = e.reset();
        for _ in 0..200 {
            assert_eq!(obs.len(), 2 * lanes * depth + 2);
            assert!(obs.iter().all(|x| (-1.0..=1.0).contains(x)), "{obs:?}");
            let out = e.step(&random_action(&mut rng, config.action_len())).unwrap();
            obs = if out.done { e.reset() } else { out.observation };
        }
    }
}

#[test]
fn reset_after_done_starts_over() {
    let mut e = env(EpisodeConfig::default());
    e.reset();
    // Full braking from v = 2 halts at the second layer; the first is entered.
    let brake = [0.0, 0.0, 0.0, -1.0, -1.0, -1.0];
    let mut done = false;
    while !done {
        done = e.step(&brake).unwrap().done;
    }
    assert!(e.steps() > 0);
    assert_eq!(e.step(&brake), Err(EnvError::EpisodeFinished));
    e.reset();
    assert_eq!(e.steps(), 0);
    assert_eq!(e.progress(), 0);
    assert!(!e.is_done());
    assert!(e.step(&brake).is_ok());
}

#[test]
fn decode_examples() {
    let config = EpisodeConfig {
        lanes: 7,
        ..EpisodeConfig::default()
    };
    let t = decode_action(&[0.0; 6], 0.5, 2.0, &config);
    for p in &t.points {
        assert_eq!((p.n, p.v), (0.5, 2.0));
    }
    let t = decode_action(&[1.0, 1.0, 1.0, 0.0, 0.0, 0.0], 0.0, 2.0, &config);
    let ns: Vec<f64> = t.points.iter().map(|p| p.n).collect();
    assert_eq!(ns, [1.0, 2.0, 3.0]);
    let t = decode_action(&[0.0, 0.0, 0.0, -1.0, -0.5, 1.0], 0.0, 0.0, &config);
    assert_eq!(t.points[0].v, 0.0);
    assert_eq!(t.points[2].v, 1.0);
    // Three lanes: edges at +-1.5.
    let t = decode_action(&[1.0, 1.0, -1.0, 0.0, 0.0, 0.0], 0.0, 2.0, &EpisodeConfig::default());
    let ns: Vec<f64> = t.points.iter().map(|p| p.n).collect();
    assert_eq!(ns, [1.0, 1.5, 1.0]);
}

#[test]
fn encode_layout_by_hand() {
    let scene = Scene::from_rows(
        &[vec![true, false], vec![false, false]],
        &[vec![1.0, 2.0], vec![4.0, 0.0]],
        0.5,
        3.0,
    )
    .unwrap();
    assert_eq!(
        scene.encode(4.0),
        [1.0, 0.0, 0.0, 0.0, 0.25, 0.5, 1.0, 0.0, 0.5, 0.75]
    );
    let mut open = Scene::empty(3, 4);
    uniform_limits(&mut open, 5.0);
    let obs = open.encode(5.0);
    assert!(obs[..12].iter().all(|&x| x == 0.0));
    assert!(obs[12..24].iter().all(|&x| x == 1.0));
}

#[test]
fn encode_is_injective_on_random_scenes() {
    let config = EpisodeConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut seen: HashMap<Vec<u64>, String> = HashMap::new();
    for i in 0..10_000 {
        let mut scene = generate_scene(&config, &mut rng);
        if i % 2 == 1 {
            scene.n0 = f64::from(rng.random_range(-1..=1));
            scene.v0 = f64::from(rng.random_range(0..=5));
        }
        let key: Vec<u64> = scene.encode(5.0).iter().map(|x| x.to_bits()).collect();
        let text = scene.to_string();
        if let Some(prev) = seen.insert(key, text.clone()) {
            assert_eq!(prev, text, "two scenes share an encoding");
        }
    }
}

#[test]
fn blocked_row_examples() {
    let scene = Scene::from_rows(
        &[vec![false; 3], vec![true; 3], vec![true, false, true]],
        &[vec![1.0; 3], vec![1.0; 3], vec![1.0; 3]],
        0.0,
        1.0,
    )
    .unwrap();
    assert!(!scene.is_blocked_row(0));
    assert!(scene.is_blocked_row(1));
    assert!(!scene.is_blocked_row(2));
}

/// Stationary post-repair occupancy rate of the row generator, computed
/// exactly as a Markov chain over the set of lanes reachable from the start.
fn occupancy_rate_oracle(lanes: usize, dn_max: usize, p: f64) -> f64 {
    let states = 1usize << lanes;
    let candidates = |reach: usize| -> Vec<usize> {
        (0..lanes)
            .filter(|&k| (0..lanes).any(|j| reach >> j & 1 == 1 && k.abs_diff(j) <= dn_max))
            .collect()
    };
    // transition[s][t], and the expected occupied count leaving s.
    let mut transition = vec![vec![0.0; states]; states];
    let mut occupied = vec![0.0; states];
    for s in 1..states {
        let cand = candidates(s);
        for pattern in 0..states {
            let ones = pattern.count_ones() as i32;
            let prob = p.powi(ones) * (1.0 - p).powi(lanes as i32 - ones);
            let cut_off = cand.iter().all(|&k| pattern >> k & 1 == 1);
            let repairs: Vec<usize> = if cut_off {
                cand.iter().map(|&k| pattern & !(1 << k)).collect()
            } else {
                vec![pattern]
            };
            let share = prob / repairs.len() as f64;
            for row in repairs {
                let next = cand.iter().filter(|&&k| row >> k & 1 == 0).fold(0, |acc, &k| acc | 1 << k);
                transition[s][next] += share;
                occupied[s] += share * f64::from(row.count_ones());
            }
        }
    }
    let mut pi = vec![1.0 / (states - 1) as f64; states];
    pi[0] = 0.0;
    for _ in 0..10_000 {
        let mut next = vec![0.0; states];
        for s in 1..states {
            for t in 1..states {
                next[t] += pi[s] * transition[s][t];
            }
        }
        pi = next;
    }
    (1..states).map(|s| pi[s] * occupied[s]).sum::<f64>() / lanes as f64
}

#[test]
fn occupancy_rate_matches_the_markov_oracle() {
    for (lanes, dn_max) in [(3, 1), (4, 1), (5, 2)] {
        let config = EpisodeConfig {
            lanes,
            dn_max: dn_max as u32,
            max_steps: usize::MAX,
            ..EpisodeConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(lanes as u64);
        let mut generator = SceneGenerator::new(&config, 0.0);
        // Burn in past the start state, then sample at least 10^5 cells.
        for _ in 0..100 {
            generator.next_row(&mut rng);
        }
        let rows = 100_000 / lanes + 1;
        let mut count = 0usize;
        for _ in 0..rows {
            count += generator.next_row(&mut rng).0.iter().filter(|&&o| o).count();
        }
        let cells = (rows * lanes) as f64;
        let rate = count as f64 / cells;
        let want = occupancy_rate_oracle(lanes, dn_max, 0.5);
        let se = (want * (1.0 - want) / cells).sqrt();
        assert!((rate - want).abs() < 5.0 * se, "W={lanes}: {rate} vs {want}");
        assert!(want < 0.5);
        eprintln!("W={lanes} dn_max={dn_max}: sampled {rate:.4}, stationary {want:.4}");
    }
}

/// Lanes reachable in each row from `start`, moving at most `dn_max` lanes
/// between consecutive rows through free cells.
fn reachable_rows(rows: &[Vec<bool>], start: usize, dn_max: usize) -> Vec<Vec<bool>> {
    let lanes = rows[0].len();
    let mut frontier = vec![false; lanes];
    frontier[start] = true;
    let mut out = Vec::new();
    for row in rows {
        frontier = (0..lanes)
            .map(|k| !row[k] && (0..lanes).any(|j| frontier[j] && k.abs_diff(j) <= dn_max))
            .collect();
        out.push(frontier.clone());
    }
    out
}

#[test]
fn every_generated_road_has_a_path_up_to_the_wall() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..2000 {
        let lanes = rng.random_range(1..=5);
        let config = EpisodeConfig {
            lanes,
            dn_max: rng.random_range(1..=2),
            p_obstacle: rng.random_range(0.0..=1.0),
            max_steps: rng.random_range(2..40),
            ..EpisodeConfig::default()
        };
        let start = rng.random_range(0..lanes);
        let n0 = start as f64 - (lanes as f64 - 1.0) / 2.0;
        let mut generator = SceneGenerator::new(&config, n0);
        let rows: Vec<Vec<bool>> = (1..config.max_steps)
            .map(|_| generator.next_row(&mut rng).0)
            .collect();
        let reach = reachable_rows(&rows, start, config.dn_max as usize);
        for (r, lanes) in reach.iter().enumerate() {
            assert!(lanes.iter().any(|&x| x), "row {r} cut off: {rows:?}");
        }
        assert_eq!(reach.last().unwrap().as_slice(), generator.reachable());
        // The wall itself is closed.
        assert!(generator.next_row(&mut rng).0.iter().all(|&o| o));
    }
}

#[test]
fn first_window_has_a_path() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let config = EpisodeConfig {
        p_obstacle: 0.8,
        ..EpisodeConfig::default()
    };
    for _ in 0..1000 {
        let scene = generate_scene(&config, &mut rng);
        let rows: Vec<Vec<bool>> = (0..scene.depth()).map(|r| scene.row_occupancy(r).to_vec()).collect();
        let reach = reachable_rows(&rows, 1, 1);
        assert!(reach.iter().all(|row| row.iter().any(|&x| x)));
    }
}

#[test]
fn entering_an_occupied_cell_is_a_collision() {
    let mut e = env(EpisodeConfig::default());
    let mut scene = Scene::empty(3, 10);
    uniform_limits(&mut scene, 2.0);
    scene.v0 = 2.0;
    scene.set_occupied(1, 1, true);
    e.reset_to_scene(scene).unwrap();
    let out = e.step(&[0.0; 6]).unwrap();
    assert!(out.done);
    assert_eq!(out.info.terminal, TerminalKind::Collision);
    assert_eq!(out.info.layers_advanced, 2);
    assert_eq!(out.reward, 1.0 - out.info.cost.total - 20.0);
    // Straight at the limit: nothing to pay.
    assert_eq!(out.info.cost.total, 0.0);
    assert_eq!(out.reward, -19.0);
}

#[test]
fn halting_with_the_wall_in_view_is_a_success() {
    let mut e = env(EpisodeConfig::evaluation());
    let mut scene = Scene::empty(3, 10);
    uniform_limits(&mut scene, 1.0);
    for k in 0..3 {
        scene.set_occupied(5, k, true);
    }
    scene.v0 = 1.0;
    e.reset_to_scene(scene).unwrap();
    let out = e.step(&[0.0, 0.0, 0.0, -1.0, 0.0, 0.0]).unwrap();
    assert!(out.done);
    assert_eq!(out.info.terminal, TerminalKind::Success);
    assert_eq!(out.info.layers_advanced, 0);
    // On the halted layer: speed error (1 - 0)^2, acceleration 1 / (2 * 5),
    // and jerk 0 - 0.1 since the tail stays halted.
    let w = CostWeights::default();
    let cost = w.speed_error * 1.0 + w.acceleration * 0.1 + w.jerk * 0.1;
    assert!((out.info.cost.total - cost).abs() < 1e-12, "{}", out.info.cost.total);
    assert_eq!(out.reward, 1.0 - out.info.cost.total + 10.0);
}

#[test]
fn halting_without_the_wall_is_a_no_path_stop() {
    let mut e = env(EpisodeConfig::evaluation());
    let mut scene = Scene::empty(3, 10);
    uniform_limits(&mut scene, 1.0);
    scene.v0 = 1.0;
    e.reset_to_scene(scene).unwrap();
    let out = e.step(&[0.0, 0.0, 0.0, -1.0, 0.0, 0.0]).unwrap();
    assert!(out.done);
    assert_eq!(out.info.terminal, TerminalKind::NoPath);
    assert_eq!(out.reward, 1.0 - out.info.cost.total);
}

#[test]
fn free_road_reward_is_one_minus_the_speed_error() {
    let mut e = env(EpisodeConfig::default());
    let mut scene = Scene::empty(3, 10);
    uniform_limits(&mut scene, 3.0);
    scene.v0 = 2.0;
    e.reset_to_scene(scene).unwrap();
    let out = e.step(&[0.0; 6]).unwrap();
    assert_eq!(out.info.terminal, TerminalKind::Running);
    assert_eq!(out.info.layers_advanced, 3);
    // Three layers at 2 under a limit of 3, weighted 0.2 each.
    assert!((out.reward - (1.0 - 3.0 * 0.2)).abs() < 1e-12, "{}", out.reward);
    assert_eq!(e.progress(), 3);
}

#[test]
fn gated_random_driving_never_collides() {
    let mut e = env(EpisodeConfig::evaluation());
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut stops = 0;
    for episode in 0..1000 {
        e.seed(episode);
        e.reset();
        loop {
            let out = e.step(&random_action(&mut rng, 6)).unwrap();
            assert_ne!(out.info.terminal, TerminalKind::Collision, "episode {episode}");
            if out.info.emergency_stop {
                stops += 1;
                assert!(out.info.planned.points.iter().all(|p| p.v == 0.0));
            }
            if out.done {
                break;
            }
        }
    }
    eprintln!("emergency stops: {stops}");
}
