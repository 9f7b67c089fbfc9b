mod common;

use std::time::Duration;

use common::Rules;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rltraj::cost::CostWeights;
use rltraj::env::{EpisodeConfig, Scene};
use rltraj::safety::{enumerate_free_set, SafetyConfig, SafetyError};
use rltraj::search::{plan_exhaustive, query_latency, ExhaustivePlanner, Planner, SearchConfig};
use rltraj::trajectory::Trajectory;

fn random_problem(rng: &mut ChaCha8Rng) -> (EpisodeConfig, SearchConfig, Scene) {
    let (config, levels, c_max, scene) = common::random_lattice_problem(rng);
    let search = SearchConfig {
        speed_levels: Some(levels),
        c_max,
        ..SearchConfig::default()
    };
    (config, search, scene)
}

/// Cheapest candidate by a separately written enumerator and cost. Costs
/// within `1e-12` (relative) of the minimum count as ties and go to the
/// lexicographically smallest candidate.
fn oracle_plan(
    config: &EpisodeConfig,
    search: &SearchConfig,
    scene: &Scene,
    weights: &CostWeights,
) -> Option<(f64, Vec<f64>)> {
    let rules = Rules::new(config, search.speed_levels.as_ref().unwrap(), search.c_max, scene.v0);
    let lane0 = rules.lane_of(scene.n0);
    let h = config.plan_horizon;
    let spacing = rules.spacing;
    let scored: Vec<(f64, Vec<f64>)> = rules
        .brute_force(scene, lane0, scene.v0.round())
        .into_iter()
        .map(|flat| {
            let mut ns = vec![scene.n0];
            ns.extend_from_slice(&flat[..h]);
            let mut vs = vec![scene.v0];
            vs.extend_from_slice(&flat[h..]);
            let c = common::oracle_cost(&ns, &vs, scene, weights, config.lane_width, spacing, config);
            (c, flat)
        })
        .collect();
    let min = scored.iter().map(|(c, _)| *c).fold(f64::INFINITY, f64::min);
    scored
        .into_iter()
        .filter(|(c, _)| *c <= min + 1e-12 * (1.0 + min.abs()))
        .min_by(|a, b| {
            if common::lex_before(&a.1, &b.1) {
                std::cmp::Ordering::Less
            } else {
                std::cmp::Ordering::Greater
            }
        })
}

#[test]
fn minimum_matches_independent_enumerator() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let weights = CostWeights::default();
    let mut planned = 0;
    for _ in 0..200 {
        let (config, search, scene) = random_problem(&mut rng);
        let got = plan_exhaustive(&scene, &weights, &config, &search);
        match oracle_plan(&config, &search, &scene, &weights) {
            Some((cost, flat)) => {
                let plan = got.unwrap();
                assert!((plan.cost - cost).abs() < 1e-9, "{} vs {cost}\n{scene}", plan.cost);
                assert_eq!(plan.trajectory.flatten(), flat, "\n{scene}");
                planned += 1;
            }
            None => assert_eq!(got, Err(SafetyError::NoPath)),
        }
    }
    assert!(planned > 50, "only {planned} scenes had a plan");
}

#[test]
fn plans_lie_in_the_safety_feasible_set() {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    for _ in 0..200 {
        let (config, search, scene) = random_problem(&mut rng);
        let Ok(plan) = plan_exhaustive(&scene, &CostWeights::default(), &config, &search) else {
            continue;
        };
        let safety = SafetyConfig {
            speed_levels: search.speed_levels.clone(),
            c_max: search.c_max,
            ..SafetyConfig::default()
        };
        let set = enumerate_free_set(&scene, &config, &safety);
        assert!(set.contains(&plan.trajectory.flatten()));
    }
}

#[test]
fn single_obstacle_dead_ahead_shifts_one_lane() {
    let config = EpisodeConfig {
        sensor_depth: 3,
        ..EpisodeConfig::evaluation()
    };
    let mut scene = Scene::empty(3, 3);
    for r in 0..3 {
        for k in 0..3 {
            scene.set_speed_limit(r, k, 2.0);
        }
    }
    scene.v0 = 2.0;
    scene.set_occupied(1, 1, true);
    let search = SearchConfig::default();
    let weights = CostWeights::default();
    let plan = plan_exhaustive(&scene, &weights, &config, &search).unwrap();
    let oracle = oracle_plan(
        &config,
        &SearchConfig {
            speed_levels: Some(config.speed_levels()),
            ..search
        },
        &scene,
        &weights,
    )
    .unwrap();
    // Keeping speed 2 and easing to 1 cost the same; the tie goes to the slower.
    assert_eq!(plan.trajectory.flatten(), oracle.1, "{} vs {}", plan.cost, oracle.0);
    let widest = plan.trajectory.points.iter().map(|p| p.n.abs()).fold(0.0, f64::max);
    assert_eq!(widest, 1.0);
}

#[test]
fn latency_grows_with_speed_levels() {
    let config = EpisodeConfig::evaluation();
    let scenes = rltraj::campaign::bench_scenes(&config, 100, 1);
    let mut small = ExhaustivePlanner::new(
        config.clone(),
        CostWeights::default(),
        SearchConfig {
            speed_levels: Some(vec![0.0, 1.0, 2.0]),
            ..SearchConfig::default()
        },
    );
    let mut large = ExhaustivePlanner::new(config, CostWeights::default(), SearchConfig::default());
    let a = query_latency(&mut small, &scenes);
    let b = query_latency(&mut large, &scenes);
    assert_eq!(a.queries, 100);
    assert!(b.mean > a.mean, "6 levels {} s vs 3 levels {} s", b.mean, a.mean);
}

struct Sleeper(Duration);

impl Planner for Sleeper {
    fn name(&self) -> &str {
        "sleeper"
    }

    fn plan(&mut self, scene: &Scene) -> Result<Trajectory, SafetyError> {
        std::thread::sleep(self.0);
        Ok(Trajectory::new(
            rltraj::trajectory::LatticePoint::new(scene.n0, scene.v0),
            Vec::new(),
        ))
    }
}

#[test]
fn stub_latency_is_its_sleep() {
    let scenes = vec![Scene::empty(3, 3); 20];
    let lat = query_latency(&mut Sleeper(Duration::from_millis(2)), &scenes);
    assert!(lat.mean >= 0.002, "{}", lat.mean);
    assert!(lat.mean < 0.006, "{}", lat.mean);
}
