mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rltraj::cost::{
    aggregate_metrics, compare_planners, layer_terms, step_reward, term, trajectory_cost,
    weighted_cost, CentripetalForm, CostConfig, CostWeights, CurvatureStencil, EpisodeMetrics,
    LayerTerms, Measure, Outcome, StepTerms, TermKind,
};
use rltraj::env::{EpisodeConfig, Scene};
use rltraj::trajectory::{LatticePoint, Trajectory};

fn cfg() -> CostConfig {
    CostConfig {
        layer_spacing: 5.0,
        lane_width: 3.5,
        lanes: 3,
        curvature: CurvatureStencil::Centered,
        centripetal: CentripetalForm::Linear,
    }
}

fn traj(start: (f64, f64), pts: &[(f64, f64)]) -> Trajectory {
    Trajectory::new(
        LatticePoint::new(start.0, start.1),
        pts.iter().map(|&(n, v)| LatticePoint::new(n, v)).collect(),
    )
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * (1.0 + b.abs())
}

/// Start (0, 2), then (1, 3), (1, 3), (0, 2) on a 3-lane road with L = 5 m
/// and 3.5 m lanes. n = 1 is lane 2 and n = 0 lane 1.
fn fixed_case() -> (Trajectory, Scene) {
    let mut s = Scene::empty(3, 3);
    s.set_speed_limit(0, 2, 4.0);
    s.set_speed_limit(1, 2, 3.0);
    s.set_speed_limit(2, 1, 2.0);
    (traj((0.0, 2.0), &[(1.0, 3.0), (1.0, 3.0), (0.0, 2.0)]), s)
}

#[test]
fn fixed_three_layer_trajectory_by_hand() {
    let (t, s) = fixed_case();
    // Lateral steps are 3.5, 0, -3.5 m, so dist = sqrt(25 + 12.25), 5, sqrt(37.25).
    let diag = 6.103_277_807_866_851;
    let acc = 1.0 / (2.0 * diag);
    let expect: [(TermKind, [f64; 4]); 7] = [
        // (v_ref - v)^2 with v_ref = 4, 3, 2.
        (TermKind::SpeedError, [0.0, 1.0, 0.0, 0.0]),
        // dv^2 / (2 dist) with dv = 1, 0, -1.
        (TermKind::Acceleration, [0.0, acc, 0.0, acc]),
        // a_{i+1} - a_i; undefined at the last layer.
        (TermKind::Jerk, [0.0, -acc, acc, 0.0]),
        (TermKind::ExtraDistance, [0.0, diag - 5.0, 0.0, diag - 5.0]),
        // Second differences -1, -1 lanes, times 3.5 / 5.
        (TermKind::Curvature, [0.0, -0.7, -0.7, 0.0]),
        (TermKind::LaneCrossing, [0.0, 1.0, 0.0, 1.0]),
        // Curvature times speed 3.
        (TermKind::Centripetal, [0.0, -2.1, -2.1, 0.0]),
    ];
    for (kind, values) in expect {
        let got = term(kind, &t, &s, &cfg()).unwrap();
        for (g, e) in got.iter().zip(values) {
            assert!(close(*g, e), "{kind:?}: {got:?} vs {values:?}");
        }
    }

    let report = trajectory_cost(&t, &s, &CostWeights::default(), &cfg()).unwrap();
    assert!(close(report.speed_error, 1.0));
    assert!(close(report.acceleration, 2.0 * acc));
    assert!(close(report.jerk, 2.0 * acc));
    assert!(close(report.extra_distance, 2.0 * (diag - 5.0)));
    assert!(close(report.curvature, 1.4));
    assert_eq!(report.lane_crossings, 2);
    assert!(close(report.centripetal, 4.2));
    // 0.2*1 + 0.5*2a + 0.5*2a + 0.5*2(diag-5) + 0.5*1.4 + 0.3*2 + 0.5*4.2
    let total = 0.2 + 2.0 * acc + (diag - 5.0) + 0.7 + 0.6 + 2.1;
    assert!(close(report.total, total), "{} vs {total}", report.total);
    assert!(close(weighted_cost(&t, &s, &CostWeights::default(), &cfg()).unwrap(), total));
}

#[test]
fn straight_reference_speed_costs_nothing() {
    let mut s = Scene::empty(3, 4);
    for r in 0..4 {
        for k in 0..3 {
            s.set_speed_limit(r, k, 3.0);
        }
    }
    let t = traj((1.0, 3.0), &[(1.0, 3.0); 4]);
    let layers = layer_terms(&t, &s, &cfg()).unwrap();
    assert!(layers.iter().all(|l| *l == LayerTerms::default()), "{layers:?}");
    let report = trajectory_cost(&t, &s, &CostWeights::default(), &cfg()).unwrap();
    assert_eq!(report.total, 0.0);
}

#[test]
fn single_weight_isolates_speed_error() {
    let (t, s) = fixed_case();
    let w = CostWeights {
        speed_error: 0.7,
        ..CostWeights::zero()
    };
    let report = trajectory_cost(&t, &s, &w, &cfg()).unwrap();
    assert!(close(report.total, 0.7 * 1.0));
}

#[test]
fn step_reward_terminal_offsets() {
    let (t, s) = fixed_case();
    let report = trajectory_cost(&t, &s, &CostWeights::default(), &cfg()).unwrap();
    let base = 1.0 - report.total;
    assert_eq!(step_reward(Outcome::Running, &report), base);
    assert_eq!(step_reward(Outcome::Success, &report), base + 10.0);
    assert_eq!(step_reward(Outcome::Failure, &report), base - 20.0);
    assert_eq!(step_reward(Outcome::Stopped, &report), base);
}

#[test]
fn scripted_episode_aggregates_by_hand() {
    let layer = |r: f64, a: f64, j: f64, d: f64, k: f64, l: f64, c: f64| LayerTerms {
        speed_error: r,
        acceleration: a,
        jerk: j,
        extra_distance: d,
        curvature: k,
        lane_crossing: l,
        centripetal: c,
    };
    let steps = vec![
        StepTerms {
            reward: 0.5,
            layers: vec![layer(1.0, 0.1, -0.3, 0.0, 0.2, 0.0, 0.4)],
        },
        StepTerms {
            reward: -1.0,
            layers: vec![layer(4.0, 0.2, 0.1, 1.5, -0.9, 1.0, -1.8)],
        },
        StepTerms {
            reward: 0.0,
            layers: vec![layer(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)],
        },
        StepTerms {
            reward: 2.0,
            layers: vec![layer(1.0, 0.05, 0.0, 0.5, 0.1, 1.0, 0.3)],
        },
        StepTerms {
            reward: -0.5,
            layers: vec![layer(9.0, 0.4, 0.2, 0.0, 0.0, 0.0, 0.0)],
        },
    ];
    let m = aggregate_metrics(&steps);
    // Means over five steps / layers, maxima of magnitudes, sum of crossings.
    assert!(close(m.step_reward, 1.0 / 5.0));
    assert!(close(m.speed_track_err, 15.0 / 5.0));
    assert!(close(m.acceleration, 0.4));
    assert!(close(m.jerk, 0.3));
    assert!(close(m.extra_distance, 2.0 / 5.0));
    assert!(close(m.curvature, 0.9));
    assert_eq!(m.lane_changes, 2.0);
    assert!(close(m.centripetal_acc, 1.8));

    let straight = vec![StepTerms {
        reward: 1.0,
        layers: vec![LayerTerms::default(); 3],
    }];
    let m = aggregate_metrics(&straight);
    assert_eq!(m.jerk, 0.0);
    assert_eq!(m.lane_changes, 0.0);
}

#[test]
fn comparison_moments_match_closed_form() {
    // N(3, 2^2): the sample mean should sit within a few standard errors of
    // 3 and the standard error near 2 / sqrt(n).
    use rand_distr::{Distribution, Normal};
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let normal = Normal::new(3.0, 2.0).unwrap();
    let n = 1000;
    let a: Vec<EpisodeMetrics> = (0..n)
        .map(|_| EpisodeMetrics {
            jerk: normal.sample(&mut rng),
            ..EpisodeMetrics::default()
        })
        .collect();
    let table = compare_planners("a", &a, "b", &a).unwrap();
    let row = table.row(Measure::Jerk);
    let se = 2.0 / (n as f64).sqrt();
    assert!((row.a.mean - 3.0).abs() < 4.0 * se, "{}", row.a.mean);
    assert!((row.a.stderr - se).abs() < 0.1 * se, "{}", row.a.stderr);
    assert_eq!(row.a, row.b);
    assert_eq!(table.rows.len(), 8);
}

proptest! {
    #[test]
    fn total_is_linear_in_the_weights(
        w1 in proptest::array::uniform7(0.0..2.0f64),
        w2 in proptest::array::uniform7(0.0..2.0f64),
    ) {
        let (t, s) = fixed_case();
        let mk = |w: [f64; 7]| CostWeights {
            speed_error: w[0],
            acceleration: w[1],
            jerk: w[2],
            extra_distance: w[3],
            curvature: w[4],
            lane_crossing: w[5],
            centripetal: w[6],
        };
        let sum: [f64; 7] = std::array::from_fn(|i| w1[i] + w2[i]);
        let f = |w| trajectory_cost(&t, &s, &mk(w), &cfg()).unwrap().total;
        prop_assert!((f(sum) - f(w1) - f(w2)).abs() < 1e-9);
    }

    #[test]
    fn weighted_cost_matches_the_term_oracle(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let config = EpisodeConfig::default();
        let s = common::random_scene(&mut rng, 3, 4, 0.3, 5);
        let ns: Vec<f64> = (0..4).map(|_| rng.random_range(-1.5..1.5)).collect();
        let vs: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..5.0)).collect();
        let t = Trajectory::new(
            LatticePoint::new(ns[0], vs[0]),
            (1..4).map(|i| LatticePoint::new(ns[i], vs[i])).collect(),
        );
        let c = config.cost_config(vs[0]);
        let w = CostWeights::default();
        let got = weighted_cost(&t, &s, &w, &c).unwrap();
        let want = common::oracle_cost(&ns, &vs, &s, &w, c.lane_width, c.layer_spacing, &config);
        prop_assert!((got - want).abs() < 1e-9 * (1.0 + want.abs()), "{got} vs {want}");
        prop_assert!(got >= 0.0);
        let report = trajectory_cost(&t, &s, &w, &c).unwrap();
        prop_assert!((report.total - got).abs() < 1e-9 * (1.0 + got.abs()));
    }
}
