//! Independent oracles shared by the integration tests. Nothing here calls
//! into the code under test except for plain data types.

#![allow(dead_code)]

use rand::Rng;
use rltraj::cost::{CentripetalForm, CostWeights, CurvatureStencil};
use rltraj::env::{EpisodeConfig, Scene};

/// Gaussian elimination with partial pivoting on a dense square system.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// A random scene with Bernoulli occupancy, integer speed limits in
/// `0..=v_max`, the ego on a random lane center at an integer speed.
pub fn random_scene<R: Rng>(rng: &mut R, lanes: usize, depth: usize, p: f64, v_max: u32) -> Scene {
    let occupancy: Vec<Vec<bool>> = (0..depth)
        .map(|_| (0..lanes).map(|_| rng.random_bool(p)).collect())
        .collect();
    let limits: Vec<Vec<f64>> = (0..depth)
        .map(|_| (0..lanes).map(|_| f64::from(rng.random_range(0..=v_max))).collect())
        .collect();
    let lane = rng.random_range(0..lanes);
    let n0 = lane as f64 - (lanes as f64 - 1.0) / 2.0;
    let v0 = f64::from(rng.random_range(0..=v_max));
    Scene::from_rows(&occupancy, &limits, n0, v0).unwrap()
}

/// The lattice rules, restated from scratch.
#[derive(Debug, Clone)]
pub struct Rules {
    pub lanes: usize,
    pub horizon: usize,
    pub dn_max: i64,
    pub dv_max: f64,
    pub levels: Vec<f64>,
    pub c_max: f64,
    pub lane_width: f64,
    pub spacing: f64,
    pub physical: bool,
}

impl Rules {
    pub fn new(config: &EpisodeConfig, levels: &[f64], c_max: f64, v0: f64) -> Self {
        let spacing = config
            .min_layer_spacing
            .max(v0 * config.speed_unit * config.layer_time);
        Self {
            lanes: config.lanes,
            horizon: config.plan_horizon,
            dn_max: i64::from(config.dn_max),
            dv_max: config.dv_max,
            levels: levels.to_vec(),
            c_max,
            lane_width: config.lane_width,
            spacing,
            physical: config.centripetal == CentripetalForm::Physical,
        }
    }

    pub fn center(&self, lane: usize) -> f64 {
        lane as f64 - (self.lanes as f64 - 1.0) / 2.0
    }

    pub fn lane_of(&self, n: f64) -> usize {
        let k = (n + self.lanes as f64 / 2.0).floor();
        k.clamp(0.0, self.lanes as f64 - 1.0) as usize
    }

    /// Whether the lane/speed sequence (start excluded) is feasible from
    /// `(lane0, v0)` on `scene`.
    pub fn feasible(&self, scene: &Scene, lane0: usize, v0: f64, seq: &[(usize, f64)]) -> bool {
        let mut lanes = vec![lane0];
        let mut speeds = vec![v0];
        let mut stopped = false;
        for (i, &(k, v)) in seq.iter().enumerate() {
            let (pk, pv) = (lanes[i], speeds[i]);
            if stopped {
                if k != pk || v != 0.0 {
                    return false;
                }
            } else {
                if (k as i64 - pk as i64).abs() > self.dn_max || (v - pv).abs() > self.dv_max {
                    return false;
                }
                if v < 0.5 {
                    if k != pk {
                        return false;
                    }
                    stopped = true;
                } else if scene.occupied(i, k) {
                    return false;
                }
            }
            lanes.push(k);
            speeds.push(v);
        }
        // Centered second difference of n at every layer that has both neighbors.
        for i in 1..lanes.len() - 1 {
            let second = self.center(lanes[i + 1]) - 2.0 * self.center(lanes[i]) + self.center(lanes[i - 1]);
            let k = second * self.lane_width / self.spacing;
            let c = if self.physical {
                k * speeds[i] * speeds[i]
            } else {
                k * speeds[i]
            };
            if c.abs() > self.c_max {
                return false;
            }
        }
        true
    }

    /// Every feasible sequence, each flattened to `(n_1..n_H, v_1..v_H)`.
    pub fn brute_force(&self, scene: &Scene, lane0: usize, v0: f64) -> Vec<Vec<f64>> {
        let cells: Vec<(usize, f64)> = (0..self.lanes)
            .flat_map(|k| self.levels.iter().map(move |&v| (k, v)))
            .collect();
        let total = cells.len().pow(self.horizon as u32);
        let mut out = Vec::new();
        for mut code in 0..total {
            let mut seq = vec![(0, 0.0); self.horizon];
            for slot in seq.iter_mut().rev() {
                *slot = cells[code % cells.len()];
                code /= cells.len();
            }
            if self.feasible(scene, lane0, v0, &seq) {
                let mut flat: Vec<f64> = seq.iter().map(|&(k, _)| self.center(k)).collect();
                flat.extend(seq.iter().map(|&(_, v)| v));
                out.push(flat);
            }
        }
        out
    }
}

/// Nearest flattened candidate by squared distance, ties to the
/// lexicographically smallest.
pub fn linear_scan_nearest<'a>(a: &[f64], set: &'a [Vec<f64>]) -> Option<&'a Vec<f64>> {
    let mut best: Option<(f64, &Vec<f64>)> = None;
    for c in set {
        let d: f64 = a.iter().zip(c).map(|(x, y)| (x - y) * (x - y)).sum();
        let better = match best {
            None => true,
            Some((bd, bc)) => d < bd || (d == bd && lex_before(c, bc)),
        };
        if better {
            best = Some((d, c));
        }
    }
    best.map(|(_, c)| c)
}

pub fn lex_before(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return true;
        }
        if x > y {
            return false;
        }
    }
    false
}

/// The weighted trajectory cost written out term by term, with `|f^j|`,
/// `|f^k|` and `|f^c|` in the sum. `ns`/`vs` include the start at index 0.
pub fn oracle_cost(
    ns: &[f64],
    vs: &[f64],
    scene: &Scene,
    w: &CostWeights,
    lane_width: f64,
    spacing: f64,
    config: &EpisodeConfig,
) -> f64 {
    let h = ns.len() - 1;
    let lanes = scene.lanes();
    let lane_of = |n: f64| ((n + lanes as f64 / 2.0).floor()).clamp(0.0, lanes as f64 - 1.0) as usize;
    let dist = |i: usize| {
        let dn = (ns[i] - ns[i - 1]) * lane_width;
        (spacing * spacing + dn * dn).sqrt()
    };
    let acc = |i: usize| (vs[i] - vs[i - 1]).powi(2) / (2.0 * dist(i));
    let curv = |i: usize| -> Option<f64> {
        if i == 0 || i + 1 > h {
            return None;
        }
        let second = match config.curvature {
            CurvatureStencil::Centered => ns[i + 1] - 2.0 * ns[i] + ns[i - 1],
            CurvatureStencil::Verbatim => {
                if i < 2 {
                    return None;
                }
                ns[i + 1] - 2.0 * ns[i] + ns[i - 2]
            }
        };
        Some(second * lane_width / spacing)
    };
    let mut total = 0.0;
    for i in 1..=h {
        let vref = scene.speed_limit(i - 1, lane_of(ns[i]));
        let r = (vref - vs[i]).powi(2);
        let a = acc(i);
        let j = if i + 1 <= h { acc(i + 1) - a } else { 0.0 };
        let d = dist(i) - spacing;
        let k = curv(i).unwrap_or(0.0);
        let l = if lane_of(ns[i]) != lane_of(ns[i - 1]) { 1.0 } else { 0.0 };
        let c = match config.centripetal {
            CentripetalForm::Linear => k * vs[i],
            CentripetalForm::Physical => k * vs[i] * vs[i],
        };
        total += w.speed_error * r
            + w.acceleration * a
            + w.jerk * j.abs()
            + w.extra_distance * d
            + w.curvature * k.abs()
            + w.lane_crossing * l
            + w.centripetal * c.abs();
    }
    total
}

/// A small random planning problem: lanes, horizon, speed levels and motion
/// bounds all drawn at random, the ego jittered off its lattice cell.
/// Returns the episode config, the speed levels, `c_max` and the scene.
pub fn random_lattice_problem<R: Rng>(rng: &mut R) -> (EpisodeConfig, Vec<f64>, f64, Scene) {
    let lanes = rng.random_range(1..=4);
    let horizon = rng.random_range(1..=3);
    let config = EpisodeConfig {
        lanes,
        sensor_depth: horizon,
        plan_horizon: horizon,
        move_layers: 1,
        v_max: 4,
        dn_max: rng.random_range(1..=2),
        dv_max: f64::from(rng.random_range(1..=2)),
        ..EpisodeConfig::default()
    };
    let count = rng.random_range(1..=4);
    let mut levels: Vec<f64> = rand::seq::index::sample(rng, 5, count)
        .into_iter()
        .map(|v| v as f64)
        .collect();
    levels.sort_by(f64::total_cmp);
    let c_max = rng.random_range(0.5..3.0);
    let p = rng.random_range(0.0..0.6);
    let mut scene = random_scene(rng, lanes, horizon, p, 4);
    scene.n0 += rng.random_range(-0.45..0.45);
    scene.v0 = (scene.v0 + rng.random_range(-0.45..0.45)).max(0.0);
    (config, levels, c_max, scene)
}

/// Advantages as explicit discounted sums of TD errors, truncated at the
/// end of each episode.
pub fn gae_oracle(r: &[f64], v: &[f64], done: &[bool], gamma: f64, lambda: f64) -> Vec<f64> {
    let n = r.len();
    let delta: Vec<f64> = (0..n)
        .map(|t| r[t] + if done[t] { 0.0 } else { gamma * v[t + 1] } - v[t])
        .collect();
    (0..n)
        .map(|t| {
            let mut sum = 0.0;
            for l in t..n {
                sum += (gamma * lambda).powi((l - t) as i32) * delta[l];
                if done[l] {
                    break;
                }
            }
            sum
        })
        .collect()
}

/// Central differences of `f` around `x`.
pub fn finite_diff(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut x = x.to_vec();
    (0..x.len())
        .map(|k| {
            let x0 = x[k];
            x[k] = x0 + h;
            let up = f(&x);
            x[k] = x0 - h;
            let down = f(&x);
            x[k] = x0;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Index of the first entry that differs by more than `rel * max(|a|, |b|) + floor`.
pub fn first_mismatch(a: &[f64], b: &[f64], rel: f64, floor: f64) -> Option<usize> {
    a.iter()
        .zip(b)
        .position(|(x, y)| (x - y).abs() > rel * x.abs().max(y.abs()) + floor)
}
