//! Constraining a proposed trajectory to the collision-free lattice set.
//!
//! The feasible set holds every lattice trajectory over the plan horizon that
//! stays on lane centers at quantized speeds, respects the per-layer motion
//! bounds, never enters an occupied cell and keeps the centripetal term within
//! `c_max`. A proposal is kept if its nearest feasible trajectory is closer
//! than `tau` in every coordinate; otherwise it is replaced by that nearest
//! trajectory.
//!
//! Feasibility is judged on lattice cells: the start state is snapped to its
//! lane center and rounded speed, and a layer planned at speed 0 is a halt.
//! A halt keeps the previous lane and every later layer repeats it at speed 0.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::{self, CostConfig};
use crate::env::{EpisodeConfig, Scene};
use crate::trajectory::{enters_layer, lane_center, lane_index, LatticePoint, Trajectory};

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum SafetyError {
    #[error("no collision-free trajectory exists")]
    NoPath,
    #[error("projection onto an empty feasible set")]
    EmptyFeasibleSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SafetyConfig {
    /// Largest per-coordinate deviation for which a proposal is kept as is.
    pub tau: f64,
    /// Bound on the magnitude of the centripetal cost term.
    pub c_max: f64,
    /// Speeds a candidate may take; `None` means `0..=v_max`.
    pub speed_levels: Option<Vec<f64>>,
}

impl Default for SafetyConfig {
    fn default() -> Self {
        Self {
            tau: 0.5,
            c_max: 2.0,
            speed_levels: None,
        }
    }
}

impl SafetyConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.tau > 0.0) || !(self.c_max > 0.0) {
            return Err("safety tau and c_max must be > 0".into());
        }
        if let Some(levels) = &self.speed_levels {
            validate_levels(levels)?;
        }
        Ok(())
    }

    pub fn levels(&self, config: &EpisodeConfig) -> Vec<f64> {
        self.speed_levels
            .clone()
            .unwrap_or_else(|| config.speed_levels())
    }
}

/// Speed levels must be distinct nonnegative whole numbers so that rounding
/// a speed recovers its level.
pub(crate) fn validate_levels(levels: &[f64]) -> Result<(), String> {
    if levels.is_empty() {
        return Err("speed_levels must not be empty".into());
    }
    if levels.iter().any(|v| !(*v >= 0.0) || v.fract() != 0.0) {
        return Err("speed_levels must be nonnegative whole numbers".into());
    }
    let mut sorted = levels.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    if sorted.len() != levels.len() {
        return Err("speed_levels must be distinct".into());
    }
    Ok(())
}

/// The discrete trajectory space shared by the safety projection and the
/// exhaustive planner.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    pub lanes: usize,
    pub horizon: usize,
    /// Lateral moves per layer, in lanes.
    pub lateral: Vec<i64>,
    /// Candidate speeds, ascending.
    pub speed_levels: Vec<f64>,
    pub dv_max: f64,
    pub c_max: f64,
    pub cost: CostConfig,
}

impl Lattice {
    /// Lattice for a planning cycle starting at speed `v0`.
    pub fn new(config: &EpisodeConfig, levels: &[f64], c_max: f64, v0: f64) -> Self {
        let dn = i64::from(config.dn_max);
        let mut speed_levels = levels.to_vec();
        speed_levels.sort_by(f64::total_cmp);
        Self {
            lanes: config.lanes,
            horizon: config.plan_horizon,
            lateral: (-dn..=dn).collect(),
            speed_levels,
            dv_max: config.dv_max,
            c_max,
            cost: config.cost_config(v0),
        }
    }

    pub fn for_safety(config: &EpisodeConfig, safety: &SafetyConfig, v0: f64) -> Self {
        Self::new(config, &safety.levels(config), safety.c_max, v0)
    }

    /// The snapped start cell of an ego at `(n0, v0)`.
    pub fn snap_start(&self, n0: f64, v0: f64) -> LatticePoint {
        LatticePoint::new(
            lane_center(lane_index(n0, self.lanes), self.lanes),
            v0.round().max(0.0),
        )
    }

    /// Calls `visit` with every feasible point sequence (start excluded), in
    /// ascending lane-then-speed order layer by layer.
    pub fn walk<F: FnMut(&[LatticePoint])>(&self, scene: &Scene, mut visit: F) {
        assert!(
            scene.depth() >= self.horizon,
            "scene depth {} is shorter than the plan horizon {}",
            scene.depth(),
            self.horizon
        );
        let start = self.snap_start(scene.n0, scene.v0);
        let mut path = Vec::with_capacity(self.horizon + 1);
        path.push(start);
        let mut ns = Vec::with_capacity(self.horizon + 1);
        ns.push(start.n);
        self.extend(scene, &mut path, &mut ns, false, &mut visit);
    }

    fn extend<F: FnMut(&[LatticePoint])>(
        &self,
        scene: &Scene,
        path: &mut Vec<LatticePoint>,
        ns: &mut Vec<f64>,
        halted: bool,
        visit: &mut F,
    ) {
        let depth = path.len() - 1;
        if depth == self.horizon {
            visit(&path[1..]);
            return;
        }
        let prev = path[depth];
        if halted {
            self.push(scene, path, ns, prev, true, visit);
            return;
        }
        let lane = lane_index(prev.n, self.lanes) as i64;
        let mut lanes: Vec<usize> = self
            .lateral
            .iter()
            .map(|d| lane + d)
            .filter(|&k| k >= 0 && k < self.lanes as i64)
            .map(|k| k as usize)
            .collect();
        lanes.sort_unstable();
        lanes.dedup();
        for k in lanes {
            let n = lane_center(k, self.lanes);
            for &v in &self.speed_levels {
                if (v - prev.v).abs() > self.dv_max {
                    continue;
                }
                if enters_layer(v) {
                    if scene.occupied(depth, k) {
                        continue;
                    }
                    self.push(scene, path, ns, LatticePoint::new(n, v), false, visit);
                } else if n == prev.n {
                    self.push(scene, path, ns, LatticePoint::new(n, 0.0), true, visit);
                }
            }
        }
    }

    /// Whether `points` is one of the sequences `walk` visits.
    pub fn admits(&self, scene: &Scene, points: &[LatticePoint]) -> bool {
        if points.len() != self.horizon || scene.depth() < self.horizon {
            return false;
        }
        let start = self.snap_start(scene.n0, scene.v0);
        let mut ns = Vec::with_capacity(self.horizon + 1);
        ns.push(start.n);
        ns.extend(points.iter().map(|p| p.n));
        let mut prev = start;
        let mut halted = false;
        for (i, &p) in points.iter().enumerate() {
            if halted {
                if p != prev {
                    return false;
                }
            } else {
                let k = lane_index(p.n, self.lanes);
                let d = k as i64 - lane_index(prev.n, self.lanes) as i64;
                if p.n != lane_center(k, self.lanes)
                    || !self.lateral.contains(&d)
                    || !self.speed_levels.contains(&p.v)
                    || (p.v - prev.v).abs() > self.dv_max
                {
                    return false;
                }
                if enters_layer(p.v) {
                    if scene.occupied(i, k) {
                        return false;
                    }
                } else if p.n == prev.n && p.v == 0.0 {
                    halted = true;
                } else {
                    return false;
                }
            }
            let v = if i == 0 { start.v } else { points[i - 1].v };
            if let Some(k) = cost::curvature_at(&ns[..i + 2], i, &self.cost) {
                if cost::centripetal(k, v, &self.cost).abs() > self.c_max {
                    return false;
                }
            }
            prev = p;
        }
        true
    }

    /// Appends `p` if the centripetal bound still holds at the previous layer.
    fn push<F: FnMut(&[LatticePoint])>(
        &self,
        scene: &Scene,
        path: &mut Vec<LatticePoint>,
        ns: &mut Vec<f64>,
        p: LatticePoint,
        halted: bool,
        visit: &mut F,
    ) {
        ns.push(p.n);
        let i = ns.len() - 2;
        let ok = match cost::curvature_at(ns, i, &self.cost) {
            Some(k) => cost::centripetal(k, path[i].v, &self.cost).abs() <= self.c_max,
            None => true,
        };
        if ok {
            path.push(p);
            self.extend(scene, path, ns, halted, visit);
            path.pop();
        }
        ns.pop();
    }
}

/// Flattened feasible trajectories, `2 * horizon` values each.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleSet {
    horizon: usize,
    start: LatticePoint,
    data: Vec<f64>,
}

impl FeasibleSet {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// The snapped start cell the candidates continue from.
    pub fn start(&self) -> LatticePoint {
        self.start
    }

    pub fn len(&self) -> usize {
        if self.horizon == 0 {
            0
        } else {
            self.data.len() / (2 * self.horizon)
        }
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Candidate `i` as `(n_1..n_H, v_1..v_H)`.
    pub fn get(&self, i: usize) -> &[f64] {
        let w = 2 * self.horizon;
        &self.data[i * w..(i + 1) * w]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(2 * self.horizon.max(1))
    }

    pub fn contains(&self, flat: &[f64]) -> bool {
        self.iter().any(|c| c == flat)
    }

    pub fn trajectory(&self, i: usize) -> Trajectory {
        Trajectory::from_flat(self.start, self.get(i))
    }
}

pub fn enumerate_free_set(scene: &Scene, config: &EpisodeConfig, safety: &SafetyConfig) -> FeasibleSet {
    let lattice = Lattice::for_safety(config, safety, scene.v0);
    let h = lattice.horizon;
    let mut data = Vec::new();
    lattice.walk(scene, |pts| {
        data.extend(pts.iter().map(|p| p.n));
        data.extend(pts.iter().map(|p| p.v));
    });
    FeasibleSet {
        horizon: h,
        start: lattice.snap_start(scene.n0, scene.v0),
        data,
    }
}

/// Orders equal-length vectors lexicographically.
pub(crate) fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Less => return true,
            std::cmp::Ordering::Greater => return false,
            std::cmp::Ordering::Equal => {}
        }
    }
    false
}

/// The member nearest to `a` in squared Euclidean distance, ties going to the
/// lexicographically smallest member.
pub fn project<'a>(a: &[f64], set: &'a FeasibleSet) -> Result<&'a [f64], SafetyError> {
    let mut best: Option<(f64, &[f64])> = None;
    for u in set.iter() {
        assert_eq!(u.len(), a.len(), "proposal and candidates differ in length");
        let d: f64 = u.iter().zip(a).map(|(x, y)| (x - y) * (x - y)).sum();
        best = match best {
            Some((bd, bu)) if bd < d || (bd == d && !lex_less(u, bu)) => Some((bd, bu)),
            _ => Some((d, u)),
        };
    }
    best.map(|(_, u)| u).ok_or(SafetyError::EmptyFeasibleSet)
}

/// Keeps `a` if it is within `tau` of its projection in every coordinate,
/// otherwise returns the projection continuing from `a`'s start.
pub fn constrain(
    a: &Trajectory,
    scene: &Scene,
    config: &EpisodeConfig,
    safety: &SafetyConfig,
) -> Result<Trajectory, SafetyError> {
    let set = enumerate_free_set(scene, config, safety);
    if set.is_empty() {
        return Err(SafetyError::NoPath);
    }
    let flat = a.flatten();
    let u = project(&flat, &set)?;
    let gap = u
        .iter()
        .zip(&flat)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    if gap < safety.tau {
        Ok(a.clone())
    } else {
        Ok(Trajectory::from_flat(a.start, u))
    }
}
