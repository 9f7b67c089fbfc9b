//! Exhaustive discrete-search baseline.
//!
//! Every combination of lateral move and speed per layer over the plan
//! horizon is built, checked against the safety lattice and costed with the
//! same weighted cost the reward uses; the cheapest one wins. Plans therefore
//! always lie in the feasible set the safety projection uses.

use std::hint::black_box;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cost::{self, CostWeights, Summary};
use crate::env::{EpisodeConfig, Scene};
use crate::safety::{lex_less, validate_levels, Lattice, SafetyError};
use crate::trajectory::{lane_center, lane_index, LatticePoint, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    /// Candidate speeds; `None` means `0..=v_max`.
    pub speed_levels: Option<Vec<f64>>,
    /// Lateral moves per layer in lanes; `None` means `-dn_max..=dn_max`.
    pub dn_choices: Option<Vec<i64>>,
    /// Bound on the magnitude of the centripetal cost term.
    pub c_max: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            speed_levels: None,
            dn_choices: None,
            c_max: 2.0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.c_max > 0.0) {
            return Err("search c_max must be > 0".into());
        }
        if let Some(levels) = &self.speed_levels {
            validate_levels(levels)?;
        }
        if matches!(&self.dn_choices, Some(d) if d.is_empty()) {
            return Err("dn_choices must not be empty".into());
        }
        Ok(())
    }

    pub fn lattice(&self, config: &EpisodeConfig, v0: f64) -> Lattice {
        let levels = self
            .speed_levels
            .clone()
            .unwrap_or_else(|| config.speed_levels());
        let mut lattice = Lattice::new(config, &levels, self.c_max, v0);
        if let Some(d) = &self.dn_choices {
            lattice.lateral = d.clone();
        }
        lattice
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub trajectory: Trajectory,
    pub cost: f64,
}

/// Relative cost difference below which two candidates count as equal.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// The minimum-cost feasible trajectory from the scene's ego state.
///
/// Costs are evaluated from the unsnapped ego state. Costs within
/// [`TIE_TOLERANCE`] (relative) are ties, since different orderings of the
/// same terms round differently; ties go to the lexicographically smallest
/// flattened trajectory.
pub fn plan_exhaustive(
    scene: &Scene,
    weights: &CostWeights,
    config: &EpisodeConfig,
    search: &SearchConfig,
) -> Result<Plan, SafetyError> {
    let lattice = search.lattice(config, scene.v0);
    let start = LatticePoint::new(scene.n0, scene.v0);
    let mut candidate = Trajectory::new(start, Vec::with_capacity(lattice.horizon));
    let mut best: Option<(f64, Vec<f64>)> = None;
    for_each_candidate(&lattice, scene, |pts| {
        candidate.points.clear();
        candidate.points.extend_from_slice(pts);
        let c = cost::weighted_cost(&candidate, scene, weights, &lattice.cost)
            .expect("plan horizon is at least one layer");
        let better = match &best {
            None => true,
            Some((bc, bf)) => {
                let tol = TIE_TOLERANCE * (1.0 + bc.abs());
                c < *bc - tol || (c <= *bc + tol && lex_less(&candidate.flatten(), bf))
            }
        };
        if better {
            best = Some((c, candidate.flatten()));
        }
    });
    best.map(|(cost, flat)| Plan {
        trajectory: Trajectory::from_flat(start, &flat),
        cost,
    })
    .ok_or(SafetyError::NoPath)
}

/// Visits every admissible sequence among all `(lateral move, speed)`
/// choices per layer, `(|lateral| * |levels|)^horizon` candidates in all.
/// No pruning: each full candidate is built and then checked.
fn for_each_candidate<F: FnMut(&[LatticePoint])>(lattice: &Lattice, scene: &Scene, mut visit: F) {
    let h = lattice.horizon;
    let per_layer = lattice.lateral.len() * lattice.speed_levels.len();
    if h == 0 || per_layer == 0 {
        return;
    }
    let start = lattice.snap_start(scene.n0, scene.v0);
    let lanes = lattice.lanes as i64;
    let mut digits = vec![0usize; h];
    let mut pts = vec![start; h];
    'candidates: loop {
        let mut valid = true;
        let mut lane = lane_index(start.n, lattice.lanes) as i64;
        for (p, &digit) in pts.iter_mut().zip(&digits) {
            lane += lattice.lateral[digit / lattice.speed_levels.len()];
            if lane < 0 || lane >= lanes {
                valid = false;
                break;
            }
            *p = LatticePoint::new(
                lane_center(lane as usize, lattice.lanes),
                lattice.speed_levels[digit % lattice.speed_levels.len()],
            );
        }
        if valid && lattice.admits(scene, &pts) {
            visit(&pts);
        }
        for d in digits.iter_mut().rev() {
            *d += 1;
            if *d < per_layer {
                continue 'candidates;
            }
            *d = 0;
        }
        return;
    }
}

/// Anything that maps a scene to a trajectory for the ego.
pub trait Planner {
    fn name(&self) -> &str;
    fn plan(&mut self, scene: &Scene) -> Result<Trajectory, SafetyError>;
}

#[derive(Debug, Clone)]
pub struct ExhaustivePlanner {
    pub config: EpisodeConfig,
    pub weights: CostWeights,
    pub search: SearchConfig,
}

impl ExhaustivePlanner {
    pub fn new(config: EpisodeConfig, weights: CostWeights, search: SearchConfig) -> Self {
        Self {
            config,
            weights,
            search,
        }
    }
}

impl Planner for ExhaustivePlanner {
    fn name(&self) -> &str {
        "exhaustive"
    }

    fn plan(&mut self, scene: &Scene) -> Result<Trajectory, SafetyError> {
        plan_exhaustive(scene, &self.weights, &self.config, &self.search).map(|p| p.trajectory)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Latency {
    /// Seconds per query.
    pub mean: f64,
    pub stderr: f64,
    pub queries: usize,
}

/// Wall-clock seconds per planning query over `scenes`, after one untimed
/// warm-up pass over the first few scenes.
pub fn query_latency<P: Planner + ?Sized>(planner: &mut P, scenes: &[Scene]) -> Latency {
    for s in scenes.iter().take(10) {
        let _ = black_box(planner.plan(black_box(s)));
    }
    let times: Vec<f64> = scenes
        .iter()
        .map(|s| {
            let t0 = Instant::now();
            let _ = black_box(planner.plan(black_box(s)));
            t0.elapsed().as_secs_f64()
        })
        .collect();
    let summary = Summary::of(&times);
    Latency {
        mean: summary.mean,
        stderr: summary.stderr,
        queries: times.len(),
    }
}
