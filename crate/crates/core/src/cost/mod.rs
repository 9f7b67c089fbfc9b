//! Trajectory cost terms and the per-step reward built from them.
//!
//! Every term is evaluated per layer on a trajectory whose index 0 is the
//! current state; index 0 and any index lacking the neighbours a term needs
//! contribute 0. Lateral positions are converted to meters before use.

mod metrics;

pub use metrics::{
    aggregate_metrics, compare_planners, Aggregation, ComparisonRow, ComparisonTable,
    EpisodeMetrics, Measure, StepTerms, Summary,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::Scene;
use crate::trajectory::{lane_index, Trajectory};

pub const STEP_REWARD: f64 = 1.0;
pub const SUCCESS_REWARD: f64 = 10.0;
pub const FAILURE_REWARD: f64 = -20.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CostError {
    #[error("trajectory with {points} points (including the start) is too short for {term:?}")]
    DegenerateTrajectory { term: TermKind, points: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("no episodes to compare")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TermKind {
    SpeedError,
    Acceleration,
    Jerk,
    ExtraDistance,
    Curvature,
    LaneCrossing,
    Centripetal,
}

impl TermKind {
    pub const ALL: [TermKind; 7] = [
        TermKind::SpeedError,
        TermKind::Acceleration,
        TermKind::Jerk,
        TermKind::ExtraDistance,
        TermKind::Curvature,
        TermKind::LaneCrossing,
        TermKind::Centripetal,
    ];

    /// Points (start state included) needed for the term to be defined anywhere.
    fn min_points(self) -> usize {
        match self {
            TermKind::Jerk | TermKind::Curvature | TermKind::Centripetal => 3,
            _ => 2,
        }
    }
}

/// Which second difference the curvature term uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurvatureStencil {
    /// `(n[i+1] - 2 n[i] + n[i-1]) / L`
    #[default]
    Centered,
    /// `(n[i+1] - 2 n[i] + n[i-2]) / L`, the form printed in the cost table.
    Verbatim,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CentripetalForm {
    /// `curvature * v`
    #[default]
    Linear,
    /// `curvature * v^2`
    Physical,
}

/// Geometry the cost terms need for one planning cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostConfig {
    /// Layer spacing `L` in meters.
    pub layer_spacing: f64,
    pub lane_width: f64,
    pub lanes: usize,
    pub curvature: CurvatureStencil,
    pub centripetal: CentripetalForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostWeights {
    pub speed_error: f64,
    pub acceleration: f64,
    pub jerk: f64,
    pub extra_distance: f64,
    pub curvature: f64,
    pub lane_crossing: f64,
    pub centripetal: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            speed_error: 0.2,
            acceleration: 0.5,
            jerk: 0.5,
            extra_distance: 0.5,
            curvature: 0.5,
            lane_crossing: 0.3,
            centripetal: 0.5,
        }
    }
}

impl CostWeights {
    pub fn zero() -> Self {
        Self {
            speed_error: 0.0,
            acceleration: 0.0,
            jerk: 0.0,
            extra_distance: 0.0,
            curvature: 0.0,
            lane_crossing: 0.0,
            centripetal: 0.0,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            speed_error: self.speed_error * factor,
            acceleration: self.acceleration * factor,
            jerk: self.jerk * factor,
            extra_distance: self.extra_distance * factor,
            curvature: self.curvature * factor,
            lane_crossing: self.lane_crossing * factor,
            centripetal: self.centripetal * factor,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let all = [
            self.speed_error,
            self.acceleration,
            self.jerk,
            self.extra_distance,
            self.curvature,
            self.lane_crossing,
            self.centripetal,
        ];
        if all.iter().all(|w| *w >= 0.0 && w.is_finite()) {
            Ok(())
        } else {
            Err("cost weights must be finite and nonnegative".into())
        }
    }
}

/// All seven term values at one layer.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LayerTerms {
    pub speed_error: f64,
    pub acceleration: f64,
    pub jerk: f64,
    pub extra_distance: f64,
    pub curvature: f64,
    pub lane_crossing: f64,
    pub centripetal: f64,
}

impl LayerTerms {
    pub fn get(&self, kind: TermKind) -> f64 {
        match kind {
            TermKind::SpeedError => self.speed_error,
            TermKind::Acceleration => self.acceleration,
            TermKind::Jerk => self.jerk,
            TermKind::ExtraDistance => self.extra_distance,
            TermKind::Curvature => self.curvature,
            TermKind::LaneCrossing => self.lane_crossing,
            TermKind::Centripetal => self.centripetal,
        }
    }

    /// Weighted cost of this layer. Jerk, curvature and centripetal
    /// acceleration enter by magnitude.
    pub fn weighted(&self, w: &CostWeights) -> f64 {
        w.speed_error * self.speed_error
            + w.acceleration * self.acceleration
            + w.jerk * self.jerk.abs()
            + w.extra_distance * self.extra_distance
            + w.curvature * self.curvature.abs()
            + w.lane_crossing * self.lane_crossing
            + w.centripetal * self.centripetal.abs()
    }
}

/// Per-term sums over a trajectory and their weighted total. The signed
/// terms (jerk, curvature, centripetal) are summed by magnitude, so every
/// total is nonnegative and `total` is the weighted sum of the fields.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostReport {
    pub speed_error: f64,
    pub acceleration: f64,
    pub jerk: f64,
    pub extra_distance: f64,
    pub curvature: f64,
    pub lane_crossings: u32,
    pub centripetal: f64,
    pub total: f64,
}

impl CostReport {
    pub fn from_layers(layers: &[LayerTerms], weights: &CostWeights) -> Self {
        let mut report = CostReport::default();
        let mut crossings = 0.0;
        for t in layers {
            report.speed_error += t.speed_error;
            report.acceleration += t.acceleration;
            report.jerk += t.jerk.abs();
            report.extra_distance += t.extra_distance;
            report.curvature += t.curvature.abs();
            crossings += t.lane_crossing;
            report.centripetal += t.centripetal.abs();
        }
        report.lane_crossings = crossings as u32;
        report.total = weights.speed_error * report.speed_error
            + weights.acceleration * report.acceleration
            + weights.jerk * report.jerk
            + weights.extra_distance * report.extra_distance
            + weights.curvature * report.curvature
            + weights.lane_crossing * crossings
            + weights.centripetal * report.centripetal;
        report
    }
}

/// Terminal classification used by the reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Running,
    Success,
    Failure,
    /// The episode ended without success or failure.
    Stopped,
}

pub fn step_reward(outcome: Outcome, report: &CostReport) -> f64 {
    let terminal = match outcome {
        Outcome::Running | Outcome::Stopped => 0.0,
        Outcome::Success => SUCCESS_REWARD,
        Outcome::Failure => FAILURE_REWARD,
    };
    STEP_REWARD - report.total + terminal
}

/// Evaluates every term at every index `0..=H`.
///
/// Only the first two points are required; terms that need more neighbours
/// than the trajectory has are left at 0.
pub fn layer_terms(
    traj: &Trajectory,
    scene: &Scene,
    cfg: &CostConfig,
) -> Result<Vec<LayerTerms>, CostError> {
    let points = traj.horizon() + 1;
    if points < 2 {
        return Err(CostError::DegenerateTrajectory {
            term: TermKind::SpeedError,
            points,
        });
    }
    let l = cfg.layer_spacing;
    let n_m = |i: usize| traj.at(i).n * cfg.lane_width;
    let v = |i: usize| traj.at(i).v;
    let mut out = vec![LayerTerms::default(); points];

    for i in 1..points {
        let dn = n_m(i) - n_m(i - 1);
        let dist = (l * l + dn * dn).sqrt();
        let lane = lane_index(traj.at(i).n, cfg.lanes);
        let v_ref = scene.speed_limit(i - 1, lane);
        let dv = v(i) - v(i - 1);
        out[i].speed_error = (v_ref - v(i)).powi(2);
        out[i].acceleration = dv * dv / (2.0 * dist);
        out[i].extra_distance = dist - l;
        out[i].lane_crossing =
            if lane_index(traj.at(i - 1).n, cfg.lanes) != lane { 1.0 } else { 0.0 };
    }
    let ns: Vec<f64> = (0..points).map(|i| traj.at(i).n).collect();
    for i in 1..points.saturating_sub(1) {
        out[i].jerk = out[i + 1].acceleration - out[i].acceleration;
        if let Some(k) = curvature_at(&ns, i, cfg) {
            out[i].curvature = k;
            out[i].centripetal = centripetal(k, v(i), cfg);
        }
    }
    Ok(out)
}

/// Curvature term at interior index `i` of lateral positions `ns` (lane
/// units, index 0 the start state); `None` where the stencil is undefined.
pub fn curvature_at(ns: &[f64], i: usize, cfg: &CostConfig) -> Option<f64> {
    if i == 0 || i + 1 >= ns.len() {
        return None;
    }
    let second = match cfg.curvature {
        CurvatureStencil::Centered => ns[i + 1] - 2.0 * ns[i] + ns[i - 1],
        CurvatureStencil::Verbatim if i >= 2 => ns[i + 1] - 2.0 * ns[i] + ns[i - 2],
        CurvatureStencil::Verbatim => return None,
    };
    Some(second * cfg.lane_width / cfg.layer_spacing)
}

pub fn centripetal(curvature: f64, v: f64, cfg: &CostConfig) -> f64 {
    match cfg.centripetal {
        CentripetalForm::Linear => curvature * v,
        CentripetalForm::Physical => curvature * v * v,
    }
}

/// Per-layer values of one term; index 0 is the start state.
pub fn term(
    kind: TermKind,
    traj: &Trajectory,
    scene: &Scene,
    cfg: &CostConfig,
) -> Result<Vec<f64>, CostError> {
    let points = traj.horizon() + 1;
    if points < kind.min_points() {
        return Err(CostError::DegenerateTrajectory { term: kind, points });
    }
    Ok(layer_terms(traj, scene, cfg)?
        .iter()
        .map(|t| t.get(kind))
        .collect())
}

pub fn trajectory_cost(
    traj: &Trajectory,
    scene: &Scene,
    weights: &CostWeights,
    cfg: &CostConfig,
) -> Result<CostReport, CostError> {
    Ok(CostReport::from_layers(
        &layer_terms(traj, scene, cfg)?,
        weights,
    ))
}

/// Weighted cost without building a report; used in the search hot loop.
pub fn weighted_cost(
    traj: &Trajectory,
    scene: &Scene,
    weights: &CostWeights,
    cfg: &CostConfig,
) -> Result<f64, CostError> {
    Ok(layer_terms(traj, scene, cfg)?
        .iter()
        .map(|t| t.weighted(weights))
        .sum())
}
