use serde::{Deserialize, Serialize};

use crate::cost::{CentripetalForm, CostConfig, CurvatureStencil};
use crate::geometry::layer_spacing;

/// Episode and lattice parameters. Speeds are in lattice units (cells per
/// step); `speed_unit` converts them to m/s for the layer-spacing rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeConfig {
    /// Road width `W` in lanes.
    pub lanes: usize,
    /// Sensor depth `H_s` in layers.
    pub sensor_depth: usize,
    /// Planning horizon `H_p` in layers.
    pub plan_horizon: usize,
    pub p_obstacle: f64,
    /// Layer index of the wall that closes the road.
    pub max_steps: usize,
    pub v_max: u32,
    /// Max lateral move per layer, in lanes.
    pub dn_max: u32,
    /// Max speed change per layer.
    pub dv_max: f64,
    /// Layers executed before replanning.
    pub move_layers: usize,
    pub v_init: f64,
    pub rng_seed: u64,
    pub lane_width: f64,
    pub min_layer_spacing: f64,
    /// Seconds of travel per layer at the current speed.
    pub layer_time: f64,
    /// m/s per lattice speed unit.
    pub speed_unit: f64,
    /// Mean length, in layers, of a constant speed-limit zone.
    pub speed_patch_mean: f64,
    /// Run proposals through the safety projection before executing them.
    pub safety_gating: bool,
    /// Braking per layer used when no safe trajectory exists; `None` stops
    /// before the next layer.
    pub emergency_decel: Option<f64>,
    pub curvature: CurvatureStencil,
    pub centripetal: CentripetalForm,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            lanes: 3,
            sensor_depth: 10,
            plan_horizon: 3,
            p_obstacle: 0.5,
            max_steps: 60,
            v_max: 5,
            dn_max: 1,
            dv_max: 1.0,
            move_layers: 3,
            v_init: 2.0,
            rng_seed: 0,
            lane_width: 3.5,
            min_layer_spacing: 5.0,
            layer_time: 1.0,
            speed_unit: 2.0,
            speed_patch_mean: 4.0,
            safety_gating: false,
            emergency_decel: None,
            curvature: CurvatureStencil::Centered,
            centripetal: CentripetalForm::Linear,
        }
    }
}

impl EpisodeConfig {
    /// Evaluation setting: replan after every layer, safety gating on.
    pub fn evaluation() -> Self {
        Self {
            move_layers: 1,
            safety_gating: true,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let fail = |msg: String| Err(msg);
        if self.lanes == 0 {
            return fail("lanes must be >= 1".into());
        }
        if self.plan_horizon == 0 || self.plan_horizon > self.sensor_depth {
            return fail(format!(
                "plan_horizon must be in 1..={} (sensor_depth), got {}",
                self.sensor_depth, self.plan_horizon
            ));
        }
        if !(0.0..=1.0).contains(&self.p_obstacle) {
            return fail(format!("p_obstacle must be in [0, 1], got {}", self.p_obstacle));
        }
        if self.dn_max == 0 {
            return fail("dn_max must be >= 1".into());
        }
        if self.v_max == 0 {
            return fail("v_max must be > 0".into());
        }
        if !(self.dv_max > 0.0) {
            return fail("dv_max must be > 0".into());
        }
        if self.move_layers == 0 || self.move_layers > self.plan_horizon {
            return fail(format!(
                "move_layers must be in 1..={} (plan_horizon), got {}",
                self.plan_horizon, self.move_layers
            ));
        }
        if !(0.0..=self.v_max as f64).contains(&self.v_init) {
            return fail("v_init must be in [0, v_max]".into());
        }
        if self.max_steps == 0 {
            return fail("max_steps must be >= 1".into());
        }
        if !(self.lane_width > 0.0 && self.min_layer_spacing > 0.0 && self.layer_time >= 0.0) {
            return fail("lane_width and min_layer_spacing must be > 0".into());
        }
        if !(self.speed_unit > 0.0) {
            return fail("speed_unit must be > 0".into());
        }
        if !(self.speed_patch_mean >= 1.0) {
            return fail("speed_patch_mean must be >= 1".into());
        }
        if let Some(d) = self.emergency_decel {
            if !(d > 0.0) {
                return fail("emergency_decel must be > 0".into());
            }
        }
        Ok(())
    }

    /// Length of the observation vector: `2 * H_s * W + 2`.
    pub fn observation_len(&self) -> usize {
        2 * self.sensor_depth * self.lanes + 2
    }

    /// Length of the raw action vector: `2 * H_p`.
    pub fn action_len(&self) -> usize {
        2 * self.plan_horizon
    }

    /// Layer spacing in meters for a cycle starting at speed `v0`.
    pub fn layer_spacing(&self, v0: f64) -> f64 {
        layer_spacing(v0 * self.speed_unit, self.min_layer_spacing, self.layer_time)
    }

    pub fn cost_config(&self, v0: f64) -> CostConfig {
        CostConfig {
            layer_spacing: self.layer_spacing(v0),
            lane_width: self.lane_width,
            lanes: self.lanes,
            curvature: self.curvature,
            centripetal: self.centripetal,
        }
    }

    /// Integer speed levels `0..=v_max`.
    pub fn speed_levels(&self) -> Vec<f64> {
        (0..=self.v_max).map(f64::from).collect()
    }
}
