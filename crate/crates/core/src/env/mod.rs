//! The lattice driving world as a reset/step state machine.
//!
//! The ego sits at layer 0; the scene holds the `H_s` layers ahead. A step
//! decodes a raw action into an `H_p`-layer trajectory, optionally passes it
//! through the safety projection, executes the first `move_layers` layers and
//! slides the window forward, generating new rows at the far end.
//!
//! A layer planned at a speed below [`HALT_SPEED`](crate::trajectory::HALT_SPEED)
//! is not entered: the ego halts and the episode ends. Halting with the wall
//! in sensor range is a success; halting anywhere else is a `NoPath` stop,
//! which earns no terminal reward. Entering an occupied cell is a collision,
//! the only failure.

mod config;
mod generator;
mod scene;

pub use config::EpisodeConfig;
pub use generator::{generate_scene, Row, SceneGenerator};
pub use scene::Scene;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::{self, CostReport, CostWeights, LayerTerms, Outcome};
use crate::safety::{self, SafetyConfig, SafetyError};
use crate::trajectory::{enters_layer, lane_index, LatticePoint, Trajectory};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("step called after the episode finished")]
    EpisodeFinished,
    #[error("action has {got} entries, expected {expected}")]
    ActionShape { expected: usize, got: usize },
    #[error("invalid episode config: {0}")]
    InvalidConfig(String),
    #[error("scene format: {0}")]
    Format(String),
    #[error("scene is {got_lanes}x{got_depth}, config expects {lanes}x{depth}")]
    SceneShape {
        lanes: usize,
        depth: usize,
        got_lanes: usize,
        got_depth: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalKind {
    Running,
    Success,
    Collision,
    NoPath,
}

impl TerminalKind {
    pub fn outcome(self) -> Outcome {
        match self {
            TerminalKind::Running => Outcome::Running,
            TerminalKind::Success => Outcome::Success,
            TerminalKind::Collision => Outcome::Failure,
            TerminalKind::NoPath => Outcome::Stopped,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TerminalKind::Running => "running",
            TerminalKind::Success => "success",
            TerminalKind::Collision => "collision",
            TerminalKind::NoPath => "no_path",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub terminal: TerminalKind,
    pub cost: CostReport,
    /// Term values of each executed layer, nearest first.
    pub executed_terms: Vec<LayerTerms>,
    /// The decoded proposal.
    pub proposed: Trajectory,
    /// What was executed: the proposal, its projection, or an emergency stop.
    pub planned: Trajectory,
    pub constrained: bool,
    pub emergency_stop: bool,
    pub layers_advanced: usize,
    /// Absolute layer of the ego after the step.
    pub progress: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// Cumulative-sum decoding of a raw action in `[-1, 1]^{2 H_p}`.
///
/// Lateral positions are the running sum of `dn_max * raw[j]` clamped to the
/// road edges `[-W/2, W/2]`; speeds accumulate `dv_max * raw[H_p + j]` and are
/// clamped to `[0, v_max]` layer by layer.
pub fn decode_action(raw: &[f64], n0: f64, v0: f64, config: &EpisodeConfig) -> Trajectory {
    let h = raw.len() / 2;
    let edge = config.lanes as f64 / 2.0;
    let v_max = f64::from(config.v_max);
    let dn = f64::from(config.dn_max);
    let mut n = n0;
    let mut v = v0;
    let points = (0..h)
        .map(|j| {
            n += dn * raw[j].clamp(-1.0, 1.0);
            v = (v + config.dv_max * raw[h + j].clamp(-1.0, 1.0)).clamp(0.0, v_max);
            LatticePoint::new(n.clamp(-edge, edge), v)
        })
        .collect();
    Trajectory::new(LatticePoint::new(n0, v0), points)
}

/// Straight braking trajectory used when the safety projection finds no
/// feasible trajectory.
pub fn emergency_stop(n0: f64, v0: f64, config: &EpisodeConfig) -> Trajectory {
    let points = (1..=config.plan_horizon)
        .map(|j| {
            let v = match config.emergency_decel {
                Some(d) => (v0 - d * j as f64).max(0.0),
                None => 0.0,
            };
            LatticePoint::new(n0, v)
        })
        .collect();
    Trajectory::new(LatticePoint::new(n0, v0), points)
}

/// Independent seed number `index` derived from `base`: the first word of
/// ChaCha stream `index` keyed by `base`.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(index);
    rng.next_u64()
}

#[derive(Debug, Clone)]
pub struct DrivingEnv {
    config: EpisodeConfig,
    weights: CostWeights,
    safety: SafetyConfig,
    rng: ChaCha8Rng,
    generator: SceneGenerator,
    scene: Scene,
    progress: usize,
    steps: usize,
    done: bool,
}

impl DrivingEnv {
    pub fn new(
        config: EpisodeConfig,
        weights: CostWeights,
        safety: SafetyConfig,
    ) -> Result<Self, EnvError> {
        config.validate().map_err(EnvError::InvalidConfig)?;
        weights.validate().map_err(EnvError::InvalidConfig)?;
        safety.validate().map_err(EnvError::InvalidConfig)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        let mut generator = SceneGenerator::new(&config, 0.0);
        let scene = generator::generate_with(&mut generator, &config, &mut rng);
        Ok(Self {
            config,
            weights,
            safety,
            rng,
            generator,
            scene,
            progress: 0,
            steps: 0,
            done: false,
        })
    }

    pub fn config(&self) -> &EpisodeConfig {
        &self.config
    }

    pub fn weights(&self) -> &CostWeights {
        &self.weights
    }

    pub fn safety_config(&self) -> &SafetyConfig {
        &self.safety
    }

    pub fn scene(&self) -> &Scene {
        &self.scene
    }

    pub fn progress(&self) -> usize {
        self.progress
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn set_safety_gating(&mut self, on: bool) {
        self.config.safety_gating = on;
    }

    /// Restarts the random stream from `seed`; the next `reset` is then
    /// fully determined by it.
    pub fn seed(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    pub fn observation(&self) -> Vec<f64> {
        self.scene.encode(f64::from(self.config.v_max))
    }

    /// Starts a new episode on a freshly generated road.
    pub fn reset(&mut self) -> Vec<f64> {
        self.generator = SceneGenerator::new(&self.config, 0.0);
        self.scene = generator::generate_with(&mut self.generator, &self.config, &mut self.rng);
        self.progress = 0;
        self.steps = 0;
        self.done = false;
        self.observation()
    }

    /// Starts a new episode from a given window; rows beyond it are generated
    /// from the environment's random stream. A fully blocked row in the
    /// window is treated as the wall.
    pub fn reset_to_scene(&mut self, scene: Scene) -> Result<Vec<f64>, EnvError> {
        if scene.lanes() != self.config.lanes || scene.depth() != self.config.sensor_depth {
            return Err(EnvError::SceneShape {
                lanes: self.config.lanes,
                depth: self.config.sensor_depth,
                got_lanes: scene.lanes(),
                got_depth: scene.depth(),
            });
        }
        let mut generator = SceneGenerator::new(&self.config, scene.n0);
        generator.adopt_window(&scene);
        self.generator = generator;
        self.scene = scene;
        self.progress = 0;
        self.steps = 0;
        self.done = false;
        Ok(self.observation())
    }

    fn wall_in_view(&self) -> bool {
        self.generator.wall_layer() <= self.progress + self.config.sensor_depth
    }

    pub fn step(&mut self, raw: &[f64]) -> Result<StepOutcome, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeFinished);
        }
        if raw.len() != self.config.action_len() {
            return Err(EnvError::ActionShape {
                expected: self.config.action_len(),
                got: raw.len(),
            });
        }
        let proposed = decode_action(raw, self.scene.n0, self.scene.v0, &self.config);
        self.step_trajectory(proposed)
    }

    /// Executes an already decoded proposal. Its start must be the current
    /// ego state and its length the plan horizon.
    pub fn step_trajectory(&mut self, proposed: Trajectory) -> Result<StepOutcome, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeFinished);
        }
        if proposed.horizon() != self.config.plan_horizon {
            return Err(EnvError::ActionShape {
                expected: self.config.plan_horizon,
                got: proposed.horizon(),
            });
        }
        let (n0, v0) = (self.scene.n0, self.scene.v0);
        let (planned, constrained, emergency) = if self.config.safety_gating {
            match safety::constrain(&proposed, &self.scene, &self.config, &self.safety) {
                Ok(t) => {
                    let changed = t != proposed;
                    (t, changed, false)
                }
                Err(SafetyError::NoPath) | Err(SafetyError::EmptyFeasibleSet) => {
                    (emergency_stop(n0, v0, &self.config), true, true)
                }
            }
        } else {
            (proposed.clone(), false, false)
        };

        let cost_cfg = self.config.cost_config(v0);
        let terms = cost::layer_terms(&planned, &self.scene, &cost_cfg)
            .expect("plan horizon is at least one layer");

        let mut terminal = TerminalKind::Running;
        let mut advanced = 0;
        let mut last = 0;
        for j in 1..=self.config.move_layers {
            last = j;
            let p = planned.points[j - 1];
            if !enters_layer(p.v) {
                terminal = TerminalKind::NoPath;
                break;
            }
            advanced = j;
            if self.scene.occupied(j - 1, lane_index(p.n, self.config.lanes)) {
                terminal = TerminalKind::Collision;
                break;
            }
        }
        let executed_terms = terms[1..=last].to_vec();
        let report = CostReport::from_layers(&executed_terms, &self.weights);

        if advanced > 0 {
            let p = planned.points[advanced - 1];
            self.scene.n0 = p.n;
            self.scene.v0 = p.v;
            self.progress += advanced;
        }
        if terminal == TerminalKind::NoPath {
            self.scene.v0 = 0.0;
            if self.wall_in_view() {
                terminal = TerminalKind::Success;
            }
        }
        if advanced > 0 && terminal != TerminalKind::Collision {
            let rows = (0..advanced)
                .map(|_| self.generator.next_row(&mut self.rng))
                .collect();
            self.scene.shift(rows);
        }

        self.steps += 1;
        self.done = terminal != TerminalKind::Running;
        let reward = cost::step_reward(terminal.outcome(), &report);
        Ok(StepOutcome {
            observation: self.observation(),
            reward,
            done: self.done,
            info: StepInfo {
                terminal,
                cost: report,
                executed_terms,
                proposed,
                planned,
                constrained,
                emergency_stop: emergency,
                layers_advanced: advanced,
                progress: self.progress,
            },
        })
    }
}
