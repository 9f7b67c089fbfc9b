//! Episode runs, traces, planner comparisons and latency benchmarks.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::{
    aggregate_metrics, compare_planners, ComparisonTable, CostError, CostReport, CostWeights,
    EpisodeMetrics, LayerTerms, Measure, StepTerms,
};
use crate::env::{
    derive_seed, emergency_stop, generate_scene, DrivingEnv, EnvError, EpisodeConfig, Scene,
    StepOutcome, TerminalKind,
};
use crate::policy::{deterministic_action, PolicyParams, RlPlanner};
use crate::safety::SafetyConfig;
use crate::search::{plan_exhaustive, query_latency, ExhaustivePlanner, Latency, SearchConfig};
use crate::trajectory::{lane_center, Trajectory};

pub const TRACE_FORMAT: &str = "rltraj-trace";
pub const TRACE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error("trace: {0}")]
    Trace(String),
    #[error("episode exceeded {0} steps")]
    Runaway(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerKind {
    Rl,
    Exhaustive,
}

impl PlannerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PlannerKind::Rl => "rl",
            PlannerKind::Exhaustive => "exhaustive",
        }
    }
}

impl FromStr for PlannerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rl" => Ok(PlannerKind::Rl),
            "exhaustive" => Ok(PlannerKind::Exhaustive),
            _ => Err(format!("unknown planner {s:?} (expected rl or exhaustive)")),
        }
    }
}

/// A planner that drives an environment one step at a time.
#[derive(Debug, Clone)]
pub enum Driver {
    Rl(PolicyParams),
    Exhaustive(SearchConfig),
}

impl Driver {
    pub fn kind(&self) -> PlannerKind {
        match self {
            Driver::Rl(_) => PlannerKind::Rl,
            Driver::Exhaustive(_) => PlannerKind::Exhaustive,
        }
    }

    /// Plans from the current scene and steps `env`. Returns the raw action
    /// for the policy driver. When the search finds no path, an emergency
    /// stop is proposed instead.
    pub fn act(&self, env: &mut DrivingEnv) -> Result<(Option<Vec<f64>>, StepOutcome), EnvError> {
        match self {
            Driver::Rl(params) => {
                let raw = deterministic_action(params, env.scene(), env.config());
                let out = env.step(&raw)?;
                Ok((Some(raw), out))
            }
            Driver::Exhaustive(search) => {
                let scene = env.scene();
                let proposal = match plan_exhaustive(scene, env.weights(), env.config(), search) {
                    Ok(plan) => plan.trajectory,
                    Err(_) => emergency_stop(scene.n0, scene.v0, env.config()),
                };
                Ok((None, env.step_trajectory(proposal)?))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    /// The scene the plan was made from, in the text snapshot format.
    pub scene: String,
    pub action: Option<Vec<f64>>,
    pub proposed: Trajectory,
    pub planned: Trajectory,
    pub constrained: bool,
    pub emergency_stop: bool,
    pub reward: f64,
    pub cost: CostReport,
    pub executed: Vec<LayerTerms>,
    pub terminal: TerminalKind,
    pub progress: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub format: String,
    pub version: u32,
    pub planner: PlannerKind,
    pub seed: u64,
    pub config: EpisodeConfig,
    pub weights: CostWeights,
    pub safety: SafetyConfig,
    pub steps: Vec<TraceStep>,
    pub terminal: TerminalKind,
    pub total_reward: f64,
}

impl EpisodeTrace {
    pub fn initial_scene(&self) -> Result<Scene, CampaignError> {
        let first = self
            .steps
            .first()
            .ok_or_else(|| CampaignError::Trace("trace has no steps".into()))?;
        first.scene.parse().map_err(CampaignError::Env)
    }

    pub fn step_terms(&self) -> Vec<StepTerms> {
        self.steps
            .iter()
            .map(|s| StepTerms {
                reward: s.reward,
                layers: s.executed.clone(),
            })
            .collect()
    }

    pub fn metrics(&self) -> EpisodeMetrics {
        aggregate_metrics(&self.step_terms())
    }

    pub fn safety_stops(&self) -> usize {
        self.steps.iter().filter(|s| s.emergency_stop).count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace is serializable")
    }

    pub fn from_json(text: &str) -> Result<Self, CampaignError> {
        let t: EpisodeTrace =
            serde_json::from_str(text).map_err(|e| CampaignError::Trace(e.to_string()))?;
        if t.format != TRACE_FORMAT || t.version != TRACE_VERSION {
            return Err(CampaignError::Trace(format!(
                "unsupported trace {} v{}",
                t.format, t.version
            )));
        }
        Ok(t)
    }
}

/// Runs one episode to completion. The road is generated from `seed`, or
/// starts from `scene` with further rows generated from `seed`.
pub fn run_episode(
    driver: &Driver,
    config: &EpisodeConfig,
    weights: &CostWeights,
    safety: &SafetyConfig,
    seed: u64,
    scene: Option<Scene>,
) -> Result<EpisodeTrace, CampaignError> {
    let config = EpisodeConfig {
        rng_seed: seed,
        ..config.clone()
    };
    let mut env = DrivingEnv::new(config.clone(), *weights, safety.clone())?;
    if let Some(s) = scene {
        env.reset_to_scene(s)?;
    }
    // Every step enters at least one layer or ends the episode.
    let limit = config.max_steps + 1;
    let mut steps = Vec::new();
    let mut total = 0.0;
    loop {
        if steps.len() >= limit {
            return Err(CampaignError::Runaway(limit));
        }
        let scene = env.scene().to_string();
        let (action, out) = driver.act(&mut env)?;
        total += out.reward;
        let info = out.info;
        steps.push(TraceStep {
            scene,
            action,
            proposed: info.proposed,
            planned: info.planned,
            constrained: info.constrained,
            emergency_stop: info.emergency_stop,
            reward: out.reward,
            cost: info.cost,
            executed: info.executed_terms,
            terminal: info.terminal,
            progress: info.progress,
        });
        if out.done {
            return Ok(EpisodeTrace {
                format: TRACE_FORMAT.into(),
                version: TRACE_VERSION,
                planner: driver.kind(),
                seed,
                config,
                weights: *weights,
                safety: safety.clone(),
                terminal: info.terminal,
                steps,
                total_reward: total,
            });
        }
    }
}

/// Per-episode results of a comparison campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub planner: PlannerKind,
    pub episode: usize,
    pub seed: u64,
    pub terminal: TerminalKind,
    pub steps: usize,
    pub total_reward: f64,
    pub safety_stops: usize,
    pub metrics: EpisodeMetrics,
}

impl EpisodeSummary {
    pub fn of(trace: &EpisodeTrace, episode: usize) -> Self {
        Self {
            planner: trace.planner,
            episode,
            seed: trace.seed,
            terminal: trace.terminal,
            steps: trace.steps.len(),
            total_reward: trace.total_reward,
            safety_stops: trace.safety_stops(),
            metrics: trace.metrics(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub table: ComparisonTable,
    pub rl: Vec<EpisodeSummary>,
    pub exhaustive: Vec<EpisodeSummary>,
}

impl CompareReport {
    pub fn count(&self, planner: PlannerKind, terminal: TerminalKind) -> usize {
        self.episodes(planner)
            .iter()
            .filter(|e| e.terminal == terminal)
            .count()
    }

    pub fn episodes(&self, planner: PlannerKind) -> &[EpisodeSummary] {
        match planner {
            PlannerKind::Rl => &self.rl,
            PlannerKind::Exhaustive => &self.exhaustive,
        }
    }

    /// One row per episode and planner, metric columns in table order.
    pub fn episodes_csv(&self) -> String {
        let mut out = String::from("planner,episode,seed,terminal,steps,total_reward,safety_stops");
        for m in Measure::ALL {
            out.push(',');
            out.push_str(m.name());
        }
        out.push('\n');
        for e in self.rl.iter().chain(&self.exhaustive) {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}",
                e.planner.as_str(),
                e.episode,
                e.seed,
                e.terminal.as_str(),
                e.steps,
                e.total_reward,
                e.safety_stops
            ));
            for v in e.metrics.values() {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Seed of episode `i` in a campaign seeded with `seed`.
pub fn episode_seed(seed: u64, i: usize) -> u64 {
    derive_seed(seed, i as u64)
}

/// Runs `episodes` matched-seed episodes under both planners.
///
/// Episodes are spread over the available cores; results are collected in
/// episode order.
pub fn compare(
    params: &PolicyParams,
    config: &EpisodeConfig,
    weights: &CostWeights,
    safety: &SafetyConfig,
    search: &SearchConfig,
    episodes: usize,
    seed: u64,
) -> Result<CompareReport, CampaignError> {
    let drivers = [Driver::Rl(params.clone()), Driver::Exhaustive(search.clone())];
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(episodes.max(1));
    let per = episodes.div_ceil(workers.max(1)).max(1);
    let mut results: Vec<Result<Vec<[EpisodeSummary; 2]>, CampaignError>> = Vec::new();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..episodes)
            .step_by(per)
            .map(|lo| {
                let drivers = &drivers;
                scope.spawn(move || {
                    (lo..(lo + per).min(episodes))
                        .map(|i| {
                            let s = episode_seed(seed, i);
                            let a = run_episode(&drivers[0], config, weights, safety, s, None)?;
                            let b = run_episode(&drivers[1], config, weights, safety, s, None)?;
                            Ok([EpisodeSummary::of(&a, i), EpisodeSummary::of(&b, i)])
                        })
                        .collect()
                })
            })
            .collect();
        results = handles
            .into_iter()
            .map(|h| h.join().expect("episode worker panicked"))
            .collect();
    });
    let mut rl = Vec::with_capacity(episodes);
    let mut ex = Vec::with_capacity(episodes);
    for chunk in results {
        for [a, b] in chunk? {
            rl.push(a);
            ex.push(b);
        }
    }
    let ma: Vec<EpisodeMetrics> = rl.iter().map(|e| e.metrics).collect();
    let mb: Vec<EpisodeMetrics> = ex.iter().map(|e| e.metrics).collect();
    let table = compare_planners("rl", &ma, "exhaustive", &mb)?;
    Ok(CompareReport {
        table,
        rl,
        exhaustive: ex,
    })
}

/// Random planning situations: fresh scenes with the ego on a random lane
/// center at a random nonzero speed.
pub fn bench_scenes(config: &EpisodeConfig, count: usize, seed: u64) -> Vec<Scene> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut s = generate_scene(config, &mut rng);
            s.n0 = lane_center(rng.random_range(0..config.lanes), config.lanes);
            s.v0 = f64::from(rng.random_range(1..=config.v_max));
            s
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    /// Policy query and action decoding.
    pub rl: Latency,
    /// Policy query followed by the safety projection.
    pub rl_gated: Latency,
    pub exhaustive: Latency,
    /// Exhaustive mean latency over RL mean latency.
    pub ratio: f64,
}

impl BenchReport {
    pub fn to_csv(&self) -> String {
        format!(
            "planner,mean_s,stderr_s,queries\nrl,{},{},{}\nrl_gated,{},{},{}\nexhaustive,{},{},{}\nratio,{},,\n",
            self.rl.mean,
            self.rl.stderr,
            self.rl.queries,
            self.rl_gated.mean,
            self.rl_gated.stderr,
            self.rl_gated.queries,
            self.exhaustive.mean,
            self.exhaustive.stderr,
            self.exhaustive.queries,
            self.ratio
        )
    }
}

/// Times both planners on the same scenes. The RL ratio uses the bare
/// policy query; the gated time is reported alongside.
pub fn bench(
    params: &PolicyParams,
    config: &EpisodeConfig,
    weights: &CostWeights,
    safety: &SafetyConfig,
    search: &SearchConfig,
    scenes: &[Scene],
) -> BenchReport {
    let mut rl = RlPlanner {
        params: params.clone(),
        config: config.clone(),
        safety: None,
    };
    let mut gated = RlPlanner {
        safety: Some(safety.clone()),
        ..rl.clone()
    };
    let mut ex = ExhaustivePlanner::new(config.clone(), *weights, search.clone());
    let rl_lat = query_latency(&mut rl, scenes);
    let gated_lat = query_latency(&mut gated, scenes);
    let ex_lat = query_latency(&mut ex, scenes);
    BenchReport {
        rl: rl_lat,
        rl_gated: gated_lat,
        exhaustive: ex_lat,
        ratio: ex_lat.mean / rl_lat.mean,
    }
}
