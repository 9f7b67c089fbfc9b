use serde::{Deserialize, Serialize};

use super::{CostError, LayerTerms};

/// Reward and executed-layer terms of one environment step.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StepTerms {
    pub reward: f64,
    pub layers: Vec<LayerTerms>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Aggregation {
    Mean,
    Max,
    Sum,
}

impl Aggregation {
    pub fn label(self) -> &'static str {
        match self {
            Aggregation::Mean => "mean",
            Aggregation::Max => "max",
            Aggregation::Sum => "sum",
        }
    }
}

/// Driving measures in report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Measure {
    StepReward,
    SpeedTrackErr,
    Acceleration,
    Jerk,
    ExtraDistance,
    Curvature,
    LaneChanges,
    CentripetalAcc,
}

impl Measure {
    pub const ALL: [Measure; 8] = [
        Measure::StepReward,
        Measure::SpeedTrackErr,
        Measure::Acceleration,
        Measure::Jerk,
        Measure::ExtraDistance,
        Measure::Curvature,
        Measure::LaneChanges,
        Measure::CentripetalAcc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Measure::StepReward => "step_reward",
            Measure::SpeedTrackErr => "speed_track_err",
            Measure::Acceleration => "acceleration",
            Measure::Jerk => "jerk",
            Measure::ExtraDistance => "extra_distance",
            Measure::Curvature => "curvature",
            Measure::LaneChanges => "lane_changes",
            Measure::CentripetalAcc => "centripetal_acc",
        }
    }

    pub fn aggregation(self) -> Aggregation {
        match self {
            Measure::StepReward | Measure::SpeedTrackErr | Measure::ExtraDistance => {
                Aggregation::Mean
            }
            Measure::Acceleration | Measure::Jerk | Measure::Curvature | Measure::CentripetalAcc => {
                Aggregation::Max
            }
            Measure::LaneChanges => Aggregation::Sum,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub step_reward: f64,
    pub speed_track_err: f64,
    pub acceleration: f64,
    pub jerk: f64,
    pub extra_distance: f64,
    pub curvature: f64,
    pub lane_changes: f64,
    pub centripetal_acc: f64,
}

impl EpisodeMetrics {
    pub fn get(&self, m: Measure) -> f64 {
        match m {
            Measure::StepReward => self.step_reward,
            Measure::SpeedTrackErr => self.speed_track_err,
            Measure::Acceleration => self.acceleration,
            Measure::Jerk => self.jerk,
            Measure::ExtraDistance => self.extra_distance,
            Measure::Curvature => self.curvature,
            Measure::LaneChanges => self.lane_changes,
            Measure::CentripetalAcc => self.centripetal_acc,
        }
    }

    pub fn values(&self) -> [f64; 8] {
        Measure::ALL.map(|m| self.get(m))
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = xs.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Max of absolute values, 0 for an empty sequence.
fn max_abs(xs: impl Iterator<Item = f64>) -> f64 {
    xs.map(f64::abs).fold(0.0, f64::max)
}

/// Aggregates an episode: step reward averaged over steps, layer terms
/// aggregated over every executed layer of every step.
pub fn aggregate_metrics(steps: &[StepTerms]) -> EpisodeMetrics {
    let layers = || steps.iter().flat_map(|s| s.layers.iter());
    EpisodeMetrics {
        step_reward: mean(steps.iter().map(|s| s.reward)),
        speed_track_err: mean(layers().map(|t| t.speed_error)),
        acceleration: max_abs(layers().map(|t| t.acceleration)),
        jerk: max_abs(layers().map(|t| t.jerk)),
        extra_distance: mean(layers().map(|t| t.extra_distance)),
        curvature: max_abs(layers().map(|t| t.curvature)),
        lane_changes: layers().map(|t| t.lane_crossing).sum(),
        centripetal_acc: max_abs(layers().map(|t| t.centripetal)),
    }
}

/// Mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub stderr: f64,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Summary {
        let n = xs.len();
        if n == 0 {
            return Summary::default();
        }
        let m = xs.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return Summary { mean: m, stderr: 0.0 };
        }
        let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        Summary {
            mean: m,
            stderr: (var / n as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub measure: Measure,
    pub a: Summary,
    pub b: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub label_a: String,
    pub label_b: String,
    pub episodes: usize,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn row(&self, m: Measure) -> &ComparisonRow {
        self.rows.iter().find(|r| r.measure == m).expect("all measures present")
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "measure,aggregation,{a}_mean,{a}_stderr,{b}_mean,{b}_stderr\n",
            a = self.label_a,
            b = self.label_b
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.measure.name(),
                r.measure.aggregation().label(),
                r.a.mean,
                r.a.stderr,
                r.b.mean,
                r.b.stderr
            ));
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = format!(
            "| Measure | Aggregation | {} | {} |\n|---|---|---|---|\n",
            self.label_a, self.label_b
        );
        for r in &self.rows {
            out.push_str(&format!(
                "| {} | {} | {:.3} ± {:.3} | {:.3} ± {:.3} |\n",
                r.measure.name(),
                r.measure.aggregation().label(),
                r.a.mean,
                r.a.stderr,
                r.b.mean,
                r.b.stderr
            ));
        }
        out
    }
}

pub fn compare_planners(
    label_a: &str,
    a: &[EpisodeMetrics],
    label_b: &str,
    b: &[EpisodeMetrics],
) -> Result<ComparisonTable, CostError> {
    if a.len() != b.len() {
        return Err(CostError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(CostError::Empty);
    }
    let rows = Measure::ALL
        .iter()
        .map(|&m| {
            let xa: Vec<f64> = a.iter().map(|e| e.get(m)).collect();
            let xb: Vec<f64> = b.iter().map(|e| e.get(m)).collect();
            ComparisonRow {
                measure: m,
                a: Summary::of(&xa),
                b: Summary::of(&xb),
            }
        })
        .collect();
    Ok(ComparisonTable {
        label_a: label_a.to_string(),
        label_b: label_b.to_string(),
        episodes: a.len(),
        rows,
    })
}
