//! Lattice trajectories: one `(n, v)` point per layer ahead of the ego.
//!
//! Lateral positions are in lane-offset units (`n / lane_width`, zero at the
//! road center) and speeds in lattice speed units. Lane `k` of a `W`-lane road
//! covers `[k - W/2, k + 1 - W/2)` and is centered at `k - (W - 1)/2`.

use serde::{Deserialize, Serialize};

/// Speeds below this are a halt: the layer is never entered.
pub const HALT_SPEED: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticePoint {
    pub n: f64,
    pub v: f64,
}

impl LatticePoint {
    pub fn new(n: f64, v: f64) -> Self {
        Self { n, v }
    }
}

pub fn lane_index(n: f64, lanes: usize) -> usize {
    let k = (n + lanes as f64 / 2.0).floor();
    if k <= 0.0 {
        0
    } else {
        (k as usize).min(lanes - 1)
    }
}

pub fn lane_center(lane: usize, lanes: usize) -> f64 {
    lane as f64 - (lanes as f64 - 1.0) / 2.0
}

/// Whether a layer planned at speed `v` is actually reached.
pub fn enters_layer(v: f64) -> bool {
    v >= HALT_SPEED
}

/// A planned trajectory: the current state followed by one point per layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub start: LatticePoint,
    pub points: Vec<LatticePoint>,
}

impl Trajectory {
    pub fn new(start: LatticePoint, points: Vec<LatticePoint>) -> Self {
        Self { start, points }
    }

    pub fn horizon(&self) -> usize {
        self.points.len()
    }

    /// Point `i` counting the start state as index 0.
    pub fn at(&self, i: usize) -> LatticePoint {
        if i == 0 {
            self.start
        } else {
            self.points[i - 1]
        }
    }

    /// `(n_1..n_H, v_1..v_H)`, the coordinates the safety projection works in.
    pub fn flatten(&self) -> Vec<f64> {
        self.points
            .iter()
            .map(|p| p.n)
            .chain(self.points.iter().map(|p| p.v))
            .collect()
    }

    pub fn from_flat(start: LatticePoint, flat: &[f64]) -> Self {
        assert!(flat.len() % 2 == 0, "flattened trajectory has odd length");
        let h = flat.len() / 2;
        let points = (0..h)
            .map(|j| LatticePoint::new(flat[j], flat[h + j]))
            .collect();
        Self { start, points }
    }

    /// Number of leading layers entered before the first halt.
    pub fn entered_layers(&self) -> usize {
        self.points
            .iter()
            .position(|p| !enters_layer(p.v))
            .unwrap_or(self.points.len())
    }

    /// The lattice cells this trajectory occupies: positions snapped to lane
    /// centers and speeds rounded to whole units.
    pub fn footprint(&self, lanes: usize) -> Trajectory {
        let snap = |p: &LatticePoint| {
            LatticePoint::new(
                lane_center(lane_index(p.n, lanes), lanes),
                p.v.round().max(0.0),
            )
        };
        Trajectory {
            start: snap(&self.start),
            points: self.points.iter().map(snap).collect(),
        }
    }
}
