use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::EnvError;

/// The planner's view of the road: `depth` layers ahead (row 0 nearest) by
/// `lanes` lanes, plus the ego state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    lanes: usize,
    depth: usize,
    occupancy: Vec<bool>,
    speed_limits: Vec<f64>,
    /// Lateral position in lane-offset units.
    pub n0: f64,
    pub v0: f64,
}

impl Scene {
    /// All-free scene with zero speed limits.
    pub fn empty(lanes: usize, depth: usize) -> Self {
        Self {
            lanes,
            depth,
            occupancy: vec![false; lanes * depth],
            speed_limits: vec![0.0; lanes * depth],
            n0: 0.0,
            v0: 0.0,
        }
    }

    pub fn from_rows(
        occupancy: &[Vec<bool>],
        speed_limits: &[Vec<f64>],
        n0: f64,
        v0: f64,
    ) -> Result<Self, EnvError> {
        let depth = occupancy.len();
        let lanes = occupancy.first().map_or(0, Vec::len);
        if depth == 0 || lanes == 0 {
            return Err(EnvError::Format("scene must have at least one row and lane".into()));
        }
        if speed_limits.len() != depth
            || occupancy.iter().any(|r| r.len() != lanes)
            || speed_limits.iter().any(|r| r.len() != lanes)
        {
            return Err(EnvError::Format("ragged scene rows".into()));
        }
        Ok(Self {
            lanes,
            depth,
            occupancy: occupancy.concat(),
            speed_limits: speed_limits.concat(),
            n0,
            v0,
        })
    }

    pub fn lanes(&self) -> usize {
        self.lanes
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn occupied(&self, row: usize, lane: usize) -> bool {
        self.occupancy[row * self.lanes + lane]
    }

    pub fn set_occupied(&mut self, row: usize, lane: usize, value: bool) {
        self.occupancy[row * self.lanes + lane] = value;
    }

    pub fn speed_limit(&self, row: usize, lane: usize) -> f64 {
        self.speed_limits[row * self.lanes + lane]
    }

    pub fn set_speed_limit(&mut self, row: usize, lane: usize, value: f64) {
        self.speed_limits[row * self.lanes + lane] = value;
    }

    pub fn row_occupancy(&self, row: usize) -> &[bool] {
        &self.occupancy[row * self.lanes..(row + 1) * self.lanes]
    }

    pub fn row_speed_limits(&self, row: usize) -> &[f64] {
        &self.speed_limits[row * self.lanes..(row + 1) * self.lanes]
    }

    /// True iff every lane of `row` is occupied.
    pub fn is_blocked_row(&self, row: usize) -> bool {
        self.row_occupancy(row).iter().all(|&o| o)
    }

    /// Drops the nearest `k` rows and appends `new_rows` at the far end.
    pub(crate) fn shift(&mut self, new_rows: Vec<(Vec<bool>, Vec<f64>)>) {
        let k = new_rows.len();
        self.occupancy.drain(..k * self.lanes);
        self.speed_limits.drain(..k * self.lanes);
        for (occ, lim) in new_rows {
            self.occupancy.extend(occ);
            self.speed_limits.extend(lim);
        }
    }

    /// Flat observation `[occupancy, speed_limits / v_max, n0 / (W/2), v0 / v_max]`,
    /// rows ordered from the nearest layer.
    pub fn encode(&self, v_max: f64) -> Vec<f64> {
        let mut obs = Vec::with_capacity(2 * self.occupancy.len() + 2);
        obs.extend(self.occupancy.iter().map(|&o| if o { 1.0 } else { 0.0 }));
        obs.extend(self.speed_limits.iter().map(|&s| s / v_max));
        obs.push(self.n0 / (self.lanes as f64 / 2.0));
        obs.push(self.v0 / v_max);
        obs
    }
}

/// Text snapshot: header `W H_s n0 v0`, `H_s` rows of `W` occupancy digits,
/// then `H_s` rows of `W` space-separated speed limits.
impl fmt::Display for Scene {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} {} {} {}", self.lanes, self.depth, self.n0, self.v0)?;
        for r in 0..self.depth {
            let digits: String = self
                .row_occupancy(r)
                .iter()
                .map(|&o| if o { '1' } else { '0' })
                .collect();
            writeln!(f, "{digits}")?;
        }
        for r in 0..self.depth {
            let limits: Vec<String> = self.row_speed_limits(r).iter().map(|s| s.to_string()).collect();
            writeln!(f, "{}", limits.join(" "))?;
        }
        Ok(())
    }
}

impl FromStr for Scene {
    type Err = EnvError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let err = |line: usize, msg: &str| EnvError::Format(format!("line {line}: {msg}"));

        let (hl, header) = lines.next().ok_or_else(|| err(1, "missing header"))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(err(hl, "header must be `W H_s n0 v0`"));
        }
        let lanes: usize = fields[0].parse().map_err(|_| err(hl, "bad W"))?;
        let depth: usize = fields[1].parse().map_err(|_| err(hl, "bad H_s"))?;
        let n0: f64 = fields[2].parse().map_err(|_| err(hl, "bad n0"))?;
        let v0: f64 = fields[3].parse().map_err(|_| err(hl, "bad v0"))?;
        if lanes == 0 || depth == 0 {
            return Err(err(hl, "W and H_s must be positive"));
        }

        let mut occupancy = Vec::with_capacity(depth);
        for _ in 0..depth {
            let (ln, row) = lines.next().ok_or_else(|| err(hl, "missing occupancy row"))?;
            let cells: Result<Vec<bool>, _> = row
                .chars()
                .map(|c| match c {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    _ => Err(err(ln, "occupancy digits must be 0 or 1")),
                })
                .collect();
            let cells = cells?;
            if cells.len() != lanes {
                return Err(err(ln, &format!("expected {lanes} occupancy digits")));
            }
            occupancy.push(cells);
        }
        let mut limits = Vec::with_capacity(depth);
        for _ in 0..depth {
            let (ln, row) = lines.next().ok_or_else(|| err(hl, "missing speed-limit row"))?;
            let values: Result<Vec<f64>, _> = row
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| err(ln, "bad speed limit")))
                .collect();
            let values = values?;
            if values.len() != lanes || values.iter().any(|v| !(*v >= 0.0)) {
                return Err(err(ln, &format!("expected {lanes} nonnegative speed limits")));
            }
            limits.push(values);
        }
        if let Some((ln, _)) = lines.next() {
            return Err(err(ln, "trailing content"));
        }
        Scene::from_rows(&occupancy, &limits, n0, v0)
    }
}
