use rand::Rng;

use super::{EpisodeConfig, Scene};
use crate::trajectory::lane_index;

/// Row-by-row generator for the synthetic road.
///
/// Cells are occupied i.i.d. with probability `p_obstacle`. Before the wall,
/// each row is repaired so at least one lane stays reachable from the
/// previous row's reachable lanes with a lateral move of at most `dn_max`:
/// a fully blocked row, or a row whose free lanes are all out of reach, gets
/// one uniformly chosen reachable-adjacent cell cleared. Speed limits come in
/// full-width zones whose lengths are geometric with mean `speed_patch_mean`.
#[derive(Debug, Clone)]
pub struct SceneGenerator {
    lanes: usize,
    p_obstacle: f64,
    wall_layer: usize,
    v_max: u32,
    dn_max: usize,
    patch_start_prob: f64,
    /// Absolute layer index of the next row (the ego starts at layer 0).
    next_layer: usize,
    reachable: Vec<bool>,
    patch_limit: f64,
}

pub type Row = (Vec<bool>, Vec<f64>);

impl SceneGenerator {
    pub fn new(config: &EpisodeConfig, start_n: f64) -> Self {
        let mut reachable = vec![false; config.lanes];
        reachable[lane_index(start_n, config.lanes)] = true;
        Self {
            lanes: config.lanes,
            p_obstacle: config.p_obstacle,
            wall_layer: config.max_steps,
            v_max: config.v_max,
            dn_max: config.dn_max as usize,
            patch_start_prob: 1.0 / config.speed_patch_mean,
            next_layer: 1,
            reachable,
            patch_limit: 0.0,
        }
    }

    pub fn next_layer(&self) -> usize {
        self.next_layer
    }

    pub fn wall_layer(&self) -> usize {
        self.wall_layer
    }

    pub fn next_row<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Row {
        let layer = self.next_layer;
        self.next_layer += 1;

        if self.patch_limit == 0.0 || rng.random::<f64>() < self.patch_start_prob {
            self.patch_limit = f64::from(rng.random_range(1..=self.v_max));
        }
        let limits = vec![self.patch_limit; self.lanes];

        if layer >= self.wall_layer {
            return (vec![true; self.lanes], limits);
        }

        let mut occ: Vec<bool> = (0..self.lanes)
            .map(|_| rng.random::<f64>() < self.p_obstacle)
            .collect();

        let candidates = self.candidates();
        let blocked = occ.iter().all(|&o| o);
        let cut_off = candidates.iter().all(|&k| occ[k]);
        if (blocked || cut_off) && !candidates.is_empty() {
            let k = candidates[rng.random_range(0..candidates.len())];
            occ[k] = false;
        }
        self.advance_reachability(&occ);
        (occ, limits)
    }

    /// Lanes within `dn_max` of a currently reachable lane.
    fn candidates(&self) -> Vec<usize> {
        (0..self.lanes)
            .filter(|&k| {
                let lo = k.saturating_sub(self.dn_max);
                let hi = (k + self.dn_max).min(self.lanes - 1);
                (lo..=hi).any(|j| self.reachable[j])
            })
            .collect()
    }

    fn advance_reachability(&mut self, occupancy: &[bool]) {
        let candidates = self.candidates();
        for k in 0..self.lanes {
            self.reachable[k] = !occupancy[k] && candidates.contains(&k);
        }
    }

    /// Continues generation after an externally supplied window. A fully
    /// blocked row inside it becomes the wall.
    pub(crate) fn adopt_window(&mut self, scene: &Scene) {
        for r in 0..scene.depth() {
            let layer = r + 1;
            if scene.is_blocked_row(r) && layer < self.wall_layer {
                self.wall_layer = layer;
            }
            self.advance_reachability(scene.row_occupancy(r));
        }
        if let Some(&limit) = scene.row_speed_limits(scene.depth() - 1).first() {
            self.patch_limit = limit;
        }
        self.next_layer = scene.depth() + 1;
    }

    /// Lanes reachable in the most recently generated row.
    pub fn reachable(&self) -> &[bool] {
        &self.reachable
    }
}

/// A fresh sensor window in front of an ego at the road center moving at `v_init`.
pub fn generate_scene<R: Rng + ?Sized>(config: &EpisodeConfig, rng: &mut R) -> Scene {
    let mut generator = SceneGenerator::new(config, 0.0);
    generate_with(&mut generator, config, rng)
}

pub(crate) fn generate_with<R: Rng + ?Sized>(
    generator: &mut SceneGenerator,
    config: &EpisodeConfig,
    rng: &mut R,
) -> Scene {
    let rows: Vec<Row> = (0..config.sensor_depth).map(|_| generator.next_row(rng)).collect();
    let (occ, lim): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    Scene::from_rows(&occ, &lim, 0.0, config.v_init).expect("generated rows are rectangular")
}
