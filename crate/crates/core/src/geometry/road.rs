use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::GeometryError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartesianPoint {
    pub x: f64,
    pub y: f64,
}

impl CartesianPoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &CartesianPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Arc length `s` along the centerline (zero at the ego origin) and signed
/// offset `n` along the layer perpendicular, positive to the left of travel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvilinearPoint {
    pub s: f64,
    pub n: f64,
}

impl CurvilinearPoint {
    pub fn new(s: f64, n: f64) -> Self {
        Self { s, n }
    }
}

/// Curvilinear coordinates scaled by layer spacing and lane width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellPoint {
    pub layer: f64,
    pub lane_offset: f64,
}

impl CellPoint {
    pub fn new(layer: f64, lane_offset: f64) -> Self {
        Self { layer, lane_offset }
    }
}

/// Lane geometry shared by every curve fitted for one road.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoadLayout {
    /// Meters.
    pub lane_width: f64,
    pub num_lanes: usize,
    /// Distance `L` between consecutive layers, meters.
    pub layer_spacing: f64,
}

impl Default for RoadLayout {
    fn default() -> Self {
        Self {
            lane_width: 3.5,
            num_lanes: 3,
            layer_spacing: 10.0,
        }
    }
}

impl RoadLayout {
    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.lane_width > 0.0 && self.lane_width.is_finite()) {
            return Err(GeometryError::InvalidParameter(format!(
                "lane_width must be > 0, got {}",
                self.lane_width
            )));
        }
        if self.num_lanes == 0 {
            return Err(GeometryError::InvalidParameter(
                "num_lanes must be >= 1".into(),
            ));
        }
        if !(self.layer_spacing > 0.0 && self.layer_spacing.is_finite()) {
            return Err(GeometryError::InvalidParameter(format!(
                "layer_spacing must be > 0, got {}",
                self.layer_spacing
            )));
        }
        Ok(())
    }

    pub fn half_width(&self) -> f64 {
        self.num_lanes as f64 * self.lane_width / 2.0
    }
}

/// Layer spacing for one planning cycle: `max(min_spacing, speed * layer_time)`.
pub fn layer_spacing(speed_mps: f64, min_spacing: f64, layer_time: f64) -> f64 {
    min_spacing.max(speed_mps * layer_time)
}

/// Road centerline `y = c0 + c1 x + c2 x^2 + c3 x^3`, parameterized by `x`.
///
/// Arc length is measured from `origin_x` (the ego position), so `s = 0`
/// maps to the point `(origin_x, y(origin_x))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoadCurve {
    pub coeffs: [f64; 4],
    pub layout: RoadLayout,
    pub origin_x: f64,
}

/// Gauss-Legendre 5-point rule on [-1, 1].
const GL_NODES: [f64; 5] = [
    0.0,
    -0.538_469_310_105_683_1,
    0.538_469_310_105_683_1,
    -0.906_179_845_938_664,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
    0.236_926_885_056_189_1,
];

const CLOSEST_POINT_SEEDS: usize = 64;

impl RoadCurve {
    pub fn new(coeffs: [f64; 4], layout: RoadLayout) -> Result<Self, GeometryError> {
        layout.validate()?;
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(GeometryError::InvalidParameter(
                "non-finite polynomial coefficient".into(),
            ));
        }
        Ok(Self {
            coeffs,
            layout,
            origin_x: 0.0,
        })
    }

    /// The straight centerline `y = 0`.
    pub fn straight(layout: RoadLayout) -> Self {
        Self {
            coeffs: [0.0; 4],
            layout,
            origin_x: 0.0,
        }
    }

    pub fn with_origin(mut self, origin_x: f64) -> Self {
        self.origin_x = origin_x;
        self
    }

    pub fn y(&self, x: f64) -> f64 {
        let [c0, c1, c2, c3] = self.coeffs;
        c0 + x * (c1 + x * (c2 + x * c3))
    }

    pub fn dy(&self, x: f64) -> f64 {
        let [_, c1, c2, c3] = self.coeffs;
        c1 + x * (2.0 * c2 + x * 3.0 * c3)
    }

    pub fn ddy(&self, x: f64) -> f64 {
        let [_, _, c2, c3] = self.coeffs;
        2.0 * c2 + 6.0 * c3 * x
    }

    pub fn point(&self, x: f64) -> CartesianPoint {
        CartesianPoint::new(x, self.y(x))
    }

    /// Unit normal pointing left of the direction of increasing `x`.
    pub fn normal(&self, x: f64) -> (f64, f64) {
        let d = self.dy(x);
        let norm = (1.0 + d * d).sqrt();
        (-d / norm, 1.0 / norm)
    }

    fn speed(&self, x: f64) -> f64 {
        let d = self.dy(x);
        (1.0 + d * d).sqrt()
    }

    fn gauss_panel(&self, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        GL_NODES
            .iter()
            .zip(GL_WEIGHTS.iter())
            .map(|(t, w)| w * self.speed(mid + half * t))
            .sum::<f64>()
            * half
    }

    fn adaptive_panel(&self, a: f64, b: f64, whole: f64, depth: u32) -> f64 {
        let mid = 0.5 * (a + b);
        let left = self.gauss_panel(a, mid);
        let right = self.gauss_panel(mid, b);
        let refined = left + right;
        if depth == 0 || (refined - whole).abs() <= 1e-13 * (1.0 + refined.abs()) {
            refined
        } else {
            self.adaptive_panel(a, mid, left, depth - 1)
                + self.adaptive_panel(mid, b, right, depth - 1)
        }
    }

    /// Signed arc length of the centerline between parameters `a` and `b`.
    pub fn arc_length_between(&self, a: f64, b: f64) -> f64 {
        if a == b {
            return 0.0;
        }
        let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
        let panels = ((hi - lo) / 4.0).ceil().max(1.0) as usize;
        let width = (hi - lo) / panels as f64;
        let total: f64 = (0..panels)
            .map(|k| {
                let pa = lo + k as f64 * width;
                let pb = if k + 1 == panels { hi } else { pa + width };
                self.adaptive_panel(pa, pb, self.gauss_panel(pa, pb), 30)
            })
            .sum();
        sign * total
    }

    /// Arc length from the origin to parameter `x` (negative behind the origin).
    pub fn arc_length(&self, x: f64) -> f64 {
        self.arc_length_between(self.origin_x, x)
    }

    /// Curve parameter reached after travelling arc length `s` from the origin.
    ///
    /// Since the integrand is at least 1, the solution lies between the
    /// origin and `origin + s`; Newton steps are kept inside that bracket.
    pub fn arc_length_advance(&self, s: f64) -> f64 {
        if s == 0.0 {
            return self.origin_x;
        }
        let (mut lo, mut hi) = if s > 0.0 {
            (self.origin_x, self.origin_x + s)
        } else {
            (self.origin_x + s, self.origin_x)
        };
        let mut x = self.origin_x + s / self.speed(self.origin_x);
        for _ in 0..100 {
            let f = self.arc_length(x) - s;
            if f.abs() < 1e-11 {
                break;
            }
            if f > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let newton = x - f / self.speed(x);
            x = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo < 1e-14 {
                break;
            }
        }
        x
    }

    /// Squared distance from `p` to the curve point at `x` and its first two derivatives.
    fn squared_distance(&self, p: &CartesianPoint, x: f64) -> (f64, f64, f64) {
        let dx = x - p.x;
        let dy = self.y(x) - p.y;
        let d1 = self.dy(x);
        let d2 = self.ddy(x);
        (
            dx * dx + dy * dy,
            2.0 * dx + 2.0 * dy * d1,
            2.0 + 2.0 * d1 * d1 + 2.0 * dy * d2,
        )
    }

    /// Parameter of the closest curve point to `p`.
    fn closest_parameter(&self, p: &CartesianPoint) -> f64 {
        let d0 = (self.y(p.x) - p.y).abs();
        if d0 == 0.0 {
            return p.x;
        }
        // The minimizer is no further from p than (p.x, y(p.x)), so |x* - p.x| <= d0.
        let lo = p.x - d0;
        let hi = p.x + d0;
        let step = (hi - lo) / CLOSEST_POINT_SEEDS as f64;
        let seeds: Vec<f64> = (0..=CLOSEST_POINT_SEEDS)
            .map(|k| lo + k as f64 * step)
            .collect();
        let evals: Vec<(f64, f64, f64)> = seeds
            .iter()
            .map(|&x| self.squared_distance(p, x))
            .collect();

        let mut best_x = p.x;
        let mut best_d = d0 * d0;
        for (k, &x) in seeds.iter().enumerate() {
            if evals[k].0 < best_d {
                best_d = evals[k].0;
                best_x = x;
            }
        }
        for k in 0..CLOSEST_POINT_SEEDS {
            let (da, db) = (evals[k].1, evals[k + 1].1);
            if !(da <= 0.0 && db >= 0.0) {
                continue;
            }
            let x = self.refine_stationary(p, seeds[k], seeds[k + 1]);
            let d = self.squared_distance(p, x).0;
            if d < best_d {
                best_d = d;
                best_x = x;
            }
        }
        best_x
    }

    /// Newton on the derivative of the squared distance, bisection-safeguarded
    /// inside a bracket where the derivative changes sign from - to +.
    fn refine_stationary(&self, p: &CartesianPoint, mut lo: f64, mut hi: f64) -> f64 {
        let mut x = 0.5 * (lo + hi);
        for _ in 0..100 {
            let (_, g, h) = self.squared_distance(p, x);
            if g == 0.0 {
                return x;
            }
            if g > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let newton = if h > 0.0 { x - g / h } else { f64::NAN };
            let next = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - x).abs() < 1e-15 * (1.0 + x.abs()) || hi - lo < 1e-15 {
                return next;
            }
            x = next;
        }
        x
    }

    /// Maps a Cartesian point to `(s, n)` using the default corridor of twice
    /// the road half-width.
    pub fn cartesian_to_curvilinear(
        &self,
        p: CartesianPoint,
    ) -> Result<CurvilinearPoint, GeometryError> {
        self.cartesian_to_curvilinear_within(p, 2.0 * self.layout.half_width())
    }

    pub fn cartesian_to_curvilinear_within(
        &self,
        p: CartesianPoint,
        corridor_half_width: f64,
    ) -> Result<CurvilinearPoint, GeometryError> {
        let x = self.closest_parameter(&p);
        let c = self.point(x);
        let distance = p.distance(&c);
        if distance > corridor_half_width {
            return Err(GeometryError::OffCorridor {
                distance,
                corridor: corridor_half_width,
            });
        }
        let (nx, ny) = self.normal(x);
        let n = (p.x - c.x) * nx + (p.y - c.y) * ny;
        Ok(CurvilinearPoint::new(self.arc_length(x), n))
    }

    pub fn curvilinear_to_cartesian(&self, q: CurvilinearPoint) -> CartesianPoint {
        let x = self.arc_length_advance(q.s);
        let c = self.point(x);
        let (nx, ny) = self.normal(x);
        CartesianPoint::new(c.x + q.n * nx, c.y + q.n * ny)
    }

    pub fn curvilinear_to_cell(&self, q: CurvilinearPoint) -> CellPoint {
        CellPoint::new(
            q.s / self.layout.layer_spacing,
            q.n / self.layout.lane_width,
        )
    }

    pub fn cell_to_curvilinear(&self, c: CellPoint) -> CurvilinearPoint {
        CurvilinearPoint::new(
            c.layer * self.layout.layer_spacing,
            c.lane_offset * self.layout.lane_width,
        )
    }
}

/// Least-squares cubic through `samples`.
pub fn fit_road_curve(
    samples: &[CartesianPoint],
    layout: RoadLayout,
) -> Result<RoadCurve, GeometryError> {
    let mut xs: Vec<f64> = samples.iter().map(|p| p.x).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    if xs.len() < 4 {
        return Err(GeometryError::DegenerateInput(format!(
            "need at least 4 distinct abscissae, got {}",
            xs.len()
        )));
    }
    if samples.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(GeometryError::DegenerateInput("non-finite sample".into()));
    }
    let design = DMatrix::from_fn(samples.len(), 4, |r, c| samples[r].x.powi(c as i32));
    let rhs = DVector::from_iterator(samples.len(), samples.iter().map(|p| p.y));
    let svd = design.svd(true, true);
    let solution = svd
        .solve(&rhs, 1e-12)
        .map_err(|e| GeometryError::DegenerateInput(e.to_string()))?;
    RoadCurve::new(
        [solution[0], solution[1], solution[2], solution[3]],
        layout,
    )
}
