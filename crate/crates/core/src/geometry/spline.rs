use serde::{Deserialize, Serialize};

use super::{CartesianPoint, CurvilinearPoint, GeometryError};

/// Natural cubic spline (zero second derivative at both ends) through a set
/// of knots with strictly increasing abscissae.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaturalCubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Second derivative at each knot.
    moments: Vec<f64>,
}

impl NaturalCubicSpline {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self, GeometryError> {
        if xs.len() != ys.len() {
            return Err(GeometryError::DegenerateInput(format!(
                "{} abscissae but {} ordinates",
                xs.len(),
                ys.len()
            )));
        }
        if xs.len() < 2 {
            return Err(GeometryError::DegenerateInput(
                "a spline needs at least 2 points".into(),
            ));
        }
        if xs.iter().chain(ys.iter()).any(|v| !v.is_finite()) {
            return Err(GeometryError::DegenerateInput("non-finite knot".into()));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(GeometryError::DegenerateInput(
                "abscissae must be strictly increasing".into(),
            ));
        }
        let moments = solve_moments(&xs, &ys);
        Ok(Self { xs, ys, moments })
    }

    pub fn knots(&self) -> (&[f64], &[f64]) {
        (&self.xs, &self.ys)
    }

    pub fn moments(&self) -> &[f64] {
        &self.moments
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().unwrap())
    }

    /// Index of the segment used for `x`; points outside the domain use the
    /// end segments.
    fn segment(&self, x: f64) -> usize {
        let last = self.xs.len() - 2;
        match self.xs.binary_search_by(|k| k.total_cmp(&x)) {
            Ok(i) => i.min(last),
            Err(0) => 0,
            Err(i) => (i - 1).min(last),
        }
    }

    /// Evaluates segment `i` and its first two derivatives at `x`.
    pub fn eval_segment(&self, i: usize, x: f64) -> (f64, f64, f64) {
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let (y0, y1) = (self.ys[i], self.ys[i + 1]);
        let (m0, m1) = (self.moments[i], self.moments[i + 1]);
        let h = x1 - x0;
        let a = (x1 - x) / h;
        let b = (x - x0) / h;
        let value = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let slope = (y1 - y0) / h + ((1.0 - 3.0 * a * a) * m0 + (3.0 * b * b - 1.0) * m1) * h / 6.0;
        let curvature = a * m0 + b * m1;
        (value, slope, curvature)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_segment(self.segment(x), x).0
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.eval_segment(self.segment(x), x).1
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        self.eval_segment(self.segment(x), x).2
    }

    /// `count` evenly spaced samples over the knot domain.
    pub fn sample(&self, count: usize) -> Vec<(f64, f64)> {
        let (lo, hi) = self.domain();
        if count < 2 {
            return vec![(lo, self.eval(lo))];
        }
        (0..count)
            .map(|k| {
                let x = lo + (hi - lo) * k as f64 / (count - 1) as f64;
                (x, self.eval(x))
            })
            .collect()
    }
}

/// Thomas algorithm on the symmetric tridiagonal system for interior moments.
fn solve_moments(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut moments = vec![0.0; n];
    if n < 3 {
        return moments;
    }
    let interior = n - 2;
    let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let mut diag = vec![0.0; interior];
    let mut upper = vec![0.0; interior];
    let mut rhs = vec![0.0; interior];
    for k in 0..interior {
        let i = k + 1;
        diag[k] = 2.0 * (h[i - 1] + h[i]);
        upper[k] = h[i];
        rhs[k] = 6.0 * ((ys[i + 1] - ys[i]) / h[i] - (ys[i] - ys[i - 1]) / h[i - 1]);
    }
    for k in 1..interior {
        let factor = h[k] / diag[k - 1];
        diag[k] -= factor * upper[k - 1];
        rhs[k] -= factor * rhs[k - 1];
    }
    let mut solution = vec![0.0; interior];
    solution[interior - 1] = rhs[interior - 1] / diag[interior - 1];
    for k in (0..interior - 1).rev() {
        solution[k] = (rhs[k] - upper[k] * solution[k + 1]) / diag[k];
    }
    moments[1..n - 1].copy_from_slice(&solution);
    moments
}

/// Points that can be interpolated: `(abscissa, ordinate)`.
pub trait SplinePoint {
    fn abscissa(&self) -> f64;
    fn ordinate(&self) -> f64;
}

impl SplinePoint for (f64, f64) {
    fn abscissa(&self) -> f64 {
        self.0
    }
    fn ordinate(&self) -> f64 {
        self.1
    }
}

impl SplinePoint for CurvilinearPoint {
    fn abscissa(&self) -> f64 {
        self.s
    }
    fn ordinate(&self) -> f64 {
        self.n
    }
}

impl SplinePoint for CartesianPoint {
    fn abscissa(&self) -> f64 {
        self.x
    }
    fn ordinate(&self) -> f64 {
        self.y
    }
}

pub fn fit_trajectory_spline<P: SplinePoint>(
    points: &[P],
) -> Result<NaturalCubicSpline, GeometryError> {
    NaturalCubicSpline::new(
        points.iter().map(SplinePoint::abscissa).collect(),
        points.iter().map(SplinePoint::ordinate).collect(),
    )
}
