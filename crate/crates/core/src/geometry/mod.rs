//! Road geometry: the cubic centerline, the Cartesian / curvilinear / cell
//! coordinate maps, and the natural cubic spline used to render planned paths.

mod road;
mod spline;

pub use road::{
    fit_road_curve, layer_spacing, CartesianPoint, CellPoint, CurvilinearPoint, RoadCurve,
    RoadLayout,
};
pub use spline::{fit_trajectory_spline, NaturalCubicSpline};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("point is {distance:.3} m from the centerline, corridor half-width is {corridor:.3} m")]
    OffCorridor { distance: f64, corridor: f64 },
    #[error("invalid road parameter: {0}")]
    InvalidParameter(String),
}
