//! Horn-shaped domains: boundary curves, their admissibility, and clipped
//! structured grids of the truncated domain.

mod curve;
mod grid;

pub use curve::{validate_curve, BoundaryCurve, CurveReport, RatioSample, DEFAULT_EPSILONS, DEFAULT_S_MAX};
pub use grid::{
    build_grid, h1_seminorm, h1_seminorm_on, in_horn, l2_inner, l2_norm, max_resolution, tail_mass, GridCell, GridFace,
    GridNode, HornGrid,
};
pub(crate) use grid::check_field;
