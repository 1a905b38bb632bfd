//! Model-based clustering and optimal segmentation of curve sets.
//!
//! The crate fits finite mixtures of piecewise polynomial regressions to a
//! set of curves sampled on a shared grid: each cluster carries its own
//! segmentation into polynomial regimes, found by dynamic programming, while
//! cluster memberships are learned by EM (soft) or classification EM (hard).
//! A distance-based K-means-style algorithm, regression-mixture and Gaussian
//! mixture baselines, and BIC/ICL model selection round out the toolbox.
//!
//! All numerics are generic over the scalar type through [`Scalar`];
//! concrete `f64` aliases are exported at the crate root (`CurveSet64`,
//! `FitConfig64`, ...). Quoted tolerances assume `f64`.

mod basis;
mod dataset;
mod error;
mod linalg;
mod piecewise;
mod scalar;

pub use basis::PolyBasis;
pub use dataset::{
    format_csv, generate, load_csv, save_csv, table1_spec, table1_spec_unbalanced, ClusterSpec,
    CsvLayout, CurveSet, RegimeMean, SimulationSpec,
};
pub use error::{Error, Result};
pub use piecewise::{
    fit_piecewise, fit_piecewise_fixed, optimal_segmentation, segment_cost_table,
    weighted_segment_fit, CostTable, PiecewiseModel, SegmentCost, SegmentFit, Segmentation,
};
pub use scalar::Scalar;

/// `f64` aliases for the main entry types.
pub type CurveSet64 = CurveSet<f64>;
pub type SimulationSpec64 = SimulationSpec<f64>;
pub type PolyBasis64 = PolyBasis<f64>;
pub type PiecewiseModel64 = PiecewiseModel<f64>;

/// `f32` aliases.
pub type CurveSet32 = CurveSet<f32>;
pub type SimulationSpec32 = SimulationSpec<f32>;
