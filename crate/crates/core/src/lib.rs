//! Overcomplete piecewise-polynomial image model with group sparsity.
//!
//! An image is written as `y = sum_{k,l} p_kl ⊙ x_kl`, a sum of separable polynomial
//! basis images weighted by per-pixel parameter maps. Denoising picks the maps whose
//! vertical and horizontal differences are group sparse while staying within `delta` of
//! the observation; edges are then read off either the synthesized image or the
//! parameter maps themselves.
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`); the `*64` aliases below
//! name the double-precision instantiation used by the command line tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod edges;
pub mod error;
pub mod eval;
pub mod io;
pub mod model;
pub mod prox;
pub mod scalar;
pub mod scenes;
pub mod solver;

pub use edges::{
    edges_from_parameter_maps, edges_from_synthesis, parameter_map_gradient, sobel_magnitude,
    synthesis_gradient, threshold_map, EdgeMap, GradMap,
};
pub use error::{Error, Result};
pub use eval::{add_gaussian_noise, score_edges, sweep_thresholds, EdgeScore, NoiseSpec, Sweep};
pub use model::{
    group_size, Basis1D, Basis2D, BasisKind, CoefficientField, Image, SynthesisOperator,
};
pub use prox::{
    diff_horizontal, diff_horizontal_adjoint, diff_vertical, diff_vertical_adjoint, dual_ball_step,
    group_soft_threshold, norm_l21, project_l2_ball, DiffField, Direction, GroupThreshold,
};
pub use scalar::Scalar;
pub use solver::{
    condat_step, solve, step_bound, IterationRecord, ProblemSpec, SolverConfig, SolverState,
};

pub type Image64 = Image<f64>;
pub type Image32 = Image<f32>;
pub type Basis1D64 = Basis1D<f64>;
pub type Basis2D64 = Basis2D<f64>;
pub type CoefficientField64 = CoefficientField<f64>;
pub type CoefficientField32 = CoefficientField<f32>;
pub type SynthesisOperator64 = SynthesisOperator<f64>;
pub type SynthesisOperator32 = SynthesisOperator<f32>;
pub type DiffField64 = DiffField<f64>;
pub type ProblemSpec64 = ProblemSpec<f64>;
pub type SolverConfig64 = SolverConfig<f64>;
pub type SolverState64 = SolverState<f64>;
pub type GradMap64 = GradMap<f64>;
