//! One-phase Stefan problem with inhomogeneous latent heat, solved through its parabolic
//! obstacle formulation, together with the tooling to observe its long-time homogenization:
//! rescalings, self-similar point-source references, free-boundary extraction and Hausdorff
//! metrics, and convergence studies.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the aliases below fix `f64`,
//! which the harness and command-line front end use.

pub mod config;
pub mod frontmetrics;
pub mod geometry;
pub mod grid;
pub mod harness;
pub mod io;
pub mod media;
pub mod obstacle;
pub mod reference;
pub mod rescale;
pub mod scalar;

pub use scalar::Scalar;

pub type LatentHeatField = media::LatentHeatField<f64>;
pub type GridProblem = geometry::GridProblem<f64>;
pub type GridFunction = grid::GridFunction<f64>;
pub type CartesianGrid = grid::CartesianGrid<f64>;
pub type ObstacleState = obstacle::ObstacleState<f64>;
pub type SolverParams = obstacle::SolverParams<f64>;
pub type SelfSimilarSolution = reference::SelfSimilarSolution<f64>;
pub type RadialFront = reference::RadialFront<f64>;
pub type RescaleParams = rescale::RescaleParams<f64>;
pub type FrontSet = frontmetrics::FrontSet<f64>;
