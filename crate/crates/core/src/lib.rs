//! Numerical simulation of the anisotropic mean curvature flow of entire
//! Lipschitz graphs.
//!
//! The evolving set is the subgraph `{z <= u(x, t)}`; its boundary moves with
//! normal velocity `-psi(nu) H_phi`, which for graphs is the quasilinear PDE
//! `u_t + psi(-grad u, 1) div(grad_x phi(-grad u, 1)) = 0`. The crate provides
//! the surface-tension/mobility models, a monotone conservative
//! finite-difference discretization, explicit time integration of the
//! physical and self-similarly rescaled flows, Wulff-shape and periodic
//! barriers, and experiment runners that verify the scaling, convergence,
//! comparison and stability properties of the flow at desk scale.

pub mod acceptance;
pub mod anisotropy;
pub mod barriers;
pub mod cone;
pub mod config;
pub mod error;
pub mod experiments;
pub mod flow;
pub mod grid;
pub mod operator;
pub mod report;
pub mod selfsimilar;
pub mod snapshot;

pub use anisotropy::{AnisotropyModel, Family, MobilityModel, SymMat, WulffCap};
pub use cone::ConeSpec;
pub use error::{Error, Result};
pub use flow::{FlowParams, SnapshotCadence, StepRecord, Trajectory};
pub use grid::{BoundaryPolicy, ExactSolution, GraphField, GraphGrid};
pub use report::{ExperimentReport, Metric};
