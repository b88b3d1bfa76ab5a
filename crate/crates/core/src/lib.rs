//! Matrix-free spectral element building blocks and a P_N-P_N splitting
//! stepper for the incompressible Navier-Stokes equations.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analytic;
pub mod basis;
pub mod bc;
pub mod diagnostics;
pub mod error;
pub mod forcing;
pub mod gs;
pub mod krylov;
pub mod mesh;
pub mod operators;
pub mod precond;
pub mod space;
pub mod timestep;

pub use basis::Basis1D;
pub use bc::{BcKind, BoundarySet, Rotor};
pub use error::{Error, Result};
pub use gs::{GatherScatter, GsOptions};
pub use krylov::{gmres, pcg, ProjectionSpace, SolveStats, SolverConfig};
pub use mesh::Mesh;
pub use operators::HelmholtzCoeffs;
pub use precond::{BlockJacobi, HybridSchwarz, Preconditioner};
pub use space::FunctionSpace;
pub use timestep::{scheme_coeffs, FlowParams, FlowState, SchemeCoeffs, StepReport, Stepper};
