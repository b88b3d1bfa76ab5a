//! Case runner for the `semflow` solver: case files, output writers,
//! checkpoints and convergence suites.

pub mod case;
pub mod checkpoint;
pub mod convergence;
pub mod output;
pub mod run;
pub mod vtk;

pub use case::CaseConfig;
pub use run::{run_case, RunOptions, RunSummary, Simulation};
