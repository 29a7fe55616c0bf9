//! POD-DEIM reduced order modelling for the parametric Poisson equation on
//! ellipse domains cut out of a fixed background mesh.
//!
//! The full-order model is an unfitted (CutFEM) P1 discretisation with
//! Nitsche boundary conditions and ghost-penalty stabilisation. On top of it
//! the crate builds a POD basis from snapshots, DEIM approximations of the
//! stiffness matrix and load vector, a hyper-reduced online solver, and a
//! family of a posteriori error estimators together with convergence-rate
//! fits.
//!
//! The typical flow is
//!
//! ```no_run
//! use cutrom::pipeline::{Config, run_offline, run_online_sweep};
//!
//! let config = Config::default();
//! let artifacts = run_offline(&config).unwrap();
//! let report = run_online_sweep(&artifacts, &config).unwrap();
//! println!("{} records", report.records.len());
//! ```

pub mod assembly;
pub mod deim;
pub mod error;
pub mod estimators;
pub mod fom;
pub mod geometry;
pub mod pipeline;
pub mod pod;
pub mod rates;
pub mod rom;
pub mod sparse;

pub use error::{Error, Result};
pub use geometry::ParameterPoint;
