//! Covariance-fitting phase linking for InSAR image stacks.
//!
//! The crate estimates one phase per acquisition from a local covariance
//! plug-in by minimizing a matrix distance (Kullback-Leibler or Frobenius)
//! over the unit-modulus torus with majorization-minimization. Two problem
//! forms are provided: the offline fit over the whole stack, and the
//! sequential fit that only estimates the phases of a newly acquired block
//! while keeping the past phases fixed.
//!
//! Module map:
//!
//! - [`linalg`]: dense Hermitian kernel (Hadamard products, PD inverse,
//!   block partition, Schur-complement inverse, dominant eigenvalue).
//! - [`plugins`]: SCM / phase-only plug-ins, shrinkage and tapering.
//! - [`torus`]: unit-modulus phase vectors and the phase projection.
//! - [`costs`]: full and block forms of both fitting objectives.
//! - [`mm`]: the offline and sequential MM solvers.
//! - [`simulation`]: synthetic coherence, phase ramps and sampling.
//! - [`raster`]: sliding-window per-pixel processing of image stacks.
//! - [`harness`]: Monte Carlo MSE and timing experiments, CSV output.
//! - [`io`]: binary stack format and phase raster files.

pub mod costs;
pub mod error;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod mm;
pub mod plugins;
pub mod raster;
pub mod simulation;
pub mod torus;

pub use error::{Error, Result};
pub use linalg::{BlockCov, CMatrix, HermitianCov, RMatrix, SchurFactors, SchurInverse};
pub use mm::{Distance, Init, MMConfig, SolveReport};
pub use num_complex::Complex64;
pub use plugins::{Estimator, PluginSpec, Regularizer, SampleStack};
pub use raster::{ImageStack, PhaseRaster};
pub use simulation::{Distribution, SimulationConfig};
pub use torus::TorusPhases;
