//! Vessels of commuting nonselfadjoint operators: condition checks, transfer
//! functions, the input/output ODEs, spectral synthesis and zero-pole
//! interpolation.

pub mod config;
pub mod error;
pub mod fixtures;
pub mod grid;
pub mod interpolation;
pub mod matrix_kernel;
pub mod ode_engine;
pub mod par;
pub mod probes;
pub mod spectral_synthesis;
pub mod vessel_core;

pub use config::Config;
pub use error::{VkError, VkResult};
pub use grid::{OperatorFamily, TimeGrid};
pub use matrix_kernel::{c64, ComplexMatrix, HermitianMatrix};
pub use num_complex::Complex64;
pub use par::Execution;
pub use vessel_core::DifferentialVessel;
