//! Piecewise-quadratic collocation for nonlocal diffusion with a constant
//! kernel and volume constraints, in one and two dimensions.

pub mod analysis;
pub mod assembly;
pub mod error;
pub mod grid;
pub mod oracle;
pub mod solver;
pub mod stencil;
pub mod tables;
pub mod verify;

pub use assembly::{assemble_1d, assemble_2d, CollocationSystem, DenseMatrix, Kron2DOperator, Scheme};
pub use error::{Error, Result};
pub use grid::{horizon_decompose, HalfIndex, HorizonSpec, Mesh1D, VolumeConstraint};
pub use oracle::{KernelSpec, Manufactured, PolynomialFn, Source};
pub use solver::{solve_cg, solve_direct, LinearOperator, SolveMethod, SolveReport};
