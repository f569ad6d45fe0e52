//! Weighted anisotropic p-Laplace problems on P1 triangulations: singular
//! and exponential nonlinearities solved by monotone regularization, the
//! associated extremal functions and best Sobolev constants.

pub mod config;
pub mod data;
pub mod descent;
pub mod discrete;
pub mod error;
pub mod extremal;
pub mod finsler;
pub mod mesh;
pub mod norm_suite;
pub mod sampling;
pub mod solver;
pub mod sweep;
pub mod weights;

pub use data::DataFn;
pub use error::{Error, Result};
pub use finsler::{FinslerNorm, FluxParams, NormFamily};
pub use mesh::{Field, Mesh, MeshConfig};
pub use solver::{Problem, ProblemKind, ProblemSpec, SolveReport};
pub use weights::WeightSpec;
