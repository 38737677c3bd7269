//! Training and imputation for binary-binary Restricted Boltzmann Machines
//! on incomplete data.
//!
//! The central piece is the linearized observed-energy CD-1 update: missing
//! visible units are summed out of the energy exactly, the resulting softplus
//! term is linearized about zero, and the bilinear RBM form is recovered with
//! a shifted hidden bias. Training on masked data then proceeds with ordinary
//! CD-1 plus two extra update terms that let the parameters of missing units
//! learn from samples where those units are unobserved.
//!
//! The crate also carries everything needed to run imputation benchmarks:
//! mask generators for three missingness mechanisms, mean-fill and diffusion
//! inpainting baselines, metrics (missing-pixel RMSE, a Fréchet feature
//! distance, multinomial-logistic classification accuracy), and binary file
//! formats for datasets, completions and checkpoints.

// Link the system BLAS for ndarray's GEMM paths.
extern crate blas_src;

pub mod error;
pub mod evaluation;
pub mod imputation;
pub mod io;
pub mod missingness;
pub mod rbm;
pub mod rng;
pub mod training;
pub mod types;

pub use error::{Error, Result};
pub use types::{BinaryVector, Mask, ProbabilityVector, RbmParams, Weights};
