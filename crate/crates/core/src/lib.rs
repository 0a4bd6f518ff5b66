//! Minimax detection of a function on the unit disk from noisy Radon data.
//!
//! The Radon transform is diagonalised by Zernike and Chebyshev bases, which
//! reduces the problem to a Gaussian sequence model with growing noise
//! scales. This crate solves the resulting extreme problem, builds the
//! weighted chi-square tests (fixed-smoothness and adaptive), and runs the
//! Monte Carlo experiments that compare them with their Gaussian predictions.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod detect;
pub mod error;
pub mod experiment;
pub mod extreme;
pub mod lattice;
pub mod quadrature;
pub mod radon;
pub mod rng;
pub mod seqmodel;
pub mod table;

pub use detect::{AdaptiveGrid, GridSummary, TestVerdict};
pub use error::{Error, Result};
pub use experiment::{ErrorEstimate, ExperimentSpec, Mode, TestProcedure};
pub use extreme::{ExtremeSolution, JSums};
pub use lattice::{Index, ModelParams};
pub use radon::{DiskFunction, QuadratureSpec};
pub use seqmodel::{Membership, PriorSpec, SequenceVector};
pub use table::{Format, Provenance, Table};
