//! Sparse Markov models fitted by convex clustering of empirical transition
//! vectors.
//!
//! The pipeline runs from a coded sequence to a fitted model:
//!
//! 1. [`markov::count_transitions`] tallies order-`m` contexts and
//!    [`markov::empirical_transitions`] turns them into points on the simplex.
//! 2. [`weights::compute_weights`] builds the fusion graph.
//! 3. [`solver::ama_solve`] minimizes the fusion-penalized least squares
//!    objective for one `lambda`; [`selection::fit_path`] sweeps a grid and
//!    [`selection::select_by_bic`] picks the partition.
//!
//! [`diagnostics`] checks exact-recovery conditions for a known partition,
//! [`simulate`] runs recovery experiments and [`classify`] scores sequence
//! segments against per-class reference models.

pub mod classify;
pub mod diagnostics;
pub mod error;
pub mod markov;
pub mod metrics;
pub mod partition;
pub mod selection;
pub mod simulate;
pub mod solver;
pub mod weights;

pub use error::{Result, SmmError};
pub use markov::{Alphabet, ContextCounts, EncodedSequence, EmpiricalTransitions, UnknownTokenPolicy};
pub use partition::PartitionLabels;
pub use selection::{fit_counts, FitConfig, FitOutput, SmmModel};
pub use solver::{ama_solve, SolverConfig, SolverResult};
pub use weights::{Distance, Kernel, WeightGraph, WeightScheme};
