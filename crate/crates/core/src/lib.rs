//! Recovery of hierarchically sparse signals from hierarchical measurement
//! operators `H(x) = Σᵢ aᵢ ⊗ (Bᵢ xᵢ)`.
//!
//! The crate is split along the two sides of the measurement model:
//!
//! * [`block`] holds block-partitioned signals, `(s, σ)` sparsity budgets and
//!   the hierarchical thresholding projection.
//! * [`measurement`] holds dense complex matrices, the hierarchical operator,
//!   and the random ensembles (normalized Gaussian, subsampled DFT).
//! * [`solvers`] implements HiHTP, a flat HTP baseline and the restricted
//!   least-squares refit.
//! * [`rip`] computes RIP / HiRIP constants exactly by support enumeration
//!   and checks the HiRIP composition bound and its companions numerically.
//! * [`harness`] runs the Monte Carlo experiments and writes CSV/JSON output.

pub mod block;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod measurement;
pub mod rip;
pub mod rng;
pub mod solvers;

pub use block::{BlockStructure, BlockVector, HiSparsity, HiSupport};
pub use error::{Error, Result};
pub use linalg::{c64, CMatrix};
pub use measurement::HierarchicalOperator;
pub use solvers::{SolverConfig, SolverResult, StopReason};
