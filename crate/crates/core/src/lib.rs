//! Square-root regularized regression `min_β ‖Y − Xβ‖ + λp(β)` with sparse
//! group Lasso and fused Lasso penalties.
//!
//! The main solver is [`ppdna::ppa_solve`]. [`admm`] holds the primal and dual
//! ADMM baselines, [`tuning`] the closed-form and Monte Carlo choices of `λ`,
//! [`dro`] the dual-norm and distributionally robust identities, and [`data`]
//! the synthetic generators and file loaders.
//!
//! Random streams use `ChaCha8Rng` seeded with `seed_from_u64`, so every seeded
//! routine is reproducible across platforms.

pub mod admm;
pub mod data;
pub mod design;
pub mod dro;
pub mod error;
pub mod model;
pub mod ppdna;
pub mod prox;
pub mod tuning;
pub mod verify;
pub mod vecops;

pub use design::{CscMatrix, Design};
pub use error::{Error, Result};
pub use model::{
    kkt_residual, nnz_stats, normalize_columns, penalty_value, CriterionKind, Dataset,
    GroupStructure, KKTReport, Penalty, Regularizer, SolveResult, SolverConfig, Status,
};
pub use ppdna::ppa_solve;
