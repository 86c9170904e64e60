//! Numerical tolerances shared by every module.
//!
//! All thresholds live here so that checks in `qmat`, `dynamics` and the
//! acceptance suite agree on what "Hermitian", "unit trace" or "PSD" means.

/// Max-norm deviation allowed between `A` and `A†` at construction.
pub const HERMITIAN: f64 = 1e-12;
/// Bound on `‖A − U diag(λ) U†‖_max` for the eigen-decomposition.
pub const EIG_RECONSTRUCTION: f64 = 1e-10;
/// Off-diagonal magnitude tolerated in the GHZ frame for assumption (A0).
pub const GHZ_DIAGONAL: f64 = 1e-10;
/// Unit-norm / orthogonality tolerance for GHZ vectors.
pub const GHZ_ORTHONORMAL: f64 = 1e-12;
/// `|Tr ρ − 1|` allowed for a density matrix.
pub const TRACE: f64 = 1e-10;
/// Smallest eigenvalue allowed for a density matrix.
pub const PSD: f64 = -1e-10;
/// Eigenvalues below `-CLIP_TRIGGER` are clipped by the projection.
/// Smaller negative excursions are rounding noise and are left alone.
pub const CLIP_TRIGGER: f64 = 1e-13;
/// An eigenvalue below this before clipping aborts the run.
pub const PROJECTION_ABORT: f64 = -0.01;
/// Initial states violating the density-matrix invariants by more than this are rejected.
pub const INITIAL_STATE_REJECT: f64 = 1e-6;
/// Eigenvalues above this count towards the numerical rank of a state.
pub const STATE_RANK: f64 = 1e-8;
/// Relative singular-value threshold for the rank of reachability matrices.
pub const MATRIX_RANK: f64 = 1e-10;
/// Imaginary residue allowed when a trace of Hermitian products is taken as real.
pub const REAL_TRACE: f64 = 1e-12;
/// Floor applied to non-positive samples in exponent fits.
pub const LOG_FLOOR: f64 = 1e-12;
/// Entries smaller than this fraction of the largest are dropped before eigen-solving.
pub const EIG_UNDERFLOW: f64 = 1e-30;
