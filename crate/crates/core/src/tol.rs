//! Shared numeric tolerances. Every feasibility or guard threshold used by the
//! crate is defined here so that checks stay mutually consistent.

/// Absolute feasibility tolerance for times (seconds) and energies (joules).
pub const FEAS_TOL: f64 = 1e-6;

/// Relative tolerance used when comparing reported energies against recomputed ones.
pub const ENERGY_REL_TOL: f64 = 1e-6;

/// Guard threshold for numeric noise (convexity checks, domination slack).
pub const NUM_GUARD: f64 = 1e-9;

/// Collision violation threshold: a tuple timing is collision-free when the
/// maximal violation is at or below this value.
pub const GAMMA_TOL: f64 = 1e-6;

/// Golden-section search interval tolerance (seconds).
pub const GOLDEN_TOL: f64 = 1e-6;

/// Epsilon in the path-prolongation penalty denominator of the spatial
/// compatibility repair.
pub const REPAIR_EPS: f64 = 1e-6;

/// LP: threshold below which a candidate pivot element is rejected.
pub const LP_PIVOT_TOL: f64 = 1e-9;

/// LP: reduced-cost threshold for entering-variable selection (dual feasibility).
pub const LP_DUAL_TOL: f64 = 1e-9;

/// LP: bound violation tolerance on basic variables (primal feasibility).
pub const LP_PRIMAL_TOL: f64 = 1e-7;

/// LP: residual phase-one objective below which the problem counts as feasible.
pub const LP_PHASE1_TOL: f64 = 1e-7;

/// LP: hard cap on simplex iterations before the solver reports a stall.
pub const LP_MAX_ITER: u64 = 1_000_000;

/// LP: consecutive degenerate pivots before switching to Bland's rule.
pub const LP_DEGEN_SWITCH: u64 = 1_000;
