//! Numerical laboratory for continuous quasi-periodic Schrödinger operators
//! `−y'' + V(x, ωx) y = E y`: continued-fraction arithmetic for `ω`,
//! piecewise Hölder potentials, log-scaled transfer-matrix cocycles,
//! Lyapunov exponents and Gordon-type three-block exclusion checks.

mod bignum;
pub mod cocycle;
pub mod error;
mod flow;
pub mod frequency;
pub mod gordon;
pub mod lyapunov;
pub mod potential;

pub use cocycle::{
    operator_norm, propagate, random_sl2, random_unit, shoot, simon_bound_check, sl2_inverse,
    transfer, transfer_batch, transfer_relaxed, SimonCheck, SimonWitness, Sl2, StateVec,
    TransferRequest,
};
pub use error::{Error, ErrorClass, Result};
pub use frequency::{
    liouville_builder, liouville_builder_with_budget, BetaEstimate, Convergent, Frequency,
    FrequencyKind, ResonanceLadder, ResonantScale,
};
pub use gordon::{
    decay_profile, exclusion_report, periodicity_defects, periodicity_defects_direct, phi_net,
    three_block_test, variation_of_constants_oracle, Defects, GordonOptions, GordonReport,
    ScaleRecord, SolutionProfile, ThreeBlock, Verdict,
};
pub use lyapunov::{
    growth_bound_check, lyapunov, lyapunov_scan, lyapunov_with, GrowthFit, LyapunovEstimate,
    LyapunovParams,
};
pub use potential::{
    builtin_model, drift_integral, good_set_measure, holder_seminorm_estimate, BuiltinModel,
    DriftReport, GoodSetMeasure, ModelParams, PotentialSpec,
};
