//! Numerical laboratory for second-order Riesz transforms on semi-discrete
//! groups G = (∏ Z/N_i) × Tⁿ.
//!
//! The crate realizes the same operators twice and plays the routes against
//! each other:
//!
//! * **Spectrally** — functions are band-limited coefficient vectors; the
//!   discrete derivatives, the Laplacian, the heat semigroup and the
//!   combinations R²_α = Σα_i^x R_i² + Σα^y_{jk} R_jR_k are all diagonal
//!   Fourier multipliers ([`group`], [`spectral`]).
//! * **Probabilistically** — a compound Poisson walk with Brownian torus
//!   component carries martingales M_t^f = P_{T−t}f(Z_t) whose transforms by
//!   the block matrix A_α have R²_α f as conditional expectation at the
//!   final position ([`stochastic`], [`verify`]).
//!
//! [`analysis`] estimates L^p operator norms from below (nonlinear power
//! method) and pins the sharp upper bounds ‖A_α‖₂(p*−1) and the Choi
//! constants for real data.

pub mod analysis;
pub mod group;
pub mod rng;
pub mod spectral;
pub mod stochastic;
mod trig;
pub mod verify;

pub use group::{
    evaluate, grid_samples, grid_to_coeffs, inner_product, l2_norm, linear_combination,
    pairing_bilinear, project_mean_zero, read_coeff_table, write_coeff_table, Frequency,
    GridLayout, GroupError, GroupPoint, GroupSpec, SpectralFunction,
};

pub use spectral::{
    apply_multiplier, gradient_at, heat_extension, laplacian_symbol, oracle::brute_force_matrix,
    oracle::multiplier_matrix, riesz2_apply, riesz2_multiplier, AugmentedGradient,
    CoefficientMatrix, Operator, SpectralError, Symbol,
};

pub use stochastic::{
    build_martingale, choi_gap_max_increment, covariation, sample_trajectory, subordination_gap,
    subordination_gap_increments, transform_martingale, JumpEvent, MartingalePath, SimConfig,
    StartPoint, StochasticError, Trajectory,
};

pub use analysis::{
    choi_upper_bound, default_torus_res, lp_norm, multiplier_scan, operator_norm_lower_bound,
    operator_norm_lower_bound_with_starts, p_star, upper_bound, AnalysisError, NormReport,
};

pub use verify::{
    commutation_check, conditional_expectation_map, lambda_min, representation_pairing,
    representation_pairing_batch, subordination_ensemble, weak_identity_check,
    ConditionalExpectationMap, PairingEstimate, SubordinationReport, VerifyError,
};
