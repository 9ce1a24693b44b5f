//! Time-reversibility analysis for three-state hidden Markov models.
//!
//! A hidden three-state Markov chain (continuous- or discrete-time) is
//! observed only through a state-dependent emission matrix. Whether the
//! observed symbol process is reversible depends on two things: the
//! probability flux of the underlying chain and the structure (regularity,
//! rank) of the emission matrix. This crate
//!
//! * validates chain generators / transition matrices and derives their
//!   stationary law, probability flux and spectral data ([`chain`]),
//! * classifies emission matrices and assembles full models ([`hmm`]),
//! * evaluates finite-dimensional likelihoods, their time-reversal fluxes
//!   and the closed-form flux expressions, and decides reversibility
//!   ([`analysis`]),
//! * cross-checks everything against independent oracles: matrix
//!   exponentials, exhaustive path enumeration, trajectory simulation and
//!   Monte Carlo estimation ([`oracle`]).
//!
//! The scan and Monte Carlo drivers in [`oracle`] are data-parallel (rayon)
//! when the default `parallel` feature is enabled; disabling it removes the
//! dependency and runs the same code sequentially. Results are identical in
//! both modes for identical seeds and parameters.

pub mod algebra;
pub mod analysis;
pub mod chain;
pub mod error;
pub mod hmm;
pub mod oracle;

pub use algebra::{det3, rank_with_tol, solve_linear_3, ComplexPair, Mat3, Vec3};
pub use analysis::{
    directional_moments, flux2_closed_form, flux3_closed_form, likelihood, likelihood_flux,
    reversibility_verdict, skew_identity_residual, Decision, FluxReport, LikelihoodQuery,
    ReversibilityVerdict, VerdictBranch,
};
pub use chain::{ChainKind, ChainModel, EigenData, SpectralCoefficients};
pub use error::{Error, Result};
pub use hmm::{EmissionMatrix, HmmModel};
pub use oracle::{
    enumerate_likelihood_dtmc, exhaustive_flux_scan, matrix_exponential, matrix_power,
    monte_carlo_joint, simulate_ctmc, simulate_dtmc, McEstimate, ScanResult, Trajectory,
};

/// Default numerical tolerance.
///
/// Used for input validation, rank decisions, the repeated-eigenvalue branch
/// switch and the flux-is-zero threshold. All quantities in this crate are
/// smooth functions of the model entries at 3x3 scale, so a single relative
/// tolerance is adequate.
pub const TOL: f64 = 1e-10;
