//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid temperature {0}: must be positive or +inf")]
    InvalidTemperature(f64),

    #[error("degenerate Hamiltonian: omega_y = omega_z = 0")]
    DegenerateHamiltonian,

    #[error("invalid system parameters: {0}")]
    InvalidParams(String),

    #[error("not a valid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("Bloch vector norm {0} exceeds 1")]
    BlochNormExceeded(f64),

    #[error("eigenvector matrix nearly defective (condition {cond:.3e} > bound {bound:.3e})")]
    NearDefectiveMatrix { cond: f64, bound: f64 },

    #[error("closed-form spectrum requires equal rates gamma_minus = gamma_y")]
    UnequalRatesUnsupported,

    #[error("no real non-negative root solves the exceptional-point cubic")]
    NoPhysicalRoot,

    #[error("eigenmode formula singular at gamma + 2 lambda = 0")]
    EigenmodeSingularity,

    #[error("no unique steady state at gamma = 0")]
    NoUniqueSteadyState,

    #[error("spectrum defective at this parameter point; use the ODE propagator")]
    DefectiveSpectrum,

    #[error("integration step too large: step-doubling error {0:.3e} exceeds 1e-8")]
    StepTooLarge(f64),

    #[error("trace distance below 1e-14: relaxation rate undefined")]
    DistanceUnderflow,

    #[error("time grids do not match: {0}")]
    GridMismatch(String),

    #[error("collision rates differ across segments: {0} vs {1}")]
    RateMismatch(f64, f64),

    #[error("initial state already within threshold of the steady state")]
    AlreadyConverged,

    #[error("metric minimum at search-bracket endpoint T = {0}")]
    BracketFailure(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
