//! Simulation toolkit for a dissipative qubit coupled to two decay channels.
//!
//! The crate covers the full pipeline for studying anomalous thermal
//! relaxation in this system:
//!
//! - [`qstate`]: density matrices, Bloch vectors, thermal states and
//!   pure-state ensembles;
//! - [`liouvillian`]: the 4x4 superoperator, its numeric and closed-form
//!   spectrum, discriminant classification and the exceptional point;
//! - [`dynamics`]: spectral, Runge-Kutta and matrix-exponential propagation;
//! - [`mpemba`]: distance measures, mode overlaps, effective temperatures,
//!   critical times and the Mpemba zone;
//! - [`collision`]: a discrete-time collision-model emulator with gate
//!   decompositions, Trotter schemes, shot sampling and the hybrid
//!   classical-quantum thermal-state reconstruction.

pub mod collision;
pub mod dynamics;
pub mod error;
pub mod liouvillian;
pub mod mat2;
pub mod mpemba;
pub mod qstate;

pub use error::Error;
pub use qstate::{DensityMatrix, PureStateEnsemble, SystemParams};

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;
