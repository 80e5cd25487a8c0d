//! Qubit state algebra: density matrices, Bloch vectors, thermal states and
//! pure-state ensembles.
//!
//! Basis convention: |0> is the spin-up state (sigma_z eigenvalue +1), |1> is
//! spin-down; the lowering operator maps |0> -> |1>. This matches the
//! superoperator layout in [`crate::liouvillian`].

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::mat2::{self, Mat2, ONE, ZERO};
use crate::Result;

const HERM_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-12;
/// Eigenvalue clipping threshold in [`spectral_decompose`]; weights below this
/// are dropped as roundoff.
const WEIGHT_CLIP: f64 = 1e-14;

/// Hamiltonian frequencies and dissipation rates (hbar = k_B = 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub omega_y: f64,
    pub omega_z: f64,
    pub gamma_minus: f64,
    pub gamma_y: f64,
}

impl SystemParams {
    pub fn new(omega_y: f64, omega_z: f64, gamma_minus: f64, gamma_y: f64) -> Result<Self> {
        if !(omega_y.is_finite() && omega_z.is_finite()) {
            return Err(Error::InvalidParams("non-finite frequency".into()));
        }
        if gamma_minus < 0.0 || gamma_y < 0.0 || !gamma_minus.is_finite() || !gamma_y.is_finite() {
            return Err(Error::InvalidParams(format!(
                "decay rates must be finite and non-negative, got ({gamma_minus}, {gamma_y})"
            )));
        }
        Ok(Self { omega_y, omega_z, gamma_minus, gamma_y })
    }

    /// Equal-rate constructor used throughout the equal-rates closed forms.
    pub fn symmetric(omega_y: f64, omega_z: f64, gamma: f64) -> Result<Self> {
        Self::new(omega_y, omega_z, gamma, gamma)
    }

    /// The common decay rate, if the two channels agree to relative 1e-12.
    pub fn equal_rate(&self) -> Option<f64> {
        let scale = self.gamma_minus.abs().max(self.gamma_y.abs()).max(1.0);
        if (self.gamma_minus - self.gamma_y).abs() <= 1e-12 * scale {
            Some(0.5 * (self.gamma_minus + self.gamma_y))
        } else {
            None
        }
    }

    /// Level splitting Omega = sqrt(omega_y^2 + omega_z^2).
    pub fn omega(&self) -> f64 {
        self.omega_y.hypot(self.omega_z)
    }

    /// H_S = omega_y sigma_y + omega_z sigma_z.
    pub fn hamiltonian(&self) -> Mat2 {
        let wy = Complex64::new(self.omega_y, 0.0);
        let wz = Complex64::new(self.omega_z, 0.0);
        mat2::add(&mat2::scale(&mat2::sigma_y(), wy), &mat2::scale(&mat2::sigma_z(), wz))
    }
}

/// A 2x2 Hermitian, unit-trace, positive-semidefinite matrix.
#[derive(Debug, Clone, Copy)]
pub struct DensityMatrix {
    m: Mat2,
}

impl DensityMatrix {
    /// Validates all invariants: Hermiticity (1e-12), unit trace (1e-12),
    /// positive semidefiniteness (eigenvalues >= -1e-12).
    pub fn new(m: Mat2) -> Result<Self> {
        let herm = mat2::herm_deviation(&m);
        if herm > HERM_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "Hermiticity deviation {herm:.3e}"
            )));
        }
        let tr = mat2::trace(&m);
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidDensityMatrix(format!("trace {tr} != 1")));
        }
        let h = mat2::hermitize(&m);
        let [lo, _] = mat2::herm_eigenvalues(&h);
        if lo < -PSD_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "negative eigenvalue {lo:.3e}"
            )));
        }
        Ok(Self { m: h })
    }

    /// Symmetrizes and renormalizes the trace before validating; used by
    /// propagators whose output carries O(1e-13) roundoff.
    pub fn from_evolution(m: Mat2) -> Result<Self> {
        let h = mat2::hermitize(&m);
        let tr = mat2::trace(&h).re;
        if (tr - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidDensityMatrix(format!("trace drifted to {tr}")));
        }
        let h = mat2::scale(&h, Complex64::new(1.0 / tr, 0.0));
        Self::new(h)
    }

    pub fn maximally_mixed() -> Self {
        Self { m: mat2::scale(&mat2::identity(), Complex64::new(0.5, 0.0)) }
    }

    /// Projector onto a normalized state vector.
    pub fn pure(psi: &[Complex64; 2]) -> Result<Self> {
        let n = (psi[0].norm_sqr() + psi[1].norm_sqr()).sqrt();
        if (n - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDensityMatrix(format!("state norm {n} != 1")));
        }
        let mut m = [[ZERO; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                m[i][j] = psi[i] * psi[j].conj();
            }
        }
        Self::new(m)
    }

    /// Basis projector |k><k|.
    pub fn basis(k: usize) -> Self {
        let mut m = [[ZERO; 2]; 2];
        m[k][k] = ONE;
        Self { m }
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.m
    }

    pub fn element(&self, i: usize, j: usize) -> Complex64 {
        self.m[i][j]
    }

    pub fn purity(&self) -> f64 {
        mat2::trace_prod(&self.m, &self.m).re
    }

    pub fn eigenvalues(&self) -> [f64; 2] {
        mat2::herm_eigenvalues(&self.m)
    }

    pub fn to_vec4(&self) -> [Complex64; 4] {
        mat2::to_vec4(&self.m)
    }

    /// Max entrywise deviation from another state.
    pub fn max_dev(&self, other: &Self) -> f64 {
        let d = mat2::sub(&self.m, &other.m);
        d.iter().flatten().map(|x| x.norm()).fold(0.0, f64::max)
    }
}

/// Bloch components (x, y, z) with rho = (I + x sx + y sy + z sz)/2.
pub fn bloch_vector(rho: &DensityMatrix) -> [f64; 3] {
    let m = rho.matrix();
    let x = (m[0][1] + m[1][0]).re;
    let y = (m[0][1] - m[1][0]).im * -1.0;
    let z = (m[0][0] - m[1][1]).re;
    [x, y, z]
}

/// Inverse of [`bloch_vector`]. Errors when |(x,y,z)| > 1 + 1e-12.
pub fn from_bloch(v: [f64; 3]) -> Result<DensityMatrix> {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if n > 1.0 + 1e-12 {
        return Err(Error::BlochNormExceeded(n));
    }
    let half = Complex64::new(0.5, 0.0);
    let m = [
        [
            half * (1.0 + v[2]),
            half * Complex64::new(v[0], -v[1]),
        ],
        [
            half * Complex64::new(v[0], v[1]),
            half * (1.0 - v[2]),
        ],
    ];
    // norm slightly above 1 within tolerance clips to a negative eigenvalue
    // of order -1e-12, still inside the DensityMatrix invariant
    DensityMatrix::new(m)
}

/// Thermal (Gibbs) state exp(-H_S/T)/Z.
///
/// `T = +inf` is accepted as a sentinel for the maximally mixed state.
/// Closed form: diagonal 1/2 -+ beta_eff Omega_z, off-diagonals +-i beta_eff
/// Omega_y, with beta_eff = tanh(Omega/T) and Omega_{y,z} = omega_{y,z}/(2 Omega).
pub fn thermal_state(params: &SystemParams, temperature: f64) -> Result<DensityMatrix> {
    if temperature.is_infinite() && temperature > 0.0 {
        return Ok(DensityMatrix::maximally_mixed());
    }
    if !(temperature > 0.0) || temperature.is_nan() {
        return Err(Error::InvalidTemperature(temperature));
    }
    let omega = params.omega();
    if omega <= 0.0 {
        return Err(Error::DegenerateHamiltonian);
    }
    let beta_eff = (omega / temperature).tanh();
    let oy = params.omega_y / (2.0 * omega);
    let oz = params.omega_z / (2.0 * omega);
    let m = [
        [
            Complex64::new(0.5 - beta_eff * oz, 0.0),
            Complex64::new(0.0, beta_eff * oy),
        ],
        [
            Complex64::new(0.0, -beta_eff * oy),
            Complex64::new(0.5 + beta_eff * oz, 0.0),
        ],
    ];
    DensityMatrix::new(m)
}

/// Convex mixture of orthonormal pure states.
#[derive(Debug, Clone)]
pub struct PureStateEnsemble {
    pub entries: Vec<(f64, [Complex64; 2])>,
}

impl PureStateEnsemble {
    /// Sum_j P_j |psi_j><psi_j|.
    pub fn reconstruct(&self) -> Result<DensityMatrix> {
        let mut m = [[ZERO; 2]; 2];
        for (p, psi) in &self.entries {
            for i in 0..2 {
                for j in 0..2 {
                    m[i][j] += Complex64::new(*p, 0.0) * psi[i] * psi[j].conj();
                }
            }
        }
        DensityMatrix::new(m)
    }
}

/// Eigendecomposition of a state into weighted orthonormal projectors.
///
/// Weights below 1e-14 are dropped; eigenvalues below -1e-12 are rejected as
/// an invalid input rather than clipped.
pub fn spectral_decompose(rho: &DensityMatrix) -> Result<PureStateEnsemble> {
    let (vals, vecs) = mat2::herm_eigen(rho.matrix());
    let mut entries = Vec::with_capacity(2);
    for (k, &p) in vals.iter().enumerate() {
        if p < -PSD_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "negative eigenvalue {p:.3e}"
            )));
        }
        let p = p.max(0.0);
        if p < WEIGHT_CLIP {
            continue;
        }
        entries.push((p, [vecs[0][k], vecs[1][k]]));
    }
    // descending weight, deterministic
    entries.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    Ok(PureStateEnsemble { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat2::hs_norm;

    fn params(wy: f64, wz: f64, g: f64) -> SystemParams {
        SystemParams::symmetric(wy, wz, g).unwrap()
    }

    /// Independent oracle: exp(-H/T)/Z via the 2x2 Hermitian eigensolver.
    fn thermal_oracle(p: &SystemParams, t: f64) -> Mat2 {
        let (vals, vecs) = mat2::herm_eigen(&p.hamiltonian());
        let w = [(-vals[0] / t).exp(), (-vals[1] / t).exp()];
        let z = w[0] + w[1];
        let mut m = [[ZERO; 2]; 2];
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    m[i][j] += Complex64::new(w[k] / z, 0.0) * vecs[i][k] * vecs[j][k].conj();
                }
            }
        }
        m
    }

    #[test]
    fn thermal_infinite_temperature_is_maximally_mixed() {
        let rho = thermal_state(&params(0.01, 2.0, 5.0), f64::INFINITY).unwrap();
        assert!(rho.max_dev(&DensityMatrix::maximally_mixed()) == 0.0);
    }

    #[test]
    fn thermal_diagonal_hamiltonian_has_no_coherence() {
        let rho = thermal_state(&params(0.0, 2.0, 5.0), 1.0).unwrap();
        assert_eq!(rho.element(0, 1), ZERO);
        assert_eq!(rho.element(1, 0), ZERO);
        assert!(rho.element(0, 0).re < rho.element(1, 1).re);
    }

    #[test]
    fn thermal_matches_matrix_exponential_oracle() {
        let p = params(0.01, 2.0, 5.0);
        for t in [0.3, 1.0, 5.0, 11.13, 120.0] {
            let rho = thermal_state(&p, t).unwrap();
            let oracle = thermal_oracle(&p, t);
            let dev = hs_norm(&mat2::sub(rho.matrix(), &oracle));
            assert!(dev < 1e-12, "T={t}: dev {dev:.3e}");
        }
    }

    #[test]
    fn thermal_rejects_bad_temperature_and_degenerate_hamiltonian() {
        let p = params(0.01, 2.0, 5.0);
        assert!(matches!(thermal_state(&p, 0.0), Err(Error::InvalidTemperature(_))));
        assert!(matches!(thermal_state(&p, -1.0), Err(Error::InvalidTemperature(_))));
        let degenerate = params(0.0, 0.0, 5.0);
        assert!(matches!(
            thermal_state(&degenerate, 1.0),
            Err(Error::DegenerateHamiltonian)
        ));
    }

    #[test]
    fn thermal_commutes_with_hamiltonian() {
        for (wy, wz) in [(0.01, 2.0), (0.7, 1.3), (0.0, 2.0)] {
            let p = params(wy, wz, 1.0);
            for t in [0.5, 3.0, 40.0] {
                let rho = thermal_state(&p, t).unwrap();
                let c = mat2::commutator(rho.matrix(), &p.hamiltonian());
                assert!(hs_norm(&c) < 1e-12);
            }
        }
    }

    #[test]
    fn thermal_purity_decreases_with_temperature() {
        let p = params(0.03, 1.5, 1.0);
        let mut last = f64::INFINITY;
        for t in [0.2, 0.5, 1.0, 2.0, 5.0, 20.0, 300.0] {
            let pur = thermal_state(&p, t).unwrap().purity();
            assert!(pur <= last + 1e-15);
            last = pur;
        }
    }

    #[test]
    fn decompose_maximally_mixed() {
        let ens = spectral_decompose(&DensityMatrix::maximally_mixed()).unwrap();
        assert_eq!(ens.entries.len(), 2);
        for (p, _) in &ens.entries {
            assert!((p - 0.5).abs() < 1e-15);
        }
        // orthonormal
        let a = &ens.entries[0].1;
        let b = &ens.entries[1].1;
        let dot = a[0].conj() * b[0] + a[1].conj() * b[1];
        assert!(dot.norm() < 1e-14);
    }

    #[test]
    fn decompose_pure_state_single_entry() {
        let ens = spectral_decompose(&DensityMatrix::basis(0)).unwrap();
        assert_eq!(ens.entries.len(), 1);
        assert!((ens.entries[0].0 - 1.0).abs() < 1e-14);
        assert!((ens.entries[0].1[0].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn decompose_thermal_probabilities_are_gibbs_weights() {
        let p = params(0.01, 2.0, 5.0);
        let t = 11.13;
        let ens = spectral_decompose(&thermal_state(&p, t).unwrap()).unwrap();
        let om = p.omega();
        let z = (om / t).exp() + (-om / t).exp();
        let expect_hi = (om / t).exp() / z; // weight of the lower-energy state
        let ps: Vec<f64> = ens.entries.iter().map(|(w, _)| *w).collect();
        assert!((ps[0] - expect_hi).abs() < 1e-12, "{ps:?}");
        assert!((ps[1] - (1.0 - expect_hi)).abs() < 1e-12);
    }

    #[test]
    fn decompose_reconstruct_roundtrip() {
        let p = params(0.05, 1.1, 2.0);
        for t in [0.7, 4.0, 33.0] {
            let rho = thermal_state(&p, t).unwrap();
            let back = spectral_decompose(&rho).unwrap().reconstruct().unwrap();
            assert!(rho.max_dev(&back) < 1e-12);
        }
    }

    #[test]
    fn bloch_examples_and_roundtrip() {
        assert_eq!(bloch_vector(&DensityMatrix::basis(0)), [0.0, 0.0, 1.0]);
        assert_eq!(bloch_vector(&DensityMatrix::maximally_mixed()), [0.0, 0.0, 0.0]);
        let v = [0.3, -0.4, 0.5];
        let rho = from_bloch(v).unwrap();
        let w = bloch_vector(&rho);
        for i in 0..3 {
            assert!((v[i] - w[i]).abs() < 1e-14);
        }
        let again = from_bloch(w).unwrap();
        assert!(rho.max_dev(&again) < 1e-14);
    }

    #[test]
    fn bloch_norm_exceeded() {
        assert!(matches!(
            from_bloch([0.8, 0.0, 0.7]),
            Err(Error::BlochNormExceeded(_))
        ));
    }

    #[test]
    fn density_matrix_rejects_invalid() {
        let mut m = mat2::identity();
        m[0][0] = Complex64::new(0.9, 0.0);
        m[1][1] = Complex64::new(0.3, 0.0);
        assert!(DensityMatrix::new(m).is_err());
        let non_herm = [
            [Complex64::new(0.5, 0.0), Complex64::new(0.5, 0.0)],
            [Complex64::new(-0.5, 0.0), Complex64::new(0.5, 0.0)],
        ];
        assert!(DensityMatrix::new(non_herm).is_err());
        let neg = [
            [Complex64::new(1.2, 0.0), ZERO],
            [ZERO, Complex64::new(-0.2, 0.0)],
        ];
        assert!(DensityMatrix::new(neg).is_err());
    }
}
