//! Liouvillian superoperator: construction, numeric and closed-form spectra,
//! discriminant classification, exceptional point and steady state.
//!
//! Vectorization is row-major, acting on (rho00, rho01, rho10, rho11); this is
//! also the wire format for all 4x4 dumps.

use faer::linalg::solvers::DenseSolveCore;
use faer::Mat;
use ndarray::Array2;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::Error;
use crate::mat2::{self, Mat2, ZERO};
use crate::qstate::{from_bloch, DensityMatrix, SystemParams};
use crate::Result;

/// Default bound on the eigenvector-matrix condition number before the
/// spectrum is flagged as near-defective (modes coalesce at the LEP).
pub const DEFAULT_CONDITION_BOUND: f64 = 1e8;

/// Absolute discriminant window treated as non-diagonalizable for spectral
/// propagation.
pub const LEP_DISCRIMINANT_WINDOW: f64 = 1e-10;

/// 4x4 matrix acting on row-major vectorized states.
#[derive(Debug, Clone)]
pub struct Superoperator {
    m: Array2<Complex64>,
    params: SystemParams,
}

impl Superoperator {
    pub fn matrix(&self) -> &Array2<Complex64> {
        &self.m
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    /// L[x] for an arbitrary 2x2 operator (result need not be a state).
    pub fn apply(&self, x: &Mat2) -> Mat2 {
        let v = mat2::to_vec4(x);
        let mut out = [ZERO; 4];
        for (i, o) in out.iter_mut().enumerate() {
            for (j, vj) in v.iter().enumerate() {
                *o += self.m[[i, j]] * vj;
            }
        }
        mat2::from_vec4(&out)
    }

    /// L^dag[x] with respect to the Hilbert-Schmidt inner product.
    pub fn apply_adjoint(&self, x: &Mat2) -> Mat2 {
        let v = mat2::to_vec4(x);
        let mut out = [ZERO; 4];
        for (i, o) in out.iter_mut().enumerate() {
            for (j, vj) in v.iter().enumerate() {
                *o += self.m[[j, i]].conj() * vj;
            }
        }
        mat2::from_vec4(&out)
    }
}

fn kron2(a: &Mat2, b: &Mat2) -> Array2<Complex64> {
    let mut out = Array2::zeros((4, 4));
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out[[2 * i + k, 2 * j + l]] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

/// Assemble the superoperator from the general vectorization formula
/// -i(H (x) I - I (x) H^T) + sum_j gamma_j (o (x) o* - 1/2 o^dag o (x) I
/// - 1/2 I (x) (o^dag o)^T).
pub fn build_superoperator(params: &SystemParams) -> Superoperator {
    let h = params.hamiltonian();
    let id = mat2::identity();
    let ht = [[h[0][0], h[1][0]], [h[0][1], h[1][1]]];
    let mut m = kron2(&h, &id) - kron2(&id, &ht);
    m.mapv_inplace(|x| x * Complex64::new(0.0, -1.0));
    for (op, rate) in [(mat2::sigma_minus(), params.gamma_minus), (mat2::sigma_y(), params.gamma_y)] {
        let conj = [[op[0][0].conj(), op[0][1].conj()], [op[1][0].conj(), op[1][1].conj()]];
        let od_o = mat2::mul(&mat2::adjoint(&op), &op);
        let od_o_t = [[od_o[0][0], od_o[1][0]], [od_o[0][1], od_o[1][1]]];
        let jump = kron2(&op, &conj);
        let anti = kron2(&od_o, &id) + kron2(&id, &od_o_t);
        let g = Complex64::new(rate, 0.0);
        let half = Complex64::new(0.5, 0.0);
        m = m + jump.mapv(|x| x * g) - anti.mapv(|x| x * g * half);
    }
    Superoperator { m, params: *params }
}

/// Normalization convention for the bi-orthonormal mode pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NormalizationTag {
    /// Left modes have unit Hilbert-Schmidt norm; right modes are scaled so
    /// that Tr[l_j r_k] = delta_jk. Coefficients are then c_k = Tr[l_k rho].
    LeftHsUnit,
}

/// Eigenvalues (descending real part, lambda_1 = 0 first) with bi-orthonormal
/// left/right eigenmodes.
#[derive(Debug, Clone)]
pub struct LiouvillianSpectrum {
    pub eigenvalues: [Complex64; 4],
    pub right_modes: [Mat2; 4],
    pub left_modes: [Mat2; 4],
    pub normalization: NormalizationTag,
}

impl LiouvillianSpectrum {
    /// rho_SS = r_1 / Tr[r_1].
    pub fn steady_state(&self) -> Result<DensityMatrix> {
        let r1 = &self.right_modes[0];
        let tr = mat2::trace(r1);
        if tr.norm() < 1e-12 {
            return Err(Error::NoUniqueSteadyState);
        }
        DensityMatrix::from_evolution(mat2::scale(r1, Complex64::new(1.0, 0.0) / tr))
    }

    /// Expansion coefficient Tr[l_k x] of mode k (0-based).
    pub fn coefficient(&self, k: usize, x: &Mat2) -> Complex64 {
        mat2::trace_prod(&self.left_modes[k], x)
    }
}

/// Deterministic ordering: descending Re (ties within 1e-9 relative), then
/// ascending |Im|, then positive Im first.
fn sort_indices(vals: &[Complex64; 4]) -> [usize; 4] {
    let scale = vals.iter().map(|v| v.norm()).fold(1.0_f64, f64::max);
    let tol = 1e-9 * scale;
    let mut idx = [0usize, 1, 2, 3];
    idx.sort_by(|&a, &b| {
        let (va, vb) = (vals[a], vals[b]);
        if (va.re - vb.re).abs() > tol {
            return vb.re.partial_cmp(&va.re).unwrap();
        }
        let (ia, ib) = (va.im.abs(), vb.im.abs());
        if (ia - ib).abs() > tol {
            return ia.partial_cmp(&ib).unwrap();
        }
        vb.im.partial_cmp(&va.im).unwrap()
    });
    idx
}

/// Full numeric eigendecomposition with the default condition bound.
pub fn numeric_spectrum(superop: &Superoperator) -> Result<LiouvillianSpectrum> {
    numeric_spectrum_with(superop, DEFAULT_CONDITION_BOUND)
}

/// Numeric eigendecomposition; errors with `NearDefectiveMatrix` when the
/// eigenvector condition number exceeds `condition_bound`.
pub fn numeric_spectrum_with(
    superop: &Superoperator,
    condition_bound: f64,
) -> Result<LiouvillianSpectrum> {
    let a = Mat::from_fn(4, 4, |i, j| superop.m[[i, j]]);
    let evd = a
        .eigen()
        .map_err(|_| Error::NearDefectiveMatrix { cond: f64::INFINITY, bound: condition_bound })?;
    let s = evd.S();
    let u = evd.U();

    let vals_raw: [Complex64; 4] = std::array::from_fn(|k| s[k]);
    let order = sort_indices(&vals_raw);

    let mut v = Mat::zeros(4, 4);
    for (col, &src) in order.iter().enumerate() {
        for row in 0..4 {
            v[(row, col)] = u[(row, src)];
        }
    }
    let w = v.full_piv_lu().inverse();

    let norm_f = |m: &Mat<Complex64>| -> f64 {
        let mut s = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                s += m[(i, j)].norm_sqr();
            }
        }
        s.sqrt()
    };
    let cond = norm_f(&v) * norm_f(&w);
    if cond > condition_bound {
        return Err(Error::NearDefectiveMatrix { cond, bound: condition_bound });
    }

    let mut eigenvalues = [ZERO; 4];
    let mut right_modes = [[[ZERO; 2]; 2]; 4];
    let mut left_modes = [[[ZERO; 2]; 2]; 4];
    for k in 0..4 {
        eigenvalues[k] = vals_raw[order[k]];
        // right mode: column k of V, reshaped row-major
        let r: Mat2 = [[v[(0, k)], v[(1, k)]], [v[(2, k)], v[(3, k)]]];
        // left mode: row k of W = V^-1, reshaped then transposed so that
        // Tr[l rho] = w . vec(rho)
        let l: Mat2 = [[w[(k, 0)], w[(k, 2)]], [w[(k, 1)], w[(k, 3)]]];
        let n = mat2::hs_norm(&l);
        left_modes[k] = mat2::scale(&l, Complex64::new(1.0 / n, 0.0));
        right_modes[k] = mat2::scale(&r, Complex64::new(n, 0.0));
    }

    if eigenvalues[0].norm() > 1e-10 {
        return Err(Error::InvalidParams(format!(
            "no zero eigenvalue found (|lambda_1| = {:.3e})",
            eigenvalues[0].norm()
        )));
    }

    Ok(LiouvillianSpectrum {
        eigenvalues,
        right_modes,
        left_modes,
        normalization: NormalizationTag::LeftHsUnit,
    })
}

/// Spectrum for spectral propagation: refuses parameter points inside the
/// exceptional-point window where the mode basis degenerates.
pub fn spectrum(params: &SystemParams) -> Result<LiouvillianSpectrum> {
    if let Some(gamma) = params.equal_rate() {
        if gamma > 0.0 && discriminant(params)?.delta.abs() < LEP_DISCRIMINANT_WINDOW {
            return Err(Error::DefectiveSpectrum);
        }
    }
    numeric_spectrum(&build_superoperator(params))
}

/// Depressed-cubic coefficients Q, R and the discriminant
/// Delta = (Q/2)^2 + (R/3)^3 of the nonzero-eigenvalue cubic.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CubicCoefficients {
    pub q: f64,
    pub r: f64,
    pub delta: f64,
}

impl CubicCoefficients {
    fn from_qr(q: f64, r: f64) -> Self {
        Self { q, r, delta: (q / 2.0).powi(2) + (r / 3.0).powi(3) }
    }
}

/// Q and R for equal rates: the substitution lambda = mu - 2 gamma turns the
/// characteristic cubic into mu^3 + R mu + Q = 0.
pub fn discriminant(params: &SystemParams) -> Result<CubicCoefficients> {
    let gamma = params.equal_rate().ok_or(Error::UnequalRatesUnsupported)?;
    let (wy2, wz2) = (params.omega_y * params.omega_y, params.omega_z * params.omega_z);
    let q = -6.0 * gamma * wy2 + 4.0 * gamma * wz2 - 0.75 * gamma.powi(3);
    let r = 4.0 * (wy2 + wz2) - 1.75 * gamma * gamma;
    Ok(CubicCoefficients::from_qr(q, r))
}

/// The three nonzero eigenvalues in closed form (equal rates only).
///
/// Delta < 0 (three distinct real roots) uses the trigonometric branch;
/// Delta >= 0 uses the algebraic Cardano form with the numerically stable
/// cube-root pairing.
pub fn analytic_eigenvalues(params: &SystemParams) -> Result<[Complex64; 3]> {
    let gamma = params.equal_rate().ok_or(Error::UnequalRatesUnsupported)?;
    let c = discriminant(params)?;
    let (q, r) = (c.q, c.r);
    let shift = -2.0 * gamma;
    if c.delta < 0.0 {
        // casus irreducibilis: R < 0 guaranteed here
        let m = 2.0 * (-r / 3.0).sqrt();
        let arg = (-(3.0 * q / (2.0 * r.abs())) * (-3.0 / r).sqrt()).clamp(-1.0, 1.0);
        let theta = arg.acos();
        let root = |k: f64| shift + m * ((theta - 2.0 * std::f64::consts::PI * k) / 3.0).cos();
        // k = 2, 3, 4 sweeps all three branches
        Ok([
            Complex64::new(root(2.0), 0.0),
            Complex64::new(root(3.0), 0.0),
            Complex64::new(root(4.0), 0.0),
        ])
    } else {
        let s = -q / 2.0;
        let sq = c.delta.sqrt();
        let u = if s == 0.0 { sq.cbrt() } else { (s + sq.copysign(s)).cbrt() };
        let v = if u == 0.0 { 0.0 } else { (-r / 3.0) / u };
        let real = shift + u + v;
        let re = shift - 0.5 * (u + v);
        let im = 0.5 * 3.0_f64.sqrt() * (u - v);
        Ok([
            Complex64::new(real, 0.0),
            Complex64::new(re, im),
            Complex64::new(re, -im),
        ])
    }
}

/// Critical decay rate gamma_c where the discriminant vanishes and the
/// eigenvalues coalesce.
///
/// Solves 27 Q^2 + 4 R^3 = 0 as a cubic in x = gamma^2 and keeps the real
/// non-negative root across which Delta(gamma) changes sign.
pub fn find_lep(omega_y: f64, omega_z: f64) -> Result<f64> {
    if omega_y == 0.0 && omega_z == 0.0 {
        return Err(Error::DegenerateHamiltonian);
    }
    let (w, z) = (omega_y * omega_y, omega_z * omega_z);
    // 25 x^3 + 60 (z - 26 w) x^2 + 48 (164 w z - 53 w^2 - 8 z^2) x
    //   - 1024 (w + z)^3 = 0
    let a = 25.0;
    let b = 60.0 * (z - 26.0 * w);
    let c = 48.0 * (164.0 * w * z - 53.0 * w * w - 8.0 * z * z);
    let d = -1024.0 * (w + z).powi(3);
    let roots = real_cubic_roots(a, b, c, d);

    let delta_at = |gamma: f64| -> f64 {
        let p = SystemParams::symmetric(omega_y, omega_z, gamma).expect("valid params");
        discriminant(&p).expect("equal rates").delta
    };

    let mut candidates: Vec<f64> = roots.into_iter().filter(|x| *x > 0.0).collect();
    candidates.sort_by(|p, q| p.partial_cmp(q).unwrap());
    for x0 in candidates {
        // polish the cubic root itself (stays within the closed-form route)
        let mut x = x0;
        for _ in 0..4 {
            let f = ((a * x + b) * x + c) * x + d;
            let df = (3.0 * a * x + 2.0 * b) * x + c;
            if df == 0.0 {
                break;
            }
            x -= f / df;
        }
        if x <= 0.0 {
            continue;
        }
        let gc = x.sqrt();
        let eps = (0.1 * gc).max(1e-6);
        if delta_at(gc - eps) * delta_at(gc + eps) < 0.0 {
            return Ok(gc);
        }
    }
    Err(Error::NoPhysicalRoot)
}

/// Real roots of a x^3 + b x^2 + c x + d = 0.
fn real_cubic_roots(a: f64, b: f64, c: f64, d: f64) -> Vec<f64> {
    let (b, c, d) = (b / a, c / a, d / a);
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let shift = -b / 3.0;
    let delta = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    if delta < 0.0 {
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = (-(3.0 * q / (2.0 * p.abs())) * (-3.0 / p).sqrt()).clamp(-1.0, 1.0);
        let theta = arg.acos();
        (0..3)
            .map(|k| shift + m * ((theta - 2.0 * std::f64::consts::PI * k as f64) / 3.0).cos())
            .collect()
    } else {
        let s = -q / 2.0;
        let sq = delta.sqrt();
        let u = if s == 0.0 { sq.cbrt() } else { (s + sq.copysign(s)).cbrt() };
        let v = if u == 0.0 { 0.0 } else { (-p / 3.0) / u };
        vec![shift + u + v]
    }
}

/// Closed-form left/right eigenmodes for a nonzero eigenvalue (equal rates).
///
/// Returned under the module convention: left mode with unit Hilbert-Schmidt
/// norm, right mode scaled so Tr[l r] = 1.
pub fn analytic_eigenmodes(params: &SystemParams, lambda: Complex64) -> Result<(Mat2, Mat2)> {
    let gamma = params.equal_rate().ok_or(Error::UnequalRatesUnsupported)?;
    let pole = gamma + 2.0 * lambda.re;
    if Complex64::new(pole, 2.0 * lambda.im).norm() < 1e-12 {
        return Err(Error::EigenmodeSingularity);
    }
    let (l_raw, r_raw) = if params.omega_y == 0.0 {
        eigenmodes_decoupled(params, lambda, gamma)?
    } else {
        (raw_left_mode(params, lambda, gamma), raw_right_mode(params, lambda, gamma))
    };
    let n = mat2::hs_norm(&l_raw);
    let l = mat2::scale(&l_raw, Complex64::new(1.0 / n, 0.0));
    let pairing = mat2::trace_prod(&l, &r_raw);
    if pairing.norm() < 1e-14 {
        return Err(Error::EigenmodeSingularity);
    }
    let r = mat2::scale(&r_raw, Complex64::new(1.0, 0.0) / pairing);
    Ok((l, r))
}

/// Left mode for the generic case omega_y != 0. The off-diagonal carries a
/// factor 1/(2 omega_y); with this scaling Tr[l rho_th] equals the overlap
/// kernel used in [`crate::mpemba`].
pub(crate) fn raw_left_mode(params: &SystemParams, lambda: Complex64, gamma: f64) -> Mat2 {
    let g = Complex64::new(gamma, 0.0);
    let a = -(lambda * lambda + 3.0 * gamma * lambda) / (2.0 * params.omega_y);
    let chi = Complex64::new(0.0, 4.0 * params.omega_z) / (g + 2.0 * lambda);
    [
        [g - lambda, a * (Complex64::new(1.0, 0.0) + chi)],
        [a * (Complex64::new(1.0, 0.0) - chi), g + lambda],
    ]
}

pub(crate) fn raw_right_mode(params: &SystemParams, lambda: Complex64, gamma: f64) -> Mat2 {
    let half_g = 0.5 * gamma;
    let wy = params.omega_y;
    let two_i_wz = Complex64::new(0.0, 2.0 * params.omega_z);
    let corner = 2.0 * wy * (lambda + half_g);
    let row = (3.0 * gamma + lambda) * (two_i_wz - lambda - half_g);
    let col = -(3.0 * gamma + lambda) * (two_i_wz + lambda + half_g);
    [[corner, row], [col, -corner]]
}

/// omega_y = 0: populations and coherences decouple. The population mode sits
/// at lambda = -3 gamma; the coherence pair at -3 gamma/2 +- sqrt(gamma^2 -
/// 4 omega_z^2).
fn eigenmodes_decoupled(
    params: &SystemParams,
    lambda: Complex64,
    gamma: f64,
) -> Result<(Mat2, Mat2)> {
    let tol = 1e-9 * (1.0 + gamma.abs());
    if (lambda + Complex64::new(3.0 * gamma, 0.0)).norm() < tol {
        let l = [
            [Complex64::new(2.0 / 3.0, 0.0), ZERO],
            [ZERO, Complex64::new(-1.0 / 3.0, 0.0)],
        ];
        return Ok((l, mat2::sigma_z()));
    }
    // coherence block [[-2i wz - 3g/2, -g], [-g, 2i wz - 3g/2]]
    let g = Complex64::new(gamma, 0.0);
    let top = Complex64::new(-1.5 * gamma, -2.0 * params.omega_z);
    // right vector (v01, v10): v10 = (top - lambda)/gamma * v01... from
    // (top - lambda) v01 - g v10 = 0
    let v01 = Complex64::new(1.0, 0.0);
    let v10 = (top - lambda) / g;
    let r = [[ZERO, v01], [v10, ZERO]];
    // left row (w01, w10): w (col eqs) -> w01 (top - lambda) - g w10 = 0
    let w01 = Complex64::new(1.0, 0.0);
    let w10 = (top - lambda) / g;
    // l_ij = w_(ji)
    let l = [[ZERO, w10], [w01, ZERO]];
    Ok((l, r))
}

/// Steady state from the closed-form Bloch solution (equal rates, gamma > 0).
pub fn steady_state(params: &SystemParams) -> Result<DensityMatrix> {
    let gamma = params.equal_rate().ok_or(Error::UnequalRatesUnsupported)?;
    if gamma <= 0.0 {
        return Err(Error::NoUniqueSteadyState);
    }
    let (wy, wz) = (params.omega_y, params.omega_z);
    let denom = 8.0 * wy * wy + 48.0 * wz * wz + 15.0 * gamma * gamma;
    let x = -4.0 * wy * gamma / denom;
    let y = -16.0 * wy * wz / denom;
    let z = -(16.0 * wz * wz + 5.0 * gamma * gamma) / denom;
    from_bloch([x, y, z])
}

/// Steady state from the numeric null mode; works for unequal rates.
pub fn steady_state_numeric(params: &SystemParams) -> Result<DensityMatrix> {
    if params.gamma_minus == 0.0 && params.gamma_y == 0.0 {
        return Err(Error::NoUniqueSteadyState);
    }
    numeric_spectrum(&build_superoperator(params))?.steady_state()
}

/// JSON record for spectrum dumps ({params, eigenvalues, discriminant,
/// lep_gamma?}; deterministic field order).
#[derive(Debug, Clone, Serialize)]
pub struct SpectrumRecord {
    pub params: SystemParams,
    pub eigenvalues: Vec<EigenvalueRecord>,
    pub discriminant: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lep_gamma: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenvalueRecord {
    pub re: f64,
    pub im: f64,
}

impl SpectrumRecord {
    pub fn build(params: &SystemParams, with_lep: bool) -> Result<Self> {
        let spec = numeric_spectrum(&build_superoperator(params))?;
        let discriminant = discriminant(params).ok().map(|c| c.delta);
        let lep_gamma = if with_lep { find_lep(params.omega_y, params.omega_z).ok() } else { None };
        Ok(Self {
            params: *params,
            eigenvalues: spec
                .eigenvalues
                .iter()
                .map(|v| EigenvalueRecord { re: v.re, im: v.im })
                .collect(),
            discriminant,
            lep_gamma,
        })
    }
}
