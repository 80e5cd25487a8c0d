//! Time propagation by Liouvillian spectral decomposition, fixed-step RK4,
//! and the scaling-and-squaring matrix exponential used as the reference
//! propagator.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::Error;
use crate::liouvillian::{build_superoperator, spectrum, LiouvillianSpectrum, Superoperator};
use crate::mat2::{self, Mat2, ZERO};
use crate::mpemba::trace_distance;
use crate::qstate::{bloch_vector, DensityMatrix, SystemParams};
use crate::Result;

/// Time-stamped states under fixed parameters.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub params: SystemParams,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, states: Vec<DensityMatrix>, params: SystemParams) -> Result<Self> {
        if times.len() != states.len() || times.len() < 2 {
            return Err(Error::GridMismatch(format!(
                "{} times vs {} states (need >= 2)",
                times.len(),
                states.len()
            )));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::GridMismatch("times not strictly increasing".into()));
        }
        Ok(Self { times, states, params })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Lazily computed trace distances to a reference state.
    pub fn distances_to(&self, reference: &DensityMatrix) -> Vec<f64> {
        self.states.iter().map(|s| trace_distance(s, reference)).collect()
    }

    /// CSV dump: t, gamma_t, sx, sy, sz, trace_distance_to_ss.
    /// `gamma_t` uses gamma_minus as the rate unit.
    pub fn write_csv<W: std::io::Write>(
        &self,
        w: &mut W,
        steady: &DensityMatrix,
    ) -> std::io::Result<()> {
        writeln!(w, "t,gamma_t,sx,sy,sz,trace_distance_to_ss")?;
        let gamma = self.params.gamma_minus;
        for (t, s) in self.times.iter().zip(&self.states) {
            let b = bloch_vector(s);
            let d = trace_distance(s, steady);
            writeln!(w, "{},{},{},{},{},{}", t, gamma * t, b[0], b[1], b[2], d)?;
        }
        Ok(())
    }
}

/// Default figure grid: `n` log-spaced points over gamma t in [lo, hi].
pub fn log_spaced_times(gamma: f64, lo_gamma_t: f64, hi_gamma_t: f64, n: usize) -> Vec<f64> {
    let (l0, l1) = (lo_gamma_t.ln(), hi_gamma_t.ln());
    (0..n)
        .map(|i| (l0 + (l1 - l0) * i as f64 / (n - 1) as f64).exp() / gamma)
        .collect()
}

/// Recommended RK4 step: 1e-3 / max(gamma, Omega).
pub fn default_dt(params: &SystemParams) -> f64 {
    let scale = params
        .gamma_minus
        .max(params.gamma_y)
        .max(params.omega())
        .max(1e-3);
    1e-3 / scale
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.len() < 2 {
        return Err(Error::GridMismatch("need at least 2 sample times".into()));
    }
    if times[0] < 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::GridMismatch("times must be non-negative and strictly increasing".into()));
    }
    Ok(())
}

/// Spectral propagation rho(t) = rho_SS + sum_{k>=2} Tr[l_k rho_0] r_k e^{lambda_k t}.
///
/// Fails with `DefectiveSpectrum` near a point where the modes coalesce; use
/// [`evolve_ode`] there.
pub fn evolve_spectral(
    rho0: &DensityMatrix,
    params: &SystemParams,
    times: &[f64],
) -> Result<Trajectory> {
    check_times(times)?;
    let spec = spectrum(params)?;
    evolve_with_spectrum(rho0, params, times, &spec)
}

/// Same as [`evolve_spectral`] with a precomputed spectrum.
pub fn evolve_with_spectrum(
    rho0: &DensityMatrix,
    params: &SystemParams,
    times: &[f64],
    spec: &LiouvillianSpectrum,
) -> Result<Trajectory> {
    check_times(times)?;
    let ss = spec.steady_state()?;
    let coeffs: Vec<Complex64> = (1..4).map(|k| spec.coefficient(k, rho0.matrix())).collect();
    let mut states = Vec::with_capacity(times.len());
    let mut worst_herm = 0.0_f64;
    for &t in times {
        let mut m = *ss.matrix();
        for (k, c) in coeffs.iter().enumerate() {
            let phase = (spec.eigenvalues[k + 1] * t).exp();
            m = mat2::add(&m, &mat2::scale(&spec.right_modes[k + 1], c * phase));
        }
        worst_herm = worst_herm.max(mat2::herm_deviation(&m));
        states.push(DensityMatrix::from_evolution(m)?);
    }
    if worst_herm > 1e-10 {
        log::warn!("spectral propagation: hermiticity deviation {worst_herm:.3e} symmetrized away");
    }
    Trajectory::new(times.to_vec(), states, *params)
}

fn matvec(m: &Array2<Complex64>, v: &[Complex64; 4]) -> [Complex64; 4] {
    let mut out = [ZERO; 4];
    for (i, o) in out.iter_mut().enumerate() {
        for (j, x) in v.iter().enumerate() {
            *o += m[[i, j]] * x;
        }
    }
    out
}

fn axpy(a: f64, x: &[Complex64; 4], y: &[Complex64; 4]) -> [Complex64; 4] {
    std::array::from_fn(|i| y[i] + a * x[i])
}

fn rk4_step(m: &Array2<Complex64>, v: &[Complex64; 4], h: f64) -> [Complex64; 4] {
    let k1 = matvec(m, v);
    let k2 = matvec(m, &axpy(0.5 * h, &k1, v));
    let k3 = matvec(m, &axpy(0.5 * h, &k2, v));
    let k4 = matvec(m, &axpy(h, &k3, v));
    std::array::from_fn(|i| v[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

/// Classical fixed-step RK4 integration of the vectorized master equation.
///
/// The first substep is integrated twice (step doubling); a local error above
/// 1e-8 aborts with `StepTooLarge`. Trace drift beyond 1e-12 is renormalized.
pub fn evolve_ode(
    rho0: &DensityMatrix,
    params: &SystemParams,
    times: &[f64],
    dt: f64,
) -> Result<Trajectory> {
    check_times(times)?;
    if !(dt > 0.0) {
        return Err(Error::GridMismatch(format!("dt must be positive, got {dt}")));
    }
    let sup = build_superoperator(params);
    let m = sup.matrix();

    let mut v = mat2::to_vec4(rho0.matrix());
    let mut t = 0.0;
    let mut states = Vec::with_capacity(times.len());
    let mut checked = false;
    let mut renorm_events = 0usize;

    for &target in times {
        let span = target - t;
        if span > 0.0 {
            let n = (span / dt).ceil().max(1.0) as usize;
            let h = span / n as f64;
            for k in 0..n {
                if !checked {
                    let full = rk4_step(m, &v, h);
                    let half = rk4_step(m, &rk4_step(m, &v, 0.5 * h), 0.5 * h);
                    let err = full
                        .iter()
                        .zip(&half)
                        .map(|(a, b)| (a - b).norm())
                        .fold(0.0, f64::max)
                        / 15.0;
                    if err > 1e-8 {
                        return Err(Error::StepTooLarge(err));
                    }
                    v = half;
                    checked = true;
                } else {
                    v = rk4_step(m, &v, h);
                }
                let _ = k;
            }
            t = target;
        }
        let tr = (v[0] + v[3]).re;
        if (tr - 1.0).abs() > 1e-12 {
            renorm_events += 1;
            for x in v.iter_mut() {
                *x /= tr;
            }
        }
        states.push(DensityMatrix::from_evolution(mat2::from_vec4(&v))?);
    }
    if renorm_events > 0 {
        log::debug!("evolve_ode: renormalized trace drift at {renorm_events} samples");
    }
    Trajectory::new(times.to_vec(), states, *params)
}

/// Matrix exponential by scaling and squaring with a Taylor kernel.
/// Intended for the small dense matrices used here.
pub fn expm(a: &Array2<Complex64>) -> Array2<Complex64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let norm = (0..n)
        .map(|j| (0..n).map(|i| a[[i, j]].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let s = if norm > 0.25 { (norm / 0.25).log2().ceil() as i32 } else { 0 };
    let b = a.mapv(|x| x / 2.0_f64.powi(s));
    let mut result = Array2::<Complex64>::eye(n);
    let mut term = Array2::<Complex64>::eye(n);
    for k in 1..=40 {
        term = term.dot(&b).mapv(|x| x / k as f64);
        result = result + &term;
        let tnorm: f64 = term.iter().map(|x| x.norm()).sum();
        if tnorm < 1e-18 {
            break;
        }
    }
    for _ in 0..s {
        result = result.dot(&result);
    }
    result
}

/// Reference propagation via expm(L t); the independent oracle for the other
/// two propagators.
pub fn evolve_expm(
    rho0: &DensityMatrix,
    params: &SystemParams,
    times: &[f64],
) -> Result<Trajectory> {
    check_times(times)?;
    let sup = build_superoperator(params);
    let mut states = Vec::with_capacity(times.len());
    let mut v = mat2::to_vec4(rho0.matrix());
    let mut t = 0.0;
    for &target in times {
        let span = target - t;
        if span > 0.0 {
            let p = expm(&sup.matrix().mapv(|x| x * span));
            v = matvec(&p, &v);
            t = target;
        }
        states.push(DensityMatrix::from_evolution(mat2::from_vec4(&v))?);
    }
    Trajectory::new(times.to_vec(), states, *params)
}

/// Propagator matrix exp(L tau) for stroboscopic references.
pub fn step_propagator(superop: &Superoperator, tau: f64) -> Array2<Complex64> {
    expm(&superop.matrix().mapv(|x| x * tau))
}

/// Apply a 4x4 propagator to a 2x2 operator.
pub fn apply_propagator(p: &Array2<Complex64>, x: &Mat2) -> Mat2 {
    mat2::from_vec4(&matvec(p, &mat2::to_vec4(x)))
}

/// d/dt ln D(rho(t), ref) by centered differences on the sampled grid.
///
/// Errors with `DistanceUnderflow` when any distance in the window drops
/// below 1e-14.
pub fn relaxation_rate(traj: &Trajectory, reference: &DensityMatrix) -> Result<Vec<(f64, f64)>> {
    let d = traj.distances_to(reference);
    if d.iter().any(|&x| x < 1e-14) {
        return Err(Error::DistanceUnderflow);
    }
    let mut out = Vec::with_capacity(traj.len().saturating_sub(2));
    for i in 1..traj.len() - 1 {
        let dt = traj.times[i + 1] - traj.times[i - 1];
        let rate = (d[i + 1].ln() - d[i - 1].ln()) / dt;
        out.push((traj.times[i], rate));
    }
    Ok(out)
}
