//! Anomalous-relaxation diagnostics: distance measures, mode overlaps,
//! effective temperatures, critical times, effective velocity and the
//! temperature window where hotter states relax strictly faster.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::Error;
use crate::liouvillian::{
    analytic_eigenvalues, raw_left_mode, spectrum, steady_state, steady_state_numeric,
    LiouvillianSpectrum,
};
use crate::mat2::{self, Mat2};
use crate::qstate::{thermal_state, DensityMatrix, SystemParams};
use crate::Result;

/// Trace distance D = 1/2 ||a - b||_1 in [0, 1].
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    let diff = mat2::sub(a.matrix(), b.matrix());
    0.5 * mat2::trace_norm_herm(&diff)
}

const EIG_FLOOR: f64 = 1e-15;

/// Quantum relative entropy S(a||b) = Tr[a ln a - a ln b] (natural log).
///
/// Returns `f64::INFINITY` when b has a zero eigenvalue outside a's kernel.
pub fn relative_entropy(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    let (pa, va) = mat2::herm_eigen(a.matrix());
    let (pb, vb) = mat2::herm_eigen(b.matrix());
    let mut s = 0.0;
    for (i, &p) in pa.iter().enumerate() {
        if p <= EIG_FLOOR {
            continue; // 0 ln 0 := 0
        }
        s += p * p.ln();
        for (j, &q) in pb.iter().enumerate() {
            // overlap |<b_j|a_i>|^2
            let dot = vb[0][j].conj() * va[0][i] + vb[1][j].conj() * va[1][i];
            let w = dot.norm_sqr();
            if w <= 1e-18 {
                continue;
            }
            if q <= EIG_FLOOR {
                return f64::INFINITY;
            }
            s -= p * w * q.ln();
        }
    }
    s.max(0.0)
}

/// Deterministic ordering of the nonzero eigenvalues: descending Re (ties
/// within 1e-9 relative), ascending |Im|, positive Im first.
fn sort_nonzero(roots: &mut [Complex64; 3]) {
    let scale = roots.iter().map(|v| v.norm()).fold(1.0_f64, f64::max);
    let tol = 1e-9 * scale;
    roots.sort_by(|a, b| {
        if (a.re - b.re).abs() > tol {
            return b.re.partial_cmp(&a.re).unwrap();
        }
        let (ia, ib) = (a.im.abs(), b.im.abs());
        if (ia - ib).abs() > tol {
            return ia.partial_cmp(&ib).unwrap();
        }
        b.im.partial_cmp(&a.im).unwrap()
    });
}

fn check_mode_index(k: usize) -> Result<()> {
    if (2..=4).contains(&k) {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("mode index k = {k} outside 2..=4")))
    }
}

/// Overlap c_k = |Tr[l_k rho_th[T]]| from the numeric spectrum
/// (left modes HS-normalized). k indexes the sorted eigenvalues, k = 2 being
/// the slowest nonzero mode.
pub fn overlap_ck(params: &SystemParams, temperature: f64, k: usize) -> Result<f64> {
    check_mode_index(k)?;
    let spec = spectrum(params)?;
    let rho = thermal_state(params, temperature)?;
    Ok(spec.coefficient(k - 1, rho.matrix()).norm())
}

/// Overlap of mode k with a precomputed spectrum (sweep-friendly).
pub fn overlap_ck_with(
    spec: &LiouvillianSpectrum,
    params: &SystemParams,
    temperature: f64,
    k: usize,
) -> Result<f64> {
    check_mode_index(k)?;
    let rho = thermal_state(params, temperature)?;
    Ok(spec.coefficient(k - 1, rho.matrix()).norm())
}

/// Thermal-overlap kernel f(lambda) = gamma - 2 beta_eff Omega_z lambda
/// 5 gamma / (gamma + 2 lambda); c_k vanishes where it does.
fn overlap_kernel(lambda: Complex64, gamma: f64, beta_oz: f64) -> Complex64 {
    let g = Complex64::new(gamma, 0.0);
    g - 2.0 * beta_oz * lambda * 5.0 * gamma / (g + 2.0 * lambda)
}

/// Closed-form overlap c_k = |f(lambda_k)| / ||l_k_raw||, equal rates only.
///
/// At omega_y = 0 the coherence modes (k = 2, 3) have exactly zero overlap
/// with any thermal state and the population mode sits at lambda = -3 gamma.
pub fn overlap_ck_analytic(params: &SystemParams, temperature: f64, k: usize) -> Result<f64> {
    check_mode_index(k)?;
    let gamma = params.equal_rate().ok_or(Error::UnequalRatesUnsupported)?;
    let mut roots = analytic_eigenvalues(params)?;
    sort_nonzero(&mut roots);
    let lambda = roots[k - 2];
    let omega = params.omega();
    if omega <= 0.0 {
        return Err(Error::DegenerateHamiltonian);
    }
    let beta = if temperature.is_infinite() {
        0.0
    } else if temperature > 0.0 {
        (omega / temperature).tanh()
    } else {
        return Err(Error::InvalidTemperature(temperature));
    };
    let oz = params.omega_z / (2.0 * omega);

    if params.omega_y == 0.0 {
        let tol = 1e-9 * (1.0 + gamma);
        if (lambda + Complex64::new(3.0 * gamma, 0.0)).norm() < tol {
            // population mode: unit-HS left mode diag(2, -1)/sqrt(5)
            return Ok((0.5 - 3.0 * beta * oz).abs() / 5.0_f64.sqrt());
        }
        return Ok(0.0);
    }
    let l = raw_left_mode(params, lambda, gamma);
    Ok(overlap_kernel(lambda, gamma, beta * oz).norm() / mat2::hs_norm(&l))
}

/// Temperature at which the slowest-mode overlap c_2 vanishes, when the
/// slowest nonzero eigenvalue is real (above the exceptional point).
///
/// All real roots are screened; the returned temperature is the one whose
/// c_2 suppression is confirmed numerically (<= 1e-8). `None` is a valid
/// outcome below the exceptional point or when no admissible root exists.
pub fn critical_temperature(params: &SystemParams) -> Result<Option<f64>> {
    let gamma = params.equal_rate().ok_or(Error::UnequalRatesUnsupported)?;
    if gamma <= 0.0 {
        return Err(Error::NoUniqueSteadyState);
    }
    if params.omega_y == 0.0 {
        // c_2 is identically zero: no suppression temperature exists
        return Ok(None);
    }
    let omega = params.omega();
    let oz = params.omega_z / (2.0 * omega);
    let mut roots = analytic_eigenvalues(params)?;
    sort_nonzero(&mut roots);
    let scale = roots.iter().map(|r| r.norm()).fold(1.0_f64, f64::max);
    let spec = spectrum(params)?;
    for lambda in roots {
        if lambda.im.abs() > 1e-9 * scale {
            continue;
        }
        let lam = lambda.re;
        let denom = 10.0 * lam * oz;
        if denom == 0.0 {
            continue;
        }
        let beta = (gamma + 2.0 * lam) / denom;
        if !(0.0 < beta && beta < 1.0) {
            continue;
        }
        let t_c = omega / beta.atanh();
        if overlap_ck_with(&spec, params, t_c, 2)? <= 1e-8 {
            return Ok(Some(t_c));
        }
    }
    Ok(None)
}

/// Metric used for the steady-state effective temperature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DistanceMetric {
    TraceDistance,
    RelativeEntropy,
}

const T_SCAN_MIN: f64 = 1e-2;
const T_SCAN_MAX: f64 = 1e3;
const T_SCAN_POINTS: usize = 64;
const T_TOL: f64 = 1e-4;

fn reference_steady_state(params: &SystemParams) -> Result<DensityMatrix> {
    match steady_state(params) {
        Ok(ss) => Ok(ss),
        Err(Error::UnequalRatesUnsupported) => steady_state_numeric(params),
        Err(e) => Err(e),
    }
}

/// Temperature of the thermal state closest to the steady state under the
/// chosen metric: coarse log-spaced scan over [1e-2, 1e3], then
/// golden-section refinement to absolute tolerance 1e-4.
pub fn steady_state_temperature(params: &SystemParams, metric: DistanceMetric) -> Result<f64> {
    let ss = reference_steady_state(params)?;
    let f = |t: f64| -> Result<f64> {
        let th = thermal_state(params, t)?;
        Ok(match metric {
            DistanceMetric::TraceDistance => trace_distance(&ss, &th),
            DistanceMetric::RelativeEntropy => relative_entropy(&ss, &th),
        })
    };
    let (l0, l1) = (T_SCAN_MIN.ln(), T_SCAN_MAX.ln());
    let grid: Vec<f64> = (0..T_SCAN_POINTS)
        .map(|i| (l0 + (l1 - l0) * i as f64 / (T_SCAN_POINTS - 1) as f64).exp())
        .collect();
    let vals = grid.iter().map(|&t| f(t)).collect::<Result<Vec<_>>>()?;
    let kmin = vals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    if kmin == 0 || kmin == T_SCAN_POINTS - 1 {
        return Err(Error::BracketFailure(grid[kmin]));
    }
    let (mut a, mut b) = (grid[kmin - 1], grid[kmin + 1]);
    let phi = 0.5 * (3.0 - 5.0_f64.sqrt());
    let (mut x1, mut x2) = (a + phi * (b - a), b - phi * (b - a));
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    while b - a > T_TOL {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = a + phi * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = b - phi * (b - a);
            f2 = f(x2)?;
        }
    }
    Ok(0.5 * (a + b))
}

/// Smallest t with D(rho(t), rho_SS) <= threshold: exponential bracketing,
/// then bisection on the monotone tail to resolution 1e-6 in gamma t.
pub fn critical_time(
    params: &SystemParams,
    rho0: &DensityMatrix,
    threshold: f64,
) -> Result<f64> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidConfig(format!("threshold {threshold} outside (0,1)")));
    }
    let spec = spectrum(params)?;
    let ss = spec.steady_state()?;
    let evaluator = DistanceEvaluator::new(&spec, rho0, &ss);
    critical_time_with(&evaluator, params, threshold)
}

/// Spectral closed-form evaluator for D(rho(t), rho_SS).
struct DistanceEvaluator {
    eigenvalues: [Complex64; 3],
    terms: [Mat2; 3],
}

impl DistanceEvaluator {
    fn new(spec: &LiouvillianSpectrum, rho0: &DensityMatrix, _ss: &DensityMatrix) -> Self {
        let eigenvalues = [spec.eigenvalues[1], spec.eigenvalues[2], spec.eigenvalues[3]];
        let terms = std::array::from_fn(|k| {
            let c = spec.coefficient(k + 1, rho0.matrix());
            mat2::scale(&spec.right_modes[k + 1], c)
        });
        Self { eigenvalues, terms }
    }

    /// rho(t) - rho_SS is the pure decaying part.
    fn distance(&self, t: f64) -> f64 {
        let mut m = [[mat2::ZERO; 2]; 2];
        for (lam, term) in self.eigenvalues.iter().zip(&self.terms) {
            m = mat2::add(&m, &mat2::scale(term, (lam * t).exp()));
        }
        0.5 * mat2::trace_norm_herm(&mat2::hermitize(&m))
    }
}

fn critical_time_with(
    ev: &DistanceEvaluator,
    params: &SystemParams,
    threshold: f64,
) -> Result<f64> {
    let gamma = params.gamma_minus.max(params.gamma_y);
    if gamma <= 0.0 {
        return Err(Error::NoUniqueSteadyState);
    }
    if ev.distance(0.0) <= threshold {
        return Err(Error::AlreadyConverged);
    }
    let mut lo = 0.0;
    let mut hi = 0.01 / gamma;
    let mut iterations = 0;
    while ev.distance(hi) > threshold {
        lo = hi;
        hi *= 1.3;
        iterations += 1;
        if iterations > 4000 {
            return Err(Error::InvalidConfig("threshold never reached".into()));
        }
    }
    while gamma * (hi - lo) > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if ev.distance(mid) > threshold {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// v_eff = D(rho_th[T], rho_SS) / t_c[T].
pub fn effective_velocity(params: &SystemParams, temperature: f64, threshold: f64) -> Result<f64> {
    let rho0 = thermal_state(params, temperature)?;
    let ss = reference_steady_state(params)?;
    let d0 = trace_distance(&rho0, &ss);
    let tc = critical_time(params, &rho0, threshold)?;
    Ok(d0 / tc)
}

/// The interval (T_SS, T_c), present only when both temperatures exist and
/// T_c > T_SS (both trajectories inside it are cooling).
pub fn mpemba_zone(params: &SystemParams) -> Result<Option<(f64, f64)>> {
    let t_c = match critical_temperature(params)? {
        Some(t) => t,
        None => return Ok(None),
    };
    let t_ss = steady_state_temperature(params, DistanceMetric::TraceDistance)?;
    if t_c > t_ss {
        Ok(Some((t_ss, t_c)))
    } else {
        Ok(None)
    }
}

/// Sweep curves and scalars consumed by the report command.
#[derive(Debug, Clone, Serialize)]
pub struct MpembaReport {
    pub params: SystemParams,
    pub t_ss: f64,
    pub t_c: Option<f64>,
    pub zone: Option<(f64, f64)>,
    pub curves: ReportCurves,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportCurves {
    #[serde(rename = "T")]
    pub temperatures: Vec<f64>,
    pub c2: Vec<f64>,
    pub c3: Vec<f64>,
    pub c4: Vec<f64>,
    pub inv_tc: Vec<f64>,
    pub v_eff: Vec<f64>,
}

/// Assemble the full report over a temperature grid.
pub fn build_report(
    params: &SystemParams,
    temperatures: &[f64],
    threshold: f64,
) -> Result<MpembaReport> {
    if temperatures.is_empty() {
        return Err(Error::InvalidConfig("empty temperature grid".into()));
    }
    let spec = spectrum(params)?;
    let ss = spec.steady_state()?;
    let t_ss = steady_state_temperature(params, DistanceMetric::TraceDistance)?;
    let t_c = critical_temperature(params)?;
    let zone = match t_c {
        Some(tc) if tc > t_ss => Some((t_ss, tc)),
        _ => None,
    };
    let mut curves = ReportCurves {
        temperatures: temperatures.to_vec(),
        c2: Vec::with_capacity(temperatures.len()),
        c3: Vec::with_capacity(temperatures.len()),
        c4: Vec::with_capacity(temperatures.len()),
        inv_tc: Vec::with_capacity(temperatures.len()),
        v_eff: Vec::with_capacity(temperatures.len()),
    };
    for &t in temperatures {
        curves.c2.push(overlap_ck_with(&spec, params, t, 2)?);
        curves.c3.push(overlap_ck_with(&spec, params, t, 3)?);
        curves.c4.push(overlap_ck_with(&spec, params, t, 4)?);
        let rho0 = thermal_state(params, t)?;
        let ev = DistanceEvaluator::new(&spec, &rho0, &ss);
        match critical_time_with(&ev, params, threshold) {
            Ok(tc) => {
                curves.inv_tc.push(1.0 / tc);
                curves.v_eff.push(trace_distance(&rho0, &ss) / tc);
            }
            Err(Error::AlreadyConverged) => {
                curves.inv_tc.push(f64::INFINITY);
                curves.v_eff.push(0.0);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(MpembaReport { params: *params, t_ss, t_c, zone, curves })
}
