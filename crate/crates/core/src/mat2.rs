//! Closed-form algebra on 2x2 complex matrices.
//!
//! Everything in the qubit layer (thermal states, trace distance, relative
//! entropy, spectral decomposition) reduces to 2x2 Hermitian eigenproblems,
//! which are solved exactly here rather than through a general eigensolver.

use num_complex::Complex64;

pub type Mat2 = [[Complex64; 2]; 2];

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub fn identity() -> Mat2 {
    [[ONE, ZERO], [ZERO, ONE]]
}

pub fn sigma_x() -> Mat2 {
    [[ZERO, ONE], [ONE, ZERO]]
}

pub fn sigma_y() -> Mat2 {
    [[ZERO, Complex64::new(0.0, -1.0)], [Complex64::new(0.0, 1.0), ZERO]]
}

pub fn sigma_z() -> Mat2 {
    [[ONE, ZERO], [ZERO, Complex64::new(-1.0, 0.0)]]
}

/// Lowering operator |1><0| in the basis {|0> = spin-up, |1> = spin-down}.
pub fn sigma_minus() -> Mat2 {
    [[ZERO, ZERO], [ONE, ZERO]]
}

pub fn add(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = *a;
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] += b[i][j];
        }
    }
    out
}

pub fn sub(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = *a;
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] -= b[i][j];
        }
    }
    out
}

pub fn scale(a: &Mat2, s: Complex64) -> Mat2 {
    let mut out = *a;
    for row in out.iter_mut() {
        for x in row.iter_mut() {
            *x *= s;
        }
    }
    out
}

pub fn mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub fn adjoint(a: &Mat2) -> Mat2 {
    [[a[0][0].conj(), a[1][0].conj()], [a[0][1].conj(), a[1][1].conj()]]
}

pub fn trace(a: &Mat2) -> Complex64 {
    a[0][0] + a[1][1]
}

/// Tr[a b] (plain product trace, no conjugation).
pub fn trace_prod(a: &Mat2, b: &Mat2) -> Complex64 {
    a[0][0] * b[0][0] + a[0][1] * b[1][0] + a[1][0] * b[0][1] + a[1][1] * b[1][1]
}

/// Hilbert-Schmidt (Frobenius) norm.
pub fn hs_norm(a: &Mat2) -> f64 {
    a.iter()
        .flatten()
        .map(|x| x.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

pub fn commutator(a: &Mat2, b: &Mat2) -> Mat2 {
    sub(&mul(a, b), &mul(b, a))
}

/// Largest entrywise deviation from Hermiticity.
pub fn herm_deviation(a: &Mat2) -> f64 {
    let d01 = (a[0][1] - a[1][0].conj()).norm();
    let d_im = a[0][0].im.abs().max(a[1][1].im.abs());
    d01.max(d_im)
}

/// Symmetrize: (a + a^dag) / 2.
pub fn hermitize(a: &Mat2) -> Mat2 {
    scale(&add(a, &adjoint(a)), Complex64::new(0.5, 0.0))
}

/// Eigenvalues of a Hermitian 2x2 matrix, ascending.
pub fn herm_eigenvalues(a: &Mat2) -> [f64; 2] {
    let m = 0.5 * (a[0][0].re + a[1][1].re);
    let half_gap = 0.5 * (a[0][0].re - a[1][1].re);
    let disc = half_gap.hypot(a[0][1].norm());
    [m - disc, m + disc]
}

/// Eigen-decomposition of a Hermitian 2x2 matrix.
///
/// Returns (eigenvalues ascending, orthonormal eigenvectors as columns).
pub fn herm_eigen(a: &Mat2) -> ([f64; 2], [[Complex64; 2]; 2]) {
    let vals = herm_eigenvalues(a);
    let b = a[0][1];
    if b.norm() < 1e-15 * (1.0 + a[0][0].norm() + a[1][1].norm()) {
        // already diagonal
        if a[0][0].re <= a[1][1].re {
            return (vals, [[ONE, ZERO], [ZERO, ONE]]);
        }
        return (vals, [[ZERO, ONE], [ONE, ZERO]]);
    }
    let mut vecs = [[ZERO; 2]; 2];
    for (k, &lam) in vals.iter().enumerate() {
        // (a00 - lam) v0 + b v1 = 0; pick the better-conditioned row
        let r0 = a[0][0].re - lam;
        let r1 = a[1][1].re - lam;
        let (v0, v1) = if r0.abs() >= r1.abs() {
            (b, Complex64::new(-r0, 0.0))
        } else {
            (Complex64::new(-r1, 0.0), b.conj())
        };
        let n = (v0.norm_sqr() + v1.norm_sqr()).sqrt();
        vecs[k] = [v0 / n, v1 / n];
    }
    // columns: vecs[k] stored as rows here; transpose into column convention
    (vals, [[vecs[0][0], vecs[1][0]], [vecs[0][1], vecs[1][1]]])
}

/// Trace norm ||a||_1 of a Hermitian 2x2 matrix.
pub fn trace_norm_herm(a: &Mat2) -> f64 {
    let [lo, hi] = herm_eigenvalues(a);
    lo.abs() + hi.abs()
}

/// Row-major vectorization (a00, a01, a10, a11).
pub fn to_vec4(a: &Mat2) -> [Complex64; 4] {
    [a[0][0], a[0][1], a[1][0], a[1][1]]
}

pub fn from_vec4(v: &[Complex64; 4]) -> Mat2 {
    [[v[0], v[1]], [v[2], v[3]]]
}
