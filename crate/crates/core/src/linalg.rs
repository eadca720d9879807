//! Dense Hermitian eigendecomposition (cyclic Jacobi with complex rotations).
//!
//! Sizes here stay modest (Gram matrices of finite-rank states, a few
//! hundred), so an O(R^3)-per-sweep Jacobi with deterministic sweep order is
//! plenty and keeps results bit-reproducible across runs.

use crate::error::{LabError, Result};
use crate::C64;

/// Column-major dense Hermitian matrix view used by the solver.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Eigenvalues, descending.
    pub values: Vec<f64>,
    /// Eigenvectors as columns, `vectors[k]` matching `values[k]`.
    pub vectors: Vec<Vec<C64>>,
}

/// Eigendecomposition of a Hermitian matrix given as a flat row-major slice.
///
/// The input must satisfy `a[i*n+j] = conj(a[j*n+i])` (checked against a
/// tolerance scaled by the matrix norm).
pub fn hermitian_eigen(a: &[C64], n: usize) -> Result<HermitianEigen> {
    if a.len() != n * n {
        return Err(LabError::Parameter(format!(
            "matrix length {} != {n}^2",
            a.len()
        )));
    }
    let scale: f64 = a.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
    for i in 0..n {
        for j in 0..i {
            if (a[i * n + j] - a[j * n + i].conj()).norm() > 1e-10 * scale {
                return Err(LabError::Parameter("matrix is not Hermitian".into()));
            }
        }
    }

    let mut m: Vec<C64> = a.to_vec();
    // v starts as identity; columns become eigenvectors
    let mut v = vec![C64::new(0.0, 0.0); n * n];
    for i in 0..n {
        v[i * n + i] = C64::new(1.0, 0.0);
    }

    let off = |m: &[C64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m[i * n + j].norm_sqr();
                }
            }
        }
        s.sqrt()
    };

    let tol = 1e-14 * scale * n as f64;
    for _sweep in 0..60 {
        if off(&m) <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq.norm() <= tol / (n as f64) {
                    continue;
                }
                let app = m[p * n + p].re;
                let aqq = m[q * n + q].re;
                // Unitary 2x2 rotation annihilating (p,q):
                //   [c, -conj(s); s, c] with s = e^{i phi} sin(theta)
                let phi = apq.arg();
                let abs_apq = apq.norm();
                let theta = 0.5 * (2.0 * abs_apq).atan2(aqq - app);
                let c = theta.cos();
                let s_mag = theta.sin();
                let s = C64::from_polar(s_mag, phi);
                // rows/cols p,q update: A <- J^H A J, V <- V J where
                // J[p][p]=c, J[p][q]=s... build explicitly on the two lines.
                for k in 0..n {
                    let akp = m[k * n + p];
                    let akq = m[k * n + q];
                    m[k * n + p] = akp * c - akq * s.conj();
                    m[k * n + q] = akp * s + akq * c;
                }
                for k in 0..n {
                    let apk = m[p * n + k];
                    let aqk = m[q * n + k];
                    m[p * n + k] = apk * c - aqk * s;
                    m[q * n + k] = apk * s.conj() + aqk * c;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = vkp * c - vkq * s.conj();
                    v[k * n + q] = vkp * s + vkq * c;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| m[i * n + i].re).collect();
    order.sort_by(|&i, &j| diag[j].partial_cmp(&diag[i]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let vectors: Vec<Vec<C64>> = order
        .iter()
        .map(|&col| (0..n).map(|row| v[row * n + col]).collect())
        .collect();
    Ok(HermitianEigen { values, vectors })
}

/// Largest eigenvalue of a Hermitian matrix (convenience).
pub fn spectral_norm_hermitian(a: &[C64], n: usize) -> Result<f64> {
    Ok(hermitian_eigen(a, n)?
        .values
        .first()
        .copied()
        .unwrap_or(0.0))
}
