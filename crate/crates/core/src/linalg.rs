//! Dense complex linear algebra helpers on top of nalgebra.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Operator norm (largest singular value).
pub fn op_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// Smallest singular value.
pub fn smallest_sv(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Inverse guarded by a singular-value threshold. Returns the offending
/// singular value instead of a garbage inverse.
pub fn guarded_inverse(m: &CMatrix, sv_floor: f64) -> std::result::Result<CMatrix, f64> {
    let sv = smallest_sv(m);
    if sv <= sv_floor {
        return Err(sv);
    }
    m.clone().lu().try_inverse().ok_or(sv)
}

pub fn is_hermitian(m: &CMatrix, tol: f64) -> bool {
    let scale = 1.0f64.max(op_norm(m));
    (m - m.adjoint()).iter().all(|e| e.norm() <= tol * scale)
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Eigenvalues of a hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = m
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Full hermitian eigendecomposition: (eigenvalues, unitary of eigenvectors).
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let se = m.clone().symmetric_eigen();
    let ev: Vec<f64> = se.eigenvalues.iter().cloned().collect();
    (ev, se.eigenvectors)
}

pub fn require_hermitian(m: &CMatrix, tol: f64) -> Result<()> {
    if !is_hermitian(m, tol) {
        return Err(Error::Contract(format!(
            "matrix is not hermitian within {tol:.1e}"
        )));
    }
    Ok(())
}

/// Frobenius norm of the difference, relative to the Frobenius norm of `b`.
pub fn relative_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    let nb = b.norm();
    if nb == 0.0 {
        a.norm()
    } else {
        (a - b).norm() / nb
    }
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Haar-ish random unitary from the QR of a complex Gaussian matrix.
pub fn random_unitary(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
    });
    let qr = g.qr();
    qr.q()
}

/// Random hermitian positive-definite matrix with eigenvalues log-uniform
/// in [lo, hi].
pub fn random_hpd(n: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> CMatrix {
    let q = random_unitary(n, rng);
    let d: Vec<f64> = (0..n)
        .map(|_| (rng.gen::<f64>() * (hi.ln() - lo.ln()) + lo.ln()).exp())
        .collect();
    let mut m = CMatrix::zeros(n, n);
    for (k, dk) in d.iter().enumerate() {
        let col = q.column(k);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] += col[i] * col[j].conj() * Complex64::new(*dk, 0.0);
            }
        }
    }
    // symmetrize away roundoff
    hermitian_part(&m)
}

/// Random hermitian matrix with operator norm <= bound.
pub fn random_hermitian_bounded(n: usize, bound: f64, rng: &mut ChaCha8Rng) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
    });
    let h = hermitian_part(&g);
    let nrm = op_norm(&h);
    if nrm == 0.0 {
        h
    } else {
        h.scale(bound / nrm)
    }
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn op_norm_of_diagonal() {
        let m = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            c(3.0, 0.0),
            c(-5.0, 0.0),
        ]));
        assert!((op_norm(&m) - 5.0).abs() < 1e-12);
        assert!((smallest_sv(&m) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn guarded_inverse_refuses_singular() {
        let m = CMatrix::from_row_slice(2, 2, &[c(1., 0.), c(1., 0.), c(1., 0.), c(1., 0.)]);
        assert!(guarded_inverse(&m, 1e-12).is_err());
    }

    #[test]
    fn hermitian_eigen_reconstructs() {
        let mut rng = seeded_rng(11);
        let m = random_hpd(5, 1.0, 100.0, &mut rng);
        let (ev, u) = hermitian_eigen(&m);
        let d = CMatrix::from_fn(
            5,
            5,
            |i, j| {
                if i == j {
                    c(ev[i], 0.0)
                } else {
                    c(0.0, 0.0)
                }
            },
        );
        let back = &u * d * u.adjoint();
        assert!(relative_diff(&back, &m) < 1e-10);
        assert!(ev.iter().all(|&e| e > 0.0));
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = seeded_rng(3);
        let q = random_unitary(6, &mut rng);
        let id = q.adjoint() * &q;
        assert!(relative_diff(&id, &identity(6)) < 1e-12);
    }
}
