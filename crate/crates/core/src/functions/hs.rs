//! Hilbert–Schmidt view of rank-one operators and projections on `R^d`.
//!
//! `Q_x y = ⟨y, x⟩ x`, so `‖Q_x‖_HS = ‖x‖²`, `⟨P, Q_x⟩_HS = ‖Px‖²` and the
//! reconstruction error is `ℓ(P, x) = ‖Px − x‖² = ‖Q_x‖_HS − ⟨P, Q_x⟩_HS`.

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// `Q_x = x xᵀ`.
pub fn q_operator(x: &[f64]) -> DMatrix<f64> {
    let v = DVector::from_column_slice(x);
    &v * v.transpose()
}

/// `⟨A, B⟩_HS = tr(Aᵀ B)`.
pub fn hs_inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.dot(b)
}

pub fn hs_norm(a: &DMatrix<f64>) -> f64 {
    a.norm()
}

/// `ℓ(P, x) = ‖Px − x‖²`.
pub fn reconstruction_error(p: &DMatrix<f64>, x: &[f64]) -> f64 {
    let v = DVector::from_column_slice(x);
    (p * &v - &v).norm_squared()
}

/// Orthogonal projection `B Bᵀ` onto the span of orthonormal columns `B`.
pub fn projection_from_frame(frame: &DMatrix<f64>) -> DMatrix<f64> {
    frame * frame.transpose()
}

/// Orthonormal `ambient × d` frame from the QR factorisation of a Gaussian matrix.
pub fn random_frame(ambient: usize, d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(ambient, d, |_, _| StandardNormal.sample(rng));
    g.qr().q().columns(0, d).into_owned()
}

/// Check that `p` is a symmetric idempotent of trace `d` and return an
/// orthonormal frame for its range.
pub fn frame_from_projection(p: &DMatrix<f64>, d: usize) -> Result<DMatrix<f64>> {
    const TOL: f64 = 1e-10;
    if !p.is_square() {
        return Err(Error::param("projection", "must be square"));
    }
    if (p - p.transpose()).amax() > TOL {
        return Err(Error::param("projection", "must be symmetric"));
    }
    if (p * p - p).amax() > TOL {
        return Err(Error::param("projection", "must be idempotent"));
    }
    if (p.trace() - d as f64).abs() > TOL * d.max(1) as f64 {
        return Err(Error::param("projection", format!("trace {} differs from subspace dimension {d}", p.trace())));
    }
    let eig = p.clone().symmetric_eigen();
    let mut idx: Vec<usize> = (0..p.nrows()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let cols: Vec<_> = idx[..d].iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect();
    Ok(DMatrix::from_columns(&cols))
}
