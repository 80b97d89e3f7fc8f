//! Small dense linear-algebra helpers on complex matrices.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};

pub type Mat = DMatrix<Complex64>;
pub type Vector = DVector<Complex64>;

pub(crate) const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Largest dimension for which operator norms use a dense SVD.
pub const DENSE_NORM_LIMIT: usize = 4096;

pub fn zeros(rows: usize, cols: usize) -> Mat {
    Mat::zeros(rows, cols)
}

pub fn frobenius(m: &Mat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(m: &Mat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn check_finite(m: &Mat) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric("matrix has non-finite entries".into()))
    }
}

/// Largest singular value by dense SVD.
pub fn spectral_norm(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    match SVD::try_new(m.clone(), false, false, f64::EPSILON, 10_000) {
        Some(svd) => svd.singular_values.max(),
        // Falls back to the Gram route, which loses only relative accuracy
        // at the bottom of the spectrum.
        None => hermitian_top(&(m.adjoint() * m)).0.max(0.0).sqrt(),
    }
}

/// Top eigenpair of a Hermitian matrix.
pub fn hermitian_top(h: &Mat) -> (f64, Vector) {
    let n = h.nrows();
    if n == 0 {
        return (0.0, Vector::zeros(0));
    }
    // Symmetrize to guard against round-off in the caller's accumulation.
    let sym = (h + h.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(sym);
    let (k, val) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (k, &v)| if v > acc.1 { (k, v) } else { acc });
    (val, eig.eigenvectors.column(k).into_owned())
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn hermitian_min(h: &Mat) -> f64 {
    if h.is_empty() {
        return 0.0;
    }
    let sym = (h + h.adjoint()) * Complex64::new(0.5, 0.0);
    SymmetricEigen::new(sym).eigenvalues.min()
}

/// Top left/right singular pair `(σ, u, v)` with `m v = σ u`.
pub fn top_singular_pair(m: &Mat) -> (f64, Vector, Vector) {
    let svd = SVD::new(m.clone(), true, true);
    let k = svd.singular_values.imax();
    let u = svd.u.as_ref().unwrap().column(k).into_owned();
    let v = svd.v_t.as_ref().unwrap().row(k).adjoint();
    (svd.singular_values[k], u, v)
}

/// Two-sided estimate of an operator norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormBracket {
    /// `‖M x‖` for the final unit iterate: always a valid lower bound.
    pub lower: f64,
    /// `min(‖M‖_F, sqrt(‖M‖_1 ‖M‖_∞))`: always a valid upper bound.
    pub upper: f64,
    pub estimate: f64,
    pub iterations: usize,
}

/// Power iteration on `M* M` from a seeded Gaussian start.
pub fn power_norm(m: &Mat, tol: f64, seed: u64, max_iter: usize) -> Result<NormBracket> {
    check_finite(m)?;
    let upper = {
        let col = (0..m.ncols())
            .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max);
        let row = (0..m.nrows())
            .map(|i| m.row(i).iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max);
        frobenius(m).min((col * row).sqrt())
    };
    if m.is_empty() || upper == 0.0 {
        return Ok(NormBracket {
            lower: 0.0,
            upper: 0.0,
            estimate: 0.0,
            iterations: 0,
        });
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut x = Vector::from_fn(m.ncols(), |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    x /= Complex64::new(x.norm(), 0.0);
    let mut estimate = 0.0;
    let mut iterations = 0;
    for it in 1..=max_iter {
        iterations = it;
        let y = m * &x;
        let sigma = y.norm();
        let z = m.adjoint() * y;
        let zn = z.norm();
        if zn == 0.0 {
            break;
        }
        x = z / Complex64::new(zn, 0.0);
        let done = (sigma - estimate).abs() <= tol * sigma;
        estimate = sigma;
        if done {
            break;
        }
    }
    let lower = (m * &x).norm();
    Ok(NormBracket {
        lower,
        upper,
        estimate: lower.max(estimate).min(upper),
        iterations,
    })
}

/// Operator norm (largest singular value): dense SVD up to
/// [`DENSE_NORM_LIMIT`], power iteration above it.
pub fn operator_norm(m: &Mat) -> Result<f64> {
    check_finite(m)?;
    if m.nrows().max(m.ncols()) <= DENSE_NORM_LIMIT {
        Ok(spectral_norm(m))
    } else {
        Ok(power_norm(m, 1e-8, 0x5eed, 10_000)?.estimate)
    }
}

pub(crate) fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}
