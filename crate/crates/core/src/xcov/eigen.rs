//! Hermitian eigen-decomposition and the subspace utilities built on it.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative asymmetry tolerated before a matrix is rejected as non-Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-8;

/// Eigenvalues with `|λ| ≤ RANK_TOL · ‖R‖_F` count as zero.
pub const RANK_TOL: f64 = 1e-12;

/// Eigenpairs sorted by descending algebraic eigenvalue; column `k` of
/// `vectors` belongs to `values[k]`.
#[derive(Debug, Clone)]
pub struct HermEig {
    pub values: Vec<f64>,
    pub vectors: DMatrix<Complex64>,
}

impl HermEig {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Column indices of the `count` dominant eigenpairs under `order`.
    pub fn dominant_indices(&self, count: usize, order: DominanceOrder) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.dim()).collect();
        if order == DominanceOrder::Magnitude {
            idx.sort_by(|&a, &b| self.values[b].abs().total_cmp(&self.values[a].abs()));
        }
        idx.truncate(count);
        idx
    }

    /// Count of eigenvalues that are non-zero under the rank tolerance.
    pub fn rank(&self, frobenius: f64) -> usize {
        self.values
            .iter()
            .filter(|v| v.abs() > RANK_TOL * frobenius)
            .count()
    }
}

/// Which eigenvalues count as "dominant" when selecting a signal subspace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DominanceOrder {
    /// Largest algebraic eigenvalues first.
    #[default]
    Algebraic,
    /// Largest `|λ|` first.
    Magnitude,
}

pub fn hermitian_asymmetry(h: &DMatrix<Complex64>) -> f64 {
    let scale = h.norm().max(f64::MIN_POSITIVE);
    (h - h.adjoint()).norm() / scale
}

pub fn herm_eig(h: &DMatrix<Complex64>) -> Result<HermEig> {
    if !h.is_square() {
        return Err(Error::Dimension(format!(
            "eigen-decomposition needs a square matrix, got {}×{}",
            h.nrows(),
            h.ncols()
        )));
    }
    let asymmetry = hermitian_asymmetry(h);
    if asymmetry > HERMITIAN_TOL {
        return Err(Error::NotHermitian { asymmetry });
    }
    let sym = (h + h.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(sym);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(HermEig { values, vectors })
}

/// Orthonormal signal and noise bases with the full (descending) eigenvalue list.
#[derive(Debug, Clone)]
pub struct SubspacePair {
    pub signal: DMatrix<Complex64>,
    pub noise: DMatrix<Complex64>,
    pub eigenvalues: Vec<f64>,
}

/// Split `r` into the span of its `q` largest eigenvectors and the remainder.
pub fn signal_noise_split(r: &DMatrix<Complex64>, q: usize) -> Result<SubspacePair> {
    let n = r.nrows();
    if q > n {
        return Err(Error::validation(
            "signal dimension",
            format!("{q} exceeds matrix dimension {n}"),
        ));
    }
    let eig = herm_eig(r)?;
    Ok(SubspacePair {
        signal: eig.vectors.columns(0, q).into_owned(),
        noise: eig.vectors.columns(q, n - q).into_owned(),
        eigenvalues: eig.values,
    })
}

/// `Σ e_i e_iᴴ` over the `count` dominant eigenvectors of `h`.
pub fn dominant_projector(
    h: &DMatrix<Complex64>,
    count: usize,
    order: DominanceOrder,
) -> Result<DMatrix<Complex64>> {
    let n = h.nrows();
    if count >= n {
        return Err(Error::validation(
            "projector order",
            format!("{count} must be below the matrix dimension {n}"),
        ));
    }
    let eig = herm_eig(h)?;
    Ok(projector_from(&eig, &eig.dominant_indices(count, order)))
}

pub fn projector_from(eig: &HermEig, columns: &[usize]) -> DMatrix<Complex64> {
    let n = eig.dim();
    let mut basis = DMatrix::zeros(n, columns.len());
    for (dst, &src) in columns.iter().enumerate() {
        basis.set_column(dst, &eig.vectors.column(src));
    }
    &basis * basis.adjoint()
}
