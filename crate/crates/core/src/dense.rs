//! Small dense helpers layered over nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{AmgError, Result};

/// Largest problem size accepted by the dense analysis and validation paths.
pub const DENSE_CAP: usize = 2000;

pub(crate) fn check_cap(n: usize) -> Result<()> {
    if n > DENSE_CAP {
        Err(AmgError::TooLarge { n, cap: DENSE_CAP })
    } else {
        Ok(())
    }
}

/// Eigenpairs of a symmetric matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct SymEigen {
    pub values: Vec<f64>,
    /// Eigenvectors stored as columns, in the order of `values`.
    pub vectors: DMatrix<f64>,
}

pub fn sym_eigen(m: &DMatrix<f64>) -> SymEigen {
    let n = m.nrows();
    // symmetrise first so round-off asymmetry does not leak into the solver
    let s = (m + m.transpose()) * 0.5;
    let eig = s.clone().symmetric_eigen();
    // nalgebra 0.33 can hand back eigenvalues permuted against their
    // vectors on nearly diagonal input; the Rayleigh quotients of the
    // orthonormal vectors restore the pairing
    let sv = &s * &eig.eigenvectors;
    let rayleigh: Vec<f64> = (0..n).map(|k| eig.eigenvectors.column(k).dot(&sv.column(k))).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| rayleigh[a].total_cmp(&rayleigh[b]));
    let values = order.iter().map(|&k| rayleigh[k]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    SymEigen { values, vectors }
}

/// Generalised problem A x = mu B x with B symmetric positive definite.
/// Eigenvectors are B-orthonormal.
pub fn sym_eigen_generalized(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<SymEigen> {
    let chol = b
        .clone()
        .cholesky()
        .ok_or_else(|| AmgError::Breakdown("generalized eigenproblem: B not SPD".into()))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| AmgError::Breakdown("generalized eigenproblem: singular factor".into()))?;
    let c = &linv * a * linv.transpose();
    let eig = sym_eigen(&c);
    let vectors = linv.transpose() * eig.vectors;
    Ok(SymEigen {
        values: eig.values,
        vectors,
    })
}

/// Pseudo-inverse of a symmetric matrix, discarding eigenvalues below
/// `rel_tol * max|lambda|`.
pub fn pinv_sym(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let eig = sym_eigen(m);
    let top = eig.values.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let n = m.nrows();
    let mut out = DMatrix::zeros(n, n);
    for (k, &lam) in eig.values.iter().enumerate() {
        if lam.abs() > rel_tol * top {
            let v = eig.vectors.column(k);
            out += (v * v.transpose()) / lam;
        }
    }
    out
}

/// Basis of the numerical kernel of a symmetric positive semidefinite matrix.
pub fn kernel_basis(m: &DMatrix<f64>, rel_tol: f64) -> Vec<DVector<f64>> {
    let eig = sym_eigen(m);
    let top = eig.values.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    eig.values
        .iter()
        .enumerate()
        .filter(|(_, &l)| l.abs() <= rel_tol * top)
        .map(|(k, _)| eig.vectors.column(k).into_owned())
        .collect()
}
