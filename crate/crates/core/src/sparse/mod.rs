//! Sparse matrices, graphs and Matrix Market I/O.

mod csr;
mod graph;
pub mod mmio;

pub use csr::{galerkin_product, CsrMatrix};
pub use graph::{adjacency_graph, m_matrix_relative, Graph};

use crate::dense::{self, DENSE_CAP};
use crate::error::{AmgError, Result};

/// Outcome of [`validate_sspd`]. Spectral fields are `None` above the dense cap.
#[derive(Clone, Debug)]
pub struct SspdReport {
    pub symmetric: bool,
    pub positive_diagonal: bool,
    pub lambda_min: Option<f64>,
    pub lambda_max: Option<f64>,
    pub kernel_dim: Option<usize>,
    /// Whether every supplied kernel vector is annihilated by A.
    pub kernel_hint_ok: Option<bool>,
}

impl SspdReport {
    /// Symmetric, positive diagonal, and (when checked) positive semidefinite.
    pub fn is_sspd(&self) -> bool {
        self.symmetric
            && self.positive_diagonal
            && self
                .lambda_min
                .zip(self.lambda_max)
                .map_or(true, |(lo, hi)| lo >= -1e-10 * hi.abs().max(1.0))
            && self.kernel_hint_ok.unwrap_or(true)
    }

    pub fn is_spd(&self) -> bool {
        self.is_sspd() && self.kernel_dim == Some(0)
    }
}

/// Check bit-exact symmetry, the diagonal, and (for n up to the dense cap)
/// the extreme eigenvalues and kernel dimension.
pub fn validate_sspd(a: &CsrMatrix, kernel_hint: Option<&[Vec<f64>]>) -> Result<SspdReport> {
    let symmetric = a.is_symmetric();
    let positive_diagonal = a.is_square() && a.diagonal().iter().all(|&d| d > 0.0);
    let kernel_hint_ok = match kernel_hint {
        Some(vs) => {
            let scale = a.norm_inf().max(f64::MIN_POSITIVE);
            let mut ok = true;
            for v in vs {
                let av = a.spmv(v)?;
                let vn = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                let an = av.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                ok &= an <= 1e-10 * scale * vn.max(1.0);
            }
            Some(ok)
        }
        None => None,
    };
    let mut report = SspdReport {
        symmetric,
        positive_diagonal,
        lambda_min: None,
        lambda_max: None,
        kernel_dim: None,
        kernel_hint_ok,
    };
    if symmetric && a.n_rows() <= DENSE_CAP {
        let eig = dense::sym_eigen(&a.to_dense());
        let lo = eig.values.first().copied().unwrap_or(0.0);
        let hi = eig.values.last().copied().unwrap_or(0.0);
        report.lambda_min = Some(lo);
        report.lambda_max = Some(hi);
        report.kernel_dim = Some(
            eig.values
                .iter()
                .filter(|l| l.abs() <= 1e-10 * hi.abs().max(f64::MIN_POSITIVE))
                .count(),
        );
    }
    Ok(report)
}

/// Euclidean inner product.
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// (Ax, x).
pub fn energy(a: &CsrMatrix, x: &[f64]) -> f64 {
    dot(&a.mul_vec(x), x)
}

/// Remove the components of `x` along an orthonormalised copy of `basis`.
pub fn project_out(x: &mut [f64], basis: &[Vec<f64>]) {
    let q = orthonormalize(basis);
    for v in &q {
        let c = dot(x, v);
        x.iter_mut().zip(v).for_each(|(xi, vi)| *xi -= c * vi);
    }
}

/// Gram-Schmidt (twice) on a list of vectors, dropping dependent ones.
pub fn orthonormalize(basis: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut q: Vec<Vec<f64>> = Vec::new();
    for v in basis {
        let mut w = v.clone();
        let n0 = norm2(&w);
        for _ in 0..2 {
            for u in &q {
                let c = dot(&w, u);
                w.iter_mut().zip(u).for_each(|(wi, ui)| *wi -= c * ui);
            }
        }
        let n = norm2(&w);
        if n > 1e-12 * n0.max(f64::MIN_POSITIVE) && n > 0.0 {
            w.iter_mut().for_each(|x| *x /= n);
            q.push(w);
        }
    }
    q
}


/// Unpreconditioned conjugate gradients for an SPD operator given by its
/// action. Stops at relative residual `tol`; errors after `max_iter` steps.
pub fn conjugate_gradient(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize)> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok((x, 0));
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    for it in 1..=max_iter {
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(AmgError::Breakdown(format!("CG: p'Ap = {pap:e} at step {it}")));
        }
        let alpha = rr / pap;
        x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
        r.iter_mut().zip(&ap).for_each(|(ri, qi)| *ri -= alpha * qi);
        let rr_new = dot(&r, &r);
        if rr_new.sqrt() <= tol * bnorm {
            return Ok((x, it));
        }
        let beta = rr_new / rr;
        rr = rr_new;
        p.iter_mut().zip(&r).for_each(|(pi, ri)| *pi = ri + beta * *pi);
    }
    Err(AmgError::Breakdown(format!("CG did not reach {tol:e} in {max_iter} steps")))
}
