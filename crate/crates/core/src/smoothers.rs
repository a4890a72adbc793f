//! Pointwise and block relaxation, subspace correction, and symmetrisation.
//!
//! A smoother is the linear map R in the iteration x <- x + R(b - Ax). Its
//! adjoint R' is what a symmetric V-cycle applies after coarse correction.

use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::dense;
use crate::error::{AmgError, Result};
use crate::sparse::{dot, CsrMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Grid direction used for line blocks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LineDirection {
    X,
    Y,
}

impl FromStr for LineDirection {
    type Err = AmgError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" => Ok(LineDirection::X),
            "y" => Ok(LineDirection::Y),
            _ => Err(AmgError::Config(format!("direction must be x or y, got {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SmootherKind {
    Jacobi,
    GaussSeidel(Direction),
    /// Forward sweep followed by a backward sweep.
    SymmetricGaussSeidel,
    /// Gauss-Seidel over disjoint blocks with exact block solves.
    BlockGaussSeidel,
    /// Additive correction over (possibly overlapping) subspaces.
    Psc,
    /// Multiplicative correction over subspaces in list order.
    Ssc,
}

#[derive(Clone, Debug)]
struct LocalSolve {
    dofs: Vec<usize>,
    inverse: DMatrix<f64>,
}

/// Relaxation operator bound to a matrix. Immutable once built.
#[derive(Clone, Debug)]
pub struct Smoother {
    a: Arc<CsrMatrix>,
    kind: SmootherKind,
    omega: f64,
    inv_diag: Vec<f64>,
    blocks: Vec<LocalSolve>,
}

fn check_omega(omega: f64) -> Result<()> {
    if omega > 0.0 && omega.is_finite() {
        Ok(())
    } else {
        Err(AmgError::InvalidArgument(format!("omega must be positive, got {omega}")))
    }
}

fn inverse_diagonal(a: &CsrMatrix) -> Result<Vec<f64>> {
    a.diagonal()
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            if d == 0.0 {
                Err(AmgError::SingularBlock(i))
            } else {
                Ok(1.0 / d)
            }
        })
        .collect()
}

fn local_solves(a: &CsrMatrix, subspaces: &[Vec<usize>]) -> Result<Vec<LocalSolve>> {
    let n = a.n_rows();
    let mut covered = vec![false; n];
    let mut out = Vec::with_capacity(subspaces.len());
    for (s, dofs) in subspaces.iter().enumerate() {
        if dofs.is_empty() {
            return Err(AmgError::InvalidArgument(format!("subspace {s} is empty")));
        }
        for &d in dofs {
            if d >= n {
                return Err(AmgError::InvalidArgument(format!(
                    "subspace {s} references dof {d} outside 0..{n}"
                )));
            }
            covered[d] = true;
        }
        let block = a.submatrix(dofs, dofs).to_dense();
        let inverse = block
            .clone()
            .lu()
            .try_inverse()
            .filter(|m| m.iter().all(|v| v.is_finite()))
            .ok_or(AmgError::SingularBlock(s))?;
        out.push(LocalSolve {
            dofs: dofs.clone(),
            inverse,
        });
    }
    if let Some(d) = covered.iter().position(|&c| !c) {
        return Err(AmgError::InvalidArgument(format!("dof {d} not covered by any subspace")));
    }
    Ok(out)
}

impl Smoother {
    pub fn jacobi(a: Arc<CsrMatrix>, omega: f64) -> Result<Self> {
        check_omega(omega)?;
        Ok(Smoother {
            inv_diag: inverse_diagonal(&a)?,
            a,
            kind: SmootherKind::Jacobi,
            omega,
            blocks: Vec::new(),
        })
    }

    /// Jacobi with omega = 1 / rho_hat(D^{-1}A), rho_hat from 20 power steps.
    pub fn jacobi_default(a: Arc<CsrMatrix>) -> Result<Self> {
        let rho = spectral_radius_dinv_a(&a, 20)?;
        Self::jacobi(a, 1.0 / rho)
    }

    pub fn gauss_seidel(a: Arc<CsrMatrix>, direction: Direction, omega: f64) -> Result<Self> {
        check_omega(omega)?;
        Ok(Smoother {
            inv_diag: inverse_diagonal(&a)?,
            a,
            kind: SmootherKind::GaussSeidel(direction),
            omega,
            blocks: Vec::new(),
        })
    }

    pub fn symmetric_gauss_seidel(a: Arc<CsrMatrix>) -> Result<Self> {
        Ok(Smoother {
            inv_diag: inverse_diagonal(&a)?,
            a,
            kind: SmootherKind::SymmetricGaussSeidel,
            omega: 1.0,
            blocks: Vec::new(),
        })
    }

    /// Block Gauss-Seidel; `blocks` must partition the unknowns.
    pub fn block_gauss_seidel(a: Arc<CsrMatrix>, blocks: &[Vec<usize>]) -> Result<Self> {
        let total: usize = blocks.iter().map(Vec::len).sum();
        if total != a.n_rows() {
            return Err(AmgError::InvalidArgument("blocks do not partition the unknowns".into()));
        }
        Ok(Smoother {
            blocks: local_solves(&a, blocks)?,
            inv_diag: Vec::new(),
            a,
            kind: SmootherKind::BlockGaussSeidel,
            omega: 1.0,
        })
    }

    pub fn psc(a: Arc<CsrMatrix>, subspaces: &[Vec<usize>]) -> Result<Self> {
        Ok(Smoother {
            blocks: local_solves(&a, subspaces)?,
            inv_diag: Vec::new(),
            a,
            kind: SmootherKind::Psc,
            omega: 1.0,
        })
    }

    pub fn ssc(a: Arc<CsrMatrix>, subspaces: &[Vec<usize>]) -> Result<Self> {
        Ok(Smoother {
            blocks: local_solves(&a, subspaces)?,
            inv_diag: Vec::new(),
            a,
            kind: SmootherKind::Ssc,
            omega: 1.0,
        })
    }

    pub fn kind(&self) -> &SmootherKind {
        &self.kind
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn matrix(&self) -> &Arc<CsrMatrix> {
        &self.a
    }

    pub fn n(&self) -> usize {
        self.a.n_rows()
    }

    fn residual_at(&self, i: usize, b: &[f64], x: &[f64]) -> f64 {
        let mut r = b[i];
        for (j, v) in self.a.row_iter(i) {
            r -= v * x[j];
        }
        r
    }

    fn point_sweep(&self, b: &[f64], x: &mut [f64], forward: bool) {
        let n = x.len();
        for k in 0..n {
            let i = if forward { k } else { n - 1 - k };
            x[i] += self.omega * self.residual_at(i, b, x) * self.inv_diag[i];
        }
    }

    fn block_update(&self, blk: &LocalSolve, b: &[f64], x: &[f64]) -> DVector<f64> {
        let r = DVector::from_iterator(
            blk.dofs.len(),
            blk.dofs.iter().map(|&i| self.residual_at(i, b, x)),
        );
        &blk.inverse * r * self.omega
    }

    fn block_sweep(&self, b: &[f64], x: &mut [f64], forward: bool) {
        let m = self.blocks.len();
        for k in 0..m {
            let blk = &self.blocks[if forward { k } else { m - 1 - k }];
            let dx = self.block_update(blk, b, x);
            for (a, &i) in blk.dofs.iter().enumerate() {
                x[i] += dx[a];
            }
        }
    }

    /// One application of x <- x + R(b - Ax).
    pub fn sweep(&self, b: &[f64], x: &mut [f64]) {
        self.sweep_directed(b, x, false);
    }

    /// One application of x <- x + R'(b - Ax).
    pub fn sweep_adjoint(&self, b: &[f64], x: &mut [f64]) {
        self.sweep_directed(b, x, true);
    }

    fn sweep_directed(&self, b: &[f64], x: &mut [f64], adjoint: bool) {
        match &self.kind {
            SmootherKind::Jacobi => {
                let ax = self.a.mul_vec(x);
                for i in 0..x.len() {
                    x[i] += self.omega * self.inv_diag[i] * (b[i] - ax[i]);
                }
            }
            SmootherKind::GaussSeidel(dir) => {
                let forward = (*dir == Direction::Forward) != adjoint;
                self.point_sweep(b, x, forward);
            }
            SmootherKind::SymmetricGaussSeidel => {
                self.point_sweep(b, x, true);
                self.point_sweep(b, x, false);
            }
            SmootherKind::BlockGaussSeidel | SmootherKind::Ssc => {
                self.block_sweep(b, x, !adjoint);
            }
            SmootherKind::Psc => {
                let mut dx = vec![0.0; x.len()];
                for blk in &self.blocks {
                    let d = self.block_update(blk, b, x);
                    for (a, &i) in blk.dofs.iter().enumerate() {
                        dx[i] += d[a];
                    }
                }
                x.iter_mut().zip(dx).for_each(|(xi, d)| *xi += d);
            }
        }
    }

    /// Iterate `sweeps` times from `x`.
    pub fn smooth_apply(&self, b: &[f64], x: &[f64], sweeps: usize) -> Result<Vec<f64>> {
        if b.len() != self.n() || x.len() != self.n() {
            return Err(AmgError::Dimension(format!(
                "smoother of size {} given b of {} and x of {}",
                self.n(),
                b.len(),
                x.len()
            )));
        }
        let mut x = x.to_vec();
        for _ in 0..sweeps {
            self.sweep(b, &mut x);
        }
        Ok(x)
    }

    /// R r.
    pub fn apply(&self, r: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; r.len()];
        self.sweep(r, &mut x);
        x
    }

    /// R' r.
    pub fn apply_adjoint(&self, r: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; r.len()];
        self.sweep_adjoint(r, &mut x);
        x
    }

    /// Rbar r = (R' + R - R'AR) r as two half sweeps.
    pub fn apply_symmetrized(&self, r: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; r.len()];
        self.sweep(r, &mut x);
        self.sweep_adjoint(r, &mut x);
        x
    }

    pub fn symmetrize(&self) -> SymmetrizedSmoother {
        SymmetrizedSmoother {
            inner: self.clone(),
        }
    }

    fn materialize(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<DMatrix<f64>> {
        let n = self.n();
        dense::check_cap(n)?;
        let mut m = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            m.set_column(j, &DVector::from_vec(f(&e)));
            e[j] = 0.0;
        }
        Ok(m)
    }

    /// Dense R, column by column.
    pub fn dense_r(&self) -> Result<DMatrix<f64>> {
        self.materialize(|e| self.apply(e))
    }

    pub fn dense_r_adjoint(&self) -> Result<DMatrix<f64>> {
        self.materialize(|e| self.apply_adjoint(e))
    }

    pub fn dense_rbar(&self) -> Result<DMatrix<f64>> {
        self.materialize(|e| self.apply_symmetrized(e))
    }

    /// Admissible relaxation range for this smoother on its matrix.
    pub fn convergence_bound(&self) -> Result<ConvergenceBound> {
        let omega_limit = match self.kind {
            SmootherKind::Jacobi => 2.0 / spectral_radius_dinv_a(&self.a, 200)?,
            SmootherKind::Psc => {
                let unit = Smoother {
                    omega: 1.0,
                    ..self.clone()
                };
                2.0 / spectral_radius_of(self.n(), |v| unit.apply(&self.a.mul_vec(v)), 200)
            }
            _ => 2.0,
        };
        Ok(ConvergenceBound {
            converges: self.omega < omega_limit,
            omega_limit,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceBound {
    pub converges: bool,
    pub omega_limit: f64,
}

/// Rbar = R' + R - R'AR of an underlying smoother.
#[derive(Clone, Debug)]
pub struct SymmetrizedSmoother {
    inner: Smoother,
}

impl SymmetrizedSmoother {
    pub fn apply(&self, r: &[f64]) -> Vec<f64> {
        self.inner.apply_symmetrized(r)
    }

    pub fn underlying(&self) -> &Smoother {
        &self.inner
    }

    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        self.inner.dense_rbar()
    }
}

/// Power-iteration estimate of rho(op) for an operator similar to a
/// symmetric positive semidefinite one; tolerance 1e-10 on the estimate.
pub(crate) fn spectral_radius_of(n: usize, op: impl Fn(&[f64]) -> Vec<f64>, steps: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    // deterministic start with all frequencies present
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 13) as f64 / 13.0).collect();
    let mut est = 0.0;
    for _ in 0..steps {
        let w = op(&v);
        let nv = dot(&v, &v).sqrt();
        let nw = dot(&w, &w).sqrt();
        if nw == 0.0 {
            return 0.0;
        }
        let next = nw / nv;
        v = w.into_iter().map(|x| x / nw).collect();
        let done = (next - est).abs() <= 1e-10 * next;
        est = next;
        if done {
            break;
        }
    }
    est
}

/// Estimate of rho(D^{-1}A), iterating on the symmetric D^{-1/2} A D^{-1/2}.
pub fn spectral_radius_dinv_a(a: &CsrMatrix, steps: usize) -> Result<f64> {
    let d = a.diagonal();
    if let Some(i) = d.iter().position(|&x| x <= 0.0) {
        return Err(AmgError::NonPositiveDiagonal(i));
    }
    let s: Vec<f64> = d.iter().map(|x| 1.0 / x.sqrt()).collect();
    Ok(spectral_radius_of(
        a.n_rows(),
        |v| {
            let w: Vec<f64> = v.iter().zip(&s).map(|(x, y)| x * y).collect();
            a.mul_vec(&w).iter().zip(&s).map(|(x, y)| x * y).collect()
        },
        steps,
    ))
}

/// Blocks of grid lines on an n x n lexicographic grid.
pub fn block_partition_lines(n: usize, direction: LineDirection) -> Vec<Vec<usize>> {
    (0..n)
        .map(|line| match direction {
            LineDirection::X => (0..n).map(|i| line * n + i).collect(),
            LineDirection::Y => (0..n).map(|j| j * n + line).collect(),
        })
        .collect()
}

/// Constant c in (1/4)(Dv,v) <= (D^{-1}(D+U)v,(D+U)v) <= c(Dv,v): the square
/// of the largest number of couplings (self included) of any unknown.
pub fn jacobi_gs_equivalence_constant(a: &CsrMatrix) -> f64 {
    let m = (0..a.n_rows()).map(|i| a.row(i).0.len()).max().unwrap_or(0);
    (m * m) as f64
}

/// Smoother choice independent of a particular matrix, as read from config.
#[derive(Clone, Debug, PartialEq)]
pub enum SmootherSpec {
    /// `None` picks the default damping.
    Jacobi(Option<f64>),
    GaussSeidel(f64),
    SymmetricGaussSeidel,
    /// Line Gauss-Seidel on an n x n grid along the given direction.
    LineGaussSeidel(LineDirection),
}

impl Default for SmootherSpec {
    fn default() -> Self {
        SmootherSpec::GaussSeidel(1.0)
    }
}

impl SmootherSpec {
    pub fn build(&self, a: Arc<CsrMatrix>) -> Result<Smoother> {
        match self {
            SmootherSpec::Jacobi(None) => Smoother::jacobi_default(a),
            SmootherSpec::Jacobi(Some(w)) => Smoother::jacobi(a, *w),
            SmootherSpec::GaussSeidel(w) => Smoother::gauss_seidel(a, Direction::Forward, *w),
            SmootherSpec::SymmetricGaussSeidel => Smoother::symmetric_gauss_seidel(a),
            SmootherSpec::LineGaussSeidel(dir) => {
                let n = (a.n_rows() as f64).sqrt().round() as usize;
                if n * n != a.n_rows() {
                    // not a square grid (e.g. a coarse level): fall back to points
                    return Smoother::gauss_seidel(a, Direction::Forward, 1.0);
                }
                let blocks = block_partition_lines(n, *dir);
                Smoother::block_gauss_seidel(a, &blocks)
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SmootherSpec::Jacobi(_) => "jacobi",
            SmootherSpec::GaussSeidel(_) => "gs",
            SmootherSpec::SymmetricGaussSeidel => "sgs",
            SmootherSpec::LineGaussSeidel(_) => "line-gs",
        }
    }
}
