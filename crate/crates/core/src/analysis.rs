//! Dense two-level analysis: exact error norms, K(V_c), optimal coarse
//! spaces, trace minimisation, smoothness classification and Weyl ratios.
//!
//! Everything here works with dense matrices of size at most DENSE_CAP.
//! Semidefinite A is handled by working on the range of A, where the
//! A-seminorm is a norm.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dense::{check_cap, pinv_sym, sym_eigen, sym_eigen_generalized};
use crate::error::{AmgError, Result};
use crate::smoothers::Smoother;
use crate::sparse::CsrMatrix;

/// Relative size below which an eigenvalue of A counts as kernel.
const KERNEL_TOL: f64 = 1e-10;

/// Change of variables y = Lambda^{1/2} U' v on the range of A, so that
/// ||v||_A = ||y||_2.
#[derive(Clone, Debug)]
pub struct EnergyFrame {
    /// U Lambda^{-1/2}: maps y back to v.
    to_v: DMatrix<f64>,
    /// Lambda^{1/2} U': maps v to y.
    to_y: DMatrix<f64>,
    /// Orthonormal basis of ker A.
    pub kernel: DMatrix<f64>,
}

impl EnergyFrame {
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        check_cap(a.nrows())?;
        let eig = sym_eigen(a);
        let top = eig.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if let Some(&neg) = eig.values.iter().find(|&&v| v < -KERNEL_TOL * top) {
            return Err(AmgError::Breakdown(format!("matrix has a negative eigenvalue {neg:e}")));
        }
        let keep: Vec<usize> = (0..eig.values.len()).filter(|&k| eig.values[k] > KERNEL_TOL * top).collect();
        let drop: Vec<usize> = (0..eig.values.len()).filter(|&k| eig.values[k] <= KERNEL_TOL * top).collect();
        let n = a.nrows();
        let to_v = DMatrix::from_fn(n, keep.len(), |i, c| eig.vectors[(i, keep[c])] / eig.values[keep[c]].sqrt());
        let to_y = DMatrix::from_fn(keep.len(), n, |c, i| eig.vectors[(i, keep[c])] * eig.values[keep[c]].sqrt());
        let kernel = DMatrix::from_fn(n, drop.len(), |i, c| eig.vectors[(i, drop[c])]);
        Ok(EnergyFrame { to_v, to_y, kernel })
    }

    pub fn rank(&self) -> usize {
        self.to_v.ncols()
    }

    /// Matrix of an operator on V in the energy frame.
    pub fn operator(&self, e: &DMatrix<f64>) -> DMatrix<f64> {
        &self.to_y * e * &self.to_v
    }

    /// Quadratic form M restricted to the range of A and scaled by A^{-1/2}
    /// on both sides: its eigenvalues are those of the pencil (M, A).
    pub fn form(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        self.to_v.transpose() * m * &self.to_v
    }
}

/// Vectors iterated together in `error_norm`.
const POWER_BLOCK: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerOptions {
    pub max_steps: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for PowerOptions {
    fn default() -> Self {
        PowerOptions {
            max_steps: 2000,
            tol: 1e-12,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorNorm {
    /// ||E||_A.
    pub norm: f64,
    pub steps: usize,
    /// False when the estimate exceeds 1 + 1e-8.
    pub contractive: bool,
}

impl ErrorNorm {
    pub fn squared(&self) -> f64 {
        self.norm * self.norm
    }
}

/// ||E||_A by power iteration on E*E, carried out as F'F with F the
/// energy-frame matrix of E. The estimate is the Rayleigh quotient.
pub fn error_norm(a: &DMatrix<f64>, e: &DMatrix<f64>, opts: &PowerOptions) -> Result<ErrorNorm> {
    let frame = EnergyFrame::new(a)?;
    error_norm_in(&frame, e, opts)
}

pub fn error_norm_in(frame: &EnergyFrame, e: &DMatrix<f64>, opts: &PowerOptions) -> Result<ErrorNorm> {
    let f = frame.operator(e);
    let m = f.ncols();
    if m == 0 {
        return Ok(ErrorNorm {
            norm: 0.0,
            steps: 0,
            contractive: true,
        });
    }
    let ftf = f.transpose() * &f;
    // block power iteration with Rayleigh-Ritz: a single vector stalls when
    // the top singular values of E cluster (nearly decoupled anisotropic lines)
    let block = m.min(POWER_BLOCK);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut v = DMatrix::from_fn(m, block, |_, _| rng.gen_range(-1.0..1.0)).qr().q();
    let mut est = 0.0;
    let mut steps = 0;
    for k in 1..=opts.max_steps {
        steps = k;
        let w = &ftf * &v;
        let ritz = v.transpose() * &w;
        let next = sym_eigen(&ritz).values.last().copied().unwrap_or(0.0);
        if w.norm() == 0.0 {
            est = 0.0;
            break;
        }
        v = w.qr().q();
        let done = (next - est).abs() <= opts.tol * next.abs();
        est = next;
        if done {
            break;
        }
    }
    let norm = est.max(0.0).sqrt();
    Ok(ErrorNorm {
        norm,
        steps,
        contractive: norm <= 1.0 + 1e-8,
    })
}

/// ||E||_A from the largest singular value of the energy-frame matrix.
pub fn error_norm_exact(a: &DMatrix<f64>, e: &DMatrix<f64>) -> Result<f64> {
    let frame = EnergyFrame::new(a)?;
    let f = frame.operator(e);
    if f.ncols() == 0 {
        return Ok(0.0);
    }
    Ok(f.singular_values().max())
}

/// Materialise a linear action column by column.
pub fn dense_operator(n: usize, action: impl Fn(&[f64]) -> Vec<f64>) -> Result<DMatrix<f64>> {
    check_cap(n)?;
    let mut m = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = action(&e);
        if col.len() != n {
            return Err(AmgError::Dimension(format!("action returned {} entries for n = {n}", col.len())));
        }
        m.set_column(j, &DVector::from_vec(col));
        e[j] = 0.0;
    }
    Ok(m)
}

/// Symmetrised smoother of the post-smoothing step I - R'A:
/// (I - R'A)*(I - R'A) = I - Rbar A with Rbar = R + R' - R A R'.
pub fn post_smoother_rbar(a: &DMatrix<f64>, r: &DMatrix<f64>) -> DMatrix<f64> {
    let rt = r.transpose();
    r + &rt - r * a * &rt
}

/// Dense R and the matching Rbar for a smoother used as post-smoother
/// through its adjoint sweep.
pub fn smoother_pair(s: &Smoother) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let r = s.dense_r()?;
    let a = s.matrix().to_dense();
    let rbar = post_smoother_rbar(&a, &r);
    Ok((r, rbar))
}

/// Coarse-grid A-orthogonal projection P (P'AP)^+ P'A.
pub fn coarse_projection(a: &DMatrix<f64>, p: &DMatrix<f64>) -> DMatrix<f64> {
    let ac = p.transpose() * a * p;
    p * pinv_sym(&ac, 1e-13) * p.transpose() * a
}

/// Error propagator of the exact two-level method with post-smoothing by
/// R': E = (I - R'A)(I - P A_c^+ P'A).
pub fn two_level_error(a: &DMatrix<f64>, r: &DMatrix<f64>, p: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    (&id - r.transpose() * a) * (&id - coarse_projection(a, p))
}

fn spd_inverse(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let sym = (m + m.transpose()) * 0.5;
    sym.cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| AmgError::Breakdown(format!("{what} is not symmetric positive definite")))
}

/// K(V_c) = max_v ||(I - Q_c) v||^2_{Rbar^{-1}} / ||v||_A^2 with Q_c the
/// Rbar^{-1}-orthogonal projection onto range(P).
pub fn k_of_vc(a: &DMatrix<f64>, rbar: &DMatrix<f64>, p: &DMatrix<f64>) -> Result<f64> {
    let frame = EnergyFrame::new(a)?;
    k_of_vc_in(&frame, a, rbar, p)
}

pub fn k_of_vc_in(frame: &EnergyFrame, a: &DMatrix<f64>, rbar: &DMatrix<f64>, p: &DMatrix<f64>) -> Result<f64> {
    let n = a.nrows();
    let rinv = spd_inverse(rbar, "Rbar")?;
    let g = p.transpose() * &rinv * p;
    let qc = p * pinv_sym(&g, 1e-13) * p.transpose() * &rinv;
    let id = DMatrix::<f64>::identity(n, n);
    let comp = &id - &qc;
    for k in 0..frame.kernel.ncols() {
        let z = frame.kernel.column(k);
        let miss = (&comp * z).norm();
        if miss > 1e-8 {
            return Err(AmgError::InvalidArgument(format!(
                "kernel vector {k} is not in range(P) (residual {miss:e})"
            )));
        }
    }
    let m = comp.transpose() * &rinv * &comp;
    let form = frame.form(&m);
    // K >= 1 for every proper subspace; V_c = V (where the maximum is 0)
    // is reported as 1, matching its zero two-level rate
    Ok(sym_eigen(&form).values.last().copied().unwrap_or(1.0).max(1.0))
}

/// Lowest generalised eigenvectors of Rbar A (A zeta = mu Rbar^{-1} zeta),
/// Rbar^{-1}-orthonormal. Returns the n_c leading vectors and all mu.
pub fn optimal_coarse_space(a: &DMatrix<f64>, rbar: &DMatrix<f64>, n_c: usize) -> Result<(DMatrix<f64>, Vec<f64>)> {
    check_cap(a.nrows())?;
    if n_c > a.nrows() {
        return Err(AmgError::InvalidArgument(format!("n_c = {n_c} exceeds n = {}", a.nrows())));
    }
    let rinv = spd_inverse(rbar, "Rbar")?;
    let eig = sym_eigen_generalized(a, &rinv)?;
    Ok((eig.vectors.columns(0, n_c).into_owned(), eig.values))
}

/// Rbar^{-1}-orthonormalise the columns of Q.
pub fn orthonormalize_in(q: &DMatrix<f64>, rbar_inv: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let g = q.transpose() * rbar_inv * q;
    let eig = sym_eigen(&g);
    if eig.values.first().map_or(false, |&l| l <= 1e-14 * eig.values.last().unwrap().abs()) {
        return Err(AmgError::Breakdown("candidate columns are dependent".into()));
    }
    let inv_sqrt = &eig.vectors
        * DMatrix::from_diagonal(&DVector::from_iterator(
            eig.values.len(),
            eig.values.iter().map(|l| 1.0 / l.sqrt()),
        ))
        * eig.vectors.transpose();
    Ok(q * inv_sqrt)
}

#[derive(Clone, Debug)]
pub struct TraceReport {
    /// Sum of the n_c smallest mu.
    pub bound: f64,
    pub traces: Vec<f64>,
    /// Every candidate trace is at least bound - tol.
    pub holds: bool,
}

/// Ky Fan check: after Rbar^{-1}-orthonormalisation, trace(Q'AQ) >= the sum
/// of the n_c smallest mu for every candidate Q.
pub fn trace_check(
    a: &DMatrix<f64>,
    rbar: &DMatrix<f64>,
    candidates: &[DMatrix<f64>],
    n_c: usize,
    tol: f64,
) -> Result<TraceReport> {
    let (_, mu) = optimal_coarse_space(a, rbar, n_c)?;
    let bound: f64 = mu.iter().take(n_c).sum();
    let rinv = spd_inverse(rbar, "Rbar")?;
    let mut traces = Vec::with_capacity(candidates.len());
    for q in candidates {
        if q.ncols() != n_c {
            return Err(AmgError::Dimension(format!("candidate with {} columns, expected {n_c}", q.ncols())));
        }
        let q = orthonormalize_in(q, &rinv)?;
        traces.push((q.transpose() * a * q).trace());
    }
    let holds = traces.iter().all(|&t| t >= bound - tol);
    Ok(TraceReport { bound, traces, holds })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frequency {
    /// ||v||_A^2 / ||v||_{Rbar^{-1}}^2.
    pub ratio: f64,
    pub low: bool,
    pub high: bool,
}

/// Algebraic smoothness of v: low if ||v||_A^2 <= eps ||v||_{Rbar^{-1}}^2,
/// high if ||v||_A^2 >= delta ||v||_{Rbar^{-1}}^2.
pub fn classify_frequencies(a: &DMatrix<f64>, rbar: &DMatrix<f64>, v: &[f64], eps: f64, delta: f64) -> Result<Frequency> {
    let v = DVector::from_column_slice(v);
    if v.norm() == 0.0 {
        return Err(AmgError::InvalidArgument("zero vector".into()));
    }
    let rinv = spd_inverse(rbar, "Rbar")?;
    let ea = v.dot(&(a * &v));
    let er = v.dot(&(rinv * &v));
    let ratio = ea / er;
    Ok(Frequency {
        ratio,
        low: ea <= eps * er,
        high: ea >= delta * er,
    })
}

/// (Av, v) / (Dv, v) with D the diagonal of A.
pub fn diagonal_energy_ratio(a: &CsrMatrix, v: &[f64]) -> f64 {
    let av = a.mul_vec(v);
    let num: f64 = av.iter().zip(v).map(|(x, y)| x * y).sum();
    let den: f64 = a.diagonal().iter().zip(v).map(|(d, x)| d * x * x).sum();
    num / den
}

/// min and max over k of lambda_k / (k/N)^{2/d}.
pub fn weyl_ratio(a: &DMatrix<f64>, d: f64) -> Result<(f64, f64)> {
    check_cap(a.nrows())?;
    let n = a.nrows() as f64;
    let values = sym_eigen(a).values;
    let scaled: Vec<f64> = values
        .iter()
        .enumerate()
        .map(|(k, l)| l / ((k as f64 + 1.0) / n).powf(2.0 / d))
        .collect();
    let lo = scaled.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, hi))
}

/// Condition number of B A for the additive two-level preconditioner
/// B = P A_c^+ P' + S, measured on the range of A.
pub fn additive_condition_number(a: &DMatrix<f64>, p: &DMatrix<f64>, s: &DMatrix<f64>) -> Result<f64> {
    let frame = EnergyFrame::new(a)?;
    let ac = p.transpose() * a * p;
    let b = p * pinv_sym(&ac, 1e-13) * p.transpose() + s;
    // eigenvalues of BA on range(A) are those of Lambda^{1/2} U' B U Lambda^{1/2}
    let m = &frame.to_y * b * frame.to_y.transpose();
    let values = sym_eigen(&m).values;
    let lo = values.first().copied().unwrap_or(1.0);
    let hi = values.last().copied().unwrap_or(1.0);
    if lo <= 0.0 {
        return Err(AmgError::Breakdown("additive preconditioner is singular on range(A)".into()));
    }
    Ok(hi / lo)
}

#[derive(Clone, Debug)]
pub struct TwoLevelReport {
    pub n: usize,
    pub n_c: usize,
    /// ||E||_A^2 from power iteration.
    pub error_norm_sq: f64,
    pub k: f64,
    /// 1 - 1/K.
    pub rate_from_k: f64,
    /// mu spectrum of Rbar A, ascending.
    pub mu: Vec<f64>,
    /// 1 - mu_{n_c + 1}: the best rate any n_c-dimensional space can give.
    pub optimal_rate: f64,
}

/// Everything the theory says about one exact two-level method with the
/// given smoother (used as post-smoother through its adjoint) and P.
pub fn two_level_report(a: &CsrMatrix, smoother: &Smoother, p: &CsrMatrix, opts: &PowerOptions) -> Result<TwoLevelReport> {
    let ad = a.to_dense();
    let pd = p.to_dense();
    let (r, rbar) = smoother_pair(smoother)?;
    let frame = EnergyFrame::new(&ad)?;
    let e = two_level_error(&ad, &r, &pd);
    let norm = error_norm_in(&frame, &e, opts)?;
    let k = k_of_vc_in(&frame, &ad, &rbar, &pd)?;
    let rinv = spd_inverse(&rbar, "Rbar")?;
    let mu = sym_eigen_generalized(&ad, &rinv)?.values;
    let n_c = pd.ncols();
    let kernel = frame.kernel.ncols();
    // mu_{n_c+1} counted on the range of A; kernel eigenvalues are zero
    let optimal_rate = 1.0 - mu.get(n_c.max(kernel)).copied().unwrap_or(1.0);
    Ok(TwoLevelReport {
        n: ad.nrows(),
        n_c,
        error_norm_sq: norm.squared(),
        k,
        rate_from_k: 1.0 - 1.0 / k,
        mu,
        optimal_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{fd_poisson_5pt, laplacian_1d, Boundary};
    use crate::smoothers::Direction;
    use std::sync::Arc;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn error_norm_trivial_cases() {
        let a = laplacian_1d(6).unwrap().to_dense();
        let zero = DMatrix::zeros(6, 6);
        assert_eq!(error_norm(&a, &zero, &PowerOptions::default()).unwrap().norm, 0.0);
        let id = DMatrix::<f64>::identity(6, 6);
        let e = &id - a.clone().try_inverse().unwrap() * &a;
        assert!(error_norm(&a, &e, &PowerOptions::default()).unwrap().norm < 1e-7);
    }

    #[test]
    fn jacobi_norm_on_two_by_two() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]);
        let e = DMatrix::<f64>::identity(2, 2) - &a * 0.5;
        let got = error_norm(&a, &e, &PowerOptions::default()).unwrap();
        assert!((got.norm - 0.5).abs() < 1e-12);
        assert!(got.contractive);
    }

    #[test]
    fn non_contractive_flagged() {
        let a = DMatrix::<f64>::identity(3, 3);
        let e = DMatrix::<f64>::identity(3, 3) * 2.0;
        let got = error_norm(&a, &e, &PowerOptions::default()).unwrap();
        assert!(!got.contractive);
        assert!((got.norm - 2.0).abs() < 1e-12);
    }

    #[test]
    fn full_space_gives_k_one() {
        let a = laplacian_1d(8).unwrap();
        let gs = Smoother::gauss_seidel(Arc::new(a.clone()), Direction::Forward, 1.0).unwrap();
        let (_, rbar) = smoother_pair(&gs).unwrap();
        let k = k_of_vc(&a.to_dense(), &rbar, &DMatrix::identity(8, 8)).unwrap();
        assert!((k - 1.0).abs() < 1e-10);
    }

    #[test]
    fn rate_identity_on_random_instances() {
        for seed in 0..20u64 {
            let n = 6 + (seed as usize % 10);
            let m = random_matrix(n, n, seed);
            let a = &m * m.transpose() + DMatrix::identity(n, n) * 0.1;
            let ac = CsrMatrix::from_dense(&a).unwrap();
            let s = Smoother::gauss_seidel(Arc::new(ac), Direction::Forward, 1.0).unwrap();
            let (r, rbar) = smoother_pair(&s).unwrap();
            let p = random_matrix(n, n / 3 + 1, seed + 1000);
            let e = two_level_error(&a, &r, &p);
            let exact = error_norm_exact(&a, &e).unwrap();
            let k = k_of_vc(&a, &rbar, &p).unwrap();
            assert!((exact * exact - (1.0 - 1.0 / k)).abs() < 1e-8, "seed {seed}");
        }
    }

    #[test]
    fn kernel_outside_coarse_space_is_error() {
        let a = crate::problems::path_laplacian(5).unwrap();
        let s = Smoother::jacobi(Arc::new(a.clone()), 0.5).unwrap();
        let (_, rbar) = smoother_pair(&s).unwrap();
        let p = DMatrix::from_fn(5, 1, |i, _| if i == 0 { 1.0 } else { 0.0 });
        assert!(k_of_vc(&a.to_dense(), &rbar, &p).is_err());
        let ones = DMatrix::from_element(5, 1, 1.0);
        assert!(k_of_vc(&a.to_dense(), &rbar, &ones).is_ok());
    }

    #[test]
    fn optimal_space_for_two_by_two_jacobi() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]);
        let dinv = DMatrix::from_diagonal_element(2, 2, 0.5);
        let rbar = &dinv * 2.0 - &dinv * &a * &dinv;
        let (_, mu) = optimal_coarse_space(&a, &rbar, 1).unwrap();
        assert!((mu[0] - 0.75).abs() < 1e-12 && (mu[1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn optimal_rate_and_lower_bound() {
        let a = laplacian_1d(15).unwrap();
        let sgs = Smoother::gauss_seidel(Arc::new(a.clone()), Direction::Forward, 1.0).unwrap();
        let (r, rbar) = smoother_pair(&sgs).unwrap();
        let ad = a.to_dense();
        let (p_opt, mu) = optimal_coarse_space(&ad, &rbar, 7).unwrap();
        let e = two_level_error(&ad, &r, &p_opt);
        let rate = error_norm_exact(&ad, &e).unwrap().powi(2);
        assert!((rate - (1.0 - mu[7])).abs() < 1e-8);
        for seed in 0..20 {
            let p = random_matrix(15, 7, seed);
            assert!(k_of_vc(&ad, &rbar, &p).unwrap() >= 1.0 / mu[7] - 1e-10);
        }
    }

    #[test]
    fn trace_bound() {
        let a = laplacian_1d(12).unwrap();
        let s = Smoother::gauss_seidel(Arc::new(a.clone()), Direction::Forward, 1.0).unwrap();
        let (_, rbar) = smoother_pair(&s).unwrap();
        let ad = a.to_dense();
        let (p_opt, mu) = optimal_coarse_space(&ad, &rbar, 4).unwrap();
        let top = {
            let rinv = spd_inverse(&rbar, "Rbar").unwrap();
            sym_eigen_generalized(&ad, &rinv).unwrap().vectors.columns(8, 4).into_owned()
        };
        let mut cands = vec![p_opt, top];
        cands.extend((0..10).map(|s| random_matrix(12, 4, s)));
        let rep = trace_check(&ad, &rbar, &cands, 4, 1e-9).unwrap();
        assert!(rep.holds);
        assert!((rep.traces[0] - rep.bound).abs() < 1e-9);
        let top_sum: f64 = mu[8..12].iter().sum();
        assert!((rep.traces[1] - top_sum).abs() < 1e-9);
    }

    #[test]
    fn eigenvectors_classify() {
        let a = laplacian_1d(10).unwrap();
        let s = Smoother::gauss_seidel(Arc::new(a.clone()), Direction::Forward, 1.0).unwrap();
        let (_, rbar) = smoother_pair(&s).unwrap();
        let ad = a.to_dense();
        let (z, mu) = optimal_coarse_space(&ad, &rbar, 10).unwrap();
        let low = classify_frequencies(&ad, &rbar, z.column(0).as_slice(), mu[0] + 1e-12, 2.0).unwrap();
        assert!(low.low && !low.high);
        let high = classify_frequencies(&ad, &rbar, z.column(9).as_slice(), 0.0, mu[9] - 1e-12).unwrap();
        assert!(high.high && !high.low);
    }

    #[test]
    fn weyl_constancy_for_linear_spectrum() {
        let n = 9;
        let a = DMatrix::from_diagonal(&DVector::from_fn(n, |i, _| (i + 1) as f64));
        // exponent 2/d = 1 makes lambda_k / (k/N) = N
        let (lo, hi) = weyl_ratio(&a, 2.0).unwrap();
        assert!((lo - n as f64).abs() < 1e-12 && (hi - lo).abs() < 1e-12);
        let p = fd_poisson_5pt(10, Boundary::Dirichlet).unwrap().to_dense();
        let (lo, hi) = weyl_ratio(&p, 2.0).unwrap();
        assert!(hi / lo <= 6.0);
    }

    #[test]
    fn additive_condition_is_finite() {
        let a = laplacian_1d(15).unwrap();
        let ad = a.to_dense();
        let p = crate::interpolation::ideal_interpolation(
            &a,
            &crate::coarsening::CfSplitting::from_coarse(15, &(1..15).step_by(2).collect::<Vec<_>>()).unwrap(),
        )
        .unwrap()
        .p
        .to_dense();
        let dinv = DMatrix::from_diagonal_element(15, 15, 0.5);
        let kappa = additive_condition_number(&ad, &p, &dinv).unwrap();
        assert!(kappa >= 1.0 && kappa < 10.0, "{kappa}");
    }

    #[test]
    fn anisotropic_tensor_ratio() {
        // A = eps I (x) M + M (x) I on an n x n grid with M = tridiag(-1, 2, -1),
        // x = ones and y alternating 1, 0, 1, ...
        let n = 7;
        for eps in [1.0, 1e-2, 1e-4] {
            let m = laplacian_1d(n).unwrap().to_dense();
            let id = DMatrix::<f64>::identity(n, n);
            let a = id.kronecker(&m) * eps + m.kronecker(&id);
            let x = DVector::from_element(n, 1.0);
            let y = DVector::from_fn(n, |i, _| if i % 2 == 0 { 1.0 } else { 0.0 });
            let v = x.kronecker(&y);
            let sa = CsrMatrix::from_dense(&a).unwrap();
            let got = diagonal_energy_ratio(&sa, v.as_slice());
            let want = eps / (1.0 + eps) + 1.0 / ((1.0 + eps) * n as f64);
            assert!((got - want).abs() < 1e-12, "eps {eps}: {got} vs {want}");
        }
    }
}
