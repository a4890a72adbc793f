//! Multilevel hierarchies, two-level and V-cycle application, and PCG.

use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coarsening::{
    aggressive_coarsen, cr_refine, greedy_aggregate, mis, natural_order, pairwise_aggregate, AggregatePartition,
    CfSplitting, CoarseningKind, CrParams,
};
use crate::dense::pinv_sym;
use crate::error::{AmgError, Result};
use crate::interpolation::{
    direct_interpolation, energy_min_prolongation, expand_partition, ideal_interpolation, multipass_interpolation,
    sa_prolongation, standard_interpolation, ua_prolongation, vector_preserving_interpolation, BuilderTag,
    Prolongation, SupportSet,
};
use crate::smoothers::{Smoother, SmootherSpec};
use crate::sparse::{dot, galerkin_product, norm2, project_out, CsrMatrix, Graph};
use crate::strength::{strength_matrix, StrengthConfig, StrengthMatrix};

/// Coarse matrices above this size are not factored densely.
pub const COARSE_DENSE_CAP: usize = 4500;

#[derive(Clone, Debug)]
pub struct SetupConfig {
    pub strength: StrengthConfig,
    pub coarsening: CoarseningKind,
    pub interpolation: BuilderTag,
    pub smoother: SmootherSpec,
    pub presmooth: usize,
    pub postsmooth: usize,
    pub sa_nu: usize,
    pub sa_omega: Option<f64>,
    pub emin_tol: f64,
    /// Stop coarsening once a level has at most this many unknowns.
    pub max_coarse: usize,
    pub max_levels: usize,
    /// Interleaved dofs per node (2 for plane elasticity).
    pub block_size: usize,
    /// Vectors to reproduce on the finest level (aggregation and
    /// vector-preserving builders).
    pub near_kernel: Option<Vec<Vec<f64>>>,
    pub cr: Option<CrParams>,
}

impl Default for SetupConfig {
    fn default() -> Self {
        SetupConfig {
            strength: StrengthConfig::default(),
            coarsening: CoarseningKind::Mis,
            interpolation: BuilderTag::Standard,
            smoother: SmootherSpec::default(),
            presmooth: 1,
            postsmooth: 1,
            sa_nu: 1,
            sa_omega: None,
            emin_tol: 1e-10,
            max_coarse: 50,
            max_levels: 25,
            block_size: 1,
            near_kernel: None,
            cr: None,
        }
    }
}

impl SetupConfig {
    pub fn classical() -> Self {
        SetupConfig::default()
    }

    pub fn unsmoothed_aggregation() -> Self {
        SetupConfig {
            coarsening: CoarseningKind::Aggregate,
            interpolation: BuilderTag::Ua,
            ..SetupConfig::default()
        }
    }

    pub fn smoothed_aggregation() -> Self {
        SetupConfig {
            coarsening: CoarseningKind::Aggregate,
            interpolation: BuilderTag::Sa,
            ..SetupConfig::default()
        }
    }

    /// Same configuration limited to one coarse level solved exactly.
    pub fn two_level(mut self) -> Self {
        self.max_levels = 2;
        self.max_coarse = 0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.strength.validate()?;
        if self.max_levels == 0 {
            return Err(AmgError::Config("max_levels must be at least 1".into()));
        }
        if self.block_size == 0 {
            return Err(AmgError::Config("block_size must be positive".into()));
        }
        if self.interpolation == BuilderTag::SpectralAmge {
            return Err(AmgError::Config(
                "spectral-amge needs an element assembly and is not available from a matrix alone".into(),
            ));
        }
        if self.interpolation == BuilderTag::LeastSquares {
            return Err(AmgError::Config("ls interpolation is built by the bootstrap setup".into()));
        }
        let aggregation = matches!(self.interpolation, BuilderTag::Ua | BuilderTag::Sa);
        if aggregation != self.coarsening.is_aggregation() {
            return Err(AmgError::Config(format!(
                "interpolation {} does not fit coarsening {}",
                self.interpolation.name(),
                self.coarsening.name()
            )));
        }
        Ok(())
    }
}

/// What the coarsening step produced on a level.
#[derive(Clone, Debug)]
pub enum Coarsening {
    Split(CfSplitting),
    Aggregates(AggregatePartition),
}

#[derive(Clone, Debug)]
pub struct Level {
    pub a: Arc<CsrMatrix>,
    /// Prolongation from the next coarser level; None on the coarsest.
    pub p: Option<Prolongation>,
    pub smoother: Option<Smoother>,
    pub strength: Option<StrengthMatrix>,
    pub coarsening: Option<Coarsening>,
}

#[derive(Clone, Debug)]
enum CoarseSolve {
    Cholesky(Cholesky<f64, Dyn>),
    Pseudo(DMatrix<f64>),
}

impl CoarseSolve {
    fn new(a: &CsrMatrix) -> Result<Self> {
        if a.n_rows() > COARSE_DENSE_CAP {
            return Err(AmgError::TooLarge {
                n: a.n_rows(),
                cap: COARSE_DENSE_CAP,
            });
        }
        let d = a.to_dense();
        match d.clone().cholesky() {
            // a Cholesky factor of a numerically singular matrix is useless
            Some(ch) if ch.l().diagonal().min() > 1e-7 * ch.l().diagonal().max() => Ok(CoarseSolve::Cholesky(ch)),
            _ => Ok(CoarseSolve::Pseudo(pinv_sym(&d, 1e-12))),
        }
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let rhs = DVector::from_column_slice(b);
        match self {
            CoarseSolve::Cholesky(ch) => ch.solve(&rhs).as_slice().to_vec(),
            CoarseSolve::Pseudo(m) => (m * rhs).as_slice().to_vec(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Hierarchy {
    pub levels: Vec<Level>,
    coarse: CoarseSolve,
    pub presmooth: usize,
    pub postsmooth: usize,
}

/// Anything that approximates the action of A^{-1}.
pub trait Preconditioner {
    fn apply(&self, r: &[f64]) -> Vec<f64>;
}

pub struct Identity;

impl Preconditioner for Identity {
    fn apply(&self, r: &[f64]) -> Vec<f64> {
        r.to_vec()
    }
}

impl Preconditioner for Hierarchy {
    fn apply(&self, r: &[f64]) -> Vec<f64> {
        self.vcycle_apply(r)
    }
}

impl<F: Fn(&[f64]) -> Vec<f64>> Preconditioner for F {
    fn apply(&self, r: &[f64]) -> Vec<f64> {
        self(r)
    }
}

pub(crate) fn node_graph(s: &Graph, block: usize) -> Result<Graph> {
    if block == 1 {
        return Ok(s.clone());
    }
    let mut edges = Vec::new();
    for (u, v) in s.edges() {
        if u / block != v / block {
            edges.push((u / block, v / block));
        }
    }
    Graph::from_edges(s.n_vertices() / block, &edges)
}

/// Coarse-level vectors matching P (1 (x) e_j) = zeta_j.
fn coarse_near_kernel(n_aggregates: usize, k: usize) -> Vec<Vec<f64>> {
    (0..k)
        .map(|j| (0..n_aggregates * k).map(|c| if c % k == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

pub(crate) struct Step {
    pub(crate) strength: StrengthMatrix,
    pub(crate) coarsening: Coarsening,
    pub(crate) p: Prolongation,
    pub(crate) near_kernel: Option<Vec<Vec<f64>>>,
    pub(crate) block: usize,
}

pub(crate) fn coarsen_level(
    a: &CsrMatrix,
    cfg: &SetupConfig,
    near_kernel: Option<&Vec<Vec<f64>>>,
    block: usize,
) -> Result<Step> {
    let n = a.n_rows();
    let s = strength_matrix(a, &cfg.strength)?;
    match cfg.coarsening {
        CoarseningKind::Aggregate | CoarseningKind::Pairwise { .. } => {
            if n % block != 0 {
                return Err(AmgError::Dimension(format!("{n} dofs are not a multiple of block {block}")));
            }
            let nodes = match cfg.coarsening {
                CoarseningKind::Pairwise { passes } if block == 1 => pairwise_aggregate(a, passes)?,
                _ => greedy_aggregate(&node_graph(&s, block)?),
            };
            let part = if block == 1 { nodes.clone() } else { expand_partition(&nodes, block) };
            let tent = ua_prolongation(&part, near_kernel.map(|v| &v[..]))?;
            let k = near_kernel.map_or(1, |v| v.len().max(1));
            let p = if cfg.interpolation == BuilderTag::Sa {
                sa_prolongation(&tent, a, cfg.sa_nu, cfg.sa_omega)?
            } else {
                tent
            };
            Ok(Step {
                strength: s,
                coarsening: Coarsening::Aggregates(nodes.clone()),
                p,
                near_kernel: near_kernel.map(|_| coarse_near_kernel(nodes.n_aggregates(), k)),
                block: k,
            })
        }
        CoarseningKind::Mis | CoarseningKind::Aggressive { .. } => {
            let order = natural_order(n);
            let mut split = match cfg.coarsening {
                CoarseningKind::Aggressive { m, l } => aggressive_coarsen(&s, m, l, &order)?,
                _ => mis(&s, &order),
            };
            if let Some(params) = &cfg.cr {
                split = cr_refine(a, &s, &cfg.smoother, &split, params)?.split;
            }
            let ones = vec![1.0; n];
            let prototype = near_kernel.and_then(|v| v.first()).unwrap_or(&ones);
            let p = match cfg.interpolation {
                BuilderTag::Ideal => ideal_interpolation(a, &split)?,
                BuilderTag::Direct => direct_interpolation(a, &split, &s)?,
                BuilderTag::Standard => standard_interpolation(a, &split, &s)?,
                BuilderTag::Multipass => multipass_interpolation(a, &split, &s)?,
                BuilderTag::VectorPreserving => vector_preserving_interpolation(a, &split, &s, prototype)?,
                BuilderTag::EnergyMin => {
                    let supports = SupportSet::from_neighborhoods(&s, &split.coarse_points())?;
                    energy_min_prolongation(a, &supports, prototype, cfg.emin_tol)?
                }
                other => {
                    return Err(AmgError::Config(format!("{} needs aggregates", other.name())));
                }
            };
            let coarse_kernel = near_kernel.map(|vs| {
                let cpts = split.coarse_points();
                vs.iter().map(|v| cpts.iter().map(|&c| v[c]).collect()).collect()
            });
            Ok(Step {
                strength: s,
                coarsening: Coarsening::Split(split),
                p,
                near_kernel: coarse_kernel,
                block: 1,
            })
        }
    }
}

/// Build a hierarchy by repeating strength, coarsening, interpolation and
/// the Galerkin product until the coarse size or level limit is reached.
pub fn setup(a: &CsrMatrix, cfg: &SetupConfig) -> Result<Hierarchy> {
    cfg.validate()?;
    if !a.is_square() {
        return Err(AmgError::Dimension(format!("{}x{} matrix", a.n_rows(), a.n_cols())));
    }
    if let Some((row, col)) = a.check_symmetric() {
        return Err(AmgError::NotSymmetric { row, col });
    }
    if let Some(i) = a.diagonal().iter().position(|&d| d <= 0.0) {
        return Err(AmgError::NonPositiveDiagonal(i));
    }
    let mut levels = Vec::new();
    let mut current = Arc::new(a.clone());
    let mut near_kernel = cfg.near_kernel.clone();
    let mut block = cfg.block_size;
    while current.n_rows() > cfg.max_coarse && levels.len() + 1 < cfg.max_levels {
        let n = current.n_rows();
        let step = coarsen_level(&current, cfg, near_kernel.as_ref(), block)?;
        let n_coarse = step.p.n_coarse();
        if n_coarse == 0 || n_coarse as f64 >= 0.95 * n as f64 {
            return Err(AmgError::Stagnation {
                level: levels.len(),
                n,
                n_coarse,
            });
        }
        let coarse = Arc::new(galerkin_product(&step.p.p, &current)?);
        let smoother = cfg.smoother.build(current.clone())?;
        levels.push(Level {
            a: current,
            p: Some(step.p),
            smoother: Some(smoother),
            strength: Some(step.strength),
            coarsening: Some(step.coarsening),
        });
        current = coarse;
        near_kernel = step.near_kernel;
        block = step.block;
    }
    let coarse = CoarseSolve::new(&current)?;
    levels.push(Level {
        a: current,
        p: None,
        smoother: None,
        strength: None,
        coarsening: None,
    });
    Ok(Hierarchy {
        levels,
        coarse,
        presmooth: cfg.presmooth,
        postsmooth: cfg.postsmooth,
    })
}

impl Hierarchy {
    /// Two-level method from explicit parts; the coarse matrix is P'AP.
    pub fn from_parts(a: Arc<CsrMatrix>, p: Prolongation, smoother: Smoother) -> Result<Self> {
        if p.n_fine() != a.n_rows() || smoother.n() != a.n_rows() {
            return Err(AmgError::Dimension("two-level parts disagree in size".into()));
        }
        let ac = galerkin_product(&p.p, &a)?;
        let coarse = CoarseSolve::new(&ac)?;
        Ok(Hierarchy {
            levels: vec![
                Level {
                    a,
                    p: Some(p),
                    smoother: Some(smoother),
                    strength: None,
                    coarsening: None,
                },
                Level {
                    a: Arc::new(ac),
                    p: None,
                    smoother: None,
                    strength: None,
                    coarsening: None,
                },
            ],
            coarse,
            presmooth: 0,
            postsmooth: 1,
        })
    }

    /// Hierarchy over a given chain of prolongations (finest first), with
    /// Galerkin coarse matrices and one smoother per non-coarsest level.
    pub fn from_prolongations(
        a: &CsrMatrix,
        prolongations: Vec<Prolongation>,
        smoother: &SmootherSpec,
        presmooth: usize,
        postsmooth: usize,
    ) -> Result<Self> {
        let mut levels = Vec::with_capacity(prolongations.len() + 1);
        let mut current = Arc::new(a.clone());
        for p in prolongations {
            if p.n_fine() != current.n_rows() {
                return Err(AmgError::Dimension(format!(
                    "P with {} rows on a level of size {}",
                    p.n_fine(),
                    current.n_rows()
                )));
            }
            let coarse = Arc::new(galerkin_product(&p.p, &current)?);
            let smoother = smoother.build(current.clone())?;
            levels.push(Level {
                a: current,
                p: Some(p),
                smoother: Some(smoother),
                strength: None,
                coarsening: None,
            });
            current = coarse;
        }
        let coarse = CoarseSolve::new(&current)?;
        levels.push(Level {
            a: current,
            p: None,
            smoother: None,
            strength: None,
            coarsening: None,
        });
        Ok(Hierarchy {
            levels,
            coarse,
            presmooth,
            postsmooth,
        })
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn finest(&self) -> &CsrMatrix {
        &self.levels[0].a
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.a.n_rows()).collect()
    }

    pub fn operator_complexity(&self) -> f64 {
        let total: usize = self.levels.iter().map(|l| l.a.nnz()).sum();
        total as f64 / self.levels[0].a.nnz().max(1) as f64
    }

    pub fn grid_complexity(&self) -> f64 {
        let total: usize = self.sizes().iter().sum();
        total as f64 / self.levels[0].a.n_rows().max(1) as f64
    }

    /// Largest entrywise gap between each coarse matrix and P'AP.
    pub fn galerkin_defect(&self) -> Result<f64> {
        let mut worst = 0.0f64;
        for k in 0..self.levels.len() - 1 {
            let p = &self.levels[k].p.as_ref().expect("non-coarsest level").p;
            let ac = galerkin_product(p, &self.levels[k].a)?;
            let diff = ac.add_scaled(1.0, &self.levels[k + 1].a, -1.0)?;
            worst = worst.max(diff.values().iter().fold(0.0, |m, x| m.max(x.abs())));
        }
        Ok(worst)
    }

    /// Exact coarse correction followed by one post-smoothing step with the
    /// adjoint sweep: B g = x + R'(g - A x), x = P A_c^{-1} P' g.
    pub fn two_level_apply(&self, g: &[f64]) -> Result<Vec<f64>> {
        if self.levels.len() != 2 {
            return Err(AmgError::InvalidArgument(format!(
                "two-level application on a {}-level hierarchy",
                self.levels.len()
            )));
        }
        let fine = &self.levels[0];
        let p = &fine.p.as_ref().expect("fine level has P").p;
        let gc = p.spmv_transpose(g)?;
        let mut x = p.mul_vec(&self.coarse.solve(&gc));
        fine.smoother.as_ref().expect("fine level has a smoother").sweep_adjoint(g, &mut x);
        Ok(x)
    }

    /// ||E||_A of the exact two-level method E = (I - R'A)(I - Pi_c), by
    /// power iteration on E*E = (I - Pi_c)(I - RA)(I - R'A)(I - Pi_c) with
    /// sparse actions only. Returns the Rayleigh-quotient estimate.
    pub fn two_level_error_norm(&self, max_steps: usize, tol: f64, seed: u64) -> Result<f64> {
        if self.levels.len() != 2 {
            return Err(AmgError::InvalidArgument(format!(
                "two-level rate on a {}-level hierarchy",
                self.levels.len()
            )));
        }
        let fine = &self.levels[0];
        let a = &fine.a;
        let p = &fine.p.as_ref().expect("fine level has P").p;
        let smoother = fine.smoother.as_ref().expect("fine level has a smoother");
        let n = a.n_rows();
        let zero = vec![0.0; n];
        let coarse_correct = |v: &mut Vec<f64>| {
            let rc = p.spmv_transpose(&a.mul_vec(v)).expect("sizes agree");
            let c = p.mul_vec(&self.coarse.solve(&rc));
            v.iter_mut().zip(&c).for_each(|(x, y)| *x -= y);
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        coarse_correct(&mut v);
        let mut est = 0.0;
        for _ in 0..max_steps {
            let vv = dot(&a.mul_vec(&v), &v);
            if vv <= 0.0 {
                return Ok(0.0);
            }
            // w = E v; its energy over that of v is the Rayleigh quotient of E*E
            let mut w = v.clone();
            smoother.sweep_adjoint(&zero, &mut w);
            let next = dot(&a.mul_vec(&w), &w) / vv;
            smoother.sweep(&zero, &mut w);
            coarse_correct(&mut w);
            let scale = dot(&a.mul_vec(&w), &w).sqrt();
            if scale == 0.0 {
                return Ok(0.0);
            }
            v = w.into_iter().map(|x| x / scale).collect();
            let done = (next - est).abs() <= tol * next;
            est = next;
            if done {
                break;
            }
        }
        Ok(est.sqrt())
    }

    fn cycle(&self, k: usize, b: &[f64]) -> Vec<f64> {
        let level = &self.levels[k];
        if k + 1 == self.levels.len() {
            return self.coarse.solve(b);
        }
        let smoother = level.smoother.as_ref().expect("non-coarsest level has a smoother");
        let p = &level.p.as_ref().expect("non-coarsest level has P").p;
        let mut x = vec![0.0; b.len()];
        for _ in 0..self.presmooth {
            smoother.sweep(b, &mut x);
        }
        let ax = level.a.mul_vec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let rc = p.spmv_transpose(&r).expect("sizes agree");
        let ec = self.cycle(k + 1, &rc);
        let e = p.mul_vec(&ec);
        x.iter_mut().zip(&e).for_each(|(xi, ei)| *xi += ei);
        for _ in 0..self.postsmooth {
            smoother.sweep_adjoint(b, &mut x);
        }
        x
    }

    /// One V(presmooth, postsmooth) cycle from a zero initial guess.
    pub fn vcycle_apply(&self, g: &[f64]) -> Vec<f64> {
        self.cycle(0, g)
    }

    /// Run V-cycles as a stationary iteration x <- x + B(b - Ax).
    pub fn stationary_solve(&self, b: &[f64], x0: &[f64], tol: f64, max_it: usize) -> Result<(Vec<f64>, SolveReport)> {
        let a = self.finest();
        let start = Instant::now();
        let mut x = x0.to_vec();
        let bnorm = norm2(b).max(f64::MIN_POSITIVE);
        let residual = |x: &[f64]| -> Vec<f64> { b.iter().zip(a.mul_vec(x)).map(|(bi, ai)| bi - ai).collect() };
        let mut r = residual(&x);
        let mut history = vec![norm2(&r)];
        let mut converged = history[0] <= tol * bnorm;
        while !converged && history.len() <= max_it {
            let e = self.vcycle_apply(&r);
            x.iter_mut().zip(&e).for_each(|(xi, ei)| *xi += ei);
            r = residual(&x);
            history.push(norm2(&r));
            converged = *history.last().unwrap() <= tol * bnorm;
        }
        Ok((x, SolveReport::new(history, converged, start.elapsed())))
    }
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    /// l2 residual norms, starting with the initial residual.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Geometric mean of the residual reduction over the last five steps.
    pub factor: f64,
    pub wall_time: Duration,
}

impl SolveReport {
    fn new(residuals: Vec<f64>, converged: bool, wall_time: Duration) -> Self {
        let iterations = residuals.len() - 1;
        let k = iterations.min(5);
        let factor = if k == 0 || residuals[iterations - k] == 0.0 {
            0.0
        } else {
            (residuals[iterations] / residuals[iterations - k]).powf(1.0 / k as f64)
        };
        SolveReport {
            residuals,
            iterations,
            converged,
            factor,
            wall_time,
        }
    }
}

/// Preconditioned conjugate gradients. With a kernel basis the right-hand
/// side, every preconditioned residual and the result are projected onto
/// its orthogonal complement.
pub fn pcg_solve(
    a: &CsrMatrix,
    b: &[f64],
    precond: &dyn Preconditioner,
    tol: f64,
    max_it: usize,
    kernel: Option<&[Vec<f64>]>,
) -> Result<(Vec<f64>, SolveReport)> {
    let n = a.n_rows();
    if b.len() != n {
        return Err(AmgError::Dimension(format!("rhs of length {} for n = {n}", b.len())));
    }
    let start = Instant::now();
    let project = |v: &mut Vec<f64>| {
        if let Some(k) = kernel {
            project_out(v, k);
        }
    };
    let mut r = b.to_vec();
    project(&mut r);
    let bnorm = norm2(&r);
    let mut x = vec![0.0; n];
    let mut history = vec![bnorm];
    if bnorm == 0.0 {
        return Ok((x, SolveReport::new(history, true, start.elapsed())));
    }
    let mut z = precond.apply(&r);
    project(&mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut converged = false;
    for _ in 0..max_it {
        if rz <= 0.0 {
            return Err(AmgError::Breakdown(format!("preconditioner is not positive definite: (r, Br) = {rz:e}")));
        }
        let ap = a.mul_vec(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(AmgError::Breakdown(format!("non-descent direction: p'Ap = {pap:e}")));
        }
        let alpha = rz / pap;
        x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
        r.iter_mut().zip(&ap).for_each(|(ri, qi)| *ri -= alpha * qi);
        let rn = norm2(&r);
        history.push(rn);
        if rn <= tol * bnorm {
            converged = true;
            break;
        }
        z = precond.apply(&r);
        project(&mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }
    project(&mut x);
    Ok((x, SolveReport::new(history, converged, start.elapsed())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{fd_poisson_5pt, laplacian_1d, path_laplacian, Boundary};
    use crate::smoothers::Direction;

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn classical_setup_on_poisson() {
        let a = fd_poisson_5pt(31, Boundary::Dirichlet).unwrap();
        let h = setup(&a, &SetupConfig::classical()).unwrap();
        assert!(h.n_levels() >= 3);
        assert!(*h.sizes().last().unwrap() <= 50);
        assert!(h.sizes().windows(2).all(|w| w[1] < w[0]));
        assert!(h.galerkin_defect().unwrap() <= 1e-12);
    }

    #[test]
    fn small_input_is_single_level() {
        let a = laplacian_1d(20).unwrap();
        let h = setup(&a, &SetupConfig::classical()).unwrap();
        assert_eq!(h.n_levels(), 1);
        let b = random(20, 1);
        let x = h.vcycle_apply(&b);
        let r: Vec<f64> = b.iter().zip(a.mul_vec(&x)).map(|(p, q)| p - q).collect();
        assert!(norm2(&r) < 1e-12);
    }

    #[test]
    fn ua_operator_complexity() {
        let a = fd_poisson_5pt(31, Boundary::Dirichlet).unwrap();
        let h = setup(&a, &SetupConfig::unsmoothed_aggregation()).unwrap();
        assert!(h.operator_complexity() <= 1.5, "{}", h.operator_complexity());
    }

    #[test]
    fn mismatched_config_rejected() {
        let cfg = SetupConfig {
            interpolation: BuilderTag::Sa,
            ..SetupConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(AmgError::Config(_))));
    }

    #[test]
    fn two_level_zero_and_exact() {
        let a = Arc::new(laplacian_1d(7).unwrap());
        let split = CfSplitting::from_coarse(7, &[1, 3, 5]).unwrap();
        let p = ideal_interpolation(&a, &split).unwrap();
        let exact = Smoother::psc(a.clone(), &[(0..7).collect()]).unwrap();
        let h = Hierarchy::from_parts(a.clone(), p, exact).unwrap();
        assert_eq!(h.two_level_apply(&[0.0; 7]).unwrap(), vec![0.0; 7]);
        let g = random(7, 3);
        let x = h.two_level_apply(&g).unwrap();
        let ax = a.mul_vec(&x);
        for i in 0..7 {
            assert!((ax[i] - g[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn two_level_error_propagator_factors() {
        let n = 9;
        let a = Arc::new(laplacian_1d(n).unwrap());
        let split = CfSplitting::from_coarse(n, &[1, 4, 7]).unwrap();
        let p = direct_interpolation(&a, &split, &crate::sparse::adjacency_graph(&a).unwrap()).unwrap();
        let pd = p.p.to_dense();
        let gs = Smoother::gauss_seidel(a.clone(), Direction::Forward, 1.0).unwrap();
        let r_adj = gs.dense_r_adjoint().unwrap();
        let h = Hierarchy::from_parts(a.clone(), p, gs).unwrap();
        let ad = a.to_dense();
        let mut b = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            b.set_column(j, &DVector::from_vec(h.two_level_apply(&e).unwrap()));
        }
        let id = DMatrix::<f64>::identity(n, n);
        let ac = pd.transpose() * &ad * &pd;
        let pi = &pd * ac.try_inverse().unwrap() * pd.transpose() * &ad;
        let want = (&id - &r_adj * &ad) * (&id - pi);
        assert!(((&id - b * &ad) - want).amax() < 1e-12);
    }

    #[test]
    fn vcycle_is_symmetric() {
        let a = fd_poisson_5pt(20, Boundary::Dirichlet).unwrap();
        let h = setup(&a, &SetupConfig::classical()).unwrap();
        for seed in 0..5 {
            let g = random(400, seed);
            let k = random(400, seed + 100);
            let lhs = dot(&h.vcycle_apply(&g), &k);
            let rhs = dot(&g, &h.vcycle_apply(&k));
            assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
        }
    }

    #[test]
    fn vcycle_iteration_reduces_energy_error() {
        let a = fd_poisson_5pt(31, Boundary::Dirichlet).unwrap();
        let h = setup(&a, &SetupConfig::classical()).unwrap();
        let mut e = random(a.n_rows(), 7);
        let mut last = dot(&a.mul_vec(&e), &e);
        for _ in 0..10 {
            let r: Vec<f64> = a.mul_vec(&e).iter().map(|x| -x).collect();
            let c = h.vcycle_apply(&r);
            e.iter_mut().zip(&c).for_each(|(ei, ci)| *ei += ci);
            let now = dot(&a.mul_vec(&e), &e);
            assert!(now < last);
            last = now;
        }
    }

    #[test]
    fn pcg_identity_one_step() {
        let a = CsrMatrix::identity(10);
        let b = random(10, 2);
        let (x, rep) = pcg_solve(&a, &b, &Identity, 1e-12, 10, None).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(rep.converged);
        assert!(x.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-15));
    }

    #[test]
    fn pcg_with_vcycle_on_poisson() {
        let a = fd_poisson_5pt(31, Boundary::Dirichlet).unwrap();
        let h = setup(&a, &SetupConfig::classical()).unwrap();
        let b = random(a.n_rows(), 9);
        let (_, rep) = pcg_solve(&a, &b, &h, 1e-8, 100, None).unwrap();
        assert!(rep.converged);
        assert!(rep.iterations <= 20, "{}", rep.iterations);
        assert!(rep.factor > 0.0 && rep.factor <= 1.0);
    }

    #[test]
    fn pcg_neumann_with_kernel() {
        let n = 30;
        let a = path_laplacian(n).unwrap();
        let ones = vec![vec![1.0; n]];
        let b = random(n, 4);
        let (x, rep) = pcg_solve(&a, &b, &Identity, 1e-10, 200, Some(&ones)).unwrap();
        assert!(rep.converged);
        assert!(x.iter().sum::<f64>().abs() < 1e-8);
    }

    #[test]
    fn pcg_rejects_indefinite_preconditioner() {
        let a = laplacian_1d(5).unwrap();
        let neg = |r: &[f64]| r.iter().map(|x| -x).collect::<Vec<_>>();
        assert!(matches!(
            pcg_solve(&a, &random(5, 1), &neg, 1e-10, 10, None),
            Err(AmgError::Breakdown(_))
        ));
    }

    #[test]
    fn all_classical_builders_set_up() {
        let a = fd_poisson_5pt(15, Boundary::Dirichlet).unwrap();
        for builder in [
            BuilderTag::Ideal,
            BuilderTag::Direct,
            BuilderTag::Standard,
            BuilderTag::Multipass,
            BuilderTag::VectorPreserving,
            BuilderTag::EnergyMin,
        ] {
            let cfg = SetupConfig {
                interpolation: builder,
                ..SetupConfig::default()
            };
            let h = setup(&a, &cfg).unwrap();
            assert!(h.galerkin_defect().unwrap() <= 1e-12, "{}", builder.name());
        }
        let cfg = SetupConfig {
            coarsening: CoarseningKind::Pairwise { passes: 2 },
            interpolation: BuilderTag::Ua,
            ..SetupConfig::default()
        };
        setup(&a, &cfg).unwrap();
        setup(&a, &SetupConfig::smoothed_aggregation()).unwrap();
    }
}
