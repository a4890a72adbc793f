//! Bootstrap and adaptive setup: least-squares fitting of P to test
//! vectors, the adaptive loop, the multigrid eigensolver and adaptive SA
//! vector insertion.

use std::collections::HashSet;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::coarsening::{greedy_aggregate, mis, natural_order, AggregatePartition};
use crate::dense::sym_eigen_generalized;
use crate::error::{AmgError, Result};
use crate::hierarchy::{node_graph, Hierarchy, Preconditioner, COARSE_DENSE_CAP};
use crate::interpolation::{expand_partition, sa_prolongation, ua_prolongation, BuilderTag, Prolongation, SupportSet};
use crate::smoothers::{Smoother, SmootherSpec};
use crate::sparse::{adjacency_graph, dot, energy, galerkin_product, CsrMatrix, Graph};
use crate::strength::{strength_matrix, StrengthConfig};

/// Test vectors on one level with the A-norm of each recorded at every
/// measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct TestVectorSet {
    vectors: Vec<Vec<f64>>,
    pub history: Vec<Vec<f64>>,
}

impl TestVectorSet {
    pub fn new(vectors: Vec<Vec<f64>>) -> Result<Self> {
        let n = vectors
            .first()
            .map(Vec::len)
            .ok_or_else(|| AmgError::InvalidArgument("empty test vector set".into()))?;
        for (j, v) in vectors.iter().enumerate() {
            if v.len() != n {
                return Err(AmgError::Dimension(format!("test vector {j} has length {} != {n}", v.len())));
            }
            if v.iter().all(|&x| x == 0.0) {
                return Err(AmgError::InvalidArgument(format!("test vector {j} is zero")));
            }
        }
        Ok(TestVectorSet {
            history: vec![Vec::new(); vectors.len()],
            vectors,
        })
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn n(&self) -> usize {
        self.vectors[0].len()
    }

    pub fn push(&mut self, v: Vec<f64>) -> Result<()> {
        if v.len() != self.n() {
            return Err(AmgError::Dimension(format!("test vector of length {} for {}", v.len(), self.n())));
        }
        if v.iter().all(|&x| x == 0.0) {
            return Err(AmgError::InvalidArgument("zero test vector".into()));
        }
        self.vectors.push(v);
        self.history.push(Vec::new());
        Ok(())
    }

    fn record(&mut self, a: &CsrMatrix) {
        for (v, h) in self.vectors.iter().zip(&mut self.history) {
            h.push(energy(a, v).max(0.0).sqrt());
        }
    }
}

/// How test vectors are carried to the coarse level.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RestrictMode {
    /// Values at the coarse points (C/F splitting, least-squares P).
    Evaluation,
    /// Per-aggregate blocks (aggregation, P from local bases).
    Block,
}

impl RestrictMode {
    pub fn name(&self) -> &'static str {
        match self {
            RestrictMode::Evaluation => "evaluation",
            RestrictMode::Block => "block",
        }
    }
}

impl FromStr for RestrictMode {
    type Err = AmgError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "evaluation" => Ok(RestrictMode::Evaluation),
            "block" => Ok(RestrictMode::Block),
            _ => Err(AmgError::Config(format!("unknown restrict mode {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LsFitOptions {
    /// A pattern is only grown while it holds at most this many entries.
    pub s_max: usize,
    /// Relative residual accepted without growing the pattern.
    pub eps_fit: f64,
    /// Entries with |p| <= eps_p are dropped at the end.
    pub eps_p: f64,
}

impl Default for LsFitOptions {
    fn default() -> Self {
        LsFitOptions {
            s_max: 6,
            eps_fit: 0.1,
            eps_p: 1e-10,
        }
    }
}

/// Fine graph plus the fine vertex behind each coarse dof; patterns grow by
/// graph distance in it.
#[derive(Clone, Copy, Debug)]
pub struct PatternGrowth<'a> {
    pub graph: &'a Graph,
    pub coarse_points: &'a [usize],
}

#[derive(Clone, Debug)]
pub struct LsFit {
    pub prolongation: Prolongation,
    /// Final relative residual of each row.
    pub residuals: Vec<f64>,
    /// Rows whose local problem was rank deficient (minimal-norm solution).
    pub rank_deficient: Vec<usize>,
    /// Final pattern size per row, before dropping small entries.
    pub pattern_sizes: Vec<usize>,
}

struct RowFit {
    weights: Vec<f64>,
    residual: f64,
    deficient: bool,
}

fn fit_row(psi_fine: &[Vec<f64>], psi_coarse: &[Vec<f64>], i: usize, cols: &[usize]) -> RowFit {
    let m = psi_fine.len();
    let b = DVector::from_fn(m, |r, _| psi_fine[r][i]);
    let bnorm = b.norm();
    let relative = |r: f64| if bnorm > 0.0 { r / bnorm } else { 0.0 };
    if cols.is_empty() {
        return RowFit {
            weights: Vec::new(),
            residual: relative(bnorm),
            deficient: false,
        };
    }
    let mat = DMatrix::from_fn(m, cols.len(), |r, k| psi_coarse[r][cols[k]]);
    let svd = mat.clone().svd(true, true);
    let top = svd.singular_values.max();
    if top == 0.0 {
        return RowFit {
            weights: vec![0.0; cols.len()],
            residual: relative(bnorm),
            deficient: true,
        };
    }
    let tol = 1e-12 * top;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    let p = svd.solve(&b, tol).expect("both factors were computed");
    RowFit {
        residual: relative((&mat * &p - &b).norm()),
        weights: p.as_slice().to_vec(),
        deficient: rank < cols.len(),
    }
}

/// Coarse dofs at the smallest graph distance from `i` not already in
/// `current`.
fn nearest_coarse_layer(g: &Graph, coarse_of: &[Option<usize>], i: usize, current: &[usize]) -> Vec<usize> {
    let mut seen = HashSet::from([i]);
    let mut frontier = vec![i];
    while !frontier.is_empty() {
        let mut layer: Vec<usize> = frontier
            .iter()
            .filter_map(|&v| coarse_of[v])
            .filter(|c| !current.contains(c))
            .collect();
        if !layer.is_empty() {
            layer.sort_unstable();
            return layer;
        }
        let mut next = Vec::new();
        for &v in &frontier {
            for &w in g.neighbors(v) {
                if seen.insert(w) {
                    next.push(w);
                }
            }
        }
        frontier = next;
    }
    Vec::new()
}

/// Row-wise least-squares fit of P with P Psi_c ~ Psi. `pattern` lists the
/// fine rows each coarse dof may touch; rows fitting worse than `eps_fit`
/// grow by the nearest coarse dofs while the pattern is small enough.
pub fn ls_fit_prolongation(
    psi_fine: &[Vec<f64>],
    psi_coarse: &[Vec<f64>],
    pattern: &SupportSet,
    growth: Option<PatternGrowth<'_>>,
    opts: &LsFitOptions,
) -> Result<LsFit> {
    if psi_fine.len() != psi_coarse.len() || psi_fine.is_empty() {
        return Err(AmgError::Dimension(format!(
            "{} fine and {} coarse test vectors",
            psi_fine.len(),
            psi_coarse.len()
        )));
    }
    let n = pattern.n_fine();
    let n_c = pattern.len();
    if psi_fine.iter().any(|v| v.len() != n) || psi_coarse.iter().any(|v| v.len() != n_c) {
        return Err(AmgError::Dimension(format!(
            "test vectors do not match a {n} x {n_c} pattern"
        )));
    }
    let coarse_of = growth.map(|gr| {
        let mut c = vec![None; gr.graph.n_vertices()];
        for (k, &v) in gr.coarse_points.iter().enumerate() {
            c[v] = Some(k);
        }
        c
    });
    let rows = pattern.membership();
    let fitted: Vec<(Vec<usize>, RowFit)> = rows
        .into_par_iter()
        .enumerate()
        .map(|(i, mut cols)| {
            let mut fit = fit_row(psi_fine, psi_coarse, i, &cols);
            while fit.residual > opts.eps_fit && cols.len() <= opts.s_max {
                let (Some(gr), Some(coarse_of)) = (growth, coarse_of.as_ref()) else {
                    break;
                };
                let layer = nearest_coarse_layer(gr.graph, coarse_of, i, &cols);
                if layer.is_empty() {
                    break;
                }
                cols.extend(layer);
                cols.sort_unstable();
                fit = fit_row(psi_fine, psi_coarse, i, &cols);
            }
            (cols, fit)
        })
        .collect();
    let mut e = Vec::new();
    let mut residuals = Vec::with_capacity(n);
    let mut rank_deficient = Vec::new();
    let mut pattern_sizes = Vec::with_capacity(n);
    for (i, (cols, fit)) in fitted.into_iter().enumerate() {
        if cols.is_empty() && fit.residual > 0.0 {
            return Err(AmgError::EmptyRow(i));
        }
        for (&c, &w) in cols.iter().zip(&fit.weights) {
            if w.abs() > opts.eps_p {
                e.push((i, c, w));
            }
        }
        if fit.deficient {
            rank_deficient.push(i);
        }
        residuals.push(fit.residual);
        pattern_sizes.push(cols.len());
    }
    Ok(LsFit {
        prolongation: Prolongation {
            p: CsrMatrix::from_triplets(n, n_c, &e)?,
            builder: BuilderTag::LeastSquares,
            preserved: None,
        },
        residuals,
        rank_deficient,
        pattern_sizes,
    })
}

/// Rescale to unit root-mean-square so no vector dominates a fit by size.
fn normalize(v: &mut [f64]) {
    let rms = (dot(v, v) / v.len().max(1) as f64).sqrt();
    if rms > 0.0 {
        v.iter_mut().for_each(|x| *x /= rms);
    }
}

/// One stationary step x <- (I - BA) x.
enum Relaxer<'a> {
    Smoother(&'a Smoother),
    Cycle(&'a Hierarchy),
}

impl Relaxer<'_> {
    fn step(&self, a: &CsrMatrix, x: &mut [f64]) {
        match self {
            Relaxer::Smoother(s) => {
                let zero = vec![0.0; x.len()];
                s.sweep(&zero, x);
            }
            Relaxer::Cycle(h) => {
                let c = h.apply(&a.mul_vec(x));
                x.iter_mut().zip(&c).for_each(|(xi, ci)| *xi -= ci);
            }
        }
    }
}

/// Apply q relaxation steps to each vector. Returns the largest A-norm
/// reduction ||psi||_A / ||psi_hat||_A and the relaxed vectors.
fn relax_all(a: &CsrMatrix, relaxer: &Relaxer<'_>, vectors: &[Vec<f64>], q: usize) -> (f64, Vec<Vec<f64>>) {
    let out: Vec<(f64, Vec<f64>)> = vectors
        .par_iter()
        .map(|v| {
            let before = energy(a, v);
            let mut x = v.clone();
            for _ in 0..q {
                relaxer.step(a, &mut x);
            }
            let after = energy(a, &x).max(0.0);
            let ratio = if before > 0.0 { (after / before).sqrt() } else { 0.0 };
            (ratio, x)
        })
        .collect();
    let delta = out.iter().map(|(r, _)| *r).fold(0.0, f64::max);
    (delta, out.into_iter().map(|(_, x)| x).collect())
}

/// Seeded uniform(-1,1) vectors, A-orthogonalised against `against`.
pub fn random_test_vectors(a: &CsrMatrix, m: usize, seed: u64, against: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.n_rows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // A-orthonormal basis of the accepted candidates
    let mut basis: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for z in against {
        let mut z = z.clone();
        for (b, ab) in &basis {
            let c = dot(ab, &z);
            z.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
        let az = a.mul_vec(&z);
        let e = dot(&az, &z);
        if e > 1e-14 * dot(&z, &z) {
            let s = e.sqrt();
            basis.push((z.iter().map(|x| x / s).collect(), az.iter().map(|x| x / s).collect()));
        }
    }
    (0..m)
        .map(|_| {
            let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            for (b, ab) in &basis {
                let c = dot(ab, &v);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
            normalize(&mut v);
            v
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct BootstrapParams {
    pub m0: usize,
    pub q: usize,
    /// Levels with at most n0 unknowns are solved directly.
    pub n0: usize,
    pub delta0: f64,
    pub max_rounds: usize,
    pub max_levels: usize,
    /// Eigenvector approximations added to the test set per round.
    pub l_e: usize,
    pub mge_sweeps: usize,
    pub mode: RestrictMode,
    pub strength: StrengthConfig,
    pub fit: LsFitOptions,
    /// Local basis size per aggregate in block mode.
    pub block_rank: usize,
    pub presmooth: usize,
    pub postsmooth: usize,
    pub seed: u64,
}

impl Default for BootstrapParams {
    fn default() -> Self {
        BootstrapParams {
            m0: 8,
            q: 4,
            n0: 50,
            delta0: 0.7,
            max_rounds: 3,
            max_levels: 25,
            l_e: 2,
            mge_sweeps: 2,
            mode: RestrictMode::Evaluation,
            strength: StrengthConfig::default(),
            fit: LsFitOptions::default(),
            block_rank: 1,
            presmooth: 1,
            postsmooth: 1,
            seed: 0,
        }
    }
}

impl BootstrapParams {
    pub fn validate(&self) -> Result<()> {
        if self.m0 == 0 || self.q == 0 {
            return Err(AmgError::Config("m0 and q must be at least 1".into()));
        }
        if !(self.delta0 > 0.0 && self.delta0 < 1.0) {
            return Err(AmgError::Config(format!("delta0 = {} is not in (0, 1)", self.delta0)));
        }
        if self.max_rounds == 0 || self.max_levels == 0 {
            return Err(AmgError::Config("max_rounds and max_levels must be at least 1".into()));
        }
        if self.block_rank == 0 {
            return Err(AmgError::Config("block_rank must be at least 1".into()));
        }
        self.strength.validate()
    }
}

#[derive(Clone, Debug)]
struct AggregationLevels {
    /// Node aggregates on each non-coarsest level.
    nodes: Vec<AggregatePartition>,
    /// Dofs per node on each level.
    blocks: Vec<usize>,
    sa_nu: usize,
    sa_omega: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct AdaptiveState {
    pub hierarchy: Hierarchy,
    /// Test vectors per level, finest first.
    pub test_vectors: Vec<TestVectorSet>,
    /// Measured reduction of the current hierarchy on the probe vectors.
    pub delta: f64,
    pub round: usize,
    /// delta after each round; it never increases.
    pub history: Vec<f64>,
    /// Rounds whose rebuilt hierarchy was not adopted.
    pub rejected_rounds: Vec<usize>,
    pub converged: bool,
    pub smoother: SmootherSpec,
    pub mode: RestrictMode,
    /// Fixed vectors every delta is measured on, so rounds are comparable.
    pub probes: Vec<Vec<f64>>,
    pub q: usize,
    pub delta0: f64,
    aggregation: Option<AggregationLevels>,
}

impl AdaptiveState {
    fn measure(&self, h: &Hierarchy) -> f64 {
        relax_all(h.finest(), &Relaxer::Cycle(h), &self.probes, self.q).0
    }
}

fn check_operator(a: &CsrMatrix) -> Result<()> {
    if !a.is_square() {
        return Err(AmgError::Dimension(format!("{}x{} matrix", a.n_rows(), a.n_cols())));
    }
    if let Some((row, col)) = a.check_symmetric() {
        return Err(AmgError::NotSymmetric { row, col });
    }
    if let Some(i) = a.diagonal().iter().position(|&d| d <= 0.0) {
        return Err(AmgError::NonPositiveDiagonal(i));
    }
    Ok(())
}

/// C/F split on the strength graph, coarse values by evaluation at C points
/// and P fitted by least squares on the strong-C pattern.
fn evaluation_level(a: &CsrMatrix, psi: &[Vec<f64>], params: &BootstrapParams) -> Result<(Prolongation, Vec<Vec<f64>>)> {
    let n = a.n_rows();
    let s = strength_matrix(a, &params.strength)?;
    let split = mis(&s, &natural_order(n));
    let cpts = split.coarse_points();
    let cidx = split.coarse_index();
    let mut supports = vec![Vec::new(); cpts.len()];
    for i in 0..n {
        match cidx[i] {
            Some(c) => supports[c].push(i),
            None => {
                for &j in s.neighbors(i) {
                    if let Some(c) = cidx[j] {
                        supports[c].push(i);
                    }
                }
            }
        }
    }
    let pattern = SupportSet::new(n, supports)?;
    let psi_c: Vec<Vec<f64>> = psi.iter().map(|v| cpts.iter().map(|&c| v[c]).collect()).collect();
    let g = adjacency_graph(a)?;
    let fit = ls_fit_prolongation(
        psi,
        &psi_c,
        &pattern,
        Some(PatternGrowth {
            graph: &g,
            coarse_points: &cpts,
        }),
        &params.fit,
    )?;
    Ok((fit.prolongation, psi_c))
}

/// Aggregates on the strength graph; each aggregate contributes the leading
/// left singular vectors of its block of test vectors, and the coarse test
/// vectors are the matching coefficients, so P Psi_c is the local
/// projection of Psi.
fn block_level(a: &CsrMatrix, psi: &[Vec<f64>], params: &BootstrapParams) -> Result<(Prolongation, Vec<Vec<f64>>)> {
    let n = a.n_rows();
    let s = strength_matrix(a, &params.strength)?;
    let part = greedy_aggregate(&s);
    let m = psi.len();
    let mut e = Vec::new();
    let mut coeffs: Vec<Vec<f64>> = vec![Vec::new(); m];
    let mut col = 0;
    for verts in part.members() {
        let block = DMatrix::from_fn(verts.len(), m, |r, j| psi[j][verts[r]]);
        let svd = block.svd(true, true);
        let u = svd.u.as_ref().expect("u computed");
        let vt = svd.v_t.as_ref().expect("v_t computed");
        let top = svd.singular_values.max();
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&x, &y| svd.singular_values[y].total_cmp(&svd.singular_values[x]));
        let kept: Vec<usize> = order
            .into_iter()
            .filter(|&t| top > 0.0 && svd.singular_values[t] > 1e-10 * top)
            .take(params.block_rank)
            .collect();
        if kept.is_empty() {
            let w = 1.0 / (verts.len() as f64).sqrt();
            for &v in &verts {
                e.push((v, col, w));
            }
            coeffs.iter_mut().for_each(|c| c.push(0.0));
            col += 1;
            continue;
        }
        for t in kept {
            let ucol = u.column(t);
            let peak = ucol.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
            let sign = if peak < 0.0 { -1.0 } else { 1.0 };
            for (r, &v) in verts.iter().enumerate() {
                e.push((v, col, sign * ucol[r]));
            }
            for (j, c) in coeffs.iter_mut().enumerate() {
                c.push(sign * svd.singular_values[t] * vt[(t, j)]);
            }
            col += 1;
        }
    }
    let p = Prolongation {
        p: CsrMatrix::from_triplets(n, col, &e)?,
        builder: BuilderTag::Ua,
        preserved: None,
    };
    Ok((p, coeffs))
}

/// Steps 2 and 3: relax and coarsen level by level, then assemble the
/// V-cycle. The smoother-only stopping test applies on coarse levels,
/// where stopping means a direct solve.
fn build_levels(
    a: &CsrMatrix,
    smoother: &SmootherSpec,
    test: Vec<Vec<f64>>,
    params: &BootstrapParams,
) -> Result<(Hierarchy, Vec<TestVectorSet>)> {
    let mut ps = Vec::new();
    let mut sets = Vec::new();
    let mut current = Arc::new(a.clone());
    let mut psi = test;
    loop {
        let n = current.n_rows();
        if n <= params.n0 || ps.len() + 1 >= params.max_levels {
            break;
        }
        let sm = smoother.build(current.clone())?;
        let (delta, mut relaxed) = relax_all(&current, &Relaxer::Smoother(&sm), &psi, params.q);
        relaxed.iter_mut().for_each(|v| normalize(v));
        psi = relaxed;
        if !ps.is_empty() && delta <= params.delta0 && n <= COARSE_DENSE_CAP {
            break;
        }
        let (p, psi_c) = match params.mode {
            RestrictMode::Evaluation => evaluation_level(&current, &psi, params)?,
            RestrictMode::Block => block_level(&current, &psi, params)?,
        };
        let n_coarse = p.n_coarse();
        if n_coarse == 0 || n_coarse as f64 >= 0.95 * n as f64 {
            return Err(AmgError::Stagnation {
                level: ps.len(),
                n,
                n_coarse,
            });
        }
        let mut set = TestVectorSet::new(psi)?;
        set.record(&current);
        sets.push(set);
        current = Arc::new(galerkin_product(&p.p, &current)?);
        ps.push(p);
        // coarse test vectors can vanish identically (block mode on a
        // degenerate aggregate); keep the ones that carry information
        psi = psi_c.into_iter().filter(|v| v.iter().any(|&x| x != 0.0)).collect();
        if psi.is_empty() {
            break;
        }
    }
    if !psi.is_empty() {
        let mut set = TestVectorSet::new(psi)?;
        set.record(&current);
        sets.push(set);
    }
    let h = Hierarchy::from_prolongations(a, ps, smoother, params.presmooth, params.postsmooth)?;
    Ok((h, sets))
}

/// The generic adaptive setup with least-squares or block interpolation and
/// multigrid-eigensolver updates of the test set. Each delta is measured on
/// a fixed set of relaxed random probes; a rebuilt hierarchy is adopted
/// only if it does not raise delta.
pub fn bootstrap_setup(
    a: &CsrMatrix,
    smoother: &SmootherSpec,
    params: &BootstrapParams,
) -> Result<(Hierarchy, AdaptiveState)> {
    params.validate()?;
    check_operator(a)?;
    let n = a.n_rows();
    let mut psi = random_test_vectors(a, params.m0, params.seed, &[]);
    let blank = |hierarchy: Hierarchy, test_vectors: Vec<TestVectorSet>, probes: Vec<Vec<f64>>| AdaptiveState {
        hierarchy,
        test_vectors,
        delta: 0.0,
        round: 1,
        history: Vec::new(),
        rejected_rounds: Vec::new(),
        converged: false,
        smoother: smoother.clone(),
        mode: params.mode,
        probes,
        q: params.q,
        delta0: params.delta0,
        aggregation: None,
    };
    if n <= params.n0 {
        let h = Hierarchy::from_prolongations(a, Vec::new(), smoother, params.presmooth, params.postsmooth)?;
        let mut state = blank(h, vec![TestVectorSet::new(psi)?], Vec::new());
        state.history.push(0.0);
        state.converged = true;
        return Ok((state.hierarchy.clone(), state));
    }
    // probes start from relaxed random vectors: raw random vectors are
    // dominated by oscillatory error any smoother removes
    let fine_smoother = smoother.build(Arc::new(a.clone()))?;
    let (_, mut warm) = relax_all(a, &Relaxer::Smoother(&fine_smoother), &psi, params.q);
    warm.iter_mut().for_each(|v| normalize(v));
    psi = warm;
    let probes = psi.clone();

    let (h, sets) = build_levels(a, smoother, psi, params)?;
    let mut state = blank(h, sets, probes);
    state.delta = state.measure(&state.hierarchy);
    state.history.push(state.delta);
    while state.delta > params.delta0 && state.round < params.max_rounds {
        state.round += 1;
        let (_, mut relaxed) = relax_all(
            a,
            &Relaxer::Cycle(&state.hierarchy),
            state.test_vectors[0].vectors(),
            params.q,
        );
        let coarsest = state.hierarchy.levels.last().expect("nonempty").a.n_rows();
        if params.l_e > 0 {
            for pair in mge_eigensolve(&state.hierarchy, params.l_e.min(coarsest), params.mge_sweeps)? {
                relaxed.push(pair.vector);
            }
        }
        relaxed.retain(|v| v.iter().any(|&x| x != 0.0));
        relaxed.iter_mut().for_each(|v| normalize(v));
        match build_levels(a, smoother, relaxed.clone(), params) {
            Ok((h, sets)) => {
                let delta = state.measure(&h);
                if delta <= state.delta {
                    state.hierarchy = h;
                    state.test_vectors = sets;
                    state.delta = delta;
                } else {
                    state.rejected_rounds.push(state.round);
                    state.test_vectors[0] = TestVectorSet::new(relaxed)?;
                }
            }
            Err(_) => {
                state.rejected_rounds.push(state.round);
                state.test_vectors[0] = TestVectorSet::new(relaxed)?;
            }
        }
        state.history.push(state.delta);
    }
    state.converged = state.delta <= params.delta0;
    Ok((state.hierarchy.clone(), state))
}

#[derive(Clone, Debug, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
}

fn relax_shifted(c: &CsrMatrix, x: &mut [f64]) {
    // forward Gauss-Seidel on C w = 0; rows with a nonpositive shifted
    // diagonal are left alone
    for i in 0..c.n_rows() {
        let mut diag = 0.0;
        let mut sum = 0.0;
        for (j, v) in c.row_iter(i) {
            if j == i {
                diag = v;
            }
            sum += v * x[j];
        }
        if diag > 0.0 {
            x[i] -= sum / diag;
        }
    }
}

/// Approximate the l_e lowest eigenpairs of the finest matrix: a dense
/// solve of A_J phi = lambda M_J phi on the coarsest level, then on each
/// finer level interpolation, `sweeps` relaxations of (A - mu M) w = 0 and
/// a Rayleigh-quotient update.
pub fn mge_eigensolve(h: &Hierarchy, l_e: usize, sweeps: usize) -> Result<Vec<EigenPair>> {
    let nl = h.n_levels();
    let coarsest = &h.levels[nl - 1].a;
    if l_e == 0 || l_e > coarsest.n_rows() {
        return Err(AmgError::InvalidArgument(format!(
            "{l_e} eigenpairs requested from a coarsest level of size {}",
            coarsest.n_rows()
        )));
    }
    let mut mass = vec![CsrMatrix::identity(h.levels[0].a.n_rows())];
    for k in 0..nl - 1 {
        let p = &h.levels[k].p.as_ref().expect("non-coarsest level has P").p;
        mass.push(galerkin_product(p, &mass[k])?);
    }
    let eig = sym_eigen_generalized(&coarsest.to_dense(), &mass[nl - 1].to_dense())?;
    let mut pairs: Vec<EigenPair> = (0..l_e)
        .map(|k| EigenPair {
            value: eig.values[k],
            vector: eig.vectors.column(k).iter().copied().collect(),
        })
        .collect();
    for k in (0..nl - 1).rev() {
        let a = &h.levels[k].a;
        let m = &mass[k];
        let p = &h.levels[k].p.as_ref().expect("non-coarsest level has P").p;
        for pair in &mut pairs {
            let mut phi = p.mul_vec(&pair.vector);
            let c = a.add_scaled(1.0, m, -pair.value)?;
            for _ in 0..sweeps {
                relax_shifted(&c, &mut phi);
            }
            let den = energy(m, &phi);
            if den <= 0.0 {
                return Err(AmgError::Breakdown(format!("eigenvector vanished on level {k}")));
            }
            pair.value = energy(a, &phi) / den;
            pair.vector = phi;
        }
    }
    Ok(pairs)
}

#[derive(Clone, Debug)]
pub struct AsaParams {
    pub q: usize,
    pub delta0: f64,
    /// Prolongation smoothing steps; 0 gives unsmoothed aggregation.
    pub sa_nu: usize,
    pub sa_omega: Option<f64>,
    pub strength: StrengthConfig,
    /// Interleaved dofs per node on the finest level.
    pub block_size: usize,
    pub max_coarse: usize,
    pub max_levels: usize,
    pub n_probes: usize,
    pub presmooth: usize,
    pub postsmooth: usize,
    pub seed: u64,
}

impl Default for AsaParams {
    fn default() -> Self {
        AsaParams {
            q: 4,
            delta0: 0.7,
            sa_nu: 1,
            sa_omega: None,
            strength: StrengthConfig::default(),
            block_size: 1,
            max_coarse: 50,
            max_levels: 25,
            n_probes: 4,
            presmooth: 1,
            postsmooth: 1,
            seed: 0,
        }
    }
}

fn coarse_block_vectors(n_aggregates: usize, k: usize) -> Vec<Vec<f64>> {
    (0..k)
        .map(|j| (0..n_aggregates * k).map(|c| if c % k == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

fn asa_prolongation(
    a: &CsrMatrix,
    nodes: &AggregatePartition,
    block: usize,
    psi: &[Vec<f64>],
    nu: usize,
    omega: Option<f64>,
) -> Result<Prolongation> {
    let part = if block == 1 { nodes.clone() } else { expand_partition(nodes, block) };
    if part.n_vertices() != a.n_rows() {
        return Err(AmgError::Dimension(format!(
            "{} dofs in the aggregates for a level of size {}",
            part.n_vertices(),
            a.n_rows()
        )));
    }
    let tent = ua_prolongation(&part, Some(psi))?;
    if nu == 0 {
        Ok(tent)
    } else {
        sa_prolongation(&tent, a, nu, omega)
    }
}

/// Aggregation hierarchy reproducing the given vectors, ready for
/// `asa_add_vector`.
pub fn asa_setup(
    a: &CsrMatrix,
    smoother: &SmootherSpec,
    vectors: Vec<Vec<f64>>,
    params: &AsaParams,
) -> Result<AdaptiveState> {
    check_operator(a)?;
    params.strength.validate()?;
    let first = TestVectorSet::new(vectors)?;
    if first.n() != a.n_rows() {
        return Err(AmgError::Dimension(format!("test vectors of length {} for n = {}", first.n(), a.n_rows())));
    }
    let mut sets = vec![first];
    let mut nodes = Vec::new();
    let mut blocks = vec![params.block_size];
    let mut ps = Vec::new();
    let mut current = Arc::new(a.clone());
    while current.n_rows() > params.max_coarse && ps.len() + 1 < params.max_levels {
        let n = current.n_rows();
        let block = *blocks.last().expect("nonempty");
        if n % block != 0 {
            return Err(AmgError::Dimension(format!("{n} dofs are not a multiple of block {block}")));
        }
        let s = strength_matrix(&current, &params.strength)?;
        let node_part = greedy_aggregate(&node_graph(&s, block)?);
        let psi = sets.last().expect("nonempty").vectors().to_vec();
        let p = asa_prolongation(&current, &node_part, block, &psi, params.sa_nu, params.sa_omega)?;
        let n_coarse = p.n_coarse();
        if n_coarse as f64 >= 0.95 * n as f64 {
            return Err(AmgError::Stagnation {
                level: ps.len(),
                n,
                n_coarse,
            });
        }
        current = Arc::new(galerkin_product(&p.p, &current)?);
        sets.push(TestVectorSet::new(coarse_block_vectors(node_part.n_aggregates(), psi.len()))?);
        blocks.push(psi.len());
        nodes.push(node_part);
        ps.push(p);
    }
    let hierarchy = Hierarchy::from_prolongations(a, ps, smoother, params.presmooth, params.postsmooth)?;
    let fine_smoother = smoother.build(Arc::new(a.clone()))?;
    let raw = random_test_vectors(a, params.n_probes.max(1), params.seed, sets[0].vectors());
    let (_, mut probes) = relax_all(a, &Relaxer::Smoother(&fine_smoother), &raw, params.q);
    probes.iter_mut().for_each(|v| normalize(v));
    let mut state = AdaptiveState {
        hierarchy,
        test_vectors: sets,
        delta: 0.0,
        round: 1,
        history: Vec::new(),
        rejected_rounds: Vec::new(),
        converged: false,
        smoother: smoother.clone(),
        mode: RestrictMode::Block,
        probes,
        q: params.q,
        delta0: params.delta0,
        aggregation: Some(AggregationLevels {
            nodes,
            blocks,
            sa_nu: params.sa_nu,
            sa_omega: params.sa_omega,
        }),
    };
    state.delta = state.measure(&state.hierarchy);
    state.history.push(state.delta);
    state.converged = state.delta <= state.delta0;
    Ok(state)
}

#[derive(Clone, Debug, PartialEq)]
pub enum AddOutcome {
    Accepted {
        /// Levels whose prolongation was widened; the next one is bridged.
        levels_rebuilt: usize,
        delta: f64,
    },
    /// The vector adds nothing on some aggregate; the state is unchanged.
    Rejected { reason: String },
}

/// Append psi to the finest test vectors and widen the prolongations level
/// by level. After each widened level a bridge from the old coarser
/// hierarchy is tried on the new coarse vector, and the update stops as
/// soon as that hierarchy reduces it by delta0 per cycle.
pub fn asa_add_vector(state: &mut AdaptiveState, psi: &[f64]) -> Result<AddOutcome> {
    let mut agg = state
        .aggregation
        .clone()
        .ok_or_else(|| AmgError::InvalidArgument("state was not built by asa_setup".into()))?;
    let fine = state.hierarchy.finest().clone();
    let nl = state.hierarchy.n_levels();
    let old_ps: Vec<Prolongation> = state.hierarchy.levels[..nl - 1]
        .iter()
        .map(|l| l.p.clone().expect("non-coarsest level has P"))
        .collect();
    let mut sets = state.test_vectors.clone();
    sets[0].push(psi.to_vec())?;
    let mut new_ps: Vec<Prolongation> = Vec::new();
    let mut bridge: Option<Prolongation> = None;
    let mut current = Arc::new(fine.clone());
    let q = state.q as f64;
    for l in 0..nl - 1 {
        let p = match asa_prolongation(
            &current,
            &agg.nodes[l],
            agg.blocks[l],
            sets[l].vectors(),
            agg.sa_nu,
            agg.sa_omega,
        ) {
            Ok(p) => p,
            Err(e) if l == 0 => return Ok(AddOutcome::Rejected { reason: e.to_string() }),
            // a coarse level cannot carry the relaxed vector: keep the bridge
            Err(_) => break,
        };
        let k = sets[l].len();
        let coarse = Arc::new(galerkin_product(&p.p, &current)?);
        new_ps.push(p);
        bridge = None;
        let mut coarse_set = TestVectorSet::new(coarse_block_vectors(agg.nodes[l].n_aggregates(), k))?;
        agg.blocks[l + 1] = k;
        if l + 2 < nl {
            let old_cols = &coarse_set.vectors()[..k - 1];
            let b = asa_prolongation(&coarse, &agg.nodes[l + 1], k, old_cols, agg.sa_nu, agg.sa_omega)?;
            let mut chain = vec![b.clone()];
            chain.extend(old_ps[l + 2..].iter().cloned());
            let sub = Hierarchy::from_prolongations(&coarse, chain, &state.smoother, state.hierarchy.presmooth, state.hierarchy.postsmooth)?;
            let newest = coarse_set.vectors()[k - 1].clone();
            let before = energy(&coarse, &newest);
            let (_, relaxed) = relax_all(&coarse, &Relaxer::Cycle(&sub), &[newest], state.q);
            let after = energy(&coarse, &relaxed[0]);
            let factor = if before > 0.0 { (after / before).powf(1.0 / q) } else { 0.0 };
            bridge = Some(b);
            let mut replaced: Vec<Vec<f64>> = coarse_set.vectors()[..k - 1].to_vec();
            if factor <= state.delta0 {
                sets[l + 1] = coarse_set;
                break;
            }
            let mut v = relaxed.into_iter().next().expect("one vector");
            normalize(&mut v);
            replaced.push(v);
            coarse_set = TestVectorSet::new(replaced)?;
        }
        sets[l + 1] = coarse_set;
        current = coarse;
    }
    let rebuilt = new_ps.len();
    let mut chain = new_ps;
    if let Some(b) = bridge {
        chain.push(b);
        chain.extend(old_ps[rebuilt + 1..].iter().cloned());
        // levels below the bridge keep their old block sizes
        for l in rebuilt + 1..agg.blocks.len() {
            agg.blocks[l] = state.aggregation.as_ref().expect("checked").blocks[l];
        }
    }
    let h = Hierarchy::from_prolongations(
        &fine,
        chain,
        &state.smoother,
        state.hierarchy.presmooth,
        state.hierarchy.postsmooth,
    )?;
    let delta = state.measure(&h);
    state.hierarchy = h;
    state.test_vectors = sets;
    state.aggregation = Some(agg);
    state.delta = delta;
    state.round += 1;
    state.history.push(delta);
    state.converged = delta <= state.delta0;
    Ok(AddOutcome::Accepted {
        levels_rebuilt: rebuilt,
        delta,
    })
}
