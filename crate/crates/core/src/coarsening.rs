//! Coarse degrees of freedom from a strength graph: C/F splittings,
//! aggregates, aggressive coarsening and compatible-relaxation refinement.

use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{AmgError, Result};
use crate::smoothers::SmootherSpec;
use crate::sparse::{adjacency_graph, dot, galerkin_product, CsrMatrix, Graph};
use crate::strength::{strength_power, StrengthVariant};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PointType {
    Coarse,
    Fine,
}

/// Classification of every vertex as coarse or fine.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CfSplitting {
    types: Vec<PointType>,
}

impl CfSplitting {
    pub fn from_coarse(n: usize, coarse: &[usize]) -> Result<Self> {
        let mut types = vec![PointType::Fine; n];
        for &c in coarse {
            if c >= n {
                return Err(AmgError::InvalidArgument(format!("coarse point {c} outside 0..{n}")));
            }
            types[c] = PointType::Coarse;
        }
        Ok(CfSplitting { types })
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn point_type(&self, i: usize) -> PointType {
        self.types[i]
    }

    pub fn is_coarse(&self, i: usize) -> bool {
        self.types[i] == PointType::Coarse
    }

    pub fn coarse_points(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.is_coarse(i)).collect()
    }

    pub fn fine_points(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.is_coarse(i)).collect()
    }

    pub fn n_coarse(&self) -> usize {
        self.types.iter().filter(|&&t| t == PointType::Coarse).count()
    }

    /// Coarse column index of each vertex (coarse points numbered in
    /// ascending order), `None` for fine points.
    pub fn coarse_index(&self) -> Vec<Option<usize>> {
        let mut next = 0;
        self.types
            .iter()
            .map(|&t| {
                (t == PointType::Coarse).then(|| {
                    next += 1;
                    next - 1
                })
            })
            .collect()
    }

    /// No edge of `g` joins two coarse points.
    pub fn is_independent(&self, g: &Graph) -> bool {
        g.edges().all(|(u, v)| !(self.is_coarse(u) && self.is_coarse(v)))
    }

    /// Every fine point has a coarse neighbor in `g`.
    pub fn is_maximal(&self, g: &Graph) -> bool {
        (0..self.len())
            .filter(|&i| !self.is_coarse(i))
            .all(|i| g.neighbors(i).iter().any(|&j| self.is_coarse(j)))
    }
}

/// Disjoint cover of the vertices by aggregates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AggregatePartition {
    aggregate_of: Vec<usize>,
    n_aggregates: usize,
    /// Vertices that formed an aggregate alone because they had no neighbors.
    pub isolated: Vec<usize>,
}

impl AggregatePartition {
    pub fn new(aggregate_of: Vec<usize>) -> Result<Self> {
        let n_aggregates = aggregate_of.iter().map(|&a| a + 1).max().unwrap_or(0);
        let mut seen = vec![false; n_aggregates];
        aggregate_of.iter().for_each(|&a| seen[a] = true);
        if let Some(a) = seen.iter().position(|&s| !s) {
            return Err(AmgError::InvalidArgument(format!("aggregate {a} is empty")));
        }
        Ok(AggregatePartition {
            aggregate_of,
            n_aggregates,
            isolated: Vec::new(),
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.aggregate_of.len()
    }

    pub fn n_aggregates(&self) -> usize {
        self.n_aggregates
    }

    pub fn aggregate_of(&self, v: usize) -> usize {
        self.aggregate_of[v]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.aggregate_of
    }

    /// Vertex lists of each aggregate, ascending.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut m = vec![Vec::new(); self.n_aggregates];
        for (v, &a) in self.aggregate_of.iter().enumerate() {
            m[a].push(v);
        }
        m
    }

    /// Every aggregate induces a connected subgraph of `g`.
    pub fn is_connected_in(&self, g: &Graph) -> bool {
        self.members()
            .iter()
            .all(|verts| g.induced(verts).connected_components().0 == 1)
    }
}

/// Greedy maximal independent set. A vertex joins C when it and all its
/// neighbors are still unvisited; it and its neighbors are then marked. A
/// final pass in the same order adds any vertex still unvisited, which the
/// first rule can leave behind, so the result is always maximal.
pub fn mis(g: &Graph, order: &[usize]) -> CfSplitting {
    let n = g.n_vertices();
    let mut visited = vec![false; n];
    let mut types = vec![PointType::Fine; n];
    let mut take = |i: usize, visited: &mut Vec<bool>| {
        types[i] = PointType::Coarse;
        visited[i] = true;
        for &j in g.neighbors(i) {
            visited[j] = true;
        }
    };
    for &i in order {
        if !visited[i] && g.neighbors(i).iter().all(|&j| !visited[j]) {
            take(i, &mut visited);
        }
    }
    for &i in order {
        if !visited[i] {
            take(i, &mut visited);
        }
    }
    CfSplitting { types }
}

pub fn natural_order(n: usize) -> Vec<usize> {
    (0..n).collect()
}

/// Vertices by decreasing strong degree, ties by index.
pub fn order_by_strong_degree(g: &Graph) -> Vec<usize> {
    let mut order: Vec<usize> = (0..g.n_vertices()).collect();
    order.sort_by_key(|&v| std::cmp::Reverse(g.degree(v)));
    order
}

/// Greedy aggregation: roots whose whole neighborhood is free take it; the
/// leftovers join the smallest neighboring aggregate (ties to lowest id).
pub fn greedy_aggregate(g: &Graph) -> AggregatePartition {
    let n = g.n_vertices();
    let mut agg = vec![usize::MAX; n];
    let mut sizes: Vec<usize> = Vec::new();
    let mut isolated = Vec::new();
    for k in 0..n {
        if agg[k] == usize::MAX && g.neighbors(k).iter().all(|&j| agg[j] == usize::MAX) {
            let id = sizes.len();
            agg[k] = id;
            for &j in g.neighbors(k) {
                agg[j] = id;
            }
            sizes.push(1 + g.degree(k));
            if g.degree(k) == 0 {
                isolated.push(k);
            }
        }
    }
    for k in 0..n {
        if agg[k] != usize::MAX {
            continue;
        }
        let best = g
            .neighbors(k)
            .iter()
            .map(|&j| agg[j])
            .filter(|&a| a != usize::MAX)
            .min_by_key(|&a| (sizes[a], a))
            .expect("a leftover vertex always has an aggregated neighbor");
        agg[k] = best;
        sizes[best] += 1;
    }
    AggregatePartition {
        aggregate_of: agg,
        n_aggregates: sizes.len(),
        isolated,
    }
}

/// Piecewise-constant prolongation of a partition.
pub fn tentative_prolongation(p: &AggregatePartition) -> CsrMatrix {
    let e: Vec<_> = p.aggregate_of.iter().enumerate().map(|(v, &a)| (v, a, 1.0)).collect();
    CsrMatrix::from_triplets(p.n_vertices(), p.n_aggregates(), &e).expect("valid partition")
}

fn pair_score(a: &CsrMatrix, i: usize, j: usize) -> f64 {
    crate::strength::strength_value(a, i, j, StrengthVariant::PairLocalOpt)
        .map(|v| v.value)
        .unwrap_or(f64::NEG_INFINITY)
}

fn pairwise_pass(a: &CsrMatrix) -> Result<AggregatePartition> {
    let n = a.n_rows();
    if let Some(i) = a.diagonal().iter().position(|&d| d <= 0.0) {
        return Err(AmgError::NonPositiveDiagonal(i));
    }
    let g = adjacency_graph(a)?;
    let mut agg = vec![usize::MAX; n];
    let mut next = 0;
    let mut isolated = Vec::new();
    for i in 0..n {
        if agg[i] != usize::MAX {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for &j in g.neighbors(i) {
            if agg[j] != usize::MAX {
                continue;
            }
            let s = pair_score(a, i, j);
            if best.map_or(true, |(_, b)| s > b) {
                best = Some((j, s));
            }
        }
        agg[i] = next;
        match best {
            Some((j, _)) => agg[j] = next,
            None if g.degree(i) == 0 => isolated.push(i),
            None => {}
        }
        next += 1;
    }
    Ok(AggregatePartition {
        aggregate_of: agg,
        n_aggregates: next,
        isolated,
    })
}

/// Pairwise matching by the local-optimisation pair strength, repeated on
/// the Galerkin operator of the unsmoothed aggregation `passes` times.
pub fn pairwise_aggregate(a: &CsrMatrix, passes: usize) -> Result<AggregatePartition> {
    if !a.is_symmetric() {
        let (row, col) = a.check_symmetric().unwrap_or((0, 0));
        return Err(AmgError::NotSymmetric { row, col });
    }
    let mut total = pairwise_pass(a)?;
    let mut level = galerkin_product(&tentative_prolongation(&total), a)?;
    for _ in 1..passes {
        if total.n_aggregates() == level.n_rows() && level.n_rows() <= 1 {
            break;
        }
        let coarse = pairwise_pass(&level)?;
        if coarse.n_aggregates() == level.n_rows() {
            break;
        }
        let composed: Vec<usize> = total.aggregate_of.iter().map(|&c| coarse.aggregate_of[c]).collect();
        let isolated = total.isolated.clone();
        total = AggregatePartition {
            aggregate_of: composed,
            n_aggregates: coarse.n_aggregates(),
            isolated,
        };
        level = galerkin_product(&tentative_prolongation(&coarse), &level)?;
    }
    Ok(total)
}

/// Two-stage MIS: first on S, then among those coarse points on the graph
/// of (m, l) strong paths joined with S.
pub fn aggressive_coarsen(s: &Graph, m: u64, l: usize, order: &[usize]) -> Result<CfSplitting> {
    let first = mis(s, order);
    let wide = strength_power(s, m, l)?.union(s)?;
    let coarse = first.coarse_points();
    let sub = wide.induced(&coarse);
    let mut local = vec![usize::MAX; s.n_vertices()];
    for (k, &c) in coarse.iter().enumerate() {
        local[c] = k;
    }
    let sub_order: Vec<usize> = order
        .iter()
        .filter(|&&v| local[v] != usize::MAX)
        .map(|&v| local[v])
        .collect();
    let second = mis(&sub, &sub_order);
    let kept: Vec<usize> = second.coarse_points().iter().map(|&k| coarse[k]).collect();
    CfSplitting::from_coarse(s.n_vertices(), &kept)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrParams {
    pub delta_f: f64,
    pub theta_cr: f64,
    pub sweeps: usize,
    pub max_rounds: usize,
    pub seed: u64,
}

impl Default for CrParams {
    fn default() -> Self {
        CrParams {
            delta_f: 0.7,
            theta_cr: 0.5,
            sweeps: 4,
            max_rounds: 10,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CrOutcome {
    pub split: CfSplitting,
    /// Squared A-norm contraction of F-relaxation for `split`.
    pub rho_f: f64,
    pub rounds: usize,
    /// False when rounds ran out with rho_f still above delta_f.
    pub converged: bool,
}

/// Squared A_FF-norm of one F-relaxation sweep, from 10 power steps on
/// (I - R'A_FF)(I - R A_FF).
pub fn f_relaxation_rate(a: &CsrMatrix, smoother: &SmootherSpec, split: &CfSplitting, seed: u64) -> Result<f64> {
    let fine = split.fine_points();
    if fine.is_empty() {
        return Ok(0.0);
    }
    let aff = Arc::new(a.submatrix(&fine, &fine));
    let s = smoother.build(aff.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..fine.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let zero = vec![0.0; fine.len()];
    let mut rho = 0.0;
    for _ in 0..10 {
        let nv = dot(&aff.mul_vec(&v), &v);
        if nv <= 0.0 {
            return Ok(0.0);
        }
        let mut w = v.clone();
        s.sweep(&zero, &mut w);
        rho = dot(&aff.mul_vec(&w), &w) / nv;
        s.sweep_adjoint(&zero, &mut w);
        let scale = dot(&aff.mul_vec(&w), &w).sqrt();
        if scale == 0.0 {
            return Ok(rho);
        }
        v = w.into_iter().map(|x| x / scale).collect();
    }
    Ok(rho)
}

/// Compatible-relaxation refinement: while F-relaxation is slow, relax a
/// random F vector and promote an independent set of its large entries.
pub fn cr_refine(
    a: &CsrMatrix,
    s: &Graph,
    smoother: &SmootherSpec,
    split: &CfSplitting,
    params: &CrParams,
) -> Result<CrOutcome> {
    let mut current = split.clone();
    let mut rho = f_relaxation_rate(a, smoother, &current, params.seed)?;
    let mut best = (current.clone(), rho);
    let mut rounds = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ 0x9e37_79b9);
    while rho > params.delta_f && rounds < params.max_rounds {
        rounds += 1;
        let fine = current.fine_points();
        let aff = Arc::new(a.submatrix(&fine, &fine));
        let sm = smoother.build(aff)?;
        let v0: Vec<f64> = (0..fine.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v = sm.smooth_apply(&vec![0.0; fine.len()], &v0, params.sweeps)?;
        let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let candidates: Vec<usize> = fine
            .iter()
            .zip(&v)
            .filter(|(_, x)| x.abs() > params.theta_cr * vmax)
            .map(|(&i, _)| i)
            .collect();
        if candidates.is_empty() {
            break;
        }
        let sub = s.induced(&candidates);
        let pick = mis(&sub, &natural_order(candidates.len()));
        let mut coarse = current.coarse_points();
        coarse.extend(pick.coarse_points().iter().map(|&k| candidates[k]));
        current = CfSplitting::from_coarse(a.n_rows(), &coarse)?;
        rho = f_relaxation_rate(a, smoother, &current, params.seed)?;
        if rho < best.1 {
            best = (current.clone(), rho);
        }
    }
    let converged = best.1 <= params.delta_f;
    Ok(CrOutcome {
        split: best.0,
        rho_f: best.1,
        rounds,
        converged,
    })
}

/// Coarsening choice as read from config.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CoarseningKind {
    Mis,
    Aggregate,
    Pairwise { passes: usize },
    Aggressive { m: u64, l: usize },
}

impl FromStr for CoarseningKind {
    type Err = AmgError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mis" => Ok(CoarseningKind::Mis),
            "aggregate" => Ok(CoarseningKind::Aggregate),
            "pairwise" => Ok(CoarseningKind::Pairwise { passes: 2 }),
            "aggressive" => Ok(CoarseningKind::Aggressive { m: 1, l: 2 }),
            _ => Err(AmgError::Config(format!("unknown coarsening {s:?}"))),
        }
    }
}

impl CoarseningKind {
    pub fn name(&self) -> &'static str {
        match self {
            CoarseningKind::Mis => "mis",
            CoarseningKind::Aggregate => "aggregate",
            CoarseningKind::Pairwise { .. } => "pairwise",
            CoarseningKind::Aggressive { .. } => "aggressive",
        }
    }

    /// Whether this produces aggregates rather than a C/F splitting.
    pub fn is_aggregation(&self) -> bool {
        matches!(self, CoarseningKind::Aggregate | CoarseningKind::Pairwise { .. })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{fd_poisson_5pt, fe_anisotropic, laplacian_1d, Boundary};

    fn path(n: usize) -> Graph {
        let e: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
        Graph::from_edges(n, &e).unwrap()
    }

    #[test]
    fn mis_on_path_of_five() {
        assert_eq!(mis(&path(5), &natural_order(5)).coarse_points(), vec![0, 3]);
    }

    #[test]
    fn mis_cleanup_keeps_maximality() {
        let g = path(3);
        let s = mis(&g, &natural_order(3));
        assert_eq!(s.coarse_points(), vec![0, 2]);
        assert!(s.is_maximal(&g) && s.is_independent(&g));
    }

    #[test]
    fn mis_edgeless_is_everything() {
        let g = Graph::from_edges(4, &[]).unwrap();
        assert_eq!(mis(&g, &natural_order(4)).n_coarse(), 4);
    }

    #[test]
    fn mis_on_grid_is_independent_and_maximal() {
        let g = adjacency_graph(&fd_poisson_5pt(4, Boundary::Dirichlet).unwrap()).unwrap();
        let s = mis(&g, &natural_order(16));
        assert!(s.is_independent(&g) && s.is_maximal(&g));
    }

    #[test]
    fn greedy_aggregates_on_path() {
        let p = greedy_aggregate(&path(5));
        assert_eq!(p.members(), vec![vec![0, 1], vec![2, 3, 4]]);
    }

    #[test]
    fn greedy_complete_graph_single() {
        let mut e = Vec::new();
        for i in 0..5 {
            for j in i + 1..5 {
                e.push((i, j));
            }
        }
        let g = Graph::from_edges(5, &e).unwrap();
        assert_eq!(greedy_aggregate(&g).n_aggregates(), 1);
    }

    #[test]
    fn greedy_isolated_flagged() {
        let g = Graph::from_edges(3, &[(0, 1)]).unwrap();
        let p = greedy_aggregate(&g);
        assert_eq!(p.n_aggregates(), 2);
        assert_eq!(p.isolated, vec![2]);
    }

    #[test]
    fn greedy_grid_sizes() {
        let g = adjacency_graph(&fd_poisson_5pt(4, Boundary::Dirichlet).unwrap()).unwrap();
        let p = greedy_aggregate(&g);
        assert!(p.is_connected_in(&g));
        for m in p.members() {
            assert!((2..=9).contains(&m.len()), "size {}", m.len());
        }
    }

    #[test]
    fn pairwise_on_tridiagonal() {
        let p = pairwise_aggregate(&laplacian_1d(4).unwrap(), 1).unwrap();
        assert_eq!(p.members(), vec![vec![0, 1], vec![2, 3]]);
        let p = pairwise_aggregate(&laplacian_1d(8).unwrap(), 2).unwrap();
        assert_eq!(p.members(), vec![vec![0, 1, 2, 3], vec![4, 5, 6, 7]]);
        let p = pairwise_aggregate(&laplacian_1d(1).unwrap(), 3).unwrap();
        assert_eq!(p.n_aggregates(), 1);
    }

    #[test]
    fn aggressive_on_path_of_nine() {
        let g = path(9);
        let s = aggressive_coarsen(&g, 1, 2, &natural_order(9)).unwrap();
        assert_eq!(s.coarse_points(), vec![0, 3, 6]);
        let d = aggressive_coarsen(&g, 1, 1, &natural_order(9)).unwrap();
        assert_eq!(d, mis(&g, &natural_order(9)));
    }

    #[test]
    fn aggressive_grid_not_denser() {
        let g = adjacency_graph(&fd_poisson_5pt(8, Boundary::Dirichlet).unwrap()).unwrap();
        let order = natural_order(64);
        let agg = aggressive_coarsen(&g, 2, 2, &order).unwrap();
        assert!(agg.n_coarse() <= mis(&g, &order).n_coarse());
    }

    #[test]
    fn cr_perfect_split_needs_no_refinement() {
        let a = laplacian_1d(15).unwrap();
        let g = adjacency_graph(&a).unwrap();
        let split = CfSplitting::from_coarse(15, &(1..15).step_by(2).collect::<Vec<_>>()).unwrap();
        let out = cr_refine(&a, &g, &SmootherSpec::GaussSeidel(1.0), &split, &CrParams::default()).unwrap();
        assert!(out.rho_f <= 0.45);
        assert_eq!(out.rounds, 0);
        assert_eq!(out.split, split);
    }

    #[test]
    fn cr_from_empty_coarse_set() {
        let a = laplacian_1d(15).unwrap();
        let g = adjacency_graph(&a).unwrap();
        let split = CfSplitting::from_coarse(15, &[]).unwrap();
        let spec = SmootherSpec::GaussSeidel(1.0);
        let rho0 = f_relaxation_rate(&a, &spec, &split, 0).unwrap();
        // with no coarse points F-relaxation is plain relaxation; its squared
        // A-norm on smooth error is close to one
        let gs = spec.build(Arc::new(a.clone())).unwrap();
        let rbar = gs.dense_rbar().unwrap();
        let e = nalgebra::DMatrix::identity(15, 15) - rbar * a.to_dense();
        let exact = crate::dense::sym_eigen_generalized(
            &(a.to_dense() * &e),
            &a.to_dense(),
        )
        .unwrap()
        .values
        .last()
        .copied()
        .unwrap();
        assert!((rho0 - exact).abs() < 0.05, "{rho0} vs {exact}");
        let out = cr_refine(&a, &g, &spec, &split, &CrParams::default()).unwrap();
        assert!(out.rounds >= 1);
        assert!(out.split.n_coarse() > 0);
        assert!(out.rho_f < rho0);
    }

    #[test]
    fn cr_on_anisotropy_adds_points() {
        let n = 12;
        let a = fe_anisotropic(n, 1e-4, Boundary::Dirichlet).unwrap();
        let g = adjacency_graph(&a).unwrap();
        // coarsening across the weak direction leaves F-relaxation slow
        let rows: Vec<usize> = (0..n * n).filter(|i| (i / n) % 2 == 1).collect();
        let full = CfSplitting::from_coarse(n * n, &rows).unwrap();
        let spec = SmootherSpec::GaussSeidel(1.0);
        let before = f_relaxation_rate(&a, &spec, &full, 0).unwrap();
        let out = cr_refine(&a, &g, &spec, &full, &CrParams::default()).unwrap();
        assert!(before > 0.7);
        assert!(out.split.n_coarse() > full.n_coarse());
        assert!(out.rho_f < before);
    }
}
