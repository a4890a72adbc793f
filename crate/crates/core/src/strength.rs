//! Strength-of-connection measures and the boolean strength graph S.

use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{AmgError, Result};
use crate::smoothers::{Direction, Smoother};
use crate::sparse::{CsrMatrix, Graph};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StrengthVariant {
    /// -a_ij / min(max_{k!=i}(-a_ik), max_{k!=j}(-a_jk)); positive entries ignored.
    ClassicalSym,
    /// |a_ij| / min of the average off-diagonal magnitudes of rows i and j.
    AvgSym,
    /// |a_ij| / sqrt(a_ii a_jj).
    CauchyS1,
    /// -2 a_ij / (a_ii + a_jj).
    CauchyS2,
    /// (1 - s1^2) / (1 - s2), the local two-by-two optimum.
    PairLocalOpt,
    /// Algebraic distance from relaxed random vectors.
    Affinity { vectors: usize, sweeps: usize },
}

impl StrengthVariant {
    pub fn name(&self) -> &'static str {
        match self {
            StrengthVariant::ClassicalSym => "classical_sym",
            StrengthVariant::AvgSym => "avg_sym",
            StrengthVariant::CauchyS1 => "cauchy_s1",
            StrengthVariant::CauchyS2 => "cauchy_s2",
            StrengthVariant::PairLocalOpt => "pair_local_opt",
            StrengthVariant::Affinity { .. } => "affinity",
        }
    }
}

impl FromStr for StrengthVariant {
    type Err = AmgError;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "classical_sym" | "classical" => StrengthVariant::ClassicalSym,
            "avg_sym" => StrengthVariant::AvgSym,
            "cauchy_s1" => StrengthVariant::CauchyS1,
            "cauchy_s2" => StrengthVariant::CauchyS2,
            "pair_local_opt" => StrengthVariant::PairLocalOpt,
            "affinity" => StrengthVariant::Affinity {
                vectors: 8,
                sweeps: 4,
            },
            _ => return Err(AmgError::Config(format!("unknown strength variant {s:?}"))),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StrengthConfig {
    pub variant: StrengthVariant,
    pub theta: f64,
    /// Seed for the affinity test vectors.
    pub seed: u64,
}

impl Default for StrengthConfig {
    fn default() -> Self {
        StrengthConfig {
            variant: StrengthVariant::ClassicalSym,
            theta: 0.25,
            seed: 0,
        }
    }
}

impl StrengthConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(AmgError::InvalidArgument(format!(
                "theta must lie in (0, 1], got {}",
                self.theta
            )));
        }
        if let StrengthVariant::Affinity { vectors, sweeps } = self.variant {
            if vectors == 0 || sweeps == 0 {
                return Err(AmgError::InvalidArgument(
                    "affinity needs at least one vector and one sweep".into(),
                ));
            }
        }
        Ok(())
    }
}

/// A strength value; `degenerate` marks a zero returned because the
/// denominator vanished.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StrengthValue {
    pub value: f64,
    pub degenerate: bool,
}

struct RowStats {
    diag: Vec<f64>,
    max_neg: Vec<f64>,
    avg_abs: Vec<f64>,
}

impl RowStats {
    fn of(a: &CsrMatrix) -> Self {
        let n = a.n_rows();
        let mut diag = vec![0.0; n];
        let mut max_neg = vec![f64::NEG_INFINITY; n];
        let mut avg_abs = vec![0.0; n];
        for i in 0..n {
            let mut count = 0usize;
            for (j, v) in a.row_iter(i) {
                if j == i {
                    diag[i] = v;
                } else {
                    max_neg[i] = max_neg[i].max(-v);
                    avg_abs[i] += v.abs();
                    count += 1;
                }
            }
            if count > 0 {
                avg_abs[i] /= count as f64;
            }
        }
        RowStats {
            diag,
            max_neg,
            avg_abs,
        }
    }
}

fn pair_value(stats: &RowStats, i: usize, j: usize, aij: f64, variant: StrengthVariant) -> StrengthValue {
    let ok = |value: f64| StrengthValue {
        value,
        degenerate: false,
    };
    let flagged = StrengthValue {
        value: 0.0,
        degenerate: true,
    };
    match variant {
        StrengthVariant::ClassicalSym => {
            let den = stats.max_neg[i].min(stats.max_neg[j]);
            if den <= 0.0 {
                flagged
            } else if aij >= 0.0 {
                ok(0.0)
            } else {
                ok(-aij / den)
            }
        }
        StrengthVariant::AvgSym => {
            let den = stats.avg_abs[i].min(stats.avg_abs[j]);
            if den <= 0.0 {
                flagged
            } else {
                ok(aij.abs() / den)
            }
        }
        StrengthVariant::CauchyS1 => ok(aij.abs() / (stats.diag[i] * stats.diag[j]).sqrt()),
        StrengthVariant::CauchyS2 => ok(-2.0 * aij / (stats.diag[i] + stats.diag[j])),
        StrengthVariant::PairLocalOpt => {
            let s1 = aij.abs() / (stats.diag[i] * stats.diag[j]).sqrt();
            let s2 = -2.0 * aij / (stats.diag[i] + stats.diag[j]);
            if 1.0 - s2 <= 1e-14 {
                // the pair is (numerically) a kernel pair; use the bound's limit
                StrengthValue {
                    value: 1.0 + s1,
                    degenerate: true,
                }
            } else {
                ok((1.0 - s1 * s1) / (1.0 - s2))
            }
        }
        StrengthVariant::Affinity { .. } => unreachable!("affinity handled separately"),
    }
}

/// s_c(i, j) for one stored off-diagonal pair. Affinity needs test vectors
/// and is only available through [`strength_matrix`] or [`affinity_value`].
pub fn strength_value(a: &CsrMatrix, i: usize, j: usize, variant: StrengthVariant) -> Result<StrengthValue> {
    if i == j || i >= a.n_rows() || j >= a.n_rows() {
        return Err(AmgError::InvalidArgument(format!("bad pair ({i}, {j})")));
    }
    let aij = a.get(i, j);
    if aij == 0.0 {
        return Err(AmgError::InvalidArgument(format!("a[{i}][{j}] is not stored")));
    }
    if matches!(variant, StrengthVariant::Affinity { .. }) {
        return Err(AmgError::InvalidArgument(
            "affinity strength needs relaxed test vectors".into(),
        ));
    }
    // only rows i and j matter; compute their statistics locally
    let mut stats = RowStats {
        diag: vec![0.0; a.n_rows()],
        max_neg: vec![f64::NEG_INFINITY; a.n_rows()],
        avg_abs: vec![0.0; a.n_rows()],
    };
    for r in [i, j] {
        let mut count = 0;
        for (k, v) in a.row_iter(r) {
            if k == r {
                stats.diag[r] = v;
            } else {
                stats.max_neg[r] = stats.max_neg[r].max(-v);
                stats.avg_abs[r] += v.abs();
                count += 1;
            }
        }
        stats.avg_abs[r] /= count as f64;
    }
    Ok(pair_value(&stats, i, j, aij, variant))
}

/// K random vectors, uniform on (-1, 1), relaxed `sweeps` times by forward
/// Gauss-Seidel on Ax = 0. Returned as rows: `x[i]` holds the K values at i.
pub fn affinity_vectors(a: &CsrMatrix, vectors: usize, sweeps: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let n = a.n_rows();
    let gs = Smoother::gauss_seidel(Arc::new(a.clone()), Direction::Forward, 1.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zero = vec![0.0; n];
    let mut rows = vec![vec![0.0; vectors]; n];
    for k in 0..vectors {
        let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = gs.smooth_apply(&zero, &x0, sweeps)?;
        for i in 0..n {
            rows[i][k] = x[i];
        }
    }
    Ok(rows)
}

/// |(X_i, X_j)|^2 / ((X_i, X_i)(X_j, X_j)).
pub fn affinity_value(x: &[Vec<f64>], i: usize, j: usize) -> f64 {
    let d = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(a, b)| a * b).sum::<f64>();
    let (xi, xj) = (&x[i], &x[j]);
    let den = d(xi, xi) * d(xj, xj);
    if den == 0.0 {
        0.0
    } else {
        d(xi, xj).powi(2) / den
    }
}

/// Symmetric boolean strength graph plus setup diagnostics.
#[derive(Clone, Debug)]
pub struct StrengthMatrix {
    pub graph: Graph,
    /// Vertices left without any strong connection.
    pub isolated: Vec<usize>,
    /// Number of pairs whose value was flagged degenerate.
    pub degenerate_pairs: usize,
    /// Seed used for affinity vectors, if any.
    pub seed: Option<u64>,
}

impl std::ops::Deref for StrengthMatrix {
    type Target = Graph;
    fn deref(&self) -> &Graph {
        &self.graph
    }
}

impl StrengthMatrix {
    pub fn from_graph(graph: Graph) -> Self {
        let isolated = (0..graph.n_vertices()).filter(|&v| graph.degree(v) == 0).collect();
        StrengthMatrix {
            graph,
            isolated,
            degenerate_pairs: 0,
            seed: None,
        }
    }
}

/// Keep the off-diagonal pair (i, j) iff s_c(i, j) >= theta. Each value is
/// computed once per unordered pair, so S is exactly symmetric.
pub fn strength_matrix(a: &CsrMatrix, cfg: &StrengthConfig) -> Result<StrengthMatrix> {
    cfg.validate()?;
    if !a.is_symmetric() {
        let (row, col) = a.check_symmetric().unwrap_or((0, 0));
        return Err(AmgError::NotSymmetric { row, col });
    }
    let n = a.n_rows();
    let affinity = match cfg.variant {
        StrengthVariant::Affinity { vectors, sweeps } => {
            Some(affinity_vectors(a, vectors, sweeps, cfg.seed)?)
        }
        _ => None,
    };
    let stats = RowStats::of(a);
    let mut edges = Vec::new();
    let mut degenerate_pairs = 0;
    for i in 0..n {
        for (j, aij) in a.row_iter(i) {
            if j <= i {
                continue;
            }
            let v = match &affinity {
                Some(x) => StrengthValue {
                    value: affinity_value(x, i, j),
                    degenerate: false,
                },
                None => pair_value(&stats, i, j, aij, cfg.variant),
            };
            degenerate_pairs += v.degenerate as usize;
            if v.value >= cfg.theta {
                edges.push((i, j));
            }
        }
    }
    let mut s = StrengthMatrix::from_graph(Graph::from_edges(n, &edges)?);
    s.degenerate_pairs = degenerate_pairs;
    s.seed = affinity.as_ref().map(|_| cfg.seed);
    Ok(s)
}

/// Edge (i, j), i != j, iff at least `m` walks of exactly `l` strong edges
/// join i and j. Counts saturate at u64::MAX.
pub fn strength_power(s: &Graph, m: u64, l: usize) -> Result<Graph> {
    if m == 0 || l == 0 {
        return Err(AmgError::InvalidArgument("strength_power needs m >= 1 and l >= 1".into()));
    }
    let n = s.n_vertices();
    let mut lists = Vec::with_capacity(n);
    let mut count = vec![0u64; n];
    let mut next = vec![0u64; n];
    let mut touched: Vec<usize> = Vec::new();
    let mut frontier: Vec<usize> = Vec::new();
    for i in 0..n {
        // walk counts from i, one step at a time
        frontier.clear();
        frontier.push(i);
        count[i] = 1;
        for _ in 0..l {
            touched.clear();
            for &u in &frontier {
                let c = count[u];
                for &v in s.neighbors(u) {
                    if next[v] == 0 {
                        touched.push(v);
                    }
                    next[v] = next[v].saturating_add(c);
                }
            }
            for &u in &frontier {
                count[u] = 0;
            }
            for &v in &touched {
                count[v] = next[v];
                next[v] = 0;
            }
            std::mem::swap(&mut frontier, &mut touched);
        }
        let row: Vec<usize> = frontier.iter().copied().filter(|&j| j != i && count[j] >= m).collect();
        for &u in &frontier {
            count[u] = 0;
        }
        lists.push(row);
    }
    // walk counts are symmetric for an undirected graph, so rows agree
    Ok(Graph::from_lists(lists))
}
