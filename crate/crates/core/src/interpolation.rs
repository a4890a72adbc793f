//! Prolongations P built from a coarsening and A. Classical builders return
//! P = [W; I] permuted back to natural order; aggregation builders return
//! one column per aggregate (times preserved vectors).

use std::collections::BTreeMap;
use std::collections::VecDeque;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::coarsening::{AggregatePartition, CfSplitting};
use crate::dense::{check_cap, sym_eigen, sym_eigen_generalized};
use crate::error::{AmgError, Result};
use crate::problems::ElementAssembly;
use crate::smoothers::spectral_radius_dinv_a;
use crate::sparse::{conjugate_gradient, CsrMatrix, Graph};

/// Entries below this fraction of the row maximum are dropped after
/// standard and vector-preserving builds.
pub const TRUNCATION: f64 = 1e-3;

/// Ideal interpolation solves densely with A_FF and is limited to this many
/// fine points.
pub const IDEAL_CAP: usize = 4000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BuilderTag {
    Ideal,
    Direct,
    Standard,
    Multipass,
    Ua,
    Sa,
    EnergyMin,
    VectorPreserving,
    SpectralAmge,
    /// Least-squares fit to test vectors (bootstrap setup).
    LeastSquares,
}

impl BuilderTag {
    pub fn name(&self) -> &'static str {
        match self {
            BuilderTag::Ideal => "ideal",
            BuilderTag::Direct => "direct",
            BuilderTag::Standard => "standard",
            BuilderTag::Multipass => "multipass",
            BuilderTag::Ua => "ua",
            BuilderTag::Sa => "sa",
            BuilderTag::EnergyMin => "energymin",
            BuilderTag::VectorPreserving => "vector",
            BuilderTag::SpectralAmge => "spectral-amge",
            BuilderTag::LeastSquares => "ls",
        }
    }

    /// Builders that need a C/F splitting rather than aggregates.
    pub fn is_classical(&self) -> bool {
        matches!(
            self,
            BuilderTag::Ideal
                | BuilderTag::Direct
                | BuilderTag::Standard
                | BuilderTag::Multipass
                | BuilderTag::VectorPreserving
        )
    }
}

impl FromStr for BuilderTag {
    type Err = AmgError;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "ideal" => BuilderTag::Ideal,
            "direct" => BuilderTag::Direct,
            "standard" => BuilderTag::Standard,
            "multipass" => BuilderTag::Multipass,
            "ua" => BuilderTag::Ua,
            "sa" => BuilderTag::Sa,
            "energymin" => BuilderTag::EnergyMin,
            "vector" => BuilderTag::VectorPreserving,
            "spectral-amge" => BuilderTag::SpectralAmge,
            "ls" => BuilderTag::LeastSquares,
            _ => return Err(AmgError::Config(format!("unknown interpolation {s:?}"))),
        })
    }
}

#[derive(Clone, Debug)]
pub struct Prolongation {
    pub p: CsrMatrix,
    pub builder: BuilderTag,
    /// Vectors v with v = P w for a known w (constants, rigid body modes, ...).
    pub preserved: Option<Vec<Vec<f64>>>,
}

impl Prolongation {
    pub fn n_fine(&self) -> usize {
        self.p.n_rows()
    }

    pub fn n_coarse(&self) -> usize {
        self.p.n_cols()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.p.mul_vec(&vec![1.0; self.n_coarse()])
    }

    /// Smallest singular value of P, from the Gram matrix.
    pub fn smallest_singular_value(&self) -> Result<f64> {
        check_cap(self.n_coarse())?;
        let pd = self.p.to_dense();
        let gram = pd.transpose() * &pd;
        Ok(sym_eigen(&gram).values.first().map_or(0.0, |l| l.max(0.0).sqrt()))
    }

    pub fn check_full_rank(&self) -> Result<()> {
        let s = self.smallest_singular_value()?;
        if s <= 1e-10 {
            return Err(AmgError::Breakdown(format!(
                "{} prolongation lost rank (smallest singular value {s:e})",
                self.builder.name()
            )));
        }
        Ok(())
    }
}

/// Column supports for energy minimisation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SupportSet {
    n: usize,
    supports: Vec<Vec<usize>>,
}

impl SupportSet {
    pub fn new(n: usize, mut supports: Vec<Vec<usize>>) -> Result<Self> {
        for (i, s) in supports.iter_mut().enumerate() {
            s.sort_unstable();
            s.dedup();
            if s.is_empty() {
                return Err(AmgError::InvalidArgument(format!("support {i} is empty")));
            }
            if let Some(&bad) = s.iter().find(|&&v| v >= n) {
                return Err(AmgError::InvalidArgument(format!("support {i} holds {bad} >= {n}")));
            }
        }
        Ok(SupportSet { n, supports })
    }

    /// Each coarse point's 1-ring (plus itself) in `g`.
    pub fn from_neighborhoods(g: &Graph, centers: &[usize]) -> Result<Self> {
        let supports = centers
            .iter()
            .map(|&c| std::iter::once(c).chain(g.neighbors(c).iter().copied()).collect())
            .collect();
        SupportSet::new(g.n_vertices(), supports)
    }

    pub fn n_fine(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.supports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.supports.is_empty()
    }

    pub fn support(&self, i: usize) -> &[usize] {
        &self.supports[i]
    }

    /// Supports containing each fine index.
    pub fn membership(&self) -> Vec<Vec<usize>> {
        let mut m = vec![Vec::new(); self.n];
        for (i, s) in self.supports.iter().enumerate() {
            for &v in s {
                m[v].push(i);
            }
        }
        m
    }

    /// The supports cover every index and none lies inside the union of
    /// the others.
    pub fn validate(&self) -> Result<()> {
        let m = self.membership();
        if let Some(v) = m.iter().position(|s| s.is_empty()) {
            return Err(AmgError::InvalidArgument(format!("index {v} is in no support")));
        }
        for (i, s) in self.supports.iter().enumerate() {
            if s.iter().all(|&v| m[v].len() > 1) {
                return Err(AmgError::InvalidArgument(format!(
                    "support {i} lies inside the union of the others"
                )));
            }
        }
        Ok(())
    }
}

fn assemble_classical(
    split: &CfSplitting,
    rows: &[BTreeMap<usize, f64>],
    builder: BuilderTag,
) -> Result<Prolongation> {
    let n = split.len();
    let cidx = split.coarse_index();
    let mut e = Vec::new();
    for i in 0..n {
        match cidx[i] {
            Some(c) => e.push((i, c, 1.0)),
            None => e.extend(rows[i].iter().map(|(&c, &w)| (i, c, w))),
        }
    }
    Ok(Prolongation {
        p: CsrMatrix::from_triplets(n, split.n_coarse(), &e)?,
        builder,
        preserved: None,
    })
}

fn check_split(a: &CsrMatrix, split: &CfSplitting) -> Result<()> {
    if !a.is_square() || a.n_rows() != split.len() {
        return Err(AmgError::Dimension(format!(
            "splitting of {} points for a {}x{} matrix",
            split.len(),
            a.n_rows(),
            a.n_cols()
        )));
    }
    if let Some(i) = a.diagonal().iter().position(|&d| d <= 0.0) {
        return Err(AmgError::NonPositiveDiagonal(i));
    }
    Ok(())
}

/// W = -A_FF^{-1} A_FC by a dense solve.
pub fn ideal_interpolation(a: &CsrMatrix, split: &CfSplitting) -> Result<Prolongation> {
    check_split(a, split)?;
    let fine = split.fine_points();
    let coarse = split.coarse_points();
    if fine.len() > IDEAL_CAP {
        return Err(AmgError::TooLarge {
            n: fine.len(),
            cap: IDEAL_CAP,
        });
    }
    let aff = a.submatrix(&fine, &fine).to_dense();
    let afc = a.submatrix(&fine, &coarse).to_dense();
    let w = aff
        .lu()
        .solve(&(-afc))
        .ok_or_else(|| AmgError::Breakdown("A_FF is singular".into()))?;
    let mut rows = vec![BTreeMap::new(); a.n_rows()];
    for (r, &i) in fine.iter().enumerate() {
        for c in 0..coarse.len() {
            if w[(r, c)] != 0.0 {
                rows[i].insert(c, w[(r, c)]);
            }
        }
    }
    assemble_classical(split, &rows, BuilderTag::Ideal)
}

fn strong_coarse<'a>(
    a: &'a CsrMatrix,
    s: &'a Graph,
    split: &'a CfSplitting,
    i: usize,
) -> impl Iterator<Item = (usize, f64)> + 'a {
    a.row_iter(i)
        .filter(move |&(j, _)| j != i && split.is_coarse(j) && s.has_edge(i, j))
}

/// Scale a row so that its entries sum to one.
fn rescale(row: &mut BTreeMap<usize, f64>, i: usize) -> Result<()> {
    let sum: f64 = row.values().sum();
    if sum == 0.0 || !sum.is_finite() {
        return Err(AmgError::EmptyRow(i));
    }
    row.values_mut().for_each(|w| *w /= sum);
    Ok(())
}

/// Drop entries below TRUNCATION times the row maximum.
fn truncate(row: &mut BTreeMap<usize, f64>) {
    let top = row.values().fold(0.0f64, |m, w| m.max(w.abs()));
    row.retain(|_, w| w.abs() >= TRUNCATION * top);
}

/// W = diag(A_FC^s 1)^{-1} A_FC^s with A_FC^s the strong couplings to C.
pub fn direct_interpolation(a: &CsrMatrix, split: &CfSplitting, s: &Graph) -> Result<Prolongation> {
    check_split(a, split)?;
    let cidx = split.coarse_index();
    let mut rows = vec![BTreeMap::new(); a.n_rows()];
    for i in split.fine_points() {
        for (j, v) in strong_coarse(a, s, split, i) {
            rows[i].insert(cidx[j].expect("coarse"), v);
        }
        if rows[i].is_empty() {
            return Err(AmgError::EmptyRow(i));
        }
        rescale(&mut rows[i], i)?;
    }
    assemble_classical(split, &rows, BuilderTag::Direct)
}

/// One Jacobi step from the unscaled direct weights W1 = -D^{-1}A_FC^s:
/// W = W1 - D^{-1}(A_FF^s - D) W1, then row-sum rescaling and truncation.
/// Only strong couplings enter, so the pattern stays within strong
/// distance two.
pub fn standard_interpolation(a: &CsrMatrix, split: &CfSplitting, s: &Graph) -> Result<Prolongation> {
    check_split(a, split)?;
    let n = a.n_rows();
    let cidx = split.coarse_index();
    let d = a.diagonal();
    let mut w1 = vec![BTreeMap::new(); n];
    for i in split.fine_points() {
        for (j, v) in strong_coarse(a, s, split, i) {
            w1[i].insert(cidx[j].expect("coarse"), -v / d[i]);
        }
    }
    let mut rows = vec![BTreeMap::new(); n];
    for i in split.fine_points() {
        let mut row = w1[i].clone();
        for (k, v) in a.row_iter(i) {
            if k == i || split.is_coarse(k) || !s.has_edge(i, k) {
                continue;
            }
            for (&c, &w) in &w1[k] {
                *row.entry(c).or_insert(0.0) -= v / d[i] * w;
            }
        }
        row.retain(|_, w| *w != 0.0);
        rescale(&mut row, i)?;
        truncate(&mut row);
        rescale(&mut row, i)?;
        rows[i] = row;
    }
    assemble_classical(split, &rows, BuilderTag::Standard)
}

/// Distance in `s` from the coarse set; usize::MAX when unreachable.
fn distance_levels(s: &Graph, split: &CfSplitting) -> Vec<usize> {
    let n = s.n_vertices();
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for c in split.coarse_points() {
        dist[c] = 0;
        queue.push_back(c);
    }
    while let Some(u) = queue.pop_front() {
        for &v in s.neighbors(u) {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

/// F points are processed by their strong distance k from C. Level 1 uses
/// direct interpolation; level k+1 applies direct interpolation to the
/// system with levels <= k substituted, i.e. row i takes
/// sum_j a_ij W_j / sum_j a_ij over strong neighbors j one level closer.
pub fn multipass_interpolation(a: &CsrMatrix, split: &CfSplitting, s: &Graph) -> Result<Prolongation> {
    check_split(a, split)?;
    let dist = distance_levels(s, split);
    if let Some(i) = dist.iter().position(|&d| d == usize::MAX) {
        return Err(AmgError::EmptyRow(i));
    }
    let cidx = split.coarse_index();
    let mut order = split.fine_points();
    order.sort_by_key(|&i| (dist[i], i));
    let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); a.n_rows()];
    for c in split.coarse_points() {
        rows[c].insert(cidx[c].expect("coarse"), 1.0);
    }
    for &i in &order {
        let mut row = BTreeMap::new();
        let mut total = 0.0;
        for (j, v) in a.row_iter(i) {
            if j == i || !s.has_edge(i, j) || dist[j] + 1 != dist[i] {
                continue;
            }
            total += v;
            for (&c, &w) in &rows[j] {
                *row.entry(c).or_insert(0.0) += v * w;
            }
        }
        if total == 0.0 {
            return Err(AmgError::EmptyRow(i));
        }
        row.values_mut().for_each(|w| *w /= total);
        row.retain(|_, w| *w != 0.0);
        rows[i] = row;
    }
    assemble_classical(split, &rows, BuilderTag::Multipass)
}

/// alpha-AMG interpolation preserving the prototype `v`: start from
/// W0 = D_v^{-1} A_FC^s (exact on v), take one Jacobi step on A_FF W = -A_FC,
/// truncate and rescale each row so W v_C = v_F holds exactly.
pub fn vector_preserving_interpolation(
    a: &CsrMatrix,
    split: &CfSplitting,
    s: &Graph,
    v: &[f64],
) -> Result<Prolongation> {
    check_split(a, split)?;
    if v.len() != a.n_rows() {
        return Err(AmgError::Dimension(format!("prototype of length {} for n = {}", v.len(), a.n_rows())));
    }
    let n = a.n_rows();
    let cidx = split.coarse_index();
    let cpts = split.coarse_points();
    let d = a.diagonal();
    let mut w0 = vec![BTreeMap::new(); n];
    for i in split.fine_points() {
        if v[i] == 0.0 {
            return Err(AmgError::EmptyRow(i));
        }
        let mut dv = 0.0;
        for (j, aij) in strong_coarse(a, s, split, i) {
            dv += aij * v[j];
            w0[i].insert(cidx[j].expect("coarse"), aij);
        }
        dv /= v[i];
        if dv == 0.0 {
            return Err(AmgError::EmptyRow(i));
        }
        w0[i].values_mut().for_each(|w| *w /= dv);
    }
    let mut rows = vec![BTreeMap::new(); n];
    for i in split.fine_points() {
        // W = W0 + D^{-1}(-A_FC - A_FF W0), restricted to strong couplings
        let mut row = w0[i].clone();
        for (k, aik) in a.row_iter(i) {
            if !s.has_edge(i, k) && k != i {
                continue;
            }
            if split.is_coarse(k) {
                *row.entry(cidx[k].expect("coarse")).or_insert(0.0) -= aik / d[i];
            } else {
                for (&c, &w) in &w0[k] {
                    *row.entry(c).or_insert(0.0) -= aik / d[i] * w;
                }
            }
        }
        row.retain(|_, w| *w != 0.0);
        truncate(&mut row);
        let reproduced: f64 = row.iter().map(|(&c, &w)| w * v[cpts[c]]).sum();
        if reproduced == 0.0 {
            return Err(AmgError::EmptyRow(i));
        }
        let scale = v[i] / reproduced;
        row.values_mut().for_each(|w| *w *= scale);
        rows[i] = row;
    }
    let mut p = assemble_classical(split, &rows, BuilderTag::VectorPreserving)?;
    p.preserved = Some(vec![v.to_vec()]);
    Ok(p)
}

/// Unsmoothed aggregation. Without vectors the columns are aggregate
/// indicators; with k vectors each aggregate contributes k columns holding
/// the restrictions of the vectors, so P (1 (x) e_j) = zeta_j.
pub fn ua_prolongation(partition: &AggregatePartition, vectors: Option<&[Vec<f64>]>) -> Result<Prolongation> {
    let n = partition.n_vertices();
    let ones = [vec![1.0; n]];
    let (vecs, preserved) = match vectors {
        Some(v) if !v.is_empty() => (v, v.to_vec()),
        _ => (&ones[..], ones.to_vec()),
    };
    let k = vecs.len();
    if let Some(bad) = vecs.iter().find(|z| z.len() != n) {
        return Err(AmgError::Dimension(format!("vector of length {} for {n} vertices", bad.len())));
    }
    let members = partition.members();
    let mut e = Vec::new();
    for (g, verts) in members.iter().enumerate() {
        if k > 1 {
            let block = DMatrix::from_fn(verts.len(), k, |r, c| vecs[c][verts[r]]);
            let sv = block.singular_values();
            let top = sv.max();
            if verts.len() < k || sv.min() <= 1e-10 * top.max(f64::MIN_POSITIVE) {
                return Err(AmgError::Breakdown(format!(
                    "aggregate {g} cannot carry {k} vectors (rank deficient block)"
                )));
            }
        } else if verts.iter().all(|&v| vecs[0][v] == 0.0) {
            return Err(AmgError::Breakdown(format!("vector vanishes on aggregate {g}")));
        }
        for &v in verts {
            for (j, z) in vecs.iter().enumerate() {
                e.push((v, g * k + j, z[v]));
            }
        }
    }
    Ok(Prolongation {
        p: CsrMatrix::from_triplets(n, members.len() * k, &e)?,
        builder: BuilderTag::Ua,
        preserved: Some(preserved),
    })
}

/// Node partition expanded to `block` interleaved dofs per node.
pub fn expand_partition(nodes: &AggregatePartition, block: usize) -> AggregatePartition {
    let assign = nodes
        .assignment()
        .iter()
        .flat_map(|&a| std::iter::repeat(a).take(block))
        .collect();
    AggregatePartition::new(assign).expect("expansion of a valid partition")
}

/// Default SA damping 4/(3 rho(D^{-1}A)).
pub fn sa_default_omega(a: &CsrMatrix) -> Result<f64> {
    Ok(4.0 / (3.0 * spectral_radius_dinv_a(a, 50)?))
}

/// P_S = (I - omega D^{-1} A)^nu P_tent.
pub fn sa_prolongation(tent: &Prolongation, a: &CsrMatrix, nu: usize, omega: Option<f64>) -> Result<Prolongation> {
    if a.n_rows() != tent.n_fine() {
        return Err(AmgError::Dimension(format!(
            "{} rows in P for a {}-dimensional A",
            tent.n_fine(),
            a.n_rows()
        )));
    }
    if nu == 0 {
        return Ok(tent.clone());
    }
    let omega = match omega {
        Some(w) => w,
        None => sa_default_omega(a)?,
    };
    let d = a.diagonal();
    if let Some(i) = d.iter().position(|&x| x <= 0.0) {
        return Err(AmgError::NonPositiveDiagonal(i));
    }
    let dinv_a = CsrMatrix::from_diagonal(&d.iter().map(|x| 1.0 / x).collect::<Vec<_>>())?.matmul(a)?;
    let smoother = CsrMatrix::identity(a.n_rows()).add_scaled(1.0, &dinv_a, -omega)?;
    let mut p = tent.p.clone();
    for _ in 0..nu {
        p = smoother.matmul(&p)?;
    }
    // only vectors in the kernel of A survive smoothing
    let preserved = tent.preserved.as_ref().map(|vs| {
        vs.iter()
            .filter(|z| {
                let scale = a.norm_inf() * z.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                a.mul_vec(z).iter().all(|r| r.abs() <= 1e-12 * scale)
            })
            .cloned()
            .collect::<Vec<_>>()
    });
    let out = Prolongation {
        p,
        builder: BuilderTag::Sa,
        preserved,
    };
    if out.n_coarse() <= 1000 {
        out.check_full_rank().map_err(|_| {
            AmgError::Breakdown(format!("smoothed prolongation lost rank; try omega below {omega}"))
        })?;
    }
    Ok(out)
}

/// Minimal-energy columns: phi_i = A_i^{-1} Q_i lambda with B lambda =
/// constraint, B = sum_i Q_i' A_i^{-1} Q_i, so that sum_i phi_i = constraint
/// and trace(P'AP) is minimal among such P with the given supports.
pub fn energy_min_prolongation(
    a: &CsrMatrix,
    supports: &SupportSet,
    constraint: &[f64],
    tol: f64,
) -> Result<Prolongation> {
    let n = a.n_rows();
    if supports.n_fine() != n || constraint.len() != n {
        return Err(AmgError::Dimension(format!(
            "supports over {} and constraint of length {} for n = {n}",
            supports.n_fine(),
            constraint.len()
        )));
    }
    supports.validate()?;
    let mut factors = Vec::with_capacity(supports.len());
    for i in 0..supports.len() {
        let s = supports.support(i);
        let local = a.submatrix(s, s).to_dense();
        let chol = local.cholesky().ok_or(AmgError::SingularBlock(i))?;
        factors.push(chol);
    }
    let local_solve = |i: usize, x: &[f64]| {
        let s = supports.support(i);
        let rhs = nalgebra::DVector::from_iterator(s.len(), s.iter().map(|&v| x[v]));
        factors[i].solve(&rhs)
    };
    let apply_b = |x: &[f64]| {
        let mut y = vec![0.0; n];
        for i in 0..supports.len() {
            let phi = local_solve(i, x);
            for (k, &v) in supports.support(i).iter().enumerate() {
                y[v] += phi[k];
            }
        }
        y
    };
    let (lambda, _) = conjugate_gradient(apply_b, constraint, tol, 10 * n.max(1))?;
    let mut e = Vec::new();
    for i in 0..supports.len() {
        let phi = local_solve(i, &lambda);
        for (k, &v) in supports.support(i).iter().enumerate() {
            e.push((v, i, phi[k]));
        }
    }
    Ok(Prolongation {
        p: CsrMatrix::from_triplets(n, supports.len(), &e)?,
        builder: BuilderTag::EnergyMin,
        preserved: Some(vec![constraint.to_vec()]),
    })
}

/// Local data of one spectral AMGe agglomerate.
#[derive(Clone, Debug)]
pub struct AgglomerateSpectrum {
    pub dofs: Vec<usize>,
    /// Eigenvalues of D_j^{-1} A_j, ascending.
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

/// Generalised eigenpairs A_j x = mu D_j x for every agglomerate, where A_j
/// sums the element blocks of the agglomerate and D_j is the diagonal of the
/// global matrix on its dofs.
pub fn agglomerate_spectra(
    assembly: &ElementAssembly,
    agglomerates: &AggregatePartition,
) -> Result<Vec<AgglomerateSpectrum>> {
    if agglomerates.n_vertices() != assembly.elements.len() {
        return Err(AmgError::Dimension(format!(
            "partition of {} elements for an assembly of {}",
            agglomerates.n_vertices(),
            assembly.elements.len()
        )));
    }
    let global = assembly.assemble()?.diagonal();
    agglomerates
        .members()
        .iter()
        .map(|elements| {
            let (dofs, local) = assembly.local_matrix(elements);
            check_cap(dofs.len())?;
            let dj = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                dofs.len(),
                dofs.iter().map(|&d| global[d]),
            ));
            let eig = sym_eigen_generalized(&local, &dj)?;
            Ok(AgglomerateSpectrum {
                dofs,
                values: eig.values,
                vectors: eig.vectors,
            })
        })
        .collect()
}

/// Spectral AMGe: the `m_per` lowest eigenvectors of D_j^{-1}A_j per
/// agglomerate, weighted by the partition of unity [Pi_j]_ii = [A_j]_ii / a_ii.
pub fn spectral_amge_coarse_space(
    assembly: &ElementAssembly,
    agglomerates: &AggregatePartition,
    m_per: usize,
) -> Result<Prolongation> {
    let n = assembly.n_dofs;
    let global = assembly.assemble()?.diagonal();
    let spectra = agglomerate_spectra(assembly, agglomerates)?;
    let members = agglomerates.members();
    let mut e = Vec::new();
    let mut col = 0;
    for (j, spec) in spectra.iter().enumerate() {
        if m_per > spec.dofs.len() {
            return Err(AmgError::InvalidArgument(format!(
                "agglomerate {j} has {} dofs, fewer than {m_per} requested vectors",
                spec.dofs.len()
            )));
        }
        let (_, local) = assembly.local_matrix(&members[j]);
        for k in 0..m_per {
            let x = spec.vectors.column(k);
            // fix the sign so the largest entry is positive
            let pivot = x.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
            let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
            for (r, &d) in spec.dofs.iter().enumerate() {
                let weight = local[(r, r)] / global[d];
                let v = sign * weight * x[r];
                if v != 0.0 {
                    e.push((d, col, v));
                }
            }
            col += 1;
        }
    }
    Ok(Prolongation {
        p: CsrMatrix::from_triplets(n, col, &e)?,
        builder: BuilderTag::SpectralAmge,
        preserved: None,
    })
}
