//! Model problems: finite-difference and finite-element stiffness matrices
//! on the unit square, with closed-form spectra where they exist.
//!
//! Grid unknowns are ordered lexicographically, x index fastest.

use std::f64::consts::PI;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{AmgError, Result};
use crate::sparse::CsrMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    Dirichlet,
    Neumann,
}

impl Boundary {
    pub fn name(&self) -> &'static str {
        match self {
            Boundary::Dirichlet => "dirichlet",
            Boundary::Neumann => "neumann",
        }
    }
}

impl FromStr for Boundary {
    type Err = AmgError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dirichlet" => Ok(Boundary::Dirichlet),
            "neumann" => Ok(Boundary::Neumann),
            _ => Err(AmgError::Config(format!("unknown boundary condition {s:?}"))),
        }
    }
}

/// Which elements of the jump-coefficient mesh carry the coefficient epsilon.
/// The predicate receives the element barycenter.
#[derive(Clone, Copy, Debug)]
pub enum JumpPattern {
    Uniform,
    /// Epsilon where (x - 1/2)(y - 1/2) < 0.
    Checkerboard,
    Custom(fn(f64, f64) -> bool),
}

impl JumpPattern {
    pub fn is_weak(&self, x: f64, y: f64) -> bool {
        match self {
            JumpPattern::Uniform => false,
            JumpPattern::Checkerboard => (x - 0.5) * (y - 0.5) < 0.0,
            JumpPattern::Custom(f) => f(x, y),
        }
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        Err(AmgError::InvalidArgument("grid size n must be at least 1".into()))
    } else {
        Ok(())
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(AmgError::InvalidArgument(format!("epsilon must be positive, got {eps}")))
    }
}

/// Weighted graph Laplacian (zero row sums) from weighted edges.
pub fn graph_laplacian(n: usize, edges: &[(usize, usize, f64)]) -> Result<CsrMatrix> {
    let mut e = Vec::with_capacity(4 * edges.len());
    for &(u, v, w) in edges {
        e.push((u, v, -w));
        e.push((v, u, -w));
        e.push((u, u, w));
        e.push((v, v, w));
    }
    CsrMatrix::from_triplets(n, n, &e)
}

/// tridiag(-1, 2, -1) of size n.
pub fn laplacian_1d(n: usize) -> Result<CsrMatrix> {
    check_n(n)?;
    let mut e = Vec::with_capacity(3 * n);
    for i in 0..n {
        e.push((i, i, 2.0));
        if i + 1 < n {
            e.push((i, i + 1, -1.0));
            e.push((i + 1, i, -1.0));
        }
    }
    CsrMatrix::from_triplets(n, n, &e)
}

/// Graph Laplacian of a path on n vertices.
pub fn path_laplacian(n: usize) -> Result<CsrMatrix> {
    check_n(n)?;
    let edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1, 1.0)).collect();
    graph_laplacian(n, &edges)
}

/// Stencil matrix on an n x n grid: `wx` couples x neighbors, `wy` y neighbors.
fn grid_matrix(n: usize, wx: f64, wy: f64, bc: Boundary) -> Result<CsrMatrix> {
    check_n(n)?;
    let idx = |i: usize, j: usize| j * n + i;
    match bc {
        Boundary::Dirichlet => {
            let mut e = Vec::with_capacity(5 * n * n);
            for j in 0..n {
                for i in 0..n {
                    let k = idx(i, j);
                    e.push((k, k, 2.0 * (wx + wy)));
                    if i > 0 {
                        e.push((k, idx(i - 1, j), -wx));
                    }
                    if i + 1 < n {
                        e.push((k, idx(i + 1, j), -wx));
                    }
                    if j > 0 {
                        e.push((k, idx(i, j - 1), -wy));
                    }
                    if j + 1 < n {
                        e.push((k, idx(i, j + 1), -wy));
                    }
                }
            }
            CsrMatrix::from_triplets(n * n, n * n, &e)
        }
        Boundary::Neumann => {
            let mut edges = Vec::new();
            for j in 0..n {
                for i in 0..n {
                    if i + 1 < n {
                        edges.push((idx(i, j), idx(i + 1, j), wx));
                    }
                    if j + 1 < n {
                        edges.push((idx(i, j), idx(i, j + 1), wy));
                    }
                }
            }
            graph_laplacian(n * n, &edges)
        }
    }
}

/// Five-point Laplacian on n x n interior points. The Neumann variant is the
/// unit-weight graph Laplacian of the grid.
pub fn fd_poisson_5pt(n: usize, bc: Boundary) -> Result<CsrMatrix> {
    grid_matrix(n, 1.0, 1.0, bc)
}

/// Nine-point stencil with diagonal 8 and every neighbor -1 (Dirichlet).
pub fn fd_poisson_9pt(n: usize) -> Result<CsrMatrix> {
    check_n(n)?;
    let mut e = Vec::with_capacity(9 * n * n);
    for j in 0..n as isize {
        for i in 0..n as isize {
            let k = (j * n as isize + i) as usize;
            for dj in -1..=1isize {
                for di in -1..=1isize {
                    let (ii, jj) = (i + di, j + dj);
                    if ii < 0 || jj < 0 || ii >= n as isize || jj >= n as isize {
                        continue;
                    }
                    let m = (jj * n as isize + ii) as usize;
                    e.push((k, m, if m == k { 8.0 } else { -1.0 }));
                }
            }
        }
    }
    CsrMatrix::from_triplets(n * n, n * n, &e)
}

/// Anisotropic operator -u_xx - eps u_yy: diagonal 2(1+eps), x neighbors -1,
/// y neighbors -eps. The Neumann variant is the matching weighted graph
/// Laplacian on n x n nodes.
pub fn fe_anisotropic(n: usize, eps: f64, bc: Boundary) -> Result<CsrMatrix> {
    check_eps(eps)?;
    grid_matrix(n, 1.0, eps, bc)
}

/// Eigenvalues of the Dirichlet five-point matrix, ascending.
pub fn exact_spectrum_5pt(n: usize) -> Vec<f64> {
    exact_spectrum_anisotropic(n, 1.0)
}

/// Eigenvalues of the Dirichlet anisotropic matrix, ascending.
pub fn exact_spectrum_anisotropic(n: usize, eps: f64) -> Vec<f64> {
    let s = |k: usize| {
        let t = (k as f64 * PI / (2.0 * (n as f64 + 1.0))).sin();
        4.0 * t * t
    };
    let mut out: Vec<f64> = (1..=n)
        .flat_map(|i| (1..=n).map(move |j| (i, j)))
        .map(|(i, j)| s(i) + eps * s(j))
        .collect();
    out.sort_by(f64::total_cmp);
    out
}

/// Eigenvalues of tridiag(-1, 2, -1), ascending.
pub fn exact_spectrum_1d(n: usize) -> Vec<f64> {
    (1..=n)
        .map(|k| {
            let t = (k as f64 * PI / (2.0 * (n as f64 + 1.0))).sin();
            4.0 * t * t
        })
        .collect()
}

/// Local stiffness block of one element together with its global dofs.
#[derive(Clone, Debug)]
pub struct ElementBlock {
    pub dofs: Vec<usize>,
    pub matrix: DMatrix<f64>,
}

/// Element-by-element splitting A = sum of local blocks. Blocks are
/// restricted to free dofs and are each symmetric positive semidefinite.
#[derive(Clone, Debug)]
pub struct ElementAssembly {
    pub n_dofs: usize,
    pub elements: Vec<ElementBlock>,
}

impl ElementAssembly {
    pub fn assemble(&self) -> Result<CsrMatrix> {
        let mut e = Vec::new();
        for el in &self.elements {
            for (a, &i) in el.dofs.iter().enumerate() {
                for (b, &j) in el.dofs.iter().enumerate() {
                    e.push((i, j, el.matrix[(a, b)]));
                }
            }
        }
        CsrMatrix::from_triplets(self.n_dofs, self.n_dofs, &e)
    }

    /// Sum of the blocks of the listed elements, on their union of dofs.
    /// Returns the sorted dof list and the dense local matrix.
    pub fn local_matrix(&self, elements: &[usize]) -> (Vec<usize>, DMatrix<f64>) {
        let mut dofs: Vec<usize> = elements
            .iter()
            .flat_map(|&t| self.elements[t].dofs.iter().copied())
            .collect();
        dofs.sort_unstable();
        dofs.dedup();
        let mut m = DMatrix::zeros(dofs.len(), dofs.len());
        for &t in elements {
            let el = &self.elements[t];
            let pos: Vec<usize> = el
                .dofs
                .iter()
                .map(|d| dofs.binary_search(d).expect("dof present"))
                .collect();
            for a in 0..pos.len() {
                for b in 0..pos.len() {
                    m[(pos[a], pos[b])] += el.matrix[(a, b)];
                }
            }
        }
        (dofs, m)
    }
}

/// Triangulated unit square on a uniform grid of `cells` x `cells` squares,
/// each cut into two right triangles. Vertex coordinates are integers (grid
/// units) so that stiffness entries are exact; `shear` maps (x, y) to
/// (x + shear*y, y), which makes some angles obtuse.
#[derive(Clone, Debug)]
pub struct TriMesh {
    pub cells: usize,
    pub coords: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
}

impl TriMesh {
    pub fn unit_square(cells: usize, shear: f64) -> TriMesh {
        let m = cells + 1;
        let mut coords = Vec::with_capacity(m * m);
        for j in 0..m {
            for i in 0..m {
                coords.push([i as f64 + shear * j as f64, j as f64]);
            }
        }
        let v = |i: usize, j: usize| j * m + i;
        let mut triangles = Vec::with_capacity(2 * cells * cells);
        for j in 0..cells {
            for i in 0..cells {
                triangles.push([v(i, j), v(i + 1, j), v(i, j + 1)]);
                triangles.push([v(i + 1, j + 1), v(i, j + 1), v(i + 1, j)]);
            }
        }
        TriMesh {
            cells,
            coords,
            triangles,
        }
    }

    /// Barycenter of triangle t in unit-square coordinates (shear removed).
    pub fn barycenter(&self, t: usize) -> (f64, f64) {
        let h = 1.0 / self.cells as f64;
        let tri = self.triangles[t];
        let m = self.cells + 1;
        let (mut x, mut y) = (0.0, 0.0);
        for &v in &tri {
            x += (v % m) as f64;
            y += (v / m) as f64;
        }
        (x * h / 3.0, y * h / 3.0)
    }

    fn on_boundary(&self, v: usize) -> bool {
        let m = self.cells + 1;
        let (i, j) = (v % m, v / m);
        i == 0 || j == 0 || i == self.cells || j == self.cells
    }
}

/// P1 stiffness of a triangle for coefficient `alpha`.
pub fn p1_stiffness(p: [[f64; 2]; 3], alpha: f64) -> DMatrix<f64> {
    // edge opposite vertex i, oriented cyclically
    let e: Vec<[f64; 2]> = (0..3)
        .map(|i| {
            let a = p[(i + 1) % 3];
            let b = p[(i + 2) % 3];
            [b[0] - a[0], b[1] - a[1]]
        })
        .collect();
    let area2 = (e[2][0] * (-e[1][1]) - e[2][1] * (-e[1][0])).abs();
    let mut k = DMatrix::zeros(3, 3);
    for i in 0..3 {
        for j in i..3 {
            let v = alpha * (e[i][0] * e[j][0] + e[i][1] * e[j][1]) / (2.0 * area2);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Assemble a scalar P1 diffusion problem with per-element coefficients.
/// Dirichlet eliminates boundary vertices; Neumann keeps every vertex.
pub fn assemble_p1_diffusion(
    mesh: &TriMesh,
    coeff: &[f64],
    bc: Boundary,
) -> Result<(CsrMatrix, ElementAssembly)> {
    let mut dof = vec![usize::MAX; mesh.coords.len()];
    let mut n_dofs = 0;
    for (v, d) in dof.iter_mut().enumerate() {
        if bc == Boundary::Neumann || !mesh.on_boundary(v) {
            *d = n_dofs;
            n_dofs += 1;
        }
    }
    let mut elements = Vec::with_capacity(mesh.triangles.len());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let k = p1_stiffness(tri.map(|v| mesh.coords[v]), coeff[t]);
        let keep: Vec<usize> = (0..3).filter(|&a| dof[tri[a]] != usize::MAX).collect();
        if keep.is_empty() {
            continue;
        }
        let dofs = keep.iter().map(|&a| dof[tri[a]]).collect();
        let matrix = DMatrix::from_fn(keep.len(), keep.len(), |a, b| k[(keep[a], keep[b])]);
        elements.push(ElementBlock { dofs, matrix });
    }
    let asm = ElementAssembly { n_dofs, elements };
    Ok((asm.assemble()?, asm))
}

/// Linear finite elements for -div(alpha grad u) on the uniform right-triangle
/// mesh with n interior points per direction (Dirichlet). alpha is 1 or eps
/// per element according to `pattern`. With eps = 1 this is the five-point
/// matrix.
pub fn fe_jump_coefficient(
    n: usize,
    eps: f64,
    pattern: JumpPattern,
) -> Result<(CsrMatrix, ElementAssembly)> {
    fe_jump_coefficient_on(&TriMesh::unit_square(n + 1, 0.0), eps, pattern, Boundary::Dirichlet)
}

/// Jump-coefficient assembly on an arbitrary structured mesh and boundary.
pub fn fe_jump_coefficient_on(
    mesh: &TriMesh,
    eps: f64,
    pattern: JumpPattern,
    bc: Boundary,
) -> Result<(CsrMatrix, ElementAssembly)> {
    check_eps(eps)?;
    if mesh.cells == 0 {
        return Err(AmgError::InvalidArgument("mesh has no cells".into()));
    }
    let coeff: Vec<f64> = (0..mesh.triangles.len())
        .map(|t| {
            let (x, y) = mesh.barycenter(t);
            if pattern.is_weak(x, y) {
                eps
            } else {
                1.0
            }
        })
        .collect();
    assemble_p1_diffusion(mesh, &coeff, bc)
}

/// Rigid body modes of 2D elasticity for interleaved (u_x, u_y) dofs:
/// x translation, y translation, rotation (-y, x).
pub fn rigid_body_vectors(coords: &[[f64; 2]]) -> [Vec<f64>; 3] {
    let n = coords.len();
    let mut tx = vec![0.0; 2 * n];
    let mut ty = vec![0.0; 2 * n];
    let mut rot = vec![0.0; 2 * n];
    for (k, c) in coords.iter().enumerate() {
        tx[2 * k] = 1.0;
        ty[2 * k + 1] = 1.0;
        rot[2 * k] = -c[1];
        rot[2 * k + 1] = c[0];
    }
    [tx, ty, rot]
}

/// Plane-strain P1 elasticity on the unit square mesh with `cells` squares per
/// side and the left edge clamped. Returns the matrix and the coordinates of
/// the free vertices (dofs interleaved per free vertex).
pub fn elasticity_2d(cells: usize, lambda: f64, mu: f64) -> Result<(CsrMatrix, Vec<[f64; 2]>)> {
    plane_elasticity(cells, lambda, mu, true)
}

/// Same operator with no clamp; the three rigid body modes span its kernel.
pub fn elasticity_2d_free(cells: usize, lambda: f64, mu: f64) -> Result<(CsrMatrix, Vec<[f64; 2]>)> {
    plane_elasticity(cells, lambda, mu, false)
}

fn plane_elasticity(cells: usize, lambda: f64, mu: f64, clamped: bool) -> Result<(CsrMatrix, Vec<[f64; 2]>)> {
    if cells == 0 {
        return Err(AmgError::InvalidArgument("mesh has no cells".into()));
    }
    let mesh = TriMesh::unit_square(cells, 0.0);
    let h = 1.0 / cells as f64;
    let m = cells + 1;
    let mut node = vec![usize::MAX; mesh.coords.len()];
    let mut coords = Vec::new();
    for v in 0..mesh.coords.len() {
        if !clamped || v % m != 0 {
            node[v] = coords.len();
            coords.push([mesh.coords[v][0] * h, mesh.coords[v][1] * h]);
        }
    }
    let d = nalgebra::Matrix3::new(lambda + 2.0 * mu, lambda, 0.0, lambda, lambda + 2.0 * mu, 0.0, 0.0, 0.0, mu);
    let mut e = Vec::new();
    for tri in &mesh.triangles {
        let p = tri.map(|v| [mesh.coords[v][0] * h, mesh.coords[v][1] * h]);
        let area2 = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        let mut b = nalgebra::SMatrix::<f64, 3, 6>::zeros();
        for i in 0..3 {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            let bi = (p[j][1] - p[k][1]) / area2;
            let ci = (p[k][0] - p[j][0]) / area2;
            b[(0, 2 * i)] = bi;
            b[(1, 2 * i + 1)] = ci;
            b[(2, 2 * i)] = ci;
            b[(2, 2 * i + 1)] = bi;
        }
        let ke = b.transpose() * d * b * (0.5 * area2.abs());
        for a in 0..6 {
            let na = node[tri[a / 2]];
            if na == usize::MAX {
                continue;
            }
            for c in 0..6 {
                let nc = node[tri[c / 2]];
                if nc == usize::MAX {
                    continue;
                }
                let v = 0.5 * (ke[(a, c)] + ke[(c, a)]);
                e.push((2 * na + a % 2, 2 * nc + c % 2, v));
            }
        }
    }
    let n = 2 * coords.len();
    Ok((CsrMatrix::from_triplets(n, n, &e)?, coords))
}

/// Seeded scales 10^u with u uniform in [-spread, spread].
pub fn random_scaling(n: usize, spread: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| 10f64.powf(spread * rng.gen_range(-1.0..=1.0))).collect()
}

/// DAD for D = diag(scales). The constant is no longer near the kernel;
/// D^{-1}1 takes its place.
pub fn diagonally_rescaled(a: &CsrMatrix, scales: &[f64]) -> Result<CsrMatrix> {
    if scales.len() != a.n_rows() || !a.is_square() {
        return Err(AmgError::Dimension(format!(
            "{} scales for a {}x{} matrix",
            scales.len(),
            a.n_rows(),
            a.n_cols()
        )));
    }
    let mut e = Vec::with_capacity(a.nnz());
    for i in 0..a.n_rows() {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            e.push((i, j, scales[i] * v * scales[j]));
        }
    }
    CsrMatrix::from_triplets(a.n_rows(), a.n_cols(), &e)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemKind {
    Laplace1d,
    Fd5,
    Fd9,
    Aniso,
    Jump,
    /// 5-point Dirichlet Laplacian rescaled by seeded scales of spread eps.
    Rescaled,
}

impl FromStr for ProblemKind {
    type Err = AmgError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "laplace1d" => Ok(ProblemKind::Laplace1d),
            "fd5" => Ok(ProblemKind::Fd5),
            "fd9" => Ok(ProblemKind::Fd9),
            "aniso" => Ok(ProblemKind::Aniso),
            "jump" => Ok(ProblemKind::Jump),
            "rescaled" => Ok(ProblemKind::Rescaled),
            _ => Err(AmgError::Config(format!("unknown problem kind {s:?}"))),
        }
    }
}

impl ProblemKind {
    pub fn name(&self) -> &'static str {
        match self {
            ProblemKind::Laplace1d => "laplace1d",
            ProblemKind::Fd5 => "fd5",
            ProblemKind::Fd9 => "fd9",
            ProblemKind::Aniso => "aniso",
            ProblemKind::Jump => "jump",
            ProblemKind::Rescaled => "rescaled",
        }
    }
}

/// Everything needed to regenerate a model matrix.
#[derive(Clone, Copy, Debug)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub n: usize,
    pub eps: f64,
    pub bc: Boundary,
}

impl ProblemSpec {
    pub fn build(&self) -> Result<CsrMatrix> {
        match self.kind {
            ProblemKind::Laplace1d => match self.bc {
                Boundary::Dirichlet => laplacian_1d(self.n),
                Boundary::Neumann => path_laplacian(self.n),
            },
            ProblemKind::Fd5 => fd_poisson_5pt(self.n, self.bc),
            ProblemKind::Fd9 => fd_poisson_9pt(self.n),
            ProblemKind::Aniso => fe_anisotropic(self.n, self.eps, self.bc),
            ProblemKind::Jump => {
                let mesh = match self.bc {
                    Boundary::Dirichlet => TriMesh::unit_square(self.n + 1, 0.0),
                    Boundary::Neumann => TriMesh::unit_square(self.n.max(2) - 1, 0.0),
                };
                Ok(fe_jump_coefficient_on(&mesh, self.eps, JumpPattern::Checkerboard, self.bc)?.0)
            }
            ProblemKind::Rescaled => {
                let a = fd_poisson_5pt(self.n, Boundary::Dirichlet)?;
                diagonally_rescaled(&a, &random_scaling(a.n_rows(), self.eps, 0))
            }
        }
    }
}
