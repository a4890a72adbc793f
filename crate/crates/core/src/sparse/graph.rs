use std::collections::VecDeque;

use super::CsrMatrix;
use crate::error::{AmgError, Result};

/// Undirected simple graph in adjacency-list (CSR) form. Neighbor lists are
/// sorted and contain no self loops.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
}

impl Graph {
    /// Build from an edge list; each undirected edge may appear once or twice.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut lists = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(AmgError::InvalidArgument(format!(
                    "edge ({u}, {v}) outside a graph on {n} vertices"
                )));
            }
            if u != v {
                lists[u].push(v);
                lists[v].push(u);
            }
        }
        Ok(Self::from_lists(lists))
    }

    pub(crate) fn from_lists(mut lists: Vec<Vec<usize>>) -> Self {
        let mut offsets = vec![0];
        let mut neighbors = Vec::new();
        for (u, l) in lists.iter_mut().enumerate() {
            l.sort_unstable();
            l.dedup();
            neighbors.extend(l.iter().copied().filter(|&v| v != u));
            offsets.push(neighbors.len());
        }
        Graph { offsets, neighbors }
    }

    pub fn n_vertices(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn n_edges(&self) -> usize {
        self.neighbors.len() / 2
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.neighbors[self.offsets[u]..self.offsets[u + 1]]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.offsets[u + 1] - self.offsets[u]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n_vertices())
            .flat_map(move |u| self.neighbors(u).iter().map(move |&v| (u, v)))
            .filter(|&(u, v)| u < v)
    }

    /// Connected component label of every vertex, labels numbered in order of
    /// first appearance, and the number of components.
    pub fn connected_components(&self) -> (usize, Vec<usize>) {
        let n = self.n_vertices();
        let mut label = vec![usize::MAX; n];
        let mut count = 0;
        let mut queue = VecDeque::new();
        for s in 0..n {
            if label[s] != usize::MAX {
                continue;
            }
            label[s] = count;
            queue.push_back(s);
            while let Some(u) = queue.pop_front() {
                for &v in self.neighbors(u) {
                    if label[v] == usize::MAX {
                        label[v] = count;
                        queue.push_back(v);
                    }
                }
            }
            count += 1;
        }
        (count, label)
    }

    /// Breadth-first hop distance from the nearest source; `usize::MAX` when
    /// unreachable.
    pub fn distances_from(&self, sources: &[usize]) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.n_vertices()];
        let mut queue = VecDeque::new();
        for &s in sources {
            if dist[s] != 0 {
                dist[s] = 0;
                queue.push_back(s);
            }
        }
        while let Some(u) = queue.pop_front() {
            for &v in self.neighbors(u) {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Subgraph on `vertices`, relabelled 0..vertices.len() in the given order.
    pub fn induced(&self, vertices: &[usize]) -> Graph {
        let mut map = vec![usize::MAX; self.n_vertices()];
        for (k, &v) in vertices.iter().enumerate() {
            map[v] = k;
        }
        let lists = vertices
            .iter()
            .map(|&u| {
                self.neighbors(u)
                    .iter()
                    .filter_map(|&v| (map[v] != usize::MAX).then_some(map[v]))
                    .collect()
            })
            .collect();
        Graph::from_lists(lists)
    }

    /// Edge union with another graph on the same vertex set.
    pub fn union(&self, other: &Graph) -> Result<Graph> {
        if self.n_vertices() != other.n_vertices() {
            return Err(AmgError::Dimension("graph union: vertex counts differ".into()));
        }
        let lists = (0..self.n_vertices())
            .map(|u| {
                let mut l = self.neighbors(u).to_vec();
                l.extend_from_slice(other.neighbors(u));
                l
            })
            .collect();
        Ok(Graph::from_lists(lists))
    }
}

/// Off-diagonal sparsity graph of a structurally symmetric matrix.
pub fn adjacency_graph(a: &CsrMatrix) -> Result<Graph> {
    if !a.is_square() {
        return Err(AmgError::Dimension("adjacency_graph: matrix not square".into()));
    }
    let n = a.n_rows();
    let mut lists = Vec::with_capacity(n);
    for i in 0..n {
        let mut l = Vec::new();
        for (j, _) in a.row_iter(i) {
            if j != i {
                if a.get(j, i) == 0.0 {
                    return Err(AmgError::NotSymmetric { row: i, col: j });
                }
                l.push(j);
            }
        }
        lists.push(l);
    }
    Ok(Graph::from_lists(lists))
}

/// M-matrix relative A+: positive off-diagonal couplings are removed and
/// added to the diagonal, so A+ 1 = A 1 and A - A+ is negative semidefinite.
pub fn m_matrix_relative(a: &CsrMatrix) -> Result<CsrMatrix> {
    if !a.is_symmetric() {
        let (row, col) = a.check_symmetric().unwrap_or((0, 0));
        return Err(AmgError::NotSymmetric { row, col });
    }
    let n = a.n_rows();
    let mut entries = Vec::with_capacity(a.nnz());
    for i in 0..n {
        let mut shift = 0.0;
        for (j, v) in a.row_iter(i) {
            if j != i && v > 0.0 {
                shift += v;
            } else {
                entries.push((i, j, v));
            }
        }
        if shift != 0.0 {
            entries.push((i, i, shift));
        }
    }
    CsrMatrix::from_triplets(n, n, &entries)
}
