#![allow(dead_code)]

use amgforge::sparse::CsrMatrix;
use nalgebra::DMatrix;
use proptest::prelude::*;

/// Random couplings on `n` vertices: (u, v, a_uv). Negative values are the
/// usual M-matrix couplings.
#[derive(Clone, Debug)]
pub struct Couplings {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

/// Diagonally dominant symmetric matrix with a_ii = sum_j |a_ij| + shift.
/// Positive semidefinite for shift = 0, definite for shift > 0.
pub fn assemble(c: &Couplings, shift: f64) -> CsrMatrix {
    let mut diag = vec![shift; c.n];
    let mut trip = Vec::new();
    for &(u, v, w) in &c.edges {
        if u == v {
            continue;
        }
        trip.push((u, v, w));
        trip.push((v, u, w));
        diag[u] += w.abs();
        diag[v] += w.abs();
    }
    trip.extend(diag.iter().enumerate().map(|(i, &d)| (i, i, d)));
    CsrMatrix::from_triplets(c.n, c.n, &trip).unwrap()
}

/// Couplings on up to `max_n` vertices. `connected` adds a path through all
/// vertices; `positive` lets some couplings have the wrong sign.
pub fn couplings(min_n: usize, max_n: usize, connected: bool, positive: bool) -> impl Strategy<Value = Couplings> {
    (min_n..=max_n).prop_flat_map(move |n| {
        let weight = if positive {
            prop_oneof![3 => -2.0..-0.1f64, 1 => 0.05..1.0f64].boxed()
        } else {
            (-2.0..-0.1f64).boxed()
        };
        let path = if connected {
            prop::collection::vec(-2.0..-0.1f64, n - 1).boxed()
        } else {
            Just(Vec::new()).boxed()
        };
        (prop::collection::vec((0..n, 0..n, weight), 0..2 * n), path).prop_map(move |(mut edges, path)| {
            edges.extend(path.into_iter().enumerate().map(|(i, w)| (i, i + 1, w)));
            Couplings { n, edges }
        })
    })
}

/// Random permutation of 0..n as a strategy.
pub fn permutation(n: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..n).collect::<Vec<_>>()).prop_shuffle()
}

/// B = Q A Q' with (Q A Q')_{pi(i) pi(j)} = a_ij.
pub fn permute(a: &CsrMatrix, pi: &[usize]) -> CsrMatrix {
    let trip: Vec<_> = (0..a.n_rows())
        .flat_map(|i| a.row_iter(i).map(move |(j, v)| (pi[i], pi[j], v)))
        .collect();
    CsrMatrix::from_triplets(a.n_rows(), a.n_cols(), &trip).unwrap()
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}
