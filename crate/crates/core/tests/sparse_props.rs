mod common;

use amgforge::dense::sym_eigen;
use amgforge::problems::{fd_poisson_5pt, Boundary};
use amgforge::sparse::{adjacency_graph, galerkin_product, m_matrix_relative, mmio, CsrMatrix};
use common::{assemble, couplings, max_abs};
use proptest::prelude::*;

fn random_p(n: usize, max_c: usize) -> impl Strategy<Value = CsrMatrix> {
    (1..=max_c.min(n)).prop_flat_map(move |n_c| {
        prop::collection::vec((0..n, 0..n_c, -1.0..1.0f64), 1..3 * n)
            .prop_map(move |t| CsrMatrix::from_triplets(n, n_c, &t).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn galerkin_matches_dense(
        (c, p) in couplings(2, 120, false, true)
            .prop_flat_map(|c| { let n = c.n; (Just(c), random_p(n, 40)) }),
        shift in 0.0..1.0f64,
    ) {
        let a = assemble(&c, shift);
        let sparse = galerkin_product(&p, &a).unwrap().to_dense();
        let (ad, pd) = (a.to_dense(), p.to_dense());
        let dense = pd.transpose() * &ad * &pd;
        // rounding is bounded by the absolute-value product
        let bound = pd.abs().transpose() * ad.abs() * pd.abs();
        let amax = max_abs(&ad);
        for (k, (x, y)) in sparse.iter().zip(dense.iter()).enumerate() {
            prop_assert!((x - y).abs() <= 1e-13 * amax.max(bound[k]), "entry {k}: {x} vs {y}");
        }
        prop_assert!(sparse.relative_eq(&sparse.transpose(), 1e-12 * amax.max(1.0), 0.0));
    }

    #[test]
    fn m_matrix_relative_keeps_row_sums(c in couplings(2, 60, false, true), shift in 0.0..1.0f64) {
        let a = assemble(&c, shift);
        let ap = m_matrix_relative(&a).unwrap();
        prop_assert!(ap.is_symmetric());
        for i in 0..a.n_rows() {
            let sum_a: f64 = a.row_iter(i).map(|(_, v)| v).sum();
            let sum_p: f64 = ap.row_iter(i).map(|(_, v)| v).sum();
            prop_assert!((sum_a - sum_p).abs() <= 1e-12 * a.get(i, i).max(1.0));
            for (j, v) in ap.row_iter(i) {
                prop_assert!(j == i || v <= 0.0, "positive off-diagonal ({i}, {j}) = {v}");
            }
        }
        // A+ - A is a sum of positive semidefinite edge matrices
        let diff = ap.to_dense() - a.to_dense();
        let low = sym_eigen(&diff).values.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert!(low >= -1e-12 * max_abs(&a.to_dense()).max(1.0));
    }

    #[test]
    fn adjacency_ignores_triplet_order(
        (c, order) in couplings(2, 40, false, true)
            .prop_flat_map(|c| { let m = 2 * c.edges.len(); (Just(c), common::permutation(m)) }),
    ) {
        let mut trip = Vec::new();
        for &(u, v, w) in &c.edges {
            trip.push((u, v, w));
            trip.push((v, u, w));
        }
        let shuffled: Vec<_> = order.iter().map(|&k| trip[k]).collect();
        let a = CsrMatrix::from_triplets(c.n, c.n, &trip).unwrap();
        let b = CsrMatrix::from_triplets(c.n, c.n, &shuffled).unwrap();
        prop_assert_eq!(adjacency_graph(&a).unwrap(), adjacency_graph(&b).unwrap());
    }

    #[test]
    fn matrix_market_round_trip(c in couplings(1, 30, false, true), shift in 0.0..1.0f64) {
        let a = assemble(&c, shift);
        let mut buf = Vec::new();
        mmio::write_matrix(&mut buf, &a).unwrap();
        let back = mmio::read_matrix(buf.as_slice()).unwrap();
        prop_assert_eq!(a, back);
    }
}

#[test]
fn poisson_condition_number_grows_like_h_squared() {
    let kappa = |n: usize| {
        let a = fd_poisson_5pt(n, Boundary::Dirichlet).unwrap().to_dense();
        let ev = sym_eigen(&a).values;
        let (lo, hi) = ev.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &x| (l.min(x), h.max(x)));
        hi / lo
    };
    for n in [7, 15] {
        let ratio = kappa(2 * n + 1) / kappa(n);
        assert!((3.5..=4.5).contains(&ratio), "n = {n}: ratio {ratio}");
    }
}

#[test]
fn galerkin_of_identity_is_the_matrix() {
    let a = fd_poisson_5pt(6, Boundary::Neumann).unwrap();
    let ac = galerkin_product(&CsrMatrix::identity(a.n_rows()), &a).unwrap();
    assert_eq!(ac.to_dense(), a.to_dense());
}
