mod common;

use amgforge::adaptive::{bootstrap_setup, ls_fit_prolongation, random_test_vectors, BootstrapParams, LsFitOptions};
use amgforge::coarsening::{mis, natural_order};
use amgforge::interpolation::SupportSet;
use amgforge::problems::{diagonally_rescaled, fd_poisson_5pt, random_scaling, Boundary};
use amgforge::smoothers::SmootherSpec;
use amgforge::sparse::adjacency_graph;
use common::{assemble, couplings};
use proptest::prelude::*;

/// Column supports from per-row coarse patterns.
fn supports_of(rows: &[Vec<usize>], n_c: usize) -> SupportSet {
    let mut cols = vec![Vec::new(); n_c];
    for (i, r) in rows.iter().enumerate() {
        for &c in r {
            cols[c].push(i);
        }
    }
    SupportSet::new(rows.len(), cols).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn larger_patterns_never_fit_worse(
        c in couplings(6, 60, true, false),
        extra in prop::collection::vec(prop::collection::vec(any::<prop::sample::Index>(), 0..3), 60),
        m in 2usize..7,
        seed in 0u64..1000,
    ) {
        let a = assemble(&c, 0.05);
        let g = adjacency_graph(&a).unwrap();
        let cpts = mis(&g, &natural_order(a.n_rows())).coarse_points();
        let n_c = cpts.len();
        let mut col = vec![None; a.n_rows()];
        for (k, &v) in cpts.iter().enumerate() {
            col[v] = Some(k);
        }
        // every vertex is coarse or next to a coarse vertex (maximal MIS)
        let small: Vec<Vec<usize>> = (0..a.n_rows())
            .map(|i| vec![col[i].or_else(|| g.neighbors(i).iter().find_map(|&j| col[j])).unwrap()])
            .collect();
        let large: Vec<Vec<usize>> = small
            .iter()
            .zip(&extra)
            .map(|(s, e)| {
                let mut r: Vec<usize> = s.iter().copied().chain(e.iter().map(|ix| ix.index(n_c))).collect();
                r.sort_unstable();
                r.dedup();
                r
            })
            .collect();
        let psi = random_test_vectors(&a, m, seed, &[]);
        let psi_c: Vec<Vec<f64>> = psi.iter().map(|v| cpts.iter().map(|&c| v[c]).collect()).collect();
        let opts = LsFitOptions { eps_fit: 0.0, ..Default::default() };
        let fit_small = ls_fit_prolongation(&psi, &psi_c, &supports_of(&small, n_c), None, &opts).unwrap();
        let fit_large = ls_fit_prolongation(&psi, &psi_c, &supports_of(&large, n_c), None, &opts).unwrap();
        for (i, (r0, r1)) in fit_small.residuals.iter().zip(&fit_large.residuals).enumerate() {
            prop_assert!(*r1 <= r0 + 1e-10, "row {i}: {r1} > {r0}");
        }
        // coarse rows are reproduced exactly by injection
        for &v in &cpts {
            prop_assert!(fit_small.residuals[v] <= 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn bootstrap_is_deterministic_and_monotone(seed in 0u64..1000) {
        let a = diagonally_rescaled(&fd_poisson_5pt(10, Boundary::Dirichlet).unwrap(), &random_scaling(100, 10.0, seed)).unwrap();
        let params = BootstrapParams { seed, max_rounds: 2, ..Default::default() };
        let smoother = SmootherSpec::default();
        let (h1, s1) = bootstrap_setup(&a, &smoother, &params).unwrap();
        let (h2, s2) = bootstrap_setup(&a, &smoother, &params).unwrap();
        prop_assert_eq!(&s1.history, &s2.history);
        prop_assert_eq!(h1.sizes(), h2.sizes());
        for (l1, l2) in h1.levels.iter().zip(&h2.levels) {
            prop_assert_eq!(l1.p.as_ref().map(|p| &p.p), l2.p.as_ref().map(|p| &p.p));
        }
        prop_assert!(s1.history.windows(2).all(|w| w[1] <= w[0]), "{:?}", s1.history);
    }
}
