use permanental_core::bounds::{diag_bound_sigma_unchecked, diag_bound_simple, psi_star, sigma_matrix, PointConfig};
use permanental_core::gamma_tools::{gamma_tail_exact, tail_lower, tail_upper};
use permanental_core::linalg::invert;
use permanental_core::markov_gen::{green_kernel, random_transient_chain, validate_appendix_lemma};
use permanental_core::{DenseMatrix, Error, MMatrixPair};
use proptest::prelude::*;

#[test]
fn markov_kernels_satisfy_diagonal_lemmas() {
    let mut simple_checked = 0;
    for seed in 0..100u64 {
        let n = 2 + (seed % 5) as usize;
        let k = green_kernel(&random_transient_chain(n, 0.05, seed).unwrap()).unwrap();
        let report = validate_appendix_lemma(&k);
        assert!(report.passed && report.strictly_positive_rows, "seed {seed}: {report:?}");
        assert!(report.row_sums.iter().all(|&s| s > 1e-10));
        for i in 0..n {
            for j in 0..n {
                assert!(k[(i, j)] <= k[(j, j)] * (1.0 + 1e-12), "seed {seed}: K[{i},{j}] > K[{j},{j}]");
            }
        }
        let pair = MMatrixPair::from_kernel(&k).unwrap();
        match diag_bound_simple(&pair) {
            Ok(b) => {
                assert!(b.holds, "seed {seed}: {b:?}");
                simple_checked += 1;
            }
            Err(Error::HypothesisFailed { .. }) => {}
            Err(e) => panic!("seed {seed}: {e}"),
        }
    }
    assert!(simple_checked > 50);
}

#[test]
fn brownian_example_is_exact() {
    for n in 3..=8usize {
        let b = DenseMatrix::from_fn(n, |i, j| (i.min(j) + 1) as f64);
        let a = invert(&b).unwrap();
        for i in 0..n {
            for j in 0..n {
                let expect = if i == j {
                    if i == n - 1 { 1.0 } else { 2.0 }
                } else if i.abs_diff(j) == 1 {
                    -1.0
                } else {
                    0.0
                };
                assert!((a[(i, j)] - expect).abs() < 1e-10);
            }
        }
        let pair = MMatrixPair::from_kernel(&b).unwrap();
        assert!(matches!(diag_bound_simple(&pair), Err(Error::HypothesisFailed { .. })));
        let scaled = DenseMatrix::from_fn(n, |i, j| b[(i, j)] / (i + 1) as f64);
        let pair = MMatrixPair::from_kernel(&scaled).unwrap();
        for i in 0..n {
            let expect = if i == n - 1 { n as f64 } else { 2.0 * (i + 1) as f64 };
            assert!((pair.diag_a()[i] - expect).abs() < 1e-10);
        }
        let s = sigma_matrix(&scaled);
        assert!((s.sigma_star2 - 1.0 / n as f64).abs() < 1e-10);
        let bound = diag_bound_sigma_unchecked(&pair, 0.0);
        assert!((bound.bound - 2.0 * n as f64).abs() < 1e-10);
        assert!((bound.max_diagonal - 2.0 * (n - 1) as f64).abs() < 1e-10 && bound.holds);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn gamma_tail_sandwich(u in 0.05f64..6.0, extra in 0.01f64..30.0) {
        let mut lam = 2.0f64.max(2.0 * (u - 1.0)) + extra;
        if u < 1.0 {
            lam = lam.max(2.0 * (1.0 - u) + extra);
        }
        let exact = gamma_tail_exact(u, 1.0, lam);
        let lo = tail_lower(u, lam).unwrap();
        let hi = tail_upper(u, lam).unwrap();
        prop_assert!(lo <= exact && exact <= hi, "u {u} lam {lam}: {lo} {exact} {hi}");
    }

    #[test]
    fn psi_star_is_permutation_invariant(seed in 0u64..500, p in 1usize..3, shift in 0usize..5) {
        let n = 5;
        let k = green_kernel(&random_transient_chain(n, 0.2, seed).unwrap()).unwrap();
        let points: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let perm: Vec<usize> = (0..n).map(|i| (i * 2 + shift) % n).collect();
        let kp = DenseMatrix::from_fn(n, |i, j| k[(perm[i], perm[j])]);
        let pp: Vec<f64> = perm.iter().map(|&i| points[i]).collect();
        let a = psi_star(&PointConfig::new(points, k).unwrap(), p).unwrap();
        let b = psi_star(&PointConfig::new(pp, kp).unwrap(), p).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * a.abs());
    }

    #[test]
    fn sigma_metric_is_symmetric_and_nonnegative(seed in 0u64..500) {
        let k = green_kernel(&random_transient_chain(4, 0.2, seed).unwrap()).unwrap();
        let s = sigma_matrix(&k);
        for i in 0..4 {
            prop_assert_eq!(s.sigma2[i][i], 0.0);
            for j in 0..4 {
                prop_assert!((s.sigma2[i][j] - s.sigma2[j][i]).abs() <= 1e-14 * k.norm_inf());
                prop_assert!(s.sigma2[i][j] >= -1e-12);
            }
        }
    }
}
