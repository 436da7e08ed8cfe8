use permanental_core::markov_gen::{green_kernel, random_transient_chain};
use permanental_core::permanental_model::{direct_laplace, series_laplace, z_masses};
use permanental_core::sampler::{empirical_laplace, sample_permanental};
use permanental_core::{DenseMatrix, PermanentalSpec};
use proptest::prelude::*;

fn markov_spec(n: usize, seed: u64, alpha: f64) -> PermanentalSpec {
    let k = green_kernel(&random_transient_chain(n, 0.3, seed).unwrap()).unwrap();
    PermanentalSpec::from_kernel(&k, alpha).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn series_matches_determinant(n in 2usize..5, seed in 0u64..1000, alpha in 0.3f64..2.5,
                                  s in prop::collection::vec(0.0f64..2.0, 4)) {
        let spec = markov_spec(n, seed, alpha);
        let s = &s[..n];
        let d = direct_laplace(&spec, s).unwrap();
        let r = series_laplace(&spec, s, 1e-10).unwrap();
        prop_assert!((r.value - d.value).abs() <= 1e-8 * d.value, "{} vs {}", r.value, d.value);
    }

    #[test]
    fn z_masses_are_normalized(n in 2usize..5, seed in 0u64..1000, alpha in 0.3f64..2.5) {
        let z = z_masses(&markov_spec(n, seed, alpha), 1.0 - 1e-10).unwrap();
        let total = z.covered_mass() + z.tail_bound();
        prop_assert!((total - 1.0).abs() <= 1e-10, "{total}");
        prop_assert!(z.masses().iter().all(|&m| m >= 0.0));
    }

    #[test]
    fn coupling_never_violated(n in 2usize..4, seed in 0u64..1000, alpha in 0.3f64..2.0) {
        let spec = markov_spec(n, seed, alpha);
        let b = sample_permanental(&spec, 2000, seed, true).unwrap();
        for r in 0..b.len() {
            let lower = b.lower_row(r).unwrap();
            prop_assert!(b.row(r).iter().zip(lower).all(|(x, l)| x >= l));
        }
    }

    #[test]
    fn laplace_is_monotone_in_s(seed in 0u64..1000, t in 0.0f64..1.0) {
        let spec = markov_spec(3, seed, 1.0);
        let a = direct_laplace(&spec, &[t, t, t]).unwrap().value;
        let b = direct_laplace(&spec, &[t + 0.1, t, t]).unwrap().value;
        prop_assert!(b <= a && a <= 1.0);
    }
}

#[test]
fn sampler_matches_transform_on_tridiagonal_spec() {
    let a = DenseMatrix::from_rows(&[[2.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 2.0]]).unwrap();
    let spec = PermanentalSpec::from_a(&a, 0.5).unwrap();
    let batch = sample_permanental(&spec, 200_000, 11, false).unwrap();
    for s in [[0.2, 0.4, 0.6], [1.0, 1.0, 1.0], [2.0, 0.0, 0.5]] {
        let e = empirical_laplace(&batch, &s).unwrap();
        let d = direct_laplace(&spec, &s).unwrap();
        assert!((e.value - d.value).abs() < 5.0 * e.se, "{s:?}: {e:?} vs {}", d.value);
    }
}

#[test]
fn batches_do_not_depend_on_thread_count() {
    let spec = markov_spec(3, 5, 0.7);
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(|| sample_permanental(&spec, 10_000, 3, true).unwrap());
    let b = four.install(|| sample_permanental(&spec, 10_000, 3, true).unwrap());
    assert_eq!(a, b);
}
