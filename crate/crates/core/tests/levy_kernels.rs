use std::f64::consts::PI;
use std::sync::OnceLock;

use permanental_core::bounds::sigma_matrix;
use permanental_core::levy::{
    asymmetry_asymptotics, check_domination, check_h_ratio, kernel_matrix, spectral, u_beta, GProfile, LevyModel,
    SpectralFns,
};
use permanental_core::markov_gen::validate_appendix_lemma;

fn asymmetric() -> &'static SpectralFns {
    static F: OnceLock<SpectralFns> = OnceLock::new();
    F.get_or_init(|| spectral(&LevyModel::new(1.0, 0.8, 0.2, GProfile::log_power(-0.5, 0.0)).unwrap()).unwrap())
}

fn symmetric() -> &'static SpectralFns {
    static F: OnceLock<SpectralFns> = OnceLock::new();
    F.get_or_init(|| spectral(&LevyModel::new(1.0, 0.5, 0.5, GProfile::log_power(2.0, 0.0)).unwrap()).unwrap())
}

#[test]
fn spectral_functions_have_parity_and_sign() {
    for f in [asymmetric(), symmetric()] {
        for lam in [0.3, 7.0, 150.0, 1e5, 1e9] {
            assert_eq!(f.r_beta(lam), f.r_beta(-lam));
            assert_eq!(f.i_beta(lam), -f.i_beta(-lam));
            assert!(f.r_beta(lam) > 0.0);
        }
    }
    assert!(symmetric().i_beta(10.0).abs() == 0.0);
}

#[test]
fn table_matches_direct_evaluation() {
    let f = asymmetric();
    for l in [-3.3, 0.77, 4.1, 9.9, 22.5] {
        let (re, im) = f.model().psi_over_lambda(l).unwrap();
        let (tre, tim) = f.psi_ratio(l);
        assert!((tre - re.value).abs() < 1e-6 * re.value.abs(), "{l}: {tre} vs {}", re.value);
        assert!((tim - im.value).abs() < 1e-6 * im.value.abs(), "{l}: {tim} vs {}", im.value);
    }
}

#[test]
fn large_killing_rate_flattens_r() {
    let m = LevyModel::new(1e8, 0.7, 0.3, GProfile::log_power(0.5, 0.0)).unwrap();
    let f = spectral(&m).unwrap();
    for lam in [0.1, 1.0, 10.0] {
        assert!((f.r_beta(lam) * 1e8 - 1.0).abs() < 1e-6);
    }
}

#[test]
fn potential_identities() {
    for f in [asymmetric(), symmetric()] {
        let u0 = u_beta(f, 0.0).unwrap();
        assert_eq!(u0.h_part, 0.0);
        assert_eq!(u0.u_plus, u0.u_minus);
        let mut prev = 0.0;
        for z in [1e-3, 1e-2, 0.1, 0.5] {
            let u = u_beta(f, z).unwrap();
            assert!((u.u_plus + u.u_minus - 2.0 * u.r_part).abs() <= 1e-15 * u.r_part.abs());
            let direct = f.sigma2(z).unwrap();
            let diff = 2.0 * (u0.r_part - u.r_part);
            assert!((direct.value - diff).abs() < 1e-7, "z {z}: {} vs {diff}", direct.value);
            assert!(direct.value >= prev, "sigma^2 not monotone at {z}");
            prev = direct.value;
        }
        assert_eq!(f.sigma2(0.0).unwrap().value, 0.0);
    }
    assert!(u_beta(symmetric(), 0.1).unwrap().h_part == 0.0);
}

#[test]
fn asymmetric_drop_is_split_by_weights() {
    let rows = asymmetry_asymptotics(asymmetric(), &[1e-3, 1e-4]).unwrap();
    let last = rows.last().unwrap();
    assert!(last.rel_err_plus < 0.2 && last.rel_err_minus < 0.2, "{last:?}");
    assert!(rows.iter().all(|r| r.sum_identity_gap.abs() < 1e-12));
    let sym = asymmetry_asymptotics(symmetric(), &[1e-2]).unwrap();
    assert!((sym[0].u_plus - sym[0].u_minus).abs() == 0.0);
    assert!((sym[0].u0 - sym[0].u_plus - 0.5 * sym[0].sigma2).abs() < 1e-7);
}

#[test]
fn h_ratio_and_domination_on_small_z() {
    let r = check_h_ratio(asymmetric(), &[1e-2, 1e-3, 1e-4]).unwrap();
    assert!(r.below_half);
    assert!((r.rows[2].ratio - 0.3).abs() < 0.06);
    // The log-power fit only settles once J(1/z) is well past the cut.
    let far = check_h_ratio(asymmetric(), &[1e-6, 1e-9, 1e-12]).unwrap();
    assert!(far.minorant_diverges && far.kappa < 1.0, "{far:?}");
    let s = check_h_ratio(symmetric(), &[1e-2, 1e-3]).unwrap();
    assert_eq!(s.sup_ratio, 0.0);
    let d = check_domination(asymmetric(), &[1e-3, 1e-4]).unwrap();
    for row in &d.rows {
        assert!(row.b_measured > PI / 2.0 && row.lemma_ratio < 1.0, "{row:?}");
    }
    let d = check_domination(symmetric(), &[1e-3]).unwrap();
    assert!(d.rows[0].c_needed == 0.0 && d.rows[0].holds);
}

#[test]
fn kernel_matrix_inverts_to_m_matrix() {
    let points: Vec<f64> = (1..=8).map(|j| j as f64 / 8.0).collect();
    let c = kernel_matrix(symmetric(), &points).unwrap();
    let k = &c.kernel_values;
    let d = k[(0, 0)];
    for i in 0..8 {
        assert_eq!(k[(i, i)], d);
        for j in 0..8 {
            assert_eq!(k[(i, j)], k[(j, i)]);
        }
    }
    let r = validate_appendix_lemma(k);
    assert!(r.passed, "{r:?}");
    let a = kernel_matrix(asymmetric(), &[0.0, 0.25]).unwrap();
    let ak = &a.kernel_values;
    assert!(ak[(0, 1)] < ak[(1, 0)]);
    assert!(sigma_matrix(ak).sigma_star2 > 0.0);
}
