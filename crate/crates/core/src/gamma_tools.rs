//! Gamma tail probabilities, two-sided tail bounds and max-of-iid bounds.
//!
//! Throughout, `xi_{u,v}` has density `v^u x^{u-1} e^{-vx} / Gamma(u)` (shape `u`,
//! rate `v`), so `P(xi_{u,v} >= t) = Q(u, v t)` with `Q` the regularized upper
//! incomplete gamma function.

use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{Error, Result};

const MAX_ITER: usize = 10_000;
const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;

/// Regularized upper incomplete gamma `Q(a, x)`.
///
/// Series for `x < a + 1`, modified-Lentz continued fraction otherwise.
pub fn upper_regularized(a: f64, x: f64) -> f64 {
    assert!(a > 0.0 && x >= 0.0, "need a > 0 and x >= 0");
    if x == 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    let log_prefactor = -x + a * x.ln() - ln_gamma(a);
    if x < a + 1.0 {
        1.0 - lower_series(a, x, log_prefactor)
    } else {
        upper_continued_fraction(a, x, log_prefactor)
    }
}

/// Regularized lower incomplete gamma `P(a, x) = 1 - Q(a, x)`.
pub fn lower_regularized(a: f64, x: f64) -> f64 {
    assert!(a > 0.0 && x >= 0.0, "need a > 0 and x >= 0");
    if x == 0.0 {
        return 0.0;
    }
    let log_prefactor = -x + a * x.ln() - ln_gamma(a);
    if x < a + 1.0 {
        lower_series(a, x, log_prefactor)
    } else {
        1.0 - upper_continued_fraction(a, x, log_prefactor)
    }
}

fn lower_series(a: f64, x: f64, log_prefactor: f64) -> f64 {
    let mut ap = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum * log_prefactor.exp()
}

fn upper_continued_fraction(a: f64, x: f64, log_prefactor: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    log_prefactor.exp() * h
}

/// `P(xi_{u,v} >= t)`.
pub fn gamma_tail_exact(u: f64, v: f64, t: f64) -> f64 {
    assert!(u > 0.0 && v > 0.0 && t >= 0.0, "need u, v > 0 and t >= 0");
    upper_regularized(u, v * t)
}

/// Upper bound `2 lam^{u-1} e^{-lam} / Gamma(u)` on `P(xi_{u,1} >= lam)`, valid for
/// `lam > 2(u - 1) v 0`.
pub fn tail_upper(u: f64, lam: f64) -> Result<f64> {
    check_shape(u)?;
    let threshold = (2.0 * (u - 1.0)).max(0.0);
    if !(lam > threshold) {
        return Err(Error::PreconditionViolated(format!(
            "upper tail bound needs lambda > {threshold}, got {lam}"
        )));
    }
    Ok(2.0 * envelope(u, lam))
}

/// Lower bound `(2/3) lam^{u-1} e^{-lam} / Gamma(u)`, valid for `lam >= 2` and, when
/// `u < 1`, `lam > 2(1 - u)`.
pub fn tail_lower(u: f64, lam: f64) -> Result<f64> {
    check_shape(u)?;
    if !(lam >= 2.0) {
        return Err(Error::PreconditionViolated(format!(
            "lower tail bound needs lambda >= 2, got {lam}"
        )));
    }
    if u < 1.0 && !(lam > 2.0 * (1.0 - u)) {
        return Err(Error::PreconditionViolated(format!(
            "lower tail bound needs lambda > 2(1 - u) = {}, got {lam}",
            2.0 * (1.0 - u)
        )));
    }
    Ok(2.0 / 3.0 * envelope(u, lam))
}

/// Both bounds; fails if either precondition fails.
pub fn tail_bounds(u: f64, lam: f64) -> Result<(f64, f64)> {
    Ok((tail_lower(u, lam)?, tail_upper(u, lam)?))
}

fn envelope(u: f64, lam: f64) -> f64 {
    ((u - 1.0) * lam.ln() - lam - ln_gamma(u)).exp()
}

fn check_shape(u: f64) -> Result<()> {
    if u > 0.0 && u.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("shape must be positive, got {u}")))
    }
}

/// Certified lower bound `1 - e^{-q}` on `P(max_{i<=n} xi^{(i)}_{u,v} >= (1-eps) log n / v)`,
/// available when `n >= 10` and `n^eps / (q Gamma(u) log n) >= 3/2`.
pub fn max_iid_lower(n: u64, u: f64, eps: f64, q: f64) -> Result<f64> {
    check_shape(u)?;
    if n < 10 {
        return Err(Error::PreconditionViolated(format!("need n >= 10, got {n}")));
    }
    if !(eps > 0.0 && q > 0.0) {
        return Err(Error::PreconditionViolated("need eps > 0 and q > 0".into()));
    }
    let nf = n as f64;
    let side = nf.powf(eps) / (q * gamma(u) * nf.ln());
    if !(side >= 1.5) {
        return Err(Error::PreconditionViolated(format!(
            "n^eps / (q Gamma(u) log n) = {side} is below 3/2"
        )));
    }
    Ok(1.0 - (-q).exp())
}

/// Exact `P(max_{i<=m} xi^{(i)}_{u,1} >= t) = 1 - (1 - Q(u, t))^m`.
pub fn max_iid_tail_exact(m: u64, u: f64, t: f64) -> f64 {
    let q = upper_regularized(u, t.max(0.0));
    -((m as f64) * (-q).ln_1p()).exp_m1()
}

/// `P(max_{i <= [n/p]} xi^{(i)}_{alpha,1} >= log n)`, evaluated exactly.
pub fn unbounded_lambda_check(n: u64, p: u64, alpha: f64) -> Result<f64> {
    check_shape(alpha)?;
    if n < 10 || p < 1 {
        return Err(Error::PreconditionViolated(format!("need n >= 10 and p >= 1, got n={n}, p={p}")));
    }
    Ok(max_iid_tail_exact(n / p, alpha, (n as f64).ln()))
}

/// `E max_{i<=m} xi^{(i)}_{u,1} = int_0^inf 1 - (1 - Q(u, x))^m dx`.
pub fn expected_max_iid(m: u64, u: f64) -> Result<f64> {
    check_shape(u)?;
    let mut upper = (u + 10.0).max(1.0);
    while (m as f64) * upper_regularized(u, upper) > 1e-17 {
        upper *= 1.5;
    }
    let r = crate::quadrature::integrate(|x| max_iid_tail_exact(m, u, x), 0.0, upper, 1e-13, 1e-13, 2000)?;
    Ok(r.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::erf::erfc;
    use statrs::function::gamma::gamma_ur;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn closed_forms() {
        for lam in [0.1, 1.0, 3.0, 10.0, 40.0] {
            assert!(rel(gamma_tail_exact(1.0, 1.0, lam), (-lam).exp()) < 1e-13);
            assert!(rel(gamma_tail_exact(2.0, 1.0, lam), (1.0 + lam) * (-lam).exp()) < 1e-13);
        }
        // Q(1/2, 2) = erfc(sqrt 2)
        let (a, b) = (gamma_tail_exact(0.5, 1.0, 2.0), 0.045_500_263_896_358_4);
        assert!(rel(a, b) < 1e-12, "{a:e} {b:e}");
    }

    #[test]
    fn matches_reference_implementation() {
        for &u in &[0.1, 0.5, 1.3, 4.0, 25.0] {
            for &x in &[0.01, 0.5, 2.0, 7.0, 30.0, 80.0] {
                let ours = upper_regularized(u, x);
                let reference = gamma_ur(u, x);
                assert!(rel(ours, reference) < 1e-11, "u={u} x={x}: {ours} vs {reference}");
                assert!((lower_regularized(u, x) + ours - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn scale_invariance() {
        for &v in &[0.1, 1.0, 10.0] {
            let a = gamma_tail_exact(2.5, v, 3.0 / v);
            let b = gamma_tail_exact(2.5, 1.0, 3.0);
            assert!(rel(a, b) < 1e-13);
        }
    }

    #[test]
    fn bounds_examples_and_preconditions() {
        let (lo, hi) = tail_bounds(1.0, 3.0).unwrap();
        assert!(rel(lo, 2.0 / 3.0 * (-3f64).exp()) < 1e-13 && rel(hi, 2.0 * (-3f64).exp()) < 1e-13);
        let exact = gamma_tail_exact(2.0, 1.0, 5.0);
        let (lo, hi) = tail_bounds(2.0, 5.0).unwrap();
        assert!(rel(exact, 6.0 * (-5f64).exp()) < 1e-13);
        assert!(rel(lo, 10.0 / 3.0 * (-5f64).exp()) < 1e-13 && rel(hi, 10.0 * (-5f64).exp()) < 1e-13);
        assert!(lo <= exact && exact <= hi);
        assert!(tail_upper(5.0, 8.0).is_err());
        assert!(tail_lower(0.5, 1.5).is_err());
    }

    #[test]
    fn max_iid_examples() {
        assert!(max_iid_lower(10, 1.0, 0.01, 1.0).is_err());
        let b = max_iid_lower(1_000_000, 1.0, 0.5, 1.0).unwrap();
        assert!(rel(b, 1.0 - (-1f64).exp()) < 1e-15);
        for n in [100u64, 10_000, 1_000_000] {
            for eps in [0.3, 0.5, 0.8] {
                if let Ok(bound) = max_iid_lower(n, 1.0, eps, 1.0) {
                    let nf = n as f64;
                    let exact = 1.0 - (1.0 - nf.powf(-(1.0 - eps))).powf(nf);
                    let ours = max_iid_tail_exact(n, 1.0, (1.0 - eps) * nf.ln());
                    assert!(rel(ours, exact) < 1e-10);
                    assert!(exact >= bound);
                }
            }
        }
    }

    #[test]
    fn lambda_check_examples() {
        for n in [10u64, 100, 1000] {
            let v = unbounded_lambda_check(n, 1, 1.0).unwrap();
            let expect = 1.0 - (1.0 - 1.0 / n as f64).powf(n as f64);
            assert!(rel(v, expect) < 1e-12);
        }
        let v = unbounded_lambda_check(10_000, 2, 0.5).unwrap();
        assert!(v > 0.0 && v < 1.0);
        // P(max of 5000 xi_{1/2} >= log 1e4) = 1 - (1 - erfc(sqrt(log 1e4)))^5000
        let q = erfc((10_000f64).ln().sqrt());
        assert!(rel(v, 1.0 - (1.0 - q).powi(5000)) < 1e-8);
    }

    #[test]
    fn expected_max_of_exponentials_is_harmonic() {
        for m in [1u64, 2, 5, 20] {
            let h: f64 = (1..=m).map(|k| 1.0 / k as f64).sum();
            assert!(rel(expected_max_iid(m, 1.0).unwrap(), h) < 1e-10);
        }
    }
}
