//! Potential densities of Levy processes with Levy measure
//! `nu(dx) = x^{-2} g(1/|x|) (p 1_{x>0} + q 1_{x<0}) dx`.
//!
//! Everything is evaluated in the log variable `L = log lambda`, with the profile
//! written as `G(t) = g(e^t)`, so that huge frequencies never overflow.
//!
//! With `E exp(i lambda Y_t) = exp(-t psi(lambda))`,
//! `u(z) = R(z) + H(z)`, `u(-z) = R(z) - H(z)`,
//! `R(z) = (1/pi) int_0^inf cos(lambda z) Re 1/(beta + psi) dlambda`,
//! `H(z) = (1/pi) int_0^inf sin(lambda z) Im 1/(beta + psi) dlambda`.

use std::f64::consts::{E, PI};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::PointConfig;
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::quadrature::{gk21, integrate, sum_lobes, QuadResult};

/// Periods of `s` integrated lobe by lobe before the tail is accelerated.
const PSI_PERIODS: usize = 16;
/// Lobes summed exactly up to a finite support end before switching to extrapolation.
const DIRECT_LOBES: usize = 2000;
const WYNN_LOBES: usize = 40;
const INNER_ABS: f64 = 1e-14;
const INNER_REL: f64 = 1e-12;
/// Table of `psi / lambda` over `log lambda` in `[TABLE_LO, TABLE_HI]`.
const TABLE_LO: f64 = -12.0;
const TABLE_HI: f64 = 48.0;
const TABLE_STEP: f64 = 1.0 / 32.0;
/// Beyond `log lambda = FAR_LOG` the tail of `R` uses its asymptotic form.
const FAR_LOG: f64 = 1e6;
/// Periods of `lambda z` integrated before the oscillatory tail.
const OUTER_PERIODS: usize = 16;

/// The slowly varying profile `g`, described through `G(t) = g(e^t)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum GProfile {
    /// `g(y) = (log y)^gamma (log log y)^delta 1_{y > eps_cut}`.
    LogPower { gamma: f64, delta: f64, eps_cut: f64 },
    /// `g(y) = c` for all `y > 0`.
    Constant(f64),
    /// Log-log linear interpolation through `(y_i, g_i)`, zero below `y_0`,
    /// constant beyond the last point.
    Tabulated { y: Vec<f64>, g: Vec<f64> },
}

impl GProfile {
    pub fn log_power(gamma: f64, delta: f64) -> Self {
        GProfile::LogPower { gamma, delta, eps_cut: E * E }
    }

    fn validate(&self) -> Result<()> {
        match self {
            GProfile::LogPower { gamma, delta, eps_cut } => {
                if !(gamma.is_finite() && delta.is_finite()) {
                    return Err(Error::InvalidInput("gamma and delta must be finite".into()));
                }
                // log log y must be positive on the support when delta != 0.
                let min_cut = if *delta != 0.0 { E } else { 1.0 };
                if !(*eps_cut > min_cut && eps_cut.is_finite()) {
                    return Err(Error::InvalidInput(format!("eps_cut must exceed {min_cut}, got {eps_cut}")));
                }
            }
            GProfile::Constant(c) => {
                if !(*c > 0.0 && c.is_finite()) {
                    return Err(Error::InvalidInput(format!("constant profile must be positive, got {c}")));
                }
            }
            GProfile::Tabulated { y, g } => {
                if y.len() < 2 || y.len() != g.len() {
                    return Err(Error::InvalidInput("tabulated profile needs at least two matching points".into()));
                }
                if y.windows(2).any(|w| !(w[1] > w[0])) || y[0] <= 0.0 {
                    return Err(Error::InvalidInput("tabulated abscissae must be positive and increasing".into()));
                }
                if g.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                    return Err(Error::InvalidInput("tabulated values must be positive".into()));
                }
            }
        }
        Ok(())
    }

    /// Log of the support start, if any.
    fn log_cut(&self) -> Option<f64> {
        match self {
            GProfile::LogPower { eps_cut, .. } => Some(eps_cut.ln()),
            GProfile::Constant(_) => None,
            GProfile::Tabulated { y, .. } => Some(y[0].ln()),
        }
    }

    /// `G(t) = g(e^t)`.
    pub fn g_log(&self, t: f64) -> f64 {
        match self {
            GProfile::LogPower { gamma, delta, eps_cut } => {
                if t <= eps_cut.ln() {
                    return 0.0;
                }
                let mut v = t.powf(*gamma);
                if *delta != 0.0 {
                    v *= t.ln().powf(*delta);
                }
                v
            }
            GProfile::Constant(c) => *c,
            GProfile::Tabulated { y, g } => {
                let ly0 = y[0].ln();
                if t < ly0 {
                    return 0.0;
                }
                let last = y.len() - 1;
                if t >= y[last].ln() {
                    return g[last];
                }
                let k = y.partition_point(|&v| v.ln() <= t).clamp(1, last);
                let (a, b) = (y[k - 1].ln(), y[k].ln());
                let w = (t - a) / (b - a);
                (g[k - 1].ln() * (1.0 - w) + g[k].ln() * w).exp()
            }
        }
    }

    pub fn g(&self, y: f64) -> f64 {
        if y <= 0.0 {
            0.0
        } else {
            self.g_log(y.ln())
        }
    }

    /// `int_a^b G(u) du` over the support.
    pub fn integral(&self, a: f64, b: f64) -> Result<QuadResult> {
        let a = match self.log_cut() {
            Some(c) => a.max(c),
            None => a,
        };
        if b <= a {
            return Ok(QuadResult::zero());
        }
        let f = |u: f64| self.g_log(u);
        if b - a <= 64.0 || a <= 1.0 {
            let mid = if a <= 1.0 && b > 64.0 { 64.0 } else { b };
            let head = integrate(f, a, mid, INNER_ABS, INNER_REL, 400)?;
            if mid >= b {
                return Ok(head);
            }
            let rest = integrate(|v: f64| self.g_log(v.exp()) * v.exp(), mid.ln(), b.ln(), INNER_ABS, INNER_REL, 400)?;
            return Ok(head + rest);
        }
        integrate(|v: f64| self.g_log(v.exp()) * v.exp(), a.ln(), b.ln(), INNER_ABS, INNER_REL, 400)
    }

    /// `J(e^t) = int_1^{e^t} g(s)/s ds = int_0^t G`.
    pub fn j(&self, t: f64) -> Result<f64> {
        Ok(self.integral(0.0, t)?.value)
    }

    /// Whether `int_0^inf G` diverges.
    pub fn j_diverges(&self) -> bool {
        match self {
            GProfile::LogPower { gamma, delta, .. } => *gamma > -1.0 || (*gamma == -1.0 && *delta >= -1.0),
            GProfile::Constant(_) | GProfile::Tabulated { .. } => true,
        }
    }

    /// `int_t^inf du / G(u)` when finite.
    pub fn inverse_tail(&self, t: f64) -> Result<Option<QuadResult>> {
        match self {
            GProfile::LogPower { gamma, delta, .. } => {
                let (g, d) = (*gamma, *delta);
                if g > 1.0 {
                    // u = e^v: int e^{(1 - g) v} v^{-d} dv
                    let v0 = t.ln();
                    let span = 60.0 / (g - 1.0);
                    let f = |v: f64| ((1.0 - g) * v).exp() * v.powf(-d);
                    Ok(Some(integrate(f, v0, v0 + span, 1e-300, 1e-12, 400)?))
                } else if g == 1.0 && d > 1.0 {
                    let v = t.ln().powf(1.0 - d) / (d - 1.0);
                    Ok(Some(QuadResult { value: v, error: v * f64::EPSILON }))
                } else {
                    Ok(None)
                }
            }
            GProfile::Constant(_) | GProfile::Tabulated { .. } => Ok(None),
        }
    }
}

/// Killing rate, jump weights and profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevyModel {
    pub beta: f64,
    pub p: f64,
    pub q: f64,
    pub profile: GProfile,
}

impl LevyModel {
    pub fn new(beta: f64, p: f64, q: f64, profile: GProfile) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidInput(format!("beta must be positive, got {beta}")));
        }
        if !(p >= 0.0 && q >= 0.0 && (p + q - 1.0).abs() <= 1e-12) {
            return Err(Error::InvalidInput(format!("weights must be nonnegative with p + q = 1, got ({p}, {q})")));
        }
        profile.validate()?;
        Ok(Self { beta, p, q, profile })
    }

    pub fn asymmetry(&self) -> f64 {
        self.p - self.q
    }

    pub fn is_symmetric(&self) -> bool {
        self.p == self.q
    }

    /// `(Re psi / lambda, Im psi / lambda)` at `lambda = e^l`.
    pub fn psi_over_lambda(&self, l: f64) -> Result<(QuadResult, QuadResult)> {
        let re = self.re_part(l)?;
        let im = if self.p == self.q { QuadResult::zero() } else { self.im_part(l)? * (self.p - self.q) };
        Ok((re, im))
    }

    /// `h(s) = G(l - log s)`: the profile seen at `lambda / s`.
    fn h(&self, l: f64, s: f64) -> f64 {
        self.profile.g_log(l - s.ln())
    }

    /// Upper end of the `s` support, `lambda / eps_cut`.
    fn s_end(&self, l: f64) -> f64 {
        match self.profile.log_cut() {
            Some(c) => {
                let e = l - c;
                if e > 700.0 {
                    f64::INFINITY
                } else {
                    e.exp()
                }
            }
            None => f64::INFINITY,
        }
    }

    /// `int_0^inf (1 - cos s) s^{-2} G(l - log s) ds`.
    fn re_part(&self, l: f64) -> Result<QuadResult> {
        let end = self.s_end(l);
        let big_s = 2.0 * PI * PSI_PERIODS as f64;
        let f = |s: f64| {
            let h = (0.5 * s).sin() / (0.5 * s);
            0.5 * h * h * self.h(l, s)
        };
        let mut total = QuadResult::zero();
        let head_end = big_s.min(end);
        for k in 0..PSI_PERIODS {
            let a = 2.0 * PI * k as f64;
            if a >= head_end {
                break;
            }
            let b = (a + 2.0 * PI).min(head_end);
            total = total + integrate(f, a, b, INNER_ABS, INNER_REL, 200)?;
        }
        if end > big_s {
            // int_S^end h / s^2 ds with u = l - log s.
            let top = l - big_s.ln();
            let bottom = match self.profile.log_cut() {
                Some(c) => c.max(top - 60.0),
                None => top - 60.0,
            };
            let flat = integrate(|u: f64| self.profile.g_log(u) * (u - l).exp(), bottom, top, 1e-300, INNER_REL, 400)?;
            let osc = self.trig_tail(|s| s.cos() * self.h(l, s) / (s * s), big_s, big_s + 0.5 * PI, end)?;
            total = total + flat - osc;
        }
        Ok(total)
    }

    /// `int_0^inf (s 1_{s < lambda} - sin s) s^{-2} G(l - log s) ds`.
    fn im_part(&self, l: f64) -> Result<QuadResult> {
        let end = self.s_end(l);
        let lam = if l > 700.0 { f64::INFINITY } else { l.exp() };
        let mut total = QuadResult::zero();
        // s in [0, min(1, end)], split at lambda.
        let one = end.min(1.0);
        let near = |s: f64| {
            let core = if s < lam {
                if s < 1e-3 {
                    s / 6.0 - s * s * s / 120.0
                } else {
                    (s - s.sin()) / (s * s)
                }
            } else {
                -s.sin() / (s * s)
            };
            core * self.h(l, s)
        };
        if lam < one {
            total = total + integrate(near, 0.0, lam, INNER_ABS, INNER_REL, 200)?;
            total = total + integrate(near, lam, one, INNER_ABS, INNER_REL, 200)?;
        } else {
            total = total + integrate(near, 0.0, one, INNER_ABS, INNER_REL, 200)?;
        }
        if end > 1.0 {
            // int_1^{min(lambda, end)} h / s ds = int_{l - log min}^{l} G.
            let log_min = l.min(end.ln());
            if log_min > 0.0 {
                total = total + self.profile.integral(l - log_min, l)?;
            }
            let big_s = 2.0 * PI * PSI_PERIODS as f64;
            let g = |s: f64| s.sin() * self.h(l, s) / (s * s);
            let head_end = big_s.min(end);
            let mut a = 1.0;
            let mut k = 1.0;
            while a < head_end {
                let b = (k * PI).min(head_end);
                total = total - integrate(g, a, b, INNER_ABS, INNER_REL, 200)?;
                a = b;
                k += 1.0;
            }
            if end > big_s {
                total = total - self.trig_tail(g, big_s, big_s + PI, end)?;
            }
        }
        Ok(total)
    }

    /// `int_start^end f` for an oscillating `f` with zeros at `first_zero + k pi`.
    fn trig_tail(&self, f: impl Fn(f64) -> f64, start: f64, first_zero: f64, end: f64) -> Result<QuadResult> {
        lobe_tail(f, start, first_zero, PI, end, 1e-300)
    }

    /// `psi(lambda)`.
    pub fn psi(&self, lambda: f64) -> Result<Complex64> {
        if lambda == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let (re, im) = self.psi_over_lambda(lambda.abs().ln())?;
        let v = Complex64::new(re.value, im.value) * lambda.abs();
        Ok(if lambda < 0.0 { v.conj() } else { v })
    }
}

/// Sum of lobes `[start, first_zero]`, then `[first_zero + k w, first_zero + (k + 1) w]`,
/// exactly up to a finite `end` when that takes at most `DIRECT_LOBES` lobes, otherwise
/// with epsilon acceleration of the infinite tail.
fn lobe_tail(f: impl Fn(f64) -> f64, start: f64, first_zero: f64, w: f64, end: f64, abs_tol: f64) -> Result<QuadResult> {
    let mut g = f;
    let bound = |k: usize| if k == 0 { start } else { first_zero + (k - 1) as f64 * w };
    let lobes_to_end = if end.is_finite() { (((end - first_zero) / w).ceil().max(0.0) as usize).saturating_add(1) } else { usize::MAX };
    if lobes_to_end <= DIRECT_LOBES {
        let mut total = QuadResult::zero();
        for k in 0..lobes_to_end {
            let a = bound(k);
            if a >= end {
                break;
            }
            let b = bound(k + 1).min(end);
            total = total + gk21(&mut g, a, b);
        }
        return Ok(total);
    }
    sum_lobes(|k| Ok(Some(gk21(&mut g, bound(k), bound(k + 1)))), WYNN_LOBES, abs_tol)
}

/// `R_beta`, `I_beta` and their integrals, backed by a table of `psi / lambda`.
#[derive(Debug, Clone)]
pub struct SpectralFns {
    model: LevyModel,
    table_re: Vec<f64>,
    table_im: Vec<f64>,
    /// `int_{e^TABLE_HI}^inf R_beta`.
    far_tail: QuadResult,
}

fn lagrange4(table: &[f64], x: f64) -> f64 {
    let pos = (x - TABLE_LO) / TABLE_STEP;
    let i = (pos.floor() as isize).clamp(1, table.len() as isize - 3) as usize;
    let t = pos - i as f64;
    let (p0, p1, p2, p3) = (table[i - 1], table[i], table[i + 1], table[i + 2]);
    // Cubic through nodes -1, 0, 1, 2.
    -t * (t - 1.0) * (t - 2.0) / 6.0 * p0 + (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0 * p1
        - (t + 1.0) * t * (t - 2.0) / 2.0 * p2
        + (t + 1.0) * t * (t - 1.0) / 6.0 * p3
}

/// Certifies integrability of `R_beta` and builds the evaluators.
pub fn spectral(model: &LevyModel) -> Result<SpectralFns> {
    let symmetric = model.is_symmetric();
    if symmetric {
        if model.profile.inverse_tail(10.0)?.is_none() {
            return Err(Error::NotIntegrable(
                "equal weights need int^inf dt / g(e^t) < inf; R_beta decays like 2/(pi lambda g(lambda))".into(),
            ));
        }
    } else if !model.profile.j_diverges() {
        return Err(Error::NotIntegrable(
            "unequal weights need int_1^n g(s)/s ds -> inf for the tail certificate".into(),
        ));
    }
    let count = ((TABLE_HI - TABLE_LO) / TABLE_STEP).round() as usize + 1;
    let rows: Vec<(f64, f64)> = (0..count)
        .into_par_iter()
        .map(|k| {
            let l = TABLE_LO + k as f64 * TABLE_STEP;
            model.psi_over_lambda(l).map(|(re, im)| (re.value, im.value))
        })
        .collect::<Result<_>>()?;
    let (table_re, table_im) = rows.into_iter().unzip();
    let mut fns = SpectralFns { model: model.clone(), table_re, table_im, far_tail: QuadResult::zero() };
    fns.far_tail = fns.log_tail(TABLE_HI)?;
    Ok(fns)
}

impl SpectralFns {
    pub fn model(&self) -> &LevyModel {
        &self.model
    }

    /// `(Re psi / lambda, Im psi / lambda)` at `log lambda = l`.
    pub fn psi_ratio(&self, l: f64) -> (f64, f64) {
        if (TABLE_LO + TABLE_STEP..=TABLE_HI - 2.0 * TABLE_STEP).contains(&l) {
            (lagrange4(&self.table_re, l), lagrange4(&self.table_im, l))
        } else {
            match self.model.psi_over_lambda(l) {
                Ok((re, im)) => (re.value, im.value),
                Err(_) => (f64::NAN, f64::NAN),
            }
        }
    }

    /// `(lambda R_beta, lambda I_beta)` at `log lambda = l`, stable for huge `l`.
    pub fn scaled_at_log(&self, l: f64) -> (f64, f64) {
        let (re, im) = self.psi_ratio(l);
        let b = self.model.beta * (-l).exp();
        let den = (b + re) * (b + re) + im * im;
        ((b + re) / den, -im / den)
    }

    pub fn r_beta(&self, lambda: f64) -> f64 {
        let lam = lambda.abs();
        if lam == 0.0 {
            return 1.0 / self.model.beta;
        }
        let (re, im) = self.psi_ratio(lam.ln());
        let a = self.model.beta + lam * re;
        let b = lam * im;
        a / (a * a + b * b)
    }

    pub fn i_beta(&self, lambda: f64) -> f64 {
        let lam = lambda.abs();
        if lam == 0.0 {
            return 0.0;
        }
        let (re, im) = self.psi_ratio(lam.ln());
        let a = self.model.beta + lam * re;
        let b = lam * im;
        let v = -b / (a * a + b * b);
        if lambda < 0.0 {
            -v
        } else {
            v
        }
    }

    /// Asymptotic `int_{e^t}^inf R_beta`.
    fn asymptotic_tail(&self, t: f64) -> Result<f64> {
        let m = &self.model;
        if m.is_symmetric() {
            let inv = m.profile.inverse_tail(t)?.ok_or_else(|| Error::NotIntegrable("tail diverges".into()))?;
            Ok(2.0 / PI * inv.value)
        } else {
            let d = m.asymmetry();
            Ok(PI / 2.0 / (d * d * m.profile.j(t)?))
        }
    }

    /// `int_{e^t0}^inf R_beta` in the log variable.
    fn log_tail(&self, t0: f64) -> Result<QuadResult> {
        let f = |v: f64| {
            let t = v.exp();
            self.scaled_at_log(t).0 * t
        };
        let near = integrate(|t: f64| self.scaled_at_log(t).0, t0, t0.max(64.0), 1e-300, 1e-10, 400)?;
        let mid_start = t0.max(64.0);
        let mid = integrate(f, mid_start.ln(), FAR_LOG.ln(), 1e-300, 1e-9, 400)?;
        let far = self.asymptotic_tail(FAR_LOG)?;
        Ok(near + mid + QuadResult { value: far, error: 1e-3 * far })
    }

    /// `int_a^inf R_beta`.
    pub fn l1_tail(&self, a: f64) -> Result<QuadResult> {
        let a = a.max(0.0);
        let l0 = TABLE_LO + TABLE_STEP;
        let mut total = QuadResult::zero();
        let start_log = if a < l0.exp() {
            total = total + integrate(|x| self.r_beta(x), a, l0.exp(), 1e-300, 1e-11, 200)?;
            l0
        } else {
            a.ln()
        };
        if start_log < TABLE_HI {
            total = total + integrate(|t: f64| self.scaled_at_log(t).0, start_log, TABLE_HI, 1e-300, 1e-11, 2000)?;
            total = total + self.far_tail;
        } else {
            total = total + self.log_tail(start_log)?;
        }
        Ok(total)
    }

    /// `int_0^inf trig(lambda z) F(lambda) dlambda` for `z > 0`, with `F` one of `R_beta`,
    /// `I_beta`.
    fn oscillatory(&self, z: f64, use_sin: bool) -> Result<QuadResult> {
        let f = |x: f64| {
            if use_sin {
                (x * z).sin() * self.i_beta(x)
            } else {
                (x * z).cos() * self.r_beta(x)
            }
        };
        let period = 2.0 * PI / z;
        let mut total = QuadResult::zero();
        for k in 0..OUTER_PERIODS {
            let a = k as f64 * period;
            total = total + integrate(f, a, a + period, 1e-15, 1e-11, 400)?;
        }
        let start = OUTER_PERIODS as f64 * period;
        let first_zero = if use_sin { start + PI / z } else { start + 0.5 * PI / z };
        total = total + lobe_tail(f, start, first_zero, PI / z, f64::INFINITY, 1e-300)?;
        Ok(total)
    }

    /// `(1/pi) int_0^inf cos(lambda z) R_beta`.
    pub fn r_part(&self, z: f64) -> Result<QuadResult> {
        let z = z.abs();
        if z == 0.0 {
            return Ok(self.l1_tail(0.0)? * (1.0 / PI));
        }
        Ok(self.oscillatory(z, false)? * (1.0 / PI))
    }

    /// `(1/pi) int_0^inf sin(lambda z) I_beta`, odd in `z`.
    pub fn h_part(&self, z: f64) -> Result<QuadResult> {
        if z == 0.0 || self.model.is_symmetric() {
            return Ok(QuadResult::zero());
        }
        let v = self.oscillatory(z.abs(), true)? * (1.0 / PI);
        Ok(if z < 0.0 { v * -1.0 } else { v })
    }

    /// `(2/pi) int_0^inf (1 - cos(lambda z)) R_beta`.
    pub fn sigma2(&self, z: f64) -> Result<QuadResult> {
        let z = z.abs();
        if z == 0.0 {
            return Ok(QuadResult::zero());
        }
        let period = 2.0 * PI / z;
        let f = |x: f64| {
            let h = (0.5 * x * z).sin();
            2.0 * h * h * self.r_beta(x)
        };
        let mut total = QuadResult::zero();
        for k in 0..OUTER_PERIODS {
            let a = k as f64 * period;
            total = total + integrate(f, a, a + period, 1e-15, 1e-11, 400)?;
        }
        let start = OUTER_PERIODS as f64 * period;
        let flat = self.l1_tail(start)?;
        let osc = lobe_tail(|x| (x * z).cos() * self.r_beta(x), start, start + 0.5 * PI / z, PI / z, f64::INFINITY, 1e-300)?;
        Ok((total + flat - osc) * (2.0 / PI))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UValue {
    pub z: f64,
    pub u_plus: f64,
    pub u_minus: f64,
    pub r_part: f64,
    pub h_part: f64,
    pub r_error: f64,
    pub h_error: f64,
}

/// `u(z)`, `u(-z)` and their two parts.
pub fn u_beta(fns: &SpectralFns, z: f64) -> Result<UValue> {
    let r = fns.r_part(z)?;
    let h = fns.h_part(z)?;
    Ok(UValue {
        z,
        u_plus: r.value + h.value,
        u_minus: r.value - h.value,
        r_part: r.value,
        h_part: h.value,
        r_error: r.error,
        h_error: h.error,
    })
}

/// `u(d)` for a signed offset.
pub fn u_at(fns: &SpectralFns, d: f64) -> Result<f64> {
    let v = u_beta(fns, d.abs())?;
    Ok(if d >= 0.0 { v.u_plus } else { v.u_minus })
}

pub fn sigma2_beta(fns: &SpectralFns, z: f64) -> Result<QuadResult> {
    fns.sigma2(z)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HRatioRow {
    pub z: f64,
    pub sigma2: f64,
    pub sigma2_error: f64,
    pub h: f64,
    pub h_error: f64,
    /// `|H(z)| / sigma^2(z)`.
    pub ratio: f64,
    /// `sigma^2(z) log(1/z)`.
    pub sigma2_log: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HRatioReport {
    pub rows: Vec<HRatioRow>,
    pub sup_ratio: f64,
    /// `sup_ratio < 1/2`.
    pub below_half: bool,
    /// Fit `sigma^2(z) ~ c (log 1/z)^{-kappa}` over the grid.
    pub kappa: f64,
    pub c: f64,
    /// `f(1/n) log n ~ c (log n)^{1 - kappa}` diverges, i.e. `kappa < 1`.
    pub minorant_diverges: bool,
}

fn grid_check(z_grid: &[f64]) -> Result<()> {
    if z_grid.is_empty() || z_grid.iter().any(|z| !(*z > 0.0 && *z < 1.0)) {
        return Err(Error::InvalidInput("z grid must be nonempty with entries in (0, 1)".into()));
    }
    Ok(())
}

/// Ratio of `|H|` to `sigma^2` on a grid of small `z`, with a minorant fit.
pub fn check_h_ratio(fns: &SpectralFns, z_grid: &[f64]) -> Result<HRatioReport> {
    grid_check(z_grid)?;
    let rows: Vec<HRatioRow> = z_grid
        .par_iter()
        .map(|&z| {
            let s = fns.sigma2(z)?;
            let h = fns.h_part(z)?;
            Ok(HRatioRow {
                z,
                sigma2: s.value,
                sigma2_error: s.error,
                h: h.value,
                h_error: h.error,
                ratio: h.value.abs() / s.value,
                sigma2_log: s.value * (1.0 / z).ln(),
            })
        })
        .collect::<Result<_>>()?;
    let sup_ratio = rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let (kappa, c) = if rows.len() >= 2 {
        let xs: Vec<f64> = rows.iter().map(|r| (1.0 / r.z).ln().ln()).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.sigma2.ln()).collect();
        let (slope, intercept) = least_squares(&xs, &ys);
        (-slope, intercept.exp())
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(HRatioReport { sup_ratio, below_half: sup_ratio < 0.5, kappa, c, minorant_diverges: kappa < 1.0, rows })
}

fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominationRow {
    pub z: f64,
    /// `|z| int_0^{pi/|z|} lambda |I_beta|`.
    pub lhs: f64,
    pub lhs_error: f64,
    /// `int_{pi/(2|z|)}^inf R_beta`.
    pub tail: f64,
    pub tail_error: f64,
    /// Smallest `C` with `lhs <= (C/2) tail`.
    pub c_needed: f64,
    pub holds: bool,
    /// `(int_{1/z}^inf R_beta) log(1/z)`.
    pub divergence_stat: f64,
    /// `lambda |I_beta(lambda)|` at `1/z`.
    pub ell: f64,
    /// `lambda R_beta(lambda)` at `1/z`.
    pub h: f64,
    /// `int_{1/z}^inf R_beta / ell(1/z)`.
    pub b_measured: f64,
    /// `2 |H(z)| / sigma^2(z)`.
    pub lemma_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominationReport {
    pub rows: Vec<DominationRow>,
    /// `R_beta` or `|I_beta|` increased somewhere on the sampled tail.
    pub monotonicity_unverified: bool,
}

/// Integral domination condition on a grid, with the tail divergence statistic.
pub fn check_domination(fns: &SpectralFns, z_grid: &[f64]) -> Result<DominationReport> {
    grid_check(z_grid)?;
    let rows: Vec<DominationRow> = z_grid
        .par_iter()
        .map(|&z| {
            let top = PI / z;
            let lhs_f = |x: f64| x * fns.i_beta(x).abs();
            let mut lhs = QuadResult::zero();
            let pieces = 64;
            for k in 0..pieces {
                let a = top * k as f64 / pieces as f64;
                lhs = lhs + integrate(lhs_f, a, a + top / pieces as f64, 1e-300, 1e-10, 200)?;
            }
            let lhs = lhs * z;
            let tail = fns.l1_tail(0.5 * PI / z)?;
            let c_needed = 2.0 * lhs.value / tail.value;
            let inv = 1.0 / z;
            let tail_1z = fns.l1_tail(inv)?.value;
            let (rl, il) = fns.scaled_at_log(inv.ln());
            let ell = il.abs();
            let s = fns.sigma2(z)?.value;
            let h = fns.h_part(z)?.value;
            Ok(DominationRow {
                z,
                lhs: lhs.value,
                lhs_error: lhs.error,
                tail: tail.value,
                tail_error: tail.error,
                c_needed,
                holds: c_needed < 1.0,
                divergence_stat: tail_1z * inv.ln(),
                ell,
                h: rl,
                b_measured: if ell > 0.0 { tail_1z / ell } else { f64::INFINITY },
                lemma_ratio: 2.0 * h.abs() / s,
            })
        })
        .collect::<Result<_>>()?;
    let z_min = z_grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let start = (1.0 / z_min).ln().max(1.0);
    let mut unverified = false;
    let mut prev: Option<(f64, f64)> = None;
    for k in 0..=200 {
        let l = start + k as f64 * 0.1;
        let x = l.exp();
        let cur = (fns.r_beta(x), fns.i_beta(x).abs());
        if let Some((r0, i0)) = prev {
            if cur.0 > r0 * (1.0 + 1e-9) || cur.1 > i0 * (1.0 + 1e-9) {
                unverified = true;
            }
        }
        prev = Some(cur);
    }
    Ok(DominationReport { rows, monotonicity_unverified: unverified })
}

/// Outcome of the classification of the log-power family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    /// Covered by the sufficient integral criterion.
    UnboundedByTheorem,
    /// Unbounded by the Gaussian comparison discussed alongside it.
    UnboundedPerDiscussion,
    BoundedPerDiscussion,
    Indeterminate,
}

impl Classification {
    pub fn label(&self) -> &'static str {
        match self {
            Classification::UnboundedByTheorem => "unbounded-by-theorem",
            Classification::UnboundedPerDiscussion => "unbounded-per-discussion",
            Classification::BoundedPerDiscussion => "bounded-per-discussion",
            Classification::Indeterminate => "indeterminate",
        }
    }
}

/// Classifies `g = (log)^gamma (log log)^delta` with weights `(p, q)`.
pub fn classify_log_power(gamma: f64, delta: f64, p: f64, q: f64) -> Result<Classification> {
    if !(p >= 0.0 && q >= 0.0 && (p + q - 1.0).abs() <= 1e-12) {
        return Err(Error::InvalidInput(format!("weights must be nonnegative with p + q = 1, got ({p}, {q})")));
    }
    let (threshold, critical) = if p != q {
        if !(gamma > -1.0) {
            return Err(Error::OutOfRange(format!("unequal weights need gamma > -1, got {gamma}")));
        }
        (0.0, 0.0)
    } else {
        if !(gamma > 1.0) {
            return Err(Error::OutOfRange(format!("equal weights need gamma > 1, got {gamma}")));
        }
        (2.0, 2.0)
    };
    Ok(if gamma < threshold || (gamma == threshold && delta < 0.0) {
        Classification::UnboundedByTheorem
    } else if gamma == critical && delta <= 2.0 {
        Classification::UnboundedPerDiscussion
    } else if gamma == critical {
        Classification::BoundedPerDiscussion
    } else {
        Classification::Indeterminate
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegralRow {
    pub n: f64,
    pub statistic: f64,
    /// Quadrature error of `statistic`.
    pub error: f64,
    pub log_n: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegralTable {
    pub rows: Vec<IntegralRow>,
    /// Ratios decrease along the grid.
    pub ratio_decreasing: bool,
}

/// `int_1^n g(s)/s ds` (unequal weights) or `(int_n^inf ds/(s g(s)))^{-1}` (equal weights)
/// against `log n`.
pub fn integral_criterion(profile: &GProfile, symmetric: bool, n_grid: &[f64]) -> Result<IntegralTable> {
    profile.validate()?;
    let rows = n_grid
        .iter()
        .map(|&n| {
            if !(n > 1.0) {
                return Err(Error::InvalidInput(format!("grid entries must exceed 1, got {n}")));
            }
            let t = n.ln();
            let (statistic, error) = if symmetric {
                match profile.inverse_tail(t)? {
                    Some(v) => (1.0 / v.value, v.error / (v.value * v.value)),
                    None => return Err(Error::NotIntegrable("int_n^inf ds/(s g(s)) diverges".into())),
                }
            } else {
                let r = profile.integral(0.0, t)?;
                (r.value, r.error)
            };
            Ok(IntegralRow { n, statistic, error, log_n: t, ratio: statistic / t })
        })
        .collect::<Result<Vec<_>>>()?;
    let decreasing = rows.windows(2).all(|w| w[1].ratio < w[0].ratio);
    Ok(IntegralTable { rows, ratio_decreasing: decreasing })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymmetryRow {
    pub z: f64,
    pub u0: f64,
    pub u_plus: f64,
    pub u_minus: f64,
    /// Quadrature error of `u(+-z)`.
    pub u_error: f64,
    pub sigma2: f64,
    pub sigma2_error: f64,
    /// Predicted `u(0) - u(z)`.
    pub predicted_drop_plus: f64,
    pub predicted_drop_minus: f64,
    pub rel_err_plus: f64,
    pub rel_err_minus: f64,
    /// `u(z) + u(-z) - 2 R(z)`.
    pub sum_identity_gap: f64,
}

/// Compares `u(0) - u(+-z)` with `(sigma^2/2)(1 -+ s |p - q|)`, `s = sign(q - p)`.
pub fn asymmetry_asymptotics(fns: &SpectralFns, z_grid: &[f64]) -> Result<Vec<AsymmetryRow>> {
    grid_check(z_grid)?;
    let u0q = fns.r_part(0.0)?;
    let u0 = u0q.value;
    let d = fns.model.q - fns.model.p;
    z_grid
        .par_iter()
        .map(|&z| {
            let u = u_beta(fns, z)?;
            let sq = fns.sigma2(z)?;
            let s = sq.value;
            let pp = 0.5 * s * (1.0 - d);
            let pm = 0.5 * s * (1.0 + d);
            let rel = |drop: f64, pred: f64| (drop - pred).abs() / pred.abs();
            Ok(AsymmetryRow {
                z,
                u0,
                u_plus: u.u_plus,
                u_minus: u.u_minus,
                u_error: u.r_error + u.h_error + u0q.error,
                sigma2: s,
                sigma2_error: sq.error,
                predicted_drop_plus: pp,
                predicted_drop_minus: pm,
                rel_err_plus: rel(u0 - u.u_plus, pp),
                rel_err_minus: rel(u0 - u.u_minus, pm),
                sum_identity_gap: u.u_plus + u.u_minus - 2.0 * u.r_part,
            })
        })
        .collect()
}

/// `K_ij = u(t_j - t_i)`.
pub fn kernel_matrix(fns: &SpectralFns, points: &[f64]) -> Result<PointConfig> {
    let n = points.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let values: Vec<f64> = pairs.par_iter().map(|&(i, j)| u_at(fns, points[j] - points[i])).collect::<Result<_>>()?;
    let k = DenseMatrix::from_fn(n, |i, j| values[i * n + j]);
    PointConfig::new(points.to_vec(), k)
}
