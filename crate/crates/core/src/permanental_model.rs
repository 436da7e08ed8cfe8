//! Laplace transforms of alpha-permanental vectors and the mixture law of `Z`.
//!
//! With `A = K^{-1} = D - B` and `W = (D + S)^{-1} B`,
//! `E exp(-<s, X>) = |A|^alpha / |A + S|^alpha
//!                = |A|^alpha / prod (a_i + s_i)^alpha * sum_k |W(k)|_alpha / k!`,
//! and at `S = 0` the summands are the probabilities `P(Z = k)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{det_lu, multi_indices_of_order, DenseMatrix, MMatrixPair};
use crate::sampler::{standard_gamma, RngStream};
use crate::series::{CoefficientEngine, OrderSums};

/// Perron roots at or above this are refused.
pub const RHO_LIMIT: f64 = 1.0 - 1e-6;
const MAX_SUM_ORDER: usize = 20_000;

#[derive(Debug, Clone, PartialEq)]
pub struct PermanentalSpec {
    pair: MMatrixPair,
    alpha: f64,
}

impl PermanentalSpec {
    pub fn new(pair: MMatrixPair, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidInput(format!("alpha must be positive, got {alpha}")));
        }
        Ok(Self { pair, alpha })
    }

    pub fn from_kernel(k: &DenseMatrix, alpha: f64) -> Result<Self> {
        Self::new(MMatrixPair::from_kernel(k)?, alpha)
    }

    pub fn from_a(a: &DenseMatrix, alpha: f64) -> Result<Self> {
        Self::new(crate::linalg::validate_m_matrix(a)?, alpha)
    }

    pub fn pair(&self) -> &MMatrixPair {
        &self.pair
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn n(&self) -> usize {
        self.pair.n()
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Self::new(self.pair.clone(), alpha)
    }

    fn check_s(&self, s: &[f64]) -> Result<()> {
        if s.len() != self.n() {
            return Err(Error::InvalidInput(format!("s has length {}, expected {}", s.len(), self.n())));
        }
        if s.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidInput("s must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

/// A transform value with its relative error estimate and work count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LaplaceValue {
    pub value: f64,
    pub rel_err: f64,
    pub terms_used: usize,
}

/// `|I + KS|^{-alpha}`, cross-checked against `|A|^alpha / |A + S|^alpha`.
pub fn direct_laplace(spec: &PermanentalSpec, s: &[f64]) -> Result<LaplaceValue> {
    spec.check_s(s)?;
    let k = spec.pair.kernel();
    let n = spec.n();
    let iks = DenseMatrix::from_fn(n, |i, j| if i == j { 1.0 } else { 0.0 } + k[(i, j)] * s[j]);
    let det_iks = det_lu(&iks);
    let det_a = det_lu(spec.pair.a());
    let det_as = det_lu(&spec.pair.a().add_diag(s));
    let ratio = det_a / det_as;
    let via_a = ratio.powf(spec.alpha);
    let via_k = det_iks.powf(-spec.alpha);
    let rel_err = (via_a - via_k).abs() / via_a.abs().max(f64::MIN_POSITIVE);
    Ok(LaplaceValue { value: via_k, rel_err, terms_used: 0 })
}

/// Enumerated law of the mixing index `Z`.
#[derive(Debug, Clone)]
pub struct ZDistribution {
    spec: PermanentalSpec,
    n: usize,
    /// Multi-indices, `n` entries per term, graded lexicographic.
    indices: Vec<u32>,
    masses: Vec<f64>,
    cumulative: Vec<f64>,
    /// Number of terms through each order.
    order_ends: Vec<usize>,
    prefactor: f64,
    tail_bound: f64,
    engine: CoefficientEngine,
    sums: OrderSums,
}

impl ZDistribution {
    pub fn spec(&self) -> &PermanentalSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn index(&self, t: usize) -> &[u32] {
        &self.indices[t * self.n..(t + 1) * self.n]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[u32], f64)> + '_ {
        (0..self.len()).map(move |t| (self.index(t), self.masses[t]))
    }

    pub fn covered_mass(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    pub fn max_order(&self) -> usize {
        self.order_ends.len() - 1
    }

    /// `|A|^alpha / prod a_i^alpha`.
    pub fn prefactor(&self) -> f64 {
        self.prefactor
    }

    /// Perron root of `D^{-1} B`.
    pub fn rho(&self) -> f64 {
        self.sums.rho()
    }

    pub fn mass_of(&self, k: &[u32]) -> f64 {
        if k.len() != self.n {
            return 0.0;
        }
        let m: usize = k.iter().map(|&v| v as usize).sum();
        if m > self.max_order() {
            return 0.0;
        }
        let start = if m == 0 { 0 } else { self.order_ends[m - 1] };
        (start..self.order_ends[m]).find(|&t| self.index(t) == k).map_or(0.0, |t| self.masses[t])
    }

    /// First term whose cumulative mass exceeds `u`, if enumerated.
    pub fn locate(&self, u: f64) -> Option<usize> {
        let t = self.cumulative.partition_point(|&c| c <= u);
        (t < self.len()).then_some(t)
    }

    /// Appends the next order.
    pub fn extend_order(&mut self) -> Result<()> {
        self.engine.advance()?;
        let m = self.engine.order();
        let ks = multi_indices_of_order(self.n, m as u32);
        let mut acc = self.covered_mass();
        for (k, &c) in ks.iter().zip(self.engine.coefficients()) {
            let mass = self.prefactor * c;
            acc += mass;
            self.indices.extend_from_slice(k);
            self.masses.push(mass);
            self.cumulative.push(acc);
        }
        self.order_ends.push(self.masses.len());
        self.tail_bound = self.prefactor * self.sums.tail_after(m);
        Ok(())
    }
}

fn series_parts(pair: &MMatrixPair, alpha: f64, s: &[f64]) -> Result<(DenseMatrix, f64)> {
    let shifted: Vec<f64> = pair.diag_a().iter().zip(s).map(|(a, si)| a + si).collect();
    let inv: Vec<f64> = shifted.iter().map(|v| 1.0 / v).collect();
    let w = pair.b().scale_rows(&inv);
    let log_pref = det_lu(pair.a()).ln() - shifted.iter().map(|v| v.ln()).sum::<f64>();
    Ok((w, (alpha * log_pref).exp()))
}

fn order_sums(w: &DenseMatrix, alpha: f64) -> Result<OrderSums> {
    let sums = OrderSums::compute(w, alpha, MAX_SUM_ORDER)?;
    if sums.rho() >= RHO_LIMIT {
        return Err(Error::TruncationInfeasible(format!(
            "Perron root {} is within 1e-6 of 1",
            sums.rho()
        )));
    }
    Ok(sums)
}

/// Enumerates `P(Z = k)` by increasing `|k|` until the covered mass reaches `target_mass`.
pub fn z_masses(spec: &PermanentalSpec, target_mass: f64) -> Result<ZDistribution> {
    if !(target_mass > 0.0 && target_mass < 1.0 - 1e-12) {
        return Err(Error::InvalidInput(format!("target mass must lie in (0, 1 - 1e-12), got {target_mass}")));
    }
    let n = spec.n();
    let zero = vec![0.0; n];
    let (w, prefactor) = series_parts(&spec.pair, spec.alpha, &zero)?;
    let sums = order_sums(&w, spec.alpha)?;
    let engine = CoefficientEngine::new(&w, spec.alpha)?;
    let mut z = ZDistribution {
        spec: spec.clone(),
        n,
        indices: vec![0; n],
        masses: vec![prefactor],
        cumulative: vec![prefactor],
        order_ends: vec![1],
        prefactor,
        tail_bound: prefactor * sums.tail_after(0),
        engine,
        sums,
    };
    while z.covered_mass() < target_mass && z.tail_bound > 0.0 {
        z.extend_order()?;
    }
    Ok(z)
}

/// Evaluates the transform through the mixture series, stopping once the certified
/// tail falls below `rel_tol` times the partial sum.
pub fn series_laplace(spec: &PermanentalSpec, s: &[f64], rel_tol: f64) -> Result<LaplaceValue> {
    spec.check_s(s)?;
    if !(rel_tol > 1e-14 && rel_tol < 1e-2) {
        return Err(Error::InvalidInput(format!("rel_tol must lie in (1e-14, 1e-2), got {rel_tol}")));
    }
    let (w, prefactor) = series_parts(&spec.pair, spec.alpha, s)?;
    let sums = order_sums(&w, spec.alpha)?;
    let mut engine = CoefficientEngine::new(&w, spec.alpha)?;
    let mut partial = 1.0;
    let mut terms = 1usize;
    loop {
        let tail = sums.tail_after(engine.order());
        if tail < rel_tol * partial {
            return Ok(LaplaceValue { value: prefactor * partial, rel_err: tail / partial, terms_used: terms });
        }
        engine.advance()?;
        let c = engine.coefficients();
        terms += c.len();
        partial += c.iter().sum::<f64>();
    }
}

/// Monotone functionals available by name.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Functional {
    CoordinateMax,
    CoordinateSum,
    MaxIndicator(f64),
}

impl Functional {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            Functional::CoordinateMax => x.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            Functional::CoordinateSum => x.iter().sum(),
            Functional::MaxIndicator(lam) => {
                if x.iter().any(|&v| v >= lam) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        match t {
            "max" => Ok(Functional::CoordinateMax),
            "sum" => Ok(Functional::CoordinateSum),
            _ => match t.strip_prefix("max-indicator:") {
                Some(v) => v
                    .trim()
                    .parse::<f64>()
                    .map(Functional::MaxIndicator)
                    .map_err(|_| Error::InvalidInput(format!("bad threshold in {t:?}"))),
                None => Err(Error::InvalidInput(format!(
                    "unknown functional {t:?} (expected max, sum or max-indicator:<lambda>)"
                ))),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixtureEstimate {
    pub value: f64,
    /// Monte Carlo standard error.
    pub se: f64,
    /// Mass of `Z` not enumerated.
    pub uncovered_mass: f64,
    pub terms: usize,
}

/// `sum_k P(Z = k) E f(xi_{alpha + k_1, a_1}, ...)` with each inner expectation from
/// `mc_per_term` draws.
pub fn mixture_expectation(
    spec: &PermanentalSpec,
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    mc_per_term: usize,
    seed: u64,
    target_mass: f64,
) -> Result<MixtureEstimate> {
    if mc_per_term < 1000 {
        return Err(Error::InvalidInput(format!("mc_per_term must be at least 1000, got {mc_per_term}")));
    }
    let z = z_masses(spec, target_mass)?;
    let n = spec.n();
    let alpha = spec.alpha;
    let a = spec.pair.diag_a();
    let per_term: Vec<(f64, f64)> = (0..z.len())
        .into_par_iter()
        .map(|t| {
            let k = z.index(t);
            let mut rng = RngStream::new(seed, t as u64);
            let mut x = vec![0.0; n];
            let (mut sum, mut sum_sq) = (0.0, 0.0);
            for _ in 0..mc_per_term {
                for i in 0..n {
                    x[i] = standard_gamma(alpha + k[i] as f64, &mut rng) / a[i];
                }
                let v = f(&x);
                sum += v;
                sum_sq += v * v;
            }
            let m = mc_per_term as f64;
            let mean = sum / m;
            let var = ((sum_sq / m - mean * mean) * m / (m - 1.0)).max(0.0);
            (mean, var)
        })
        .collect();
    let mut value = 0.0;
    let mut var = 0.0;
    for (t, (mean, v)) in per_term.iter().enumerate() {
        let p = z.masses()[t];
        value += p * mean;
        var += p * p * v / mc_per_term as f64;
    }
    Ok(MixtureEstimate {
        value,
        se: var.sqrt(),
        uncovered_mass: (1.0 - z.covered_mass()).max(0.0),
        terms: z.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri() -> PermanentalSpec {
        PermanentalSpec::from_a(&DenseMatrix::from_rows(&[[2.0, -1.0], [-1.0, 2.0]]).unwrap(), 1.0).unwrap()
    }

    #[test]
    fn direct_examples() {
        let spec = PermanentalSpec::from_kernel(&DenseMatrix::diag(&[0.5, 1.0 / 3.0]), 1.0).unwrap();
        let v = direct_laplace(&spec, &[1.0, 1.0]).unwrap();
        assert!((v.value - 0.5).abs() < 1e-14 && v.rel_err < 1e-10);
        let v = direct_laplace(&tri(), &[1.0, 1.0]).unwrap();
        assert!((v.value - 0.375).abs() < 1e-14 && v.rel_err < 1e-10);
        assert_eq!(direct_laplace(&tri(), &[0.0, 0.0]).unwrap().value, 1.0);
        assert!(direct_laplace(&tri(), &[1.0, -1.0]).is_err());
    }

    #[test]
    fn z_mass_examples() {
        let z = z_masses(&tri(), 1.0 - 1e-11).unwrap();
        assert!((z.mass_of(&[0, 0]) - 0.75).abs() < 1e-14);
        assert!((z.mass_of(&[1, 1]) - 3.0 / 16.0).abs() < 1e-14);
        assert_eq!(z.mass_of(&[1, 0]), 0.0);
        assert!((z.covered_mass() + z.tail_bound() - 1.0).abs() < 1e-10);
        let d = PermanentalSpec::from_a(&DenseMatrix::diag(&[2.0, 5.0, 1.0]), 0.7).unwrap();
        let z = z_masses(&d, 0.999).unwrap();
        assert_eq!(z.len(), 1);
        assert!((z.covered_mass() - 1.0).abs() < 1e-15);
        assert_eq!(z.tail_bound(), 0.0);
    }

    #[test]
    fn series_examples() {
        let v = series_laplace(&tri(), &[1.0, 1.0], 1e-10).unwrap();
        assert!((v.value - 0.375).abs() < 0.375 * 1e-10, "{v:?}");
        let v = series_laplace(&tri(), &[0.0, 0.0], 1e-12).unwrap();
        assert!((v.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infinite_divisibility() {
        let s = [0.3, 1.7];
        let a = direct_laplace(&tri().with_alpha(0.4).unwrap(), &s).unwrap().value;
        let b = direct_laplace(&tri().with_alpha(1.1).unwrap(), &s).unwrap().value;
        let c = direct_laplace(&tri().with_alpha(1.5).unwrap(), &s).unwrap().value;
        assert!((a * b - c).abs() < 1e-14 * c);
    }

    #[test]
    fn functional_catalog() {
        assert_eq!(Functional::parse("max").unwrap().eval(&[1.0, 3.0]), 3.0);
        assert_eq!(Functional::parse("sum").unwrap().eval(&[1.0, 3.0]), 4.0);
        assert_eq!(Functional::parse("max-indicator:2.5").unwrap().eval(&[1.0, 3.0]), 1.0);
        assert_eq!(Functional::MaxIndicator(0.0).eval(&[0.0, 0.0]), 1.0);
        assert!(Functional::parse("min").is_err());
    }

    #[test]
    fn mixture_sum_matches_trace() {
        let f = Functional::CoordinateSum;
        let est = mixture_expectation(&tri(), &|x| f.eval(x), 2000, 11, 1.0 - 1e-9).unwrap();
        // K = A^{-1} = [[2, 1], [1, 2]] / 3, so E(X_1 + X_2) = alpha tr K = 4/3.
        assert!((est.value - 4.0 / 3.0).abs() < 4.0 * est.se + 1e-6, "{est:?}");
        let d = PermanentalSpec::from_a(&DenseMatrix::diag(&[2.0, 4.0]), 1.5).unwrap();
        let est = mixture_expectation(&d, &|x| f.eval(x), 5000, 3, 0.5).unwrap();
        assert!((est.value - (0.75 + 0.375)).abs() < 4.0 * est.se);
        let g = Functional::MaxIndicator(0.0);
        let est = mixture_expectation(&tri(), &|x| g.eval(x), 1000, 1, 1.0 - 1e-9).unwrap();
        assert!((est.value - 1.0).abs() < 1e-8);
    }
}
