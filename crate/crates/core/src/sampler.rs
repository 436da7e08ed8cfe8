//! Exact simulation of alpha-permanental vectors and Monte Carlo checks.
//!
//! A draw is `Z` from the enumerated mixture law followed by independent
//! `X_i = xi_{alpha + Z_i, a_i}`. The coupled variant writes
//! `X_i = a_i^{-1} xi^{(i)}_{alpha,1} + xi_{Z_i, a_i}` and keeps the first summand.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gamma_tools::{expected_max_iid, max_iid_tail_exact};
use crate::linalg::MultiIndex;
use crate::permanental_model::{z_masses, PermanentalSpec, ZDistribution};

/// Draws per substream in batch sampling.
pub const CHUNK: usize = 4096;
/// Default enumerated mass before sampling `Z`.
pub const Z_TARGET: f64 = 1.0 - 1e-11;
const MAX_ESCALATIONS: usize = 5;

/// ChaCha8 keyed by `seed`, on substream `stream_id`.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self { seed, stream_id, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }
    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.rng.try_fill_bytes(dest)
    }
}

/// `xi_{u,1}` by Marsaglia-Tsang squeeze rejection, boosted for `u < 1`.
pub fn standard_gamma<R: Rng + ?Sized>(u: f64, rng: &mut R) -> f64 {
    debug_assert!(u > 0.0);
    if u < 1.0 {
        let g = standard_gamma(u + 1.0, rng);
        let v: f64 = rng.gen();
        return g * v.powf(1.0 / u);
    }
    let d = u - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x: f64 = rng.sample(StandardNormal);
        let t = 1.0 + c * x;
        if t <= 0.0 {
            continue;
        }
        let v = t * t * t;
        let w: f64 = rng.gen();
        let x2 = x * x;
        if w < 1.0 - 0.0331 * x2 * x2 {
            return d * v;
        }
        if w.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// `xi_{u,v}` with shape `u` and rate `v`, as `xi_{u,1} / v`.
pub fn sample_gamma<R: Rng + ?Sized>(u: f64, v: f64, rng: &mut R) -> Result<f64> {
    if !(u > 0.0 && v > 0.0 && u.is_finite() && v.is_finite()) {
        return Err(Error::InvalidInput(format!("gamma needs positive shape and rate, got ({u}, {v})")));
    }
    Ok(standard_gamma(u, rng) / v)
}

fn draw_z_position<R: Rng + ?Sized>(zdist: &ZDistribution, rng: &mut R) -> Result<std::result::Result<usize, Vec<u32>>> {
    let u: f64 = rng.gen();
    if let Some(t) = zdist.locate(u) {
        return Ok(Ok(t));
    }
    let mut wider = zdist.clone();
    for _ in 0..MAX_ESCALATIONS {
        wider.extend_order()?;
        if let Some(t) = wider.locate(u) {
            return Ok(Err(wider.index(t).to_vec()));
        }
    }
    Err(Error::TruncationInfeasible(format!(
        "uniform {u} fell beyond the enumerated mass {} after {MAX_ESCALATIONS} extra orders",
        wider.covered_mass()
    )))
}

fn check_resolved(zdist: &ZDistribution) -> Result<()> {
    if zdist.covered_mass() < 1.0 - 1e-9 {
        return Err(Error::PreconditionViolated(format!(
            "covered mass {} is below 1 - 1e-9",
            zdist.covered_mass()
        )));
    }
    Ok(())
}

/// Inverse-CDF draw of `Z`; mass beyond the enumeration triggers extra orders.
pub fn sample_z<R: Rng + ?Sized>(zdist: &ZDistribution, rng: &mut R) -> Result<MultiIndex> {
    check_resolved(zdist)?;
    Ok(match draw_z_position(zdist, rng)? {
        Ok(t) => MultiIndex::new(zdist.index(t).to_vec()),
        Err(k) => MultiIndex::new(k),
    })
}

/// `N` draws of `X`, row-major `N x n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub spec: PermanentalSpec,
    pub seed: u64,
    pub draws: Vec<f64>,
    pub coupled_lower: Option<Vec<f64>>,
    pub z_draws: Vec<u32>,
}

impl SampleBatch {
    pub fn n(&self) -> usize {
        self.spec.n()
    }

    pub fn len(&self) -> usize {
        self.draws.len() / self.n().max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let n = self.n();
        &self.draws[r * n..(r + 1) * n]
    }

    pub fn lower_row(&self, r: usize) -> Option<&[f64]> {
        let n = self.n();
        self.coupled_lower.as_ref().map(|l| &l[r * n..(r + 1) * n])
    }

    pub fn z_row(&self, r: usize) -> &[u32] {
        let n = self.n();
        &self.z_draws[r * n..(r + 1) * n]
    }
}

struct Chunk {
    draws: Vec<f64>,
    lower: Vec<f64>,
    z: Vec<u32>,
}

fn sample_chunk(zdist: &ZDistribution, seed: u64, stream: u64, count: usize, couple: bool) -> Result<Chunk> {
    let spec = zdist.spec();
    let n = spec.n();
    let alpha = spec.alpha();
    let a = spec.pair().diag_a();
    let mut rng = RngStream::new(seed, stream);
    let mut chunk = Chunk {
        draws: Vec::with_capacity(count * n),
        lower: if couple { Vec::with_capacity(count * n) } else { Vec::new() },
        z: Vec::with_capacity(count * n),
    };
    let mut owned;
    for _ in 0..count {
        let k: &[u32] = match draw_z_position(zdist, &mut rng)? {
            Ok(t) => zdist.index(t),
            Err(k) => {
                owned = k;
                &owned
            }
        };
        for i in 0..n {
            let ki = k[i] as f64;
            if couple {
                let lower = standard_gamma(alpha, &mut rng) / a[i];
                let extra = if k[i] > 0 { standard_gamma(ki, &mut rng) / a[i] } else { 0.0 };
                chunk.lower.push(lower);
                chunk.draws.push(lower + extra);
            } else {
                chunk.draws.push(standard_gamma(alpha + ki, &mut rng) / a[i]);
            }
        }
        chunk.z.extend_from_slice(k);
    }
    Ok(chunk)
}

/// `N` draws sharded into substreams of `CHUNK` draws; the result depends only on the seed.
pub fn sample_from(zdist: &ZDistribution, count: usize, seed: u64, with_coupling: bool) -> Result<SampleBatch> {
    if count == 0 {
        return Err(Error::InvalidInput("need at least one draw".into()));
    }
    check_resolved(zdist)?;
    let chunks = count.div_ceil(CHUNK);
    let parts: Vec<Chunk> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = CHUNK.min(count - c * CHUNK);
            sample_chunk(zdist, seed, c as u64, len, with_coupling)
        })
        .collect::<Result<_>>()?;
    let n = zdist.n();
    let mut draws = Vec::with_capacity(count * n);
    let mut lower = Vec::with_capacity(if with_coupling { count * n } else { 0 });
    let mut z = Vec::with_capacity(count * n);
    for p in parts {
        draws.extend(p.draws);
        lower.extend(p.lower);
        z.extend(p.z);
    }
    Ok(SampleBatch {
        spec: zdist.spec().clone(),
        seed,
        draws,
        coupled_lower: with_coupling.then_some(lower),
        z_draws: z,
    })
}

pub fn sample_permanental(spec: &PermanentalSpec, count: usize, seed: u64, with_coupling: bool) -> Result<SampleBatch> {
    let z = z_masses(spec, Z_TARGET)?;
    sample_from(&z, count, seed, with_coupling)
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    pub fn from_values(values: impl Iterator<Item = f64>) -> Self {
        let (mut m, mut s, mut k) = (0.0, 0.0, 0usize);
        for v in values {
            k += 1;
            let d = v - m;
            m += d / k as f64;
            s += d * (v - m);
        }
        let se = if k > 1 { (s / (k - 1) as f64 / k as f64).sqrt() } else { 0.0 };
        Self { value: m, se }
    }
}

/// Mean of `exp(-<s, X>)` over the batch.
pub fn empirical_laplace(batch: &SampleBatch, s: &[f64]) -> Result<Estimate> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    if s.len() != batch.n() {
        return Err(Error::InvalidInput(format!("s has length {}, expected {}", s.len(), batch.n())));
    }
    Ok(Estimate::from_values(
        (0..batch.len()).map(|r| (-batch.row(r).iter().zip(s).map(|(x, si)| x * si).sum::<f64>()).exp()),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailComparison {
    pub lambda: f64,
    /// `P(max a_i X_i >= lambda)`.
    pub empirical: Estimate,
    /// `P(max_i xi^{(i)}_{alpha,1} >= lambda)`.
    pub iid: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RearrangementCheck {
    pub p: u64,
    pub lambda: f64,
    /// `P(max X_i >= lambda)`.
    pub empirical: Estimate,
    /// `P(max_{i <= [n/p]} xi^{(i)}_{alpha,1} >= a*_{[n/p]} lambda)`.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityReport {
    /// `E max a_i X_i`.
    pub permanental: Estimate,
    /// `E max xi^{(i)}_{alpha,1}`, by quadrature.
    pub iid: f64,
    pub difference: f64,
    pub se: f64,
    pub tails: Vec<TailComparison>,
    pub rearrangement: Vec<RearrangementCheck>,
}

pub const DEFAULT_LAMBDAS: [f64; 4] = [0.5, 1.0, 2.0, 4.0];

/// Compares the scaled permanental vector with independent gammas under the coordinate max.
pub fn check_permanental_inequality(
    spec: &PermanentalSpec,
    count: usize,
    seed: u64,
    lambdas: &[f64],
) -> Result<InequalityReport> {
    if count < 10_000 {
        return Err(Error::InvalidInput(format!("need at least 10^4 draws, got {count}")));
    }
    let batch = sample_permanental(spec, count, seed, false)?;
    let n = spec.n();
    let a = spec.pair().diag_a();
    let alpha = spec.alpha();
    let scaled_max: Vec<f64> = (0..batch.len())
        .map(|r| batch.row(r).iter().zip(a).map(|(x, ai)| x * ai).fold(0.0, f64::max))
        .collect();
    let plain_max: Vec<f64> = (0..batch.len()).map(|r| batch.row(r).iter().cloned().fold(0.0, f64::max)).collect();
    let permanental = Estimate::from_values(scaled_max.iter().cloned());
    let iid = expected_max_iid(n as u64, alpha)?;
    let tails = lambdas
        .iter()
        .map(|&lambda| TailComparison {
            lambda,
            empirical: Estimate::from_values(scaled_max.iter().map(|&m| (m >= lambda) as u8 as f64)),
            iid: max_iid_tail_exact(n as u64, alpha, lambda),
        })
        .collect();
    let mut sorted = a.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut rearrangement = Vec::new();
    for p in [1u64, 2] {
        let m = n as u64 / p;
        if m == 0 {
            continue;
        }
        let a_star = sorted[m as usize - 1];
        for &lambda in lambdas {
            rearrangement.push(RearrangementCheck {
                p,
                lambda,
                empirical: Estimate::from_values(plain_max.iter().map(|&x| (x >= lambda) as u8 as f64)),
                bound: max_iid_tail_exact(m, alpha, a_star * lambda),
            });
        }
    }
    Ok(InequalityReport {
        difference: permanental.value - iid,
        se: permanental.se,
        permanental,
        iid,
        tails,
        rearrangement,
    })
}
