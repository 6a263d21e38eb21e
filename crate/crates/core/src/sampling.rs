//! Seeded random streams and parameter samplers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::domain::ParameterSample;
use crate::error::{Result, SolverError};

/// Reproducible random stream. Same seed, same draws.
///
/// A stream is single-owner; parallel work derives independent sub-streams with
/// [`RngStream::split`].
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    counter: u64,
    rng: ChaCha8Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            counter: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of draws taken so far.
    pub fn counter(&self) -> u64 {
        self.counter
    }

    /// Independent sub-stream keyed by `index`; does not advance `self`.
    pub fn split(&self, index: u64) -> RngStream {
        RngStream::new(splitmix64(splitmix64(self.seed) ^ splitmix64(index.wrapping_add(1))))
    }

    /// Uniform draw in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        self.counter += 1;
        self.rng.random::<f64>()
    }

    /// Uniform draw in `[lo, hi]`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.counter += 1;
        Uniform::new_inclusive(lo, hi)
            .expect("finite ordered bounds")
            .sample(&mut self.rng)
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.counter += 1;
        StandardNormal.sample(&mut self.rng)
    }
}

/// `count` i.i.d. draws from `U[lo, hi]`, ids `0..count`.
pub fn sample_uniform(
    lo: f64,
    hi: f64,
    count: usize,
    rng: &mut RngStream,
) -> Result<Vec<ParameterSample>> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(SolverError::InvalidArgument(format!(
            "uniform support [{lo}, {hi}] is empty or unbounded"
        )));
    }
    Ok((0..count)
        .map(|id| ParameterSample::scalar(id, rng.uniform(lo, hi)))
        .collect())
}

/// Rejection sampling from `N(mu, sigma^2)` restricted to `[lo, hi]`.
pub fn sample_truncated_gaussian(
    mu: f64,
    sigma: f64,
    lo: f64,
    hi: f64,
    count: usize,
    rng: &mut RngStream,
) -> Result<Vec<ParameterSample>> {
    if !(sigma > 0.0) {
        return Err(SolverError::InvalidArgument(format!(
            "standard deviation must be positive, got {sigma}"
        )));
    }
    if !(lo < hi) {
        return Err(SolverError::InvalidArgument(format!(
            "truncation interval [{lo}, {hi}] is empty"
        )));
    }
    const MIN_RATE: f64 = 1e-6;
    const PROBE: u64 = 10_000_000;
    let mut out = Vec::with_capacity(count);
    let mut attempts: u64 = 0;
    while out.len() < count {
        let x = mu + sigma * rng.standard_normal();
        attempts += 1;
        if x >= lo && x <= hi {
            out.push(ParameterSample::scalar(out.len(), x));
        }
        if attempts >= PROBE {
            let rate = out.len() as f64 / attempts as f64;
            if rate < MIN_RATE {
                return Err(SolverError::AcceptanceTooLow { rate });
            }
        }
    }
    Ok(out)
}
