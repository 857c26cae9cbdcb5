//! Base random variates: Poisson, geometric, binomial, and Poisson thinning.
//!
//! Samplers are fully determined by the supplied [`RngStream`], so every run
//! is reproducible. Poisson uses CDF inversion below mean 10 and the PTRS
//! transformed-rejection method above; geometric uses exact CDF inversion.

use crate::rng::RngStream;
use crate::stats::lgamma;
use crate::{Error, Result};
use rand::RngExt;
use rand_distr::Distribution;

/// A validated nonnegative, finite Poisson mean.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoissonMean(f64);

impl PoissonMean {
    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::param(format!(
                "Poisson mean must be finite and >= 0, got {value}"
            )));
        }
        Ok(PoissonMean(value))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Draw from Poi(mean).
pub fn sample_poisson(mean: PoissonMean, rng: &mut RngStream) -> u64 {
    let mu = mean.get();
    if mu == 0.0 {
        0
    } else if mu < 10.0 {
        poisson_inversion(mu, rng)
    } else {
        poisson_ptrs(mu, rng)
    }
}

fn poisson_inversion(mu: f64, rng: &mut RngStream) -> u64 {
    let u: f64 = rng.random();
    let mut p = (-mu).exp();
    let mut cum = p;
    let mut k = 0u64;
    while u > cum {
        k += 1;
        p *= mu / k as f64;
        cum += p;
        if k > 700 {
            // Unreachable for mu < 10 except via floating-point pathology.
            break;
        }
    }
    k
}

// Hormann's PTRS rejection sampler, valid for mu >= 10.
fn poisson_ptrs(mu: f64, rng: &mut RngStream) -> u64 {
    let b = 0.931 + 2.53 * mu.sqrt();
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let v_r = 0.9277 - 3.6224 / (b - 2.0);
    let log_mu = mu.ln();
    loop {
        let u: f64 = rng.random::<f64>() - 0.5;
        let v: f64 = rng.random();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + mu + 0.43).floor();
        if us >= 0.07 && v <= v_r {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        if (v * inv_alpha / (a / (us * us) + b)).ln() <= k * log_mu - mu - lgamma(k + 1.0) {
            return k as u64;
        }
    }
}

/// Support convention for [`sample_geometric`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GeometricSupport {
    /// P(N = n) = (1-p)^{n-1} p for n >= 1.
    FromOne,
    /// P(K = k) = (1-p)^k p for k >= 0.
    FromZero,
}

/// Draw a geometric variate with success probability `p` by CDF inversion.
pub fn sample_geometric(p: f64, support: GeometricSupport, rng: &mut RngStream) -> Result<u64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::param(format!(
            "geometric success probability must lie in (0, 1], got {p}"
        )));
    }
    let base = if p == 1.0 {
        0
    } else {
        let u: f64 = rng.random();
        // K >= k iff U >= 1 - (1-p)^k, so K = floor(ln(1-U)/ln(1-p)) is exact.
        ((1.0 - u).ln() / (1.0 - p).ln()).floor() as u64
    };
    Ok(match support {
        GeometricSupport::FromZero => base,
        GeometricSupport::FromOne => base + 1,
    })
}

/// Draw from Bin(n, p) via `rand_distr` (exact inversion/BTPE).
pub fn sample_binomial(n: u64, p: f64, rng: &mut RngStream) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    rand_distr::Binomial::new(n, p)
        .expect("binomial parameters validated above")
        .sample(rng)
}

/// Split a Poisson population by independent classification.
///
/// Draws `T ~ Poi(total_mean)` and classifies each of the `T` individuals
/// into class `j` with probability `probs[j]` (unclassified mass `1 - sum`
/// is discarded). The returned counts are independent, the j-th distributed
/// Poi(probs[j] * total_mean).
pub fn poisson_thin(
    total_mean: PoissonMean,
    probs: &[f64],
    rng: &mut RngStream,
) -> Result<Vec<u64>> {
    let mut sum = 0.0;
    for &p in probs {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::param(format!(
                "thinning probability must lie in [0, 1], got {p}"
            )));
        }
        sum += p;
    }
    if sum > 1.0 + 1e-12 {
        return Err(Error::param(format!(
            "thinning probabilities sum to {sum} > 1"
        )));
    }
    let total = sample_poisson(total_mean, rng);
    let mut counts = vec![0u64; probs.len()];
    for _ in 0..total {
        let u: f64 = rng.random();
        let mut cum = 0.0;
        for (j, &p) in probs.iter().enumerate() {
            cum += p;
            if u < cum {
                counts[j] += 1;
                break;
            }
        }
    }
    Ok(counts)
}
