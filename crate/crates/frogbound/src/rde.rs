//! The recursive distributional equation for the self-similar root-visit
//! count, driven entirely by spine-gadget realizations: truncated direct
//! sampling, population dynamics for the operator, and the bootstrap
//! quantity E[exp(-Theta)].

use crate::dist::{sample_poisson, PoissonMean};
use crate::gadget::{sample_operator, SpineLength};
use crate::rng::{RngStream, StreamFamily};
use crate::ssfm::alpha;
use crate::threshold::ThresholdSpec;
use crate::tree::ModelParams;
use crate::{Error, Result};
use rand::RngExt;
use rayon::prelude::*;

/// A multiset of nonnegative-integer samples standing in for a law.
#[derive(Clone, Debug)]
pub struct EmpiricalDist {
    samples: Vec<u64>,
}

impl EmpiricalDist {
    pub fn new(samples: Vec<u64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::param("empirical distribution needs >= 1 sample"));
        }
        Ok(EmpiricalDist { samples })
    }

    /// Point mass at `value`, represented by `size` copies.
    pub fn constant(value: u64, size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::param("empirical distribution needs >= 1 sample"));
        }
        EmpiricalDist::new(vec![value; size])
    }

    pub fn samples(&self) -> &[u64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().map(|&x| x as f64).sum::<f64>() / self.len() as f64
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        if self.len() < 2 {
            return 0.0;
        }
        self.samples
            .iter()
            .map(|&x| (x as f64 - m) * (x as f64 - m))
            .sum::<f64>()
            / (self.len() - 1) as f64
    }

    pub fn capped_mean(&self, cap: u64) -> f64 {
        self.samples.iter().map(|&x| x.min(cap) as f64).sum::<f64>() / self.len() as f64
    }

    /// Empirical CDF at `k`.
    pub fn cdf(&self, k: u64) -> f64 {
        self.samples.iter().filter(|&&x| x <= k).count() as f64 / self.len() as f64
    }

    /// Max pointwise CDF gap over `0..=k_max`.
    pub fn max_cdf_distance(&self, other: &EmpiricalDist, k_max: u64) -> f64 {
        (0..=k_max)
            .map(|k| (self.cdf(k) - other.cdf(k)).abs())
            .fold(0.0, f64::max)
    }

    /// Draw one stored sample uniformly (with replacement).
    pub fn draw(&self, rng: &mut RngStream) -> u64 {
        self.samples[rng.random_range(0..self.len())]
    }
}

/// Sample the k-th truncation of the recursive equation.
///
/// The 0-th truncation is identically zero. Each deeper level draws one
/// spine gadget whose v' and nerve counts are independent samples of the
/// previous level, and reports its root halts; the truncations are
/// stochastically nondecreasing in k.
pub fn sample_rde(params: &ModelParams, depth: u32, rng: &mut RngStream) -> Result<u64> {
    let a = alpha(params.tau(), params.d())?;
    sample_rde_inner(params.d(), a, params.mu(), depth, rng)
}

fn sample_rde_inner(
    d: u32,
    alpha: f64,
    mu: PoissonMean,
    depth: u32,
    rng: &mut RngStream,
) -> Result<u64> {
    if depth == 0 {
        return Ok(0);
    }
    // Realize the spine length first, then the child copies in slot order
    // (v', then the nerves), then the gadget that couples them.
    let n =
        crate::dist::sample_geometric(alpha, crate::dist::GeometricSupport::FromOne, rng)? as u32;
    let child_count = 1 + ((d - 1) * n) as usize;
    let mut children = Vec::with_capacity(child_count);
    for _ in 0..child_count {
        children.push(sample_rde_inner(d, alpha, mu, depth - 1, rng)?);
    }
    let mut next = 0usize;
    let sys = sample_operator(
        d,
        SpineLength::Fixed(n),
        mu,
        |_| {
            let v = children[next];
            next += 1;
            v
        },
        rng,
    )?;
    Ok(sys.root_halts)
}

/// One population-dynamics step: `population_size` independent samples of
/// the operator applied to `pi`.
///
/// Each output sample runs one gadget whose v' and nerve counts are drawn
/// from `pi` with replacement and reports the root-halt count. Only the
/// multiset content of `pi` matters, not its order.
pub fn iterate_b(
    pi: &EmpiricalDist,
    params: &ModelParams,
    population_size: usize,
    rng: &mut RngStream,
) -> Result<EmpiricalDist> {
    if population_size < 1_000 {
        return Err(Error::param(format!(
            "population_size must be >= 1000, got {population_size}"
        )));
    }
    let a = alpha(params.tau(), params.d())?;
    let mut out = Vec::with_capacity(population_size);
    for _ in 0..population_size {
        let sys = sample_operator(
            params.d(),
            SpineLength::Geometric(a),
            params.mu(),
            |rng| pi.draw(rng),
            rng,
        )?;
        out.push(sys.root_halts);
    }
    EmpiricalDist::new(out)
}

/// One realized bootstrap exponent.
#[derive(Clone, Debug)]
pub struct ThetaParams {
    pub d: u32,
    pub alpha: f64,
    pub mu: f64,
    pub lambda: f64,
    pub n: u32,
    pub activation: Vec<bool>,
    /// mu/(d+1) d^{-N+1} + lambda d^{-N} + lambda sum_{y,i} A_{y,i} d^{-y}.
    pub theta: f64,
}

/// Draw one gadget under Poi(lambda) candidate counts and assemble the
/// bootstrap exponent from its realized spine length and activation vector.
pub fn sample_theta(
    d: u32,
    alpha_value: f64,
    mu: PoissonMean,
    lambda: PoissonMean,
    rng: &mut RngStream,
) -> Result<ThetaParams> {
    let sys = sample_operator(
        d,
        SpineLength::Geometric(alpha_value),
        mu,
        |rng| sample_poisson(lambda, rng),
        rng,
    )?;
    let theta = theta_from_realization(d, mu.get(), lambda.get(), sys.n, &sys.activation);
    Ok(ThetaParams {
        d,
        alpha: alpha_value,
        mu: mu.get(),
        lambda: lambda.get(),
        n: sys.n,
        activation: sys.activation,
        theta,
    })
}

/// Assemble the exponent from a realized (N, activation) pair.
pub fn theta_from_realization(d: u32, mu: f64, lambda: f64, n: u32, activation: &[bool]) -> f64 {
    let df = d as f64;
    let per = (d - 1) as usize;
    let mut theta = mu / (df + 1.0) * df.powi(1 - n as i32) + lambda * df.powi(-(n as i32));
    for (idx, &a) in activation.iter().enumerate() {
        if a {
            let y = (idx / per) as i32 + 1;
            theta += lambda * df.powi(-y);
        }
    }
    theta
}

/// Pass/fail verdict of a bootstrap estimate against its target.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BootstrapVerdict {
    Pass,
    Fail,
    /// The target lies inside the 4-sigma confidence band.
    Inconclusive,
}

impl BootstrapVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            BootstrapVerdict::Pass => "pass",
            BootstrapVerdict::Fail => "fail",
            BootstrapVerdict::Inconclusive => "inconclusive",
        }
    }
}

/// A Monte Carlo estimate of E[exp(-Theta)] with its verdict against the
/// bootstrap target exp(-lambda - 1).
#[derive(Clone, Debug)]
pub struct BootstrapEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub threshold: f64,
    pub verdict: BootstrapVerdict,
    pub reps: u64,
}

/// Estimate E[exp(-Theta)] at (d, tau, mu, lambda) over `reps` gadgets and
/// compare against exp(-lambda - 1).
pub fn estimate_bootstrap(
    d: u32,
    tau: &ThresholdSpec,
    mu: PoissonMean,
    lambda: PoissonMean,
    reps: u64,
    streams: &StreamFamily,
) -> Result<BootstrapEstimate> {
    if reps < 10_000 {
        return Err(Error::param(format!("reps must be >= 10^4, got {reps}")));
    }
    let a = alpha(tau, d)?;
    let values: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = streams.stream(r);
            let t = sample_theta(d, a, mu, lambda, &mut rng).expect("validated parameters");
            (-t.theta).exp()
        })
        .collect();
    // Sequential reduction keeps the result independent of thread count.
    let n = reps as f64;
    let sum: f64 = values.iter().sum();
    let estimate = sum / n;
    let var = values
        .iter()
        .map(|v| (v - estimate) * (v - estimate))
        .sum::<f64>()
        / (n - 1.0);
    let std_error = (var / n).sqrt();

    let threshold = (-(lambda.get() + 1.0)).exp();
    let band = 4.0 * std_error;
    let verdict = if (estimate - threshold).abs() <= band {
        BootstrapVerdict::Inconclusive
    } else if estimate < threshold {
        BootstrapVerdict::Pass
    } else {
        BootstrapVerdict::Fail
    };
    Ok(BootstrapEstimate {
        estimate,
        std_error,
        threshold,
        verdict,
        reps,
    })
}
