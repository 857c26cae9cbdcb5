//! Poisson stochastic-order utilities: the negative-exponential-moment
//! domination criterion and the smallest thinning mean that achieves a target
//! domination level.

use crate::rng::RngStream;
use crate::{Error, Result};

/// Mixed-Poisson domination check.
///
/// For `Y ~ Poi(Theta)` with `Theta` a nonnegative random parameter,
/// `Y` stochastically dominates `Poi(lambda)` if and only if
/// `E[exp(-Theta)] <= exp(-lambda)`. The boundary is inclusive.
pub fn dominates_poisson(neg_exp_moment: f64, lambda: f64) -> Result<bool> {
    if !(0.0..=1.0).contains(&neg_exp_moment) {
        return Err(Error::param(format!(
            "E[exp(-Theta)] must lie in [0, 1], got {neg_exp_moment}"
        )));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::param(format!("lambda must be >= 0, got {lambda}")));
    }
    Ok(neg_exp_moment <= (-lambda).exp())
}

/// A pmf on {0, 1, 2, ...} with an optional explicit tail-mass bound.
///
/// `Finite` lists the whole support. `WithTailMass` lists a head
/// `P(X = 0), ..., P(X = len-1)` together with an upper bound on
/// `P(X >= len)`; the tail enters domination checks through the worst-case
/// factor `exp(-c mu d^{-x}) <= 1`, keeping every bound one-sided. Laws with
/// infinite support and no tail bound are not representable, which is the
/// point.
#[derive(Clone, Debug)]
pub enum XPmf {
    Finite(Vec<f64>),
    WithTailMass { head: Vec<f64>, tail_mass: f64 },
}

impl XPmf {
    /// Head of a Geo(alpha) law on {1, 2, ...}: `P(X = n) = (1-alpha)^{n-1} alpha`
    /// for `n < head_len`, with tail mass `(1-alpha)^{head_len - 1}`.
    pub fn geometric_from_one(alpha: f64, head_len: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::param(format!("alpha must lie in (0, 1], got {alpha}")));
        }
        let mut head = Vec::with_capacity(head_len);
        head.push(0.0); // no mass at 0
        let mut p = alpha;
        for _ in 1..head_len {
            head.push(p);
            p *= 1.0 - alpha;
        }
        let tail_mass = (1.0 - alpha).powi(head_len as i32 - 1);
        Ok(XPmf::WithTailMass { head, tail_mass })
    }

    fn head(&self) -> &[f64] {
        match self {
            XPmf::Finite(h) => h,
            XPmf::WithTailMass { head, .. } => head,
        }
    }

    fn tail_mass(&self) -> f64 {
        match self {
            XPmf::Finite(_) => 0.0,
            XPmf::WithTailMass { tail_mass, .. } => *tail_mass,
        }
    }

    fn validate(&self) -> Result<()> {
        let mut total = self.tail_mass();
        if total < 0.0 {
            return Err(Error::param("negative tail mass"));
        }
        for &p in self.head() {
            if !(p.is_finite() && p >= 0.0) {
                return Err(Error::param(format!("invalid pmf entry {p}")));
            }
            total += p;
        }
        if total > 1.0 + 1e-9 {
            return Err(Error::param(format!("pmf mass {total} exceeds 1")));
        }
        Ok(())
    }
}

/// Smallest `mu` (within 1e-9 relative) such that
/// `sum_x exp(-c mu d^{-x}) P(X = x) <= exp(-lambda)`,
/// i.e. such that `Poi(c mu d^{-X})` dominates `Poi(lambda)`.
///
/// The left side is strictly decreasing in `mu`, so bisection is valid; the
/// returned value is the feasible endpoint of the final bracket.
pub fn mu_for_domination(c: f64, d: u32, x_pmf: &XPmf, lambda: f64) -> Result<f64> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::param(format!("c must be positive, got {c}")));
    }
    if d < 2 {
        return Err(Error::param(format!("d must be >= 2, got {d}")));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::param(format!("lambda must be >= 0, got {lambda}")));
    }
    x_pmf.validate()?;

    let target = (-lambda).exp();
    let lhs = |mu: f64| -> f64 {
        let mut s = x_pmf.tail_mass();
        for (x, &p) in x_pmf.head().iter().enumerate() {
            if p > 0.0 {
                s += p * (-c * mu * (d as f64).powi(-(x as i32))).exp();
            }
        }
        s
    };

    if lhs(0.0) <= target {
        return Ok(0.0);
    }
    if x_pmf.tail_mass() >= target {
        return Err(Error::param(format!(
            "tail mass {} already exceeds exp(-lambda) = {target}; no finite mu works",
            x_pmf.tail_mass()
        )));
    }

    let mut hi = 1.0;
    let mut doublings = 0;
    while lhs(hi) > target {
        hi *= 2.0;
        doublings += 1;
        if doublings > 200 {
            return Err(Error::param(
                "domination condition not reachable within mu <= 2^200",
            ));
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-9 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if lhs(mid) <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Monte Carlo estimate of `E[exp(-Theta)]` with its standard error.
///
/// `theta_sampler` draws one realization of the nonnegative variable Theta.
pub fn neg_exp_moment_mc(
    mut theta_sampler: impl FnMut(&mut RngStream) -> f64,
    reps: u64,
    rng: &mut RngStream,
) -> (f64, f64) {
    assert!(reps >= 1);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..reps {
        let v = (-theta_sampler(rng)).exp();
        sum += v;
        sum_sq += v * v;
    }
    let n = reps as f64;
    let mean = sum / n;
    if reps == 1 {
        return (mean, 0.0);
    }
    let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
    (mean, (var / n).sqrt())
}
