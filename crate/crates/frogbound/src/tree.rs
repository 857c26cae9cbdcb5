//! The full threshold frog model on a lazily grown, depth-capped d-ary tree.
//!
//! Dynamics are synchronous in discrete time. Every active frog takes one
//! simple-random-walk step per tick: from the root, uniform over its d
//! children; from any other vertex, uniform over its d+1 neighbors. All
//! arrivals at a vertex within a tick count toward its threshold; when the
//! cumulative visit count reaches the (lazily sampled) threshold, the
//! dormant frogs there become active and take their first step on the next
//! tick. Frogs stepping below the depth cap are killed, which can only
//! reduce root visits, so capped runs lower-bound the uncapped process.
//!
//! Frogs are exchangeable, so the simulator tracks per-vertex counts and
//! moves them with multinomial splits rather than individual agents. Vertices
//! are materialized on first entry; thresholds and dormant counts are sampled
//! exactly once, on the first visit. All per-tick iteration is in vertex-id
//! order, so a run is a deterministic function of `(params, caps, stream)`
//! and extending the horizon reproduces the shorter run as a prefix.

use crate::dist::{sample_binomial, sample_poisson, PoissonMean};
use crate::rng::{RngStream, StreamFamily};
use crate::stats::proportion_stderr;
use crate::threshold::{ThresholdSpec, ThresholdValue};
use crate::{Error, Result};
use rand::RngExt;
use rayon::prelude::*;

/// The model triple (d, tau, mu).
#[derive(Clone, Debug)]
pub struct ModelParams {
    d: u32,
    tau: ThresholdSpec,
    mu: PoissonMean,
}

impl ModelParams {
    pub fn new(d: u32, tau: ThresholdSpec, mu: PoissonMean) -> Result<Self> {
        if d < 2 {
            return Err(Error::param(format!("branching d must be >= 2, got {d}")));
        }
        Ok(ModelParams { d, tau, mu })
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn tau(&self) -> &ThresholdSpec {
        &self.tau
    }

    pub fn mu(&self) -> PoissonMean {
        self.mu
    }
}

/// Truncation caps for one run.
#[derive(Clone, Copy, Debug)]
pub struct TfmCaps {
    /// Number of ticks to simulate.
    pub horizon: u32,
    /// Deepest allowed vertex; frogs stepping beyond are killed.
    pub depth_cap: u32,
    /// Stop (with a flag) once the live population exceeds this.
    pub population_cap: u64,
    /// Stop early once cumulative root visits reach this value.
    pub visits_target: Option<u64>,
}

impl TfmCaps {
    pub fn new(horizon: u32, depth_cap: u32, population_cap: u64) -> Result<Self> {
        if horizon < 1 || depth_cap < 1 {
            return Err(Error::param("horizon and depth_cap must be >= 1"));
        }
        Ok(TfmCaps {
            horizon,
            depth_cap,
            population_cap,
            visits_target: None,
        })
    }

    pub fn with_visits_target(mut self, m: u64) -> Self {
        self.visits_target = Some(m);
        self
    }
}

/// Which truncations fired during a run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CapsHit {
    pub depth: bool,
    pub population: bool,
    /// The run still had live frogs when it stopped (horizon, visit target,
    /// or population cap), so the visit total is a truncation of the full
    /// count.
    pub truncated: bool,
}

/// Root-visit record of one run: per-tick arrivals and their running sum.
#[derive(Clone, Debug)]
pub struct VisitTrajectory {
    /// `arrivals[t-1]` is the number of active frogs arriving at the root at
    /// tick `t`. May be shorter than the horizon if the run ended early.
    pub arrivals: Vec<u64>,
    /// Cumulative visit counts; same length as `arrivals`, nondecreasing.
    pub cumulative: Vec<u64>,
    pub caps_hit: CapsHit,
}

impl VisitTrajectory {
    pub fn total_visits(&self) -> u64 {
        self.cumulative.last().copied().unwrap_or(0)
    }

    pub fn ticks_run(&self) -> usize {
        self.arrivals.len()
    }
}

#[derive(Clone, Copy, Debug)]
enum Threshold {
    Unsampled,
    Finite(u64),
    Infinite,
}

struct Vertex {
    parent: u32,
    depth: u32,
    /// Child vertex ids by slot; 0 means not yet materialized (the root is
    /// id 0 and is never a child, so 0 is a safe sentinel).
    children: Vec<u32>,
    visits: u64,
    threshold: Threshold,
    dormant: u64,
    activated: bool,
}

const NO_PARENT: u32 = u32::MAX;

struct TreeState {
    d: u32,
    verts: Vec<Vertex>,
}

impl TreeState {
    fn new(d: u32) -> Self {
        let root = Vertex {
            parent: NO_PARENT,
            depth: 0,
            children: vec![0; d as usize],
            visits: 0,
            threshold: Threshold::Infinite, // the root carries no threshold
            dormant: 0,
            activated: true,
        };
        TreeState {
            d,
            verts: vec![root],
        }
    }

    fn child(&mut self, u: u32, slot: usize) -> u32 {
        let existing = self.verts[u as usize].children[slot];
        if existing != 0 {
            return existing;
        }
        let id = self.verts.len() as u32;
        let depth = self.verts[u as usize].depth + 1;
        self.verts.push(Vertex {
            parent: u,
            depth,
            children: vec![0; self.d as usize],
            visits: 0,
            threshold: Threshold::Unsampled,
            dormant: 0,
            activated: false,
        });
        self.verts[u as usize].children[slot] = id;
        id
    }
}

/// Split `count` frogs uniformly over `k` targets.
///
/// Small counts draw one slot index per frog; larger counts use a chain of
/// binomial splits. Both consume the stream deterministically.
fn multinomial_split(count: u64, k: usize, rng: &mut RngStream) -> Vec<u64> {
    let mut out = vec![0u64; k];
    if k == 1 {
        out[0] = count;
        return out;
    }
    if count <= 16 {
        for _ in 0..count {
            let j = rng.random_range(0..k);
            out[j] += 1;
        }
    } else {
        let mut remaining = count;
        for (j, slot) in out.iter_mut().take(k - 1).enumerate() {
            let p = 1.0 / (k - j) as f64;
            let take = sample_binomial(remaining, p, rng);
            *slot = take;
            remaining -= take;
        }
        out[k - 1] = remaining;
    }
    out
}

/// Simulate one realization and return the root trajectory.
pub fn simulate_tfm(params: &ModelParams, caps: &TfmCaps, rng: &mut RngStream) -> VisitTrajectory {
    let d = params.d;
    let mut tree = TreeState::new(d);
    let mut caps_hit = CapsHit::default();

    // Flat per-vertex count buffers plus sorted occupancy lists; iteration
    // stays in ascending vertex-id order, which fixes the stream-consumption
    // order of every draw.
    let mut active: Vec<u64> = vec![1];
    let mut occupied: Vec<u32> = vec![0];
    let mut landed: Vec<u64> = vec![0];
    let mut landed_list: Vec<u32> = Vec::new();
    let mut population = 1u64;

    let mut arrivals_log = Vec::new();
    let mut cumulative_log = Vec::new();
    let mut total_visits = 0u64;

    for _tick in 0..caps.horizon {
        if occupied.is_empty() {
            break;
        }
        landed.resize(tree.verts.len(), 0);
        landed_list.clear();
        for &u in &occupied {
            let count = active[u as usize];
            let (depth, parent) = {
                let v = &tree.verts[u as usize];
                (v.depth, v.parent)
            };
            if u == 0 {
                // Root: uniform over the d children.
                let split = multinomial_split(count, d as usize, rng);
                for (slot, &c) in split.iter().enumerate() {
                    if c > 0 {
                        let w = tree.child(0, slot) as usize;
                        if w >= landed.len() {
                            landed.resize(tree.verts.len(), 0);
                        }
                        if landed[w] == 0 {
                            landed_list.push(w as u32);
                        }
                        landed[w] += c;
                    }
                }
            } else {
                // Nonroot: uniform over parent + d children. Slot 0 is the
                // parent; child steps from a vertex at the depth cap are
                // kills.
                let split = multinomial_split(count, d as usize + 1, rng);
                if split[0] > 0 {
                    let w = parent as usize;
                    if landed[w] == 0 {
                        landed_list.push(parent);
                    }
                    landed[w] += split[0];
                }
                if depth == caps.depth_cap {
                    if split[1..].iter().any(|&c| c > 0) {
                        caps_hit.depth = true;
                    }
                } else {
                    for (slot, &c) in split[1..].iter().enumerate() {
                        if c > 0 {
                            let w = tree.child(u, slot) as usize;
                            if w >= landed.len() {
                                landed.resize(tree.verts.len(), 0);
                            }
                            if landed[w] == 0 {
                                landed_list.push(w as u32);
                            }
                            landed[w] += c;
                        }
                    }
                }
            }
            active[u as usize] = 0;
        }
        landed_list.sort_unstable();

        // Count arrivals, meet thresholds, wake dormant frogs. Newly woken
        // frogs join the arrivers and first move next tick.
        let mut root_arrivals = 0u64;
        population = 0;
        active.resize(tree.verts.len(), 0);
        for &v in &landed_list {
            let arr = landed[v as usize];
            landed[v as usize] = 0;
            let mut staying = arr;
            if v == 0 {
                root_arrivals += arr;
            } else {
                let vert = &mut tree.verts[v as usize];
                vert.visits += arr;
                if let Threshold::Unsampled = vert.threshold {
                    vert.threshold = match params.tau.sample(rng) {
                        ThresholdValue::Finite(k) => Threshold::Finite(k),
                        ThresholdValue::Infinite => Threshold::Infinite,
                    };
                    vert.dormant = sample_poisson(params.mu, rng);
                }
                if !vert.activated {
                    if let Threshold::Finite(t) = vert.threshold {
                        if vert.visits >= t {
                            vert.activated = true;
                            staying += vert.dormant;
                        }
                    }
                }
            }
            active[v as usize] = staying;
            population += staying;
        }
        std::mem::swap(&mut occupied, &mut landed_list);

        total_visits += root_arrivals;
        arrivals_log.push(root_arrivals);
        cumulative_log.push(total_visits);

        if let Some(m) = caps.visits_target {
            if total_visits >= m {
                caps_hit.truncated = population > 0;
                return VisitTrajectory {
                    arrivals: arrivals_log,
                    cumulative: cumulative_log,
                    caps_hit,
                };
            }
        }
        if population > caps.population_cap {
            caps_hit.population = true;
            caps_hit.truncated = true;
            return VisitTrajectory {
                arrivals: arrivals_log,
                cumulative: cumulative_log,
                caps_hit,
            };
        }
    }

    caps_hit.truncated = population > 0;
    VisitTrajectory {
        arrivals: arrivals_log,
        cumulative: cumulative_log,
        caps_hit,
    }
}

/// A proportion estimate with its standard error.
#[derive(Clone, Copy, Debug)]
pub struct ProxyEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub reps: u64,
}

/// Estimate `P(V >= m)` under the capped dynamics over independent replicas.
///
/// Monotone nondecreasing in mu in expectation (more frogs only help). Each
/// replica runs on its own stream from `streams`, so the result is
/// independent of scheduling.
pub fn recurrence_proxy(
    params: &ModelParams,
    m: u64,
    caps: &TfmCaps,
    reps: u64,
    streams: &StreamFamily,
) -> ProxyEstimate {
    if m == 0 {
        return ProxyEstimate {
            estimate: 1.0,
            std_error: 0.0,
            reps,
        };
    }
    let capped = caps.with_visits_target(m);
    let hits: u64 = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = streams.stream(r);
            let traj = simulate_tfm(params, &capped, &mut rng);
            u64::from(traj.total_visits() >= m)
        })
        .sum();
    let estimate = hits as f64 / reps as f64;
    ProxyEstimate {
        estimate,
        std_error: proportion_stderr(estimate, reps),
        reps,
    }
}

/// Settings for the recurrence proxy used inside the bracket search.
#[derive(Clone, Copy, Debug)]
pub struct ProxyConfig {
    pub m: u64,
    pub horizon: u32,
    pub depth_cap: u32,
    pub population_cap: u64,
    pub reps: u64,
}

/// Settings for the bisection bracket search over mu.
#[derive(Clone, Copy, Debug)]
pub struct BracketSearchConfig {
    pub mu_min: f64,
    pub mu_max: f64,
    /// Lower proxy threshold; `mu_lo` must satisfy `proxy(mu_lo) <= p_lo`.
    pub p_lo: f64,
    /// Upper proxy threshold; `mu_hi` must satisfy `proxy(mu_hi) >= p_hi`.
    pub p_hi: f64,
    /// Bisection refinements per crossing.
    pub refinements: u32,
}

/// One evaluated point of the proxy curve.
#[derive(Clone, Copy, Debug)]
pub struct ProxyPoint {
    pub mu: f64,
    pub estimate: f64,
    pub std_error: f64,
}

/// Outcome of the critical-density bracket search. The bracket is an
/// empirical indicator of the phase transition, not a proof.
#[derive(Clone, Debug)]
pub enum MuBracket {
    Found {
        mu_lo: f64,
        mu_hi: f64,
        proxy_lo: f64,
        proxy_hi: f64,
        curve: Vec<ProxyPoint>,
    },
    NoBracket {
        curve: Vec<ProxyPoint>,
    },
}

/// Bracket the critical density by bisecting the monotone recurrence proxy.
///
/// Returns `(mu_lo, mu_hi)` with `proxy(mu_lo) <= p_lo` and
/// `proxy(mu_hi) >= p_hi`, each verified with the configured replica count,
/// by running one bisection for each crossing. If the endpoints of the
/// search range do not straddle both thresholds the result is `NoBracket`
/// and carries every evaluated point.
pub fn estimate_mu_c(
    d: u32,
    tau: &ThresholdSpec,
    proxy: &ProxyConfig,
    search: &BracketSearchConfig,
    streams: &StreamFamily,
) -> Result<MuBracket> {
    if !(search.p_lo > 0.0 && search.p_lo < search.p_hi && search.p_hi < 1.0) {
        return Err(Error::param(
            "proxy thresholds must satisfy 0 < p_lo < p_hi < 1",
        ));
    }
    if search.mu_min < 0.0 {
        return Err(Error::param("mu_min must be >= 0"));
    }
    if search.mu_min >= search.mu_max {
        return Ok(MuBracket::NoBracket { curve: Vec::new() });
    }

    let caps = TfmCaps::new(proxy.horizon, proxy.depth_cap, proxy.population_cap)?;
    let mut curve: Vec<ProxyPoint> = Vec::new();
    let mut eval_index = 0u64;
    let mut eval = |mu: f64, curve: &mut Vec<ProxyPoint>| -> Result<f64> {
        let params = ModelParams::new(d, tau.clone(), PoissonMean::new(mu)?)?;
        let fam = streams.offset(eval_index.wrapping_mul(proxy.reps));
        eval_index += 1;
        let est = recurrence_proxy(&params, proxy.m, &caps, proxy.reps, &fam);
        curve.push(ProxyPoint {
            mu,
            estimate: est.estimate,
            std_error: est.std_error,
        });
        Ok(est.estimate)
    };

    let at_min = eval(search.mu_min, &mut curve)?;
    let at_max = eval(search.mu_max, &mut curve)?;
    if at_min > search.p_lo || at_max < search.p_hi {
        curve.sort_by(|a, b| a.mu.total_cmp(&b.mu));
        return Ok(MuBracket::NoBracket { curve });
    }

    // Tighten the p_lo crossing from below and the p_hi crossing from above.
    let mut lo = (search.mu_min, at_min);
    let mut hi_of_lo = search.mu_max;
    for _ in 0..search.refinements {
        let mid = 0.5 * (lo.0 + hi_of_lo);
        let p = eval(mid, &mut curve)?;
        if p <= search.p_lo {
            lo = (mid, p);
        } else {
            hi_of_lo = mid;
        }
    }

    let mut hi = (search.mu_max, at_max);
    let mut lo_of_hi = search.mu_min;
    for _ in 0..search.refinements {
        let mid = 0.5 * (lo_of_hi + hi.0);
        let p = eval(mid, &mut curve)?;
        if p >= search.p_hi {
            hi = (mid, p);
        } else {
            lo_of_hi = mid;
        }
    }

    curve.sort_by(|a, b| a.mu.total_cmp(&b.mu));
    Ok(MuBracket::Found {
        mu_lo: lo.0,
        mu_hi: hi.0,
        proxy_lo: lo.1,
        proxy_hi: hi.1,
        curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(d: u32, tau: &str, mu: f64) -> ModelParams {
        ModelParams::new(
            d,
            ThresholdSpec::parse(tau).unwrap(),
            PoissonMean::new(mu).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn rejects_small_d() {
        let tau = ThresholdSpec::parse("delta:1").unwrap();
        assert!(ModelParams::new(1, tau, PoissonMean::new(0.0).unwrap()).is_err());
    }

    #[test]
    fn trajectory_is_consistent() {
        let p = params(2, "delta:1", 2.0);
        let caps = TfmCaps::new(200, 12, 1_000_000).unwrap();
        let mut rng = RngStream::new(5, 0);
        let traj = simulate_tfm(&p, &caps, &mut rng);
        let mut running = 0u64;
        for (a, c) in traj.arrivals.iter().zip(&traj.cumulative) {
            running += a;
            assert_eq!(running, *c);
        }
    }

    #[test]
    fn longer_horizon_extends_prefix() {
        let p = params(2, "delta:2", 1.5);
        let short_caps = TfmCaps::new(50, 10, 1_000_000).unwrap();
        let long_caps = TfmCaps::new(120, 10, 1_000_000).unwrap();
        for seed in 0..20 {
            let mut r1 = RngStream::new(77, seed);
            let mut r2 = RngStream::new(77, seed);
            let short = simulate_tfm(&p, &short_caps, &mut r1);
            let long = simulate_tfm(&p, &long_caps, &mut r2);
            assert!(long.arrivals.len() >= short.arrivals.len());
            let k = short.arrivals.len();
            assert_eq!(&short.arrivals[..], &long.arrivals[..k]);
        }
    }

    #[test]
    fn all_infinite_thresholds_match_mu_zero() {
        // With (essentially) all threshold mass at infinity nothing ever
        // activates, so root visits follow the lone-frog law exactly as at
        // mu = 0. Not pathwise-coupled (dormant sampling consumes draws), so
        // compare summary statistics.
        let caps = TfmCaps::new(500, 20, 1_000_000).unwrap();
        let inert = params(2, "pmf:1000=0.001,inf=0.999", 50.0);
        let empty = params(2, "delta:1", 0.0);
        let reps = 2000u64;
        let mean = |p: &ModelParams, base: u64| -> f64 {
            (0..reps)
                .map(|r| {
                    let mut rng = RngStream::new(123, base + r);
                    simulate_tfm(p, &caps, &mut rng).total_visits() as f64
                })
                .sum::<f64>()
                / reps as f64
        };
        let m_inert = mean(&inert, 0);
        let m_empty = mean(&empty, 100_000);
        // Both are the lone-frog return count: mean 1, sd sqrt(2).
        let tol = 6.0 * (2.0f64 / reps as f64).sqrt();
        assert!(
            (m_inert - m_empty).abs() < tol,
            "inert {m_inert} vs empty {m_empty}"
        );
    }

    #[test]
    fn lone_frog_mean_visits_binary() {
        let p = params(2, "delta:1", 0.0);
        let caps = TfmCaps::new(10_000, 30, 1_000_000).unwrap();
        let reps = 200_000u64;
        let total: u64 = (0..reps)
            .into_par_iter()
            .map(|r| {
                let mut rng = RngStream::new(9, r);
                simulate_tfm(&p, &caps, &mut rng).total_visits()
            })
            .sum();
        let mean = total as f64 / reps as f64;
        // E[V] = 1/(d-1) = 1; sd = sqrt(2), so 200k replicas give se ~ 0.003.
        assert!((mean - 1.0).abs() < 0.015, "mean {mean}");
    }

    #[test]
    fn proxy_trivial_cases() {
        let p = params(2, "delta:1", 0.0);
        let caps = TfmCaps::new(1000, 20, 1_000_000).unwrap();
        let fam = StreamFamily::new(11, 0);
        let est = recurrence_proxy(&p, 0, &caps, 100, &fam);
        assert_eq!(est.estimate, 1.0);
        let est = recurrence_proxy(&p, 50, &caps, 2000, &fam);
        assert!(est.estimate <= 0.001, "lone frog almost never hits 50");
    }

    #[test]
    fn proxy_deep_recurrent_regime() {
        let p = params(2, "delta:1", 10.0);
        let caps = TfmCaps::new(10_000, 30, 10_000_000).unwrap();
        let fam = StreamFamily::new(13, 0);
        let est = recurrence_proxy(&p, 50, &caps, 500, &fam);
        assert!(est.estimate >= 0.99, "estimate {}", est.estimate);
    }

    #[test]
    fn degenerate_search_range_is_no_bracket() {
        let tau = ThresholdSpec::parse("delta:1").unwrap();
        let proxy = ProxyConfig {
            m: 20,
            horizon: 500,
            depth_cap: 15,
            population_cap: 1_000_000,
            reps: 50,
        };
        let search = BracketSearchConfig {
            mu_min: 2.0,
            mu_max: 2.0,
            p_lo: 0.05,
            p_hi: 0.95,
            refinements: 4,
        };
        let fam = StreamFamily::new(1, 0);
        match estimate_mu_c(2, &tau, &proxy, &search, &fam).unwrap() {
            MuBracket::NoBracket { curve } => assert!(curve.is_empty()),
            MuBracket::Found { .. } => panic!("expected no bracket"),
        }
    }

    #[test]
    fn depth_cap_monotone_in_mean_visits() {
        // Killing fewer frogs cannot reduce mean visits (statistically).
        let p = params(2, "delta:1", 1.2);
        let reps = 4000u64;
        let mean_at = |depth_cap: u32, base: u64| -> (f64, f64) {
            let caps = TfmCaps::new(400, depth_cap, 1_000_000).unwrap();
            let xs: Vec<f64> = (0..reps)
                .into_par_iter()
                .map(|r| {
                    let mut rng = RngStream::new(21, base + r);
                    simulate_tfm(&p, &caps, &mut rng).total_visits().min(50) as f64
                })
                .collect();
            crate::stats::mean_stderr(&xs)
        };
        let (shallow, se1) = mean_at(6, 0);
        let (deep, se2) = mean_at(12, 10_000);
        let se = (se1 * se1 + se2 * se2).sqrt();
        assert!(
            deep >= shallow - 3.0 * se,
            "deep {deep} shallow {shallow} se {se}"
        );
    }
}
