//! The spine gadget: a path of N spine vertices between the root and a leaf
//! v', with d-1 leaf nerves hanging off every spine vertex, Poi(mu) active
//! particles at the top spine vertex v, and candidate-law particle counts at
//! v' (active) and at the nerves (sleeping, threshold one).
//!
//! Active particles perform non-backtracking walks and halt at the first
//! leaf distinct from their start. A sleeping nerve releases its particles
//! as soon as any released particle halts there; the activated set is the
//! least fixed point of that rule and is independent of processing order
//! because activation is monotone. The number of particles halting at the
//! root, as a function of the law supplied for nerve and v' counts, is the
//! operator this crate iterates; root-halt tallies from this module drive
//! both the recursive-equation sampler and the bootstrap estimates.

use crate::dist::{sample_geometric, sample_poisson, GeometricSupport, PoissonMean};
use crate::rng::{RngStream, StreamFamily};
use crate::stats::proportion_stderr;
use crate::{Error, Result};
use rand::RngExt;
use rayon::prelude::*;

/// Spine-length law for one gadget realization.
#[derive(Clone, Copy, Debug)]
pub enum SpineLength {
    /// Condition on a fixed spine length n >= 1.
    Fixed(u32),
    /// Draw N ~ Geo(alpha) on {1, 2, ...}.
    Geometric(f64),
}

/// Where a gadget particle halts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Halt {
    Root,
    VPrime,
    /// Nerve index (y-1)*(d-1) + (i-1) for spine position y, slot i.
    Nerve(usize),
}

/// One realized gadget.
#[derive(Clone, Debug)]
pub struct SpineSystem {
    pub d: u32,
    pub n: u32,
    /// Poi(mu) particle count at the top spine vertex v.
    pub count_at_v: u64,
    /// Candidate-law particle count at v'.
    pub count_at_vprime: u64,
    /// Candidate-law particle counts at the (d-1)*n nerves.
    pub nerve_counts: Vec<u64>,
    /// Which nerves were reached by a released particle.
    pub activation: Vec<bool>,
    /// Released particles that halted at the root.
    pub root_halts: u64,
}

impl SpineSystem {
    pub fn nerve_index(&self, y: u32, i: u32) -> usize {
        debug_assert!(y >= 1 && y <= self.n && i >= 1 && i < self.d);
        ((y - 1) * (self.d - 1) + (i - 1)) as usize
    }

    pub fn activated_count(&self) -> usize {
        self.activation.iter().filter(|&&a| a).count()
    }
}

/// Walk one particle from spine position `pos` (1..=n), with `exclude`
/// blocking the neighbor it came from, until it halts at a leaf.
fn walk_spine(n: u32, d: u32, mut pos: u32, mut exclude: Exclude, rng: &mut RngStream) -> Halt {
    loop {
        // Remaining neighbors: down (y-1 or root), up (y+1 or v'), and the
        // d-1 nerves at pos, minus the excluded one — always d options.
        let r = rng.random_range(0..d);
        let choice = resolve_choice(d, r, exclude);
        match choice {
            Choice::Down => {
                if pos == 1 {
                    return Halt::Root;
                }
                pos -= 1;
                exclude = Exclude::Up;
            }
            Choice::Up => {
                if pos == n {
                    return Halt::VPrime;
                }
                pos += 1;
                exclude = Exclude::Down;
            }
            Choice::Nerve(i) => {
                return Halt::Nerve(((pos - 1) * (d - 1) + i) as usize);
            }
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Exclude {
    Down,
    Up,
    /// Nerve slot index 0..d-1.
    Nerve(u32),
}

#[derive(Clone, Copy)]
enum Choice {
    Down,
    Up,
    Nerve(u32),
}

/// Map a uniform draw in 0..d onto the neighbor list with one entry removed.
///
/// Full neighbor order is (down, up, nerve 0, ..., nerve d-2).
fn resolve_choice(_d: u32, r: u32, exclude: Exclude) -> Choice {
    let full = |idx: u32| -> Choice {
        match idx {
            0 => Choice::Down,
            1 => Choice::Up,
            i => Choice::Nerve(i - 2),
        }
    };
    let skip = match exclude {
        Exclude::Down => 0,
        Exclude::Up => 1,
        Exclude::Nerve(i) => i + 2,
    };
    let idx = if r >= skip { r + 1 } else { r };
    full(idx)
}

/// Walk a particle starting at v (first move uniform over all d+1 neighbors).
fn walk_from_v(n: u32, d: u32, rng: &mut RngStream) -> Halt {
    let r = rng.random_range(0..=d);
    match r {
        0 => {
            if n == 1 {
                Halt::Root
            } else {
                walk_spine(n, d, n - 1, Exclude::Up, rng)
            }
        }
        1 => Halt::VPrime,
        i => Halt::Nerve(((n - 1) * (d - 1) + (i - 2)) as usize),
    }
}

/// Walk a particle starting at v' (forced first move to v).
fn walk_from_vprime(n: u32, d: u32, rng: &mut RngStream) -> Halt {
    walk_spine(n, d, n, Exclude::Up, rng)
}

/// Walk a particle starting at nerve `idx` (forced first move to its spine
/// vertex).
fn walk_from_nerve(n: u32, d: u32, idx: usize, rng: &mut RngStream) -> Halt {
    let y = idx as u32 / (d - 1) + 1;
    let slot = idx as u32 % (d - 1);
    walk_spine(n, d, y, Exclude::Nerve(slot), rng)
}

/// Which vertex a particle population starts from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HaltSource {
    V,
    VPrime,
    Nerve(usize),
}

/// Exact halting-leaf law for a single particle, as integer numerators over
/// the common denominator `(d+1) * d^n`. Entry order: root, v', then nerves
/// by index. The numerators always sum to the denominator exactly.
pub fn halting_law_numerators(n: u32, d: u32, source: HaltSource) -> (Vec<u128>, u128) {
    let n = n as usize;
    let du = d as u128;
    let denom = (du + 1) * du.pow(n as u32);
    let per = d as usize - 1;
    let mut num = vec![0u128; 2 + per * n];
    let nerve_slot = |y: usize, i: usize| 2 + (y - 1) * per + i;
    match source {
        HaltSource::V => {
            // Root: (1/(d+1)) d^{-n+1}; v': 1/(d+1); nerve (y,.): (1/(d+1)) d^{y-n}.
            num[0] = du;
            num[1] = du.pow(n as u32);
            for y in 1..=n {
                for i in 0..per {
                    num[nerve_slot(y, i)] = du.pow(y as u32);
                }
            }
        }
        HaltSource::VPrime => {
            // Root: d^{-n}; nerve (y,.): d^{y-n-1}.
            num[0] = du + 1;
            for y in 1..=n {
                for i in 0..per {
                    num[nerve_slot(y, i)] = (du + 1) * du.pow(y as u32 - 1);
                }
            }
        }
        HaltSource::Nerve(idx) => {
            // From the nerve at spine position s: root d^{-s}, v'
            // d^{-(n-s)-1}, other nerve at position y: d^{-|y-s|-1}.
            let s = idx / per + 1;
            num[0] = (du + 1) * du.pow((n - s) as u32);
            num[1] = (du + 1) * du.pow(s as u32 - 1);
            for y in 1..=n {
                for i in 0..per {
                    let slot = nerve_slot(y, i);
                    if slot == 2 + idx {
                        continue; // its own start, never a halt
                    }
                    let dist = s.abs_diff(y) as u32;
                    num[slot] = (du + 1) * du.pow(n as u32 - dist - 1);
                }
            }
        }
    }
    debug_assert_eq!(num.iter().sum::<u128>(), denom);
    (num, denom)
}

/// Per-particle walks above this count are replaced by one multinomial draw
/// over the exact halting law (identical distribution, O(leaves) cost).
const WALK_BATCH_THRESHOLD: u64 = 32;

/// Halting-leaf tallies for `count` particles from one source.
fn sample_halt_counts(
    n: u32,
    d: u32,
    source: HaltSource,
    count: u64,
    rng: &mut RngStream,
) -> Vec<u64> {
    let leaves = 2 + ((d - 1) * n) as usize;
    let mut tally = vec![0u64; leaves];
    if count == 0 {
        return tally;
    }
    // The integer weight table needs d^n to fit in u128; spines anywhere
    // near that length have probability below 1e-20, so walking them
    // particle by particle costs nothing.
    let batchable = (n + 1) as f64 * (d as f64).log2() < 120.0;
    if count <= WALK_BATCH_THRESHOLD || !batchable {
        for _ in 0..count {
            let halt = match source {
                HaltSource::V => walk_from_v(n, d, rng),
                HaltSource::VPrime => walk_from_vprime(n, d, rng),
                HaltSource::Nerve(idx) => walk_from_nerve(n, d, idx, rng),
            };
            match halt {
                Halt::Root => tally[0] += 1,
                Halt::VPrime => tally[1] += 1,
                Halt::Nerve(k) => tally[2 + k] += 1,
            }
        }
    } else {
        // Binomial chain over the exact leaf weights.
        let (weights, denom) = halting_law_numerators(n, d, source);
        let mut remaining = count;
        let mut weight_left = denom;
        for (slot, &w) in weights.iter().enumerate() {
            if remaining == 0 || w == 0 {
                continue;
            }
            if w >= weight_left {
                tally[slot] += remaining;
                remaining = 0;
                break;
            }
            let p = w as f64 / weight_left as f64;
            let take = crate::dist::sample_binomial(remaining, p, rng);
            tally[slot] += take;
            remaining -= take;
            weight_left -= w;
        }
        debug_assert_eq!(remaining, 0);
    }
    tally
}

/// Build and stabilize one gadget.
///
/// Particle counts at v' and the nerves are drawn from `candidate_sampler`
/// (the law the operator acts on). Every particle's halting leaf is
/// pre-sampled (individually for small sources, as one multinomial over the
/// exact halting law for large ones); the activated nerve set is then the
/// least fixed point of "a released particle halting at a sleeping nerve
/// releases its particles", which is order-independent, and root halts are
/// tallied over released particles only.
pub fn sample_operator(
    d: u32,
    length: SpineLength,
    mu: PoissonMean,
    mut candidate_sampler: impl FnMut(&mut RngStream) -> u64,
    rng: &mut RngStream,
) -> Result<SpineSystem> {
    if d < 2 {
        return Err(Error::param(format!("branching d must be >= 2, got {d}")));
    }
    let n = match length {
        SpineLength::Fixed(n) => {
            if n < 1 {
                return Err(Error::param("spine length must be >= 1"));
            }
            n
        }
        SpineLength::Geometric(alpha) => {
            if !(alpha > 0.0 && alpha <= 1.0) {
                return Err(Error::param(format!(
                    "alpha must lie in (0, 1], got {alpha}"
                )));
            }
            sample_geometric(alpha, GeometricSupport::FromOne, rng)? as u32
        }
    };
    let nerves = ((d - 1) * n) as usize;

    let count_at_v = sample_poisson(mu, rng);
    let count_at_vprime = candidate_sampler(rng);
    let mut nerve_counts = Vec::with_capacity(nerves);
    for _ in 0..nerves {
        nerve_counts.push(candidate_sampler(rng));
    }

    // Halting tallies in source order: v, v', then each nerve.
    let v_tally = sample_halt_counts(n, d, HaltSource::V, count_at_v, rng);
    let vp_tally = sample_halt_counts(n, d, HaltSource::VPrime, count_at_vprime, rng);
    let nerve_tallies: Vec<Vec<u64>> = nerve_counts
        .iter()
        .enumerate()
        .map(|(idx, &c)| sample_halt_counts(n, d, HaltSource::Nerve(idx), c, rng))
        .collect();

    let (activation, root_halts) = stabilize(nerves, &v_tally, &vp_tally, &nerve_tallies);

    Ok(SpineSystem {
        d,
        n,
        count_at_v,
        count_at_vprime,
        nerve_counts,
        activation,
        root_halts,
    })
}

/// Monotone closure over pre-sampled halting tallies.
fn stabilize(
    nerves: usize,
    v_tally: &[u64],
    vp_tally: &[u64],
    nerve_tallies: &[Vec<u64>],
) -> (Vec<bool>, u64) {
    let mut activation = vec![false; nerves];
    let mut root_halts = 0u64;
    let mut queue: Vec<usize> = Vec::new();

    let absorb = |tally: &[u64],
                      activation: &mut Vec<bool>,
                      queue: &mut Vec<usize>,
                      root_halts: &mut u64| {
        *root_halts += tally[0];
        for (k, &c) in tally[2..].iter().enumerate() {
            if c > 0 && !activation[k] {
                activation[k] = true;
                queue.push(k);
            }
        }
    };

    absorb(v_tally, &mut activation, &mut queue, &mut root_halts);
    absorb(vp_tally, &mut activation, &mut queue, &mut root_halts);
    while let Some(k) = queue.pop() {
        let tally = nerve_tallies[k].clone();
        absorb(&tally, &mut activation, &mut queue, &mut root_halts);
    }
    (activation, root_halts)
}

/// Monte Carlo estimates of activation-pattern probabilities conditional on
/// a fixed spine length.
#[derive(Clone, Debug)]
pub struct ActivationEstimate {
    pub pattern: Vec<bool>,
    pub n: u32,
    /// P(A = a | N = n) under Poi(lambda) nerve and v' counts.
    pub p_full: f64,
    pub p_full_se: f64,
    /// P(A^a | N = n): all live nerves activated in the variant with the
    /// dead nerves emptied.
    pub p_variant: f64,
    pub p_variant_se: f64,
    pub reps: u64,
}

/// Estimate `P(A = a | N = n)` and the emptied-variant probability
/// `P(A^a | N = n)` with `reps` gadgets each.
pub fn estimate_activation(
    pattern: &[bool],
    n: u32,
    d: u32,
    mu: PoissonMean,
    lambda: PoissonMean,
    reps: u64,
    streams: &StreamFamily,
) -> Result<ActivationEstimate> {
    let nerves = ((d - 1) * n) as usize;
    if pattern.len() != nerves {
        return Err(Error::param(format!(
            "pattern length {} does not match (d-1)n = {nerves}",
            pattern.len()
        )));
    }

    let full_hits: u64 = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = streams.stream(r);
            let sys = sample_operator(
                d,
                SpineLength::Fixed(n),
                mu,
                |rng| sample_poisson(lambda, rng),
                &mut rng,
            )
            .expect("validated parameters");
            u64::from(sys.activation == pattern)
        })
        .sum();

    let variant_streams = streams.offset(reps);
    let variant_hits: u64 = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = variant_streams.stream(r);
            // Candidate counts arrive in deterministic order: v' first, then
            // nerves by index. Zero the dead nerves, keep Poi(lambda)
            // elsewhere.
            let mut draw_index = 0usize;
            let sys = sample_operator(
                d,
                SpineLength::Fixed(n),
                mu,
                |rng| {
                    let idx = draw_index;
                    draw_index += 1;
                    let live = idx == 0 || pattern[idx - 1]; // v' first, then nerves
                    if live {
                        sample_poisson(lambda, rng)
                    } else {
                        0
                    }
                },
                &mut rng,
            )
            .expect("validated parameters");
            let all_live_activated = pattern
                .iter()
                .zip(&sys.activation)
                .all(|(&want, &got)| !want || got);
            u64::from(all_live_activated)
        })
        .sum();

    let p_full = full_hits as f64 / reps as f64;
    let p_variant = variant_hits as f64 / reps as f64;
    Ok(ActivationEstimate {
        pattern: pattern.to_vec(),
        n,
        p_full,
        p_full_se: proportion_stderr(p_full, reps),
        p_variant,
        p_variant_se: proportion_stderr(p_variant, reps),
        reps,
    })
}

/// The dead-nerve Poisson exponent: for each empty nerve (x, j), the mean
/// number of particles that would reach it from v, from v', and from every
/// live nerve, summed over the empty ones.
///
/// `exp(-dead_nerve_exponent)` is the predicted ratio
/// `P(A = a | N = n) / P(A^a | N = n)`.
pub fn dead_nerve_exponent(pattern: &[bool], n: u32, d: u32, mu: f64, lambda: f64) -> f64 {
    let df = d as f64;
    let nerves_per = (d - 1) as usize;
    let mut total = 0.0;
    for x in 1..=n {
        for j in 0..nerves_per {
            let idx = ((x - 1) as usize) * nerves_per + j;
            if pattern[idx] {
                continue;
            }
            let mut m = mu / (df + 1.0) * df.powi(x as i32 - n as i32)
                + lambda * df.powi(x as i32 - n as i32 - 1);
            for y in 1..=n {
                for i in 0..nerves_per {
                    let src = ((y - 1) as usize) * nerves_per + i;
                    if pattern[src] {
                        m += lambda * df.powi(-((y as i32 - x as i32).abs() + 1));
                    }
                }
            }
            total += m;
        }
    }
    total
}

/// One cell of an activation-ratio verification grid.
#[derive(Clone, Debug)]
pub struct ActivationRatioCell {
    pub d: u32,
    pub n: u32,
    pub pattern: Vec<bool>,
    pub mu: f64,
    pub lambda: f64,
}

/// One verified row: predicted vs estimated activation ratio.
#[derive(Clone, Debug)]
pub struct ActivationRatioRow {
    pub cell: ActivationRatioCell,
    pub predicted_ratio: f64,
    pub estimated_ratio: f64,
    pub z: f64,
    pub p_full: f64,
    pub p_variant: f64,
    pub reps: u64,
}

/// Check the product formula `P(A = a | N = n) =
/// exp(-dead_nerve_exponent) * P(A^a | N = n)` over a grid of cells.
///
/// The z-score compares the estimated ratio to the prediction using the
/// delta-method standard error of the ratio of two independent proportions.
pub fn verify_activation_ratio(
    cells: &[ActivationRatioCell],
    reps: u64,
    streams: &StreamFamily,
) -> Result<Vec<ActivationRatioRow>> {
    let mut rows = Vec::with_capacity(cells.len());
    let mut fam = *streams;
    for cell in cells {
        let est = estimate_activation(
            &cell.pattern,
            cell.n,
            cell.d,
            PoissonMean::new(cell.mu)?,
            PoissonMean::new(cell.lambda)?,
            reps,
            &fam,
        )?;
        fam = fam.offset(2 * reps);

        let predicted =
            (-dead_nerve_exponent(&cell.pattern, cell.n, cell.d, cell.mu, cell.lambda)).exp();
        let (ratio, z) = if est.p_variant > 0.0 && est.p_full > 0.0 {
            let ratio = est.p_full / est.p_variant;
            let rel_var = (est.p_full_se / est.p_full).powi(2)
                + (est.p_variant_se / est.p_variant).powi(2);
            let se = ratio * rel_var.sqrt();
            let z = if se > 0.0 {
                (ratio - predicted) / se
            } else {
                0.0
            };
            (ratio, z)
        } else {
            (f64::NAN, f64::INFINITY)
        };
        rows.push(ActivationRatioRow {
            cell: cell.clone(),
            predicted_ratio: predicted,
            estimated_ratio: ratio,
            z,
            p_full: est.p_full,
            p_variant: est.p_variant,
            reps,
        });
    }
    Ok(rows)
}
