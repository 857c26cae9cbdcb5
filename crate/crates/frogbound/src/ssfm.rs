//! The self-similar threshold frog model: active frogs follow lazy
//! non-backtracking walks, walks are killed on arrival at the root, at most
//! one frog may continue into a newly visited vertex when moving away from
//! the root (the only-one rule), and only the first visitor of a vertex can
//! meet its threshold, by dwelling there long enough.
//!
//! Root visits of this restricted process lower-bound those of the full
//! model, and every truncation applied here (depth cap, step cap) only
//! removes visits, preserving that role.

use crate::dist::sample_poisson;
use crate::rng::RngStream;
use crate::threshold::{ThresholdSpec, ThresholdValue};
use crate::tree::ModelParams;
use crate::{Error, Result};
use rand::RngExt;
use std::collections::BTreeMap;

/// Activation probability at a freshly visited vertex.
///
/// The first visitor contributes one visit on arrival plus a Geo0(d/(d+1))
/// run of lazy repeats, so the threshold T is met with probability
/// `P(Geo0(d/(d+1)) >= T - 1)`; summing over the threshold law gives
/// `sum_k tau(k) (d+1)^{-k+1}`, the mass at infinity contributing zero.
pub fn alpha(tau: &ThresholdSpec, d: u32) -> Result<f64> {
    if d < 2 {
        return Err(Error::param(format!("branching d must be >= 2, got {d}")));
    }
    let base = (d + 1) as f64;
    let mut total = 0.0;
    for &(v, p) in tau.atoms() {
        if let ThresholdValue::Finite(k) = v {
            total += p * base.powf(1.0 - k as f64);
        }
    }
    Ok(total)
}

/// Where a lazy non-backtracking walk starts.
#[derive(Clone, Copy, Debug)]
pub enum PathStart {
    Root,
    /// A vertex at this depth (>= 1); the first move is uniform over its
    /// d+1 neighbors.
    AtDepth(u32),
}

/// Why a sampled path ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PathEnd {
    ReachedRoot,
    Cap,
}

/// One sampled lazy non-backtracking path, recorded by depth.
///
/// `depths[i]` is the depth of the i-th distinct vertex on the path
/// (starting with the start vertex) and `dwells[i]` the total visits the
/// walker paid it: 1 for the arrival plus one per lazy repeat. The start
/// vertex always has dwell 1 (the first move is unconditional), and dwell
/// repeats at every later vertex are Geo0(d/(d+1)).
#[derive(Clone, Debug)]
pub struct LazyNbPath {
    pub depths: Vec<u32>,
    pub dwells: Vec<u64>,
    pub termination: PathEnd,
}

impl LazyNbPath {
    /// Number of moves taken (distinct vertices beyond the start).
    pub fn steps(&self) -> usize {
        self.depths.len() - 1
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Came {
    FromParent,
    FromChild,
}

/// Sample a lazy non-backtracking walk on the infinite d-ary tree, killed on
/// arrival at the root, truncated after `max_vertices` distinct vertices.
pub fn sample_lazy_nb_path(
    d: u32,
    start: PathStart,
    max_vertices: usize,
    rng: &mut RngStream,
) -> Result<LazyNbPath> {
    if d < 2 {
        return Err(Error::param(format!("branching d must be >= 2, got {d}")));
    }
    if max_vertices < 1 {
        return Err(Error::param("max_vertices must be >= 1"));
    }
    let start_depth = match start {
        PathStart::Root => 0,
        PathStart::AtDepth(k) => {
            if k < 1 {
                return Err(Error::param("AtDepth start must have depth >= 1"));
            }
            k
        }
    };
    let mut depths = vec![start_depth];
    let mut dwells = vec![1u64];

    // First move: unconditional, uniform over all neighbors.
    let mut came;
    let mut depth = start_depth;
    match start {
        PathStart::Root => {
            // d children, no parent; which child is irrelevant by symmetry.
            let _ = rng.random_range(0..d);
            depth += 1;
            came = Came::FromParent;
        }
        PathStart::AtDepth(_) => {
            let r = rng.random_range(0..=d);
            if r == 0 {
                depth -= 1;
                came = Came::FromChild;
            } else {
                depth += 1;
                came = Came::FromParent;
            }
        }
    }
    depths.push(depth);
    dwells.push(1);
    if depth == 0 {
        return Ok(LazyNbPath {
            depths,
            dwells,
            termination: PathEnd::ReachedRoot,
        });
    }

    loop {
        if depths.len() >= max_vertices {
            return Ok(LazyNbPath {
                depths,
                dwells,
                termination: PathEnd::Cap,
            });
        }
        // One of d+1 equally likely outcomes: stay, or one of the d
        // neighbors not on the path (the came-from vertex is the only
        // excluded neighbor on a tree).
        let r = rng.random_range(0..=d);
        if r == 0 {
            *dwells.last_mut().expect("nonempty") += 1;
            continue;
        }
        match came {
            Came::FromParent => {
                // All d open neighbors are children.
                depth += 1;
            }
            Came::FromChild => {
                // Option 1 is the parent, the rest are the other children.
                if r == 1 {
                    depth -= 1;
                    came = Came::FromChild;
                    depths.push(depth);
                    dwells.push(1);
                    if depth == 0 {
                        return Ok(LazyNbPath {
                            depths,
                            dwells,
                            termination: PathEnd::ReachedRoot,
                        });
                    }
                    continue;
                }
                depth += 1;
            }
        }
        came = Came::FromParent;
        depths.push(depth);
        dwells.push(1);
    }
}

/// Truncation caps for a self-similar run.
#[derive(Clone, Copy, Debug)]
pub struct SsfmCaps {
    pub depth_cap: u32,
    /// Number of synchronous ticks to simulate.
    pub step_cap: u32,
    /// Stop (with a flag) once the live frog count exceeds this.
    pub population_cap: u64,
    /// Stop early once the root-visit total reaches this value.
    pub visits_target: Option<u64>,
}

impl SsfmCaps {
    pub fn new(depth_cap: u32, step_cap: u32, population_cap: u64) -> Result<Self> {
        if depth_cap < 1 || step_cap < 1 {
            return Err(Error::param("depth_cap and step_cap must be >= 1"));
        }
        Ok(SsfmCaps {
            depth_cap,
            step_cap,
            population_cap,
            visits_target: None,
        })
    }

    pub fn with_visits_target(mut self, m: u64) -> Self {
        self.visits_target = Some(m);
        self
    }
}

/// Which truncations fired during a self-similar run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SsfmCapsHit {
    pub depth: bool,
    pub step: bool,
    pub population: bool,
}

/// One sample of the self-similar root-visit count V'.
#[derive(Clone, Copy, Debug)]
pub struct SsfmSample {
    pub v_prime: u64,
    pub ticks: u32,
    pub caps_hit: SsfmCapsHit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Phase {
    /// First visitor is still there; `accruer` indexes into the frog table.
    Accruing { accruer: usize },
    Activated,
    Inert,
}

struct SsfmVertex {
    parent: u32,
    depth: u32,
    children: Vec<u32>,
    threshold: Option<u64>, // None = infinite
    dormant: u64,
    accrued: u64,
    phase: Phase,
}

#[derive(Clone, Copy)]
struct Frog {
    pos: u32,
    /// Vertex we arrived from; `None` before the first move.
    came_from: Option<u32>,
    /// Met a threshold last tick: the next move is to a uniform child.
    forced_child: bool,
    alive: bool,
}

enum Claim {
    TowardRoot {
        frog: usize,
    },
    Away {
        frog: usize,
        parent: u32,
        slot: u32,
        forced: bool,
    },
}

/// Simulate one realization of the self-similar model and return its
/// root-visit count.
///
/// The returned count only undercounts when a cap fires (flagged in the
/// sample), preserving the lower-bound role of the restricted process.
pub fn simulate_ssfm(params: &ModelParams, caps: &SsfmCaps, rng: &mut RngStream) -> SsfmSample {
    let d = params.d();
    let mut verts: Vec<SsfmVertex> = vec![SsfmVertex {
        parent: u32::MAX,
        depth: 0,
        children: vec![0; d as usize],
        threshold: None,
        dormant: 0,
        accrued: 0,
        phase: Phase::Activated,
    }];
    let mut frogs: Vec<Frog> = vec![Frog {
        pos: 0,
        came_from: None,
        forced_child: false,
        alive: true,
    }];
    let mut v_prime = 0u64;
    let mut caps_hit = SsfmCapsHit::default();

    for tick in 0..caps.step_cap {
        if frogs.is_empty() {
            return SsfmSample {
                v_prime,
                ticks: tick,
                caps_hit,
            };
        }

        // Phase A: every frog decides its action in index order. Dwells
        // accrue immediately (no conflicts); moves become claims.
        let mut claims: Vec<Claim> = Vec::new();
        let snapshot = frogs.len();
        for i in 0..snapshot {
            let frog = frogs[i];
            if !frog.alive {
                continue;
            }
            let pos = frog.pos;
            let claim = if frog.forced_child {
                let slot = rng.random_range(0..d);
                Some(Claim::Away {
                    frog: i,
                    parent: pos,
                    slot,
                    forced: true,
                })
            } else if frog.came_from.is_none() {
                // First move: uniform over all neighbors.
                if pos == 0 {
                    let slot = rng.random_range(0..d);
                    Some(Claim::Away {
                        frog: i,
                        parent: pos,
                        slot,
                        forced: false,
                    })
                } else {
                    let r = rng.random_range(0..=d);
                    if r == 0 {
                        Some(Claim::TowardRoot { frog: i })
                    } else {
                        Some(Claim::Away {
                            frog: i,
                            parent: pos,
                            slot: r - 1,
                            forced: false,
                        })
                    }
                }
            } else {
                // Lazy step: stay with probability 1/(d+1), else uniform
                // over the d neighbors other than the one we came from.
                let came = frog.came_from.expect("checked");
                let r = rng.random_range(0..=d);
                if r == 0 {
                    // Dwell; counts toward the threshold only for the
                    // vertex's first visitor.
                    let vert = &mut verts[pos as usize];
                    if vert.phase == (Phase::Accruing { accruer: i }) {
                        vert.accrued += 1;
                        if let Some(t) = vert.threshold {
                            if vert.accrued >= t {
                                vert.phase = Phase::Activated;
                                let woken = vert.dormant;
                                for _ in 0..woken {
                                    frogs.push(Frog {
                                        pos,
                                        came_from: None,
                                        forced_child: false,
                                        alive: true,
                                    });
                                }
                                frogs[i].forced_child = true;
                            }
                        }
                    }
                    None
                } else if came == verts[pos as usize].parent {
                    // Came from the parent: every open neighbor is a child.
                    Some(Claim::Away {
                        frog: i,
                        parent: pos,
                        slot: r - 1,
                        forced: false,
                    })
                } else {
                    // Came from a child: option 1 is the parent, the rest
                    // are the other children.
                    if r == 1 {
                        Some(Claim::TowardRoot { frog: i })
                    } else {
                        let came_slot = verts[pos as usize]
                            .children
                            .iter()
                            .position(|&c| c == came)
                            .expect("came-from child is materialized") as u32;
                        let mut slot = r - 2;
                        if slot >= came_slot {
                            slot += 1;
                        }
                        Some(Claim::Away {
                            frog: i,
                            parent: pos,
                            slot,
                            forced: false,
                        })
                    }
                }
            };

            if let Some(c) = claim {
                // A first visitor leaving before its threshold is met makes
                // the vertex permanently inert (threshold-meeting frogs left
                // an Activated vertex, so the phase check filters them).
                let vert = &mut verts[pos as usize];
                if vert.phase == (Phase::Accruing { accruer: i }) {
                    vert.phase = Phase::Inert;
                }
                claims.push(c);
            }
        }

        // Phase B1: toward-root moves never conflict.
        let mut away: BTreeMap<(u32, u32), Vec<(usize, bool)>> = BTreeMap::new();
        for claim in claims {
            match claim {
                Claim::TowardRoot { frog } => {
                    let pos = frogs[frog].pos;
                    let parent = verts[pos as usize].parent;
                    if parent == 0 {
                        v_prime += 1;
                        frogs[frog].alive = false;
                    } else {
                        frogs[frog].pos = parent;
                        frogs[frog].came_from = Some(pos);
                    }
                }
                Claim::Away {
                    frog,
                    parent,
                    slot,
                    forced,
                } => {
                    if forced {
                        frogs[frog].forced_child = false;
                    }
                    away.entry((parent, slot)).or_default().push((frog, forced));
                }
            }
        }

        // Phase B2: away-from-root moves, resolved per target slot in
        // deterministic order.
        for ((parent, slot), claimants) in away {
            let parent_vert = &verts[parent as usize];
            let existing = parent_vert.children[slot as usize];
            if existing != 0 {
                // Already-visited target: every away-mover is killed.
                for (f, _) in claimants {
                    frogs[f].alive = false;
                }
                continue;
            }
            let child_depth = parent_vert.depth + 1;
            if child_depth > caps.depth_cap {
                caps_hit.depth = true;
                for (f, _) in claimants {
                    frogs[f].alive = false;
                }
                continue;
            }
            // Fresh vertex: one claimant survives. A threshold-meeting frog
            // taking its guaranteed child step wins ties; otherwise uniform.
            let winner_idx = if let Some(k) = claimants.iter().position(|&(_, forced)| forced) {
                k
            } else if claimants.len() == 1 {
                0
            } else {
                rng.random_range(0..claimants.len())
            };
            let (survivor, _) = claimants[winner_idx];
            for (k, &(f, _)) in claimants.iter().enumerate() {
                if k != winner_idx {
                    frogs[f].alive = false;
                }
            }

            let id = verts.len() as u32;
            let threshold = match params.tau().sample(rng) {
                ThresholdValue::Finite(t) => Some(t),
                ThresholdValue::Infinite => None,
            };
            let dormant = sample_poisson(params.mu(), rng);
            verts.push(SsfmVertex {
                parent,
                depth: child_depth,
                children: vec![0; d as usize],
                threshold,
                dormant,
                accrued: 1,
                phase: Phase::Accruing { accruer: survivor },
            });
            verts[parent as usize].children[slot as usize] = id;
            frogs[survivor].pos = id;
            frogs[survivor].came_from = Some(parent);

            if let Some(t) = threshold {
                if 1 >= t {
                    verts[id as usize].phase = Phase::Activated;
                    for _ in 0..dormant {
                        frogs.push(Frog {
                            pos: id,
                            came_from: None,
                            forced_child: false,
                            alive: true,
                        });
                    }
                    frogs[survivor].forced_child = true;
                }
            }
        }

        // Compact, preserving order so frog indices stay deterministic.
        // Accruer indices must be remapped.
        let mut remap: Vec<Option<usize>> = Vec::with_capacity(frogs.len());
        let mut kept = 0usize;
        for f in &frogs {
            if f.alive {
                remap.push(Some(kept));
                kept += 1;
            } else {
                remap.push(None);
            }
        }
        for v in verts.iter_mut() {
            if let Phase::Accruing { accruer } = v.phase {
                match remap[accruer] {
                    Some(new_idx) => v.phase = Phase::Accruing { accruer: new_idx },
                    // The first visitor died mid-accrual (killed elsewhere
                    // is impossible while dwelling; it must have moved and
                    // been marked inert already), so this arm only guards
                    // against the unreachable.
                    None => v.phase = Phase::Inert,
                }
            }
        }
        frogs.retain(|f| f.alive);

        if let Some(m) = caps.visits_target {
            if v_prime >= m {
                return SsfmSample {
                    v_prime,
                    ticks: tick + 1,
                    caps_hit,
                };
            }
        }
        if frogs.len() as u64 > caps.population_cap {
            caps_hit.population = true;
            return SsfmSample {
                v_prime,
                ticks: tick + 1,
                caps_hit,
            };
        }
    }

    if !frogs.is_empty() {
        caps_hit.step = true;
    }
    SsfmSample {
        v_prime,
        ticks: caps.step_cap,
        caps_hit,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::PoissonMean;
    use crate::stats::chi_square_fit;
    use rayon::prelude::*;

    fn params(d: u32, tau: &str, mu: f64) -> ModelParams {
        ModelParams::new(
            d,
            ThresholdSpec::parse(tau).unwrap(),
            PoissonMean::new(mu).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn alpha_closed_forms() {
        let d1 = ThresholdSpec::parse("delta:1").unwrap();
        assert_eq!(alpha(&d1, 2).unwrap(), 1.0);
        assert_eq!(alpha(&d1, 7).unwrap(), 1.0);
        let d2 = ThresholdSpec::parse("delta:2").unwrap();
        assert!((alpha(&d2, 2).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let mixed = ThresholdSpec::parse("pmf:1=0.5,inf=0.5").unwrap();
        assert!((alpha(&mixed, 2).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn first_step_from_depth_one_hits_root_third_of_time() {
        let mut rng = RngStream::new(31, 0);
        let n = 1_000_000u64;
        let mut hits = 0u64;
        for _ in 0..n {
            let p = sample_lazy_nb_path(2, PathStart::AtDepth(1), 4, &mut rng).unwrap();
            if p.depths[1] == 0 {
                hits += 1;
                assert_eq!(p.termination, PathEnd::ReachedRoot);
                assert_eq!(p.steps(), 1);
            }
        }
        let freq = hits as f64 / n as f64;
        assert!((freq - 1.0 / 3.0).abs() < 0.002, "freq {freq}");
    }

    #[test]
    fn dwell_repeats_fit_geo0() {
        let d = 2u32;
        let mut rng = RngStream::new(32, 0);
        let mut counts = vec![0u64; 20];
        for _ in 0..100_000 {
            let p = sample_lazy_nb_path(d, PathStart::Root, 8, &mut rng).unwrap();
            // Skip the start vertex (never dwells) and the final vertex
            // (its dwell run is cut short by the kill or the cap); the
            // interior dwells are complete runs of 1 + Geo0(d/(d+1)).
            let len = p.dwells.len();
            for &dw in &p.dwells[1..len.saturating_sub(1)] {
                let repeats = (dw - 1).min(19);
                counts[repeats as usize] += 1;
            }
        }
        let q = d as f64 / (d as f64 + 1.0);
        let fit = chi_square_fit(&counts, |k| (1.0 - q).powi(k as i32) * q, 5.0);
        assert!(fit.p_value > 0.001, "p = {}", fit.p_value);
    }

    #[test]
    fn root_walks_never_return() {
        // A walk from the root moves strictly downward, so with no
        // activations the root-visit count is always zero.
        let p = params(2, "delta:1", 0.0);
        let caps = SsfmCaps::new(30, 5000, 1_000_000).unwrap();
        for s in 0..200 {
            let mut rng = RngStream::new(33, s);
            let out = simulate_ssfm(&p, &caps, &mut rng);
            assert_eq!(out.v_prime, 0);
        }
    }

    #[test]
    fn inert_thresholds_give_zero_visits() {
        let p = params(2, "pmf:1000=0.001,inf=0.999", 30.0);
        let caps = SsfmCaps::new(25, 3000, 1_000_000).unwrap();
        for s in 0..100 {
            let mut rng = RngStream::new(34, s);
            assert_eq!(simulate_ssfm(&p, &caps, &mut rng).v_prime, 0);
        }
    }

    #[test]
    fn recurrent_regime_produces_visits() {
        let p = params(2, "delta:1", 20.0);
        let caps = SsfmCaps::new(30, 10_000, 1_000_000)
            .unwrap()
            .with_visits_target(10);
        let hits: u64 = (0..200u64)
            .into_par_iter()
            .map(|s| {
                let mut rng = RngStream::new(35, s);
                u64::from(simulate_ssfm(&p, &caps, &mut rng).v_prime >= 10)
            })
            .sum();
        assert!(hits > 150, "only {hits}/200 runs reached 10 visits");
    }

    #[test]
    fn deterministic_replay() {
        let p = params(3, "delta:2", 8.0);
        let caps = SsfmCaps::new(15, 400, 100_000).unwrap();
        let run = |seed| {
            let mut rng = RngStream::new(36, seed);
            let s = simulate_ssfm(&p, &caps, &mut rng);
            (s.v_prime, s.ticks)
        };
        for seed in 0..10 {
            assert_eq!(run(seed), run(seed));
        }
    }
}
