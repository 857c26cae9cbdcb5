//! Threshold laws: discrete distributions on {1, 2, ...} ∪ {∞} with less
//! than full mass at infinity.
//!
//! The textual grammar accepted by [`ThresholdSpec::parse`] (and used by the
//! CLI and config files) is:
//!
//! - `delta:K` — point mass at the positive integer `K`;
//! - `pmf:k1=p1,k2=p2[,inf=p]` — a general law, e.g. `pmf:1=0.5,inf=0.5`.

use crate::dist::{sample_geometric, GeometricSupport};
use crate::rng::RngStream;
use crate::{Error, Result};
use rand::RngExt;
use std::fmt;

/// One support point of a threshold law.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ThresholdValue {
    Finite(u64),
    Infinite,
}

/// A validated threshold law.
///
/// Invariants: probabilities are nonnegative and sum to 1 within 1e-12, all
/// finite atoms are >= 1, and the mass at infinity is strictly less than 1.
/// Atoms are stored in canonical order (finite ascending, infinity last) with
/// duplicates merged, so equal laws render identically.
#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdSpec {
    atoms: Vec<(ThresholdValue, f64)>,
}

impl ThresholdSpec {
    pub fn new(atoms: Vec<(ThresholdValue, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::ThresholdSpec("no atoms".into()));
        }
        let mut merged: Vec<(ThresholdValue, f64)> = Vec::new();
        for &(v, p) in &atoms {
            if !(p.is_finite() && p >= 0.0) {
                return Err(Error::ThresholdSpec(format!("invalid probability {p}")));
            }
            if let ThresholdValue::Finite(k) = v {
                if k < 1 {
                    return Err(Error::ThresholdSpec(format!(
                        "finite threshold values must be >= 1, got {k}"
                    )));
                }
            }
            match merged.iter_mut().find(|(w, _)| *w == v) {
                Some((_, q)) => *q += p,
                None => merged.push((v, p)),
            }
        }
        merged.sort_by_key(|&(v, _)| v);
        let total: f64 = merged.iter().map(|&(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::ThresholdSpec(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        let inf_mass: f64 = merged
            .iter()
            .filter(|(v, _)| *v == ThresholdValue::Infinite)
            .map(|&(_, p)| p)
            .sum();
        let finite_mass = total - inf_mass;
        if finite_mass <= 1e-12 {
            return Err(Error::ThresholdSpec(
                "mass at infinity must be strictly less than 1".into(),
            ));
        }
        Ok(ThresholdSpec { atoms: merged })
    }

    /// Point mass at `k`.
    pub fn delta(k: u64) -> Result<Self> {
        ThresholdSpec::new(vec![(ThresholdValue::Finite(k), 1.0)])
    }

    /// Parse the `delta:K` / `pmf:...` grammar.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("delta:") {
            let k: u64 = rest
                .parse()
                .map_err(|_| Error::ThresholdSpec(format!("bad delta value `{rest}`")))?;
            return ThresholdSpec::delta(k);
        }
        if let Some(rest) = s.strip_prefix("pmf:") {
            let mut atoms = Vec::new();
            for pair in rest.split(',') {
                let (key, val) = pair.split_once('=').ok_or_else(|| {
                    Error::ThresholdSpec(format!("expected `key=prob`, got `{pair}`"))
                })?;
                let p: f64 = val
                    .parse()
                    .map_err(|_| Error::ThresholdSpec(format!("bad probability `{val}`")))?;
                let v = if key == "inf" {
                    ThresholdValue::Infinite
                } else {
                    let k: u64 = key
                        .parse()
                        .map_err(|_| Error::ThresholdSpec(format!("bad value `{key}`")))?;
                    ThresholdValue::Finite(k)
                };
                atoms.push((v, p));
            }
            return ThresholdSpec::new(atoms);
        }
        Err(Error::ThresholdSpec(format!(
            "`{s}` matches neither `delta:K` nor `pmf:k=p,...`"
        )))
    }

    pub fn atoms(&self) -> &[(ThresholdValue, f64)] {
        &self.atoms
    }

    pub fn infinite_mass(&self) -> f64 {
        self.atoms
            .iter()
            .filter(|(v, _)| *v == ThresholdValue::Infinite)
            .map(|&(_, p)| p)
            .sum()
    }

    /// Draw one threshold.
    pub fn sample(&self, rng: &mut RngStream) -> ThresholdValue {
        let u: f64 = rng.random();
        let mut cum = 0.0;
        for &(v, p) in &self.atoms {
            cum += p;
            if u < cum {
                return v;
            }
        }
        self.atoms.last().expect("nonempty").0
    }
}

impl fmt::Display for ThresholdSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.atoms.len() == 1 {
            if let (ThresholdValue::Finite(k), _) = self.atoms[0] {
                return write!(f, "delta:{k}");
            }
        }
        write!(f, "pmf:")?;
        for (i, &(v, p)) in self.atoms.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            match v {
                ThresholdValue::Finite(k) => write!(f, "{k}={p}")?,
                ThresholdValue::Infinite => write!(f, "inf={p}")?,
            }
        }
        Ok(())
    }
}

/// First-visitor dwell total on arrival at a fresh vertex: the initial visit
/// plus a Geo0(d/(d+1)) run of lazy repeats.
pub fn sample_first_visit_dwell(d: u32, rng: &mut RngStream) -> u64 {
    let stay_run = sample_geometric(
        d as f64 / (d as f64 + 1.0),
        GeometricSupport::FromZero,
        rng,
    )
    .expect("d >= 1 gives a valid probability");
    1 + stay_run
}
