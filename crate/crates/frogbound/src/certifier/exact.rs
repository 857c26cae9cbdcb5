//! Exact per-pattern combinatorics over activation bitstrings.
//!
//! A pattern `a` has one bit per nerve of a length-n spine, flattened in
//! spine order: position `(y, i)` (spine vertex y, nerve slot i) maps to bit
//! `(y-1)(d-1) + (i-1)`. The exponent `h` aggregates, per pattern, the
//! root-visit rates of the live nerves and the dead-nerve Poisson rates, all
//! of which are powers of d; with common denominator `d^{n+1}` every value
//! is an exact integer numerator, which is how everything here computes.

use crate::{Error, Result};
use num_bigint::BigInt;
use num_rational::BigRational;

/// Full-enumeration budget: at most 2^24 patterns.
pub const ENUMERATION_BIT_BUDGET: u32 = 24;

fn check_pattern(a: &[bool], n: u32, d: u32) -> Result<()> {
    if d < 2 {
        return Err(Error::param(format!("branching d must be >= 2, got {d}")));
    }
    if n < 1 {
        return Err(Error::param("spine length must be >= 1"));
    }
    let want = ((d - 1) * n) as usize;
    if a.len() != want {
        return Err(Error::param(format!(
            "pattern length {} does not match (d-1)n = {want}",
            a.len()
        )));
    }
    Ok(())
}

/// Spine position (1-based) of flattened bit `idx`.
fn spine_pos(idx: usize, d: u32) -> i64 {
    (idx / (d as usize - 1)) as i64 + 1
}

/// Numerator of h over denominator d^{n+1}, by its defining expansion:
/// `h = 1 + sum_{dead (x,j)} sum_{live (y,i)} d^{-|x-y|-1}
///        + sum_{live (x,i)} (d^{-x} - d^{x-n-1})`.
fn h_numerator(a: &[bool], n: u32, d: u32) -> i128 {
    let nn = n as i64;
    let dd = d as i128;
    let pow = |e: i64| -> i128 {
        debug_assert!(e >= 0);
        dd.pow(e as u32)
    };
    let mut num = pow(nn + 1); // the constant 1
    for (xi, &ax) in a.iter().enumerate() {
        let x = spine_pos(xi, d);
        if ax {
            // d^{-x} - d^{x-n-1}, scaled by d^{n+1}.
            num += pow(nn + 1 - x) - pow(x);
        } else {
            for (yi, &ay) in a.iter().enumerate() {
                if ay {
                    let y = spine_pos(yi, d);
                    // d^{-|x-y|-1}, scaled: exponent n - |x-y| >= 1.
                    num += pow(nn - (x - y).abs());
                }
            }
        }
    }
    num
}

/// Numerator of the same exponent assembled from the operator-side rates:
/// the root-visit rate `d^{-n} + sum_{live} d^{-y}` plus, for every dead
/// nerve, the unit-lambda inflow rate `d^{x-n-1} + sum_{live} d^{-|y-x|-1}`.
/// An independent route used to cross-check `h_numerator` exactly.
fn h_theta_numerator(a: &[bool], n: u32, d: u32) -> i128 {
    let nn = n as i64;
    let dd = d as i128;
    let pow = |e: i64| -> i128 {
        debug_assert!(e >= 0);
        dd.pow(e as u32)
    };
    let mut num = pow(1); // d^{-n} scaled by d^{n+1}
    for (yi, &ay) in a.iter().enumerate() {
        if ay {
            let y = spine_pos(yi, d);
            num += pow(nn + 1 - y);
        }
    }
    for (xi, &ax) in a.iter().enumerate() {
        if ax {
            continue;
        }
        let x = spine_pos(xi, d);
        num += pow(x);
        for (yi, &ay) in a.iter().enumerate() {
            if ay {
                let y = spine_pos(yi, d);
                num += pow(nn - (x - y).abs());
            }
        }
    }
    num
}

fn ratio(num: i128, d: u32, n: u32) -> BigRational {
    let denom = BigInt::from(d).pow(n + 1);
    BigRational::new(BigInt::from(num), denom)
}

/// Exact value of the pattern exponent h.
pub fn h_exact(a: &[bool], n: u32, d: u32) -> Result<BigRational> {
    check_pattern(a, n, d)?;
    Ok(ratio(h_numerator(a, n, d), d, n))
}

/// Exact value of the operator-side assembly of the same exponent.
pub fn h_theta_assembly(a: &[bool], n: u32, d: u32) -> Result<BigRational> {
    check_pattern(a, n, d)?;
    Ok(ratio(h_theta_numerator(a, n, d), d, n))
}

/// Number of adjacent unequal bit pairs, reading the flattened pattern left
/// to right ((d-1)n - 1 pairs).
pub fn bit_flips(a: &[bool], n: u32, d: u32) -> Result<u32> {
    check_pattern(a, n, d)?;
    Ok(a.windows(2).filter(|w| w[0] != w[1]).count() as u32)
}

/// Exact dead-nerve rate under unit density:
/// `sum_{dead (x,j)} (1/(d+1)) d^{x-n}`.
pub fn dead_mu_exponent_exact(a: &[bool], n: u32, d: u32) -> Result<BigRational> {
    check_pattern(a, n, d)?;
    let dd = d as i128;
    let mut num: i128 = 0;
    for (xi, &ax) in a.iter().enumerate() {
        if !ax {
            num += dd.pow(spine_pos(xi, d) as u32);
        }
    }
    let denom = BigInt::from(d + 1) * BigInt::from(d).pow(n);
    Ok(BigRational::new(BigInt::from(num), denom))
}

/// One fully evaluated pattern.
#[derive(Clone, Debug)]
pub struct EnumerationRow {
    pub pattern: Vec<bool>,
    pub h: BigRational,
    pub flips: u32,
    pub dead_mu_exponent: BigRational,
}

fn bits_of(mask: u64, len: usize) -> Vec<bool> {
    (0..len).map(|i| (mask >> i) & 1 == 1).collect()
}

fn pattern_string(a: &[bool]) -> String {
    a.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

/// Enumerate every pattern of a length-n spine with exact h, flip count, and
/// dead-nerve rate.
pub fn enumerate_rows(n: u32, d: u32) -> Result<Vec<EnumerationRow>> {
    let bits = (d - 1) * n;
    if bits > ENUMERATION_BIT_BUDGET {
        return Err(Error::EnumerationBudget(format!(
            "(d-1)n = {bits} exceeds {ENUMERATION_BIT_BUDGET}"
        )));
    }
    let len = bits as usize;
    let mut rows = Vec::with_capacity(1usize << len);
    for mask in 0u64..(1u64 << len) {
        let a = bits_of(mask, len);
        rows.push(EnumerationRow {
            h: ratio(h_numerator(&a, n, d), d, n),
            flips: bit_flips(&a, n, d)?,
            dead_mu_exponent: dead_mu_exponent_exact(&a, n, d)?,
            pattern: a,
        });
    }
    Ok(rows)
}

/// Distinct (h - 1) values over all patterns of a length-n spine, with
/// multiplicities, converted to f64 for use in exponential sums. Exactness
/// is preserved up to the final conversion (one rounding per distinct
/// value).
pub(crate) fn h_spectrum(n: u32, d: u32) -> Result<Vec<(f64, u64)>> {
    let bits = (d - 1) * n;
    if bits > ENUMERATION_BIT_BUDGET {
        return Err(Error::EnumerationBudget(format!(
            "(d-1)n = {bits} exceeds {ENUMERATION_BIT_BUDGET}"
        )));
    }
    let len = bits as usize;
    let denom = (d as i128).pow(n + 1);
    let mut grouped: std::collections::BTreeMap<i128, u64> = std::collections::BTreeMap::new();
    for mask in 0u64..(1u64 << len) {
        let a = bits_of(mask, len);
        *grouped.entry(h_numerator(&a, n, d) - denom).or_insert(0) += 1;
    }
    Ok(grouped
        .into_iter()
        .map(|(num, count)| (num as f64 / denom as f64, count))
        .collect())
}

/// Exact minimum of h over all patterns of a length-n spine, with a witness.
pub fn min_h_over_patterns(n: u32, d: u32) -> Result<(BigRational, Vec<bool>)> {
    let bits = (d - 1) * n;
    if bits > ENUMERATION_BIT_BUDGET {
        return Err(Error::EnumerationBudget(format!(
            "(d-1)n = {bits} exceeds {ENUMERATION_BIT_BUDGET}"
        )));
    }
    let len = bits as usize;
    let mut best: Option<(i128, u64)> = None;
    for mask in 0u64..(1u64 << len) {
        let a = bits_of(mask, len);
        let num = h_numerator(&a, n, d);
        if best.map_or(true, |(b, _)| num < b) {
            best = Some((num, mask));
        }
    }
    let (num, mask) = best.expect("at least one pattern");
    Ok((ratio(num, d, n), bits_of(mask, len)))
}

/// The checkable claims.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClaimId {
    /// Per pattern: h >= 1 + flips/d^2.
    Hc,
    /// Averaged: E[exp(-lambda h)] over uniform patterns is at most
    /// exp(-lambda) 2^{-L+1} (1 + exp(-lambda/d^2))^{L-1}, L = (d-1)n.
    Hb,
    /// The two exact assemblies of h agree on every pattern.
    HExpand,
    /// d^{-n} + sum over nerves of d^{x-n-1} equals 1 exactly.
    Constant1,
    /// Sum scale of `Hb`: sum_a exp(-lambda h) vs
    /// exp(-lambda) 2 (1 + exp(-lambda/d^2))^{L-1}.
    Sb,
}

impl ClaimId {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "hc" => Ok(ClaimId::Hc),
            "hb" => Ok(ClaimId::Hb),
            "hexpand" => Ok(ClaimId::HExpand),
            "constant1" => Ok(ClaimId::Constant1),
            "sb" => Ok(ClaimId::Sb),
            other => Err(Error::param(format!(
                "unknown claim `{other}` (expected hc, hb, hexpand, constant1, sb)"
            ))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ClaimId::Hc => "hc",
            ClaimId::Hb => "hb",
            ClaimId::HExpand => "hexpand",
            ClaimId::Constant1 => "constant1",
            ClaimId::Sb => "sb",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClaimVerdict {
    Holds,
    Violated,
}

impl ClaimVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            ClaimVerdict::Holds => "holds",
            ClaimVerdict::Violated => "violated",
        }
    }
}

/// One claim evaluated at one (n, lambda) cell.
#[derive(Clone, Debug)]
pub struct ClaimCell {
    pub claim: ClaimId,
    pub d: u32,
    pub n: u32,
    pub lambda: Option<f64>,
    pub verdict: ClaimVerdict,
    /// Violation margin: positive means the claim fails by this much, in the
    /// claim's own scale; for `Holds` cells the (nonnegative) slack.
    pub margin: f64,
    pub witnesses: Vec<String>,
    pub detail: String,
}

/// Exact-enumeration verdicts for a claim grid.
#[derive(Clone, Debug)]
pub struct ClaimReport {
    pub d: u32,
    pub n_max: u32,
    pub lambdas: Vec<f64>,
    pub cells: Vec<ClaimCell>,
}

impl ClaimReport {
    pub fn cells_for(&self, claim: ClaimId) -> impl Iterator<Item = &ClaimCell> {
        self.cells.iter().filter(move |c| c.claim == claim)
    }
}

/// Check every claim by exact enumeration for all n up to `n_max`, with the
/// averaged claims evaluated at each of `lambdas`.
pub fn enumerate_claims(d: u32, n_max: u32, lambdas: &[f64]) -> Result<ClaimReport> {
    if n_max < 1 {
        return Err(Error::param("n_max must be >= 1"));
    }
    if (d - 1) * n_max > ENUMERATION_BIT_BUDGET {
        return Err(Error::EnumerationBudget(format!(
            "(d-1)n_max = {} exceeds {ENUMERATION_BIT_BUDGET}",
            (d - 1) * n_max
        )));
    }
    for &l in lambdas {
        if !(l.is_finite() && l >= 0.0) {
            return Err(Error::param(format!("lambda must be >= 0, got {l}")));
        }
    }
    let mut cells = Vec::new();
    let dd = d as i128;
    let df = d as f64;

    for n in 1..=n_max {
        // constant1: d + (d-1) sum_{x=1}^n d^x == d^{n+1}, exactly.
        let lhs: i128 = dd + (dd - 1) * (1..=n).map(|x| dd.pow(x)).sum::<i128>();
        let rhs: i128 = dd.pow(n + 1);
        cells.push(ClaimCell {
            claim: ClaimId::Constant1,
            d,
            n,
            lambda: None,
            verdict: if lhs == rhs {
                ClaimVerdict::Holds
            } else {
                ClaimVerdict::Violated
            },
            margin: (lhs - rhs) as f64 / rhs as f64,
            witnesses: Vec::new(),
            detail: format!("scaled identity {lhs} == {rhs}"),
        });

        let len = ((d - 1) * n) as usize;
        let denom = dd.pow(n + 1);
        let mut h_nums = Vec::with_capacity(1 << len);
        let mut flips_v = Vec::with_capacity(1 << len);
        let mut hexpand_ok = true;
        let mut hexpand_witness = None;
        let mut hc_witnesses = Vec::new();
        let mut hc_min_slack: Option<BigRational> = None;
        for mask in 0u64..(1u64 << len) {
            let a = bits_of(mask, len);
            let num = h_numerator(&a, n, d);
            let alt = h_theta_numerator(&a, n, d);
            if num != alt && hexpand_ok {
                hexpand_ok = false;
                hexpand_witness = Some(pattern_string(&a));
            }
            let f = a.windows(2).filter(|w| w[0] != w[1]).count() as i128;
            // hc: h >= 1 + f/d^2, i.e. num d^2 >= (d^2 + f) d^{n+1}.
            let slack_num = num * dd * dd - (dd * dd + f) * denom;
            if slack_num < 0 {
                hc_witnesses.push(pattern_string(&a));
            }
            let slack = BigRational::new(
                BigInt::from(slack_num),
                BigInt::from(denom) * BigInt::from(dd * dd),
            );
            if hc_min_slack.as_ref().map_or(true, |m| slack < *m) {
                hc_min_slack = Some(slack);
            }
            h_nums.push(num);
            flips_v.push(f as u32);
        }

        cells.push(ClaimCell {
            claim: ClaimId::HExpand,
            d,
            n,
            lambda: None,
            verdict: if hexpand_ok {
                ClaimVerdict::Holds
            } else {
                ClaimVerdict::Violated
            },
            margin: 0.0,
            witnesses: hexpand_witness.into_iter().collect(),
            detail: format!("dual assembly over {} patterns", 1u64 << len),
        });

        let hc_margin = hc_min_slack
            .map(|m| -rational_to_f64(&m))
            .unwrap_or(0.0);
        cells.push(ClaimCell {
            claim: ClaimId::Hc,
            d,
            n,
            lambda: None,
            verdict: if hc_witnesses.is_empty() {
                ClaimVerdict::Holds
            } else {
                ClaimVerdict::Violated
            },
            margin: hc_margin,
            witnesses: hc_witnesses.clone(),
            detail: "per-pattern h >= 1 + flips/d^2".into(),
        });

        for &lambda in lambdas {
            let mut sum_exp = 0.0f64;
            let mut worst_excess = f64::NEG_INFINITY;
            let mut worst_pattern = 0u64;
            for (mask, (&num, &f)) in h_nums.iter().zip(&flips_v).enumerate() {
                let h = num as f64 / denom as f64;
                let e = (-lambda * h).exp();
                sum_exp += e;
                // Per-pattern excess over the flip-count budget used by the
                // averaged bound.
                let budget = (-lambda * (1.0 + f as f64 / (df * df))).exp();
                let excess = e - budget;
                if excess > worst_excess {
                    worst_excess = excess;
                    worst_pattern = mask as u64;
                }
            }
            let count = (1u64 << len) as f64;
            let mean_exp = sum_exp / count;
            let rhs_mean = (-lambda).exp()
                * 2f64.powi(-(len as i32) + 1)
                * (1.0 + (-lambda / (df * df)).exp()).powi(len as i32 - 1);
            let margin_mean = mean_exp - rhs_mean;
            let tol = 1e-12 * rhs_mean.max(1e-300);
            let verdict = if margin_mean > tol {
                ClaimVerdict::Violated
            } else {
                ClaimVerdict::Holds
            };
            let witnesses = if verdict == ClaimVerdict::Violated {
                let mut w = hc_witnesses.clone();
                let worst = pattern_string(&bits_of(worst_pattern, len));
                if !w.contains(&worst) {
                    w.push(worst);
                }
                w
            } else {
                Vec::new()
            };
            cells.push(ClaimCell {
                claim: ClaimId::Hb,
                d,
                n,
                lambda: Some(lambda),
                verdict,
                margin: margin_mean,
                witnesses: witnesses.clone(),
                detail: format!("E[exp(-lambda h)] = {mean_exp:.16e} vs bound {rhs_mean:.16e}"),
            });
            // Sum scale of the same inequality.
            let rhs_sum = rhs_mean * count;
            cells.push(ClaimCell {
                claim: ClaimId::Sb,
                d,
                n,
                lambda: Some(lambda),
                verdict,
                margin: sum_exp - rhs_sum,
                witnesses,
                detail: format!("sum_a exp(-lambda h) = {sum_exp:.16e} vs bound {rhs_sum:.16e}"),
            });
        }
    }

    Ok(ClaimReport {
        d,
        n_max,
        lambdas: lambdas.to_vec(),
        cells,
    })
}

pub(crate) fn rational_to_f64(r: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().expect("certifier rationals stay in f64 range")
}
