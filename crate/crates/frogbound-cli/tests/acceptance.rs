//! Acceptance suite: one test per criterion, each printing a PASS line with
//! its measured quantities (run with `--nocapture` to see them on success).
//!
//! Every tolerance is pinned in code. Statistical criteria use fixed seeds,
//! so a pass is reproducible bit-for-bit.

use frogbound::certifier::{
    certify, enumerate_claims, f_bound, h_exact, h_theta_assembly, CertMode, CertVerdict,
    CertifyConfig, ClaimId, ClaimVerdict,
};
use frogbound::dist::{
    poisson_thin, sample_geometric, GeometricSupport, PoissonMean,
};
use frogbound::gadget::{
    halting_law_numerators, verify_activation_ratio, ActivationRatioCell, HaltSource,
};
use frogbound::rde::{estimate_bootstrap, iterate_b, sample_rde, BootstrapVerdict, EmpiricalDist};
use frogbound::rng::{RngStream, StreamFamily};
use frogbound::ssfm::{alpha, simulate_ssfm, SsfmCaps};
use frogbound::stats::{chi_square_fit, mean_stderr, poisson_pmf_table};
use frogbound::threshold::{ThresholdSpec, ThresholdValue};
use frogbound::tree::{recurrence_proxy, simulate_tfm, ModelParams, TfmCaps};
use num_bigint::BigInt;
use num_rational::BigRational;
use rayon::prelude::*;
use std::sync::{Mutex, MutexGuard};
use std::time::Instant;

// Criteria run one at a time so wall-clock limits measure the criterion,
// not scheduler contention with its neighbors.
static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn tau(s: &str) -> ThresholdSpec {
    ThresholdSpec::parse(s).unwrap()
}

fn params(d: u32, t: &str, mu: f64) -> ModelParams {
    ModelParams::new(d, tau(t), PoissonMean::new(mu).unwrap()).unwrap()
}

fn rat(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

fn bits_of(mask: u64, len: usize) -> Vec<bool> {
    (0..len).map(|i| (mask >> i) & 1 == 1).collect()
}

#[test]
fn criterion_01_constant_one_identity() {
    let _guard = serial();
    let start = Instant::now();
    // The halting law from v' encodes d^{-n} + sum_{x,j} d^{x-n-1} over the
    // common denominator; the identity is exact iff the numerators sum to it.
    for d in [2u32, 3, 4] {
        for n in 1..=8u32 {
            let (num, denom) = halting_law_numerators(n, d, HaltSource::VPrime);
            assert_eq!(num.iter().sum::<u128>(), denom, "d={d} n={n}");
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!("ACCEPTANCE 01 constant-1 identity: PASS (d in 2..4, n in 1..8, exact; {elapsed:?})");
}

#[test]
fn criterion_02_dual_assembly_equivalence() {
    let _guard = serial();
    let start = Instant::now();
    let mut patterns = 0u64;
    for d in [2u32, 3] {
        for n in 1..=6u32 {
            let len = ((d - 1) * n) as usize;
            for mask in 0u64..(1 << len) {
                let a = bits_of(mask, len);
                assert_eq!(
                    h_exact(&a, n, d).unwrap(),
                    h_theta_assembly(&a, n, d).unwrap(),
                    "d={d} n={n} mask={mask:b}"
                );
                patterns += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    println!("ACCEPTANCE 02 dual assembly: PASS ({patterns} patterns exact-equal; {elapsed:?})");
}

#[test]
fn criterion_03_h_table_regression() {
    let _guard = serial();
    let to_bits = |s: &str| -> Vec<bool> { s.chars().map(|c| c == '1').collect() };
    assert_eq!(h_exact(&to_bits("00"), 2, 2).unwrap(), rat(1, 1));
    assert_eq!(h_exact(&to_bits("10"), 2, 2).unwrap(), rat(3, 2));
    assert_eq!(h_exact(&to_bits("01"), 2, 2).unwrap(), rat(1, 1));
    assert_eq!(h_exact(&to_bits("11"), 2, 2).unwrap(), rat(1, 1));
    println!("ACCEPTANCE 03 h table (d=2, n=2): PASS (1, 3/2, 1, 1 exact)");
}

#[test]
fn criterion_04_flip_distribution_binomial() {
    let _guard = serial();
    fn binom(n: u64, k: u64) -> u128 {
        if k > n {
            return 0;
        }
        let mut out = 1u128;
        for i in 0..k.min(n - k) {
            out = out * (n - i) as u128 / (i + 1) as u128;
        }
        out
    }
    for d in [2u32, 3] {
        for n in 1..=6u32 {
            let len = ((d - 1) * n) as usize;
            let mut counts = vec![0u128; len];
            for mask in 0u64..(1 << len) {
                let a = bits_of(mask, len);
                let f = frogbound::certifier::bit_flips(&a, n, d).unwrap();
                counts[f as usize] += 1;
            }
            for (f, &c) in counts.iter().enumerate() {
                assert_eq!(
                    c,
                    2 * binom(len as u64 - 1, f as u64),
                    "d={d} n={n} flips={f}"
                );
            }
        }
    }
    println!("ACCEPTANCE 04 flip distribution: PASS (exactly 2 C(L-1, f) for d in 2..3, n <= 6)");
}

#[test]
fn criterion_05_claim_report_verdicts() {
    let _guard = serial();
    let report = enumerate_claims(2, 2, &[1.0]).unwrap();
    let hb1 = report
        .cells_for(ClaimId::Hb)
        .find(|c| c.n == 1)
        .expect("n=1 cell");
    assert_eq!(hb1.verdict, ClaimVerdict::Holds);
    assert!(hb1.margin.abs() < 1e-15, "n=1 margin {}", hb1.margin);

    let hb2 = report
        .cells_for(ClaimId::Hb)
        .find(|c| c.n == 2)
        .expect("n=2 cell");
    assert_eq!(hb2.verdict, ClaimVerdict::Violated);
    let e1 = (-1.0f64).exp();
    let expect = (3.0 * e1 + (-1.5f64).exp()) / 4.0 - e1 * (1.0 + (-0.25f64).exp()) / 2.0;
    assert!(expect > 0.0);
    assert!(
        (hb2.margin - expect).abs() < 1e-15,
        "margin {} expected {expect}",
        hb2.margin
    );
    assert!(hb2.witnesses.contains(&"01".to_string()));

    let hc2 = report
        .cells_for(ClaimId::Hc)
        .find(|c| c.n == 2)
        .expect("hc n=2 cell");
    assert_eq!(hc2.verdict, ClaimVerdict::Violated);
    assert_eq!(hc2.witnesses, vec!["01".to_string()]);
    println!(
        "ACCEPTANCE 05 claim report: PASS (equality at n=1; violation margin {:.17e} at n=2)",
        hb2.margin
    );
}

#[test]
fn criterion_06_alpha_formula_monte_carlo() {
    let _guard = serial();
    let start = Instant::now();
    let specs = ["delta:1", "delta:2", "delta:3", "pmf:1=0.5,inf=0.5"];
    let reps = 1_000_000u64;
    let mut worst_sigmas = 0.0f64;
    for (ci, spec) in specs.iter().enumerate() {
        for (di, d) in [2u32, 3].iter().enumerate() {
            let t = tau(spec);
            let analytic = alpha(&t, *d).unwrap();
            let stay = *d as f64 / (*d as f64 + 1.0);
            let fam = StreamFamily::new(0xa1fa, ((ci * 2 + di) as u64) << 32);
            let hits: u64 = (0..reps)
                .into_par_iter()
                .map(|r| {
                    let mut rng = fam.stream(r);
                    let threshold = t.sample(&mut rng);
                    let dwell = sample_geometric(stay, GeometricSupport::FromZero, &mut rng)
                        .unwrap();
                    match threshold {
                        ThresholdValue::Finite(k) => u64::from(dwell >= k - 1),
                        ThresholdValue::Infinite => 0,
                    }
                })
                .sum();
            let p_hat = hits as f64 / reps as f64;
            let sigma = (analytic * (1.0 - analytic) / reps as f64).sqrt();
            let diff = (p_hat - analytic).abs();
            assert!(
                diff <= 3.0 * sigma + 1e-12,
                "{spec} d={d}: p_hat {p_hat} vs {analytic} (sigma {sigma})"
            );
            if sigma > 0.0 {
                worst_sigmas = worst_sigmas.max(diff / sigma);
            }
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
    println!(
        "ACCEPTANCE 06 alpha formula: PASS (8 cells at 1e6 samples, worst {:.2} sigma; {elapsed:?})",
        worst_sigmas
    );
}

#[test]
fn criterion_07_poisson_thinning() {
    let _guard = serial();
    let total = PoissonMean::new(2.0).unwrap();
    let draws = 100_000u64;
    let mut rng = RngStream::new(0x7417, 0);
    let mut xs = Vec::with_capacity(draws as usize);
    let mut ys = Vec::with_capacity(draws as usize);
    for _ in 0..draws {
        let v = poisson_thin(total, &[0.5, 0.5], &mut rng).unwrap();
        xs.push(v[0]);
        ys.push(v[1]);
    }
    let table = poisson_pmf_table(1.0, 25);
    for (name, data) in [("first", &xs), ("second", &ys)] {
        let mut counts = vec![0u64; 26];
        for &v in data.iter() {
            counts[v.min(25) as usize] += 1;
        }
        let fit = chi_square_fit(&counts, |k| table[k as usize], 5.0);
        assert!(fit.p_value > 0.001, "{name} marginal p = {}", fit.p_value);
    }
    let n = draws as f64;
    let mx = xs.iter().sum::<u64>() as f64 / n;
    let my = ys.iter().sum::<u64>() as f64 / n;
    let cov = xs
        .iter()
        .zip(&ys)
        .map(|(&a, &b)| (a as f64 - mx) * (b as f64 - my))
        .sum::<f64>()
        / (n - 1.0);
    let vx = xs.iter().map(|&a| (a as f64 - mx).powi(2)).sum::<f64>() / (n - 1.0);
    let vy = ys.iter().map(|&b| (b as f64 - my).powi(2)).sum::<f64>() / (n - 1.0);
    let se_cov = (vx * vy / n).sqrt();
    assert!(
        cov.abs() <= 5.0 * se_cov,
        "covariance {cov} exceeds 5 se = {}",
        5.0 * se_cov
    );
    println!(
        "ACCEPTANCE 07 Poisson thinning: PASS (marginals fit Poi(1), |cov| = {:.4} <= 5 se = {:.4})",
        cov.abs(),
        5.0 * se_cov
    );
}

#[test]
fn criterion_08_activation_ratio_grid() {
    let _guard = serial();
    let start = Instant::now();
    let mut cells = Vec::new();
    for n in [1u32, 2] {
        let len = n as usize; // (d-1) n with d = 2
        for mask in 0u64..(1 << len) {
            for mu in [1.0, 3.0] {
                for lambda in [0.0, 1.0] {
                    cells.push(ActivationRatioCell {
                        d: 2,
                        n,
                        pattern: bits_of(mask, len),
                        mu,
                        lambda,
                    });
                }
            }
        }
    }
    assert_eq!(cells.len(), 24);
    let fam = StreamFamily::new(0x1e44a, 0);
    let rows = verify_activation_ratio(&cells, 1_000_000, &fam).unwrap();
    let mut max_z = 0.0f64;
    for row in &rows {
        assert!(
            row.z.is_finite() && row.z.abs() <= 4.0,
            "cell {:?}: z = {} (pred {} est {})",
            row.cell,
            row.z,
            row.predicted_ratio,
            row.estimated_ratio
        );
        max_z = max_z.max(row.z.abs());
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 600.0, "took {elapsed:?}");
    println!(
        "ACCEPTANCE 08 activation-ratio grid: PASS (24 cells x 1e6 reps, max |z| = {max_z:.2}; {elapsed:?})"
    );
}

#[test]
fn criterion_09_lone_frog_returns() {
    let _guard = serial();
    let reps = 1_000_000u64;
    for (d, seed) in [(2u32, 0x10f0u64), (5, 0x10f5)] {
        let p = params(d, "delta:1", 0.0);
        let caps = TfmCaps::new(10_000, 30, 1_000_000).unwrap();
        let total: u64 = (0..reps)
            .into_par_iter()
            .map(|r| {
                let mut rng = RngStream::new(seed, r);
                simulate_tfm(&p, &caps, &mut rng).total_visits()
            })
            .sum();
        let mean = total as f64 / reps as f64;
        let expect = 1.0 / (d as f64 - 1.0);
        assert!(
            (mean - expect).abs() <= 0.01 * expect,
            "d={d}: mean {mean} vs {expect}"
        );
        println!(
            "ACCEPTANCE 09 lone-frog returns (d={d}): PASS (mean {mean:.5} vs {expect:.5}, 1e6 replicas)"
        );
    }
}

#[test]
fn criterion_10_coupling_dominance() {
    let _guard = serial();
    // Matched truncations on both sides: depth cap 16, 3000 ticks, stop at
    // 20 visits, same population guard.
    let reps = 2000u64;
    for (mu, seed) in [(5.0f64, 0xd0a0u64), (30.0, 0xd0a1)] {
        let p = params(2, "delta:2", mu);
        let tfm_caps = TfmCaps::new(3000, 20, 1_000_000)
            .unwrap()
            .with_visits_target(20);
        let full: Vec<f64> = (0..reps)
            .into_par_iter()
            .map(|r| {
                let mut rng = RngStream::new(seed, r);
                simulate_tfm(&p, &tfm_caps, &mut rng).total_visits().min(20) as f64
            })
            .collect();
        let (mean_v, se_v) = mean_stderr(&full);

        let ssfm_caps = SsfmCaps::new(20, 3000, 1_000_000)
            .unwrap()
            .with_visits_target(20);
        let restricted: Vec<f64> = (0..reps)
            .into_par_iter()
            .map(|r| {
                let mut rng = RngStream::new(seed ^ 0xffff, r);
                simulate_ssfm(&p, &ssfm_caps, &mut rng).v_prime.min(20) as f64
            })
            .collect();
        let (mean_vp, se_vp) = mean_stderr(&restricted);

        let sigma = (se_v * se_v + se_vp * se_vp).sqrt();
        assert!(
            mean_v >= mean_vp - 3.0 * sigma,
            "mu={mu}: E[min(V,20)] = {mean_v} below E[min(V',20)] = {mean_vp} - 3 sigma"
        );
        println!(
            "ACCEPTANCE 10 coupling dominance (mu={mu}): PASS (full {mean_v:.3} >= restricted {mean_vp:.3} - {:.3})",
            3.0 * sigma
        );
    }
}

#[test]
fn criterion_11_rde_monotonicity_and_fixed_point() {
    let _guard = serial();
    // (a) Capped means of the truncated recursion are nondecreasing in depth.
    let p = params(2, "delta:2", 30.0);
    let reps = 3000u64;
    let mut prev: (f64, f64) = (0.0, 0.0);
    for depth in 0..=5u32 {
        let xs: Vec<f64> = (0..reps)
            .into_par_iter()
            .map(|r| {
                let mut rng = RngStream::new(0x11de, depth as u64 * 100_000 + r);
                sample_rde(&p, depth, &mut rng).unwrap().min(10) as f64
            })
            .collect();
        let (m, se) = mean_stderr(&xs);
        let tol = 3.0 * (se * se + prev.1 * prev.1).sqrt();
        assert!(m >= prev.0 - tol, "depth {depth}: {m} < {} - {tol}", prev.0);
        prev = (m, se);
    }

    // (b) Fixed-point consistency at a fast-converging subcritical point:
    // one more operator application leaves the depth-8 law in place.
    //
    // The point must genuinely sit in the transient phase for the
    // truncation to have converged; mu = 0.5 does (verified below), whereas
    // at mu = 2 both this sampler and the independent agent simulation show
    // the restricted model is already recurrent (truncation means grow
    // without bound), so no depth-8 law can be operator-stationary there —
    // part (c) pins that observation.
    let p = params(2, "delta:1", 0.5);
    let pop = 100_000usize;

    // Subcriticality oracle: truncation increments must be decaying.
    let capped_mean = |mu: f64, depth: u32, reps: u64, base: u64| -> f64 {
        let pm = params(2, "delta:1", mu);
        let total: f64 = (0..reps)
            .into_par_iter()
            .map(|r| {
                let mut rng = RngStream::new(0x11dd, base + r);
                sample_rde(&pm, depth, &mut rng).unwrap() as f64
            })
            .sum();
        total / reps as f64
    };
    let inc_mid = capped_mean(0.5, 6, 20_000, 0) - capped_mean(0.5, 4, 20_000, 1 << 32);
    let inc_late = capped_mean(0.5, 10, 20_000, 2 << 32) - capped_mean(0.5, 8, 20_000, 3 << 32);
    assert!(
        inc_late < inc_mid && inc_late < 0.05,
        "mu=0.5 truncation not converging: increments {inc_mid} -> {inc_late}"
    );

    let fam = StreamFamily::new(0x11df, 0);
    let samples: Vec<u64> = (0..pop as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = fam.stream(r);
            sample_rde(&p, 8, &mut rng).unwrap()
        })
        .collect();
    let pi = EmpiricalDist::new(samples).unwrap();
    let mut rng = RngStream::new(0x11df, 1 << 40);
    let next = iterate_b(&pi, &p, pop, &mut rng).unwrap();
    let dist = pi.max_cdf_distance(&next, 20);
    let sigma = (2.0 * 0.25 / pop as f64).sqrt();
    let bound = 0.01 + 3.0 * sigma;
    assert!(dist <= bound, "CDF distance {dist} > {bound}");

    // (c) The recorded reason the consistency point is mu = 0.5: at mu = 2
    // the truncations keep growing by far more than the tolerance allows.
    let inc_mu2 = capped_mean(2.0, 10, 6_000, 4 << 32) - capped_mean(2.0, 8, 6_000, 5 << 32);
    assert!(
        inc_mu2 > 0.5,
        "mu=2 truncations stopped growing ({inc_mu2}); revisit the consistency point"
    );
    println!(
        "ACCEPTANCE 11 RDE monotonicity + fixed point: PASS (max CDF distance {dist:.4} <= {bound:.4} at mu=0.5; mu=2 diverges by {inc_mu2:.2}/2 levels)"
    );
}

#[test]
fn criterion_12_certificate_reproduction() {
    let _guard = serial();
    let start = Instant::now();
    let expect_mu = 3.0 * (1.0 + 2.0f64.ln());
    let mut values = Vec::new();
    for mode in [CertMode::Paper, CertMode::Exact] {
        let cert = certify(&CertifyConfig::new(2, tau("delta:1"), mode, 12)).unwrap();
        assert_eq!(cert.verdict, CertVerdict::Certified);
        let mu0 = cert.mu0.unwrap();
        let lambda0 = cert.lambda0.unwrap();
        assert!(
            (mu0 - expect_mu).abs() <= 1e-6 * expect_mu,
            "{mode:?}: mu0 {mu0} vs 3(1+ln 2) = {expect_mu}"
        );
        assert!(
            (lambda0 - mu0 / 3.0).abs() <= 1e-6 * (mu0 / 3.0),
            "{mode:?}: lambda0 {lambda0} vs mu0/3"
        );
        values.push(mu0);
    }
    assert!(
        (values[0] - values[1]).abs() <= 1e-9 * expect_mu,
        "modes disagree: {values:?}"
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}");
    println!(
        "ACCEPTANCE 12 certificate reproduction: PASS (mu0 = {:.9} ~ 3(1+ln 2), both modes; {elapsed:?})",
        values[0]
    );
}

#[test]
fn criterion_13_exact_certificate_delta2() {
    let _guard = serial();
    let start = Instant::now();
    let cert = certify(&CertifyConfig::new(2, tau("delta:2"), CertMode::Exact, 12)).unwrap();
    assert_eq!(cert.verdict, CertVerdict::CertifiedModuloHypothesis);
    let mu0 = cert.mu0.unwrap();
    let lambda0 = cert.lambda0.unwrap();
    assert!(mu0.is_finite() && mu0 > 0.0);
    assert!(cert.tail_hypothesis.is_some());

    // Recomputing with a finer head never worsens the recorded bound.
    let finer = f_bound(2, cert.alpha, CertMode::Exact, 16, lambda0, mu0).unwrap();
    assert!(finer.head + finer.tail <= (cert.head + cert.tail) * (1.0 + 1e-9));

    // End-to-end: the certified point passes the bootstrap estimate.
    let boot = estimate_bootstrap(
        2,
        &tau("delta:2"),
        PoissonMean::new(mu0).unwrap(),
        PoissonMean::new(lambda0).unwrap(),
        1_000_000,
        &StreamFamily::new(0xb007, 0),
    )
    .unwrap();
    assert!(
        matches!(
            boot.verdict,
            BootstrapVerdict::Pass | BootstrapVerdict::Inconclusive
        ),
        "bootstrap failed at the certificate: est {} threshold {}",
        boot.estimate,
        boot.threshold
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 600.0, "took {elapsed:?}");
    println!(
        "ACCEPTANCE 13 exact certificate (delta:2): PASS (mu0 = {mu0:.3}, lambda0 = {lambda0:.4}, bootstrap {}; {elapsed:?})",
        boot.verdict.as_str()
    );
}

#[test]
fn criterion_14_phase_transition_curve() {
    let _guard = serial();
    let start = Instant::now();
    let cert = certify(&CertifyConfig::new(2, tau("delta:2"), CertMode::Exact, 12)).unwrap();
    let mu0 = cert.mu0.unwrap();

    let grid = [0.25f64, 4.0, 6.0, 8.0, 12.0, 16.0];
    assert!(grid[grid.len() - 1] <= 2.0 * mu0, "grid exceeds 2 mu0");
    let caps = TfmCaps::new(10_000, 30, 4_000_000).unwrap();
    let reps = 400u64;
    let mut points = Vec::new();
    for (i, &mu) in grid.iter().enumerate() {
        let p = params(2, "delta:2", mu);
        let fam = StreamFamily::new(0x14a5e, (i as u64) << 34);
        let est = recurrence_proxy(&p, 50, &caps, reps, &fam);
        points.push((mu, est.estimate, est.std_error));
    }
    let first = points.first().unwrap();
    let last = points.last().unwrap();
    assert!(first.1 <= 0.05, "low end {} > 0.05 at mu = {}", first.1, first.0);
    assert!(last.1 >= 0.95, "high end {} < 0.95 at mu = {}", last.1, last.0);
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        let sigma = (a.2 * a.2 + b.2 * b.2).sqrt();
        assert!(
            b.1 >= a.1 - 4.0 * sigma,
            "proxy dropped from {} (mu={}) to {} (mu={}) beyond 4 sigma",
            a.1,
            a.0,
            b.1,
            b.0
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1200.0, "took {elapsed:?}");
    let curve: Vec<String> = points
        .iter()
        .map(|(mu, p, _)| format!("{mu}:{p:.3}"))
        .collect();
    println!(
        "ACCEPTANCE 14 phase transition: PASS (curve {}; mu0 = {mu0:.1}; {elapsed:?})",
        curve.join(" ")
    );
}

#[test]
fn criterion_15_cli_determinism() {
    let _guard = serial();
    let bin = env!("CARGO_BIN_EXE_frogbound");
    let dir = std::env::temp_dir().join("frogbound-acceptance");
    std::fs::create_dir_all(&dir).unwrap();
    let dir = dir.to_str().unwrap().to_string();

    let run = |args: &[String]| {
        let out = std::process::Command::new(bin)
            .args(args)
            .output()
            .expect("spawn frogbound");
        assert!(
            out.status.success(),
            "frogbound {args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    };
    let strip_wall_clock = |path: &str| -> String {
        std::fs::read_to_string(path)
            .unwrap()
            .lines()
            .filter(|l| !l.contains("wall_clock_seconds"))
            .collect::<Vec<_>>()
            .join("\n")
    };

    let grid_path = format!("{dir}/grid.json");
    std::fs::write(
        &grid_path,
        "[{\"d\":2,\"n\":1,\"a\":\"0\",\"mu\":3.0,\"lambda\":0.0}]",
    )
    .unwrap();

    let cases: Vec<(&str, Vec<String>)> = vec![
        (
            "simulate-tfm",
            "simulate-tfm --d 2 --tau delta:1 --mu 1.0 --horizon 300 --depth-cap 12 --reps 400 --seed 7"
                .split(' ')
                .map(String::from)
                .collect(),
        ),
        (
            "simulate-ssfm",
            "simulate-ssfm --d 2 --tau delta:2 --mu 4.0 --depth-cap 12 --step-cap 400 --population-cap 50000 --reps 300 --seed 7"
                .split(' ')
                .map(String::from)
                .collect(),
        ),
        (
            "rde",
            "rde --d 2 --tau delta:1 --mu 2.0 --depth 2 --pop 2000 --generations 2 --seed 7"
                .split(' ')
                .map(String::from)
                .collect(),
        ),
        (
            "operator",
            "operator --d 2 --tau delta:2 --mu 3.0 --lambda 1.0 --reps 2000 --seed 7"
                .split(' ')
                .map(String::from)
                .collect(),
        ),
        (
            "certify",
            "certify --d 2 --tau delta:2 --mode exact --K 8"
                .split(' ')
                .map(String::from)
                .collect(),
        ),
        (
            "verify-claims",
            "verify --claims hc,hb,hexpand,constant1 --d 2 --n-max 4 --lambdas 0.5,1.0"
                .split(' ')
                .map(String::from)
                .collect(),
        ),
        (
            "verify-lemmaA",
            format!("verify --claims lemmaA --grid {grid_path} --reps 20000 --seed 7")
                .split(' ')
                .map(String::from)
                .collect(),
        ),
        (
            "estimate-mu-c",
            "estimate-mu-c --d 2 --tau delta:1 --m 10 --horizon 300 --depth-cap 10 --population-cap 100000 --reps 60 --refinements 4 --mu-max 16 --seed 7"
                .split(' ')
                .map(String::from)
                .collect(),
        ),
    ];

    for (name, base_args) in &cases {
        let out_a = format!("{dir}/{name}-a.dat");
        let out_b = format!("{dir}/{name}-b.dat");
        let mut args_a = base_args.clone();
        args_a.extend(["--out".to_string(), out_a.clone()]);
        let mut args_b = base_args.clone();
        args_b.extend(["--out".to_string(), out_b.clone()]);
        run(&args_a);
        run(&args_b);
        let bytes_a = std::fs::read(&out_a).unwrap();
        let bytes_b = std::fs::read(&out_b).unwrap();
        assert_eq!(bytes_a, bytes_b, "{name}: data files differ between runs");
        // Manifests agree except for the wall clock.
        let ma = strip_wall_clock(&format!("{out_a}.manifest.json"));
        let mb = strip_wall_clock(&format!("{out_b}.manifest.json"));
        let ma = ma.replace(&out_a, "OUT");
        let mb = mb.replace(&out_b, "OUT");
        assert_eq!(ma, mb, "{name}: manifests differ beyond wall clock");

        // Manifest-driven replay reproduces the data bytes too.
        let out_c = format!("{dir}/{name}-c.dat");
        run(&[
            "replay".to_string(),
            "--manifest".to_string(),
            format!("{out_a}.manifest.json"),
            "--out".to_string(),
            out_c.clone(),
        ]);
        let bytes_c = std::fs::read(&out_c).unwrap();
        assert_eq!(bytes_a, bytes_c, "{name}: replay differs from original");
    }
    println!(
        "ACCEPTANCE 15 determinism: PASS ({} subcommands byte-identical under re-run and replay)",
        cases.len()
    );
}
