//! Cross-implementation oracles: the agent-based self-similar simulator and
//! the gadget-driven recursive-equation sampler must agree on capped means,
//! and the critical-density bracket search must respect the threshold
//! ordering.

use frogbound::dist::PoissonMean;
use frogbound::rde::sample_rde;
use frogbound::rng::{RngStream, StreamFamily};
use frogbound::ssfm::{simulate_ssfm, SsfmCaps};
use frogbound::stats::mean_stderr;
use frogbound::threshold::ThresholdSpec;
use frogbound::tree::{estimate_mu_c, BracketSearchConfig, ModelParams, MuBracket, ProxyConfig};
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
fn ssfm_and_rde_capped_means_agree() {
    // Same law, two very different samplers: the direct agent simulation of
    // the restricted model and the recursive gadget sampler at a truncation
    // deep enough to saturate the capped mean.
    let p = params(2, "delta:1", 20.0);
    let reps = 3000u64;

    let caps = SsfmCaps::new(30, 4000, 2_000_000)
        .unwrap()
        .with_visits_target(10);
    let ssfm: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = RngStream::new(0xc0_55, r);
            simulate_ssfm(&p, &caps, &mut rng).v_prime.min(10) as f64
        })
        .collect();
    let (m_ssfm, se_ssfm) = mean_stderr(&ssfm);

    let rde: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = RngStream::new(0xc0_56, r);
            sample_rde(&p, 10, &mut rng).unwrap().min(10) as f64
        })
        .collect();
    let (m_rde, se_rde) = mean_stderr(&rde);

    let se = (se_ssfm * se_ssfm + se_rde * se_rde).sqrt().max(1e-9);
    assert!(
        (m_ssfm - m_rde).abs() <= 3.0 * se,
        "ssfm {m_ssfm} +/- {se_ssfm} vs rde {m_rde} +/- {se_rde}"
    );
}

#[test]
fn mu_c_brackets_respect_threshold_order() {
    // Raising the threshold law cannot lower the bracket: the delta:2 lower
    // edge must sit at or above the delta:1 lower edge. Recorded as a
    // regression with fixed seeds.
    let proxy = ProxyConfig {
        m: 20,
        horizon: 1500,
        depth_cap: 14,
        population_cap: 150_000,
        reps: 200,
    };
    let search = BracketSearchConfig {
        mu_min: 0.0,
        mu_max: 64.0,
        p_lo: 0.05,
        p_hi: 0.95,
        refinements: 12,
    };
    let run = |tau: &str, base: u64| -> (f64, f64) {
        let fam = StreamFamily::new(0xbead, base);
        match estimate_mu_c(2, &ThresholdSpec::parse(tau).unwrap(), &proxy, &search, &fam).unwrap()
        {
            MuBracket::Found {
                mu_lo,
                mu_hi,
                proxy_lo,
                proxy_hi,
                ..
            } => {
                assert!(proxy_lo <= search.p_lo && proxy_hi >= search.p_hi);
                (mu_lo, mu_hi)
            }
            MuBracket::NoBracket { curve } => {
                panic!("no bracket for {tau}: curve {curve:?}")
            }
        }
    };
    let (lo1, hi1) = run("delta:1", 0);
    let (lo2, hi2) = run("delta:2", 1 << 32);
    assert!(lo1 > 0.0, "delta:1 lower edge must be positive, got {lo1}");
    assert!(lo1 < hi1 && lo2 < hi2);
    assert!(
        lo2 >= lo1,
        "delta:2 bracket starts at {lo2}, below delta:1 at {lo1}"
    );
}
