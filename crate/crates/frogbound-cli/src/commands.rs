//! Subcommand implementations: resolve a config, compute, write the data
//! file and its manifest, print a one-line summary.

use crate::manifest::{ff, json_opt_num, json_opt_str, json_str, open_out, write_manifest, write_text};
use frogbound::certifier::{
    certify, enumerate_claims, CertMode, CertVerdict, CertifyConfig, ClaimId,
};
use frogbound::dist::PoissonMean;
use frogbound::gadget::{
    sample_operator, verify_activation_ratio, ActivationRatioCell, SpineLength,
};
use frogbound::rde::{iterate_b, sample_rde, theta_from_realization, EmpiricalDist};
use frogbound::rng::{RngStream, StreamFamily};
use frogbound::ssfm::{alpha, simulate_ssfm, SsfmCaps};
use frogbound::stats::mean_stderr;
use frogbound::threshold::ThresholdSpec;
use frogbound::tree::{
    estimate_mu_c, simulate_tfm, BracketSearchConfig, ModelParams, MuBracket, ProxyConfig, TfmCaps,
};
use rayon::prelude::*;
use serde::Deserialize;
use std::io::Write;
use std::time::Instant;

/// Default root seed, echoed into every manifest.
pub const DEFAULT_SEED: u64 = 0x66726f67; // "frog"

/// Errors mapped to process exit codes: config -> 2, runtime -> 3.
#[derive(Debug)]
pub enum AppError {
    Config(String),
    Runtime(String),
}

impl std::fmt::Display for AppError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AppError::Config(m) => write!(f, "{m}"),
            AppError::Runtime(m) => write!(f, "{m}"),
        }
    }
}

impl From<frogbound::Error> for AppError {
    fn from(e: frogbound::Error) -> Self {
        match e {
            frogbound::Error::Soundness(_) => AppError::Runtime(e.to_string()),
            _ => AppError::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        AppError::Runtime(e.to_string())
    }
}

pub type CmdResult = Result<(), AppError>;

fn parse_tau(s: &str) -> Result<ThresholdSpec, AppError> {
    Ok(ThresholdSpec::parse(s)?)
}

fn caps_flags(depth: bool, population: bool, truncated: bool) -> String {
    let mut parts = Vec::new();
    if depth {
        parts.push("depth");
    }
    if population {
        parts.push("population");
    }
    if truncated {
        parts.push("truncated");
    }
    if parts.is_empty() {
        "-".to_string()
    } else {
        parts.join("|")
    }
}

// ---------------------------------------------------------------- simulate-tfm

#[derive(Clone, Debug, Deserialize)]
pub struct TfmConfig {
    pub d: u32,
    pub tau: String,
    pub mu: f64,
    pub horizon: u32,
    pub depth_cap: u32,
    pub population_cap: u64,
    pub reps: u64,
    pub seed: u64,
    pub out: String,
}

impl TfmConfig {
    fn config_json(&self) -> String {
        format!(
            "{{\"d\": {}, \"tau\": {}, \"mu\": {}, \"horizon\": {}, \"depth_cap\": {}, \"population_cap\": {}, \"reps\": {}, \"seed\": {}, \"out\": {}}}",
            self.d,
            json_str(&self.tau),
            ff(self.mu),
            self.horizon,
            self.depth_cap,
            self.population_cap,
            self.reps,
            self.seed,
            json_str(&self.out)
        )
    }
}

pub fn run_tfm(cfg: &TfmConfig) -> CmdResult {
    let started = Instant::now();
    let params = ModelParams::new(cfg.d, parse_tau(&cfg.tau)?, PoissonMean::new(cfg.mu)?)?;
    let caps = TfmCaps::new(cfg.horizon, cfg.depth_cap, cfg.population_cap)?;

    let mut w = open_out(&cfg.out)?;
    writeln!(w, "replica,t,arrivals,cumulative_visits,caps_hit")?;
    let mut totals = Vec::with_capacity(cfg.reps as usize);

    const CHUNK: u64 = 4096;
    let mut replica = 0u64;
    while replica < cfg.reps {
        let hi = (replica + CHUNK).min(cfg.reps);
        let chunk: Vec<_> = (replica..hi)
            .into_par_iter()
            .map(|r| {
                let mut rng = RngStream::new(cfg.seed, r);
                (r, simulate_tfm(&params, &caps, &mut rng))
            })
            .collect();
        for (r, traj) in chunk {
            let last = traj.ticks_run();
            for (i, (&arr, &cum)) in traj.arrivals.iter().zip(&traj.cumulative).enumerate() {
                let t = i + 1;
                let is_last = t == last;
                if arr > 0 || is_last {
                    let flags = if is_last {
                        caps_flags(
                            traj.caps_hit.depth,
                            traj.caps_hit.population,
                            traj.caps_hit.truncated,
                        )
                    } else {
                        "-".to_string()
                    };
                    writeln!(w, "{r},{t},{arr},{cum},{flags}")?;
                }
            }
            if last == 0 {
                // Horizon 0 cannot happen (validated >= 1), kept for safety.
                writeln!(w, "{r},0,0,0,-")?;
            }
            totals.push(traj.total_visits() as f64);
        }
        replica = hi;
    }
    w.flush()?;

    let (mean, se) = mean_stderr(&totals);
    write_manifest(
        &cfg.out,
        "simulate-tfm",
        &cfg.config_json(),
        cfg.seed,
        started.elapsed().as_secs_f64(),
    )?;
    println!(
        "simulate-tfm: {} replicas, mean cumulative visits {mean:.6} +/- {se:.6} -> {}",
        cfg.reps, cfg.out
    );
    Ok(())
}

// --------------------------------------------------------------- simulate-ssfm

#[derive(Clone, Debug, Deserialize)]
pub struct SsfmConfig {
    pub d: u32,
    pub tau: String,
    pub mu: f64,
    pub depth_cap: u32,
    pub step_cap: u32,
    pub population_cap: u64,
    pub reps: u64,
    pub seed: u64,
    pub out: String,
}

impl SsfmConfig {
    fn config_json(&self) -> String {
        format!(
            "{{\"d\": {}, \"tau\": {}, \"mu\": {}, \"depth_cap\": {}, \"step_cap\": {}, \"population_cap\": {}, \"reps\": {}, \"seed\": {}, \"out\": {}}}",
            self.d,
            json_str(&self.tau),
            ff(self.mu),
            self.depth_cap,
            self.step_cap,
            self.population_cap,
            self.reps,
            self.seed,
            json_str(&self.out)
        )
    }
}

pub fn run_ssfm(cfg: &SsfmConfig) -> CmdResult {
    let started = Instant::now();
    let params = ModelParams::new(cfg.d, parse_tau(&cfg.tau)?, PoissonMean::new(cfg.mu)?)?;
    let caps = SsfmCaps::new(cfg.depth_cap, cfg.step_cap, cfg.population_cap)?;

    let mut w = open_out(&cfg.out)?;
    writeln!(w, "replica,v_prime,ticks,caps_hit")?;
    let mut totals = Vec::with_capacity(cfg.reps as usize);
    const CHUNK: u64 = 4096;
    let mut replica = 0u64;
    while replica < cfg.reps {
        let hi = (replica + CHUNK).min(cfg.reps);
        let chunk: Vec<_> = (replica..hi)
            .into_par_iter()
            .map(|r| {
                let mut rng = RngStream::new(cfg.seed, r);
                (r, simulate_ssfm(&params, &caps, &mut rng))
            })
            .collect();
        for (r, s) in chunk {
            let mut flags = Vec::new();
            if s.caps_hit.depth {
                flags.push("depth");
            }
            if s.caps_hit.population {
                flags.push("population");
            }
            if s.caps_hit.step {
                flags.push("step");
            }
            let flags = if flags.is_empty() {
                "-".to_string()
            } else {
                flags.join("|")
            };
            writeln!(w, "{r},{},{},{flags}", s.v_prime, s.ticks)?;
            totals.push(s.v_prime as f64);
        }
        replica = hi;
    }
    w.flush()?;

    let (mean, se) = mean_stderr(&totals);
    write_manifest(
        &cfg.out,
        "simulate-ssfm",
        &cfg.config_json(),
        cfg.seed,
        started.elapsed().as_secs_f64(),
    )?;
    println!(
        "simulate-ssfm: {} replicas, mean root visits {mean:.6} +/- {se:.6} -> {}",
        cfg.reps, cfg.out
    );
    Ok(())
}

// ------------------------------------------------------------------------ rde

#[derive(Clone, Debug, Deserialize)]
pub struct RdeConfig {
    pub d: u32,
    pub tau: String,
    pub mu: f64,
    pub depth: u32,
    pub pop: usize,
    pub generations: u32,
    pub seed: u64,
    pub out: String,
}

impl RdeConfig {
    fn config_json(&self) -> String {
        format!(
            "{{\"d\": {}, \"tau\": {}, \"mu\": {}, \"depth\": {}, \"pop\": {}, \"generations\": {}, \"seed\": {}, \"out\": {}}}",
            self.d,
            json_str(&self.tau),
            ff(self.mu),
            self.depth,
            self.pop,
            self.generations,
            self.seed,
            json_str(&self.out)
        )
    }
}

fn rde_row(w: &mut impl Write, generation: u32, dist: &EmpiricalDist) -> std::io::Result<()> {
    let mut cdfs = Vec::with_capacity(21);
    for k in 0..=20u64 {
        cdfs.push(ff(dist.cdf(k)));
    }
    writeln!(
        w,
        "{generation},{},{},{}",
        ff(dist.mean()),
        ff(dist.variance()),
        cdfs.join(",")
    )
}

pub fn run_rde(cfg: &RdeConfig) -> CmdResult {
    let started = Instant::now();
    let params = ModelParams::new(cfg.d, parse_tau(&cfg.tau)?, PoissonMean::new(cfg.mu)?)?;
    if cfg.pop < 1000 {
        return Err(AppError::Config(format!(
            "population must be >= 1000, got {}",
            cfg.pop
        )));
    }

    // Generation 0: direct samples of the depth-truncated equation
    // (depth 0 gives the all-zero starting law).
    let fam = StreamFamily::new(cfg.seed, 0);
    let init: Vec<u64> = (0..cfg.pop as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = fam.stream(r);
            sample_rde(&params, cfg.depth, &mut rng).expect("validated parameters")
        })
        .collect();
    let mut dist = EmpiricalDist::new(init)?;

    let mut w = open_out(&cfg.out)?;
    let header: Vec<String> = (0..=20).map(|k| format!("cdf_{k}")).collect();
    writeln!(w, "generation,mean,variance,{}", header.join(","))?;
    rde_row(&mut w, 0, &dist)?;
    for gen in 1..=cfg.generations {
        let mut rng = RngStream::new(cfg.seed, (1 << 40) + gen as u64);
        dist = iterate_b(&dist, &params, cfg.pop, &mut rng)?;
        rde_row(&mut w, gen, &dist)?;
    }
    w.flush()?;

    write_manifest(
        &cfg.out,
        "rde",
        &cfg.config_json(),
        cfg.seed,
        started.elapsed().as_secs_f64(),
    )?;
    println!(
        "rde: depth {} start, {} generations of population {} -> {}",
        cfg.depth, cfg.generations, cfg.pop, cfg.out
    );
    Ok(())
}

// ------------------------------------------------------------------- operator

#[derive(Clone, Debug, Deserialize)]
pub struct OperatorConfig {
    pub d: u32,
    pub tau: Option<String>,
    pub n: Option<u32>,
    pub mu: f64,
    pub lambda: f64,
    pub reps: u64,
    pub seed: u64,
    pub out: String,
}

impl OperatorConfig {
    fn config_json(&self) -> String {
        format!(
            "{{\"d\": {}, \"tau\": {}, \"n\": {}, \"mu\": {}, \"lambda\": {}, \"reps\": {}, \"seed\": {}, \"out\": {}}}",
            self.d,
            json_opt_str(&self.tau),
            self.n.map(|v| v.to_string()).unwrap_or("null".into()),
            ff(self.mu),
            ff(self.lambda),
            self.reps,
            self.seed,
            json_str(&self.out)
        )
    }
}

pub fn run_operator(cfg: &OperatorConfig) -> CmdResult {
    let started = Instant::now();
    let length = match (cfg.n, &cfg.tau) {
        (Some(n), _) => SpineLength::Fixed(n),
        (None, Some(tau)) => SpineLength::Geometric(alpha(&parse_tau(tau)?, cfg.d)?),
        (None, None) => {
            return Err(AppError::Config(
                "operator needs either --n or --tau (for the spine-length law)".into(),
            ))
        }
    };
    let mu = PoissonMean::new(cfg.mu)?;
    let lambda = PoissonMean::new(cfg.lambda)?;

    let rows: Vec<String> = (0..cfg.reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = RngStream::new(cfg.seed, r);
            let sys = sample_operator(
                cfg.d,
                length,
                mu,
                |rng| frogbound::dist::sample_poisson(lambda, rng),
                &mut rng,
            )
            .expect("validated parameters");
            let theta =
                theta_from_realization(cfg.d, cfg.mu, cfg.lambda, sys.n, &sys.activation);
            format!(
                "{r},{},{},{},{},{},{}",
                sys.n,
                sys.count_at_v,
                sys.count_at_vprime,
                sys.root_halts,
                sys.activated_count(),
                ff(theta)
            )
        })
        .collect();

    let mut w = open_out(&cfg.out)?;
    writeln!(
        w,
        "replica,n,count_at_v,count_at_vprime,root_halts,activated_count,theta"
    )?;
    for row in rows {
        writeln!(w, "{row}")?;
    }
    w.flush()?;

    write_manifest(
        &cfg.out,
        "operator",
        &cfg.config_json(),
        cfg.seed,
        started.elapsed().as_secs_f64(),
    )?;
    println!("operator: {} gadgets -> {}", cfg.reps, cfg.out);
    Ok(())
}

// -------------------------------------------------------------------- certify

#[derive(Clone, Debug, Deserialize)]
pub struct CertifyCmdConfig {
    pub d: u32,
    pub tau: String,
    pub mode: String,
    pub k: u32,
    pub lambdas: Vec<f64>,
    pub mu_max: f64,
    pub out: String,
}

impl CertifyCmdConfig {
    fn config_json(&self) -> String {
        let ls: Vec<String> = self.lambdas.iter().map(|&l| ff(l)).collect();
        format!(
            "{{\"d\": {}, \"tau\": {}, \"mode\": {}, \"k\": {}, \"lambdas\": [{}], \"mu_max\": {}, \"out\": {}}}",
            self.d,
            json_str(&self.tau),
            json_str(&self.mode),
            self.k,
            ls.join(", "),
            ff(self.mu_max),
            json_str(&self.out)
        )
    }
}

pub fn run_certify(cfg: &CertifyCmdConfig) -> CmdResult {
    let started = Instant::now();
    let mut search = CertifyConfig::new(
        cfg.d,
        parse_tau(&cfg.tau)?,
        CertMode::parse(&cfg.mode)?,
        cfg.k,
    );
    search.lambda_grid = cfg.lambdas.clone();
    search.mu_max = cfg.mu_max;
    let cert = certify(&search)?;

    let body = format!(
        "{{\n  \"d\": {},\n  \"tau\": {},\n  \"alpha\": {},\n  \"mode\": {},\n  \"lambda0\": {},\n  \"mu0\": {},\n  \"K\": {},\n  \"head\": {},\n  \"tail\": {},\n  \"tail_hypothesis\": {},\n  \"claims_digest\": {},\n  \"verdict\": {}\n}}\n",
        cert.d,
        json_str(&cert.tau),
        ff(cert.alpha),
        json_str(cert.mode.as_str()),
        json_opt_num(cert.lambda0),
        json_opt_num(cert.mu0),
        cert.k,
        ff(cert.head),
        ff(cert.tail),
        json_opt_str(&cert.tail_hypothesis),
        json_str(&cert.claims_digest),
        json_str(cert.verdict.as_str()),
    );
    write_text(&cfg.out, &body)?;
    write_manifest(
        &cfg.out,
        "certify",
        &cfg.config_json(),
        DEFAULT_SEED,
        started.elapsed().as_secs_f64(),
    )?;

    match cert.verdict {
        CertVerdict::NotFound => {
            println!(
                "certify: not-found within mu <= {} ({} F-surface points evaluated) -> {}",
                ff(cfg.mu_max),
                cert.f_surface.len(),
                cfg.out
            );
            for p in cert.f_surface.iter().take(12) {
                println!("  F(mu={}, lambda0={}) = {}", ff(p.mu), ff(p.lambda0), ff(p.f_value));
            }
        }
        _ => println!(
            "certify: {} with mu0 = {}, lambda0 = {} -> {}",
            cert.verdict.as_str(),
            json_opt_num(cert.mu0),
            json_opt_num(cert.lambda0),
            cfg.out
        ),
    }
    Ok(())
}

// --------------------------------------------------------------------- verify

#[derive(Clone, Debug, Deserialize)]
pub struct VerifyConfig {
    pub claims: String,
    pub d: u32,
    pub n_max: u32,
    pub lambdas: Vec<f64>,
    pub grid: Option<String>,
    pub reps: u64,
    pub seed: u64,
    pub out: String,
}

impl VerifyConfig {
    fn config_json(&self) -> String {
        let ls: Vec<String> = self.lambdas.iter().map(|&l| ff(l)).collect();
        format!(
            "{{\"claims\": {}, \"d\": {}, \"n_max\": {}, \"lambdas\": [{}], \"grid\": {}, \"reps\": {}, \"seed\": {}, \"out\": {}}}",
            json_str(&self.claims),
            self.d,
            self.n_max,
            ls.join(", "),
            json_opt_str(&self.grid),
            self.reps,
            self.seed,
            json_str(&self.out)
        )
    }
}

#[derive(Debug, Deserialize)]
struct GridCell {
    d: u32,
    n: u32,
    a: String,
    mu: f64,
    lambda: f64,
}

fn parse_pattern(s: &str) -> Result<Vec<bool>, AppError> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(AppError::Config(format!(
                "pattern must be 0/1 characters, found `{other}`"
            ))),
        })
        .collect()
}

fn pattern_string(a: &[bool]) -> String {
    a.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

pub fn run_verify(cfg: &VerifyConfig) -> CmdResult {
    let started = Instant::now();
    if cfg.claims == "lemmaA" {
        let grid_path = cfg.grid.as_ref().ok_or_else(|| {
            AppError::Config("--claims lemmaA requires --grid FILE".into())
        })?;
        let raw = std::fs::read_to_string(grid_path)
            .map_err(|e| AppError::Config(format!("cannot read grid {grid_path}: {e}")))?;
        let cells_in: Vec<GridCell> = serde_json::from_str(&raw)
            .map_err(|e| AppError::Config(format!("bad grid JSON: {e}")))?;
        let mut cells = Vec::with_capacity(cells_in.len());
        for c in &cells_in {
            cells.push(ActivationRatioCell {
                d: c.d,
                n: c.n,
                pattern: parse_pattern(&c.a)?,
                mu: c.mu,
                lambda: c.lambda,
            });
        }
        let fam = StreamFamily::new(cfg.seed, 0);
        let rows = verify_activation_ratio(&cells, cfg.reps, &fam)?;
        let mut max_abs_z = 0.0f64;
        let mut parts = Vec::with_capacity(rows.len());
        for row in &rows {
            if row.z.is_finite() {
                max_abs_z = max_abs_z.max(row.z.abs());
            }
            parts.push(format!(
                "    {{\"d\": {}, \"n\": {}, \"a\": {}, \"mu\": {}, \"lambda\": {}, \"predicted_ratio\": {}, \"estimated_ratio\": {}, \"z\": {}, \"p_full\": {}, \"p_variant\": {}}}",
                row.cell.d,
                row.cell.n,
                json_str(&pattern_string(&row.cell.pattern)),
                ff(row.cell.mu),
                ff(row.cell.lambda),
                ff(row.predicted_ratio),
                ff(row.estimated_ratio),
                ff(row.z),
                ff(row.p_full),
                ff(row.p_variant),
            ));
        }
        let body = format!(
            "{{\n  \"claims\": \"lemmaA\",\n  \"reps\": {},\n  \"max_abs_z\": {},\n  \"rows\": [\n{}\n  ]\n}}\n",
            cfg.reps,
            ff(max_abs_z),
            parts.join(",\n")
        );
        write_text(&cfg.out, &body)?;
        write_manifest(
            &cfg.out,
            "verify",
            &cfg.config_json(),
            cfg.seed,
            started.elapsed().as_secs_f64(),
        )?;
        println!(
            "verify lemmaA: {} cells, max |z| = {max_abs_z:.3} -> {}",
            rows.len(),
            cfg.out
        );
        return Ok(());
    }

    let mut wanted = Vec::new();
    for part in cfg.claims.split(',') {
        wanted.push(ClaimId::parse(part.trim())?);
    }
    let report = enumerate_claims(cfg.d, cfg.n_max, &cfg.lambdas)?;
    let mut parts = Vec::new();
    let mut violated = 0usize;
    for cell in &report.cells {
        if !wanted.contains(&cell.claim) {
            continue;
        }
        if cell.verdict == frogbound::certifier::ClaimVerdict::Violated {
            violated += 1;
        }
        let witnesses: Vec<String> = cell.witnesses.iter().map(|s| json_str(s)).collect();
        parts.push(format!(
            "    {{\"claim\": {}, \"d\": {}, \"n\": {}, \"lambda\": {}, \"verdict\": {}, \"margin\": {}, \"witnesses\": [{}], \"detail\": {}}}",
            json_str(cell.claim.as_str()),
            cell.d,
            cell.n,
            json_opt_num(cell.lambda),
            json_str(cell.verdict.as_str()),
            ff(cell.margin),
            witnesses.join(", "),
            json_str(&cell.detail),
        ));
    }
    let body = format!(
        "{{\n  \"claims\": {},\n  \"d\": {},\n  \"n_max\": {},\n  \"cells\": [\n{}\n  ]\n}}\n",
        json_str(&cfg.claims),
        cfg.d,
        cfg.n_max,
        parts.join(",\n")
    );
    write_text(&cfg.out, &body)?;
    write_manifest(
        &cfg.out,
        "verify",
        &cfg.config_json(),
        cfg.seed,
        started.elapsed().as_secs_f64(),
    )?;
    println!(
        "verify {}: {} cells, {violated} violated -> {}",
        cfg.claims,
        parts.len(),
        cfg.out
    );
    Ok(())
}

// -------------------------------------------------------------- estimate-mu-c

#[derive(Clone, Debug, Deserialize)]
pub struct MuCConfig {
    pub d: u32,
    pub tau: String,
    pub m: u64,
    pub horizon: u32,
    pub depth_cap: u32,
    pub population_cap: u64,
    pub reps: u64,
    pub p_lo: f64,
    pub p_hi: f64,
    pub mu_min: f64,
    pub mu_max: f64,
    pub refinements: u32,
    pub seed: u64,
    pub out: String,
}

impl MuCConfig {
    fn config_json(&self) -> String {
        format!(
            "{{\"d\": {}, \"tau\": {}, \"m\": {}, \"horizon\": {}, \"depth_cap\": {}, \"population_cap\": {}, \"reps\": {}, \"p_lo\": {}, \"p_hi\": {}, \"mu_min\": {}, \"mu_max\": {}, \"refinements\": {}, \"seed\": {}, \"out\": {}}}",
            self.d,
            json_str(&self.tau),
            self.m,
            self.horizon,
            self.depth_cap,
            self.population_cap,
            self.reps,
            ff(self.p_lo),
            ff(self.p_hi),
            ff(self.mu_min),
            ff(self.mu_max),
            self.refinements,
            self.seed,
            json_str(&self.out)
        )
    }
}

pub fn run_mu_c(cfg: &MuCConfig) -> CmdResult {
    let started = Instant::now();
    let tau = parse_tau(&cfg.tau)?;
    let proxy = ProxyConfig {
        m: cfg.m,
        horizon: cfg.horizon,
        depth_cap: cfg.depth_cap,
        population_cap: cfg.population_cap,
        reps: cfg.reps,
    };
    let search = BracketSearchConfig {
        mu_min: cfg.mu_min,
        mu_max: cfg.mu_max,
        p_lo: cfg.p_lo,
        p_hi: cfg.p_hi,
        refinements: cfg.refinements,
    };
    let fam = StreamFamily::new(cfg.seed, 0);
    let bracket = estimate_mu_c(cfg.d, &tau, &proxy, &search, &fam)?;

    let curve_json = |curve: &[frogbound::tree::ProxyPoint]| -> String {
        curve
            .iter()
            .map(|p| {
                format!(
                    "    {{\"mu\": {}, \"estimate\": {}, \"std_error\": {}}}",
                    ff(p.mu),
                    ff(p.estimate),
                    ff(p.std_error)
                )
            })
            .collect::<Vec<_>>()
            .join(",\n")
    };

    let (body, summary) = match &bracket {
        MuBracket::Found {
            mu_lo,
            mu_hi,
            proxy_lo,
            proxy_hi,
            curve,
        } => (
            format!(
                "{{\n  \"found\": true,\n  \"mu_lo\": {},\n  \"mu_hi\": {},\n  \"proxy_lo\": {},\n  \"proxy_hi\": {},\n  \"curve\": [\n{}\n  ]\n}}\n",
                ff(*mu_lo),
                ff(*mu_hi),
                ff(*proxy_lo),
                ff(*proxy_hi),
                curve_json(curve)
            ),
            format!("bracket [{}, {}]", ff(*mu_lo), ff(*mu_hi)),
        ),
        MuBracket::NoBracket { curve } => (
            format!(
                "{{\n  \"found\": false,\n  \"mu_lo\": null,\n  \"mu_hi\": null,\n  \"proxy_lo\": null,\n  \"proxy_hi\": null,\n  \"curve\": [\n{}\n  ]\n}}\n",
                curve_json(curve)
            ),
            "no bracket in range".to_string(),
        ),
    };
    write_text(&cfg.out, &body)?;
    write_manifest(
        &cfg.out,
        "estimate-mu-c",
        &cfg.config_json(),
        cfg.seed,
        started.elapsed().as_secs_f64(),
    )?;
    println!("estimate-mu-c: {summary} -> {}", cfg.out);
    Ok(())
}

// --------------------------------------------------------------------- replay

pub fn run_replay(manifest_path: &str, out_override: Option<String>) -> CmdResult {
    let raw = std::fs::read_to_string(manifest_path)
        .map_err(|e| AppError::Config(format!("cannot read manifest {manifest_path}: {e}")))?;
    let value: serde_json::Value = serde_json::from_str(&raw)
        .map_err(|e| AppError::Config(format!("bad manifest JSON: {e}")))?;
    let command = value
        .get("command")
        .and_then(|v| v.as_str())
        .ok_or_else(|| AppError::Config("manifest missing `command`".into()))?
        .to_string();
    let config = value
        .get("config")
        .cloned()
        .ok_or_else(|| AppError::Config("manifest missing `config`".into()))?;

    macro_rules! replay_as {
        ($ty:ty, $runner:ident) => {{
            let mut cfg: $ty = serde_json::from_value(config)
                .map_err(|e| AppError::Config(format!("bad `{command}` config: {e}")))?;
            if let Some(out) = out_override {
                cfg.out = out;
            }
            $runner(&cfg)
        }};
    }
    match command.as_str() {
        "simulate-tfm" => replay_as!(TfmConfig, run_tfm),
        "simulate-ssfm" => replay_as!(SsfmConfig, run_ssfm),
        "rde" => replay_as!(RdeConfig, run_rde),
        "operator" => replay_as!(OperatorConfig, run_operator),
        "certify" => replay_as!(CertifyCmdConfig, run_certify),
        "verify" => replay_as!(VerifyConfig, run_verify),
        "estimate-mu-c" => replay_as!(MuCConfig, run_mu_c),
        other => Err(AppError::Config(format!("unknown command `{other}` in manifest"))),
    }
}
