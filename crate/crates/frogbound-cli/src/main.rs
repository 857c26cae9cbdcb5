//! `frogbound`: simulate threshold frog models on d-ary trees, iterate the
//! spine operator, and certify explicit recurrence bounds.

mod commands;
mod manifest;

use clap::{Args, Parser, Subcommand};
use commands::*;

#[derive(Parser)]
#[command(
    name = "frogbound",
    version,
    about = "Threshold frog models on d-ary trees: simulation, operator iteration, and recurrence certificates"
)]
struct Cli {
    /// Worker threads for replica-parallel commands (0 = all cores).
    /// Results are independent of this setting.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the full threshold frog model and record root-visit
    /// trajectories.
    SimulateTfm(TfmArgs),
    /// Simulate the self-similar restriction (lazy non-backtracking walks,
    /// kill at root, only-one rule).
    SimulateSsfm(SsfmArgs),
    /// Run population dynamics for the spine operator, starting from a
    /// depth-truncated direct sample of the recursive equation.
    Rde(RdeArgs),
    /// Sample spine gadgets and report root halts, activation counts, and
    /// the bootstrap exponent.
    Operator(OperatorArgs),
    /// Search for an explicit (lambda0, mu0) recurrence certificate.
    Certify(CertifyArgs),
    /// Check enumeration claims exactly, or the activation-ratio formula by
    /// Monte Carlo (--claims lemmaA --grid FILE).
    Verify(VerifyArgs),
    /// Bracket the critical density with the monotone recurrence proxy.
    EstimateMuC(MuCArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct TfmArgs {
    #[arg(long)]
    d: u32,
    /// Threshold law: `delta:K` or `pmf:k1=p1,...[,inf=p]`.
    #[arg(long)]
    tau: String,
    #[arg(long)]
    mu: f64,
    #[arg(long, default_value_t = 10_000)]
    horizon: u32,
    #[arg(long, default_value_t = 30)]
    depth_cap: u32,
    #[arg(long, default_value_t = 10_000_000)]
    population_cap: u64,
    #[arg(long, default_value_t = 100_000)]
    reps: u64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    out: String,
}

#[derive(Args)]
struct SsfmArgs {
    #[arg(long)]
    d: u32,
    #[arg(long)]
    tau: String,
    #[arg(long)]
    mu: f64,
    #[arg(long, default_value_t = 30)]
    depth_cap: u32,
    #[arg(long, default_value_t = 10_000)]
    step_cap: u32,
    /// Supercritical runs are stopped (and flagged) at this live-frog count.
    #[arg(long, default_value_t = 1_000_000)]
    population_cap: u64,
    #[arg(long, default_value_t = 100_000)]
    reps: u64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    out: String,
}

#[derive(Args)]
struct RdeArgs {
    #[arg(long)]
    d: u32,
    #[arg(long)]
    tau: String,
    #[arg(long)]
    mu: f64,
    /// Truncation depth of the direct samples seeding generation 0.
    #[arg(long, default_value_t = 0)]
    depth: u32,
    #[arg(long, default_value_t = 100_000)]
    pop: usize,
    #[arg(long, default_value_t = 1)]
    generations: u32,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    out: String,
}

#[derive(Args)]
struct OperatorArgs {
    #[arg(long)]
    d: u32,
    /// Threshold law; sets the geometric spine-length rate via the
    /// activation probability. Mutually exclusive with --n.
    #[arg(long)]
    tau: Option<String>,
    /// Fixed spine length.
    #[arg(long, conflicts_with = "tau")]
    n: Option<u32>,
    #[arg(long)]
    mu: f64,
    /// Poisson mean for the candidate counts at v' and the nerves.
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    #[arg(long, default_value_t = 100_000)]
    reps: u64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    out: String,
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long)]
    d: u32,
    #[arg(long)]
    tau: String,
    /// `paper` (closed-form pattern bound) or `exact` (enumerated
    /// coefficients with an explicit tail hypothesis).
    #[arg(long, default_value = "paper")]
    mode: String,
    /// Head truncation of the spine-length sum.
    #[arg(long = "K", default_value_t = 12)]
    k: u32,
    /// Extra lambda0 candidates (comma-separated), tried alongside the
    /// seed-condition maximum.
    #[arg(long, value_delimiter = ',')]
    lambdas: Vec<f64>,
    #[arg(long, default_value_t = 1e6)]
    mu_max: f64,
    #[arg(long)]
    out: String,
}

#[derive(Args)]
struct VerifyArgs {
    /// Comma-separated claim ids (hc,hb,hexpand,constant1,sb), or `lemmaA`
    /// for the Monte Carlo activation-ratio check.
    #[arg(long)]
    claims: String,
    #[arg(long, default_value_t = 2)]
    d: u32,
    #[arg(long, default_value_t = 6)]
    n_max: u32,
    /// Lambda grid for the averaged claims (comma-separated).
    #[arg(long, value_delimiter = ',')]
    lambdas: Vec<f64>,
    /// JSON grid file for lemmaA cells:
    /// [{"d":2,"n":1,"a":"0","mu":3.0,"lambda":0.0}, ...].
    #[arg(long)]
    grid: Option<String>,
    #[arg(long, default_value_t = 1_000_000)]
    reps: u64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    out: String,
}

#[derive(Args)]
struct MuCArgs {
    #[arg(long)]
    d: u32,
    #[arg(long)]
    tau: String,
    /// Visit target of the recurrence proxy P(V >= m).
    #[arg(long, default_value_t = 50)]
    m: u64,
    #[arg(long, default_value_t = 10_000)]
    horizon: u32,
    #[arg(long, default_value_t = 30)]
    depth_cap: u32,
    #[arg(long, default_value_t = 2_000_000)]
    population_cap: u64,
    #[arg(long, default_value_t = 400)]
    reps: u64,
    #[arg(long, default_value_t = 0.05)]
    p_lo: f64,
    #[arg(long, default_value_t = 0.95)]
    p_hi: f64,
    #[arg(long, default_value_t = 0.0)]
    mu_min: f64,
    #[arg(long, default_value_t = 64.0)]
    mu_max: f64,
    #[arg(long, default_value_t = 12)]
    refinements: u32,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    out: String,
}

#[derive(Args)]
struct ReplayArgs {
    /// Manifest file written by a previous run.
    #[arg(long)]
    manifest: String,
    /// Redirect the replayed data file (manifest goes next to it).
    #[arg(long)]
    out: Option<String>,
}

fn dispatch(cli: Cli) -> CmdResult {
    match cli.command {
        Command::SimulateTfm(a) => run_tfm(&TfmConfig {
            d: a.d,
            tau: a.tau,
            mu: a.mu,
            horizon: a.horizon,
            depth_cap: a.depth_cap,
            population_cap: a.population_cap,
            reps: a.reps,
            seed: a.seed,
            out: a.out,
        }),
        Command::SimulateSsfm(a) => run_ssfm(&SsfmConfig {
            d: a.d,
            tau: a.tau,
            mu: a.mu,
            depth_cap: a.depth_cap,
            step_cap: a.step_cap,
            population_cap: a.population_cap,
            reps: a.reps,
            seed: a.seed,
            out: a.out,
        }),
        Command::Rde(a) => run_rde(&RdeConfig {
            d: a.d,
            tau: a.tau,
            mu: a.mu,
            depth: a.depth,
            pop: a.pop,
            generations: a.generations,
            seed: a.seed,
            out: a.out,
        }),
        Command::Operator(a) => run_operator(&OperatorConfig {
            d: a.d,
            tau: a.tau,
            n: a.n,
            mu: a.mu,
            lambda: a.lambda,
            reps: a.reps,
            seed: a.seed,
            out: a.out,
        }),
        Command::Certify(a) => run_certify(&CertifyCmdConfig {
            d: a.d,
            tau: a.tau,
            mode: a.mode,
            k: a.k,
            lambdas: a.lambdas,
            mu_max: a.mu_max,
            out: a.out,
        }),
        Command::Verify(a) => run_verify(&VerifyConfig {
            claims: a.claims,
            d: a.d,
            n_max: a.n_max,
            lambdas: a.lambdas,
            grid: a.grid,
            reps: a.reps,
            seed: a.seed,
            out: a.out,
        }),
        Command::EstimateMuC(a) => run_mu_c(&MuCConfig {
            d: a.d,
            tau: a.tau,
            m: a.m,
            horizon: a.horizon,
            depth_cap: a.depth_cap,
            population_cap: a.population_cap,
            reps: a.reps,
            p_lo: a.p_lo,
            p_hi: a.p_hi,
            mu_min: a.mu_min,
            mu_max: a.mu_max,
            refinements: a.refinements,
            seed: a.seed,
            out: a.out,
        }),
        Command::Replay(a) => run_replay(&a.manifest, a.out),
    }
}

fn main() {
    let cli = Cli::parse();
    if cli.workers > 0 {
        // The pool may already exist under test harnesses; worker count
        // never affects results, so a failure here is harmless.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.workers)
            .build_global();
    }
    if let Err(e) = dispatch(cli) {
        eprintln!("error: {e}");
        std::process::exit(match e {
            AppError::Config(_) => 2,
            AppError::Runtime(_) => 3,
        });
    }
}
