use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use magscat::propagate::Fault;
use magscat::runner::verify::{table, verify, VerifyOptions};
use magscat::runner::{run_stage, Experiment, ScenarioConfig, Stage};

#[derive(Parser)]
#[command(name = "magscat", version, about = "Magnetic Schrödinger scattering lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Time evolution with conservation series and checkpoints.
    Simulate(RunArgs),
    /// One scattering run on the configured initial state.
    Scatter(RunArgs),
    /// Small-amplitude sweep and order fit.
    Smallamp(RunArgs),
    /// High-velocity probe sinograms.
    Probe(RunArgs),
    /// Tomographic recovery of B and V.
    Reconstruct(RunArgs),
    /// Invariant suite at small scale.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, env = "MAGSCAT_CONFIG")]
    config: PathBuf,
    /// Output directory; overrides the config's `output`.
    #[arg(long, env = "MAGSCAT_OUT")]
    out: Option<PathBuf>,
    #[arg(long, env = "MAGSCAT_WORKERS")]
    workers: Option<usize>,
    #[arg(long, env = "MAGSCAT_SEED")]
    seed: Option<u64>,
    #[arg(long, env = "MAGSCAT_EXPERIMENT")]
    experiment: Option<Experiment>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    None,
    FlipDivergence,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, env = "MAGSCAT_WORKERS")]
    workers: Option<usize>,
    #[arg(long, env = "MAGSCAT_SEED", default_value_t = 0)]
    seed: u64,
    /// Module or check names; repeatable.
    #[arg(long = "select", env = "MAGSCAT_SELECT", value_delimiter = ',')]
    select: Option<Vec<String>>,
    #[arg(long, hide = true, value_enum, default_value_t = FaultArg::None)]
    inject_fault: FaultArg,
}

fn run(args: RunArgs, stage: Stage) -> magscat::Result<bool> {
    let mut cfg = ScenarioConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(e) = args.experiment {
        cfg.experiment = Some(e);
        cfg.validate()?;
    }
    let out = args.out.unwrap_or_else(|| cfg.output.clone());
    let report = run_stage(&cfg, stage, &out, args.workers)?;
    print!("{}", report.table());
    for f in &report.flags {
        eprintln!("flag: {f}");
    }
    Ok(report.pass)
}

fn run_verify(args: VerifyArgs) -> magscat::Result<bool> {
    let opts = VerifyOptions {
        select: args.select,
        fault: match args.inject_fault {
            FaultArg::None => Fault::None,
            FaultArg::FlipDivergence => Fault::FlipDivergence,
        },
        seed: args.seed,
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = args.workers {
        builder = builder.num_threads(w);
    }
    let pool = builder.build().map_err(|e| magscat::Error::Config {
        path: "workers".into(),
        reason: e.to_string(),
    })?;
    let results = pool.install(|| verify(&opts))?;
    print!("{}", table(&results));
    Ok(results.iter().all(|r| r.pass))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(a) => run(a, Stage::Simulate),
        Command::Scatter(a) => run(a, Stage::Scatter),
        Command::Smallamp(a) => run(a, Stage::Smallamp),
        Command::Probe(a) => run(a, Stage::Probe),
        Command::Reconstruct(a) => run(a, Stage::Reconstruct),
        Command::Verify(a) => run_verify(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
