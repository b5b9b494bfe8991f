use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wavechain_cli::{resolve_workers, run, run_sweep, verify, with_workers, HarnessError, Pipeline, RunConfig};

#[derive(Parser)]
#[command(name = "wavechain", version, about = "Wave turbulence and long-range chain simulation harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lattice wave ensemble: spectrum and energy tables.
    WtSim(RunArgs),
    /// Kinetic equation from an initial spectrum.
    WtKinetic(RunArgs),
    /// Wave ensemble against the kinetic prediction at t = tau/lambda^2.
    WtCompare(RunArgs),
    /// Chain ensemble with energy, momentum and chaos diagnostics.
    ChainSim(RunArgs),
    /// Vlasov mean-field solver.
    Vlasov(RunArgs),
    /// Chain ensemble against the Vlasov solution.
    MfCompare(RunArgs),
    /// Fast operators against direct summation.
    OracleSuite(RunArgs),
    /// Runs the config once per sweep value and seed.
    Sweep(RunArgs),
    /// Recomputes checksums of a run directory against its manifest.
    Verify {
        dir: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to the config's `out` or runs/<pipeline>-<hash>.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit with status 3 when any acceptance check fails.
    #[arg(long)]
    check: bool,
    /// Worker threads (default: WAVECHAIN_WORKERS, else all cores).
    #[arg(long)]
    workers: Option<usize>,
}

fn load(args: &RunArgs, expected: Option<Pipeline>) -> Result<RunConfig, HarnessError> {
    let mut cfg = match (&args.config, expected) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(Pipeline::OracleSuite)) => RunConfig::from_json(r#"{"pipeline": "oracle-suite", "seed": 0}"#)?,
        (None, _) => {
            return Err(HarnessError::Config {
                field: "--config".into(),
                reason: "required".into(),
            })
        }
    };
    if let Some(p) = expected {
        if cfg.pipeline != p {
            return Err(HarnessError::Config {
                field: "pipeline".into(),
                reason: format!("config is for {} but the command is {}", cfg.pipeline.name(), p.name()),
            });
        }
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn out_dir(args: &RunArgs, cfg: &RunConfig, prefix: &str) -> PathBuf {
    args.out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("runs").join(format!("{prefix}-{}", &cfg.hash()[..12])))
}

fn execute(args: &RunArgs, pipeline: Option<Pipeline>) -> Result<(), HarnessError> {
    let cfg = load(args, pipeline)?;
    let workers = resolve_workers(args.workers)?;
    match pipeline {
        Some(p) => {
            let out = out_dir(args, &cfg, p.name());
            let outcome = with_workers(workers, || run(&cfg, &out))??;
            println!("{} metric={:e} dir={}", p.name(), outcome.metric, out.display());
            for c in &outcome.manifest.checks {
                println!("check {} {} {}", c.name, if c.passed { "ok" } else { "FAILED" }, c.detail);
            }
            let failed = outcome.failed_checks();
            if args.check && !failed.is_empty() {
                let names: Vec<&str> = failed.iter().map(|c| c.name.as_str()).collect();
                return Err(HarnessError::Acceptance(names.join(", ")));
            }
        }
        None => {
            let out = out_dir(args, &cfg, "sweep");
            let (report, _) = with_workers(workers, || run_sweep(&cfg, &out))??;
            for (v, m) in report.values.iter().zip(&report.medians) {
                println!("{}={v} median={}", report.axis, m.map_or("none".into(), |m| format!("{m:e}")));
            }
            println!("verdict={:?} partial={} dir={}", report.verdict, report.partial, out.display());
            if args.check && report.expect.is_some() && report.verdict != Some(true) {
                return Err(HarnessError::Acceptance(format!("sweep trend {:?} not met", report.expect)));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::WtSim(a) => execute(a, Some(Pipeline::WtSim)),
        Command::WtKinetic(a) => execute(a, Some(Pipeline::WtKinetic)),
        Command::WtCompare(a) => execute(a, Some(Pipeline::WtCompare)),
        Command::ChainSim(a) => execute(a, Some(Pipeline::ChainSim)),
        Command::Vlasov(a) => execute(a, Some(Pipeline::Vlasov)),
        Command::MfCompare(a) => execute(a, Some(Pipeline::MfCompare)),
        Command::OracleSuite(a) => execute(a, Some(Pipeline::OracleSuite)),
        Command::Sweep(a) => execute(a, None),
        Command::Verify { dir } => verify(dir).and_then(|problems| {
            for p in &problems {
                println!("{p}");
            }
            if problems.is_empty() {
                println!("ok");
                Ok(())
            } else {
                Err(HarnessError::Acceptance(format!("{} file(s) differ from the manifest", problems.len())))
            }
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
