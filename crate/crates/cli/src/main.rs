use std::path::PathBuf;
use std::process::ExitCode;

use carleson_core::experiments::{emit, run, Format, Scenario, ScenarioConfig};
use carleson_core::Error;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "carleson", version, about = "Carleson-measure experiments for elliptic operators on the half-space")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write samples.csv, summary.json and plot data.
    Run {
        scenario: String,
        /// Flat `key = value` config file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (default: out/<scenario>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the `seed` key.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// List scenarios and the statement each one checks.
    List,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::InvalidGrid(_)
        | Error::InvalidNet(_)
        | Error::InvalidParameter(_)
        | Error::Ellipticity { .. }
        | Error::UnresolvedRegion(_)
        | Error::RegionOutsideGrid(_)
        | Error::OutsideBaseBall(_) => 2,
        _ => 3,
    }
}

fn execute(
    scenario: &str,
    config: Option<PathBuf>,
    out: Option<PathBuf>,
    seed: Option<u64>,
    threads: Option<usize>,
) -> Result<bool, Error> {
    let scenario = Scenario::parse(scenario)?;
    let mut cfg = match &config {
        Some(path) => ScenarioConfig::parse(scenario, &std::fs::read_to_string(path)?)?,
        None => ScenarioConfig::new(scenario),
    };
    if let Some(s) = seed {
        cfg = cfg.with_seed(s);
    }
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("--threads: {e}")))?;
    }
    let report = run(&cfg)?;
    let dir = out.unwrap_or_else(|| PathBuf::from("out").join(scenario.name()));
    for path in emit(&report, &dir, &Format::ALL)? {
        println!("wrote {}", path.display());
    }
    if let Some(norm) = report.carleson_norm {
        println!("carleson norm {norm:.6e}");
    }
    for c in &report.checks {
        println!("{} {} value={:.6e} bound={:.6e}", if c.pass { "ok  " } else { "FAIL" }, c.name, c.value, c.bound);
    }
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            for s in Scenario::ALL {
                println!("{:<16} {}", s.name(), s.anchor());
            }
            ExitCode::SUCCESS
        }
        Command::Run { scenario, config, out, seed, threads } => match execute(&scenario, config, out, seed, threads) {
            Ok(true) => ExitCode::SUCCESS,
            Ok(false) => ExitCode::from(1),
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(exit_code(&e))
            }
        },
    }
}
