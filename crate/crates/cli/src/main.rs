use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use roughfil_cli::config::Pipeline;
use roughfil_cli::pipeline::{run_energy, run_evolve, run_sweep, Summary};
use roughfil_cli::suite::{validate_suite, SuiteOptions};
use roughfil_cli::{CliError, Scenario};

#[derive(Parser)]
#[command(name = "roughfil", version, about = "Rough vortex-filament validation and evolution")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the invariant battery and print a table.
    Validate {
        /// Corrupt one area entry to exercise the Chen check.
        #[arg(long)]
        inject_area_perturbation: bool,
    },
    /// Energies of the configured curve and the field checks.
    Energy(RunArgs),
    /// Evolve the configured curve.
    Evolve(RunArgs),
    /// Run the configured parameter sweep.
    Sweep(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (TOML).
    #[arg(short, long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` from the scenario.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Overrides `curve.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

fn load(args: &RunArgs, pipeline: Pipeline) -> Result<Scenario, CliError> {
    let mut s = Scenario::load(&args.config)?;
    if let Some(seed) = args.seed {
        s.curve.seed = Some(seed);
    }
    if let Some(out) = &args.output {
        s.output_dir = Some(out.clone());
    }
    s.pipeline = Some(pipeline);
    s.validate()?;
    Ok(s)
}

fn report(result: Result<Summary, CliError>) -> ExitCode {
    match result {
        Ok(summary) => {
            for c in &summary.checks {
                println!("{:<28} {}", c.name, if c.pass { "PASS" } else { "FAIL" });
            }
            if summary.all_pass {
                ExitCode::SUCCESS
            } else {
                eprintln!("failing checks: {}", summary.failing().join(", "));
                ExitCode::from(3)
            }
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("cannot configure thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let default_out = PathBuf::from("roughfil-out");
    match cli.command {
        Command::Validate { inject_area_perturbation } => {
            let r = validate_suite(&SuiteOptions { inject_area_perturbation });
            print!("{}", r.table());
            if r.all_pass() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            }
        }
        Command::Energy(a) => report(load(&a, Pipeline::Energy).and_then(|s| run_energy(&s, &default_out))),
        Command::Evolve(a) => report(load(&a, Pipeline::Evolve).and_then(|s| run_evolve(&s, &default_out))),
        Command::Sweep(a) => report(load(&a, Pipeline::Sweep).and_then(|s| run_sweep(&s, &default_out))),
    }
}
