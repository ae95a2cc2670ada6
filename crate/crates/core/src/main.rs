use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use surfactant_pf::app::{self, Outcome};
use surfactant_pf::energy::ModelParams;
use surfactant_pf::io::load_config;
use surfactant_pf::verify::run_suite;

/// Energy-stable simulator for a phase field with surfactant.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Overrides `seed` from the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Continue a spinodal run from one of its checkpoints.
    Resume { checkpoint: PathBuf },
    /// Run the built-in property checks.
    Verify {
        #[arg(long, default_value_t = 16)]
        n_cells: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn report(outcome: Outcome) -> ExitCode {
    for line in &outcome.lines {
        println!("{line}");
    }
    if outcome.success {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn main() -> anyhow::Result<ExitCode> {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            config,
            output_dir,
            seed,
        } => {
            let mut manifest = load_config(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            if let Some(dir) = output_dir {
                manifest.output_dir = dir;
            }
            if let Some(seed) = seed {
                manifest.seed = seed;
            }
            app::execute(&manifest)?
        }
        Command::Resume { checkpoint } => app::resume(&checkpoint)
            .with_context(|| format!("resuming from {}", checkpoint.display()))?,
        Command::Verify { n_cells, seed } => {
            let mut lines = Vec::new();
            let mut success = true;
            for (label, p) in [
                ("smooth-test parameters", ModelParams::accuracy_test(1e-3)),
                ("spinodal parameters", ModelParams::spinodal(1e-2)),
            ] {
                lines.push(format!("# {label}"));
                for check in run_suite(&p, n_cells, seed) {
                    success &= check.passed;
                    lines.push(check.to_string());
                }
            }
            Outcome { lines, success }
        }
    };
    Ok(report(outcome))
}
