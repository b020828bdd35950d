use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qresid::config::{parse_flag_pairs, RunConfig};
use qresid::experiment::{run_barren, run_baseline, run_gen_data, run_sweep_qubits, run_train, RunReport};

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

/// Multi-stage residual quantum regression experiments.
#[derive(Parser)]
#[command(name = "qresid", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the labeled dataset CSV.
    GenData(RunArgs),
    /// Train a multi-stage residual ensemble and analyse its spectra.
    Train(RunArgs),
    /// Train a single module for stages × epochs_per_stage epochs.
    Baseline(RunArgs),
    /// Residual and baseline runs over qubit counts and seeds.
    SweepQubits(RunArgs),
    /// Gradient-variance sweep over qubit and layer counts.
    Barren(RunArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// TOML config file with flat `key = value` entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Per-key overrides, e.g. `--n_qubits 4 --stages 2`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY VALUE")]
    overrides: Vec<String>,
}

fn load_config(args: RunArgs) -> qresid::Result<RunConfig> {
    let mut file = args.config;
    let mut overrides = Vec::new();
    for (key, value) in parse_flag_pairs(&args.overrides)? {
        if key == "config" {
            file = Some(PathBuf::from(value));
        } else {
            overrides.push((key, value));
        }
    }
    RunConfig::load(file.as_deref(), &overrides)
}

type Driver = fn(&RunConfig) -> qresid::Result<RunReport>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args, run): (&str, RunArgs, Driver) = match cli.command {
        Command::GenData(a) => ("gen-data", a, run_gen_data),
        Command::Train(a) => ("train", a, run_train),
        Command::Baseline(a) => ("baseline", a, run_baseline),
        Command::SweepQubits(a) => ("sweep-qubits", a, run_sweep_qubits),
        Command::Barren(a) => ("barren", a, run_barren),
    };

    let config = match load_config(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("qresid {name}: {e}");
            return ExitCode::from(EXIT_VALIDATION);
        }
    };

    match run(&config) {
        Ok(report) => {
            for f in &report.failures {
                eprintln!("qresid {name}: cell n_qubits={} seed={} failed: {}", f.n_qubits, f.seed, f.error);
            }
            println!("{}", report.run_dir.display());
            if report.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_PARTIAL)
            }
        }
        Err(e) => {
            eprintln!("qresid {name}: {e}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
