//! `fracnls`: command-line front end for the experiment pipelines.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fracnls_cli::{run_command, CliError, Command, ExperimentConfig};

#[derive(Parser)]
#[command(name = "fracnls", version, about = "Sobolev growth experiments for the fractional quasilinear NLS")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// JSON configuration; missing fields take the desk defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Overrides the seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Full nonlinear run with monitors.
    Simulate,
    /// Effective-equation growth experiment.
    Effective,
    /// Resonance lower bounds and projection identities.
    ResonanceAudit,
    /// Homological identities, block-diagonalization decay, strong-Λ form.
    NormalformVerify,
    /// Positive-commutator and upper-bound eigenreports.
    MourreCheck,
    /// Well-prepared initial data file.
    MakeData,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Simulate => Command::Simulate,
            Cmd::Effective => Command::Effective,
            Cmd::ResonanceAudit => Command::ResonanceAudit,
            Cmd::NormalformVerify => Command::NormalFormVerify,
            Cmd::MourreCheck => Command::MourreCheck,
            Cmd::MakeData => Command::MakeData,
        }
    }
}

fn load(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::from_json(
            &std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?,
        )?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cmd = Command::from(cli.command);
    let result = load(&cli).and_then(|cfg| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build()
            .map_err(|e| CliError::Run(e.to_string()))?;
        pool.install(|| run_command(cmd, &cfg, &cli.out))
    });
    match result {
        Ok(record) => {
            for c in &record.checks {
                let verdict = if c.passed { "PASS" } else { "FAIL" };
                println!("{verdict} {}: {:.6e} (limit {:.6e})", c.name, c.value, c.limit);
            }
            println!("{} outputs in {} ({:.2} s)", record.outputs.len(), cli.out.display(), record.wall_clock_s);
            if record.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("{}: {e}", cmd.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
