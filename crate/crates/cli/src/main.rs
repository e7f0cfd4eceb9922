use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use shellnp_cli::commands::{cmd_eigs, cmd_spectrum, cmd_sweep};
use shellnp_cli::config::RunConfig;
use shellnp_cli::validate::cmd_validate;
use shellnp_cli::CliError;

#[derive(Parser)]
#[command(name = "shellnp", version, about = "Plasmon spectra of perturbed core-shell structures")]
struct Cli {
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides output.directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for randomized checks in validate.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalues and corrected resonance frequencies.
    Eigs,
    /// Corrected n-th mode frequencies across the sweep values.
    Sweep,
    /// Scattering intensity spectra and a gnuplot script.
    Spectrum,
    /// Invariant checks written as a JSON report.
    Validate,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config("--config <path> is required".into()))?;
    let cfg = RunConfig::load(path)?;
    let out = cli.out.as_deref();
    let files = match cli.command {
        Command::Eigs => cmd_eigs(&cfg, out)?,
        Command::Sweep => cmd_sweep(&cfg, out)?,
        Command::Spectrum => cmd_spectrum(&cfg, out)?,
        Command::Validate => {
            let (report, file) = cmd_validate(&cfg, out, cli.seed)?;
            for c in &report.checks {
                let v = c.value.map(|v| format!("{v:.3e}")).unwrap_or_else(|| "-".into());
                println!("{} {}: {v} ({}) {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.tolerance, c.detail);
            }
            println!("{}", file.display());
            if !report.passed {
                let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
                return Err(CliError::ValidationFailed(failed.join(", ")));
            }
            return Ok(());
        }
    };
    for f in files {
        println!("{}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    faer::set_global_parallelism(faer::Par::Seq);
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
