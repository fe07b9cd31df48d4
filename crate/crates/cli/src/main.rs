use std::path::{Path, PathBuf};
use std::process::ExitCode;

use catdecay::ensemble::Engine;
use catdecay_cli::commands::{analyze, crosscheck, validate, wigner};
use catdecay_cli::runner::run;
use catdecay_cli::{preset, CliError, Result, RunConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "catdecay", version, about = "Conditioned decay of cat states under photon counting and homodyne detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an ensemble and write its artifacts.
    Run(RunArgs),
    /// Check a configuration without running it.
    Validate(RunArgs),
    /// Compare the number-basis and two-component engines.
    Crosscheck {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 10_000)]
        traj: usize,
        /// Also write the report to DIR/crosscheck.json.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render Wigner grids from the stored states of a finished run.
    Wigner {
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Recompute aggregates from the stored records of a finished run.
    Analyze {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    #[arg(long, value_parser = ["fig1", "fig2", "fig3"])]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// fock, two_component or charge_sde.
    #[arg(long)]
    engine: Option<String>,
    #[arg(long)]
    traj: Option<usize>,
    /// Run the number-basis engine even at large amplitude.
    #[arg(long)]
    force: bool,
}

impl RunArgs {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => RunConfig::from_path(path)?,
            (None, Some(name)) => preset(name)?,
            (None, None) => return Err(CliError::config("config", "pass --config PATH or --preset NAME")),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(name) = &self.engine {
            cfg.engine = serde_json::from_value::<Engine>(serde_json::Value::String(name.clone())).map_err(|_| {
                CliError::config("engine", format!("expected fock, two_component or charge_sde, got {name:?}"))
            })?;
        }
        if let Some(n) = self.traj {
            cfg.n_traj = n;
        }
        Ok(cfg)
    }
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("report serializes"));
}

fn list(paths: &[PathBuf], root: &Path) {
    for p in paths {
        println!("{}", p.strip_prefix(root).unwrap_or(p).display());
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.load()?;
            let manifest = run(&cfg, &args.out, args.force)?;
            println!(
                "wrote {} artifacts for {} case(s) to {}",
                manifest.artifacts.len(),
                manifest.cases.len(),
                args.out.display()
            );
        }
        Command::Validate(args) => {
            let report = validate(&args.load()?, args.force)?;
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            print_json(&report);
        }
        Command::Crosscheck { seed, traj, out } => {
            let report = crosscheck(traj, seed.unwrap_or(0))?;
            print_json(&report);
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
                let path = dir.join("crosscheck.json");
                let text = serde_json::to_string_pretty(&report).expect("report serializes");
                std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
            }
            if !report.passed {
                return Err(CliError::CrosscheckFailed(format!(
                    "KS distances {:.4}, {:.4}, {:.4} against tolerance {}",
                    report.ks_click_count, report.ks_first_click_charge, report.ks_first_wait, report.tolerance
                )));
            }
        }
        Command::Wigner { out, points } => list(&wigner(&out, points)?, &out),
        Command::Analyze { out } => list(&analyze(&out)?, &out),
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
