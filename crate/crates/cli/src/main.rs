//! `nonlocal`: run configurations and the named experiments.
//!
//! Exit status: 0 on success, 2 for configuration errors, 3 when the mesh
//! violates the CFL or mesh condition, 4 on numerical blowup, 5 on an
//! invariant violation under `--strict-invariants`, 1 otherwise.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nonlocal_core::experiments::{run_experiment, ExperimentKind, ExperimentOptions};
use nonlocal_core::{config::ConfigDoc, output, scheme, Error, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "nonlocal", version, about = "Lax-Friedrichs solver for nonlocal conservation laws")]
struct Cli {
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for concurrent runs (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Abort on the first invariant violation instead of warning
    #[arg(long, global = true)]
    strict_invariants: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a single configuration file
    Run { config: PathBuf },
    /// Run a named experiment: traffic, tv or limit
    Experiment {
        name: String,
        /// section.key=value applied to every run of the experiment
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

fn run_config(path: &Path, cli: &Cli) -> Result<(), Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
    let doc = ConfigDoc::parse(&text)?;
    let mut config = RunConfig::from_doc(&doc)?;
    config.strict_invariants |= cli.strict_invariants;
    let dir = cli
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let trajectory = scheme::run(&config)?;
    let files = output::write_trajectory(&dir, &trajectory)?;
    println!(
        "{}: {} snapshots, {} files in {}",
        config.model,
        trajectory.snapshots.len(),
        files.len(),
        dir.display()
    );
    if !trajectory.violations.is_empty() {
        println!("{} invariant warnings", trajectory.violations.len());
    }
    Ok(())
}

fn experiment(name: &str, overrides: &[String], cli: &Cli) -> Result<(), Error> {
    let kind: ExperimentKind = name.parse()?;
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("out")).join(kind.as_str());
    let options = ExperimentOptions {
        overrides: overrides.to_vec(),
        strict_invariants: cli.strict_invariants,
        limit_inv_widths: None,
    };
    let report = run_experiment(kind, &out, &options)?;
    for r in &report.runs {
        let d = &r.trajectory.diagnostics;
        if d.rows.is_empty() {
            println!("{:>12}: {} snapshots", r.label, r.trajectory.snapshots.len());
        } else {
            println!(
                "{:>12}: {} snapshots, max L∞ {:.6}, max TV {:.6}, max entropy residual {:.3e}, {} warnings",
                r.label,
                r.trajectory.snapshots.len(),
                d.max_linf(),
                d.max_tv(),
                d.max_entropy_residual(),
                r.trajectory.violations.len()
            );
        }
    }
    if !report.limit_table.is_empty() {
        println!("{:>6} {:>14}", "1/a", "L1 distance");
        for row in &report.limit_table {
            println!("{:>6} {:>14.8}", row.inv_width, row.l1_distance);
        }
    }
    println!("{} files in {}", report.files.len(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not configure thread pool: {e}");
        }
    }
    let result = match &cli.command {
        Command::Run { config } => run_config(config, &cli),
        Command::Experiment { name, overrides } => experiment(name, overrides, &cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
