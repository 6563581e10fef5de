use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use stard::data::{synthetic_regression, write_csv, SyntheticSpec};
use stard::experiment::{
    emit_report, run_experiment, run_theory_suite, to_markdown, ReportFormat, RunConfig, Suite,
};

#[derive(Parser)]
#[command(
    name = "stard",
    version,
    about = "Star ensembles of ReLU networks and a theory lab"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every configured variant for every seed and write the report.
    Run {
        /// Flat key-value run config.
        #[arg(long)]
        config: PathBuf,
        /// Directory for report.csv, report.json and report.md.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a theory suite; exits with status 1 when any check is violated.
    Theory {
        /// geometric, offset, cover, isometry, corollary3 or all.
        #[arg(long)]
        suite: Suite,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// JSON report path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Dataset utilities.
    Data {
        #[command(subcommand)]
        command: DataCommand,
    },
}

#[derive(Subcommand)]
enum DataCommand {
    /// Sample a synthetic teacher task to CSV (features, then target `y`).
    Synth {
        /// Key-value task spec: widths, teacher_seed, sparsity, input, noise_std.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

fn run(config: &Path, out: &Path) -> Result<ExitCode> {
    let cfg = RunConfig::load(config).with_context(|| format!("loading {}", config.display()))?;
    let report = run_experiment(&cfg)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for format in ReportFormat::ALL {
        let path = out.join(format!("report.{}", format.extension()));
        emit_report(&report, format, &path)?;
    }
    print!("{}", to_markdown(&report));
    for row in &report.rows {
        for f in &row.failures {
            eprintln!("warning: {} seed {} failed: {}", row.name, f.seed, f.error);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn theory(suite: Suite, trials: usize, seed: u64, out: &Path) -> Result<ExitCode> {
    let report = run_theory_suite(suite, trials, seed)?;
    ensure_parent(out)?;
    let text = serde_json::to_string_pretty(&report)?;
    std::fs::write(out, text).with_context(|| format!("writing {}", out.display()))?;
    for c in &report.checks {
        let status = if c.violations == 0 { "ok" } else { "VIOLATED" };
        println!(
            "{:<20} {:>6} instances  min margin {:>12.4e}  violations {:>4}  {status}",
            c.name, c.instances, c.min_margin, c.violations
        );
    }
    Ok(if report.violations() == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn synth(spec: &Path, n: usize, seed: u64, out: &Path) -> Result<ExitCode> {
    let text =
        std::fs::read_to_string(spec).with_context(|| format!("reading {}", spec.display()))?;
    let task = SyntheticSpec::from_text(&text)?;
    let data = synthetic_regression(&task, n, seed)?;
    ensure_parent(out)?;
    write_csv(&data.data, out)?;
    println!(
        "wrote {n} rows to {} (noise variance {})",
        out.display(),
        data.noise_var
    );
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config, out } => run(config, out),
        Command::Theory {
            suite,
            trials,
            seed,
            out,
        } => theory(*suite, *trials, *seed, out),
        Command::Data {
            command: DataCommand::Synth { spec, n, seed, out },
        } => synth(spec, *n, *seed, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
