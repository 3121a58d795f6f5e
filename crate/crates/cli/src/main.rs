use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use flcboot_core::flctest::Method;
use flcboot_core::harness::{read_config, render_csv, CONFIG_SCHEMA, DEFAULT_B};
use flcboot_core::rng::derive_key;
use flcboot_core::{
    emit_csv, fdb_diagnostics, generate, run_experiment, stream, BootstrapPlan, ExperimentConfig,
};

#[derive(Parser)]
#[command(name = "flcboot", version, about = "FLC F-test and bootstrap Monte Carlo experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario × method grid and write the rejection table as CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Datasets per scenario; overrides the config.
        #[arg(long)]
        replicates: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads. Falls back to FLCBOOT_WORKERS, then the config.
        #[arg(long, env = "FLCBOOT_WORKERS")]
        workers: Option<usize>,
        /// CSV destination; overrides the config. Stdout when neither is set.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeat the fast double bootstrap on fixed datasets to expose its
    /// Monte Carlo variability.
    DiagnoseFdb {
        #[arg(long)]
        config: PathBuf,
        /// FDB repetitions per dataset.
        #[arg(long)]
        mc_reps: usize,
        /// Datasets per scenario; defaults to the config's replicates.
        #[arg(long)]
        datasets: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the config file grammar.
    PrintSchema,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("flcboot: error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run {
            config,
            replicates,
            seed,
            workers,
            out,
        } => run(&config, replicates, seed, workers, out),
        Command::DiagnoseFdb {
            config,
            mc_reps,
            datasets,
            seed,
            out,
        } => diagnose(&config, mc_reps, datasets, seed, out),
        Command::PrintSchema => {
            print!("{CONFIG_SCHEMA}");
            Ok(())
        }
    }
}

fn load(path: &Path, replicates: Option<usize>, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut config = read_config(path)?;
    if let Some(r) = replicates {
        config.replicates = r;
    }
    if let Some(s) = seed {
        config.seed = s;
    }
    config.validate()?;
    Ok(config)
}

fn run(
    path: &Path,
    replicates: Option<usize>,
    seed: Option<u64>,
    workers: Option<usize>,
    out: Option<PathBuf>,
) -> Result<()> {
    let mut config = load(path, replicates, seed)?;
    if let Some(w) = workers {
        config.workers = w;
    }
    let table = run_experiment(&config)?;
    for row in table.rows.iter().filter(|r| r.failures > 0) {
        eprintln!(
            "flcboot: warning: {} {} n={} m={} {} {}: {} failed replicates ({})",
            row.setting,
            row.d_label,
            row.n,
            row.m,
            row.error,
            row.method,
            row.failures,
            row.first_failure.as_deref().unwrap_or("unknown")
        );
    }
    match out.or(config.output_path.map(PathBuf::from)) {
        Some(p) => {
            emit_csv(&table, &p)?;
            eprintln!("flcboot: wrote {} rows to {}", table.rows.len(), p.display());
        }
        None => std::io::stdout().write_all(render_csv(&table).as_bytes())?,
    }
    Ok(())
}

const DIAGNOSTICS_HEADER: [&str; 13] = [
    "setting", "D_label", "n", "m", "error", "dataset", "rep", "f_obs", "q_minus_f", "p_bt",
    "p_fdb", "p_flc", "p_db",
];

fn diagnose(
    path: &Path,
    mc_reps: usize,
    datasets: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<()> {
    if mc_reps == 0 {
        bail!("--mc-reps must be ≥ 1");
    }
    let config = load(path, datasets, seed)?;
    let b = config
        .methods
        .iter()
        .find(|m| m.method == Method::Fdb)
        .map_or(DEFAULT_B, |m| m.b);
    let double = config
        .methods
        .iter()
        .find(|m| m.method == Method::Db)
        .map(|m| (m.b, m.b2));

    let sink: Box<dyn Write> = match &out {
        Some(p) => Box::new(
            std::fs::File::create(p).with_context(|| format!("{}", p.display()))?,
        ),
        None => Box::new(std::io::stdout()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(DIAGNOSTICS_HEADER)?;
    for (s, spec) in config.scenarios.iter().enumerate() {
        for r in 0..config.replicates {
            // Same dataset stream as `run`, so rows line up with its replicates.
            let data = generate(spec, &mut stream(config.seed, &[0, s as u64, r as u64]))
                .with_context(|| format!("scenario {s}, dataset {r}"))?;
            let plan = BootstrapPlan::fast_double(b, derive_key(config.seed, &[2, s as u64, r as u64]))
                .with_parallel(config.workers > 1);
            let diag = fdb_diagnostics(&data.design, &plan, mc_reps, double)
                .with_context(|| format!("scenario {s}, dataset {r}"))?;
            let p_db = diag.p_db.map(|p| p.to_string()).unwrap_or_default();
            for (k, run) in diag.runs.iter().enumerate() {
                w.write_record([
                    spec.setting.tag().to_string(),
                    spec.d_label(),
                    spec.n_clusters.to_string(),
                    spec.cluster_size.to_string(),
                    spec.error.kind.tag().to_string(),
                    r.to_string(),
                    k.to_string(),
                    run.f_obs.to_string(),
                    run.q_minus_f.to_string(),
                    run.p_bt.to_string(),
                    run.p_fdb.to_string(),
                    diag.p_flc.to_string(),
                    p_db.clone(),
                ])?;
            }
        }
    }
    w.flush()?;
    if let Some(p) = out {
        eprintln!("flcboot: wrote diagnostics to {}", p.display());
    }
    Ok(())
}
