use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mpts::harness::{
    compare_methods, default_out_dir, render_summary_csv, render_table, run_to_dir, write_atomic, CsvTable,
    ExperimentConfig, RunSummary, METRICS_FILE,
};
use mpts::selftest::run_selftest;
use mpts::{Error, Result};

#[derive(Parser)]
#[command(name = "mpts", version, about = "Robust episodic meta-learning with model predictive task sampling")]
struct Cli {
    /// Worker threads for per-task fan-out (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one configuration and write metrics.csv, timing.csv and checkpoint.json.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Shorter profile: 2000 iterations, 120 evaluation tasks.
        #[arg(long)]
        fast: bool,
    },
    /// Run (or reuse) every *.toml in a directory over several seeds and tabulate.
    Compare {
        config_dir: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0")]
        seeds: Vec<u64>,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
        #[arg(long)]
        fast: bool,
    },
    /// Check a configuration without running it.
    Validate {
        config: PathBuf,
        #[arg(long)]
        fast: bool,
    },
    /// Run the built-in gradient and selection oracles.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load(path: &Path, fast: bool) -> Result<ExperimentConfig> {
    let cfg = ExperimentConfig::load(path)?;
    let cfg = if fast { cfg.fast() } else { cfg };
    cfg.validate()?;
    Ok(cfg)
}

fn run(config: &Path, seed: Option<u64>, out: Option<PathBuf>, fast: bool) -> Result<()> {
    let mut cfg = load(config, fast)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if out.is_some() {
        cfg.out_dir = out;
    }
    let dir = default_out_dir(&cfg);
    let result = run_to_dir(&cfg, &dir)?;
    if let Some(last) = result.rows.last() {
        println!(
            "{} seed {}: iteration {} val_mean {:.6} {} training {:.2}s -> {}",
            cfg.label(),
            cfg.seed,
            last.iteration,
            last.val_mean,
            cfg.alphas
                .iter()
                .zip(&last.val_cvar)
                .map(|(a, v)| format!("cvar_{a} {v:.6}"))
                .collect::<Vec<_>>()
                .join(" "),
            result.training_seconds(),
            dir.display()
        );
    }
    Ok(())
}

fn compare(dir: &Path, seeds: &[u64], out: &Path, fast: bool) -> Result<()> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::InvalidArgument(format!("no *.toml configs in {}", dir.display())));
    }
    let mut summaries = Vec::new();
    for path in &paths {
        let base = load(path, fast)?;
        for &seed in seeds {
            let cfg = ExperimentConfig {
                seed,
                out_dir: Some(out.join(base.label()).join(format!("seed-{seed}"))),
                ..base.clone()
            };
            let run_dir = default_out_dir(&cfg);
            let reusable = CsvTable::load(run_dir.join(METRICS_FILE))
                .ok()
                .and_then(|t| t.config_hash)
                .is_some_and(|h| h == cfg.hash().unwrap_or_default());
            if !reusable {
                eprintln!("running {} seed {seed}", cfg.label());
                run_to_dir(&cfg, &run_dir)?;
            }
            summaries.push(RunSummary::from_dir(&cfg, &run_dir)?);
        }
    }
    let table = compare_methods(&summaries)?;
    print!("{}", render_table(&table));
    write_atomic(&out.join("summary.csv"), render_summary_csv(&table)?.as_bytes())
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { config, seed, out, fast } => run(&config, seed, out, fast).map(|_| true),
        Command::Compare {
            config_dir,
            seeds,
            out,
            fast,
        } => compare(&config_dir, &seeds, &out, fast).map(|_| true),
        Command::Validate { config, fast } => {
            let cfg = load(&config, fast)?;
            println!("{}: ok (hash {})", config.display(), cfg.hash()?);
            Ok(true)
        }
        Command::Selftest { seed } => {
            let checks = run_selftest(seed)?;
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            Ok(checks.iter().all(|c| c.passed))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        builder = builder.num_threads(n);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    };
    match pool.install(|| execute(cli)) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
