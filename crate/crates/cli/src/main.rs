use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use pal::analysis::{average_reward_per_second, detect_first_swing_up, median, value_asymmetry_report};
use pal::checkpoint::load_agent;
use pal::experiment::{resolve_out_dir, run_experiment};
use pal::trace::read_trace;
use pal::{ExperimentConfig, PalError, RunSummary};

#[derive(Parser)]
#[command(name = "pal", about = "Two-agent pendulum learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one experiment per seed in `a..b` (end exclusive), in parallel.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_parser = parse_seed_range)]
        seeds: std::ops::Range<u64>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Parent directory; each run goes to `<out>/seed<N>`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarise every run directory (containing trace.csv) under DIR.
    Report {
        #[arg(long)]
        traces: PathBuf,
        #[arg(long, default_value_t = 0.2)]
        swing_up_tolerance: f64,
        #[arg(long, default_value_t = 2.0)]
        swing_up_hold: f64,
        #[arg(long, default_value_t = 300.0)]
        window: f64,
    },
    /// Critic state values of a saved agent at (+probe, 0) and (-probe, 0).
    ValueReport {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 0.3)]
        probe: f64,
        #[arg(long, default_value_t = 0.1)]
        resolution: f64,
    },
}

fn parse_seed_range(s: &str) -> Result<std::ops::Range<u64>, String> {
    let (a, b) = s.split_once("..").ok_or("expected a..b")?;
    let a: u64 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b: u64 = b.trim().parse().map_err(|e| format!("{e}"))?;
    if b <= a {
        return Err(format!("empty seed range {a}..{b}"));
    }
    Ok(a..b)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, seed, out } => cmd_run(&config, seed, out.as_deref()),
        Command::Sweep { config, seeds, jobs, out } => cmd_sweep(&config, seeds, jobs, out.as_deref()),
        Command::Report { traces, swing_up_tolerance, swing_up_hold, window } => {
            cmd_report(&traces, swing_up_tolerance, swing_up_hold, window)
        }
        Command::ValueReport { checkpoint, probe, resolution } => cmd_value_report(&checkpoint, probe, resolution),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run_one(config: ExperimentConfig, out: &Path) -> Result<RunSummary, PalError> {
    let outcome = run_experiment(config, Some(out))?;
    match outcome.error {
        Some(e) => Err(e),
        None => Ok(outcome.summary),
    }
}

fn cmd_run(path: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<(), PalError> {
    let mut config = ExperimentConfig::from_file(path)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    let dir = resolve_out_dir(&config, out);
    let summary = run_one(config, &dir)?;
    println!("{}", summary.to_json());
    eprintln!("wrote {}", dir.display());
    Ok(())
}

fn cmd_sweep(path: &Path, seeds: std::ops::Range<u64>, jobs: usize, out: Option<&Path>) -> Result<(), PalError> {
    let base = ExperimentConfig::from_file(path)?;
    base.validate()?;
    let parent = out
        .map(Path::to_path_buf)
        .or_else(|| base.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from(format!("runs/{:?}", base.setup).to_lowercase()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| PalError::Config(e.to_string()))?;
    let seeds: Vec<u64> = seeds.collect();
    let mut results: Vec<(u64, Result<RunSummary, PalError>)> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| {
                let cfg = base.clone().with_seed(seed);
                (seed, run_one(cfg, &parent.join(format!("seed{seed}"))))
            })
            .collect()
    });
    results.sort_by_key(|(seed, _)| *seed);
    let mut aborted = 0;
    for (seed, r) in &results {
        match r {
            Ok(s) => {
                let [r1, r2] = s.avg_reward_per_second.unwrap_or([f64::NAN; 2]);
                println!("seed {seed}: avg reward/s [{r1:.2}, {r2:.2}], swing-up {}", fmt_time(s.first_swing_up_time));
            }
            Err(e) => {
                println!("seed {seed}: aborted ({e})");
                aborted += 1;
            }
        }
    }
    if aborted > 0 {
        return Err(PalError::NonFinite(format!("{aborted} of {} runs aborted", results.len())));
    }
    Ok(())
}

fn fmt_time(t: Option<f64>) -> String {
    t.map_or_else(|| "none".to_string(), |t| format!("{t:.2} s"))
}

fn run_dirs(root: &Path) -> Result<Vec<PathBuf>, PalError> {
    let mut dirs = Vec::new();
    if root.join("trace.csv").is_file() {
        dirs.push(root.to_path_buf());
    }
    for entry in fs::read_dir(root)? {
        let p = entry?.path();
        if p.is_dir() {
            dirs.extend(run_dirs(&p)?);
        }
    }
    dirs.sort();
    Ok(dirs)
}

fn cmd_report(root: &Path, tol: f64, hold: f64, window: f64) -> Result<(), PalError> {
    let dirs = run_dirs(root)?;
    if dirs.is_empty() {
        return Err(PalError::Trace(format!("no trace.csv under {}", root.display())));
    }
    let mut rows = Vec::new();
    println!("{:<40} {:>12} {:>12} {:>12}", "run", "reward/s #1", "reward/s #2", "swing-up");
    for dir in &dirs {
        let trace = read_trace(&dir.join("trace.csv"))?;
        let end = window.min(trace.len() as f64 * pal::analysis::trace_dt(&trace).unwrap_or(0.0));
        let avg = |a| average_reward_per_second(&trace, a, 0.0, end).unwrap_or(f64::NAN);
        let (r1, r2) = (avg(0), avg(1));
        let swing = detect_first_swing_up(&trace, tol, hold);
        println!("{:<40} {:>12.3} {:>12.3} {:>12}", dir.display(), r1, r2, fmt_time(swing));
        rows.push((dir, r1, r2, swing));
    }
    let r1s: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let r2s: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let swings: Vec<f64> = rows.iter().filter_map(|r| r.3).collect();
    let med1 = median(&r1s).unwrap_or(f64::NAN);
    println!("runs: {}", rows.len());
    println!("median reward/s: agent1 {:.3}, agent2 {:.3}", med1, median(&r2s).unwrap_or(f64::NAN));
    println!(
        "swing-up: {}/{} runs, median time {}",
        swings.len(),
        rows.len(),
        fmt_time(median(&swings))
    );
    // Ranking metric for the representative run: agent 1's windowed average reward.
    if let Some(rep) = rows
        .iter()
        .filter(|r| !r.1.is_nan())
        .min_by(|a, b| (a.1 - med1).abs().total_cmp(&(b.1 - med1).abs()))
    {
        println!("closest to median (by agent 1 reward/s): {}", rep.0.display());
    }
    Ok(())
}

fn cmd_value_report(path: &Path, probe: f64, resolution: f64) -> Result<(), PalError> {
    let ck = load_agent(path)?;
    if ck.critic.input_dim() != 3 {
        return Err(PalError::Contract(format!(
            "critic takes {} inputs; value probes need a plant-state critic",
            ck.critic.input_dim()
        )));
    }
    let r = value_asymmetry_report(&ck.critic, ck.control_limit, probe, resolution);
    println!("V(+{probe}, 0) = {:.4}", r.value_plus);
    println!("V(-{probe}, 0) = {:.4}", r.value_minus);
    println!("difference = {:.4}", r.difference);
    Ok(())
}
