use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use closure_core::numerics::{integrate, write_snapshots_csv, BurgersRhs};
use closure_core::trainer::{
    report, run_ensemble, run_random_search, train, Problem, RunConfig, RunLog, RunStatus, CONFIG_ECHO_FILE,
    DEFAULT_SNAPSHOT_TIMES,
};

/// Missing-term discovery for the 1-D Burgers equation.
///
/// Every flag can also be set through an environment variable with the
/// `CLOSURE_` prefix (`CLOSURE_CONFIG`, `CLOSURE_OUT`, `CLOSURE_SEED`,
/// `CLOSURE_WORKERS`, `CLOSURE_QUIET`). Flags win over the environment,
/// which wins over the configuration file.
#[derive(Debug, Parser)]
#[command(name = "closure", version)]
struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true, env = "CLOSURE_CONFIG", value_name = "PATH")]
    config: Option<PathBuf>,
    /// Directory that receives every output file.
    #[arg(long, global = true, env = "CLOSURE_OUT", value_name = "DIR", default_value = "closure-out")]
    out: PathBuf,
    #[arg(long, global = true, env = "CLOSURE_SEED")]
    seed: Option<u64>,
    #[arg(long, global = true, env = "CLOSURE_WORKERS")]
    workers: Option<usize>,
    /// Print only the result line.
    #[arg(long, short, global = true, env = "CLOSURE_QUIET")]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the reference solver and write solution snapshots.
    Solve {
        /// Snapshot times, comma separated.
        #[arg(long, value_delimiter = ',', value_name = "T,...")]
        times: Option<Vec<f64>>,
    },
    /// Train the expression generator (an ensemble when `runs > 1`).
    Discover,
    /// Sample from the uniform generator without learning.
    RandomSearch,
    /// Turn run logs into curve and snapshot CSVs.
    Report {
        /// Run directories or `runlog.jsonl` files.
        #[arg(required = true)]
        logs: Vec<PathBuf>,
    },
}

impl Cli {
    fn run_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(workers) = self.workers {
            cfg.workers = workers;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn info(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn prepare_out(dir: &Path, cfg: &RunConfig) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
    fs::write(dir.join(CONFIG_ECHO_FILE), cfg.to_toml_string())
        .with_context(|| format!("cannot write to output directory {}", dir.display()))?;
    Ok(())
}

fn solve(cli: &Cli, times: Option<&[f64]>) -> Result<()> {
    let cfg = cli.run_config()?;
    let solver = &cfg.solver;
    prepare_out(&cli.out, &cfg)?;
    let mut times: Vec<f64> = match times {
        Some(t) => t.to_vec(),
        None => DEFAULT_SNAPSHOT_TIMES.to_vec(),
    };
    if let Some(bad) = times.iter().find(|t| !(**t >= 0.0)) {
        bail!("snapshot time {bad} is negative");
    }
    times.retain(|&t| t <= solver.t_end + 1e-12);
    if times.is_empty() {
        times.push(0.0);
    }
    let grid = solver.grid.build()?;
    let traj = integrate(solver, &mut BurgersRhs::new(&grid, solver.nu), &times)?;
    if traj.diverged() {
        bail!("reference solution diverged ({:?})", traj.status);
    }
    let mass0 = traj.snapshots.first().map(|s| s.field.integral(&grid)).unwrap_or(0.0);
    for snap in &traj.snapshots {
        let path = cli.out.join(format!("snapshot_t{:.3}.csv", snap.t));
        let file = fs::File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
        write_snapshots_csv(file, &grid, std::slice::from_ref(snap))?;
        cli.info(format!("wrote {}", path.display()));
    }
    let mass1 = traj.final_field.integral(&grid);
    println!(
        "solved to t = {} on {} points; {} snapshots; momentum drift {:.3e}",
        solver.t_end,
        grid.len(),
        traj.snapshots.len(),
        ((mass1 - mass0) / mass0).abs()
    );
    Ok(())
}

fn probability_text(log: &RunLog) -> String {
    match log.summary.final_probability {
        Some(p) => format!("P(exact) = {:.4} ± {:.4} (lower bound {:.3e})", p.estimate, p.std_error, p.lower_bound),
        None => "P(exact) = n/a".into(),
    }
}

fn best_text(log: &RunLog) -> String {
    match (&log.summary.best_expression, log.summary.best_reward) {
        (Some(e), Some(r)) => format!("best: {e} (reward {r:.6})"),
        _ => "best: none".into(),
    }
}

fn discover(cli: &Cli) -> Result<()> {
    let cfg = cli.run_config()?;
    prepare_out(&cli.out, &cfg)?;
    cli.info(format!(
        "discovering with {} run(s) of up to {} iterations, m = {}, writing to {}",
        cfg.runs,
        cfg.max_iterations,
        cfg.m,
        cli.out.display()
    ));
    let logs = if cfg.runs > 1 {
        let (summary, logs) = run_ensemble(&cfg, Some(&cli.out))?;
        let dirs: Vec<PathBuf> = (0..logs.len()).map(|r| cli.out.join(format!("run_{r:03}"))).collect();
        report(&dirs, &cli.out)?;
        for (m, log) in summary.members.iter().zip(&logs) {
            cli.info(format!("seed {}: {}; {}", m.seed, m.status.describe(), best_text(log)));
        }
        cli.info(format!("{} of {} runs converged", summary.converged, logs.len()));
        logs
    } else {
        let log = train(&Problem::new(&cfg)?, cfg.seed, Some(&cli.out), true)?;
        report(&[cli.out.clone()], &cli.out)?;
        vec![log]
    };
    let best = logs
        .iter()
        .filter(|l| l.summary.best_reward.is_some())
        .max_by(|a, b| a.summary.best_reward.partial_cmp(&b.summary.best_reward).unwrap())
        .unwrap_or(&logs[0]);
    println!("status: {}; {}; {}", best.summary.status.describe(), best_text(best), probability_text(best));
    Ok(())
}

fn random_search(cli: &Cli) -> Result<()> {
    let cfg = cli.run_config()?;
    prepare_out(&cli.out, &cfg)?;
    cli.info(format!(
        "random search over {} samples, writing to {}",
        cfg.m * cfg.max_iterations,
        cli.out.display()
    ));
    let log = run_random_search(&cfg, Some(&cli.out))?;
    let status = match (log.summary.status, log.summary.first_hit) {
        (RunStatus::Hit, Some(hit)) => format!("hit at sample {} (iteration {})", hit.model, hit.iteration),
        (s, _) => s.describe().to_string(),
    };
    println!("status: {status}; {} samples; {}", log.summary.models_evaluated, best_text(&log));
    Ok(())
}

fn report_cmd(cli: &Cli, logs: &[PathBuf]) -> Result<()> {
    fs::create_dir_all(&cli.out).with_context(|| format!("cannot create output directory {}", cli.out.display()))?;
    let files = report(logs, &cli.out)?;
    println!("wrote {} and {}", files.curve.display(), files.snapshots.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve { times } => solve(&cli, times.as_deref()),
        Command::Discover => discover(&cli),
        Command::RandomSearch => random_search(&cli),
        Command::Report { logs } => report_cmd(&cli, logs),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
