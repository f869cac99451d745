//! `solid` — run and benchmark the sequential optimizer from the shell.
//!
//! Data goes to CSV files; progress and errors go to standard error.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Deserialize;

use solid_core::solid_loop::{
    improvement, run_baseline, run_solid, Mode, RunConfig, RunTrace,
};
use solid_core::testbed::{cv_bandwidth, load_dataset, Objective, SmoothedDataset};

#[derive(Parser)]
#[command(name = "solid", about = "Sequential optimization with local variable selection")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute one sequential run and write its per-step trace as CSV.
    Run(RunArgs),
    /// Execute replicated runs across modes with paired seeds and write
    /// long-format and summary CSVs.
    Bench(BenchArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Test function: toy, beach, drum, or simba.
    #[arg(long)]
    objective: Option<String>,
    /// Delimited text file (p input columns then a response); overrides
    /// --objective and is optimized through a kernel smoother.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Smoother bandwidth for --dataset; chosen by 5-fold cross-validation
    /// when omitted.
    #[arg(long)]
    bandwidth: Option<f64>,
    /// TOML config file; command-line flags win over file keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for replicated runs (default: available cores).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Sequential evaluations after the initial design.
    #[arg(long)]
    steps: Option<usize>,
    /// Ambient dimension the objective is embedded in.
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    n0: Option<usize>,
    /// Global selection threshold.
    #[arg(long)]
    g: Option<f64>,
    /// Local importance threshold.
    #[arg(long)]
    rho: Option<f64>,
    /// Search-region radius.
    #[arg(long)]
    delta: Option<f64>,
    /// Retained MCMC draws per fit.
    #[arg(long)]
    chain_m: Option<usize>,
    /// Posterior draws used for marginal surfaces.
    #[arg(long)]
    subsample_m: Option<usize>,
    /// Candidate points per acquisition set.
    #[arg(long)]
    candidates: Option<usize>,
    /// Risk-aversion coefficient for the incumbent.
    #[arg(long)]
    nu: Option<f64>,
    /// Prediction-cloud size for local selection.
    #[arg(long)]
    q: Option<usize>,
    /// Observation noise variance.
    #[arg(long)]
    noise_var: Option<f64>,
    /// Comma-separated truly-active indices, required for oracle mode.
    #[arg(long)]
    oracle_active: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    mode: Option<String>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated list of modes to compare.
    #[arg(long)]
    modes: Option<String>,
    /// Replications; replication r uses seed = base seed + r in every mode.
    #[arg(long)]
    reps: Option<usize>,
}

/// File counterpart of the command-line flags; any key may be omitted.
#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    objective: Option<String>,
    dataset: Option<PathBuf>,
    bandwidth: Option<f64>,
    out: Option<PathBuf>,
    threads: Option<usize>,
    mode: Option<String>,
    modes: Option<String>,
    reps: Option<usize>,
    seed: Option<u64>,
    steps: Option<usize>,
    p: Option<usize>,
    n0: Option<usize>,
    g: Option<f64>,
    rho: Option<f64>,
    delta: Option<f64>,
    chain_m: Option<usize>,
    subsample_m: Option<usize>,
    candidates: Option<usize>,
    nu: Option<f64>,
    q: Option<usize>,
    noise_var: Option<f64>,
    oracle_active: Option<String>,
}

fn load_file_config(path: Option<&Path>) -> Result<FileConfig> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("cannot read config {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("bad config {}", p.display()))
        }
    }
}

/// Everything resolved: defaults, then config file, then flags.
struct Resolved {
    objective: Objective,
    objective_label: String,
    config: RunConfig,
    out: PathBuf,
    threads: Option<usize>,
}

fn parse_index_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|t| t.trim().parse::<usize>().map_err(Into::into))
        .collect()
}

fn resolve(common: &CommonArgs, mode: Mode, default_out: &str) -> Result<Resolved> {
    let file = load_file_config(common.config.as_deref())?;
    let dataset = common.dataset.clone().or(file.dataset);
    let name = common
        .objective
        .clone()
        .or(file.objective)
        .unwrap_or_else(|| "toy".into());

    let (objective, objective_label, preset) = if let Some(path) = &dataset {
        let (inputs, responses) = load_dataset(path)?;
        let bandwidth = match common.bandwidth.or(file.bandwidth) {
            Some(h) => h,
            None => {
                let grid: Vec<f64> = (1..=30).map(|i| 0.01 * i as f64).collect();
                let h = cv_bandwidth(&inputs, &responses, 5, &grid, 0)?;
                eprintln!("cross-validated bandwidth: {h}");
                h
            }
        };
        let noise = common.noise_var.or(file.noise_var).unwrap_or(0.0);
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into());
        let data = SmoothedDataset::new(inputs, responses, bandwidth)?;
        let obj = Objective::from_dataset(&label, data, noise);
        let p = obj.p0;
        let cfg = RunConfig::standard(mode, 10 * p, 25, 1);
        (obj, label, cfg)
    } else {
        // Ambient dimensions and initial design sizes match the reference
        // simulation settings per function.
        let (p_default, n0_default, noise_default, preset): (usize, usize, f64, fn(Mode) -> RunConfig) =
            match name.as_str() {
                "toy" => (3, 10, 0.08, |m| RunConfig::toy_preset(m, 9, 1)),
                "simba" => (15, 80, 0.05, |m| RunConfig::standard(m, 80, 25, 1)),
                _ => (15, 70, 0.05, |m| RunConfig::standard(m, 70, 25, 1)),
            };
        let p = common.p.or(file.p).unwrap_or(p_default);
        let noise = common.noise_var.or(file.noise_var).unwrap_or(noise_default);
        let obj = Objective::by_name(&name, p, noise)?;
        let mut cfg = preset(mode);
        cfg.n0 = n0_default;
        (obj, name.clone(), cfg)
    };

    let mut cfg = preset;
    cfg.mode = mode;
    if let Some(v) = common.seed.or(file.seed) {
        cfg.seed = v;
    }
    if let Some(v) = common.steps.or(file.steps) {
        cfg.n_steps = v;
    }
    if let Some(v) = common.n0.or(file.n0) {
        cfg.n0 = v;
    }
    if let Some(v) = common.g.or(file.g) {
        cfg.g = v;
    }
    if let Some(v) = common.rho.or(file.rho) {
        cfg.rho = v;
    }
    if let Some(v) = common.delta.or(file.delta) {
        cfg.delta = v;
    }
    if let Some(v) = common.chain_m.or(file.chain_m) {
        cfg.chain_m = v;
    }
    if let Some(v) = common.subsample_m.or(file.subsample_m) {
        cfg.subsample_m = v;
    }
    if let Some(v) = common.candidates.or(file.candidates) {
        cfg.c = v;
    }
    if let Some(v) = common.nu.or(file.nu) {
        cfg.nu = v;
    }
    if let Some(v) = common.q.or(file.q) {
        cfg.q = v;
    }
    if mode == Mode::Oracle {
        let list = common
            .oracle_active
            .clone()
            .or(file.oracle_active.clone())
            .context("oracle mode requires --oracle-active")?;
        cfg.oracle_active = Some(parse_index_list(&list)?);
    }
    let out = common
        .out
        .clone()
        .or(file.out)
        .unwrap_or_else(|| PathBuf::from(default_out));
    let threads = common.threads.or(file.threads);
    Ok(Resolved {
        objective,
        objective_label,
        config: cfg,
        out,
        threads,
    })
}

const LONG_HEADER: &str =
    "objective,mode,seed,step,f_opt,improvement,n_global_kept,n_local_active,wall_ms";

fn trace_rows(label: &str, trace: &RunTrace, wall_ms: u128) -> Vec<String> {
    let imp = improvement(trace);
    trace
        .steps
        .iter()
        .zip(&imp)
        .map(|(s, d)| {
            format!(
                "{label},{mode},{seed},{step},{f:.6},{d:.6},{gk},{la},{wall_ms}",
                mode = trace.mode.as_str(),
                seed = trace.seed,
                step = s.step,
                f = s.f_at_chi,
                gk = s.global_keep.len(),
                la = s.n_used,
            )
        })
        .collect()
}

fn execute(objective: &Objective, cfg: &RunConfig) -> solid_core::Result<(RunTrace, u128)> {
    let start = Instant::now();
    let trace = if cfg.mode == Mode::Solid {
        run_solid(objective, cfg)?
    } else {
        run_baseline(objective, cfg)?
    };
    Ok((trace, start.elapsed().as_millis()))
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let file = load_file_config(args.common.config.as_deref())?;
    let mode = Mode::parse(
        &args
            .mode
            .clone()
            .or(file.mode)
            .unwrap_or_else(|| "solid".into()),
    )?;
    let r = resolve(&args.common, mode, "solid_run.csv")?;
    eprintln!(
        "run: objective={} mode={} seed={} steps={}",
        r.objective_label,
        mode.as_str(),
        r.config.seed,
        r.config.n_steps
    );
    let (trace, wall_ms) = execute(&r.objective, &r.config)?;
    let mut lines = vec![LONG_HEADER.to_string()];
    lines.extend(trace_rows(&r.objective_label, &trace, wall_ms));
    std::fs::write(&r.out, lines.join("\n") + "\n")
        .with_context(|| format!("cannot write {}", r.out.display()))?;
    eprintln!("wrote {} ({} rows)", r.out.display(), trace.steps.len());
    Ok(())
}

fn summary_path(long: &Path) -> PathBuf {
    let stem = long.file_stem().unwrap_or_default().to_string_lossy();
    let ext = long.extension().map(|e| e.to_string_lossy().into_owned());
    let name = match ext {
        Some(e) => format!("{stem}_summary.{e}"),
        None => format!("{stem}_summary"),
    };
    long.with_file_name(name)
}

fn cmd_bench(args: &BenchArgs) -> Result<()> {
    let file = load_file_config(args.common.config.as_deref())?;
    let modes: Vec<Mode> = args
        .modes
        .clone()
        .or(file.modes)
        .unwrap_or_else(|| "solid,gvs,oracle,none".into())
        .split(',')
        .map(|m| Mode::parse(m.trim()))
        .collect::<solid_core::Result<_>>()?;
    let reps = args.reps.or(file.reps).unwrap_or(1);
    if reps == 0 {
        bail!("--reps must be at least 1");
    }
    // Resolve once per mode so oracle gets its active list; objectives and
    // the numeric settings are identical across modes.
    let resolved: Vec<Resolved> = modes
        .iter()
        .map(|&m| resolve(&args.common, m, "solid_bench.csv"))
        .collect::<Result<_>>()?;
    let base = &resolved[0];
    if let Some(t) = base.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("thread pool")?;
    }
    let base_seed = base.config.seed;
    let n_steps = base.config.n_steps;

    let jobs: Vec<(usize, u64)> = (0..modes.len())
        .flat_map(|mi| (0..reps as u64).map(move |r| (mi, r)))
        .collect();
    let results: Vec<(usize, u64, solid_core::Result<(RunTrace, u128)>)> = jobs
        .par_iter()
        .map(|&(mi, r)| {
            let mut cfg = resolved[mi].config.clone();
            cfg.seed = base_seed + r;
            let out = execute(&resolved[mi].objective, &cfg);
            eprintln!(
                "bench: mode={} seed={} {}",
                modes[mi].as_str(),
                cfg.seed,
                if out.is_ok() { "done" } else { "FAILED" }
            );
            (mi, cfg.seed, out)
        })
        .collect();

    let mut long = vec![LONG_HEADER.to_string()];
    let mut failed = 0usize;
    // improvements[mode][step] -> per-seed values
    let mut per_step: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); n_steps + 1]; modes.len()];
    for (mi, seed, out) in &results {
        match out {
            Ok((trace, wall_ms)) => {
                long.extend(trace_rows(&resolved[*mi].objective_label, trace, *wall_ms));
                for (step, d) in improvement(trace).iter().enumerate() {
                    per_step[*mi][step].push(*d);
                }
            }
            Err(e) => {
                failed += 1;
                eprintln!("mode={} seed={seed}: {e}", modes[*mi].as_str());
            }
        }
    }

    std::fs::write(&base.out, long.join("\n") + "\n")
        .with_context(|| format!("cannot write {}", base.out.display()))?;

    let spath = summary_path(&base.out);
    let mut summary = vec!["mode,step,mean_improvement,se,n".to_string()];
    for (mi, mode) in modes.iter().enumerate() {
        for step in 0..=n_steps {
            let vals = &per_step[mi][step];
            if vals.is_empty() {
                continue;
            }
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let var = if vals.len() > 1 {
                vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            summary.push(format!(
                "{},{step},{mean:.6},{:.6},{}",
                mode.as_str(),
                (var / n).sqrt(),
                vals.len()
            ));
        }
    }
    std::fs::write(&spath, summary.join("\n") + "\n")
        .with_context(|| format!("cannot write {}", spath.display()))?;
    eprintln!("wrote {} and {}", base.out.display(), spath.display());

    if failed > 0 {
        bail!("{failed} run(s) failed");
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Run(args) => cmd_run(args),
        Cmd::Bench(args) => cmd_bench(args),
    };
    if let Err(e) = result {
        let _ = writeln!(std::io::stderr(), "error: {e:#}");
        std::process::exit(1);
    }
}
