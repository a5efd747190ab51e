//! Command-line front end. `main` only parses arguments and maps errors to
//! exit codes; everything else lives here so it can be driven from tests.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use farmscale_core::workload::{fit_service_model, FitReport, ModelForm};
use serde::Serialize;

use crate::checkpoint::Checkpoint;
use crate::config::Config;
use crate::error::{HarnessError, Result};
use crate::harness::{Harness, Policy, PolicyReport};
use crate::io;
use crate::manifest::RunManifest;

#[derive(Debug, Parser)]
#[command(name = "farmscale", version, about = "Autoscaling experiments on a simulated task farm")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitForms {
    Reduced,
    Full,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AgentKind {
    Sarsa,
    Dqn,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the quadratic service-time models to measured samples.
    Calibrate {
        /// CSV with header `size,mean_time`.
        #[arg(long)]
        samples: PathBuf,
        #[arg(long, value_enum, default_value = "both")]
        form: FitForms,
        /// Also write `calibration.json` here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate the task stream of one episode.
    Workload {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Permute the phase order.
        #[arg(long)]
        shuffle: bool,
    },
    /// Run one episode and write its logs and summary.
    Run {
        #[command(flatten)]
        common: Common,
        /// `reactive-avg`, `reactive-max`, `hold`, `always-up`, or the path
        /// of an agent checkpoint.
        #[arg(long)]
        policy: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        shuffle: bool,
        /// Also dump the simulator event trace.
        #[arg(long)]
        trace: bool,
    },
    /// Train an agent and write its checkpoint and training curve.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        policy: AgentKind,
        /// Defaults to the configured episode count of the agent.
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Evaluate several policies on the same seeds.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated: `reactive-avg`, `reactive-max`, `sarsa`, `dqn`
        /// (trained in place) or checkpoint paths.
        #[arg(long, value_delimiter = ',', default_value = "reactive-avg,reactive-max,sarsa,dqn")]
        policy: Vec<String>,
        /// Seed list such as `0-9` or `1,4,7`.
        #[arg(long, default_value = "0-9")]
        seeds: String,
        /// Seed for agents trained in place.
        #[arg(long, default_value_t = 0)]
        train_seed: u64,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        shuffle: bool,
    },
    /// Print the effective configuration as TOML.
    Config {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

/// Parses `0-9`, `3`, `1,4,7` or combinations such as `0-2,8`.
pub fn parse_seeds(spec: &str) -> Result<Vec<u64>> {
    let bad = || HarnessError::Usage(format!("invalid seed list `{spec}`"));
    let mut seeds = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
                if a > b {
                    return Err(bad());
                }
                seeds.extend(a..=b);
            }
            None => seeds.push(part.parse().map_err(|_| bad())?),
        }
    }
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    match path {
        Some(p) => Config::load(p),
        None => Ok(Config::default()),
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))
}

fn write_file<F>(dir: &Path, name: &str, f: F) -> Result<()>
where
    F: FnOnce(&mut std::io::BufWriter<std::fs::File>) -> Result<()>,
{
    let path = dir.join(name);
    let mut w = io::create(&path)?;
    f(&mut w)?;
    w.flush().map_err(|e| HarnessError::io(&path, e))
}

fn say(out: &mut dyn Write, line: std::fmt::Arguments) -> Result<()> {
    writeln!(out, "{line}").map_err(|e| HarnessError::io("<stdout>", e))
}

#[derive(Debug, Serialize)]
struct CalibrationReport {
    samples: usize,
    reduced: Option<FitReport>,
    full: Option<FitReport>,
    delta_rss: Option<f64>,
}

pub fn calibrate(samples: &Path, form: FitForms, out_dir: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    let file = std::fs::File::open(samples).map_err(|e| HarnessError::io(samples, e))?;
    let data = io::read_calibration(samples, file)?;
    let reduced = match form {
        FitForms::Full => None,
        _ => Some(fit_service_model(&data, ModelForm::Reduced)?),
    };
    let full = match form {
        FitForms::Reduced => None,
        _ => Some(fit_service_model(&data, ModelForm::Full)?),
    };
    if let Some(r) = &reduced {
        say(out, format_args!("reduced a={:.6e} c={:.6e} r2={:.6} rss={:.4e}", r.model.a, r.model.c, r.r_squared, r.rss))?;
    }
    if let Some(f) = &full {
        say(
            out,
            format_args!(
                "full a={:.6e} b={:.6e} c={:.6e} r2={:.6} rss={:.4e}",
                f.model.a, f.model.b, f.model.c, f.r_squared, f.rss
            ),
        )?;
    }
    let delta_rss = match (&reduced, &full) {
        (Some(r), Some(f)) => Some(r.rss - f.rss),
        _ => None,
    };
    if let Some(d) = delta_rss {
        say(out, format_args!("delta_rss={d:.4e}"))?;
    }
    if let Some(dir) = out_dir {
        ensure_dir(dir)?;
        let report = CalibrationReport { samples: data.len(), reduced, full, delta_rss };
        write_file(dir, "calibration.json", |w| io::write_json(w, &report))?;
        let mut m = RunManifest::new("calibrate", None, dir);
        m.add("calibration.json")?;
        m.write()?;
    }
    Ok(())
}

pub fn workload(common: &Common, seed: u64, shuffle: bool, out: &mut dyn Write) -> Result<()> {
    let cfg = load_config(common.config.as_deref())?;
    let h = Harness::new(cfg)?;
    let w = h.workload(seed, shuffle)?;
    ensure_dir(&common.out)?;
    write_file(&common.out, "workload.csv", |f| io::write_workload(f, &w.tasks))?;
    let counts = w.per_phase_counts();
    for slot in &w.schedule {
        say(
            out,
            format_args!(
                "phase {} start={} end={} tasks={}",
                slot.phase_index, slot.start, slot.end, counts[slot.phase_index]
            ),
        )?;
    }
    say(out, format_args!("total tasks={}", w.tasks.len()))?;
    let mut m = RunManifest::new("workload", common.config.as_deref(), &common.out);
    m.seeds = vec![seed];
    m.add("workload.csv")?;
    m.write()?;
    Ok(())
}

pub fn run(common: &Common, policy: &str, seed: u64, shuffle: bool, trace: bool, out: &mut dyn Write) -> Result<()> {
    let cfg = load_config(common.config.as_deref())?;
    let h = Harness::new(cfg)?;
    let mut p = Policy::load(policy)?;
    let o = h.run(&mut p, seed, shuffle, trace)?;
    ensure_dir(&common.out)?;
    write_file(&common.out, "steps.csv", |f| io::write_step_log(f, &o.log))?;
    write_file(&common.out, "tasks.csv", |f| io::write_task_log(f, &o.log.tasks))?;
    write_file(&common.out, "summary.json", |f| {
        io::write_json(f, &serde_json::json!({ "policy": p.name(), "seed": seed, "summary": o.summary, "costs": o.costs }))
    })?;
    let mut m = RunManifest::new("run", common.config.as_deref(), &common.out);
    m.seeds = vec![seed];
    m.policy = Some(policy.into());
    for name in ["steps.csv", "tasks.csv", "summary.json"] {
        m.add(name)?;
    }
    if trace {
        write_file(&common.out, "trace.csv", |f| io::write_trace(f, &o.trace))?;
        m.add("trace.csv")?;
    }
    m.write()?;
    let s = &o.summary;
    say(
        out,
        format_args!(
            "policy={} seed={} final_qos={:.4} mean_workers={:.2} max_workers={} scaling_actions={} noop_actions={} total_reward={:.2}",
            p.name(),
            seed,
            s.final_qos,
            s.n_mean,
            s.n_max,
            s.n_scale,
            s.no_ops,
            s.total_reward
        ),
    )?;
    Ok(())
}

pub fn train(common: &Common, kind: AgentKind, episodes: Option<usize>, seed: u64, out: &mut dyn Write) -> Result<()> {
    let cfg = load_config(common.config.as_deref())?;
    let h = Harness::new(cfg)?;
    let (checkpoint, records) = match kind {
        AgentKind::Sarsa => {
            let (a, r) = h.train_sarsa(episodes.unwrap_or(h.config.training.sarsa_episodes), seed)?;
            (Checkpoint::from_sarsa(&a), r)
        }
        AgentKind::Dqn => {
            let (a, r) = h.train_dqn(episodes.unwrap_or(h.config.training.dqn_episodes), seed)?;
            (Checkpoint::from_dqn(&a), r)
        }
    };
    ensure_dir(&common.out)?;
    checkpoint.save(&common.out.join("checkpoint.json"))?;
    write_file(&common.out, "training_curve.csv", |f| io::write_training_curve(f, &records))?;
    let mut m = RunManifest::new("train", common.config.as_deref(), &common.out);
    m.seeds = vec![seed];
    m.policy = Some(checkpoint.kind().into());
    m.add("checkpoint.json")?;
    m.add("training_curve.csv")?;
    m.write()?;
    if let Some(last) = records.last() {
        say(
            out,
            format_args!(
                "agent={} episodes={} last_final_qos={:.4} last_epsilon={:.4}",
                checkpoint.kind(),
                records.len(),
                last.final_qos,
                last.epsilon
            ),
        )?;
    }
    Ok(())
}

/// Resolves a compare entry, training agents in place when no checkpoint is given.
fn resolve_policy(h: &Harness, spec: &str, train_seed: u64, episodes: Option<usize>) -> Result<Policy> {
    match spec {
        "sarsa" => {
            let n = episodes.unwrap_or(h.config.training.sarsa_episodes);
            Ok(Policy::Sarsa(Box::new(h.train_sarsa(n, train_seed)?.0)))
        }
        "dqn" => {
            let n = episodes.unwrap_or(h.config.training.dqn_episodes);
            Ok(Policy::Dqn(Box::new(h.train_dqn(n, train_seed)?.0)))
        }
        other => Policy::load(other),
    }
}

pub fn compare_reports(
    h: &Harness,
    policies: &[String],
    seeds: &[u64],
    train_seed: u64,
    episodes: Option<usize>,
    shuffle: bool,
) -> Result<Vec<PolicyReport>> {
    if policies.is_empty() {
        return Err(HarnessError::Usage("at least one policy is required".into()));
    }
    policies
        .iter()
        .map(|spec| {
            let mut p = resolve_policy(h, spec, train_seed, episodes)?;
            h.evaluate(spec, &mut p, seeds, shuffle)
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
pub fn compare(
    common: &Common,
    policies: &[String],
    seeds: &str,
    train_seed: u64,
    episodes: Option<usize>,
    shuffle: bool,
    out: &mut dyn Write,
) -> Result<()> {
    let cfg = load_config(common.config.as_deref())?;
    let h = Harness::new(cfg)?;
    let seeds = parse_seeds(seeds)?;
    let reports = compare_reports(&h, policies, &seeds, train_seed, episodes, shuffle)?;
    let rows: Vec<io::ComparisonRow> = reports.iter().map(|r| io::ComparisonRow::new(&r.policy, &r.aggregate)).collect();
    let phases: Vec<io::PhaseRow> = reports.iter().flat_map(|r| io::phase_rows(&r.policy, &r.aggregate)).collect();
    ensure_dir(&common.out)?;
    write_file(&common.out, "comparison.csv", |f| io::write_comparison(f, &rows))?;
    write_file(&common.out, "phases.csv", |f| io::write_phase_comparison(f, &phases))?;
    write_file(&common.out, "episodes.json", |f| io::write_json(f, &reports))?;
    let mut m = RunManifest::new("compare", common.config.as_deref(), &common.out);
    m.seeds = seeds;
    m.policy = Some(policies.join(","));
    for name in ["comparison.csv", "phases.csv", "episodes.json"] {
        m.add(name)?;
    }
    m.write()?;
    say(out, format_args!("{:<14} {:>16} {:>14} {:>12} {:>14} {:>12}", "policy", "final_qos", "mean_workers", "max_workers", "scaling", "noop"))?;
    for r in &rows {
        say(
            out,
            format_args!(
                "{:<14} {:>7.4} ± {:<6.4} {:>6.2} ± {:<5.2} {:>5.1} ± {:<4.1} {:>6.2} ± {:<5.2} {:>5.1} ± {:<4.1}",
                r.policy,
                r.final_qos_mean,
                r.final_qos_std,
                r.mean_workers_mean,
                r.mean_workers_std,
                r.max_workers_mean,
                r.max_workers_std,
                r.scaling_actions_mean,
                r.scaling_actions_std,
                r.noop_actions_mean,
                r.noop_actions_std
            ),
        )?;
    }
    Ok(())
}

pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Calibrate { samples, form, out: dir } => calibrate(&samples, form, dir.as_deref(), out),
        Command::Workload { common, seed, shuffle } => workload(&common, seed, shuffle, out),
        Command::Run { common, policy, seed, shuffle, trace } => run(&common, &policy, seed, shuffle, trace, out),
        Command::Train { common, policy, episodes, seed } => train(&common, policy, episodes, seed, out),
        Command::Compare { common, policy, seeds, train_seed, episodes, shuffle } => {
            compare(&common, &policy, &seeds, train_seed, episodes, shuffle, out)
        }
        Command::Config { config } => {
            let text = load_config(config.as_deref())?.to_toml()?;
            out.write_all(text.as_bytes()).map_err(|e| HarnessError::io("<stdout>", e))
        }
    }
}

/// One-line, `key=value` rendering of an error for scripts.
pub fn error_line(e: &HarnessError) -> String {
    format!(
        "error kind={} code={} message={}",
        e.kind(),
        e.exit_code(),
        serde_json::to_string(&e.to_string()).unwrap_or_else(|_| "\"\"".into())
    )
}
