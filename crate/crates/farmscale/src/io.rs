//! CSV and JSON file formats.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use farmscale_core::agents::TrainingRecord;
use farmscale_core::metrics::{AggregateSummary, Stat};
use farmscale_core::sim::{TraceEvent, TraceKind};
use farmscale_core::types::{EpisodeLog, ScalingAction, TaskRecord, TaskSpec};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const STEP_LOG_COLUMNS: [&str; 16] = [
    "step",
    "q_in",
    "q_work",
    "q_res",
    "q_out",
    "n_workers",
    "t_proc_avg",
    "t_proc_max",
    "arrival_rate",
    "qos_step",
    "action",
    "applied_delta",
    "reward",
    "arrived",
    "completed",
    "hits",
];

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| HarnessError::io(path, e))
}

fn action_name(a: ScalingAction) -> &'static str {
    match a {
        ScalingAction::Down => "down",
        ScalingAction::Hold => "hold",
        ScalingAction::Up => "up",
    }
}

pub fn write_step_log<W: Write>(out: W, log: &EpisodeLog) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(STEP_LOG_COLUMNS)?;
    for s in &log.steps {
        let mut row: Vec<String> = vec![s.step.to_string()];
        row.extend(s.observation.to_array().iter().map(|v| v.to_string()));
        row.push(action_name(s.action).into());
        row.push(s.applied_delta.to_string());
        row.push(s.reward.to_string());
        row.push(s.arrived.to_string());
        row.push(s.completed.to_string());
        row.push(s.hits.to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[derive(Serialize)]
struct TaskRow {
    task_id: u64,
    arrival: f64,
    size: u32,
    service: f64,
    deadline: f64,
    completion: Option<f64>,
    met: bool,
}

pub fn write_task_log<W: Write>(out: W, tasks: &[TaskRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for t in tasks {
        w.serialize(TaskRow {
            task_id: t.task_id,
            arrival: t.arrival,
            size: t.size_px,
            service: t.service,
            deadline: t.deadline,
            completion: t.completion,
            met: t.met,
        })?;
    }
    if tasks.is_empty() {
        w.write_record(["task_id", "arrival", "size", "service", "deadline", "completion", "met"])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub const WORKLOAD_COLUMNS: [&str; 6] = ["task_id", "arrival_time", "size_px", "service_time", "deadline", "phase_index"];

pub fn write_workload<W: Write>(out: W, tasks: &[TaskSpec]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(WORKLOAD_COLUMNS)?;
    for t in tasks {
        w.serialize(t)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn parse_error(path: &Path, e: csv::Error) -> HarnessError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    HarnessError::Parse { path: path.to_path_buf(), line, message: e.to_string() }
}

fn check_header(path: &Path, r: &mut csv::Reader<impl Read>, expected: &[&str]) -> Result<()> {
    let header = r.headers().map_err(|e| parse_error(path, e))?;
    let got: Vec<&str> = header.iter().map(str::trim).collect();
    if got != expected {
        return Err(HarnessError::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected columns {expected:?}, found {got:?}"),
        });
    }
    Ok(())
}

pub fn read_workload<R: Read>(path: &Path, input: R) -> Result<Vec<TaskSpec>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    check_header(path, &mut r, &WORKLOAD_COLUMNS)?;
    r.deserialize().map(|row| row.map_err(|e| parse_error(path, e))).collect()
}

/// Calibration samples: header `size,mean_time`, one row per measurement.
/// Blank lines and lines starting with `#` are skipped.
pub fn read_calibration<R: Read>(path: &Path, mut input: R) -> Result<Vec<(f64, f64)>> {
    let mut text = String::new();
    input.read_to_string(&mut text).map_err(|e| HarnessError::io(path, e))?;
    let mut rows = Vec::new();
    let mut header_seen = false;
    for (i, raw) in text.lines().enumerate() {
        let line = i as u64 + 1;
        let l = raw.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = l.split(',').map(str::trim).collect();
        let err = |message: String| HarnessError::Parse { path: path.to_path_buf(), line, message };
        if !header_seen {
            if fields != ["size", "mean_time"] {
                return Err(err(format!("expected header `size,mean_time`, found `{l}`")));
            }
            header_seen = true;
            continue;
        }
        if fields.len() != 2 {
            return Err(err(format!("expected 2 fields, found {}", fields.len())));
        }
        let parse = |s: &str, what: &str| -> Result<f64> {
            let v: f64 = s.parse().map_err(|_| err(format!("{what} `{s}` is not a number")))?;
            if !v.is_finite() {
                return Err(err(format!("{what} `{s}` is not finite")));
            }
            Ok(v)
        };
        let size = parse(fields[0], "size")?;
        let time = parse(fields[1], "mean_time")?;
        if size <= 0.0 {
            return Err(err(format!("size must be positive, found {size}")));
        }
        rows.push((size, time));
    }
    if !header_seen {
        return Err(HarnessError::Parse { path: path.to_path_buf(), line: 0, message: "missing header".into() });
    }
    Ok(rows)
}

fn trace_kind_name(k: TraceKind) -> &'static str {
    match k {
        TraceKind::Arrival => "arrival",
        TraceKind::Dispatch => "dispatch",
        TraceKind::Completion => "completion",
        TraceKind::WorkerReady => "worker_ready",
        TraceKind::WorkerExit => "worker_exit",
        TraceKind::ScaleUp => "scale_up",
        TraceKind::ScaleDown => "scale_down",
    }
}

pub fn write_trace<W: Write>(out: W, events: &[TraceEvent]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["time", "event_kind", "task_id", "worker_id"])?;
    let opt = |v: Option<u64>| v.map(|x| x.to_string()).unwrap_or_default();
    for e in events {
        w.write_record([e.time.to_string(), trace_kind_name(e.kind).into(), opt(e.task_id), opt(e.worker_id)])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_training_curve<W: Write>(out: W, records: &[TrainingRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(["episode", "final_qos", "max_workers", "scaling_actions", "total_reward", "epsilon", "steps"])?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_training_curve<R: Read>(path: &Path, input: R) -> Result<Vec<TrainingRecord>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|row| row.map_err(|e| parse_error(path, e))).collect()
}

/// One aggregate row per policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub policy: String,
    pub episodes: usize,
    pub final_qos_mean: f64,
    pub final_qos_std: f64,
    pub mean_workers_mean: f64,
    pub mean_workers_std: f64,
    pub max_workers_mean: f64,
    pub max_workers_std: f64,
    pub scaling_actions_mean: f64,
    pub scaling_actions_std: f64,
    pub noop_actions_mean: f64,
    pub noop_actions_std: f64,
    pub total_reward_mean: f64,
    pub total_reward_std: f64,
    pub cost_paygo_mean: f64,
    pub cost_paygo_std: f64,
    pub cost_sub_mean: f64,
    pub cost_sub_std: f64,
}

impl ComparisonRow {
    pub fn new(policy: &str, a: &AggregateSummary) -> Self {
        ComparisonRow {
            policy: policy.into(),
            episodes: a.episodes,
            final_qos_mean: a.final_qos.mean,
            final_qos_std: a.final_qos.std,
            mean_workers_mean: a.n_mean.mean,
            mean_workers_std: a.n_mean.std,
            max_workers_mean: a.n_max.mean,
            max_workers_std: a.n_max.std,
            scaling_actions_mean: a.n_scale.mean,
            scaling_actions_std: a.n_scale.std,
            noop_actions_mean: a.no_ops.mean,
            noop_actions_std: a.no_ops.std,
            total_reward_mean: a.total_reward.mean,
            total_reward_std: a.total_reward.std,
            cost_paygo_mean: a.cost_paygo.mean,
            cost_paygo_std: a.cost_paygo.std,
            cost_sub_mean: a.cost_sub.mean,
            cost_sub_std: a.cost_sub.std,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub policy: String,
    pub phase_index: usize,
    pub qos_mean: Option<f64>,
    pub qos_std: Option<f64>,
    pub workers_mean: Option<f64>,
    pub workers_std: Option<f64>,
}

pub fn phase_rows(policy: &str, a: &AggregateSummary) -> Vec<PhaseRow> {
    let n = a.phase_qos.len().max(a.phase_workers.len());
    let split = |s: Option<&Option<Stat>>| s.copied().flatten().map_or((None, None), |s| (Some(s.mean), Some(s.std)));
    (0..n)
        .map(|p| {
            let (qos_mean, qos_std) = split(a.phase_qos.get(p));
            let (workers_mean, workers_std) = split(a.phase_workers.get(p));
            PhaseRow { policy: policy.into(), phase_index: p, qos_mean, qos_std, workers_mean, workers_std }
        })
        .collect()
}

fn write_rows<W: Write, T: Serialize>(out: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_comparison<W: Write>(out: W, rows: &[ComparisonRow]) -> Result<()> {
    write_rows(out, rows)
}

pub fn write_phase_comparison<W: Write>(out: W, rows: &[PhaseRow]) -> Result<()> {
    write_rows(out, rows)
}

pub fn read_comparison<R: Read>(path: &Path, input: R) -> Result<Vec<ComparisonRow>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|row| row.map_err(|e| parse_error(path, e))).collect()
}

pub fn write_json<W: Write, T: Serialize>(mut out: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n").map_err(|e| HarnessError::io("<json>", e))?;
    Ok(())
}
