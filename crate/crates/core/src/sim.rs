//! Virtual-time discrete-event simulator of the Emitter → Workers → Collector farm.
//!
//! Tasks flow `q_in → q_work → worker → q_res → q_out`. The emitter and the
//! collector are zero-delay stages; workers serve `q_work` FIFO and hold a task
//! for exactly its service time. New workers start one after another, each
//! after a uniform startup latency; scale-down drains the victim so in-flight
//! work is never lost.

use alloc::collections::{BTreeSet, BinaryHeap, VecDeque};
use alloc::vec::Vec;
use core::cmp::{Ordering, Reverse};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::types::{deadline_met, EpisodeConfig, LatencyRange, TaskSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum WorkerStatus {
    Starting,
    Idle,
    Busy { task: usize, until: f64 },
    /// Finishing its last task; accepts nothing new.
    Draining { task: usize, until: f64 },
    Exited,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkerState {
    pub worker_id: u64,
    pub status: WorkerStatus,
    pub ready_at: f64,
}

impl WorkerState {
    fn is_committed(&self) -> bool {
        matches!(self.status, WorkerStatus::Starting | WorkerStatus::Idle | WorkerStatus::Busy { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventKind {
    Completion,
    Arrival,
    WorkerReady,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Event {
    time: f64,
    kind: EventKind,
    /// Task id for completions and arrivals, worker id for readiness.
    id: u64,
    /// Task slot or worker slot.
    slot: usize,
}

impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.kind.cmp(&other.kind))
            .then(self.id.cmp(&other.id))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    Arrival,
    Dispatch,
    Completion,
    WorkerReady,
    WorkerExit,
    ScaleUp,
    ScaleDown,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub time: f64,
    pub kind: TraceKind,
    pub task_id: Option<u64>,
    pub worker_id: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompletionRecord {
    pub task_id: u64,
    pub service: f64,
    pub latency: f64,
    pub completed_at: f64,
    pub met: bool,
}

/// What happened during one `advance` window.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StepStats {
    pub arrived: usize,
    pub completed: usize,
    pub hits: usize,
    pub completions: Vec<CompletionRecord>,
    pub workers_effective: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub clock: f64,
    pub q_in: usize,
    pub q_work: usize,
    pub q_res: usize,
    pub q_out: usize,
    /// Idle plus busy, excluding starting and draining workers.
    pub effective_workers: usize,
    pub idle: usize,
    pub busy: usize,
    pub starting: usize,
    pub draining: usize,
    pub enqueued_total: u64,
    pub completed_total: u64,
}

impl Snapshot {
    /// Workers currently paid for and not on their way out.
    pub fn committed_workers(&self) -> usize {
        self.effective_workers + self.starting
    }

    pub fn conservation_holds(&self) -> bool {
        self.enqueued_total == self.q_work as u64 + (self.busy + self.draining) as u64 + self.completed_total
    }
}

#[derive(Debug, Clone)]
pub struct FarmSim {
    clock: f64,
    tasks: Vec<TaskSpec>,
    ids: BTreeSet<u64>,
    q_in: VecDeque<usize>,
    q_work: VecDeque<usize>,
    q_res: VecDeque<usize>,
    q_out: VecDeque<usize>,
    workers: Vec<WorkerState>,
    events: BinaryHeap<Reverse<Event>>,
    enqueued_total: u64,
    completed_total: u64,
    completion_times: Vec<Option<f64>>,
    latency: LatencyRange,
    n_min: u32,
    n_max: u32,
    rng: SimRng,
    trace: Option<Vec<TraceEvent>>,
}

impl FarmSim {
    /// Fresh farm at `clock = 0` with `n_init` workers, starting sequentially
    /// unless `warm_start`.
    pub fn new(config: &EpisodeConfig, rng: SimRng) -> Result<Self> {
        config.validate()?;
        let mut sim = FarmSim {
            clock: 0.0,
            tasks: Vec::new(),
            ids: BTreeSet::new(),
            q_in: VecDeque::new(),
            q_work: VecDeque::new(),
            q_res: VecDeque::new(),
            q_out: VecDeque::new(),
            workers: Vec::new(),
            events: BinaryHeap::new(),
            enqueued_total: 0,
            completed_total: 0,
            completion_times: Vec::new(),
            latency: config.scale_up_latency,
            n_min: config.n_min,
            n_max: config.n_max,
            rng,
            trace: None,
        };
        for _ in 0..config.n_init {
            if config.warm_start {
                let id = sim.workers.len() as u64;
                sim.workers.push(WorkerState { worker_id: id, status: WorkerStatus::Idle, ready_at: 0.0 });
                sim.record(TraceKind::WorkerReady, None, Some(id));
            } else {
                sim.start_worker();
            }
        }
        Ok(sim)
    }

    /// Records every event into an in-memory trace from now on.
    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    pub fn trace(&self) -> &[TraceEvent] {
        self.trace.as_deref().unwrap_or(&[])
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn workers(&self) -> &[WorkerState] {
        &self.workers
    }

    pub fn tasks(&self) -> &[TaskSpec] {
        &self.tasks
    }

    /// Completion instant of each injected task, in injection order.
    pub fn completion_times(&self) -> &[Option<f64>] {
        &self.completion_times
    }

    pub fn injected(&self) -> usize {
        self.tasks.len()
    }

    pub fn enqueued_total(&self) -> u64 {
        self.enqueued_total
    }

    pub fn completed_total(&self) -> u64 {
        self.completed_total
    }

    pub fn has_pending_events(&self) -> bool {
        !self.events.is_empty()
    }

    fn record(&mut self, kind: TraceKind, task_id: Option<u64>, worker_id: Option<u64>) {
        let time = self.clock;
        if let Some(t) = self.trace.as_mut() {
            t.push(TraceEvent { time, kind, task_id, worker_id });
        }
    }

    fn draw_latency(&mut self) -> f64 {
        let LatencyRange { lo, hi } = self.latency;
        if hi > lo {
            self.rng.random_range(lo..=hi)
        } else {
            lo
        }
    }

    /// Latest readiness instant among workers still starting.
    fn last_pending_ready(&self) -> Option<f64> {
        self.workers
            .iter()
            .filter(|w| w.status == WorkerStatus::Starting)
            .map(|w| w.ready_at)
            .reduce(f64::max)
    }

    fn start_worker(&mut self) -> u64 {
        let base = self.last_pending_ready().unwrap_or(self.clock).max(self.clock);
        let ready_at = base + self.draw_latency();
        let id = self.workers.len() as u64;
        let slot = self.workers.len();
        let status = if ready_at <= self.clock { WorkerStatus::Idle } else { WorkerStatus::Starting };
        self.workers.push(WorkerState { worker_id: id, status, ready_at });
        if status == WorkerStatus::Starting {
            self.events.push(Reverse(Event { time: ready_at, kind: EventKind::WorkerReady, id, slot }));
        }
        self.record(TraceKind::ScaleUp, None, Some(id));
        if status == WorkerStatus::Idle {
            self.record(TraceKind::WorkerReady, None, Some(id));
        }
        id
    }

    /// Schedules arrival events for `tasks` (which must be sorted by arrival).
    pub fn inject_tasks(&mut self, tasks: &[TaskSpec]) -> Result<()> {
        if tasks.windows(2).any(|w| w[0].arrival_time > w[1].arrival_time) {
            return Err(Error::InvalidArgument("tasks must be sorted by arrival time".into()));
        }
        let mut fresh = BTreeSet::new();
        for t in tasks {
            if self.ids.contains(&t.task_id) || !fresh.insert(t.task_id) {
                return Err(Error::InvalidArgument(alloc::format!("duplicate task id {}", t.task_id)));
            }
            if !(t.service_time > 0.0) {
                return Err(Error::InvalidArgument(alloc::format!("task {} has no service time", t.task_id)));
            }
        }
        for t in tasks {
            let slot = self.tasks.len();
            self.ids.insert(t.task_id);
            self.tasks.push(*t);
            self.completion_times.push(None);
            self.events.push(Reverse(Event {
                time: t.arrival_time.max(self.clock),
                kind: EventKind::Arrival,
                id: t.task_id,
                slot,
            }));
        }
        Ok(())
    }

    /// Executes every event up to and including `clock + dt`.
    pub fn advance(&mut self, dt: f64) -> StepStats {
        let mut stats = StepStats::default();
        if !(dt > 0.0) {
            stats.workers_effective = self.snapshot().effective_workers;
            return stats;
        }
        // The downstream sink consumed whatever the collector emitted last window.
        self.q_out.clear();
        let end = self.clock + dt;
        self.pump(end, &mut stats);
        self.clock = end;
        stats.workers_effective = self.snapshot().effective_workers;
        stats
    }

    /// Runs until no events remain or `limit` virtual seconds have elapsed.
    pub fn run_to_completion(&mut self, limit: f64) -> StepStats {
        let mut stats = StepStats::default();
        let stop = self.clock + limit;
        self.pump(stop, &mut stats);
        stats.workers_effective = self.snapshot().effective_workers;
        stats
    }

    fn pump(&mut self, end: f64, stats: &mut StepStats) {
        self.dispatch();
        while let Some(Reverse(ev)) = self.events.peek().copied() {
            if ev.time > end {
                break;
            }
            self.events.pop();
            self.clock = self.clock.max(ev.time);
            self.handle(ev, stats);
            self.dispatch();
        }
    }

    fn handle(&mut self, ev: Event, stats: &mut StepStats) {
        match ev.kind {
            EventKind::Arrival => {
                self.q_in.push_back(ev.slot);
                self.record(TraceKind::Arrival, Some(ev.id), None);
                // Emitter forwards immediately.
                while let Some(slot) = self.q_in.pop_front() {
                    self.q_work.push_back(slot);
                    self.enqueued_total += 1;
                    stats.arrived += 1;
                }
            }
            EventKind::WorkerReady => {
                let w = &mut self.workers[ev.slot];
                if w.status == WorkerStatus::Starting {
                    w.status = WorkerStatus::Idle;
                    self.record(TraceKind::WorkerReady, None, Some(ev.id));
                }
            }
            EventKind::Completion => {
                let worker = &mut self.workers[ev.slot];
                let task_slot = match worker.status {
                    WorkerStatus::Busy { task, .. } => {
                        worker.status = WorkerStatus::Idle;
                        task
                    }
                    WorkerStatus::Draining { task, .. } => {
                        worker.status = WorkerStatus::Exited;
                        task
                    }
                    _ => unreachable!("completion for a worker without a task"),
                };
                let exited = worker.status == WorkerStatus::Exited;
                let worker_id = worker.worker_id;
                let task = self.tasks[task_slot];
                self.q_res.push_back(task_slot);
                self.record(TraceKind::Completion, Some(task.task_id), Some(worker_id));
                if exited {
                    self.record(TraceKind::WorkerExit, None, Some(worker_id));
                }
                // Collector forwards immediately.
                while let Some(slot) = self.q_res.pop_front() {
                    self.q_out.push_back(slot);
                }
                self.completed_total += 1;
                self.completion_times[task_slot] = Some(self.clock);
                let met = deadline_met(task.arrival_time, self.clock.max(task.arrival_time), task.deadline)
                    .unwrap_or(false);
                stats.completed += 1;
                if met {
                    stats.hits += 1;
                }
                stats.completions.push(CompletionRecord {
                    task_id: task.task_id,
                    service: task.service_time,
                    latency: self.clock - task.arrival_time,
                    completed_at: self.clock,
                    met,
                });
            }
        }
    }

    /// Idle workers, lowest id first, pull the head of the worker queue.
    fn dispatch(&mut self) {
        if self.q_work.is_empty() {
            return;
        }
        for slot in 0..self.workers.len() {
            if self.workers[slot].status != WorkerStatus::Idle {
                continue;
            }
            let Some(task_slot) = self.q_work.pop_front() else {
                break;
            };
            let task = self.tasks[task_slot];
            let until = self.clock + task.service_time;
            let w = &mut self.workers[slot];
            w.status = WorkerStatus::Busy { task: task_slot, until };
            let worker_id = w.worker_id;
            self.events.push(Reverse(Event { time: until, kind: EventKind::Completion, id: task.task_id, slot }));
            self.record(TraceKind::Dispatch, Some(task.task_id), Some(worker_id));
        }
    }

    /// Requests a pool change of `delta` workers and returns the change that
    /// was actually applied after clipping to `[n_min, n_max]`.
    pub fn request_scale(&mut self, delta: i32) -> i32 {
        let committed = self.workers.iter().filter(|w| w.is_committed()).count() as i64;
        let target = (committed + delta as i64).clamp(self.n_min as i64, self.n_max as i64);
        let applied = target - committed;
        if applied > 0 {
            for _ in 0..applied {
                self.start_worker();
            }
            self.dispatch();
        } else {
            for _ in 0..(-applied) {
                self.retire_latest();
            }
        }
        applied as i32
    }

    /// Most recently started committed worker leaves: a pending start is
    /// cancelled, an idle worker exits, a busy one drains.
    fn retire_latest(&mut self) {
        let Some(slot) = self.workers.iter().rposition(|w| w.is_committed()) else {
            return;
        };
        let id = self.workers[slot].worker_id;
        match self.workers[slot].status {
            WorkerStatus::Starting | WorkerStatus::Idle => {
                self.workers[slot].status = WorkerStatus::Exited;
                self.record(TraceKind::ScaleDown, None, Some(id));
                self.record(TraceKind::WorkerExit, None, Some(id));
            }
            WorkerStatus::Busy { task, until } => {
                self.workers[slot].status = WorkerStatus::Draining { task, until };
                self.record(TraceKind::ScaleDown, None, Some(id));
            }
            _ => {}
        }
    }

    pub fn snapshot(&self) -> Snapshot {
        let mut s = Snapshot {
            clock: self.clock,
            q_in: self.q_in.len(),
            q_work: self.q_work.len(),
            q_res: self.q_res.len(),
            q_out: self.q_out.len(),
            effective_workers: 0,
            idle: 0,
            busy: 0,
            starting: 0,
            draining: 0,
            enqueued_total: self.enqueued_total,
            completed_total: self.completed_total,
        };
        for w in &self.workers {
            match w.status {
                WorkerStatus::Starting => s.starting += 1,
                WorkerStatus::Idle => s.idle += 1,
                WorkerStatus::Busy { .. } => s.busy += 1,
                WorkerStatus::Draining { .. } => s.draining += 1,
                WorkerStatus::Exited => {}
            }
        }
        s.effective_workers = s.idle + s.busy;
        s
    }

    /// True when every injected task has arrived and been served.
    pub fn is_drained(&self) -> bool {
        let s = self.snapshot();
        s.enqueued_total as usize == self.tasks.len()
            && s.q_in + s.q_work + s.q_res == 0
            && s.busy + s.draining == 0
    }
}

/// Outcome of a fixed-pool run over a whole workload.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StaticRun {
    pub workers: u32,
    /// Last completion minus first arrival.
    pub runtime: f64,
    /// Readiness instant of the last worker.
    pub init_overhead: f64,
    pub speedup: f64,
}

fn fixed_pool_run(config: &EpisodeConfig, workload: &[TaskSpec], n: u32, rng: SimRng) -> Result<(f64, f64)> {
    let cfg = EpisodeConfig { n_min: n, n_max: n, n_init: n, ..config.clone() };
    let mut sim = FarmSim::new(&cfg, rng)?;
    let init_overhead = sim.workers.iter().map(|w| w.ready_at).fold(0.0, f64::max);
    sim.inject_tasks(workload)?;
    sim.run_to_completion(f64::INFINITY);
    let first = workload.first().map(|t| t.arrival_time).unwrap_or(0.0);
    let last = sim.completion_times.iter().flatten().cloned().fold(first, f64::max);
    Ok((last - first, init_overhead))
}

/// Runs the workload on a fixed pool of `n_fixed` workers and on a single
/// worker, reporting runtime, initialization overhead and speedup.
pub fn static_run(config: &EpisodeConfig, workload: &[TaskSpec], n_fixed: u32, rng: SimRng) -> Result<StaticRun> {
    if n_fixed == 0 {
        return Err(Error::InvalidArgument("n_fixed must be at least 1".into()));
    }
    let (runtime, init_overhead) = fixed_pool_run(config, workload, n_fixed, rng.clone())?;
    let speedup = if n_fixed == 1 {
        1.0
    } else {
        let (single, _) = fixed_pool_run(config, workload, 1, rng)?;
        if runtime > 0.0 {
            single / runtime
        } else {
            1.0
        }
    };
    Ok(StaticRun { workers: n_fixed, runtime, init_overhead, speedup })
}
