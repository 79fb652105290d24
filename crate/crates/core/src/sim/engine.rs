//! The event loop: arrivals, batch completions, and flush timers drive the
//! scheduler; a parametric latency model stands in for model inference.
//!
//! All event times are quantized to whole microseconds and ties break on a
//! fixed kind order plus an insertion sequence number, so a run is a pure
//! function of (workload, config, profile).

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};

use thiserror::Error;

use crate::sched::{BatchPlan, ExecutorKind, Scheduler, SchedulerConfig, StepContext, Task};
use crate::util::{quantize_us, us_to_seconds};

use super::profile::ModelProfile;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("workload arrivals must be sorted by time")]
    UnsortedArrivals,
    #[error("horizon {horizon} lies before the last arrival {last_arrival}")]
    HorizonBeforeLastArrival { horizon: f64, last_arrival: f64 },
}

/// Engine knobs independent of the scheduling policy.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SimConfig {
    /// Wait interval in seconds; bounds how long a partial staging set may
    /// hold before the flush rule dispatches it.
    pub xi: f64,
    /// Simulated end of the run; tasks not finished by then are flagged.
    pub horizon: f64,
    /// Constant per-task scheduling cost added between arrival and
    /// enqueue. Zero by default.
    pub decision_overhead: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            xi: 2.0,
            horizon: 3600.0,
            decision_overhead: 0.0,
        }
    }
}

/// Single-task latency: base plus per-token decode cost, scaled by the
/// profile's slowdown when run on a CPU lane.
pub fn exec_latency_single(task: &Task, executor: ExecutorKind, profile: &ModelProfile) -> f64 {
    let gpu = profile.base_latency_gpu
        + profile.output_token_latency * task.reveal_true_output_len() as f64;
    match executor {
        ExecutorKind::Gpu => gpu,
        ExecutorKind::Cpu => profile.cpu_slowdown * gpu,
    }
}

/// GPU batch latency: setup plus the longest member's decode time. Batched
/// decoding runs lock-step until the longest sequence finishes, so every
/// member completes at batch end.
pub fn exec_latency_batch(tasks: &[Task], profile: &ModelProfile) -> f64 {
    debug_assert!(!tasks.is_empty());
    let max_len = tasks
        .iter()
        .map(|t| t.reveal_true_output_len())
        .max()
        .unwrap_or(0);
    profile.batch_setup + profile.base_latency_gpu + profile.output_token_latency * max_len as f64
}

/// One line of the per-task log.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskLogRow {
    pub task_id: u64,
    pub arrival: f64,
    pub deadline: f64,
    pub uncertainty: f64,
    pub priority: f64,
    pub executor: Option<ExecutorKind>,
    pub batch_id: Option<u64>,
    pub start: Option<f64>,
    pub end: Option<f64>,
    pub response: Option<f64>,
    pub missed: bool,
}

/// Everything a run produces: the per-task log plus executor accounting.
#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub rows: Vec<TaskLogRow>,
    pub gpu_busy: f64,
    pub cpu_busy: f64,
    pub cpu_lanes: usize,
    /// First arrival to last completion (or the horizon when tasks remain).
    pub makespan: f64,
    pub first_arrival: f64,
    pub horizon_exceeded: bool,
    pub unfinished: usize,
}

#[derive(Debug)]
enum EventKind {
    BatchDone { gpu: bool, lane: usize },
    Arrival(Box<Task>),
    Flush,
}

impl EventKind {
    fn rank(&self) -> u8 {
        match self {
            EventKind::BatchDone { .. } => 0,
            EventKind::Arrival(_) => 1,
            EventKind::Flush => 2,
        }
    }
}

struct TimedEvent {
    time_us: u64,
    rank: u8,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for TimedEvent {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for TimedEvent {}
impl PartialOrd for TimedEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for TimedEvent {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: the binary heap is a max-heap, we want earliest first.
        other
            .time_us
            .cmp(&self.time_us)
            .then_with(|| other.rank.cmp(&self.rank))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

struct RunningBatch {
    plan: BatchPlan,
    start: f64,
}

struct Engine<'a> {
    profile: &'a ModelProfile,
    sim: &'a SimConfig,
    scheduler: Scheduler,
    events: BinaryHeap<TimedEvent>,
    seq: u64,
    gpu: Option<RunningBatch>,
    lanes: Vec<Option<RunningBatch>>,
    cpu_ready: VecDeque<BatchPlan>,
    pending_arrivals: VecDeque<f64>,
    flush_scheduled: Option<u64>,
    rows: Vec<TaskLogRow>,
    gpu_busy: f64,
    cpu_busy: f64,
}

/// Runs one simulation to the horizon. Arrivals must be sorted; the
/// horizon must not precede the last arrival. Unfinished tasks are
/// reported in the outcome rather than treated as fatal.
pub fn run_sim(
    tasks: Vec<Task>,
    cfg: &SchedulerConfig,
    profile: &ModelProfile,
    sim: &SimConfig,
) -> Result<SimOutcome, SimError> {
    if tasks.windows(2).any(|w| w[0].arrival > w[1].arrival) {
        return Err(SimError::UnsortedArrivals);
    }
    if let Some(last) = tasks.last() {
        if sim.horizon < last.arrival {
            return Err(SimError::HorizonBeforeLastArrival {
                horizon: sim.horizon,
                last_arrival: last.arrival,
            });
        }
    }

    let first_arrival = tasks.first().map(|t| t.arrival).unwrap_or(0.0);
    let mut engine = Engine {
        profile,
        sim,
        scheduler: Scheduler::new(*cfg, profile.clone()),
        events: BinaryHeap::new(),
        seq: 0,
        gpu: None,
        lanes: (0..profile.cpu_lanes).map(|_| None).collect(),
        cpu_ready: VecDeque::new(),
        pending_arrivals: VecDeque::new(),
        flush_scheduled: None,
        rows: Vec::new(),
        gpu_busy: 0.0,
        cpu_busy: 0.0,
    };

    for task in tasks {
        let enqueue_at = task.arrival + sim.decision_overhead;
        engine.pending_arrivals.push_back(enqueue_at);
        engine.schedule(enqueue_at, EventKind::Arrival(Box::new(task)));
    }

    engine.run();
    Ok(engine.finish(first_arrival))
}

impl<'a> Engine<'a> {
    fn schedule(&mut self, time: f64, kind: EventKind) {
        let rank = kind.rank();
        self.events.push(TimedEvent {
            time_us: quantize_us(time),
            rank,
            seq: self.seq,
            kind,
        });
        self.seq += 1;
    }

    fn run(&mut self) {
        let horizon_us = quantize_us(self.sim.horizon);
        while let Some(event) = self.events.pop() {
            if event.time_us > horizon_us {
                break;
            }
            let now_us = event.time_us;
            let now = us_to_seconds(now_us);
            self.handle(event.kind, now);
            // Drain every event at this timestamp before dispatching, so
            // simultaneous arrivals are prioritized together.
            while self
                .events
                .peek()
                .is_some_and(|e| e.time_us == now_us)
            {
                let kind = self.events.pop().unwrap().kind;
                self.handle(kind, now);
            }
            self.dispatch(now);
        }
    }

    fn handle(&mut self, kind: EventKind, now: f64) {
        match kind {
            EventKind::Arrival(task) => {
                self.pending_arrivals.pop_front();
                self.scheduler.enqueue(*task);
            }
            EventKind::BatchDone { gpu: true, .. } => {
                let running = self.gpu.take().expect("gpu completion without a batch");
                self.gpu_busy += now - running.start;
                self.complete(running, now);
            }
            EventKind::BatchDone { gpu: false, lane } => {
                let running = self.lanes[lane].take().expect("cpu completion without a task");
                self.cpu_busy += now - running.start;
                self.complete(running, now);
            }
            EventKind::Flush => {
                self.flush_scheduled = None;
            }
        }
    }

    fn complete(&mut self, running: RunningBatch, now: f64) {
        let batch_id = running.plan.batch_id;
        let executor = running.plan.executor;
        for task in running.plan.tasks {
            self.rows.push(TaskLogRow {
                task_id: task.id,
                arrival: task.arrival,
                deadline: task.deadline,
                uncertainty: task.uncertainty.value,
                priority: task.priority,
                executor: Some(executor),
                batch_id: Some(batch_id),
                start: Some(running.start),
                end: Some(now),
                response: Some(now - task.arrival),
                missed: now > task.deadline,
            });
        }
    }

    fn dispatch(&mut self, now: f64) {
        loop {
            let ctx = StepContext {
                gpu_available: self.gpu.is_none(),
                next_arrival: self.pending_arrivals.front().copied(),
                xi: self.sim.xi,
            };
            let plans = self.scheduler.step(now, &ctx);
            let formed = !plans.is_empty();
            for plan in plans {
                match plan.executor {
                    ExecutorKind::Gpu => self.start_gpu(plan, now),
                    ExecutorKind::Cpu => self.cpu_ready.push_back(plan),
                }
            }
            self.fill_cpu_lanes(now);
            if !formed {
                break;
            }
        }
        // Keep a flush timer armed for the oldest staged task. Timers are
        // only placed strictly in the future; once the wait has elapsed the
        // flush condition is latched and the next executor event picks it up.
        if let Some(since) = self.scheduler.staged_since() {
            let due = since + self.sim.xi;
            let due_us = quantize_us(due);
            if due_us > quantize_us(now) && self.flush_scheduled != Some(due_us) {
                self.schedule(due, EventKind::Flush);
                self.flush_scheduled = Some(due_us);
            }
        }
    }

    fn fill_cpu_lanes(&mut self, now: f64) {
        for lane in 0..self.lanes.len() {
            if self.lanes[lane].is_none() {
                let Some(plan) = self.cpu_ready.pop_front() else {
                    break;
                };
                debug_assert_eq!(plan.tasks.len(), 1);
                let latency = exec_latency_single(&plan.tasks[0], ExecutorKind::Cpu, self.profile);
                self.schedule(now + latency, EventKind::BatchDone { gpu: false, lane });
                self.lanes[lane] = Some(RunningBatch { plan, start: now });
            }
        }
    }

    fn start_gpu(&mut self, plan: BatchPlan, now: f64) {
        debug_assert!(self.gpu.is_none(), "gpu batches must not overlap");
        let latency = exec_latency_batch(&plan.tasks, self.profile);
        self.schedule(now + latency, EventKind::BatchDone { gpu: true, lane: 0 });
        self.gpu = Some(RunningBatch { plan, start: now });
    }

    fn finish(mut self, first_arrival: f64) -> SimOutcome {
        let horizon = self.sim.horizon;
        let mut unfinished = Vec::new();

        if let Some(running) = self.gpu.take() {
            self.gpu_busy += (horizon - running.start).max(0.0);
            unfinished.push(running);
        }
        for lane in &mut self.lanes {
            if let Some(running) = lane.take() {
                self.cpu_busy += (horizon - running.start).max(0.0);
                unfinished.push(running);
            }
        }
        let mut unfinished_count = 0;
        for running in unfinished {
            unfinished_count += running.plan.tasks.len();
            let executor = running.plan.executor;
            let batch_id = running.plan.batch_id;
            for task in running.plan.tasks {
                self.rows.push(TaskLogRow {
                    task_id: task.id,
                    arrival: task.arrival,
                    deadline: task.deadline,
                    uncertainty: task.uncertainty.value,
                    priority: task.priority,
                    executor: Some(executor),
                    batch_id: Some(batch_id),
                    start: Some(running.start),
                    end: None,
                    response: None,
                    missed: true,
                });
            }
        }
        let never_started = self
            .cpu_ready
            .drain(..)
            .flat_map(|plan| plan.tasks)
            .chain(self.scheduler.drain_pending());
        for task in never_started {
            unfinished_count += 1;
            self.rows.push(TaskLogRow {
                task_id: task.id,
                arrival: task.arrival,
                deadline: task.deadline,
                uncertainty: task.uncertainty.value,
                priority: task.priority,
                executor: None,
                batch_id: None,
                start: None,
                end: None,
                response: None,
                missed: true,
            });
        }

        self.rows.sort_by_key(|r| r.task_id);
        let last_end = self
            .rows
            .iter()
            .filter_map(|r| r.end)
            .fold(first_arrival, f64::max);
        let makespan = if unfinished_count > 0 {
            (horizon - first_arrival).max(0.0)
        } else {
            last_end - first_arrival
        };
        SimOutcome {
            rows: self.rows,
            gpu_busy: self.gpu_busy,
            cpu_busy: self.cpu_busy,
            cpu_lanes: self.lanes.len(),
            makespan,
            first_arrival,
            horizon_exceeded: unfinished_count > 0,
            unfinished: unfinished_count,
        }
    }
}

/// Busy fractions per executor class: GPU busy time over the makespan, and
/// CPU busy time over lanes x makespan.
pub fn utilization(outcome: &SimOutcome) -> (f64, f64) {
    if outcome.makespan <= 0.0 {
        return (0.0, 0.0);
    }
    (
        outcome.gpu_busy / outcome.makespan,
        outcome.cpu_busy / (outcome.cpu_lanes as f64 * outcome.makespan),
    )
}
