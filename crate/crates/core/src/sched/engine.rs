//! Staging engine: pops tasks in priority order, routes high-uncertainty
//! tasks to CPU plans, accumulates the rest into a staging set, and forms
//! GPU batches by consolidation (UP) or fixed-size batching (baselines).

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{
    consolidate, decision_scope, assign_priority, ExecutorKind, Policy, SchedulerConfig, Task,
    TaskState,
};
use crate::sim::ModelProfile;
use crate::util::robust_floor;

/// One dispatchable unit: a GPU batch (1..=capacity tasks) or a CPU
/// singleton.
#[derive(Debug, Clone)]
pub struct BatchPlan {
    pub batch_id: u64,
    pub executor: ExecutorKind,
    pub tasks: Vec<Task>,
    pub formed_at: f64,
}

impl BatchPlan {
    pub fn task_ids(&self) -> Vec<u64> {
        self.tasks.iter().map(|t| t.id).collect()
    }
}

/// Executor-side facts the scheduler needs for one step.
#[derive(Debug, Clone, Copy)]
pub struct StepContext {
    /// GPU is idle and no formed batch is waiting to start.
    pub gpu_available: bool,
    /// Next workload arrival, if any remain.
    pub next_arrival: Option<f64>,
    /// Wait interval: the flush rule fires once no arrival is pending
    /// within this window, or once the oldest staged task has waited it out.
    pub xi: f64,
}

struct QueueEntry {
    task: Task,
}

struct StagedEntry {
    task: Task,
    /// When this task first entered staging; preserved across
    /// consolidation evictions so the age-based rules can bound how long
    /// any task lingers behind fresher arrivals.
    first_staged: f64,
    /// True when a consolidation cut has already returned this task to
    /// the queue at least once.
    evicted: bool,
}

impl PartialEq for QueueEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for QueueEntry {}
impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for QueueEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Max-heap: higher priority first, then earlier arrival, lower id.
        self.task
            .priority
            .partial_cmp(&other.task.priority)
            .expect("priorities are finite")
            .then_with(|| {
                other
                    .task
                    .arrival
                    .partial_cmp(&self.task.arrival)
                    .expect("arrivals are finite")
            })
            .then_with(|| other.task.id.cmp(&self.task.id))
    }
}

pub struct Scheduler {
    cfg: SchedulerConfig,
    profile: ModelProfile,
    queue: BinaryHeap<QueueEntry>,
    staged: Vec<StagedEntry>,
    /// First-staging times of tasks evicted back to the queue.
    eviction_ages: std::collections::BTreeMap<u64, f64>,
    next_batch_id: u64,
}

impl Scheduler {
    pub fn new(cfg: SchedulerConfig, profile: ModelProfile) -> Scheduler {
        cfg.validate().expect("scheduler config must be valid");
        profile.validate().expect("model profile must be valid");
        Scheduler {
            cfg,
            profile,
            queue: BinaryHeap::new(),
            staged: Vec::new(),
            eviction_ages: std::collections::BTreeMap::new(),
            next_batch_id: 0,
        }
    }

    pub fn config(&self) -> &SchedulerConfig {
        &self.cfg
    }

    pub fn profile(&self) -> &ModelProfile {
        &self.profile
    }

    /// Staging threshold: floor(b * capacity) under UP, the plain batch
    /// capacity for fixed-size baselines.
    pub fn staging_threshold(&self) -> usize {
        match self.cfg.policy {
            Policy::Up => robust_floor(self.cfg.b * self.profile.batch_capacity as f64).max(1),
            _ => self.profile.batch_capacity,
        }
    }

    /// Computes the task's priority under the configured policy and queues it.
    pub fn enqueue(&mut self, mut task: Task) {
        task.priority = assign_priority(&task, &self.cfg, &self.profile);
        assert!(task.priority.is_finite(), "priority must be finite");
        task.state = TaskState::Queued;
        self.queue.push(QueueEntry { task });
    }

    pub fn queued_len(&self) -> usize {
        self.queue.len()
    }

    pub fn staged_len(&self) -> usize {
        self.staged.len()
    }

    /// Earliest first-staging time over the current staging set.
    pub fn staged_since(&self) -> Option<f64> {
        self.staged
            .iter()
            .map(|e| e.first_staged)
            .min_by(|a, b| a.partial_cmp(b).unwrap())
    }

    pub fn is_drained(&self) -> bool {
        self.queue.is_empty() && self.staged.is_empty()
    }

    /// One scheduling opportunity: route, stage, and form at most one GPU
    /// batch (plus any number of CPU singletons).
    pub fn step(&mut self, now: f64, ctx: &StepContext) -> Vec<BatchPlan> {
        decision_scope(|| self.step_inner(now, ctx))
    }

    fn step_inner(&mut self, now: f64, ctx: &StepContext) -> Vec<BatchPlan> {
        let mut plans: Vec<BatchPlan> = Vec::new();
        let threshold = self.staging_threshold();
        let offloading = self.cfg.policy == Policy::Up;

        loop {
            while let Some(entry) = self.queue.peek() {
                if offloading && entry.task.uncertainty.value > self.profile.offload_threshold {
                    let mut task = self.queue.pop().unwrap().task;
                    task.state = TaskState::OffloadedCpu;
                    plans.push(BatchPlan {
                        batch_id: self.take_batch_id(),
                        executor: ExecutorKind::Cpu,
                        tasks: vec![task],
                        formed_at: now,
                    });
                } else if self.staged.len() < threshold {
                    let task = self.queue.pop().unwrap().task;
                    let evicted_at = self.eviction_ages.remove(&task.id);
                    self.staged.push(StagedEntry {
                        task,
                        first_staged: evicted_at.unwrap_or(now),
                        evicted: evicted_at.is_some(),
                    });
                } else {
                    break;
                }
            }

            let gpu_free = ctx.gpu_available
                && !plans.iter().any(|p| p.executor == ExecutorKind::Gpu);
            if gpu_free && !self.staged.is_empty() {
                // Rescue rule first: a task that a consolidation cut has
                // already sent back once and that has now waited out the
                // interval since it first staged dispatches as-is (staging
                // order, capacity-capped, no ratio test). Otherwise the
                // usual consolidated dispatch: full staging set, wait
                // interval elapsed, or an idle executor with no arrival due.
                if self.eviction_rescue_due(now, ctx.xi) {
                    let plan = self.form_aged_batch(now);
                    plans.push(plan);
                    continue;
                }
                // Partial flushes are a liveness device for quiet periods;
                // while the queue still holds tasks the staging set will
                // refill to the threshold, so only full sets dispatch.
                let end_of_queue = self.queue.is_empty();
                if self.staged.len() >= threshold
                    || (end_of_queue
                        && (self.pacing_flush_due(now, ctx.xi) || self.idle_flush_due(now, ctx)))
                {
                    let plan = self.form_consolidated_batch(now);
                    plans.push(plan);
                    continue;
                }
            }
            break;
        }
        plans
    }

    fn eviction_rescue_due(&self, now: f64, xi: f64) -> bool {
        self.staged
            .iter()
            .any(|e| e.evicted && now - e.first_staged >= xi - 1e-9)
    }

    fn pacing_flush_due(&self, now: f64, xi: f64) -> bool {
        self.staged_since()
            .is_some_and(|t0| now - t0 >= xi - 1e-9)
    }

    fn idle_flush_due(&self, now: f64, ctx: &StepContext) -> bool {
        match ctx.next_arrival {
            None => true,
            Some(t) => t - now >= ctx.xi - 1e-9,
        }
    }

    /// Eviction rescue: the staged set goes out in staging order, up to
    /// capacity, bypassing the ratio test, so a task can be cut at most a
    /// bounded number of times. Whatever does not fit stays staged with
    /// its age intact.
    fn form_aged_batch(&mut self, now: f64) -> BatchPlan {
        let take = self.staged.len().min(self.profile.batch_capacity);
        let mut batch: Vec<Task> = self
            .staged
            .drain(..take)
            .map(|entry| entry.task)
            .collect();
        for task in &mut batch {
            task.state = TaskState::BatchedGpu;
        }
        BatchPlan {
            batch_id: self.take_batch_id(),
            executor: ExecutorKind::Gpu,
            tasks: batch,
            formed_at: now,
        }
    }

    /// Threshold or idle-flush dispatch: consolidation under UP (evicted
    /// tasks return to the queue, keeping priority and staging age), plain
    /// fixed-size batching for the baselines.
    fn form_consolidated_batch(&mut self, now: f64) -> BatchPlan {
        let staged = std::mem::take(&mut self.staged);
        let ages: std::collections::BTreeMap<u64, f64> = staged
            .iter()
            .map(|entry| (entry.task.id, entry.first_staged))
            .collect();
        let tasks: Vec<Task> = staged.into_iter().map(|entry| entry.task).collect();
        let (mut batch, returned) = match self.cfg.policy {
            Policy::Up => consolidate(tasks, self.cfg.lambda, self.profile.batch_capacity),
            // Baselines batch the staged set as popped, already <= capacity.
            _ => (tasks, Vec::new()),
        };
        debug_assert!(!batch.is_empty() && batch.len() <= self.profile.batch_capacity);
        for task in returned {
            self.eviction_ages.insert(task.id, ages[&task.id]);
            self.queue.push(QueueEntry { task });
        }
        for task in &mut batch {
            task.state = TaskState::BatchedGpu;
        }
        BatchPlan {
            batch_id: self.take_batch_id(),
            executor: ExecutorKind::Gpu,
            tasks: batch,
            formed_at: now,
        }
    }

    fn take_batch_id(&mut self) -> u64 {
        let id = self.next_batch_id;
        self.next_batch_id += 1;
        id
    }

    /// Removes and returns everything still queued or staged; the simulator
    /// uses this to flag unfinished tasks at the horizon.
    pub fn drain_pending(&mut self) -> Vec<Task> {
        let mut out: Vec<Task> = std::mem::take(&mut self.staged)
            .into_iter()
            .map(|entry| entry.task)
            .collect();
        out.extend(self.queue.drain().map(|entry| entry.task));
        self.eviction_ages.clear();
        out
    }
}
