//! Trace-driven replay of a multi-DAG batch workload on a pooled cluster.
//!
//! A trace gives, per task, the cores it used, its memory share of one
//! machine, its runtime and its DAG's submission time. Each task gets a random
//! USL scaling curve anchored at that observation, which turns the trace into a
//! [`Problem`] whose options are core counts. The replay then fires a scheduler
//! every `interval` seconds, or early when the unplanned queue asks for more
//! than `queue_factor` times the free cores, and commits the returned start
//! times.

mod sim;
mod trace;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{Dag, InstanceType, Problem, ResourceId, Task};
use crate::predictor::{default_work, enumerate_options, fit_gamma, DemandRule, ObservedRun};

pub use sim::{
    compare, run_simulation, simulate, CdfPoint, Comparison, DagOutcome, SimConfig, SimOutcome, SimReport,
    SimScheduler, TaskRecord,
};
pub use trace::{
    load_trace, read_trace_csv, read_trace_jsonl, write_trace_csv, write_trace_jsonl, Trace, TraceDag, TraceTask,
};

pub const MEMORY_RESOURCE: &str = "cluster.memory_pct";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpec {
    pub machines: u32,
    pub cores_per_machine: u32,
    #[serde(default = "default_cpu_reduction")]
    pub cpu_reduction: f64,
    #[serde(default = "default_mem_reduction")]
    pub mem_reduction: f64,
}

fn default_cpu_reduction() -> f64 {
    0.2
}

fn default_mem_reduction() -> f64 {
    0.4
}

impl ClusterSpec {
    pub fn new(machines: u32, cores_per_machine: u32) -> Self {
        Self {
            machines,
            cores_per_machine,
            cpu_reduction: default_cpu_reduction(),
            mem_reduction: default_mem_reduction(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.machines == 0 || self.cores_per_machine == 0 {
            return Err(invalid("cluster needs at least one machine and one core per machine"));
        }
        for r in [self.cpu_reduction, self.mem_reduction] {
            if !(0.0..1.0).contains(&r) {
                return Err(invalid(format!("reduction {r} must lie in [0, 1)")));
            }
        }
        Ok(())
    }

    /// Usable cores of one machine after the reduction, floored.
    pub fn usable_cores_per_machine(&self) -> f64 {
        (f64::from(self.cores_per_machine) * (1.0 - self.cpu_reduction)).floor()
    }

    pub fn total_cores(&self) -> f64 {
        f64::from(self.machines) * self.usable_cores_per_machine()
    }

    /// Usable memory in percent of one machine, floored per machine.
    pub fn total_memory_pct(&self) -> f64 {
        f64::from(self.machines) * (100.0 * (1.0 - self.mem_reduction)).floor()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggerPolicy {
    pub interval: f64,
    pub queue_factor: f64,
}

impl Default for TriggerPolicy {
    fn default() -> Self {
        Self {
            interval: 900.0,
            queue_factor: 3.0,
        }
    }
}

impl TriggerPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.interval.is_finite()
            && self.interval > 0.0
            && self.queue_factor.is_finite()
            && self.queue_factor > 0.0)
        {
            return Err(invalid("trigger interval and queue factor must be positive"));
        }
        Ok(())
    }

    /// Early trigger rule: queued core demand above `queue_factor` times the
    /// currently free cores.
    pub fn queue_exceeded(&self, queued_cores: f64, free_cores: f64) -> bool {
        queued_cores > self.queue_factor * free_cores
    }
}

/// How trace tasks become configurable tasks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    /// Candidate core counts; each task's observed count is always added.
    pub node_counts: Vec<u32>,
    /// Contention and coherency are drawn uniformly from `[0, alpha_max)` and
    /// `[0, beta_max)`.
    pub alpha_max: f64,
    pub beta_max: f64,
    pub core_price_per_hour: f64,
    pub usl_seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            node_counts: vec![1, 2, 4, 8, 16],
            alpha_max: 0.5,
            beta_max: 0.05,
            core_price_per_hour: 0.048,
            usl_seed: 0,
        }
    }
}

/// The pseudo instance type whose nodes are single cores. Its memory figure
/// is nominal; trace memory is tracked on [`MEMORY_RESOURCE`].
pub fn core_instance(price_per_hour: f64) -> InstanceType {
    InstanceType::new("core", 1, 1.0, price_per_hour)
}

pub fn cores_resource() -> ResourceId {
    core_instance(0.0).pool_resource()
}

/// Turns a trace into a problem over all its DAGs, submit times kept. Each
/// task's initial option is its observed core count; options that cannot fit
/// the cluster are dropped.
pub fn synthesize_problem(trace: &Trace, cluster: &ClusterSpec, spec: &SynthSpec) -> Result<Problem> {
    cluster.validate()?;
    if trace.dags.is_empty() {
        return Err(invalid("trace has no tasks"));
    }
    if !(0.0..=1.0).contains(&spec.alpha_max) || !(0.0..=1.0).contains(&spec.beta_max) {
        return Err(invalid("alpha_max and beta_max must lie in [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.usl_seed);
    let inst = core_instance(spec.core_price_per_hour);
    let (cap_cores, cap_mem) = (cluster.total_cores(), cluster.total_memory_pct());
    let mut dags = Vec::with_capacity(trace.dags.len());
    for td in &trace.dags {
        let mut tasks = Vec::with_capacity(td.tasks.len());
        for t in &td.tasks {
            let alpha = rng.random::<f64>() * spec.alpha_max;
            let beta = rng.random::<f64>() * spec.beta_max;
            let observed = t.cores.round().max(1.0) as u32;
            let obs = ObservedRun {
                node_count: observed,
                duration: t.duration,
                demands_per_node: Default::default(),
            };
            let usl = fit_gamma(&obs, alpha, beta, default_work(&obs, alpha, beta))?;
            let mem_per_core = 100.0 * t.memory_fraction / f64::from(observed);
            let rule = DemandRule::PerNode([(ResourceId::from(MEMORY_RESOURCE), mem_per_core)].into());
            let mut counts = spec.node_counts.clone();
            counts.push(observed);
            let mut options = enumerate_options(&usl, std::slice::from_ref(&inst), &counts, &rule, 1.0)?;
            options.retain(|o| {
                f64::from(o.node_count) <= cap_cores
                    && o.demands.get(MEMORY_RESOURCE).copied().unwrap_or(0.0) <= cap_mem
            });
            let initial_option = options
                .iter()
                .position(|o| o.node_count == observed)
                .ok_or_else(|| invalid(format!("task {}/{} does not fit the cluster", td.dag_id, t.task_id)))?;
            for (i, o) in options.iter_mut().enumerate() {
                o.option_id = i;
            }
            tasks.push(Task {
                task_id: t.task_id.clone(),
                options,
                initial_option,
                release: 0.0,
            });
        }
        dags.push(Dag {
            dag_id: td.dag_id.clone(),
            tasks,
            edges: td.edges(),
            submit_time: td.submit_time,
        });
    }
    let p = Problem {
        dags,
        capacities: [
            (cores_resource(), cap_cores),
            (ResourceId::from(MEMORY_RESOURCE), cap_mem),
        ]
        .into(),
        makespan_budget: None,
        cost_budget: None,
        weight: 0.5,
        time_origin: 0.0,
        reservations: vec![],
    };
    crate::model::validate_problem(&p).map_err(crate::Error::InvalidProblem)?;
    Ok(p)
}
