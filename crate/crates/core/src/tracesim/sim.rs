use std::collections::BTreeMap;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use super::{cores_resource, synthesize_problem, ClusterSpec, SynthSpec, Trace, TriggerPolicy};
use crate::anneal::{co_optimize, AnnealParams};
use crate::baselines::{separate_optimize, Goal, SeparateScheduler};
use crate::error::{invalid, Error, Result};
use crate::model::{Assignment, Dag, FlatProblem, Problem, Reservation, Schedule, Task, EPS};
use crate::solve::{list_schedule, Priority, SolveParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimScheduler {
    CoOptimize,
    FifoTopological,
    CriticalPath,
    Separate(Goal),
}

impl SimScheduler {
    pub fn label(&self) -> String {
        match self {
            SimScheduler::CoOptimize => "co_optimize".into(),
            SimScheduler::FifoTopological => "fifo_topological".into(),
            SimScheduler::CriticalPath => "critical_path".into(),
            SimScheduler::Separate(g) => format!("separate_{g}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Seeds the scaling curves and every annealing run.
    pub seed: u64,
    pub weight: f64,
    pub synth: SynthSpec,
    /// Annealing settings per trigger; `seed` is replaced per trigger.
    pub anneal: AnnealParams,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            weight: 0.5,
            synth: SynthSpec::default(),
            // batches can hold hundreds of tasks, so every budget here is
            // deterministic and small
            anneal: AnnealParams {
                max_iterations: Some(300),
                stall_limit: Some(100),
                inner: SolveParams {
                    time_limit: 3600.0,
                    node_limit: Some(300),
                    ..SolveParams::default()
                },
                ..AnnealParams::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DagOutcome {
    pub dag_id: String,
    /// Completion time (last task end minus submission) under topological FIFO.
    pub completion_baseline: f64,
    pub completion_optimized: f64,
    pub improvement_fraction: f64,
}

/// Everything here is a pure function of (trace, cluster, policy, scheduler,
/// config), so two runs serialize to identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub scheduler_label: String,
    pub seed: u64,
    pub trace_hash: String,
    /// Last completion minus first submission.
    pub total_completion_time: f64,
    pub total_cost: f64,
    pub triggers: usize,
    pub failed_triggers: usize,
    pub per_dag: Vec<DagOutcome>,
}

/// One executed task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub dag_id: String,
    pub task_id: String,
    pub option: usize,
    pub start: f64,
    pub end: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutcome {
    pub report: SimReport,
    /// The synthesized problem (absolute submit times, all tasks).
    pub problem: Problem,
    /// Executed tasks in the problem's flat order.
    pub timeline: Vec<TaskRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum State {
    Waiting,
    Queued(Option<(usize, f64)>),
    Running { option: usize, start: f64, end: f64 },
    Done { option: usize, start: f64, end: f64 },
}

struct Replay<'a> {
    flat: &'a FlatProblem<'a>,
    p: &'a Problem,
    policy: &'a TriggerPolicy,
    scheduler: SimScheduler,
    cfg: &'a SimConfig,
    state: Vec<State>,
    dag_of: Vec<usize>,
    core_idx: usize,
    triggers: usize,
    failed: usize,
}

impl<'a> Replay<'a> {
    fn usage(&self) -> Vec<f64> {
        let mut used = vec![0.0; self.flat.caps.len()];
        for (i, s) in self.state.iter().enumerate() {
            if let State::Running { option, .. } = s {
                for (u, d) in used.iter_mut().zip(&self.flat.options[i][*option].demand) {
                    *u += d;
                }
            }
        }
        used
    }

    fn queued_unplanned_cores(&self) -> f64 {
        self.state
            .iter()
            .enumerate()
            .filter(|(_, s)| matches!(s, State::Queued(None)))
            .map(|(i, _)| {
                let (d, t) = self.flat.keys[i];
                let task = &self.p.dags[d].tasks[t];
                self.flat.options[i][task.initial_option].demand[self.core_idx]
            })
            .sum()
    }

    /// Sub-problem over every queued task at time `now`, times relative to `now`.
    fn batch(&self, now: f64) -> (Problem, Vec<usize>) {
        let mut members = Vec::new();
        let mut dags = Vec::new();
        let mut offset = 0;
        for dag in &self.p.dags {
            let idx: Vec<usize> = (offset..offset + dag.tasks.len())
                .filter(|&i| matches!(self.state[i], State::Queued(_)))
                .collect();
            offset += dag.tasks.len();
            if idx.is_empty() {
                continue;
            }
            let tasks = idx
                .iter()
                .map(|&i| {
                    let release = self.flat.preds[i]
                        .iter()
                        .filter_map(|&j| match self.state[j] {
                            State::Running { end, .. } => Some(end - now),
                            _ => None,
                        })
                        .fold(0.0, f64::max);
                    let (d, t) = self.flat.keys[i];
                    Task {
                        release,
                        ..self.p.dags[d].tasks[t].clone()
                    }
                })
                .collect::<Vec<_>>();
            let keep: std::collections::HashSet<&str> = tasks.iter().map(|t| t.task_id.as_str()).collect();
            let edges = dag
                .edges
                .iter()
                .filter(|(a, b)| keep.contains(a.as_str()) && keep.contains(b.as_str()))
                .cloned()
                .collect();
            dags.push(Dag {
                dag_id: dag.dag_id.clone(),
                tasks,
                edges,
                submit_time: 0.0,
            });
            members.extend(idx);
        }
        let reservations = self
            .state
            .iter()
            .enumerate()
            .filter_map(|(i, s)| match *s {
                State::Running { option, end, .. } => {
                    let (d, t) = self.flat.keys[i];
                    Some(Reservation {
                        until: end - now,
                        demands: self.p.dags[d].tasks[t].options[option].demands.clone(),
                    })
                }
                _ => None,
            })
            .collect();
        let problem = Problem {
            dags,
            capacities: self.p.capacities.clone(),
            makespan_budget: None,
            cost_budget: None,
            weight: self.cfg.weight,
            time_origin: now,
            reservations,
        };
        (problem, members)
    }

    fn plan(&mut self, now: f64) -> Result<()> {
        let (batch, members) = self.batch(now);
        let schedule = self.run_scheduler(&batch)?;
        for (k, &i) in members.iter().enumerate() {
            self.state[i] = State::Queued(Some((schedule.assignment.get(k), now + schedule.starts[k])));
        }
        Ok(())
    }

    fn run_scheduler(&self, batch: &Problem) -> Result<Schedule> {
        let initial = Assignment::initial(batch);
        Ok(match self.scheduler {
            SimScheduler::FifoTopological => list_schedule(batch, &initial, Priority::TopologicalFifo)?,
            SimScheduler::CriticalPath => list_schedule(batch, &initial, Priority::CriticalPath)?,
            SimScheduler::Separate(goal) => separate_optimize(batch, goal, SeparateScheduler::CriticalPath)?.schedule,
            SimScheduler::CoOptimize => {
                let ap = AnnealParams {
                    seed: self.cfg.seed.wrapping_add(self.triggers as u64),
                    ..self.cfg.anneal.clone()
                };
                co_optimize(batch, &ap)?.schedule
            }
        })
    }

    fn fits(&self, used: &[f64], i: usize, option: usize) -> bool {
        let dem = &self.flat.options[i][option].demand;
        used.iter()
            .zip(dem)
            .zip(&self.flat.caps)
            .all(|((u, d), c)| u + d <= c + EPS)
    }

    fn run(&mut self) -> Result<()> {
        let n = self.state.len();
        let submits: Vec<f64> = self.dag_of.iter().map(|&d| self.p.dags[d].submit_time).collect();
        let submit = |i: usize| submits[i];
        let mut last_trigger: Option<f64> = None;
        let mut last_failed = false;
        let mut now = match (0..n).map(submit).min_by(f64::total_cmp) {
            Some(t) => t,
            None => return Ok(()),
        };
        loop {
            // completions, then arrivals
            for s in self.state.iter_mut() {
                if let State::Running { option, start, end } = *s {
                    if end <= now + EPS {
                        *s = State::Done { option, start, end };
                    }
                }
            }
            for i in 0..n {
                if self.state[i] == State::Waiting && submit(i) <= now + EPS {
                    self.state[i] = State::Queued(None);
                }
            }

            let any_queued = self.state.iter().any(|s| matches!(s, State::Queued(_)));
            if any_queued {
                let used = self.usage();
                let free = self.flat.caps[self.core_idx] - used[self.core_idx];
                let due = last_trigger.is_none_or(|t| now >= t + self.policy.interval - EPS);
                if due || self.policy.queue_exceeded(self.queued_unplanned_cores(), free) {
                    last_trigger = Some(now);
                    last_failed = false;
                    match self.plan(now) {
                        Ok(()) => debug!("trigger {} at t={now}", self.triggers),
                        Err(e) => {
                            last_failed = true;
                            self.failed += 1;
                            warn!("trigger {} at t={now} failed, tasks stay queued: {e}", self.triggers);
                        }
                    }
                    self.triggers += 1;
                }
            }

            // commit planned starts in plan order
            let mut ready: Vec<(f64, usize, usize)> = (0..n)
                .filter_map(|i| match self.state[i] {
                    State::Queued(Some((option, at))) if at <= now + EPS => Some((at, i, option)),
                    _ => None,
                })
                .collect();
            ready.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut used = self.usage();
            for (_, i, option) in ready {
                let preds_done = self.flat.preds[i]
                    .iter()
                    .all(|&j| matches!(self.state[j], State::Done { .. }));
                if !preds_done || !self.fits(&used, i, option) {
                    continue;
                }
                for (u, d) in used.iter_mut().zip(&self.flat.options[i][option].demand) {
                    *u += d;
                }
                let end = now + self.flat.options[i][option].duration;
                self.state[i] = State::Running {
                    option,
                    start: now,
                    end,
                };
            }

            // next event
            let mut next = f64::INFINITY;
            let mut queued = false;
            let mut pending_work = false;
            for (i, s) in self.state.iter().enumerate() {
                match *s {
                    State::Waiting => {
                        next = next.min(submit(i));
                        pending_work = true;
                    }
                    State::Running { end, .. } => {
                        next = next.min(end);
                        pending_work = true;
                    }
                    State::Queued(plan) => {
                        queued = true;
                        if let Some((_, at)) = plan {
                            pending_work = true;
                            if at > now + EPS {
                                next = next.min(at);
                            }
                        }
                    }
                    State::Done { .. } => {}
                }
            }
            if queued {
                // a retry on an unchanged cluster would fail the same way
                if !pending_work && last_failed {
                    return Err(Error::SimulationStalled {
                        time: now,
                        reason: "queued tasks cannot be scheduled and nothing else is pending".into(),
                    });
                }
                if let Some(t) = last_trigger {
                    next = next.min(t + self.policy.interval);
                }
            }
            if !next.is_finite() {
                return Ok(());
            }
            now = next;
        }
    }

    fn timeline(&self) -> Vec<TaskRecord> {
        self.state
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let (d, t) = self.flat.keys[i];
                let State::Done { option, start, end } = *s else {
                    unreachable!("replay ends with every task done")
                };
                TaskRecord {
                    dag_id: self.p.dags[d].dag_id.clone(),
                    task_id: self.p.dags[d].tasks[t].task_id.clone(),
                    option,
                    start,
                    end,
                    cost: self.flat.options[i][option].cost,
                }
            })
            .collect()
    }
}

fn replay(
    p: &Problem,
    policy: &TriggerPolicy,
    scheduler: SimScheduler,
    cfg: &SimConfig,
) -> Result<(Vec<TaskRecord>, usize, usize)> {
    let flat = FlatProblem::new(p)?;
    let core_idx = flat
        .resources
        .iter()
        .position(|r| *r == cores_resource())
        .ok_or_else(|| invalid("problem has no core pool"))?;
    let dag_of = flat.keys.iter().map(|&(d, _)| d).collect();
    let mut r = Replay {
        flat: &flat,
        p,
        policy,
        scheduler,
        cfg,
        state: vec![State::Waiting; flat.len()],
        dag_of,
        core_idx,
        triggers: 0,
        failed: 0,
    };
    r.run()?;
    Ok((r.timeline(), r.triggers, r.failed))
}

fn completions(p: &Problem, timeline: &[TaskRecord]) -> BTreeMap<String, f64> {
    let mut last: BTreeMap<String, f64> = BTreeMap::new();
    for rec in timeline {
        let e = last.entry(rec.dag_id.clone()).or_insert(f64::NEG_INFINITY);
        *e = e.max(rec.end);
    }
    p.dags
        .iter()
        .map(|d| (d.dag_id.clone(), last[&d.dag_id] - d.submit_time))
        .collect()
}

fn improvement(baseline: f64, optimized: f64) -> f64 {
    if baseline > 0.0 {
        (baseline - optimized) / baseline
    } else {
        0.0
    }
}

/// Replays `trace` and returns the report together with the synthesized
/// problem and the executed timeline.
pub fn simulate(
    trace: &Trace,
    cluster: &ClusterSpec,
    policy: &TriggerPolicy,
    scheduler: SimScheduler,
    cfg: &SimConfig,
) -> Result<SimOutcome> {
    policy.validate()?;
    cluster.validate()?;
    if !(0.0..=1.0).contains(&cfg.weight) {
        return Err(invalid(format!("weight {} must lie in [0, 1]", cfg.weight)));
    }
    let trace_hash = trace.hash();
    if trace.dags.is_empty() {
        return Ok(SimOutcome {
            report: SimReport {
                scheduler_label: scheduler.label(),
                seed: cfg.seed,
                trace_hash,
                total_completion_time: 0.0,
                total_cost: 0.0,
                triggers: 0,
                failed_triggers: 0,
                per_dag: vec![],
            },
            problem: Problem {
                dags: vec![],
                capacities: Default::default(),
                makespan_budget: None,
                cost_budget: None,
                weight: cfg.weight,
                time_origin: 0.0,
                reservations: vec![],
            },
            timeline: vec![],
        });
    }
    let synth = SynthSpec {
        usl_seed: cfg.seed,
        ..cfg.synth.clone()
    };
    let p = synthesize_problem(trace, cluster, &synth)?;
    let (timeline, triggers, failed) = replay(&p, policy, scheduler, cfg)?;
    let optimized = completions(&p, &timeline);
    let baseline = if scheduler == SimScheduler::FifoTopological {
        optimized.clone()
    } else {
        completions(&p, &replay(&p, policy, SimScheduler::FifoTopological, cfg)?.0)
    };
    let per_dag = p
        .dags
        .iter()
        .map(|d| {
            let (b, o) = (baseline[&d.dag_id], optimized[&d.dag_id]);
            DagOutcome {
                dag_id: d.dag_id.clone(),
                completion_baseline: b,
                completion_optimized: o,
                improvement_fraction: improvement(b, o),
            }
        })
        .collect();
    let first_submit = p.dags.iter().map(|d| d.submit_time).fold(f64::INFINITY, f64::min);
    let last_end = timeline.iter().map(|r| r.end).fold(f64::NEG_INFINITY, f64::max);
    let report = SimReport {
        scheduler_label: scheduler.label(),
        seed: cfg.seed,
        trace_hash,
        total_completion_time: last_end - first_submit,
        total_cost: timeline.iter().map(|r| r.cost).sum(),
        triggers,
        failed_triggers: failed,
        per_dag,
    };
    Ok(SimOutcome {
        report,
        problem: p,
        timeline,
    })
}

pub fn run_simulation(
    trace: &Trace,
    cluster: &ClusterSpec,
    policy: &TriggerPolicy,
    scheduler: SimScheduler,
    cfg: &SimConfig,
) -> Result<SimReport> {
    Ok(simulate(trace, cluster, policy, scheduler, cfg)?.report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub improvement: f64,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub baseline: String,
    pub candidate: String,
    /// Candidate over baseline.
    pub cost_ratio: f64,
    pub completion_ratio: f64,
    /// Per-DAG completion improvement of the candidate, as an empirical CDF.
    pub cdf: Vec<CdfPoint>,
}

fn ratio(a: f64, b: f64) -> f64 {
    if a == b {
        1.0
    } else {
        b / a
    }
}

/// Normalizes `candidate` against `baseline`. Both must come from the same
/// trace and seed.
pub fn compare(baseline: &SimReport, candidate: &SimReport) -> Result<Comparison> {
    if baseline.trace_hash != candidate.trace_hash || baseline.seed != candidate.seed {
        return Err(Error::MismatchedReports(format!(
            "{}@{} vs {}@{}",
            &baseline.trace_hash[..baseline.trace_hash.len().min(12)],
            baseline.seed,
            &candidate.trace_hash[..candidate.trace_hash.len().min(12)],
            candidate.seed
        )));
    }
    let b: BTreeMap<&str, f64> = baseline
        .per_dag
        .iter()
        .map(|d| (d.dag_id.as_str(), d.completion_optimized))
        .collect();
    let mut gains: Vec<f64> = candidate
        .per_dag
        .iter()
        .map(|d| improvement(b[d.dag_id.as_str()], d.completion_optimized))
        .collect();
    gains.sort_by(f64::total_cmp);
    let n = gains.len() as f64;
    let cdf = gains
        .iter()
        .enumerate()
        .map(|(k, &g)| CdfPoint {
            improvement: g,
            fraction: (k + 1) as f64 / n,
        })
        .collect();
    Ok(Comparison {
        baseline: baseline.scheduler_label.clone(),
        candidate: candidate.scheduler_label.clone(),
        cost_ratio: ratio(baseline.total_cost, candidate.total_cost),
        completion_ratio: ratio(baseline.total_completion_time, candidate.total_completion_time),
        cdf,
    })
}
