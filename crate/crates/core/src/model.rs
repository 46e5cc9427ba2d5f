//! Problem instances, schedules and the arithmetic shared by every scheduler.
//!
//! A [`Problem`] is a set of DAGs whose tasks each offer a menu of
//! [`ConfigOption`]s. Picking one option per task yields an [`Assignment`];
//! adding start times yields a [`Schedule`]. Durations are seconds, prices are
//! per hour, and every time value is relative to [`Problem::time_origin`].

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used when comparing times and money.
pub const EPS: f64 = 1e-9;

pub(crate) fn approx_le(a: f64, b: f64) -> bool {
    a <= b + EPS * b.abs().max(1.0)
}

pub(crate) fn approx_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= EPS * a.abs().max(b.abs()).max(1.0)
}

/// Key of a capacity-constrained resource, e.g. `pool.m5_4xlarge.nodes` or
/// `cluster.vcpu`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ResourceId(pub String);

impl ResourceId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ResourceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::borrow::Borrow<str> for ResourceId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl From<&str> for ResourceId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceType {
    pub name: String,
    pub vcpus: u32,
    pub memory_gb: f64,
    /// Currency per node-hour.
    pub price_per_hour: f64,
}

impl InstanceType {
    pub fn new(name: impl Into<String>, vcpus: u32, memory_gb: f64, price_per_hour: f64) -> Self {
        Self {
            name: name.into(),
            vcpus,
            memory_gb,
            price_per_hour,
        }
    }

    /// The pool resource counting concurrently rented nodes of this type.
    pub fn pool_resource(&self) -> ResourceId {
        ResourceId(format!("pool.{}.nodes", self.name.replace('.', "_")))
    }
}

/// The instance types used throughout the examples (AWS m5 family, prices as
/// of January 2022).
pub fn m5_catalog() -> Vec<InstanceType> {
    vec![
        InstanceType::new("m5.4xlarge", 16, 64.0, 0.768),
        InstanceType::new("m5.8xlarge", 32, 128.0, 1.536),
        InstanceType::new("m5.12xlarge", 48, 192.0, 2.304),
        InstanceType::new("m5.16xlarge", 64, 256.0, 3.072),
    ]
}

/// One candidate configuration for a task: how many nodes of which type, the
/// constant resource demand while it runs, and its predicted duration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigOption {
    pub option_id: usize,
    pub instance: InstanceType,
    pub node_count: u32,
    pub demands: BTreeMap<ResourceId, f64>,
    /// Seconds.
    pub duration: f64,
}

impl ConfigOption {
    /// `node_count × hours × price_per_hour`.
    pub fn cost(&self) -> f64 {
        f64::from(self.node_count) * (self.duration / 3600.0) * self.instance.price_per_hour
    }

    pub fn label(&self) -> String {
        format!("{}x{}", self.node_count, self.instance.name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub task_id: String,
    pub options: Vec<ConfigOption>,
    #[serde(default)]
    pub initial_option: usize,
    /// Earliest start, relative to the time origin.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub release: f64,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dag {
    pub dag_id: String,
    pub tasks: Vec<Task>,
    #[serde(default)]
    pub edges: Vec<(String, String)>,
    #[serde(default)]
    pub submit_time: f64,
}

/// Capacity held by work outside the problem (e.g. tasks already running in a
/// simulation) from the time origin until `until`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reservation {
    pub until: f64,
    pub demands: BTreeMap<ResourceId, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub dags: Vec<Dag>,
    pub capacities: BTreeMap<ResourceId, f64>,
    /// `None` is unbounded.
    #[serde(default)]
    pub makespan_budget: Option<f64>,
    #[serde(default)]
    pub cost_budget: Option<f64>,
    /// Makespan weight `w`; `1 - w` weighs cost.
    #[serde(default = "default_weight")]
    pub weight: f64,
    #[serde(default)]
    pub time_origin: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reservations: Vec<Reservation>,
}

fn default_weight() -> f64 {
    0.5
}

impl Problem {
    pub fn task_count(&self) -> usize {
        self.dags.iter().map(|d| d.tasks.len()).sum()
    }

    /// Tasks in flat order: DAGs in declaration order, then tasks in declaration order.
    pub fn tasks(&self) -> impl Iterator<Item = (&Dag, &Task)> {
        self.dags.iter().flat_map(|d| d.tasks.iter().map(move |t| (d, t)))
    }

    pub fn task_at(&self, flat: usize) -> Option<(&Dag, &Task)> {
        self.tasks().nth(flat)
    }

    pub fn flat_index(&self, dag_id: &str, task_id: &str) -> Option<usize> {
        let mut offset = 0;
        for dag in &self.dags {
            if dag.dag_id == dag_id {
                return dag.tasks.iter().position(|t| t.task_id == task_id).map(|i| offset + i);
            }
            offset += dag.tasks.len();
        }
        None
    }

    /// Size of the assignment search space, saturating.
    pub fn assignment_count(&self) -> u128 {
        self.tasks()
            .fold(1u128, |acc, (_, t)| acc.saturating_mul(t.options.len() as u128))
    }

    pub fn with_weight(&self, weight: f64) -> Self {
        Self { weight, ..self.clone() }
    }

    /// Copy with every option duration rounded up to a multiple of `quantum`.
    pub fn quantized(&self, quantum: f64) -> Self {
        let mut p = self.clone();
        for dag in &mut p.dags {
            for task in &mut dag.tasks {
                for opt in &mut task.options {
                    opt.duration = round_up(opt.duration, quantum);
                }
            }
        }
        p
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Rounds `x` up to the next multiple of `quantum` (at least one quantum).
pub fn round_up(x: f64, quantum: f64) -> f64 {
    if quantum <= 0.0 {
        return x;
    }
    let k = (x / quantum - EPS).ceil().max(1.0);
    k * quantum
}

/// One option index per task, in flat task order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Assignment(pub Vec<usize>);

impl Assignment {
    /// Every task on its user-supplied default option.
    pub fn initial(p: &Problem) -> Self {
        Self(p.tasks().map(|(_, t)| t.initial_option).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, flat: usize) -> usize {
        self.0[flat]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn option<'p>(&self, p: &'p Problem, flat: usize) -> &'p ConfigOption {
        let (_, task) = p.task_at(flat).expect("flat index in range");
        &task.options[self.0[flat]]
    }

    pub fn hamming(&self, other: &Assignment) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
    }
}

/// Per-task chosen option and start time. End times are always derived as
/// `start + duration` of the chosen option.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub assignment: Assignment,
    pub starts: Vec<f64>,
    pub makespan: f64,
    pub cost: f64,
}

impl Schedule {
    /// Builds a schedule and derives its makespan and cost.
    pub fn from_starts(p: &Problem, assignment: Assignment, starts: Vec<f64>) -> Self {
        let makespan = p
            .tasks()
            .zip(assignment.as_slice())
            .zip(&starts)
            .map(|(((_, t), &c), &s)| s + t.options[c].duration)
            .fold(0.0, f64::max);
        let cost = compute_cost(p, &assignment);
        Self {
            assignment,
            starts,
            makespan,
            cost,
        }
    }

    pub fn end(&self, p: &Problem, flat: usize) -> f64 {
        self.starts[flat] + self.assignment.option(p, flat).duration
    }

    pub fn to_doc(&self, p: &Problem) -> ScheduleDoc {
        let tasks = p
            .tasks()
            .enumerate()
            .map(|(i, (d, t))| ScheduledTask {
                dag_id: d.dag_id.clone(),
                task_id: t.task_id.clone(),
                option: self.assignment.get(i),
                start: self.starts[i],
                end: self.end(p, i),
            })
            .collect();
        ScheduleDoc {
            tasks,
            makespan: self.makespan,
            cost: self.cost,
            status: None,
        }
    }
}

/// Serialized form of a [`Schedule`], keyed by ids rather than flat indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleDoc {
    pub tasks: Vec<ScheduledTask>,
    pub makespan: f64,
    pub cost: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduledTask {
    pub dag_id: String,
    pub task_id: String,
    pub option: usize,
    pub start: f64,
    /// Informational; ignored when read back.
    #[serde(default)]
    pub end: f64,
}

impl ScheduleDoc {
    /// Maps the document back onto `p`'s flat task order. Stored makespan and
    /// cost are kept as-is so that [`validate_schedule`] can check them.
    pub fn resolve(&self, p: &Problem) -> Result<Schedule> {
        let n = p.task_count();
        let mut choice = vec![None; n];
        let mut starts = vec![0.0; n];
        for row in &self.tasks {
            let i = p
                .flat_index(&row.dag_id, &row.task_id)
                .ok_or_else(|| Error::UnknownId {
                    kind: "task",
                    id: format!("{}/{}", row.dag_id, row.task_id),
                })?;
            if choice[i].is_some() {
                return Err(Error::InvalidParameter(format!(
                    "task {}/{} scheduled twice",
                    row.dag_id, row.task_id
                )));
            }
            let (_, task) = p.task_at(i).expect("resolved index");
            if row.option >= task.options.len() {
                return Err(Error::UnknownId {
                    kind: "option",
                    id: format!("{}/{}#{}", row.dag_id, row.task_id, row.option),
                });
            }
            choice[i] = Some(row.option);
            starts[i] = row.start;
        }
        let assignment = choice
            .into_iter()
            .enumerate()
            .map(|(i, c)| {
                c.ok_or_else(|| {
                    let (d, t) = p.task_at(i).expect("in range");
                    Error::InvalidParameter(format!("task {}/{} is not scheduled", d.dag_id, t.task_id))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Schedule {
            assignment: Assignment(assignment),
            starts,
            makespan: self.makespan,
            cost: self.cost,
        })
    }
}

/// Reference makespan and cost against which improvements are measured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub makespan: f64,
    pub cost: f64,
}

impl Baseline {
    pub fn new(makespan: f64, cost: f64) -> Result<Self> {
        if !(makespan.is_finite() && makespan > 0.0 && cost.is_finite() && cost > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "baseline makespan and cost must be positive (got {makespan}, {cost})"
            )));
        }
        Ok(Self { makespan, cost })
    }

    /// The default-workflow-manager run: every task on its initial option,
    /// scheduled by the topological FIFO heuristic.
    pub fn standard(p: &Problem) -> Result<Self> {
        let s = crate::baselines::fifo_topological(p, &Assignment::initial(p))?;
        Self::new(s.makespan, s.cost)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProblemViolation {
    Weight(String),
    Capacity {
        resource: String,
        detail: String,
    },
    Budget(String),
    DuplicateDag(String),
    DuplicateTask {
        dag: String,
        task: String,
    },
    EmptyOptions {
        dag: String,
        task: String,
    },
    Option {
        dag: String,
        task: String,
        option: usize,
        detail: String,
    },
    UnknownResource {
        dag: String,
        task: String,
        resource: String,
    },
    InitialOption {
        dag: String,
        task: String,
    },
    Edge {
        dag: String,
        from: String,
        to: String,
        detail: String,
    },
    Cycle {
        dag: String,
        tasks: Vec<String>,
    },
    Dag {
        dag: String,
        detail: String,
    },
    Reservation {
        index: usize,
        detail: String,
    },
}

impl fmt::Display for ProblemViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use ProblemViolation::*;
        match self {
            Weight(d) => write!(f, "weight: {d}"),
            Capacity { resource, detail } => write!(f, "capacity {resource}: {detail}"),
            Budget(d) => write!(f, "budget: {d}"),
            DuplicateDag(d) => write!(f, "duplicate dag id {d}"),
            DuplicateTask { dag, task } => write!(f, "dag {dag}: duplicate task id {task}"),
            EmptyOptions { dag, task } => write!(f, "dag {dag} task {task}: no options"),
            Option {
                dag,
                task,
                option,
                detail,
            } => write!(f, "dag {dag} task {task} option {option}: {detail}"),
            UnknownResource { dag, task, resource } => write!(f, "dag {dag} task {task}: unknown resource {resource}"),
            InitialOption { dag, task } => {
                write!(f, "dag {dag} task {task}: initial option out of range")
            }
            Edge { dag, from, to, detail } => write!(f, "dag {dag} edge ({from},{to}): {detail}"),
            Cycle { dag, tasks } => write!(f, "dag {dag}: cycle: {}", tasks.join(",")),
            Dag { dag, detail } => write!(f, "dag {dag}: {detail}"),
            Reservation { index, detail } => write!(f, "reservation {index}: {detail}"),
        }
    }
}

fn positive(x: f64) -> bool {
    x.is_finite() && x > 0.0
}

/// Checks every structural invariant of `p`, including acyclicity.
pub fn validate_problem(p: &Problem) -> std::result::Result<(), Vec<ProblemViolation>> {
    use ProblemViolation as V;
    let mut out = Vec::new();

    if !(p.weight.is_finite() && (0.0..=1.0).contains(&p.weight)) {
        out.push(V::Weight(format!("{} is outside [0, 1]", p.weight)));
    }
    for (id, &cap) in &p.capacities {
        if id.0.is_empty() {
            out.push(V::Capacity {
                resource: "<empty>".into(),
                detail: "resource id must be non-empty".into(),
            });
        }
        if !positive(cap) {
            out.push(V::Capacity {
                resource: id.0.clone(),
                detail: format!("capacity {cap} must be positive"),
            });
        }
    }
    for (name, b) in [("makespan", p.makespan_budget), ("cost", p.cost_budget)] {
        if let Some(b) = b {
            if b.is_nan() || b <= 0.0 {
                out.push(V::Budget(format!("{name} budget {b} must be positive")));
            }
        }
    }
    if !p.time_origin.is_finite() {
        out.push(V::Budget("time origin must be finite".into()));
    }

    let mut dag_ids = HashSet::new();
    for dag in &p.dags {
        let did = &dag.dag_id;
        if !dag_ids.insert(did.as_str()) {
            out.push(V::DuplicateDag(did.clone()));
        }
        if !(dag.submit_time.is_finite() && dag.submit_time >= 0.0) {
            out.push(V::Dag {
                dag: did.clone(),
                detail: format!("submit time {} must be non-negative", dag.submit_time),
            });
        }
        let mut index = HashMap::new();
        for (i, task) in dag.tasks.iter().enumerate() {
            let tid = &task.task_id;
            if index.insert(tid.as_str(), i).is_some() {
                out.push(V::DuplicateTask {
                    dag: did.clone(),
                    task: tid.clone(),
                });
            }
            if !(task.release.is_finite() && task.release >= 0.0) {
                out.push(V::Dag {
                    dag: did.clone(),
                    detail: format!("task {tid} release {} must be non-negative", task.release),
                });
            }
            if task.options.is_empty() {
                out.push(V::EmptyOptions {
                    dag: did.clone(),
                    task: tid.clone(),
                });
            } else if task.initial_option >= task.options.len() {
                out.push(V::InitialOption {
                    dag: did.clone(),
                    task: tid.clone(),
                });
            }
            for (c, opt) in task.options.iter().enumerate() {
                let mut bad = |detail: String| {
                    out.push(V::Option {
                        dag: did.clone(),
                        task: tid.clone(),
                        option: c,
                        detail,
                    })
                };
                if opt.option_id != c {
                    bad(format!("option_id {} should be {c}", opt.option_id));
                }
                if !positive(opt.duration) {
                    bad(format!("duration {} must be positive", opt.duration));
                }
                if opt.node_count == 0 {
                    bad("node_count must be at least 1".into());
                }
                if opt.instance.vcpus == 0 {
                    bad(format!("instance {} has no vcpus", opt.instance.name));
                }
                if !(opt.instance.price_per_hour.is_finite() && opt.instance.price_per_hour >= 0.0) {
                    bad(format!("instance {} has a negative price", opt.instance.name));
                }
                if !positive(opt.instance.memory_gb) {
                    bad(format!("instance {} memory must be positive", opt.instance.name));
                }
                for (rid, &d) in &opt.demands {
                    if !p.capacities.contains_key(rid) {
                        out.push(V::UnknownResource {
                            dag: did.clone(),
                            task: tid.clone(),
                            resource: rid.0.clone(),
                        });
                    } else if !(d.is_finite() && d >= 0.0) {
                        out.push(V::Option {
                            dag: did.clone(),
                            task: tid.clone(),
                            option: c,
                            detail: format!("demand {d} on {rid} must be non-negative"),
                        });
                    }
                }
            }
        }

        let mut ok_edges = Vec::new();
        for (from, to) in &dag.edges {
            let edge_err = |detail: &str| V::Edge {
                dag: did.clone(),
                from: from.clone(),
                to: to.clone(),
                detail: detail.into(),
            };
            match (index.get(from.as_str()), index.get(to.as_str())) {
                (Some(&a), Some(&b)) if a == b => out.push(edge_err("self loop")),
                (Some(&a), Some(&b)) => ok_edges.push((a, b)),
                (None, _) => out.push(edge_err(&format!("unknown task {from}"))),
                (_, None) => out.push(edge_err(&format!("unknown task {to}"))),
            }
        }
        if let Err(cyclic) = topo_order(dag.tasks.len(), &ok_edges) {
            out.push(V::Cycle {
                dag: did.clone(),
                tasks: cyclic.into_iter().map(|i| dag.tasks[i].task_id.clone()).collect(),
            });
        }
    }

    for (k, r) in p.reservations.iter().enumerate() {
        if !(r.until.is_finite() && r.until >= 0.0) {
            out.push(V::Reservation {
                index: k,
                detail: format!("until {} must be non-negative", r.until),
            });
        }
        for (rid, &d) in &r.demands {
            if !p.capacities.contains_key(rid) {
                out.push(V::Reservation {
                    index: k,
                    detail: format!("unknown resource {rid}"),
                });
            } else if !(d.is_finite() && d >= 0.0) {
                out.push(V::Reservation {
                    index: k,
                    detail: format!("demand {d} on {rid} must be non-negative"),
                });
            }
        }
    }

    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// Kahn's algorithm. On a cycle, returns the nodes that could not be ordered,
/// ascending.
pub(crate) fn topo_order(n: usize, edges: &[(usize, usize)]) -> std::result::Result<Vec<usize>, Vec<usize>> {
    let mut indeg = vec![0usize; n];
    let mut succ = vec![Vec::new(); n];
    for &(a, b) in edges {
        succ[a].push(b);
        indeg[b] += 1;
    }
    let mut ready: std::collections::BTreeSet<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(i) = ready.pop_first() {
        order.push(i);
        for &j in &succ[i] {
            indeg[j] -= 1;
            if indeg[j] == 0 {
                ready.insert(j);
            }
        }
    }
    if order.len() == n {
        Ok(order)
    } else {
        Err((0..n).filter(|&i| indeg[i] > 0).collect())
    }
}

/// Total rental cost of an assignment. Start times do not enter: demands and
/// durations are fixed once options are chosen.
pub fn compute_cost(p: &Problem, a: &Assignment) -> f64 {
    p.tasks()
        .zip(a.as_slice())
        .map(|((_, t), &c)| t.options[c].cost())
        .sum()
}

/// Weighted relative change of makespan and cost versus the baseline.
/// Negative values are improvements.
pub fn compute_objective(makespan: f64, cost: f64, base: &Baseline, weight: f64) -> Result<f64> {
    if !(makespan.is_finite() && cost.is_finite() && weight.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "objective inputs must be finite (makespan {makespan}, cost {cost}, weight {weight})"
        )));
    }
    if !(0.0..=1.0).contains(&weight) {
        return Err(Error::InvalidParameter(format!("weight {weight} is outside [0, 1]")));
    }
    if !(base.makespan > 0.0 && base.cost > 0.0) {
        return Err(Error::InvalidParameter("baseline must be positive".into()));
    }
    Ok((makespan - base.makespan) / base.makespan * weight + (cost - base.cost) / base.cost * (1.0 - weight))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    Shape,
    NegativeStart,
    Release,
    Precedence,
    Capacity,
    Makespan,
    Cost,
    MakespanBudget,
    CostBudget,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleViolation {
    pub kind: ViolationKind,
    pub ids: Vec<String>,
    pub time: Option<f64>,
    pub detail: String,
}

impl fmt::Display for ScheduleViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} [{}]", self.kind, self.ids.join(","))?;
        if let Some(t) = self.time {
            write!(f, " at t={t}")?;
        }
        write!(f, ": {}", self.detail)
    }
}

/// Checks precedence, release times, capacity at every start event, the
/// stored makespan and cost, and both budgets.
pub fn validate_schedule(p: &Problem, s: &Schedule) -> std::result::Result<(), Vec<ScheduleViolation>> {
    use ViolationKind as K;
    let violation = |kind, ids: Vec<String>, time, detail: String| ScheduleViolation {
        kind,
        ids,
        time,
        detail,
    };
    let flat = match FlatProblem::new(p) {
        Ok(f) => f,
        Err(e) => return Err(vec![violation(K::Shape, vec![], None, e.to_string())]),
    };
    let n = flat.len();
    if s.assignment.len() != n || s.starts.len() != n {
        return Err(vec![violation(
            K::Shape,
            vec![],
            None,
            format!("schedule covers {} tasks, problem has {n}", s.starts.len()),
        )]);
    }
    for (i, &c) in s.assignment.as_slice().iter().enumerate() {
        if c >= flat.options[i].len() {
            return Err(vec![violation(
                K::Shape,
                vec![flat.name(i)],
                None,
                format!("option {c} out of range"),
            )]);
        }
    }

    let mut out = Vec::new();
    let dur = |i: usize| flat.options[i][s.assignment.get(i)].duration;
    let end = |i: usize| s.starts[i] + dur(i);

    for i in 0..n {
        let st = s.starts[i];
        if !(st.is_finite() && st >= 0.0) {
            out.push(violation(
                K::NegativeStart,
                vec![flat.name(i)],
                Some(st),
                "start must be non-negative".into(),
            ));
        } else if !approx_le(flat.release[i], st) {
            out.push(violation(
                K::Release,
                vec![flat.name(i)],
                Some(st),
                format!("starts before its release {}", flat.release[i]),
            ));
        }
        for &j in &flat.preds[i] {
            if !approx_le(end(j), st) {
                out.push(violation(
                    K::Precedence,
                    vec![flat.name(j), flat.name(i)],
                    Some(st),
                    format!("predecessor ends at {}", end(j)),
                ));
            }
        }
    }

    let mut events: Vec<f64> = s.starts.clone();
    events.push(0.0);
    events.sort_by(f64::total_cmp);
    events.dedup();
    for &t in &events {
        for (m, rid) in flat.resources.iter().enumerate() {
            let mut usage: f64 = flat
                .reservations
                .iter()
                .filter(|(until, _)| *until > t + EPS)
                .map(|(_, d)| d[m])
                .sum();
            for i in 0..n {
                if s.starts[i] <= t + EPS && end(i) > t + EPS {
                    usage += flat.options[i][s.assignment.get(i)].demand[m];
                }
            }
            if !approx_le(usage, flat.caps[m]) {
                out.push(violation(
                    K::Capacity,
                    vec![rid.0.clone()],
                    Some(t),
                    format!("usage {usage} exceeds capacity {}", flat.caps[m]),
                ));
            }
        }
    }

    let makespan = (0..n).map(end).fold(0.0, f64::max);
    if !approx_eq(makespan, s.makespan) {
        out.push(violation(
            K::Makespan,
            vec![],
            None,
            format!("stored makespan {} but tasks end at {makespan}", s.makespan),
        ));
    }
    let cost = compute_cost(p, &s.assignment);
    if !approx_eq(cost, s.cost) {
        out.push(violation(
            K::Cost,
            vec![],
            None,
            format!("stored cost {} but assignment costs {cost}", s.cost),
        ));
    }
    if let Some(b) = p.makespan_budget {
        if !approx_le(makespan, b) {
            out.push(violation(
                K::MakespanBudget,
                vec![],
                None,
                format!("makespan {makespan} exceeds budget {b}"),
            ));
        }
    }
    if let Some(b) = p.cost_budget {
        if !approx_le(cost, b) {
            out.push(violation(
                K::CostBudget,
                vec![],
                None,
                format!("cost {cost} exceeds budget {b}"),
            ));
        }
    }

    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct FlatOption {
    pub duration: f64,
    pub demand: Vec<f64>,
    pub cost: f64,
}

/// Index-based view of a validated problem used by the solvers.
#[derive(Debug, Clone)]
pub(crate) struct FlatProblem<'p> {
    pub problem: &'p Problem,
    pub resources: Vec<ResourceId>,
    pub caps: Vec<f64>,
    pub keys: Vec<(usize, usize)>,
    pub options: Vec<Vec<FlatOption>>,
    pub preds: Vec<Vec<usize>>,
    pub succs: Vec<Vec<usize>>,
    /// Effective release: max of the DAG submit time and the task release.
    pub release: Vec<f64>,
    /// Tie-break rank for FIFO: DAG submission order, then declaration order.
    pub fifo_rank: Vec<usize>,
    pub topo: Vec<usize>,
    pub reservations: Vec<(f64, Vec<f64>)>,
}

impl<'p> FlatProblem<'p> {
    pub fn new(p: &'p Problem) -> Result<Self> {
        validate_problem(p).map_err(Error::InvalidProblem)?;
        let resources: Vec<ResourceId> = p.capacities.keys().cloned().collect();
        let caps: Vec<f64> = p.capacities.values().copied().collect();
        let rindex: HashMap<&ResourceId, usize> = resources.iter().enumerate().map(|(i, r)| (r, i)).collect();
        let dense = |demands: &BTreeMap<ResourceId, f64>| {
            let mut v = vec![0.0; resources.len()];
            for (rid, &d) in demands {
                v[rindex[rid]] = d;
            }
            v
        };

        let n = p.task_count();
        let mut keys = Vec::with_capacity(n);
        let mut options = Vec::with_capacity(n);
        let mut release = Vec::with_capacity(n);
        let mut preds = vec![Vec::new(); n];
        let mut succs = vec![Vec::new(); n];
        let mut all_edges = Vec::new();
        let mut offset = 0;
        for (di, dag) in p.dags.iter().enumerate() {
            let local: HashMap<&str, usize> = dag
                .tasks
                .iter()
                .enumerate()
                .map(|(i, t)| (t.task_id.as_str(), offset + i))
                .collect();
            for (ti, task) in dag.tasks.iter().enumerate() {
                keys.push((di, ti));
                release.push(dag.submit_time.max(task.release));
                options.push(
                    task.options
                        .iter()
                        .map(|o| FlatOption {
                            duration: o.duration,
                            demand: dense(&o.demands),
                            cost: o.cost(),
                        })
                        .collect(),
                );
            }
            for (a, b) in &dag.edges {
                let (a, b) = (local[a.as_str()], local[b.as_str()]);
                if !succs[a].contains(&b) {
                    succs[a].push(b);
                    preds[b].push(a);
                    all_edges.push((a, b));
                }
            }
            offset += dag.tasks.len();
        }
        let topo = topo_order(n, &all_edges).expect("validated acyclic");

        let mut dag_order: Vec<usize> = (0..p.dags.len()).collect();
        dag_order.sort_by(|&a, &b| p.dags[a].submit_time.total_cmp(&p.dags[b].submit_time).then(a.cmp(&b)));
        let mut dag_rank = vec![0; p.dags.len()];
        for (r, &d) in dag_order.iter().enumerate() {
            dag_rank[d] = r;
        }
        let mut by_fifo: Vec<usize> = (0..n).collect();
        by_fifo.sort_by_key(|&i| (dag_rank[keys[i].0], i));
        let mut fifo_rank = vec![0; n];
        for (r, &i) in by_fifo.iter().enumerate() {
            fifo_rank[i] = r;
        }

        let reservations = p.reservations.iter().map(|r| (r.until, dense(&r.demands))).collect();

        Ok(Self {
            problem: p,
            resources,
            caps,
            keys,
            options,
            preds,
            succs,
            release,
            fifo_rank,
            topo,
            reservations,
        })
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn name(&self, i: usize) -> String {
        let (d, t) = self.keys[i];
        let dag = &self.problem.dags[d];
        format!("{}/{}", dag.dag_id, dag.tasks[t].task_id)
    }

    pub fn cost_of(&self, a: &[usize]) -> f64 {
        a.iter().enumerate().map(|(i, &c)| self.options[i][c].cost).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn opt(id: usize, duration: f64, demands: &[(&str, f64)]) -> ConfigOption {
        ConfigOption {
            option_id: id,
            instance: InstanceType::new("m5.4xlarge", 16, 64.0, 0.768),
            node_count: 1,
            demands: demands.iter().map(|(r, d)| (ResourceId::from(*r), *d)).collect(),
            duration,
        }
    }

    fn task(id: &str, options: Vec<ConfigOption>) -> Task {
        Task {
            task_id: id.into(),
            options,
            initial_option: 0,
            release: 0.0,
        }
    }

    fn chain_ab() -> Problem {
        Problem {
            dags: vec![Dag {
                dag_id: "d".into(),
                tasks: vec![
                    task("A", vec![opt(0, 2.0, &[("cluster.vcpu", 60.0)])]),
                    task("B", vec![opt(0, 3.0, &[("cluster.vcpu", 60.0)])]),
                ],
                edges: vec![("A".into(), "B".into())],
                submit_time: 0.0,
            }],
            capacities: [(ResourceId::from("cluster.vcpu"), 96.0)].into(),
            makespan_budget: None,
            cost_budget: None,
            weight: 0.5,
            time_origin: 0.0,
            reservations: vec![],
        }
    }

    #[test]
    fn well_formed_chain_validates() {
        assert_eq!(validate_problem(&chain_ab()), Ok(()));
    }

    #[test]
    fn two_cycle_is_reported() {
        let mut p = chain_ab();
        p.dags[0].edges.push(("B".into(), "A".into()));
        let errs = validate_problem(&p).unwrap_err();
        assert_eq!(errs.len(), 1);
        assert!(errs[0].to_string().contains("cycle: A,B"), "{}", errs[0]);
    }

    #[test]
    fn unknown_resource_is_named() {
        let mut p = chain_ab();
        p.dags[0].tasks[0].options[0].demands.insert("gpu".into(), 1.0);
        let errs = validate_problem(&p).unwrap_err();
        assert!(errs.iter().any(|e| e.to_string().contains("gpu")));
    }

    #[test]
    fn bad_weight_and_option_ids() {
        let mut p = chain_ab();
        p.weight = 1.5;
        p.dags[0].tasks[1].options[0].option_id = 3;
        p.dags[0].tasks[1].initial_option = 2;
        let errs = validate_problem(&p).unwrap_err();
        assert_eq!(errs.len(), 3, "{errs:?}");
    }

    #[test]
    fn cost_of_sixteen_m5_4xlarge_for_an_hour() {
        let mut p = chain_ab();
        p.dags[0].tasks.truncate(1);
        p.dags[0].edges.clear();
        let o = &mut p.dags[0].tasks[0].options[0];
        o.node_count = 16;
        o.duration = 3600.0;
        let c = compute_cost(&p, &Assignment::initial(&p));
        assert!((c - 12.288).abs() < 1e-12, "{c}");
    }

    #[test]
    fn zero_price_costs_nothing() {
        let mut p = chain_ab();
        for t in &mut p.dags[0].tasks {
            t.options[0].instance.price_per_hour = 0.0;
        }
        assert_eq!(compute_cost(&p, &Assignment::initial(&p)), 0.0);
    }

    #[test]
    fn two_half_hour_m5_8xlarge_tasks() {
        let mut p = chain_ab();
        for t in &mut p.dags[0].tasks {
            let o = &mut t.options[0];
            o.instance = InstanceType::new("m5.8xlarge", 32, 128.0, 1.536);
            o.duration = 1800.0;
        }
        let c = compute_cost(&p, &Assignment::initial(&p));
        assert!((c - 1.536).abs() < 1e-12);
    }

    #[test]
    fn objective_examples() {
        let base = Baseline::new(100.0, 10.0).unwrap();
        for w in [0.0, 0.3, 1.0] {
            assert_eq!(compute_objective(100.0, 10.0, &base, w).unwrap(), 0.0);
        }
        let v = compute_objective(80.0, 6.0, &base, 0.5).unwrap();
        assert!((v + 0.3).abs() < 1e-12);
        let v = compute_objective(50.0, 20.0, &base, 1.0).unwrap();
        assert!((v + 0.5).abs() < 1e-12);
        assert!(compute_objective(f64::NAN, 1.0, &base, 0.5).is_err());
        assert!(compute_objective(1.0, f64::INFINITY, &base, 0.5).is_err());
    }

    #[test]
    fn schedule_checks() {
        let p = chain_ab();
        let a = Assignment::initial(&p);
        let ok = Schedule::from_starts(&p, a.clone(), vec![0.0, 2.0]);
        assert_eq!(validate_schedule(&p, &ok), Ok(()));

        let early = Schedule::from_starts(&p, a.clone(), vec![0.0, 1.0]);
        let errs = validate_schedule(&p, &early).unwrap_err();
        assert!(errs
            .iter()
            .any(|e| e.kind == ViolationKind::Precedence && e.ids == ["d/A", "d/B"]));

        let mut q = chain_ab();
        q.dags[0].edges.clear();
        let overlap = Schedule::from_starts(&q, Assignment::initial(&q), vec![0.0, 0.0]);
        let errs = validate_schedule(&q, &overlap).unwrap_err();
        assert!(errs
            .iter()
            .any(|e| e.kind == ViolationKind::Capacity && e.ids == ["cluster.vcpu"] && e.time == Some(0.0)));
    }

    #[test]
    fn stored_fields_and_budgets_are_checked() {
        let mut p = chain_ab();
        let mut s = Schedule::from_starts(&p, Assignment::initial(&p), vec![0.0, 2.0]);
        s.makespan = 4.0;
        s.cost += 1.0;
        let kinds: Vec<_> = validate_schedule(&p, &s)
            .unwrap_err()
            .into_iter()
            .map(|v| v.kind)
            .collect();
        assert_eq!(kinds, [ViolationKind::Makespan, ViolationKind::Cost]);

        p.makespan_budget = Some(4.0);
        let s = Schedule::from_starts(&p, Assignment::initial(&p), vec![0.0, 2.0]);
        let kinds: Vec<_> = validate_schedule(&p, &s)
            .unwrap_err()
            .into_iter()
            .map(|v| v.kind)
            .collect();
        assert_eq!(kinds, [ViolationKind::MakespanBudget]);
    }

    #[test]
    fn doc_round_trip() {
        let p = chain_ab();
        let s = Schedule::from_starts(&p, Assignment::initial(&p), vec![0.0, 2.0]);
        let doc = s.to_doc(&p);
        let json = serde_json::to_string(&doc).unwrap();
        let back: ScheduleDoc = serde_json::from_str(&json).unwrap();
        assert_eq!(back.resolve(&p).unwrap(), s);
    }

    #[test]
    fn round_up_to_quantum() {
        assert_eq!(round_up(3.0, 1.0), 3.0);
        assert_eq!(round_up(3.2, 1.0), 4.0);
        assert_eq!(round_up(0.1, 1.0), 1.0);
        assert_eq!(round_up(7.0, 5.0), 10.0);
    }
}
