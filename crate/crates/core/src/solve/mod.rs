//! Start-time scheduling for a fixed assignment.
//!
//! Once every task's option is fixed, durations and demands are fixed too, and
//! so is the cost (it does not depend on start times). The only thing left to
//! optimize is the makespan, subject to precedence, release times and
//! capacity. [`solve`] does that exactly by branch and bound on small
//! instances and as an anytime search on large ones.

mod list;
mod search;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use list::Priority;

use crate::error::{invalid, Error, Result};
use crate::model::{round_up, Assignment, FlatProblem, Problem, Schedule, EPS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveParams {
    /// Wall-clock limit in seconds, only enforced above `exact_threshold`.
    pub time_limit: f64,
    /// Instances with at most this many tasks are always solved to optimality.
    pub exact_threshold: usize,
    /// Durations are rounded up to this grid before searching.
    pub quantum: f64,
    /// Deterministic search budget (decision points), only enforced above
    /// `exact_threshold`.
    pub node_limit: Option<u64>,
}

impl Default for SolveParams {
    fn default() -> Self {
        Self {
            time_limit: 10.0,
            exact_threshold: 8,
            quantum: 1.0,
            node_limit: Some(20_000),
        }
    }
}

impl SolveParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.time_limit > 0.0 && self.quantum > 0.0 && self.exact_threshold > 0) {
            return Err(invalid("time limit, quantum and exact threshold must be positive"));
        }
        if self.node_limit == Some(0) {
            return Err(invalid("node limit must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Feasible,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    /// `None` exactly when infeasible.
    pub schedule: Option<Schedule>,
    pub status: SolveStatus,
    pub explored_nodes: u64,
    /// Seconds.
    pub elapsed: f64,
}

/// Dense fixed-assignment instance.
#[derive(Debug, Clone)]
pub(crate) struct Instance {
    pub dur: Vec<f64>,
    pub dem: Vec<Vec<f64>>,
    pub caps: Vec<f64>,
    pub preds: Vec<Vec<usize>>,
    pub succs: Vec<Vec<usize>>,
    pub release: Vec<f64>,
    pub fifo_rank: Vec<usize>,
    pub topo: Vec<usize>,
    pub reservations: Vec<(f64, Vec<f64>)>,
    /// Longest path from each task to a sink, including its own duration.
    pub tail: Vec<f64>,
    pub resource_names: Vec<String>,
}

impl Instance {
    pub fn new(flat: &FlatProblem<'_>, a: &[usize], quantum: f64) -> Self {
        let dur = a
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let d = flat.options[i][c].duration;
                if quantum > 0.0 {
                    round_up(d, quantum)
                } else {
                    d
                }
            })
            .collect();
        let dem = a
            .iter()
            .enumerate()
            .map(|(i, &c)| flat.options[i][c].demand.clone())
            .collect();
        let mut inst = Self {
            dur,
            dem,
            caps: flat.caps.clone(),
            preds: flat.preds.clone(),
            succs: flat.succs.clone(),
            release: flat.release.clone(),
            fifo_rank: flat.fifo_rank.clone(),
            topo: flat.topo.clone(),
            reservations: flat.reservations.clone(),
            tail: Vec::new(),
            resource_names: flat.resources.iter().map(|r| r.0.clone()).collect(),
        };
        inst.tail = inst.compute_tail();
        inst
    }

    #[cfg(test)]
    pub fn from_parts(
        dur: Vec<f64>,
        dem: Vec<Vec<f64>>,
        caps: Vec<f64>,
        edges: &[(usize, usize)],
        release: Vec<f64>,
        reservations: Vec<(f64, Vec<f64>)>,
    ) -> Self {
        let n = dur.len();
        let mut preds = vec![Vec::new(); n];
        let mut succs = vec![Vec::new(); n];
        for &(a, b) in edges {
            succs[a].push(b);
            preds[b].push(a);
        }
        let topo = crate::model::topo_order(n, edges).expect("acyclic");
        let m = caps.len();
        let mut inst = Self {
            dur,
            dem,
            caps,
            preds,
            succs,
            release,
            fifo_rank: (0..n).collect(),
            topo,
            reservations,
            tail: Vec::new(),
            resource_names: (0..m).map(|k| format!("r{k}")).collect(),
        };
        inst.tail = inst.compute_tail();
        inst
    }

    pub fn n(&self) -> usize {
        self.dur.len()
    }

    fn compute_tail(&self) -> Vec<f64> {
        let mut tail = vec![0.0; self.n()];
        for &j in self.topo.iter().rev() {
            tail[j] = self.dur[j] + self.succs[j].iter().map(|&s| tail[s]).fold(0.0, f64::max);
        }
        tail
    }

    pub fn descendant_counts(&self) -> Vec<usize> {
        let n = self.n();
        let words = n.div_ceil(64).max(1);
        let mut reach = vec![vec![0u64; words]; n];
        for &j in self.topo.iter().rev() {
            let mut row = vec![0u64; words];
            for &s in &self.succs[j] {
                row[s / 64] |= 1 << (s % 64);
                for (r, x) in row.iter_mut().zip(&reach[s]) {
                    *r |= x;
                }
            }
            reach[j] = row;
        }
        reach
            .iter()
            .map(|r| r.iter().map(|w| w.count_ones() as usize).sum())
            .collect()
    }

    pub fn makespan_of(&self, starts: &[f64]) -> f64 {
        starts.iter().zip(&self.dur).map(|(s, d)| s + d).fold(0.0, f64::max)
    }

    /// Every task must fit on an otherwise empty cluster.
    pub fn check_single_fit(&self) -> Result<()> {
        for (j, dem) in self.dem.iter().enumerate() {
            for (m, (&d, &c)) in dem.iter().zip(&self.caps).enumerate() {
                if d > c + EPS * c.max(1.0) {
                    return Err(Error::Infeasible(format!(
                        "task #{j} demands {d} of {} but capacity is {c}",
                        self.resource_names[m]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn critical_path(&self) -> f64 {
        let mut finish = vec![0.0; self.n()];
        for &j in &self.topo {
            let est = self.preds[j].iter().map(|&i| finish[i]).fold(self.release[j], f64::max);
            finish[j] = est + self.dur[j];
        }
        finish.into_iter().fold(0.0, f64::max)
    }

    pub fn energy_bound(&self) -> f64 {
        let mut lb: f64 = 0.0;
        for (m, &cap) in self.caps.iter().enumerate() {
            let work: f64 = (0..self.n()).map(|j| self.dem[j][m] * self.dur[j]).sum();
            if work <= 0.0 {
                continue;
            }
            let held: f64 = self.reservations.iter().map(|(u, d)| u * d[m]).sum();
            lb = lb.max((work + held) / cap);
        }
        lb
    }

    pub fn lower_bound(&self) -> f64 {
        self.critical_path().max(self.energy_bound())
    }
}

fn check_assignment(p: &Problem, a: &Assignment) -> Result<()> {
    if a.len() != p.task_count() {
        return Err(invalid(format!(
            "assignment covers {} tasks, problem has {}",
            a.len(),
            p.task_count()
        )));
    }
    for (i, ((_, t), &c)) in p.tasks().zip(a.as_slice()).enumerate() {
        if c >= t.options.len() {
            return Err(invalid(format!("option {c} out of range for task #{i}")));
        }
    }
    Ok(())
}

/// Critical-path and resource-energy bounds on the makespan of `a`. Never
/// exceeds the optimum.
pub fn lower_bound(p: &Problem, a: &Assignment) -> Result<f64> {
    check_assignment(p, a)?;
    let flat = FlatProblem::new(p)?;
    Ok(Instance::new(&flat, a.as_slice(), 0.0).lower_bound())
}

/// Serial list schedule of `a` under the given priority rule. Always feasible
/// when each option fits on its own; budgets are not considered.
pub fn list_schedule(p: &Problem, a: &Assignment, priority: Priority) -> Result<Schedule> {
    check_assignment(p, a)?;
    let flat = FlatProblem::new(p)?;
    list_schedule_flat(&flat, a, priority)
}

pub(crate) fn list_schedule_flat(flat: &FlatProblem<'_>, a: &Assignment, priority: Priority) -> Result<Schedule> {
    let inst = Instance::new(flat, a.as_slice(), 0.0);
    let starts = list::serial_sgs(&inst, &priority.values(&inst))?;
    Ok(Schedule::from_starts(flat.problem, a.clone(), starts))
}

/// Minimum-makespan start times for a fixed assignment.
pub fn solve(p: &Problem, a: &Assignment, sp: &SolveParams) -> Result<SolveResult> {
    check_assignment(p, a)?;
    sp.validate()?;
    let flat = FlatProblem::new(p)?;
    Ok(solve_flat(&flat, a, sp))
}

pub(crate) fn solve_flat(flat: &FlatProblem<'_>, a: &Assignment, sp: &SolveParams) -> SolveResult {
    let started = Instant::now();
    let p = flat.problem;
    let infeasible = |nodes| SolveResult {
        schedule: None,
        status: SolveStatus::Infeasible,
        explored_nodes: nodes,
        elapsed: started.elapsed().as_secs_f64(),
    };

    let inst = Instance::new(flat, a.as_slice(), sp.quantum);
    if inst.check_single_fit().is_err() {
        return infeasible(0);
    }
    // Cost depends on the assignment alone, so the cost budget is settled here.
    if let Some(budget) = p.cost_budget {
        if flat.cost_of(a.as_slice()) > budget + EPS * budget.max(1.0) {
            return infeasible(0);
        }
    }
    let budget = p.makespan_budget.unwrap_or(f64::INFINITY);
    if inst.lower_bound() > budget + EPS * budget.max(1.0) {
        return infeasible(0);
    }

    let exact = inst.n() <= sp.exact_threshold;
    let limits = if exact {
        search::Limits {
            node_limit: None,
            deadline: None,
        }
    } else {
        search::Limits {
            node_limit: sp.node_limit,
            deadline: started.checked_add(Duration::from_secs_f64(sp.time_limit)),
        }
    };
    let mut search = search::Search::new(&inst, budget, limits);
    for rule in [Priority::CriticalPath, Priority::TopologicalFifo] {
        if let Ok(starts) = list::serial_sgs(&inst, &rule.values(&inst)) {
            search.offer(starts);
        }
    }
    let out = search.run();
    let elapsed = started.elapsed().as_secs_f64();
    match out.starts {
        None => infeasible(out.nodes),
        Some(starts) => SolveResult {
            schedule: Some(Schedule::from_starts(p, a.clone(), starts)),
            status: if out.complete {
                SolveStatus::Optimal
            } else {
                SolveStatus::Feasible
            },
            explored_nodes: out.nodes,
            elapsed,
        },
    }
}
