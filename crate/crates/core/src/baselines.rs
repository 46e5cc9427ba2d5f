//! Reference schedulers: the workflow-manager default (topological FIFO),
//! critical-path list scheduling, "separate" optimization (best option per
//! task in isolation, then schedule) and the exhaustive co-optimization
//! oracle.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anneal::Solution;
use crate::error::{invalid, Error, Result};
use crate::model::{compute_objective, Assignment, Baseline, FlatProblem, Problem, Schedule};
use crate::solve::{list_schedule_flat, solve_flat, Priority, SolveParams, SolveStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Goal {
    Balanced,
    Runtime,
    Cost,
}

impl Goal {
    pub fn weight(self) -> f64 {
        match self {
            Goal::Balanced => 0.5,
            Goal::Runtime => 1.0,
            Goal::Cost => 0.0,
        }
    }
}

impl fmt::Display for Goal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Goal::Balanced => "balanced",
            Goal::Runtime => "runtime",
            Goal::Cost => "cost",
        })
    }
}

impl FromStr for Goal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "balanced" => Ok(Goal::Balanced),
            "runtime" => Ok(Goal::Runtime),
            "cost" => Ok(Goal::Cost),
            other => Err(invalid(format!("unknown goal `{other}` (balanced, runtime, cost)"))),
        }
    }
}

/// Descendant-count priority with FIFO tie-breaking.
pub fn fifo_topological(p: &Problem, a: &Assignment) -> Result<Schedule> {
    crate::solve::list_schedule(p, a, Priority::TopologicalFifo)
}

/// Like [`fifo_topological`] but weighting by direct children only.
pub fn fifo_direct_children(p: &Problem, a: &Assignment) -> Result<Schedule> {
    crate::solve::list_schedule(p, a, Priority::DirectChildren)
}

pub fn critical_path(p: &Problem, a: &Assignment) -> Result<Schedule> {
    crate::solve::list_schedule(p, a, Priority::CriticalPath)
}

/// Scores an arbitrary schedule against the standard baseline of `p`.
pub fn evaluate_schedule(p: &Problem, s: Schedule) -> Result<Solution> {
    Solution::from_schedule(s, Baseline::standard(p)?, p.weight, SolveStatus::Feasible)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeparateScheduler {
    CriticalPath,
    Exact,
}

fn ratio(x: f64, min: f64) -> f64 {
    if min > 0.0 {
        x / min
    } else if x <= 0.0 {
        1.0
    } else {
        f64::INFINITY
    }
}

/// Each task's best option in isolation for `goal`. The balanced rule blends
/// duration and cost 50/50 after normalizing both by the task's own minima.
pub fn separate_assignment(p: &Problem, goal: Goal) -> Assignment {
    let pick = |task: &crate::model::Task| {
        let min_d = task.options.iter().map(|o| o.duration).fold(f64::INFINITY, f64::min);
        let min_c = task.options.iter().map(|o| o.cost()).fold(f64::INFINITY, f64::min);
        let key = |o: &crate::model::ConfigOption| -> (f64, f64) {
            match goal {
                Goal::Runtime => (o.duration, o.cost()),
                Goal::Cost => (o.cost(), o.duration),
                Goal::Balanced => (
                    0.5 * ratio(o.duration, min_d) + 0.5 * ratio(o.cost(), min_c),
                    o.duration,
                ),
            }
        };
        let mut best = 0;
        for c in 1..task.options.len() {
            let (k, b) = (key(&task.options[c]), key(&task.options[best]));
            if k.0 < b.0 || (k.0 == b.0 && k.1 < b.1) {
                best = c;
            }
        }
        best
    };
    Assignment(p.tasks().map(|(_, t)| pick(t)).collect())
}

/// Per-task configuration choice followed by scheduling.
pub fn separate_optimize(p: &Problem, goal: Goal, scheduler: SeparateScheduler) -> Result<Solution> {
    let flat = FlatProblem::new(p)?;
    let baseline = Baseline::standard(p)?;
    let a = separate_assignment(p, goal);
    let (schedule, status) = match scheduler {
        SeparateScheduler::CriticalPath => (
            list_schedule_flat(&flat, &a, Priority::CriticalPath)?,
            SolveStatus::Feasible,
        ),
        SeparateScheduler::Exact => {
            let r = solve_flat(&flat, &a, &SolveParams::default());
            match r.schedule {
                Some(s) => (s, r.status),
                None => {
                    return Err(Error::Infeasible(
                        "separately chosen configuration has no feasible schedule".into(),
                    ))
                }
            }
        }
    };
    Solution::from_schedule(schedule, baseline, p.weight, status)
}

fn decode(mut k: u128, counts: &[usize]) -> Assignment {
    let mut out = vec![0; counts.len()];
    for i in (0..counts.len()).rev() {
        let c = counts[i] as u128;
        out[i] = (k % c) as usize;
        k /= c;
    }
    Assignment(out)
}

/// Exhaustive oracle: every assignment, each solved to optimality. Ties go to
/// the lexicographically smallest assignment.
pub fn brute_force(p: &Problem, sp: &SolveParams, cap: u128) -> Result<Solution> {
    sp.validate()?;
    let flat = FlatProblem::new(p)?;
    let product = p.assignment_count();
    if product > cap {
        return Err(Error::SearchSpaceOverflow { product, cap });
    }
    let baseline = Baseline::standard(p)?;
    let exact = SolveParams {
        exact_threshold: usize::MAX,
        ..sp.clone()
    };
    let counts: Vec<usize> = flat.options.iter().map(Vec::len).collect();
    let best = (0..product as u64)
        .into_par_iter()
        .map(|k| -> Result<Option<(f64, u64, Schedule, SolveStatus)>> {
            let a = decode(u128::from(k), &counts);
            let r = solve_flat(&flat, &a, &exact);
            match r.schedule {
                None => Ok(None),
                Some(s) => {
                    let e = compute_objective(s.makespan, s.cost, &baseline, p.weight)?;
                    Ok(Some((e, k, s, r.status)))
                }
            }
        })
        .try_reduce(
            || None,
            |a, b| {
                Ok(match (a, b) {
                    (None, x) | (x, None) => x,
                    (Some(x), Some(y)) => {
                        if (y.0, y.1) < (x.0, x.1) {
                            Some(y)
                        } else {
                            Some(x)
                        }
                    }
                })
            },
        )?;
    let (_, _, schedule, status) =
        best.ok_or_else(|| Error::Infeasible("no assignment admits a schedule within the budgets".into()))?;
    let mut sol = Solution::from_schedule(schedule, baseline, p.weight, status)?;
    sol.evaluations = product as usize;
    Ok(sol)
}

/// One row of a method comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: String,
    pub weight: f64,
    pub makespan: f64,
    pub cost: f64,
    pub energy: f64,
}

impl MethodResult {
    pub fn new(method: impl Into<String>, s: &Solution) -> Self {
        Self {
            method: method.into(),
            weight: s.weight,
            makespan: s.schedule.makespan,
            cost: s.schedule.cost,
            energy: s.energy,
        }
    }
}
