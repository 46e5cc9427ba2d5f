//! Simulated annealing over assignments.
//!
//! Each iteration reconfigures a few tasks, solves the resulting fixed
//! assignment with [`crate::solve`], and scores it with the weighted
//! makespan/cost objective. Improvements are always accepted; a worse
//! candidate is accepted when `exp(-ΔE / T)` beats a uniform draw. The
//! temperature starts at 1 (the objective is a sum of relative changes, so
//! its scale does not depend on problem size) and cools geometrically.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{compute_objective, Assignment, Baseline, FlatProblem, Problem, Schedule};
use crate::solve::{solve_flat, SolveParams, SolveStatus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealParams {
    pub t0: f64,
    /// Per-iteration temperature multiplier; derived from the task count when unset.
    pub cooling_factor: Option<f64>,
    /// Defaults to `100 · n`.
    pub max_iterations: Option<usize>,
    /// Iterations without a new best before stopping; defaults to `10 · n`.
    pub stall_limit: Option<usize>,
    pub seed: u64,
    pub moves_per_iteration: usize,
    /// Measure ΔE against the best solution so far instead of the current one.
    pub strict_best_delta: bool,
    pub inner: SolveParams,
}

impl Default for AnnealParams {
    fn default() -> Self {
        Self {
            t0: 1.0,
            cooling_factor: None,
            max_iterations: None,
            stall_limit: None,
            seed: 0,
            moves_per_iteration: 1,
            strict_best_delta: false,
            inner: SolveParams::default(),
        }
    }
}

/// Cooling factor that brings the temperature to 1% of `t0` after `50 · n`
/// iterations.
pub fn default_cooling_factor(n_tasks: usize) -> f64 {
    (0.01f64.ln() / (50.0 * n_tasks.max(1) as f64)).exp()
}

/// [`AnnealParams`] with every default filled in for a given task count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cooling {
    pub t0: f64,
    pub factor: f64,
    pub max_iterations: usize,
    pub stall_limit: usize,
}

impl Cooling {
    pub fn temperature_at(&self, iteration: usize) -> f64 {
        self.t0 * self.factor.powi(iteration.min(i32::MAX as usize) as i32)
    }
}

impl AnnealParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.t0.is_finite() && self.t0 > 0.0) {
            return Err(invalid(format!("t0 {} must be positive", self.t0)));
        }
        if let Some(f) = self.cooling_factor {
            if !(f > 0.0 && f < 1.0) {
                return Err(invalid(format!("cooling factor {f} must lie in (0, 1)")));
            }
        }
        if self.max_iterations == Some(0) || self.stall_limit == Some(0) || self.moves_per_iteration == 0 {
            return Err(invalid("iteration limits and moves per iteration must be positive"));
        }
        self.inner.validate()
    }

    pub fn resolve(&self, n_tasks: usize) -> Cooling {
        let n = n_tasks.max(1);
        Cooling {
            t0: self.t0,
            factor: self.cooling_factor.unwrap_or_else(|| default_cooling_factor(n)),
            max_iterations: self.max_iterations.unwrap_or(100 * n),
            stall_limit: self.stall_limit.unwrap_or(10 * n),
        }
    }
}

/// `t0 · factor^iteration`.
pub fn temperature_at(ap: &AnnealParams, n_tasks: usize, iteration: usize) -> f64 {
    ap.resolve(n_tasks).temperature_at(iteration)
}

/// Acceptance test: `F = 1` when `ΔE < 0`, else `exp(-ΔE / T)`; accept when
/// `F` exceeds a uniform draw from `[0, 1)`.
pub fn accept<R: Rng + ?Sized>(delta_e: f64, temperature: f64, rng: &mut R) -> bool {
    let flip = if delta_e < 0.0 {
        1.0
    } else {
        (-delta_e / temperature).exp()
    };
    flip > rng.random::<f64>()
}

/// Reconfigures `moves` distinct tasks (among those with more than one
/// option), each to a uniformly chosen different option.
pub fn neighbor<R: Rng + ?Sized>(a: &Assignment, p: &Problem, moves: usize, rng: &mut R) -> Assignment {
    let counts: Vec<usize> = p.tasks().map(|(_, t)| t.options.len()).collect();
    neighbor_by_counts(a, &counts, moves, rng)
}

fn neighbor_by_counts<R: Rng + ?Sized>(a: &Assignment, counts: &[usize], moves: usize, rng: &mut R) -> Assignment {
    let movable: Vec<usize> = (0..counts.len()).filter(|&i| counts[i] > 1).collect();
    let mut next = a.clone();
    if movable.is_empty() {
        return next;
    }
    let k = moves.min(movable.len());
    for pick in rand::seq::index::sample(rng, movable.len(), k).into_vec() {
        let i = movable[pick];
        let cur = next.0[i];
        let r = rng.random_range(0..counts[i] - 1);
        next.0[i] = if r >= cur { r + 1 } else { r };
    }
    next
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iteration: usize,
    /// `None` for candidates with no feasible schedule.
    pub energy: Option<f64>,
    pub temperature: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub schedule: Schedule,
    pub energy: f64,
    pub baseline: Baseline,
    pub weight: f64,
    /// Whether the inner schedule was proven optimal for its assignment.
    pub inner_status: SolveStatus,
    pub history: Vec<HistoryEntry>,
    /// Distinct assignments solved.
    pub evaluations: usize,
}

impl Solution {
    pub fn assignment(&self) -> &Assignment {
        &self.schedule.assignment
    }

    /// One JSON object per line: iteration, energy, temperature, accepted.
    pub fn history_jsonl(&self) -> String {
        self.history
            .iter()
            .map(|h| serde_json::to_string(h).expect("plain struct") + "\n")
            .collect()
    }

    pub(crate) fn from_schedule(
        schedule: Schedule,
        baseline: Baseline,
        weight: f64,
        status: SolveStatus,
    ) -> Result<Self> {
        let energy = compute_objective(schedule.makespan, schedule.cost, &baseline, weight)?;
        Ok(Self {
            schedule,
            energy,
            baseline,
            weight,
            inner_status: status,
            history: Vec::new(),
            evaluations: 1,
        })
    }
}

#[derive(Clone)]
struct Evaluated {
    schedule: Schedule,
    energy: f64,
    status: SolveStatus,
}

pub(crate) struct Evaluator<'a, 'p> {
    flat: &'a FlatProblem<'p>,
    inner: &'a SolveParams,
    baseline: Baseline,
    weight: f64,
    cache: HashMap<Assignment, Option<Evaluated>>,
}

impl<'a, 'p> Evaluator<'a, 'p> {
    fn new(flat: &'a FlatProblem<'p>, inner: &'a SolveParams, baseline: Baseline) -> Self {
        Self {
            flat,
            inner,
            baseline,
            weight: flat.problem.weight,
            cache: HashMap::new(),
        }
    }

    fn eval(&mut self, a: &Assignment) -> Result<Option<Evaluated>> {
        if let Some(hit) = self.cache.get(a) {
            return Ok(hit.clone());
        }
        let r = solve_flat(self.flat, a, self.inner);
        let out = match r.schedule {
            None => None,
            Some(schedule) => Some(Evaluated {
                energy: compute_objective(schedule.makespan, schedule.cost, &self.baseline, self.weight)?,
                schedule,
                status: r.status,
            }),
        };
        self.cache.insert(a.clone(), out.clone());
        Ok(out)
    }
}

/// Searches configurations and schedule together. Deterministic per seed.
pub fn co_optimize(p: &Problem, ap: &AnnealParams) -> Result<Solution> {
    ap.validate()?;
    let flat = FlatProblem::new(p)?;
    let baseline = Baseline::standard(p)?;
    co_optimize_flat(&flat, ap, baseline, Assignment::initial(p))
}

pub(crate) fn co_optimize_flat(
    flat: &FlatProblem<'_>,
    ap: &AnnealParams,
    baseline: Baseline,
    start: Assignment,
) -> Result<Solution> {
    let n = flat.len();
    let cooling = ap.resolve(n);
    let counts: Vec<usize> = flat.options.iter().map(Vec::len).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(ap.seed);
    let mut ev = Evaluator::new(flat, &ap.inner, baseline);

    let mut history = Vec::new();
    let mut current = start;
    let mut current_eval = ev.eval(&current)?;
    let mut best = current_eval.clone();
    history.push(HistoryEntry {
        iteration: 0,
        energy: current_eval.as_ref().map(|e| e.energy),
        temperature: cooling.t0,
        accepted: current_eval.is_some(),
    });

    let mut stall = 0;
    for iteration in 1..=cooling.max_iterations {
        let temperature = cooling.temperature_at(iteration - 1);
        let candidate = neighbor_by_counts(&current, &counts, ap.moves_per_iteration, &mut rng);
        if candidate == current {
            break;
        }
        let cand_eval = ev.eval(&candidate)?;
        let reference = if ap.strict_best_delta { &best } else { &current_eval };
        let reference = reference.as_ref().map_or(f64::INFINITY, |e| e.energy);
        let accepted = match &cand_eval {
            Some(e) => accept(e.energy - reference, temperature, &mut rng),
            None => false,
        };
        history.push(HistoryEntry {
            iteration,
            energy: cand_eval.as_ref().map(|e| e.energy),
            temperature,
            accepted,
        });
        let mut improved = false;
        if accepted {
            let e = cand_eval.expect("accepted candidates are feasible");
            if best.as_ref().is_none_or(|b| e.energy < b.energy) {
                best = Some(e.clone());
                improved = true;
            }
            current = candidate;
            current_eval = Some(e);
        }
        stall = if improved { 0 } else { stall + 1 };
        if stall >= cooling.stall_limit {
            break;
        }
    }

    let best = best.ok_or_else(|| Error::Infeasible("no configuration admits a schedule within the budgets".into()))?;
    Ok(Solution {
        schedule: best.schedule,
        energy: best.energy,
        baseline,
        weight: flat.problem.weight,
        inner_status: best.status,
        history,
        evaluations: ev.cache.len(),
    })
}

/// Runs `restarts` independent seeds (`ap.seed`, `ap.seed + 1`, ...) in
/// parallel and keeps the lowest energy, ties going to the earlier seed.
pub fn co_optimize_restarts(p: &Problem, ap: &AnnealParams, restarts: usize) -> Result<Solution> {
    if restarts == 0 {
        return Err(invalid("restarts must be positive"));
    }
    ap.validate()?;
    let flat = FlatProblem::new(p)?;
    let baseline = Baseline::standard(p)?;
    let runs: Vec<Result<Solution>> = (0..restarts as u64)
        .into_par_iter()
        .map(|k| {
            let params = AnnealParams {
                seed: ap.seed.wrapping_add(k),
                ..ap.clone()
            };
            co_optimize_flat(&flat, &params, baseline, Assignment::initial(p))
        })
        .collect();
    let mut best: Option<Solution> = None;
    let mut first_err = None;
    for r in runs {
        match r {
            Ok(s) => {
                if best.as_ref().is_none_or(|b| s.energy < b.energy) {
                    best = Some(s);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_err.expect("at least one run"))
}
