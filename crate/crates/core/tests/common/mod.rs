//! Reference implementations used as oracles. Nothing here calls the
//! library's schedulers: makespans come from serial schedule generation over
//! every precedence-feasible task order, which reaches every active schedule
//! and therefore an optimal one.
#![allow(dead_code)]

use std::collections::HashMap;

use cosched::model::{Assignment, Problem, ResourceId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Fixed {
    pub dur: Vec<f64>,
    pub dem: Vec<Vec<f64>>,
    pub caps: Vec<f64>,
    pub preds: Vec<Vec<usize>>,
    pub release: Vec<f64>,
}

impl Fixed {
    pub fn from_problem(p: &Problem, a: &Assignment) -> Self {
        assert!(p.reservations.is_empty(), "oracle does not model reservations");
        let res: Vec<_> = p.capacities.keys().cloned().collect();
        let mut dur = Vec::new();
        let mut dem = Vec::new();
        let mut release = Vec::new();
        let mut preds = Vec::new();
        let mut offset = 0;
        for dag in &p.dags {
            let local: HashMap<&str, usize> = dag
                .tasks
                .iter()
                .enumerate()
                .map(|(i, t)| (t.task_id.as_str(), offset + i))
                .collect();
            for t in &dag.tasks {
                let o = &t.options[a.0[dur.len()]];
                dur.push(o.duration);
                dem.push(res.iter().map(|r| o.demands.get(r).copied().unwrap_or(0.0)).collect());
                release.push(dag.submit_time.max(t.release));
                preds.push(Vec::new());
            }
            for (x, y) in &dag.edges {
                preds[local[y.as_str()]].push(local[x.as_str()]);
            }
            offset += dag.tasks.len();
        }
        Self {
            dur,
            dem,
            caps: p.capacities.values().copied().collect(),
            preds,
            release,
        }
    }

    pub fn n(&self) -> usize {
        self.dur.len()
    }

    fn fits_at(&self, placed: &[(usize, f64)], j: usize, t: f64) -> bool {
        // usage only rises at start times, so checking t and every start
        // inside [t, t + d) covers the interval
        let end = t + self.dur[j];
        let mut points = vec![t];
        points.extend(placed.iter().map(|&(_, s)| s).filter(|&s| s > t && s < end));
        points.iter().all(|&x| {
            (0..self.caps.len()).all(|m| {
                let used: f64 = placed
                    .iter()
                    .filter(|&&(i, s)| s <= x && x < s + self.dur[i])
                    .map(|&(i, _)| self.dem[i][m])
                    .sum();
                used + self.dem[j][m] <= self.caps[m] + 1e-9
            })
        })
    }

    /// Serial schedule generation for one task order.
    pub fn sgs(&self, order: &[usize]) -> Vec<f64> {
        let mut starts = vec![0.0; self.n()];
        let mut placed: Vec<(usize, f64)> = Vec::new();
        for &j in order {
            let est = self.preds[j]
                .iter()
                .map(|&i| starts[i] + self.dur[i])
                .fold(self.release[j], f64::max);
            let mut cands: Vec<f64> = placed
                .iter()
                .map(|&(i, s)| s + self.dur[i])
                .filter(|&e| e > est)
                .collect();
            cands.push(est);
            cands.sort_by(f64::total_cmp);
            let t = cands
                .into_iter()
                .find(|&t| self.fits_at(&placed, j, t))
                .expect("the empty cluster fits");
            starts[j] = t;
            placed.push((j, t));
        }
        starts
    }

    pub fn makespan(&self, starts: &[f64]) -> f64 {
        starts.iter().zip(&self.dur).map(|(s, d)| s + d).fold(0.0, f64::max)
    }

    /// Minimum makespan over every topological order, or `None` when some
    /// task alone exceeds a capacity.
    pub fn optimum(&self) -> Option<f64> {
        if (0..self.n()).any(|j| self.dem[j].iter().zip(&self.caps).any(|(d, c)| d > c)) {
            return None;
        }
        let mut best = f64::INFINITY;
        let mut order = Vec::new();
        let mut done = vec![false; self.n()];
        self.orders(&mut order, &mut done, &mut best);
        Some(best)
    }

    fn orders(&self, order: &mut Vec<usize>, done: &mut [bool], best: &mut f64) {
        if order.len() == self.n() {
            *best = best.min(self.makespan(&self.sgs(order)));
            return;
        }
        for j in 0..self.n() {
            if !done[j] && self.preds[j].iter().all(|&i| done[i]) {
                done[j] = true;
                order.push(j);
                self.orders(order, done, best);
                order.pop();
                done[j] = false;
            }
        }
    }
}

pub fn cost(p: &Problem, a: &Assignment) -> f64 {
    p.dags
        .iter()
        .flat_map(|d| d.tasks.iter())
        .zip(&a.0)
        .map(|(t, &c)| {
            let o = &t.options[c];
            f64::from(o.node_count) * o.duration / 3600.0 * o.instance.price_per_hour
        })
        .sum()
}

pub fn energy(m: f64, c: f64, m0: f64, c0: f64, w: f64) -> f64 {
    w * (m - m0) / m0 + (1.0 - w) * (c - c0) / c0
}

/// Exhaustive co-optimization: every assignment (odometer order), each with
/// its exact makespan. Returns (energy, makespan, cost, assignment) of the
/// first minimum.
pub fn exhaustive(p: &Problem, m0: f64, c0: f64) -> Option<(f64, f64, f64, Assignment)> {
    let counts: Vec<usize> = p
        .dags
        .iter()
        .flat_map(|d| d.tasks.iter())
        .map(|t| t.options.len())
        .collect();
    let mut digits = vec![0usize; counts.len()];
    let mut best: Option<(f64, f64, f64, Assignment)> = None;
    loop {
        let a = Assignment(digits.clone());
        if let Some(m) = Fixed::from_problem(p, &a).optimum() {
            let c = cost(p, &a);
            let within = p.makespan_budget.is_none_or(|b| m <= b + 1e-9) && p.cost_budget.is_none_or(|b| c <= b + 1e-9);
            let e = energy(m, c, m0, c0, p.weight);
            if within && best.as_ref().is_none_or(|b| e < b.0) {
                best = Some((e, m, c, a));
            }
        }
        let mut k = counts.len();
        loop {
            if k == 0 {
                return best;
            }
            k -= 1;
            digits[k] += 1;
            if digits[k] < counts[k] {
                break;
            }
            digits[k] = 0;
        }
    }
}

/// Random fixed-assignment instance: integer durations, one or two
/// resources, sparse forward edges.
pub fn random_fixed(seed: u64, max_tasks: usize) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=max_tasks);
    let resources = rng.random_range(1..=2usize);
    let caps: Vec<f64> = (0..resources).map(|_| f64::from(rng.random_range(2..=6u32))).collect();
    let mut durations = Vec::new();
    let mut demands = Vec::new();
    for _ in 0..n {
        durations.push(f64::from(rng.random_range(1..=9u32)));
        demands.push(
            caps.iter()
                .map(|&c| f64::from(rng.random_range(0..=c as u32)))
                .collect::<Vec<f64>>(),
        );
    }
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(0.2) {
                edges.push((i, j));
            }
        }
    }
    let mut p = cosched::generate::fixed_problem(&durations, &vec![0.0; n], caps[0], &edges);
    let names: Vec<String> = (0..resources).map(|m| format!("r{m}")).collect();
    p.capacities = names
        .iter()
        .map(|s| ResourceId::new(s.as_str()))
        .zip(caps.iter().copied())
        .collect();
    for (t, d) in p.dags[0].tasks.iter_mut().zip(&demands) {
        t.options[0].demands = names
            .iter()
            .map(|s| ResourceId::new(s.as_str()))
            .zip(d.iter().copied())
            .collect();
    }
    p
}
