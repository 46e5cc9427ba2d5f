//! Depth-first branch and bound over start decisions.
//!
//! Decision points are the time origin, task ends, release times and
//! reservation ends. At each point the search decides, task by task in
//! priority order, whether an eligible task starts now; once every eligible
//! task has been decided it advances to the next decision point. Left-shifted
//! schedules are dominant for makespan, so restricting starts to these points
//! loses nothing.

use std::collections::HashSet;
use std::time::Instant;

use super::Instance;
use crate::model::EPS;

#[derive(Hash, PartialEq, Eq)]
struct StateKey {
    time: u64,
    finished: Vec<u64>,
    running: Vec<(u32, u64)>,
}

pub(crate) struct Limits {
    pub node_limit: Option<u64>,
    pub deadline: Option<Instant>,
}

pub(crate) struct Outcome {
    pub starts: Option<Vec<f64>>,
    pub complete: bool,
    pub nodes: u64,
}

pub(crate) struct Search<'a> {
    inst: &'a Instance,
    rank: Vec<usize>,
    starts: Vec<f64>,
    started: Vec<bool>,
    n_started: usize,
    best: f64,
    best_starts: Option<Vec<f64>>,
    budget: f64,
    limits: Limits,
    nodes: u64,
    aborted: bool,
    seen: HashSet<StateKey>,
}

fn tol(x: f64) -> f64 {
    if x.is_finite() {
        EPS * x.abs().max(1.0)
    } else {
        0.0
    }
}

impl<'a> Search<'a> {
    pub fn new(inst: &'a Instance, budget: f64, limits: Limits) -> Self {
        let n = inst.n();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            inst.tail[b]
                .total_cmp(&inst.tail[a])
                .then(inst.fifo_rank[a].cmp(&inst.fifo_rank[b]))
        });
        let mut rank = vec![0; n];
        for (r, &j) in order.iter().enumerate() {
            rank[j] = r;
        }
        Self {
            inst,
            rank,
            starts: vec![0.0; n],
            started: vec![false; n],
            n_started: 0,
            best: f64::INFINITY,
            best_starts: None,
            budget,
            limits,
            nodes: 0,
            aborted: false,
            seen: HashSet::new(),
        }
    }

    /// Seeds the incumbent with a known feasible schedule.
    pub fn offer(&mut self, starts: Vec<f64>) {
        let ms = self.inst.makespan_of(&starts);
        if ms <= self.budget + tol(self.budget) && ms < self.best - tol(self.best) {
            self.best = ms;
            self.best_starts = Some(starts);
        }
    }

    pub fn run(mut self) -> Outcome {
        if self.inst.n() > 0 {
            self.decide_at(0.0);
        } else {
            self.best = 0.0;
            self.best_starts = Some(Vec::new());
        }
        Outcome {
            starts: self.best_starts,
            complete: !self.aborted,
            nodes: self.nodes,
        }
    }

    fn end(&self, j: usize) -> f64 {
        self.starts[j] + self.inst.dur[j]
    }

    fn out_of_budget(&mut self) -> bool {
        if self.aborted {
            return true;
        }
        if let Some(limit) = self.limits.node_limit {
            if self.nodes >= limit {
                self.aborted = true;
            }
        }
        if let Some(deadline) = self.limits.deadline {
            if self.nodes.is_multiple_of(64) && Instant::now() >= deadline {
                self.aborted = true;
            }
        }
        self.aborted
    }

    fn lower_bound(&self, t: f64) -> f64 {
        let inst = self.inst;
        let mut finish = vec![0.0; inst.n()];
        let mut lb = t;
        for &j in &inst.topo {
            finish[j] = if self.started[j] {
                self.end(j)
            } else {
                let est = inst.preds[j]
                    .iter()
                    .map(|&i| finish[i])
                    .fold(t.max(inst.release[j]), f64::max);
                est + inst.dur[j]
            };
            lb = lb.max(finish[j]);
        }
        for (m, &cap) in inst.caps.iter().enumerate() {
            let mut energy = 0.0;
            for j in 0..inst.n() {
                let d = inst.dem[j][m];
                if d <= 0.0 {
                    continue;
                }
                if !self.started[j] {
                    energy += d * inst.dur[j];
                } else if self.end(j) > t {
                    energy += d * (self.end(j) - t);
                }
            }
            if energy <= 0.0 {
                continue;
            }
            for (until, dem) in &inst.reservations {
                if *until > t {
                    energy += dem[m] * (until - t);
                }
            }
            lb = lb.max(t + energy / cap);
        }
        lb
    }

    fn decide_at(&mut self, t: f64) {
        self.nodes += 1;
        if self.out_of_budget() {
            return;
        }
        let inst = self.inst;
        let n = inst.n();
        if self.n_started == n {
            let starts = self.starts.clone();
            self.offer(starts);
            return;
        }
        let lb = self.lower_bound(t);
        if lb >= self.best - tol(self.best) || lb > self.budget + tol(self.budget) {
            return;
        }

        let mut finished = vec![0u64; n.div_ceil(64)];
        let mut running = Vec::new();
        for j in (0..n).filter(|&j| self.started[j]) {
            if self.end(j) <= t + tol(t) {
                finished[j / 64] |= 1 << (j % 64);
            } else {
                running.push((j as u32, self.end(j).to_bits()));
            }
        }
        let key = StateKey {
            time: t.to_bits(),
            finished,
            running,
        };
        if !self.seen.insert(key) {
            return;
        }

        let mut eligible: Vec<usize> = (0..n)
            .filter(|&j| {
                !self.started[j]
                    && inst.release[j] <= t + tol(t)
                    && inst.preds[j]
                        .iter()
                        .all(|&i| self.started[i] && self.end(i) <= t + tol(t))
            })
            .collect();
        eligible.sort_by_key(|&j| self.rank[j]);

        let mut usage = vec![0.0; inst.caps.len()];
        for j in (0..n).filter(|&j| self.started[j] && self.end(j) > t + tol(t)) {
            for (u, d) in usage.iter_mut().zip(&inst.dem[j]) {
                *u += d;
            }
        }
        for (until, dem) in &inst.reservations {
            if *until > t + tol(t) {
                for (u, d) in usage.iter_mut().zip(dem) {
                    *u += d;
                }
            }
        }
        self.branch(t, &eligible, 0, &mut usage);
    }

    fn fits(&self, j: usize, usage: &[f64]) -> bool {
        self.inst.dem[j]
            .iter()
            .zip(usage)
            .zip(&self.inst.caps)
            .all(|((d, u), c)| *d <= 0.0 || u + d <= c + tol(*c))
    }

    fn branch(&mut self, t: f64, eligible: &[usize], pos: usize, usage: &mut Vec<f64>) {
        if self.aborted {
            return;
        }
        if pos == eligible.len() {
            if self.n_started == self.inst.n() {
                self.decide_at(t);
            } else if let Some(next) = self.next_event(t) {
                self.decide_at(next);
            }
            return;
        }
        let j = eligible[pos];
        if self.fits(j, usage) {
            self.started[j] = true;
            self.starts[j] = t;
            self.n_started += 1;
            for (u, d) in usage.iter_mut().zip(&self.inst.dem[j]) {
                *u += d;
            }
            self.branch(t, eligible, pos + 1, usage);
            for (u, d) in usage.iter_mut().zip(&self.inst.dem[j]) {
                *u -= d;
            }
            self.n_started -= 1;
            self.started[j] = false;
        }
        self.branch(t, eligible, pos + 1, usage);
    }

    fn next_event(&self, t: f64) -> Option<f64> {
        let inst = self.inst;
        let after = |x: f64| x > t + tol(t);
        let ends = (0..inst.n()).filter(|&j| self.started[j]).map(|j| self.end(j));
        let releases = (0..inst.n()).filter(|&j| !self.started[j]).map(|j| inst.release[j]);
        let reservations = inst.reservations.iter().map(|(u, _)| *u);
        ends.chain(releases)
            .chain(reservations)
            .filter(|&x| after(x))
            .min_by(f64::total_cmp)
    }
}
