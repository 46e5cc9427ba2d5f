use serde::{Deserialize, Serialize};

use super::Instance;
use crate::error::{Error, Result};
use crate::model::EPS;

/// Ordering rule for serial list scheduling. Higher values go first; ties
/// fall back to submission/declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Priority {
    /// Longest downstream path, including the task's own duration.
    CriticalPath,
    /// Number of transitive descendants (default workflow-manager weighting).
    TopologicalFifo,
    /// Number of direct children only.
    DirectChildren,
}

impl Priority {
    pub(crate) fn values(self, inst: &Instance) -> Vec<f64> {
        match self {
            Priority::CriticalPath => inst.tail.clone(),
            Priority::TopologicalFifo => inst.descendant_counts().into_iter().map(|c| c as f64).collect(),
            Priority::DirectChildren => inst.succs.iter().map(|s| s.len() as f64).collect(),
        }
    }
}

/// Step function of resource usage over time. Segment `k` covers
/// `[times[k], times[k + 1])`; the last one runs forever.
pub(crate) struct Profile {
    times: Vec<f64>,
    usage: Vec<Vec<f64>>,
}

impl Profile {
    pub fn new(inst: &Instance) -> Self {
        let m = inst.caps.len();
        let mut p = Self {
            times: vec![0.0],
            usage: vec![vec![0.0; m]],
        };
        for (until, dem) in &inst.reservations {
            if *until > EPS {
                p.add(0.0, *until, dem);
            }
        }
        p
    }

    fn segment_at(&self, t: f64) -> usize {
        // last k with times[k] <= t
        self.times.partition_point(|&x| x <= t + EPS).saturating_sub(1)
    }

    fn split(&mut self, t: f64) -> usize {
        let k = self.segment_at(t);
        if (self.times[k] - t).abs() <= EPS {
            return k;
        }
        self.times.insert(k + 1, t);
        let u = self.usage[k].clone();
        self.usage.insert(k + 1, u);
        k + 1
    }

    pub fn add(&mut self, start: f64, end: f64, dem: &[f64]) {
        let a = self.split(start);
        let b = self.split(end);
        for seg in &mut self.usage[a..b] {
            for (u, d) in seg.iter_mut().zip(dem) {
                *u += d;
            }
        }
    }

    fn fits(&self, k: usize, dem: &[f64], caps: &[f64]) -> bool {
        self.usage[k]
            .iter()
            .zip(dem)
            .zip(caps)
            .all(|((u, d), c)| *d <= 0.0 || u + d <= c + EPS * c.max(1.0))
    }

    /// Earliest `t >= earliest` such that `dem` fits on `[t, t + dur)`.
    pub fn earliest_fit(&self, earliest: f64, dur: f64, dem: &[f64], caps: &[f64]) -> f64 {
        let mut t = earliest;
        let mut k = self.segment_at(t);
        let mut j = k;
        loop {
            if j >= self.times.len() || self.times[j] >= t + dur - EPS {
                return t;
            }
            if self.fits(j, dem, caps) {
                j += 1;
            } else {
                // the last segment never frees up; callers check per-task fit first
                debug_assert!(j + 1 < self.times.len());
                k = j + 1;
                t = self.times[k];
                j = k;
            }
        }
    }
}

/// Serial schedule generation: repeatedly take the highest-priority task whose
/// predecessors are all placed and start it at the earliest time precedence,
/// release and capacity allow.
pub(crate) fn serial_sgs(inst: &Instance, prio: &[f64]) -> Result<Vec<f64>> {
    let n = inst.n();
    inst.check_single_fit()?;
    let mut profile = Profile::new(inst);
    let mut starts = vec![f64::NAN; n];
    let mut waiting: Vec<usize> = inst.preds.iter().map(Vec::len).collect();
    let mut ready: Vec<usize> = (0..n).filter(|&j| waiting[j] == 0).collect();
    for _ in 0..n {
        let (pos, &j) = ready
            .iter()
            .enumerate()
            .max_by(|(_, &a), (_, &b)| {
                prio[a]
                    .total_cmp(&prio[b])
                    .then(inst.fifo_rank[b].cmp(&inst.fifo_rank[a]))
            })
            .ok_or_else(|| Error::Infeasible("precedence graph is cyclic".into()))?;
        ready.swap_remove(pos);
        let earliest = inst.preds[j]
            .iter()
            .map(|&i| starts[i] + inst.dur[i])
            .fold(inst.release[j], f64::max);
        let t = profile.earliest_fit(earliest, inst.dur[j], &inst.dem[j], &inst.caps);
        starts[j] = t;
        profile.add(t, t + inst.dur[j], &inst.dem[j]);
        for &s in &inst.succs[j] {
            waiting[s] -= 1;
            if waiting[s] == 0 {
                ready.push(s);
            }
        }
    }
    Ok(starts)
}
