//! Runtime menus from the Universal Scalability Law.
//!
//! Throughput on `N` nodes is `X(N) = γN / (1 + α(N−1) + βN(N−1))` and the
//! runtime of a fixed amount of `work` is `work / X(N)`. With `β > 0` the curve
//! eventually bends down, so adding nodes can make a task slower.
//!
//! Callers with their own runtime predictions can skip the model entirely and
//! feed a [`DurationTable`] to [`options_from_table`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{round_up, ConfigOption, InstanceType, ResourceId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UslParams {
    /// Concurrency.
    pub gamma: f64,
    /// Contention.
    pub alpha: f64,
    /// Coherency.
    pub beta: f64,
    pub work: f64,
}

impl UslParams {
    pub fn new(gamma: f64, alpha: f64, beta: f64, work: f64) -> Result<Self> {
        let p = Self {
            gamma,
            alpha,
            beta,
            work,
        };
        p.check()?;
        Ok(p)
    }

    fn check(&self) -> Result<()> {
        let unit = |x: f64| x.is_finite() && (0.0..=1.0).contains(&x);
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(invalid(format!("gamma {} must be positive", self.gamma)));
        }
        if !unit(self.alpha) || !unit(self.beta) {
            return Err(invalid(format!(
                "alpha {} and beta {} must lie in [0, 1]",
                self.alpha, self.beta
            )));
        }
        if !(self.work.is_finite() && self.work > 0.0) {
            return Err(invalid(format!("work {} must be positive", self.work)));
        }
        Ok(())
    }
}

/// A single observed execution of a task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedRun {
    pub node_count: u32,
    pub duration: f64,
    #[serde(default)]
    pub demands_per_node: BTreeMap<ResourceId, f64>,
}

fn penalty(alpha: f64, beta: f64, n: f64) -> f64 {
    1.0 + alpha * (n - 1.0) + beta * n * (n - 1.0)
}

pub fn throughput(p: &UslParams, n: u32) -> Result<f64> {
    if n == 0 {
        return Err(invalid("node count must be at least 1"));
    }
    p.check()?;
    let n = f64::from(n);
    Ok(p.gamma * n / penalty(p.alpha, p.beta, n))
}

pub fn predict_runtime(p: &UslParams, n: u32) -> Result<f64> {
    Ok(p.work / throughput(p, n)?)
}

/// Work that makes `γ = 1` reproduce the observation.
pub fn default_work(obs: &ObservedRun, alpha: f64, beta: f64) -> f64 {
    let n = f64::from(obs.node_count.max(1));
    obs.duration * n / penalty(alpha, beta, n)
}

/// Solves for `γ` so that the model reproduces `obs` exactly.
pub fn fit_gamma(obs: &ObservedRun, alpha: f64, beta: f64, work: f64) -> Result<UslParams> {
    if !(obs.duration.is_finite() && obs.duration > 0.0) {
        return Err(invalid(format!("observed duration {} must be positive", obs.duration)));
    }
    if obs.node_count == 0 {
        return Err(invalid("observed node count must be at least 1"));
    }
    if !(work.is_finite() && work > 0.0) {
        return Err(invalid(format!("work {work} must be positive")));
    }
    let n = f64::from(obs.node_count);
    let gamma = work * penalty(alpha, beta, n) / (n * obs.duration);
    UslParams::new(gamma, alpha, beta, work)
}

/// How an option's resource demand follows from its instance type and node
/// count. The instance pool demand (`node_count` on
/// [`InstanceType::pool_resource`]) is always added on top.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemandRule {
    PoolOnly,
    /// Per node: the instance's vcpus and memory on the given resources.
    InstanceSize {
        vcpu: ResourceId,
        memory: ResourceId,
    },
    /// Per node: a fixed demand vector.
    PerNode(BTreeMap<ResourceId, f64>),
}

impl DemandRule {
    fn per_node(&self, inst: &InstanceType) -> BTreeMap<ResourceId, f64> {
        match self {
            DemandRule::PoolOnly => BTreeMap::new(),
            DemandRule::InstanceSize { vcpu, memory } => {
                [(vcpu.clone(), f64::from(inst.vcpus)), (memory.clone(), inst.memory_gb)].into()
            }
            DemandRule::PerNode(m) => m.clone(),
        }
    }

    fn demands(&self, inst: &InstanceType, nodes: u32) -> BTreeMap<ResourceId, f64> {
        let k = f64::from(nodes);
        let mut d: BTreeMap<ResourceId, f64> = self.per_node(inst).into_iter().map(|(r, v)| (r, v * k)).collect();
        *d.entry(inst.pool_resource()).or_insert(0.0) += k;
        d
    }
}

fn dedup_catalog(catalog: &[InstanceType]) -> Vec<&InstanceType> {
    let mut seen = std::collections::HashSet::new();
    catalog.iter().filter(|i| seen.insert(i.name.as_str())).collect()
}

fn sorted_counts(node_counts: &[u32]) -> Result<Vec<u32>> {
    let mut counts = node_counts.to_vec();
    counts.sort_unstable();
    counts.dedup();
    if counts.first() == Some(&0) {
        return Err(invalid("node counts must be positive"));
    }
    Ok(counts)
}

/// One option per (instance type, node count), in catalog order then by
/// ascending node count. Durations are rounded up to `quantum`.
pub fn enumerate_options(
    model: &UslParams,
    catalog: &[InstanceType],
    node_counts: &[u32],
    rule: &DemandRule,
    quantum: f64,
) -> Result<Vec<ConfigOption>> {
    if catalog.is_empty() || node_counts.is_empty() {
        return Err(invalid("catalog and node counts must be non-empty"));
    }
    let counts = sorted_counts(node_counts)?;
    let mut out = Vec::new();
    for inst in dedup_catalog(catalog) {
        for &n in &counts {
            out.push(ConfigOption {
                option_id: out.len(),
                instance: inst.clone(),
                node_count: n,
                demands: rule.demands(inst, n),
                duration: round_up(predict_runtime(model, n)?, quantum),
            });
        }
    }
    Ok(out)
}

/// Externally predicted durations, keyed by task, instance and node count.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DurationTable {
    pub entries: Vec<DurationEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurationEntry {
    pub task: String,
    pub instance: String,
    pub node_count: u32,
    pub seconds: f64,
}

/// Builds the option menu of `task` from a duration table, ordered like
/// [`enumerate_options`]. Entries naming instances missing from the catalog
/// are an error.
pub fn options_from_table(
    table: &DurationTable,
    task: &str,
    catalog: &[InstanceType],
    rule: &DemandRule,
    quantum: f64,
) -> Result<Vec<ConfigOption>> {
    let catalog = dedup_catalog(catalog);
    let mut rows: Vec<(usize, u32, f64)> = Vec::new();
    for e in table.entries.iter().filter(|e| e.task == task) {
        let pos = catalog
            .iter()
            .position(|i| i.name == e.instance)
            .ok_or_else(|| Error::UnknownId {
                kind: "instance",
                id: e.instance.clone(),
            })?;
        if e.node_count == 0 || !(e.seconds.is_finite() && e.seconds > 0.0) {
            return Err(invalid(format!(
                "table entry for {task} on {}x{} is not positive",
                e.node_count, e.instance
            )));
        }
        rows.push((pos, e.node_count, e.seconds));
    }
    if rows.is_empty() {
        return Err(invalid(format!("no table entries for task {task}")));
    }
    rows.sort_by_key(|r| (r.0, r.1));
    rows.dedup_by(|a, b| (a.0, a.1) == (b.0, b.1));
    Ok(rows
        .into_iter()
        .enumerate()
        .map(|(c, (pos, n, secs))| ConfigOption {
            option_id: c,
            instance: catalog[pos].clone(),
            node_count: n,
            demands: rule.demands(catalog[pos], n),
            duration: round_up(secs, quantum),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::m5_catalog;

    fn usl(gamma: f64, alpha: f64, beta: f64, work: f64) -> UslParams {
        UslParams::new(gamma, alpha, beta, work).unwrap()
    }

    #[test]
    fn throughput_examples() {
        assert_eq!(throughput(&usl(1.0, 0.0, 0.0, 1.0), 4).unwrap(), 4.0);
        for n in [1, 2, 7, 30] {
            assert!((throughput(&usl(2.0, 1.0, 0.0, 1.0), n).unwrap() - 2.0).abs() < 1e-12);
        }
        // 8 / (1 + 0.7 + 0.05 * 56)
        let x = throughput(&usl(1.0, 0.1, 0.05, 1.0), 8).unwrap();
        assert!((x - 8.0 / 4.5).abs() < 1e-12, "{x}");
        assert!(throughput(&usl(1.0, 0.0, 0.0, 1.0), 0).is_err());
    }

    #[test]
    fn params_are_bounded() {
        assert!(UslParams::new(1.0, 1.5, 0.0, 1.0).is_err());
        assert!(UslParams::new(0.0, 0.5, 0.0, 1.0).is_err());
        assert!(UslParams::new(1.0, 0.5, -0.1, 1.0).is_err());
        assert!(UslParams::new(1.0, 0.5, 0.1, 0.0).is_err());
    }

    #[test]
    fn fit_gamma_examples() {
        let obs = |n, d| ObservedRun {
            node_count: n,
            duration: d,
            demands_per_node: BTreeMap::new(),
        };
        let p = fit_gamma(&obs(1, 100.0), 0.7, 0.3, 100.0).unwrap();
        assert!((p.gamma - 1.0).abs() < 1e-12);
        assert!((predict_runtime(&p, 1).unwrap() - 100.0).abs() < 1e-9);

        let p = fit_gamma(&obs(4, 30.0), 0.0, 0.0, 120.0).unwrap();
        assert!((p.gamma - 1.0).abs() < 1e-12);

        assert!(fit_gamma(&obs(4, 0.0), 0.0, 0.0, 1.0).is_err());
        assert!(fit_gamma(&obs(4, 1.0), 0.0, 0.0, -1.0).is_err());
    }

    #[test]
    fn runtime_examples() {
        let p = usl(1.0, 0.0, 0.0, 100.0);
        assert_eq!(predict_runtime(&p, 1).unwrap(), 100.0);
        assert_eq!(predict_runtime(&p, 10).unwrap(), 10.0);
        let p = usl(1.0, 0.0, 0.2, 100.0);
        let r4 = predict_runtime(&p, 4).unwrap();
        let r8 = predict_runtime(&p, 8).unwrap();
        assert!(r8 > r4);
    }

    #[test]
    fn single_count_menu() {
        let opts = enumerate_options(
            &usl(2.0, 0.0, 0.0, 100.0),
            &m5_catalog()[..1],
            &[1],
            &DemandRule::PoolOnly,
            1.0,
        )
        .unwrap();
        assert_eq!(opts.len(), 1);
        assert_eq!(opts[0].duration, 50.0);
        assert_eq!(opts[0].demands[&ResourceId::from("pool.m5_4xlarge.nodes")], 1.0);
    }

    #[test]
    fn menu_order_and_demands() {
        let rule = DemandRule::InstanceSize {
            vcpu: "cluster.vcpu".into(),
            memory: "cluster.memory_gb".into(),
        };
        let opts = enumerate_options(
            &usl(1.0, 0.1, 0.01, 1000.0),
            &m5_catalog()[..2],
            &[4, 1, 2, 2],
            &rule,
            1.0,
        )
        .unwrap();
        let labels: Vec<_> = opts.iter().map(ConfigOption::label).collect();
        assert_eq!(
            labels,
            [
                "1xm5.4xlarge",
                "2xm5.4xlarge",
                "4xm5.4xlarge",
                "1xm5.8xlarge",
                "2xm5.8xlarge",
                "4xm5.8xlarge"
            ]
        );
        assert!(opts.iter().enumerate().all(|(i, o)| o.option_id == i));
        assert_eq!(opts[4].demands[&ResourceId::from("cluster.vcpu")], 64.0);
        assert_eq!(opts[4].demands[&ResourceId::from("pool.m5_8xlarge.nodes")], 2.0);
        assert!(enumerate_options(&usl(1.0, 0.0, 0.0, 1.0), &[], &[1], &rule, 1.0).is_err());
        assert!(enumerate_options(&usl(1.0, 0.0, 0.0, 1.0), &m5_catalog(), &[], &rule, 1.0).is_err());
    }

    #[test]
    fn table_menu() {
        let table = DurationTable {
            entries: vec![
                DurationEntry {
                    task: "etl".into(),
                    instance: "m5.8xlarge".into(),
                    node_count: 2,
                    seconds: 99.5,
                },
                DurationEntry {
                    task: "etl".into(),
                    instance: "m5.4xlarge".into(),
                    node_count: 4,
                    seconds: 120.0,
                },
                DurationEntry {
                    task: "other".into(),
                    instance: "m5.4xlarge".into(),
                    node_count: 1,
                    seconds: 1.0,
                },
            ],
        };
        let opts = options_from_table(&table, "etl", &m5_catalog(), &DemandRule::PoolOnly, 1.0).unwrap();
        assert_eq!(opts.len(), 2);
        assert_eq!(opts[0].label(), "4xm5.4xlarge");
        assert_eq!(opts[1].duration, 100.0);
        assert!(options_from_table(&table, "missing", &m5_catalog(), &DemandRule::PoolOnly, 1.0).is_err());
    }
}
