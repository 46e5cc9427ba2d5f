//! Seeded instance generators used by the examples, tests and benchmarks.

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{m5_catalog, ConfigOption, Dag, InstanceType, Problem, ResourceId, Task};
use crate::predictor::{enumerate_options, DemandRule, UslParams};
use crate::tracesim::TraceTask;

/// Shape of a random single-DAG instance.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomSpec {
    pub min_tasks: usize,
    pub tasks: usize,
    pub min_options: usize,
    pub max_options: usize,
    /// Probability of an edge `i -> j` for every `i < j`.
    pub edge_probability: f64,
    /// Capacity of every instance pool, in nodes.
    pub pool_nodes: f64,
    pub node_counts: Vec<u32>,
    /// Draw options from all four m5 sizes instead of m5.4xlarge only.
    pub mixed_instances: bool,
    pub weight: f64,
}

impl RandomSpec {
    /// Up to four tasks with two to four options each.
    pub fn small() -> Self {
        Self {
            min_tasks: 2,
            tasks: 4,
            min_options: 2,
            max_options: 4,
            edge_probability: 0.35,
            pool_nodes: 16.0,
            node_counts: vec![1, 2, 4, 6, 8, 12, 16],
            mixed_instances: false,
            weight: 0.5,
        }
    }
}

fn random_usl(rng: &mut ChaCha8Rng) -> UslParams {
    let alpha = rng.random_range(0.0..0.3);
    let beta = rng.random_range(0.0..0.01);
    let work = rng.random_range(200.0..2000.0_f64).round();
    UslParams::new(1.0, alpha, beta, work).expect("bounded draws")
}

fn renumber(mut options: Vec<ConfigOption>) -> Vec<ConfigOption> {
    for (i, o) in options.iter_mut().enumerate() {
        o.option_id = i;
    }
    options
}

/// A random single-DAG problem with integer durations.
pub fn random_problem(seed: u64, spec: &RandomSpec) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lo = spec.min_tasks.clamp(1, spec.tasks.max(1));
    let n = rng.random_range(lo..=spec.tasks.max(lo));
    let catalog = if spec.mixed_instances {
        m5_catalog()
    } else {
        m5_catalog()[..1].to_vec()
    };

    let mut tasks = Vec::with_capacity(n);
    for j in 0..n {
        let usl = random_usl(&mut rng);
        let menu =
            enumerate_options(&usl, &catalog, &spec.node_counts, &DemandRule::PoolOnly, 1.0).expect("non-empty menu");
        let menu: Vec<ConfigOption> = menu
            .into_iter()
            .filter(|o| f64::from(o.node_count) <= spec.pool_nodes)
            .collect();
        let k = rng
            .random_range(spec.min_options..=spec.max_options)
            .clamp(1, menu.len());
        let mut picked: Vec<usize> = rand::seq::index::sample(&mut rng, menu.len(), k).into_vec();
        picked.sort_unstable();
        let options = renumber(picked.into_iter().map(|i| menu[i].clone()).collect());
        let initial_option = rng.random_range(0..options.len());
        tasks.push(Task {
            task_id: format!("t{j}"),
            options,
            initial_option,
            release: 0.0,
        });
    }
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(spec.edge_probability) {
                edges.push((format!("t{i}"), format!("t{j}")));
            }
        }
    }
    let capacities = catalog
        .iter()
        .map(|inst| (inst.pool_resource(), spec.pool_nodes))
        .collect();
    Problem {
        dags: vec![Dag {
            dag_id: format!("g{seed}"),
            tasks,
            edges,
            submit_time: 0.0,
        }],
        capacities,
        makespan_budget: None,
        cost_budget: None,
        weight: spec.weight,
        time_origin: 0.0,
        reservations: vec![],
    }
}

/// `dags` layered DAGs of `tasks_per_dag` tasks, `width` tasks per layer at
/// most and 3 to 5 layers, sharing one m5.4xlarge pool.
pub fn layered_problem(seed: u64, dags: usize, tasks_per_dag: usize, width: usize, pool_nodes: f64) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let catalog = &m5_catalog()[..1];
    let counts = [1, 2, 4, 8];
    let mut out = Vec::with_capacity(dags);
    for d in 0..dags {
        let depth = rng.random_range(3..=5usize).min(tasks_per_dag);
        // distribute tasks over layers, each layer non-empty and at most `width`
        let mut layers = vec![1usize; depth];
        let mut left = tasks_per_dag.saturating_sub(depth);
        while left > 0 {
            let open: Vec<usize> = (0..depth).filter(|&l| layers[l] < width).collect();
            let Some(&l) = open.choose(&mut rng) else { break };
            layers[l] += 1;
            left -= 1;
        }
        let mut tasks = Vec::new();
        let mut edges = Vec::new();
        let mut prev: Vec<String> = Vec::new();
        for (l, &size) in layers.iter().enumerate() {
            let mut layer = Vec::new();
            for k in 0..size {
                let id = format!("l{l}t{k}");
                let usl = random_usl(&mut rng);
                let options = enumerate_options(&usl, catalog, &counts, &DemandRule::PoolOnly, 1.0).expect("menu");
                let initial_option = options.len() - 1;
                tasks.push(Task {
                    task_id: id.clone(),
                    options,
                    initial_option,
                    release: 0.0,
                });
                if !prev.is_empty() {
                    let mut parents = prev.clone();
                    parents.shuffle(&mut rng);
                    let take = rng.random_range(1..=parents.len().min(2));
                    for parent in parents.into_iter().take(take) {
                        edges.push((parent, id.clone()));
                    }
                }
                layer.push(id);
            }
            prev = layer;
        }
        out.push(Dag {
            dag_id: format!("dag{d}"),
            tasks,
            edges,
            submit_time: 0.0,
        });
    }
    Problem {
        dags: out,
        capacities: [(catalog[0].pool_resource(), pool_nodes)].into(),
        makespan_budget: None,
        cost_budget: None,
        weight: 1.0,
        time_origin: 0.0,
        reservations: vec![],
    }
}

fn pool_option(id: usize, inst: &InstanceType, nodes: u32, duration: f64) -> ConfigOption {
    ConfigOption {
        option_id: id,
        instance: inst.clone(),
        node_count: nodes,
        demands: [(inst.pool_resource(), f64::from(nodes))].into(),
        duration,
    }
}

/// Two independent tasks sharing a 16-node pool. Each can run on 8 nodes for
/// 100 s (the default) or on 16 nodes for 60 s. The 16-node option wins the
/// balanced per-task comparison, but two of them cannot overlap, so the
/// separately optimized plan is slower and more expensive than the default.
pub fn separate_regression_problem() -> Problem {
    let inst = m5_catalog()[0].clone();
    let task = |id: &str| Task {
        task_id: id.into(),
        options: vec![pool_option(0, &inst, 8, 100.0), pool_option(1, &inst, 16, 60.0)],
        initial_option: 0,
        release: 0.0,
    };
    Problem {
        dags: vec![Dag {
            dag_id: "pair".into(),
            tasks: vec![task("left"), task("right")],
            edges: vec![],
            submit_time: 0.0,
        }],
        capacities: [(inst.pool_resource(), 16.0)].into(),
        makespan_budget: None,
        cost_budget: None,
        weight: 0.5,
        time_origin: 0.0,
        reservations: vec![],
    }
}

/// A four-job pipeline (one preprocessing job feeding three analytics jobs)
/// on m5.4xlarge counts {1, 6, 9, 16} and a 16-node pool, with hand-picked
/// scaling curves: near-linear preprocessing, one job that scales negatively
/// past about ten nodes, and two with strong contention.
pub fn pipeline_problem(weight: f64) -> Problem {
    let inst = m5_catalog()[0].clone();
    let counts = [1, 6, 9, 16];
    let jobs = [
        ("index_analysis", UslParams::new(1.0, 0.01, 0.0, 4800.0).expect("valid")),
        (
            "sentiment_analysis",
            UslParams::new(1.0, 0.02, 0.008, 3000.0).expect("valid"),
        ),
        ("airline_delay", UslParams::new(1.0, 0.15, 0.0, 1500.0).expect("valid")),
        ("movie_rec", UslParams::new(1.0, 0.6, 0.0, 600.0).expect("valid")),
    ];
    let tasks = jobs
        .iter()
        .map(|(id, usl)| {
            let options =
                enumerate_options(usl, std::slice::from_ref(&inst), &counts, &DemandRule::PoolOnly, 1.0).expect("menu");
            Task {
                task_id: (*id).into(),
                initial_option: options.len() - 1,
                options,
                release: 0.0,
            }
        })
        .collect();
    Problem {
        dags: vec![Dag {
            dag_id: "pipeline".into(),
            tasks,
            edges: ["sentiment_analysis", "airline_delay", "movie_rec"]
                .iter()
                .map(|t| ("index_analysis".to_string(), t.to_string()))
                .collect(),
            submit_time: 0.0,
        }],
        capacities: [(inst.pool_resource(), 16.0)].into(),
        makespan_budget: None,
        cost_budget: None,
        weight,
        time_origin: 0.0,
        reservations: vec![],
    }
}

/// Shape of a synthetic batch trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSpec {
    pub dags: usize,
    pub tasks: usize,
    /// Mean gap between DAG submissions, seconds.
    pub mean_interarrival: f64,
}

/// A batch-job trace in the style of public cluster traces: DAG sizes vary,
/// tasks request whole cores and a small slice of machine memory.
pub fn synthetic_trace(seed: u64, spec: &TraceSpec) -> Vec<TraceTask> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dags = spec.dags.max(1);
    // split `tasks` into `dags` parts of at least one task
    let mut sizes = vec![1usize; dags];
    for _ in 0..spec.tasks.saturating_sub(dags) {
        let d = rng.random_range(0..dags);
        sizes[d] += 1;
    }
    let mut out = Vec::with_capacity(spec.tasks);
    let mut clock = 0.0_f64;
    for (d, &size) in sizes.iter().enumerate() {
        let submit = clock.round();
        clock += -spec.mean_interarrival * (1.0 - rng.random::<f64>()).ln();
        for j in 0..size {
            let mut deps = Vec::new();
            if j > 0 {
                let k = rng.random_range(0..=j.min(2));
                let mut parents: Vec<usize> = (0..j).collect();
                parents.shuffle(&mut rng);
                parents.truncate(k);
                parents.sort_unstable();
                deps = parents.into_iter().map(|p| format!("M{p}")).collect();
            }
            out.push(TraceTask {
                dag_id: format!("j_{d}"),
                task_id: format!("M{j}"),
                deps,
                cores: *[1.0, 2.0, 4.0, 8.0, 16.0].choose(&mut rng).expect("non-empty"),
                memory_fraction: (rng.random_range(0.002..0.03_f64) * 1000.0).round() / 1000.0,
                duration: rng.random_range(30.0..900.0_f64).round(),
                submit_time: submit,
            });
        }
    }
    out
}

/// Problem with every task pinned to a single option; handy for exercising
/// the fixed-assignment solvers.
pub fn fixed_problem(durations: &[f64], demands: &[f64], capacity: f64, edges: &[(usize, usize)]) -> Problem {
    let inst = InstanceType::new("unit", 1, 1.0, 1.0);
    let rid = ResourceId::from("cluster.vcpu");
    let tasks = durations
        .iter()
        .zip(demands)
        .enumerate()
        .map(|(i, (&d, &r))| Task {
            task_id: format!("t{i}"),
            options: vec![ConfigOption {
                option_id: 0,
                instance: inst.clone(),
                node_count: 1,
                demands: BTreeMap::from([(rid.clone(), r)]),
                duration: d,
            }],
            initial_option: 0,
            release: 0.0,
        })
        .collect();
    Problem {
        dags: vec![Dag {
            dag_id: "fixed".into(),
            tasks,
            edges: edges.iter().map(|(a, b)| (format!("t{a}"), format!("t{b}"))).collect(),
            submit_time: 0.0,
        }],
        capacities: [(rid, capacity)].into(),
        makespan_budget: None,
        cost_budget: None,
        weight: 0.5,
        time_origin: 0.0,
        reservations: vec![],
    }
}
