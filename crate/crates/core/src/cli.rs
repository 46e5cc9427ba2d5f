//! The `cosched` command line. Exit codes: 0 success, 1 validation or usage
//! failure, 2 infeasible, 3 I/O or schema error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anneal::{co_optimize_restarts, AnnealParams, Solution};
use crate::baselines::{
    brute_force, critical_path, evaluate_schedule, fifo_direct_children, fifo_topological, separate_optimize, Goal,
    MethodResult, SeparateScheduler,
};
use crate::error::{io_at, Error, Result};
use crate::model::{m5_catalog, validate_problem, validate_schedule, Assignment, Baseline, Problem, ScheduleDoc};
use crate::predictor::{enumerate_options, options_from_table, DemandRule, DurationTable, ObservedRun};
use crate::report::{cdf_csv, emit_gantt, methods_csv, write_atomic};
use crate::solve::SolveParams;
use crate::tracesim::{compare, load_trace, simulate, ClusterSpec, SimConfig, SimScheduler, TriggerPolicy};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "cosched",
    version,
    about = "Joint configuration selection and scheduling for DAG workloads"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a problem file, and optionally a schedule against it.
    Validate {
        problem: PathBuf,
        #[arg(long)]
        schedule: Option<PathBuf>,
    },
    /// Co-optimize configurations and start times by simulated annealing.
    Optimize {
        problem: PathBuf,
        #[command(flatten)]
        objective: Objective,
        #[command(flatten)]
        search: Search,
        /// Also write the annealing history as JSON lines.
        #[arg(long)]
        history: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// Run a reference scheduler.
    Baseline {
        problem: PathBuf,
        #[arg(long, value_enum, default_value_t = BaselineMethod::Fifo)]
        method: BaselineMethod,
        #[command(flatten)]
        objective: Objective,
        #[command(flatten)]
        search: Search,
        #[command(flatten)]
        output: Output,
    },
    /// Enumerate every assignment and solve each exactly.
    Oracle {
        problem: PathBuf,
        #[command(flatten)]
        objective: Objective,
        #[command(flatten)]
        search: Search,
        #[arg(long, default_value_t = 1_000_000)]
        oracle_cap: u128,
        #[command(flatten)]
        output: Output,
    },
    /// Solve at several weights.
    Sweep {
        problem: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,1", value_parser = parse_weight)]
        weights: Vec<f64>,
        /// Use the exhaustive oracle instead of annealing.
        #[arg(long)]
        oracle: bool,
        #[arg(long, default_value_t = 1_000_000)]
        oracle_cap: u128,
        #[command(flatten)]
        search: Search,
        #[command(flatten)]
        output: Output,
    },
    /// Replay a job trace on a pooled cluster.
    Simulate {
        trace: PathBuf,
        #[arg(long, default_value_t = 4)]
        machines: u32,
        #[arg(long, default_value_t = 96)]
        cores_per_machine: u32,
        #[arg(long, default_value_t = 0.2)]
        cpu_reduction: f64,
        #[arg(long, default_value_t = 0.4)]
        mem_reduction: f64,
        #[arg(long, default_value_t = 900.0)]
        interval: f64,
        #[arg(long, default_value_t = 3.0)]
        queue_factor: f64,
        #[arg(long, value_enum, default_value_t = SimMethod::CoOptimize)]
        scheduler: SimMethod,
        #[command(flatten)]
        objective: Objective,
        #[command(flatten)]
        search: Search,
        /// Write a comparison against topological FIFO (JSON, or CDF CSV with --format csv).
        #[arg(long)]
        compare_out: Option<PathBuf>,
        #[command(flatten)]
        output: Output,
    },
    /// Build an option menu from a USL curve or a duration table.
    Predict {
        /// Duration table (JSON); takes precedence over the USL flags.
        #[arg(long, requires = "task")]
        table: Option<PathBuf>,
        #[arg(long)]
        task: Option<String>,
        #[arg(long, default_value_t = 0.0)]
        alpha: f64,
        #[arg(long, default_value_t = 0.0)]
        beta: f64,
        /// Node count of the observed run the curve is anchored at.
        #[arg(long, default_value_t = 1)]
        observed_nodes: u32,
        #[arg(long, default_value_t = 3600.0)]
        observed_duration: f64,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16")]
        node_counts: Vec<u32>,
        #[arg(long, default_value_t = 1.0)]
        quantum: f64,
        /// Also demand each instance's vcpus and memory per node, on
        /// cluster.vcpu and cluster.memory_gb.
        #[arg(long)]
        instance_demands: bool,
        #[command(flatten)]
        output: Output,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaselineMethod {
    Fifo,
    DirectChildren,
    CriticalPath,
    /// Per-task best option for --goal, then critical-path list scheduling.
    Separate,
    /// Per-task best option for --goal, then the exact solver.
    SeparateExact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimMethod {
    CoOptimize,
    Fifo,
    CriticalPath,
    Separate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct Objective {
    /// Makespan weight in [0, 1]; cost gets 1 - w.
    #[arg(long, conflicts_with = "goal", value_parser = parse_weight)]
    pub weight: Option<f64>,
    /// balanced (0.5), runtime (1) or cost (0).
    #[arg(long)]
    pub goal: Option<Goal>,
}

impl Objective {
    fn weight_or(&self, fallback: f64) -> f64 {
        self.weight.or(self.goal.map(Goal::weight)).unwrap_or(fallback)
    }
}

#[derive(Debug, Clone, Args)]
pub struct Search {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub restarts: u64,
    /// Wall-clock limit per exact solve, seconds.
    #[arg(long)]
    pub time_limit: Option<f64>,
    #[arg(long)]
    pub exact_threshold: Option<usize>,
    #[arg(long)]
    pub quantum: Option<f64>,
    #[arg(long)]
    pub stall_limit: Option<usize>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// Tasks reconfigured per annealing move.
    #[arg(long)]
    pub moves: Option<usize>,
}

impl Search {
    fn solve_params(&self, base: SolveParams) -> SolveParams {
        SolveParams {
            time_limit: self.time_limit.unwrap_or(base.time_limit),
            exact_threshold: self.exact_threshold.unwrap_or(base.exact_threshold),
            quantum: self.quantum.unwrap_or(base.quantum),
            ..base
        }
    }

    fn anneal_params(&self, base: AnnealParams) -> AnnealParams {
        AnnealParams {
            seed: self.seed,
            stall_limit: self.stall_limit.or(base.stall_limit),
            max_iterations: self.max_iterations.or(base.max_iterations),
            moves_per_iteration: self.moves.unwrap_or(base.moves_per_iteration),
            inner: self.solve_params(base.inner.clone()),
            ..base
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct Output {
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Output file (written atomically); stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_weight(s: &str) -> std::result::Result<f64, String> {
    let w: f64 = s.trim().parse().map_err(|e| format!("`{s}` is not a number: {e}"))?;
    if (0.0..=1.0).contains(&w) {
        Ok(w)
    } else {
        Err(format!("weight {w} is outside [0, 1]"))
    }
}

/// A solution as written by `optimize`, `baseline` and `oracle`. It is a
/// schedule document with the objective fields added, so `validate
/// --schedule` accepts it directly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionDoc {
    #[serde(flatten)]
    pub schedule: ScheduleDoc,
    pub method: String,
    pub weight: f64,
    pub energy: f64,
    pub baseline: Baseline,
    pub evaluations: usize,
}

impl SolutionDoc {
    pub fn new(p: &Problem, method: &str, s: &Solution) -> Self {
        let mut schedule = s.schedule.to_doc(p);
        schedule.status = Some(
            serde_json::to_value(s.inner_status)
                .ok()
                .and_then(|v| v.as_str().map(String::from))
                .unwrap_or_default(),
        );
        Self {
            schedule,
            method: method.into(),
            weight: s.weight,
            energy: s.energy,
            baseline: s.baseline,
            evaluations: s.evaluations,
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Infeasible(_) | Error::SimulationStalled { .. } => EXIT_INFEASIBLE,
        Error::Io(_) | Error::Json(_) | Error::Csv(_) | Error::Parse { .. } => EXIT_IO,
        Error::InvalidProblem(_)
        | Error::InvalidSchedule(_)
        | Error::InvalidParameter(_)
        | Error::SearchSpaceOverflow { .. }
        | Error::UnknownId { .. }
        | Error::MismatchedReports(_) => EXIT_INVALID,
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_at(path, e))
}

fn read_problem(path: &Path) -> Result<Problem> {
    let p = Problem::from_json(&read_text(path)?)?;
    validate_problem(&p).map_err(Error::InvalidProblem)?;
    Ok(p)
}

fn emit(output: &Output, body: &str) -> Result<()> {
    match &output.out {
        Some(path) => write_atomic(path, body.as_bytes()),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(body.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn emit_solution(p: &Problem, method: &str, s: &Solution, output: &Output) -> Result<()> {
    let body = match output.format {
        Format::Json => serde_json::to_string_pretty(&SolutionDoc::new(p, method, s))? + "\n",
        Format::Csv => emit_gantt(p, &s.schedule)?,
    };
    emit(output, &body)
}

fn optimize(p: &Problem, search: &Search) -> Result<Solution> {
    co_optimize_restarts(
        p,
        &search.anneal_params(AnnealParams::default()),
        search.restarts as usize,
    )
}

/// Runs one parsed command.
pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Validate { problem, schedule } => {
            let p = read_problem(&problem)?;
            if let Some(path) = schedule {
                let doc: ScheduleDoc = serde_json::from_str(&read_text(&path)?)?;
                let s = doc.resolve(&p)?;
                validate_schedule(&p, &s).map_err(Error::InvalidSchedule)?;
            }
            Ok(())
        }
        Command::Optimize {
            problem,
            objective,
            search,
            history,
            output,
        } => {
            let p = read_problem(&problem)?;
            let p = p.with_weight(objective.weight_or(p.weight));
            let s = optimize(&p, &search)?;
            if let Some(path) = history {
                write_atomic(&path, s.history_jsonl().as_bytes())?;
            }
            emit_solution(&p, "co_optimize", &s, &output)
        }
        Command::Baseline {
            problem,
            method,
            objective,
            search: _,
            output,
        } => {
            let p = read_problem(&problem)?;
            let p = p.with_weight(objective.weight_or(p.weight));
            let a = Assignment::initial(&p);
            let goal = objective.goal.unwrap_or(Goal::Balanced);
            let (label, s) = match method {
                BaselineMethod::Fifo => ("fifo_topological", evaluate_schedule(&p, fifo_topological(&p, &a)?)?),
                BaselineMethod::DirectChildren => (
                    "fifo_direct_children",
                    evaluate_schedule(&p, fifo_direct_children(&p, &a)?)?,
                ),
                BaselineMethod::CriticalPath => ("critical_path", evaluate_schedule(&p, critical_path(&p, &a)?)?),
                BaselineMethod::Separate => (
                    "separate",
                    separate_optimize(&p, goal, SeparateScheduler::CriticalPath)?,
                ),
                BaselineMethod::SeparateExact => {
                    ("separate_exact", separate_optimize(&p, goal, SeparateScheduler::Exact)?)
                }
            };
            emit_solution(&p, label, &s, &output)
        }
        Command::Oracle {
            problem,
            objective,
            search,
            oracle_cap,
            output,
        } => {
            let p = read_problem(&problem)?;
            let p = p.with_weight(objective.weight_or(p.weight));
            let s = brute_force(&p, &search.solve_params(SolveParams::default()), oracle_cap)?;
            emit_solution(&p, "oracle", &s, &output)
        }
        Command::Sweep {
            problem,
            weights,
            oracle,
            oracle_cap,
            search,
            output,
        } => {
            let p = read_problem(&problem)?;
            let runs: Vec<Result<SolutionDoc>> = weights
                .par_iter()
                .map(|&w| {
                    let pw = p.with_weight(w);
                    let (label, s) = if oracle {
                        (
                            "oracle",
                            brute_force(&pw, &search.solve_params(SolveParams::default()), oracle_cap)?,
                        )
                    } else {
                        ("co_optimize", optimize(&pw, &search)?)
                    };
                    Ok(SolutionDoc::new(&pw, label, &s))
                })
                .collect();
            let docs = runs.into_iter().collect::<Result<Vec<_>>>()?;
            let body = match output.format {
                Format::Json => serde_json::to_string_pretty(&docs)? + "\n",
                Format::Csv => methods_csv(
                    &docs
                        .iter()
                        .map(|d| MethodResult {
                            method: d.method.clone(),
                            weight: d.weight,
                            makespan: d.schedule.makespan,
                            cost: d.schedule.cost,
                            energy: d.energy,
                        })
                        .collect::<Vec<_>>(),
                )?,
            };
            emit(&output, &body)
        }
        Command::Simulate {
            trace,
            machines,
            cores_per_machine,
            cpu_reduction,
            mem_reduction,
            interval,
            queue_factor,
            scheduler,
            objective,
            search,
            compare_out,
            output,
        } => {
            let trace = load_trace(&trace)?;
            let cluster = ClusterSpec {
                machines,
                cores_per_machine,
                cpu_reduction,
                mem_reduction,
            };
            let policy = TriggerPolicy { interval, queue_factor };
            let defaults = SimConfig::default();
            let cfg = SimConfig {
                seed: search.seed,
                weight: objective.weight_or(defaults.weight),
                anneal: search.anneal_params(defaults.anneal.clone()),
                ..defaults
            };
            let sched = match scheduler {
                SimMethod::CoOptimize => SimScheduler::CoOptimize,
                SimMethod::Fifo => SimScheduler::FifoTopological,
                SimMethod::CriticalPath => SimScheduler::CriticalPath,
                SimMethod::Separate => SimScheduler::Separate(objective.goal.unwrap_or(Goal::Balanced)),
            };
            let out = simulate(&trace, &cluster, &policy, sched, &cfg)?;
            if let Some(path) = compare_out {
                let base = simulate(&trace, &cluster, &policy, SimScheduler::FifoTopological, &cfg)?;
                let cmp = compare(&base.report, &out.report)?;
                let body = match output.format {
                    Format::Json => serde_json::to_string_pretty(&cmp)? + "\n",
                    Format::Csv => cdf_csv(&cmp)?,
                };
                write_atomic(&path, body.as_bytes())?;
            }
            let body = match output.format {
                Format::Json => serde_json::to_string_pretty(&out.report)? + "\n",
                Format::Csv => {
                    let mut w = csv::Writer::from_writer(Vec::new());
                    for d in &out.report.per_dag {
                        w.serialize(d)?;
                    }
                    if out.report.per_dag.is_empty() {
                        w.write_record([
                            "dag_id",
                            "completion_baseline",
                            "completion_optimized",
                            "improvement_fraction",
                        ])?;
                    }
                    String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("utf-8")
                }
            };
            emit(&output, &body)
        }
        Command::Predict {
            table,
            task,
            alpha,
            beta,
            observed_nodes,
            observed_duration,
            node_counts,
            quantum,
            instance_demands,
            output,
        } => {
            let catalog = m5_catalog();
            let rule = if instance_demands {
                DemandRule::InstanceSize {
                    vcpu: "cluster.vcpu".into(),
                    memory: "cluster.memory_gb".into(),
                }
            } else {
                DemandRule::PoolOnly
            };
            let options = match table {
                Some(path) => {
                    let t: DurationTable = serde_json::from_str(&read_text(&path)?)?;
                    options_from_table(&t, task.as_deref().unwrap_or_default(), &catalog, &rule, quantum)?
                }
                None => {
                    let obs = ObservedRun {
                        node_count: observed_nodes,
                        duration: observed_duration,
                        demands_per_node: Default::default(),
                    };
                    let work = crate::predictor::default_work(&obs, alpha, beta);
                    let usl = crate::predictor::fit_gamma(&obs, alpha, beta, work)?;
                    enumerate_options(&usl, &catalog, &node_counts, &rule, quantum)?
                }
            };
            let body = match output.format {
                Format::Json => serde_json::to_string_pretty(&options)? + "\n",
                Format::Csv => {
                    let mut w = csv::Writer::from_writer(Vec::new());
                    w.write_record(["option_id", "instance", "node_count", "duration", "cost"])?;
                    for o in &options {
                        w.write_record([
                            o.option_id.to_string(),
                            o.instance.name.clone(),
                            o.node_count.to_string(),
                            o.duration.to_string(),
                            o.cost().to_string(),
                        ])?;
                    }
                    String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("utf-8")
                }
            };
            emit(&output, &body)
        }
    }
}

/// Parses `args`, runs the command and maps the outcome to an exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().filter_or("AGORA_LOG", "warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_INVALID,
            };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
