//! Joint resource-configuration selection and scheduling for DAG workloads.
//!
//! Every task in a DAG can run under several configurations (instance type,
//! node count), each with its own duration and resource demand. Picking
//! configurations one task at a time and scheduling afterwards leaves
//! performance on the table: a slightly slower but smaller configuration can
//! let independent tasks overlap. This crate searches configurations and start
//! times together, minimizing a weighted blend of relative makespan and cost
//! change against a reference run.
//!
//! * [`model`]: problems, schedules, validation, cost and objective.
//! * [`predictor`]: duration menus from the Universal Scalability Law or from
//!   external tables.
//! * [`solve`]: exact / anytime start-time scheduling for a fixed assignment.
//! * [`anneal`]: simulated annealing over assignments, one [`solve`] per move.
//! * [`baselines`]: FIFO and critical-path list scheduling, per-task
//!   ("separate") optimization and the brute-force oracle.
//! * [`tracesim`]: trace-driven multi-DAG cluster replay.
//! * [`report`]: Gantt and comparison data for plotting.
//!
//! ```
//! use cosched::prelude::*;
//!
//! let p = cosched::generate::random_problem(7, &cosched::generate::RandomSpec::small());
//! let sol = co_optimize(&p, &AnnealParams::default()).unwrap();
//! assert!(validate_schedule(&p, &sol.schedule).is_ok());
//! ```

pub mod anneal;
pub mod baselines;
pub mod cli;
pub mod error;
pub mod generate;
pub mod model;
pub mod predictor;
pub mod report;
pub mod solve;
pub mod tracesim;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::anneal::{co_optimize, AnnealParams, Solution};
    pub use crate::baselines::{
        brute_force, critical_path, fifo_topological, separate_optimize, Goal, SeparateScheduler,
    };
    pub use crate::model::{
        compute_cost, compute_objective, validate_problem, validate_schedule, Assignment, Baseline, ConfigOption, Dag,
        InstanceType, Problem, ResourceId, Schedule, Task,
    };
    pub use crate::solve::{list_schedule, lower_bound, solve, Priority, SolveParams, SolveStatus};
}
