//! Every method on one instance, as a CSV table.
//!
//!     cargo run --example baselines_compare > methods.csv

use cosched::baselines::{evaluate_schedule, fifo_direct_children, MethodResult};
use cosched::generate::separate_regression_problem;
use cosched::prelude::*;
use cosched::report::methods_csv;

fn main() -> cosched::Result<()> {
    // picking each task's fastest option on its own makes both tasks fight
    // over the pool; co-optimization runs them side by side instead
    let p = separate_regression_problem().with_weight(1.0);
    let a = Assignment::initial(&p);
    let sp = SolveParams::default();
    let rows = vec![
        MethodResult::new("fifo", &evaluate_schedule(&p, fifo_topological(&p, &a)?)?),
        MethodResult::new(
            "direct_children",
            &evaluate_schedule(&p, fifo_direct_children(&p, &a)?)?,
        ),
        MethodResult::new("critical_path", &evaluate_schedule(&p, critical_path(&p, &a)?)?),
        MethodResult::new(
            "separate",
            &separate_optimize(&p, Goal::Runtime, SeparateScheduler::Exact)?,
        ),
        MethodResult::new("co_optimize", &co_optimize(&p, &AnnealParams::default())?),
        MethodResult::new("oracle", &brute_force(&p, &sp, 1 << 20)?),
    ];
    print!("{}", methods_csv(&rows)?);
    Ok(())
}
