//! Sweep the makespan/cost weight and print the resulting trade-off curve.
//!
//!     cargo run --example goal_sweep

use cosched::generate::{layered_problem, random_problem, RandomSpec};
use cosched::prelude::*;

fn sweep(name: &str, p: &Problem) -> cosched::Result<()> {
    println!("{name}");
    for w in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let s = co_optimize(&p.with_weight(w), &AnnealParams::default())?;
        println!(
            "  w={w:<4} makespan {:>7.0}  cost {:>8.4}  E {:+.4}",
            s.schedule.makespan, s.schedule.cost, s.energy
        );
    }
    Ok(())
}

fn main() -> cosched::Result<()> {
    sweep("random, 4 tasks", &random_problem(5, &RandomSpec::small()))?;
    sweep("layered, 2 DAGs x 6 tasks", &layered_problem(1, 2, 6, 3, 16.0))
}
