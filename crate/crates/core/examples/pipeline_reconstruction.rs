//! A four-job analytics pipeline where one preprocessing job feeds three
//! others. Running every job on the largest cluster is the default; the
//! search instead shrinks the jobs that scale badly so they share the pool.
//!
//!     cargo run --example pipeline_reconstruction

use cosched::generate::pipeline_problem;
use cosched::prelude::*;

fn show(p: &Problem, label: &str, s: &Schedule) {
    println!("{label}: makespan {:.0} s, cost ${:.3}", s.makespan, s.cost);
    for (i, (_, t)) in p.tasks().enumerate() {
        let o = s.assignment.option(p, i);
        println!(
            "  {:<20} {:>12}  {:>6.0} -> {:>6.0}",
            t.task_id,
            o.label(),
            s.starts[i],
            s.end(p, i)
        );
    }
}

fn main() -> cosched::Result<()> {
    for w in [1.0, 0.5] {
        let p = pipeline_problem(w);
        let base = fifo_topological(&p, &Assignment::initial(&p))?;
        let sol = co_optimize(&p, &AnnealParams::default())?;
        println!("== weight {w}");
        show(&p, "all on 16 nodes", &base);
        show(&p, "co-optimized", &sol.schedule);
        println!();
    }
    Ok(())
}
