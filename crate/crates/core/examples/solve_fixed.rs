//! Start-time scheduling for a fixed configuration choice: list heuristics,
//! the lower bound and the exact solver on a small capacity-bound DAG.
//!
//!     cargo run --example solve_fixed

use cosched::generate::fixed_problem;
use cosched::prelude::*;

fn main() -> cosched::Result<()> {
    //      t0 ──> t2
    //      t1 ──> t3 ──> t4
    let p = fixed_problem(
        &[4.0, 3.0, 5.0, 2.0, 3.0],
        &[2.0, 3.0, 2.0, 1.0, 3.0],
        4.0,
        &[(0, 2), (1, 3), (3, 4)],
    );
    let a = Assignment::initial(&p);
    println!("lower bound     {:>5}", lower_bound(&p, &a)?);
    for pr in [
        Priority::TopologicalFifo,
        Priority::DirectChildren,
        Priority::CriticalPath,
    ] {
        println!("{:<15} {:>5}", format!("{pr:?}"), list_schedule(&p, &a, pr)?.makespan);
    }
    let r = solve(&p, &a, &SolveParams::default())?;
    let s = r.schedule.expect("each task fits alone");
    println!(
        "exact ({:?}) {:>5}  after {} nodes",
        r.status, s.makespan, r.explored_nodes
    );
    print!("\n{}", cosched::report::emit_gantt(&p, &s)?);
    Ok(())
}
