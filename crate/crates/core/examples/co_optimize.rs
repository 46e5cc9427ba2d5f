//! Joint configuration and schedule search by simulated annealing, with the
//! move history and a budget.
//!
//! Usage: co_optimize [SEED] [WEIGHT]

use cosched::anneal::co_optimize_restarts;
use cosched::generate::{random_problem, RandomSpec};
use cosched::prelude::*;

fn main() -> cosched::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map_or(11, |s| s.parse().expect("seed"));
    let weight: f64 = args.next().map_or(0.5, |s| s.parse().expect("weight"));

    let p = random_problem(seed, &RandomSpec::small()).with_weight(weight);
    let ap = AnnealParams {
        seed,
        ..Default::default()
    };
    let sol = co_optimize_restarts(&p, &ap, 4)?;
    println!(
        "baseline  makespan {:>7.0}  cost {:>7.4}",
        sol.baseline.makespan, sol.baseline.cost
    );
    println!(
        "co-opt    makespan {:>7.0}  cost {:>7.4}  E = {:+.4}",
        sol.schedule.makespan, sol.schedule.cost, sol.energy
    );
    let accepted = sol.history.iter().filter(|h| h.accepted).count();
    println!(
        "{} assignments solved, {accepted}/{} moves accepted",
        sol.evaluations,
        sol.history.len()
    );
    validate_schedule(&p, &sol.schedule).expect("valid schedule");

    // a cost budget just under the unconstrained optimum's cost
    let mut tight = p.clone();
    tight.cost_budget = Some(sol.schedule.cost * 0.9);
    match co_optimize(&tight, &ap) {
        Ok(s) => println!("under 90% budget: cost {:.4}", s.schedule.cost),
        Err(e) => println!("under 90% budget: {e}"),
    }
    Ok(())
}
