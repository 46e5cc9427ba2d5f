//! How often annealing finds the exhaustive optimum on small instances, with
//! one run and with ten parallel restarts.
//!
//! Usage: brute_force_oracle [INSTANCES]

use cosched::anneal::co_optimize_restarts;
use cosched::generate::{random_problem, RandomSpec};
use cosched::prelude::*;

fn main() -> cosched::Result<()> {
    let n: u64 = std::env::args().nth(1).map_or(30, |s| s.parse().expect("count"));
    let sp = SolveParams::default();
    let (mut single, mut hits) = (0, 0);
    let mut space = 0u128;
    for seed in 0..n {
        let p = random_problem(seed, &RandomSpec::small());
        space += p.assignment_count();
        let best = brute_force(&p, &sp, 1 << 20)?;
        let ap = AnnealParams {
            seed,
            ..Default::default()
        };
        if (co_optimize(&p, &ap)?.energy - best.energy).abs() <= 1e-9 {
            single += 1;
        }
        let sa = co_optimize_restarts(&p, &ap, 10)?;
        if (sa.energy - best.energy).abs() <= 1e-9 {
            hits += 1;
        } else {
            println!("seed {seed}: annealing {:+.5}, oracle {:+.5}", sa.energy, best.energy);
        }
    }
    println!("at the optimum: {single}/{n} single runs, {hits}/{n} with restarts ({space} assignments enumerated)");
    Ok(())
}
