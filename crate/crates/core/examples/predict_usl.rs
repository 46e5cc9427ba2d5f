//! Turn one observed run into a duration and cost menu with the Universal
//! Scalability Law.
//!
//!     cargo run --example predict_usl

use cosched::model::m5_catalog;
use cosched::predictor::{default_work, enumerate_options, fit_gamma, predict_runtime, DemandRule, ObservedRun};

fn main() -> cosched::Result<()> {
    // a job that took 85 s on 4 nodes, with strong coherency cost
    let obs = ObservedRun {
        node_count: 4,
        duration: 85.0,
        demands_per_node: Default::default(),
    };
    let (alpha, beta) = (0.0, 0.2);
    let usl = fit_gamma(&obs, alpha, beta, default_work(&obs, alpha, beta))?;
    println!("gamma = {:.4}", usl.gamma);
    for n in [1, 2, 4, 8, 16] {
        println!("{n:>3} nodes: {:>8.1} s", predict_runtime(&usl, n)?);
    }

    let catalog = m5_catalog();
    let menu = enumerate_options(&usl, &catalog[..2], &[1, 2, 4, 8], &DemandRule::PoolOnly, 1.0)?;
    println!("\n{:<16} {:>8} {:>8}", "option", "secs", "$");
    for o in &menu {
        println!("{:<16} {:>8} {:>8.4}", o.label(), o.duration, o.cost());
    }
    Ok(())
}
