//! Replay a synthetic batch trace on a small cluster under FIFO and under
//! co-optimization, then compare per-DAG completion times.
//!
//! Usage: trace_replay [DAGS] [TRACE_OUT]

use cosched::generate::{synthetic_trace, TraceSpec};
use cosched::report::cdf_csv;
use cosched::tracesim::{
    compare, run_simulation, write_trace_csv, ClusterSpec, SimConfig, SimScheduler, Trace, TriggerPolicy,
};

fn main() -> cosched::Result<()> {
    let mut args = std::env::args().skip(1);
    let dags: usize = args.next().map_or(12, |s| s.parse().expect("dag count"));
    let trace = Trace::from_tasks(synthetic_trace(
        7,
        &TraceSpec {
            dags,
            tasks: dags * 8,
            mean_interarrival: 90.0,
        },
    ))?;
    if let Some(out) = args.next() {
        write_trace_csv(&trace, std::fs::File::create(out)?)?;
    }

    let cluster = ClusterSpec::new(2, 96);
    let policy = TriggerPolicy::default();
    let cfg = SimConfig::default();
    let fifo = run_simulation(&trace, &cluster, &policy, SimScheduler::FifoTopological, &cfg)?;
    let co = run_simulation(&trace, &cluster, &policy, SimScheduler::CoOptimize, &cfg)?;
    for r in [&fifo, &co] {
        println!(
            "{:<18} completion {:>7.0} s  cost ${:>7.3}  triggers {}",
            r.scheduler_label, r.total_completion_time, r.total_cost, r.triggers
        );
    }
    let cmp = compare(&fifo, &co)?;
    println!("cost x{:.3}, completion x{:.3}\n", cmp.cost_ratio, cmp.completion_ratio);
    print!("{}", cdf_csv(&cmp)?);
    Ok(())
}
