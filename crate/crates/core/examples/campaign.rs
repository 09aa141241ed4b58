//! A small audited fuzz campaign.

use envyfree4::harness::{run_campaign, RunConfig, Strategy};

fn main() {
    let config = RunConfig { instances: 200, strategy: Strategy::Clustered, ..RunConfig::default() };
    let report = run_campaign(&config).unwrap();
    let agg = &report.aggregate;
    println!(
        "{} instances, {} failures, worst case {} cuts / {} evals",
        agg.instances, agg.failures, agg.max_cuts, agg.max_evals
    );
    for (branch, count) in &agg.branch_counts {
        println!("  {branch:<18} {count}");
    }
    if let Some(w) = &report.witness {
        println!("witness {w}");
    }
}
