//! The full four-agent protocol on an instance file, with its envy matrix
//! and audit. Pass a path to use your own instance.

use envyfree4::analysis::{audit_run, envy_matrix};
use envyfree4::harness::load_instance;
use envyfree4::main_protocol;

fn main() {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/phase2-correction.json").to_string());
    let instance = load_instance(path.as_ref()).unwrap();
    let out = main_protocol(&instance).unwrap();

    let names: Vec<&str> = out.branches.iter().map(|b| b.name()).collect();
    println!("finished at {} via {names:?}", out.finished_at);
    println!("{:?} (cuts, evals)", out.ledger.totals());
    let m = envy_matrix(&out.allocation, &instance).unwrap();
    for (a, piece) in out.allocation.iter().enumerate() {
        let row: Vec<String> = m.entries[a].iter().map(|v| v.to_string()).collect();
        println!("agent {a}: {piece}  values [{}]", row.join(", "));
    }
    let report = audit_run(&out, &instance);
    println!("envy-free {}, audit {} of {} checks passed", m.is_envy_free(), report.checks.iter().filter(|c| c.pass).count(), report.checks.len());
}
