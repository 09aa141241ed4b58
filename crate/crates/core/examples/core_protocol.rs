//! One standalone Core call on the whole cake, then its audit.

use envyfree4::analysis::audit_core;
use envyfree4::harness::{gen_instance, RunConfig};
use envyfree4::protocols::{core, CoreContext, ProtocolState};
use envyfree4::Oracle;

fn main() {
    let instance = gen_instance(7, &RunConfig::default()).unwrap();
    let mut state = ProtocolState::new();
    let mut oracle = Oracle::new(&instance);
    let before = state.snapshot();
    let result = core(&mut state, &mut oracle, 0, &[], CoreContext::Standalone).unwrap();

    for (p, piece) in result.pieces.iter().enumerate() {
        println!(
            "piece {p} {piece}: agent {} takes {}{}",
            result.holders[p],
            result.allocated[p],
            if result.partial[p] { " (trimmed)" } else { "" }
        );
    }
    for m in &result.marks {
        println!("agent {} places a {:?} mark on piece {} at {}", m.agent, m.kind, m.piece_index, m.position);
    }
    println!("insignificant piece {:?}, residue {}", result.insignificant, result.new_residue);
    println!("billed {} cuts, {} evals", result.cuts, result.evals);

    let report = audit_core(&result, &before, &state.snapshot(), &instance);
    println!("audit: {} checks, passed {}", report.checks.len(), report.passed());
}
