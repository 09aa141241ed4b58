//! The two classical finishers: Selfridge-Conway for three agents and
//! cut-and-choose for two.

use envyfree4::analysis::envy_matrix;
use envyfree4::harness::{gen_instance, RunConfig};
use envyfree4::protocols::{cut_and_choose, selfridge_conway, ProtocolState};
use envyfree4::Oracle;

fn main() {
    let instance = gen_instance(11, &RunConfig::default()).unwrap();

    let mut state = ProtocolState::new();
    let mut oracle = Oracle::new(&instance);
    selfridge_conway(&mut state, &mut oracle, [1, 2, 3], "sc").unwrap();
    println!("Selfridge-Conway, {:?} (cuts, evals)", oracle.ledger().totals());
    let m = envy_matrix(&state.allocation, &instance).unwrap();
    for a in 1..4 {
        let row: Vec<String> = m.entries[a][1..].iter().map(|v| v.to_string()).collect();
        println!("  agent {a} gets {}, values [{}]", state.allocation[a], row.join(", "));
    }

    let mut state = ProtocolState::new();
    let mut oracle = Oracle::new(&instance);
    cut_and_choose(&mut state, &mut oracle, 0, 1, "cc").unwrap();
    println!("cut-and-choose, {:?} (cuts, evals)", oracle.ledger().totals());
    for a in 0..2 {
        println!("  agent {a} gets {}", state.allocation[a]);
    }
}
