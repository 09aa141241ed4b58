//! Core followed by Correction, which hands the insignificant piece to a
//! different agent without any new queries.

use envyfree4::harness::{gen_instance, RunConfig};
use envyfree4::protocols::{core, correction, insignificant_of, CoreContext, ProtocolState};
use envyfree4::Oracle;

fn main() {
    for seed in 0.. {
        let instance = gen_instance(seed, &RunConfig::default()).unwrap();
        let mut state = ProtocolState::new();
        let mut oracle = Oracle::new(&instance);
        let result = core(&mut state, &mut oracle, 0, &[], CoreContext::Standalone).unwrap();
        let Some((holder, piece)) = insignificant_of(&result) else {
            continue;
        };
        println!("seed {seed}: agent {holder} holds the insignificant piece {piece}");
        println!("holders before {:?}", state.holders[0]);
        let billed = oracle.ledger().totals();
        let holders = correction(&mut state, &mut oracle, 0, "correction").unwrap();
        println!("holders after  {holders:?}");
        assert_eq!(oracle.ledger().totals(), billed);
        println!("no queries spent");
        break;
    }
}
