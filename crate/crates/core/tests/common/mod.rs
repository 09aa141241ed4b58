#![allow(dead_code)]

use std::path::PathBuf;

use envyfree4::analysis::{audit_run, envy_matrix, AuditReport};
use envyfree4::harness::{gen_instance, load_fixtures, RunConfig};
use envyfree4::protocols::{cut_and_choose, main_protocol, selfridge_conway, ProtocolState, RunOutcome};
use envyfree4::{Instance, Oracle, Piece};
use rayon::prelude::*;

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn fixtures() -> Vec<(String, Instance)> {
    load_fixtures(&fixtures_dir()).expect("fixtures load")
}

pub fn seeded(count: u64) -> Vec<(String, Instance)> {
    let config = RunConfig::default();
    (0..count)
        .map(|seed| (format!("seed {seed}"), gen_instance(seed, &config).expect("generator")))
        .collect()
}

pub struct Run {
    pub name: String,
    pub instance: Instance,
    pub outcome: RunOutcome,
    pub audit: AuditReport,
}

pub fn run_all(corpus: Vec<(String, Instance)>) -> Vec<Run> {
    corpus
        .into_par_iter()
        .map(|(name, instance)| {
            let outcome = main_protocol(&instance).unwrap_or_else(|e| panic!("{name}: {e}"));
            let audit = audit_run(&outcome, &instance);
            Run { name, instance, outcome, audit }
        })
        .collect()
}

/// No agent among `agents` prefers another's piece.
pub fn envy_free_among(allocation: &[Piece; 4], instance: &Instance, agents: &[usize]) -> bool {
    let m = envy_matrix(allocation, instance).expect("disjoint pieces");
    agents
        .iter()
        .all(|&i| agents.iter().all(|&j| m.entries[i][j] <= m.entries[i][i]))
}

pub struct Standalone {
    pub allocation: [Piece; 4],
    pub residue_empty: bool,
    pub queries: (u32, u32),
}

/// Selfridge-Conway on the whole cake with the given roles.
pub fn standalone_selfridge_conway(instance: &Instance, agents: [usize; 3]) -> Standalone {
    let mut state = ProtocolState::new();
    let mut oracle = Oracle::new(instance);
    selfridge_conway(&mut state, &mut oracle, agents, "sc").expect("selfridge-conway");
    Standalone {
        residue_empty: state.residue.is_empty(),
        allocation: state.allocation,
        queries: oracle.ledger().totals(),
    }
}

/// Cut-and-choose on the whole cake.
pub fn standalone_cut_and_choose(instance: &Instance, cutter: usize, chooser: usize) -> Standalone {
    let mut state = ProtocolState::new();
    let mut oracle = Oracle::new(instance);
    cut_and_choose(&mut state, &mut oracle, cutter, chooser, "cc").expect("cut-and-choose");
    Standalone {
        residue_empty: state.residue.is_empty(),
        allocation: state.allocation,
        queries: oracle.ledger().totals(),
    }
}

/// Every ordering of three agents.
pub fn role_orders(agents: [usize; 3]) -> [[usize; 3]; 6] {
    let [a, b, c] = agents;
    [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]]
}
