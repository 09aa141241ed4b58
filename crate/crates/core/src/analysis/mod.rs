//! Post-hoc verification. Everything here reads the valuations directly and
//! never touches the metered oracle, so it can judge the protocol
//! independently of what the agents happened to learn.

mod audit;

pub use audit::{audit_core, audit_run, AuditReport, Check};

use serde::Serialize;
use thiserror::Error;

use crate::geometry::Piece;
use crate::oracle::Agent;
use crate::protocols::CoreResult;
use crate::rational::{self, Rational};
use crate::valuation::{Instance, AGENTS};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AnalysisError {
    #[error("pieces of agents {0} and {1} overlap")]
    Overlap(Agent, Agent),
    #[error("piece of agent {0} is not contained in her allocation")]
    NotSubAllocation(Agent),
}

fn check_disjoint(allocation: &[Piece; AGENTS]) -> Result<(), AnalysisError> {
    for i in 0..AGENTS {
        for j in i + 1..AGENTS {
            if allocation[i].overlaps(&allocation[j]) {
                return Err(AnalysisError::Overlap(i, j));
            }
        }
    }
    Ok(())
}

/// `entries[i][j]` is agent `i`'s value for agent `j`'s piece.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EnvyMatrix {
    #[serde(serialize_with = "serialize_grid")]
    pub entries: [[Rational; AGENTS]; AGENTS],
}

fn serialize_grid<S: serde::Serializer>(grid: &[[Rational; AGENTS]; AGENTS], s: S) -> Result<S::Ok, S::Error> {
    let rows: Vec<Vec<String>> = grid
        .iter()
        .map(|row| row.iter().map(rational::to_compact_string).collect())
        .collect();
    rows.serialize(s)
}

impl EnvyMatrix {
    /// Pairs `(i, j)` where `i` strictly prefers `j`'s piece.
    pub fn envious_pairs(&self) -> Vec<(Agent, Agent)> {
        let mut out = Vec::new();
        for i in 0..AGENTS {
            for j in 0..AGENTS {
                if self.entries[i][j] > self.entries[i][i] {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn is_envy_free(&self) -> bool {
        self.envious_pairs().is_empty()
    }
}

pub fn envy_matrix(allocation: &[Piece; AGENTS], instance: &Instance) -> Result<EnvyMatrix, AnalysisError> {
    check_disjoint(allocation)?;
    Ok(EnvyMatrix {
        entries: std::array::from_fn(|i| {
            std::array::from_fn(|j| instance.valuations[i].eval_piece(&allocation[j]))
        }),
    })
}

/// `edges[i][j]`: `i` would not envy `j` even if `j` also got the residue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DominationGraph {
    pub edges: [[bool; AGENTS]; AGENTS],
}

impl DominationGraph {
    pub fn dominates(&self, i: Agent, j: Agent) -> bool {
        self.edges[i][j]
    }

    pub fn dominators(&self, j: Agent) -> Vec<Agent> {
        (0..AGENTS).filter(|&i| self.edges[i][j]).collect()
    }

    pub fn dominated_by(&self, i: Agent) -> Vec<Agent> {
        (0..AGENTS).filter(|&j| self.edges[i][j]).collect()
    }

    pub fn in_degree(&self, j: Agent) -> usize {
        self.dominators(j).len()
    }

    pub fn out_degree(&self, i: Agent) -> usize {
        self.dominated_by(i).len()
    }
}

pub fn domination_graph(
    allocation: &[Piece; AGENTS],
    residue: &Piece,
    instance: &Instance,
) -> Result<DominationGraph, AnalysisError> {
    check_disjoint(allocation)?;
    let mut edges = [[false; AGENTS]; AGENTS];
    for i in 0..AGENTS {
        let v = &instance.valuations[i];
        let own = v.eval_piece(&allocation[i]);
        for j in 0..AGENTS {
            if i != j {
                edges[i][j] = own >= v.eval_piece(&allocation[j].union(residue));
            }
        }
    }
    Ok(DominationGraph { edges })
}

/// Gain of `i` in the suballocation `sub` when `i` dominates exactly the
/// agents flagged in `dominated`. `None` when that covers everyone.
pub fn gain_with(
    sub: &[Piece; AGENTS],
    dominated: &[bool; AGENTS],
    i: Agent,
    instance: &Instance,
) -> Option<Rational> {
    let v = &instance.valuations[i];
    let best = (0..AGENTS)
        .filter(|&j| j != i && !dominated[j])
        .map(|j| v.eval_piece(&sub[j]))
        .max()?;
    Some(v.eval_piece(&sub[i]) - best)
}

/// Gain used to pick a call to correct: [`gain_with`], or the gain against
/// all other agents when `i` dominates everyone.
pub fn effective_gain(sub: &[Piece; AGENTS], dominated: &[bool; AGENTS], i: Agent, instance: &Instance) -> Rational {
    gain_with(sub, dominated, i, instance)
        .or_else(|| gain_with(sub, &[false; AGENTS], i, instance))
        .expect("three other agents")
}

/// Gain of `i` in `sub`, a suballocation of `full`, with dominations taken
/// from `full` and `residue`.
pub fn gain(
    sub: &[Piece; AGENTS],
    full: &[Piece; AGENTS],
    residue: &Piece,
    i: Agent,
    instance: &Instance,
) -> Result<Option<Rational>, AnalysisError> {
    for j in 0..AGENTS {
        if !full[j].contains(&sub[j]) {
            return Err(AnalysisError::NotSubAllocation(j));
        }
    }
    let graph = domination_graph(full, residue, instance)?;
    Ok(gain_with(sub, &graph.edges[i], i, instance))
}

/// Agent → piece for a Core call under the given holders.
pub fn suballocation(result: &CoreResult, holders: &[Agent; 4]) -> [Piece; AGENTS] {
    std::array::from_fn(|a| {
        let p = holders.iter().position(|&h| h == a).expect("one piece each");
        result.allocated[p].clone()
    })
}

/// Insignificant piece index recomputed from the marks and the cutter's
/// true valuation.
pub fn brute_insignificant(result: &CoreResult, instance: &Instance) -> Option<usize> {
    let v = &instance.valuations[result.cutter];
    (0..4)
        .filter(|&p| result.marks.iter().any(|m| m.piece_index == p))
        .min_by(|&a, &b| {
            v.eval_piece(&result.allocated[a])
                .cmp(&v.eval_piece(&result.allocated[b]))
                .then(a.cmp(&b))
        })
}
