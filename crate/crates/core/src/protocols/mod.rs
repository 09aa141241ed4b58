//! The allocation protocols: Core, Correction, the two classical subroutines
//! and the four-agent main protocol that strings them together.

mod core;
mod correction;
mod main_protocol;
mod subroutines;

pub use self::core::{core, has_competition, preference_order};
pub use self::correction::{correction, insignificant_of};
pub use self::main_protocol::{choose_correction_target, main_protocol, known_gain, Branch, Roles, RunOutcome};
pub use self::subroutines::{cut_and_choose, selfridge_conway};

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::geometry::{GeometryError, Piece, ResidueFrame};
use crate::oracle::{Agent, Oracle};
use crate::rational::{self, Rational};
use crate::valuation::{ValuationError, AGENTS};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("query contract violated: {0}")]
    Query(#[from] ValuationError),
    #[error("geometry: {0}")]
    Geometry(#[from] GeometryError),
    /// A structural guarantee of the protocol failed; indicates a bug.
    #[error("internal invariant broken at {step}: {detail}")]
    Invariant { step: String, detail: String },
}

pub(crate) fn invariant(step: &str, detail: impl Into<String>) -> ProtocolError {
    ProtocolError::Invariant {
        step: step.to_string(),
        detail: detail.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkKind {
    Two,
    Three,
}

impl MarkKind {
    /// `x` of an x-mark.
    pub fn rank(self) -> usize {
        match self {
            MarkKind::Two => 2,
            MarkKind::Three => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mark {
    pub agent: Agent,
    pub piece_index: usize,
    /// Frame coordinate.
    pub position: Rational,
    pub kind: MarkKind,
}

/// Why a Core call was made; fixes its label and its query budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoreContext {
    /// Calls 1-4 of phase one.
    PhaseOneLoop(u8),
    /// The fifth call with agent 0 cutting.
    PhaseOneAgain,
    /// Phase one with a new cutter and agent 0 excluded.
    PhaseOneExclusion,
    PhaseTwo(u8),
    Standalone,
}

impl CoreContext {
    pub fn label(self) -> String {
        match self {
            CoreContext::PhaseOneLoop(k) => format!("phase1.core.{k}"),
            CoreContext::PhaseOneAgain => "phase1.core.5".to_string(),
            CoreContext::PhaseOneExclusion => "phase1.core.6".to_string(),
            CoreContext::PhaseTwo(k) => format!("phase2.core.{k}"),
            CoreContext::Standalone => "core".to_string(),
        }
    }

    /// Calls known to leave at most one partial piece get the reduced budget.
    pub fn is_reduced(self) -> bool {
        matches!(self, CoreContext::PhaseOneExclusion | CoreContext::PhaseTwo(_))
    }

    /// `(cuts, evals)` a single call may bill.
    pub fn query_budget(self) -> (u32, u32) {
        if self.is_reduced() {
            (5, 12)
        } else {
            (9, 15)
        }
    }
}

/// Everything a Core call decided.
#[derive(Debug, Clone)]
pub struct CoreResult {
    pub label: String,
    pub context: CoreContext,
    pub cutter: Agent,
    pub excluded: Vec<Agent>,
    pub frame: ResidueFrame,
    /// Frame spans of the four equal pieces, left to right.
    pub spans: [(Rational, Rational); 4],
    pub pieces: [Piece; 4],
    /// `values[agent][piece]` as learned through the oracle.
    pub values: [[Rational; 4]; AGENTS],
    /// Agents handed their favorite piece before any marking.
    pub early: Vec<(Agent, usize)>,
    /// Everyone left competing had a distinct favorite; no marks were made.
    pub distinct_favorites: bool,
    /// Pieces still unallocated when marks were placed.
    pub marking_pool: Vec<usize>,
    pub mark_kinds: Vec<(Agent, MarkKind)>,
    pub marks: Vec<Mark>,
    pub holders: [Agent; 4],
    /// What was actually handed out from each piece.
    pub allocated: [Piece; 4],
    /// Frame coordinate where the allocated part of each piece begins.
    pub starts: [Rational; 4],
    pub partial: [bool; 4],
    /// Cutter's value of each allocated partial piece, when she learned it.
    pub cutter_partial_values: [Option<Rational>; 4],
    /// Piece index of the insignificant piece.
    pub insignificant: Option<usize>,
    pub new_residue: Piece,
    pub cuts: u32,
    pub evals: u32,
}

impl CoreResult {
    /// Marks on one piece, rightmost first (position ties: lower agent id).
    pub fn marks_on(&self, piece: usize) -> Vec<&Mark> {
        let mut ms: Vec<&Mark> = self.marks.iter().filter(|m| m.piece_index == piece).collect();
        ms.sort_by(|a, b| b.position.cmp(&a.position).then(a.agent.cmp(&b.agent)));
        ms
    }

    pub fn marked_pieces(&self) -> Vec<usize> {
        (0..4).filter(|&p| self.marks.iter().any(|m| m.piece_index == p)).collect()
    }

    pub fn piece_of(&self, agent: Agent) -> usize {
        self.holders
            .iter()
            .position(|&h| h == agent)
            .expect("every agent holds one piece")
    }

    /// Agent → allocated piece.
    pub fn suballocation(&self) -> [Piece; AGENTS] {
        std::array::from_fn(|a| self.allocated[self.piece_of(a)].clone())
    }

    pub fn terminated_whole_cake(&self) -> bool {
        self.new_residue.is_empty()
    }

    pub fn non_cutters(&self) -> Vec<Agent> {
        (0..AGENTS).filter(|&a| a != self.cutter).collect()
    }

    pub fn mark_kind_of(&self, agent: Agent) -> Option<MarkKind> {
        self.mark_kinds
            .iter()
            .find(|(a, _)| *a == agent)
            .map(|(_, k)| *k)
    }
}

/// Allocation and residue at one instant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Snapshot {
    pub allocation: [Piece; AGENTS],
    pub residue: Piece,
}

#[derive(Debug, Clone)]
pub enum StepKind {
    Core {
        core_index: usize,
    },
    Correction {
        core_index: usize,
        before: [Agent; 4],
        after: [Agent; 4],
    },
    SelfridgeConway {
        agents: [Agent; 3],
        trimmed: bool,
    },
    CutAndChoose {
        cutter: Agent,
        chooser: Agent,
    },
}

#[derive(Debug, Clone)]
pub struct StepRecord {
    pub label: String,
    pub kind: StepKind,
    pub before: Snapshot,
    pub after: Snapshot,
    pub cuts: u32,
    pub evals: u32,
}

/// A gain the protocol computed from what the agents know.
#[derive(Debug, Clone)]
pub struct GainRecord {
    pub label: String,
    pub core_index: usize,
    pub agent: Agent,
    /// Allocation the gain was measured against.
    pub reference: Snapshot,
    /// Holders of the suballocation's pieces at that time.
    pub holders: [Agent; 4],
    pub value: Rational,
    /// The agent dominated everyone, so the gain was taken against all
    /// other agents.
    pub dominates_all: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MovedPiece {
    pub agent: Agent,
    pub piece: Piece,
}

#[derive(Debug, Clone, Serialize)]
pub struct MarkEvent {
    pub agent: Agent,
    pub piece_index: usize,
    #[serde(with = "rational::serde_compact")]
    pub position: Rational,
    pub kind: MarkKind,
}

#[derive(Debug, Clone, Serialize)]
pub struct LedgerDelta {
    pub cuts: u32,
    pub evals: u32,
}

/// One line of the JSON-lines trace.
#[derive(Debug, Clone, Serialize)]
pub struct TraceEvent {
    pub step: String,
    pub moved: Vec<MovedPiece>,
    pub marks: Vec<MarkEvent>,
    pub ledger: LedgerDelta,
    pub residue: Piece,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Running partial allocation of one protocol run.
#[derive(Debug, Clone)]
pub struct ProtocolState {
    pub allocation: [Piece; AGENTS],
    pub residue: Piece,
    pub core_history: Vec<CoreResult>,
    /// Current holder of every piece of every Core call (changes on Correction).
    pub holders: Vec<[Agent; 4]>,
    pub steps: Vec<StepRecord>,
    pub gains: Vec<GainRecord>,
    pub trace: Vec<TraceEvent>,
}

impl Default for ProtocolState {
    fn default() -> Self {
        ProtocolState::new()
    }
}

impl ProtocolState {
    /// Nothing allocated, the whole cake in the residue.
    pub fn new() -> Self {
        ProtocolState {
            allocation: std::array::from_fn(|_| Piece::empty()),
            residue: Piece::full(),
            core_history: Vec::new(),
            holders: Vec::new(),
            steps: Vec::new(),
            gains: Vec::new(),
            trace: Vec::new(),
        }
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            allocation: self.allocation.clone(),
            residue: self.residue.clone(),
        }
    }

    pub fn is_complete(&self) -> bool {
        self.residue.is_empty()
    }

    /// Does `i` dominate `j`, judged from what `i` knows? Free when the
    /// knowledge suffices; otherwise billed under `label`.
    pub(crate) fn known_dominates(&self, oracle: &mut Oracle<'_>, i: Agent, j: Agent, label: &str) -> bool {
        let own = oracle.eval(i, &self.allocation[i], label);
        let other = oracle.eval(i, &self.allocation[j].union(&self.residue), label);
        own >= other
    }

    /// Domination among `among`; pairs outside it read as `false`.
    pub(crate) fn known_domination(
        &self,
        oracle: &mut Oracle<'_>,
        among: &[Agent],
        label: &str,
    ) -> [[bool; AGENTS]; AGENTS] {
        let mut dom = [[false; AGENTS]; AGENTS];
        for &i in among {
            for &j in among {
                if i != j {
                    dom[i][j] = self.known_dominates(oracle, i, j, label);
                }
            }
        }
        dom
    }

    pub(crate) fn record(&mut self, record: StepRecord, event: TraceEvent) {
        self.steps.push(record);
        self.trace.push(event);
    }

    /// The trace as JSON lines.
    pub fn trace_jsonl(&self) -> String {
        trace_to_jsonl(&self.trace)
    }
}

pub fn trace_to_jsonl(trace: &[TraceEvent]) -> String {
    let mut out = String::new();
    for ev in trace {
        out.push_str(&serde_json::to_string(ev).expect("trace event serializes"));
        out.push('\n');
    }
    out
}

impl fmt::Display for MarkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-mark", self.rank())
    }
}
