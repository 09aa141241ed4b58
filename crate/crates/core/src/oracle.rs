//! Metered access to the agents' valuations.
//!
//! Protocol code never reads a [`Valuation`] directly. Every cut, mark and
//! evaluation goes through [`Oracle`], which bills the [`QueryLedger`] one unit
//! per cut (marks included) and one unit per evaluation whose answer the agent
//! could not already infer. Inference uses additivity over what the agent has
//! learned so far: a value is free if the piece is a linear combination of
//! pieces whose values she knows.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::geometry::{Piece, ResidueFrame};
use crate::rational::{one, zero, Rational};
use crate::valuation::{Instance, ValuationError, AGENTS};

pub type Agent = usize;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepCount {
    pub label: String,
    pub cuts: u32,
    pub evals: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryKind {
    Cut,
    Mark,
    Eval,
}

/// One billed query: who was asked, and the piece cut off or evaluated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub label: String,
    pub agent: Agent,
    pub kind: QueryKind,
    pub piece: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryLedger {
    pub cuts: u32,
    pub evals: u32,
    pub steps: Vec<StepCount>,
    pub log: Vec<QueryRecord>,
}

impl QueryLedger {
    fn record(&mut self, label: &str, agent: Agent, kind: QueryKind, piece: &Piece) {
        let (cuts, evals) = if kind == QueryKind::Eval { (0, 1) } else { (1, 0) };
        self.bill(label, cuts, evals);
        self.log.push(QueryRecord {
            label: label.to_string(),
            agent,
            kind,
            piece: piece.to_string(),
        });
    }

    fn bill(&mut self, label: &str, cuts: u32, evals: u32) {
        self.cuts += cuts;
        self.evals += evals;
        match self.steps.last_mut() {
            Some(last) if last.label == label => {
                last.cuts += cuts;
                last.evals += evals;
            }
            _ => self.steps.push(StepCount {
                label: label.to_string(),
                cuts,
                evals,
            }),
        }
    }

    /// Totals billed under labels starting with `prefix`.
    pub fn billed_under(&self, prefix: &str) -> (u32, u32) {
        self.steps
            .iter()
            .filter(|s| s.label.starts_with(prefix))
            .fold((0, 0), |(c, e), s| (c + s.cuts, e + s.evals))
    }

    pub fn totals(&self) -> (u32, u32) {
        (self.cuts, self.evals)
    }
}

/// What one agent has learned about her own valuation.
///
/// Pieces are vectors over the atoms cut out by every endpoint seen so far,
/// and the known values are kept as a reduced row echelon basis. A value is
/// derivable exactly when the piece lies in the span of the known pieces.
#[derive(Debug, Clone)]
pub struct Knowledge {
    points: BTreeSet<Rational>,
    rows: Vec<Row>,
}

/// Basis vector keyed by atom left endpoint, with a coefficient of 1 at
/// `pivot` and 0 at every other row's pivot.
#[derive(Debug, Clone)]
struct Row {
    pivot: Rational,
    coeffs: BTreeMap<Rational, Rational>,
    value: Rational,
}

impl Default for Knowledge {
    fn default() -> Self {
        Knowledge {
            points: BTreeSet::from([zero(), one()]),
            rows: Vec::new(),
        }
    }
}

fn axpy(target: &mut BTreeMap<Rational, Rational>, factor: &Rational, row: &BTreeMap<Rational, Rational>) {
    for (k, c) in row {
        let entry = target.entry(k.clone()).or_insert_with(zero);
        *entry -= factor * c;
        if entry.is_zero() {
            target.remove(k);
        }
    }
}

impl Knowledge {
    /// Number of independent facts learned.
    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    fn split_at(&mut self, x: &Rational) {
        if self.points.contains(x) {
            return;
        }
        let left = self.points.range(..x.clone()).next_back().expect("0 is a point").clone();
        self.points.insert(x.clone());
        for row in &mut self.rows {
            if let Some(c) = row.coeffs.get(&left).cloned() {
                row.coeffs.insert(x.clone(), c);
            }
        }
    }

    /// Indicator vector of `piece`, or `None` if an endpoint splits an atom.
    fn vector(&self, piece: &Piece) -> Option<BTreeMap<Rational, Rational>> {
        let mut v = BTreeMap::new();
        for iv in piece.intervals() {
            if !self.points.contains(iv.lo()) || !self.points.contains(iv.hi()) {
                return None;
            }
            for atom in self.points.range(iv.lo().clone()..iv.hi().clone()) {
                v.insert(atom.clone(), one());
            }
        }
        Some(v)
    }

    /// Eliminates the basis from `v`, returning the value accumulated.
    fn reduce(&self, v: &mut BTreeMap<Rational, Rational>) -> Rational {
        let mut value = zero();
        for row in &self.rows {
            if let Some(c) = v.get(&row.pivot).cloned() {
                axpy(v, &c, &row.coeffs);
                value += c * &row.value;
            }
        }
        value
    }

    pub fn learn(&mut self, piece: Piece, value: Rational) {
        if piece.is_empty() {
            return;
        }
        for iv in piece.intervals() {
            self.split_at(iv.lo());
            self.split_at(iv.hi());
        }
        let mut v = self.vector(&piece).expect("endpoints were just added");
        let derived = self.reduce(&mut v);
        let Some((pivot, c)) = v.iter().next().map(|(k, c)| (k.clone(), c.clone())) else {
            return;
        };
        let scale = c.recip();
        let coeffs: BTreeMap<Rational, Rational> = v.into_iter().map(|(k, x)| (k, x * &scale)).collect();
        let value = (value - derived) * &scale;
        for row in &mut self.rows {
            if let Some(f) = row.coeffs.get(&pivot).cloned() {
                axpy(&mut row.coeffs, &f, &coeffs);
                row.value -= f * &value;
            }
        }
        self.rows.push(Row { pivot, coeffs, value });
    }

    /// Value of `target` if it follows from what is known by additivity.
    pub fn derive(&self, target: &Piece) -> Option<Rational> {
        if target.is_empty() {
            return Some(zero());
        }
        let mut v = self.vector(target)?;
        let value = self.reduce(&mut v);
        v.is_empty().then_some(value)
    }
}

/// One per protocol run.
#[derive(Debug, Clone)]
pub struct Oracle<'a> {
    instance: &'a Instance,
    knowledge: [Knowledge; AGENTS],
    ledger: QueryLedger,
    /// Agents excused from evaluations billed under a given label.
    exemptions: Vec<(String, Agent)>,
}

impl<'a> Oracle<'a> {
    /// Every agent starts out knowing that the whole cake is worth 1.
    pub fn new(instance: &'a Instance) -> Self {
        let knowledge = std::array::from_fn(|_| {
            let mut k = Knowledge::default();
            k.learn(Piece::full(), one());
            k
        });
        Oracle {
            instance,
            knowledge,
            ledger: QueryLedger::default(),
            exemptions: Vec::new(),
        }
    }

    pub fn instance(&self) -> &Instance {
        self.instance
    }

    pub fn ledger(&self) -> &QueryLedger {
        &self.ledger
    }

    pub fn into_ledger(self) -> QueryLedger {
        self.ledger
    }

    pub fn knowledge(&self, agent: Agent) -> &Knowledge {
        &self.knowledge[agent]
    }

    /// Cut query inside a residue frame: smallest frame point `y` such that
    /// the residue between `from` and `y` is worth `r` to `agent`.
    pub fn cut(
        &mut self,
        agent: Agent,
        frame: &ResidueFrame,
        from: &Rational,
        r: &Rational,
        label: &str,
    ) -> Result<Rational, ValuationError> {
        let y = self.instance.valuations[agent]
            .framed(frame)
            .reach_forward(from, r)?;
        let piece = frame.slice(from, &y).expect("cut stays in frame");
        self.ledger.record(label, agent, QueryKind::Cut, &piece);
        self.knowledge[agent].learn(piece, r.clone());
        Ok(y)
    }

    /// Cut query on the whole cake.
    pub fn cut_cake(
        &mut self,
        agent: Agent,
        x: &Rational,
        r: &Rational,
        label: &str,
    ) -> Result<Rational, ValuationError> {
        let frame = ResidueFrame::new(Piece::full());
        self.cut(agent, &frame, x, r, label)
    }

    /// Mark on the frame span `[lo, hi]` leaving a partial piece worth `r`;
    /// simulated by (and billed as) one cut query.
    pub fn mark(
        &mut self,
        agent: Agent,
        frame: &ResidueFrame,
        span: (&Rational, &Rational),
        r: &Rational,
        label: &str,
    ) -> Result<Rational, ValuationError> {
        let m = self.instance.valuations[agent].right_cut(frame, span, r)?;
        let partial = frame.slice(&m, span.1).expect("mark stays in span");
        self.ledger.record(label, agent, QueryKind::Mark, &partial);
        self.knowledge[agent].learn(partial, r.clone());
        Ok(m)
    }

    /// Evaluation query, billed only when the answer is not already implied.
    pub fn eval(&mut self, agent: Agent, piece: &Piece, label: &str) -> Rational {
        if let Some(v) = self.knowledge[agent].derive(piece) {
            return v;
        }
        let v = self.instance.valuations[agent].eval_piece(piece);
        self.ledger.record(label, agent, QueryKind::Eval, piece);
        self.knowledge[agent].learn(piece.clone(), v.clone());
        v
    }

    /// Value if the agent can infer it for free.
    pub fn known(&self, agent: Agent, piece: &Piece) -> Option<Rational> {
        self.knowledge[agent].derive(piece)
    }

    /// Records a derivable value explicitly so later inferences stay shallow.
    pub fn consolidate(&mut self, agent: Agent, piece: &Piece) -> bool {
        match self.knowledge[agent].derive(piece) {
            Some(v) => {
                self.knowledge[agent].learn(piece.clone(), v);
                true
            }
            None => false,
        }
    }

    /// Registers that `agent` does not need the evaluations of step `label`.
    /// Protocol code consults [`is_exempt`](Self::is_exempt) and skips them.
    pub fn exempt(&mut self, label: &str, agent: Agent) {
        self.exemptions.push((label.to_string(), agent));
    }

    pub fn is_exempt(&self, label: &str, agent: Agent) -> bool {
        self.exemptions.iter().any(|(l, a)| *a == agent && l == label)
    }

    pub fn snapshot(&self) -> (u32, u32) {
        self.ledger.totals()
    }
}
