use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::geometry::Piece;
use crate::oracle::{Agent, Oracle, QueryLedger};
use crate::rational::Rational;
use crate::valuation::{Instance, AGENTS};

use super::{
    core, correction, cut_and_choose, insignificant_of, invariant, selfridge_conway, CoreContext,
    GainRecord, ProtocolError, ProtocolState,
};

/// Tracked decision points of the main protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    /// One agent held the insignificant piece in all four opening calls.
    Phase1Correction,
    /// Core with a second cutter, agent 0 excluded from competition.
    Exclusion,
    /// Agent 0 dominated everybody; the other three finish with Selfridge-Conway.
    SelfridgeConway,
    Phase2Correction,
    CutAndChoose,
}

impl Branch {
    pub const ALL: [Branch; 5] = [
        Branch::Phase1Correction,
        Branch::Exclusion,
        Branch::SelfridgeConway,
        Branch::Phase2Correction,
        Branch::CutAndChoose,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Branch::Phase1Correction => "phase1-correction",
            Branch::Exclusion => "exclusion",
            Branch::SelfridgeConway => "selfridge-conway",
            Branch::Phase2Correction => "phase2-correction",
            Branch::CutAndChoose => "cut-and-choose",
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Branch {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Branch::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Branch::ALL.iter().map(|b| b.name()).collect();
                format!("unknown branch `{s}` (expected one of {})", names.join(", "))
            })
    }
}

/// A is dominated by B and C; D is the fourth agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Roles {
    pub a: Agent,
    pub b: Agent,
    pub c: Agent,
    pub d: Agent,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub allocation: [Piece; AGENTS],
    pub ledger: QueryLedger,
    pub state: ProtocolState,
    pub branches: Vec<Branch>,
    pub roles: Option<Roles>,
    /// Label of the step after which the cake was fully allocated.
    pub finished_at: String,
}

impl RunOutcome {
    pub fn fired(&self, branch: Branch) -> bool {
        self.branches.contains(&branch)
    }
}

/// Gain of `agent` in Core call `core_index`, measured against the current
/// allocation with the values the agent knows. When the agent dominates
/// everyone the gain is taken against all other agents instead.
pub fn known_gain(
    state: &mut ProtocolState,
    oracle: &mut Oracle<'_>,
    core_index: usize,
    agent: Agent,
    label: &str,
) -> Rational {
    let result = &state.core_history[core_index];
    let holders = state.holders[core_index];
    let sub: [Piece; AGENTS] = std::array::from_fn(|j| {
        let p = holders.iter().position(|&h| h == j).expect("one piece each");
        result.allocated[p].clone()
    });
    let others: Vec<Agent> = (0..AGENTS).filter(|&j| j != agent).collect();
    let mut rivals: Vec<Agent> = others
        .iter()
        .copied()
        .filter(|&j| !state.known_dominates(oracle, agent, j, label))
        .collect();
    let dominates_all = rivals.is_empty();
    if dominates_all {
        rivals = others;
    }
    let own = oracle.eval(agent, &sub[agent], label);
    let best = rivals
        .iter()
        .map(|&j| oracle.eval(agent, &sub[j], label))
        .max()
        .expect("three other agents");
    let value = own - best;
    state.gains.push(GainRecord {
        label: label.to_string(),
        core_index,
        agent,
        reference: state.snapshot(),
        holders,
        value: value.clone(),
        dominates_all,
    });
    value
}

/// Smallest call index `k` such that, for every agent, `gains[agent][k]` is
/// at most the sum of that agent's other gains.
pub fn choose_correction_target(gains: &[[Rational; 4]]) -> Option<usize> {
    (0..4).find(|&k| {
        gains.iter().all(|row| {
            let others: Rational = (0..4).filter(|&l| l != k).map(|l| &row[l]).sum();
            row[k] <= others
        })
    })
}

struct Run<'a> {
    state: ProtocolState,
    oracle: Oracle<'a>,
    branches: Vec<Branch>,
    roles: Option<Roles>,
}

impl<'a> Run<'a> {
    fn finish(self, finished_at: &str) -> RunOutcome {
        RunOutcome {
            allocation: self.state.allocation.clone(),
            ledger: self.oracle.into_ledger(),
            state: self.state,
            branches: self.branches,
            roles: self.roles,
            finished_at: finished_at.to_string(),
        }
    }

    fn core(&mut self, cutter: Agent, excluded: &[Agent], context: CoreContext) -> Result<bool, ProtocolError> {
        core(&mut self.state, &mut self.oracle, cutter, excluded, context)?;
        Ok(self.state.is_complete())
    }

    /// Holder of the insignificant piece of call `k` right now.
    fn insignificant_holder(&self, k: usize) -> Option<Agent> {
        let result = &self.state.core_history[k];
        let p = result.insignificant?;
        insignificant_of(result)?;
        Some(self.state.holders[k][p])
    }
}

/// Runs the four-agent protocol to completion on `instance`.
pub fn main_protocol(instance: &Instance) -> Result<RunOutcome, ProtocolError> {
    let mut run = Run {
        state: ProtocolState::new(),
        oracle: Oracle::new(instance),
        branches: Vec::new(),
        roles: None,
    };

    // phase one
    for k in 1..=4u8 {
        let context = CoreContext::PhaseOneLoop(k);
        if run.core(0, &[], context)? {
            return Ok(run.finish(&context.label()));
        }
    }
    let holders: Vec<Option<Agent>> = (0..4).map(|k| run.insignificant_holder(k)).collect();
    if holders[0].is_some() && holders.iter().all(|h| *h == holders[0]) {
        let label = "phase1.decide";
        let mut table = Vec::new();
        for i in 1..AGENTS {
            let row: [Rational; 4] =
                std::array::from_fn(|k| known_gain(&mut run.state, &mut run.oracle, k, i, label));
            table.push(row);
        }
        let target = choose_correction_target(&table)
            .ok_or_else(|| invariant(label, "no call satisfies the gain inequality"))?;
        correction(&mut run.state, &mut run.oracle, target, "phase1.correction")?;
        run.branches.push(Branch::Phase1Correction);
    }
    if run.core(0, &[], CoreContext::PhaseOneAgain)? {
        return Ok(run.finish(&CoreContext::PhaseOneAgain.label()));
    }
    let undominated = (1..AGENTS).find(|&j| !run.state.known_dominates(&mut run.oracle, 0, j, "phase1.decide"));
    match undominated {
        Some(e) => {
            run.branches.push(Branch::Exclusion);
            if run.core(e, &[0], CoreContext::PhaseOneExclusion)? {
                return Ok(run.finish(&CoreContext::PhaseOneExclusion.label()));
            }
        }
        None => {
            let label = "phase1.selfridge_conway";
            selfridge_conway(&mut run.state, &mut run.oracle, [1, 2, 3], label)?;
            run.branches.push(Branch::SelfridgeConway);
            return Ok(run.finish(label));
        }
    }

    let all: Vec<Agent> = (0..AGENTS).collect();
    let dom = run.state.known_domination(&mut run.oracle, &all, "phase1.decide");
    let dominators = |a: Agent| (0..AGENTS).filter(|&j| dom[j][a]).collect::<Vec<_>>();
    let a = (0..AGENTS)
        .find(|&a| dominators(a).len() >= 2)
        .ok_or_else(|| invariant("phase1", "no agent is dominated by two others"))?;
    let (b, c) = (dominators(a)[0], dominators(a)[1]);
    let d = (0..AGENTS).find(|&x| x != a && x != b && x != c).expect("four agents");
    run.roles = Some(Roles { a, b, c, d });

    // phase two
    for k in 1..=2u8 {
        let context = CoreContext::PhaseTwo(k);
        if k == 2 {
            run.oracle.exempt(&context.label(), a);
            run.oracle.exempt(&context.label(), d);
        }
        let label = "phase2.decide";
        let excluded: Vec<Agent> = [(b, c), (c, b)]
            .into_iter()
            .find(|&(x, y)| {
                run.state.known_dominates(&mut run.oracle, x, a, label)
                    && run.state.known_dominates(&mut run.oracle, x, y, label)
            })
            .map(|(x, _)| vec![x])
            .unwrap_or_default();
        if run.core(d, &excluded, context)? {
            return Ok(run.finish(&context.label()));
        }
    }
    let n = run.state.core_history.len();
    let (first, second) = (n - 2, n - 1);
    let f1 = run.insignificant_holder(first);
    let f2 = run.insignificant_holder(second);
    if let Some(f) = f1.filter(|_| f1 == f2) {
        let label = "phase2.decide";
        if f != b && f != c {
            return Err(invariant(label, format!("insignificant pieces went to {f}, outside B and C")));
        }
        let g1 = known_gain(&mut run.state, &mut run.oracle, first, f, label);
        let g2 = known_gain(&mut run.state, &mut run.oracle, second, f, label);
        let target = if g2 < g1 { second } else { first };
        correction(&mut run.state, &mut run.oracle, target, "phase2.correction")?;
        run.branches.push(Branch::Phase2Correction);
    }

    // phase three
    let label = "phase3.cut_and_choose";
    cut_and_choose(&mut run.state, &mut run.oracle, b, c, label)?;
    run.branches.push(Branch::CutAndChoose);
    Ok(run.finish(label))
}
