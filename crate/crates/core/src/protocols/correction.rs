use crate::geometry::Piece;
use crate::oracle::{Agent, Oracle};
use crate::valuation::AGENTS;

use super::core::{insignificant_index, preference_order};
use super::{
    invariant, CoreResult, LedgerDelta, MovedPiece, ProtocolError, ProtocolState, StepKind,
    StepRecord, TraceEvent,
};

/// Holder and piece of a Core call's insignificant piece, if any piece was
/// partially allocated.
pub fn insignificant_of(result: &CoreResult) -> Option<(Agent, Piece)> {
    let partial: Vec<usize> = (0..4).filter(|&p| result.partial[p]).collect();
    let p = insignificant_index(&partial, &result.cutter_partial_values)?;
    Some((result.holders[p], result.allocated[p].clone()))
}

/// Reallocates the four pieces of Core call `core_index` so that the
/// insignificant piece changes hands. Returns the new holders by piece.
pub fn correction(
    state: &mut ProtocolState,
    oracle: &mut Oracle<'_>,
    core_index: usize,
    label: &str,
) -> Result<[Agent; 4], ProtocolError> {
    let result = state
        .core_history
        .get(core_index)
        .ok_or_else(|| invariant(label, format!("no Core call #{core_index}")))?
        .clone();
    let holders = state.holders[core_index];
    let ins = result
        .insignificant
        .ok_or_else(|| invariant(label, "Core call has no insignificant piece"))?;
    let before = state.snapshot();
    let (cuts0, evals0) = oracle.snapshot();

    let d = result.cutter;
    let a = holders[ins];
    let top = result.marks_on(ins);
    if top.len() < 2 {
        return Err(invariant(label, "insignificant piece has fewer than two marks"));
    }
    let b = if top[0].agent == a {
        top[1].agent
    } else if top[1].agent == a {
        top[0].agent
    } else {
        return Err(invariant(label, format!("holder {a} made neither top mark")));
    };
    let mut next: [Option<Agent>; 4] = [None; 4];
    next[ins] = Some(b);

    let free = |next: &[Option<Agent>; 4]| (0..4).filter(|&p| next[p].is_none()).collect::<Vec<_>>();
    let choose = |next: &mut [Option<Agent>; 4], agent: Agent, oracle: &mut Oracle<'_>| {
        let options = free(next);
        let values = std::array::from_fn(|p| {
            if options.contains(&p) {
                oracle.eval(agent, &result.allocated[p], label)
            } else {
                crate::rational::zero()
            }
        });
        let pick = preference_order(&values, &options)[0];
        next[pick] = Some(agent);
    };

    let other_partial = (0..4).find(|&p| p != ins && result.partial[p]);
    match other_partial {
        None => {
            let c = (0..AGENTS)
                .find(|&x| x != d && x != a && x != b)
                .expect("four agents");
            for agent in [c, a, d] {
                choose(&mut next, agent, oracle);
            }
        }
        Some(q) => {
            let e = result
                .marks_on(q)
                .into_iter()
                .find(|m| m.agent != b)
                .map(|m| m.agent)
                .ok_or_else(|| invariant(label, "other partial piece has no mark outside B"))?;
            if e == d || e == b {
                return Err(invariant(label, format!("agent {e} cannot take the other partial piece")));
            }
            next[q] = Some(e);
            let last = (0..AGENTS)
                .find(|&x| x != d && x != b && x != e)
                .expect("four agents");
            choose(&mut next, last, oracle);
            choose(&mut next, d, oracle);
        }
    }
    let after_holders: [Agent; 4] = std::array::from_fn(|p| next[p].expect("every piece reassigned"));

    for p in 0..4 {
        let old = holders[p];
        state.allocation[old] = state.allocation[old].subtract(&result.allocated[p]);
    }
    let mut moved = Vec::new();
    for p in 0..4 {
        let new = after_holders[p];
        state.allocation[new] = state.allocation[new].union(&result.allocated[p]);
        if new != holders[p] {
            moved.push(MovedPiece {
                agent: new,
                piece: result.allocated[p].clone(),
            });
        }
    }
    state.holders[core_index] = after_holders;

    let (cuts1, evals1) = oracle.snapshot();
    let (cuts, evals) = (cuts1 - cuts0, evals1 - evals0);
    let after = state.snapshot();
    let event = TraceEvent {
        step: label.to_string(),
        moved,
        marks: Vec::new(),
        ledger: LedgerDelta { cuts, evals },
        residue: state.residue.clone(),
        note: Some(format!("reallocates {}", result.label)),
    };
    state.record(
        StepRecord {
            label: label.to_string(),
            kind: StepKind::Correction {
                core_index,
                before: holders,
                after: after_holders,
            },
            before,
            after,
            cuts,
            evals,
        },
        event,
    );
    Ok(after_holders)
}
