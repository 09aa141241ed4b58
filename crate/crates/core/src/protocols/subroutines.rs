use crate::geometry::{Piece, ResidueFrame};
use crate::oracle::{Agent, Oracle};
use crate::rational::{int, zero, Rational};

use super::core::preference_order;
use super::{
    invariant, LedgerDelta, MovedPiece, ProtocolError, ProtocolState, StepKind, StepRecord,
    TraceEvent,
};

fn finish(
    state: &mut ProtocolState,
    oracle: &Oracle<'_>,
    label: &str,
    kind: StepKind,
    gains: Vec<(Agent, Piece)>,
    start: ((u32, u32), super::Snapshot),
) {
    let ((cuts0, evals0), before) = start;
    let mut moved = Vec::new();
    for (agent, piece) in gains {
        state.allocation[agent] = state.allocation[agent].union(&piece);
        moved.push(MovedPiece { agent, piece });
    }
    state.residue = Piece::empty();
    let (cuts1, evals1) = oracle.snapshot();
    let (cuts, evals) = (cuts1 - cuts0, evals1 - evals0);
    let event = TraceEvent {
        step: label.to_string(),
        moved,
        marks: Vec::new(),
        ledger: LedgerDelta { cuts, evals },
        residue: Piece::empty(),
        note: None,
    };
    let after = state.snapshot();
    state.record(
        StepRecord {
            label: label.to_string(),
            kind,
            before,
            after,
            cuts,
            evals,
        },
        event,
    );
}

/// `cutter` halves the residue by her own measure and `chooser` picks a half
/// (the left one when indifferent). Empties the residue.
pub fn cut_and_choose(
    state: &mut ProtocolState,
    oracle: &mut Oracle<'_>,
    cutter: Agent,
    chooser: Agent,
    label: &str,
) -> Result<(), ProtocolError> {
    if state.residue.is_empty() {
        return Err(invariant(label, "cut-and-choose on an empty residue"));
    }
    let start = (oracle.snapshot(), state.snapshot());
    let frame = ResidueFrame::new(state.residue.clone());
    let half = oracle.eval(cutter, &state.residue, label) / int(2);
    let c = oracle.cut(cutter, &frame, &zero(), &half, label)?;
    let left = frame.slice(&zero(), &c)?;
    let right = frame.slice(&c, frame.length())?;
    let vl = oracle.eval(chooser, &left, label);
    let vr = oracle.eval(chooser, &right, label);
    let (mine, theirs) = if vl >= vr { (left, right) } else { (right, left) };
    finish(
        state,
        oracle,
        label,
        StepKind::CutAndChoose { cutter, chooser },
        vec![(chooser, mine), (cutter, theirs)],
        start,
    );
    Ok(())
}

/// Splits `frame` into three pieces worth `third` each to `agent`.
fn trisect(
    oracle: &mut Oracle<'_>,
    agent: Agent,
    frame: &ResidueFrame,
    label: &str,
) -> Result<([Piece; 3], [(Rational, Rational); 3]), ProtocolError> {
    let total = oracle.eval(agent, frame.residue(), label);
    let third = total / int(3);
    let c1 = oracle.cut(agent, frame, &zero(), &third, label)?;
    let c2 = oracle.cut(agent, frame, &c1, &third, label)?;
    let spans = [
        (zero(), c1.clone()),
        (c1, c2.clone()),
        (c2, frame.length().clone()),
    ];
    let pieces = [
        frame.slice(&spans[0].0, &spans[0].1)?,
        frame.slice(&spans[1].0, &spans[1].1)?,
        frame.slice(&spans[2].0, &spans[2].1)?,
    ];
    Ok((pieces, spans))
}

/// Values of the pieces listed in `among`; the others read as zero.
fn values_of(
    oracle: &mut Oracle<'_>,
    agent: Agent,
    pieces: &[Piece],
    among: &[usize],
    label: &str,
) -> [Rational; 4] {
    std::array::from_fn(|k| {
        if among.contains(&k) {
            oracle.eval(agent, &pieces[k], label)
        } else {
            zero()
        }
    })
}

/// The classical three-agent envy-free procedure on the residue:
/// `agents[0]` trisects, `agents[1]` trims, `agents[2]` chooses first.
pub fn selfridge_conway(
    state: &mut ProtocolState,
    oracle: &mut Oracle<'_>,
    agents: [Agent; 3],
    label: &str,
) -> Result<(), ProtocolError> {
    if state.residue.is_empty() {
        return Err(invariant(label, "Selfridge-Conway on an empty residue"));
    }
    let [p1, p2, p3] = agents;
    let start = (oracle.snapshot(), state.snapshot());
    let frame = ResidueFrame::new(state.residue.clone());
    let (pieces, spans) = trisect(oracle, p1, &frame, label)?;
    let all = [0, 1, 2];

    let v2 = values_of(oracle, p2, &pieces, &all, label);
    let order2 = preference_order(&v2, &all);
    let (best, second) = (order2[0], order2[1]);
    let mut gains = Vec::new();

    if v2[best] == v2[second] {
        let v3 = values_of(oracle, p3, &pieces, &all, label);
        let pick3 = preference_order(&v3, &all)[0];
        let rest: Vec<usize> = all.iter().copied().filter(|&k| k != pick3).collect();
        let pick2 = preference_order(&v2, &rest)[0];
        let pick1 = all.iter().copied().find(|&k| k != pick3 && k != pick2).unwrap();
        gains.push((p3, pieces[pick3].clone()));
        gains.push((p2, pieces[pick2].clone()));
        gains.push((p1, pieces[pick1].clone()));
        finish(
            state,
            oracle,
            label,
            StepKind::SelfridgeConway { agents, trimmed: false },
            gains,
            start,
        );
        return Ok(());
    }

    let (lo, hi) = &spans[best];
    let m = oracle.mark(p2, &frame, (lo, hi), &v2[second], label)?;
    let trimmed = frame.slice(&m, hi)?;
    let trimmings = frame.slice(lo, &m)?;
    let mut offer = pieces.clone();
    offer[best] = trimmed;

    let v3 = values_of(oracle, p3, &offer, &all, label);
    let pick3 = preference_order(&v3, &all)[0];
    let rest: Vec<usize> = all.iter().copied().filter(|&k| k != pick3).collect();
    let pick2 = if rest.contains(&best) {
        best
    } else {
        let v2_offer = values_of(oracle, p2, &offer, &rest, label);
        preference_order(&v2_offer, &rest)[0]
    };
    let pick1 = all.iter().copied().find(|&k| k != pick3 && k != pick2).unwrap();
    gains.push((p3, offer[pick3].clone()));
    gains.push((p2, offer[pick2].clone()));
    gains.push((p1, offer[pick1].clone()));

    if !trimmings.is_empty() {
        let receiver = if pick3 == best { p3 } else { p2 };
        let splitter = if receiver == p3 { p2 } else { p3 };
        let tframe = ResidueFrame::new(trimmings);
        let (parts, _) = trisect(oracle, splitter, &tframe, label)?;
        let vr = values_of(oracle, receiver, &parts, &all, label);
        let first = preference_order(&vr, &all)[0];
        let rest: Vec<usize> = all.iter().copied().filter(|&k| k != first).collect();
        let v1 = values_of(oracle, p1, &parts, &rest, label);
        let next = preference_order(&v1, &rest)[0];
        let last = all.iter().copied().find(|&k| k != first && k != next).unwrap();
        gains.push((receiver, parts[first].clone()));
        gains.push((p1, parts[next].clone()));
        gains.push((splitter, parts[last].clone()));
    }
    finish(
        state,
        oracle,
        label,
        StepKind::SelfridgeConway { agents, trimmed: true },
        gains,
        start,
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;
    use crate::valuation::{Instance, Valuation};

    fn half_density(left: i64, right: i64) -> Valuation {
        Valuation::new(vec![int(0), ratio(1, 2), int(1)], vec![int(left), int(right)]).unwrap()
    }

    #[test]
    fn cut_and_choose_uniform() {
        let inst = Instance::new(std::array::from_fn(|_| Valuation::uniform()));
        let mut oracle = Oracle::new(&inst);
        let mut state = ProtocolState::new();
        cut_and_choose(&mut state, &mut oracle, 1, 2, "cc").unwrap();
        assert_eq!(oracle.snapshot(), (1, 1));
        assert_eq!(state.allocation[2], Piece::interval(int(0), ratio(1, 2)).unwrap());
        assert_eq!(state.allocation[1], Piece::interval(ratio(1, 2), int(1)).unwrap());
        assert!(state.is_complete());
    }

    #[test]
    fn cut_and_choose_forced_choice() {
        let inst = Instance::new([
            Valuation::uniform(),
            Valuation::uniform(),
            half_density(0, 2),
            Valuation::uniform(),
        ]);
        let mut oracle = Oracle::new(&inst);
        let mut state = ProtocolState::new();
        cut_and_choose(&mut state, &mut oracle, 1, 2, "cc").unwrap();
        assert_eq!(state.allocation[2], Piece::interval(ratio(1, 2), int(1)).unwrap());
        assert_eq!(oracle.snapshot(), (1, 1));
    }

    #[test]
    fn cut_and_choose_split_residue() {
        let inst = Instance::new(std::array::from_fn(|_| Valuation::uniform()));
        let mut oracle = Oracle::new(&inst);
        let mut state = ProtocolState::new();
        state.residue = Piece::from_pairs([(int(0), ratio(1, 4)), (ratio(3, 4), int(1))]).unwrap();
        state.allocation[0] = Piece::interval(ratio(1, 4), ratio(3, 4)).unwrap();
        cut_and_choose(&mut state, &mut oracle, 1, 2, "cc").unwrap();
        assert_eq!(state.allocation[2], Piece::interval(int(0), ratio(1, 4)).unwrap());
        assert_eq!(state.allocation[1], Piece::interval(ratio(3, 4), int(1)).unwrap());
    }

    #[test]
    fn selfridge_conway_uniform_is_equal_thirds() {
        let inst = Instance::new(std::array::from_fn(|_| Valuation::uniform()));
        let mut oracle = Oracle::new(&inst);
        let mut state = ProtocolState::new();
        selfridge_conway(&mut state, &mut oracle, [1, 2, 3], "sc").unwrap();
        let (c, e) = oracle.snapshot();
        assert!(c + e <= 14);
        for a in 1..4 {
            assert_eq!(state.allocation[a].length(), ratio(1, 3));
        }
        assert!(state.is_complete());
    }

    #[test]
    fn selfridge_conway_trim_branch() {
        let inst = Instance::new([
            Valuation::uniform(),
            Valuation::uniform(),
            half_density(2, 0),
            half_density(2, 0),
        ]);
        let mut oracle = Oracle::new(&inst);
        let mut state = ProtocolState::new();
        selfridge_conway(&mut state, &mut oracle, [1, 2, 3], "sc").unwrap();
        assert!(matches!(
            state.steps[0].kind,
            StepKind::SelfridgeConway { trimmed: true, .. }
        ));
        let (c, e) = oracle.snapshot();
        assert!(c + e <= 14, "{c} cuts + {e} evals");
        for i in 1..4 {
            let own = inst.valuations[i].eval_piece(&state.allocation[i]);
            for j in 1..4 {
                assert!(own >= inst.valuations[i].eval_piece(&state.allocation[j]));
            }
        }
    }
}
