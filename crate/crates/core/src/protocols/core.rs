use crate::geometry::{Piece, ResidueFrame};
use crate::oracle::{Agent, Oracle};
use crate::rational::{int, zero, Rational};
use crate::valuation::AGENTS;

use super::{
    invariant, CoreContext, CoreResult, LedgerDelta, Mark, MarkEvent, MarkKind, MovedPiece,
    ProtocolError, ProtocolState, StepKind, StepRecord, TraceEvent,
};

/// Pieces of `pool` ordered from most to least valuable, ties to the lower index.
pub fn preference_order(values: &[Rational; 4], pool: &[usize]) -> Vec<usize> {
    let mut order = pool.to_vec();
    order.sort_by(|&a, &b| values[b].cmp(&values[a]).then(a.cmp(&b)));
    order
}

/// Whether `i` has competition in `s` for piece `p` of `pool`, and who competes.
///
/// `dominates[j][i]` says whether `j` dominates `i`.
pub fn has_competition(
    i: Agent,
    p: usize,
    s: &[Agent],
    pool: &[usize],
    values: &[[Rational; 4]; AGENTS],
    dominates: &[[bool; AGENTS]; AGENTS],
) -> (bool, Vec<Agent>) {
    let dominated_by_all = s.iter().filter(|&&j| j != i).all(|&j| dominates[j][i]);
    if dominated_by_all {
        return (false, Vec::new());
    }
    let competitors: Vec<Agent> = s
        .iter()
        .copied()
        .filter(|&j| j != i)
        .filter(|&j| preference_order(&values[j], pool).iter().take(2).any(|&q| q == p))
        .collect();
    (!competitors.is_empty(), competitors)
}

fn favorite(values: &[Rational; 4], pool: &[usize]) -> usize {
    preference_order(values, pool)[0]
}

/// One execution of Core with `cutter` cutting the current residue.
pub fn core(
    state: &mut ProtocolState,
    oracle: &mut Oracle<'_>,
    cutter: Agent,
    excluded: &[Agent],
    context: CoreContext,
) -> Result<CoreResult, ProtocolError> {
    let label = context.label();
    let step = label.as_str();
    if state.residue.is_empty() {
        return Err(invariant(step, "Core called on an empty residue"));
    }
    if excluded.contains(&cutter) {
        return Err(invariant(step, "the cutter cannot be excluded"));
    }
    let before = state.snapshot();
    let (cuts0, evals0) = oracle.snapshot();
    let decide = format!("{label}.decide");
    let competing: Vec<Agent> = (0..AGENTS)
        .filter(|a| *a != cutter && !excluded.contains(a))
        .collect();
    let dominates = state.known_domination(oracle, &competing, &decide);

    // the cutter splits the residue into four pieces of equal value to her
    let frame = ResidueFrame::new(state.residue.clone());
    let total = oracle.eval(cutter, &state.residue, step);
    let quarter = &total / int(4);
    let mut bounds = vec![zero()];
    for _ in 0..3 {
        let from = bounds.last().unwrap().clone();
        bounds.push(oracle.cut(cutter, &frame, &from, &quarter, step)?);
    }
    bounds.push(frame.length().clone());
    let spans: [(Rational, Rational); 4] =
        std::array::from_fn(|k| (bounds[k].clone(), bounds[k + 1].clone()));
    let pieces: [Piece; 4] = std::array::from_fn(|k| {
        frame
            .slice(&spans[k].0, &spans[k].1)
            .expect("cut points lie in the frame")
    });

    let non_cutters: Vec<Agent> = (0..AGENTS).filter(|&a| a != cutter).collect();
    let mut values: [[Rational; 4]; AGENTS] = std::array::from_fn(|_| std::array::from_fn(|_| zero()));
    values[cutter] = std::array::from_fn(|_| quarter.clone());
    for &a in &non_cutters {
        for k in 0..4 {
            values[a][k] = oracle.eval(a, &pieces[k], step);
        }
    }

    let mut s: Vec<Agent> = non_cutters
        .iter()
        .copied()
        .filter(|a| !excluded.contains(a))
        .collect();
    let mut pool: Vec<usize> = (0..4).collect();
    let mut holder: [Option<Agent>; 4] = [None; 4];
    let mut early = Vec::new();

    // hand out uncontested favorites one at a time
    loop {
        let pick = s.iter().copied().find(|&j| {
            let fav = favorite(&values[j], &pool);
            !has_competition(j, fav, &s, &pool, &values, &dominates).0
        });
        let Some(j) = pick else { break };
        let fav = favorite(&values[j], &pool);
        holder[fav] = Some(j);
        early.push((j, fav));
        s.retain(|&a| a != j);
        pool.retain(|&p| p != fav);
    }

    let favorites: Vec<usize> = s.iter().map(|&i| favorite(&values[i], &pool)).collect();
    let mut distinct = favorites.clone();
    distinct.sort_unstable();
    distinct.dedup();
    let distinct_favorites = distinct.len() == favorites.len();

    let mut marks = Vec::new();
    let mut mark_kinds = Vec::new();
    let marking_pool = pool.clone();
    if distinct_favorites {
        for (&i, &fav) in s.iter().zip(&favorites) {
            holder[fav] = Some(i);
        }
        pool.retain(|p| holder[*p].is_none());
    } else {
        let orders: [Vec<usize>; AGENTS] =
            std::array::from_fn(|a| preference_order(&values[a], &pool));
        let competitors = |i: Agent, p: usize| has_competition(i, p, &s, &pool, &values, &dominates).1;
        for &i in &s {
            let second = orders[i][1];
            let rivals = competitors(i, second);
            let condition1 = rivals.is_empty();
            let condition2 = rivals.len() == 1 && {
                let j = rivals[0];
                orders[j][1] == second
                    && competitors(i, orders[i][0]).len() == 1
                    && competitors(j, orders[j][0]).len() == 1
            };
            let kind = if condition1 || condition2 {
                MarkKind::Two
            } else {
                MarkKind::Three
            };
            let x = kind.rank();
            if orders[i].len() < x {
                return Err(invariant(step, format!("agent {i} cannot make a {kind}")));
            }
            let r = values[i][orders[i][x - 1]].clone();
            for &p in &orders[i][..x - 1] {
                let (lo, hi) = &spans[p];
                let position = oracle.mark(i, &frame, (lo, hi), &r, step)?;
                marks.push(Mark {
                    agent: i,
                    piece_index: p,
                    position,
                    kind,
                });
            }
            mark_kinds.push((i, kind));
        }
    }

    let mut result = CoreResult {
        label: label.clone(),
        context,
        cutter,
        excluded: excluded.to_vec(),
        frame: frame.clone(),
        spans: spans.clone(),
        pieces: pieces.clone(),
        values,
        early,
        distinct_favorites,
        marking_pool,
        mark_kinds,
        marks,
        holders: [cutter; 4],
        allocated: pieces.clone(),
        starts: std::array::from_fn(|k| spans[k].0.clone()),
        partial: [false; 4],
        cutter_partial_values: std::array::from_fn(|_| None),
        insignificant: None,
        new_residue: Piece::empty(),
        cuts: 0,
        evals: 0,
    };

    let marked = result.marked_pieces();
    if marked.len() > 2 {
        return Err(invariant(step, format!("{} pieces carry marks", marked.len())));
    }
    for &p in &marked {
        let count = result.marks_on(p).len();
        if count < 2 {
            return Err(invariant(step, format!("piece {p} carries only {count} mark")));
        }
    }

    // everyone but the second rightmost marker learns each partial piece
    let mut partial_pieces = Vec::new();
    for &p in &marked {
        let ms = result.marks_on(p);
        let start = ms[1].position.clone();
        let second = ms[1].agent;
        let part = frame.slice(&start, &spans[p].1)?;
        for a in 0..AGENTS {
            if a != second && !oracle.is_exempt(step, a) {
                oracle.eval(a, &part, step);
            }
        }
        result.starts[p] = start;
        result.allocated[p] = part;
        result.partial[p] = true;
        partial_pieces.push(p);
    }

    // rightmost rule
    if marked.len() == 2 {
        let (p, q) = (marked[0], marked[1]);
        let (mp, mq) = (result.marks_on(p), result.marks_on(q));
        if mp[0].agent == mq[0].agent {
            let a = mp[0].agent;
            let vp = oracle.eval(a, &result.allocated[p], step);
            let vq = oracle.eval(a, &result.allocated[q], step);
            let (chosen, other) = if vp >= vq { (p, q) } else { (q, p) };
            let other_second = result.marks_on(other)[1].agent;
            holder[chosen] = Some(a);
            holder[other] = Some(other_second);
        } else {
            holder[p] = Some(mp[0].agent);
            holder[q] = Some(mq[0].agent);
        }
    } else if let Some(&p) = marked.first() {
        holder[p] = Some(result.marks_on(p)[0].agent);
    }

    // unserved non-cutters choose complete pieces, those still in S first
    let served = |holder: &[Option<Agent>; 4], a: Agent| holder.contains(&Some(a));
    let mut order: Vec<Agent> = s.clone();
    order.extend(non_cutters.iter().copied().filter(|a| !s.contains(a)));
    for a in order {
        if served(&holder, a) {
            continue;
        }
        let free: Vec<usize> = (0..4).filter(|&p| holder[p].is_none()).collect();
        if free.iter().any(|p| result.partial[*p]) {
            return Err(invariant(step, "a marked piece was left unallocated"));
        }
        let Some(&pick) = preference_order(&result.values[a], &free).first() else {
            return Err(invariant(step, format!("no piece left for agent {a}")));
        };
        holder[pick] = Some(a);
    }
    let free: Vec<usize> = (0..4).filter(|&p| holder[p].is_none()).collect();
    match free.first() {
        Some(&p) if !result.partial[p] => holder[p] = Some(cutter),
        _ => return Err(invariant(step, "no complete piece left for the cutter")),
    }
    for p in 0..4 {
        result.holders[p] = holder[p].expect("all four pieces handed out");
    }
    let mut seen = [false; AGENTS];
    for &h in &result.holders {
        if std::mem::replace(&mut seen[h], true) {
            return Err(invariant(step, format!("agent {h} received two pieces")));
        }
    }

    // insignificant piece
    for &p in &partial_pieces {
        if partial_pieces.len() > 1 || oracle.known(cutter, &result.allocated[p]).is_some() {
            result.cutter_partial_values[p] = Some(oracle.eval(cutter, &result.allocated[p], step));
        }
    }
    result.insignificant = insignificant_index(&partial_pieces, &result.cutter_partial_values);

    let mut trims = Vec::new();
    let mut residue = Piece::empty();
    for &p in &partial_pieces {
        let trim = frame.slice(&spans[p].0, &result.starts[p])?;
        residue = residue.union(&trim);
        trims.push(trim);
    }
    result.new_residue = residue.clone();

    let mut moved = Vec::new();
    for p in 0..4 {
        let a = result.holders[p];
        state.allocation[a] = state.allocation[a].union(&result.allocated[p]);
        moved.push(MovedPiece {
            agent: a,
            piece: result.allocated[p].clone(),
        });
    }
    state.residue = residue.clone();

    for a in 0..AGENTS {
        for trim in &trims {
            oracle.consolidate(a, trim);
        }
        for &p in &partial_pieces {
            oracle.consolidate(a, &result.allocated[p]);
        }
        oracle.consolidate(a, &residue);
        for bundle in &state.allocation {
            oracle.consolidate(a, bundle);
        }
    }

    let (cuts1, evals1) = oracle.snapshot();
    result.cuts = cuts1 - cuts0;
    result.evals = evals1 - evals0;

    let index = state.core_history.len();
    let after = state.snapshot();
    let event = TraceEvent {
        step: label.clone(),
        moved,
        marks: result
            .marks
            .iter()
            .map(|m| MarkEvent {
                agent: m.agent,
                piece_index: m.piece_index,
                position: m.position.clone(),
                kind: m.kind,
            })
            .collect(),
        ledger: LedgerDelta {
            cuts: result.cuts,
            evals: result.evals,
        },
        residue: residue.clone(),
        note: Some(format!("cutter {cutter}")),
    };
    state.record(
        StepRecord {
            label,
            kind: StepKind::Core { core_index: index },
            before,
            after,
            cuts: result.cuts,
            evals: result.evals,
        },
        event,
    );
    state.core_history.push(result.clone());
    state.holders.push(result.holders);
    Ok(result)
}

/// Lowest cutter value among the partial pieces, ties to the lower index.
pub(crate) fn insignificant_index(partial: &[usize], cutter_values: &[Option<Rational>; 4]) -> Option<usize> {
    match partial {
        [] => None,
        [only] => Some(*only),
        _ => partial
            .iter()
            .copied()
            .min_by(|&a, &b| {
                let va = cutter_values[a].as_ref().expect("cutter knows both partial pieces");
                let vb = cutter_values[b].as_ref().expect("cutter knows both partial pieces");
                va.cmp(vb).then(a.cmp(&b))
            }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};
    use crate::valuation::{Instance, Valuation};

    fn step(bps: &[(i64, i64)], dens: &[i64]) -> Valuation {
        Valuation::new(
            bps.iter().map(|&(n, d)| ratio(n, d)).collect(),
            dens.iter().map(|&d| int(d)).collect(),
        )
        .unwrap()
    }

    fn disjoint_supports() -> Instance {
        Instance::new([
            Valuation::uniform(),
            step(&[(0, 1), (1, 2), (1, 1)], &[2, 0]),
            step(&[(0, 1), (1, 2), (1, 1)], &[0, 2]),
            step(&[(0, 1), (1, 4), (1, 2), (1, 1)], &[0, 4, 0]),
        ])
    }

    fn no_dom() -> [[bool; AGENTS]; AGENTS] {
        [[false; AGENTS]; AGENTS]
    }

    fn values_with(rows: [[i64; 4]; 4]) -> [[Rational; 4]; AGENTS] {
        std::array::from_fn(|a| std::array::from_fn(|p| int(rows[a][p])))
    }

    #[test]
    fn preference_breaks_ties_by_index() {
        let v = [int(1), int(3), int(3), int(0)];
        assert_eq!(preference_order(&v, &[0, 1, 2, 3]), vec![1, 2, 0, 3]);
        assert_eq!(preference_order(&v, &[0, 2, 3]), vec![2, 0, 3]);
    }

    #[test]
    fn competition_needs_a_non_dominating_peer() {
        let values = values_with([[0; 4], [4, 3, 2, 1], [1, 4, 3, 2], [4, 1, 3, 2]]);
        let pool = [0, 1, 2, 3];
        let mut dom = no_dom();
        dom[2][1] = true;
        dom[3][1] = true;
        assert_eq!(has_competition(1, 0, &[1, 2, 3], &pool, &values, &dom), (false, vec![]));
        assert_eq!(
            has_competition(2, 1, &[1, 2, 3], &pool, &values, &no_dom()),
            (true, vec![1])
        );
        assert_eq!(has_competition(1, 3, &[1, 2, 3], &pool, &values, &no_dom()), (false, vec![]));
    }

    #[test]
    fn disjoint_supports_finish_in_one_call() {
        let inst = disjoint_supports();
        let mut oracle = Oracle::new(&inst);
        let mut state = ProtocolState::new();
        let r = core(&mut state, &mut oracle, 0, &[], CoreContext::Standalone).unwrap();
        assert_eq!(r.spans[1].0, ratio(1, 4));
        assert_eq!(r.spans[2].0, ratio(1, 2));
        assert_eq!(r.spans[3].0, ratio(3, 4));
        assert_eq!(r.early[0], (2, 2));
        assert_eq!(r.holders, [1, 3, 2, 0]);
        assert!(r.marks.is_empty());
        assert!(r.terminated_whole_cake());
        assert_eq!((r.cuts, r.evals), (3, 9));
        assert_eq!(r.insignificant, None);
    }

    #[test]
    fn uniform_agents_mark_left_endpoints() {
        let inst = Instance::new(std::array::from_fn(|_| Valuation::uniform()));
        let mut oracle = Oracle::new(&inst);
        let mut state = ProtocolState::new();
        let r = core(&mut state, &mut oracle, 0, &[], CoreContext::Standalone).unwrap();
        assert!(r.mark_kinds.iter().all(|(_, k)| *k == MarkKind::Three));
        assert_eq!(r.marks.len(), 6);
        for m in &r.marks {
            assert_eq!(m.position, r.spans[m.piece_index].0);
        }
        assert_eq!(r.holders, [1, 2, 3, 0]);
        assert!(r.terminated_whole_cake());
        assert_eq!((r.cuts, r.evals), (9, 9));
        assert_eq!(r.insignificant, Some(0));
    }

    #[test]
    fn shared_favorite_gets_trimmed() {
        // all three non-cutters love the first quarter, then disagree
        let inst = Instance::new([
            Valuation::uniform(),
            step(&[(0, 1), (1, 4), (1, 2), (3, 4), (1, 1)], &[2, 1, 1, 0]),
            step(&[(0, 1), (1, 4), (1, 2), (3, 4), (1, 1)], &[2, 0, 1, 1]),
            step(&[(0, 1), (1, 8), (1, 4), (1, 2), (3, 4), (1, 1)], &[4, 2, 1, 0, 0]),
        ]);
        let mut oracle = Oracle::new(&inst);
        let mut state = ProtocolState::new();
        let r = core(&mut state, &mut oracle, 0, &[], CoreContext::Standalone).unwrap();
        assert!(r.cuts <= 9 && r.evals <= 15);
        for &p in &r.marked_pieces() {
            assert!(r.marks_on(p).len() >= 2);
        }
        let covered = state
            .allocation
            .iter()
            .fold(state.residue.clone(), |acc, p| acc.union(p));
        assert_eq!(covered, Piece::full());
    }
}
