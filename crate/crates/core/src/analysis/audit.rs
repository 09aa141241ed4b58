use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::{json, Value};

use crate::geometry::Piece;
use crate::oracle::Agent;
use crate::protocols::{
    choose_correction_target, preference_order, CoreResult, RunOutcome, Snapshot, StepKind,
};
use crate::rational::{int, to_compact_string as fmt, Rational};
use crate::valuation::{Instance, AGENTS};

use super::{brute_insignificant, domination_graph, effective_gain, envy_matrix, gain_with, suballocation, DominationGraph};

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub step: String,
    pub pass: bool,
    #[serde(skip_serializing_if = "Value::is_null")]
    pub witness: Value,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct AuditReport {
    pub checks: Vec<Check>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }

    /// `(applications, failures)` per check name.
    pub fn tally(&self) -> BTreeMap<String, (usize, usize)> {
        let mut out: BTreeMap<String, (usize, usize)> = BTreeMap::new();
        for c in &self.checks {
            let e = out.entry(c.name.clone()).or_default();
            e.0 += 1;
            if !c.pass {
                e.1 += 1;
            }
        }
        out
    }

    fn push(&mut self, name: &str, step: &str, pass: bool, witness: impl FnOnce() -> Value) {
        self.checks.push(Check {
            name: name.to_string(),
            step: step.to_string(),
            pass,
            witness: if pass { Value::Null } else { witness() },
        });
    }

    fn extend(&mut self, other: AuditReport) {
        self.checks.extend(other.checks);
    }
}

fn value(instance: &Instance, agent: Agent, piece: &Piece) -> Rational {
    instance.valuations[agent].eval_piece(piece)
}

fn graph(snapshot: &Snapshot, instance: &Instance) -> Option<DominationGraph> {
    domination_graph(&snapshot.allocation, &snapshot.residue, instance).ok()
}

fn pieces_json(pieces: &[Piece]) -> Value {
    json!(pieces.iter().map(|p| p.to_string()).collect::<Vec<_>>())
}

/// Disjoint pieces whose union with the residue is the cake.
fn partition_ok(s: &Snapshot) -> bool {
    let mut covered = s.residue.clone();
    for (i, p) in s.allocation.iter().enumerate() {
        if p.overlaps(&s.residue) || s.allocation[i + 1..].iter().any(|q| q.overlaps(p)) {
            return false;
        }
        covered = covered.union(p);
    }
    covered == Piece::full()
}

/// All checks that apply to one Core call.
///
/// `before` and `after` bracket the call.
pub fn audit_core(result: &CoreResult, before: &Snapshot, after: &Snapshot, instance: &Instance) -> AuditReport {
    let mut report = AuditReport::default();
    let step = result.label.as_str();
    let c = result.cutter;
    let vc = &instance.valuations[c];
    let total = vc.eval_piece(&before.residue);
    let quarter = &total / int(4);
    let non_cutters = result.non_cutters();
    let sub = suballocation(result, &result.holders);

    // equal cut, cutter and one more agent on complete quarters
    let equal = result.pieces.iter().all(|p| vc.eval_piece(p) == quarter);
    let complete_others = non_cutters
        .iter()
        .filter(|&&a| !result.partial[result.piece_of(a)])
        .count();
    let cutter_whole = !result.partial[result.piece_of(c)];
    report.push("core_property_1", step, equal && cutter_whole && complete_others >= 1, || {
        json!({
            "quarter": fmt(&quarter),
            "cutter_values": result.pieces.iter().map(|p| fmt(&vc.eval_piece(p))).collect::<Vec<_>>(),
            "partial": result.partial,
            "holders": result.holders,
        })
    });

    if result.excluded.is_empty() {
        // envy inside the call only counts against agents not already dominated
        let prior = domination_graph(&before.allocation, &before.residue, instance).ok();
        let local_envy: Option<Vec<(Agent, Agent)>> = envy_matrix(&sub, instance).ok().map(|m| {
            m.envious_pairs()
                .into_iter()
                .filter(|&(i, j)| !prior.is_some_and(|g| g.dominates(i, j)))
                .collect()
        });
        let local = local_envy.as_ref().is_some_and(Vec::is_empty);
        let global = envy_matrix(&after.allocation, instance).map(|m| m.is_envy_free()).unwrap_or(false);
        report.push("core_property_2", step, local && global, || {
            json!({ "local_envy": local_envy, "global_ok": global })
        });
    }

    // marks: bounds, exact values, and what markers end up with
    let marked = result.marked_pieces();
    let counts: Vec<usize> = marked.iter().map(|&p| result.marks_on(p).len()).collect();
    report.push("marked", step, marked.len() <= 2 && counts.iter().all(|&n| n >= 2), || {
        json!({ "marked": marked, "counts": counts })
    });

    let pool = &result.marking_pool;
    let true_values: [[Rational; 4]; AGENTS] =
        std::array::from_fn(|a| std::array::from_fn(|k| value(instance, a, &result.pieces[k])));
    for &(i, kind) in &result.mark_kinds {
        let x = kind.rank();
        let order = preference_order(&true_values[i], pool);
        let target_piece = order[x - 1];
        let target = &true_values[i][target_piece];
        let own_marks: Vec<_> = result.marks.iter().filter(|m| m.agent == i).collect();
        let exact = own_marks.len() == x - 1
            && own_marks.iter().all(|m| {
                let (lo, hi) = &result.spans[m.piece_index];
                let in_span = *lo <= m.position && m.position <= *hi;
                let part = result.frame.slice(&m.position, hi);
                in_span && part.map(|p| value(instance, i, &p) == *target).unwrap_or(false)
            });
        report.push("mark_values", step, exact, || {
            json!({ "agent": i, "kind": kind.rank(), "target": fmt(target) })
        });
        let unmarked = !marked.contains(&target_piece);
        report.push("x_unmarked", step, unmarked, || {
            json!({ "agent": i, "x_th_favorite": target_piece, "marked": marked })
        });
        let got = value(instance, i, &sub[i]);
        report.push("i_get_what_i_mark", step, got >= *target, || {
            json!({ "agent": i, "received": fmt(&got), "x_th_value": fmt(target) })
        });
    }

    // nobody takes a marked piece strictly beyond a mark of someone who is
    // not rightmost on two pieces
    let rightmost_twice: Vec<Agent> = (0..AGENTS)
        .filter(|&a| marked.iter().filter(|&&p| result.marks_on(p)[0].agent == a).count() == 2)
        .collect();
    for m in &result.marks {
        if rightmost_twice.contains(&m.agent) {
            continue;
        }
        let p = m.piece_index;
        let holder = result.holders[p];
        let ok = holder == m.agent || result.starts[p] >= m.position;
        report.push("no_one_takes_my_shit_pt2", step, ok, || {
            json!({ "agent": m.agent, "piece": p, "mark": fmt(&m.position), "allocated_from": fmt(&result.starts[p]), "holder": holder })
        });
    }

    // Core property 4 under its preconditions
    if result.excluded.is_empty() {
        if let Some(g) = graph(before, instance) {
            for &a in &non_cutters {
                let others: Vec<Agent> = non_cutters.iter().copied().filter(|&x| x != a).collect();
                let (b, cc) = (others[0], others[1]);
                let holds = g.dominates(b, a) && g.dominates(cc, a) && !g.dominates(b, cc) && !g.dominates(cc, b);
                if !holds {
                    continue;
                }
                let pa = result.piece_of(a);
                let best = true_values[a].iter().max().expect("four pieces").clone();
                let clause1 = result.mark_kind_of(a).is_none()
                    && !result.partial[pa]
                    && true_values[a][pa] == best;
                let complete = result.partial.iter().filter(|p| !**p).count();
                let clause2 = complete >= 3;
                let clause3 = [(b, cc), (cc, b)].iter().all(|&(x, y)| {
                    let px = result.piece_of(x);
                    !result.partial[px] || value(instance, y, &sub[y]) == value(instance, y, &sub[x])
                });
                report.push("core_property_4", step, clause1 && clause2 && clause3, || {
                    json!({ "a": a, "clause1": clause1, "complete_pieces": complete, "clause3": clause3 })
                });
            }
        }
    }

    let ins = brute_insignificant(result, instance);
    report.push("insignificant_equivalence", step, ins == result.insignificant, || {
        json!({ "protocol": result.insignificant, "recomputed": ins })
    });

    let (cap_cuts, cap_evals) = result.context.query_budget();
    report.push("core_query_budget", step, result.cuts <= cap_cuts && result.evals <= cap_evals, || {
        json!({ "cuts": result.cuts, "evals": result.evals, "budget": [cap_cuts, cap_evals] })
    });

    let left = vc.eval_piece(&after.residue);
    report.push("residue_halving", step, left.clone() * int(2) <= total, || {
        json!({ "before": fmt(&total), "after": fmt(&left) })
    });

    if result.partial.iter().filter(|p| **p).count() == 1 {
        if let (Some(p), Some(g)) = (result.insignificant, graph(after, instance)) {
            let h = result.holders[p];
            report.push("core_domination", step, g.dominates(c, h), || {
                json!({ "cutter": c, "holder": h, "call": step, "single_partial": true })
            });
        }
    }
    report
}

/// Audits a whole run: every step, the final allocation and all ledger bounds.
pub fn audit_run(outcome: &RunOutcome, instance: &Instance) -> AuditReport {
    let mut report = AuditReport::default();
    let state = &outcome.state;
    let mut holders: Vec<[Agent; 4]> = Vec::new();

    for record in &state.steps {
        let step = record.label.as_str();
        let after = &record.after;
        report.push("partition", step, partition_ok(after), || {
            json!({ "allocation": pieces_json(&after.allocation), "residue": after.residue.to_string() })
        });
        let envy = envy_matrix(&after.allocation, instance);
        let ef = envy.as_ref().map(|m| m.is_envy_free()).unwrap_or(false);
        report.push("envy_free", step, ef, || json!({ "envy": envy.map(|m| m.envious_pairs()).ok() }));

        match &record.kind {
            StepKind::Core { core_index } => {
                let result = &state.core_history[*core_index];
                report.extend(audit_core(result, &record.before, after, instance));
                holders.push(result.holders);
                match step {
                    "phase1.core.5" => {
                        if let Some(g) = graph(after, instance) {
                            report.push("phase_one_out_degree", step, g.out_degree(0) >= 2, || {
                                json!({ "dominated_by_0": g.dominated_by(0) })
                            });
                        }
                    }
                    "phase1.core.6" => {
                        if let Some(g) = graph(after, instance) {
                            let e = result.cutter;
                            let ok = (1..AGENTS).any(|j| j != e && g.dominates(0, j) && g.dominates(e, j));
                            report.push("dom_by_D", step, ok, || json!({ "cutter": e, "edges": g.edges }));
                        }
                    }
                    _ => {}
                }
            }
            StepKind::Correction { core_index, before, after: after_holders } => {
                holders[*core_index] = *after_holders;
                let result = &state.core_history[*core_index];
                report.extend(audit_correction(result, before, after_holders, &record.before, instance, step));
                report.push("correction_zero_queries", step, record.cuts == 0 && record.evals == 0, || {
                    json!({ "cuts": record.cuts, "evals": record.evals })
                });
                if step == "phase1.correction" {
                    report.extend(audit_pigeon(state, *core_index, &record.before, instance, step));
                }
            }
            StepKind::SelfridgeConway { .. } => {
                report.push("selfridge_conway_queries", step, record.cuts + record.evals <= 14, || {
                    json!({ "cuts": record.cuts, "evals": record.evals })
                });
            }
            StepKind::CutAndChoose { .. } => {
                report.push("cut_and_choose_queries", step, record.cuts == 1 && record.evals <= 1, || {
                    json!({ "cuts": record.cuts, "evals": record.evals })
                });
            }
        }

        // the cutter of two calls dominates whoever now holds the first
        // call's insignificant piece
        if let Some(g) = graph(after, instance) {
            for k2 in 0..holders.len() {
                for k1 in 0..k2 {
                    let (r1, r2) = (&state.core_history[k1], &state.core_history[k2]);
                    let Some(p) = r1.insignificant else { continue };
                    if r1.cutter != r2.cutter {
                        continue;
                    }
                    let h = holders[k1][p];
                    report.push("core_domination", step, g.dominates(r1.cutter, h), || {
                        json!({ "cutter": r1.cutter, "holder": h, "first": r1.label, "second": r2.label })
                    });
                }
            }
        }
    }

    if let Some(roles) = outcome.roles {
        let find = |label: &str| state.steps.iter().find(|s| s.label == label);
        if let Some(g) = find("phase2.core.1").and_then(|s| graph(&s.before, instance)) {
            let ok = g.dominates(roles.b, roles.a) && g.dominates(roles.c, roles.a);
            report.push("phase_one_structure", "phase2.core.1", ok, || {
                json!({ "roles": roles, "edges": g.edges })
            });
        }
        if let Some(g) = find("phase3.cut_and_choose").and_then(|s| graph(&s.before, instance)) {
            let ok = [roles.a, roles.d]
                .iter()
                .all(|&x| g.dominates(x, roles.b) && g.dominates(x, roles.c));
            report.push("phase_two_structure", "phase3.cut_and_choose", ok, || {
                json!({ "roles": roles, "edges": g.edges })
            });
        }
    }

    for record in &state.gains {
        let result = &state.core_history[record.core_index];
        let sub = suballocation(result, &record.holders);
        let reference = graph(&record.reference, instance);
        let brute = reference.map(|g| {
            let row = g.edges[record.agent];
            let all = (0..AGENTS).all(|j| j == record.agent || row[j]);
            (effective_gain(&sub, &row, record.agent, instance), all)
        });
        let ok = brute.as_ref() == Some(&(record.value.clone(), record.dominates_all));
        report.push("gain_equivalence", &record.label, ok, || {
            json!({
                "agent": record.agent,
                "call": result.label,
                "protocol": fmt(&record.value),
                "recomputed": brute.as_ref().map(|(g, _)| fmt(g)),
                "dominates_all": [Some(record.dominates_all), brute.as_ref().map(|(_, a)| *a)],
            })
        });
    }

    let final_step = outcome.finished_at.as_str();
    report.push("complete", final_step, state.residue.is_empty(), || {
        json!({ "residue": state.residue.to_string() })
    });
    let envy = envy_matrix(&outcome.allocation, instance);
    let ef = envy.as_ref().map(|m| m.is_envy_free()).unwrap_or(false);
    report.push("final_envy_free", final_step, ef, || json!({ "matrix": envy.ok() }));
    let (cuts, evals) = outcome.ledger.totals();
    report.push("query_bound", final_step, cuts <= 61 && evals <= 110, || {
        json!({ "cuts": cuts, "evals": evals })
    });
    report
}

fn audit_correction(
    result: &CoreResult,
    before: &[Agent; 4],
    after: &[Agent; 4],
    x: &Snapshot,
    instance: &Instance,
    step: &str,
) -> AuditReport {
    let mut report = AuditReport::default();
    let Some(ins) = result.insignificant else {
        report.push("correction_property_1", step, false, || json!({ "reason": "no insignificant piece" }));
        return report;
    };
    let new_holder = after[ins];
    let marked_it = result.marks_on(ins).iter().any(|m| m.agent == new_holder);
    report.push("correction_property_1", step, new_holder != before[ins] && marked_it, || {
        json!({ "piece": ins, "from": before[ins], "to": new_holder })
    });

    let old = suballocation(result, before);
    let new = suballocation(result, after);
    let marked = result.marked_pieces();
    let unmarked: Vec<usize> = (0..4).filter(|p| !marked.contains(p)).collect();

    for i in result.non_cutters() {
        let p = result.piece_of(i);
        let vals: Vec<Rational> = (0..4).map(|k| value(instance, i, &result.allocated[k])).collect();
        let best_unmarked = unmarked.iter().map(|&k| vals[k].clone()).max();
        let had_favorite_unmarked = result.mark_kind_of(i).is_none()
            && !result.partial[p]
            && Some(&vals[p]) == best_unmarked.as_ref();
        if had_favorite_unmarked {
            let now = value(instance, i, &new[i]);
            report.push("correction_property_2", step, now == vals[p], || {
                json!({ "agent": i, "before": fmt(&vals[p]), "after": fmt(&now) })
            });
        }
    }

    let Some(g) = graph(x, instance) else { return report };
    for i in 0..AGENTS {
        let dominated = g.edges[i];
        let (Some(g_old), Some(g_new)) = (
            gain_with(&old, &dominated, i, instance),
            gain_with(&new, &dominated, i, instance),
        ) else {
            continue;
        };
        report.push("correction_property_3", step, g_new >= -g_old.clone(), || {
            json!({ "agent": i, "gain_before": fmt(&g_old), "gain_after": fmt(&g_new) })
        });
    }

    // non-cutters without their favorite whole piece get at least their
    // favorite among pieces of agents they do not dominate; a marked piece
    // beats a complete piece of the same value
    for i in result.non_cutters() {
        let whole: Vec<Rational> = (0..4).map(|k| value(instance, i, &result.pieces[k])).collect();
        let p = result.piece_of(i);
        let favorite_whole = !result.partial[p]
            && (0..4).all(|k| {
                k == p || if marked.contains(&k) { whole[p] > whole[k] } else { whole[p] >= whole[k] }
            });
        if favorite_whole {
            continue;
        }
        let target = (0..AGENTS)
            .filter(|&j| j != i && !g.dominates(i, j))
            .map(|j| value(instance, i, &old[j]))
            .max();
        let Some(target) = target else { continue };
        let now = value(instance, i, &new[i]);
        report.push("secondfav", step, now >= target, || {
            json!({ "agent": i, "received": fmt(&now), "needed": fmt(&target) })
        });
    }
    report
}

/// The corrected call satisfies the gain inequality for every agent and is
/// the first call that does.
fn audit_pigeon(
    state: &crate::protocols::ProtocolState,
    chosen: usize,
    x: &Snapshot,
    instance: &Instance,
    step: &str,
) -> AuditReport {
    let mut report = AuditReport::default();
    let cutter = state.core_history[chosen].cutter;
    let Some(g) = graph(x, instance) else { return report };
    let mut table = Vec::new();
    for i in (0..AGENTS).filter(|&i| i != cutter) {
        let row: [Rational; 4] = std::array::from_fn(|k| {
            let r = &state.core_history[k];
            effective_gain(&suballocation(r, &r.holders), &g.edges[i], i, instance)
        });
        table.push(row);
    }
    let expected = choose_correction_target(&table);
    report.push("pigeon", step, expected == Some(chosen), || {
        json!({
            "chosen": chosen,
            "recomputed": expected,
            "gains": table
                .iter()
                .map(|row| row.iter().map(fmt).collect::<Vec<_>>())
                .collect::<Vec<_>>(),
        })
    });
    report
}
