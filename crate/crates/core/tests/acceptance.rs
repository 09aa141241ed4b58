//! One line per acceptance criterion; exits nonzero if any fails.

mod common;

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{
    envy_free_among, fixtures, role_orders, run_all, seeded, standalone_cut_and_choose,
    standalone_selfridge_conway, Run,
};
use envyfree4::analysis::{brute_insignificant, domination_graph, effective_gain, envy_matrix, gain, suballocation};
use envyfree4::protocols::{Branch, StepKind};
use envyfree4::Piece;

const SEEDS: u64 = 1000;
const MAX_CUTS: u32 = 61;
const MAX_EVALS: u32 = 110;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn first_failure(runs: &[Run], bad: impl Fn(&Run) -> Option<String>) -> Option<(&str, String)> {
    runs.iter().find_map(|r| bad(r).map(|why| (r.name.as_str(), why)))
}

fn query_bound(runs: &[Run], elapsed: Duration) -> Verdict {
    let max_cuts = runs.iter().map(|r| r.outcome.ledger.cuts).max().unwrap_or(0);
    let max_evals = runs.iter().map(|r| r.outcome.ledger.evals).max().unwrap_or(0);
    let fast = elapsed < Duration::from_secs(60);
    verdict(
        max_cuts <= MAX_CUTS && max_evals <= MAX_EVALS && fast,
        format!(
            "{} runs, max {max_cuts} cuts / {max_evals} evals (bound {MAX_CUTS} / {MAX_EVALS}), {:.1}s",
            runs.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn core_bounds(runs: &[Run]) -> Verdict {
    let mut calls = 0;
    let bad = first_failure(runs, |r| {
        r.outcome.state.core_history.iter().find_map(|c| {
            let reduced = c.label == "phase1.core.6" || c.label.starts_with("phase2.core.");
            let (max_c, max_e) = if reduced { (5, 12) } else { (9, 15) };
            let (cuts, evals) = r.outcome.ledger.billed_under(&c.label);
            (cuts > max_c || evals > max_e).then(|| format!("{} billed {cuts}/{evals}", c.label))
        })
    });
    for r in runs {
        calls += r.outcome.state.core_history.len();
    }
    match bad {
        None => verdict(true, format!("{calls} Core calls within 9/15, lines 9 and 14 within 5/12")),
        Some((name, why)) => verdict(false, format!("{name}: {why}")),
    }
}

fn correction_free(runs: &[Run]) -> Verdict {
    let mut count = 0;
    let bad = first_failure(runs, |r| {
        r.outcome.state.steps.iter().find_map(|s| {
            if !matches!(s.kind, StepKind::Correction { .. }) {
                return None;
            }
            let billed = r.outcome.ledger.billed_under(&s.label);
            (billed != (0, 0) || (s.cuts, s.evals) != (0, 0)).then(|| format!("{} billed {billed:?}", s.label))
        })
    });
    for r in runs {
        count += r.outcome.state.steps.iter().filter(|s| matches!(s.kind, StepKind::Correction { .. })).count();
    }
    match bad {
        None => verdict(count > 0, format!("{count} corrections, all billed (0, 0)")),
        Some((name, why)) => verdict(false, format!("{name}: {why}")),
    }
}

fn complete_and_envy_free(runs: &[Run]) -> Verdict {
    let bad = first_failure(runs, |r| {
        let alloc = &r.outcome.allocation;
        let covered = alloc.iter().fold(Piece::empty(), |acc, p| acc.union(p));
        if !r.outcome.state.residue.is_empty() || covered != Piece::full() {
            return Some("cake not fully allocated".into());
        }
        match envy_matrix(alloc, &r.instance) {
            Ok(m) if m.is_envy_free() => None,
            Ok(m) => Some(format!("envious pairs {:?}", m.envious_pairs())),
            Err(e) => Some(e.to_string()),
        }
    });
    match bad {
        None => verdict(true, format!("{} of {} complete and envy-free", runs.len(), runs.len())),
        Some((name, why)) => verdict(false, format!("{name}: {why}")),
    }
}

const INVARIANTS: [&str; 14] = [
    "core_property_1",
    "core_property_2",
    "core_property_4",
    "correction_property_1",
    "correction_property_2",
    "correction_property_3",
    "marked",
    "x_unmarked",
    "i_get_what_i_mark",
    "no_one_takes_my_shit_pt2",
    "core_domination",
    "pigeon",
    "dom_by_D",
    "secondfav",
];

fn invariants(runs: &[Run]) -> Verdict {
    let mut tally: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for r in runs {
        for (name, (n, f)) in r.audit.tally() {
            let e = tally.entry(name.to_string()).or_default();
            e.0 += n;
            e.1 += f;
        }
    }
    let failing: Vec<String> = tally
        .iter()
        .filter(|(_, (_, f))| *f > 0)
        .map(|(name, (n, f))| format!("{name} {f}/{n}"))
        .collect();
    let unexercised: Vec<&str> = INVARIANTS
        .iter()
        .copied()
        .filter(|name| tally.get(*name).is_none_or(|(n, _)| *n == 0))
        .collect();
    let applications: usize = INVARIANTS.iter().filter_map(|n| tally.get(*n)).map(|(n, _)| n).sum();
    let pass = failing.is_empty() && unexercised.is_empty();
    let detail = if pass {
        format!("{} invariants, {applications} applications, 0 failures", INVARIANTS.len())
    } else {
        format!("failing {failing:?}, never applied {unexercised:?}")
    };
    verdict(pass, detail)
}

fn branch_coverage(fixture_runs: &[Run]) -> Verdict {
    let missing: Vec<&str> = Branch::ALL
        .iter()
        .filter(|b| !fixture_runs.iter().any(|r| r.outcome.fired(**b)))
        .map(|b| b.name())
        .collect();
    let unstable: Vec<&str> = fixture_runs
        .iter()
        .filter(|r| r.name.parse::<Branch>().is_ok_and(|b| !r.outcome.fired(b)))
        .map(|r| r.name.as_str())
        .collect();
    verdict(
        missing.is_empty() && unstable.is_empty(),
        format!(
            "{} fixtures; branches without a fixture {missing:?}; fixtures missing their branch {unstable:?}",
            fixture_runs.len()
        ),
    )
}

fn subroutines(corpus: &[(String, envyfree4::Instance)]) -> Verdict {
    let mut worst = 0;
    for (name, inst) in corpus {
        for roles in role_orders([1, 2, 3]) {
            let sc = standalone_selfridge_conway(inst, roles);
            let total = sc.queries.0 + sc.queries.1;
            worst = worst.max(total);
            if total > 14 || !sc.residue_empty || !envy_free_among(&sc.allocation, inst, &roles) {
                return verdict(false, format!("{name}: Selfridge-Conway {roles:?} billed {:?}", sc.queries));
            }
        }
        for (cutter, chooser) in [(0, 1), (1, 0), (2, 3)] {
            let cc = standalone_cut_and_choose(inst, cutter, chooser);
            if cc.queries != (1, 1) || !cc.residue_empty || !envy_free_among(&cc.allocation, inst, &[cutter, chooser]) {
                return verdict(false, format!("{name}: cut-and-choose billed {:?}", cc.queries));
            }
        }
    }
    verdict(
        true,
        format!("{} instances: Selfridge-Conway at most {worst} queries and envy-free, cut-and-choose exactly (1, 1)", corpus.len()),
    )
}

fn oracle_equivalence(runs: &[Run]) -> Verdict {
    let (mut insignificant, mut gains) = (0, 0);
    for r in runs {
        let state = &r.outcome.state;
        for c in &state.core_history {
            insignificant += 1;
            if brute_insignificant(c, &r.instance) != c.insignificant {
                return verdict(false, format!("{}: insignificant piece of {}", r.name, c.label));
            }
        }
        for g in &state.gains {
            gains += 1;
            let call = &state.core_history[g.core_index];
            let sub = suballocation(call, &g.holders);
            let reference = &g.reference;
            let graph = domination_graph(&reference.allocation, &reference.residue, &r.instance).expect("disjoint");
            let row = graph.edges[g.agent];
            let brute = effective_gain(&sub, &row, g.agent, &r.instance);
            let strict = gain(&sub, &reference.allocation, &reference.residue, g.agent, &r.instance).expect("suballocation");
            let consistent = match strict {
                Some(v) => !g.dominates_all && v == g.value,
                None => g.dominates_all,
            };
            if brute != g.value || !consistent {
                return verdict(false, format!("{}: gain of agent {} in {}", r.name, g.agent, call.label));
            }
        }
    }
    verdict(true, format!("{insignificant} insignificant pieces and {gains} gains match"))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let seeded_corpus = seeded(SEEDS);
    let fixture_corpus = fixtures();
    let mut runs = run_all(seeded_corpus.clone());
    let fixture_runs = run_all(fixture_corpus);
    let elapsed = start.elapsed();
    runs.extend(fixture_runs.iter().map(|r| Run {
        name: format!("fixture {}", r.name),
        instance: r.instance.clone(),
        outcome: r.outcome.clone(),
        audit: r.audit.clone(),
    }));

    let criteria = [
        ("query bound", query_bound(&runs, elapsed)),
        ("per-call Core bounds", core_bounds(&runs)),
        ("correction makes no queries", correction_free(&runs)),
        ("complete and envy-free", complete_and_envy_free(&runs)),
        ("invariant audits", invariants(&runs)),
        ("branch coverage", branch_coverage(&fixture_runs)),
        ("subroutine bounds", subroutines(&seeded_corpus)),
        ("oracle equivalence", oracle_equivalence(&runs)),
    ];
    let mut ok = true;
    for (k, (title, v)) in criteria.iter().enumerate() {
        println!("criterion {} {} {title}: {}", k + 1, if v.pass { "PASS" } else { "FAIL" }, v.detail);
        ok &= v.pass;
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
