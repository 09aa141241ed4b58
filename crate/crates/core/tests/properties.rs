use envyfree4::harness::{gen_instance, RunConfig, Strategy as Shape};
use envyfree4::oracle::Knowledge;
use envyfree4::rational::{int, ratio, zero};
use envyfree4::{Instance, Oracle, Piece, Rational, ResidueFrame};
use num_traits::Zero;
use proptest::prelude::*;

const Q: i64 = 24;

fn point() -> impl Strategy<Value = Rational> {
    (0..=Q).prop_map(|k| ratio(k, Q))
}

fn piece() -> impl Strategy<Value = Piece> {
    prop::collection::vec((0..=Q, 0..=Q), 0..5).prop_map(|pairs| {
        Piece::from_pairs(pairs.into_iter().map(|(a, b)| (ratio(a.min(b), Q), ratio(a.max(b), Q)))).unwrap()
    })
}

fn nonempty_piece() -> impl Strategy<Value = Piece> {
    piece().prop_filter("nonempty", |p| !p.is_empty())
}

fn strategy() -> impl Strategy<Value = Shape> {
    prop::sample::select(Shape::ALL.to_vec())
}

fn instance() -> impl Strategy<Value = Instance> {
    (any::<u64>(), strategy(), prop::sample::select(vec![4u32, 6, 8, 12])).prop_map(|(seed, strategy, q)| {
        let config = RunConfig { strategy, denominator_bound: q, segments: (1, 6), ..RunConfig::default() };
        gen_instance(seed, &config).unwrap()
    })
}

/// A fraction of the interval `[0, 1]` with denominator `den`.
fn fraction(den: i64) -> impl Strategy<Value = Rational> {
    (0..=den).prop_map(move |k| ratio(k, den))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn union_and_intersection_lengths_add_up(a in piece(), b in piece()) {
        prop_assert_eq!(a.union(&b).length() + a.intersection(&b).length(), a.length() + b.length());
    }

    #[test]
    fn subtract_and_intersect_partition(a in piece(), b in piece()) {
        let outside = a.subtract(&b);
        let inside = a.intersection(&b);
        prop_assert!(!outside.overlaps(&b));
        prop_assert_eq!(outside.union(&inside), a.clone());
        prop_assert!(a.contains(&inside) && a.contains(&outside));
    }

    #[test]
    fn frame_round_trips(residue in nonempty_piece(), s in fraction(16)) {
        let frame = ResidueFrame::new(residue.clone());
        let t = s * frame.length();
        let x = frame.to_cake(&t).unwrap();
        prop_assert_eq!(frame.to_frame(&x).unwrap(), t.clone());
        let len = frame.length().clone();
        prop_assert_eq!(frame.slice(&zero(), &len).unwrap(), residue);
        let left = frame.slice(&zero(), &t).unwrap();
        let right = frame.slice(&t, &len).unwrap();
        prop_assert_eq!(left.length(), t);
        prop_assert!(!left.overlaps(&right));
    }

    #[test]
    fn cuts_are_exact_and_monotone(inst in instance(), agent in 0usize..4, x in point(), s in fraction(12), t in fraction(12)) {
        let v = &inst.valuations[agent];
        let avail = v.eval_interval(&x, &int(1));
        let (lo, hi) = if s <= t { (s, t) } else { (t, s) };
        let y_lo = v.cut_query(&x, &(&lo * &avail)).unwrap();
        let y_hi = v.cut_query(&x, &(&hi * &avail)).unwrap();
        prop_assert_eq!(v.eval_interval(&x, &y_hi), &hi * &avail);
        prop_assert!(x <= y_lo && y_lo <= y_hi);
        if y_lo > x {
            let inside = (&x + &y_lo) / int(2);
            prop_assert!(v.eval_interval(&x, &inside) < &lo * &avail);
        }
    }

    #[test]
    fn right_cut_is_exact_and_rightmost(inst in instance(), agent in 0usize..4, residue in nonempty_piece(), s in fraction(8)) {
        let v = &inst.valuations[agent];
        let frame = ResidueFrame::new(residue.clone());
        let len = frame.length().clone();
        let r = s * v.eval_piece(&residue);
        let m = v.right_cut(&frame, (&zero(), &len), &r).unwrap();
        prop_assert_eq!(v.eval_piece(&frame.slice(&m, &len).unwrap()), r.clone());
        if m < len && !r.is_zero() {
            let further = (&m + &len) / int(2);
            prop_assert!(v.eval_piece(&frame.slice(&further, &len).unwrap()) < r);
        }
    }

    #[test]
    fn generated_instances_are_valid(seed in any::<u64>(), strategy in strategy(), q in 2u32..=12, hi in 1usize..8) {
        let config = RunConfig { strategy, denominator_bound: q, segments: (1, hi), ..RunConfig::default() };
        let inst = gen_instance(seed, &config).unwrap();
        prop_assert_eq!(&gen_instance(seed, &config).unwrap(), &inst);
        for v in &inst.valuations {
            prop_assert_eq!(v.eval_interval(&zero(), &int(1)), int(1));
            prop_assert!(v.densities().iter().all(|d| *d >= zero()));
            for x in v.breakpoints().iter().chain(v.densities()) {
                prop_assert!(u32::try_from(x.denom()).unwrap() <= q, "{} off the 1/{} grid", x, q);
            }
        }
    }

    #[test]
    fn derived_values_are_true(inst in instance(), agent in 0usize..4, learned in prop::collection::vec(piece(), 0..6), targets in prop::collection::vec(piece(), 1..6)) {
        let v = &inst.valuations[agent];
        let mut k = Knowledge::default();
        for p in &learned {
            k.learn(p.clone(), v.eval_piece(p));
        }
        for p in &learned {
            prop_assert_eq!(k.derive(p), Some(v.eval_piece(p)));
        }
        for t in &targets {
            if let Some(x) = k.derive(t) {
                prop_assert_eq!(x, v.eval_piece(t));
            }
        }
    }

    #[test]
    fn evals_bill_at_most_once(inst in instance(), agent in 0usize..4, pieces in prop::collection::vec(piece(), 1..6)) {
        let mut oracle = Oracle::new(&inst);
        prop_assert_eq!(oracle.known(agent, &Piece::full()), Some(int(1)));
        for p in &pieces {
            let before = oracle.ledger().totals().1;
            prop_assert_eq!(oracle.eval(agent, p, "e"), inst.valuations[agent].eval_piece(p));
            prop_assert!(oracle.ledger().totals().1 <= before + 1);
            let again = oracle.ledger().totals().1;
            oracle.eval(agent, p, "e");
            prop_assert_eq!(oracle.ledger().totals().1, again);
        }
    }
}
