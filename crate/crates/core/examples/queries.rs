//! Robertson-Webb queries through the billing oracle. Evaluations an agent
//! can infer from earlier answers are free.

use envyfree4::rational::ratio;
use envyfree4::{Instance, Oracle, Piece, Valuation};

fn main() {
    let skewed = Valuation::new(vec![ratio(0, 1), ratio(1, 2), ratio(1, 1)], vec![ratio(3, 2), ratio(1, 2)]).unwrap();
    let instance = Instance::new([skewed, Valuation::uniform(), Valuation::uniform(), Valuation::uniform()]);
    let mut oracle = Oracle::new(&instance);

    let third = oracle.cut_cake(0, &ratio(0, 1), &ratio(1, 3), "demo").unwrap();
    println!("agent 0 cuts [0, {third}] worth 1/3");

    let rest = Piece::interval(third.clone(), ratio(1, 1)).unwrap();
    let v = oracle.eval(0, &rest, "demo");
    println!("[{third}, 1] is worth {v}, inferred for free: {:?}", oracle.ledger().totals());

    let middle = Piece::interval(ratio(1, 4), ratio(3, 4)).unwrap();
    let v = oracle.eval(0, &middle, "demo");
    println!("[1/4, 3/4] is worth {v}, billed: {:?}", oracle.ledger().totals());
    for q in &oracle.ledger().log {
        println!("  {} agent {} {:?} {}", q.label, q.agent, q.kind, q.piece);
    }
}
