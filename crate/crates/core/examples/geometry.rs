//! Pieces as unions of intervals and the residue frame that protocols cut in.

use envyfree4::rational::ratio;
use envyfree4::{Piece, ResidueFrame};

fn main() {
    let given = Piece::from_pairs([(ratio(1, 4), ratio(1, 2)), (ratio(3, 4), ratio(7, 8))]).unwrap();
    let residue = Piece::full().subtract(&given);
    println!("allocated {given}, residue {residue} of length {}", residue.length());

    // frame coordinates run over the residue only, skipping what is gone
    let frame = ResidueFrame::new(residue);
    let half = frame.length() / ratio(2, 1);
    let left = frame.slice(&ratio(0, 1), &half).unwrap();
    let right = frame.slice(&half, frame.length()).unwrap();
    println!("frame length {}, halves {left} and {right}", frame.length());
    println!("frame point {half} sits at cake point {}", frame.to_cake(&half).unwrap());
    assert_eq!(left.union(&right), *frame.residue());
}
