//! Seeded search for an instance that drives the protocol down a given branch.

use envyfree4::harness::find_adversarial;
use envyfree4::protocols::Branch;

fn main() {
    for branch in Branch::ALL {
        match find_adversarial(branch, 5000) {
            Some(found) => println!(
                "{branch}: seed {} ({:?}, 1/{} grid) after {} attempts",
                found.seed, found.config.strategy, found.config.denominator_bound, found.attempts
            ),
            None => println!("{branch}: not found"),
        }
    }
}
