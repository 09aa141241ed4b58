use serde::Serialize;

use crate::protocols::{main_protocol, Branch};
use crate::valuation::Instance;

use super::{gen_instance, RunConfig, Strategy};

const DENOMINATORS: [u32; 4] = [4, 6, 8, 12];

/// An instance whose run fires the requested branch, with the generator
/// settings that reproduce it.
#[derive(Debug, Clone, Serialize)]
pub struct Found {
    pub branch: Branch,
    pub attempts: usize,
    pub config: RunConfig,
    pub seed: u64,
    #[serde(skip)]
    pub instance: Instance,
}

/// The generator settings tried at step `k` of a search.
fn candidate(k: usize) -> (u64, RunConfig) {
    let strategy = Strategy::ALL[k % Strategy::ALL.len()];
    let denominator_bound = DENOMINATORS[(k / Strategy::ALL.len()) % DENOMINATORS.len()];
    let config = RunConfig {
        seed: 0,
        instances: 1,
        segments: (1, 6),
        denominator_bound,
        strategy,
        audit: false,
        output_path: None,
    };
    (k as u64, config)
}

/// Seeded search over the generator's strategies and grids for an instance
/// that fires `branch`. Deterministic; `None` if `budget` candidates fail.
pub fn find_adversarial(branch: Branch, budget: usize) -> Option<Found> {
    (0..budget).find_map(|k| {
        let (seed, config) = candidate(k);
        let instance = gen_instance(seed, &config).ok()?;
        let out = main_protocol(&instance).ok()?;
        out.fired(branch).then(|| Found {
            branch,
            attempts: k + 1,
            config,
            seed,
            instance,
        })
    })
}
