use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::rational::{int, ratio};
use crate::valuation::{Instance, Valuation, AGENTS};

use super::RunConfig;

const RETRIES: u32 = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GenError {
    #[error("denominator bound must be at least 2, got {0}")]
    Denominator(u32),
    #[error("segment range {0:?} is empty or starts at zero")]
    Segments((usize, usize)),
    #[error("no valid instance for seed {seed} after {RETRIES} attempts")]
    Exhausted { seed: u64 },
}

/// Shape of the instances drawn by the generator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// Independent agents.
    #[default]
    Independent,
    /// Each agent either copies a shared base valuation or draws a sparse
    /// one of her own, so preferences collide often.
    Clustered,
    /// Most densities are zero.
    Sparse,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Independent, Strategy::Clustered, Strategy::Sparse];
}

/// Draws one valuation on the `1/q` grid. The last segment is always
/// `[1 - 1/q, 1]` and its density absorbs whatever mass is left.
fn draw_valuation(rng: &mut ChaCha8Rng, q: u32, segments: (usize, usize), zero_weight: f64) -> Option<Valuation> {
    let q = q as i64;
    let max_k = segments.1.min(q as usize);
    let k = rng.gen_range(segments.0.min(max_k)..=max_k);
    if k == 1 {
        return Some(Valuation::uniform());
    }
    // k - 2 interior cuts strictly inside (0, q - 1), then q - 1 itself
    let mut grid: Vec<i64> = sample(rng, (q - 2) as usize, k - 2)
        .into_iter()
        .map(|x| x as i64 + 1)
        .collect();
    grid.sort_unstable();
    let mut points = vec![0];
    points.extend(grid);
    points.extend([q - 1, q]);

    let budget = rng.gen_range(0..=q * q) as f64;
    let weights: Vec<f64> = (0..k - 1)
        .map(|_| if rng.gen_bool(zero_weight) { 0.0 } else { rng.gen::<f64>() })
        .collect();
    let total: f64 = weights.iter().sum();
    let mut numerators = Vec::with_capacity(k);
    let mut used = 0;
    for (j, w) in weights.iter().enumerate() {
        let len = points[j + 1] - points[j];
        let n = if total > 0.0 { (budget * w / total / len as f64).floor() as i64 } else { 0 };
        used += n * len;
        numerators.push(n);
    }
    if used > q * q {
        return None;
    }
    numerators.push(q * q - used);
    let breakpoints = points.iter().map(|&p| ratio(p, q)).collect();
    let densities = numerators.iter().map(|&n| ratio(n, q)).collect();
    Valuation::new(breakpoints, densities).ok()
}

fn draw_instance(rng: &mut ChaCha8Rng, config: &RunConfig) -> Option<Instance> {
    let q = config.denominator_bound;
    let mut agents = Vec::with_capacity(AGENTS);
    match config.strategy {
        Strategy::Independent => {
            for _ in 0..AGENTS {
                agents.push(draw_valuation(rng, q, config.segments, 0.2)?);
            }
        }
        Strategy::Sparse => {
            for _ in 0..AGENTS {
                agents.push(draw_valuation(rng, q, config.segments, 0.6)?);
            }
        }
        Strategy::Clustered => {
            let base = draw_valuation(rng, q, config.segments, 0.2)?;
            for _ in 0..AGENTS {
                let v = if rng.gen_bool(0.5) {
                    base.clone()
                } else {
                    draw_valuation(rng, q, config.segments, 0.5)?
                };
                agents.push(v);
            }
        }
    }
    Some(Instance::new(agents.try_into().ok()?))
}

/// Deterministic instance for `seed`. Breakpoints and densities are
/// multiples of `1 / denominator_bound`.
pub fn gen_instance(seed: u64, config: &RunConfig) -> Result<Instance, GenError> {
    if config.denominator_bound < 2 {
        return Err(GenError::Denominator(config.denominator_bound));
    }
    let (lo, hi) = config.segments;
    if lo == 0 || lo > hi {
        return Err(GenError::Segments(config.segments));
    }
    for attempt in 0..RETRIES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(attempt as u64);
        if let Some(instance) = draw_instance(&mut rng, config) {
            debug_assert!(instance.valuations.iter().all(|v| v.eval_interval(&int(0), &int(1)) == int(1)));
            return Ok(instance);
        }
    }
    Err(GenError::Exhausted { seed })
}
