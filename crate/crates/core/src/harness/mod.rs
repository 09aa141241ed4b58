//! Instance generation, fuzz campaigns, witness minimization and the search
//! for instances that reach rare branches of the main protocol.

mod generate;
mod hunt;

pub use generate::{gen_instance, GenError, Strategy};
pub use hunt::{find_adversarial, Found};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{audit_run, Check};
use crate::protocols::{main_protocol, Branch};
use crate::valuation::{Instance, InstanceLoadError, Valuation};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunConfig {
    pub seed: u64,
    pub instances: usize,
    /// Inclusive range for the number of density segments per agent.
    pub segments: (usize, usize),
    /// Breakpoints and densities are multiples of `1/denominator_bound`.
    pub denominator_bound: u32,
    pub strategy: Strategy,
    pub audit: bool,
    #[serde(skip)]
    pub output_path: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            instances: 1000,
            segments: (1, 5),
            denominator_bound: 8,
            strategy: Strategy::Independent,
            audit: true,
            output_path: None,
        }
    }
}

impl RunConfig {
    /// Seed of the `k`-th instance of a campaign.
    pub fn instance_seed(&self, k: usize) -> u64 {
        self.seed.wrapping_add(k as u64)
    }
}

/// How one instance fared.
#[derive(Debug, Clone, Serialize)]
pub struct InstanceReport {
    pub seed: u64,
    pub complete: bool,
    pub envy_free: bool,
    pub cuts: u32,
    pub evals: u32,
    pub finished_at: String,
    pub branches: Vec<Branch>,
    pub audit_passed: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub failed_checks: Vec<Check>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl InstanceReport {
    pub fn ok(&self) -> bool {
        self.error.is_none() && self.complete && self.envy_free && self.audit_passed
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Aggregate {
    pub instances: usize,
    pub max_cuts: u32,
    pub max_evals: u32,
    pub failures: usize,
    pub branch_counts: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CampaignReport {
    pub config: RunConfig,
    pub aggregate: Aggregate,
    pub instances: Vec<InstanceReport>,
    /// Smallest failing instance found, in the instance file format.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<serde_json::Value>,
}

impl CampaignReport {
    pub fn passed(&self) -> bool {
        self.aggregate.failures == 0
    }
}

/// Runs the protocol on one instance and audits it.
pub fn evaluate(instance: &Instance, seed: u64, audit: bool) -> InstanceReport {
    match main_protocol(instance) {
        Ok(out) => {
            let report = audit.then(|| audit_run(&out, instance));
            let envy_free = crate::analysis::envy_matrix(&out.allocation, instance)
                .map(|m| m.is_envy_free())
                .unwrap_or(false);
            let (cuts, evals) = out.ledger.totals();
            InstanceReport {
                seed,
                complete: out.state.is_complete(),
                envy_free,
                cuts,
                evals,
                finished_at: out.finished_at.clone(),
                branches: out.branches.clone(),
                audit_passed: report.as_ref().map(|r| r.passed()).unwrap_or(true),
                failed_checks: report
                    .map(|r| r.failures().into_iter().cloned().collect())
                    .unwrap_or_default(),
                error: None,
            }
        }
        Err(e) => InstanceReport {
            seed,
            complete: false,
            envy_free: false,
            cuts: 0,
            evals: 0,
            finished_at: String::new(),
            branches: Vec::new(),
            audit_passed: false,
            failed_checks: Vec::new(),
            error: Some(e.to_string()),
        },
    }
}

fn aggregate(reports: &[InstanceReport]) -> Aggregate {
    let mut agg = Aggregate {
        instances: reports.len(),
        ..Aggregate::default()
    };
    for b in Branch::ALL {
        agg.branch_counts.insert(b.name().to_string(), 0);
    }
    for r in reports {
        agg.max_cuts = agg.max_cuts.max(r.cuts);
        agg.max_evals = agg.max_evals.max(r.evals);
        if !r.ok() {
            agg.failures += 1;
        }
        for b in &r.branches {
            *agg.branch_counts.entry(b.name().to_string()).or_default() += 1;
        }
    }
    agg
}

/// Generates and runs `config.instances` instances in parallel. Reports come
/// back in seed order; on failure the first failing instance is minimized.
pub fn run_campaign(config: &RunConfig) -> Result<CampaignReport, GenError> {
    let instances: Vec<(u64, Instance)> = (0..config.instances)
        .map(|k| {
            let seed = config.instance_seed(k);
            gen_instance(seed, config).map(|inst| (seed, inst))
        })
        .collect::<Result<_, _>>()?;
    let reports: Vec<InstanceReport> = instances
        .par_iter()
        .map(|(seed, inst)| evaluate(inst, *seed, config.audit))
        .collect();
    let witness = reports
        .iter()
        .position(|r| !r.ok())
        .map(|k| minimize(&instances[k].1, |inst| !evaluate(inst, 0, config.audit).ok()))
        .map(|inst| serde_json::to_value(inst.to_file()).expect("instance serializes"));
    Ok(CampaignReport {
        config: config.clone(),
        aggregate: aggregate(&reports),
        instances: reports,
        witness,
    })
}

/// Runs a list of instances (e.g. stored fixtures) through the same pipeline.
pub fn run_instances(instances: &[Instance], audit: bool) -> Vec<InstanceReport> {
    instances
        .par_iter()
        .enumerate()
        .map(|(k, inst)| evaluate(inst, k as u64, audit))
        .collect()
}

/// Greedily merges adjacent density segments (keeping each agent's
/// normalization exact) for as long as `still_fails` keeps holding.
pub fn minimize(instance: &Instance, still_fails: impl Fn(&Instance) -> bool) -> Instance {
    let mut best = instance.clone();
    loop {
        let mut improved = false;
        'search: for a in 0..best.valuations.len() {
            let segments = best.valuations[a].densities().len();
            for j in 0..segments.saturating_sub(1) {
                let Some(candidate) = merge_segments(&best, a, j) else { continue };
                if still_fails(&candidate) {
                    best = candidate;
                    improved = true;
                    break 'search;
                }
            }
        }
        if !improved {
            return best;
        }
    }
}

fn merge_segments(instance: &Instance, agent: usize, j: usize) -> Option<Instance> {
    let v = &instance.valuations[agent];
    let (b, d) = (v.breakpoints(), v.densities());
    let mass = &d[j] * (&b[j + 1] - &b[j]) + &d[j + 1] * (&b[j + 2] - &b[j + 1]);
    let density = mass / (&b[j + 2] - &b[j]);
    let mut breakpoints = b.to_vec();
    breakpoints.remove(j + 1);
    let mut densities = d.to_vec();
    densities[j] = density;
    densities.remove(j + 1);
    let merged = Valuation::new(breakpoints, densities).ok()?;
    let mut out = instance.clone();
    out.valuations[agent] = merged;
    Some(out)
}

#[derive(Debug, thiserror::Error)]
pub enum FixtureError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parsing {path}: {source}")]
    Parse {
        path: PathBuf,
        source: InstanceLoadError,
    },
}

pub fn load_instance(path: &Path) -> Result<Instance, FixtureError> {
    let text = std::fs::read_to_string(path).map_err(|source| FixtureError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Instance::from_json(&text).map_err(|source| FixtureError::Parse {
        path: path.to_path_buf(),
        source,
    })
}

pub fn save_instance(path: &Path, instance: &Instance) -> Result<(), FixtureError> {
    std::fs::write(path, instance.to_json() + "\n").map_err(|source| FixtureError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Every `*.json` instance under `dir`, sorted by file name.
pub fn load_fixtures(dir: &Path) -> Result<Vec<(String, Instance)>, FixtureError> {
    let io = |source| FixtureError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let name = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            load_instance(&p).map(|inst| (name, inst))
        })
        .collect()
}
