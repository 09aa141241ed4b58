use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use envyfree4::analysis::{audit_run, envy_matrix};
use envyfree4::harness::{self, find_adversarial, gen_instance, RunConfig, Strategy};
use envyfree4::protocols::{main_protocol, trace_to_jsonl, Branch};

#[derive(Parser)]
#[command(version, about = "Four-agent envy-free cake cutting: runs, audits and instance search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Independent,
    Clustered,
    Sparse,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Independent => Strategy::Independent,
            StrategyArg::Clustered => Strategy::Clustered,
            StrategyArg::Sparse => Strategy::Sparse,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Fuzz campaign over generated instances.
    Run {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        instances: usize,
        /// Run the invariant audits on every instance.
        #[arg(long)]
        audit: bool,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 8)]
        denominator: u32,
        #[arg(long, default_value_t = 5)]
        max_segments: usize,
        #[arg(long, value_enum, default_value = "independent")]
        strategy: StrategyArg,
    },
    /// Generate one instance file.
    Gen {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 8)]
        denominator: u32,
        #[arg(long, value_enum, default_value = "independent")]
        strategy: StrategyArg,
    },
    /// Run the protocol on an instance file and report the result.
    Replay {
        #[arg(long)]
        instance: PathBuf,
        /// Print the event trace as JSON lines.
        #[arg(long)]
        trace: bool,
    },
    /// Search for an instance that fires a protocol branch.
    Hunt {
        /// One of: phase1-correction, exclusion, selfridge-conway,
        /// phase2-correction, cut-and-choose.
        #[arg(long)]
        branch: Branch,
        #[arg(long, default_value_t = 100_000)]
        budget: usize,
        /// Save the instance found here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<(), String> {
    match out {
        Some(path) => std::fs::write(path, format!("{text}\n")).map_err(|e| format!("writing {}: {e}", path.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<bool, String> {
    match cli.command {
        Command::Run { seed, instances, audit, out, denominator, max_segments, strategy } => {
            let config = RunConfig {
                seed,
                instances,
                segments: (1, max_segments),
                denominator_bound: denominator,
                strategy: strategy.into(),
                audit,
                output_path: out.clone(),
            };
            let report = harness::run_campaign(&config).map_err(|e| e.to_string())?;
            let agg = &report.aggregate;
            eprintln!(
                "{} instances, {} failures, max {} cuts / {} evals",
                agg.instances, agg.failures, agg.max_cuts, agg.max_evals
            );
            for (name, count) in &agg.branch_counts {
                eprintln!("  {name:<18} {count}");
            }
            let json = serde_json::to_string_pretty(&report).map_err(|e| e.to_string())?;
            emit(&json, out.as_ref())?;
            Ok(report.passed())
        }
        Command::Gen { seed, out, denominator, strategy } => {
            let config = RunConfig {
                seed,
                instances: 1,
                denominator_bound: denominator,
                strategy: strategy.into(),
                ..RunConfig::default()
            };
            let instance = gen_instance(seed, &config).map_err(|e| e.to_string())?;
            emit(&instance.to_json(), out.as_ref())?;
            Ok(true)
        }
        Command::Replay { instance, trace } => {
            let inst = harness::load_instance(&instance).map_err(|e| e.to_string())?;
            let out = main_protocol(&inst).map_err(|e| e.to_string())?;
            if trace {
                print!("{}", trace_to_jsonl(&out.state.trace));
            }
            let (cuts, evals) = out.ledger.totals();
            let report = audit_run(&out, &inst);
            let envy = envy_matrix(&out.allocation, &inst).map_err(|e| e.to_string())?;
            let mut summary = serde_json::json!({
                "finished_at": out.finished_at,
                "branches": out.branches,
                "cuts": cuts,
                "evals": evals,
                "envy_free": envy.is_envy_free(),
                "envy_matrix": envy,
                "allocation": out.allocation.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
                "audit_passed": report.passed(),
                "failed_checks": report.failures(),
            });
            if trace {
                summary["queries"] = serde_json::to_value(&out.ledger.log).map_err(|e| e.to_string())?;
            }
            eprintln!("{}", serde_json::to_string_pretty(&summary).map_err(|e| e.to_string())?);
            Ok(report.passed() && envy.is_envy_free())
        }
        Command::Hunt { branch, budget, out } => match find_adversarial(branch, budget) {
            Some(found) => {
                eprintln!(
                    "{branch}: seed {} after {} attempts (strategy {:?}, denominator {})",
                    found.seed, found.attempts, found.config.strategy, found.config.denominator_bound
                );
                emit(&found.instance.to_json(), out.as_ref())?;
                Ok(true)
            }
            None => {
                eprintln!("{branch}: nothing found in {budget} attempts");
                Ok(false)
            }
        },
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
