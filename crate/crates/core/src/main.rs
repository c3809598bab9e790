use std::path::PathBuf;
use std::process::ExitCode;

use aoi_wear::experiments::{self, ExperimentSpec};
use aoi_wear::Error;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(version, about = "Solve, check, validate and simulate the wearing-channel AoI model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's `output_dir`, then `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the simulation seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the optimal policy and write policy.csv and solve.json.
    Solve(Common),
    /// Solve a grid of P_B, T_D and profile values and write sweep.csv.
    Sweep(Common),
    /// Verify that (1,1,0) is reachable from every state under every policy.
    Check(Common),
    /// Compare the solver with an exhaustive policy scan.
    Oracle {
        #[command(flatten)]
        common: Common,
        /// Also write the cost of every enumerated policy.
        #[arg(long)]
        audit: bool,
    },
    /// Roll out a policy (solved inline unless --policy is given).
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        policy: Option<PathBuf>,
    },
}

fn load(common: &Common) -> aoi_wear::Result<(ExperimentSpec, PathBuf)> {
    let mut spec = ExperimentSpec::load(&common.config)?;
    if let Some(seed) = common.seed {
        spec.sim.get_or_insert_with(Default::default).seed = seed;
    }
    let out = common
        .out
        .clone()
        .or_else(|| spec.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok((spec, out))
}

fn run(command: Command) -> Result<i32, Error> {
    match command {
        Command::Solve(common) => {
            let (spec, out) = load(&common)?;
            let res = experiments::cmd_solve(&spec, &out)?;
            if !common.quiet {
                println!(
                    "lambda* = {} after {} iterations (residual {:e}); wrote {}",
                    res.lambda_star,
                    res.iters,
                    res.residual,
                    out.display()
                );
            }
        }
        Command::Sweep(common) => {
            let (spec, out) = load(&common)?;
            let rows = experiments::cmd_sweep(&spec, &out)?;
            if !common.quiet {
                for r in &rows {
                    match r.lambda_star {
                        Some(l) => println!("{:<12} T_D={} P_B={:<4} lambda*={l:.6}", r.profile, r.wear_step, r.token_prob),
                        None => println!("{:<12} T_D={} P_B={:<4} error: {}", r.profile, r.wear_step, r.token_prob, r.errors),
                    }
                }
            }
        }
        Command::Check(common) => {
            let (spec, out) = load(&common)?;
            let report = experiments::cmd_check(&spec, common.out.as_ref().map(|_| out.as_path()))?;
            if !common.quiet {
                println!("ok = {}, m = {}", report.ok, report.m);
                for s in &report.offending_states {
                    println!("  cannot reach {}: {s}", report.reference);
                }
            }
            if !report.ok {
                return Ok(1);
            }
        }
        Command::Oracle { common, audit } => {
            let (spec, out) = load(&common)?;
            let report = experiments::cmd_oracle(&spec, &out, audit)?;
            if !common.quiet {
                println!(
                    "brute force {} over {} policies, solver {}, gap {:e}, {} disagreements on {} unique states",
                    report.bruteforce_average_cost,
                    report.policies_evaluated,
                    report.rvi_lambda_star,
                    report.gap,
                    report.disagreements.len(),
                    report.unique_states
                );
            }
        }
        Command::Simulate { common, policy } => {
            let (spec, out) = load(&common)?;
            let outcome = experiments::cmd_simulate(&spec, &out, policy.as_deref())?;
            if !common.quiet {
                let r = &outcome.report;
                println!(
                    "{} stages: cost/stage {:.6}, cost/slot {:.6}, mean AoI {:.4}, {} renewals",
                    r.stages, r.avg_cost_per_stage, r.avg_cost_per_slot, r.avg_aoi, r.renewals
                );
                if let (Some(l), Some(g)) = (outcome.lambda_star, outcome.relative_gap) {
                    println!("lambda* = {l:.6}, relative gap {g:.3e}");
                }
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
