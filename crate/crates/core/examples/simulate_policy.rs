// Monte-Carlo check of the solved policy: long rollouts should average the
// optimal cost per decision stage. Runs four independent seeds in parallel.
//
// cargo run --release --example simulate_policy

use aoi_wear::model::ModelConfig;
use aoi_wear::simulator::{simulate_replications, SimParams};
use aoi_wear::solver::{self, SolverParams};

pub fn run_example() -> aoi_wear::Result<()> {
    let cfg = ModelConfig::reference();
    let solved = solver::rvi_solve(&cfg, &SolverParams::default())?;
    let params = SimParams {
        steps: 250_000,
        burn_in: 10_000,
        seed: 1,
        ..Default::default()
    };
    println!("lambda* = {:.6}", solved.lambda_star);
    for r in simulate_replications(&cfg, &solved.policy, &params, 4)? {
        println!(
            "seed {}: cost/stage {:.6} ({:+.3}%), cost/slot {:.6}, mean AoI {:.4}, renewals {}",
            r.seed,
            r.avg_cost_per_stage,
            100.0 * (r.avg_cost_per_stage - solved.lambda_star) / solved.lambda_star,
            r.avg_cost_per_slot,
            r.avg_aoi,
            r.renewals
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> aoi_wear::Result<()> {
    run_example()
}
