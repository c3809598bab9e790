// Relative value iteration against an exhaustive scan of every
// deterministic stationary policy on a 27-state instance.
//
// cargo run --release --example oracle_agreement

use aoi_wear::model::{enumerate_states, CostCapMode, ModelConfig, Profile};
use aoi_wear::oracle::brute_force_optimal;
use aoi_wear::solver::{self, SolverParams};

pub fn tiny() -> ModelConfig {
    ModelConfig {
        max_level: 3,
        delta_max: 3,
        bucket_size: 2,
        wear_step: 2,
        renewal_slots: 2,
        tx_cost: 1.0,
        token_prob: 0.5,
        profile: Profile::Linear { p_hi: 0.9, p_lo: 0.1 },
        cost_cap_mode: CostCapMode::Capped,
    }
}

pub fn run_example() -> aoi_wear::Result<()> {
    let cfg = tiny();
    let bf = brute_force_optimal(&cfg)?;
    let rvi = solver::rvi_solve(&cfg, &SolverParams::default())?;
    println!("policies scanned: {}", bf.policies_evaluated);
    println!("brute-force optimum: {:.12}", bf.best.average_cost);
    println!("solver lambda*:      {:.12}", rvi.lambda_star);
    println!("gap:                 {:e}", (bf.best.average_cost - rvi.lambda_star).abs());

    let space = enumerate_states(&cfg);
    println!("\nstates with a unique optimal action:");
    for (i, a) in bf.unique_optimal_actions() {
        let mark = if rvi.policy.get(i) == a { "agree" } else { "DIFFER" };
        println!("  {}  oracle {}  solver {}  {mark}", space.state(i), a.code(), rvi.policy.get(i).code());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> aoi_wear::Result<()> {
    run_example()
}
