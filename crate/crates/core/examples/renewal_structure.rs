// How a faster token supply changes where the optimal policy renews the
// channel: compares P_B = 0.1 with P_B = 0.8 on the reference configuration.
//
// cargo run --release --example renewal_structure

use aoi_wear::experiments::{non_monotone_slices, policy_diff, renewal_onset};
use aoi_wear::model::ModelConfig;
use aoi_wear::solver::{self, SolverParams};

pub fn run_example() -> aoi_wear::Result<()> {
    let params = SolverParams::default();
    let mut onsets = Vec::new();
    let mut policies = Vec::new();
    for token_prob in [0.1, 0.8] {
        let cfg = ModelConfig {
            token_prob,
            ..ModelConfig::reference()
        };
        let solved = solver::rvi_solve(&cfg, &params)?;
        let onset = renewal_onset(&cfg, &solved.policy);
        println!(
            "P_B = {token_prob}: lambda* = {:.6}, renewals start at (d, delta) = {onset:?}, \
             {} slices break the wait/transmit/renew ordering",
            solved.lambda_star,
            non_monotone_slices(&cfg, &solved.policy).len()
        );
        onsets.push(onset);
        policies.push(solved.policy);
    }
    let cfg = ModelConfig::reference();
    println!("\nstates where the two policies differ (P_B = 0.1 -> 0.8):");
    for (s, a, b) in policy_diff(&cfg, &policies[0], &policies[1]) {
        println!("  {s}: {} -> {}", a.code(), b.code());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> aoi_wear::Result<()> {
    run_example()
}
