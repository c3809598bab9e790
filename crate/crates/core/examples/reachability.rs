// Checks that the renewed state (1,1,0) can be reached from every state
// under every policy, and shows what breaks when no tokens ever arrive.
//
// cargo run --example reachability

use aoi_wear::model::ModelConfig;
use aoi_wear::solver::verify_reachability;

pub fn run_example() -> aoi_wear::Result<()> {
    for token_prob in [0.1, 0.0] {
        let cfg = ModelConfig {
            token_prob,
            ..ModelConfig::reference()
        };
        let report = verify_reachability(&cfg);
        println!(
            "P_B = {token_prob}: ok = {}, fixpoint rounds m = {}, {} states cannot reach {}",
            report.ok,
            report.m,
            report.offending_states.len(),
            report.reference
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> aoi_wear::Result<()> {
    run_example()
}
