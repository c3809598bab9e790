// Solve the reference configuration (D = 10, Δ = 10, B = 8, T_D = 2, T_A = 4,
// P_B = 0.1, linear success profile) and print the optimal policy, one block
// per deterioration level.
//
// cargo run --release --example solve_reference

use aoi_wear::experiments::policy_grid;
use aoi_wear::model::ModelConfig;
use aoi_wear::solver::{self, SolverParams};

pub fn run_example() -> aoi_wear::Result<()> {
    let cfg = ModelConfig::reference();
    let params = SolverParams::default();
    let solved = solver::rvi_solve(&cfg, &params)?;
    println!(
        "lambda* = {:.6} ({} iterations, residual {:e})",
        solved.lambda_star, solved.iters, solved.residual
    );
    println!("actions: 0 wait, 1 transmit, 2 renew\n");
    print!("{}", policy_grid(&cfg, &solved.policy));
    Ok(())
}

#[allow(dead_code)]
fn main() -> aoi_wear::Result<()> {
    run_example()
}
