// Records a short rollout of the optimal policy with P_B = 0.8 and writes
// it as `trace.csv` (stage, d, delta, b, action, cost, slot_count).
//
// cargo run --example export_trace [-- <path>]

use std::path::{Path, PathBuf};

use aoi_wear::model::ModelConfig;
use aoi_wear::simulator::{self, SimParams};
use aoi_wear::solver::{self, SolverParams};

pub fn run_example() -> aoi_wear::Result<()> {
    run(&std::env::temp_dir().join("aoi-wear-trace.csv"))
}

pub fn run(path: &Path) -> aoi_wear::Result<()> {
    let cfg = ModelConfig {
        token_prob: 0.8,
        ..ModelConfig::reference()
    };
    let solved = solver::rvi_solve(&cfg, &SolverParams::default())?;
    let params = SimParams {
        steps: 200,
        burn_in: 0,
        seed: 5,
        trace: true,
        ..Default::default()
    };
    let report = simulator::simulate(&cfg, &solved.policy, &params)?;
    simulator::trace_export(&report, path)?;
    println!(
        "{} stages, {} slots, {} renewals; wrote {}",
        report.stages,
        report.slots,
        report.renewals,
        path.display()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> aoi_wear::Result<()> {
    match std::env::args().nth(1) {
        Some(path) => run(&PathBuf::from(path)),
        None => run_example(),
    }
}
