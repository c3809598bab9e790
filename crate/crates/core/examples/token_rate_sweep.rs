// Optimal average cost against the token arrival probability for both
// success profiles and two wear steps, written as `sweep.csv`.
//
// cargo run --release --example token_rate_sweep [-- <output dir>]

use std::path::{Path, PathBuf};

use aoi_wear::experiments::{cmd_sweep, ExperimentSpec, SweepGrid, SweepRow};
use aoi_wear::model::ModelConfig;

pub fn run_example() -> aoi_wear::Result<()> {
    run(&std::env::temp_dir().join("aoi-wear-sweep"))
}

pub fn run(out: &Path) -> aoi_wear::Result<()> {
    let mut spec = ExperimentSpec::new(ModelConfig::reference());
    spec.sweep = Some(SweepGrid::default());
    let rows = cmd_sweep(&spec, out)?;

    println!("{:<12} {:>4} {:>5} {:>12}", "profile", "T_D", "P_B", "lambda*");
    for r in &rows {
        let value = r.lambda_star.map_or_else(|| r.errors.clone(), |l| format!("{l:.6}"));
        println!("{:<12} {:>4} {:>5} {:>12}", r.profile, r.wear_step, r.token_prob, value);
    }

    let find = |profile: &str, wear: u32, pb: f64| -> Option<f64> {
        rows.iter()
            .find(|r: &&SweepRow| r.profile == profile && r.wear_step == wear && r.token_prob == pb)
            .and_then(|r| r.lambda_star)
    };
    let mut higher = true;
    for r in rows.iter().filter(|r| r.profile == "linear") {
        if let (Some(lin), Some(exp)) = (r.lambda_star, find("exponential", r.wear_step, r.token_prob)) {
            higher &= exp >= lin;
        }
    }
    println!("\nexponential decay costs at least as much everywhere: {higher}");
    println!("wrote {}", out.join("sweep.csv").display());
    Ok(())
}

#[allow(dead_code)]
fn main() -> aoi_wear::Result<()> {
    match std::env::args().nth(1) {
        Some(dir) => run(&PathBuf::from(dir)),
        None => run_example(),
    }
}
