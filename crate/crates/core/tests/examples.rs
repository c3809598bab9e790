macro_rules! example {
    ($name:ident, $file:literal) => {
        #[allow(dead_code)]
        mod $name {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));
        }
    };
}

example!(solve_reference, "solve_reference.rs");
example!(renewal_structure, "renewal_structure.rs");
example!(token_rate_sweep, "token_rate_sweep.rs");
example!(reachability, "reachability.rs");
example!(oracle_agreement, "oracle_agreement.rs");
example!(simulate_policy, "simulate_policy.rs");
example!(export_trace, "export_trace.rs");

#[test]
fn solve_reference_runs() {
    solve_reference::run_example().expect("solve_reference should run");
}

#[test]
fn renewal_structure_runs() {
    renewal_structure::run_example().expect("renewal_structure should run");
}

#[test]
fn token_rate_sweep_runs() {
    let dir = tempfile::tempdir().unwrap();
    token_rate_sweep::run(dir.path()).expect("token_rate_sweep should run");
    assert!(dir.path().join("sweep.csv").exists());
}

#[test]
fn reachability_runs() {
    reachability::run_example().expect("reachability should run");
}

#[test]
fn oracle_agreement_runs() {
    oracle_agreement::run_example().expect("oracle_agreement should run");
}

#[test]
fn simulate_policy_runs() {
    simulate_policy::run_example().expect("simulate_policy should run");
}

#[test]
fn export_trace_runs() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    export_trace::run(&path).expect("export_trace should run");
    let rows = aoi_wear::simulator::read_trace(&path).unwrap();
    assert_eq!(rows.len(), 200);
}
