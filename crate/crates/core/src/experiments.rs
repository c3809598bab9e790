//! Batch experiments: configuration files in, CSV and JSON results out.
//!
//! Each command writes into one output directory and always leaves a
//! `config.json` snapshot of the experiment next to its results. Outputs
//! contain no timestamps or paths, so rerunning a configuration reproduces
//! them byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, Action, ModelConfig, Profile, State};
use crate::oracle;
use crate::simulator::{self, SimParams, SimReport};
use crate::solver::{self, PolicyTable, ReachabilityReport, SolveResult, SolverParams};

/// Grid of sweep points; every combination of profile, `T_D` and `P_B` is solved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepGrid {
    #[serde(rename = "P_B")]
    pub token_probs: Vec<f64>,
    #[serde(rename = "T_D")]
    pub wear_steps: Vec<u32>,
    pub profiles: Vec<Profile>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid {
            token_probs: (1..=9).map(|k| f64::from(k) / 10.0).collect(),
            wear_steps: vec![2, 3],
            profiles: vec![Profile::LINEAR_REFERENCE, Profile::EXPONENTIAL_REFERENCE],
        }
    }
}

impl SweepGrid {
    fn points(&self, base: &ModelConfig) -> Vec<ModelConfig> {
        let mut out = Vec::new();
        for &profile in &self.profiles {
            for &wear_step in &self.wear_steps {
                for &token_prob in &self.token_probs {
                    out.push(ModelConfig {
                        profile,
                        wear_step,
                        token_prob,
                        ..base.clone()
                    });
                }
            }
        }
        out
    }
}

/// Experiment file: the model keys at top level plus `solver`, `sweep` and `sim` sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    #[serde(flatten)]
    pub model: ModelConfig,
    #[serde(default)]
    pub solver: SolverParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepGrid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimParams>,
    #[serde(default, skip_serializing)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn new(model: ModelConfig) -> Self {
        ExperimentSpec {
            model,
            solver: SolverParams::default(),
            sweep: None,
            sim: None,
            output_dir: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ExperimentSpec =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.solver.validate(&self.model)?;
        if let Some(grid) = &self.sweep {
            if grid.token_probs.is_empty() || grid.wear_steps.is_empty() || grid.profiles.is_empty() {
                return Err(Error::Config("sweep grids must be nonempty".into()));
            }
            for point in grid.points(&self.model) {
                point.validate()?;
            }
        }
        if let Some(sim) = &self.sim {
            sim.validate(&self.model)?;
        }
        Ok(())
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    write_file(path, &text)
}

fn prepare(out: &Path, spec: &ExperimentSpec) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_json(&out.join("config.json"), spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
struct PolicyRow {
    d: u32,
    delta: u32,
    b: u32,
    action: u8,
}

fn policy_writer<W: std::io::Write>(w: W, cfg: &ModelConfig, policy: &PolicyTable) -> csv::Result<W> {
    let mut w = csv::Writer::from_writer(w);
    for (i, s) in model::enumerate_states(cfg).iter().enumerate() {
        w.serialize(PolicyRow {
            d: s.level,
            delta: s.age,
            b: s.tokens,
            action: policy.get(i).code(),
        })?;
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

/// `policy.csv` contents: `d,delta,b,action`, one row per state in index order.
pub fn policy_csv_string(cfg: &ModelConfig, policy: &PolicyTable) -> String {
    let bytes = policy_writer(Vec::new(), cfg, policy).expect("writing to memory");
    String::from_utf8(bytes).expect("csv output is ascii")
}

pub fn write_policy_csv(path: &Path, cfg: &ModelConfig, policy: &PolicyTable) -> Result<()> {
    write_file(path, &policy_csv_string(cfg, policy))
}

/// Reads a policy file, requiring every state exactly once with a feasible action.
pub fn read_policy_csv(path: &Path, cfg: &ModelConfig) -> Result<PolicyTable> {
    let space = model::enumerate_states(cfg);
    let mut slots: Vec<Option<Action>> = vec![None; space.len()];
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    for row in r.deserialize::<PolicyRow>() {
        let row = row.map_err(|e| Error::csv(path, e))?;
        let s = State::new(row.d, row.delta, row.b);
        let i = space.try_index(s)?;
        let a = Action::from_code(row.action)
            .ok_or_else(|| Error::Config(format!("{}: invalid action code {}", path.display(), row.action)))?;
        if !model::is_feasible(cfg, s, a) {
            return Err(Error::Infeasible { state: s, action: a });
        }
        if slots[i].replace(a).is_some() {
            return Err(Error::Config(format!("{}: state {s} listed twice", path.display())));
        }
    }
    let actions = slots
        .into_iter()
        .enumerate()
        .map(|(i, a)| {
            a.ok_or_else(|| Error::Config(format!("{}: state {} missing", path.display(), space.state(i))))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PolicyTable::new(actions))
}

/// Text rendering of a policy: one block per `d`, rows `δ`, columns `b`.
pub fn policy_grid(cfg: &ModelConfig, policy: &PolicyTable) -> String {
    let space = model::enumerate_states(cfg);
    let mut out = String::new();
    for d in 1..=cfg.max_level {
        let _ = writeln!(out, "d = {d}");
        let header: String = (0..=cfg.bucket_size).map(|b| format!("{b:>3}")).collect();
        let _ = writeln!(out, "  delta\\b{header}");
        for delta in 1..=cfg.delta_max {
            let row: String = (0..=cfg.bucket_size)
                .map(|b| format!("{:>3}", policy.get(space.index(State::new(d, delta, b))).code()))
                .collect();
            let _ = writeln!(out, "  {delta:>7}{row}");
        }
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct SolveFile<'a> {
    c: f64,
    tau: f64,
    #[serde(flatten)]
    result: &'a SolveResult,
}

/// Solves the model; writes `policy.csv`, `solve.json` and `policy_grid.txt`.
pub fn cmd_solve(spec: &ExperimentSpec, out: &Path) -> Result<SolveResult> {
    spec.validate()?;
    prepare(out, spec)?;
    let result = solver::rvi_solve(&spec.model, &spec.solver)?;
    write_policy_csv(&out.join("policy.csv"), &spec.model, &result.policy)?;
    write_file(&out.join("policy_grid.txt"), &policy_grid(&spec.model, &result.policy))?;
    write_json(
        &out.join("solve.json"),
        &SolveFile {
            c: spec.model.tx_cost,
            tau: spec.solver.tau,
            result: &result,
        },
    )?;
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub profile: String,
    #[serde(rename = "T_D")]
    pub wear_step: u32,
    #[serde(rename = "P_B")]
    pub token_prob: f64,
    pub lambda_star: Option<f64>,
    pub errors: String,
}

/// Solves every grid point (the default grid if the spec has none) and writes `sweep.csv`.
/// A failing point is recorded in the `errors` column.
pub fn cmd_sweep(spec: &ExperimentSpec, out: &Path) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    prepare(out, spec)?;
    let grid = spec.sweep.clone().unwrap_or_default();
    let rows: Vec<SweepRow> = grid
        .points(&spec.model)
        .par_iter()
        .map(|cfg| {
            let solved = solver::rvi_solve(cfg, &spec.solver);
            SweepRow {
                profile: cfg.profile.kind().to_string(),
                wear_step: cfg.wear_step,
                token_prob: cfg.token_prob,
                lambda_star: solved.as_ref().ok().map(|r| r.lambda_star),
                errors: solved.err().map(|e| e.to_string()).unwrap_or_default(),
            }
        })
        .collect();
    let path = out.join("sweep.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::csv(&path, e))?;
    for row in &rows {
        w.serialize(row).map_err(|e| Error::csv(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(rows)
}

pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    r.deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::csv(path, e))
}

/// Runs the reachability fixpoint; writes `check.json` when `out` is given.
pub fn cmd_check(spec: &ExperimentSpec, out: Option<&Path>) -> Result<ReachabilityReport> {
    spec.validate()?;
    let report = solver::verify_reachability(&spec.model);
    if let Some(out) = out {
        prepare(out, spec)?;
        write_json(&out.join("check.json"), &report)?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub c: f64,
    pub policies_evaluated: u128,
    pub bruteforce_average_cost: f64,
    pub rvi_lambda_star: f64,
    pub gap: f64,
    /// States where the brute-force optimal action is unique.
    pub unique_states: usize,
    /// Unique-optimum states where the solver picked a different action.
    pub disagreements: Vec<State>,
    pub bruteforce_policy_csv: String,
    pub rvi_policy_csv: String,
}

/// Compares relative value iteration with the exhaustive optimum; writes
/// `oracle.json` and, with `audit`, `oracle_audit.csv`.
pub fn cmd_oracle(spec: &ExperimentSpec, out: &Path, audit: bool) -> Result<OracleReport> {
    spec.validate()?;
    let bf = oracle::brute_force_optimal(&spec.model)?;
    prepare(out, spec)?;
    let rvi = solver::rvi_solve(&spec.model, &spec.solver)?;
    let space = model::enumerate_states(&spec.model);
    let unique = bf.unique_optimal_actions();
    let disagreements = unique
        .iter()
        .filter(|&&(i, a)| rvi.policy.get(i) != a)
        .map(|&(i, _)| space.state(i))
        .collect();
    let report = OracleReport {
        c: spec.model.tx_cost,
        policies_evaluated: bf.policies_evaluated,
        bruteforce_average_cost: bf.best.average_cost,
        rvi_lambda_star: rvi.lambda_star,
        gap: (rvi.lambda_star - bf.best.average_cost).abs(),
        unique_states: unique.len(),
        disagreements,
        bruteforce_policy_csv: policy_csv_string(&spec.model, &bf.best.policy),
        rvi_policy_csv: policy_csv_string(&spec.model, &rvi.policy),
    };
    write_json(&out.join("oracle.json"), &report)?;
    if audit {
        let costs = oracle::policy_costs(&spec.model)?;
        oracle::write_audit_csv(&out.join("oracle_audit.csv"), &costs)?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutcome {
    pub c: f64,
    /// `"solved"` when the policy came from an inline solve, `"file"` otherwise.
    pub policy_source: String,
    pub lambda_star: Option<f64>,
    pub relative_gap: Option<f64>,
    pub report: SimReport,
}

/// Simulates a policy read from `policy_file`, or the solved optimal policy;
/// writes `sim.json`, and `trace.csv` when tracing is enabled.
pub fn cmd_simulate(spec: &ExperimentSpec, out: &Path, policy_file: Option<&Path>) -> Result<SimOutcome> {
    spec.validate()?;
    let params = spec.sim.clone().unwrap_or_default();
    params.validate(&spec.model)?;
    prepare(out, spec)?;
    let (policy, lambda_star, source) = match policy_file {
        Some(path) => (read_policy_csv(path, &spec.model)?, None, "file"),
        None => {
            let solved = solver::rvi_solve(&spec.model, &spec.solver)?;
            (solved.policy, Some(solved.lambda_star), "solved")
        }
    };
    let report = simulator::simulate(&spec.model, &policy, &params)?;
    if params.trace {
        simulator::trace_export(&report, &out.join("trace.csv"))?;
    }
    let outcome = SimOutcome {
        c: spec.model.tx_cost,
        policy_source: source.to_string(),
        lambda_star,
        relative_gap: lambda_star.map(|l| (report.avg_cost_per_stage - l).abs() / l),
        report,
    };
    write_json(&out.join("sim.json"), &outcome)?;
    Ok(outcome)
}

/// `(d, b)` slices whose actions over increasing `δ` are not of the form
/// wait..., transmit..., renew....
pub fn non_monotone_slices(cfg: &ModelConfig, policy: &PolicyTable) -> Vec<(u32, u32)> {
    let space = model::enumerate_states(cfg);
    let mut bad = Vec::new();
    for d in 1..=cfg.max_level {
        for b in 0..=cfg.bucket_size {
            let codes: Vec<u8> = (1..=cfg.delta_max)
                .map(|delta| policy.get(space.index(State::new(d, delta, b))).code())
                .collect();
            if codes.windows(2).any(|w| w[1] < w[0]) {
                bad.push((d, b));
            }
        }
    }
    bad
}

/// Smallest deterioration level and smallest AoI among states where the policy renews.
pub fn renewal_onset(cfg: &ModelConfig, policy: &PolicyTable) -> Option<(u32, u32)> {
    let space = model::enumerate_states(cfg);
    let renew: Vec<State> = space
        .iter()
        .enumerate()
        .filter(|&(i, _)| policy.get(i) == Action::Renew)
        .map(|(_, s)| s)
        .collect();
    let d = renew.iter().map(|s| s.level).min()?;
    let delta = renew.iter().map(|s| s.age).min()?;
    Some((d, delta))
}

/// States where two policies differ, with both actions.
pub fn policy_diff(cfg: &ModelConfig, a: &PolicyTable, b: &PolicyTable) -> Vec<(State, Action, Action)> {
    model::enumerate_states(cfg)
        .iter()
        .enumerate()
        .filter(|&(i, _)| a.get(i) != b.get(i))
        .map(|(i, s)| (s, a.get(i), b.get(i)))
        .collect()
}
