//! Seeded Monte-Carlo rollouts of a policy through the system dynamics.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, Action, ModelConfig, State};
use crate::solver::PolicyTable;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimParams {
    pub steps: u64,
    pub seed: u64,
    pub init: State,
    /// Stages discarded before averaging starts.
    pub burn_in: u64,
    /// Keep a per-stage log of every simulated stage.
    pub trace: bool,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            steps: 1_000_000,
            seed: 0,
            init: State::RENEWED,
            burn_in: 10_000,
            trace: false,
        }
    }
}

impl SimParams {
    pub fn validate(&self, cfg: &ModelConfig) -> Result<()> {
        if self.steps <= self.burn_in {
            return Err(Error::Config(format!(
                "steps ({}) must exceed burn_in ({})",
                self.steps, self.burn_in
            )));
        }
        if !cfg.contains(self.init) {
            return Err(Error::Config(format!("initial state {} is outside the state space", self.init)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionCounts {
    pub wait: u64,
    pub transmit: u64,
    pub renew: u64,
}

impl ActionCounts {
    fn bump(&mut self, a: Action) {
        match a {
            Action::Wait => self.wait += 1,
            Action::Transmit => self.transmit += 1,
            Action::Renew => self.renew += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.wait + self.transmit + self.renew
    }
}

/// One stage of a rollout, as written to `trace.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub stage: u64,
    pub d: u32,
    pub delta: u32,
    pub b: u32,
    pub action: u8,
    pub cost: f64,
    pub slot_count: u32,
}

/// Averages over the stages after burn-in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub seed: u64,
    /// Number of averaged stages, `steps - burn_in`.
    pub stages: u64,
    /// Time slots spanned by the averaged stages; a renewal spans `T_A` slots.
    pub slots: u64,
    pub total_cost: f64,
    pub avg_cost_per_stage: f64,
    pub avg_cost_per_slot: f64,
    pub avg_aoi: f64,
    pub action_counts: ActionCounts,
    pub renewals: u64,
    pub final_state: State,
    #[serde(skip)]
    pub trace: Option<Vec<TraceRow>>,
}

pub fn simulate(cfg: &ModelConfig, policy: &PolicyTable, params: &SimParams) -> Result<SimReport> {
    params.validate(cfg)?;
    let space = model::enumerate_states(cfg);
    if policy.len() != space.len() {
        return Err(Error::Config(format!(
            "policy has {} entries, state space has {}",
            policy.len(),
            space.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut trace = params.trace.then(|| Vec::with_capacity(params.steps as usize));
    let mut state = params.init;
    let mut counts = ActionCounts::default();
    let (mut total_cost, mut slots, mut age_sum) = (0.0, 0u64, 0u64);

    for stage in 0..params.steps {
        let action = policy.get(space.index(state));
        if !model::is_feasible(cfg, state, action) {
            return Err(Error::Infeasible { state, action });
        }
        let cost = model::stage_cost(cfg, state, action);
        let slot_count = if action == Action::Renew { cfg.renewal_slots } else { 1 };
        if let Some(rows) = trace.as_mut() {
            rows.push(TraceRow {
                stage,
                d: state.level,
                delta: state.age,
                b: state.tokens,
                action: action.code(),
                cost,
                slot_count,
            });
        }
        if stage >= params.burn_in {
            counts.bump(action);
            total_cost += cost;
            slots += u64::from(slot_count);
            age_sum += u64::from(state.age);
        }

        let delivered = action == Action::Transmit
            && rng.random_bool(cfg.success_prob_unchecked(state.level));
        let token = action != Action::Renew && rng.random_bool(cfg.token_prob);
        state = model::step(cfg, state, action, delivered, token);
    }

    let stages = params.steps - params.burn_in;
    Ok(SimReport {
        seed: params.seed,
        stages,
        slots,
        total_cost,
        avg_cost_per_stage: total_cost / stages as f64,
        avg_cost_per_slot: total_cost / slots as f64,
        avg_aoi: age_sum as f64 / stages as f64,
        action_counts: counts,
        renewals: counts.renew,
        final_state: state,
        trace,
    })
}

/// Independent runs with seeds `params.seed, params.seed + 1, ...`, returned in seed order.
pub fn simulate_replications(
    cfg: &ModelConfig,
    policy: &PolicyTable,
    params: &SimParams,
    replications: usize,
) -> Result<Vec<SimReport>> {
    (0..replications as u64)
        .into_par_iter()
        .map(|k| {
            let p = SimParams {
                seed: params.seed.wrapping_add(k),
                ..params.clone()
            };
            simulate(cfg, policy, &p)
        })
        .collect()
}

/// Writes the recorded trace as `stage,d,delta,b,action,cost,slot_count`.
pub fn trace_export(report: &SimReport, path: &Path) -> Result<()> {
    let rows = report
        .trace
        .as_ref()
        .ok_or_else(|| Error::Config("simulation was run without trace recording".into()))?;
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    r.deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::csv(path, e))
}
