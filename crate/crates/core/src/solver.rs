//! Relaxed relative value iteration for the average-cost problem, policy
//! extraction, and the all-policies reachability check for the renewed state.
//!
//! The iteration is
//!
//! ```text
//! h'(i) = (1 - τ) h(i) + min_a [ g(i,a) + τ Σ_j p_ij(a) h(j) ]
//!                      - min_a [ g(s,a) + τ Σ_j p_sj(a) h(j) ]
//! ```
//!
//! started from `h ≡ 0`, with `s` a fixed reference state. At the fixpoint
//! `h(s) = 0`, the subtracted term equals the optimal average cost `λ*`, and
//! `τ · h` solves the average-cost Bellman equation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, Action, Kernel, ModelConfig, State, StateIndex};

/// Q-values closer than this to the minimum count as ties and resolve to the
/// smallest action code.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverParams {
    pub tau: f64,
    pub epsilon: f64,
    pub max_iters: usize,
    pub ref_state: State,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            tau: 0.2,
            epsilon: 1e-9,
            max_iters: 200_000,
            ref_state: State::RENEWED,
        }
    }
}

impl SolverParams {
    pub fn validate(&self, cfg: &ModelConfig) -> Result<()> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::Config(format!("tau must lie in (0, 1), got {}", self.tau)));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be positive".into()));
        }
        if !cfg.contains(self.ref_state) {
            return Err(Error::Config(format!(
                "reference state {} is outside the state space",
                self.ref_state
            )));
        }
        Ok(())
    }
}

/// One action per state, dense in [`StateIndex`] order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PolicyTable {
    actions: Vec<Action>,
}

impl PolicyTable {
    pub fn new(actions: Vec<Action>) -> Self {
        PolicyTable { actions }
    }

    /// Applies `pick` to every state, in index order.
    pub fn from_fn(space: StateIndex, mut pick: impl FnMut(State) -> Action) -> Self {
        PolicyTable {
            actions: space.iter().map(&mut pick).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn get(&self, index: usize) -> Action {
        self.actions[index]
    }

    pub fn set(&mut self, index: usize, a: Action) {
        self.actions[index] = a;
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn codes(&self) -> Vec<u8> {
        self.actions.iter().map(|a| a.code()).collect()
    }

    /// Checks the table covers the state space and only uses feasible actions.
    pub fn check_feasible(&self, cfg: &ModelConfig) -> Result<()> {
        let space = model::enumerate_states(cfg);
        if self.actions.len() != space.len() {
            return Err(Error::Config(format!(
                "policy has {} entries, state space has {}",
                self.actions.len(),
                space.len()
            )));
        }
        for (i, &a) in self.actions.iter().enumerate() {
            let s = space.state(i);
            if !model::is_feasible(cfg, s, a) {
                return Err(Error::Infeasible { state: s, action: a });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub lambda_star: f64,
    pub iters: usize,
    pub residual: f64,
    pub policy: PolicyTable,
    /// Relative values of the relaxed iteration; `tau * h` is on the scale of
    /// the Bellman equation.
    pub h: Vec<f64>,
    #[serde(skip)]
    pub trajectory: Vec<f64>,
}

impl SolveResult {
    /// Differential costs `h*` satisfying `λ* + h*(i) = min_a [g(i,a) + Σ p_ij(a) h*(j)]`.
    pub fn differential_costs(&self, tau: f64) -> Vec<f64> {
        self.h.iter().map(|v| tau * v).collect()
    }
}

/// Minimum over feasible actions of `g(i,a) + τ Σ_j p_ij(a) h(j)` and the
/// minimizing action.
pub fn bellman_backup(kernel: &Kernel, h: &[f64], i: usize, tau: f64) -> (f64, Action) {
    let mut q = [f64::INFINITY; 3];
    let mut best = f64::INFINITY;
    for choice in kernel.choices(i) {
        let expected: f64 = kernel.successors(choice).iter().map(|&(j, p)| p * h[j]).sum();
        let value = choice.cost + tau * expected;
        q[choice.action as usize] = value;
        best = best.min(value);
    }
    let arg = kernel
        .choices(i)
        .iter()
        .map(|c| c.action)
        .find(|&a| q[a as usize] <= best + TIE_TOLERANCE)
        .expect("every state has a feasible action");
    (best, arg)
}

pub fn extract_policy(kernel: &Kernel, h: &[f64], tau: f64) -> PolicyTable {
    PolicyTable::new((0..kernel.len()).map(|i| bellman_backup(kernel, h, i, tau).1).collect())
}

pub fn rvi_solve(cfg: &ModelConfig, params: &SolverParams) -> Result<SolveResult> {
    cfg.validate()?;
    params.validate(cfg)?;
    let kernel = Kernel::build(cfg);
    let reference = kernel.space().index(params.ref_state);
    rvi_solve_kernel(&kernel, reference, params)
}

/// Runs the iteration on a prebuilt kernel with `reference` as the index of the fixed state.
pub fn rvi_solve_kernel(kernel: &Kernel, reference: usize, params: &SolverParams) -> Result<SolveResult> {
    let n = kernel.len();
    let tau = params.tau;
    let mut h = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut trajectory = Vec::new();
    let mut converged = false;

    for iter in 1..=params.max_iters {
        let (offset, _) = bellman_backup(kernel, &h, reference, tau);
        let mut residual = 0.0f64;
        for i in 0..n {
            let (value, _) = bellman_backup(kernel, &h, i, tau);
            let v = (1.0 - tau) * h[i] + value - offset;
            if !v.is_finite() {
                return Err(Error::Numeric { iter, index: i });
            }
            residual = residual.max((v - h[i]).abs());
            next[i] = v;
        }
        std::mem::swap(&mut h, &mut next);
        trajectory.push(residual);
        if residual < params.epsilon {
            converged = true;
            break;
        }
    }

    let iters = trajectory.len();
    let residual = trajectory.last().copied().unwrap_or(f64::INFINITY);
    if !converged {
        return Err(Error::NonConvergence {
            iters,
            residual,
            trajectory,
        });
    }
    let (lambda_star, _) = bellman_backup(kernel, &h, reference, tau);
    let policy = extract_policy(kernel, &h, tau);
    Ok(SolveResult {
        lambda_star,
        iters,
        residual,
        policy,
        h,
        trajectory,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReachabilityReport {
    pub ok: bool,
    /// Fixpoint rounds needed before no more states were added.
    pub m: usize,
    pub reference: State,
    pub offending_states: Vec<State>,
}

/// Grows `R_0 = {(1,1,0)}` by every state all of whose feasible actions have a
/// positive-probability successor already in the set, until nothing changes.
/// Full coverage means the renewed state is reachable from every state under
/// every policy.
pub fn verify_reachability(cfg: &ModelConfig) -> ReachabilityReport {
    let kernel = Kernel::build(cfg);
    let space = kernel.space();
    let reference = State::RENEWED;
    let mut reached = vec![false; kernel.len()];
    reached[space.index(reference)] = true;
    let mut rounds = 0;
    loop {
        let added: Vec<usize> = (0..kernel.len())
            .filter(|&i| !reached[i])
            .filter(|&i| {
                kernel.choices(i).iter().all(|c| {
                    kernel
                        .successors(c)
                        .iter()
                        .any(|&(j, p)| p > 0.0 && reached[j])
                })
            })
            .collect();
        if added.is_empty() {
            break;
        }
        rounds += 1;
        for i in added {
            reached[i] = true;
        }
    }
    let offending_states: Vec<State> = (0..kernel.len())
        .filter(|&i| !reached[i])
        .map(|i| space.state(i))
        .collect();
    ReachabilityReport {
        ok: offending_states.is_empty(),
        m: rounds,
        reference,
        offending_states,
    }
}
