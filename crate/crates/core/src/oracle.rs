//! Exhaustive ground truth for small instances.
//!
//! Every deterministic stationary policy induces a Markov chain; its long-run
//! average cost is the stationary-distribution-weighted stage cost. Scanning
//! all feasible policies gives the optimum that relative value iteration
//! should reproduce.
//!
//! Only states reachable from `(1,1,0)` under some sequence of actions are
//! enumerated. Any other state is transient under every policy, so its action
//! cannot change the average cost of a chain whose recurrent class contains
//! `(1,1,0)`; those states keep their first feasible action.

use std::collections::VecDeque;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Action, Kernel, ModelConfig, State};
use crate::solver::PolicyTable;

/// Hard cap on the number of policies a scan may visit.
pub const MAX_POLICIES: u128 = 10_000_000;

const STATIONARY_RESIDUAL: f64 = 1e-8;

/// Policies whose costs differ by less than this are treated as equally good
/// when deciding whether a state's optimal action is unique.
pub const UNIQUENESS_GAP: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyEvaluation {
    pub policy: PolicyTable,
    pub average_cost: f64,
    pub occupancy: Vec<f64>,
}

/// Stationary distribution of the chain with sparse rows `rows[i] = [(j, p_ij)]`.
///
/// One balance equation is replaced by the normalization constraint. The
/// solution is rejected if the chain is singular or the balance residual
/// exceeds `1e-8`.
pub fn stationary_distribution(rows: &[Vec<(usize, f64)>]) -> Result<Vec<f64>> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::Stationary("empty chain".into()));
    }
    // A = P^T - I with row 0 replaced by ones.
    let mut a = DMatrix::<f64>::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        for &(j, p) in row {
            a[(j, i)] += p;
        }
        a[(i, i)] -= 1.0;
    }
    for j in 0..n {
        a[(0, j)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(n);
    rhs[0] = 1.0;
    let pi = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Stationary("balance system is singular".into()))?;

    let mut flow = vec![0.0; n];
    for (i, row) in rows.iter().enumerate() {
        for &(j, p) in row {
            flow[j] += pi[i] * p;
        }
    }
    let balance = (0..n).map(|j| (flow[j] - pi[j]).abs()).fold(0.0, f64::max);
    let mass: f64 = pi.iter().sum();
    if !(balance <= STATIONARY_RESIDUAL && (mass - 1.0).abs() <= STATIONARY_RESIDUAL) {
        return Err(Error::Stationary(format!(
            "balance residual {balance:e}, total mass {mass}"
        )));
    }
    let mut out = Vec::with_capacity(n);
    for &v in pi.iter() {
        if v < -STATIONARY_RESIDUAL {
            return Err(Error::Stationary(format!("negative occupancy {v:e}")));
        }
        out.push(v.max(0.0));
    }
    Ok(out)
}

pub fn evaluate_policy(cfg: &ModelConfig, policy: &PolicyTable) -> Result<PolicyEvaluation> {
    policy.check_feasible(cfg)?;
    evaluate_on_kernel(&Kernel::build(cfg), policy)
}

/// Evaluates a policy that is known to be feasible for `kernel`.
pub fn evaluate_on_kernel(kernel: &Kernel, policy: &PolicyTable) -> Result<PolicyEvaluation> {
    let space = kernel.space();
    let everything: Vec<usize> = (0..kernel.len()).collect();
    let stranded = unable_to_reach_renewed(kernel, policy, &everything);
    if !stranded.is_empty() {
        return Err(Error::Multichain {
            reference: State::RENEWED,
            states: stranded.into_iter().map(|i| space.state(i)).collect(),
        });
    }
    let occupancy = stationary_distribution(&policy_rows(kernel, policy, &everything))?;
    let average_cost = occupancy
        .iter()
        .enumerate()
        .map(|(i, &q)| q * chosen(kernel, policy, i).cost)
        .sum();
    Ok(PolicyEvaluation {
        policy: policy.clone(),
        average_cost,
        occupancy,
    })
}

fn chosen<'k>(kernel: &'k Kernel, policy: &PolicyTable, i: usize) -> &'k crate::model::Choice {
    kernel
        .choice(i, policy.get(i))
        .expect("policy action is feasible")
}

/// Transition rows of the induced chain restricted to `states`, which must be
/// closed under the policy. Column indices are positions within `states`.
fn policy_rows(kernel: &Kernel, policy: &PolicyTable, states: &[usize]) -> Vec<Vec<(usize, f64)>> {
    let mut pos = vec![usize::MAX; kernel.len()];
    for (k, &i) in states.iter().enumerate() {
        pos[i] = k;
    }
    states
        .iter()
        .map(|&i| {
            kernel
                .successors(chosen(kernel, policy, i))
                .iter()
                .map(|&(j, p)| (pos[j], p))
                .collect()
        })
        .collect()
}

/// Members of `states` from which `(1,1,0)` cannot be reached under `policy`.
fn unable_to_reach_renewed(kernel: &Kernel, policy: &PolicyTable, states: &[usize]) -> Vec<usize> {
    let target = kernel.space().index(State::RENEWED);
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); kernel.len()];
    for &i in states {
        for &(j, p) in kernel.successors(chosen(kernel, policy, i)) {
            if p > 0.0 {
                preds[j].push(i);
            }
        }
    }
    let mut seen = vec![false; kernel.len()];
    seen[target] = true;
    let mut queue = VecDeque::from([target]);
    while let Some(j) = queue.pop_front() {
        for &i in &preds[j] {
            if !seen[i] {
                seen[i] = true;
                queue.push_back(i);
            }
        }
    }
    states.iter().copied().filter(|&i| !seen[i]).collect()
}

/// States reachable from `(1,1,0)` under some action sequence, in index order.
pub fn reachable_from_renewed(kernel: &Kernel) -> Vec<usize> {
    let start = kernel.space().index(State::RENEWED);
    let mut seen = vec![false; kernel.len()];
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(i) = queue.pop_front() {
        for c in kernel.choices(i) {
            for &(j, p) in kernel.successors(c) {
                if p > 0.0 && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    (0..kernel.len()).filter(|&i| seen[i]).collect()
}

/// Outcome of an exhaustive scan.
#[derive(Debug, Clone)]
pub struct BruteForce {
    pub best: PolicyEvaluation,
    /// Position of the best policy in enumeration order.
    pub best_id: u128,
    pub policies_evaluated: u128,
    /// For enumerated states, the best average cost among policies taking each
    /// action there (`INFINITY` for infeasible actions). `None` for states
    /// outside the enumerated set.
    pub action_optima: Vec<Option<[f64; 3]>>,
}

impl BruteForce {
    /// States whose optimal action beats every alternative by more than
    /// [`UNIQUENESS_GAP`], with that action.
    pub fn unique_optimal_actions(&self) -> Vec<(usize, Action)> {
        self.action_optima
            .iter()
            .enumerate()
            .filter_map(|(i, row)| {
                let row = row.as_ref()?;
                let a = self.best.policy.get(i);
                let own = row[a as usize];
                let unique = Action::ALL
                    .iter()
                    .filter(|&&b| b != a)
                    .all(|&b| row[b as usize] > own + UNIQUENESS_GAP);
                unique.then_some((i, a))
            })
            .collect()
    }
}

struct Enumeration {
    kernel: Kernel,
    closed: Vec<usize>,
    /// Enumerated states with more than one feasible action, most significant first.
    digits: Vec<usize>,
    count: u128,
}

impl Enumeration {
    fn new(cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let kernel = Kernel::build(cfg);
        let closed = reachable_from_renewed(&kernel);
        let digits: Vec<usize> = closed
            .iter()
            .copied()
            .filter(|&i| kernel.choices(i).len() > 1)
            .collect();
        let count = digits
            .iter()
            .try_fold(1u128, |acc, &i| acc.checked_mul(kernel.choices(i).len() as u128))
            .unwrap_or(u128::MAX);
        if count > MAX_POLICIES {
            return Err(Error::TooLarge {
                count,
                limit: MAX_POLICIES,
            });
        }
        Ok(Enumeration {
            kernel,
            closed,
            digits,
            count,
        })
    }

    fn policy(&self, mut id: u128) -> PolicyTable {
        let mut policy =
            PolicyTable::new((0..self.kernel.len()).map(|i| self.kernel.choices(i)[0].action).collect());
        for &i in self.digits.iter().rev() {
            let choices = self.kernel.choices(i);
            let radix = choices.len() as u128;
            policy.set(i, choices[(id % radix) as usize].action);
            id /= radix;
        }
        policy
    }

    fn cost(&self, policy: &PolicyTable) -> Result<f64> {
        let stranded = unable_to_reach_renewed(&self.kernel, policy, &self.closed);
        if !stranded.is_empty() {
            let space = self.kernel.space();
            return Err(Error::Multichain {
                reference: State::RENEWED,
                states: stranded.into_iter().map(|i| space.state(i)).collect(),
            });
        }
        let occ = stationary_distribution(&policy_rows(&self.kernel, policy, &self.closed))?;
        Ok(self
            .closed
            .iter()
            .zip(&occ)
            .map(|(&i, &q)| q * chosen(&self.kernel, policy, i).cost)
            .sum())
    }
}

/// Number of policies a scan of `cfg` would visit, or a size error.
pub fn policy_count(cfg: &ModelConfig) -> Result<u128> {
    Enumeration::new(cfg).map(|e| e.count)
}

pub fn brute_force_optimal(cfg: &ModelConfig) -> Result<BruteForce> {
    let scan = Enumeration::new(cfg)?;
    let n = scan.kernel.len();

    #[derive(Clone)]
    struct Acc {
        best: (f64, u128),
        optima: Vec<[f64; 3]>,
    }
    let empty = || Acc {
        best: (f64::INFINITY, u128::MAX),
        optima: vec![[f64::INFINITY; 3]; n],
    };
    let better = |a: (f64, u128), b: (f64, u128)| match a.0.total_cmp(&b.0) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => a.1 < b.1,
    };

    let acc = (0..scan.count as u64)
        .into_par_iter()
        .try_fold(empty, |mut acc, id| -> Result<Acc> {
            let policy = scan.policy(u128::from(id));
            let cost = scan.cost(&policy)?;
            if better((cost, u128::from(id)), acc.best) {
                acc.best = (cost, u128::from(id));
            }
            for &i in &scan.closed {
                let slot = &mut acc.optima[i][policy.get(i) as usize];
                *slot = slot.min(cost);
            }
            Ok(acc)
        })
        .try_reduce(empty, |mut a, b| {
            if better(b.best, a.best) {
                a.best = b.best;
            }
            for (x, y) in a.optima.iter_mut().zip(&b.optima) {
                for k in 0..3 {
                    x[k] = x[k].min(y[k]);
                }
            }
            Ok(a)
        })?;

    let policy = scan.policy(acc.best.1);
    let best = evaluate_on_kernel(&scan.kernel, &policy)?;
    let mut in_scan = vec![false; n];
    for &i in &scan.closed {
        in_scan[i] = true;
    }
    let action_optima = acc
        .optima
        .into_iter()
        .enumerate()
        .map(|(i, row)| in_scan[i].then_some(row))
        .collect();
    Ok(BruteForce {
        best,
        best_id: acc.best.1,
        policies_evaluated: scan.count,
        action_optima,
    })
}

/// Average cost of every enumerated policy, indexed by policy id.
pub fn policy_costs(cfg: &ModelConfig) -> Result<Vec<f64>> {
    let scan = Enumeration::new(cfg)?;
    (0..scan.count as u64)
        .into_par_iter()
        .map(|id| scan.cost(&scan.policy(u128::from(id))))
        .collect()
}

/// Writes `policy_id,average_cost` rows.
pub fn write_audit_csv(path: &Path, costs: &[f64]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "policy_id,average_cost").map_err(io)?;
    for (id, cost) in costs.iter().enumerate() {
        writeln!(w, "{id},{cost}").map_err(io)?;
    }
    w.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{enumerate_states, feasible_actions, stage_cost, Profile};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small() -> ModelConfig {
        ModelConfig {
            max_level: 2,
            delta_max: 2,
            bucket_size: 1,
            wear_step: 2,
            renewal_slots: 1,
            tx_cost: 1.0,
            token_prob: 0.5,
            profile: Profile::Linear { p_hi: 0.9, p_lo: 0.1 },
            cost_cap_mode: Default::default(),
        }
    }

    #[test]
    fn doubly_stochastic_chain_has_uniform_occupancy() {
        let rows = vec![
            vec![(0, 0.5), (1, 0.25), (2, 0.25)],
            vec![(0, 0.25), (1, 0.5), (2, 0.25)],
            vec![(0, 0.25), (1, 0.25), (2, 0.5)],
        ];
        let pi = stationary_distribution(&rows).unwrap();
        for v in pi {
            assert_abs_diff_eq!(v, 1.0 / 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn disconnected_chain_is_rejected() {
        let rows = vec![vec![(0, 1.0)], vec![(1, 1.0)]];
        assert!(matches!(stationary_distribution(&rows), Err(Error::Stationary(_))));
    }

    #[test]
    fn deterministic_renewal_cycle() {
        // P_B = 1, B = 1: (1,1,0) --wait--> (2,2,1) --renew--> (1,1,0).
        let cfg = ModelConfig {
            max_level: 2,
            delta_max: 3,
            bucket_size: 1,
            wear_step: 2,
            renewal_slots: 2,
            tx_cost: 1.0,
            token_prob: 1.0,
            profile: Profile::Linear { p_hi: 0.9, p_lo: 0.1 },
            cost_cap_mode: Default::default(),
        };
        let space = enumerate_states(&cfg);
        let policy = PolicyTable::from_fn(space, |s| {
            if s.tokens == cfg.bucket_size {
                Action::Renew
            } else {
                Action::Wait
            }
        });
        let eval = evaluate_policy(&cfg, &policy).unwrap();
        // wait at (1,1,0) costs 1; renewing at (2,2,1) costs 2 + min(3,3) + min(4,3) = 8
        assert_abs_diff_eq!(eval.average_cost, 4.5, epsilon = 1e-12);
        assert_abs_diff_eq!(eval.occupancy[space.index(State::RENEWED)], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(eval.occupancy[space.index(State::new(2, 2, 1))], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn occupancy_weighted_cost_invariant() {
        let cfg = small();
        let space = enumerate_states(&cfg);
        let policy = PolicyTable::from_fn(space, |s| *feasible_actions(&cfg, s).last().unwrap());
        let eval = evaluate_policy(&cfg, &policy).unwrap();
        let total: f64 = eval.occupancy.iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-10);
        let weighted: f64 = space
            .iter()
            .enumerate()
            .map(|(i, s)| eval.occupancy[i] * stage_cost(&cfg, s, policy.get(i)))
            .sum();
        assert_abs_diff_eq!(eval.average_cost, weighted, epsilon = 1e-10);
    }

    #[test]
    fn multichain_policy_names_stranded_states() {
        let cfg = ModelConfig {
            token_prob: 0.0,
            ..small()
        };
        let space = enumerate_states(&cfg);
        let policy = PolicyTable::from_fn(space, |s| feasible_actions(&cfg, s)[0]);
        match evaluate_policy(&cfg, &policy) {
            Err(Error::Multichain { states, .. }) => {
                assert!(!states.is_empty());
                assert!(states.iter().all(|s| s.tokens == 0));
            }
            other => panic!("expected multichain error, got {other:?}"),
        }
    }

    #[test]
    fn infeasible_policy_is_rejected() {
        let cfg = small();
        let space = enumerate_states(&cfg);
        let policy = PolicyTable::from_fn(space, |_| Action::Renew);
        assert!(matches!(evaluate_policy(&cfg, &policy), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn small_scan_bounds_every_policy() {
        let cfg = small();
        let bf = brute_force_optimal(&cfg).unwrap();
        assert!(bf.policies_evaluated <= 3u128.pow(8));
        let costs = policy_costs(&cfg).unwrap();
        assert_eq!(costs.len() as u128, bf.policies_evaluated);
        let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(min, costs[bf.best_id as usize]);
        assert_abs_diff_eq!(bf.best.average_cost, min, epsilon = 1e-12);

        let kernel = Kernel::build(&cfg);
        for &c in &costs {
            assert!(c >= kernel.min_cost() - 1e-12 && c <= kernel.max_cost() + 1e-12);
        }
    }

    #[test]
    fn optimum_beats_random_policies() {
        let cfg = ModelConfig {
            max_level: 3,
            delta_max: 3,
            bucket_size: 2,
            renewal_slots: 2,
            ..small()
        };
        let bf = brute_force_optimal(&cfg).unwrap();
        let space = enumerate_states(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let policy = PolicyTable::from_fn(space, |s| {
                let acts = feasible_actions(&cfg, s);
                acts[rng.random_range(0..acts.len())]
            });
            let eval = evaluate_policy(&cfg, &policy).unwrap();
            assert!(bf.best.average_cost <= eval.average_cost + 1e-12);
        }
    }

    #[test]
    fn size_guard() {
        let err = brute_force_optimal(&ModelConfig::reference()).unwrap_err();
        assert!(matches!(err, Error::TooLarge { .. }));
    }

    #[test]
    fn audit_csv_has_one_row_per_policy() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("audit.csv");
        write_audit_csv(&path, &[4.5, 3.25]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "policy_id,average_cost\n0,4.5\n1,3.25\n");
    }
}
