//! State space, dynamics, transition kernel and stage cost of the wearing
//! channel with a token bucket.
//!
//! A state is the triple `(d, δ, b)`: channel deterioration level
//! `d ∈ {1..D}`, age of information `δ ∈ {1..Δ}` and bucket fill
//! `b ∈ {0..B}`. Each decision stage the transmitter waits, transmits a fresh
//! update, or (with a full bucket) renews the channel.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Success probability as a function of the deterioration level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProfile", into = "RawProfile")]
pub enum Profile {
    /// Evenly spaced from `p_hi` at `d = 1` down to `p_lo` at `d = D`.
    Linear { p_hi: f64, p_lo: f64 },
    /// `exp(alpha * d + beta)`.
    Exponential { alpha: f64, beta: f64 },
    /// Exponential decay through `p_hi` at `d = 1` and `p_lo` at `d = D`.
    ExponentialSpan { p_hi: f64, p_lo: f64 },
}

impl Profile {
    /// Linear decay used in the reference experiments.
    pub const LINEAR_REFERENCE: Profile = Profile::Linear {
        p_hi: 0.95,
        p_lo: 0.001,
    };
    /// Exponential decay used in the reference experiments.
    pub const EXPONENTIAL_REFERENCE: Profile = Profile::Exponential {
        alpha: -0.7618,
        beta: 0.7105,
    };

    pub fn kind(&self) -> &'static str {
        match self {
            Profile::Linear { .. } => "linear",
            Profile::Exponential { .. } | Profile::ExponentialSpan { .. } => "exponential",
        }
    }

    fn eval(&self, d: u32, max_level: u32) -> f64 {
        match *self {
            Profile::Linear { p_hi, p_lo } => {
                if max_level == 1 {
                    p_hi
                } else {
                    let t = f64::from(d - 1) / f64::from(max_level - 1);
                    p_hi + (p_lo - p_hi) * t
                }
            }
            Profile::Exponential { alpha, beta } => (alpha * f64::from(d) + beta).exp(),
            Profile::ExponentialSpan { p_hi, p_lo } => {
                if max_level == 1 {
                    p_hi
                } else {
                    let alpha = (p_lo / p_hi).ln() / f64::from(max_level - 1);
                    p_hi * (alpha * f64::from(d - 1)).exp()
                }
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RawProfile {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p_hi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p_lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
}

impl TryFrom<RawProfile> for Profile {
    type Error = String;

    fn try_from(raw: RawProfile) -> std::result::Result<Self, String> {
        match (raw.kind.as_str(), raw.p_hi, raw.p_lo, raw.alpha, raw.beta) {
            ("linear", Some(p_hi), Some(p_lo), None, None) => Ok(Profile::Linear { p_hi, p_lo }),
            ("exponential", None, None, Some(alpha), Some(beta)) => {
                Ok(Profile::Exponential { alpha, beta })
            }
            ("exponential", Some(p_hi), Some(p_lo), None, None) => {
                Ok(Profile::ExponentialSpan { p_hi, p_lo })
            }
            ("linear", ..) => Err("linear profile needs exactly p_hi and p_lo".into()),
            ("exponential", ..) => {
                Err("exponential profile needs either alpha and beta or p_hi and p_lo".into())
            }
            (other, ..) => Err(format!("unknown profile kind {other:?}")),
        }
    }
}

impl From<Profile> for RawProfile {
    fn from(p: Profile) -> Self {
        let mut raw = RawProfile {
            kind: p.kind().to_string(),
            p_hi: None,
            p_lo: None,
            alpha: None,
            beta: None,
        };
        match p {
            Profile::Linear { p_hi, p_lo } | Profile::ExponentialSpan { p_hi, p_lo } => {
                raw.p_hi = Some(p_hi);
                raw.p_lo = Some(p_lo);
            }
            Profile::Exponential { alpha, beta } => {
                raw.alpha = Some(alpha);
                raw.beta = Some(beta);
            }
        }
        raw
    }
}

/// How the renewal term of the stage cost treats AoI increments during restoration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostCapMode {
    /// Each restoration slot costs `min(δ + i, Δ)`.
    #[default]
    Capped,
    /// Each restoration slot costs `max(δ + i, Δ)`, as the formula is printed.
    Literal,
}

fn default_tx_cost() -> f64 {
    1.0
}

/// Model parameters. JSON keys follow the usual symbols (`D`, `B`, `T_D`, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Maximum deterioration level `D`.
    #[serde(rename = "D")]
    pub max_level: u32,
    /// Maximum age of information `Δ`.
    pub delta_max: u32,
    /// Token bucket capacity `B`.
    #[serde(rename = "B")]
    pub bucket_size: u32,
    /// Deterioration added by one transmission, `T_D`.
    #[serde(rename = "T_D")]
    pub wear_step: u32,
    /// Slots taken by a channel restoration, `T_A`.
    #[serde(rename = "T_A")]
    pub renewal_slots: u32,
    /// Cost `c` charged per transmission.
    #[serde(rename = "c", default = "default_tx_cost")]
    pub tx_cost: f64,
    /// Per-slot token arrival probability `P_B`.
    #[serde(rename = "P_B")]
    pub token_prob: f64,
    pub profile: Profile,
    #[serde(default)]
    pub cost_cap_mode: CostCapMode,
}

impl ModelConfig {
    /// The reference configuration: a slow token supply (`P_B = 0.1`) and linear decay.
    pub fn reference() -> Self {
        ModelConfig {
            max_level: 10,
            delta_max: 10,
            bucket_size: 8,
            wear_step: 2,
            renewal_slots: 4,
            tx_cost: 1.0,
            token_prob: 0.1,
            profile: Profile::LINEAR_REFERENCE,
            cost_cap_mode: CostCapMode::Capped,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ModelConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.max_level < 1 {
            return bad("D must be at least 1".into());
        }
        if self.delta_max < 1 {
            return bad("delta_max must be at least 1".into());
        }
        if self.bucket_size < 1 {
            return bad("B must be at least 1".into());
        }
        if self.wear_step < 2 {
            return bad(format!("T_D must exceed 1, got {}", self.wear_step));
        }
        if self.renewal_slots < 1 {
            return bad("T_A must be at least 1".into());
        }
        if !(self.tx_cost.is_finite() && self.tx_cost >= 0.0) {
            return bad(format!("c must be a nonnegative real, got {}", self.tx_cost));
        }
        if !(0.0..=1.0).contains(&self.token_prob) {
            return bad(format!("P_B must lie in [0, 1], got {}", self.token_prob));
        }
        let mut prev = f64::INFINITY;
        for d in 1..=self.max_level {
            let p = self.profile.eval(d, self.max_level);
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("P_s({d}) = {p} is not a probability"));
            }
            if p > prev {
                return bad(format!("P_s must be nonincreasing in d, but P_s({d}) = {p} > {prev}"));
            }
            prev = p;
        }
        let p1 = self.profile.eval(1, self.max_level);
        if p1 >= 1.0 {
            return bad(format!("P_s(1) must be below 1, got {p1}"));
        }
        Ok(())
    }

    /// Number of states `D · Δ · (B + 1)`.
    pub fn num_states(&self) -> usize {
        self.max_level as usize * self.delta_max as usize * (self.bucket_size as usize + 1)
    }

    /// The state where renewal is mandatory, `(D, Δ, B)`.
    pub fn saturated_state(&self) -> State {
        State::new(self.max_level, self.delta_max, self.bucket_size)
    }

    pub fn contains(&self, s: State) -> bool {
        (1..=self.max_level).contains(&s.level)
            && (1..=self.delta_max).contains(&s.age)
            && s.tokens <= self.bucket_size
    }

    pub(crate) fn success_prob_unchecked(&self, d: u32) -> f64 {
        self.profile.eval(d, self.max_level)
    }
}

/// System state `(d, δ, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "(u32, u32, u32)", into = "(u32, u32, u32)")]
pub struct State {
    /// Deterioration level `d`.
    pub level: u32,
    /// Age of information `δ`.
    pub age: u32,
    /// Tokens in the bucket `b`.
    pub tokens: u32,
}

impl State {
    /// State reached right after a renewal, `(1, 1, 0)`.
    pub const RENEWED: State = State {
        level: 1,
        age: 1,
        tokens: 0,
    };

    pub const fn new(level: u32, age: u32, tokens: u32) -> Self {
        State { level, age, tokens }
    }
}

impl From<(u32, u32, u32)> for State {
    fn from((level, age, tokens): (u32, u32, u32)) -> Self {
        State::new(level, age, tokens)
    }
}

impl From<State> for (u32, u32, u32) {
    fn from(s: State) -> Self {
        (s.level, s.age, s.tokens)
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.level, self.age, self.tokens)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Action {
    Wait = 0,
    Transmit = 1,
    Renew = 2,
}

impl Action {
    pub const ALL: [Action; 3] = [Action::Wait, Action::Transmit, Action::Renew];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Action> {
        Action::ALL.get(code as usize).copied()
    }
}

impl From<Action> for u8 {
    fn from(a: Action) -> u8 {
        a.code()
    }
}

impl TryFrom<u8> for Action {
    type Error = String;

    fn try_from(code: u8) -> std::result::Result<Self, String> {
        Action::from_code(code).ok_or_else(|| format!("invalid action code {code}"))
    }
}

/// Bijection between states and `0..n`, ordered by `d`, then `δ`, then `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateIndex {
    max_level: u32,
    delta_max: u32,
    bucket_size: u32,
}

impl StateIndex {
    pub fn len(&self) -> usize {
        self.max_level as usize * self.delta_max as usize * (self.bucket_size as usize + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Index of `s`. `s` must be a valid state of the configuration.
    pub fn index(&self, s: State) -> usize {
        debug_assert!(s.level >= 1 && s.level <= self.max_level);
        debug_assert!(s.age >= 1 && s.age <= self.delta_max);
        debug_assert!(s.tokens <= self.bucket_size);
        let b1 = self.bucket_size as usize + 1;
        ((s.level as usize - 1) * self.delta_max as usize + (s.age as usize - 1)) * b1
            + s.tokens as usize
    }

    pub fn state(&self, index: usize) -> State {
        debug_assert!(index < self.len());
        let b1 = self.bucket_size as usize + 1;
        let tokens = (index % b1) as u32;
        let rest = index / b1;
        let age = (rest % self.delta_max as usize) as u32 + 1;
        let level = (rest / self.delta_max as usize) as u32 + 1;
        State::new(level, age, tokens)
    }

    pub fn try_index(&self, s: State) -> Result<usize> {
        check_range("d", s.level, 1, self.max_level)?;
        check_range("delta", s.age, 1, self.delta_max)?;
        check_range("b", s.tokens, 0, self.bucket_size)?;
        Ok(self.index(s))
    }

    pub fn iter(&self) -> impl Iterator<Item = State> + '_ {
        (0..self.len()).map(move |i| self.state(i))
    }
}

fn check_range(what: &'static str, value: u32, lo: u32, hi: u32) -> Result<()> {
    if value < lo || value > hi {
        return Err(Error::Domain {
            what,
            value: value.into(),
            lo: lo.into(),
            hi: hi.into(),
        });
    }
    Ok(())
}

pub fn enumerate_states(cfg: &ModelConfig) -> StateIndex {
    StateIndex {
        max_level: cfg.max_level,
        delta_max: cfg.delta_max,
        bucket_size: cfg.bucket_size,
    }
}

/// Transmission success probability `P_s(d)`.
pub fn success_prob(cfg: &ModelConfig, d: u32) -> Result<f64> {
    check_range("d", d, 1, cfg.max_level)?;
    Ok(cfg.success_prob_unchecked(d))
}

/// Actions available in `s`, in increasing action-code order.
pub fn feasible_actions(cfg: &ModelConfig, s: State) -> &'static [Action] {
    if s.tokens < cfg.bucket_size {
        &[Action::Wait, Action::Transmit]
    } else if s == cfg.saturated_state() {
        &[Action::Renew]
    } else {
        &Action::ALL
    }
}

pub fn is_feasible(cfg: &ModelConfig, s: State, a: Action) -> bool {
    feasible_actions(cfg, s).contains(&a)
}

pub fn next_deterioration(cfg: &ModelConfig, d: u32, a: Action) -> u32 {
    match a {
        Action::Wait => (d + 1).min(cfg.max_level),
        Action::Transmit => (d + cfg.wear_step).min(cfg.max_level),
        Action::Renew => 1,
    }
}

/// Applies the dynamics for one realization of the transmission outcome and
/// token arrival. Both flags are ignored where they do not apply.
pub fn step(cfg: &ModelConfig, s: State, a: Action, delivered: bool, token: bool) -> State {
    if a == Action::Renew {
        return State::RENEWED;
    }
    let level = next_deterioration(cfg, s.level, a);
    let age = if a == Action::Transmit && delivered {
        1
    } else {
        (s.age + 1).min(cfg.delta_max)
    };
    let tokens = if token {
        (s.tokens + 1).min(cfg.bucket_size)
    } else {
        s.tokens
    };
    State::new(level, age, tokens)
}

/// Successor distribution over distinct states, zero-probability branches dropped.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TransitionDistribution {
    pub entries: Vec<(State, f64)>,
}

impl TransitionDistribution {
    fn push(&mut self, s: State, p: f64) {
        if p <= 0.0 {
            return;
        }
        match self.entries.iter_mut().find(|(t, _)| *t == s) {
            // Merged branches can overshoot 1 by an ulp; keep entries in (0, 1].
            Some((_, q)) => *q = (*q + p).min(1.0),
            None => self.entries.push((s, p)),
        }
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|(_, p)| p).sum()
    }

    pub fn prob(&self, s: State) -> f64 {
        self.entries
            .iter()
            .find(|(t, _)| *t == s)
            .map_or(0.0, |(_, p)| *p)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (State, f64)> + '_ {
        self.entries.iter().copied()
    }
}

pub fn transitions(cfg: &ModelConfig, s: State, a: Action) -> Result<TransitionDistribution> {
    if !is_feasible(cfg, s, a) {
        return Err(Error::Infeasible { state: s, action: a });
    }
    let mut dist = TransitionDistribution::default();
    let pb = cfg.token_prob;
    match a {
        Action::Renew => dist.push(State::RENEWED, 1.0),
        Action::Wait => {
            dist.push(step(cfg, s, a, false, true), pb);
            dist.push(step(cfg, s, a, false, false), 1.0 - pb);
        }
        Action::Transmit => {
            let ps = cfg.success_prob_unchecked(s.level);
            dist.push(step(cfg, s, a, true, true), ps * pb);
            dist.push(step(cfg, s, a, true, false), ps * (1.0 - pb));
            dist.push(step(cfg, s, a, false, true), (1.0 - ps) * pb);
            dist.push(step(cfg, s, a, false, false), (1.0 - ps) * (1.0 - pb));
        }
    }
    Ok(dist)
}

/// Stage cost `g(s, a)`. `a` is assumed feasible in `s`.
pub fn stage_cost(cfg: &ModelConfig, s: State, a: Action) -> f64 {
    let age = f64::from(s.age);
    match a {
        Action::Wait => age,
        Action::Transmit => age + cfg.tx_cost,
        Action::Renew => {
            let restoration: u32 = (1..=cfg.renewal_slots)
                .map(|i| match cfg.cost_cap_mode {
                    CostCapMode::Capped => (s.age + i).min(cfg.delta_max),
                    CostCapMode::Literal => (s.age + i).max(cfg.delta_max),
                })
                .sum();
            age + f64::from(restoration)
        }
    }
}

/// One feasible action of a state with its cost and successor indices.
#[derive(Debug, Clone)]
pub struct Choice {
    pub action: Action,
    pub cost: f64,
    start: usize,
    end: usize,
}

/// Tabulated model: every feasible `(state, action)` with stage cost and
/// merged successors, addressed by [`StateIndex`].
#[derive(Debug, Clone)]
pub struct Kernel {
    space: StateIndex,
    offsets: Vec<usize>,
    choices: Vec<Choice>,
    successors: Vec<(usize, f64)>,
}

impl Kernel {
    pub fn build(cfg: &ModelConfig) -> Self {
        let space = enumerate_states(cfg);
        let mut offsets = Vec::with_capacity(space.len() + 1);
        let mut choices = Vec::new();
        let mut successors = Vec::new();
        for s in space.iter() {
            offsets.push(choices.len());
            for &a in feasible_actions(cfg, s) {
                let dist = transitions(cfg, s, a).expect("feasible by construction");
                let start = successors.len();
                successors.extend(dist.iter().map(|(t, p)| (space.index(t), p)));
                choices.push(Choice {
                    action: a,
                    cost: stage_cost(cfg, s, a),
                    start,
                    end: successors.len(),
                });
            }
        }
        offsets.push(choices.len());
        Kernel {
            space,
            offsets,
            choices,
            successors,
        }
    }

    pub fn space(&self) -> StateIndex {
        self.space
    }

    pub fn len(&self) -> usize {
        self.space.len()
    }

    pub fn is_empty(&self) -> bool {
        self.space.is_empty()
    }

    /// Feasible choices at state index `i`, ordered by action code.
    pub fn choices(&self, i: usize) -> &[Choice] {
        &self.choices[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn choice(&self, i: usize, a: Action) -> Option<&Choice> {
        self.choices(i).iter().find(|c| c.action == a)
    }

    pub fn successors(&self, choice: &Choice) -> &[(usize, f64)] {
        &self.successors[choice.start..choice.end]
    }

    /// Adds `kappa` to every stage cost.
    pub fn shift_costs(&mut self, kappa: f64) {
        for c in &mut self.choices {
            c.cost += kappa;
        }
    }

    pub fn min_cost(&self) -> f64 {
        self.choices.iter().map(|c| c.cost).fold(f64::INFINITY, f64::min)
    }

    pub fn max_cost(&self) -> f64 {
        self.choices.iter().map(|c| c.cost).fold(f64::NEG_INFINITY, f64::max)
    }
}
