//! Finite episodic MDPs over an explicit set of admissible state-action pairs.
//!
//! States, actions and pairs are dense integer indices. Steps are 0-based
//! throughout the crate: step `h` ranges over `0..horizon`, and value tables
//! carry an extra terminal layer `h = horizon` that is identically zero.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type StateId = usize;
pub type ActionId = usize;
pub type PairId = usize;

const ROW_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MdpError {
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("pair ({state}, {action}) is out of range")]
    PairOutOfRange { state: StateId, action: ActionId },
    #[error("pair ({state}, {action}) is listed twice")]
    DuplicatePair { state: StateId, action: ActionId },
    #[error("state {0} has no admissible action")]
    NoActions(StateId),
    #[error("expected {expected} {what}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("transition row of pair {pair} is invalid: {reason}")]
    InvalidRow { pair: PairId, reason: String },
    #[error("reward model of pair {pair} is invalid: {reason}")]
    InvalidReward { pair: PairId, reason: String },
    #[error("initial state specification is invalid: {0}")]
    InvalidInitialStates(String),
    #[error("state {0} is out of range")]
    StateOutOfRange(StateId),
    #[error("policy is undefined at state {state}, step {step}")]
    UndefinedPolicy { state: StateId, step: usize },
    #[error("pair ({state}, {action}) is not admissible")]
    NotAdmissible { state: StateId, action: ActionId },
    #[error("policy shape ({horizon} steps x {states} states) does not match the MDP")]
    PolicyShape { horizon: usize, states: usize },
}

/// The admissible state-action pairs together with index lookups.
#[derive(Debug, Clone, PartialEq)]
pub struct StateActionSpace {
    num_states: usize,
    num_actions: usize,
    pairs: Vec<(StateId, ActionId)>,
    lookup: Vec<Option<PairId>>,
    by_state: Vec<Vec<PairId>>,
}

impl StateActionSpace {
    pub fn new(
        num_states: usize,
        num_actions: usize,
        pairs: Vec<(StateId, ActionId)>,
    ) -> Result<Self, MdpError> {
        let mut lookup = vec![None; num_states * num_actions];
        let mut by_state = vec![Vec::new(); num_states];
        for (x, &(s, a)) in pairs.iter().enumerate() {
            if s >= num_states || a >= num_actions {
                return Err(MdpError::PairOutOfRange {
                    state: s,
                    action: a,
                });
            }
            let slot = &mut lookup[s * num_actions + a];
            if slot.is_some() {
                return Err(MdpError::DuplicatePair {
                    state: s,
                    action: a,
                });
            }
            *slot = Some(x);
            by_state[s].push(x);
        }
        for (s, xs) in by_state.iter_mut().enumerate() {
            if xs.is_empty() {
                return Err(MdpError::NoActions(s));
            }
            xs.sort_by_key(|&x| pairs[x].1);
        }
        Ok(Self {
            num_states,
            num_actions,
            pairs,
            lookup,
            by_state,
        })
    }

    /// Every state-action combination is admissible, pair index `s * A + a`.
    pub fn full(num_states: usize, num_actions: usize) -> Result<Self, MdpError> {
        let pairs = (0..num_states)
            .flat_map(|s| (0..num_actions).map(move |a| (s, a)))
            .collect();
        Self::new(num_states, num_actions, pairs)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn num_pairs(&self) -> usize {
        self.pairs.len()
    }

    pub fn pairs(&self) -> &[(StateId, ActionId)] {
        &self.pairs
    }

    pub fn pair(&self, x: PairId) -> (StateId, ActionId) {
        self.pairs[x]
    }

    pub fn index(&self, s: StateId, a: ActionId) -> Option<PairId> {
        if s >= self.num_states || a >= self.num_actions {
            return None;
        }
        self.lookup[s * self.num_actions + a]
    }

    /// Pairs available in `s`, ordered by action index.
    pub fn actions_at(&self, s: StateId) -> &[PairId] {
        &self.by_state[s]
    }
}

/// Reward distribution of one pair. All families are supported on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum RewardModel {
    Bernoulli { mean: f64 },
    /// Uniform on `[low, high]`.
    ScaledUniform { low: f64, high: f64 },
    Deterministic { value: f64 },
}

impl RewardModel {
    pub fn mean(&self) -> f64 {
        match *self {
            RewardModel::Bernoulli { mean } => mean,
            RewardModel::ScaledUniform { low, high } => 0.5 * (low + high),
            RewardModel::Deterministic { value } => value,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            RewardModel::Bernoulli { mean } => {
                if rng.gen::<f64>() < mean {
                    1.0
                } else {
                    0.0
                }
            }
            RewardModel::ScaledUniform { low, high } => low + (high - low) * rng.gen::<f64>(),
            RewardModel::Deterministic { value } => value,
        }
    }

    fn validate(&self) -> Result<(), String> {
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        match *self {
            RewardModel::Bernoulli { mean } if !in_unit(mean) => {
                Err(format!("Bernoulli mean {mean} outside [0, 1]"))
            }
            RewardModel::ScaledUniform { low, high } if !(in_unit(low) && in_unit(high) && low <= high) => {
                Err(format!("uniform support [{low}, {high}] not inside [0, 1]"))
            }
            RewardModel::Deterministic { value } if !in_unit(value) => {
                Err(format!("deterministic reward {value} outside [0, 1]"))
            }
            _ => Ok(()),
        }
    }
}

/// How the initial state of episode `k` is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialStates {
    Fixed { state: StateId },
    RoundRobin { states: Vec<StateId> },
    /// Drawn from the run's RNG with the given (unnormalized) weights.
    Categorical { weights: Vec<f64> },
}

impl InitialStates {
    /// Initial state for the 0-based episode index `k`.
    pub fn state_for<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> StateId {
        match self {
            InitialStates::Fixed { state } => *state,
            InitialStates::RoundRobin { states } => states[k % states.len()],
            InitialStates::Categorical { weights } => {
                let total: f64 = weights.iter().sum();
                let mut u = rng.gen::<f64>() * total;
                for (s, &w) in weights.iter().enumerate() {
                    if u < w {
                        return s;
                    }
                    u -= w;
                }
                weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
            }
        }
    }

    pub fn fixed_state(&self) -> Option<StateId> {
        match self {
            InitialStates::Fixed { state } => Some(*state),
            _ => None,
        }
    }

    fn validate(&self, num_states: usize) -> Result<(), MdpError> {
        let bad = |msg: String| Err(MdpError::InvalidInitialStates(msg));
        match self {
            InitialStates::Fixed { state } if *state >= num_states => {
                bad(format!("state {state} out of range"))
            }
            InitialStates::RoundRobin { states } if states.is_empty() => {
                bad("empty round-robin list".into())
            }
            InitialStates::RoundRobin { states } if states.iter().any(|&s| s >= num_states) => {
                bad("round-robin state out of range".into())
            }
            InitialStates::Categorical { weights } if weights.len() != num_states => bad(format!(
                "{} weights for {num_states} states",
                weights.len()
            )),
            InitialStates::Categorical { weights }
                if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0))
                    || weights.iter().sum::<f64>() <= 0.0 =>
            {
                bad("weights must be nonnegative with positive sum".into())
            }
            _ => Ok(()),
        }
    }
}

/// A finite episodic MDP. Immutable once built.
#[derive(Debug, Clone)]
pub struct TabularMdp {
    space: Arc<StateActionSpace>,
    horizon: usize,
    transitions: Vec<Vec<(StateId, f64)>>,
    rewards: Vec<RewardModel>,
    initial: InitialStates,
    support_bound: usize,
}

impl TabularMdp {
    /// Builds and validates an MDP. Transition rows are sparse `(next, prob)`
    /// lists; zero entries are dropped and rows are sorted by next state.
    pub fn new(
        space: StateActionSpace,
        horizon: usize,
        transitions: Vec<Vec<(StateId, f64)>>,
        rewards: Vec<RewardModel>,
        initial: InitialStates,
    ) -> Result<Self, MdpError> {
        if horizon == 0 {
            return Err(MdpError::ZeroHorizon);
        }
        let num_pairs = space.num_pairs();
        if transitions.len() != num_pairs {
            return Err(MdpError::LengthMismatch {
                what: "transition rows",
                expected: num_pairs,
                got: transitions.len(),
            });
        }
        if rewards.len() != num_pairs {
            return Err(MdpError::LengthMismatch {
                what: "reward models",
                expected: num_pairs,
                got: rewards.len(),
            });
        }
        let mut rows = Vec::with_capacity(num_pairs);
        for (x, row) in transitions.into_iter().enumerate() {
            rows.push(normalize_row(x, row, space.num_states())?);
        }
        for (x, r) in rewards.iter().enumerate() {
            r.validate()
                .map_err(|reason| MdpError::InvalidReward { pair: x, reason })?;
        }
        initial.validate(space.num_states())?;
        let support_bound = rows.iter().map(Vec::len).max().unwrap_or(0);
        Ok(Self {
            space: Arc::new(space),
            horizon,
            transitions: rows,
            rewards,
            initial,
            support_bound,
        })
    }

    pub fn space(&self) -> &StateActionSpace {
        &self.space
    }

    pub fn shared_space(&self) -> Arc<StateActionSpace> {
        Arc::clone(&self.space)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_states(&self) -> usize {
        self.space.num_states()
    }

    pub fn num_pairs(&self) -> usize {
        self.space.num_pairs()
    }

    pub fn transition(&self, x: PairId) -> &[(StateId, f64)] {
        &self.transitions[x]
    }

    pub fn reward_model(&self, x: PairId) -> &RewardModel {
        &self.rewards[x]
    }

    pub fn mean_reward(&self, x: PairId) -> f64 {
        self.rewards[x].mean()
    }

    pub fn initial_states(&self) -> &InitialStates {
        &self.initial
    }

    /// Same MDP with a different initial-state provider.
    pub fn with_initial_states(mut self, initial: InitialStates) -> Result<Self, MdpError> {
        initial.validate(self.num_states())?;
        self.initial = initial;
        Ok(self)
    }

    /// Largest transition support, the tightest valid `Ŝ`.
    pub fn support_bound(&self) -> usize {
        self.support_bound
    }

    /// `sum_{s'} P(s'|x) f(s')`.
    pub fn expectation(&self, x: PairId, f: &[f64]) -> f64 {
        self.transitions[x].iter().map(|&(s, p)| p * f[s]).sum()
    }

    pub fn sample_next_state<R: Rng + ?Sized>(&self, x: PairId, rng: &mut R) -> StateId {
        sample_row(&self.transitions[x], rng)
    }

    /// Draws `(r, s')` for pair `x`: reward first, then next state.
    pub fn sample_transition<R: Rng + ?Sized>(&self, x: PairId, rng: &mut R) -> (f64, StateId) {
        let r = self.rewards[x].sample(rng);
        (r, self.sample_next_state(x, rng))
    }
}

fn normalize_row(
    x: PairId,
    mut row: Vec<(StateId, f64)>,
    num_states: usize,
) -> Result<Vec<(StateId, f64)>, MdpError> {
    let invalid = |reason: String| MdpError::InvalidRow { pair: x, reason };
    for &(s, p) in &row {
        if s >= num_states {
            return Err(invalid(format!("next state {s} out of range")));
        }
        if !(p.is_finite() && p >= 0.0) {
            return Err(invalid(format!("probability {p} for state {s}")));
        }
    }
    row.retain(|&(_, p)| p > 0.0);
    row.sort_by_key(|&(s, _)| s);
    if row.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(invalid("repeated next state".into()));
    }
    let sum: f64 = row.iter().map(|&(_, p)| p).sum();
    if (sum - 1.0).abs() > ROW_TOLERANCE {
        return Err(invalid(format!("probabilities sum to {sum}")));
    }
    Ok(row)
}

pub(crate) fn sample_row<R: Rng + ?Sized>(row: &[(StateId, f64)], rng: &mut R) -> StateId {
    let mut u = rng.gen::<f64>();
    for &(s, p) in row {
        if u < p {
            return s;
        }
        u -= p;
    }
    row.last().map(|&(s, _)| s).expect("transition rows are nonempty")
}

/// Deterministic time-dependent policy `(state, step) -> action`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Policy {
    horizon: usize,
    num_states: usize,
    table: Vec<Option<ActionId>>,
}

impl Policy {
    pub fn undefined(horizon: usize, num_states: usize) -> Self {
        Self {
            horizon,
            num_states,
            table: vec![None; horizon * num_states],
        }
    }

    pub fn from_fn(
        horizon: usize,
        num_states: usize,
        mut f: impl FnMut(StateId, usize) -> Option<ActionId>,
    ) -> Self {
        let mut table = Vec::with_capacity(horizon * num_states);
        for h in 0..horizon {
            for s in 0..num_states {
                table.push(f(s, h));
            }
        }
        Self {
            horizon,
            num_states,
            table,
        }
    }

    /// Always plays the lowest admissible action.
    pub fn first_action(mdp: &TabularMdp) -> Self {
        let space = mdp.space();
        Self::from_fn(mdp.horizon(), mdp.num_states(), |s, _| {
            Some(space.pair(space.actions_at(s)[0]).1)
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn get(&self, s: StateId, h: usize) -> Option<ActionId> {
        self.table[h * self.num_states + s]
    }

    pub fn set(&mut self, s: StateId, h: usize, a: ActionId) {
        self.table[h * self.num_states + s] = Some(a);
    }

    pub fn table(&self) -> &[Option<ActionId>] {
        &self.table
    }

    /// Pair played at `(s, h)`, checked against the MDP.
    pub fn pair_at(&self, mdp: &TabularMdp, s: StateId, h: usize) -> Result<PairId, MdpError> {
        let a = self
            .get(s, h)
            .ok_or(MdpError::UndefinedPolicy { state: s, step: h })?;
        mdp.space()
            .index(s, a)
            .ok_or(MdpError::NotAdmissible { state: s, action: a })
    }

    fn check_shape(&self, mdp: &TabularMdp) -> Result<(), MdpError> {
        if self.horizon != mdp.horizon() || self.num_states != mdp.num_states() {
            return Err(MdpError::PolicyShape {
                horizon: self.horizon,
                states: self.num_states,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub state: StateId,
    pub action: ActionId,
    pub pair: PairId,
    pub reward: f64,
    pub next_state: StateId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub episode: usize,
    pub steps: Vec<Step>,
}

impl Trajectory {
    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }
}

/// `V` over `(h, s)` for `h in 0..=H` (last layer zero) and `Q` over `(h, x)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValueTables {
    horizon: usize,
    num_states: usize,
    num_pairs: usize,
    v: Vec<f64>,
    q: Vec<f64>,
}

impl ValueTables {
    pub(crate) fn zeros(horizon: usize, num_states: usize, num_pairs: usize) -> Self {
        Self {
            horizon,
            num_states,
            num_pairs,
            v: vec![0.0; (horizon + 1) * num_states],
            q: vec![0.0; horizon * num_pairs],
        }
    }

    pub fn v(&self, h: usize, s: StateId) -> f64 {
        self.v[h * self.num_states + s]
    }

    pub fn q(&self, h: usize, x: PairId) -> f64 {
        self.q[h * self.num_pairs + x]
    }

    /// The layer `V_h(·)` as a slice.
    pub fn v_layer(&self, h: usize) -> &[f64] {
        &self.v[h * self.num_states..(h + 1) * self.num_states]
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    fn set_v(&mut self, h: usize, s: StateId, value: f64) {
        self.v[h * self.num_states + s] = value;
    }

    fn set_q(&mut self, h: usize, x: PairId, value: f64) {
        self.q[h * self.num_pairs + x] = value;
    }
}

/// Samples one episode of `mdp` under `policy` from `s1`.
pub fn sample_episode<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    policy: &Policy,
    s1: StateId,
    rng: &mut R,
) -> Result<Trajectory, MdpError> {
    policy.check_shape(mdp)?;
    if s1 >= mdp.num_states() {
        return Err(MdpError::StateOutOfRange(s1));
    }
    let mut steps = Vec::with_capacity(mdp.horizon());
    let mut s = s1;
    for h in 0..mdp.horizon() {
        let x = policy.pair_at(mdp, s, h)?;
        let (reward, next_state) = mdp.sample_transition(x, rng);
        steps.push(Step {
            state: s,
            action: mdp.space().pair(x).1,
            pair: x,
            reward,
            next_state,
        });
        s = next_state;
    }
    Ok(Trajectory { episode: 0, steps })
}

/// Exact `V^π`, `Q^π` by backward recursion.
pub fn policy_value(mdp: &TabularMdp, policy: &Policy) -> Result<ValueTables, MdpError> {
    policy.check_shape(mdp)?;
    let space = mdp.space();
    let mut t = ValueTables::zeros(mdp.horizon(), mdp.num_states(), mdp.num_pairs());
    for h in (0..mdp.horizon()).rev() {
        for x in 0..mdp.num_pairs() {
            let q = mdp.mean_reward(x) + mdp.expectation(x, t.v_layer(h + 1));
            t.set_q(h, x, q);
        }
        for s in 0..mdp.num_states() {
            let x = policy.pair_at(mdp, s, h)?;
            debug_assert_eq!(space.pair(x).0, s);
            let q = t.q(h, x);
            t.set_v(h, s, q);
        }
    }
    Ok(t)
}

/// Exact `V*`, `Q*` and the greedy policy (lowest action index on ties).
pub fn optimal_values(mdp: &TabularMdp) -> (ValueTables, Policy) {
    let space = mdp.space();
    let mut t = ValueTables::zeros(mdp.horizon(), mdp.num_states(), mdp.num_pairs());
    let mut policy = Policy::undefined(mdp.horizon(), mdp.num_states());
    for h in (0..mdp.horizon()).rev() {
        for x in 0..mdp.num_pairs() {
            let q = mdp.mean_reward(x) + mdp.expectation(x, t.v_layer(h + 1));
            t.set_q(h, x, q);
        }
        for s in 0..mdp.num_states() {
            let (best, value) = argmax_lowest(space.actions_at(s), |x| t.q(h, x));
            policy.set(s, h, space.pair(best).1);
            t.set_v(h, s, value);
        }
    }
    (t, policy)
}

/// Values of the policy that picks uniformly among admissible actions.
pub fn uniform_random_values(mdp: &TabularMdp) -> ValueTables {
    let space = mdp.space();
    let mut t = ValueTables::zeros(mdp.horizon(), mdp.num_states(), mdp.num_pairs());
    for h in (0..mdp.horizon()).rev() {
        for x in 0..mdp.num_pairs() {
            let q = mdp.mean_reward(x) + mdp.expectation(x, t.v_layer(h + 1));
            t.set_q(h, x, q);
        }
        for s in 0..mdp.num_states() {
            let xs = space.actions_at(s);
            let v = xs.iter().map(|&x| t.q(h, x)).sum::<f64>() / xs.len() as f64;
            t.set_v(h, s, v);
        }
    }
    t
}

/// Occupancy `w_h(x) = P((s_h, a_h) = x | π, s_1)`, indexed `[h][x]`.
pub fn visit_probabilities(
    mdp: &TabularMdp,
    policy: &Policy,
    s1: StateId,
) -> Result<Vec<Vec<f64>>, MdpError> {
    policy.check_shape(mdp)?;
    if s1 >= mdp.num_states() {
        return Err(MdpError::StateOutOfRange(s1));
    }
    let mut state_dist = vec![0.0; mdp.num_states()];
    state_dist[s1] = 1.0;
    let mut out = Vec::with_capacity(mdp.horizon());
    for h in 0..mdp.horizon() {
        let mut w = vec![0.0; mdp.num_pairs()];
        let mut next = vec![0.0; mdp.num_states()];
        for (s, &mass) in state_dist.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let x = policy.pair_at(mdp, s, h)?;
            w[x] += mass;
            for &(s2, p) in mdp.transition(x) {
                next[s2] += mass * p;
            }
        }
        out.push(w);
        state_dist = next;
    }
    Ok(out)
}

/// First maximizer of `score` over `xs` (strict improvement required).
pub(crate) fn argmax_lowest(xs: &[PairId], score: impl Fn(PairId) -> f64) -> (PairId, f64) {
    let mut best = xs[0];
    let mut best_val = score(best);
    for &x in &xs[1..] {
        let v = score(x);
        if v > best_val {
            best = x;
            best_val = v;
        }
    }
    (best, best_val)
}
