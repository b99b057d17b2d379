//! Optimistic planning: backward value iteration with confidence bonuses,
//! producing a greedy policy together with upper and lower value bounds.

use std::sync::Arc;

use serde::Serialize;

use crate::graph::Observation;
use crate::mdp::{argmax_lowest, PairId, Policy, StateActionSpace, StateId, TabularMdp};

/// Per-pair empirical statistics.
#[derive(Debug, Clone)]
pub struct ModelStats {
    space: Arc<StateActionSpace>,
    n: Vec<u64>,
    r_mean: Vec<f64>,
    r_sq_mean: Vec<f64>,
    bias_mean: Vec<f64>,
    /// Sparse next-state counts sorted by state; `P̂ = counts / n`.
    next: Vec<Vec<(StateId, u64)>>,
}

impl ModelStats {
    pub fn new(space: Arc<StateActionSpace>) -> Self {
        let x = space.num_pairs();
        Self {
            space,
            n: vec![0; x],
            r_mean: vec![0.0; x],
            r_sq_mean: vec![0.0; x],
            bias_mean: vec![0.0; x],
            next: vec![Vec::new(); x],
        }
    }

    pub fn for_mdp(mdp: &TabularMdp) -> Self {
        Self::new(mdp.shared_space())
    }

    pub fn space(&self) -> &StateActionSpace {
        &self.space
    }

    pub fn num_pairs(&self) -> usize {
        self.n.len()
    }

    pub fn record(&mut self, o: &Observation) {
        self.record_many(o, 1);
    }

    /// Records `times` identical copies of `o` at once.
    pub fn record_many(&mut self, o: &Observation, times: u64) {
        if times == 0 {
            return;
        }
        let x = o.pair;
        self.n[x] += times;
        let n = self.n[x] as f64;
        let add = times as f64 / n;
        let keep = 1.0 - add;
        self.r_mean[x] = keep * self.r_mean[x] + add * o.reward;
        self.r_sq_mean[x] = keep * self.r_sq_mean[x] + add * o.reward * o.reward;
        self.bias_mean[x] = keep * self.bias_mean[x] + add * o.bias;
        let row = &mut self.next[x];
        match row.binary_search_by_key(&o.next_state, |e| e.0) {
            Ok(i) => row[i].1 += times,
            Err(i) => row.insert(i, (o.next_state, times)),
        }
    }

    pub fn count(&self, x: PairId) -> u64 {
        self.n[x]
    }

    pub fn mean_reward(&self, x: PairId) -> f64 {
        self.r_mean[x]
    }

    pub fn mean_sq_reward(&self, x: PairId) -> f64 {
        self.r_sq_mean[x]
    }

    pub fn mean_bias(&self, x: PairId) -> f64 {
        self.bias_mean[x]
    }

    pub fn total_count(&self) -> u64 {
        self.n.iter().sum()
    }

    /// Empirical kernel as sparse `(state, prob)`; `e₁` (state 0) before any data.
    pub fn p_hat(&self, x: PairId) -> Vec<(StateId, f64)> {
        if self.n[x] == 0 {
            return vec![(0, 1.0)];
        }
        let n = self.n[x] as f64;
        self.next[x].iter().map(|&(s, c)| (s, c as f64 / n)).collect()
    }

    /// `(P̂f, P̂f², P̂g)` in one pass.
    fn moments(&self, x: PairId, f: &[f64], g: &[f64]) -> (f64, f64, f64) {
        if self.n[x] == 0 {
            return (f[0], f[0] * f[0], g[0]);
        }
        let n = self.n[x] as f64;
        let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
        for &(s, cnt) in &self.next[x] {
            let p = cnt as f64 / n;
            a += p * f[s];
            b += p * f[s] * f[s];
            c += p * g[s];
        }
        (a, b, c)
    }
}

/// Known bounds on `Q_h(x)` and `V_{h+1}` after `x`.
#[derive(Debug, Clone, PartialEq)]
pub enum ValueBounds {
    /// `H − h + 1` (1-based steps) for both bounds.
    HorizonDefault,
    /// Explicit tables indexed `h * |X| + x` (0-based `h`).
    Table { q_max: Vec<f64>, v_max: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceConfig {
    pub delta: f64,
    pub support_bound: usize,
    pub horizon: usize,
    pub num_pairs: usize,
    pub value_bounds: ValueBounds,
}

impl ConfidenceConfig {
    pub fn new(delta: f64, support_bound: usize, horizon: usize, num_pairs: usize) -> Self {
        Self {
            delta,
            support_bound,
            horizon,
            num_pairs,
            value_bounds: ValueBounds::HorizonDefault,
        }
    }

    pub fn for_mdp(mdp: &TabularMdp, delta: f64) -> Self {
        Self::new(delta, mdp.support_bound(), mdp.horizon(), mdp.num_pairs())
    }

    pub fn with_value_bounds(mut self, bounds: ValueBounds) -> Self {
        self.value_bounds = bounds;
        self
    }

    /// `Q^max_h(x)` for 0-based `h`.
    pub fn q_max(&self, h: usize, x: PairId) -> f64 {
        match &self.value_bounds {
            ValueBounds::HorizonDefault => (self.horizon - h) as f64,
            ValueBounds::Table { q_max, .. } => q_max[h * self.num_pairs + x],
        }
    }

    /// Bound on the value after playing `x` at 0-based step `h`.
    ///
    /// The default is `H − h + 1` (1-based), the same number as `Q^max_h`:
    /// with the tighter `H − h` the bonus would vanish at the last step for
    /// unvisited pairs and the upper bound would not be optimistic.
    pub fn v_next_max(&self, h: usize, x: PairId) -> f64 {
        match &self.value_bounds {
            ValueBounds::HorizonDefault => (self.horizon - h) as f64,
            ValueBounds::Table { v_max, .. } => v_max[h * self.num_pairs + x],
        }
    }

    /// The `ln(5.2·|X|·(4Ŝ + 5H + 7)/δ)` block of `φ`.
    fn log_term(&self) -> f64 {
        let s = self.support_bound as f64;
        let h = self.horizon as f64;
        (5.2 * self.num_pairs as f64 * (4.0 * s + 5.0 * h + 7.0) / self.delta).ln()
    }
}

/// `φ(n) = 1 ∧ √((0.52/n)(1.4 ln ln(e ∨ 2n) + ln(5.2|X|(4Ŝ+5H+7)/δ)))`, `φ(0) = 1`.
pub fn phi(n: u64, cfg: &ConfidenceConfig) -> f64 {
    phi_with(n, cfg.log_term())
}

fn phi_with(n: u64, log_term: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let n = n as f64;
    let lnln = (2.0 * n).max(std::f64::consts::E).ln().ln();
    let v = (0.52 / n) * (1.4 * lnln + log_term);
    v.sqrt().min(1.0)
}

/// `ψ_h(x)` for given next-step bounds.
pub fn bonus(
    x: PairId,
    h: usize,
    stats: &ModelStats,
    v_upper_next: &[f64],
    v_lower_next: &[f64],
    cfg: &ConfidenceConfig,
) -> f64 {
    let (pu, pu2, pl) = stats.moments(x, v_upper_next, v_lower_next);
    bonus_from(x, h, stats, pu, pu2, pl, phi(stats.count(x), cfg), cfg)
}

#[allow(clippy::too_many_arguments)]
fn bonus_from(
    x: PairId,
    h: usize,
    stats: &ModelStats,
    pv_up: f64,
    pv_up_sq: f64,
    pv_lo: f64,
    phi_n: f64,
    cfg: &ConfidenceConfig,
) -> f64 {
    let big_h = cfg.horizon as f64;
    let r = stats.mean_reward(x);
    let eps = stats.mean_bias(x);
    let reward_sd = (stats.mean_sq_reward(x) - r * r).max(0.0).sqrt();
    let next_sd = (pv_up_sq - pv_up * pv_up).max(0.0).sqrt();
    let eta = reward_sd + 2.0 * eps.sqrt() * big_h + next_sd;
    4.0 * eta * phi_n
        + 53.0 * cfg.support_bound as f64 * big_h * cfg.v_next_max(h, x) * phi_n * phi_n
        + (pv_up - pv_lo) / big_h
        + (big_h + 1.0) * eps
}

#[derive(Debug, Clone, Serialize)]
pub struct PlanResult {
    pub policy: Policy,
    horizon: usize,
    num_states: usize,
    num_pairs: usize,
    v_upper: Vec<f64>,
    v_lower: Vec<f64>,
    q_upper: Vec<f64>,
    q_lower: Vec<f64>,
}

impl PlanResult {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn v_upper(&self, h: usize, s: StateId) -> f64 {
        self.v_upper[h * self.num_states + s]
    }

    pub fn v_lower(&self, h: usize, s: StateId) -> f64 {
        self.v_lower[h * self.num_states + s]
    }

    pub fn q_upper(&self, h: usize, x: PairId) -> f64 {
        self.q_upper[h * self.num_pairs + x]
    }

    pub fn q_lower(&self, h: usize, x: PairId) -> f64 {
        self.q_lower[h * self.num_pairs + x]
    }

    /// `(V̰₁(s), Ṽ₁(s))`.
    pub fn certificate(&self, s: StateId) -> (f64, f64) {
        (self.v_lower(0, s), self.v_upper(0, s))
    }

    pub fn width(&self, s: StateId) -> f64 {
        self.v_upper(0, s) - self.v_lower(0, s)
    }
}

pub fn optimistic_plan(stats: &ModelStats, cfg: &ConfidenceConfig) -> PlanResult {
    let space = stats.space();
    let (ns, nx, big_h) = (space.num_states(), space.num_pairs(), cfg.horizon);
    let log_term = cfg.log_term();
    let phis: Vec<f64> = (0..nx).map(|x| phi_with(stats.count(x), log_term)).collect();
    let mut out = PlanResult {
        policy: Policy::undefined(big_h, ns),
        horizon: big_h,
        num_states: ns,
        num_pairs: nx,
        v_upper: vec![0.0; (big_h + 1) * ns],
        v_lower: vec![0.0; (big_h + 1) * ns],
        q_upper: vec![0.0; big_h * nx],
        q_lower: vec![0.0; big_h * nx],
    };
    for h in (0..big_h).rev() {
        let (cur, next) = ((h * ns), ((h + 1) * ns));
        for x in 0..nx {
            let vu = &out.v_upper[next..next + ns];
            let vl = &out.v_lower[next..next + ns];
            let (pu, pu2, pl) = stats.moments(x, vu, vl);
            let psi = bonus_from(x, h, stats, pu, pu2, pl, phis[x], cfg);
            let qmax = cfg.q_max(h, x);
            let r = stats.mean_reward(x);
            out.q_upper[h * nx + x] = (r + pu + psi).min(qmax).max(0.0);
            out.q_lower[h * nx + x] = (r + pl - psi).min(qmax).max(0.0);
        }
        for s in 0..ns {
            let xs = space.actions_at(s);
            let (best, vu) = argmax_lowest(xs, |x| out.q_upper[h * nx + x]);
            out.policy.set(s, h, space.pair(best).1);
            out.v_upper[cur + s] = vu;
            out.v_lower[cur + s] = out.q_lower[h * nx + best];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_pair_stats(rewards: &[f64]) -> ModelStats {
        let space = Arc::new(StateActionSpace::full(1, 1).unwrap());
        let mut stats = ModelStats::new(space);
        for &r in rewards {
            stats.record(&Observation {
                pair: 0,
                reward: r,
                next_state: 0,
                bias: 0.0,
            });
        }
        stats
    }

    #[test]
    fn phi_is_capped() {
        let cfg = ConfidenceConfig::new(0.1, 2, 3, 4);
        assert_eq!(phi(0, &cfg), 1.0);
        for n in [1, 2, 10, 1000, 1 << 40] {
            assert!(phi(n, &cfg) <= 1.0);
        }
    }

    #[test]
    fn phi_closed_form_hand_value() {
        // |X|=4, Ŝ=2, H=3, δ=0.1, n=100:
        // 4Ŝ+5H+7 = 30: sqrt(0.0052·(1.4·ln ln 200 + ln(5.2·4·30/0.1))),
        // evaluated independently in double precision
        let cfg = ConfidenceConfig::new(0.1, 2, 3, 4);
        let v = phi(100, &cfg);
        assert!((v - 0.239_958_368_151_393_87).abs() < 1e-12, "{v}");
    }

    #[test]
    fn unvisited_bonus_dominated_by_support_term() {
        let cfg = ConfidenceConfig::new(0.1, 2, 3, 1);
        let stats = single_pair_stats(&[]);
        let psi = bonus(0, 0, &stats, &[0.0], &[0.0], &cfg);
        assert!(psi >= 53.0 * 2.0 * 3.0 * 3.0);
    }

    #[test]
    fn bias_contribution() {
        let space = Arc::new(StateActionSpace::full(1, 1).unwrap());
        let mut stats = ModelStats::new(space);
        stats.record(&Observation {
            pair: 0,
            reward: 0.0,
            next_state: 0,
            bias: 0.2,
        });
        let cfg = ConfidenceConfig::new(0.1, 1, 3, 1);
        let p = phi(1, &cfg);
        let expected = 4.0 * (2.0 * 0.2f64.sqrt() * 3.0) * p + 53.0 * 3.0 * 3.0 * p * p + 0.8;
        assert!((bonus(0, 0, &stats, &[0.0], &[0.0], &cfg) - expected).abs() < 1e-12);
    }

    #[test]
    fn no_data_plan_is_trivial() {
        let space = Arc::new(StateActionSpace::full(3, 2).unwrap());
        let stats = ModelStats::new(space);
        let cfg = ConfidenceConfig::new(0.1, 3, 4, 6);
        let plan = optimistic_plan(&stats, &cfg);
        for s in 0..3 {
            assert_eq!(plan.certificate(s), (0.0, 4.0));
        }
    }

    #[test]
    fn single_pair_plan_composes_bonus() {
        let rewards: Vec<f64> = (0..100).map(|i| (i % 2) as f64).collect();
        let stats = single_pair_stats(&rewards);
        let cfg = ConfidenceConfig::new(0.1, 1, 1, 1);
        let psi = bonus(0, 0, &stats, &[0.0], &[0.0], &cfg);
        let plan = optimistic_plan(&stats, &cfg);
        assert!((plan.q_upper(0, 0) - (0.5 + psi).min(1.0)).abs() < 1e-12);
        assert!((plan.q_lower(0, 0) - (0.5 - psi).max(0.0)).abs() < 1e-12);
    }

    #[test]
    fn p_hat_starts_at_first_state() {
        let space = Arc::new(StateActionSpace::full(3, 1).unwrap());
        let stats = ModelStats::new(space);
        assert_eq!(stats.p_hat(2), vec![(0, 1.0)]);
    }
}
