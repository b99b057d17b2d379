//! Seeded runs, trace/summary CSVs and the validity checks behind the exit code.

use std::path::Path;
use std::time::Instant;

use fgrl_core::agent::{
    run_until_certificate_with_observer, run_with_observer, random_policy, AgentConfig,
    PolicyEvaluator,
};
use fgrl_core::domset::{run_domset_with_observer, DomSetConfig};
use fgrl_core::mdp::{optimal_values, policy_value, sample_episode, Policy, RewardModel, TabularMdp};
use fgrl_core::multitask::{run_multitask_with_observer, TaskReward, TaskSpec};
use fgrl_core::planner::PlanResult;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{AgentSpec, ExperimentConfig, StopRule};
use crate::instance::{build_instance, BuiltInstance};

const TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub episode: usize,
    /// Dominating-set phase (1 or 2); 0 for other agents.
    pub phase: u8,
    /// Task whose copy the episode started in; 0 is the environment task.
    pub task: usize,
    pub s1: usize,
    pub cert_lo: f64,
    pub cert_hi: f64,
    pub v_pi: Option<f64>,
    pub v_star: Option<f64>,
    pub regret_cum: Option<f64>,
    pub return_realized: f64,
    pub valid: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub instance: String,
    pub agent: String,
    pub seed: u64,
    pub episodes: usize,
    pub final_regret: Option<f64>,
    pub episodes_to_eps: Option<usize>,
    pub phase_one_episodes: Option<usize>,
    pub phase_two_episodes: Option<usize>,
    pub valid: bool,
    pub error: Option<String>,
    pub wall_clock_ms: f64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub summary: SummaryRow,
    pub trace: Vec<TraceRow>,
    pub final_plan: Option<PlanResult>,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub runs: Vec<RunResult>,
}

impl ExperimentResult {
    pub fn all_valid(&self) -> bool {
        self.runs.iter().all(|r| r.summary.valid)
    }

    pub fn summaries(&self) -> Vec<SummaryRow> {
        self.runs.iter().map(|r| r.summary.clone()).collect()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub keep_plan: bool,
}

/// Runs every seed (in a work pool) and writes outputs if the config names a directory.
pub fn run_experiment(cfg: &ExperimentConfig, opts: RunOptions) -> anyhow::Result<ExperimentResult> {
    let runs: Vec<RunResult> = cfg
        .seeds
        .par_iter()
        .map(|&seed| run_seed(cfg, seed, opts))
        .collect::<anyhow::Result<_>>()?;
    let result = ExperimentResult { runs };
    if let Some(dir) = &cfg.output {
        write_outputs(dir, &result, opts)?;
    }
    Ok(result)
}

pub fn write_outputs(dir: &Path, result: &ExperimentResult, opts: RunOptions) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)?;
    for run in &result.runs {
        let seed = run.summary.seed;
        write_atomic(&dir.join(format!("trace_seed{seed}.csv")), &csv_bytes(&run.trace)?)?;
        if opts.keep_plan {
            if let Some(plan) = &run.final_plan {
                write_atomic(
                    &dir.join(format!("plan_seed{seed}.json")),
                    serde_json::to_string_pretty(plan)?.as_bytes(),
                )?;
            }
        }
    }
    write_atomic(&dir.join("summary.csv"), &csv_bytes(&result.summaries())?)?;
    Ok(())
}

pub fn csv_bytes<T: Serialize>(rows: &[T]) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(w.into_inner()?)
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn instance_label(cfg: &ExperimentConfig) -> String {
    if !cfg.name.is_empty() {
        return cfg.name.clone();
    }
    serde_json::to_value(&cfg.instance)
        .ok()
        .and_then(|v| v.get("source").and_then(|s| s.as_str()).map(str::to_string))
        .unwrap_or_default()
}

fn run_seed(cfg: &ExperimentConfig, seed: u64, opts: RunOptions) -> anyhow::Result<RunResult> {
    let inst = build_instance(&cfg.instance, cfg.graph.as_ref(), seed)?;
    let start = Instant::now();
    let mut summary = SummaryRow {
        instance: instance_label(cfg),
        agent: cfg.agent.name().to_string(),
        seed,
        episodes: 0,
        final_regret: None,
        episodes_to_eps: None,
        phase_one_episodes: None,
        phase_two_episodes: None,
        valid: false,
        error: None,
        wall_clock_ms: 0.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut run = Run {
        trace: Vec::new(),
        final_plan: None,
        keep_plan: opts.keep_plan,
    };
    let outcome = match (&cfg.agent, cfg.stop_rule()) {
        (AgentSpec::Orlc { bias_filter }, stop) => {
            run.orlc(&inst, agent_config(cfg, *bias_filter), stop, &mut rng, &mut summary)
        }
        (AgentSpec::UniformBaseline, StopRule::Episodes(t)) => run.uniform(&inst, t, &mut rng, &mut summary),
        (AgentSpec::Domset { dominating, mode }, StopRule::Epsilon(eps)) => {
            let dominating = dominating
                .clone()
                .or_else(|| inst.dominating.clone())
                .ok_or_else(|| anyhow::anyhow!("agent.dominating: instance provides no dominating set"))?;
            let mut dcfg = DomSetConfig::new(dominating, eps, cfg.delta);
            dcfg.mode = *mode;
            dcfg.coverage = inst.coverage.clone();
            if let Some(b) = cfg.budget {
                dcfg.budget = b;
            }
            run.domset(&inst, &dcfg, &mut rng, &mut summary)
        }
        (AgentSpec::Multitask { tasks, task_seed }, StopRule::Epsilon(eps)) => {
            run.multitask(&inst, agent_config(cfg, None), *tasks, *task_seed, eps, &mut rng, &mut summary)
        }
        _ => unreachable!("validated"),
    };
    match outcome {
        Ok(valid) => summary.valid = valid,
        Err(e) => {
            summary.valid = false;
            summary.error = Some(e.to_string());
        }
    }
    summary.episodes = run.trace.len();
    summary.wall_clock_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(RunResult {
        summary,
        trace: run.trace,
        final_plan: run.final_plan,
    })
}

fn agent_config(cfg: &ExperimentConfig, bias_filter: Option<f64>) -> AgentConfig {
    let mut a = AgentConfig::with_delta(cfg.delta);
    a.bias_filter = bias_filter;
    if let Some(b) = cfg.budget {
        a.budget = b;
    }
    a
}

struct Run {
    trace: Vec<TraceRow>,
    final_plan: Option<PlanResult>,
    keep_plan: bool,
}

impl Run {
    /// Per-episode sandwich `V̰ ≤ V^π ≤ V* ≤ Ṽ` at the start state, recomputed by exact DP.
    fn orlc(
        &mut self,
        inst: &BuiltInstance,
        acfg: AgentConfig,
        stop: StopRule,
        rng: &mut ChaCha8Rng,
        summary: &mut SummaryRow,
    ) -> anyhow::Result<bool> {
        let mdp = &inst.mdp;
        let (v_star, _) = optimal_values(mdp);
        let mut eval = PolicyEvaluator::new(mdp);
        let mut regret = 0.0;
        let mut all_valid = true;
        let mut failure = None;
        let mut observe = |view: &fgrl_core::agent::EpisodeView| {
            let v_pi = match eval.value(&view.plan.policy, view.s1) {
                Ok(v) => v,
                Err(e) => {
                    failure = Some(e);
                    return;
                }
            };
            let vs = v_star.v(0, view.s1);
            regret += (vs - v_pi).max(0.0);
            let (lo, hi) = view.plan.certificate(view.s1);
            let valid = lo <= v_pi + TOL && v_pi <= vs + TOL && vs <= hi + TOL;
            all_valid &= valid;
            self.trace.push(TraceRow {
                episode: view.episode,
                phase: 0,
                task: 0,
                s1: view.s1,
                cert_lo: lo,
                cert_hi: hi,
                v_pi: Some(v_pi),
                v_star: Some(vs),
                regret_cum: Some(regret),
                return_realized: view.trajectory.total_reward(),
                valid: Some(valid),
            });
            if self.keep_plan {
                self.final_plan = Some(view.plan.clone());
            }
        };
        match stop {
            StopRule::Episodes(t) => {
                run_with_observer(mdp, &inst.graph, &acfg, t, rng, &mut observe)?;
                if let Some(e) = failure {
                    return Err(e.into());
                }
                summary.final_regret = Some(regret);
                Ok(all_valid)
            }
            StopRule::Epsilon(eps) => {
                let out = run_until_certificate_with_observer(mdp, &inst.graph, &acfg, eps, rng, &mut observe)?;
                if let Some(e) = failure {
                    return Err(e.into());
                }
                summary.final_regret = Some(regret);
                summary.episodes_to_eps = Some(out.episodes);
                if self.keep_plan {
                    self.final_plan = Some(out.plan.clone());
                }
                let s1 = mdp.initial_states().fixed_state().unwrap_or(0);
                let v_pi = policy_value(mdp, &out.policy)?.v(0, s1);
                let vs = v_star.v(0, s1);
                let (lo, hi) = out.certificate;
                let final_ok = vs - v_pi <= eps + TOL && lo <= v_pi + TOL && vs <= hi + TOL;
                Ok(all_valid && final_ok)
            }
        }
    }

    fn uniform(
        &mut self,
        inst: &BuiltInstance,
        episodes: usize,
        rng: &mut ChaCha8Rng,
        summary: &mut SummaryRow,
    ) -> anyhow::Result<bool> {
        let mdp = &inst.mdp;
        let (v_star, _) = optimal_values(mdp);
        let big_h = mdp.horizon() as f64;
        let mut regret = 0.0;
        let mut all_valid = true;
        for k in 1..=episodes {
            let s1 = mdp.initial_states().state_for(k - 1, rng);
            let policy = random_policy(mdp, rng);
            let v_pi = policy_value(mdp, &policy)?.v(0, s1);
            let traj = sample_episode(mdp, &policy, s1, rng)?;
            let vs = v_star.v(0, s1);
            regret += (vs - v_pi).max(0.0);
            let valid = -TOL <= v_pi && v_pi <= vs + TOL && vs <= big_h + TOL;
            all_valid &= valid;
            self.trace.push(TraceRow {
                episode: k,
                phase: 0,
                task: 0,
                s1,
                cert_lo: 0.0,
                cert_hi: big_h,
                v_pi: Some(v_pi),
                v_star: Some(vs),
                regret_cum: Some(regret),
                return_realized: traj.total_reward(),
                valid: Some(valid),
            });
        }
        summary.final_regret = Some(regret);
        Ok(all_valid)
    }

    fn domset(
        &mut self,
        inst: &BuiltInstance,
        dcfg: &DomSetConfig,
        rng: &mut ChaCha8Rng,
        summary: &mut SummaryRow,
    ) -> anyhow::Result<bool> {
        let mdp = &inst.mdp;
        let out = run_domset_with_observer(mdp, &inst.graph, dcfg, rng, |ev| {
            let (lo, hi) = ev.plan.certificate(ev.start);
            self.trace.push(TraceRow {
                episode: ev.episode,
                phase: ev.phase,
                task: ev.task_played,
                s1: ev.start,
                cert_lo: lo,
                cert_hi: hi,
                v_pi: None,
                v_star: None,
                regret_cum: None,
                return_realized: ev.trajectory.total_reward(),
                valid: None,
            });
        })?;
        summary.episodes_to_eps = Some(out.total_episodes());
        summary.phase_one_episodes = Some(out.phase_one.episodes);
        summary.phase_two_episodes = Some(out.phase_two.episodes);
        epsilon_optimal(mdp, &out.policy, dcfg.epsilon)
    }

    #[allow(clippy::too_many_arguments)]
    fn multitask(
        &mut self,
        inst: &BuiltInstance,
        acfg: AgentConfig,
        tasks: usize,
        task_seed: u64,
        eps: f64,
        rng: &mut ChaCha8Rng,
        summary: &mut SummaryRow,
    ) -> anyhow::Result<bool> {
        let mdp = &inst.mdp;
        let known = known_task_rewards(mdp, tasks, task_seed);
        let mut spec = vec![TaskReward::Environment];
        spec.extend(known.iter().map(|r| TaskReward::Known { rewards: r.clone() }));
        let ns = mdp.num_states();
        let out = run_multitask_with_observer(mdp, &inst.graph, &TaskSpec::new(spec), &acfg, eps, rng, |view| {
            let (lo, hi) = view.plan.certificate(view.s1);
            self.trace.push(TraceRow {
                episode: view.episode,
                phase: 0,
                task: view.s1 / ns,
                s1: view.s1 % ns,
                cert_lo: lo,
                cert_hi: hi,
                v_pi: None,
                v_star: None,
                regret_cum: None,
                return_realized: view.trajectory.total_reward(),
                valid: None,
            });
        })?;
        summary.episodes_to_eps = Some(out.episodes);
        let mut ok = epsilon_optimal(mdp, &out.policies[0], eps)?;
        for (r, pi) in known.iter().zip(&out.policies[1..]) {
            ok &= epsilon_optimal(&with_known_rewards(mdp, r)?, pi, eps)?;
        }
        Ok(ok)
    }
}

/// Rewards of the extra tasks: uniform on `[0, 1]` per pair.
pub fn known_task_rewards(mdp: &TabularMdp, tasks: usize, task_seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(task_seed);
    (1..tasks)
        .map(|_| (0..mdp.num_pairs()).map(|_| rng.gen()).collect())
        .collect()
}

fn with_known_rewards(mdp: &TabularMdp, rewards: &[f64]) -> anyhow::Result<TabularMdp> {
    Ok(TabularMdp::new(
        mdp.space().clone(),
        mdp.horizon(),
        (0..mdp.num_pairs()).map(|x| mdp.transition(x).to_vec()).collect(),
        rewards
            .iter()
            .map(|&value| RewardModel::Deterministic { value })
            .collect(),
        mdp.initial_states().clone(),
    )?)
}

fn epsilon_optimal(mdp: &TabularMdp, policy: &Policy, eps: f64) -> anyhow::Result<bool> {
    let s1 = mdp
        .initial_states()
        .fixed_state()
        .ok_or_else(|| anyhow::anyhow!("instance needs a fixed initial state"))?;
    let (v_star, _) = optimal_values(mdp);
    let v_pi = policy_value(mdp, policy)?.v(0, s1);
    Ok(v_star.v(0, s1) - v_pi <= eps + TOL)
}
