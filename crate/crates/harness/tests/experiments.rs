use fgrl_harness::config::ExperimentConfig;
use fgrl_harness::experiment::{csv_bytes, run_experiment, RunOptions};
use fgrl_harness::sweep::sweep;
use serde_json::json;

fn config(v: serde_json::Value) -> ExperimentConfig {
    ExperimentConfig::from_value(v).unwrap()
}

fn small_random() -> serde_json::Value {
    json!({"source": "random", "params": {"states": 3, "actions": 2, "horizon": 2, "support": 2, "seed": 5}})
}

#[test]
fn orlc_runs_satisfy_the_sandwich_every_episode() {
    let cfg = config(json!({
        "format": "fgrl-config/1", "instance": small_random(), "graph": {"kind": "complete"},
        "agent": {"kind": "orlc"}, "episodes": 300, "seeds": [1, 2, 3]
    }));
    let r = run_experiment(&cfg, RunOptions::default()).unwrap();
    assert!(r.all_valid());
    for run in &r.runs {
        assert_eq!(run.trace.len(), 300);
        assert!(run.trace.iter().all(|t| t.valid == Some(true)));
        let regret = run.summary.final_regret.unwrap();
        assert!(regret >= 0.0);
        // Cumulative regret is nondecreasing.
        assert!(run.trace.windows(2).all(|w| w[1].regret_cum >= w[0].regret_cum));
    }
}

#[test]
fn uniform_baseline_and_epsilon_mode() {
    let cfg = config(json!({
        "format": "fgrl-config/1", "instance": small_random(),
        "agent": {"kind": "uniform_baseline"}, "episodes": 100, "seeds": [4]
    }));
    let r = run_experiment(&cfg, RunOptions::default()).unwrap();
    assert!(r.all_valid());
    let cfg = config(json!({
        "format": "fgrl-config/1", "instance": small_random(), "graph": {"kind": "complete"},
        "agent": {"kind": "orlc"}, "epsilon": 0.5, "seeds": [4]
    }));
    let r = run_experiment(&cfg, RunOptions { keep_plan: true }).unwrap();
    assert!(r.all_valid());
    let run = &r.runs[0];
    assert_eq!(run.summary.episodes_to_eps, Some(run.trace.len()));
    // The trace holds the plans episodes were played with; the certifying
    // plan comes after the last one.
    let plan = run.final_plan.as_ref().unwrap();
    assert!(plan.width(0) <= 0.5);
    assert!(run.trace.last().unwrap().cert_hi - run.trace.last().unwrap().cert_lo > 0.5);
}

#[test]
fn star_domset_reports_both_phases() {
    let cfg = config(json!({
        "format": "fgrl-config/1",
        "instance": {"source": "star", "params": {"leaf_means": [0.2, 0.8, 0.5], "horizon": 1}},
        "agent": {"kind": "domset"}, "epsilon": 0.3, "seeds": [1]
    }));
    let r = run_experiment(&cfg, RunOptions::default()).unwrap();
    let s = &r.runs[0].summary;
    assert!(s.valid, "{s:?}");
    let (p1, p2) = (s.phase_one_episodes.unwrap(), s.phase_two_episodes.unwrap());
    assert!(p1 > 0 && p2 > 0);
    assert_eq!(p1 + p2, s.episodes);
    assert!(r.runs[0].trace.iter().any(|t| t.phase == 1));
    assert!(r.runs[0].trace.iter().any(|t| t.phase == 2));
}

#[test]
fn multitask_runs_start_in_every_task() {
    // Without shared observations every task copy has to be visited itself.
    let cfg = config(json!({
        "format": "fgrl-config/1", "instance": small_random(), "graph": {"kind": "empty"},
        "agent": {"kind": "multitask", "tasks": 3, "task_seed": 2}, "epsilon": 0.5, "seeds": [1]
    }));
    let r = run_experiment(&cfg, RunOptions::default()).unwrap();
    assert!(r.all_valid(), "{:?}", r.runs[0].summary);
    let tasks: std::collections::BTreeSet<_> = r.runs[0].trace.iter().map(|t| t.task).collect();
    assert_eq!(tasks.into_iter().collect::<Vec<_>>(), vec![0, 1, 2]);
}

#[test]
fn reruns_are_byte_identical_apart_from_wall_clock() {
    let cfg = config(json!({
        "format": "fgrl-config/1",
        "instance": {"source": "tree_bandit", "params": {"leaves": 4, "actions": 4, "horizon": 4, "epsilon": 0.3, "alpha": 2},
                     "optimal_from_seed": true},
        "agent": {"kind": "orlc"}, "episodes": 100, "seeds": [1, 2, 3]
    }));
    let a = run_experiment(&cfg, RunOptions::default()).unwrap();
    let b = run_experiment(&cfg, RunOptions::default()).unwrap();
    for (x, y) in a.runs.iter().zip(&b.runs) {
        assert_eq!(csv_bytes(&x.trace).unwrap(), csv_bytes(&y.trace).unwrap());
        let (mut sx, mut sy) = (x.summary.clone(), y.summary.clone());
        sx.wall_clock_ms = 0.0;
        sy.wall_clock_ms = 0.0;
        assert_eq!(sx, sy);
    }
    assert_ne!(csv_bytes(&a.runs[0].trace).unwrap(), csv_bytes(&a.runs[1].trace).unwrap());
}

#[test]
fn sweep_points_summarize_their_runs() {
    let base = json!({
        "format": "fgrl-config/1", "instance": small_random(),
        "agent": {"kind": "orlc"}, "episodes": 40, "seeds": [1, 2, 3, 4]
    });
    let axis = fgrl_harness::config::SweepAxis {
        path: "instance.params.seed".into(),
        values: vec![json!(1), json!(2)],
    };
    let dir = tempfile::tempdir().unwrap();
    let s = sweep(&base, &axis, Some(dir.path()), RunOptions::default()).unwrap();
    assert_eq!(s.points.len(), 2);
    for (p, e) in s.points.iter().zip(&s.experiments) {
        assert_eq!(p.runs, 4);
        assert!(p.q1 <= p.median && p.median <= p.q3);
        let mut v: Vec<f64> = e.runs.iter().map(|r| r.summary.final_regret.unwrap()).collect();
        v.sort_by(f64::total_cmp);
        assert!(v[0] <= p.median && p.median <= v[3]);
    }
    assert!(dir.path().join("sweep.csv").exists());
    assert!(dir.path().join("point_0/trace_seed4.csv").exists());
}
