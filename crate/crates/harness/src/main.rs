use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use fgrl_core::format::{load_instance, save_instance, InstanceDoc};
use fgrl_core::instances::{
    appendix_examples, bandit_for_graph, domset_hard, grid_lineofsight, random_mdp, star_bandit,
    tree_bandit,
};
use fgrl_core::lemmas::{run_suite, tightness_probe, LemmaKind};
use fgrl_core::props::{graph_props, SolverOptions, DEFAULT_EXACT_CAP};
use fgrl_core::graph::FeedbackGraph;
use fgrl_harness::config::{load_value, ExperimentConfig, SweepAxis};
use fgrl_harness::experiment::{run_experiment, RunOptions};
use fgrl_harness::sweep::sweep;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "fgrl", about = "Episodic tabular RL with feedback graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config over all its seeds.
    Run {
        config: PathBuf,
        /// Output directory (overrides the config's `output`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write each orlc run's final plan (the certifying one in ε mode).
        #[arg(long)]
        dump_plan: bool,
    },
    /// Run a config once per value of a sweep axis.
    Sweep {
        config: PathBuf,
        /// Dotted config path; overrides the config's `sweep.path`.
        #[arg(long, requires = "values")]
        axis: Option<String>,
        /// JSON array of axis values.
        #[arg(long, requires = "axis")]
        values: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write an `fgrl-instance/1` document.
    GenInstance {
        kind: GenKind,
        /// JSON object merged over the generator's default parameters.
        #[arg(long)]
        params: Option<String>,
        /// Graph name for `example`.
        #[arg(long)]
        name: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print graph properties of an instance as JSON.
    GraphProps {
        instance: PathBuf,
        /// Largest vertex count solved exactly; larger graphs get bounds.
        #[arg(long, default_value_t = DEFAULT_EXACT_CAP)]
        exact_cap: usize,
    },
    /// Check the graph inequalities on random cases.
    LemmaCheck {
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 1000)]
        cases: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for violating cases as replayable JSON.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Grid,
    Example,
    TreeBandit,
    DomsetHard,
    Random,
    Star,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// `Ok(valid)`; errors map to exit code 2.
fn dispatch(cmd: Command) -> anyhow::Result<bool> {
    match cmd {
        Command::Run {
            config,
            out,
            dump_plan,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if out.is_some() {
                cfg.output = out;
            }
            let result = run_experiment(&cfg, RunOptions { keep_plan: dump_plan })?;
            println!("seed\tepisodes\tfinal_regret\tepisodes_to_eps\tvalid");
            for s in result.summaries() {
                println!(
                    "{}\t{}\t{}\t{}\t{}{}",
                    s.seed,
                    s.episodes,
                    opt(s.final_regret),
                    opt(s.episodes_to_eps),
                    s.valid,
                    s.error.map(|e| format!("\t{e}")).unwrap_or_default()
                );
            }
            Ok(result.all_valid())
        }
        Command::Sweep {
            config,
            axis,
            values,
            out,
        } => {
            let base = load_value(&config)?;
            let axis = match (axis, values) {
                (Some(path), Some(v)) => SweepAxis {
                    path,
                    values: serde_json::from_str(&v).context("--values must be a JSON array")?,
                },
                _ => ExperimentConfig::from_value(base.clone())?
                    .sweep
                    .context("config has no `sweep` section and no --axis was given")?,
            };
            let out = out.or_else(|| {
                base.get("output")
                    .and_then(|o| o.as_str())
                    .map(PathBuf::from)
            });
            let result = sweep(&base, &axis, out.as_deref(), RunOptions::default())?;
            println!("{}\tmetric\tmedian\tq1\tq3\tvalid", axis.path);
            for p in &result.points {
                println!(
                    "{}\t{}\t{}\t{}\t{}\t{}",
                    p.value, p.metric, p.median, p.q1, p.q3, p.all_valid
                );
            }
            Ok(result.all_valid())
        }
        Command::GenInstance {
            kind,
            params,
            name,
            out,
        } => {
            let overrides: Value = match params {
                Some(p) => serde_json::from_str(&p).context("--params must be JSON")?,
                None => json!({}),
            };
            let doc = generate(kind, overrides, name.as_deref())?;
            save_instance(&out, &doc)?;
            Ok(true)
        }
        Command::GraphProps {
            instance,
            exact_cap,
        } => {
            let (_, graph) = load_instance(&instance)?;
            let props = graph_props(&graph, SolverOptions { exact_cap });
            println!("{}", serde_json::to_string_pretty(&props)?);
            Ok(true)
        }
        Command::LemmaCheck {
            suite,
            cases,
            seed,
            dump,
        } => lemma_check(&suite, cases, seed, dump.as_deref()),
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| "-".into())
}

fn merge(mut base: Value, overrides: Value) -> anyhow::Result<Value> {
    let Value::Object(o) = overrides else {
        bail!("--params must be a JSON object");
    };
    let map = base.as_object_mut().expect("defaults are objects");
    map.extend(o);
    Ok(base)
}

fn generate(kind: GenKind, overrides: Value, name: Option<&str>) -> anyhow::Result<InstanceDoc> {
    let (generator, defaults) = match kind {
        GenKind::Grid => ("grid", json!({"width": 4, "height": 4, "horizon": 8, "slip": 0.1})),
        GenKind::Example => ("example", json!({"horizon": 1})),
        GenKind::TreeBandit => (
            "tree_bandit",
            json!({"leaves": 4, "actions": 4, "horizon": 4, "epsilon": 0.2, "alpha": 4}),
        ),
        GenKind::DomsetHard => (
            "domset_hard",
            json!({"states": 8, "actions": 2, "horizon": 5, "gamma": 2, "p0": 0.5,
                   "epsilon": 0.5, "reach_index": 1, "optimal_index": 1}),
        ),
        GenKind::Random => (
            "random",
            json!({"states": 12, "actions": 2, "horizon": 4, "support": 2, "seed": 0}),
        ),
        GenKind::Star => (
            "star",
            json!({"leaf_means": [0.2, 0.4, 0.6, 0.8], "center_mean": 0.0, "horizon": 1}),
        ),
    };
    let params = merge(defaults, overrides)?;
    let p = params.clone();
    let (mdp, graph): (_, FeedbackGraph) = match kind {
        GenKind::Grid => grid_lineofsight(&serde_json::from_value(p)?)?,
        GenKind::Example => {
            let name = name.context("example needs --name")?;
            let ex = appendix_examples()
                .into_iter()
                .find(|e| e.name == name)
                .with_context(|| {
                    let names: Vec<_> = appendix_examples().iter().map(|e| e.name).collect();
                    format!("unknown example {name:?}; known: {names:?}")
                })?;
            let horizon = p["horizon"].as_u64().context("horizon must be an integer")? as usize;
            (bandit_for_graph(&ex.graph, horizon)?, ex.graph)
        }
        GenKind::TreeBandit => {
            let tb = tree_bandit(&serde_json::from_value(p)?)?;
            (tb.mdp, tb.graph)
        }
        GenKind::DomsetHard => {
            let d = domset_hard(&serde_json::from_value(p)?)?;
            (d.mdp, d.graph)
        }
        GenKind::Random => {
            let mdp = random_mdp(&serde_json::from_value(p)?)?;
            let n = mdp.num_pairs();
            (mdp, FeedbackGraph::empty(n))
        }
        GenKind::Star => {
            let s = star_bandit(&serde_json::from_value(p)?)?;
            (s.mdp, s.graph)
        }
    };
    Ok(InstanceDoc::from_parts(&mdp, &graph)
        .with_metadata("generator", generator)
        .with_metadata("params", params))
}

fn lemma_check(suite: &str, cases: usize, seed: u64, dump: Option<&Path>) -> anyhow::Result<bool> {
    let kinds: Vec<LemmaKind> = if suite == "all" {
        LemmaKind::ALL.to_vec()
    } else {
        vec![LemmaKind::parse(suite).with_context(|| format!("unknown suite {suite:?}"))?]
    };
    println!("suite\tcases\tviolations\tworst_ratio\tprobe_ratio");
    let mut ok = true;
    for kind in kinds {
        let report = run_suite(kind, cases, seed)?;
        let probe = tightness_probe(kind);
        println!(
            "{}\t{}\t{}\t{:.4}\t{:.4}",
            kind.name(),
            report.cases,
            report.violations.len(),
            report.worst_ratio,
            probe.ratio()
        );
        ok &= report.violations.is_empty() && probe.pass;
        if let (Some(dir), false) = (dump, report.violations.is_empty()) {
            std::fs::create_dir_all(dir)?;
            let path = dir.join(format!("violations_{}.json", kind.name()));
            std::fs::write(&path, serde_json::to_string_pretty(&report.violations)?)?;
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(ok)
}
