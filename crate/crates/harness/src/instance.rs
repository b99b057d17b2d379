use fgrl_core::format::load_instance;
use fgrl_core::graph::FeedbackGraph;
use fgrl_core::instances::{
    appendix_examples, bandit_for_graph, domset_hard, grid_lineofsight, random_graph, random_mdp,
    star_bandit, tree_bandit,
};
use fgrl_core::mdp::{PairId, TabularMdp};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{GraphOverride, InstanceSource};

#[derive(Debug, Clone)]
pub struct BuiltInstance {
    pub mdp: TabularMdp,
    pub graph: FeedbackGraph,
    /// Dominating set supplied by the generator, if any.
    pub dominating: Option<Vec<PairId>>,
    /// Pairs the dominating set must cover (all when absent).
    pub coverage: Option<Vec<PairId>>,
}

/// Builds the instance for one run. Only `TreeBandit` with
/// `optimal_from_seed` depends on `seed`.
pub fn build_instance(
    source: &InstanceSource,
    graph: Option<&GraphOverride>,
    seed: u64,
) -> anyhow::Result<BuiltInstance> {
    let mut built = match source {
        InstanceSource::File { path } => {
            let (mdp, graph) = load_instance(path)?;
            plain(mdp, graph)
        }
        InstanceSource::Random { params } => {
            let mdp = random_mdp(params)?;
            let n = mdp.num_pairs();
            plain(mdp, FeedbackGraph::empty(n))
        }
        InstanceSource::Grid { params } => {
            let (mdp, graph) = grid_lineofsight(params)?;
            plain(mdp, graph)
        }
        InstanceSource::Example { name, horizon } => {
            let ex = appendix_examples()
                .into_iter()
                .find(|e| e.name == name)
                .ok_or_else(|| anyhow::anyhow!("unknown example {name:?}"))?;
            plain(bandit_for_graph(&ex.graph, *horizon)?, ex.graph)
        }
        InstanceSource::TreeBandit {
            params,
            optimal_from_seed,
        } => {
            let mut p = params.clone();
            if *optimal_from_seed {
                let reps = p
                    .groups
                    .as_ref()
                    .map(|g| g.len())
                    .or(p.alpha)
                    .unwrap_or(p.leaves * p.actions);
                p.optimal = (seed % reps as u64) as usize;
            }
            let tb = tree_bandit(&p)?;
            plain(tb.mdp, tb.graph)
        }
        InstanceSource::DomsetHard { params } => {
            let inst = domset_hard(params)?;
            BuiltInstance {
                mdp: inst.mdp,
                graph: inst.graph,
                dominating: Some(inst.dominating),
                coverage: Some(inst.meta.dominated_scope),
            }
        }
        InstanceSource::Star { params } => {
            let star = star_bandit(params)?;
            BuiltInstance {
                mdp: star.mdp,
                graph: star.graph,
                dominating: Some(vec![star.center]),
                coverage: None,
            }
        }
    };
    if let Some(g) = graph {
        let n = built.mdp.num_pairs();
        built.graph = match g {
            GraphOverride::Empty => FeedbackGraph::empty(n),
            GraphOverride::Complete => FeedbackGraph::complete(n),
            GraphOverride::Cliques { groups } => FeedbackGraph::cliques(n, groups)?,
            GraphOverride::Random { density, seed } => {
                random_graph(n, *density, &mut ChaCha8Rng::seed_from_u64(*seed))
            }
        };
        // A generator's dominating set refers to its own graph.
        built.dominating = None;
        built.coverage = None;
    }
    Ok(built)
}

fn plain(mdp: TabularMdp, graph: FeedbackGraph) -> BuiltInstance {
    BuiltInstance {
        mdp,
        graph,
        dominating: None,
        coverage: None,
    }
}
