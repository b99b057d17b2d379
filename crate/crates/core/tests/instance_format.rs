use fgrl_core::format::{load_instance, save_instance, InstanceDoc};
use fgrl_core::graph::{EdgeSpec, FeedbackGraph};
use fgrl_core::instances::{
    appendix_examples, bandit_for_graph, grid_lineofsight, random_mdp, GridParams, RandomMdpParams,
};
use proptest::prelude::*;

#[test]
fn grid_instance_survives_disk_roundtrip() {
    let (mdp, graph) = grid_lineofsight(&GridParams {
        width: 3,
        height: 2,
        walls: vec![],
        horizon: 4,
        goal: Some((2, 1)),
        slip: 0.1,
    })
    .unwrap();
    let doc = InstanceDoc::from_parts(&mdp, &graph).with_metadata("generator", "grid");
    let dir = std::env::temp_dir().join(format!("fgrl-format-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("grid.json");
    save_instance(&path, &doc).unwrap();
    let (m2, g2) = load_instance(&path).unwrap();
    assert_eq!(g2, graph);
    assert_eq!(InstanceDoc::from_parts(&m2, &g2).with_metadata("generator", "grid"), doc);
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn appendix_graphs_roundtrip() {
    for ex in appendix_examples() {
        let mdp = bandit_for_graph(&ex.graph, 1).unwrap();
        let doc = InstanceDoc::from_parts(&mdp, &ex.graph);
        let (_, g) = InstanceDoc::from_json(&doc.to_json()).unwrap().build().unwrap();
        assert_eq!(g, ex.graph, "{}", ex.name);
    }
}

#[test]
fn incompatible_graph_is_rejected() {
    let mdp = random_mdp(&RandomMdpParams { states: 2, actions: 2, horizon: 2, support: 1, seed: 0 }).unwrap();
    let mut doc = InstanceDoc::from_parts(&mdp, &FeedbackGraph::empty(4));
    doc.edges.push(EdgeSpec(0, 7, 1.0, 0.0));
    assert!(doc.build().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn random_instances_roundtrip(
        states in 1usize..6, actions in 1usize..4, horizon in 1usize..5,
        seed in any::<u64>(), bias_seed in any::<u64>(),
        edges in proptest::collection::vec((0usize..24, 0usize..24, 0.05f64..=1.0, 0.0f64..=0.5), 0..20),
    ) {
        let mdp = random_mdp(&RandomMdpParams { states, actions, horizon, support: states.min(2), seed }).unwrap();
        let n = mdp.num_pairs();
        let mut specs: Vec<EdgeSpec> = edges.into_iter()
            .map(|(a, b, q, e)| EdgeSpec(a % n, b % n, q, e))
            .filter(|e| e.0 != e.1)
            .collect();
        specs.sort_by_key(|e| (e.0, e.1));
        specs.dedup_by_key(|e| (e.0, e.1));
        let graph = FeedbackGraph::with_bias_seed(n, specs, bias_seed).unwrap();
        let doc = InstanceDoc::from_parts(&mdp, &graph);
        let back = InstanceDoc::from_json(&doc.to_json()).unwrap();
        prop_assert_eq!(&back, &doc);
        let (_, g2) = back.build().unwrap();
        prop_assert_eq!(g2, graph);
    }
}
