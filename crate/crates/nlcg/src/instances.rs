//! Seeded random instances for tests and benchmarks: utility/payoff tables,
//! tree-shaped graphs, and complete bundles of graph + tables + network.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::graph::{CoordinationGraph, PayoffTable, UtilityTable};
use crate::mixing::{sample_random_net, MixingNetwork};

/// Uniform tables in `[-2, 2)` matching the graph's shape. Deterministic per
/// seed.
pub fn sample_tables(graph: &CoordinationGraph, seed: u64) -> (UtilityTable, PayoffTable) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = graph.n_actions();
    let f_v = UtilityTable(
        (0..graph.n_agents())
            .map(|_| (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect(),
    );
    let f_e = PayoffTable(
        (0..graph.n_edges())
            .map(|_| {
                (0..n)
                    .map(|_| (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect())
                    .collect()
            })
            .collect(),
    );
    (f_v, f_e)
}

/// Random connected tree over `n_agents` vertices: each vertex past the
/// first attaches to a uniformly chosen earlier vertex. Deterministic per
/// seed; the edge list comes out sorted.
pub fn random_tree(n_agents: usize, n_actions: usize, seed: u64) -> Result<CoordinationGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::with_capacity(n_agents.saturating_sub(1));
    for v in 1..n_agents {
        let parent = rng.gen_range(0..v);
        edges.push((parent, v));
    }
    edges.sort_unstable();
    CoordinationGraph::new(n_agents, n_actions, edges)
}

/// One full random instance: complete graph, tables, and a two-layer mixing
/// network with `m` hidden units. Seeds for tables and network are derived
/// from `seed` so instances differ in both.
pub fn sample_instance(
    n_agents: usize,
    n_actions: usize,
    m: usize,
    alpha: f64,
    seed: u64,
) -> Result<(CoordinationGraph, UtilityTable, PayoffTable, MixingNetwork)> {
    let graph = CoordinationGraph::complete(n_agents, n_actions)?;
    let (f_v, f_e) = sample_tables(&graph, seed);
    let net = sample_random_net(graph.input_dim(), &[m], alpha, seed.wrapping_mul(0x9e37_79b9).wrapping_add(1))?;
    Ok((graph, f_v, f_e, net))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::validate_tables;

    #[test]
    fn tables_match_graph_shape_and_are_deterministic() {
        let g = CoordinationGraph::complete(4, 3).unwrap();
        let (f_v, f_e) = sample_tables(&g, 3);
        validate_tables(&g, &f_v, &f_e).unwrap();
        let (f_v2, f_e2) = sample_tables(&g, 3);
        assert_eq!(f_v, f_v2);
        assert_eq!(f_e, f_e2);
        let (f_v3, _) = sample_tables(&g, 4);
        assert_ne!(f_v, f_v3);
    }

    #[test]
    fn random_trees_are_connected_with_n_minus_one_edges() {
        for seed in 0..30u64 {
            let n = 2 + (seed as usize % 7);
            let tree = random_tree(n, 2, seed).unwrap();
            assert_eq!(tree.n_edges(), n - 1);
            assert!(tree.diameter().is_some(), "seed {seed}: tree disconnected");
        }
    }

    #[test]
    fn single_vertex_tree_has_no_edges() {
        let tree = random_tree(1, 2, 0).unwrap();
        assert_eq!(tree.n_edges(), 0);
        assert_eq!(tree.diameter(), Some(0));
    }

    #[test]
    fn sample_instance_is_consistent() {
        let (g, f_v, f_e, net) = sample_instance(4, 3, 5, 0.2, 9).unwrap();
        validate_tables(&g, &f_v, &f_e).unwrap();
        assert_eq!(net.input_dim(), g.input_dim());
        assert_eq!(net.n_hidden(), 5);
    }
}
