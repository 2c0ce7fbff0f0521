//! Coordination-graph data model: agents, actions, edges, utility/payoff
//! tables, joint actions, and the flat input vector fed to a mixing network.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Undirected graph over agents. Vertices are agents `0..n_agents`, all with
/// the same action count; each edge `(i, j)` with `i < j` carries a pairwise
/// payoff table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoordinationGraph {
    n_agents: usize,
    n_actions: usize,
    edges: Vec<(usize, usize)>,
}

impl CoordinationGraph {
    /// Builds a graph from an explicit edge list.
    ///
    /// The edge list must already be in canonical form: every edge `(i, j)`
    /// with `i < j < n_agents`, sorted lexicographically, no duplicates.
    /// Non-canonical input is rejected rather than silently sorted because
    /// payoff tables are keyed by edge position.
    pub fn new(n_agents: usize, n_actions: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        if n_agents == 0 {
            return Err(Error::invalid("n_agents must be >= 1"));
        }
        if n_actions == 0 {
            return Err(Error::invalid("n_actions must be >= 1"));
        }
        for (k, &(i, j)) in edges.iter().enumerate() {
            if i >= j {
                return Err(Error::invalid(format!(
                    "edge {k} = ({i}, {j}) must satisfy i < j"
                )));
            }
            if j >= n_agents {
                return Err(Error::invalid(format!(
                    "edge {k} = ({i}, {j}) endpoint out of range for {n_agents} agents"
                )));
            }
            if k > 0 && edges[k - 1] >= (i, j) {
                return Err(Error::invalid(format!(
                    "edge list must be sorted lexicographically without duplicates (position {k})"
                )));
            }
        }
        Ok(Self { n_agents, n_actions, edges })
    }

    /// Builds the complete graph: every pair `(i, j)` with `i < j` is an edge.
    pub fn complete(n_agents: usize, n_actions: usize) -> Result<Self> {
        let mut edges = Vec::with_capacity(n_agents.saturating_sub(1) * n_agents / 2);
        for i in 0..n_agents {
            for j in (i + 1)..n_agents {
                edges.push((i, j));
            }
        }
        Self::new(n_agents, n_actions, edges)
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Length of the flat input vector: one utility entry per vertex followed
    /// by one payoff entry per edge.
    pub fn input_dim(&self) -> usize {
        self.n_agents + self.edges.len()
    }

    /// Longest shortest path between any two vertices, or `None` if the graph
    /// is disconnected. Computed by BFS from every vertex.
    pub fn diameter(&self) -> Option<usize> {
        let mut adj = vec![Vec::new(); self.n_agents];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        let mut diameter = 0;
        let mut dist = vec![usize::MAX; self.n_agents];
        let mut queue = std::collections::VecDeque::new();
        for start in 0..self.n_agents {
            dist.fill(usize::MAX);
            dist[start] = 0;
            queue.clear();
            queue.push_back(start);
            while let Some(v) = queue.pop_front() {
                for &u in &adj[v] {
                    if dist[u] == usize::MAX {
                        dist[u] = dist[v] + 1;
                        queue.push_back(u);
                    }
                }
            }
            let far = *dist.iter().max().unwrap();
            if far == usize::MAX {
                return None;
            }
            diameter = diameter.max(far);
        }
        Some(diameter)
    }
}

/// Per-agent action values, shape `n_agents x n_actions`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UtilityTable(pub Vec<Vec<f64>>);

impl UtilityTable {
    pub fn get(&self, agent: usize, action: usize) -> f64 {
        self.0[agent][action]
    }
}

/// Per-edge action-pair values, shape `n_edges x n_actions x n_actions`.
/// Entry `(e, a_i, a_j)` is the payoff of edge `e = (i, j)` when the
/// lower-indexed endpoint `i` plays `a_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PayoffTable(pub Vec<Vec<Vec<f64>>>);

impl PayoffTable {
    pub fn get(&self, edge: usize, a_i: usize, a_j: usize) -> f64 {
        self.0[edge][a_i][a_j]
    }
}

/// One action per agent, each in `[0, n_actions)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointAction(pub Vec<usize>);

impl JointAction {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Flat input vector for a mixing network: vertex utilities in vertex order,
/// then edge payoffs in edge order; length `graph.input_dim()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QInput(pub Vec<f64>);

impl QInput {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Checks that tables match the graph's shape and contain only finite values.
pub fn validate_tables(
    graph: &CoordinationGraph,
    f_v: &UtilityTable,
    f_e: &PayoffTable,
) -> Result<()> {
    if f_v.0.len() != graph.n_agents() {
        return Err(Error::invalid(format!(
            "utility table has {} rows, graph has {} agents",
            f_v.0.len(),
            graph.n_agents()
        )));
    }
    for (i, row) in f_v.0.iter().enumerate() {
        if row.len() != graph.n_actions() {
            return Err(Error::invalid(format!(
                "utility row {i} has {} entries, expected {}",
                row.len(),
                graph.n_actions()
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("utility row {i} has a non-finite entry")));
        }
    }
    if f_e.0.len() != graph.n_edges() {
        return Err(Error::invalid(format!(
            "payoff table has {} slices, graph has {} edges",
            f_e.0.len(),
            graph.n_edges()
        )));
    }
    for (e, slice) in f_e.0.iter().enumerate() {
        if slice.len() != graph.n_actions() {
            return Err(Error::invalid(format!(
                "payoff slice {e} has {} rows, expected {}",
                slice.len(),
                graph.n_actions()
            )));
        }
        for row in slice {
            if row.len() != graph.n_actions() {
                return Err(Error::invalid(format!(
                    "payoff slice {e} has a row of {} entries, expected {}",
                    row.len(),
                    graph.n_actions()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("payoff slice {e} has a non-finite entry")));
            }
        }
    }
    Ok(())
}

/// Checks that a joint action has one in-range entry per agent.
pub fn validate_action(graph: &CoordinationGraph, a: &JointAction) -> Result<()> {
    if a.0.len() != graph.n_agents() {
        return Err(Error::invalid(format!(
            "joint action has {} entries, graph has {} agents",
            a.0.len(),
            graph.n_agents()
        )));
    }
    for (i, &ai) in a.0.iter().enumerate() {
        if ai >= graph.n_actions() {
            return Err(Error::invalid(format!(
                "action {ai} of agent {i} out of range [0, {})",
                graph.n_actions()
            )));
        }
    }
    Ok(())
}

/// Convenience constructor for [`CoordinationGraph::complete`].
///
/// # Examples
/// ```
/// let g = nlcg::complete_graph(3, 5).unwrap();
/// assert_eq!(g.edges(), &[(0, 1), (0, 2), (1, 2)]);
/// ```
pub fn complete_graph(n_agents: usize, n_actions: usize) -> Result<CoordinationGraph> {
    CoordinationGraph::complete(n_agents, n_actions)
}

/// Gathers the table entries selected by a joint action into the flat input
/// vector: `out[v] = f_v[v][a_v]`, then `out[n_agents + e] = f_e[e][a_i][a_j]`
/// for each edge `e = (i, j)`.
pub fn assemble_q_input(
    graph: &CoordinationGraph,
    f_v: &UtilityTable,
    f_e: &PayoffTable,
    a: &JointAction,
) -> Result<QInput> {
    validate_tables(graph, f_v, f_e)?;
    validate_action(graph, a)?;
    let mut out = Vec::with_capacity(graph.input_dim());
    for (v, &av) in a.0.iter().enumerate() {
        out.push(f_v.get(v, av));
    }
    for (e, &(i, j)) in graph.edges().iter().enumerate() {
        out.push(f_e.get(e, a.0[i], a.0[j]));
    }
    Ok(QInput(out))
}

/// Linear coordination-graph value: mean utility plus mean payoff at the
/// joint action. The payoff term is 0 on edge-free graphs.
pub fn linear_cg_value(
    graph: &CoordinationGraph,
    f_v: &UtilityTable,
    f_e: &PayoffTable,
    a: &JointAction,
) -> Result<f64> {
    validate_tables(graph, f_v, f_e)?;
    validate_action(graph, a)?;
    let util: f64 = a.0.iter().enumerate().map(|(v, &av)| f_v.get(v, av)).sum();
    let mut value = util / graph.n_agents() as f64;
    if graph.n_edges() > 0 {
        let payoff: f64 = graph
            .edges()
            .iter()
            .enumerate()
            .map(|(e, &(i, j))| f_e.get(e, a.0[i], a.0[j]))
            .sum();
        value += payoff / graph.n_edges() as f64;
    }
    Ok(value)
}

/// Iterates all joint actions of `graph` in lexicographic order (agent 0 is
/// the most significant digit).
pub fn joint_actions(graph: &CoordinationGraph) -> JointActionIter {
    JointActionIter {
        n_actions: graph.n_actions(),
        current: Some(vec![0; graph.n_agents()]),
    }
}

pub struct JointActionIter {
    n_actions: usize,
    current: Option<Vec<usize>>,
}

impl Iterator for JointActionIter {
    type Item = JointAction;

    fn next(&mut self) -> Option<JointAction> {
        let current = self.current.take()?;
        let mut next = current.clone();
        // Odometer increment from the last agent; exhausted on full carry.
        let mut pos = next.len();
        loop {
            if pos == 0 {
                self.current = None;
                break;
            }
            pos -= 1;
            next[pos] += 1;
            if next[pos] < self.n_actions {
                self.current = Some(next);
                break;
            }
            next[pos] = 0;
        }
        Some(JointAction(current))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complete_graph_edge_counts() {
        assert_eq!(complete_graph(1, 2).unwrap().n_edges(), 0);
        assert_eq!(complete_graph(4, 2).unwrap().n_edges(), 6);
        assert_eq!(
            complete_graph(3, 5).unwrap().edges(),
            &[(0, 1), (0, 2), (1, 2)]
        );
    }

    #[test]
    fn graph_rejects_bad_arguments() {
        assert!(complete_graph(0, 2).is_err());
        assert!(complete_graph(2, 0).is_err());
        assert!(CoordinationGraph::new(3, 2, vec![(1, 0)]).is_err());
        assert!(CoordinationGraph::new(3, 2, vec![(0, 3)]).is_err());
        assert!(CoordinationGraph::new(3, 2, vec![(0, 1), (0, 1)]).is_err());
        assert!(CoordinationGraph::new(3, 2, vec![(0, 2), (0, 1)]).is_err());
        assert!(CoordinationGraph::new(3, 2, vec![(1, 1)]).is_err());
    }

    #[test]
    fn diameter_of_small_graphs() {
        let path = CoordinationGraph::new(3, 2, vec![(0, 1), (1, 2)]).unwrap();
        assert_eq!(path.diameter(), Some(2));
        let star = CoordinationGraph::new(4, 2, vec![(0, 1), (0, 2), (0, 3)]).unwrap();
        assert_eq!(star.diameter(), Some(2));
        let complete = complete_graph(5, 2).unwrap();
        assert_eq!(complete.diameter(), Some(1));
        let single = complete_graph(1, 2).unwrap();
        assert_eq!(single.diameter(), Some(0));
        let disconnected = CoordinationGraph::new(3, 2, vec![(0, 1)]).unwrap();
        assert_eq!(disconnected.diameter(), None);
    }

    #[test]
    fn assemble_examples() {
        let g = complete_graph(2, 2).unwrap();
        let f_v = UtilityTable(vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        let f_e = PayoffTable(vec![vec![vec![5.0, 6.0], vec![7.0, 8.0]]]);
        let q = assemble_q_input(&g, &f_v, &f_e, &JointAction(vec![1, 0])).unwrap();
        assert_eq!(q.0, vec![2.0, 3.0, 7.0]);

        let zeros_v = UtilityTable(vec![vec![0.0; 2]; 2]);
        let zeros_e = PayoffTable(vec![vec![vec![0.0; 2]; 2]; 1]);
        let q = assemble_q_input(&g, &zeros_v, &zeros_e, &JointAction(vec![1, 1])).unwrap();
        assert_eq!(q.0, vec![0.0; 3]);

        let g4 = complete_graph(4, 2).unwrap();
        let f_v4 = UtilityTable(vec![vec![0.0; 2]; 4]);
        let f_e4 = PayoffTable(vec![vec![vec![0.0; 2]; 2]; 6]);
        let q = assemble_q_input(&g4, &f_v4, &f_e4, &JointAction(vec![0; 4])).unwrap();
        assert_eq!(q.len(), 10);
    }

    #[test]
    fn assemble_rejects_mismatches() {
        let g = complete_graph(2, 2).unwrap();
        let f_v = UtilityTable(vec![vec![0.0; 2]; 2]);
        let f_e = PayoffTable(vec![vec![vec![0.0; 2]; 2]; 1]);
        assert!(assemble_q_input(&g, &f_v, &f_e, &JointAction(vec![0, 2])).is_err());
        assert!(assemble_q_input(&g, &f_v, &f_e, &JointAction(vec![0])).is_err());
        let short_v = UtilityTable(vec![vec![0.0; 2]]);
        assert!(assemble_q_input(&g, &short_v, &f_e, &JointAction(vec![0, 0])).is_err());
        let bad_e = PayoffTable(vec![vec![vec![0.0, f64::NAN], vec![0.0; 2]]]);
        assert!(assemble_q_input(&g, &f_v, &bad_e, &JointAction(vec![0, 0])).is_err());
    }

    #[test]
    fn linear_value_examples() {
        let g = complete_graph(2, 2).unwrap();
        let f_v = UtilityTable(vec![vec![2.0, 0.0], vec![4.0, 0.0]]);
        let f_e = PayoffTable(vec![vec![vec![6.0, 0.0], vec![0.0, 0.0]]]);
        let v = linear_cg_value(&g, &f_v, &f_e, &JointAction(vec![0, 0])).unwrap();
        assert_eq!(v, 9.0);

        let zeros_v = UtilityTable(vec![vec![0.0; 2]; 2]);
        let zeros_e = PayoffTable(vec![vec![vec![0.0; 2]; 2]; 1]);
        let v = linear_cg_value(&g, &zeros_v, &zeros_e, &JointAction(vec![1, 0])).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn linear_value_constant_on_uniform_tables() {
        let g = complete_graph(4, 2).unwrap();
        let f_v = UtilityTable(vec![vec![4.0; 2]; 4]);
        let f_e = PayoffTable(vec![vec![vec![6.0; 2]; 2]; 6]);
        for a in joint_actions(&g) {
            let v = linear_cg_value(&g, &f_v, &f_e, &a).unwrap();
            assert!((v - 10.0).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_value_ignores_edge_term_on_edge_free_graph() {
        let g = complete_graph(1, 3).unwrap();
        let f_v = UtilityTable(vec![vec![1.0, 2.0, 3.0]]);
        let f_e = PayoffTable(vec![]);
        let v = linear_cg_value(&g, &f_v, &f_e, &JointAction(vec![2])).unwrap();
        assert_eq!(v, 3.0);
    }

    #[test]
    fn joint_action_iteration_is_lexicographic_and_complete() {
        let g = complete_graph(3, 2).unwrap();
        let all: Vec<_> = joint_actions(&g).collect();
        assert_eq!(all.len(), 8);
        assert_eq!(all[0].0, vec![0, 0, 0]);
        assert_eq!(all[1].0, vec![0, 0, 1]);
        assert_eq!(all[7].0, vec![1, 1, 1]);
        for w in all.windows(2) {
            assert!(w[0].0 < w[1].0);
        }
    }
}
