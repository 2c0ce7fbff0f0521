//! Weighted Max-Sum message passing on one affine piece of the mixing
//! network, plus an exhaustive per-piece maximizer used as an oracle.
//!
//! The weighted objective of a joint action is
//! `sum_i w_v[i] * f_v[i][a_i] + sum_e w_e[e] * f_e[e][a_i][a_j] + bias`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{joint_actions, validate_tables, CoordinationGraph, JointAction, PayoffTable, UtilityTable};

/// Default cap on exhaustive joint-action enumeration.
pub const JOINT_ACTION_CAP: u128 = 1_000_000;

/// First index attaining the maximum (ties break to the lowest index).
pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Weighted objective at one joint action. The caller guarantees shapes.
pub fn weighted_value(
    graph: &CoordinationGraph,
    f_v: &UtilityTable,
    f_e: &PayoffTable,
    w_v: &[f64],
    w_e: &[f64],
    bias: f64,
    a: &JointAction,
) -> f64 {
    let mut total = bias;
    for (i, &ai) in a.0.iter().enumerate() {
        total += w_v[i] * f_v.get(i, ai);
    }
    for (e, &(i, j)) in graph.edges().iter().enumerate() {
        total += w_e[e] * f_e.get(e, a.0[i], a.0[j]);
    }
    total
}

/// Directed messages along every edge. For edge `e = (i, j)`, `mu[e]` is the
/// forward message to the higher endpoint `j` (indexed by `j`'s action) and
/// `mu_bar[e]` is the backward message to `i` (indexed by `i`'s action).
/// After every round each message vector has zero mean over actions.
#[derive(Debug, Clone)]
pub struct MessageState {
    mu: Vec<Vec<f64>>,
    mu_bar: Vec<Vec<f64>>,
}

impl MessageState {
    pub fn new(graph: &CoordinationGraph) -> Self {
        let zeros = vec![vec![0.0; graph.n_actions()]; graph.n_edges()];
        Self { mu: zeros.clone(), mu_bar: zeros }
    }

    pub fn mu(&self) -> &[Vec<f64>] {
        &self.mu
    }

    pub fn mu_bar(&self) -> &[Vec<f64>] {
        &self.mu_bar
    }

    /// One synchronous round: every new message is computed from the previous
    /// round's marginals `q` and messages, then mean-normalized.
    pub fn round(&mut self, graph: &CoordinationGraph, fe_scaled: &[Vec<Vec<f64>>], q: &[Vec<f64>]) {
        let n_actions = graph.n_actions();
        let mut new_mu = vec![vec![0.0; n_actions]; graph.n_edges()];
        let mut new_mu_bar = vec![vec![0.0; n_actions]; graph.n_edges()];
        for (e, &(i, j)) in graph.edges().iter().enumerate() {
            // Forward: maximize over the sender i's action for each a_j,
            // removing the message i received along this edge.
            for aj in 0..n_actions {
                let mut best = f64::NEG_INFINITY;
                for ai in 0..n_actions {
                    let v = q[i][ai] - self.mu_bar[e][ai] + fe_scaled[e][ai][aj];
                    if v > best {
                        best = v;
                    }
                }
                new_mu[e][aj] = best;
            }
            // Backward: symmetric, over the receiver j's action.
            for ai in 0..n_actions {
                let mut best = f64::NEG_INFINITY;
                for aj in 0..n_actions {
                    let v = q[j][aj] - self.mu[e][aj] + fe_scaled[e][ai][aj];
                    if v > best {
                        best = v;
                    }
                }
                new_mu_bar[e][ai] = best;
            }
            let mean = new_mu[e].iter().sum::<f64>() / n_actions as f64;
            new_mu[e].iter_mut().for_each(|v| *v -= mean);
            let mean = new_mu_bar[e].iter().sum::<f64>() / n_actions as f64;
            new_mu_bar[e].iter_mut().for_each(|v| *v -= mean);
        }
        self.mu = new_mu;
        self.mu_bar = new_mu_bar;
    }
}

/// Result of one per-piece maximization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PieceSolveResult {
    /// Weighted objective of `a_max` (bias included).
    pub q_max: f64,
    pub a_max: JointAction,
    /// Per-agent marginal tables (`n_agents x n_actions`) of the best round.
    pub q_tables: Vec<Vec<f64>>,
}

/// Runs `k` rounds of weighted Max-Sum and returns the best decoded action
/// over all rounds.
///
/// Tables are first scaled by the piece weights. Marginals start as the
/// scaled utilities; each round updates all messages synchronously from the
/// previous round's state, mean-normalizes them, rebuilds marginals as scaled
/// utility plus incoming messages, and greedily decodes one action per agent
/// (ties to the lowest index). Deterministic; exact on trees once `k`
/// exceeds the graph diameter.
pub fn w_max_sum(
    graph: &CoordinationGraph,
    f_v: &UtilityTable,
    f_e: &PayoffTable,
    w_v: &[f64],
    w_e: &[f64],
    bias: f64,
    k: usize,
) -> Result<PieceSolveResult> {
    validate_tables(graph, f_v, f_e)?;
    validate_weights(graph, w_v, w_e, bias)?;
    if k == 0 {
        return Err(Error::invalid("k must be >= 1"));
    }
    let fv_scaled: Vec<Vec<f64>> = f_v
        .0
        .iter()
        .zip(w_v)
        .map(|(row, &w)| row.iter().map(|&v| w * v).collect())
        .collect();
    let fe_scaled: Vec<Vec<Vec<f64>>> = f_e
        .0
        .iter()
        .zip(w_e)
        .map(|(slice, &w)| {
            slice
                .iter()
                .map(|row| row.iter().map(|&v| w * v).collect())
                .collect()
        })
        .collect();
    let scaled_value = |a: &JointAction| -> f64 {
        let mut total = bias;
        for (i, &ai) in a.0.iter().enumerate() {
            total += fv_scaled[i][ai];
        }
        for (e, &(i, j)) in graph.edges().iter().enumerate() {
            total += fe_scaled[e][a.0[i]][a.0[j]];
        }
        total
    };

    let mut q = fv_scaled.clone();
    let mut a_max = JointAction(q.iter().map(|row| argmax(row)).collect());
    let mut q_max = f64::NEG_INFINITY;
    let mut best_tables = q.clone();
    let mut state = MessageState::new(graph);
    for _ in 0..k {
        state.round(graph, &fe_scaled, &q);
        for (i, qi) in q.iter_mut().enumerate() {
            qi.copy_from_slice(&fv_scaled[i]);
        }
        for (e, &(i, j)) in graph.edges().iter().enumerate() {
            for (a, (&m_fwd, &m_bwd)) in state.mu[e].iter().zip(&state.mu_bar[e]).enumerate() {
                q[j][a] += m_fwd;
                q[i][a] += m_bwd;
            }
        }
        let decoded = JointAction(q.iter().map(|row| argmax(row)).collect());
        let value = scaled_value(&decoded);
        if value > q_max {
            q_max = value;
            a_max = decoded;
            best_tables.clone_from(&q);
        }
    }
    Ok(PieceSolveResult { q_max, a_max, q_tables: best_tables })
}

/// Exhaustive maximum of the weighted objective over all joint actions.
/// Ties break to the lexicographically smallest joint action. Refused when
/// `n_actions^n_agents` exceeds [`JOINT_ACTION_CAP`].
pub fn exact_piece_max(
    graph: &CoordinationGraph,
    f_v: &UtilityTable,
    f_e: &PayoffTable,
    w_v: &[f64],
    w_e: &[f64],
    bias: f64,
) -> Result<(f64, JointAction)> {
    validate_tables(graph, f_v, f_e)?;
    validate_weights(graph, w_v, w_e, bias)?;
    check_joint_action_cap(graph)?;
    let mut best_q = f64::NEG_INFINITY;
    let mut best_a = None;
    for a in joint_actions(graph) {
        let v = weighted_value(graph, f_v, f_e, w_v, w_e, bias, &a);
        if v > best_q {
            best_q = v;
            best_a = Some(a);
        }
    }
    Ok((best_q, best_a.expect("graphs have at least one joint action")))
}

pub(crate) fn check_joint_action_cap(graph: &CoordinationGraph) -> Result<()> {
    let count = (graph.n_actions() as u128).checked_pow(graph.n_agents() as u32);
    match count {
        Some(c) if c <= JOINT_ACTION_CAP => Ok(()),
        _ => Err(Error::CapExceeded {
            cap: "joint-action enumeration",
            detail: format!(
                "{}^{} joint actions exceed the limit {JOINT_ACTION_CAP}",
                graph.n_actions(),
                graph.n_agents()
            ),
        }),
    }
}

fn validate_weights(graph: &CoordinationGraph, w_v: &[f64], w_e: &[f64], bias: f64) -> Result<()> {
    if w_v.len() != graph.n_agents() {
        return Err(Error::invalid(format!(
            "vertex weights have {} entries, graph has {} agents",
            w_v.len(),
            graph.n_agents()
        )));
    }
    if w_e.len() != graph.n_edges() {
        return Err(Error::invalid(format!(
            "edge weights have {} entries, graph has {} edges",
            w_e.len(),
            graph.n_edges()
        )));
    }
    if w_v.iter().chain(w_e).any(|v| !v.is_finite()) || !bias.is_finite() {
        return Err(Error::invalid("weights and bias must be finite"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::complete_graph;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tables(
        graph: &CoordinationGraph,
        rng: &mut ChaCha8Rng,
    ) -> (UtilityTable, PayoffTable) {
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

    #[test]
    fn single_edge_instance_is_solved_exactly() {
        let g = complete_graph(2, 2).unwrap();
        let f_v = UtilityTable(vec![vec![0.0; 2]; 2]);
        let f_e = PayoffTable(vec![vec![vec![1.0, 0.0], vec![0.0, 2.0]]]);
        let r = w_max_sum(&g, &f_v, &f_e, &[1.0, 1.0], &[1.0], 0.0, 4).unwrap();
        assert!((r.q_max - 2.0).abs() < 1e-12);
        assert_eq!(r.a_max.0, vec![1, 1]);
    }

    #[test]
    fn zero_weights_leave_only_the_bias() {
        let g = complete_graph(3, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (f_v, f_e) = random_tables(&g, &mut rng);
        let r = w_max_sum(&g, &f_v, &f_e, &[0.0; 3], &[0.0; 3], 5.0, 4).unwrap();
        assert_eq!(r.q_max, 5.0);
        // Zero tables everywhere: ties resolve to action 0 for every agent.
        assert_eq!(r.a_max.0, vec![0, 0, 0]);
    }

    #[test]
    fn path_graph_matches_exact_oracle() {
        for seed in 0..50u64 {
            let g = CoordinationGraph::new(3, 3, vec![(0, 1), (1, 2)]).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (f_v, f_e) = random_tables(&g, &mut rng);
            let w_v = [0.7, -0.3, 1.1];
            let w_e = [0.9, 1.4];
            let r = w_max_sum(&g, &f_v, &f_e, &w_v, &w_e, 0.25, 4).unwrap();
            let (q, _) = exact_piece_max(&g, &f_v, &f_e, &w_v, &w_e, 0.25).unwrap();
            assert!((r.q_max - q).abs() < 1e-9, "seed {seed}: {} vs {q}", r.q_max);
        }
    }

    #[test]
    fn best_round_never_beats_the_exact_maximum() {
        for seed in 0..50u64 {
            let g = complete_graph(4, 3).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (f_v, f_e) = random_tables(&g, &mut rng);
            let w_v: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let w_e: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let r = w_max_sum(&g, &f_v, &f_e, &w_v, &w_e, 0.0, 4).unwrap();
            let (q, _) = exact_piece_max(&g, &f_v, &f_e, &w_v, &w_e, 0.0).unwrap();
            assert!(r.q_max <= q + 1e-9, "seed {seed}");
            // The reported value is a realized joint action's value.
            let recomputed = weighted_value(&g, &f_v, &f_e, &w_v, &w_e, 0.0, &r.a_max);
            assert!((r.q_max - recomputed).abs() < 1e-9);
        }
    }

    #[test]
    fn messages_have_zero_mean_after_every_round() {
        let g = complete_graph(4, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (_, f_e) = random_tables(&g, &mut rng);
        let fe_scaled = f_e.0.clone();
        let q = vec![vec![0.3, -1.0, 0.7]; 4];
        let mut state = MessageState::new(&g);
        for _ in 0..6 {
            state.round(&g, &fe_scaled, &q);
            for msg in state.mu().iter().chain(state.mu_bar()) {
                let mean = msg.iter().sum::<f64>() / msg.len() as f64;
                assert!(mean.abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rejects_zero_rounds_and_bad_shapes() {
        let g = complete_graph(2, 2).unwrap();
        let f_v = UtilityTable(vec![vec![0.0; 2]; 2]);
        let f_e = PayoffTable(vec![vec![vec![0.0; 2]; 2]]);
        assert!(w_max_sum(&g, &f_v, &f_e, &[1.0, 1.0], &[1.0], 0.0, 0).is_err());
        assert!(w_max_sum(&g, &f_v, &f_e, &[1.0], &[1.0], 0.0, 4).is_err());
        assert!(w_max_sum(&g, &f_v, &f_e, &[1.0, 1.0], &[], 0.0, 4).is_err());
        assert!(w_max_sum(&g, &f_v, &f_e, &[1.0, f64::NAN], &[1.0], 0.0, 4).is_err());
    }

    #[test]
    fn exact_piece_max_examples() {
        let g = complete_graph(1, 2).unwrap();
        let f_v = UtilityTable(vec![vec![3.0, 1.0]]);
        let f_e = PayoffTable(vec![]);
        let (q, a) = exact_piece_max(&g, &f_v, &f_e, &[2.0], &[], 1.0).unwrap();
        assert_eq!(q, 7.0);
        assert_eq!(a.0, vec![0]);

        let g = complete_graph(3, 2).unwrap();
        let f_v = UtilityTable(vec![vec![0.0; 2]; 3]);
        let f_e = PayoffTable(vec![vec![vec![0.0; 2]; 2]; 3]);
        let (q, a) = exact_piece_max(&g, &f_v, &f_e, &[1.0; 3], &[1.0; 3], 2.5).unwrap();
        assert_eq!(q, 2.5);
        assert_eq!(a.0, vec![0, 0, 0]);
    }

    #[test]
    fn exact_piece_max_agrees_with_recomputation() {
        for seed in 0..20u64 {
            let g = complete_graph(4, 3).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (f_v, f_e) = random_tables(&g, &mut rng);
            let w_v: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let w_e: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (q, a) = exact_piece_max(&g, &f_v, &f_e, &w_v, &w_e, 0.5).unwrap();
            let recomputed = weighted_value(&g, &f_v, &f_e, &w_v, &w_e, 0.5, &a);
            assert!((q - recomputed).abs() < 1e-12);
        }
    }

    #[test]
    fn joint_action_cap_is_enforced() {
        let g = complete_graph(21, 2).unwrap();
        let f_v = UtilityTable(vec![vec![0.0; 2]; 21]);
        let f_e = PayoffTable(vec![vec![vec![0.0; 2]; 2]; g.n_edges()]);
        let w_v = vec![1.0; 21];
        let w_e = vec![1.0; g.n_edges()];
        match exact_piece_max(&g, &f_v, &f_e, &w_v, &w_e, 0.0) {
            Err(Error::CapExceeded { cap, .. }) => assert_eq!(cap, "joint-action enumeration"),
            other => panic!("expected cap error, got {other:?}"),
        }
    }
}
