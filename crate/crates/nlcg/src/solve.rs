//! Joint-action optimization of the mixed value: full enumeration of affine
//! pieces (globally optimal with an exact inner maximizer), an iterative
//! local search with an annealing escape, and a brute-force oracle over all
//! joint actions.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{
    assemble_q_input, joint_actions, validate_tables, CoordinationGraph, JointAction, PayoffTable,
    UtilityTable,
};
use crate::maxsum::{check_joint_action_cap, exact_piece_max, w_max_sum};
use crate::mixing::{all_configs, MixingNetwork, SlopeConfiguration};

/// Tolerance for the dominance check between a piece value and the true
/// network value at the piece's maximizer.
const DOMINANCE_TOL: f64 = 1e-9;

/// How a solve run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// The iterative search settled on a piece with no escape left.
    Converged,
    /// The configured iteration budget ran out. Enumeration always reports
    /// this: it runs its full schedule.
    BudgetExhausted,
    /// The annealing coin ended the search on a settled piece.
    AnnealingBreak,
    /// The search moved onto a configuration it had already solved.
    RevisitDetected,
}

/// Outcome of a solve: the best joint action found, its true network value,
/// and how the search progressed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub a_max: JointAction,
    /// True network value at `a_max` (recomputed by a forward pass).
    pub q_max: f64,
    /// Number of pieces handed to the inner maximizer.
    pub pieces_visited: u64,
    /// Accepted values in order; non-decreasing, last entry equals `q_max`.
    pub value_trace: Vec<f64>,
    pub terminated_by: Termination,
}

/// Inner per-piece maximizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Inner {
    /// Weighted Max-Sum with the given number of message rounds.
    MaxSum { rounds: usize },
    /// Exhaustive maximization over all joint actions.
    Exact,
}

/// Knobs of [`iterative_optimize`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterativeOptions {
    /// Message rounds per inner Max-Sum call.
    pub rounds: usize,
    /// Maximum number of pieces to solve.
    pub n_max: usize,
    /// Base of the annealing schedule `eps_n = epsilon0 / (1 + n)`.
    pub epsilon0: f64,
    /// When false (default), a settled piece breaks with probability `eps_n`
    /// and otherwise jumps to a random unvisited configuration; when true the
    /// two probabilities swap.
    pub invert_annealing: bool,
    pub seed: u64,
}

impl Default for IterativeOptions {
    fn default() -> Self {
        Self { rounds: 4, n_max: 16, epsilon0: 0.2, invert_annealing: false, seed: 0 }
    }
}

fn validate_net(graph: &CoordinationGraph, net: &MixingNetwork) -> Result<()> {
    if net.input_dim() != graph.input_dim() {
        return Err(Error::invalid(format!(
            "network expects input dim {}, graph produces {}",
            net.input_dim(),
            graph.input_dim()
        )));
    }
    Ok(())
}

fn solve_piece(
    graph: &CoordinationGraph,
    f_v: &UtilityTable,
    f_e: &PayoffTable,
    net: &MixingNetwork,
    c: &SlopeConfiguration,
    inner: Inner,
) -> Result<(f64, JointAction)> {
    let piece = net.piece(c)?;
    let (w_v, w_e) = piece.split(graph)?;
    match inner {
        Inner::Exact => exact_piece_max(graph, f_v, f_e, w_v, w_e, piece.bias),
        Inner::MaxSum { rounds } => {
            let r = w_max_sum(graph, f_v, f_e, w_v, w_e, piece.bias, rounds)?;
            Ok((r.q_max, r.a_max))
        }
    }
}

/// Solves every slope configuration with the inner maximizer and keeps the
/// candidate with the best true network value. With [`Inner::Exact`] the
/// result is the global maximum of the network over all joint actions: the
/// realized piece of any candidate dominates the piece it was found on, so
/// taking the best true value across all pieces loses nothing.
pub fn enumerate_optimize(
    graph: &CoordinationGraph,
    f_v: &UtilityTable,
    f_e: &PayoffTable,
    net: &MixingNetwork,
    inner: Inner,
) -> Result<SolveResult> {
    validate_tables(graph, f_v, f_e)?;
    validate_net(graph, net)?;
    if inner == Inner::Exact {
        check_joint_action_cap(graph)?;
    }
    let configs = all_configs(net.n_hidden())?;
    let mut best_v = f64::NEG_INFINITY;
    let mut a_max: Option<JointAction> = None;
    let mut trace = Vec::new();
    for c in &configs {
        let (piece_value, a) = solve_piece(graph, f_v, f_e, net, c, inner)?;
        let q = assemble_q_input(graph, f_v, f_e, &a)?;
        let (v, _) = net.forward(&q)?;
        debug_assert!(
            v >= piece_value - DOMINANCE_TOL,
            "true value {v} under piece value {piece_value}"
        );
        if v > best_v {
            best_v = v;
            a_max = Some(a);
            trace.push(v);
        }
    }
    Ok(SolveResult {
        a_max: a_max.expect("at least one configuration"),
        q_max: best_v,
        pieces_visited: configs.len() as u64,
        value_trace: trace,
        terminated_by: Termination::BudgetExhausted,
    })
}

/// Local search over slope configurations. Starts from the all-ones
/// configuration, solves the current piece with weighted Max-Sum, and moves
/// to the realized configuration of the best action found so far. A settled
/// piece (realized == current) either ends the search or jumps to a random
/// unvisited configuration, governed by the annealing schedule. Revisiting a
/// solved configuration ends the search. Deterministic per seed; the number
/// of solved pieces never exceeds `min(n_max, 2^m)`.
pub fn iterative_optimize(
    graph: &CoordinationGraph,
    f_v: &UtilityTable,
    f_e: &PayoffTable,
    net: &MixingNetwork,
    opts: &IterativeOptions,
) -> Result<SolveResult> {
    validate_tables(graph, f_v, f_e)?;
    validate_net(graph, net)?;
    if opts.n_max == 0 {
        return Err(Error::invalid("n_max must be >= 1"));
    }
    if !(0.0..=1.0).contains(&opts.epsilon0) {
        return Err(Error::invalid(format!("epsilon0 {} outside [0, 1]", opts.epsilon0)));
    }
    let m = net.n_hidden();
    // With slope 1 on both branches every bitmask denotes the same piece;
    // canonicalize so configuration equality means piece equality.
    let single_piece = net.alpha() == 1.0;
    let space: u128 = if single_piece { 1 } else { 1u128 << m };
    let canon = |c: SlopeConfiguration| if single_piece { SlopeConfiguration::all_one(m) } else { c };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut visited: HashSet<u64> = HashSet::new();
    let mut c_p = SlopeConfiguration::all_one(m);
    let mut best_v = f64::NEG_INFINITY;
    let mut a_max: Option<JointAction> = None;
    let mut trace = Vec::new();
    let mut termination = Termination::BudgetExhausted;

    for n in 1..=opts.n_max {
        if visited.contains(&c_p.bits()) {
            termination = Termination::RevisitDetected;
            break;
        }
        visited.insert(c_p.bits());
        let (piece_value, a) =
            solve_piece(graph, f_v, f_e, net, &c_p, Inner::MaxSum { rounds: opts.rounds })?;
        let q = assemble_q_input(graph, f_v, f_e, &a)?;
        let (v, _) = net.forward(&q)?;
        debug_assert!(v >= piece_value - DOMINANCE_TOL);
        if v > best_v {
            best_v = v;
            a_max = Some(a);
            trace.push(v);
        }
        let best_q = assemble_q_input(graph, f_v, f_e, a_max.as_ref().unwrap())?;
        let (_, realized) = net.forward(&best_q)?;
        let c_real = canon(realized);
        if c_real != c_p {
            c_p = c_real;
            continue;
        }
        if visited.len() as u128 >= space {
            termination = Termination::Converged;
            break;
        }
        let eps = opts.epsilon0 / (1.0 + n as f64);
        let coin: f64 = rng.gen();
        let break_now = if opts.invert_annealing { coin >= eps } else { coin < eps };
        if break_now {
            termination = Termination::AnnealingBreak;
            break;
        }
        c_p = sample_unvisited(&mut rng, m, &visited);
    }

    Ok(SolveResult {
        a_max: a_max.expect("n_max >= 1 solves at least one piece"),
        q_max: best_v,
        pieces_visited: visited.len() as u64,
        value_trace: trace,
        terminated_by: termination,
    })
}

/// Uniform draw from the unvisited configurations: rejection-sample bitmasks
/// (100 tries), then fall back to the first unvisited in ascending order.
/// The caller guarantees an unvisited configuration exists.
fn sample_unvisited(rng: &mut ChaCha8Rng, m: usize, visited: &HashSet<u64>) -> SlopeConfiguration {
    let mask = if m == 64 { u64::MAX } else { (1u64 << m) - 1 };
    for _ in 0..100 {
        let bits = rng.gen::<u64>() & mask;
        if !visited.contains(&bits) {
            return SlopeConfiguration::from_bits(bits, m);
        }
    }
    for bits in 0..=mask {
        if !visited.contains(&bits) {
            return SlopeConfiguration::from_bits(bits, m);
        }
    }
    unreachable!("caller guarantees an unvisited configuration")
}

/// Exhaustive maximum of the network value over all joint actions; ties
/// break to the lexicographically smallest action. Refused above the
/// joint-action cap.
pub fn brute_force_max(
    graph: &CoordinationGraph,
    f_v: &UtilityTable,
    f_e: &PayoffTable,
    net: &MixingNetwork,
) -> Result<(f64, JointAction)> {
    validate_tables(graph, f_v, f_e)?;
    validate_net(graph, net)?;
    check_joint_action_cap(graph)?;
    let mut best_q = f64::NEG_INFINITY;
    let mut best_a = None;
    for a in joint_actions(graph) {
        let q = assemble_q_input(graph, f_v, f_e, &a)?;
        let (v, _) = net.forward(&q)?;
        if v > best_q {
            best_q = v;
            best_a = Some(a);
        }
    }
    Ok((best_q, best_a.expect("graphs have at least one joint action")))
}
