//! Solver library for coordination graphs whose global value is a
//! piecewise-linear (LeakyReLU) mixing network over per-agent utilities and
//! pairwise payoffs.
//!
//! The global value of a joint action is `f(q)` where `q` stacks the utility
//! and payoff entries selected by the action and `f` is a LeakyReLU network
//! with non-negative weights after its first layer. Each slope configuration
//! of the hidden units fixes `f` to one affine piece, so maximizing over
//! joint actions reduces to per-piece weighted DCOP problems:
//!
//! - [`enumerate_optimize`] solves every piece and is globally optimal with
//!   an exact inner maximizer;
//! - [`iterative_optimize`] walks from piece to piece following the realized
//!   configuration of the best action, with an annealing escape;
//! - [`w_max_sum`] is the weighted message-passing inner solver, exact on
//!   trees;
//! - [`brute_force_max`] is the ground-truth oracle over all joint actions.
//!
//! The [`matrix_game`] module holds a small TD-learning lab on a two-step
//! cooperative game that separates this representation from a purely linear
//! value decomposition, including the rank argument for why the linear form
//! cannot fit that game's payoffs.

pub mod error;
pub mod graph;
pub mod instances;
pub mod matrix_game;
pub mod maxsum;
pub mod mixing;
pub mod solve;

pub use error::{Error, Result};
pub use graph::{
    assemble_q_input, complete_graph, joint_actions, linear_cg_value, CoordinationGraph,
    JointAction, PayoffTable, QInput, UtilityTable,
};
pub use instances::{random_tree, sample_instance, sample_tables};
pub use maxsum::{exact_piece_max, w_max_sum, MessageState, PieceSolveResult};
pub use mixing::{
    all_configs, count_pieces, sample_random_net, AffinePiece, Layer, MixingNetwork,
    SlopeConfiguration,
};
pub use solve::{
    brute_force_max, enumerate_optimize, iterative_optimize, Inner, IterativeOptions, SolveResult,
    Termination,
};
