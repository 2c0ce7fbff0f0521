//! TD-learning lab on a two-step cooperative matrix game, comparing a
//! learner whose value is mixed by a hypernet-generated LeakyReLU network
//! against a purely linear value decomposition.

mod env;
mod model;
mod rank;
mod train;

pub use env::{
    env_step, State, TwoStepGame, ACTION_A, ACTION_B, N_ACTIONS, N_AGENTS, STEP2A_REWARD,
    STEP2B_REWARDS,
};
pub use model::{game_graph, q_tot, q_tot_grad, LearnerModel, LinearModel, Mlp, ModelGradsView};
pub use rank::{least_squares_residual, rank_check, rank_check_with_rhs, rank_of};
pub use train::{
    greedy_rollout, td_update, train_matrix_game, train_matrix_game_full, CurvePoint, LearnerKind,
    Model, Optimizer, OptimizerKind, ReplayBuffer, TrainConfig, TrainReport, Transition,
};
