//! The two-step cooperative matrix game: agent 0's first action selects
//! which one-shot matrix the team plays next, then the episode ends.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::JointAction;

pub const N_AGENTS: usize = 4;
pub const N_ACTIONS: usize = 2;

/// Action indices: A = 0, B = 1.
pub const ACTION_A: usize = 0;
pub const ACTION_B: usize = 1;

/// Second-step reward in [`State::S2B`], indexed by the number of agents
/// playing B.
pub const STEP2B_REWARDS: [f64; 5] = [0.0, -0.1, 0.1, 0.3, 8.0];

/// Second-step reward in [`State::S2A`]: constant regardless of actions.
pub const STEP2A_REWARD: f64 = 7.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum State {
    /// First step; agent 0's action picks the next state.
    S1,
    /// Second step with a constant reward.
    S2A,
    /// Second step rewarded by the number of agents playing B.
    S2B,
    Terminal,
}

impl State {
    /// Index into one-hot encodings: S1 = 0, S2A = 1, S2B = 2.
    pub fn index(self) -> Option<usize> {
        match self {
            State::S1 => Some(0),
            State::S2A => Some(1),
            State::S2B => Some(2),
            State::Terminal => None,
        }
    }
}

/// Episode state machine; every episode is exactly two steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TwoStepGame {
    pub state: State,
}

impl TwoStepGame {
    pub fn new() -> Self {
        Self { state: State::S1 }
    }

    /// Advances the game and returns `(reward, next_state, done)`.
    pub fn step(&mut self, a: &JointAction) -> Result<(f64, State, bool)> {
        let (reward, next, done) = env_step(self.state, a)?;
        self.state = next;
        Ok((reward, next, done))
    }
}

impl Default for TwoStepGame {
    fn default() -> Self {
        Self::new()
    }
}

/// One transition of the game. The first step pays 0 and moves to the matrix
/// chosen by agent 0 (A to the constant-reward state, B to the count-reward
/// state); the second step pays the matrix entry and terminates.
pub fn env_step(state: State, a: &JointAction) -> Result<(f64, State, bool)> {
    if a.len() != N_AGENTS {
        return Err(Error::invalid(format!(
            "joint action has {} entries, the game has {N_AGENTS} agents",
            a.len()
        )));
    }
    if a.0.iter().any(|&ai| ai >= N_ACTIONS) {
        return Err(Error::invalid("actions must be 0 (A) or 1 (B)"));
    }
    match state {
        State::S1 => {
            let next = if a.0[0] == ACTION_A { State::S2A } else { State::S2B };
            Ok((0.0, next, false))
        }
        State::S2A => Ok((STEP2A_REWARD, State::Terminal, true)),
        State::S2B => {
            let n_b = a.0.iter().filter(|&&ai| ai == ACTION_B).count();
            Ok((STEP2B_REWARDS[n_b], State::Terminal, true))
        }
        State::Terminal => Err(Error::InvalidState("step after terminal".into())),
    }
}
