//! TD training loop for the two-step game: episode replay, target copies,
//! RMSProp-style updates, and the learned-value report.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::JointAction;
use crate::matrix_game::env::{State, TwoStepGame, N_ACTIONS, N_AGENTS};
use crate::matrix_game::model::{game_graph, q_tot, LearnerModel, LinearModel};
use crate::maxsum::w_max_sum;
use crate::solve::{enumerate_optimize, Inner};

/// Which value model to train.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    /// Hypernet-generated LeakyReLU mixing over utilities and payoffs.
    NonLinear,
    /// Mean utility plus mean payoff, no mixing.
    Linear,
}

/// One step of experience.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: State,
    pub action: JointAction,
    pub reward: f64,
    pub next: State,
    pub done: bool,
}

/// Ring buffer of episodes with FIFO eviction and uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    episodes: VecDeque<Vec<Transition>>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "capacity must be >= 1");
        Self { episodes: VecDeque::with_capacity(capacity), capacity }
    }

    pub fn push(&mut self, episode: Vec<Transition>) {
        if self.episodes.len() == self.capacity {
            self.episodes.pop_front();
        }
        self.episodes.push_back(episode);
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn episodes(&self) -> impl Iterator<Item = &[Transition]> {
        self.episodes.iter().map(Vec::as_slice)
    }

    /// Uniformly samples `count` distinct episodes (requires `count <=
    /// len()`) and returns their transitions flattened.
    pub fn sample(&self, rng: &mut ChaCha8Rng, count: usize) -> Vec<Transition> {
        assert!(count <= self.episodes.len());
        let mut indices: Vec<usize> = (0..self.episodes.len()).collect();
        for i in 0..count {
            let j = rng.gen_range(i..indices.len());
            indices.swap(i, j);
        }
        indices[..count]
            .iter()
            .flat_map(|&i| self.episodes[i].iter().cloned())
            .collect()
    }
}

/// Gradient step rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    /// Adaptive scaling: `v <- 0.99 v + 0.01 g^2`, `p -= lr g / (sqrt(v) + 1e-5)`.
    RmsProp,
    Sgd,
}

#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    sq_avg: Vec<f64>,
}

const RMSPROP_DECAY: f64 = 0.99;
const RMSPROP_EPS: f64 = 1e-5;

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, n_params: usize) -> Self {
        Self { kind, lr, sq_avg: vec![0.0; n_params] }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), grads.len());
        assert_eq!(params.len(), self.sq_avg.len());
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, &g) in params.iter_mut().zip(grads) {
                    *p -= self.lr * g;
                }
            }
            OptimizerKind::RmsProp => {
                for ((p, &g), v) in params.iter_mut().zip(grads).zip(&mut self.sq_avg) {
                    *v = RMSPROP_DECAY * *v + (1.0 - RMSPROP_DECAY) * g * g;
                    *p -= self.lr * g / (v.sqrt() + RMSPROP_EPS);
                }
            }
        }
    }
}

/// A trainable value model of either kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Model {
    NonLinear(LearnerModel),
    Linear(LinearModel),
}

impl Model {
    pub fn new(
        kind: LearnerKind,
        m_mix: usize,
        alpha: f64,
        hidden: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        Ok(match kind {
            LearnerKind::NonLinear => Model::NonLinear(LearnerModel::new(m_mix, alpha, hidden, rng)?),
            LearnerKind::Linear => Model::Linear(LinearModel::new(hidden, rng)),
        })
    }

    pub fn kind(&self) -> LearnerKind {
        match self {
            Model::NonLinear(_) => LearnerKind::NonLinear,
            Model::Linear(_) => LearnerKind::Linear,
        }
    }

    pub fn q(&self, state: State, a: &JointAction) -> Result<f64> {
        match self {
            Model::NonLinear(m) => q_tot(m, state, a),
            Model::Linear(m) => m.value(state, a),
        }
    }

    /// Value plus `scale * gradient` accumulated into `grad`.
    pub fn value_and_grad_into(
        &self,
        state: State,
        a: &JointAction,
        scale: f64,
        grad: &mut [f64],
    ) -> Result<f64> {
        match self {
            Model::NonLinear(m) => m.value_and_grad_into(state, a, scale, grad),
            Model::Linear(m) => m.value_and_grad_into(state, a, scale, grad),
        }
    }

    /// Greedy joint action and its value at a state. The mixed model solves
    /// every affine piece exactly; the linear model runs uniform-weight
    /// message passing for 4 rounds.
    pub fn solve(&self, state: State) -> Result<(f64, JointAction)> {
        match self {
            Model::NonLinear(m) => {
                let (f_v, f_e) = m.tables(state)?;
                let net = m.mixing_net(state)?;
                let r = enumerate_optimize(game_graph(), &f_v, &f_e, &net, Inner::Exact)?;
                Ok((r.q_max, r.a_max))
            }
            Model::Linear(m) => {
                let (f_v, f_e) = m.tables(state)?;
                let w_v = [1.0 / N_AGENTS as f64; N_AGENTS];
                let w_e = vec![1.0 / game_graph().n_edges() as f64; game_graph().n_edges()];
                let r = w_max_sum(game_graph(), &f_v, &f_e, &w_v, &w_e, 0.0, 4)?;
                Ok((r.q_max, r.a_max))
            }
        }
    }

    pub fn max_q(&self, state: State) -> Result<f64> {
        Ok(self.solve(state)?.0)
    }

    pub fn greedy(&self, state: State) -> Result<JointAction> {
        Ok(self.solve(state)?.1)
    }

    pub fn n_params(&self) -> usize {
        match self {
            Model::NonLinear(m) => m.n_params(),
            Model::Linear(m) => m.n_params(),
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        match self {
            Model::NonLinear(m) => m.flatten(),
            Model::Linear(m) => m.flatten(),
        }
    }

    pub fn assign(&mut self, flat: &[f64]) -> Result<()> {
        match self {
            Model::NonLinear(m) => m.assign(flat),
            Model::Linear(m) => m.assign(flat),
        }
    }
}

/// One TD step on a batch of transitions: squared error against
/// `r + gamma * max_a' q_target(s', a')` (plain `r` at terminal steps),
/// gradients averaged over the batch, one optimizer step. Returns the mean
/// squared TD error. The target model is read-only; its maxima are cached
/// per distinct next state.
pub fn td_update(
    model: &mut Model,
    target: &Model,
    batch: &[Transition],
    gamma: f64,
    opt: &mut Optimizer,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::invalid("batch must be non-empty"));
    }
    let mut target_max: [Option<f64>; 3] = [None; 3];
    let n = batch.len() as f64;
    let mut grads = vec![0.0; model.n_params()];
    let mut scratch = vec![0.0; model.n_params()];
    let mut loss = 0.0;
    for t in batch {
        let y = if t.done {
            t.reward
        } else {
            let idx = t
                .next
                .index()
                .ok_or_else(|| Error::InvalidState("non-terminal transition into terminal".into()))?;
            let max = match target_max[idx] {
                Some(v) => v,
                None => {
                    let v = target.max_q(t.next)?;
                    target_max[idx] = Some(v);
                    v
                }
            };
            t.reward + gamma * max
        };
        scratch.fill(0.0);
        let pred = model.value_and_grad_into(t.state, &t.action, 1.0, &mut scratch)?;
        let err = pred - y;
        loss += err * err;
        let scale = 2.0 * err / n;
        for (g, &d) in grads.iter_mut().zip(&scratch) {
            *g += scale * d;
        }
    }
    let mut params = model.flatten();
    opt.step(&mut params, &grads);
    model.assign(&params)?;
    Ok(loss / n)
}

/// Training hyperparameters. Defaults reproduce the representational-gap
/// experiment: 5000 fully exploratory episodes, 500-episode buffer, batches
/// of 32 episodes, target copy every 100 episodes, RMSProp at 5e-4.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learner: LearnerKind,
    pub episodes: usize,
    /// Exploration rate; 1.0 means uniformly random behavior.
    pub epsilon: f64,
    pub gamma: f64,
    pub buffer_episodes: usize,
    pub batch_episodes: usize,
    pub target_update_episodes: usize,
    pub lr: f64,
    /// Hidden width of the generated mixing network.
    pub m_mix: usize,
    /// Negative slope of the mixing activations.
    pub alpha: f64,
    /// Hidden width of the utility/payoff/hypernet MLPs.
    pub hidden: usize,
    pub optimizer: OptimizerKind,
    /// Episodes between learning-curve points.
    pub eval_interval: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learner: LearnerKind::NonLinear,
            episodes: 5000,
            epsilon: 1.0,
            gamma: 0.99,
            buffer_episodes: 500,
            batch_episodes: 32,
            target_update_episodes: 100,
            lr: 5e-4,
            m_mix: 4,
            alpha: 0.2,
            hidden: 64,
            optimizer: OptimizerKind::RmsProp,
            eval_interval: 100,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.episodes == 0
            || self.buffer_episodes == 0
            || self.batch_episodes == 0
            || self.target_update_episodes == 0
            || self.eval_interval == 0
        {
            return Err(Error::invalid("episode counts and intervals must be >= 1"));
        }
        if self.batch_episodes > self.buffer_episodes {
            return Err(Error::invalid("batch_episodes cannot exceed buffer_episodes"));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::invalid("epsilon must be in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::invalid("gamma must be in [0, 1]"));
        }
        Ok(())
    }
}

/// One learning-curve sample. `td_loss` is the mean TD loss since the
/// previous sample (absent before the first update).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub episode: usize,
    pub eval_return: f64,
    pub td_loss: Option<f64>,
}

/// Learned values after training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub learner: LearnerKind,
    pub seed: u64,
    /// First-state value of agent 0 playing A or B, each under the best
    /// completion by the other agents.
    pub q_state1: [f64; 2],
    /// Count-reward-state value by number of agents playing B, averaged over
    /// each permutation class.
    pub q_state2b_by_count: [f64; 5],
    /// 'A' or 'B': greedy first-step action of agent 0.
    pub greedy_first_action: char,
    /// Greedy episode return after training.
    pub eval_return: f64,
    /// Mean TD loss of the final update.
    pub final_loss: f64,
    pub curve: Vec<CurvePoint>,
}

fn random_action(rng: &mut ChaCha8Rng) -> JointAction {
    JointAction((0..N_AGENTS).map(|_| rng.gen_range(0..N_ACTIONS)).collect())
}

fn play_episode(model: &Model, epsilon: f64, rng: &mut ChaCha8Rng) -> Result<Vec<Transition>> {
    let mut game = TwoStepGame::new();
    let mut episode = Vec::with_capacity(2);
    loop {
        let state = game.state;
        let action = if rng.gen::<f64>() < epsilon {
            random_action(rng)
        } else {
            model.greedy(state)?
        };
        let (reward, next, done) = game.step(&action)?;
        episode.push(Transition { state, action, reward, next, done });
        if done {
            return Ok(episode);
        }
    }
}

/// Undiscounted return of one fully greedy episode.
pub fn greedy_rollout(model: &Model) -> Result<f64> {
    let mut game = TwoStepGame::new();
    let mut total = 0.0;
    loop {
        let action = model.greedy(game.state)?;
        let (reward, _, done) = game.step(&action)?;
        total += reward;
        if done {
            return Ok(total);
        }
    }
}

/// All 16 joint actions of the game.
fn all_actions() -> Vec<JointAction> {
    (0..1u32 << N_AGENTS)
        .map(|bits| JointAction((0..N_AGENTS).map(|i| (bits >> i & 1) as usize).collect()))
        .collect()
}

fn build_report(
    model: &Model,
    cfg: &TrainConfig,
    curve: Vec<CurvePoint>,
    final_loss: f64,
) -> Result<TrainReport> {
    let actions = all_actions();
    let mut q_state1 = [f64::NEG_INFINITY; 2];
    for a in &actions {
        let v = model.q(State::S1, a)?;
        let first = a.0[0];
        if v > q_state1[first] {
            q_state1[first] = v;
        }
    }
    let mut sums = [0.0; 5];
    let mut counts = [0usize; 5];
    for a in &actions {
        let n_b = a.0.iter().filter(|&&ai| ai == 1).count();
        sums[n_b] += model.q(State::S2B, a)?;
        counts[n_b] += 1;
    }
    let mut q_state2b_by_count = [0.0; 5];
    for (i, (&s, &c)) in sums.iter().zip(&counts).enumerate() {
        q_state2b_by_count[i] = s / c as f64;
    }
    let greedy_first_action = if q_state1[1] > q_state1[0] { 'B' } else { 'A' };
    Ok(TrainReport {
        learner: cfg.learner,
        seed: cfg.seed,
        q_state1,
        q_state2b_by_count,
        greedy_first_action,
        eval_return: greedy_rollout(model)?,
        final_loss,
        curve,
    })
}

/// Runs the full training loop and reports the learned values. Fully
/// deterministic per seed.
pub fn train_matrix_game(cfg: &TrainConfig) -> Result<TrainReport> {
    train_matrix_game_full(cfg).map(|(report, _)| report)
}

/// [`train_matrix_game`] variant that also returns the trained model, for
/// checkpointing.
pub fn train_matrix_game_full(cfg: &TrainConfig) -> Result<(TrainReport, Model)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = Model::new(cfg.learner, cfg.m_mix, cfg.alpha, cfg.hidden, &mut rng)?;
    let mut target = model.clone();
    let mut opt = Optimizer::new(cfg.optimizer, cfg.lr, model.n_params());
    let mut buffer = ReplayBuffer::new(cfg.buffer_episodes);
    let mut curve = Vec::with_capacity(cfg.episodes / cfg.eval_interval);
    let mut loss_sum = 0.0;
    let mut loss_count = 0usize;
    let mut final_loss = f64::NAN;
    for ep in 1..=cfg.episodes {
        let episode = play_episode(&model, cfg.epsilon, &mut rng)?;
        buffer.push(episode);
        if buffer.len() >= cfg.batch_episodes {
            let batch = buffer.sample(&mut rng, cfg.batch_episodes);
            let loss = td_update(&mut model, &target, &batch, cfg.gamma, &mut opt)?;
            loss_sum += loss;
            loss_count += 1;
            final_loss = loss;
        }
        if ep % cfg.target_update_episodes == 0 {
            target = model.clone();
        }
        if ep % cfg.eval_interval == 0 {
            let td_loss = (loss_count > 0).then(|| loss_sum / loss_count as f64);
            curve.push(CurvePoint { episode: ep, eval_return: greedy_rollout(&model)?, td_loss });
            loss_sum = 0.0;
            loss_count = 0;
        }
    }
    let report = build_report(&model, cfg, curve, final_loss)?;
    Ok((report, model))
}
