//! Value models for the two-step game: shared utility and payoff MLPs over
//! one-hot inputs, combined either by a hypernet-generated LeakyReLU mixing
//! network or by the plain linear value.

use std::sync::OnceLock;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{
    assemble_q_input, linear_cg_value, CoordinationGraph, JointAction, PayoffTable, UtilityTable,
};
use crate::matrix_game::env::{State, N_ACTIONS, N_AGENTS};
use crate::mixing::{Layer, MixingNetwork};

/// One-hot state width (terminal states are never evaluated).
pub const STATE_DIM: usize = 3;
/// Utility net input: one-hot state plus one-hot agent id.
pub const UTILITY_IN: usize = STATE_DIM + N_AGENTS;
/// Payoff net input: one-hot state plus one-hot ids of both endpoints.
pub const PAYOFF_IN: usize = STATE_DIM + 2 * N_AGENTS;

/// Complete graph over the game's four agents; edge order fixes the payoff
/// layout used everywhere below.
pub fn game_graph() -> &'static CoordinationGraph {
    static GRAPH: OnceLock<CoordinationGraph> = OnceLock::new();
    GRAPH.get_or_init(|| CoordinationGraph::complete(N_AGENTS, N_ACTIONS).expect("static graph"))
}

/// One-hidden-layer MLP with ReLU. `w1` has shape `in x hidden`, `w2` has
/// shape `hidden x out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub w1: Vec<Vec<f64>>,
    pub b1: Vec<f64>,
    pub w2: Vec<Vec<f64>>,
    pub b2: Vec<f64>,
}

impl Mlp {
    /// Uniform init in `(-1/sqrt(fan_in), 1/sqrt(fan_in))` per layer.
    pub fn init(in_dim: usize, hidden: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let s1 = 1.0 / (in_dim as f64).sqrt();
        let s2 = 1.0 / (hidden as f64).sqrt();
        Self {
            w1: (0..in_dim)
                .map(|_| (0..hidden).map(|_| rng.gen_range(-s1..s1)).collect())
                .collect(),
            b1: (0..hidden).map(|_| rng.gen_range(-s1..s1)).collect(),
            w2: (0..hidden)
                .map(|_| (0..out_dim).map(|_| rng.gen_range(-s2..s2)).collect())
                .collect(),
            b2: (0..out_dim).map(|_| rng.gen_range(-s2..s2)).collect(),
        }
    }

    pub fn zeros(in_dim: usize, hidden: usize, out_dim: usize) -> Self {
        Self {
            w1: vec![vec![0.0; hidden]; in_dim],
            b1: vec![0.0; hidden],
            w2: vec![vec![0.0; out_dim]; hidden],
            b2: vec![0.0; out_dim],
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w1.len()
    }

    pub fn hidden_dim(&self) -> usize {
        self.b1.len()
    }

    pub fn out_dim(&self) -> usize {
        self.b2.len()
    }

    pub fn n_params(&self) -> usize {
        let (i, h, o) = (self.in_dim(), self.hidden_dim(), self.out_dim());
        i * h + h + h * o + o
    }

    /// Forward pass returning the hidden pre-activation (needed by
    /// [`Mlp::accumulate_grad`]) and the output.
    pub fn forward_cached(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        debug_assert_eq!(x.len(), self.in_dim());
        let mut z1 = self.b1.clone();
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                for (j, z) in z1.iter_mut().enumerate() {
                    *z += xi * self.w1[i][j];
                }
            }
        }
        let mut out = self.b2.clone();
        for (j, &z) in z1.iter().enumerate() {
            if z > 0.0 {
                for (k, o) in out.iter_mut().enumerate() {
                    *o += z * self.w2[j][k];
                }
            }
        }
        (z1, out)
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.forward_cached(x).1
    }

    /// Accumulates `scale * d(upstream . out)/d(params)` into `grad`, a flat
    /// slice of length `n_params()` laid out as `w1 | b1 | w2 | b2`
    /// (matrices row-major). `z1` must come from `forward_cached(x)`.
    pub fn accumulate_grad(
        &self,
        x: &[f64],
        z1: &[f64],
        upstream: &[f64],
        scale: f64,
        grad: &mut [f64],
    ) {
        let (i_dim, h, o) = (self.in_dim(), self.hidden_dim(), self.out_dim());
        debug_assert_eq!(grad.len(), self.n_params());
        let (g_w1, rest) = grad.split_at_mut(i_dim * h);
        let (g_b1, rest) = rest.split_at_mut(h);
        let (g_w2, g_b2) = rest.split_at_mut(h * o);
        for (k, &u) in upstream.iter().enumerate() {
            g_b2[k] += scale * u;
        }
        let mut dz1 = vec![0.0; h];
        for j in 0..h {
            if z1[j] > 0.0 {
                let mut dh = 0.0;
                for (k, &u) in upstream.iter().enumerate() {
                    g_w2[j * o + k] += scale * u * z1[j];
                    dh += self.w2[j][k] * u;
                }
                dz1[j] = dh;
            }
        }
        for (j, &d) in dz1.iter().enumerate() {
            g_b1[j] += scale * d;
        }
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                for (j, &d) in dz1.iter().enumerate() {
                    g_w1[i * h + j] += scale * d * xi;
                }
            }
        }
    }

    pub fn write_flat(&self, out: &mut Vec<f64>) {
        for row in &self.w1 {
            out.extend_from_slice(row);
        }
        out.extend_from_slice(&self.b1);
        for row in &self.w2 {
            out.extend_from_slice(row);
        }
        out.extend_from_slice(&self.b2);
    }

    pub fn read_flat(&mut self, src: &[f64], pos: &mut usize) {
        let rows = self.w1.iter_mut().chain([&mut self.b1]).chain(self.w2.iter_mut()).chain([&mut self.b2]);
        for row in rows {
            let n = row.len();
            row.copy_from_slice(&src[*pos..*pos + n]);
            *pos += n;
        }
    }
}

/// Value model mixed by a hypernet-generated LeakyReLU network.
///
/// The hypernet maps the one-hot state to every parameter of a two-layer
/// mixing network over the 10 utility/payoff inputs: first `10 * m_mix`
/// outputs form the first-layer weights (row-major by input), then `m_mix`
/// first-layer biases, then `m_mix` second-layer weights (taken through
/// absolute value, which keeps them non-negative), then the scalar output
/// bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerModel {
    pub utility: Mlp,
    pub payoff: Mlp,
    pub hyper: Mlp,
    pub m_mix: usize,
    pub alpha: f64,
}

pub(crate) fn one_hot(len: usize, idx: usize) -> Vec<f64> {
    let mut v = vec![0.0; len];
    v[idx] = 1.0;
    v
}

fn state_index(state: State) -> Result<usize> {
    state
        .index()
        .ok_or_else(|| Error::InvalidState("terminal states have no value".into()))
}

pub(crate) fn utility_input(state_idx: usize, agent: usize) -> Vec<f64> {
    let mut x = vec![0.0; UTILITY_IN];
    x[state_idx] = 1.0;
    x[STATE_DIM + agent] = 1.0;
    x
}

pub(crate) fn payoff_input(state_idx: usize, i: usize, j: usize) -> Vec<f64> {
    let mut x = vec![0.0; PAYOFF_IN];
    x[state_idx] = 1.0;
    x[STATE_DIM + i] = 1.0;
    x[STATE_DIM + N_AGENTS + j] = 1.0;
    x
}

impl LearnerModel {
    pub fn new(m_mix: usize, alpha: f64, hidden: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        if m_mix == 0 {
            return Err(Error::invalid("m_mix must be >= 1"));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::invalid(format!("alpha {alpha} outside [0, 1]")));
        }
        let d = game_graph().input_dim();
        Ok(Self {
            utility: Mlp::init(UTILITY_IN, hidden, N_ACTIONS, rng),
            payoff: Mlp::init(PAYOFF_IN, hidden, N_ACTIONS * N_ACTIONS, rng),
            hyper: Mlp::init(STATE_DIM, hidden, (d + 2) * m_mix + 1, rng),
            m_mix,
            alpha,
        })
    }

    /// All-zero parameters; the value is 0 for every state and action.
    pub fn zeros(m_mix: usize, alpha: f64, hidden: usize) -> Self {
        let d = game_graph().input_dim();
        Self {
            utility: Mlp::zeros(UTILITY_IN, hidden, N_ACTIONS),
            payoff: Mlp::zeros(PAYOFF_IN, hidden, N_ACTIONS * N_ACTIONS),
            hyper: Mlp::zeros(STATE_DIM, hidden, (d + 2) * m_mix + 1),
            m_mix,
            alpha,
        }
    }

    /// Utility and payoff tables at one state, shaped for [`game_graph`].
    pub fn tables(&self, state: State) -> Result<(UtilityTable, PayoffTable)> {
        let s = state_index(state)?;
        let utilities = (0..N_AGENTS)
            .map(|agent| self.utility.forward(&utility_input(s, agent)))
            .collect();
        let payoffs = game_graph()
            .edges()
            .iter()
            .map(|&(i, j)| {
                let out = self.payoff.forward(&payoff_input(s, i, j));
                (0..N_ACTIONS)
                    .map(|ai| (0..N_ACTIONS).map(|aj| out[ai * N_ACTIONS + aj]).collect())
                    .collect()
            })
            .collect();
        Ok((UtilityTable(utilities), PayoffTable(payoffs)))
    }

    /// Mixing network generated for one state.
    pub fn mixing_net(&self, state: State) -> Result<MixingNetwork> {
        let s = state_index(state)?;
        let g = self.hyper.forward(&one_hot(STATE_DIM, s));
        let d = game_graph().input_dim();
        let m = self.m_mix;
        let w1 = (0..d).map(|i| g[i * m..(i + 1) * m].to_vec()).collect();
        let b1 = g[d * m..(d + 1) * m].to_vec();
        let w2 = (0..m).map(|j| vec![g[(d + 1) * m + j].abs()]).collect();
        let b2 = vec![g[(d + 2) * m]];
        MixingNetwork::new(
            self.alpha,
            vec![Layer { w: w1, b: b1 }, Layer { w: w2, b: b2 }],
        )
    }

    pub fn n_params(&self) -> usize {
        self.utility.n_params() + self.payoff.n_params() + self.hyper.n_params()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        self.utility.write_flat(&mut out);
        self.payoff.write_flat(&mut out);
        self.hyper.write_flat(&mut out);
        out
    }

    pub fn assign(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::invalid(format!(
                "flat vector has {} entries, model has {} parameters",
                flat.len(),
                self.n_params()
            )));
        }
        let mut pos = 0;
        self.utility.read_flat(flat, &mut pos);
        self.payoff.read_flat(flat, &mut pos);
        self.hyper.read_flat(flat, &mut pos);
        Ok(())
    }

    /// Splits a flat gradient (or parameter) vector into per-net slices.
    pub fn split_flat<'a>(&self, flat: &'a [f64]) -> ModelGradsView<'a> {
        let (utility, rest) = flat.split_at(self.utility.n_params());
        let (payoff, hyper) = rest.split_at(self.payoff.n_params());
        ModelGradsView { utility, payoff, hyper }
    }

    /// Value and gradient in one pass; `scale * d(value)/d(params)` is added
    /// into `grad`, which must have length `n_params()`.
    pub fn value_and_grad_into(
        &self,
        state: State,
        a: &JointAction,
        scale: f64,
        grad: &mut [f64],
    ) -> Result<f64> {
        let s = state_index(state)?;
        if a.len() != N_AGENTS || a.0.iter().any(|&ai| ai >= N_ACTIONS) {
            return Err(Error::invalid("joint action does not fit the game"));
        }
        debug_assert_eq!(grad.len(), self.n_params());
        let (g_util, rest) = grad.split_at_mut(self.utility.n_params());
        let (g_pay, g_hyper) = rest.split_at_mut(self.payoff.n_params());

        let d = game_graph().input_dim();
        let m = self.m_mix;

        // Forward with caches.
        let util_x: Vec<Vec<f64>> = (0..N_AGENTS).map(|v| utility_input(s, v)).collect();
        let util_fwd: Vec<(Vec<f64>, Vec<f64>)> =
            util_x.iter().map(|x| self.utility.forward_cached(x)).collect();
        let edges = game_graph().edges();
        let pay_x: Vec<Vec<f64>> = edges.iter().map(|&(i, j)| payoff_input(s, i, j)).collect();
        let pay_fwd: Vec<(Vec<f64>, Vec<f64>)> =
            pay_x.iter().map(|x| self.payoff.forward_cached(x)).collect();
        let hyper_x = one_hot(STATE_DIM, s);
        let (hyper_z1, g) = self.hyper.forward_cached(&hyper_x);

        let mut q = vec![0.0; d];
        for v in 0..N_AGENTS {
            q[v] = util_fwd[v].1[a.0[v]];
        }
        for (e, &(i, j)) in edges.iter().enumerate() {
            q[N_AGENTS + e] = pay_fwd[e].1[a.0[i] * N_ACTIONS + a.0[j]];
        }

        // Mixing forward: z1m = W1^T q + b1, value = |g2| . h1m + b2.
        let mut z1m = vec![0.0; m];
        for j in 0..m {
            let mut z = g[d * m + j];
            for (i, &qi) in q.iter().enumerate() {
                z += qi * g[i * m + j];
            }
            z1m[j] = z;
        }
        let slopes: Vec<f64> =
            z1m.iter().map(|&z| if z >= 0.0 { 1.0 } else { self.alpha }).collect();
        let mut value = g[(d + 2) * m];
        for j in 0..m {
            value += g[(d + 1) * m + j].abs() * slopes[j] * z1m[j];
        }

        // Backward into the hypernet outputs.
        let mut dg = vec![0.0; g.len()];
        dg[(d + 2) * m] = 1.0;
        let mut dq = vec![0.0; d];
        for j in 0..m {
            let w2 = g[(d + 1) * m + j].abs();
            let h1 = slopes[j] * z1m[j];
            let sign = if g[(d + 1) * m + j] > 0.0 {
                1.0
            } else if g[(d + 1) * m + j] < 0.0 {
                -1.0
            } else {
                0.0
            };
            dg[(d + 1) * m + j] = sign * h1;
            let dz = w2 * slopes[j];
            dg[d * m + j] = dz;
            for (i, &qi) in q.iter().enumerate() {
                dg[i * m + j] = dz * qi;
                dq[i] += dz * g[i * m + j];
            }
        }
        self.hyper.accumulate_grad(&hyper_x, &hyper_z1, &dg, scale, g_hyper);

        // Through the table entries into the utility and payoff nets.
        let mut upstream = vec![0.0; N_ACTIONS];
        for v in 0..N_AGENTS {
            upstream.fill(0.0);
            upstream[a.0[v]] = dq[v];
            self.utility.accumulate_grad(&util_x[v], &util_fwd[v].0, &upstream, scale, g_util);
        }
        let mut upstream = vec![0.0; N_ACTIONS * N_ACTIONS];
        for (e, &(i, j)) in edges.iter().enumerate() {
            upstream.fill(0.0);
            upstream[a.0[i] * N_ACTIONS + a.0[j]] = dq[N_AGENTS + e];
            self.payoff.accumulate_grad(&pay_x[e], &pay_fwd[e].0, &upstream, scale, g_pay);
        }
        Ok(value)
    }
}

/// Borrowed per-net slices of a flat parameter or gradient vector.
#[derive(Debug, Clone, Copy)]
pub struct ModelGradsView<'a> {
    pub utility: &'a [f64],
    pub payoff: &'a [f64],
    pub hyper: &'a [f64],
}

/// Global value of a joint action under the hypernet-mixed model, evaluated
/// through the library path (tables, input assembly, mixing forward).
pub fn q_tot(model: &LearnerModel, state: State, a: &JointAction) -> Result<f64> {
    let (f_v, f_e) = model.tables(state)?;
    let q = assemble_q_input(game_graph(), &f_v, &f_e, a)?;
    let (v, _) = model.mixing_net(state)?.forward(&q)?;
    Ok(v)
}

/// Value plus the flat gradient with respect to every model parameter,
/// aligned with [`LearnerModel::flatten`].
pub fn q_tot_grad(model: &LearnerModel, state: State, a: &JointAction) -> Result<(f64, Vec<f64>)> {
    let mut grad = vec![0.0; model.n_params()];
    let v = model.value_and_grad_into(state, a, 1.0, &mut grad)?;
    Ok((v, grad))
}

/// Value model without mixing: mean utility plus mean payoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub utility: Mlp,
    pub payoff: Mlp,
}

impl LinearModel {
    pub fn new(hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        Self {
            utility: Mlp::init(UTILITY_IN, hidden, N_ACTIONS, rng),
            payoff: Mlp::init(PAYOFF_IN, hidden, N_ACTIONS * N_ACTIONS, rng),
        }
    }

    pub fn tables(&self, state: State) -> Result<(UtilityTable, PayoffTable)> {
        let s = state_index(state)?;
        let utilities = (0..N_AGENTS)
            .map(|agent| self.utility.forward(&utility_input(s, agent)))
            .collect();
        let payoffs = game_graph()
            .edges()
            .iter()
            .map(|&(i, j)| {
                let out = self.payoff.forward(&payoff_input(s, i, j));
                (0..N_ACTIONS)
                    .map(|ai| (0..N_ACTIONS).map(|aj| out[ai * N_ACTIONS + aj]).collect())
                    .collect()
            })
            .collect();
        Ok((UtilityTable(utilities), PayoffTable(payoffs)))
    }

    pub fn value(&self, state: State, a: &JointAction) -> Result<f64> {
        let (f_v, f_e) = self.tables(state)?;
        linear_cg_value(game_graph(), &f_v, &f_e, a)
    }

    pub fn n_params(&self) -> usize {
        self.utility.n_params() + self.payoff.n_params()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        self.utility.write_flat(&mut out);
        self.payoff.write_flat(&mut out);
        out
    }

    pub fn assign(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::invalid(format!(
                "flat vector has {} entries, model has {} parameters",
                flat.len(),
                self.n_params()
            )));
        }
        let mut pos = 0;
        self.utility.read_flat(flat, &mut pos);
        self.payoff.read_flat(flat, &mut pos);
        Ok(())
    }

    /// Value and scaled gradient, mirroring
    /// [`LearnerModel::value_and_grad_into`].
    pub fn value_and_grad_into(
        &self,
        state: State,
        a: &JointAction,
        scale: f64,
        grad: &mut [f64],
    ) -> Result<f64> {
        let s = state_index(state)?;
        if a.len() != N_AGENTS || a.0.iter().any(|&ai| ai >= N_ACTIONS) {
            return Err(Error::invalid("joint action does not fit the game"));
        }
        let (g_util, g_pay) = grad.split_at_mut(self.utility.n_params());
        let edges = game_graph().edges();
        let u_scale = 1.0 / N_AGENTS as f64;
        let p_scale = 1.0 / edges.len() as f64;
        let mut value = 0.0;
        let mut upstream = vec![0.0; N_ACTIONS];
        for v in 0..N_AGENTS {
            let x = utility_input(s, v);
            let (z1, out) = self.utility.forward_cached(&x);
            value += u_scale * out[a.0[v]];
            upstream.fill(0.0);
            upstream[a.0[v]] = u_scale;
            self.utility.accumulate_grad(&x, &z1, &upstream, scale, g_util);
        }
        let mut upstream = vec![0.0; N_ACTIONS * N_ACTIONS];
        for &(i, j) in edges {
            let x = payoff_input(s, i, j);
            let (z1, out) = self.payoff.forward_cached(&x);
            let idx = a.0[i] * N_ACTIONS + a.0[j];
            value += p_scale * out[idx];
            upstream.fill(0.0);
            upstream[idx] = p_scale;
            self.payoff.accumulate_grad(&x, &z1, &upstream, scale, g_pay);
        }
        Ok(value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn all_joint_actions() -> Vec<JointAction> {
        (0..16u32)
            .map(|bits| JointAction((0..4).map(|i| (bits >> i & 1) as usize).collect()))
            .collect()
    }

    #[test]
    fn zero_model_values_everything_at_zero() {
        let model = LearnerModel::zeros(4, 0.2, 8);
        for state in [State::S1, State::S2A, State::S2B] {
            for a in all_joint_actions() {
                assert_eq!(q_tot(&model, state, &a).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn generated_mixing_weights_are_nonnegative() {
        for seed in 0..20u64 {
            let model = LearnerModel::new(4, 0.2, 16, &mut rng(seed)).unwrap();
            for state in [State::S1, State::S2A, State::S2B] {
                let net = model.mixing_net(state).unwrap();
                for row in &net.layers()[1].w {
                    assert!(row.iter().all(|&w| w >= 0.0));
                }
            }
        }
    }

    #[test]
    fn hypernet_layout_maps_outputs_to_mixing_parameters() {
        // Zero hypernet weights with chosen output biases make g constant,
        // so the mixing parameters equal the bias layout directly.
        let mut model = LearnerModel::zeros(2, 0.2, 4);
        let d = game_graph().input_dim();
        for (k, b) in model.hyper.b2.iter_mut().enumerate() {
            *b = k as f64 - 11.0; // negatives exercise the abs on w2
        }
        let net = model.mixing_net(State::S1).unwrap();
        let m = 2;
        for i in 0..d {
            for j in 0..m {
                assert_eq!(net.layers()[0].w[i][j], (i * m + j) as f64 - 11.0);
            }
        }
        assert_eq!(net.layers()[0].b, vec![(d * m) as f64 - 11.0, (d * m + 1) as f64 - 11.0]);
        assert_eq!(
            net.layers()[1].w,
            vec![
                vec![((d + 1) * m) as f64 - 11.0],
                vec![(((d + 1) * m + 1) as f64 - 11.0f64).abs()]
            ]
        );
        assert_eq!(net.layers()[1].b, vec![((d + 2) * m) as f64 - 11.0]);
    }

    #[test]
    fn grad_path_value_matches_library_path() {
        for seed in 0..10u64 {
            let model = LearnerModel::new(4, 0.2, 16, &mut rng(seed)).unwrap();
            for state in [State::S1, State::S2A, State::S2B] {
                for a in all_joint_actions() {
                    let v_lib = q_tot(&model, state, &a).unwrap();
                    let (v_grad, _) = q_tot_grad(&model, state, &a).unwrap();
                    assert!((v_lib - v_grad).abs() < 1e-12, "seed {seed}");
                }
            }
        }
    }

    #[test]
    fn backprop_matches_finite_differences_spot_check() {
        let h = 1e-5;
        for seed in 0..5u64 {
            let mut model = LearnerModel::new(3, 0.2, 8, &mut rng(seed)).unwrap();
            let state = [State::S1, State::S2A, State::S2B][seed as usize % 3];
            let a = JointAction(vec![0, 1, 1, 0]);
            let (_, grad) = q_tot_grad(&model, state, &a).unwrap();
            let base = model.flatten();
            for idx in (0..base.len()).step_by(97) {
                let mut plus = base.clone();
                plus[idx] += h;
                model.assign(&plus).unwrap();
                let vp = q_tot(&model, state, &a).unwrap();
                let mut minus = base.clone();
                minus[idx] -= h;
                model.assign(&minus).unwrap();
                let vm = q_tot(&model, state, &a).unwrap();
                let numeric = (vp - vm) / (2.0 * h);
                let denom = grad[idx].abs().max(numeric.abs()).max(1e-4);
                assert!(
                    ((grad[idx] - numeric) / denom).abs() < 1e-4,
                    "seed {seed} param {idx}: analytic {} numeric {numeric}",
                    grad[idx]
                );
            }
            model.assign(&base).unwrap();
        }
    }

    #[test]
    fn linear_grad_matches_finite_differences_spot_check() {
        let h = 1e-5;
        for seed in 0..5u64 {
            let mut model = LinearModel::new(8, &mut rng(seed));
            let state = [State::S1, State::S2A, State::S2B][seed as usize % 3];
            let a = JointAction(vec![1, 0, 0, 1]);
            let mut grad = vec![0.0; model.n_params()];
            model.value_and_grad_into(state, &a, 1.0, &mut grad).unwrap();
            let base = model.flatten();
            for idx in (0..base.len()).step_by(89) {
                let mut plus = base.clone();
                plus[idx] += h;
                model.assign(&plus).unwrap();
                let vp = model.value(state, &a).unwrap();
                let mut minus = base.clone();
                minus[idx] -= h;
                model.assign(&minus).unwrap();
                let vm = model.value(state, &a).unwrap();
                let numeric = (vp - vm) / (2.0 * h);
                let denom = grad[idx].abs().max(numeric.abs()).max(1e-4);
                assert!(((grad[idx] - numeric) / denom).abs() < 1e-4, "seed {seed} param {idx}");
            }
            model.assign(&base).unwrap();
        }
    }

    #[test]
    fn flatten_assign_round_trip() {
        let model = LearnerModel::new(4, 0.2, 8, &mut rng(3)).unwrap();
        let flat = model.flatten();
        assert_eq!(flat.len(), model.n_params());
        let mut copy = LearnerModel::zeros(4, 0.2, 8);
        copy.assign(&flat).unwrap();
        assert_eq!(copy, model);
        assert!(copy.assign(&flat[1..]).is_err());
    }

    #[test]
    fn terminal_state_has_no_value() {
        let model = LearnerModel::zeros(4, 0.2, 8);
        let a = JointAction(vec![0; 4]);
        assert!(q_tot(&model, State::Terminal, &a).is_err());
    }
}
