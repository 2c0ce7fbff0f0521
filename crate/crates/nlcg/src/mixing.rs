//! Piecewise-linear mixing networks: LeakyReLU layer stacks with non-negative
//! weights after the first layer, the slope configurations that select one
//! affine piece, and the closed-form count of distinct pieces.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{CoordinationGraph, QInput};

/// Hidden-unit bitmask width; networks with more hidden units are refused.
pub const MAX_HIDDEN_UNITS: usize = 64;

/// Upper bound on `m` for full configuration enumeration (2^20 ~ 1M pieces).
pub const ENUMERATION_CAP: usize = 20;

/// One linear layer. `w[i][j]` maps input coordinate `i` to output unit `j`
/// (`z = w^T h_prev + b`), so `w` has shape `prev_dim x next_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    #[serde(rename = "W")]
    pub w: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

impl Layer {
    pub fn in_dim(&self) -> usize {
        self.w.len()
    }

    pub fn out_dim(&self) -> usize {
        self.b.len()
    }
}

/// LeakyReLU network mapping a `d`-vector to a scalar. Activations apply
/// after every layer except the last; the output head is affine. All weights
/// after the first layer are non-negative, which makes the realized affine
/// piece dominate every other piece on its own cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingNetwork {
    alpha: f64,
    layers: Vec<Layer>,
}

impl MixingNetwork {
    /// Validates and wraps a layer stack.
    ///
    /// Requirements: `alpha` in `[0, 1]`; at least one layer; dimensions
    /// chain from the input to a single output; all entries finite; weight
    /// entries of layers after the first non-negative; at most
    /// [`MAX_HIDDEN_UNITS`] hidden units in total.
    pub fn new(alpha: f64, layers: Vec<Layer>) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::invalid(format!("alpha {alpha} outside [0, 1]")));
        }
        if layers.is_empty() {
            return Err(Error::invalid("network needs at least one layer"));
        }
        let mut prev_dim = layers[0].in_dim();
        if prev_dim == 0 {
            return Err(Error::invalid("input dimension must be >= 1"));
        }
        for (l, layer) in layers.iter().enumerate() {
            if layer.in_dim() != prev_dim {
                return Err(Error::invalid(format!(
                    "layer {l} expects input dim {}, previous layer produces {prev_dim}",
                    layer.in_dim()
                )));
            }
            if layer.out_dim() == 0 {
                return Err(Error::invalid(format!("layer {l} has zero output dim")));
            }
            for (i, row) in layer.w.iter().enumerate() {
                if row.len() != layer.out_dim() {
                    return Err(Error::invalid(format!(
                        "layer {l} weight row {i} has {} entries, bias has {}",
                        row.len(),
                        layer.out_dim()
                    )));
                }
                for &v in row {
                    if !v.is_finite() {
                        return Err(Error::invalid(format!("layer {l} has a non-finite weight")));
                    }
                    if l > 0 && v < 0.0 {
                        return Err(Error::invalid(format!(
                            "layer {l} weight {v} is negative; layers after the first must be non-negative"
                        )));
                    }
                }
            }
            if layer.b.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("layer {l} has a non-finite bias")));
            }
            prev_dim = layer.out_dim();
        }
        if prev_dim != 1 {
            return Err(Error::invalid(format!(
                "final layer must produce a scalar, got dim {prev_dim}"
            )));
        }
        let m: usize = layers[..layers.len() - 1].iter().map(Layer::out_dim).sum();
        if m > MAX_HIDDEN_UNITS {
            return Err(Error::CapExceeded {
                cap: "hidden units",
                detail: format!("{m} hidden units exceed the bitmask limit {MAX_HIDDEN_UNITS}"),
            });
        }
        Ok(Self { alpha, layers })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    /// Total number of hidden units; the output head does not count.
    pub fn n_hidden(&self) -> usize {
        self.layers[..self.layers.len() - 1].iter().map(Layer::out_dim).sum()
    }

    /// Evaluates the network and records which slope each hidden unit took:
    /// slope 1 where the pre-activation is `>= 0`, slope `alpha` otherwise.
    pub fn forward(&self, q: &QInput) -> Result<(f64, SlopeConfiguration)> {
        if q.len() != self.input_dim() {
            return Err(Error::invalid(format!(
                "input has dim {}, network expects {}",
                q.len(),
                self.input_dim()
            )));
        }
        if q.0.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("input has a non-finite entry"));
        }
        let m = self.n_hidden();
        let mut config = SlopeConfiguration::all_alpha(m);
        let mut h = q.0.clone();
        let mut unit = 0;
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = layer.b.clone();
            for (i, &hi) in h.iter().enumerate() {
                for (j, zj) in z.iter_mut().enumerate() {
                    *zj += hi * layer.w[i][j];
                }
            }
            if l < last {
                for zj in z.iter_mut() {
                    if *zj >= 0.0 {
                        config.set_one(unit);
                    } else {
                        *zj *= self.alpha;
                    }
                    unit += 1;
                }
            }
            h = z;
        }
        Ok((h[0], config))
    }

    /// Equivalent affine function of one slope configuration, obtained by
    /// folding the fixed slopes through the layer stack. Valid for every
    /// configuration, including those whose cell is empty.
    pub fn piece(&self, c: &SlopeConfiguration) -> Result<AffinePiece> {
        let m = self.n_hidden();
        if c.len() != m {
            return Err(Error::invalid(format!(
                "configuration has {} units, network has {m}",
                c.len()
            )));
        }
        let d = self.input_dim();
        // Running affine map h = a^T q + t, one (a, t) pair per current unit.
        let mut a: Vec<Vec<f64>> = (0..d)
            .map(|i| {
                let mut row = vec![0.0; d];
                row[i] = 1.0;
                row
            })
            .collect();
        let mut t = vec![0.0; d];
        let mut unit = 0;
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let out = layer.out_dim();
            let mut next_a = vec![vec![0.0; d]; out];
            let mut next_t = layer.b.clone();
            for (i, ai) in a.iter().enumerate() {
                for (j, &w) in layer.w[i].iter().enumerate() {
                    if w != 0.0 {
                        for (nv, &av) in next_a[j].iter_mut().zip(ai) {
                            *nv += w * av;
                        }
                    }
                }
            }
            for (i, &ti) in t.iter().enumerate() {
                for (nt, &w) in next_t.iter_mut().zip(&layer.w[i]) {
                    *nt += w * ti;
                }
            }
            if l < last {
                for (row, nt) in next_a.iter_mut().zip(&mut next_t) {
                    let slope = if c.is_one(unit) { 1.0 } else { self.alpha };
                    if slope != 1.0 {
                        row.iter_mut().for_each(|v| *v *= slope);
                        *nt *= slope;
                    }
                    unit += 1;
                }
            }
            a = next_a;
            t = next_t;
        }
        Ok(AffinePiece { w: a.swap_remove(0), bias: t[0] })
    }
}

/// Assignment of a slope (`alpha` or 1) to every hidden unit, stored as a
/// bitmask: bit set means slope 1. Unit order follows layer order, then unit
/// order within the layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SlopeConfiguration {
    bits: u64,
    len: usize,
}

impl SlopeConfiguration {
    pub fn all_alpha(m: usize) -> Self {
        assert!(m <= MAX_HIDDEN_UNITS);
        Self { bits: 0, len: m }
    }

    pub fn all_one(m: usize) -> Self {
        assert!(m <= MAX_HIDDEN_UNITS);
        let bits = if m == 64 { u64::MAX } else { (1u64 << m) - 1 };
        Self { bits, len: m }
    }

    pub fn from_bits(bits: u64, m: usize) -> Self {
        assert!(m <= MAX_HIDDEN_UNITS);
        let mask = if m == 64 { u64::MAX } else { (1u64 << m) - 1 };
        Self { bits: bits & mask, len: m }
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// True when unit `i` has slope 1.
    pub fn is_one(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        self.bits >> i & 1 == 1
    }

    pub fn set_one(&mut self, i: usize) {
        debug_assert!(i < self.len);
        self.bits |= 1 << i;
    }

    /// Materializes the slope values against a concrete `alpha`.
    pub fn slopes(&self, alpha: f64) -> Vec<f64> {
        (0..self.len)
            .map(|i| if self.is_one(i) { 1.0 } else { alpha })
            .collect()
    }
}

/// One affine piece of a mixing network: `value = w . q + bias`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinePiece {
    pub w: Vec<f64>,
    pub bias: f64,
}

impl AffinePiece {
    pub fn eval(&self, q: &QInput) -> f64 {
        debug_assert_eq!(self.w.len(), q.len());
        self.w.iter().zip(&q.0).map(|(w, q)| w * q).sum::<f64>() + self.bias
    }

    /// Splits the weight vector into its vertex and edge parts.
    pub fn split<'a>(&'a self, graph: &CoordinationGraph) -> Result<(&'a [f64], &'a [f64])> {
        if self.w.len() != graph.input_dim() {
            return Err(Error::invalid(format!(
                "piece has dim {}, graph expects {}",
                self.w.len(),
                graph.input_dim()
            )));
        }
        Ok(self.w.split_at(graph.n_agents()))
    }
}

/// Number of distinct affine pieces an arrangement of `m` hyperplanes can cut
/// out of `d`-dimensional input space: `sum_{j=0}^{d} C(m, j)`, which
/// saturates at `2^m` once `d >= m`. Exact integer arithmetic; overflow is an
/// error, never a silent wrap.
///
/// # Examples
/// ```
/// assert_eq!(nlcg::count_pieces(3, 10).unwrap(), 8);
/// assert_eq!(nlcg::count_pieces(10, 3).unwrap(), 176);
/// ```
pub fn count_pieces(m: u32, d: u32) -> Result<u128> {
    if d == 0 {
        return Err(Error::invalid("input dimension must be >= 1"));
    }
    let mut total: u128 = 0;
    let mut binom: u128 = 1; // C(m, 0)
    for j in 0..=d.min(m) {
        total = total.checked_add(binom).ok_or(Error::Overflow("count_pieces"))?;
        // C(m, j+1) = C(m, j) * (m - j) / (j + 1); division is exact.
        if j < m {
            binom = binom
                .checked_mul((m - j) as u128)
                .ok_or(Error::Overflow("count_pieces"))?
                / (j + 1) as u128;
        }
    }
    Ok(total)
}

/// All `2^m` slope configurations in ascending bitmask order: first all-alpha
/// (bitmask 0), last all-one. Refused above [`ENUMERATION_CAP`] units.
pub fn all_configs(m: usize) -> Result<Vec<SlopeConfiguration>> {
    if m > ENUMERATION_CAP {
        return Err(Error::CapExceeded {
            cap: "configuration enumeration",
            detail: format!("m = {m} exceeds the enumeration limit {ENUMERATION_CAP}"),
        });
    }
    Ok((0..1u64 << m)
        .map(|bits| SlopeConfiguration::from_bits(bits, m))
        .collect())
}

/// Samples a random network with the given input dimension and hidden layer
/// widths (the scalar output layer is appended implicitly). First-layer
/// weights and all biases are symmetric around zero; weights of later layers
/// are non-negative; everything is scaled by `1/sqrt(fan_in)`. Deterministic
/// per seed.
pub fn sample_random_net(d: usize, widths: &[usize], alpha: f64, seed: u64) -> Result<MixingNetwork> {
    if widths.is_empty() {
        return Err(Error::invalid("widths must be non-empty"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::with_capacity(widths.len() + 1);
    let mut prev = d;
    let dims: Vec<usize> = widths.iter().copied().chain([1]).collect();
    for (l, &out) in dims.iter().enumerate() {
        let scale = 1.0 / (prev as f64).sqrt();
        let w = (0..prev)
            .map(|_| {
                (0..out)
                    .map(|_| {
                        if l == 0 {
                            rng.gen_range(-1.0..1.0) * scale
                        } else {
                            rng.gen_range(0.0..1.0) * scale
                        }
                    })
                    .collect()
            })
            .collect();
        let b = (0..out).map(|_| rng.gen_range(-1.0..1.0) * scale).collect();
        layers.push(Layer { w, b });
        prev = out;
    }
    MixingNetwork::new(alpha, layers)
}
