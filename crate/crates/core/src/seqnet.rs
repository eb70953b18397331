//! A small differentiable sequence-network substrate: stacked LSTM layers
//! followed by a dense head, exact backpropagation through time, plain SGD
//! with optional parameter clamping, and finite-difference gradient checks.
//!
//! Parameters live in one flat `Vec<f64>` so optimizers, checkpoints and
//! gradient checks can walk them in a single deterministic order.
//!
//! A network may take a *static* input (the same vector at every timestep)
//! which only feeds the first LSTM layer; its contribution to the gates is
//! computed once per sequence. A network may also be run *autoregressively*:
//! the head output of step `t - 1` is appended to the step input at `t`.

use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::{Array2, ArrayView2};
use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_HIDDEN_DIM: usize = 100;
pub const DEFAULT_LEARNING_RATE: f64 = 0.02;
pub const DEFAULT_CLIP_LIMIT: f64 = 0.5;

/// Bias added to the forget gate at initialization.
const FORGET_BIAS: f64 = 1.0;

/// Version of the single-network checkpoint envelope.
pub const FORMAT_VERSION: u32 = 1;

static NEXT_VERSION: AtomicU64 = AtomicU64::new(1);

fn next_version() -> u64 {
    NEXT_VERSION.fetch_add(1, Ordering::Relaxed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Sigmoid,
    Tanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activated output.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    /// Gate order in every parameter block: input, forget, output, candidate.
    Lstm {
        input_dim: usize,
        static_dim: usize,
        hidden_dim: usize,
    },
    Dense {
        input_dim: usize,
        output_dim: usize,
        activation: Activation,
    },
}

impl LayerSpec {
    pub fn param_count(&self) -> usize {
        match *self {
            LayerSpec::Lstm {
                input_dim,
                static_dim,
                hidden_dim,
            } => 4 * hidden_dim * (input_dim + static_dim + hidden_dim + 1),
            LayerSpec::Dense {
                input_dim,
                output_dim,
                ..
            } => output_dim * (input_dim + 1),
        }
    }
}

/// Architecture of a recurrent network with a dense head.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    /// Per-step input width, including the feedback slot if any.
    pub step_dim: usize,
    pub static_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
    pub activation: Activation,
    /// When true the last `output_dim` step columns can be filled with the
    /// network's own previous output.
    pub feedback: bool,
}

impl NetworkSpec {
    pub fn layers(&self) -> Result<Vec<LayerSpec>> {
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::InvalidDims("need at least one LSTM layer with hidden_dim > 0".into()));
        }
        if self.step_dim == 0 || self.output_dim == 0 {
            return Err(Error::InvalidDims("step and output widths must be positive".into()));
        }
        if self.feedback && self.step_dim < self.output_dim {
            return Err(Error::InvalidDims(format!(
                "feedback needs step_dim >= output_dim ({} < {})",
                self.step_dim, self.output_dim
            )));
        }
        let mut layers = Vec::with_capacity(self.hidden.len() + 1);
        let mut input_dim = self.step_dim;
        for (i, &h) in self.hidden.iter().enumerate() {
            layers.push(LayerSpec::Lstm {
                input_dim,
                static_dim: if i == 0 { self.static_dim } else { 0 },
                hidden_dim: h,
            });
            input_dim = h;
        }
        layers.push(LayerSpec::Dense {
            input_dim,
            output_dim: self.output_dim,
            activation: self.activation,
        });
        Ok(layers)
    }
}

/// Flat parameter vector together with the layer layout it encodes.
#[derive(Debug, Clone)]
pub struct NetworkParams {
    spec: NetworkSpec,
    layers: Vec<LayerSpec>,
    offsets: Vec<usize>,
    weights: Vec<f64>,
    version: u64,
}

impl PartialEq for NetworkParams {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec && self.weights == other.weights
    }
}

/// Glorot-style uniform bound.
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

/// Uniform ±glorot weights, zero biases, forget-gate bias 1, reproducible
/// from `seed`.
pub fn init_params(seed: u64, spec: &NetworkSpec) -> Result<NetworkParams> {
    let mut net = NetworkParams::zeros(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fill = |slice: &mut [f64], fan_in: usize, fan_out: usize| {
        if fan_in == 0 {
            return;
        }
        let b = glorot_bound(fan_in, fan_out);
        let dist = Uniform::new_inclusive(-b, b).expect("finite bound");
        for w in slice {
            *w = dist.sample(&mut rng);
        }
    };
    for li in 0..net.layers.len() {
        let off = net.offsets[li];
        match net.layers[li] {
            LayerSpec::Lstm {
                input_dim,
                static_dim,
                hidden_dim: h,
            } => {
                let lay = LstmLayout::new(off, input_dim, static_dim, h);
                fill(&mut net.weights[lay.w.clone()], input_dim, h);
                fill(&mut net.weights[lay.ws.clone()], static_dim, h);
                fill(&mut net.weights[lay.u.clone()], h, h);
                let b = &mut net.weights[lay.b.clone()];
                b[h..2 * h].iter_mut().for_each(|v| *v = FORGET_BIAS);
            }
            LayerSpec::Dense {
                input_dim,
                output_dim,
                ..
            } => {
                let w = off..off + input_dim * output_dim;
                fill(&mut net.weights[w], input_dim, output_dim);
            }
        }
    }
    Ok(net)
}

#[derive(Debug, Clone)]
struct LstmLayout {
    w: std::ops::Range<usize>,
    ws: std::ops::Range<usize>,
    u: std::ops::Range<usize>,
    b: std::ops::Range<usize>,
}

impl LstmLayout {
    fn new(off: usize, input_dim: usize, static_dim: usize, h: usize) -> Self {
        let g = 4 * h;
        let w = off..off + g * input_dim;
        let ws = w.end..w.end + g * static_dim;
        let u = ws.end..ws.end + g * h;
        let b = u.end..u.end + g;
        Self { w, ws, u, b }
    }
}

/// out += W x, with W row-major `rows × x.len()`.
#[inline]
fn matvec_acc(out: &mut [f64], w: &[f64], x: &[f64]) {
    let cols = x.len();
    if cols == 0 {
        return;
    }
    for (o, row) in out.iter_mut().zip(w.chunks_exact(cols)) {
        *o += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// out += Wᵀ d, with W row-major `d.len() × out.len()`.
#[inline]
fn matvec_t_acc(out: &mut [f64], w: &[f64], d: &[f64]) {
    let cols = out.len();
    if cols == 0 {
        return;
    }
    for (row, &dv) in w.chunks_exact(cols).zip(d) {
        if dv != 0.0 {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * dv;
            }
        }
    }
}

/// G += d ⊗ x.
#[inline]
fn outer_acc(g: &mut [f64], d: &[f64], x: &[f64]) {
    let cols = x.len();
    if cols == 0 {
        return;
    }
    for (row, &dv) in g.chunks_exact_mut(cols).zip(d) {
        if dv != 0.0 {
            for (o, xv) in row.iter_mut().zip(x) {
                *o += dv * xv;
            }
        }
    }
}

/// How the feedback columns of the step input are supplied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeedbackMode {
    /// The caller supplies every step column (teacher forcing when the
    /// network has a feedback slot).
    External,
    /// The caller supplies `step_dim - output_dim` columns; the rest are the
    /// network's previous output (zeros at `t = 0`).
    Autoregressive,
}

/// Initial hidden and cell state for every LSTM layer.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentState {
    pub h: Vec<Vec<f64>>,
    pub c: Vec<Vec<f64>>,
}

impl RecurrentState {
    pub fn zeros(spec: &NetworkSpec) -> Self {
        Self {
            h: spec.hidden.iter().map(|&n| vec![0.0; n]).collect(),
            c: spec.hidden.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }
}

/// Everything the backward pass needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    version: u64,
    mode: FeedbackMode,
    steps: usize,
    static_input: Vec<f64>,
    /// Per LSTM layer: inputs (T × in), activated gates (T × 4H),
    /// cell states ((T+1) × H), hidden states ((T+1) × H).
    xs: Vec<Vec<f64>>,
    gates: Vec<Vec<f64>>,
    cs: Vec<Vec<f64>>,
    hs: Vec<Vec<f64>>,
    /// Activated head outputs (T × out).
    ys: Vec<f64>,
}

impl NetworkParams {
    pub fn zeros(spec: &NetworkSpec) -> Result<Self> {
        let layers = spec.layers()?;
        let mut offsets = Vec::with_capacity(layers.len());
        let mut total = 0;
        for l in &layers {
            offsets.push(total);
            total += l.param_count();
        }
        Ok(Self {
            spec: spec.clone(),
            layers,
            offsets,
            weights: vec![0.0; total],
            version: next_version(),
        })
    }

    pub fn from_weights(spec: &NetworkSpec, weights: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(spec)?;
        if weights.len() != net.weights.len() {
            return Err(Error::shape(net.weights.len(), weights.len()));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("weights"));
        }
        net.weights = weights;
        Ok(net)
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn layer_specs(&self) -> &[LayerSpec] {
        &self.layers
    }

    /// Flat view, in layer order.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Mutable flat view; invalidates outstanding forward caches.
    pub fn weights_mut(&mut self) -> &mut [f64] {
        self.version = next_version();
        &mut self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    fn external_width(&self, mode: FeedbackMode) -> Result<usize> {
        match mode {
            FeedbackMode::External => Ok(self.spec.step_dim),
            FeedbackMode::Autoregressive if self.spec.feedback => {
                Ok(self.spec.step_dim - self.spec.output_dim)
            }
            FeedbackMode::Autoregressive => Err(Error::InvalidArgument(
                "network has no feedback slot".into(),
            )),
        }
    }

    /// Run the network over a `T × width` step matrix.
    pub fn forward(
        &self,
        steps: ArrayView2<'_, f64>,
        static_input: &[f64],
        mode: FeedbackMode,
        initial: Option<&RecurrentState>,
    ) -> Result<(Array2<f64>, ForwardCache)> {
        let width = self.external_width(mode)?;
        if steps.ncols() != width {
            return Err(Error::shape(format!("{width} step columns"), steps.ncols()));
        }
        if static_input.len() != self.spec.static_dim {
            return Err(Error::shape(
                format!("{} static inputs", self.spec.static_dim),
                static_input.len(),
            ));
        }
        if steps.iter().chain(static_input).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network input"));
        }
        if let Some(s) = initial {
            let ok = s.h.len() == self.spec.hidden.len()
                && s.c.len() == self.spec.hidden.len()
                && s.h.iter().zip(&s.c).zip(&self.spec.hidden).all(|((h, c), &n)| h.len() == n && c.len() == n);
            if !ok {
                return Err(Error::shape("initial state matching hidden dims", "other"));
            }
        }

        let t_len = steps.nrows();
        let n_lstm = self.spec.hidden.len();
        let out_dim = self.spec.output_dim;
        let mut xs = Vec::with_capacity(n_lstm);
        let mut gates = Vec::with_capacity(n_lstm);
        let mut cs = Vec::with_capacity(n_lstm);
        let mut hs = Vec::with_capacity(n_lstm);
        for (l, layer) in self.layers[..n_lstm].iter().enumerate() {
            let LayerSpec::Lstm { input_dim, hidden_dim: h, .. } = *layer else {
                unreachable!()
            };
            xs.push(vec![0.0; t_len * input_dim]);
            gates.push(vec![0.0; t_len * 4 * h]);
            let mut c = vec![0.0; (t_len + 1) * h];
            let mut hh = vec![0.0; (t_len + 1) * h];
            if let Some(s) = initial {
                c[..h].copy_from_slice(&s.c[l]);
                hh[..h].copy_from_slice(&s.h[l]);
            }
            cs.push(c);
            hs.push(hh);
        }
        let mut ys = vec![0.0; t_len * out_dim];

        // Static contribution to the first layer's gate pre-activations.
        let static_pre = {
            let LayerSpec::Lstm { input_dim, static_dim, hidden_dim } = self.layers[0] else {
                unreachable!()
            };
            let lay = LstmLayout::new(self.offsets[0], input_dim, static_dim, hidden_dim);
            let mut pre = vec![0.0; 4 * hidden_dim];
            matvec_acc(&mut pre, &self.weights[lay.ws], static_input);
            pre
        };

        let head = n_lstm;
        let LayerSpec::Dense { input_dim: head_in, activation, .. } = self.layers[head] else {
            unreachable!()
        };
        let head_w = &self.weights[self.offsets[head]..self.offsets[head] + head_in * out_dim];
        let head_b = &self.weights[self.offsets[head] + head_in * out_dim..][..out_dim];

        for t in 0..t_len {
            for l in 0..n_lstm {
                let LayerSpec::Lstm { input_dim, static_dim, hidden_dim: h } = self.layers[l] else {
                    unreachable!()
                };
                // assemble x_t
                {
                    let (lower, upper) = xs.split_at_mut(l);
                    let x = &mut upper[0][t * input_dim..(t + 1) * input_dim];
                    if l == 0 {
                        for (dst, src) in x.iter_mut().zip(steps.row(t).iter()) {
                            *dst = *src;
                        }
                        if mode == FeedbackMode::Autoregressive && t > 0 {
                            x[width..].copy_from_slice(&ys[(t - 1) * out_dim..t * out_dim]);
                        }
                    } else {
                        let _ = lower;
                        x.copy_from_slice(&hs[l - 1][(t + 1) * h_of(&self.layers[l - 1])..(t + 2) * h_of(&self.layers[l - 1])]);
                    }
                }
                let lay = LstmLayout::new(self.offsets[l], input_dim, static_dim, h);
                let z = &mut gates[l][t * 4 * h..(t + 1) * 4 * h];
                z.copy_from_slice(&self.weights[lay.b.clone()]);
                if l == 0 {
                    for (a, b) in z.iter_mut().zip(&static_pre) {
                        *a += b;
                    }
                }
                matvec_acc(z, &self.weights[lay.w.clone()], &xs[l][t * input_dim..(t + 1) * input_dim]);
                matvec_acc(z, &self.weights[lay.u.clone()], &hs[l][t * h..(t + 1) * h]);
                let (zi, rest) = z.split_at_mut(h);
                let (zf, rest) = rest.split_at_mut(h);
                let (zo, zg) = rest.split_at_mut(h);
                for k in 0..h {
                    zi[k] = sigmoid(zi[k]);
                    zf[k] = sigmoid(zf[k]);
                    zo[k] = sigmoid(zo[k]);
                    zg[k] = zg[k].tanh();
                    let c_prev = cs[l][t * h + k];
                    let c = zf[k] * c_prev + zi[k] * zg[k];
                    cs[l][(t + 1) * h + k] = c;
                    hs[l][(t + 1) * h + k] = zo[k] * c.tanh();
                }
            }
            let top = &hs[n_lstm - 1][(t + 1) * head_in..(t + 2) * head_in];
            let y = &mut ys[t * out_dim..(t + 1) * out_dim];
            y.copy_from_slice(head_b);
            matvec_acc(y, head_w, top);
            for v in y.iter_mut() {
                *v = activation.apply(*v);
            }
        }

        if ys.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network output"));
        }
        let outputs = Array2::from_shape_vec((t_len, out_dim), ys.clone()).expect("shape");
        Ok((
            outputs,
            ForwardCache {
                version: self.version,
                mode,
                steps: t_len,
                static_input: static_input.to_vec(),
                xs,
                gates,
                cs,
                hs,
                ys,
            },
        ))
    }

    /// Exact reverse-mode gradients of `Σ upstream ⊙ outputs`.
    ///
    /// Returns the flat parameter gradient and the gradient with respect to
    /// the caller-supplied step columns.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        upstream: ArrayView2<'_, f64>,
    ) -> Result<(Vec<f64>, Array2<f64>)> {
        if cache.version != self.version {
            return Err(Error::StaleCache);
        }
        let t_len = cache.steps;
        let out_dim = self.spec.output_dim;
        if upstream.dim() != (t_len, out_dim) {
            return Err(Error::shape(format!("{t_len}x{out_dim}"), format!("{:?}", upstream.dim())));
        }
        if upstream.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("upstream gradient"));
        }
        let width = self.external_width(cache.mode)?;
        let autoregressive = cache.mode == FeedbackMode::Autoregressive;
        let n_lstm = self.spec.hidden.len();
        let mut grad = vec![0.0; self.weights.len()];
        let mut d_steps = Array2::<f64>::zeros((t_len, width));

        let head = n_lstm;
        let LayerSpec::Dense { input_dim: head_in, activation, .. } = self.layers[head] else {
            unreachable!()
        };
        let head_off = self.offsets[head];
        let head_w = &self.weights[head_off..head_off + head_in * out_dim];

        let mut dh_next: Vec<Vec<f64>> = self.spec.hidden.iter().map(|&h| vec![0.0; h]).collect();
        let mut dc_next: Vec<Vec<f64>> = self.spec.hidden.iter().map(|&h| vec![0.0; h]).collect();
        let mut dz_static = vec![0.0; 4 * self.spec.hidden[0]];
        let mut feedback_grad = vec![0.0; out_dim];

        let mut da = vec![0.0; out_dim];
        for t in (0..t_len).rev() {
            let y = &cache.ys[t * out_dim..(t + 1) * out_dim];
            for k in 0..out_dim {
                let mut dy = upstream[[t, k]];
                if autoregressive {
                    dy += feedback_grad[k];
                }
                da[k] = dy * activation.derivative_from_output(y[k]);
            }
            let top = &cache.hs[n_lstm - 1][(t + 1) * head_in..(t + 2) * head_in];
            {
                let (gw, gb) = grad[head_off..head_off + out_dim * (head_in + 1)].split_at_mut(head_in * out_dim);
                outer_acc(gw, &da, top);
                for (g, d) in gb.iter_mut().zip(&da) {
                    *g += d;
                }
            }
            let mut dh_above = vec![0.0; head_in];
            matvec_t_acc(&mut dh_above, head_w, &da);

            for l in (0..n_lstm).rev() {
                let LayerSpec::Lstm { input_dim, static_dim, hidden_dim: h } = self.layers[l] else {
                    unreachable!()
                };
                let lay = LstmLayout::new(self.offsets[l], input_dim, static_dim, h);
                let g = &cache.gates[l][t * 4 * h..(t + 1) * 4 * h];
                let (gi, rest) = g.split_at(h);
                let (gf, rest) = rest.split_at(h);
                let (go, gg) = rest.split_at(h);
                let c_prev = &cache.cs[l][t * h..(t + 1) * h];
                let c_cur = &cache.cs[l][(t + 1) * h..(t + 2) * h];
                let h_prev = &cache.hs[l][t * h..(t + 1) * h];
                let x = &cache.xs[l][t * input_dim..(t + 1) * input_dim];

                let mut dz = vec![0.0; 4 * h];
                for k in 0..h {
                    let dh = dh_above[k] + dh_next[l][k];
                    let tc = c_cur[k].tanh();
                    let d_o = dh * tc;
                    let dc = dc_next[l][k] + dh * go[k] * (1.0 - tc * tc);
                    let d_i = dc * gg[k];
                    let d_g = dc * gi[k];
                    let d_f = dc * c_prev[k];
                    dc_next[l][k] = dc * gf[k];
                    dz[k] = d_i * gi[k] * (1.0 - gi[k]);
                    dz[h + k] = d_f * gf[k] * (1.0 - gf[k]);
                    dz[2 * h + k] = d_o * go[k] * (1.0 - go[k]);
                    dz[3 * h + k] = d_g * (1.0 - gg[k] * gg[k]);
                }
                outer_acc(&mut grad[lay.w.clone()], &dz, x);
                outer_acc(&mut grad[lay.u.clone()], &dz, h_prev);
                for (gb, d) in grad[lay.b.clone()].iter_mut().zip(&dz) {
                    *gb += d;
                }
                if l == 0 && static_dim > 0 {
                    for (s, d) in dz_static.iter_mut().zip(&dz) {
                        *s += d;
                    }
                }
                let mut dx = vec![0.0; input_dim];
                matvec_t_acc(&mut dx, &self.weights[lay.w.clone()], &dz);
                let mut dh_prev = vec![0.0; h];
                matvec_t_acc(&mut dh_prev, &self.weights[lay.u.clone()], &dz);
                dh_next[l] = dh_prev;

                if l == 0 {
                    for k in 0..width {
                        d_steps[[t, k]] = dx[k];
                    }
                    if autoregressive {
                        if t > 0 {
                            feedback_grad.copy_from_slice(&dx[width..]);
                        } else {
                            feedback_grad.iter_mut().for_each(|v| *v = 0.0);
                        }
                    }
                } else {
                    dh_above = dx;
                }
            }
        }

        if let LayerSpec::Lstm { input_dim, static_dim, hidden_dim } = self.layers[0] {
            if static_dim > 0 {
                let lay = LstmLayout::new(self.offsets[0], input_dim, static_dim, hidden_dim);
                outer_acc(&mut grad[lay.ws], &dz_static, &cache.static_input);
            }
        }
        if grad.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("gradient"));
        }
        Ok((grad, d_steps))
    }

    /// Checkpoint envelope `{format_version, layer_specs, flat_weights}`.
    pub fn to_checkpoint(&self) -> NetworkCheckpoint {
        NetworkCheckpoint {
            format_version: FORMAT_VERSION,
            network: self.spec.clone(),
            layer_specs: self.layers.clone(),
            flat_weights: self.weights.clone(),
        }
    }

    pub fn from_checkpoint(ckpt: &NetworkCheckpoint) -> Result<Self> {
        if ckpt.format_version != FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                found: ckpt.format_version,
                expected: FORMAT_VERSION,
                hint: "re-export the network with the current release".into(),
            });
        }
        let net = Self::from_weights(&ckpt.network, ckpt.flat_weights.clone())?;
        if net.layers != ckpt.layer_specs {
            return Err(Error::CorruptCheckpoint(
                "layer_specs do not match the network description".into(),
            ));
        }
        Ok(net)
    }
}

fn h_of(layer: &LayerSpec) -> usize {
    match *layer {
        LayerSpec::Lstm { hidden_dim, .. } => hidden_dim,
        LayerSpec::Dense { output_dim, .. } => output_dim,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkCheckpoint {
    pub format_version: u32,
    pub network: NetworkSpec,
    pub layer_specs: Vec<LayerSpec>,
    pub flat_weights: Vec<f64>,
}

/// Mean squared error over all entries and its gradient.
pub fn mse_loss(pred: ArrayView2<'_, f64>, target: ArrayView2<'_, f64>) -> Result<(f64, Array2<f64>)> {
    if pred.dim() != target.dim() {
        return Err(Error::shape(format!("{:?}", target.dim()), format!("{:?}", pred.dim())));
    }
    let n = pred.len().max(1) as f64;
    let diff = &pred - &target;
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / n;
    Ok((loss, diff * (2.0 / n)))
}

/// Learning-rate and clamping settings for [`sgd_step`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub learning_rate: f64,
    pub clip_limit: f64,
    /// Clamp parameters into `±clip_limit` after each step.
    pub clip_enabled: bool,
    pub steps_taken: u64,
}

impl OptimizerState {
    pub fn new(learning_rate: f64, clip_limit: f64, clip_enabled: bool) -> Result<Self> {
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate must be > 0, got {learning_rate}")));
        }
        if !(clip_limit > 0.0 && clip_limit.is_finite()) {
            return Err(Error::InvalidArgument(format!("clip limit must be > 0, got {clip_limit}")));
        }
        Ok(Self {
            learning_rate,
            clip_limit,
            clip_enabled,
            steps_taken: 0,
        })
    }

    pub fn sgd(learning_rate: f64) -> Result<Self> {
        Self::new(learning_rate, DEFAULT_CLIP_LIMIT, false)
    }

    pub fn clipped(learning_rate: f64, clip_limit: f64) -> Result<Self> {
        Self::new(learning_rate, clip_limit, true)
    }
}

/// `params ← params − lr·grad`, then clamp into `±clip_limit` if enabled.
pub fn sgd_step(params: &mut NetworkParams, grads: &[f64], opt: &mut OptimizerState) -> Result<()> {
    if grads.len() != params.len() {
        return Err(Error::shape(params.len(), grads.len()));
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("gradient"));
    }
    let (lr, clip, enabled) = (opt.learning_rate, opt.clip_limit, opt.clip_enabled);
    for (w, g) in params.weights_mut().iter_mut().zip(grads) {
        *w -= lr * g;
        if enabled {
            *w = w.clamp(-clip, clip);
        }
    }
    opt.steps_taken += 1;
    Ok(())
}

/// First and second moment estimates for [`adam_step`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamMoments {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamMoments {
    pub fn new(len: usize) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }
}

/// Bias-corrected Adam update with the same clamping rule as [`sgd_step`].
pub fn adam_step(
    params: &mut NetworkParams,
    grads: &[f64],
    opt: &mut OptimizerState,
    moments: &mut AdamMoments,
) -> Result<()> {
    if grads.len() != params.len() || moments.m.len() != params.len() {
        return Err(Error::shape(params.len(), grads.len()));
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("gradient"));
    }
    moments.t += 1;
    let (b1, b2, eps) = (moments.beta1, moments.beta2, moments.epsilon);
    let c1 = 1.0 - b1.powi(moments.t as i32);
    let c2 = 1.0 - b2.powi(moments.t as i32);
    let (lr, clip, enabled) = (opt.learning_rate, opt.clip_limit, opt.clip_enabled);
    let w = params.weights_mut();
    for i in 0..w.len() {
        let g = grads[i];
        moments.m[i] = b1 * moments.m[i] + (1.0 - b1) * g;
        moments.v[i] = b2 * moments.v[i] + (1.0 - b2) * g * g;
        let m_hat = moments.m[i] / c1;
        let v_hat = moments.v[i] / c2;
        w[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        if enabled {
            w[i] = w[i].clamp(-clip, clip);
        }
    }
    opt.steps_taken += 1;
    Ok(())
}

/// Largest relative disagreement between `analytic` and central finite
/// differences of `loss` at `params`:
/// `|a − n| / max(|a|, |n|, 1e−8)`.
pub fn gradient_check(
    params: &[f64],
    analytic: &[f64],
    eps: f64,
    mut loss: impl FnMut(&[f64]) -> Result<f64>,
) -> Result<f64> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument(format!("eps must be > 0, got {eps}")));
    }
    if params.len() != analytic.len() {
        return Err(Error::shape(params.len(), analytic.len()));
    }
    let mut probe = params.to_vec();
    let mut worst = 0.0f64;
    for i in 0..params.len() {
        let orig = probe[i];
        probe[i] = orig + eps;
        let up = loss(&probe)?;
        probe[i] = orig - eps;
        let down = loss(&probe)?;
        probe[i] = orig;
        if !(up.is_finite() && down.is_finite()) {
            return Err(Error::NonFiniteLoss);
        }
        let numeric = (up - down) / (2.0 * eps);
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max(rel);
    }
    Ok(worst)
}
