//! Conditional time-series GAN over daily price paths.
//!
//! Four recurrent networks share one latent space:
//!
//! * the embedder maps a normalized price path to latent codes `H`,
//! * the recovery maps latent codes back to prices,
//! * the generator maps per-step noise, the previous latent code and the
//!   day's condition vector to the next latent code,
//! * the discriminator (a weight-clipped critic) scores a latent path given
//!   the condition vector.
//!
//! Training runs in three phases that must be executed in order: the
//! autoencoder, supervised next-step training of the generator with teacher
//! forcing, and joint adversarial training.

use std::path::Path;

use ndarray::{s, Array2, ArrayView2};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data_ingest::{Sample, STEPS_PER_DAY};
use crate::error::{Error, Result};
use crate::intervals::{condition_id, Provenance, ScenarioSet};
use crate::rng::derive_seed;
use crate::seqnet::{
    adam_step, init_params, mse_loss, sgd_step, Activation, AdamMoments, FeedbackMode, NetworkCheckpoint,
    NetworkParams, NetworkSpec, OptimizerState, DEFAULT_CLIP_LIMIT, DEFAULT_HIDDEN_DIM, DEFAULT_LEARNING_RATE,
};

pub const DEFAULT_LATENT_DIM: usize = 100;
pub const DEFAULT_BATCH_SIZE: usize = 7;
pub const DEFAULT_ITERATIONS: usize = 10_000;
pub const DEFAULT_SUPERVISED_WEIGHT: f64 = 10.0;
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Embedder,
    Recovery,
    Generator,
    Discriminator,
}

impl Role {
    pub const ALL: [Role; 4] = [Role::Embedder, Role::Recovery, Role::Generator, Role::Discriminator];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub latent_dim: usize,
    pub hidden_dim: usize,
    pub layers: usize,
    pub condition_dim: usize,
    pub noise_dim: usize,
}

impl ModelDims {
    pub fn new(condition_dim: usize) -> Self {
        Self::with_sizes(condition_dim, DEFAULT_HIDDEN_DIM, DEFAULT_LATENT_DIM)
    }

    /// Single LSTM layer per network, noise as wide as the latent space.
    pub fn with_sizes(condition_dim: usize, hidden_dim: usize, latent_dim: usize) -> Self {
        Self {
            latent_dim,
            hidden_dim,
            layers: 1,
            condition_dim,
            noise_dim: latent_dim,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 || self.hidden_dim == 0 || self.layers == 0 || self.noise_dim == 0 {
            return Err(Error::InvalidDims(format!("{self:?}")));
        }
        Ok(())
    }

    pub fn network_spec(&self, role: Role) -> NetworkSpec {
        let hidden = vec![self.hidden_dim; self.layers];
        match role {
            Role::Embedder => NetworkSpec {
                step_dim: 1,
                static_dim: 0,
                hidden,
                output_dim: self.latent_dim,
                activation: Activation::Sigmoid,
                feedback: false,
            },
            Role::Recovery => NetworkSpec {
                step_dim: self.latent_dim,
                static_dim: 0,
                hidden,
                output_dim: 1,
                activation: Activation::Sigmoid,
                feedback: false,
            },
            Role::Generator => NetworkSpec {
                step_dim: self.noise_dim + self.latent_dim,
                static_dim: self.condition_dim,
                hidden,
                output_dim: self.latent_dim,
                activation: Activation::Sigmoid,
                feedback: true,
            },
            Role::Discriminator => NetworkSpec {
                step_dim: self.latent_dim,
                static_dim: self.condition_dim,
                hidden,
                output_dim: 1,
                activation: Activation::Identity,
                feedback: false,
            },
        }
    }
}

/// Zero-mean Gaussian noise for one 48-step path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub steps: usize,
    pub dim: usize,
}

impl NoiseSpec {
    pub fn new(sigma: f64, dim: usize) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= 1.0) {
            return Err(Error::InvalidSigma(sigma));
        }
        Ok(Self {
            sigma,
            steps: STEPS_PER_DAY,
            dim,
        })
    }

    pub fn mean(&self) -> f64 {
        0.0
    }
}

/// Independent `N(0, σ²)` draws, one row per timestep.
pub fn sample_noise(spec: &NoiseSpec, seed: u64) -> Result<Array2<f64>> {
    if !(spec.sigma.is_finite() && spec.sigma >= 1.0) {
        return Err(Error::InvalidSigma(spec.sigma));
    }
    let normal = Normal::new(0.0, spec.sigma).map_err(|_| Error::InvalidSigma(spec.sigma))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(Array2::from_shape_simple_fn((spec.steps, spec.dim), || normal.sample(&mut rng)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub batch_size: usize,
    pub iterations_per_phase: usize,
    pub learning_rate: f64,
    pub clip_limit: f64,
    pub seed: u64,
    /// Weight of the supervised term in the joint generator loss.
    pub supervised_weight: f64,
    /// Optimizer of the embedder, recovery and generator.
    pub optimizer: OptimizerKind,
    /// Optimizer of the clipped critic.
    pub critic_optimizer: OptimizerKind,
    pub critic_learning_rate: f64,
    /// Keep updating the embedder and recovery during joint training. Off by
    /// default: with it on, the recovery flattens off-manifold latents and the
    /// generated scenarios lose their spread.
    pub fine_tune_autoencoder: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            batch_size: DEFAULT_BATCH_SIZE,
            iterations_per_phase: DEFAULT_ITERATIONS,
            learning_rate: DEFAULT_LEARNING_RATE,
            clip_limit: DEFAULT_CLIP_LIMIT,
            seed: 0,
            supervised_weight: DEFAULT_SUPERVISED_WEIGHT,
            optimizer: OptimizerKind::Adam,
            critic_optimizer: OptimizerKind::Sgd,
            critic_learning_rate: DEFAULT_LEARNING_RATE,
            fine_tune_autoencoder: false,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if self.batch_size == 0
            || !positive(self.learning_rate)
            || !positive(self.critic_learning_rate)
            || !positive(self.clip_limit)
            || !(self.supervised_weight >= 0.0 && self.supervised_weight.is_finite())
        {
            return Err(Error::InvalidArgument(format!("invalid training config: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Autoencoder,
    Supervised,
    Joint,
}

impl std::fmt::Display for Phase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Phase::Autoencoder => "autoencoder",
            Phase::Supervised => "supervised",
            Phase::Joint => "joint",
        })
    }
}

/// One line of the streamed training log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProgressRecord {
    pub phase: Phase,
    pub iteration: usize,
    pub loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct TrainingFlags {
    pub autoencoder: bool,
    pub supervised: bool,
    pub joint: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorEval {
    /// Fraction correctly separated by a threshold at the median score.
    pub accuracy: f64,
    pub mean_real_score: f64,
    pub mean_generated_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TrainingLog {
    pub autoencoder: Vec<f64>,
    pub supervised: Vec<f64>,
    /// Critic loss `mean D(fake) − mean D(real)`.
    pub critic: Vec<f64>,
    /// Generator loss `−mean D(fake) + λ·supervised`.
    pub generator: Vec<f64>,
    pub joint_reconstruction: Vec<f64>,
    pub discriminator_eval: Option<DiscriminatorEval>,
}

/// A price path and the condition it was observed under.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub condition: Vec<f64>,
    pub target: Vec<f64>,
}

impl From<&Sample> for TrainingExample {
    fn from(s: &Sample) -> Self {
        Self {
            condition: s.condition.features(),
            target: s.target.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CtsganModel {
    dims: ModelDims,
    embedder: NetworkParams,
    recovery: NetworkParams,
    generator: NetworkParams,
    discriminator: NetworkParams,
    flags: TrainingFlags,
    log: TrainingLog,
}

const INIT_STREAM: u64 = 1;
const PHASE_STREAMS: [u64; 3] = [11, 12, 13];
const GENERATE_STREAM: u64 = 21;
const EVAL_STREAM: u64 = 31;

/// Per-network parameter updater.
struct Updater {
    opt: OptimizerState,
    adam: Option<AdamMoments>,
}

impl Updater {
    fn new(config: &TrainingConfig, net: &NetworkParams, clipped: bool) -> Result<Self> {
        let opt = OptimizerState::new(config.learning_rate, config.clip_limit, clipped)?;
        let adam = (config.optimizer == OptimizerKind::Adam).then(|| AdamMoments::new(net.len()));
        Ok(Self { opt, adam })
    }

    fn step(&mut self, net: &mut NetworkParams, grads: &[f64]) -> Result<()> {
        match &mut self.adam {
            Some(m) => adam_step(net, grads, &mut self.opt, m),
            None => sgd_step(net, grads, &mut self.opt),
        }
    }
}

fn column(values: &[f64]) -> Array2<f64> {
    Array2::from_shape_vec((values.len(), 1), values.to_vec()).expect("column shape")
}

/// `[z_t, H_{t−1}]` with `H_{−1} = 0`.
fn teacher_inputs(z: &Array2<f64>, h: &Array2<f64>) -> Array2<f64> {
    let (t_len, nz) = z.dim();
    let nl = h.ncols();
    let mut out = Array2::zeros((t_len, nz + nl));
    out.slice_mut(s![.., ..nz]).assign(z);
    if t_len > 1 {
        out.slice_mut(s![1.., nz..]).assign(&h.slice(s![..t_len - 1, ..]));
    }
    out
}

fn add_into(acc: &mut [f64], g: &[f64]) {
    for (a, b) in acc.iter_mut().zip(g) {
        *a += b;
    }
}

fn scale(v: &mut [f64], k: f64) {
    v.iter_mut().for_each(|x| *x *= k);
}

/// Runs `f` on every batch member in parallel and reduces in batch order.
fn reduce_batch<F>(batch: &[(usize, u64)], n_grads: usize, f: F) -> Result<(f64, Vec<Vec<f64>>)>
where
    F: Fn(usize, u64) -> Result<(f64, Vec<Vec<f64>>)> + Sync,
{
    let parts: Vec<(f64, Vec<Vec<f64>>)> = batch.par_iter().map(|&(i, seed)| f(i, seed)).collect::<Result<_>>()?;
    let inv = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    let mut grads: Vec<Vec<f64>> = Vec::with_capacity(n_grads);
    for (l, gs) in parts {
        loss += l;
        if grads.is_empty() {
            grads = gs;
        } else {
            for (acc, g) in grads.iter_mut().zip(&gs) {
                add_into(acc, g);
            }
        }
    }
    for g in &mut grads {
        scale(g, inv);
    }
    Ok((loss * inv, grads))
}

fn diverged(phase: Phase, iteration: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::NonFinite(_) | Error::NonFiniteLoss => Error::DivergedLoss {
            phase: phase.to_string(),
            iteration,
        },
        other => other,
    }
}

fn check_loss(loss: f64, phase: Phase, iteration: usize) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::DivergedLoss {
            phase: phase.to_string(),
            iteration,
        })
    }
}

impl CtsganModel {
    pub fn new(dims: ModelDims, seed: u64) -> Result<Self> {
        dims.validate()?;
        let init = |role: Role, k: u64| init_params(derive_seed(seed, INIT_STREAM, k), &dims.network_spec(role));
        Ok(Self {
            dims,
            embedder: init(Role::Embedder, 0)?,
            recovery: init(Role::Recovery, 1)?,
            generator: init(Role::Generator, 2)?,
            discriminator: init(Role::Discriminator, 3)?,
            flags: TrainingFlags::default(),
            log: TrainingLog::default(),
        })
    }

    pub fn dims(&self) -> &ModelDims {
        &self.dims
    }

    pub fn flags(&self) -> TrainingFlags {
        self.flags
    }

    pub fn training_log(&self) -> &TrainingLog {
        &self.log
    }

    pub fn network(&self, role: Role) -> &NetworkParams {
        match role {
            Role::Embedder => &self.embedder,
            Role::Recovery => &self.recovery,
            Role::Generator => &self.generator,
            Role::Discriminator => &self.discriminator,
        }
    }

    fn check_examples(&self, examples: &[TrainingExample]) -> Result<()> {
        if examples.is_empty() {
            return Err(Error::EmptyDataset);
        }
        for (i, ex) in examples.iter().enumerate() {
            if ex.target.len() != STEPS_PER_DAY {
                return Err(Error::DimensionMismatch(format!(
                    "example {i}: target has {} steps, expected {STEPS_PER_DAY}",
                    ex.target.len()
                )));
            }
            if ex.condition.len() != self.dims.condition_dim {
                return Err(Error::DimensionMismatch(format!(
                    "example {i}: condition has {} features, model expects {}",
                    ex.condition.len(),
                    self.dims.condition_dim
                )));
            }
        }
        Ok(())
    }

    /// Latent path of a normalized price path.
    pub fn embed(&self, prices: &[f64]) -> Result<Array2<f64>> {
        Ok(self.embedder.forward(column(prices).view(), &[], FeedbackMode::External, None)?.0)
    }

    /// Autoencoder round trip of a normalized price path.
    pub fn reconstruct(&self, prices: &[f64]) -> Result<Vec<f64>> {
        let h = self.embed(prices)?;
        let (x, _) = self.recovery.forward(h.view(), &[], FeedbackMode::External, None)?;
        Ok(x.into_raw_vec_and_offset().0)
    }

    /// Mean reconstruction MSE over `examples`.
    pub fn reconstruction_loss(&self, examples: &[TrainingExample]) -> Result<f64> {
        self.check_examples(examples)?;
        let total: f64 = examples
            .par_iter()
            .map(|ex| {
                let x = column(&ex.target);
                let r = column(&self.reconstruct(&ex.target)?);
                Ok(mse_loss(r.view(), x.view())?.0)
            })
            .collect::<Result<Vec<f64>>>()?
            .iter()
            .sum();
        Ok(total / examples.len() as f64)
    }

    /// Mean teacher-forced next-latent MSE.
    pub fn supervised_loss(&self, examples: &[TrainingExample]) -> Result<f64> {
        self.check_examples(examples)?;
        let losses = examples
            .par_iter()
            .map(|ex| {
                let h = self.embed(&ex.target)?;
                Ok(self.supervised_grads_inner(ex, &h, false)?.0)
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(losses.iter().sum::<f64>() / examples.len() as f64)
    }

    fn autoencoder_grads(&self, prices: &[f64]) -> Result<(f64, Vec<Vec<f64>>)> {
        let x = column(prices);
        let (h, ce) = self.embedder.forward(x.view(), &[], FeedbackMode::External, None)?;
        let (xr, cr) = self.recovery.forward(h.view(), &[], FeedbackMode::External, None)?;
        let (loss, dx) = mse_loss(xr.view(), x.view())?;
        let (g_rec, dh) = self.recovery.backward(&cr, dx.view())?;
        let (g_emb, _) = self.embedder.backward(&ce, dh.view())?;
        Ok((loss, vec![g_emb, g_rec]))
    }

    /// Teacher-forced next-step loss. The noise columns are zero: noise
    /// carries no information about the next latent code, and leaving it out
    /// keeps the supervised term from training the generator to ignore it.
    fn supervised_grads(&self, ex: &TrainingExample, h: &Array2<f64>) -> Result<(f64, Vec<f64>)> {
        self.supervised_grads_inner(ex, h, true)
    }

    fn supervised_grads_inner(&self, ex: &TrainingExample, h: &Array2<f64>, with_grad: bool) -> Result<(f64, Vec<f64>)> {
        let z = Array2::zeros((h.nrows(), self.dims.noise_dim));
        let inputs = teacher_inputs(&z, h);
        let (pred, cache) = self.generator.forward(inputs.view(), &ex.condition, FeedbackMode::External, None)?;
        let (loss, d) = mse_loss(pred.view(), h.view())?;
        if !with_grad {
            return Ok((loss, Vec::new()));
        }
        let (g, _) = self.generator.backward(&cache, d.view())?;
        Ok((loss, g))
    }

    /// Free-running generator output for noise `z`.
    fn generate_latent(&self, z: ArrayView2<'_, f64>, condition: &[f64]) -> Result<Array2<f64>> {
        Ok(self.generator.forward(z, condition, FeedbackMode::Autoregressive, None)?.0)
    }

    fn critic_score(&self, h: &Array2<f64>, condition: &[f64]) -> Result<f64> {
        let (s, _) = self.discriminator.forward(h.view(), condition, FeedbackMode::External, None)?;
        Ok(s.mean().unwrap_or(0.0))
    }

    fn batch(&self, rng: &mut ChaCha8Rng, n: usize, batch_size: usize) -> Vec<(usize, u64)> {
        let idx: Vec<usize> = if n >= batch_size {
            index::sample(rng, n, batch_size).into_vec()
        } else {
            (0..batch_size).map(|_| rng.random_range(0..n)).collect()
        };
        idx.into_iter().map(|i| (i, rng.random())).collect()
    }

    /// Scores held-out real paths against fresh generated paths.
    pub fn evaluate_discriminator(&self, examples: &[TrainingExample], seed: u64) -> Result<DiscriminatorEval> {
        self.check_examples(examples)?;
        let noise = NoiseSpec::new(1.0, self.dims.noise_dim)?;
        let pairs = examples
            .par_iter()
            .enumerate()
            .map(|(i, ex)| {
                let h = self.embed(&ex.target)?;
                let z = sample_noise(&noise, derive_seed(seed, EVAL_STREAM, i as u64))?;
                let fake = self.generate_latent(z.view(), &ex.condition)?;
                Ok((self.critic_score(&h, &ex.condition)?, self.critic_score(&fake, &ex.condition)?))
            })
            .collect::<Result<Vec<(f64, f64)>>>()?;
        let mut all: Vec<f64> = pairs.iter().flat_map(|&(r, f)| [r, f]).collect();
        all.sort_by(f64::total_cmp);
        let threshold = crate::stats::quantile_sorted(&all, 0.5);
        let correct = pairs
            .iter()
            .map(|&(r, f)| (r > threshold) as usize + (f <= threshold) as usize)
            .sum::<usize>();
        let n = pairs.len() as f64;
        Ok(DiscriminatorEval {
            accuracy: correct as f64 / (2.0 * n),
            mean_real_score: pairs.iter().map(|p| p.0).sum::<f64>() / n,
            mean_generated_score: pairs.iter().map(|p| p.1).sum::<f64>() / n,
        })
    }

    /// `count` scenarios for one condition, each from its own derived seed.
    pub fn generate_scenarios(&self, condition: &[f64], noise: &NoiseSpec, count: usize, seed: u64) -> Result<ScenarioSet> {
        if !self.flags.joint {
            return Err(Error::UntrainedModel);
        }
        if condition.len() != self.dims.condition_dim {
            return Err(Error::DimensionMismatch(format!(
                "condition has {} features, model expects {}",
                condition.len(),
                self.dims.condition_dim
            )));
        }
        if noise.dim != self.dims.noise_dim {
            return Err(Error::DimensionMismatch(format!(
                "noise width {} but model expects {}",
                noise.dim, self.dims.noise_dim
            )));
        }
        let id = condition_id(condition);
        if count == 0 {
            return Ok(ScenarioSet::empty(id));
        }
        let rows = (0..count)
            .into_par_iter()
            .map(|m| {
                let z = sample_noise(noise, derive_seed(seed, GENERATE_STREAM, m as u64))?;
                let h = self.generate_latent(z.view(), condition)?;
                let (x, _) = self.recovery.forward(h.view(), &[], FeedbackMode::External, None)?;
                Ok(x.iter().map(|v| v.clamp(0.0, 1.0)).collect::<Vec<f64>>())
            })
            .collect::<Result<Vec<_>>>()?;
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        let arr = Array2::from_shape_vec((count, noise.steps), flat).expect("scenario shape");
        ScenarioSet::new(arr, vec![Provenance::for_sigma(noise.sigma); count], id)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_vec(&self.to_checkpoint())?;
        crate::fsio::write_atomic(path, &json)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_checkpoint(&self) -> ModelCheckpoint {
        ModelCheckpoint {
            format_version: MODEL_FORMAT_VERSION,
            dims: self.dims,
            networks: Role::ALL
                .iter()
                .map(|&role| RoleBlock {
                    role,
                    network: self.network(role).to_checkpoint(),
                })
                .collect(),
            training_flags: self.flags,
            training_log: self.log.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_checkpoint())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
        let found = value
            .get("format_version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::CorruptCheckpoint("missing format_version".into()))?;
        if found != MODEL_FORMAT_VERSION as u64 {
            return Err(Error::VersionMismatch {
                found: found as u32,
                expected: MODEL_FORMAT_VERSION,
                hint: "retrain with `priceband train` or re-save the model with this release".into(),
            });
        }
        let ckpt: ModelCheckpoint =
            serde_json::from_value(value).map_err(|e| Error::CorruptCheckpoint(e.to_string()))?;
        Self::from_checkpoint(ckpt)
    }

    pub fn from_checkpoint(ckpt: ModelCheckpoint) -> Result<Self> {
        ckpt.dims.validate()?;
        if ckpt.networks.len() != 4 {
            return Err(Error::CorruptCheckpoint(format!("expected 4 networks, found {}", ckpt.networks.len())));
        }
        let mut nets = Vec::with_capacity(4);
        for (block, role) in ckpt.networks.iter().zip(Role::ALL) {
            if block.role != role {
                return Err(Error::CorruptCheckpoint(format!("expected {role:?} block, found {:?}", block.role)));
            }
            if block.network.network != ckpt.dims.network_spec(role) {
                return Err(Error::CorruptCheckpoint(format!("{role:?} does not match model dims")));
            }
            nets.push(NetworkParams::from_checkpoint(&block.network).map_err(|e| match e {
                Error::ShapeMismatch { expected, got } => {
                    Error::CorruptCheckpoint(format!("{role:?} weights: expected {expected}, got {got}"))
                }
                other => other,
            })?);
        }
        let mut it = nets.into_iter();
        Ok(Self {
            dims: ckpt.dims,
            embedder: it.next().expect("4 networks"),
            recovery: it.next().expect("4 networks"),
            generator: it.next().expect("4 networks"),
            discriminator: it.next().expect("4 networks"),
            flags: ckpt.training_flags,
            log: ckpt.training_log,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleBlock {
    pub role: Role,
    pub network: NetworkCheckpoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCheckpoint {
    pub format_version: u32,
    pub dims: ModelDims,
    pub networks: Vec<RoleBlock>,
    pub training_flags: TrainingFlags,
    pub training_log: TrainingLog,
}

pub fn save_model(model: &CtsganModel, path: &Path) -> Result<()> {
    model.save(path)
}

pub fn load_model(path: &Path) -> Result<CtsganModel> {
    CtsganModel::load(path)
}

/// Minimizes reconstruction MSE of the embedder/recovery pair.
/// Returns the per-iteration loss curve.
pub fn train_phase1_autoencoder(
    model: &mut CtsganModel,
    examples: &[TrainingExample],
    config: &TrainingConfig,
    progress: &mut dyn FnMut(&ProgressRecord),
) -> Result<Vec<f64>> {
    config.validate()?;
    model.check_examples(examples)?;
    let phase = Phase::Autoencoder;
    let mut work = model.clone();
    let mut up_e = Updater::new(config, &work.embedder, false)?;
    let mut up_r = Updater::new(config, &work.recovery, false)?;
    let mut curve = Vec::with_capacity(config.iterations_per_phase);
    for it in 0..config.iterations_per_phase {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, PHASE_STREAMS[0], it as u64));
        let batch = work.batch(&mut rng, examples.len(), config.batch_size);
        let net = &work;
        let (loss, grads) =
            reduce_batch(&batch, 2, |i, _| net.autoencoder_grads(&examples[i].target)).map_err(diverged(phase, it))?;
        check_loss(loss, phase, it)?;
        up_e.step(&mut work.embedder, &grads[0]).map_err(diverged(phase, it))?;
        up_r.step(&mut work.recovery, &grads[1]).map_err(diverged(phase, it))?;
        curve.push(loss);
        progress(&ProgressRecord {
            phase,
            iteration: it,
            loss,
        });
    }
    work.flags.autoencoder = true;
    work.log.autoencoder.extend_from_slice(&curve);
    *model = work;
    Ok(curve)
}

/// Teacher-forced next-step latent prediction for the generator.
pub fn train_phase2_supervised(
    model: &mut CtsganModel,
    examples: &[TrainingExample],
    config: &TrainingConfig,
    progress: &mut dyn FnMut(&ProgressRecord),
) -> Result<Vec<f64>> {
    if !model.flags.autoencoder {
        return Err(Error::PhaseOrderViolation(
            "supervised training needs a trained embedder (run the autoencoder phase first)".into(),
        ));
    }
    config.validate()?;
    model.check_examples(examples)?;
    let phase = Phase::Supervised;
    let mut work = model.clone();
    let mut up_g = Updater::new(config, &work.generator, false)?;
    let mut curve = Vec::with_capacity(config.iterations_per_phase);
    for it in 0..config.iterations_per_phase {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, PHASE_STREAMS[1], it as u64));
        let batch = work.batch(&mut rng, examples.len(), config.batch_size);
        let net = &work;
        let (loss, grads) = reduce_batch(&batch, 1, |i, _| {
            let ex = &examples[i];
            let h = net.embed(&ex.target)?;
            let (l, g) = net.supervised_grads(ex, &h)?;
            Ok((l, vec![g]))
        })
        .map_err(diverged(phase, it))?;
        check_loss(loss, phase, it)?;
        up_g.step(&mut work.generator, &grads[0]).map_err(diverged(phase, it))?;
        curve.push(loss);
        progress(&ProgressRecord {
            phase,
            iteration: it,
            loss,
        });
    }
    work.flags.supervised = true;
    work.log.supervised.extend_from_slice(&curve);
    *model = work;
    Ok(curve)
}

/// Alternating critic / generator / autoencoder updates.
///
/// Each iteration: one clipped critic step on `mean D(fake) − mean D(real)`,
/// one generator step on `−mean D(fake) + λ·supervised`, and, when
/// `fine_tune_autoencoder` is set, one reconstruction step for the embedder
/// and recovery. The reconstruction loss is logged either way. Returns the
/// generator loss curve.
pub fn train_phase3_joint(
    model: &mut CtsganModel,
    examples: &[TrainingExample],
    config: &TrainingConfig,
    progress: &mut dyn FnMut(&ProgressRecord),
) -> Result<Vec<f64>> {
    if !(model.flags.autoencoder && model.flags.supervised) {
        return Err(Error::PhaseOrderViolation(
            "joint training needs the autoencoder and supervised phases first".into(),
        ));
    }
    config.validate()?;
    model.check_examples(examples)?;
    let phase = Phase::Joint;
    let mut work = model.clone();
    let mut up_d = Updater::new(
        &TrainingConfig {
            optimizer: config.critic_optimizer,
            learning_rate: config.critic_learning_rate,
            ..config.clone()
        },
        &work.discriminator,
        true,
    )?;
    let mut up_g = Updater::new(config, &work.generator, false)?;
    let mut up_e = Updater::new(config, &work.embedder, false)?;
    let mut up_r = Updater::new(config, &work.recovery, false)?;
    let noise = NoiseSpec::new(1.0, work.dims.noise_dim)?;
    let lambda = config.supervised_weight;
    let t_len = STEPS_PER_DAY as f64;
    let mut curve = Vec::with_capacity(config.iterations_per_phase);
    for it in 0..config.iterations_per_phase {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, PHASE_STREAMS[2], it as u64));
        let batch = work.batch(&mut rng, examples.len(), config.batch_size);
        let err = diverged(phase, it);

        // critic
        let net = &work;
        let (critic_loss, grads) = reduce_batch(&batch, 1, |i, seed| {
            let ex = &examples[i];
            let h = net.embed(&ex.target)?;
            let z = sample_noise(&noise, seed)?;
            let fake = net.generate_latent(z.view(), &ex.condition)?;
            let d = &net.discriminator;
            let (sr, cr) = d.forward(h.view(), &ex.condition, FeedbackMode::External, None)?;
            let (sf, cf) = d.forward(fake.view(), &ex.condition, FeedbackMode::External, None)?;
            let loss = sf.mean().unwrap_or(0.0) - sr.mean().unwrap_or(0.0);
            let (mut g, _) = d.backward(&cr, Array2::from_elem(sr.dim(), -1.0 / t_len).view())?;
            let (gf, _) = d.backward(&cf, Array2::from_elem(sf.dim(), 1.0 / t_len).view())?;
            add_into(&mut g, &gf);
            Ok((loss, vec![g]))
        })
        .map_err(&err)?;
        check_loss(critic_loss, phase, it)?;
        up_d.step(&mut work.discriminator, &grads[0]).map_err(&err)?;

        // generator
        let net = &work;
        let (gen_loss, grads) = reduce_batch(&batch, 1, |i, seed| {
            let ex = &examples[i];
            let h = net.embed(&ex.target)?;
            let z = sample_noise(&noise, seed)?;
            let (fake, cg) = net.generator.forward(z.view(), &ex.condition, FeedbackMode::Autoregressive, None)?;
            let (sf, cf) = net.discriminator.forward(fake.view(), &ex.condition, FeedbackMode::External, None)?;
            let (_, dfake) = net.discriminator.backward(&cf, Array2::from_elem(sf.dim(), -1.0 / t_len).view())?;
            let (mut g, _) = net.generator.backward(&cg, dfake.view())?;
            let (sup, mut gs) = net.supervised_grads(ex, &h)?;
            scale(&mut gs, lambda);
            add_into(&mut g, &gs);
            Ok((-sf.mean().unwrap_or(0.0) + lambda * sup, vec![g]))
        })
        .map_err(&err)?;
        check_loss(gen_loss, phase, it)?;
        up_g.step(&mut work.generator, &grads[0]).map_err(&err)?;

        // autoencoder fine-tune
        let net = &work;
        let (rec_loss, grads) = reduce_batch(&batch, 2, |i, _| net.autoencoder_grads(&examples[i].target)).map_err(&err)?;
        check_loss(rec_loss, phase, it)?;
        if config.fine_tune_autoencoder {
            up_e.step(&mut work.embedder, &grads[0]).map_err(&err)?;
            up_r.step(&mut work.recovery, &grads[1]).map_err(&err)?;
        }

        work.log.critic.push(critic_loss);
        work.log.joint_reconstruction.push(rec_loss);
        curve.push(gen_loss);
        progress(&ProgressRecord {
            phase,
            iteration: it,
            loss: gen_loss,
        });
    }
    work.log.generator.extend_from_slice(&curve);
    work.log.discriminator_eval = Some(work.evaluate_discriminator(examples, derive_seed(config.seed, EVAL_STREAM, 0))?);
    work.flags.joint = true;
    *model = work;
    Ok(curve)
}

/// Runs all three phases in order.
pub fn train_all(
    model: &mut CtsganModel,
    examples: &[TrainingExample],
    config: &TrainingConfig,
    progress: &mut dyn FnMut(&ProgressRecord),
) -> Result<()> {
    train_phase1_autoencoder(model, examples, config, progress)?;
    train_phase2_supervised(model, examples, config, progress)?;
    train_phase3_joint(model, examples, config, progress)?;
    Ok(())
}
