//! DDPM over camera-pose action horizons: variance-preserving noise schedule,
//! MLP noise predictor conditioned on the 96-dim feature, training step, and
//! iterative denoising sampler.

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::encoder::{GridEncoder, GridEncoderGrad, PoseEncoder, SparseTensor, CONDITION_DIM};
use crate::geom::Pose;
use crate::nn::{timestep_embedding, Mlp, MlpGrad};
use crate::{Error, Result};

pub const ACTION_DIMS: usize = 9;
pub const DEFAULT_ACTION_HORIZON: usize = 16;
pub const DEFAULT_DIFFUSION_STEPS: usize = 100;
/// Linear beta ramp sized so the terminal signal coefficient falls below 0.05
/// at K = 100.
pub const DEFAULT_BETA_START: f64 = 1e-3;
pub const DEFAULT_BETA_END: f64 = 0.2;
pub const TIMESTEP_EMBED_DIM: usize = 64;
const PREDICTOR_HIDDEN: usize = 256;

/// Variance-preserving schedule: alpha_bar_k^2 + beta_bar_k^2 = 1, with the
/// update rule a^{k-1} = alpha_k (a^k - gamma_k eps) + sigma_k z.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DiffusionSchedule {
    pub steps: usize,
    pub betas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub gammas: Vec<f64>,
    pub sigmas: Vec<f64>,
    pub alpha_bars: Vec<f64>,
    pub beta_bars: Vec<f64>,
}

pub fn make_schedule(steps: usize, beta_start: f64, beta_end: f64) -> Result<DiffusionSchedule> {
    if steps < 1 {
        return Err(Error::InvalidArgument("schedule needs at least one step".into()));
    }
    if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "invalid beta range [{beta_start}, {beta_end}]"
        )));
    }
    let betas: Vec<f64> = (0..steps)
        .map(|i| {
            if steps == 1 {
                beta_start
            } else {
                beta_start + (beta_end - beta_start) * i as f64 / (steps - 1) as f64
            }
        })
        .collect();
    let mut alpha_bars = Vec::with_capacity(steps);
    let mut prod = 1.0;
    for &b in &betas {
        prod *= 1.0 - b;
        alpha_bars.push(prod.sqrt());
    }
    let beta_bars: Vec<f64> = alpha_bars.iter().map(|a| (1.0 - a * a).sqrt()).collect();
    let alphas: Vec<f64> = betas.iter().map(|b| 1.0 / (1.0 - b).sqrt()).collect();
    let gammas: Vec<f64> = betas
        .iter()
        .zip(&beta_bars)
        .map(|(b, bb)| b / bb)
        .collect();
    // sigma_k^2 = posterior variance beta_k (1 - abar_{k-1}^2) / (1 - abar_k^2);
    // the final denoising step (k = 1) is deterministic.
    let sigmas: Vec<f64> = (0..steps)
        .map(|i| {
            if i == 0 {
                0.0
            } else {
                let prev = alpha_bars[i - 1] * alpha_bars[i - 1];
                (betas[i] * (1.0 - prev) / (1.0 - alpha_bars[i] * alpha_bars[i])).sqrt()
            }
        })
        .collect();
    Ok(DiffusionSchedule { steps, betas, alphas, gammas, sigmas, alpha_bars, beta_bars })
}

impl DiffusionSchedule {
    pub fn default_schedule() -> Self {
        make_schedule(DEFAULT_DIFFUSION_STEPS, DEFAULT_BETA_START, DEFAULT_BETA_END).unwrap()
    }
}

/// a^k = alpha_bar_k a^0 + beta_bar_k eps, elementwise in normalized space.
pub fn forward_diffuse(
    schedule: &DiffusionSchedule,
    a0: &Array1<f64>,
    k: usize,
    noise: &Array1<f64>,
) -> Result<Array1<f64>> {
    if k < 1 || k > schedule.steps {
        return Err(Error::InvalidArgument(format!("step {k} out of 1..={}", schedule.steps)));
    }
    if a0.len() != noise.len() {
        return Err(Error::DimensionMismatch(format!(
            "action dim {} vs noise dim {}",
            a0.len(),
            noise.len()
        )));
    }
    Ok(a0 * schedule.alpha_bars[k - 1] + noise * schedule.beta_bars[k - 1])
}

/// MLP noise predictor: input = noisy action ++ timestep embedding ++ cond.
#[derive(Debug, Clone)]
pub struct NoisePredictor {
    pub mlp: Mlp,
    pub action_dim: usize,
    pub embed_dim: usize,
    pub cond_dim: usize,
}

impl NoisePredictor {
    pub fn init(
        action_dim: usize,
        embed_dim: usize,
        cond_dim: usize,
        hidden: &[usize],
        rng: &mut ChaCha12Rng,
    ) -> Self {
        let mut dims = vec![action_dim + embed_dim + cond_dim];
        dims.extend_from_slice(hidden);
        dims.push(action_dim);
        Self { mlp: Mlp::init(&dims, rng), action_dim, embed_dim, cond_dim }
    }

    pub fn default_policy_predictor(horizon: usize, rng: &mut ChaCha12Rng) -> Self {
        Self::init(
            horizon * ACTION_DIMS,
            TIMESTEP_EMBED_DIM,
            CONDITION_DIM,
            &[PREDICTOR_HIDDEN; 3],
            rng,
        )
    }

    pub fn input_vector(&self, noisy: &Array1<f64>, k: usize, cond: &Array1<f64>) -> Array1<f64> {
        let mut x = Array1::zeros(self.action_dim + self.embed_dim + self.cond_dim);
        x.slice_mut(ndarray::s![..self.action_dim]).assign(noisy);
        x.slice_mut(ndarray::s![self.action_dim..self.action_dim + self.embed_dim])
            .assign(&timestep_embedding(k, self.embed_dim));
        x.slice_mut(ndarray::s![self.action_dim + self.embed_dim..]).assign(cond);
        x
    }

    pub fn forward(&self, noisy: &Array1<f64>, k: usize, cond: &Array1<f64>) -> Array1<f64> {
        self.mlp.forward(&self.input_vector(noisy, k, cond))
    }
}

/// Per-dimension min-max normalization of 9-vector pose parameters to [-1, 1].
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ActionStats {
    pub min: [f64; ACTION_DIMS],
    pub max: [f64; ACTION_DIMS],
}

impl ActionStats {
    pub fn from_poses<'a>(poses: impl Iterator<Item = &'a Pose>) -> Result<Self> {
        let mut min = [f64::INFINITY; ACTION_DIMS];
        let mut max = [f64::NEG_INFINITY; ACTION_DIMS];
        let mut any = false;
        for p in poses {
            any = true;
            let v = p.to_vec9();
            for d in 0..ACTION_DIMS {
                min[d] = min[d].min(v[d]);
                max[d] = max[d].max(v[d]);
            }
        }
        if !any {
            return Err(Error::InvalidArgument("no poses for normalization stats".into()));
        }
        // Guard degenerate dimensions so normalize stays finite.
        for d in 0..ACTION_DIMS {
            if max[d] - min[d] < 1e-9 {
                min[d] -= 0.5;
                max[d] += 0.5;
            }
        }
        Ok(Self { min, max })
    }

    pub fn normalize9(&self, v: &[f64; ACTION_DIMS]) -> [f64; ACTION_DIMS] {
        let mut out = [0.0; ACTION_DIMS];
        for d in 0..ACTION_DIMS {
            out[d] = 2.0 * (v[d] - self.min[d]) / (self.max[d] - self.min[d]) - 1.0;
        }
        out
    }

    pub fn denormalize9(&self, v: &[f64; ACTION_DIMS]) -> [f64; ACTION_DIMS] {
        let mut out = [0.0; ACTION_DIMS];
        for d in 0..ACTION_DIMS {
            out[d] = self.min[d] + (v[d] + 1.0) * 0.5 * (self.max[d] - self.min[d]);
        }
        out
    }

    /// Flattens an N-pose horizon to its normalized N*9 action vector.
    pub fn horizon_to_array(&self, poses: &[Pose]) -> Array1<f64> {
        let mut out = Array1::zeros(poses.len() * ACTION_DIMS);
        for (i, p) in poses.iter().enumerate() {
            let n = self.normalize9(&p.to_vec9());
            for d in 0..ACTION_DIMS {
                out[i * ACTION_DIMS + d] = n[d];
            }
        }
        out
    }

    /// Inverse of `horizon_to_array`; rotations are re-orthonormalized.
    pub fn array_to_horizon(&self, a: &Array1<f64>) -> Result<Vec<Pose>> {
        if a.len() % ACTION_DIMS != 0 {
            return Err(Error::DimensionMismatch(format!(
                "action vector length {} not a multiple of {ACTION_DIMS}",
                a.len()
            )));
        }
        let mut poses = Vec::with_capacity(a.len() / ACTION_DIMS);
        for chunk in a.as_slice().unwrap().chunks(ACTION_DIMS) {
            let mut v = [0.0; ACTION_DIMS];
            v.copy_from_slice(chunk);
            poses.push(Pose::from_vec9(&self.denormalize9(&v)));
        }
        Ok(poses)
    }
}

/// All trainable state plus the schedule and normalization.
#[derive(Debug, Clone)]
pub struct Policy {
    pub grid_encoder: GridEncoder,
    pub pose_encoder: PoseEncoder,
    pub predictor: NoisePredictor,
    pub schedule: DiffusionSchedule,
    pub stats: ActionStats,
    pub action_horizon: usize,
    pub observation_horizon: usize,
    pub init_seed: u64,
}

impl Policy {
    pub fn init(
        action_horizon: usize,
        observation_horizon: usize,
        extent: f64,
        schedule: DiffusionSchedule,
        stats: ActionStats,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        Self {
            grid_encoder: GridEncoder::init(&mut rng),
            pose_encoder: PoseEncoder::init(observation_horizon, extent, &mut rng),
            predictor: NoisePredictor::default_policy_predictor(action_horizon, &mut rng),
            schedule,
            stats,
            action_horizon,
            observation_horizon,
            init_seed: seed,
        }
    }

    pub fn condition(&self, pose_history: &[Pose], grid: &SparseTensor) -> Result<Array1<f64>> {
        let e_cam = self.pose_encoder.forward(pose_history)?;
        let e_ogm = self.grid_encoder.forward(grid);
        crate::encoder::condition(&e_cam, &e_ogm)
    }

    pub fn param_count(&self) -> usize {
        self.grid_encoder.param_count()
            + self.pose_encoder.mlp.param_count()
            + self.predictor.mlp.param_count()
    }
}

/// One sliding-window training sample.
#[derive(Debug, Clone)]
pub struct TrainSample {
    /// Most recent pose last, length <= observation horizon.
    pub pose_history: Vec<Pose>,
    pub grid: SparseTensor,
    /// Normalized N*9 target action vector.
    pub target: Array1<f64>,
}

fn standard_normal(dim: usize, rng: &mut ChaCha12Rng) -> Array1<f64> {
    Array1::from_shape_fn(dim, |_| rng.sample(StandardNormal))
}

/// One SGD step over a batch: samples k and eps per element, returns the
/// pre-update MSE loss.
pub fn train_step(
    policy: &mut Policy,
    batch: &[TrainSample],
    rng: &mut ChaCha12Rng,
    lr: f64,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty training batch".into()));
    }
    let dim = policy.predictor.action_dim;
    let ks: Vec<usize> = (0..batch.len())
        .map(|_| rng.gen_range(1..=policy.schedule.steps))
        .collect();
    let eps: Vec<Array1<f64>> = (0..batch.len()).map(|_| standard_normal(dim, rng)).collect();
    train_step_with_noise(policy, batch, &ks, &eps, lr)
}

/// Deterministic core of `train_step` with caller-provided steps and noise.
pub fn train_step_with_noise(
    policy: &mut Policy,
    batch: &[TrainSample],
    ks: &[usize],
    eps: &[Array1<f64>],
    lr: f64,
) -> Result<f64> {
    let mut pred_grad = policy.predictor.mlp.grad_zeros();
    let mut pose_grad = policy.pose_encoder.mlp.grad_zeros();
    let mut grid_grad: GridEncoderGrad = policy.grid_encoder.grad_zeros();
    let loss = batch_pass(
        policy,
        batch,
        ks,
        eps,
        Some((&mut pred_grad, &mut pose_grad, &mut grid_grad)),
    )?;
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!("training loss is {loss}")));
    }
    policy.predictor.mlp.sgd_step(&pred_grad, lr);
    policy.pose_encoder.mlp.sgd_step(&pose_grad, lr);
    policy.grid_encoder.sgd_step(&grid_grad, lr);
    Ok(loss)
}

/// Heavy-ball velocity buffers for momentum SGD, one per trainable module.
#[derive(Debug)]
pub struct Momentum {
    pub pred: MlpGrad,
    pub pose: MlpGrad,
    pub grid: GridEncoderGrad,
}

impl Momentum {
    pub fn zeros(policy: &Policy) -> Self {
        Self {
            pred: policy.predictor.mlp.grad_zeros(),
            pose: policy.pose_encoder.mlp.grad_zeros(),
            grid: policy.grid_encoder.grad_zeros(),
        }
    }
}

/// One training step with classical momentum: v <- beta v + g, theta -= lr v.
/// beta = 0 reduces to `train_step`.
pub fn train_step_momentum(
    policy: &mut Policy,
    batch: &[TrainSample],
    rng: &mut ChaCha12Rng,
    lr: f64,
    beta: f64,
    vel: &mut Momentum,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty training batch".into()));
    }
    let dim = policy.predictor.action_dim;
    let ks: Vec<usize> = (0..batch.len())
        .map(|_| rng.gen_range(1..=policy.schedule.steps))
        .collect();
    let eps: Vec<Array1<f64>> = (0..batch.len()).map(|_| standard_normal(dim, rng)).collect();
    let mut pred_grad = policy.predictor.mlp.grad_zeros();
    let mut pose_grad = policy.pose_encoder.mlp.grad_zeros();
    let mut grid_grad = policy.grid_encoder.grad_zeros();
    let loss = batch_pass(
        policy,
        batch,
        &ks,
        &eps,
        Some((&mut pred_grad, &mut pose_grad, &mut grid_grad)),
    )?;
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!("training loss is {loss}")));
    }
    vel.pred.scale(beta);
    vel.pred.add(&pred_grad);
    vel.pose.scale(beta);
    vel.pose.add(&pose_grad);
    vel.grid.scale(beta);
    vel.grid.add(&grid_grad);
    policy.predictor.mlp.sgd_step(&vel.pred, lr);
    policy.pose_encoder.mlp.sgd_step(&vel.pose, lr);
    policy.grid_encoder.sgd_step(&vel.grid, lr);
    Ok(loss)
}

/// Loss only, no update — same noise convention as `train_step_with_noise`.
pub fn batch_loss_with_noise(
    policy: &Policy,
    batch: &[TrainSample],
    ks: &[usize],
    eps: &[Array1<f64>],
) -> Result<f64> {
    // batch_pass only mutates grads, which we skip here.
    let mut p = policy.clone();
    batch_pass(&mut p, batch, ks, eps, None)
}

fn batch_pass(
    policy: &mut Policy,
    batch: &[TrainSample],
    ks: &[usize],
    eps: &[Array1<f64>],
    grads: Option<(&mut MlpGrad, &mut MlpGrad, &mut GridEncoderGrad)>,
) -> Result<f64> {
    if ks.len() != batch.len() || eps.len() != batch.len() {
        return Err(Error::DimensionMismatch("batch/noise length mismatch".into()));
    }
    let dim = policy.predictor.action_dim;
    let mut total = 0.0;
    let mut grads = grads;
    for ((sample, &k), noise) in batch.iter().zip(ks).zip(eps) {
        if sample.target.len() != dim {
            return Err(Error::DimensionMismatch(format!(
                "target dim {} vs predictor dim {dim}",
                sample.target.len()
            )));
        }
        let pose_in = policy.pose_encoder.input_vector(&sample.pose_history)?;
        let (cam_cache, e_cam) = policy.pose_encoder.mlp.forward_cached(&pose_in);
        let (ogm_cache, e_ogm) = policy.grid_encoder.forward_cached(&sample.grid);
        let cond = crate::encoder::condition(&e_cam, &e_ogm)?;
        let noisy = forward_diffuse(&policy.schedule, &sample.target, k, noise)?;
        let x = policy.predictor.input_vector(&noisy, k, &cond);
        let (pred_cache, pred) = policy.predictor.mlp.forward_cached(&x);
        let diff = &pred - noise;
        total += diff.mapv(|v| v * v).sum() / dim as f64;
        if let Some((pred_grad, pose_grad, grid_grad)) = grads.as_mut() {
            let dy = &diff * (2.0 / (dim * batch.len()) as f64);
            let dx = policy.predictor.mlp.backward(&pred_cache, &dy, pred_grad);
            let cam_dim = e_cam.len();
            let cond_start = policy.predictor.action_dim + policy.predictor.embed_dim;
            let d_cam = dx.slice(ndarray::s![cond_start..cond_start + cam_dim]).to_owned();
            let d_ogm = dx.slice(ndarray::s![cond_start + cam_dim..]).to_owned();
            policy.pose_encoder.mlp.backward(&cam_cache, &d_cam, pose_grad);
            policy.grid_encoder.backward(&ogm_cache, &d_ogm, grid_grad);
        }
    }
    Ok(total / batch.len() as f64)
}

/// Iterative denoising from a^K ~ N(0, I); deterministic per rng state.
pub fn sample_action_array(
    predictor: &NoisePredictor,
    schedule: &DiffusionSchedule,
    cond: &Array1<f64>,
    rng: &mut ChaCha12Rng,
) -> Result<Array1<f64>> {
    let dim = predictor.action_dim;
    let mut a = standard_normal(dim, rng);
    for k in (1..=schedule.steps).rev() {
        let eps_hat = predictor.forward(&a, k, cond);
        let i = k - 1;
        a = (&a - &(eps_hat * schedule.gammas[i])) * schedule.alphas[i];
        if schedule.sigmas[i] > 0.0 {
            a += &(standard_normal(dim, rng) * schedule.sigmas[i]);
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("non-finite sample at step {k}")));
        }
    }
    Ok(a)
}

/// Full policy inference: conditioning, denoising, denormalization.
pub fn sample_actions(
    policy: &Policy,
    pose_history: &[Pose],
    grid: &SparseTensor,
    rng: &mut ChaCha12Rng,
) -> Result<Vec<Pose>> {
    let cond = policy.condition(pose_history, grid)?;
    let a = sample_action_array(&policy.predictor, &policy.schedule, &cond, rng)?;
    // Actions are min-max normalized to [-1, 1]; clip before denormalizing so
    // occasional reverse-process excursions cannot leave the demonstrated
    // pose range.
    let a = a.mapv(|v| v.clamp(-1.0, 1.0));
    policy.stats.array_to_horizon(&a)
}
