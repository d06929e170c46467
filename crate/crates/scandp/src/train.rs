//! Training driver: scripted demonstrations in, policy checkpoint out.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::build_dataset;
use crate::diffusion::{
    make_schedule, train_step_momentum, Momentum, Policy, DEFAULT_ACTION_HORIZON,
    DEFAULT_BETA_END, DEFAULT_BETA_START, DEFAULT_DIFFUSION_STEPS,
};
use crate::encoder::OBSERVATION_HORIZON;
use crate::error::{Error, Result};
use crate::expert::Demonstration;

/// Translation scale used by the pose encoder; matches the default
/// workspace side length.
pub const POSE_EXTENT: f64 = 0.8;

fn default_action_horizon() -> usize {
    DEFAULT_ACTION_HORIZON
}
fn default_observation_horizon() -> usize {
    OBSERVATION_HORIZON
}
fn default_diffusion_steps() -> usize {
    DEFAULT_DIFFUSION_STEPS
}
fn default_beta_start() -> f64 {
    DEFAULT_BETA_START
}
fn default_beta_end() -> f64 {
    DEFAULT_BETA_END
}
fn default_steps() -> usize {
    12_000
}
fn default_batch_size() -> usize {
    8
}
fn default_lr() -> f64 {
    0.1
}
fn default_lr_decay() -> f64 {
    0.2
}
fn default_momentum() -> f64 {
    0.9
}
fn default_log_every() -> usize {
    50
}

/// Knobs for a training run. The defaults are sized for a single CPU core:
/// plain stochastic gradient, small batches, a fixed step-size drop at 75%
/// of the run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(default = "default_action_horizon")]
    pub action_horizon: usize,
    #[serde(default = "default_observation_horizon")]
    pub observation_horizon: usize,
    #[serde(default = "default_diffusion_steps")]
    pub diffusion_steps: usize,
    #[serde(default = "default_beta_start")]
    pub beta_start: f64,
    #[serde(default = "default_beta_end")]
    pub beta_end: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    /// Multiplier applied to the step size after 75% of the steps.
    #[serde(default = "default_lr_decay")]
    pub lr_decay: f64,
    /// Heavy-ball momentum coefficient; 0 disables momentum.
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_log_every")]
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        serde_json::from_str("{}").unwrap()
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument(
                "steps and batch_size must be positive".into(),
            ));
        }
        if !(self.lr > 0.0 && self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::InvalidArgument(
                "lr must be positive and lr_decay in (0, 1]".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidArgument("momentum must be in [0, 1)".into()));
        }
        if self.action_horizon == 0 || self.observation_horizon == 0 {
            return Err(Error::InvalidArgument("horizons must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    /// (step, batch loss) every `log_every` steps plus the last step.
    pub losses: Vec<(usize, f64)>,
    pub final_loss: f64,
    pub dataset_size: usize,
    pub runtime_s: f64,
}

/// Train a policy from scratch on scripted demonstrations.
pub fn train_policy(demos: &[Demonstration], cfg: &TrainConfig) -> Result<(Policy, TrainReport)> {
    cfg.validate()?;
    if demos.is_empty() {
        return Err(Error::InvalidArgument("no demonstrations".into()));
    }
    let start = std::time::Instant::now();
    let (samples, stats) = build_dataset(demos, cfg.action_horizon, cfg.observation_horizon)?;
    if samples.is_empty() {
        return Err(Error::InvalidArgument(
            "demonstrations too short for the configured horizons".into(),
        ));
    }
    let schedule = make_schedule(cfg.diffusion_steps, cfg.beta_start, cfg.beta_end)?;
    let mut policy = Policy::init(
        cfg.action_horizon,
        cfg.observation_horizon,
        POSE_EXTENT,
        schedule,
        stats,
        cfg.seed,
    );
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let mut vel = Momentum::zeros(&policy);
    let mut losses = Vec::new();
    let mut final_loss = f64::NAN;
    let decay_at = cfg.steps * 3 / 4;
    for step in 0..cfg.steps {
        let lr = if step >= decay_at {
            cfg.lr * cfg.lr_decay
        } else {
            cfg.lr
        };
        let batch: Vec<_> = (0..cfg.batch_size)
            .map(|_| samples[rng.gen_range(0..samples.len())].clone())
            .collect();
        let loss = train_step_momentum(&mut policy, &batch, &mut rng, lr, cfg.momentum, &mut vel)?;
        final_loss = loss;
        if step % cfg.log_every == 0 || step + 1 == cfg.steps {
            log::info!("train step {step}: loss {loss:.4}");
            losses.push((step, loss));
        }
    }
    let report = TrainReport {
        losses,
        final_loss,
        dataset_size: samples.len(),
        runtime_s: start.elapsed().as_secs_f64(),
    };
    Ok((policy, report))
}
