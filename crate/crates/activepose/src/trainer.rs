//! Policy-gradient training: episode returns normalized to zero mean and
//! unit variance over the batch, Adam ascent on the score-function
//! gradient, precision annealing and best-on-validation tracking.

use std::fmt::Write as _;
use std::time::Instant;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::policy::{grad_log_density, PolicyParams, PrecisionSchedule};
use crate::rollout::{run_policy_episode, RolloutConfig, Trajectory};
use crate::scenesim::{mix, NoiseModel, Scene};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("no training scenes")]
    NoScenes,
    #[error("non-finite gradient at iteration {iter} (norm {norm})")]
    BadGradient { iter: usize, norm: f64 },
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    /// Total training episodes (sequences).
    pub episodes: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Agent-step counts at which the learning rate is halved.
    pub lr_halvings: Vec<u64>,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub schedule: PrecisionSchedule,
    pub rollout: RolloutConfig,
    pub noise: NoiseModel,
    /// Validate (and maybe snapshot) every this many iterations.
    pub val_interval: usize,
    pub val_episodes: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            episodes: 2000,
            batch_size: 5,
            lr: 1e-3,
            lr_halvings: Vec::new(),
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            schedule: PrecisionSchedule::default(),
            rollout: RolloutConfig::default(),
            noise: NoiseModel::default(),
            val_interval: 40,
            val_episodes: 4,
            seed: 0,
        }
    }
}

/// Per-step suffix sums of the rewards: the return earned from each action
/// onward within its episode.
pub fn compute_returns(rewards: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for (i, &r) in rewards.iter().enumerate().rev() {
        acc += r;
        out[i] = acc;
    }
    out
}

/// Standardize the batch's episode-level cumulative rewards to zero mean
/// and unit variance; the normalized scalar is broadcast to every step of
/// its episode. A degenerate batch (no spread) normalizes to all zeros.
pub fn normalize_returns(episode_returns: &[f64]) -> Vec<f64> {
    let n = episode_returns.len();
    if n == 0 {
        return Vec::new();
    }
    let mean: f64 = episode_returns.iter().sum::<f64>() / n as f64;
    let var: f64 = episode_returns
        .iter()
        .map(|&g| (g - mean) * (g - mean))
        .sum::<f64>()
        / n as f64;
    let sd = var.sqrt();
    episode_returns
        .iter()
        .map(|&g| if sd > 0.0 { (g - mean) / sd } else { 0.0 })
        .collect()
}

/// Adam moment buffers.
#[derive(Debug, Clone)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(dim: usize) -> Self {
        Adam {
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            t: 0,
        }
    }

    /// Gradient-ascent step.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64, b1: f64, b2: f64, eps: f64) {
        self.t += 1;
        let bc1 = 1.0 - b1.powi(self.t as i32);
        let bc2 = 1.0 - b2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * grad[i];
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * grad[i] * grad[i];
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            params[i] += lr * mhat / (vhat.sqrt() + eps);
        }
    }
}

/// One policy-gradient update from a batch of trajectories. Returns the
/// gradient norm. The trajectories must carry stored states.
pub fn train_step(
    params: &mut PolicyParams,
    adam: &mut Adam,
    batch: &[Trajectory],
    ma: f64,
    me: f64,
    kappa: f64,
    lr: f64,
    cfg: &TrainConfig,
    iter: usize,
) -> Result<f64, TrainError> {
    let episode_returns: Vec<f64> = batch.iter().map(|t| t.episode_return()).collect();
    let ghat = normalize_returns(&episode_returns);

    let mut grad = params.zero_grad();
    for (traj, &g) in batch.iter().zip(&ghat) {
        if g == 0.0 {
            continue;
        }
        for step in traj.steps() {
            let state = step
                .state
                .as_ref()
                .expect("training trajectories store states");
            let sg = grad_log_density(params, state, &step.action, ma, me, kappa);
            for (a, b) in grad.iter_mut().zip(&sg) {
                *a += g * b;
            }
        }
    }
    let scale = 1.0 / batch.len() as f64;
    for g in &mut grad {
        *g *= scale;
    }
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if !norm.is_finite() {
        return Err(TrainError::BadGradient { iter, norm });
    }
    adam.step(
        &mut params.data,
        &grad,
        lr,
        cfg.adam_beta1,
        cfg.adam_beta2,
        cfg.adam_eps,
    );
    Ok(norm)
}

#[derive(Debug, Clone)]
pub struct TrainLogRow {
    pub step: usize,
    pub return_mean: f64,
    pub error_mm: f64,
    pub views_mean: f64,
    pub grad_norm: f64,
    pub seconds: f64,
}

#[derive(Debug)]
pub struct TrainOutcome {
    /// Parameters with the best validation error seen.
    pub best_params: PolicyParams,
    pub best_val_error: f64,
    pub final_params: PolicyParams,
    pub log: Vec<TrainLogRow>,
}

impl TrainOutcome {
    pub fn log_csv(&self) -> String {
        let mut s = String::from("step,return_mean,error_mm,views_mean,grad_norm,seconds\n");
        for r in &self.log {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{:.3}",
                r.step, r.return_mean, r.error_mm, r.views_mean, r.grad_norm, r.seconds
            );
        }
        s
    }
}

/// Mean episode error of the current policy on held-out scenes, with the
/// exploration precisions pinned at their final (sharpest) values.
pub fn validate(
    params: &PolicyParams,
    scenes: &[Scene],
    noise: &NoiseModel,
    rollout: &RolloutConfig,
    schedule: &PrecisionSchedule,
    episodes: usize,
    seed: u64,
) -> f64 {
    let (ma, me) = schedule.at(1.0);
    let mut total = 0.0;
    let mut n = 0;
    for e in 0..episodes.max(1) {
        let scene = &scenes[e % scenes.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, 0x7a1 + e as u64));
        let start = rng.random_range(0..scene.rig().len());
        let traj = run_policy_episode(
            scene,
            params,
            noise,
            rollout,
            ma,
            me,
            mix(seed, e as u64),
            start,
        );
        total += traj.mean_error();
        n += 1;
    }
    total / n as f64
}

/// Full training run. Bitwise deterministic given the config and scenes
/// (the wall-clock column of the log aside).
pub fn train(
    cfg: &TrainConfig,
    init: PolicyParams,
    train_scenes: &[Scene],
    val_scenes: &[Scene],
) -> Result<TrainOutcome, TrainError> {
    if train_scenes.is_empty() {
        return Err(TrainError::NoScenes);
    }
    let started = Instant::now();
    let mut params = init;
    let mut adam = Adam::new(params.data.len());
    let mut rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed, 0x7ea1));
    let kappa = train_scenes[0].rig().kappa();

    let iters = cfg.episodes.div_ceil(cfg.batch_size);
    let mut agent_steps: u64 = 0;
    let mut best_params = params.clone();
    let mut best_val_error = f64::INFINITY;
    let mut log = Vec::new();

    for iter in 0..iters {
        let done = iter * cfg.batch_size;
        let progress = done as f64 / cfg.episodes as f64;
        let (ma, me) = cfg.schedule.at(progress);
        let halvings = cfg.lr_halvings.iter().filter(|&&h| agent_steps >= h).count();
        let lr = cfg.lr * 0.5f64.powi(halvings as i32);

        // One scene and start camera per batch iteration: the episode
        // returns then differ through the sampled actions and noise draws
        // rather than scene difficulty, so normalizing them over the batch
        // compares policy behavior. Noise draws stay independent per
        // episode — sharing them would reward visiting whichever camera
        // drew lucky noise this batch.
        let scene = &train_scenes[rng.random_range(0..train_scenes.len())];
        let start = rng.random_range(0..scene.rig().len());
        let batch: Vec<Trajectory> = (0..cfg.batch_size)
            .map(|b| {
                let ep_seed = mix(cfg.seed, (iter * cfg.batch_size + b) as u64);
                run_policy_episode(scene, &params, &cfg.noise, &cfg.rollout, ma, me, ep_seed, start)
            })
            .collect();
        agent_steps += batch.iter().map(|t| t.total_actions as u64).sum::<u64>();

        let grad_norm = train_step(&mut params, &mut adam, &batch, ma, me, kappa, lr, cfg, iter)?;

        let n = batch.len() as f64;
        log.push(TrainLogRow {
            step: done + cfg.batch_size,
            return_mean: batch.iter().map(|t| t.episode_return()).sum::<f64>() / n,
            error_mm: batch.iter().map(|t| t.mean_error()).sum::<f64>() / n,
            views_mean: batch.iter().map(|t| t.total_views as f64).sum::<f64>()
                / batch.iter().map(|t| t.phases.len() as f64).sum::<f64>(),
            grad_norm,
            seconds: started.elapsed().as_secs_f64(),
        });

        let last = iter + 1 == iters;
        if !val_scenes.is_empty() && ((iter + 1) % cfg.val_interval == 0 || last) {
            let err = validate(
                &params,
                val_scenes,
                &cfg.noise,
                &cfg.rollout,
                &cfg.schedule,
                cfg.val_episodes,
                // fixed seed: every snapshot is scored on the same episodes,
                // so the best-so-far comparison is apples to apples
                mix(cfg.seed, 0xa11),
            );
            if err < best_val_error {
                best_val_error = err;
                best_params = params.clone();
            }
        }
    }
    if val_scenes.is_empty() {
        best_params = params.clone();
    }
    Ok(TrainOutcome {
        best_params,
        best_val_error,
        final_params: params,
        log,
    })
}
