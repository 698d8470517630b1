//! The agent policy: state featurization, the trainable network, von Mises
//! and Bernoulli action distributions, sampling, log-densities and analytic
//! parameter gradients.

mod checkpoint;
mod net;
pub mod vonmises;

use std::f64::consts::PI;

use rand_chacha::ChaCha8Rng;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use net::{backward, forward as net_forward, HeadPreacts, Layout, NetConfig, PolicyParams, Trace};

use crate::dome::AngleCanvas;
use crate::scenesim::{BaseFeatureMap, Pose3D, JOINTS};
use vonmises::{
    sample_von_mises, truncated_normalizer, truncated_normalizer_dmean, von_mises_log_density,
};

/// History slots of previous fused predictions fed to the policy.
pub const HISTORY_LEN: usize = 4;
const POSE_SLOTS: usize = 2 + HISTORY_LEN;

/// One sampled action: relative spherical angles plus the stop decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyAction {
    pub delta_azimuth: f64,
    pub delta_elevation: f64,
    pub continue_flag: bool,
}

/// Linear annealing of the von Mises precision pair.
#[derive(Debug, Clone)]
pub struct PrecisionSchedule {
    pub ma_start: f64,
    pub me_start: f64,
    pub ma_end: f64,
    pub me_end: f64,
    /// Fraction of training over which the interpolation runs; clamped at
    /// the end values afterwards.
    pub anneal_fraction: f64,
}

impl Default for PrecisionSchedule {
    fn default() -> Self {
        PrecisionSchedule {
            ma_start: 1.0,
            me_start: 10.0,
            ma_end: 25.0,
            me_end: 50.0,
            anneal_fraction: 1.0,
        }
    }
}

impl PrecisionSchedule {
    /// Precisions (m_a, m_e) at training progress in [0, 1].
    pub fn at(&self, progress: f64) -> (f64, f64) {
        let f = (progress / self.anneal_fraction).clamp(0.0, 1.0);
        (
            self.ma_start + f * (self.ma_end - self.ma_start),
            self.me_start + f * (self.me_end - self.me_start),
        )
    }
}

/// The state tuple feeding the policy network.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub base: Vec<f64>,
    pub pose_feats: Vec<f64>,
    pub canvas: Vec<f64>,
    pub aux: [f64; 2],
}

impl AgentState {
    /// Non-map features in network order.
    pub fn extra(&self) -> Vec<f64> {
        let mut v = self.pose_feats.clone();
        v.extend_from_slice(&self.canvas);
        v.extend_from_slice(&self.aux);
        v
    }

    pub fn extra_dim(canvas_dim: usize) -> usize {
        POSE_SLOTS * JOINTS * 3 + canvas_dim + 2
    }
}

fn push_pose(out: &mut Vec<f64>, pose: Option<&Pose3D>, scale_mm: f64) {
    match pose {
        Some(p) => {
            for j in 0..JOINTS {
                for c in 0..3 {
                    out.push(p.joints[j][c] / scale_mm);
                }
            }
        }
        None => out.extend(std::iter::repeat(0.0).take(JOINTS * 3)),
    }
}

/// Pack one step's observations into the policy state. Pose features are
/// centered on the scene origin and scaled by the dome radius; missing
/// history slots are zero-padded. With `base_only` set (the "map only"
/// ablation) everything except the base map is zeroed.
#[allow(clippy::too_many_arguments)]
pub fn featurize(
    base_map: &BaseFeatureMap,
    current_estimate: Option<&Pose3D>,
    partial_fused: Option<&Pose3D>,
    history: &[Pose3D],
    canvas: &AngleCanvas,
    actions_taken: usize,
    persons_detected: usize,
    dome_radius_m: f64,
    base_only: bool,
) -> AgentState {
    let scale_mm = dome_radius_m * 1000.0;
    let canvas_flat = canvas.flat();
    if base_only {
        return AgentState {
            base: base_map.grid.clone(),
            pose_feats: vec![0.0; POSE_SLOTS * JOINTS * 3],
            canvas: vec![0.0; canvas_flat.len()],
            aux: [0.0, 0.0],
        };
    }
    let mut pose_feats = Vec::with_capacity(POSE_SLOTS * JOINTS * 3);
    push_pose(&mut pose_feats, current_estimate, scale_mm);
    push_pose(&mut pose_feats, partial_fused, scale_mm);
    for i in 0..HISTORY_LEN {
        // history[0] is the most recent fused prediction
        push_pose(&mut pose_feats, history.get(i), scale_mm);
    }
    AgentState {
        base: base_map.grid.clone(),
        pose_feats,
        canvas: canvas_flat,
        aux: [actions_taken as f64, persons_detected as f64],
    }
}

/// Distribution parameters produced by the network for one state.
#[derive(Debug, Clone, Copy)]
pub struct PolicyOutputs {
    pub mean_azimuth: f64,
    pub mean_elevation: f64,
    pub p_continue: f64,
    pub preacts: HeadPreacts,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Network forward pass mapped to distribution parameters:
/// mean azimuth in (-pi, pi), mean elevation in (-kappa, kappa),
/// continue probability in (0, 1).
pub fn forward(params: &PolicyParams, state: &AgentState, kappa: f64) -> PolicyOutputs {
    let trace = net_forward(params, &state.base, &state.extra());
    outputs_from_preacts(trace.heads, kappa)
}

fn outputs_from_preacts(heads: HeadPreacts, kappa: f64) -> PolicyOutputs {
    PolicyOutputs {
        mean_azimuth: PI * heads.azimuth.tanh(),
        mean_elevation: kappa * heads.elevation.tanh(),
        p_continue: sigmoid(heads.cont),
        preacts: heads,
    }
}

/// Joint log-density of an action: full-circle von Mises azimuth, von Mises
/// elevation renormalized over [-kappa, kappa], Bernoulli continue.
pub fn log_density(outputs: &PolicyOutputs, action: &PolicyAction, ma: f64, me: f64, kappa: f64) -> f64 {
    let la = von_mises_log_density(action.delta_azimuth, outputs.mean_azimuth, ma);
    let le = me * (action.delta_elevation - outputs.mean_elevation).cos()
        - truncated_normalizer(outputs.mean_elevation, me, kappa).ln();
    let lc = if action.continue_flag {
        outputs.p_continue.ln()
    } else {
        (1.0 - outputs.p_continue).ln()
    };
    la + le + lc
}

const MAX_REJECTIONS: usize = 1_000_000;

/// Sample an action; elevation samples outside [-kappa, kappa] are rejected
/// and redrawn. Falls back to a bare continue if rejection stalls (cannot
/// happen under the schedule's precision bounds).
pub fn sample_action(
    params: &PolicyParams,
    state: &AgentState,
    ma: f64,
    me: f64,
    kappa: f64,
    rng: &mut ChaCha8Rng,
) -> (PolicyAction, f64) {
    let outputs = forward(params, state, kappa);
    let azimuth = sample_von_mises(outputs.mean_azimuth, ma, rng);
    let mut elevation = None;
    for _ in 0..MAX_REJECTIONS {
        let e = sample_von_mises(outputs.mean_elevation, me, rng);
        if e.abs() <= kappa {
            elevation = Some(e);
            break;
        }
    }
    let action = match elevation {
        Some(delta_elevation) => {
            use rand::Rng;
            let continue_flag = rng.random_range(0.0..1.0) < outputs.p_continue;
            PolicyAction {
                delta_azimuth: azimuth,
                delta_elevation,
                continue_flag,
            }
        }
        None => PolicyAction {
            delta_azimuth: 0.0,
            delta_elevation: 0.0,
            continue_flag: true,
        },
    };
    let lp = log_density(&outputs, &action, ma, me, kappa);
    (action, lp)
}

/// Exact analytic gradient of log pi(action | state) over all parameters.
pub fn grad_log_density(
    params: &PolicyParams,
    state: &AgentState,
    action: &PolicyAction,
    ma: f64,
    me: f64,
    kappa: f64,
) -> Vec<f64> {
    let trace = net_forward(params, &state.base, &state.extra());
    let outputs = outputs_from_preacts(trace.heads, kappa);

    // azimuth score through the tanh mean head
    let g_mean_a = ma * (action.delta_azimuth - outputs.mean_azimuth).sin();
    let ta = trace.heads.azimuth.tanh();
    let seed_a = g_mean_a * PI * (1.0 - ta * ta);

    // truncated elevation score: von Mises term plus the normalizer term
    let z = truncated_normalizer(outputs.mean_elevation, me, kappa);
    let dz = truncated_normalizer_dmean(outputs.mean_elevation, me, kappa);
    let g_mean_e = me * (action.delta_elevation - outputs.mean_elevation).sin() - dz / z;
    let te = trace.heads.elevation.tanh();
    let seed_e = g_mean_e * kappa * (1.0 - te * te);

    // Bernoulli score
    let c = if action.continue_flag { 1.0 } else { 0.0 };
    let seed_c = c - outputs.p_continue;

    let mut grad = params.zero_grad();
    backward(params, &trace, seed_a, seed_e, seed_c, &mut grad);
    grad
}
