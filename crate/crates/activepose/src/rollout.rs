//! Episode engine: time-freeze active-views chained into active-sequences,
//! the reward model, and the scripted Random / Max-Azim / Oracle baselines.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dome::{nearest_camera, wrap_angle, AngleCanvas, CameraSpec};
use crate::fusion::{fuse, multi_target_error, reconstruction_error, DEFAULT_E_MISS};
use crate::identity::{
    build_appearance_model, match_detections, AppearanceModel, DEFAULT_COST_THRESHOLD, DEFAULT_L,
};
use crate::policy::{featurize, sample_action, AgentState, PolicyAction, PolicyParams, HISTORY_LEN};
use crate::scenesim::{mix, observe, NoiseModel, Pose3D, Scene};

/// Penalty for moving to an already-visited camera within one active-view.
pub const REVISIT_PENALTY: f64 = 2.5;
/// Offset discouraging marginal extra views in the continue reward.
pub const DEFAULT_TAU: f64 = 0.07;

/// Single-target (track person 0) or multi-target (all persons) evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Single,
    Multi,
}

#[derive(Debug, Clone)]
pub struct RolloutConfig {
    pub mode: Mode,
    /// Hard cap on views per active-view; reaching it forces the move to the
    /// next active-view.
    pub max_views: usize,
    /// `Some(k)`: ignore the learned stop action and always take k views.
    pub fixed_views: Option<usize>,
    pub tau: f64,
    pub revisit_penalty: f64,
    pub e_miss: f64,
    /// Ablation: zero all state features except the base map.
    pub base_only: bool,
    /// Ablation: drop the temporal prior between active-views.
    pub reset_prior: bool,
    /// Appearance-model calibration samples per person.
    pub l_samples: usize,
    pub cost_threshold: f64,
    /// Keep per-step states in the trajectory (needed for training).
    pub store_states: bool,
    /// Angle-canvas discretization fed to the policy.
    pub canvas_w: usize,
    pub canvas_h: usize,
}

impl Default for RolloutConfig {
    fn default() -> Self {
        RolloutConfig {
            mode: Mode::Single,
            max_views: 8,
            fixed_views: None,
            tau: DEFAULT_TAU,
            revisit_penalty: REVISIT_PENALTY,
            e_miss: DEFAULT_E_MISS,
            base_only: false,
            reset_prior: false,
            l_samples: DEFAULT_L,
            cost_threshold: DEFAULT_COST_THRESHOLD,
            store_states: true,
            canvas_w: crate::dome::CANVAS_W,
            canvas_h: crate::dome::CANVAS_H,
        }
    }
}

/// One action of one active-view.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub state: Option<AgentState>,
    pub action: PolicyAction,
    pub log_density: f64,
    pub reward: f64,
    /// Reconstruction error after fusing the views taken so far.
    pub error: f64,
    pub revisit: bool,
    /// Camera the agent observed from at this step.
    pub camera_id: usize,
}

/// One time-freeze: all views taken at a single scene time.
#[derive(Debug, Clone)]
pub struct ViewPhase {
    pub t: usize,
    pub start_camera: usize,
    pub steps: Vec<StepRecord>,
    /// Camera ids in visit order (first is the start camera).
    pub visited: Vec<usize>,
    /// Error of the final fused estimate at this time.
    pub final_error: f64,
}

/// A full active-sequence over one scene.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub phases: Vec<ViewPhase>,
    pub total_views: usize,
    /// Policy invocations; zero for the scripted baselines.
    pub total_actions: usize,
}

impl Trajectory {
    pub fn mean_error(&self) -> f64 {
        let s: f64 = self.phases.iter().map(|p| p.final_error).sum();
        s / self.phases.len() as f64
    }

    pub fn steps(&self) -> impl Iterator<Item = &StepRecord> {
        self.phases.iter().flat_map(|p| p.steps.iter())
    }

    pub fn episode_return(&self) -> f64 {
        self.steps().map(|s| s.reward).sum()
    }

    /// One line per step; stable across runs for identical inputs.
    pub fn to_text(&self) -> String {
        let mut s = String::from("activepose-trajectory-v1\n");
        for p in &self.phases {
            let _ = writeln!(
                s,
                "phase t={} start={} views={} error={}",
                p.t,
                p.start_camera,
                p.visited.len(),
                p.final_error
            );
            for (k, st) in p.steps.iter().enumerate() {
                let _ = writeln!(
                    s,
                    "step t={} k={} cam={} daz={} del={} cont={} revisit={} reward={} err={}",
                    p.t,
                    k + 1,
                    st.camera_id,
                    st.action.delta_azimuth,
                    st.action.delta_elevation,
                    st.action.continue_flag as u8,
                    st.revisit as u8,
                    st.reward,
                    st.error
                );
            }
        }
        s
    }
}

/// Final-view improvement reward: 1 - (final error / first-view error).
/// Zero first-view error (nothing to improve) yields zero.
pub fn improvement_reward(eps_first: f64, eps_final: f64) -> f64 {
    if eps_first <= 0.0 {
        0.0
    } else {
        1.0 - eps_final / eps_first
    }
}

/// Reward for deciding to keep viewing: how much the best future fusion in
/// this active-view improves on the current one, minus the tau offset.
pub fn continue_reward(eps_now: f64, min_future: f64, tau: f64) -> f64 {
    let ratio = if eps_now <= 0.0 {
        1.0
    } else {
        min_future / eps_now
    };
    1.0 - ratio - tau
}

/// Fill in per-step rewards from the recorded errors and revisit flags.
/// Non-final steps earn the continue reward plus any revisit penalty; the
/// final step earns the improvement reward through both action heads.
pub fn assign_rewards(steps: &mut [StepRecord], revisit_penalty: f64, tau: f64) {
    let n = steps.len();
    if n == 0 {
        return;
    }
    let errors: Vec<f64> = steps.iter().map(|s| s.error).collect();
    for k in 0..n - 1 {
        let min_future = errors[k + 1..]
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        let mut r = continue_reward(errors[k], min_future, tau);
        if steps[k].revisit {
            r -= revisit_penalty;
        }
        steps[k].reward = r;
    }
    steps[n - 1].reward = 2.0 * improvement_reward(errors[0], errors[n - 1]);
}

/// Noisy signature draws with known identity, mirroring a calibration pass
/// over annotated initial frames. Deterministic per scene.
pub fn calibrate_models(scene: &Scene, noise: &NoiseModel, l: usize) -> Vec<AppearanceModel> {
    scene
        .persons()
        .iter()
        .map(|person| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(mix(scene.seed(), mix(0xca11b, person.person_id as u64)));
            let samples: Vec<Vec<f64>> = (0..l.max(1))
                .map(|_| {
                    person
                        .appearance_signature
                        .iter()
                        .map(|&v| {
                            let g: f64 = {
                                let u1: f64 = rng.random_range(f64::EPSILON..1.0);
                                let u2: f64 = rng.random_range(0.0..1.0);
                                (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
                            };
                            v + noise.sigma_feat * g
                        })
                        .collect()
                })
                .collect();
            build_appearance_model(&samples, person.person_id).expect("non-empty samples")
        })
        .collect()
}

/// Per-active-view working state: accumulated matched estimates and the
/// fused result so far.
struct PhaseAccum<'a> {
    scene: &'a Scene,
    t: usize,
    noise: &'a NoiseModel,
    draw_seed: u64,
    models: &'a [AppearanceModel],
    priors: &'a [Option<Pose3D>],
    cost_threshold: f64,
    e_miss: f64,
    estimates: Vec<Vec<Pose3D>>,
}

struct VisitOutcome {
    map: crate::scenesim::BaseFeatureMap,
    current_person0: Option<Pose3D>,
    matched: usize,
}

impl<'a> PhaseAccum<'a> {
    fn new(
        scene: &'a Scene,
        t: usize,
        noise: &'a NoiseModel,
        draw_seed: u64,
        models: &'a [AppearanceModel],
        priors: &'a [Option<Pose3D>],
        cost_threshold: f64,
        e_miss: f64,
    ) -> Self {
        PhaseAccum {
            scene,
            t,
            noise,
            draw_seed,
            models,
            priors,
            cost_threshold,
            e_miss,
            estimates: vec![Vec::new(); scene.persons().len()],
        }
    }

    /// Observe from a camera, match identities, accumulate estimates.
    fn visit(&mut self, cam: &CameraSpec) -> VisitOutcome {
        let (detections, map) = observe(self.scene, cam, self.t, self.noise, self.draw_seed);
        let assignment = match_detections(&detections, self.models, self.cost_threshold);
        let mut current_person0 = None;
        for &(d, person_id, _) in &assignment.pairs {
            self.estimates[person_id].push(detections[d].pose_estimate);
            if person_id == 0 {
                current_person0 = Some(detections[d].pose_estimate);
            }
        }
        VisitOutcome {
            map,
            current_person0,
            matched: assignment.pairs.len(),
        }
    }

    /// Fused estimate per person from the prior plus matched views so far.
    fn fused(&self) -> Vec<Option<Pose3D>> {
        self.estimates
            .iter()
            .enumerate()
            .map(|(p, ests)| {
                let prior = self.priors[p].as_ref();
                if prior.is_none() && ests.is_empty() {
                    None
                } else {
                    Some(fuse(prior, ests).expect("at least one vote"))
                }
            })
            .collect()
    }

    fn error_of(&self, fused: &[Option<Pose3D>], mode: Mode) -> f64 {
        match mode {
            Mode::Single => match &fused[0] {
                Some(pose) => reconstruction_error(pose, self.scene.persons()[0].pose_at(self.t)),
                None => self.e_miss,
            },
            Mode::Multi => multi_target_error(fused, self.scene, self.t, self.e_miss)
                .unwrap_or(self.e_miss),
        }
    }
}

fn update_history(history: &mut VecDeque<Pose3D>, fused: &[Option<Pose3D>]) {
    if let Some(pose) = &fused[0] {
        history.push_front(*pose);
        history.truncate(HISTORY_LEN);
    }
}

fn next_priors(fused: Vec<Option<Pose3D>>, reset: bool) -> Vec<Option<Pose3D>> {
    if reset {
        vec![None; fused.len()]
    } else {
        fused
    }
}

/// Run one episode under the learned policy. Deterministic given
/// (scene, params, config, precisions, episode seed, start camera).
pub fn run_policy_episode(
    scene: &Scene,
    params: &PolicyParams,
    noise: &NoiseModel,
    cfg: &RolloutConfig,
    ma: f64,
    me: f64,
    episode_seed: u64,
    start_camera: usize,
) -> Trajectory {
    run_policy_episode_seeded(
        scene,
        params,
        noise,
        cfg,
        ma,
        me,
        mix(episode_seed, 0xac7104),
        mix(episode_seed, 0x0b5e7e),
        start_camera,
    )
}

/// [`run_policy_episode`] with action sampling and observation noise
/// seeded separately. A training batch can then share `draw_seed` across
/// its episodes (common random numbers): with the same scene and start
/// camera, the episode returns differ only through the sampled actions.
#[allow(clippy::too_many_arguments)]
pub fn run_policy_episode_seeded(
    scene: &Scene,
    params: &PolicyParams,
    noise: &NoiseModel,
    cfg: &RolloutConfig,
    ma: f64,
    me: f64,
    action_seed: u64,
    draw_seed: u64,
    start_camera: usize,
) -> Trajectory {
    let rig = scene.rig();
    let kappa = rig.kappa();
    let models = calibrate_models(scene, noise, cfg.l_samples);
    let mut rng = ChaCha8Rng::seed_from_u64(action_seed);

    let mut priors: Vec<Option<Pose3D>> = vec![None; scene.persons().len()];
    let mut history: VecDeque<Pose3D> = VecDeque::new();
    let mut cam = *rig.camera(start_camera);
    let mut phases = Vec::with_capacity(scene.length());
    let mut total_views = 0;
    let mut total_actions = 0;

    let budget = cfg.fixed_views.unwrap_or(cfg.max_views).min(cfg.max_views).max(1);
    for t in 0..scene.length() {
        let mut accum = PhaseAccum::new(
            scene,
            t,
            noise,
            mix(draw_seed, t as u64),
            &models,
            &priors,
            cfg.cost_threshold,
            cfg.e_miss,
        );
        let mut canvas = AngleCanvas::with_bins(rig, cfg.canvas_w, cfg.canvas_h);
        let start_id = cam.id;
        let mut visited = vec![cam.id];
        canvas.record_visit(&cam);
        let mut steps: Vec<StepRecord> = Vec::new();
        let hist_vec: Vec<Pose3D> = history.iter().cloned().collect();

        loop {
            let outcome = accum.visit(&cam);
            let fused = accum.fused();
            let error = accum.error_of(&fused, cfg.mode);
            let state = featurize(
                &outcome.map,
                outcome.current_person0.as_ref(),
                fused[0].as_ref(),
                &hist_vec,
                &canvas,
                steps.len(),
                outcome.matched,
                rig.radius(),
                cfg.base_only,
            );
            let (mut action, log_density) = sample_action(params, &state, ma, me, kappa, &mut rng);
            total_actions += 1;
            let k = steps.len() + 1;
            if cfg.fixed_views.is_some() {
                action.continue_flag = k == budget;
            } else if k == budget {
                action.continue_flag = true;
            }
            let next_cam = nearest_camera(rig, &cam, action.delta_azimuth, action.delta_elevation);
            let revisit = !action.continue_flag && visited.contains(&next_cam.id);
            steps.push(StepRecord {
                state: cfg.store_states.then(|| state),
                action,
                log_density,
                reward: 0.0,
                error,
                revisit,
                camera_id: cam.id,
            });
            if action.continue_flag {
                cam = next_cam;
                break;
            }
            cam = next_cam;
            visited.push(cam.id);
            canvas.record_visit(&cam);
        }
        assign_rewards(&mut steps, cfg.revisit_penalty, cfg.tau);
        total_views += steps.len();
        let fused = accum.fused();
        let final_error = accum.error_of(&fused, cfg.mode);
        update_history(&mut history, &fused);
        priors = next_priors(fused, cfg.reset_prior);
        phases.push(ViewPhase {
            t,
            start_camera: start_id,
            steps,
            visited,
            final_error,
        });
    }
    Trajectory {
        phases,
        total_views,
        total_actions,
    }
}

/// Scripted comparison methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    /// k distinct uniformly random cameras.
    Random,
    /// k cameras spread evenly in azimuth at random elevations.
    MaxAzim,
    /// Greedy ground-truth error minimization over all cameras.
    Oracle,
}

fn nearest_unvisited(rig: &crate::dome::DomeRig, az: f64, el: f64, visited: &[usize]) -> CameraSpec {
    let target = crate::dome::dir_from_angles(az, el.clamp(-rig.kappa(), rig.kappa()));
    let mut best: Option<(f64, CameraSpec)> = None;
    for c in rig.cameras() {
        if visited.contains(&c.id) {
            continue;
        }
        let d = crate::dome::great_circle(c.unit_dir(), target);
        if best.map_or(true, |(bd, _)| d < bd) {
            best = Some((d, *c));
        }
    }
    best.map(|(_, c)| c).unwrap_or_else(|| *rig.camera(0))
}

/// Run one episode with a scripted camera selection rule at a fixed budget
/// of k views per active-view. No policy invocations are charged.
pub fn run_baseline_episode(
    scene: &Scene,
    noise: &NoiseModel,
    cfg: &RolloutConfig,
    baseline: Baseline,
    k: usize,
    episode_seed: u64,
    start_camera: usize,
) -> Trajectory {
    let rig = scene.rig();
    let k = k.clamp(1, rig.len());
    let models = calibrate_models(scene, noise, cfg.l_samples);
    let mut rng = ChaCha8Rng::seed_from_u64(mix(episode_seed, 0xba5e11));
    let draw_seed = mix(episode_seed, 0x0b5e7e);

    let mut priors: Vec<Option<Pose3D>> = vec![None; scene.persons().len()];
    let mut cam = *rig.camera(start_camera);
    let mut phases = Vec::with_capacity(scene.length());
    let mut total_views = 0;

    for t in 0..scene.length() {
        let mut accum = PhaseAccum::new(
            scene,
            t,
            noise,
            mix(draw_seed, t as u64),
            &models,
            &priors,
            cfg.cost_threshold,
            cfg.e_miss,
        );
        let start_id = cam.id;
        let mut visited = vec![cam.id];
        let mut steps: Vec<StepRecord> = Vec::new();
        let record = |accum: &mut PhaseAccum, steps: &mut Vec<StepRecord>, cam: &CameraSpec| {
            accum.visit(cam);
            let fused = accum.fused();
            let error = accum.error_of(&fused, cfg.mode);
            steps.push(StepRecord {
                state: None,
                action: PolicyAction {
                    delta_azimuth: 0.0,
                    delta_elevation: 0.0,
                    continue_flag: false,
                },
                log_density: 0.0,
                reward: 0.0,
                error,
                revisit: false,
                camera_id: cam.id,
            });
        };
        record(&mut accum, &mut steps, &cam);
        for i in 1..k {
            let next = match baseline {
                Baseline::Random => {
                    let open: Vec<&CameraSpec> = rig
                        .cameras()
                        .iter()
                        .filter(|c| !visited.contains(&c.id))
                        .collect();
                    *open[rng.random_range(0..open.len())]
                }
                Baseline::MaxAzim => {
                    let az = wrap_angle(
                        rig.camera(start_id).azimuth + 2.0 * PI * i as f64 / k as f64,
                    );
                    let el = rng.random_range(-rig.kappa()..rig.kappa());
                    nearest_unvisited(rig, az, el, &visited)
                }
                Baseline::Oracle => {
                    // Greedy: probe every unvisited camera and keep the one
                    // whose added view most reduces the true error.
                    let mut best: Option<(f64, CameraSpec)> = None;
                    for c in rig.cameras() {
                        if visited.contains(&c.id) {
                            continue;
                        }
                        let mut probe = PhaseAccum {
                            estimates: accum.estimates.clone(),
                            ..PhaseAccum::new(
                                scene,
                                t,
                                noise,
                                accum.draw_seed,
                                &models,
                                accum.priors,
                                cfg.cost_threshold,
                                cfg.e_miss,
                            )
                        };
                        probe.visit(c);
                        let fused = probe.fused();
                        let e = probe.error_of(&fused, cfg.mode);
                        if best.map_or(true, |(be, _)| e < be) {
                            best = Some((e, *c));
                        }
                    }
                    best.map(|(_, c)| c).unwrap_or(cam)
                }
            };
            cam = next;
            visited.push(cam.id);
            record(&mut accum, &mut steps, &cam);
        }
        if let Some(last) = steps.last_mut() {
            last.action.continue_flag = true;
        }
        assign_rewards(&mut steps, cfg.revisit_penalty, cfg.tau);
        total_views += steps.len();
        let fused = accum.fused();
        let final_error = accum.error_of(&fused, cfg.mode);
        priors = next_priors(fused, cfg.reset_prior);
        phases.push(ViewPhase {
            t,
            start_camera: start_id,
            steps,
            visited,
            final_error,
        });
    }
    Trajectory {
        phases,
        total_views,
        total_actions: 0,
    }
}
