//! Experiment harness: the flat text configuration, the train/val/test
//! scene splits, checkpointed training runs, method comparison at matched
//! view budgets, fixed-budget curves, ablations and runtime accounting.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::dome::{build_dome_with_radius, AngleCanvas, DomeRig};
use crate::policy::{
    load_checkpoint, save_checkpoint, Checkpoint, NetConfig, PolicyParams, PrecisionSchedule,
};
use crate::rollout::{
    run_baseline_episode, run_policy_episode, Baseline, Mode, RolloutConfig, Trajectory,
};
use crate::scenesim::{generate_scene, mix, NoiseModel, Scene, SceneConfig};
use crate::trainer::{train, TrainConfig, TrainOutcome};

/// Modeled wall-clock cost of acquiring and parsing one camera view.
pub const SECONDS_PER_VIEW: f64 = 0.61;
/// Modeled wall-clock cost of one policy invocation.
pub const SECONDS_PER_ACTION: f64 = 0.01;

/// Affine runtime model: views are the expensive part, actions are cheap.
pub fn runtime_seconds(views: usize, actions: usize) -> f64 {
    views as f64 * SECONDS_PER_VIEW + actions as f64 * SECONDS_PER_ACTION
}

/// The oracle probes every camera once per active-view.
pub fn oracle_runtime_seconds(phases: usize, n_cameras: usize) -> f64 {
    runtime_seconds(phases * n_cameras, 0)
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("missing checkpoint: {0}")]
    MissingCheckpoint(PathBuf),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Run(String),
}

const CONFIG_HEADER: &str = "activepose-config-v1";

macro_rules! config_fields {
    ($(($name:ident, $ty:ty, $default:expr)),* $(,)?) => {
        /// Every experiment knob, one `key=value` line each in the config
        /// file. Unknown keys are rejected; omitted keys keep defaults.
        #[derive(Debug, Clone, PartialEq)]
        pub struct HarnessConfig {
            $(pub $name: $ty,)*
        }

        impl Default for HarnessConfig {
            fn default() -> Self {
                HarnessConfig { $($name: $default,)* }
            }
        }

        impl HarnessConfig {
            pub fn to_text(&self) -> String {
                let mut s = String::from(concat!("activepose-config-v1", "\n"));
                $(let _ = writeln!(s, "{}={}", stringify!($name), self.$name);)*
                s
            }

            pub fn from_text(text: &str) -> Result<Self, HarnessError> {
                let mut lines = text.lines();
                if lines.next().map(str::trim) != Some(CONFIG_HEADER) {
                    return Err(HarnessError::Config(format!(
                        "missing `{CONFIG_HEADER}` header"
                    )));
                }
                let mut cfg = HarnessConfig::default();
                for (ln, raw) in lines.enumerate() {
                    let line = raw.trim();
                    if line.is_empty() || line.starts_with('#') {
                        continue;
                    }
                    let (key, value) = line.split_once('=').ok_or_else(|| {
                        HarnessError::Config(format!("line {}: expected key=value", ln + 2))
                    })?;
                    match key.trim() {
                        $(stringify!($name) => {
                            cfg.$name = value.trim().parse::<$ty>().map_err(|e| {
                                HarnessError::Config(format!(
                                    "line {}: bad value for {}: {e}",
                                    ln + 2,
                                    key.trim()
                                ))
                            })?;
                        })*
                        other => {
                            return Err(HarnessError::Config(format!(
                                "line {}: unknown key `{other}`",
                                ln + 2
                            )))
                        }
                    }
                }
                cfg.validate()?;
                Ok(cfg)
            }
        }
    };
}

config_fields![
    // dome
    (cameras, usize, 30),
    (kappa, f64, 1.0),
    (radius_m, f64, 3.0),
    (dome_seed, u64, 7),
    // angle canvas
    (canvas_w, usize, 9),
    (canvas_h, usize, 5),
    // scenes and splits
    (seq_len, usize, 10),
    (occluders, usize, 2),
    (persons_single, usize, 1),
    (persons_multi_min, usize, 2),
    (persons_multi_max, usize, 3),
    (train_scenes, usize, 10),
    (val_scenes, usize, 4),
    (test_scenes, usize, 6),
    (scene_seed, u64, 1000),
    // estimator noise model
    (sigma0_mm, f64, 40.0),
    (a_occ, f64, 4.0),
    (a_view, f64, 1.5),
    (a_dist, f64, 0.5),
    (p_fail, f64, 0.05),
    (sigma_feat, f64, 0.05),
    (detect_threshold, f64, 0.3),
    // identity matching
    (cost_threshold, f64, 0.5),
    (l_samples, usize, 10),
    // fusion
    (e_miss, f64, 500.0),
    // rewards
    (tau, f64, 0.07),
    (revisit_penalty, f64, 2.5),
    // view budgets
    (max_views, usize, 8),
    (max_views_multi, usize, 10),
    // policy network
    (conv1_out, usize, 16),
    (conv2_out, usize, 8),
    (hidden1, usize, 64),
    (hidden2, usize, 32),
    // exploration precision annealing
    (m_a_start, f64, 1.0),
    (m_e_start, f64, 10.0),
    (m_a_end, f64, 25.0),
    (m_e_end, f64, 50.0),
    (anneal_fraction, f64, 1.0),
    // training
    (episodes, usize, 2000),
    (batch_size, usize, 5),
    (lr, f64, 1e-3),
    (adam_beta1, f64, 0.9),
    (adam_beta2, f64, 0.999),
    (adam_eps, f64, 1e-8),
    (val_interval, usize, 10),
    (val_episodes, usize, 12),
    // evaluation
    (eval_reps, usize, 2),
    (ablate_episodes, usize, 600),
];

impl HarnessConfig {
    fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: &str| Err(HarnessError::Config(msg.to_string()));
        if self.cameras == 0 {
            return bad("cameras must be positive");
        }
        if !(self.kappa > 0.0) {
            return bad("kappa must be positive");
        }
        if self.seq_len == 0 || self.episodes == 0 || self.batch_size == 0 {
            return bad("seq_len, episodes and batch_size must be positive");
        }
        if self.max_views == 0 || self.max_views_multi == 0 {
            return bad("view budgets must be positive");
        }
        if self.train_scenes == 0 || self.test_scenes == 0 {
            return bad("need at least one train and one test scene");
        }
        if self.canvas_w == 0 || self.canvas_h == 0 {
            return bad("canvas bins must be positive");
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    pub fn noise(&self) -> NoiseModel {
        NoiseModel {
            sigma0_mm: self.sigma0_mm,
            a_occ: self.a_occ,
            a_view: self.a_view,
            a_dist: self.a_dist,
            p_fail: self.p_fail,
            sigma_feat: self.sigma_feat,
            detect_threshold: self.detect_threshold,
        }
    }

    pub fn schedule(&self) -> PrecisionSchedule {
        PrecisionSchedule {
            ma_start: self.m_a_start,
            me_start: self.m_e_start,
            ma_end: self.m_a_end,
            me_end: self.m_e_end,
            anneal_fraction: self.anneal_fraction,
        }
    }

    pub fn rollout(&self, mode: Mode) -> RolloutConfig {
        RolloutConfig {
            mode,
            max_views: match mode {
                Mode::Single => self.max_views,
                Mode::Multi => self.max_views_multi,
            },
            fixed_views: None,
            tau: self.tau,
            revisit_penalty: self.revisit_penalty,
            e_miss: self.e_miss,
            base_only: false,
            reset_prior: false,
            l_samples: self.l_samples,
            cost_threshold: self.cost_threshold,
            store_states: true,
            canvas_w: self.canvas_w,
            canvas_h: self.canvas_h,
        }
    }

    pub fn net_config(&self) -> NetConfig {
        let canvas_dim = 2 * self.canvas_w * self.canvas_h;
        let mut net = NetConfig::desk_default(canvas_dim);
        net.conv1_out = self.conv1_out;
        net.conv2_out = self.conv2_out;
        net.hidden1 = self.hidden1;
        net.hidden2 = self.hidden2;
        net.extra_dim = crate::policy::AgentState::extra_dim(canvas_dim);
        net
    }
}

/// Materialized experiment: dome plus disjoint scene splits.
pub struct Setup {
    pub cfg: HarnessConfig,
    pub mode: Mode,
    pub rig: DomeRig,
    pub train: Vec<Scene>,
    pub val: Vec<Scene>,
    pub test: Vec<Scene>,
    pub noise: NoiseModel,
}

pub fn build_setup(cfg: &HarnessConfig, mode: Mode) -> Result<Setup, HarnessError> {
    cfg.validate()?;
    let rig = build_dome_with_radius(cfg.cameras, cfg.kappa, cfg.dome_seed, cfg.radius_m)
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let (pmin, pmax) = match mode {
        Mode::Single => (cfg.persons_single, cfg.persons_single),
        Mode::Multi => (cfg.persons_multi_min, cfg.persons_multi_max),
    };
    let scene_cfg = SceneConfig {
        persons_min: pmin,
        persons_max: pmax,
        length: cfg.seq_len,
        occluders: cfg.occluders,
        ..SceneConfig::default()
    };
    // Multi-target scenes draw from a shifted seed block so the two modes
    // never share scene content.
    let base = match mode {
        Mode::Single => cfg.scene_seed,
        Mode::Multi => cfg.scene_seed + 100_000,
    };
    let n = cfg.train_scenes + cfg.val_scenes + cfg.test_scenes;
    let mut seeds: Vec<u64> = (0..n as u64).map(|i| base + i).collect();
    seeds.dedup();
    if seeds.len() != n {
        return Err(HarnessError::Config("scene seed ranges overlap".into()));
    }
    let gen = |range: std::ops::Range<usize>| -> Result<Vec<Scene>, HarnessError> {
        range
            .map(|i| {
                generate_scene(&scene_cfg, &rig, base + i as u64)
                    .map_err(|e| HarnessError::Config(e.to_string()))
            })
            .collect()
    };
    let train = gen(0..cfg.train_scenes)?;
    let val = gen(cfg.train_scenes..cfg.train_scenes + cfg.val_scenes)?;
    let test = gen(cfg.train_scenes + cfg.val_scenes..n)?;
    Ok(Setup {
        cfg: cfg.clone(),
        mode,
        rig,
        train,
        val,
        test,
        noise: cfg.noise(),
    })
}

pub fn init_params(cfg: &HarnessConfig, seed: u64) -> PolicyParams {
    PolicyParams::init(cfg.net_config(), seed)
}

pub fn checkpoint_path(out_dir: &Path, seed: u64) -> PathBuf {
    out_dir.join(format!("policy_seed{seed}.ckpt"))
}

/// Train one seed end to end and write the best-on-validation checkpoint
/// plus the training log into `out_dir`.
pub fn train_run(setup: &Setup, seed: u64, out_dir: &Path) -> Result<TrainOutcome, HarnessError> {
    std::fs::create_dir_all(out_dir)?;
    let tcfg = TrainConfig {
        episodes: setup.cfg.episodes,
        batch_size: setup.cfg.batch_size,
        lr: setup.cfg.lr,
        lr_halvings: Vec::new(),
        adam_beta1: setup.cfg.adam_beta1,
        adam_beta2: setup.cfg.adam_beta2,
        adam_eps: setup.cfg.adam_eps,
        schedule: setup.cfg.schedule(),
        rollout: setup.cfg.rollout(setup.mode),
        noise: setup.noise.clone(),
        val_interval: setup.cfg.val_interval,
        val_episodes: setup.cfg.val_episodes,
        seed,
    };
    let init = init_params(&setup.cfg, seed);
    let outcome = train(&tcfg, init, &setup.train, &setup.val)
        .map_err(|e| HarnessError::Run(e.to_string()))?;
    save_checkpoint(
        &checkpoint_path(out_dir, seed),
        &Checkpoint {
            params: outcome.best_params.clone(),
            schedule_step: setup.cfg.episodes as u64,
            seed,
        },
    )?;
    std::fs::write(
        out_dir.join(format!("train_seed{seed}.csv")),
        outcome.log_csv(),
    )?;
    Ok(outcome)
}

pub fn load_params(out_dir: &Path, seed: u64) -> Result<PolicyParams, HarnessError> {
    let path = checkpoint_path(out_dir, seed);
    if !path.exists() {
        return Err(HarnessError::MissingCheckpoint(path));
    }
    Ok(load_checkpoint(&path)?.params)
}

/// One evaluated episode of one method.
#[derive(Debug, Clone)]
pub struct EpisodeResult {
    pub method: String,
    pub seed: u64,
    pub scene_seed: u64,
    pub episode: usize,
    pub error_mm: f64,
    pub views: usize,
    pub actions: usize,
    pub runtime_s: f64,
}

fn episode_result(
    method: &str,
    seed: u64,
    scene: &Scene,
    episode: usize,
    traj: &Trajectory,
    oracle: bool,
    n_cameras: usize,
) -> EpisodeResult {
    let runtime_s = if oracle {
        oracle_runtime_seconds(traj.phases.len(), n_cameras)
    } else {
        runtime_seconds(traj.total_views, traj.total_actions)
    };
    EpisodeResult {
        method: method.to_string(),
        seed,
        scene_seed: scene.seed(),
        episode,
        error_mm: traj.mean_error(),
        views: traj.total_views,
        actions: traj.total_actions,
        runtime_s,
    }
}

fn eval_starts(setup: &Setup, seed: u64) -> Vec<(usize, usize, u64)> {
    // (scene index, start camera, episode seed) — shared across methods so
    // every method sees the same initial view of the same episode.
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, 0xe5a1));
    let mut out = Vec::new();
    for rep in 0..setup.cfg.eval_reps.max(1) {
        for (si, _) in setup.test.iter().enumerate() {
            let start = rng.random_range(0..setup.rig.len());
            out.push((si, start, mix(seed, (rep * setup.test.len() + si) as u64)));
        }
    }
    out
}

/// Evaluate one trained policy on the test split.
pub fn eval_policy(
    setup: &Setup,
    params: &PolicyParams,
    seed: u64,
    fixed_views: Option<usize>,
) -> Vec<EpisodeResult> {
    let mut rc = setup.cfg.rollout(setup.mode);
    rc.fixed_views = fixed_views;
    rc.store_states = false;
    let (ma, me) = setup.cfg.schedule().at(1.0);
    let name = match fixed_views {
        None => "agent-auto".to_string(),
        Some(k) => format!("agent-fixed{k}"),
    };
    eval_starts(setup, seed)
        .into_iter()
        .enumerate()
        .map(|(ep, (si, start, ep_seed))| {
            let scene = &setup.test[si];
            let traj =
                run_policy_episode(scene, params, &setup.noise, &rc, ma, me, ep_seed, start);
            episode_result(&name, seed, scene, ep, &traj, false, setup.rig.len())
        })
        .collect()
}

/// Evaluate one scripted baseline at a fixed budget on the test split.
pub fn eval_baseline(
    setup: &Setup,
    baseline: Baseline,
    k: usize,
    seed: u64,
) -> Vec<EpisodeResult> {
    let mut rc = setup.cfg.rollout(setup.mode);
    rc.store_states = false;
    let name = match baseline {
        Baseline::Random => "random",
        Baseline::MaxAzim => "max-azim",
        Baseline::Oracle => "oracle",
    };
    eval_starts(setup, seed)
        .into_iter()
        .enumerate()
        .map(|(ep, (si, start, ep_seed))| {
            let scene = &setup.test[si];
            let traj = run_baseline_episode(scene, &setup.noise, &rc, baseline, k, ep_seed, start);
            episode_result(
                name,
                seed,
                scene,
                ep,
                &traj,
                baseline == Baseline::Oracle,
                setup.rig.len(),
            )
        })
        .collect()
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Mean and its 95% confidence half-width (1.96 standard errors).
pub fn mean_ci(values: &[f64]) -> (f64, f64) {
    let m = mean(values);
    if values.len() < 2 {
        return (m, 0.0);
    }
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64;
    let sem = (var / values.len() as f64).sqrt();
    (m, 1.96 * sem)
}

/// Budget matched to the agent: ceil of its mean views per active-view.
pub fn matched_budget(agent_rows: &[EpisodeResult], phases_per_episode: usize) -> usize {
    let views: usize = agent_rows.iter().map(|r| r.views).sum();
    let phases = agent_rows.len() * phases_per_episode;
    (views as f64 / phases as f64).ceil() as usize
}

#[derive(Debug)]
pub struct CompareOutput {
    pub rows: Vec<EpisodeResult>,
    pub matched_k: Vec<(u64, usize)>,
}

/// Run every method for each trained seed. The scripted methods and the
/// fixed-view agent all use the matched budget derived from that seed's
/// auto-stopping agent.
pub fn compare(setup: &Setup, trained: &[(u64, PolicyParams)]) -> CompareOutput {
    let mut rows = Vec::new();
    let mut matched_k = Vec::new();
    for (seed, params) in trained {
        let agent = eval_policy(setup, params, *seed, None);
        let k = matched_budget(&agent, setup.cfg.seq_len);
        matched_k.push((*seed, k));
        rows.extend(agent);
        rows.extend(eval_policy(setup, params, *seed, Some(k)));
        rows.extend(eval_baseline(setup, Baseline::Random, k, *seed));
        rows.extend(eval_baseline(setup, Baseline::MaxAzim, k, *seed));
        rows.extend(eval_baseline(setup, Baseline::Oracle, k, *seed));
    }
    CompareOutput { rows, matched_k }
}

pub fn results_csv(rows: &[EpisodeResult]) -> String {
    let mut s = String::from("method,seed,scene_seed,episode,error_mm,views,actions,runtime_s\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.method, r.seed, r.scene_seed, r.episode, r.error_mm, r.views, r.actions, r.runtime_s
        );
    }
    s
}

/// Seed-level mean per method, with the across-seed confidence interval.
pub fn summarize(rows: &[EpisodeResult]) -> Vec<(String, f64, f64, f64, f64)> {
    let mut methods: Vec<String> = rows.iter().map(|r| r.method.clone()).collect();
    methods.sort();
    methods.dedup();
    methods
        .into_iter()
        .map(|m| {
            let mrows: Vec<&EpisodeResult> = rows.iter().filter(|r| r.method == m).collect();
            let mut seeds: Vec<u64> = mrows.iter().map(|r| r.seed).collect();
            seeds.sort_unstable();
            seeds.dedup();
            let per_seed: Vec<f64> = seeds
                .iter()
                .map(|&s| {
                    mean(
                        &mrows
                            .iter()
                            .filter(|r| r.seed == s)
                            .map(|r| r.error_mm)
                            .collect::<Vec<f64>>(),
                    )
                })
                .collect();
            let (err, ci) = mean_ci(&per_seed);
            let views = mean(&mrows.iter().map(|r| r.views as f64).collect::<Vec<f64>>());
            let runtime = mean(&mrows.iter().map(|r| r.runtime_s).collect::<Vec<f64>>());
            (m, err, ci, views, runtime)
        })
        .collect()
}

pub fn table_text(rows: &[EpisodeResult]) -> String {
    let mut s = String::from("activepose-table-v1\n");
    let _ = writeln!(s, "{:<14} {:>10} {:>8} {:>7} {:>10}", "method", "error_mm", "ci95", "views", "runtime_s");
    for (m, err, ci, views, runtime) in summarize(rows) {
        let _ = writeln!(s, "{m:<14} {err:>10.2} {ci:>8.2} {views:>7.2} {runtime:>10.2}");
    }
    s
}

/// Error-versus-budget sweep: each method at every fixed view count,
/// grouped by budget.
pub fn curve(setup: &Setup, params: &PolicyParams, seed: u64) -> Vec<(usize, Vec<EpisodeResult>)> {
    let max_k = match setup.mode {
        Mode::Single => setup.cfg.max_views,
        Mode::Multi => setup.cfg.max_views_multi,
    };
    (1..=max_k)
        .map(|k| {
            let mut rows = eval_policy(setup, params, seed, Some(k));
            rows.extend(eval_baseline(setup, Baseline::Random, k, seed));
            rows.extend(eval_baseline(setup, Baseline::MaxAzim, k, seed));
            rows.extend(eval_baseline(setup, Baseline::Oracle, k, seed));
            (k, rows)
        })
        .collect()
}

pub fn curve_csv(groups: &[(usize, Vec<EpisodeResult>)]) -> String {
    let mut s = String::from("model,k,error_mm,runtime_s\n");
    for (k, rows) in groups {
        let mut models: Vec<String> = rows
            .iter()
            .map(|r| {
                if r.method.starts_with("agent-fixed") {
                    "agent".to_string()
                } else {
                    r.method.clone()
                }
            })
            .collect();
        models.sort();
        models.dedup();
        for model in models {
            let sel: Vec<&EpisodeResult> = rows
                .iter()
                .filter(|r| {
                    if model == "agent" {
                        r.method.starts_with("agent-fixed")
                    } else {
                        r.method == model
                    }
                })
                .collect();
            let err = mean(&sel.iter().map(|r| r.error_mm).collect::<Vec<f64>>());
            let rt = mean(&sel.iter().map(|r| r.runtime_s).collect::<Vec<f64>>());
            let _ = writeln!(s, "{model},{k},{err},{rt}");
        }
    }
    s
}

/// Ablation variants trained and evaluated under identical budgets.
pub fn ablate(setup: &Setup, seed: u64, out_dir: &Path) -> Result<Vec<EpisodeResult>, HarnessError> {
    std::fs::create_dir_all(out_dir)?;
    let variants: [(&str, bool, bool); 3] = [
        ("full", false, false),
        ("map-only", true, false),
        ("no-prior", false, true),
    ];
    let mut rows = Vec::new();
    for (name, base_only, reset_prior) in variants {
        let mut rollout = setup.cfg.rollout(setup.mode);
        rollout.base_only = base_only;
        rollout.reset_prior = reset_prior;
        let tcfg = TrainConfig {
            episodes: setup.cfg.ablate_episodes,
            batch_size: setup.cfg.batch_size,
            lr: setup.cfg.lr,
            lr_halvings: Vec::new(),
            adam_beta1: setup.cfg.adam_beta1,
            adam_beta2: setup.cfg.adam_beta2,
            adam_eps: setup.cfg.adam_eps,
            schedule: setup.cfg.schedule(),
            rollout: rollout.clone(),
            noise: setup.noise.clone(),
            val_interval: setup.cfg.val_interval,
            val_episodes: setup.cfg.val_episodes,
            seed,
        };
        let outcome = train(&tcfg, init_params(&setup.cfg, seed), &setup.train, &setup.val)
            .map_err(|e| HarnessError::Run(e.to_string()))?;
        let mut rc = rollout;
        rc.store_states = false;
        let (ma, me) = setup.cfg.schedule().at(1.0);
        for (ep, (si, start, ep_seed)) in eval_starts(setup, seed).into_iter().enumerate() {
            let scene = &setup.test[si];
            let traj = run_policy_episode(
                scene,
                &outcome.best_params,
                &setup.noise,
                &rc,
                ma,
                me,
                ep_seed,
                start,
            );
            rows.push(episode_result(name, seed, scene, ep, &traj, false, setup.rig.len()));
        }
    }
    Ok(rows)
}

/// Sanity report of a configuration: the derived experiment dimensions.
pub fn audit_text(cfg: &HarnessConfig) -> Result<String, HarnessError> {
    cfg.validate()?;
    let net = cfg.net_config();
    let canvas_dim = 2 * cfg.canvas_w * cfg.canvas_h;
    let layout = crate::policy::Layout::new(&net);
    let mut s = String::from("activepose-audit-v1\n");
    let _ = writeln!(s, "cameras={} kappa={} radius_m={}", cfg.cameras, cfg.kappa, cfg.radius_m);
    let _ = writeln!(
        s,
        "scenes train={} val={} test={} (seed base {})",
        cfg.train_scenes, cfg.val_scenes, cfg.test_scenes, cfg.scene_seed
    );
    let _ = writeln!(s, "canvas={}x{} ({} features)", cfg.canvas_w, cfg.canvas_h, canvas_dim);
    let _ = writeln!(s, "policy parameters={}", layout.total);
    let _ = writeln!(
        s,
        "precisions ({}, {}) -> ({}, {})",
        cfg.m_a_start, cfg.m_e_start, cfg.m_a_end, cfg.m_e_end
    );
    let _ = writeln!(
        s,
        "training episodes={} batch={} lr={}",
        cfg.episodes, cfg.batch_size, cfg.lr
    );
    Ok(s)
}

/// The canvas used by evaluation tooling for the configured rig shape.
pub fn make_canvas(cfg: &HarnessConfig, rig: &DomeRig) -> AngleCanvas {
    AngleCanvas::with_bins(rig, cfg.canvas_w, cfg.canvas_h)
}
