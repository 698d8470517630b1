//! Python bindings for the activepose laboratory: dome geometry, scene
//! simulation, identity matching, fusion, rewards and policy rollouts.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use activepose::dome::{build_dome_with_radius, nearest_camera, DomeRig};
use activepose::fusion::{fuse, reconstruction_error};
use activepose::harness::{runtime_seconds, HarnessConfig};
use activepose::identity::hungarian_assign;
use activepose::policy::PolicyParams;
use activepose::rollout::{
    continue_reward, improvement_reward, run_baseline_episode, run_policy_episode, Baseline, Mode,
    RolloutConfig,
};
use activepose::scenesim::{generate_scene, observe, NoiseModel, Pose3D, SceneConfig, JOINTS};
use activepose::Scene;

type PyPose = Vec<Vec<f64>>;

fn pose_from_py(p: &PyPose) -> PyResult<Pose3D> {
    if p.len() != JOINTS || p.iter().any(|j| j.len() != 3) {
        return Err(PyValueError::new_err(format!(
            "pose must be {JOINTS}x3 nested lists"
        )));
    }
    let mut pose = Pose3D::zero();
    for (j, joint) in p.iter().enumerate() {
        for c in 0..3 {
            pose.joints[j][c] = joint[c];
        }
    }
    Ok(pose)
}

fn pose_to_py(p: &Pose3D) -> PyPose {
    p.joints.iter().map(|j| j.to_vec()).collect()
}

/// Camera dome rig.
#[pyclass(name = "Dome")]
struct PyDome {
    rig: DomeRig,
}

#[pymethods]
impl PyDome {
    #[new]
    #[pyo3(signature = (cameras=30, kappa=1.0, seed=7, radius_m=3.0))]
    fn new(cameras: usize, kappa: f64, seed: u64, radius_m: f64) -> PyResult<Self> {
        let rig = build_dome_with_radius(cameras, kappa, seed, radius_m)
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(PyDome { rig })
    }

    fn __len__(&self) -> usize {
        self.rig.len()
    }

    /// (azimuth, elevation) of one camera, radians.
    fn camera_angles(&self, id: usize) -> PyResult<(f64, f64)> {
        if id >= self.rig.len() {
            return Err(PyValueError::new_err(format!("no camera {id}")));
        }
        let c = self.rig.camera(id);
        Ok((c.azimuth, c.elevation))
    }

    /// Camera reached from `current` by a relative angle action.
    fn nearest_camera(&self, current: usize, delta_azimuth: f64, delta_elevation: f64) -> PyResult<usize> {
        if current >= self.rig.len() {
            return Err(PyValueError::new_err(format!("no camera {current}")));
        }
        Ok(nearest_camera(&self.rig, self.rig.camera(current), delta_azimuth, delta_elevation).id)
    }
}

/// Synthetic multi-person scene over a dome.
#[pyclass(name = "Scene")]
struct PyScene {
    scene: Scene,
}

#[pymethods]
impl PyScene {
    #[new]
    #[pyo3(signature = (dome, seed, persons=1, length=10, occluders=2))]
    fn new(dome: &PyDome, seed: u64, persons: usize, length: usize, occluders: usize) -> PyResult<Self> {
        let cfg = SceneConfig {
            persons_min: persons,
            persons_max: persons,
            length,
            occluders,
            ..SceneConfig::default()
        };
        let scene = generate_scene(&cfg, &dome.rig, seed)
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(PyScene { scene })
    }

    #[getter]
    fn persons(&self) -> usize {
        self.scene.persons().len()
    }

    #[getter]
    fn length(&self) -> usize {
        self.scene.length()
    }

    /// Ground-truth pose of one person at one time, 15x3 mm.
    fn ground_truth(&self, person: usize, t: usize) -> PyResult<PyPose> {
        if person >= self.scene.persons().len() || t >= self.scene.length() {
            return Err(PyValueError::new_err("person or time out of range"));
        }
        Ok(pose_to_py(self.scene.persons()[person].pose_at(t)))
    }

    /// Noisy detections from one camera: list of (pose, visibility).
    #[pyo3(signature = (camera, t, draw_seed=0, sigma0_mm=40.0))]
    fn observe(&self, camera: usize, t: usize, draw_seed: u64, sigma0_mm: f64) -> PyResult<Vec<(PyPose, f64)>> {
        if camera >= self.scene.rig().len() || t >= self.scene.length() {
            return Err(PyValueError::new_err("camera or time out of range"));
        }
        let noise = NoiseModel {
            sigma0_mm,
            ..NoiseModel::default()
        };
        let (detections, _) = observe(&self.scene, self.scene.rig().camera(camera), t, &noise, draw_seed);
        Ok(detections
            .iter()
            .map(|d| (pose_to_py(&d.pose_estimate), d.visibility_fraction))
            .collect())
    }
}

/// Policy network parameters plus episode rollout.
#[pyclass(name = "Policy")]
struct PyPolicy {
    params: PolicyParams,
}

#[pymethods]
impl PyPolicy {
    #[new]
    #[pyo3(signature = (seed=0))]
    fn new(seed: u64) -> Self {
        let cfg = HarnessConfig::default();
        PyPolicy {
            params: PolicyParams::init(cfg.net_config(), seed),
        }
    }

    #[getter]
    fn n_parameters(&self) -> usize {
        self.params.data.len()
    }

    /// Run one episode; returns (mean error mm, total views, runtime s).
    #[pyo3(signature = (scene, episode_seed=0, start_camera=0))]
    fn run_episode(&self, scene: &PyScene, episode_seed: u64, start_camera: usize) -> PyResult<(f64, usize, f64)> {
        if start_camera >= scene.scene.rig().len() {
            return Err(PyValueError::new_err("start camera out of range"));
        }
        let rc = RolloutConfig {
            store_states: false,
            ..RolloutConfig::default()
        };
        let traj = run_policy_episode(
            &scene.scene,
            &self.params,
            &NoiseModel::default(),
            &rc,
            25.0,
            50.0,
            episode_seed,
            start_camera,
        );
        Ok((
            traj.mean_error(),
            traj.total_views,
            runtime_seconds(traj.total_views, traj.total_actions),
        ))
    }
}

/// Per-joint coordinate-wise median fusion of pose estimates.
#[pyfunction]
#[pyo3(signature = (estimates, prior=None))]
fn fuse_poses(estimates: Vec<PyPose>, prior: Option<PyPose>) -> PyResult<PyPose> {
    let prior = prior.as_ref().map(pose_from_py).transpose()?;
    let estimates: Result<Vec<Pose3D>, _> = estimates.iter().map(pose_from_py).collect();
    let fused = fuse(prior.as_ref(), &estimates?)
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(pose_to_py(&fused))
}

/// Mean per-joint position error between two poses, mm.
#[pyfunction]
fn mpjpe(a: PyPose, b: PyPose) -> PyResult<f64> {
    Ok(reconstruction_error(&pose_from_py(&a)?, &pose_from_py(&b)?))
}

/// Minimum-cost assignment; returns (row, col) pairs covering the smaller
/// side of the matrix.
#[pyfunction]
fn hungarian(cost: Vec<Vec<f64>>) -> PyResult<Vec<(usize, usize)>> {
    if cost.is_empty() || cost[0].is_empty() {
        return Err(PyValueError::new_err("cost matrix must be non-empty"));
    }
    let w = cost[0].len();
    if cost.iter().any(|r| r.len() != w) {
        return Err(PyValueError::new_err("cost matrix must be rectangular"));
    }
    Ok(hungarian_assign(&cost))
}

#[pyfunction]
#[pyo3(name = "improvement_reward")]
fn improvement_reward_py(eps_first: f64, eps_final: f64) -> f64 {
    improvement_reward(eps_first, eps_final)
}

#[pyfunction]
#[pyo3(name = "continue_reward")]
fn continue_reward_py(eps_now: f64, min_future: f64, tau: f64) -> f64 {
    continue_reward(eps_now, min_future, tau)
}

#[pyfunction]
#[pyo3(name = "runtime_seconds")]
fn runtime_seconds_py(views: usize, actions: usize) -> f64 {
    runtime_seconds(views, actions)
}

/// Mean error of a scripted baseline episode at a fixed view budget.
#[pyfunction]
#[pyo3(signature = (scene, method, k, episode_seed=0, start_camera=0))]
fn baseline_episode(
    scene: &PyScene,
    method: &str,
    k: usize,
    episode_seed: u64,
    start_camera: usize,
) -> PyResult<f64> {
    let baseline = match method {
        "random" => Baseline::Random,
        "max-azim" => Baseline::MaxAzim,
        "oracle" => Baseline::Oracle,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown method `{other}` (random, max-azim, oracle)"
            )))
        }
    };
    let rc = RolloutConfig {
        mode: if scene.scene.persons().len() > 1 {
            Mode::Multi
        } else {
            Mode::Single
        },
        store_states: false,
        ..RolloutConfig::default()
    };
    let traj = run_baseline_episode(
        &scene.scene,
        &NoiseModel::default(),
        &rc,
        baseline,
        k,
        episode_seed,
        start_camera,
    );
    Ok(traj.mean_error())
}

/// The default experiment configuration in its text form.
#[pyfunction]
fn default_config() -> String {
    HarnessConfig::default().to_text()
}

#[pymodule]
fn activepose_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDome>()?;
    m.add_class::<PyScene>()?;
    m.add_class::<PyPolicy>()?;
    m.add_function(wrap_pyfunction!(fuse_poses, m)?)?;
    m.add_function(wrap_pyfunction!(mpjpe, m)?)?;
    m.add_function(wrap_pyfunction!(hungarian, m)?)?;
    m.add_function(wrap_pyfunction!(improvement_reward_py, m)?)?;
    m.add_function(wrap_pyfunction!(continue_reward_py, m)?)?;
    m.add_function(wrap_pyfunction!(runtime_seconds_py, m)?)?;
    m.add_function(wrap_pyfunction!(baseline_episode, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    Ok(())
}
