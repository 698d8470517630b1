//! Desk-scale laboratory for reinforcement-learning based active viewpoint
//! selection: a simulated camera dome around synthetic multi-person 3d
//! scenes, a parametric monocular pose estimator, and a trainable agent
//! (von Mises viewpoint policy, learned stop action, median pose fusion,
//! REINFORCE training) evaluated against Random, Max-Azim and Oracle
//! baselines.

pub mod dome;
pub mod fusion;
pub mod harness;
pub mod identity;
pub mod policy;
pub mod rollout;
pub mod scenesim;
pub mod trainer;

pub use dome::{AngleCanvas, CameraSpec, DomeRig};
pub use fusion::FusedEstimate;
pub use identity::{AppearanceModel, Assignment};
pub use policy::{AgentState, PolicyAction, PolicyParams, PrecisionSchedule};

pub use rollout::{Baseline, Mode, RolloutConfig, StepRecord, Trajectory};
pub use scenesim::{BaseFeatureMap, Detection, Pose3D, Scene, ScenePerson};
