//! Per-joint median fusion of pose estimates across views and time, and
//! reconstruction-error metrics.

use thiserror::Error;

use crate::scenesim::{Pose3D, Scene, JOINTS};

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("fuse needs at least one input pose")]
    EmptyInput,
    #[error("no person has an estimate")]
    NoEstimates,
}

/// Result of fusing one active-view (plus optional temporal prior).
#[derive(Debug, Clone)]
pub struct FusedEstimate {
    pub pose: Pose3D,
    pub contributing_views: Vec<usize>,
    pub used_temporal_prior: bool,
}

fn median_of(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Coordinate-wise median over the prior (one vote, when present) and the
/// per-view estimates. Even counts use the midpoint of the middle pair.
pub fn fuse(prior: Option<&Pose3D>, estimates: &[Pose3D]) -> Result<Pose3D, FusionError> {
    let mut inputs: Vec<&Pose3D> = Vec::with_capacity(estimates.len() + 1);
    if let Some(p) = prior {
        inputs.push(p);
    }
    inputs.extend(estimates.iter());
    if inputs.is_empty() {
        return Err(FusionError::EmptyInput);
    }
    let mut out = Pose3D::zero();
    let mut buf = Vec::with_capacity(inputs.len());
    for j in 0..JOINTS {
        for c in 0..3 {
            buf.clear();
            buf.extend(inputs.iter().map(|p| p.joints[j][c]));
            out.joints[j][c] = median_of(&mut buf);
        }
    }
    Ok(out)
}

/// Mean per-joint position error (MPJPE) in millimeters.
pub fn reconstruction_error(estimate: &Pose3D, ground_truth: &Pose3D) -> f64 {
    let mut sum = 0.0;
    for j in 0..JOINTS {
        let dx = estimate.joints[j][0] - ground_truth.joints[j][0];
        let dy = estimate.joints[j][1] - ground_truth.joints[j][1];
        let dz = estimate.joints[j][2] - ground_truth.joints[j][2];
        sum += (dx * dx + dy * dy + dz * dz).sqrt();
    }
    sum / JOINTS as f64
}

/// Default penalty error for a person never estimated so far (mm/joint).
pub const DEFAULT_E_MISS: f64 = 500.0;

/// Person-averaged error for the multi-target mode. `estimates[i]` is the
/// fused estimate for person `i`, or `None` if that person was never
/// estimated in the sequence so far (charged `e_miss`).
pub fn multi_target_error(
    estimates: &[Option<Pose3D>],
    scene: &Scene,
    t: usize,
    e_miss: f64,
) -> Result<f64, FusionError> {
    if estimates.iter().all(|e| e.is_none()) {
        return Err(FusionError::NoEstimates);
    }
    let mut sum = 0.0;
    for (i, est) in estimates.iter().enumerate() {
        sum += match est {
            Some(pose) => reconstruction_error(pose, scene.persons()[i].pose_at(t)),
            None => e_miss,
        };
    }
    Ok(sum / estimates.len() as f64)
}
