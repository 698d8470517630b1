//! Camera-rig geometry: spherical camera placement, relative-angle viewpoint
//! resolution and the discretized angle canvas of visited rig regions.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Default dome radius in meters.
pub const DEFAULT_RADIUS_M: f64 = 3.0;
/// Default elevation half-range in radians.
pub const DEFAULT_KAPPA: f64 = 1.0;
/// Azimuth bins of the angle canvas.
pub const CANVAS_W: usize = 9;
/// Elevation bins of the angle canvas.
pub const CANVAS_H: usize = 5;

const JITTER_RAD: f64 = 3.0 * PI / 180.0;

#[derive(Debug, Error)]
pub enum DomeError {
    #[error("need at least 2 cameras, got {0}")]
    TooFewCameras(usize),
    #[error("kappa must lie in (0, pi/2), got {0}")]
    BadKappa(f64),
    #[error("malformed rig text: {0}")]
    Parse(String),
}

/// Wrap an angle into [-pi, pi).
pub fn wrap_angle(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}

/// One physical camera on the dome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraSpec {
    pub id: usize,
    pub azimuth: f64,
    pub elevation: f64,
    pub radius: f64,
}

impl CameraSpec {
    /// Unit direction from the dome center toward the camera.
    pub fn unit_dir(&self) -> [f64; 3] {
        dir_from_angles(self.azimuth, self.elevation)
    }

    /// Camera position in scene millimeters (dome center at the origin).
    pub fn position_mm(&self) -> [f64; 3] {
        let d = self.unit_dir();
        let r = self.radius * 1000.0;
        [d[0] * r, d[1] * r, d[2] * r]
    }
}

pub fn dir_from_angles(azimuth: f64, elevation: f64) -> [f64; 3] {
    let (se, ce) = elevation.sin_cos();
    let (sa, ca) = azimuth.sin_cos();
    [ce * ca, ce * sa, se]
}

/// Fixed set of cameras on a partial sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct DomeRig {
    cameras: Vec<CameraSpec>,
    kappa: f64,
}

impl DomeRig {
    pub fn cameras(&self) -> &[CameraSpec] {
        &self.cameras
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn len(&self) -> usize {
        self.cameras.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cameras.is_empty()
    }

    pub fn camera(&self, id: usize) -> &CameraSpec {
        &self.cameras[id]
    }

    pub fn radius(&self) -> f64 {
        self.cameras[0].radius
    }

    /// Line-oriented text form: `kappa=<v> n=<N>` header then one
    /// `id azimuth elevation radius` line per camera.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "kappa={} n={}", self.kappa, self.cameras.len());
        for c in &self.cameras {
            let _ = writeln!(s, "{} {} {} {}", c.id, c.azimuth, c.elevation, c.radius);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, DomeError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| DomeError::Parse("empty input".into()))?;
        let mut kappa = None;
        let mut n = None;
        for tok in header.split_whitespace() {
            if let Some(v) = tok.strip_prefix("kappa=") {
                kappa = v.parse::<f64>().ok();
            } else if let Some(v) = tok.strip_prefix("n=") {
                n = v.parse::<usize>().ok();
            }
        }
        let kappa = kappa.ok_or_else(|| DomeError::Parse("missing kappa".into()))?;
        let n = n.ok_or_else(|| DomeError::Parse("missing n".into()))?;
        let mut cameras = Vec::with_capacity(n);
        for line in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 {
                return Err(DomeError::Parse(format!("bad camera line: {line}")));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| DomeError::Parse(format!("bad number: {s}")))
            };
            cameras.push(CameraSpec {
                id: f[0]
                    .parse()
                    .map_err(|_| DomeError::Parse(format!("bad id: {}", f[0])))?,
                azimuth: parse(f[1])?,
                elevation: parse(f[2])?,
                radius: parse(f[3])?,
            });
        }
        if cameras.len() != n {
            return Err(DomeError::Parse(format!(
                "header says {n} cameras, found {}",
                cameras.len()
            )));
        }
        Ok(DomeRig { cameras, kappa })
    }
}

/// Quasi-uniform spiral placement over the partial sphere |elev| <= kappa,
/// with seeded jitter of up to 3 degrees per angle.
pub fn build_dome(n_cameras: usize, kappa: f64, seed: u64) -> Result<DomeRig, DomeError> {
    build_dome_with_radius(n_cameras, kappa, seed, DEFAULT_RADIUS_M)
}

pub fn build_dome_with_radius(
    n_cameras: usize,
    kappa: f64,
    seed: u64,
    radius: f64,
) -> Result<DomeRig, DomeError> {
    if n_cameras < 2 {
        return Err(DomeError::TooFewCameras(n_cameras));
    }
    if !(kappa > 0.0 && kappa < PI / 2.0) {
        return Err(DomeError::BadKappa(kappa));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5d0e_c0de_d00e_0001);
    let golden = PI * (3.0 - 5.0_f64.sqrt());
    let sk = kappa.sin();
    let n = n_cameras as f64;
    let cameras = (0..n_cameras)
        .map(|i| {
            // Even spacing in sin(elevation) gives quasi-uniform area coverage.
            let frac = (i as f64 + 0.5) / n;
            let elev = (sk * (2.0 * frac - 1.0)).asin();
            let az = wrap_angle(i as f64 * golden);
            let jit_a: f64 = rng.random_range(-JITTER_RAD..=JITTER_RAD);
            let jit_e: f64 = rng.random_range(-JITTER_RAD..=JITTER_RAD);
            CameraSpec {
                id: i,
                azimuth: wrap_angle(az + jit_a),
                elevation: (elev + jit_e).clamp(-kappa, kappa),
                radius,
            }
        })
        .collect();
    Ok(DomeRig { cameras, kappa })
}

/// Great-circle distance between two unit directions.
pub fn great_circle(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    dot.clamp(-1.0, 1.0).acos()
}

/// Resolve a relative viewpoint action to the closest physical camera.
///
/// The azimuth delta wraps; the elevation target is clamped into the rig's
/// [-kappa, kappa] range. Ties break toward the lowest camera id.
pub fn nearest_camera(
    rig: &DomeRig,
    current: &CameraSpec,
    delta_azimuth: f64,
    delta_elevation: f64,
) -> CameraSpec {
    let target_az = wrap_angle(current.azimuth + delta_azimuth);
    let target_el = (current.elevation + delta_elevation).clamp(-rig.kappa, rig.kappa);
    let target = dir_from_angles(target_az, target_el);
    let mut best = rig.cameras[0];
    let mut best_d = f64::INFINITY;
    for c in &rig.cameras {
        let d = great_circle(c.unit_dir(), target);
        if d < best_d {
            best_d = d;
            best = *c;
        }
    }
    best
}

/// Discretized record of visited rig regions (channel 0) plus the fixed
/// camera-density encoding of the rig (channel 1).
#[derive(Debug, Clone, PartialEq)]
pub struct AngleCanvas {
    pub w: usize,
    pub h: usize,
    kappa: f64,
    visits: Vec<u32>,
    density: Vec<u32>,
}

impl AngleCanvas {
    pub fn new(rig: &DomeRig) -> Self {
        Self::with_bins(rig, CANVAS_W, CANVAS_H)
    }

    pub fn with_bins(rig: &DomeRig, w: usize, h: usize) -> Self {
        let mut density = vec![0u32; w * h];
        for c in rig.cameras() {
            let (i, j) = bin_of(c.azimuth, c.elevation, rig.kappa(), w, h);
            density[j * w + i] += 1;
        }
        AngleCanvas {
            w,
            h,
            kappa: rig.kappa(),
            visits: vec![0; w * h],
            density,
        }
    }

    pub fn visits(&self) -> &[u32] {
        &self.visits
    }

    pub fn density(&self) -> &[u32] {
        &self.density
    }

    pub fn total_visits(&self) -> u64 {
        self.visits.iter().map(|&v| v as u64).sum()
    }

    /// Increment the visit count of the bin containing the camera.
    pub fn record_visit(&mut self, visited: &CameraSpec) {
        let (i, j) = bin_of(visited.azimuth, visited.elevation, self.kappa, self.w, self.h);
        self.visits[j * self.w + i] += 1;
    }

    /// Both channels flattened (visits then density), for state featurization.
    pub fn flat(&self) -> Vec<f64> {
        self.visits
            .iter()
            .map(|&v| v as f64)
            .chain(self.density.iter().map(|&v| v as f64))
            .collect()
    }
}

/// (azimuth bin, elevation bin) of an angle pair; azimuth wraps at +/-pi.
pub fn bin_of(azimuth: f64, elevation: f64, kappa: f64, w: usize, h: usize) -> (usize, usize) {
    let az = wrap_angle(azimuth);
    let i = (((az + PI) / (2.0 * PI)) * w as f64) as usize;
    let i = i.min(w - 1);
    let e = ((elevation + kappa) / (2.0 * kappa) * h as f64) as usize;
    let j = e.min(h - 1);
    (i, j)
}

pub fn update_canvas(canvas: &mut AngleCanvas, visited: &CameraSpec) {
    canvas.record_visit(visited);
}
