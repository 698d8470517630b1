//! Appearance models and stable person matching: per-person median
//! appearance models, squared-distance costs, Hungarian assignment and the
//! cost threshold deciding absence.

use std::fmt::Write as _;

use thiserror::Error;

use crate::scenesim::Detection;

/// Default matching cost threshold above which a person counts as absent.
pub const DEFAULT_COST_THRESHOLD: f64 = 0.5;
/// Default number of instance-feature samples per appearance model.
pub const DEFAULT_L: usize = 10;

#[derive(Debug, Error)]
pub enum IdentityError {
    #[error("appearance model needs at least one sample")]
    EmptySamples,
    #[error("mixed feature dimensions: {0} vs {1}")]
    MixedDims(usize, usize),
}

/// Coordinate-wise median of L instance features for one person.
#[derive(Debug, Clone, PartialEq)]
pub struct AppearanceModel {
    pub person_id: usize,
    pub model_vector: Vec<f64>,
}

pub fn build_appearance_model(
    samples: &[Vec<f64>],
    person_id: usize,
) -> Result<AppearanceModel, IdentityError> {
    let first = samples.first().ok_or(IdentityError::EmptySamples)?;
    let dim = first.len();
    for s in samples {
        if s.len() != dim {
            return Err(IdentityError::MixedDims(dim, s.len()));
        }
    }
    let mut model_vector = Vec::with_capacity(dim);
    let mut buf = Vec::with_capacity(samples.len());
    for c in 0..dim {
        buf.clear();
        buf.extend(samples.iter().map(|s| s[c]));
        buf.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = buf.len();
        let m = if n % 2 == 1 {
            buf[n / 2]
        } else {
            0.5 * (buf[n / 2 - 1] + buf[n / 2])
        };
        model_vector.push(m);
    }
    Ok(AppearanceModel {
        person_id,
        model_vector,
    })
}

/// Squared Euclidean distance between an instance feature and a model.
pub fn matching_cost(feature: &[f64], model: &[f64]) -> f64 {
    debug_assert_eq!(feature.len(), model.len());
    feature
        .iter()
        .zip(model)
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

/// Minimum-cost one-to-one assignment of rows to columns.
///
/// Rectangular matrices are padded internally; the returned pairs cover the
/// smaller side. `cost[r][c]` must be finite.
pub fn hungarian_assign(cost: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let rows = cost.len();
    if rows == 0 {
        return Vec::new();
    }
    let cols = cost[0].len();
    if cols == 0 {
        return Vec::new();
    }
    // Potentials-based O(n^3) algorithm over an n x m matrix with n <= m.
    // If rows > cols, solve the transpose and flip pairs back.
    let transpose = rows > cols;
    let (n, m, at): (usize, usize, Box<dyn Fn(usize, usize) -> f64>) = if transpose {
        (cols, rows, Box::new(|i, j| cost[j][i]))
    } else {
        (rows, cols, Box::new(|i, j| cost[i][j]))
    };

    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut way = vec![0usize; m + 1];
    // p[j] = row assigned to column j (1-based rows, 0 = free)
    let mut p = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=m {
                if !used[j] {
                    let cur = at(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut pairs = Vec::with_capacity(n);
    for j in 1..=m {
        if p[j] != 0 {
            let (r, c) = (p[j] - 1, j - 1);
            pairs.push(if transpose { (c, r) } else { (r, c) });
        }
    }
    pairs.sort();
    pairs
}

/// Result of matching one view's detections against the appearance models.
#[derive(Debug, Clone)]
pub struct Assignment {
    /// (detection index, person id, cost), each cost <= threshold.
    pub pairs: Vec<(usize, usize, f64)>,
    pub unmatched_detections: Vec<usize>,
    pub absent_persons: Vec<usize>,
}

impl Assignment {
    pub fn detection_for(&self, person_id: usize) -> Option<usize> {
        self.pairs
            .iter()
            .find(|&&(_, p, _)| p == person_id)
            .map(|&(d, _, _)| d)
    }

    /// Fixed one-line-per-pair debug form.
    pub fn to_debug_text(&self) -> String {
        let mut s = String::new();
        for &(d, p, c) in &self.pairs {
            let _ = writeln!(s, "det {d} -> person {p} cost {c:.6}");
        }
        for &d in &self.unmatched_detections {
            let _ = writeln!(s, "det {d} -> unmatched");
        }
        for &p in &self.absent_persons {
            let _ = writeln!(s, "person {p} absent");
        }
        s
    }
}

/// Hungarian assignment of detections to appearance models; any optimal pair
/// costlier than the threshold is dissolved (person absent, detection
/// unmatched).
pub fn match_detections(
    detections: &[Detection],
    models: &[AppearanceModel],
    cost_threshold: f64,
) -> Assignment {
    let j = detections.len();
    let p = models.len();
    if j == 0 || p == 0 {
        return Assignment {
            pairs: Vec::new(),
            unmatched_detections: (0..j).collect(),
            absent_persons: models.iter().map(|m| m.person_id).collect(),
        };
    }
    let cost: Vec<Vec<f64>> = detections
        .iter()
        .map(|d| {
            models
                .iter()
                .map(|m| matching_cost(&d.instance_feature, &m.model_vector))
                .collect()
        })
        .collect();
    let raw = hungarian_assign(&cost);
    let mut pairs = Vec::new();
    let mut matched_dets = vec![false; j];
    let mut matched_persons = vec![false; p];
    for (d, mi) in raw {
        let c = cost[d][mi];
        if c <= cost_threshold {
            pairs.push((d, models[mi].person_id, c));
            matched_dets[d] = true;
            matched_persons[mi] = true;
        }
    }
    Assignment {
        pairs,
        unmatched_detections: (0..j).filter(|&d| !matched_dets[d]).collect(),
        absent_persons: (0..p)
            .filter(|&i| !matched_persons[i])
            .map(|i| models[i].person_id)
            .collect(),
    }
}
