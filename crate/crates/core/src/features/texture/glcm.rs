//! Symmetric gray-level co-occurrence matrices and Haralick statistics.

use crate::error::{Error, Result};
use crate::features::{FeatureGroup, Quality};
use crate::imaging::QuantizedPatch;

/// (angle in degrees, unit step) in image coordinates, rows growing downwards.
pub const DIRECTIONS: [(u32, (i32, i32)); 4] = [(0, (1, 0)), (45, (1, -1)), (90, (0, -1)), (135, (-1, -1))];
pub const DISTANCES: [i32; 2] = [1, 2];

pub const HARALICK_NAMES: [&str; 13] = [
    "Energy",
    "Contrast",
    "Correlation",
    "SumSquares",
    "IDM",
    "SumAverage",
    "SumVariance",
    "SumEntropy",
    "Entropy",
    "DiffVariance",
    "DiffEntropy",
    "IMC1",
    "IMC2",
];

/// Normalised symmetric co-occurrence matrix, row-major `levels × levels`.
#[derive(Clone, Debug, PartialEq)]
pub struct Glcm {
    levels: usize,
    p: Vec<f64>,
}

impl Glcm {
    pub fn uniform(levels: usize) -> Self {
        let v = 1.0 / (levels * levels) as f64;
        Self {
            levels,
            p: vec![v; levels * levels],
        }
    }

    /// Normalises a nonnegative count matrix. Symmetry is the caller's concern.
    pub fn from_counts(levels: usize, counts: &[f64]) -> Result<Self> {
        if counts.len() != levels * levels {
            return Err(Error::DimensionMismatch {
                expected: levels * levels,
                actual: counts.len(),
            });
        }
        let total: f64 = counts.iter().sum();
        if !(total > 0.0) || counts.iter().any(|&c| c < 0.0) {
            return Err(Error::InvalidArgument(
                "counts must be nonnegative with a positive sum".into(),
            ));
        }
        Ok(Self {
            levels,
            p: counts.iter().map(|c| c / total).collect(),
        })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.levels + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }

    /// The 13 statistics in [`HARALICK_NAMES`] order (natural log, 0·ln 0 = 0).
    pub fn haralick(&self) -> [f64; 13] {
        let g = self.levels;
        let xlogx = |v: f64| if v > 0.0 { v * v.ln() } else { 0.0 };

        let mut px = vec![0.0; g];
        let mut py = vec![0.0; g];
        let mut p_sum = vec![0.0; 2 * g - 1];
        let mut p_diff = vec![0.0; g];
        let (mut energy, mut contrast, mut idm, mut entropy) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..g {
            for j in 0..g {
                let p = self.get(i, j);
                if p == 0.0 {
                    continue;
                }
                px[i] += p;
                py[j] += p;
                p_sum[i + j] += p;
                p_diff[i.abs_diff(j)] += p;
                let d = i as f64 - j as f64;
                energy += p * p;
                contrast += d * d * p;
                idm += p / (1.0 + d * d);
                entropy -= xlogx(p);
            }
        }
        let mu_x: f64 = px.iter().enumerate().map(|(i, p)| i as f64 * p).sum();
        let mu_y: f64 = py.iter().enumerate().map(|(j, p)| j as f64 * p).sum();
        let var_x: f64 = px.iter().enumerate().map(|(i, p)| (i as f64 - mu_x).powi(2) * p).sum();
        let var_y: f64 = py.iter().enumerate().map(|(j, p)| (j as f64 - mu_y).powi(2) * p).sum();
        let mut cov = 0.0;
        let mut hxy1 = 0.0;
        let mut hxy2 = 0.0;
        for (i, &pxi) in px.iter().enumerate() {
            for (j, &pyj) in py.iter().enumerate() {
                let p = self.get(i, j);
                let q = pxi * pyj;
                if p > 0.0 {
                    cov += (i as f64 - mu_x) * (j as f64 - mu_y) * p;
                    hxy1 -= p * q.ln();
                }
                hxy2 -= xlogx(q);
            }
        }
        let correlation = if var_x > 0.0 && var_y > 0.0 {
            (cov / (var_x.sqrt() * var_y.sqrt())).clamp(-1.0, 1.0)
        } else {
            0.0
        };
        let sum_average: f64 = p_sum.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        let sum_variance: f64 = p_sum
            .iter()
            .enumerate()
            .map(|(k, p)| (k as f64 - sum_average).powi(2) * p)
            .sum();
        let sum_entropy = -p_sum.iter().map(|&p| xlogx(p)).sum::<f64>();
        let diff_mean: f64 = p_diff.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        let diff_variance: f64 = p_diff
            .iter()
            .enumerate()
            .map(|(k, p)| (k as f64 - diff_mean).powi(2) * p)
            .sum();
        let diff_entropy = -p_diff.iter().map(|&p| xlogx(p)).sum::<f64>();
        let hx = -px.iter().map(|&p| xlogx(p)).sum::<f64>();
        let hy = -py.iter().map(|&p| xlogx(p)).sum::<f64>();
        let imc1 = if hx.max(hy) > 0.0 {
            (entropy - hxy1) / hx.max(hy)
        } else {
            0.0
        };
        let imc2 = (1.0 - (-2.0 * (hxy2 - entropy).max(0.0)).exp()).max(0.0).sqrt();
        [
            energy,
            contrast,
            correlation,
            var_x,
            idm,
            sum_average,
            sum_variance,
            sum_entropy,
            entropy,
            diff_variance,
            diff_entropy,
            imc1,
            imc2,
        ]
    }
}

/// Co-occurrences of in-mask pixel pairs at `offset` and its negation.
pub fn glcm_matrix(q: &QuantizedPatch, offset: (i32, i32)) -> Result<Glcm> {
    let (dx, dy) = offset;
    if dx == 0 && dy == 0 {
        return Err(Error::InvalidArgument("offset must be nonzero".into()));
    }
    let g = q.levels();
    let mut counts = vec![0.0; g * g];
    let mut pairs = 0usize;
    for (x, y) in q.mask().pixels() {
        let (x, y) = (x as i64, y as i64);
        let Some(a) = q.code(x, y) else { continue };
        if let Some(b) = q.code(x + dx as i64, y + dy as i64) {
            counts[a * g + b] += 1.0;
            counts[b * g + a] += 1.0;
            pairs += 1;
        }
    }
    if pairs == 0 {
        return Err(Error::NoPairs { dx, dy });
    }
    Glcm::from_counts(g, &counts)
}

pub fn haralick_names() -> Vec<String> {
    let mut names = Vec::with_capacity(104);
    for d in DISTANCES {
        for (angle, _) in DIRECTIONS {
            for stat in HARALICK_NAMES {
                names.push(format!("GLCM-d{d}-a{angle}-{stat}"));
            }
        }
    }
    names
}

/// 13 Haralick statistics for each of 2 distances × 4 directions. A
/// configuration without any in-mask pair falls back to a uniform matrix and
/// is flagged.
pub fn haralick_features(q: &QuantizedPatch) -> Result<FeatureGroup> {
    if q.mask().is_empty() {
        return Err(Error::EmptyRoi);
    }
    let mut g = FeatureGroup::new();
    for d in DISTANCES {
        for (angle, (ux, uy)) in DIRECTIONS {
            let (glcm, flag) = match glcm_matrix(q, (ux * d, uy * d)) {
                Ok(m) => (m, Quality::Ok),
                Err(Error::NoPairs { .. }) => (Glcm::uniform(q.levels()), Quality::NoPairs),
                Err(e) => return Err(e),
            };
            for (stat, v) in HARALICK_NAMES.iter().zip(glcm.haralick()) {
                g.push_flagged(format!("GLCM-d{d}-a{angle}-{stat}"), v, flag);
            }
        }
    }
    Ok(g)
}
