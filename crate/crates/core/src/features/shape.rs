//! Morphology of the lesion outline.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::features::{FeatureGroup, Quality};
use crate::imaging::{disc_offsets, ContourPath, RoiMask};
use crate::stats;

pub const SIGNATURE_SAMPLES: usize = 360;
pub const ROUGHNESS_WINDOW: usize = 9;
pub const LAII_FRACTIONS: [f64; 4] = [0.1, 0.2, 0.3, 0.4];
const LAII_MIN_RADIUS: f64 = 2.0;
const RAY_STEP: f64 = 0.05;
const RDS_HIST_BINS: usize = 32;
const ZERO_CROSS_DEADBAND: f64 = 0.5;
const RDS_STATS: [&str; 10] = [
    "mean",
    "std",
    "mad",
    "max",
    "min",
    "rms",
    "entropy",
    "zerocross",
    "arearatio",
    "normvar",
];

/// Centroid-to-boundary distance sampled at uniformly spaced angles.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialSignature {
    pub center: (f64, f64),
    pub angles: Vec<f64>,
    pub distances: Vec<f64>,
}

impl RadialSignature {
    pub fn mean_distance(&self) -> f64 {
        stats::mean(&self.distances)
    }
}

/// `4π·A / P²` with A the pixel count and P the contour perimeter.
pub fn compactness(mask: &RoiMask, contour: &ContourPath) -> Result<f64> {
    let area = mask.count();
    if area == 0 {
        return Err(Error::EmptyRoi);
    }
    let p = contour.perimeter();
    if p <= 0.0 {
        return Err(Error::DegenerateShape("zero perimeter".into()));
    }
    Ok(4.0 * PI * area as f64 / (p * p))
}

/// `√(1 − λ₂/λ₁)` from the eigenvalues of the pixel-coordinate covariance.
pub fn eccentricity(mask: &RoiMask) -> Result<f64> {
    let n = mask.count();
    if n == 0 {
        return Err(Error::EmptyRoi);
    }
    let (cx, cy) = mask.centroid().expect("nonempty");
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (x, y) in mask.pixels() {
        let (dx, dy) = (x as f64 - cx, y as f64 - cy);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let (a, c, b) = (sxx / n as f64, syy / n as f64, sxy / n as f64);
    let mid = 0.5 * (a + c);
    let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let (l1, l2) = (mid + rad, (mid - rad).max(0.0));
    if l1 <= 0.0 {
        return Err(Error::DegenerateShape("single pixel".into()));
    }
    Ok((1.0 - l2 / l1).clamp(0.0, 1.0).sqrt())
}

/// Ray-casts from `center` and records the farthest in-mask distance per angle.
pub fn radial_signature(mask: &RoiMask, center: (f64, f64), samples: usize) -> RadialSignature {
    let (cx, cy) = center;
    let reach = mask
        .pixels()
        .map(|(x, y)| (x as f64 - cx).hypot(y as f64 - cy))
        .fold(0.0, f64::max)
        + 1.0;
    let steps = (reach / RAY_STEP).ceil() as usize;
    let mut angles = Vec::with_capacity(samples);
    let mut distances = Vec::with_capacity(samples);
    for i in 0..samples {
        let theta = 2.0 * PI * i as f64 / samples as f64;
        let (s, c) = theta.sin_cos();
        let mut last = 0.0;
        for k in 0..=steps {
            let t = k as f64 * RAY_STEP;
            let (px, py) = ((cx + t * c).round(), (cy + t * s).round());
            if mask.contains(px as i64, py as i64) {
                last = t;
            }
        }
        angles.push(theta);
        // the hit pixel extends half a pixel past its centre
        distances.push(last + 0.5 * RAY_STEP);
    }
    RadialSignature {
        center,
        angles,
        distances,
    }
}

/// Centroid, or the nearest lesion pixel when the centroid falls outside the
/// lesion (second element false).
pub fn signature_center(mask: &RoiMask) -> Result<((f64, f64), bool)> {
    let (cx, cy) = mask.centroid().ok_or(Error::EmptyRoi)?;
    if mask.contains(cx.round() as i64, cy.round() as i64) {
        return Ok(((cx, cy), true));
    }
    let nearest = mask
        .pixels()
        .min_by(|a, b| {
            let da = (a.0 as f64 - cx).hypot(a.1 as f64 - cy);
            let db = (b.0 as f64 - cx).hypot(b.1 as f64 - cy);
            da.total_cmp(&db)
        })
        .expect("nonempty");
    Ok(((nearest.0 as f64, nearest.1 as f64), false))
}

/// Mean absolute deviation of the radial signature from its circular moving
/// average (window 9), relative to the mean radius.
pub fn roughness(sig: &RadialSignature) -> Result<f64> {
    let n = sig.distances.len();
    let mean = sig.mean_distance();
    if n == 0 || !(mean > 0.0) {
        return Err(Error::DegenerateShape("mean radial distance is zero".into()));
    }
    let half = (ROUGHNESS_WINDOW / 2) as i64;
    let total: f64 = (0..n as i64)
        .map(|i| {
            let smooth = (-half..=half)
                .map(|k| sig.distances[(i + k).rem_euclid(n as i64) as usize])
                .sum::<f64>()
                / ROUGHNESS_WINDOW as f64;
            (sig.distances[i as usize] - smooth).abs()
        })
        .sum();
    Ok(total / n as f64 / mean)
}

fn laii_percent(f: f64) -> u32 {
    (f * 100.0).round() as u32
}

pub fn laii_names() -> Vec<String> {
    LAII_FRACTIONS
        .iter()
        .flat_map(|&f| {
            ["mean", "std", "min", "max"]
                .into_iter()
                .map(move |s| format!("LAII-r{}-{s}", laii_percent(f)))
        })
        .collect()
}

/// Fraction of a disc centred on each contour point that lies inside the
/// lesion, summarised per radius (0.1–0.4 of the equivalent radius, ≥ 2 px).
pub fn laii_stats(mask: &RoiMask, contour: &ContourPath) -> Result<FeatureGroup> {
    if mask.is_empty() || contour.is_empty() {
        return Err(Error::EmptyRoi);
    }
    let r_eq = mask.equivalent_radius();
    let mut g = FeatureGroup::new();
    for f in LAII_FRACTIONS {
        let offsets = disc_offsets((f * r_eq).max(LAII_MIN_RADIUS));
        let fractions: Vec<f64> = contour
            .points()
            .iter()
            .map(|&(x, y)| {
                let hit = offsets
                    .iter()
                    .filter(|&&(dx, dy)| mask.contains(x + dx, y + dy))
                    .count();
                hit as f64 / offsets.len() as f64
            })
            .collect();
        let (lo, hi) = stats::min_max(&fractions);
        let p = laii_percent(f);
        g.push(format!("LAII-r{p}-mean"), stats::mean(&fractions));
        g.push(format!("LAII-r{p}-std"), stats::std_dev(&fractions));
        g.push(format!("LAII-r{p}-min"), lo);
        g.push(format!("LAII-r{p}-max"), hi);
    }
    Ok(g)
}

pub fn rds_names() -> Vec<String> {
    RDS_STATS.iter().map(|s| format!("RDS-{s}")).collect()
}

/// Circular count of sign changes; values within `deadband` of zero keep the
/// previous sign so sub-pixel staircase jitter is not counted.
fn zero_crossings(values: &[f64], deadband: f64) -> usize {
    let signs: Vec<bool> = values.iter().filter(|v| v.abs() > deadband).map(|v| *v > 0.0).collect();
    if signs.len() < 2 {
        return 0;
    }
    (0..signs.len())
        .filter(|&i| signs[i] != signs[(i + 1) % signs.len()])
        .count()
}

/// Statistics of the mean-normalised radial distance signature.
pub fn radial_distance_features(mask: &RoiMask, contour: &ContourPath) -> Result<FeatureGroup> {
    if mask.is_empty() || contour.is_empty() {
        return Err(Error::EmptyRoi);
    }
    let (center, inside) = signature_center(mask)?;
    let sig = radial_signature(mask, center, SIGNATURE_SAMPLES);
    Ok(signature_statistics(&sig, inside))
}

fn signature_statistics(sig: &RadialSignature, center_inside: bool) -> FeatureGroup {
    let flag = if center_inside {
        Quality::Ok
    } else {
        Quality::CentroidOutside
    };
    let n = sig.distances.len() as f64;
    let mean = sig.mean_distance();
    let norm: Vec<f64> = sig.distances.iter().map(|d| d / mean).collect();
    let (lo, hi) = stats::min_max(&norm);
    let std = stats::std_dev(&norm);
    let values = [
        stats::mean(&norm),
        std,
        norm.iter().map(|v| (v - 1.0).abs()).sum::<f64>() / n,
        hi,
        lo,
        (norm.iter().map(|v| v * v).sum::<f64>() / n).sqrt(),
        stats::range_entropy(&norm, RDS_HIST_BINS),
        zero_crossings(
            &sig.distances.iter().map(|d| d - mean).collect::<Vec<_>>(),
            ZERO_CROSS_DEADBAND,
        ) as f64,
        sig.distances.iter().map(|d| (d - mean).max(0.0)).sum::<f64>() / (n * mean),
        std * std,
    ];
    let mut g = FeatureGroup::new();
    for (name, v) in rds_names().into_iter().zip(values) {
        g.push_flagged(name, v, flag);
    }
    g
}

pub fn shape_names() -> Vec<String> {
    let mut names = vec!["Com".to_string(), "Eccent".into(), "Roughness".into()];
    names.extend(laii_names());
    names.extend(rds_names());
    names
}

/// All 29 shape features; individual failures are imputed as 0 and flagged.
pub fn shape_features(mask: &RoiMask, contour: &ContourPath) -> Result<FeatureGroup> {
    if mask.is_empty() || contour.is_empty() {
        return Err(Error::EmptyRoi);
    }
    let mut g = FeatureGroup::new();
    let scalar = |g: &mut FeatureGroup, name: &str, r: Result<f64>| match r {
        Ok(v) => g.push(name, v),
        Err(_) => g.push_flagged(name, 0.0, Quality::DegenerateShape),
    };
    scalar(&mut g, "Com", compactness(mask, contour));
    scalar(&mut g, "Eccent", eccentricity(mask));
    let (center, inside) = signature_center(mask)?;
    let sig = radial_signature(mask, center, SIGNATURE_SAMPLES);
    scalar(&mut g, "Roughness", roughness(&sig));
    if !inside {
        g.flag_all(Quality::CentroidOutside);
    }
    g.extend(laii_stats(mask, contour)?);
    g.extend(signature_statistics(&sig, inside));
    Ok(g)
}
