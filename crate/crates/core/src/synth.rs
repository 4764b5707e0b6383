//! Synthetic phantom cohorts with known class differences.
//!
//! Each patient gets three 16-bit images (pseudo ADC, DWI and T2) showing an
//! elliptical lesion on a band-limited noise background, plus one outline per
//! sequence. Class differences are injected through the amplitude of a
//! high-frequency sinusoidal ripple on the DWI outline, the strength of fine
//! texture inside the T2 lesion, and the ADC lesion intensity. Random
//! low-frequency lobes and a random per-image gain act as nuisance.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cohort::{Manifest, ManifestRow};
use crate::error::{Error, Result};
use crate::imaging::io::{write_pgm16, write_roi_json};
use crate::imaging::{rasterize_polygon, Image2D, RoiPolygon};
use crate::matrix::{
    assemble_matrix, extract_sequence_features, FeatureMatrix, FeatureProfile, PatientFeatures, Sequence,
};

const OUTLINE_VERTICES: usize = 240;
const BACKGROUND_SIGMA: f64 = 2.0;
const EDGE_SIGMA: f64 = 0.8;
const PGM_MAX: f64 = 65535.0;

/// Per-class value of one injected parameter: `(negative, positive)`.
pub type ClassPair = (f64, f64);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectTable {
    /// DWI boundary ripple amplitude, as a fraction of the local radius.
    pub dwi_ripple: ClassPair,
    /// Std of fine texture inside the T2 lesion, as a fraction of the
    /// lesion/background contrast.
    pub t2_texture: ClassPair,
    /// ADC lesion intensity offset, as a fraction of the lesion contrast.
    pub adc_offset: ClassPair,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectSize {
    None,
    Small,
    Large,
}

impl EffectTable {
    pub fn preset(size: EffectSize) -> Self {
        let (ripple, texture) = (0.03, 0.05);
        let (dr, dt) = match size {
            EffectSize::None => (0.0, 0.0),
            EffectSize::Small => (0.0035, 0.015),
            EffectSize::Large => (0.007, 0.03),
        };
        Self {
            dwi_ripple: (ripple, ripple + dr),
            t2_texture: (texture, texture + dt),
            adc_offset: (0.0, 0.0),
        }
    }

    /// Column-name prefixes of the features carrying the injected signal.
    /// The T2 texture effect shows up across the correlated GLCM family, so
    /// any T2 GLCM column counts.
    pub fn target_features(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.dwi_ripple.0 != self.dwi_ripple.1 {
            out.push("DWI-Roughness");
        }
        if self.t2_texture.0 != self.t2_texture.1 {
            out.push("T2-GLCM-");
        }
        if self.adc_offset.0 != self.adc_offset.1 {
            out.push("ADC-Mean");
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhantomConfig {
    pub n_patients: usize,
    /// Fraction of patients in the positive class.
    pub positive_fraction: f64,
    pub width: usize,
    pub height: usize,
    pub effects: EffectTable,
    /// Std of white noise added to every image.
    pub noise_std: f64,
    /// Fraction of T2 lesion pixels carrying the fine texture; the texture
    /// std is preserved, so smaller fractions give sparser, stronger speckle.
    pub speckle_fraction: f64,
    /// Inclusive range of ripple cycles per full turn.
    pub ripple_cycles: (u32, u32),
    /// Inclusive range of the lesion's major semi-axis in pixels at 128×128.
    pub lesion_radius: (f64, f64),
    /// Largest amplitude of the low-frequency lobes every outline carries.
    pub lobe_amplitude: f64,
    /// Each image is multiplied by `exp(u)` with `u` uniform in
    /// `[-gain_jitter, gain_jitter]`.
    pub gain_jitter: f64,
    pub seed: u64,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        Self {
            n_patients: 20,
            positive_fraction: 0.5,
            width: 128,
            height: 128,
            effects: EffectTable::preset(EffectSize::Large),
            noise_std: 8.0,
            speckle_fraction: 0.15,
            ripple_cycles: (36, 48),
            lesion_radius: (16.0, 24.0),
            lobe_amplitude: 0.25,
            gain_jitter: 0.4,
            seed: 0,
        }
    }
}

impl PhantomConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_patients < 20 {
            return Err(Error::InvalidArgument(format!(
                "a phantom cohort needs at least 20 patients, got {}",
                self.n_patients
            )));
        }
        if !(self.positive_fraction > 0.0 && self.positive_fraction < 1.0) {
            return Err(Error::InvalidArgument("positive_fraction must be in (0, 1)".into()));
        }
        if self.width < 64 || self.height < 64 {
            return Err(Error::InvalidArgument("phantom images must be at least 64x64".into()));
        }
        let e = &self.effects;
        for (name, (a, b)) in [
            ("dwi_ripple", e.dwi_ripple),
            ("t2_texture", e.t2_texture),
            ("adc_offset", e.adc_offset),
        ] {
            if !a.is_finite() || !b.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be finite")));
            }
        }
        if !(0.0..0.5).contains(&e.dwi_ripple.0) || !(0.0..0.5).contains(&e.dwi_ripple.1) {
            return Err(Error::InvalidArgument("dwi_ripple must be in [0, 0.5)".into()));
        }
        if e.t2_texture.0 < 0.0 || e.t2_texture.1 < 0.0 || self.noise_std < 0.0 || self.gain_jitter < 0.0 {
            return Err(Error::InvalidArgument(
                "texture, noise and gain levels must be >= 0".into(),
            ));
        }
        if !(self.speckle_fraction > 0.0 && self.speckle_fraction <= 1.0) {
            return Err(Error::InvalidArgument("speckle_fraction must be in (0, 1]".into()));
        }
        if self.ripple_cycles.0 < 8 || self.ripple_cycles.1 < self.ripple_cycles.0 {
            return Err(Error::InvalidArgument(
                "ripple_cycles must be an increasing range from at least 8".into(),
            ));
        }
        let (r0, r1) = self.lesion_radius;
        if !(r0 >= 4.0 && r1 >= r0 && r1 <= 40.0) {
            return Err(Error::InvalidArgument(
                "lesion_radius must be an increasing range within [4, 40]".into(),
            ));
        }
        if !(0.0..0.3).contains(&self.lobe_amplitude) {
            return Err(Error::InvalidArgument("lobe_amplitude must be in [0, 0.3)".into()));
        }
        Ok(())
    }

    pub fn n_positive(&self) -> usize {
        ((self.n_patients as f64 * self.positive_fraction).round() as usize).clamp(1, self.n_patients - 1)
    }
}

/// Lesion geometry shared by the three sequences of a patient.
#[derive(Clone, Debug, PartialEq)]
struct Lesion {
    cx: f64,
    cy: f64,
    a: f64,
    b: f64,
    theta: f64,
    cycles: f64,
    phase: f64,
    lobes: f64,
    lobe_amplitude: f64,
    lobe_phase: f64,
}

impl Lesion {
    fn random(rng: &mut ChaCha8Rng, cfg: &PhantomConfig) -> Self {
        let (w, h) = (cfg.width, cfg.height);
        let scale = w.min(h) as f64 / 128.0;
        let a = rng.random_range(cfg.lesion_radius.0..=cfg.lesion_radius.1) * scale;
        Self {
            cx: w as f64 / 2.0 + rng.random_range(-6.0..6.0) * scale,
            cy: h as f64 / 2.0 + rng.random_range(-6.0..6.0) * scale,
            a,
            b: a / rng.random_range(1.0..1.6),
            theta: rng.random_range(0.0..PI),
            cycles: rng.random_range(cfg.ripple_cycles.0..=cfg.ripple_cycles.1) as f64,
            phase: rng.random_range(0.0..2.0 * PI),
            lobes: rng.random_range(2..6) as f64,
            lobe_amplitude: cfg.lobe_amplitude * rng.random::<f64>(),
            lobe_phase: rng.random_range(0.0..2.0 * PI),
        }
    }

    /// Outline radius at polar angle `phi` with the given ripple amplitude.
    fn radius(&self, phi: f64, ripple: f64) -> f64 {
        let t = phi - self.theta;
        let (s, c) = t.sin_cos();
        let r = self.a * self.b / ((self.b * c).powi(2) + (self.a * s).powi(2)).sqrt();
        let lobe = self.lobe_amplitude * (self.lobes * phi + self.lobe_phase).sin();
        r * (1.0 + lobe + ripple * (self.cycles * phi + self.phase).sin())
    }

    fn outline(&self, ripple: f64) -> Result<RoiPolygon> {
        let vertices = (0..OUTLINE_VERTICES)
            .map(|k| {
                let phi = 2.0 * PI * k as f64 / OUTLINE_VERTICES as f64;
                let r = self.radius(phi, ripple);
                [self.cx + r * phi.cos(), self.cy + r * phi.sin()]
            })
            .collect();
        RoiPolygon::new(vertices)
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let half = (3.0 * sigma).ceil() as i64;
    let k: Vec<f64> = (-half..=half)
        .map(|d| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

/// Separable Gaussian blur with edge replication.
fn blur(data: &[f64], w: usize, h: usize, sigma: f64) -> Vec<f64> {
    let k = gaussian_kernel(sigma);
    let half = (k.len() / 2) as i64;
    let clamp = |v: i64, n: usize| v.clamp(0, n as i64 - 1) as usize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = k
                .iter()
                .enumerate()
                .map(|(i, kv)| kv * data[y * w + clamp(x as i64 + i as i64 - half, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = k
                .iter()
                .enumerate()
                .map(|(i, kv)| kv * tmp[clamp(y as i64 + i as i64 - half, h) * w + x])
                .sum();
        }
    }
    out
}

/// Zero-mean, unit-std smooth noise field.
fn band_limited_noise(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Vec<f64> {
    let normal = Normal::new(0.0, 1.0).expect("valid normal");
    let white: Vec<f64> = (0..w * h).map(|_| normal.sample(rng)).collect();
    let smooth = blur(&white, w, h, BACKGROUND_SIGMA);
    let mean = smooth.iter().sum::<f64>() / smooth.len() as f64;
    let sd = (smooth.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / smooth.len() as f64).sqrt();
    smooth.into_iter().map(|v| (v - mean) / sd).collect()
}

/// Intensity model of one sequence: background level, lesion level and
/// background texture amplitude.
struct Contrast {
    background: f64,
    lesion: f64,
    texture: f64,
}

const CONTRASTS: [Contrast; 3] = [
    Contrast {
        background: 1400.0,
        lesion: 900.0,
        texture: 60.0,
    },
    Contrast {
        background: 500.0,
        lesion: 900.0,
        texture: 40.0,
    },
    Contrast {
        background: 800.0,
        lesion: 500.0,
        texture: 50.0,
    },
];

/// One generated patient, in memory.
#[derive(Clone, Debug)]
pub struct PhantomPatient {
    pub id: String,
    pub label: u8,
    /// ADC, DWI, T2.
    pub images: [Image2D; 3],
    pub rois: [RoiPolygon; 3],
}

fn render(
    rng: &mut ChaCha8Rng,
    cfg: &PhantomConfig,
    roi: &RoiPolygon,
    contrast: &Contrast,
    lesion_level: f64,
    fine_texture: f64,
) -> Image2D {
    let (w, h) = (cfg.width, cfg.height);
    let inside: Vec<f64> = rasterize_polygon(roi, w, h)
        .expect("outline fits the image")
        .bits()
        .iter()
        .map(|&b| f64::from(u8::from(b)))
        .collect();
    let soft = blur(&inside, w, h, EDGE_SIGMA);
    let texture = band_limited_noise(rng, w, h);
    let normal = Normal::new(0.0, 1.0).expect("valid normal");
    let gain = if cfg.gain_jitter > 0.0 {
        rng.random_range(-cfg.gain_jitter..=cfg.gain_jitter).exp()
    } else {
        1.0
    };
    let data = (0..w * h)
        .map(|i| {
            let base = contrast.background + (lesion_level - contrast.background) * soft[i];
            let fine = if inside[i] > 0.0 && rng.random::<f64>() < cfg.speckle_fraction {
                fine_texture / cfg.speckle_fraction.sqrt() * normal.sample(rng)
            } else {
                0.0
            };
            let noise = cfg.noise_std * normal.sample(rng);
            (gain * (base + contrast.texture * texture[i] + fine + noise))
                .round()
                .clamp(0.0, PGM_MAX)
        })
        .collect();
    Image2D::new(w, h, data).expect("finite phantom image")
}

/// Generates patient `index` of the cohort described by `cfg`. Every patient
/// draws from its own random stream, so patients are independent of
/// generation order.
pub fn phantom_patient(cfg: &PhantomConfig, index: usize) -> Result<PhantomPatient> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let label = u8::from(index < cfg.n_positive());
    let pick = |pair: ClassPair| if label == 1 { pair.1 } else { pair.0 };
    let e = &cfg.effects;

    let lesion = Lesion::random(&mut rng, cfg);
    let plain = lesion.outline(0.0)?;
    let rippled = lesion.outline(pick(e.dwi_ripple))?;
    let rois = [plain.clone(), rippled, plain.clone()];

    let mut images = Vec::with_capacity(3);
    for (k, contrast) in CONTRASTS.iter().enumerate() {
        let span = contrast.lesion - contrast.background;
        let (level, fine) = match Sequence::ALL[k] {
            Sequence::Adc => (contrast.lesion + pick(e.adc_offset) * span.abs(), 0.0),
            Sequence::Dwi => (contrast.lesion, 0.0),
            Sequence::T2 => (contrast.lesion, pick(e.t2_texture) * span.abs()),
        };
        images.push(render(&mut rng, cfg, &plain, contrast, level, fine));
    }
    let images: [Image2D; 3] = images.try_into().expect("three sequences");
    Ok(PhantomPatient {
        id: format!("P{:04}", index + 1),
        label,
        images,
        rois,
    })
}

/// All patients of the cohort, generated in parallel.
pub fn phantom_cohort(cfg: &PhantomConfig) -> Result<Vec<PhantomPatient>> {
    cfg.validate()?;
    (0..cfg.n_patients)
        .into_par_iter()
        .map(|i| phantom_patient(cfg, i))
        .collect()
}

/// Generates the cohort and extracts its feature matrix without touching
/// the filesystem.
pub fn phantom_matrix(cfg: &PhantomConfig, profile: &FeatureProfile) -> Result<FeatureMatrix> {
    cfg.validate()?;
    let patients = (0..cfg.n_patients)
        .into_par_iter()
        .map(|i| -> Result<PatientFeatures> {
            let p = phantom_patient(cfg, i)?;
            let mut sequences = HashMap::new();
            for (k, s) in Sequence::ALL.iter().enumerate() {
                sequences.insert(*s, extract_sequence_features(&p.images[k], &p.rois[k], profile)?);
            }
            Ok(PatientFeatures {
                id: p.id,
                label: p.label,
                sequences,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    assemble_matrix(&patients)
}

/// Writes the cohort under `dir` as `images/*.pgm`, `rois/*.json`,
/// `manifest.csv` and `phantom.json`; returns the manifest.
pub fn generate_phantom_cohort(cfg: &PhantomConfig, dir: &Path) -> Result<Manifest> {
    cfg.validate()?;
    let images_dir = dir.join("images");
    let rois_dir = dir.join("rois");
    std::fs::create_dir_all(&images_dir)?;
    std::fs::create_dir_all(&rois_dir)?;

    let rows = (0..cfg.n_patients)
        .into_par_iter()
        .map(|i| -> Result<ManifestRow> {
            let p = phantom_patient(cfg, i)?;
            let mut images: [PathBuf; 3] = Default::default();
            let mut rois: [PathBuf; 3] = Default::default();
            for (k, s) in Sequence::ALL.iter().enumerate() {
                let tag = s.prefix().to_lowercase();
                images[k] = images_dir.join(format!("{}_{tag}.pgm", p.id));
                rois[k] = rois_dir.join(format!("{}_{tag}.json", p.id));
                write_pgm16(&images[k], &p.images[k])?;
                write_roi_json(&rois[k], &p.rois[k])?;
            }
            Ok(ManifestRow {
                id: p.id,
                label: p.label,
                images,
                rois,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = Manifest { rows };
    manifest.write(&dir.join("manifest.csv"))?;
    let mut f = std::fs::File::create(dir.join("phantom.json"))?;
    serde_json::to_writer_pretty(&mut f, cfg)?;
    std::io::Write::write_all(&mut f, b"\n")?;
    Ok(manifest)
}
