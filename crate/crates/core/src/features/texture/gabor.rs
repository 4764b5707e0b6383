//! Gabor filter bank responses inside the lesion.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::features::FeatureGroup;
use crate::imaging::{Image2D, RoiMask};
use crate::stats;

pub const GABOR_WAVELENGTHS: [f64; 3] = [2.0, 4.0, 8.0];
pub const GABOR_ORIENTATIONS: [f64; 4] = [0.0, 45.0, 90.0, 135.0];
const MAGNITUDE_BINS: usize = 32;

/// Complex Gabor kernel. Taps are kept where the Gaussian envelope is within
/// three standard deviations, stored row by row as contiguous spans.
#[derive(Clone, Debug)]
pub struct GaborKernel {
    pub wavelength: f64,
    pub orientation_deg: f64,
    half: usize,
    /// Per kernel row: first column and offset into `re`/`im`.
    rows: Vec<(usize, usize, usize)>,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl GaborKernel {
    /// `bandwidth` in octaves sets the envelope width; `aspect` is the
    /// along-stripe / across-stripe envelope ratio. Both parts are
    /// mean-subtracted so a constant image gives zero response.
    pub fn new(wavelength: f64, orientation_deg: f64, bandwidth: f64, aspect: f64) -> Self {
        let b = 2f64.powf(bandwidth);
        let sigma = wavelength / PI * (2f64.ln() / 2.0).sqrt() * (b + 1.0) / (b - 1.0);
        let half = (3.0 * sigma / aspect.min(1.0)).ceil() as usize;
        let theta = orientation_deg.to_radians();
        let (s, c) = theta.sin_cos();
        let side = 2 * half + 1;
        let (mut rows, mut re, mut im) = (Vec::with_capacity(side), Vec::new(), Vec::new());
        for v in 0..side {
            let mut first = None;
            let start = re.len();
            for u in 0..side {
                let (x, y) = (u as f64 - half as f64, v as f64 - half as f64);
                let xr = x * c + y * s;
                let yr = -x * s + y * c;
                let q = (xr * xr + aspect * aspect * yr * yr) / (sigma * sigma);
                if q > 9.0 {
                    continue;
                }
                first.get_or_insert(u);
                let env = (-q / 2.0).exp();
                let phase = 2.0 * PI * xr / wavelength;
                re.push(env * phase.cos());
                im.push(env * phase.sin());
            }
            rows.push((first.unwrap_or(0), start, re.len() - start));
        }
        for part in [&mut re, &mut im] {
            let m = stats::mean(part);
            part.iter_mut().for_each(|v| *v -= m);
        }
        Self {
            wavelength,
            orientation_deg,
            half,
            rows,
            re,
            im,
        }
    }

    pub fn half_width(&self) -> usize {
        self.half
    }

    pub fn real(&self) -> &[f64] {
        &self.re
    }

    pub fn imag(&self) -> &[f64] {
        &self.im
    }

    /// Response magnitude at `(x, y)` with edge-replication padding.
    pub fn magnitude_at(&self, img: &Image2D, x: usize, y: usize) -> f64 {
        let h = self.half as i64;
        let (mut sr, mut si) = (0.0, 0.0);
        for (v, &(u0, off, len)) in self.rows.iter().enumerate() {
            let yy = y as i64 + v as i64 - h;
            for i in 0..len {
                let p = img.get_clamped(x as i64 + (u0 + i) as i64 - h, yy);
                sr += self.re[off + i] * p;
                si += self.im[off + i] * p;
            }
        }
        (sr * sr + si * si).sqrt()
    }

    /// Same as [`magnitude_at`](Self::magnitude_at) on a pre-padded patch;
    /// `(x, y)` is the kernel's top-left corner in the patch.
    fn magnitude_in(&self, patch: &Patch, x: usize, y: usize) -> f64 {
        let (mut sr, mut si) = (0.0, 0.0);
        for (v, &(u0, off, len)) in self.rows.iter().enumerate() {
            let start = (y + v) * patch.width + x + u0;
            let row = &patch.data[start..start + len];
            for ((p, a), b) in row.iter().zip(&self.re[off..off + len]).zip(&self.im[off..off + len]) {
                sr += a * p;
                si += b * p;
            }
        }
        (sr * sr + si * si).sqrt()
    }
}

/// Edge-replicated copy of the region around the lesion bounding box.
struct Patch {
    x0: i64,
    y0: i64,
    width: usize,
    data: Vec<f64>,
}

impl Patch {
    fn around(img: &Image2D, bbox: (usize, usize, usize, usize), pad: usize) -> Self {
        let (bx0, by0, bx1, by1) = bbox;
        let x0 = bx0 as i64 - pad as i64;
        let y0 = by0 as i64 - pad as i64;
        let width = bx1 - bx0 + 1 + 2 * pad;
        let height = by1 - by0 + 1 + 2 * pad;
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height as i64 {
            for x in 0..width as i64 {
                data.push(img.get_clamped(x0 + x, y0 + y));
            }
        }
        Self { x0, y0, width, data }
    }
}

#[derive(Clone, Debug)]
pub struct GaborBank {
    pub bandwidth: f64,
    pub aspect: f64,
    kernels: Vec<GaborKernel>,
}

impl GaborBank {
    pub fn new(wavelengths: &[f64], orientations_deg: &[f64], bandwidth: f64, aspect: f64) -> Self {
        let kernels = wavelengths
            .iter()
            .flat_map(|&w| {
                orientations_deg
                    .iter()
                    .map(move |&o| GaborKernel::new(w, o, bandwidth, aspect))
            })
            .collect();
        Self {
            bandwidth,
            aspect,
            kernels,
        }
    }

    /// 3 wavelengths × 4 orientations, one-octave bandwidth, aspect 0.5.
    /// Built once and shared.
    pub fn standard() -> &'static GaborBank {
        static BANK: OnceLock<GaborBank> = OnceLock::new();
        BANK.get_or_init(|| GaborBank::new(&GABOR_WAVELENGTHS, &GABOR_ORIENTATIONS, 1.0, 0.5))
    }

    pub fn kernels(&self) -> &[GaborKernel] {
        &self.kernels
    }
}

fn kernel_prefix(k: &GaborKernel) -> String {
    format!("Gabor-w{}-o{}", k.wavelength, k.orientation_deg)
}

pub fn gabor_names(bank: &GaborBank) -> Vec<String> {
    bank.kernels()
        .iter()
        .flat_map(|k| {
            let p = kernel_prefix(k);
            ["mean", "std", "energy", "entropy"]
                .into_iter()
                .map(move |s| format!("{p}-{s}"))
        })
        .collect()
}

/// Mean, std, energy and entropy of each kernel's response magnitude over the lesion.
pub fn gabor_features(img: &Image2D, mask: &RoiMask, bank: &GaborBank) -> Result<FeatureGroup> {
    img.check_same_size(mask)?;
    if mask.is_empty() {
        return Err(Error::EmptyRoi);
    }
    let pixels: Vec<(usize, usize)> = mask.pixels().collect();
    let pad = bank.kernels().iter().map(|k| k.half).max().unwrap_or(0);
    let patch = Patch::around(img, mask.bounding_box().ok_or(Error::EmptyRoi)?, pad);
    let mut g = FeatureGroup::new();
    for k in bank.kernels() {
        let off = pad - k.half;
        let mags: Vec<f64> = pixels
            .iter()
            .map(|&(x, y)| {
                let px = (x as i64 - patch.x0) as usize - pad + off;
                let py = (y as i64 - patch.y0) as usize - pad + off;
                k.magnitude_in(&patch, px, py)
            })
            .collect();
        let p = kernel_prefix(k);
        g.push(format!("{p}-mean"), stats::mean(&mags));
        g.push(format!("{p}-std"), stats::std_dev(&mags));
        g.push(
            format!("{p}-energy"),
            stats::mean(&mags.iter().map(|m| m * m).collect::<Vec<_>>()),
        );
        g.push(format!("{p}-entropy"), stats::range_entropy(&mags, MAGNITUDE_BINS));
    }
    Ok(g)
}
