//! Orthonormal Haar (2-D) and Daubechies db4 (1-D, periodic) transforms and
//! the features built on them.

use crate::error::{Error, Result};
use crate::features::FeatureGroup;
use crate::imaging::{Image2D, RoiMask};
use crate::stats;

const COEFF_BINS: usize = 32;
pub const HAAR_LEVELS: usize = 2;
pub const DB4_LEVELS: usize = 3;
pub const HAAR_SUBBANDS: [&str; 4] = ["LL", "LH", "HL", "HH"];

/// db4 decomposition low-pass filter (8 taps, 4 vanishing moments).
pub const DB4_LOWPASS: [f64; 8] = [
    -0.010_597_401_784_997_278,
    0.032_883_011_666_982_945,
    0.030_841_381_835_986_965,
    -0.187_034_811_718_881_14,
    -0.027_983_769_416_983_85,
    0.630_880_767_929_590_4,
    0.714_846_570_552_541_5,
    0.230_377_813_308_855_23,
];

/// Row-major grid of reals.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), width * height);
        Self { width, height, data }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Replicates the last row/column when a dimension is odd.
    pub fn pad_even(&self) -> Plane {
        let w = self.width + self.width % 2;
        let h = self.height + self.height % 2;
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                data.push(self.get(x.min(self.width - 1), y.min(self.height - 1)));
            }
        }
        Plane::new(w, h, data)
    }

    pub fn sum_squares(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }
}

/// One level of a 2-D Haar decomposition. `hl` holds differences along x
/// (responds to vertical edges), `lh` differences along y.
#[derive(Clone, Debug, PartialEq)]
pub struct HaarLevel {
    pub ll: Plane,
    pub lh: Plane,
    pub hl: Plane,
    pub hh: Plane,
}

impl HaarLevel {
    fn subbands(&self) -> [&Plane; 4] {
        [&self.ll, &self.lh, &self.hl, &self.hh]
    }
}

/// Orthonormal one-level 2-D Haar transform; both dimensions must be even.
pub fn haar2d_forward(p: &Plane) -> HaarLevel {
    assert!(
        p.width.is_multiple_of(2) && p.height.is_multiple_of(2),
        "dimensions must be even"
    );
    let (w, h) = (p.width / 2, p.height / 2);
    let mut bands = [(); 4].map(|_| Vec::with_capacity(w * h));
    for y in 0..h {
        for x in 0..w {
            let a = p.get(2 * x, 2 * y);
            let b = p.get(2 * x + 1, 2 * y);
            let c = p.get(2 * x, 2 * y + 1);
            let d = p.get(2 * x + 1, 2 * y + 1);
            bands[0].push(0.5 * (a + b + c + d));
            bands[1].push(0.5 * (a + b - c - d));
            bands[2].push(0.5 * (a - b + c - d));
            bands[3].push(0.5 * (a - b - c + d));
        }
    }
    let [ll, lh, hl, hh] = bands.map(|d| Plane::new(w, h, d));
    HaarLevel { ll, lh, hl, hh }
}

pub fn haar2d_inverse(level: &HaarLevel) -> Plane {
    let (w, h) = (level.ll.width, level.ll.height);
    let mut out = vec![0.0; 4 * w * h];
    let ow = 2 * w;
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let (s, v, hz, dg) = (level.ll.data[i], level.lh.data[i], level.hl.data[i], level.hh.data[i]);
            out[2 * y * ow + 2 * x] = 0.5 * (s + v + hz + dg);
            out[2 * y * ow + 2 * x + 1] = 0.5 * (s + v - hz - dg);
            out[(2 * y + 1) * ow + 2 * x] = 0.5 * (s - v + hz - dg);
            out[(2 * y + 1) * ow + 2 * x + 1] = 0.5 * (s - v - hz + dg);
        }
    }
    Plane::new(ow, 2 * h, out)
}

/// Entropy of the 32-bin histogram of |c| over `[0, max |c|]`.
fn abs_entropy(coeffs: &[f64]) -> f64 {
    let abs: Vec<f64> = coeffs.iter().map(|c| c.abs()).collect();
    let max = abs.iter().cloned().fold(0.0, f64::max);
    if max <= 0.0 {
        return 0.0;
    }
    stats::entropy(&stats::histogram(&abs, 0.0, max, COEFF_BINS))
}

pub fn haar_names() -> Vec<String> {
    (1..=HAAR_LEVELS)
        .flat_map(|l| {
            HAAR_SUBBANDS.iter().flat_map(move |b| {
                ["energy", "entropy"]
                    .into_iter()
                    .map(move |s| format!("Haar-L{l}-{b}-{s}"))
            })
        })
        .collect()
}

/// Two-level Haar decomposition of the lesion bounding box, with
/// out-of-lesion pixels replaced by the lesion mean.
///
/// Subband energy is the mean squared coefficient divided by 4^level, i.e.
/// the subband's share of the mean squared input intensity; the four
/// energies of a level therefore add up to the energy of the level input.
pub fn haar_features(img: &Image2D, mask: &RoiMask) -> Result<FeatureGroup> {
    img.check_same_size(mask)?;
    let (x0, y0, x1, y1) = mask.bounding_box().ok_or(Error::EmptyRoi)?;
    let (w, h) = (x1 - x0 + 1, y1 - y0 + 1);
    if w < 4 || h < 4 {
        return Err(Error::RoiTooSmall(format!("bounding box {w}x{h} is below 4x4")));
    }
    let fill = stats::mean(&img.masked_values(mask));
    let mut data = Vec::with_capacity(w * h);
    for y in y0..=y1 {
        for x in x0..=x1 {
            data.push(if mask.get(x, y) { img.get(x, y) } else { fill });
        }
    }
    let mut current = Plane::new(w, h, data);
    let mut g = FeatureGroup::new();
    for level in 1..=HAAR_LEVELS {
        let dec = haar2d_forward(&current.pad_even());
        let scale = 4f64.powi(level as i32);
        for (name, band) in HAAR_SUBBANDS.iter().zip(dec.subbands()) {
            let energy = band.sum_squares() / band.data.len() as f64 / scale;
            g.push(format!("Haar-L{level}-{name}-energy"), energy);
            g.push(format!("Haar-L{level}-{name}-entropy"), abs_entropy(&band.data));
        }
        current = dec.ll;
    }
    Ok(g)
}

fn db4_highpass() -> [f64; 8] {
    let mut g = [0.0; 8];
    for (k, v) in g.iter_mut().enumerate() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        *v = sign * DB4_LOWPASS[7 - k];
    }
    g
}

/// One periodic analysis step: `(approximation, detail)`, each half length.
pub fn dwt_periodic(signal: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = signal.len();
    assert!(n >= 2 && n.is_multiple_of(2), "signal length must be even");
    let hi = db4_highpass();
    let mut a = vec![0.0; n / 2];
    let mut d = vec![0.0; n / 2];
    for i in 0..n / 2 {
        for k in 0..8 {
            let s = signal[(2 * i + k) % n];
            a[i] += DB4_LOWPASS[k] * s;
            d[i] += hi[k] * s;
        }
    }
    (a, d)
}

/// Inverse of [`dwt_periodic`].
pub fn idwt_periodic(approx: &[f64], detail: &[f64]) -> Vec<f64> {
    let n = 2 * approx.len();
    let hi = db4_highpass();
    let mut out = vec![0.0; n];
    for i in 0..approx.len() {
        for k in 0..8 {
            out[(2 * i + k) % n] += DB4_LOWPASS[k] * approx[i] + hi[k] * detail[i];
        }
    }
    out
}

/// Multi-level decomposition: details finest first, then the final approximation.
pub fn db4_decompose(signal: &[f64], levels: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut details = Vec::with_capacity(levels);
    let mut approx = signal.to_vec();
    for _ in 0..levels {
        let (a, d) = dwt_periodic(&approx);
        details.push(d);
        approx = a;
    }
    (details, approx)
}

pub fn db4_reconstruct(details: &[Vec<f64>], approx: &[f64]) -> Vec<f64> {
    details.iter().rev().fold(approx.to_vec(), |a, d| idwt_periodic(&a, d))
}

pub fn daubechies_names() -> Vec<String> {
    let mut names = Vec::new();
    for l in 1..=DB4_LEVELS {
        names.push(format!("Daube-D{l}-energy"));
        names.push(format!("Daube-D{l}-entropy"));
    }
    names.push(format!("Daube-A{DB4_LEVELS}-energy"));
    names.push(format!("Daube-A{DB4_LEVELS}-entropy"));
    names
}

/// Three-level db4 transform of a normalised intensity histogram; energy
/// (mean squared coefficient) and |coefficient| entropy per detail level and
/// for the final approximation.
pub fn daubechies_histogram_features(hist: &[f64]) -> FeatureGroup {
    let (details, approx) = db4_decompose(hist, DB4_LEVELS);
    let mut g = FeatureGroup::new();
    for (l, d) in details.iter().enumerate() {
        g.push(
            format!("Daube-D{}-energy", l + 1),
            stats::mean(&d.iter().map(|c| c * c).collect::<Vec<_>>()),
        );
        g.push(format!("Daube-D{}-entropy", l + 1), abs_entropy(d));
    }
    g.push(
        format!("Daube-A{DB4_LEVELS}-energy"),
        stats::mean(&approx.iter().map(|c| c * c).collect::<Vec<_>>()),
    );
    g.push(format!("Daube-A{DB4_LEVELS}-entropy"), abs_entropy(&approx));
    g
}
