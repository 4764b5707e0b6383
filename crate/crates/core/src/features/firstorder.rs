//! Intensity, histogram, local-binary-pattern and edge features.

use crate::error::{Error, Result};
use crate::features::{FeatureGroup, Quality};
use crate::imaging::{gradient_magnitude, ring_region, ContourPath, Image2D, RoiMask};
use crate::stats;

pub const INTENSITY_HIST_BINS: usize = 128;
pub const HISTOGRAM_BINS: usize = 128;
pub const EDGE_HIST_BINS: usize = 32;
pub const LBP_BINS: usize = 59;
const PIXVALUE_PERCENTILES: [f64; 3] = [50.0, 75.0, 90.0];
const EDGE_BAND_RADIUS: f64 = 2.0;

pub fn intensity_names() -> Vec<String> {
    let mut names: Vec<String> = ["Mean", "InsM", "Entropy"].iter().map(|s| s.to_string()).collect();
    names.extend(PIXVALUE_PERCENTILES.iter().map(|p| format!("Pixvalue-p{p}")));
    for scale in 1..=3 {
        for stat in ["mean", "median", "std"] {
            names.push(format!("Diff-{stat}-s{scale}"));
        }
    }
    names
}

pub fn histogram_names() -> Vec<String> {
    (0..HISTOGRAM_BINS).map(|i| format!("Histogram-bin-{i}")).collect()
}

pub fn lbp_names() -> Vec<String> {
    let mut names: Vec<String> = uniform_codes().iter().map(|c| format!("LBP-u{c}")).collect();
    names.push("LBP-nonuniform".into());
    names
}

pub fn edge_names() -> Vec<String> {
    let mut names: Vec<String> = ["mean", "std", "min", "max", "median"]
        .iter()
        .map(|s| format!("EdgeSharp-{s}"))
        .collect();
    names.extend((0..EDGE_HIST_BINS).map(|i| format!("EdgeHist-bin-{i}")));
    names
}

/// Base ring width for the three-scale lesion/neighbourhood contrast.
pub fn diff_base_width(mask: &RoiMask) -> usize {
    ((0.2 * mask.equivalent_radius()).round() as usize).max(1)
}

/// Mean, median, entropy, threshold proportions and the lesion-vs-ring
/// differences at ring widths w, 2w and 3w.
pub fn intensity_features(img: &Image2D, mask: &RoiMask) -> Result<FeatureGroup> {
    img.check_same_size(mask)?;
    let inside = img.masked_values(mask);
    if inside.is_empty() {
        return Err(Error::EmptyRoi);
    }
    let mut g = FeatureGroup::new();
    g.push("Mean", stats::mean(&inside));
    g.push("InsM", stats::median(&inside));
    g.push("Entropy", stats::range_entropy(&inside, INTENSITY_HIST_BINS));

    let mut sorted = img.data().to_vec();
    sorted.sort_by(f64::total_cmp);
    for p in PIXVALUE_PERCENTILES {
        let threshold = stats::percentile_sorted(&sorted, p);
        let above = inside.iter().filter(|&&v| v > threshold).count();
        g.push(format!("Pixvalue-p{p}"), above as f64 / inside.len() as f64);
    }

    let (mean_in, median_in, std_in) = (stats::mean(&inside), stats::median(&inside), stats::std_dev(&inside));
    let w = diff_base_width(mask);
    for scale in 1..=3 {
        let ring = ring_region(mask, scale * w)?;
        let outside = img.masked_values(&ring);
        if outside.is_empty() {
            for stat in ["mean", "median", "std"] {
                g.push_flagged(format!("Diff-{stat}-s{scale}"), 0.0, Quality::EmptyRing);
            }
            continue;
        }
        g.push(format!("Diff-mean-s{scale}"), mean_in - stats::mean(&outside));
        g.push(format!("Diff-median-s{scale}"), median_in - stats::median(&outside));
        g.push(format!("Diff-std-s{scale}"), std_in - stats::std_dev(&outside));
    }
    Ok(g)
}

/// Proportion of lesion pixels in each of 128 equal bins over `[lo, hi]`.
pub fn histogram_features(img: &Image2D, mask: &RoiMask, lo: f64, hi: f64) -> Result<FeatureGroup> {
    img.check_same_size(mask)?;
    if !(lo < hi) {
        return Err(Error::DegenerateRange { lo, hi });
    }
    let inside = img.masked_values(mask);
    if inside.is_empty() {
        return Err(Error::EmptyRoi);
    }
    let hist = stats::histogram(&inside, lo, hi, HISTOGRAM_BINS);
    let mut g = FeatureGroup::new();
    for (i, p) in hist.into_iter().enumerate() {
        g.push(format!("Histogram-bin-{i}"), p);
    }
    Ok(g)
}

fn transitions(code: u8) -> u32 {
    (code ^ code.rotate_right(1)).count_ones()
}

/// The 58 8-bit codes with at most two circular 0/1 transitions, ascending.
pub fn uniform_codes() -> Vec<u8> {
    (0..=255u8).filter(|&c| transitions(c) <= 2).collect()
}

fn lbp_bin_table() -> [usize; 256] {
    let mut table = [LBP_BINS - 1; 256];
    for (i, c) in uniform_codes().into_iter().enumerate() {
        table[c as usize] = i;
    }
    table
}

/// 8-neighbour binary pattern code; bit b set iff neighbour b ≥ centre,
/// neighbours clockwise from east.
pub fn lbp_code(img: &Image2D, x: usize, y: usize) -> u8 {
    use crate::imaging::NEIGHBORS_8;
    let c = img.get(x, y);
    let mut code = 0u8;
    for (b, (dx, dy)) in NEIGHBORS_8.iter().enumerate() {
        let v = img.get((x as i64 + dx) as usize, (y as i64 + dy) as usize);
        if v >= c {
            code |= 1 << b;
        }
    }
    code
}

/// 59-bin uniform LBP histogram over lesion pixels whose full 8-neighbourhood
/// lies inside the image.
pub fn lbp_features(img: &Image2D, mask: &RoiMask) -> Result<FeatureGroup> {
    img.check_same_size(mask)?;
    if mask.is_empty() {
        return Err(Error::EmptyRoi);
    }
    let (w, h) = (img.width(), img.height());
    let table = lbp_bin_table();
    let mut counts = [0usize; LBP_BINS];
    let mut total = 0usize;
    for (x, y) in mask.pixels() {
        if x == 0 || y == 0 || x + 1 >= w || y + 1 >= h {
            continue;
        }
        counts[table[lbp_code(img, x, y) as usize]] += 1;
        total += 1;
    }
    let names = lbp_names();
    if total == 0 {
        return Ok(FeatureGroup::imputed(&names, Quality::NoEligiblePixels));
    }
    let mut g = FeatureGroup::new();
    for (name, c) in names.into_iter().zip(counts) {
        g.push(name, c as f64 / total as f64);
    }
    Ok(g)
}

/// Gradient statistics along the contour plus a 32-bin intensity histogram
/// of the band straddling the lesion border.
pub fn edge_features(img: &Image2D, mask: &RoiMask, contour: &ContourPath, lo: f64, hi: f64) -> Result<FeatureGroup> {
    img.check_same_size(mask)?;
    if mask.is_empty() || contour.is_empty() {
        return Err(Error::EmptyRoi);
    }
    if !(lo < hi) {
        return Err(Error::DegenerateRange { lo, hi });
    }
    let mut g = FeatureGroup::new();
    // gradients need a 3x3 raster; smaller images get flat sharpness
    let sharp: Vec<f64> = match gradient_magnitude(img) {
        Ok(grad) => contour
            .points()
            .iter()
            .map(|&(x, y)| grad.get(x as usize, y as usize))
            .collect(),
        Err(_) => vec![0.0; contour.len()],
    };
    let (min, max) = stats::min_max(&sharp);
    g.push("EdgeSharp-mean", stats::mean(&sharp));
    g.push("EdgeSharp-std", stats::std_dev(&sharp));
    g.push("EdgeSharp-min", min);
    g.push("EdgeSharp-max", max);
    g.push("EdgeSharp-median", stats::median(&sharp));

    let band = mask.dilate(EDGE_BAND_RADIUS).and_not(&mask.erode(EDGE_BAND_RADIUS));
    let (values, flag) = if band.is_empty() {
        let v = contour
            .points()
            .iter()
            .map(|&(x, y)| img.get(x as usize, y as usize))
            .collect::<Vec<_>>();
        (v, Quality::DegenerateBand)
    } else {
        (img.masked_values(&band), Quality::Ok)
    };
    for (i, p) in stats::histogram(&values, lo, hi, EDGE_HIST_BINS)
        .into_iter()
        .enumerate()
    {
        g.push_flagged(format!("EdgeHist-bin-{i}"), p, flag);
    }
    Ok(g)
}
