//! Gray-level run-length matrices.

use crate::error::{Error, Result};
use crate::features::texture::glcm::DIRECTIONS;
use crate::features::FeatureGroup;
use crate::imaging::QuantizedPatch;

pub const RLM_NAMES: [&str; 11] = [
    "SRE", "LRE", "GLN", "RLN", "RP", "LGRE", "HGRE", "SRLGE", "SRHGE", "LRLGE", "LRHGE",
];

/// Run counts indexed by gray level and run length (1-based lengths).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunLengthMatrix {
    levels: usize,
    max_run: usize,
    counts: Vec<u64>,
}

impl RunLengthMatrix {
    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn max_run(&self) -> usize {
        self.max_run
    }

    /// Number of runs of gray level `g` with length `len` (≥ 1).
    pub fn get(&self, g: usize, len: usize) -> u64 {
        self.counts[g * self.max_run + len - 1]
    }

    pub fn total_runs(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Σ len · r(g, len), the number of pixels covered by runs.
    pub fn covered_pixels(&self) -> u64 {
        self.entries().map(|(_, l, c)| l as u64 * c).sum()
    }

    fn entries(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(move |(i, &c)| (i / self.max_run, i % self.max_run + 1, c))
    }

    /// The 11 statistics in [`RLM_NAMES`] order. Gray levels enter the
    /// low/high gray-level emphases 1-based so that level 0 is finite.
    pub fn statistics(&self) -> [f64; 11] {
        let n_runs = self.total_runs() as f64;
        let n_pix = self.covered_pixels() as f64;
        if n_runs == 0.0 {
            return [0.0; 11];
        }
        let mut s = [0.0; 11];
        let mut per_level = vec![0.0; self.levels];
        let mut per_length = vec![0.0; self.max_run];
        for (g, l, c) in self.entries() {
            let (gi, li, c) = ((g + 1) as f64, l as f64, c as f64);
            let (g2, l2) = (gi * gi, li * li);
            per_level[g] += c;
            per_length[l - 1] += c;
            s[0] += c / l2;
            s[1] += c * l2;
            s[5] += c / g2;
            s[6] += c * g2;
            s[7] += c / (l2 * g2);
            s[8] += c * g2 / l2;
            s[9] += c * l2 / g2;
            s[10] += c * l2 * g2;
        }
        s[2] = per_level.iter().map(|v| v * v).sum();
        s[3] = per_length.iter().map(|v| v * v).sum();
        for (i, v) in s.iter_mut().enumerate() {
            if i != 4 {
                *v /= n_runs;
            }
        }
        s[4] = n_runs / n_pix;
        s
    }
}

/// Maximal runs of equal code through consecutive in-mask pixels along `step`.
pub fn run_length_matrix(q: &QuantizedPatch, step: (i32, i32)) -> RunLengthMatrix {
    let levels = q.levels();
    let max_run = q.width().max(q.height());
    let mut counts = vec![0u64; levels * max_run];
    let (dx, dy) = (step.0 as i64, step.1 as i64);
    for (x, y) in q.mask().pixels() {
        let (x, y) = (x as i64, y as i64);
        let code = q.code(x, y).expect("pixel from mask");
        if q.code(x - dx, y - dy) == Some(code) {
            continue; // not the start of a run
        }
        let mut len = 1;
        while q.code(x + dx * len as i64, y + dy * len as i64) == Some(code) {
            len += 1;
        }
        counts[code * max_run + len - 1] += 1;
    }
    RunLengthMatrix {
        levels,
        max_run,
        counts,
    }
}

pub fn rlm_names() -> Vec<String> {
    DIRECTIONS
        .iter()
        .flat_map(|(a, _)| RLM_NAMES.iter().map(move |s| format!("RLM-a{a}-{s}")))
        .collect()
}

/// 11 run-length statistics for each of the 4 directions.
pub fn rlm_features(q: &QuantizedPatch) -> Result<FeatureGroup> {
    if q.mask().is_empty() {
        return Err(Error::EmptyRoi);
    }
    let mut g = FeatureGroup::new();
    for (angle, step) in DIRECTIONS {
        let m = run_length_matrix(q, step);
        for (name, v) in RLM_NAMES.iter().zip(m.statistics()) {
            g.push(format!("RLM-a{angle}-{name}"), v);
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::RoiMask;
    use proptest::prelude::*;

    fn row(codes: &[u16], levels: usize) -> QuantizedPatch {
        let mask = RoiMask::from_fn(codes.len(), 1, |_, _| true);
        QuantizedPatch::from_codes(levels, codes.to_vec(), mask).unwrap()
    }

    fn stat(s: &[f64; 11], name: &str) -> f64 {
        s[RLM_NAMES.iter().position(|n| *n == name).unwrap()]
    }

    #[test]
    fn five_pixel_row() {
        let q = row(&[0, 0, 1, 1, 1], 2);
        let m = run_length_matrix(&q, (1, 0));
        assert_eq!(m.get(0, 2), 1);
        assert_eq!(m.get(1, 3), 1);
        assert_eq!(m.total_runs(), 2);
        let s = m.statistics();
        // (1/2² + 1/3²) / 2
        assert!((stat(&s, "SRE") - 0.180_555_555_555_555_6).abs() < 1e-12);
        assert!((stat(&s, "SRE") - 0.1806).abs() < 1e-4);
    }

    #[test]
    fn constant_row() {
        let n = 9;
        let q = row(&vec![3; n], 4);
        let s = run_length_matrix(&q, (1, 0)).statistics();
        assert_eq!(stat(&s, "LRE"), (n * n) as f64);
        assert_eq!(stat(&s, "RP"), 1.0 / n as f64);
    }

    #[test]
    fn checkerboard_runs_of_one() {
        let codes: Vec<u16> = (0..36).map(|i| ((i % 6 + i / 6) % 2) as u16).collect();
        let q = QuantizedPatch::from_codes(2, codes, RoiMask::from_fn(6, 6, |_, _| true)).unwrap();
        let s = run_length_matrix(&q, (1, 0)).statistics();
        assert_eq!(stat(&s, "SRE"), 1.0);
        assert_eq!(stat(&s, "RP"), 1.0);
    }

    #[test]
    fn feature_layout() {
        let q = row(&[0, 1, 1, 0], 2);
        let g = rlm_features(&q).unwrap();
        assert_eq!(g.len(), 44);
        assert_eq!(g.names(), rlm_names().as_slice());
    }

    proptest! {
        #[test]
        fn run_lengths_conserve_pixels(codes in prop::collection::vec(0u16..4, 64), bits in prop::collection::vec(any::<bool>(), 64)) {
            let mask = RoiMask::new(8, 8, bits).unwrap();
            let n = mask.count() as u64;
            let q = QuantizedPatch::from_codes(4, codes, mask).unwrap();
            for (_, step) in DIRECTIONS {
                prop_assert_eq!(run_length_matrix(&q, step).covered_pixels(), n);
            }
        }
    }
}
