use crate::error::{Error, Result};
use crate::imaging::{Image2D, RoiMask};

/// Gray-level codes in `[0, levels)` for the pixels of a mask.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantizedPatch {
    levels: usize,
    codes: Vec<u16>,
    mask: RoiMask,
}

impl QuantizedPatch {
    /// Builds a patch from raw codes; every in-mask code must be below `levels`.
    pub fn from_codes(levels: usize, codes: Vec<u16>, mask: RoiMask) -> Result<Self> {
        if codes.len() != mask.width() * mask.height() {
            return Err(Error::DimensionMismatch {
                expected: mask.width() * mask.height(),
                actual: codes.len(),
            });
        }
        if levels < 2 || levels > u16::MAX as usize {
            return Err(Error::InvalidArgument(format!("levels = {levels}")));
        }
        if codes.iter().zip(mask.bits()).any(|(&c, &m)| m && c as usize >= levels) {
            return Err(Error::InvalidArgument("code out of range".into()));
        }
        Ok(Self { levels, codes, mask })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn mask(&self) -> &RoiMask {
        &self.mask
    }

    pub fn width(&self) -> usize {
        self.mask.width()
    }

    pub fn height(&self) -> usize {
        self.mask.height()
    }

    /// Code at `(x, y)`, or `None` outside the raster or the mask.
    #[inline]
    pub fn code(&self, x: i64, y: i64) -> Option<usize> {
        if self.mask.contains(x, y) {
            Some(self.codes[y as usize * self.mask.width() + x as usize] as usize)
        } else {
            None
        }
    }
}

/// `code = clamp(floor((v - lo) / (hi - lo) * levels), 0, levels - 1)` inside the mask.
pub fn quantize(img: &Image2D, mask: &RoiMask, levels: usize, lo: f64, hi: f64) -> Result<QuantizedPatch> {
    img.check_same_size(mask)?;
    if !(lo < hi) {
        return Err(Error::DegenerateRange { lo, hi });
    }
    if levels < 2 {
        return Err(Error::InvalidArgument(format!("levels must be >= 2, got {levels}")));
    }
    let codes = img
        .data()
        .iter()
        .zip(mask.bits())
        .map(|(&v, &m)| {
            if m {
                crate::stats::bin_index(v, lo, hi, levels) as u16
            } else {
                0
            }
        })
        .collect();
    QuantizedPatch::from_codes(levels, codes, mask.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn full(w: usize, h: usize) -> RoiMask {
        RoiMask::from_fn(w, h, |_, _| true)
    }

    #[test]
    fn exact_bin_edges() {
        let img = Image2D::new(4, 1, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let q = quantize(&img, &full(4, 1), 4, 0.0, 4.0).unwrap();
        let codes: Vec<_> = (0..4).map(|x| q.code(x, 0).unwrap()).collect();
        assert_eq!(codes, vec![0, 1, 2, 3]);
    }

    #[test]
    fn boundaries_and_clamping() {
        let img = Image2D::new(4, 1, vec![-3.0, 0.0, 9.999_999, 12.0]).unwrap();
        let q = quantize(&img, &full(4, 1), 8, 0.0, 10.0).unwrap();
        assert_eq!(q.code(0, 0), Some(0));
        assert_eq!(q.code(1, 0), Some(0));
        assert_eq!(q.code(2, 0), Some(7));
        assert_eq!(q.code(3, 0), Some(7));
    }

    #[test]
    fn constant_image_single_code() {
        let img = Image2D::filled(3, 3, 5.0);
        let q = quantize(&img, &full(3, 3), 32, 0.0, 10.0).unwrap();
        assert!((0..9).all(|i| q.code(i % 3, i / 3) == Some(16)));
    }

    #[test]
    fn degenerate_range() {
        let img = Image2D::filled(2, 2, 1.0);
        assert!(matches!(
            quantize(&img, &full(2, 2), 4, 1.0, 1.0),
            Err(Error::DegenerateRange { .. })
        ));
    }

    proptest! {
        #[test]
        fn monotone(a in -10.0f64..20.0, b in -10.0f64..20.0) {
            let img = Image2D::new(2, 1, vec![a.min(b), a.max(b)]).unwrap();
            let q = quantize(&img, &full(2, 1), 32, 0.0, 10.0).unwrap();
            prop_assert!(q.code(0, 0) <= q.code(1, 0));
        }
    }
}
