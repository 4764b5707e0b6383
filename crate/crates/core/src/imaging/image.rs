use crate::error::{Error, Result};
use crate::imaging::RoiMask;

/// Single-channel raster, row-major, one slice of one MR sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct Image2D {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Image2D {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "expected {} samples, got {}",
                width * height,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidImage(format!("non-finite intensity at index {i}")));
        }
        Ok(Self { width, height, data })
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    ///
    /// Panics if the dimensions are zero or `f` yields a non-finite value.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data).expect("from_fn produced an invalid image")
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self::from_fn(width, height, |_, _| value)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Sample with edge-replication outside the raster.
    #[inline]
    pub fn get_clamped(&self, x: i64, y: i64) -> f64 {
        let x = x.clamp(0, self.width as i64 - 1) as usize;
        let y = y.clamp(0, self.height as i64 - 1) as usize;
        self.get(x, y)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(self.width, self.height, |x, y| f(self.get(x, y)))
    }

    /// Rotates by 90 degrees: pixel (x, y) moves to (height - 1 - y, x).
    pub fn rotate90(&self) -> Self {
        let (w, h) = (self.width, self.height);
        Self::from_fn(h, w, |nx, ny| self.get(ny, h - 1 - nx))
    }

    /// Intensities of the pixels selected by `mask`, in raster order.
    pub fn masked_values(&self, mask: &RoiMask) -> Vec<f64> {
        debug_assert_eq!((mask.width(), mask.height()), (self.width, self.height));
        self.data
            .iter()
            .zip(mask.bits())
            .filter(|(_, &m)| m)
            .map(|(&v, _)| v)
            .collect()
    }

    pub(crate) fn check_same_size(&self, mask: &RoiMask) -> Result<()> {
        if mask.width() != self.width || mask.height() != self.height {
            return Err(Error::InvalidArgument(format!(
                "mask is {}x{} but image is {}x{}",
                mask.width(),
                mask.height(),
                self.width,
                self.height
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_buffers() {
        assert!(Image2D::new(0, 3, vec![]).is_err());
        assert!(Image2D::new(2, 2, vec![1.0; 3]).is_err());
        assert!(Image2D::new(1, 1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn rotation_four_times_is_identity() {
        let img = Image2D::from_fn(5, 3, |x, y| (x * 10 + y) as f64);
        let r = img.rotate90();
        assert_eq!((r.width(), r.height()), (3, 5));
        assert_eq!(r.rotate90().rotate90().rotate90(), img);
    }
}
