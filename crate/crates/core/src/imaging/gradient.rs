use crate::error::{Error, Result};
use crate::imaging::Image2D;

/// Sobel gradient magnitude with edge-replication padding.
pub fn gradient_magnitude(img: &Image2D) -> Result<Image2D> {
    let (w, h) = (img.width(), img.height());
    if w < 3 || h < 3 {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            min: 3,
        });
    }
    Ok(Image2D::from_fn(w, h, |x, y| {
        let (x, y) = (x as i64, y as i64);
        let p = |dx: i64, dy: i64| img.get_clamped(x + dx, y + dy);
        // (a + c) + 2b keeps the sums order-independent, so the result is
        // bit-exact under 90 degree rotations
        let gx = ((p(1, -1) + p(1, 1)) + 2.0 * p(1, 0)) - ((p(-1, -1) + p(-1, 1)) + 2.0 * p(-1, 0));
        let gy = ((p(-1, 1) + p(1, 1)) + 2.0 * p(0, 1)) - ((p(-1, -1) + p(1, -1)) + 2.0 * p(0, -1));
        (gx * gx + gy * gy).sqrt()
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_is_zero() {
        let g = gradient_magnitude(&Image2D::filled(5, 4, 7.0)).unwrap();
        assert!(g.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn vertical_step() {
        let h = 3.5;
        let img = Image2D::from_fn(8, 6, |x, _| if x < 4 { 0.0 } else { h });
        let g = gradient_magnitude(&img).unwrap();
        // hand convolution: columns x=3 and x=4 straddle the step
        for y in 0..6 {
            assert_eq!(g.get(3, y), 4.0 * h);
            assert_eq!(g.get(4, y), 4.0 * h);
            assert_eq!(g.get(1, y), 0.0);
        }
    }

    #[test]
    fn too_small() {
        assert!(gradient_magnitude(&Image2D::filled(2, 5, 0.0)).is_err());
    }

    proptest! {
        #[test]
        fn commutes_with_rotation(data in prop::collection::vec(0u16..1000, 30)) {
            let img = Image2D::new(6, 5, data.iter().map(|&v| v as f64).collect()).unwrap();
            let a = gradient_magnitude(&img.rotate90()).unwrap();
            let b = gradient_magnitude(&img).unwrap().rotate90();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn commutes_with_rotation_real(data in prop::collection::vec(-1.0f64..1.0, 30)) {
            let img = Image2D::new(5, 6, data).unwrap();
            let a = gradient_magnitude(&img.rotate90()).unwrap();
            let b = gradient_magnitude(&img).unwrap().rotate90();
            prop_assert_eq!(a, b);
        }
    }
}
