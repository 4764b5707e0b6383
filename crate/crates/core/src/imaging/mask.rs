use std::collections::VecDeque;

use crate::error::{Error, Result};

/// 8-neighbourhood offsets, clockwise on screen (y grows downwards) starting east.
pub(crate) const NEIGHBORS_8: [(i64, i64); 8] = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)];

const NEIGHBORS_4: [(i64, i64); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];

/// Ordered lesion outline in pixel units, implicitly closed.
#[derive(Clone, Debug, PartialEq)]
pub struct RoiPolygon {
    vertices: Vec<[f64; 2]>,
}

impl RoiPolygon {
    /// Validates vertex count, finiteness and simplicity.
    pub fn new(vertices: Vec<[f64; 2]>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidPolygon(format!(
                "need at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        if vertices.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPolygon("non-finite vertex".into()));
        }
        let n = vertices.len();
        for i in 0..n {
            let (a1, a2) = (vertices[i], vertices[(i + 1) % n]);
            if a1 == a2 {
                return Err(Error::InvalidPolygon(format!("repeated vertex at {i}")));
            }
            for j in (i + 1)..n {
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                let (b1, b2) = (vertices[j], vertices[(j + 1) % n]);
                if segments_intersect(a1, a2, b1, b2) {
                    return Err(Error::InvalidPolygon(format!("edges {i} and {j} intersect")));
                }
            }
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    /// Even-odd point-in-polygon test (horizontal ray towards +x).
    pub fn contains(&self, px: f64, py: f64) -> bool {
        let n = self.vertices.len();
        let mut inside = false;
        for i in 0..n {
            let [x1, y1] = self.vertices[i];
            let [x2, y2] = self.vertices[(i + 1) % n];
            if (y1 > py) != (y2 > py) {
                let xi = x1 + (py - y1) * (x2 - x1) / (y2 - y1);
                if xi > px {
                    inside = !inside;
                }
            }
        }
        inside
    }

    fn bounding_box(&self) -> (f64, f64, f64, f64) {
        self.vertices.iter().fold(
            (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
            |(x0, y0, x1, y1), &[x, y]| (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
        )
    }
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

fn segments_intersect(a1: [f64; 2], a2: [f64; 2], b1: [f64; 2], b2: [f64; 2]) -> bool {
    let d1 = orient(b1, b2, a1);
    let d2 = orient(b1, b2, a2);
    let d3 = orient(a1, a2, b1);
    let d4 = orient(a1, a2, b2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(b1, b2, a1))
        || (d2 == 0.0 && on_segment(b1, b2, a2))
        || (d3 == 0.0 && on_segment(a1, a2, b1))
        || (d4 == 0.0 && on_segment(a1, a2, b2))
}

/// Boolean lesion raster aligned with a parent image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoiMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl RoiMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 || bits.len() != width * height {
            return Err(Error::InvalidArgument(format!(
                "mask buffer of {} bits does not match {width}x{height}",
                bits.len()
            )));
        }
        Ok(Self { width, height, bits })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self { width, height, bits }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    /// Bounds-checked lookup; anything outside the raster is background.
    #[inline]
    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.bits[y as usize * self.width + x as usize]
    }

    pub(crate) fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Coordinates of the true pixels in raster order.
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i % self.width, i / self.width))
    }

    pub fn and_not(&self, other: &RoiMask) -> RoiMask {
        self.zip_with(other, |a, b| a && !b)
    }

    pub fn and(&self, other: &RoiMask) -> RoiMask {
        self.zip_with(other, |a, b| a && b)
    }

    fn zip_with(&self, other: &RoiMask, f: impl Fn(bool, bool) -> bool) -> RoiMask {
        assert_eq!((self.width, self.height), (other.width, other.height));
        RoiMask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().zip(&other.bits).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    /// Rotates by 90 degrees with the same convention as [`crate::imaging::Image2D::rotate90`].
    pub fn rotate90(&self) -> RoiMask {
        let (w, h) = (self.width, self.height);
        RoiMask::from_fn(h, w, |nx, ny| self.get(ny, h - 1 - nx))
    }

    /// Inclusive bounding box `(x0, y0, x1, y1)` of the true pixels.
    pub fn bounding_box(&self) -> Option<(usize, usize, usize, usize)> {
        self.pixels().fold(None, |acc, (x, y)| match acc {
            None => Some((x, y, x, y)),
            Some((x0, y0, x1, y1)) => Some((x0.min(x), y0.min(y), x1.max(x), y1.max(y))),
        })
    }

    /// Mean pixel coordinate of the true pixels.
    pub fn centroid(&self) -> Option<(f64, f64)> {
        let n = self.count();
        if n == 0 {
            return None;
        }
        let (sx, sy) = self
            .pixels()
            .fold((0.0, 0.0), |(sx, sy), (x, y)| (sx + x as f64, sy + y as f64));
        Some((sx / n as f64, sy / n as f64))
    }

    /// Radius of the disc with the same area as the mask.
    pub fn equivalent_radius(&self) -> f64 {
        (self.count() as f64 / std::f64::consts::PI).sqrt()
    }

    /// True pixels with at least one background 4-neighbour (off-raster counts as background).
    pub fn is_boundary(&self, x: usize, y: usize) -> bool {
        self.get(x, y)
            && NEIGHBORS_4
                .iter()
                .any(|&(dx, dy)| !self.contains(x as i64 + dx, y as i64 + dy))
    }

    pub fn boundary_count(&self) -> usize {
        self.pixels().filter(|&(x, y)| self.is_boundary(x, y)).count()
    }

    /// 8-connected components, largest first (ties keep raster order).
    pub fn components(&self) -> Vec<RoiMask> {
        let mut label = vec![usize::MAX; self.bits.len()];
        let mut comps: Vec<RoiMask> = Vec::new();
        let mut queue = VecDeque::new();
        for start in 0..self.bits.len() {
            if !self.bits[start] || label[start] != usize::MAX {
                continue;
            }
            let id = comps.len();
            let mut comp = RoiMask::empty(self.width, self.height);
            label[start] = id;
            queue.push_back(start);
            while let Some(i) = queue.pop_front() {
                let (x, y) = ((i % self.width) as i64, (i / self.width) as i64);
                comp.bits[i] = true;
                for (dx, dy) in NEIGHBORS_8 {
                    let (nx, ny) = (x + dx, y + dy);
                    if self.contains(nx, ny) {
                        let j = ny as usize * self.width + nx as usize;
                        if label[j] == usize::MAX {
                            label[j] = id;
                            queue.push_back(j);
                        }
                    }
                }
            }
            comps.push(comp);
        }
        comps.sort_by_key(|c| std::cmp::Reverse(c.count()));
        comps
    }

    /// Dilation by a Euclidean disc of radius `r`, clipped to the raster.
    pub fn dilate(&self, r: f64) -> RoiMask {
        let offsets = disc_offsets(r);
        let mut out = self.clone();
        for (x, y) in self.pixels() {
            if !self.is_boundary(x, y) {
                continue;
            }
            for &(dx, dy) in &offsets {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if nx >= 0 && ny >= 0 && (nx as usize) < self.width && (ny as usize) < self.height {
                    out.set(nx as usize, ny as usize, true);
                }
            }
        }
        out
    }

    /// Erosion by a Euclidean disc of radius `r`; off-raster pixels count as background.
    pub fn erode(&self, r: f64) -> RoiMask {
        let offsets = disc_offsets(r);
        RoiMask::from_fn(self.width, self.height, |x, y| {
            self.get(x, y)
                && offsets
                    .iter()
                    .all(|&(dx, dy)| self.contains(x as i64 + dx, y as i64 + dy))
        })
    }
}

/// Integer offsets of the Euclidean disc `dx² + dy² ≤ r²`.
pub fn disc_offsets(r: f64) -> Vec<(i64, i64)> {
    let ri = r.floor() as i64;
    let r2 = r * r;
    let mut out = Vec::new();
    for dy in -ri..=ri {
        for dx in -ri..=ri {
            if ((dx * dx + dy * dy) as f64) <= r2 {
                out.push((dx, dy));
            }
        }
    }
    out
}

/// Marks every pixel whose centre lies inside `poly` under the even-odd rule.
pub fn rasterize_polygon(poly: &RoiPolygon, width: usize, height: usize) -> Result<RoiMask> {
    let (x0, y0, x1, y1) = poly.bounding_box();
    if x1 < -0.5 || y1 < -0.5 || x0 > width as f64 - 0.5 || y0 > height as f64 - 0.5 {
        return Err(Error::OutOfBounds);
    }
    let verts = poly.vertices();
    let n = verts.len();
    let mut mask = RoiMask::empty(width, height);
    let row_lo = y0.ceil().max(0.0) as usize;
    let row_hi = (y1.floor().max(-1.0) as i64).min(height as i64 - 1);
    let mut crossings = Vec::new();
    for y in row_lo as i64..=row_hi {
        let py = y as f64;
        crossings.clear();
        for i in 0..n {
            let [xa, ya] = verts[i];
            let [xb, yb] = verts[(i + 1) % n];
            if (ya > py) != (yb > py) {
                crossings.push(xa + (py - ya) * (xb - xa) / (yb - ya));
            }
        }
        crossings.sort_by(f64::total_cmp);
        for x in 0..width {
            let px = x as f64;
            // number of crossings strictly right of the pixel centre
            let right = crossings.len() - crossings.partition_point(|&c| c <= px);
            if right % 2 == 1 {
                mask.set(x, y as usize, true);
            }
        }
    }
    if mask.is_empty() {
        return Err(Error::EmptyRoi);
    }
    Ok(mask)
}

/// Band of width `width_px` around the lesion: `dilate(mask) \ mask`.
pub fn ring_region(mask: &RoiMask, width_px: usize) -> Result<RoiMask> {
    if width_px == 0 {
        return Err(Error::InvalidArgument("ring width must be >= 1".into()));
    }
    if mask.is_empty() {
        return Err(Error::EmptyRoi);
    }
    Ok(mask.dilate(width_px as f64).and_not(mask))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn square(a: f64, b: f64) -> RoiPolygon {
        RoiPolygon::new(vec![[a, a], [b, a], [b, b], [a, b]]).unwrap()
    }

    fn circle_polygon(cx: f64, cy: f64, r: f64, n: usize) -> RoiPolygon {
        let v = (0..n)
            .map(|i| {
                let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                [cx + r * t.cos(), cy + r * t.sin()]
            })
            .collect();
        RoiPolygon::new(v).unwrap()
    }

    #[test]
    fn square_covers_three_by_three() {
        let m = rasterize_polygon(&square(0.5, 3.5), 10, 10).unwrap();
        assert_eq!(m.count(), 9);
        for (x, y) in m.pixels() {
            assert!((1..=3).contains(&x) && (1..=3).contains(&y));
        }
    }

    #[test]
    fn polygon_outside_image() {
        let tri = RoiPolygon::new(vec![[20.0, 20.0], [25.0, 20.0], [22.0, 24.0]]).unwrap();
        assert!(matches!(rasterize_polygon(&tri, 10, 10), Err(Error::OutOfBounds)));
    }

    #[test]
    fn polygon_between_pixel_centres_is_empty() {
        let tiny = RoiPolygon::new(vec![[1.1, 1.1], [1.4, 1.1], [1.3, 1.4]]).unwrap();
        assert!(matches!(rasterize_polygon(&tiny, 10, 10), Err(Error::EmptyRoi)));
    }

    #[test]
    fn self_intersecting_polygon_rejected() {
        let bowtie = vec![[0.0, 0.0], [4.0, 4.0], [4.0, 0.0], [0.0, 4.0]];
        assert!(RoiPolygon::new(bowtie).is_err());
        assert!(RoiPolygon::new(vec![[0.0, 0.0], [1.0, 0.0]]).is_err());
    }

    #[test]
    fn circle_area_matches_point_test() {
        let poly = circle_polygon(32.0, 32.0, 20.0, 720);
        let m = rasterize_polygon(&poly, 64, 64).unwrap();
        // oracle: direct distance test at each pixel centre
        let oracle = (0..64 * 64)
            .filter(|i| {
                let (x, y) = ((i % 64) as f64, (i / 64) as f64);
                (x - 32.0).powi(2) + (y - 32.0).powi(2) < 400.0
            })
            .count();
        let area = std::f64::consts::PI * 400.0;
        assert!((m.count() as f64 - area).abs() / area < 0.02);
        assert!((m.count() as f64 - oracle as f64).abs() / (oracle as f64) < 0.01);
    }

    #[test]
    fn ring_of_single_pixel_is_four_neighbourhood() {
        let mut m = RoiMask::empty(5, 5);
        m.set(2, 2, true);
        let ring = ring_region(&m, 1).unwrap();
        let px: Vec<_> = ring.pixels().collect();
        assert_eq!(px, vec![(2, 1), (1, 2), (3, 2), (2, 3)]);
    }

    #[test]
    fn ring_clipped_at_border() {
        let m = RoiMask::from_fn(10, 10, |x, y| x < 3 && y < 3);
        let ring = ring_region(&m, 3).unwrap();
        assert_eq!(ring.width(), 10);
        assert!(ring.count() > 0);
        assert_eq!(ring.and(&m).count(), 0);
    }

    #[test]
    fn ring_area_of_disc() {
        let disc = RoiMask::from_fn(80, 80, |x, y| {
            (x as f64 - 40.0).powi(2) + (y as f64 - 40.0).powi(2) <= 400.0
        });
        let ring = ring_region(&disc, 5).unwrap();
        // oracle: exhaustive distance-to-mask scan
        let inside: Vec<(f64, f64)> = disc.pixels().map(|(x, y)| (x as f64, y as f64)).collect();
        let oracle = (0..80 * 80)
            .filter(|&i| {
                let (x, y) = ((i % 80) as f64, (i / 80) as f64);
                !disc.get(i % 80, i / 80) && inside.iter().any(|&(a, b)| (a - x).powi(2) + (b - y).powi(2) <= 25.0)
            })
            .count();
        assert_eq!(ring.count(), oracle);
        let expected = std::f64::consts::PI * (625.0 - 400.0);
        assert!((ring.count() as f64 - expected).abs() / expected < 0.05);
    }

    #[test]
    fn erode_then_band() {
        let m = RoiMask::from_fn(20, 20, |x, y| (5..15).contains(&x) && (5..15).contains(&y));
        let e = m.erode(2.0);
        assert_eq!(e.count(), 36);
    }

    #[test]
    fn components_sorted_by_size() {
        let m = RoiMask::from_fn(10, 10, |x, y| (x < 2 && y < 2) || (x > 5 && y > 5));
        let comps = m.components();
        assert_eq!(comps.len(), 2);
        assert_eq!(comps[0].count(), 16);
        assert_eq!(comps[1].count(), 4);
        // diagonal touch is one 8-component
        let diag = RoiMask::from_fn(4, 4, |x, y| x == y);
        assert_eq!(diag.components().len(), 1);
    }

    proptest! {
        #[test]
        fn ring_disjoint_and_nonempty(cx in 2usize..18, cy in 2usize..18, r in 0.0f64..4.0, w in 1usize..4) {
            let m = RoiMask::from_fn(20, 20, |x, y| {
                (x as f64 - cx as f64).powi(2) + (y as f64 - cy as f64).powi(2) <= r * r
            });
            let ring = ring_region(&m, w).unwrap();
            prop_assert_eq!(ring.and(&m).count(), 0);
            prop_assert!(ring.count() > 0);
        }
    }
}
