use crate::error::{Error, Result};
use crate::imaging::mask::NEIGHBORS_8;
use crate::imaging::RoiMask;

/// Closed boundary walk through pixel centres, counter-clockwise as displayed
/// (image rows grow downwards). Consecutive points are 8-adjacent and the last
/// point connects back to the first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContourPath {
    points: Vec<(i64, i64)>,
}

impl ContourPath {
    pub fn points(&self) -> &[(i64, i64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Twice the signed shoelace area in image coordinates. Negative for a
    /// counter-clockwise walk on screen.
    pub fn signed_area2(&self) -> i64 {
        let n = self.points.len();
        (0..n)
            .map(|i| {
                let (x1, y1) = self.points[i];
                let (x2, y2) = self.points[(i + 1) % n];
                x1 * y2 - x2 * y1
            })
            .sum()
    }

    /// Chain-code length: 1 per axial step, √2 per diagonal step, including the closing step.
    pub fn chain_length(&self) -> f64 {
        let n = self.points.len();
        if n < 2 {
            return 0.0;
        }
        (0..n)
            .map(|i| {
                let (x1, y1) = self.points[i];
                let (x2, y2) = self.points[(i + 1) % n];
                if x1 != x2 && y1 != y2 {
                    std::f64::consts::SQRT_2
                } else {
                    1.0
                }
            })
            .sum()
    }

    /// Length of the closed polygon through the midpoints of consecutive
    /// contour steps. Cancels most of the staircase overshoot of the raw
    /// chain length on oblique boundaries while leaving axial runs exact.
    pub fn perimeter(&self) -> f64 {
        let n = self.points.len();
        if n < 2 {
            return 0.0;
        }
        let mid = |i: usize| {
            let (x1, y1) = self.points[i % n];
            let (x2, y2) = self.points[(i + 1) % n];
            (0.5 * (x1 + x2) as f64, 0.5 * (y1 + y2) as f64)
        };
        (0..n)
            .map(|i| {
                let (ax, ay) = mid(i);
                let (bx, by) = mid(i + 1);
                (bx - ax).hypot(by - ay)
            })
            .sum()
    }
}

fn direction_of(dx: i64, dy: i64) -> usize {
    NEIGHBORS_8
        .iter()
        .position(|&d| d == (dx, dy))
        .expect("not an 8-neighbour offset")
}

/// Moore-neighbour tracing of the outer boundary of a single-component mask.
///
/// The walk stops when the first move out of the start pixel is about to be
/// repeated (Jacob's criterion), so pixels on one-pixel-wide spurs appear once
/// per direction of travel.
pub fn trace_boundary(mask: &RoiMask) -> Result<ContourPath> {
    let Some((sx, sy)) = mask.pixels().next() else {
        return Err(Error::EmptyRoi);
    };
    let n_comp = mask.components().len();
    if n_comp > 1 {
        return Err(Error::MultipleComponents(n_comp));
    }
    let start = (sx as i64, sy as i64);
    // raster order guarantees the west neighbour is background
    let mut backtrack = 4usize;
    let mut current = start;
    let mut points = vec![start];
    let mut first_move: Option<(i64, i64)> = None;

    loop {
        let mut next = None;
        for k in 1..=8 {
            let dir = (backtrack + k) % 8;
            let (dx, dy) = NEIGHBORS_8[dir];
            let cand = (current.0 + dx, current.1 + dy);
            if mask.contains(cand.0, cand.1) {
                let (pdx, pdy) = NEIGHBORS_8[(backtrack + k - 1) % 8];
                let prev = (current.0 + pdx, current.1 + pdy);
                next = Some((cand, direction_of(prev.0 - cand.0, prev.1 - cand.1)));
                break;
            }
        }
        let Some((cand, new_backtrack)) = next else {
            // isolated pixel
            break;
        };
        if current == start {
            match first_move {
                None => first_move = Some(cand),
                Some(fm) if fm == cand => break,
                Some(_) => {}
            }
        }
        points.push(cand);
        backtrack = new_backtrack;
        current = cand;
    }
    // the start pixel was pushed again on return; drop the duplicate
    if points.len() > 1 && points.last() == Some(&start) {
        points.pop();
    }
    let mut path = ContourPath { points };
    if path.signed_area2() > 0 {
        path.points[1..].reverse();
    }
    Ok(path)
}
