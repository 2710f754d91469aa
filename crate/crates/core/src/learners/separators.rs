//! Every labeling of a planar point set realizable by a closed halfspace.
//!
//! For a direction `w`, the halfspaces `w·x + b ≥ 0` realize exactly the
//! prefixes of the points sorted by descending projection. The sorted order
//! only changes where `w` is perpendicular to the difference of two points,
//! so one direction inside each arc between consecutive critical angles sees
//! every realizable labeling. A cut that exists at a critical angle keeps its
//! gap under a small rotation, so the critical angles themselves add nothing.

use std::collections::HashSet;
use std::f64::consts::{PI, TAU};

use super::FiniteClass;
use crate::error::{Error, Result};
use crate::model::Predictor;

pub const MAX_SEPARATOR_POINTS: usize = 20;

const ANGLE_MERGE: f64 = 1e-12;

/// One halfspace per realizable labeling of at most
/// [`MAX_SEPARATOR_POINTS`] points.
pub fn enumerate_linear_separators_2d(points: &[[f64; 2]]) -> Result<FiniteClass> {
    enumerate_linear_separators_2d_capped(points, MAX_SEPARATOR_POINTS)
}

/// Same as [`enumerate_linear_separators_2d`] with a caller-chosen cap. The
/// class has `O(n²)` members.
pub fn enumerate_linear_separators_2d_capped(
    points: &[[f64; 2]],
    max_points: usize,
) -> Result<FiniteClass> {
    let n = points.len();
    if n > max_points {
        return Err(Error::TooManyPoints {
            got: n,
            max: max_points,
        });
    }
    if let Some(p) = points
        .iter()
        .find(|p| !(p[0].is_finite() && p[1].is_finite()))
    {
        return Err(Error::InvalidParameter(format!("non-finite point {p:?}")));
    }

    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut add = |h: Predictor| {
        let mut bits = vec![0u64; n.div_ceil(64).max(1)];
        for (i, p) in points.iter().enumerate() {
            if h.predict(p) == 1.0 {
                bits[i / 64] |= 1 << (i % 64);
            }
        }
        if seen.insert(bits) {
            out.push(h);
        }
    };
    add(Predictor::Halfspace {
        weights: vec![0.0, 0.0],
        bias: -1.0,
    });
    add(Predictor::Halfspace {
        weights: vec![0.0, 0.0],
        bias: 0.0,
    });
    if n == 0 {
        return FiniteClass::new(out);
    }

    let mut angles = Vec::with_capacity(n * (n - 1));
    for i in 0..n {
        for j in i + 1..n {
            let (dx, dy) = (points[j][0] - points[i][0], points[j][1] - points[i][1]);
            if dx == 0.0 && dy == 0.0 {
                continue;
            }
            let a = (dy.atan2(dx) + PI / 2.0).rem_euclid(TAU);
            angles.push(a);
            angles.push((a + PI).rem_euclid(TAU));
        }
    }
    angles.sort_by(f64::total_cmp);
    angles.dedup_by(|b, a| *b - *a <= ANGLE_MERGE);

    let cells: Vec<f64> = if angles.is_empty() {
        vec![0.0]
    } else {
        let last = angles.len() - 1;
        let mut c: Vec<f64> = angles.windows(2).map(|w| (w[0] + w[1]) / 2.0).collect();
        c.push(((angles[last] + angles[0] + TAU) / 2.0).rem_euclid(TAU));
        c
    };

    let mut order: Vec<usize> = (0..n).collect();
    let mut prev = order.clone();
    let mut proj = vec![0.0; n];
    let mut diff = vec![0i32; n];
    for (cell, &phi) in cells.iter().enumerate() {
        let (w0, w1) = (phi.cos(), phi.sin());
        for (p, x) in proj.iter_mut().zip(points) {
            *p = w0 * x[0] + w1 * x[1];
        }
        // Nearly sorted from the previous cell, so insertion sort is cheap.
        for k in 1..n {
            let mut m = k;
            while m > 0 && proj[order[m - 1]] < proj[order[m]] {
                order.swap(m - 1, m);
                m -= 1;
            }
        }
        let mut nonzero = 0usize;
        for t in 1..n {
            for (idx, delta) in [(prev[t - 1], 1), (order[t - 1], -1)] {
                let before = diff[idx];
                diff[idx] += delta;
                if before == 0 {
                    nonzero += 1;
                } else if diff[idx] == 0 {
                    nonzero -= 1;
                }
            }
            let changed = cell == 0 || nonzero != 0;
            let (hi, lo) = (proj[order[t - 1]], proj[order[t]]);
            if changed && hi > lo {
                let mid = hi / 2.0 + lo / 2.0;
                let v = if mid > lo && mid <= hi { mid } else { hi };
                add(Predictor::Halfspace {
                    weights: vec![w0, w1],
                    bias: -v,
                });
            }
        }
        // Undo the last element so `diff` is all zero again.
        diff[prev[n - 1]] += 1;
        diff[order[n - 1]] -= 1;
        prev.copy_from_slice(&order);
    }
    FiniteClass::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labelings(class: &FiniteClass, pts: &[[f64; 2]]) -> HashSet<Vec<u8>> {
        class
            .classifiers()
            .iter()
            .map(|h| pts.iter().map(|p| h.predict(p) as u8).collect())
            .collect()
    }

    /// Labelings seen by a dense sweep of directions.
    fn dense(pts: &[[f64; 2]], steps: usize) -> HashSet<Vec<u8>> {
        let mut out = HashSet::new();
        out.insert(vec![0; pts.len()]);
        out.insert(vec![1; pts.len()]);
        for s in 0..steps {
            let phi = TAU * s as f64 / steps as f64;
            let proj: Vec<f64> = pts
                .iter()
                .map(|p| phi.cos() * p[0] + phi.sin() * p[1])
                .collect();
            for &t in &proj {
                out.insert(proj.iter().map(|&q| u8::from(q >= t)).collect());
            }
        }
        out
    }

    #[test]
    fn two_points_all_labelings() {
        let pts = [[0.0, 0.0], [1.0, 0.5]];
        let c = enumerate_linear_separators_2d(&pts).unwrap();
        assert_eq!(labelings(&c, &pts).len(), 4);
    }

    #[test]
    fn collinear_alternation_unrealizable() {
        let pts = [[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]];
        let l = labelings(&enumerate_linear_separators_2d(&pts).unwrap(), &pts);
        assert!(!l.contains(&vec![1, 0, 1]));
        assert!(!l.contains(&vec![0, 1, 0]));
        assert_eq!(l.len(), 6);
    }

    #[test]
    fn parity_square() {
        let pts = [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
        let l = labelings(&enumerate_linear_separators_2d(&pts).unwrap(), &pts);
        assert_eq!(l.len(), 14);
        assert!(!l.contains(&vec![0, 1, 1, 0]));
        assert!(!l.contains(&vec![1, 0, 0, 1]));
    }

    #[test]
    fn matches_dense_sweep_on_small_sets() {
        let sets: [&[[f64; 2]]; 3] = [
            &[[0.0, 0.0], [3.0, 1.0], [1.0, 2.0], [2.0, -1.0], [0.5, 0.7]],
            &[
                [0.0, 0.0],
                [1.0, 0.0],
                [2.0, 0.0],
                [1.0, 1.0],
                [1.0, -1.0],
                [1.0, 0.0],
            ],
            &[[-1.0, 2.0], [0.3, 0.1], [2.2, 2.0], [1.1, -0.4]],
        ];
        for pts in sets {
            let exact = labelings(&enumerate_linear_separators_2d(pts).unwrap(), pts);
            assert_eq!(exact, dense(pts, 200_000), "{pts:?}");
        }
    }

    #[test]
    fn cap_enforced() {
        let pts = vec![[0.0, 0.0]; 21];
        assert!(matches!(
            enumerate_linear_separators_2d(&pts),
            Err(Error::TooManyPoints { got: 21, max: 20 })
        ));
        assert!(enumerate_linear_separators_2d_capped(&pts, 25).is_ok());
    }
}
