//! Hausdorff distance between control-point clouds.
//!
//! The directed distance uses the early-break scan: once a point of `a` has
//! found a neighbour in `b` closer than the running maximum it can no longer
//! raise the result, so the inner loop stops. The answer is identical to the
//! exhaustive max-min.

use crate::error::{ContourError, Result};

pub type Point = [f64; 2];

#[inline]
fn dist(p: &Point, q: &Point) -> f64 {
    let dx = p[0] - q[0];
    let dy = p[1] - q[1];
    (dx * dx + dy * dy).sqrt()
}

/// `max_{p in a} min_{q in b} |p - q|`.
pub fn directed_hausdorff(a: &[Point], b: &[Point]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(ContourError::EmptyCloud);
    }
    let mut cmax = 0.0f64;
    for p in a {
        let mut cmin = f64::INFINITY;
        for q in b {
            let d = dist(p, q);
            if d < cmin {
                cmin = d;
                if cmin < cmax {
                    break;
                }
            }
        }
        if cmin > cmax {
            cmax = cmin;
        }
    }
    Ok(cmax)
}

pub fn hausdorff(a: &[Point], b: &[Point]) -> Result<f64> {
    Ok(directed_hausdorff(a, b)?.max(directed_hausdorff(b, a)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(a: &[Point], b: &[Point]) -> f64 {
        let directed = |x: &[Point], y: &[Point]| {
            x.iter()
                .map(|p| y.iter().map(|q| dist(p, q)).fold(f64::INFINITY, f64::min))
                .fold(f64::NEG_INFINITY, f64::max)
        };
        directed(a, b).max(directed(b, a))
    }

    #[test]
    fn identical_sets_are_zero() {
        let a = [[0.1, 0.2], [0.5, 0.5], [0.9, 0.3]];
        assert_eq!(hausdorff(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn single_pair_is_euclidean() {
        assert_eq!(hausdorff(&[[0.0, 0.0]], &[[3.0, 4.0]]).unwrap(), 5.0);
    }

    #[test]
    fn asymmetric_directions_take_the_max() {
        let a = [[0.0, 0.0], [1.0, 0.0]];
        let b = [[0.0, 1.0]];
        assert_eq!(directed_hausdorff(&b, &a).unwrap(), 1.0);
        assert_eq!(hausdorff(&a, &b).unwrap(), 2f64.sqrt());
    }

    #[test]
    fn empty_cloud_is_an_error() {
        assert!(matches!(hausdorff(&[], &[[0.0, 0.0]]), Err(ContourError::EmptyCloud)));
        assert!(matches!(hausdorff(&[[0.0, 0.0]], &[]), Err(ContourError::EmptyCloud)));
    }

    fn cloud() -> impl Strategy<Value = Vec<Point>> {
        prop::collection::vec([0.0..1.0f64, 0.0..1.0f64], 1..=50)
    }

    proptest! {
        #[test]
        fn matches_brute_force(a in cloud(), b in cloud()) {
            prop_assert_eq!(hausdorff(&a, &b).unwrap(), brute(&a, &b));
        }

        #[test]
        fn symmetric_and_nonnegative(a in cloud(), b in cloud()) {
            let ab = hausdorff(&a, &b).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(ab, hausdorff(&b, &a).unwrap());
        }

        #[test]
        fn triangle_inequality(a in cloud(), b in cloud(), c in cloud()) {
            let ac = hausdorff(&a, &c).unwrap();
            let ab = hausdorff(&a, &b).unwrap();
            let bc = hausdorff(&b, &c).unwrap();
            prop_assert!(ac <= ab + bc + 1e-12);
        }

        #[test]
        fn zero_iff_same_point_set(a in cloud()) {
            let mut shuffled = a.clone();
            shuffled.reverse();
            shuffled.extend_from_slice(&a[..1]);
            prop_assert_eq!(hausdorff(&a, &shuffled).unwrap(), 0.0);
            let mut moved = a.clone();
            moved.push([2.0, 2.0]);
            prop_assert!(hausdorff(&a, &moved).unwrap() > 0.0);
        }
    }
}
