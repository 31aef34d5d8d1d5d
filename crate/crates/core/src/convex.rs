//! Closed-form projections onto the target sets used by the approachability
//! engine, and the supporting half-space at a point outside the target.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConvexError {
    #[error("dimension mismatch: point has dim {point}, target has dim {target}")]
    DimensionMismatch { point: usize, target: usize },
    #[error("half-space normal must be nonzero")]
    ZeroNormal,
    #[error("box has lower[{0}] > upper[{0}]")]
    EmptyBox(usize),
}

/// Closed convex target sets with closed-form projections.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetSet {
    /// A single point.
    Singleton(Vec<f64>),
    /// { x : normal.x <= offset }.
    HalfSpace { normal: Vec<f64>, offset: f64 },
    /// { x : x_i <= 0 for all i } in the given dimension.
    NonpositiveOrthant(usize),
    /// { x : lower <= x <= upper } componentwise.
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

impl TargetSet {
    #[must_use]
    pub fn dim(&self) -> usize {
        match self {
            TargetSet::Singleton(p) => p.len(),
            TargetSet::HalfSpace { normal, .. } => normal.len(),
            TargetSet::NonpositiveOrthant(d) => *d,
            TargetSet::Box { lower, .. } => lower.len(),
        }
    }
}

/// Separating hyperplane { x : normal.x = offset }, oriented so the target
/// lies in normal.x <= offset.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperplane {
    pub normal: Vec<f64>,
    pub offset: f64,
}

/// Result of `supporting_halfspace`.
#[derive(Debug, Clone, PartialEq)]
pub enum Support {
    /// The point is in the target (distance below 1e-12).
    Inside,
    Separating(Hyperplane),
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Euclidean projection of `x` onto `z`, returning the projection and the
/// distance to it.
pub fn project(x: &[f64], z: &TargetSet) -> Result<(Vec<f64>, f64), ConvexError> {
    if x.len() != z.dim() {
        return Err(ConvexError::DimensionMismatch {
            point: x.len(),
            target: z.dim(),
        });
    }
    let p = match z {
        TargetSet::Singleton(p) => p.clone(),
        TargetSet::HalfSpace { normal, offset } => {
            let nn = dot(normal, normal);
            if nn == 0.0 {
                return Err(ConvexError::ZeroNormal);
            }
            let excess = dot(normal, x) - offset;
            if excess <= 0.0 {
                x.to_vec()
            } else {
                let s = excess / nn;
                x.iter().zip(normal).map(|(xi, ni)| xi - s * ni).collect()
            }
        }
        TargetSet::NonpositiveOrthant(_) => x.iter().map(|&v| v.min(0.0)).collect(),
        TargetSet::Box { lower, upper } => {
            if let Some(i) = (0..lower.len()).find(|&i| lower[i] > upper[i]) {
                return Err(ConvexError::EmptyBox(i));
            }
            x.iter()
                .zip(lower.iter().zip(upper))
                .map(|(&v, (&lo, &hi))| v.clamp(lo, hi))
                .collect()
        }
    };
    let dist = x
        .iter()
        .zip(&p)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok((p, dist))
}

/// Half-space through the projection of `qbar`, with outward normal
/// `qbar - P` and offset `P.(qbar - P)`; the target set is contained in it.
pub fn supporting_halfspace(qbar: &[f64], z: &TargetSet) -> Result<Support, ConvexError> {
    let (p, dist) = project(qbar, z)?;
    if dist < 1e-12 {
        return Ok(Support::Inside);
    }
    let normal: Vec<f64> = qbar.iter().zip(&p).map(|(q, pi)| q - pi).collect();
    let offset = dot(&p, &normal);
    Ok(Support::Separating(Hyperplane { normal, offset }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn singleton_projection() {
        let z = TargetSet::Singleton(vec![1.0, 2.0]);
        let (p, d) = project(&[4.0, 6.0], &z).unwrap();
        assert_eq!(p, vec![1.0, 2.0]);
        // Offset (3,4): distance 5.
        assert!((d - 5.0).abs() < 1e-12);
    }

    #[test]
    fn halfspace_projection_scalar() {
        // {x <= 0} in one dimension: project(2) = 0, dist 2; project(-1) = -1.
        let z = TargetSet::HalfSpace {
            normal: vec![1.0],
            offset: 0.0,
        };
        let (p, d) = project(&[2.0], &z).unwrap();
        assert_eq!(p, vec![0.0]);
        assert_eq!(d, 2.0);
        let (p, d) = project(&[-1.0], &z).unwrap();
        assert_eq!(p, vec![-1.0]);
        assert_eq!(d, 0.0);
    }

    #[test]
    fn halfspace_projection_unnormalized_normal() {
        // normal (0,2), offset 2 is the set {y <= 1}: project (3,4) -> (3,1).
        let z = TargetSet::HalfSpace {
            normal: vec![0.0, 2.0],
            offset: 2.0,
        };
        let (p, d) = project(&[3.0, 4.0], &z).unwrap();
        assert!((p[0] - 3.0).abs() < 1e-12 && (p[1] - 1.0).abs() < 1e-12);
        assert!((d - 3.0).abs() < 1e-12);
    }

    #[test]
    fn orthant_projection() {
        let z = TargetSet::NonpositiveOrthant(2);
        let (p, d) = project(&[1.0, -2.0], &z).unwrap();
        assert_eq!(p, vec![0.0, -2.0]);
        assert_eq!(d, 1.0);
    }

    #[test]
    fn box_projection_clamps() {
        let z = TargetSet::Box {
            lower: vec![0.0, 0.0],
            upper: vec![1.0, 2.0],
        };
        let (p, d) = project(&[2.0, -1.0], &z).unwrap();
        assert_eq!(p, vec![1.0, 0.0]);
        assert!((d - 2.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let z = TargetSet::NonpositiveOrthant(3);
        let e = project(&[1.0], &z).unwrap_err();
        assert_eq!(
            e,
            ConvexError::DimensionMismatch {
                point: 1,
                target: 3
            }
        );
    }

    #[test]
    fn inside_point_supports_nothing() {
        let z = TargetSet::NonpositiveOrthant(2);
        assert_eq!(
            supporting_halfspace(&[-0.5, -0.1], &z).unwrap(),
            Support::Inside
        );
    }

    #[test]
    fn supporting_halfspace_fields() {
        // qbar = (1,-2) against the orthant: P = (0,-2), normal (1,0), offset 0.
        let z = TargetSet::NonpositiveOrthant(2);
        match supporting_halfspace(&[1.0, -2.0], &z).unwrap() {
            Support::Separating(h) => {
                assert_eq!(h.normal, vec![1.0, 0.0]);
                assert_eq!(h.offset, 0.0);
            }
            Support::Inside => panic!("expected separation"),
        }
    }

    /// Brute-force oracle: no sampled point of Z is closer to x than the
    /// claimed distance (up to grid tolerance).
    fn grid_check(x: &[f64], zpoints: &[Vec<f64>], dist: f64) {
        for zp in zpoints {
            let dz = x
                .iter()
                .zip(zp)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(
                dz >= dist - 1e-6,
                "grid point closer than projection: {dz} < {dist}"
            );
        }
    }

    #[test]
    fn grid_oracle_orthant() {
        let z = TargetSet::NonpositiveOrthant(2);
        let x = [0.7, 0.3];
        let (_, d) = project(&x, &z).unwrap();
        let mut pts = Vec::new();
        for i in 0..60 {
            for j in 0..60 {
                pts.push(vec![
                    -3.0 + 0.05 * i as f64 - 0.05,
                    -3.0 + 0.05 * j as f64 - 0.05,
                ]);
            }
        }
        let pts: Vec<Vec<f64>> = pts
            .into_iter()
            .filter(|p| p.iter().all(|&v| v <= 0.0))
            .collect();
        grid_check(&x, &pts, d);
    }

    /// Draws a point of Z for the obtuseness test.
    fn member(z: &TargetSet, raw: &[f64]) -> Vec<f64> {
        match z {
            TargetSet::Singleton(p) => p.clone(),
            _ => project(raw, z).unwrap().0,
        }
    }

    /// Deterministically builds one of the four target variants from plain
    /// sampled parameters (avoids nested strategies in the property body).
    fn build_target(variant: usize, anchor: &[f64], widths: &[f64], offset: f64) -> TargetSet {
        match variant % 4 {
            0 => TargetSet::Singleton(anchor.to_vec()),
            1 => {
                let mut normal = anchor.to_vec();
                if dot(&normal, &normal) < 1e-3 {
                    normal[0] += 1.0;
                }
                TargetSet::HalfSpace { normal, offset }
            }
            2 => TargetSet::NonpositiveOrthant(anchor.len()),
            _ => {
                let upper = anchor
                    .iter()
                    .zip(widths)
                    .map(|(l, w)| l + w.abs())
                    .collect();
                TargetSet::Box {
                    lower: anchor.to_vec(),
                    upper,
                }
            }
        }
    }

    proptest! {
        #[test]
        fn projection_is_idempotent(
            dim in 1usize..5,
            seeds in prop::collection::vec(-8.0..8.0f64, 10),
        ) {
            let x = &seeds[..dim];
            for z in [
                TargetSet::NonpositiveOrthant(dim),
                TargetSet::HalfSpace { normal: vec![1.0; dim], offset: 0.5 },
            ] {
                let (p, _) = project(x, &z).unwrap();
                let (pp, d2) = project(&p, &z).unwrap();
                prop_assert!(d2 < 1e-9);
                for (a, b) in p.iter().zip(&pp) {
                    prop_assert!((a - b).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn obtuseness_and_containment(
            (_dim, xs, zs, anchor, widths) in (1usize..5).prop_flat_map(|d| (
                Just(d),
                prop::collection::vec(-8.0..8.0f64, d),
                prop::collection::vec(prop::collection::vec(-8.0..8.0f64, d), 8),
                prop::collection::vec(-5.0..5.0f64, d),
                prop::collection::vec(0.01..4.0f64, d),
            )),
            variant in 0usize..4,
            offset in -4.0..4.0f64,
        ) {
            let z = build_target(variant, &anchor, &widths, offset);
            let (p, dist) = project(&xs, &z).unwrap();
            // Obtuseness: (x-P).(z-P) <= tol for members z.
            let xm: Vec<f64> = xs.iter().zip(&p).map(|(a, b)| a - b).collect();
            for raw in &zs {
                let m = member(&z, raw);
                let zm: Vec<f64> = m.iter().zip(&p).map(|(a, b)| a - b).collect();
                prop_assert!(dot(&xm, &zm) <= 1e-9);
            }
            // Target contained in the supporting half-space.
            if dist >= 1e-12 {
                if let Support::Separating(h) = supporting_halfspace(&xs, &z).unwrap() {
                    for raw in &zs {
                        let m = member(&z, raw);
                        prop_assert!(dot(&h.normal, &m) <= h.offset + 1e-9);
                    }
                }
            }
        }
    }
}
