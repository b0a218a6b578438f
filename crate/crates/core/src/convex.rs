//! Convex constraint sets and metric projections onto them.
//!
//! Boxes, balls and halfspaces project in closed form. Intersections use
//! Dykstra's algorithm, which converges to the metric projection onto the
//! intersection and not merely to some feasible point.

use thiserror::Error;

use crate::linalg::{dot, norm};

/// Membership tolerance used throughout the crate.
pub const MEMBERSHIP_TOL: f64 = 1e-8;
/// Dykstra stops once the summed correction change of a cycle drops below this.
pub const DYKSTRA_RESIDUAL_TOL: f64 = 1e-10;
pub const DYKSTRA_MAX_CYCLES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConvexError {
    #[error("dimension mismatch: set lives in R^{expected}, point has {got} components")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("set has zero ambient dimension")]
    ZeroDimension,
    #[error("non-finite value in set description")]
    NonFinite,
    #[error("box bounds inverted at coordinate {coord}: lo {lo} > hi {hi}")]
    InvertedBox { coord: usize, lo: f64, hi: f64 },
    #[error("ball radius must be positive, got {0}")]
    BadRadius(f64),
    #[error("halfspace normal has zero length")]
    ZeroNormal,
    #[error("intersection needs at least one member")]
    EmptyMemberList,
    #[error("intersection members live in different dimensions ({0} and {1})")]
    MixedDimensions(usize, usize),
    #[error("Dykstra projection did not converge in {cycles} cycles (residual {residual:e}); the intersection is possibly empty")]
    PossiblyEmptyIntersection { cycles: usize, residual: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxSet {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoxSet {
    pub fn lo(&self) -> &[f64] {
        &self.lo
    }
    pub fn hi(&self) -> &[f64] {
        &self.hi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BallSet {
    center: Vec<f64>,
    radius: f64,
}

impl BallSet {
    pub fn center(&self) -> &[f64] {
        &self.center
    }
    pub fn radius(&self) -> f64 {
        self.radius
    }
}

/// `{x : normal . x <= offset}` with a unit normal.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfspaceSet {
    normal: Vec<f64>,
    offset: f64,
}

impl HalfspaceSet {
    pub fn normal(&self) -> &[f64] {
        &self.normal
    }
    pub fn offset(&self) -> f64 {
        self.offset
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntersectionSet {
    members: Vec<ConvexSetSpec>,
}

impl IntersectionSet {
    pub fn members(&self) -> &[ConvexSetSpec] {
        &self.members
    }
}

/// Declarative closed convex set.
#[derive(Debug, Clone, PartialEq)]
pub enum ConvexSetSpec {
    Box(BoxSet),
    Ball(BallSet),
    Halfspace(HalfspaceSet),
    Intersection(IntersectionSet),
}

/// Result of projecting a point.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult {
    pub point: Vec<f64>,
    /// Dykstra cycles; 0 for closed-form projections.
    pub iterations: usize,
    /// Final Dykstra residual; 0 for closed-form projections.
    pub residual: f64,
}

fn check_finite(v: &[f64]) -> Result<(), ConvexError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(ConvexError::NonFinite)
    }
}

impl ConvexSetSpec {
    pub fn new_box(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, ConvexError> {
        if lo.is_empty() {
            return Err(ConvexError::ZeroDimension);
        }
        if lo.len() != hi.len() {
            return Err(ConvexError::DimensionMismatch { expected: lo.len(), got: hi.len() });
        }
        check_finite(&lo)?;
        check_finite(&hi)?;
        if let Some(coord) = (0..lo.len()).find(|&k| lo[k] > hi[k]) {
            return Err(ConvexError::InvertedBox { coord, lo: lo[coord], hi: hi[coord] });
        }
        Ok(Self::Box(BoxSet { lo, hi }))
    }

    /// 1-D interval `[lo, hi]`.
    pub fn interval(lo: f64, hi: f64) -> Result<Self, ConvexError> {
        Self::new_box(vec![lo], vec![hi])
    }

    pub fn new_ball(center: Vec<f64>, radius: f64) -> Result<Self, ConvexError> {
        if center.is_empty() {
            return Err(ConvexError::ZeroDimension);
        }
        check_finite(&center)?;
        if !(radius.is_finite() && radius > 0.0) {
            return Err(ConvexError::BadRadius(radius));
        }
        Ok(Self::Ball(BallSet { center, radius }))
    }

    /// `{x : normal . x <= offset}`. A non-unit normal is rescaled together
    /// with the offset; normals already of unit length (to rounding) are kept
    /// bit-for-bit.
    pub fn new_halfspace(normal: Vec<f64>, offset: f64) -> Result<Self, ConvexError> {
        if normal.is_empty() {
            return Err(ConvexError::ZeroDimension);
        }
        check_finite(&normal)?;
        check_finite(&[offset])?;
        let len = norm(&normal);
        if len == 0.0 {
            return Err(ConvexError::ZeroNormal);
        }
        let (normal, offset) = if (len - 1.0).abs() <= 4.0 * f64::EPSILON {
            (normal, offset)
        } else {
            (normal.iter().map(|c| c / len).collect(), offset / len)
        };
        Ok(Self::Halfspace(HalfspaceSet { normal, offset }))
    }

    pub fn new_intersection(members: Vec<ConvexSetSpec>) -> Result<Self, ConvexError> {
        let first = members.first().ok_or(ConvexError::EmptyMemberList)?.dim();
        if let Some(bad) = members.iter().map(|m| m.dim()).find(|&d| d != first) {
            return Err(ConvexError::MixedDimensions(first, bad));
        }
        Ok(Self::Intersection(IntersectionSet { members }))
    }

    /// Ambient dimension.
    pub fn dim(&self) -> usize {
        match self {
            Self::Box(b) => b.lo.len(),
            Self::Ball(b) => b.center.len(),
            Self::Halfspace(h) => h.normal.len(),
            Self::Intersection(i) => i.members[0].dim(),
        }
    }

    /// The same set shifted by `v`.
    pub fn translated(&self, v: &[f64]) -> Result<Self, ConvexError> {
        self.check_dim(v)?;
        let shift = |a: &[f64]| a.iter().zip(v).map(|(x, d)| x + d).collect::<Vec<_>>();
        Ok(match self {
            Self::Box(b) => Self::Box(BoxSet { lo: shift(&b.lo), hi: shift(&b.hi) }),
            Self::Ball(b) => Self::Ball(BallSet { center: shift(&b.center), radius: b.radius }),
            Self::Halfspace(h) => Self::Halfspace(HalfspaceSet {
                normal: h.normal.clone(),
                offset: h.offset + dot(&h.normal, v),
            }),
            Self::Intersection(i) => Self::Intersection(IntersectionSet {
                members: i.members.iter().map(|m| m.translated(v)).collect::<Result<_, _>>()?,
            }),
        })
    }

    fn check_dim(&self, p: &[f64]) -> Result<(), ConvexError> {
        if p.len() != self.dim() {
            return Err(ConvexError::DimensionMismatch { expected: self.dim(), got: p.len() });
        }
        Ok(())
    }

    /// Primitive members with nested intersections flattened.
    fn primitives(&self) -> Vec<&ConvexSetSpec> {
        match self {
            Self::Intersection(i) => i.members.iter().flat_map(|m| m.primitives()).collect(),
            other => vec![other],
        }
    }

    /// Closed-form projection; only valid for non-intersection variants.
    fn project_primitive(&self, p: &[f64]) -> Vec<f64> {
        match self {
            Self::Box(b) => p
                .iter()
                .zip(b.lo.iter().zip(&b.hi))
                .map(|(&x, (&lo, &hi))| x.clamp(lo, hi))
                .collect(),
            Self::Ball(b) => {
                let diff: Vec<f64> = p.iter().zip(&b.center).map(|(x, c)| x - c).collect();
                let d = norm(&diff);
                if d <= b.radius {
                    p.to_vec()
                } else {
                    let s = b.radius / d;
                    b.center.iter().zip(&diff).map(|(c, e)| c + s * e).collect()
                }
            }
            Self::Halfspace(h) => {
                let excess = dot(&h.normal, p) - h.offset;
                if excess <= 0.0 {
                    p.to_vec()
                } else {
                    p.iter().zip(&h.normal).map(|(x, a)| x - excess * a).collect()
                }
            }
            Self::Intersection(_) => unreachable!("intersections are flattened before projection"),
        }
    }

    fn primitive_distance(&self, p: &[f64]) -> f64 {
        let q = self.project_primitive(p);
        p.iter().zip(&q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
    }
}

/// Appends a discrete description of where `p` sits relative to each
/// primitive face of `set`: per-coordinate below/inside/above for boxes and
/// inside/outside for balls and halfspaces. The projection is smooth in `p`
/// wherever this signature is locally constant (exactly so for primitive
/// sets), so integrators use changes in it to locate switching times.
pub fn face_signature(set: &ConvexSetSpec, p: &[f64], out: &mut Vec<u8>) {
    match set {
        ConvexSetSpec::Box(b) => out.extend(p.iter().zip(b.lo.iter().zip(&b.hi)).map(|(&x, (&lo, &hi))| {
            if x < lo {
                0
            } else if x > hi {
                2
            } else {
                1
            }
        })),
        ConvexSetSpec::Ball(b) => {
            let d2: f64 = p.iter().zip(&b.center).map(|(x, c)| (x - c).powi(2)).sum();
            out.push(u8::from(d2 <= b.radius * b.radius));
        }
        ConvexSetSpec::Halfspace(h) => out.push(u8::from(dot(&h.normal, p) <= h.offset)),
        ConvexSetSpec::Intersection(i) => i.members.iter().for_each(|m| face_signature(m, p, out)),
    }
}

/// Metric projection of `p` onto `set`.
pub fn project(set: &ConvexSetSpec, p: &[f64]) -> Result<ProjectionResult, ConvexError> {
    set.check_dim(p)?;
    check_finite(p)?;
    match set {
        ConvexSetSpec::Intersection(_) => dykstra(&set.primitives(), p),
        prim => Ok(ProjectionResult { point: prim.project_primitive(p), iterations: 0, residual: 0.0 }),
    }
}

fn dykstra(members: &[&ConvexSetSpec], p: &[f64]) -> Result<ProjectionResult, ConvexError> {
    let m = p.len();
    let mut x = p.to_vec();
    let mut corrections = vec![vec![0.0; m]; members.len()];
    let mut y = vec![0.0; m];
    let mut residual = f64::INFINITY;

    for cycle in 1..=DYKSTRA_MAX_CYCLES {
        residual = 0.0;
        for (set, corr) in members.iter().zip(corrections.iter_mut()) {
            for k in 0..m {
                y[k] = x[k] + corr[k];
            }
            x = set.project_primitive(&y);
            let mut change = 0.0;
            for k in 0..m {
                let updated = y[k] - x[k];
                change += (updated - corr[k]).powi(2);
                corr[k] = updated;
            }
            residual += change.sqrt();
        }
        if residual < DYKSTRA_RESIDUAL_TOL
            && members.iter().all(|s| s.primitive_distance(&x) <= MEMBERSHIP_TOL)
        {
            return Ok(ProjectionResult { point: x, iterations: cycle, residual });
        }
    }
    Err(ConvexError::PossiblyEmptyIntersection { cycles: DYKSTRA_MAX_CYCLES, residual })
}

/// Euclidean distance from `p` to the set.
pub fn distance(set: &ConvexSetSpec, p: &[f64]) -> Result<f64, ConvexError> {
    let proj = project(set, p)?;
    Ok(p.iter().zip(&proj.point).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
}

pub fn contains(set: &ConvexSetSpec, p: &[f64], tol: f64) -> Result<bool, ConvexError> {
    Ok(distance(set, p)? <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box2() -> ConvexSetSpec {
        ConvexSetSpec::new_box(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap()
    }

    fn box_cut() -> ConvexSetSpec {
        ConvexSetSpec::new_intersection(vec![
            ConvexSetSpec::new_box(vec![0.0, 0.0], vec![2.0, 2.0]).unwrap(),
            ConvexSetSpec::new_halfspace(vec![1.0, 1.0], 1.0).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn box_projection_clamps() {
        let r = project(&unit_box2(), &[2.0, -1.0]).unwrap();
        assert_eq!(r.point, vec![1.0, 0.0]);
        assert_eq!(r.iterations, 0);
        assert_eq!(r.residual, 0.0);
    }

    #[test]
    fn ball_projection_scales() {
        let ball = ConvexSetSpec::new_ball(vec![0.0, 0.0], 1.0).unwrap();
        let r = project(&ball, &[3.0, 4.0]).unwrap();
        assert!((r.point[0] - 0.6).abs() < 1e-15);
        assert!((r.point[1] - 0.8).abs() < 1e-15);
        assert!((distance(&ball, &[3.0, 4.0]).unwrap() - 4.0).abs() < 1e-15);
    }

    #[test]
    fn intersection_projection_kkt_point() {
        let r = project(&box_cut(), &[2.0, 2.0]).unwrap();
        assert!((r.point[0] - 0.5).abs() < 1e-8, "{:?}", r);
        assert!((r.point[1] - 0.5).abs() < 1e-8);
        let d = distance(&box_cut(), &[2.0, 2.0]).unwrap();
        assert!((d - (2.0f64 * 1.5 * 1.5).sqrt()).abs() < 1e-8);
    }

    #[test]
    fn intersection_projection_matches_grid_search() {
        // brute-force argmin over a 1e-3 grid of the box
        let set = box_cut();
        let p = [2.0, 2.0];
        let mut best = (f64::INFINITY, [0.0, 0.0]);
        let steps = 2000;
        for a in 0..=steps {
            for b in 0..=steps {
                let q = [a as f64 * 1e-3, b as f64 * 1e-3];
                if q[0] + q[1] <= 1.0 {
                    let d = (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2);
                    if d < best.0 {
                        best = (d, q);
                    }
                }
            }
        }
        let r = project(&set, &p).unwrap();
        assert!((r.point[0] - best.1[0]).abs() < 2e-3);
        assert!((r.point[1] - best.1[1]).abs() < 2e-3);
    }

    #[test]
    fn distance_zero_inside() {
        assert_eq!(distance(&unit_box2(), &[0.5, 0.5]).unwrap(), 0.0);
        assert_eq!(distance(&box_cut(), &[0.2, 0.3]).unwrap(), 0.0);
    }

    #[test]
    fn contains_examples() {
        assert!(contains(&unit_box2(), &[0.5, 0.5], 1e-9).unwrap());
        assert!(!contains(&unit_box2(), &[1.0 + 1e-6, 0.0], 1e-9).unwrap());
        let h = ConvexSetSpec::new_halfspace(vec![1.0, 0.0], 0.0).unwrap();
        assert!(contains(&h, &[0.0, 0.0], 1e-9).unwrap());
    }

    #[test]
    fn halfspace_normalized() {
        let h = ConvexSetSpec::new_halfspace(vec![3.0, 4.0], 10.0).unwrap();
        let ConvexSetSpec::Halfspace(hs) = &h else { panic!() };
        assert_eq!(hs.normal(), &[0.6, 0.8]);
        assert_eq!(hs.offset(), 2.0);
        let again = ConvexSetSpec::new_halfspace(hs.normal().to_vec(), hs.offset()).unwrap();
        assert_eq!(again, h);
    }

    #[test]
    fn invalid_sets_rejected() {
        assert!(matches!(
            ConvexSetSpec::new_box(vec![1.0], vec![0.0]),
            Err(ConvexError::InvertedBox { coord: 0, .. })
        ));
        assert!(matches!(ConvexSetSpec::new_ball(vec![0.0], 0.0), Err(ConvexError::BadRadius(_))));
        assert!(matches!(ConvexSetSpec::new_halfspace(vec![0.0, 0.0], 1.0), Err(ConvexError::ZeroNormal)));
        assert!(matches!(ConvexSetSpec::new_intersection(vec![]), Err(ConvexError::EmptyMemberList)));
        assert!(matches!(
            ConvexSetSpec::new_intersection(vec![
                ConvexSetSpec::interval(0.0, 1.0).unwrap(),
                unit_box2()
            ]),
            Err(ConvexError::MixedDimensions(1, 2))
        ));
        assert!(matches!(ConvexSetSpec::new_box(vec![], vec![]), Err(ConvexError::ZeroDimension)));
    }

    #[test]
    fn dimension_mismatch_reported() {
        assert!(matches!(
            project(&unit_box2(), &[1.0]),
            Err(ConvexError::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn empty_intersection_detected() {
        let empty = ConvexSetSpec::new_intersection(vec![
            ConvexSetSpec::interval(0.0, 1.0).unwrap(),
            ConvexSetSpec::interval(2.0, 3.0).unwrap(),
        ])
        .unwrap();
        assert!(matches!(
            project(&empty, &[5.0]),
            Err(ConvexError::PossiblyEmptyIntersection { .. })
        ));
    }

    #[test]
    fn nested_intersections_flatten() {
        let nested = ConvexSetSpec::new_intersection(vec![
            box_cut(),
            ConvexSetSpec::new_ball(vec![0.0, 0.0], 10.0).unwrap(),
        ])
        .unwrap();
        let r = project(&nested, &[2.0, 2.0]).unwrap();
        assert!((r.point[0] - 0.5).abs() < 1e-8);
        assert!((r.point[1] - 0.5).abs() < 1e-8);
    }

    #[test]
    fn translation_moves_projection() {
        let v = [3.0, -1.0];
        let shifted = box_cut().translated(&v).unwrap();
        let r = project(&shifted, &[5.0, 1.0]).unwrap();
        assert!((r.point[0] - 3.5).abs() < 1e-8);
        assert!((r.point[1] + 0.5).abs() < 1e-8);
    }
}
