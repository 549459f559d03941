//! Plane similarities, the snowflake and Koch-curve iterated function systems,
//! reference charts of the snowflake element, prefractal sampling and
//! distance queries to the snowflake boundary.
//!
//! Rotations are stored as integers modulo 12 in units of `pi/6`, so chains of
//! compositions never accumulate angle round-off.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{cos_sin_twelfth, Real};

/// Largest prefractal depth accepted by [`sample_koch`].
pub const MAX_SAMPLE_DEPTH: usize = 12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Vec2<T> {
    #[inline]
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    #[inline]
    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y
    }

    #[inline]
    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn dist(self, o: Self) -> T {
        (self - o).norm()
    }

    /// Rotation by `k * pi / 6`.
    #[inline]
    pub fn rotate(self, k: i32) -> Self {
        let (c, s) = cos_sin_twelfth::<T>(k);
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    /// Counterclockwise quarter turn.
    #[inline]
    pub fn perp(self) -> Self {
        Self::new(-self.y, self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl<T: Real> Add for Vec2<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl<T: Real> Sub for Vec2<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl<T: Real> Neg for Vec2<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

impl<T: Real> Mul<T> for Vec2<T> {
    type Output = Self;
    #[inline]
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s)
    }
}

/// `x -> scale * R(rot * pi/6) x + shift`, with `scale > 0` and no reflection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Similarity<T> {
    pub scale: T,
    rot: u8,
    pub shift: Vec2<T>,
}

impl<T: Real> Similarity<T> {
    pub fn new(scale: T, rot: i32, shift: Vec2<T>) -> Self {
        assert!(scale > T::zero(), "similarity scale must be positive");
        Self {
            scale,
            rot: rot.rem_euclid(12) as u8,
            shift,
        }
    }

    pub fn identity() -> Self {
        Self::new(T::one(), 0, Vec2::zero())
    }

    /// Rotation index in `0..12`.
    #[inline]
    pub fn rot(&self) -> i32 {
        self.rot as i32
    }

    #[inline]
    pub fn apply(&self, p: Vec2<T>) -> Vec2<T> {
        self.apply_linear(p) + self.shift
    }

    /// Linear part only (no translation).
    #[inline]
    pub fn apply_linear(&self, p: Vec2<T>) -> Vec2<T> {
        p.rotate(self.rot()) * self.scale
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            scale: self.scale * other.scale,
            rot: ((self.rot + other.rot) % 12),
            shift: self.apply(other.shift),
        }
    }

    pub fn invert(&self) -> Self {
        let inv_scale = T::one() / self.scale;
        let rot = -self.rot();
        let shift = -(self.shift.rotate(rot) * inv_scale);
        Self::new(inv_scale, rot, shift)
    }

    /// Same map with the scale replaced, e.g. by an exactly computed power of 3.
    pub fn with_scale(mut self, scale: T) -> Self {
        assert!(scale > T::zero());
        self.scale = scale;
        self
    }

    /// Converts the scalar type.
    pub fn cast<U: Real>(&self) -> Similarity<U> {
        let c = |v: T| U::lit(v.to_f64().unwrap());
        Similarity::new(c(self.scale), self.rot(), Vec2::new(c(self.shift.x), c(self.shift.y)))
    }
}

/// The seven maps whose images tile the snowflake: one central copy scaled by
/// `1/sqrt(3)` and rotated by `pi/6`, and six outer copies scaled by `1/3`.
pub fn snowflake_ifs<T: Real>() -> [Similarity<T>; 7] {
    let third = T::one() / T::lit(3.0);
    let two_thirds = T::lit(2.0) * third;
    let outer = |m: i32| {
        let (c, s) = cos_sin_twelfth::<T>(2 * m - 1);
        Similarity::new(third, 0, Vec2::new(c, s) * two_thirds)
    };
    [
        Similarity::new(T::one() / T::sqrt3(), 1, Vec2::zero()),
        outer(2),
        outer(3),
        outer(4),
        outer(5),
        outer(6),
        outer(7),
    ]
}

/// The four maps of the Koch curve on `[0,1] x {0}`, ordered along the curve.
pub fn koch_ifs<T: Real>() -> [Similarity<T>; 4] {
    let third = T::one() / T::lit(3.0);
    let half = T::half();
    [
        Similarity::new(third, 0, Vec2::zero()),
        Similarity::new(third, 2, Vec2::new(third, T::zero())),
        Similarity::new(third, -2, Vec2::new(half, half / T::sqrt3())),
        Similarity::new(third, 0, Vec2::new(T::lit(2.0) * third, T::zero())),
    ]
}

/// Apex of the Koch curve, `(1/2, sqrt(3)/6)`.
pub fn koch_apex<T: Real>() -> Vec2<T> {
    Vec2::new(T::half(), T::sqrt3() / T::lit(6.0))
}

/// Barycentre of the Koch curve with respect to its Hausdorff measure.
pub fn koch_barycentre<T: Real>() -> Vec2<T> {
    Vec2::new(T::half(), T::one() / (T::lit(6.0) * T::sqrt3()))
}

/// Area of the reference snowflake, `6 sqrt(3) / 5`.
pub fn snowflake_area<T: Real>() -> T {
    T::lit(6.0) * T::sqrt3() / T::lit(5.0)
}

/// Fixed decomposition data of the reference snowflake.
///
/// Arrays are 0-based: entry `k` belongs to vertex, segment, face or wedge
/// number `k + 1`. Vertex `p_i` sits at angle `(2i - 3) pi / 6`, wedge `W_i`
/// lies between segments `S_i = [0, p_i]` and `S_{i+1}`, face `F_i` runs from
/// `p_i` to `p_{i+1}`.
#[derive(Clone, Debug)]
pub struct ReferenceCharts<T> {
    pub vertices: [Vec2<T>; 6],
    /// Directions of the segments `S_i`; these are the vertices themselves.
    pub segment_dirs: [Vec2<T>; 6],
    /// `gamma_i`: Koch curve onto the unit face `F_i`.
    pub face_charts: [Similarity<T>; 6],
    /// `beta_j`: Koch curve onto `F_j ∪ F_{j+1}`, traversed from `p_{j+2}` back to `p_j`.
    pub pair_charts: [Similarity<T>; 6],
}

impl<T: Real> ReferenceCharts<T> {
    pub fn new() -> Self {
        let vertices: [Vec2<T>; 6] = std::array::from_fn(|k| {
            let (c, s) = cos_sin_twelfth::<T>(2 * (k as i32 + 1) - 3);
            Vec2::new(c, s)
        });
        let face_charts = std::array::from_fn(|k| {
            let i = k as i32 + 1;
            Similarity::new(T::one(), 2 * i + 1, vertices[k])
        });
        let pair_charts = std::array::from_fn(|k| {
            let j = k as i32 + 1;
            Similarity::new(T::sqrt3(), 2 * j - 4, vertices[(k + 2) % 6])
        });
        Self {
            vertices,
            segment_dirs: vertices,
            face_charts,
            pair_charts,
        }
    }

    /// `p_i` for 1-based `i`, wrapping modulo 6.
    pub fn vertex(&self, i: usize) -> Vec2<T> {
        self.vertices[(i + 5) % 6]
    }

    /// `gamma_i` for 1-based `i`.
    pub fn face_chart(&self, i: usize) -> Similarity<T> {
        self.face_charts[(i + 5) % 6]
    }

    /// `beta_j` for 1-based `j`.
    pub fn pair_chart(&self, j: usize) -> Similarity<T> {
        self.pair_charts[(j + 5) % 6]
    }
}

impl<T: Real> Default for ReferenceCharts<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Vertices of the level-`depth` prefractal of the Koch curve, in order from
/// `(0,0)` to `(1,0)`.
pub fn sample_koch<T: Real>(depth: usize) -> Result<Vec<Vec2<T>>> {
    sample_chart(&Similarity::identity(), depth)
}

/// Prefractal vertices of the image of the Koch curve under `chart`.
pub fn sample_chart<T: Real>(chart: &Similarity<T>, depth: usize) -> Result<Vec<Vec2<T>>> {
    if depth > MAX_SAMPLE_DEPTH {
        return Err(Error::DepthOverflow {
            depth,
            max: MAX_SAMPLE_DEPTH,
        });
    }
    let maps = koch_ifs::<T>();
    let mut cells = vec![*chart];
    for _ in 0..depth {
        cells = cells
            .iter()
            .flat_map(|c| maps.iter().map(move |t| c.compose(t)))
            .collect();
    }
    let mut pts: Vec<Vec2<T>> = cells.iter().map(|c| c.shift).collect();
    pts.push(chart.apply(Vec2::new(T::one(), T::zero())));
    Ok(pts)
}

/// Closed prefractal polygon of `chart(Ω)` with `6 * 4^depth` vertices,
/// counterclockwise, starting at the image of `p_1`.
pub fn sample_element_boundary<T: Real>(chart: &Similarity<T>, depth: usize) -> Result<Vec<Vec2<T>>> {
    let refs = ReferenceCharts::<T>::new();
    let mut out = Vec::with_capacity(6 << (2 * depth));
    for g in &refs.face_charts {
        let mut pts = sample_chart(&chart.compose(g), depth)?;
        pts.pop();
        out.extend(pts);
    }
    Ok(out)
}

/// Prefractal polygon of the reference snowflake boundary.
pub fn sample_boundary<T: Real>(depth: usize) -> Result<Vec<Vec2<T>>> {
    sample_element_boundary(&Similarity::identity(), depth)
}

struct Cell<T> {
    lower: T,
    chart: Similarity<T>,
}

impl<T: Real> PartialEq for Cell<T> {
    fn eq(&self, other: &Self) -> bool {
        self.lower == other.lower
    }
}

impl<T: Real> Eq for Cell<T> {}

impl<T: Real> PartialOrd for Cell<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Real> Ord for Cell<T> {
    // reversed: BinaryHeap pops the smallest lower bound first
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .lower
            .partial_cmp(&self.lower)
            .unwrap_or(Ordering::Equal)
    }
}

/// Distance from `point` to the boundary of the reference snowflake, accurate
/// to `tol` (absolute).
///
/// Branch and bound over the Koch cells of the six boundary faces. A cell
/// `c(Γ)` lies in the disc of radius `scale/2` around `c(1/2, 0)`, since the
/// Koch curve is contained in the triangle `(0,0), (1,0), (1/2, sqrt(3)/6)`.
pub fn boundary_distance<T: Real>(point: Vec2<T>, tol: T) -> T {
    assert!(tol > T::zero(), "tolerance must be positive");
    let refs = ReferenceCharts::<T>::new();
    let maps = koch_ifs::<T>();
    let mid = Vec2::new(T::half(), T::zero());
    let end = Vec2::new(T::one(), T::zero());
    let apex = koch_apex::<T>();

    let bound = |c: &Similarity<T>| {
        let r = c.scale * T::half();
        (point.dist(c.apply(mid)) - r).max(T::zero())
    };

    let mut best = T::infinity();
    let mut heap = BinaryHeap::new();
    for g in refs.face_charts {
        best = best.min(point.dist(g.shift));
        heap.push(Cell {
            lower: bound(&g),
            chart: g,
        });
    }
    while let Some(cell) = heap.pop() {
        if cell.lower >= best - tol {
            break;
        }
        let c = cell.chart;
        best = best
            .min(point.dist(c.shift))
            .min(point.dist(c.apply(end)))
            .min(point.dist(c.apply(apex)));
        for t in &maps {
            let child = c.compose(t);
            let lower = bound(&child);
            if lower < best - tol {
                heap.push(Cell { lower, chart: child });
            }
        }
    }
    best
}

/// Symmetric Hausdorff distance between two finite point sets (brute force).
pub fn hausdorff_distance<T: Real>(a: &[Vec2<T>], b: &[Vec2<T>]) -> T {
    let one_sided = |u: &[Vec2<T>], v: &[Vec2<T>]| {
        u.iter()
            .map(|p| v.iter().map(|q| p.dist(*q)).fold(T::infinity(), T::min))
            .fold(T::zero(), T::max)
    };
    one_sided(a, b).max(one_sided(b, a))
}

#[cfg(test)]
mod tests {
    use super::*;

    type S = Similarity<f64>;
    type P = Vec2<f64>;

    fn close(a: P, b: P, tol: f64) -> bool {
        a.dist(b) <= tol
    }

    #[test]
    fn compose_examples() {
        let s = snowflake_ifs::<f64>();
        let id = S::identity();
        assert_eq!(id.compose(&s[3]), s[3]);

        let s11 = s[0].compose(&s[0]);
        assert!((s11.scale - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(s11.rot(), 2);
        assert!(close(s11.shift, P::zero(), 1e-15));

        let s22 = s[1].compose(&s[1]);
        assert!((s22.scale - 1.0 / 9.0).abs() < 1e-15);
        assert_eq!(s22.rot(), 0);
        assert!(close(s22.shift, P::new(0.0, 8.0 / 9.0), 1e-15));
    }

    #[test]
    fn snowflake_maps() {
        let s = snowflake_ifs::<f64>();
        assert_eq!(s[0].rot(), 1);
        assert!((s[0].scale - 3f64.sqrt().recip()).abs() < 1e-16);
        assert!(close(s[1].shift, P::new(0.0, 2.0 / 3.0), 1e-15));
        let area: f64 = s.iter().map(|m| m.scale * m.scale).sum();
        assert!((area - 1.0).abs() < 1e-15);
    }

    #[test]
    fn koch_maps() {
        let t = koch_ifs::<f64>();
        let e = P::new(1.0, 0.0);
        assert!(close(t[0].apply(e), P::new(1.0 / 3.0, 0.0), 1e-16));
        assert!(close(t[2].shift, P::new(0.5, 0.5 / 3f64.sqrt()), 1e-16));
        assert!(close(t[3].apply(e), e, 1e-15));
        // consecutive pieces join up
        for k in 0..3 {
            assert!(close(t[k].apply(e), t[k + 1].shift, 1e-15));
        }
    }

    #[test]
    fn reference_chart_examples() {
        let r = ReferenceCharts::<f64>::new();
        let apex = koch_apex::<f64>();
        assert!(close(r.face_chart(1).apply(apex), P::new(3f64.sqrt().recip(), 0.0), 1e-15));
        assert!(close(r.pair_chart(1).apply(apex), r.vertex(2), 1e-15));
        for i in 1..=6 {
            let g = r.face_chart(i);
            assert!(close(g.apply(P::zero()), r.vertex(i), 1e-15));
            assert!(close(g.apply(P::new(1.0, 0.0)), r.vertex(i + 1), 1e-15));
            let b = r.pair_chart(i);
            assert!(close(b.apply(P::zero()), r.vertex(i + 2), 1e-15));
            assert!(close(b.apply(P::new(1.0, 0.0)), r.vertex(i), 1e-15));
            assert!((r.vertex(i).norm() - 1.0).abs() < 1e-15);
        }
        // opposite vertices are a diameter apart
        for i in 1..=3 {
            assert!((r.vertex(i).dist(r.vertex(i + 3)) - 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn koch_samples() {
        let d0 = sample_koch::<f64>(0).unwrap();
        assert_eq!(d0, vec![P::zero(), P::new(1.0, 0.0)]);
        let d1 = sample_koch::<f64>(1).unwrap();
        let expect = [
            P::zero(),
            P::new(1.0 / 3.0, 0.0),
            P::new(0.5, 3f64.sqrt() / 6.0),
            P::new(2.0 / 3.0, 0.0),
            P::new(1.0, 0.0),
        ];
        assert_eq!(d1.len(), 5);
        for (a, b) in d1.iter().zip(expect.iter()) {
            assert!(close(*a, *b, 1e-15));
        }
        let d3 = sample_koch::<f64>(3).unwrap();
        let d4 = sample_koch::<f64>(4).unwrap();
        assert_eq!(d4.len(), 257);
        for p in &d3 {
            assert!(d4.iter().any(|q| close(*p, *q, 1e-14)));
        }
        assert!(matches!(
            sample_koch::<f64>(13),
            Err(Error::DepthOverflow { depth: 13, .. })
        ));
    }

    #[test]
    fn chart_coverage_and_pair_consistency() {
        let depth = 3;
        let r = ReferenceCharts::<f64>::new();
        let boundary = sample_boundary::<f64>(depth).unwrap();
        let mut union = Vec::new();
        for i in 1..=6 {
            union.extend(sample_chart(&r.face_chart(i), depth).unwrap());
        }
        let tol = 2.0 * 3f64.powi(-(depth as i32));
        assert!(hausdorff_distance(&boundary, &union) <= tol);

        for j in 1..=6 {
            let pair = sample_chart(&r.pair_chart(j), depth).unwrap();
            let mut both = sample_chart(&r.face_chart(j), depth).unwrap();
            both.extend(sample_chart(&r.face_chart(j + 1), depth).unwrap());
            assert!(hausdorff_distance(&pair, &both) <= tol, "pair chart {j}");
        }
    }

    #[test]
    fn boundary_points_have_zero_distance() {
        for p in sample_boundary::<f64>(3).unwrap().iter().step_by(7) {
            assert!(boundary_distance(*p, 1e-10) <= 1e-10);
        }
    }

    #[test]
    fn origin_distance_matches_point_cloud() {
        let cloud = sample_boundary::<f64>(8).unwrap();
        for q in [P::zero(), P::new(0.1, 0.3), P::new(-0.4, 0.2), P::new(0.0, 1.3)] {
            let brute = cloud.iter().map(|p| p.dist(q)).fold(f64::INFINITY, f64::min);
            let d = boundary_distance(q, 1e-12);
            // the depth-8 cloud overestimates by at most the cell size
            assert!(d <= brute + 1e-12, "{q:?}");
            assert!(brute - d <= 3f64.powi(-8), "{q:?}");
        }
        let d0 = boundary_distance(P::zero(), 1e-12);
        assert!((d0 - 3f64.sqrt().recip()).abs() < 1e-12);
    }

    #[test]
    fn central_element_vertex_distance() {
        // vertices of s_1 ∘ s_1 (Ω): the central element of T_2
        let s = snowflake_ifs::<f64>();
        let k = s[0].compose(&s[0]);
        let r = ReferenceCharts::<f64>::new();
        let d = (1..=6)
            .map(|i| boundary_distance(k.apply(r.vertex(i)), 1e-12))
            .fold(f64::INFINITY, f64::min);
        assert!((d - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn ifs_images_stay_on_their_boundaries() {
        let depth = 3;
        let tol = 3f64.powi(-(depth as i32));
        let base = sample_boundary::<f64>(depth).unwrap();
        for m in snowflake_ifs::<f64>() {
            let image: Vec<P> = base.iter().map(|p| m.apply(*p)).collect();
            let target = sample_element_boundary(&m, depth).unwrap();
            assert!(hausdorff_distance(&image, &target) <= tol);
        }
    }

    #[test]
    fn works_in_single_precision() {
        let s = snowflake_ifs::<f32>();
        let s22 = s[1].compose(&s[1]);
        assert!((s22.shift.y - 8.0 / 9.0).abs() < 1e-6);
        let d = boundary_distance(Vec2::<f32>::zero(), 1e-5);
        assert!((d - 3f32.sqrt().recip()).abs() < 1e-5);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn sim() -> impl Strategy<Value = S> {
            (0.1f64..3.0, 0i32..12, -2.0f64..2.0, -2.0f64..2.0)
                .prop_map(|(s, r, x, y)| S::new(s, r, P::new(x, y)))
        }

        proptest! {
            #[test]
            fn composition_is_associative(a in sim(), b in sim(), c in sim(),
                                          x in -1.0f64..1.0, y in -1.0f64..1.0) {
                let p = P::new(x, y);
                let l = a.compose(&b.compose(&c)).apply(p);
                let r = a.compose(&b).compose(&c).apply(p);
                prop_assert!(l.dist(r) <= 1e-14 * (1.0 + l.norm()) * 10.0);
            }

            #[test]
            fn inverse_undoes(a in sim(), x in -1.0f64..1.0, y in -1.0f64..1.0) {
                let p = P::new(x, y);
                let back = a.invert().apply(a.apply(p));
                prop_assert!(back.dist(p) <= 1e-14 * 10.0);
            }

            #[test]
            fn compose_applies_right_then_left(a in sim(), b in sim(),
                                               x in -1.0f64..1.0, y in -1.0f64..1.0) {
                let p = P::new(x, y);
                let l = a.compose(&b).apply(p);
                let r = a.apply(b.apply(p));
                prop_assert!(l.dist(r) <= 1e-13);
            }
        }
    }
}
