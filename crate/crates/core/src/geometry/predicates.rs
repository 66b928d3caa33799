use std::ops::{Add, Sub};

use super::rational::{det2_sign, Rat};

/// An exact point in the plane.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Default)]
pub struct Point2 {
    pub x: Rat,
    pub y: Rat,
}

impl Point2 {
    pub fn new(x: Rat, y: Rat) -> Self {
        Point2 { x, y }
    }

    pub fn from_ints(x: i64, y: i64) -> Self {
        Point2::new(Rat::from_int(x), Rat::from_int(y))
    }

    /// Exact value of a pair of doubles. Panics on non-finite input.
    pub fn from_f64(x: f64, y: f64) -> Self {
        Point2::new(
            Rat::from_f64(x).expect("finite coordinate"),
            Rat::from_f64(y).expect("finite coordinate"),
        )
    }

    pub fn to_f64(&self) -> [f64; 2] {
        [self.x.to_f64(), self.y.to_f64()]
    }

    pub fn dot(&self, o: &Point2) -> Rat {
        &(&self.x * &o.x) + &(&self.y * &o.y)
    }

    pub fn cross(&self, o: &Point2) -> Rat {
        &(&self.x * &o.y) - &(&self.y * &o.x)
    }

    pub fn norm_sq(&self) -> Rat {
        self.dot(self)
    }

    pub fn scale(&self, k: &Rat) -> Point2 {
        Point2::new(&self.x * k, &self.y * k)
    }

    pub fn dist_sq(&self, o: &Point2) -> Rat {
        (self - o).norm_sq()
    }

    pub fn dist(&self, o: &Point2) -> f64 {
        let [ax, ay] = self.to_f64();
        let [bx, by] = o.to_f64();
        (ax - bx).hypot(ay - by)
    }
}

impl<'a> Add<&'a Point2> for &'a Point2 {
    type Output = Point2;
    fn add(self, o: &'a Point2) -> Point2 {
        Point2::new(&self.x + &o.x, &self.y + &o.y)
    }
}

impl<'a> Sub<&'a Point2> for &'a Point2 {
    type Output = Point2;
    fn sub(self, o: &'a Point2) -> Point2 {
        Point2::new(&self.x - &o.x, &self.y - &o.y)
    }
}

/// A point known only up to an error radius (per coordinate).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ApproxPoint2 {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
}

impl ApproxPoint2 {
    pub fn new(x: f64, y: f64, radius: f64) -> Self {
        assert!(radius.is_finite() && radius >= 0.0, "error radius must be finite and non-negative");
        ApproxPoint2 { x, y, radius }
    }

    /// A real point known to `bits` bits relative to its magnitude.
    pub fn with_precision(x: f64, y: f64, bits: u32) -> Self {
        let mag = x.abs().max(y.abs());
        ApproxPoint2::new(x, y, mag * 2f64.powi(-(bits as i32)))
    }

    pub fn exact(x: f64, y: f64) -> Self {
        ApproxPoint2::new(x, y, 0.0)
    }
}

/// Result of an orientation query.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Orientation {
    Left,
    Right,
    Collinear,
    Uncertain,
}

impl Orientation {
    pub fn from_sign(s: i32) -> Self {
        match s.signum() {
            1 => Orientation::Left,
            -1 => Orientation::Right,
            _ => Orientation::Collinear,
        }
    }

    pub fn reversed(self) -> Self {
        match self {
            Orientation::Left => Orientation::Right,
            Orientation::Right => Orientation::Left,
            o => o,
        }
    }
}

/// Sign of `(q - p) x (r - p)`: `Left` when `r` lies left of the directed line `p -> q`.
pub fn orient(p: &Point2, q: &Point2, r: &Point2) -> Orientation {
    Orientation::from_sign(orient_sign(p, q, r))
}

#[inline]
pub fn orient_sign(p: &Point2, q: &Point2, r: &Point2) -> i32 {
    let ux = &q.x - &p.x;
    let uy = &q.y - &p.y;
    let vx = &r.x - &p.x;
    let vy = &r.y - &p.y;
    det2_sign(&ux, &vy, &uy, &vx)
}

/// Orientation of points carrying error radii.
///
/// Stage one is a floating-point evaluation with a forward error bound. If
/// that cannot decide, the determinant of the stored doubles is evaluated
/// exactly, and the sign is reported only when it exceeds the bound induced
/// by the input radii. Points of zero radius therefore always resolve.
pub fn orient_approx(p: &ApproxPoint2, q: &ApproxPoint2, r: &ApproxPoint2) -> Orientation {
    let (ux, uy) = (q.x - p.x, q.y - p.y);
    let (vx, vy) = (r.x - p.x, r.y - p.y);
    let l = ux * vy;
    let rr = uy * vx;
    let det = l - rr;
    let input_bound = (p.radius + q.radius) * (vx.abs() + vy.abs())
        + (p.radius + r.radius) * (ux.abs() + uy.abs())
        + 2.0 * (p.radius + q.radius) * (p.radius + r.radius);
    let float_bound = 8.0 * f64::EPSILON * (l.abs() + rr.abs());
    if det.abs() > input_bound * (1.0 + 4.0 * f64::EPSILON) + float_bound {
        return Orientation::from_sign(if det > 0.0 { 1 } else { -1 });
    }
    let exact = orient_sign(
        &Point2::from_f64(p.x, p.y),
        &Point2::from_f64(q.x, q.y),
        &Point2::from_f64(r.x, r.y),
    );
    if input_bound == 0.0 {
        return Orientation::from_sign(exact);
    }
    let pe = Point2::from_f64(p.x, p.y);
    let qe = Point2::from_f64(q.x, q.y);
    let re = Point2::from_f64(r.x, r.y);
    let det_exact = (&qe - &pe).cross(&(&re - &pe));
    let bound = Rat::from_f64(input_bound * (1.0 + 4.0 * f64::EPSILON)).unwrap_or(Rat::ZERO);
    if det_exact.abs() > bound {
        Orientation::from_sign(exact)
    } else {
        Orientation::Uncertain
    }
}

/// A segment of positive length.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SegmentG {
    pub a: Point2,
    pub b: Point2,
}

impl SegmentG {
    pub fn new(a: Point2, b: Point2) -> Result<Self, super::GeometryError> {
        if a == b {
            return Err(super::GeometryError::DegenerateSegment);
        }
        Ok(SegmentG { a, b })
    }

    pub fn direction(&self) -> Point2 {
        &self.b - &self.a
    }

    pub fn length(&self) -> f64 {
        self.a.dist(&self.b)
    }
}

/// Whether closed segments `[a, b]` and `[c, d]` share a point.
pub fn segments_touch(a: &Point2, b: &Point2, c: &Point2, d: &Point2) -> bool {
    let o1 = orient_sign(a, b, c);
    let o2 = orient_sign(a, b, d);
    let o3 = orient_sign(c, d, a);
    let o4 = orient_sign(c, d, b);
    if o1 * o2 < 0 && o3 * o4 < 0 {
        return true;
    }
    (o1 == 0 && on_segment(a, b, c))
        || (o2 == 0 && on_segment(a, b, d))
        || (o3 == 0 && on_segment(c, d, a))
        || (o4 == 0 && on_segment(c, d, b))
}

/// `p` collinear with `[a, b]` lies on the closed segment.
pub fn on_segment(a: &Point2, b: &Point2, p: &Point2) -> bool {
    let lo_x = Rat::min(a.x.clone(), b.x.clone());
    let hi_x = Rat::max(a.x.clone(), b.x.clone());
    let lo_y = Rat::min(a.y.clone(), b.y.clone());
    let hi_y = Rat::max(a.y.clone(), b.y.clone());
    p.x >= lo_x && p.x <= hi_x && p.y >= lo_y && p.y <= hi_y
}

/// Euclidean distance from `p` to the closed segment `[a, b]`, in doubles.
pub fn point_segment_dist(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (cx, cy) = (a[0] + t * dx, a[1] + t * dy);
    (p[0] - cx).hypot(p[1] - cy)
}

/// Distance between two closed segments, in doubles.
pub fn segment_segment_dist(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> f64 {
    let cr = |o: [f64; 2], p: [f64; 2], q: [f64; 2]| (p[0] - o[0]) * (q[1] - o[1]) - (p[1] - o[1]) * (q[0] - o[0]);
    let (o1, o2, o3, o4) = (cr(a, b, c), cr(a, b, d), cr(c, d, a), cr(c, d, b));
    if o1 * o2 < 0.0 && o3 * o4 < 0.0 {
        return 0.0;
    }
    point_segment_dist(a, c, d)
        .min(point_segment_dist(b, c, d))
        .min(point_segment_dist(c, a, b))
        .min(point_segment_dist(d, a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(x: i64, y: i64) -> Point2 {
        Point2::from_ints(x, y)
    }

    #[test]
    fn basic_orientations() {
        assert_eq!(orient(&p(0, 0), &p(1, 0), &p(0, 1)), Orientation::Left);
        assert_eq!(orient(&p(0, 0), &p(1, 1), &p(2, 2)), Orientation::Collinear);
        assert_eq!(orient(&p(0, 0), &p(0, 1), &p(1, 0)), Orientation::Right);
    }

    #[test]
    fn tiny_offset_is_uncertain_at_64_bits() {
        let a = ApproxPoint2::with_precision(0.0, 0.0, 64);
        let b = ApproxPoint2::with_precision(1.0, 0.0, 64);
        let c = ApproxPoint2::with_precision(2.0, 1e-300, 64);
        assert_eq!(orient_approx(&a, &b, &c), Orientation::Uncertain);
        // The same doubles read as exact values resolve.
        let c = ApproxPoint2::exact(2.0, 1e-300);
        assert_eq!(
            orient_approx(&ApproxPoint2::exact(0.0, 0.0), &ApproxPoint2::exact(1.0, 0.0), &c),
            Orientation::Left
        );
    }

    #[test]
    fn exact_refinement_resolves_float_cancellation() {
        // 1e-17 offset is below the f64 filter but exact in the stored doubles.
        let a = ApproxPoint2::exact(0.1, 0.1);
        let b = ApproxPoint2::exact(0.3, 0.3);
        let c = ApproxPoint2::exact(0.7, 0.7 + 1e-16);
        assert_eq!(orient_approx(&a, &b, &c), Orientation::Left);
    }

    #[test]
    fn segment_contact() {
        assert!(segments_touch(&p(0, 0), &p(2, 2), &p(0, 2), &p(2, 0)));
        assert!(segments_touch(&p(0, 0), &p(2, 0), &p(2, 0), &p(3, 5)));
        assert!(!segments_touch(&p(0, 0), &p(1, 0), &p(2, 0), &p(3, 0)));
        assert!(segments_touch(&p(0, 0), &p(2, 0), &p(1, 0), &p(3, 0)));
    }

    proptest! {
        #[test]
        fn orient_is_antisymmetric(ax in -50i64..50, ay in -50i64..50, bx in -50i64..50,
                                   by in -50i64..50, cx in -50i64..50, cy in -50i64..50) {
            let (a, b, c) = (p(ax, ay), p(bx, by), p(cx, cy));
            prop_assert_eq!(orient(&a, &b, &c), orient(&b, &a, &c).reversed());
            prop_assert_eq!(orient(&a, &b, &c), orient(&a, &c, &b).reversed());
        }

        #[test]
        fn approx_orient_agrees_when_resolved(ax in -1e3f64..1e3, ay in -1e3f64..1e3, bx in -1e3f64..1e3,
                                              by in -1e3f64..1e3, cx in -1e3f64..1e3, cy in -1e3f64..1e3) {
            let (a, b, c) = (ApproxPoint2::with_precision(ax, ay, 40),
                             ApproxPoint2::with_precision(bx, by, 40),
                             ApproxPoint2::with_precision(cx, cy, 40));
            let o = orient_approx(&a, &b, &c);
            if o != Orientation::Uncertain {
                prop_assert_eq!(o, orient(&Point2::from_f64(ax, ay), &Point2::from_f64(bx, by), &Point2::from_f64(cx, cy)));
                prop_assert_eq!(orient_approx(&b, &a, &c), o.reversed());
            }
        }
    }
}
