use super::predicates::{Point2, SegmentG};
use super::rational::Rat;
use super::GeometryError;

/// An exact planar isometry `x -> linear * x + translation`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IsometryFrame {
    /// Row-major 2x2 orthogonal matrix.
    pub linear: [[Rat; 2]; 2],
    pub translation: Point2,
    /// Determinant sign: +1 for rotations, -1 for reflections.
    pub parity: i8,
}

impl IsometryFrame {
    pub fn identity() -> Self {
        IsometryFrame {
            linear: [[Rat::ONE, Rat::ZERO], [Rat::ZERO, Rat::ONE]],
            translation: Point2::default(),
            parity: 1,
        }
    }

    pub fn apply(&self, p: &Point2) -> Point2 {
        let m = &self.linear;
        Point2::new(
            &(&(&m[0][0] * &p.x) + &(&m[0][1] * &p.y)) + &self.translation.x,
            &(&(&m[1][0] * &p.x) + &(&m[1][1] * &p.y)) + &self.translation.y,
        )
    }

    /// Applies only the linear part (for direction vectors).
    pub fn apply_linear(&self, v: &Point2) -> Point2 {
        let m = &self.linear;
        Point2::new(
            &(&m[0][0] * &v.x) + &(&m[0][1] * &v.y),
            &(&m[1][0] * &v.x) + &(&m[1][1] * &v.y),
        )
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &IsometryFrame) -> IsometryFrame {
        let a = &self.linear;
        let b = &other.linear;
        let mul = |i: usize, j: usize| &(&a[i][0] * &b[0][j]) + &(&a[i][1] * &b[1][j]);
        IsometryFrame {
            linear: [[mul(0, 0), mul(0, 1)], [mul(1, 0), mul(1, 1)]],
            translation: self.apply(&other.translation),
            parity: self.parity * other.parity,
        }
    }

    /// Inverse isometry (transpose of the orthogonal part).
    pub fn inverse(&self) -> IsometryFrame {
        let m = &self.linear;
        let lt = [[m[0][0].clone(), m[1][0].clone()], [m[0][1].clone(), m[1][1].clone()]];
        let inv = IsometryFrame { linear: lt, translation: Point2::default(), parity: self.parity };
        let t = inv.apply_linear(&self.translation);
        IsometryFrame { translation: Point2::new(-&t.x, -&t.y), ..inv }
    }

    /// Floating-point copy of the matrix and translation.
    pub fn to_f64(&self) -> FrameF64 {
        let m = &self.linear;
        FrameF64 {
            linear: [[m[0][0].to_f64(), m[0][1].to_f64()], [m[1][0].to_f64(), m[1][1].to_f64()]],
            translation: self.translation.to_f64(),
        }
    }

    pub fn is_identity(&self) -> bool {
        *self == IsometryFrame::identity()
    }

    /// Largest deviation of `linear * linearᵀ` from the identity.
    pub fn orthogonality_defect(&self) -> Rat {
        let m = &self.linear;
        let g00 = &(&m[0][0] * &m[0][0]) + &(&m[0][1] * &m[0][1]);
        let g01 = &(&m[0][0] * &m[1][0]) + &(&m[0][1] * &m[1][1]);
        let g11 = &(&m[1][0] * &m[1][0]) + &(&m[1][1] * &m[1][1]);
        let d = [(&g00 - &Rat::ONE).abs(), g01.abs(), (&g11 - &Rat::ONE).abs()];
        d.into_iter().fold(Rat::ZERO, Rat::max)
    }
}

/// Floating-point view of a frame.
#[derive(Clone, Copy, Debug)]
pub struct FrameF64 {
    pub linear: [[f64; 2]; 2],
    pub translation: [f64; 2],
}

impl FrameF64 {
    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        let m = &self.linear;
        [
            m[0][0] * p[0] + m[0][1] * p[1] + self.translation[0],
            m[1][0] * p[0] + m[1][1] * p[1] + self.translation[1],
        ]
    }
}

/// The reflection across the line supporting `line`.
pub fn reflect_across(line: &SegmentG) -> Result<IsometryFrame, GeometryError> {
    let u = line.direction();
    let n2 = u.norm_sq();
    if n2.is_zero() {
        return Err(GeometryError::DegenerateSegment);
    }
    let xx = &u.x * &u.x;
    let yy = &u.y * &u.y;
    let xy = &u.x * &u.y;
    let c = &(&xx - &yy) / &n2;
    let s = &(&xy + &xy) / &n2;
    let linear = [[c.clone(), s.clone()], [s, -&c]];
    let partial = IsometryFrame { linear, translation: Point2::default(), parity: -1 };
    let ra = partial.apply_linear(&line.a);
    let translation = &line.a - &ra;
    Ok(IsometryFrame { translation, ..partial })
}
