//! Tables used throughout the tests and examples.

use super::{validate_polygon, Point2, PolygonTable, Rat, ValidateOptions};

fn build(v: &[(&str, &str)], fix: bool) -> PolygonTable {
    let pts = v.iter().map(|(x, y)| Point2::new(x.parse().unwrap(), y.parse().unwrap())).collect();
    validate_polygon(pts, None, ValidateOptions { fix_orientation: fix }).expect("built-in polygon is valid")
}

/// The unit square; sides A (bottom), B (right), C (top), D (left).
pub fn unit_square() -> PolygonTable {
    build(&[("0", "0"), ("1", "0"), ("1", "1"), ("0", "1")], false)
}

/// The right isosceles triangle (0,0), (1,0), (0,1).
pub fn right_triangle() -> PolygonTable {
    build(&[("0", "0"), ("1", "0"), ("0", "1")], false)
}

/// The 14-gon "staircase" table with tabs on three sides and a notch at the
/// bottom left. Given clockwise, stored counterclockwise.
pub fn staircase() -> PolygonTable {
    build(&STAIRCASE, true)
}

/// The staircase vertex list in its original (clockwise) order.
pub const STAIRCASE: [(&str, &str); 14] = [
    ("0", "0.5"),
    ("0", "1"),
    ("-0.2", "1"),
    ("-0.2", "2"),
    ("0", "2"),
    ("0", "2.5"),
    ("1", "2.5"),
    ("1", "2"),
    ("2", "2"),
    ("2", "1"),
    ("2.2", "1"),
    ("2.2", "0"),
    ("1", "0"),
    ("1", "0.5"),
];

/// Index of the vertex equal to `(x, y)`.
pub fn vertex_index(q: &PolygonTable, x: &str, y: &str) -> Option<usize> {
    let p = Point2::new(x.parse::<Rat>().ok()?, y.parse::<Rat>().ok()?);
    q.vertices().iter().position(|v| *v == p)
}
