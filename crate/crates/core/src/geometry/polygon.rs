use super::predicates::{orient_sign, point_segment_dist, segments_touch, Point2, SegmentG};
use super::rational::Rat;
use super::GeometryError;

/// Options for [`validate_polygon`].
#[derive(Clone, Copy, Debug, Default)]
pub struct ValidateOptions {
    /// Reverse clockwise input instead of rejecting it.
    pub fix_orientation: bool,
}

/// A validated simple polygon, counterclockwise, with labeled sides.
///
/// Side `i` runs from vertex `i` to vertex `i + 1` (cyclically). The interior
/// lies to the left of every side.
#[derive(Clone, Debug)]
pub struct PolygonTable {
    vertices: Vec<Point2>,
    labels: Vec<String>,
    verts_f: Vec<[f64; 2]>,
    side_len: Vec<f64>,
    side_offsets: Vec<f64>,
    /// Unit tangent of each side.
    tangent: Vec<[f64; 2]>,
    reflex: Vec<bool>,
    perimeter: f64,
    diameter_sq: Rat,
    convex: bool,
    nonconvex_clearance: f64,
}

fn default_labels(n: usize) -> Vec<String> {
    (0..n)
        .map(|i| {
            if n <= 26 {
                ((b'A' + i as u8) as char).to_string()
            } else {
                format!("S{i}")
            }
        })
        .collect()
}

/// Validates a vertex list and precomputes the derived table data.
pub fn validate_polygon(
    vertices: Vec<Point2>,
    labels: Option<Vec<String>>,
    opts: ValidateOptions,
) -> Result<PolygonTable, GeometryError> {
    let n = vertices.len();
    if n < 3 {
        return Err(GeometryError::TooFewVertices(n));
    }
    let mut labels = match labels {
        Some(l) => {
            if l.len() != n {
                return Err(GeometryError::LabelCount { labels: l.len(), sides: n });
            }
            let mut sorted = l.clone();
            sorted.sort();
            sorted.dedup();
            if sorted.len() != n {
                return Err(GeometryError::DuplicateLabel);
            }
            l
        }
        None => default_labels(n),
    };
    for i in 0..n {
        for j in i + 1..n {
            if vertices[i] == vertices[j] {
                return Err(GeometryError::DegenerateVertex(j));
            }
        }
    }
    for i in 0..n {
        let (a, b, c) = (&vertices[(i + n - 1) % n], &vertices[i], &vertices[(i + 1) % n]);
        if orient_sign(a, b, c) == 0 {
            return Err(GeometryError::DegenerateVertex(i));
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            let (a, b) = (&vertices[i], &vertices[(i + 1) % n]);
            let (c, d) = (&vertices[j], &vertices[(j + 1) % n]);
            if segments_touch(a, b, c, d) {
                return Err(GeometryError::SelfIntersecting(i, j));
            }
        }
    }
    let mut twice_area = Rat::ZERO;
    for i in 0..n {
        twice_area = &twice_area + &vertices[i].cross(&vertices[(i + 1) % n]);
    }
    let mut vertices = vertices;
    if twice_area.signum() < 0 {
        if !opts.fix_orientation {
            return Err(GeometryError::ClockwiseInput);
        }
        // Reversed order v'_k = v_{n-1-k}; side k' is old side n-2-k.
        vertices.reverse();
        labels = (0..n).map(|k| labels[(2 * n - 2 - k) % n].clone()).collect();
    }
    Ok(PolygonTable::build(vertices, labels))
}

impl PolygonTable {
    fn build(vertices: Vec<Point2>, labels: Vec<String>) -> PolygonTable {
        let n = vertices.len();
        let verts_f: Vec<[f64; 2]> = vertices.iter().map(Point2::to_f64).collect();
        let mut side_len = Vec::with_capacity(n);
        let mut tangent = Vec::with_capacity(n);
        let mut side_offsets = Vec::with_capacity(n);
        let mut acc = 0.0;
        for i in 0..n {
            let (a, b) = (verts_f[i], verts_f[(i + 1) % n]);
            let l = (b[0] - a[0]).hypot(b[1] - a[1]);
            side_offsets.push(acc);
            acc += l;
            side_len.push(l);
            tangent.push([(b[0] - a[0]) / l, (b[1] - a[1]) / l]);
        }
        let reflex: Vec<bool> = (0..n)
            .map(|i| orient_sign(&vertices[(i + n - 1) % n], &vertices[i], &vertices[(i + 1) % n]) < 0)
            .collect();
        let convex = !reflex.iter().any(|&r| r);
        let mut diameter_sq = Rat::ZERO;
        for i in 0..n {
            for j in i + 1..n {
                let d = vertices[i].dist_sq(&vertices[j]);
                if d > diameter_sq {
                    diameter_sq = d;
                }
            }
        }
        let mut clearance = f64::INFINITY;
        for v in 0..n {
            if !reflex[v] {
                continue;
            }
            for s in 0..n {
                if s == v || (s + 1) % n == v {
                    continue;
                }
                let d = point_segment_dist(verts_f[v], verts_f[s], verts_f[(s + 1) % n]);
                clearance = clearance.min(d);
            }
        }
        PolygonTable {
            vertices,
            labels,
            verts_f,
            side_len,
            side_offsets,
            tangent,
            reflex,
            perimeter: acc,
            diameter_sq,
            convex,
            nonconvex_clearance: clearance,
        }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> &Point2 {
        &self.vertices[i % self.len()]
    }

    pub fn vertex_f64(&self, i: usize) -> [f64; 2] {
        self.verts_f[i % self.len()]
    }

    pub fn vertices_f64(&self) -> &[[f64; 2]] {
        &self.verts_f
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, side: usize) -> &str {
        &self.labels[side]
    }

    pub fn side_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Side `i` as an exact segment.
    pub fn side(&self, i: usize) -> SegmentG {
        let n = self.len();
        SegmentG { a: self.vertices[i % n].clone(), b: self.vertices[(i + 1) % n].clone() }
    }

    pub fn side_endpoints(&self, i: usize) -> (&Point2, &Point2) {
        let n = self.len();
        (&self.vertices[i % n], &self.vertices[(i + 1) % n])
    }

    pub fn side_length(&self, i: usize) -> f64 {
        self.side_len[i]
    }

    pub fn side_offset(&self, i: usize) -> f64 {
        self.side_offsets[i]
    }

    pub fn side_tangent(&self, i: usize) -> [f64; 2] {
        self.tangent[i]
    }

    pub fn perimeter(&self) -> f64 {
        self.perimeter
    }

    pub fn diameter_sq(&self) -> &Rat {
        &self.diameter_sq
    }

    pub fn diameter(&self) -> f64 {
        self.diameter_sq.to_f64().sqrt()
    }

    pub fn is_convex(&self) -> bool {
        self.convex
    }

    pub fn is_reflex(&self, v: usize) -> bool {
        self.reflex[v % self.len()]
    }

    /// Minimal distance from a reflex vertex to a side not containing it; `+∞` when convex.
    pub fn nonconvex_clearance(&self) -> f64 {
        self.nonconvex_clearance
    }

    /// Minimal distance between two sides that share no vertex.
    pub fn min_nonadjacent_gap(&self) -> f64 {
        let n = self.len();
        let mut best = f64::INFINITY;
        for i in 0..n {
            for j in i + 1..n {
                if j == i + 1 || (i == 0 && j == n - 1) {
                    continue;
                }
                let d = super::predicates::segment_segment_dist(
                    self.verts_f[i],
                    self.verts_f[(i + 1) % n],
                    self.verts_f[j],
                    self.verts_f[(j + 1) % n],
                );
                best = best.min(d);
            }
        }
        best
    }

    /// A copy with the vertices replaced (same labels); revalidated.
    pub fn with_vertices(&self, vertices: Vec<Point2>) -> Result<PolygonTable, GeometryError> {
        validate_polygon(vertices, Some(self.labels.clone()), ValidateOptions::default())
    }

    /// Stable textual form used for hashing and manifests.
    pub fn canonical_string(&self) -> String {
        let mut s = String::new();
        for (v, l) in self.vertices.iter().zip(&self.labels) {
            s.push_str(&format!("{l}:{},{};", v.x, v.y));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::shapes;

    fn pts(v: &[(i64, i64)]) -> Vec<Point2> {
        v.iter().map(|&(x, y)| Point2::from_ints(x, y)).collect()
    }

    #[test]
    fn unit_square() {
        let q = shapes::unit_square();
        assert!(q.is_convex());
        assert_eq!(q.perimeter(), 4.0);
        assert_eq!(*q.diameter_sq(), Rat::from_int(2));
        assert!((q.diameter() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(q.nonconvex_clearance(), f64::INFINITY);
        assert_eq!(q.labels(), &["A", "B", "C", "D"]);
    }

    #[test]
    fn staircase_is_nonconvex_with_positive_clearance() {
        let q = shapes::staircase();
        assert!(!q.is_convex());
        let d = q.nonconvex_clearance();
        assert!(d.is_finite() && d > 0.0);
        assert_eq!(q.len(), 14);
    }

    #[test]
    fn bowtie_self_intersects() {
        let r = validate_polygon(pts(&[(0, 0), (1, 1), (1, 0), (0, 1)]), None, ValidateOptions::default());
        assert!(matches!(r, Err(GeometryError::SelfIntersecting(..))));
    }

    #[test]
    fn degenerate_inputs() {
        let r = validate_polygon(pts(&[(0, 0), (1, 0), (2, 0), (1, 1)]), None, ValidateOptions::default());
        assert!(matches!(r, Err(GeometryError::DegenerateVertex(1))));
        let r = validate_polygon(pts(&[(0, 0), (1, 0), (1, 0), (1, 1)]), None, ValidateOptions::default());
        assert!(matches!(r, Err(GeometryError::DegenerateVertex(_))));
        let r = validate_polygon(pts(&[(0, 0), (1, 0)]), None, ValidateOptions::default());
        assert!(matches!(r, Err(GeometryError::TooFewVertices(2))));
    }

    #[test]
    fn clockwise_rejected_unless_fixed() {
        let cw = pts(&[(0, 0), (0, 1), (1, 1), (1, 0)]);
        let labels = Some(vec!["L".into(), "T".into(), "R".into(), "B".into()]);
        assert!(matches!(
            validate_polygon(cw.clone(), labels.clone(), ValidateOptions::default()),
            Err(GeometryError::ClockwiseInput)
        ));
        let q = validate_polygon(cw, labels, ValidateOptions { fix_orientation: true }).unwrap();
        // Side labels follow their geometric sides through the reversal.
        let b = q.side_index("B").unwrap();
        let (a0, a1) = q.side_endpoints(b);
        assert_eq!(a0.y, Rat::ZERO);
        assert_eq!(a1.y, Rat::ZERO);
        let t = q.side_index("T").unwrap();
        assert_eq!(q.side_endpoints(t).0.y, Rat::ONE);
    }

    #[test]
    fn diameter_matches_brute_force_on_random_lattice_polygons() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut checked = 0;
        while checked < 50 {
            // Star-shaped polygon around the origin with integer vertices.
            let k = rng.random_range(3..9);
            let mut angles: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
            angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let v: Vec<Point2> = angles
                .iter()
                .map(|a| {
                    let r = rng.random_range(5.0..50.0);
                    Point2::from_ints((r * a.cos()).round() as i64, (r * a.sin()).round() as i64)
                })
                .collect();
            let Ok(q) = validate_polygon(v.clone(), None, ValidateOptions::default()) else { continue };
            let brute = v
                .iter()
                .flat_map(|a| v.iter().map(move |b| a.dist_sq(b)))
                .max()
                .unwrap();
            assert_eq!(*q.diameter_sq(), brute);
            checked += 1;
        }
    }
}
