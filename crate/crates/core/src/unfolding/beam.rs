//! The set of directed lines crossing a sequence of windows.
//!
//! Directions are split into four charts, each a quarter turn of the
//! previous one. In chart coordinates a line has direction `(1, m)` with
//! `|m| <= 1` and equation `y = m x + b`, so "point `p` lies to the left" is
//! the half-plane `m p.x + b < p.y` in the `(m, b)` plane. Each window adds
//! two such half-planes; the feasible set in a chart is a union of convex
//! polygons (a single one for convex tables).

use crate::dynamics::PhasePoint;
use crate::geometry::{Point2, PolygonTable, Rat};

use super::UnfoldedEdge;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BeamVerdict {
    Nonempty,
    Empty,
    Uncertain,
}

/// A directed line in the unfolding plane.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WitnessLine {
    pub point: Point2,
    pub direction: Point2,
}

impl WitnessLine {
    /// The phase point where this line leaves side `side` of copy 0.
    pub fn phase_point(&self, q: &PolygonTable, side: usize) -> PhasePoint {
        let (a, b) = q.side_endpoints(side);
        let d = b - a;
        let den = self.direction.cross(&d);
        let u = &(a - &self.point).cross(&self.direction) / &den;
        let s = u.to_f64() * q.side_length(side);
        let dir = self.direction.to_f64();
        let t = q.side_tangent(side);
        let theta = (t[0] * dir[1] - t[1] * dir[0]).atan2(t[0] * dir[0] + t[1] * dir[1]);
        PhasePoint::new(side, s, theta)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Certificate {
    Witness(WitnessLine),
    /// No line crosses windows `0..=window` in order.
    Separator { window: usize },
    Unresolved,
}

type Vertex = (Rat, Rat);

/// `alpha m + beta b + gamma <= 0`.
struct HalfPlane {
    alpha: Rat,
    beta: Rat,
    gamma: Rat,
}

impl HalfPlane {
    /// Lines passing strictly to the right of `p` (`p` on their left).
    fn left_of(p: &(Rat, Rat)) -> Self {
        HalfPlane { alpha: p.0.clone(), beta: Rat::ONE, gamma: -&p.1 }
    }

    fn right_of(p: &(Rat, Rat)) -> Self {
        HalfPlane { alpha: -&p.0, beta: -Rat::ONE, gamma: p.1.clone() }
    }

    fn eval(&self, v: &Vertex) -> Rat {
        &(&(&self.alpha * &v.0) + &(&self.beta * &v.1)) + &self.gamma
    }
}

#[derive(Clone, Debug)]
struct Region {
    verts: Vec<Vertex>,
}

impl Region {
    fn area2(&self) -> Rat {
        let n = self.verts.len();
        let mut acc = Rat::ZERO;
        for i in 0..n {
            let (a, b) = (&self.verts[i], &self.verts[(i + 1) % n]);
            acc = &acc + &(&(&a.0 * &b.1) - &(&a.1 * &b.0));
        }
        acc
    }

    fn clip(&self, h: &HalfPlane) -> Option<Region> {
        let vals: Vec<Rat> = self.verts.iter().map(|v| h.eval(v)).collect();
        if vals.iter().all(|f| f.signum() <= 0) {
            return Some(self.clone());
        }
        if vals.iter().all(|f| f.signum() >= 0) {
            return None;
        }
        let n = self.verts.len();
        let mut out = Vec::with_capacity(n + 1);
        for i in 0..n {
            let j = (i + 1) % n;
            let (fi, fj) = (&vals[i], &vals[j]);
            if fi.signum() <= 0 {
                out.push(self.verts[i].clone());
            }
            if fi.signum() * fj.signum() < 0 {
                let k = fi / &(fi - fj);
                let (p, q) = (&self.verts[i], &self.verts[j]);
                out.push((&p.0 + &(&(&q.0 - &p.0) * &k), &p.1 + &(&(&q.1 - &p.1) * &k)));
            }
        }
        let r = Region { verts: out };
        (r.verts.len() >= 3 && r.area2().signum() > 0).then_some(r)
    }

    /// Splits along `f = 0` where the linear form takes both signs.
    fn split(&self, h: &HalfPlane) -> (Option<Region>, Option<Region>) {
        let neg = HalfPlane { alpha: -&h.alpha, beta: -&h.beta, gamma: -&h.gamma };
        (self.clip(h), self.clip(&neg))
    }

    fn centroid(&self) -> Vertex {
        let n = Rat::from_int(self.verts.len() as i64);
        let (mut m, mut b) = (Rat::ZERO, Rat::ZERO);
        for v in &self.verts {
            m = &m + &v.0;
            b = &b + &v.1;
        }
        (&m / &n, &b / &n)
    }
}

fn to_chart(c: usize, p: &Point2) -> Vertex {
    match c {
        0 => (p.x.clone(), p.y.clone()),
        1 => (p.y.clone(), -&p.x),
        2 => (-&p.x, -&p.y),
        _ => (-&p.y, p.x.clone()),
    }
}

fn from_chart(c: usize, x: Rat, y: Rat) -> Point2 {
    match c {
        0 => Point2::new(x, y),
        1 => Point2::new(-&y, x),
        2 => Point2::new(-&x, -&y),
        _ => Point2::new(y, -&x),
    }
}

/// Feasible directed lines for a growing window sequence.
#[derive(Clone, Debug)]
pub struct Beam {
    charts: [Vec<Region>; 4],
    windows: usize,
    empty_at: Option<usize>,
}

impl Beam {
    /// Lines entering the table through the open side `edge` (window 0).
    pub fn new(q: &PolygonTable, edge: &UnfoldedEdge) -> Beam {
        let mut bound = Rat::ONE;
        for v in q.vertices() {
            bound = Rat::max(bound, Rat::max(v.x.abs(), v.y.abs()));
        }
        let bound = &(&bound + &bound) + &Rat::ONE;
        let minus = -&bound;
        let boxed = Region {
            verts: vec![
                (-Rat::ONE, minus.clone()),
                (Rat::ONE, minus),
                (Rat::ONE, bound.clone()),
                (-Rat::ONE, bound),
            ],
        };
        let mut charts: [Vec<Region>; 4] = Default::default();
        for (c, regions) in charts.iter_mut().enumerate() {
            let left = to_chart(c, &edge.seg.a);
            let right = to_chart(c, &edge.seg.b);
            if let Some(r) = boxed.clip(&HalfPlane::left_of(&left)).and_then(|r| r.clip(&HalfPlane::right_of(&right))) {
                regions.push(r);
            }
        }
        let mut beam = Beam { charts, windows: 1, empty_at: None };
        beam.mark();
        beam
    }

    fn mark(&mut self) {
        if self.empty_at.is_none() && self.charts.iter().all(Vec::is_empty) {
            self.empty_at = Some(self.windows - 1);
        }
    }

    pub fn windows(&self) -> usize {
        self.windows
    }

    /// Appends the exit window `edge` of copy `edge.copy`, entered through
    /// that copy's side `entry_side`.
    pub fn extend(&self, q: &PolygonTable, edge: &UnfoldedEdge, entry_side: usize) -> Beam {
        let mut next = Beam { charts: Default::default(), windows: self.windows + 1, empty_at: self.empty_at };
        if self.empty_at.is_some() {
            return next;
        }
        let (left, right) = if edge.frame.parity > 0 { (&edge.seg.b, &edge.seg.a) } else { (&edge.seg.a, &edge.seg.b) };
        let copy = (!q.is_convex()).then(|| q.vertices().iter().map(|v| edge.frame.apply(v)).collect::<Vec<_>>());
        for c in 0..4 {
            let hl = HalfPlane::left_of(&to_chart(c, left));
            let hr = HalfPlane::right_of(&to_chart(c, right));
            let clipped = self.charts[c].iter().filter_map(|r| r.clip(&hl).and_then(|r| r.clip(&hr)));
            next.charts[c] = match &copy {
                None => clipped.collect(),
                Some(verts) => {
                    let local: Vec<Vertex> = verts.iter().map(|p| to_chart(c, p)).collect();
                    let mut kept = Vec::new();
                    for r in clipped {
                        for piece in split_by_vertices(r, &local) {
                            if chord_is_clear(&piece.centroid(), &local, entry_side, edge.source_side) {
                                kept.push(piece);
                            }
                        }
                    }
                    kept
                }
            };
        }
        next.mark();
        next
    }

    pub fn verdict(&self) -> BeamVerdict {
        if self.empty_at.is_some() {
            BeamVerdict::Empty
        } else {
            BeamVerdict::Nonempty
        }
    }

    pub fn is_nonempty(&self) -> bool {
        self.empty_at.is_none()
    }

    /// A line through the interior of the feasible set, if any.
    pub fn witness(&self) -> Option<WitnessLine> {
        for (c, regions) in self.charts.iter().enumerate() {
            if let Some(r) = regions.first() {
                let (m, b) = r.centroid();
                let point = from_chart(c, Rat::ZERO, b);
                let direction = from_chart(c, Rat::ONE, m);
                return Some(WitnessLine { point, direction });
            }
        }
        None
    }

    pub fn certificate(&self) -> Certificate {
        match self.empty_at {
            Some(window) => Certificate::Separator { window },
            None => Certificate::Witness(self.witness().expect("nonempty beam has a region")),
        }
    }

    /// Size in bits of the largest exact coordinate held.
    pub fn coordinate_bits(&self) -> u64 {
        self.charts.iter().flatten().flat_map(|r| r.verts.iter()).map(|(m, b)| m.bits().max(b.bits())).max().unwrap_or(0)
    }

    /// Number of convex pieces kept across all charts.
    pub fn pieces(&self) -> usize {
        self.charts.iter().map(Vec::len).sum()
    }
}

/// Cuts `r` until every vertex keeps one side of every line in each piece.
fn split_by_vertices(r: Region, local: &[Vertex]) -> Vec<Region> {
    let mut pieces = vec![r];
    for v in local {
        let h = HalfPlane::left_of(v);
        let mut next = Vec::with_capacity(pieces.len());
        for p in pieces {
            let signs: Vec<i32> = p.verts.iter().map(|x| h.eval(x).signum()).collect();
            if signs.iter().any(|&s| s > 0) && signs.iter().any(|&s| s < 0) {
                let (a, b) = p.split(&h);
                next.extend(a);
                next.extend(b);
            } else {
                next.push(p);
            }
        }
        pieces = next;
    }
    pieces
}

/// Whether the line `y = m x + b` runs inside the copy from its crossing with
/// side `entry` to its crossing with side `exit` without meeting another side.
fn chord_is_clear(line: &Vertex, local: &[Vertex], entry: usize, exit: usize) -> bool {
    let (m, b) = line;
    let n = local.len();
    let g: Vec<Rat> = local.iter().map(|p| &(&(m * &p.0) + b) - &p.1).collect();
    let cross_x = |k: usize| -> Option<Rat> {
        let j = (k + 1) % n;
        if g[k].signum() * g[j].signum() >= 0 {
            return None;
        }
        let t = &g[k] / &(&g[k] - &g[j]);
        Some(&local[k].0 + &(&(&local[j].0 - &local[k].0) * &t))
    };
    let (Some(x_in), Some(x_out)) = (cross_x(entry), cross_x(exit)) else {
        return false;
    };
    if x_in >= x_out {
        return false;
    }
    (0..n)
        .filter(|&k| k != entry && k != exit)
        .all(|k| cross_x(k).is_none_or(|x| x <= x_in || x >= x_out))
}

/// Feasibility of an ordered window list as produced by `unfold_word`.
pub fn beam_feasible(q: &PolygonTable, edges: &[UnfoldedEdge]) -> (BeamVerdict, Certificate) {
    assert!(!edges.is_empty(), "at least one window");
    let mut beam = Beam::new(q, &edges[0]);
    for j in 1..edges.len() {
        beam = beam.extend(q, &edges[j], edges[j - 1].source_side);
    }
    (beam.verdict(), beam.certificate())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{code, Word};
    use crate::geometry::shapes;
    use crate::unfolding::unfold_word;

    fn feasible(q: &PolygonTable, w: &[usize]) -> (BeamVerdict, Certificate) {
        beam_feasible(q, &unfold_word(q, &Word(w.to_vec())).unwrap())
    }

    /// Turns a witness line into a phase point on side `w[0]` of the table.
    #[test]
    fn square_examples() {
        let q = shapes::unit_square();
        let (v, c) = feasible(&q, &[0, 2]);
        assert_eq!(v, BeamVerdict::Nonempty);
        let Certificate::Witness(w) = c else { panic!() };
        let z = w.phase_point(&q, 0);
        assert_eq!(code(&q, &z, 2).unwrap(), Word(vec![0, 2]));
        assert_eq!(feasible(&q, &[0, 1, 0, 1]).0, BeamVerdict::Empty);
        assert!(matches!(feasible(&q, &[0, 1, 0, 1]).1, Certificate::Separator { .. }));
    }

    #[test]
    fn repeated_side_is_empty() {
        // "AA" is rejected by the unfolder; the beam itself also finds it empty.
        let q = shapes::unit_square();
        let e0 = unfold_word(&q, &Word(vec![0])).unwrap().remove(0);
        let beam = Beam::new(&q, &e0).extend(&q, &e0, 0);
        assert_eq!(beam.verdict(), BeamVerdict::Empty);
    }

    #[test]
    fn abab_rays_never_realize() {
        use rand::{Rng, SeedableRng};
        let q = shapes::unit_square();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20_000 {
            let z = PhasePoint::new(0, rng.random_range(0.0..1.0), rng.random_range(0.0..std::f64::consts::PI));
            if let Ok(w) = code(&q, &z, 4) {
                assert_ne!(w, Word(vec![0, 1, 0, 1]));
            }
        }
    }

    #[test]
    fn witnesses_realize_their_words() {
        for q in [shapes::unit_square(), shapes::right_triangle(), shapes::staircase()] {
            let n = q.len();
            let mut words = vec![vec![0usize]];
            for _ in 0..3 {
                let mut next = Vec::new();
                for w in &words {
                    for s in 0..n {
                        if s != *w.last().unwrap() {
                            let mut x = w.clone();
                            x.push(s);
                            next.push(x);
                        }
                    }
                }
                words = next;
            }
            let mut seen = 0;
            for w in &words {
                if let (BeamVerdict::Nonempty, Certificate::Witness(line)) = feasible(&q, w) {
                    let z = line.phase_point(&q, w[0]);
                    assert_eq!(code(&q, &z, w.len()).unwrap(), Word(w.clone()), "{w:?}");
                    seen += 1;
                }
            }
            assert!(seen > 0);
        }
    }
}
