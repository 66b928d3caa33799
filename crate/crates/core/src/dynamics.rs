//! The billiard map, the billiard flow, symbolic coding, and clearance from
//! the boundary of phase space.
//!
//! Phase points carry their angle as a double, so this module works in
//! floating point with an explicit error radius. A ray passing a vertex
//! closer than the singular resolution (`2^-40` of the table diameter) is a
//! [`Next::Singular`] hit; if the accumulated error radius exceeds that
//! resolution the step is [`Next::Uncertain`] instead.

use std::f64::consts::{PI, TAU};
use std::fmt;

use crate::geometry::{point_segment_dist, segment_segment_dist, PolygonTable};

/// Relative resolution below which a vertex passage counts as a hit.
pub const SINGULAR_REL: f64 = 1.0 / (1u64 << 40) as f64;

/// A boundary phase point: side, arc length along it, angle to the side's direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhasePoint {
    pub side: usize,
    pub s: f64,
    pub theta: f64,
}

impl PhasePoint {
    pub fn new(side: usize, s: f64, theta: f64) -> Self {
        PhasePoint { side, s, theta }
    }

    /// Checks the phase-space invariants against `q`.
    pub fn is_valid(&self, q: &PolygonTable) -> bool {
        self.side < q.len()
            && self.theta > 0.0
            && self.theta < PI
            && self.s >= 0.0
            && self.s <= q.side_length(self.side)
    }

    pub fn position(&self, q: &PolygonTable) -> [f64; 2] {
        let a = q.vertex_f64(self.side);
        let t = q.side_tangent(self.side);
        [a[0] + self.s * t[0], a[1] + self.s * t[1]]
    }

    pub fn direction(&self, q: &PolygonTable) -> [f64; 2] {
        let t = q.side_tangent(self.side);
        let (sn, cs) = self.theta.sin_cos();
        [cs * t[0] - sn * t[1], sn * t[0] + cs * t[1]]
    }

    /// Direction angle in `[0, 2π)`.
    pub fn psi(&self, q: &PolygonTable) -> f64 {
        let t = q.side_tangent(self.side);
        (t[1].atan2(t[0]) + self.theta).rem_euclid(TAU)
    }

    pub fn to_flow(&self, q: &PolygonTable) -> FlowPoint {
        FlowPoint { x: self.position(q), psi: self.psi(q) }
    }
}

/// A point of the flow phase space: position and direction angle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowPoint {
    pub x: [f64; 2],
    pub psi: f64,
}

/// What the next boundary collision is.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Next {
    Hit(PhasePoint),
    Singular { vertex: usize },
    Uncertain,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepResult {
    pub next: Next,
    /// Length of the free flight to the collision.
    pub flight: f64,
}

/// A finite sequence of side indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word(pub Vec<usize>);

impl Word {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn symbols(&self) -> &[usize] {
        &self.0
    }

    pub fn reversed(&self) -> Word {
        Word(self.0.iter().rev().copied().collect())
    }

    pub fn prefix(&self, n: usize) -> Word {
        Word(self.0[..n.min(self.len())].to_vec())
    }

    /// Parses labels (e.g. `"ACAB"`, or `"S0,S3"` when labels are longer than one character).
    pub fn parse(q: &PolygonTable, text: &str) -> Option<Word> {
        let single = q.labels().iter().all(|l| l.chars().count() == 1);
        let parts: Vec<String> = if single && !text.contains(',') {
            text.chars().map(|c| c.to_string()).collect()
        } else {
            text.split(',').map(|s| s.trim().to_string()).collect()
        };
        parts.iter().map(|p| q.side_index(p)).collect::<Option<Vec<_>>>().map(Word)
    }

    pub fn display<'a>(&'a self, q: &'a PolygonTable) -> WordDisplay<'a> {
        WordDisplay { word: self, q }
    }

    /// Normalized Hamming distance between equal-length words.
    pub fn hamming(&self, other: &Word) -> f64 {
        assert_eq!(self.len(), other.len());
        if self.is_empty() {
            return 0.0;
        }
        let d = self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count();
        d as f64 / self.len() as f64
    }
}

pub struct WordDisplay<'a> {
    word: &'a Word,
    q: &'a PolygonTable,
}

impl fmt::Display for WordDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let single = self.q.labels().iter().all(|l| l.chars().count() == 1);
        for (i, &s) in self.word.0.iter().enumerate() {
            if !single && i > 0 {
                f.write_str(",")?;
            }
            f.write_str(self.q.label(s))?;
        }
        Ok(())
    }
}

/// Why an orbit could not be continued.
#[derive(Clone, Copy, Debug, PartialEq, thiserror::Error)]
pub enum DynamicsError {
    #[error("orbit hits vertex {vertex} at step {step}")]
    SingularHit { step: usize, vertex: usize, time: f64 },
    #[error("precision exhausted at step {step}")]
    Uncertain { step: usize, time: f64 },
    #[error("phase point is outside the phase space")]
    InvalidPoint,
}

impl DynamicsError {
    pub fn step(&self) -> Option<usize> {
        match self {
            DynamicsError::SingularHit { step, .. } | DynamicsError::Uncertain { step, .. } => Some(*step),
            DynamicsError::InvalidPoint => None,
        }
    }
}

/// Error radius carried along an orbit.
#[derive(Clone, Copy, Debug, Default)]
struct ErrRadius {
    pos: f64,
    ang: f64,
}

impl ErrRadius {
    fn initial(q: &PolygonTable) -> Self {
        ErrRadius { pos: 4.0 * f64::EPSILON * q.diameter(), ang: 4.0 * f64::EPSILON }
    }
}

enum Cast {
    Side { side: usize, u: f64, t: f64 },
    Vertex { vertex: usize, t: f64 },
    Uncertain { t: f64 },
    Escape,
}

#[inline]
fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// First boundary event of the ray `x + t d`, `t > 0`, with `|d| = 1`.
fn cast(q: &PolygonTable, x: [f64; 2], d: [f64; 2], from_side: Option<usize>, err: ErrRadius) -> Cast {
    let n = q.len();
    let diam = q.diameter();
    let resolution = SINGULAR_REL * diam;
    let t_min = resolution;
    let mut best: Option<(usize, f64, f64)> = None;
    for j in 0..n {
        if Some(j) == from_side {
            continue;
        }
        let a = q.vertex_f64(j);
        let b = q.vertex_f64(j + 1);
        let e = [b[0] - a[0], b[1] - a[1]];
        let den = cross(d, e);
        if den <= 0.0 {
            continue;
        }
        let ax = [a[0] - x[0], a[1] - x[1]];
        let t = cross(ax, e) / den;
        let u = cross(ax, d) / den;
        let slack = (resolution + err.pos) / q.side_length(j);
        if t > t_min && u >= -slack && u <= 1.0 + slack && best.is_none_or(|(_, bt, _)| t < bt) {
            best = Some((j, t, u));
        }
    }
    let Some((side, t_hit, u)) = best else {
        return Cast::Escape;
    };
    // Vertices met on the way to the hit (including the hit side's endpoints).
    let mut event: Option<(usize, f64, f64)> = None;
    for v in 0..n {
        let p = q.vertex_f64(v);
        let w = [p[0] - x[0], p[1] - x[1]];
        let along = dot(d, w);
        if along <= t_min {
            continue;
        }
        let radius = err.pos + along * err.ang + 16.0 * f64::EPSILON * (diam + along);
        let tol = resolution.max(radius);
        if along > t_hit + tol {
            continue;
        }
        let perp = cross(d, w).abs();
        if perp <= tol && event.is_none_or(|(_, _, a)| along < a) {
            event = Some((v, perp, along));
        }
    }
    if let Some((vertex, perp, along)) = event {
        let radius = err.pos + along * err.ang + 16.0 * f64::EPSILON * (diam + along);
        if radius <= resolution && perp <= resolution {
            return Cast::Vertex { vertex, t: along };
        }
        return Cast::Uncertain { t: along };
    }
    Cast::Side { side, u: u.clamp(0.0, 1.0), t: t_hit }
}

fn reflect_at(q: &PolygonTable, side: usize, u: f64, d: [f64; 2]) -> Option<PhasePoint> {
    let tau = q.side_tangent(side);
    let k = 2.0 * dot(d, tau);
    let out = [k * tau[0] - d[0], k * tau[1] - d[1]];
    let theta = cross(tau, out).atan2(dot(tau, out));
    if theta <= 0.0 || theta >= PI {
        return None;
    }
    let s = u * q.side_length(side);
    Some(PhasePoint { side, s, theta })
}

fn step_err(q: &PolygonTable, z: &PhasePoint, err: ErrRadius) -> (StepResult, ErrRadius) {
    let x = z.position(q);
    let d = z.direction(q);
    match cast(q, x, d, Some(z.side), err) {
        Cast::Side { side, u, t } => {
            let next = match reflect_at(q, side, u, d) {
                Some(p) => Next::Hit(p),
                None => Next::Uncertain,
            };
            let grow = ErrRadius {
                pos: err.pos + t * err.ang + 8.0 * f64::EPSILON * (q.diameter() + t),
                ang: err.ang + 8.0 * f64::EPSILON,
            };
            (StepResult { next, flight: t }, grow)
        }
        Cast::Vertex { vertex, t } => (StepResult { next: Next::Singular { vertex }, flight: t }, err),
        Cast::Uncertain { t } => (StepResult { next: Next::Uncertain, flight: t }, err),
        Cast::Escape => (StepResult { next: Next::Uncertain, flight: 0.0 }, err),
    }
}

/// One application of the billiard map.
pub fn step(q: &PolygonTable, z: &PhasePoint) -> StepResult {
    step_err(q, z, ErrRadius::initial(q)).0
}

/// A traced orbit segment.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    /// Sides of `z, S z, ..., S^{n-1} z`.
    pub word: Word,
    pub points: Vec<PhasePoint>,
    /// `flights[k]` is the free path from `S^k z` to `S^{k+1} z`.
    pub flights: Vec<f64>,
    /// `S^n z`.
    pub end: PhasePoint,
}

impl Trace {
    pub fn total_time(&self) -> f64 {
        self.flights.iter().sum()
    }
}

/// Applies the map `n` times, recording the code of the first `n` points.
pub fn trace(q: &PolygonTable, z: &PhasePoint, n: usize) -> Result<Trace, DynamicsError> {
    if !z.is_valid(q) {
        return Err(DynamicsError::InvalidPoint);
    }
    let mut err = ErrRadius::initial(q);
    let mut cur = *z;
    let mut word = Vec::with_capacity(n);
    let mut points = Vec::with_capacity(n);
    let mut flights = Vec::with_capacity(n);
    let mut time = 0.0;
    for k in 0..n {
        word.push(cur.side);
        points.push(cur);
        let (r, e) = step_err(q, &cur, err);
        err = e;
        match r.next {
            Next::Hit(p) => {
                flights.push(r.flight);
                time += r.flight;
                cur = p;
            }
            Next::Singular { vertex } => {
                return Err(DynamicsError::SingularHit { step: k + 1, vertex, time: time + r.flight })
            }
            Next::Uncertain => return Err(DynamicsError::Uncertain { step: k + 1, time: time + r.flight }),
        }
    }
    Ok(Trace { word: Word(word), points, flights, end: cur })
}

/// The length-`n` code of `z`; needs `S^{n-1} z` only.
pub fn code(q: &PolygonTable, z: &PhasePoint, n: usize) -> Result<Word, DynamicsError> {
    if n == 0 {
        return Ok(Word::default());
    }
    let t = trace(q, z, n - 1)?;
    let mut w = t.word;
    w.0.push(t.end.side);
    Ok(w)
}

/// Where the flow should start from.
#[derive(Clone, Copy, Debug)]
pub enum FlowStart {
    Boundary(PhasePoint),
    Interior(FlowPoint),
}

/// Unit-speed motion for time `t`. A collision landing exactly at time `t`
/// is reported with the post-reflection direction.
pub fn flow(q: &PolygonTable, start: FlowStart, t: f64) -> Result<FlowPoint, DynamicsError> {
    assert!(t >= 0.0, "flow time must be non-negative");
    let mut err = ErrRadius::initial(q);
    let resolution = SINGULAR_REL * q.diameter();
    let (mut x, mut d, mut from_side) = match start {
        FlowStart::Boundary(z) => {
            if !z.is_valid(q) {
                return Err(DynamicsError::InvalidPoint);
            }
            (z.position(q), z.direction(q), Some(z.side))
        }
        FlowStart::Interior(f) => (f.x, [f.psi.cos(), f.psi.sin()], None),
    };
    let mut remaining = t;
    let mut elapsed = 0.0;
    let mut k = 0;
    loop {
        match cast(q, x, d, from_side, err) {
            Cast::Side { side, u, t: hit } => {
                if remaining < hit - resolution {
                    let p = [x[0] + remaining * d[0], x[1] + remaining * d[1]];
                    return Ok(FlowPoint { x: p, psi: d[1].atan2(d[0]).rem_euclid(TAU) });
                }
                let z = reflect_at(q, side, u, d).ok_or(DynamicsError::Uncertain { step: k + 1, time: elapsed + hit })?;
                x = z.position(q);
                d = z.direction(q);
                from_side = Some(side);
                remaining -= hit;
                elapsed += hit;
                err.pos += hit * err.ang + 8.0 * f64::EPSILON * (q.diameter() + hit);
                err.ang += 8.0 * f64::EPSILON;
                if remaining <= resolution {
                    return Ok(FlowPoint { x, psi: d[1].atan2(d[0]).rem_euclid(TAU) });
                }
            }
            Cast::Vertex { vertex, t: hit } => {
                if remaining < hit - resolution {
                    let p = [x[0] + remaining * d[0], x[1] + remaining * d[1]];
                    return Ok(FlowPoint { x: p, psi: d[1].atan2(d[0]).rem_euclid(TAU) });
                }
                return Err(DynamicsError::SingularHit { step: k + 1, vertex, time: elapsed + hit });
            }
            Cast::Uncertain { t: hit } if remaining < hit => {
                let p = [x[0] + remaining * d[0], x[1] + remaining * d[1]];
                return Ok(FlowPoint { x: p, psi: d[1].atan2(d[0]).rem_euclid(TAU) });
            }
            Cast::Uncertain { t: hit } => return Err(DynamicsError::Uncertain { step: k + 1, time: elapsed + hit }),
            Cast::Escape => return Err(DynamicsError::Uncertain { step: k + 1, time: elapsed }),
        }
        k += 1;
    }
}

/// Circular distance between two angles.
pub fn angle_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Minimum over the flight from `z` to `S z` of the ρ-distance to the boundary
/// of the flow phase space (vectors at vertices, and tangent vectors).
pub fn min_clearance(q: &PolygonTable, z: &PhasePoint) -> Result<f64, DynamicsError> {
    let r = step(q, z);
    match r.next {
        Next::Hit(_) => Ok(clearance_of_flight(q, z, r.flight)),
        Next::Singular { vertex } => Err(DynamicsError::SingularHit { step: 1, vertex, time: r.flight }),
        Next::Uncertain => Err(DynamicsError::Uncertain { step: 1, time: r.flight }),
    }
}

/// Closed-form clearance of the flight segment of length `flight` leaving `z`.
pub fn clearance_of_flight(q: &PolygonTable, z: &PhasePoint, flight: f64) -> f64 {
    let x0 = z.position(q);
    let d = z.direction(q);
    let x1 = [x0[0] + flight * d[0], x0[1] + flight * d[1]];
    let psi = d[1].atan2(d[0]);
    let n = q.len();
    let mut best = f64::INFINITY;
    for v in 0..n {
        best = best.min(point_segment_dist(q.vertex_f64(v), x0, x1));
    }
    for f in 0..n {
        let tau = q.side_tangent(f);
        let phi = tau[1].atan2(tau[0]);
        let ang = angle_dist(psi, phi).min(angle_dist(psi, phi + PI));
        let dist = segment_segment_dist(x0, x1, q.vertex_f64(f), q.vertex_f64(f + 1));
        best = best.min(dist + ang);
    }
    best
}

/// Ternary answer for certified predicates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Verdict {
    True,
    False,
    Uncertain,
}

impl Verdict {
    pub fn from_bool(b: bool) -> Self {
        if b {
            Verdict::True
        } else {
            Verdict::False
        }
    }
}

/// Membership in `G_a^T`: every collision started within time `T` has clearance at least `a`.
pub fn stays_clear(q: &PolygonTable, z: &PhasePoint, a: f64, horizon: f64) -> Verdict {
    assert!(a > 0.0 && horizon > 0.0);
    let mut err = ErrRadius::initial(q);
    let mut cur = *z;
    let mut time = 0.0;
    loop {
        if time > horizon {
            return Verdict::True;
        }
        let (r, e) = step_err(q, &cur, err);
        err = e;
        match r.next {
            Next::Hit(p) => {
                if clearance_of_flight(q, &cur, r.flight) < a {
                    return Verdict::False;
                }
                time += r.flight;
                cur = p;
            }
            // A vertex on the flight means zero clearance.
            Next::Singular { .. } => return Verdict::False,
            Next::Uncertain => return Verdict::Uncertain,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::shapes;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, SQRT_2};

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn perpendicular_bounce() {
        let q = shapes::unit_square();
        let r = step(&q, &PhasePoint::new(0, 0.5, FRAC_PI_2));
        let Next::Hit(p) = r.next else { panic!("{r:?}") };
        assert_eq!(p.side, 2);
        assert!(close(p.s, 0.5) && close(p.theta, FRAC_PI_2) && close(r.flight, 1.0));
    }

    #[test]
    fn diagonal_from_corner_is_singular() {
        let q = shapes::unit_square();
        let r = step(&q, &PhasePoint::new(0, 0.0, FRAC_PI_4));
        assert_eq!(r.next, Next::Singular { vertex: 2 });
        assert!(close(r.flight, SQRT_2));
        let t = trace(&q, &PhasePoint::new(0, 0.0, FRAC_PI_4), 4);
        assert!(matches!(t, Err(DynamicsError::SingularHit { step: 1, vertex: 2, .. })));
    }

    /// Dense sampling along the ray, independent of the intersection formula.
    fn first_exit_by_marching(q: &PolygonTable, x: [f64; 2], d: [f64; 2]) -> f64 {
        let inside = |p: [f64; 2]| p[0] > 0.0 && p[0] < 1.0 && p[1] > 0.0 && p[1] < 1.0;
        let _ = q;
        let mut t = 1e-9;
        let h = 1e-5;
        while inside([x[0] + t * d[0], x[1] + t * d[1]]) {
            t += h;
        }
        // Refine by bisection on the last interval.
        let (mut lo, mut hi) = (t - h, t);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if inside([x[0] + mid * d[0], x[1] + mid * d[1]]) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    #[test]
    fn oblique_hit_matches_marching_oracle() {
        let q = shapes::unit_square();
        let z = PhasePoint::new(0, 0.25, FRAC_PI_4);
        let r = step(&q, &z);
        let Next::Hit(p) = r.next else { panic!() };
        assert_eq!(p.side, 1);
        let oracle = first_exit_by_marching(&q, z.position(&q), z.direction(&q));
        assert!((r.flight - oracle).abs() < 1e-9);
        assert!((r.flight - 0.75 * SQRT_2).abs() < 1e-12);
        assert!(close(p.s, 0.75));
        assert!(close(p.theta, FRAC_PI_4));
    }

    #[test]
    fn traces_and_codes() {
        let q = shapes::unit_square();
        let t = trace(&q, &PhasePoint::new(0, 0.5, FRAC_PI_2), 4).unwrap();
        assert_eq!(t.word.display(&q).to_string(), "ACAC");
        let t = trace(&q, &PhasePoint::new(0, 0.25, FRAC_PI_4), 4).unwrap();
        assert_eq!(t.word.display(&q).to_string(), "ABCD");
        // The unfolded ray (0.25,0) + t(1,1) meets x=1, y=1, x=2, y=2, and finally y=2 again at x=2.25.
        assert!((t.total_time() - 2.0 * SQRT_2).abs() < 1e-12);
        assert!(close(t.end.s, 0.25) && t.end.side == 0);
        assert_eq!(code(&q, &PhasePoint::new(0, 0.25, FRAC_PI_4), 2).unwrap().display(&q).to_string(), "AB");
    }

    #[test]
    fn flow_positions() {
        let q = shapes::unit_square();
        let z = PhasePoint::new(0, 0.25, FRAC_PI_2);
        let f = flow(&q, FlowStart::Boundary(z), 0.5).unwrap();
        assert!(close(f.x[0], 0.25) && close(f.x[1], 0.5) && close(f.psi, FRAC_PI_2));
        let f = flow(&q, FlowStart::Boundary(z), 1.5).unwrap();
        assert!(close(f.x[0], 0.25) && close(f.x[1], 0.5) && close(f.psi, 3.0 * FRAC_PI_2));
        let z = PhasePoint::new(0, 0.25, FRAC_PI_4);
        let f = flow(&q, FlowStart::Boundary(z), 0.75 * SQRT_2).unwrap();
        assert!(close(f.x[0], 1.0) && close(f.x[1], 0.75) && close(f.psi, 3.0 * FRAC_PI_4));
        let f = flow(&q, FlowStart::Interior(FlowPoint { x: [0.5, 0.5], psi: 0.0 }), 1.0).unwrap();
        assert!(close(f.x[0], 0.5) && close(f.psi, PI));
    }

    /// Dense time sampling of the ρ-distance, used as the oracle for the closed form.
    fn clearance_by_sampling(q: &PolygonTable, z: &PhasePoint) -> f64 {
        let r = step(q, z);
        let x0 = z.position(q);
        let d = z.direction(q);
        let psi = d[1].atan2(d[0]);
        let mut best = f64::INFINITY;
        let m = 20_000;
        for i in 0..=m {
            let t = r.flight * i as f64 / m as f64;
            let x = [x0[0] + t * d[0], x0[1] + t * d[1]];
            for v in 0..q.len() {
                let p = q.vertex_f64(v);
                best = best.min((x[0] - p[0]).hypot(x[1] - p[1]));
                let tau = q.side_tangent(v);
                let phi = tau[1].atan2(tau[0]);
                let ang = angle_dist(psi, phi).min(angle_dist(psi, phi + PI));
                best = best.min(point_segment_dist(x, q.vertex_f64(v), q.vertex_f64(v + 1)) + ang);
            }
        }
        best
    }

    #[test]
    fn clearance_closed_form_matches_sampling() {
        let q = shapes::unit_square();
        let z = PhasePoint::new(0, 0.5, FRAC_PI_2);
        let c = min_clearance(&q, &z).unwrap();
        assert!(close(c, 0.5));
        assert!((c - clearance_by_sampling(&q, &z)).abs() < 1e-4);
        assert!(c >= 0.4);
        let st = shapes::staircase();
        for (side, s, th) in [(0, 0.3f64, 1.1), (3, 0.1, 0.4), (5, 0.7, 2.0), (9, 0.5, 1.3)] {
            let z = PhasePoint::new(side, s.min(st.side_length(side) * 0.9), th);
            if let Ok(c) = min_clearance(&st, &z) {
                assert!((c - clearance_by_sampling(&st, &z)).abs() < 1e-3, "{z:?}");
            }
        }
    }

    #[test]
    fn clear_orbits() {
        let q = shapes::unit_square();
        assert_eq!(stays_clear(&q, &PhasePoint::new(0, 0.5, FRAC_PI_2), 0.4, 10.0), Verdict::True);
        assert_eq!(stays_clear(&q, &PhasePoint::new(0, 0.05, FRAC_PI_2), 0.1, 1.0), Verdict::False);
    }

    #[test]
    fn clear_orbit_matches_sampling_oracle() {
        let q = shapes::unit_square();
        let z = PhasePoint::new(0, 0.3, 2f64.atan());
        let fast = stays_clear(&q, &z, 0.05, 5.0);
        // Oracle: walk collisions within the horizon and sample each flight.
        let mut cur = z;
        let mut time = 0.0;
        let mut clear = true;
        while time <= 5.0 {
            if clearance_by_sampling(&q, &cur) < 0.05 {
                clear = false;
                break;
            }
            let r = step(&q, &cur);
            let Next::Hit(p) = r.next else { panic!() };
            time += r.flight;
            cur = p;
        }
        assert_eq!(fast, Verdict::from_bool(clear));
    }

    #[test]
    fn time_reversal_on_random_orbits() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for q in [shapes::unit_square(), shapes::right_triangle(), shapes::staircase()] {
            let mut done = 0;
            while done < 300 {
                let side = rng.random_range(0..q.len());
                let z = PhasePoint::new(side, rng.random_range(0.0..q.side_length(side)), rng.random_range(0.01..PI - 0.01));
                let n = rng.random_range(1..15);
                let Ok(t) = trace(&q, &z, n) else { continue };
                let fwd = code(&q, &z, n + 1).unwrap();
                let back = PhasePoint::new(t.end.side, t.end.s, PI - t.end.theta);
                let Ok(rev) = code(&q, &back, n + 1) else { continue };
                assert_eq!(rev, fwd.reversed());
                done += 1;
            }
        }
    }

    #[test]
    fn convex_words_never_repeat_a_side() {
        let q = shapes::right_triangle();
        for i in 0..200 {
            let z = PhasePoint::new(i % 3, 0.1 + 0.003 * i as f64, 0.2 + 0.01 * i as f64);
            if let Ok(t) = trace(&q, &z, 30) {
                assert!(t.word.0.windows(2).all(|w| w[0] != w[1]));
            }
        }
    }
}
