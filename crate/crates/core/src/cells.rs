//! n-cells of the billiard map: the set of phase points whose first `n`
//! symbols agree with those of a reference point.
//!
//! Balls use the L1 metric `|s - s'| + |θ - θ'|` on `(s, θ)` coordinates of
//! one side. Ball tests probe a mesh of the ball boundary and random
//! interior points; a `false` answer carries a witness with a different
//! word, a `true` answer is a sampling result.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dynamics::{code, DynamicsError, PhasePoint, Word};
use crate::geometry::PolygonTable;
use crate::unfolding::{beam_feasible, unfold_word, BeamVerdict, Certificate};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CellError {
    #[error("orbit hits vertex {vertex} at step {step}")]
    SingularOrbit { step: usize, vertex: usize },
    #[error("orbit could not be resolved at step {step}")]
    UncertainOrbit { step: usize },
    #[error("phase point is outside the phase space")]
    InvalidPoint,
    #[error("no phase point realizes the word")]
    EmptyCell,
    #[error("n must be at least {needed}")]
    InsufficientRange { needed: usize },
}

impl From<DynamicsError> for CellError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::SingularHit { step, vertex, .. } => CellError::SingularOrbit { step, vertex },
            DynamicsError::Uncertain { step, .. } => CellError::UncertainOrbit { step },
            DynamicsError::InvalidPoint => CellError::InvalidPoint,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Membership {
    In,
    Out,
    Uncertain,
}

/// The n-cell of a reference point, given by its word.
#[derive(Clone, Debug)]
pub struct CellProbe<'a> {
    q: &'a PolygonTable,
    pub word: Word,
    pub reference: PhasePoint,
}

impl CellProbe<'_> {
    pub fn n(&self) -> usize {
        self.word.len()
    }

    pub fn membership(&self, z: &PhasePoint) -> Membership {
        if z.side != self.word.symbols()[0] || !z.is_valid(self.q) {
            return Membership::Out;
        }
        match code(self.q, z, self.n()) {
            Ok(w) if w == self.word => Membership::In,
            Ok(_) | Err(DynamicsError::SingularHit { .. }) | Err(DynamicsError::InvalidPoint) => Membership::Out,
            Err(DynamicsError::Uncertain { .. }) => Membership::Uncertain,
        }
    }
}

/// The cell of `z` for words of length `n`.
pub fn cell_of<'a>(q: &'a PolygonTable, z: &PhasePoint, n: usize) -> Result<CellProbe<'a>, CellError> {
    if n == 0 {
        return Err(CellError::InsufficientRange { needed: 1 });
    }
    // Starting at a corner is singular.
    if z.side < q.len() && (z.s == 0.0 || z.s == q.side_length(z.side)) {
        let vertex = if z.s == 0.0 { z.side } else { (z.side + 1) % q.len() };
        return Err(CellError::SingularOrbit { step: 0, vertex });
    }
    if !z.is_valid(q) {
        return Err(CellError::InvalidPoint);
    }
    let word = code(q, z, n)?;
    Ok(CellProbe { q, word, reference: *z })
}

/// The cell of a word, with a reference point taken from its beam witness.
pub fn cell_of_word<'a>(q: &'a PolygonTable, word: &Word) -> Result<CellProbe<'a>, CellError> {
    let edges = unfold_word(q, word).map_err(|_| CellError::EmptyCell)?;
    match beam_feasible(q, &edges) {
        (BeamVerdict::Nonempty, Certificate::Witness(line)) => {
            let z = line.phase_point(q, word.symbols()[0]);
            let probe = CellProbe { q, word: word.clone(), reference: z };
            match probe.membership(&z) {
                Membership::In => Ok(probe),
                _ => Err(CellError::UncertainOrbit { step: 0 }),
            }
        }
        _ => Err(CellError::EmptyCell),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum BallVerdict {
    /// Every probe point lies in the cell.
    Inside,
    Outside { witness: PhasePoint },
    Uncertain,
}

impl BallVerdict {
    pub fn is_inside(&self) -> bool {
        matches!(self, BallVerdict::Inside)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct BallOptions {
    /// Boundary mesh step is `r / boundary_div`.
    pub boundary_div: usize,
    pub interior: usize,
    pub seed: u64,
}

impl Default for BallOptions {
    fn default() -> Self {
        BallOptions { boundary_div: 64, interior: 1000, seed: 0x0b1a_11ce }
    }
}

/// Probe points of the open L1 ball: the boundary mesh (corners first), then interior samples.
fn ball_points(z: &PhasePoint, r: f64, opts: &BallOptions) -> Vec<PhasePoint> {
    // Stay just inside the open ball.
    let rr = r * (1.0 - 1e-9);
    let per_edge = opts.boundary_div.max(1);
    let corners = [(rr, 0.0), (0.0, rr), (-rr, 0.0), (0.0, -rr)];
    let mut pts: Vec<PhasePoint> = corners.iter().map(|&(ds, dt)| PhasePoint::new(z.side, z.s + ds, z.theta + dt)).collect();
    for k in 0..4 {
        let (a, b) = (corners[k], corners[(k + 1) % 4]);
        for i in 1..per_edge {
            let t = i as f64 / per_edge as f64;
            pts.push(PhasePoint::new(z.side, z.s + a.0 + t * (b.0 - a.0), z.theta + a.1 + t * (b.1 - a.1)));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.interior {
        let (u, v): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        pts.push(PhasePoint::new(z.side, z.s + rr * (u + v) / 2.0, z.theta + rr * (u - v) / 2.0));
    }
    pts
}

/// Whether the L1 ball of radius `r` about `z` lies in the cell of `z` for words of length `n`.
pub fn ball_in_cell(q: &PolygonTable, z: &PhasePoint, r: f64, n: usize) -> Result<BallVerdict, CellError> {
    ball_in_cell_with(q, z, r, n, &BallOptions::default())
}

pub fn ball_in_cell_with(
    q: &PolygonTable,
    z: &PhasePoint,
    r: f64,
    n: usize,
    opts: &BallOptions,
) -> Result<BallVerdict, CellError> {
    assert!(r > 0.0, "radius must be positive");
    let cell = cell_of(q, z, n)?;
    Ok(probe_ball(&cell, r, opts))
}

fn probe_ball(cell: &CellProbe, r: f64, opts: &BallOptions) -> BallVerdict {
    let pts = ball_points(&cell.reference, r, opts);
    let verdicts: Vec<Membership> = pts.par_iter().map(|p| cell.membership(p)).collect();
    if let Some(i) = verdicts.iter().position(|&m| m == Membership::Out) {
        return BallVerdict::Outside { witness: pts[i] };
    }
    if verdicts.contains(&Membership::Uncertain) {
        BallVerdict::Uncertain
    } else {
        BallVerdict::Inside
    }
}

/// Reference function with summable `1 / (n f(n))`.
pub fn f_log_sq(n: usize) -> f64 {
    ((n as f64 + 1.0).ln().powi(2)).ceil()
}

#[derive(Clone, Debug, PartialEq)]
pub struct InradiusRow {
    pub n: usize,
    pub r_lower: f64,
    pub r_upper: f64,
    /// `1 / (n^3 f(n))`.
    pub ref_t1: f64,
    /// `1 / (n^2 f(n))`.
    pub ref_t2: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InradiusCurve {
    pub reference: PhasePoint,
    pub rows: Vec<InradiusRow>,
}

/// Ratio to which brackets are narrowed.
pub const BRACKET_RATIO: f64 = 1.05;

/// Inradius brackets of the cells of `z` for `n = 1..=n_max`.
pub fn inradius_curve(q: &PolygonTable, z: &PhasePoint, n_max: usize) -> Result<InradiusCurve, CellError> {
    inradius_curve_with(q, z, n_max, &BallOptions::default())
}

pub fn inradius_curve_with(
    q: &PolygonTable,
    z: &PhasePoint,
    n_max: usize,
    opts: &BallOptions,
) -> Result<InradiusCurve, CellError> {
    if n_max == 0 {
        return Err(CellError::InsufficientRange { needed: 1 });
    }
    // A ball this large always leaves the phase space.
    let mut hi = q.side_length(z.side) + std::f64::consts::PI;
    let mut rows = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let cell = cell_of(q, z, n)?;
        let (lo, h) = bracket(&cell, hi, opts);
        hi = h;
        let f = f_log_sq(n);
        let nf = n as f64;
        rows.push(InradiusRow { n, r_lower: lo, r_upper: hi, ref_t1: 1.0 / (nf.powi(3) * f), ref_t2: 1.0 / (nf * nf * f) });
    }
    Ok(InradiusCurve { reference: *z, rows })
}

/// Narrows `[lo, hi]` around the inradius, given that balls of radius `hi` do not fit.
fn bracket(cell: &CellProbe, mut hi: f64, opts: &BallOptions) -> (f64, f64) {
    let mut lo = 0.0;
    let mut r = hi / 2.0;
    while r > 1e-15 {
        match probe_ball(cell, r, opts) {
            BallVerdict::Inside => {
                lo = r;
                break;
            }
            BallVerdict::Outside { .. } => hi = r,
            BallVerdict::Uncertain => {}
        }
        r /= 2.0;
    }
    if lo == 0.0 {
        return (0.0, hi);
    }
    while hi > BRACKET_RATIO * lo {
        let mid = (lo * hi).sqrt();
        match probe_ball(cell, mid, opts) {
            BallVerdict::Inside => lo = mid,
            BallVerdict::Outside { .. } => hi = mid,
            // An unresolved probe leaves the bracket wider.
            BallVerdict::Uncertain => break,
        }
    }
    (lo, hi)
}

#[derive(Clone, Debug, PartialEq)]
pub struct StructureReport {
    pub sample_size: usize,
    /// Every sample joins one component of the sampled path graph.
    pub connected: bool,
    /// Share of samples in the largest component.
    pub connected_fraction: f64,
    /// Share of samples whose segment to the center stays in the cell.
    pub star_fraction: f64,
    pub star_shaped: bool,
    /// Share of sample pairs whose midpoint is in the cell, in the `(s, θ)` chart.
    pub convex_fraction: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct StructureOptions {
    pub samples: usize,
    pub max_attempts: usize,
    pub segment_checks: usize,
    pub neighbours: usize,
    pub seed: u64,
}

impl Default for StructureOptions {
    fn default() -> Self {
        StructureOptions { samples: 100, max_attempts: 200_000, segment_checks: 16, neighbours: 5, seed: 7 }
    }
}

fn segment_in_cell(cell: &CellProbe, a: &PhasePoint, b: &PhasePoint, checks: usize) -> bool {
    (1..checks).all(|i| {
        let t = i as f64 / checks as f64;
        let p = PhasePoint::new(a.side, a.s + t * (b.s - a.s), a.theta + t * (b.theta - a.theta));
        cell.membership(&p) == Membership::In
    })
}

/// Extent of the cell from its reference along direction `(ds, dθ)`, by bisection.
fn reach(cell: &CellProbe, ds: f64, dt: f64, cap: f64) -> f64 {
    let z = cell.reference;
    let at = |t: f64| PhasePoint::new(z.side, z.s + t * ds, z.theta + t * dt);
    if cell.membership(&at(cap)) == Membership::In {
        return cap;
    }
    let (mut lo, mut hi) = (0.0, cap);
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if cell.membership(&at(mid)) == Membership::In {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

struct Dsu(Vec<usize>);

impl Dsu {
    fn find(&mut self, i: usize) -> usize {
        let p = self.0[i];
        if p == i {
            return i;
        }
        let r = self.find(p);
        self.0[i] = r;
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        self.0[a] = b;
    }
}

/// Sampled connectivity, star-shapedness and chart convexity of the cell of `word`.
pub fn cell_structure_check(q: &PolygonTable, word: &Word, opts: &StructureOptions) -> Result<StructureReport, CellError> {
    let cell = cell_of_word(q, word)?;
    let z = cell.reference;
    let cap = q.side_length(z.side) + std::f64::consts::PI;
    // Bounding box from the reach along the axes and diagonals.
    let dirs = [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0), (1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)];
    let (mut s0, mut s1, mut t0, mut t1) = (z.s, z.s, z.theta, z.theta);
    for (ds, dt) in dirs {
        let r = reach(&cell, ds, dt, cap);
        s0 = s0.min(z.s + r * ds);
        s1 = s1.max(z.s + r * ds);
        t0 = t0.min(z.theta + r * dt);
        t1 = t1.max(z.theta + r * dt);
    }
    // Widen the box, since the cell may stick out between the probed directions.
    let (ws, wt) = (s1 - s0, t1 - t0);
    let (s0, s1) = ((s0 - ws).max(0.0), (s1 + ws).min(q.side_length(z.side)));
    let (t0, t1) = ((t0 - wt).max(0.0), (t1 + wt).min(std::f64::consts::PI));
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut samples = vec![z];
    let mut attempts = 0;
    while samples.len() < opts.samples && attempts < opts.max_attempts {
        attempts += 1;
        let p = PhasePoint::new(z.side, rng.random_range(s0..=s1), rng.random_range(t0..=t1));
        if cell.membership(&p) == Membership::In {
            samples.push(p);
        }
    }
    let m = samples.len();
    let mut ss: Vec<f64> = samples.iter().map(|p| p.s).collect();
    let mut ts: Vec<f64> = samples.iter().map(|p| p.theta).collect();
    ss.sort_by(f64::total_cmp);
    ts.sort_by(f64::total_cmp);
    let center = PhasePoint::new(z.side, ss[m / 2], ts[m / 2]);
    let center_in = cell.membership(&center) == Membership::In;
    let to_center: Vec<bool> =
        samples.par_iter().map(|p| center_in && segment_in_cell(&cell, p, &center, opts.segment_checks)).collect();
    let star_hits = to_center.iter().filter(|&&b| b).count();
    // Path graph: star edges plus edges to the nearest neighbours.
    let scale = (s1 - s0).max(1e-300);
    let tscale = (t1 - t0).max(1e-300);
    let edges: Vec<Vec<usize>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let mut near: Vec<(f64, usize)> = (0..m)
                .filter(|&j| j != i)
                .map(|j| {
                    let (a, b) = (&samples[i], &samples[j]);
                    (((a.s - b.s) / scale).abs() + ((a.theta - b.theta) / tscale).abs(), j)
                })
                .collect();
            near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            near.iter()
                .take(opts.neighbours)
                .filter(|(_, j)| segment_in_cell(&cell, &samples[i], &samples[*j], opts.segment_checks))
                .map(|&(_, j)| j)
                .collect()
        })
        .collect();
    let mut dsu = Dsu((0..=m).collect());
    for (i, hit) in to_center.iter().enumerate() {
        if *hit {
            dsu.union(i, m);
        }
    }
    for (i, list) in edges.iter().enumerate() {
        for &j in list {
            dsu.union(i, j);
        }
    }
    let mut sizes = vec![0usize; m + 1];
    for i in 0..m {
        let r = dsu.find(i);
        sizes[r] += 1;
    }
    let largest = sizes.iter().copied().max().unwrap_or(0);
    let pairs = m.saturating_sub(1).max(1);
    let mid_hits = (0..pairs.min(m.saturating_sub(1)))
        .filter(|&i| {
            let (a, b) = (&samples[i], &samples[(i * 7 + 3) % m]);
            let mid = PhasePoint::new(a.side, 0.5 * (a.s + b.s), 0.5 * (a.theta + b.theta));
            cell.membership(&mid) == Membership::In
        })
        .count();
    Ok(StructureReport {
        sample_size: m,
        connected: largest == m,
        connected_fraction: largest as f64 / m as f64,
        star_fraction: star_hits as f64 / m as f64,
        star_shaped: star_hits == m,
        convex_fraction: if m > 1 { mid_hits as f64 / pairs as f64 } else { 1.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::shapes;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    #[test]
    fn cell_words() {
        let q = shapes::unit_square();
        assert_eq!(cell_of(&q, &PhasePoint::new(0, 0.5, FRAC_PI_2), 2).unwrap().word, Word(vec![0, 2]));
        assert_eq!(cell_of(&q, &PhasePoint::new(0, 0.25, FRAC_PI_4), 2).unwrap().word, Word(vec![0, 1]));
        assert_eq!(cell_of(&q, &PhasePoint::new(0, 0.0, FRAC_PI_4), 2).unwrap_err(), CellError::SingularOrbit { step: 0, vertex: 0 });
        let corner = PhasePoint::new(0, 0.5, 2f64.atan());
        assert!(matches!(cell_of(&q, &corner, 2), Err(CellError::SingularOrbit { step: 1, vertex: 2 })));
        assert_eq!(cell_of(&q, &corner, 1).unwrap().word, Word(vec![0]));
    }

    #[test]
    fn membership_agrees_with_tracing() {
        let q = shapes::right_triangle();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let z = PhasePoint::new(0, rng.random_range(0.05..0.95), rng.random_range(0.1..3.0));
            let n = rng.random_range(1..=8);
            let Ok(cell) = cell_of(&q, &z, n) else { continue };
            for _ in 0..5 {
                let p = PhasePoint::new(0, z.s + rng.random_range(-0.05..0.05), z.theta + rng.random_range(-0.05..0.05));
                if cell.membership(&p) == Membership::In {
                    assert_eq!(code(&q, &p, n).unwrap(), cell.word);
                }
            }
        }
    }

    #[test]
    fn square_balls() {
        let q = shapes::unit_square();
        let z = PhasePoint::new(0, 0.5, FRAC_PI_2);
        assert_eq!(ball_in_cell(&q, &z, 0.1, 2).unwrap(), BallVerdict::Inside);
        let BallVerdict::Outside { witness } = ball_in_cell(&q, &z, 0.6, 2).unwrap() else { panic!() };
        assert!(code(&q, &witness, 2).map_or(true, |w| w != Word(vec![0, 2])));
        assert!(ball_in_cell(&q, &PhasePoint::new(0, 0.3, 1.1), 1e-9, 6).unwrap().is_inside());
    }

    #[test]
    fn ball_answers_are_monotone() {
        let q = shapes::unit_square();
        let z = PhasePoint::new(0, 0.37, 1.23);
        for n in 1..6 {
            for r in [0.3, 0.1, 0.03, 0.01] {
                if ball_in_cell(&q, &z, r, n + 1).unwrap().is_inside() {
                    assert!(ball_in_cell(&q, &z, r, n).unwrap().is_inside());
                }
                if ball_in_cell(&q, &z, r, n).unwrap().is_inside() {
                    assert!(ball_in_cell(&q, &z, r / 2.0, n).unwrap().is_inside());
                }
            }
        }
    }

    /// For the vertical chord the n-cell is cut out by `|Δs + (n - 1) Δcot θ| < 1/2`
    /// and `0 < s < 1`, so the inradius is close to `1 / (2(n - 1))`.
    #[test]
    fn vertical_chord_inradius() {
        let q = shapes::unit_square();
        let z = PhasePoint::new(0, 0.5, FRAC_PI_2);
        let curve = inradius_curve(&q, &z, 8).unwrap();
        for row in &curve.rows {
            assert!(row.r_upper <= BRACKET_RATIO * row.r_lower * 1.0001 || row.r_lower == 0.0);
            if row.n >= 3 {
                let approx = 0.5 / (row.n as f64 - 1.0);
                assert!(row.r_lower < approx * 1.1 && row.r_upper > approx * 0.9, "{row:?}");
            }
        }
        assert!(curve.rows.windows(2).all(|w| w[1].r_upper <= w[0].r_upper));
    }

    #[test]
    fn structure_of_small_cells() {
        let q = shapes::unit_square();
        let r = cell_structure_check(&q, &Word(vec![0, 2]), &StructureOptions::default()).unwrap();
        assert!(r.connected && r.star_shaped);
        assert_eq!(cell_structure_check(&q, &Word(vec![0, 0]), &StructureOptions::default()), Err(CellError::EmptyCell));
        let opts = StructureOptions { samples: 40, ..Default::default() };
        for w in [vec![0, 1, 2, 3, 0], vec![0, 2, 1, 3, 2, 0], vec![1, 2, 0, 2]] {
            let w = Word(w);
            match cell_structure_check(&q, &w, &opts) {
                Ok(r) => assert!(r.connected, "{w:?} {r:?}"),
                Err(CellError::EmptyCell) => {}
                Err(e) => panic!("{e}"),
            }
        }
    }
}
