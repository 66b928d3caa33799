//! Perturbation experiments: persistence of saddle connections under small
//! vertex displacements, creation of new connections from saddle chains
//! along one-parameter families, the angular margin of a chain, and growth
//! exponents of perturbed tables.

use std::collections::{BTreeMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Deserialize;
use serde_json::Value;

use crate::enumeration::{enumerate, entropy_estimates, EntropyReport, EnumerateOptions, EnumerationError};
use crate::geometry::{parse_coord, point_segment_dist, GeometryError, Point2, PolygonFile, PolygonTable, Rat, ValidateOptions};
use crate::unfolding::{
    detect_saddle_chains, find_saddle_connections, ConnectionKey, SaddleChain, SaddleConnection, Side, Unfolder,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PerturbError {
    #[error("delta {delta} is not below half the minimal vertex spacing {limit}")]
    DeltaTooLarge { delta: f64, limit: f64 },
    #[error("perturbed polygon is invalid: {0}")]
    ValidationFailed(GeometryError),
    #[error("family: {0}")]
    Family(String),
    #[error(transparent)]
    Enumeration(#[from] EnumerationError),
    #[error("new connection {start}->{end} ({word}) near t = {t} has no parent chain")]
    UnmatchedNewConnection { start: usize, end: usize, word: String, t: f64 },
    #[error("no saddle connection leaves the chain's vertices within the horizon")]
    EmptySCSet,
    #[error("base table has no saddle chain at this depth")]
    NoChains,
}

fn displaced(q: &PolygonTable, disp: &[Point2], t: &Rat) -> Result<PolygonTable, PerturbError> {
    let verts = q.vertices().iter().zip(disp).map(|(v, d)| v + &d.scale(t)).collect();
    q.with_vertices(verts).map_err(PerturbError::ValidationFailed)
}

/// A base table with a straight-line displacement of every vertex,
/// sampled at `t = k / grid`.
#[derive(Clone, Debug)]
pub struct PolygonFamily {
    pub base: PolygonTable,
    pub displacement: Vec<Point2>,
    pub grid: usize,
}

#[derive(Deserialize)]
struct FamilyFile {
    base: PolygonFile,
    displacement: Vec<[Value; 2]>,
    #[serde(default)]
    grid: Option<usize>,
}

impl PolygonFamily {
    pub fn new(base: PolygonTable, displacement: Vec<Point2>, grid: usize) -> Result<Self, PerturbError> {
        if displacement.len() != base.len() {
            return Err(PerturbError::Family(format!("{} displacements for {} vertices", displacement.len(), base.len())));
        }
        if grid == 0 {
            return Err(PerturbError::Family("grid must be positive".into()));
        }
        let fam = PolygonFamily { base, displacement, grid };
        for k in 0..=grid {
            fam.at_step(k)?;
        }
        Ok(fam)
    }

    /// JSON: `{"base": <polygon>, "displacement": [[dx, dy], ...], "grid": 64}`.
    pub fn from_json(text: &str) -> Result<Self, PerturbError> {
        let f: FamilyFile = serde_json::from_str(text).map_err(|e| PerturbError::Family(e.to_string()))?;
        let base = f.base.to_table(ValidateOptions { fix_orientation: true }).map_err(PerturbError::ValidationFailed)?;
        let disp = f
            .displacement
            .iter()
            .map(|[x, y]| Ok(Point2::new(parse_coord(x)?, parse_coord(y)?)))
            .collect::<Result<Vec<_>, GeometryError>>()
            .map_err(PerturbError::ValidationFailed)?;
        PolygonFamily::new(base, disp, f.grid.unwrap_or(64))
    }

    pub fn at(&self, t: &Rat) -> Result<PolygonTable, PerturbError> {
        displaced(&self.base, &self.displacement, t)
    }

    pub fn at_step(&self, k: usize) -> Result<PolygonTable, PerturbError> {
        self.at(&Rat::new(k as i64, self.grid as i64))
    }

    /// Largest vertex displacement over the family.
    pub fn max_displacement(&self) -> f64 {
        self.displacement.iter().map(|d| d.norm_sq().to_f64().sqrt()).fold(0.0, f64::max)
    }
}

/// The staircase with vertices `(2.2, 1)` and `(2, 1)` moving down to height `0.8`.
pub fn staircase_family() -> PolygonFamily {
    let base = crate::geometry::shapes::staircase();
    let mut disp = vec![Point2::from_ints(0, 0); base.len()];
    for (x, y) in [("2.2", "1"), ("2", "1")] {
        let v = crate::geometry::shapes::vertex_index(&base, x, y).expect("staircase vertex");
        disp[v] = Point2::new(Rat::ZERO, Rat::new(-1, 5));
    }
    PolygonFamily::new(base, disp, 64).expect("valid family")
}

/// Half the smallest distance between two vertices.
pub fn half_vertex_spacing(q: &PolygonTable) -> f64 {
    let n = q.len();
    let mut best = f64::INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            best = best.min(q.vertex(i).dist(q.vertex(j)));
        }
    }
    best / 2.0
}

/// Displaces every vertex by an independent random vector of norm at most
/// `delta`, rounded toward zero to a dyadic grid so the result stays exact.
pub fn perturb(q: &PolygonTable, delta: f64, seed: u64) -> Result<PolygonTable, PerturbError> {
    assert!(delta >= 0.0, "delta must be nonnegative");
    if delta == 0.0 {
        return Ok(q.clone());
    }
    let limit = half_vertex_spacing(q);
    if delta >= limit {
        return Err(PerturbError::DeltaTooLarge { delta, limit });
    }
    let bits = (1024.0 / delta).log2().ceil().clamp(1.0, 60.0) as u32;
    let den = 1i64 << bits;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let disp: Vec<Point2> = (0..q.len())
        .map(|_| {
            let r = delta * rng.random::<f64>().sqrt();
            let a = rng.random_range(0.0..std::f64::consts::TAU);
            let k = |x: f64| Rat::new((x * den as f64).trunc() as i64, den);
            Point2::new(k(r * a.cos()), k(r * a.sin()))
        })
        .collect();
    displaced(q, &disp, &Rat::ONE)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PersistenceReport {
    pub n: usize,
    /// Cumulative oriented counts for `1..=n` links.
    pub nc_base: Vec<u64>,
    pub nc_hat: Vec<u64>,
    pub inequality_holds: bool,
    pub matched: usize,
    pub unmatched: Vec<ConnectionKey>,
}

impl PersistenceReport {
    pub fn fully_matched(&self) -> bool {
        self.unmatched.is_empty()
    }
}

/// Compares connection counts of `base` and `hat` (same vertex numbering)
/// and matches every base connection to one of `hat` with the same endpoints and word.
pub fn persistence_check(base: &PolygonTable, hat: &PolygonTable, n: usize) -> Result<PersistenceReport, PerturbError> {
    let opts = EnumerateOptions { connections: true, horizon_blocks: 0, max_bits: None };
    let a = enumerate(base, n, &opts)?;
    let b = enumerate(hat, n, &opts)?;
    let hat_keys: HashSet<ConnectionKey> = b.connections.iter().map(SaddleConnection::key).collect();
    let unmatched: Vec<ConnectionKey> =
        a.connections.iter().map(SaddleConnection::key).filter(|k| !hat_keys.contains(k)).collect();
    let nc_base: Vec<u64> = a.counts.rows.iter().map(|r| r.nc_oriented).collect();
    let nc_hat: Vec<u64> = b.counts.rows.iter().map(|r| r.nc_oriented).collect();
    Ok(PersistenceReport {
        n,
        inequality_holds: nc_base.iter().zip(&nc_hat).all(|(x, y)| y >= x),
        nc_base,
        nc_hat,
        matched: a.connections.len() - unmatched.len(),
        unmatched,
    })
}

/// Unfolded copy vertices along `c`, excluding its own endpoints, and the segment.
fn obstacles(q: &PolygonTable, c: &SaddleConnection) -> (Vec<[f64; 2]>, [f64; 2], [f64; 2]) {
    let u = Unfolder::new(q);
    let frames = u.frames(&c.word).expect("valid word");
    let s = q.vertex(c.start_vertex);
    let mut pts = Vec::new();
    for f in &frames {
        for v in u.copy_vertices(f) {
            if &v != s && v != c.end_point {
                pts.push(v.to_f64());
            }
        }
    }
    (pts, s.to_f64(), c.end_point.to_f64())
}

/// Least distance from a connection to the other vertices of its unfolding.
pub fn connection_clearance(q: &PolygonTable, c: &SaddleConnection) -> f64 {
    let (pts, a, b) = obstacles(q, c);
    pts.iter().map(|&p| point_segment_dist(p, a, b)).fold(f64::INFINITY, f64::min)
}

/// A displacement size below which every connection with up to `n` links persists:
/// the least clearance divided by `4 n`.
pub fn safe_delta(q: &PolygonTable, n: usize) -> Result<f64, PerturbError> {
    let e = enumerate(q, n, &EnumerateOptions { connections: true, horizon_blocks: 0, max_bits: None })?;
    let m = e.connections.par_iter().map(|c| connection_clearance(q, c)).reduce(|| f64::INFINITY, f64::min);
    Ok(m / (4.0 * n as f64))
}

#[derive(Clone, Debug, PartialEq)]
pub enum EventParent {
    /// Index into the base chains.
    BaseChain(usize),
    /// The line met `blocker` at the event, forming a chain of the moving table.
    Emergent { blocker: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainEvent {
    pub parent: EventParent,
    /// Vertices of the parent, in chain order.
    pub parent_vertices: Vec<usize>,
    /// Every base chain that could be the parent.
    pub candidates: Vec<usize>,
    /// `t*` lies in `(t_low, t_high]`.
    pub t_low: f64,
    pub t_high: f64,
    /// New connections at `t_high`.
    pub connections: Vec<SaddleConnection>,
    /// Endpoint pairs of the new connections, each pair once.
    pub pairs: Vec<(usize, usize)>,
    /// `C(j + 1, 2) - j` for a parent chain of `j` connections.
    pub bound: Option<usize>,
}

impl ChainEvent {
    pub fn contains_endpoints(&self) -> bool {
        self.connections
            .iter()
            .all(|c| self.parent_vertices.contains(&c.start_vertex) && self.parent_vertices.contains(&c.end_vertex))
    }

    pub fn within_bound(&self) -> bool {
        self.bound.is_none_or(|b| self.pairs.len() <= b)
    }
}

#[derive(Clone, Debug)]
pub struct ScanReport {
    pub base_chains: Vec<SaddleChain>,
    pub events: Vec<ChainEvent>,
}

#[derive(Clone, Copy, Debug)]
pub struct ScanOptions {
    pub bisection_steps: u32,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions { bisection_steps: 20 }
    }
}

fn has_key(q: &PolygonTable, key: &ConnectionKey) -> bool {
    find_saddle_connections(q, &key.2).is_ok_and(|cs| cs.iter().any(|c| c.start_vertex == key.0 && c.end_vertex == key.1))
}

/// Nearest unfolded vertex to the segment of the word `key.2` from `key.0`
/// to `key.1`, if that segment were straight in `q`.
fn blocker(q: &PolygonTable, near: &SaddleConnection) -> usize {
    let u = Unfolder::new(q);
    let frames = u.frames(&near.word).expect("valid word");
    let s = q.vertex(near.start_vertex).to_f64();
    let last = frames.last().expect("nonempty");
    let e = last.apply(q.vertex(near.end_vertex)).to_f64();
    let mut best = (f64::INFINITY, 0);
    for f in &frames {
        for (i, v) in u.copy_vertices(f).iter().enumerate() {
            let p = v.to_f64();
            if p == s || p == e {
                continue;
            }
            let d = point_segment_dist(p, s, e);
            if d < best.0 {
                best = (d, i);
            }
        }
    }
    best.1
}

/// Scans a family for connections absent from the base table, localizes
/// when each appears, and assigns it to the chain it came from.
pub fn chain_creation_scan(family: &PolygonFamily, n: usize, opts: &ScanOptions) -> Result<ScanReport, PerturbError> {
    let q0 = &family.base;
    let eopts = EnumerateOptions { connections: true, horizon_blocks: 0, max_bits: None };
    let base = enumerate(q0, n, &eopts)?;
    let base_keys: HashSet<ConnectionKey> = base.connections.iter().map(SaddleConnection::key).collect();
    let base_chains = detect_saddle_chains(&base.connections, q0);
    if family.displacement.iter().all(|d| d.x.is_zero() && d.y.is_zero()) {
        return Ok(ScanReport { base_chains, events: Vec::new() });
    }
    let steps: Vec<Result<Vec<SaddleConnection>, PerturbError>> = (1..=family.grid)
        .into_par_iter()
        .map(|k| Ok(enumerate(&family.at_step(k)?, n, &eopts)?.connections))
        .collect();
    // First grid step at which each new key appears.
    let mut first: BTreeMap<ConnectionKey, (usize, SaddleConnection)> = BTreeMap::new();
    for (i, conns) in steps.into_iter().enumerate() {
        for c in conns? {
            let key = c.key();
            if !base_keys.contains(&key) {
                first.entry(key).or_insert((i + 1, c));
            }
        }
    }
    let grid = Rat::from_int(family.grid as i64);
    let located: Vec<Result<(ConnectionKey, Rat, Rat, SaddleConnection), PerturbError>> = first
        .into_par_iter()
        .map(|(key, (k, c))| {
            let mut lo = &Rat::from_int(k as i64 - 1) / &grid;
            let mut hi = &Rat::from_int(k as i64) / &grid;
            for _ in 0..opts.bisection_steps {
                let mid = &(&lo + &hi) / &Rat::from_int(2);
                if has_key(&family.at(&mid)?, &key) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            Ok((key, lo, hi, c))
        })
        .collect();
    type Group = (EventParent, f64, f64, Vec<SaddleConnection>, Vec<usize>);
    let mut groups: BTreeMap<(Vec<usize>, String, String), Group> = BTreeMap::new();
    for item in located {
        let (key, lo, hi, c) = item?;
        let (parent, verts, candidates) = if lo.is_zero() {
            // At the base the new line runs through a vertex: the chain S -> B -> E.
            let b = blocker(q0, &c);
            let through = |v: &[usize]| v.windows(3).any(|w| w == [key.0, b, key.1] || w == [key.1, b, key.0]);
            let mut candidates: Vec<usize> = (0..base_chains.len()).filter(|&i| through(&base_chains[i].vertices())).collect();
            if candidates.is_empty() {
                candidates = (0..base_chains.len())
                    .filter(|&i| {
                        let v = base_chains[i].vertices();
                        v.contains(&key.0) && v.contains(&key.1)
                    })
                    .collect();
            }
            // The longest candidate, the first among equals.
            let Some(&best) = candidates.iter().min_by_key(|&&i| (std::cmp::Reverse(base_chains[i].len()), i)) else {
                return Err(PerturbError::UnmatchedNewConnection {
                    start: key.0,
                    end: key.1,
                    word: key.2.display(q0).to_string(),
                    t: hi.to_f64(),
                });
            };
            (EventParent::BaseChain(best), base_chains[best].vertices(), candidates)
        } else {
            let b = blocker(&family.at(&lo)?, &c);
            (EventParent::Emergent { blocker: b }, vec![key.0, b, key.1], Vec::new())
        };
        let entry = groups
            .entry((verts.clone(), lo.to_string(), hi.to_string()))
            .or_insert_with(|| (parent, lo.to_f64(), hi.to_f64(), Vec::new(), Vec::new()));
        entry.3.push(c);
        for i in candidates {
            if !entry.4.contains(&i) {
                entry.4.push(i);
            }
        }
    }
    let events = groups
        .into_iter()
        .map(|((verts, _, _), (parent, t_low, t_high, connections, mut candidates))| {
            candidates.sort();
            let mut pairs: Vec<(usize, usize)> =
                connections.iter().map(|c| (c.start_vertex.min(c.end_vertex), c.start_vertex.max(c.end_vertex))).collect();
            pairs.sort();
            pairs.dedup();
            let bound = match parent {
                EventParent::BaseChain(i) => {
                    let j = base_chains[i].len();
                    Some((j + 1) * j / 2 - j)
                }
                EventParent::Emergent { .. } => None,
            };
            ChainEvent { parent, parent_vertices: verts, candidates, t_low, t_high, connections, pairs, bound }
        })
        .collect();
    Ok(ScanReport { base_chains, events })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThetaMargin {
    pub angle: f64,
    /// The margin vanishes to working precision.
    pub degenerate: bool,
    pub sc_size: usize,
    /// Connections leaving a chain vertex along the chain itself; they
    /// extend the chain and are not part of the margin.
    pub extensions: usize,
}

fn angle_between(a: &Point2, b: &Point2) -> f64 {
    let (a, b) = (a.to_f64(), b.to_f64());
    (a[0] * b[1] - a[1] * b[0]).atan2(a[0] * b[0] + a[1] * b[1]).abs()
}

/// Directions in which the chain leaves each of its vertices.
fn chain_directions(q: &PolygonTable, chain: &SaddleChain) -> Vec<(usize, Point2)> {
    let mut out: Vec<(usize, Point2)> = chain.connections.iter().map(|c| (c.start_vertex, c.start_direction(q))).collect();
    let mut side = chain.side;
    let mut leave = None;
    for c in &chain.connections {
        let cont = crate::unfolding::continuation(q, c.end_vertex, &c.arrival, side.after_parity(c.end_parity));
        side = cont.side;
        leave = Some((c.end_vertex, cont.direction));
    }
    out.extend(leave);
    out
}

/// Least angle between the chain's direction at its vertices and the other
/// connections with up to `n0` links leaving those vertices.
pub fn theta_margin(q: &PolygonTable, chain: &SaddleChain, n0: usize) -> Result<ThetaMargin, PerturbError> {
    let e = enumerate(q, n0, &EnumerateOptions { connections: true, horizon_blocks: 0, max_bits: None })?;
    let own: HashSet<ConnectionKey> = chain.connections.iter().map(SaddleConnection::key).collect();
    let dirs = chain_directions(q, chain);
    let mut best = f64::INFINITY;
    let mut sc_size = 0;
    let mut extensions = 0;
    for c in e.connections.iter().filter(|c| !own.contains(&c.key())) {
        let sd = c.start_direction(q);
        let at_chain: Vec<&Point2> = dirs.iter().filter(|(v, _)| *v == c.start_vertex).map(|(_, d)| d).collect();
        if at_chain.is_empty() {
            continue;
        }
        if at_chain.iter().any(|d| sd.cross(d).is_zero() && sd.dot(d).signum() > 0) {
            extensions += 1;
            continue;
        }
        sc_size += 1;
        for d in at_chain {
            best = best.min(angle_between(&sd, d));
        }
    }
    if sc_size == 0 {
        return Err(PerturbError::EmptySCSet);
    }
    Ok(ThetaMargin { angle: best, degenerate: best <= 1e-12, sc_size, extensions })
}

/// A one-connection chain made of `c`.
pub fn singleton_chain(c: &SaddleConnection) -> SaddleChain {
    SaddleChain { connections: vec![c.clone()], total_links: c.links, side: Side::Left, cyclic: false }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitReport {
    pub base: EntropyReport,
    /// `(delta, seed, fit)` for each perturbed companion.
    pub perturbed: Vec<(f64, u64, EntropyReport)>,
}

/// Growth exponents of `q` and of perturbed copies over `window`.
pub fn exponent_fit(
    q: &PolygonTable,
    n_max: usize,
    window: (usize, usize),
    companions: &[(f64, usize, u64)],
) -> Result<FitReport, PerturbError> {
    let opts = EnumerateOptions { connections: true, horizon_blocks: 0, max_bits: None };
    let base = entropy_estimates(&enumerate(q, n_max, &opts)?.counts, window)?;
    let mut perturbed = Vec::new();
    for &(delta, depth, seed) in companions {
        let hat = perturb(q, delta, seed)?;
        let w = (window.0.min(depth / 2).max(2), depth);
        perturbed.push((delta, seed, entropy_estimates(&enumerate(&hat, depth, &opts)?.counts, w)?));
    }
    Ok(FitReport { base, perturbed })
}
