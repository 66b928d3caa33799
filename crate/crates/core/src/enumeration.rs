//! Breadth-first enumeration of realizable words and saddle connections,
//! the resulting counters, and fits of their growth.

use std::collections::BTreeSet;

use rayon::prelude::*;

use crate::dynamics::Word;
use crate::geometry::{IsometryFrame, PolygonTable};
use crate::unfolding::{Beam, ConeState, SaddleConnection, Unfolder};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct TreeNode {
    parent: u32,
    symbol: u16,
}

/// Factor-closed tree of realizable words. Layer `n` holds the words of
/// length `n` in lexicographic order.
#[derive(Clone, Debug, Default)]
pub struct WordTree {
    nodes: Vec<TreeNode>,
    /// `layers[n - 1]` is the node index range of length-`n` words.
    layers: Vec<std::ops::Range<usize>>,
}

const ROOT: u32 = u32::MAX;

impl WordTree {
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of words of length `n`.
    pub fn count(&self, n: usize) -> usize {
        self.layers.get(n.wrapping_sub(1)).map_or(0, |r| r.len())
    }

    pub fn word(&self, id: usize) -> Word {
        let mut out = Vec::new();
        let mut cur = id as u32;
        while cur != ROOT {
            let node = self.nodes[cur as usize];
            out.push(node.symbol as usize);
            cur = node.parent;
        }
        out.reverse();
        Word(out)
    }

    pub fn parent(&self, id: usize) -> Option<usize> {
        let p = self.nodes[id].parent;
        (p != ROOT).then_some(p as usize)
    }

    /// Words of length `n`, sorted.
    pub fn words(&self, n: usize) -> Vec<Word> {
        self.layers.get(n.wrapping_sub(1)).map_or_else(Vec::new, |r| r.clone().map(|i| self.word(i)).collect())
    }

    pub fn contains(&self, w: &Word) -> bool {
        let n = w.len();
        let Some(range) = self.layers.get(n.wrapping_sub(1)) else { return false };
        let ids: Vec<usize> = range.clone().collect();
        ids.binary_search_by(|&i| self.word(i).cmp(w)).is_ok()
    }
}

/// One row of counts for words of length `n` / connections with at most `n` links.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountRow {
    pub n: usize,
    pub p: u64,
    pub p_min: u64,
    pub p_max: u64,
    /// Oriented connections with at most `n` links.
    pub nc_oriented: u64,
    pub nc_unoriented: u64,
    /// Oriented connections with exactly `n` links.
    pub nc_exact: u64,
    pub uncertain: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CountTable {
    pub sides: usize,
    pub convex: bool,
    pub rows: Vec<CountRow>,
    /// Sorted geometric lengths of all enumerated oriented connections.
    pub lengths: Vec<f64>,
    /// `ng` is complete for lengths up to this value.
    pub ng_certified_upto: f64,
}

impl CountTable {
    pub fn n_max(&self) -> usize {
        self.rows.len()
    }

    pub fn p(&self, n: usize) -> u64 {
        self.rows[n - 1].p
    }

    /// Cumulative oriented count with at most `n` links (0 for `n = 0`).
    pub fn nc(&self, n: usize) -> u64 {
        if n == 0 {
            0
        } else {
            self.rows[n - 1].nc_oriented
        }
    }

    pub fn nc_unoriented(&self, n: usize) -> u64 {
        if n == 0 {
            0
        } else {
            self.rows[n - 1].nc_unoriented
        }
    }

    /// Oriented connections of length at most `t` among those enumerated.
    pub fn ng(&self, t: f64) -> u64 {
        self.lengths.partition_point(|&l| l <= t) as u64
    }

    /// A table holding only word counts, for tests and fits.
    pub fn from_counts(p: &[u64], nc: &[u64]) -> CountTable {
        let rows = p
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let nco = nc.get(i).copied().unwrap_or(0);
                CountRow {
                    n: i + 1,
                    p,
                    p_min: p,
                    p_max: p,
                    nc_oriented: nco,
                    nc_unoriented: nco / 2,
                    nc_exact: nco - if i == 0 { 0 } else { nc.get(i - 1).copied().unwrap_or(0) },
                    uncertain: 0,
                }
            })
            .collect();
        CountTable { sides: 0, convex: true, rows, lengths: Vec::new(), ng_certified_upto: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnumerationError {
    #[error("depth must be at least 1")]
    ZeroDepth,
    #[error("exact coordinates outgrew the precision cap")]
    PrecisionExhausted,
    #[error("counting identity needs a convex table")]
    NotConvex,
    #[error("no convention makes the counting identity hold")]
    NoConventionFits,
    #[error("need counts up to at least n = {needed}, have {have}")]
    InsufficientRange { needed: usize, have: usize },
}

#[derive(Clone, Debug)]
pub struct EnumerateOptions {
    pub connections: bool,
    /// Blocks of up to this many links feed the certified `ng` horizon; 0 skips it.
    pub horizon_blocks: usize,
    /// Give up once an exact beam coordinate needs more bits than this.
    pub max_bits: Option<u64>,
}

impl Default for EnumerateOptions {
    fn default() -> Self {
        EnumerateOptions { connections: true, horizon_blocks: 4, max_bits: None }
    }
}

/// The full result of one enumeration run.
#[derive(Clone, Debug)]
pub struct Enumeration {
    pub tree: WordTree,
    pub counts: CountTable,
    /// Oriented connections, sorted by links, then start, end and word.
    pub connections: Vec<SaddleConnection>,
}

struct Frontier {
    id: u32,
    word: Vec<usize>,
    beam: Beam,
    last: IsometryFrame,
    cones: ConeState,
}

struct Child {
    symbol: usize,
    frontier: Frontier,
    connections: Vec<SaddleConnection>,
}

fn expand(u: &Unfolder, f: &Frontier, opts: &EnumerateOptions) -> Result<Vec<Child>, EnumerationError> {
    let q = u.q;
    let depth = f.word.len();
    let last_side = *f.word.last().expect("nonempty");
    let mut out = Vec::new();
    for s in 0..q.len() {
        if s == last_side {
            continue;
        }
        let edge = u.edge(&f.last, s, depth - 1);
        let beam = f.beam.extend(q, &edge, last_side);
        if !beam.is_nonempty() {
            continue;
        }
        if opts.max_bits.is_some_and(|cap| beam.coordinate_bits() > cap) {
            return Err(EnumerationError::PrecisionExhausted);
        }
        let (left, right) = if edge.frame.parity > 0 { (&edge.seg.b, &edge.seg.a) } else { (&edge.seg.a, &edge.seg.b) };
        let cones = f.cones.extend(q, left, right);
        let last = u.next_frame(&f.last, s);
        let mut word = f.word.clone();
        word.push(s);
        let connections = if opts.connections {
            crate::unfolding::connections_at(u, &Word(word.clone()), &cones, &last, None)
        } else {
            Vec::new()
        };
        out.push(Child { symbol: s, frontier: Frontier { id: 0, word, beam, last, cones }, connections });
    }
    Ok(out)
}

/// Enumerates realizable words of length up to `n_max` and, optionally, the
/// saddle connections with up to `n_max` links.
pub fn enumerate(q: &PolygonTable, n_max: usize, opts: &EnumerateOptions) -> Result<Enumeration, EnumerationError> {
    if n_max == 0 {
        return Err(EnumerationError::ZeroDepth);
    }
    let u = Unfolder::new(q);
    let id = IsometryFrame::identity();
    let mut tree = WordTree::default();
    let mut connections: Vec<Vec<SaddleConnection>> = Vec::new();
    let mut frontier = Vec::new();
    let mut layer_conns = Vec::new();
    for s in 0..q.len() {
        let edge = u.edge(&id, s, 0);
        let beam = Beam::new(q, &edge);
        if !beam.is_nonempty() {
            continue;
        }
        let cones = ConeState::new(q, s);
        let word = Word(vec![s]);
        if opts.connections {
            layer_conns.extend(crate::unfolding::connections_at(&u, &word, &cones, &id, None));
        }
        tree.nodes.push(TreeNode { parent: ROOT, symbol: s as u16 });
        frontier.push(Frontier { id: (tree.nodes.len() - 1) as u32, word: word.0, beam, last: id.clone(), cones });
    }
    tree.layers.push(0..tree.nodes.len());
    connections.push(layer_conns);
    for _depth in 2..=n_max {
        let children = frontier.par_iter().map(|f| expand(&u, f, opts)).collect::<Result<Vec<Vec<Child>>, _>>()?;
        let start = tree.nodes.len();
        let mut next = Vec::with_capacity(children.iter().map(Vec::len).sum());
        let mut layer_conns = Vec::new();
        for (f, kids) in frontier.iter().zip(children) {
            for mut c in kids {
                tree.nodes.push(TreeNode { parent: f.id, symbol: c.symbol as u16 });
                c.frontier.id = (tree.nodes.len() - 1) as u32;
                layer_conns.extend(c.connections);
                next.push(c.frontier);
            }
        }
        tree.layers.push(start..tree.nodes.len());
        connections.push(layer_conns);
        frontier = next;
    }
    let mut rows = Vec::with_capacity(n_max);
    let mut cumulative = 0u64;
    let mut canon = BTreeSet::new();
    let mut all = Vec::new();
    for (i, mut layer) in connections.into_iter().enumerate() {
        layer.sort_by(crate::unfolding::compare_connections);
        cumulative += layer.len() as u64;
        for c in &layer {
            canon.insert(c.canonical_key(q));
        }
        let p = tree.count(i + 1) as u64;
        rows.push(CountRow {
            n: i + 1,
            p,
            p_min: p,
            p_max: p,
            nc_oriented: cumulative,
            nc_unoriented: canon.len() as u64,
            nc_exact: layer.len() as u64,
            uncertain: 0,
        });
        all.extend(layer);
    }
    let mut lengths: Vec<f64> = all.iter().map(|c| c.geom_length).collect();
    lengths.sort_by(f64::total_cmp);
    let ng_certified_upto = if opts.connections && opts.horizon_blocks > 0 {
        crate::unfolding::geometric_length_bounds(q, n_max + 1, opts.horizon_blocks.min(n_max)).lower
    } else {
        0.0
    };
    let counts = CountTable { sides: q.len(), convex: q.is_convex(), rows, lengths, ng_certified_upto };
    Ok(Enumeration { tree, counts, connections: all })
}

/// Word counts `p(1..=n_max)` and the tree.
pub fn enumerate_words(q: &PolygonTable, n_max: usize) -> Result<(WordTree, Vec<u64>), EnumerationError> {
    let e = enumerate(q, n_max, &EnumerateOptions { connections: false, horizon_blocks: 0, max_bits: None })?;
    let p = e.counts.rows.iter().map(|r| r.p).collect();
    Ok((e.tree, p))
}

/// Connections with up to `n_max` links together with their counters.
pub fn enumerate_saddle_connections(
    q: &PolygonTable,
    n_max: usize,
) -> Result<(Vec<SaddleConnection>, CountTable), EnumerationError> {
    let e = enumerate(q, n_max, &EnumerateOptions::default())?;
    Ok((e.connections, e.counts))
}

/// How connection counts enter the identity `p(n) = Σ_{j<n} N(j)`:
/// `N(j) = mult · C(j + shift) + offset`, with `C` the cumulative oriented
/// count (`C(j) = 0` for `j <= 0`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Convention {
    pub oriented: bool,
    pub shift: i32,
    /// Added to every term, in multiples of the side count.
    pub offset_sides: u32,
}

impl Convention {
    fn term(&self, counts: &CountTable, j: i64) -> Option<u64> {
        let k = j + self.shift as i64;
        let c = if k <= 0 {
            0
        } else if k as usize > counts.n_max() {
            return None;
        } else if self.oriented {
            counts.nc(k as usize)
        } else {
            counts.nc_unoriented(k as usize)
        };
        Some(c + self.offset_sides as u64 * counts.sides as u64)
    }

    /// `Σ_{j<n} N(j)`, if the counts reach far enough.
    pub fn predicted_p(&self, counts: &CountTable, n: usize) -> Option<u64> {
        (0..n as i64).map(|j| self.term(counts, j)).sum()
    }

    /// `N(0)` under this convention.
    pub fn nc0(&self, counts: &CountTable) -> u64 {
        self.term(counts, 0).unwrap_or(0)
    }
}

impl std::fmt::Display for Convention {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} connections, index shift {:+}, plus {} x sides per term",
            if self.oriented { "oriented" } else { "unoriented" },
            self.shift,
            self.offset_sides
        )
    }
}

pub fn candidate_conventions() -> Vec<Convention> {
    let mut out = Vec::new();
    for oriented in [true, false] {
        for shift in [0, -1, 1] {
            for offset_sides in [0, 1, 2] {
                out.push(Convention { oriented, shift, offset_sides });
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdentityReport {
    pub convention: Convention,
    /// Every candidate that fits for `n <= 3`.
    pub fitting: Vec<Convention>,
    /// `(n, p(n), predicted, holds)` for each checkable `n`.
    pub per_n: Vec<(usize, u64, u64, bool)>,
    pub nc0: u64,
}

impl IdentityReport {
    pub fn passed(&self) -> bool {
        self.per_n.iter().all(|r| r.3)
    }
}

/// Pins the convention from `n <= 3` and checks it for every `n <= n_max`.
pub fn check_counting_identity(counts: &CountTable) -> Result<IdentityReport, EnumerationError> {
    if !counts.convex {
        return Err(EnumerationError::NotConvex);
    }
    if counts.n_max() < 3 {
        return Err(EnumerationError::InsufficientRange { needed: 3, have: counts.n_max() });
    }
    let fits = |c: &Convention, upto: usize| (1..=upto).all(|n| c.predicted_p(counts, n) == Some(counts.p(n)));
    let fitting: Vec<Convention> = candidate_conventions().into_iter().filter(|c| fits(c, 3)).collect();
    let convention = fitting
        .iter()
        .copied()
        .find(|c| (1..=counts.n_max()).all(|n| c.predicted_p(counts, n).is_none_or(|v| v == counts.p(n))))
        .ok_or(EnumerationError::NoConventionFits)?;
    let per_n = (1..=counts.n_max())
        .filter_map(|n| convention.predicted_p(counts, n).map(|v| (n, counts.p(n), v, v == counts.p(n))))
        .collect();
    Ok(IdentityReport { convention, fitting, per_n, nc0: convention.nc0(counts) })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Clone, Debug, PartialEq)]
pub struct EntropyReport {
    /// `min` and `max` of `ln p(n) / ln n` over the window.
    pub lower_poly: f64,
    pub upper_poly: f64,
    /// `ln p(n_max) / ln n_max`.
    pub at_n_max: f64,
    pub p_slope: f64,
    pub nc_slope: f64,
    pub window: (usize, usize),
}

/// Polynomial-entropy estimates and log-log slopes over `window` (inclusive).
pub fn entropy_estimates(counts: &CountTable, window: (usize, usize)) -> Result<EntropyReport, EnumerationError> {
    let (lo, hi) = window;
    if counts.n_max() < 10 || lo < 2 || hi <= lo || hi > counts.n_max() {
        return Err(EnumerationError::InsufficientRange { needed: hi.max(10), have: counts.n_max() });
    }
    let ratio = |n: usize| (counts.p(n) as f64).ln() / (n as f64).ln();
    let ratios: Vec<f64> = (lo..=hi).map(ratio).collect();
    let p_pts: Vec<(f64, f64)> = (lo..=hi).map(|n| (n as f64, counts.p(n) as f64)).collect();
    let nc_pts: Vec<(f64, f64)> = (lo..=hi).map(|n| (n as f64, counts.nc(n) as f64)).collect();
    Ok(EntropyReport {
        lower_poly: ratios.iter().copied().fold(f64::INFINITY, f64::min),
        upper_poly: ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        at_n_max: ratio(counts.n_max()),
        p_slope: loglog_slope(&p_pts),
        nc_slope: if nc_pts.iter().all(|p| p.1 > 0.0) { loglog_slope(&nc_pts) } else { f64::NAN },
        window,
    })
}
