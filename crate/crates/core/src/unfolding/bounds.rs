//! Brackets for the geometric length of connections with a given number of links.

use crate::geometry::{segment_segment_dist, PolygonTable};

use super::{Beam, UnfoldedEdge, Unfolder};

#[derive(Clone, Debug, PartialEq)]
pub struct LengthBounds {
    pub links: usize,
    pub lower: f64,
    pub upper: f64,
    /// Linear rate `max_m D_m / m`.
    pub rate: f64,
    /// `D_m` for `m = 1..=block_mins.len()`: the least distance between the
    /// first and last window of a realizable word with `m + 1` letters.
    pub block_mins: Vec<f64>,
}

/// Least window-0 to window-`m` distance over realizable words of length `m + 1`, for `m = 1..=m_max`.
pub fn block_minima(q: &PolygonTable, m_max: usize) -> Vec<f64> {
    let u = Unfolder::new(q);
    let mut mins = vec![f64::INFINITY; m_max];
    struct Node {
        first: UnfoldedEdge,
        last: UnfoldedEdge,
        beam: Beam,
    }
    let mut stack: Vec<(Node, usize)> = Vec::new();
    let id = crate::geometry::IsometryFrame::identity();
    for s in 0..q.len() {
        let e = u.edge(&id, s, 0);
        let beam = Beam::new(q, &e);
        stack.push((Node { first: e.clone(), last: e, beam }, 0));
    }
    while let Some((node, m)) = stack.pop() {
        if m >= 1 {
            let (a, b) = (node.first.seg.a.to_f64(), node.first.seg.b.to_f64());
            let (c, d) = (node.last.seg.a.to_f64(), node.last.seg.b.to_f64());
            let dist = segment_segment_dist(a, b, c, d);
            mins[m - 1] = mins[m - 1].min(dist);
        }
        if m == m_max {
            continue;
        }
        // The copy after the last window.
        let frame = if m == 0 { id.clone() } else { u.next_frame(&node.last.frame, node.last.source_side) };
        for s in 0..q.len() {
            if s == node.last.source_side {
                continue;
            }
            let e = u.edge(&frame, s, m);
            let beam = node.beam.extend(q, &e, node.last.source_side);
            if beam.is_nonempty() {
                stack.push((Node { first: node.first.clone(), last: e, beam }, m + 1));
            }
        }
    }
    // Guard against rounding in the distance evaluation.
    mins.iter().map(|&d| if d.is_finite() { (d * (1.0 - 1e-12) - 1e-15).max(0.0) } else { d }).collect()
}

/// Lower and upper bounds on the geometric length of any connection with
/// `links` links, using words of up to `m_max + 1` letters for the lower bound.
pub fn geometric_length_bounds(q: &PolygonTable, links: usize, m_max: usize) -> LengthBounds {
    let block_mins = block_minima(q, m_max);
    let mut lower: f64 = 0.0;
    let mut rate: f64 = 0.0;
    for (i, &d) in block_mins.iter().enumerate() {
        let m = i + 1;
        if d.is_finite() {
            lower = lower.max((links / m) as f64 * d);
            rate = rate.max(d / m as f64);
        }
    }
    LengthBounds { links, lower, upper: q.diameter() * links as f64, rate, block_mins }
}
