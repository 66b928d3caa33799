//! Saddle chains: saddle connections that continue one another along a
//! single straight line of some unfolding.
//!
//! Orbits parallel to a connection and slightly to one side of it pass by
//! the end vertex either by reflecting off one of its sides or (at a reflex
//! vertex) by going straight on. The continuation direction, together with
//! the side of the line the nearby orbits lie on, determines the next
//! connection of the chain.

use std::collections::{BTreeMap, HashSet};

use crate::geometry::{Point2, PolygonTable, Rat};

use super::SaddleConnection;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn flip(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    pub(crate) fn after_parity(self, parity: i8) -> Side {
        if parity < 0 {
            self.flip()
        } else {
            self
        }
    }
}

/// How orbits on one side of a line through vertex `v` leave it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Continuation {
    pub direction: Point2,
    pub side: Side,
    /// Sides of the table the nearby orbits reflect off, in order.
    pub reflected_off: Vec<usize>,
}

/// Continuation at vertex `v` of the line arriving with direction `d` (table
/// coordinates), for orbits on `side` of it.
///
/// Near `v` only the directions of the two incident sides matter, so the
/// nearby orbit is modelled at unit offset with both sides as infinite rays.
/// At a convex corner it may reflect several times before it gets away.
pub fn continuation(q: &PolygonTable, v: usize, d: &Point2, side: Side) -> Continuation {
    let n = q.len();
    let p = q.vertex(v);
    let rays = [(v % n, q.vertex(v + 1) - p), ((v + n - 1) % n, q.vertex(v + n - 1) - p)];
    let mut dir = d.clone();
    let mut side = side;
    let mut base = match side {
        Side::Left => Point2::new(-&d.y, d.x.clone()),
        Side::Right => Point2::new(d.y.clone(), -&d.x),
    };
    let mut after: Option<Rat> = None;
    let mut last = None;
    let mut reflected_off = Vec::new();
    // Each reflection turns the direction away from the corner, so few are needed.
    for _ in 0..4 * n + 8 {
        let mut best: Option<(Rat, usize, Point2)> = None;
        for (k, (_, u)) in rays.iter().enumerate() {
            if last == Some(k) {
                continue;
            }
            let den = dir.cross(u);
            if den.is_zero() {
                continue;
            }
            let t = &-&base.cross(u) / &den;
            if after.as_ref().is_some_and(|a| t <= *a) {
                continue;
            }
            let hit = &base + &dir.scale(&t);
            if hit.dot(u).signum() > 0 && best.as_ref().is_none_or(|(bt, _, _)| t < *bt) {
                best = Some((t, k, hit));
            }
        }
        let Some((_, k, hit)) = best else { break };
        let u = &rays[k].1;
        let c = &(&dir.dot(u) + &dir.dot(u)) / &u.norm_sq();
        dir = &u.scale(&c) - &dir;
        side = side.flip();
        base = hit;
        after = Some(Rat::ZERO);
        last = Some(k);
        reflected_off.push(rays[k].0);
    }
    Continuation { direction: dir, side, reflected_off }
}

/// Consecutive connections of one straight line in an unfolding.
#[derive(Clone, Debug, PartialEq)]
pub struct SaddleChain {
    pub connections: Vec<SaddleConnection>,
    pub total_links: usize,
    /// Side of the line, at the first connection's start, of the orbits
    /// that follow the chain.
    pub side: Side,
    /// The last connection continues into the first.
    pub cyclic: bool,
}

impl SaddleChain {
    /// Vertex ids met by the chain, in order.
    pub fn vertices(&self) -> Vec<usize> {
        let mut v = vec![self.connections[0].start_vertex];
        v.extend(self.connections.iter().map(|c| c.end_vertex));
        if self.cyclic {
            v.pop();
        }
        v
    }

    pub fn len(&self) -> usize {
        self.connections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.connections.is_empty()
    }
}

fn parallel(a: &Point2, b: &Point2) -> bool {
    a.cross(b).is_zero() && a.dot(b).signum() > 0
}

/// Maximal chains formed by `connections` (all from the table `q`).
/// A connection with no neighbours forms a chain on its own.
pub fn detect_saddle_chains(connections: &[SaddleConnection], q: &PolygonTable) -> Vec<SaddleChain> {
    let mut by_start: BTreeMap<usize, Vec<(usize, Point2)>> = BTreeMap::new();
    for (i, c) in connections.iter().enumerate() {
        by_start.entry(c.start_vertex).or_default().push((i, c.start_direction(q)));
    }
    let sides = [Side::Left, Side::Right];
    let node = |i: usize, s: Side| 2 * i + (s == Side::Right) as usize;
    let m = connections.len();
    let mut succ: Vec<Option<(usize, Side)>> = vec![None; 2 * m];
    let mut has_pred = vec![false; 2 * m];
    for (i, c) in connections.iter().enumerate() {
        for s in sides {
            let cont = continuation(q, c.end_vertex, &c.arrival, s.after_parity(c.end_parity));
            let next = by_start
                .get(&c.end_vertex)
                .and_then(|list| list.iter().find(|(_, d)| parallel(d, &cont.direction)))
                .map(|&(j, _)| (j, cont.side));
            if let Some((j, s2)) = next {
                succ[node(i, s)] = Some((j, s2));
                has_pred[node(j, s2)] = true;
            }
        }
    }
    let mut visited = vec![false; 2 * m];
    let mut raw: Vec<(Vec<usize>, Side, bool)> = Vec::new();
    let walk = |i: usize, s: Side, visited: &mut Vec<bool>| {
        let mut path = vec![i];
        visited[node(i, s)] = true;
        let mut cur = (i, s);
        let mut cyclic = false;
        while let Some((j, s2)) = succ[node(cur.0, cur.1)] {
            if visited[node(j, s2)] {
                cyclic = (j, s2) == (i, s);
                break;
            }
            visited[node(j, s2)] = true;
            path.push(j);
            cur = (j, s2);
        }
        (path, s, cyclic)
    };
    for i in 0..m {
        for s in sides {
            if !has_pred[node(i, s)] && !visited[node(i, s)] {
                raw.push(walk(i, s, &mut visited));
            }
        }
    }
    for i in 0..m {
        for s in sides {
            if !visited[node(i, s)] {
                raw.push(walk(i, s, &mut visited));
            }
        }
    }
    // Identical or contained index lists describe the same chain.
    let mut seen = HashSet::new();
    raw.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    let mut kept: Vec<(Vec<usize>, Side, bool)> = Vec::new();
    for r in raw {
        if !seen.insert(r.0.clone()) {
            continue;
        }
        let inside = kept.iter().any(|k| k.0.len() > r.0.len() && k.0.windows(r.0.len()).any(|w| w == r.0.as_slice()));
        if !inside {
            kept.push(r);
        }
    }
    kept.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
    kept.into_iter()
        .map(|(path, side, cyclic)| {
            let connections: Vec<SaddleConnection> = path.iter().map(|&i| connections[i].clone()).collect();
            let total_links = connections.iter().map(|c| c.links).sum();
            SaddleChain { connections, total_links, side, cyclic }
        })
        .collect()
}
