//! Unfoldings: reflected copies of the table along a word, line transversals
//! of the unfolded sides, saddle connections and saddle chains.
//!
//! Copy 0 is the table itself. Copy `j` is copy `j - 1` reflected across its
//! side `word[j]`, so a billiard orbit with code `word` becomes a straight
//! line crossing edge `j` (side `word[j]` of copy `j - 1`) for `j >= 1`.
//! Edge 0 is side `word[0]` of copy 0.

mod beam;
mod bounds;
mod chains;
mod connections;

pub use beam::{beam_feasible, Beam, BeamVerdict, Certificate, WitnessLine};
pub use bounds::{block_minima, geometric_length_bounds, LengthBounds};
pub use chains::{continuation, detect_saddle_chains, Continuation, SaddleChain, Side};
pub(crate) use connections::{compare as compare_connections, connections_at};
pub use connections::{
    find_saddle_connections, interior_at_vertex, sides_as_connections, start_side, ConeState, ConnectionKey,
    SaddleConnection,
};

use crate::dynamics::Word;
use crate::geometry::{reflect_across, IsometryFrame, Point2, PolygonTable, SegmentG};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum UnfoldError {
    #[error("word uses side {0}, but the table has fewer sides")]
    UnknownSide(usize),
    #[error("word repeats side {0} consecutively")]
    RepeatedSide(usize),
    #[error("empty word")]
    EmptyWord,
}

/// A side of the table placed in the unfolding plane.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnfoldedEdge {
    pub seg: SegmentG,
    pub source_side: usize,
    /// Frame of the copy the edge belongs to.
    pub frame: IsometryFrame,
    /// Index of that copy.
    pub copy: usize,
}

/// Per-table data shared by every unfolding of it.
#[derive(Clone, Debug)]
pub struct Unfolder<'a> {
    pub q: &'a PolygonTable,
    reflections: Vec<IsometryFrame>,
}

impl<'a> Unfolder<'a> {
    pub fn new(q: &'a PolygonTable) -> Self {
        let reflections = (0..q.len())
            .map(|i| reflect_across(&q.side(i)).expect("validated sides have positive length"))
            .collect();
        Unfolder { q, reflections }
    }

    /// Reflection across side `i` of the table itself.
    pub fn reflection(&self, i: usize) -> &IsometryFrame {
        &self.reflections[i]
    }

    /// Frame of the copy reached by reflecting `frame`'s copy across its side `i`.
    pub fn next_frame(&self, frame: &IsometryFrame, i: usize) -> IsometryFrame {
        frame.compose(&self.reflections[i])
    }

    pub fn edge(&self, frame: &IsometryFrame, side: usize, copy: usize) -> UnfoldedEdge {
        let (a, b) = self.q.side_endpoints(side);
        UnfoldedEdge { seg: SegmentG { a: frame.apply(a), b: frame.apply(b) }, source_side: side, frame: frame.clone(), copy }
    }

    /// All vertices of the copy with the given frame.
    pub fn copy_vertices(&self, frame: &IsometryFrame) -> Vec<Point2> {
        self.q.vertices().iter().map(|v| frame.apply(v)).collect()
    }

    /// Copy frames `0..word.len()`.
    pub fn frames(&self, word: &Word) -> Result<Vec<IsometryFrame>, UnfoldError> {
        check_word(self.q, word)?;
        let mut frames = vec![IsometryFrame::identity()];
        for &s in &word.symbols()[1..] {
            let next = self.next_frame(frames.last().expect("nonempty"), s);
            frames.push(next);
        }
        Ok(frames)
    }
}

pub(crate) fn check_word(q: &PolygonTable, word: &Word) -> Result<(), UnfoldError> {
    if word.is_empty() {
        return Err(UnfoldError::EmptyWord);
    }
    for (k, &s) in word.symbols().iter().enumerate() {
        if s >= q.len() {
            return Err(UnfoldError::UnknownSide(s));
        }
        if k > 0 && word.symbols()[k - 1] == s {
            return Err(UnfoldError::RepeatedSide(s));
        }
    }
    Ok(())
}

/// Places the sides named by `word` in the plane: edge 0 in copy 0 and edge
/// `j >= 1` in copy `j - 1`.
pub fn unfold_word(q: &PolygonTable, word: &Word) -> Result<Vec<UnfoldedEdge>, UnfoldError> {
    let u = Unfolder::new(q);
    let frames = u.frames(word)?;
    Ok(word
        .symbols()
        .iter()
        .enumerate()
        .map(|(j, &s)| {
            let copy = j.saturating_sub(1);
            u.edge(&frames[copy], s, copy)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{shapes, Rat};

    fn word(q: &PolygonTable, s: &str) -> Word {
        Word::parse(q, s).unwrap()
    }

    #[test]
    fn square_unfoldings() {
        let q = shapes::unit_square();
        let e = unfold_word(&q, &word(&q, "AC")).unwrap();
        assert_eq!(e[0].seg, SegmentG { a: Point2::from_ints(0, 0), b: Point2::from_ints(1, 0) });
        assert_eq!(e[1].seg, SegmentG { a: Point2::from_ints(1, 1), b: Point2::from_ints(0, 1) });
        assert!(e[1].frame.is_identity());
        let e = unfold_word(&q, &word(&q, "ACA")).unwrap();
        assert_eq!(e[2].seg, SegmentG { a: Point2::from_ints(0, 2), b: Point2::from_ints(1, 2) });
        let e = unfold_word(&q, &word(&q, "AB")).unwrap();
        assert_eq!(e[1].seg, SegmentG { a: Point2::from_ints(1, 0), b: Point2::from_ints(1, 1) });
    }

    #[test]
    fn parities_alternate() {
        let q = shapes::staircase();
        let w = Word(vec![0, 5, 2, 9, 4, 11, 3]);
        let u = Unfolder::new(&q);
        for (j, f) in u.frames(&w).unwrap().iter().enumerate() {
            assert_eq!(f.parity, if j % 2 == 0 { 1 } else { -1 });
            assert_eq!(f.orthogonality_defect(), Rat::ZERO);
        }
    }

    #[test]
    fn bad_words() {
        let q = shapes::unit_square();
        assert_eq!(unfold_word(&q, &Word(vec![0, 7])), Err(UnfoldError::UnknownSide(7)));
        assert_eq!(unfold_word(&q, &Word(vec![1, 1])), Err(UnfoldError::RepeatedSide(1)));
    }
}
