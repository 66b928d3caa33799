//! Planar geometric kernel: exact points and predicates, isometries, and
//! validated polygon tables.

mod frame;
mod io;
mod polygon;
mod predicates;
pub mod rational;
pub mod shapes;

pub use frame::{reflect_across, FrameF64, IsometryFrame};
pub(crate) use io::coord as parse_coord;
pub use io::{load_polygon, parse_polygon_json, polygon_to_json, PolygonFile};
pub use polygon::{validate_polygon, PolygonTable, ValidateOptions};
pub use predicates::{
    on_segment, orient, orient_approx, orient_sign, point_segment_dist, segment_segment_dist,
    segments_touch, ApproxPoint2, Orientation, Point2, SegmentG,
};
pub use rational::Rat;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GeometryError {
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("polygon sides {0} and {1} intersect")]
    SelfIntersecting(usize, usize),
    #[error("vertex {0} is repeated or collinear with its neighbours")]
    DegenerateVertex(usize),
    #[error("vertices are in clockwise order")]
    ClockwiseInput,
    #[error("segment has zero length")]
    DegenerateSegment,
    #[error("{labels} labels given for {sides} sides")]
    LabelCount { labels: usize, sides: usize },
    #[error("side labels must be distinct")]
    DuplicateLabel,
    #[error("polygon file: {0}")]
    Format(String),
}
