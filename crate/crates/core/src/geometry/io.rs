//! Polygon JSON: `{"name": ..., "labels": [...]?, "vertices": [[x, y], ...]}`.
//!
//! A coordinate is a JSON number (read exactly as a decimal) or a string
//! `"p/q"`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{validate_polygon, GeometryError, Point2, PolygonTable, Rat, ValidateOptions};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolygonFile {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    pub vertices: Vec<[Value; 2]>,
}

pub(crate) fn coord(v: &Value) -> Result<Rat, GeometryError> {
    let text = match v {
        Value::Number(n) => n.to_string(),
        Value::String(s) => s.clone(),
        other => return Err(GeometryError::Format(format!("bad coordinate {other}"))),
    };
    text.parse().map_err(|e: super::rational::ParseRatError| GeometryError::Format(e.to_string()))
}

impl PolygonFile {
    pub fn to_table(&self, opts: ValidateOptions) -> Result<PolygonTable, GeometryError> {
        let pts = self
            .vertices
            .iter()
            .map(|[x, y]| Ok(Point2::new(coord(x)?, coord(y)?)))
            .collect::<Result<Vec<_>, GeometryError>>()?;
        validate_polygon(pts, self.labels.clone(), opts)
    }
}

/// Parses and validates polygon JSON text. Returns the name and the table.
pub fn parse_polygon_json(text: &str, opts: ValidateOptions) -> Result<(String, PolygonTable), GeometryError> {
    let file: PolygonFile = serde_json::from_str(text).map_err(|e| GeometryError::Format(e.to_string()))?;
    let table = file.to_table(opts)?;
    Ok((file.name, table))
}

pub fn load_polygon(path: &Path, opts: ValidateOptions) -> Result<(String, PolygonTable), GeometryError> {
    let text = std::fs::read_to_string(path).map_err(|e| GeometryError::Format(format!("{}: {e}", path.display())))?;
    parse_polygon_json(&text, opts)
}

/// Serializes a table with exact `"p/q"` coordinates.
pub fn polygon_to_json(name: &str, q: &PolygonTable) -> String {
    let file = PolygonFile {
        name: name.to_string(),
        labels: Some(q.labels().to_vec()),
        vertices: q
            .vertices()
            .iter()
            .map(|p| [Value::String(p.x.to_string()), Value::String(p.y.to_string())])
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("serializable")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_numbers_and_fraction_strings() {
        let text = r#"{"name": "tri", "vertices": [[0, 0], ["1/3", 0], [0, 0.1]]}"#;
        let (name, q) = parse_polygon_json(text, ValidateOptions::default()).unwrap();
        assert_eq!(name, "tri");
        assert_eq!(q.vertex(1).x, Rat::new(1, 3));
        assert_eq!(q.vertex(2).y, Rat::new(1, 10));
    }

    #[test]
    fn round_trips_exactly() {
        let q = crate::geometry::shapes::staircase();
        let text = polygon_to_json("stairs", &q);
        let (_, back) = parse_polygon_json(&text, ValidateOptions::default()).unwrap();
        assert_eq!(back.vertices(), q.vertices());
        assert_eq!(back.labels(), q.labels());
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_polygon_json(r#"{"name": "x", "vertices": [[0, true]]}"#, ValidateOptions::default()).is_err());
        assert!(parse_polygon_json("not json", ValidateOptions::default()).is_err());
    }
}
