//! ASCII PLY with a single `vertex` element carrying x, y, z.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Point3, PointCloud};
use crate::error::{Error, Result};

pub fn to_string(cloud: &PointCloud) -> String {
    let mut s = String::with_capacity(64 + cloud.len() * 40);
    s.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(s, "element vertex {}", cloud.len());
    s.push_str("property float x\nproperty float y\nproperty float z\nend_header\n");
    for p in cloud.points() {
        // `{}` on f64 prints the shortest representation that parses back exactly.
        let _ = writeln!(s, "{} {} {}", p.x, p.y, p.z);
    }
    s
}

fn bad(detail: impl Into<String>) -> Error {
    Error::Format { what: "PLY", detail: detail.into() }
}

pub fn parse(text: &str) -> Result<PointCloud> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(bad("missing 'ply' magic"));
    }
    let mut vertex_count: Option<usize> = None;
    let mut in_vertex = false;
    let mut props: Vec<String> = Vec::new();
    let mut rows_before_vertex = 0usize;
    loop {
        let line = lines.next().ok_or_else(|| bad("missing end_header"))?.trim();
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("format") => {
                if tok.next() != Some("ascii") {
                    return Err(bad("only ascii PLY is supported"));
                }
            }
            Some("comment") | Some("obj_info") | None => {}
            Some("element") => {
                let name = tok.next().ok_or_else(|| bad("element without name"))?;
                let count: usize =
                    tok.next().and_then(|c| c.parse().ok()).ok_or_else(|| bad("element without count"))?;
                in_vertex = name == "vertex";
                if in_vertex {
                    vertex_count = Some(count);
                } else if vertex_count.is_none() {
                    rows_before_vertex += count;
                }
            }
            Some("property") => {
                if in_vertex {
                    let name = tok.last().ok_or_else(|| bad("property without name"))?;
                    props.push(name.to_string());
                }
            }
            Some("end_header") => break,
            Some(other) => return Err(bad(format!("unexpected header line '{other}'"))),
        }
    }
    let count = vertex_count.ok_or_else(|| bad("no vertex element"))?;
    let col = |name: &str| {
        props.iter().position(|p| p == name).ok_or_else(|| bad(format!("vertex has no '{name}' property")))
    };
    let (cx, cy, cz) = (col("x")?, col("y")?, col("z")?);
    let mut body = lines.filter(|l| !l.trim().is_empty()).skip(rows_before_vertex);
    let mut points = Vec::with_capacity(count);
    for row in 0..count {
        let line = body.next().ok_or_else(|| bad(format!("expected {count} vertices, found {row}")))?;
        let vals: Vec<&str> = line.split_whitespace().collect();
        let get = |c: usize| -> Result<f64> {
            vals.get(c).and_then(|v| v.parse::<f64>().ok()).ok_or_else(|| bad(format!("vertex {row}: bad column {c}")))
        };
        points.push(Point3::new(get(cx)?, get(cy)?, get(cz)?));
    }
    PointCloud::new(points)
}

pub fn write(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_string(cloud)).map_err(|e| Error::io(path, e))
}

pub fn read(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reads_foreign_header_with_extra_properties() {
        let text = "ply\nformat ascii 1.0\ncomment made elsewhere\nelement vertex 2\n\
                    property uchar red\nproperty double x\nproperty double y\nproperty double z\n\
                    element face 0\nproperty list uchar int vertex_indices\nend_header\n\
                    255 0.1 0.2 0.3\n0 1 2 3\n";
        let cloud = parse(text).unwrap();
        assert_eq!(cloud.points(), &[Point3::new(0.1, 0.2, 0.3), Point3::new(1.0, 2.0, 3.0)]);
    }

    #[test]
    fn rejects_binary_and_truncated() {
        assert!(parse("ply\nformat binary_little_endian 1.0\nend_header\n").is_err());
        assert!(parse("ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\nend_header\n1 2 3\n").is_err());
        assert!(parse("not a ply").is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_exact(pts in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3, -1e3f64..1e3), 0..50)) {
            let cloud = PointCloud::new(pts.into_iter().map(|(x, y, z)| Point3::new(x, y, z)).collect()).unwrap();
            prop_assert_eq!(parse(&to_string(&cloud)).unwrap(), cloud);
        }
    }
}
