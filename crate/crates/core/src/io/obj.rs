//! Wavefront OBJ: `v` and `f` records only.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::ExtractedMesh;
use crate::vec3::Vec3;
use crate::Real;

/// `v x y z` per vertex then `f a b c` per face, 1-based.
pub fn obj_to_string<T: Real>(mesh: &ExtractedMesh<T>) -> String {
    let mut out = String::with_capacity(32 * (mesh.num_vertices() + mesh.faces.len()));
    for v in &mesh.vertices {
        let p = v.position();
        let _ = writeln!(out, "v {} {} {}", p.x(), p.y(), p.z());
    }
    for f in &mesh.faces {
        let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    out
}

pub fn write_obj<T: Real>(path: &Path, mesh: &ExtractedMesh<T>) -> Result<()> {
    super::write_atomic(path, obj_to_string(mesh).as_bytes())
}

fn coord<T: Real>(tok: Option<&str>, line: usize) -> Result<T> {
    let tok = tok.ok_or_else(|| Error::parse(line, "vertex needs three coordinates"))?;
    tok.parse::<T>()
        .map_err(|_| Error::parse(line, format!("'{tok}' is not a number")))
}

/// Parses `v` and `f` records. Faces may use `v/vt/vn` references and
/// negative (relative) indices; polygons are fan-triangulated. Other records,
/// comments and blank lines are skipped.
pub fn parse_obj<T: Real>(text: &str) -> Result<ExtractedMesh<T>> {
    let mut positions: Vec<Vec3<T>> = Vec::new();
    // (line, raw indices) resolved once every vertex is known
    let mut polygons: Vec<(usize, Vec<i64>)> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        let mut toks = content.split_whitespace();
        match toks.next() {
            Some("v") => {
                let p = Vec3::new(coord(toks.next(), line)?, coord(toks.next(), line)?, coord(toks.next(), line)?);
                if !p.is_finite() {
                    return Err(Error::parse(line, "non-finite vertex coordinate"));
                }
                positions.push(p);
            }
            Some("f") => {
                let mut idx = Vec::new();
                for tok in toks {
                    let head = tok.split('/').next().unwrap_or("");
                    let i: i64 = head
                        .parse()
                        .map_err(|_| Error::parse(line, format!("bad face index '{tok}'")))?;
                    if i == 0 {
                        return Err(Error::parse(line, "face index 0 (indices are 1-based)"));
                    }
                    // relative indices refer to vertices read so far
                    idx.push(if i < 0 { positions.len() as i64 + i + 1 } else { i });
                }
                if idx.len() < 3 {
                    return Err(Error::parse(line, "face needs at least three vertices"));
                }
                polygons.push((line, idx));
            }
            _ => {}
        }
    }
    let nv = positions.len() as i64;
    let mut faces = Vec::new();
    for (line, idx) in polygons {
        if let Some(bad) = idx.iter().find(|&&i| i < 1 || i > nv) {
            return Err(Error::parse(
                line,
                format!("face references vertex {bad} but only {nv} vertices are defined"),
            ));
        }
        for k in 1..idx.len() - 1 {
            faces.push([idx[0] - 1, idx[k] - 1, idx[k + 1] - 1].map(|i| i as u32));
        }
    }
    Ok(ExtractedMesh::from_triangles(positions, faces))
}

pub fn read_obj<T: Real>(path: &Path) -> Result<ExtractedMesh<T>> {
    parse_obj(&super::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_preserves_positions_and_faces() {
        let m = ExtractedMesh::from_triangles(
            vec![Vec3::new(0.1f64, 0.2, 1.0 / 3.0), Vec3::new(1.0, 0.0, -0.0), Vec3::new(0.0, 1e-300, 7.0)],
            vec![[0, 1, 2]],
        );
        let back: ExtractedMesh<f64> = parse_obj(&obj_to_string(&m)).unwrap();
        assert_eq!(back.positions(), m.positions());
        assert_eq!(back.faces, m.faces);
    }

    #[test]
    fn tolerates_comments_blank_lines_and_extras() {
        let text = "# header\n\no tri\nv 0 0 0\nv 1 0 0 # trailing\nvn 0 0 1\nv 0 1 0 1.0\n\nf 1//1 2//1 3//1\nf -3 -2 -1\n";
        let m: ExtractedMesh<f64> = parse_obj(text).unwrap();
        assert_eq!(m.num_vertices(), 3);
        assert_eq!(m.faces, vec![[0, 1, 2], [0, 1, 2]]);
    }

    #[test]
    fn quads_are_fan_triangulated() {
        let text = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n";
        let m: ExtractedMesh<f64> = parse_obj(text).unwrap();
        assert_eq!(m.faces, vec![[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn missing_vertex_names_the_face_line() {
        let text = "v 0 0 0\nv 1 0 0\nv 0 1 0\n\nf 1 2 3\nf 1 2 9\n";
        match parse_obj::<f64>(text) {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 6);
                assert!(msg.contains('9'), "{msg}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_records() {
        assert!(matches!(parse_obj::<f64>("v 0 0\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_obj::<f64>("v 0 0 x\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_obj::<f64>("v 0 0 0\nf 1 1\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_obj::<f64>("v 0 0 0\nf 0 1 1\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_obj::<f64>("v nan 0 0\n"), Err(Error::Parse { line: 1, .. })));
    }
}
