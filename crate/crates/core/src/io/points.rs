//! Point clouds as XYZ text or PLY (ascii or binary little endian).

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::vec3::Vec3;
use crate::Real;

/// One point per line, `x y z` followed by any ignored columns. Comments
/// (`#`) and blank lines are skipped; commas count as separators.
pub fn parse_xyz<T: Real>(text: &str) -> Result<Vec<Vec3<T>>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut toks = content.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty());
        let mut c = [T::zero(); 3];
        for v in &mut c {
            let tok = toks.next().ok_or_else(|| Error::parse(n + 1, "expected three coordinates"))?;
            *v = tok
                .parse()
                .map_err(|_| Error::parse(n + 1, format!("'{tok}' is not a number")))?;
        }
        let p = Vec3(c);
        if !p.is_finite() {
            return Err(Error::parse(n + 1, "non-finite coordinate"));
        }
        out.push(p);
    }
    Ok(out)
}

#[derive(Clone, Copy, PartialEq)]
enum PlyFormat {
    Ascii,
    BinaryLe,
}

#[derive(Clone, Copy)]
enum PlyType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl PlyType {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => PlyType::I8,
            "uchar" | "uint8" => PlyType::U8,
            "short" | "int16" => PlyType::I16,
            "ushort" | "uint16" => PlyType::U16,
            "int" | "int32" => PlyType::I32,
            "uint" | "uint32" => PlyType::U32,
            "float" | "float32" => PlyType::F32,
            "double" | "float64" => PlyType::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            PlyType::I8 | PlyType::U8 => 1,
            PlyType::I16 | PlyType::U16 => 2,
            PlyType::I32 | PlyType::U32 | PlyType::F32 => 4,
            PlyType::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            PlyType::I8 => b[0] as i8 as f64,
            PlyType::U8 => b[0] as f64,
            PlyType::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            PlyType::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            PlyType::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            PlyType::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            PlyType::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            PlyType::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

struct PlyHeader {
    format: PlyFormat,
    count: usize,
    /// Types of the vertex element's scalar properties, in order.
    props: Vec<PlyType>,
    xyz: [usize; 3],
    /// Line number of `end_header` and byte offset just after it.
    end_line: usize,
    body: usize,
}

fn parse_ply_header(bytes: &[u8]) -> Result<PlyHeader> {
    let mut pos = 0;
    let mut line_no = 0;
    let mut format = None;
    let mut count = None;
    let mut props = Vec::new();
    let mut names = Vec::new();
    let mut in_vertex = false;
    let mut seen_vertex = false;
    loop {
        let rest = &bytes[pos..];
        let len = rest.iter().position(|&b| b == b'\n').ok_or_else(|| Error::parse(line_no + 1, "unterminated PLY header"))?;
        let line = std::str::from_utf8(&rest[..len])
            .map_err(|_| Error::parse(line_no + 1, "header is not UTF-8"))?
            .trim_end_matches('\r');
        pos += len + 1;
        line_no += 1;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if line_no == 1 {
            if toks != ["ply"] {
                return Err(Error::parse(1, "missing 'ply' magic"));
            }
            continue;
        }
        match toks.as_slice() {
            ["format", "ascii", _] => format = Some(PlyFormat::Ascii),
            ["format", "binary_little_endian", _] => format = Some(PlyFormat::BinaryLe),
            ["format", f, ..] => return Err(Error::parse(line_no, format!("unsupported PLY format '{f}'"))),
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, n] => {
                if seen_vertex && !in_vertex {
                    // elements after the vertices do not affect parsing
                } else if *name == "vertex" {
                    count = Some(n.parse().map_err(|_| Error::parse(line_no, "bad vertex count"))?);
                    in_vertex = true;
                    seen_vertex = true;
                    continue;
                } else if !seen_vertex {
                    return Err(Error::parse(line_no, "elements before 'vertex' are not supported"));
                }
                in_vertex = false;
            }
            ["property", "list", ..] if in_vertex => {
                return Err(Error::parse(line_no, "list properties on vertices are not supported"));
            }
            ["property", ty, name] if in_vertex => {
                props.push(PlyType::parse(ty).ok_or_else(|| Error::parse(line_no, format!("unknown type '{ty}'")))?);
                names.push(name.to_string());
            }
            ["property", ..] => {}
            ["end_header"] => break,
            _ => return Err(Error::parse(line_no, format!("unexpected header line '{line}'"))),
        }
    }
    let format = format.ok_or_else(|| Error::parse(line_no, "missing format line"))?;
    let count = count.ok_or_else(|| Error::parse(line_no, "missing vertex element"))?;
    let find = |axis: &str| {
        names
            .iter()
            .position(|n| n == axis)
            .ok_or_else(|| Error::parse(line_no, format!("vertex property '{axis}' missing")))
    };
    Ok(PlyHeader {
        format,
        count,
        props,
        xyz: [find("x")?, find("y")?, find("z")?],
        end_line: line_no,
        body: pos,
    })
}

pub fn parse_ply<T: Real>(bytes: &[u8]) -> Result<Vec<Vec3<T>>> {
    let h = parse_ply_header(bytes)?;
    let mut out = Vec::with_capacity(h.count);
    let body = &bytes[h.body..];
    match h.format {
        PlyFormat::Ascii => {
            let text = std::str::from_utf8(body).map_err(|_| Error::Format("PLY body is not UTF-8".into()))?;
            let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
            for _ in 0..h.count {
                let (n, line) = lines
                    .next()
                    .ok_or_else(|| Error::Format(format!("PLY ends before {} vertices", h.count)))?;
                let line_no = h.end_line + n + 1;
                let vals: Vec<&str> = line.split_whitespace().collect();
                if vals.len() < h.props.len() {
                    return Err(Error::parse(line_no, format!("expected {} values", h.props.len())));
                }
                let mut c = [T::zero(); 3];
                for (k, v) in c.iter_mut().enumerate() {
                    let tok = vals[h.xyz[k]];
                    *v = tok
                        .parse()
                        .map_err(|_| Error::parse(line_no, format!("'{tok}' is not a number")))?;
                }
                out.push(Vec3(c));
            }
        }
        PlyFormat::BinaryLe => {
            let offsets: Vec<usize> = h
                .props
                .iter()
                .scan(0, |acc, t| {
                    let o = *acc;
                    *acc += t.size();
                    Some(o)
                })
                .collect();
            let stride: usize = h.props.iter().map(|t| t.size()).sum();
            if body.len() < stride * h.count {
                return Err(Error::Format(format!("PLY ends before {} vertices", h.count)));
            }
            for rec in body.chunks_exact(stride).take(h.count) {
                let c = h.xyz.map(|k| T::lit(h.props[k].read_le(&rec[offsets[k]..])));
                out.push(Vec3(c));
            }
        }
    }
    if let Some(i) = out.iter().position(|p| !p.is_finite()) {
        return Err(Error::Format(format!("PLY vertex {i} is not finite")));
    }
    Ok(out)
}

/// Reads `.ply` by header, anything else as XYZ text.
pub fn read_points<T: Real>(path: &Path) -> Result<Vec<Vec3<T>>> {
    let bytes = super::read_bytes(path)?;
    if bytes.starts_with(b"ply") {
        parse_ply(&bytes)
    } else {
        let text = String::from_utf8(bytes).map_err(|_| Error::Format(format!("{} is not UTF-8 text", path.display())))?;
        parse_xyz(&text)
    }
}

pub fn write_xyz<T: Real>(path: &Path, points: &[Vec3<T>]) -> Result<()> {
    let mut out = String::with_capacity(points.len() * 48);
    for p in points {
        let _ = writeln!(out, "{} {} {}", p.x(), p.y(), p.z());
    }
    super::write_atomic(path, out.as_bytes())
}

/// ASCII PLY with double coordinates.
pub fn write_ply<T: Real>(path: &Path, points: &[Vec3<T>]) -> Result<()> {
    let mut out = format!(
        "ply\nformat ascii 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nend_header\n",
        points.len()
    );
    for p in points {
        let _ = writeln!(out, "{} {} {}", p.x(), p.y(), p.z());
    }
    super::write_atomic(path, out.as_bytes())
}
