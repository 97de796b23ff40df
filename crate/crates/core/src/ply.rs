//! PLY 1.0 reader and writer.
//!
//! Reads `ascii` and `binary_little_endian` bodies. Vertex positions come from
//! the `x`, `y`, `z` properties (any scalar type); `nx`, `ny`, `nz` are picked
//! up as normals when all three are present. Every other property, and every
//! element other than `vertex` and `face`, is skipped. Faces with more than
//! three corners are fan-triangulated from their first corner.

use std::fmt::Write as _;

use crate::geom::Vec3;
use crate::mesh::Mesh;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlyError {
    #[error("not a PLY file (missing `ply` magic line)")]
    MissingMagic,
    #[error("unsupported PLY format `{0}`")]
    UnsupportedFormat(String),
    #[error("malformed PLY header at line {line}: {reason}")]
    BadHeader { line: usize, reason: String },
    #[error("element `{element}` declares {expected} entries but the body ends after {found}")]
    CountMismatch {
        element: String,
        expected: usize,
        found: usize,
    },
    #[error("bad value `{token}` in element `{element}` entry {index}")]
    BadValue {
        element: String,
        index: usize,
        token: String,
    },
    #[error("element `{element}` lacks property `{property}`")]
    MissingProperty { element: String, property: String },
    #[error("face {face} references vertex {index}, but only {vertex_count} vertices exist")]
    IndexOutOfRange {
        face: usize,
        index: i64,
        vertex_count: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ScalarKind {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarKind {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }

    fn decode_le(self, b: &[u8]) -> f64 {
        match self {
            Self::I8 => b[0] as i8 as f64,
            Self::U8 => b[0] as f64,
            Self::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Self::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Self::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Self::F64 => f64::from_le_bytes(b[..8].try_into().expect("8 bytes")),
        }
    }

    fn is_integer(self) -> bool {
        !matches!(self, Self::F32 | Self::F64)
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, kind: ScalarKind },
    List { name: String, count: ScalarKind, item: ScalarKind },
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

struct Header {
    format: PlyFormat,
    elements: Vec<Element>,
    body_offset: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header, PlyError> {
    let mut offset = 0;
    let mut lines = Vec::new();
    loop {
        let Some(rel) = bytes[offset..].iter().position(|&b| b == b'\n') else {
            if lines.is_empty() {
                return Err(PlyError::MissingMagic);
            }
            return Err(PlyError::BadHeader {
                line: lines.len() + 1,
                reason: "header is not terminated by `end_header`".into(),
            });
        };
        let raw = &bytes[offset..offset + rel];
        offset += rel + 1;
        let line = std::str::from_utf8(raw)
            .map_err(|_| {
                if lines.is_empty() {
                    PlyError::MissingMagic
                } else {
                    PlyError::BadHeader {
                        line: lines.len() + 1,
                        reason: "header is not valid UTF-8".into(),
                    }
                }
            })?
            .trim_end_matches('\r')
            .to_owned();
        let done = line.trim() == "end_header";
        lines.push(line);
        if done {
            break;
        }
        if lines.len() == 1 && lines[0].trim() != "ply" {
            return Err(PlyError::MissingMagic);
        }
    }
    if lines[0].trim() != "ply" {
        return Err(PlyError::MissingMagic);
    }

    let bad = |line: usize, reason: &str| PlyError::BadHeader {
        line: line + 1,
        reason: reason.to_owned(),
    };
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    for (ln, line) in lines.iter().enumerate().skip(1) {
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            [] | ["end_header"] => {}
            ["comment", ..] | ["obj_info", ..] => {}
            ["format", fmt, version] => {
                if *version != "1.0" {
                    return Err(PlyError::UnsupportedFormat(format!("{fmt} {version}")));
                }
                format = Some(match *fmt {
                    "ascii" => PlyFormat::Ascii,
                    "binary_little_endian" => PlyFormat::BinaryLittleEndian,
                    other => return Err(PlyError::UnsupportedFormat(other.to_owned())),
                });
            }
            ["element", name, count] => {
                let count = count
                    .parse()
                    .map_err(|_| bad(ln, &format!("bad element count `{count}`")))?;
                elements.push(Element {
                    name: (*name).to_owned(),
                    count,
                    properties: Vec::new(),
                });
            }
            ["property", "list", count, item, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| bad(ln, "property before any element"))?;
                let count = ScalarKind::parse(count)
                    .filter(|k| k.is_integer())
                    .ok_or_else(|| bad(ln, &format!("bad list count type `{count}`")))?;
                let item = ScalarKind::parse(item)
                    .ok_or_else(|| bad(ln, &format!("unknown type `{item}`")))?;
                el.properties.push(Property::List {
                    name: (*name).to_owned(),
                    count,
                    item,
                });
            }
            ["property", kind, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| bad(ln, "property before any element"))?;
                let kind = ScalarKind::parse(kind)
                    .ok_or_else(|| bad(ln, &format!("unknown type `{kind}`")))?;
                el.properties.push(Property::Scalar {
                    name: (*name).to_owned(),
                    kind,
                });
            }
            _ => return Err(bad(ln, &format!("unrecognized line `{line}`"))),
        }
    }
    let format = format.ok_or_else(|| bad(0, "missing `format` line"))?;
    Ok(Header {
        format,
        elements,
        body_offset: offset,
    })
}

/// Sequential reader over either body encoding.
enum Body<'a> {
    Ascii {
        tokens: std::str::SplitAsciiWhitespace<'a>,
    },
    Binary {
        bytes: &'a [u8],
        pos: usize,
    },
}

enum ReadFail {
    Eof,
    Bad(String),
}

impl Body<'_> {
    fn read(&mut self, kind: ScalarKind) -> Result<f64, ReadFail> {
        match self {
            Body::Ascii { tokens } => {
                let tok = tokens.next().ok_or(ReadFail::Eof)?;
                let v: f64 = tok.parse().map_err(|_| ReadFail::Bad(tok.to_owned()))?;
                if kind.is_integer() && v.fract() != 0.0 {
                    return Err(ReadFail::Bad(tok.to_owned()));
                }
                if matches!(kind, ScalarKind::F32) {
                    return Ok(v as f32 as f64);
                }
                Ok(v)
            }
            Body::Binary { bytes, pos } => {
                let n = kind.size();
                if *pos + n > bytes.len() {
                    return Err(ReadFail::Eof);
                }
                let v = kind.decode_le(&bytes[*pos..*pos + n]);
                *pos += n;
                Ok(v)
            }
        }
    }
}

/// Parses a PLY document into a mesh.
pub fn parse_ply<S: Real>(bytes: &[u8]) -> Result<Mesh<S>, PlyError> {
    let header = parse_header(bytes)?;
    let body_bytes = &bytes[header.body_offset..];
    let mut body = match header.format {
        PlyFormat::Ascii => Body::Ascii {
            // Non-UTF-8 bytes past the last needed token are tolerated by
            // decoding only the valid prefix.
            tokens: match std::str::from_utf8(body_bytes) {
                Ok(s) => s.split_ascii_whitespace(),
                Err(e) => std::str::from_utf8(&body_bytes[..e.valid_up_to()])
                    .expect("valid prefix")
                    .split_ascii_whitespace(),
            },
        },
        PlyFormat::BinaryLittleEndian => Body::Binary {
            bytes: body_bytes,
            pos: 0,
        },
    };

    let mut vertices: Vec<Vec3<S>> = Vec::new();
    let mut normals: Vec<Vec3<S>> = Vec::new();
    let mut has_normals = false;
    let mut faces: Vec<Vec<i64>> = Vec::new();
    let mut saw_vertex = false;

    for el in &header.elements {
        let is_vertex = el.name == "vertex" && !saw_vertex;
        let is_face = el.name == "face";
        let slot = |name: &str| {
            el.properties
                .iter()
                .position(|p| matches!(p, Property::Scalar { name: n, .. } if n == name))
        };
        let (xi, yi, zi) = (slot("x"), slot("y"), slot("z"));
        let (nxi, nyi, nzi) = (slot("nx"), slot("ny"), slot("nz"));
        if is_vertex {
            if let Some(axis) = [("x", xi), ("y", yi), ("z", zi)].iter().find(|(_, i)| i.is_none()) {
                return Err(PlyError::MissingProperty {
                    element: el.name.clone(),
                    property: axis.0.into(),
                });
            }
            saw_vertex = true;
            has_normals = nxi.is_some() && nyi.is_some() && nzi.is_some();
            vertices.reserve(el.count);
        }
        let index_list = el.properties.iter().position(|p| {
            matches!(p, Property::List { name, .. } if name == "vertex_indices" || name == "vertex_index")
        });

        let mut scalars = vec![0.0f64; el.properties.len()];
        for entry in 0..el.count {
            let fail = |f: ReadFail| match f {
                ReadFail::Eof => PlyError::CountMismatch {
                    element: el.name.clone(),
                    expected: el.count,
                    found: entry,
                },
                ReadFail::Bad(token) => PlyError::BadValue {
                    element: el.name.clone(),
                    index: entry,
                    token,
                },
            };
            let mut list: Vec<i64> = Vec::new();
            for (pi, prop) in el.properties.iter().enumerate() {
                match prop {
                    Property::Scalar { kind, .. } => {
                        scalars[pi] = body.read(*kind).map_err(fail)?;
                    }
                    Property::List { count, item, .. } => {
                        let n = body.read(*count).map_err(fail)?;
                        if n < 0.0 {
                            return Err(fail(ReadFail::Bad(n.to_string())));
                        }
                        let keep = is_face && Some(pi) == index_list;
                        if keep {
                            list.clear();
                            list.reserve(n as usize);
                        }
                        for _ in 0..n as usize {
                            let v = body.read(*item).map_err(fail)?;
                            if keep {
                                list.push(v as i64);
                            }
                        }
                    }
                }
            }
            if is_vertex {
                let get = |i: Option<usize>| i.map_or(S::zero(), |i| S::lit(scalars[i]));
                vertices.push(Vec3::new(get(xi), get(yi), get(zi)));
                if has_normals {
                    normals.push(Vec3::new(get(nxi), get(nyi), get(nzi)));
                }
            } else if is_face && index_list.is_some() {
                faces.push(std::mem::take(&mut list));
            }
        }
    }

    let n = vertices.len();
    let mut triangles = Vec::with_capacity(faces.len());
    for (fi, face) in faces.iter().enumerate() {
        if let Some(&bad) = face.iter().find(|&&i| i < 0 || i as usize >= n) {
            return Err(PlyError::IndexOutOfRange {
                face: fi,
                index: bad,
                vertex_count: n,
            });
        }
        for k in 1..face.len().saturating_sub(1) {
            triangles.push([face[0] as u32, face[k] as u32, face[k + 1] as u32]);
        }
    }

    Ok(Mesh {
        vertices,
        normals: has_normals.then_some(normals),
        triangles,
    })
}

/// Serializes a mesh. Coordinates are written as 32-bit floats.
pub fn write_ply<S: Real>(mesh: &Mesh<S>, format: PlyFormat) -> Vec<u8> {
    let with_normals = mesh
        .normals
        .as_ref()
        .is_some_and(|n| n.len() == mesh.vertices.len());
    let mut header = String::new();
    header.push_str("ply\n");
    header.push_str(match format {
        PlyFormat::Ascii => "format ascii 1.0\n",
        PlyFormat::BinaryLittleEndian => "format binary_little_endian 1.0\n",
    });
    header.push_str("comment atlaspaint\n");
    let _ = writeln!(header, "element vertex {}", mesh.vertices.len());
    header.push_str("property float x\nproperty float y\nproperty float z\n");
    if with_normals {
        header.push_str("property float nx\nproperty float ny\nproperty float nz\n");
    }
    let _ = writeln!(header, "element face {}", mesh.triangles.len());
    header.push_str("property list uchar int vertex_indices\nend_header\n");

    let mut out = header.into_bytes();
    let normals = mesh.normals.as_deref().filter(|_| with_normals);
    let vertex_fields = |i: usize| {
        let v = mesh.vertices[i];
        let mut f = [v.x, v.y, v.z].map(Real::to_f32_lossy).to_vec();
        if let Some(ns) = normals {
            f.extend([ns[i].x, ns[i].y, ns[i].z].map(Real::to_f32_lossy));
        }
        f
    };
    match format {
        PlyFormat::Ascii => {
            let mut body = String::new();
            for i in 0..mesh.vertices.len() {
                let fields: Vec<String> = vertex_fields(i).iter().map(|v| v.to_string()).collect();
                body.push_str(&fields.join(" "));
                body.push('\n');
            }
            for t in &mesh.triangles {
                let _ = writeln!(body, "3 {} {} {}", t[0], t[1], t[2]);
            }
            out.extend_from_slice(body.as_bytes());
        }
        PlyFormat::BinaryLittleEndian => {
            let stride = if with_normals { 24 } else { 12 };
            out.reserve(mesh.vertices.len() * stride + mesh.triangles.len() * 13);
            for i in 0..mesh.vertices.len() {
                for v in vertex_fields(i) {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
            for t in &mesh.triangles {
                out.push(3);
                for &i in t {
                    out.extend_from_slice(&(i as i32).to_le_bytes());
                }
            }
        }
    }
    out
}
