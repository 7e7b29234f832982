//! Mesh input/output: an OBJ subset and binary little-endian PLY.
//!
//! OBJ: `v`, `vn` and `f` records; polygons are fan-triangulated. A vertex
//! takes the first normal any face corner assigns to it. PLY: one `vertex`
//! element with float x/y/z (and optionally nx/ny/nz), one `face` element
//! with a `vertex_indices` list. When normals are missing they are computed.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::{Error, Mesh, Result, Vec3};

/// Loads an `.obj` or `.ply` mesh, multiplying coordinates by `scale`.
pub fn load_mesh(path: &Path, scale: f64) -> Result<Mesh> {
    let bytes = fs::read(path)?;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    let (vertices, faces, normals) = match ext.as_str() {
        "obj" => parse_obj(std::str::from_utf8(&bytes).map_err(|e| Error::Parse(e.to_string()))?)?,
        "ply" => parse_ply(&bytes)?,
        other => return Err(Error::Parse(format!("unsupported mesh extension {other:?}"))),
    };
    build(vertices, faces, normals, scale)
}

fn build(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>, normals: Option<Vec<Vec3>>, scale: f64) -> Result<Mesh> {
    if !(scale > 0.0) {
        return Err(Error::invalid("mesh scale must be positive"));
    }
    let vertices: Vec<Vec3> = vertices.into_iter().map(|v| v * scale).collect();
    match normals {
        Some(n) => {
            let n = n
                .into_iter()
                .map(|v| {
                    let len = v.norm();
                    if (len - 1.0).abs() < 1e-12 {
                        Ok(v)
                    } else if len > 0.0 {
                        Ok(v / len)
                    } else {
                        Err(Error::Parse("zero-length normal".into()))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            Mesh::new(vertices, faces, n)
        }
        None => Mesh::from_triangles(vertices, faces),
    }
}

fn parse_f64(tok: Option<&str>, line: usize) -> Result<f64> {
    tok.ok_or_else(|| Error::Parse(format!("line {line}: missing coordinate")))?.parse().map_err(|_| Error::Parse(format!("line {line}: bad number")))
}

fn resolve_index(raw: &str, count: usize, line: usize) -> Result<usize> {
    let i: i64 = raw.parse().map_err(|_| Error::Parse(format!("line {line}: bad index {raw:?}")))?;
    let idx = if i > 0 { i - 1 } else { count as i64 + i };
    if i == 0 || idx < 0 || idx as usize >= count {
        return Err(Error::Parse(format!("line {line}: index {i} out of range")));
    }
    Ok(idx as usize)
}

type Parsed = (Vec<Vec3>, Vec<[usize; 3]>, Option<Vec<Vec3>>);

pub fn parse_obj(text: &str) -> Result<Parsed> {
    let mut vertices = Vec::new();
    let mut obj_normals = Vec::new();
    let mut faces = Vec::new();
    let mut assigned: Vec<Option<usize>> = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let mut toks = raw.split_whitespace();
        match toks.next() {
            Some("v") => {
                vertices.push(Vec3::new(parse_f64(toks.next(), line)?, parse_f64(toks.next(), line)?, parse_f64(toks.next(), line)?));
                assigned.push(None);
            }
            Some("vn") => obj_normals.push(Vec3::new(parse_f64(toks.next(), line)?, parse_f64(toks.next(), line)?, parse_f64(toks.next(), line)?)),
            Some("f") => {
                let mut poly = Vec::new();
                for corner in toks {
                    let mut parts = corner.split('/');
                    let vi = resolve_index(parts.next().unwrap_or(""), vertices.len(), line)?;
                    let _tex = parts.next();
                    if let Some(n) = parts.next().filter(|s| !s.is_empty()) {
                        let ni = resolve_index(n, obj_normals.len(), line)?;
                        assigned[vi].get_or_insert(ni);
                    }
                    poly.push(vi);
                }
                if poly.len() < 3 {
                    return Err(Error::Parse(format!("line {line}: face with fewer than 3 vertices")));
                }
                for k in 1..poly.len() - 1 {
                    faces.push([poly[0], poly[k], poly[k + 1]]);
                }
            }
            _ => {}
        }
    }
    let normals = if !vertices.is_empty() && assigned.iter().all(Option::is_some) {
        Some(assigned.iter().map(|a| obj_normals[a.unwrap()]).collect())
    } else {
        None
    };
    Ok((vertices, faces, normals))
}

pub fn write_obj(mesh: &Mesh, path: &Path) -> Result<()> {
    let mut out = String::new();
    for v in mesh.vertices() {
        out.push_str(&format!("v {:.17e} {:.17e} {:.17e}\n", v.x, v.y, v.z));
    }
    for n in mesh.normals() {
        out.push_str(&format!("vn {:.17e} {:.17e} {:.17e}\n", n.x, n.y, n.z));
    }
    for f in mesh.faces() {
        let [a, b, c] = f.map(|i| i + 1);
        out.push_str(&format!("f {a}//{a} {b}//{b} {c}//{c}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

#[derive(Clone, Copy)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            other => return Err(Error::Parse(format!("unknown PLY type {other:?}"))),
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

enum Property {
    Scalar(String, Scalar),
    List(String, Scalar, Scalar),
}

struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, ty: Scalar) -> Result<f64> {
        let end = self.pos + ty.size();
        let bytes = self.data.get(self.pos..end).ok_or_else(|| Error::Parse("PLY body truncated".into()))?;
        self.pos = end;
        Ok(ty.read(bytes))
    }
}

pub fn parse_ply(bytes: &[u8]) -> Result<Parsed> {
    const END: &[u8] = b"end_header\n";
    let header_end = bytes.windows(END.len()).position(|w| w == END).ok_or_else(|| Error::Parse("PLY header has no end_header".into()))? + END.len();
    let header = std::str::from_utf8(&bytes[..header_end]).map_err(|e| Error::Parse(e.to_string()))?;
    let mut lines = header.lines();
    if lines.next() != Some("ply") {
        return Err(Error::Parse("missing PLY magic".into()));
    }
    let mut elements: Vec<Element> = Vec::new();
    for line in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["format", "binary_little_endian", _] => {}
            ["format", other, ..] => return Err(Error::Parse(format!("unsupported PLY format {other}"))),
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count.parse().map_err(|_| Error::Parse("bad element count".into()))?,
                props: Vec::new(),
            }),
            ["property", "list", cnt, idx, name] => elements
                .last_mut()
                .ok_or_else(|| Error::Parse("property before element".into()))?
                .props
                .push(Property::List(name.to_string(), Scalar::parse(cnt)?, Scalar::parse(idx)?)),
            ["property", ty, name] => elements
                .last_mut()
                .ok_or_else(|| Error::Parse("property before element".into()))?
                .props
                .push(Property::Scalar(name.to_string(), Scalar::parse(ty)?)),
            _ => {}
        }
    }

    let mut cur = Cursor { data: bytes, pos: header_end };
    let mut vertices = Vec::new();
    let mut normals = Vec::new();
    let mut has_normals = false;
    let mut faces = Vec::new();
    for el in &elements {
        for _ in 0..el.count {
            let mut pos = [0.0; 3];
            let mut nrm = [0.0; 3];
            for prop in &el.props {
                match prop {
                    Property::Scalar(name, ty) => {
                        let v = cur.take(*ty)?;
                        match name.as_str() {
                            "x" => pos[0] = v,
                            "y" => pos[1] = v,
                            "z" => pos[2] = v,
                            "nx" => nrm[0] = v,
                            "ny" => nrm[1] = v,
                            "nz" => nrm[2] = v,
                            _ => {}
                        }
                    }
                    Property::List(name, cnt_ty, idx_ty) => {
                        let count = cur.take(*cnt_ty)? as usize;
                        let mut poly = Vec::with_capacity(count);
                        for _ in 0..count {
                            poly.push(cur.take(*idx_ty)? as usize);
                        }
                        if el.name == "face" && (name == "vertex_indices" || name == "vertex_index") {
                            if poly.len() < 3 {
                                return Err(Error::Parse("PLY face with fewer than 3 vertices".into()));
                            }
                            for k in 1..poly.len() - 1 {
                                faces.push([poly[0], poly[k], poly[k + 1]]);
                            }
                        }
                    }
                }
            }
            if el.name == "vertex" {
                vertices.push(Vec3::from(pos));
                normals.push(Vec3::from(nrm));
            }
        }
        if el.name == "vertex" {
            has_normals = el.props.iter().any(|p| matches!(p, Property::Scalar(n, _) if n == "nx"));
        }
    }
    Ok((vertices, faces, has_normals.then_some(normals)))
}

pub fn write_ply(mesh: &Mesh, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    write!(
        out,
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\n\
         property float x\nproperty float y\nproperty float z\n\
         property float nx\nproperty float ny\nproperty float nz\n\
         element face {}\nproperty list uchar int vertex_indices\nend_header\n",
        mesh.vertex_count(),
        mesh.faces().len()
    )?;
    for (v, n) in mesh.vertices().iter().zip(mesh.normals()) {
        for x in v.iter().chain(n.iter()) {
            out.extend_from_slice(&(*x as f32).to_le_bytes());
        }
    }
    for f in mesh.faces() {
        out.push(3);
        for &i in f {
            out.extend_from_slice(&(i as i32).to_le_bytes());
        }
    }
    fs::write(path, out)?;
    Ok(())
}
