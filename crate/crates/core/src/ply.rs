//! Binary little-endian PLY in the de-facto 3DGS vertex layout.

use std::collections::HashMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::sh;
use crate::splat::{GaussianPrimitive, SplatCloud};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ScalarType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl ScalarType {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => ScalarType::I8,
            "uchar" | "uint8" => ScalarType::U8,
            "short" | "int16" => ScalarType::I16,
            "ushort" | "uint16" => ScalarType::U16,
            "int" | "int32" => ScalarType::I32,
            "uint" | "uint32" => ScalarType::U32,
            "float" | "float32" => ScalarType::F32,
            "double" | "float64" => ScalarType::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            ScalarType::I8 | ScalarType::U8 => 1,
            ScalarType::I16 | ScalarType::U16 => 2,
            ScalarType::I32 | ScalarType::U32 | ScalarType::F32 => 4,
            ScalarType::F64 => 8,
        }
    }

    fn read(self, b: &[u8]) -> f64 {
        match self {
            ScalarType::I8 => b[0] as i8 as f64,
            ScalarType::U8 => b[0] as f64,
            ScalarType::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            ScalarType::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            ScalarType::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            ScalarType::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            ScalarType::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            ScalarType::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug)]
struct Property {
    name: String,
    ty: ScalarType,
    offset: usize,
}

#[derive(Debug)]
struct Header {
    vertex_count: usize,
    properties: Vec<Property>,
    stride: usize,
    data_start: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    const END: &[u8] = b"end_header\n";
    let end = bytes
        .windows(END.len())
        .position(|w| w == END)
        .ok_or_else(|| Error::PlyHeader("no end_header line".into()))?;
    let text = std::str::from_utf8(&bytes[..end])
        .map_err(|_| Error::PlyHeader("header is not valid utf-8".into()))?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(Error::PlyHeader("missing `ply` magic".into()));
    }

    let mut format_ok = false;
    let mut vertex_count = None;
    let mut in_vertex = false;
    let mut seen_vertex = false;
    let mut properties = Vec::new();
    let mut stride = 0;

    for line in lines {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            [] | ["comment", ..] | ["obj_info", ..] => {}
            ["format", fmt, _version] => {
                if *fmt != "binary_little_endian" {
                    return Err(Error::PlyHeader(format!(
                        "unsupported format `{fmt}` (only binary_little_endian)"
                    )));
                }
                format_ok = true;
            }
            ["element", name, count] => {
                let count: usize = count
                    .parse()
                    .map_err(|_| Error::PlyHeader(format!("bad element count `{count}`")))?;
                in_vertex = *name == "vertex";
                if in_vertex {
                    if seen_vertex {
                        return Err(Error::PlyHeader("duplicate vertex element".into()));
                    }
                    seen_vertex = true;
                    vertex_count = Some(count);
                } else if !seen_vertex && count > 0 {
                    return Err(Error::PlyHeader(format!(
                        "element `{name}` precedes vertex data"
                    )));
                }
            }
            ["property", "list", ..] => {
                if in_vertex {
                    return Err(Error::PlyHeader("list properties in vertex element".into()));
                }
            }
            ["property", ty, name] => {
                if in_vertex {
                    let ty = ScalarType::parse(ty)
                        .ok_or_else(|| Error::PlyHeader(format!("unknown type `{ty}` for `{name}`")))?;
                    properties.push(Property {
                        name: name.to_string(),
                        ty,
                        offset: stride,
                    });
                    stride += ty.size();
                }
            }
            _ => return Err(Error::PlyHeader(format!("unrecognized line `{line}`"))),
        }
    }
    if !format_ok {
        return Err(Error::PlyHeader("missing format line".into()));
    }
    let vertex_count = vertex_count.ok_or_else(|| Error::PlyHeader("no vertex element".into()))?;
    Ok(Header {
        vertex_count,
        properties,
        stride,
        data_start: end + END.len(),
    })
}

/// Reads a 3DGS PLY. Values stay in storage parameterization.
pub fn load_ply(path: impl AsRef<Path>) -> Result<SplatCloud> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_ply(&bytes)
}

pub fn parse_ply(bytes: &[u8]) -> Result<SplatCloud> {
    let header = parse_header(bytes)?;
    let by_name: HashMap<&str, &Property> = header
        .properties
        .iter()
        .map(|p| (p.name.as_str(), p))
        .collect();
    let get = |name: &str| -> Result<&Property> {
        by_name
            .get(name)
            .copied()
            .ok_or_else(|| Error::PlyMissingProperty(name.to_string()))
    };

    let pos = [get("x")?, get("y")?, get("z")?];
    let dc = [get("f_dc_0")?, get("f_dc_1")?, get("f_dc_2")?];
    let opacity = get("opacity")?;
    let scale = [get("scale_0")?, get("scale_1")?, get("scale_2")?];
    let rot = [get("rot_0")?, get("rot_1")?, get("rot_2")?, get("rot_3")?];

    let rest_count = header
        .properties
        .iter()
        .filter(|p| p.name.starts_with("f_rest_"))
        .count();
    if rest_count % 3 != 0 {
        return Err(Error::PlyHeader(format!(
            "f_rest count {rest_count} is not divisible by 3"
        )));
    }
    let per_channel = rest_count / 3 + 1;
    let sh_degree = sh::degree_for_coeff_count(per_channel).ok_or_else(|| {
        Error::PlyHeader(format!(
            "f_rest count {rest_count} does not match an sh degree in 0..=3"
        ))
    })?;
    let rest: Vec<&Property> = (0..rest_count)
        .map(|i| get(&format!("f_rest_{i}")))
        .collect::<Result<_>>()?;

    let data = &bytes[header.data_start..];
    let needed = header.vertex_count * header.stride;
    if data.len() < needed {
        // Locate the first property that runs past the end for the message.
        let avail = data.len();
        let vertex = avail / header.stride.max(1);
        let within = avail - vertex * header.stride;
        let prop = header
            .properties
            .iter()
            .find(|p| p.offset + p.ty.size() > within)
            .map(|p| p.name.clone())
            .unwrap_or_default();
        return Err(Error::PlyTruncated {
            offset: header.data_start + avail,
            vertex,
            property: prop,
        });
    }

    let mut primitives = Vec::with_capacity(header.vertex_count);
    for v in 0..header.vertex_count {
        let row = &data[v * header.stride..(v + 1) * header.stride];
        let read = |p: &Property| p.ty.read(&row[p.offset..]) as f32;
        let mut sh_coeffs = vec![[0f32; 3]; per_channel];
        for c in 0..3 {
            sh_coeffs[0][c] = read(dc[c]);
            for j in 1..per_channel {
                sh_coeffs[j][c] = read(rest[c * (per_channel - 1) + (j - 1)]);
            }
        }
        primitives.push(GaussianPrimitive {
            position: pos.map(read),
            rotation: rot.map(read),
            log_scale: scale.map(read),
            opacity_logit: read(opacity),
            sh_coeffs,
        });
    }
    SplatCloud::new(primitives, sh_degree)
}

/// Property names in write order for a given SH degree.
pub fn property_names(sh_degree: u32) -> Vec<String> {
    let rest = 3 * (sh::coeff_count(sh_degree) - 1);
    let mut names: Vec<String> = ["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    names.extend((0..rest).map(|i| format!("f_rest_{i}")));
    names.extend(
        ["opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"]
            .iter()
            .map(|s| s.to_string()),
    );
    names
}

pub fn encode_ply(cloud: &SplatCloud) -> Result<Vec<u8>> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let names = property_names(cloud.sh_degree);
    let mut out = Vec::with_capacity(256 + cloud.len() * names.len() * 4);
    out.extend_from_slice(b"ply\nformat binary_little_endian 1.0\n");
    out.extend_from_slice(format!("element vertex {}\n", cloud.len()).as_bytes());
    for n in &names {
        out.extend_from_slice(format!("property float {n}\n").as_bytes());
    }
    out.extend_from_slice(b"end_header\n");

    let per_channel = sh::coeff_count(cloud.sh_degree);
    for p in &cloud.primitives {
        let mut put = |v: f32| out.extend_from_slice(&v.to_le_bytes());
        p.position.iter().for_each(|&v| put(v));
        (0..3).for_each(|_| put(0.0));
        (0..3).for_each(|c| put(p.sh_coeffs[0][c]));
        for c in 0..3 {
            for j in 1..per_channel {
                put(p.sh_coeffs[j][c]);
            }
        }
        put(p.opacity_logit);
        p.log_scale.iter().for_each(|&v| put(v));
        p.rotation.iter().for_each(|&v| put(v));
    }
    Ok(out)
}

pub fn save_ply(cloud: &SplatCloud, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_ply(cloud)?;
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}
