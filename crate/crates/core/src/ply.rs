//! PLY reader and writer (ascii and binary little-endian).
//!
//! Only the `vertex` element is interpreted; other elements are parsed and
//! skipped. Attributes are read as stored, without normalization.

use std::io::Write;
use std::path::Path;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
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
            other => return Err(Error::Ply(format!("unknown scalar type `{other}`"))),
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

    fn read_le(self, bytes: &[u8]) -> f64 {
        match self {
            Scalar::I8 => bytes[0] as i8 as f64,
            Scalar::U8 => bytes[0] as f64,
            Scalar::I16 => i16::from_le_bytes([bytes[0], bytes[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([bytes[0], bytes[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(bytes[..4].try_into().expect("4 bytes")) as f64,
            Scalar::U32 => u32::from_le_bytes(bytes[..4].try_into().expect("4 bytes")) as f64,
            Scalar::F32 => f32::from_le_bytes(bytes[..4].try_into().expect("4 bytes")) as f64,
            Scalar::F64 => f64::from_le_bytes(bytes[..8].try_into().expect("8 bytes")),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { count: Scalar, item: Scalar },
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

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let mut offset = 0;
    let mut next_line = || -> Result<String> {
        let rest = &bytes[offset..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Ply("unterminated header".into()))?;
        offset += end + 1;
        let line = std::str::from_utf8(&rest[..end]).map_err(|_| Error::Ply("header is not utf-8".into()))?;
        Ok(line.trim_end_matches('\r').to_string())
    };

    if next_line()?.trim() != "ply" {
        return Err(Error::Ply("missing `ply` magic".into()));
    }
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let line = next_line()?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            ["end_header"] => break,
            [] | ["comment", ..] | ["obj_info", ..] => {}
            ["format", "ascii", _] => format = Some(PlyFormat::Ascii),
            ["format", "binary_little_endian", _] => format = Some(PlyFormat::BinaryLittleEndian),
            ["format", other, ..] => return Err(Error::Ply(format!("unsupported format `{other}`"))),
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| Error::Ply(format!("bad element count `{count}`")))?,
                properties: Vec::new(),
            }),
            ["property", "list", count, item, _name] => elements
                .last_mut()
                .ok_or_else(|| Error::Ply("property before element".into()))?
                .properties
                .push(Property::List {
                    count: Scalar::parse(count)?,
                    item: Scalar::parse(item)?,
                }),
            ["property", ty, name] => elements
                .last_mut()
                .ok_or_else(|| Error::Ply("property before element".into()))?
                .properties
                .push(Property::Scalar {
                    name: name.to_string(),
                    ty: Scalar::parse(ty)?,
                }),
            _ => return Err(Error::Ply(format!("malformed header line `{line}`"))),
        }
    }
    Ok(Header {
        format: format.ok_or_else(|| Error::Ply("missing format line".into()))?,
        elements,
        body_offset: offset,
    })
}

/// Reads positions and the red/green/blue channels (or `attr_*` channels
/// written by [`save_ply`]); a cloud without either has zero channels.
pub fn load_ply(path: impl AsRef<Path>) -> Result<PointCloud> {
    let bytes = std::fs::read(path)?;
    parse_ply(&bytes, None)
}

/// Reads positions and the named vertex properties as attribute channels.
pub fn load_ply_with_attributes(path: impl AsRef<Path>, names: &[&str]) -> Result<PointCloud> {
    let bytes = std::fs::read(path)?;
    parse_ply(&bytes, Some(names))
}

pub fn parse_ply(bytes: &[u8], attribute_names: Option<&[&str]>) -> Result<PointCloud> {
    let header = parse_header(bytes)?;
    let body = &bytes[header.body_offset..];
    let mut cursor = Cursor::new(header.format, body);

    let mut cloud = None;
    for element in &header.elements {
        if element.name != "vertex" {
            for _ in 0..element.count {
                for prop in &element.properties {
                    match prop {
                        Property::Scalar { ty, .. } => {
                            cursor.value(*ty)?;
                        }
                        Property::List { count, item } => {
                            let len = cursor.value(*count)? as usize;
                            for _ in 0..len {
                                cursor.value(*item)?;
                            }
                        }
                    }
                }
                cursor.end_record()?;
            }
            continue;
        }

        let names: Vec<&str> = element
            .properties
            .iter()
            .map(|p| match p {
                Property::Scalar { name, .. } => name.as_str(),
                Property::List { .. } => "",
            })
            .collect();
        let find = |name: &str| names.iter().position(|&n| n == name);
        let coord = |c: &str| find(c).ok_or_else(|| Error::Ply(format!("vertex element has no `{c}` property")));
        let coords = [coord("x")?, coord("y")?, coord("z")?];

        let attr_cols: Vec<usize> = match attribute_names {
            Some(wanted) => wanted
                .iter()
                .map(|w| find(w).ok_or_else(|| Error::Ply(format!("vertex element has no `{w}` property"))))
                .collect::<Result<_>>()?,
            None => {
                let rgb: Vec<_> = ["red", "green", "blue"].iter().filter_map(|c| find(c)).collect();
                if rgb.len() == 3 {
                    rgb
                } else {
                    (0..)
                        .map(|k| find(&format!("attr_{k}")))
                        .take_while(Option::is_some)
                        .flatten()
                        .collect()
                }
            }
        };

        let mut positions = Vec::with_capacity(element.count);
        let mut attributes = vec![Vec::with_capacity(element.count); attr_cols.len()];
        let mut row = vec![0.0; element.properties.len()];
        for _ in 0..element.count {
            for (slot, prop) in row.iter_mut().zip(&element.properties) {
                *slot = match prop {
                    Property::Scalar { ty, .. } => cursor.value(*ty)?,
                    Property::List { count, item } => {
                        let len = cursor.value(*count)? as usize;
                        for _ in 0..len {
                            cursor.value(*item)?;
                        }
                        0.0
                    }
                };
            }
            cursor.end_record()?;
            positions.push([row[coords[0]], row[coords[1]], row[coords[2]]]);
            for (ch, &col) in attributes.iter_mut().zip(&attr_cols) {
                ch.push(row[col]);
            }
        }
        cloud = Some(PointCloud::new(positions, attributes)?);
    }
    cloud.ok_or_else(|| Error::Ply("no vertex element".into()))
}

struct Cursor<'a> {
    format: PlyFormat,
    body: &'a [u8],
    pos: usize,
    line: Vec<&'a str>,
    token: usize,
}

impl<'a> Cursor<'a> {
    fn new(format: PlyFormat, body: &'a [u8]) -> Self {
        Self {
            format,
            body,
            pos: 0,
            line: Vec::new(),
            token: 0,
        }
    }

    fn value(&mut self, ty: Scalar) -> Result<f64> {
        match self.format {
            PlyFormat::BinaryLittleEndian => {
                let size = ty.size();
                let bytes = self
                    .body
                    .get(self.pos..self.pos + size)
                    .ok_or_else(|| Error::Ply("unexpected end of binary data".into()))?;
                self.pos += size;
                Ok(ty.read_le(bytes))
            }
            PlyFormat::Ascii => {
                while self.token >= self.line.len() {
                    self.load_line()?;
                }
                let tok = self.line[self.token];
                self.token += 1;
                tok.parse::<f64>()
                    .map_err(|_| Error::Ply(format!("bad number `{tok}`")))
            }
        }
    }

    fn load_line(&mut self) -> Result<()> {
        if self.pos >= self.body.len() {
            return Err(Error::Ply("unexpected end of ascii data".into()));
        }
        let rest = &self.body[self.pos..];
        let end = rest.iter().position(|&b| b == b'\n').unwrap_or(rest.len());
        self.pos += (end + 1).min(rest.len());
        let line = std::str::from_utf8(&rest[..end]).map_err(|_| Error::Ply("body is not utf-8".into()))?;
        self.line = line.split_whitespace().collect();
        self.token = 0;
        Ok(())
    }

    fn end_record(&mut self) -> Result<()> {
        if self.format == PlyFormat::Ascii {
            if self.token < self.line.len() {
                return Err(Error::Ply("extra values on ascii record".into()));
            }
            self.line.clear();
            self.token = 0;
        }
        Ok(())
    }
}

fn is_byte_valued(ch: &[f64]) -> bool {
    ch.iter().all(|&v| v.fract() == 0.0 && (0.0..=255.0).contains(&v))
}

/// Writes positions as doubles. Three byte-valued channels are written as
/// `uchar red/green/blue`; anything else as `double attr_k`.
pub fn save_ply(path: impl AsRef<Path>, pc: &PointCloud, format: PlyFormat) -> Result<()> {
    let bytes = encode_ply(pc, format);
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn encode_ply(pc: &PointCloud, format: PlyFormat) -> Vec<u8> {
    let rgb = pc.channels() == 3 && pc.attributes.iter().all(|ch| is_byte_valued(ch));
    let mut out = Vec::new();
    let fmt = match format {
        PlyFormat::Ascii => "ascii",
        PlyFormat::BinaryLittleEndian => "binary_little_endian",
    };
    let _ = write!(out, "ply\nformat {fmt} 1.0\nelement vertex {}\n", pc.len());
    for c in ["x", "y", "z"] {
        let _ = writeln!(out, "property double {c}");
    }
    if rgb {
        for c in ["red", "green", "blue"] {
            let _ = writeln!(out, "property uchar {c}");
        }
    } else {
        for k in 0..pc.channels() {
            let _ = writeln!(out, "property double attr_{k}");
        }
    }
    out.extend_from_slice(b"end_header\n");

    for i in 0..pc.len() {
        let p = pc.positions[i];
        match format {
            PlyFormat::Ascii => {
                let mut fields: Vec<String> = p.iter().map(|v| format!("{v:e}")).collect();
                fields.extend(pc.attributes.iter().map(|ch| {
                    if rgb {
                        format!("{}", ch[i] as u8)
                    } else {
                        format!("{:e}", ch[i])
                    }
                }));
                let _ = writeln!(out, "{}", fields.join(" "));
            }
            PlyFormat::BinaryLittleEndian => {
                for v in p {
                    out.extend_from_slice(&v.to_le_bytes());
                }
                for ch in &pc.attributes {
                    if rgb {
                        out.push(ch[i] as u8);
                    } else {
                        out.extend_from_slice(&ch[i].to_le_bytes());
                    }
                }
            }
        }
    }
    out
}
