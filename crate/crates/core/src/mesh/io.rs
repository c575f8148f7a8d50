//! ASCII OFF and PLY readers plus a PLY writer with optional per-vertex
//! colors. Only the subset used by this pipeline is supported: vertex
//! positions and triangular faces.

use super::{DegeneratePolicy, TriMesh, ValidationReport};
use crate::{Error, Result};
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Off,
    PlyAscii,
}

/// Parses mesh bytes and validates the result. Vertex order is preserved from
/// the file (validation may drop isolated vertices, which the report records).
pub fn parse_mesh(
    bytes: &[u8],
    format: MeshFormat,
    policy: DegeneratePolicy,
) -> Result<(TriMesh, ValidationReport)> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| Error::Parse { line: 0, msg: format!("not valid UTF-8: {e}") })?;
    let (vertices, faces) = match format {
        MeshFormat::Off => parse_off(text)?,
        MeshFormat::PlyAscii => parse_ply(text)?,
    };
    TriMesh::new(vertices, faces, policy)
}

/// Line-oriented cursor that skips blanks/comments and tracks line numbers
/// for error reporting.
struct Lines<'a> {
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
    comment: &'static str,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str, comment: &'static str) -> Self {
        Self { iter: text.lines().enumerate(), comment }
    }

    /// Next non-empty, non-comment line with its 1-based number.
    fn next_content(&mut self) -> Option<(usize, &'a str)> {
        for (idx, line) in self.iter.by_ref() {
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if !self.comment.is_empty() && trimmed.starts_with(self.comment) {
                continue;
            }
            return Some((idx + 1, trimmed));
        }
        None
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn parse_usize(tok: &str, line: usize) -> Result<usize> {
    tok.parse().map_err(|_| parse_err(line, format!("expected integer, got '{tok}'")))
}

fn parse_f64(tok: &str, line: usize) -> Result<f64> {
    tok.parse().map_err(|_| parse_err(line, format!("expected number, got '{tok}'")))
}

fn parse_off(text: &str) -> Result<(Vec<[f64; 3]>, Vec<[usize; 3]>)> {
    let mut lines = Lines::new(text, "#");
    let (hline, header) = lines.next_content().ok_or_else(|| parse_err(0, "empty file"))?;
    let mut counts_tokens: Vec<&str>;
    if let Some(rest) = header.strip_prefix("OFF") {
        counts_tokens = rest.split_whitespace().collect();
        if counts_tokens.is_empty() {
            let (cline, counts) =
                lines.next_content().ok_or_else(|| parse_err(hline, "missing count line"))?;
            counts_tokens = counts.split_whitespace().collect();
            if counts_tokens.len() < 3 {
                return Err(parse_err(cline, "expected 'nv nf ne'"));
            }
        } else if counts_tokens.len() < 3 {
            return Err(parse_err(hline, "expected 'nv nf ne' after OFF"));
        }
    } else {
        return Err(parse_err(hline, "missing OFF header"));
    }
    let nv = parse_usize(counts_tokens[0], hline)?;
    let nf = parse_usize(counts_tokens[1], hline)?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (line, content) = lines
            .next_content()
            .ok_or_else(|| parse_err(0, format!("file ends before {nv} vertices were read")))?;
        let toks: Vec<&str> = content.split_whitespace().collect();
        if toks.len() < 3 {
            return Err(parse_err(line, "vertex needs 3 coordinates"));
        }
        vertices.push([
            parse_f64(toks[0], line)?,
            parse_f64(toks[1], line)?,
            parse_f64(toks[2], line)?,
        ]);
    }

    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (line, content) = lines
            .next_content()
            .ok_or_else(|| parse_err(0, format!("file ends before {nf} faces were read")))?;
        let toks: Vec<&str> = content.split_whitespace().collect();
        if toks.is_empty() {
            return Err(parse_err(line, "empty face line"));
        }
        let count = parse_usize(toks[0], line)?;
        if count != 3 {
            return Err(parse_err(line, format!("only triangles are supported, face has {count} vertices")));
        }
        if toks.len() < 4 {
            return Err(parse_err(line, "face needs 3 vertex indices"));
        }
        faces.push([
            parse_usize(toks[1], line)?,
            parse_usize(toks[2], line)?,
            parse_usize(toks[3], line)?,
        ]);
    }
    Ok((vertices, faces))
}

fn parse_ply(text: &str) -> Result<(Vec<[f64; 3]>, Vec<[usize; 3]>)> {
    let mut lines = Lines::new(text, "");
    let (hline, magic) = lines.next_content().ok_or_else(|| parse_err(0, "empty file"))?;
    if magic != "ply" {
        return Err(parse_err(hline, "missing 'ply' magic"));
    }

    // Header: collect elements with their property lists in order.
    struct Element {
        name: String,
        count: usize,
        properties: Vec<String>,
        has_list: bool,
    }
    let mut elements: Vec<Element> = Vec::new();
    let mut format_seen = false;
    loop {
        let (line, content) =
            lines.next_content().ok_or_else(|| parse_err(0, "header ends without end_header"))?;
        let toks: Vec<&str> = content.split_whitespace().collect();
        match toks[0] {
            "comment" | "obj_info" => continue,
            "format" => {
                if toks.get(1) != Some(&"ascii") {
                    return Err(parse_err(line, "only 'format ascii 1.0' is supported"));
                }
                format_seen = true;
            }
            "element" => {
                if toks.len() < 3 {
                    return Err(parse_err(line, "element needs a name and a count"));
                }
                elements.push(Element {
                    name: toks[1].to_string(),
                    count: parse_usize(toks[2], line)?,
                    properties: Vec::new(),
                    has_list: false,
                });
            }
            "property" => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(line, "property before any element"))?;
                if toks.get(1) == Some(&"list") {
                    el.has_list = true;
                } else {
                    let name = toks.last().unwrap().to_string();
                    el.properties.push(name);
                }
            }
            "end_header" => break,
            other => return Err(parse_err(line, format!("unexpected header token '{other}'"))),
        }
    }
    if !format_seen {
        return Err(parse_err(hline, "missing format line"));
    }

    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for el in &elements {
        if el.name == "vertex" {
            let xi = el.properties.iter().position(|p| p == "x");
            let yi = el.properties.iter().position(|p| p == "y");
            let zi = el.properties.iter().position(|p| p == "z");
            let (xi, yi, zi) = match (xi, yi, zi) {
                (Some(a), Some(b), Some(c)) => (a, b, c),
                _ => return Err(parse_err(0, "vertex element must carry x, y, z properties")),
            };
            vertices.reserve(el.count);
            for _ in 0..el.count {
                let (line, content) = lines
                    .next_content()
                    .ok_or_else(|| parse_err(0, "file ends inside vertex data"))?;
                let toks: Vec<&str> = content.split_whitespace().collect();
                if toks.len() < el.properties.len() {
                    return Err(parse_err(line, "vertex line has too few values"));
                }
                vertices.push([
                    parse_f64(toks[xi], line)?,
                    parse_f64(toks[yi], line)?,
                    parse_f64(toks[zi], line)?,
                ]);
            }
        } else if el.name == "face" {
            if !el.has_list {
                return Err(parse_err(0, "face element must carry a vertex_indices list"));
            }
            faces.reserve(el.count);
            for _ in 0..el.count {
                let (line, content) =
                    lines.next_content().ok_or_else(|| parse_err(0, "file ends inside face data"))?;
                let toks: Vec<&str> = content.split_whitespace().collect();
                let count = parse_usize(toks[0], line)?;
                if count != 3 {
                    return Err(parse_err(line, format!("only triangles are supported, face has {count} vertices")));
                }
                if toks.len() < 4 {
                    return Err(parse_err(line, "face needs 3 vertex indices"));
                }
                faces.push([
                    parse_usize(toks[1], line)?,
                    parse_usize(toks[2], line)?,
                    parse_usize(toks[3], line)?,
                ]);
            }
        } else {
            // Skip unknown elements line by line.
            for _ in 0..el.count {
                lines.next_content().ok_or_else(|| parse_err(0, "file ends inside element data"))?;
            }
        }
    }
    Ok((vertices, faces))
}

/// Writes ASCII PLY. Coordinates are emitted with Rust's shortest
/// round-trippable float formatting, so parse(write(m)) reproduces them
/// bit-exactly. `colors`, when given, adds uchar red/green/blue per vertex.
pub fn write_ply(mesh: &TriMesh, colors: Option<&[[u8; 3]]>) -> String {
    if let Some(c) = colors {
        assert_eq!(c.len(), mesh.n_vertices(), "one color per vertex");
    }
    let mut out = String::new();
    out.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(out, "element vertex {}", mesh.n_vertices());
    out.push_str("property double x\nproperty double y\nproperty double z\n");
    if colors.is_some() {
        out.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    let _ = writeln!(out, "element face {}", mesh.n_faces());
    out.push_str("property list uchar int vertex_indices\nend_header\n");
    for (i, v) in mesh.vertices().iter().enumerate() {
        match colors {
            Some(c) => {
                let _ = writeln!(out, "{} {} {} {} {} {}", v[0], v[1], v[2], c[i][0], c[i][1], c[i][2]);
            }
            None => {
                let _ = writeln!(out, "{} {} {}", v[0], v[1], v[2]);
            }
        }
    }
    for f in mesh.faces() {
        let _ = writeln!(out, "3 {} {} {}", f[0], f[1], f[2]);
    }
    out
}
