//! Reader for Gmsh ASCII 2.2 meshes.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use super::{edge_key, BoundaryMarker, Triangulation};
use crate::error::{Error, Result};
use crate::tensor::Vec2;

/// Maps physical groups of boundary lines to markers. Numeric tags take
/// precedence over names.
#[derive(Debug, Clone)]
pub struct GmshMarkerMap {
    pub by_tag: BTreeMap<i64, BoundaryMarker>,
    pub by_name: BTreeMap<String, BoundaryMarker>,
}

impl Default for GmshMarkerMap {
    /// Recognises the marker names themselves plus the side names used by
    /// the shipped airfoil mesh (`left`, `top`, `bottom` inflow, `right`
    /// outflow, `airfoil` obstacle).
    fn default() -> Self {
        let mut by_name = BTreeMap::new();
        for m in BoundaryMarker::BOUNDARY {
            by_name.insert(m.name().to_string(), m);
        }
        for (n, m) in [
            ("left", BoundaryMarker::Inflow),
            ("top", BoundaryMarker::Inflow),
            ("bottom", BoundaryMarker::Inflow),
            ("right", BoundaryMarker::Outflow),
            ("airfoil", BoundaryMarker::Obstacle),
        ] {
            by_name.insert(n.to_string(), m);
        }
        Self {
            by_tag: BTreeMap::new(),
            by_name,
        }
    }
}

pub fn import_gmsh(path: impl AsRef<Path>, map: &GmshMarkerMap) -> Result<Triangulation> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_gmsh(&text, map)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Option<&'a str> {
        for (i, l) in self.inner.by_ref() {
            self.line = i + 1;
            let l = l.trim();
            if !l.is_empty() {
                return Some(l);
            }
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<&'a str> {
        let line = self.line;
        self.next().ok_or_else(|| Error::MeshParse {
            line: line + 1,
            message: format!("unexpected end of file, expected {what}"),
        })
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::MeshParse {
            line: self.line,
            message: message.into(),
        }
    }
}

fn parse_num<T: std::str::FromStr>(lines: &Lines, tok: Option<&str>, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| lines.err(format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| lines.err(format!("invalid {what} `{tok}`")))
}

pub fn parse_gmsh(text: &str, map: &GmshMarkerMap) -> Result<Triangulation> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        line: 0,
    };
    let mut format_seen = false;
    let mut names: HashMap<i64, String> = HashMap::new();
    let mut node_index: HashMap<i64, usize> = HashMap::new();
    let mut vertices: Vec<Vec2> = Vec::new();
    let mut nodes_seen = false;
    let mut elements_seen = false;
    let mut cells: Vec<[usize; 3]> = Vec::new();
    // (edge, physical tag, line number)
    let mut lines_tagged: Vec<((usize, usize), i64, usize)> = Vec::new();

    while let Some(l) = lines.next() {
        match l {
            "$MeshFormat" => {
                let h = lines.expect("format header")?;
                let mut it = h.split_whitespace();
                let version: String = parse_num(&lines, it.next(), "version")?;
                let file_type: i32 = parse_num(&lines, it.next(), "file type")?;
                if !version.starts_with("2.") {
                    return Err(lines.err(format!("unsupported format version {version}")));
                }
                if file_type != 0 {
                    return Err(lines.err("binary meshes are not supported"));
                }
                if lines.expect("$EndMeshFormat")? != "$EndMeshFormat" {
                    return Err(lines.err("expected $EndMeshFormat"));
                }
                format_seen = true;
            }
            "$PhysicalNames" => {
                let row = lines.expect("count")?;
                let n: usize = parse_num(&lines, Some(row), "name count")?;
                for _ in 0..n {
                    let row = lines.expect("physical name")?;
                    let mut it = row.splitn(3, char::is_whitespace);
                    let _dim: i32 = parse_num(&lines, it.next(), "dimension")?;
                    let tag: i64 = parse_num(&lines, it.next(), "physical tag")?;
                    let name = it
                        .next()
                        .ok_or_else(|| lines.err("missing physical name"))?
                        .trim()
                        .trim_matches('"')
                        .to_string();
                    names.insert(tag, name);
                }
                if lines.expect("$EndPhysicalNames")? != "$EndPhysicalNames" {
                    return Err(lines.err("expected $EndPhysicalNames"));
                }
            }
            "$Nodes" => {
                let row = lines.expect("count")?;
                let n: usize = parse_num(&lines, Some(row), "node count")?;
                vertices.reserve(n);
                for _ in 0..n {
                    let row = lines.expect("node")?;
                    let mut it = row.split_whitespace();
                    let id: i64 = parse_num(&lines, it.next(), "node id")?;
                    let x: f64 = parse_num(&lines, it.next(), "x coordinate")?;
                    let y: f64 = parse_num(&lines, it.next(), "y coordinate")?;
                    if node_index.insert(id, vertices.len()).is_some() {
                        return Err(lines.err(format!("duplicate node id {id}")));
                    }
                    vertices.push([x, y]);
                }
                if lines.expect("$EndNodes")? != "$EndNodes" {
                    return Err(lines.err("expected $EndNodes"));
                }
                nodes_seen = true;
            }
            "$Elements" => {
                if !nodes_seen {
                    return Err(lines.err("$Elements before $Nodes"));
                }
                let row = lines.expect("count")?;
                let n: usize = parse_num(&lines, Some(row), "element count")?;
                for _ in 0..n {
                    let row = lines.expect("element")?;
                    let mut it = row.split_whitespace();
                    let _id: i64 = parse_num(&lines, it.next(), "element id")?;
                    let ty: i32 = parse_num(&lines, it.next(), "element type")?;
                    let ntags: usize = parse_num(&lines, it.next(), "tag count")?;
                    let mut tags = Vec::with_capacity(ntags);
                    for _ in 0..ntags {
                        tags.push(parse_num::<i64>(&lines, it.next(), "tag")?);
                    }
                    let nn = match ty {
                        1 => 2,
                        2 => 3,
                        15 => 1,
                        _ => {
                            return Err(lines.err(format!(
                                "unsupported element type {ty}; only points, lines and triangles are allowed"
                            )))
                        }
                    };
                    let mut ids = [0usize; 3];
                    for slot in ids.iter_mut().take(nn) {
                        let nid: i64 = parse_num(&lines, it.next(), "node reference")?;
                        *slot = *node_index
                            .get(&nid)
                            .ok_or_else(|| lines.err(format!("unknown node {nid}")))?;
                    }
                    match ty {
                        1 => {
                            let phys = tags.first().copied().unwrap_or(0);
                            lines_tagged.push((edge_key(ids[0], ids[1]), phys, lines.line));
                        }
                        2 => cells.push(ids),
                        _ => {}
                    }
                }
                if lines.expect("$EndElements")? != "$EndElements" {
                    return Err(lines.err("expected $EndElements"));
                }
                elements_seen = true;
            }
            s if s.starts_with('$') => {
                // skip unknown sections
                let end = format!("$End{}", &s[1..]);
                loop {
                    if lines.expect(&end)? == end {
                        break;
                    }
                }
            }
            other => return Err(lines.err(format!("unexpected content `{other}`"))),
        }
    }

    let eof = lines.line;
    let missing = |s: &str| Error::MeshParse {
        line: eof,
        message: format!("missing {s} section"),
    };
    if !format_seen {
        return Err(missing("$MeshFormat"));
    }
    if !nodes_seen {
        return Err(missing("$Nodes"));
    }
    if !elements_seen {
        return Err(missing("$Elements"));
    }
    if cells.is_empty() {
        return Err(Error::InvalidMesh("no triangles in mesh".into()));
    }

    let mut tags = BTreeMap::new();
    let mut unmapped: Option<(i64, usize)> = None;
    for (edge, phys, line) in lines_tagged {
        let marker = map
            .by_tag
            .get(&phys)
            .copied()
            .or_else(|| names.get(&phys).and_then(|n| map.by_name.get(n).copied()));
        match marker {
            Some(m) => {
                tags.insert(edge, m);
            }
            None => {
                unmapped.get_or_insert((phys, line));
            }
        }
    }
    let t = Triangulation::new(vertices, cells, &tags).map_err(|e| match (e, unmapped) {
        (Error::InvalidMesh(msg), Some((phys, line))) => Error::MeshParse {
            line,
            message: format!("{msg}; physical tag {phys} has no marker mapping"),
        },
        (e, _) => e,
    })?;
    Ok(t)
}
