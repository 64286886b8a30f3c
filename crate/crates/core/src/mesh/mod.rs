//! Conforming triangulations with facet topology and boundary markers.

mod generate;
mod gmsh;

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

pub use generate::{generate_rectangle, refine_uniform, MarkerScheme, MeshHierarchy, SplitKind};
pub use gmsh::{import_gmsh, parse_gmsh, GmshMarkerMap};

use crate::error::{Error, Result};
use crate::tensor::{sub, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BoundaryMarker {
    Inflow,
    Outflow,
    Wall,
    Obstacle,
    Interior,
}

impl BoundaryMarker {
    pub const BOUNDARY: [BoundaryMarker; 4] = [
        BoundaryMarker::Inflow,
        BoundaryMarker::Outflow,
        BoundaryMarker::Wall,
        BoundaryMarker::Obstacle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundaryMarker::Inflow => "inflow",
            BoundaryMarker::Outflow => "outflow",
            BoundaryMarker::Wall => "wall",
            BoundaryMarker::Obstacle => "obstacle",
            BoundaryMarker::Interior => "interior",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "inflow" => BoundaryMarker::Inflow,
            "outflow" => BoundaryMarker::Outflow,
            "wall" => BoundaryMarker::Wall,
            "obstacle" => BoundaryMarker::Obstacle,
            "interior" => BoundaryMarker::Interior,
            _ => return None,
        })
    }
}

impl fmt::Display for BoundaryMarker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A mesh edge. `vertices[0] < vertices[1]`; the unit normal points from
/// `cells[0]` (the lower cell index) into `cells[1]`, or outward on the
/// boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    pub vertices: [usize; 2],
    pub cells: [usize; 2],
    pub boundary: bool,
    pub normal: Vec2,
    pub length: f64,
    pub marker: BoundaryMarker,
}

impl Facet {
    pub fn is_boundary(&self) -> bool {
        self.boundary
    }

    /// The neighbouring cell, if any.
    pub fn right(&self) -> Option<usize> {
        (!self.boundary).then_some(self.cells[1])
    }
}

/// Immutable triangulation. Local facet `i` of a cell is opposite its local
/// vertex `i`.
#[derive(Debug, Clone)]
pub struct Triangulation {
    vertices: Vec<Vec2>,
    cells: Vec<[usize; 3]>,
    facets: Vec<Facet>,
    cell_facets: Vec<[usize; 3]>,
}

/// Unordered vertex pair used to look up edges.
pub(crate) fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

pub(crate) fn signed_area(p: &[Vec2; 3]) -> f64 {
    let e1 = sub(p[1], p[0]);
    let e2 = sub(p[2], p[0]);
    0.5 * (e1[0] * e2[1] - e1[1] * e2[0])
}

impl Triangulation {
    /// Builds facet topology. Cells with negative orientation are flipped;
    /// degenerate cells are rejected. Every boundary edge must appear in
    /// `boundary_tags`.
    pub fn new(
        vertices: Vec<Vec2>,
        mut cells: Vec<[usize; 3]>,
        boundary_tags: &BTreeMap<(usize, usize), BoundaryMarker>,
    ) -> Result<Self> {
        for (k, c) in cells.iter_mut().enumerate() {
            if c.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::InvalidMesh(format!(
                    "cell {k} references a missing vertex"
                )));
            }
            let a = signed_area(&[vertices[c[0]], vertices[c[1]], vertices[c[2]]]);
            if a == 0.0 || !a.is_finite() {
                return Err(Error::InvalidMesh(format!("cell {k} is degenerate")));
            }
            if a < 0.0 {
                c.swap(1, 2);
            }
        }

        let mut by_edge: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut facets: Vec<Facet> = Vec::with_capacity(cells.len() * 3 / 2 + 8);
        let mut cell_facets = vec![[0usize; 3]; cells.len()];
        for (k, c) in cells.iter().enumerate() {
            for i in 0..3 {
                let key = edge_key(c[(i + 1) % 3], c[(i + 2) % 3]);
                match by_edge.get(&key) {
                    Some(&f) => {
                        let facet = &mut facets[f];
                        if !facet.boundary {
                            return Err(Error::InvalidMesh(format!(
                                "edge {key:?} shared by more than two cells"
                            )));
                        }
                        facet.boundary = false;
                        facet.cells[1] = k;
                        facet.marker = BoundaryMarker::Interior;
                        cell_facets[k][i] = f;
                    }
                    None => {
                        by_edge.insert(key, facets.len());
                        cell_facets[k][i] = facets.len();
                        facets.push(Facet {
                            vertices: [key.0, key.1],
                            cells: [k, usize::MAX],
                            boundary: true,
                            normal: [0.0, 0.0],
                            length: 0.0,
                            marker: BoundaryMarker::Interior,
                        });
                    }
                }
            }
        }

        for facet in facets.iter_mut() {
            let [a, b] = facet.vertices;
            let t = sub(vertices[b], vertices[a]);
            let len = t[0].hypot(t[1]);
            facet.length = len;
            let mut n = [t[1] / len, -t[0] / len];
            // orient away from cells[0]
            let c = &cells[facet.cells[0]];
            let opp = c.iter().copied().find(|&v| v != a && v != b).unwrap();
            let to_opp = sub(vertices[opp], vertices[a]);
            if n[0] * to_opp[0] + n[1] * to_opp[1] > 0.0 {
                n = [-n[0], -n[1]];
            }
            facet.normal = n;
            if facet.boundary {
                match boundary_tags.get(&(a, b)) {
                    Some(&m) if m != BoundaryMarker::Interior => facet.marker = m,
                    _ => {
                        return Err(Error::InvalidMesh(format!(
                            "boundary facet ({a}, {b}) at ({:.6}, {:.6}) has no marker",
                            0.5 * (vertices[a][0] + vertices[b][0]),
                            0.5 * (vertices[a][1] + vertices[b][1]),
                        )))
                    }
                }
            }
        }

        Ok(Self {
            vertices,
            cells,
            facets,
            cell_facets,
        })
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn cell_facets(&self, cell: usize) -> [usize; 3] {
        self.cell_facets[cell]
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_facets(&self) -> usize {
        self.facets.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn cell_points(&self, cell: usize) -> [Vec2; 3] {
        let c = self.cells[cell];
        [
            self.vertices[c[0]],
            self.vertices[c[1]],
            self.vertices[c[2]],
        ]
    }

    pub fn cell_area(&self, cell: usize) -> f64 {
        signed_area(&self.cell_points(cell))
    }

    pub fn cell_centroid(&self, cell: usize) -> Vec2 {
        let p = self.cell_points(cell);
        [
            (p[0][0] + p[1][0] + p[2][0]) / 3.0,
            (p[0][1] + p[1][1] + p[2][1]) / 3.0,
        ]
    }

    pub fn facet_points(&self, facet: usize) -> [Vec2; 2] {
        let [a, b] = self.facets[facet].vertices;
        [self.vertices[a], self.vertices[b]]
    }

    pub fn facet_midpoint(&self, facet: usize) -> Vec2 {
        let [a, b] = self.facet_points(facet);
        [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_cells()).map(|k| self.cell_area(k)).sum()
    }

    pub fn num_boundary_facets(&self) -> usize {
        self.facets.iter().filter(|f| f.boundary).count()
    }

    pub fn boundary_markers(&self) -> Vec<BoundaryMarker> {
        let mut m: Vec<_> = self
            .facets
            .iter()
            .filter(|f| f.boundary)
            .map(|f| f.marker)
            .collect();
        m.sort();
        m.dedup();
        m
    }

    pub fn marker_counts(&self) -> BTreeMap<BoundaryMarker, usize> {
        let mut out = BTreeMap::new();
        for f in self.facets.iter().filter(|f| f.boundary) {
            *out.entry(f.marker).or_insert(0) += 1;
        }
        out
    }

    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for v in &self.vertices {
            for d in 0..2 {
                lo[d] = lo[d].min(v[d]);
                hi[d] = hi[d].max(v[d]);
            }
        }
        (lo, hi)
    }

    /// Boundary tags keyed by sorted vertex pair, as accepted by [`Self::new`].
    pub fn boundary_tags(&self) -> BTreeMap<(usize, usize), BoundaryMarker> {
        self.facets
            .iter()
            .filter(|f| f.boundary)
            .map(|f| ((f.vertices[0], f.vertices[1]), f.marker))
            .collect()
    }

    /// Largest facet length.
    pub fn max_facet_length(&self) -> f64 {
        self.facets.iter().map(|f| f.length).fold(0.0, f64::max)
    }

    /// Checks the topological and geometric invariants.
    pub fn check(&self) -> Result<()> {
        let mut incidences = 0usize;
        for (k, _) in self.cells.iter().enumerate() {
            if self.cell_area(k) <= 0.0 {
                return Err(Error::InvalidMesh(format!(
                    "cell {k} not positively oriented"
                )));
            }
            incidences += 3;
        }
        let interior = self.facets.iter().filter(|f| !f.boundary).count();
        let boundary = self.facets.len() - interior;
        if incidences != 2 * interior + boundary {
            return Err(Error::InvalidMesh("facet incidence count mismatch".into()));
        }
        for (i, f) in self.facets.iter().enumerate() {
            let [a, b] = self.facet_points(i);
            let len = sub(b, a);
            if (len[0].hypot(len[1]) - f.length).abs() > 1e-14 * f.length.max(1.0) {
                return Err(Error::InvalidMesh(format!("facet {i} length mismatch")));
            }
            if ((f.normal[0].hypot(f.normal[1])) - 1.0).abs() > 1e-14 {
                return Err(Error::InvalidMesh(format!("facet {i} normal not unit")));
            }
            if !f.boundary && f.cells[0] >= f.cells[1] {
                return Err(Error::InvalidMesh(format!("facet {i} cell order")));
            }
        }
        Ok(())
    }

    /// Plain-text dump: vertices, cells, then boundary facets with markers.
    pub fn write_native<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "vertices {}", self.vertices.len())?;
        for v in &self.vertices {
            writeln!(w, "{:.17e} {:.17e}", v[0], v[1])?;
        }
        writeln!(w, "cells {}", self.cells.len())?;
        for c in &self.cells {
            writeln!(w, "{} {} {}", c[0], c[1], c[2])?;
        }
        let boundary: Vec<_> = self.facets.iter().filter(|f| f.boundary).collect();
        writeln!(w, "boundary {}", boundary.len())?;
        for f in boundary {
            writeln!(w, "{} {} {}", f.vertices[0], f.vertices[1], f.marker)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Triangulation {
        let v = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        // second cell given clockwise on purpose
        let c = vec![[0, 1, 2], [0, 3, 2]];
        let mut tags = BTreeMap::new();
        for (a, b) in [(0, 1), (1, 2), (2, 3), (0, 3)] {
            tags.insert(edge_key(a, b), BoundaryMarker::Wall);
        }
        Triangulation::new(v, c, &tags).unwrap()
    }

    #[test]
    fn two_cell_square_topology() {
        let t = unit_square();
        assert_eq!(t.num_cells(), 2);
        assert_eq!(t.num_facets(), 5);
        assert_eq!(t.num_boundary_facets(), 4);
        t.check().unwrap();
        let diag = t.facets().iter().find(|f| !f.boundary).unwrap();
        assert_eq!(diag.cells, [0, 1]);
        // from cell 0 (below the diagonal) into cell 1
        let n = diag.normal;
        assert!((n[0] + 0.5f64.sqrt()).abs() < 1e-15 && (n[1] - 0.5f64.sqrt()).abs() < 1e-15);
        for f in t.facets().iter().filter(|f| f.boundary) {
            let m = {
                let [a, b] = [t.vertices()[f.vertices[0]], t.vertices()[f.vertices[1]]];
                [0.5 * (a[0] + b[0]) - 0.5, 0.5 * (a[1] + b[1]) - 0.5]
            };
            assert!(m[0] * f.normal[0] + m[1] * f.normal[1] > 0.0);
        }
    }

    #[test]
    fn untagged_boundary_is_reported() {
        let v = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let mut tags = BTreeMap::new();
        tags.insert((0, 1), BoundaryMarker::Wall);
        tags.insert((0, 2), BoundaryMarker::Wall);
        let err = Triangulation::new(v, vec![[0, 1, 2]], &tags).unwrap_err();
        assert!(err.to_string().contains("no marker"));
    }

    #[test]
    fn native_dump_lists_everything() {
        let t = unit_square();
        let mut buf = Vec::new();
        t.write_native(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("vertices 4\n"));
        assert!(s.contains("cells 2\n"));
        assert!(s.contains("boundary 4\n"));
        assert_eq!(s.matches(" wall").count(), 4);
    }
}
