//! Structured rectangle meshes and uniform red refinement.

use std::collections::BTreeMap;

use super::{edge_key, BoundaryMarker, Triangulation};
use crate::error::{Error, Result};
use crate::tensor::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitKind {
    /// Each quad is cut along its lower-left to upper-right diagonal.
    Diagonal,
    /// Each quad is cut into four triangles through its centre.
    Crossed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarkerScheme {
    /// `x = min` inflow, `x = max` outflow, `y = min/max` wall.
    Channel,
    /// Every boundary facet is a wall.
    AllWall,
}

pub fn generate_rectangle(
    nx: usize,
    ny: usize,
    x_range: (f64, f64),
    y_range: (f64, f64),
    split: SplitKind,
    scheme: MarkerScheme,
) -> Result<Triangulation> {
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidParameter(format!(
            "rectangle needs nx, ny >= 1 (got {nx}, {ny})"
        )));
    }
    let (x0, x1) = x_range;
    let (y0, y1) = y_range;
    if !(x1 > x0) || !(y1 > y0) || !(x1 - x0).is_finite() || !(y1 - y0).is_finite() {
        return Err(Error::InvalidParameter(format!(
            "degenerate rectangle [{x0}, {x1}] x [{y0}, {y1}]"
        )));
    }

    let grid = |i: usize, j: usize| j * (nx + 1) + i;
    let mut vertices: Vec<Vec2> = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        // exact end coordinates so boundary classification is unambiguous
        let y = if j == ny {
            y1
        } else {
            y0 + (y1 - y0) * j as f64 / ny as f64
        };
        for i in 0..=nx {
            let x = if i == nx {
                x1
            } else {
                x0 + (x1 - x0) * i as f64 / nx as f64
            };
            vertices.push([x, y]);
        }
    }

    let mut cells = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (
                grid(i, j),
                grid(i + 1, j),
                grid(i + 1, j + 1),
                grid(i, j + 1),
            );
            match split {
                SplitKind::Diagonal => {
                    cells.push([a, b, c]);
                    cells.push([a, c, d]);
                }
                SplitKind::Crossed => {
                    let m = vertices.len();
                    let pa = vertices[a];
                    let pc = vertices[c];
                    vertices.push([0.5 * (pa[0] + pc[0]), 0.5 * (pa[1] + pc[1])]);
                    cells.push([a, b, m]);
                    cells.push([b, c, m]);
                    cells.push([c, d, m]);
                    cells.push([d, a, m]);
                }
            }
        }
    }

    let side_marker = |side: usize| match scheme {
        MarkerScheme::AllWall => BoundaryMarker::Wall,
        MarkerScheme::Channel => match side {
            0 => BoundaryMarker::Wall,
            1 => BoundaryMarker::Outflow,
            2 => BoundaryMarker::Wall,
            _ => BoundaryMarker::Inflow,
        },
    };
    let mut tags = BTreeMap::new();
    for i in 0..nx {
        tags.insert(edge_key(grid(i, 0), grid(i + 1, 0)), side_marker(0));
        tags.insert(edge_key(grid(i, ny), grid(i + 1, ny)), side_marker(2));
    }
    for j in 0..ny {
        tags.insert(edge_key(grid(nx, j), grid(nx, j + 1)), side_marker(1));
        tags.insert(edge_key(grid(0, j), grid(0, j + 1)), side_marker(3));
    }
    Triangulation::new(vertices, cells, &tags)
}

/// Splits every cell into four through its edge midpoints. Children of cell
/// `k` are `4k..4k+4`, the last being the interior one. The midpoint of facet
/// `f` becomes vertex `num_vertices + f`.
pub fn refine_uniform(t: &Triangulation) -> Triangulation {
    let nv = t.num_vertices();
    let mut vertices = t.vertices().to_vec();
    for f in 0..t.num_facets() {
        vertices.push(t.facet_midpoint(f));
    }
    let mut cells = Vec::with_capacity(4 * t.num_cells());
    for k in 0..t.num_cells() {
        let [a, b, c] = t.cells()[k];
        let fs = t.cell_facets(k);
        // local facet i is opposite local vertex i
        let m_bc = nv + fs[0];
        let m_ca = nv + fs[1];
        let m_ab = nv + fs[2];
        cells.push([a, m_ab, m_ca]);
        cells.push([m_ab, b, m_bc]);
        cells.push([m_ca, m_bc, c]);
        cells.push([m_ab, m_bc, m_ca]);
    }
    let mut tags = BTreeMap::new();
    for (i, f) in t.facets().iter().enumerate().filter(|(_, f)| f.boundary) {
        let m = nv + i;
        tags.insert(edge_key(f.vertices[0], m), f.marker);
        tags.insert(edge_key(m, f.vertices[1]), f.marker);
    }
    Triangulation::new(vertices, cells, &tags).expect("refinement of a valid mesh is valid")
}

/// A base mesh and its successive uniform refinements.
#[derive(Debug, Clone)]
pub struct MeshHierarchy {
    levels: Vec<Triangulation>,
}

impl MeshHierarchy {
    pub fn new(base: Triangulation, refinements: usize) -> Self {
        let mut levels = vec![base];
        for _ in 0..refinements {
            let next = refine_uniform(levels.last().unwrap());
            levels.push(next);
        }
        Self { levels }
    }

    pub fn levels(&self) -> &[Triangulation] {
        &self.levels
    }

    pub fn finest(&self) -> &Triangulation {
        self.levels.last().unwrap()
    }

    pub fn parent(&self, _level: usize, child: usize) -> usize {
        child / 4
    }

    pub fn children(&self, _level: usize, parent: usize) -> [usize; 4] {
        [4 * parent, 4 * parent + 1, 4 * parent + 2, 4 * parent + 3]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn unit(nx: usize, ny: usize) -> Triangulation {
        generate_rectangle(
            nx,
            ny,
            (0.0, 1.0),
            (0.0, 1.0),
            SplitKind::Diagonal,
            MarkerScheme::AllWall,
        )
        .unwrap()
    }

    #[test]
    fn single_quad_two_cells() {
        let t = unit(1, 1);
        assert_eq!(t.num_cells(), 2);
        assert_eq!(t.num_facets(), 5);
    }

    #[test]
    fn euler_formula_by_brute_edge_count() {
        let t = generate_rectangle(
            4,
            2,
            (0.0, 2.0),
            (-1.0, 1.0),
            SplitKind::Diagonal,
            MarkerScheme::Channel,
        )
        .unwrap();
        assert_eq!(t.num_cells(), 16);
        let mut edges = BTreeSet::new();
        for c in t.cells() {
            for i in 0..3 {
                edges.insert(edge_key(c[i], c[(i + 1) % 3]));
            }
        }
        assert_eq!(edges.len(), t.num_facets());
        // planar graph with the outer face counted
        let (v, e, f) = (
            t.num_vertices() as i64,
            edges.len() as i64,
            t.num_cells() as i64 + 1,
        );
        assert_eq!(v - e + f, 2);
        t.check().unwrap();
    }

    #[test]
    fn channel_markers_follow_geometry() {
        let t = generate_rectangle(
            5,
            3,
            (0.0, 5.0),
            (-1.0, 1.0),
            SplitKind::Diagonal,
            MarkerScheme::Channel,
        )
        .unwrap();
        let counts = t.marker_counts();
        assert_eq!(counts[&BoundaryMarker::Inflow], 3);
        assert_eq!(counts[&BoundaryMarker::Outflow], 3);
        assert_eq!(counts[&BoundaryMarker::Wall], 10);
        for (i, f) in t.facets().iter().enumerate().filter(|(_, f)| f.boundary) {
            let m = t.facet_midpoint(i);
            let expect = if m[0] == 0.0 {
                BoundaryMarker::Inflow
            } else if m[0] == 5.0 {
                BoundaryMarker::Outflow
            } else {
                assert!(m[1].abs() == 1.0);
                BoundaryMarker::Wall
            };
            assert_eq!(f.marker, expect);
        }
    }

    #[test]
    fn crossed_split_counts() {
        let t = generate_rectangle(
            3,
            2,
            (0.0, 1.0),
            (0.0, 1.0),
            SplitKind::Crossed,
            MarkerScheme::AllWall,
        )
        .unwrap();
        assert_eq!(t.num_cells(), 24);
        t.check().unwrap();
    }

    #[test]
    fn degenerate_inputs_rejected() {
        assert!(generate_rectangle(
            0,
            1,
            (0.0, 1.0),
            (0.0, 1.0),
            SplitKind::Diagonal,
            MarkerScheme::AllWall
        )
        .is_err());
        assert!(generate_rectangle(
            1,
            1,
            (1.0, 1.0),
            (0.0, 1.0),
            SplitKind::Diagonal,
            MarkerScheme::AllWall
        )
        .is_err());
    }

    #[test]
    fn refinement_invariants() {
        let base = generate_rectangle(
            3,
            2,
            (0.0, 5.0),
            (-1.0, 1.0),
            SplitKind::Diagonal,
            MarkerScheme::Channel,
        )
        .unwrap();
        let fine = refine_uniform(&base);
        assert_eq!(fine.num_cells(), 4 * base.num_cells());
        fine.check().unwrap();
        assert!((fine.total_area() - base.total_area()).abs() < 1e-13);
        let bc = base.marker_counts();
        let fc = fine.marker_counts();
        for (m, n) in bc {
            assert_eq!(fc[&m], 2 * n);
        }
        // children on parent edges have half the parent length
        let nv = base.num_vertices();
        for (i, f) in base.facets().iter().enumerate() {
            let m = nv + i;
            for end in f.vertices {
                let child = fine
                    .facets()
                    .iter()
                    .find(|g| g.vertices == [end.min(m), end.max(m)])
                    .unwrap();
                assert!((child.length - 0.5 * f.length).abs() < 1e-14);
            }
        }
        for k in 0..base.num_cells() {
            let a: f64 = (0..4).map(|c| fine.cell_area(4 * k + c)).sum();
            assert!((a - base.cell_area(k)).abs() < 1e-14);
        }
    }

    #[test]
    fn hierarchy_quadruples() {
        let h = MeshHierarchy::new(unit(1, 1), 3);
        let counts: Vec<_> = h.levels().iter().map(|t| t.num_cells()).collect();
        assert_eq!(counts, vec![2, 8, 32, 128]);
        assert_eq!(h.children(0, 1), [4, 5, 6, 7]);
        assert_eq!(h.parent(1, 6), 1);
    }
}
