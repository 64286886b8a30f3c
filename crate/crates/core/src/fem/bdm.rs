//! Lowest-order Brezzi-Douglas-Marini element.
//!
//! Global degrees of freedom on a facet `F` with unit normal `n_F` are
//! `(1/|F|) int_F v.n_F` and `(1/|F|) int_F v.n_F 3(2 tau - 1)`, where `tau`
//! runs from the lower to the higher global vertex. Hence on the facet
//! `v.n_F = L0 + L1 (2 tau - 1)`.

use std::sync::OnceLock;

use faer::linalg::solvers::DenseSolveCore;
use faer::Mat;

use super::quadrature::EDGE_GAUSS3;
use crate::mesh::Triangulation;
use crate::tensor::{Mat2, Vec2};

/// Reference triangle `(0,0), (1,0), (0,1)`; edge `i` is opposite vertex `i`
/// and runs between the listed local vertices.
pub const REF_EDGES: [[usize; 2]; 3] = [[1, 2], [0, 2], [0, 1]];
const REF_VERTS: [Vec2; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

/// Affine vector field `a + G x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineField {
    pub a: Vec2,
    pub g: Mat2,
}

impl AffineField {
    pub fn eval(&self, x: Vec2) -> Vec2 {
        [
            self.a[0] + self.g[0][0] * x[0] + self.g[0][1] * x[1],
            self.a[1] + self.g[1][0] * x[0] + self.g[1][1] * x[1],
        ]
    }
}

fn ref_normal(edge: usize) -> Vec2 {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    match edge {
        0 => [h, h],
        1 => [-1.0, 0.0],
        _ => [0.0, -1.0],
    }
}

fn edge_weight(m: usize, t: f64) -> f64 {
    if m == 0 {
        1.0
    } else {
        3.0 * (2.0 * t - 1.0)
    }
}

/// Unnormalized reference moment `int_e phi.n q_m ds` of edge `edge`.
pub fn reference_moment(f: &AffineField, edge: usize, m: usize) -> f64 {
    let [ia, ib] = REF_EDGES[edge];
    let (a, b) = (REF_VERTS[ia], REF_VERTS[ib]);
    let len = (b[0] - a[0]).hypot(b[1] - a[1]);
    let n = ref_normal(edge);
    EDGE_GAUSS3
        .points_on(a, b)
        .map(|(x, t, w)| {
            let v = f.eval(x);
            w * len * (v[0] * n[0] + v[1] * n[1]) * edge_weight(m, t)
        })
        .sum()
}

fn monomial(k: usize) -> AffineField {
    let mut f = AffineField {
        a: [0.0; 2],
        g: [[0.0; 2]; 2],
    };
    let comp = k / 3;
    match k % 3 {
        0 => f.a[comp] = 1.0,
        1 => f.g[comp][0] = 1.0,
        _ => f.g[comp][1] = 1.0,
    }
    f
}

/// Reference basis dual to the six reference moments, ordered
/// `2 * edge + m`.
pub fn reference_basis() -> &'static [AffineField; 6] {
    static BASIS: OnceLock<[AffineField; 6]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mono: Vec<AffineField> = (0..6).map(monomial).collect();
        let dof = Mat::<f64>::from_fn(6, 6, |i, k| reference_moment(&mono[k], i / 2, i % 2));
        let c = dof.partial_piv_lu().inverse();
        std::array::from_fn(|j| {
            let mut f = AffineField {
                a: [0.0; 2],
                g: [[0.0; 2]; 2],
            };
            for (k, mk) in mono.iter().enumerate() {
                let ck = c[(k, j)];
                for a in 0..2 {
                    f.a[a] += ck * mk.a[a];
                    for b in 0..2 {
                        f.g[a][b] += ck * mk.g[a][b];
                    }
                }
            }
            f
        })
    })
}

/// Contravariant Piola transform onto the cell with vertices `p`, returned as
/// an affine field of `x - p[0]`.
pub fn piola(f: &AffineField, p: &[Vec2; 3]) -> AffineField {
    let j = [
        [p[1][0] - p[0][0], p[2][0] - p[0][0]],
        [p[1][1] - p[0][1], p[2][1] - p[0][1]],
    ];
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    let jinv = [
        [j[1][1] / det, -j[0][1] / det],
        [-j[1][0] / det, j[0][0] / det],
    ];
    let mm = |a: &Mat2, b: &Mat2| -> Mat2 {
        let mut c = [[0.0; 2]; 2];
        for i in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    c[i][k] += a[i][l] * b[l][k];
                }
            }
        }
        c
    };
    let mut g = mm(&mm(&j, &f.g), &jinv);
    for row in g.iter_mut() {
        for v in row.iter_mut() {
            *v /= det;
        }
    }
    // psi(x) = (J a + J G J^-1 (x - p0)) / det
    AffineField {
        a: [
            (j[0][0] * f.a[0] + j[0][1] * f.a[1]) / det,
            (j[1][0] * f.a[0] + j[1][1] * f.a[1]) / det,
        ],
        g,
    }
}

/// Physical basis of one cell, `psi_j(x) = value[j] + grad[j] (x - centroid)`,
/// with `grad[j][a][b] = d_b psi_a`. Local function `j = 2 i + m` belongs to
/// global dof `dofs[j] = 2 * facet(i) + m`.
#[derive(Debug, Clone)]
pub struct CellBasis {
    pub dofs: [usize; 6],
    pub area: f64,
    pub centroid: Vec2,
    pub value: [Vec2; 6],
    pub grad: [Mat2; 6],
    pub div: [f64; 6],
}

impl CellBasis {
    pub fn build(mesh: &Triangulation, cell: usize) -> Self {
        let p = mesh.cell_points(cell);
        let verts = mesh.cells()[cell];
        let facets = mesh.cell_facets(cell);
        let centroid = mesh.cell_centroid(cell);
        let refb = reference_basis();
        let mut out = CellBasis {
            dofs: [0; 6],
            area: mesh.cell_area(cell),
            centroid,
            value: [[0.0; 2]; 6],
            grad: [[[0.0; 2]; 2]; 6],
            div: [0.0; 6],
        };
        for i in 0..3 {
            let f = &mesh.facets()[facets[i]];
            let s_n = if f.cells[0] == cell { 1.0 } else { -1.0 };
            let [a, b] = REF_EDGES[i];
            let s_d = if verts[a] < verts[b] { 1.0 } else { -1.0 };
            for m in 0..2 {
                let j = 2 * i + m;
                let scale = f.length * s_n * if m == 1 { s_d } else { 1.0 };
                let phys = piola(&refb[j], &p);
                let v = phys.eval([centroid[0] - p[0][0], centroid[1] - p[0][1]]);
                out.dofs[j] = 2 * facets[i] + m;
                out.value[j] = [scale * v[0], scale * v[1]];
                for r in 0..2 {
                    for c in 0..2 {
                        out.grad[j][r][c] = scale * phys.g[r][c];
                    }
                }
                out.div[j] = out.grad[j][0][0] + out.grad[j][1][1];
            }
        }
        out
    }

    /// All six basis values at `x`.
    pub fn eval(&self, x: Vec2) -> [Vec2; 6] {
        let d = [x[0] - self.centroid[0], x[1] - self.centroid[1]];
        std::array::from_fn(|j| {
            let g = &self.grad[j];
            [
                self.value[j][0] + g[0][0] * d[0] + g[0][1] * d[1],
                self.value[j][1] + g[1][0] * d[0] + g[1][1] * d[1],
            ]
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_basis_is_dual() {
        let b = reference_basis();
        for (j, f) in b.iter().enumerate() {
            for i in 0..6 {
                let m = reference_moment(f, i / 2, i % 2);
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((m - expect).abs() < 1e-13, "dof {i} of basis {j}: {m}");
            }
        }
    }

    #[test]
    fn piola_preserves_normal_moments() {
        // arbitrary positively oriented affine cells
        let cells = [
            [[0.3, -0.2], [2.1, 0.4], [0.9, 1.7]],
            [[-5.0, 3.0], [-4.99, 3.001], [-5.02, 3.03]],
            [[1.0, 1.0], [1.0, 2.0], [-3.0, 1.5]],
        ];
        for p in cells {
            for f in reference_basis() {
                let phys = piola(f, &p);
                for (e, [ia, ib]) in REF_EDGES.iter().enumerate() {
                    let (a, b) = (p[*ia], p[*ib]);
                    let len = (b[0] - a[0]).hypot(b[1] - a[1]);
                    // outward normal of a CCW cell is the tangent rotated clockwise
                    let opp = p[e];
                    let mut n = [(b[1] - a[1]) / len, -(b[0] - a[0]) / len];
                    if n[0] * (opp[0] - a[0]) + n[1] * (opp[1] - a[1]) > 0.0 {
                        n = [-n[0], -n[1]];
                    }
                    for m in 0..2 {
                        let phys_moment: f64 = EDGE_GAUSS3
                            .points_on(a, b)
                            .map(|(x, t, w)| {
                                let v = phys.eval([x[0] - p[0][0], x[1] - p[0][1]]);
                                w * len * (v[0] * n[0] + v[1] * n[1]) * edge_weight(m, t)
                            })
                            .sum();
                        let ref_moment = reference_moment(f, e, m);
                        assert!(
                            (phys_moment - ref_moment).abs() < 1e-13,
                            "{phys_moment} vs {ref_moment}"
                        );
                    }
                }
            }
        }
    }
}
