//! Discrete spaces: cellwise-constant deviatoric stress, lowest-order BDM
//! velocity, cellwise-constant pressure.

pub mod bdm;
pub mod quadrature;

use std::sync::Arc;

pub use bdm::CellBasis;
pub use quadrature::{EdgeRule, TriangleRule, EDGE_GAUSS3, TRIANGLE_DEGREE4};

use crate::mesh::Triangulation;
use crate::tensor::{Mat2, SymTensor2, Vec2};

/// Two components `(xx, xy)` per cell.
#[derive(Debug, Clone)]
pub struct StressSpace {
    mesh: Arc<Triangulation>,
}

impl StressSpace {
    pub fn new(mesh: Arc<Triangulation>) -> Self {
        Self { mesh }
    }

    pub fn mesh(&self) -> &Triangulation {
        &self.mesh
    }

    pub fn dim(&self) -> usize {
        2 * self.mesh.num_cells()
    }

    pub fn get(&self, s: &[f64], cell: usize) -> SymTensor2 {
        SymTensor2::new(s[2 * cell], s[2 * cell + 1])
    }

    pub fn set(&self, s: &mut [f64], cell: usize, t: SymTensor2) {
        s[2 * cell] = t.xx;
        s[2 * cell + 1] = t.xy;
    }

    /// `{{S}}` and `[[S n]]` on a facet; one-sided on the boundary.
    pub fn jump_average(&self, s: &[f64], facet: usize) -> (Vec2, SymTensor2) {
        let f = &self.mesh.facets()[facet];
        let sl = self.get(s, f.cells[0]);
        match f.right() {
            Some(r) => {
                let sr = self.get(s, r);
                let d = (sl - sr).apply(f.normal);
                (d, 0.5 * (sl + sr))
            }
            None => (sl.apply(f.normal), sl),
        }
    }

    pub fn l2_norm(&self, s: &[f64]) -> f64 {
        (0..self.mesh.num_cells())
            .map(|k| self.mesh.cell_area(k) * self.get(s, k).ddot(self.get(s, k)))
            .sum::<f64>()
            .sqrt()
    }
}

/// One value per cell.
#[derive(Debug, Clone)]
pub struct PressureSpace {
    mesh: Arc<Triangulation>,
}

impl PressureSpace {
    pub fn new(mesh: Arc<Triangulation>) -> Self {
        Self { mesh }
    }

    pub fn dim(&self) -> usize {
        self.mesh.num_cells()
    }

    /// Area-weighted mean.
    pub fn mean(&self, p: &[f64]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (k, &pk) in p.iter().enumerate() {
            let a = self.mesh.cell_area(k);
            num += a * pk;
            den += a;
        }
        num / den
    }

    pub fn project_zero_mean(&self, p: &mut [f64]) {
        let m = self.mean(p);
        p.iter_mut().for_each(|v| *v -= m);
    }

    pub fn l2_norm(&self, p: &[f64]) -> f64 {
        p.iter()
            .enumerate()
            .map(|(k, v)| self.mesh.cell_area(k) * v * v)
            .sum::<f64>()
            .sqrt()
    }
}

/// Lowest-order BDM space with two dofs per facet.
#[derive(Debug, Clone)]
pub struct VelocitySpace {
    mesh: Arc<Triangulation>,
    cells: Vec<CellBasis>,
}

impl VelocitySpace {
    pub fn new(mesh: Arc<Triangulation>) -> Self {
        let cells = (0..mesh.num_cells())
            .map(|k| CellBasis::build(&mesh, k))
            .collect();
        Self { mesh, cells }
    }

    pub fn mesh(&self) -> &Triangulation {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<Triangulation> {
        &self.mesh
    }

    pub fn dim(&self) -> usize {
        2 * self.mesh.num_facets()
    }

    pub fn cell(&self, cell: usize) -> &CellBasis {
        &self.cells[cell]
    }

    pub fn local_coefficients(&self, v: &[f64], cell: usize) -> [f64; 6] {
        let d = &self.cells[cell].dofs;
        std::array::from_fn(|j| v[d[j]])
    }

    pub fn eval(&self, v: &[f64], cell: usize, x: Vec2) -> Vec2 {
        let c = self.local_coefficients(v, cell);
        let phi = self.cells[cell].eval(x);
        let mut out = [0.0; 2];
        for j in 0..6 {
            out[0] += c[j] * phi[j][0];
            out[1] += c[j] * phi[j][1];
        }
        out
    }

    /// Cellwise-constant gradient, `g[a][b] = d_b v_a`.
    pub fn gradient(&self, v: &[f64], cell: usize) -> Mat2 {
        let c = self.local_coefficients(v, cell);
        let b = &self.cells[cell];
        let mut g = [[0.0; 2]; 2];
        for j in 0..6 {
            for r in 0..2 {
                for s in 0..2 {
                    g[r][s] += c[j] * b.grad[j][r][s];
                }
            }
        }
        g
    }

    pub fn divergence(&self, v: &[f64], cell: usize) -> f64 {
        let c = self.local_coefficients(v, cell);
        (0..6).map(|j| c[j] * self.cells[cell].div[j]).sum()
    }

    /// Symmetric part of the cell gradient.
    pub fn sym_gradient(&self, v: &[f64], cell: usize) -> Mat2 {
        let g = self.gradient(v, cell);
        let off = 0.5 * (g[0][1] + g[1][0]);
        [[g[0][0], off], [off, g[1][1]]]
    }

    /// Deviatoric part of the broken symmetric gradient, the quantity paired
    /// with the stress space.
    pub fn broken_sym_gradient(&self, v: &[f64], cell: usize) -> SymTensor2 {
        SymTensor2::dev_sym(&self.gradient(v, cell))
    }

    /// Canonical interpolant from the facet normal moments of `f`.
    pub fn interpolate<F: Fn(Vec2) -> Vec2>(&self, f: F) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (i, facet) in self.mesh.facets().iter().enumerate() {
            let [a, b] = self.mesh.facet_points(i);
            let n = facet.normal;
            let (mut l0, mut l1) = (0.0, 0.0);
            for (x, t, w) in EDGE_GAUSS3.points_on(a, b) {
                let fx = f(x);
                let fn_ = fx[0] * n[0] + fx[1] * n[1];
                l0 += w * fn_;
                l1 += w * fn_ * 3.0 * (2.0 * t - 1.0);
            }
            out[2 * i] = l0;
            out[2 * i + 1] = l1;
        }
        out
    }

    /// `([[v (x) n]], {{v}})` at a point `x` of facet `facet`. The jump is
    /// `(v_L - v_R) (x) n_F` on interior facets and `v (x) n` on the boundary.
    pub fn jump_average(&self, v: &[f64], facet: usize, x: Vec2) -> (Mat2, Vec2) {
        let f = &self.mesh.facets()[facet];
        let vl = self.eval(v, f.cells[0], x);
        let (d, avg) = match f.right() {
            Some(r) => {
                let vr = self.eval(v, r, x);
                (
                    [vl[0] - vr[0], vl[1] - vr[1]],
                    [0.5 * (vl[0] + vr[0]), 0.5 * (vl[1] + vr[1])],
                )
            }
            None => (vl, vl),
        };
        let n = f.normal;
        (
            [[d[0] * n[0], d[0] * n[1]], [d[1] * n[0], d[1] * n[1]]],
            avg,
        )
    }

    /// `(||grad_h w||^2 + sum_F h_F^-1 ||[[w (x) n]]||_F^2)^(1/2)`, boundary
    /// facets included.
    pub fn dg_norm(&self, v: &[f64]) -> f64 {
        let mut sum = 0.0;
        for k in 0..self.mesh.num_cells() {
            let g = self.gradient(v, k);
            sum += self.cells[k].area * g.iter().flatten().map(|x| x * x).sum::<f64>();
        }
        // h_F = |F|, so the facet weight |F| w / h_F is just w
        for i in 0..self.mesh.num_facets() {
            let [a, b] = self.mesh.facet_points(i);
            for (x, _, w) in EDGE_GAUSS3.points_on(a, b) {
                let (j, _) = self.jump_average(v, i, x);
                sum += w * j.iter().flatten().map(|x| x * x).sum::<f64>();
            }
        }
        sum.sqrt()
    }

    /// Triplets of the Gram matrix of the inner product behind [`Self::dg_norm`].
    pub fn dg_gram_triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for b in &self.cells {
            for i in 0..6 {
                for j in 0..6 {
                    let v: f64 = (0..2)
                        .flat_map(|r| (0..2).map(move |s| (r, s)))
                        .map(|(r, s)| b.grad[i][r][s] * b.grad[j][r][s])
                        .sum();
                    out.push((b.dofs[i], b.dofs[j], b.area * v));
                }
            }
        }
        for (fi, f) in self.mesh.facets().iter().enumerate() {
            let [a, b] = self.mesh.facet_points(fi);
            let sides: Vec<(usize, f64)> = match f.right() {
                Some(r) => vec![(f.cells[0], 1.0), (r, -1.0)],
                None => vec![(f.cells[0], 1.0)],
            };
            for (x, _, w) in EDGE_GAUSS3.points_on(a, b) {
                let mut vals: Vec<(usize, Vec2)> = Vec::with_capacity(12);
                for &(c, sign) in &sides {
                    let phi = self.cells[c].eval(x);
                    for j in 0..6 {
                        vals.push((self.cells[c].dofs[j], [sign * phi[j][0], sign * phi[j][1]]));
                    }
                }
                for &(di, vi) in &vals {
                    for &(dj, vj) in &vals {
                        out.push((di, dj, w * (vi[0] * vj[0] + vi[1] * vj[1])));
                    }
                }
            }
        }
        out
    }

    /// Triplets of `(q, div w)` over Q_h x V_h: row = cell, value
    /// `|K| div psi_j`.
    pub fn divergence_triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(6 * self.cells.len());
        for (k, b) in self.cells.iter().enumerate() {
            for j in 0..6 {
                out.push((k, b.dofs[j], b.area * b.div[j]));
            }
        }
        out
    }

    /// `||v - f||_{L2}` with the cell rule.
    pub fn l2_error<F: Fn(Vec2) -> Vec2>(&self, v: &[f64], f: F) -> f64 {
        let mut sum = 0.0;
        for k in 0..self.mesh.num_cells() {
            let p = self.mesh.cell_points(k);
            let area = self.cells[k].area;
            for (x, w) in TRIANGLE_DEGREE4.points_on(&p) {
                let vh = self.eval(v, k, x);
                let fx = f(x);
                sum += area * w * ((vh[0] - fx[0]).powi(2) + (vh[1] - fx[1]).powi(2));
            }
        }
        sum.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_rectangle, refine_uniform, MarkerScheme, SplitKind};

    fn space(n: usize) -> VelocitySpace {
        let m = generate_rectangle(
            n,
            n,
            (0.0, 1.0),
            (0.0, 1.0),
            SplitKind::Diagonal,
            MarkerScheme::AllWall,
        )
        .unwrap();
        VelocitySpace::new(Arc::new(m))
    }

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    }

    #[test]
    fn global_basis_is_dual_to_facet_moments() {
        let vs = space(3);
        let mesh = vs.mesh();
        for k in 0..mesh.num_cells() {
            let b = vs.cell(k);
            for (fi, f) in mesh.facets().iter().enumerate() {
                if f.cells[0] != k && f.right() != Some(k) {
                    continue;
                }
                let [a, bb] = mesh.facet_points(fi);
                for j in 0..6 {
                    for m in 0..2 {
                        let mom: f64 = EDGE_GAUSS3
                            .points_on(a, bb)
                            .map(|(x, t, w)| {
                                let v = b.eval(x)[j];
                                let q = if m == 0 { 1.0 } else { 3.0 * (2.0 * t - 1.0) };
                                w * (v[0] * f.normal[0] + v[1] * f.normal[1]) * q
                            })
                            .sum();
                        let expect = if b.dofs[j] == 2 * fi + m { 1.0 } else { 0.0 };
                        assert!((mom - expect).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn interpolation_reproduces_linear_fields() {
        let vs = space(4);
        for f in [
            (|_x: Vec2| [1.0, 0.0]) as fn(Vec2) -> Vec2,
            |x| [x[0], -x[1]],
            |x| [2.0 * x[1] - 0.3, 0.7 * x[0] + x[1]],
        ] {
            let v = vs.interpolate(f);
            for k in 0..vs.mesh().num_cells() {
                for (x, _) in TRIANGLE_DEGREE4.points_on(&vs.mesh().cell_points(k)) {
                    let vh = vs.eval(&v, k, x);
                    let fx = f(x);
                    assert!((vh[0] - fx[0]).abs() < 1e-13 && (vh[1] - fx[1]).abs() < 1e-13);
                }
            }
        }
        let v = vs.interpolate(|x| [x[0], -x[1]]);
        for k in 0..vs.mesh().num_cells() {
            assert!(vs.divergence(&v, k).abs() < 1e-13);
        }
    }

    #[test]
    fn sym_gradient_examples() {
        let vs = space(2);
        type Field = fn(Vec2) -> Vec2;
        let cases: [(Field, SymTensor2); 3] = [
            (|x| [x[0], -x[1]], SymTensor2::new(1.0, 0.0)),
            (|x| [x[1], 0.0], SymTensor2::new(0.0, 0.5)),
            (|x| [-x[1], x[0]], SymTensor2::ZERO),
        ];
        for (f, expect) in cases {
            let v = vs.interpolate(f);
            for k in 0..vs.mesh().num_cells() {
                let d = vs.broken_sym_gradient(&v, k);
                assert!((d - expect).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn normal_jump_vanishes_for_any_member() {
        let vs = space(3);
        let mut seed = 7;
        let v: Vec<f64> = (0..vs.dim()).map(|_| lcg(&mut seed)).collect();
        for (i, f) in vs.mesh().facets().iter().enumerate() {
            if f.is_boundary() {
                continue;
            }
            let [a, b] = vs.mesh().facet_points(i);
            for (x, _, _) in EDGE_GAUSS3.points_on(a, b) {
                let (j, _) = vs.jump_average(&v, i, x);
                let n = f.normal;
                let nn = n[0] * (j[0][0] * n[0] + j[0][1] * n[1])
                    + n[1] * (j[1][0] * n[0] + j[1][1] * n[1]);
                assert!(nn.abs() < 1e-13);
            }
        }
        // a globally continuous field has no jump at all
        let c = vs.interpolate(|x| [1.0 + x[1], 2.0 * x[0]]);
        for i in 0..vs.mesh().num_facets() {
            if vs.mesh().facets()[i].is_boundary() {
                continue;
            }
            let x = vs.mesh().facet_midpoint(i);
            let (j, _) = vs.jump_average(&c, i, x);
            assert!(j.iter().flatten().all(|v| v.abs() < 1e-13));
        }
    }

    #[test]
    fn jump_hand_example() {
        // two cells sharing the facet y = 0 with n_F = (0, 1) from the lower cell
        use crate::mesh::{BoundaryMarker, Triangulation};
        use std::collections::BTreeMap;
        let verts = vec![[0.0, 0.0], [1.0, 0.0], [0.5, -1.0], [0.5, 1.0]];
        let cells = vec![[0, 2, 1], [0, 1, 3]];
        let mut tags = BTreeMap::new();
        for e in [(0, 2), (1, 2), (1, 3), (0, 3)] {
            tags.insert(e, BoundaryMarker::Wall);
        }
        let mesh = Arc::new(Triangulation::new(verts, cells, &tags).unwrap());
        let vs = VelocitySpace::new(mesh.clone());
        let shared = mesh.facets().iter().position(|f| !f.is_boundary()).unwrap();
        assert_eq!(mesh.facets()[shared].normal, [0.0, 1.0]);
        // (1, 0) on the lower cell, zero above: tangential, so representable
        // with matching normal moments on the shared facet
        let mut v = vs.interpolate(|_| [1.0, 0.0]);
        let upper = vs.cell(1);
        for j in 0..6 {
            let f = upper.dofs[j] / 2;
            if f != shared {
                v[upper.dofs[j]] = 0.0;
            }
        }
        let x = mesh.facet_midpoint(shared);
        assert!(vs.eval(&v, 1, x).iter().all(|c| c.abs() < 1e-14));
        let (j, avg) = vs.jump_average(&v, shared, x);
        let expect = [[0.0, 1.0], [0.0, 0.0]];
        for r in 0..2 {
            for c in 0..2 {
                assert!((j[r][c] - expect[r][c]).abs() < 1e-14);
            }
        }
        assert!((avg[0] - 0.5).abs() < 1e-14 && avg[1].abs() < 1e-14);
    }

    #[test]
    fn dg_norm_cases() {
        let vs = space(3);
        assert_eq!(vs.dg_norm(&vec![0.0; vs.dim()]), 0.0);
        // continuous linear field: interior jumps vanish, boundary jumps remain
        let f = |x: Vec2| [2.0 * x[0] - x[1], 0.5 * x[1]];
        let v = vs.interpolate(f);
        let grad2 = 4.0 + 1.0 + 0.25;
        let mut bnd = 0.0;
        for (i, _) in vs
            .mesh()
            .facets()
            .iter()
            .enumerate()
            .filter(|(_, f)| f.is_boundary())
        {
            let [a, b] = vs.mesh().facet_points(i);
            for (x, _, w) in EDGE_GAUSS3.points_on(a, b) {
                let fx = f(x);
                bnd += w * (fx[0] * fx[0] + fx[1] * fx[1]);
            }
        }
        assert!((vs.dg_norm(&v) - (grad2 + bnd).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn dg_norm_matches_brute_force_oracle() {
        let vs = space(2);
        let mut seed = 11;
        let v: Vec<f64> = (0..vs.dim()).map(|_| lcg(&mut seed)).collect();
        // gradients by central differences of point values, facets by a
        // composite midpoint rule with many panels
        let mesh = vs.mesh();
        let mut sum = 0.0;
        let h = 1e-5;
        for k in 0..mesh.num_cells() {
            let c = mesh.cell_centroid(k);
            let mut g2 = 0.0;
            for d in 0..2 {
                let mut xp = c;
                let mut xm = c;
                xp[d] += h;
                xm[d] -= h;
                let (vp, vm) = (vs.eval(&v, k, xp), vs.eval(&v, k, xm));
                g2 += ((vp[0] - vm[0]) / (2.0 * h)).powi(2) + ((vp[1] - vm[1]) / (2.0 * h)).powi(2);
            }
            sum += mesh.cell_area(k) * g2;
        }
        let panels = 2000;
        for (i, f) in mesh.facets().iter().enumerate() {
            let [a, b] = mesh.facet_points(i);
            let mut acc = 0.0;
            for p in 0..panels {
                let t = (p as f64 + 0.5) / panels as f64;
                let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                let vl = vs.eval(&v, f.cells[0], x);
                let vr = f.right().map(|r| vs.eval(&v, r, x)).unwrap_or([0.0; 2]);
                acc += (vl[0] - vr[0]).powi(2) + (vl[1] - vr[1]).powi(2);
            }
            sum += acc / panels as f64;
        }
        let oracle = sum.sqrt();
        let got = vs.dg_norm(&v);
        assert!((got - oracle).abs() < 1e-6 * oracle, "{got} vs {oracle}");
        // and exactly against the Gram matrix
        let gram = vs.dg_gram_triplets();
        let q: f64 = gram.iter().map(|&(i, j, w)| v[i] * w * v[j]).sum();
        assert!((q.sqrt() - got).abs() < 1e-12 * got);
    }

    #[test]
    fn interpolation_converges_at_second_order() {
        let f = |x: Vec2| [x[0].sin(), 0.0];
        let base = generate_rectangle(
            4,
            4,
            (0.0, 1.0),
            (0.0, 1.0),
            SplitKind::Diagonal,
            MarkerScheme::AllWall,
        )
        .unwrap();
        let mut mesh = base;
        let mut hs = Vec::new();
        let mut errs = Vec::new();
        for _ in 0..3 {
            let vs = VelocitySpace::new(Arc::new(mesh.clone()));
            let v = vs.interpolate(f);
            hs.push(mesh.max_facet_length().ln());
            errs.push(vs.l2_error(&v, f).ln());
            mesh = refine_uniform(&mesh);
        }
        let n = hs.len() as f64;
        let mh = hs.iter().sum::<f64>() / n;
        let me = errs.iter().sum::<f64>() / n;
        let slope = hs
            .iter()
            .zip(&errs)
            .map(|(h, e)| (h - mh) * (e - me))
            .sum::<f64>()
            / hs.iter().map(|h| (h - mh).powi(2)).sum::<f64>();
        assert!(slope > 1.9, "slope {slope}");
    }

    #[test]
    fn stress_and_pressure_helpers() {
        let m = Arc::new(
            generate_rectangle(
                2,
                1,
                (0.0, 2.0),
                (0.0, 1.0),
                SplitKind::Diagonal,
                MarkerScheme::AllWall,
            )
            .unwrap(),
        );
        let ss = StressSpace::new(m.clone());
        let ps = PressureSpace::new(m.clone());
        assert_eq!(ss.dim(), 8);
        assert_eq!(ps.dim(), 4);
        let mut p = vec![1.0, 2.0, 3.0, 6.0];
        assert!((ps.mean(&p) - 3.0).abs() < 1e-15);
        ps.project_zero_mean(&mut p);
        assert!(ps.mean(&p).abs() < 1e-15);
        let s = vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        assert!((ss.l2_norm(&s) - (2.0f64 * 2.0).sqrt()).abs() < 1e-14);
        for i in 0..m.num_facets() {
            let (j, a) = ss.jump_average(&s, i);
            if !m.facets()[i].is_boundary() {
                assert!(j[0].abs() < 1e-15 && j[1].abs() < 1e-15);
            }
            assert_eq!(a, SymTensor2::new(1.0, 0.0));
        }
    }
}
