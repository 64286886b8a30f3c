//! Local residual and Jacobian contributions of cells and facets.

use super::{Assembler, Discretization, FacetKind};
use crate::constitutive::{constitutive_tangent, generalized_fluidity};
use crate::error::{Error, Result};
use crate::fem::{EDGE_GAUSS3, TRIANGLE_DEGREE4};
use crate::tensor::{dot, Mat2, SymTensor2, Vec2};

/// Dense local block; `jac` is row-major `idx.len()` squared.
pub(crate) struct Local {
    pub idx: Vec<usize>,
    pub res: Vec<f64>,
    pub jac: Vec<f64>,
}

impl Local {
    fn new(idx: Vec<usize>, jac: bool) -> Self {
        let n = idx.len();
        Self {
            idx,
            res: vec![0.0; n],
            jac: if jac { vec![0.0; n * n] } else { Vec::new() },
        }
    }

    #[inline]
    fn j(&mut self, a: usize, b: usize, v: f64) {
        let n = self.idx.len();
        self.jac[a * n + b] += v;
    }
}

/// `T_c n` for the stress basis `T_0 = diag(1, -1)`, `T_1 = offdiag(1, 1)`.
#[inline]
fn tn(c: usize, n: Vec2) -> Vec2 {
    if c == 0 {
        [n[0], -n[1]]
    } else {
        [n[1], n[0]]
    }
}

/// `T_c : G`.
#[inline]
fn tg(c: usize, g: &Mat2) -> f64 {
    if c == 0 {
        g[0][0] - g[1][1]
    } else {
        g[0][1] + g[1][0]
    }
}

#[inline]
fn mat_vec(g: &Mat2, v: Vec2) -> Vec2 {
    [
        g[0][0] * v[0] + g[0][1] * v[1],
        g[1][0] * v[0] + g[1][1] * v[1],
    ]
}

fn combine(phi: &[Vec2; 6], c: &[f64; 6]) -> Vec2 {
    let mut v = [0.0; 2];
    for j in 0..6 {
        v[0] += c[j] * phi[j][0];
        v[1] += c[j] * phi[j][1];
    }
    v
}

fn local_v(asm: &Assembler, x: &[f64], cell: usize) -> [f64; 6] {
    let l = asm.disc.layout;
    let b = asm.disc.velocity.cell(cell);
    std::array::from_fn(|j| x[l.velocity(b.dofs[j])])
}

fn stress(asm: &Assembler, x: &[f64], cell: usize) -> SymTensor2 {
    let l = asm.disc.layout;
    SymTensor2::new(x[l.stress(cell, 0)], x[l.stress(cell, 1)])
}

pub(crate) fn cell_indices(disc: &Discretization, k: usize) -> Vec<usize> {
    let l = disc.layout;
    let b = disc.velocity.cell(k);
    let mut idx = vec![l.stress(k, 0), l.stress(k, 1)];
    idx.extend(b.dofs.iter().map(|&d| l.velocity(d)));
    idx.push(l.pressure(k));
    idx
}

pub(crate) fn interior_indices(disc: &Discretization, f: usize) -> Vec<usize> {
    let l = disc.layout;
    let facet = &disc.mesh.facets()[f];
    let (kl, kr) = (facet.cells[0], facet.cells[1]);
    let mut idx = vec![
        l.stress(kl, 0),
        l.stress(kl, 1),
        l.stress(kr, 0),
        l.stress(kr, 1),
    ];
    idx.extend(disc.velocity.cell(kl).dofs.iter().map(|&d| l.velocity(d)));
    idx.extend(disc.velocity.cell(kr).dofs.iter().map(|&d| l.velocity(d)));
    idx
}

pub(crate) fn boundary_indices(disc: &Discretization, f: usize) -> Vec<usize> {
    let l = disc.layout;
    let k = disc.mesh.facets()[f].cells[0];
    let mut idx = vec![l.stress(k, 0), l.stress(k, 1)];
    idx.extend(disc.velocity.cell(k).dofs.iter().map(|&d| l.velocity(d)));
    idx
}

pub(crate) fn cell_kernel(asm: &Assembler, x: &[f64], k: usize, jac: bool) -> Result<Local> {
    let disc = &asm.disc;
    let p = &asm.setup.params;
    let gamma = asm.setup.gamma;
    let b = disc.velocity.cell(k);
    let area = b.area;
    let c = local_v(asm, x, k);
    let s = stress(asm, x, k);
    let pk = x[disc.layout.pressure(k)];
    let mut loc = Local::new(cell_indices(disc, k), jac);

    let mut g = [[0.0; 2]; 2];
    let mut div = 0.0;
    for j in 0..6 {
        for r in 0..2 {
            for q in 0..2 {
                g[r][q] += c[j] * b.grad[j][r][q];
            }
        }
        div += c[j] * b.div[j];
    }

    // constitutive equation
    let ag = generalized_fluidity(s.norm(), p);
    if !ag.is_finite() || !s.is_finite() {
        return Err(Error::NonFinite { cell: k });
    }
    let sc = s.components();
    for cc in 0..2 {
        loc.res[cc] = area * tg(cc, &g) - 2.0 * area * ag * sc[cc];
    }
    if jac {
        let m = constitutive_tangent(s, p).m;
        for cc in 0..2 {
            for dd in 0..2 {
                loc.j(cc, dd, -2.0 * area * m[cc][dd]);
            }
            for j in 0..6 {
                let v = area * tg(cc, &b.grad[j]);
                loc.j(cc, 2 + j, v);
                loc.j(2 + j, cc, v);
            }
        }
    }

    // stress, pressure and augmented Lagrangian terms of the momentum equation
    for i in 0..6 {
        loc.res[2 + i] +=
            area * s.ddot_mat(&b.grad[i]) - pk * area * b.div[i] + gamma * area * div * b.div[i];
        if jac {
            loc.j(2 + i, 8, -area * b.div[i]);
            loc.j(8, 2 + i, -area * b.div[i]);
            for j in 0..6 {
                loc.j(2 + i, 2 + j, gamma * area * b.div[i] * b.div[j]);
            }
        }
    }
    loc.res[8] = -area * div;

    // convection, volume part: -Re (v (x) v, grad w) = -Re v . (G_w v)
    let re = p.re;
    if re != 0.0 {
        let pts = disc.mesh.cell_points(k);
        for (xq, w) in TRIANGLE_DEGREE4.points_on(&pts) {
            let phi = b.eval(xq);
            let v = combine(&phi, &c);
            let wq = re * area * w;
            for i in 0..6 {
                let gv = mat_vec(&b.grad[i], v);
                loc.res[2 + i] -= wq * dot(v, gv);
                if jac {
                    // d/dv_j of v.(G_i v) = phi_j.(G_i v) + v.(G_i phi_j)
                    let gtv = [
                        b.grad[i][0][0] * v[0] + b.grad[i][1][0] * v[1],
                        b.grad[i][0][1] * v[0] + b.grad[i][1][1] * v[1],
                    ];
                    for j in 0..6 {
                        loc.j(2 + i, 2 + j, -wq * (dot(phi[j], gv) + dot(gtv, phi[j])));
                    }
                }
            }
        }
    }
    Ok(loc)
}

pub(crate) fn interior_kernel(asm: &Assembler, x: &[f64], f: usize, jac: bool) -> Local {
    let disc = &asm.disc;
    let mesh = &disc.mesh;
    let facet = &mesh.facets()[f];
    let (kl, kr) = (facet.cells[0], facet.cells[1]);
    let (bl, br) = (disc.velocity.cell(kl), disc.velocity.cell(kr));
    let (cl, cr) = (local_v(asm, x, kl), local_v(asm, x, kr));
    let (sl, sr) = (stress(asm, x, kl), stress(asm, x, kr));
    let n = facet.normal;
    let len = facet.length;
    let pen = asm.setup.delta / len;
    let re = asm.setup.params.re;
    let upwind = asm.setup.convective_flux && re != 0.0;
    let mut loc = Local::new(interior_indices(disc, f), jac);
    // local offsets: stress L 0..2, stress R 2..4, velocity L 4..10, velocity R 10..16
    let savg_n = (0.5 * (sl + sr)).apply(n);
    let [a, b] = mesh.facet_points(f);
    for (xq, _, w) in EDGE_GAUSS3.points_on(a, b) {
        let ww = w * len;
        let pl = bl.eval(xq);
        let pr = br.eval(xq);
        let vl = combine(&pl, &cl);
        let vr = combine(&pr, &cr);
        let d = [vl[0] - vr[0], vl[1] - vr[1]];
        // test functions with their jump sign
        let test = |t: usize| -> Vec2 {
            if t < 6 {
                pl[t]
            } else {
                [-pr[t - 6][0], -pr[t - 6][1]]
            }
        };

        // constitutive equation: -1/2 <[[v (x) n]], T> on each side
        for side in 0..2 {
            for cc in 0..2 {
                let tnc = tn(cc, n);
                loc.res[2 * side + cc] -= 0.5 * ww * dot(d, tnc);
                if jac {
                    for t in 0..12 {
                        let v = -0.5 * ww * dot(test(t), tnc);
                        loc.j(2 * side + cc, 4 + t, v);
                        // consistency term of the momentum equation is the transpose
                        loc.j(4 + t, 2 * side + cc, v);
                    }
                }
            }
        }

        let un = dot(vl, n);
        let (up, up_left) = if un >= 0.0 { (vl, true) } else { (vr, false) };
        for t in 0..12 {
            let wt = test(t);
            let mut r = -ww * dot(savg_n, wt) + pen * ww * dot(d, wt);
            if upwind {
                r += re * ww * un * dot(up, wt);
            }
            loc.res[4 + t] += r;
            if jac {
                for u in 0..12 {
                    // trial function u with the same jump sign as the test
                    loc.j(4 + t, 4 + u, pen * ww * dot(test(u), wt));
                }
                if upwind {
                    for j in 0..6 {
                        // un depends on the left representation only
                        loc.j(4 + t, 4 + j, re * ww * dot(pl[j], n) * dot(up, wt));
                        let (col, phi) = if up_left {
                            (4 + j, pl[j])
                        } else {
                            (10 + j, pr[j])
                        };
                        loc.j(4 + t, col, re * ww * un * dot(phi, wt));
                    }
                }
            }
        }
    }
    loc
}

pub(crate) fn boundary_kernel(asm: &Assembler, x: &[f64], f: usize, jac: bool) -> Local {
    let disc = &asm.disc;
    let mesh = &disc.mesh;
    let facet = &mesh.facets()[f];
    let k = facet.cells[0];
    let bk = disc.velocity.cell(k);
    let ck = local_v(asm, x, k);
    let s = stress(asm, x, k);
    let n = facet.normal;
    let len = facet.length;
    let pen = asm.setup.delta / len;
    let re = asm.setup.params.re;
    let upwind = asm.setup.convective_flux && re != 0.0;
    let dirichlet = matches!(asm.bdata.kind[f], FacetKind::Dirichlet);
    let mut loc = Local::new(boundary_indices(disc, f), jac);
    let sn = s.apply(n);
    let [a, b] = mesh.facet_points(f);
    for (q, (xq, _, w)) in EDGE_GAUSS3.points_on(a, b).enumerate() {
        let ww = w * len;
        let phi = bk.eval(xq);
        let v = combine(&phi, &ck);
        let g = asm.bdata.g[f][q];
        if dirichlet {
            let d = [v[0] - g[0], v[1] - g[1]];
            for cc in 0..2 {
                let tnc = tn(cc, n);
                loc.res[cc] -= ww * dot(d, tnc);
                if jac {
                    for j in 0..6 {
                        let val = -ww * dot(phi[j], tnc);
                        loc.j(cc, 2 + j, val);
                        loc.j(2 + j, cc, val);
                    }
                }
            }
            for i in 0..6 {
                loc.res[2 + i] += -ww * dot(sn, phi[i]) + pen * ww * dot(d, phi[i]);
                if jac {
                    for j in 0..6 {
                        loc.j(2 + i, 2 + j, pen * ww * dot(phi[i], phi[j]));
                    }
                }
            }
        }
        if upwind {
            let un = dot(v, n);
            let inflow_data = dirichlet && un < 0.0;
            let up = if inflow_data { g } else { v };
            for i in 0..6 {
                loc.res[2 + i] += re * ww * un * dot(up, phi[i]);
                if jac {
                    for j in 0..6 {
                        let mut val = re * ww * dot(phi[j], n) * dot(up, phi[i]);
                        if !inflow_data {
                            val += re * ww * un * dot(phi[j], phi[i]);
                        }
                        loc.j(2 + i, 2 + j, val);
                    }
                }
            }
        }
    }
    loc
}

pub(crate) fn lifted_strain(asm: &Assembler, x: &[f64], k: usize) -> SymTensor2 {
    let disc = &asm.disc;
    let mesh = &disc.mesh;
    let b = disc.velocity.cell(k);
    let c = local_v(asm, x, k);
    let mut g = [[0.0; 2]; 2];
    for j in 0..6 {
        for r in 0..2 {
            for q in 0..2 {
                g[r][q] += c[j] * b.grad[j][r][q];
            }
        }
    }
    let mut acc = [tg(0, &g) * b.area, tg(1, &g) * b.area];
    for f in mesh.cell_facets(k) {
        let facet = &mesh.facets()[f];
        let (weight, other) = match asm.bdata.kind[f] {
            FacetKind::Interior => {
                let o = if facet.cells[0] == k {
                    facet.cells[1]
                } else {
                    facet.cells[0]
                };
                (0.5, Some(o))
            }
            FacetKind::Dirichlet => (1.0, None),
            FacetKind::Natural(_) => continue,
        };
        let [pa, pb] = mesh.facet_points(f);
        for (q, (xq, _, w)) in EDGE_GAUSS3.points_on(pa, pb).enumerate() {
            let ww = w * facet.length;
            let vl = disc
                .velocity
                .eval(&x[disc.layout.velocity_range()], facet.cells[0], xq);
            let vr = match other {
                Some(_) => disc
                    .velocity
                    .eval(&x[disc.layout.velocity_range()], facet.cells[1], xq),
                None => asm.bdata.g[f][q],
            };
            let d = [vl[0] - vr[0], vl[1] - vr[1]];
            for cc in 0..2 {
                acc[cc] -= weight * ww * dot(d, tn(cc, facet.normal));
            }
        }
    }
    // T_c : D~ = 2 D~_c
    SymTensor2::new(0.5 * acc[0] / b.area, 0.5 * acc[1] / b.area)
}
