use std::sync::Arc;

use actflow_core::fem::{StressSpace, VelocitySpace};
use actflow_core::mesh::{generate_rectangle, MarkerScheme, SplitKind, Triangulation};
use faer::linalg::solvers::Solve;
use faer::{Mat, Side};

fn square(n: usize) -> Arc<Triangulation> {
    Arc::new(
        generate_rectangle(
            n,
            n,
            (0.0, 1.0),
            (0.0, 1.0),
            SplitKind::Diagonal,
            MarkerScheme::AllWall,
        )
        .unwrap(),
    )
}

fn perturbed(n: usize) -> Arc<Triangulation> {
    let m = square(n);
    let mut v = m.vertices().to_vec();
    for (i, p) in v.iter_mut().enumerate() {
        if p[0] > 0.0 && p[0] < 1.0 && p[1] > 0.0 && p[1] < 1.0 {
            let h = 1.0 / n as f64;
            p[0] += 0.2 * h * ((i as f64) * 1.3).sin();
            p[1] += 0.2 * h * ((i as f64) * 0.7).cos();
        }
    }
    Arc::new(Triangulation::new(v, m.cells().to_vec(), &m.boundary_tags()).unwrap())
}

fn random_vec(n: usize, seed: u64) -> Vec<f64> {
    let mut s = seed;
    (0..n)
        .map(|_| {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
        .collect()
}

fn dense_b(vs: &VelocitySpace) -> Mat<f64> {
    let mut b = Mat::<f64>::zeros(vs.mesh().num_cells(), vs.dim());
    for (r, c, v) in vs.divergence_triplets() {
        b[(r, c)] += v;
    }
    b
}

/// Removes the Q_h-divergence of `v` by an L2-orthogonal correction.
fn project_divergence_free(vs: &VelocitySpace, v: &[f64]) -> Vec<f64> {
    let b = dense_b(vs);
    let vm = Mat::<f64>::from_fn(v.len(), 1, |i, _| v[i]);
    let bbt = &b * b.transpose();
    let lam = bbt.partial_piv_lu().solve(&b * &vm);
    let corr = b.transpose() * lam;
    (0..v.len()).map(|i| v[i] - corr[(i, 0)]).collect()
}

#[test]
fn discretely_solenoidal_is_pointwise_solenoidal() {
    let vs = VelocitySpace::new(perturbed(5));
    let v = project_divergence_free(&vs, &random_vec(vs.dim(), 3));
    let mut max_div: f64 = 0.0;
    for k in 0..vs.mesh().num_cells() {
        max_div = max_div.max(vs.divergence(&v, k).abs());
        // divergence is constant: check at three interior points by differences
        let p = vs.mesh().cell_points(k);
        for lam in [[0.6, 0.2, 0.2], [0.2, 0.6, 0.2], [0.2, 0.2, 0.6]] {
            let x = [
                lam[0] * p[0][0] + lam[1] * p[1][0] + lam[2] * p[2][0],
                lam[0] * p[0][1] + lam[1] * p[1][1] + lam[2] * p[2][1],
            ];
            let h = 1e-6;
            let dx = vs.eval(&v, k, [x[0] + h, x[1]])[0] - vs.eval(&v, k, [x[0] - h, x[1]])[0];
            let dy = vs.eval(&v, k, [x[0], x[1] + h])[1] - vs.eval(&v, k, [x[0], x[1] - h])[1];
            assert!(((dx + dy) / (2.0 * h)).abs() < 1e-7);
        }
    }
    assert!(max_div < 1e-12, "max |div| = {max_div:e}");
}

#[test]
fn symmetric_gradient_is_cellwise_constant() {
    let vs = VelocitySpace::new(perturbed(4));
    let v = random_vec(vs.dim(), 5);
    for k in 0..vs.mesh().num_cells() {
        let d = vs.sym_gradient(&v, k);
        let p = vs.mesh().cell_points(k);
        for lam in [[0.6, 0.2, 0.2], [0.2, 0.6, 0.2], [0.2, 0.2, 0.6]] {
            let x = [
                lam[0] * p[0][0] + lam[1] * p[1][0] + lam[2] * p[2][0],
                lam[0] * p[0][1] + lam[1] * p[1][1] + lam[2] * p[2][1],
            ];
            let h = 1e-6;
            let mut g = [[0.0; 2]; 2];
            for b in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[b] += h;
                xm[b] -= h;
                let (vp, vm) = (vs.eval(&v, k, xp), vs.eval(&v, k, xm));
                for a in 0..2 {
                    g[a][b] = (vp[a] - vm[a]) / (2.0 * h);
                }
            }
            let scale = d.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
            assert!((g[0][0] - d[0][0]).abs() < 1e-6 * scale);
            assert!((g[1][1] - d[1][1]).abs() < 1e-6 * scale);
            assert!((0.5 * (g[0][1] + g[1][0]) - d[0][1]).abs() < 1e-6 * scale);
        }
    }
}

#[test]
fn stress_velocity_inf_sup_is_an_equality() {
    let mesh = perturbed(4);
    let vs = VelocitySpace::new(mesh.clone());
    let ss = StressSpace::new(mesh.clone());
    for seed in [1, 2, 3] {
        let w = project_divergence_free(&vs, &random_vec(vs.dim(), seed));
        // Riesz representer of T -> int T : D(w) in the stress space
        let mut sup2 = 0.0;
        let mut d2 = 0.0;
        for k in 0..mesh.num_cells() {
            let area = mesh.cell_area(k);
            let d = vs.sym_gradient(&w, k);
            let b = [area * (d[0][0] - d[1][1]), area * 2.0 * d[0][1]];
            // the stress mass matrix is 2|K| I
            sup2 += (b[0] * b[0] + b[1] * b[1]) / (2.0 * area);
            d2 += area * d.iter().flatten().map(|x| x * x).sum::<f64>();
        }
        assert!(ss.dim() == 2 * mesh.num_cells());
        assert!((sup2.sqrt() - d2.sqrt()).abs() < 1e-12 * d2.sqrt().max(1.0));
    }
}

fn velocity_pressure_inf_sup(n: usize) -> f64 {
    let mesh = square(n);
    let vs = VelocitySpace::new(mesh.clone());
    // velocity with vanishing normal trace on the boundary
    let free: Vec<usize> = (0..vs.dim())
        .filter(|&d| !mesh.facets()[d / 2].is_boundary())
        .collect();
    let mut index = vec![usize::MAX; vs.dim()];
    for (i, &d) in free.iter().enumerate() {
        index[d] = i;
    }
    let m = free.len();
    let nc = mesh.num_cells();
    let mut g = Mat::<f64>::zeros(m, m);
    for (i, j, v) in vs.dg_gram_triplets() {
        if index[i] != usize::MAX && index[j] != usize::MAX {
            g[(index[i], index[j])] += v;
        }
    }
    let mut b = Mat::<f64>::zeros(nc, m);
    for (r, c, v) in vs.divergence_triplets() {
        if index[c] != usize::MAX {
            b[(r, index[c])] += v / mesh.cell_area(r).sqrt();
        }
    }
    let llt = g.llt(Side::Lower).unwrap();
    let gib = llt.solve(b.transpose().to_owned());
    let s = &b * gib;
    let ev = s.self_adjoint_eigenvalues(Side::Lower).unwrap();
    // the constant pressure is the only kernel mode
    assert!(ev[0].abs() < 1e-10 * ev[nc - 1]);
    ev[1].sqrt()
}

#[test]
fn velocity_pressure_inf_sup_is_mesh_stable() {
    let gammas: Vec<f64> = [4, 8, 16]
        .iter()
        .map(|&n| velocity_pressure_inf_sup(n))
        .collect();
    for w in gammas.windows(2) {
        let drift = (w[1] - w[0]).abs() / w[0];
        assert!(drift < 0.2, "inf-sup constants {gammas:?}");
    }
}
