use std::collections::BTreeMap;

use super::*;
use crate::assembly::{vector_field, BoundaryCondition, Discretization, ProblemSetup};
use crate::mesh::{generate_rectangle, BoundaryMarker, MarkerScheme, SplitKind};
use crate::solver::{newton_solve, NewtonConfig};

fn square(n: usize) -> Arc<Triangulation> {
    Arc::new(
        generate_rectangle(
            n,
            n,
            (-1.0, 1.0),
            (-1.0, 1.0),
            SplitKind::Crossed,
            MarkerScheme::AllWall,
        )
        .unwrap(),
    )
}

/// Square with the cells of `[-0.25, 0.25]^2` removed.
fn square_with_hole(n: usize) -> Arc<Triangulation> {
    let full = square(n);
    let keep: Vec<[usize; 3]> = (0..full.num_cells())
        .filter(|&k| {
            let c = full.cell_centroid(k);
            c[0].abs() > 0.25 || c[1].abs() > 0.25
        })
        .map(|k| full.cells()[k])
        .collect();
    let mut count: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for c in &keep {
        for (a, b) in [(c[0], c[1]), (c[1], c[2]), (c[0], c[2])] {
            *count.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    let outer = full.boundary_tags();
    let tags = count
        .into_iter()
        .filter(|&(_, n)| n == 1)
        .map(|(e, _)| {
            (
                e,
                if outer.contains_key(&e) {
                    BoundaryMarker::Wall
                } else {
                    BoundaryMarker::Obstacle
                },
            )
        })
        .collect();
    Arc::new(Triangulation::new(full.vertices().to_vec(), keep, &tags).unwrap())
}

#[test]
fn vorticity_of_simple_fields() {
    let vs = VelocitySpace::new(square(4));
    let rot = vs.interpolate(|x| [-x[1], x[0]]);
    assert!(compute_vorticity(&vs, &rot)
        .iter()
        .all(|w| (w - 2.0).abs() < 1e-12));
    let uni = vs.interpolate(|_| [10.0, 0.0]);
    assert!(compute_vorticity(&vs, &uni).iter().all(|w| w.abs() < 1e-12));
}

#[test]
fn poiseuille_vorticity_converges_at_first_order() {
    let mut errs = Vec::new();
    for n in [4, 8, 16] {
        let vs = VelocitySpace::new(square(n));
        let v = vs.interpolate(|x| [1.0 - x[1] * x[1], 0.0]);
        let w = compute_vorticity(&vs, &v);
        let e = (0..w.len())
            .map(|k| (w[k] - 2.0 * vs.mesh().cell_centroid(k)[1]).abs())
            .fold(0.0, f64::max);
        errs.push(e);
    }
    assert!(
        errs[2] < 1e-12 || (errs[0] / errs[1] > 1.8 && errs[1] / errs[2] > 1.8),
        "{errs:?}"
    );
}

#[test]
fn vorticity_integral_equals_facetwise_circulation() {
    let vs = VelocitySpace::new(square(5));
    let mut seed = 7u64;
    let v: Vec<f64> = (0..vs.dim())
        .map(|_| {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
            (seed >> 33) as f64 / (1u64 << 31) as f64 - 0.5
        })
        .collect();
    let lhs = integrate_cellwise(vs.mesh(), &compute_vorticity(&vs, &v));
    let rhs = facetwise_circulation(&vs, &v);
    assert!((lhs - rhs).abs() < 1e-10, "{lhs} vs {rhs}");
}

#[test]
fn slices_sample_uniform_flow_and_skip_the_hole() {
    let mesh = square_with_hole(8);
    let vs = VelocitySpace::new(mesh.clone());
    let loc = PointLocator::new(&mesh);
    let v = vs.interpolate(|_| [10.0, 0.0]);
    let prof = extract_slice(&vs, &loc, &v, 0.1, (-1.0, 1.0), 40).unwrap();
    let mut absent = 0;
    for s in &prof.samples {
        match s.speed() {
            Some(sp) => {
                assert!((sp - 10.0).abs() < 1e-12);
                assert!(s.y.abs() >= 0.25 - 1e-12);
            }
            None => {
                assert!(s.y.abs() < 0.25 + 1e-12);
                absent += 1;
            }
        }
    }
    // y = -0.2, -0.15, ..., 0.2
    assert_eq!(absent, 9);
    assert!(extract_slice(&vs, &loc, &v, 3.0, (-1.0, 1.0), 10).is_err());
}

#[test]
fn slice_points_and_linearity() {
    let mesh = square(6);
    let vs = VelocitySpace::new(mesh.clone());
    let loc = PointLocator::new(&mesh);
    let a = vs.interpolate(|x| [x[1] * x[1], x[0] * x[1]]);
    let b = vs.interpolate(|x| [x[0].sin(), 1.0 - x[1]]);
    let coarse = extract_slice(&vs, &loc, &a, 0.3, (-1.0, 1.0), 100).unwrap();
    let fine = extract_slice(&vs, &loc, &a, 0.3, (-1.0, 1.0), 200).unwrap();
    for (i, s) in coarse.samples.iter().enumerate() {
        let t = fine.samples[2 * i];
        assert_eq!(s.y, t.y);
        assert!((s.speed().unwrap() - t.speed().unwrap()).abs() < 1e-12);
    }
    // the velocity itself is linear in the state
    let combo: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 2.0 * x - 0.5 * y).collect();
    for i in 0..30 {
        let p = [0.3, -0.9 + 0.06 * i as f64];
        let k = loc.locate(&mesh, p).unwrap();
        let (ua, ub, uc) = (vs.eval(&a, k, p), vs.eval(&b, k, p), vs.eval(&combo, k, p));
        for d in 0..2 {
            assert!((uc[d] - (2.0 * ua[d] - 0.5 * ub[d])).abs() < 1e-12);
        }
    }
}

fn solved_channel(eu: f64) -> (Assembler, Vec<f64>) {
    let m = generate_rectangle(
        6,
        4,
        (0.0, 2.0),
        (-1.0, 1.0),
        SplitKind::Diagonal,
        MarkerScheme::Channel,
    )
    .unwrap();
    let setup = ProblemSetup::new(ConstitutiveParams::new(1.0, 0.0, 1e-3, 0.0, 1.0))
        .with_condition(
            BoundaryMarker::Inflow,
            BoundaryCondition::Dirichlet(vector_field(|x| [1.0 - x[1] * x[1], 0.0])),
        )
        .with_condition(
            BoundaryMarker::Wall,
            BoundaryCondition::Dirichlet(vector_field(|_| [0.0; 2])),
        )
        .with_condition(
            BoundaryMarker::Outflow,
            BoundaryCondition::Traction { pressure: 0.0 },
        );
    let mut asm = Assembler::new(Arc::new(Discretization::new(Arc::new(m))), setup).unwrap();
    let mut st = asm.initial_state();
    newton_solve(&asm, &mut st, &NewtonConfig::default()).unwrap();
    asm.set_params(ConstitutiveParams::new(1.0, eu, 1e-3, 10.0, 1.0))
        .unwrap();
    newton_solve(&asm, &mut st, &NewtonConfig::default()).unwrap();
    (asm, st.x)
}

#[test]
fn lifted_scatter_lies_on_the_constitutive_curve() {
    for eu in [0.0, 15.0] {
        let (asm, x) = solved_channel(eu);
        let pts = constitutive_scatter(&asm, &x);
        assert!(scatter_identity_defect(&pts, &asm.setup.params) < 1e-9);
        if eu == 0.0 {
            assert!(pts.iter().all(|q| (q.d_lifted - q.s_norm).abs() < 1e-9));
        } else {
            // far from the origin the curve approaches |D| = alpha |S| + Eu
            for q in pts.iter().filter(|q| q.s_norm > 0.1) {
                assert!(
                    (q.d_lifted - q.s_norm - 15.0).abs() < 15.0 * 1e-4 / q.s_norm.powi(2) + 1e-9
                );
            }
        }
    }
}

#[test]
fn exports_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let m = generate_rectangle(
        1,
        1,
        (0.0, 2.0),
        (-1.0, 1.0),
        SplitKind::Diagonal,
        MarkerScheme::Channel,
    )
    .unwrap();
    let setup = ProblemSetup::new(ConstitutiveParams::new(1.0, 0.0, 1e-3, 0.0, 1.0))
        .with_condition(
            BoundaryMarker::Inflow,
            BoundaryCondition::Dirichlet(vector_field(|_| [1.0, 0.0])),
        )
        .with_condition(
            BoundaryMarker::Wall,
            BoundaryCondition::Dirichlet(vector_field(|_| [1.0, 0.0])),
        )
        .with_condition(
            BoundaryMarker::Outflow,
            BoundaryCondition::Traction { pressure: 0.0 },
        );
    let asm = Assembler::new(Arc::new(Discretization::new(Arc::new(m))), setup).unwrap();
    let mut st = asm.initial_state();
    newton_solve(&asm, &mut st, &NewtonConfig::default()).unwrap();
    let snap = FieldSnapshot::new(&asm, &st.x).unwrap();
    let vtk = dir.path().join("two.vtk");
    write_vtk(&snap, "two cells", &vtk).unwrap();
    let text = std::fs::read_to_string(&vtk).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "# vtk DataFile Version 2.0");
    assert_eq!(lines[3], "DATASET UNSTRUCTURED_GRID");
    assert!(lines.contains(&"POINTS 4 double"));
    assert!(lines.contains(&"CELLS 2 8"));
    assert!(lines.contains(&"CELL_DATA 2"));
    let scalars = lines.iter().filter(|l| l.starts_with("SCALARS")).count();
    assert_eq!(scalars, 6);
    // each data block has exactly one line per cell
    let vel = lines.iter().position(|l| l.starts_with("VECTORS")).unwrap();
    assert!(lines[vel + 3].starts_with("SCALARS"));

    let pts = constitutive_scatter(&asm, &st.x);
    let csv = dir.path().join("scatter.csv");
    write_scatter_csv(&pts, &csv).unwrap();
    let back = read_scatter_csv(&csv).unwrap();
    assert_eq!(back.len(), pts.len());
    for (a, b) in pts.iter().zip(&back) {
        assert_eq!(a.s_norm.to_bits(), b.s_norm.to_bits());
        assert_eq!(a.d_lifted.to_bits(), b.d_lifted.to_bits());
        assert_eq!(a.d_raw.to_bits(), b.d_raw.to_bits());
    }
    assert!(!dir.path().join("scatter.csv.tmp").exists());
}
