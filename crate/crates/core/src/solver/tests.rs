use std::sync::Arc;

use super::*;
use crate::assembly::{vector_field, BoundaryCondition, Discretization, ProblemSetup};
use crate::mesh::{generate_rectangle, BoundaryMarker, MarkerScheme, SplitKind};

fn channel(nx: usize, ny: usize, params: ConstitutiveParams, gamma: f64) -> Assembler {
    let m = generate_rectangle(
        nx,
        ny,
        (0.0, 2.0),
        (-1.0, 1.0),
        SplitKind::Diagonal,
        MarkerScheme::Channel,
    )
    .unwrap();
    let mut setup = ProblemSetup::new(params)
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
    setup.gamma = gamma;
    Assembler::new(Arc::new(Discretization::new(Arc::new(m))), setup).unwrap()
}

fn stokes() -> ConstitutiveParams {
    ConstitutiveParams::new(1.0, 0.0, 1e-3, 0.0, 1.0)
}

fn krylov(schur: SchurApprox) -> LinearSolver {
    LinearSolver::Krylov {
        config: KrylovConfig::default(),
        schur,
    }
}

#[test]
fn stokes_limit_takes_one_newton_step() {
    for linear in [LinearSolver::Direct, krylov(SchurApprox::ScaledMass)] {
        let asm = channel(4, 4, stokes(), 1e4);
        let mut st = asm.initial_state();
        let cfg = NewtonConfig {
            linear,
            ..NewtonConfig::default()
        };
        let rep = newton_solve(&asm, &mut st, &cfg).unwrap();
        assert_eq!(rep.iterations, 1, "{linear:?}");
        assert_eq!(rep.steps, vec![1.0]);
        // a state within the absolute tolerance is returned untouched
        let loose = NewtonConfig {
            abs_tol: 1e-6,
            ..cfg.clone()
        };
        assert!(rep.final_residual() < loose.abs_tol, "{rep:?}");
        let before = st.x.clone();
        let again = newton_solve(&asm, &mut st, &loose).unwrap();
        assert_eq!(again.iterations, 0);
        assert_eq!(before, st.x);
    }
}

#[test]
fn exact_block_factors_invert_the_saddle_point_matrix() {
    let asm = channel(1, 1, ConstitutiveParams::new(1.0, 2.0, 0.1, 10.0, 1.0), 1e4);
    assert_eq!(asm.disc.mesh.num_cells(), 2);
    let mut st = asm.initial_state();
    st.x.iter_mut()
        .enumerate()
        .for_each(|(i, v)| *v += 0.1 * (i as f64).cos());
    asm.impose_dirichlet(&mut st.x);
    let sys = asm.jacobian(&st.x).unwrap();
    let mut lu = SparseLu::new();
    ALPreconditioner::factor_top(&asm, &sys, &mut lu).unwrap();
    let pre = ALPreconditioner::new(
        &asm,
        &sys,
        SchurApprox::ExactDense,
        TopBlockSolve::Direct,
        &lu,
    )
    .unwrap();
    let n = sys.matrix.nrows();
    let mut col = vec![0.0; n];
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        sys.matrix.mul_vec(&e, &mut col);
        let back = pre.apply(&col).unwrap();
        for (i, v) in back.iter().enumerate() {
            let expect = if i == j { 1.0 } else { 0.0 };
            assert!((v - expect).abs() < 1e-10, "({i}, {j}): {v}");
        }
        e[j] = 0.0;
    }
    let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
    let out = fgmres(
        |x, y| sys.matrix.mul_vec(x, y),
        |v| pre.apply(v),
        &b,
        10,
        1e-10,
        0.0,
        10,
    )
    .unwrap();
    assert_eq!(out.iterations, 1);
}

#[test]
fn scaled_mass_schur_needs_positive_gamma() {
    let asm = channel(2, 2, stokes(), 0.0);
    let sys = asm.jacobian(&asm.initial_state().x).unwrap();
    let mut lu = SparseLu::new();
    ALPreconditioner::factor_top(&asm, &sys, &mut lu).unwrap();
    let err = ALPreconditioner::new(
        &asm,
        &sys,
        SchurApprox::ScaledMass,
        TopBlockSolve::Direct,
        &lu,
    )
    .err()
    .unwrap();
    assert!(matches!(err, Error::DegenerateSchur));
    // auto mode falls back to the direct solver
    let mut st = asm.initial_state();
    let rep = newton_solve(&asm, &mut st, &NewtonConfig::default()).unwrap();
    assert_eq!(rep.iterations, 1);
}

#[test]
fn lagged_inner_solve_matches_direct_solve() {
    let params = ConstitutiveParams::new(1.0, 2.0, 0.05, 20.0, 1.0);
    let solve = |top_solve| {
        let asm = channel(4, 3, params, 1e4);
        let mut st = asm.initial_state();
        let cfg = NewtonConfig {
            linear: LinearSolver::Krylov {
                config: KrylovConfig {
                    top_solve,
                    ..KrylovConfig::default()
                },
                schur: SchurApprox::ScaledMass,
            },
            ..NewtonConfig::default()
        };
        newton_solve(&asm, &mut st, &cfg).unwrap();
        st.x
    };
    let a = solve(TopBlockSolve::Direct);
    let b = solve(TopBlockSolve::Inner {
        tol: 1e-10,
        max_iterations: 60,
    });
    let d = a
        .iter()
        .zip(&b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    assert!(d < 1e-7, "{d:e}");
}

#[test]
fn nonlinear_solve_converges_superlinearly() {
    let mut asm = channel(6, 4, stokes(), 1e4);
    let mut st = asm.initial_state();
    newton_solve(&asm, &mut st, &NewtonConfig::default()).unwrap();
    asm.set_params(ConstitutiveParams::new(1.0, 15.0, 1e-3, 20.0, 1.0))
        .unwrap();
    let rep = newton_solve(&asm, &mut st, &NewtonConfig::default()).unwrap();
    assert!(rep.iterations >= 2 && rep.iterations < 20, "{rep:?}");
    let r = &rep.residuals;
    let n = r.len();
    assert!(r[n - 1] / r[n - 2] < 0.1, "{r:?}");
    // every equation block is individually converged
    let full = asm.residual(&st.x).unwrap();
    let l = asm.layout();
    for range in [l.stress_range(), l.velocity_range(), l.pressure_range()] {
        let nb = full[range].iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(nb <= 1e-8 * rep.residuals[0].max(1e-1));
    }
    assert_eq!(rep.csv_lines().len(), rep.iterations + 2);
}

#[test]
fn continuation_with_single_stage_is_plain_newton() {
    let params = ConstitutiveParams::new(1.0, 2.0, 0.05, 20.0, 1.0);
    let asm = channel(4, 3, params, 1e4);
    let mut plain = asm.initial_state();
    let r1 = newton_solve(&asm, &mut plain, &NewtonConfig::default()).unwrap();
    let mut asm2 = channel(4, 3, params, 1e4);
    let mut cont = asm2.initial_state();
    let cfg = NewtonConfig {
        schedule: vec![ContinuationStage::of(&params)],
        ..NewtonConfig::default()
    };
    let rep = continuation_drive(&mut asm2, &mut cont, &cfg).unwrap();
    assert_eq!(rep.stages.len(), 1);
    assert_eq!(rep.last().unwrap(), &r1);
    assert_eq!(plain.x, cont.x);
}

#[test]
fn continuation_validates_schedule() {
    let params = ConstitutiveParams::new(1.0, 2.0, 0.01, 0.0, 1.0);
    let mut asm = channel(2, 2, params, 1e4);
    let mut st = asm.initial_state();
    let wrong_end = NewtonConfig {
        schedule: vec![ContinuationStage {
            eps: 0.1,
            eu: 2.0,
            re: 0.0,
        }],
        ..NewtonConfig::default()
    };
    assert!(matches!(
        continuation_drive(&mut asm, &mut st, &wrong_end),
        Err(Error::InvalidParameter(_))
    ));
    let zigzag = NewtonConfig {
        schedule: [0.1, 0.05, 0.2, 0.01]
            .iter()
            .map(|&eps| ContinuationStage {
                eps,
                eu: 2.0,
                re: 0.0,
            })
            .collect(),
        ..NewtonConfig::default()
    };
    assert!(matches!(
        continuation_drive(&mut asm, &mut st, &zigzag),
        Err(Error::InvalidParameter(_))
    ));
    let good = NewtonConfig {
        schedule: [0.1, 0.03, 0.01]
            .iter()
            .map(|&eps| ContinuationStage {
                eps,
                eu: 2.0,
                re: 0.0,
            })
            .collect(),
        ..NewtonConfig::default()
    };
    let rep = continuation_drive(&mut asm, &mut st, &good).unwrap();
    assert_eq!(rep.stages.len(), 3);
    assert_eq!(asm.setup.params, params);
}

#[test]
fn iteration_cap_is_reported_with_last_iterate() {
    let asm = channel(
        4,
        3,
        ConstitutiveParams::new(1.0, 5.0, 0.01, 20.0, 1.0),
        1e4,
    );
    let mut st = asm.initial_state();
    let cfg = NewtonConfig {
        max_iterations: 1,
        ..NewtonConfig::default()
    };
    let err = newton_solve(&asm, &mut st, &cfg).unwrap_err();
    assert!(matches!(
        err,
        Error::NewtonMaxIterations { iterations: 1, .. }
    ));
    assert!(st.x.iter().any(|&v| v != 0.0));
}
