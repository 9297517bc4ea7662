use fsi_fem::analysis::{error_norm, Norm};
use fsi_fem::dofspace::{interpolate, FEField, FieldId};
use fsi_fem::experiments::{build_problem, ritz_sweep, ElementPair, Tolerances};
use fsi_fem::manufactured::*;
use fsi_fem::ritz::{ritz_errors, write_ritz_csv, RitzSolver};
use fsi_fem::Exec;

const EXEC: Exec = Exec::Parallel;

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn compatible_data_gives_interpolants() {
    let case = compatible_case(Compatible::default());
    let ex = case.exact.clone().unwrap();
    for pair in [ElementPair::Mini, ElementPair::P2p1] {
        let p = build_problem(&case, pair, 0.25, EXEC).unwrap();
        let solver = RitzSolver::new(&p).unwrap();
        let t = 0.4;
        let f = solver.stationary_solve(&solver.exact_trace(t).unwrap(), t).unwrap();
        let iu = interpolate(&p.layout, FieldId::U, t, |t, x, _| ex.u(t, x)).coeffs;
        let ie = interpolate(&p.layout, FieldId::Eta, t, |t, x, s| ex.eta(t, x, s)).coeffs;
        assert!(max_abs_diff(&f.u, &iu) <= 1e-10);
        assert!(max_abs_diff(&f.eta, &ie) <= 1e-10);
        assert!(f.p.iter().all(|v| v.abs() <= 1e-10));
    }
}

#[test]
fn compatible_trace_tracks_exact_over_unit_interval() {
    let case = compatible_case(Compatible::default());
    let p = build_problem(&case, ElementPair::Mini, 0.25, EXEC).unwrap();
    let solver = RitzSolver::new(&p).unwrap();
    let series = solver.evolve(1.0, 0.05).unwrap();
    assert_eq!(series.outputs.len(), 33);
    assert!(max_abs_diff(&series.final_trace, &solver.exact_trace(1.0).unwrap()) <= 1e-9);
    assert!(ritz_errors(&p, &series).unwrap().max() <= 1e-9);
}

#[test]
fn zero_data_zero_trace_gives_zero() {
    let case = Case { exact: None, ..channel_periodic_case(0.01, 1.0).unwrap() };
    let p = build_problem(&case, ElementPair::Mini, 0.25, EXEC).unwrap();
    let solver = RitzSolver::new(&p).unwrap();
    let f = solver.stationary_solve(&vec![0.0; solver.trace_len()], 0.3).unwrap();
    assert!(f.u.iter().chain(&f.eta).chain(&f.p).all(|&v| v == 0.0));
}

#[test]
fn trace_to_velocity_map_is_linear() {
    let case = Case { exact: None, ..channel_periodic_case(0.01, 1.0).unwrap() };
    let p = build_problem(&case, ElementPair::Mini, 0.25, EXEC).unwrap();
    let solver = RitzSolver::new(&p).unwrap();
    let n = solver.trace_len();
    let x1: Vec<f64> = (0..n).map(|i| ((i * 7) % 11) as f64 / 11.0 - 0.5).collect();
    let x2: Vec<f64> = (0..n).map(|i| ((i * 3) % 5) as f64 / 5.0).collect();
    let (a, b) = (0.7, -1.3);
    let combo: Vec<f64> = x1.iter().zip(&x2).map(|(u, v)| a * u + b * v).collect();
    let r = |x: &[f64]| solver.stationary_solve(x, 0.1).unwrap();
    let (r1, r2, rc) = (r(&x1), r(&x2), r(&combo));
    let expected: Vec<f64> = r1.u.iter().zip(&r2.u).map(|(u, v)| a * u + b * v).collect();
    assert!(max_abs_diff(&rc.u, &expected) <= 1e-10);
}

#[test]
fn solid_rows_satisfy_galerkin_orthogonality() {
    let case = channel_periodic_case(0.01, 1.0).unwrap();
    let p = build_problem(&case, ElementPair::Mini, 0.125, EXEC).unwrap();
    let solver = RitzSolver::new(&p).unwrap();
    let t = 0.2;
    let f = solver.stationary_solve(&solver.exact_trace(t).unwrap(), t).unwrap();
    assert!(solver.solid_residual(&f, t).unwrap() <= 1e-10);
}

#[test]
fn halving_the_integration_step_changes_little() {
    let case = channel_periodic_case(0.01, 1.0).unwrap();
    let p = build_problem(&case, ElementPair::Mini, 0.125, EXEC).unwrap();
    let solver = RitzSolver::new(&p).unwrap();
    let a = solver.evolve(0.25, 0.25 / 32.0).unwrap();
    let b = solver.evolve(0.25, 0.25 / 64.0).unwrap();
    assert_eq!(b.steps, 2 * a.steps);
    assert!(max_abs_diff(&a.final_trace, &b.final_trace) <= 1e-8);
}

#[test]
fn initial_velocity_h1_error_rate() {
    let case = channel_periodic_case(0.01, 1.0).unwrap();
    let ex = case.exact.clone().unwrap();
    let err = |h: f64| {
        let p = build_problem(&case, ElementPair::Mini, h, EXEC).unwrap();
        let solver = RitzSolver::new(&p).unwrap();
        let f = solver.stationary_solve(&solver.exact_trace(0.0).unwrap(), 0.0).unwrap();
        let u = FEField::from_coeffs(p.layout.clone(), FieldId::U, f.u).unwrap();
        let e = ex.clone();
        error_norm(&u, move |x, _| (e.u(0.0, x), e.grad_u(0.0, x)), Norm::H1, EXEC).unwrap()
    };
    let rate = (err(0.125) / err(0.0625)).log2();
    assert!((rate - 1.0).abs() <= 0.25, "{rate}");
}

#[test]
fn heat_wave_projection_converges() {
    let r = ritz_sweep(&heat_wave_case(), ElementPair::P1, &[0.1, 0.05], 0.25, Tolerances::default(), EXEC).unwrap();
    assert!(r.pass, "{}", r.summary());
}

#[test]
fn ritz_csv_schema() {
    let case = channel_periodic_case(0.01, 1.0).unwrap();
    let r = ritz_sweep(&case, ElementPair::Mini, &[0.25, 0.125], 0.25, Tolerances::default(), EXEC).unwrap();
    let mut buf = vec![];
    write_ritz_csv(&r, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "h,sup_err_u_L2,sup_err_u_H1,sup_err_eta_L2,sup_err_eta_H1");
    assert_eq!(lines.count(), 2);
}

#[test]
fn single_mesh_sweep_is_rejected() {
    let case = channel_periodic_case(0.01, 1.0).unwrap();
    assert!(ritz_sweep(&case, ElementPair::Mini, &[0.25], 0.25, Tolerances::default(), EXEC).is_err());
}

#[test]
fn nonpositive_integration_step_is_rejected() {
    let case = channel_periodic_case(0.01, 1.0).unwrap();
    let p = build_problem(&case, ElementPair::Mini, 0.25, EXEC).unwrap();
    let solver = RitzSolver::new(&p).unwrap();
    assert!(solver.evolve(0.25, 0.0).is_err());
    assert!(solver.stationary_solve(&[1.0], 0.0).is_err());
}
