//! Sweep drivers shared by the CLI and the acceptance tests.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::analysis::{error_norm, transfer_difference, ConvergenceReport, ConvergenceRow, ErrorRecord, GateKind, Norm, SweepVariable, ERROR_COLUMNS};
use crate::basis::ElementKind;
use crate::dofspace::{build_layout, FieldId};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::fsi_cn::{run_case, ErrorSchedule, Problem, RunResult};
use crate::manufactured::Case;
use crate::mesh::{build_mesh_with_spacing, build_structured_mesh, Mesh};
use crate::ritz::{ritz_errors, RitzSolver, RITZ_COLUMNS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementPair {
    /// P1-bubble velocity and structure, P1 pressure.
    Mini,
    /// Taylor–Hood.
    P2p1,
    /// Scalar P1 for the heat–wave case.
    P1,
    /// Scalar P2 for the heat–wave case.
    P2,
}

impl ElementPair {
    pub fn name(self) -> &'static str {
        match self {
            ElementPair::Mini => "MINI",
            ElementPair::P2p1 => "P2P1",
            ElementPair::P1 => "P1",
            ElementPair::P2 => "P2",
        }
    }

    /// Polynomial degree `k` of the velocity approximation.
    pub fn degree(self) -> usize {
        match self {
            ElementPair::Mini | ElementPair::P1 => 1,
            ElementPair::P2p1 | ElementPair::P2 => 2,
        }
    }

    pub fn is_scalar(self) -> bool {
        matches!(self, ElementPair::P1 | ElementPair::P2)
    }

    fn kinds(self) -> (ElementKind, Option<ElementKind>, usize) {
        match self {
            ElementPair::Mini => (ElementKind::P1B, Some(ElementKind::P1), 2),
            ElementPair::P2p1 => (ElementKind::P2, Some(ElementKind::P1), 2),
            ElementPair::P1 => (ElementKind::P1, None, 1),
            ElementPair::P2 => (ElementKind::P2, None, 1),
        }
    }
}

/// Meshes the case geometry at spacing `h` and assembles the time-independent operators.
pub fn build_problem(case: &Case, pair: ElementPair, h: f64, exec: Exec) -> Result<Problem> {
    check_pair(case, pair)?;
    problem_on(case, pair, build_mesh_with_spacing(&case.geometry, h)?, exec)
}

/// As [`build_problem`] on an `nx` by `ny_per_strip` structured mesh.
pub fn build_problem_structured(case: &Case, pair: ElementPair, nx: usize, ny_per_strip: &[usize], exec: Exec) -> Result<Problem> {
    check_pair(case, pair)?;
    problem_on(case, pair, build_structured_mesh(&case.geometry, nx, ny_per_strip)?, exec)
}

fn check_pair(case: &Case, pair: ElementPair) -> Result<()> {
    if pair.is_scalar() != case.id.is_scalar() {
        return Err(Error::Elements(format!("element {} does not fit case {}", pair.name(), case.id.name())));
    }
    Ok(())
}

fn problem_on(case: &Case, pair: ElementPair, mesh: Mesh, exec: Exec) -> Result<Problem> {
    let (v, p, comps) = pair.kinds();
    let layout = Arc::new(build_layout(Arc::new(mesh), v, p, v, comps)?);
    Problem::new(case.clone(), layout, exec)
}

/// Gate tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Band half-width for L2 rates.
    pub rate: f64,
    /// Allowed shortfall for the lower-bounded eta H1 rate.
    pub h1_shortfall: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rate: 0.25, h1_shortfall: 0.25 }
    }
}

fn need_two(list: &[f64]) -> Result<()> {
    if list.len() < 2 {
        return Err(Error::TooFewEntries(list.len()));
    }
    Ok(())
}

/// Final-time errors against the exact solution over a list of mesh sizes.
///
/// Gates: `u` and `eta` L2 at `k+1`, `eta` H1 at least `k`.
pub fn space_sweep(case: &Case, pair: ElementPair, hs: &[f64], t_final: f64, tau: f64, tol: Tolerances, exec: Exec) -> Result<ConvergenceReport> {
    need_two(hs)?;
    let runs = exec.map(hs, |&h| -> Result<ConvergenceRow> {
        let problem = build_problem(case, pair, h, exec)?;
        let run = run_case(&problem, t_final, tau, ErrorSchedule::FinalOnly)?;
        let errors = run.final_errors().ok_or_else(|| Error::Parameter(format!("case {} has no exact solution", case.id.name())))?;
        log::info!("space sweep {} {} h={h}: {errors:?}", case.id.name(), pair.name());
        Ok(ConvergenceRow { h, tau: run.tau, errors })
    });
    let rows = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let mut report = ConvergenceReport::new(case.id.name(), pair.name(), SweepVariable::H, rows, &ERROR_COLUMNS)?;
    let k = pair.degree() as f64;
    report.gate("err_u_L2", k + 1.0, tol.rate, GateKind::Band)?;
    report.gate("err_eta_L2", k + 1.0, tol.rate, GateKind::Band)?;
    report.gate("err_eta_H1", k, tol.h1_shortfall, GateKind::AtLeast)?;
    Ok(report)
}

/// What a temporal sweep measures its errors against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TimeErrorMode {
    /// The exact solution; includes the spatial error of the fixed mesh.
    #[default]
    Exact,
    /// A run on the same mesh with step `min(tau) / REFERENCE_REFINEMENT`,
    /// which removes the spatial error and isolates the time discretization.
    Reference,
}

pub const REFERENCE_REFINEMENT: f64 = 8.0;

/// L2 and H1 norms of `a - b`, field by field.
fn state_difference(problem: &Problem, a: &RunResult, b: &RunResult) -> Result<ErrorRecord> {
    let exec = problem.exec;
    let diff = |f: FieldId| {
        let mut fa = a.final_state.field(problem, f);
        let fb = b.final_state.field(problem, f);
        fa.coeffs.iter_mut().zip(&fb.coeffs).for_each(|(x, y)| *x -= y);
        fa
    };
    let zero = |_: [f64; 2], _: usize| ([0.0; 2], [[0.0; 2]; 2]);
    let (u, eta, w) = (diff(FieldId::U), diff(FieldId::Eta), diff(FieldId::W));
    Ok(ErrorRecord {
        u_l2: error_norm(&u, zero, Norm::L2, exec)?,
        u_h1: error_norm(&u, zero, Norm::H1, exec)?,
        eta_l2: error_norm(&eta, zero, Norm::L2, exec)?,
        eta_h1: error_norm(&eta, zero, Norm::H1, exec)?,
        w_l2: error_norm(&w, zero, Norm::L2, exec)?,
    })
}

/// Final-time errors over a list of time steps on one mesh.
///
/// Gates: `u` and `eta` L2 at rate 2.
pub fn time_sweep(case: &Case, pair: ElementPair, h: f64, taus: &[f64], t_final: f64, mode: TimeErrorMode, tol: Tolerances, exec: Exec) -> Result<ConvergenceReport> {
    need_two(taus)?;
    let problem = build_problem(case, pair, h, exec)?;
    let reference = match mode {
        TimeErrorMode::Exact => None,
        TimeErrorMode::Reference => {
            let tau_min = taus.iter().copied().fold(f64::INFINITY, f64::min);
            Some(run_case(&problem, t_final, tau_min / REFERENCE_REFINEMENT, ErrorSchedule::FinalOnly)?)
        }
    };
    let runs = exec.map(taus, |&tau| -> Result<ConvergenceRow> {
        let run = run_case(&problem, t_final, tau, ErrorSchedule::FinalOnly)?;
        let errors = match &reference {
            None => run.final_errors().ok_or_else(|| Error::Parameter(format!("case {} has no exact solution", case.id.name())))?,
            Some(r) => state_difference(&problem, &run, r)?,
        };
        log::info!("time sweep {} {} tau={}: {errors:?}", case.id.name(), pair.name(), run.tau);
        Ok(ConvergenceRow { h, tau: run.tau, errors })
    });
    let rows = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let mut report = ConvergenceReport::new(case.id.name(), pair.name(), SweepVariable::Tau, rows, &ERROR_COLUMNS)?;
    report.gate("err_u_L2", 2.0, tol.rate, GateKind::Band)?;
    report.gate("err_eta_L2", 2.0, tol.rate, GateKind::Band)?;
    Ok(report)
}

/// Ratio of the Runge–Kutta step to the mesh size.
pub const RITZ_STEP_RATIO: f64 = 0.25;

/// Sup-in-time projection errors over a list of mesh sizes.
///
/// Gates: L2 at `k+1` and H1 at `k` for both fields.
pub fn ritz_sweep(case: &Case, pair: ElementPair, hs: &[f64], t_final: f64, tol: Tolerances, exec: Exec) -> Result<ConvergenceReport> {
    need_two(hs)?;
    let runs = exec.map(hs, |&h| -> Result<ConvergenceRow> {
        let problem = build_problem(case, pair, h, exec)?;
        let solver = RitzSolver::new(&problem)?;
        let series = solver.evolve(t_final, RITZ_STEP_RATIO * h)?;
        let errors = ritz_errors(&problem, &series)?;
        log::info!("ritz sweep {} {} h={h}: {errors:?}", case.id.name(), pair.name());
        Ok(ConvergenceRow { h, tau: series.tau, errors })
    });
    let rows = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let mut report = ConvergenceReport::new(case.id.name(), pair.name(), SweepVariable::H, rows, &RITZ_COLUMNS)?;
    let k = pair.degree() as f64;
    for (col, rate) in [("err_u_L2", k + 1.0), ("err_u_H1", k), ("err_eta_L2", k + 1.0), ("err_eta_H1", k)] {
        report.gate(col, rate, tol.rate, GateKind::Band)?;
    }
    Ok(report)
}

pub const SELF_COLUMNS: [&str; 3] = ["err_u_L2", "err_eta_L2", "err_w_L2"];

/// Differences of coarse runs against a run on the reference spacing
/// `h_ref`, measured on the reference mesh. H1 columns are not computed (NaN).
///
/// Gates: `u` and `eta` L2 at rate 2 with the given tolerance.
pub fn self_convergence(case: &Case, pair: ElementPair, hs: &[f64], h_ref: f64, t_final: f64, tau: f64, rate_tol: f64, exec: Exec) -> Result<ConvergenceReport> {
    need_two(hs)?;
    if hs.iter().any(|&h| h <= h_ref) {
        return Err(Error::Parameter(format!("reference spacing {h_ref} must be finer than every sweep entry")));
    }
    let fine = build_problem(case, pair, h_ref, exec)?;
    let reference = run_case(&fine, t_final, tau, ErrorSchedule::FinalOnly)?;
    let runs = exec.map(hs, |&h| -> Result<ConvergenceRow> {
        let problem = build_problem(case, pair, h, exec)?;
        let run = run_case(&problem, t_final, tau, ErrorSchedule::FinalOnly)?;
        let d = |f| transfer_difference(&run.final_state.field(&problem, f), &reference.final_state.field(&fine, f), exec);
        let errors = ErrorRecord { u_l2: d(FieldId::U)?, u_h1: f64::NAN, eta_l2: d(FieldId::Eta)?, eta_h1: f64::NAN, w_l2: d(FieldId::W)? };
        log::info!("self convergence {} {} h={h}: {errors:?}", case.id.name(), pair.name());
        Ok(ConvergenceRow { h, tau: run.tau, errors })
    });
    let rows = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let mut report = ConvergenceReport::new(case.id.name(), pair.name(), SweepVariable::H, rows, &SELF_COLUMNS)?;
    report.gate("err_u_L2", 2.0, rate_tol, GateKind::Band)?;
    report.gate("err_eta_L2", 2.0, rate_tol, GateKind::Band)?;
    Ok(report)
}
