//! Monolithic Crank–Nicolson stepping of the coupled problem.
//!
//! Unknowns per step are `(w^{n+1}, u^{n+1}, p^{n+1/2})`; the displacement is
//! eliminated through `eta^{n+1} = eta^n + tau/2 (w^{n+1} + w^n)`. With
//! `K_s = (grad, grad)` on the solid, `K_f = (D, D)` (or `(grad, grad)` for the
//! heat variant) and `B = (div, q)` the system reads
//!
//! ```text
//! [ M_s/tau + tau/4 K_s                        ] [w]
//! [                   M_f/tau + K_f/2    -B^T  ] [u]
//! [                        -B             0    ] [p]
//! ```
//!
//! with solid rows on the interface merged into fluid rows by aliasing. The
//! continuity rows hold `(div u^{n+1/2}, q) = (g, q)` multiplied by -2 so the
//! matrix is symmetric.

use std::io::Write;
use std::sync::Arc;

use crate::analysis::{field_errors, ErrorRecord};
use crate::dofspace::{interpolate, DofLayout, FEField, FieldId};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::forms::{
    assemble_bilinear, assemble_functional, assemble_linear, gather, scatter_matrix, scatter_vector, BilinearKind, FormSpec,
    LoadKind, LoadSpec,
};
use crate::linalg::{factorize, Factorization, SparseMatrix};
use crate::manufactured::Case;
use crate::mesh::{BoundaryCondition, Side};

/// A case discretized on a layout, with its time-independent blocks.
#[derive(Debug)]
pub struct Problem {
    pub case: Case,
    pub layout: Arc<DofLayout>,
    pub exec: Exec,
    pub m_s: SparseMatrix,
    pub k_s: SparseMatrix,
    pub m_f: SparseMatrix,
    pub k_f: SparseMatrix,
    pub b: Option<SparseMatrix>,
}

impl Problem {
    pub fn new(case: Case, layout: Arc<DofLayout>, exec: Exec) -> Result<Self> {
        if case.geometry != layout.mesh.spec {
            return Err(Error::Parameter("layout mesh was built for a different geometry".into()));
        }
        let scalar = case.id.is_scalar();
        if scalar != (layout.components == 1) || scalar == layout.pressure.is_some() {
            return Err(Error::Elements(format!("element layout does not fit case {}", case.id.name())));
        }
        let bil = |kind, f| assemble_bilinear(&FormSpec::new(kind, f, f), &layout, exec);
        let m_s = bil(BilinearKind::Mass, FieldId::W)?;
        let k_s = bil(BilinearKind::GradGrad, FieldId::Eta)?;
        let m_f = bil(BilinearKind::Mass, FieldId::U)?;
        let k_f = bil(if scalar { BilinearKind::GradGrad } else { BilinearKind::SymGradSymGrad }, FieldId::U)?;
        let b = if scalar {
            None
        } else {
            Some(assemble_bilinear(&FormSpec::new(BilinearKind::DivPressure, FieldId::U, FieldId::P), &layout, exec)?)
        };
        Ok(Self { case, layout, exec, m_s, k_s, m_f, k_f, b })
    }

    pub fn is_scalar(&self) -> bool {
        self.case.id.is_scalar()
    }

    fn neumann_sides(&self) -> Vec<Side> {
        Side::ALL.into_iter().filter(|&s| self.layout.mesh.spec.boundary.get(s) == BoundaryCondition::NeumannTraction).collect()
    }

    /// Load vectors at time `t` in coefficient numbering.
    pub fn loads(&self, t: f64) -> Result<Loads> {
        let l = &self.layout;
        let src = &self.case.sources;
        let ex = self.exec;
        let solid_f = src.solid.clone();
        let mut solid = assemble_linear(&LoadSpec { kind: LoadKind::Volume, test: FieldId::W }, l, t, move |t, x, s| solid_f(t, x, s), ex)?;
        let fluid_f = src.fluid.clone();
        let mut fluid = assemble_linear(&LoadSpec { kind: LoadKind::Volume, test: FieldId::U }, l, t, move |t, x, _| fluid_f(t, x), ex)?;
        for side in self.neumann_sides() {
            for (test, out) in [(FieldId::W, &mut solid), (FieldId::U, &mut fluid)] {
                let g = src.traction.clone();
                let v = assemble_linear(&LoadSpec { kind: LoadKind::Boundary(side), test }, l, t, move |t, x, s| g(side, t, x, s), ex)?;
                add(out, &v);
            }
        }
        for tag in 0..l.mesh.spec.interface_tags.len() {
            let j = src.interface.clone();
            let v = assemble_linear(&LoadSpec { kind: LoadKind::Interface(tag), test: FieldId::U }, l, t, move |t, x, k| j(t, x, k), ex)?;
            add(&mut fluid, &v);
        }
        let mass = match (&self.b, &src.mass) {
            (Some(_), Some(g)) => {
                let g = g.clone();
                Some(assemble_linear(&LoadSpec { kind: LoadKind::MassSource, test: FieldId::P }, l, t, move |t, x, _| [g(t, x), 0.0], ex)?)
            }
            _ => None,
        };
        Ok(Loads { solid, fluid, mass })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Loads {
    pub solid: Vec<f64>,
    pub fluid: Vec<f64>,
    /// Continuity right-hand side, present for mixed fluids with a mass source.
    pub mass: Option<Vec<f64>>,
}

fn add(a: &mut [f64], b: &[f64]) {
    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
}

/// Solver state after `step` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct StepperState {
    pub step: usize,
    pub t: f64,
    pub eta: Vec<f64>,
    pub w: Vec<f64>,
    pub u: Vec<f64>,
    /// Pressure of the last half step (zeros initially).
    pub p: Vec<f64>,
    pub energy: f64,
    /// Relative residual of the last solve.
    pub residual: f64,
}

impl StepperState {
    pub fn field(&self, problem: &Problem, field: FieldId) -> FEField {
        let coeffs = match field {
            FieldId::Eta => &self.eta,
            FieldId::W => &self.w,
            FieldId::U => &self.u,
            FieldId::P => &self.p,
        };
        FEField { layout: problem.layout.clone(), field, coeffs: coeffs.clone() }
    }
}

/// `E = 1/2 (w^T M_s w + eta^T K_s eta + u^T M_f u)`.
pub fn energy(problem: &Problem, eta: &[f64], w: &[f64], u: &[f64]) -> f64 {
    0.5 * (problem.m_s.quadratic_form(w) + problem.k_s.quadratic_form(eta) + problem.m_f.quadratic_form(u))
}

/// Initial data: `u = I_h u(0)`, `w = I_h d_t eta(0)` with interface values
/// taken from `u`, and `eta` the Ritz projection of `eta(0)` with its
/// interface trace fixed to `I_h eta(0)`. Zero without an exact solution.
pub fn init_state(problem: &Problem) -> Result<StepperState> {
    let l = &problem.layout;
    let zero = |f| vec![0.0; l.field_len(f)];
    let Some(ex) = problem.case.exact.clone() else {
        let p = if problem.b.is_some() { zero(FieldId::P) } else { vec![] };
        return Ok(StepperState { step: 0, t: 0.0, eta: zero(FieldId::Eta), w: zero(FieldId::W), u: zero(FieldId::U), p, energy: 0.0, residual: 0.0 });
    };
    let u = interpolate(l, FieldId::U, 0.0, |t, x, _| ex.u(t, x)).coeffs;
    let mut w = interpolate(l, FieldId::W, 0.0, |t, x, s| ex.eta_t(t, x, s)).coeffs;
    l.copy_interface_from_fluid(&mut w, &u);
    let eta = ritz_initial(problem, 0.0)?;
    let p = if problem.b.is_some() { zero(FieldId::P) } else { vec![] };
    let energy = energy(problem, &eta, &w, &u);
    Ok(StepperState { step: 0, t: 0.0, eta, w, u, p, energy, residual: 0.0 })
}

/// Solid coefficients fixed by Dirichlet data: interface coefficients and
/// coefficients on Dirichlet sides.
fn solid_fixed(layout: &DofLayout) -> Vec<bool> {
    let s = &layout.solid;
    let mut fixed = vec![false; layout.field_len(FieldId::Eta)];
    for tag in 0..layout.mesh.spec.interface_tags.len() {
        for d in s.interface_dofs(&layout.mesh, tag) {
            for c in 0..layout.components {
                fixed[c * s.n_dofs + d] = true;
            }
        }
    }
    for &d in &layout.solid_dirichlet {
        fixed[d] = true;
    }
    fixed
}

/// `(grad(eta(t) - R eta), grad xi) = 0` for free solid coefficients, with
/// fixed coefficients set to the interpolant of `eta(t)`.
pub fn ritz_initial(problem: &Problem, t: f64) -> Result<Vec<f64>> {
    let l = &problem.layout;
    let ex = problem.case.exact.clone().ok_or_else(|| Error::Parameter("initial projection needs an exact solution".into()))?;
    let mut eta = interpolate(l, FieldId::Eta, t, |t, x, s| ex.eta(t, x, s)).coeffs;
    let fixed = solid_fixed(l);
    let mut free_idx = vec![usize::MAX; fixed.len()];
    let mut n = 0;
    for (i, &f) in fixed.iter().enumerate() {
        if !f {
            free_idx[i] = n;
            n += 1;
        }
    }
    if n == 0 {
        return Ok(eta);
    }
    let ex2 = ex.clone();
    let mut rhs_full = assemble_functional(FieldId::Eta, l, t, move |t, x, s| ([0.0; 2], ex2.grad_eta(t, x, s)), problem.exec)?;
    let mut fixed_vals = eta.clone();
    fixed_vals.iter_mut().zip(&fixed).for_each(|(v, &f)| if !f { *v = 0.0 });
    problem.k_s.mul_add(-1.0, &fixed_vals, &mut rhs_full);
    let mut trip = Vec::new();
    for i in 0..fixed.len() {
        if fixed[i] {
            continue;
        }
        for (j, v) in problem.k_s.row(i) {
            if !fixed[j] {
                trip.push((free_idx[i], free_idx[j], v));
            }
        }
    }
    let a = SparseMatrix::from_triplets(n, n, &trip)?;
    let rhs: Vec<f64> = (0..fixed.len()).filter(|&i| !fixed[i]).map(|i| rhs_full[i]).collect();
    let sol = factorize(&a)?.solve(&rhs)?;
    for i in 0..fixed.len() {
        if !fixed[i] {
            eta[i] = sol.x[free_idx[i]];
        }
    }
    Ok(eta)
}

/// The factorized step matrix for a step size.
#[derive(Debug)]
pub struct CnSystem {
    pub tau: f64,
    pub matrix_nnz: usize,
    factorization: Factorization,
}

impl CnSystem {
    pub fn factorization(&self) -> &Factorization {
        &self.factorization
    }
}

/// Assembles the step matrix; `tau` must be positive.
pub fn build_cn_system(problem: &Problem, tau: f64) -> Result<SparseMatrix> {
    if !(tau > 0.0) {
        return Err(Error::Parameter(format!("time step must be positive, got {tau}")));
    }
    cn_matrix(problem, tau)
}

fn cn_matrix(problem: &Problem, tau: f64) -> Result<SparseMatrix> {
    let l = &problem.layout;
    let mut trip = Vec::new();
    let (ss, fs, ps) = (&l.solid_slots, &l.fluid_slots, &l.pressure_slots);
    scatter_matrix(&problem.m_s, ss, ss, 1.0 / tau, &mut trip);
    scatter_matrix(&problem.k_s, ss, ss, tau / 4.0, &mut trip);
    scatter_matrix(&problem.m_f, fs, fs, 1.0 / tau, &mut trip);
    scatter_matrix(&problem.k_f, fs, fs, 0.5, &mut trip);
    if let Some(b) = &problem.b {
        scatter_matrix(b, ps, fs, -1.0, &mut trip);
        scatter_matrix(&b.transpose(), fs, ps, -1.0, &mut trip);
    }
    SparseMatrix::from_triplets(l.n_unknowns, l.n_unknowns, &trip)
}

/// Assembles and factorizes the step matrix once.
pub fn factorize_cn(problem: &Problem, tau: f64) -> Result<CnSystem> {
    let a = build_cn_system(problem, tau)?;
    Ok(CnSystem { tau, matrix_nnz: a.nnz(), factorization: factorize(&a)? })
}

/// System stepping backwards in time by `tau` (used for reversibility
/// checks: a forward step followed by a backward step is the identity).
pub fn factorize_cn_backward(problem: &Problem, tau: f64) -> Result<CnSystem> {
    if !(tau > 0.0) {
        return Err(Error::Parameter(format!("time step must be positive, got {tau}")));
    }
    let a = cn_matrix(problem, -tau)?;
    Ok(CnSystem { tau: -tau, matrix_nnz: a.nnz(), factorization: factorize(&a)? })
}

/// Advances one step with every source evaluated at the midpoint time.
pub fn cn_step(problem: &Problem, system: &CnSystem, state: &StepperState) -> Result<StepperState> {
    let l = &problem.layout;
    let tau = system.tau;
    let t_half = state.t + 0.5 * tau;
    let Loads { solid: f_s, fluid: f_f, mass: g } = problem.loads(t_half)?;

    let mut r_s = f_s;
    problem.m_s.mul_add(1.0 / tau, &state.w, &mut r_s);
    problem.k_s.mul_add(-1.0, &state.eta, &mut r_s);
    problem.k_s.mul_add(-tau / 4.0, &state.w, &mut r_s);
    let mut r_f = f_f;
    problem.m_f.mul_add(1.0 / tau, &state.u, &mut r_f);
    problem.k_f.mul_add(-0.5, &state.u, &mut r_f);

    let mut rhs = vec![0.0; l.n_unknowns];
    scatter_vector(&r_s, &l.solid_slots, &mut rhs);
    scatter_vector(&r_f, &l.fluid_slots, &mut rhs);
    if let Some(b) = &problem.b {
        let mut r_p = b.mul_vec(&state.u);
        if let Some(g) = g {
            add(&mut r_p, &g.iter().map(|v| -2.0 * v).collect::<Vec<_>>());
        }
        scatter_vector(&r_p, &l.pressure_slots, &mut rhs);
    }

    let sol = system.factorization.solve(&rhs)?;
    let mut w = vec![0.0; state.w.len()];
    let mut u = vec![0.0; state.u.len()];
    let mut p = vec![0.0; state.p.len()];
    gather(&sol.x, &l.solid_slots, &mut w);
    gather(&sol.x, &l.fluid_slots, &mut u);
    gather(&sol.x, &l.pressure_slots, &mut p);
    let eta: Vec<f64> = state.eta.iter().zip(w.iter().zip(&state.w)).map(|(e, (a, b))| e + 0.5 * tau * (a + b)).collect();
    let step = if tau > 0.0 { state.step + 1 } else { state.step.saturating_sub(1) };
    let energy = energy(problem, &eta, &w, &u);
    Ok(StepperState { step, t: state.t + tau, eta, w, u, p, energy, residual: sol.residual })
}

/// Number of steps and the effective step covering `[0, T]`.
pub fn step_count(t_final: f64, tau: f64) -> Result<(usize, f64)> {
    if !(tau > 0.0) || !(t_final >= 0.0) {
        return Err(Error::Parameter(format!("need T >= 0 and tau > 0, got T={t_final}, tau={tau}")));
    }
    if t_final == 0.0 {
        return Ok((0, tau));
    }
    let n = (t_final / tau - 1e-9).ceil().max(1.0) as usize;
    Ok((n, t_final / n as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    pub errors: Option<ErrorRecord>,
    pub energy: f64,
    pub solver_residual: f64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub tau: f64,
    pub steps: usize,
    pub records: Vec<StepRecord>,
    pub final_state: StepperState,
}

impl RunResult {
    pub fn final_errors(&self) -> Option<ErrorRecord> {
        self.records.last().and_then(|r| r.errors)
    }
}

/// Which steps get error norms in [`run_case`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorSchedule {
    EveryStep,
    FinalOnly,
}

/// Integrates to `T` with `N = ceil(T / tau)` steps of size `T / N`.
pub fn run_case(problem: &Problem, t_final: f64, tau: f64, schedule: ErrorSchedule) -> Result<RunResult> {
    let (n, tau) = step_count(t_final, tau)?;
    let mut state = init_state(problem)?;
    let errors_at = |s: &StepperState, last: bool| -> Result<Option<ErrorRecord>> {
        match &problem.case.exact {
            Some(ex) if schedule == ErrorSchedule::EveryStep || last => Ok(Some(field_errors(
                ex.as_ref(),
                s.t,
                &s.field(problem, FieldId::U),
                &s.field(problem, FieldId::Eta),
                Some(&s.field(problem, FieldId::W)),
                problem.exec,
            )?)),
            _ => Ok(None),
        }
    };
    let mut records = vec![StepRecord { step: 0, t: 0.0, errors: errors_at(&state, n == 0)?, energy: state.energy, solver_residual: 0.0 }];
    if n > 0 {
        let system = factorize_cn(problem, tau)?;
        for k in 1..=n {
            state = cn_step(problem, &system, &state)?;
            state.t = k as f64 * tau;
            log::debug!("step {k}/{n} t={:.6} residual={:.2e}", state.t, state.residual);
            records.push(StepRecord { step: k, t: state.t, errors: errors_at(&state, k == n)?, energy: state.energy, solver_residual: state.residual });
        }
    }
    Ok(RunResult { tau, steps: n, records, final_state: state })
}

/// Per-step CSV; missing errors are written as `nan`.
pub fn write_step_csv<W: Write>(records: &[StepRecord], mut w: W) -> Result<()> {
    writeln!(w, "step,t,err_u_L2,err_u_H1,err_eta_L2,err_eta_H1,err_w_L2,energy,solver_residual")?;
    for r in records {
        write!(w, "{},{:e}", r.step, r.t)?;
        match r.errors {
            Some(e) => write!(w, ",{:e},{:e},{:e},{:e},{:e}", e.u_l2, e.u_h1, e.eta_l2, e.eta_h1, e.w_l2)?,
            None => write!(w, ",nan,nan,nan,nan,nan")?,
        }
        writeln!(w, ",{:e},{:e}", r.energy, r.solver_residual)?;
    }
    Ok(())
}
