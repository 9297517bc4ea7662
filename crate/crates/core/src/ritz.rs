//! Dynamic Ritz projection.
//!
//! For a given interface trace `eta_G` and time `t` the stationary problem
//! finds `(R eta, R u, R p)` with `R eta = eta_G` on the interfaces and
//!
//! ```text
//! (grad R eta, grad xi) + (D(R u), D(v)) + (R u, v) - (R p, div v) + (div R u, q)
//!   = (grad eta, grad xi) + (D(u), D(v)) + (u, v) - (p, div v) + (div u, q)
//! ```
//!
//! for all `(xi, v, q)` with `xi = v` on the interfaces. The trace then
//! evolves by `d eta_G / dt = R u` on the interfaces, integrated with the
//! classical fourth-order Runge–Kutta method.

use std::io::Write;
use std::sync::Arc;

use crate::analysis::{field_errors, ConvergenceReport, ErrorRecord};
use crate::dofspace::{interpolate, DofLayout, FEField, FieldId, Slot};
use crate::error::{Error, Result};
use crate::forms::{assemble_functional, assemble_linear, gather, scatter_matrix, scatter_vector, LoadKind, LoadSpec};
use crate::fsi_cn::Problem;
use crate::linalg::{factorize, Factorization, SparseMatrix};

/// Number of output intervals on `[0, T]` used for sup-in-time norms.
pub const OUTPUT_INTERVALS: usize = 32;

/// Projected fields at one time, as full coefficient vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct RitzFields {
    pub eta: Vec<f64>,
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub residual: f64,
}

/// Factorized stationary operator of one problem.
#[derive(Debug)]
pub struct RitzSolver<'a> {
    pub problem: &'a Problem,
    /// Column slots of the solid coefficients: free ones only.
    solid_cols: Vec<Slot>,
    factorization: Factorization,
}

impl<'a> RitzSolver<'a> {
    pub fn new(problem: &'a Problem) -> Result<Self> {
        let l = &problem.layout;
        let solid_cols: Vec<Slot> = l
            .solid_slots
            .iter()
            .zip(&l.solid_alias)
            .map(|(&s, a)| if a.is_some() { Slot::Constrained } else { s })
            .collect();
        let mut trip = Vec::new();
        scatter_matrix(&problem.k_s, &l.solid_slots, &solid_cols, 1.0, &mut trip);
        scatter_matrix(&problem.k_f, &l.fluid_slots, &l.fluid_slots, 1.0, &mut trip);
        scatter_matrix(&problem.m_f, &l.fluid_slots, &l.fluid_slots, 1.0, &mut trip);
        if let Some(b) = &problem.b {
            scatter_matrix(b, &l.pressure_slots, &l.fluid_slots, -1.0, &mut trip);
            scatter_matrix(&b.transpose(), &l.fluid_slots, &l.pressure_slots, -1.0, &mut trip);
        }
        let a = SparseMatrix::from_triplets(l.n_unknowns, l.n_unknowns, &trip)?;
        let factorization = factorize(&a).map_err(|e| match e {
            Error::Singular(m) => Error::Singular(format!("stationary projection system: {m}")),
            e => e,
        })?;
        Ok(Self { problem, solid_cols, factorization })
    }

    pub fn layout(&self) -> &Arc<DofLayout> {
        &self.problem.layout
    }

    /// Trace length: one entry per interface alias.
    pub fn trace_len(&self) -> usize {
        self.problem.layout.aliases.len()
    }

    /// Interface trace of a solid coefficient vector.
    pub fn trace_of(&self, solid: &[f64]) -> Vec<f64> {
        self.problem.layout.aliases.iter().map(|a| solid[a.solid]).collect()
    }

    /// Interface trace of a fluid coefficient vector.
    pub fn fluid_trace_of(&self, fluid: &[f64]) -> Vec<f64> {
        self.problem.layout.aliases.iter().map(|a| fluid[a.fluid]).collect()
    }

    /// Interpolated exact trace `I_h eta(t)` on the interfaces.
    pub fn exact_trace(&self, t: f64) -> Result<Vec<f64>> {
        let ex = self.problem.case.exact.clone().ok_or_else(|| Error::Parameter("no exact solution attached".into()))?;
        let eta = interpolate(self.layout(), FieldId::Eta, t, |t, x, s| ex.eta(t, x, s));
        Ok(self.trace_of(&eta.coeffs))
    }

    /// Right-hand side data of the exact fields, in coefficient numbering
    /// `(solid, fluid, pressure)`; zeros without an exact solution.
    fn data(&self, t: f64) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let p = self.problem;
        let l = &p.layout;
        let Some(ex) = p.case.exact.clone() else {
            return Ok((vec![0.0; l.field_len(FieldId::Eta)], vec![0.0; l.field_len(FieldId::U)], vec![0.0; l.n_pressure]));
        };
        let scalar = p.is_scalar();
        let e1 = ex.clone();
        let solid = assemble_functional(FieldId::Eta, l, t, move |t, x, s| ([0.0; 2], e1.grad_eta(t, x, s)), p.exec)?;
        let e2 = ex.clone();
        let fluid = assemble_functional(
            FieldId::U,
            l,
            t,
            move |t, x, _| {
                let g = e2.grad_u(t, x);
                let flux = if scalar {
                    g
                } else {
                    let o = 0.5 * (g[0][1] + g[1][0]);
                    let pr = e2.p(t, x);
                    [[g[0][0] - pr, o], [o, g[1][1] - pr]]
                };
                (e2.u(t, x), flux)
            },
            p.exec,
        )?;
        let pressure = if p.b.is_some() {
            let e3 = ex.clone();
            assemble_linear(&LoadSpec { kind: LoadKind::MassSource, test: FieldId::P }, l, t, move |t, x, _| [-e3.div_u(t, x), 0.0], p.exec)?
        } else {
            vec![]
        };
        Ok((solid, fluid, pressure))
    }

    /// One stationary solve with the interface trace fixed to `trace`.
    pub fn stationary_solve(&self, trace: &[f64], t: f64) -> Result<RitzFields> {
        let l = self.layout();
        if trace.len() != self.trace_len() {
            return Err(Error::Dimension { expected: self.trace_len(), got: trace.len() });
        }
        let (mut r_s, r_f, r_p) = self.data(t)?;
        let mut lift = vec![0.0; l.field_len(FieldId::Eta)];
        for (a, &v) in l.aliases.iter().zip(trace) {
            lift[a.solid] = v;
        }
        self.problem.k_s.mul_add(-1.0, &lift, &mut r_s);
        let mut rhs = vec![0.0; l.n_unknowns];
        scatter_vector(&r_s, &l.solid_slots, &mut rhs);
        scatter_vector(&r_f, &l.fluid_slots, &mut rhs);
        scatter_vector(&r_p, &l.pressure_slots, &mut rhs);
        let sol = self.factorization.solve(&rhs)?;
        let mut eta = lift;
        gather(&sol.x, &self.solid_cols, &mut eta);
        let mut u = vec![0.0; l.field_len(FieldId::U)];
        gather(&sol.x, &l.fluid_slots, &mut u);
        let mut p = vec![0.0; l.n_pressure];
        gather(&sol.x, &l.pressure_slots, &mut p);
        Ok(RitzFields { eta, u, p, residual: sol.residual })
    }

    /// Residual of the free solid rows, `max |(grad(R eta - eta), grad xi)|`.
    pub fn solid_residual(&self, fields: &RitzFields, t: f64) -> Result<f64> {
        let l = self.layout();
        let (mut r, _, _) = self.data(t)?;
        r.iter_mut().for_each(|v| *v = -*v);
        self.problem.k_s.mul_add(1.0, &fields.eta, &mut r);
        Ok(r.iter().zip(&l.solid_slots).zip(&l.solid_alias).filter(|((_, s), a)| a.is_none() && s.index().is_some()).map(|((v, _), _)| v.abs()).fold(0.0, f64::max))
    }

    /// Evolves the trace from `I_h eta(0)` over `[0, T]` with at most
    /// `tau_r` per Runge–Kutta step. Step counts are rounded up to a
    /// multiple of [`OUTPUT_INTERVALS`] so outputs fall on step boundaries.
    pub fn evolve(&self, t_final: f64, tau_r: f64) -> Result<RitzSeries> {
        let trace0 = match self.problem.case.exact {
            Some(_) => self.exact_trace(0.0)?,
            None => vec![0.0; self.trace_len()],
        };
        self.evolve_from(trace0, t_final, tau_r)
    }

    pub fn evolve_from(&self, trace0: Vec<f64>, t_final: f64, tau_r: f64) -> Result<RitzSeries> {
        if !(tau_r > 0.0) || !(t_final > 0.0) {
            return Err(Error::Parameter(format!("need T > 0 and tau_r > 0, got T={t_final}, tau_r={tau_r}")));
        }
        let m = OUTPUT_INTERVALS;
        let n = ((t_final / tau_r - 1e-9).ceil() as usize).div_ceil(m).max(1) * m;
        let tau = t_final / n as f64;
        let rate = |trace: &[f64], t: f64| -> Result<Vec<f64>> {
            let f = self.stationary_solve(trace, t)?;
            Ok(self.fluid_trace_of(&f.u))
        };
        let axpy = |y: &[f64], a: f64, k: &[f64]| -> Vec<f64> { y.iter().zip(k).map(|(y, k)| y + a * k).collect() };

        let mut trace = trace0;
        let mut outputs = vec![RitzOutput { t: 0.0, fields: self.stationary_solve(&trace, 0.0)? }];
        for step in 0..n {
            let t = step as f64 * tau;
            let k1 = rate(&trace, t)?;
            let k2 = rate(&axpy(&trace, 0.5 * tau, &k1), t + 0.5 * tau)?;
            let k3 = rate(&axpy(&trace, 0.5 * tau, &k2), t + 0.5 * tau)?;
            let k4 = rate(&axpy(&trace, tau, &k3), t + tau)?;
            for i in 0..trace.len() {
                trace[i] += tau / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            if (step + 1) % (n / m) == 0 {
                let t_out = (step + 1) as f64 * tau;
                outputs.push(RitzOutput { t: t_out, fields: self.stationary_solve(&trace, t_out)? });
            }
        }
        Ok(RitzSeries { tau, steps: n, final_trace: trace, outputs })
    }
}

#[derive(Debug, Clone)]
pub struct RitzOutput {
    pub t: f64,
    pub fields: RitzFields,
}

#[derive(Debug, Clone)]
pub struct RitzSeries {
    pub tau: f64,
    pub steps: usize,
    pub final_trace: Vec<f64>,
    pub outputs: Vec<RitzOutput>,
}

/// Sup over the output times of the projection errors (`w` column is 0).
pub fn ritz_errors(problem: &Problem, series: &RitzSeries) -> Result<ErrorRecord> {
    let ex = problem.case.exact.clone().ok_or_else(|| Error::Parameter("projection errors need an exact solution".into()))?;
    let l = &problem.layout;
    let mut sup = ErrorRecord::default();
    for o in &series.outputs {
        let u = FEField::from_coeffs(l.clone(), FieldId::U, o.fields.u.clone())?;
        let eta = FEField::from_coeffs(l.clone(), FieldId::Eta, o.fields.eta.clone())?;
        sup = sup.sup(&field_errors(ex.as_ref(), o.t, &u, &eta, None, problem.exec)?);
    }
    Ok(sup)
}

pub const RITZ_COLUMNS: [&str; 4] = ["err_u_L2", "err_u_H1", "err_eta_L2", "err_eta_H1"];

/// `h,sup_err_u_L2,sup_err_u_H1,sup_err_eta_L2,sup_err_eta_H1`
pub fn write_ritz_csv<W: Write>(report: &ConvergenceReport, mut w: W) -> Result<()> {
    writeln!(w, "h,{}", RITZ_COLUMNS.map(|c| format!("sup_{c}")).join(","))?;
    for r in &report.rows {
        write!(w, "{:e}", r.h)?;
        for c in RITZ_COLUMNS {
            write!(w, ",{:e}", r.errors.get(c).unwrap())?;
        }
        writeln!(w)?;
    }
    Ok(())
}
