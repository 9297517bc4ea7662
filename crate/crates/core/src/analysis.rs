//! Error norms, rate fits and report serialization.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::basis::{quadrature, AffineMap, ShapeTable};
use crate::dofspace::{eval_field, FEField, FieldId};
use crate::error::{Error, Result};
use crate::exec::{Exec, CHUNK};
use crate::manufactured::{ExactSolution, Mat2, Vec2};

/// Quadrature degree used by every error norm.
pub const NORM_DEGREE: usize = 8;
/// Errors at or below this level count as exact reproduction.
pub const EXACT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    L2,
    H1Semi,
    H1,
}

/// `|| field - exact ||` over the field's region; `exact(x, strip)` returns
/// the value and gradient (`g[c][d]`).
pub fn error_norm<F>(field: &FEField, exact: F, norm: Norm, exec: Exec) -> Result<f64>
where
    F: Fn(Vec2, usize) -> (Vec2, Mat2) + Sync + Send,
{
    let space = field.space();
    let comps = field.components();
    let mesh = &field.layout.mesh;
    let rule = quadrature(NORM_DEGREE)?;
    let table = ShapeTable::new(space.kind, &rule.points);
    let n = space.n_dofs;
    let parts = exec.map_chunks(space.cells.len(), CHUNK, |r| -> Result<f64> {
        let mut acc = 0.0;
        for &t in &space.cells[r] {
            let map = AffineMap::new(&mesh.triangle_coords(t))?;
            let strip = mesh.triangles[t].strip;
            let dofs = space.cell_dofs(t).unwrap();
            for (q, w) in rule.weights.iter().enumerate() {
                let x = map.point(&rule.points[q]);
                let (ev, eg) = exact(x, strip);
                let phi = table.values(q);
                let grads = table.grads(q);
                let mut sum = 0.0;
                for c in 0..comps {
                    let (mut v, mut g) = (0.0, [0.0; 2]);
                    for (k, &d) in dofs.iter().enumerate() {
                        let a = field.coeffs[c * n + d];
                        v += a * phi[k];
                        let gk = map.grad(grads[k]);
                        g[0] += a * gk[0];
                        g[1] += a * gk[1];
                    }
                    if norm != Norm::H1Semi {
                        sum += (v - ev[c]).powi(2);
                    }
                    if norm != Norm::L2 {
                        sum += (g[0] - eg[c][0]).powi(2) + (g[1] - eg[c][1]).powi(2);
                    }
                }
                acc += w * map.det.abs() * sum;
            }
        }
        Ok(acc)
    });
    let mut total = 0.0;
    for p in parts {
        total += p?;
    }
    Ok(total.sqrt())
}

/// Error columns shared by every CSV.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorRecord {
    #[serde(rename = "err_u_L2")]
    pub u_l2: f64,
    #[serde(rename = "err_u_H1")]
    pub u_h1: f64,
    #[serde(rename = "err_eta_L2")]
    pub eta_l2: f64,
    #[serde(rename = "err_eta_H1")]
    pub eta_h1: f64,
    #[serde(rename = "err_w_L2")]
    pub w_l2: f64,
}

pub const ERROR_COLUMNS: [&str; 5] = ["err_u_L2", "err_u_H1", "err_eta_L2", "err_eta_H1", "err_w_L2"];

impl ErrorRecord {
    pub fn get(&self, column: &str) -> Option<f64> {
        Some(match column {
            "err_u_L2" => self.u_l2,
            "err_u_H1" => self.u_h1,
            "err_eta_L2" => self.eta_l2,
            "err_eta_H1" => self.eta_h1,
            "err_w_L2" => self.w_l2,
            _ => return None,
        })
    }

    pub fn max(&self) -> f64 {
        ERROR_COLUMNS.iter().map(|c| self.get(c).unwrap()).fold(0.0, f64::max)
    }

    pub fn sup(&self, other: &ErrorRecord) -> ErrorRecord {
        ErrorRecord {
            u_l2: self.u_l2.max(other.u_l2),
            u_h1: self.u_h1.max(other.u_h1),
            eta_l2: self.eta_l2.max(other.eta_l2),
            eta_h1: self.eta_h1.max(other.eta_h1),
            w_l2: self.w_l2.max(other.w_l2),
        }
    }
}

/// Errors of `(u, eta, w)` against the exact solution at time `t`; `w` is
/// skipped (reported as 0) when `None`. H1 columns are full H1 norms.
pub fn field_errors(exact: &dyn ExactSolution, t: f64, u: &FEField, eta: &FEField, w: Option<&FEField>, exec: Exec) -> Result<ErrorRecord> {
    if u.field != FieldId::U || eta.field != FieldId::Eta {
        return Err(Error::Parameter("field_errors expects the velocity and displacement fields".into()));
    }
    let ue = |x: Vec2, _: usize| (exact.u(t, x), exact.grad_u(t, x));
    let ee = |x: Vec2, s: usize| (exact.eta(t, x, s), exact.grad_eta(t, x, s));
    let we = |x: Vec2, s: usize| (exact.eta_t(t, x, s), [[0.0; 2]; 2]);
    Ok(ErrorRecord {
        u_l2: error_norm(u, ue, Norm::L2, exec)?,
        u_h1: error_norm(u, ue, Norm::H1, exec)?,
        eta_l2: error_norm(eta, ee, Norm::L2, exec)?,
        eta_h1: error_norm(eta, ee, Norm::H1, exec)?,
        w_l2: match w {
            Some(w) => error_norm(w, we, Norm::L2, exec)?,
            None => 0.0,
        },
    })
}

/// Outcome of a rate fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RateFit {
    Slope { adjacent: Vec<f64>, least_squares: f64 },
    /// Some error vanished (at or below [`EXACT_FLOOR`]).
    Exact,
}

impl RateFit {
    pub fn slope(&self) -> Option<f64> {
        match self {
            RateFit::Slope { least_squares, .. } => Some(*least_squares),
            RateFit::Exact => None,
        }
    }
}

/// Adjacent and least-squares slopes of `log(error)` against `log(h)`.
pub fn fit_rate(pairs: &[(f64, f64)]) -> Result<RateFit> {
    if pairs.len() < 2 {
        return Err(Error::TooFewEntries(pairs.len()));
    }
    if pairs.iter().any(|&(h, e)| !(h > 0.0) || e.is_nan()) {
        return Err(Error::Parameter("rate fit needs positive step sizes and finite errors".into()));
    }
    let inc = pairs.windows(2).all(|w| w[1].0 > w[0].0);
    let dec = pairs.windows(2).all(|w| w[1].0 < w[0].0);
    if !inc && !dec {
        return Err(Error::Parameter("rate fit needs a strictly monotone step sequence".into()));
    }
    if pairs.iter().any(|&(_, e)| e <= EXACT_FLOOR) {
        return Ok(RateFit::Exact);
    }
    let logs: Vec<(f64, f64)> = pairs.iter().map(|&(h, e)| (h.ln(), e.ln())).collect();
    let adjacent = logs.windows(2).map(|w| (w[0].1 - w[1].1) / (w[0].0 - w[1].0)).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(RateFit::Slope { adjacent, least_squares: sxy / sxx })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateKind {
    /// `|slope - expected| <= tolerance`
    Band,
    /// `slope >= expected - tolerance`
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gate {
    pub column: String,
    pub expected: f64,
    pub tolerance: f64,
    pub kind: GateKind,
    pub slope: Option<f64>,
    pub pass: bool,
}

impl Gate {
    pub fn evaluate(column: &str, fit: &RateFit, expected: f64, tolerance: f64, kind: GateKind) -> Gate {
        let slope = fit.slope();
        let pass = match (slope, kind) {
            (Some(s), GateKind::Band) => (s - expected).abs() <= tolerance,
            (Some(s), GateKind::AtLeast) => s >= expected - tolerance,
            (None, _) => true,
        };
        Gate { column: column.into(), expected, tolerance, kind, slope, pass }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    H,
    Tau,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub h: f64,
    pub tau: f64,
    pub errors: ErrorRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub case: String,
    pub element: String,
    pub variable: SweepVariable,
    pub rows: Vec<ConvergenceRow>,
    pub rates: BTreeMap<String, RateFit>,
    pub gates: Vec<Gate>,
    pub pass: bool,
}

impl ConvergenceReport {
    /// Fits every column in `columns` against the sweep variable.
    pub fn new(case: &str, element: &str, variable: SweepVariable, rows: Vec<ConvergenceRow>, columns: &[&str]) -> Result<Self> {
        let mut rates = BTreeMap::new();
        for &col in columns {
            let pairs: Vec<(f64, f64)> = rows
                .iter()
                .map(|r| {
                    let x = if variable == SweepVariable::H { r.h } else { r.tau };
                    (x, r.errors.get(col).ok_or_else(|| Error::Parameter(format!("unknown error column {col}"))))
                })
                .map(|(x, e)| e.map(|e| (x, e)))
                .collect::<Result<_>>()?;
            rates.insert(col.to_string(), fit_rate(&pairs)?);
        }
        Ok(Self { case: case.into(), element: element.into(), variable, rows, rates, gates: vec![], pass: true })
    }

    pub fn gate(&mut self, column: &str, expected: f64, tolerance: f64, kind: GateKind) -> Result<&Gate> {
        let fit = self.rates.get(column).ok_or_else(|| Error::Parameter(format!("no rate for column {column}")))?;
        let g = Gate::evaluate(column, fit, expected, tolerance, kind);
        self.pass &= g.pass;
        self.gates.push(g);
        Ok(self.gates.last().unwrap())
    }

    pub fn slope(&self, column: &str) -> Option<f64> {
        self.rates.get(column).and_then(RateFit::slope)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "case,element,h,tau,{}", ERROR_COLUMNS.join(","))?;
        for r in &self.rows {
            write!(w, "{},{},{:e},{:e}", self.case, self.element, r.h, r.tau)?;
            for c in ERROR_COLUMNS {
                write!(w, ",{:e}", r.errors.get(c).unwrap())?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn summary(&self) -> serde_json::Value {
        summary_json(&self.case, &self.element, &self.rates, self.pass, &self.gates)
    }

    /// One two-column `log10(step) log10(error)` file per fitted column;
    /// returns the written paths.
    pub fn write_plot_files(&self, dir: &Path, prefix: &str) -> Result<Vec<PathBuf>> {
        let mut out = Vec::new();
        for col in self.rates.keys() {
            let mut s = String::new();
            for r in &self.rows {
                let x = if self.variable == SweepVariable::H { r.h } else { r.tau };
                let e = r.errors.get(col).unwrap();
                s.push_str(&format!("{:.12e} {:.12e}\n", x.log10(), e.log10()));
            }
            let path = dir.join(format!("{prefix}_{col}.dat"));
            write_atomic(&path, s.as_bytes())?;
            out.push(path);
        }
        Ok(out)
    }
}

pub(crate) fn summary_json(case: &str, element: &str, rates: &BTreeMap<String, RateFit>, pass: bool, gates: &[Gate]) -> serde_json::Value {
    let rates: serde_json::Map<String, serde_json::Value> = rates
        .iter()
        .map(|(k, v)| {
            let val = match v.slope() {
                Some(s) => serde_json::json!(s),
                None => serde_json::json!("exact"),
            };
            (k.clone(), val)
        })
        .collect();
    serde_json::json!({ "case": case, "element": element, "rates": rates, "pass": pass, "gates": gates })
}

/// Writes through a temporary sibling file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// `|| coarse - reference ||_L2` on the reference field's region, evaluating
/// the coarse field at the reference quadrature points by point location.
pub fn transfer_difference(coarse: &FEField, reference: &FEField, exec: Exec) -> Result<f64> {
    let (cm, rm) = (&coarse.layout.mesh, &reference.layout.mesh);
    if cm.spec != rm.spec {
        return Err(Error::NonNested("fields live on different geometries".into()));
    }
    if coarse.field != reference.field || coarse.components() != reference.components() {
        return Err(Error::NonNested("fields differ in kind or component count".into()));
    }
    let comps = reference.components();
    error_norm(
        reference,
        |x, _| {
            let (t, l) = match cm.locate(x) {
                Some(hit) => hit,
                None => return ([f64::NAN; 2], [[0.0; 2]; 2]),
            };
            match eval_field(coarse, t, clamp_bary(l)) {
                Ok(v) => {
                    let mut val = v.value;
                    val[comps..].iter_mut().for_each(|c| *c = 0.0);
                    (val, v.grad)
                }
                Err(_) => ([f64::NAN; 2], [[0.0; 2]; 2]),
            }
        },
        Norm::L2,
        exec,
    )
    .and_then(|e| if e.is_finite() { Ok(e) } else { Err(Error::NonNested("reference points fall outside the coarse field's region".into())) })
}

fn clamp_bary(l: [f64; 3]) -> [f64; 3] {
    let c = l.map(|v| v.max(0.0));
    let s: f64 = c.iter().sum();
    c.map(|v| v / s)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;
    use std::sync::Arc;

    use super::*;
    use crate::basis::ElementKind;
    use crate::dofspace::{build_layout, interpolate};
    use crate::mesh::{build_structured_mesh, tests::unit_square, StripRole};

    fn scalar_layout(kind: ElementKind, n: usize) -> Arc<crate::dofspace::DofLayout> {
        let mesh = Arc::new(build_structured_mesh(&unit_square(StripRole::Heat), n, &[n]).unwrap());
        Arc::new(build_layout(mesh, kind, None, kind, 1).unwrap())
    }

    fn sines(x: Vec2, _: usize) -> (Vec2, Mat2) {
        let (sx, cx) = (2.0 * PI * x[0]).sin_cos();
        let (sy, cy) = (2.0 * PI * x[1]).sin_cos();
        ([sx * sy, 0.0], [[2.0 * PI * cx * sy, 2.0 * PI * sx * cy], [0.0, 0.0]])
    }

    #[test]
    fn zero_field_norms() {
        let l = scalar_layout(ElementKind::P1, 4);
        let z = FEField::zeros(l.clone(), FieldId::U);
        assert_eq!(error_norm(&z, |_, _| ([0.0; 2], [[0.0; 2]; 2]), Norm::H1, Exec::Sequential).unwrap(), 0.0);
        let e = error_norm(&z, sines, Norm::L2, Exec::Sequential).unwrap();
        assert!((e - 0.5).abs() < 1e-6, "{e}");
    }

    #[test]
    fn trigonometric_integrand_is_resolved() {
        // degree-8 quadrature on a fine mesh against the closed form 1/4
        let l = scalar_layout(ElementKind::P1, 16);
        let z = FEField::zeros(l, FieldId::U);
        let e = error_norm(&z, sines, Norm::L2, Exec::Sequential).unwrap();
        assert!((e * e - 0.25).abs() < 1e-12, "{}", e * e - 0.25);
    }

    #[test]
    fn interpolation_rates() {
        for (kind, l2, h1) in [(ElementKind::P1, 2.0, 1.0), (ElementKind::P2, 3.0, 2.0)] {
            let mut pairs = (vec![], vec![]);
            for n in [8, 16] {
                let l = scalar_layout(kind, n);
                let f = interpolate(&l, FieldId::U, 0.0, |_, x, s| sines(x, s).0);
                pairs.0.push((1.0 / n as f64, error_norm(&f, sines, Norm::L2, Exec::Parallel).unwrap()));
                pairs.1.push((1.0 / n as f64, error_norm(&f, sines, Norm::H1Semi, Exec::Parallel).unwrap()));
            }
            assert!((fit_rate(&pairs.0).unwrap().slope().unwrap() - l2).abs() < 0.15);
            assert!((fit_rate(&pairs.1).unwrap().slope().unwrap() - h1).abs() < 0.15);
        }
    }

    #[test]
    fn rate_fits() {
        let r = fit_rate(&[(0.1, 1e-2), (0.05, 2.5e-3)]).unwrap();
        assert!((r.slope().unwrap() - 2.0).abs() < 1e-12);
        let r = fit_rate(&[(0.1, 1e-3), (0.05, 1.25e-4)]).unwrap();
        assert!((r.slope().unwrap() - 3.0).abs() < 1e-12);
        assert!(matches!(fit_rate(&[(0.1, 1.0)]), Err(Error::TooFewEntries(1))));
        assert_eq!(fit_rate(&[(0.1, 0.0), (0.05, 0.0)]).unwrap(), RateFit::Exact);
        assert!(fit_rate(&[(0.1, 1.0), (0.05, 0.5), (0.2, 0.1)]).is_err());
    }

    #[test]
    fn gates() {
        let fit = RateFit::Slope { adjacent: vec![], least_squares: 1.8 };
        assert!(Gate::evaluate("c", &fit, 2.0, 0.25, GateKind::Band).pass);
        assert!(!Gate::evaluate("c", &fit, 2.0, 0.1, GateKind::Band).pass);
        assert!(Gate::evaluate("c", &fit, 1.0, 0.25, GateKind::AtLeast).pass);
        assert!(!Gate::evaluate("c", &fit, 3.0, 0.25, GateKind::AtLeast).pass);
    }

    #[test]
    fn transfer_matches_direct_norm() {
        let g = |x: Vec2, _: usize| ([x[0] * x[0] + x[0] * x[1], 0.0], [[2.0 * x[0] + x[1], x[0]], [0.0, 0.0]]);
        let coarse = interpolate(&scalar_layout(ElementKind::P1, 4), FieldId::U, 0.0, |_, x, s| g(x, s).0);
        let reference = interpolate(&scalar_layout(ElementKind::P2, 16), FieldId::U, 0.0, |_, x, s| g(x, s).0);
        let a = transfer_difference(&coarse, &reference, Exec::Sequential).unwrap();
        let b = error_norm(&coarse, g, Norm::L2, Exec::Sequential).unwrap();
        assert!((a - b).abs() < 1e-10, "{a} {b}");
        assert!(transfer_difference(&reference, &reference, Exec::Sequential).unwrap() < 1e-14);
    }

    #[test]
    fn report_csv_and_summary() {
        let rows = [0.1, 0.05]
            .iter()
            .map(|&h| ConvergenceRow { h, tau: 1e-3, errors: ErrorRecord { u_l2: h * h, u_h1: h, eta_l2: h * h, eta_h1: h, w_l2: h * h } })
            .collect();
        let mut r = ConvergenceReport::new("heat_wave", "p1", SweepVariable::H, rows, &ERROR_COLUMNS).unwrap();
        assert!(r.gate("err_u_L2", 2.0, 0.25, GateKind::Band).unwrap().pass);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("case,element,h,tau,err_u_L2,err_u_H1,err_eta_L2,err_eta_H1,err_w_L2\n"));
        assert_eq!(s.lines().count(), 3);
        let j = r.summary();
        assert_eq!(j["pass"], true);
        assert!((j["rates"]["err_u_H1"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    }
}
