//! Bilinear and linear forms over the tagged regions.
//!
//! Bilinear forms are assembled as blocks in field-coefficient numbering
//! (rows: test coefficients, columns: trial coefficients). Global systems are
//! formed afterwards by [`scatter_matrix`] through the layout's slot maps,
//! which is where interface aliasing and constraints take effect.
//!
//! `D(u) = (grad u + grad u^T) / 2`.

use crate::basis::{self, edge_rule, quadrature, AffineMap, ElementKind, ShapeTable};
use crate::dofspace::{DofLayout, FEField, FieldId, FieldSpace, Slot};
use crate::error::{Error, Result};
use crate::exec::{Exec, CHUNK};
use crate::linalg::SparseMatrix;
use crate::mesh::{barycentric, Side};

/// Quadrature degree used by every assembly routine.
pub const ASSEMBLY_DEGREE: usize = 6;
/// 1D Gauss degree on boundary and interface edges.
pub const EDGE_DEGREE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BilinearKind {
    /// `(grad u, grad v)`, componentwise for vector fields.
    GradGrad,
    /// `(D(u), D(v))`
    SymGradSymGrad,
    /// `(u, v)`
    Mass,
    /// `(div v, q)` with trial `v` (velocity) and test `q` (pressure).
    DivPressure,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FormSpec {
    pub kind: BilinearKind,
    pub trial: FieldId,
    pub test: FieldId,
    pub coefficient: f64,
}

impl FormSpec {
    pub fn new(kind: BilinearKind, trial: FieldId, test: FieldId) -> Self {
        Self { kind, trial, test, coefficient: 1.0 }
    }
}

/// Dense row-major local matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl LocalMatrix {
    fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    fn add(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] += v;
    }
}

struct ElementData {
    weights: Vec<f64>,
    map: AffineMap,
}

fn element_data(coords: &[[f64; 2]; 3], rule: &basis::QuadratureRule) -> Result<ElementData> {
    let map = AffineMap::new(coords)?;
    Ok(ElementData { weights: rule.weights.iter().map(|w| w * map.det.abs()).collect(), map })
}

fn physical_grads(table: &ShapeTable, q: usize, map: &AffineMap) -> Vec<[f64; 2]> {
    table.grads(q).iter().map(|&g| map.grad(g)).collect()
}

/// Scalar `(phi_b, phi_a)` on one triangle.
pub fn local_mass(kind: ElementKind, coords: &[[f64; 2]; 3]) -> Result<LocalMatrix> {
    let rule = quadrature(ASSEMBLY_DEGREE)?;
    let table = ShapeTable::new(kind, &rule.points);
    let el = element_data(coords, rule)?;
    let n = kind.n_local();
    let mut m = LocalMatrix::zeros(n, n);
    for (q, &w) in el.weights.iter().enumerate() {
        let v = table.values(q);
        for a in 0..n {
            for b in 0..n {
                m.add(a, b, w * v[a] * v[b]);
            }
        }
    }
    Ok(m)
}

/// Scalar `(grad phi_b, grad phi_a)` on one triangle.
pub fn local_grad_grad(kind: ElementKind, coords: &[[f64; 2]; 3]) -> Result<LocalMatrix> {
    let rule = quadrature(ASSEMBLY_DEGREE)?;
    let table = ShapeTable::new(kind, &rule.points);
    let el = element_data(coords, rule)?;
    let n = kind.n_local();
    let mut m = LocalMatrix::zeros(n, n);
    for (q, &w) in el.weights.iter().enumerate() {
        let g = physical_grads(&table, q, &el.map);
        for a in 0..n {
            for b in 0..n {
                m.add(a, b, w * (g[a][0] * g[b][0] + g[a][1] * g[b][1]));
            }
        }
    }
    Ok(m)
}

/// `(D(phi_b e_e), D(phi_a e_c))`, local index `c * n + a`.
pub fn local_symgrad(kind: ElementKind, coords: &[[f64; 2]; 3]) -> Result<LocalMatrix> {
    let rule = quadrature(ASSEMBLY_DEGREE)?;
    let table = ShapeTable::new(kind, &rule.points);
    let el = element_data(coords, rule)?;
    let n = kind.n_local();
    let mut m = LocalMatrix::zeros(2 * n, 2 * n);
    for (q, &w) in el.weights.iter().enumerate() {
        let g = physical_grads(&table, q, &el.map);
        for c in 0..2 {
            for a in 0..n {
                for e in 0..2 {
                    for b in 0..n {
                        let mut v = g[b][c] * g[a][e];
                        if c == e {
                            v += g[a][0] * g[b][0] + g[a][1] * g[b][1];
                        }
                        m.add(c * n + a, e * n + b, 0.5 * w * v);
                    }
                }
            }
        }
    }
    Ok(m)
}

/// `(div(phi_a e_c), psi_b)`: rows pressure DOFs, columns `c * n + a`.
pub fn local_div(velocity: ElementKind, pressure: ElementKind, coords: &[[f64; 2]; 3]) -> Result<LocalMatrix> {
    let rule = quadrature(ASSEMBLY_DEGREE)?;
    let vt = ShapeTable::new(velocity, &rule.points);
    let pt = ShapeTable::new(pressure, &rule.points);
    let el = element_data(coords, rule)?;
    let (n, np) = (velocity.n_local(), pressure.n_local());
    let mut m = LocalMatrix::zeros(np, 2 * n);
    for (q, &w) in el.weights.iter().enumerate() {
        let g = physical_grads(&vt, q, &el.map);
        let psi = pt.values(q);
        for b in 0..np {
            for c in 0..2 {
                for a in 0..n {
                    m.add(b, c * n + a, w * g[a][c] * psi[b]);
                }
            }
        }
    }
    Ok(m)
}

fn same_space(a: &FieldSpace, b: &FieldSpace) -> bool {
    a.fluid_side == b.fluid_side && a.kind == b.kind && a.n_dofs == b.n_dofs
}

/// Assembles one bilinear form as a coefficient-space block.
pub fn assemble_bilinear(spec: &FormSpec, layout: &DofLayout, exec: Exec) -> Result<SparseMatrix> {
    for f in [spec.trial, spec.test] {
        if !layout.has_field(f) {
            return Err(Error::Form(format!("layout has no field {}", f.name())));
        }
    }
    let (trial, test) = (layout.space(spec.trial), layout.space(spec.test));
    let comps = layout.field_components(spec.trial);
    let mesh = &layout.mesh;
    let coef = spec.coefficient;
    let nrows = layout.field_len(spec.test);
    let ncols = layout.field_len(spec.trial);

    let triplets: Vec<(usize, usize, f64)> = match spec.kind {
        BilinearKind::Mass | BilinearKind::GradGrad => {
            if !same_space(trial, test) || comps != layout.field_components(spec.test) {
                return Err(Error::Form(format!(
                    "{:?} needs trial and test in the same space ({} vs {})",
                    spec.kind,
                    spec.trial.name(),
                    spec.test.name()
                )));
            }
            let n = trial.n_dofs;
            let parts = exec.map_chunks(trial.cells.len(), CHUNK, |r| -> Result<Vec<_>> {
                let mut out = Vec::new();
                for &t in &trial.cells[r] {
                    let coords = mesh.triangle_coords(t);
                    let m = if spec.kind == BilinearKind::Mass {
                        local_mass(trial.kind, &coords)?
                    } else {
                        local_grad_grad(trial.kind, &coords)?
                    };
                    let dofs = trial.cell_dofs(t).unwrap();
                    for c in 0..comps {
                        for (a, &da) in dofs.iter().enumerate() {
                            for (b, &db) in dofs.iter().enumerate() {
                                out.push((c * n + da, c * n + db, coef * m.at(a, b)));
                            }
                        }
                    }
                }
                Ok(out)
            });
            flatten(parts)?
        }
        BilinearKind::SymGradSymGrad => {
            if spec.trial != FieldId::U || spec.test != FieldId::U || comps != 2 {
                return Err(Error::Form("symgrad_symgrad is defined for the vector fluid velocity only".into()));
            }
            let n = trial.n_dofs;
            let nl = trial.kind.n_local();
            let parts = exec.map_chunks(trial.cells.len(), CHUNK, |r| -> Result<Vec<_>> {
                let mut out = Vec::new();
                for &t in &trial.cells[r] {
                    let m = local_symgrad(trial.kind, &mesh.triangle_coords(t))?;
                    let dofs = trial.cell_dofs(t).unwrap();
                    for i in 0..2 * nl {
                        for j in 0..2 * nl {
                            out.push(((i / nl) * n + dofs[i % nl], (j / nl) * n + dofs[j % nl], coef * m.at(i, j)));
                        }
                    }
                }
                Ok(out)
            });
            flatten(parts)?
        }
        BilinearKind::DivPressure => {
            if spec.trial != FieldId::U || spec.test != FieldId::P || comps != 2 {
                return Err(Error::Form("div_pressure pairs the vector velocity (trial) with the pressure (test)".into()));
            }
            let n = trial.n_dofs;
            let nl = trial.kind.n_local();
            let parts = exec.map_chunks(trial.cells.len(), CHUNK, |r| -> Result<Vec<_>> {
                let mut out = Vec::new();
                for &t in &trial.cells[r] {
                    let m = local_div(trial.kind, test.kind, &mesh.triangle_coords(t))?;
                    let vd = trial.cell_dofs(t).unwrap();
                    let pd = test.cell_dofs(t).unwrap();
                    for (b, &db) in pd.iter().enumerate() {
                        for j in 0..2 * nl {
                            out.push((db, (j / nl) * n + vd[j % nl], coef * m.at(b, j)));
                        }
                    }
                }
                Ok(out)
            });
            flatten(parts)?
        }
    };
    SparseMatrix::from_triplets(nrows, ncols, &triplets)
}

fn flatten<T>(parts: Vec<Result<Vec<T>>>) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Maps a coefficient-space block into global triplets; constrained rows or
/// columns are dropped.
pub fn scatter_matrix(block: &SparseMatrix, rows: &[Slot], cols: &[Slot], scale: f64, out: &mut Vec<(usize, usize, f64)>) {
    for i in 0..block.nrows {
        let Some(gi) = rows[i].index() else { continue };
        for (j, v) in block.row(i) {
            if let Some(gj) = cols[j].index() {
                out.push((gi, gj, scale * v));
            }
        }
    }
}

/// Adds a coefficient-space load vector into the global right-hand side.
pub fn scatter_vector(v: &[f64], rows: &[Slot], out: &mut [f64]) {
    for (x, s) in v.iter().zip(rows) {
        if let Some(g) = s.index() {
            out[g] += x;
        }
    }
}

/// Gathers a field's free coefficients from a global solution vector;
/// constrained entries are left untouched.
pub fn gather(x: &[f64], slots: &[Slot], out: &mut [f64]) {
    for (o, s) in out.iter_mut().zip(slots) {
        if let Some(g) = s.index() {
            *o = x[g];
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadKind {
    /// `(f, v)` over the test field's strips; the integrand receives the strip.
    Volume,
    /// `(g, v)` over boundary edges of one side inside the test region; the
    /// integrand receives the strip of the owning triangle.
    Boundary(Side),
    /// `(j, v)` over the interface with the given tag index; the integrand
    /// receives the tag.
    Interface(usize),
    /// `(g, q)` against the pressure space; the integrand's first component
    /// is used.
    MassSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadSpec {
    pub kind: LoadKind,
    pub test: FieldId,
}

/// Assembles a load vector in the test field's coefficient numbering.
pub fn assemble_linear<F>(spec: &LoadSpec, layout: &DofLayout, t: f64, f: F, exec: Exec) -> Result<Vec<f64>>
where
    F: Fn(f64, [f64; 2], usize) -> [f64; 2] + Sync + Send,
{
    if !layout.has_field(spec.test) {
        return Err(Error::Form(format!("layout has no field {}", spec.test.name())));
    }
    if matches!(spec.kind, LoadKind::MassSource) != (spec.test == FieldId::P) {
        return Err(Error::Form("mass_source_load is tested against the pressure space only".into()));
    }
    let space = layout.space(spec.test);
    let comps = layout.field_components(spec.test);
    let n = space.n_dofs;
    let mesh = &layout.mesh;
    let nl = space.kind.n_local();
    let mut out = vec![0.0; comps * n];

    match spec.kind {
        LoadKind::Volume | LoadKind::MassSource => {
            let rule = quadrature(ASSEMBLY_DEGREE)?;
            let table = ShapeTable::new(space.kind, &rule.points);
            let parts = exec.map_chunks(space.cells.len(), CHUNK, |r| -> Result<Vec<(usize, f64)>> {
                let mut loc = Vec::with_capacity(r.len() * comps * nl);
                for &tri in &space.cells[r] {
                    let el = element_data(&mesh.triangle_coords(tri), rule)?;
                    let strip = mesh.triangles[tri].strip;
                    let mut acc = [[0.0; 6]; 2];
                    for (q, &w) in el.weights.iter().enumerate() {
                        let val = f(t, el.map.point(&rule.points[q]), strip);
                        let phi = table.values(q);
                        for c in 0..comps {
                            for a in 0..nl {
                                acc[c][a] += w * val[c] * phi[a];
                            }
                        }
                    }
                    let dofs = space.cell_dofs(tri).unwrap();
                    for c in 0..comps {
                        for a in 0..nl {
                            loc.push((c * n + dofs[a], acc[c][a]));
                        }
                    }
                }
                Ok(loc)
            });
            for (i, v) in flatten(parts)? {
                out[i] += v;
            }
        }
        LoadKind::Boundary(side) => {
            let edges: Vec<_> = mesh
                .boundary_edges
                .iter()
                .filter(|e| e.side == side && space.contains(e.triangle))
                .map(|e| (e.nodes, e.triangle))
                .collect();
            edge_load(space, layout, &edges, comps, t, &f, |tri| mesh.triangles[tri].strip, &mut out)?;
        }
        LoadKind::Interface(tag) => {
            if tag >= mesh.spec.interface_tags.len() {
                return Err(Error::UnknownTag(tag.to_string()));
            }
            let edges: Vec<_> = mesh
                .interface_edges
                .iter()
                .filter(|e| e.tag == tag)
                .map(|e| (e.nodes, if space.fluid_side { e.fluid_triangle } else { e.solid_triangle }))
                .collect();
            edge_load(space, layout, &edges, comps, t, &f, |_| tag, &mut out)?;
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn edge_load<F, G>(
    space: &FieldSpace,
    layout: &DofLayout,
    edges: &[([usize; 2], usize)],
    comps: usize,
    t: f64,
    f: &F,
    region: G,
    out: &mut [f64],
) -> Result<()>
where
    F: Fn(f64, [f64; 2], usize) -> [f64; 2],
    G: Fn(usize) -> usize,
{
    let mesh = &layout.mesh;
    let (s, w) = edge_rule(EDGE_DEGREE);
    let n = space.n_dofs;
    let nl = space.kind.n_local();
    let mut phi = vec![0.0; nl];
    for &(nodes, tri) in edges {
        let (a, b) = (mesh.nodes[nodes[0]], mesh.nodes[nodes[1]]);
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        let coords = mesh.triangle_coords(tri);
        let dofs = space.cell_dofs(tri).ok_or(Error::OutsideRegion { field: "load", triangle: tri })?;
        for (&sq, &wq) in s.iter().zip(&w) {
            let x = [a[0] + sq * (b[0] - a[0]), a[1] + sq * (b[1] - a[1])];
            let l = barycentric(&coords, x);
            basis::shape_into(space.kind, &l, &mut phi);
            let val = f(t, x, region(tri));
            for c in 0..comps {
                for k in 0..nl {
                    out[c * n + dofs[k]] += wq * len * val[c] * phi[k];
                }
            }
        }
    }
    Ok(())
}

/// `(f, v) + (G, grad v)` over the test region, for integrands returning
/// `(f, G)` with `G[c][d]` paired with `d(v_c)/dx_d`.
pub fn assemble_functional<F>(test: FieldId, layout: &DofLayout, t: f64, f: F, exec: Exec) -> Result<Vec<f64>>
where
    F: Fn(f64, [f64; 2], usize) -> ([f64; 2], [[f64; 2]; 2]) + Sync + Send,
{
    let space = layout.space(test);
    let comps = layout.field_components(test);
    let n = space.n_dofs;
    let nl = space.kind.n_local();
    let mesh = &layout.mesh;
    let rule = quadrature(ASSEMBLY_DEGREE)?;
    let table = ShapeTable::new(space.kind, &rule.points);
    let parts = exec.map_chunks(space.cells.len(), CHUNK, |r| -> Result<Vec<(usize, f64)>> {
        let mut loc = Vec::with_capacity(r.len() * comps * nl);
        for &tri in &space.cells[r] {
            let el = element_data(&mesh.triangle_coords(tri), rule)?;
            let strip = mesh.triangles[tri].strip;
            let mut acc = [[0.0; 6]; 2];
            for (q, &w) in el.weights.iter().enumerate() {
                let (val, grad) = f(t, el.map.point(&rule.points[q]), strip);
                let phi = table.values(q);
                let g = physical_grads(&table, q, &el.map);
                for c in 0..comps {
                    for a in 0..nl {
                        acc[c][a] += w * (val[c] * phi[a] + grad[c][0] * g[a][0] + grad[c][1] * g[a][1]);
                    }
                }
            }
            let dofs = space.cell_dofs(tri).unwrap();
            for c in 0..comps {
                for a in 0..nl {
                    loc.push((c * n + dofs[a], acc[c][a]));
                }
            }
        }
        Ok(loc)
    });
    let mut out = vec![0.0; comps * n];
    for (i, v) in flatten(parts)? {
        out[i] += v;
    }
    Ok(out)
}

/// `(div u_h, q)` for every pressure basis function `q`.
pub fn divergence_residual(u: &FEField, exec: Exec) -> Result<Vec<f64>> {
    if u.field != FieldId::U {
        return Err(Error::Form("divergence residual needs the fluid velocity".into()));
    }
    let b = assemble_bilinear(&FormSpec::new(BilinearKind::DivPressure, FieldId::U, FieldId::P), &u.layout, exec)?;
    Ok(b.mul_vec(&u.coeffs))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::dofspace::{build_layout, interpolate};
    use crate::mesh::build_structured_mesh;
    use crate::mesh::tests::channel;

    const UNIT: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

    fn layout(kind: ElementKind) -> Arc<DofLayout> {
        let mesh = Arc::new(build_structured_mesh(&channel(false), 4, &[1, 2, 1]).unwrap());
        Arc::new(build_layout(mesh, kind, Some(ElementKind::P1), kind, 2).unwrap())
    }

    #[test]
    fn p1_stiffness_on_unit_triangle() {
        let k = local_grad_grad(ElementKind::P1, &UNIT).unwrap();
        let expect = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((k.at(i, j) - expect[i][j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn p1_mass_matrix() {
        let c = [[0.1, 0.2], [1.4, 0.5], [0.3, 1.1]];
        let area = 0.5 * ((1.3) * (0.9) - (0.2) * (0.3));
        let m = local_mass(ElementKind::P1, &c).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let e = area / 12.0 * if i == j { 2.0 } else { 1.0 };
                assert!((m.at(i, j) - e).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn rigid_rotation_has_zero_strain_energy() {
        for kind in [ElementKind::P1B, ElementKind::P2] {
            let l = layout(kind);
            let k = assemble_bilinear(&FormSpec::new(BilinearKind::SymGradSymGrad, FieldId::U, FieldId::U), &l, Exec::Sequential).unwrap();
            let u = interpolate(&l, FieldId::U, 0.0, |_, x, _| [-x[1], x[0]]);
            assert!(k.quadratic_form(&u.coeffs).abs() <= 1e-13);
        }
    }

    #[test]
    fn blocks_are_symmetric_and_annihilate_constants() {
        let l = layout(ElementKind::P2);
        for (kind, field) in [
            (BilinearKind::GradGrad, FieldId::Eta),
            (BilinearKind::Mass, FieldId::W),
            (BilinearKind::SymGradSymGrad, FieldId::U),
            (BilinearKind::GradGrad, FieldId::U),
        ] {
            let a = assemble_bilinear(&FormSpec::new(kind, field, field), &l, Exec::Parallel).unwrap();
            assert!(a.max_asymmetry() <= 1e-13, "{kind:?}");
            if kind != BilinearKind::Mass {
                let ones = vec![1.0; a.ncols];
                assert!(a.mul_vec(&ones).iter().all(|v| v.abs() < 1e-13));
            }
        }
    }

    #[test]
    fn sequential_and_parallel_assembly_agree_bitwise() {
        let l = layout(ElementKind::P1B);
        let spec = FormSpec::new(BilinearKind::SymGradSymGrad, FieldId::U, FieldId::U);
        let a = assemble_bilinear(&spec, &l, Exec::Sequential).unwrap();
        let b = assemble_bilinear(&spec, &l, Exec::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn incompatible_forms_rejected() {
        let l = layout(ElementKind::P1B);
        assert!(assemble_bilinear(&FormSpec::new(BilinearKind::Mass, FieldId::U, FieldId::W), &l, Exec::Sequential).is_err());
        assert!(assemble_bilinear(&FormSpec::new(BilinearKind::DivPressure, FieldId::W, FieldId::P), &l, Exec::Sequential).is_err());
        let spec = LoadSpec { kind: LoadKind::MassSource, test: FieldId::U };
        assert!(assemble_linear(&spec, &l, 0.0, |_, _, _| [1.0, 0.0], Exec::Sequential).is_err());
    }

    #[test]
    fn volume_loads() {
        let l = layout(ElementKind::P1B);
        let spec = LoadSpec { kind: LoadKind::Volume, test: FieldId::U };
        let z = assemble_linear(&spec, &l, 0.0, |_, _, _| [0.0, 0.0], Exec::Sequential).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));

        // single triangle, P1: each vertex receives area/3
        let mesh = Arc::new(build_structured_mesh(&crate::mesh::tests::unit_square(crate::mesh::StripRole::Heat), 1, &[1]).unwrap());
        let l1 = Arc::new(build_layout(mesh, ElementKind::P1, None, ElementKind::P1, 1).unwrap());
        let v = assemble_linear(&LoadSpec { kind: LoadKind::Volume, test: FieldId::U }, &l1, 0.0, |_, _, _| [1.0, 0.0], Exec::Sequential).unwrap();
        let t0 = l1.fluid.cell_dofs(0).unwrap().to_vec();
        let t1 = l1.fluid.cell_dofs(1).unwrap().to_vec();
        // node 0 and node 3 (ur) are shared by both triangles
        for d in 0..4 {
            let share = t0.contains(&d) as usize + t1.contains(&d) as usize;
            assert!((v[d] - share as f64 * 0.5 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn boundary_load_on_edge() {
        let mesh = Arc::new(build_structured_mesh(&crate::mesh::tests::unit_square(crate::mesh::StripRole::Heat), 1, &[1]).unwrap());
        let l1 = Arc::new(build_layout(mesh, ElementKind::P1, None, ElementKind::P1, 1).unwrap());
        let spec = LoadSpec { kind: LoadKind::Boundary(Side::Bottom), test: FieldId::U };
        let v = assemble_linear(&spec, &l1, 0.0, |_, _, _| [1.0, 0.0], Exec::Sequential).unwrap();
        let (a, b) = (l1.fluid.dof_of(&crate::dofspace::DofEntity::Vertex(0)).unwrap(), l1.fluid.dof_of(&crate::dofspace::DofEntity::Vertex(1)).unwrap());
        assert!((v[a] - 0.5).abs() < 1e-15 && (v[b] - 0.5).abs() < 1e-15);
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn divergence_residuals() {
        let l = layout(ElementKind::P1B);
        let c = interpolate(&l, FieldId::U, 0.0, |_, _, _| [1.0, 2.0]);
        assert!(divergence_residual(&c, Exec::Sequential).unwrap().iter().all(|v| v.abs() < 1e-14));
        let free = interpolate(&l, FieldId::U, 0.0, |_, x, _| [x[0], -x[1]]);
        assert!(divergence_residual(&free, Exec::Sequential).unwrap().iter().all(|v| v.abs() < 1e-14));
        let stretch = interpolate(&l, FieldId::U, 0.0, |_, x, _| [x[0], 0.0]);
        let r = divergence_residual(&stretch, Exec::Sequential).unwrap();
        let ones = assemble_linear(&LoadSpec { kind: LoadKind::MassSource, test: FieldId::P }, &l, 0.0, |_, _, _| [1.0, 0.0], Exec::Sequential).unwrap();
        for (a, b) in r.iter().zip(&ones) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
