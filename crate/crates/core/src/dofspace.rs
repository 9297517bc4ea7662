//! Global unknown numbering for the coupled fields `(eta, w, u, p)`.
//!
//! `eta` and `w` share one space on the solid-side strips, `u` lives on the
//! fluid-side strips and `p` (P1, vector problems only) on the fluid strips.
//! The interface condition `w = u` on the interfaces is imposed by aliasing:
//! every solid DOF on an interface reuses the unknown of the fluid DOF at the
//! same mesh entity. Bubbles have no trace and are never aliased. Periodic
//! identification is applied while numbering the spaces, and DOFs on
//! `dirichlet_zero` sides are removed from the unknown set.
//!
//! Vector coefficients are stored component-blocked: index `c * n + d`.

use std::collections::{HashMap, HashSet};
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::basis::{self, AffineMap, ElementKind, P2_EDGES};
use crate::error::{Error, Result};
use crate::mesh::{BoundaryCondition, Mesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DofEntity {
    Vertex(usize),
    Edge(usize, usize),
    Bubble(usize),
}

/// A scalar Lagrange space on one side (fluid or solid) of the interfaces.
#[derive(Debug, Clone)]
pub struct FieldSpace {
    pub kind: ElementKind,
    pub fluid_side: bool,
    /// Scalar DOFs after periodic identification.
    pub n_dofs: usize,
    /// Scalar DOFs the space would have without periodic identification.
    pub raw_dofs: usize,
    /// Triangles of the region, ascending.
    pub cells: Vec<usize>,
    cell_of: Vec<Option<usize>>,
    cell_dofs: Vec<usize>,
    pub entities: Vec<DofEntity>,
    pub points: Vec<[f64; 2]>,
    pub dof_strip: Vec<usize>,
    index: HashMap<DofEntity, usize>,
    /// Scalar DOFs on `dirichlet_zero` boundary sides.
    pub dirichlet: Vec<usize>,
}

fn local_entities(mesh: &Mesh, kind: ElementKind, t: usize, master: &[usize]) -> Vec<DofEntity> {
    let n = mesh.triangles[t].nodes.map(|v| master[v]);
    let mut out: Vec<DofEntity> = n.iter().map(|&v| DofEntity::Vertex(v)).collect();
    match kind {
        ElementKind::P1 => {}
        ElementKind::P1B => out.push(DofEntity::Bubble(t)),
        ElementKind::P2 => {
            for &(i, j) in &P2_EDGES {
                out.push(DofEntity::Edge(n[i].min(n[j]), n[i].max(n[j])));
            }
        }
    }
    out
}

fn edge_entities(kind: ElementKind, a: usize, b: usize) -> Vec<DofEntity> {
    let mut out = vec![DofEntity::Vertex(a), DofEntity::Vertex(b)];
    if kind == ElementKind::P2 {
        out.push(DofEntity::Edge(a.min(b), a.max(b)));
    }
    out
}

impl FieldSpace {
    pub fn new(mesh: &Mesh, kind: ElementKind, fluid_side: bool) -> Self {
        let master = mesh.periodic_master();
        let identity: Vec<usize> = (0..mesh.nodes.len()).collect();
        let nl = kind.n_local();
        let cells: Vec<usize> = (0..mesh.triangles.len())
            .filter(|&t| mesh.role(t).is_fluid_side() == fluid_side)
            .collect();
        let mut cell_of = vec![None; mesh.triangles.len()];
        let mut cell_dofs = Vec::with_capacity(cells.len() * nl);
        let mut index = HashMap::new();
        let mut entities = Vec::new();
        let mut points = Vec::new();
        let mut dof_strip = Vec::new();
        let mut raw = HashSet::new();
        for (c, &t) in cells.iter().enumerate() {
            cell_of[t] = Some(c);
            let coords = mesh.triangle_coords(t);
            for e in local_entities(mesh, kind, t, &identity) {
                raw.insert(e);
            }
            for (k, e) in local_entities(mesh, kind, t, &master).into_iter().enumerate() {
                let next = entities.len();
                let d = *index.entry(e).or_insert(next);
                if d == next {
                    entities.push(e);
                    points.push(local_point(&coords, k));
                    dof_strip.push(mesh.triangles[t].strip);
                }
                cell_dofs.push(d);
            }
        }
        let mut dirichlet: Vec<usize> = mesh
            .boundary_edges
            .iter()
            .filter(|e| mesh.spec.boundary.get(e.side) == BoundaryCondition::DirichletZero)
            .filter(|e| cell_of[e.triangle].is_some())
            .flat_map(|e| edge_entities(kind, master[e.nodes[0]], master[e.nodes[1]]))
            .map(|e| index[&e])
            .collect();
        dirichlet.sort_unstable();
        dirichlet.dedup();
        Self {
            kind,
            fluid_side,
            n_dofs: entities.len(),
            raw_dofs: raw.len(),
            cells,
            cell_of,
            cell_dofs,
            entities,
            points,
            dof_strip,
            index,
            dirichlet,
        }
    }

    /// Global scalar DOFs of triangle `t`, or `None` outside the region.
    pub fn cell_dofs(&self, t: usize) -> Option<&[usize]> {
        let n = self.kind.n_local();
        self.cell_of[t].map(|c| &self.cell_dofs[c * n..(c + 1) * n])
    }

    pub fn contains(&self, t: usize) -> bool {
        self.cell_of[t].is_some()
    }

    pub fn dof_of(&self, e: &DofEntity) -> Option<usize> {
        self.index.get(e).copied()
    }

    /// Scalar DOFs carrying the trace on interface `tag`, sorted by x.
    pub fn interface_dofs(&self, mesh: &Mesh, tag: usize) -> Vec<usize> {
        let master = mesh.periodic_master();
        let mut dofs: Vec<usize> = mesh
            .interface_edges
            .iter()
            .filter(|e| e.tag == tag)
            .flat_map(|e| edge_entities(self.kind, master[e.nodes[0]], master[e.nodes[1]]))
            .filter_map(|e| self.dof_of(&e))
            .collect();
        dofs.sort_unstable();
        dofs.dedup();
        dofs.sort_by(|&a, &b| self.points[a][0].total_cmp(&self.points[b][0]));
        dofs
    }
}

fn local_point(c: &[[f64; 2]; 3], k: usize) -> [f64; 2] {
    match k {
        0..=2 => c[k],
        _ => {
            if let Some(&(i, j)) = P2_EDGES.get(k - 3) {
                [0.5 * (c[i][0] + c[j][0]), 0.5 * (c[i][1] + c[j][1])]
            } else {
                [(c[0][0] + c[1][0] + c[2][0]) / 3.0, (c[0][1] + c[1][1] + c[2][1]) / 3.0]
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldId {
    Eta,
    W,
    U,
    P,
}

impl FieldId {
    pub fn name(self) -> &'static str {
        match self {
            FieldId::Eta => "eta",
            FieldId::W => "w",
            FieldId::U => "u",
            FieldId::P => "p",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Unknown(usize),
    Constrained,
}

impl Slot {
    pub fn index(self) -> Option<usize> {
        match self {
            Slot::Unknown(i) => Some(i),
            Slot::Constrained => None,
        }
    }
}

/// A solid coefficient on an interface paired with its fluid partner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Alias {
    pub solid: usize,
    pub fluid: usize,
    pub tag: usize,
}

#[derive(Debug, Clone)]
pub struct DofLayout {
    pub mesh: Arc<Mesh>,
    pub components: usize,
    pub solid: FieldSpace,
    pub fluid: FieldSpace,
    pub pressure: Option<FieldSpace>,
    pub fluid_slots: Vec<Slot>,
    pub solid_slots: Vec<Slot>,
    pub pressure_slots: Vec<Slot>,
    pub aliases: Vec<Alias>,
    /// Alias index of each solid coefficient.
    pub solid_alias: Vec<Option<usize>>,
    pub fluid_dirichlet: Vec<usize>,
    pub solid_dirichlet: Vec<usize>,
    pub n_fluid: usize,
    pub n_pressure: usize,
    pub n_solid_free: usize,
    pub n_unknowns: usize,
}

/// Bookkeeping identity for the unknown count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LayoutAudit {
    pub raw_total: usize,
    pub aliases: usize,
    pub periodic_slaves: usize,
    pub dirichlet: usize,
    pub unknowns: usize,
}

impl LayoutAudit {
    pub fn consistent(&self) -> bool {
        self.raw_total == self.unknowns + self.aliases + self.periodic_slaves + self.dirichlet
    }
}

fn vector_dirichlet(space: &FieldSpace, comps: usize) -> Vec<usize> {
    (0..comps)
        .flat_map(|c| space.dirichlet.iter().map(move |&d| c * space.n_dofs + d))
        .collect()
}

/// Builds the layout. Allowed `(velocity, pressure, structure)` choices are
/// `(P1B, P1, P1B)` and `(P2, P1, P2)` for two components, `(P1, -, P1)` and
/// `(P2, -, P2)` for one.
pub fn build_layout(
    mesh: Arc<Mesh>,
    velocity: ElementKind,
    pressure: Option<ElementKind>,
    structure: ElementKind,
    components: usize,
) -> Result<DofLayout> {
    use ElementKind::*;
    let ok = matches!(
        (components, velocity, pressure, structure),
        (2, P1B, Some(P1), P1B) | (2, P2, Some(P1), P2) | (1, P1, None, P1) | (1, P2, None, P2)
    );
    if !ok {
        return Err(Error::Elements(format!(
            "({velocity:?}, {pressure:?}, {structure:?}) with {components} component(s) is not a supported trace-compatible pairing"
        )));
    }
    for (s, role) in mesh.spec.strip_roles.iter().enumerate() {
        let vector_role = matches!(role, crate::mesh::StripRole::Fluid | crate::mesh::StripRole::Solid);
        if vector_role != (components == 2) {
            return Err(Error::Elements(format!("strip {s} ({role:?}) does not match {components} component(s)")));
        }
    }

    let solid = FieldSpace::new(&mesh, structure, false);
    let fluid = FieldSpace::new(&mesh, velocity, true);
    let pressure = pressure.map(|k| FieldSpace::new(&mesh, k, true));

    let fluid_dirichlet = vector_dirichlet(&fluid, components);
    let solid_dirichlet = vector_dirichlet(&solid, components);

    let mut fluid_slots = vec![Slot::Constrained; components * fluid.n_dofs];
    let mut n_fluid = 0;
    let fd: HashSet<usize> = fluid_dirichlet.iter().copied().collect();
    for (i, slot) in fluid_slots.iter_mut().enumerate() {
        if !fd.contains(&i) {
            *slot = Slot::Unknown(n_fluid);
            n_fluid += 1;
        }
    }
    let n_pressure = pressure.as_ref().map_or(0, |p| p.n_dofs);
    let pressure_slots = (0..n_pressure).map(|i| Slot::Unknown(n_fluid + i)).collect();

    let sd: HashSet<usize> = solid_dirichlet.iter().copied().collect();
    let mut aliases = Vec::new();
    let mut solid_alias = vec![None; components * solid.n_dofs];
    for tag in 0..mesh.spec.interface_tags.len() {
        for d in solid.interface_dofs(&mesh, tag) {
            let partner = fluid
                .dof_of(&solid.entities[d])
                .expect("fluid and solid spaces share interface entities");
            for c in 0..components {
                let (s, f) = (c * solid.n_dofs + d, c * fluid.n_dofs + partner);
                if sd.contains(&s) || solid_alias[s].is_some() {
                    continue;
                }
                solid_alias[s] = Some(aliases.len());
                aliases.push(Alias { solid: s, fluid: f, tag });
            }
        }
    }

    let mut n_solid_free = 0;
    let offset = n_fluid + n_pressure;
    let solid_slots = (0..components * solid.n_dofs)
        .map(|i| {
            if let Some(a) = solid_alias[i] {
                fluid_slots[aliases[a].fluid]
            } else if sd.contains(&i) {
                Slot::Constrained
            } else {
                n_solid_free += 1;
                Slot::Unknown(offset + n_solid_free - 1)
            }
        })
        .collect();

    Ok(DofLayout {
        mesh,
        components,
        solid,
        fluid,
        pressure,
        fluid_slots,
        solid_slots,
        pressure_slots,
        aliases,
        solid_alias,
        fluid_dirichlet,
        solid_dirichlet,
        n_fluid,
        n_pressure,
        n_solid_free,
        n_unknowns: offset + n_solid_free,
    })
}

impl DofLayout {
    pub fn space(&self, field: FieldId) -> &FieldSpace {
        match field {
            FieldId::Eta | FieldId::W => &self.solid,
            FieldId::U => &self.fluid,
            FieldId::P => self.pressure.as_ref().expect("layout has no pressure space"),
        }
    }

    pub fn has_field(&self, field: FieldId) -> bool {
        field != FieldId::P || self.pressure.is_some()
    }

    pub fn field_components(&self, field: FieldId) -> usize {
        if field == FieldId::P {
            1
        } else {
            self.components
        }
    }

    pub fn field_len(&self, field: FieldId) -> usize {
        self.field_components(field) * self.space(field).n_dofs
    }

    pub fn slots(&self, field: FieldId) -> &[Slot] {
        match field {
            FieldId::Eta | FieldId::W => &self.solid_slots,
            FieldId::U => &self.fluid_slots,
            FieldId::P => &self.pressure_slots,
        }
    }

    pub fn audit(&self) -> LayoutAudit {
        let c = self.components;
        let p = self.pressure.as_ref();
        let raw_total = c * (self.solid.raw_dofs + self.fluid.raw_dofs) + p.map_or(0, |p| p.raw_dofs);
        let merged = c * (self.solid.n_dofs + self.fluid.n_dofs) + p.map_or(0, |p| p.n_dofs);
        LayoutAudit {
            raw_total,
            aliases: self.aliases.len(),
            periodic_slaves: raw_total - merged,
            dirichlet: self.fluid_dirichlet.len() + self.solid_dirichlet.len(),
            unknowns: self.n_unknowns,
        }
    }

    /// Solid coefficients fixed to their fluid partners on the interfaces.
    pub fn copy_interface_from_fluid(&self, solid: &mut [f64], fluid: &[f64]) {
        for a in &self.aliases {
            solid[a.solid] = fluid[a.fluid];
        }
    }
}

/// Values and physical gradients of a (possibly vector) field at a point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FieldValue {
    pub value: [f64; 2],
    /// `grad[c][d] = d(value[c]) / dx_d`.
    pub grad: [[f64; 2]; 2],
}

#[derive(Debug, Clone)]
pub struct FEField {
    pub layout: Arc<DofLayout>,
    pub field: FieldId,
    pub coeffs: Vec<f64>,
}

impl FEField {
    pub fn zeros(layout: Arc<DofLayout>, field: FieldId) -> Self {
        let n = layout.field_len(field);
        Self { layout, field, coeffs: vec![0.0; n] }
    }

    pub fn from_coeffs(layout: Arc<DofLayout>, field: FieldId, coeffs: Vec<f64>) -> Result<Self> {
        let n = layout.field_len(field);
        if coeffs.len() != n {
            return Err(Error::Dimension { expected: n, got: coeffs.len() });
        }
        Ok(Self { layout, field, coeffs })
    }

    pub fn components(&self) -> usize {
        self.layout.field_components(self.field)
    }

    pub fn space(&self) -> &FieldSpace {
        self.layout.space(self.field)
    }
}

/// Nodal interpolation of `f(t, x, strip)`; bubble coefficients are zero.
pub fn interpolate<F>(layout: &Arc<DofLayout>, field: FieldId, t: f64, f: F) -> FEField
where
    F: Fn(f64, [f64; 2], usize) -> [f64; 2],
{
    let space = layout.space(field);
    let comps = layout.field_components(field);
    let n = space.n_dofs;
    let mut coeffs = vec![0.0; comps * n];
    for d in 0..n {
        if matches!(space.entities[d], DofEntity::Bubble(_)) {
            continue;
        }
        let v = f(t, space.points[d], space.dof_strip[d]);
        for c in 0..comps {
            coeffs[c * n + d] = v[c];
        }
    }
    FEField { layout: layout.clone(), field, coeffs }
}

/// Evaluates a field on one of its triangles at a barycentric point.
pub fn eval_field(field: &FEField, triangle: usize, l: [f64; 3]) -> Result<FieldValue> {
    let space = field.space();
    let dofs = space.cell_dofs(triangle).ok_or(Error::OutsideRegion {
        field: field.field.name(),
        triangle,
    })?;
    let vals = basis::eval_shape(space.kind, l)?;
    let grads = basis::eval_grad(space.kind, l)?;
    let map = AffineMap::new(&field.layout.mesh.triangle_coords(triangle))?;
    let n = space.n_dofs;
    let mut out = FieldValue::default();
    for c in 0..field.components() {
        for (k, &d) in dofs.iter().enumerate() {
            let a = field.coeffs[c * n + d];
            let g = map.grad(grads[k]);
            out.value[c] += a * vals[k];
            out.grad[c][0] += a * g[0];
            out.grad[c][1] += a * g[1];
        }
    }
    Ok(out)
}

/// Trace values on interface `tag`, ordered by x (vertices and, for P2,
/// edge midpoints interleaved).
pub fn trace_values(field: &FEField, tag: &str) -> Result<Vec<[f64; 2]>> {
    let mesh = &field.layout.mesh;
    let t = mesh.spec.tag_index(tag)?;
    let space = field.space();
    let n = space.n_dofs;
    Ok(space
        .interface_dofs(mesh, t)
        .into_iter()
        .map(|d| {
            let mut v = [0.0; 2];
            for (c, vc) in v.iter_mut().enumerate().take(field.components()) {
                *vc = field.coeffs[c * n + d];
            }
            v
        })
        .collect())
}

/// Writes `node,x,y,c0[,c1]` rows for the vertex DOFs of a field.
pub fn write_field_csv<W: Write>(field: &FEField, mut w: W) -> Result<()> {
    let space = field.space();
    let comps = field.components();
    write!(w, "node,x,y")?;
    for c in 0..comps {
        write!(w, ",c{c}")?;
    }
    writeln!(w)?;
    for (d, e) in space.entities.iter().enumerate() {
        if let DofEntity::Vertex(node) = e {
            let p = space.points[d];
            write!(w, "{node},{:e},{:e}", p[0], p[1])?;
            for c in 0..comps {
                write!(w, ",{:e}", field.coeffs[c * space.n_dofs + d])?;
            }
            writeln!(w)?;
        }
    }
    Ok(())
}
