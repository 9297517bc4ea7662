//! Structured, interface-fitted triangulations of stacked rectangular strips.
//!
//! The domain `[x_min, x_max] x [y_0, y_m]` is cut into horizontal strips at
//! the given y-levels. Every strip is a fluid-side (fluid, heat) or
//! solid-side (solid, wave) region and adjacent strips alternate, so every
//! internal level is a coupling interface. Grid lines pass through every
//! level, which makes the interfaces exact mesh lines.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StripRole {
    Fluid,
    Solid,
    Heat,
    Wave,
}

impl StripRole {
    /// Fluid and heat strips carry the `u` unknown; solid and wave strips
    /// carry `eta` and `w`.
    pub fn is_fluid_side(self) -> bool {
        matches!(self, StripRole::Fluid | StripRole::Heat)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCondition {
    NeumannTraction,
    DirichletZero,
    PeriodicX,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Bottom, Side::Top];

    /// Outward unit normal of the side.
    pub fn normal(self) -> [f64; 2] {
        match self {
            Side::Left => [-1.0, 0.0],
            Side::Right => [1.0, 0.0],
            Side::Bottom => [0.0, -1.0],
            Side::Top => [0.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundarySpec {
    pub left: BoundaryCondition,
    pub right: BoundaryCondition,
    pub bottom: BoundaryCondition,
    pub top: BoundaryCondition,
}

impl BoundarySpec {
    pub fn uniform(bc: BoundaryCondition) -> Self {
        Self {
            left: bc,
            right: bc,
            bottom: bc,
            top: bc,
        }
    }

    pub fn get(&self, side: Side) -> BoundaryCondition {
        match side {
            Side::Left => self.left,
            Side::Right => self.right,
            Side::Bottom => self.bottom,
            Side::Top => self.top,
        }
    }

    pub fn is_periodic(&self) -> bool {
        self.left == BoundaryCondition::PeriodicX
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometrySpec {
    pub x_min: f64,
    pub x_max: f64,
    /// Ascending y-coordinates delimiting the strips.
    pub y_levels: Vec<f64>,
    pub strip_roles: Vec<StripRole>,
    pub boundary: BoundarySpec,
    /// One tag per internal y-level.
    pub interface_tags: Vec<String>,
}

impl GeometrySpec {
    pub fn n_strips(&self) -> usize {
        self.strip_roles.len()
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_levels[self.y_levels.len() - 1] - self.y_levels[0]
    }

    pub fn strip_height(&self, strip: usize) -> f64 {
        self.y_levels[strip + 1] - self.y_levels[strip]
    }

    pub fn tag_index(&self, tag: &str) -> Result<usize> {
        self.interface_tags
            .iter()
            .position(|t| t == tag)
            .ok_or_else(|| Error::UnknownTag(tag.to_string()))
    }

    /// `(fluid-side strip, solid-side strip, normal)` of interface `tag`; the
    /// normal points into the solid side.
    pub fn interface_strips(&self, tag: usize) -> (usize, usize, [f64; 2]) {
        if self.strip_roles[tag].is_fluid_side() {
            (tag, tag + 1, [0.0, 1.0])
        } else {
            (tag + 1, tag, [0.0, -1.0])
        }
    }

    /// Strip containing height `y` (levels belong to the strip above).
    pub fn strip_at(&self, y: f64) -> usize {
        let n = self.n_strips();
        (1..n).take_while(|&s| y >= self.y_levels[s]).last().unwrap_or(0)
    }

    pub fn check(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Geometry(msg));
        if !(self.x_max > self.x_min) {
            return bad(format!("x_max {} must exceed x_min {}", self.x_max, self.x_min));
        }
        if self.y_levels.len() < 2 {
            return bad("need at least two y-levels".into());
        }
        if self.y_levels.windows(2).any(|w| !(w[1] > w[0])) {
            return bad(format!("y_levels not strictly increasing: {:?}", self.y_levels));
        }
        if self.strip_roles.len() != self.y_levels.len() - 1 {
            return bad(format!(
                "{} strip roles for {} strips",
                self.strip_roles.len(),
                self.y_levels.len() - 1
            ));
        }
        if self.interface_tags.len() != self.y_levels.len() - 2 {
            return bad(format!(
                "{} interface tags for {} internal levels",
                self.interface_tags.len(),
                self.y_levels.len() - 2
            ));
        }
        for (i, w) in self.strip_roles.windows(2).enumerate() {
            if w[0].is_fluid_side() == w[1].is_fluid_side() {
                return bad(format!("strips {i} and {} are on the same side of level {}", i + 1, i + 1));
            }
        }
        let per = BoundaryCondition::PeriodicX;
        if (self.boundary.left == per) != (self.boundary.right == per) {
            return bad("periodic_x must apply to both vertical sides or neither".into());
        }
        if self.boundary.top == per || self.boundary.bottom == per {
            return bad("periodic_x is only available on the vertical sides".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triangle {
    /// Counterclockwise node indices.
    pub nodes: [usize; 3],
    pub strip: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub side: Side,
    /// The triangle owning the edge.
    pub triangle: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceEdge {
    pub nodes: [usize; 2],
    pub tag: usize,
    /// Unit normal pointing from the fluid strip into the solid strip.
    pub normal: [f64; 2],
    pub fluid_triangle: usize,
    pub solid_triangle: usize,
}

/// Tensor grid the mesh was cut from; used for point location.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Row index of every y-level in `ys`.
    pub level_rows: Vec<usize>,
    /// Strip of every cell row.
    pub row_strip: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub spec: GeometrySpec,
    pub nodes: Vec<[f64; 2]>,
    pub triangles: Vec<Triangle>,
    pub boundary_edges: Vec<BoundaryEdge>,
    pub interface_edges: Vec<InterfaceEdge>,
    /// `(master, slave)` pairs: left-side node and the right-side node at the
    /// same height.
    pub periodic_pairs: Vec<(usize, usize)>,
    /// Maximum edge length.
    pub h: f64,
    pub grid: Grid,
}

/// Builds the structured mesh: `nx` uniform columns, strip `s` split into
/// `ny_per_strip[s]` uniform rows, each cell cut along its lower-left to
/// upper-right diagonal.
pub fn build_structured_mesh(spec: &GeometrySpec, nx: usize, ny_per_strip: &[usize]) -> Result<Mesh> {
    spec.check()?;
    if nx == 0 {
        return Err(Error::Mesh("nx must be at least 1".into()));
    }
    if ny_per_strip.len() != spec.n_strips() {
        return Err(Error::Mesh(format!(
            "{} row counts for {} strips",
            ny_per_strip.len(),
            spec.n_strips()
        )));
    }
    if let Some(s) = ny_per_strip.iter().position(|&n| n == 0) {
        return Err(Error::Mesh(format!("strip {s} has no rows")));
    }
    if spec.boundary.is_periodic() && nx < 3 {
        return Err(Error::Mesh("periodic meshes need nx >= 3".into()));
    }

    let width = spec.width();
    let dx = width / nx as f64;
    let xs: Vec<f64> = (0..=nx)
        .map(|i| if i == nx { spec.x_max } else { spec.x_min + width * i as f64 / nx as f64 })
        .collect();

    let mut ys = vec![spec.y_levels[0]];
    let mut level_rows = vec![0];
    let mut row_strip = Vec::new();
    let mut h: f64 = 0.0;
    for (s, &ny) in ny_per_strip.iter().enumerate() {
        let (y0, y1) = (spec.y_levels[s], spec.y_levels[s + 1]);
        for j in 1..=ny {
            ys.push(if j == ny { y1 } else { y0 + (y1 - y0) * j as f64 / ny as f64 });
            row_strip.push(s);
        }
        level_rows.push(ys.len() - 1);
        let dy = (y1 - y0) / ny as f64;
        h = h.max((dx * dx + dy * dy).sqrt());
    }

    let ncol = nx + 1;
    let node = |i: usize, j: usize| j * ncol + i;
    let mut nodes = Vec::with_capacity(ncol * ys.len());
    for &y in &ys {
        for &x in &xs {
            nodes.push([x, y]);
        }
    }

    let nrows = ys.len() - 1;
    let mut triangles = Vec::with_capacity(2 * nx * nrows);
    for (j, &strip) in row_strip.iter().enumerate() {
        for i in 0..nx {
            let (ll, lr, ur, ul) = (node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1));
            triangles.push(Triangle { nodes: [ll, lr, ur], strip });
            triangles.push(Triangle { nodes: [ll, ur, ul], strip });
        }
    }
    let lower = |i: usize, j: usize| 2 * (j * nx + i);
    let upper = |i: usize, j: usize| 2 * (j * nx + i) + 1;

    let mut boundary_edges = Vec::new();
    for i in 0..nx {
        boundary_edges.push(BoundaryEdge { nodes: [node(i, 0), node(i + 1, 0)], side: Side::Bottom, triangle: lower(i, 0) });
    }
    for i in 0..nx {
        let j = nrows - 1;
        boundary_edges.push(BoundaryEdge { nodes: [node(i + 1, j + 1), node(i, j + 1)], side: Side::Top, triangle: upper(i, j) });
    }
    if !spec.boundary.is_periodic() {
        for j in 0..nrows {
            boundary_edges.push(BoundaryEdge { nodes: [node(0, j + 1), node(0, j)], side: Side::Left, triangle: upper(0, j) });
        }
        for j in 0..nrows {
            boundary_edges.push(BoundaryEdge { nodes: [node(nx, j), node(nx, j + 1)], side: Side::Right, triangle: lower(nx - 1, j) });
        }
    }

    let mut interface_edges = Vec::new();
    for tag in 0..spec.interface_tags.len() {
        let row = level_rows[tag + 1];
        let fluid_below = spec.strip_roles[tag].is_fluid_side();
        let normal = if fluid_below { [0.0, 1.0] } else { [0.0, -1.0] };
        for i in 0..nx {
            let below = upper(i, row - 1);
            let above = lower(i, row);
            let (fluid_triangle, solid_triangle) = if fluid_below { (below, above) } else { (above, below) };
            interface_edges.push(InterfaceEdge {
                nodes: [node(i, row), node(i + 1, row)],
                tag,
                normal,
                fluid_triangle,
                solid_triangle,
            });
        }
    }

    let periodic_pairs = if spec.boundary.is_periodic() {
        (0..ys.len()).map(|j| (node(0, j), node(nx, j))).collect()
    } else {
        Vec::new()
    };

    Ok(Mesh {
        spec: spec.clone(),
        nodes,
        triangles,
        boundary_edges,
        interface_edges,
        periodic_pairs,
        h,
        grid: Grid { nx, xs, ys, level_rows, row_strip },
    })
}

/// Row counts per strip giving cells of height close to `h`.
pub fn rows_for_spacing(spec: &GeometrySpec, h: f64) -> Vec<usize> {
    (0..spec.n_strips())
        .map(|s| ((spec.strip_height(s) / h) - 1e-9).ceil().max(1.0) as usize)
        .collect()
}

/// Mesh with nominal cell size `h` in both directions.
pub fn build_mesh_with_spacing(spec: &GeometrySpec, h: f64) -> Result<Mesh> {
    if !(h > 0.0) {
        return Err(Error::Mesh(format!("mesh spacing must be positive, got {h}")));
    }
    let nx = ((spec.width() / h) - 1e-9).ceil().max(1.0) as usize;
    build_structured_mesh(spec, nx, &rows_for_spacing(spec, h))
}

impl Mesh {
    pub fn triangle_coords(&self, t: usize) -> [[f64; 2]; 3] {
        let n = self.triangles[t].nodes;
        [self.nodes[n[0]], self.nodes[n[1]], self.nodes[n[2]]]
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_coords(t);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn role(&self, t: usize) -> StripRole {
        self.spec.strip_roles[self.triangles[t].strip]
    }

    /// Maps every node to its periodic master (identity without periodicity).
    pub fn periodic_master(&self) -> Vec<usize> {
        let mut master: Vec<usize> = (0..self.nodes.len()).collect();
        for &(m, s) in &self.periodic_pairs {
            master[s] = m;
        }
        master
    }

    /// Finds the triangle containing `p` and its barycentric coordinates.
    /// Points on shared edges resolve to one of the neighbours.
    pub fn locate(&self, p: [f64; 2]) -> Option<(usize, [f64; 3])> {
        let g = &self.grid;
        let eps = 1e-12 * (self.spec.width() + self.spec.height());
        if p[0] < g.xs[0] - eps || p[0] > g.xs[g.nx] + eps {
            return None;
        }
        let ny = g.ys.len() - 1;
        if p[1] < g.ys[0] - eps || p[1] > g.ys[ny] + eps {
            return None;
        }
        let dx = (g.xs[g.nx] - g.xs[0]) / g.nx as f64;
        let i = (((p[0] - g.xs[0]) / dx).floor().max(0.0) as usize).min(g.nx - 1);
        let j = g.ys.partition_point(|&y| y <= p[1]).clamp(1, ny) - 1;
        let sx = (p[0] - g.xs[i]) / (g.xs[i + 1] - g.xs[i]);
        let sy = (p[1] - g.ys[j]) / (g.ys[j + 1] - g.ys[j]);
        let t = 2 * (j * g.nx + i) + usize::from(sy > sx);
        Some((t, barycentric(&self.triangle_coords(t), p)))
    }
}

/// Barycentric coordinates of `p` with respect to triangle `tri`.
pub fn barycentric(tri: &[[f64; 2]; 3], p: [f64; 2]) -> [f64; 3] {
    let [a, b, c] = *tri;
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    let l1 = ((p[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (p[1] - a[1])) / det;
    let l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])) / det;
    [1.0 - l1 - l2, l1, l2]
}

/// Nodes on interface `tag`, sorted by x. With periodicity the right-hand
/// (slave) endpoint is dropped.
pub fn interface_nodes(mesh: &Mesh, tag: &str) -> Result<Vec<usize>> {
    let t = mesh.spec.tag_index(tag)?;
    let row = mesh.grid.level_rows[t + 1];
    let ncol = mesh.grid.nx + 1;
    let last = if mesh.spec.boundary.is_periodic() { mesh.grid.nx } else { ncol };
    Ok((0..last).map(|i| row * ncol + i).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeshReport {
    pub min_area: f64,
    pub max_area: f64,
    /// Smallest interior angle in degrees.
    pub min_angle: f64,
    pub failures: Vec<String>,
}

impl MeshReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Checks orientation, coverage, interface alignment and periodic pairing.
pub fn validate(mesh: &Mesh) -> MeshReport {
    let mut failures = Vec::new();
    let mut min_area = f64::INFINITY;
    let mut max_area: f64 = 0.0;
    let mut min_angle = f64::INFINITY;
    let mut total = 0.0;
    for t in 0..mesh.triangles.len() {
        let area = mesh.signed_area(t);
        if area <= 0.0 {
            failures.push(format!("triangle {t} is not counterclockwise (signed area {area:e})"));
        }
        min_area = min_area.min(area);
        max_area = max_area.max(area);
        total += area;
        let c = mesh.triangle_coords(t);
        for k in 0..3 {
            let (p, q, r) = (c[k], c[(k + 1) % 3], c[(k + 2) % 3]);
            let u = [q[0] - p[0], q[1] - p[1]];
            let v = [r[0] - p[0], r[1] - p[1]];
            let cos = (u[0] * v[0] + u[1] * v[1]) / ((u[0].hypot(u[1])) * (v[0].hypot(v[1])));
            min_angle = min_angle.min(cos.clamp(-1.0, 1.0).acos().to_degrees());
        }
    }
    let expected = mesh.spec.width() * mesh.spec.height();
    if ((total - expected) / expected).abs() > 1e-12 {
        failures.push(format!("triangle areas sum to {total}, domain area is {expected}"));
    }

    let ntag = mesh.spec.interface_tags.len();
    let mut node_strips: Vec<Vec<usize>> = vec![Vec::new(); mesh.nodes.len()];
    for tri in &mesh.triangles {
        for &n in &tri.nodes {
            if !node_strips[n].contains(&tri.strip) {
                node_strips[n].push(tri.strip);
            }
        }
    }
    for (e, edge) in mesh.interface_edges.iter().enumerate() {
        if edge.tag >= ntag {
            failures.push(format!("interface edge {e} has unknown tag {}", edge.tag));
            continue;
        }
        let level = mesh.spec.y_levels[edge.tag + 1];
        for &n in &edge.nodes {
            if (mesh.nodes[n][1] - level).abs() > 1e-14 * (1.0 + level.abs()) {
                failures.push(format!("interface edge {e}: node {n} is off level y={level}"));
            }
            if node_strips[n].len() != 2 {
                failures.push(format!("interface node {n} touches {} strips", node_strips[n].len()));
            }
        }
        let (f, s) = (edge.fluid_triangle, edge.solid_triangle);
        if !mesh.role(f).is_fluid_side() || mesh.role(s).is_fluid_side() {
            failures.push(format!("interface edge {e} is not shared by a fluid-side and a solid-side triangle"));
        }
        for t in [f, s] {
            let tn = mesh.triangles[t].nodes;
            if !edge.nodes.iter().all(|n| tn.contains(n)) {
                failures.push(format!("interface edge {e} does not belong to triangle {t}"));
            }
        }
    }
    for &(m, s) in &mesh.periodic_pairs {
        let (pm, ps) = (mesh.nodes[m], mesh.nodes[s]);
        if pm[1] != ps[1] || pm[0] != mesh.spec.x_min || ps[0] != mesh.spec.x_max {
            failures.push(format!("periodic pair ({m}, {s}) does not match x_min/x_max at equal y"));
        }
    }

    MeshReport { min_area, max_area, min_angle, failures }
}

/// Writes `id,x,y` node rows.
pub fn write_nodes_csv<W: Write>(mesh: &Mesh, mut w: W) -> Result<()> {
    writeln!(w, "id,x,y")?;
    for (i, p) in mesh.nodes.iter().enumerate() {
        writeln!(w, "{i},{:e},{:e}", p[0], p[1])?;
    }
    Ok(())
}

/// Writes `id,n0,n1,n2,strip` triangle rows.
pub fn write_triangles_csv<W: Write>(mesh: &Mesh, mut w: W) -> Result<()> {
    writeln!(w, "id,n0,n1,n2,strip")?;
    for (i, t) in mesh.triangles.iter().enumerate() {
        writeln!(w, "{i},{},{},{},{}", t.nodes[0], t.nodes[1], t.nodes[2], t.strip)?;
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub fn unit_square(role: StripRole) -> GeometrySpec {
        GeometrySpec {
            x_min: 0.0,
            x_max: 1.0,
            y_levels: vec![0.0, 1.0],
            strip_roles: vec![role],
            boundary: BoundarySpec::uniform(BoundaryCondition::NeumannTraction),
            interface_tags: vec![],
        }
    }

    pub fn channel(periodic: bool) -> GeometrySpec {
        let side = if periodic { BoundaryCondition::PeriodicX } else { BoundaryCondition::NeumannTraction };
        GeometrySpec {
            x_min: 0.0,
            x_max: 1.0,
            y_levels: vec![0.0, 0.25, 0.75, 1.0],
            strip_roles: vec![StripRole::Solid, StripRole::Fluid, StripRole::Solid],
            boundary: BoundarySpec {
                left: side,
                right: side,
                bottom: BoundaryCondition::NeumannTraction,
                top: BoundaryCondition::NeumannTraction,
            },
            interface_tags: vec!["gamma2".into(), "gamma1".into()],
        }
    }

    #[test]
    fn smallest_grid() {
        let m = build_structured_mesh(&unit_square(StripRole::Heat), 1, &[1]).unwrap();
        assert_eq!(m.nodes.len(), 4);
        assert_eq!(m.triangles.len(), 2);
        assert!((m.h - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn channel_interfaces_sit_on_levels() {
        let m = build_structured_mesh(&channel(false), 4, &[1, 2, 1]).unwrap();
        let ys: Vec<f64> = m
            .interface_edges
            .iter()
            .flat_map(|e| e.nodes.iter().map(|&n| m.nodes[n][1]))
            .collect();
        assert!(ys.iter().all(|&y| y == 0.25 || y == 0.75));
        assert!(ys.contains(&0.25) && ys.contains(&0.75));
    }

    #[test]
    fn counting_formula() {
        let m = build_structured_mesh(&channel(false), 8, &[2, 4, 2]).unwrap();
        assert_eq!(m.nodes.len(), 9 * 9);
        assert_eq!(m.triangles.len(), 2 * 8 * 8);
    }

    #[test]
    fn rejects_bad_requests() {
        assert!(build_structured_mesh(&channel(false), 0, &[1, 1, 1]).is_err());
        assert!(build_structured_mesh(&channel(false), 2, &[1, 0, 1]).is_err());
        assert!(build_structured_mesh(&channel(false), 2, &[1, 1]).is_err());
        let mut spec = channel(false);
        spec.boundary.left = BoundaryCondition::PeriodicX;
        assert!(build_structured_mesh(&spec, 4, &[1, 1, 1]).is_err());
        let mut spec = channel(false);
        spec.y_levels = vec![0.0, 0.5, 0.5, 1.0];
        assert!(build_structured_mesh(&spec, 4, &[1, 1, 1]).is_err());
    }

    #[test]
    fn interface_node_lists() {
        let m = build_structured_mesh(&channel(true), 4, &[1, 2, 1]).unwrap();
        assert_eq!(interface_nodes(&m, "gamma1").unwrap().len(), 4);
        let m = build_structured_mesh(&channel(false), 4, &[1, 2, 1]).unwrap();
        let nodes = interface_nodes(&m, "gamma1").unwrap();
        assert_eq!(nodes.len(), 5);
        assert!(nodes.windows(2).all(|w| m.nodes[w[0]][0] < m.nodes[w[1]][0]));
        let single = build_structured_mesh(&unit_square(StripRole::Heat), 2, &[2]).unwrap();
        assert!(matches!(interface_nodes(&single, "gamma1"), Err(Error::UnknownTag(_))));
    }

    #[test]
    fn validation_passes_and_flags() {
        let m = build_structured_mesh(&channel(true), 6, &[2, 3, 2]).unwrap();
        let r = validate(&m);
        assert!(r.passed(), "{:?}", r.failures);
        assert!(r.min_area > 0.0);

        let mut flipped = m.clone();
        flipped.triangles[5].nodes.swap(1, 2);
        let r = validate(&flipped);
        assert!(r.failures.iter().any(|f| f.contains("counterclockwise")));

        let mut misaligned = m.clone();
        misaligned.spec.y_levels[2] = 0.7;
        let r = validate(&misaligned);
        assert!(r.failures.iter().any(|f| f.contains("off level")));
    }

    #[test]
    fn refinement_halves_h_exactly() {
        let a = build_structured_mesh(&channel(false), 4, &[1, 2, 1]).unwrap();
        let b = build_structured_mesh(&channel(false), 8, &[2, 4, 2]).unwrap();
        assert_eq!(a.h, 2.0 * b.h);
    }

    #[test]
    fn interface_edges_have_one_triangle_per_side() {
        let m = build_structured_mesh(&channel(false), 5, &[2, 2, 3]).unwrap();
        for e in &m.interface_edges {
            assert!(m.role(e.fluid_triangle).is_fluid_side());
            assert!(!m.role(e.solid_triangle).is_fluid_side());
            let level = m.spec.y_levels[e.tag + 1];
            // normal points away from the fluid strip
            let fc = m.triangle_coords(e.fluid_triangle);
            let cy = (fc[0][1] + fc[1][1] + fc[2][1]) / 3.0;
            assert!((level - cy) * e.normal[1] > 0.0);
        }
    }

    #[test]
    fn locate_recovers_points() {
        let m = build_structured_mesh(&channel(false), 5, &[2, 3, 2]).unwrap();
        for &p in &[[0.13, 0.07], [0.99, 0.5], [0.5, 0.8], [0.0, 0.0], [1.0, 1.0]] {
            let (t, l) = m.locate(p).unwrap();
            assert!(l.iter().all(|&x| x > -1e-12), "{p:?} -> {l:?}");
            let c = m.triangle_coords(t);
            let q = [0, 1].map(|d| l[0] * c[0][d] + l[1] * c[1][d] + l[2] * c[2][d]);
            assert!((q[0] - p[0]).abs() < 1e-14 && (q[1] - p[1]).abs() < 1e-14);
        }
        assert!(m.locate([1.5, 0.5]).is_none());
    }

    #[test]
    fn csv_dump() {
        let m = build_structured_mesh(&unit_square(StripRole::Heat), 1, &[1]).unwrap();
        let mut buf = Vec::new();
        write_triangles_csv(&m, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "id,n0,n1,n2,strip\n0,0,1,3,0\n1,0,3,2,0\n");
    }
}
