//! Reference-element shape functions, triangle quadrature and the affine map
//! to physical triangles.
//!
//! Reference triangle: vertices `(0,0)`, `(1,0)`, `(0,1)` with barycentric
//! coordinates `l0 = 1 - x - y`, `l1 = x`, `l2 = y`. Local DOF order is the
//! three vertices, then (P2) the midpoints of edges `01`, `12`, `20`, or
//! (P1B) the bubble `27 l0 l1 l2`.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ElementKind {
    P1,
    P1B,
    P2,
}

impl ElementKind {
    pub fn n_local(self) -> usize {
        match self {
            ElementKind::P1 => 3,
            ElementKind::P1B => 4,
            ElementKind::P2 => 6,
        }
    }

    /// Polynomial degree of the complete space contained in the element.
    pub fn degree(self) -> usize {
        match self {
            ElementKind::P1 | ElementKind::P1B => 1,
            ElementKind::P2 => 2,
        }
    }
}

/// Local vertex pairs of the P2 edge DOFs.
pub const P2_EDGES: [(usize, usize); 3] = [(0, 1), (1, 2), (2, 0)];

const REF_GRAD: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];

fn check_barycentric(l: [f64; 3]) -> Result<()> {
    let ok = l.iter().all(|&x| x.is_finite() && x >= -1e-12) && (l.iter().sum::<f64>() - 1.0).abs() <= 1e-12;
    if ok {
        Ok(())
    } else {
        Err(Error::Barycentric(l))
    }
}

pub(crate) fn shape_into(kind: ElementKind, l: &[f64; 3], out: &mut [f64]) {
    match kind {
        ElementKind::P1 => out[..3].copy_from_slice(l),
        ElementKind::P1B => {
            out[..3].copy_from_slice(l);
            out[3] = 27.0 * l[0] * l[1] * l[2];
        }
        ElementKind::P2 => {
            for i in 0..3 {
                out[i] = l[i] * (2.0 * l[i] - 1.0);
            }
            for (k, &(i, j)) in P2_EDGES.iter().enumerate() {
                out[3 + k] = 4.0 * l[i] * l[j];
            }
        }
    }
}

pub(crate) fn grad_into(kind: ElementKind, l: &[f64; 3], out: &mut [[f64; 2]]) {
    let g = &REF_GRAD;
    let comb = |a: f64, i: usize, b: f64, j: usize| [a * g[i][0] + b * g[j][0], a * g[i][1] + b * g[j][1]];
    match kind {
        ElementKind::P1 => out[..3].copy_from_slice(g),
        ElementKind::P1B => {
            out[..3].copy_from_slice(g);
            let mut b = [0.0; 2];
            for d in 0..2 {
                b[d] = 27.0 * (l[1] * l[2] * g[0][d] + l[0] * l[2] * g[1][d] + l[0] * l[1] * g[2][d]);
            }
            out[3] = b;
        }
        ElementKind::P2 => {
            for i in 0..3 {
                let s = 4.0 * l[i] - 1.0;
                out[i] = [s * g[i][0], s * g[i][1]];
            }
            for (k, &(i, j)) in P2_EDGES.iter().enumerate() {
                out[3 + k] = comb(4.0 * l[j], i, 4.0 * l[i], j);
            }
        }
    }
}

/// Shape function values at a barycentric point, one per local DOF.
pub fn eval_shape(kind: ElementKind, l: [f64; 3]) -> Result<Vec<f64>> {
    check_barycentric(l)?;
    let mut out = vec![0.0; kind.n_local()];
    shape_into(kind, &l, &mut out);
    Ok(out)
}

/// Shape function gradients with respect to the reference coordinates.
pub fn eval_grad(kind: ElementKind, l: [f64; 3]) -> Result<Vec<[f64; 2]>> {
    check_barycentric(l)?;
    let mut out = vec![[0.0; 2]; kind.n_local()];
    grad_into(kind, &l, &mut out);
    Ok(out)
}

/// Quadrature rule on the reference triangle; weights sum to its area 1/2.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

struct RuleBuilder {
    points: Vec<[f64; 3]>,
    weights: Vec<f64>,
}

impl RuleBuilder {
    fn new() -> Self {
        Self { points: Vec::new(), weights: Vec::new() }
    }

    // Weights below are normalized to unit area, hence the halving.
    fn centroid(mut self, w: f64) -> Self {
        self.points.push([1.0 / 3.0; 3]);
        self.weights.push(0.5 * w);
        self
    }

    fn orbit3(mut self, a: f64, w: f64) -> Self {
        let b = 1.0 - 2.0 * a;
        for p in [[a, a, b], [a, b, a], [b, a, a]] {
            self.points.push(p);
            self.weights.push(0.5 * w);
        }
        self
    }

    fn orbit6(mut self, a: f64, b: f64, w: f64) -> Self {
        let c = 1.0 - a - b;
        for p in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
            self.points.push(p);
            self.weights.push(0.5 * w);
        }
        self
    }

    fn build(self, degree: usize) -> QuadratureRule {
        QuadratureRule { points: self.points, weights: self.weights, degree }
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Conical-product Gauss rule symmetrized over the six vertex permutations.
fn collapsed_rule(degree: usize) -> QuadratureRule {
    let n = (degree + 2).div_ceil(2);
    let (x, w) = gauss_legendre(n);
    let mut b = RuleBuilder::new();
    for i in 0..n {
        let u = 0.5 * (x[i] + 1.0);
        for j in 0..n {
            let v = 0.5 * (x[j] + 1.0);
            let weight = 0.25 * w[i] * w[j] * (1.0 - u);
            let (px, py) = (u, (1.0 - u) * v);
            let l = [1.0 - px - py, px, py];
            for perm in [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
                b.points.push([l[perm[0]], l[perm[1]], l[perm[2]]]);
                b.weights.push(weight / 6.0);
            }
        }
    }
    b.build(degree)
}

fn build_rule(degree: usize) -> QuadratureRule {
    match degree {
        1 => RuleBuilder::new().centroid(1.0).build(1),
        2 => RuleBuilder::new().orbit3(1.0 / 6.0, 1.0 / 3.0).build(2),
        4 => RuleBuilder::new()
            .orbit3(0.445948490915965, 0.223381589678011)
            .orbit3(0.091576213509771, 0.109951743655322)
            .build(4),
        5 => {
            let s = 15f64.sqrt();
            RuleBuilder::new()
                .centroid(9.0 / 40.0)
                .orbit3((6.0 - s) / 21.0, (155.0 - s) / 1200.0)
                .orbit3((6.0 + s) / 21.0, (155.0 + s) / 1200.0)
                .build(5)
        }
        6 => RuleBuilder::new()
            .orbit3(0.249286745170910, 0.116786275726379)
            .orbit3(0.063089014491502, 0.050844906370207)
            .orbit6(0.053145049844817, 0.310352451033784, 0.082851075618374)
            .build(6),
        8 => RuleBuilder::new()
            .centroid(0.144315607677787)
            .orbit3(0.459292588292723, 0.095091634267285)
            .orbit3(0.170569307751760, 0.103217370534718)
            .orbit3(0.050547228317031, 0.032458497623198)
            .orbit6(0.008394777409958, 0.263112829634638, 0.027230314174435)
            .build(8),
        d => collapsed_rule(d),
    }
}

const STORED: [usize; 8] = [1, 2, 4, 5, 6, 8, 9, 10];

/// Smallest stored symmetric rule exact to at least `degree`.
pub fn quadrature(degree: usize) -> Result<&'static QuadratureRule> {
    static RULES: OnceLock<Vec<QuadratureRule>> = OnceLock::new();
    let rules = RULES.get_or_init(|| STORED.iter().map(|&d| build_rule(d)).collect());
    let idx = STORED
        .iter()
        .position(|&d| d >= degree.max(1))
        .ok_or(Error::QuadratureDegree(degree))?;
    Ok(&rules[idx])
}

/// Gauss rule on `[0, 1]` exact to `degree`; weights sum to 1.
pub fn edge_rule(degree: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(degree / 2 + 1);
    (x.iter().map(|&t| 0.5 * (t + 1.0)).collect(), w.iter().map(|&v| 0.5 * v).collect())
}

/// Affine map `x = x0 + J xi` from the reference triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap {
    pub origin: [f64; 2],
    pub jacobian: [[f64; 2]; 2],
    pub det: f64,
    /// `J^{-T}`: maps reference gradients to physical gradients.
    pub grad_transform: [[f64; 2]; 2],
}

impl AffineMap {
    pub fn new(c: &[[f64; 2]; 3]) -> Result<Self> {
        let j = [[c[1][0] - c[0][0], c[2][0] - c[0][0]], [c[1][1] - c[0][1], c[2][1] - c[0][1]]];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let scale = (j[0][0].abs() + j[0][1].abs() + j[1][0].abs() + j[1][1].abs()).powi(2);
        if !(det.abs() > 1e-14 * scale) {
            return Err(Error::DegenerateTriangle(det));
        }
        let inv_t = [[j[1][1] / det, -j[1][0] / det], [-j[0][1] / det, j[0][0] / det]];
        Ok(Self { origin: c[0], jacobian: j, det, grad_transform: inv_t })
    }

    pub fn point(&self, l: &[f64; 3]) -> [f64; 2] {
        let (x, y) = (l[1], l[2]);
        let j = &self.jacobian;
        [self.origin[0] + j[0][0] * x + j[0][1] * y, self.origin[1] + j[1][0] * x + j[1][1] * y]
    }

    pub fn grad(&self, g: [f64; 2]) -> [f64; 2] {
        let t = &self.grad_transform;
        [t[0][0] * g[0] + t[0][1] * g[1], t[1][0] * g[0] + t[1][1] * g[1]]
    }
}

/// Quadrature data on a physical triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalQuadrature {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub map: AffineMap,
}

pub fn map_to_physical(coords: &[[f64; 2]; 3], rule: &QuadratureRule) -> Result<PhysicalQuadrature> {
    let map = AffineMap::new(coords)?;
    Ok(PhysicalQuadrature {
        points: rule.points.iter().map(|l| map.point(l)).collect(),
        weights: rule.weights.iter().map(|w| w * map.det.abs()).collect(),
        map,
    })
}

/// Shape values and reference gradients tabulated at the points of a rule.
#[derive(Debug, Clone)]
pub struct ShapeTable {
    pub kind: ElementKind,
    pub n_local: usize,
    pub values: Vec<f64>,
    pub grads: Vec<[f64; 2]>,
}

impl ShapeTable {
    pub fn new(kind: ElementKind, points: &[[f64; 3]]) -> Self {
        let n = kind.n_local();
        let mut values = vec![0.0; points.len() * n];
        let mut grads = vec![[0.0; 2]; points.len() * n];
        for (q, l) in points.iter().enumerate() {
            shape_into(kind, l, &mut values[q * n..(q + 1) * n]);
            grad_into(kind, l, &mut grads[q * n..(q + 1) * n]);
        }
        Self { kind, n_local: n, values, grads }
    }

    pub fn values(&self, q: usize) -> &[f64] {
        &self.values[q * self.n_local..(q + 1) * self.n_local]
    }

    pub fn grads(&self, q: usize) -> &[[f64; 2]] {
        &self.grads[q * self.n_local..(q + 1) * self.n_local]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    #[test]
    fn p1_at_barycenter() {
        let v = eval_shape(ElementKind::P1, [1.0 / 3.0; 3]).unwrap();
        for x in v {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn bubble_normalized() {
        let v = eval_shape(ElementKind::P1B, [1.0 / 3.0; 3]).unwrap();
        assert!((v[3] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn p2_midpoint_is_nodal() {
        let v = eval_shape(ElementKind::P2, [0.5, 0.5, 0.0]).unwrap();
        assert_eq!(&v[..3], &[0.0, 0.0, 0.0]);
        assert_eq!(v[3], 1.0);
        assert_eq!(v[4], 0.0);
        assert_eq!(v[5], 0.0);
    }

    #[test]
    fn nodal_basis_property() {
        let verts = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        for kind in [ElementKind::P1, ElementKind::P1B, ElementKind::P2] {
            for (i, l) in verts.iter().enumerate() {
                let v = eval_shape(kind, *l).unwrap();
                for (k, x) in v.iter().enumerate() {
                    let expect = if k == i { 1.0 } else { 0.0 };
                    assert!((x - expect).abs() < 1e-15, "{kind:?} dof {k} at vertex {i}");
                }
            }
        }
    }

    #[test]
    fn rejects_invalid_barycentric() {
        assert!(eval_shape(ElementKind::P1, [0.5, 0.6, 0.0]).is_err());
        assert!(eval_grad(ElementKind::P2, [-0.1, 0.6, 0.5]).is_err());
    }

    #[test]
    fn p1_gradients_constant_and_sum_to_zero() {
        let a = eval_grad(ElementKind::P1, [0.2, 0.3, 0.5]).unwrap();
        let b = eval_grad(ElementKind::P1, [0.7, 0.1, 0.2]).unwrap();
        assert_eq!(a, b);
        let s = a.iter().fold([0.0, 0.0], |s, g| [s[0] + g[0], s[1] + g[1]]);
        assert_eq!(s, [0.0, 0.0]);
    }

    fn fd_grad(kind: ElementKind, x: f64, y: f64) -> Vec<[f64; 2]> {
        // shape functions extend polynomially outside the triangle
        let eval = |x: f64, y: f64| {
            let mut out = vec![0.0; kind.n_local()];
            shape_into(kind, &[1.0 - x - y, x, y], &mut out);
            out
        };
        let h = 1e-5;
        let (xp, xm, yp, ym) = (eval(x + h, y), eval(x - h, y), eval(x, y + h), eval(x, y - h));
        (0..kind.n_local())
            .map(|k| [(xp[k] - xm[k]) / (2.0 * h), (yp[k] - ym[k]) / (2.0 * h)])
            .collect()
    }

    #[test]
    fn gradients_match_finite_differences() {
        for kind in [ElementKind::P1, ElementKind::P1B, ElementKind::P2] {
            for &(x, y) in &[(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (0.2, 0.3), (0.5, 0.5)] {
                let g = eval_grad(kind, [1.0 - x - y, x, y]).unwrap();
                let fd = fd_grad(kind, x, y);
                for k in 0..kind.n_local() {
                    for d in 0..2 {
                        assert!((g[k][d] - fd[k][d]).abs() < 1e-8, "{kind:?} dof {k} at ({x},{y})");
                    }
                }
            }
        }
    }

    #[test]
    fn rules_integrate_monomials() {
        for degree in 1..=10 {
            let rule = quadrature(degree).unwrap();
            assert!(rule.degree >= degree);
            assert!(rule.weights.iter().all(|&w| w > 0.0));
            assert!((rule.weights.iter().sum::<f64>() - 0.5).abs() < 1e-14);
            for a in 0..=rule.degree {
                for b in 0..=(rule.degree - a) {
                    let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                    let approx: f64 = rule
                        .points
                        .iter()
                        .zip(&rule.weights)
                        .map(|(l, w)| w * l[1].powi(a as i32) * l[2].powi(b as i32))
                        .sum();
                    assert!((approx - exact).abs() < 1e-14, "degree {degree}: x^{a} y^{b}");
                }
            }
        }
        assert!(matches!(quadrature(11), Err(Error::QuadratureDegree(11))));
    }

    #[test]
    fn degree6_integrates_bubble_squared() {
        // 27^2 * 2! 2! 2! * 2 * area / 8! with area 1/2
        let exact = 729.0 * 8.0 / 40320.0;
        let rule = quadrature(6).unwrap();
        let approx: f64 = rule
            .points
            .iter()
            .zip(&rule.weights)
            .map(|(l, w)| w * (27.0 * l[0] * l[1] * l[2]).powi(2))
            .sum();
        assert!((approx - exact).abs() < 1e-14);
    }

    #[test]
    fn partition_of_unity() {
        let rule = quadrature(8).unwrap();
        for kind in [ElementKind::P1, ElementKind::P2] {
            for l in &rule.points {
                let s: f64 = eval_shape(kind, *l).unwrap().iter().sum();
                assert!((s - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn bubble_vanishes_on_edges() {
        for k in 0..=20 {
            let s = k as f64 / 20.0;
            for l in [[s, 1.0 - s, 0.0], [0.0, s, 1.0 - s], [1.0 - s, 0.0, s]] {
                let v = eval_shape(ElementKind::P1B, l).unwrap();
                assert!(v[3].abs() <= 1e-14);
            }
        }
    }

    #[test]
    fn reference_map_is_identity() {
        let rule = quadrature(4).unwrap();
        let pq = map_to_physical(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], rule).unwrap();
        assert_eq!(pq.map.det, 1.0);
        assert_eq!(pq.map.grad_transform, [[1.0, 0.0], [0.0, 1.0]]);
        for (p, l) in pq.points.iter().zip(&rule.points) {
            assert_eq!(*p, [l[1], l[2]]);
        }
    }

    #[test]
    fn scaled_triangle_weights_sum_to_area() {
        let pq = map_to_physical(&[[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]], quadrature(6).unwrap()).unwrap();
        assert!((pq.weights.iter().sum::<f64>() - 2.0).abs() < 1e-14);
        assert!(map_to_physical(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]], quadrature(1).unwrap()).is_err());
    }

    #[test]
    fn gradient_transform_matches_finite_differences() {
        let c = [[0.3, 0.1], [1.2, 0.4], [0.5, 1.3]];
        let map = AffineMap::new(&c).unwrap();
        let kind = ElementKind::P2;
        let l = [0.2, 0.5, 0.3];
        let x = map.point(&l);
        let phys = |p: [f64; 2]| {
            let l = crate::mesh::barycentric(&c, p);
            let mut v = vec![0.0; 6];
            shape_into(kind, &l, &mut v);
            v
        };
        let h = 1e-6;
        let g = eval_grad(kind, l).unwrap();
        for k in 0..6 {
            let pg = map.grad(g[k]);
            let dx = (phys([x[0] + h, x[1]])[k] - phys([x[0] - h, x[1]])[k]) / (2.0 * h);
            let dy = (phys([x[0], x[1] + h])[k] - phys([x[0], x[1] - h])[k]) / (2.0 * h);
            assert!((pg[0] - dx).abs() < 1e-8 && (pg[1] - dy).abs() < 1e-8);
        }
    }

    #[test]
    fn edge_rule_exactness() {
        let (s, w) = edge_rule(7);
        for p in 0..=7 {
            let approx: f64 = s.iter().zip(&w).map(|(s, w)| w * s.powi(p)).sum();
            assert!((approx - 1.0 / (p as f64 + 1.0)).abs() < 1e-15);
        }
    }
}
