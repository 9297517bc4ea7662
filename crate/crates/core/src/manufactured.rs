//! Exact solutions, derived source terms and the finite-difference residual
//! oracle that checks them.
//!
//! Vector fields use both components; the scalar heat–wave case stores its
//! value in component 0 and leaves component 1 at zero.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{BoundaryCondition, BoundarySpec, GeometrySpec, Side, StripRole};

pub type Vec2 = [f64; 2];
pub type Mat2 = [[f64; 2]; 2];

/// Pointwise evaluators of an exact solution. Gradients are `g[c][d] =
/// d(value_c)/dx_d`. Solid-side fields take the strip they are evaluated in.
pub trait ExactSolution: Send + Sync + fmt::Debug {
    fn u(&self, t: f64, x: Vec2) -> Vec2;
    fn grad_u(&self, t: f64, x: Vec2) -> Mat2;
    fn u_t(&self, t: f64, x: Vec2) -> Vec2;
    fn p(&self, t: f64, x: Vec2) -> f64;
    fn eta(&self, t: f64, x: Vec2, strip: usize) -> Vec2;
    fn grad_eta(&self, t: f64, x: Vec2, strip: usize) -> Mat2;
    fn eta_t(&self, t: f64, x: Vec2, strip: usize) -> Vec2;
    fn eta_tt(&self, t: f64, x: Vec2, strip: usize) -> Vec2;

    fn div_u(&self, t: f64, x: Vec2) -> f64 {
        let g = self.grad_u(t, x);
        g[0][0] + g[1][1]
    }
}

pub type FluidSource = Arc<dyn Fn(f64, Vec2) -> Vec2 + Send + Sync>;
pub type StripSource = Arc<dyn Fn(f64, Vec2, usize) -> Vec2 + Send + Sync>;
pub type ScalarSource = Arc<dyn Fn(f64, Vec2) -> f64 + Send + Sync>;
pub type TractionSource = Arc<dyn Fn(Side, f64, Vec2, usize) -> Vec2 + Send + Sync>;

/// Right-hand-side data of the coupled problem.
#[derive(Clone)]
pub struct SourceBundle {
    /// Fluid (or heat) volume force.
    pub fluid: FluidSource,
    /// Solid (or wave) volume force, per strip.
    pub solid: StripSource,
    /// Divergence source `(g, q)`; `None` means zero.
    pub mass: Option<ScalarSource>,
    /// Interface jump `(D(u) - pI)n - d_n eta`, per interface tag.
    pub interface: StripSource,
    /// Traction on an outer Neumann side, per strip.
    pub traction: TractionSource,
}

impl fmt::Debug for SourceBundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SourceBundle").field("mass", &self.mass.is_some()).finish_non_exhaustive()
    }
}

impl SourceBundle {
    pub fn zero() -> Self {
        Self {
            fluid: Arc::new(|_, _| [0.0; 2]),
            solid: Arc::new(|_, _, _| [0.0; 2]),
            mass: None,
            interface: Arc::new(|_, _, _| [0.0; 2]),
            traction: Arc::new(|_, _, _, _| [0.0; 2]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseId {
    ChannelPeriodic,
    ChannelTraction,
    HeatWave,
    Compatible,
}

impl CaseId {
    pub fn name(self) -> &'static str {
        match self {
            CaseId::ChannelPeriodic => "channel_periodic",
            CaseId::ChannelTraction => "channel_traction",
            CaseId::HeatWave => "heat_wave",
            CaseId::Compatible => "compatible",
        }
    }

    pub fn is_scalar(self) -> bool {
        self == CaseId::HeatWave
    }
}

/// A geometry with its data and, when known, its exact solution.
#[derive(Debug, Clone)]
pub struct Case {
    pub id: CaseId,
    pub geometry: GeometrySpec,
    pub exact: Option<Arc<dyn ExactSolution>>,
    pub sources: SourceBundle,
}

impl Case {
    /// Same case with the exact solution kept but every source set to zero.
    pub fn without_sources(&self) -> Case {
        Case { sources: SourceBundle::zero(), ..self.clone() }
    }
}

/// Example channel: fluid strip (1/4, 3/4) between two solid strips,
/// periodic in x.
#[derive(Debug, Clone, Copy)]
pub struct ChannelPeriodic {
    pub gamma: f64,
}

impl ChannelPeriodic {
    fn amp(&self, t: f64) -> f64 {
        self.gamma * t.exp()
    }

    fn phi(y: f64) -> f64 {
        -2.0 * y * y + 2.0 * y - 0.375
    }

    fn psi(y: f64) -> f64 {
        4.0 * y - 2.0
    }

    /// +1 for the top strip, -1 for the bottom one.
    fn sign(strip: usize) -> f64 {
        if strip == 0 {
            -1.0
        } else {
            1.0
        }
    }
}

impl ExactSolution for ChannelPeriodic {
    fn u(&self, t: f64, x: Vec2) -> Vec2 {
        let e = self.amp(t);
        let (s, c) = (2.0 * PI * x[0]).sin_cos();
        [e * 2.0 * PI * c * Self::phi(x[1]), e * s * Self::psi(x[1])]
    }

    fn grad_u(&self, t: f64, x: Vec2) -> Mat2 {
        let e = self.amp(t);
        let (s, c) = (2.0 * PI * x[0]).sin_cos();
        let (phi, psi) = (Self::phi(x[1]), Self::psi(x[1]));
        [
            [-4.0 * PI * PI * e * s * phi, -2.0 * PI * e * c * psi],
            [2.0 * PI * e * c * psi, 4.0 * e * s],
        ]
    }

    fn u_t(&self, t: f64, x: Vec2) -> Vec2 {
        self.u(t, x)
    }

    fn p(&self, t: f64, x: Vec2) -> f64 {
        4.0 * self.amp(t) * (2.0 * PI * x[0]).sin()
    }

    fn eta(&self, t: f64, x: Vec2, strip: usize) -> Vec2 {
        [0.0, Self::sign(strip) * self.amp(t) * (2.0 * PI * x[0]).sin()]
    }

    fn grad_eta(&self, t: f64, x: Vec2, strip: usize) -> Mat2 {
        [[0.0, 0.0], [Self::sign(strip) * self.amp(t) * 2.0 * PI * (2.0 * PI * x[0]).cos(), 0.0]]
    }

    fn eta_t(&self, t: f64, x: Vec2, strip: usize) -> Vec2 {
        self.eta(t, x, strip)
    }

    fn eta_tt(&self, t: f64, x: Vec2, strip: usize) -> Vec2 {
        self.eta(t, x, strip)
    }
}

/// `e^t sin(2 pi x) y (1 - y)` on both sides.
#[derive(Debug, Clone, Copy)]
pub struct HeatWave;

impl HeatWave {
    fn value(t: f64, x: Vec2) -> f64 {
        t.exp() * (2.0 * PI * x[0]).sin() * x[1] * (1.0 - x[1])
    }

    fn grad(t: f64, x: Vec2) -> Mat2 {
        let e = t.exp();
        let (s, c) = (2.0 * PI * x[0]).sin_cos();
        let q = x[1] * (1.0 - x[1]);
        [[e * 2.0 * PI * c * q, e * s * (1.0 - 2.0 * x[1])], [0.0, 0.0]]
    }

    /// The printed forcing, used on both sides.
    pub fn forcing(t: f64, x: Vec2) -> f64 {
        let s = (2.0 * PI * x[0]).sin();
        let q = x[1] * (1.0 - x[1]);
        t.exp() * (s * q + 2.0 * s + 4.0 * PI * PI * s * q)
    }
}

impl ExactSolution for HeatWave {
    fn u(&self, t: f64, x: Vec2) -> Vec2 {
        [Self::value(t, x), 0.0]
    }
    fn grad_u(&self, t: f64, x: Vec2) -> Mat2 {
        Self::grad(t, x)
    }
    fn u_t(&self, t: f64, x: Vec2) -> Vec2 {
        self.u(t, x)
    }
    fn p(&self, _: f64, _: Vec2) -> f64 {
        0.0
    }
    fn eta(&self, t: f64, x: Vec2, _: usize) -> Vec2 {
        self.u(t, x)
    }
    fn grad_eta(&self, t: f64, x: Vec2, _: usize) -> Mat2 {
        Self::grad(t, x)
    }
    fn eta_t(&self, t: f64, x: Vec2, _: usize) -> Vec2 {
        self.u(t, x)
    }
    fn eta_tt(&self, t: f64, x: Vec2, _: usize) -> Vec2 {
        self.u(t, x)
    }
}

/// Data reproduced exactly by every element pair: constant velocity `c`, zero
/// pressure and `eta = A x + b + t c`.
#[derive(Debug, Clone, Copy)]
pub struct Compatible {
    pub c: Vec2,
    pub a: Mat2,
    pub b: Vec2,
}

impl Default for Compatible {
    fn default() -> Self {
        Self { c: [0.3, -0.2], a: [[0.5, -0.25], [0.125, 0.75]], b: [0.1, -0.05] }
    }
}

impl ExactSolution for Compatible {
    fn u(&self, _: f64, _: Vec2) -> Vec2 {
        self.c
    }
    fn grad_u(&self, _: f64, _: Vec2) -> Mat2 {
        [[0.0; 2]; 2]
    }
    fn u_t(&self, _: f64, _: Vec2) -> Vec2 {
        [0.0; 2]
    }
    fn p(&self, _: f64, _: Vec2) -> f64 {
        0.0
    }
    fn eta(&self, t: f64, x: Vec2, _: usize) -> Vec2 {
        let a = &self.a;
        [
            a[0][0] * x[0] + a[0][1] * x[1] + self.b[0] + t * self.c[0],
            a[1][0] * x[0] + a[1][1] * x[1] + self.b[1] + t * self.c[1],
        ]
    }
    fn grad_eta(&self, _: f64, _: Vec2, _: usize) -> Mat2 {
        self.a
    }
    fn eta_t(&self, _: f64, _: Vec2, _: usize) -> Vec2 {
        self.c
    }
    fn eta_tt(&self, _: f64, _: Vec2, _: usize) -> Vec2 {
        [0.0; 2]
    }
}

fn mat_vec(m: &Mat2, n: Vec2) -> Vec2 {
    [m[0][0] * n[0] + m[0][1] * n[1], m[1][0] * n[0] + m[1][1] * n[1]]
}

fn channel_geometry(length: f64, levels: [f64; 2], boundary: BoundarySpec) -> GeometrySpec {
    GeometrySpec {
        x_min: 0.0,
        x_max: length,
        y_levels: vec![0.0, levels[0], levels[1], 1.0],
        strip_roles: vec![StripRole::Solid, StripRole::Fluid, StripRole::Solid],
        boundary,
        interface_tags: vec!["gamma2".into(), "gamma1".into()],
    }
}

/// Periodic channel of the given length with the exact solution scaled by
/// `gamma`.
pub fn channel_periodic_case(gamma: f64, length: f64) -> Result<Case> {
    if !(gamma > 0.0) {
        return Err(Error::Parameter(format!("gamma must be positive, got {gamma}")));
    }
    if !(length >= 1.0 && length.fract() == 0.0) {
        return Err(Error::Parameter(format!("channel length must be a positive integer, got {length}")));
    }
    let per = BoundaryCondition::PeriodicX;
    let neu = BoundaryCondition::NeumannTraction;
    let geometry = channel_geometry(length, [0.25, 0.75], BoundarySpec { left: per, right: per, bottom: neu, top: neu });
    let exact = ChannelPeriodic { gamma };
    let sources = SourceBundle {
        fluid: Arc::new(move |t, x| {
            let e = gamma * t.exp();
            let (s, c) = (2.0 * PI * x[0]).sin_cos();
            let (phi, psi) = (ChannelPeriodic::phi(x[1]), ChannelPeriodic::psi(x[1]));
            [e * 2.0 * PI * c * ((1.0 + 4.0 * PI * PI) * phi + 4.0), e * s * psi]
        }),
        solid: Arc::new(move |t, x, strip| {
            let eta = exact.eta(t, x, strip);
            [0.0, (1.0 + 4.0 * PI * PI) * eta[1]]
        }),
        mass: Some(Arc::new(move |t, x| {
            gamma * t.exp() * (2.0 * PI * x[0]).sin() * (4.0 - 4.0 * PI * PI * ChannelPeriodic::phi(x[1]))
        })),
        interface: Arc::new(|_, _, _| [0.0; 2]),
        traction: Arc::new(|_, _, _, _| [0.0; 2]),
    };
    Ok(Case { id: CaseId::ChannelPeriodic, geometry, exact: Some(Arc::new(exact)), sources })
}

/// Heat strip (0, 3/4) under a wave strip (3/4, 1), zero Dirichlet data on
/// the outer boundary.
pub fn heat_wave_case() -> Case {
    let geometry = GeometrySpec {
        x_min: 0.0,
        x_max: 1.0,
        y_levels: vec![0.0, 0.75, 1.0],
        strip_roles: vec![StripRole::Heat, StripRole::Wave],
        boundary: BoundarySpec::uniform(BoundaryCondition::DirichletZero),
        interface_tags: vec!["gamma".into()],
    };
    let sources = SourceBundle {
        fluid: Arc::new(|t, x| [HeatWave::forcing(t, x), 0.0]),
        solid: Arc::new(|t, x, _| [HeatWave::forcing(t, x), 0.0]),
        ..SourceBundle::zero()
    };
    Case { id: CaseId::HeatWave, geometry, exact: Some(Arc::new(HeatWave)), sources }
}

/// Inflow pressure profile on the left side of the traction channel; the
/// applied traction is this value times the outward normal.
pub fn inflow_pressure(t: f64, y: f64) -> f64 {
    inflow_pressure_between(t, y, [0.15, 0.85])
}

/// The inflow profile for a fluid strip `(lo, hi)`, peaking at the strip
/// centre with the same amplitude as the default channel.
pub fn inflow_pressure_between(t: f64, y: f64, [lo, hi]: [f64; 2]) -> f64 {
    let ramp = 1.0 - (0.5 * PI * t).cos();
    let scale = (0.35 / (0.5 * (hi - lo))).powi(2);
    -0.25 * ramp * ramp * 1e4 * scale * (y - lo) * (hi - y)
}

/// Unit square with solid strips below 0.15 and above 0.85, driven by an
/// inflow traction on the fluid part of `x = 0`.
pub fn traction_case() -> Case {
    traction_channel(1.0, [0.15, 0.85]).expect("default traction channel is valid")
}

/// Traction channel `[0, length] x [0, 1]` with the fluid strip between `levels`.
pub fn traction_channel(length: f64, levels: [f64; 2]) -> Result<Case> {
    let geometry = channel_geometry(length, levels, BoundarySpec::uniform(BoundaryCondition::NeumannTraction));
    geometry.check()?;
    let fluid_strip = 1;
    let sources = SourceBundle {
        traction: Arc::new(move |side, t, x, strip| {
            if side == Side::Left && strip == fluid_strip {
                let n = side.normal();
                let g = inflow_pressure_between(t, x[1], levels);
                [g * n[0], g * n[1]]
            } else {
                [0.0; 2]
            }
        }),
        ..SourceBundle::zero()
    };
    Ok(Case { id: CaseId::ChannelTraction, geometry, exact: None, sources })
}

/// Non-periodic channel carrying [`Compatible`] data.
pub fn compatible_case(data: Compatible) -> Case {
    let geometry = channel_geometry(1.0, [0.25, 0.75], BoundarySpec::uniform(BoundaryCondition::NeumannTraction));
    let spec = geometry.clone();
    let a = data.a;
    let sources = SourceBundle {
        interface: Arc::new(move |_, _, tag| {
            let (_, _, n) = spec.interface_strips(tag);
            let g = mat_vec(&a, n);
            [-g[0], -g[1]]
        }),
        traction: {
            let spec = geometry.clone();
            Arc::new(move |side, _, _, strip| {
                if spec.strip_roles[strip].is_fluid_side() {
                    [0.0; 2]
                } else {
                    mat_vec(&a, side.normal())
                }
            })
        },
        ..SourceBundle::zero()
    };
    Case { id: CaseId::Compatible, geometry, exact: Some(Arc::new(data)), sources }
}

/// Per-check maximum residual.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualCheck {
    pub name: String,
    pub max_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SourceReport {
    pub case: String,
    pub samples: usize,
    pub seed: u64,
    pub checks: Vec<ResidualCheck>,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl SourceReport {
    pub fn check(&self, name: &str) -> Option<f64> {
        self.checks.iter().find(|c| c.name == name).map(|c| c.max_residual)
    }
}

pub const FD_STEP: f64 = 1e-4;
pub const SOURCE_TOL: f64 = 1e-6;

/// Fourth-order central difference of a vector function of one variable.
fn fd<F: Fn(f64) -> Vec2>(f: F, s: f64) -> Vec2 {
    let h = FD_STEP;
    let (a, b, c, d) = (f(s + 2.0 * h), f(s + h), f(s - h), f(s - 2.0 * h));
    let mut out = [0.0; 2];
    for i in 0..2 {
        out[i] = (-a[i] + 8.0 * b[i] - 8.0 * c[i] + d[i]) / (12.0 * h);
    }
    out
}

fn fd_scalar<F: Fn(f64) -> f64>(f: F, s: f64) -> f64 {
    fd(|r| [f(r), 0.0], s)[0]
}

fn shift(x: Vec2, d: usize, s: f64) -> Vec2 {
    let mut y = x;
    y[d] = s;
    y
}

/// Finite-difference gradient, `g[c][d]`.
fn fd_grad<F: Fn(Vec2) -> Vec2>(f: F, x: Vec2) -> Mat2 {
    let gx = fd(|s| f(shift(x, 0, s)), x[0]);
    let gy = fd(|s| f(shift(x, 1, s)), x[1]);
    [[gx[0], gy[0]], [gx[1], gy[1]]]
}

/// Divergence of a matrix field row-wise: `out[c] = sum_d d(M[c][d])/dx_d`.
fn fd_div<F: Fn(Vec2) -> Mat2>(f: F, x: Vec2) -> Vec2 {
    let dx = fd(|s| {
        let m = f(shift(x, 0, s));
        [m[0][0], m[1][0]]
    }, x[0]);
    let dy = fd(|s| {
        let m = f(shift(x, 1, s));
        [m[0][1], m[1][1]]
    }, x[1]);
    [dx[0] + dy[0], dx[1] + dy[1]]
}

fn sym(g: &Mat2) -> Mat2 {
    let o = 0.5 * (g[0][1] + g[1][0]);
    [[g[0][0], o], [o, g[1][1]]]
}

fn dist(a: Vec2, b: Vec2) -> f64 {
    (a[0] - b[0]).abs().max((a[1] - b[1]).abs())
}

/// Strong-form residuals of the exact solution against the case's sources
/// at random points and times in `[0, 1]`.
///
/// Time derivatives and second space derivatives are central differences
/// of the value and gradient evaluators; a separate check compares the
/// gradient evaluators with differences of the values.
pub fn verify_sources(case: &Case, n_samples: usize, seed: u64) -> Result<SourceReport> {
    let exact = case.exact.as_ref().ok_or_else(|| Error::Parameter(format!("case {} has no exact solution", case.id.name())))?;
    let ex = exact.as_ref();
    let geo = &case.geometry;
    let src = &case.sources;
    let scalar = case.id.is_scalar();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let names = ["gradients", "fluid_momentum", "mass", "solid", "interface_kinematic", "interface_traction", "boundary"];
    let mut max = [0.0f64; 7];
    let mut bump = |k: usize, r: f64| max[k] = max[k].max(if r.is_nan() { f64::INFINITY } else { r });

    let fluid_strips: Vec<usize> = (0..geo.n_strips()).filter(|&s| geo.strip_roles[s].is_fluid_side()).collect();
    let solid_strips: Vec<usize> = (0..geo.n_strips()).filter(|&s| !geo.strip_roles[s].is_fluid_side()).collect();
    let sample_in = |rng: &mut ChaCha8Rng, strip: usize| -> Vec2 {
        [rng.gen_range(geo.x_min..geo.x_max), rng.gen_range(geo.y_levels[strip]..geo.y_levels[strip + 1])]
    };

    for _ in 0..n_samples {
        let t = rng.gen_range(0.0..1.0);

        for &strip in &fluid_strips {
            let x = sample_in(&mut rng, strip);
            bump(0, dist(ex.grad_u(t, x)[0], fd_grad(|y| ex.u(t, y), x)[0]).max(dist(ex.grad_u(t, x)[1], fd_grad(|y| ex.u(t, y), x)[1])));
            bump(0, dist(ex.u_t(t, x), fd(|s| ex.u(s, x), t)));
            let ut = fd(|s| ex.u(s, x), t);
            let f = (src.fluid)(t, x);
            let r = if scalar {
                let lap = fd_div(|y| ex.grad_u(t, y), x);
                [ut[0] - lap[0] - f[0], 0.0]
            } else {
                let div_d = fd_div(|y| sym(&ex.grad_u(t, y)), x);
                let gp = [fd_scalar(|s| ex.p(t, shift(x, 0, s)), x[0]), fd_scalar(|s| ex.p(t, shift(x, 1, s)), x[1])];
                [ut[0] - div_d[0] + gp[0] - f[0], ut[1] - div_d[1] + gp[1] - f[1]]
            };
            bump(1, dist(r, [0.0; 2]));
            if !scalar {
                let div = fd_scalar(|s| ex.u(t, shift(x, 0, s))[0], x[0]) + fd_scalar(|s| ex.u(t, shift(x, 1, s))[1], x[1]);
                let g = src.mass.as_ref().map_or(0.0, |m| m(t, x));
                bump(2, (div - g).abs());
            }
        }

        for &strip in &solid_strips {
            let x = sample_in(&mut rng, strip);
            let g = ex.grad_eta(t, x, strip);
            let g_fd = fd_grad(|y| ex.eta(t, y, strip), x);
            bump(0, dist(g[0], g_fd[0]).max(dist(g[1], g_fd[1])));
            bump(0, dist(ex.eta_t(t, x, strip), fd(|s| ex.eta(s, x, strip), t)));
            bump(0, dist(ex.eta_tt(t, x, strip), fd(|s| ex.eta_t(s, x, strip), t)));
            let ett = fd(|s| ex.eta_t(s, x, strip), t);
            let lap = fd_div(|y| ex.grad_eta(t, y, strip), x);
            let f = (src.solid)(t, x, strip);
            bump(3, dist([ett[0] - lap[0] - f[0], ett[1] - lap[1] - f[1]], [0.0; 2]));
        }

        for tag in 0..geo.interface_tags.len() {
            let (fs, ss, n) = geo.interface_strips(tag);
            let _ = fs;
            let x = [rng.gen_range(geo.x_min..geo.x_max), geo.y_levels[tag + 1]];
            let eta_t = fd(|s| ex.eta(s, x, ss), t);
            bump(4, dist(ex.u(t, x), eta_t));
            let gu = ex.grad_u(t, x);
            let flux = if scalar {
                mat_vec(&gu, n)
            } else {
                let mut s = sym(&gu);
                let p = ex.p(t, x);
                s[0][0] -= p;
                s[1][1] -= p;
                mat_vec(&s, n)
            };
            let dn = mat_vec(&fd_grad(|y| ex.eta(t, y, ss), x), n);
            let j = (src.interface)(t, x, tag);
            bump(5, dist([flux[0] - dn[0] - j[0], flux[1] - dn[1] - j[1]], [0.0; 2]));
        }

        for side in Side::ALL {
            let bc = geo.boundary.get(side);
            if bc == BoundaryCondition::PeriodicX {
                continue;
            }
            let strips: Vec<usize> = match side {
                Side::Bottom => vec![0],
                Side::Top => vec![geo.n_strips() - 1],
                _ => (0..geo.n_strips()).collect(),
            };
            for strip in strips {
                let x = match side {
                    Side::Left => [geo.x_min, rng.gen_range(geo.y_levels[strip]..geo.y_levels[strip + 1])],
                    Side::Right => [geo.x_max, rng.gen_range(geo.y_levels[strip]..geo.y_levels[strip + 1])],
                    Side::Bottom => [rng.gen_range(geo.x_min..geo.x_max), geo.y_levels[0]],
                    Side::Top => [rng.gen_range(geo.x_min..geo.x_max), geo.y_levels[geo.n_strips()]],
                };
                let fluid = geo.strip_roles[strip].is_fluid_side();
                let n = side.normal();
                let r = match bc {
                    BoundaryCondition::DirichletZero => {
                        if fluid {
                            ex.u(t, x)
                        } else {
                            ex.eta(t, x, strip)
                        }
                    }
                    _ => {
                        let flux = if fluid {
                            let gu = fd_grad(|y| ex.u(t, y), x);
                            let mut s = if scalar { gu } else { sym(&gu) };
                            if !scalar {
                                let p = ex.p(t, x);
                                s[0][0] -= p;
                                s[1][1] -= p;
                            }
                            mat_vec(&s, n)
                        } else {
                            mat_vec(&fd_grad(|y| ex.eta(t, y, strip), x), n)
                        };
                        let g = (src.traction)(side, t, x, strip);
                        [flux[0] - g[0], flux[1] - g[1]]
                    }
                };
                bump(6, dist(r, [0.0; 2]));
            }
        }
    }

    let checks: Vec<ResidualCheck> = names
        .iter()
        .zip(max)
        .filter(|(n, _)| !(scalar && **n == "mass"))
        .map(|(n, m)| ResidualCheck { name: n.to_string(), max_residual: m })
        .collect();
    let max_residual = checks.iter().map(|c| c.max_residual).fold(0.0, f64::max);
    Ok(SourceReport {
        case: case.id.name().into(),
        samples: n_samples,
        seed,
        checks,
        max_residual,
        tolerance: SOURCE_TOL,
        pass: max_residual <= SOURCE_TOL,
    })
}
