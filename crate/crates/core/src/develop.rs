//! Parallel transport, developments, horizontal lifts and holonomy on
//! coordinate metric charts.
//!
//! All integrations use fixed-step RK4 with [`STEPS_PER_UNIT`] steps per unit
//! of curve parameter, repeated with twice as many steps; the disagreement
//! between the two runs is reported as `convergence`.
//!
//! Christoffel symbols are stored as `gamma[(k * d + i) * d + j] = Gamma^k_ij`
//! and the curvature tensor as
//! `rm[((a * d + b) * d + c) * d + f] = Rm(d_a, d_b, d_c, d_f)` with
//! `Rm(X, Y, Z, W) = g(R(X, Y) Z, W)` and
//! `R(X, Y) = nabla_X nabla_Y - nabla_Y nabla_X - nabla_[X, Y]`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const STEPS_PER_UNIT: f64 = 1e3;
/// Step of the central differences of the metric in user charts.
pub const METRIC_FD_STEP: f64 = 1e-4;
/// Step of the central differences of Christoffel symbols in user charts.
pub const CURVATURE_FD_STEP: f64 = 1e-3;
/// Step in the family parameter `u` for derivatives of `v(u, t)`.
pub const JACOBI_DU: f64 = 1e-3;
pub const FRAME_TOL: f64 = 1e-8;

pub type MetricFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;
pub type DomainFn = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

/// A chart given only by its metric. Christoffel symbols and curvature are
/// computed by finite differences.
#[derive(Clone)]
pub struct UserChart {
    pub name: String,
    pub dim: usize,
    pub metric: MetricFn,
    pub domain: Option<DomainFn>,
    /// When set, the first `base_dim` coordinates are the base of a
    /// submersion whose fibers are the remaining coordinates.
    pub base_dim: Option<usize>,
}

impl fmt::Debug for UserChart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UserChart")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("base_dim", &self.base_dim)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum Chart {
    FlatCartesian { dim: usize },
    /// `(r, theta)` with `dr^2 + r^2 dtheta^2`, `r > 0`.
    FlatPolar,
    /// Cartesian coordinates on the open disk of the given radius.
    Disk { radius: f64 },
    /// Angle coordinate `phi` on a circle of radius `L`: `L^2 dphi^2`.
    Circle { radius: f64 },
    Product(Box<Chart>, Box<Chart>),
    /// Universal cover of the annulus: `(theta, r)` with `theta` unbounded,
    /// `r` in `[r_in, r_out]`, metric `r^2 dtheta^2 + dr^2`.
    StripCover { r_in: f64, r_out: f64 },
    User(UserChart),
}

impl Chart {
    pub fn dim(&self) -> usize {
        match self {
            Chart::FlatCartesian { dim } => *dim,
            Chart::FlatPolar | Chart::Disk { .. } | Chart::StripCover { .. } => 2,
            Chart::Circle { .. } => 1,
            Chart::Product(a, b) => a.dim() + b.dim(),
            Chart::User(u) => u.dim,
        }
    }

    pub fn name(&self) -> String {
        match self {
            Chart::FlatCartesian { dim } => format!("flat-cartesian({dim})"),
            Chart::FlatPolar => "flat-polar".into(),
            Chart::Disk { radius } => format!("disk({radius})"),
            Chart::Circle { radius } => format!("circle({radius})"),
            Chart::Product(a, b) => format!("product({},{})", a.name(), b.name()),
            Chart::StripCover { r_in, r_out } => format!("strip-cover({r_in},{r_out})"),
            Chart::User(u) => u.name.clone(),
        }
    }

    /// Round unit sphere in `(theta, phi)` with `dtheta^2 + sin^2(theta) dphi^2`.
    pub fn round_sphere() -> Chart {
        Chart::User(UserChart {
            name: "sphere".into(),
            dim: 2,
            metric: Arc::new(|x| DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, x[0].sin().powi(2)]))),
            domain: Some(Arc::new(|x| x[0] > 0.0 && x[0] < PI)),
            base_dim: None,
        })
    }

    /// `dx^2 + dy^2 + (dw + s dx)^2`: a flat metric written with a shear, so
    /// its horizontal distribution is integrable.
    pub fn sheared_product(s: f64) -> Chart {
        Chart::User(UserChart {
            name: format!("sheared-product({s})"),
            dim: 3,
            metric: Arc::new(move |_| DMatrix::from_row_slice(3, 3, &[1.0 + s * s, 0.0, s, 0.0, 1.0, 0.0, s, 0.0, 1.0])),
            domain: None,
            base_dim: Some(2),
        })
    }

    /// Heisenberg metric `dx^2 + dy^2 + (dw - (x dy - y dx) / 2)^2`. Its
    /// horizontal distribution is not integrable: the lift of a loop shifts
    /// `w` by the enclosed signed area.
    pub fn heisenberg() -> Chart {
        Chart::User(UserChart {
            name: "heisenberg".into(),
            dim: 3,
            metric: Arc::new(|x| {
                let a = [0.5 * x[1], -0.5 * x[0], 1.0];
                let mut g = DMatrix::zeros(3, 3);
                for i in 0..3 {
                    for j in 0..3 {
                        g[(i, j)] = a[i] * a[j];
                    }
                }
                g[(0, 0)] += 1.0;
                g[(1, 1)] += 1.0;
                g
            }),
            domain: None,
            base_dim: Some(2),
        })
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.dim() || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match self {
            Chart::FlatCartesian { .. } | Chart::Circle { .. } => true,
            Chart::FlatPolar => x[0] > 0.0,
            Chart::Disk { radius } => x[0].hypot(x[1]) < *radius,
            Chart::StripCover { r_in, r_out } => x[1] >= r_in - 1e-12 && x[1] <= r_out + 1e-12,
            Chart::Product(a, b) => {
                let k = a.dim();
                a.contains(&x[..k]) && b.contains(&x[k..])
            }
            Chart::User(u) => u.domain.as_ref().is_none_or(|f| f(x)),
        }
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::LeftChartDomain(x.to_vec()))
        }
    }

    fn metric_unchecked(&self, x: &[f64]) -> DMatrix<f64> {
        match self {
            Chart::FlatCartesian { dim } => DMatrix::identity(*dim, *dim),
            Chart::Disk { .. } => DMatrix::identity(2, 2),
            Chart::FlatPolar => DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, x[0] * x[0]])),
            Chart::StripCover { .. } => DMatrix::from_diagonal(&DVector::from_vec(vec![x[1] * x[1], 1.0])),
            Chart::Circle { radius } => DMatrix::from_element(1, 1, radius * radius),
            Chart::Product(a, b) => {
                let (k, d) = (a.dim(), self.dim());
                let mut g = DMatrix::zeros(d, d);
                g.view_mut((0, 0), (k, k)).copy_from(&a.metric_unchecked(&x[..k]));
                g.view_mut((k, k), (d - k, d - k)).copy_from(&b.metric_unchecked(&x[k..]));
                g
            }
            Chart::User(u) => (u.metric)(x),
        }
    }

    /// Metric at `x`, checked for domain membership, symmetry and positive
    /// definiteness.
    pub fn metric(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check(x)?;
        let g = self.metric_unchecked(x);
        let d = self.dim();
        let symmetric = g.shape() == (d, d) && (&g - g.transpose()).amax() <= 1e-12 * g.amax().max(1.0);
        if !symmetric || g.iter().any(|v| !v.is_finite()) || g.clone().cholesky().is_none() {
            return Err(Error::MetricDegenerate(x.to_vec()));
        }
        Ok(g)
    }

    /// Christoffel symbols `Gamma^k_ij` at `x`.
    pub fn christoffel(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        let d = self.dim();
        let mut gamma = vec![0.0; d * d * d];
        match self {
            Chart::FlatCartesian { .. } | Chart::Disk { .. } | Chart::Circle { .. } => {}
            Chart::FlatPolar => {
                let r = x[0];
                gamma[3] = -r; // Gamma^r_theta,theta
                gamma[5] = 1.0 / r; // Gamma^theta_r,theta
                gamma[6] = 1.0 / r;
            }
            Chart::StripCover { .. } => {
                let r = x[1];
                gamma[1] = 1.0 / r; // Gamma^theta_theta,r
                gamma[2] = 1.0 / r;
                gamma[4] = -r; // Gamma^r_theta,theta
            }
            Chart::Product(a, b) => {
                let k = a.dim();
                let (ga, gb) = (a.christoffel(&x[..k])?, b.christoffel(&x[k..])?);
                for (off, n, g) in [(0, k, ga), (k, d - k, gb)] {
                    for p in 0..n {
                        for i in 0..n {
                            for j in 0..n {
                                gamma[((p + off) * d + i + off) * d + j + off] = g[(p * n + i) * n + j];
                            }
                        }
                    }
                }
            }
            Chart::User(_) => return self.christoffel_fd(x),
        }
        Ok(gamma)
    }

    fn metric_derivatives(&self, x: &[f64], step: f64) -> Result<Vec<DMatrix<f64>>> {
        let mut out = Vec::with_capacity(x.len());
        let mut y = x.to_vec();
        for l in 0..x.len() {
            y[l] = x[l] + step;
            let gp = self.metric(&y)?;
            y[l] = x[l] - step;
            let gm = self.metric(&y)?;
            y[l] = x[l];
            out.push((gp - gm) / (2.0 * step));
        }
        Ok(out)
    }

    fn christoffel_fd(&self, x: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim();
        let g = self.metric(x)?;
        let ginv = g.cholesky().ok_or_else(|| Error::MetricDegenerate(x.to_vec()))?.inverse();
        let coarse = self.metric_derivatives(x, METRIC_FD_STEP)?;
        let fine = self.metric_derivatives(x, 0.5 * METRIC_FD_STEP)?;
        // one Richardson step removes the O(step^2) term
        let dg: Vec<DMatrix<f64>> = coarse.iter().zip(&fine).map(|(c, f)| (f * 4.0 - c) / 3.0).collect();
        let mut gamma = vec![0.0; d * d * d];
        for k in 0..d {
            for i in 0..d {
                for j in 0..d {
                    let mut s = 0.0;
                    for l in 0..d {
                        s += ginv[(k, l)] * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
                    }
                    gamma[(k * d + i) * d + j] = 0.5 * s;
                }
            }
        }
        Ok(gamma)
    }

    /// True when the curvature tensor vanishes identically (all catalog
    /// charts).
    pub fn is_flat(&self) -> bool {
        match self {
            Chart::Product(a, b) => a.is_flat() && b.is_flat(),
            Chart::User(_) => false,
            _ => true,
        }
    }

    /// Curvature tensor `Rm(d_a, d_b, d_c, d_f)` at `x`.
    pub fn riemann(&self, x: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim();
        if self.is_flat() {
            self.check(x)?;
            return Ok(vec![0.0; d * d * d * d]);
        }
        let g = self.metric(x)?;
        let gamma = self.christoffel(x)?;
        let idx = |k: usize, i: usize, j: usize| (k * d + i) * d + j;
        // dgamma[a][idx] = d_a Gamma
        let mut dgamma = Vec::with_capacity(d);
        let mut y = x.to_vec();
        for a in 0..d {
            y[a] = x[a] + CURVATURE_FD_STEP;
            let p = self.christoffel(&y)?;
            y[a] = x[a] - CURVATURE_FD_STEP;
            let m = self.christoffel(&y)?;
            y[a] = x[a];
            dgamma.push(p.iter().zip(&m).map(|(p, m)| (p - m) / (2.0 * CURVATURE_FD_STEP)).collect::<Vec<f64>>());
        }
        // R^e_{cab}: R(d_a, d_b) d_c = R^e_{cab} d_e
        let mut up = vec![0.0; d * d * d * d];
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    for e in 0..d {
                        let mut v = dgamma[a][idx(e, b, c)] - dgamma[b][idx(e, a, c)];
                        for s in 0..d {
                            v += gamma[idx(e, a, s)] * gamma[idx(s, b, c)] - gamma[idx(e, b, s)] * gamma[idx(s, a, c)];
                        }
                        up[((a * d + b) * d + c) * d + e] = v;
                    }
                }
            }
        }
        let mut rm = vec![0.0; d * d * d * d];
        for abc in 0..d * d * d {
            for f in 0..d {
                rm[abc * d + f] = (0..d).map(|e| up[abc * d + e] * g[(e, f)]).sum();
            }
        }
        Ok(rm)
    }

    /// Fiber dimension split for submersion charts.
    pub fn base_dim(&self) -> Option<usize> {
        match self {
            Chart::Product(a, _) => Some(a.dim()),
            Chart::User(u) => u.base_dim,
            _ => None,
        }
    }
}

/// The `g`-orthonormal frame `L^{-T}` from the Cholesky factor `g = L L^T`;
/// for diagonal metrics this is `d_i / |d_i|`.
pub fn orthonormal_frame(chart: &Chart, x: &[f64]) -> Result<DMatrix<f64>> {
    let g = chart.metric(x)?;
    let l = g.cholesky().ok_or_else(|| Error::MetricDegenerate(x.to_vec()))?.l();
    let d = chart.dim();
    let lt = l.transpose();
    lt.solve_upper_triangular(&DMatrix::identity(d, d)).ok_or_else(|| Error::MetricDegenerate(x.to_vec()))
}

/// `max |E^T g E - I|`.
pub fn frame_defect(chart: &Chart, x: &[f64], frame: &DMatrix<f64>) -> Result<f64> {
    let g = chart.metric(x)?;
    let d = chart.dim();
    Ok((frame.transpose() * g * frame - DMatrix::identity(d, d)).amax())
}

/// Samples `(t_i, x_i)` of a curve with strictly increasing `t`; evaluated
/// by linear interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath {
    pub t: Vec<f64>,
    pub x: Vec<Vec<f64>>,
}

impl SampledPath {
    pub fn new(t: Vec<f64>, x: Vec<Vec<f64>>) -> Result<Self> {
        if t.len() < 2 || t.len() != x.len() {
            return Err(Error::InvalidPath("need at least two samples with one point each".into()));
        }
        let d = x[0].len();
        if d == 0 || x.iter().any(|p| p.len() != d) {
            return Err(Error::InvalidPath("samples have inconsistent dimension".into()));
        }
        if t.iter().chain(x.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidPath("non-finite sample".into()));
        }
        if t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidPath("parameter t must be strictly increasing".into()));
        }
        Ok(SampledPath { t, x })
    }

    /// `n + 1` samples of `f` on `[t0, t1]`.
    pub fn from_fn(t0: f64, t1: f64, n: usize, f: impl Fn(f64) -> Vec<f64>) -> Result<Self> {
        let t: Vec<f64> = (0..=n).map(|i| t0 + (t1 - t0) * i as f64 / n.max(1) as f64).collect();
        let x = t.iter().map(|&s| f(s)).collect();
        SampledPath::new(t, x)
    }

    pub fn dim(&self) -> usize {
        self.x[0].len()
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn start(&self) -> &[f64] {
        &self.x[0]
    }

    pub fn end(&self) -> &[f64] {
        &self.x[self.x.len() - 1]
    }

    /// Linear interpolation inside segment `i`.
    fn at(&self, i: usize, t: f64) -> Vec<f64> {
        let w = (t - self.t[i]) / (self.t[i + 1] - self.t[i]);
        self.x[i].iter().zip(&self.x[i + 1]).map(|(a, b)| a + w * (b - a)).collect()
    }

    fn slope(&self, i: usize) -> Vec<f64> {
        let dt = self.t[i + 1] - self.t[i];
        self.x[i].iter().zip(&self.x[i + 1]).map(|(a, b)| (b - a) / dt).collect()
    }

    /// Value at any `t` in range, clamped at the ends.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let i = self.t.partition_point(|&s| s <= t).clamp(1, self.t.len() - 1) - 1;
        self.at(i, t.clamp(self.t[0], self.t[self.t.len() - 1]))
    }
}

struct Trajectory {
    t: Vec<f64>,
    y: Vec<Vec<f64>>,
    /// Indices into `t`/`y` of the breakpoints.
    knots: Vec<usize>,
}

/// RK4 over `[breaks[i], breaks[i+1]]` with `ceil(STEPS_PER_UNIT * dt) *
/// factor` steps per interval. `f(segment, t, y)` is the vector field.
fn rk4<F>(breaks: &[f64], y0: Vec<f64>, factor: usize, f: F) -> Result<Trajectory>
where
    F: Fn(usize, f64, &[f64]) -> Result<Vec<f64>>,
{
    let axpy = |y: &[f64], h: f64, k: &[f64]| -> Vec<f64> { y.iter().zip(k).map(|(a, b)| a + h * b).collect() };
    let mut traj = Trajectory { t: vec![breaks[0]], y: vec![y0], knots: vec![0] };
    for seg in 0..breaks.len() - 1 {
        let (a, b) = (breaks[seg], breaks[seg + 1]);
        let n = ((STEPS_PER_UNIT * (b - a)).ceil().max(1.0) as usize) * factor;
        let h = (b - a) / n as f64;
        for s in 0..n {
            let t = a + h * s as f64;
            let y = traj.y.last().unwrap();
            let k1 = f(seg, t, y)?;
            let k2 = f(seg, t + 0.5 * h, &axpy(y, 0.5 * h, &k1))?;
            let k3 = f(seg, t + 0.5 * h, &axpy(y, 0.5 * h, &k2))?;
            let k4 = f(seg, t + h, &axpy(y, h, &k3))?;
            let next: Vec<f64> =
                (0..y.len()).map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect();
            traj.t.push(if s + 1 == n { b } else { t + h });
            traj.y.push(next);
        }
        traj.knots.push(traj.t.len() - 1);
    }
    Ok(traj)
}

fn max_knot_gap(coarse: &Trajectory, fine: &Trajectory) -> f64 {
    coarse
        .knots
        .iter()
        .zip(&fine.knots)
        .flat_map(|(&i, &j)| coarse.y[i].iter().zip(&fine.y[j]).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max)
}

/// `dE^k_a = -Gamma^k_ij xdot^i E^j_a`, with `E` column-major in `e`.
fn transport_rhs(gamma: &[f64], xdot: &[f64], e: &[f64], d: usize, out: &mut [f64]) {
    for a in 0..d {
        for k in 0..d {
            let mut s = 0.0;
            for i in 0..d {
                if xdot[i] == 0.0 {
                    continue;
                }
                for j in 0..d {
                    s += gamma[(k * d + i) * d + j] * xdot[i] * e[a * d + j];
                }
            }
            out[a * d + k] = -s;
        }
    }
}

fn check_frame(chart: &Chart, x: &[f64], frame: &DMatrix<f64>) -> Result<()> {
    let d = chart.dim();
    if frame.shape() != (d, d) {
        return Err(Error::InvalidParameter(format!("frame must be {d}x{d}")));
    }
    let defect = frame_defect(chart, x, frame)?;
    if defect > 1e-10 {
        return Err(Error::InvalidParameter(format!("initial frame is not g-orthonormal (defect {defect:e})")));
    }
    Ok(())
}

fn frame_from(e: &[f64], d: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(d, d, e)
}

#[derive(Debug, Clone)]
pub struct Transport {
    /// Frame at each sample of the curve; column `a` is `E_a`.
    pub frames: Vec<DMatrix<f64>>,
    /// Largest `|E^T g E - I|` over all samples.
    pub orthonormality: f64,
    pub convergence: f64,
}

impl Transport {
    pub fn frames_ok(&self) -> bool {
        self.orthonormality <= FRAME_TOL
    }
}

pub fn parallel_transport(chart: &Chart, curve: &SampledPath, frame0: &DMatrix<f64>) -> Result<Transport> {
    let d = chart.dim();
    if curve.dim() != d {
        return Err(Error::InvalidPath(format!("curve has dimension {}, chart has {d}", curve.dim())));
    }
    if let Some(p) = curve.x.iter().find(|p| !chart.contains(p)) {
        return Err(Error::InvalidPath(format!("sample {p:?} lies outside the chart")));
    }
    check_frame(chart, curve.start(), frame0)?;
    let run = |factor| {
        rk4(&curve.t, frame0.as_slice().to_vec(), factor, |seg, t, e| {
            let gamma = chart.christoffel(&curve.at(seg, t))?;
            let mut out = vec![0.0; d * d];
            transport_rhs(&gamma, &curve.slope(seg), e, d, &mut out);
            Ok(out)
        })
    };
    let coarse = run(1)?;
    let fine = run(2)?;
    let mut frames = Vec::with_capacity(curve.len());
    let mut orthonormality: f64 = 0.0;
    for (i, &k) in fine.knots.iter().enumerate() {
        let e = frame_from(&fine.y[k], d);
        orthonormality = orthonormality.max(frame_defect(chart, &curve.x[i], &e)?);
        frames.push(e);
    }
    Ok(Transport { frames, orthonormality, convergence: max_knot_gap(&coarse, &fine) })
}

#[derive(Debug, Clone)]
pub struct Development {
    /// Every RK4 step of the finer run.
    pub t: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub frames: Vec<DMatrix<f64>>,
    pub orthonormality: f64,
    pub convergence: f64,
}

impl Development {
    pub fn end(&self) -> &[f64] {
        &self.x[self.x.len() - 1]
    }

    pub fn frames_ok(&self) -> bool {
        self.orthonormality <= FRAME_TOL
    }
}

/// Development of a velocity profile sampled at breakpoints (linear in
/// between): `gamma' = E(t) v(t)`, `gamma(t_0) = p`, `E` parallel.
pub fn develop(chart: &Chart, p: &[f64], frame0: &DMatrix<f64>, v: &SampledPath) -> Result<Development> {
    develop_with(chart, p, frame0, &v.t, |seg, t| v.at(seg, t))
}

/// Development of a profile given as a function on `[0, t_end]`.
pub fn develop_fn(
    chart: &Chart,
    p: &[f64],
    frame0: &DMatrix<f64>,
    t_end: f64,
    v: impl Fn(f64) -> Vec<f64>,
) -> Result<Development> {
    develop_with(chart, p, frame0, &[0.0, t_end], |_, t| v(t))
}

fn develop_with(
    chart: &Chart,
    p: &[f64],
    frame0: &DMatrix<f64>,
    breaks: &[f64],
    v: impl Fn(usize, f64) -> Vec<f64>,
) -> Result<Development> {
    let d = chart.dim();
    if p.len() != d {
        return Err(Error::InvalidParameter(format!("start point must have {d} coordinates")));
    }
    chart.check(p)?;
    check_frame(chart, p, frame0)?;
    let mut y0 = p.to_vec();
    y0.extend_from_slice(frame0.as_slice());
    let rhs = |seg: usize, t: f64, y: &[f64]| -> Result<Vec<f64>> {
        let (x, e) = y.split_at(d);
        let vel = v(seg, t);
        if vel.len() != d {
            return Err(Error::InvalidPath(format!("velocity must have {d} components")));
        }
        let mut out = vec![0.0; d + d * d];
        for a in 0..d {
            for k in 0..d {
                out[k] += e[a * d + k] * vel[a];
            }
        }
        let gamma = chart.christoffel(x)?;
        let (xdot, edot) = out.split_at_mut(d);
        transport_rhs(&gamma, xdot, e, d, edot);
        Ok(out)
    };
    let coarse = rk4(breaks, y0.clone(), 1, rhs)?;
    let fine = rk4(breaks, y0, 2, rhs)?;
    let mut x = Vec::with_capacity(fine.t.len());
    let mut frames = Vec::with_capacity(fine.t.len());
    let mut orthonormality: f64 = 0.0;
    for y in &fine.y {
        let e = frame_from(&y[d..], d);
        orthonormality = orthonormality.max(frame_defect(chart, &y[..d], &e)?);
        x.push(y[..d].to_vec());
        frames.push(e);
    }
    Ok(Development { t: fine.t.clone(), x, frames, orthonormality, convergence: max_knot_gap(&coarse, &fine) })
}

#[derive(Debug, Clone)]
pub struct Lift {
    /// Lifted path in total-space coordinates, sampled at the base samples.
    pub path: SampledPath,
    pub fiber_start: Vec<f64>,
    pub fiber_end: Vec<f64>,
}

/// Horizontal lift of `base_path` starting at the fiber point
/// `fiber_start`.
///
/// For charts with a base/fiber split the fiber coordinates follow
/// `w' = -g_ff^{-1} g_fb x'`, which keeps the velocity orthogonal to the
/// fibers; on a product they stay constant. For the strip cover the base
/// path is given in Cartesian coordinates of the annulus and the angle is
/// unwound continuously, `fiber_start = [theta_0]` selecting the sheet.
pub fn horizontal_lift(total: &Chart, base_path: &SampledPath, fiber_start: &[f64]) -> Result<Lift> {
    if let Chart::StripCover { r_in, r_out } = total {
        return strip_lift(total, *r_in, *r_out, base_path, fiber_start);
    }
    let k = total.base_dim().ok_or(Error::NotASubmersionChart)?;
    let d = total.dim();
    if base_path.dim() != k {
        return Err(Error::InvalidPath(format!("base path must have {k} coordinates")));
    }
    if fiber_start.len() != d - k {
        return Err(Error::InvalidParameter(format!("fiber point must have {} coordinates", d - k)));
    }
    let point = |x: &[f64], w: &[f64]| -> Vec<f64> { x.iter().chain(w).copied().collect() };
    let run = |factor| {
        rk4(&base_path.t, fiber_start.to_vec(), factor, |seg, t, w| {
            let g = total.metric(&point(&base_path.at(seg, t), w))?;
            let xdot = DVector::from_vec(base_path.slope(seg));
            let g_ff = g.view((k, k), (d - k, d - k)).into_owned();
            let rhs = -(g.view((k, 0), (d - k, k)) * xdot);
            let wdot = g_ff.cholesky().ok_or_else(|| Error::MetricDegenerate(w.to_vec()))?.solve(&rhs);
            Ok(wdot.as_slice().to_vec())
        })
    };
    let fine = run(2)?;
    let x: Vec<Vec<f64>> = fine.knots.iter().zip(&base_path.x).map(|(&i, b)| point(b, &fine.y[i])).collect();
    let fiber_end = x[x.len() - 1][k..].to_vec();
    Ok(Lift { path: SampledPath::new(base_path.t.clone(), x)?, fiber_start: fiber_start.to_vec(), fiber_end })
}

fn strip_lift(total: &Chart, r_in: f64, r_out: f64, base: &SampledPath, fiber_start: &[f64]) -> Result<Lift> {
    if base.dim() != 2 {
        return Err(Error::InvalidPath("strip-cover base paths are planar".into()));
    }
    if fiber_start.len() != 1 {
        return Err(Error::InvalidParameter("strip-cover fiber point is a single angle".into()));
    }
    let wrap = |a: f64| a - 2.0 * PI * (a / (2.0 * PI)).round();
    let p = base.start();
    if wrap(fiber_start[0] - p[1].atan2(p[0])).abs() > 1e-9 {
        return Err(Error::InvalidParameter("starting angle does not lie over the base point".into()));
    }
    let mut theta = fiber_start[0];
    let mut prev = p[1].atan2(p[0]);
    let mut x = Vec::with_capacity(base.len());
    for q in &base.x {
        let r = q[0].hypot(q[1]);
        if r < r_in - 1e-12 || r > r_out + 1e-12 {
            return Err(Error::InvalidPath(format!("sample {q:?} lies outside the annulus")));
        }
        let a = q[1].atan2(q[0]);
        let step = wrap(a - prev);
        if step.abs() > 0.5 * PI {
            return Err(Error::InvalidPath("samples too sparse to unwind the angle".into()));
        }
        theta += step;
        prev = a;
        x.push(vec![theta, r]);
    }
    debug_assert!(x.iter().all(|p| total.contains(p)));
    let fiber_end = vec![theta];
    Ok(Lift { path: SampledPath::new(base.t.clone(), x)?, fiber_start: fiber_start.to_vec(), fiber_end })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Holonomy {
    /// Distance between the fiber coordinates of the two lifted endpoints.
    pub gap: f64,
    /// For the strip cover, `(theta_a - theta_b) / 2 pi` rounded.
    pub winding: Option<i64>,
    /// For the strip cover, whether `gap = 2 pi |winding|` to 1e-6.
    pub quantized: Option<bool>,
    pub fiber_ends: [Vec<f64>; 2],
}

pub fn holonomy_path_independence(
    total: &Chart,
    a: &SampledPath,
    b: &SampledPath,
    fiber_start: &[f64],
) -> Result<Holonomy> {
    let close = |p: &[f64], q: &[f64]| p.len() == q.len() && p.iter().zip(q).all(|(x, y)| (x - y).abs() <= 1e-9);
    if !close(a.start(), b.start()) || !close(a.end(), b.end()) {
        return Err(Error::InvalidPath("paths must share both endpoints".into()));
    }
    let la = horizontal_lift(total, a, fiber_start)?;
    let lb = horizontal_lift(total, b, fiber_start)?;
    let diff: Vec<f64> = la.fiber_end.iter().zip(&lb.fiber_end).map(|(x, y)| x - y).collect();
    let gap = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
    let (winding, quantized) = match total {
        Chart::StripCover { .. } => {
            let w = (diff[0] / (2.0 * PI)).round();
            (Some(w as i64), Some((gap - 2.0 * PI * w.abs()).abs() <= 1e-6))
        }
        _ => (None, None),
    };
    Ok(Holonomy { gap, winding, quantized, fiber_ends: [la.fiber_end, lb.fiber_end] })
}

/// Holonomy of a closed base loop: compares its lift with the constant path.
pub fn loop_holonomy(total: &Chart, lp: &SampledPath, fiber_start: &[f64]) -> Result<Holonomy> {
    let p = lp.start().to_vec();
    let constant = SampledPath::new(vec![lp.t[0], lp.t[lp.len() - 1]], vec![p.clone(), p])?;
    holonomy_path_independence(total, lp, &constant, fiber_start)
}

pub type VelocityFn = Arc<dyn Fn(f64, f64) -> Vec<f64> + Send + Sync>;

/// A one-parameter family of velocity profiles `v(u, t)`, `t` in
/// `[0, t_end]`, all developed from the same point and frame.
#[derive(Clone)]
pub struct VelocityFamily {
    pub t_end: f64,
    pub v: VelocityFn,
}

impl VelocityFamily {
    pub fn new(t_end: f64, v: impl Fn(f64, f64) -> Vec<f64> + Send + Sync + 'static) -> Self {
        VelocityFamily { t_end, v: Arc::new(v) }
    }

    fn du(&self, u: f64, t: f64) -> Vec<f64> {
        let p = (self.v)(u + JACOBI_DU, t);
        let m = (self.v)(u - JACOBI_DU, t);
        p.iter().zip(&m).map(|(p, m)| (p - m) / (2.0 * JACOBI_DU)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct JacobiResult {
    pub u: Vec<f64>,
    /// `U(u, t_end)` in the transported frame.
    pub u_end: Vec<Vec<f64>>,
    /// Central differences in `u` of the developed endpoints, expressed in
    /// the same frame.
    pub fd: Vec<Vec<f64>>,
    pub max_fd_gap: f64,
    pub convergence: f64,
}

/// Variation field `U_i = g(d_u gamma, E_i)` of a family of developments.
///
/// With `X_ij = g(nabla_u E_i, E_j)` the Cauchy problem
/// `U_i'' = d_u d_t v_i + sum_j d_t v_j X_ji + sum v_k v_l U_j Rm(E_k, E_j, E_l, E_i)`,
/// `X_ij' = sum v_l U_k Rm(E_l, E_k, E_i, E_j)`, `U = X = 0`,
/// `U'(0) = d_u v(0)` is integrated in its first-integral form
/// `U_i' = d_u v_i + sum_j v_j X_ji`, which needs no `t` derivatives of `v`.
pub fn jacobi_transport(
    chart: &Chart,
    p: &[f64],
    frame0: &DMatrix<f64>,
    family: &VelocityFamily,
    us: &[f64],
) -> Result<JacobiResult> {
    let d = chart.dim();
    chart.check(p)?;
    check_frame(chart, p, frame0)?;
    let tol = if matches!(chart, Chart::User(_)) { 1e-3 } else { 1e-4 };
    let flat = chart.is_flat();
    let mut out = JacobiResult { u: us.to_vec(), u_end: Vec::new(), fd: Vec::new(), max_fd_gap: 0.0, convergence: 0.0 };
    for &u in us {
        let mut y0 = p.to_vec();
        y0.extend_from_slice(frame0.as_slice());
        y0.extend(std::iter::repeat_n(0.0, d + d * d));
        let rhs = |_: usize, t: f64, y: &[f64]| -> Result<Vec<f64>> {
            let (x, rest) = y.split_at(d);
            let (e, rest) = rest.split_at(d * d);
            let (uu, xx) = rest.split_at(d);
            let v = (family.v)(u, t);
            let dv = family.du(u, t);
            let ef = frame_from(e, d);
            let tvec = &ef * DVector::from_column_slice(&v);
            let mut dy = vec![0.0; 2 * d + 2 * d * d];
            dy[..d].copy_from_slice(tvec.as_slice());
            let gamma = chart.christoffel(x)?;
            transport_rhs(&gamma, tvec.as_slice(), e, d, &mut dy[d..d + d * d]);
            let off = d + d * d;
            for i in 0..d {
                dy[off + i] = dv[i] + (0..d).map(|j| v[j] * xx[j * d + i]).sum::<f64>();
            }
            if !flat {
                // X' = E^T M E with M_cf = Rm(T, S, d_c, d_f)
                let rm = chart.riemann(x)?;
                let svec = &ef * DVector::from_column_slice(uu);
                let mut m = DMatrix::zeros(d, d);
                for a in 0..d {
                    for b in 0..d {
                        let w = tvec[a] * svec[b];
                        if w == 0.0 {
                            continue;
                        }
                        for c in 0..d {
                            for f in 0..d {
                                m[(c, f)] += w * rm[((a * d + b) * d + c) * d + f];
                            }
                        }
                    }
                }
                let xdot = ef.transpose() * m * &ef;
                for i in 0..d {
                    for j in 0..d {
                        dy[off + d + i * d + j] = xdot[(i, j)];
                    }
                }
            }
            Ok(dy)
        };
        let breaks = [0.0, family.t_end];
        let coarse = rk4(&breaks, y0.clone(), 1, rhs)?;
        let fine = rk4(&breaks, y0, 2, rhs)?;
        let yc = coarse.y.last().unwrap();
        let yf = fine.y.last().unwrap();
        let uoff = d + d * d;
        let gap = (0..d).map(|i| (yc[uoff + i] - yf[uoff + i]).abs()).fold(0.0, f64::max);
        if gap > tol {
            return Err(Error::GridTooCoarse(gap));
        }
        out.convergence = out.convergence.max(gap);
        let u_end = yf[uoff..uoff + d].to_vec();

        // finite-difference check through develop()
        let v = family.v.clone();
        let end = |s: f64| -> Result<Vec<f64>> {
            let v = v.clone();
            Ok(develop_fn(chart, p, frame0, family.t_end, move |t| v(s, t))?.end().to_vec())
        };
        let (xp, xm) = (end(u + JACOBI_DU)?, end(u - JACOBI_DU)?);
        let dx = DVector::from_iterator(d, xp.iter().zip(&xm).map(|(a, b)| (a - b) / (2.0 * JACOBI_DU)));
        let x1 = &yf[..d];
        let e1 = frame_from(&yf[d..d + d * d], d);
        let fd = e1.transpose() * chart.metric(x1)? * dx;
        let fd = fd.as_slice().to_vec();
        let fd_gap = fd.iter().zip(&u_end).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        out.max_fd_gap = out.max_fd_gap.max(fd_gap);
        out.u_end.push(u_end);
        out.fd.push(fd);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(d: usize) -> DMatrix<f64> {
        DMatrix::identity(d, d)
    }

    #[test]
    fn flat_transport_keeps_frame() {
        let chart = Chart::FlatCartesian { dim: 3 };
        let curve = SampledPath::from_fn(0.0, 1.0, 20, |t| vec![t.sin(), t * t, 1.0 - t]).unwrap();
        let tr = parallel_transport(&chart, &curve, &id(3)).unwrap();
        assert!(tr.frames.iter().all(|e| (e - id(3)).amax() == 0.0));
    }

    #[test]
    fn polar_circle_matches_cartesian_transport() {
        // In Cartesian coordinates a parallel frame is constant; at angle
        // theta the constant vector e_x has polar components
        // (cos theta, -sin theta / r).
        let chart = Chart::FlatPolar;
        let n = 400;
        let curve = SampledPath::from_fn(0.0, 1.0, n, |t| vec![1.0, 2.0 * PI * t]).unwrap();
        let frame0 = orthonormal_frame(&chart, &[1.0, 0.0]).unwrap();
        let tr = parallel_transport(&chart, &curve, &frame0).unwrap();
        assert!(tr.frames_ok());
        for (i, e) in tr.frames.iter().enumerate() {
            let th = curve.x[i][1];
            assert!((e[(0, 0)] - th.cos()).abs() < 1e-8);
            assert!((e[(1, 0)] + th.sin()).abs() < 1e-8);
        }
        assert!((&tr.frames[n] - &frame0).amax() < 1e-8);
    }

    #[test]
    fn product_base_motion_leaves_fiber_columns() {
        let chart = Chart::Product(Box::new(Chart::FlatPolar), Box::new(Chart::Circle { radius: 2.0 }));
        let curve = SampledPath::from_fn(0.0, 1.0, 50, |t| vec![1.0 + t, 3.0 * t, 0.7]).unwrap();
        let frame0 = orthonormal_frame(&chart, curve.start()).unwrap();
        let tr = parallel_transport(&chart, &curve, &frame0).unwrap();
        for e in &tr.frames {
            assert_eq!(e.column(2), frame0.column(2));
        }
        assert!(tr.frames_ok());
    }

    #[test]
    fn straight_and_radial_developments() {
        let flat = Chart::FlatCartesian { dim: 2 };
        let dev = develop_fn(&flat, &[0.5, -1.0], &id(2), 1.0, |_| vec![1.0, 0.0]).unwrap();
        assert!((dev.end()[0] - 1.5).abs() < 1e-12 && (dev.end()[1] + 1.0).abs() < 1e-12);
        let polar = Chart::FlatPolar;
        let dev = develop_fn(&polar, &[1.0, 0.0], &orthonormal_frame(&polar, &[1.0, 0.0]).unwrap(), 1.0, |_| {
            vec![1.0, 0.0]
        })
        .unwrap();
        assert!((dev.end()[0] - 2.0).abs() < 1e-12 && dev.end()[1].abs() < 1e-12);
    }

    #[test]
    fn retracing_returns_to_start() {
        let chart = Chart::round_sphere();
        let p = [1.0, 0.3];
        let f0 = orthonormal_frame(&chart, &p).unwrap();
        // w vanishes at t = 1, so the retraced profile stays continuous
        let w = |t: f64| vec![(1.0 - t) * (0.6 + 0.2 * t), (1.0 - t) * (-0.3 + 0.5 * t)];
        let v = move |t: f64| if t <= 1.0 { w(t) } else { w(2.0 - t).iter().map(|c| -c).collect() };
        let dev = develop_fn(&chart, &p, &f0, 2.0, v).unwrap();
        assert!(dev.frames_ok());
        assert!(dev.end().iter().zip(&p).all(|(a, b)| (a - b).abs() < 1e-6), "{:?}", dev.end());
    }

    #[test]
    fn velocity_recomputed_in_frame() {
        let chart = Chart::FlatPolar;
        let p = [1.0, 0.0];
        let f0 = orthonormal_frame(&chart, &p).unwrap();
        let v = |t: f64| vec![0.3 * (2.0 * t).cos(), 0.5 + 0.2 * t];
        let dev = develop_fn(&chart, &p, &f0, 1.0, v).unwrap();
        for i in 1..dev.t.len() - 1 {
            let dt = dev.t[i + 1] - dev.t[i - 1];
            let xdot = DVector::from_iterator(2, (0..2).map(|k| (dev.x[i + 1][k] - dev.x[i - 1][k]) / dt));
            let g = chart.metric(&dev.x[i]).unwrap();
            let comp = dev.frames[i].transpose() * g * xdot;
            let want = v(dev.t[i]);
            assert!((comp[0] - want[0]).abs() < 1e-6 && (comp[1] - want[1]).abs() < 1e-6);
        }
    }

    #[test]
    fn sphere_christoffels_and_curvature() {
        let chart = Chart::round_sphere();
        let x = [0.9, 0.4];
        let g = chart.christoffel(&x).unwrap();
        // Gamma^theta_phi,phi = -sin cos, Gamma^phi_theta,phi = cot
        assert!((g[3] + x[0].sin() * x[0].cos()).abs() < 1e-8);
        assert!((g[5] - 1.0 / x[0].tan()).abs() < 1e-8);
        let rm = chart.riemann(&x).unwrap();
        // Rm(d_theta, d_phi, d_phi, d_theta) = K |d_theta|^2 |d_phi|^2, K = 1
        let want = x[0].sin().powi(2);
        // index ((a*2+b)*2+c)*2+f with (a,b,c,f) = (0,1,1,0)
        assert!((rm[6] - want).abs() < 1e-5, "{}", rm[6]);
    }

    #[test]
    fn product_lift_is_constant_in_fiber() {
        let chart = Chart::Product(Box::new(Chart::Disk { radius: 1.0 }), Box::new(Chart::Circle { radius: 0.5 }));
        let base = SampledPath::from_fn(0.0, 1.0, 30, |t| vec![0.5 * (3.0 * t).cos(), 0.4 * t.sin()]).unwrap();
        let lift = horizontal_lift(&chart, &base, &[1.25]).unwrap();
        assert!(lift.path.x.iter().all(|p| p[2] == 1.25));
        assert!(matches!(horizontal_lift(&Chart::FlatPolar, &base, &[0.0]), Err(Error::NotASubmersionChart)));
    }

    fn circle_loop(c: [f64; 2], r: f64, turns: f64) -> SampledPath {
        SampledPath::from_fn(0.0, 1.0, 400, |t| {
            let a = 2.0 * PI * turns * t;
            vec![c[0] + r * a.cos(), c[1] + r * a.sin()]
        })
        .unwrap()
    }

    #[test]
    fn strip_cover_deck_shift() {
        let chart = Chart::StripCover { r_in: 1.0, r_out: 2.0 };
        let around = circle_loop([0.0, 0.0], 1.5, 1.0);
        let lift = horizontal_lift(&chart, &around, &[0.0]).unwrap();
        assert!((lift.fiber_end[0] - 2.0 * PI).abs() < 1e-12);
        let h = loop_holonomy(&chart, &around, &[0.0]).unwrap();
        assert_eq!(h.winding, Some(1));
        assert_eq!(h.quantized, Some(true));
        // a small loop that does not encircle the hole
        let small = SampledPath::from_fn(0.0, 1.0, 200, |t| {
            let a = 2.0 * PI * t;
            vec![1.5 + 0.3 * (a.cos() - 1.0) + 0.3, 0.3 * a.sin()]
        })
        .unwrap();
        let h = loop_holonomy(&chart, &small, &[0.0]).unwrap();
        assert!(h.gap < 1e-6);
    }

    #[test]
    fn heisenberg_lift_measures_area() {
        let chart = Chart::heisenberg();
        let lp = circle_loop([0.0, 0.0], 0.5, 1.0);
        let h = loop_holonomy(&chart, &lp, &[0.0]).unwrap();
        // w' = (x y' - y x') / 2 integrates to the enclosed (polygon) area
        let n = lp.len() - 1;
        let area: f64 = (0..n).map(|i| 0.5 * (lp.x[i][0] * lp.x[i + 1][1] - lp.x[i + 1][0] * lp.x[i][1])).sum();
        assert!((h.gap - area).abs() < 1e-9, "{} vs {area}", h.gap);
        assert!((area - PI * 0.25).abs() < 1e-4);
        let sheared = Chart::sheared_product(0.8);
        let h = loop_holonomy(&sheared, &lp, &[0.0]).unwrap();
        assert!(h.gap < 1e-9);
    }

    #[test]
    fn jacobi_flat_examples() {
        let chart = Chart::FlatCartesian { dim: 2 };
        let fam = VelocityFamily::new(1.0, |u, _| vec![1.0 + u, 0.0]);
        let r = jacobi_transport(&chart, &[0.0, 0.0], &id(2), &fam, &[0.0, 0.5]).unwrap();
        for (u, fd) in r.u_end.iter().zip(&r.fd) {
            assert!((u[0] - 1.0).abs() < 1e-9 && u[1].abs() < 1e-12);
            assert!((fd[0] - 1.0).abs() < 1e-9);
        }
        let still = VelocityFamily::new(1.0, |_, t| vec![t, 1.0]);
        let r = jacobi_transport(&chart, &[0.0, 0.0], &id(2), &still, &[0.3]).unwrap();
        assert!(r.u_end[0].iter().all(|v| v.abs() < 1e-12));
        // endpoint-fixed: the integral of v over [0, 1] does not depend on u
        let fixed = VelocityFamily::new(1.0, |u, t| vec![1.0 + u * (2.0 * PI * t).sin(), u * (1.0 - 2.0 * t)]);
        let r = jacobi_transport(&chart, &[0.0, 0.0], &id(2), &fixed, &[0.0, 0.7]).unwrap();
        assert!(r.u_end.iter().flatten().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn jacobi_on_sphere_matches_finite_differences() {
        let chart = Chart::round_sphere();
        let p = [PI / 2.0, 0.0];
        let f0 = orthonormal_frame(&chart, &p).unwrap();
        let fam = VelocityFamily::new(1.0, |u, t| vec![(0.8 * u).cos() * (1.0 + 0.3 * t), (0.8 * u).sin()]);
        let r = jacobi_transport(&chart, &p, &f0, &fam, &[0.2, 0.9]).unwrap();
        assert!(r.max_fd_gap < 1e-3, "{}", r.max_fd_gap);
        // the geodesic fan has nonzero transverse variation
        assert!(r.u_end[0].iter().any(|v| v.abs() > 0.1));
    }

    #[test]
    fn leaving_the_chart_is_reported() {
        let chart = Chart::FlatPolar;
        let f0 = orthonormal_frame(&chart, &[0.5, 0.0]).unwrap();
        let res = develop_fn(&chart, &[0.5, 0.0], &f0, 1.0, |_| vec![-1.0, 0.0]);
        assert!(matches!(res, Err(Error::LeftChartDomain(_))));
    }
}
