use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::Serialize;

use steklov_core::develop::{loop_holonomy, orthonormal_frame, Holonomy};
use steklov_core::io::{read_paths, sig17, to_json, HolonomyRecord};
use steklov_core::{
    develop, holonomy_path_independence, horizontal_lift, jacobi_transport, parallel_transport, Chart, SampledPath,
    VelocityFamily,
};

use crate::output::emit;

#[derive(Clone, Copy, ValueEnum)]
pub enum ChartKind {
    FlatCartesian,
    FlatPolar,
    Disk,
    StripCover,
    ProductDiskCircle,
    Sphere,
    Heisenberg,
    ShearedProduct,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Mode {
    Transport,
    Develop,
    Lift,
    Holonomy,
    Jacobi,
}

#[derive(Args)]
pub struct DevelopArgs {
    #[arg(long, value_enum)]
    chart: ChartKind,
    #[arg(long, value_enum)]
    mode: Mode,
    /// Curve, base path, loop, or a pair of paths separated by a blank line.
    #[arg(long, visible_alias = "paths")]
    path: Option<PathBuf>,
    /// Velocity profile `t v_1 ... v_d` in the parallel frame.
    #[arg(long)]
    v: Option<PathBuf>,
    /// Variation profile `w`; the jacobi family is `v + u w`.
    #[arg(long)]
    dv: Option<PathBuf>,
    /// Number of `u` values in `[0, 1]` for jacobi.
    #[arg(long = "u-steps", default_value_t = 5)]
    u_steps: usize,
    /// Start point in chart coordinates, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    start: Option<String>,
    /// Fiber coordinates of the lift start, comma separated.
    #[arg(long = "fiber-start", allow_hyphen_values = true)]
    fiber_start: Option<String>,
    /// Dimension of the flat Cartesian chart.
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Disk radius for disk and product charts.
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    /// Fiber circle radius for the product chart.
    #[arg(long = "L", default_value_t = 1.0)]
    l: f64,
    #[arg(long = "r-in", default_value_t = 1.0)]
    r_in: f64,
    #[arg(long = "r-out", default_value_t = 2.0)]
    r_out: f64,
    #[arg(long, default_value_t = 1.0)]
    shear: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl DevelopArgs {
    fn chart(&self) -> Result<Chart> {
        let positive = |v: f64, flag: &str| if v.is_finite() && v > 0.0 { Ok(v) } else { bail!("--{flag} must be positive") };
        Ok(match self.chart {
            ChartKind::FlatCartesian => {
                if self.dim == 0 {
                    bail!("--dim must be at least 1");
                }
                Chart::FlatCartesian { dim: self.dim }
            }
            ChartKind::FlatPolar => Chart::FlatPolar,
            ChartKind::Disk => Chart::Disk { radius: positive(self.radius, "radius")? },
            ChartKind::StripCover => {
                if !(self.r_in > 0.0 && self.r_in < self.r_out) {
                    bail!("strip cover needs 0 < r-in < r-out");
                }
                Chart::StripCover { r_in: self.r_in, r_out: self.r_out }
            }
            ChartKind::ProductDiskCircle => Chart::Product(
                Box::new(Chart::Disk { radius: positive(self.radius, "radius")? }),
                Box::new(Chart::Circle { radius: positive(self.l, "L")? }),
            ),
            ChartKind::Sphere => Chart::round_sphere(),
            ChartKind::Heisenberg => Chart::heisenberg(),
            ChartKind::ShearedProduct => Chart::sheared_product(self.shear),
        })
    }

    fn default_start(&self, chart: &Chart) -> Vec<f64> {
        match self.chart {
            ChartKind::FlatPolar => vec![1.0, 0.0],
            ChartKind::StripCover => vec![0.0, 0.5 * (self.r_in + self.r_out)],
            ChartKind::Sphere => vec![0.5 * PI, 0.0],
            _ => vec![0.0; chart.dim()],
        }
    }
}

fn parse_list(text: &str, flag: &str) -> Result<Vec<f64>> {
    text.split(',').map(|s| s.trim().parse::<f64>()).collect::<Result<_, _>>().with_context(|| format!("--{flag} must be comma-separated numbers"))
}

fn load_paths(path: Option<&Path>, flag: &str) -> Result<Vec<SampledPath>> {
    let path = path.with_context(|| format!("--{flag} is required for this mode"))?;
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(read_paths(&text)?)
}

fn single(paths: Vec<SampledPath>, flag: &str) -> Result<SampledPath> {
    match <[SampledPath; 1]>::try_from(paths) {
        Ok([p]) => Ok(p),
        Err(v) => bail!("--{flag} must hold exactly one path, found {}", v.len()),
    }
}

fn rows(path: &SampledPath) -> Vec<Vec<f64>> {
    path.t.iter().zip(&path.x).map(|(t, x)| std::iter::once(*t).chain(x.iter().copied()).collect()).collect()
}

fn columns(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    m.column_iter().map(|c| c.iter().copied().collect()).collect()
}

#[derive(Serialize)]
struct TransportRecord {
    chart: String,
    samples: usize,
    frames_ok: bool,
    #[serde(serialize_with = "sig17::serialize")]
    orthonormality: f64,
    #[serde(serialize_with = "sig17::serialize")]
    convergence: f64,
    #[serde(serialize_with = "sig17::matrix")]
    final_frame: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct DevelopRecord {
    chart: String,
    #[serde(serialize_with = "sig17::vec")]
    start: Vec<f64>,
    #[serde(serialize_with = "sig17::vec")]
    end: Vec<f64>,
    frames_ok: bool,
    #[serde(serialize_with = "sig17::serialize")]
    orthonormality: f64,
    #[serde(serialize_with = "sig17::serialize")]
    convergence: f64,
}

#[derive(Serialize)]
struct LiftRecord {
    chart: String,
    #[serde(serialize_with = "sig17::vec")]
    fiber_start: Vec<f64>,
    #[serde(serialize_with = "sig17::vec")]
    fiber_end: Vec<f64>,
    /// `t x_1 ... x_d` rows of the lifted path.
    #[serde(serialize_with = "sig17::matrix")]
    lifted: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct JacobiRecord {
    chart: String,
    #[serde(serialize_with = "sig17::vec")]
    u: Vec<f64>,
    #[serde(rename = "U", serialize_with = "sig17::matrix")]
    u_end: Vec<Vec<f64>>,
    #[serde(serialize_with = "sig17::matrix")]
    fd: Vec<Vec<f64>>,
    #[serde(serialize_with = "sig17::serialize")]
    max_fd_gap: f64,
    #[serde(serialize_with = "sig17::serialize")]
    convergence: f64,
}

/// Fiber start for lifts: explicit, or the angle over the base start for the
/// strip cover, or the fiber origin.
fn fiber_start(args: &DevelopArgs, chart: &Chart, base: &SampledPath) -> Result<Vec<f64>> {
    if let Some(text) = &args.fiber_start {
        return parse_list(text, "fiber-start");
    }
    Ok(match chart {
        Chart::StripCover { .. } => vec![base.start()[1].atan2(base.start()[0])],
        _ => {
            let k = chart.base_dim().context("chart is not a submersion chart")?;
            vec![0.0; chart.dim() - k]
        }
    })
}

/// Whether frames transported along both lifted paths stay orthonormal.
fn lifted_frames_ok(chart: &Chart, paths: &[&SampledPath], fiber: &[f64]) -> Result<bool> {
    for p in paths {
        let lift = horizontal_lift(chart, p, fiber)?;
        let frame = orthonormal_frame(chart, lift.path.start())?;
        if !parallel_transport(chart, &lift.path, &frame)?.frames_ok() {
            return Ok(false);
        }
    }
    Ok(true)
}

pub fn run(args: &DevelopArgs) -> Result<()> {
    let chart = args.chart()?;
    let name = chart.name();
    let start = match &args.start {
        Some(s) => parse_list(s, "start")?,
        None => args.default_start(&chart),
    };
    let text = match args.mode {
        Mode::Transport => {
            let curve = single(load_paths(args.path.as_deref(), "path")?, "path")?;
            let frame = orthonormal_frame(&chart, curve.start())?;
            let tr = parallel_transport(&chart, &curve, &frame)?;
            to_json(&TransportRecord {
                chart: name,
                samples: curve.len(),
                frames_ok: tr.frames_ok(),
                orthonormality: tr.orthonormality,
                convergence: tr.convergence,
                final_frame: columns(tr.frames.last().expect("at least two samples")),
            })
        }
        Mode::Develop => {
            let v = single(load_paths(args.v.as_deref(), "v")?, "v")?;
            let frame = orthonormal_frame(&chart, &start)?;
            let dev = develop(&chart, &start, &frame, &v)?;
            to_json(&DevelopRecord {
                chart: name,
                start: start.clone(),
                end: dev.end().to_vec(),
                frames_ok: dev.frames_ok(),
                orthonormality: dev.orthonormality,
                convergence: dev.convergence,
            })
        }
        Mode::Lift => {
            let base = single(load_paths(args.path.as_deref(), "path")?, "path")?;
            let fiber = fiber_start(args, &chart, &base)?;
            let lift = horizontal_lift(&chart, &base, &fiber)?;
            to_json(&LiftRecord { chart: name, fiber_start: lift.fiber_start, fiber_end: lift.fiber_end, lifted: rows(&lift.path) })
        }
        Mode::Holonomy => {
            let paths = load_paths(args.path.as_deref(), "path")?;
            let fiber = fiber_start(args, &chart, &paths[0])?;
            let (hol, frames_ok): (Holonomy, bool) = match &paths[..] {
                [lp] => (loop_holonomy(&chart, lp, &fiber)?, lifted_frames_ok(&chart, &[lp], &fiber)?),
                [a, b] => (holonomy_path_independence(&chart, a, b, &fiber)?, lifted_frames_ok(&chart, &[a, b], &fiber)?),
                _ => bail!("holonomy takes one loop or a pair of paths, found {}", paths.len()),
            };
            to_json(&HolonomyRecord { chart: name, gap: hol.gap, winding: hol.winding, frames_ok })
        }
        Mode::Jacobi => {
            let v = single(load_paths(args.v.as_deref(), "v")?, "v")?;
            let w = single(load_paths(args.dv.as_deref(), "dv")?, "dv")?;
            if args.u_steps == 0 {
                bail!("--u-steps must be at least 1");
            }
            let (t0, t1) = (v.t[0], v.t[v.len() - 1]);
            let family = VelocityFamily::new(t1 - t0, move |u, t| {
                let (a, b) = (v.eval(t0 + t), w.eval(t0 + t));
                a.iter().zip(&b).map(|(a, b)| a + u * b).collect()
            });
            let us: Vec<f64> = if args.u_steps == 1 {
                vec![0.0]
            } else {
                (0..args.u_steps).map(|i| i as f64 / (args.u_steps - 1) as f64).collect()
            };
            let frame = orthonormal_frame(&chart, &start)?;
            let r = jacobi_transport(&chart, &start, &frame, &family, &us)?;
            to_json(&JacobiRecord {
                chart: name,
                u: r.u,
                u_end: r.u_end,
                fd: r.fd,
                max_fd_gap: r.max_fd_gap,
                convergence: r.convergence,
            })
        }
    };
    emit(args.out.as_deref(), &text)
}
