//! `steklov-lab`: Steklov spectra, trace diagnostics, product spectra and
//! the development lab from the command line.
//!
//! Exit codes: 0 on success, 2 for usage or validation errors, 3 when a
//! numerical method fails.

mod develop_cmd;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use steklov_core::io::{load_tmesh, sig17, to_json, write_tmesh, CriticalLengthRecord, ProductRecord, SpectralRecord};
use steklov_core::product::critical_circle_radius;
use steklov_core::trace::{inverse_trace_checks, sweep_csv, tol, SweepRow};
use steklov_core::{
    build_mesh, critical_length, product_steklov_spectrum, refine, rigidity_condition, steklov_spectrum, sweep,
    trace_report, DomainShape, FiberSpectrum, ProductSpec, SweepFamily, TraceReport,
};

use crate::output::emit;

#[derive(Parser)]
#[command(name = "steklov-lab", version, about = "Steklov spectra, trace estimates and holonomy experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Steklov eigenvalues of a planar domain by P1 finite elements.
    Steklov(SteklovArgs),
    /// Trace-estimate report for one domain.
    Trace(TraceArgs),
    /// Trace reports over a one-parameter family of domains.
    Sweep(SweepArgs),
    /// Separated Steklov spectrum of B^m(R) x F.
    Product(ProductArgs),
    /// Parallel transport, developments, lifts and holonomy on metric charts.
    Develop(develop_cmd::DevelopArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ShapeKind {
    Disk,
    Ellipse,
    Rectangle,
    Annulus,
    Polygon,
    PerturbedDisk,
}

#[derive(Args)]
struct ShapeArgs {
    #[arg(long, value_enum)]
    shape: Option<ShapeKind>,
    /// Read the mesh from a `.tmesh` file instead of meshing a shape.
    #[arg(long, conflicts_with = "shape")]
    mesh: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    /// Rectangle width.
    #[arg(long)]
    w: Option<f64>,
    /// Rectangle height.
    #[arg(long = "h-len")]
    h_len: Option<f64>,
    #[arg(long = "r-in")]
    r_in: Option<f64>,
    #[arg(long = "r-out")]
    r_out: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    k: Option<u32>,
    /// Polygon vertices, counter-clockwise: `x,y;x,y;...`.
    #[arg(long)]
    vertices: Option<String>,
}

impl ShapeArgs {
    fn shape(&self) -> Result<DomainShape> {
        let need = |v: Option<f64>, flag: &str| v.with_context(|| format!("--{flag} is required for this shape"));
        let Some(kind) = self.shape else { bail!("one of --shape or --mesh is required") };
        let shape = match kind {
            ShapeKind::Disk => DomainShape::Disk { radius: self.radius },
            ShapeKind::Ellipse => DomainShape::Ellipse { a: need(self.a, "a")?, b: need(self.b, "b")? },
            ShapeKind::Rectangle => DomainShape::Rectangle { width: need(self.w, "w")?, height: need(self.h_len, "h-len")? },
            ShapeKind::Annulus => DomainShape::Annulus { r_in: need(self.r_in, "r-in")?, r_out: need(self.r_out, "r-out")? },
            ShapeKind::PerturbedDisk => {
                DomainShape::PerturbedDisk { eps: need(self.eps, "eps")?, k: self.k.context("--k is required for this shape")? }
            }
            ShapeKind::Polygon => {
                let text = self.vertices.as_deref().context("--vertices is required for polygons")?;
                DomainShape::Polygon { vertices: parse_vertices(text)? }
            }
        };
        shape.validate()?;
        Ok(shape)
    }
}

fn parse_vertices(text: &str) -> Result<Vec<[f64; 2]>> {
    text.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|pair| {
            let v: Vec<f64> = pair.split(',').map(|s| s.trim().parse::<f64>()).collect::<Result<_, _>>()
                .with_context(|| format!("bad vertex {pair:?}"))?;
            match v[..] {
                [x, y] => Ok([x, y]),
                _ => bail!("vertex {pair:?} must be `x,y`"),
            }
        })
        .collect()
}

#[derive(Args)]
struct SteklovArgs {
    #[command(flatten)]
    shape: ShapeArgs,
    /// Mesh size.
    #[arg(long)]
    h: Option<f64>,
    /// Number of eigenvalues after sigma_0.
    #[arg(long, default_value_t = 4)]
    num: usize,
    /// Uniform refinements applied after meshing.
    #[arg(long, default_value_t = 0)]
    refine: u32,
    /// Also write the mesh in `.tmesh` format.
    #[arg(long)]
    write_mesh: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TraceArgs {
    #[command(flatten)]
    shape: ShapeArgs,
    #[arg(long)]
    h: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyKind {
    EllipseAspect,
    PerturbedDisk,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_enum)]
    family: FamilyKind,
    #[arg(long)]
    from: f64,
    #[arg(long)]
    to: f64,
    #[arg(long)]
    steps: usize,
    /// Mode number of the perturbed disk.
    #[arg(long, default_value_t = 3)]
    k: u32,
    #[arg(long)]
    h: f64,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FiberKind {
    Circle,
    Torus,
    List,
}

#[derive(Args)]
struct ProductArgs {
    #[arg(long, default_value_t = 1)]
    m: u32,
    #[arg(long = "R", default_value_t = 1.0)]
    radius: f64,
    #[arg(long, value_enum)]
    fiber: Option<FiberKind>,
    /// Circle radius, or first torus side.
    #[arg(long = "L")]
    l: Option<f64>,
    /// Second torus side.
    #[arg(long = "L2")]
    l2: Option<f64>,
    /// Fiber eigenvalues for `--fiber list`, comma separated, starting with 0.
    #[arg(long)]
    list: Option<String>,
    #[arg(long, default_value_t = 5)]
    num: usize,
    /// Report the critical circle radius; alone, prints the root of
    /// `(1/L) tanh(1/L) = 1`.
    #[arg(long = "critical-L")]
    critical_l: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_steklov(args: &SteklovArgs) -> Result<()> {
    let (mut mesh, descriptor, shape) = match &args.shape.mesh {
        Some(path) => {
            let mesh = load_tmesh(path).with_context(|| format!("reading {}", path.display()))?;
            (mesh, format!("mesh({})", path.display()), None)
        }
        None => {
            let shape = args.shape.shape()?;
            let h = args.h.context("--h is required when meshing a shape")?;
            (build_mesh(&shape, h)?, shape.descriptor(), Some(shape))
        }
    };
    for _ in 0..args.refine {
        let shape = shape.as_ref().context("--refine needs a catalog shape for boundary snapping")?;
        mesh = refine(&mesh, shape);
    }
    if let Some(path) = &args.write_mesh {
        output::write_atomic(path, &write_tmesh(&mesh))?;
    }
    let result = steklov_spectrum(&mesh, args.num)?;
    emit(args.out.as_deref(), &to_json(&SpectralRecord::new(descriptor, &result)))
}

#[derive(Serialize)]
struct TraceRecord<'a> {
    report: &'a TraceReport,
    #[serde(serialize_with = "sig17::serialize")]
    tol: f64,
    cs_ok: bool,
    brock_ok: bool,
    brock_stronger: bool,
}

fn cmd_trace(args: &TraceArgs) -> Result<()> {
    let report = trace_report(&args.shape.shape()?, args.h)?;
    let checks = inverse_trace_checks(&report);
    let rec = TraceRecord {
        report: &report,
        tol: tol(args.h),
        cs_ok: checks.cs_ok,
        brock_ok: checks.brock_ok,
        brock_stronger: checks.brock_stronger,
    };
    emit(args.out.as_deref(), &to_json(&rec))
}

#[derive(Serialize)]
struct SweepEntry<'a> {
    #[serde(serialize_with = "sig17::serialize")]
    param: f64,
    report: &'a TraceReport,
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let family = match args.family {
        FamilyKind::EllipseAspect => SweepFamily::EllipseAspect { from: args.from, to: args.to },
        FamilyKind::PerturbedDisk => SweepFamily::PerturbedDisk { from: args.from, to: args.to, k: args.k },
    };
    let rows: Vec<SweepRow> = sweep(&family, args.steps, args.h)?;
    let text = match args.format {
        Format::Csv => sweep_csv(&rows),
        Format::Json => {
            let entries: Vec<SweepEntry> = rows.iter().map(|r| SweepEntry { param: r.param, report: &r.report }).collect();
            to_json(&entries)
        }
    };
    emit(args.out.as_deref(), &text)
}

fn cmd_product(args: &ProductArgs) -> Result<()> {
    let Some(kind) = args.fiber else {
        if !args.critical_l {
            bail!("--fiber is required unless --critical-L is given alone");
        }
        let l = critical_length();
        let rec = CriticalLengthRecord { critical_l: l, f_at_root: (1.0 / l) * (1.0 / l).tanh() };
        return emit(args.out.as_deref(), &to_json(&rec));
    };
    let fiber = match kind {
        FiberKind::Circle => FiberSpectrum::Circle { radius: args.l.context("--L is required for a circle fiber")? },
        FiberKind::Torus => FiberSpectrum::FlatTorus {
            l1: args.l.context("--L is required for a torus fiber")?,
            l2: args.l2.context("--L2 is required for a torus fiber")?,
        },
        FiberKind::List => {
            let text = args.list.as_deref().context("--list is required for a list fiber")?;
            let values = text
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .context("--list must be comma-separated numbers")?;
            FiberSpectrum::List(values)
        }
    };
    let spec = ProductSpec { m: args.m, radius: args.radius, fiber, num: args.num };
    let spectrum = product_steklov_spectrum(&spec)?;
    let rigidity = match rigidity_condition(&spec) {
        Ok(r) => Some(r),
        Err(steklov_core::Error::NoPositiveEigenvalue) => None,
        Err(e) => return Err(e.into()),
    };
    let critical = if args.critical_l {
        if !matches!(spec.fiber, FiberSpectrum::Circle { .. }) {
            bail!("--critical-L applies to circle fibers");
        }
        Some(critical_circle_radius(spec.m, spec.radius)?)
    } else {
        None
    };
    emit(args.out.as_deref(), &to_json(&ProductRecord::new(&spec, &spectrum, rigidity.as_ref(), critical)))
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("STEKLOV_LAB_THREADS") {
        let n: usize = v.trim().parse().ok().filter(|&n| n > 0).context("STEKLOV_LAB_THREADS must be a positive integer")?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Steklov(a) => cmd_steklov(&a),
        Command::Trace(a) => cmd_trace(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Product(a) => cmd_product(&a),
        Command::Develop(a) => develop_cmd::run(&a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let numeric = err.chain().any(|e| e.downcast_ref::<steklov_core::Error>().is_some_and(|e| e.is_numeric()));
            ExitCode::from(if numeric { 3 } else { 2 })
        }
    }
}
