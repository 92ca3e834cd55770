//! Trace estimate `sigma_1 + sigma_2 <= |dOmega| / |Omega|` for planar
//! domains, its deficit, and the inverse-trace lower bounds.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::dtn::steklov_spectrum;
use crate::error::{Error, Result};
use crate::io::{fmt17, sig17};
use crate::mesh::{build_mesh, DomainShape};

/// Ambient dimension of the planar FEM.
pub const DIM: usize = 2;

/// Slope of the discretization budget `tol(h) = C h`. The unit disk has
/// deficit 1.203e-3 at `h = 0.1`; this leaves a factor-2 margin there.
pub const TRACE_TOL_SLOPE: f64 = 0.024;

pub fn tol(h: f64) -> f64 {
    TRACE_TOL_SLOPE * h
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceReport {
    pub shape: String,
    pub n: usize,
    #[serde(serialize_with = "sig17::serialize")]
    pub h: f64,
    #[serde(serialize_with = "sig17::serialize")]
    pub sigma1: f64,
    #[serde(serialize_with = "sig17::serialize")]
    pub sigma2: f64,
    #[serde(serialize_with = "sig17::serialize")]
    pub trace_sum: f64,
    #[serde(serialize_with = "sig17::serialize")]
    pub ratio: f64,
    #[serde(serialize_with = "sig17::serialize")]
    pub deficit: f64,
    #[serde(serialize_with = "sig17::serialize")]
    pub inverse_trace: f64,
    #[serde(serialize_with = "sig17::serialize")]
    pub cauchy_schwarz_bound: f64,
    #[serde(serialize_with = "sig17::serialize")]
    pub brock_bound: f64,
}

pub fn trace_report(shape: &DomainShape, h: f64) -> Result<TraceReport> {
    let mesh = build_mesh(shape, h)?;
    let spec = steklov_spectrum(&mesh, DIM)?;
    let (s1, s2) = (spec.eigenvalues[1], spec.eigenvalues[2]);
    let (vol, bvol) = (spec.vol, spec.boundary_vol);
    let ratio = bvol / vol;
    let trace_sum = s1 + s2;
    Ok(TraceReport {
        shape: shape.descriptor(),
        n: DIM,
        h,
        sigma1: s1,
        sigma2: s2,
        trace_sum,
        ratio,
        deficit: ratio - trace_sum,
        inverse_trace: 1.0 / s1 + 1.0 / s2,
        cauchy_schwarz_bound: (DIM * DIM) as f64 * vol / bvol,
        // n Vol^{1/n} / Vol(B^n)^{1/n} with Vol(B^2) = pi
        brock_bound: DIM as f64 * (vol / PI).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseTraceChecks {
    pub cs_ok: bool,
    pub brock_ok: bool,
    pub brock_stronger: bool,
}

/// Compare `1/sigma_1 + 1/sigma_2` against both lower bounds, allowing
/// `tol(h)` for discretization.
pub fn inverse_trace_checks(report: &TraceReport) -> InverseTraceChecks {
    let t = tol(report.h);
    InverseTraceChecks {
        cs_ok: report.inverse_trace >= report.cauchy_schwarz_bound - t,
        brock_ok: report.inverse_trace >= report.brock_bound - t,
        brock_stronger: report.brock_bound >= report.cauchy_schwarz_bound - 1e-12,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepFamily {
    /// `ellipse(a, 1)` for `a` from `from` to `to`.
    EllipseAspect { from: f64, to: f64 },
    /// `perturbed-disk(eps, k)` for `eps` from `from` to `to`.
    PerturbedDisk { from: f64, to: f64, k: u32 },
}

impl SweepFamily {
    pub fn shape(&self, param: f64) -> DomainShape {
        match *self {
            SweepFamily::EllipseAspect { .. } => DomainShape::Ellipse { a: param, b: 1.0 },
            SweepFamily::PerturbedDisk { k, .. } => DomainShape::PerturbedDisk { eps: param, k },
        }
    }

    /// `steps` equally spaced parameters; a single step is `from` alone.
    pub fn params(&self, steps: usize) -> Vec<f64> {
        let (from, to) = match *self {
            SweepFamily::EllipseAspect { from, to } | SweepFamily::PerturbedDisk { from, to, .. } => (from, to),
        };
        match steps {
            0 => Vec::new(),
            1 => vec![from],
            _ => (0..steps)
                .map(|i| if i + 1 == steps { to } else { from + (to - from) * i as f64 / (steps - 1) as f64 })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub param: f64,
    pub report: TraceReport,
}

pub fn sweep(family: &SweepFamily, steps: usize, h: f64) -> Result<Vec<SweepRow>> {
    if steps == 0 {
        return Err(Error::InvalidParameter("steps must be at least 1".into()));
    }
    sweep_params(family, &family.params(steps), h)
}

/// Reports for explicit parameter values, computed in parallel and returned
/// in input order.
pub fn sweep_params(family: &SweepFamily, params: &[f64], h: f64) -> Result<Vec<SweepRow>> {
    for &p in params {
        family.shape(p).validate()?;
    }
    params
        .par_iter()
        .map(|&param| trace_report(&family.shape(param), h).map(|report| SweepRow { param, report }))
        .collect()
}

pub const SWEEP_CSV_HEADER: &str = "param,sigma1,sigma2,trace_sum,ratio,deficit,cs_bound,brock_bound";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for row in rows {
        let r = &row.report;
        let fields = [row.param, r.sigma1, r.sigma2, r.trace_sum, r.ratio, r.deficit, r.cauchy_schwarz_bound, r.brock_bound];
        let line: Vec<String> = fields.iter().map(|&v| fmt17(v)).collect();
        writeln!(out, "{}", line.join(",")).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_deficit_within_budget() {
        let r = trace_report(&DomainShape::Disk { radius: 1.0 }, 0.1).unwrap();
        assert!(r.deficit.abs() <= tol(0.1) / 1.99, "{}", r.deficit);
        assert!((r.ratio - 2.0).abs() < 0.01);
        let c = inverse_trace_checks(&r);
        assert!(c.cs_ok && c.brock_ok && c.brock_stronger);
    }

    #[test]
    fn rectangle_bounds() {
        let r = trace_report(&DomainShape::Rectangle { width: 1.0, height: 1.0 }, 0.1).unwrap();
        assert!((r.ratio - 4.0).abs() < 1e-12);
        assert!((r.brock_bound - 2.0 / PI.sqrt()).abs() < 1e-12);
        assert!((r.cauchy_schwarz_bound - 1.0).abs() < 1e-12);
        assert!(r.trace_sum < 4.0);
    }

    #[test]
    fn single_step_sweep_matches_report() {
        let fam = SweepFamily::EllipseAspect { from: 1.5, to: 2.0 };
        let rows = sweep(&fam, 1, 0.1).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].report, trace_report(&DomainShape::Ellipse { a: 1.5, b: 1.0 }, 0.1).unwrap());
    }

    #[test]
    fn params_hit_endpoints() {
        let fam = SweepFamily::PerturbedDisk { from: 0.0, to: 0.05, k: 3 };
        assert_eq!(fam.params(3), vec![0.0, 0.025, 0.05]);
        assert!(sweep(&fam, 0, 0.1).is_err());
        let bad = SweepFamily::PerturbedDisk { from: 0.0, to: 0.5, k: 3 };
        assert!(matches!(sweep(&bad, 2, 0.1), Err(Error::InvalidShape(_))));
    }

    #[test]
    fn csv_layout() {
        let fam = SweepFamily::EllipseAspect { from: 1.0, to: 1.5 };
        let csv = sweep_csv(&sweep(&fam, 2, 0.2).unwrap());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], SWEEP_CSV_HEADER);
        assert_eq!(lines.len(), 3);
        for l in &lines[1..] {
            let f: Vec<&str> = l.split(',').collect();
            assert_eq!(f.len(), 8);
            for v in f {
                let mantissa = v.split('e').next().unwrap().trim_start_matches('-').replace('.', "");
                assert_eq!(mantissa.len(), 17, "{v}");
                v.parse::<f64>().unwrap();
            }
        }
    }

    #[test]
    fn rigid_motions_leave_report_unchanged() {
        let base = vec![[1.0, 0.0], [0.4, 0.8], [-0.9, 0.5], [-0.7, -0.6], [0.3, -0.9]];
        let (c, s) = (0.7f64.cos(), 0.7f64.sin());
        let moved: Vec<[f64; 2]> = base.iter().map(|p| [c * p[0] - s * p[1] + 3.0, s * p[0] + c * p[1] - 1.5]).collect();
        let a = trace_report(&DomainShape::Polygon { vertices: base }, 0.1).unwrap();
        let b = trace_report(&DomainShape::Polygon { vertices: moved }, 0.1).unwrap();
        for (x, y) in [(a.sigma1, b.sigma1), (a.sigma2, b.sigma2), (a.ratio, b.ratio), (a.inverse_trace, b.inverse_trace)] {
            assert!((x - y).abs() <= 1e-8, "{x} vs {y}");
        }
    }
}
