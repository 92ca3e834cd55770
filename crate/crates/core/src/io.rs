//! Text formats: `.tmesh` meshes, sampled paths, and JSON result records
//! with 17 significant digits.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::value::RawValue;

use crate::develop::SampledPath;
use crate::dtn::SpectralResult;
use crate::error::{Error, Result};
use crate::mesh::{BoundaryEdge, TriangleMesh};
use crate::product::{ProductSpec, ProductSpectrum, Rigidity};

/// Scientific notation with 17 significant digits, e.g. `1.0000000000000000e0`.
/// Non-finite values render as `NaN`, `inf`, `-inf`.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// JSON number token for `x`; `null` when not finite.
pub fn json17(x: f64) -> Box<RawValue> {
    let text = if x.is_finite() { fmt17(x) } else { "null".to_string() };
    RawValue::from_string(text).expect("formatted float is a valid JSON number")
}

/// Serde helpers emitting floats at 17 significant digits.
pub mod sig17 {
    use serde::ser::SerializeSeq;
    use serde::Serializer;

    use super::json17;

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_some(&json17(*x))
    }

    pub fn vec<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(xs.len()))?;
        for &x in xs {
            seq.serialize_element(&json17(x))?;
        }
        seq.end()
    }

    pub fn matrix<S: Serializer>(rows: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(rows.len()))?;
        for row in rows {
            let row: Vec<_> = row.iter().map(|&x| json17(x)).collect();
            seq.serialize_element(&row)?;
        }
        seq.end()
    }

    pub fn option<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match x {
            Some(v) => serialize(v, s),
            None => s.serialize_none(),
        }
    }
}

/// Pretty JSON followed by a newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("records serialize");
    s.push('\n');
    s
}

pub fn write_tmesh(mesh: &TriangleMesh) -> String {
    let mut out = String::new();
    writeln!(out, "{} {} {}", mesh.vertices.len(), mesh.triangles.len(), mesh.boundary_edges.len()).unwrap();
    for p in &mesh.vertices {
        writeln!(out, "{} {}", fmt17(p[0]), fmt17(p[1])).unwrap();
    }
    for t in &mesh.triangles {
        writeln!(out, "{} {} {}", t[0], t[1], t[2]).unwrap();
    }
    for e in &mesh.boundary_edges {
        writeln!(out, "{} {} {}", e.a, e.b, e.marker).unwrap();
    }
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    /// Next non-blank line split into fields, with its 1-based number.
    fn fields(&mut self, what: &str) -> Result<(usize, Vec<&'a str>)> {
        for (i, line) in self.inner.by_ref() {
            let f: Vec<&str> = line.split_whitespace().collect();
            if !f.is_empty() {
                return Ok((i + 1, f));
            }
        }
        Err(Error::Parse { line: 0, message: format!("unexpected end of input, expected {what}") })
    }
}

fn parse_num<T: std::str::FromStr>(line: usize, s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Parse { line, message: format!("cannot parse {s:?}") })
}

fn expect_len(line: usize, f: &[&str], n: usize) -> Result<()> {
    if f.len() == n {
        Ok(())
    } else {
        Err(Error::Parse { line, message: format!("expected {n} fields, found {}", f.len()) })
    }
}

/// Parse a `.tmesh` file. All mesh invariants are checked; `h` is set to the
/// longest edge.
pub fn read_tmesh(text: &str) -> Result<TriangleMesh> {
    let mut lines = Lines { inner: text.lines().enumerate() };
    let (ln, head) = lines.fields("header")?;
    expect_len(ln, &head, 3)?;
    let (nv, nt, nb): (usize, usize, usize) = (parse_num(ln, head[0])?, parse_num(ln, head[1])?, parse_num(ln, head[2])?);
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, f) = lines.fields("vertex")?;
        expect_len(ln, &f, 2)?;
        vertices.push([parse_num(ln, f[0])?, parse_num(ln, f[1])?]);
    }
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (ln, f) = lines.fields("triangle")?;
        expect_len(ln, &f, 3)?;
        triangles.push([parse_num(ln, f[0])?, parse_num(ln, f[1])?, parse_num(ln, f[2])?]);
    }
    let mut boundary_edges = Vec::with_capacity(nb);
    for _ in 0..nb {
        let (ln, f) = lines.fields("boundary edge")?;
        expect_len(ln, &f, 3)?;
        let e = BoundaryEdge { a: parse_num(ln, f[0])?, b: parse_num(ln, f[1])?, marker: parse_num(ln, f[2])? };
        if e.a >= nv || e.b >= nv {
            return Err(Error::Parse { line: ln, message: "boundary edge references a missing vertex".into() });
        }
        boundary_edges.push(e);
    }
    if let Ok((ln, _)) = lines.fields("") {
        return Err(Error::Parse { line: ln, message: "trailing data after boundary edges".into() });
    }
    let mut mesh = TriangleMesh { vertices, triangles, boundary_edges, h: 0.0 };
    mesh.validate()?;
    mesh.h = mesh.max_edge_length();
    Ok(mesh)
}

pub fn load_tmesh(path: &Path) -> Result<TriangleMesh> {
    read_tmesh(&std::fs::read_to_string(path)?)
}

/// Sampled paths, one `t x_1 ... x_d` sample per line. Blank lines separate
/// consecutive paths; `#` starts a comment.
pub fn read_paths(text: &str) -> Result<Vec<SampledPath>> {
    let mut paths = Vec::new();
    let mut t = Vec::new();
    let mut x: Vec<Vec<f64>> = Vec::new();
    let mut start = 1;
    let mut flush = |t: &mut Vec<f64>, x: &mut Vec<Vec<f64>>, start: usize| -> Result<()> {
        if !t.is_empty() {
            let p = SampledPath::new(std::mem::take(t), std::mem::take(x))
                .map_err(|e| Error::Parse { line: start, message: e.to_string() })?;
            paths.push(p);
        }
        Ok(())
    };
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            if raw.trim().is_empty() {
                flush(&mut t, &mut x, start)?;
            }
            continue;
        }
        if t.is_empty() {
            start = i + 1;
        }
        let f: Vec<f64> = line.split_whitespace().map(|s| parse_num(i + 1, s)).collect::<Result<_>>()?;
        if f.len() < 2 {
            return Err(Error::Parse { line: i + 1, message: "expected `t x_1 ... x_d`".into() });
        }
        t.push(f[0]);
        x.push(f[1..].to_vec());
    }
    flush(&mut t, &mut x, start)?;
    if paths.is_empty() {
        return Err(Error::InvalidPath("file contains no samples".into()));
    }
    Ok(paths)
}

pub fn write_path(path: &SampledPath) -> String {
    let mut out = String::new();
    for (t, x) in path.t.iter().zip(&path.x) {
        let fields: Vec<String> = std::iter::once(*t).chain(x.iter().copied()).map(fmt17).collect();
        writeln!(out, "{}", fields.join(" ")).unwrap();
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralRecord {
    pub shape: String,
    #[serde(serialize_with = "sig17::serialize")]
    pub h: f64,
    pub nv: usize,
    pub nb: usize,
    #[serde(serialize_with = "sig17::vec")]
    pub eigenvalues: Vec<f64>,
    #[serde(serialize_with = "sig17::serialize")]
    pub vol: f64,
    #[serde(serialize_with = "sig17::serialize")]
    pub bvol: f64,
    /// `sigma_1 + ... + sigma_m` with `m` the ambient dimension.
    #[serde(serialize_with = "sig17::option")]
    pub trace_sum_m: Option<f64>,
    #[serde(serialize_with = "sig17::serialize")]
    pub ratio: f64,
    #[serde(serialize_with = "sig17::option")]
    pub deficit: Option<f64>,
}

impl SpectralRecord {
    pub fn new(shape: String, r: &SpectralResult) -> Self {
        let m = crate::trace::DIM;
        let ratio = r.boundary_vol / r.vol;
        let trace_sum_m = (r.eigenvalues.len() > m).then(|| r.trace_sum(m));
        SpectralRecord {
            shape,
            h: r.h,
            nv: r.num_vertices,
            nb: r.num_boundary,
            eigenvalues: r.eigenvalues.clone(),
            vol: r.vol,
            bvol: r.boundary_vol,
            trace_sum_m,
            ratio,
            deficit: trace_sum_m.map(|s| ratio - s),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Level {
    #[serde(serialize_with = "sig17::serialize")]
    pub value: f64,
    pub mult: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProductRecord {
    pub m: u32,
    #[serde(rename = "R", serialize_with = "sig17::serialize")]
    pub radius: f64,
    pub fiber: String,
    pub num: usize,
    pub eigenvalues: Vec<Level>,
    pub complete: bool,
    #[serde(serialize_with = "sig17::option")]
    pub sigma_mu1: Option<f64>,
    #[serde(serialize_with = "sig17::serialize")]
    pub threshold: f64,
    pub rigidity_holds: Option<bool>,
    #[serde(rename = "critical_L", skip_serializing_if = "Option::is_none", serialize_with = "sig17::option")]
    pub critical_l: Option<f64>,
}

impl ProductRecord {
    pub fn new(spec: &ProductSpec, spectrum: &ProductSpectrum, rigidity: Option<&Rigidity>, critical_l: Option<f64>) -> Self {
        ProductRecord {
            m: spec.m,
            radius: spec.radius,
            fiber: spec.fiber.descriptor(),
            num: spec.num,
            eigenvalues: spectrum.levels.iter().map(|&(value, mult)| Level { value, mult }).collect(),
            complete: spectrum.complete,
            sigma_mu1: rigidity.map(|r| r.sigma_mu1),
            threshold: 1.0 / spec.radius,
            rigidity_holds: rigidity.map(|r| r.holds),
            critical_l,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalLengthRecord {
    #[serde(rename = "critical_L", serialize_with = "sig17::serialize")]
    pub critical_l: f64,
    /// `(1/L) tanh(1/L)` at the root.
    #[serde(serialize_with = "sig17::serialize")]
    pub f_at_root: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HolonomyRecord {
    pub chart: String,
    #[serde(serialize_with = "sig17::serialize")]
    pub gap: f64,
    pub winding: Option<i64>,
    pub frames_ok: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, DomainShape};

    #[test]
    fn float_format() {
        assert_eq!(fmt17(1.0), "1.0000000000000000e0");
        assert_eq!(fmt17(-0.125), "-1.2500000000000000e-1");
        for x in [0.1, 1.0 / 3.0, 2f64.sqrt() * 1e-300, 6.02e23] {
            assert_eq!(fmt17(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(json17(f64::NAN).get(), "null");
    }

    #[test]
    fn tmesh_round_trip() {
        for shape in [DomainShape::Ellipse { a: 1.5, b: 1.0 }, DomainShape::Annulus { r_in: 1.0, r_out: 2.0 }] {
            let mesh = build_mesh(&shape, 0.3).unwrap();
            let back = read_tmesh(&write_tmesh(&mesh)).unwrap();
            assert_eq!(back.vertices, mesh.vertices);
            assert_eq!(back.triangles, mesh.triangles);
            assert_eq!(back.boundary_edges, mesh.boundary_edges);
            assert_eq!(back.h, mesh.max_edge_length());
        }
    }

    #[test]
    fn tmesh_rejects_bad_input() {
        let ok = "3 1 3\n0 0\n1 0\n0 1\n0 1 2\n0 1 0\n1 2 0\n2 0 0\n";
        assert!(read_tmesh(ok).is_ok());
        let flipped = ok.replace("0 1 2\n0 1 0", "0 2 1\n0 1 0");
        assert!(matches!(read_tmesh(&flipped), Err(Error::InvalidMesh(_))));
        assert!(matches!(read_tmesh("3 1 3\n0 0\n1 x\n"), Err(Error::Parse { line: 3, .. })));
        assert!(matches!(read_tmesh(&ok[..ok.len() - 6]), Err(Error::Parse { .. })));
        let missing = ok.replace("2 0 0\n", "");
        assert!(read_tmesh(&missing.replace("3 1 3", "3 1 2")).is_err());
    }

    #[test]
    fn paths_and_pairs() {
        let text = "# loop\n0 1 0\n0.5 0 1\n1 -1 0\n\n0 1 0\n1 -1 0\n";
        let paths = read_paths(text).unwrap();
        assert_eq!(paths.len(), 2);
        assert_eq!(paths[0].x[1], vec![0.0, 1.0]);
        let back = read_paths(&write_path(&paths[0])).unwrap();
        assert_eq!(back[0], paths[0]);
        assert!(matches!(read_paths("0 1\n0 2\n"), Err(Error::Parse { .. })));
        assert!(read_paths("\n\n").is_err());
    }

    #[test]
    fn json_numbers_have_17_digits() {
        let rec = HolonomyRecord { chart: "c".into(), gap: 0.1, winding: Some(-1), frames_ok: true };
        let s = to_json(&rec);
        assert!(s.contains("\"gap\": 1.0000000000000001e-1"), "{s}");
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["gap"].as_f64(), Some(0.1));
    }
}
