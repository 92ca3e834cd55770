//! Catalog domains and their triangle meshes.
//!
//! Star-shaped shapes (disk, ellipse, perturbed disk, star-shaped polygons)
//! are meshed by concentric rings: scaled copies of the boundary curve about
//! a center, each sampled at arc-length spacing close to `h`, stitched
//! ring to ring. Rectangles and annuli use structured grids. Boundary
//! vertices always lie on the exact curve, and [`refine`] snaps new boundary
//! midpoints back onto it.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Number of samples used to tabulate arc length of curved boundaries.
const ARC_TABLE_SAMPLES: usize = 8192;

/// Ring spacing relative to `h`; stitched diagonals then stay below `1.5 h`.
const RING_SPACING: f64 = 0.85;

#[derive(Debug, Clone, PartialEq)]
pub enum DomainShape {
    Disk { radius: f64 },
    Ellipse { a: f64, b: f64 },
    Rectangle { width: f64, height: f64 },
    Annulus { r_in: f64, r_out: f64 },
    /// Vertices in counter-clockwise order, no repeated closing vertex.
    Polygon { vertices: Vec<Point> },
    /// Boundary `r(theta) = 1 + eps * cos(k * theta)`.
    PerturbedDisk { eps: f64, k: u32 },
}

impl DomainShape {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidShape(format!("{name} must be positive, got {v}")))
            }
        };
        match self {
            DomainShape::Disk { radius } => positive("radius", *radius),
            DomainShape::Ellipse { a, b } => {
                positive("a", *a)?;
                positive("b", *b)
            }
            DomainShape::Rectangle { width, height } => {
                positive("width", *width)?;
                positive("height", *height)
            }
            DomainShape::Annulus { r_in, r_out } => {
                positive("r_in", *r_in)?;
                positive("r_out", *r_out)?;
                if r_in >= r_out {
                    return Err(Error::InvalidShape(format!(
                        "annulus needs r_in < r_out, got {r_in} >= {r_out}"
                    )));
                }
                Ok(())
            }
            DomainShape::Polygon { vertices } => validate_polygon(vertices),
            DomainShape::PerturbedDisk { eps, k } => {
                let bound = 1.0 / (1.0 + (*k as f64).powi(2));
                if !eps.is_finite() || eps.abs() >= bound {
                    return Err(Error::InvalidShape(format!(
                        "perturbed disk needs |eps| < {bound}, got {eps}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Short human-readable descriptor used in result records.
    pub fn descriptor(&self) -> String {
        match self {
            DomainShape::Disk { radius } => format!("disk(radius={radius})"),
            DomainShape::Ellipse { a, b } => format!("ellipse(a={a},b={b})"),
            DomainShape::Rectangle { width, height } => {
                format!("rectangle(w={width},h={height})")
            }
            DomainShape::Annulus { r_in, r_out } => {
                format!("annulus(r_in={r_in},r_out={r_out})")
            }
            DomainShape::Polygon { vertices } => format!("polygon(n={})", vertices.len()),
            DomainShape::PerturbedDisk { eps, k } => format!("perturbed-disk(eps={eps},k={k})"),
        }
    }

    /// Inradius used for the step-size precondition. For polygons and the
    /// perturbed disk this is the distance from the mesh center to the
    /// nearest boundary point, a lower bound for the true inradius.
    pub fn inradius(&self) -> f64 {
        match self {
            DomainShape::Disk { radius } => *radius,
            DomainShape::Ellipse { a, b } => a.min(*b),
            DomainShape::Rectangle { width, height } => 0.5 * width.min(*height),
            DomainShape::Annulus { r_in, r_out } => 0.5 * (r_out - r_in),
            DomainShape::Polygon { vertices } => {
                let c = polygon_centroid(vertices);
                (0..vertices.len())
                    .map(|i| segment_distance(c, vertices[i], vertices[(i + 1) % vertices.len()]))
                    .fold(f64::INFINITY, f64::min)
            }
            DomainShape::PerturbedDisk { eps, .. } => 1.0 - eps.abs(),
        }
    }

    /// Exact area where a closed form exists.
    pub fn exact_area(&self) -> Option<f64> {
        match self {
            DomainShape::Disk { radius } => Some(PI * radius * radius),
            DomainShape::Ellipse { a, b } => Some(PI * a * b),
            DomainShape::Rectangle { width, height } => Some(width * height),
            DomainShape::Annulus { r_in, r_out } => Some(PI * (r_out * r_out - r_in * r_in)),
            DomainShape::Polygon { vertices } => Some(signed_area(vertices)),
            DomainShape::PerturbedDisk { eps, k } => {
                if *k == 0 {
                    Some(PI * (1.0 + eps).powi(2))
                } else {
                    Some(PI * (1.0 + 0.5 * eps * eps))
                }
            }
        }
    }

    /// Distance-like residual of `p` from the exact boundary curve
    /// (exact distance for disks, annuli and polygons; radial residual for
    /// the other star-shaped curves).
    pub fn boundary_residual(&self, p: Point) -> f64 {
        let r = p[0].hypot(p[1]);
        match self {
            DomainShape::Disk { radius } => (r - radius).abs(),
            DomainShape::Annulus { r_in, r_out } => (r - r_in).abs().min((r - r_out).abs()),
            DomainShape::Ellipse { .. } | DomainShape::PerturbedDisk { .. } => {
                (r - self.radial(p[1].atan2(p[0]))).abs()
            }
            DomainShape::Rectangle { .. } | DomainShape::Polygon { .. } => {
                let v = self.polygon_vertices();
                (0..v.len())
                    .map(|i| segment_distance(p, v[i], v[(i + 1) % v.len()]))
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// Move a point that sits near the boundary onto the exact curve.
    /// Straight boundaries are left untouched.
    pub fn project_to_boundary(&self, p: Point) -> Point {
        let r = p[0].hypot(p[1]);
        match self {
            DomainShape::Disk { radius } => [p[0] * radius / r, p[1] * radius / r],
            DomainShape::Annulus { r_in, r_out } => {
                let target = if (r - r_in).abs() <= (r - r_out).abs() {
                    *r_in
                } else {
                    *r_out
                };
                [p[0] * target / r, p[1] * target / r]
            }
            DomainShape::Ellipse { .. } | DomainShape::PerturbedDisk { .. } => {
                let theta = p[1].atan2(p[0]);
                let rho = self.radial(theta);
                [rho * theta.cos(), rho * theta.sin()]
            }
            DomainShape::Rectangle { .. } | DomainShape::Polygon { .. } => p,
        }
    }

    /// Boundary radius as a function of polar angle for radial shapes.
    fn radial(&self, theta: f64) -> f64 {
        match self {
            DomainShape::Disk { radius } => *radius,
            DomainShape::Ellipse { a, b } => {
                let (s, c) = theta.sin_cos();
                a * b / ((b * c).powi(2) + (a * s).powi(2)).sqrt()
            }
            DomainShape::PerturbedDisk { eps, k } => 1.0 + eps * (*k as f64 * theta).cos(),
            _ => unreachable!("radial() called on a non-radial shape"),
        }
    }

    fn polygon_vertices(&self) -> Vec<Point> {
        match self {
            DomainShape::Rectangle { width, height } => {
                let (x, y) = (0.5 * width, 0.5 * height);
                vec![[-x, -y], [x, -y], [x, y], [-x, y]]
            }
            DomainShape::Polygon { vertices } => vertices.clone(),
            _ => unreachable!("polygon_vertices() called on a curved shape"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub a: usize,
    pub b: usize,
    pub marker: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    /// Oriented so the domain lies to the left; grouped by boundary
    /// component, each component listed as a closed loop.
    pub boundary_edges: Vec<BoundaryEdge>,
    pub h: f64,
}

impl TriangleMesh {
    /// Build a mesh from vertices and triangles, deriving boundary edges and
    /// markers and checking all invariants.
    pub fn from_triangles(vertices: Vec<Point>, triangles: Vec<[usize; 3]>, h: f64) -> Result<Self> {
        let boundary_edges = boundary_loops(vertices.len(), &triangles)?;
        let mesh = TriangleMesh { vertices, triangles, boundary_edges, h };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_boundary_components(&self) -> usize {
        self.boundary_edges.iter().map(|e| e.marker + 1).max().unwrap_or(0)
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [i, j, k] = self.triangles[t];
        triangle_area(self.vertices[i], self.vertices[j], self.vertices[k])
    }

    /// Boundary vertex ids in ascending order.
    pub fn boundary_vertices(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = self.boundary_edges.iter().flat_map(|e| [e.a, e.b]).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn max_edge_length(&self) -> f64 {
        self.triangles
            .iter()
            .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])])
            .map(|(a, b)| dist(self.vertices[a], self.vertices[b]))
            .fold(0.0, f64::max)
    }

    /// Check orientation, edge manifoldness, boundary consistency and
    /// connectivity.
    pub fn validate(&self) -> Result<()> {
        let nv = self.vertices.len();
        if self.triangles.is_empty() {
            return Err(Error::InvalidMesh("mesh has no triangles".into()));
        }
        if self.vertices.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(Error::InvalidMesh("non-finite vertex coordinate".into()));
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= nv) {
                return Err(Error::InvalidMesh(format!("triangle {t} references a missing vertex")));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::InvalidMesh(format!("triangle {t} repeats a vertex")));
            }
            let area = self.signed_area(t);
            if area.is_nan() || area <= 0.0 {
                return Err(Error::InvalidMesh(format!(
                    "triangle {t} is not positively oriented (area {area:e})"
                )));
            }
        }
        let derived = boundary_loops(nv, &self.triangles)?;
        let key = |e: &BoundaryEdge| (e.a.min(e.b), e.a.max(e.b));
        let mut have: Vec<_> = self.boundary_edges.iter().map(key).collect();
        let mut want: Vec<_> = derived.iter().map(key).collect();
        have.sort_unstable();
        want.sort_unstable();
        if have != want {
            return Err(Error::InvalidMesh(
                "boundary edges differ from the edges used by exactly one triangle".into(),
            ));
        }
        let mut used = vec![false; nv];
        for tri in &self.triangles {
            for &i in tri {
                used[i] = true;
            }
        }
        if used.iter().any(|u| !u) {
            return Err(Error::InvalidMesh("mesh has unreferenced vertices".into()));
        }
        if !is_connected(nv, &self.triangles) {
            return Err(Error::InvalidMesh("mesh is not connected".into()));
        }
        Ok(())
    }

    /// Largest residual of a boundary vertex from the exact curve of `shape`.
    pub fn max_boundary_residual(&self, shape: &DomainShape) -> f64 {
        self.boundary_vertices()
            .into_iter()
            .map(|i| shape.boundary_residual(self.vertices[i]))
            .fold(0.0, f64::max)
    }
}

pub fn build_mesh(shape: &DomainShape, h: f64) -> Result<TriangleMesh> {
    shape.validate()?;
    let limit = shape.inradius();
    if !(h.is_finite() && h > 0.0 && h <= limit) {
        return Err(Error::StepTooCoarse { h, limit });
    }
    let (vertices, triangles) = match shape {
        DomainShape::Rectangle { width, height } => rectangle_grid(*width, *height, h),
        DomainShape::Annulus { r_in, r_out } => annulus_grid(*r_in, *r_out, h),
        DomainShape::Polygon { vertices } => polygon_rings(vertices, h),
        DomainShape::Disk { .. } | DomainShape::Ellipse { .. } | DomainShape::PerturbedDisk { .. } => {
            radial_rings(shape, h)
        }
    };
    TriangleMesh::from_triangles(vertices, triangles, h)
}

/// Uniform 1-to-4 refinement; boundary midpoints are projected onto the exact
/// boundary of `shape`.
pub fn refine(mesh: &TriangleMesh, shape: &DomainShape) -> TriangleMesh {
    let mut vertices = mesh.vertices.clone();
    let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
    let mut boundary_mid: HashMap<(usize, usize), usize> = HashMap::new();
    for e in &mesh.boundary_edges {
        boundary_mid.insert((e.a.min(e.b), e.a.max(e.b)), usize::MAX);
    }
    let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Point>| -> usize {
        let key = (a.min(b), a.max(b));
        *midpoints.entry(key).or_insert_with(|| {
            let (p, q) = (vertices[a], vertices[b]);
            let mut m = [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
            if boundary_mid.contains_key(&key) {
                m = shape.project_to_boundary(m);
            }
            vertices.push(m);
            vertices.len() - 1
        })
    };
    let mut triangles = Vec::with_capacity(4 * mesh.triangles.len());
    for &[a, b, c] in &mesh.triangles {
        let ab = midpoint(a, b, &mut vertices);
        let bc = midpoint(b, c, &mut vertices);
        let ca = midpoint(c, a, &mut vertices);
        triangles.push([a, ab, ca]);
        triangles.push([ab, b, bc]);
        triangles.push([ca, bc, c]);
        triangles.push([ab, bc, ca]);
    }
    let boundary_edges = mesh
        .boundary_edges
        .iter()
        .flat_map(|e| {
            let m = midpoints[&(e.a.min(e.b), e.a.max(e.b))];
            [
                BoundaryEdge { a: e.a, b: m, marker: e.marker },
                BoundaryEdge { a: m, b: e.b, marker: e.marker },
            ]
        })
        .collect();
    TriangleMesh { vertices, triangles, boundary_edges, h: 0.5 * mesh.h }
}

/// `(area, boundary length)` of the discrete domain.
pub fn volumes(mesh: &TriangleMesh) -> (f64, f64) {
    let vol = (0..mesh.triangles.len()).map(|t| mesh.signed_area(t)).sum();
    let bvol = mesh
        .boundary_edges
        .iter()
        .map(|e| dist(mesh.vertices[e.a], mesh.vertices[e.b]))
        .sum();
    (vol, bvol)
}

// ---------------------------------------------------------------------------
// generators

fn rectangle_grid(width: f64, height: f64, h: f64) -> (Vec<Point>, Vec<[usize; 3]>) {
    let nx = (width / h).ceil().max(1.0) as usize;
    let ny = (height / h).ceil().max(1.0) as usize;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        let y = -0.5 * height + height * j as f64 / ny as f64;
        for i in 0..=nx {
            let x = -0.5 * width + width * i as f64 / nx as f64;
            vertices.push([x, y]);
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (v00, v10, v11, v01) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    (vertices, triangles)
}

fn annulus_grid(r_in: f64, r_out: f64, h: f64) -> (Vec<Point>, Vec<[usize; 3]>) {
    let nr = ((r_out - r_in) / h).ceil().max(1.0) as usize;
    let nt = ((2.0 * PI * r_out / h).ceil() as usize).max(6);
    let mut vertices = Vec::with_capacity((nr + 1) * nt);
    for i in 0..=nr {
        let r = if i == nr { r_out } else { r_in + (r_out - r_in) * i as f64 / nr as f64 };
        for j in 0..nt {
            let (s, c) = (2.0 * PI * j as f64 / nt as f64).sin_cos();
            vertices.push([r * c, r * s]);
        }
    }
    let id = |i: usize, j: usize| i * nt + j % nt;
    let mut triangles = Vec::with_capacity(2 * nr * nt);
    for i in 0..nr {
        for j in 0..nt {
            let (v00, v10, v11, v01) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    (vertices, triangles)
}

/// Arc-length parametrisation of a closed curve given by samples of a
/// parameter `s` in `[0, 1]`.
struct ArcTable {
    params: Vec<f64>,
    cumulative: Vec<f64>,
}

impl ArcTable {
    fn new(curve: impl Fn(f64) -> Point) -> Self {
        let params: Vec<f64> =
            (0..=ARC_TABLE_SAMPLES).map(|i| i as f64 / ARC_TABLE_SAMPLES as f64).collect();
        let mut cumulative = Vec::with_capacity(params.len());
        let mut total = 0.0;
        let mut prev = curve(0.0);
        cumulative.push(0.0);
        for &s in &params[1..] {
            let p = curve(s);
            total += dist(prev, p);
            cumulative.push(total);
            prev = p;
        }
        ArcTable { params, cumulative }
    }

    fn length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    /// Parameter at arc-length fraction `f` in `[0, 1]`.
    fn param_at(&self, f: f64) -> f64 {
        let target = f * self.length();
        let i = self.cumulative.partition_point(|&c| c <= target).clamp(1, self.params.len() - 1);
        let (c0, c1) = (self.cumulative[i - 1], self.cumulative[i]);
        let w = if c1 > c0 { (target - c0) / (c1 - c0) } else { 0.0 };
        self.params[i - 1] + w * (self.params[i] - self.params[i - 1])
    }
}

fn radial_rings(shape: &DomainShape, h: f64) -> (Vec<Point>, Vec<[usize; 3]>) {
    let h = RING_SPACING * h;
    let curve = |s: f64| {
        let theta = 2.0 * PI * s;
        let rho = shape.radial(theta);
        [rho * theta.cos(), rho * theta.sin()]
    };
    let table = ArcTable::new(curve);
    let rho_max = (0..ARC_TABLE_SAMPLES)
        .map(|i| shape.radial(2.0 * PI * i as f64 / ARC_TABLE_SAMPLES as f64))
        .fold(0.0, f64::max);
    let rings = (rho_max / h).ceil().max(1.0) as usize;
    let n_outer = ((table.length() / h).ceil() as usize).max(6);
    let outer: Vec<f64> = (0..n_outer).map(|i| i as f64 / n_outer as f64).collect();
    let point = |f: f64, scale: f64| {
        let p = curve(table.param_at(f));
        if scale == 1.0 {
            p
        } else {
            [scale * p[0], scale * p[1]]
        }
    };
    ring_mesh([0.0, 0.0], rings, &outer, point)
}

fn polygon_rings(vertices: &[Point], h: f64) -> (Vec<Point>, Vec<[usize; 3]>) {
    let h = RING_SPACING * h;
    let n = vertices.len();
    let c = polygon_centroid(vertices);
    let lengths: Vec<f64> = (0..n).map(|i| dist(vertices[i], vertices[(i + 1) % n])).collect();
    let perimeter: f64 = lengths.iter().sum();
    // outer ring: every corner plus uniform subdivision of each edge
    let mut outer = Vec::new();
    let mut start = 0.0;
    for (i, &len) in lengths.iter().enumerate() {
        let pieces = (len / h).ceil().max(1.0) as usize;
        for p in 0..pieces {
            outer.push((start + len * p as f64 / pieces as f64) / perimeter);
        }
        start += lengths[i];
    }
    let along = |f: f64| -> Point {
        let mut s = f * perimeter;
        for i in 0..n {
            if s <= lengths[i] || i == n - 1 {
                let w = (s / lengths[i]).clamp(0.0, 1.0);
                let (p, q) = (vertices[i], vertices[(i + 1) % n]);
                return if w == 0.0 {
                    p
                } else {
                    [p[0] + w * (q[0] - p[0]), p[1] + w * (q[1] - p[1])]
                };
            }
            s -= lengths[i];
        }
        unreachable!()
    };
    let rho_max = vertices.iter().map(|&v| dist(v, c)).fold(0.0, f64::max);
    let rings = (rho_max / h).ceil().max(1.0) as usize;
    let point = |f: f64, scale: f64| {
        let p = along(f);
        if scale == 1.0 {
            p
        } else {
            [c[0] + scale * (p[0] - c[0]), c[1] + scale * (p[1] - c[1])]
        }
    };
    ring_mesh(c, rings, &outer, point)
}

/// Concentric ring triangulation. Ring `j` (1..=rings) is the boundary scaled
/// by `j / rings` about `center`, sampled at uniform arc-length fractions;
/// the outermost ring uses the given fractions `outer`.
fn ring_mesh(
    center: Point,
    rings: usize,
    outer: &[f64],
    point: impl Fn(f64, f64) -> Point,
) -> (Vec<Point>, Vec<[usize; 3]>) {
    let mut vertices = vec![center];
    let mut triangles = Vec::new();
    let mut prev: Vec<(f64, usize)> = vec![(0.0, 0)];
    for j in 1..=rings {
        let scale = j as f64 / rings as f64;
        let fractions: Vec<f64> = if j == rings {
            outer.to_vec()
        } else {
            let n = ((outer.len() as f64 * scale).ceil() as usize).max(6);
            (0..n).map(|i| i as f64 / n as f64).collect()
        };
        let ring: Vec<(f64, usize)> = fractions
            .iter()
            .map(|&f| {
                vertices.push(point(f, if j == rings { 1.0 } else { scale }));
                (f, vertices.len() - 1)
            })
            .collect();
        stitch(&prev, &ring, &mut triangles);
        prev = ring;
    }
    (vertices, triangles)
}

/// Triangulate the band between two closed rings whose vertices carry
/// increasing fractions in `[0, 1)`.
fn stitch(inner: &[(f64, usize)], outer: &[(f64, usize)], triangles: &mut Vec<[usize; 3]>) {
    let (ni, no) = (inner.len(), outer.len());
    if ni == 1 {
        for l in 0..no {
            triangles.push([inner[0].1, outer[l].1, outer[(l + 1) % no].1]);
        }
        return;
    }
    let next = |ring: &[(f64, usize)], i: usize| {
        if i + 1 < ring.len() {
            ring[i + 1].0
        } else {
            1.0 + ring[0].0
        }
    };
    let (mut i, mut l) = (0, 0);
    while i < ni || l < no {
        let advance_outer = l < no && (i == ni || next(outer, l) <= next(inner, i));
        if advance_outer {
            triangles.push([inner[i % ni].1, outer[l].1, outer[(l + 1) % no].1]);
            l += 1;
        } else {
            triangles.push([inner[i].1, outer[l % no].1, inner[(i + 1) % ni].1]);
            i += 1;
        }
    }
}

// ---------------------------------------------------------------------------
// topology helpers

/// Directed boundary edges (domain on the left), grouped into closed loops.
/// Loops are discovered from the smallest unvisited boundary vertex and
/// numbered in that order.
fn boundary_loops(nv: usize, triangles: &[[usize; 3]]) -> Result<Vec<BoundaryEdge>> {
    let mut count: BTreeMap<(usize, usize), (usize, usize, usize)> = BTreeMap::new();
    for tri in triangles {
        for (a, b) in [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])] {
            if a >= nv || b >= nv {
                return Err(Error::InvalidMesh("triangle references a missing vertex".into()));
            }
            let entry = count.entry((a.min(b), a.max(b))).or_insert((0, a, b));
            entry.0 += 1;
        }
    }
    let mut next: BTreeMap<usize, usize> = BTreeMap::new();
    for (&(lo, hi), &(c, a, b)) in &count {
        match c {
            1 => {
                if next.insert(a, b).is_some() {
                    return Err(Error::InvalidMesh(format!(
                        "boundary vertex {a} has two outgoing boundary edges"
                    )));
                }
            }
            2 => {}
            _ => {
                return Err(Error::InvalidMesh(format!("edge ({lo}, {hi}) is shared by {c} triangles")))
            }
        }
    }
    let mut edges = Vec::with_capacity(next.len());
    let mut visited = vec![false; nv];
    let mut marker = 0;
    for &start in next.keys() {
        if visited[start] {
            continue;
        }
        let mut a = start;
        loop {
            visited[a] = true;
            let b = *next.get(&a).ok_or_else(|| {
                Error::InvalidMesh(format!("boundary loop through vertex {a} is not closed"))
            })?;
            edges.push(BoundaryEdge { a, b, marker });
            a = b;
            if a == start {
                break;
            }
            if visited[a] {
                return Err(Error::InvalidMesh("boundary loops are not disjoint".into()));
            }
        }
        marker += 1;
    }
    if edges.len() != next.len() {
        return Err(Error::InvalidMesh("boundary is not a union of simple loops".into()));
    }
    Ok(edges)
}

fn is_connected(nv: usize, triangles: &[[usize; 3]]) -> bool {
    let mut parent: Vec<usize> = (0..nv).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for tri in triangles {
        for &v in &tri[1..] {
            let (ra, rb) = (find(&mut parent, tri[0]), find(&mut parent, v));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    }
    let root = find(&mut parent, 0);
    (0..nv).all(|v| find(&mut parent, v) == root)
}

// ---------------------------------------------------------------------------
// planar geometry

pub(crate) fn dist(p: Point, q: Point) -> f64 {
    (p[0] - q[0]).hypot(p[1] - q[1])
}

pub(crate) fn triangle_area(p: Point, q: Point, r: Point) -> f64 {
    0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]))
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    dist(p, [a[0] + t * dx, a[1] + t * dy])
}

fn signed_area(v: &[Point]) -> f64 {
    let n = v.len();
    0.5 * (0..n).map(|i| v[i][0] * v[(i + 1) % n][1] - v[(i + 1) % n][0] * v[i][1]).sum::<f64>()
}

fn polygon_centroid(v: &[Point]) -> Point {
    let n = v.len();
    let a = signed_area(v);
    let (mut cx, mut cy) = (0.0, 0.0);
    for i in 0..n {
        let (p, q) = (v[i], v[(i + 1) % n]);
        let w = p[0] * q[1] - q[0] * p[1];
        cx += (p[0] + q[0]) * w;
        cy += (p[1] + q[1]) * w;
    }
    [cx / (6.0 * a), cy / (6.0 * a)]
}

fn segments_intersect(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    let straddle = |a: f64, b: f64| (a > 0.0 && b < 0.0) || (a < 0.0 && b > 0.0);
    if straddle(d1, d2) && straddle(d3, d4) {
        return true;
    }
    let on = |a: Point, b: Point, p: Point| {
        p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
    };
    (d1 == 0.0 && on(q1, q2, p1))
        || (d2 == 0.0 && on(q1, q2, p2))
        || (d3 == 0.0 && on(p1, p2, q1))
        || (d4 == 0.0 && on(p1, p2, q2))
}

fn validate_polygon(v: &[Point]) -> Result<()> {
    let n = v.len();
    if n < 3 || v.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(Error::NonSimplePolygon);
    }
    if signed_area(v) <= 0.0 {
        return Err(Error::NonSimplePolygon);
    }
    for i in 0..n {
        if dist(v[i], v[(i + 1) % n]) == 0.0 {
            return Err(Error::NonSimplePolygon);
        }
        for j in i + 1..n {
            // adjacent edges share a vertex and are skipped
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if segments_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]) {
                return Err(Error::NonSimplePolygon);
            }
        }
    }
    let c = polygon_centroid(v);
    if (0..n).any(|i| cross(c, v[i], v[(i + 1) % n]) <= 0.0) {
        return Err(Error::NotStarShaped);
    }
    Ok(())
}
