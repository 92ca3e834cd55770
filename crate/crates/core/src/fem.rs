//! P1 finite-element matrices on a [`TriangleMesh`].

use crate::error::{Error, Result};
use crate::mesh::{dist, TriangleMesh};
use crate::sparse::CsrMatrix;

/// Relative area below which a triangle is treated as degenerate.
pub const DEGENERATE_AREA: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct FemMatrices {
    /// `int grad(phi_i) . grad(phi_j)`
    pub stiffness: CsrMatrix,
    /// `int phi_i phi_j` over the domain.
    pub interior_mass: CsrMatrix,
    /// `int_boundary phi_i phi_j`, zero away from boundary vertices.
    pub boundary_mass: CsrMatrix,
    /// Boundary vertex ids, ascending.
    pub boundary_index: Vec<usize>,
    /// Remaining vertex ids, ascending.
    pub interior_index: Vec<usize>,
}

impl FemMatrices {
    pub fn num_dofs(&self) -> usize {
        self.stiffness.nrows()
    }
}

pub fn assemble(mesh: &TriangleMesh) -> Result<FemMatrices> {
    let nv = mesh.num_vertices();
    let nt = mesh.triangles.len();
    let areas: Vec<f64> = (0..nt).map(|t| mesh.signed_area(t)).collect();
    let mean = areas.iter().sum::<f64>() / nt as f64;
    if let Some((index, &area)) = areas.iter().enumerate().find(|(_, &a)| !(a >= DEGENERATE_AREA * mean)) {
        return Err(Error::DegenerateTriangle { index, area });
    }

    let mut stiff = Vec::with_capacity(9 * nt);
    let mut mass = Vec::with_capacity(9 * nt);
    for (tri, &area) in mesh.triangles.iter().zip(&areas) {
        let p = tri.map(|i| mesh.vertices[i]);
        // gradient of phi_i is (b_i, c_i) / (2 area)
        let b = [p[1][1] - p[2][1], p[2][1] - p[0][1], p[0][1] - p[1][1]];
        let c = [p[2][0] - p[1][0], p[0][0] - p[2][0], p[1][0] - p[0][0]];
        for i in 0..3 {
            for j in 0..3 {
                stiff.push((tri[i], tri[j], (b[i] * b[j] + c[i] * c[j]) / (4.0 * area)));
                let m = if i == j { area / 6.0 } else { area / 12.0 };
                mass.push((tri[i], tri[j], m));
            }
        }
    }

    let mut bmass = Vec::with_capacity(4 * mesh.boundary_edges.len());
    for e in &mesh.boundary_edges {
        let len = dist(mesh.vertices[e.a], mesh.vertices[e.b]);
        bmass.push((e.a, e.a, len / 3.0));
        bmass.push((e.b, e.b, len / 3.0));
        bmass.push((e.a, e.b, len / 6.0));
        bmass.push((e.b, e.a, len / 6.0));
    }

    let boundary_index = mesh.boundary_vertices();
    let mut on_boundary = vec![false; nv];
    for &i in &boundary_index {
        on_boundary[i] = true;
    }
    let interior_index = (0..nv).filter(|&i| !on_boundary[i]).collect();

    Ok(FemMatrices {
        stiffness: symmetrize(CsrMatrix::from_triplets(nv, nv, stiff)),
        interior_mass: symmetrize(CsrMatrix::from_triplets(nv, nv, mass)),
        boundary_mass: symmetrize(CsrMatrix::from_triplets(nv, nv, bmass)),
        boundary_index,
        interior_index,
    })
}

/// Make `a[i][j]` and `a[j][i]` bitwise equal. Element contributions are
/// symmetric but summation order can differ between the two entries.
fn symmetrize(a: CsrMatrix) -> CsrMatrix {
    let n = a.nrows();
    let mut t = Vec::with_capacity(a.nnz());
    for i in 0..n {
        for (j, v) in a.row(i) {
            let value = if j < i { a.get(j, i) } else { v };
            t.push((i, j, value));
        }
    }
    CsrMatrix::from_triplets(n, n, t)
}

/// Discrete Steklov Rayleigh quotient `u^T K u / u^T B u`.
pub fn rayleigh_quotient(matrices: &FemMatrices, u: &[f64]) -> Result<f64> {
    let den = matrices.boundary_mass.quadratic_form(u);
    if !(den > 0.0) {
        return Err(Error::ZeroBoundaryTrace);
    }
    Ok(matrices.stiffness.quadratic_form(u) / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, DomainShape};
    use nalgebra::SymmetricEigen;

    fn right_triangle() -> TriangleMesh {
        TriangleMesh::from_triangles(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]], 1.0).unwrap()
    }

    #[test]
    fn reference_element() {
        let m = assemble(&right_triangle()).unwrap();
        let k = m.stiffness.to_dense();
        assert_eq!((k[(0, 0)], k[(1, 1)], k[(2, 2)]), (1.0, 0.5, 0.5));
        assert_eq!((k[(0, 1)], k[(0, 2)], k[(1, 2)]), (-0.5, -0.5, 0.0));
        for i in 0..3 {
            assert_eq!(k.row(i).sum(), 0.0);
        }
        let mass = m.interior_mass.to_dense();
        assert!((mass.sum() - 0.5).abs() < 1e-15);
        let bm = m.boundary_mass.to_dense();
        assert!((bm.sum() - (2.0 + 2f64.sqrt())).abs() < 1e-14);
    }

    #[test]
    fn square_masses_integrate_one() {
        let mesh = build_mesh(&DomainShape::Rectangle { width: 1.0, height: 1.0 }, 0.1).unwrap();
        let m = assemble(&mesh).unwrap();
        let ones = vec![1.0; mesh.num_vertices()];
        assert!((m.interior_mass.quadratic_form(&ones) - 1.0).abs() < 1e-13);
        assert!((m.boundary_mass.quadratic_form(&ones) - 4.0).abs() < 1e-13);
        assert!(m.stiffness.mul_vec(&ones).iter().all(|v| v.abs() < 1e-12));
        assert!(m.stiffness.is_symmetric());
        assert!(m.interior_mass.is_symmetric());
        assert!(m.boundary_mass.is_symmetric());
    }

    #[test]
    fn matrix_ranks_and_kernels() {
        let shape = DomainShape::Disk { radius: 1.0 };
        let mesh = build_mesh(&shape, 0.3).unwrap();
        let m = assemble(&mesh).unwrap();
        let k = SymmetricEigen::new(m.stiffness.to_dense()).eigenvalues;
        let mut k: Vec<f64> = k.iter().copied().collect();
        k.sort_by(f64::total_cmp);
        assert!(k[0].abs() < 1e-12 && k[1] > 1e-3, "{:?}", &k[..2]);
        let mm = SymmetricEigen::new(m.interior_mass.to_dense()).eigenvalues;
        assert!(mm.min() > 0.0);
        let bm = SymmetricEigen::new(m.boundary_mass.to_dense()).eigenvalues;
        let rank = bm.iter().filter(|&&v| v > 1e-12).count();
        assert_eq!(rank, m.boundary_index.len());
    }

    #[test]
    fn rayleigh_of_coordinate_on_disk() {
        let mesh = build_mesh(&DomainShape::Disk { radius: 1.0 }, 0.05).unwrap();
        let m = assemble(&mesh).unwrap();
        let x: Vec<f64> = mesh.vertices.iter().map(|p| p[0]).collect();
        let q = rayleigh_quotient(&m, &x).unwrap();
        assert!((q - 1.0).abs() < 0.02, "{q}");
        let ones = vec![1.0; mesh.num_vertices()];
        assert!(rayleigh_quotient(&m, &ones).unwrap().abs() < 1e-12);
    }

    #[test]
    fn interior_bump_has_no_trace() {
        let mesh = build_mesh(&DomainShape::Disk { radius: 1.0 }, 0.2).unwrap();
        let m = assemble(&mesh).unwrap();
        let mut u = vec![0.0; mesh.num_vertices()];
        u[m.interior_index[0]] = 1.0;
        assert!(matches!(rayleigh_quotient(&m, &u), Err(Error::ZeroBoundaryTrace)));
    }

    #[test]
    fn degenerate_triangle_is_rejected() {
        let mut mesh = right_triangle();
        mesh.vertices.push([2.0, 0.0]);
        mesh.vertices.push([1.0, 1e-17]);
        mesh.triangles.push([1, 3, 4]);
        assert!(matches!(assemble(&mesh), Err(Error::DegenerateTriangle { index: 1, .. })));
    }
}
