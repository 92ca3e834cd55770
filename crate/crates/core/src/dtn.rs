//! Discrete Dirichlet-to-Neumann operator and the Steklov eigenproblem.
//!
//! With the stiffness matrix split into interior (`i`) and boundary (`b`)
//! blocks, the DtN matrix is the Schur complement
//! `S = A_bb - A_bi A_ii^{-1} A_ib`. Steklov eigenpairs solve
//! `S phi = sigma B_bb phi` with `B_bb` the boundary mass matrix.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::fem::{assemble, FemMatrices};
use crate::mesh::{volumes, TriangleMesh};
use crate::sparse::EnvelopeCholesky;

#[derive(Debug, Clone)]
pub struct SpectralResult {
    /// Ascending, `sigma_0` (the discrete zero mode) first.
    pub eigenvalues: Vec<f64>,
    /// Boundary traces, one column per eigenvalue, `B_bb`-orthonormal.
    pub eigenvectors: DMatrix<f64>,
    pub vol: f64,
    pub boundary_vol: f64,
    pub h: f64,
    pub num_vertices: usize,
    pub num_boundary: usize,
}

impl SpectralResult {
    /// `sigma_1 + ... + sigma_m`, skipping the zero mode.
    pub fn trace_sum(&self, m: usize) -> f64 {
        self.eigenvalues[1..=m].iter().sum()
    }
}

/// Factorized interior block plus the dense DtN matrix for one mesh.
pub struct SteklovSolver {
    matrices: FemMatrices,
    interior: Option<EnvelopeCholesky>,
    dtn: DMatrix<f64>,
    vol: f64,
    boundary_vol: f64,
    h: f64,
}

impl SteklovSolver {
    pub fn new(mesh: &TriangleMesh) -> Result<Self> {
        let matrices = assemble(mesh)?;
        let (dtn, interior) = schur_complement(&matrices)?;
        let (vol, boundary_vol) = volumes(mesh);
        Ok(SteklovSolver { matrices, interior, dtn, vol, boundary_vol, h: mesh.h })
    }

    pub fn matrices(&self) -> &FemMatrices {
        &self.matrices
    }

    pub fn dtn(&self) -> &DMatrix<f64> {
        &self.dtn
    }

    /// Dense boundary mass block in `boundary_index` order.
    pub fn boundary_mass(&self) -> DMatrix<f64> {
        let b = &self.matrices.boundary_index;
        self.matrices.boundary_mass.submatrix(b, b).to_dense()
    }

    /// The `num + 1` smallest Steklov eigenpairs.
    pub fn spectrum(&self, num: usize) -> Result<SpectralResult> {
        let nb = self.matrices.boundary_index.len();
        if num + 1 > nb {
            return Err(Error::TooManyEigenvalues { requested: num + 1, available: nb });
        }
        let (values, vectors) = generalized_symmetric_eigen(&self.dtn, &self.boundary_mass())?;
        Ok(SpectralResult {
            eigenvalues: values[..=num].to_vec(),
            eigenvectors: vectors.columns(0, num + 1).into_owned(),
            vol: self.vol,
            boundary_vol: self.boundary_vol,
            h: self.h,
            num_vertices: self.matrices.num_dofs(),
            num_boundary: nb,
        })
    }

    /// Discrete harmonic extension of a boundary trace to all vertices.
    pub fn harmonic_extension(&self, trace: &[f64]) -> Vec<f64> {
        let m = &self.matrices;
        let mut u = vec![0.0; m.num_dofs()];
        for (&v, &t) in m.boundary_index.iter().zip(trace) {
            u[v] = t;
        }
        if let Some(chol) = &self.interior {
            // A_ii u_i = -A_ib u_b
            let rhs: Vec<f64> = m
                .interior_index
                .iter()
                .map(|&i| -m.stiffness.row(i).map(|(j, a)| a * u[j]).sum::<f64>())
                .collect();
            let ui = chol.solve(&rhs);
            for (&v, x) in m.interior_index.iter().zip(ui) {
                u[v] = x;
            }
        }
        u
    }
}

/// Schur complement of the stiffness matrix onto the boundary dofs.
pub fn dtn_matrix(matrices: &FemMatrices) -> Result<DMatrix<f64>> {
    schur_complement(matrices).map(|(s, _)| s)
}

fn schur_complement(m: &FemMatrices) -> Result<(DMatrix<f64>, Option<EnvelopeCholesky>)> {
    let (bi, ii) = (&m.boundary_index, &m.interior_index);
    let a_bb = m.stiffness.submatrix(bi, bi).to_dense();
    if ii.is_empty() {
        return Ok((a_bb, None));
    }
    let a_ii = m.stiffness.submatrix(ii, ii);
    let chol = EnvelopeCholesky::factor(&a_ii).map_err(|e| match e {
        Error::SingularInteriorBlock { pivot, value } => {
            Error::SingularInteriorBlock { pivot: ii[pivot], value }
        }
        other => other,
    })?;
    let a_ib = m.stiffness.submatrix(ii, bi).to_dense();
    let w = chol.half_solve(&a_ib);
    let mut s = a_bb - w.transpose() * &w;
    symmetrize(&mut s);
    Ok((s, Some(chol)))
}

fn symmetrize(s: &mut DMatrix<f64>) {
    let n = s.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (s[(i, j)] + s[(j, i)]);
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
}

/// Solve `S x = lambda B x` for symmetric `S` and symmetric positive
/// definite `B`, returning ascending eigenvalues and `B`-orthonormal
/// eigenvectors.
pub fn generalized_symmetric_eigen(s: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = s.nrows();
    let l = b.clone().cholesky().ok_or(Error::EigensolverNoConvergence)?.l();
    // C = L^{-1} S L^{-T}
    let x = l.solve_lower_triangular(s).ok_or(Error::EigensolverNoConvergence)?;
    let mut c = l
        .solve_lower_triangular(&x.transpose())
        .ok_or(Error::EigensolverNoConvergence)?;
    symmetrize(&mut c);
    let eig = SymmetricEigen::try_new(c, f64::EPSILON, 0).ok_or(Error::EigensolverNoConvergence)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]).then(i.cmp(&j)));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let y = DMatrix::from_columns(&order.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect::<Vec<DVector<f64>>>());
    let vectors = l.transpose().solve_upper_triangular(&y).ok_or(Error::EigensolverNoConvergence)?;
    Ok((values, vectors))
}

/// The `num + 1` smallest Steklov eigenpairs of the mesh.
pub fn steklov_spectrum(mesh: &TriangleMesh, num: usize) -> Result<SpectralResult> {
    SteklovSolver::new(mesh)?.spectrum(num)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::rayleigh_quotient;
    use crate::mesh::{build_mesh, refine, DomainShape};

    fn disk(r: f64, h: f64) -> TriangleMesh {
        build_mesh(&DomainShape::Disk { radius: r }, h).unwrap()
    }

    #[test]
    fn no_interior_vertices_gives_stiffness_block() {
        let mesh = TriangleMesh::from_triangles(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]], 1.0).unwrap();
        let m = assemble(&mesh).unwrap();
        assert!(m.interior_index.is_empty());
        assert_eq!(dtn_matrix(&m).unwrap(), m.stiffness.to_dense());
    }

    #[test]
    fn constants_lie_in_kernel() {
        for shape in [
            DomainShape::Disk { radius: 1.0 },
            DomainShape::Annulus { r_in: 1.0, r_out: 2.0 },
            DomainShape::Ellipse { a: 2.0, b: 1.0 },
        ] {
            let m = assemble(&build_mesh(&shape, 0.1).unwrap()).unwrap();
            let s = dtn_matrix(&m).unwrap();
            let ones = DVector::from_element(s.nrows(), 1.0);
            assert!((&s * ones).norm() <= 1e-8 * s.norm(), "{}", shape.descriptor());
            assert_eq!(s, s.transpose());
        }
    }

    #[test]
    fn unit_disk_spectrum() {
        let r = steklov_spectrum(&disk(1.0, 0.05), 4).unwrap();
        assert!(r.eigenvalues[0].abs() < 1e-6);
        for (got, want) in r.eigenvalues[1..].iter().zip([1.0, 1.0, 2.0, 2.0]) {
            assert!((got - want).abs() < 0.02 * want, "{got} vs {want}");
        }
    }

    #[test]
    fn scaling_law() {
        let base = steklov_spectrum(&disk(1.0, 0.05), 4).unwrap();
        for c in [0.5, 2.0] {
            let scaled = steklov_spectrum(&disk(c, 0.05 * c), 4).unwrap();
            for k in 1..=4 {
                let rel = (scaled.eigenvalues[k] * c - base.eigenvalues[k]).abs() / base.eigenvalues[k];
                assert!(rel < 1e-6, "c={c} k={k} rel={rel}");
            }
        }
        let big = steklov_spectrum(&disk(2.0, 0.05), 1).unwrap();
        assert!((big.eigenvalues[1] - 0.5).abs() < 0.02 * 0.5);
    }

    #[test]
    fn square_has_simple_zero_mode() {
        let mesh = build_mesh(&DomainShape::Rectangle { width: 2.0, height: 2.0 }, 0.1).unwrap();
        let r = steklov_spectrum(&mesh, 2).unwrap();
        assert!(r.eigenvalues[0].abs() < 1e-8);
        assert!(r.eigenvalues[1] > 1e-3);
    }

    #[test]
    fn eigenvectors_are_mass_orthonormal_and_variational() {
        let mesh = disk(1.0, 0.1);
        let solver = SteklovSolver::new(&mesh).unwrap();
        let r = solver.spectrum(6).unwrap();
        let b = solver.boundary_mass();
        let gram = r.eigenvectors.transpose() * &b * &r.eigenvectors;
        assert!((gram - DMatrix::identity(7, 7)).amax() < 1e-8);
        for k in 1..=6 {
            let phi: Vec<f64> = r.eigenvectors.column(k).iter().copied().collect();
            let u = solver.harmonic_extension(&phi);
            let q = rayleigh_quotient(solver.matrices(), &u).unwrap();
            assert!((q - r.eigenvalues[k]).abs() <= 1e-6 * r.eigenvalues[k]);
        }
    }

    #[test]
    fn refinement_convergence_of_first_eigenvalue() {
        let shape = DomainShape::Disk { radius: 1.0 };
        let coarse = build_mesh(&shape, 0.1).unwrap();
        let fine = refine(&coarse, &shape);
        let e0 = (steklov_spectrum(&coarse, 1).unwrap().eigenvalues[1] - 1.0).abs();
        let e1 = (steklov_spectrum(&fine, 1).unwrap().eigenvalues[1] - 1.0).abs();
        assert!(e1 * 3.0 <= e0, "{e0} -> {e1}");
    }

    #[test]
    fn too_many_eigenvalues() {
        let mesh = disk(1.0, 0.5);
        let nb = mesh.boundary_vertices().len();
        assert!(matches!(steklov_spectrum(&mesh, nb), Err(Error::TooManyEigenvalues { .. })));
    }
}
