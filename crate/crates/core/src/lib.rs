//! Steklov spectra of planar domains and of products `B^m(R) x F`,
//! diagnostics for the trace estimate `sigma_1 + ... + sigma_n <= |dOmega| / |Omega|`,
//! and an ODE lab for parallel transport, developments and holonomy of
//! Riemannian submersions.
//!
//! The crate is organised bottom-up:
//!
//! - [`mesh`]: catalog domains, triangle meshes, refinement, `.tmesh` IO.
//! - [`sparse`] and [`fem`]: P1 assembly of stiffness and mass matrices.
//! - [`dtn`]: the discrete Dirichlet-to-Neumann operator and the Steklov
//!   eigenproblem; [`fiber`] holds closed-form Laplace spectra of closed
//!   factors.
//! - [`ball`]: the `sigma(mu)` problem on intervals and disks.
//! - [`product`]: separated spectra of `B^m(R) x F` and the rigidity test.
//! - [`trace`]: trace reports, sweeps and inverse-trace bounds.
//! - [`develop`]: metric charts, transport, developments, lifts and the
//!   Jacobi-type Cauchy system.

pub mod ball;
pub mod develop;
pub mod dtn;
pub mod error;
pub mod fem;
pub mod fiber;
pub mod io;
pub mod mesh;
pub mod product;
pub mod sparse;
pub mod trace;

pub use ball::{sigma_mu_disk, sigma_mu_interval, sigma_of_mu, BallFactorQuery, Branch, Parity};
pub use develop::{
    develop, holonomy_path_independence, horizontal_lift, jacobi_transport, parallel_transport, Chart, SampledPath,
    VelocityFamily,
};
pub use dtn::{dtn_matrix, steklov_spectrum, SpectralResult, SteklovSolver};
pub use error::{Error, Result};
pub use fem::{assemble, rayleigh_quotient, FemMatrices};
pub use fiber::{laplace_closed_factor_spectrum, FiberSpectrum};
pub use mesh::{build_mesh, refine, volumes, BoundaryEdge, DomainShape, TriangleMesh};
pub use product::{critical_length, product_steklov_spectrum, rigidity_condition, ProductSpec, ProductSpectrum};
pub use trace::{inverse_trace_checks, sweep, trace_report, SweepFamily, TraceReport};
