use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("polygon is not simple or not positively oriented")]
    NonSimplePolygon,
    #[error("polygon is not star-shaped with respect to its centroid")]
    NotStarShaped,
    #[error("mesh step h = {h} is too coarse (must be positive and at most {limit})")]
    StepTooCoarse { h: f64, limit: f64 },
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("degenerate triangle {index} (area {area:e})")]
    DegenerateTriangle { index: usize, area: f64 },
    #[error("function has zero boundary trace")]
    ZeroBoundaryTrace,
    #[error("interior stiffness block is singular (pivot {pivot} = {value:e})")]
    SingularInteriorBlock { pivot: usize, value: f64 },
    #[error("symmetric eigensolver did not converge")]
    EigensolverNoConvergence,
    #[error("requested {requested} eigenpairs but only {available} boundary dofs exist")]
    TooManyEigenvalues { requested: usize, available: usize },
    #[error("invalid spectrum list: {0}")]
    InvalidSpectrumList(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("ball dimension m = {0} is not supported (m must be 1 or 2)")]
    UnsupportedDimension(u32),
    #[error("radial shooting did not converge (relative disagreement {disagreement:e})")]
    ShootingBlowup { disagreement: f64 },
    #[error("fiber spectrum has no positive eigenvalue")]
    NoPositiveEigenvalue,
    #[error("point {0:?} left the chart domain")]
    LeftChartDomain(Vec<f64>),
    #[error("metric is not positive definite at {0:?}")]
    MetricDegenerate(Vec<f64>),
    #[error("chart is not a submersion chart")]
    NotASubmersionChart,
    #[error("velocity grid too coarse (Richardson disagreement {0:e})")]
    GridTooCoarse(f64),
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of a numerical method (as opposed to bad input).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::DegenerateTriangle { .. }
                | Error::SingularInteriorBlock { .. }
                | Error::EigensolverNoConvergence
                | Error::ShootingBlowup { .. }
                | Error::MetricDegenerate(_)
                | Error::GridTooCoarse(_)
                | Error::LeftChartDomain(_)
        )
    }
}
