use thiserror::Error;

/// Every failure mode surfaced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("curve degenerate: {0}")]
    CurveDegenerate(String),
    #[error("closest-point projection ambiguous: |r| = {distance:.6} is outside the tube of half-width {tube:.6}")]
    ProjectionAmbiguous { distance: f64, tube: f64 },
    #[error("chart singular: Jacobian determinant {det:.3e} at r = {r:.6}")]
    ChartSingular { r: f64, det: f64 },
    #[error("potential invalid: {0}")]
    PotentialInvalid(String),
    #[error("solvability violated: |int g theta0'| = {integral:.3e} exceeds {tolerance:.3e}")]
    SolvabilityViolated { integral: f64, tolerance: f64 },
    #[error("singular linear system: {0}")]
    SingularSystem(String),
    #[error("transport law violated: |V - n.v| = {defect:.3e} at s = {s:.6}")]
    TransportViolated { s: f64, defect: f64 },
    #[error("CFL violated: {0}")]
    CflViolated(String),
    #[error("elimination failed: |F(0)| = {defect:.3e} at s = {s:.6}, t = {t:.6}")]
    EliminationFailed { s: f64, t: f64, defect: f64 },
    #[error("resolution insufficient: h = {h:.4e} exceeds eps/8 = {limit:.4e}")]
    ResolutionInsufficient { h: f64, limit: f64 },
    #[error("linear solve diverged after {iterations} iterations (relative residual {residual:.3e})")]
    LinearSolveDiverged { iterations: usize, residual: f64 },
    #[error("non-finite value encountered at t = {t:.6}")]
    NonFinite { t: f64 },
    #[error("eigen iteration stalled after {iterations} steps (residual {residual:.3e})")]
    EigenIterationStalled { iterations: usize, residual: f64 },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
