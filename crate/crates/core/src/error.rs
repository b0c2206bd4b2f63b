use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid needs at least 8 nodes per direction, got {nr}x{nz}")]
    TooCoarse { nr: usize, nz: usize },
    #[error("grid extents must be positive and finite (R0 = {r0}, Lz = {lz})")]
    BadExtent { r0: f64, lz: f64 },
    #[error("norm order {0} exceeds the supported maximum of 4")]
    OrderTooHigh(usize),
    #[error("fields live on different grids")]
    Mismatch,
    #[error("expected {expected} values, got {got}")]
    Length { expected: usize, got: usize },
    #[error("precondition violated: {0}")]
    Precondition(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("flow map leaves the half-plane: R = {value} at node ({i}, {j})")]
    NonPositiveRadius { i: usize, j: usize, value: f64 },
    #[error("degenerate Jacobian J = {value} at node ({i}, {j})")]
    DegenerateJacobian { i: usize, j: usize, value: f64 },
    #[error("nonpositive boundary radius {value} at axial station {j}")]
    NonPositiveTrace { j: usize, value: f64 },
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MagneticsError {
    #[error("vacuum denominator {value:e} vanishes: plasma boundary touches the wall")]
    VacuumGeometry { value: f64 },
    #[error("wall radius RS = {rs} must exceed the boundary radius {r_max}")]
    WallInside { rs: f64, r_max: f64 },
    #[error("time step must be positive, got {0}")]
    BadStep(f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PressureError {
    #[error("pressure operator is not positive definite at node ({i}, {j}): {detail}")]
    NotPositive { i: usize, j: usize, detail: String },
    #[error("pressure solve did not reach rel_tol {rel_tol:e} in {iterations} iterations (last residual {last:e})")]
    NoConvergence {
        rel_tol: f64,
        iterations: usize,
        last: f64,
        history: Vec<f64>,
    },
    #[error("CG breakdown: nonpositive curvature {0:e}")]
    Breakdown(f64),
    #[error("relative tolerance must lie in (0, 1), got {0}")]
    BadTolerance(f64),
    #[error("boundary data has {got} entries, expected {expected}")]
    BoundaryLength { expected: usize, got: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvolveError {
    #[error("time step {dt:e} exceeds the stability bound {bound:e}")]
    StepSize { dt: f64, bound: f64 },
    #[error("previous iterate does not cover the time grid: {0}")]
    Coverage(String),
    #[error("step failed at time node {node} (t = {t}): {source}")]
    AtNode {
        node: usize,
        t: f64,
        #[source]
        source: Box<EvolveError>,
    },
    #[error("Picard iteration stopped contracting: psi history {psi_history:?}; shorten T")]
    Divergence { psi_history: Vec<f64> },
    #[error("Picard iteration needs n_max >= 2, got {0}")]
    BadIterationCount(usize),
    #[error(transparent)]
    Pressure(#[from] PressureError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Magnetics(#[from] MagneticsError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Validation failure naming the offending dot-path key.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid config key `{key}`: {message}")]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            key: key.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("startup rejected: {0}")]
    Startup(String),
    #[error(transparent)]
    Numerical(#[from] EvolveError),
    #[error("well-posedness monitor aborted the run: {0}")]
    Monitor(String),
    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed snapshot {path}: {message}")]
    Snapshot { path: PathBuf, message: String },
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Startup(_) => 2,
            HarnessError::Numerical(_) | HarnessError::Monitor(_) => 3,
            HarnessError::Io { .. } | HarnessError::Snapshot { .. } => 4,
        }
    }
}

impl From<GeometryError> for HarnessError {
    fn from(e: GeometryError) -> Self {
        HarnessError::Numerical(e.into())
    }
}

impl From<PressureError> for HarnessError {
    fn from(e: PressureError) -> Self {
        HarnessError::Numerical(e.into())
    }
}

impl From<MagneticsError> for HarnessError {
    fn from(e: MagneticsError) -> Self {
        HarnessError::Numerical(e.into())
    }
}

impl From<GridError> for HarnessError {
    fn from(e: GridError) -> Self {
        HarnessError::Numerical(e.into())
    }
}
