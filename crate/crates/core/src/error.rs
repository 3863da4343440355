use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("metric not positive-definite at node {node} (smallest eigenvalue {eigenvalue:e})")]
    NotPositiveDefinite { node: usize, eigenvalue: f64 },

    #[error("graph is not spacelike at node {node} (max coordinate |du| = {max_gradient})")]
    NotSpacelike { node: usize, max_gradient: f64 },

    #[error("time {t} outside [{min}, {max}]")]
    TimeOutOfRange { t: f64, min: f64, max: f64 },

    #[error("time {t} is not a stored snapshot time")]
    NotSnapshotTime { t: f64 },

    #[error("time {t} below the Harnack cutoff {t_min}")]
    TimeTooSmall { t: f64, t_min: f64 },

    #[error("time step {dt} violates the stability bound {bound}")]
    StepTooLarge { dt: f64, bound: f64 },

    #[error("initial velocity norm {norm} exceeds safeguard {limit}")]
    VelocityTooLarge { norm: f64, limit: f64 },

    #[error("geodesic integration failed at lambda = {lambda}: {reason}")]
    ShootingFailed { lambda: f64, reason: String },

    #[error("flow variant {variant} needs field `{field}`")]
    MissingField { variant: &'static str, field: &'static str },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("need at least {needed} fields, got {got}")]
    InsufficientFields { needed: usize, got: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("config check `{check}` failed: {message}")]
    ConfigCheck { check: &'static str, message: String },

    #[error("malformed snapshot file: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
