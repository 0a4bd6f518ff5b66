use crate::lattice::Index;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid quadrature spec: every grid size must be >= 8 (got {n_radial}, {n_angular}, {n_line})")]
    InvalidQuadrature {
        n_radial: usize,
        n_angular: usize,
        n_line: usize,
    },

    #[error("water-filling support is empty at multiplier A = {multiplier}")]
    EmptySupport { multiplier: f64 },

    #[error("radius r = {r} exceeds the largest semi-axis {max_radius}; alternative set is empty")]
    InfeasibleRadius { r: f64, max_radius: f64 },

    #[error("extreme-problem solver failed: {reason} (A in [{lo}, {hi}], g(lo) = {g_lo}, g(hi) = {g_hi})")]
    SolverFailure {
        reason: String,
        lo: f64,
        hi: f64,
        g_lo: f64,
        g_hi: f64,
    },

    #[error("no observation at weighted index {0}")]
    MissingObservation(Index),

    #[error("signal has a nonzero coordinate at {0} outside the declared noise support")]
    SupportMismatch(Index),

    #[error("adaptive grid band {band} is empty (cutoff c = {cutoff}); noise level too large")]
    GridDegenerate { band: usize, cutoff: f64 },

    #[error("signal is outside the alternative set: ellipsoid sum {ellipsoid_sum} (must be <= 1), ball sum {ball_sum} (must be >= {r_sq})")]
    OutsideAlternative {
        ellipsoid_sum: f64,
        ball_sum: f64,
        r_sq: f64,
    },

    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),

    #[error("table format error: {0}")]
    Table(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
