use num_complex::Complex64;
use thiserror::Error;

use crate::numerics::SolverReport;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{what} did not converge ({report})")]
    NoConvergence { what: String, report: SolverReport },

    #[error("derivative vanishes at {at}")]
    DerivativeVanishes { at: Complex64 },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("singular linear system")]
    Singular,

    #[error("evaluation point {at} too close to the contour")]
    TooCloseToContour { at: Complex64 },

    #[error("zero of f on the rectangle boundary (min |f| = {min_modulus:e})")]
    ZeroOnBoundary { min_modulus: f64 },

    #[error("winding number {value} is not close to an integer")]
    AmbiguousCount { value: f64 },

    #[error("point {at} lies outside the analytic strip")]
    OutsideStrip { at: Complex64 },

    #[error("evaluation at a pole of the Fermi weight ({at})")]
    AtPole { at: Complex64 },

    #[error("pole seed {seed} outside the strip")]
    SeedOutsideStrip { seed: Complex64 },

    #[error("branch point of the scattering phase at {at}")]
    AtBranchPoint { at: Complex64 },

    #[error("roots {a} and {b} collide")]
    RootCollision { a: Complex64, b: Complex64 },

    #[error("root {at} left the strip")]
    RootLeftStrip { at: Complex64 },

    #[error("cannot separate roots from excluded points: {0}")]
    CannotSeparate(String),

    #[error("branch unwrap failed: {0}")]
    BranchJump(String),

    #[error("denominator too small on the contour (min modulus {min:e})")]
    SmallDenominator { min: f64 },

    #[error("double-integral evaluations disagree: {a} vs {b}")]
    ExtrapolationDisagrees { a: Complex64, b: Complex64 },

    #[error("grid too coarse for the oscillating kernel: {0}")]
    GridTooCoarse(String),

    #[error("ill-conditioned fit: {0}")]
    FitIllConditioned(String),

    #[error("series truncation not settled: last term {last:e}, sum {sum:e}")]
    TruncationNotSettled { last: f64, sum: f64 },

    #[error("selection entry {0} is not in the pole table")]
    MissingPole(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable snake_case name of the variant, for machine-readable error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::NoConvergence { .. } => "no_convergence",
            Error::DerivativeVanishes { .. } => "derivative_vanishes",
            Error::NonFinite(_) => "non_finite",
            Error::Singular => "singular",
            Error::TooCloseToContour { .. } => "too_close_to_contour",
            Error::ZeroOnBoundary { .. } => "zero_on_boundary",
            Error::AmbiguousCount { .. } => "ambiguous_count",
            Error::OutsideStrip { .. } => "outside_strip",
            Error::AtPole { .. } => "at_pole",
            Error::SeedOutsideStrip { .. } => "seed_outside_strip",
            Error::AtBranchPoint { .. } => "at_branch_point",
            Error::RootCollision { .. } => "root_collision",
            Error::RootLeftStrip { .. } => "root_left_strip",
            Error::CannotSeparate(_) => "cannot_separate",
            Error::BranchJump(_) => "branch_jump",
            Error::SmallDenominator { .. } => "small_denominator",
            Error::ExtrapolationDisagrees { .. } => "extrapolation_disagrees",
            Error::GridTooCoarse(_) => "grid_too_coarse",
            Error::FitIllConditioned(_) => "fit_ill_conditioned",
            Error::TruncationNotSettled { .. } => "truncation_not_settled",
            Error::MissingPole(_) => "missing_pole",
            Error::Parse(_) => "parse",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
