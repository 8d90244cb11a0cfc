//! Simulation and verification toolkit for Physarum-type dynamics on the
//! weighted basis pursuit problem
//!
//!   minimize cᵀx  subject to  Af = b, |f| ≤ x,
//!
//! with integer data `A ∈ Zⁿˣᵐ` (full row rank), `b ∈ Zⁿ`, `c ∈ Zᵐ` positive.
//!
//! The crate provides:
//!
//! * [`instance`] — problem data, validation, and test-family generators;
//! * [`minenergy`] — the minimum-energy feasible current `q` and node
//!   potentials `p` for given capacities, via `A R⁻¹ Aᵀ p = b`;
//! * [`dynamics`] — right-hand sides for the uniform (`ẋ = |q| − x`),
//!   non-uniform (`ẋₑ = aₑ(x,t)(|qₑ| − xₑ)`), and response-function
//!   (`ẋₑ = xₑ(gₑ(|qₑ|/xₑ) − 1)`) variants;
//! * [`integrate`] — explicit Euler/RK4 integrators with a positivity guard
//!   and trajectory recording;
//! * [`lyapunov`] — the monitor `L(x) = bᵀp + cᵀx` and its analytic time
//!   derivative per variant;
//! * [`oracle`] — exhaustive basic-solution enumeration in exact rational
//!   arithmetic, the optimum `x*`, distinct-cost certification, and the
//!   submatrix bound `D`;
//! * [`experiments`] — named reproducible presets with pass/fail judgments.
//!
//! With the default `parallel` feature, enumeration and batch simulation are
//! data-parallel via rayon; disabling it swaps in sequential loops with
//! identical results.

pub mod dynamics;
pub mod experiments;
pub mod instance;
pub mod integrate;
pub mod lyapunov;
pub mod minenergy;
pub mod oracle;
mod parallel;

pub use dynamics::{DynamicsSpec, ReactivityFn, ResponseFn, ResponseSet, Variant};
pub use instance::{InstanceMeta, ProblemInstance, RawInstance, ValidationReport};
pub use integrate::{
    BoundsReport, Event, IntegratorConfig, Method, Sample, Status, TrajectoryRecord,
};
pub use minenergy::{MinEnergySolution, State};
pub use oracle::{BasicSolution, FixedPointVerdict, OracleReport};

/// Crate-wide error type. Variant names follow the failure modes of the
/// individual modules.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("matrix is rank deficient: rank {rank} < {expected}")]
    RankDeficient { rank: usize, expected: usize },
    #[error("cost vector must be strictly positive: c[{index}] = {value}")]
    NonPositiveCost { index: usize, value: i64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("edge set must be non-empty")]
    EmptyEdgeSet,
    #[error("graph is not connected")]
    DisconnectedGraph,
    #[error("instance generation failed after {tries} attempts")]
    GenerationFailed { tries: usize },

    #[error("singular system: {0}")]
    SingularSystem(String),
    #[error("non-finite input")]
    NonFiniteInput,

    #[error(
        "reactivity left its declared bounds on edge {edge}: value {value}, bounds [{lower}, {upper}]"
    )]
    ReactivityBoundViolated {
        edge: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("response failed the g(1) = 1 self-check on edge {edge}: g(1) = {value}")]
    ResponseSelfCheck { edge: usize, value: f64 },
    #[error("reactivities must be strictly positive")]
    NonPositiveReactivity,

    #[error("step size underflow at t = {t}: h = {h}")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("potential bound must be positive, got {0}")]
    NonPositiveBound(f64),

    #[error("instance too large for exhaustive enumeration (m = {m}, limit {limit})")]
    TooLarge { m: usize, limit: usize },
    #[error("no invertible basis found; contradicts full row rank")]
    Infeasible,
    #[error("instance costs are not certified distinct")]
    NotCertified,

    #[error("unknown preset: {0}")]
    UnknownPreset(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("data error: {0}")]
    Data(String),
}

pub type Result<T> = std::result::Result<T, Error>;
