use thiserror::Error;

/// A violated `ModelParams` invariant. Each variant names the field and the bound.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("n must be positive and finite (got {0})")]
    NonPositiveDensity(f64),
    #[error("d_max must exceed the lattice spacing 1/n = {spacing} (got {d_max})")]
    RadiusBelowSpacing { d_max: f64, spacing: f64 },
    #[error("z must lie in the open interval (0, 1) (got {0})")]
    ZOutOfRange(f64),
    #[error("w must be non-negative and finite (got {0})")]
    NegativePollution(f64),
    #[error("{field} must be positive and finite (got {value})")]
    NonPositiveValue { field: &'static str, value: f64 },
    #[error("assumption v - u > c(d_max) violated: v - u = {gap}, c(d_max) = {cost_at_max}")]
    ValueGap { gap: f64, cost_at_max: f64 },
    #[error("cost_a must be positive and finite (got {0})")]
    NonPositiveCostScale(f64),
    #[error("cost_beta must exceed 1 for a strictly convex cost (got {0})")]
    NonConvexCost(f64),
    #[error("cost function fails the numeric {property} check at d = {at}")]
    CostShape { property: &'static str, at: f64 },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    Param(#[from] ParamError),
    #[error("{what} = {value} is outside [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("distance {d} has no intermediate nodes (I(d) = {count} < 1)")]
    NoIntermediates { d: f64, count: f64 },
    #[error("relay price must be non-negative (got {0})")]
    NegativePrice(f64),
    #[error("integrand is not finite at x = {x}")]
    NonFiniteIntegrand { x: f64 },
    #[error("quadrature did not reach tolerance {tol} (estimated error {estimate})")]
    QuadratureNotConverged { tol: f64, estimate: f64 },
    #[error("invalid density bracket: {0}")]
    Bracket(String),
    #[error("no positive-to-negative crossing of total EU in [{lo}, {hi}]")]
    NoCrossing { lo: f64, hi: f64 },
    #[error("club objective is maximized at the bracket boundary n = {n} (EU = {value})")]
    BoundaryOptimum { n: f64, value: f64 },
    #[error("club optimum at n = {n} leaves members with negative EU {value}")]
    NoClubSurplus { n: f64, value: f64 },
    #[error("bisection did not converge: residual {residual} after {iterations} iterations")]
    RootNotConverged { residual: f64, iterations: usize },
    #[error("scaling fit: {0}")]
    Scaling(String),
    #[error("lattice side {side} is too small for d_max * n; need at least {min}")]
    LatticeTooSmall { side: usize, min: usize },
    #[error("trials must be at least {min} (got {got})")]
    TooFewTrials { got: usize, min: usize },
    #[error("greedy route from {origin} to {destination} exceeded the hop budget {budget}")]
    HopBudgetExceeded {
        origin: usize,
        destination: usize,
        budget: usize,
    },
    #[error("origin and destination coincide (node {0})")]
    SelfRoute(usize),
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("unknown parameter key `{0}`")]
    UnknownKey(String),
    #[error("missing parameter key `{0}`")]
    MissingKey(&'static str),
    #[error("duplicate parameter key `{0}`")]
    DuplicateKey(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for outcomes that are findings about the model rather than failures.
    pub fn is_model_finding(&self) -> bool {
        matches!(
            self,
            Error::NoCrossing { .. } | Error::BoundaryOptimum { .. }
        )
    }

    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Param(_)
                | Error::Config { .. }
                | Error::UnknownKey(_)
                | Error::MissingKey(_)
                | Error::DuplicateKey(_)
                | Error::Bracket(_)
                | Error::LatticeTooSmall { .. }
                | Error::TooFewTrials { .. }
                | Error::OutOfRange { .. }
                | Error::NegativePrice(_)
                | Error::Json(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
