//! Error type shared by all solver and screening paths.

use thiserror::Error;

/// Errors surfaced by scenario ingestion, solvers, and screening.
#[derive(Debug, Error)]
pub enum CoreError {
    /// An input value lies outside the operation's documented domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A consumer has no loss specification for the requested period.
    #[error("consumer {consumer} has no loss spec for period {period}")]
    MissingPeriod { consumer: String, period: String },

    /// Scenario failed structural or cost-assumption checks at ingestion.
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    /// Aggregate curvature is undefined because every consumer is clamped.
    #[error("undefined curvature: all consumers clamped at price {price}")]
    UndefinedCurvature { price: f64 },

    /// A root- or fixed-point search failed to converge or to bracket.
    #[error("solver failure: {0}")]
    SolverFailure(String),

    /// Profit target exceeds the maximum achievable (monopoly) profit.
    #[error("infeasible profit target {target}: monopoly profit is {monopoly}")]
    InfeasibleTarget { target: f64, monopoly: f64 },

    /// Demand elasticity vanished at a trial point of the profit-constrained
    /// price search.
    #[error("degenerate elasticity at price {price} in period {period}")]
    DegenerateElasticity { period: String, price: f64 },

    /// A stated precondition does not hold (e.g. comparison consumers given
    /// in the wrong sensitivity order).
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The random scenario generator exhausted its resample budget.
    #[error("scenario generation failed after {attempts} attempts: {detail}")]
    Generation { attempts: u32, detail: String },
}
