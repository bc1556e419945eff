//! Equilibrium analysis and distributional screening for the transition from
//! flat-rate to time-varying electricity pricing.
//!
//! The library models consumers through per-period *loss functions* `J(d)`:
//! the disutility of consuming `d` below a satiation level `d_bar`. A
//! consumer's willingness to pay is the negative derivative of the normalized
//! loss `Ĵ = J / A`, where `A > 0` is the marginal disutility of expenditure.
//! On top of that sit a supply cost polynomial and a planner who minimizes
//! social loss, either with one price per period (variable pricing) or a
//! single flat price.
//!
//! Modules:
//!
//! - [`loss`] — loss-function families, optimal demand, flexibility, and
//!   assumption validation for individual consumers.
//! - [`aggregate`] — summed demand and the harmonic-mean curvature of the
//!   aggregate consumer.
//! - [`market`] — scenarios, cost specs, and the flat / variable equilibria
//!   with price-change diagnostics.
//! - [`welfare`] — utility changes across the regime switch and the
//!   loss-screening conditions (exact for quadratic and isoelastic demand,
//!   sufficient in general).
//! - [`extensions`] — profit-constrained pricing and the many-period
//!   generalizations.
//! - [`oracle`] — independent brute-force cross-checks (grid search,
//!   quadrature, finite differences) and a seeded scenario generator.

pub mod aggregate;
pub mod error;
pub mod extensions;
pub mod loss;
pub mod market;
pub mod numeric;
pub mod oracle;
pub mod welfare;

pub use error::CoreError;
pub use loss::{Consumer, DemandPoint, LossSpec, Regime};
pub use market::{CostSpec, Equilibrium, PricingRegime, Scenario, SolverOptions};
pub use welfare::{ConditionId, ScreeningVerdict, UtilityChange, Verdict};

/// Library-wide result alias.
pub type Result<T> = std::result::Result<T, CoreError>;
