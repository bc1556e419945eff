//! The aggregate consumer: summed demand, summed flexibility, and the
//! harmonic-mean curvature.
//!
//! At a common price the aggregate behaves like one consumer whose normalized
//! loss satisfies `Ĵ_t'(D) = -π` and whose curvature is the harmonic mean of
//! the interior consumers' curvatures, so aggregate flexibility is the plain
//! sum of individual flexibilities. Clamped consumers contribute zero
//! flexibility and are excluded from the harmonic mean; that extension past
//! the all-interior case is flagged to downstream screening via equilibrium
//! boundary flags.

use crate::error::CoreError;
use crate::loss::Consumer;
use crate::numeric;
use crate::Result;

/// Tolerance of the aggregate demand inversion.
const INVERT_TOL: f64 = 1e-10;

/// A consumer set viewed as one aggregate consumer in one period.
#[derive(Clone, Copy)]
pub struct AggregateView<'a> {
    consumers: &'a [Consumer],
    period: &'a str,
}

impl<'a> AggregateView<'a> {
    /// Build a view; the consumer set must be non-empty and every consumer
    /// must cover `period`.
    pub fn new(consumers: &'a [Consumer], period: &'a str) -> Result<Self> {
        if consumers.is_empty() {
            return Err(CoreError::InvalidScenario("aggregate over empty consumer set".into()));
        }
        for c in consumers {
            c.loss_spec(period)?;
        }
        Ok(AggregateView { consumers, period })
    }

    pub fn period(&self) -> &str {
        self.period
    }

    pub fn consumers(&self) -> &'a [Consumer] {
        self.consumers
    }

    /// Total demand `Σ_i d_i*(price)`.
    pub fn demand(&self, price: f64) -> Result<f64> {
        let mut total = 0.0;
        for c in self.consumers {
            total += c.optimal_demand(self.period, price)?.quantity;
        }
        Ok(total)
    }

    /// Total flexibility `Σ_i |∂d_i*/∂π|`; clamped consumers contribute 0.
    pub fn flexibility(&self, price: f64) -> Result<f64> {
        let mut total = 0.0;
        for c in self.consumers {
            total += c.flexibility(self.period, price)?;
        }
        Ok(total)
    }

    /// Total demand convexity `Σ_i ∂²d_i*/∂π²`; clamped consumers
    /// contribute 0.
    pub fn convexity(&self, price: f64) -> Result<f64> {
        let mut total = 0.0;
        for c in self.consumers {
            total += c.demand_convexity(self.period, price)?;
        }
        Ok(total)
    }

    /// Aggregate normalized-loss curvature `Ĵ_t''(D)`: the harmonic mean
    /// `1 / Σ_i (1/Ĵ_i'')` over interior consumers, which equals
    /// `1 / flexibility`.
    ///
    /// Errors when every consumer is clamped at `price`.
    pub fn curvature(&self, price: f64) -> Result<f64> {
        let flex = self.flexibility(price)?;
        if flex <= 0.0 {
            return Err(CoreError::UndefinedCurvature { price });
        }
        Ok(1.0 / flex)
    }

    /// Sum of satiation levels; the largest achievable aggregate demand.
    pub fn total_d_bar(&self) -> Result<f64> {
        let mut total = 0.0;
        for c in self.consumers {
            total += c.d_bar(self.period)?;
        }
        Ok(total)
    }

    /// Largest individual choke price; aggregate demand is zero above it.
    pub fn max_choke_price(&self) -> Result<f64> {
        let mut max = 0.0f64;
        for c in self.consumers {
            max = max.max(c.choke_price(self.period)?);
        }
        Ok(max)
    }

    /// Sum of normalized losses `Σ_i Ĵ_i(d_i*(price))` at the common-price
    /// allocation.
    pub fn normalized_loss_at(&self, price: f64) -> Result<f64> {
        let mut total = 0.0;
        for c in self.consumers {
            let q = c.optimal_demand(self.period, price)?.quantity;
            total += c.view(self.period)?.jhat(q);
        }
        Ok(total)
    }

    /// Price at which aggregate demand equals `target`, by bisection on the
    /// non-increasing demand curve.
    pub fn invert_demand(&self, target: f64) -> Result<f64> {
        let d_bar = self.total_d_bar()?;
        if !target.is_finite() || target < 0.0 || target > d_bar {
            return Err(CoreError::Domain(format!(
                "target demand {target} outside achievable range [0, {d_bar}]"
            )));
        }
        let choke = self.max_choke_price()?;
        if target == 0.0 && self.demand(choke)? == 0.0 {
            return Ok(choke);
        }
        // demand(0) = d_bar >= target and demand(choke) = 0 <= target
        numeric::bisect(
            |price| self.demand(price).expect("price in [0, choke] is valid") - target,
            0.0,
            choke.max(1e-12),
            INVERT_TOL,
        )
    }
}
