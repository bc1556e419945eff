//! Consumer utility changes across the regime switch and the loss-screening
//! conditions.
//!
//! The change in a consumer's utility when moving from the flat price to the
//! variable prices is `ΔU_it = -A_i ∫ d_it*(π) dπ` over each period's price
//! interval. For quadratic losses (linear demand) and in-window isoelastic
//! demand the integral has a closed form; anything else is integrated
//! numerically.
//!
//! Screening evaluates certificates on top of that: a linear bound that is
//! exact for quadratic losses and a sufficient loss condition for any loss
//! family with convex demand, an isoelastic closed form exact for in-window
//! isoelastic demand, and pairwise comparisons with asymmetric conservative
//! bounds. Verdicts are a strict trichotomy so the sufficient-only cases are
//! never over-claimed.

use crate::error::CoreError;
use crate::loss::{Consumer, LossSpec};
use crate::market::Equilibrium;
use crate::numeric;
use crate::Result;

/// Relative tolerance of the quadrature fallback for utility changes.
pub const DEFAULT_QUAD_TOL: f64 = 1e-9;

/// Width of the removable singularity at elasticity -1, handled by the log
/// limit.
const UNIT_ELASTIC_EPS: f64 = 1e-8;

// ---------------------------------------------------------------------------
// Utility change
// ---------------------------------------------------------------------------

/// How a utility change was evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UtilityChangeMethod {
    ClosedFormLinear,
    ClosedFormIsoelastic,
    Quadrature,
}

/// Per-consumer utility change across the regime switch.
#[derive(Clone, Debug)]
pub struct UtilityChange {
    pub consumer_id: String,
    /// `(period, ΔU_it)` in scenario period order.
    pub per_period: Vec<(String, f64)>,
    /// `ΔU_i = Σ_t ΔU_it` (utility units); positive is a gain.
    pub total: f64,
    /// `ΔU_i / A_i` (currency units).
    pub consumer_surplus_change: f64,
    pub method: UtilityChangeMethod,
}

/// Consumer `i`'s utility change between a flat and a variable equilibrium:
/// per period, `ΔU_it = -A_i ∫_{π^F}^{π_t^V} d_it*(π) dπ`.
pub fn utility_change(
    consumer: &Consumer,
    flat: &Equilibrium,
    variable: &Equilibrium,
) -> Result<UtilityChange> {
    let ctx = ScreenContext::new(flat, variable)?;
    let mut per_period = Vec::with_capacity(ctx.periods.len());
    let mut total = 0.0;
    let mut method = UtilityChangeMethod::ClosedFormLinear;
    for (period, &var_price) in ctx.periods.iter().zip(&ctx.var_prices) {
        let (delta_u, m) = period_utility_change(consumer, period, ctx.flat_price, var_price)?;
        method = worse_method(method, m);
        total += delta_u;
        per_period.push((period.clone(), delta_u));
    }
    Ok(UtilityChange {
        consumer_id: consumer.id.clone(),
        per_period,
        total,
        consumer_surplus_change: total / consumer.a,
        method,
    })
}

fn worse_method(a: UtilityChangeMethod, b: UtilityChangeMethod) -> UtilityChangeMethod {
    use UtilityChangeMethod::*;
    match (a, b) {
        (Quadrature, _) | (_, Quadrature) => Quadrature,
        (ClosedFormIsoelastic, _) | (_, ClosedFormIsoelastic) => ClosedFormIsoelastic,
        _ => ClosedFormLinear,
    }
}

/// `ΔU_it` for one period, preferring the family's closed form.
fn period_utility_change(
    consumer: &Consumer,
    period: &str,
    flat_price: f64,
    var_price: f64,
) -> Result<(f64, UtilityChangeMethod)> {
    let spec = consumer.loss_spec(period)?;
    match spec {
        LossSpec::Quadratic { k, d_bar } => {
            // clamp-aware integral of the linear demand d_bar - A π / 2k
            let choke = 2.0 * k * d_bar / consumer.a;
            let (a, b) = sorted(flat_price, var_price);
            let lo = a.min(choke);
            let hi = b.min(choke);
            let integral = d_bar * (hi - lo) - consumer.a / (4.0 * k) * (hi * hi - lo * lo);
            let oriented = if var_price >= flat_price { integral } else { -integral };
            Ok((-consumer.a * oriented, UtilityChangeMethod::ClosedFormLinear))
        }
        LossSpec::IsoelasticDemand { d_ref, pi_ref, epsilon, pi_low, pi_high }
            if in_window(flat_price, *pi_low, *pi_high) && in_window(var_price, *pi_low, *pi_high) =>
        {
            let anti = |p: f64| -> f64 {
                if (1.0 + epsilon).abs() < UNIT_ELASTIC_EPS {
                    d_ref * pi_ref * (p / pi_ref).ln()
                } else {
                    d_ref * pi_ref / (1.0 + epsilon) * (p / pi_ref).powf(1.0 + epsilon)
                }
            };
            let integral = anti(var_price) - anti(flat_price);
            Ok((-consumer.a * integral, UtilityChangeMethod::ClosedFormIsoelastic))
        }
        _ => {
            let delta = quadrature_period_utility_change(
                consumer,
                period,
                flat_price,
                var_price,
                DEFAULT_QUAD_TOL,
            )?;
            Ok((delta, UtilityChangeMethod::Quadrature))
        }
    }
}

/// Quadrature route for `ΔU_it`, shared by the general screen's point
/// estimate and the isoelastic tail fallback.
pub fn quadrature_period_utility_change(
    consumer: &Consumer,
    period: &str,
    flat_price: f64,
    var_price: f64,
    rel_tol: f64,
) -> Result<f64> {
    let view = consumer.view(period)?;
    let integral = numeric::adaptive_simpson(
        |p| view.demand(p.max(0.0)).quantity,
        flat_price,
        var_price,
        rel_tol,
    );
    Ok(-consumer.a * integral)
}

/// Quadrature `ΔU_i` summed over all periods.
pub fn quadrature_utility_change(
    consumer: &Consumer,
    flat: &Equilibrium,
    variable: &Equilibrium,
    rel_tol: f64,
) -> Result<f64> {
    let ctx = ScreenContext::new(flat, variable)?;
    let mut total = 0.0;
    for (period, &vp) in ctx.periods.iter().zip(&ctx.var_prices) {
        total += quadrature_period_utility_change(consumer, period, ctx.flat_price, vp, rel_tol)?;
    }
    Ok(total)
}

fn sorted(a: f64, b: f64) -> (f64, f64) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

fn in_window(price: f64, lo: f64, hi: f64) -> bool {
    (lo..=hi).contains(&price)
}

// ---------------------------------------------------------------------------
// Screening verdicts
// ---------------------------------------------------------------------------

/// Which screening condition produced a verdict.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConditionId {
    /// Linear-demand loss condition; exact for quadratic losses.
    LinearLoss,
    /// Isoelastic loss condition; exact for in-window isoelastic demand.
    IsoelasticLoss,
    /// Pairwise comparison with the linear conservative bounds.
    LinearComparison,
    /// Pairwise comparison with the isoelastic closed forms.
    IsoelasticComparison,
    /// Family-agnostic sufficient loss condition.
    GeneralSufficient,
}

impl ConditionId {
    pub fn name(&self) -> &'static str {
        match self {
            ConditionId::LinearLoss => "linear_loss",
            ConditionId::IsoelasticLoss => "isoelastic_loss",
            ConditionId::LinearComparison => "linear_comparison",
            ConditionId::IsoelasticComparison => "isoelastic_comparison",
            ConditionId::GeneralSufficient => "general_sufficient",
        }
    }
}

/// Three-valued screening outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    /// The consumer certainly loses (or, for comparisons, certainly loses
    /// more than the other consumer).
    CertainLoss,
    /// Certainly does not lose; only claimed when the condition is exact for
    /// the consumer's demand family.
    CertainNoLoss,
    /// The condition cannot certify either direction.
    Inconclusive,
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::CertainLoss => "CertainLoss",
            Verdict::CertainNoLoss => "CertainNoLoss",
            Verdict::Inconclusive => "Inconclusive",
        }
    }
}

/// Evaluated screening condition.
#[derive(Clone, Debug)]
pub struct ScreeningVerdict {
    pub condition: ConditionId,
    /// Left-hand value of the condition (threshold 0 for loss conditions).
    pub value: f64,
    /// Right-hand value for pairwise comparisons.
    pub rhs: Option<f64>,
    pub verdict: Verdict,
    /// True when the condition is necessary and sufficient for this
    /// consumer's demand family with all points interior.
    pub exact: bool,
    /// Numerical `ΔU` point estimate attached by the general screen and the
    /// tail fallback; an estimate, not a certificate.
    pub quadrature_estimate: Option<f64>,
}

/// Price context shared by every screening condition.
struct ScreenContext {
    periods: Vec<String>,
    flat_price: f64,
    var_prices: Vec<f64>,
    contaminated: bool,
}

impl ScreenContext {
    fn new(flat: &Equilibrium, variable: &Equilibrium) -> Result<Self> {
        if flat.periods != variable.periods {
            return Err(CoreError::Domain(
                "flat and variable equilibria cover different periods".into(),
            ));
        }
        Ok(ScreenContext {
            periods: flat.periods.clone(),
            flat_price: flat.prices[0],
            var_prices: variable.prices.clone(),
            contaminated: flat.is_boundary_contaminated() || variable.is_boundary_contaminated(),
        })
    }

    fn deltas(&self) -> Vec<f64> {
        self.var_prices.iter().map(|v| v - self.flat_price).collect()
    }
}

/// Flexibility evaluation points for the two sides of the conservative
/// bound: the side whose utility change is upper-bounded takes rising-price
/// periods at the flat price, the lower-bounded side takes them at the
/// variable price (and conversely for falling-price periods).
#[derive(Clone, Copy)]
enum BoundSide {
    Upper,
    Lower,
}

/// The linear screening value
/// `Σ_t (π^F - π_t^V) d_t^F + Σ_t (Δπ_t)²/2 · |∂d_t/∂π|`
/// with flexibilities evaluated per the conservative construction.
fn linear_bound(consumer: &Consumer, ctx: &ScreenContext, side: BoundSide) -> Result<f64> {
    let mut value = 0.0;
    for ((period, &var_price), delta) in ctx.periods.iter().zip(&ctx.var_prices).zip(ctx.deltas()) {
        let demand_flat = consumer.optimal_demand(period, ctx.flat_price)?.quantity;
        value += (ctx.flat_price - var_price) * demand_flat;
        if delta == 0.0 {
            continue;
        }
        let rising = delta > 0.0;
        let flex_price = match (side, rising) {
            (BoundSide::Upper, true) | (BoundSide::Lower, false) => ctx.flat_price,
            (BoundSide::Upper, false) | (BoundSide::Lower, true) => var_price,
        };
        value += delta * delta / 2.0 * consumer.flexibility(period, flex_price)?;
    }
    Ok(value)
}

/// True when the consumer is quadratic in every period and interior at both
/// equilibrium prices of every period.
fn quadratic_and_interior(consumer: &Consumer, ctx: &ScreenContext) -> Result<bool> {
    for (period, &var_price) in ctx.periods.iter().zip(&ctx.var_prices) {
        if !matches!(consumer.loss_spec(period)?, LossSpec::Quadratic { .. }) {
            return Ok(false);
        }
        if !consumer.optimal_demand(period, ctx.flat_price)?.is_interior()
            || !consumer.optimal_demand(period, var_price)?.is_interior()
        {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Screen one consumer with the linear-demand condition. Exact (iff) for
/// quadratic losses with interior demand; a sufficient loss certificate for
/// any other family. Requires a two-period scenario; the many-period
/// generalization lives in [`crate::extensions::multi_period_screen`].
pub fn screen_linear(
    consumer: &Consumer,
    flat: &Equilibrium,
    variable: &Equilibrium,
) -> Result<ScreeningVerdict> {
    let ctx = ScreenContext::new(flat, variable)?;
    if ctx.periods.len() != 2 {
        return Err(CoreError::Precondition(format!(
            "linear screen is two-period; scenario has {} periods",
            ctx.periods.len()
        )));
    }
    linear_screen_impl(consumer, &ctx)
}

fn linear_screen_impl(consumer: &Consumer, ctx: &ScreenContext) -> Result<ScreeningVerdict> {
    let value = linear_bound(consumer, ctx, BoundSide::Upper)?;
    let exact = !ctx.contaminated && quadratic_and_interior(consumer, ctx)?;
    let verdict = if ctx.contaminated {
        Verdict::Inconclusive
    } else if value < 0.0 {
        Verdict::CertainLoss
    } else if exact {
        Verdict::CertainNoLoss
    } else {
        Verdict::Inconclusive
    };
    Ok(ScreeningVerdict {
        condition: ConditionId::LinearLoss,
        value,
        rhs: None,
        verdict,
        exact,
        quadrature_estimate: None,
    })
}

/// The isoelastic per-period term `d^F/(1+ε) [1 - (π^V/π^F)^{1+ε}]`, with
/// the log limit at unit elasticity.
fn iso_term(demand_flat: f64, epsilon: f64, price_ratio: f64) -> f64 {
    if (1.0 + epsilon).abs() < UNIT_ELASTIC_EPS {
        -demand_flat * price_ratio.ln()
    } else {
        demand_flat / (1.0 + epsilon) * (1.0 - price_ratio.powf(1.0 + epsilon))
    }
}

/// Screen an isoelastic-demand consumer with the exact closed-form
/// condition. Prices must stay inside each period's isoelastic window;
/// otherwise the verdict falls back to the quadrature estimate with
/// `exact = false`.
pub fn screen_isoelastic(
    consumer: &Consumer,
    flat: &Equilibrium,
    variable: &Equilibrium,
) -> Result<ScreeningVerdict> {
    let ctx = ScreenContext::new(flat, variable)?;
    iso_screen_impl(consumer, &ctx)
}

fn iso_screen_impl(consumer: &Consumer, ctx: &ScreenContext) -> Result<ScreeningVerdict> {
    let mut value = 0.0;
    let mut all_in_window = true;
    for (period, &var_price) in ctx.periods.iter().zip(&ctx.var_prices) {
        let LossSpec::IsoelasticDemand { epsilon, pi_low, pi_high, .. } =
            *consumer.loss_spec(period)?
        else {
            return Err(CoreError::Precondition(format!(
                "isoelastic screen requires isoelastic demand in every period; \
                 consumer {} period {period} is not",
                consumer.id
            )));
        };
        if !(in_window(ctx.flat_price, pi_low, pi_high) && in_window(var_price, pi_low, pi_high)) {
            all_in_window = false;
            continue;
        }
        let demand_flat = consumer.optimal_demand(period, ctx.flat_price)?.quantity;
        value += iso_term(demand_flat, epsilon, var_price / ctx.flat_price);
    }

    if !all_in_window {
        // linear-tail prices: the closed form does not apply
        let mut quad = 0.0;
        for (period, &vp) in ctx.periods.iter().zip(&ctx.var_prices) {
            quad +=
                quadrature_period_utility_change(consumer, period, ctx.flat_price, vp, DEFAULT_QUAD_TOL)?;
        }
        let value = quad / (consumer.a * ctx.flat_price.max(f64::MIN_POSITIVE));
        let verdict = if ctx.contaminated {
            Verdict::Inconclusive
        } else if value < 0.0 {
            Verdict::CertainLoss
        } else {
            Verdict::CertainNoLoss
        };
        return Ok(ScreeningVerdict {
            condition: ConditionId::IsoelasticLoss,
            value,
            rhs: None,
            verdict,
            exact: false,
            quadrature_estimate: Some(quad),
        });
    }

    let verdict = if ctx.contaminated {
        Verdict::Inconclusive
    } else if value < 0.0 {
        Verdict::CertainLoss
    } else {
        Verdict::CertainNoLoss
    };
    Ok(ScreeningVerdict {
        condition: ConditionId::IsoelasticLoss,
        value,
        rhs: None,
        verdict,
        exact: !ctx.contaminated,
        quadrature_estimate: None,
    })
}

/// Compare two consumers: does the more price-sensitive one (`lo`) certainly
/// lose more utility than the less sensitive one (`hi`)?
///
/// The linear route upper-bounds `ΔU_lo` and lower-bounds `ΔU_hi` with
/// asymmetric flexibility evaluation points; `CertainLoss` means
/// `ΔU_lo < ΔU_hi` is guaranteed. When both consumers are isoelastic with
/// in-window prices the comparison uses the exact closed forms instead.
pub fn compare_consumers(
    lo: &Consumer,
    hi: &Consumer,
    flat: &Equilibrium,
    variable: &Equilibrium,
) -> Result<ScreeningVerdict> {
    if lo.a <= hi.a {
        return Err(CoreError::Precondition(format!(
            "comparison requires A_lo > A_hi, got {} vs {}",
            lo.a, hi.a
        )));
    }
    let ctx = ScreenContext::new(flat, variable)?;

    let both_iso = ctx.periods.iter().try_fold(true, |acc, period| -> Result<bool> {
        let a = matches!(lo.loss_spec(period)?, LossSpec::IsoelasticDemand { .. });
        let b = matches!(hi.loss_spec(period)?, LossSpec::IsoelasticDemand { .. });
        Ok(acc && a && b)
    })?;
    if both_iso {
        let lo_screen = iso_screen_impl(lo, &ctx)?;
        let hi_screen = iso_screen_impl(hi, &ctx)?;
        if lo_screen.exact && hi_screen.exact {
            let lhs = lo.a * lo_screen.value;
            let rhs = hi.a * hi_screen.value;
            let verdict = if ctx.contaminated {
                Verdict::Inconclusive
            } else if lhs < rhs {
                Verdict::CertainLoss
            } else {
                Verdict::CertainNoLoss
            };
            return Ok(ScreeningVerdict {
                condition: ConditionId::IsoelasticComparison,
                value: lhs,
                rhs: Some(rhs),
                verdict,
                exact: !ctx.contaminated,
                quadrature_estimate: None,
            });
        }
    }

    let lhs = lo.a * linear_bound(lo, &ctx, BoundSide::Upper)?;
    let rhs = hi.a * linear_bound(hi, &ctx, BoundSide::Lower)?;
    let exact = !ctx.contaminated
        && quadratic_and_interior(lo, &ctx)?
        && quadratic_and_interior(hi, &ctx)?;
    let verdict = if ctx.contaminated {
        Verdict::Inconclusive
    } else if lhs < rhs {
        Verdict::CertainLoss
    } else if exact {
        Verdict::CertainNoLoss
    } else {
        Verdict::Inconclusive
    };
    Ok(ScreeningVerdict {
        condition: ConditionId::LinearComparison,
        value: lhs,
        rhs: Some(rhs),
        verdict,
        exact,
        quadrature_estimate: None,
    })
}

/// Family-agnostic screen: the linear bound as a one-sided loss certificate,
/// with a quadrature `ΔU` attached as a point estimate. Never claims
/// `CertainNoLoss`.
pub fn screen_general(
    consumer: &Consumer,
    flat: &Equilibrium,
    variable: &Equilibrium,
) -> Result<ScreeningVerdict> {
    let ctx = ScreenContext::new(flat, variable)?;
    let value = linear_bound(consumer, &ctx, BoundSide::Upper)?;
    let quad = quadrature_utility_change(consumer, flat, variable, DEFAULT_QUAD_TOL)?;
    let verdict = if ctx.contaminated {
        Verdict::Inconclusive
    } else if value < 0.0 {
        Verdict::CertainLoss
    } else {
        Verdict::Inconclusive
    };
    Ok(ScreeningVerdict {
        condition: ConditionId::GeneralSufficient,
        value,
        rhs: None,
        verdict,
        exact: false,
        quadrature_estimate: Some(quad),
    })
}

/// Linear screen generalized to any number of periods: rising-price periods
/// take their flexibility at the flat price and falling-price periods at
/// their variable price, exactly as in the two-period condition.
pub(crate) fn linear_screen_any_periods(
    consumer: &Consumer,
    flat: &Equilibrium,
    variable: &Equilibrium,
) -> Result<ScreeningVerdict> {
    let ctx = ScreenContext::new(flat, variable)?;
    linear_screen_impl(consumer, &ctx)
}

/// Isoelastic screen reused by the many-period extension.
pub(crate) fn iso_screen_any_periods(
    consumer: &Consumer,
    flat: &Equilibrium,
    variable: &Equilibrium,
) -> Result<ScreeningVerdict> {
    let ctx = ScreenContext::new(flat, variable)?;
    iso_screen_impl(consumer, &ctx)
}

/// True when every period of this consumer is isoelastic.
pub(crate) fn all_isoelastic(consumer: &Consumer, periods: &[String]) -> Result<bool> {
    for period in periods {
        if !matches!(consumer.loss_spec(period)?, LossSpec::IsoelasticDemand { .. }) {
            return Ok(false);
        }
    }
    Ok(true)
}

// ---------------------------------------------------------------------------
