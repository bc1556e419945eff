//! Profit-constrained pricing and the many-consumer / many-period
//! generalizations.
//!
//! The profit-constrained planner solves, per period,
//! `(C'(d) - π)(1 - ν) = ν π / ε` for an economy-wide multiplier `ν < 1`,
//! where `ε < 0` is the aggregate demand elasticity at the trial price. The
//! markup over marginal cost is `ν/(1-ν) · π/|ε|`, so `ν = 0` reproduces the
//! unconstrained variable prices, `ν > 0` raises every price (revenue
//! adequacy), `ν < 0` lowers every price (profit cap), and `ν = 1/2` is the
//! monopoly point. An outer bisection on `ν` drives total profit to the
//! requested target; profit is monotone in `ν` below the monopoly point, so
//! the search bracket tops out there.

use crate::error::CoreError;
use crate::loss::Consumer;
use crate::market::{self, Equilibrium, PricingRegime, Scenario};
use crate::numeric;
use crate::welfare::{self, ScreeningVerdict};
use crate::Result;

/// Absolute tolerance on the profit-target residual.
const PROFIT_TOL: f64 = 1e-8;

/// Grid resolution of the per-period monopoly-profit search.
const MONOPOLY_GRID: usize = 1024;

// ---------------------------------------------------------------------------
// Profit
// ---------------------------------------------------------------------------

/// Per-period and total profit at given prices.
#[derive(Clone, Debug)]
pub struct ProfitBreakdown {
    pub per_period: Vec<f64>,
    pub total: f64,
}

/// `Π_t(π_t) = π_t d_t*(π_t) - C(d_t*(π_t))` per period, at the consumer
/// best responses.
pub fn profit(scenario: &Scenario, prices: &[f64]) -> Result<ProfitBreakdown> {
    if prices.len() != scenario.periods().len() {
        return Err(CoreError::Domain(format!(
            "expected {} prices, got {}",
            scenario.periods().len(),
            prices.len()
        )));
    }
    let mut per_period = Vec::with_capacity(prices.len());
    for (period, &price) in scenario.periods().iter().zip(prices) {
        let demand = scenario.aggregate(period)?.demand(price)?;
        per_period.push(price * demand - scenario.cost().value(demand));
    }
    let total = per_period.iter().sum();
    Ok(ProfitBreakdown { per_period, total })
}

// ---------------------------------------------------------------------------
// Profit-constrained (Ramsey) pricing
// ---------------------------------------------------------------------------

/// Solution of the profit-constrained pricing problem.
#[derive(Clone, Debug)]
pub struct RamseySolution {
    /// Profit-constraint multiplier; 0 when the constraint is slack.
    pub nu: f64,
    /// Per-period prices.
    pub prices: Vec<f64>,
    /// Per-period profits summing to the target.
    pub profits: Vec<f64>,
    pub total_profit: f64,
    /// `π_t - C'(d_t)` per period.
    pub distortions: Vec<f64>,
    /// Aggregate demand elasticity at the solution, per period.
    pub elasticities: Vec<f64>,
    /// Full equilibrium cross section at the constrained prices.
    pub equilibrium: Equilibrium,
}

/// Per-period price satisfying the constrained first-order condition at a
/// trial multiplier. In root form (multiplied through by `∂d/∂π`):
/// `R(π) = (C'(d) - π)(1-ν) ∂d/∂π - ν d = 0`.
///
/// `R` is the derivative of the period Lagrangian `W_t + ν Π_t` in price.
/// With inelastic isoelastic demand it can have several roots; the price
/// that matters is the Lagrangian minimizer, found by comparing candidates
/// through integrals of `R` between them.
fn period_price_at_nu(
    scenario: &Scenario,
    period: &str,
    nu: f64,
    var_price: f64,
) -> Result<f64> {
    if nu == 0.0 {
        return Ok(var_price);
    }
    let agg = scenario.aggregate(period)?;
    let root_fn = |price: f64| -> f64 {
        let d = agg.demand(price).expect("non-negative price");
        let slope = -agg.flexibility(price).expect("non-negative price");
        (scenario.cost().marginal(d) - price) * (1.0 - nu) * slope - nu * d
    };
    let choke = agg.max_choke_price()?;
    let (lo, hi) = if nu > 0.0 {
        // price rises toward (at most) the monopoly point, below the choke
        (var_price, choke - 1e-9 * choke.max(1.0))
    } else {
        // price falls; exclude the satiation kink at zero
        (1e-9 * var_price.max(1e-6), var_price)
    };
    if hi <= lo {
        return Err(CoreError::SolverFailure(format!(
            "empty price bracket for period {period} at nu={nu}"
        )));
    }

    let cells = 256;
    let step = (hi - lo) / cells as f64;
    let mut roots = Vec::new();
    let mut x0 = lo;
    let mut r0 = root_fn(x0);
    for i in 1..=cells {
        let x1 = if i == cells { hi } else { lo + step * i as f64 };
        let r1 = root_fn(x1);
        if r0 == 0.0 {
            roots.push(x0);
        } else if r0.signum() != r1.signum() {
            roots.push(numeric::bisect(&root_fn, x0, x1, scenario.options.var_tol)?);
        }
        x0 = x1;
        r0 = r1;
    }
    if roots.is_empty() {
        return Err(CoreError::SolverFailure(format!(
            "no constrained price satisfies the first-order condition in period {period} at nu={nu}"
        )));
    }
    if roots.len() == 1 {
        return Ok(roots[0]);
    }
    // Lagrangian differences between consecutive roots: ΔM = ∫ R dπ
    let mut best = (0usize, 0.0f64);
    let mut level = 0.0;
    for i in 1..roots.len() {
        level += numeric::adaptive_simpson(&root_fn, roots[i - 1], roots[i], 1e-10);
        if level < best.1 {
            best = (i, level);
        }
    }
    Ok(roots[best.0])
}

/// Constrained per-period prices for a fixed multiplier; `ν = 0` returns
/// the variable prices.
pub fn constrained_prices(scenario: &Scenario, nu: f64) -> Result<Vec<f64>> {
    let variable = market::solve_variable(scenario)?;
    scenario
        .periods()
        .iter()
        .zip(&variable.prices)
        .map(|(p, &vp)| period_price_at_nu(scenario, p, nu, vp))
        .collect()
}

/// Per-period monopoly profit by grid search plus golden-section refinement.
fn monopoly_profit(scenario: &Scenario, period: &str) -> Result<(f64, f64)> {
    let agg = scenario.aggregate(period)?;
    let choke = agg.max_choke_price()?;
    let profit_at = |price: f64| -> f64 {
        let d = agg.demand(price).expect("non-negative price");
        price * d - scenario.cost().value(d)
    };
    let mut best_i = 0;
    let mut best = f64::NEG_INFINITY;
    for i in 0..=MONOPOLY_GRID {
        let p = choke * i as f64 / MONOPOLY_GRID as f64;
        let v = profit_at(p);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let h = choke / MONOPOLY_GRID as f64;
    let lo = (best_i as f64 - 1.0).max(0.0) * h;
    let hi = ((best_i + 1) as f64 * h).min(choke);
    let (price, value) = golden_max(profit_at, lo, hi, 1e-10);
    Ok((price, value))
}

/// Golden-section maximization on `[lo, hi]`.
fn golden_max<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Solve the profit-constrained pricing problem: find the multiplier `ν` at
/// which the per-period constrained prices generate exactly `profit_target`
/// in total.
///
/// Errors when the target exceeds the monopoly profit (no feasible
/// solution) or when elasticity degenerates at the solution.
pub fn ramsey_solve(scenario: &Scenario, profit_target: f64) -> Result<RamseySolution> {
    let variable = market::solve_variable(scenario)?;
    let unconstrained = profit(scenario, &variable.prices)?.total;

    let mut monopoly_total = 0.0;
    for period in scenario.periods() {
        monopoly_total += monopoly_profit(scenario, period)?.1;
    }
    let feas_tol = PROFIT_TOL * monopoly_total.abs().max(1.0);
    if profit_target > monopoly_total + feas_tol {
        return Err(CoreError::InfeasibleTarget { target: profit_target, monopoly: monopoly_total });
    }

    if (profit_target - unconstrained).abs() <= PROFIT_TOL {
        return build_solution(scenario, 0.0, variable.prices.clone());
    }

    let prices_at = |nu: f64| -> Result<Vec<f64>> {
        scenario
            .periods()
            .iter()
            .zip(&variable.prices)
            .map(|(p, &vp)| period_price_at_nu(scenario, p, nu, vp))
            .collect()
    };
    let profit_gap = |nu: f64| -> Result<f64> {
        Ok(profit(scenario, &prices_at(nu)?)?.total - profit_target)
    };

    // profit is increasing in nu up to the monopoly point nu = 1/2
    let (mut lo, mut hi) = if profit_target > unconstrained {
        (0.0, 0.5)
    } else {
        // Descend geometrically. Very negative multipliers can push a
        // period's price to zero, where the inner solve has no root; back
        // off toward the last solvable multiplier when that happens.
        let mut last_ok = 0.0f64;
        let mut lo = -0.5;
        let mut found = None;
        for _ in 0..200 {
            match profit_gap(lo) {
                Ok(gap) if gap < 0.0 => {
                    found = Some(lo);
                    break;
                }
                Ok(_) => {
                    last_ok = lo;
                    lo *= 2.0;
                }
                Err(_) => {
                    lo = 0.5 * (lo + last_ok);
                    if (lo - last_ok).abs() < 1e-12 {
                        break;
                    }
                }
            }
        }
        let Some(lo) = found else {
            return Err(CoreError::SolverFailure(format!(
                "profit target {profit_target} below the reachable range of the price rule"
            )));
        };
        (lo, 0.0)
    };

    let mut nu = 0.5 * (lo + hi);
    for _ in 0..200 {
        nu = 0.5 * (lo + hi);
        let gap = profit_gap(nu)?;
        if gap.abs() <= PROFIT_TOL {
            break;
        }
        if gap > 0.0 {
            hi = nu;
        } else {
            lo = nu;
        }
    }
    let prices = prices_at(nu)?;
    let achieved = profit(scenario, &prices)?.total;
    if (achieved - profit_target).abs() > PROFIT_TOL * profit_target.abs().max(1.0) + PROFIT_TOL {
        return Err(CoreError::SolverFailure(format!(
            "profit search stalled at {achieved} for target {profit_target}"
        )));
    }
    build_solution(scenario, nu, prices)
}

fn build_solution(scenario: &Scenario, nu: f64, prices: Vec<f64>) -> Result<RamseySolution> {
    let breakdown = profit(scenario, &prices)?;
    let mut distortions = Vec::with_capacity(prices.len());
    let mut elasticities = Vec::with_capacity(prices.len());
    let mut residuals = Vec::with_capacity(prices.len());
    for (period, &price) in scenario.periods().iter().zip(&prices) {
        let agg = scenario.aggregate(period)?;
        let d = agg.demand(price)?;
        let slope = -agg.flexibility(price)?;
        if d <= 0.0 || slope == 0.0 {
            return Err(CoreError::DegenerateElasticity { period: period.clone(), price });
        }
        let elasticity = slope * price / d;
        if elasticity.abs() < 1e-12 {
            return Err(CoreError::DegenerateElasticity { period: period.clone(), price });
        }
        let marginal = scenario.cost().marginal(d);
        distortions.push(price - marginal);
        elasticities.push(elasticity);
        residuals.push((marginal - price) * (1.0 - nu) - nu * price / elasticity);
    }
    let equilibrium =
        market::equilibrium_at(scenario, PricingRegime::ProfitConstrained, prices.clone(), residuals)?;
    Ok(RamseySolution {
        nu,
        prices,
        profits: breakdown.per_period,
        total_profit: breakdown.total,
        distortions,
        elasticities,
        equilibrium,
    })
}

// ---------------------------------------------------------------------------
// Many periods
// ---------------------------------------------------------------------------

/// Flat price over `T >= 2` periods with the flexibility-weighted identity
/// evaluated at the solution.
#[derive(Clone, Debug)]
pub struct MultiPeriodFlatPrice {
    pub price: f64,
    /// `Σ_t C'(d_t) |∂d_t/∂π| / Σ_t |∂d_t/∂π|` at the flat price.
    pub weighted_average: f64,
    /// `|price - weighted_average|`.
    pub identity_residual: f64,
    pub equilibrium: Equilibrium,
}

/// Solve the flat price for a scenario with any number of periods and check
/// the closed identity that the flat price is the flexibility-weighted
/// average of marginal procurement costs.
pub fn multi_period_flat_price(scenario: &Scenario) -> Result<MultiPeriodFlatPrice> {
    if scenario.periods().len() < 2 {
        return Err(CoreError::Precondition(format!(
            "multi-period flat price needs >= 2 periods, got {}",
            scenario.periods().len()
        )));
    }
    let equilibrium = market::solve_flat(scenario)?;
    let price = equilibrium.prices[0];
    let mut num = 0.0;
    let mut den = 0.0;
    for period in scenario.periods() {
        let agg = scenario.aggregate(period)?;
        let flex = agg.flexibility(price)?;
        num += scenario.cost().marginal(agg.demand(price)?) * flex;
        den += flex;
    }
    let weighted_average = if den > 0.0 { num / den } else { price };
    Ok(MultiPeriodFlatPrice {
        price,
        weighted_average,
        identity_residual: (price - weighted_average).abs(),
        equilibrium,
    })
}

/// Screen a consumer over any number of periods. Rising-price periods take
/// their flexibility bound at the flat price and falling-price periods at
/// their variable price, exactly as in the two-period condition; when the
/// consumer is isoelastic in every period the exact closed form is summed
/// across periods instead.
pub fn multi_period_screen(
    consumer: &Consumer,
    flat: &Equilibrium,
    variable: &Equilibrium,
) -> Result<ScreeningVerdict> {
    if welfare::all_isoelastic(consumer, &flat.periods)? {
        welfare::iso_screen_any_periods(consumer, flat, variable)
    } else {
        welfare::linear_screen_any_periods(consumer, flat, variable)
    }
}

// ---------------------------------------------------------------------------
