//! Supply cost model and the planner's equilibria: per-period variable
//! prices, the single flat price, social loss, welfare curvature, and
//! price-change diagnostics. Everything is generic over the number of
//! periods.
//!
//! Under variable pricing each period independently solves
//! `C'(d_t) + Ĵ_t'(d_t) = 0`, so the price equals marginal procurement cost.
//! Under flat pricing one price clears the cross-period balance
//! `Σ_t (C'(d_t) - π) ∂d_t/∂π = 0`; the flat price always lies inside the
//! hull of the variable prices, which gives the root search its bracket.

use std::collections::BTreeSet;

use crate::aggregate::AggregateView;
use crate::error::CoreError;
use crate::loss::{AssumptionReport, Consumer};
use crate::numeric;
use crate::Result;

/// Grid resolution for cost-assumption checks at ingestion.
const COST_GRID: usize = 256;

/// Slack for non-negativity checks on the cost grid.
const COST_SLACK: f64 = 1e-10;

// ---------------------------------------------------------------------------
// Cost
// ---------------------------------------------------------------------------

/// Procurement cost polynomial `C(d) = Σ_j c_j d^j`, shared by all periods.
#[derive(Clone, Debug, PartialEq)]
pub struct CostSpec {
    coeffs: Vec<f64>,
}

/// One cost-assumption check over the ingestion grid.
#[derive(Clone, Debug)]
pub struct CostCheck {
    pub name: &'static str,
    pub pass: bool,
    /// `(d, value)` at the first violating grid point.
    pub first_violation: Option<(f64, f64)>,
}

impl CostSpec {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(CoreError::InvalidScenario("cost polynomial needs >= 1 coefficient".into()));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(CoreError::InvalidScenario("cost coefficients must be finite".into()));
        }
        Ok(CostSpec { coeffs })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// `C(d)`.
    pub fn value(&self, d: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * d + c)
    }

    /// `C'(d)`.
    pub fn marginal(&self, d: f64) -> f64 {
        let mut acc = 0.0;
        for (j, c) in self.coeffs.iter().enumerate().skip(1).rev() {
            acc = acc * d + j as f64 * c;
        }
        acc
    }

    /// `C''(d)`.
    pub fn curvature(&self, d: f64) -> f64 {
        let mut acc = 0.0;
        for (j, c) in self.coeffs.iter().enumerate().skip(2).rev() {
            acc = acc * d + (j * (j - 1)) as f64 * c;
        }
        acc
    }

    /// Check `C >= 0`, `C' >= 0`, `C'' >= 0` on a uniform grid over
    /// `[0, hi]`.
    pub fn checks(&self, hi: f64) -> Vec<CostCheck> {
        let mut value = CostCheckState::new("cost_nonnegative");
        let mut marginal = CostCheckState::new("marginal_cost_nonnegative");
        let mut convex = CostCheckState::new("cost_convex");
        for i in 0..COST_GRID {
            let d = hi * i as f64 / (COST_GRID - 1) as f64;
            value.require(d, self.value(d));
            marginal.require(d, self.marginal(d));
            convex.require(d, self.curvature(d));
        }
        vec![value.0, marginal.0, convex.0]
    }
}

struct CostCheckState(CostCheck);

impl CostCheckState {
    fn new(name: &'static str) -> Self {
        CostCheckState(CostCheck { name, pass: true, first_violation: None })
    }

    fn require(&mut self, d: f64, v: f64) {
        if v < -COST_SLACK && self.0.pass {
            self.0.pass = false;
            self.0.first_violation = Some((d, v));
        }
    }
}

// ---------------------------------------------------------------------------
// Scenario
// ---------------------------------------------------------------------------

/// Solver tolerances and grid sizes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Bracket tolerance of the flat-price bisection.
    pub flat_tol: f64,
    /// Bracket tolerance of the per-period variable-price bisection.
    pub var_tol: f64,
    /// Relative tolerance of utility-change quadrature.
    pub quad_tol: f64,
    /// Validation grid resolution.
    pub grid_points: usize,
    /// Seed for randomized verification runs.
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { flat_tol: 1e-10, var_tol: 1e-10, quad_tol: 1e-9, grid_points: 256, seed: 0 }
    }
}

/// One analyzable market instance: ordered periods (most critical first for
/// two-period scenarios), a consumer set, and the shared cost technology.
#[derive(Clone, Debug)]
pub struct Scenario {
    periods: Vec<String>,
    consumers: Vec<Consumer>,
    cost: CostSpec,
    pub options: SolverOptions,
}

impl Scenario {
    /// Build and structurally validate. The cost assumptions
    /// (non-negative, non-decreasing, convex on `[0, max_t Σ_i d_bar]`) are
    /// enforced here; one cost function applies to every period.
    pub fn new(
        periods: Vec<String>,
        consumers: Vec<Consumer>,
        cost: CostSpec,
        options: SolverOptions,
    ) -> Result<Self> {
        if periods.is_empty() {
            return Err(CoreError::InvalidScenario("scenario needs >= 1 period".into()));
        }
        if consumers.is_empty() {
            return Err(CoreError::InvalidScenario("scenario needs >= 1 consumer".into()));
        }
        let mut seen = BTreeSet::new();
        for p in &periods {
            if !seen.insert(p.as_str()) {
                return Err(CoreError::InvalidScenario(format!("duplicate period label {p}")));
            }
        }
        for c in &consumers {
            for p in &periods {
                c.loss_spec(p)?;
            }
        }
        let scenario = Scenario { periods, consumers, cost, options };
        scenario.ensure_cost_valid()?;
        Ok(scenario)
    }

    pub fn periods(&self) -> &[String] {
        &self.periods
    }

    pub fn consumers(&self) -> &[Consumer] {
        &self.consumers
    }

    pub fn cost(&self) -> &CostSpec {
        &self.cost
    }

    pub fn period_index(&self, label: &str) -> Option<usize> {
        self.periods.iter().position(|p| p == label)
    }

    /// Aggregate-consumer view of one period.
    pub fn aggregate(&self, period: &str) -> Result<AggregateView<'_>> {
        let label = self
            .periods
            .iter()
            .find(|p| p.as_str() == period)
            .ok_or_else(|| CoreError::Domain(format!("unknown period {period}")))?;
        AggregateView::new(&self.consumers, label)
    }

    /// Largest aggregate satiation across periods; the cost grid range.
    pub fn max_total_d_bar(&self) -> Result<f64> {
        let mut max = 0.0f64;
        for p in &self.periods {
            max = max.max(self.aggregate(p)?.total_d_bar()?);
        }
        Ok(max)
    }

    /// Error if any cost-assumption check fails on the ingestion grid.
    pub fn ensure_cost_valid(&self) -> Result<()> {
        let hi = self.max_total_d_bar()?;
        for check in self.cost.checks(hi) {
            if !check.pass {
                let (d, v) = check.first_violation.unwrap_or((0.0, 0.0));
                return Err(CoreError::InvalidScenario(format!(
                    "cost check {} failed at d={d}: value {v}",
                    check.name
                )));
            }
        }
        Ok(())
    }

    /// Assumption-grid reports for every consumer over the scenario periods.
    pub fn validate_assumptions(&self) -> Result<Vec<AssumptionReport>> {
        let labels: Vec<&str> = self.periods.iter().map(|s| s.as_str()).collect();
        self.consumers
            .iter()
            .map(|c| c.validate_assumptions(&labels, self.options.grid_points))
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Equilibrium
// ---------------------------------------------------------------------------

/// Pricing regime an equilibrium was solved under.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PricingRegime {
    Flat,
    Variable,
    ProfitConstrained,
}

/// A solved equilibrium for one pricing regime.
#[derive(Clone, Debug)]
pub struct Equilibrium {
    pub regime: PricingRegime,
    pub periods: Vec<String>,
    pub consumer_ids: Vec<String>,
    /// Price per period (all equal under `Flat`).
    pub prices: Vec<f64>,
    /// Aggregate demand per period.
    pub aggregate_demand: Vec<f64>,
    /// `individual_demand[consumer][period]`.
    pub individual_demand: Vec<Vec<f64>>,
    /// Total social loss `Σ_t [C(d_t) + Σ_i Ĵ_it(d_it)]`.
    pub social_loss: f64,
    /// `(consumer, period)` pairs clamped at a box constraint.
    pub boundary_flags: BTreeSet<(usize, usize)>,
    /// Per-period first-order-condition residuals. Variable:
    /// `C'(d_t) - π_t`. Flat: the period's summand of the balance condition.
    pub foc_residuals: Vec<f64>,
}

impl Equilibrium {
    pub fn price(&self, period: &str) -> Option<f64> {
        self.periods.iter().position(|p| p == period).map(|i| self.prices[i])
    }

    /// True when any consumer is clamped in any period. The screening
    /// exactness claims assume interior behavior, so downstream verdicts are
    /// downgraded when this is set.
    pub fn is_boundary_contaminated(&self) -> bool {
        !self.boundary_flags.is_empty()
    }
}

/// Build the per-period cross sections of an equilibrium at given prices.
pub(crate) fn equilibrium_at(
    scenario: &Scenario,
    regime: PricingRegime,
    prices: Vec<f64>,
    foc_residuals: Vec<f64>,
) -> Result<Equilibrium> {
    let n = scenario.consumers.len();
    let t = scenario.periods.len();
    let mut aggregate_demand = vec![0.0; t];
    let mut individual_demand = vec![vec![0.0; t]; n];
    let mut boundary_flags = BTreeSet::new();
    let mut loss = 0.0;
    for (pi, period) in scenario.periods.iter().enumerate() {
        let price = prices[pi];
        let mut total = 0.0;
        for (ci, consumer) in scenario.consumers.iter().enumerate() {
            let point = consumer.optimal_demand(period, price)?;
            individual_demand[ci][pi] = point.quantity;
            total += point.quantity;
            if !point.is_interior() {
                boundary_flags.insert((ci, pi));
            }
            loss += consumer.view(period)?.jhat(point.quantity);
        }
        aggregate_demand[pi] = total;
        loss += scenario.cost.value(total);
    }
    Ok(Equilibrium {
        regime,
        periods: scenario.periods.clone(),
        consumer_ids: scenario.consumers.iter().map(|c| c.id.clone()).collect(),
        prices,
        aggregate_demand,
        individual_demand,
        social_loss: loss,
        boundary_flags,
        foc_residuals,
    })
}

// ---------------------------------------------------------------------------
// Solvers
// ---------------------------------------------------------------------------

/// Solve the variable-pricing equilibrium: in each period marginal
/// procurement cost equals marginal avoided loss, so `π_t = C'(d_t)` at the
/// demand where `C'(d) + Ĵ_t'(d) = 0`. The root is found by bisection on the
/// price axis, where `C'(d_t(π)) - π` is strictly decreasing; boundary roots
/// set the boundary flags and price at the boundary marginal cost.
pub fn solve_variable(scenario: &Scenario) -> Result<Equilibrium> {
    scenario.ensure_cost_valid()?;
    let tol = scenario.options.var_tol;
    let mut prices = Vec::with_capacity(scenario.periods.len());
    let mut residuals = Vec::with_capacity(scenario.periods.len());
    for period in &scenario.periods {
        let agg = scenario.aggregate(period)?;
        let f = |price: f64| {
            let d = agg.demand(price).expect("non-negative price");
            scenario.cost.marginal(d) - price
        };
        let f0 = f(0.0);
        let price = if f0 <= 0.0 {
            // marginal cost already at or below zero price: satiation
            0.0
        } else {
            let hi = agg.max_choke_price()?.max(scenario.cost.marginal(agg.demand(0.0)?)) + 1.0;
            numeric::bisect(f, 0.0, hi, tol)?
        };
        residuals.push(f(price));
        prices.push(price);
    }
    equilibrium_at(scenario, PricingRegime::Variable, prices, residuals)
}

/// Solve the flat-pricing equilibrium: the single price at which the
/// marginal welfare loss of raising the price in one period exactly offsets
/// the marginal gain in the others, `Σ_t (C'(d_t) - π) ∂d_t/∂π = 0`.
///
/// The variable prices bracket the root; when they coincide the scenario is
/// symmetric and that common price is returned directly.
pub fn solve_flat(scenario: &Scenario) -> Result<Equilibrium> {
    let variable = solve_variable(scenario)?;
    solve_flat_with(scenario, &variable)
}

/// [`solve_flat`] reusing an already-solved variable equilibrium.
pub fn solve_flat_with(scenario: &Scenario, variable: &Equilibrium) -> Result<Equilibrium> {
    let lo = variable.prices.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = variable.prices.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    let views: Vec<AggregateView<'_>> = scenario
        .periods
        .iter()
        .map(|p| scenario.aggregate(p))
        .collect::<Result<_>>()?;
    let balance = |price: f64| -> f64 {
        views
            .iter()
            .map(|agg| {
                let d = agg.demand(price).expect("non-negative price");
                let slope = -agg.flexibility(price).expect("non-negative price");
                (scenario.cost.marginal(d) - price) * slope
            })
            .sum()
    };

    let price = if hi - lo <= scenario.options.flat_tol {
        0.5 * (lo + hi)
    } else {
        // Where consumers clamp inside the bracket the per-period welfare
        // picks up kinks: the balance can cross zero more than once and can
        // jump across zero at a choke price with no root at all. Collect
        // every root plus every in-bracket choke price and keep the
        // social-loss minimizer.
        let mut candidates = vec![lo, hi];
        for period in &scenario.periods {
            for consumer in &scenario.consumers {
                let choke = consumer.choke_price(period)?;
                if choke > lo && choke < hi {
                    candidates.push(choke);
                }
            }
        }
        let cells = 256;
        let step = (hi - lo) / cells as f64;
        let mut x0 = lo;
        let mut b0 = balance(x0);
        for i in 1..=cells {
            let x1 = if i == cells { hi } else { lo + step * i as f64 };
            let b1 = balance(x1);
            if b0 == 0.0 {
                candidates.push(x0);
            } else if b0.signum() != b1.signum() {
                candidates.push(numeric::bisect(&balance, x0, x1, scenario.options.flat_tol)?);
            }
            x0 = x1;
            b0 = b1;
        }
        let mut best = (f64::INFINITY, lo);
        for &candidate in &candidates {
            let loss = social_loss(scenario, &vec![candidate; scenario.periods.len()])?;
            if loss < best.0 {
                best = (loss, candidate);
            }
        }
        best.1
    };

    let residuals: Vec<f64> = views
        .iter()
        .map(|agg| {
            let d = agg.demand(price).expect("non-negative price");
            let slope = -agg.flexibility(price).expect("non-negative price");
            (scenario.cost.marginal(d) - price) * slope
        })
        .collect();
    let prices = vec![price; scenario.periods.len()];
    equilibrium_at(scenario, PricingRegime::Flat, prices, residuals)
}

/// Solve both regimes, reusing the variable solution for the flat bracket.
pub fn solve_both(scenario: &Scenario) -> Result<(Equilibrium, Equilibrium)> {
    let variable = solve_variable(scenario)?;
    let flat = solve_flat_with(scenario, &variable)?;
    Ok((variable, flat))
}

/// Total social loss `Σ_t [C(d_t*(π_t)) + Σ_i Ĵ_it(d_it*(π_t))]` at
/// arbitrary per-period prices.
pub fn social_loss(scenario: &Scenario, prices: &[f64]) -> Result<f64> {
    if prices.len() != scenario.periods.len() {
        return Err(CoreError::Domain(format!(
            "expected {} prices, got {}",
            scenario.periods.len(),
            prices.len()
        )));
    }
    social_loss_parts(&scenario.consumers, &scenario.cost, &scenario.periods, prices)
}

/// [`social_loss`] over raw parts; tolerates an empty consumer set, where
/// the loss degenerates to `Σ_t C(0)`.
pub fn social_loss_parts(
    consumers: &[Consumer],
    cost: &CostSpec,
    periods: &[String],
    prices: &[f64],
) -> Result<f64> {
    let mut total = 0.0;
    for (period, &price) in periods.iter().zip(prices) {
        if !price.is_finite() || price < 0.0 {
            return Err(CoreError::Domain(format!("price must be finite and >= 0, got {price}")));
        }
        let mut demand = 0.0;
        for c in consumers {
            let q = c.optimal_demand(period, price)?.quantity;
            demand += q;
            total += c.view(period)?.jhat(q);
        }
        total += cost.value(demand);
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// Curvature diagnostics
// ---------------------------------------------------------------------------

/// Two-term decomposition of `∂²W_t/∂π²`.
#[derive(Clone, Copy, Debug)]
pub struct WelfareCurvature {
    /// `(∂²d_t/∂π²) [C'(d_t) - π]`; signed by which side of the efficient
    /// price the period sits on.
    pub level_term: f64,
    /// `(∂d_t/∂π)² [C''(d_t) + Ĵ_t''(d_t)]`; always non-negative.
    pub curvature_term: f64,
}

impl WelfareCurvature {
    pub fn total(&self) -> f64 {
        self.level_term + self.curvature_term
    }
}

/// Curvature of the period-`t` welfare function in price, decomposed per the
/// sign analysis of the price-adjustment discussion. Errors when aggregate
/// demand is fully clamped at `price`.
pub fn welfare_curvature(scenario: &Scenario, period: &str, price: f64) -> Result<WelfareCurvature> {
    let agg = scenario.aggregate(period)?;
    let flex = agg.flexibility(price)?;
    if flex <= 0.0 {
        return Err(CoreError::UndefinedCurvature { price });
    }
    let d = agg.demand(price)?;
    let slope = -flex;
    let conv = agg.convexity(price)?;
    // marginal aggregate loss is -price while any consumer is interior
    let level_term = conv * (scenario.cost.marginal(d) - price);
    let curvature_term = slope * slope * (scenario.cost.curvature(d) + 1.0 / flex);
    Ok(WelfareCurvature { level_term, curvature_term })
}

/// Sensitivity of welfare curvature to aggregate flexibility at one point:
/// `3 Ĵ_t'''(d) (∂d/∂π)² [C'(d) - π] + 2 (∂d/∂π) C''(d) - 1`.
///
/// At the period's variable price the first term vanishes because
/// `C' = π` there.
#[derive(Clone, Copy, Debug)]
pub struct CurvatureSensitivity {
    pub third_derivative_term: f64,
    pub cost_curvature_term: f64,
}

impl CurvatureSensitivity {
    pub fn value(&self) -> f64 {
        self.third_derivative_term + self.cost_curvature_term - 1.0
    }
}

pub fn curvature_flexibility_sensitivity(
    scenario: &Scenario,
    period: &str,
    price: f64,
) -> Result<CurvatureSensitivity> {
    let agg = scenario.aggregate(period)?;
    let flex = agg.flexibility(price)?;
    if flex <= 0.0 {
        return Err(CoreError::UndefinedCurvature { price });
    }
    let slope = -flex;
    let d = agg.demand(price)?;
    // aggregate Ĵ''' = (∂²d/∂π²) / (∂d/∂π)³
    let jhat3 = agg.convexity(price)? / (slope * slope * slope);
    Ok(CurvatureSensitivity {
        third_derivative_term: 3.0 * jhat3 * slope * slope * (scenario.cost.marginal(d) - price),
        cost_curvature_term: 2.0 * slope * scenario.cost.curvature(d),
    })
}

// ---------------------------------------------------------------------------
// Price-change report
// ---------------------------------------------------------------------------

/// Per-period price movement with its interval-averaged welfare curvature.
#[derive(Clone, Debug)]
pub struct PriceChangeEntry {
    pub period: String,
    /// `Δπ_t = π_t^V - π^F`.
    pub delta: f64,
    /// Average of `∂²W_t/∂π²` over the interval between the flat and
    /// variable price (point value when the interval is empty).
    pub avg_curvature: f64,
    /// `|Δπ_t| · avg_curvature`; equal across periods in the two-period
    /// case by the mean-value identity.
    pub product: f64,
}

/// Price-change diagnostics across the regime switch.
#[derive(Clone, Debug)]
pub struct PriceChangeReport {
    pub entries: Vec<PriceChangeEntry>,
    /// Relative spread of the `|Δπ_t| · avg_curvature` products.
    pub product_spread: f64,
}

/// Compare flat and variable equilibria: per-period price deltas and the
/// interval-averaged curvature, computed by adaptive quadrature of
/// `∂²W_t/∂π²` over each price interval.
pub fn price_change_report(
    scenario: &Scenario,
    flat: &Equilibrium,
    variable: &Equilibrium,
) -> Result<PriceChangeReport> {
    let flat_price = flat.prices[0];
    let mut entries = Vec::with_capacity(scenario.periods.len());
    for (i, period) in scenario.periods.iter().enumerate() {
        let var_price = variable.prices[i];
        let delta = var_price - flat_price;
        let avg_curvature = if delta.abs() <= 1e-14 {
            welfare_curvature(scenario, period, flat_price)?.total()
        } else {
            let (lo, hi) = if delta > 0.0 { (flat_price, var_price) } else { (var_price, flat_price) };
            let integral = numeric::adaptive_simpson(
                |p| {
                    welfare_curvature(scenario, period, p)
                        .map(|w| w.total())
                        .unwrap_or(0.0)
                },
                lo,
                hi,
                1e-9,
            );
            integral / (hi - lo)
        };
        entries.push(PriceChangeEntry {
            period: period.clone(),
            delta,
            avg_curvature,
            product: delta.abs() * avg_curvature,
        });
    }
    let max = entries.iter().map(|e| e.product).fold(f64::NEG_INFINITY, f64::max);
    let min = entries.iter().map(|e| e.product).fold(f64::INFINITY, f64::min);
    let product_spread = if max.abs() < 1e-14 { 0.0 } else { (max - min) / max.abs() };
    Ok(PriceChangeReport { entries, product_spread })
}

// ---------------------------------------------------------------------------

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::loss::LossSpec;
    use std::collections::BTreeMap;

    /// Two identical consumers, A=1, k=2, d_bar 5 (PE) / 3 (OP); cost d²/2.
    pub(crate) fn s1() -> Scenario {
        let consumers = (0..2)
            .map(|i| {
                let mut losses = BTreeMap::new();
                losses.insert("PE".to_string(), LossSpec::Quadratic { k: 2.0, d_bar: 5.0 });
                losses.insert("OP".to_string(), LossSpec::Quadratic { k: 2.0, d_bar: 3.0 });
                Consumer::new(format!("hh{i}"), 1.0, losses).unwrap()
            })
            .collect();
        Scenario::new(
            vec!["PE".into(), "OP".into()],
            consumers,
            CostSpec::new(vec![0.0, 0.0, 0.5]).unwrap(),
            SolverOptions::default(),
        )
        .unwrap()
    }

    /// As S1 but with off-peak curvature halved: k_OP = 1.
    pub(crate) fn s2() -> Scenario {
        let consumers = (0..2)
            .map(|i| {
                let mut losses = BTreeMap::new();
                losses.insert("PE".to_string(), LossSpec::Quadratic { k: 2.0, d_bar: 5.0 });
                losses.insert("OP".to_string(), LossSpec::Quadratic { k: 1.0, d_bar: 3.0 });
                Consumer::new(format!("hh{i}"), 1.0, losses).unwrap()
            })
            .collect();
        Scenario::new(
            vec!["PE".into(), "OP".into()],
            consumers,
            CostSpec::new(vec![0.0, 0.0, 0.5]).unwrap(),
            SolverOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn cost_spec_derivatives() {
        let c = CostSpec::new(vec![1.0, 2.0, 0.5, 0.25]).unwrap();
        let d = 3.0;
        assert!((c.value(d) - (1.0 + 6.0 + 4.5 + 6.75)).abs() < 1e-12);
        assert!((c.marginal(d) - (2.0 + 3.0 + 0.75 * 9.0)).abs() < 1e-12);
        // C'' = 2*0.5 + 6*0.25*d = 1 + 4.5
        assert!((c.curvature(d) - 5.5).abs() < 1e-12);
    }

    #[test]
    fn decreasing_cost_rejected_at_ingestion() {
        let consumers = s1().consumers().to_vec();
        let bad = CostSpec::new(vec![0.0, -1.0]).unwrap();
        let err = Scenario::new(
            vec!["PE".into(), "OP".into()],
            consumers,
            bad,
            SolverOptions::default(),
        );
        assert!(matches!(err, Err(CoreError::InvalidScenario(_))));
    }

    #[test]
    fn s1_variable_closed_forms() {
        let eq = solve_variable(&s1()).unwrap();
        assert!((eq.price("PE").unwrap() - 20.0 / 3.0).abs() < 1e-8);
        assert!((eq.price("OP").unwrap() - 4.0).abs() < 1e-8);
        assert!((eq.aggregate_demand[0] - 20.0 / 3.0).abs() < 1e-8);
        assert!((eq.aggregate_demand[1] - 4.0).abs() < 1e-8);
        assert!(eq.boundary_flags.is_empty());
        assert!(eq.foc_residuals.iter().all(|r| r.abs() < 1e-8));
    }

    #[test]
    fn zero_cost_supply_satiates() {
        let consumers = s1().consumers().to_vec();
        let scenario = Scenario::new(
            vec!["PE".into(), "OP".into()],
            consumers,
            CostSpec::new(vec![0.0]).unwrap(),
            SolverOptions::default(),
        )
        .unwrap();
        let eq = solve_variable(&scenario).unwrap();
        assert_eq!(eq.price("PE").unwrap(), 0.0);
        assert!((eq.aggregate_demand[0] - 10.0).abs() < 1e-12);
        assert!((eq.aggregate_demand[1] - 6.0).abs() < 1e-12);
        assert!(!eq.boundary_flags.is_empty());
    }

    #[test]
    fn s1_flat_closed_forms() {
        let flat = solve_flat(&s1()).unwrap();
        assert!((flat.prices[0] - 16.0 / 3.0).abs() < 1e-8);
        assert!((flat.aggregate_demand[0] - 22.0 / 3.0).abs() < 1e-8);
        assert!((flat.aggregate_demand[1] - 10.0 / 3.0).abs() < 1e-8);
        assert!(flat.foc_residuals.iter().sum::<f64>().abs() < 1e-8);
    }

    #[test]
    fn s2_flat_price_and_weighted_average() {
        let scenario = s2();
        let flat = solve_flat(&scenario).unwrap();
        assert!((flat.prices[0] - 4.0).abs() < 1e-8);

        // flexibility-weighted marginal costs reproduce the flat price
        let price = flat.prices[0];
        let mut num = 0.0;
        let mut den = 0.0;
        for p in scenario.periods() {
            let agg = scenario.aggregate(p).unwrap();
            let w = agg.flexibility(price).unwrap();
            num += scenario.cost().marginal(agg.demand(price).unwrap()) * w;
            den += w;
        }
        assert!((num / den - price).abs() < 1e-8);
    }

    #[test]
    fn identical_periods_collapse_to_common_price() {
        let consumers = (0..2)
            .map(|i| {
                let mut losses = BTreeMap::new();
                losses.insert("PE".to_string(), LossSpec::Quadratic { k: 2.0, d_bar: 5.0 });
                losses.insert("OP".to_string(), LossSpec::Quadratic { k: 2.0, d_bar: 5.0 });
                Consumer::new(format!("hh{i}"), 1.0, losses).unwrap()
            })
            .collect();
        let scenario = Scenario::new(
            vec!["PE".into(), "OP".into()],
            consumers,
            CostSpec::new(vec![0.0, 0.0, 0.5]).unwrap(),
            SolverOptions::default(),
        )
        .unwrap();
        let (var, flat) = solve_both(&scenario).unwrap();
        assert!((var.prices[0] - var.prices[1]).abs() < 1e-10);
        assert!((flat.prices[0] - var.prices[0]).abs() < 1e-9);
        assert!((flat.social_loss - var.social_loss).abs() < 1e-10);
    }

    #[test]
    fn social_loss_ordering_and_values() {
        let scenario = s1();
        let (var, flat) = solve_both(&scenario).unwrap();
        assert!(var.social_loss <= flat.social_loss + 1e-10);
        // hand values: W^V = 136/3, W^F = 140/3
        assert!((var.social_loss - 136.0 / 3.0).abs() < 1e-8);
        assert!((flat.social_loss - 140.0 / 3.0).abs() < 1e-8);
    }

    #[test]
    fn social_loss_no_consumers_is_pure_cost() {
        let cost = CostSpec::new(vec![2.5, 1.0]).unwrap();
        let loss = social_loss_parts(&[], &cost, &["PE".into(), "OP".into()], &[3.0, 1.0]).unwrap();
        assert!((loss - 5.0).abs() < 1e-12);
    }

    #[test]
    fn welfare_curvature_closed_forms() {
        let s1 = s1();
        let w = welfare_curvature(&s1, "PE", 5.0).unwrap();
        assert_eq!(w.level_term, 0.0);
        assert!((w.total() - 0.75).abs() < 1e-12);

        let s2 = s2();
        let w = welfare_curvature(&s2, "OP", 3.5).unwrap();
        assert!((w.total() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn welfare_curvature_level_term_signs_at_flat_price() {
        // isoelastic consumers so the level term is non-zero
        let consumers = (0..2)
            .map(|i| {
                let mut losses = BTreeMap::new();
                losses.insert(
                    "PE".to_string(),
                    LossSpec::IsoelasticDemand {
                        d_ref: 3.0,
                        pi_ref: 4.0,
                        epsilon: -0.6,
                        pi_low: 0.04,
                        pi_high: 400.0,
                    },
                );
                losses.insert(
                    "OP".to_string(),
                    LossSpec::IsoelasticDemand {
                        d_ref: 3.0,
                        pi_ref: 2.0,
                        epsilon: -0.6,
                        pi_low: 0.02,
                        pi_high: 200.0,
                    },
                );
                Consumer::new(format!("hh{i}"), 1.0, losses).unwrap()
            })
            .collect();
        let scenario = Scenario::new(
            vec!["PE".into(), "OP".into()],
            consumers,
            CostSpec::new(vec![0.0, 0.1, 0.4]).unwrap(),
            SolverOptions::default(),
        )
        .unwrap();
        let (var, flat) = solve_both(&scenario).unwrap();
        let price = flat.prices[0];
        assert!(var.price("PE").unwrap() > price && price > var.price("OP").unwrap());
        assert!(welfare_curvature(&scenario, "PE", price).unwrap().level_term >= 0.0);
        assert!(welfare_curvature(&scenario, "OP", price).unwrap().level_term <= 0.0);
    }

    #[test]
    fn price_change_report_s1_and_s2() {
        let s1 = s1();
        let (var, flat) = solve_both(&s1).unwrap();
        let report = price_change_report(&s1, &flat, &var).unwrap();
        assert!((report.entries[0].delta - 4.0 / 3.0).abs() < 1e-8);
        assert!((report.entries[1].delta + 4.0 / 3.0).abs() < 1e-8);
        assert!((report.entries[0].avg_curvature - 0.75).abs() < 1e-8);
        assert!(report.product_spread < 1e-6);

        let s2 = s2();
        let (var, flat) = solve_both(&s2).unwrap();
        let report = price_change_report(&s2, &flat, &var).unwrap();
        let ratio = report.entries[0].delta.abs() / report.entries[1].delta.abs();
        assert!((ratio - 8.0 / 3.0).abs() < 1e-6);
        let curvature_ratio = report.entries[1].avg_curvature / report.entries[0].avg_curvature;
        assert!((curvature_ratio - 8.0 / 3.0).abs() < 1e-6);
        assert!(report.product_spread < 1e-6);
    }

    #[test]
    fn price_change_report_symmetric_is_zero() {
        let consumers = (0..2)
            .map(|i| {
                let mut losses = BTreeMap::new();
                losses.insert("PE".to_string(), LossSpec::Quadratic { k: 1.0, d_bar: 4.0 });
                losses.insert("OP".to_string(), LossSpec::Quadratic { k: 1.0, d_bar: 4.0 });
                Consumer::new(format!("hh{i}"), 1.0, losses).unwrap()
            })
            .collect();
        let scenario = Scenario::new(
            vec!["PE".into(), "OP".into()],
            consumers,
            CostSpec::new(vec![0.0, 0.0, 0.5]).unwrap(),
            SolverOptions::default(),
        )
        .unwrap();
        let (var, flat) = solve_both(&scenario).unwrap();
        let report = price_change_report(&scenario, &flat, &var).unwrap();
        assert!(report.entries.iter().all(|e| e.delta.abs() < 1e-9));
    }

    #[test]
    fn curvature_sensitivity_closed_forms() {
        let scenario = s1();
        let var = solve_variable(&scenario).unwrap();
        let s = curvature_flexibility_sensitivity(&scenario, "PE", var.prices[0]).unwrap();
        assert_eq!(s.third_derivative_term, 0.0);
        assert!((s.value() + 2.0).abs() < 1e-8);

        // constant marginal cost: C'' = 0 at the variable price
        let consumers = scenario.consumers().to_vec();
        let linear_cost = Scenario::new(
            vec!["PE".into(), "OP".into()],
            consumers,
            CostSpec::new(vec![0.0, 2.0]).unwrap(),
            SolverOptions::default(),
        )
        .unwrap();
        let var = solve_variable(&linear_cost).unwrap();
        let s = curvature_flexibility_sensitivity(&linear_cost, "PE", var.prices[0]).unwrap();
        assert!((s.value() + 1.0).abs() < 1e-9);
    }
}
