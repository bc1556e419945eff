//! Loss-function families, optimal demand curves, flexibility, and
//! assumption validation for individual consumers.
//!
//! A consumer's electricity loss `J(d)` is the disutility of consuming `d`
//! below the satiation level `d_bar`. All demand behavior flows from the
//! normalized loss `Ĵ = J / A`: optimal demand inverts `Ĵ'` at `-price` and
//! clamps to `[0, d_bar]`, flexibility is `1 / Ĵ''` at the optimum, and the
//! curvature of demand in price is controlled by `Ĵ'''`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::CoreError;
use crate::numeric;
use crate::Result;

/// Slack applied when checking strict inequalities on a validation grid.
const GRID_SLACK: f64 = 1e-10;

/// Absolute tolerance (in demand units) of the monotone demand inversion
/// used for custom loss functions.
const CUSTOM_INVERT_TOL: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Loss specifications
// ---------------------------------------------------------------------------

/// Evaluator bundle for a user-supplied loss function and its first three
/// derivatives on `[0, d_bar]`.
#[derive(Clone)]
pub struct CustomLoss {
    /// Satiation / maximum consumption (energy).
    pub d_bar: f64,
    /// `J(d)` (utility).
    pub j: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    /// `J'(d)` (utility per energy).
    pub j1: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    /// `J''(d)` (utility per energy²).
    pub j2: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    /// `J'''(d)` (utility per energy³).
    pub j3: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for CustomLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomLoss").field("d_bar", &self.d_bar).finish()
    }
}

/// Per-period loss-function family for one consumer.
#[derive(Clone, Debug)]
pub enum LossSpec {
    /// `J(d) = k (d_bar - d)²`, yielding linear demand with constant
    /// flexibility `A / 2k`.
    Quadratic {
        /// Loss curvature coefficient (utility per energy², > 0).
        k: f64,
        /// Satiation / maximum consumption (energy, > 0).
        d_bar: f64,
    },
    /// Demand-first family: isoelastic demand `d_ref (π / pi_ref)^epsilon`
    /// on `[pi_low, pi_high]`, continued by tangent lines outside that window
    /// so the demand curve stays continuous and once-differentiable. The
    /// implied loss is the integral of the inverse demand curve.
    IsoelasticDemand {
        /// Demand at the reference price (energy, > 0).
        d_ref: f64,
        /// Reference price (currency per energy, > 0).
        pi_ref: f64,
        /// Constant price elasticity (dimensionless, < 0).
        epsilon: f64,
        /// Lower boundary of the isoelastic window (0 < pi_low < pi_ref).
        pi_low: f64,
        /// Upper boundary of the isoelastic window (pi_high > pi_ref).
        pi_high: f64,
    },
    /// User-supplied evaluators for `J` and its first three derivatives.
    Custom(CustomLoss),
}

impl LossSpec {
    /// Structural parameter validation. Finite, positive where required,
    /// elasticity negative, tail boundaries ordered around the reference.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(CoreError::InvalidScenario(msg));
        match self {
            LossSpec::Quadratic { k, d_bar } => {
                if !(k.is_finite() && *k > 0.0) {
                    return fail(format!("quadratic loss requires k > 0, got {k}"));
                }
                if !(d_bar.is_finite() && *d_bar > 0.0) {
                    return fail(format!("quadratic loss requires d_bar > 0, got {d_bar}"));
                }
            }
            LossSpec::IsoelasticDemand { d_ref, pi_ref, epsilon, pi_low, pi_high } => {
                if !(d_ref.is_finite() && *d_ref > 0.0) {
                    return fail(format!("isoelastic demand requires d_ref > 0, got {d_ref}"));
                }
                if !(pi_ref.is_finite() && *pi_ref > 0.0) {
                    return fail(format!("isoelastic demand requires pi_ref > 0, got {pi_ref}"));
                }
                if !(epsilon.is_finite() && *epsilon < 0.0) {
                    return fail(format!("isoelastic demand requires epsilon < 0, got {epsilon}"));
                }
                if !(pi_low.is_finite() && pi_high.is_finite())
                    || !(0.0 < *pi_low && pi_low < pi_ref && pi_ref < pi_high)
                {
                    return fail(format!(
                        "isoelastic tails must satisfy 0 < pi_low < pi_ref < pi_high, \
                         got pi_low={pi_low}, pi_ref={pi_ref}, pi_high={pi_high}"
                    ));
                }
            }
            LossSpec::Custom(c) => {
                if !(c.d_bar.is_finite() && c.d_bar > 0.0) {
                    return fail(format!("custom loss requires d_bar > 0, got {}", c.d_bar));
                }
            }
        }
        Ok(())
    }

    /// Satiation level of this family.
    pub fn d_bar(&self) -> f64 {
        match self {
            LossSpec::Quadratic { d_bar, .. } => *d_bar,
            LossSpec::Custom(c) => c.d_bar,
            LossSpec::IsoelasticDemand { .. } => {
                let p = IsoParams::from_spec(self);
                p.d_bar
            }
        }
    }
}

/// Derived constants of the piecewise-isoelastic demand curve.
#[derive(Clone, Copy, Debug)]
struct IsoParams {
    d_ref: f64,
    pi_ref: f64,
    epsilon: f64,
    pi_low: f64,
    pi_high: f64,
    /// Demand at `pi_low` (upper end of the isoelastic demand range).
    d_low: f64,
    /// Demand at `pi_high` (lower end of the isoelastic demand range).
    d_high: f64,
    /// Tangent slope at `pi_low` (< 0).
    m_low: f64,
    /// Tangent slope at `pi_high` (< 0).
    m_high: f64,
    /// Demand at zero price.
    d_bar: f64,
    /// Price at which the upper tail reaches zero demand.
    choke: f64,
}

impl IsoParams {
    fn from_spec(spec: &LossSpec) -> Self {
        let LossSpec::IsoelasticDemand { d_ref, pi_ref, epsilon, pi_low, pi_high } = *spec else {
            unreachable!("IsoParams built from a non-isoelastic spec")
        };
        let d_low = d_ref * (pi_low / pi_ref).powf(epsilon);
        let d_high = d_ref * (pi_high / pi_ref).powf(epsilon);
        let m_low = epsilon * d_ref / pi_ref * (pi_low / pi_ref).powf(epsilon - 1.0);
        let m_high = epsilon * d_ref / pi_ref * (pi_high / pi_ref).powf(epsilon - 1.0);
        let d_bar = d_low - m_low * pi_low;
        let choke = pi_high - d_high / m_high;
        IsoParams { d_ref, pi_ref, epsilon, pi_low, pi_high, d_low, d_high, m_low, m_high, d_bar, choke }
    }

    /// Unclamped demand at `price`.
    fn demand(&self, price: f64) -> f64 {
        if price < self.pi_low {
            self.d_low + self.m_low * (price - self.pi_low)
        } else if price <= self.pi_high {
            self.d_ref * (price / self.pi_ref).powf(self.epsilon)
        } else {
            self.d_high + self.m_high * (price - self.pi_high)
        }
    }

    /// Slope of the unclamped demand curve at `price`.
    fn slope(&self, price: f64) -> f64 {
        if price < self.pi_low {
            self.m_low
        } else if price <= self.pi_high {
            self.epsilon * self.d_ref / self.pi_ref * (price / self.pi_ref).powf(self.epsilon - 1.0)
        } else {
            self.m_high
        }
    }

    /// Second derivative of the unclamped demand curve at `price`.
    fn curvature(&self, price: f64) -> f64 {
        if (self.pi_low..=self.pi_high).contains(&price) {
            self.epsilon * (self.epsilon - 1.0) * self.d_ref / (self.pi_ref * self.pi_ref)
                * (price / self.pi_ref).powf(self.epsilon - 2.0)
        } else {
            0.0
        }
    }

    /// Inverse demand: the price at which unclamped demand equals `d`.
    fn inverse(&self, d: f64) -> f64 {
        if d >= self.d_low {
            (self.pi_low + (d - self.d_low) / self.m_low).max(0.0)
        } else if d >= self.d_high {
            self.pi_ref * (d / self.d_ref).powf(1.0 / self.epsilon)
        } else {
            self.pi_high + (d - self.d_high) / self.m_high
        }
    }
}

// ---------------------------------------------------------------------------
// Demand points and regimes
// ---------------------------------------------------------------------------

/// Where an optimal demand sits relative to its box constraints.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    /// Strictly between 0 and `d_bar`; the first-order condition binds.
    Interior,
    /// Clamped at zero consumption.
    ClampedZero,
    /// Clamped at the satiation level `d_bar`.
    ClampedMax,
}

/// One point on a consumer's demand curve.
#[derive(Clone, Copy, Debug)]
pub struct DemandPoint {
    /// Price (currency per energy, >= 0).
    pub price: f64,
    /// Optimal quantity (energy, in `[0, d_bar]`).
    pub quantity: f64,
    /// Boundary status.
    pub regime: Regime,
}

impl DemandPoint {
    /// True when the point is not clamped.
    pub fn is_interior(&self) -> bool {
        self.regime == Regime::Interior
    }
}

/// Normalized loss `Ĵ = J / A` and its first three derivatives at a point.
#[derive(Clone, Copy, Debug)]
pub struct NormalizedLoss {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

// ---------------------------------------------------------------------------
// Consumer
// ---------------------------------------------------------------------------

/// A consumer: price sensitivity `A` plus one loss spec per period.
#[derive(Clone, Debug)]
pub struct Consumer {
    /// Label used in reports.
    pub id: String,
    /// Price sensitivity / marginal disutility of expenditure (> 0).
    pub a: f64,
    losses: BTreeMap<String, LossSpec>,
}

impl Consumer {
    /// Build a consumer, validating `A > 0` and every loss spec.
    pub fn new(
        id: impl Into<String>,
        a: f64,
        losses: BTreeMap<String, LossSpec>,
    ) -> Result<Self> {
        let id = id.into();
        if !(a.is_finite() && a > 0.0) {
            return Err(CoreError::InvalidScenario(format!(
                "consumer {id}: price sensitivity A must be positive and finite, got {a}"
            )));
        }
        for (period, spec) in &losses {
            spec.validate().map_err(|e| {
                CoreError::InvalidScenario(format!("consumer {id}, period {period}: {e}"))
            })?;
        }
        Ok(Consumer { id, a, losses })
    }

    /// Periods this consumer has loss specs for.
    pub fn periods(&self) -> impl Iterator<Item = &str> {
        self.losses.keys().map(|s| s.as_str())
    }

    /// The loss spec for `period`.
    pub fn loss_spec(&self, period: &str) -> Result<&LossSpec> {
        self.losses.get(period).ok_or_else(|| CoreError::MissingPeriod {
            consumer: self.id.clone(),
            period: period.to_string(),
        })
    }

    /// Normalized per-period view combining the loss spec with this
    /// consumer's sensitivity.
    pub fn view(&self, period: &str) -> Result<LossView<'_>> {
        Ok(LossView { a: self.a, spec: self.loss_spec(period)? })
    }

    /// `Ĵ(d)` and its first three derivatives.
    ///
    /// For the isoelastic family the loss is the implied one: the integral of
    /// inverse demand, evaluated by quadrature; its derivatives come from the
    /// demand curve directly.
    pub fn normalized_loss(&self, period: &str, d: f64) -> Result<NormalizedLoss> {
        let view = self.view(period)?;
        let d_bar = view.d_bar();
        if !d.is_finite() || d < 0.0 || d > d_bar {
            return Err(CoreError::Domain(format!(
                "demand {d} outside [0, {d_bar}] for consumer {} period {period}",
                self.id
            )));
        }
        Ok(NormalizedLoss {
            value: view.jhat(d),
            d1: view.jhat1(d),
            d2: view.jhat2(d),
            d3: view.jhat3(d),
        })
    }

    /// Optimal demand at `price`: `clamp((Ĵ')⁻¹(-price), 0, d_bar)`.
    pub fn optimal_demand(&self, period: &str, price: f64) -> Result<DemandPoint> {
        check_price(price)?;
        Ok(self.view(period)?.demand(price))
    }

    /// Quantity response `|∂d*/∂π| = 1/Ĵ''(d*)` at interior points, 0 when
    /// clamped.
    pub fn flexibility(&self, period: &str, price: f64) -> Result<f64> {
        check_price(price)?;
        Ok(self.view(period)?.flexibility(price))
    }

    /// Second derivative of optimal demand in price,
    /// `-Ĵ'''(d*) / Ĵ''(d*)³`; zero at clamped points.
    pub fn demand_convexity(&self, period: &str, price: f64) -> Result<f64> {
        check_price(price)?;
        Ok(self.view(period)?.convexity(price))
    }

    /// `∂U/∂π = -A d*(π)` at interior points, 0 when clamped.
    pub fn marginal_utility_wrt_price(&self, period: &str, price: f64) -> Result<f64> {
        check_price(price)?;
        let point = self.view(period)?.demand(price);
        Ok(match point.regime {
            Regime::Interior => -self.a * point.quantity,
            _ => 0.0,
        })
    }

    /// Rate at which realized loss rises with price,
    /// `A²π / J''(d*) = Aπ / Ĵ''(d*)` at interior points, 0 when clamped.
    pub fn loss_sensitivity_to_price(&self, period: &str, price: f64) -> Result<f64> {
        check_price(price)?;
        let view = self.view(period)?;
        let point = view.demand(price);
        Ok(match point.regime {
            Regime::Interior => self.a * price / view.jhat2(point.quantity),
            _ => 0.0,
        })
    }

    /// Realized per-period utility at `price`, normalized so zero consumption
    /// yields zero: `J(0) - J(d*) - A π d*`.
    pub fn realized_utility(&self, period: &str, price: f64) -> Result<f64> {
        check_price(price)?;
        let view = self.view(period)?;
        let point = view.demand(price);
        Ok(self.a * (view.jhat(0.0) - view.jhat(point.quantity) - price * point.quantity))
    }

    /// Choke price `-Ĵ'(0)` above which demand is zero.
    pub fn choke_price(&self, period: &str) -> Result<f64> {
        Ok(-self.view(period)?.jhat1(0.0))
    }

    /// Satiation level for `period`.
    pub fn d_bar(&self, period: &str) -> Result<f64> {
        Ok(self.view(period)?.d_bar())
    }

    /// Grid-check the consumer-model assumptions: per-period regularity
    /// (`J >= 0`, `J' < 0`, `J'' > 0`, `J''' <= 0`) on each period's own
    /// domain, and for every adjacent pair of `periods` (more critical
    /// first) the loss, marginal-loss, and curvature orderings on the shared
    /// range `[0, min d_bar]`.
    ///
    /// Violations are reported, not thrown. Strictness of `J''' < 0` is
    /// recorded separately: the quadratic family sits exactly at zero.
    pub fn validate_assumptions(&self, periods: &[&str], grid_size: usize) -> Result<AssumptionReport> {
        if grid_size < 16 {
            return Err(CoreError::Domain(format!(
                "validation grid size must be >= 16, got {grid_size}"
            )));
        }
        let mut checks = Vec::new();
        let mut strict_third = true;

        for period in periods {
            let view = self.view(period)?;
            let d_bar = view.d_bar();
            let grid = uniform_grid(d_bar, grid_size);
            let values = view.jhat_on_grid(&grid);

            let mut value_check = GridCheck::new("loss_nonnegative", period);
            let mut slope_check = GridCheck::new("marginal_loss_negative", period);
            let mut curv_check = GridCheck::new("curvature_positive", period);
            let mut third_check = GridCheck::new("third_derivative_nonpositive", period);
            for (&d, &value) in grid.iter().zip(&values) {
                value_check.require(d, value, value >= -GRID_SLACK);
                slope_check.require(d, view.jhat1(d), view.jhat1(d) < GRID_SLACK);
                curv_check.require(d, view.jhat2(d), view.jhat2(d) > -GRID_SLACK);
                let j3 = view.jhat3(d);
                third_check.require(d, j3, j3 <= GRID_SLACK);
                if j3 > -GRID_SLACK {
                    strict_third = false;
                }
            }
            checks.extend([value_check.finish(), slope_check.finish(), curv_check.finish(), third_check.finish()]);
        }

        for pair in periods.windows(2) {
            let (hi, lo) = (pair[0], pair[1]);
            let hi_view = self.view(hi)?;
            let lo_view = self.view(lo)?;
            let shared = hi_view.d_bar().min(lo_view.d_bar());
            let grid = uniform_grid(shared, grid_size);
            let hi_values = hi_view.jhat_on_grid(&grid);
            let lo_values = lo_view.jhat_on_grid(&grid);
            let scope = format!("{hi}>{lo}");

            let mut loss_order = GridCheck::new("loss_ordering", &scope);
            let mut marg_order = GridCheck::new("marginal_loss_ordering", &scope);
            let mut curv_order = GridCheck::new("curvature_ordering", &scope);
            for (i, &d) in grid.iter().enumerate() {
                let dv = hi_values[i] - lo_values[i];
                loss_order.require(d, dv, dv >= -GRID_SLACK);
                let dm = hi_view.jhat1(d).abs() - lo_view.jhat1(d).abs();
                marg_order.require(d, dm, dm >= -GRID_SLACK);
                let dc = hi_view.jhat2(d) - lo_view.jhat2(d);
                curv_order.require(d, dc, dc >= -GRID_SLACK);
            }
            checks.extend([loss_order.finish(), marg_order.finish(), curv_order.finish()]);
        }

        Ok(AssumptionReport { consumer: self.id.clone(), checks, strict_third_derivative: strict_third })
    }
}

fn check_price(price: f64) -> Result<()> {
    if !price.is_finite() || price < 0.0 {
        return Err(CoreError::Domain(format!("price must be finite and >= 0, got {price}")));
    }
    Ok(())
}

fn uniform_grid(upper: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| upper * i as f64 / (n - 1) as f64).collect()
}

// ---------------------------------------------------------------------------
// Normalized per-period view
// ---------------------------------------------------------------------------

/// A loss spec paired with its consumer's sensitivity; evaluates everything
/// in normalized (`Ĵ`) terms.
#[derive(Clone, Copy)]
pub struct LossView<'a> {
    a: f64,
    spec: &'a LossSpec,
}

impl<'a> LossView<'a> {
    pub fn spec(&self) -> &'a LossSpec {
        self.spec
    }

    pub fn d_bar(&self) -> f64 {
        match self.spec {
            LossSpec::Quadratic { d_bar, .. } => *d_bar,
            LossSpec::Custom(c) => c.d_bar,
            spec @ LossSpec::IsoelasticDemand { .. } => IsoParams::from_spec(spec).d_bar,
        }
    }

    /// `Ĵ(d)`. Isoelastic losses integrate the inverse demand curve
    /// numerically; they are only ever consumed through demand and its
    /// derivatives on the solver paths.
    pub fn jhat(&self, d: f64) -> f64 {
        match self.spec {
            LossSpec::Quadratic { k, d_bar } => k * (d_bar - d) * (d_bar - d) / self.a,
            LossSpec::Custom(c) => (c.j)(d) / self.a,
            spec @ LossSpec::IsoelasticDemand { .. } => {
                let p = IsoParams::from_spec(spec);
                if d >= p.d_bar {
                    return 0.0;
                }
                numeric::adaptive_simpson(|u| p.inverse(u), d, p.d_bar, 1e-10)
            }
        }
    }

    /// `Ĵ` evaluated along an ascending grid. For the isoelastic family the
    /// values accumulate cell-by-cell integrals of the inverse demand curve
    /// from the top of the grid down, which costs one short quadrature per
    /// cell instead of a full-range quadrature per point.
    pub fn jhat_on_grid(&self, grid: &[f64]) -> Vec<f64> {
        match self.spec {
            LossSpec::IsoelasticDemand { .. } => {
                let n = grid.len();
                let mut values = vec![0.0; n];
                if n == 0 {
                    return values;
                }
                values[n - 1] = self.jhat(grid[n - 1]);
                for i in (0..n - 1).rev() {
                    let cell = numeric::adaptive_simpson(
                        |u| -self.jhat1(u),
                        grid[i],
                        grid[i + 1],
                        1e-10,
                    );
                    values[i] = values[i + 1] + cell;
                }
                values
            }
            _ => grid.iter().map(|&d| self.jhat(d)).collect(),
        }
    }

    /// `Ĵ'(d)` (negative of the inverse demand curve).
    pub fn jhat1(&self, d: f64) -> f64 {
        match self.spec {
            LossSpec::Quadratic { k, d_bar } => -2.0 * k * (d_bar - d) / self.a,
            LossSpec::Custom(c) => (c.j1)(d) / self.a,
            spec @ LossSpec::IsoelasticDemand { .. } => -IsoParams::from_spec(spec).inverse(d),
        }
    }

    /// `Ĵ''(d)`.
    pub fn jhat2(&self, d: f64) -> f64 {
        match self.spec {
            LossSpec::Quadratic { k, .. } => 2.0 * k / self.a,
            LossSpec::Custom(c) => (c.j2)(d) / self.a,
            spec @ LossSpec::IsoelasticDemand { .. } => {
                let p = IsoParams::from_spec(spec);
                -1.0 / p.slope(p.inverse(d))
            }
        }
    }

    /// `Ĵ'''(d)`.
    pub fn jhat3(&self, d: f64) -> f64 {
        match self.spec {
            LossSpec::Quadratic { .. } => 0.0,
            LossSpec::Custom(c) => (c.j3)(d) / self.a,
            spec @ LossSpec::IsoelasticDemand { .. } => {
                let p = IsoParams::from_spec(spec);
                let price = p.inverse(d);
                let slope = p.slope(price);
                -p.curvature(price) / (-slope).powi(3)
            }
        }
    }

    /// Optimal demand with boundary classification.
    pub fn demand(&self, price: f64) -> DemandPoint {
        let d_bar = self.d_bar();
        let point = |quantity: f64, regime| DemandPoint { price, quantity, regime };
        match self.spec {
            LossSpec::Quadratic { k, d_bar: db } => {
                let unclamped = db - self.a * price / (2.0 * k);
                if unclamped >= *db {
                    point(*db, Regime::ClampedMax)
                } else if unclamped <= 0.0 {
                    point(0.0, Regime::ClampedZero)
                } else {
                    point(unclamped, Regime::Interior)
                }
            }
            spec @ LossSpec::IsoelasticDemand { .. } => {
                let p = IsoParams::from_spec(spec);
                let unclamped = p.demand(price);
                if unclamped >= p.d_bar {
                    point(p.d_bar, Regime::ClampedMax)
                } else if unclamped <= 0.0 {
                    point(0.0, Regime::ClampedZero)
                } else {
                    point(unclamped, Regime::Interior)
                }
            }
            LossSpec::Custom(_) => {
                // Ĵ' is strictly increasing, so g(d) = Ĵ'(d) + price brackets
                // its root between the endpoints whenever one exists.
                let g = |d: f64| self.jhat1(d) + price;
                if g(0.0) >= 0.0 {
                    return point(0.0, Regime::ClampedZero);
                }
                if g(d_bar) <= 0.0 {
                    return point(d_bar, Regime::ClampedMax);
                }
                let d = numeric::bisect(g, 0.0, d_bar, CUSTOM_INVERT_TOL)
                    .expect("monotone Ĵ' bracketed on [0, d_bar]");
                point(d, Regime::Interior)
            }
        }
    }

    /// `1 / Ĵ''(d*)` at interior points; 0 when clamped.
    pub fn flexibility(&self, price: f64) -> f64 {
        let point = self.demand(price);
        match point.regime {
            Regime::Interior => 1.0 / self.jhat2(point.quantity),
            _ => 0.0,
        }
    }

    /// `∂²d*/∂π² = -Ĵ'''(d*) / Ĵ''(d*)³` at interior points; 0 when clamped.
    pub fn convexity(&self, price: f64) -> f64 {
        let point = self.demand(price);
        match point.regime {
            Regime::Interior => {
                let j2 = self.jhat2(point.quantity);
                -self.jhat3(point.quantity) / (j2 * j2 * j2)
            }
            _ => 0.0,
        }
    }

    /// Price above which demand is zero.
    pub fn choke_price(&self) -> f64 {
        match self.spec {
            spec @ LossSpec::IsoelasticDemand { .. } => IsoParams::from_spec(spec).choke,
            _ => -self.jhat1(0.0),
        }
    }
}

// ---------------------------------------------------------------------------
// Assumption validation report
// ---------------------------------------------------------------------------

/// First grid point violating a check, with the offending value.
#[derive(Clone, Copy, Debug)]
pub struct Violation {
    pub d: f64,
    pub value: f64,
}

/// One named check over a validation grid.
#[derive(Clone, Debug)]
pub struct AssumptionCheck {
    pub name: &'static str,
    /// Period label, or `"PE>OP"`-style pair label for ordering checks.
    pub scope: String,
    pub pass: bool,
    pub first_violation: Option<Violation>,
}

struct GridCheck {
    check: AssumptionCheck,
}

impl GridCheck {
    fn new(name: &'static str, scope: &str) -> Self {
        GridCheck {
            check: AssumptionCheck { name, scope: scope.to_string(), pass: true, first_violation: None },
        }
    }

    fn require(&mut self, d: f64, value: f64, ok: bool) {
        if !ok && self.check.pass {
            self.check.pass = false;
            self.check.first_violation = Some(Violation { d, value });
        }
    }

    fn finish(self) -> AssumptionCheck {
        self.check
    }
}

/// Grid validation outcome for one consumer.
#[derive(Clone, Debug)]
pub struct AssumptionReport {
    pub consumer: String,
    pub checks: Vec<AssumptionCheck>,
    /// True when `J''' < 0` held strictly everywhere. The quadratic family
    /// has `J''' = 0` and still passes the non-strict check.
    pub strict_third_derivative: bool,
}

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &AssumptionCheck> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic_consumer(a: f64, k: f64, d_bar: f64) -> Consumer {
        let mut losses = BTreeMap::new();
        losses.insert("PE".to_string(), LossSpec::Quadratic { k, d_bar });
        Consumer::new("c", a, losses).unwrap()
    }

    fn iso_consumer(d_ref: f64, pi_ref: f64, epsilon: f64) -> Consumer {
        let mut losses = BTreeMap::new();
        losses.insert(
            "PE".to_string(),
            LossSpec::IsoelasticDemand {
                d_ref,
                pi_ref,
                epsilon,
                pi_low: 0.01 * pi_ref,
                pi_high: 100.0 * pi_ref,
            },
        );
        Consumer::new("c", 1.0, losses).unwrap()
    }

    #[test]
    fn normalized_loss_quadratic_hand_values() {
        let c = quadratic_consumer(1.0, 0.5, 10.0);
        let l = c.normalized_loss("PE", 6.0).unwrap();
        assert!((l.value - 8.0).abs() < 1e-12);
        assert!((l.d1 - (-4.0)).abs() < 1e-12);
        assert!((l.d2 - 1.0).abs() < 1e-12);
        assert_eq!(l.d3, 0.0);
    }

    #[test]
    fn normalized_loss_at_satiation_is_zero() {
        let c = quadratic_consumer(2.0, 3.0, 7.0);
        let l = c.normalized_loss("PE", 7.0).unwrap();
        assert_eq!(l.value, 0.0);
        assert_eq!(l.d1, 0.0);
    }

    #[test]
    fn normalized_loss_scales_inversely_with_a() {
        let c1 = quadratic_consumer(1.0, 0.5, 10.0);
        let c2 = quadratic_consumer(2.0, 0.5, 10.0);
        let l1 = c1.normalized_loss("PE", 6.0).unwrap();
        let l2 = c2.normalized_loss("PE", 6.0).unwrap();
        assert!((l2.value - l1.value / 2.0).abs() < 1e-12);
        assert!((l2.d1 - l1.d1 / 2.0).abs() < 1e-12);
        assert!((l2.d2 - l1.d2 / 2.0).abs() < 1e-12);
    }

    #[test]
    fn normalized_loss_rejects_out_of_range() {
        let c = quadratic_consumer(1.0, 0.5, 10.0);
        assert!(matches!(c.normalized_loss("PE", 10.5), Err(CoreError::Domain(_))));
        assert!(matches!(c.normalized_loss("PE", -0.1), Err(CoreError::Domain(_))));
    }

    #[test]
    fn optimal_demand_quadratic_closed_form() {
        let c = quadratic_consumer(1.0, 0.5, 10.0);
        let p = c.optimal_demand("PE", 4.0).unwrap();
        assert!((p.quantity - 6.0).abs() < 1e-12);
        assert_eq!(p.regime, Regime::Interior);

        let p = c.optimal_demand("PE", 12.0).unwrap();
        assert_eq!(p.quantity, 0.0);
        assert_eq!(p.regime, Regime::ClampedZero);

        let p = c.optimal_demand("PE", 0.0).unwrap();
        assert_eq!(p.quantity, 10.0);
        assert_eq!(p.regime, Regime::ClampedMax);
    }

    #[test]
    fn flexibility_quadratic_and_boundaries() {
        let c = quadratic_consumer(1.0, 2.0, 5.0);
        assert!((c.flexibility("PE", 3.0).unwrap() - 0.25).abs() < 1e-12);
        assert_eq!(c.flexibility("PE", 0.0).unwrap(), 0.0);
        assert_eq!(c.flexibility("PE", 1e6).unwrap(), 0.0);
    }

    #[test]
    fn flexibility_isoelastic_at_reference() {
        let c = iso_consumer(8.0, 2.0, -0.5);
        assert!((c.flexibility("PE", 2.0).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn demand_convexity_values() {
        let c = quadratic_consumer(1.0, 0.5, 10.0);
        assert_eq!(c.demand_convexity("PE", 4.0).unwrap(), 0.0);

        let iso = iso_consumer(8.0, 2.0, -0.5);
        let got = iso.demand_convexity("PE", 2.0).unwrap();
        assert!((got - 1.5).abs() < 1e-12, "got {got}");
    }

    #[test]
    fn marginal_utility_values() {
        let c = quadratic_consumer(1.0, 0.5, 10.0);
        assert!((c.marginal_utility_wrt_price("PE", 4.0).unwrap() + 6.0).abs() < 1e-12);

        let c2 = quadratic_consumer(2.0, 1.0, 10.0);
        // d* = 10 - 2*4/2 = 6 at A=2, k=1
        assert!((c2.marginal_utility_wrt_price("PE", 4.0).unwrap() + 12.0).abs() < 1e-12);
        assert_eq!(c.marginal_utility_wrt_price("PE", 100.0).unwrap(), 0.0);
    }

    #[test]
    fn loss_sensitivity_values() {
        let c = quadratic_consumer(1.0, 0.5, 10.0);
        assert!((c.loss_sensitivity_to_price("PE", 4.0).unwrap() - 4.0).abs() < 1e-12);
        assert_eq!(c.loss_sensitivity_to_price("PE", 0.0).unwrap(), 0.0);
        assert_eq!(c.loss_sensitivity_to_price("PE", 50.0).unwrap(), 0.0);
    }

    #[test]
    fn custom_loss_matches_quadratic() {
        let (k, d_bar) = (0.5, 10.0);
        let custom = LossSpec::Custom(CustomLoss {
            d_bar,
            j: Arc::new(move |d| k * (d_bar - d) * (d_bar - d)),
            j1: Arc::new(move |d| -2.0 * k * (d_bar - d)),
            j2: Arc::new(move |_| 2.0 * k),
            j3: Arc::new(|_| 0.0),
        });
        let mut losses = BTreeMap::new();
        losses.insert("PE".to_string(), custom);
        let c = Consumer::new("custom", 1.0, losses).unwrap();

        let p = c.optimal_demand("PE", 4.0).unwrap();
        assert!((p.quantity - 6.0).abs() < 1e-10);
        assert_eq!(p.regime, Regime::Interior);
        assert_eq!(c.optimal_demand("PE", 0.0).unwrap().regime, Regime::ClampedMax);
        assert_eq!(c.optimal_demand("PE", 11.0).unwrap().regime, Regime::ClampedZero);
    }

    #[test]
    fn isoelastic_demand_continuous_and_differentiable_at_tails() {
        let spec = LossSpec::IsoelasticDemand {
            d_ref: 8.0,
            pi_ref: 2.0,
            epsilon: -0.7,
            pi_low: 0.5,
            pi_high: 6.0,
        };
        let p = IsoParams::from_spec(&spec);
        for b in [p.pi_low, p.pi_high] {
            let below = p.demand(b - 1e-9);
            let above = p.demand(b + 1e-9);
            assert!((below - above).abs() < 1e-7, "jump at {b}");
            let s_below = p.slope(b - 1e-9);
            let s_above = p.slope(b + 1e-9);
            assert!((s_below - s_above).abs() < 1e-6, "slope jump at {b}");
        }
        // demand decreasing up to the choke price
        assert!(p.demand(p.choke).abs() < 1e-9);
    }

    #[test]
    fn isoelastic_inverse_roundtrip() {
        let spec = LossSpec::IsoelasticDemand {
            d_ref: 8.0,
            pi_ref: 2.0,
            epsilon: -0.7,
            pi_low: 0.5,
            pi_high: 6.0,
        };
        let p = IsoParams::from_spec(&spec);
        for i in 1..60 {
            let price = p.choke * i as f64 / 60.0;
            let d = p.demand(price);
            assert!((p.inverse(d) - price).abs() < 1e-9, "roundtrip at {price}");
        }
    }

    #[test]
    fn isoelastic_implied_loss_is_positive_and_decreasing() {
        let c = iso_consumer(8.0, 2.0, -0.5);
        let view = c.view("PE").unwrap();
        let d_bar = view.d_bar();
        let l0 = view.jhat(0.1 * d_bar);
        let l1 = view.jhat(0.5 * d_bar);
        let l2 = view.jhat(0.9 * d_bar);
        assert!(l0 > l1 && l1 > l2 && l2 > 0.0);
        assert!(view.jhat(d_bar).abs() < 1e-12);
    }

    #[test]
    fn validate_assumptions_passes_ordered_quadratics() {
        let mut losses = BTreeMap::new();
        losses.insert("PE".to_string(), LossSpec::Quadratic { k: 1.0, d_bar: 10.0 });
        losses.insert("OP".to_string(), LossSpec::Quadratic { k: 0.5, d_bar: 6.0 });
        let c = Consumer::new("c", 1.0, losses).unwrap();
        let report = c.validate_assumptions(&["PE", "OP"], 256).unwrap();
        assert!(report.all_pass(), "failures: {:?}", report.failures().collect::<Vec<_>>());
        assert!(!report.strict_third_derivative);
    }

    #[test]
    fn validate_assumptions_identical_periods_pass_with_equality() {
        let mut losses = BTreeMap::new();
        losses.insert("PE".to_string(), LossSpec::Quadratic { k: 1.0, d_bar: 8.0 });
        losses.insert("OP".to_string(), LossSpec::Quadratic { k: 1.0, d_bar: 8.0 });
        let c = Consumer::new("c", 1.0, losses).unwrap();
        assert!(c.validate_assumptions(&["PE", "OP"], 64).unwrap().all_pass());
    }

    #[test]
    fn validate_assumptions_flags_curvature_violation() {
        let mut losses = BTreeMap::new();
        losses.insert("PE".to_string(), LossSpec::Quadratic { k: 0.1, d_bar: 10.0 });
        losses.insert("OP".to_string(), LossSpec::Quadratic { k: 1.0, d_bar: 6.0 });
        let c = Consumer::new("c", 1.0, losses).unwrap();
        let report = c.validate_assumptions(&["PE", "OP"], 256).unwrap();
        assert!(!report.all_pass());
        let failed: Vec<_> = report.failures().map(|c| c.name).collect();
        assert!(failed.contains(&"curvature_ordering"), "failed: {failed:?}");
    }

    #[test]
    fn validate_assumptions_rejects_tiny_grid() {
        let c = quadratic_consumer(1.0, 1.0, 5.0);
        assert!(c.validate_assumptions(&["PE"], 8).is_err());
    }

    #[test]
    fn rejects_nonpositive_sensitivity_and_bad_params() {
        let mut losses = BTreeMap::new();
        losses.insert("PE".to_string(), LossSpec::Quadratic { k: 1.0, d_bar: 5.0 });
        assert!(Consumer::new("c", 0.0, losses.clone()).is_err());
        assert!(Consumer::new("c", f64::NAN, losses).is_err());

        assert!(LossSpec::Quadratic { k: -1.0, d_bar: 5.0 }.validate().is_err());
        assert!(LossSpec::IsoelasticDemand {
            d_ref: 8.0,
            pi_ref: 2.0,
            epsilon: 0.5,
            pi_low: 0.1,
            pi_high: 10.0
        }
        .validate()
        .is_err());
    }

    #[test]
    fn negative_price_rejected() {
        let c = quadratic_consumer(1.0, 1.0, 5.0);
        assert!(c.optimal_demand("PE", -1.0).is_err());
        assert!(c.optimal_demand("PE", f64::NAN).is_err());
    }
}
