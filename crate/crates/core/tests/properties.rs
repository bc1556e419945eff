//! Property tests for the demand model and aggregation identities.

use std::collections::BTreeMap;
use std::sync::Arc;

use proptest::prelude::*;

use tariff_core::aggregate::AggregateView;
use tariff_core::loss::{CustomLoss, LossSpec};
use tariff_core::oracle;
use tariff_core::Consumer;

fn quadratic_consumer(a: f64, k: f64, d_bar: f64) -> Consumer {
    let mut losses = BTreeMap::new();
    losses.insert("PE".to_string(), LossSpec::Quadratic { k, d_bar });
    Consumer::new("q", a, losses).unwrap()
}

fn iso_consumer(a: f64, d_ref: f64, pi_ref: f64, epsilon: f64) -> Consumer {
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
    Consumer::new("e", a, losses).unwrap()
}

fn params() -> impl Strategy<Value = (f64, f64, f64)> {
    (0.2f64..3.0, 0.3f64..3.0, 1.0f64..9.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    /// Optimal demand never leaves [0, d_bar] and is non-increasing in price.
    #[test]
    fn demand_monotone_and_clamped((a, k, d_bar) in params(), p1 in 0.0f64..40.0, p2 in 0.0f64..40.0) {
        let c = quadratic_consumer(a, k, d_bar);
        let (lo, hi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
        let d_lo = c.optimal_demand("PE", lo).unwrap().quantity;
        let d_hi = c.optimal_demand("PE", hi).unwrap().quantity;
        prop_assert!(d_lo >= d_hi - 1e-12);
        for d in [d_lo, d_hi] {
            prop_assert!((0.0..=d_bar).contains(&d));
        }
    }

    /// Central finite difference of demand equals -flexibility at interior
    /// points, for both closed-form families.
    #[test]
    fn flexibility_matches_finite_difference((a, k, d_bar) in params(), frac in 0.15f64..0.85) {
        let c = quadratic_consumer(a, k, d_bar);
        let choke = c.choke_price("PE").unwrap();
        let price = frac * choke;
        let h = (choke * 1e-4).min(price / 2.0).max(1e-8);
        let fd = (c.optimal_demand("PE", price + h).unwrap().quantity
            - c.optimal_demand("PE", price - h).unwrap().quantity)
            / (2.0 * h);
        let flex = c.flexibility("PE", price).unwrap();
        prop_assert!((fd + flex).abs() <= 1e-6 * flex.max(1e-6));
    }

    #[test]
    fn iso_flexibility_matches_finite_difference(
        a in 0.5f64..2.0,
        d_ref in 1.0f64..8.0,
        pi_ref in 0.5f64..4.0,
        epsilon in -1.8f64..-0.2,
        frac in 0.2f64..3.0,
    ) {
        let c = iso_consumer(a, d_ref, pi_ref, epsilon);
        let price = frac * pi_ref;
        let h = price * 1e-5;
        let fd = (c.optimal_demand("PE", price + h).unwrap().quantity
            - c.optimal_demand("PE", price - h).unwrap().quantity)
            / (2.0 * h);
        let flex = c.flexibility("PE", price).unwrap();
        prop_assert!((fd + flex).abs() <= 1e-5 * flex.max(1e-9), "fd {fd} flex {flex}");
    }

    /// Scaling J and A by the same factor leaves the demand curve unchanged.
    #[test]
    fn demand_curve_invariant_to_joint_scaling((a, k, d_bar) in params(), scale in 0.2f64..5.0, price in 0.0f64..30.0) {
        let base = quadratic_consumer(a, k, d_bar);
        let scaled = quadratic_consumer(a * scale, k * scale, d_bar);
        let d0 = base.optimal_demand("PE", price).unwrap().quantity;
        let d1 = scaled.optimal_demand("PE", price).unwrap().quantity;
        prop_assert!((d0 - d1).abs() < 1e-10);
    }

    /// Convex-demand families have a non-negative finite-difference second
    /// derivative of demand in price.
    #[test]
    fn demand_convex_when_third_derivative_negative(
        d_ref in 1.0f64..8.0,
        pi_ref in 0.5f64..4.0,
        epsilon in -1.8f64..-0.2,
        frac in 0.3f64..2.5,
    ) {
        let c = iso_consumer(1.0, d_ref, pi_ref, epsilon);
        let price = frac * pi_ref;
        let h = price * 1e-3;
        let f = |p: f64| c.optimal_demand("PE", p).unwrap().quantity;
        let second = (f(price + h) - 2.0 * f(price) + f(price - h)) / (h * h);
        prop_assert!(second >= -1e-8, "second {second}");
    }

    /// Aggregate curvature times aggregate flexibility is one, and the
    /// harmonic mean never exceeds the smallest individual curvature.
    #[test]
    fn aggregation_identities(
        ks in prop::collection::vec(0.3f64..3.0, 2..5),
        frac in 0.1f64..0.8,
    ) {
        let consumers: Vec<Consumer> = ks
            .iter()
            .enumerate()
            .map(|(i, &k)| {
                let mut losses = BTreeMap::new();
                losses.insert("PE".to_string(), LossSpec::Quadratic { k, d_bar: 6.0 });
                Consumer::new(format!("c{i}"), 1.0, losses).unwrap()
            })
            .collect();
        let view = AggregateView::new(&consumers, "PE").unwrap();
        let min_choke = consumers
            .iter()
            .map(|c| c.choke_price("PE").unwrap())
            .fold(f64::INFINITY, f64::min);
        let price = frac * min_choke;

        let flex = view.flexibility(price).unwrap();
        let curvature = view.curvature(price).unwrap();
        prop_assert!((curvature * flex - 1.0).abs() < 1e-10);

        let min_individual = consumers
            .iter()
            .map(|c| {
                let q = c.optimal_demand("PE", price).unwrap().quantity;
                c.normalized_loss("PE", q).unwrap().d2
            })
            .fold(f64::INFINITY, f64::min);
        prop_assert!(curvature <= min_individual + 1e-12);
    }

    /// Raising one consumer's curvature never lowers the aggregate
    /// curvature.
    #[test]
    fn aggregate_curvature_monotone(
        k1 in 0.3f64..3.0,
        k2 in 0.3f64..3.0,
        bump in 1.01f64..3.0,
        frac in 0.1f64..0.8,
    ) {
        let build = |ka: f64, kb: f64| -> Vec<Consumer> {
            [ka, kb]
                .iter()
                .enumerate()
                .map(|(i, &k)| {
                    let mut losses = BTreeMap::new();
                    losses.insert("PE".to_string(), LossSpec::Quadratic { k, d_bar: 6.0 });
                    Consumer::new(format!("c{i}"), 1.0, losses).unwrap()
                })
                .collect()
        };
        let base = build(k1, k2);
        let bumped = build(k1, k2 * bump);
        let min_choke = base
            .iter()
            .chain(&bumped)
            .map(|c| c.choke_price("PE").unwrap())
            .fold(f64::INFINITY, f64::min);
        let price = frac * min_choke;
        let c0 = AggregateView::new(&base, "PE").unwrap().curvature(price).unwrap();
        let c1 = AggregateView::new(&bumped, "PE").unwrap().curvature(price).unwrap();
        prop_assert!(c1 >= c0 - 1e-12);
    }
}

/// Custom specs route demand through the monotone bisection inversion; it
/// must agree with the closed form it imitates and keep demand convex when
/// the third derivative is negative.
#[test]
fn custom_inversion_and_convexity() {
    // Ĵ'(d) = -p0 + (d-d0)/f + g/2 (d-d0)^2 with g < 0
    let (p0, d0, f, g) = (4.0f64, 5.0f64, 0.5f64, -0.06f64);
    let j1 = move |d: f64| -p0 + (d - d0) / f + 0.5 * g * (d - d0) * (d - d0);
    // satiation point: root of j1 above d0
    let mut lo = d0;
    let mut hi = d0 + 10.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if j1(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let d_bar = 0.5 * (lo + hi);
    let j_raw = move |d: f64| -p0 * d + (d - d0).powi(2) / (2.0 * f) + g * (d - d0).powi(3) / 6.0;
    let offset = -j_raw(d_bar);
    let spec = LossSpec::Custom(CustomLoss {
        d_bar,
        j: Arc::new(move |d| j_raw(d) + offset),
        j1: Arc::new(j1),
        j2: Arc::new(move |d| 1.0 / f + g * (d - d0)),
        j3: Arc::new(move |_| g),
    });
    let mut losses = BTreeMap::new();
    losses.insert("PE".to_string(), spec);
    let consumer = Consumer::new("custom", 1.0, losses).unwrap();

    // demand at p0 is d0 by construction
    let point = consumer.optimal_demand("PE", p0).unwrap();
    assert!((point.quantity - d0).abs() < 1e-9);

    // convex demand: finite-difference second derivative non-negative
    let q = |p: f64| consumer.optimal_demand("PE", p).unwrap().quantity;
    for price in [1.0, 2.5, 4.0, 5.5] {
        let h = 1e-3;
        let second = (q(price + h) - 2.0 * q(price) + q(price - h)) / (h * h);
        assert!(second >= -1e-8, "second {second} at {price}");
        let fd = (q(price + h) - q(price - h)) / (2.0 * h);
        let flex = consumer.flexibility("PE", price).unwrap();
        assert!((fd + flex).abs() < 1e-6 * flex.max(1e-6));
    }

    let report = consumer.validate_assumptions(&["PE"], 64).unwrap();
    assert!(report.all_pass());
    assert!(report.strict_third_derivative);
}

/// Aggregate period orderings follow from individual orderings on random
/// assumption-satisfying scenarios. The orderings live in demand space:
/// peak demand dominates at a common price, and the aggregate loss is more
/// curved at a common demand level.
#[test]
fn aggregate_inherits_period_orderings() {
    for seed in 0..40 {
        let scenario = oracle::random_scenario(seed, 2, 3, oracle::FamilyMix::Mixed).unwrap();
        let pe = scenario.aggregate("PE").unwrap();
        let op = scenario.aggregate("OP").unwrap();

        let max_price = op
            .consumers()
            .iter()
            .map(|c| c.choke_price("OP").unwrap())
            .fold(f64::INFINITY, f64::min);
        for i in 1..8 {
            let price = max_price * i as f64 / 10.0;
            let d_pe = pe.demand(price).unwrap();
            let d_op = op.demand(price).unwrap();
            assert!(d_pe >= d_op - 1e-10, "seed {seed}: demand ordering at {price}");
        }

        let shared = op.total_d_bar().unwrap().min(pe.total_d_bar().unwrap());
        for i in 1..8 {
            let demand = shared * i as f64 / 10.0;
            let price_pe = pe.invert_demand(demand).unwrap();
            let price_op = op.invert_demand(demand).unwrap();
            // marginal loss ordering: the peak inverse demand sits above
            assert!(price_pe >= price_op - 1e-8, "seed {seed}: inverse ordering at {demand}");
            let c_pe = pe.curvature(price_pe).unwrap();
            let c_op = op.curvature(price_op).unwrap();
            assert!(
                c_pe >= c_op - 1e-8,
                "seed {seed}: curvature ordering at demand {demand}: {c_pe} vs {c_op}"
            );
        }
    }
}
