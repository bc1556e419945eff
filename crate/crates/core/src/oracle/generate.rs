//! Seeded random scenario generation for the property and ordering suites.
//!
//! Instances are built to satisfy the consumer-model assumptions by
//! construction: per-period parameters are drawn and then sorted so the
//! first period is the most critical. Each draw is re-validated on the
//! assumption grid and resampled on failure.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::CoreError;
use crate::loss::{Consumer, LossSpec};
use crate::market::{CostSpec, Scenario, SolverOptions};
use crate::Result;

const MAX_ATTEMPTS: u32 = 100;

/// Which loss families the generator draws from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FamilyMix {
    QuadraticOnly,
    IsoelasticOnly,
    /// Each consumer is quadratic or isoelastic with equal probability.
    Mixed,
}

/// Deterministic random scenario: `T >= 2` periods ordered most critical
/// first, `N >= 1` consumers, cost `c1 d + c2 d²` with `c1 ∈ [0,1]`,
/// `c2 ∈ [0.1, 2]`.
pub fn random_scenario(seed: u64, t: usize, n: usize, mix: FamilyMix) -> Result<Scenario> {
    if t < 2 {
        return Err(CoreError::Domain(format!("generator needs >= 2 periods, got {t}")));
    }
    if n < 1 {
        return Err(CoreError::Domain(format!("generator needs >= 1 consumer, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let periods: Vec<String> = if t == 2 {
        vec!["PE".into(), "OP".into()]
    } else {
        (1..=t).map(|i| format!("T{i}")).collect()
    };

    for attempt in 1..=MAX_ATTEMPTS {
        let cost = CostSpec::new(vec![
            0.0,
            rng.gen_range(0.0..=1.0),
            rng.gen_range(0.1..=2.0),
        ])?;
        let mut consumers = Vec::with_capacity(n);
        for i in 0..n {
            let quadratic = match mix {
                FamilyMix::QuadraticOnly => true,
                FamilyMix::IsoelasticOnly => false,
                FamilyMix::Mixed => rng.gen_bool(0.5),
            };
            let consumer = if quadratic {
                random_quadratic_consumer(&mut rng, i, &periods)
            } else {
                random_isoelastic_consumer(&mut rng, i, &periods)
            }?;
            consumers.push(consumer);
        }
        let scenario =
            Scenario::new(periods.clone(), consumers, cost, SolverOptions { seed, ..Default::default() })?;
        let reports = scenario.validate_assumptions()?;
        if reports.iter().all(|r| r.all_pass()) {
            return Ok(scenario);
        }
        if attempt == MAX_ATTEMPTS {
            break;
        }
    }
    Err(CoreError::Generation {
        attempts: MAX_ATTEMPTS,
        detail: format!("seed {seed}, T={t}, N={n}, mix {mix:?}"),
    })
}

/// Quadratic losses: draw per-period `(k, d_bar)` and sort both descending,
/// which pins the loss, marginal-loss, and curvature orderings.
fn random_quadratic_consumer(
    rng: &mut ChaCha8Rng,
    index: usize,
    periods: &[String],
) -> Result<Consumer> {
    let a = rng.gen_range(0.5..=2.0);
    let mut ks: Vec<f64> = (0..periods.len()).map(|_| rng.gen_range(0.3..=3.0)).collect();
    let mut d_bars: Vec<f64> = (0..periods.len()).map(|_| rng.gen_range(2.0..=8.0)).collect();
    ks.sort_by(|x, y| y.total_cmp(x));
    d_bars.sort_by(|x, y| y.total_cmp(x));
    let mut losses = BTreeMap::new();
    for (j, period) in periods.iter().enumerate() {
        losses.insert(period.clone(), LossSpec::Quadratic { k: ks[j], d_bar: d_bars[j] });
    }
    Consumer::new(format!("q{index}"), a, losses)
}

/// Isoelastic demand: one elasticity and reference demand per consumer,
/// with each period's demand curve a price-stretched copy of the least
/// critical one, `d_j(π) = d_base(π / s_j)` with `s_j >= 1` non-increasing
/// across periods. Stretching in price scales the whole inverse demand
/// curve by `s_j`, so every pairwise ordering holds pointwise, linear tails
/// included.
fn random_isoelastic_consumer(
    rng: &mut ChaCha8Rng,
    index: usize,
    periods: &[String],
) -> Result<Consumer> {
    let a = rng.gen_range(0.5..=2.0);
    let epsilon = rng.gen_range(-1.8..=-0.2);
    let base_pi_ref = rng.gen_range(1.0..=4.0);
    let d_ref = rng.gen_range(1.0..=6.0);
    let mut scales: Vec<f64> = (0..periods.len()).map(|_| rng.gen_range(1.0..=2.5)).collect();
    scales.sort_by(|x, y| y.total_cmp(x));
    let min = *scales.last().expect(">= 2 periods");
    let mut losses = BTreeMap::new();
    for (j, period) in periods.iter().enumerate() {
        let pi_ref = base_pi_ref * scales[j] / min;
        losses.insert(
            period.clone(),
            LossSpec::IsoelasticDemand {
                d_ref,
                pi_ref,
                epsilon,
                pi_low: 0.01 * pi_ref,
                pi_high: 100.0 * pi_ref,
            },
        );
    }
    Consumer::new(format!("e{index}"), a, losses)
}
