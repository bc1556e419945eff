//! Command implementations. Each returns the rendered report plus the exit
//! code it wants the process to use, so violations can still emit their
//! full machine-readable report.

use tariff_core::extensions;
use tariff_core::loss::LossSpec;
use tariff_core::market::{self, CostSpec, Equilibrium, Scenario};
use tariff_core::oracle;
use tariff_core::welfare::{self, ScreeningVerdict};
use tariff_core::Consumer;

use crate::doc::{self, ScenarioDocument};
use crate::report::{Cell, Report, Table};
use crate::{exit, CliError};

/// Which regime(s) `solve` reports.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveRegime {
    Flat,
    Variable,
    Both,
}

/// A rendered report plus the exit code to use.
pub struct CommandOutput {
    pub report: Report,
    pub exit_code: u8,
}

fn ok(report: Report) -> CommandOutput {
    CommandOutput { report, exit_code: exit::OK }
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

/// Grid-check the consumer assumptions and the cost assumptions; exit 0
/// only when everything passes.
pub fn cmd_validate(document: &ScenarioDocument) -> Result<CommandOutput, CliError> {
    let consumers = document.build_consumers()?;
    let cost = CostSpec::new(document.cost.clone())?;
    let options = document.solver_options();
    let labels: Vec<&str> = document.periods.iter().map(|s| s.as_str()).collect();
    if labels.is_empty() {
        return Err(CliError::Parse("scenario has no periods".into()));
    }

    let mut all_pass = true;
    let mut assumptions = Table::new(
        "assumptions",
        &["consumer", "check", "scope", "pass", "violation_d", "violation_value"],
    );
    let mut strictness = Table::new("strictness", &["consumer", "strict_third_derivative"]);
    for consumer in &consumers {
        let report = consumer.validate_assumptions(&labels, options.grid_points)?;
        for check in &report.checks {
            all_pass &= check.pass;
            let (d, value) = match check.first_violation {
                Some(v) => (Cell::Num(v.d), Cell::Num(v.value)),
                None => (Cell::Text(String::new()), Cell::Text(String::new())),
            };
            assumptions.push(vec![
                consumer.id.as_str().into(),
                check.name.into(),
                check.scope.as_str().into(),
                check.pass.into(),
                d,
                value,
            ]);
        }
        strictness.push(vec![consumer.id.as_str().into(), report.strict_third_derivative.into()]);
    }

    let mut cost_table = Table::new("cost", &["check", "pass", "violation_d", "violation_value"]);
    let mut hi = 0.0f64;
    for period in &labels {
        let mut total = 0.0;
        for c in &consumers {
            total += c.d_bar(period)?;
        }
        hi = hi.max(total);
    }
    for check in cost.checks(hi) {
        all_pass &= check.pass;
        let (d, value) = match check.first_violation {
            Some((d, v)) => (Cell::Num(d), Cell::Num(v)),
            None => (Cell::Text(String::new()), Cell::Text(String::new())),
        };
        cost_table.push(vec![check.name.into(), check.pass.into(), d, value]);
    }

    let mut report = Report::default();
    report.push(assumptions);
    report.push(cost_table);
    report.push(strictness);
    Ok(CommandOutput {
        report,
        exit_code: if all_pass { exit::OK } else { exit::ASSUMPTION_VIOLATION },
    })
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

fn equilibrium_tables(scenario: &Scenario, eq: &Equilibrium, regime: &str, report: &mut Report) {
    let mut periods = Table::new(
        &format!("{regime}_periods"),
        &["regime", "period", "price", "aggregate_demand", "marginal_cost", "foc_residual"],
    );
    for (i, period) in eq.periods.iter().enumerate() {
        periods.push(vec![
            regime.into(),
            period.as_str().into(),
            eq.prices[i].into(),
            eq.aggregate_demand[i].into(),
            scenario.cost().marginal(eq.aggregate_demand[i]).into(),
            eq.foc_residuals[i].into(),
        ]);
    }
    report.push(periods);

    let mut consumers = Table::new(
        &format!("{regime}_consumers"),
        &["regime", "period", "consumer", "quantity", "clamped"],
    );
    for (ci, id) in eq.consumer_ids.iter().enumerate() {
        for (pi, period) in eq.periods.iter().enumerate() {
            consumers.push(vec![
                regime.into(),
                period.as_str().into(),
                id.as_str().into(),
                eq.individual_demand[ci][pi].into(),
                eq.boundary_flags.contains(&(ci, pi)).into(),
            ]);
        }
    }
    report.push(consumers);
}

/// Solve one or both regimes and emit the per-period and per-consumer
/// tables; `both` adds the price-change diagnostics.
pub fn cmd_solve(document: &ScenarioDocument, regime: SolveRegime) -> Result<CommandOutput, CliError> {
    let scenario = document.to_scenario()?;
    let mut report = Report::default();
    match regime {
        SolveRegime::Variable => {
            let eq = market::solve_variable(&scenario)?;
            equilibrium_tables(&scenario, &eq, "variable", &mut report);
        }
        SolveRegime::Flat => {
            let eq = market::solve_flat(&scenario)?;
            equilibrium_tables(&scenario, &eq, "flat", &mut report);
        }
        SolveRegime::Both => {
            let (variable, flat) = market::solve_both(&scenario)?;
            equilibrium_tables(&scenario, &variable, "variable", &mut report);
            equilibrium_tables(&scenario, &flat, "flat", &mut report);

            let changes = market::price_change_report(&scenario, &flat, &variable)?;
            let mut table = Table::new(
                "price_changes",
                &["period", "delta_pi", "avg_curvature", "product"],
            );
            for entry in &changes.entries {
                table.push(vec![
                    entry.period.as_str().into(),
                    entry.delta.into(),
                    entry.avg_curvature.into(),
                    entry.product.into(),
                ]);
            }
            report.push(table);

            let mut summary = Table::new(
                "diagnostics",
                &["product_spread", "social_loss_variable", "social_loss_flat"],
            );
            summary.push(vec![
                changes.product_spread.into(),
                variable.social_loss.into(),
                flat.social_loss.into(),
            ]);
            report.push(summary);
        }
    }
    Ok(ok(report))
}

// ---------------------------------------------------------------------------
// screen
// ---------------------------------------------------------------------------

fn verdict_row(consumer: &str, v: &ScreeningVerdict) -> Vec<Cell> {
    vec![
        consumer.into(),
        v.condition.name().into(),
        v.value.into(),
        match v.rhs {
            Some(r) => Cell::Num(r),
            None => Cell::Text(String::new()),
        },
        v.verdict.name().into(),
        v.exact.into(),
        match v.quadrature_estimate {
            Some(q) => Cell::Num(q),
            None => Cell::Text(String::new()),
        },
    ]
}

fn screening_tables(
    scenario: &Scenario,
    flat: &Equilibrium,
    variable: &Equilibrium,
    report: &mut Report,
) -> Result<(), CliError> {
    let mut consumers = Table::new(
        "consumers",
        &["consumer", "A", "delta_u", "delta_u_per_A", "method"],
    );
    let mut conditions = Table::new(
        "conditions",
        &["consumer", "condition", "value", "rhs", "verdict", "exact", "quadrature_estimate"],
    );
    for consumer in scenario.consumers() {
        let change = welfare::utility_change(consumer, flat, variable)?;
        consumers.push(vec![
            consumer.id.as_str().into(),
            consumer.a.into(),
            change.total.into(),
            change.consumer_surplus_change.into(),
            format!("{:?}", change.method).into(),
        ]);

        let screen = extensions::multi_period_screen(consumer, flat, variable)?;
        conditions.push(verdict_row(&consumer.id, &screen));
        let all_iso = scenario
            .periods()
            .iter()
            .all(|p| matches!(consumer.loss_spec(p), Ok(LossSpec::IsoelasticDemand { .. })));
        if all_iso && scenario.periods().len() == 2 {
            // already covered by the routed screen above
        } else if all_iso {
            let iso = welfare::screen_isoelastic(consumer, flat, variable)?;
            conditions.push(verdict_row(&consumer.id, &iso));
        }
        let general = welfare::screen_general(consumer, flat, variable)?;
        conditions.push(verdict_row(&consumer.id, &general));
    }
    report.push(consumers);
    report.push(conditions);

    let mut comparisons = Table::new(
        "comparisons",
        &["lo", "hi", "condition", "lhs", "rhs", "verdict", "exact"],
    );
    let all: &[Consumer] = scenario.consumers();
    for lo in all {
        for hi in all {
            if lo.a > hi.a {
                let v = welfare::compare_consumers(lo, hi, flat, variable)?;
                comparisons.push(vec![
                    lo.id.as_str().into(),
                    hi.id.as_str().into(),
                    v.condition.name().into(),
                    v.value.into(),
                    v.rhs.map(Cell::Num).unwrap_or(Cell::Text(String::new())),
                    v.verdict.name().into(),
                    v.exact.into(),
                ]);
            }
        }
    }
    report.push(comparisons);
    Ok(())
}

/// Per-consumer utility changes, screening verdicts, and pairwise
/// comparisons for the flat-to-variable switch.
pub fn cmd_screen(document: &ScenarioDocument) -> Result<CommandOutput, CliError> {
    let scenario = document.to_scenario()?;
    let (variable, flat) = market::solve_both(&scenario)?;
    let mut report = Report::default();
    screening_tables(&scenario, &flat, &variable, &mut report)?;
    Ok(ok(report))
}

// ---------------------------------------------------------------------------
// ramsey
// ---------------------------------------------------------------------------

/// Solve the profit-constrained prices for a target and re-run the
/// screening with those prices substituted for the variable ones.
pub fn cmd_ramsey(document: &ScenarioDocument, target: f64) -> Result<CommandOutput, CliError> {
    let scenario = document.to_scenario()?;
    let solution = extensions::ramsey_solve(&scenario, target)?;
    let mut report = Report::default();

    let mut summary = Table::new("solution", &["nu", "profit_target", "total_profit"]);
    summary.push(vec![solution.nu.into(), target.into(), solution.total_profit.into()]);
    report.push(summary);

    let mut periods = Table::new(
        "periods",
        &["period", "price", "marginal_cost", "distortion", "elasticity", "profit"],
    );
    for (i, period) in scenario.periods().iter().enumerate() {
        let d = solution.equilibrium.aggregate_demand[i];
        periods.push(vec![
            period.as_str().into(),
            solution.prices[i].into(),
            scenario.cost().marginal(d).into(),
            solution.distortions[i].into(),
            solution.elasticities[i].into(),
            solution.profits[i].into(),
        ]);
    }
    report.push(periods);

    let flat = market::solve_flat(&scenario)?;
    screening_tables(&scenario, &flat, &solution.equilibrium, &mut report)?;
    Ok(ok(report))
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

/// Re-solve the scenario while one named parameter moves over a range and
/// emit one plot-ready row per step.
pub fn cmd_sweep(
    document: &ScenarioDocument,
    parameter: &str,
    from: f64,
    to: f64,
    steps: usize,
) -> Result<CommandOutput, CliError> {
    if steps == 0 {
        return Err(CliError::Usage("sweep needs steps >= 1".into()));
    }
    let base = document.to_scenario()?;
    let period_labels: Vec<String> = base.periods().to_vec();
    let consumer_ids: Vec<String> = base.consumers().iter().map(|c| c.id.clone()).collect();

    let mut header: Vec<String> = vec!["step".into(), "parameter".into(), "value".into(), "flat_price".into()];
    for p in &period_labels {
        header.push(format!("variable_price_{p}"));
    }
    for id in &consumer_ids {
        header.push(format!("delta_u_{id}"));
        header.push(format!("screen_value_{id}"));
        header.push(format!("verdict_{id}"));
    }
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let mut table = Table::new("sweep", &header_refs);

    for step in 0..steps {
        let value = if steps == 1 {
            from
        } else {
            from + (to - from) * step as f64 / (steps - 1) as f64
        };
        let changed = doc::with_parameter(document, parameter, value)?;
        let scenario = changed.to_scenario()?;
        let (variable, flat) = market::solve_both(&scenario)?;
        let mut row: Vec<Cell> = vec![step.into(), parameter.into(), value.into(), flat.prices[0].into()];
        for price in &variable.prices {
            row.push((*price).into());
        }
        for consumer in scenario.consumers() {
            let change = welfare::utility_change(consumer, &flat, &variable)?;
            let screen = extensions::multi_period_screen(consumer, &flat, &variable)?;
            row.push(change.total.into());
            row.push(screen.value.into());
            row.push(screen.verdict.name().into());
        }
        table.push(row);
    }
    let mut report = Report::default();
    report.push(table);
    Ok(ok(report))
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

/// Run the oracle cross-check battery on the given scenario plus `count`
/// seeded random scenarios; exit 0 only if every check passes.
pub fn cmd_verify(
    document: &ScenarioDocument,
    seed: Option<u64>,
    count: usize,
) -> Result<CommandOutput, CliError> {
    let scenario = document.to_scenario()?;
    let seed = seed.unwrap_or(scenario.options.seed);
    let suite = oracle::verify_suite(&scenario, seed, count)?;

    let mut checks = Table::new(
        "checks",
        &["scenario", "quantity", "analytic", "oracle", "abs_error", "rel_error", "tolerance", "pass"],
    );
    for row in &suite.rows {
        checks.push(vec![
            row.scenario.as_str().into(),
            row.report.quantity.as_str().into(),
            row.report.analytic.into(),
            row.report.oracle.into(),
            row.report.abs_error.into(),
            row.report.rel_error.into(),
            row.report.tolerance.into(),
            row.report.pass.into(),
        ]);
    }
    let failures = suite.rows.iter().filter(|r| !r.report.pass).count();
    let mut summary = Table::new("summary", &["seed", "random_count", "checks", "failures"]);
    summary.push(vec![
        Cell::Int(seed as i64),
        count.into(),
        suite.rows.len().into(),
        failures.into(),
    ]);

    let mut report = Report::default();
    report.push(summary);
    report.push(checks);
    Ok(CommandOutput {
        report,
        exit_code: if failures == 0 { exit::OK } else { exit::ORACLE_FAILURE },
    })
}
