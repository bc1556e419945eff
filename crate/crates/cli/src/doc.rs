//! Scenario document schema and conversion to solver types.
//!
//! Documents are JSON with top-level keys `periods`, `cost`, `consumers`,
//! and optional `options`. Period labels are opaque strings whose order is
//! significant (most critical period first). Only the quadratic and
//! isoelastic-demand families are representable in documents; custom loss
//! evaluators exist only in code.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use tariff_core::loss::LossSpec;
use tariff_core::market::{CostSpec, Scenario, SolverOptions};
use tariff_core::Consumer;

use crate::CliError;

/// Top-level scenario document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDocument {
    /// Ordered period labels; for two-period scenarios the first is peak.
    pub periods: Vec<String>,
    /// Cost polynomial coefficients `c0, c1, c2, ...`.
    pub cost: Vec<f64>,
    pub consumers: Vec<ConsumerDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<OptionsDocument>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsumerDocument {
    pub id: String,
    /// Price sensitivity (marginal disutility of expenditure).
    #[serde(rename = "A")]
    pub a: f64,
    /// Period label -> loss family.
    pub loss: BTreeMap<String, LossDocument>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum LossDocument {
    Quadratic {
        k: f64,
        d_bar: f64,
    },
    IsoelasticDemand {
        d_ref: f64,
        pi_ref: f64,
        epsilon: f64,
        pi_low: f64,
        pi_high: f64,
    },
}

/// Solver options; every field optional with library defaults.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionsDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flat_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub var_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quad_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_points: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ScenarioDocument {
    /// Parse a document from JSON text; errors carry line and column.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text)
            .map_err(|e| CliError::Parse(format!("scenario document: {e}")))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("document serializes")
    }

    /// Resolved solver options.
    pub fn solver_options(&self) -> SolverOptions {
        let defaults = SolverOptions::default();
        match &self.options {
            None => defaults,
            Some(o) => SolverOptions {
                flat_tol: o.flat_tol.unwrap_or(defaults.flat_tol),
                var_tol: o.var_tol.unwrap_or(defaults.var_tol),
                quad_tol: o.quad_tol.unwrap_or(defaults.quad_tol),
                grid_points: o.grid_points.unwrap_or(defaults.grid_points),
                seed: o.seed.unwrap_or(defaults.seed),
            },
        }
    }

    /// Build the consumer list without requiring the cost checks to pass.
    pub fn build_consumers(&self) -> Result<Vec<Consumer>, CliError> {
        self.consumers
            .iter()
            .map(|c| {
                let losses: BTreeMap<String, LossSpec> = c
                    .loss
                    .iter()
                    .map(|(period, spec)| (period.clone(), spec.to_spec()))
                    .collect();
                Consumer::new(c.id.clone(), c.a, losses).map_err(CliError::from)
            })
            .collect()
    }

    /// Convert to a validated scenario.
    pub fn to_scenario(&self) -> Result<Scenario, CliError> {
        let consumers = self.build_consumers()?;
        let cost = CostSpec::new(self.cost.clone())?;
        Ok(Scenario::new(self.periods.clone(), consumers, cost, self.solver_options())?)
    }

    /// Rebuild a document from a scenario. Fails on custom loss families,
    /// which have no document form.
    pub fn from_scenario(scenario: &Scenario) -> Result<Self, CliError> {
        let consumers = scenario
            .consumers()
            .iter()
            .map(|c| {
                let mut loss = BTreeMap::new();
                for period in scenario.periods() {
                    let spec = c.loss_spec(period)?;
                    loss.insert(period.clone(), LossDocument::from_spec(spec)?);
                }
                Ok(ConsumerDocument { id: c.id.clone(), a: c.a, loss })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let o = scenario.options;
        Ok(ScenarioDocument {
            periods: scenario.periods().to_vec(),
            cost: scenario.cost().coeffs().to_vec(),
            consumers,
            options: Some(OptionsDocument {
                flat_tol: Some(o.flat_tol),
                var_tol: Some(o.var_tol),
                quad_tol: Some(o.quad_tol),
                grid_points: Some(o.grid_points),
                seed: Some(o.seed),
            }),
        })
    }
}

impl LossDocument {
    pub fn to_spec(&self) -> LossSpec {
        match *self {
            LossDocument::Quadratic { k, d_bar } => LossSpec::Quadratic { k, d_bar },
            LossDocument::IsoelasticDemand { d_ref, pi_ref, epsilon, pi_low, pi_high } => {
                LossSpec::IsoelasticDemand { d_ref, pi_ref, epsilon, pi_low, pi_high }
            }
        }
    }

    pub fn from_spec(spec: &LossSpec) -> Result<Self, CliError> {
        Ok(match *spec {
            LossSpec::Quadratic { k, d_bar } => LossDocument::Quadratic { k, d_bar },
            LossSpec::IsoelasticDemand { d_ref, pi_ref, epsilon, pi_low, pi_high } => {
                LossDocument::IsoelasticDemand { d_ref, pi_ref, epsilon, pi_low, pi_high }
            }
            LossSpec::Custom(_) => {
                return Err(CliError::Parse(
                    "custom loss functions have no document representation".into(),
                ))
            }
        })
    }
}

/// Set one parameter addressed by a dotted path (`cost.2`,
/// `consumers.0.A`, `consumers.1.loss.OP.k`; a `*` segment fans out over
/// every element of an array) and return the modified document.
pub fn with_parameter(
    doc: &ScenarioDocument,
    path: &str,
    value: f64,
) -> Result<ScenarioDocument, CliError> {
    let mut tree = serde_json::to_value(doc).expect("document serializes");
    let segments: Vec<&str> = path.split('.').collect();
    if segments.is_empty() || path.is_empty() {
        return Err(CliError::Parse("empty parameter path".into()));
    }
    set_path(&mut tree, &segments, value, path)?;
    serde_json::from_value(tree)
        .map_err(|e| CliError::Parse(format!("parameter {path} produced an invalid document: {e}")))
}

fn set_path(
    node: &mut serde_json::Value,
    segments: &[&str],
    value: f64,
    full: &str,
) -> Result<(), CliError> {
    let unknown = || CliError::Parse(format!("unknown parameter path {full}"));
    if segments.is_empty() {
        return match node {
            serde_json::Value::Number(_) => {
                *node = serde_json::Value::from(value);
                Ok(())
            }
            _ => Err(unknown()),
        };
    }
    let (head, rest) = (segments[0], &segments[1..]);
    match node {
        serde_json::Value::Object(map) => {
            let child = map.get_mut(head).ok_or_else(unknown)?;
            set_path(child, rest, value, full)
        }
        serde_json::Value::Array(items) => {
            if head == "*" {
                for item in items.iter_mut() {
                    set_path(item, rest, value, full)?;
                }
                Ok(())
            } else {
                let index: usize = head.parse().map_err(|_| unknown())?;
                let child = items.get_mut(index).ok_or_else(unknown)?;
                set_path(child, rest, value, full)
            }
        }
        _ => Err(unknown()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const S1_JSON: &str = r#"{
        "periods": ["PE", "OP"],
        "cost": [0.0, 0.0, 0.5],
        "consumers": [
            {"id": "hh1", "A": 1.0, "loss": {
                "PE": {"family": "quadratic", "k": 2.0, "d_bar": 5.0},
                "OP": {"family": "quadratic", "k": 2.0, "d_bar": 3.0}}},
            {"id": "hh2", "A": 1.0, "loss": {
                "PE": {"family": "quadratic", "k": 2.0, "d_bar": 5.0},
                "OP": {"family": "quadratic", "k": 2.0, "d_bar": 3.0}}}
        ]
    }"#;

    #[test]
    fn parse_and_build_s1() {
        let doc = ScenarioDocument::parse(S1_JSON).unwrap();
        let scenario = doc.to_scenario().unwrap();
        assert_eq!(scenario.periods(), ["PE", "OP"]);
        assert_eq!(scenario.consumers().len(), 2);
    }

    #[test]
    fn malformed_document_is_a_parse_error() {
        assert!(matches!(ScenarioDocument::parse("{"), Err(CliError::Parse(_))));
        assert!(matches!(
            ScenarioDocument::parse(r#"{"periods": [], "cost": [], "consumers": [], "junk": 1}"#),
            Err(CliError::Parse(_))
        ));
    }

    #[test]
    fn unknown_family_rejected() {
        let text = S1_JSON.replace("quadratic", "cubic");
        assert!(matches!(ScenarioDocument::parse(&text), Err(CliError::Parse(_))));
    }

    #[test]
    fn round_trip_through_scenario() {
        let doc = ScenarioDocument::parse(S1_JSON).unwrap();
        let scenario = doc.to_scenario().unwrap();
        let back = ScenarioDocument::from_scenario(&scenario).unwrap();
        assert_eq!(doc.periods, back.periods);
        assert_eq!(doc.cost, back.cost);
        assert_eq!(doc.consumers, back.consumers);
        // and the re-parsed document solves to the same scenario
        let again = ScenarioDocument::parse(&back.to_json_pretty()).unwrap();
        assert_eq!(back, again);
    }

    #[test]
    fn parameter_paths() {
        let doc = ScenarioDocument::parse(S1_JSON).unwrap();
        let changed = with_parameter(&doc, "consumers.0.loss.OP.k", 1.0).unwrap();
        assert!(matches!(
            changed.consumers[0].loss["OP"],
            LossDocument::Quadratic { k, .. } if k == 1.0
        ));

        let all = with_parameter(&doc, "consumers.*.loss.OP.k", 1.5).unwrap();
        for c in &all.consumers {
            assert!(matches!(c.loss["OP"], LossDocument::Quadratic { k, .. } if k == 1.5));
        }

        let cost = with_parameter(&doc, "cost.1", 0.25).unwrap();
        assert_eq!(cost.cost[1], 0.25);

        let a = with_parameter(&doc, "consumers.1.A", 2.0).unwrap();
        assert_eq!(a.consumers[1].a, 2.0);

        assert!(with_parameter(&doc, "consumers.5.A", 2.0).is_err());
        assert!(with_parameter(&doc, "consumers.0.loss.OP.nope", 2.0).is_err());
        assert!(with_parameter(&doc, "consumers.0.id", 2.0).is_err());
    }
}
