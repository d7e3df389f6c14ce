//! Brute-force reference inference.
//!
//! Works directly on the data model: every exogenous assignment in the prior
//! support is expanded, endogenous values are found by repeatedly evaluating
//! structural functions on strings until all are bound, and the data-level
//! submodel is solved again for the counterfactual. Nothing here goes
//! through the compiled tables of [`crate::engine`].

pub mod generate;

use std::collections::BTreeMap;

use crate::engine::Distribution;
use crate::error::{Error, Result};
use crate::scm::{self, CausalModel, Evidence, Intervention};

/// One exogenous state with its prior weight and the resulting values of
/// every variable.
#[derive(Debug, Clone, PartialEq)]
pub struct JointRow {
    pub exogenous: BTreeMap<String, String>,
    pub values: BTreeMap<String, String>,
    pub probability: f64,
}

/// The full observational joint, one row per exogenous state in the prior
/// support.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    pub rows: Vec<JointRow>,
}

impl JointTable {
    pub fn build(model: &CausalModel) -> Result<Self> {
        scm::validate(model).map_err(Error::InvalidModel)?;
        let mut states = vec![(BTreeMap::new(), 1.0)];
        for exo in &model.exogenous {
            let mut next = Vec::new();
            for (state, p) in &states {
                for (value, q) in exo.domain.iter().zip(&exo.prior) {
                    if *q > 0.0 {
                        let mut s: BTreeMap<String, String> = state.clone();
                        s.insert(exo.name.clone(), value.clone());
                        next.push((s, p * q));
                    }
                }
            }
            states = next;
        }
        let rows = states
            .into_iter()
            .map(|(exogenous, probability)| JointRow {
                values: solve(model, &exogenous),
                exogenous,
                probability,
            })
            .collect();
        Ok(JointTable { rows })
    }

    /// Marginal probability of `vars = values`, summed over rows.
    pub fn marginal(&self, assignment: &[(&str, &str)]) -> f64 {
        self.rows
            .iter()
            .filter(|r| {
                assignment
                    .iter()
                    .all(|(k, v)| r.values.get(*k).map(String::as_str) == Some(*v))
            })
            .map(|r| r.probability)
            .sum()
    }
}

/// Values of all variables for exogenous state `u`.
pub fn solve(model: &CausalModel, u: &BTreeMap<String, String>) -> BTreeMap<String, String> {
    let mut values = u.clone();
    let mut pending: Vec<_> = model.endogenous.iter().collect();
    while !pending.is_empty() {
        let before = pending.len();
        pending.retain(|var| {
            let lookup = |name: &str| values.get(name).map(String::as_str);
            match var.function.body().eval(&lookup) {
                Ok(v) => {
                    let v = v.to_owned();
                    values.insert(var.name.clone(), v);
                    false
                }
                Err(_) => true,
            }
        });
        assert!(pending.len() < before, "validated model did not resolve");
    }
    values
}

/// `P(query_{intervention} | evidence)`, computed by enumeration.
pub fn counterfactual(
    model: &CausalModel,
    evidence: &Evidence,
    intervention: &Intervention,
    query: &[&str],
) -> Result<Distribution> {
    intervention.check(model)?;
    let mut domains = Vec::new();
    for q in query {
        let domain = model
            .domain_of(q)
            .ok_or_else(|| Error::UnknownVariable((*q).to_owned()))?;
        domains.push(domain.to_vec());
    }
    evidence.check(model)?;

    let joint = JointTable::build(model)?;
    let kept: Vec<&JointRow> = joint
        .rows
        .iter()
        .filter(|r| evidence.iter().all(|(k, v)| r.values[k] == v))
        .collect();
    let total: f64 = kept.iter().map(|r| r.probability).sum();
    if kept.is_empty() || total <= 0.0 {
        return Err(Error::InconsistentEvidence);
    }

    let sub = scm::submodel(model, intervention)?;
    let mut dist = Distribution::zeros(query.iter().map(|q| (*q).to_owned()).collect(), domains.clone());
    for row in kept {
        let values = solve(&sub, &row.exogenous);
        let tuple: Vec<usize> = query
            .iter()
            .zip(&domains)
            .map(|(q, d)| d.iter().position(|v| *v == values[*q]).expect("value in domain"))
            .collect();
        dist.add(&tuple, row.probability / total);
    }
    Ok(dist)
}
