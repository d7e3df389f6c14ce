#![allow(dead_code)]

use cfaudit_core::oracle::{self, JointTable};
use cfaudit_core::{CausalModel, Evidence, Intervention};

/// Predictor and target magnitudes for one context and alternative value,
/// computed by the brute-force oracle.
#[derive(Debug, Clone)]
pub struct OracleEffect {
    pub context: Vec<(String, String)>,
    pub counterfactual: String,
    pub predictor: f64,
    pub target: f64,
    pub differential: f64,
}

fn tv(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Every `(x, a, a')` with `P(x, a) > 1e-15`, in canonical domain order.
pub fn oracle_effects(model: &CausalModel) -> Vec<OracleEffect> {
    let roles = model.roles.as_ref().expect("roles");
    let joint = JointTable::build(model).expect("valid model");
    let mut vars: Vec<&str> = roles.features.iter().map(String::as_str).collect();
    vars.push(&roles.protected);

    let mut contexts: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for v in &vars {
        let domain = model.domain_of(v).unwrap();
        contexts = contexts
            .into_iter()
            .flat_map(|c| {
                domain.iter().map(move |value| {
                    let mut c = c.clone();
                    c.push((v.to_string(), value.clone()));
                    c
                })
            })
            .collect();
    }

    let a_domain = model.domain_of(&roles.protected).unwrap();
    let mut out = Vec::new();
    for context in contexts {
        let pairs: Vec<(&str, &str)> = context.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
        if joint.marginal(&pairs) <= 1e-15 {
            continue;
        }
        let evidence: Evidence = context.iter().cloned().collect();
        let a = context.last().unwrap().1.clone();
        let run = |value: Option<&str>, var: &str| {
            let mut i = Intervention::new();
            if let Some(v) = value {
                i.insert(roles.protected.clone(), v);
            }
            oracle::counterfactual(model, &evidence, &i, &[var])
                .unwrap()
                .probabilities()
                .to_vec()
        };
        let observed = run(None, &roles.predictor);
        let pred_a = run(Some(&a), &roles.predictor);
        let targ_a = run(Some(&a), &roles.target);
        for alt in a_domain.iter().filter(|v| **v != a) {
            let pred_alt = run(Some(alt), &roles.predictor);
            let targ_alt = run(Some(alt), &roles.target);
            out.push(OracleEffect {
                context: context.clone(),
                counterfactual: alt.clone(),
                predictor: tv(&pred_a, &pred_alt),
                target: tv(&targ_a, &targ_alt),
                differential: tv(&observed, &pred_alt),
            });
        }
    }
    out
}
