//! Actual causal effects of the protected attribute and the fairness
//! criteria built on them.
//!
//! For a context `(x, a)` and an alternative value `a'`, the effect of `A`
//! on an outcome `V` is the per-value difference
//! `P(V_a = v | x, a) - P(V_a' = v | x, a)`. Criteria compare effects by
//! their total variation magnitude, so a binary outcome's magnitude is the
//! absolute difference of its two probabilities.
//!
//! Every criterion quantifies over all positive-probability contexts and
//! over every `a' != a`.

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::engine::{abduce, observational_contexts, predict_ids, CompiledModel, Context, Distribution};
use crate::error::{Error, Result};
use crate::scm::Evidence;

pub const DEFAULT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    CounterfactualFairness,
    CausalRelevanceFairness,
    StrictCausalRelevanceFairness,
    WrongfulDiscrimination,
}

impl Criterion {
    pub const ALL: [Criterion; 4] = [
        Criterion::CounterfactualFairness,
        Criterion::CausalRelevanceFairness,
        Criterion::StrictCausalRelevanceFairness,
        Criterion::WrongfulDiscrimination,
    ];

    /// Short name used on the command line.
    pub fn key(self) -> &'static str {
        match self {
            Criterion::CounterfactualFairness => "cf",
            Criterion::CausalRelevanceFairness => "crf",
            Criterion::StrictCausalRelevanceFairness => "crf-strict",
            Criterion::WrongfulDiscrimination => "wrongful",
        }
    }

    pub fn from_key(key: &str) -> Option<Self> {
        Criterion::ALL.into_iter().find(|c| c.key() == key)
    }

    pub fn title(self) -> &'static str {
        match self {
            Criterion::CounterfactualFairness => "counterfactual fairness",
            Criterion::CausalRelevanceFairness => "causal relevance fairness",
            Criterion::StrictCausalRelevanceFairness => "strict causal relevance fairness",
            Criterion::WrongfulDiscrimination => "no wrongful discrimination",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.title())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Satisfied,
    Violated,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Satisfied => "satisfied",
            Verdict::Violated => "violated",
        })
    }
}

/// Effect of switching the protected attribute from its factual value to
/// `counterfactual` on one outcome, in one context.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectReport {
    /// `name=value` pairs of the context, features first.
    pub context: Vec<(String, String)>,
    pub factual: String,
    pub counterfactual: String,
    pub outcome: String,
    pub outcome_values: Vec<String>,
    /// `P(outcome_a = v | x, a) - P(outcome_a' = v | x, a)` per outcome value.
    pub signed: Vec<f64>,
    /// Total variation distance, half the L1 norm of `signed`.
    pub magnitude: f64,
}

fn effect_report(
    model: &CompiledModel,
    context: &Context,
    counterfactual: usize,
    factual_dist: &Distribution,
    alt_dist: &Distribution,
) -> EffectReport {
    let protected = model.roles().map(|r| r.protected).unwrap_or(0);
    let signed: Vec<f64> = factual_dist
        .probabilities()
        .iter()
        .zip(alt_dist.probabilities())
        .map(|(p, q)| p - q)
        .collect();
    let magnitude = 0.5 * signed.iter().map(|d| d.abs()).sum::<f64>();
    EffectReport {
        context: context.pairs(model),
        factual: model.domain(protected)[context.protected].clone(),
        counterfactual: model.domain(protected)[counterfactual].clone(),
        outcome: factual_dist.variables()[0].clone(),
        outcome_values: factual_dist.domains()[0].clone(),
        signed,
        magnitude,
    }
}

/// Effects on predictor and target for one `(context, a')` pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectPair {
    pub predictor: EffectReport,
    pub target: EffectReport,
    /// Total variation between the factual predictor distribution
    /// `P(Ŷ | x, a)` and the counterfactual one `P(Ŷ_a' | x, a)`.
    pub differential_treatment: f64,
}

impl EffectPair {
    /// Predictor magnitude minus target magnitude.
    pub fn excess(&self) -> f64 {
        self.predictor.magnitude - self.target.magnitude
    }
}

/// All effects of one context, one entry per `a' != a` in domain order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContextEffects {
    pub context: Context,
    pub pairs: Vec<EffectPair>,
}

/// Effects for every positive-probability context, in canonical order.
pub fn effect_table(model: &CompiledModel) -> Result<Vec<ContextEffects>> {
    let contexts = observational_contexts(model)?;
    contexts
        .into_par_iter()
        .map(|context| context_effects(model, context))
        .collect()
}

fn context_effects(model: &CompiledModel, context: Context) -> Result<ContextEffects> {
    let roles = model.roles().ok_or(Error::MissingRoles)?;
    let posterior = abduce(model, &context.evidence(model)?)?;
    let a = roles.protected;
    let n = model.var_count();
    let under = |value: Option<usize>, outcome: usize| {
        let mut overrides = vec![None; n];
        overrides[a] = value;
        predict_ids(model, &posterior, &overrides, &[outcome])
    };
    let observed_pred = under(None, roles.predictor);
    let per_value: Vec<(Distribution, Distribution)> = (0..model.domain(a).len())
        .map(|v| (under(Some(v), roles.predictor), under(Some(v), roles.target)))
        .collect();
    let (pred_a, target_a) = &per_value[context.protected];
    let pairs = per_value
        .iter()
        .enumerate()
        .filter(|&(v, _)| v != context.protected)
        .map(|(v, (pred_alt, target_alt))| EffectPair {
            predictor: effect_report(model, &context, v, pred_a, pred_alt),
            target: effect_report(model, &context, v, target_a, target_alt),
            differential_treatment: observed_pred.total_variation(pred_alt),
        })
        .collect();
    Ok(ContextEffects { context, pairs })
}

/// The actual causal effect of setting the protected attribute to `a` (its
/// context value) rather than `counterfactual`, on `outcome`.
pub fn actual_effect(
    model: &CompiledModel,
    outcome: &str,
    context: &Context,
    counterfactual: &str,
) -> Result<EffectReport> {
    let roles = model.roles().ok_or(Error::MissingRoles)?;
    let a = roles.protected;
    let outcome_id = model
        .var_id(outcome)
        .ok_or_else(|| Error::UnknownVariable(outcome.to_owned()))?;
    let alt = model
        .value_id(a, counterfactual)
        .ok_or_else(|| Error::ValueOutsideDomain {
            variable: model.var_name(a).to_owned(),
            value: counterfactual.to_owned(),
        })?;
    if alt == context.protected {
        return Err(Error::SameCounterfactualValue(counterfactual.to_owned()));
    }
    let posterior = abduce(model, &context.evidence(model)?)?;
    let mut overrides = vec![None; model.var_count()];
    overrides[a] = Some(context.protected);
    let factual = predict_ids(model, &posterior, &overrides, &[outcome_id]);
    overrides[a] = Some(alt);
    let alternative = predict_ids(model, &posterior, &overrides, &[outcome_id]);
    Ok(effect_report(model, context, alt, &factual, &alternative))
}

/// Builds a context from evidence naming every feature and the protected
/// attribute; its probability is the observational `P(X = x, A = a)`.
pub fn context_from_evidence(model: &CompiledModel, evidence: &Evidence) -> Result<Context> {
    let roles = model.roles().ok_or(Error::MissingRoles)?;
    let value = |id: usize| -> Result<usize> {
        let name = model.var_name(id);
        let v = evidence
            .get(name)
            .ok_or_else(|| Error::UnknownVariable(name.to_owned()))?;
        model.value_id(id, v).ok_or_else(|| Error::ValueOutsideDomain {
            variable: name.to_owned(),
            value: v.to_owned(),
        })
    };
    let features = roles.features.iter().map(|&f| value(f)).collect::<Result<Vec<_>>>()?;
    let protected = value(roles.protected)?;
    let prior = abduce(model, &Evidence::new())?;
    let mut ids = roles.features.clone();
    ids.push(roles.protected);
    let mut tuple = features.clone();
    tuple.push(protected);
    let probability = predict_ids(model, &prior, &[], &ids).prob(&tuple);
    Ok(Context {
        features,
        protected,
        probability,
    })
}

/// A context (with alternative value) at which a criterion fails.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub context: Vec<(String, String)>,
    pub factual: String,
    pub counterfactual: String,
    pub predictor_effect: f64,
    pub target_effect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub criterion: Criterion,
    pub verdict: Verdict,
    pub tolerance: f64,
    pub contexts_checked: usize,
    pub witnesses: Vec<Witness>,
}

/// Whether `pair` witnesses a failure of `criterion`.
pub fn fails(criterion: Criterion, pair: &EffectPair, tolerance: f64) -> bool {
    match criterion {
        Criterion::CounterfactualFairness => pair.predictor.magnitude > tolerance,
        Criterion::CausalRelevanceFairness => pair.excess() > tolerance,
        Criterion::StrictCausalRelevanceFairness => pair.excess().abs() > tolerance,
        Criterion::WrongfulDiscrimination => {
            let differential = pair.differential_treatment > tolerance;
            let explanatory = pair.predictor.magnitude > tolerance;
            let wrongful = pair.excess() > tolerance;
            differential && explanatory && wrongful
        }
    }
}

/// Renders the verdict of `criterion` from a precomputed effect table.
pub fn judge(criterion: Criterion, effects: &[ContextEffects], tolerance: f64) -> AuditReport {
    let witnesses: Vec<Witness> = effects
        .iter()
        .flat_map(|c| &c.pairs)
        .filter(|pair| fails(criterion, pair, tolerance))
        .map(|pair| Witness {
            context: pair.predictor.context.clone(),
            factual: pair.predictor.factual.clone(),
            counterfactual: pair.predictor.counterfactual.clone(),
            predictor_effect: pair.predictor.magnitude,
            target_effect: pair.target.magnitude,
        })
        .collect();
    AuditReport {
        criterion,
        verdict: if witnesses.is_empty() {
            Verdict::Satisfied
        } else {
            Verdict::Violated
        },
        tolerance,
        contexts_checked: effects.len(),
        witnesses,
    }
}

pub fn check_counterfactual_fairness(model: &CompiledModel, tolerance: f64) -> Result<AuditReport> {
    Ok(judge(
        Criterion::CounterfactualFairness,
        &effect_table(model)?,
        tolerance,
    ))
}

/// Weak (`strict = false`): the predictor effect never exceeds the target
/// effect. Strict: the two effects are equal.
pub fn check_causal_relevance_fairness(model: &CompiledModel, tolerance: f64, strict: bool) -> Result<AuditReport> {
    let criterion = if strict {
        Criterion::StrictCausalRelevanceFairness
    } else {
        Criterion::CausalRelevanceFairness
    };
    Ok(judge(criterion, &effect_table(model)?, tolerance))
}

pub fn check_wrongful_discrimination(model: &CompiledModel, tolerance: f64) -> Result<AuditReport> {
    Ok(judge(
        Criterion::WrongfulDiscrimination,
        &effect_table(model)?,
        tolerance,
    ))
}

/// Reports for several criteria from a single effect table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Audit {
    pub effects: Vec<ContextEffects>,
    pub reports: Vec<AuditReport>,
}

impl Audit {
    pub fn report(&self, criterion: Criterion) -> Option<&AuditReport> {
        self.reports.iter().find(|r| r.criterion == criterion)
    }

    pub fn verdict(&self, criterion: Criterion) -> Option<Verdict> {
        self.report(criterion).map(|r| r.verdict)
    }
}

pub fn audit(model: &CompiledModel, tolerance: f64, criteria: &[Criterion]) -> Result<Audit> {
    let effects = effect_table(model)?;
    let reports = criteria.iter().map(|&c| judge(c, &effects, tolerance)).collect();
    Ok(Audit { effects, reports })
}

/// All four criteria.
pub fn full_audit(model: &CompiledModel, tolerance: f64) -> Result<Audit> {
    audit(model, tolerance, &Criterion::ALL)
}
