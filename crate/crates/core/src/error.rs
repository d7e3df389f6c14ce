use thiserror::Error;

use crate::scm::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid model: {}", join_violations(.0))]
    InvalidModel(Vec<Violation>),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("value `{value}` is not in the domain of `{variable}`")]
    ValueOutsideDomain { variable: String, value: String },

    #[error("`{0}` is exogenous; only endogenous variables can be observed or intervened on")]
    NotEndogenous(String),

    /// The evidence (or audit context) has probability zero under the prior.
    #[error("inconsistent evidence: no exogenous state with positive probability reproduces it")]
    InconsistentEvidence,

    #[error("model does not declare protected, predictor and target roles")]
    MissingRoles,

    #[error("counterfactual value `{0}` equals the factual protected value")]
    SameCounterfactualValue(String),

    #[error("feature assignment has {got} values, model declares {expected} features")]
    ContextArity { expected: usize, got: usize },
}

fn join_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
