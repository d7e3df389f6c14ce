//! Finite discrete structural causal models.
//!
//! A [`CausalModel`] is plain data: exogenous variables with independent
//! priors, endogenous variables with structural functions, and optional
//! audit roles. [`validate`] checks every well-formedness invariant and
//! [`submodel`] performs graph surgery for an [`Intervention`].

mod expr;
mod validate;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};

pub use expr::{EvalError, Expr, StructuralFunction, Table, TableRow};
pub use validate::{tabulate, validate, Site, Violation};

/// Tolerance on the sum of an exogenous prior.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VariableKind {
    Exogenous,
    Endogenous,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Exogenous {
    pub name: String,
    pub domain: Vec<String>,
    /// Aligned with `domain`.
    pub prior: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Endogenous {
    pub name: String,
    pub domain: Vec<String>,
    pub function: StructuralFunction,
}

/// Designated variables of a fairness audit: protected attribute `A`,
/// features `X`, predictor `Ŷ` and target `Y`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Roles {
    pub protected: String,
    pub features: Vec<String>,
    pub predictor: String,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CausalModel {
    pub name: String,
    pub exogenous: Vec<Exogenous>,
    pub endogenous: Vec<Endogenous>,
    pub roles: Option<Roles>,
}

impl CausalModel {
    pub fn new(name: impl Into<String>) -> Self {
        CausalModel {
            name: name.into(),
            exogenous: Vec::new(),
            endogenous: Vec::new(),
            roles: None,
        }
    }

    pub fn with_exogenous(mut self, name: &str, domain: &[&str], prior: &[f64]) -> Self {
        self.exogenous.push(Exogenous {
            name: name.to_owned(),
            domain: domain.iter().map(|s| s.to_string()).collect(),
            prior: prior.to_vec(),
        });
        self
    }

    pub fn with_endogenous(mut self, name: &str, domain: &[&str], body: Expr) -> Self {
        self.endogenous.push(Endogenous {
            name: name.to_owned(),
            domain: domain.iter().map(|s| s.to_string()).collect(),
            function: StructuralFunction::new(body),
        });
        self
    }

    pub fn with_roles(mut self, protected: &str, features: &[&str], predictor: &str, target: &str) -> Self {
        self.roles = Some(Roles {
            protected: protected.to_owned(),
            features: features.iter().map(|s| s.to_string()).collect(),
            predictor: predictor.to_owned(),
            target: target.to_owned(),
        });
        self
    }

    pub fn kind_of(&self, name: &str) -> Option<VariableKind> {
        if self.exogenous.iter().any(|v| v.name == name) {
            Some(VariableKind::Exogenous)
        } else if self.endogenous.iter().any(|v| v.name == name) {
            Some(VariableKind::Endogenous)
        } else {
            None
        }
    }

    pub fn domain_of(&self, name: &str) -> Option<&[String]> {
        self.exogenous
            .iter()
            .find(|v| v.name == name)
            .map(|v| v.domain.as_slice())
            .or_else(|| {
                self.endogenous
                    .iter()
                    .find(|v| v.name == name)
                    .map(|v| v.domain.as_slice())
            })
    }

    pub fn endogenous_var(&self, name: &str) -> Option<&Endogenous> {
        self.endogenous.iter().find(|v| v.name == name)
    }

    /// All variable names, exogenous first, in declaration order.
    pub fn variable_names(&self) -> impl Iterator<Item = &str> {
        self.exogenous
            .iter()
            .map(|v| v.name.as_str())
            .chain(self.endogenous.iter().map(|v| v.name.as_str()))
    }

    /// Checks that `name = value` is a legal observation or intervention target.
    pub(crate) fn check_endogenous_value(&self, name: &str, value: &str) -> Result<()> {
        match self.kind_of(name) {
            None => return Err(Error::UnknownVariable(name.to_owned())),
            Some(VariableKind::Exogenous) => return Err(Error::NotEndogenous(name.to_owned())),
            Some(VariableKind::Endogenous) => {}
        }
        let domain = self.domain_of(name).unwrap_or_default();
        if !domain.iter().any(|v| v == value) {
            return Err(Error::ValueOutsideDomain {
                variable: name.to_owned(),
                value: value.to_owned(),
            });
        }
        Ok(())
    }
}

macro_rules! assignment_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
        pub struct $name(BTreeMap<String, String>);

        impl $name {
            pub fn new() -> Self {
                Self::default()
            }

            /// Adds (or replaces) the assignment `var = value`.
            pub fn set(mut self, var: impl Into<String>, value: impl Into<String>) -> Self {
                self.0.insert(var.into(), value.into());
                self
            }

            pub fn insert(&mut self, var: impl Into<String>, value: impl Into<String>) -> Option<String> {
                self.0.insert(var.into(), value.into())
            }

            pub fn get(&self, var: &str) -> Option<&str> {
                self.0.get(var).map(String::as_str)
            }

            pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
                self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
            }

            pub fn len(&self) -> usize {
                self.0.len()
            }

            pub fn is_empty(&self) -> bool {
                self.0.is_empty()
            }

            /// Checks every assignment against `model`.
            pub fn check(&self, model: &CausalModel) -> Result<()> {
                self.iter().try_for_each(|(k, v)| model.check_endogenous_value(k, v))
            }
        }

        impl<K: Into<String>, V: Into<String>> FromIterator<(K, V)> for $name {
            fn from_iter<I: IntoIterator<Item = (K, V)>>(iter: I) -> Self {
                $name(iter.into_iter().map(|(k, v)| (k.into(), v.into())).collect())
            }
        }
    };
}

assignment_type!(
    /// Assignments `X = x` defining the submodel `M_x`.
    Intervention
);

assignment_type!(
    /// Observed values of endogenous variables.
    Evidence
);

/// Replaces the structural function of every intervened variable with the
/// constant it is assigned. Priors, roles and all other functions are kept.
pub fn submodel(model: &CausalModel, intervention: &Intervention) -> Result<CausalModel> {
    intervention.check(model)?;
    let mut out = model.clone();
    for var in &mut out.endogenous {
        if let Some(value) = intervention.get(&var.name) {
            var.function = StructuralFunction::constant(value);
        }
    }
    Ok(out)
}
