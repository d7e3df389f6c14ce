use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::Serialize;

use super::{CausalModel, Endogenous, Expr, VariableKind, NORMALIZATION_TOLERANCE};
use crate::dsl::is_identifier;

/// Upper bound on the number of parent-value combinations of one function.
const MAX_TABLE_SIZE: usize = 1 << 20;

/// One violated model invariant. Every violation names the offending
/// variable (or role) through [`Violation::site`].
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    DuplicateName {
        variable: String,
    },
    InvalidIdentifier {
        variable: String,
        identifier: String,
    },
    EmptyDomain {
        variable: String,
    },
    DuplicateValue {
        variable: String,
        value: String,
    },
    PriorLength {
        variable: String,
        expected: usize,
        got: usize,
    },
    InvalidProbability {
        variable: String,
        value: f64,
    },
    PriorNotNormalized {
        variable: String,
        sum: f64,
    },
    UnknownParent {
        variable: String,
        parent: String,
    },
    /// A comparison or table key uses a value outside the parent's domain.
    UnknownValue {
        variable: String,
        parent: String,
        value: String,
    },
    OutputOutsideDomain {
        variable: String,
        value: String,
    },
    /// A value literal that is also a variable name cannot be written unambiguously.
    AmbiguousLiteral {
        variable: String,
        value: String,
    },
    TableArity {
        variable: String,
        expected: usize,
        got: usize,
    },
    NotTotal {
        variable: String,
        missing: Vec<String>,
    },
    TableTooLarge {
        variable: String,
        combinations: usize,
    },
    Cycle {
        path: Vec<String>,
    },
    UnknownRoleVariable {
        role: &'static str,
        variable: String,
    },
    RoleNotEndogenous {
        role: &'static str,
        variable: String,
    },
    RoleConflict {
        role: &'static str,
        variable: String,
        other: &'static str,
    },
    /// The predictor reads something that is not determined by the protected
    /// attribute, the features, or their endogenous ancestors.
    PredictorReadsLatent {
        variable: String,
        parent: String,
    },
}

/// Where in a model a violation lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Site<'a> {
    Variable(&'a str),
    Prior(&'a str),
    Function(&'a str),
    Role(&'static str, &'a str),
}

impl Violation {
    pub fn site(&self) -> Site<'_> {
        use Violation::*;
        match self {
            DuplicateName { variable }
            | InvalidIdentifier { variable, .. }
            | EmptyDomain { variable }
            | DuplicateValue { variable, .. } => Site::Variable(variable),
            PriorLength { variable, .. }
            | InvalidProbability { variable, .. }
            | PriorNotNormalized { variable, .. } => Site::Prior(variable),
            UnknownParent { variable, .. }
            | UnknownValue { variable, .. }
            | OutputOutsideDomain { variable, .. }
            | AmbiguousLiteral { variable, .. }
            | TableArity { variable, .. }
            | NotTotal { variable, .. }
            | TableTooLarge { variable, .. } => Site::Function(variable),
            Cycle { path } => Site::Function(&path[0]),
            UnknownRoleVariable { role, variable }
            | RoleNotEndogenous { role, variable }
            | RoleConflict { role, variable, .. } => Site::Role(role, variable),
            PredictorReadsLatent { variable, .. } => Site::Role("predictor", variable),
        }
    }

    /// The offending variable.
    pub fn variable(&self) -> &str {
        match self.site() {
            Site::Variable(v) | Site::Prior(v) | Site::Function(v) | Site::Role(_, v) => v,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            DuplicateName { variable } => write!(f, "duplicate variable `{variable}`"),
            InvalidIdentifier { variable, identifier } => {
                write!(f, "`{identifier}` (in `{variable}`) is not a valid identifier")
            }
            EmptyDomain { variable } => write!(f, "`{variable}` has an empty domain"),
            DuplicateValue { variable, value } => {
                write!(f, "value `{value}` appears twice in the domain of `{variable}`")
            }
            PriorLength { variable, expected, got } => {
                write!(f, "prior of `{variable}` has {got} entries, domain has {expected}")
            }
            InvalidProbability { variable, value } => {
                write!(f, "prior of `{variable}` contains invalid probability {value}")
            }
            PriorNotNormalized { variable, sum } => {
                write!(f, "prior not normalized (sum {sum}) for `{variable}`")
            }
            UnknownParent { variable, parent } => {
                write!(f, "function of `{variable}` reads undeclared variable `{parent}`")
            }
            UnknownValue { variable, parent, value } => write!(
                f,
                "function of `{variable}` compares `{parent}` with `{value}`, which is not in its domain"
            ),
            OutputOutsideDomain { variable, value } => {
                write!(f, "function of `{variable}` can produce `{value}`, which is not in its domain")
            }
            AmbiguousLiteral { variable, value } => write!(
                f,
                "function of `{variable}` uses literal `{value}`, which is also a variable name"
            ),
            TableArity { variable, expected, got } => write!(
                f,
                "table row in `{variable}` has {got} key values, table is keyed by {expected}"
            ),
            NotTotal { variable, missing } => write!(
                f,
                "function of `{variable}` is not total: no value for ({})",
                missing.join(", ")
            ),
            TableTooLarge { variable, combinations } => write!(
                f,
                "function of `{variable}` has {combinations} parent combinations (limit {MAX_TABLE_SIZE})"
            ),
            Cycle { path } if path.len() == 2 => write!(f, "cycle: {}↔{}", path[0], path[1]),
            Cycle { path } => write!(f, "cycle: {}→{}", path.join("→"), path[0]),
            UnknownRoleVariable { role, variable } => {
                write!(f, "{role} `{variable}` is not a declared variable")
            }
            RoleNotEndogenous { role, variable } => {
                write!(f, "{role} `{variable}` must be an endogenous variable")
            }
            RoleConflict { role, variable, other } => {
                write!(f, "{role} `{variable}` is also declared as {other}")
            }
            PredictorReadsLatent { variable, parent } => write!(
                f,
                "predictor `{variable}` reads `{parent}`, which is not determined by the protected attribute and features"
            ),
        }
    }
}

/// Checks every well-formedness invariant of `model`. An empty diagnostic
/// list means the model is valid.
pub fn validate(model: &CausalModel) -> Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    check_declarations(model, &mut out);
    check_priors(model, &mut out);
    let domains = domain_map(model);
    for var in &model.endogenous {
        check_function(model, var, &domains, &mut out);
    }
    let acyclic = match find_cycle(model) {
        Some(path) => {
            out.push(Violation::Cycle { path });
            false
        }
        None => true,
    };
    check_roles(model, acyclic, &mut out);
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

fn domain_map(model: &CausalModel) -> HashMap<&str, &[String]> {
    let mut map = HashMap::new();
    for v in &model.exogenous {
        map.entry(v.name.as_str()).or_insert(v.domain.as_slice());
    }
    for v in &model.endogenous {
        map.entry(v.name.as_str()).or_insert(v.domain.as_slice());
    }
    map
}

fn check_declarations(model: &CausalModel, out: &mut Vec<Violation>) {
    let mut seen = HashSet::new();
    let decls = model
        .exogenous
        .iter()
        .map(|v| (&v.name, &v.domain))
        .chain(model.endogenous.iter().map(|v| (&v.name, &v.domain)));
    for (name, domain) in decls {
        if !seen.insert(name.as_str()) {
            out.push(Violation::DuplicateName { variable: name.clone() });
        }
        if !is_identifier(name) {
            out.push(Violation::InvalidIdentifier {
                variable: name.clone(),
                identifier: name.clone(),
            });
        }
        if domain.is_empty() {
            out.push(Violation::EmptyDomain { variable: name.clone() });
        }
        let mut values = HashSet::new();
        for value in domain {
            if !values.insert(value) {
                out.push(Violation::DuplicateValue {
                    variable: name.clone(),
                    value: value.clone(),
                });
            }
            if !is_identifier(value) {
                out.push(Violation::InvalidIdentifier {
                    variable: name.clone(),
                    identifier: value.clone(),
                });
            }
        }
    }
}

fn check_priors(model: &CausalModel, out: &mut Vec<Violation>) {
    for var in &model.exogenous {
        if var.prior.len() != var.domain.len() {
            out.push(Violation::PriorLength {
                variable: var.name.clone(),
                expected: var.domain.len(),
                got: var.prior.len(),
            });
        }
        if let Some(&bad) = var.prior.iter().find(|p| !p.is_finite() || **p < 0.0) {
            out.push(Violation::InvalidProbability {
                variable: var.name.clone(),
                value: bad,
            });
            continue;
        }
        let sum: f64 = var.prior.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
            out.push(Violation::PriorNotNormalized {
                variable: var.name.clone(),
                sum,
            });
        }
    }
}

fn check_function(model: &CausalModel, var: &Endogenous, domains: &HashMap<&str, &[String]>, out: &mut Vec<Violation>) {
    let name = &var.name;
    let before = out.len();
    for parent in var.function.parents() {
        if !domains.contains_key(parent.as_str()) {
            out.push(Violation::UnknownParent {
                variable: name.clone(),
                parent: parent.clone(),
            });
        }
    }
    if out.len() > before {
        return;
    }
    check_literals(model, name, var.function.body(), domains, out);
    for (value, is_var) in var.function.body().outputs() {
        if !is_var && !var.domain.iter().any(|d| d == value) {
            out.push(Violation::OutputOutsideDomain {
                variable: name.clone(),
                value: value.to_owned(),
            });
        }
    }
    if out.len() > before {
        return;
    }
    let parent_domains: Vec<&[String]> = var.function.parents().iter().map(|p| domains[p.as_str()]).collect();
    if let Err(v) = tabulate(
        name,
        var.function.parents(),
        var.function.body(),
        &parent_domains,
        &var.domain,
    ) {
        out.push(v);
    }
}

fn check_literals(
    model: &CausalModel,
    variable: &str,
    expr: &Expr,
    domains: &HashMap<&str, &[String]>,
    out: &mut Vec<Violation>,
) {
    let mut literal = |value: &str| {
        if !is_identifier(value) {
            out.push(Violation::InvalidIdentifier {
                variable: variable.to_owned(),
                identifier: value.to_owned(),
            });
        } else if model.kind_of(value).is_some() {
            out.push(Violation::AmbiguousLiteral {
                variable: variable.to_owned(),
                value: value.to_owned(),
            });
        }
    };
    let in_domain = |parent: &str, value: &str| domains[parent].iter().any(|d| d == value);
    match expr {
        Expr::Value(v) => literal(v),
        Expr::Var(_) => {}
        Expr::IfEq {
            var,
            value,
            then,
            otherwise,
        } => {
            literal(value);
            if !in_domain(var, value) {
                out.push(Violation::UnknownValue {
                    variable: variable.to_owned(),
                    parent: var.clone(),
                    value: value.clone(),
                });
            }
            check_literals(model, variable, then, domains, out);
            check_literals(model, variable, otherwise, domains, out);
        }
        Expr::Table(table) => {
            let mut pending = Vec::new();
            for row in &table.rows {
                if row.key.len() != table.keys.len() {
                    pending.push(Violation::TableArity {
                        variable: variable.to_owned(),
                        expected: table.keys.len(),
                        got: row.key.len(),
                    });
                    continue;
                }
                for (parent, value) in table.keys.iter().zip(&row.key) {
                    literal(value);
                    if !in_domain(parent, value) {
                        pending.push(Violation::UnknownValue {
                            variable: variable.to_owned(),
                            parent: parent.clone(),
                            value: value.clone(),
                        });
                    }
                }
                literal(&row.value);
            }
            if let Some(d) = &table.default {
                literal(d);
            }
            out.extend(pending);
        }
    }
}

/// Evaluates `body` on every combination of parent values and returns the
/// resulting target-domain indices in mixed-radix order (last parent varies
/// fastest). Fails with the first combination that has no value in
/// `target_domain`.
pub fn tabulate(
    variable: &str,
    parents: &[String],
    body: &Expr,
    parent_domains: &[&[String]],
    target_domain: &[String],
) -> Result<Vec<usize>, Violation> {
    let combinations = parent_domains
        .iter()
        .try_fold(1usize, |acc, d| acc.checked_mul(d.len()))
        .unwrap_or(usize::MAX);
    if combinations > MAX_TABLE_SIZE {
        return Err(Violation::TableTooLarge {
            variable: variable.to_owned(),
            combinations,
        });
    }
    let mut table = Vec::with_capacity(combinations);
    let mut digits = vec![0usize; parents.len()];
    for _ in 0..combinations {
        let lookup = |name: &str| {
            parents
                .iter()
                .position(|p| p == name)
                .map(|i| parent_domains[i][digits[i]].as_str())
        };
        let missing = || Violation::NotTotal {
            variable: variable.to_owned(),
            missing: digits
                .iter()
                .enumerate()
                .map(|(i, &d)| format!("{}={}", parents[i], parent_domains[i][d]))
                .collect(),
        };
        let value = body.eval(&lookup).map_err(|_| missing())?;
        match target_domain.iter().position(|d| d == value) {
            Some(index) => table.push(index),
            None => {
                return Err(Violation::OutputOutsideDomain {
                    variable: variable.to_owned(),
                    value: value.to_owned(),
                })
            }
        }
        for i in (0..digits.len()).rev() {
            digits[i] += 1;
            if digits[i] < parent_domains[i].len() {
                break;
            }
            digits[i] = 0;
        }
    }
    Ok(table)
}

/// Returns one directed cycle among endogenous variables, if any, listed in
/// edge order starting from the earliest declared member.
fn find_cycle(model: &CausalModel) -> Option<Vec<String>> {
    let index: HashMap<&str, usize> = model
        .endogenous
        .iter()
        .enumerate()
        .map(|(i, v)| (v.name.as_str(), i))
        .collect();
    let n = model.endogenous.len();
    let mut parents = vec![Vec::new(); n];
    for (i, v) in model.endogenous.iter().enumerate() {
        for p in v.function.parents() {
            if let Some(&j) = index.get(p.as_str()) {
                parents[i].push(j);
            }
        }
    }
    // Iterative DFS along parent edges; a back edge closes a cycle.
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let mut mark = vec![Mark::New; n];
    for root in 0..n {
        if mark[root] != Mark::New {
            continue;
        }
        let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
        mark[root] = Mark::Active;
        while let Some(top) = stack.len().checked_sub(1) {
            let (node, next) = stack[top];
            if next < parents[node].len() {
                let p = parents[node][next];
                stack[top].1 += 1;
                match mark[p] {
                    Mark::New => {
                        mark[p] = Mark::Active;
                        stack.push((p, 0));
                    }
                    Mark::Active => {
                        let start = stack.iter().position(|&(s, _)| s == p).unwrap_or(0);
                        // stack runs child -> parent; reverse into edge order
                        let mut cycle: Vec<usize> = stack[start..].iter().map(|&(s, _)| s).collect();
                        cycle.reverse();
                        let min = cycle
                            .iter()
                            .enumerate()
                            .min_by_key(|(_, &v)| v)
                            .map(|(i, _)| i)
                            .unwrap_or(0);
                        cycle.rotate_left(min);
                        return Some(cycle.into_iter().map(|i| model.endogenous[i].name.clone()).collect());
                    }
                    Mark::Done => {}
                }
            } else {
                mark[node] = Mark::Done;
                stack.pop();
            }
        }
    }
    None
}

fn check_roles(model: &CausalModel, acyclic: bool, out: &mut Vec<Violation>) {
    let Some(roles) = &model.roles else { return };
    let mut named: Vec<(&'static str, &str)> = vec![
        ("protected", roles.protected.as_str()),
        ("predictor", roles.predictor.as_str()),
        ("target", roles.target.as_str()),
    ];
    named.extend(roles.features.iter().map(|f| ("feature", f.as_str())));

    let before = out.len();
    for &(role, var) in &named {
        match model.kind_of(var) {
            None => out.push(Violation::UnknownRoleVariable {
                role,
                variable: var.to_owned(),
            }),
            Some(VariableKind::Exogenous) => out.push(Violation::RoleNotEndogenous {
                role,
                variable: var.to_owned(),
            }),
            Some(VariableKind::Endogenous) => {}
        }
    }
    for (i, &(role, var)) in named.iter().enumerate() {
        if let Some(&(other, _)) = named[..i].iter().find(|(_, v)| *v == var) {
            out.push(Violation::RoleConflict {
                role,
                variable: var.to_owned(),
                other,
            });
        }
    }
    if out.len() > before || !acyclic {
        return;
    }

    // Variables the predictor may read: A, X, their endogenous ancestors,
    // and any endogenous variable computed only from those.
    let endo: HashMap<&str, &Endogenous> = model.endogenous.iter().map(|v| (v.name.as_str(), v)).collect();
    let mut allowed: HashSet<&str> = HashSet::new();
    let mut frontier: Vec<&str> = std::iter::once(roles.protected.as_str())
        .chain(roles.features.iter().map(String::as_str))
        .collect();
    while let Some(v) = frontier.pop() {
        if let Some(decl) = endo.get(v) {
            if allowed.insert(v) {
                frontier.extend(decl.function.parents().iter().map(String::as_str));
            }
        }
    }
    let mut memo: HashMap<&str, bool> = HashMap::new();
    fn determined<'m>(
        v: &'m str,
        endo: &HashMap<&'m str, &'m Endogenous>,
        allowed: &HashSet<&'m str>,
        memo: &mut HashMap<&'m str, bool>,
    ) -> bool {
        if allowed.contains(v) {
            return true;
        }
        if let Some(&known) = memo.get(v) {
            return known;
        }
        let result = match endo.get(v) {
            Some(decl) => decl
                .function
                .parents()
                .iter()
                .all(|p| determined(p, endo, allowed, memo)),
            None => false,
        };
        memo.insert(v, result);
        result
    }
    if let Some(predictor) = endo.get(roles.predictor.as_str()) {
        for parent in predictor.function.parents() {
            if !determined(parent, &endo, &allowed, &mut memo) {
                out.push(Violation::PredictorReadsLatent {
                    variable: roles.predictor.clone(),
                    parent: parent.clone(),
                });
            }
        }
    }
}
