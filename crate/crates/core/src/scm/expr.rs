//! Structural function bodies.
//!
//! A body is a small expression tree over symbolic values. Evaluation is
//! purely symbolic: a parent reference yields the parent's value name, and
//! the caller decides whether that name belongs to the target's domain.

use std::fmt;

use serde::Serialize;

/// Expression tree of a structural function.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Expr {
    /// A constant value of the target's domain.
    Value(String),
    /// The current value of a parent variable.
    Var(String),
    /// `if var == value then .. else ..`
    IfEq {
        var: String,
        value: String,
        then: Box<Expr>,
        otherwise: Box<Expr>,
    },
    Table(Table),
}

/// Lookup table keyed by tuples of parent values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub keys: Vec<String>,
    pub rows: Vec<TableRow>,
    pub default: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub key: Vec<String>,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalError {
    Unbound(String),
    /// No table row matched and the table has no default.
    NoMatch(Vec<String>),
}

impl Expr {
    pub fn value(v: impl Into<String>) -> Self {
        Expr::Value(v.into())
    }

    pub fn var(v: impl Into<String>) -> Self {
        Expr::Var(v.into())
    }

    pub fn if_eq(var: impl Into<String>, value: impl Into<String>, then: Expr, otherwise: Expr) -> Self {
        Expr::IfEq {
            var: var.into(),
            value: value.into(),
            then: Box::new(then),
            otherwise: Box::new(otherwise),
        }
    }

    /// Variables read by this expression, in order of first appearance.
    pub fn references(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_refs(&mut out);
        out
    }

    fn collect_refs<'a>(&'a self, out: &mut Vec<&'a str>) {
        let mut push = |name: &'a str| {
            if !out.contains(&name) {
                out.push(name);
            }
        };
        match self {
            Expr::Value(_) => {}
            Expr::Var(v) => push(v),
            Expr::IfEq {
                var, then, otherwise, ..
            } => {
                push(var);
                then.collect_refs(out);
                otherwise.collect_refs(out);
            }
            Expr::Table(t) => t.keys.iter().for_each(|k| push(k)),
        }
    }

    /// Every literal this expression can return (`false`) and every parent
    /// it can pass through unchanged (`true`).
    pub(crate) fn outputs(&self) -> Vec<(&str, bool)> {
        let mut out = Vec::new();
        self.collect_outputs(&mut out);
        out
    }

    fn collect_outputs<'a>(&'a self, out: &mut Vec<(&'a str, bool)>) {
        match self {
            Expr::Value(v) => out.push((v, false)),
            Expr::Var(v) => out.push((v, true)),
            Expr::IfEq { then, otherwise, .. } => {
                then.collect_outputs(out);
                otherwise.collect_outputs(out);
            }
            Expr::Table(t) => {
                out.extend(t.rows.iter().map(|r| (r.value.as_str(), false)));
                out.extend(t.default.iter().map(|d| (d.as_str(), false)));
            }
        }
    }

    /// Evaluates the body, reading parent values through `lookup`.
    pub fn eval<'a, F>(&'a self, lookup: &F) -> Result<&'a str, EvalError>
    where
        F: Fn(&str) -> Option<&'a str>,
    {
        let read = |name: &str| lookup(name).ok_or_else(|| EvalError::Unbound(name.to_owned()));
        match self {
            Expr::Value(v) => Ok(v),
            Expr::Var(v) => read(v),
            Expr::IfEq {
                var,
                value,
                then,
                otherwise,
            } => {
                if read(var)? == value.as_str() {
                    then.eval(lookup)
                } else {
                    otherwise.eval(lookup)
                }
            }
            Expr::Table(t) => {
                let key = t.keys.iter().map(|k| read(k)).collect::<Result<Vec<_>, _>>()?;
                t.rows
                    .iter()
                    .find(|row| row.key.iter().zip(&key).all(|(a, b)| a == b))
                    .map(|row| row.value.as_str())
                    .or(t.default.as_deref())
                    .ok_or_else(|| EvalError::NoMatch(key.iter().map(|s| s.to_string()).collect()))
            }
        }
    }
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::Unbound(v) => write!(f, "unbound variable `{v}`"),
            EvalError::NoMatch(key) => write!(f, "no table row for ({})", key.join(", ")),
        }
    }
}

/// The mechanism of one endogenous variable. Parents are derived from the
/// body, so a function never reads an undeclared parent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructuralFunction {
    parents: Vec<String>,
    body: Expr,
}

impl StructuralFunction {
    pub fn new(body: Expr) -> Self {
        let parents = body.references().into_iter().map(str::to_owned).collect();
        StructuralFunction { parents, body }
    }

    pub fn constant(value: impl Into<String>) -> Self {
        Self::new(Expr::Value(value.into()))
    }

    pub fn parents(&self) -> &[String] {
        &self.parents
    }

    pub fn body(&self) -> &Expr {
        &self.body
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.body, Expr::Value(_))
    }
}
