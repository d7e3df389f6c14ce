//! Exact inference by enumeration of the joint exogenous domain.
//!
//! Counterfactuals follow the three steps: [`abduce`] conditions the
//! exogenous prior on evidence, the intervention replaces mechanisms, and
//! [`predict`] pushes the posterior through the intervened model.
//!
//! All sums run over exogenous assignments in a fixed mixed-radix order
//! (last exogenous variable varies fastest), so results are bit-for-bit
//! reproducible.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scm::{self, CausalModel, Evidence, Intervention};

/// Probabilities at or below this are treated as round-off zeros when
/// enumerating contexts.
pub const ROUNDOFF_ZERO: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq)]
struct Mechanism {
    parents: Vec<usize>,
    /// Mixed-radix strides of `parents`, last parent fastest.
    strides: Vec<usize>,
    table: Vec<usize>,
}

impl Mechanism {
    fn constant(value: usize) -> Self {
        Mechanism {
            parents: Vec::new(),
            strides: Vec::new(),
            table: vec![value],
        }
    }

    #[inline]
    fn apply(&self, values: &[usize]) -> usize {
        let slot: usize = self
            .parents
            .iter()
            .zip(&self.strides)
            .map(|(&p, &s)| values[p] * s)
            .sum();
        self.table[slot]
    }
}

/// Variable ids of the audit roles.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoleIds {
    pub protected: usize,
    pub features: Vec<usize>,
    pub predictor: usize,
    pub target: usize,
}

/// A validated model with every structural function tabulated.
///
/// Variables are numbered exogenous first, then endogenous, each in
/// declaration order; values are indices into the variable's domain.
#[derive(Debug, Clone)]
pub struct CompiledModel {
    model: CausalModel,
    names: Vec<String>,
    domains: Vec<Vec<String>>,
    index: HashMap<String, usize>,
    n_exo: usize,
    priors: Vec<Vec<f64>>,
    /// Per exogenous variable, the values with positive prior mass.
    support: Vec<Vec<usize>>,
    mechanisms: Vec<Mechanism>,
    order: Vec<usize>,
    roles: Option<RoleIds>,
}

impl CompiledModel {
    pub fn new(model: CausalModel) -> Result<Self> {
        scm::validate(&model).map_err(Error::InvalidModel)?;
        let names: Vec<String> = model.variable_names().map(str::to_owned).collect();
        let index: HashMap<String, usize> = names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        let domains: Vec<Vec<String>> = model
            .exogenous
            .iter()
            .map(|v| v.domain.clone())
            .chain(model.endogenous.iter().map(|v| v.domain.clone()))
            .collect();
        let n_exo = model.exogenous.len();
        let priors: Vec<Vec<f64>> = model.exogenous.iter().map(|v| v.prior.clone()).collect();
        let support = priors
            .iter()
            .map(|p| (0..p.len()).filter(|&i| p[i] > 0.0).collect())
            .collect();

        let mut mechanisms = Vec::with_capacity(model.endogenous.len());
        for var in &model.endogenous {
            let parents: Vec<usize> = var.function.parents().iter().map(|p| index[p]).collect();
            let parent_domains: Vec<&[String]> = parents.iter().map(|&p| domains[p].as_slice()).collect();
            let table = scm::tabulate(
                &var.name,
                var.function.parents(),
                var.function.body(),
                &parent_domains,
                &var.domain,
            )
            .map_err(|v| Error::InvalidModel(vec![v]))?;
            let mut strides = vec![1; parents.len()];
            for i in (0..parents.len().saturating_sub(1)).rev() {
                strides[i] = strides[i + 1] * domains[parents[i + 1]].len();
            }
            mechanisms.push(Mechanism {
                parents,
                strides,
                table,
            });
        }
        let order = topological_order(n_exo, &mechanisms);
        let roles = model.roles.as_ref().map(|r| RoleIds {
            protected: index[&r.protected],
            features: r.features.iter().map(|f| index[f]).collect(),
            predictor: index[&r.predictor],
            target: index[&r.target],
        });
        Ok(CompiledModel {
            model,
            names,
            domains,
            index,
            n_exo,
            priors,
            support,
            mechanisms,
            order,
            roles,
        })
    }

    pub fn model(&self) -> &CausalModel {
        &self.model
    }

    pub fn name(&self) -> &str {
        &self.model.name
    }

    pub fn var_count(&self) -> usize {
        self.names.len()
    }

    pub fn exogenous_count(&self) -> usize {
        self.n_exo
    }

    pub fn var_id(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn var_name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn domain(&self, id: usize) -> &[String] {
        &self.domains[id]
    }

    pub fn is_exogenous(&self, id: usize) -> bool {
        id < self.n_exo
    }

    pub fn roles(&self) -> Option<&RoleIds> {
        self.roles.as_ref()
    }

    pub fn value_id(&self, var: usize, value: &str) -> Option<usize> {
        self.domains[var].iter().position(|v| v == value)
    }

    fn lookup(&self, name: &str) -> Result<usize> {
        self.var_id(name).ok_or_else(|| Error::UnknownVariable(name.to_owned()))
    }

    /// Resolves endogenous `var = value` pairs to ids.
    fn resolve<'a>(&self, pairs: impl Iterator<Item = (&'a str, &'a str)>) -> Result<Vec<(usize, usize)>> {
        pairs
            .map(|(var, value)| {
                let id = self.lookup(var)?;
                if self.is_exogenous(id) {
                    return Err(Error::NotEndogenous(var.to_owned()));
                }
                let v = self.value_id(id, value).ok_or_else(|| Error::ValueOutsideDomain {
                    variable: var.to_owned(),
                    value: value.to_owned(),
                })?;
                Ok((id, v))
            })
            .collect()
    }

    fn overrides(&self, intervention: &Intervention) -> Result<Vec<Option<usize>>> {
        let mut out = vec![None; self.var_count()];
        for (id, v) in self.resolve(intervention.iter())? {
            out[id] = Some(v);
        }
        Ok(out)
    }

    /// The submodel `M_x`, with the intervened mechanisms made constant.
    pub fn submodel(&self, intervention: &Intervention) -> Result<CompiledModel> {
        let model = scm::submodel(&self.model, intervention)?;
        let mut out = self.clone();
        for (id, v) in self.resolve(intervention.iter())? {
            out.mechanisms[id - self.n_exo] = Mechanism::constant(v);
        }
        out.model = model;
        Ok(out)
    }

    /// Writes the full assignment for exogenous state `u` into `out`,
    /// with `overrides` (indexed by variable id, possibly empty) replacing
    /// mechanisms.
    fn evaluate_into(&self, u: &[usize], overrides: &[Option<usize>], out: &mut [usize]) {
        out[..self.n_exo].copy_from_slice(u);
        for &id in &self.order {
            out[id] = match overrides.get(id).copied().flatten() {
                Some(v) => v,
                None => self.mechanisms[id - self.n_exo].apply(out),
            };
        }
    }

    fn prior_weight(&self, u: &[usize]) -> f64 {
        u.iter().enumerate().fold(1.0, |acc, (i, &v)| acc * self.priors[i][v])
    }

    /// Calls `f` on every exogenous assignment in the prior support, in
    /// mixed-radix order, with its prior probability.
    fn for_each_exogenous(&self, mut f: impl FnMut(&[usize], f64)) {
        if self.support.iter().any(Vec::is_empty) {
            return;
        }
        let mut digits = vec![0usize; self.n_exo];
        let mut u: Vec<usize> = self.support.iter().map(|s| s[0]).collect();
        loop {
            f(&u, self.prior_weight(&u));
            let mut i = self.n_exo;
            loop {
                if i == 0 {
                    return;
                }
                i -= 1;
                digits[i] += 1;
                if digits[i] < self.support[i].len() {
                    u[i] = self.support[i][digits[i]];
                    break;
                }
                digits[i] = 0;
                u[i] = self.support[i][0];
            }
        }
    }
}

fn topological_order(n_exo: usize, mechanisms: &[Mechanism]) -> Vec<usize> {
    let n = mechanisms.len();
    let mut placed = vec![false; n_exo + n];
    placed[..n_exo].iter_mut().for_each(|p| *p = true);
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let before = order.len();
        for (i, m) in mechanisms.iter().enumerate() {
            let id = n_exo + i;
            if !placed[id] && m.parents.iter().all(|&p| placed[p]) {
                placed[id] = true;
                order.push(id);
            }
        }
        assert!(order.len() > before, "validated model has a cycle");
    }
    order
}

/// Values of the exogenous variables, by exogenous index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ExogenousAssignment(pub Vec<usize>);

impl ExogenousAssignment {
    /// Builds an assignment from `name = value` pairs covering every
    /// exogenous variable.
    pub fn from_named<'a>(model: &CompiledModel, pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        let mut values = vec![None; model.exogenous_count()];
        for (var, value) in pairs {
            let id = model.lookup(var)?;
            if !model.is_exogenous(id) {
                return Err(Error::UnknownVariable(var.to_owned()));
            }
            values[id] = Some(model.value_id(id, value).ok_or_else(|| Error::ValueOutsideDomain {
                variable: var.to_owned(),
                value: value.to_owned(),
            })?);
        }
        values
            .into_iter()
            .enumerate()
            .map(|(i, v)| v.ok_or_else(|| Error::UnknownVariable(model.var_name(i).to_owned())))
            .collect::<Result<Vec<_>>>()
            .map(ExogenousAssignment)
    }
}

/// Values of every variable, by variable id.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Assignment(pub Vec<usize>);

impl Assignment {
    pub fn value(&self, id: usize) -> usize {
        self.0[id]
    }

    pub fn named(&self, model: &CompiledModel) -> BTreeMap<String, String> {
        self.0
            .iter()
            .enumerate()
            .map(|(i, &v)| (model.var_name(i).to_owned(), model.domain(i)[v].clone()))
            .collect()
    }
}

/// `P(u | e)` as an explicit list over the support.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExogenousPosterior {
    pub support: Vec<(ExogenousAssignment, f64)>,
}

impl ExogenousPosterior {
    pub fn total(&self) -> f64 {
        self.support.iter().map(|(_, p)| p).sum()
    }
}

/// Joint distribution over a tuple of variables, stored densely over the
/// product domain (last variable fastest).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Distribution {
    variables: Vec<String>,
    domains: Vec<Vec<String>>,
    probs: Vec<f64>,
}

impl Distribution {
    pub fn zeros(variables: Vec<String>, domains: Vec<Vec<String>>) -> Self {
        let size = domains.iter().map(Vec::len).product();
        Distribution {
            variables,
            domains,
            probs: vec![0.0; size],
        }
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn domains(&self) -> &[Vec<String>] {
        &self.domains
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn slot(&self, values: &[usize]) -> usize {
        values
            .iter()
            .zip(&self.domains)
            .fold(0, |acc, (&v, d)| acc * d.len() + v)
    }

    pub fn add(&mut self, values: &[usize], p: f64) {
        let slot = self.slot(values);
        self.probs[slot] += p;
    }

    pub fn prob(&self, values: &[usize]) -> f64 {
        self.probs[self.slot(values)]
    }

    /// Probability of a tuple given by value names; `None` if a name is
    /// outside its domain or the arity is wrong.
    pub fn get(&self, values: &[&str]) -> Option<f64> {
        if values.len() != self.domains.len() {
            return None;
        }
        let idx = values
            .iter()
            .zip(&self.domains)
            .map(|(v, d)| d.iter().position(|x| x == v))
            .collect::<Option<Vec<_>>>()?;
        Some(self.prob(&idx))
    }

    /// Value-index tuple of a dense slot.
    pub fn tuple(&self, mut slot: usize) -> Vec<usize> {
        let mut out = vec![0; self.domains.len()];
        for (i, d) in self.domains.iter().enumerate().rev() {
            out[i] = slot % d.len();
            slot /= d.len();
        }
        out
    }

    /// Rows in canonical domain order, zeros included.
    pub fn rows(&self) -> impl Iterator<Item = (Vec<&str>, f64)> + '_ {
        (0..self.probs.len()).map(move |slot| {
            let names = self
                .tuple(slot)
                .iter()
                .zip(&self.domains)
                .map(|(&v, d)| d[v].as_str())
                .collect();
            (names, self.probs[slot])
        })
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Largest element-wise difference; infinite if the shapes differ.
    pub fn max_abs_diff(&self, other: &Distribution) -> f64 {
        if self.domains != other.domains || self.variables != other.variables {
            return f64::INFINITY;
        }
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Total variation distance to `other` (same shape assumed).
    pub fn total_variation(&self, other: &Distribution) -> f64 {
        0.5 * self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }
}

/// Solves the model for exogenous state `u`.
pub fn evaluate(model: &CompiledModel, u: &ExogenousAssignment) -> Assignment {
    let mut out = vec![0; model.var_count()];
    model.evaluate_into(&u.0, &[], &mut out);
    Assignment(out)
}

/// Conditions the exogenous prior on `evidence`.
pub fn abduce(model: &CompiledModel, evidence: &Evidence) -> Result<ExogenousPosterior> {
    let observed = model.resolve(evidence.iter())?;
    let mut support = Vec::new();
    let mut values = vec![0; model.var_count()];
    let mut total = 0.0;
    model.for_each_exogenous(|u, w| {
        model.evaluate_into(u, &[], &mut values);
        if observed.iter().all(|&(id, v)| values[id] == v) {
            total += w;
            support.push((ExogenousAssignment(u.to_vec()), w));
        }
    });
    if support.is_empty() || total <= 0.0 {
        return Err(Error::InconsistentEvidence);
    }
    for (_, p) in &mut support {
        *p /= total;
    }
    Ok(ExogenousPosterior { support })
}

/// Distribution of `query` in the submodel for `intervention` when the
/// exogenous state follows `posterior`.
pub fn predict(
    model: &CompiledModel,
    posterior: &ExogenousPosterior,
    intervention: &Intervention,
    query: &[&str],
) -> Result<Distribution> {
    let overrides = model.overrides(intervention)?;
    let ids = query.iter().map(|q| model.lookup(q)).collect::<Result<Vec<_>>>()?;
    Ok(predict_ids(model, posterior, &overrides, &ids))
}

pub(crate) fn predict_ids(
    model: &CompiledModel,
    posterior: &ExogenousPosterior,
    overrides: &[Option<usize>],
    ids: &[usize],
) -> Distribution {
    let mut dist = Distribution::zeros(
        ids.iter().map(|&i| model.var_name(i).to_owned()).collect(),
        ids.iter().map(|&i| model.domain(i).to_vec()).collect(),
    );
    let mut values = vec![0; model.var_count()];
    let mut tuple = vec![0; ids.len()];
    for (u, p) in &posterior.support {
        model.evaluate_into(&u.0, overrides, &mut values);
        for (t, &id) in tuple.iter_mut().zip(ids) {
            *t = values[id];
        }
        dist.add(&tuple, *p);
    }
    dist
}

/// `P(query_{intervention} | evidence)` by abduction, action and prediction.
pub fn counterfactual_query(
    model: &CompiledModel,
    evidence: &Evidence,
    intervention: &Intervention,
    query: &[&str],
) -> Result<Distribution> {
    // Reject malformed inputs before looking at probabilities.
    model.overrides(intervention)?;
    for q in query {
        model.lookup(q)?;
    }
    let posterior = abduce(model, evidence)?;
    predict(model, &posterior, intervention, query)
}

/// An observed audit context `X = x, A = a`.
#[derive(Debug, Clone, PartialEq, PartialOrd, Serialize)]
pub struct Context {
    /// Value ids aligned with the model's feature list.
    pub features: Vec<usize>,
    pub protected: usize,
    pub probability: f64,
}

impl Context {
    pub fn evidence(&self, model: &CompiledModel) -> Result<Evidence> {
        let roles = model.roles().ok_or(Error::MissingRoles)?;
        if roles.features.len() != self.features.len() {
            return Err(Error::ContextArity {
                expected: roles.features.len(),
                got: self.features.len(),
            });
        }
        let mut e = Evidence::new();
        for (&id, &v) in roles.features.iter().zip(&self.features) {
            e.insert(model.var_name(id), &model.domain(id)[v]);
        }
        e.insert(
            model.var_name(roles.protected),
            &model.domain(roles.protected)[self.protected],
        );
        Ok(e)
    }

    /// `name=value` pairs, features first, protected attribute last.
    pub fn pairs(&self, model: &CompiledModel) -> Vec<(String, String)> {
        let Some(roles) = model.roles() else { return Vec::new() };
        roles
            .features
            .iter()
            .zip(&self.features)
            .chain(std::iter::once((&roles.protected, &self.protected)))
            .map(|(&id, &v)| (model.var_name(id).to_owned(), model.domain(id)[v].clone()))
            .collect()
    }

    pub fn describe(&self, model: &CompiledModel) -> String {
        self.pairs(model)
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

/// Every context `(x, a)` with positive observational probability, in
/// canonical domain order.
pub fn observational_contexts(model: &CompiledModel) -> Result<Vec<Context>> {
    let roles = model.roles().ok_or(Error::MissingRoles)?;
    let prior = abduce(model, &Evidence::new())?;
    let mut ids = roles.features.clone();
    ids.push(roles.protected);
    let joint = predict_ids(model, &prior, &[], &ids);
    Ok((0..joint.len())
        .filter(|&slot| joint.probabilities()[slot] > ROUNDOFF_ZERO)
        .map(|slot| {
            let mut tuple = joint.tuple(slot);
            let protected = tuple.pop().unwrap_or(0);
            Context {
                features: tuple,
                protected,
                probability: joint.probabilities()[slot],
            }
        })
        .collect())
}
