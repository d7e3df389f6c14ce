//! Seeded random models for differential and property testing.

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scm::{
    CausalModel, Endogenous, Evidence, Exogenous, Expr, Intervention, Roles, StructuralFunction, Table, TableRow,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub min_vars: usize,
    pub max_vars: usize,
    pub min_domain: usize,
    pub max_domain: usize,
    pub edge_probability: f64,
    /// Chance that an exogenous prior gets an exact zero entry.
    pub zero_prior_probability: f64,
}

impl Default for Shape {
    fn default() -> Self {
        Shape {
            min_vars: 2,
            max_vars: 6,
            min_domain: 2,
            max_domain: 3,
            edge_probability: 0.5,
            zero_prior_probability: 0.1,
        }
    }
}

fn values(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("s{i}")).collect()
}

/// A point drawn uniformly from the probability simplex.
pub fn flat_simplex(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let draws: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = draws.iter().sum();
    draws.iter().map(|d| d / total).collect()
}

fn prior(rng: &mut impl Rng, n: usize, shape: &Shape) -> Vec<f64> {
    let mut p = flat_simplex(rng, n);
    if n > 1 && rng.random_bool(shape.zero_prior_probability) {
        let i = rng.random_range(0..n);
        p[i] = 0.0;
        let total: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= total);
    }
    p
}

fn pick<R: Rng + ?Sized>(rng: &mut R, domain: &[String]) -> String {
    domain.choose(rng).expect("non-empty domain").clone()
}

/// A random total function of `parents`: a constant, a copy of a parent with
/// a matching domain, or a table, sometimes compressed with a default row.
fn random_body(rng: &mut impl Rng, parents: &[(String, Vec<String>)], domain: &[String]) -> Expr {
    if parents.is_empty() {
        return Expr::value(pick(rng, domain));
    }
    if parents.len() == 1 && parents[0].1 == domain && rng.random_bool(0.2) {
        return Expr::var(parents[0].0.clone());
    }
    if parents.len() == 1 && rng.random_bool(0.2) {
        let (p, d) = &parents[0];
        let v = d.choose(rng).expect("non-empty domain").clone();
        return Expr::if_eq(
            p.clone(),
            v,
            Expr::value(pick(rng, domain)),
            Expr::value(pick(rng, domain)),
        );
    }
    let mut keys: Vec<Vec<String>> = vec![Vec::new()];
    for (_, d) in parents {
        keys = keys
            .into_iter()
            .flat_map(|k| {
                d.iter().map(move |v| {
                    let mut k = k.clone();
                    k.push(v.clone());
                    k
                })
            })
            .collect();
    }
    let outputs: Vec<String> = keys.iter().map(|_| pick(rng, domain)).collect();
    let default = if rng.random_bool(0.3) {
        let mut counts = BTreeMap::new();
        for o in &outputs {
            *counts.entry(o.clone()).or_insert(0) += 1;
        }
        counts.into_iter().max_by_key(|&(_, c)| c).map(|(v, _)| v)
    } else {
        None
    };
    let rows = keys
        .into_iter()
        .zip(outputs)
        .filter(|(_, o)| Some(o) != default.as_ref())
        .map(|(key, value)| TableRow { key, value })
        .collect();
    Expr::Table(Table {
        keys: parents.iter().map(|(p, _)| p.clone()).collect(),
        rows,
        default,
    })
}

fn endogenous(rng: &mut impl Rng, name: &str, domain: Vec<String>, parents: &[(String, Vec<String>)]) -> Endogenous {
    let body = random_body(rng, parents, &domain);
    Endogenous {
        name: name.to_owned(),
        domain,
        function: StructuralFunction::new(body),
    }
}

/// A random acyclic model. Endogenous variables are declared in shuffled
/// order so that evaluation order has to be recovered from the functions.
pub fn random_model(rng: &mut impl Rng, shape: &Shape) -> CausalModel {
    let n = rng.random_range(shape.min_vars.max(2)..=shape.max_vars.max(2));
    let n_exo = rng.random_range(1..n);
    let mut declared: Vec<(String, Vec<String>)> = Vec::new();
    let mut model = CausalModel::new("random");
    for i in 0..n_exo {
        let domain = values(rng.random_range(shape.min_domain..=shape.max_domain));
        let name = format!("u{i}");
        model.exogenous.push(Exogenous {
            name: name.clone(),
            prior: prior(rng, domain.len(), shape),
            domain: domain.clone(),
        });
        declared.push((name, domain));
    }
    for i in 0..n - n_exo {
        let domain = values(rng.random_range(shape.min_domain..=shape.max_domain));
        let parents: Vec<_> = declared
            .iter()
            .filter(|_| rng.random_bool(shape.edge_probability))
            .cloned()
            .collect();
        let name = format!("v{i}");
        model.endogenous.push(endogenous(rng, &name, domain.clone(), &parents));
        declared.push((name, domain));
    }
    model.endogenous.shuffle(rng);
    model
}

fn subset<R: Rng + ?Sized>(
    rng: &mut R,
    from: &[(String, Vec<String>)],
    at_least_one: bool,
) -> Vec<(String, Vec<String>)> {
    let mut out: Vec<_> = from.iter().filter(|_| rng.random_bool(0.5)).cloned().collect();
    if out.is_empty() && at_least_one && !from.is_empty() {
        out.push(from.choose(rng).expect("non-empty").clone());
    }
    out
}

/// A random model with audit roles. With `target_reads_protected` false,
/// the target has no ancestor that descends from the protected attribute.
pub fn random_audit_model(rng: &mut impl Rng, target_reads_protected: bool) -> CausalModel {
    let shape = Shape::default();
    let mut model = CausalModel::new("audit");
    let mut roots = Vec::new();
    for i in 0..rng.random_range(1..=3) {
        let domain = values(rng.random_range(2..=3));
        let name = format!("u{i}");
        model.exogenous.push(Exogenous {
            name: name.clone(),
            prior: prior(rng, domain.len(), &shape),
            domain: domain.clone(),
        });
        roots.push((name, domain));
    }
    let a_domain = values(rng.random_range(2..=3));
    let a_parents = subset(rng, &roots, true);
    model
        .endogenous
        .push(endogenous(rng, "prot", a_domain.clone(), &a_parents));
    let a = ("prot".to_owned(), a_domain);

    // (name, domain, descends from the protected attribute)
    let mut features: Vec<(String, Vec<String>, bool)> = Vec::new();
    for i in 0..rng.random_range(0..=2) {
        let mut pool = roots.clone();
        pool.push(a.clone());
        pool.extend(features.iter().map(|(n, d, _)| (n.clone(), d.clone())));
        let parents = subset(rng, &pool, false);
        let tainted = parents
            .iter()
            .any(|(p, _)| p == "prot" || features.iter().any(|(n, _, t)| n == p && *t));
        let domain = values(rng.random_range(2..=3));
        let name = format!("f{i}");
        model.endogenous.push(endogenous(rng, &name, domain.clone(), &parents));
        features.push((name, domain, tainted));
    }

    let mut pool = roots.clone();
    if target_reads_protected {
        pool.push(a.clone());
    }
    pool.extend(
        features
            .iter()
            .filter(|(_, _, t)| target_reads_protected || !t)
            .map(|(n, d, _)| (n.clone(), d.clone())),
    );
    let parents = subset(rng, &pool, false);
    let domain = values(rng.random_range(2..=3));
    model.endogenous.push(endogenous(rng, "targ", domain, &parents));

    let mut pool = vec![a.clone()];
    pool.extend(features.iter().map(|(n, d, _)| (n.clone(), d.clone())));
    let parents = subset(rng, &pool, false);
    let domain = values(rng.random_range(2..=3));
    model.endogenous.push(endogenous(rng, "pred", domain, &parents));

    model.endogenous.shuffle(rng);
    model.roles = Some(Roles {
        protected: "prot".to_owned(),
        features: features.into_iter().map(|(n, _, _)| n).collect(),
        predictor: "pred".to_owned(),
        target: "targ".to_owned(),
    });
    model
}

/// Evidence, intervention and query variables for `model`. Evidence is
/// usually taken from one sampled world, so most triples are consistent.
pub fn random_query(rng: &mut impl Rng, model: &CausalModel) -> (Evidence, Intervention, Vec<String>) {
    let mut world = BTreeMap::new();
    for exo in &model.exogenous {
        let support: Vec<_> = exo.domain.iter().zip(&exo.prior).filter(|(_, p)| **p > 0.0).collect();
        let (v, _) = support.choose(rng).expect("prior has support");
        world.insert(exo.name.clone(), (*v).clone());
    }
    let world = super::solve(model, &world);
    let factual = rng.random_bool(0.8);
    let mut evidence = Evidence::new();
    let mut intervention = Intervention::new();
    for var in &model.endogenous {
        if rng.random_bool(0.3) {
            let value = if factual {
                world[&var.name].clone()
            } else {
                var.domain.choose(rng).expect("non-empty domain").clone()
            };
            evidence.insert(var.name.clone(), value);
        }
        if rng.random_bool(0.3) {
            intervention.insert(
                var.name.clone(),
                var.domain.choose(rng).expect("non-empty domain").clone(),
            );
        }
    }
    let names: Vec<&str> = model.variable_names().collect();
    let k = rng.random_range(1..=2.min(names.len()));
    let query = names.choose_multiple(rng, k).map(|s| (*s).to_owned()).collect();
    (evidence, intervention, query)
}
