//! Fixtures shared by the benchmarks.

use cfaudit_core::oracle::generate;
use cfaudit_core::{corpus, CausalModel, CompiledModel};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn corpus_model(name: &str) -> CompiledModel {
    CompiledModel::new(corpus::get(name).expect("bundled model").document().model).expect("valid model")
}

/// `count` random models of the largest generated shape.
pub fn random_models(seed: u64, count: usize) -> Vec<CausalModel> {
    let mut rng: ChaCha8Rng = generate::rng(seed);
    let shape = generate::Shape {
        min_vars: 6,
        ..generate::Shape::default()
    };
    (0..count).map(|_| generate::random_model(&mut rng, &shape)).collect()
}

/// Random audit models, half of them with a path from the protected
/// attribute to the target.
pub fn audit_models(seed: u64, count: usize) -> Vec<CompiledModel> {
    let mut rng = generate::rng(seed);
    (0..count)
        .map(|_| {
            let reads = rng.random_bool(0.5);
            CompiledModel::new(generate::random_audit_model(&mut rng, reads)).expect("valid model")
        })
        .collect()
}
