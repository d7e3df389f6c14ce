//! One PASS/FAIL line per acceptance criterion. Exits non-zero on any failure.

use std::collections::{BTreeMap, HashSet};
use std::panic;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use cfaudit_core::dsl;
use cfaudit_core::engine::{evaluate, ExogenousAssignment};
use cfaudit_core::fairness::{self, Audit};
use cfaudit_core::oracle::{self, generate};
use cfaudit_core::{corpus, counterfactual_query, CausalModel, CompiledModel, Criterion, Intervention, Verdict};
use rand::seq::IndexedRandom;
use rand::Rng;

const TOLERANCE: f64 = 1e-9;
const MODELS: u64 = 1000;
const TRIPLES: usize = 5;
const LIMITING_MODELS: u64 = 1000;
const FUZZ_INPUTS: usize = 10_000;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(id: u32, name: &str, budget: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = f();
    let elapsed = start.elapsed();
    let in_time = elapsed <= budget;
    let pass = outcome.pass && in_time;
    let timing = if in_time {
        format!("{:.2}s", elapsed.as_secs_f64())
    } else {
        format!("{:.2}s, over the {}s budget", elapsed.as_secs_f64(), budget.as_secs())
    };
    println!(
        "{} {id}. {name}: {} ({timing})",
        if pass { "PASS" } else { "FAIL" },
        outcome.detail
    );
    pass
}

fn emit_corpus(dir: &Path) {
    let status = Command::new(env!("CARGO_BIN_EXE_cfaudit"))
        .args(["corpus", "--emit"])
        .arg(dir)
        .output()
        .expect("run cfaudit");
    assert!(status.status.success(), "corpus --emit failed");
}

fn audit_file(dir: &Path, name: &str) -> Audit {
    let text = std::fs::read_to_string(dir.join(format!("{name}.scm.txt"))).unwrap();
    let model = CompiledModel::new(dsl::parse(&text).unwrap().model).unwrap();
    fairness::full_audit(&model, TOLERANCE).unwrap()
}

fn expect(audit: &Audit, expected: &[(Criterion, Verdict)], name: &str, problems: &mut Vec<String>) {
    for &(c, v) in expected {
        let got = audit.verdict(c).unwrap();
        if got != v {
            problems.push(format!("{name}: {} {got}, expected {v}", c.key()));
        }
    }
}

use Criterion::{
    CausalRelevanceFairness as Crf, CounterfactualFairness as Cf, StrictCausalRelevanceFairness as Strict,
    WrongfulDiscrimination as Wrongful,
};
use Verdict::{Satisfied as Sat, Violated as Vio};

fn structure_table(dir: &Path) -> Outcome {
    let table: [(&str, &[(Criterion, Verdict)]); 4] = [
        ("structure_a", &[(Cf, Vio), (Crf, Vio)]),
        ("structure_b", &[(Cf, Vio), (Crf, Sat)]),
        ("structure_c", &[(Cf, Sat), (Crf, Sat), (Strict, Vio)]),
        ("structure_d", &[(Cf, Sat), (Crf, Sat), (Strict, Sat), (Wrongful, Sat)]),
    ];
    let mut problems = Vec::new();
    for (name, expected) in table {
        expect(&audit_file(dir, name), expected, name, &mut problems);
    }
    Outcome {
        pass: problems.is_empty(),
        detail: if problems.is_empty() {
            "(a) cf/crf violated, (b) cf violated crf satisfied, (c) cf/crf satisfied strict violated, (d) all satisfied".into()
        } else {
            problems.join("; ")
        },
    }
}

fn scenarios(dir: &Path) -> Outcome {
    let mut problems = Vec::new();
    expect(
        &audit_file(dir, "scenario_1"),
        &[(Cf, Sat), (Strict, Vio)],
        "scenario_1",
        &mut problems,
    );
    expect(
        &audit_file(dir, "scenario_2"),
        &[(Cf, Vio), (Crf, Sat)],
        "scenario_2",
        &mut problems,
    );
    Outcome {
        pass: problems.is_empty(),
        detail: if problems.is_empty() {
            "scenario_1 cf satisfied strict violated, scenario_2 cf violated crf satisfied".into()
        } else {
            problems.join("; ")
        },
    }
}

/// Whether some directed path leads from `from` to `to`.
fn reaches(model: &CausalModel, from: &str, to: &str) -> bool {
    let mut seen: HashSet<&str> = HashSet::from([from]);
    let mut changed = true;
    while changed {
        changed = false;
        for v in &model.endogenous {
            if !seen.contains(v.name.as_str()) && v.function.parents().iter().any(|p| seen.contains(p.as_str())) {
                seen.insert(&v.name);
                changed = true;
            }
        }
    }
    seen.contains(to)
}

fn limiting_case() -> Outcome {
    let mut agree = 0;
    let mut violated = 0;
    let mut bad_population = 0;
    for seed in 0..LIMITING_MODELS {
        let data = generate::random_audit_model(&mut generate::rng(0xA11 + seed), false);
        let roles = data.roles.clone().unwrap();
        if reaches(&data, &roles.protected, &roles.target) {
            bad_population += 1;
            continue;
        }
        let audit = fairness::full_audit(&CompiledModel::new(data).unwrap(), TOLERANCE).unwrap();
        let cf = audit.verdict(Cf).unwrap();
        if cf == Vio {
            violated += 1;
        }
        if audit.verdict(Crf).unwrap() == cf {
            agree += 1;
        }
    }
    let checked = LIMITING_MODELS - bad_population;
    Outcome {
        pass: bad_population == 0 && agree == checked && checked >= 500,
        detail: format!(
            "{agree}/{checked} models agree ({violated} cf-violated), {bad_population} generated with an A->Y path"
        ),
    }
}

fn equivalence() -> Outcome {
    let mut max_dev: f64 = 0.0;
    let mut compared = 0;
    let mut errors_agreeing = 0;
    let mut mismatches = Vec::new();
    for seed in 0..MODELS {
        let mut rng = generate::rng(seed);
        let model = generate::random_model(&mut rng, &generate::Shape::default());
        let compiled = CompiledModel::new(model.clone()).unwrap();
        for _ in 0..TRIPLES {
            let (evidence, intervention, query) = generate::random_query(&mut rng, &model);
            let q: Vec<&str> = query.iter().map(String::as_str).collect();
            match (
                counterfactual_query(&compiled, &evidence, &intervention, &q),
                oracle::counterfactual(&model, &evidence, &intervention, &q),
            ) {
                (Ok(a), Ok(b)) => {
                    compared += 1;
                    max_dev = max_dev.max(a.max_abs_diff(&b));
                }
                (Err(a), Err(b)) if a == b => errors_agreeing += 1,
                (a, b) => mismatches.push(format!("seed {seed}: engine {:?}, oracle {:?}", a.err(), b.err())),
            }
        }
    }
    Outcome {
        pass: mismatches.is_empty() && max_dev <= TOLERANCE,
        detail: format!(
            "{MODELS} models x {TRIPLES} triples, {compared} distributions with max deviation {max_dev:e}, \
             {errors_agreeing} error cases agree, {} mismatches{}",
            mismatches.len(),
            mismatches.first().map(|m| format!(" (first: {m})")).unwrap_or_default()
        ),
    }
}

fn consistency() -> Outcome {
    let mut cases = 0;
    let mut failures = 0;
    for seed in 0..MODELS {
        let mut rng = generate::rng(seed);
        let model = generate::random_model(&mut rng, &generate::Shape::default());
        let compiled = CompiledModel::new(model.clone()).unwrap();
        for _ in 0..TRIPLES {
            let world: BTreeMap<String, String> = model
                .exogenous
                .iter()
                .map(|e| {
                    let support: Vec<&String> = e
                        .domain
                        .iter()
                        .zip(&e.prior)
                        .filter(|(_, p)| **p > 0.0)
                        .map(|(v, _)| v)
                        .collect();
                    (e.name.clone(), (*support.choose(&mut rng).unwrap()).clone())
                })
                .collect();
            let factual = oracle::solve(&model, &world);
            let intervention: Intervention = model
                .endogenous
                .iter()
                .filter(|_| rng.random_bool(0.5))
                .map(|v| (v.name.clone(), factual[&v.name].clone()))
                .collect();
            let sub = cfaudit_core::scm::submodel(&model, &intervention).unwrap();
            let data_ok = oracle::solve(&sub, &world) == factual;
            let u = ExogenousAssignment::from_named(&compiled, world.iter().map(|(k, v)| (k.as_str(), v.as_str())))
                .unwrap();
            let engine_ok = evaluate(&compiled.submodel(&intervention).unwrap(), &u).named(&compiled) == factual;
            cases += 1;
            if !(data_ok && engine_ok) {
                failures += 1;
            }
        }
    }
    Outcome {
        pass: failures == 0,
        detail: format!(
            "{} of {cases} factual-value interventions reproduce the factual world",
            cases - failures
        ),
    }
}

fn wrongful_inclusion() -> Outcome {
    let mut audits = 0;
    let mut wrongful = 0;
    let mut outside = 0;
    let mut check = |audit: &Audit| {
        let key = |w: &fairness::Witness| (w.context.clone(), w.counterfactual.clone());
        let crf: HashSet<_> = audit.report(Crf).unwrap().witnesses.iter().map(key).collect();
        for w in &audit.report(Wrongful).unwrap().witnesses {
            wrongful += 1;
            if !crf.contains(&key(w)) {
                outside += 1;
            }
        }
        audits += 1;
    };
    for entry in &corpus::CORPUS {
        let model = CompiledModel::new(entry.document().model).unwrap();
        check(&fairness::full_audit(&model, TOLERANCE).unwrap());
    }
    for seed in 0..MODELS {
        let data = generate::random_audit_model(&mut generate::rng(0xC0DE + seed), seed % 4 != 0);
        let model = CompiledModel::new(data).unwrap();
        check(&fairness::full_audit(&model, TOLERANCE).unwrap());
    }
    Outcome {
        pass: outside == 0 && wrongful > 0,
        detail: format!("{audits} audits, {wrongful} wrongful witnesses, {outside} outside the crf witness set"),
    }
}

fn dsl_round_trip() -> Outcome {
    let mut problems = Vec::new();
    for entry in &corpus::CORPUS {
        let model = entry.document().model;
        if dsl::parse(&dsl::serialize(&model)).map(|d| d.model).as_ref() != Ok(&model) {
            problems.push(format!("corpus {}", entry.name));
        }
    }
    let mut random = 0;
    for seed in 0..MODELS {
        let mut rng = generate::rng(0xD51 + seed);
        let model = if seed % 2 == 0 {
            generate::random_model(&mut rng, &generate::Shape::default())
        } else {
            generate::random_audit_model(&mut rng, true)
        };
        let text = dsl::serialize(&model);
        match dsl::parse(&text) {
            Ok(doc) if doc.model == model && dsl::serialize(&doc.model) == text => random += 1,
            _ => problems.push(format!("random seed {seed}")),
        }
    }

    let previous = panic::take_hook();
    panic::set_hook(Box::new(|_| {}));
    let mut rng = generate::rng(0xF022);
    let mut panics = 0;
    let mut bad_spans = 0;
    for i in 0..FUZZ_INPUTS {
        let bytes: Vec<u8> = if i % 2 == 0 {
            let len = rng.random_range(0..400);
            (0..len).map(|_| rng.random()).collect()
        } else {
            let mut b = corpus::CORPUS.choose(&mut rng).unwrap().source.as_bytes().to_vec();
            for _ in 0..rng.random_range(1..10) {
                let at = rng.random_range(0..=b.len());
                match rng.random_range(0..3) {
                    0 if at < b.len() => {
                        b.remove(at);
                    }
                    1 => b.insert(at, rng.random()),
                    _ if at < b.len() => b[at] = rng.random(),
                    _ => {}
                }
            }
            b
        };
        match panic::catch_unwind(|| dsl::parse_bytes(&bytes)) {
            Err(_) => panics += 1,
            Ok(Err(diags)) => {
                if diags.is_empty()
                    || diags
                        .iter()
                        .any(|d| d.span.end > bytes.len() || d.span.start > d.span.end)
                {
                    bad_spans += 1;
                }
            }
            Ok(Ok(_)) => {}
        }
    }
    panic::set_hook(previous);

    Outcome {
        pass: problems.is_empty() && panics == 0 && bad_spans == 0,
        detail: format!(
            "{} corpus + {random} random models round-trip, {FUZZ_INPUTS} fuzz inputs: {panics} panics, \
             {bad_spans} out-of-bounds or missing diagnostics{}",
            corpus::CORPUS.len(),
            if problems.is_empty() {
                String::new()
            } else {
                format!("; failures: {}", problems.join(", "))
            }
        ),
    }
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    emit_corpus(dir.path());
    let secs = Duration::from_secs;
    let results = [
        check(1, "structure verdict table", secs(1), || structure_table(dir.path())),
        check(2, "scenario reproduction", secs(1), || scenarios(dir.path())),
        check(
            3,
            "limiting case: no A->Y path means weak crf equals cf",
            secs(60),
            limiting_case,
        ),
        check(4, "engine/oracle equivalence", secs(300), equivalence),
        check(5, "consistency axiom", secs(300), consistency),
        check(6, "wrongful witnesses are crf witnesses", secs(300), wrongful_inclusion),
        check(7, "dsl round-trip and fuzzing", secs(300), dsl_round_trip),
    ];
    let passed = results.iter().filter(|p| **p).count();
    println!("{passed}/{} acceptance criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
