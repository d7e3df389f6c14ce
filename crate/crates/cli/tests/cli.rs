use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cfaudit_core::format::significant;
use cfaudit_core::{corpus, oracle, Evidence, Intervention};
use serde_json::Value;

fn cfaudit() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_cfaudit"));
    c.env_remove("CF_AUDIT_TOLERANCE");
    c
}

fn run(args: &[&str]) -> Output {
    cfaudit().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn emitted() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().to_path_buf();
    let o = run(&["corpus", "--emit", path.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    (dir, path)
}

fn model(dir: &Path, name: &str) -> String {
    dir.join(format!("{name}.scm.txt")).to_str().unwrap().to_owned()
}

#[test]
fn validate_exit_codes() {
    let (_keep, dir) = emitted();
    assert_eq!(code(&run(&["validate", &model(&dir, "structure_b")])), 0);

    let cyclic = dir.join("cycle.scm.txt");
    std::fs::write(
        &cyclic,
        "model m {\n  variable V1 { domain {a, b} fn V2 }\n  variable V2 { domain {a, b} fn V1 }\n}\n",
    )
    .unwrap();
    let o = run(&["validate", cyclic.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("cycle: V1↔V2"), "{}", stderr(&o));
    assert!(stderr(&o).contains(":2:"), "{}", stderr(&o));

    let o = run(&["validate", dir.join("missing.scm.txt").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("file not found"));
}

#[test]
fn scenario_2_query_matches_the_oracle() {
    let (_keep, dir) = emitted();
    let o = run(&[
        "query",
        &model(&dir, "scenario_2"),
        "--evidence",
        "profile=p",
        "skin_color=w",
        "--do",
        "skin_color=b",
        "--query",
        "similarity_pred",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);

    let m = corpus::get("scenario_2").unwrap().document().model;
    let expected = oracle::counterfactual(
        &m,
        &Evidence::new().set("profile", "p").set("skin_color", "w"),
        &Intervention::new().set("skin_color", "b"),
        &["similarity_pred"],
    )
    .unwrap();
    let rows: Vec<Vec<&str>> = text
        .lines()
        .skip_while(|l| !l.contains("probability"))
        .skip(1)
        .map(|l| l.split_whitespace().collect())
        .filter(|r: &Vec<&str>| !r.is_empty())
        .collect();
    assert_eq!(rows.len(), 2);
    for (row, (values, p)) in rows.iter().zip(expected.rows()) {
        assert_eq!(row[0], values[0]);
        assert_eq!(row[1], significant(p, 12));
    }
    assert_eq!(rows[0][0], "low");
}

#[test]
fn query_with_oracle_reports_deviation() {
    let (_keep, dir) = emitted();
    let o = run(&[
        "query",
        &model(&dir, "structure_b"),
        "--query",
        "accident_risk,predicted_risk",
        "--oracle",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    let line = text.lines().find(|l| l.starts_with("max deviation")).unwrap();
    let dev: f64 = line.rsplit(' ').next().unwrap().parse().unwrap();
    assert!(dev <= 1e-12);
    assert!(text.contains("oracle"));
}

#[test]
fn observational_marginal_without_flags() {
    let (_keep, dir) = emitted();
    let o = run(&["query", &model(&dir, "structure_d"), "--query", "income"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.contains("evidence: (none)"));
    let m = corpus::get("structure_d").unwrap().document().model;
    let expected = oracle::counterfactual(&m, &Evidence::new(), &Intervention::new(), &["income"]).unwrap();
    for (values, p) in expected.rows() {
        let line = text.lines().find(|l| l.trim_start().starts_with(values[0])).unwrap();
        assert!(line.ends_with(&significant(p, 12)));
    }
}

#[test]
fn query_errors() {
    let (_keep, dir) = emitted();
    let m = model(&dir, "scenario_2");
    assert_eq!(code(&run(&["query", &m, "--do", "nope=b", "--query", "profile"])), 2);
    assert_eq!(code(&run(&["query", &m, "--query", "nope"])), 2);
    assert_eq!(
        code(&run(&["query", &m, "--evidence", "profile", "--query", "profile"])),
        2
    );
    assert_eq!(code(&run(&["query", &m])), 2);
    let o = run(&[
        "query",
        &m,
        "--evidence",
        "profile=d",
        "skin_color=w",
        "--query",
        "profile",
    ]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("inconsistent evidence"));
}

fn audit_json(path: &str, extra: &[&str]) -> (i32, Value) {
    let mut args = vec!["audit", path, "--format", "json"];
    args.extend_from_slice(extra);
    let o = run(&args);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap_or(Value::Null);
    (code(&o), v)
}

fn verdict(report: &Value, key: &str) -> String {
    report["summary"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["criterion"] == key)
        .map(|r| r["verdict"].as_str().unwrap().to_owned())
        .unwrap()
}

#[test]
fn audit_examples() {
    let (_keep, dir) = emitted();
    assert_eq!(
        code(&run(&["audit", &model(&dir, "scenario_1"), "--criterion", "cf"])),
        0
    );

    let (status, report) = audit_json(&model(&dir, "scenario_2"), &["--criterion", "all"]);
    assert_eq!(status, 1);
    assert_eq!(verdict(&report, "cf"), "violated");
    assert_eq!(verdict(&report, "crf"), "satisfied");
    assert!(
        report["reports"][0]["witnesses"][0]["predictor_effect"]
            .as_f64()
            .unwrap()
            > 0.0
    );

    assert_eq!(
        code(&run(&["audit", &model(&dir, "structure_d"), "--criterion", "all"])),
        0
    );
}

#[test]
fn emitted_corpus_reproduces_the_verdict_table() {
    let (_keep, dir) = emitted();
    let table = [
        ("structure_a", vec![("cf", "violated"), ("crf", "violated")]),
        ("structure_b", vec![("cf", "violated"), ("crf", "satisfied")]),
        (
            "structure_c",
            vec![("cf", "satisfied"), ("crf", "satisfied"), ("crf-strict", "violated")],
        ),
        (
            "structure_d",
            vec![
                ("cf", "satisfied"),
                ("crf", "satisfied"),
                ("crf-strict", "satisfied"),
                ("wrongful", "satisfied"),
            ],
        ),
    ];
    for (name, expected) in table {
        let (status, report) = audit_json(&model(&dir, name), &[]);
        for (key, v) in &expected {
            assert_eq!(verdict(&report, key), *v, "{name} {key}");
        }
        let any_violated = report["summary"]
            .as_array()
            .unwrap()
            .iter()
            .any(|r| r["verdict"] == "violated");
        assert_eq!(status, if any_violated { 1 } else { 0 });
    }
}

#[test]
fn json_and_text_agree() {
    let (_keep, dir) = emitted();
    for entry in &corpus::CORPUS {
        let path = model(&dir, entry.name);
        let (_, report) = audit_json(&path, &[]);
        let text = stdout(&run(&["audit", &path]));
        for row in report["summary"].as_array().unwrap() {
            let title = report["reports"]
                .as_array()
                .unwrap()
                .iter()
                .find(|r| r["criterion"] == row["criterion"])
                .unwrap()["title"]
                .as_str()
                .unwrap()
                .to_owned();
            let line = text.lines().find(|l| l.trim_start().starts_with(&title)).unwrap();
            let fields: Vec<&str> = line.split_whitespace().collect();
            assert_eq!(fields[fields.len() - 2], row["verdict"].as_str().unwrap());
            assert_eq!(fields[fields.len() - 1], row["witnesses"].to_string());
        }
    }
}

#[test]
fn tolerance_from_environment_and_flag() {
    let (_keep, dir) = emitted();
    let m = model(&dir, "scenario_2");
    let with_env = |value: &str, extra: &[&str]| {
        let mut c = cfaudit();
        c.env("CF_AUDIT_TOLERANCE", value)
            .args(["audit", &m, "--criterion", "cf"])
            .args(extra);
        code(&c.output().unwrap())
    };
    assert_eq!(with_env("1", &[]), 0);
    assert_eq!(with_env("1", &["--tolerance", "1e-9"]), 1);
    assert_eq!(with_env("not-a-number", &[]), 2);
    assert_eq!(code(&run(&["audit", &m, "--tolerance", "-1"])), 2);
    let (_, report) = audit_json(&m, &["--tolerance", "0.5"]);
    assert_eq!(report["tolerance"].as_f64(), Some(0.5));
}

#[test]
fn emit_is_deterministic_and_reports_io_errors() {
    let (_a, one) = emitted();
    let (_b, two) = emitted();
    for entry in &corpus::CORPUS {
        let a = std::fs::read(one.join(entry.file_name())).unwrap();
        let b = std::fs::read(two.join(entry.file_name())).unwrap();
        assert_eq!(a, b);
        assert_eq!(code(&run(&["validate", &model(&one, entry.name)])), 0);
    }
    let blocker = one.join("scenario_1.scm.txt");
    let o = run(&["corpus", "--emit", blocker.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn list_names_every_model() {
    let text = stdout(&run(&["corpus", "--list"]));
    for entry in &corpus::CORPUS {
        assert!(text.lines().any(|l| l.trim_start().starts_with(entry.name)));
    }
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&run(&[])), 2);
    assert_eq!(code(&run(&["audit"])), 2);
    assert_eq!(code(&run(&["audit", "x", "--criterion", "bogus"])), 2);
}
