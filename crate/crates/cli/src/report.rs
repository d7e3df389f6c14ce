//! Audit reports in JSON and aligned text.

use serde::Serialize;

use cfaudit_core::fairness::{Audit, AuditReport, Criterion, Verdict};
use cfaudit_core::format::significant;
use cfaudit_core::CompiledModel;

pub const DIGITS: usize = 12;

fn round(x: f64) -> f64 {
    significant(x, DIGITS).parse().unwrap_or(x)
}

fn num(x: f64) -> String {
    significant(x, DIGITS)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessRow {
    pub context: String,
    pub factual: String,
    pub counterfactual: String,
    pub predictor_effect: f64,
    pub target_effect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionReport {
    pub criterion: &'static str,
    pub title: &'static str,
    pub verdict: Verdict,
    pub tolerance: f64,
    pub contexts_checked: usize,
    pub witnesses: Vec<WitnessRow>,
}

impl CriterionReport {
    fn new(report: &AuditReport) -> Self {
        CriterionReport {
            criterion: report.criterion.key(),
            title: report.criterion.title(),
            verdict: report.verdict,
            tolerance: report.tolerance,
            contexts_checked: report.contexts_checked,
            witnesses: report
                .witnesses
                .iter()
                .map(|w| WitnessRow {
                    context: describe(&w.context),
                    factual: w.factual.clone(),
                    counterfactual: w.counterfactual.clone(),
                    predictor_effect: round(w.predictor_effect),
                    target_effect: round(w.target_effect),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutcomeEffect {
    pub variable: String,
    pub values: Vec<String>,
    pub signed: Vec<f64>,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectRow {
    pub context: String,
    pub probability: f64,
    pub factual: String,
    pub counterfactual: String,
    pub predictor: OutcomeEffect,
    pub target: OutcomeEffect,
    pub differential_treatment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub criterion: &'static str,
    pub verdict: Verdict,
    pub witnesses: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportDocument {
    pub tool: &'static str,
    pub version: &'static str,
    pub model: String,
    pub tolerance: f64,
    pub reports: Vec<CriterionReport>,
    pub effects: Vec<EffectRow>,
    pub summary: Vec<SummaryRow>,
}

fn describe(pairs: &[(String, String)]) -> String {
    pairs
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(", ")
}

impl ReportDocument {
    pub fn new(model: &CompiledModel, tolerance: f64, audit: &Audit) -> Self {
        let effects = audit
            .effects
            .iter()
            .flat_map(|c| c.pairs.iter().map(move |p| (c.context.probability, p)))
            .map(|(probability, pair)| {
                let outcome = |e: &cfaudit_core::fairness::EffectReport| OutcomeEffect {
                    variable: e.outcome.clone(),
                    values: e.outcome_values.clone(),
                    signed: e.signed.iter().map(|&x| round(x)).collect(),
                    magnitude: round(e.magnitude),
                };
                EffectRow {
                    context: describe(&pair.predictor.context),
                    probability: round(probability),
                    factual: pair.predictor.factual.clone(),
                    counterfactual: pair.predictor.counterfactual.clone(),
                    predictor: outcome(&pair.predictor),
                    target: outcome(&pair.target),
                    differential_treatment: round(pair.differential_treatment),
                }
            })
            .collect();
        let reports: Vec<CriterionReport> = audit.reports.iter().map(CriterionReport::new).collect();
        let summary = reports
            .iter()
            .map(|r| SummaryRow {
                criterion: r.criterion,
                verdict: r.verdict,
                witnesses: r.witnesses.len(),
            })
            .collect();
        ReportDocument {
            tool: "cfaudit",
            version: env!("CARGO_PKG_VERSION"),
            model: model.name().to_owned(),
            tolerance,
            reports,
            effects,
            summary,
        }
    }

    pub fn any_violated(&self) -> bool {
        self.summary.iter().any(|s| s.verdict == Verdict::Violated)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{} {} audit of model `{}`\n",
            self.tool, self.version, self.model
        ));
        out.push_str(&format!("tolerance: {}\n\n", num(self.tolerance)));

        let titles: Vec<&str> = self
            .summary
            .iter()
            .map(|s| Criterion::from_key(s.criterion).map_or(s.criterion, |c| c.title()))
            .collect();
        let mut summary = vec![vec![
            "criterion".to_owned(),
            "verdict".to_owned(),
            "witnesses".to_owned(),
        ]];
        for (s, title) in self.summary.iter().zip(&titles) {
            summary.push(vec![title.to_string(), s.verdict.to_string(), s.witnesses.to_string()]);
        }
        out.push_str("summary\n");
        out.push_str(&table(&summary));

        if !self.effects.is_empty() {
            out.push_str("\neffects of the protected attribute (total variation)\n");
            let mut rows = vec![vec![
                "context".to_owned(),
                "P(context)".to_owned(),
                "a'".to_owned(),
                "predictor".to_owned(),
                "target".to_owned(),
                "excess".to_owned(),
                "differential".to_owned(),
            ]];
            for e in &self.effects {
                rows.push(vec![
                    e.context.clone(),
                    num(e.probability),
                    e.counterfactual.clone(),
                    num(e.predictor.magnitude),
                    num(e.target.magnitude),
                    num(round(e.predictor.magnitude - e.target.magnitude)),
                    num(e.differential_treatment),
                ]);
            }
            out.push_str(&table(&rows));
        }

        for r in self.reports.iter().filter(|r| !r.witnesses.is_empty()) {
            out.push_str(&format!("\nwitnesses: {} ({})\n", r.title, r.witnesses.len()));
            let mut rows = vec![vec![
                "context".to_owned(),
                "a -> a'".to_owned(),
                "predictor".to_owned(),
                "target".to_owned(),
            ]];
            for w in &r.witnesses {
                rows.push(vec![
                    w.context.clone(),
                    format!("{} -> {}", w.factual, w.counterfactual),
                    num(w.predictor_effect),
                    num(w.target_effect),
                ]);
            }
            out.push_str(&table(&rows));
        }
        out
    }
}

/// Left-aligned columns separated by two spaces, indented by two.
pub fn table(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for row in rows {
        let mut line = String::from("  ");
        for (c, cell) in row.iter().enumerate() {
            line.push_str(cell);
            if c + 1 < row.len() {
                line.push_str(&" ".repeat(widths[c] - cell.chars().count() + 2));
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}
