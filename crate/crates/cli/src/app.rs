use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use cfaudit_core::dsl::{self, ModelDocument, Severity};
use cfaudit_core::fairness::{self, Criterion, DEFAULT_TOLERANCE};
use cfaudit_core::format::significant;
use cfaudit_core::{corpus, counterfactual_query, oracle, CompiledModel, Distribution, Error, Evidence, Intervention};

use crate::report::{table, ReportDocument, DIGITS};

/// Process exit status. No other codes are ever returned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Satisfied = 0,
    Violation = 1,
    InputError = 2,
    Inconsistent = 3,
}

#[derive(Debug, Parser)]
#[command(
    name = "cfaudit",
    version,
    about = "Counterfactual queries and fairness audits on structural causal models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and validate a model file.
    Validate { path: PathBuf },
    /// Answer a counterfactual query.
    Query(QueryArgs),
    /// Audit the model's predictor against fairness criteria.
    Audit(AuditArgs),
    /// List or write out the bundled example models.
    Corpus(CorpusArgs),
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    pub path: PathBuf,
    /// Observed values, `name=value`.
    #[arg(long, num_args = 1.., value_name = "NAME=VALUE")]
    pub evidence: Vec<String>,
    /// Interventions, `name=value`.
    #[arg(long = "do", num_args = 1.., value_name = "NAME=VALUE")]
    pub intervention: Vec<String>,
    /// Variables whose joint distribution is printed.
    #[arg(long, num_args = 1.., required = true, value_delimiter = ',')]
    pub query: Vec<String>,
    /// Also compute the answer by brute-force enumeration and report the deviation.
    #[arg(long)]
    pub oracle: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CriterionArg {
    Cf,
    Crf,
    CrfStrict,
    Wrongful,
    All,
}

impl CriterionArg {
    fn criteria(self) -> Vec<Criterion> {
        match self {
            CriterionArg::Cf => vec![Criterion::CounterfactualFairness],
            CriterionArg::Crf => vec![Criterion::CausalRelevanceFairness],
            CriterionArg::CrfStrict => vec![Criterion::StrictCausalRelevanceFairness],
            CriterionArg::Wrongful => vec![Criterion::WrongfulDiscrimination],
            CriterionArg::All => Criterion::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    pub path: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    pub criterion: CriterionArg,
    /// Slack for every equality comparison.
    #[arg(long, env = "CF_AUDIT_TOLERANCE", default_value_t = DEFAULT_TOLERANCE)]
    pub tolerance: f64,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct CorpusArgs {
    /// Print the bundled model names with a one-line description.
    #[arg(long)]
    pub list: bool,
    /// Write every bundled model into this directory.
    #[arg(long, value_name = "DIR")]
    pub emit: Option<PathBuf>,
}

struct Failure {
    status: Status,
    lines: Vec<String>,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            status: Status::InputError,
            lines: vec![format!("error: {}", message.into())],
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::InconsistentEvidence => Status::Inconsistent,
            _ => Status::InputError,
        };
        Failure {
            status,
            lines: vec![format!("error: {e}")],
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::input(e.to_string())
    }
}

pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Status {
    let result = match cli.command {
        Command::Validate { path } => validate(&path, out),
        Command::Query(args) => query(&args, out),
        Command::Audit(args) => audit(&args, out),
        Command::Corpus(args) => corpus_cmd(&args, out),
    };
    match result {
        Ok(status) => status,
        Err(failure) => {
            for line in &failure.lines {
                let _ = writeln!(err, "{line}");
            }
            failure.status
        }
    }
}

fn load(path: &Path) -> Result<ModelDocument, Failure> {
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == io::ErrorKind::NotFound => {
            return Err(Failure::input(format!("file not found: {}", path.display())))
        }
        Err(e) => return Err(Failure::input(format!("{}: {e}", path.display()))),
    };
    dsl::parse_bytes(&bytes).map_err(|diags| Failure {
        status: Status::InputError,
        lines: diags
            .iter()
            .map(|d| {
                let severity = match d.severity {
                    Severity::Error => "error",
                    Severity::Warning => "warning",
                };
                format!("{}:{}:{}: {severity}: {}", path.display(), d.line, d.column, d.message)
            })
            .collect(),
    })
}

fn validate(path: &Path, out: &mut dyn Write) -> Result<Status, Failure> {
    let doc = load(path)?;
    let m = &doc.model;
    writeln!(
        out,
        "ok: model `{}` ({} exogenous, {} endogenous{})",
        m.name,
        m.exogenous.len(),
        m.endogenous.len(),
        if m.roles.is_some() { ", roles declared" } else { "" }
    )?;
    Ok(Status::Satisfied)
}

fn assignments(pairs: &[String], flag: &str) -> Result<Vec<(String, String)>, Failure> {
    let mut out: Vec<(String, String)> = Vec::new();
    for p in pairs {
        let (k, v) = p
            .split_once('=')
            .filter(|(k, v)| !k.is_empty() && !v.is_empty())
            .ok_or_else(|| Failure::input(format!("{flag} expects `name=value`, got `{p}`")))?;
        if let Some((_, old)) = out.iter().find(|(name, _)| name == k) {
            if old != v {
                return Err(Failure::input(format!("{flag} assigns `{k}` twice")));
            }
            continue;
        }
        out.push((k.to_owned(), v.to_owned()));
    }
    Ok(out)
}

fn query(args: &QueryArgs, out: &mut dyn Write) -> Result<Status, Failure> {
    let doc = load(&args.path)?;
    let evidence: Evidence = assignments(&args.evidence, "--evidence")?.into_iter().collect();
    let intervention: Intervention = assignments(&args.intervention, "--do")?.into_iter().collect();
    let vars: Vec<&str> = args.query.iter().map(String::as_str).collect();
    let model = CompiledModel::new(doc.model.clone())?;
    let dist = counterfactual_query(&model, &evidence, &intervention, &vars)?;
    let reference = if args.oracle {
        Some(oracle::counterfactual(&doc.model, &evidence, &intervention, &vars)?)
    } else {
        None
    };
    write!(
        out,
        "{}",
        render_distribution(&dist, &evidence, &intervention, reference.as_ref())
    )?;
    Ok(Status::Satisfied)
}

fn render_distribution(
    dist: &Distribution,
    evidence: &Evidence,
    intervention: &Intervention,
    reference: Option<&Distribution>,
) -> String {
    let join = |it: Vec<String>| {
        if it.is_empty() {
            "(none)".to_owned()
        } else {
            it.join(", ")
        }
    };
    let mut s = format!(
        "query: {}\nevidence: {}\ndo: {}\n\n",
        dist.variables().join(", "),
        join(evidence.iter().map(|(k, v)| format!("{k}={v}")).collect()),
        join(intervention.iter().map(|(k, v)| format!("{k}={v}")).collect()),
    );
    let mut header: Vec<String> = dist.variables().to_vec();
    header.push("probability".to_owned());
    if reference.is_some() {
        header.push("oracle".to_owned());
    }
    let mut rows = vec![header];
    for (slot, (values, p)) in dist.rows().enumerate() {
        let mut row: Vec<String> = values.iter().map(|v| v.to_string()).collect();
        row.push(significant(p, DIGITS));
        if let Some(r) = reference {
            row.push(significant(r.probabilities()[slot], DIGITS));
        }
        rows.push(row);
    }
    s.push_str(&table(&rows));
    if let Some(r) = reference {
        s.push_str(&format!(
            "\nmax deviation from oracle: {}\n",
            significant(dist.max_abs_diff(r), DIGITS)
        ));
    }
    s
}

fn audit(args: &AuditArgs, out: &mut dyn Write) -> Result<Status, Failure> {
    if !args.tolerance.is_finite() || args.tolerance < 0.0 {
        return Err(Failure::input(format!(
            "tolerance must be a finite non-negative number, got {}",
            args.tolerance
        )));
    }
    let doc = load(&args.path)?;
    let model = CompiledModel::new(doc.model)?;
    let result = fairness::audit(&model, args.tolerance, &args.criterion.criteria())?;
    let report = ReportDocument::new(&model, args.tolerance, &result);
    match args.format {
        Format::Json => writeln!(out, "{}", report.to_json())?,
        Format::Text => write!(out, "{}", report.to_text())?,
    }
    Ok(if report.any_violated() {
        Status::Violation
    } else {
        Status::Satisfied
    })
}

fn corpus_cmd(args: &CorpusArgs, out: &mut dyn Write) -> Result<Status, Failure> {
    if let Some(dir) = &args.emit {
        fs::create_dir_all(dir).map_err(|e| Failure::input(format!("{}: {e}", dir.display())))?;
        for entry in &corpus::CORPUS {
            let path = dir.join(entry.file_name());
            fs::write(&path, entry.source).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
            writeln!(out, "{}", path.display())?;
        }
    } else {
        let rows: Vec<Vec<String>> = corpus::CORPUS
            .iter()
            .map(|e| vec![e.name.to_owned(), e.description.to_owned()])
            .collect();
        write!(out, "{}", table(&rows))?;
    }
    Ok(Status::Satisfied)
}
