use std::collections::HashSet;

use super::lexer::{tokenize, Tok, Token};
use super::{site_decl, Decl, Diagnostic, ModelDocument, Span};
use crate::format::significant;
use crate::scm::{
    self, CausalModel, Endogenous, Exogenous, Expr, Roles, StructuralFunction, Table, TableRow, Violation,
};

/// Parses and validates a model document. Every failure, syntactic or
/// semantic, is reported as a diagnostic carrying a source span.
pub fn parse(text: &str) -> Result<ModelDocument, Vec<Diagnostic>> {
    let tokens = match tokenize(text) {
        Ok(t) => t,
        Err(e) => return Err(vec![Diagnostic::error(text, e.span, e.message)]),
    };
    let mut parser = Parser {
        text,
        toks: tokens,
        pos: 0,
        depth: 0,
        diags: Vec::new(),
    };
    let ast = parser.document();
    let mut diags = parser.diags;
    let Some(ast) = ast else { return Err(diags) };
    if !diags.is_empty() {
        return Err(diags);
    }
    match lower(text, &ast) {
        Ok(doc) => Ok(doc),
        Err(mut more) => {
            diags.append(&mut more);
            Err(diags)
        }
    }
}

/// Like [`parse`], for input that may not be valid UTF-8.
pub fn parse_bytes(bytes: &[u8]) -> Result<ModelDocument, Vec<Diagnostic>> {
    match std::str::from_utf8(bytes) {
        Ok(text) => parse(text),
        Err(e) => {
            let valid = e.valid_up_to();
            let prefix = std::str::from_utf8(&bytes[..valid]).unwrap_or_default();
            let len = e.error_len().unwrap_or(bytes.len() - valid);
            let mut d = Diagnostic::error(prefix, Span::new(valid, valid), "input is not valid UTF-8");
            d.span = Span::new(valid, valid + len);
            d.length = len;
            Err(vec![d])
        }
    }
}

type Named = (String, Span);

struct DocAst {
    name: Named,
    span: Span,
    exogenous: Vec<ExoAst>,
    variables: Vec<VarAst>,
    roles: Vec<RoleAst>,
}

struct ExoAst {
    name: Named,
    domain: Option<Vec<Named>>,
    prior: Option<(Vec<f64>, Span)>,
}

struct VarAst {
    name: Named,
    domain: Option<Vec<Named>>,
    body: Option<(ExprAst, Span)>,
}

struct RoleAst {
    role: &'static str,
    name: Named,
    span: Span,
}

enum ExprAst {
    Ident(Named),
    IfEq {
        var: Named,
        value: Named,
        then: Box<ExprAst>,
        otherwise: Box<ExprAst>,
    },
    Table {
        keys: Vec<Named>,
        rows: Vec<(Vec<Named>, Named)>,
        default: Option<Named>,
    },
}

struct Parser<'t> {
    text: &'t str,
    toks: Vec<Token>,
    pos: usize,
    /// Braces opened and not yet closed by consumed tokens.
    depth: usize,
    diags: Vec<Diagnostic>,
}

/// Marker for an already-reported syntax error.
struct Reported;

type PResult<T> = Result<T, Reported>;

impl Parser<'_> {
    fn peek(&self) -> &Token {
        &self.toks[self.pos.min(self.toks.len() - 1)]
    }

    fn bump(&mut self) -> Token {
        let t = self.peek().clone();
        match t.tok {
            Tok::LBrace => self.depth += 1,
            Tok::RBrace => self.depth = self.depth.saturating_sub(1),
            _ => {}
        }
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn error_here(&mut self, expected: &str) -> Reported {
        let t = self.peek().clone();
        self.diags.push(Diagnostic::error(
            self.text,
            t.span,
            format!("expected {expected}, found {}", t.tok.describe()),
        ));
        Reported
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s == kw)
    }

    fn expect(&mut self, tok: Tok) -> PResult<Span> {
        if self.peek().tok == tok {
            Ok(self.bump().span)
        } else {
            Err(self.error_here(&tok.describe()))
        }
    }

    fn keyword(&mut self, kw: &str) -> PResult<Span> {
        if self.is_keyword(kw) {
            Ok(self.bump().span)
        } else {
            Err(self.error_here(&format!("`{kw}`")))
        }
    }

    /// An identifier that is not a keyword.
    fn ident(&mut self, what: &str) -> PResult<Named> {
        match &self.peek().tok {
            Tok::Ident(s) if !super::KEYWORDS.contains(&s.as_str()) => {
                let t = self.bump();
                let Tok::Ident(s) = t.tok else { unreachable!() };
                Ok((s, t.span))
            }
            _ => Err(self.error_here(what)),
        }
    }

    fn document(&mut self) -> Option<DocAst> {
        if self.peek().tok == Tok::Eof {
            self.diags
                .push(Diagnostic::error(self.text, Span::new(0, 0), "no model declaration"));
            return None;
        }
        let start = self.keyword("model").ok()?;
        let name = self.ident("model name").ok()?;
        self.expect(Tok::LBrace).ok()?;
        let mut doc = DocAst {
            name,
            span: start,
            exogenous: Vec::new(),
            variables: Vec::new(),
            roles: Vec::new(),
        };
        loop {
            match &self.peek().tok {
                Tok::RBrace => {
                    let end = self.bump().span;
                    doc.span = start.merge(end);
                    break;
                }
                Tok::Eof => {
                    self.error_here("`}` closing the model");
                    return None;
                }
                _ => {
                    if self.declaration(&mut doc).is_err() {
                        self.recover();
                    }
                }
            }
        }
        if self.peek().tok != Tok::Eof {
            let t = self.peek().clone();
            self.diags.push(Diagnostic::error(
                self.text,
                t.span,
                format!("unexpected {} after the model declaration", t.tok.describe()),
            ));
        }
        Some(doc)
    }

    /// Skips to the next declaration keyword (or closing brace) of the model body.
    fn recover(&mut self) {
        loop {
            match &self.peek().tok {
                Tok::Eof => return,
                Tok::RBrace if self.depth <= 1 => return,
                Tok::Ident(s)
                    if self.depth == 1
                        && matches!(
                            s.as_str(),
                            "exogenous" | "variable" | "protected" | "feature" | "predictor" | "target"
                        ) =>
                {
                    return
                }
                _ => {}
            }
            self.bump();
        }
    }

    fn declaration(&mut self, doc: &mut DocAst) -> PResult<()> {
        let kw = match &self.peek().tok {
            Tok::Ident(s) => s.clone(),
            _ => return Err(self.error_here("a declaration")),
        };
        match kw.as_str() {
            "exogenous" => {
                self.bump();
                let decl = self.exogenous()?;
                doc.exogenous.push(decl);
            }
            "variable" => {
                self.bump();
                let decl = self.variable()?;
                doc.variables.push(decl);
            }
            "protected" | "feature" | "predictor" | "target" => {
                let role = match kw.as_str() {
                    "protected" => "protected",
                    "feature" => "feature",
                    "predictor" => "predictor",
                    _ => "target",
                };
                let start = self.bump().span;
                let name = self.ident("variable name")?;
                doc.roles.push(RoleAst {
                    role,
                    span: start.merge(name.1),
                    name,
                });
            }
            _ => return Err(self.error_here("a declaration")),
        }
        Ok(())
    }

    fn exogenous(&mut self) -> PResult<ExoAst> {
        let name = self.ident("variable name")?;
        self.expect(Tok::LBrace)?;
        let mut decl = ExoAst {
            name,
            domain: None,
            prior: None,
        };
        loop {
            if self.peek().tok == Tok::RBrace {
                self.bump();
                return Ok(decl);
            }
            if self.is_keyword("domain") {
                let kw = self.bump().span;
                let list = self.value_list()?;
                self.once(&mut decl.domain, list, kw, "domain")?;
            } else if self.is_keyword("prior") {
                let kw = self.bump().span;
                let list = self.prob_list()?;
                self.once(&mut decl.prior, list, kw, "prior")?;
            } else {
                return Err(self.error_here("`domain`, `prior` or `}`"));
            }
        }
    }

    fn variable(&mut self) -> PResult<VarAst> {
        let name = self.ident("variable name")?;
        self.expect(Tok::LBrace)?;
        let mut decl = VarAst {
            name,
            domain: None,
            body: None,
        };
        loop {
            if self.peek().tok == Tok::RBrace {
                self.bump();
                return Ok(decl);
            }
            if self.is_keyword("domain") {
                let kw = self.bump().span;
                let list = self.value_list()?;
                self.once(&mut decl.domain, list, kw, "domain")?;
            } else if self.is_keyword("fn") {
                let kw = self.bump().span;
                let start = self.peek().span;
                let expr = self.expr()?;
                let end = self.toks[self.pos.saturating_sub(1)].span;
                self.once(&mut decl.body, (expr, start.merge(end)), kw, "fn")?;
            } else {
                return Err(self.error_here("`domain`, `fn` or `}`"));
            }
        }
    }

    fn once<T>(&mut self, slot: &mut Option<T>, value: T, at: Span, what: &str) -> PResult<()> {
        if slot.is_some() {
            self.diags
                .push(Diagnostic::error(self.text, at, format!("duplicate `{what}` clause")));
            return Err(Reported);
        }
        *slot = Some(value);
        Ok(())
    }

    /// `{ v1, v2 ... }` with optional commas.
    fn value_list(&mut self) -> PResult<Vec<Named>> {
        self.expect(Tok::LBrace)?;
        let mut out = Vec::new();
        loop {
            match self.peek().tok {
                Tok::RBrace => {
                    self.bump();
                    return Ok(out);
                }
                Tok::Comma => {
                    self.bump();
                }
                _ => out.push(self.ident("a domain value")?),
            }
        }
    }

    fn prob_list(&mut self) -> PResult<(Vec<f64>, Span)> {
        let open = self.expect(Tok::LBrace)?;
        let mut out = Vec::new();
        loop {
            match self.peek().tok {
                Tok::RBrace => {
                    let close = self.bump().span;
                    return Ok((out, open.merge(close)));
                }
                Tok::Comma => {
                    self.bump();
                }
                _ => out.push(self.probability()?),
            }
        }
    }

    fn number(&mut self) -> PResult<(f64, Span)> {
        let t = self.peek().clone();
        let Tok::Number(text) = &t.tok else {
            return Err(self.error_here("a probability"));
        };
        self.bump();
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok((v, t.span)),
            _ => {
                self.diags
                    .push(Diagnostic::error(self.text, t.span, format!("invalid number `{text}`")));
                Err(Reported)
            }
        }
    }

    /// Decimal literal or `p/q`.
    fn probability(&mut self) -> PResult<f64> {
        let (num, span) = self.number()?;
        if self.peek().tok != Tok::Slash {
            return Ok(num);
        }
        self.bump();
        let (den, den_span) = self.number()?;
        if den == 0.0 {
            self.diags
                .push(Diagnostic::error(self.text, span.merge(den_span), "division by zero"));
            return Err(Reported);
        }
        Ok(num / den)
    }

    fn expr(&mut self) -> PResult<ExprAst> {
        if self.is_keyword("if") {
            self.bump();
            let var = self.ident("variable name")?;
            self.expect(Tok::EqEq)?;
            let value = self.ident("a value")?;
            self.keyword("then")?;
            let then = self.expr()?;
            self.keyword("else")?;
            let otherwise = self.expr()?;
            return Ok(ExprAst::IfEq {
                var,
                value,
                then: Box::new(then),
                otherwise: Box::new(otherwise),
            });
        }
        if self.is_keyword("table") {
            self.bump();
            return self.table();
        }
        if self.peek().tok == Tok::LParen {
            self.bump();
            let inner = self.expr()?;
            self.expect(Tok::RParen)?;
            return Ok(inner);
        }
        Ok(ExprAst::Ident(self.ident("an expression")?))
    }

    fn tuple(&mut self, what: &str) -> PResult<Vec<Named>> {
        self.expect(Tok::LParen)?;
        let mut out = vec![self.ident(what)?];
        loop {
            match self.peek().tok {
                Tok::RParen => {
                    self.bump();
                    return Ok(out);
                }
                Tok::Comma => {
                    self.bump();
                    out.push(self.ident(what)?);
                }
                _ => return Err(self.error_here("`,` or `)`")),
            }
        }
    }

    fn table(&mut self) -> PResult<ExprAst> {
        let keys = self.tuple("variable name")?;
        self.expect(Tok::LBrace)?;
        let mut rows = Vec::new();
        let mut default = None;
        loop {
            match self.peek().tok {
                Tok::RBrace => {
                    self.bump();
                    return Ok(ExprAst::Table { keys, rows, default });
                }
                Tok::Semi => {
                    self.bump();
                }
                Tok::LParen => {
                    let key = self.tuple("a value")?;
                    self.expect(Tok::Arrow)?;
                    let value = self.ident("a value")?;
                    rows.push((key, value));
                }
                _ if self.is_keyword("default") => {
                    let at = self.bump().span;
                    self.expect(Tok::Arrow)?;
                    let value = self.ident("a value")?;
                    self.once(&mut default, value, at, "default")?;
                }
                _ => return Err(self.error_here("a table row, `default` or `}`")),
            }
        }
    }
}

fn names(list: &[Named]) -> Vec<String> {
    list.iter().map(|(s, _)| s.clone()).collect()
}

fn lower_expr(ast: &ExprAst, vars: &HashSet<&str>) -> Expr {
    match ast {
        ExprAst::Ident((s, _)) if vars.contains(s.as_str()) => Expr::Var(s.clone()),
        ExprAst::Ident((s, _)) => Expr::Value(s.clone()),
        ExprAst::IfEq {
            var,
            value,
            then,
            otherwise,
        } => Expr::IfEq {
            var: var.0.clone(),
            value: value.0.clone(),
            then: Box::new(lower_expr(then, vars)),
            otherwise: Box::new(lower_expr(otherwise, vars)),
        },
        ExprAst::Table { keys, rows, default } => Expr::Table(Table {
            keys: names(keys),
            rows: rows
                .iter()
                .map(|(key, value)| TableRow {
                    key: names(key),
                    value: value.0.clone(),
                })
                .collect(),
            default: default.as_ref().map(|d| d.0.clone()),
        }),
    }
}

/// Builds the model, checks declaration completeness and runs model validation.
fn lower(text: &str, ast: &DocAst) -> Result<ModelDocument, Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let mut spans = vec![(Decl::Model, ast.span)];
    let vars: HashSet<&str> = ast
        .exogenous
        .iter()
        .map(|e| e.name.0.as_str())
        .chain(ast.variables.iter().map(|v| v.name.0.as_str()))
        .collect();

    let mut model = CausalModel::new(ast.name.0.clone());
    for exo in &ast.exogenous {
        let name = &exo.name.0;
        spans.push((Decl::Variable(name.clone()), exo.name.1));
        let Some(domain) = &exo.domain else {
            diags.push(Diagnostic::error(
                text,
                exo.name.1,
                format!("exogenous `{name}` has no domain"),
            ));
            continue;
        };
        let Some((prior, prior_span)) = &exo.prior else {
            diags.push(Diagnostic::error(
                text,
                exo.name.1,
                format!("exogenous `{name}` has no prior"),
            ));
            continue;
        };
        spans.push((Decl::Prior(name.clone()), *prior_span));
        model.exogenous.push(Exogenous {
            name: name.clone(),
            domain: names(domain),
            prior: prior.clone(),
        });
    }
    for var in &ast.variables {
        let name = &var.name.0;
        spans.push((Decl::Variable(name.clone()), var.name.1));
        let Some(domain) = &var.domain else {
            diags.push(Diagnostic::error(
                text,
                var.name.1,
                format!("variable `{name}` has no domain"),
            ));
            continue;
        };
        let Some((body, body_span)) = &var.body else {
            diags.push(Diagnostic::error(
                text,
                var.name.1,
                format!("variable `{name}` has no structural function (`fn`)"),
            ));
            continue;
        };
        spans.push((Decl::Function(name.clone()), *body_span));
        model.endogenous.push(Endogenous {
            name: name.clone(),
            domain: names(domain),
            function: StructuralFunction::new(lower_expr(body, &vars)),
        });
    }

    let mut single = |role: &'static str| -> Option<String> {
        let mut found: Option<&RoleAst> = None;
        for r in ast.roles.iter().filter(|r| r.role == role) {
            if found.is_some() {
                diags.push(Diagnostic::error(
                    text,
                    r.span,
                    format!("duplicate `{role}` declaration"),
                ));
            } else {
                found = Some(r);
            }
        }
        found.map(|r| r.name.0.clone())
    };
    let protected = single("protected");
    let predictor = single("predictor");
    let target = single("target");
    for r in &ast.roles {
        spans.push((Decl::Role(r.role, r.name.0.clone()), r.span));
    }
    if !ast.roles.is_empty() {
        for (role, slot) in [
            ("protected", &protected),
            ("predictor", &predictor),
            ("target", &target),
        ] {
            if slot.is_none() {
                diags.push(Diagnostic::error(
                    text,
                    ast.name.1,
                    format!("model declares roles but no `{role}` variable"),
                ));
            }
        }
        if let (Some(protected), Some(predictor), Some(target)) = (protected, predictor, target) {
            model.roles = Some(Roles {
                protected,
                features: ast
                    .roles
                    .iter()
                    .filter(|r| r.role == "feature")
                    .map(|r| r.name.0.clone())
                    .collect(),
                predictor,
                target,
            });
        }
    }
    if !diags.is_empty() {
        return Err(diags);
    }

    if let Err(violations) = scm::validate(&model) {
        let diags = violations
            .iter()
            .map(|v| {
                let decl = site_decl(v.site());
                let mut matching = spans.iter().filter(|(d, _)| *d == decl).map(|(_, s)| *s);
                let span = match v {
                    Violation::DuplicateName { .. } | Violation::RoleConflict { .. } => matching.next_back(),
                    _ => matching.next(),
                }
                .unwrap_or(ast.span);
                Diagnostic::error(text, span, violation_message(v))
            })
            .collect();
        return Err(diags);
    }
    Ok(ModelDocument {
        source: text.to_owned(),
        model,
        spans,
    })
}

fn violation_message(v: &Violation) -> String {
    match v {
        Violation::PriorNotNormalized { variable, sum } => {
            format!(
                "prior sums to {}, expected 1 (exogenous `{variable}`)",
                significant(*sum, 12)
            )
        }
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const COIN: &str = "
        model coin {
          exogenous u { domain {heads, tails} prior {1/2, 0.5} }
          variable v { domain {heads tails} fn u }
        }";

    fn errors(text: &str) -> Vec<String> {
        parse(text).unwrap_err().into_iter().map(|d| d.message).collect()
    }

    #[test]
    fn parses_minimal_model() {
        let doc = parse(COIN).unwrap();
        let m = &doc.model;
        assert_eq!(m.name, "coin");
        assert_eq!(m.exogenous[0].prior, vec![0.5, 0.5]);
        assert_eq!(m.endogenous[0].function.body(), &Expr::var("u"));
        assert!(m.roles.is_none());
    }

    #[test]
    fn empty_file() {
        assert_eq!(errors(""), vec!["no model declaration"]);
        assert_eq!(errors("  # only a comment\n"), vec!["no model declaration"]);
    }

    #[test]
    fn prior_sum_is_reported_at_the_prior() {
        let text = "model m {\n  exogenous u { domain {a, b} prior {0.5 0.6} }\n  variable v { domain {a b} fn u }\n}";
        let diags = parse(text).unwrap_err();
        assert_eq!(diags.len(), 1);
        assert!(
            diags[0].message.starts_with("prior sums to 1.1"),
            "{}",
            diags[0].message
        );
        let start = text.find("{0.5").unwrap();
        assert_eq!(diags[0].span, Span::new(start, start + "{0.5 0.6}".len()));
        assert_eq!((diags[0].line, diags[0].column), (2, 37));
    }

    #[test]
    fn cycle_is_reported_at_function() {
        let text = "model m {
          exogenous u { domain {a, b} prior {0.5, 0.5} }
          variable p { domain {a, b} fn q }
          variable q { domain {a, b} fn p }
        }";
        let diags = parse(text).unwrap_err();
        assert_eq!(diags[0].message, "cycle: p↔q");
        assert_eq!(&text[diags[0].span.start..diags[0].span.end], "q");
    }

    #[test]
    fn syntax_error_recovers_to_next_declaration() {
        let text = "model m {
          exogenous u { domain {a, b} prior {0.5, } 0.5 }
          variable v { domain {a b} fn if u a then a else b }
          target v
        }";
        let diags = parse(text).unwrap_err();
        assert_eq!(diags.len(), 2, "{diags:?}");
        assert!(diags[0].message.starts_with("expected `domain`, `prior` or `}`"));
        assert_eq!(diags[1].message, "expected `==`, found `a`");
    }

    #[test]
    fn bare_identifiers_resolve_against_declared_variables() {
        let text = "model m {
          variable v { domain {a, b} fn if u == a then u else b }
          exogenous u { domain {a, b} prior {0.5, 0.5} }
        }";
        let doc = parse(text).unwrap();
        assert_eq!(
            doc.model.endogenous[0].function.body(),
            &Expr::if_eq("u", "a", Expr::var("u"), Expr::value("b"))
        );
    }

    #[test]
    fn roles_must_be_complete() {
        let text = "model m {
          exogenous u { domain {a, b} prior {0.5, 0.5} }
          variable v { domain {a, b} fn u }
          protected v
        }";
        let errs = errors(text);
        assert_eq!(errs.len(), 2);
        assert!(errs[0].contains("no `predictor`"));
    }

    #[test]
    fn rational_division_by_zero() {
        let text = "model m { exogenous u { domain {a} prior {1/0} } }";
        assert_eq!(errors(text), vec!["division by zero"]);
    }

    #[test]
    fn trailing_tokens() {
        let text = format!("{COIN} extra");
        assert_eq!(errors(&text), vec!["unexpected `extra` after the model declaration"]);
    }

    #[test]
    fn invalid_utf8() {
        let diags = parse_bytes(b"model m {\xff}").unwrap_err();
        assert_eq!(diags[0].span, Span::new(9, 10));
        assert_eq!(diags[0].message, "input is not valid UTF-8");
    }

    #[test]
    fn non_total_table_is_a_diagnostic() {
        let text = "model m {
          exogenous u { domain {a, b} prior {0.5, 0.5} }
          variable v { domain {x, y} fn table (u) { (a) -> x; } }
        }";
        let errs = errors(text);
        assert_eq!(errs, vec!["function of `v` is not total: no value for (u=b)"]);
    }
}
