use std::fmt::Write;

use crate::scm::{CausalModel, Expr};

const INDENT: &str = "  ";

/// Canonical text of `model`: exogenous declarations, then endogenous
/// declarations (each in model order), then roles. Probabilities use the
/// shortest decimal that reads back to the same `f64`.
pub fn serialize(model: &CausalModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "model {} {{", model.name);
    for exo in &model.exogenous {
        let _ = writeln!(out, "{INDENT}exogenous {} {{", exo.name);
        let _ = writeln!(out, "{INDENT}{INDENT}domain {{{}}}", exo.domain.join(", "));
        let prior: Vec<String> = exo.prior.iter().map(|p| format!("{p}")).collect();
        let _ = writeln!(out, "{INDENT}{INDENT}prior {{{}}}", prior.join(", "));
        let _ = writeln!(out, "{INDENT}}}");
    }
    for var in &model.endogenous {
        if !out.ends_with("{\n") {
            out.push('\n');
        }
        let _ = writeln!(out, "{INDENT}variable {} {{", var.name);
        let _ = writeln!(out, "{INDENT}{INDENT}domain {{{}}}", var.domain.join(", "));
        let _ = write!(out, "{INDENT}{INDENT}fn ");
        write_expr(&mut out, var.function.body(), 2);
        out.push('\n');
        let _ = writeln!(out, "{INDENT}}}");
    }
    if let Some(roles) = &model.roles {
        out.push('\n');
        let _ = writeln!(out, "{INDENT}protected {}", roles.protected);
        for f in &roles.features {
            let _ = writeln!(out, "{INDENT}feature {f}");
        }
        let _ = writeln!(out, "{INDENT}predictor {}", roles.predictor);
        let _ = writeln!(out, "{INDENT}target {}", roles.target);
    }
    out.push_str("}\n");
    out
}

fn write_expr(out: &mut String, expr: &Expr, depth: usize) {
    match expr {
        Expr::Value(v) | Expr::Var(v) => out.push_str(v),
        Expr::IfEq {
            var,
            value,
            then,
            otherwise,
        } => {
            let _ = write!(out, "if {var} == {value} then ");
            write_expr(out, then, depth);
            out.push_str(" else ");
            write_expr(out, otherwise, depth);
        }
        Expr::Table(table) => {
            let pad = INDENT.repeat(depth + 1);
            let _ = writeln!(out, "table ({}) {{", table.keys.join(", "));
            for row in &table.rows {
                let _ = writeln!(out, "{pad}({}) -> {};", row.key.join(", "), row.value);
            }
            if let Some(d) = &table.default {
                let _ = writeln!(out, "{pad}default -> {d};");
            }
            let _ = write!(out, "{}}}", INDENT.repeat(depth));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;

    #[test]
    fn canonical_layout() {
        let text = "model m { variable v { fn table(u){(a)->x;default->y} domain {x,y} }
                    exogenous u { prior {1/4, 3/4} domain {a,b} } }";
        let model = parse(text).unwrap().model;
        let expected = "\
model m {
  exogenous u {
    domain {a, b}
    prior {0.25, 0.75}
  }

  variable v {
    domain {x, y}
    fn table (u) {
      (a) -> x;
      default -> y;
    }
  }
}
";
        assert_eq!(serialize(&model), expected);
        assert_eq!(parse(expected).unwrap().model, model);
    }

    #[test]
    fn nested_table_in_branch_round_trips() {
        let text = "model m {
          exogenous u { domain {a, b} prior {0.5, 0.5} }
          exogenous w { domain {a, b} prior {0.5, 0.5} }
          variable v { domain {x, y} fn if u == a then table (w) { (a) -> x; (b) -> y; } else (x) }
        }";
        let model = parse(text).unwrap().model;
        let once = serialize(&model);
        let again = parse(&once).unwrap().model;
        assert_eq!(again, model);
        assert_eq!(serialize(&again), once);
    }
}
