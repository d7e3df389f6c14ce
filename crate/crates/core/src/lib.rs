//! Counterfactual queries and fairness audits on finite structural causal
//! models.
//!
//! ```
//! use cfaudit_core::{corpus, fairness, CompiledModel, Criterion, Verdict};
//!
//! let doc = corpus::get("scenario_2").unwrap().document();
//! let model = CompiledModel::new(doc.model).unwrap();
//! let audit = fairness::full_audit(&model, fairness::DEFAULT_TOLERANCE).unwrap();
//! assert_eq!(audit.verdict(Criterion::CounterfactualFairness), Some(Verdict::Violated));
//! assert_eq!(audit.verdict(Criterion::CausalRelevanceFairness), Some(Verdict::Satisfied));
//! ```

pub mod corpus;
pub mod dsl;
pub mod engine;
mod error;
pub mod fairness;
pub mod format;
pub mod oracle;
pub mod scm;

pub use engine::{counterfactual_query, CompiledModel, Context, Distribution};
pub use error::{Error, Result};
pub use fairness::{audit, full_audit, Audit, AuditReport, Criterion, Verdict};
pub use scm::{CausalModel, Evidence, Expr, Intervention, Roles};
