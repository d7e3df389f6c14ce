//! The `cfaudit` command line.

pub mod app;
pub mod report;

pub use app::{run, Cli, Status};
pub use report::ReportDocument;
