//! Bundled example models.

use crate::dsl::{self, ModelDocument};

#[derive(Debug, Clone, Copy)]
pub struct CorpusEntry {
    pub name: &'static str,
    pub description: &'static str,
    pub source: &'static str,
}

impl CorpusEntry {
    pub fn file_name(&self) -> String {
        format!("{}.scm.txt", self.name)
    }

    pub fn document(&self) -> ModelDocument {
        dsl::parse(self.source).unwrap_or_else(|d| panic!("bundled model {} does not parse: {d:?}", self.name))
    }
}

macro_rules! entry {
    ($name:literal, $description:literal) => {
        CorpusEntry {
            name: $name,
            description: $description,
            source: include_str!(concat!("../corpus/", $name, ".scm.txt")),
        }
    };
}

pub const CORPUS: [CorpusEntry; 6] = [
    entry!(
        "scenario_1",
        "identical profiles, only skin colour differs; score reads the profile"
    ),
    entry!(
        "scenario_2",
        "profile downstream of skin colour; score and resemblance both follow it"
    ),
    entry!(
        "structure_a",
        "protected attribute feeds the predictor only (recidivism)"
    ),
    entry!(
        "structure_b",
        "protected attribute affects both, the target more strongly (accident risk)"
    ),
    entry!(
        "structure_c",
        "protected attribute feeds the target only (learning difficulty)"
    ),
    entry!("structure_d", "protected attribute isolated (creditworthiness)"),
];

pub fn get(name: &str) -> Option<&'static CorpusEntry> {
    CORPUS.iter().find(|e| e.name == name)
}
