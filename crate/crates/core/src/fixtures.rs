//! Small packaged knowledge bases used by examples and tests.

use crate::kb::{load_kb, KbFormat, KnowledgeBase};

/// Wines of the Tulum Valley sub-region with their alcohol content.
pub const WINE_TSV: &str = include_str!("../data/wine.tsv");

/// Elie Wiesel's immediate family.
pub const ELIE_WIESEL_TSV: &str = include_str!("../data/elie_wiesel.tsv");

/// "Which wine from the Tulum Valley has the highest percentage of alcohol?"
pub const WINE_PROGRAM: &str =
    "(ARGMAX (JOIN wine.wine.wine_sub_region_inv Tulum_Valley) wine.wine.percentage_alcohol)";

/// "Who are the male children of Elie Wiesel?"
pub const ELIE_WIESEL_PROGRAM: &str =
    "(CONS (JOIN people.person.children Elie_Wiesel) people.person.gender Male)";

pub fn wine_kb() -> KnowledgeBase {
    load_kb(WINE_TSV.as_bytes(), KbFormat::TriplesTsv).expect("packaged fixture loads")
}

pub fn elie_wiesel_kb() -> KnowledgeBase {
    load_kb(ELIE_WIESEL_TSV.as_bytes(), KbFormat::TriplesTsv).expect("packaged fixture loads")
}

/// One hundred questions with their hand-labeled literal spans, one JSON
/// object per line.
pub const LITERAL_UTTERANCES_JSONL: &str = include_str!("../data/literals.jsonl");

#[derive(Debug, Clone, serde::Deserialize)]
pub struct LabeledSpan {
    pub text: String,
    /// Tagged value text, e.g. `2015^^datetime`.
    pub value: String,
}

#[derive(Debug, Clone, serde::Deserialize)]
pub struct LabeledUtterance {
    pub question: String,
    pub literals: Vec<LabeledSpan>,
}

pub fn literal_utterances() -> Vec<LabeledUtterance> {
    LITERAL_UTTERANCES_JSONL
        .lines()
        .map(|l| serde_json::from_str(l).expect("packaged fixture parses"))
        .collect()
}
