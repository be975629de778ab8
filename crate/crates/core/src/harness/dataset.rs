use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::literals::identify_literals;
use crate::kb::{KnowledgeBase, Literal};
use crate::sexpr::{execute_program, parse, Program};

/// One entity-linker output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkedEntity {
    #[serde(default)]
    pub mention: String,
    pub entity: String,
    #[serde(default = "one")]
    pub score: f64,
}

fn one() -> f64 {
    1.0
}

/// One question/program pair as stored on disk (one JSON object per line).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub question: String,
    pub program: String,
    #[serde(default)]
    pub entities: Vec<LinkedEntity>,
    /// Tagged literals such as `7.5^^numeric`. When absent they are
    /// identified from the question text.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub literals: Option<Vec<String>>,
}

/// Entity-linker output for one example, keyed by example id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityLinks {
    pub id: String,
    pub entities: Vec<LinkedEntity>,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Why an example failed validation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub id: String,
    pub message: String,
}

/// An example resolved against a KB and ready to decode.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub example: Example,
    pub gold: Program,
    /// Linked entities present in the KB, best score first.
    pub entities: Vec<String>,
    pub literals: Vec<Literal>,
    /// Question words in order.
    pub words: Vec<String>,
}

fn read_jsonl<T: for<'de> Deserialize<'de>, R: BufRead>(reader: R) -> Result<Vec<T>, DatasetError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| DatasetError::Format { line: i + 1, message: e.to_string() })?);
    }
    Ok(out)
}

pub fn read_examples<R: BufRead>(reader: R) -> Result<Vec<Example>, DatasetError> {
    read_jsonl(reader)
}

pub fn read_entity_links<R: BufRead>(reader: R) -> Result<Vec<EntityLinks>, DatasetError> {
    read_jsonl(reader)
}

pub fn write_examples<W: Write>(examples: &[Example], mut out: W) -> std::io::Result<()> {
    for ex in examples {
        serde_json::to_writer(&mut out, ex)?;
        writeln!(out)?;
    }
    Ok(())
}

/// Replaces each example's linked entities with those from a link file.
/// Examples without an entry keep what they had.
pub fn apply_entity_links(examples: &mut [Example], links: &[EntityLinks]) {
    let by_id: HashMap<&str, &EntityLinks> = links.iter().map(|l| (l.id.as_str(), l)).collect();
    for ex in examples {
        if let Some(l) = by_id.get(ex.id.as_str()) {
            ex.entities = l.entities.clone();
        }
    }
}

/// Splits a question into words on whitespace and punctuation, lowercased.
pub fn question_words(question: &str) -> Vec<String> {
    question
        .split(|c: char| !(c.is_alphanumeric() || c == '.' || c == '-'))
        .map(|w| w.trim_matches(|c: char| c == '.' || c == '-').to_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}

impl Example {
    /// Literals from the record, or identified from the question.
    pub fn resolve_literals(&self) -> Result<Vec<Literal>, String> {
        match &self.literals {
            Some(texts) => texts
                .iter()
                .map(|t| match parse(t, &crate::sexpr::NamingConvention) {
                    Ok(Program::Literal(l)) => Ok(l),
                    _ => Err(format!("`{t}` is not a tagged literal")),
                })
                .collect(),
            None => Ok(identify_literals(&self.question).into_iter().map(|s| s.literal).collect()),
        }
    }
}

/// Resolves one example. Unknown linked entities are dropped with a note in
/// `notes`; everything else that is wrong is an error.
pub fn prepare(kb: &KnowledgeBase, example: &Example, notes: &mut Vec<String>) -> Result<Prepared, String> {
    let gold = parse(&example.program, kb).map_err(|e| format!("gold program does not parse: {e}"))?;
    let mut linked: Vec<&LinkedEntity> = example.entities.iter().collect();
    linked.sort_by(|a, b| b.score.total_cmp(&a.score));
    let mut entities: Vec<String> = Vec::new();
    for l in linked {
        if kb.entity_id(&l.entity).is_none() {
            notes.push(format!("linked entity `{}` is not in the knowledge base", l.entity));
        } else if !entities.contains(&l.entity) {
            entities.push(l.entity.clone());
        }
    }
    let literals = example.resolve_literals()?;
    Ok(Prepared { example: example.clone(), gold, entities, literals, words: question_words(&example.question) })
}

/// Keeps the examples whose gold program parses and executes to a non-empty
/// denotation; reports the rest.
pub fn validate(kb: &KnowledgeBase, examples: &[Example]) -> (Vec<Prepared>, Vec<Diagnostic>) {
    let mut ok = Vec::new();
    let mut bad = Vec::new();
    for ex in examples {
        let mut notes = Vec::new();
        let result = prepare(kb, ex, &mut notes).and_then(|p| match execute_program(kb, &p.gold) {
            Ok(d) if d.is_empty() => Err("gold program executes to an empty denotation".to_string()),
            Ok(_) => Ok(p),
            Err(e) => Err(format!("gold program fails to execute: {e}")),
        });
        match result {
            Ok(p) => ok.push(p),
            Err(message) => bad.push(Diagnostic { id: ex.id.clone(), message }),
        }
    }
    (ok, bad)
}
