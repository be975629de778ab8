use std::collections::BTreeSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::dataset::{Diagnostic, Prepared};
use crate::induction::{decode, gold_path, DecodeConfig, GoldError, Inducer, SchemaFilter, Vocabulary};
use crate::kb::KnowledgeBase;
use crate::scorer::{OracleScorer, Scorer, TrainExample};
use crate::sexpr::{execute_program, Program};

/// Which schema items the decoder may emit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VocabMode {
    /// Every relation and class of the KB.
    #[default]
    KbWide,
    /// Only schema items seen in training programs.
    TrainOnly,
}

impl std::str::FromStr for VocabMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "kb-wide" => Ok(VocabMode::KbWide),
            "train-only" => Ok(VocabMode::TrainOnly),
            other => Err(format!("unknown vocabulary mode `{other}`")),
        }
    }
}

pub fn build_vocabulary(kb: &KnowledgeBase, mode: VocabMode, train: &[Prepared]) -> Vocabulary {
    match mode {
        VocabMode::KbWide => Vocabulary::kb_wide(kb),
        VocabMode::TrainOnly => Vocabulary::from_programs(train.iter().map(|p| &p.gold)),
    }
}

/// Exact match after normalization.
pub fn exact_match(predicted: &Program, gold: &Program) -> bool {
    predicted.normalize() == gold.normalize()
}

/// Harmonic mean of precision and recall; 0 when either set is empty.
pub fn f1(predicted: &BTreeSet<String>, gold: &BTreeSet<String>) -> f64 {
    if predicted.is_empty() || gold.is_empty() {
        return 0.0;
    }
    let hit = predicted.intersection(gold).count() as f64;
    if hit == 0.0 {
        return 0.0;
    }
    let p = hit / predicted.len() as f64;
    let r = hit / gold.len() as f64;
    2.0 * p * r / (p + r)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExampleResult {
    pub id: String,
    pub question: String,
    pub gold: String,
    pub predicted: Option<String>,
    pub em: bool,
    pub f1: f64,
    pub latency_ms: f64,
    pub mean_admissible: f64,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub count: usize,
    pub em: f64,
    pub f1: f64,
    pub mean_latency_ms: f64,
    pub mean_admissible: f64,
    pub vocabulary_size: usize,
    pub beam_width: usize,
    pub examples: Vec<ExampleResult>,
    /// Examples rejected before decoding.
    pub skipped: Vec<Diagnostic>,
}

/// Decodes every example and scores the top program. `scorer_for` supplies
/// the scorer for each example; its cost is not counted as latency.
pub fn evaluate<S: Scorer>(
    kb: &KnowledgeBase,
    examples: &[Prepared],
    vocabulary: &Vocabulary,
    config: &DecodeConfig,
    mut scorer_for: impl FnMut(&Prepared) -> Result<S, String>,
) -> EvalReport {
    let filter = vocabulary.schema_filter(kb);
    let mut results = Vec::with_capacity(examples.len());
    for ex in examples {
        results.push(evaluate_one(kb, ex, &filter, config, &mut scorer_for));
    }
    let n = results.len().max(1) as f64;
    EvalReport {
        count: results.len(),
        em: results.iter().filter(|r| r.em).count() as f64 / n,
        f1: results.iter().map(|r| r.f1).sum::<f64>() / n,
        mean_latency_ms: results.iter().map(|r| r.latency_ms).sum::<f64>() / n,
        mean_admissible: results.iter().map(|r| r.mean_admissible).sum::<f64>() / n,
        vocabulary_size: vocabulary.len(),
        beam_width: config.beam_width,
        examples: results,
        skipped: Vec::new(),
    }
}

fn evaluate_one<S: Scorer>(
    kb: &KnowledgeBase,
    ex: &Prepared,
    filter: &SchemaFilter,
    config: &DecodeConfig,
    scorer_for: &mut impl FnMut(&Prepared) -> Result<S, String>,
) -> ExampleResult {
    let mut result = ExampleResult {
        id: ex.example.id.clone(),
        question: ex.example.question.clone(),
        gold: ex.gold.to_string(),
        predicted: None,
        em: false,
        f1: 0.0,
        latency_ms: 0.0,
        mean_admissible: 0.0,
        diagnostics: Vec::new(),
    };
    let scorer = match scorer_for(ex) {
        Ok(s) => s,
        Err(e) => {
            result.diagnostics.push(e);
            return result;
        }
    };
    let start = Instant::now();
    let out = decode(kb, &scorer, &ex.words, &ex.entities, &ex.literals, config, Some(filter));
    result.latency_ms = start.elapsed().as_secs_f64() * 1e3;
    let out = match out {
        Ok(o) => o,
        Err(e) => {
            result.diagnostics.push(format!("decode failed: {e}"));
            return result;
        }
    };
    result.mean_admissible = out.mean_admissible();
    result.diagnostics.extend(out.diagnostics.iter().cloned());
    let Some(best) = out.best() else {
        result.diagnostics.push("no program found".into());
        return result;
    };
    result.predicted = Some(best.program.to_string());
    result.em = exact_match(&best.program, &ex.gold);
    match execute_program(kb, &ex.gold) {
        Ok(gold) => result.f1 = f1(&best.denotation.answer_strings(kb), &gold.answer_strings(kb)),
        Err(e) => result.diagnostics.push(format!("gold program fails to execute: {e}")),
    }
    result
}

/// Teacher-forcing targets for one example.
pub fn training_example(inducer: &Inducer<'_>, ex: &Prepared) -> Result<TrainExample, GoldError> {
    let path = gold_path(inducer, &ex.entities, &ex.literals, &ex.gold)?;
    Ok(TrainExample { id: ex.example.id.clone(), question: ex.words.clone(), steps: path.steps })
}

/// A scorer that follows the example's gold program.
pub fn oracle_for(inducer: &Inducer<'_>, ex: &Prepared) -> Result<OracleScorer, String> {
    gold_path(inducer, &ex.entities, &ex.literals, &ex.gold).map(|p| OracleScorer::new(p.texts)).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn f1_definition() {
        assert_eq!(f1(&set(&["a", "b"]), &set(&["a", "b"])), 1.0);
        assert_eq!(f1(&set(&["a", "b"]), &set(&["b", "c"])), 0.5);
        assert_eq!(f1(&set(&["b", "c"]), &set(&["a", "b"])), 0.5);
        assert_eq!(f1(&set(&[]), &set(&["a"])), 0.0);
        assert_eq!(f1(&set(&["x"]), &set(&["a"])), 0.0);
    }
}
