use kbqa_core::harness::{build_vocabulary, evaluate, oracle_for, synth, validate, VocabMode};
use kbqa_core::induction::{DecodeConfig, Inducer};

#[test]
fn oracle_scorer_reproduces_every_gold_program() {
    let s = synth::generate(0);
    let all: Vec<_> = s.train.iter().chain(&s.heldout).cloned().collect();
    let (prepared, bad) = validate(&s.kb, &all);
    assert!(bad.is_empty(), "{bad:?}");
    let vocab = build_vocabulary(&s.kb, VocabMode::KbWide, &prepared);
    let inducer = Inducer::new(&s.kb);
    let report = evaluate(&s.kb, &prepared, &vocab, &DecodeConfig::default(), |ex| oracle_for(&inducer, ex));
    let misses: Vec<_> = report.examples.iter().filter(|r| !r.em).collect();
    assert!(misses.is_empty(), "{misses:#?}");
    assert_eq!(report.em, 1.0);
    assert_eq!(report.f1, 1.0);
}
