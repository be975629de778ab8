mod common;

use kbqa_core::harness::{synth, validate};
use kbqa_core::induction::{decode, DecodeConfig};
use kbqa_core::scorer::{Candidate, CandidateKind, Loopback, Model, ModelConfig, RemoteScorer, Scorer, Server};

fn small_model(s: &synth::Synthetic) -> Model {
    Model::new(&s.embeddings, ModelConfig { d: 16, seed: 4, ..Default::default() })
}

#[test]
fn remote_decoding_is_identical_to_in_process() {
    let s = synth::generate(0);
    let (prepared, _) = validate(&s.kb, &s.train[..40]);
    let model = small_model(&s);
    let remote = RemoteScorer::connect(Loopback(Server::new(&model, 10_000))).unwrap();
    let config = DecodeConfig::default();
    for ex in &prepared {
        let local = decode(&s.kb, &model, &ex.words, &ex.entities, &ex.literals, &config, None).unwrap();
        let wired = decode(&s.kb, &remote, &ex.words, &ex.entities, &ex.literals, &config, None).unwrap();
        assert_eq!(local.hypotheses.len(), wired.hypotheses.len());
        for (a, b) in local.hypotheses.iter().zip(&wired.hypotheses) {
            assert_eq!(a.program.to_string(), b.program.to_string());
            assert_eq!(a.log_prob.to_bits(), b.log_prob.to_bits());
        }
    }
}

#[test]
fn one_connection_serves_many_questions() {
    let s = synth::generate(0);
    let (prepared, _) = validate(&s.kb, &s.train[..5]);
    let model = small_model(&s);
    let remote = RemoteScorer::connect(Loopback(Server::new(&model, 10_000))).unwrap();
    for ex in &prepared {
        decode(&s.kb, &remote, &ex.words, &ex.entities, &ex.literals, &DecodeConfig::default(), None).unwrap();
    }
    let session = remote.reset(&["probe".to_string()]).unwrap();
    remote.release(session);
}

#[test]
fn malformed_messages_get_error_replies() {
    let s = synth::generate(0);
    let model = small_model(&s);
    let errors = common::wire_fuzz::fuzz_server(&model, 7, 5_000).unwrap();
    assert!(errors > 2_500, "{errors}");
}

#[test]
fn remote_errors_surface_as_scorer_errors() {
    let s = synth::generate(0);
    let model = small_model(&s);
    let remote = RemoteScorer::connect(Loopback(Server::new(&model, 2))).unwrap();
    assert_eq!(remote.max_admissible(), 2);
    let session = remote.reset(&["film".to_string()]).unwrap();
    let c = Candidate { text: "a".into(), surface: "a".into(), kind: CandidateKind::Schema };
    assert!(remote.step(&session, &vec![c.clone(); 3]).is_err());
    let (scores, pending) = remote.step(&session, &[c.clone(), c]).unwrap();
    assert_eq!(scores.len(), 2);
    assert!(remote.commit(&session, &pending, 5).is_err());
    assert!(remote.step(&"s999".to_string(), &[]).is_err());
}
