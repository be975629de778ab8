mod common;

#[test]
fn admissible_sets_match_try_all_tokens() {
    let t = common::admissible_trial(1, 2_000).unwrap();
    assert!(t.cases >= 2_000);
}

#[test]
fn random_walks_finish_with_executable_programs() {
    let t = common::walk_trial(1, 2_000).unwrap();
    assert!(t.positive > t.cases / 2, "{t:?}");
}
