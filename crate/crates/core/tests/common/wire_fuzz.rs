//! Malformed-message fuzzing of the scorer service.

use kbqa_core::scorer::{decode_response, encode_request, CandidateKind, Model, Request, Response, Server, WireCandidate};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn valid_lines(rng: &mut ChaCha8Rng) -> Vec<String> {
    let cand = |i| WireCandidate { index: i, surface: "film".into(), text: "film".into(), token: CandidateKind::Schema };
    vec![
        encode_request(&Request::Hello),
        encode_request(&Request::Reset { question: vec!["which".into(), "film".into()] }),
        encode_request(&Request::Step { session: "s1".into(), admissible: (0..rng.gen_range(1..4)).map(cand).collect() }),
        encode_request(&Request::Fork { session: "s1".into() }),
        encode_request(&Request::Commit { session: "s2".into(), chosen_index: rng.gen_range(0..5) }),
        encode_request(&Request::Drop { session: "s1".into() }),
    ]
}

pub fn mutate(rng: &mut ChaCha8Rng, line: &str) -> String {
    let mut bytes = line.as_bytes().to_vec();
    match rng.gen_range(0..6) {
        0 => bytes.truncate(rng.gen_range(0..=bytes.len())),
        1 => {
            for _ in 0..rng.gen_range(1..4) {
                let i = rng.gen_range(0..bytes.len().max(1));
                if i < bytes.len() {
                    bytes[i] = rng.gen();
                }
            }
        }
        2 => {
            let i = rng.gen_range(0..=bytes.len());
            let junk: &[u8] = [&b"null"[..], b"-1", b"1e999", b"\"\\u0000\"", b"{}", b"[", b"\"v\":2"].choose(rng).unwrap();
            bytes.splice(i..i, junk.iter().copied());
        }
        3 => return (0..rng.gen_range(0..64)).map(|_| rng.gen::<char>()).collect(),
        4 => {
            let mut v: serde_json::Value = serde_json::from_str(line).unwrap();
            let keys: Vec<String> = v.as_object().unwrap().keys().cloned().collect();
            let k = keys.choose(rng).unwrap().clone();
            let replacement: serde_json::Value =
                [serde_json::json!(null), serde_json::json!(-3), serde_json::json!("x"), serde_json::json!([1, 2]), serde_json::json!({"a": 1}), serde_json::json!(usize::MAX)]
                    .choose(rng)
                    .unwrap()
                    .clone();
            v[&k] = replacement;
            return v.to_string();
        }
        _ => {
            let mut v: serde_json::Value = serde_json::from_str(line).unwrap();
            let keys: Vec<String> = v.as_object().unwrap().keys().cloned().collect();
            v.as_object_mut().unwrap().remove(keys.choose(rng).unwrap());
            return v.to_string();
        }
    }
    String::from_utf8_lossy(&bytes).into_owned()
}

/// Throws `count` malformed or out-of-order lines at a server; every reply
/// must be a well-formed response. Returns how many were errors.
pub fn fuzz_server(model: &Model, seed: u64, count: usize) -> Result<usize, String> {
    let mut server = Server::new(model, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut errors = 0;
    for _ in 0..count {
        let lines = valid_lines(&mut rng);
        let base = lines.choose(&mut rng).unwrap();
        let line = if rng.gen_bool(0.2) { base.clone() } else { mutate(&mut rng, base) };
        let reply = server.handle_line(&line);
        let resp = decode_response(&reply).map_err(|e| format!("reply `{reply}` to `{line}` is malformed: {e}"))?;
        if matches!(resp, Response::Error { .. }) {
            errors += 1;
        }
    }
    // still serving
    let reply = server.handle_line(&encode_request(&Request::Hello));
    if decode_response(&reply) != Ok(Response::Hello { max_admissible: 8 }) {
        return Err(format!("server stopped answering: {reply}"));
    }
    Ok(errors)
}

