//! Independent recomputation of the step scorer and a finite-difference
//! gradient check.

use kbqa_core::induction::{ForcedStep, SPECIAL_COUNT};
use kbqa_core::scorer::{tokenize, Candidate, CandidateKind, EmbeddingTable, Mat, Model, ModelConfig, RECENCY_SLOTS, TENSOR_NAMES};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const WORDS: [&str; 7] = ["which", "film", "director", "born", "after", "city", "population"];

fn cand(rng: &mut ChaCha8Rng, index: usize) -> Candidate {
    let surface = {
        let n = rng.gen_range(1..=3);
        // "zzz" is out of vocabulary
        let pool = ["film", "director", "born", "city", "population", "zzz", "people.person"];
        (0..n).map(|_| *pool.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
    };
    let kind = match index % 4 {
        0 => CandidateKind::Special { index: rng.gen_range(0..SPECIAL_COUNT) },
        1 => CandidateKind::SubRef { distance: rng.gen_range(0..RECENCY_SLOTS + 2) },
        2 => CandidateKind::Schema,
        _ => CandidateKind::Constant,
    };
    Candidate { text: format!("c{index}"), surface, kind }
}

/// A small model with a random question and random teacher-forced steps
/// that use every candidate kind.
pub fn random_case(seed: u64, d: usize) -> (Model, Vec<String>, Vec<ForcedStep>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let table = EmbeddingTable::random(WORDS.iter().map(|w| w.to_string()).collect(), 4, seed);
    let config = ModelConfig { d, freeze_embeddings: false, seed, init_scale: 0.5 };
    let model = Model::new(&table, config);
    let question: Vec<String> = (0..rng.gen_range(2..=6)).map(|_| (*WORDS.choose(&mut rng).unwrap()).to_string()).chain(["unknownword".to_string()]).collect();
    let steps = (0..rng.gen_range(2..=4))
        .map(|_| {
            let m = rng.gen_range(4..=7);
            let candidates: Vec<Candidate> = (0..m).map(|i| cand(&mut rng, i)).collect();
            ForcedStep { gold: rng.gen_range(0..m), candidates }
        })
        .collect();
    (model, question, steps)
}

fn t<'a>(model: &'a Model, name: &str) -> &'a Mat {
    model.tensor(name).expect("tensor exists")
}

fn matvec(m: &Mat, x: &[f64]) -> Vec<f64> {
    (0..m.rows).map(|r| (0..m.cols).map(|c| m.get(r, c) * x[c]).sum()).collect()
}

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn cell(model: &Model, prefix: &str, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let d = h.len();
    let a = matvec(t(model, &format!("{prefix}_w_ih")), x);
    let r = matvec(t(model, &format!("{prefix}_w_hh")), h);
    let b = &t(model, &format!("{prefix}_b")).data;
    let g: Vec<f64> = (0..4 * d).map(|k| a[k] + r[k] + b[k]).collect();
    let mut h2 = vec![0.0; d];
    let mut c2 = vec![0.0; d];
    for k in 0..d {
        let (i, f, u, o) = (sig(g[k]), sig(g[d + k]), g[2 * d + k].tanh(), sig(g[3 * d + k]));
        c2[k] = f * c[k] + i * u;
        h2[k] = o * c2[k].tanh();
    }
    (h2, c2)
}

fn word_vec(model: &Model, row: usize) -> Vec<f64> {
    t(model, "words").row(row).to_vec()
}

fn rows_of(model: &Model, text: &str) -> Vec<usize> {
    let rows: Vec<usize> = tokenize(text).iter().flat_map(|w| model.word_rows(w)).collect();
    if rows.is_empty() {
        vec![0]
    } else {
        rows
    }
}

fn candidate_vec(model: &Model, c: &Candidate, d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d];
    let dw = model.word_dim();
    match c.kind {
        CandidateKind::Special { index } => {
            // specials have no word pieces
            out.copy_from_slice(t(model, "special").row(index));
            return out;
        }
        CandidateKind::SubRef { distance } => {
            out.copy_from_slice(t(model, "recency").row(distance.min(RECENCY_SLOTS - 1)));
        }
        _ => {}
    }
    let rows = rows_of(model, &c.surface);
    let mut mean = vec![0.0; dw];
    for &r in &rows {
        for (m, v) in mean.iter_mut().zip(word_vec(model, r)) {
            *m += v / rows.len() as f64;
        }
    }
    for (o, p) in out.iter_mut().zip(matvec(t(model, "proj"), &mean)) {
        *o += p;
    }
    out
}

fn log_softmax(xs: &[f64]) -> Vec<f64> {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z = xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln() + m;
    xs.iter().map(|x| x - z).collect()
}

/// Log-probabilities of every candidate at every step, following the gold
/// choices, computed with plain loops straight from the tensors.
pub fn recompute(model: &Model, question: &[String], steps: &[ForcedStep]) -> Vec<Vec<f64>> {
    let d = model.config().d;
    let mut rows: Vec<usize> = question.iter().flat_map(|w| model.word_rows(w)).collect();
    if rows.is_empty() {
        rows.push(0);
    }
    let (mut h, mut c) = (vec![0.0; d], vec![0.0; d]);
    let mut q: Vec<Vec<f64>> = Vec::new();
    for &r in &rows {
        (h, c) = cell(model, "enc", &word_vec(model, r), &h, &c);
        q.push(h.clone());
    }
    let mut x = vec![0.0; d];
    for k in 0..d {
        x.push(q.iter().map(|row| row[k]).sum::<f64>() / q.len() as f64);
    }
    let (mut h, mut c) = (vec![0.0; d], vec![0.0; d]);
    let mut out = Vec::new();
    for step in steps {
        (h, c) = cell(model, "dec", &x, &h, &c);
        let w: Vec<Vec<f64>> = step.candidates.iter().map(|cand| candidate_vec(model, cand, d)).collect();
        let logits: Vec<f64> = w.iter().map(|row| row.iter().zip(&h).map(|(a, b)| a * b).sum()).collect();
        out.push(log_softmax(&logits));
        let scores: Vec<f64> = q.iter().map(|row| row.iter().zip(&h).map(|(a, b)| a * b).sum()).collect();
        let attn: Vec<f64> = log_softmax(&scores).into_iter().map(f64::exp).collect();
        let mut next = w[step.gold].clone();
        for k in 0..d {
            next.push(q.iter().zip(&attn).map(|(row, a)| a * row[k]).sum());
        }
        x = next;
    }
    out
}

/// Largest per-tensor relative error `|g - n| / (|g| + |n|)` between the
/// tape gradient and central differences.
pub fn gradcheck(seed: u64, d: usize) -> Result<f64, String> {
    let (mut model, question, steps) = random_case(seed, d);
    let (_, grads) = model.loss_and_grads(&question, &steps);
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for (i, name) in TENSOR_NAMES.iter().enumerate() {
        let g = grads[i].as_ref().ok_or_else(|| format!("no gradient for {name}"))?;
        let mut diff = 0.0;
        let mut norm_g = 0.0;
        let mut norm_n = 0.0;
        for j in 0..model.params()[i].data.len() {
            let orig = model.params()[i].data[j];
            model.params_mut()[i].data[j] = orig + eps;
            let up = model.loss(&question, &steps);
            model.params_mut()[i].data[j] = orig - eps;
            let down = model.loss(&question, &steps);
            model.params_mut()[i].data[j] = orig;
            let n = (up - down) / (2.0 * eps);
            diff += (g.data[j] - n).powi(2);
            norm_g += g.data[j].powi(2);
            norm_n += n.powi(2);
        }
        let denom = norm_g.sqrt() + norm_n.sqrt();
        if denom == 0.0 {
            return Err(format!("{name}: zero gradient"));
        }
        worst = worst.max(diff.sqrt() / denom);
    }
    Ok(worst)
}
