use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kbqa_core::harness::{enumerate_two_hop, synth, validate};
use kbqa_core::induction::{decode, DecodeConfig};
use kbqa_core::scorer::{Model, ModelConfig};

fn bench_decode(c: &mut Criterion) {
    let world = synth::generate(7);
    let model = Model::new(&world.embeddings, ModelConfig { d: 32, ..Default::default() });
    let (prepared, _) = validate(&world.kb, &world.heldout);
    let questions = &prepared[..prepared.len().min(20)];

    let mut group = c.benchmark_group("decode");
    group.sample_size(20);
    for beam in [1, 5, 10] {
        let config = DecodeConfig { beam_width: beam, ..Default::default() };
        group.bench_with_input(BenchmarkId::new("beam", beam), &config, |b, config| {
            b.iter(|| {
                for ex in questions {
                    decode(&world.kb, &model, &ex.words, &ex.entities, &ex.literals, config, None).unwrap();
                }
            })
        });
    }
    group.bench_function("two_hop_enumeration", |b| {
        b.iter(|| {
            for ex in questions {
                enumerate_two_hop(&world.kb, &ex.entities, &ex.literals);
            }
        })
    });
    group.finish();
}

criterion_group!(benches, bench_decode);
criterion_main!(benches);
