use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use dynqa_core::estimator::{synthesize_observations, track_scene, EstimatorConfig, NoiseModel};
use dynqa_core::executor::{execute, ExecContext};
use dynqa_core::generator::{generate_scene, GeneratorConfig};
use dynqa_core::parser::ParseGrammar;
use dynqa_core::physics::{simulate, step, world_at};
use dynqa_core::questions::{generate_questions, QuestionMix, TemplateSet};

fn physics(c: &mut Criterion) {
    let scene = generate_scene("bench", &GeneratorConfig::default(), 3).unwrap();
    let world = world_at(&scene, 0);
    c.bench_function("step", |b| b.iter(|| step(black_box(&world), &scene.config).unwrap()));
    c.bench_function("simulate_120", |b| b.iter(|| simulate(black_box(&world), &scene.config).unwrap()));
    c.bench_function("generate_scene", |b| {
        let mut seed = 0;
        b.iter(|| {
            seed += 1;
            generate_scene("bench", &GeneratorConfig::default(), seed).unwrap()
        })
    });
}

fn questions(c: &mut Criterion) {
    let templates = TemplateSet::builtin();
    let scene = generate_scene("bench", &GeneratorConfig::default(), 5).unwrap();
    let qs = generate_questions(&scene, &templates, QuestionMix::default(), 1).unwrap();
    c.bench_function("execute_scene_questions", |b| {
        b.iter(|| {
            for q in &qs {
                let ctx = ExecContext::ground_truth(&scene, q.observed_frames).unwrap();
                black_box(execute(&q.program, &ctx).unwrap());
            }
        })
    });
    let grammar = ParseGrammar::new(&templates);
    c.bench_function("parse_scene_questions", |b| {
        b.iter(|| {
            for q in &qs {
                black_box(grammar.parse(&q.text).unwrap());
            }
        })
    });
}

fn estimation(c: &mut Criterion) {
    let scene = generate_scene("bench", &GeneratorConfig::default(), 7).unwrap();
    let obs = synthesize_observations(&scene, &NoiseModel::default());
    let config = EstimatorConfig::default();
    c.bench_function("track_scene", |b| {
        b.iter_batched(|| obs.clone(), |o| track_scene(&o, &config).unwrap(), BatchSize::SmallInput)
    });
}

criterion_group!(benches, physics, questions, estimation);
criterion_main!(benches);
