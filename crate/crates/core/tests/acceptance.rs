//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero when a criterion fails that is not a documented shortfall.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dynqa_core::dataset::{
    answer_dataset, estimate_dataset, evaluate_answers, generate_dataset, resimulate, sha256_hex, write_jsonl, Dataset,
    EstimateOptions, Estimates, GenerateOptions, ParserMode, StateSource,
};
use dynqa_core::estimator::dynamics::{derive_dynamics, moving_average};
use dynqa_core::estimator::{fuse_scalar, NoiseModel};
use dynqa_core::executor::ExecContext;
use dynqa_core::parser::ParseGrammar;
use dynqa_core::physics::{simulate, Body, SceneConfig, WorldState};
use dynqa_core::questions::{TemplateSet, PREDICTIVE_HORIZON};
use dynqa_core::{Color, DynamicState, ForceProfile, ObjectSpec, Rotation, Shape, Vec3};

/// Criteria expected to miss their target under the default noise setting.
/// Their result is still printed; only a regression past the recorded
/// partial result fails the run.
const KNOWN_SHORTFALLS: &[u32] = &[3];

struct Outcome {
    id: u32,
    pass: bool,
    summary: String,
    /// Weaker condition that must hold even for a known shortfall.
    floor: Option<bool>,
}

fn outcome(id: u32, pass: bool, summary: impl Into<String>) -> Outcome {
    Outcome { id, pass, summary: summary.into(), floor: None }
}

fn secs(d: Duration) -> String {
    format!("{:.1}s", d.as_secs_f64())
}

fn body(id: u32, shape: Shape, position: Vec3, velocity: Vec3, forces: ForceProfile) -> Body {
    let yaw = if velocity.horizontal().norm() > 0.0 { velocity.y.atan2(velocity.x) } else { 0.0 };
    Body {
        spec: ObjectSpec::new(id, shape, Color::Gray),
        forces,
        state: DynamicState { position, rotation: Rotation::from_yaw(yaw), velocity, acceleration: Vec3::ZERO },
    }
}

fn criterion_1(dir: &Path) -> Outcome {
    let start = Instant::now();
    let data = dir.join("desk");
    let options = GenerateOptions { workers: 1, ..GenerateOptions::scenes(100, 0) };
    let m = generate_dataset(&data, &options).expect("generate");
    let ds = Dataset::open(&data).unwrap();
    let qs = ds.questions().unwrap();
    let answers = answer_dataset(&ds, &qs, StateSource::GroundTruth, ParserMode::Stored, 1).unwrap();
    let r = evaluate_answers(&qs, &answers).unwrap();
    let elapsed = start.elapsed();
    let counts = &m.question_counts;
    outcome(
        1,
        r.overall.correct == r.overall.total && elapsed < Duration::from_secs(120),
        format!(
            "ground-truth self-consistency {}/{} ({} factual, {} predictive, {} counterfactual) in {}",
            r.overall.correct,
            r.overall.total,
            counts["factual"],
            counts["predictive"],
            counts["counterfactual"],
            secs(elapsed)
        ),
    )
}

struct Ablation {
    accuracy: [f64; 2],
    rmse: [f64; 2],
    f1: [f64; 2],
    elapsed: Duration,
}

fn ablation(dir: &Path) -> Ablation {
    let start = Instant::now();
    let data = dir.join("ablation");
    generate_dataset(&data, &GenerateOptions::scenes(40, 0)).unwrap();
    let ds = Dataset::open(&data).unwrap();
    let qs = ds.questions().unwrap();
    let mut out = Ablation { accuracy: [0.0; 2], rmse: [0.0; 2], f1: [0.0; 2], elapsed: Duration::ZERO };
    for (k, use_prior) in [true, false].into_iter().enumerate() {
        let est_dir = dir.join(if use_prior { "prior" } else { "baseline" });
        let m = estimate_dataset(&ds, &est_dir, &EstimateOptions::new(NoiseModel::default(), use_prior)).unwrap();
        let est = Estimates::open(&est_dir).unwrap();
        let answers = answer_dataset(&ds, &qs, StateSource::Estimated(&est), ParserMode::Stored, 0).unwrap();
        let r = evaluate_answers(&qs, &answers).unwrap();
        out.accuracy[k] = r.overall.accuracy;
        out.rmse[k] = m.mean_rmse.unwrap();
        out.f1[k] = m.collision_f1;
    }
    out.elapsed = start.elapsed();
    out
}

fn criterion_2(a: &Ablation) -> Outcome {
    let gain = 100.0 * (a.accuracy[0] - a.accuracy[1]);
    let reduction = 100.0 * (1.0 - a.rmse[0] / a.rmse[1]);
    outcome(
        2,
        gain >= 3.0 && reduction >= 20.0 && a.elapsed < Duration::from_secs(600),
        format!(
            "40 scenes: accuracy {:.2}% vs {:.2}% (+{gain:.2}pp, need 3), rmse {:.4} vs {:.4} m (-{reduction:.1}%, need 20) in {}",
            100.0 * a.accuracy[0],
            100.0 * a.accuracy[1],
            a.rmse[0],
            a.rmse[1],
            secs(a.elapsed)
        ),
    )
}

fn criterion_3(a: &Ablation) -> Outcome {
    let beats = a.f1[0] > a.f1[1];
    Outcome {
        id: 3,
        pass: a.f1[0] >= 0.9 && beats,
        summary: format!("collision f1 {:.4} (need 0.9) vs baseline {:.4} (must exceed: {beats})", a.f1[0], a.f1[1]),
        floor: Some(beats),
    }
}

fn criterion_4() -> Outcome {
    let mut worst = [0.0f64; 4];
    // (a) two bodies, no gravity, floor or friction.
    let free = SceneConfig { gravity: 0.0, floor: false, friction_floor: 0.0, friction_object: 0.0, ..Default::default() };
    let world = WorldState::new(vec![
        body(0, Shape::Sedan, Vec3::new(-3.0, 0.2, 2.0), Vec3::new(4.0, 0.0, 0.0), ForceProfile::default()),
        body(1, Shape::SchoolBus, Vec3::new(2.0, -0.1, 2.0), Vec3::new(-1.0, 0.3, 0.0), ForceProfile::default()),
    ]);
    let sim = simulate(&world, &free).unwrap();
    let masses: Vec<f64> = world.bodies.iter().map(|b| b.spec.mass).collect();
    let p0 = world.momentum();
    for f in 0..free.n_frames {
        let p: Vec3 = sim.trajectories.iter().zip(&masses).map(|(t, m)| t.states[f].velocity * *m).sum();
        worst[0] = worst[0].max((p - p0).norm() / p0.norm());
    }
    let collided = !sim.collisions.is_empty();

    // (b) equal masses head-on at 3 m/s each.
    let head_on = SceneConfig { friction_floor: 0.0, ..Default::default() };
    let world = WorldState::new(vec![
        body(0, Shape::Sedan, Vec3::new(-2.03, 0.0, 0.0), Vec3::new(3.0, 0.0, 0.0), ForceProfile::default()),
        body(1, Shape::Sedan, Vec3::new(2.03, 0.0, 0.0), Vec3::new(-3.0, 0.0, 0.0), ForceProfile::default()),
    ]);
    let sim = simulate(&world, &head_on).unwrap();
    let last = |i: usize| sim.trajectories[i].states.last().unwrap().velocity.x;
    worst[1] = (last(0) + 1.5).abs().max((last(1) - 1.5).abs());

    // (c) free fall over 60 frames.
    let fall = SceneConfig { n_frames: 61, ..Default::default() };
    let world = WorldState::new(vec![body(0, Shape::Jet, Vec3::new(0.0, 0.0, 10.0), Vec3::ZERO, ForceProfile::default())]);
    let sim = simulate(&world, &fall).unwrap();
    let dt = fall.dt;
    for n in 0..=60usize {
        let expected = 10.0 - fall.gravity * dt * dt * (n * (n + 1)) as f64 / 2.0;
        worst[2] = worst[2].max((sim.trajectories[0].states[n].position.z - expected).abs());
    }
    let drop = 10.0 - sim.trajectories[0].states[60].position.z;

    // (d) floating plane in level flight.
    let world = WorldState::new(vec![body(
        0,
        Shape::Airliner,
        Vec3::new(0.0, 0.0, 3.0),
        Vec3::new(3.0, 0.0, 0.0),
        ForceProfile::new(false, true),
    )]);
    let sim = simulate(&world, &SceneConfig::default()).unwrap();
    worst[3] = sim.trajectories[0].states.iter().map(|s| (s.position.z - 3.0).abs()).fold(0.0, f64::max);

    outcome(
        4,
        collided && worst.iter().all(|w| *w <= 1e-9),
        format!(
            "momentum rel err {:.1e}, restitution err {:.1e}, free-fall err {:.1e} (drop {drop:.6} m), float drift {:.1e}",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

/// Maximizer of the product of two Gaussian densities, located by bisection
/// on the sign of the log-density slope.
fn brute_force_map(mu: f64, vp: f64, z: f64, vo: f64) -> f64 {
    let slope = |x: f64| -(x - mu) / vp - (x - z) / vo;
    let (mut lo, mut hi) = (mu.min(z), mu.max(z));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if slope(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut cases = vec![(1.0, 3.0, 4.0, 1.0)];
    while cases.len() < 101 {
        cases.push((
            rng.random_range(-20.0..20.0),
            rng.random_range(1e-3..10.0),
            rng.random_range(-20.0..20.0),
            rng.random_range(1e-3..10.0),
        ));
    }
    let worst = cases
        .iter()
        .map(|&(mu, vp, z, vo)| (fuse_scalar(mu, vp, Some(z), vo) - brute_force_map(mu, vp, z, vo)).abs())
        .fold(0.0, f64::max);
    let worked = fuse_scalar(1.0, 3.0, Some(4.0), 1.0);
    outcome(
        5,
        worst <= 1e-6 && (worked - 3.25).abs() <= 1e-12,
        format!("{} cases, max |closed form - brute force| {worst:.1e}, worked case {worked}", cases.len()),
    )
}

fn criterion_6() -> Outcome {
    let dt = 1.0 / 60.0;
    let (p0, v0, a0) = (Vec3::new(1.0, -2.0, 0.5), Vec3::new(3.0, 1.0, 0.0), Vec3::new(0.7, -1.3, 2.1));
    let positions: Vec<Vec3> =
        (0..120).map(|k| p0 + v0 * (k as f64 * dt) + a0 * (0.5 * (k as f64 * dt).powi(2))).collect();
    let (_, acc) = derive_dynamics(&positions, dt, 5);
    // The first backward difference is copied, so only frames whose both
    // smoothing windows avoid it are exact.
    let worst = acc[6..=114].iter().map(|a| (*a - a0).norm()).fold(0.0, f64::max);
    let mut impulse = vec![Vec3::ZERO; 21];
    impulse[10] = Vec3::X;
    let response = moving_average(&impulse, 5);
    let kernel_ok = response
        .iter()
        .enumerate()
        .all(|(t, v)| (v.x - if (8..=12).contains(&t) { 0.2 } else { 0.0 }).abs() < 1e-15);
    outcome(
        6,
        worst <= 1e-6 && kernel_ok,
        format!("max acceleration error on interior frames {worst:.1e}, window-5 impulse response exact: {kernel_ok}"),
    )
}

fn criterion_7(dir: &Path) -> Outcome {
    let ds = Dataset::open(&dir.join("desk")).unwrap();
    let (mut replays, mut replay_ok, mut scenes, mut future_ok) = (0, 0, 0, 0);
    for id in ds.scene_ids() {
        let scene = ds.scene(id).unwrap();
        for cf in &scene.counterfactuals {
            replays += 1;
            let r = resimulate(&scene, cf.object_id, cf.modification).unwrap();
            replay_ok += usize::from(r.counterfactual_events == cf.events);
        }
        scenes += 1;
        let ctx = ExecContext::ground_truth(&scene, PREDICTIVE_HORIZON).unwrap();
        let future = ctx.future_events().unwrap();
        let recorded: Vec<_> = scene.collisions.iter().filter(|e| e.frame >= PREDICTIVE_HORIZON).copied().collect();
        future_ok += usize::from(future == recorded);
    }
    outcome(
        7,
        replay_ok == replays && future_ok == scenes,
        format!("counterfactual replays {replay_ok}/{replays}, future events from frame 30 {future_ok}/{scenes} scenes"),
    )
}

fn criterion_8(dir: &Path) -> Outcome {
    let ds = Dataset::open(&dir.join("desk")).unwrap();
    let qs = ds.questions().unwrap();
    let templates = TemplateSet::builtin();
    let grammar = ParseGrammar::new(&templates);
    let mut round_trip = 0;
    let mut off_template_rejected = 0;
    let mut off_template = 0;
    for q in &qs {
        if let Ok(p) = grammar.parse(&q.text) {
            if p == q.program && grammar.unparse(&p).as_deref() == Ok(q.text.as_str()) {
                round_trip += 1;
            }
        }
        let mut words: Vec<&str> = q.text.split(' ').collect();
        words[0] = "Banana";
        for bad in [format!("{} quickly", q.text.trim_end_matches('?')), words.join(" ")] {
            off_template += 1;
            off_template_rejected += usize::from(grammar.parse(&bad).is_err());
        }
    }
    for bad in ["How heavy is the bus?", "", "Is the sedan moving?", "What color is the red sedan at the beginning"] {
        off_template += 1;
        off_template_rejected += usize::from(grammar.parse(bad).is_err());
    }
    outcome(
        8,
        round_trip == qs.len() && off_template_rejected == off_template,
        format!("round trip {round_trip}/{}, off-template rejected {off_template_rejected}/{off_template}", qs.len()),
    )
}

fn run_pipeline(root: &Path, workers: usize) -> BTreeMap<String, String> {
    let data = root.join("data");
    generate_dataset(&data, &GenerateOptions { workers, ..GenerateOptions::scenes(20, 9) }).unwrap();
    let ds = Dataset::open(&data).unwrap();
    let est_dir = root.join("est");
    estimate_dataset(&ds, &est_dir, &EstimateOptions { workers, ..EstimateOptions::new(NoiseModel::default(), true) })
        .unwrap();
    let est = Estimates::open(&est_dir).unwrap();
    let qs = ds.questions().unwrap();
    let answers = answer_dataset(&ds, &qs, StateSource::Estimated(&est), ParserMode::Nl, workers).unwrap();
    write_jsonl(&root.join("answers.jsonl"), &answers).unwrap();
    let report = evaluate_answers(&qs, &answers).unwrap();
    std::fs::write(root.join("report.json"), serde_json::to_vec_pretty(&report).unwrap()).unwrap();

    let mut hashes = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                hashes.insert(rel, sha256_hex(&std::fs::read(&p).unwrap()));
            }
        }
    }
    hashes
}

fn criterion_9(dir: &Path) -> Outcome {
    let a = run_pipeline(&dir.join("run_a"), 1);
    let b = run_pipeline(&dir.join("run_b"), 1);
    let c = run_pipeline(&dir.join("run_c"), 4);
    let differing = |x: &BTreeMap<String, String>, y: &BTreeMap<String, String>| {
        x.keys().chain(y.keys()).filter(|k| x.get(*k) != y.get(*k)).count()
    };
    let (rerun, workers) = (differing(&a, &b), differing(&a, &c));
    outcome(
        9,
        rerun == 0 && workers == 0 && a.len() > 60,
        format!("{} files hashed: rerun differs in {rerun}, 1 vs 4 workers differs in {workers}", a.len()),
    )
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let mut results = vec![criterion_1(dir.path())];
    let ablation = ablation(dir.path());
    results.push(criterion_2(&ablation));
    results.push(criterion_3(&ablation));
    results.push(criterion_4());
    results.push(criterion_5());
    results.push(criterion_6());
    results.push(criterion_7(dir.path()));
    results.push(criterion_8(dir.path()));
    results.push(criterion_9(dir.path()));

    let mut unexpected = Vec::new();
    for r in &results {
        let tag = if r.pass { "PASS" } else { "FAIL" };
        let note = if !r.pass && KNOWN_SHORTFALLS.contains(&r.id) { " [known shortfall]" } else { "" };
        println!("{tag} criterion {}: {}{note}", r.id, r.summary);
        let tolerated = KNOWN_SHORTFALLS.contains(&r.id) && r.floor.unwrap_or(false);
        if !r.pass && !tolerated {
            unexpected.push(r.id);
        }
    }
    let passed = results.iter().filter(|r| r.pass).count();
    println!("acceptance: {passed}/{} criteria pass", results.len());
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
