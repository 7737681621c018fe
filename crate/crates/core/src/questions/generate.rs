use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::template::{Bindings, Descriptor, FrameAnchor, QuestionType, Template, TemplateSet};
use crate::executor::{execute, ExecContext, ExecError};
use crate::model::{in_answer_vocabulary, Modification, SceneAnnotation, VelocityState};
use crate::program::{Op, Program};

/// Frames visible to predictive questions.
pub const PREDICTIVE_HORIZON: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub scene_id: String,
    pub question_id: String,
    #[serde(rename = "type")]
    pub qtype: QuestionType,
    pub template: String,
    pub text: String,
    pub program: Program,
    pub answer: String,
    pub observed_frames: usize,
}

/// Questions requested per scene and type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuestionMix {
    pub factual: usize,
    pub predictive: usize,
    pub counterfactual: usize,
}

impl Default for QuestionMix {
    fn default() -> Self {
        Self { factual: 8, predictive: 3, counterfactual: 1 }
    }
}

impl QuestionMix {
    pub fn count(&self, t: QuestionType) -> usize {
        match t {
            QuestionType::Factual => self.factual,
            QuestionType::Predictive => self.predictive,
            QuestionType::Counterfactual => self.counterfactual,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QuestionError {
    #[error("scene {0}: no question could be produced")]
    NoQuestions(String),
    #[error("scene {scene}: {source}")]
    Context { scene: String, source: ExecError },
}

/// Observed window for a question type.
pub fn observed_frames(qtype: QuestionType, scene: &SceneAnnotation) -> usize {
    match qtype {
        QuestionType::Predictive => PREDICTIVE_HORIZON.min(scene.n_frames()),
        _ => scene.n_frames(),
    }
}

struct Candidate {
    template: usize,
    text: String,
    program: Program,
    answer: String,
}

fn descriptors(scene: &SceneAnnotation) -> Vec<(u32, Descriptor)> {
    scene.objects.iter().map(|o| (o.spec.id, Descriptor::new(o.spec.color, o.spec.shape))).collect()
}

/// Frame anchors available inside a window: both ends plus every collision
/// whose pair collides only once in the window.
fn anchors(scene: &SceneAnnotation, horizon: usize) -> Vec<FrameAnchor> {
    let mut out = vec![FrameAnchor::Begin, FrameAnchor::End];
    let mut counts: BTreeMap<_, usize> = BTreeMap::new();
    for e in scene.collisions.iter().filter(|e| e.frame < horizon) {
        *counts.entry(e.pair).or_default() += 1;
    }
    for (pair, n) in counts {
        if n == 1 {
            let d = |id| {
                let o = scene.object(id).expect("validated scene");
                Descriptor::new(o.spec.color, o.spec.shape)
            };
            out.push(FrameAnchor::Collision(d(pair.first()), d(pair.second())));
        }
    }
    out
}

fn counterfactual_op(t: &Template) -> Option<Modification> {
    let probe = Bindings::default()
        .with('A', Descriptor::new(crate::model::Color::Red, crate::model::Shape::Sedan))
        .with('B', Descriptor::new(crate::model::Color::Red, crate::model::Shape::Sedan))
        .with('C', Descriptor::new(crate::model::Color::Red, crate::model::Shape::Sedan));
    let program = t.instantiate(&probe).ok()?;
    program.ops().iter().find_map(|op| match op {
        Op::CounterfactualStatic => Some(Modification::Velocity(VelocityState::Static)),
        Op::CounterfactualMovingSlow => Some(Modification::Velocity(VelocityState::Slow)),
        Op::CounterfactualMovingFast => Some(Modification::Velocity(VelocityState::Fast)),
        Op::CounterfactualAccelerating => Some(Modification::Accelerating(true)),
        Op::CounterfactualFloating => Some(Modification::Floating(true)),
        _ => None,
    })
}

/// Every slot assignment of a template over the scene's objects.
fn bindings_for(t: &Template, scene: &SceneAnnotation, horizon: usize) -> Vec<Bindings> {
    let objects = descriptors(scene);
    let slots = t.object_slots();
    let mut partial: Vec<(Bindings, Vec<u32>)> = vec![(Bindings::default(), Vec::new())];
    for slot in slots {
        let mut next = Vec::new();
        for (b, used) in &partial {
            match slot {
                'S' => {
                    for o in &scene.objects {
                        let shape = o.spec.shape;
                        if scene.objects.iter().filter(|p| p.spec.shape == shape).count() == 1 {
                            next.push((b.clone().with('S', Descriptor::shape_only(shape)), used.clone()));
                        }
                    }
                }
                'C' => {
                    // The modified object comes from a recorded counterfactual.
                    let wanted = counterfactual_op(t);
                    for cf in &scene.counterfactuals {
                        if Some(cf.modification) != wanted {
                            continue;
                        }
                        let d = objects.iter().find(|(id, _)| *id == cf.object_id).map(|(_, d)| *d);
                        if let Some(d) = d {
                            next.push((b.clone().with('C', d), used.clone()));
                        }
                    }
                }
                _ => {
                    for (id, d) in &objects {
                        if used.contains(id) {
                            continue;
                        }
                        let mut u = used.clone();
                        u.push(*id);
                        next.push((b.clone().with(slot, *d), u));
                    }
                }
            }
        }
        partial = next;
    }
    let mut out = Vec::new();
    for (b, _) in partial {
        if t.has_frame() {
            for a in anchors(scene, horizon) {
                out.push(b.clone().at(a));
            }
        } else {
            out.push(b);
        }
    }
    out
}

fn candidates(
    templates: &[&Template],
    scene: &SceneAnnotation,
    ctx: &ExecContext<'_>,
) -> Vec<Candidate> {
    let mut out = Vec::new();
    for (ti, t) in templates.iter().enumerate() {
        for b in bindings_for(t, scene, ctx.horizon()) {
            let (Ok(text), Ok(program)) = (t.render(&b), t.instantiate(&b)) else { continue };
            let Ok(answer) = execute(&program, ctx) else { continue };
            if in_answer_vocabulary(&answer) {
                out.push(Candidate { template: ti, text, program, answer });
            }
        }
    }
    out
}

/// Orders one template's candidates so picks alternate between true and
/// false, starting with the rarer answer.
fn interleave(mut group: Vec<Candidate>, rng: &mut ChaCha8Rng) -> Vec<Candidate> {
    group.shuffle(rng);
    let (mut yes, mut no): (Vec<_>, Vec<_>) = group.into_iter().partition(|c| c.answer == "true");
    let other: Vec<_> = no.extract_if(.., |c| c.answer != "false").collect();
    if yes.is_empty() && no.is_empty() {
        return other;
    }
    let yes_first = match yes.len().cmp(&no.len()) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => rng.random_bool(0.5),
    };
    let (first, second) = if yes_first { (&mut yes, &mut no) } else { (&mut no, &mut yes) };
    let mut out = Vec::new();
    let (mut a, mut b) = (first.drain(..), second.drain(..));
    loop {
        match (a.next(), b.next()) {
            (None, None) => break,
            (x, y) => out.extend(x.into_iter().chain(y)),
        }
    }
    out
}

/// Instantiates templates over one scene and returns questions with ground
/// truth answers.
pub fn generate_questions(
    scene: &SceneAnnotation,
    templates: &TemplateSet,
    mix: QuestionMix,
    seed: u64,
) -> Result<Vec<Question>, QuestionError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut questions = Vec::new();
    for qtype in QuestionType::ALL {
        let wanted = mix.count(qtype);
        if wanted == 0 {
            continue;
        }
        let horizon = observed_frames(qtype, scene);
        let ctx = ExecContext::ground_truth(scene, horizon)
            .map_err(|source| QuestionError::Context { scene: scene.scene_id.clone(), source })?;
        let active: Vec<&Template> = templates.enabled().filter(|t| t.qtype == qtype).collect();
        let all = candidates(&active, scene, &ctx);

        let mut groups: Vec<Vec<Candidate>> = (0..active.len()).map(|_| Vec::new()).collect();
        for c in all {
            groups[c.template].push(c);
        }
        let mut queues: Vec<std::vec::IntoIter<Candidate>> =
            groups.into_iter().map(|g| interleave(g, &mut rng).into_iter()).collect();
        queues.shuffle(&mut rng);

        let mut picked = 0;
        while picked < wanted {
            let mut progressed = false;
            for q in queues.iter_mut() {
                if picked == wanted {
                    break;
                }
                if let Some(c) = q.next() {
                    questions.push((qtype, active[c.template].id.clone(), c, horizon));
                    picked += 1;
                    progressed = true;
                }
            }
            if !progressed {
                break;
            }
        }
    }
    if questions.is_empty() {
        return Err(QuestionError::NoQuestions(scene.scene_id.clone()));
    }
    Ok(questions
        .into_iter()
        .enumerate()
        .map(|(i, (qtype, template, c, horizon))| Question {
            scene_id: scene.scene_id.clone(),
            question_id: format!("{}-q{:02}", scene.scene_id, i),
            qtype,
            template,
            text: c.text,
            program: c.program,
            answer: c.answer,
            observed_frames: horizon,
        })
        .collect())
}

/// Subsamples the majority boolean answer of each template so that neither
/// answer exceeds 60% of that template's boolean questions. Templates with
/// only one answer value, and non-boolean answers, are left untouched.
pub fn balance_answers(questions: Vec<Question>, seed: u64) -> Vec<Question> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_template: BTreeMap<&str, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for (i, q) in questions.iter().enumerate() {
        let entry = by_template.entry(q.template.as_str()).or_default();
        match q.answer.as_str() {
            "true" => entry.0.push(i),
            "false" => entry.1.push(i),
            _ => {}
        }
    }
    let mut drop = vec![false; questions.len()];
    for (_, (yes, no)) in by_template {
        let (small, mut large) = if yes.len() <= no.len() { (yes, no) } else { (no, yes) };
        if small.is_empty() {
            continue;
        }
        let cap = small.len() * 3 / 2;
        if large.len() > cap {
            large.shuffle(&mut rng);
            for &i in &large[cap..] {
                drop[i] = true;
            }
        }
    }
    questions.into_iter().zip(drop).filter(|(_, d)| !d).map(|(q, _)| q).collect()
}
