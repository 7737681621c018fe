use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{with_workers, Dataset, DatasetError, Estimates};
use crate::executor::{execute, ExecContext};
use crate::model::SceneAnnotation;
use crate::parser::ParseGrammar;
use crate::questions::{observed_frames, Question, QuestionType, TemplateSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParserMode {
    /// Execute the program stored with each question.
    Stored,
    /// Parse the question text and execute the result.
    Nl,
}

impl std::str::FromStr for ParserMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "stored" => Ok(ParserMode::Stored),
            "nl" => Ok(ParserMode::Nl),
            _ => Err(format!("unknown parser mode {s:?} (stored, nl)")),
        }
    }
}

/// Where answering reads scene states from.
#[derive(Debug, Clone, Copy)]
pub enum StateSource<'a> {
    GroundTruth,
    Estimated(&'a Estimates),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerRecord {
    pub question_id: String,
    pub scene_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl AnswerRecord {
    fn failed(q: &Question, class: &str, detail: String) -> Self {
        Self {
            question_id: q.question_id.clone(),
            scene_id: q.scene_id.clone(),
            answer: None,
            error: Some(class.into()),
            detail: Some(detail),
        }
    }
}

pub const PARSE_FAILURE: &str = "parse_failure";
pub const MISSING_STATES: &str = "missing_states";

fn answer_scene(
    questions: &[&Question],
    full: Option<&SceneAnnotation>,
    prefix: Option<&SceneAnnotation>,
    estimated: bool,
    grammar: Option<&ParseGrammar<'_>>,
) -> Vec<AnswerRecord> {
    questions
        .iter()
        .map(|q| {
            let program = match grammar {
                Some(g) => match g.parse(&q.text) {
                    Ok(p) => p,
                    Err(e) => return AnswerRecord::failed(q, PARSE_FAILURE, e.to_string()),
                },
                None => q.program.clone(),
            };
            let scene = if q.qtype == QuestionType::Predictive && estimated { prefix } else { full };
            let Some(scene) = scene else {
                return AnswerRecord::failed(q, MISSING_STATES, format!("no states for scene {}", q.scene_id));
            };
            let horizon = observed_frames(q.qtype, scene);
            let ctx = if estimated { ExecContext::estimated(scene, horizon) } else { ExecContext::ground_truth(scene, horizon) };
            let result = ctx.and_then(|ctx| execute(&program, &ctx));
            match result {
                Ok(a) => AnswerRecord {
                    question_id: q.question_id.clone(),
                    scene_id: q.scene_id.clone(),
                    answer: Some(a),
                    error: None,
                    detail: None,
                },
                Err(e) => AnswerRecord::failed(q, e.kind(), e.to_string()),
            }
        })
        .collect()
}

/// Answers every question of the dataset, in question order.
pub fn answer_dataset(
    dataset: &Dataset,
    questions: &[Question],
    states: StateSource<'_>,
    parser: ParserMode,
    workers: usize,
) -> Result<Vec<AnswerRecord>, DatasetError> {
    let mut by_scene: BTreeMap<&str, Vec<&Question>> = BTreeMap::new();
    for q in questions {
        by_scene.entry(q.scene_id.as_str()).or_default().push(q);
    }
    let templates = TemplateSet::builtin();
    let grammar = (parser == ParserMode::Nl).then(|| ParseGrammar::new(&templates));
    let groups: Vec<(&str, Vec<&Question>)> = by_scene.into_iter().collect();
    let answered = with_workers(workers, || {
        groups
            .par_iter()
            .map(|(id, qs)| -> Result<Vec<AnswerRecord>, DatasetError> {
                Ok(match states {
                    StateSource::GroundTruth => {
                        let scene = dataset.scene(id)?;
                        answer_scene(qs, Some(&scene), None, false, grammar.as_ref())
                    }
                    StateSource::Estimated(est) => {
                        let full = est.full(id).ok().map(|e| e.scene);
                        let prefix = est.prefix(id).ok().map(|e| e.scene);
                        answer_scene(qs, full.as_ref(), prefix.as_ref(), true, grammar.as_ref())
                    }
                })
            })
            .collect::<Vec<_>>()
    })?;
    let mut by_id: BTreeMap<String, AnswerRecord> = BTreeMap::new();
    for group in answered {
        for r in group? {
            by_id.insert(r.question_id.clone(), r);
        }
    }
    Ok(questions.iter().filter_map(|q| by_id.remove(&q.question_id)).collect())
}
