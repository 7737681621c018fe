use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{create_dir, scene_file, to_jsonl, to_pretty, with_workers, write_hashed, DatasetError, BUILD, MANIFEST, QUESTIONS};
use crate::executor::Thresholds;
use crate::generator::{generate_scene, scene_seed, GeneratorConfig};
use crate::model::SceneAnnotation;
use crate::questions::{balance_answers, generate_questions, Question, QuestionMix, QuestionType, TemplateSet};

pub const DATASET_KIND: &str = "dataset";
pub const FORMAT_VERSION: u32 = 1;

/// Offsets the question stream from the scene stream under one master seed.
const QUESTION_STREAM: u64 = 0x5155_4553_5449_4f4e;

/// Candidates drawn per requested question, so that balancing can drop
/// answers without thinning the type mix.
const OVERSAMPLE: usize = 3;

/// Named split sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// 100 scenes in a single split.
    Desk,
    /// 1000 / 100 / 100 train, validation and test scenes.
    Full,
}

impl Preset {
    pub fn splits(self) -> Vec<(&'static str, usize)> {
        match self {
            Preset::Desk => vec![("test", 100)],
            Preset::Full => vec![("train", 1000), ("val", 100), ("test", 100)],
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "desk" => Ok(Preset::Desk),
            "full" => Ok(Preset::Full),
            _ => Err(format!("unknown preset {s:?} (desk, full)")),
        }
    }
}

/// Accuracy floors checked by `eval` in CI mode.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CiThresholds {
    pub min_overall: Option<f64>,
    pub min_per_type: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitInfo {
    pub name: String,
    pub scenes: Vec<String>,
    pub questions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub kind: String,
    pub version: u32,
    pub build: String,
    pub seed: u64,
    pub generator: GeneratorConfig,
    pub question_mix: QuestionMix,
    pub balance: bool,
    pub thresholds: Thresholds,
    #[serde(default)]
    pub ci: CiThresholds,
    pub splits: Vec<SplitInfo>,
    pub question_counts: BTreeMap<String, usize>,
    /// SHA-256 of every other file, keyed by relative path.
    pub files: BTreeMap<String, String>,
}

#[derive(Debug, Clone)]
pub struct GenerateOptions {
    pub seed: u64,
    pub splits: Vec<(String, usize)>,
    pub generator: GeneratorConfig,
    pub question_mix: QuestionMix,
    pub balance: bool,
    pub ci: CiThresholds,
    pub workers: usize,
}

impl GenerateOptions {
    pub fn preset(preset: Preset, seed: u64) -> Self {
        Self {
            seed,
            splits: preset.splits().into_iter().map(|(n, c)| (n.to_string(), c)).collect(),
            generator: GeneratorConfig::default(),
            question_mix: QuestionMix::default(),
            balance: true,
            ci: CiThresholds::default(),
            workers: 0,
        }
    }

    /// One split named `test` with `scenes` scenes.
    pub fn scenes(scenes: usize, seed: u64) -> Self {
        Self { splits: vec![("test".into(), scenes)], ..Self::preset(Preset::Desk, seed) }
    }
}

/// Generates scenes and questions and writes a dataset directory.
pub fn generate_dataset(out: &Path, options: &GenerateOptions) -> Result<DatasetManifest, DatasetError> {
    options.generator.validate()?;
    let templates = TemplateSet::builtin();
    let mut jobs = Vec::new();
    for (split, count) in &options.splits {
        for i in 0..*count {
            jobs.push((split.clone(), format!("{split}_{i:04}")));
        }
    }
    let results = with_workers(options.workers, || {
        jobs.par_iter()
            .enumerate()
            .map(|(index, (_, id))| scene_with_candidates(options, &templates, index, id))
            .collect::<Vec<_>>()
    })?;

    create_dir(out)?;
    let mut files = BTreeMap::new();
    let mut per_split: BTreeMap<&str, Vec<Question>> = BTreeMap::new();
    let mut splits: Vec<SplitInfo> = options
        .splits
        .iter()
        .map(|(name, _)| SplitInfo { name: name.clone(), scenes: Vec::new(), questions: 0 })
        .collect();
    for ((split, id), result) in jobs.iter().zip(results) {
        let (scene, questions) = result?;
        write_hashed(out, &scene_file(id), &to_pretty(&scene), &mut files)?;
        per_split.entry(split.as_str()).or_default().extend(questions);
        splits.iter_mut().find(|s| &s.name == split).expect("split listed").scenes.push(id.clone());
    }
    let mut all = Vec::new();
    for info in &mut splits {
        let qs = per_split.remove(info.name.as_str()).unwrap_or_default();
        let qs = if options.balance { balance_split(qs, options.question_mix, options.seed) } else { qs };
        info.questions = qs.len();
        all.extend(qs);
    }
    write_hashed(out, QUESTIONS, &to_jsonl(&all), &mut files)?;

    let mut question_counts: BTreeMap<String, usize> =
        QuestionType::ALL.iter().map(|t| (t.name().to_string(), 0)).collect();
    for q in &all {
        *question_counts.entry(q.qtype.name().to_string()).or_default() += 1;
    }
    let manifest = DatasetManifest {
        kind: DATASET_KIND.into(),
        version: FORMAT_VERSION,
        build: BUILD.into(),
        seed: options.seed,
        generator: options.generator.clone(),
        question_mix: options.question_mix,
        balance: options.balance,
        thresholds: Thresholds::default(),
        ci: options.ci.clone(),
        splits,
        question_counts,
        files,
    };
    let path = out.join(MANIFEST);
    std::fs::write(&path, to_pretty(&manifest)).map_err(|e| DatasetError::io(&path, e))?;
    Ok(manifest)
}

/// Scene `index` of the run and its question candidates.
fn scene_with_candidates(
    options: &GenerateOptions,
    templates: &TemplateSet,
    index: usize,
    id: &str,
) -> Result<(SceneAnnotation, Vec<Question>), DatasetError> {
    let scene = generate_scene(id, &options.generator, scene_seed(options.seed, index as u64))?;
    let qseed = scene_seed(options.seed ^ QUESTION_STREAM, index as u64);
    let m = options.question_mix;
    let mix = if options.balance {
        QuestionMix {
            factual: m.factual * OVERSAMPLE,
            predictive: m.predictive * OVERSAMPLE,
            counterfactual: m.counterfactual * OVERSAMPLE,
        }
    } else {
        m
    };
    let questions = generate_questions(&scene, templates, mix, qseed)?;
    Ok((scene, questions))
}

/// Picks each scene's requested mix from its oversampled candidates,
/// preferring the answer a template is short of so far, then balances.
fn balance_split(pool: Vec<Question>, mix: QuestionMix, seed: u64) -> Vec<Question> {
    let mut by_scene: Vec<(String, Vec<Question>)> = Vec::new();
    for q in pool {
        match by_scene.last_mut() {
            Some((id, qs)) if *id == q.scene_id => qs.push(q),
            _ => by_scene.push((q.scene_id.clone(), vec![q])),
        }
    }
    let mut tally: BTreeMap<String, (i64, i64)> = BTreeMap::new();
    let lean = |tally: &BTreeMap<String, (i64, i64)>, q: &Question| {
        let (yes, no) = tally.get(&q.template).copied().unwrap_or_default();
        match q.answer.as_str() {
            "true" => yes - no,
            "false" => no - yes,
            _ => 0,
        }
    };
    let mut picked = Vec::new();
    for (_, mut candidates) in by_scene {
        let mut chosen = Vec::new();
        for qtype in QuestionType::ALL {
            for _ in 0..mix.count(qtype) {
                let best = candidates
                    .iter()
                    .enumerate()
                    .filter(|(_, q)| q.qtype == qtype)
                    .min_by_key(|(i, q)| (lean(&tally, q), *i))
                    .map(|(i, _)| i);
                let Some(i) = best else { break };
                let q = candidates.remove(i);
                let e = tally.entry(q.template.clone()).or_default();
                match q.answer.as_str() {
                    "true" => e.0 += 1,
                    "false" => e.1 += 1,
                    _ => {}
                }
                chosen.push(q);
            }
        }
        // Keep the generator's order within the scene.
        chosen.sort_by(|a, b| a.question_id.cmp(&b.question_id));
        picked.extend(chosen);
    }
    balance_answers(picked, seed)
}
