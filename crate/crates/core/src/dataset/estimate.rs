use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    create_dir, read_json, sha256_hex, to_jsonl, to_pretty, with_workers, write_hashed, Dataset, DatasetError, BUILD,
    MANIFEST,
};
use crate::estimator::{
    position_rmse, score_collisions, synthesize_observations, track_scene, CollisionScore, EstimatedScene,
    EstimatorConfig, NoiseModel, ObservationSequence, COLLISION_FRAME_TOLERANCE,
};
use crate::questions::PREDICTIVE_HORIZON;

pub const ESTIMATES_KIND: &str = "estimates";
pub const DIAGNOSTICS: &str = "diagnostics.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateOptions {
    pub noise: NoiseModel,
    pub estimator: EstimatorConfig,
    #[serde(skip)]
    pub workers: usize,
}

impl EstimateOptions {
    /// Estimator variances matched to the noise model.
    pub fn new(noise: NoiseModel, use_prior: bool) -> Self {
        let estimator = EstimatorConfig { use_prior, ..EstimatorConfig::for_noise(noise.sigma_obs, noise.sigma_rot) };
        Self { noise, estimator, workers: 0 }
    }
}

/// Per-scene tracking quality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneDiagnostics {
    pub scene_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rmse: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collisions: Option<CollisionScore>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatesManifest {
    pub kind: String,
    pub build: String,
    /// Hash of the source dataset manifest.
    pub dataset: String,
    pub options: EstimateOptions,
    pub mean_rmse: Option<f64>,
    pub collisions: CollisionScore,
    pub collision_f1: f64,
    pub failed_scenes: Vec<String>,
    pub files: BTreeMap<String, String>,
}

pub fn observation_file(scene_id: &str) -> String {
    format!("observations/{scene_id}.jsonl")
}

/// Estimate over the whole video.
pub fn estimate_file(scene_id: &str) -> String {
    format!("scenes/{scene_id}.json")
}

/// Estimate over the frames visible to predictive questions.
pub fn prefix_file(scene_id: &str) -> String {
    format!("scenes/{scene_id}.prefix.json")
}

struct SceneOutput {
    observations: Vec<u8>,
    full: Option<Vec<u8>>,
    prefix: Option<Vec<u8>>,
    diagnostics: SceneDiagnostics,
}

fn estimate_one(dataset: &Dataset, id: &str, options: &EstimateOptions) -> Result<SceneOutput, DatasetError> {
    let truth = dataset.scene(id)?;
    let obs = synthesize_observations(&truth, &options.noise);
    let mut observations = Vec::new();
    obs.write_jsonl(&mut observations).map_err(|e| DatasetError::Invalid(e.to_string()))?;
    let prefix_obs = obs.truncated(PREDICTIVE_HORIZON);
    let tracked = track_scene(&obs, &options.estimator).and_then(|full| {
        let prefix = track_scene(&prefix_obs, &options.estimator)?;
        Ok((full, prefix))
    });
    Ok(match tracked {
        Ok((full, prefix)) => {
            let rmse = position_rmse(&full.scene, &truth);
            let score = score_collisions(
                &full.scene.collisions,
                &truth.collisions,
                COLLISION_FRAME_TOLERANCE,
                truth.n_frames(),
            );
            SceneOutput {
                observations,
                full: Some(to_pretty(&full)),
                prefix: Some(to_pretty(&prefix)),
                diagnostics: SceneDiagnostics {
                    scene_id: id.to_string(),
                    rmse: Some(rmse),
                    collisions: Some(score),
                    error: None,
                },
            }
        }
        Err(e) => SceneOutput {
            observations,
            full: None,
            prefix: None,
            diagnostics: SceneDiagnostics { scene_id: id.to_string(), rmse: None, collisions: None, error: Some(e.to_string()) },
        },
    })
}

/// Synthesizes observations for every scene, tracks them and writes the
/// estimates directory. Tracking failures are recorded per scene.
pub fn estimate_dataset(dataset: &Dataset, out: &Path, options: &EstimateOptions) -> Result<EstimatesManifest, DatasetError> {
    options.noise.validate().map_err(|e| DatasetError::Invalid(e.to_string()))?;
    options.estimator.validate().map_err(|e| DatasetError::Invalid(e.to_string()))?;
    let ids: Vec<String> = dataset.scene_ids().map(str::to_string).collect();
    let outputs = with_workers(options.workers, || {
        ids.par_iter().map(|id| estimate_one(dataset, id, options)).collect::<Vec<_>>()
    })?;

    create_dir(out)?;
    let mut files = BTreeMap::new();
    let mut diagnostics = Vec::new();
    let mut score = CollisionScore::default();
    let (mut rmse_sum, mut rmse_n) = (0.0, 0usize);
    let mut failed = Vec::new();
    for (id, output) in ids.iter().zip(outputs) {
        let o = output?;
        write_hashed(out, &observation_file(id), &o.observations, &mut files)?;
        if let (Some(full), Some(prefix)) = (&o.full, &o.prefix) {
            write_hashed(out, &estimate_file(id), full, &mut files)?;
            write_hashed(out, &prefix_file(id), prefix, &mut files)?;
        }
        if let Some(r) = o.diagnostics.rmse {
            rmse_sum += r;
            rmse_n += 1;
        }
        if let Some(s) = o.diagnostics.collisions {
            score += s;
        }
        if o.diagnostics.error.is_some() {
            failed.push(id.clone());
        }
        diagnostics.push(o.diagnostics);
    }
    write_hashed(out, DIAGNOSTICS, &to_jsonl(&diagnostics), &mut files)?;
    let source = std::fs::read(dataset.root.join(MANIFEST)).map_err(|e| DatasetError::io(&dataset.root, e))?;
    let manifest = EstimatesManifest {
        kind: ESTIMATES_KIND.into(),
        build: BUILD.into(),
        dataset: sha256_hex(&source),
        options: *options,
        mean_rmse: (rmse_n > 0).then(|| rmse_sum / rmse_n as f64),
        collisions: score,
        collision_f1: score.f1(),
        failed_scenes: failed,
        files,
    };
    let path = out.join(MANIFEST);
    std::fs::write(&path, to_pretty(&manifest)).map_err(|e| DatasetError::io(&path, e))?;
    Ok(manifest)
}

/// An estimates directory.
#[derive(Debug, Clone)]
pub struct Estimates {
    pub root: PathBuf,
    pub manifest: EstimatesManifest,
}

impl Estimates {
    pub fn open(root: &Path) -> Result<Self, DatasetError> {
        let manifest: EstimatesManifest = read_json(&root.join(MANIFEST))?;
        if manifest.kind != ESTIMATES_KIND {
            return Err(DatasetError::Invalid(format!("{} is not an estimates manifest", root.display())));
        }
        Ok(Self { root: root.to_path_buf(), manifest })
    }

    pub fn full(&self, scene_id: &str) -> Result<EstimatedScene, DatasetError> {
        read_json(&self.root.join(estimate_file(scene_id)))
    }

    pub fn prefix(&self, scene_id: &str) -> Result<EstimatedScene, DatasetError> {
        read_json(&self.root.join(prefix_file(scene_id)))
    }

    pub fn observations(&self, scene_id: &str) -> Result<ObservationSequence, DatasetError> {
        let path = self.root.join(observation_file(scene_id));
        let f = std::fs::File::open(&path).map_err(|e| DatasetError::io(&path, e))?;
        ObservationSequence::read_jsonl(std::io::BufReader::new(f)).map_err(|e| DatasetError::Invalid(e.to_string()))
    }
}
