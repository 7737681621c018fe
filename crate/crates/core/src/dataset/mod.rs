//! On-disk datasets and the generate, estimate, answer, eval and resimulate
//! stages over them.

mod answer;
mod eval;
mod estimate;
mod generate;
mod resim;

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub use answer::*;
pub use eval::*;
pub use estimate::*;
pub use generate::*;
pub use resim::*;

use crate::model::SceneAnnotation;
use crate::questions::Question;

pub const MANIFEST: &str = "manifest.json";
pub const QUESTIONS: &str = "questions.jsonl";
pub const SCENES_DIR: &str = "scenes";

/// Build identifier recorded in manifests.
pub const BUILD: &str = match option_env!("DYNQA_GIT_DESCRIBE") {
    Some(d) => d,
    None => "unknown",
};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{0}")]
    Invalid(String),
    #[error("generation: {0}")]
    Generation(#[from] crate::generator::GenerationError),
    #[error("questions: {0}")]
    Questions(#[from] crate::questions::QuestionError),
    #[error("worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

impl DatasetError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        DatasetError::Io { path: path.to_path_buf(), source }
    }

    fn json(path: &Path, source: serde_json::Error) -> Self {
        DatasetError::Json { path: path.to_path_buf(), source }
    }
}

/// Runs `f` inside a pool of `workers` threads; 0 picks the default size.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T, DatasetError> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;
    Ok(pool.install(f))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub(crate) fn create_dir(path: &Path) -> Result<(), DatasetError> {
    fs::create_dir_all(path).map_err(|e| DatasetError::io(path, e))
}

/// Writes a file and records its hash under its path relative to `root`.
pub(crate) fn write_hashed(
    root: &Path,
    relative: &str,
    bytes: &[u8],
    hashes: &mut BTreeMap<String, String>,
) -> Result<(), DatasetError> {
    let path = root.join(relative);
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    fs::write(&path, bytes).map_err(|e| DatasetError::io(&path, e))?;
    hashes.insert(relative.to_string(), sha256_hex(bytes));
    Ok(())
}

pub(crate) fn to_json_line<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec(value).expect("serializable value");
    v.push(b'\n');
    v
}

pub(crate) fn to_jsonl<T: Serialize>(values: &[T]) -> Vec<u8> {
    values.iter().flat_map(to_json_line).collect()
}

pub(crate) fn to_pretty<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("serializable value");
    v.push(b'\n');
    v
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, DatasetError> {
    let bytes = fs::read(path).map_err(|e| DatasetError::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| DatasetError::json(path, e))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, DatasetError> {
    let file = fs::File::open(path).map_err(|e| DatasetError::io(path, e))?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| DatasetError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| DatasetError::json(path, e))?);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, values: &[T]) -> Result<(), DatasetError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let mut f = fs::File::create(path).map_err(|e| DatasetError::io(path, e))?;
    f.write_all(&to_jsonl(values)).map_err(|e| DatasetError::io(path, e))
}

pub(crate) fn scene_file(scene_id: &str) -> String {
    format!("{SCENES_DIR}/{scene_id}.json")
}

/// A generated dataset directory.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub root: PathBuf,
    pub manifest: DatasetManifest,
}

impl Dataset {
    pub fn open(root: &Path) -> Result<Self, DatasetError> {
        let manifest: DatasetManifest = read_json(&root.join(MANIFEST))?;
        if manifest.kind != DATASET_KIND {
            return Err(DatasetError::Invalid(format!("{} is not a dataset manifest", root.display())));
        }
        Ok(Self { root: root.to_path_buf(), manifest })
    }

    pub fn scene_ids(&self) -> impl Iterator<Item = &str> {
        self.manifest.splits.iter().flat_map(|s| s.scenes.iter().map(String::as_str))
    }

    pub fn scene(&self, scene_id: &str) -> Result<SceneAnnotation, DatasetError> {
        read_json(&self.root.join(scene_file(scene_id)))
    }

    pub fn questions(&self) -> Result<Vec<Question>, DatasetError> {
        read_jsonl(&self.root.join(QUESTIONS))
    }

    /// Recomputes every recorded hash; returns the mismatching paths.
    pub fn verify(&self) -> Result<Vec<String>, DatasetError> {
        let mut bad = Vec::new();
        for (rel, hash) in &self.manifest.files {
            let path = self.root.join(rel);
            let bytes = fs::read(&path).map_err(|e| DatasetError::io(&path, e))?;
            if &sha256_hex(&bytes) != hash {
                bad.push(rel.clone());
            }
        }
        Ok(bad)
    }
}
