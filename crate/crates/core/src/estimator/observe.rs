use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::model::{wrap_angle, Camera, Color, FrameId, ObjectId, SceneAnnotation, Shape, Vec3};
use crate::physics::SceneConfig;

/// Gaussian pose noise with independent per-object-frame dropout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseModel {
    /// Position noise per axis, m.
    pub sigma_obs: f64,
    /// Yaw noise, rad.
    pub sigma_rot: f64,
    pub p_drop: f64,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self { sigma_obs: 0.3, sigma_rot: 0.05, p_drop: 0.2, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NoiseError {
    #[error("noise scale must be finite and non-negative, got {0}")]
    Sigma(f64),
    #[error("dropout probability must lie in [0, 1), got {0}")]
    Dropout(f64),
}

impl NoiseModel {
    pub fn exact() -> Self {
        Self { sigma_obs: 0.0, sigma_rot: 0.0, p_drop: 0.0, seed: 0 }
    }

    pub fn validate(&self) -> Result<(), NoiseError> {
        for s in [self.sigma_obs, self.sigma_rot] {
            if !(s.is_finite() && s >= 0.0) {
                return Err(NoiseError::Sigma(s));
            }
        }
        if !(0.0..1.0).contains(&self.p_drop) {
            return Err(NoiseError::Dropout(self.p_drop));
        }
        Ok(())
    }
}

/// One object's entry in an observation frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectObservation {
    pub id: ObjectId,
    pub visible: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<Vec3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub yaw: Option<f64>,
}

impl ObjectObservation {
    pub fn seen(id: ObjectId, position: Vec3, yaw: f64) -> Self {
        Self { id, visible: true, position: Some(position), yaw: Some(yaw) }
    }

    pub fn hidden(id: ObjectId) -> Self {
        Self { id, visible: false, position: None, yaw: None }
    }

    /// Position and yaw when visible.
    pub fn pose(&self) -> Option<(Vec3, f64)> {
        match (self.visible, self.position, self.yaw) {
            (true, Some(p), Some(y)) => Some((p, y)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationFrame {
    pub frame: FrameId,
    pub objects: Vec<ObjectObservation>,
}

/// Identity labels declared by the front end; either may be missing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectLabel {
    pub id: ObjectId,
    #[serde(default)]
    pub shape: Option<Shape>,
    #[serde(default)]
    pub color: Option<Color>,
}

/// First line of an observation file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationHeader {
    pub scene_id: String,
    pub labels: Vec<ObjectLabel>,
    pub camera: Camera,
    pub config: SceneConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSequence {
    pub header: ObservationHeader,
    pub frames: Vec<ObservationFrame>,
}

#[derive(Debug, thiserror::Error)]
pub enum ObservationIoError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("missing header line")]
    MissingHeader,
    #[error("frame {found} out of order, expected {expected}")]
    Order { expected: FrameId, found: FrameId },
}

impl ObservationSequence {
    /// Writes the header line followed by one line per frame.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<(), ObservationIoError> {
        writeln!(out, "{}", serde_json::to_string(&self.header).map_err(|e| ObservationIoError::Json { line: 1, source: e })?)?;
        for (i, f) in self.frames.iter().enumerate() {
            let s = serde_json::to_string(f).map_err(|e| ObservationIoError::Json { line: i + 2, source: e })?;
            writeln!(out, "{s}")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self, ObservationIoError> {
        let mut lines = input.lines().enumerate().filter(|(_, l)| !matches!(l, Ok(s) if s.trim().is_empty()));
        let (_, first) = lines.next().ok_or(ObservationIoError::MissingHeader)?;
        let header = serde_json::from_str(&first?).map_err(|e| ObservationIoError::Json { line: 1, source: e })?;
        let mut frames = Vec::new();
        for (i, l) in lines {
            let f: ObservationFrame =
                serde_json::from_str(&l?).map_err(|e| ObservationIoError::Json { line: i + 1, source: e })?;
            if f.frame != frames.len() {
                return Err(ObservationIoError::Order { expected: frames.len(), found: f.frame });
            }
            frames.push(f);
        }
        Ok(Self { header, frames })
    }

    /// Keeps the first `n` frames.
    pub fn truncated(&self, n: usize) -> Self {
        Self { header: self.header.clone(), frames: self.frames[..n.min(self.frames.len())].to_vec() }
    }
}

/// Per-scene stream so scenes draw independent noise under one seed.
fn scene_stream(scene_id: &str) -> u64 {
    let digest = Sha256::digest(scene_id.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Ground-truth poses with Gaussian noise and random dropout. Frame 0 is
/// always visible so tracking can initialize every object.
pub fn synthesize_observations(scene: &SceneAnnotation, noise: &NoiseModel) -> ObservationSequence {
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    rng.set_stream(scene_stream(&scene.scene_id));
    let pos = Normal::new(0.0, noise.sigma_obs).expect("validated sigma");
    let rot = Normal::new(0.0, noise.sigma_rot).expect("validated sigma");
    let frames = (0..scene.n_frames())
        .map(|frame| {
            let objects = scene
                .objects
                .iter()
                .zip(&scene.trajectories)
                .map(|(o, t)| {
                    let s = &t.states[frame];
                    let dropped = rng.random::<f64>() < noise.p_drop;
                    let d = Vec3::new(pos.sample(&mut rng), pos.sample(&mut rng), pos.sample(&mut rng));
                    let dy = rot.sample(&mut rng);
                    if dropped && frame > 0 {
                        ObjectObservation::hidden(o.spec.id)
                    } else {
                        ObjectObservation::seen(o.spec.id, s.position + d, wrap_angle(s.rotation.yaw() + dy))
                    }
                })
                .collect();
            ObservationFrame { frame, objects }
        })
        .collect();
    let labels = scene
        .objects
        .iter()
        .map(|o| ObjectLabel { id: o.spec.id, shape: Some(o.spec.shape), color: Some(o.spec.color) })
        .collect();
    ObservationSequence {
        header: ObservationHeader {
            scene_id: scene.scene_id.clone(),
            labels,
            camera: scene.camera,
            config: scene.config.clone(),
        },
        frames,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{generate_scene, GeneratorConfig};

    fn scene(seed: u64) -> SceneAnnotation {
        generate_scene(&format!("obs_{seed}"), &GeneratorConfig::default(), seed).unwrap()
    }

    #[test]
    fn exact_noise_reproduces_ground_truth() {
        let s = scene(1);
        let obs = synthesize_observations(&s, &NoiseModel::exact());
        for f in &obs.frames {
            for (o, t) in f.objects.iter().zip(&s.trajectories) {
                let (p, y) = o.pose().unwrap();
                assert_eq!(p, t.states[f.frame].position);
                assert!((y - t.states[f.frame].rotation.yaw()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn noise_mean_and_dropout_rate() {
        let noise = NoiseModel { seed: 9, ..NoiseModel::default() };
        let mut sum = Vec3::ZERO;
        let (mut n, mut total, mut dropped) = (0usize, 0usize, 0usize);
        let mut seed = 0;
        while total < 10_000 {
            let s = scene(seed);
            seed += 1;
            let obs = synthesize_observations(&s, &noise);
            for f in obs.frames.iter().skip(1) {
                for (o, t) in f.objects.iter().zip(&s.trajectories) {
                    total += 1;
                    match o.pose() {
                        Some((p, _)) => {
                            sum += p - t.states[f.frame].position;
                            n += 1;
                        }
                        None => dropped += 1,
                    }
                }
            }
        }
        let mean = sum / n as f64;
        let bound = 3.0 * noise.sigma_obs / (n as f64).sqrt();
        for c in [mean.x, mean.y, mean.z] {
            assert!(c.abs() < bound, "{c} vs {bound}");
        }
        let rate = dropped as f64 / total as f64;
        assert!((rate - 0.2).abs() < 0.02, "{rate}");
    }

    #[test]
    fn frame_zero_is_never_dropped() {
        let noise = NoiseModel { p_drop: 0.9, ..NoiseModel::default() };
        for seed in 0..5 {
            let obs = synthesize_observations(&scene(seed), &noise);
            assert!(obs.frames[0].objects.iter().all(|o| o.visible));
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let obs = synthesize_observations(&scene(2), &NoiseModel::default());
        let mut buf = Vec::new();
        obs.write_jsonl(&mut buf).unwrap();
        assert_eq!(buf.iter().filter(|&&b| b == b'\n').count(), obs.frames.len() + 1);
        let back = ObservationSequence::read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(back, obs);
        let hidden = back.frames.iter().flat_map(|f| &f.objects).find(|o| !o.visible).unwrap();
        assert!(hidden.position.is_none() && hidden.yaw.is_none());
    }

    #[test]
    fn invalid_noise_rejected() {
        assert!(NoiseModel { p_drop: 1.0, ..NoiseModel::default() }.validate().is_err());
        assert!(NoiseModel { sigma_obs: -1.0, ..NoiseModel::default() }.validate().is_err());
        assert!(NoiseModel::default().validate().is_ok());
    }
}
