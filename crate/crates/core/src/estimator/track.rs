use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::dynamics::{backward_difference, derive_dynamics, moving_average, SMOOTHING_WINDOW};
use super::fusion::{fuse_position, fuse_yaw, predict_prior};
use super::observe::{ObservationSequence, ObjectLabel};
use crate::executor::Thresholds;
use crate::model::{
    CollisionEvent, Color, ContactRecord, DynamicState, ForceProfile, FrameId, ObjectId, ObjectSpec, Rotation,
    SceneAnnotation, SceneObject, Shape, Trajectory, Vec3, FLOATING_ACCEL,
};
use crate::physics::{Body, ContactTracker, SimError, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorConfig {
    /// Physics prior variance on each position axis, m².
    pub prior_variance: f64,
    /// Physics prior variance on yaw, rad².
    pub yaw_prior_variance: f64,
    /// Observation variance on each position axis, m².
    pub obs_variance: f64,
    /// Observation variance on yaw, rad².
    pub yaw_obs_variance: f64,
    pub window: usize,
    /// When false the prior variance is infinite: observations are taken as
    /// they are and the prior only fills gaps.
    pub use_prior: bool,
    pub record_diagnostics: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            prior_variance: 0.03,
            yaw_prior_variance: 0.03,
            obs_variance: 0.09,
            yaw_obs_variance: 0.0025,
            window: SMOOTHING_WINDOW,
            use_prior: true,
            record_diagnostics: true,
        }
    }
}

impl EstimatorConfig {
    /// Observation variances matching a noise model.
    pub fn for_noise(sigma_obs: f64, sigma_rot: f64) -> Self {
        Self { obs_variance: sigma_obs * sigma_obs, yaw_obs_variance: sigma_rot * sigma_rot, ..Self::default() }
    }

    pub fn observation_only(self) -> Self {
        Self { use_prior: false, ..self }
    }

    pub fn validate(&self) -> Result<(), TrackError> {
        let bad = |msg: &str| Err(TrackError::Config(msg.to_string()));
        if !(self.prior_variance > 0.0) || !(self.yaw_prior_variance > 0.0) {
            return bad("prior variances must be positive");
        }
        if !(self.obs_variance >= 0.0) || !(self.yaw_obs_variance >= 0.0) {
            return bad("observation variances must be non-negative");
        }
        if self.window.is_multiple_of(2) {
            return bad("smoothing window must be odd");
        }
        Ok(())
    }

    fn effective_prior(&self) -> (f64, f64) {
        if self.use_prior {
            (self.prior_variance, self.yaw_prior_variance)
        } else {
            (f64::INFINITY, f64::INFINITY)
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrackError {
    #[error("invalid estimator config: {0}")]
    Config(String),
    #[error("observation sequence has no frames")]
    Empty,
    #[error("object {0} is never observed")]
    NeverObserved(ObjectId),
    #[error("object {0} is not observed at frame 0")]
    UnobservedAtStart(ObjectId),
    #[error("frame {frame} has no entry for object {id}")]
    MissingEntry { frame: FrameId, id: ObjectId },
    #[error("object {0}: missing identity labels and no classifier registered")]
    MissingLabels(ObjectId),
    #[error("physics prior: {0}")]
    Prior(#[from] SimError),
}

/// External source of static attributes.
pub trait AttributeClassifier {
    fn classify(&self, observations: &ObservationSequence, id: ObjectId) -> Option<(Shape, Color)>;
}

/// Shape and color per object: the classifier's output when one is given,
/// the declared labels otherwise.
pub fn classify_static_attributes(
    observations: &ObservationSequence,
    classifier: Option<&dyn AttributeClassifier>,
) -> Result<Vec<(ObjectId, Shape, Color)>, TrackError> {
    observations
        .header
        .labels
        .iter()
        .map(|l: &ObjectLabel| {
            let found = match classifier {
                Some(c) => c.classify(observations, l.id),
                None => l.shape.zip(l.color),
            };
            found.map(|(s, c)| (l.id, s, c)).ok_or(TrackError::MissingLabels(l.id))
        })
        .collect()
}

/// Prior mean, observation and posterior for one object at one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionRecord {
    pub id: ObjectId,
    pub prior: Vec3,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation: Option<Vec3>,
    pub posterior: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameDiagnostics {
    pub frame: FrameId,
    pub objects: Vec<FusionRecord>,
}

/// Tracked scene in annotation form, plus per-frame fusion records.
///
/// A tracked prefix holds fewer trajectory frames than `config.n_frames`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatedScene {
    #[serde(flatten)]
    pub scene: SceneAnnotation,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<FrameDiagnostics>,
}

/// Smoothed velocity at the last of `positions`, using only those frames.
pub fn online_velocity(positions: &[Vec3], dt: f64, window: usize) -> Vec3 {
    if positions.len() < 2 {
        return Vec3::ZERO;
    }
    // The truncated window at the end reaches back window/2 differences.
    let start = positions.len().saturating_sub(window / 2 + 2);
    let tail = &positions[start..];
    let v = moving_average(&backward_difference(tail, dt), window);
    v[v.len() - 1]
}

/// Frames by which `online_velocity` trails the last frame: the distance
/// from the last frame to the mean frame of the averaged differences.
pub fn smoothing_lag(len: usize, window: usize) -> f64 {
    if len < 2 {
        return 0.0;
    }
    let last = len - 1;
    let lo = last.saturating_sub(window / 2);
    // The first difference is a copy of the second.
    let frames: Vec<f64> = (lo..=last).map(|i| i.max(1) as f64).collect();
    last as f64 - frames.iter().sum::<f64>() / frames.len() as f64
}

fn prior_forces(shape: Shape, position: Vec3, velocity: Vec3, t: &Thresholds) -> ForceProfile {
    let lift = shape.is_plane() && position.z > t.float_height && velocity.z > -t.float_max_vz;
    ForceProfile { engine_accel: 0.0, floating_force_per_mass: if lift { FLOATING_ACCEL } else { 0.0 } }
}

fn median(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    Some(xs[xs.len() / 2])
}

/// Least-squares slope of evenly spaced samples.
fn slope(ys: &[f64], dt: f64) -> f64 {
    let n = ys.len() as f64;
    let mean_t = (n - 1.0) / 2.0;
    let mean_y = ys.iter().sum::<f64>() / n;
    let (mut num, mut den) = (0.0, 0.0);
    for (i, y) in ys.iter().enumerate() {
        let dt_i = i as f64 - mean_t;
        num += dt_i * (y - mean_y);
        den += dt_i * dt_i;
    }
    num / den / dt
}

const FORCE_WINDOW: usize = 30;
const FORCE_STRIDE: usize = 10;

/// Force profile explaining an estimated trajectory.
///
/// Floating: a plane holding height with small vertical speed on most frames.
/// Engine: the median forward-speed slope over sliding windows exceeds the
/// acceleration threshold.
pub fn infer_forces(shape: Shape, states: &[DynamicState], dt: f64, t: &Thresholds) -> ForceProfile {
    let hovering = states
        .iter()
        .filter(|s| s.position.z > t.float_height && s.velocity.z.abs() < t.float_max_vz)
        .count();
    let floating = shape.is_plane() && 2 * hovering > states.len();
    let forward: Vec<f64> = states.iter().map(|s| s.velocity.dot(s.rotation.heading())).collect();
    let window = FORCE_WINDOW.min(forward.len());
    let slopes: Vec<f64> = if window < 3 {
        Vec::new()
    } else {
        (0..=forward.len() - window).step_by(FORCE_STRIDE).map(|i| slope(&forward[i..i + window], dt)).collect()
    };
    let accelerating = median(slopes).is_some_and(|m| m > t.accel);
    ForceProfile::new(accelerating, floating)
}

/// Single-hypothesis filter: each frame takes one engine step from the
/// previous posterior and fuses it with the observation.
pub fn track_scene(observations: &ObservationSequence, config: &EstimatorConfig) -> Result<EstimatedScene, TrackError> {
    track_scene_with(observations, config, None)
}

pub fn track_scene_with(
    observations: &ObservationSequence,
    config: &EstimatorConfig,
    classifier: Option<&dyn AttributeClassifier>,
) -> Result<EstimatedScene, TrackError> {
    config.validate()?;
    let n = observations.frames.len();
    if n == 0 {
        return Err(TrackError::Empty);
    }
    let scene_config = &observations.header.config;
    let dt = scene_config.dt;
    let thresholds = Thresholds::default();
    let labels = classify_static_attributes(observations, classifier)?;
    let specs: Vec<ObjectSpec> = labels.iter().map(|&(id, s, c)| ObjectSpec::new(id, s, c)).collect();

    // poses[object][frame], None where hidden.
    let mut poses: Vec<Vec<Option<(Vec3, f64)>>> = vec![Vec::with_capacity(n); specs.len()];
    let slot: BTreeMap<ObjectId, usize> = specs.iter().enumerate().map(|(i, s)| (s.id, i)).collect();
    for f in &observations.frames {
        let mut seen = vec![None; specs.len()];
        for o in &f.objects {
            if let Some(&i) = slot.get(&o.id) {
                seen[i] = Some(o.pose());
            }
        }
        for (i, s) in seen.into_iter().enumerate() {
            poses[i].push(s.ok_or(TrackError::MissingEntry { frame: f.frame, id: specs[i].id })?);
        }
    }
    for (spec, p) in specs.iter().zip(&poses) {
        if p.iter().all(Option::is_none) {
            return Err(TrackError::NeverObserved(spec.id));
        }
        if p[0].is_none() {
            return Err(TrackError::UnobservedAtStart(spec.id));
        }
    }

    let (pv, yv) = config.effective_prior();
    let mut positions: Vec<Vec<Vec3>> = poses.iter().map(|p| vec![p[0].expect("checked").0]).collect();
    let mut yaws: Vec<Vec<f64>> = poses.iter().map(|p| vec![p[0].expect("checked").1]).collect();
    let mut tracker = ContactTracker::new(scene_config.debounce_frames);
    let mut collisions = Vec::new();
    let mut contact_log = Vec::new();
    let mut diagnostics = Vec::new();

    for t in 1..n {
        let bodies = specs
            .iter()
            .enumerate()
            .map(|(i, spec)| {
                let position = positions[i][t - 1];
                let smoothed = online_velocity(&positions[i], dt, config.window);
                let forces = prior_forces(spec.shape, position, smoothed, &thresholds);
                // Airborne bodies: carry the smoothed velocity forward over the
                // window lag under the known vertical forces.
                let mut velocity = smoothed;
                if position.z > thresholds.float_height {
                    let lag = smoothing_lag(positions[i].len(), config.window);
                    velocity.z += (forces.floating_force_per_mass - scene_config.gravity) * dt * lag;
                }
                let state = DynamicState {
                    position,
                    rotation: Rotation::from_yaw(yaws[i][t - 1]),
                    velocity,
                    acceleration: Vec3::ZERO,
                };
                Body { spec: spec.clone(), forces, state }
            })
            .collect();
        let previous = WorldState { frame: t - 1, bodies };
        let (prior, contacts) = predict_prior(&previous, scene_config)?;
        for c in &contacts {
            contact_log.push(ContactRecord { frame: t, pair: c.pair });
            if tracker.observe(t, c.pair) {
                collisions.push(CollisionEvent {
                    frame: t,
                    pair: c.pair,
                    contact_point: Some(c.point),
                    impulse_magnitude: Some(c.impulse),
                });
            }
        }
        let mut records = Vec::new();
        for (i, body) in prior.bodies.iter().enumerate() {
            let obs = poses[i][t];
            let mu = body.state.position;
            let posterior = fuse_position(mu, pv, obs.map(|o| o.0), config.obs_variance);
            let yaw = fuse_yaw(body.state.rotation.yaw(), yv, obs.map(|o| o.1), config.yaw_obs_variance);
            positions[i].push(posterior);
            yaws[i].push(yaw);
            if config.record_diagnostics {
                records.push(FusionRecord { id: specs[i].id, prior: mu, observation: obs.map(|o| o.0), posterior });
            }
        }
        if config.record_diagnostics {
            diagnostics.push(FrameDiagnostics { frame: t, objects: records });
        }
    }

    let mut objects = Vec::with_capacity(specs.len());
    let mut trajectories = Vec::with_capacity(specs.len());
    for (i, spec) in specs.into_iter().enumerate() {
        let (vel, acc) = derive_dynamics(&positions[i], dt, config.window);
        let states: Vec<DynamicState> = (0..n)
            .map(|t| DynamicState {
                position: positions[i][t],
                rotation: Rotation::from_yaw(yaws[i][t]),
                velocity: vel[t],
                acceleration: acc[t],
            })
            .collect();
        if let Some(frame) = states.iter().position(|s| !s.is_finite()) {
            return Err(TrackError::Prior(SimError::Diverged { frame, object: spec.id }));
        }
        let forces = infer_forces(spec.shape, &states, dt, &thresholds);
        objects.push(SceneObject { spec, forces });
        trajectories.push(Trajectory { states });
    }

    Ok(EstimatedScene {
        scene: SceneAnnotation {
            scene_id: observations.header.scene_id.clone(),
            objects,
            trajectories,
            collisions,
            contact_log,
            counterfactuals: Vec::new(),
            camera: observations.header.camera,
            config: scene_config.clone(),
        },
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::observe::{synthesize_observations, NoiseModel, ObjectObservation};
    use crate::generator::{generate_scene, GeneratorConfig};
    use crate::physics::{simulate, SceneConfig};

    fn scene(seed: u64) -> SceneAnnotation {
        generate_scene(&format!("track_{seed}"), &GeneratorConfig::default(), seed).unwrap()
    }

    #[test]
    fn exact_observations_are_reproduced() {
        for seed in 0..4 {
            let gt = scene(seed);
            let obs = synthesize_observations(&gt, &NoiseModel::exact());
            let est = track_scene(&obs, &EstimatorConfig::for_noise(0.0, 0.0)).unwrap();
            for (a, b) in est.scene.trajectories.iter().zip(&gt.trajectories) {
                for (x, y) in a.states.iter().zip(&b.states) {
                    assert!((x.position - y.position).norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn lag_of_truncated_window() {
        assert_eq!(smoothing_lag(1, 5), 0.0);
        assert_eq!(smoothing_lag(2, 5), 0.0);
        assert!((smoothing_lag(3, 5) - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(smoothing_lag(10, 5), 1.0);
        assert_eq!(smoothing_lag(10, 1), 0.0);
    }

    #[test]
    fn online_velocity_matches_offline_tail() {
        let xs: Vec<Vec3> = (0..12).map(|i| Vec3::new((i * i) as f64 * 0.01, 0.0, 0.0)).collect();
        for t in 1..xs.len() {
            let (v, _) = derive_dynamics(&xs[..=t], 0.1, 5);
            assert!((online_velocity(&xs[..=t], 0.1, 5) - v[t]).norm() < 1e-12, "t={t}");
        }
    }

    fn ballistic(shape: Shape) -> SceneAnnotation {
        let spec = ObjectSpec::new(0, shape, Color::Red);
        let config = SceneConfig::default();
        let state = DynamicState { position: Vec3::new(-5.0, 0.0, 4.0), velocity: Vec3::new(3.0, 0.0, 5.0), ..Default::default() };
        let world = WorldState::new(vec![Body { spec: spec.clone(), forces: ForceProfile::default(), state }]);
        let sim = simulate(&world, &config).unwrap();
        SceneAnnotation {
            scene_id: "arc".into(),
            objects: vec![SceneObject { spec, forces: ForceProfile::default() }],
            trajectories: sim.trajectories,
            collisions: sim.collisions,
            contact_log: sim.contact_log,
            counterfactuals: Vec::new(),
            camera: Default::default(),
            config,
        }
    }

    #[test]
    fn gap_over_ballistic_arc_follows_the_engine() {
        // A ground vehicle, so the prior never assumes lift.
        let gt = ballistic(Shape::Sedan);
        let mut obs = synthesize_observations(&gt, &NoiseModel::exact());
        for f in &mut obs.frames[20..50] {
            f.objects[0] = ObjectObservation::hidden(0);
        }
        let est = track_scene(&obs, &EstimatorConfig::for_noise(0.0, 0.0)).unwrap();
        let e = &est.scene.trajectories[0].states;
        let g = &gt.trajectories[0].states;
        for t in 20..50 {
            let err = (e[t].position - g[t].position).norm();
            assert!(err < 1e-9, "frame {t}: {err}");
        }
        for t in 50..g.len() {
            assert!((e[t].position - g[t].position).norm() < 1e-9, "frame {t}");
        }
    }

    #[test]
    fn observation_only_keeps_visible_observations() {
        let gt = scene(3);
        let obs = synthesize_observations(&gt, &NoiseModel::default());
        let est = track_scene(&obs, &EstimatorConfig::default().observation_only()).unwrap();
        for f in &obs.frames {
            for (o, t) in f.objects.iter().zip(&est.scene.trajectories) {
                if let Some((p, _)) = o.pose() {
                    assert_eq!(t.states[f.frame].position, p);
                }
            }
        }
    }

    #[test]
    fn prediction_only_limit_matches_open_loop() {
        let gt = ballistic(Shape::Jet);
        let obs = synthesize_observations(&gt, &NoiseModel::exact());
        let config = EstimatorConfig { obs_variance: f64::INFINITY, ..EstimatorConfig::default() };
        let est = track_scene(&obs, &config).unwrap();
        // With no weight on observations the filter coasts from frame 0 with
        // zero velocity, so the track is the engine's own output from rest.
        let mut state = gt.trajectories[0].states[0];
        state.velocity = Vec3::ZERO;
        let forces = prior_forces(Shape::Jet, state.position, Vec3::ZERO, &Thresholds::default());
        let world = WorldState::new(vec![Body { spec: gt.objects[0].spec.clone(), forces, state }]);
        let open = simulate(&world, &gt.config).unwrap();
        for t in 0..gt.n_frames() {
            let d = est.scene.trajectories[0].states[t].position - open.trajectories[0].states[t].position;
            assert!(d.norm() < 1e-9, "frame {t}");
        }
    }

    #[test]
    fn posterior_lies_between_prior_and_observation() {
        let gt = scene(5);
        let obs = synthesize_observations(&gt, &NoiseModel { seed: 2, ..NoiseModel::default() });
        let est = track_scene(&obs, &EstimatorConfig::default()).unwrap();
        for d in &est.diagnostics {
            for r in &d.objects {
                let z = r.observation.unwrap_or(r.prior);
                for (p, o, x) in [
                    (r.prior.x, z.x, r.posterior.x),
                    (r.prior.y, z.y, r.posterior.y),
                    (r.prior.z, z.z, r.posterior.z),
                ] {
                    assert!(x >= p.min(o) - 1e-12 && x <= p.max(o) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn tracking_errors() {
        let gt = scene(0);
        let mut obs = synthesize_observations(&gt, &NoiseModel::exact());
        obs.frames[0].objects[1] = ObjectObservation::hidden(obs.frames[0].objects[1].id);
        assert!(matches!(track_scene(&obs, &EstimatorConfig::default()), Err(TrackError::UnobservedAtStart(_))));
        for f in &mut obs.frames {
            f.objects[1] = ObjectObservation::hidden(f.objects[1].id);
        }
        assert!(matches!(track_scene(&obs, &EstimatorConfig::default()), Err(TrackError::NeverObserved(_))));
    }

    struct Fixed;
    impl AttributeClassifier for Fixed {
        fn classify(&self, _: &ObservationSequence, _: ObjectId) -> Option<(Shape, Color)> {
            Some((Shape::Scooter, Color::Cyan))
        }
    }

    #[test]
    fn static_attributes_dispatch() {
        let gt = scene(1);
        let mut obs = synthesize_observations(&gt, &NoiseModel::exact());
        let labels = classify_static_attributes(&obs, None).unwrap();
        for ((id, s, c), o) in labels.iter().zip(&gt.objects) {
            assert_eq!((*id, *s, *c), (o.spec.id, o.spec.shape, o.spec.color));
        }
        let hooked = classify_static_attributes(&obs, Some(&Fixed)).unwrap();
        assert!(hooked.iter().all(|&(_, s, c)| s == Shape::Scooter && c == Color::Cyan));
        obs.header.labels[0].shape = None;
        assert!(matches!(classify_static_attributes(&obs, None), Err(TrackError::MissingLabels(_))));
        assert!(classify_static_attributes(&obs, Some(&Fixed)).is_ok());
    }

    #[test]
    fn forces_inferred_from_exact_tracks() {
        let mut hits = 0;
        let mut total = 0;
        for seed in 0..10 {
            let gt = scene(seed);
            let obs = synthesize_observations(&gt, &NoiseModel::exact());
            let est = track_scene(&obs, &EstimatorConfig::for_noise(0.0, 0.0)).unwrap();
            for (e, g) in est.scene.objects.iter().zip(&gt.objects) {
                total += 1;
                hits += usize::from(e.forces == g.forces);
            }
        }
        assert!(hits * 10 >= total * 9, "{hits}/{total}");
    }
}
