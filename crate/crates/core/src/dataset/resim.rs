use serde::{Deserialize, Serialize};

use crate::generator::apply_modification;
use crate::model::{CollisionEvent, FrameId, Modification, ObjectId, SceneAnnotation};
use crate::physics::{simulate, world_at};

/// Largest position gap between base and modified runs for one object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    pub id: ObjectId,
    pub max_position_diff: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_frame: Option<FrameId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResimReport {
    pub scene_id: String,
    pub object: ObjectId,
    pub modification: Modification,
    pub base_events: Vec<CollisionEvent>,
    pub counterfactual_events: Vec<CollisionEvent>,
    /// Events only in the modified run.
    pub added: Vec<CollisionEvent>,
    /// Events only in the base run.
    pub removed: Vec<CollisionEvent>,
    pub divergence: Vec<Divergence>,
}

impl ResimReport {
    pub fn events_changed(&self) -> bool {
        !self.added.is_empty() || !self.removed.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ResimError {
    #[error("{0}")]
    Modification(#[from] crate::generator::GenerationError),
    #[error("simulation: {0}")]
    Simulation(#[from] crate::physics::SimError),
}

/// Re-simulates a scene from frame 0 with one modification and compares it
/// with the recorded run.
pub fn resimulate(scene: &SceneAnnotation, object: ObjectId, modification: Modification) -> Result<ResimReport, ResimError> {
    let mut world = world_at(scene, 0);
    apply_modification(&mut world, object, modification)?;
    let sim = simulate(&world, &scene.config)?;
    let key = |e: &CollisionEvent| e.key();
    let added = sim.collisions.iter().filter(|e| !scene.collisions.iter().any(|b| key(b) == key(e))).copied().collect();
    let removed = scene.collisions.iter().filter(|b| !sim.collisions.iter().any(|e| key(b) == key(e))).copied().collect();
    let divergence = scene
        .objects
        .iter()
        .zip(&scene.trajectories)
        .zip(&sim.trajectories)
        .map(|((o, base), new)| {
            let diffs: Vec<f64> =
                base.states.iter().zip(&new.states).map(|(a, b)| (a.position - b.position).norm()).collect();
            Divergence {
                id: o.spec.id,
                max_position_diff: diffs.iter().copied().fold(0.0, f64::max),
                first_frame: diffs.iter().position(|d| *d > 0.0),
            }
        })
        .collect();
    Ok(ResimReport {
        scene_id: scene.scene_id.clone(),
        object,
        modification,
        base_events: scene.collisions.clone(),
        counterfactual_events: sim.collisions,
        added,
        removed,
        divergence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{build_annotation, generate_scene, initial_velocity_state, GeneratorConfig};
    use crate::model::{Color, DynamicState, ForceProfile, ObjectSpec, Rotation, Shape, Vec3, VelocityState};
    use crate::physics::{Body, SceneConfig, WorldState};

    #[test]
    fn recorded_counterfactuals_replay() {
        for seed in 0..6 {
            let scene = generate_scene("r", &GeneratorConfig::default(), seed).unwrap();
            for cf in &scene.counterfactuals {
                let r = resimulate(&scene, cf.object_id, cf.modification).unwrap();
                assert_eq!(r.counterfactual_events, cf.events);
            }
        }
    }

    #[test]
    fn identity_modification_changes_nothing() {
        let scene = generate_scene("r", &GeneratorConfig::default(), 2).unwrap();
        let o = &scene.objects[0];
        let state = initial_velocity_state(&scene.trajectories[0].states[0]);
        let r = resimulate(&scene, o.spec.id, Modification::Velocity(state)).unwrap();
        assert!(!r.events_changed());
        let r = resimulate(&scene, o.spec.id, Modification::Accelerating(o.forces.accelerating())).unwrap();
        assert!(!r.events_changed());
        assert!(r.divergence.iter().all(|d| d.max_position_diff == 0.0));
    }

    #[test]
    fn far_object_bump_moves_only_itself() {
        let config = SceneConfig::default();
        let body = |id, shape, x: f64, speed: f64| {
            let mut state = DynamicState::default();
            state.position = Vec3::new(x, 0.0, 0.0);
            state.rotation = Rotation::from_yaw(std::f64::consts::FRAC_PI_2);
            state.velocity = state.rotation.heading() * speed;
            Body { spec: ObjectSpec::new(id, shape, Color::Gray), forces: ForceProfile::default(), state }
        };
        let world = WorldState::new(vec![body(0, Shape::Sedan, -20.0, 3.0), body(1, Shape::Truck, 20.0, 0.0)]);
        let scene = build_annotation("far", &world, &config, &GeneratorConfig { counterfactuals: 0, ..Default::default() }).unwrap();
        let r = resimulate(&scene, 0, Modification::Velocity(VelocityState::Fast)).unwrap();
        assert!(!r.events_changed());
        assert!(r.divergence[0].max_position_diff > 1.0);
        assert_eq!(r.divergence[1].max_position_diff, 0.0);
        assert_eq!(r.divergence[0].first_frame, Some(1));
    }
}
