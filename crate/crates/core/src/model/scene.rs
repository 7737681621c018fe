use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{
    Camera, CollisionEvent, ContactRecord, ForceProfile, ObjectId, ObjectSpec, Trajectory, VelocityState,
};
use crate::physics::SceneConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    #[serde(flatten)]
    pub spec: ObjectSpec,
    pub forces: ForceProfile,
}

/// A single-property change to one object's initial conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "property", content = "value", rename_all = "snake_case")]
pub enum Modification {
    /// Initial speed set to the state's canonical speed along the heading.
    Velocity(VelocityState),
    /// Engine switched on or off.
    Accelerating(bool),
    /// Floating force switched on or off (planes only).
    Floating(bool),
}

impl std::fmt::Display for Modification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Modification::Velocity(v) => write!(f, "velocity={v}"),
            Modification::Accelerating(b) => write!(f, "accelerating={b}"),
            Modification::Floating(b) => write!(f, "floating={b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("bad modification {0:?}; expected velocity=static|slow|fast, accelerating=true|false or floating=true|false")]
pub struct ModificationParseError(pub String);

impl std::str::FromStr for Modification {
    type Err = ModificationParseError;

    /// Parses the `property=value` form produced by `Display`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ModificationParseError(s.to_string());
        let (property, value) = s.split_once('=').ok_or_else(err)?;
        let flag = |v: &str| v.trim().parse::<bool>().map_err(|_| err());
        match property.trim() {
            "velocity" => value.trim().parse().map(Modification::Velocity).map_err(|_| err()),
            "accelerating" => flag(value).map(Modification::Accelerating),
            "floating" => flag(value).map(Modification::Floating),
            _ => Err(err()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualRecord {
    pub object_id: ObjectId,
    pub modification: Modification,
    pub events: Vec<CollisionEvent>,
}

/// Complete 4D record of one scene: object identities, per-frame states,
/// collision events and counterfactual variants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneAnnotation {
    pub scene_id: String,
    pub objects: Vec<SceneObject>,
    /// One trajectory per entry of `objects`, in the same order.
    pub trajectories: Vec<Trajectory>,
    pub collisions: Vec<CollisionEvent>,
    #[serde(default)]
    pub contact_log: Vec<ContactRecord>,
    #[serde(default)]
    pub counterfactuals: Vec<CounterfactualRecord>,
    pub camera: Camera,
    pub config: SceneConfig,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SceneError {
    #[error("duplicate object id {0}")]
    DuplicateId(ObjectId),
    #[error("{objects} objects but {trajectories} trajectories")]
    TrajectoryCount { objects: usize, trajectories: usize },
    #[error("trajectory of object {id} has {len} frames, expected {expected}")]
    TrajectoryLength { id: ObjectId, len: usize, expected: usize },
    #[error("collision at frame {frame} references unknown object {id}")]
    UnknownObject { frame: usize, id: ObjectId },
    #[error("collision frame {frame} outside horizon {horizon}")]
    FrameOutOfRange { frame: usize, horizon: usize },
    #[error("non-finite state for object {id} at frame {frame}")]
    NonFinite { id: ObjectId, frame: usize },
}

impl SceneAnnotation {
    pub fn n_frames(&self) -> usize {
        self.config.n_frames
    }

    pub fn object_index(&self, id: ObjectId) -> Option<usize> {
        self.objects.iter().position(|o| o.spec.id == id)
    }

    pub fn object(&self, id: ObjectId) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.spec.id == id)
    }

    pub fn trajectory(&self, id: ObjectId) -> Option<&Trajectory> {
        self.object_index(id).map(|i| &self.trajectories[i])
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let mut seen = BTreeSet::new();
        for o in &self.objects {
            if !seen.insert(o.spec.id) {
                return Err(SceneError::DuplicateId(o.spec.id));
            }
        }
        if self.objects.len() != self.trajectories.len() {
            return Err(SceneError::TrajectoryCount {
                objects: self.objects.len(),
                trajectories: self.trajectories.len(),
            });
        }
        let expected = self.n_frames();
        for (o, t) in self.objects.iter().zip(&self.trajectories) {
            if t.len() != expected {
                return Err(SceneError::TrajectoryLength { id: o.spec.id, len: t.len(), expected });
            }
            if let Some(frame) = t.states.iter().position(|s| !s.is_finite()) {
                return Err(SceneError::NonFinite { id: o.spec.id, frame });
            }
        }
        let events = self
            .collisions
            .iter()
            .chain(self.counterfactuals.iter().flat_map(|c| c.events.iter()));
        for e in events {
            for id in [e.pair.first(), e.pair.second()] {
                if !seen.contains(&id) {
                    return Err(SceneError::UnknownObject { frame: e.frame, id });
                }
            }
            if e.frame >= expected {
                return Err(SceneError::FrameOutOfRange { frame: e.frame, horizon: expected });
            }
        }
        Ok(())
    }
}
