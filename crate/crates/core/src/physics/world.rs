use serde::{Deserialize, Serialize};

use super::obb::OrientedBox;
use crate::model::{DynamicState, ForceProfile, FrameId, ObjectId, ObjectSpec, Vec3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Body {
    pub spec: ObjectSpec,
    pub forces: ForceProfile,
    pub state: DynamicState,
}

impl Body {
    pub fn id(&self) -> ObjectId {
        self.spec.id
    }

    /// Collision proxy in world coordinates. The box sits on the body's
    /// reference point (bottom-center).
    pub fn proxy(&self) -> OrientedBox {
        let e = self.spec.proxy_extents;
        OrientedBox {
            center: self.state.position + Vec3::new(0.0, 0.0, e.z),
            axes: self.state.rotation.axes(),
            half: [e.x, e.y, e.z],
        }
    }

    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self.spec.mass * self.state.velocity.norm_squared()
    }
}

/// Snapshot of every body at one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub frame: FrameId,
    pub bodies: Vec<Body>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WorldError {
    #[error("duplicate body id {0}")]
    DuplicateId(ObjectId),
    #[error("body {0} has a non-finite state")]
    NonFinite(ObjectId),
}

impl WorldState {
    pub fn new(bodies: Vec<Body>) -> Self {
        Self { frame: 0, bodies }
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        let mut ids: Vec<_> = self.bodies.iter().map(Body::id).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(WorldError::DuplicateId(w[0]));
        }
        if let Some(b) = self.bodies.iter().find(|b| !b.state.is_finite()) {
            return Err(WorldError::NonFinite(b.id()));
        }
        Ok(())
    }

    pub fn body(&self, id: ObjectId) -> Option<&Body> {
        self.bodies.iter().find(|b| b.id() == id)
    }

    pub fn body_mut(&mut self, id: ObjectId) -> Option<&mut Body> {
        self.bodies.iter_mut().find(|b| b.id() == id)
    }

    pub fn momentum(&self) -> Vec3 {
        self.bodies.iter().map(|b| b.state.velocity * b.spec.mass).sum()
    }

    /// Kinetic plus gravitational potential energy (zero at z = 0).
    pub fn mechanical_energy(&self, gravity: f64) -> f64 {
        self.bodies
            .iter()
            .map(|b| b.kinetic_energy() + b.spec.mass * gravity * b.state.position.z)
            .sum()
    }
}
