use serde::{Deserialize, Serialize};

use super::{ObjectId, Rotation, Vec3};

pub type FrameId = usize;

/// Kinematic state of one object at one frame.
///
/// `position` is the bottom-center of the object, so grounded objects sit at
/// `z = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DynamicState {
    pub position: Vec3,
    pub rotation: Rotation,
    pub velocity: Vec3,
    pub acceleration: Vec3,
}

impl DynamicState {
    pub fn is_finite(&self) -> bool {
        self.position.is_finite() && self.velocity.is_finite() && self.acceleration.is_finite()
    }

    pub fn speed(&self) -> f64 {
        self.velocity.norm()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<DynamicState>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn positions(&self) -> Vec<Vec3> {
        self.states.iter().map(|s| s.position).collect()
    }
}

/// Unordered pair of distinct objects, stored with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "[ObjectId; 2]", into = "[ObjectId; 2]")]
pub struct ObjectPair {
    a: ObjectId,
    b: ObjectId,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("collision pair needs two distinct objects, got ({0}, {0})")]
pub struct SamePairError(pub ObjectId);

impl ObjectPair {
    pub fn new(a: ObjectId, b: ObjectId) -> Result<Self, SamePairError> {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Ok(Self { a, b }),
            std::cmp::Ordering::Greater => Ok(Self { a: b, b: a }),
            std::cmp::Ordering::Equal => Err(SamePairError(a)),
        }
    }

    pub fn first(&self) -> ObjectId {
        self.a
    }

    pub fn second(&self) -> ObjectId {
        self.b
    }

    pub fn contains(&self, id: ObjectId) -> bool {
        self.a == id || self.b == id
    }

    /// The member that is not `id`, if `id` is a member.
    pub fn partner(&self, id: ObjectId) -> Option<ObjectId> {
        if self.a == id {
            Some(self.b)
        } else if self.b == id {
            Some(self.a)
        } else {
            None
        }
    }
}

impl TryFrom<[ObjectId; 2]> for ObjectPair {
    type Error = SamePairError;
    fn try_from([a, b]: [ObjectId; 2]) -> Result<Self, Self::Error> {
        ObjectPair::new(a, b)
    }
}

impl From<ObjectPair> for [ObjectId; 2] {
    fn from(p: ObjectPair) -> Self {
        [p.a, p.b]
    }
}

/// First frame of a contact episode between two objects.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollisionEvent {
    pub frame: FrameId,
    pub pair: ObjectPair,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contact_point: Option<Vec3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub impulse_magnitude: Option<f64>,
}

impl CollisionEvent {
    pub fn new(frame: FrameId, pair: ObjectPair) -> Self {
        Self { frame, pair, contact_point: None, impulse_magnitude: None }
    }

    /// Identity key used for set semantics: frame and pair.
    pub fn key(&self) -> (FrameId, ObjectPair) {
        (self.frame, self.pair)
    }
}

/// Frame at which a pair was in contact; the full per-frame log lets a
/// simulation be resumed mid-run with the same event debouncing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ContactRecord {
    pub frame: FrameId,
    pub pair: ObjectPair,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_is_canonical() {
        let p = ObjectPair::new(5, 2).unwrap();
        assert_eq!((p.first(), p.second()), (2, 5));
        assert_eq!(p, ObjectPair::new(2, 5).unwrap());
        assert_eq!(p.partner(5), Some(2));
        assert_eq!(p.partner(7), None);
        assert!(ObjectPair::new(3, 3).is_err());
        assert_eq!(serde_json::to_string(&p).unwrap(), "[2,5]");
        assert!(serde_json::from_str::<ObjectPair>("[4,4]").is_err());
    }
}
