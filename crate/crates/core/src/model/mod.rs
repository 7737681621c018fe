//! Domain types shared by every stage: objects, per-frame states, collision
//! events, attribute vocabularies and the scene annotation record.

mod camera;
mod object;
mod rotation;
mod scene;
mod state;
mod vec3;
mod vocab;

pub use camera::{direction_of, Camera, CameraBasis, CameraError, EPSILON_MOTION};
pub use object::{
    mass_of, velocity_state_of, ForceProfile, ObjectId, ObjectSpec, SpecError, DENSITY, ENGINE_ACCEL,
    FLOATING_ACCEL, SLOW_SPEED_MAX,
};
pub use rotation::{wrap_angle, Rotation, RotationError};
pub use scene::{CounterfactualRecord, Modification, ModificationParseError, SceneAnnotation, SceneError, SceneObject};
pub use state::{CollisionEvent, ContactRecord, DynamicState, FrameId, ObjectPair, SamePairError, Trajectory};
pub use vec3::Vec3;
pub use vocab::{
    in_answer_vocabulary, Color, Direction, Shape, ShapeClass, UnknownName, VelocityState, ANSWER_VOCABULARY,
};
