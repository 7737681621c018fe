//! Deterministic rigid-body simulation: gravity, engine drive, floating lift,
//! floor friction, impulse contacts and debounced collision events.

mod config;
mod obb;
mod sim;
mod step;
mod world;

pub use config::{ConfigError, SceneConfig};
pub use obb::{overlap, OrientedBox, Penetration};
pub use sim::{simulate, simulate_from, world_at, ContactTracker, Simulation};
pub use step::{detect_collisions, resolve_collision, step, ContactManifold, ImpulseResult, SimError, FLOOR_CONTACT};
pub use world::{Body, WorldError, WorldState};
