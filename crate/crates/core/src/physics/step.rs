//! One fixed step of the rigid-body update.

use super::obb::overlap;
use super::{SceneConfig, WorldState};
use crate::model::{ObjectPair, Rotation, Vec3};

/// Height at or below which a body counts as resting on the floor, m.
pub const FLOOR_CONTACT: f64 = 1e-9;

/// Horizontal speed above which the heading follows the velocity, m/s.
const HEADING_SPEED_EPS: f64 = 1e-9;

const VERTICAL_EPS: f64 = 1e-9;

/// Overlap between two bodies found during a step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactManifold {
    pub pair: ObjectPair,
    /// Unit normal from `pair.first()` toward `pair.second()`.
    pub normal: Vec3,
    pub depth: f64,
    pub point: Vec3,
    /// Normal impulse applied while resolving the contact, N·s.
    pub impulse: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("simulation diverged at frame {frame}: object {object} has a non-finite state")]
    Diverged { frame: usize, object: u32 },
    #[error("invalid initial world: {0}")]
    InvalidWorld(#[from] super::WorldError),
    #[error("invalid config: {0}")]
    InvalidConfig(#[from] super::ConfigError),
}

/// Post-impulse velocities of a two-body contact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpulseResult {
    pub velocity_a: Vec3,
    pub velocity_b: Vec3,
    /// Magnitude of the impulse along the normal, N·s.
    pub impulse: f64,
}

/// Frictionless normal impulse between two bodies with normal `n` pointing
/// from `a` to `b`. An inverse mass of zero models an immovable body.
///
/// Returns `None` when the bodies are already separating along `n`.
pub fn resolve_collision(
    velocity_a: Vec3,
    inv_mass_a: f64,
    velocity_b: Vec3,
    inv_mass_b: f64,
    normal: Vec3,
    restitution: f64,
) -> Option<ImpulseResult> {
    let approach = (velocity_b - velocity_a).dot(normal);
    let inv_sum = inv_mass_a + inv_mass_b;
    if approach >= 0.0 || inv_sum <= 0.0 {
        return None;
    }
    let j = -(1.0 + restitution) * approach / inv_sum;
    Some(ImpulseResult {
        velocity_a: velocity_a - normal * (j * inv_mass_a),
        velocity_b: velocity_b + normal * (j * inv_mass_b),
        impulse: j,
    })
}

/// All strictly overlapping body pairs, ordered by pair.
pub fn detect_collisions(world: &WorldState) -> Vec<ContactManifold> {
    let mut order: Vec<usize> = (0..world.bodies.len()).collect();
    order.sort_by_key(|&i| world.bodies[i].id());
    let proxies: Vec<_> = world.bodies.iter().map(|b| b.proxy()).collect();
    let mut out = Vec::new();
    for (k, &i) in order.iter().enumerate() {
        for &j in &order[k + 1..] {
            if let Some(p) = overlap(&proxies[i], &proxies[j]) {
                let pair = ObjectPair::new(world.bodies[i].id(), world.bodies[j].id())
                    .expect("ids validated unique");
                out.push(ContactManifold { pair, normal: p.normal, depth: p.depth, point: p.point, impulse: 0.0 });
            }
        }
    }
    out
}

fn effective_restitution(config: &SceneConfig, closing_speed: f64) -> f64 {
    if closing_speed < config.rest_speed_threshold {
        0.0
    } else {
        config.restitution
    }
}

/// Inverse masses used for a body-body contact. A grounded body pushed
/// downward is backed by the floor and acts as immovable.
fn contact_weights(world: &WorldState, ia: usize, ib: usize, normal: Vec3, config: &SceneConfig) -> (f64, f64) {
    let supported = |i: usize, push_z: f64| {
        config.floor && push_z < -VERTICAL_EPS && world.bodies[i].state.position.z <= FLOOR_CONTACT
    };
    let a = &world.bodies[ia];
    let b = &world.bodies[ib];
    let wa = if supported(ia, -normal.z) { 0.0 } else { a.spec.inverse_mass() };
    let wb = if supported(ib, normal.z) { 0.0 } else { b.spec.inverse_mass() };
    (wa, wb)
}

/// Floor impulse and clamp for every body below the ground plane.
fn floor_pass(world: &mut WorldState, config: &SceneConfig) {
    if !config.floor {
        return;
    }
    for body in &mut world.bodies {
        let s = &mut body.state;
        if s.position.z < 0.0 {
            let closing = -s.velocity.z;
            let e = effective_restitution(config, closing);
            if let Some(r) = resolve_collision(s.velocity, body.spec.inverse_mass(), Vec3::ZERO, 0.0, -Vec3::Z, e) {
                s.velocity = r.velocity_a;
            }
            s.position.z = 0.0;
        }
    }
}

/// Advances the world by one semi-implicit Euler step and resolves contacts.
///
/// Order: forces, velocity update, position update, floor, body-body
/// impulses, body-body penetration correction, floor again, heading.
pub fn step(world: &WorldState, config: &SceneConfig) -> Result<(WorldState, Vec<ContactManifold>), SimError> {
    let g = config.gravity;
    let dt = config.dt;
    let mut next = world.clone();
    next.frame = world.frame + 1;
    let start_velocities: Vec<Vec3> = world.bodies.iter().map(|b| b.state.velocity).collect();

    for body in &mut next.bodies {
        let s = &mut body.state;
        let v0 = s.velocity;
        let lift = body.forces.floating_force_per_mass;
        let drive = body.forces.engine_accel;
        let mut accel = Vec3::new(0.0, 0.0, lift - g) + s.rotation.heading() * drive;

        let on_floor = config.floor && s.position.z <= FLOOR_CONTACT;
        let mut stop_horizontal = false;
        // A running engine overcomes rolling friction; only coasting bodies slow down.
        if on_floor && drive == 0.0 {
            let decel = config.friction_effective() * (g - lift).max(0.0);
            let vh = v0.horizontal();
            let speed = vh.norm();
            if speed > 0.0 && decel > 0.0 {
                if decel * dt >= speed {
                    stop_horizontal = true;
                } else {
                    accel -= vh * (decel / speed);
                }
            }
        }

        let mut v = v0 + accel * dt;
        if stop_horizontal {
            v.x = 0.0;
            v.y = 0.0;
        }
        s.velocity = v;
        s.position += v * dt;
    }

    floor_pass(&mut next, config);

    let mut contacts = detect_collisions(&next);
    let index_of = |next: &WorldState, id| next.bodies.iter().position(|b| b.id() == id).expect("contact body exists");

    for c in &mut contacts {
        let ia = index_of(&next, c.pair.first());
        let ib = index_of(&next, c.pair.second());
        let (wa, wb) = contact_weights(&next, ia, ib, c.normal, config);
        let (a, b) = (&next.bodies[ia], &next.bodies[ib]);
        let closing = -(b.state.velocity - a.state.velocity).dot(c.normal);
        let e = effective_restitution(config, closing);
        if let Some(r) = resolve_collision(a.state.velocity, wa, b.state.velocity, wb, c.normal, e) {
            next.bodies[ia].state.velocity = r.velocity_a;
            next.bodies[ib].state.velocity = r.velocity_b;
            c.impulse = r.impulse;
        }
    }

    for c in &contacts {
        let ia = index_of(&next, c.pair.first());
        let ib = index_of(&next, c.pair.second());
        let (wa, wb) = contact_weights(&next, ia, ib, c.normal, config);
        let total = wa + wb;
        if total > 0.0 {
            next.bodies[ia].state.position -= c.normal * (c.depth * wa / total);
            next.bodies[ib].state.position += c.normal * (c.depth * wb / total);
        }
    }

    floor_pass(&mut next, config);

    for (body, v0) in next.bodies.iter_mut().zip(start_velocities) {
        let s = &mut body.state;
        let vh = s.velocity.horizontal();
        if vh.norm() > HEADING_SPEED_EPS {
            s.rotation = Rotation::from_yaw(vh.y.atan2(vh.x));
        }
        s.acceleration = (s.velocity - v0) / dt;
        if !s.is_finite() {
            return Err(SimError::Diverged { frame: next.frame, object: body.spec.id });
        }
    }

    Ok((next, contacts))
}
