use std::collections::BTreeMap;

use super::step::{step, ContactManifold, SimError};
use super::{Body, SceneConfig, WorldState};
use crate::model::{CollisionEvent, ContactRecord, FrameId, ObjectPair, SceneAnnotation, Trajectory};

/// Turns per-frame contacts into debounced collision events.
///
/// A contact starts a new event when the pair has never touched, or when more
/// than `debounce` frames passed since its last contact.
#[derive(Debug, Clone, Default)]
pub struct ContactTracker {
    debounce: usize,
    last_contact: BTreeMap<ObjectPair, FrameId>,
}

impl ContactTracker {
    pub fn new(debounce: usize) -> Self {
        Self { debounce, last_contact: BTreeMap::new() }
    }

    /// Rebuilds the tracker state from a contact log, keeping records at or
    /// before `up_to`.
    pub fn from_log(debounce: usize, log: &[ContactRecord], up_to: FrameId) -> Self {
        let mut t = Self::new(debounce);
        for r in log.iter().filter(|r| r.frame <= up_to) {
            let e = t.last_contact.entry(r.pair).or_insert(r.frame);
            *e = (*e).max(r.frame);
        }
        t
    }

    /// Registers a contact and reports whether it opens a new event.
    pub fn observe(&mut self, frame: FrameId, pair: ObjectPair) -> bool {
        let fresh = match self.last_contact.get(&pair) {
            None => true,
            Some(&last) => frame.saturating_sub(last) > self.debounce,
        };
        self.last_contact.insert(pair, frame);
        fresh
    }
}

/// Output of a simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    /// First frame covered by `trajectories`.
    pub start_frame: FrameId,
    /// One trajectory per body, in the order of the initial world.
    pub trajectories: Vec<Trajectory>,
    pub collisions: Vec<CollisionEvent>,
    pub contact_log: Vec<ContactRecord>,
}

/// Runs `config.n_frames` frames starting from frame 0.
///
/// The initial acceleration copies the first computed one so the series has
/// no artificial jump.
pub fn simulate(initial: &WorldState, config: &SceneConfig) -> Result<Simulation, SimError> {
    let mut world = initial.clone();
    world.frame = 0;
    let mut sim = simulate_from(&world, ContactTracker::new(config.debounce_frames), config)?;
    for t in &mut sim.trajectories {
        if t.states.len() > 1 {
            t.states[0].acceleration = t.states[1].acceleration;
        }
    }
    Ok(sim)
}

/// Continues a run from `world.frame` to the end of the horizon. The state at
/// `world.frame` is included unchanged as the first trajectory entry.
pub fn simulate_from(
    world: &WorldState,
    mut tracker: ContactTracker,
    config: &SceneConfig,
) -> Result<Simulation, SimError> {
    config.validate()?;
    world.validate()?;
    let start = world.frame;
    let mut trajectories: Vec<Trajectory> = world
        .bodies
        .iter()
        .map(|b| Trajectory { states: vec![b.state] })
        .collect();
    let mut collisions = Vec::new();
    let mut contact_log = Vec::new();
    let mut current = world.clone();
    while current.frame + 1 < config.n_frames {
        let (next, contacts) = step(&current, config)?;
        record_contacts(next.frame, &contacts, &mut tracker, &mut collisions, &mut contact_log);
        for (t, b) in trajectories.iter_mut().zip(&next.bodies) {
            t.states.push(b.state);
        }
        current = next;
    }
    Ok(Simulation { start_frame: start, trajectories, collisions, contact_log })
}

fn record_contacts(
    frame: FrameId,
    contacts: &[ContactManifold],
    tracker: &mut ContactTracker,
    collisions: &mut Vec<CollisionEvent>,
    log: &mut Vec<ContactRecord>,
) {
    for c in contacts {
        log.push(ContactRecord { frame, pair: c.pair });
        if tracker.observe(frame, c.pair) {
            collisions.push(CollisionEvent {
                frame,
                pair: c.pair,
                contact_point: Some(c.point),
                impulse_magnitude: Some(c.impulse),
            });
        }
    }
}

/// Rebuilds the world at `frame` from a scene's recorded trajectories.
pub fn world_at(scene: &SceneAnnotation, frame: FrameId) -> WorldState {
    let bodies = scene
        .objects
        .iter()
        .zip(&scene.trajectories)
        .map(|(o, t)| Body { spec: o.spec.clone(), forces: o.forces, state: t.states[frame] })
        .collect();
    WorldState { frame, bodies }
}
