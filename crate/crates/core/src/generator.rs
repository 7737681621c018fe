//! Random initial scenes and single-property counterfactual variants.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::model::{
    velocity_state_of, Camera, Color, CounterfactualRecord, DynamicState, ForceProfile, Modification, ObjectId,
    ObjectSpec, Rotation, SceneAnnotation, SceneObject, Shape, Vec3, VelocityState,
};
use crate::physics::{overlap, simulate, Body, SceneConfig, SimError, WorldState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub min_objects: usize,
    pub max_objects: usize,
    pub beta_alpha: f64,
    pub beta_beta: f64,
    /// Starting height range for airborne planes, m.
    pub plane_z_min: f64,
    pub plane_z_max: f64,
    pub p_airborne: f64,
    /// Probability that an airborne plane gets the floating force.
    pub p_floating: f64,
    pub p_engine: f64,
    /// Standard deviation of the heading around the face-center direction, rad.
    pub heading_noise: f64,
    /// Extra clearance between initial proxies, m.
    pub placement_margin: f64,
    pub max_attempts: usize,
    /// Counterfactual variants recorded per scene.
    pub counterfactuals: usize,
    pub scene: SceneConfig,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            min_objects: 3,
            max_objects: 6,
            beta_alpha: 2.0,
            beta_beta: 2.0,
            plane_z_min: 1.0,
            plane_z_max: 5.0,
            p_airborne: 0.5,
            p_floating: 0.5,
            p_engine: 0.5,
            heading_noise: 15f64.to_radians(),
            placement_margin: 0.5,
            max_attempts: 500,
            counterfactuals: 2,
            scene: SceneConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GenerationError {
    #[error("invalid generator config: {0}")]
    Config(String),
    #[error("could not place object {object} without overlap (scene seed {seed})")]
    Placement { seed: u64, object: usize },
    #[error("simulation failed (scene seed {seed}): {source}")]
    Simulation { seed: u64, source: SimError },
    #[error("object {0} not in scene")]
    UnknownObject(ObjectId),
    #[error("modification {0} is not applicable to object {1}")]
    NotApplicable(Modification, ObjectId),
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), GenerationError> {
        let bad = |m: &str| Err(GenerationError::Config(m.to_string()));
        if self.min_objects < 3 || self.min_objects > self.max_objects {
            return bad("object range must satisfy 3 <= min <= max");
        }
        if self.max_objects > Shape::ALL.len() * Color::ALL.len() {
            return bad("more objects than distinct (shape, color) pairs");
        }
        if !(self.beta_alpha > 0.0 && self.beta_beta > 0.0) {
            return bad("beta parameters must be positive");
        }
        if !(self.plane_z_min > 0.0 && self.plane_z_min <= self.plane_z_max) {
            return bad("plane height range must be positive and non-empty");
        }
        for p in [self.p_airborne, self.p_floating, self.p_engine] {
            if !(0.0..=1.0).contains(&p) {
                return bad("probabilities must lie in [0, 1]");
            }
        }
        if !(self.heading_noise >= 0.0 && self.placement_margin >= 0.0) || self.max_attempts == 0 {
            return bad("noise, margin and attempts must be non-negative");
        }
        self.scene.validate().map_err(|e| GenerationError::Config(e.to_string()))
    }
}

/// Per-scene seed derived from a master seed and a scene index.
pub fn scene_seed(master: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng.random()
}

/// Samples an overlap-free initial world. At least one object starts in each
/// velocity state.
pub fn sample_scene(config: &GeneratorConfig, seed: u64) -> Result<(WorldState, SceneConfig), GenerationError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(config.min_objects..=config.max_objects);

    let mut pairs: Vec<(Shape, Color)> = Shape::ALL
        .iter()
        .flat_map(|&s| Color::ALL.iter().map(move |&c| (s, c)))
        .collect();
    pairs.shuffle(&mut rng);
    let mut states = vec![VelocityState::Static, VelocityState::Slow, VelocityState::Fast];
    let speeds = [VelocityState::Static, VelocityState::Slow, VelocityState::Fast];
    while states.len() < n {
        states.push(*speeds.choose(&mut rng).expect("non-empty"));
    }
    states.shuffle(&mut rng);

    let beta = Beta::new(config.beta_alpha, config.beta_beta).map_err(|e| GenerationError::Config(e.to_string()))?;
    let noise = Normal::new(0.0, config.heading_noise).map_err(|e| GenerationError::Config(e.to_string()))?;
    let half = config.scene.arena_radius;

    let mut bodies: Vec<Body> = Vec::with_capacity(n);
    for (i, (&(shape, color), &state)) in pairs.iter().zip(&states).enumerate() {
        let spec = ObjectSpec::new(i as ObjectId, shape, color);
        let airborne = shape.is_plane() && rng.random_bool(config.p_airborne);
        // A motionless airborne plane has to float, otherwise it would not
        // start at rest.
        let floating = airborne && (state == VelocityState::Static || rng.random_bool(config.p_floating));
        let forces = ForceProfile::new(rng.random_bool(config.p_engine), floating);

        let mut placed = None;
        for _ in 0..config.max_attempts {
            let x = (2.0 * beta.sample(&mut rng) - 1.0) * half;
            let y = (2.0 * beta.sample(&mut rng) - 1.0) * half;
            let z = if airborne { rng.random_range(config.plane_z_min..=config.plane_z_max) } else { 0.0 };
            let toward_center = if x == 0.0 && y == 0.0 { 0.0 } else { (-y).atan2(-x) };
            let yaw = toward_center + noise.sample(&mut rng);
            let rotation = Rotation::from_yaw(yaw);
            let velocity = rotation.heading() * state.speed();
            let candidate = Body {
                spec: spec.clone(),
                forces,
                state: DynamicState { position: Vec3::new(x, y, z), rotation, velocity, acceleration: Vec3::ZERO },
            };
            if bodies.iter().all(|b| clear_of(b, &candidate, config.placement_margin)) {
                placed = Some(candidate);
                break;
            }
        }
        bodies.push(placed.ok_or(GenerationError::Placement { seed, object: i })?);
    }

    let scene = SceneConfig { seed, ..config.scene.clone() };
    Ok((WorldState::new(bodies), scene))
}

fn clear_of(a: &Body, b: &Body, margin: f64) -> bool {
    let grow = |body: &Body| {
        let mut p = body.proxy();
        for h in &mut p.half {
            *h += margin / 2.0;
        }
        p
    };
    overlap(&grow(a), &grow(b)).is_none()
}

/// Simulates an initial world and packages the full annotation, including
/// `config.counterfactuals` counterfactual variants.
pub fn build_annotation(
    scene_id: &str,
    world: &WorldState,
    scene: &SceneConfig,
    config: &GeneratorConfig,
) -> Result<SceneAnnotation, GenerationError> {
    let sim = simulate(world, scene).map_err(|source| GenerationError::Simulation { seed: scene.seed, source })?;
    let mut annotation = SceneAnnotation {
        scene_id: scene_id.to_string(),
        objects: world.bodies.iter().map(|b| SceneObject { spec: b.spec.clone(), forces: b.forces }).collect(),
        trajectories: sim.trajectories,
        collisions: sim.collisions,
        contact_log: sim.contact_log,
        counterfactuals: Vec::new(),
        camera: Camera::default(),
        config: scene.clone(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(scene.seed);
    rng.set_stream(1);
    let mut seen = Vec::new();
    for _ in 0..config.counterfactuals {
        // Retry a few times for a variant not already recorded.
        for _ in 0..8 {
            let record = make_counterfactual(&annotation, rng.random())?;
            let key = (record.object_id, record.modification);
            if !seen.contains(&key) {
                seen.push(key);
                annotation.counterfactuals.push(record);
                break;
            }
        }
    }
    Ok(annotation)
}

/// Full generation of one scene from its seed.
pub fn generate_scene(scene_id: &str, config: &GeneratorConfig, seed: u64) -> Result<SceneAnnotation, GenerationError> {
    let (world, scene) = sample_scene(config, seed)?;
    build_annotation(scene_id, &world, &scene, config)
}

/// Initial velocity state of an object, read from its frame-0 speed with a
/// small tolerance for the rounding of `heading * speed`.
pub fn initial_velocity_state(state: &DynamicState) -> VelocityState {
    const TOL: f64 = 1e-9;
    let speed = state.speed();
    if speed <= TOL {
        VelocityState::Static
    } else {
        velocity_state_of((speed - TOL).max(0.0)).unwrap_or(VelocityState::Fast)
    }
}

/// Modifications that change `body` and that the counterfactual operations
/// can express: a different initial velocity state, switching the engine on,
/// or switching the floating force on for a plane.
pub fn candidate_modifications(body: &Body) -> Vec<Modification> {
    let current = initial_velocity_state(&body.state);
    let mut out: Vec<Modification> = [VelocityState::Static, VelocityState::Slow, VelocityState::Fast]
        .into_iter()
        .filter(|&s| s != current)
        .map(Modification::Velocity)
        .collect();
    if !body.forces.accelerating() {
        out.push(Modification::Accelerating(true));
    }
    if body.spec.shape.is_plane() && !body.forces.floating() {
        out.push(Modification::Floating(true));
    }
    out
}

/// Applies a modification to the initial state of object `id`.
pub fn apply_modification(world: &mut WorldState, id: ObjectId, modification: Modification) -> Result<(), GenerationError> {
    let body = world.body_mut(id).ok_or(GenerationError::UnknownObject(id))?;
    match modification {
        Modification::Velocity(state) => {
            let heading = body.state.rotation.heading();
            body.state.velocity = heading * state.speed();
        }
        Modification::Accelerating(on) => {
            body.forces = ForceProfile::new(on, body.forces.floating());
        }
        Modification::Floating(on) => {
            if on && !body.spec.shape.is_plane() {
                return Err(GenerationError::NotApplicable(modification, id));
            }
            body.forces = ForceProfile::new(body.forces.accelerating(), on);
        }
    }
    Ok(())
}

/// Re-simulates a scene from frame 0 with one modification and returns the
/// resulting collision events.
pub fn replay_modification(
    annotation: &SceneAnnotation,
    id: ObjectId,
    modification: Modification,
) -> Result<Vec<crate::model::CollisionEvent>, GenerationError> {
    let mut world = crate::physics::world_at(annotation, 0);
    apply_modification(&mut world, id, modification)?;
    let sim = simulate(&world, &annotation.config)
        .map_err(|source| GenerationError::Simulation { seed: annotation.config.seed, source })?;
    Ok(sim.collisions)
}

/// Picks one object and one applicable property change uniformly, then
/// re-simulates.
pub fn make_counterfactual(annotation: &SceneAnnotation, seed: u64) -> Result<CounterfactualRecord, GenerationError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let world = crate::physics::world_at(annotation, 0);
    let body = world.bodies.choose(&mut rng).ok_or(GenerationError::Config("scene has no objects".into()))?;
    let options = candidate_modifications(body);
    // Group by property first so each property is equally likely.
    let mut properties: Vec<u8> = options.iter().map(property_key).collect();
    properties.dedup();
    let property = *properties.choose(&mut rng).expect("velocity always has alternatives");
    let values: Vec<Modification> = options.into_iter().filter(|m| property_key(m) == property).collect();
    let modification = *values.choose(&mut rng).expect("non-empty");
    let events = replay_modification(annotation, body.id(), modification)?;
    Ok(CounterfactualRecord { object_id: body.id(), modification, events })
}

fn property_key(m: &Modification) -> u8 {
    match m {
        Modification::Velocity(_) => 0,
        Modification::Accelerating(_) => 1,
        Modification::Floating(_) => 2,
    }
}
