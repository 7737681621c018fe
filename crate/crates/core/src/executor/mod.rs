//! Program interpreter over ground-truth or estimated scene states.

mod value;

use std::cell::{Cell, OnceCell, RefCell};
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use value::Value;

use crate::estimator::dynamics::{moving_average, SMOOTHING_WINDOW};
use crate::generator::apply_modification;
use crate::model::{
    direction_of, velocity_state_of, CollisionEvent, DynamicState, FrameId, Modification, ObjectId, SceneAnnotation,
    Vec3, VelocityState, EPSILON_MOTION,
};
use crate::physics::{simulate, simulate_from, world_at, ContactTracker};
use crate::program::{Attribute, FrameRef, Op, Program, TypeError};

/// Decision thresholds applied to smoothed dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    /// Speed at or below which an object is static, m/s.
    pub epsilon_motion: f64,
    /// Forward acceleration above which an object is accelerating, m/s².
    pub accel: f64,
    pub float_height: f64,
    pub float_max_vz: f64,
    pub float_max_az: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { epsilon_motion: EPSILON_MOTION, accel: 0.5, float_height: 0.5, float_max_vz: 2.0, float_max_az: 5.0 }
    }
}

/// How the context obtains per-frame velocity and acceleration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DynamicsSource {
    /// Smooth the stored fields over the observed window (ground truth).
    SmoothStored,
    /// Use the stored fields as they are (estimates are already smoothed).
    Stored,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExecError {
    #[error("type error: {0}")]
    Type(#[from] TypeError),
    #[error("step {step} ({op}): unique expects one element, got {size}")]
    UniqueViolation { step: usize, op: String, size: usize },
    #[error("step {step} ({op}): unanswerable: {reason}")]
    Unanswerable { step: usize, op: String, reason: String },
    #[error("frame {frame} outside observed horizon {horizon}")]
    FrameOutOfRange { frame: FrameId, horizon: usize },
    #[error("object {0} not in scene")]
    UnknownObject(ObjectId),
    #[error("re-simulation is not available in this context")]
    NoResimulator,
    #[error("re-simulation failed: {0}")]
    Resimulation(String),
    #[error("invalid context: {0}")]
    Context(String),
}

impl ExecError {
    /// Stable machine-readable class name.
    pub fn kind(&self) -> &'static str {
        match self {
            ExecError::Type(_) => "type_error",
            ExecError::UniqueViolation { .. } => "unique_violation",
            ExecError::Unanswerable { .. } => "unanswerable",
            ExecError::FrameOutOfRange { .. } => "frame_out_of_range",
            ExecError::UnknownObject(_) => "unknown_object",
            ExecError::NoResimulator | ExecError::Resimulation(_) => "resimulation",
            ExecError::Context(_) => "context",
        }
    }
}

/// Read-only view of one scene for program execution.
#[derive(Debug)]
pub struct ExecContext<'a> {
    scene: &'a SceneAnnotation,
    horizon: usize,
    velocity: Vec<Vec<Vec3>>,
    acceleration: Vec<Vec<Vec3>>,
    pub thresholds: Thresholds,
    resimulation: bool,
    max_frame_read: Cell<Option<FrameId>>,
    future: OnceCell<Result<Vec<CollisionEvent>, ExecError>>,
    counterfactuals: RefCell<HashMap<(ObjectId, Modification), Vec<CollisionEvent>>>,
}

impl<'a> ExecContext<'a> {
    pub fn new(scene: &'a SceneAnnotation, horizon: usize, source: DynamicsSource) -> Result<Self, ExecError> {
        if scene.objects.len() != scene.trajectories.len() {
            return Err(ExecError::Context("object and trajectory counts differ".into()));
        }
        let available = scene.trajectories.iter().map(|t| t.len()).min().unwrap_or(0);
        if horizon == 0 || horizon > available {
            return Err(ExecError::Context(format!("horizon {horizon} exceeds {available} available frames")));
        }
        let series = |f: fn(&DynamicState) -> Vec3| -> Vec<Vec<Vec3>> {
            scene
                .trajectories
                .iter()
                .map(|t| {
                    let raw: Vec<Vec3> = t.states[..horizon].iter().map(f).collect();
                    match source {
                        DynamicsSource::SmoothStored => moving_average(&raw, SMOOTHING_WINDOW),
                        DynamicsSource::Stored => raw,
                    }
                })
                .collect()
        };
        Ok(Self {
            scene,
            horizon,
            velocity: series(|s| s.velocity),
            acceleration: series(|s| s.acceleration),
            thresholds: Thresholds::default(),
            resimulation: true,
            max_frame_read: Cell::new(None),
            future: OnceCell::new(),
            counterfactuals: RefCell::new(HashMap::new()),
        })
    }

    pub fn ground_truth(scene: &'a SceneAnnotation, horizon: usize) -> Result<Self, ExecError> {
        Self::new(scene, horizon, DynamicsSource::SmoothStored)
    }

    pub fn estimated(scene: &'a SceneAnnotation, horizon: usize) -> Result<Self, ExecError> {
        Self::new(scene, horizon, DynamicsSource::Stored)
    }

    pub fn with_thresholds(mut self, thresholds: Thresholds) -> Self {
        self.thresholds = thresholds;
        self
    }

    pub fn without_resimulation(mut self) -> Self {
        self.resimulation = false;
        self
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn scene(&self) -> &SceneAnnotation {
        self.scene
    }

    /// Highest frame index any operation has read so far.
    pub fn max_frame_read(&self) -> Option<FrameId> {
        self.max_frame_read.get()
    }

    fn touch(&self, frame: FrameId) -> Result<(), ExecError> {
        if frame >= self.horizon {
            return Err(ExecError::FrameOutOfRange { frame, horizon: self.horizon });
        }
        let m = self.max_frame_read.get().map_or(frame, |m| m.max(frame));
        self.max_frame_read.set(Some(m));
        Ok(())
    }

    fn index(&self, id: ObjectId) -> Result<usize, ExecError> {
        self.scene.object_index(id).ok_or(ExecError::UnknownObject(id))
    }

    fn state(&self, id: ObjectId, frame: FrameId) -> Result<(DynamicState, Vec3, Vec3), ExecError> {
        self.touch(frame)?;
        let i = self.index(id)?;
        Ok((self.scene.trajectories[i].states[frame], self.velocity[i][frame], self.acceleration[i][frame]))
    }

    pub fn speed(&self, id: ObjectId, frame: FrameId) -> Result<f64, ExecError> {
        Ok(self.state(id, frame)?.1.norm())
    }

    pub fn velocity_state(&self, id: ObjectId, frame: FrameId) -> Result<VelocityState, ExecError> {
        let speed = self.speed(id, frame)?;
        if speed <= self.thresholds.epsilon_motion {
            return Ok(VelocityState::Static);
        }
        velocity_state_of(speed).map_err(|e| ExecError::Context(e.to_string()))
    }

    pub fn is_static(&self, id: ObjectId, frame: FrameId) -> Result<bool, ExecError> {
        Ok(self.speed(id, frame)? <= self.thresholds.epsilon_motion)
    }

    pub fn is_accelerating(&self, id: ObjectId, frame: FrameId) -> Result<bool, ExecError> {
        let (s, _, a) = self.state(id, frame)?;
        Ok(a.dot(s.rotation.heading()) > self.thresholds.accel)
    }

    pub fn is_floating(&self, id: ObjectId, frame: FrameId) -> Result<bool, ExecError> {
        let (s, v, a) = self.state(id, frame)?;
        let t = &self.thresholds;
        Ok(s.position.z > t.float_height && v.z.abs() < t.float_max_vz && a.z.abs() < t.float_max_az)
    }

    /// Collision events inside the observed window.
    pub fn events(&self) -> Vec<CollisionEvent> {
        if let Some(last) = self.horizon.checked_sub(1) {
            let _ = self.touch(last);
        }
        self.scene.collisions.iter().filter(|e| e.frame < self.horizon).copied().collect()
    }

    /// Collisions after the observed window, from a re-simulation that starts
    /// at the last observed frame.
    pub fn future_events(&self) -> Result<Vec<CollisionEvent>, ExecError> {
        if !self.resimulation {
            return Err(ExecError::NoResimulator);
        }
        self.future
            .get_or_init(|| {
                let last = self.horizon - 1;
                self.touch(last)?;
                let world = world_at(self.scene, last);
                let config = &self.scene.config;
                let tracker = ContactTracker::from_log(config.debounce_frames, &self.scene.contact_log, last);
                let sim = simulate_from(&world, tracker, config).map_err(|e| ExecError::Resimulation(e.to_string()))?;
                Ok(sim.collisions.into_iter().filter(|e| e.frame >= self.horizon).collect())
            })
            .clone()
    }

    /// Collisions of a full re-simulation from frame 0 with one modification.
    pub fn counterfactual_events(&self, id: ObjectId, modification: Modification) -> Result<Vec<CollisionEvent>, ExecError> {
        if !self.resimulation {
            return Err(ExecError::NoResimulator);
        }
        self.touch(0)?;
        self.index(id)?;
        if let Some(events) = self.counterfactuals.borrow().get(&(id, modification)) {
            return Ok(events.clone());
        }
        let mut world = world_at(self.scene, 0);
        apply_modification(&mut world, id, modification).map_err(|e| ExecError::Resimulation(e.to_string()))?;
        let sim = simulate(&world, &self.scene.config).map_err(|e| ExecError::Resimulation(e.to_string()))?;
        self.counterfactuals.borrow_mut().insert((id, modification), sim.collisions.clone());
        Ok(sim.collisions)
    }

    fn resolve_frame(&self, frame: FrameRef, stack: &mut Vec<Value>, step: usize, op: &Op) -> Result<FrameId, ExecError> {
        let f = match frame {
            FrameRef::Begin => 0,
            FrameRef::End => self.horizon - 1,
            FrameRef::Stack => match stack.pop() {
                Some(Value::Frame(f)) => f,
                other => return Err(runtime_type(step, op, "Frame", other)),
            },
        };
        self.touch(f)?;
        Ok(f)
    }
}

fn runtime_type(step: usize, op: &Op, expected: &str, found: Option<Value>) -> ExecError {
    ExecError::Type(TypeError::Mismatch {
        step,
        op: op.to_string(),
        expected: expected.to_string(),
        found: found.map(|v| v.value_type()),
    })
}

/// Runs a program and returns the final stack value.
pub fn evaluate(program: &Program, ctx: &ExecContext<'_>) -> Result<Value, ExecError> {
    program.type_check()?;
    let mut stack: Vec<Value> = Vec::new();
    for (step, op) in program.ops().iter().enumerate() {
        let v = apply(step, op, &mut stack, ctx)?;
        stack.push(v);
    }
    stack.pop().ok_or(ExecError::Type(TypeError::StackSize(0)))
}

/// Runs a program and returns its answer token.
pub fn execute(program: &Program, ctx: &ExecContext<'_>) -> Result<String, ExecError> {
    let value = evaluate(program, ctx)?;
    let t = value.value_type();
    value.answer_token().ok_or(ExecError::Type(TypeError::NotAnswer(t)))
}

fn apply(step: usize, op: &Op, stack: &mut Vec<Value>, ctx: &ExecContext<'_>) -> Result<Value, ExecError> {
    macro_rules! pop {
        ($pat:pat => $out:expr, $name:literal) => {
            match stack.pop() {
                Some($pat) => $out,
                other => return Err(runtime_type(step, op, $name, other)),
            }
        };
    }
    let unanswerable = |reason: String| ExecError::Unanswerable { step, op: op.to_string(), reason };
    let scene = ctx.scene();
    let spec_of = |id: ObjectId| scene.object(id).map(|o| &o.spec).ok_or(ExecError::UnknownObject(id));

    let filter = |stack: &mut Vec<Value>, keep: &dyn Fn(ObjectId, FrameId) -> Result<bool, ExecError>| {
        let set = match stack.pop() {
            Some(Value::ObjectSet(s)) => s,
            other => return Err(runtime_type(step, op, "ObjectSet", other)),
        };
        let frame = match op.frame_ref() {
            Some(f) => ctx.resolve_frame(f, stack, step, op)?,
            None => 0,
        };
        let mut out = Vec::new();
        for id in set {
            if keep(id, frame)? {
                out.push(id);
            }
        }
        Ok(Value::object_set(out))
    };

    Ok(match *op {
        Op::Objects => Value::object_set(scene.objects.iter().map(|o| o.spec.id).collect()),
        Op::Events => Value::event_set(ctx.events()),
        Op::FutureEvents => Value::event_set(ctx.future_events()?),
        Op::FilterColor(c) => {
            let set = pop!(Value::ObjectSet(s) => s, "ObjectSet");
            let mut out = Vec::new();
            for id in set {
                if spec_of(id)?.color == c {
                    out.push(id);
                }
            }
            Value::object_set(out)
        }
        Op::FilterShape(sh) => {
            let set = pop!(Value::ObjectSet(s) => s, "ObjectSet");
            let mut out = Vec::new();
            for id in set {
                if spec_of(id)?.shape == sh {
                    out.push(id);
                }
            }
            Value::object_set(out)
        }
        Op::FilterStatic(_) => filter(stack, &|id, f| ctx.is_static(id, f))?,
        Op::FilterMovingVelocity(_, state) => filter(stack, &|id, f| Ok(ctx.velocity_state(id, f)? == state))?,
        Op::FilterAccelerating(_) => filter(stack, &|id, f| ctx.is_accelerating(id, f))?,
        Op::FilterFloating(_) => filter(stack, &|id, f| ctx.is_floating(id, f))?,
        Op::FilterCollision => {
            let id = pop!(Value::Object(o) => o, "Object");
            let events = pop!(Value::EventSet(e) => e, "EventSet");
            Value::event_set(events.into_iter().filter(|e| e.pair.contains(id)).collect())
        }
        Op::GetAllColPartners => {
            let id = pop!(Value::Object(o) => o, "Object");
            let events = pop!(Value::EventSet(e) => e, "EventSet");
            Value::object_set(events.iter().filter_map(|e| e.pair.partner(id)).collect())
        }
        Op::QueryAttributes(attr) => {
            let id = pop!(Value::Object(o) => o, "Object");
            let spec = spec_of(id)?;
            match attr {
                Attribute::Color => Value::Color(spec.color),
                Attribute::Shape => Value::Shape(spec.shape),
            }
        }
        Op::IsStatic(f) | Op::QueryMovingVelocity(f) | Op::QueryMovingDirection(f) | Op::IsAccelerating(f)
        | Op::IsFloating(f) => {
            let id = pop!(Value::Object(o) => o, "Object");
            let frame = ctx.resolve_frame(f, stack, step, op)?;
            match op {
                Op::IsStatic(_) => Value::Bool(ctx.is_static(id, frame)?),
                Op::QueryMovingVelocity(_) => Value::VelocityState(ctx.velocity_state(id, frame)?),
                Op::IsAccelerating(_) => Value::Bool(ctx.is_accelerating(id, frame)?),
                Op::IsFloating(_) => Value::Bool(ctx.is_floating(id, frame)?),
                _ => {
                    let (_, v, _) = ctx.state(id, frame)?;
                    let d = direction_of(v, &scene.camera, ctx.thresholds.epsilon_motion)
                        .map_err(|e| unanswerable(e.to_string()))?;
                    Value::Direction(d)
                }
            }
        }
        Op::GetFrame => Value::Frame(pop!(Value::Event(e) => e, "Event").frame),
        Op::ComeInFrame => {
            let id = pop!(Value::Object(o) => o, "Object");
            let half_height = spec_of(id)?.proxy_extents.z;
            let mut found = None;
            for frame in 0..ctx.horizon() {
                let (s, _, _) = ctx.state(id, frame)?;
                if scene.camera.in_view(s.position + Vec3::new(0.0, 0.0, half_height)) {
                    found = Some(frame);
                    break;
                }
            }
            Value::Frame(found.ok_or_else(|| unanswerable(format!("object {id} never enters the view")))?)
        }
        Op::FasterVelocity(f) | Op::SlowerVelocity(f) => {
            let b = pop!(Value::Object(o) => o, "Object");
            let a = pop!(Value::Object(o) => o, "Object");
            let frame = ctx.resolve_frame(f, stack, step, op)?;
            let (sa, sb) = (ctx.speed(a, frame)?, ctx.speed(b, frame)?);
            Value::Bool(if matches!(op, Op::FasterVelocity(_)) { sa > sb } else { sa < sb })
        }
        Op::CounterfactualStatic
        | Op::CounterfactualMovingSlow
        | Op::CounterfactualMovingFast
        | Op::CounterfactualAccelerating
        | Op::CounterfactualFloating => {
            let id = pop!(Value::Object(o) => o, "Object");
            let modification = match op {
                Op::CounterfactualStatic => Modification::Velocity(VelocityState::Static),
                Op::CounterfactualMovingSlow => Modification::Velocity(VelocityState::Slow),
                Op::CounterfactualMovingFast => Modification::Velocity(VelocityState::Fast),
                Op::CounterfactualAccelerating => Modification::Accelerating(true),
                _ => {
                    if !spec_of(id)?.shape.is_plane() {
                        return Err(unanswerable(format!("object {id} is not a plane")));
                    }
                    Modification::Floating(true)
                }
            };
            Value::event_set(ctx.counterfactual_events(id, modification)?)
        }
        Op::Unique => match stack.pop() {
            Some(Value::ObjectSet(s)) if s.len() == 1 => Value::Object(s[0]),
            Some(Value::EventSet(e)) if e.len() == 1 => Value::Event(e[0]),
            Some(Value::ObjectSet(s)) => {
                return Err(ExecError::UniqueViolation { step, op: op.to_string(), size: s.len() })
            }
            Some(Value::EventSet(e)) => {
                return Err(ExecError::UniqueViolation { step, op: op.to_string(), size: e.len() })
            }
            other => return Err(runtime_type(step, op, "ObjectSet | EventSet", other)),
        },
        Op::Exist => match stack.pop() {
            Some(Value::ObjectSet(s)) => Value::Bool(!s.is_empty()),
            Some(Value::EventSet(e)) => Value::Bool(!e.is_empty()),
            other => return Err(runtime_type(step, op, "ObjectSet | EventSet", other)),
        },
        Op::EqualVelocity(state) => Value::Bool(pop!(Value::VelocityState(v) => v, "VelocityState") == state),
    })
}
