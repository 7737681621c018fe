use crate::model::{CollisionEvent, Color, Direction, FrameId, ObjectId, Shape, VelocityState};
use crate::program::ValueType;

/// Runtime value on the executor stack.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Object(ObjectId),
    /// Sorted, duplicate-free.
    ObjectSet(Vec<ObjectId>),
    Event(CollisionEvent),
    /// Sorted by (frame, pair).
    EventSet(Vec<CollisionEvent>),
    Frame(FrameId),
    Bool(bool),
    Shape(Shape),
    Color(Color),
    VelocityState(VelocityState),
    Direction(Direction),
}

impl Value {
    pub fn value_type(&self) -> ValueType {
        match self {
            Value::Object(_) => ValueType::Object,
            Value::ObjectSet(_) => ValueType::ObjectSet,
            Value::Event(_) => ValueType::Event,
            Value::EventSet(_) => ValueType::EventSet,
            Value::Frame(_) => ValueType::Frame,
            Value::Bool(_) => ValueType::Bool,
            Value::Shape(_) => ValueType::Shape,
            Value::Color(_) => ValueType::Color,
            Value::VelocityState(_) => ValueType::VelocityState,
            Value::Direction(_) => ValueType::Direction,
        }
    }

    /// Answer token for terminal values.
    pub fn answer_token(&self) -> Option<String> {
        match self {
            Value::Bool(b) => Some(b.to_string()),
            Value::Shape(s) => Some(s.name().to_string()),
            Value::Color(c) => Some(c.name().to_string()),
            Value::Direction(d) => Some(d.name().to_string()),
            _ => None,
        }
    }

    pub fn object_set(mut ids: Vec<ObjectId>) -> Value {
        ids.sort_unstable();
        ids.dedup();
        Value::ObjectSet(ids)
    }

    pub fn event_set(mut events: Vec<CollisionEvent>) -> Value {
        events.sort_by_key(|e| e.key());
        events.dedup_by_key(|e| e.key());
        Value::EventSet(events)
    }
}
