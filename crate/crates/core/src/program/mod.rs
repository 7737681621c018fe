//! Stack-machine programs over scene representations.
//!
//! A program is a list of ops. Each op pops its inputs from the stack and
//! pushes one output. Inputs are popped top first: an op with inputs
//! `[A, B]` expects `B` on top. Frame-dependent ops with a `stack` frame take
//! a FrameID pushed before their other inputs.

mod op;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use op::{Attribute, FrameRef, Op, OpError, RawStep};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueType {
    Object,
    ObjectSet,
    Event,
    EventSet,
    Frame,
    Bool,
    Shape,
    Color,
    VelocityState,
    Direction,
}

impl ValueType {
    /// Whether a final value of this type serializes to an answer token.
    pub fn is_answer(self) -> bool {
        matches!(self, ValueType::Bool | ValueType::Shape | ValueType::Color | ValueType::Direction)
    }
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Program(pub Vec<Op>);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TypeError {
    #[error("step {step} ({op}): expected {expected}, found {found:?}")]
    Mismatch { step: usize, op: String, expected: String, found: Option<ValueType> },
    #[error("program leaves {0} values on the stack, expected 1")]
    StackSize(usize),
    #[error("program result {0} is not an answer type")]
    NotAnswer(ValueType),
}

impl Program {
    pub fn new(ops: Vec<Op>) -> Self {
        Program(ops)
    }

    pub fn ops(&self) -> &[Op] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn reads_future(&self) -> bool {
        self.0.iter().any(|op| matches!(op, Op::FutureEvents))
    }

    pub fn is_counterfactual(&self) -> bool {
        self.0.iter().any(Op::is_counterfactual)
    }

    /// Checks every step against the op signatures and returns the type of
    /// the single value left on the stack.
    pub fn type_check(&self) -> Result<ValueType, TypeError> {
        let mut stack: Vec<ValueType> = Vec::new();
        for (step, op) in self.0.iter().enumerate() {
            let out = apply_types(step, op, &mut stack)?;
            stack.push(out);
        }
        match stack.as_slice() {
            [t] => Ok(*t),
            s => Err(TypeError::StackSize(s.len())),
        }
    }

    /// `type_check` plus the requirement that the result is an answer token.
    pub fn check_answerable(&self) -> Result<ValueType, TypeError> {
        let t = self.type_check()?;
        if t.is_answer() {
            Ok(t)
        } else {
            Err(TypeError::NotAnswer(t))
        }
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|o| o.to_string()).collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

fn pop(step: usize, op: &Op, stack: &mut Vec<ValueType>, accepted: &[ValueType]) -> Result<ValueType, TypeError> {
    let found = stack.pop();
    match found {
        Some(t) if accepted.contains(&t) => Ok(t),
        _ => Err(TypeError::Mismatch {
            step,
            op: op.to_string(),
            expected: accepted.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(" | "),
            found,
        }),
    }
}

/// Pops the inputs of `op` and returns its output type.
fn apply_types(step: usize, op: &Op, stack: &mut Vec<ValueType>) -> Result<ValueType, TypeError> {
    use ValueType as T;
    let mut need = |accepted: &[ValueType]| pop(step, op, stack, accepted);
    let out = match op {
        Op::Objects => T::ObjectSet,
        Op::Events | Op::FutureEvents => T::EventSet,
        Op::FilterColor(_) | Op::FilterShape(_) => {
            need(&[T::ObjectSet])?;
            T::ObjectSet
        }
        Op::FilterStatic(_) | Op::FilterMovingVelocity(..) | Op::FilterAccelerating(_) | Op::FilterFloating(_) => {
            need(&[T::ObjectSet])?;
            T::ObjectSet
        }
        Op::FilterCollision => {
            need(&[T::Object])?;
            need(&[T::EventSet])?;
            T::EventSet
        }
        Op::GetAllColPartners => {
            need(&[T::Object])?;
            need(&[T::EventSet])?;
            T::ObjectSet
        }
        Op::QueryAttributes(Attribute::Color) => {
            need(&[T::Object])?;
            T::Color
        }
        Op::QueryAttributes(Attribute::Shape) => {
            need(&[T::Object])?;
            T::Shape
        }
        Op::IsStatic(_) | Op::IsAccelerating(_) | Op::IsFloating(_) => {
            need(&[T::Object])?;
            T::Bool
        }
        Op::QueryMovingVelocity(_) => {
            need(&[T::Object])?;
            T::VelocityState
        }
        Op::QueryMovingDirection(_) => {
            need(&[T::Object])?;
            T::Direction
        }
        Op::GetFrame => {
            need(&[T::Event])?;
            T::Frame
        }
        Op::ComeInFrame => {
            need(&[T::Object])?;
            T::Frame
        }
        Op::FasterVelocity(_) | Op::SlowerVelocity(_) => {
            need(&[T::Object])?;
            need(&[T::Object])?;
            T::Bool
        }
        Op::CounterfactualStatic
        | Op::CounterfactualMovingSlow
        | Op::CounterfactualMovingFast
        | Op::CounterfactualAccelerating
        | Op::CounterfactualFloating => {
            need(&[T::Object])?;
            T::EventSet
        }
        Op::Unique => match need(&[T::ObjectSet, T::EventSet])? {
            T::ObjectSet => T::Object,
            _ => T::Event,
        },
        Op::Exist => {
            need(&[T::ObjectSet, T::EventSet])?;
            T::Bool
        }
        Op::EqualVelocity(_) => {
            need(&[T::VelocityState])?;
            T::Bool
        }
    };
    if op.frame_ref() == Some(FrameRef::Stack) {
        pop(step, op, stack, &[T::Frame])?;
    }
    Ok(out)
}
