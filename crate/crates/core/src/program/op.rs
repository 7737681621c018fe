use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::{Color, Shape, VelocityState};

/// Where a frame-dependent op takes its frame from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FrameRef {
    /// First observed frame.
    Begin,
    /// Last observed frame.
    End,
    /// A FrameID value popped from the stack after the op's other inputs.
    Stack,
}

impl FrameRef {
    pub fn name(self) -> &'static str {
        match self {
            FrameRef::Begin => "begin",
            FrameRef::End => "end",
            FrameRef::Stack => "stack",
        }
    }
}

impl FromStr for FrameRef {
    type Err = OpError;
    fn from_str(s: &str) -> Result<Self, OpError> {
        match s {
            "begin" => Ok(FrameRef::Begin),
            "end" => Ok(FrameRef::End),
            "stack" => Ok(FrameRef::Stack),
            _ => Err(OpError::BadArg { op: String::new(), arg: s.to_string() }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Attribute {
    Color,
    Shape,
}

/// One operation of the program language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawStep", into = "RawStep")]
pub enum Op {
    Objects,
    Events,
    FutureEvents,
    FilterColor(Color),
    FilterShape(Shape),
    FilterStatic(FrameRef),
    FilterMovingVelocity(FrameRef, VelocityState),
    FilterAccelerating(FrameRef),
    FilterFloating(FrameRef),
    FilterCollision,
    GetAllColPartners,
    QueryAttributes(Attribute),
    IsStatic(FrameRef),
    QueryMovingVelocity(FrameRef),
    QueryMovingDirection(FrameRef),
    IsAccelerating(FrameRef),
    IsFloating(FrameRef),
    GetFrame,
    ComeInFrame,
    FasterVelocity(FrameRef),
    SlowerVelocity(FrameRef),
    CounterfactualStatic,
    CounterfactualMovingSlow,
    CounterfactualMovingFast,
    CounterfactualAccelerating,
    CounterfactualFloating,
    Unique,
    Exist,
    EqualVelocity(VelocityState),
}

/// Wire form of a step: `{"op": name, "args": [..]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawStep {
    pub op: String,
    #[serde(default)]
    pub args: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OpError {
    #[error("unknown op `{0}`")]
    UnknownOp(String),
    #[error("op `{op}` expects {expected} argument(s), got {got}")]
    Arity { op: String, expected: usize, got: usize },
    #[error("op `{op}`: bad argument `{arg}`")]
    BadArg { op: String, arg: String },
}

impl Op {
    pub fn name(&self) -> &'static str {
        use Op::*;
        match self {
            Objects => "objects",
            Events => "events",
            FutureEvents => "future_events",
            FilterColor(_) => "filter_color",
            FilterShape(_) => "filter_shape",
            FilterStatic(_) => "filter_static",
            FilterMovingVelocity(..) => "filter_moving_velocity",
            FilterAccelerating(_) => "filter_accelerating",
            FilterFloating(_) => "filter_floating",
            FilterCollision => "filter_collision",
            GetAllColPartners => "get_all_col_partners",
            QueryAttributes(_) => "query_attributes",
            IsStatic(_) => "is_static",
            QueryMovingVelocity(_) => "query_moving_velocity",
            QueryMovingDirection(_) => "query_moving_direction",
            IsAccelerating(_) => "is_accelerating",
            IsFloating(_) => "is_floating",
            GetFrame => "get_frame",
            ComeInFrame => "come_in_frame",
            FasterVelocity(_) => "faster_velocity",
            SlowerVelocity(_) => "slower_velocity",
            CounterfactualStatic => "counterfactual_static",
            CounterfactualMovingSlow => "counterfactual_moving_slow",
            CounterfactualMovingFast => "counterfactual_moving_fast",
            CounterfactualAccelerating => "counterfactual_accelerating",
            CounterfactualFloating => "counterfactual_floating",
            Unique => "unique",
            Exist => "exist",
            EqualVelocity(_) => "equal_velocity",
        }
    }

    pub fn args(&self) -> Vec<String> {
        use Op::*;
        match self {
            FilterColor(c) => vec![c.name().into()],
            FilterShape(s) => vec![s.name().into()],
            FilterStatic(f) | FilterAccelerating(f) | FilterFloating(f) | IsStatic(f) | QueryMovingVelocity(f)
            | QueryMovingDirection(f) | IsAccelerating(f) | IsFloating(f) | FasterVelocity(f) | SlowerVelocity(f) => {
                vec![f.name().into()]
            }
            FilterMovingVelocity(f, v) => vec![f.name().into(), v.name().into()],
            QueryAttributes(Attribute::Color) => vec!["color".into()],
            QueryAttributes(Attribute::Shape) => vec!["shape".into()],
            EqualVelocity(v) => vec![v.name().into()],
            _ => vec![],
        }
    }

    /// Frame source of a frame-dependent op.
    pub fn frame_ref(&self) -> Option<FrameRef> {
        use Op::*;
        match *self {
            FilterStatic(f) | FilterAccelerating(f) | FilterFloating(f) | IsStatic(f) | QueryMovingVelocity(f)
            | QueryMovingDirection(f) | IsAccelerating(f) | IsFloating(f) | FasterVelocity(f) | SlowerVelocity(f)
            | FilterMovingVelocity(f, _) => Some(f),
            _ => None,
        }
    }

    pub fn is_counterfactual(&self) -> bool {
        use Op::*;
        matches!(
            self,
            CounterfactualStatic
                | CounterfactualMovingSlow
                | CounterfactualMovingFast
                | CounterfactualAccelerating
                | CounterfactualFloating
        )
    }

    pub fn parse(name: &str, args: &[String]) -> Result<Op, OpError> {
        use Op::*;
        let arity = |n: usize| {
            if args.len() == n {
                Ok(())
            } else {
                Err(OpError::Arity { op: name.to_string(), expected: n, got: args.len() })
            }
        };
        let bad = |arg: &str| OpError::BadArg { op: name.to_string(), arg: arg.to_string() };
        let frame = |i: usize| args[i].parse::<FrameRef>().map_err(|_| bad(&args[i]));
        let nullary = |op: Op| arity(0).map(|_| op);
        let framed = |ctor: fn(FrameRef) -> Op| {
            arity(1)?;
            Ok(ctor(frame(0)?))
        };
        match name {
            "objects" => nullary(Objects),
            "events" => nullary(Events),
            "future_events" => nullary(FutureEvents),
            "filter_color" => {
                arity(1)?;
                Ok(FilterColor(args[0].parse().map_err(|_| bad(&args[0]))?))
            }
            "filter_shape" => {
                arity(1)?;
                Ok(FilterShape(args[0].parse().map_err(|_| bad(&args[0]))?))
            }
            "filter_static" => framed(FilterStatic),
            "filter_moving_velocity" => {
                arity(2)?;
                Ok(FilterMovingVelocity(frame(0)?, args[1].parse().map_err(|_| bad(&args[1]))?))
            }
            "filter_accelerating" => framed(FilterAccelerating),
            "filter_floating" => framed(FilterFloating),
            "filter_collision" => nullary(FilterCollision),
            "get_all_col_partners" => nullary(GetAllColPartners),
            "query_attributes" => {
                arity(1)?;
                match args[0].as_str() {
                    "color" => Ok(QueryAttributes(Attribute::Color)),
                    "shape" => Ok(QueryAttributes(Attribute::Shape)),
                    other => Err(bad(other)),
                }
            }
            "is_static" => framed(IsStatic),
            "query_moving_velocity" => framed(QueryMovingVelocity),
            "query_moving_direction" => framed(QueryMovingDirection),
            "is_accelerating" => framed(IsAccelerating),
            "is_floating" => framed(IsFloating),
            "get_frame" => nullary(GetFrame),
            "come_in_frame" => nullary(ComeInFrame),
            "faster_velocity" => framed(FasterVelocity),
            "slower_velocity" => framed(SlowerVelocity),
            "counterfactual_static" => nullary(CounterfactualStatic),
            "counterfactual_moving_slow" => nullary(CounterfactualMovingSlow),
            "counterfactual_moving_fast" => nullary(CounterfactualMovingFast),
            "counterfactual_accelerating" => nullary(CounterfactualAccelerating),
            "counterfactual_floating" => nullary(CounterfactualFloating),
            "unique" => nullary(Unique),
            "exist" => nullary(Exist),
            "equal_velocity" => {
                arity(1)?;
                Ok(EqualVelocity(args[0].parse().map_err(|_| bad(&args[0]))?))
            }
            other => Err(OpError::UnknownOp(other.to_string())),
        }
    }
}

impl TryFrom<RawStep> for Op {
    type Error = OpError;
    fn try_from(raw: RawStep) -> Result<Self, OpError> {
        Op::parse(&raw.op, &raw.args)
    }
}

impl From<Op> for RawStep {
    fn from(op: Op) -> Self {
        RawStep { op: op.name().to_string(), args: op.args() }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let args = self.args();
        if args.is_empty() {
            write!(f, "{}", self.name())
        } else {
            write!(f, "{}({})", self.name(), args.join(", "))
        }
    }
}
