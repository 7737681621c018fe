//! Closed attribute vocabularies: shapes, colors, velocity states, directions
//! and the answer token set.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown {kind} '{value}'")]
pub struct UnknownName {
    pub kind: &'static str,
    pub value: String,
}

macro_rules! named_enum {
    (
        $(#[$meta:meta])*
        $name:ident, $kind:literal { $($variant:ident => $text:literal),+ $(,)? }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(try_from = "String", into = "&'static str")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn name(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $name {
            type Err = UnknownName;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    _ => Err(UnknownName { kind: $kind, value: s.to_string() }),
                }
            }
        }

        impl TryFrom<String> for $name {
            type Error = UnknownName;
            fn try_from(s: String) -> Result<Self, Self::Error> {
                s.parse()
            }
        }

        impl From<$name> for &'static str {
            fn from(v: $name) -> &'static str {
                v.name()
            }
        }
    };
}

named_enum! {
    /// Vehicle class.
    ShapeClass, "shape class" {
        Car => "car",
        Plane => "plane",
        Bicycle => "bicycle",
        Motorbike => "motorbike",
        Bus => "bus",
    }
}

named_enum! {
    /// Vehicle subtype; every subtype belongs to exactly one [`ShapeClass`].
    Shape, "shape" {
        Sedan => "sedan",
        Suv => "suv",
        Minivan => "minivan",
        Wagon => "wagon",
        Truck => "truck",
        Airliner => "airliner",
        Jet => "jet",
        FighterAircraft => "fighter aircraft",
        Biplane => "biplane",
        RoadBike => "road bike",
        MountainBike => "mountain bike",
        UtilityBike => "utility bike",
        TandemBike => "tandem bike",
        ChopperMotorcycle => "chopper motorcycle",
        Dirtbike => "dirtbike",
        Scooter => "scooter",
        Cruiser => "cruiser",
        SchoolBus => "school bus",
        ArticulatedBus => "articulated bus",
        DoubleBus => "double bus",
        CityBus => "city bus",
    }
}

impl Shape {
    pub fn class(self) -> ShapeClass {
        use Shape::*;
        match self {
            Sedan | Suv | Minivan | Wagon | Truck => ShapeClass::Car,
            Airliner | Jet | FighterAircraft | Biplane => ShapeClass::Plane,
            RoadBike | MountainBike | UtilityBike | TandemBike => ShapeClass::Bicycle,
            ChopperMotorcycle | Dirtbike | Scooter | Cruiser => ShapeClass::Motorbike,
            SchoolBus | ArticulatedBus | DoubleBus | CityBus => ShapeClass::Bus,
        }
    }

    pub fn is_plane(self) -> bool {
        self.class() == ShapeClass::Plane
    }

    /// Full box dimensions (length, width, height) in meters of the collision
    /// proxy for this subtype.
    pub fn proxy_size(self) -> (f64, f64, f64) {
        use Shape::*;
        match self {
            Sedan => (2.0, 0.9, 0.7),
            Suv => (2.0, 1.0, 0.9),
            Minivan => (2.1, 1.0, 1.0),
            Wagon => (2.1, 0.9, 0.75),
            Truck => (2.4, 1.0, 1.1),
            Airliner => (2.6, 2.4, 0.8),
            Jet => (2.0, 1.4, 0.6),
            FighterAircraft => (1.8, 1.2, 0.5),
            Biplane => (1.6, 1.8, 0.7),
            RoadBike => (1.3, 0.35, 0.8),
            MountainBike => (1.3, 0.4, 0.85),
            UtilityBike => (1.3, 0.4, 0.85),
            TandemBike => (1.9, 0.4, 0.85),
            ChopperMotorcycle => (1.4, 0.5, 0.8),
            Dirtbike => (1.3, 0.45, 0.85),
            Scooter => (1.1, 0.45, 0.75),
            Cruiser => (1.5, 0.55, 0.8),
            SchoolBus => (3.0, 1.1, 1.3),
            ArticulatedBus => (3.6, 1.1, 1.2),
            DoubleBus => (2.8, 1.1, 1.8),
            CityBus => (3.0, 1.1, 1.2),
        }
    }
}

named_enum! {
    Color, "color" {
        Gray => "gray",
        Red => "red",
        Brown => "brown",
        Yellow => "yellow",
        Green => "green",
        Cyan => "cyan",
        Blue => "blue",
        Purple => "purple",
    }
}

named_enum! {
    VelocityState, "velocity state" {
        Static => "static",
        Slow => "slow",
        Fast => "fast",
    }
}

impl VelocityState {
    /// Canonical initial speed for the state, m/s.
    pub fn speed(self) -> f64 {
        match self {
            VelocityState::Static => 0.0,
            VelocityState::Slow => 3.0,
            VelocityState::Fast => 6.0,
        }
    }
}

named_enum! {
    /// Motion direction relative to the camera.
    Direction, "direction" {
        Left => "left",
        Right => "right",
        Up => "up",
        Down => "down",
        Front => "front",
        Back => "back",
    }
}

/// Every token an emitted question may have as its answer.
pub const ANSWER_VOCABULARY: [&str; 34] = [
    "airliner",
    "articulated bus",
    "back",
    "blue",
    "brown",
    "chopper motorcycle",
    "cruiser",
    "cyan",
    "dirtbike",
    "double bus",
    "down",
    "false",
    "fighter aircraft",
    "front",
    "gray",
    "green",
    "jet",
    "left",
    "minivan",
    "mountain bike",
    "purple",
    "red",
    "right",
    "school bus",
    "scooter",
    "sedan",
    "suv",
    "tandem bike",
    "truck",
    "true",
    "up",
    "utility bike",
    "wagon",
    "yellow",
];

pub fn in_answer_vocabulary(token: &str) -> bool {
    ANSWER_VOCABULARY.binary_search(&token).is_ok()
}
