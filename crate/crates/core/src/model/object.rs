use serde::{Deserialize, Serialize};

use super::{Color, Shape, Vec3, VelocityState};

/// Material density used to derive mass from proxy volume.
pub const DENSITY: f64 = 2.7;

/// Engine acceleration along the heading when the engine is on, m/s².
pub const ENGINE_ACCEL: f64 = 1.0;

/// Upward floating force per unit mass for floating planes, m/s².
pub const FLOATING_ACCEL: f64 = 10.0;

pub type ObjectId = u32;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpecError {
    #[error("object volume must be positive, got {0}")]
    NonPositiveVolume(f64),
    #[error("speed must be finite and non-negative, got {0}")]
    InvalidSpeed(f64),
    #[error("floating force is only allowed on planes ({0} is not a plane)")]
    FloatingNonPlane(Shape),
}

/// Static description of one object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub id: ObjectId,
    pub shape: Shape,
    pub color: Color,
    /// Half-extents of the collision box in the body frame (forward, left, up).
    pub proxy_extents: Vec3,
    pub volume: f64,
    pub mass: f64,
}

impl ObjectSpec {
    /// Builds a spec whose extents come from the subtype proxy table and whose
    /// mass follows the density rule.
    pub fn new(id: ObjectId, shape: Shape, color: Color) -> Self {
        let (l, w, h) = shape.proxy_size();
        let proxy_extents = Vec3::new(l / 2.0, w / 2.0, h / 2.0);
        let volume = l * w * h;
        Self {
            id,
            shape,
            color,
            proxy_extents,
            volume,
            mass: DENSITY * volume,
        }
    }

    pub fn inverse_mass(&self) -> f64 {
        1.0 / self.mass
    }
}

/// Mass from volume: `2.7 * volume`.
pub fn mass_of(spec: &ObjectSpec) -> Result<f64, SpecError> {
    if !(spec.volume > 0.0) {
        return Err(SpecError::NonPositiveVolume(spec.volume));
    }
    Ok(DENSITY * spec.volume)
}

/// Internal forces acting on an object, both expressed per unit mass.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ForceProfile {
    /// Forward drive along the heading, m/s² (0 or 1).
    pub engine_accel: f64,
    /// Upward lift, m/s² (0, or 10 for floating planes).
    pub floating_force_per_mass: f64,
}

impl ForceProfile {
    pub fn new(accelerating: bool, floating: bool) -> Self {
        Self {
            engine_accel: if accelerating { ENGINE_ACCEL } else { 0.0 },
            floating_force_per_mass: if floating { FLOATING_ACCEL } else { 0.0 },
        }
    }

    pub fn accelerating(&self) -> bool {
        self.engine_accel > 0.0
    }

    pub fn floating(&self) -> bool {
        self.floating_force_per_mass > 0.0
    }

    pub fn validate(&self, shape: Shape) -> Result<(), SpecError> {
        if self.floating() && !shape.is_plane() {
            return Err(SpecError::FloatingNonPlane(shape));
        }
        Ok(())
    }
}

/// Discretizes a speed: exactly 0 is static, (0, 3] slow, above 3 fast.
pub fn velocity_state_of(speed: f64) -> Result<VelocityState, SpecError> {
    if !speed.is_finite() || speed < 0.0 {
        return Err(SpecError::InvalidSpeed(speed));
    }
    Ok(if speed == 0.0 {
        VelocityState::Static
    } else if speed <= SLOW_SPEED_MAX {
        VelocityState::Slow
    } else {
        VelocityState::Fast
    })
}

/// Upper bound (inclusive) of the slow band, m/s.
pub const SLOW_SPEED_MAX: f64 = 3.0;

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec_with_volume(volume: f64) -> ObjectSpec {
        ObjectSpec { volume, ..ObjectSpec::new(0, Shape::Sedan, Color::Red) }
    }

    #[test]
    fn mass_examples() {
        assert!((mass_of(&spec_with_volume(1.0)).unwrap() - 2.7).abs() < 1e-12);
        assert!((mass_of(&spec_with_volume(2.0)).unwrap() - 5.4).abs() < 1e-12);
        assert_eq!(
            mass_of(&spec_with_volume(0.0)),
            Err(SpecError::NonPositiveVolume(0.0))
        );
    }

    #[test]
    fn registered_subtypes_have_positive_mass() {
        for &shape in Shape::ALL {
            let spec = ObjectSpec::new(1, shape, Color::Blue);
            let (l, w, h) = shape.proxy_size();
            assert_eq!(spec.volume, l * w * h);
            assert!((spec.volume - 8.0 * spec.proxy_extents.x * spec.proxy_extents.y * spec.proxy_extents.z).abs() < 1e-12);
            assert_eq!(mass_of(&spec).unwrap(), spec.mass);
            assert!(spec.mass > 0.0);
        }
    }

    #[test]
    fn velocity_state_examples() {
        assert_eq!(velocity_state_of(0.0).unwrap(), VelocityState::Static);
        assert_eq!(velocity_state_of(1.5).unwrap(), VelocityState::Slow);
        assert_eq!(velocity_state_of(3.0).unwrap(), VelocityState::Slow);
        assert_eq!(velocity_state_of(6.0).unwrap(), VelocityState::Fast);
        assert!(velocity_state_of(-1.0).is_err());
        assert!(velocity_state_of(f64::NAN).is_err());
    }

    #[test]
    fn floating_only_on_planes() {
        assert!(ForceProfile::new(false, true).validate(Shape::Sedan).is_err());
        assert!(ForceProfile::new(true, true).validate(Shape::Jet).is_ok());
    }

    proptest! {
        #[test]
        fn velocity_state_is_monotone(a in 0.0f64..20.0, b in 0.0f64..20.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(velocity_state_of(lo).unwrap() <= velocity_state_of(hi).unwrap());
        }

        #[test]
        fn mass_is_linear_in_volume(v in 1e-3f64..100.0, k in 0.1f64..10.0) {
            let m1 = mass_of(&spec_with_volume(v)).unwrap();
            let m2 = mass_of(&spec_with_volume(k * v)).unwrap();
            prop_assert!((m2 - k * m1).abs() <= 1e-9 * m2);
        }
    }
}
