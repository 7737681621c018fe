use serde::{Deserialize, Serialize};

use super::Vec3;

/// Unit quaternion orientation, stored canonically with `w >= 0`.
///
/// JSON form is the array `[w, x, y, z]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct Rotation {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RotationError {
    #[error("quaternion has non-finite component")]
    NonFinite,
    #[error("quaternion norm {0} is not 1")]
    NotUnit(f64),
}

const UNIT_TOLERANCE: f64 = 1e-9;

impl Rotation {
    pub const IDENTITY: Rotation = Rotation { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    /// Builds a rotation from raw components, normalizing and canonicalizing
    /// the double cover.
    pub fn from_quaternion(w: f64, x: f64, y: f64, z: f64) -> Result<Self, RotationError> {
        if ![w, x, y, z].iter().all(|c| c.is_finite()) {
            return Err(RotationError::NonFinite);
        }
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if n < 1e-12 {
            return Err(RotationError::NotUnit(n));
        }
        Ok(Self::canonical(w / n, x / n, y / n, z / n))
    }

    /// Rotation about world +z by `yaw` radians.
    pub fn from_yaw(yaw: f64) -> Self {
        let half = 0.5 * wrap_angle(yaw);
        Self::canonical(half.cos(), 0.0, 0.0, half.sin())
    }

    fn canonical(w: f64, x: f64, y: f64, z: f64) -> Self {
        // -0.0 is folded to +0.0 so that q and -q serialize identically.
        let fold = |c: f64| if c == 0.0 { 0.0 } else { c };
        if w < 0.0 || (w == 0.0 && (x, y, z) < (0.0, 0.0, 0.0)) {
            Self { w: fold(-w), x: fold(-x), y: fold(-y), z: fold(-z) }
        } else {
            Self { w: fold(w), x: fold(x), y: fold(y), z: fold(z) }
        }
    }

    pub fn components(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    /// Heading angle about +z in (-pi, pi].
    pub fn yaw(&self) -> f64 {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        (2.0 * (w * z + x * y)).atan2(1.0 - 2.0 * (y * y + z * z))
    }

    pub fn pitch(&self) -> f64 {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        (2.0 * (w * y - z * x)).clamp(-1.0, 1.0).asin()
    }

    pub fn roll(&self) -> f64 {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        (2.0 * (w * x + y * z)).atan2(1.0 - 2.0 * (x * x + y * y))
    }

    pub fn rotate(&self, v: Vec3) -> Vec3 {
        let u = Vec3::new(self.x, self.y, self.z);
        let t = 2.0 * u.cross(v);
        v + self.w * t + u.cross(t)
    }

    /// Body axes (forward, left, up) expressed in world coordinates.
    pub fn axes(&self) -> [Vec3; 3] {
        [self.rotate(Vec3::X), self.rotate(Vec3::Y), self.rotate(Vec3::Z)]
    }

    /// Unit forward direction projected on the ground plane.
    pub fn heading(&self) -> Vec3 {
        let yaw = self.yaw();
        Vec3::new(yaw.cos(), yaw.sin(), 0.0)
    }
}

impl Default for Rotation {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl TryFrom<[f64; 4]> for Rotation {
    type Error = RotationError;

    fn try_from([w, x, y, z]: [f64; 4]) -> Result<Self, Self::Error> {
        if ![w, x, y, z].iter().all(|c| c.is_finite()) {
            return Err(RotationError::NonFinite);
        }
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if (n - 1.0).abs() > UNIT_TOLERANCE {
            return Err(RotationError::NotUnit(n));
        }
        // Stored values are already unit; only the sign is canonicalized so
        // that loading and saving is lossless.
        Ok(Self::canonical(w, x, y, z))
    }
}

impl From<Rotation> for [f64; 4] {
    fn from(r: Rotation) -> Self {
        r.components()
    }
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut r = a.rem_euclid(TAU);
    if r > PI {
        r -= TAU;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn yaw_round_trip() {
        for &yaw in &[0.0, 0.3, -2.0, PI, -PI + 1e-9, 3.0] {
            let r = Rotation::from_yaw(yaw);
            assert!((wrap_angle(r.yaw() - yaw)).abs() < 1e-12, "yaw {yaw}");
            assert!(r.components()[0] >= 0.0);
        }
    }

    #[test]
    fn rejects_non_unit_json() {
        let err = serde_json::from_str::<Rotation>("[2.0, 0.0, 0.0, 0.0]").unwrap_err();
        assert!(err.to_string().contains("norm"));
    }

    #[test]
    fn rotate_quarter_turn() {
        let r = Rotation::from_yaw(PI / 2.0);
        let v = r.rotate(Vec3::X);
        assert!((v - Vec3::Y).norm() < 1e-12);
    }

    proptest! {
        #[test]
        fn double_cover_is_canonicalized(w in -1.0f64..1.0, x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0) {
            prop_assume!(w * w + x * x + y * y + z * z > 1e-3);
            let a = Rotation::from_quaternion(w, x, y, z).unwrap();
            let b = Rotation::from_quaternion(-w, -x, -y, -z).unwrap();
            prop_assert_eq!(a, b);
            let n: f64 = a.components().iter().map(|c| c * c).sum::<f64>().sqrt();
            prop_assert!((n - 1.0).abs() < 1e-9);
        }

        #[test]
        fn wrap_angle_range(a in -100.0f64..100.0) {
            let w = wrap_angle(a);
            prop_assert!(w > -PI - 1e-12 && w <= PI + 1e-12);
            prop_assert!(((a - w) / (2.0 * PI) - ((a - w) / (2.0 * PI)).round()).abs() < 1e-9);
        }
    }
}
