use serde::{Deserialize, Serialize};

use super::{Direction, Vec3};

/// Speed below which an object is treated as not moving, m/s.
pub const EPSILON_MOTION: f64 = 0.1;

/// Pinhole camera looking at a target point with world +z as up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub position: Vec3,
    pub target: Vec3,
    /// Horizontal field of view, degrees.
    pub fov_deg: f64,
    pub width: u32,
    pub height: u32,
}

impl Default for Camera {
    fn default() -> Self {
        Self {
            position: Vec3::new(0.0, -16.0, 9.0),
            target: Vec3::ZERO,
            fov_deg: 60.0,
            width: 480,
            height: 320,
        }
    }
}

/// Camera-frame basis: right, up, and the viewing direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraBasis {
    pub right: Vec3,
    pub up: Vec3,
    pub forward: Vec3,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CameraError {
    #[error("speed {speed} is below the motion threshold {epsilon}; object is not moving")]
    NotMoving { speed: f64, epsilon: f64 },
    #[error("camera looks straight along the vertical axis")]
    DegenerateView,
}

impl Camera {
    pub fn basis(&self) -> Result<CameraBasis, CameraError> {
        let forward = (self.target - self.position).normalized().ok_or(CameraError::DegenerateView)?;
        let right = forward.cross(Vec3::Z).normalized().ok_or(CameraError::DegenerateView)?;
        let up = right.cross(forward);
        Ok(CameraBasis { right, up, forward })
    }

    /// Focal length in pixels derived from the horizontal field of view.
    pub fn focal_px(&self) -> f64 {
        0.5 * self.width as f64 / (0.5 * self.fov_deg.to_radians()).tan()
    }

    /// Pixel coordinates of a world point, or `None` behind the camera.
    pub fn project(&self, point: Vec3) -> Option<(f64, f64)> {
        let basis = self.basis().ok()?;
        let rel = point - self.position;
        let depth = rel.dot(basis.forward);
        if depth <= 1e-9 {
            return None;
        }
        let f = self.focal_px();
        let u = 0.5 * self.width as f64 + f * rel.dot(basis.right) / depth;
        let v = 0.5 * self.height as f64 - f * rel.dot(basis.up) / depth;
        Some((u, v))
    }

    pub fn in_view(&self, point: Vec3) -> bool {
        self.project(point).is_some_and(|(u, v)| {
            (0.0..=self.width as f64).contains(&u) && (0.0..=self.height as f64).contains(&v)
        })
    }
}

/// Direction label of a velocity as seen from the camera.
///
/// The velocity is expressed in the camera frame (x right, y up, z away from
/// the camera) and the largest-magnitude component wins; ties go to x, then y.
pub fn direction_of(velocity: Vec3, camera: &Camera, epsilon_motion: f64) -> Result<Direction, CameraError> {
    let speed = velocity.norm();
    if !(speed > epsilon_motion) {
        return Err(CameraError::NotMoving { speed, epsilon: epsilon_motion });
    }
    let basis = camera.basis()?;
    let x = velocity.dot(basis.right);
    let y = velocity.dot(basis.up);
    let z = velocity.dot(basis.forward);
    let (ax, ay, az) = (x.abs(), y.abs(), z.abs());
    Ok(if ax >= ay && ax >= az {
        if x >= 0.0 { Direction::Right } else { Direction::Left }
    } else if ay >= az {
        if y >= 0.0 { Direction::Up } else { Direction::Down }
    } else if z >= 0.0 {
        Direction::Back
    } else {
        Direction::Front
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn level_camera() -> Camera {
        Camera { position: Vec3::new(0.0, -10.0, 0.0), target: Vec3::ZERO, ..Camera::default() }
    }

    #[test]
    fn axis_aligned_directions() {
        let cam = level_camera();
        let basis = cam.basis().unwrap();
        assert_eq!(direction_of(basis.right * 2.0, &cam, EPSILON_MOTION).unwrap(), Direction::Right);
        assert_eq!(direction_of(Vec3::Z * 2.0, &cam, EPSILON_MOTION).unwrap(), Direction::Up);
        assert_eq!(direction_of(-Vec3::Z, &cam, EPSILON_MOTION).unwrap(), Direction::Down);
        assert_eq!(direction_of(Vec3::Y, &cam, EPSILON_MOTION).unwrap(), Direction::Back);
        assert_eq!(direction_of(-Vec3::Y, &cam, EPSILON_MOTION).unwrap(), Direction::Front);
        assert_eq!(direction_of(-Vec3::X * 3.0, &cam, EPSILON_MOTION).unwrap(), Direction::Left);
    }

    #[test]
    fn zero_velocity_is_not_moving() {
        let cam = level_camera();
        assert!(matches!(
            direction_of(Vec3::ZERO, &cam, EPSILON_MOTION),
            Err(CameraError::NotMoving { .. })
        ));
        assert!(direction_of(Vec3::new(0.05, 0.0, 0.0), &cam, EPSILON_MOTION).is_err());
    }

    #[test]
    fn ties_prefer_x_then_y() {
        let cam = level_camera();
        assert_eq!(direction_of(Vec3::new(1.0, 0.0, 1.0), &cam, EPSILON_MOTION).unwrap(), Direction::Right);
        assert_eq!(direction_of(Vec3::new(0.0, 1.0, 1.0), &cam, EPSILON_MOTION).unwrap(), Direction::Up);
    }

    #[test]
    fn default_camera_sees_arena_center() {
        let cam = Camera::default();
        let (u, v) = cam.project(Vec3::ZERO).unwrap();
        assert!((u - 240.0).abs() < 1e-9 && (v - 160.0).abs() < 1e-9);
        assert!(cam.in_view(Vec3::new(3.0, 3.0, 0.0)));
        assert!(!cam.in_view(Vec3::new(0.0, -30.0, 0.0)));
    }
}
