use serde::{Deserialize, Serialize};

/// Physical constants and run length for one scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    /// Gravitational acceleration magnitude, m/s², acting along -z.
    pub gravity: f64,
    /// Fixed step, seconds.
    pub dt: f64,
    pub n_frames: usize,
    pub friction_object: f64,
    pub friction_floor: f64,
    pub restitution: f64,
    /// Closing speeds below this resolve inelastically, m/s.
    pub rest_speed_threshold: f64,
    /// Half side of the square placement area centered at the origin, m.
    pub arena_radius: f64,
    /// Whether the ground plane z = 0 exists.
    pub floor: bool,
    /// Contact-free frames required before the same pair can produce a new
    /// collision event.
    pub debounce_frames: usize,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            gravity: 10.0,
            dt: 1.0 / 60.0,
            n_frames: 120,
            friction_object: 0.2,
            friction_floor: 0.4,
            restitution: 0.5,
            rest_speed_threshold: 0.5,
            arena_radius: 6.0,
            floor: true,
            debounce_frames: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("dt must be positive, got {0}")]
    Dt(f64),
    #[error("n_frames must be positive")]
    Frames,
    #[error("restitution must lie in [0, 1], got {0}")]
    Restitution(f64),
    #[error("friction coefficients must be non-negative")]
    Friction,
    #[error("gravity and thresholds must be finite and non-negative")]
    Constants,
}

impl SceneConfig {
    /// Combined object/floor friction coefficient (product rule).
    pub fn friction_effective(&self) -> f64 {
        self.friction_object * self.friction_floor
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.n_frames as f64
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(ConfigError::Dt(self.dt));
        }
        if self.n_frames == 0 {
            return Err(ConfigError::Frames);
        }
        if !(0.0..=1.0).contains(&self.restitution) {
            return Err(ConfigError::Restitution(self.restitution));
        }
        if !(self.friction_object >= 0.0 && self.friction_floor >= 0.0) {
            return Err(ConfigError::Friction);
        }
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !(finite_nonneg(self.gravity) && finite_nonneg(self.rest_speed_threshold) && self.arena_radius > 0.0) {
            return Err(ConfigError::Constants);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = SceneConfig::default();
        c.validate().unwrap();
        assert!((c.friction_effective() - 0.08).abs() < 1e-15);
        assert!((c.duration() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(SceneConfig { dt: 0.0, ..Default::default() }.validate().is_err());
        assert!(SceneConfig { restitution: 1.5, ..Default::default() }.validate().is_err());
        assert!(SceneConfig { n_frames: 0, ..Default::default() }.validate().is_err());
        assert!(SceneConfig { friction_floor: -0.1, ..Default::default() }.validate().is_err());
    }
}
