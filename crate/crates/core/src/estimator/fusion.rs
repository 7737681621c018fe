use crate::model::{wrap_angle, Vec3};
use crate::physics::{step, ContactManifold, SceneConfig, SimError, WorldState};

/// Maximizer of the product of two Gaussians over one coordinate.
///
/// Infinite variance removes a term; zero variance pins the result to it.
/// A missing observation returns the prior mean.
pub fn fuse_scalar(mu: f64, prior_var: f64, z: Option<f64>, obs_var: f64) -> f64 {
    let Some(z) = z else { return mu };
    if obs_var == 0.0 {
        return z;
    }
    if prior_var == 0.0 {
        return mu;
    }
    if prior_var.is_infinite() {
        return z;
    }
    if obs_var.is_infinite() {
        return mu;
    }
    let (wp, wo) = (1.0 / prior_var, 1.0 / obs_var);
    (mu * wp + z * wo) / (wp + wo)
}

/// Per-axis fusion of an isotropic prior and observation.
pub fn fuse_position(mu: Vec3, prior_var: f64, z: Option<Vec3>, obs_var: f64) -> Vec3 {
    Vec3::new(
        fuse_scalar(mu.x, prior_var, z.map(|z| z.x), obs_var),
        fuse_scalar(mu.y, prior_var, z.map(|z| z.y), obs_var),
        fuse_scalar(mu.z, prior_var, z.map(|z| z.z), obs_var),
    )
}

/// Yaw fusion on the wrapped difference from the prior.
pub fn fuse_yaw(mu: f64, prior_var: f64, z: Option<f64>, obs_var: f64) -> f64 {
    let d = z.map(|z| wrap_angle(z - mu));
    wrap_angle(mu + fuse_scalar(0.0, prior_var, d, obs_var))
}

/// One engine step from the previous posterior. Bodies carry the posterior
/// pose and smoothed velocity; contacts met during the step are returned.
pub fn predict_prior(previous: &WorldState, config: &SceneConfig) -> Result<(WorldState, Vec<ContactManifold>), SimError> {
    step(previous, config)
}
