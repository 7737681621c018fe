use crate::model::Vec3;

/// Default smoothing window, frames.
pub const SMOOTHING_WINDOW: usize = 5;

/// Centered moving average; windows are truncated at the sequence ends.
///
/// `window` must be odd.
pub fn moving_average(series: &[Vec3], window: usize) -> Vec<Vec3> {
    debug_assert!(window % 2 == 1, "window must be odd");
    let half = window / 2;
    let n = series.len();
    (0..n)
        .map(|t| {
            let lo = t.saturating_sub(half);
            let hi = (t + half).min(n - 1);
            let sum: Vec3 = series[lo..=hi].iter().copied().sum();
            sum / (hi - lo + 1) as f64
        })
        .collect()
}

/// Backward difference with the first entry copied from the second.
pub fn backward_difference(series: &[Vec3], dt: f64) -> Vec<Vec3> {
    let n = series.len();
    if n < 2 {
        return vec![Vec3::ZERO; n];
    }
    let mut out: Vec<Vec3> = (0..n)
        .map(|t| if t == 0 { Vec3::ZERO } else { (series[t] - series[t - 1]) / dt })
        .collect();
    out[0] = out[1];
    out
}

/// Smoothed velocity and acceleration from positions.
///
/// Velocity is the smoothed backward difference of positions. Acceleration
/// is the smoothed backward difference of that smoothed velocity.
pub fn derive_dynamics(positions: &[Vec3], dt: f64, window: usize) -> (Vec<Vec3>, Vec<Vec3>) {
    let velocity = moving_average(&backward_difference(positions, dt), window);
    let acceleration = moving_average(&backward_difference(&velocity, dt), window);
    (velocity, acceleration)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn impulse_response_is_centered_box() {
        let mut x = vec![Vec3::ZERO; 11];
        x[5] = Vec3::X;
        let y = moving_average(&x, 5);
        for (t, v) in y.iter().enumerate() {
            let expected = if (3..=7).contains(&t) { 0.2 } else { 0.0 };
            assert!((v.x - expected).abs() < 1e-15, "t={t}");
        }
        // Truncated window at the boundary averages fewer samples.
        let mut e = vec![Vec3::ZERO; 6];
        e[0] = Vec3::X;
        let y = moving_average(&e, 5);
        assert!((y[0].x - 1.0 / 3.0).abs() < 1e-15);
        assert!((y[1].x - 0.25).abs() < 1e-15);
        assert!((y[2].x - 0.2).abs() < 1e-15);
        assert_eq!(y[3].x, 0.0);
    }

    #[test]
    fn linear_motion_is_exact() {
        let c = Vec3::new(1.5, -0.5, 0.25);
        let dt = 1.0 / 60.0;
        let xs: Vec<Vec3> = (0..40).map(|t| c * (t as f64 * dt)).collect();
        let (v, a) = derive_dynamics(&xs, dt, 5);
        for t in 0..40 {
            assert!((v[t] - c).norm() < 1e-9);
            assert!(a[t].norm() < 1e-6);
        }
    }

    #[test]
    fn constant_acceleration_recovered_on_interior() {
        // Semi-implicit recurrence, the same update the simulator uses.
        let a0 = Vec3::new(0.3, 0.0, -10.0);
        let dt = 1.0 / 60.0;
        let (mut x, mut v) = (Vec3::new(1.0, 2.0, 50.0), Vec3::new(2.0, 1.0, 0.0));
        let mut xs = vec![x];
        for _ in 0..100 {
            v += a0 * dt;
            x += v * dt;
            xs.push(x);
        }
        let (_, a) = derive_dynamics(&xs, dt, 5);
        for (t, at) in a.iter().enumerate().take(xs.len() - 6).skip(6) {
            assert!((*at - a0).norm() < 1e-6, "t={t}: {at:?}");
        }
    }

    #[test]
    fn smoothing_reduces_velocity_noise() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let dt = 1.0 / 60.0;
        let noise = Normal::new(0.0, 0.05).unwrap();
        let (mut raw_var, mut smooth_var) = (0.0, 0.0);
        for seed in 0..100 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let xs: Vec<Vec3> = (0..60)
                .map(|t| Vec3::new(t as f64 * dt * 2.0 + noise.sample(&mut rng), 0.0, 0.0))
                .collect();
            let raw = backward_difference(&xs, dt);
            let smooth = moving_average(&raw, 5);
            for t in 5..55 {
                raw_var += (raw[t].x - 2.0).powi(2);
                smooth_var += (smooth[t].x - 2.0).powi(2);
            }
        }
        assert!(smooth_var < raw_var);
    }

    proptest! {
        #[test]
        fn moving_average_preserves_constants(c in -50.0f64..50.0, n in 1usize..30) {
            let xs = vec![Vec3::new(c, -c, 0.5 * c); n];
            for v in moving_average(&xs, 5) {
                prop_assert!((v - xs[0]).norm() <= 1e-12 * (1.0 + c.abs()));
            }
        }

        #[test]
        fn moving_average_stays_within_range(xs in proptest::collection::vec(-10.0f64..10.0, 1..40)) {
            let series: Vec<Vec3> = xs.iter().map(|&x| Vec3::new(x, 0.0, 0.0)).collect();
            let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for v in moving_average(&series, 5) {
                prop_assert!(v.x >= lo - 1e-12 && v.x <= hi + 1e-12);
            }
        }
    }
}
