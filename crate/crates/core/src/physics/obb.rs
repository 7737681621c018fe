//! Oriented-box overlap via the separating axis theorem.

use crate::model::Vec3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedBox {
    pub center: Vec3,
    pub axes: [Vec3; 3],
    pub half: [f64; 3],
}

/// Minimum-translation result of an overlap test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Penetration {
    /// Unit axis pointing from the first box toward the second.
    pub normal: Vec3,
    pub depth: f64,
    /// Approximate contact location on the separating axis.
    pub point: Vec3,
}

impl OrientedBox {
    pub fn radius_along(&self, axis: Vec3) -> f64 {
        (0..3).map(|i| self.half[i] * self.axes[i].dot(axis).abs()).sum()
    }
}

const PARALLEL_EPS: f64 = 1e-9;

/// Tests two boxes for strict overlap. Touching boxes (zero gap) do not
/// overlap. Returns the axis of least penetration.
pub fn overlap(a: &OrientedBox, b: &OrientedBox) -> Option<Penetration> {
    let d = b.center - a.center;
    let mut best: Option<(f64, Vec3)> = None;

    let mut test = |axis: Vec3| -> bool {
        let ra = a.radius_along(axis);
        let rb = b.radius_along(axis);
        let dist = d.dot(axis);
        let depth = ra + rb - dist.abs();
        if depth <= 0.0 {
            return false;
        }
        let oriented = if dist < 0.0 { -axis } else { axis };
        // Face axes are tested first and win ties against edge axes.
        if best.is_none_or(|(bd, _)| depth < bd - 1e-12) {
            best = Some((depth, oriented));
        }
        true
    };

    for axis in a.axes.iter().chain(b.axes.iter()) {
        if !test(*axis) {
            return None;
        }
    }
    for ua in &a.axes {
        for ub in &b.axes {
            let c = ua.cross(*ub);
            if c.norm() < PARALLEL_EPS {
                continue;
            }
            if !test(c / c.norm()) {
                return None;
            }
        }
    }

    best.map(|(depth, normal)| {
        let ra = a.radius_along(normal);
        Penetration { normal, depth, point: a.center + normal * (ra - 0.5 * depth) }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Rotation;

    fn cube(center: Vec3, yaw: f64, half: f64) -> OrientedBox {
        OrientedBox { center, axes: Rotation::from_yaw(yaw).axes(), half: [half; 3] }
    }

    #[test]
    fn separated_boxes_do_not_overlap() {
        let a = cube(Vec3::ZERO, 0.0, 1.0);
        let b = cube(Vec3::new(2.5, 0.0, 0.0), 0.0, 1.0);
        assert!(overlap(&a, &b).is_none());
    }

    #[test]
    fn colocated_boxes_overlap() {
        let a = cube(Vec3::ZERO, 0.0, 1.0);
        let p = overlap(&a, &a).unwrap();
        assert!(p.depth > 0.0);
        assert!((p.normal.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn touching_boxes_are_not_in_contact() {
        let a = cube(Vec3::ZERO, 0.0, 1.0);
        let b = cube(Vec3::new(2.0, 0.0, 0.0), 0.0, 1.0);
        assert!(overlap(&a, &b).is_none());
    }

    #[test]
    fn normal_points_from_first_to_second() {
        let a = cube(Vec3::ZERO, 0.0, 1.0);
        let b = cube(Vec3::new(-1.5, 0.2, 0.0), 0.0, 1.0);
        let p = overlap(&a, &b).unwrap();
        assert!((p.normal - (-Vec3::X)).norm() < 1e-12);
        assert!((p.depth - 0.5).abs() < 1e-12);
        let q = overlap(&b, &a).unwrap();
        assert!((q.normal - Vec3::X).norm() < 1e-12);
    }

    #[test]
    fn rotated_box_uses_diagonal_reach() {
        // A 45-degree cube reaches sqrt(2) along x.
        let a = cube(Vec3::ZERO, std::f64::consts::FRAC_PI_4, 1.0);
        let b = cube(Vec3::new(2.3, 0.0, 0.0), 0.0, 1.0);
        assert!(overlap(&a, &b).is_some());
        let c = cube(Vec3::new(2.5, 0.0, 0.0), 0.0, 1.0);
        assert!(overlap(&a, &c).is_none());
    }
}
