use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::model::{CollisionEvent, SceneAnnotation};

/// Frame tolerance when matching estimated to true collisions.
pub const COLLISION_FRAME_TOLERANCE: usize = 5;

/// Root mean squared position error over all objects and the frames both
/// scenes cover. Objects are matched by id.
pub fn position_rmse(estimate: &SceneAnnotation, truth: &SceneAnnotation) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for (o, t) in estimate.objects.iter().zip(&estimate.trajectories) {
        let Some(g) = truth.trajectory(o.spec.id) else { continue };
        for (a, b) in t.states.iter().zip(&g.states) {
            sum += (a.position - b.position).norm_squared();
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

/// Matched and unmatched collision counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CollisionScore {
    pub true_positive: usize,
    pub false_positive: usize,
    pub false_negative: usize,
}

impl CollisionScore {
    pub fn precision(&self) -> f64 {
        ratio(self.true_positive, self.true_positive + self.false_positive)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.true_positive, self.true_positive + self.false_negative)
    }

    /// F1; a score with no events on either side counts as perfect.
    pub fn f1(&self) -> f64 {
        let denom = 2 * self.true_positive + self.false_positive + self.false_negative;
        ratio(2 * self.true_positive, denom)
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        1.0
    } else {
        a as f64 / b as f64
    }
}

impl Add for CollisionScore {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            true_positive: self.true_positive + o.true_positive,
            false_positive: self.false_positive + o.false_positive,
            false_negative: self.false_negative + o.false_negative,
        }
    }
}

impl AddAssign for CollisionScore {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

/// Greedy matching in frame order: each estimated event takes the closest
/// unmatched true event of the same pair within `tolerance` frames. Only true
/// events before `horizon` are counted.
pub fn score_collisions(
    estimated: &[CollisionEvent],
    truth: &[CollisionEvent],
    tolerance: usize,
    horizon: usize,
) -> CollisionScore {
    let truth: Vec<&CollisionEvent> = truth.iter().filter(|e| e.frame < horizon).collect();
    let mut used = vec![false; truth.len()];
    let mut est: Vec<&CollisionEvent> = estimated.iter().filter(|e| e.frame < horizon).collect();
    est.sort_by_key(|e| e.key());
    let mut score = CollisionScore::default();
    for e in est {
        let best = truth
            .iter()
            .enumerate()
            .filter(|(i, g)| !used[*i] && g.pair == e.pair && g.frame.abs_diff(e.frame) <= tolerance)
            .min_by_key(|(i, g)| (g.frame.abs_diff(e.frame), *i))
            .map(|(i, _)| i);
        match best {
            Some(i) => {
                used[i] = true;
                score.true_positive += 1;
            }
            None => score.false_positive += 1,
        }
    }
    score.false_negative = used.iter().filter(|u| !**u).count();
    score
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ObjectPair;

    fn ev(frame: usize, a: u32, b: u32) -> CollisionEvent {
        CollisionEvent::new(frame, ObjectPair::new(a, b).unwrap())
    }

    #[test]
    fn matching_respects_pair_and_tolerance() {
        let truth = [ev(10, 0, 1), ev(40, 1, 2)];
        let est = [ev(14, 0, 1), ev(47, 1, 2), ev(40, 0, 2)];
        let s = score_collisions(&est, &truth, 5, 120);
        assert_eq!(s, CollisionScore { true_positive: 1, false_positive: 2, false_negative: 1 });
        assert!((s.f1() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn each_true_event_matches_once() {
        let truth = [ev(10, 0, 1)];
        let est = [ev(9, 0, 1), ev(11, 0, 1)];
        let s = score_collisions(&est, &truth, 5, 120);
        assert_eq!((s.true_positive, s.false_positive, s.false_negative), (1, 1, 0));
    }

    #[test]
    fn empty_is_perfect() {
        assert_eq!(score_collisions(&[], &[], 5, 120).f1(), 1.0);
        assert_eq!(score_collisions(&[], &[ev(3, 0, 1)], 5, 120).f1(), 0.0);
    }

    #[test]
    fn scores_add() {
        let a = CollisionScore { true_positive: 1, false_positive: 0, false_negative: 1 };
        let b = CollisionScore { true_positive: 3, false_positive: 1, false_negative: 0 };
        assert_eq!((a + b).f1(), 8.0 / 10.0);
    }
}
