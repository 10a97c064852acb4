//! One-step greedy policy: use whichever process gives the smaller expected
//! entropy after the next observation.
//!
//! With the anchored observation contributing zero entropy, the comparison
//! reduces to the sign of `D(z) = α₀(z)H(r₀(z)) − α₁(z)H(r₁(z))`; process 0
//! is chosen where `D < 0`.

use crate::error::{Error, Result};
use crate::policy::{Cut, Orientation, ThresholdPolicy};
use crate::special::{entropy, SpecialModel};

pub const GRID_POINTS: usize = 10_000;
pub const BISECTION_TOL: f64 = 1e-12;

pub fn greedy_gap(model: &SpecialModel, z: f64) -> f64 {
    model.alpha0(z) * entropy(model.r0(z)) - model.alpha1(z) * entropy(model.r1(z))
}

#[inline]
fn prefers_zero(model: &SpecialModel, z: f64) -> bool {
    greedy_gap(model, z) < 0.0
}

/// Points in [0,1] where the greedy choice switches, each refined by
/// bisection. A switch at `t` means the choice at `t` differs from the
/// choice just left of it.
pub fn greedy_crossings(model: &SpecialModel) -> Vec<f64> {
    let grid = |j: usize| j as f64 / GRID_POINTS as f64;
    let mut out = Vec::new();
    let mut prev = prefers_zero(model, 0.0);
    for j in 1..=GRID_POINTS {
        let cur = prefers_zero(model, grid(j));
        if cur != prev {
            let (mut lo, mut hi) = (grid(j - 1), grid(j));
            while hi - lo > BISECTION_TOL {
                let mid = 0.5 * (lo + hi);
                if prefers_zero(model, mid) == prev {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            out.push(hi);
        }
        prev = cur;
    }
    out
}

pub fn greedy_policy(model: &SpecialModel) -> Result<ThresholdPolicy> {
    let crossings = greedy_crossings(model);
    let left_zero = prefers_zero(model, 0.0);
    match crossings.as_slice() {
        [] if left_zero => Ok(ThresholdPolicy::all0()),
        [] => Ok(ThresholdPolicy::all1()),
        [t] => {
            let orientation = if left_zero {
                Orientation::ZeroLeft
            } else {
                Orientation::OneLeft
            };
            Ok(ThresholdPolicy::new(orientation, Cut::At(*t)))
        }
        many => Err(Error::MultipleCrossings { count: many.len() }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_prefers_process_one_everywhere() {
        let m = SpecialModel::new(0.8, 0.3, 0.5, 0.3).unwrap();
        assert!(greedy_crossings(&m).is_empty());
        assert!(greedy_gap(&m, 0.0) > 0.0 && greedy_gap(&m, 1.0) > 0.0);
        assert_eq!(greedy_policy(&m).unwrap(), ThresholdPolicy::all1());
    }

    #[test]
    fn single_crossing_is_refined() {
        let m = SpecialModel::new(0.6, 0.7, 0.5, 0.5).unwrap();
        let c = greedy_crossings(&m);
        assert_eq!(c.len(), 1);
        let g = greedy_policy(&m).unwrap();
        let Cut::At(t) = g.cut else {
            panic!("expected a finite threshold")
        };
        assert!(prefers_zero(&m, t - 1e-9) != prefers_zero(&m, t + 1e-9));
        assert_eq!(g.decide(t - 1e-9), usize::from(!prefers_zero(&m, t - 1e-9)));
        assert_eq!(g.decide(t + 1e-9), usize::from(!prefers_zero(&m, t + 1e-9)));
    }

    #[test]
    fn symmetric_threshold_at_half() {
        for (a, p) in [(0.8, 0.5), (0.7, 0.3), (0.3, 0.6)] {
            let m = SpecialModel::new(a, a, p, p).unwrap();
            let g = greedy_policy(&m).unwrap();
            match g.cut {
                Cut::At(t) => assert!((t - 0.5).abs() < 1e-9, "a={a} p={p} t={t}"),
                Cut::RightEmpty => panic!("symmetric model should switch at 1/2"),
            }
        }
    }

    #[test]
    fn gap_antisymmetric_under_relabelling() {
        let m = SpecialModel::new(0.9, 0.9, 0.2, 0.2).unwrap();
        for k in 0..=100 {
            let z = k as f64 / 100.0;
            assert!((greedy_gap(&m, z) + greedy_gap(&m, 1.0 - z)).abs() < 1e-14);
        }
    }
}
