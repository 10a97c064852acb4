//! Local search over truncated policies by single-bit flips.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::entropy::{estimate_entropy_to_tolerance, EntropyEstimate};
use crate::error::{Error, Result};
use crate::policy::{Policy, TruncatedPolicy};
use crate::search::SearchResult;
use crate::special::SpecialModel;

pub const PASS_CAP: usize = 1000;
/// Relative entropy difference under which two policies count as equivalent.
pub const MATCH_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalOptions {
    pub eps: f64,
    pub pass_cap: usize,
}

impl LocalOptions {
    pub fn new(eps: f64) -> Self {
        LocalOptions {
            eps,
            pass_cap: PASS_CAP,
        }
    }
}

/// Entropy of a truncated policy; a split policy has no finite value.
fn evaluate(model: &SpecialModel, policy: &TruncatedPolicy, eps: f64) -> Result<Option<EntropyEstimate>> {
    match estimate_entropy_to_tolerance(model, &Policy::Truncated(policy.clone()), eps) {
        Ok(e) => Ok(Some(e)),
        Err(Error::DegenerateDenominator) => Ok(None),
        Err(e) => Err(e),
    }
}

fn value(e: &Option<EntropyEstimate>) -> f64 {
    e.as_ref().map_or(f64::INFINITY, |e| e.value)
}

pub fn local_search(model: &SpecialModel, start: TruncatedPolicy, eps: f64) -> Result<SearchResult> {
    local_search_with(model, start, &LocalOptions::new(eps))
}

/// Cycles through the bits of both orbits in order, keeping any flip that
/// lowers the entropy by more than `2·eps`, until a full pass changes
/// nothing. Hitting the pass cap returns the current policy with
/// `converged = false`.
pub fn local_search_with(model: &SpecialModel, start: TruncatedPolicy, opts: &LocalOptions) -> Result<SearchResult> {
    let mut policy = start;
    let mut current = evaluate(model, &policy, opts.eps)?;
    let mut tested = 1;
    let mut history = vec![value(&current)];
    let mut converged = false;
    for _ in 0..opts.pass_cap {
        let mut changed = false;
        for orbit in 0..2 {
            for k in 0..=policy.depth() {
                policy.flip(orbit, k);
                let cand = evaluate(model, &policy, opts.eps)?;
                tested += 1;
                if value(&cand) < value(&current) - 2.0 * opts.eps {
                    current = cand;
                    history.push(value(&current));
                    changed = true;
                } else {
                    policy.flip(orbit, k);
                }
            }
        }
        if !changed {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("local search hit the pass cap of {}", opts.pass_cap);
    }
    let best_entropy = current.ok_or(Error::DegenerateDenominator)?;
    Ok(SearchResult {
        best_policy: policy.into(),
        best_entropy,
        region: None,
        policies_tested: tested,
        trace: Vec::new(),
        history,
        seed: None,
        converged,
    })
}

/// Uniform draw from the 128-bit hypercube.
pub fn random_start<R: Rng>(rng: &mut R) -> TruncatedPolicy {
    TruncatedPolicy::from_words([rng.gen(), rng.gen()])
}

/// Seed that depends only on the parameter values, so that the same point
/// gets the same starts in every sweep.
pub fn point_seed(model: &SpecialModel, base: u64) -> u64 {
    [model.a(), model.b(), model.p(), model.q()]
        .iter()
        .fold(splitmix(base), |h, v| splitmix(h ^ v.to_bits()))
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Local search from `starts` random policies drawn from `seed`.
pub fn local_search_random(model: &SpecialModel, starts: usize, seed: u64, eps: f64) -> Result<Vec<SearchResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    log::debug!("local search seed {seed}");
    (0..starts)
        .map(|_| {
            let mut r = local_search(model, random_start(&mut rng), eps)?;
            r.seed = Some(seed);
            Ok(r)
        })
        .collect()
}

/// True when `h` is within the relative match tolerance of `reference`.
pub fn matches(h: f64, reference: f64) -> bool {
    (h - reference).abs() <= MATCH_TOL * reference.abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::threshold_uniform_n;
    use crate::search::find_optimal_threshold;

    fn reference() -> SpecialModel {
        SpecialModel::new(0.8, 0.3, 0.5, 0.3).unwrap()
    }

    #[test]
    fn optimal_threshold_truncation_is_fixed() {
        let m = reference();
        let eps = 1e-8;
        let opt = find_optimal_threshold(&m, eps).unwrap();
        let start = TruncatedPolicy::truncate(&m, &opt.best_policy, 63).unwrap();
        let res = local_search(&m, start.clone(), eps).unwrap();
        assert!(res.converged);
        assert_eq!(res.best_policy, Policy::Truncated(start));
        assert!(matches(res.best_entropy.value, opt.best_entropy.value));
    }

    #[test]
    fn result_is_locally_optimal() {
        let m = reference();
        let eps = 1e-8;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let res = local_search(&m, random_start(&mut rng), eps).unwrap();
        let Policy::Truncated(best) = &res.best_policy else {
            panic!("truncated result expected")
        };
        for orbit in 0..2 {
            for k in 0..64 {
                let mut p = best.clone();
                p.flip(orbit, k);
                let h = value(&evaluate(&m, &p, eps).unwrap());
                assert!(h >= res.best_entropy.value - 2.0 * eps);
            }
        }
        let n = threshold_uniform_n(&m, eps).unwrap();
        assert!(n >= 1);
    }

    #[test]
    fn split_start_escapes() {
        let m = reference();
        let res = local_search(&m, TruncatedPolicy::from_words([0, u64::MAX]), 1e-8).unwrap();
        assert!(res.best_entropy.value.is_finite());
    }

    #[test]
    fn seeds_depend_on_values_only() {
        let m = reference();
        assert_eq!(
            point_seed(&m, 1),
            point_seed(&SpecialModel::new(0.8, 0.3, 0.5, 0.3).unwrap(), 1)
        );
        assert_ne!(point_seed(&m, 1), point_seed(&m, 2));
        assert_ne!(point_seed(&m, 1), point_seed(&m.mirrored(), 1));
    }
}
