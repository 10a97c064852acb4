//! Limiting expected entropy of the information state under a policy.
//!
//! Both orbits are walked in lockstep. Along orbit `i` the estimator
//! accumulates
//!
//! ```text
//! Iᵢ = Σ c_k      Hᵢ = Σ c_k H(z_k)      Cᵢ = Σ_{g(z_k) ≠ i} c_k (1 − α(z_k))
//! ```
//!
//! and reports `(C₁H₀ + C₀H₁) / Q` with `Q = C₁I₀ + C₀I₁`. After N+1 terms
//! the truncation error is at most `16 αᴺ / ((1 − α)⁴ Q²)` with
//! `α = sup α_i(z)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::Policy;
use crate::special::{entropy, SpecialModel};

/// Cap on the search for L.
pub const L_CAP: usize = 1_000_000;
/// Default cap on the adaptive estimator.
pub const ITERATION_CAP: usize = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub alpha_sup: f64,
    pub alpha_inf: f64,
    #[serde(rename = "L")]
    pub l: usize,
    pub lambda: f64,
}

impl BoundParams {
    /// Error bound valid for every threshold policy once `n ≥ L`.
    pub fn threshold_bound(&self, n: usize) -> f64 {
        let a = self.alpha_sup;
        16.0 * a.powf(n as f64) / (self.alpha_inf.powf(2.0 * self.l as f64) * (1.0 - a).powi(6))
    }
}

pub fn bound_params(model: &SpecialModel) -> Result<BoundParams> {
    let alpha_sup = model.alpha_sup();
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut l = None;
    for step in 1..=L_CAP {
        lo = model.r0(lo);
        hi = model.r1(hi);
        if lo > hi {
            l = Some(step);
            break;
        }
    }
    Ok(BoundParams {
        alpha_sup,
        alpha_inf: model.alpha_inf(),
        l: l.ok_or(Error::LNotFound { cap: L_CAP })?,
        // the anchored observation of process i has probability 1 − α_i
        lambda: alpha_sup,
    })
}

/// Smallest `N ≥ L` for which the threshold-policy bound is at most `eps`.
pub fn threshold_uniform_n(model: &SpecialModel, eps: f64) -> Result<usize> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    let bp = bound_params(model)?;
    let (a, ab, l) = (bp.alpha_sup, bp.alpha_inf, bp.l);
    let x = (eps.ln() - 16f64.ln() + 2.0 * l as f64 * ab.ln() + 6.0 * (1.0 - a).ln()) / a.ln();
    let mut n = if x.is_finite() && x > 0.0 { x.ceil() as usize } else { 0 }.max(l);
    while bp.threshold_bound(n) > eps {
        n += 1;
    }
    while n > l && bp.threshold_bound(n - 1) <= eps {
        n -= 1;
    }
    Ok(n)
}

/// What to report for a period-2 chain, whose expected entropy oscillates
/// between two limit points. `Min`/`Max` give the smaller/larger mean
/// entropy of the two cyclic classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PeriodicMode {
    #[default]
    Average,
    Min,
    Max,
}

impl FromStr for PeriodicMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "average" => Ok(PeriodicMode::Average),
            "min" => Ok(PeriodicMode::Min),
            "max" => Ok(PeriodicMode::Max),
            _ => Err(Error::InvalidArgument(format!("periodic mode {s:?}"))),
        }
    }
}

impl fmt::Display for PeriodicMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PeriodicMode::Average => "average",
            PeriodicMode::Min => "min",
            PeriodicMode::Max => "max",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub value: f64,
    pub bound: f64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "Q")]
    pub q: f64,
    pub c_hat: [f64; 2],
    pub h_hat: [f64; 2],
    pub i_hat: [f64; 2],
    /// The policy alternates processes along both orbits (period-2 chain).
    pub periodic: bool,
    /// `bound` is at most the requested tolerance.
    pub certified: bool,
}

impl EntropyEstimate {
    /// Turns an uncertified adaptive result into an `IterationCap` error.
    pub fn into_certified(self) -> Result<Self> {
        if self.certified {
            Ok(self)
        } else {
            Err(Error::IterationCap {
                cap: self.n + 1,
                bound: self.bound,
            })
        }
    }
}

/// Periodic tail of an orbit: `(process, α, H)` at each point of the
/// cycle, and the position of the next point.
#[derive(Debug, Clone)]
struct Cycle {
    terms: Vec<(usize, f64, f64)>,
    pos: usize,
}

impl Cycle {
    fn collect(model: &SpecialModel, policy: &Policy, orbit: usize, k: usize, mut z: f64, period: usize) -> Self {
        let terms = (0..period)
            .map(|j| {
                let g = policy.on_orbit(orbit, k + j, z);
                let t = (g, model.alpha(g, z), entropy(z));
                z = model.r(g, z);
                t
            })
            .collect();
        Cycle { terms, pos: 0 }
    }
}

/// Brent's cycle finder.
#[derive(Debug, Clone, Copy)]
struct Brent {
    saved: f64,
    power: usize,
    lam: usize,
}

/// `Σ_{f<n} rᶠ`.
fn geometric(r: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else if r == 1.0 {
        n as f64
    } else {
        (1.0 - r.powf(n as f64)) / (1.0 - r)
    }
}

/// Accumulators along one orbit.
#[derive(Debug, Clone)]
struct OrbitWalk {
    orbit: usize,
    z: f64,
    c: f64,
    k: usize,
    i_hat: f64,
    h_hat: f64,
    c_hat: f64,
    // split by parity of k, for the cyclic classes of a period-2 chain
    i_par: [f64; 2],
    h_par: [f64; 2],
    alternating: bool,
    cycle: Option<Cycle>,
    brent: Option<Brent>,
}

impl OrbitWalk {
    fn new(orbit: usize) -> Self {
        OrbitWalk {
            orbit,
            z: orbit as f64,
            c: 1.0,
            k: 0,
            i_hat: 0.0,
            h_hat: 0.0,
            c_hat: 0.0,
            i_par: [0.0; 2],
            h_par: [0.0; 2],
            alternating: true,
            cycle: None,
            brent: None,
        }
    }

    #[inline]
    fn add(&mut self, parity: usize, g: usize, c: f64, h: f64, alpha: f64) {
        self.i_hat += c;
        self.h_hat += c * h;
        self.i_par[parity] += c;
        self.h_par[parity] += c * h;
        if g != self.orbit {
            self.c_hat += c * (1.0 - alpha);
        }
        // period 2: orbit 0 uses 1,0,1,0,... and orbit 1 uses 0,1,0,1,...
        if g != self.orbit ^ parity ^ 1 {
            self.alternating = false;
        }
    }

    #[inline]
    fn step(&mut self, model: &SpecialModel, policy: &Policy, record: Option<&mut Vec<f64>>) {
        let parity = self.k & 1;
        let c = self.c;
        let cached = self.cycle.as_mut().map(|cy| {
            let t = cy.terms[cy.pos];
            cy.pos = (cy.pos + 1) % cy.terms.len();
            t
        });
        if let Some((g, alpha, h)) = cached {
            self.add(parity, g, c, h, alpha);
            self.c = c * alpha;
            self.k += 1;
            return;
        }
        let z = self.z;
        if let Some(rec) = record {
            rec.push(z);
        }
        let g = policy.on_orbit(self.orbit, self.k, z);
        let alpha = model.alpha(g, z);
        self.add(parity, g, c, entropy(z), alpha);
        self.c = c * alpha;
        let next = model.r(g, z);
        self.z = next;
        self.k += 1;
        if !policy.depends_on_point_after(self.k) {
            return;
        }
        match self.brent.as_mut() {
            None => {
                self.brent = Some(Brent {
                    saved: next,
                    power: 1,
                    lam: 0,
                })
            }
            Some(b) => {
                b.lam += 1;
                if next == b.saved {
                    let period = b.lam;
                    self.cycle = Some(Cycle::collect(model, policy, self.orbit, self.k, next, period));
                } else if b.lam == b.power {
                    *b = Brent {
                        saved: next,
                        power: 2 * b.power,
                        lam: 0,
                    };
                }
            }
        }
    }

    /// Adds the next `count` terms in closed form; the orbit must have
    /// entered its cycle.
    fn jump(&mut self, count: usize) {
        let Some(cy) = self.cycle.take() else {
            panic!("jump before the orbit reached a cycle");
        };
        let p = cy.terms.len();
        let (full, rem) = (count / p, count % p);
        let term = |j: usize| cy.terms[(cy.pos + j) % p];
        let mut mult = Vec::with_capacity(p + 1);
        let mut acc = 1.0;
        for j in 0..p {
            mult.push(acc);
            acc *= term(j).1;
        }
        mult.push(acc);
        let rho = acc;
        let rho_full = rho.powf(full as f64);
        let odd_period = p & 1;
        // cycles f = 0..full, split by parity of f when the period is odd
        let (n_even, n_odd) = if odd_period == 1 {
            (full.div_ceil(2), full / 2)
        } else {
            (full, 0)
        };
        let (g_even, g_odd) = if odd_period == 1 {
            (geometric(rho * rho, n_even), rho * geometric(rho * rho, n_odd))
        } else {
            (geometric(rho, n_even), 0.0)
        };
        for j in 0..p {
            let (g, alpha, h) = term(j);
            let base = self.c * mult[j];
            let par0 = (self.k + j) & 1;
            if n_even > 0 {
                self.add(par0, g, base * g_even, h, alpha);
            }
            if n_odd > 0 {
                self.add(par0 ^ 1, g, base * g_odd, h, alpha);
            }
            if j < rem {
                self.add(par0 ^ (full & odd_period), g, base * rho_full, h, alpha);
            }
        }
        self.c *= rho_full * mult[rem];
        self.k += count;
        self.cycle = Some(Cycle {
            pos: (cy.pos + rem) % p,
            ..cy
        });
    }

    fn run_to(&mut self, model: &SpecialModel, policy: &Policy, n: usize, mut record: Option<&mut Vec<f64>>) {
        while self.k <= n {
            if self.cycle.is_some() {
                self.jump(n + 1 - self.k);
                return;
            }
            self.step(model, policy, record.as_deref_mut());
        }
    }
}

/// Both orbits.
#[derive(Debug, Clone)]
struct Walk {
    orbits: [OrbitWalk; 2],
}

impl Walk {
    fn new() -> Self {
        Walk {
            orbits: [OrbitWalk::new(0), OrbitWalk::new(1)],
        }
    }

    fn q(&self) -> f64 {
        let [o0, o1] = &self.orbits;
        o1.c_hat * o0.i_hat + o0.c_hat * o1.i_hat
    }

    fn finish(&self, alpha_pow: f64, alpha: f64, mode: PeriodicMode, eps: f64) -> Result<EntropyEstimate> {
        let q = self.q();
        if !(q > 0.0) {
            return Err(Error::DegenerateDenominator);
        }
        let [o0, o1] = &self.orbits;
        let n = o0.k - 1;
        let bound = 16.0 * alpha_pow / ((1.0 - alpha).powi(4) * q * q);
        let (c0, c1) = (o0.c_hat, o1.c_hat);
        let mut value = (c1 * o0.h_hat + c0 * o1.h_hat) / q;
        let periodic = o0.alternating && o1.alternating;
        if periodic && mode != PeriodicMode::Average {
            // classes {z⁽⁰⁾ even, z⁽¹⁾ odd} and {z⁽⁰⁾ odd, z⁽¹⁾ even}, weights B₀ = C₁/Q, B₁ = C₀/Q
            let class = |p0: usize, p1: usize| {
                (c1 * o0.h_par[p0] + c0 * o1.h_par[p1]) / (c1 * o0.i_par[p0] + c0 * o1.i_par[p1])
            };
            let (x, y) = (class(0, 1), class(1, 0));
            value = if mode == PeriodicMode::Min { x.min(y) } else { x.max(y) };
        }
        Ok(EntropyEstimate {
            value,
            bound,
            n,
            q,
            c_hat: [c0, c1],
            h_hat: [o0.h_hat, o1.h_hat],
            i_hat: [o0.i_hat, o1.i_hat],
            periodic,
            certified: bound <= eps,
        })
    }
}

/// Estimate from the first N+1 points of each orbit.
pub fn estimate_entropy(model: &SpecialModel, policy: &Policy, n: usize) -> Result<EntropyEstimate> {
    estimate_entropy_with(model, policy, n, PeriodicMode::Average)
}

pub fn estimate_entropy_with(
    model: &SpecialModel,
    policy: &Policy,
    n: usize,
    mode: PeriodicMode,
) -> Result<EntropyEstimate> {
    fixed_walk(model, policy, n, mode, None)
}

/// Fixed-N estimate that also returns the visited orbit points.
pub fn estimate_recording(model: &SpecialModel, policy: &Policy, n: usize) -> Result<(EntropyEstimate, [Vec<f64>; 2])> {
    let cap = (n + 1).min(4096);
    let mut rec = [Vec::with_capacity(cap), Vec::with_capacity(cap)];
    let est = fixed_walk(model, policy, n, PeriodicMode::Average, Some(&mut rec))?;
    Ok((est, rec))
}

fn fixed_walk(
    model: &SpecialModel,
    policy: &Policy,
    n: usize,
    mode: PeriodicMode,
    mut record: Option<&mut [Vec<f64>; 2]>,
) -> Result<EntropyEstimate> {
    if n < 1 {
        return Err(Error::InvalidArgument("N must be at least 1".into()));
    }
    if let Policy::Truncated(t) = policy {
        if t.is_split() {
            return Err(Error::DegenerateDenominator);
        }
    }
    let alpha = model.alpha_sup();
    let mut walk = Walk::new();
    for (i, o) in walk.orbits.iter_mut().enumerate() {
        o.run_to(model, policy, n, record.as_deref_mut().map(|r| &mut r[i]));
    }
    walk.finish(alpha.powf(n as f64), alpha, mode, f64::INFINITY)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveOptions {
    pub eps: f64,
    pub cap: usize,
    pub mode: PeriodicMode,
}

impl AdaptiveOptions {
    pub fn new(eps: f64) -> Self {
        AdaptiveOptions {
            eps,
            cap: ITERATION_CAP,
            mode: PeriodicMode::Average,
        }
    }
}

/// Runs until the bound drops to `eps`. The result has `certified = false`
/// if the iteration cap was hit first.
pub fn estimate_entropy_to_tolerance(model: &SpecialModel, policy: &Policy, eps: f64) -> Result<EntropyEstimate> {
    estimate_adaptive(model, policy, &AdaptiveOptions::new(eps))
}

pub fn estimate_adaptive(model: &SpecialModel, policy: &Policy, opts: &AdaptiveOptions) -> Result<EntropyEstimate> {
    if !(opts.eps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "eps must be positive, got {}",
            opts.eps
        )));
    }
    if let Policy::Truncated(t) = policy {
        if t.is_split() {
            return Err(Error::DegenerateDenominator);
        }
    }
    let alpha = model.alpha_sup();
    let scale = 16.0 / (1.0 - alpha).powi(4);
    let mut walk = Walk::new();
    // alpha^k for the index k just processed
    let mut pow = 1.0;
    for step in 0..opts.cap.max(2) {
        for o in &mut walk.orbits {
            o.step(model, policy, None);
        }
        if step >= 1 {
            pow *= alpha;
            let q = walk.q();
            if q > 0.0 && scale * pow / (q * q) <= opts.eps {
                return walk.finish(pow, alpha, opts.mode, opts.eps);
            }
        }
    }
    let est = walk.finish(pow, alpha, opts.mode, opts.eps)?;
    log::warn!("iteration cap {} reached with bound {:e}", opts.cap, est.bound);
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{Cut, Orientation, ThresholdPolicy, TruncatedPolicy};

    fn reference() -> SpecialModel {
        SpecialModel::new(0.8, 0.3, 0.5, 0.3).unwrap()
    }

    fn threshold(o: Orientation, t: f64) -> Policy {
        ThresholdPolicy::new(o, Cut::At(t)).into()
    }

    #[test]
    fn reference_bound_params() {
        let bp = bound_params(&reference()).unwrap();
        assert!((bp.alpha_sup - 0.9).abs() < 1e-15);
        assert!((bp.alpha_inf - 0.44).abs() < 1e-15);
        assert_eq!(bp.l, 1);
        assert_eq!(bp.lambda, bp.alpha_sup);
    }

    #[test]
    fn caption_entropies() {
        let m = reference();
        let n = threshold_uniform_n(&m, 1e-10).unwrap();
        let h = |p: Policy| estimate_entropy(&m, &p, n).unwrap().value;
        assert!((h(ThresholdPolicy::all1().into()) - 0.3145).abs() < 5e-4);
        assert!((h(ThresholdPolicy::all0().into()) - 0.3337).abs() < 5e-4);
        assert!((h(ThresholdPolicy::region5(&m).unwrap().into()) - 0.3265).abs() < 5e-4);
        assert!((h(threshold(Orientation::ZeroLeft, 0.7)) - 0.3251).abs() < 5e-4);
        assert!((h(threshold(Orientation::OneLeft, 0.42)) - 0.3275).abs() < 5e-4);
        assert!((h(threshold(Orientation::OneLeft, 0.95)) - 0.3182).abs() < 5e-4);
    }

    #[test]
    fn threshold_uniform_n_formula() {
        let m = reference();
        let n = threshold_uniform_n(&m, 1e-8).unwrap();
        let x = (1e-8f64.ln() - 16f64.ln() + 2.0 * 0.44f64.ln() + 6.0 * 0.1f64.ln()) / 0.9f64.ln();
        assert_eq!(n, x.ceil() as usize);
        let bp = bound_params(&m).unwrap();
        assert!(bp.threshold_bound(n) <= 1e-8);
        let n2 = threshold_uniform_n(&m, 5e-9).unwrap();
        let step = (2f64.ln() / 0.9f64.ln().abs()).ceil() as usize + 1;
        assert!(n2 >= n && n2 <= n + step);
        assert!(threshold_uniform_n(&m, 10.0).unwrap() >= bp.l);
    }

    #[test]
    fn adaptive_agrees_with_fixed() {
        let m = reference();
        let p: Policy = ThresholdPolicy::region5(&m).unwrap().into();
        let a = estimate_entropy_to_tolerance(&m, &p, 1e-6).unwrap();
        assert!(a.certified && a.bound <= 1e-6);
        let f = estimate_entropy(&m, &p, threshold_uniform_n(&m, 1e-12).unwrap()).unwrap();
        assert!((a.value - f.value).abs() < 2e-6);
        let b = estimate_entropy_to_tolerance(&m, &p, 1e-7).unwrap();
        assert!((a.value - b.value).abs() <= 1e-6 + 1e-7);
    }

    #[test]
    fn iteration_cap_is_flagged() {
        let m = reference();
        let p: Policy = ThresholdPolicy::all1().into();
        let opts = AdaptiveOptions {
            eps: 1e-12,
            cap: 10,
            mode: PeriodicMode::Average,
        };
        let e = estimate_adaptive(&m, &p, &opts).unwrap();
        assert!(!e.certified);
        assert!(matches!(e.into_certified(), Err(Error::IterationCap { .. })));
    }

    #[test]
    fn split_policy_is_degenerate() {
        let m = reference();
        let split: Policy = TruncatedPolicy::from_words([0, u64::MAX]).into();
        assert_eq!(estimate_entropy(&m, &split, 100), Err(Error::DegenerateDenominator));
        assert_eq!(
            estimate_entropy_to_tolerance(&m, &split, 1e-6),
            Err(Error::DegenerateDenominator)
        );
    }

    #[test]
    fn accumulators_and_q() {
        let m = reference();
        let e = estimate_entropy(&m, &ThresholdPolicy::all0().into(), 200).unwrap();
        assert!(e.i_hat[0] >= 1.0 && e.i_hat[1] >= 1.0);
        // all-A0: orbit 0 never leaves, everything from orbit 1 flows to 0
        assert_eq!(e.c_hat[0], 0.0);
        assert!((e.c_hat[1] - 1.0).abs() < 1e-8);
        assert!((e.q - e.c_hat[1] * e.i_hat[0]).abs() < 1e-15);
        let json = serde_json::to_value(&e).unwrap();
        for key in ["value", "bound", "N", "Q"] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn period_two_chain() {
        let m = reference();
        let words = [0xAAAA_AAAA_AAAA_AAAAu64 ^ u64::MAX, 0xAAAA_AAAA_AAAA_AAAAu64];
        let p: Policy = TruncatedPolicy::from_words(words).into();
        let avg = estimate_entropy_with(&m, &p, 63, PeriodicMode::Average).unwrap();
        assert!(avg.periodic);
        let lo = estimate_entropy_with(&m, &p, 63, PeriodicMode::Min).unwrap();
        let hi = estimate_entropy_with(&m, &p, 63, PeriodicMode::Max).unwrap();
        assert!(lo.value <= avg.value && avg.value <= hi.value);
        assert!(
            !estimate_entropy(&m, &ThresholdPolicy::all0().into(), 50)
                .unwrap()
                .periodic
        );
    }

    #[test]
    fn settled_tail_matches_plain_summation() {
        use crate::orbit::orbit_table;
        let cases = [
            (SpecialModel::new(0.8, 0.3, 0.5, 0.3).unwrap(), 2000),
            (SpecialModel::new(0.2, 0.3, 0.7, 0.6).unwrap(), 5000),
            (SpecialModel::new(0.95, 0.9, 0.9, 0.85).unwrap(), 20000),
        ];
        for (m, n) in cases {
            for p in [
                ThresholdPolicy::all0().into(),
                ThresholdPolicy::all1().into(),
                ThresholdPolicy::region5(&m).unwrap().into(),
                threshold(Orientation::ZeroLeft, 0.5),
                threshold(
                    Orientation::ZeroLeft,
                    0.5 * (m.fixed_points().unwrap().eta0 + m.fixed_points().unwrap().eta1),
                ),
                TruncatedPolicy::from_words([0x0123_4567_89ab_cdef, 0xfedc_ba98_7654_3210]).into(),
                TruncatedPolicy::from_words([0x5555_5555_5555_5555, 0xaaaa_aaaa_aaaa_aaaa]).into(),
            ] {
                let t = orbit_table(&m, &p, n);
                let mut acc = [[0.0; 3]; 2];
                for i in 0..2 {
                    for k in 0..=n {
                        let (z, c, g) = (t.z[i][k], t.c[i][k], t.choice[i][k]);
                        acc[i][0] += c;
                        acc[i][1] += c * entropy(z);
                        if g != i {
                            acc[i][2] += c * (1.0 - m.alpha(g, z));
                        }
                    }
                }
                let q = acc[1][2] * acc[0][0] + acc[0][2] * acc[1][0];
                let plain = (acc[1][2] * acc[0][1] + acc[0][2] * acc[1][1]) / q;
                let e = estimate_entropy(&m, &p, n).unwrap();
                assert!((e.value - plain).abs() < 1e-12, "{p}: {} vs {plain}", e.value);
                assert!((e.q - q).abs() <= 1e-12 * q);
            }
        }
    }
}
