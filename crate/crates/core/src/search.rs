//! Optimal threshold policies.
//!
//! For a fixed orientation, two thresholds give equivalent policies when
//! no orbit point of either policy lies between them. Starting from `1⁺`
//! and repeatedly moving the threshold to the largest orbit point below it
//! therefore visits every equivalence class exactly once. The classes of
//! both orientations together form a circle: `[A₀)[A₁]` runs from all-A₀ to
//! all-A₁ and `[A₁)[A₀]` runs back.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::entropy::{estimate_recording, threshold_uniform_n, EntropyEstimate};
use crate::error::{Error, Result};
use crate::policy::{Cut, Orientation, Policy, ThresholdPolicy};
use crate::special::SpecialModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RegionLabel {
    I,
    II,
    III,
    IV,
    V,
    VI,
}

impl RegionLabel {
    pub const ALL: [RegionLabel; 6] = [
        RegionLabel::I,
        RegionLabel::II,
        RegionLabel::III,
        RegionLabel::IV,
        RegionLabel::V,
        RegionLabel::VI,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RegionLabel::I => "I",
            RegionLabel::II => "II",
            RegionLabel::III => "III",
            RegionLabel::IV => "IV",
            RegionLabel::V => "V",
            RegionLabel::VI => "VI",
        }
    }
}

impl fmt::Display for RegionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RegionLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RegionLabel::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown region {s:?}")))
    }
}

pub fn classify_region(model: &SpecialModel, policy: &ThresholdPolicy) -> Result<RegionLabel> {
    let fp = model.fixed_points()?;
    let (e0, e1) = (fp.eta0, fp.eta1);
    Ok(match (policy.orientation, policy.cut) {
        (Orientation::ZeroLeft, Cut::RightEmpty) => RegionLabel::III,
        (Orientation::ZeroLeft, Cut::At(t)) if t < e1 => RegionLabel::I,
        (Orientation::ZeroLeft, Cut::At(t)) if t <= e0 => RegionLabel::II,
        (Orientation::ZeroLeft, Cut::At(_)) => RegionLabel::III,
        (Orientation::OneLeft, Cut::RightEmpty) => RegionLabel::I,
        (Orientation::OneLeft, Cut::At(t)) if t <= 0.0 => RegionLabel::III,
        (Orientation::OneLeft, Cut::At(t)) if t <= e1 => RegionLabel::IV,
        (Orientation::OneLeft, Cut::At(t)) if t < e0 => RegionLabel::V,
        (Orientation::OneLeft, Cut::At(t)) if t <= 1.0 => RegionLabel::VI,
        (Orientation::OneLeft, Cut::At(_)) => RegionLabel::I,
    })
}

/// One equivalence class of threshold policies: every threshold in
/// `(lower, cut]` gives the same policy. `lower = None` means the class
/// reaches below 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassEval {
    pub orientation: Orientation,
    pub cut: Cut,
    pub lower: Option<f64>,
    pub entropy: f64,
    pub bound: f64,
}

impl ClassEval {
    /// Length of the class interval inside [0, 1].
    pub fn width(&self) -> f64 {
        match (self.cut, self.lower) {
            (Cut::At(t), Some(l)) => (t.min(1.0) - l.max(0.0)).max(0.0),
            _ => 0.0,
        }
    }

    /// The class midpoint, or the end point for the two unbounded classes.
    pub fn representative(&self) -> ThresholdPolicy {
        let cut = match (self.cut, self.lower) {
            (Cut::At(t), Some(l)) => Cut::At(0.5 * (t + l)),
            (c, _) => c,
        };
        ThresholdPolicy::new(self.orientation, cut)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchResult {
    pub best_policy: Policy,
    pub best_entropy: EntropyEstimate,
    pub region: Option<RegionLabel>,
    pub policies_tested: usize,
    pub trace: Vec<ClassEval>,
    /// Local search only: entropy of the start, then after each accepted flip.
    pub history: Vec<f64>,
    pub seed: Option<u64>,
    /// False if a search stopped on its pass cap.
    pub converged: bool,
}

impl SearchResult {
    /// Summary JSON: policy, entropy, bound, region, policies_tested, seed.
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "policy": self.best_policy.to_string(),
            "entropy": self.best_entropy.value,
            "bound": self.best_entropy.bound,
            "N": self.best_entropy.n,
            "region": self.region.map(|r| r.as_str()),
            "policies_tested": self.policies_tested,
            "seed": self.seed,
            "converged": self.converged,
        })
    }
}

/// Walks one orientation from `1⁺` down to 0, yielding each class. `visit`
/// returns false to stop early.
fn walk_arc(
    model: &SpecialModel,
    orientation: Orientation,
    n: usize,
    mut visit: impl FnMut(&ClassEval) -> bool,
) -> Result<()> {
    let mut cut = Cut::RightEmpty;
    loop {
        let policy: Policy = ThresholdPolicy::new(orientation, cut).into();
        let (est, orbits) = estimate_recording(model, &policy, n)?;
        let lower = orbits
            .iter()
            .flatten()
            .copied()
            .filter(|&z| cut.is_left(z))
            .fold(None, |acc: Option<f64>, z| Some(acc.map_or(z, |m| m.max(z))));
        let class = ClassEval {
            orientation,
            cut,
            lower,
            entropy: est.value,
            bound: est.bound,
        };
        if !visit(&class) {
            return Ok(());
        }
        match lower {
            Some(z) => cut = Cut::At(z),
            None => return Ok(()),
        }
    }
}

/// Among classes within `2·eps` of the minimum, the widest (earliest on
/// equal width).
fn select(trace: &[ClassEval], eps: f64) -> usize {
    let min = trace.iter().map(|c| c.entropy).fold(f64::INFINITY, f64::min);
    let mut best: Option<usize> = None;
    for (j, c) in trace.iter().enumerate() {
        if c.entropy <= min + 2.0 * eps && best.is_none_or(|b| c.width() > trace[b].width()) {
            best = Some(j);
        }
    }
    best.expect("trace is never empty")
}

fn finish(model: &SpecialModel, trace: Vec<ClassEval>, n: usize, eps: f64) -> Result<SearchResult> {
    let best = &trace[select(&trace, eps)];
    let rep = best.representative();
    let (best_entropy, _) = estimate_recording(
        model,
        &Policy::from(ThresholdPolicy::new(best.orientation, best.cut)),
        n,
    )?;
    Ok(SearchResult {
        best_policy: rep.into(),
        best_entropy,
        region: Some(classify_region(model, &rep)?),
        policies_tested: trace.len(),
        trace,
        history: Vec::new(),
        seed: None,
        converged: true,
    })
}

/// Full enumeration of the threshold classes of both orientations.
pub fn find_optimal_threshold(model: &SpecialModel, eps: f64) -> Result<SearchResult> {
    let n = threshold_uniform_n(model, eps)?;
    let mut trace = Vec::new();
    for orientation in [Orientation::ZeroLeft, Orientation::OneLeft] {
        walk_arc(model, orientation, n, |c| {
            trace.push(c.clone());
            true
        })?;
    }
    finish(model, trace, n, eps)
}

/// Descent around the circle of classes. Only the leftward step is
/// available, so the walk starts at whichever arc start is descending and
/// follows the circle forward until the entropy rises above the best value
/// seen; when neither start descends it falls back to full enumeration.
pub fn find_optimal_threshold_descent(model: &SpecialModel, eps: f64) -> Result<SearchResult> {
    let n = threshold_uniform_n(model, eps)?;
    let arcs = [Orientation::ZeroLeft, Orientation::OneLeft];
    let head = |o: Orientation| -> Result<Vec<ClassEval>> {
        let mut out = Vec::new();
        walk_arc(model, o, n, |c| {
            out.push(c.clone());
            out.len() < 2
        })?;
        Ok(out)
    };
    let descending = |h: &[ClassEval]| h.len() == 2 && h[1].entropy < h[0].entropy - 2.0 * eps;
    let heads = [head(arcs[0])?, head(arcs[1])?];
    let Some(first) = (0..2).find(|&j| descending(&heads[j])) else {
        log::debug!("no descending start, enumerating");
        return find_optimal_threshold(model, eps);
    };

    let mut trace: Vec<ClassEval> = Vec::new();
    let mut best = f64::INFINITY;
    let mut rising = false;
    for step in 0..2 {
        let arc = arcs[(first + step) % 2];
        walk_arc(model, arc, n, |c| {
            // the start of the second arc repeats the end of the first
            if step == 1
                && trace
                    .last()
                    .is_some_and(|l| l.lower.is_none() && c.cut == Cut::RightEmpty)
            {
                return true;
            }
            trace.push(c.clone());
            if c.entropy > best + 2.0 * eps {
                rising = true;
                return false;
            }
            best = best.min(c.entropy);
            true
        })?;
        if rising {
            break;
        }
    }
    finish(model, trace, n, eps)
}
