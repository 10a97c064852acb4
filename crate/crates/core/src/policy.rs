//! Policies for the two-state special case.
//!
//! A policy picks the observation process (0 or 1) used at the next step
//! from the current information state `z`. Threshold and tabular policies
//! are defined pointwise; a truncated policy is only defined on the orbits
//! of 0 and 1 and is indexed by orbit position.
//!
//! Wire syntax (used by the CLI and in JSON output):
//!
//! ```text
//! threshold:A0A1:T   A0 = [0,T), A1 = [T,1]      (also threshold:01:T)
//! threshold:A1A0:T   A1 = [0,T), A0 = [T,1]      (also threshold:10:T)
//! T may be `1+`, meaning the right interval is empty.
//! all0 | all1 | region5 | greedy
//! bits:HEX0:HEX1     bit k of HEXi is g(z_k^(i)), k = 0..63
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::SpecialModel;

/// Points closer than this are the same point for tabular lookup.
pub const POINT_TOL: f64 = 1e-12;

/// Which process sits on the left of the threshold. The threshold itself
/// always belongs to the right interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Orientation {
    /// `[A₀)[A₁]`
    #[serde(rename = "A0A1")]
    ZeroLeft,
    /// `[A₁)[A₀]`
    #[serde(rename = "A1A0")]
    OneLeft,
}

impl Orientation {
    /// Process used left of the threshold.
    pub fn left(self) -> usize {
        match self {
            Orientation::ZeroLeft => 0,
            Orientation::OneLeft => 1,
        }
    }

    pub fn right(self) -> usize {
        1 - self.left()
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Orientation::ZeroLeft => "A0A1",
            Orientation::OneLeft => "A1A0",
        })
    }
}

impl FromStr for Orientation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A0A1" | "01" => Ok(Orientation::ZeroLeft),
            "A1A0" | "10" => Ok(Orientation::OneLeft),
            _ => Err(Error::PolicySyntax(format!("unknown orientation {s:?}"))),
        }
    }
}

/// Threshold location. `RightEmpty` is the `1⁺` sentinel: every `z ∈ [0,1]`
/// lies left of it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Cut {
    At(f64),
    RightEmpty,
}

impl Cut {
    #[inline]
    pub fn is_left(self, z: f64) -> bool {
        match self {
            Cut::At(t) => z < t,
            Cut::RightEmpty => true,
        }
    }
}

impl fmt::Display for Cut {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cut::At(t) => write!(f, "{t}"),
            Cut::RightEmpty => f.write_str("1+"),
        }
    }
}

impl FromStr for Cut {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "1+" {
            return Ok(Cut::RightEmpty);
        }
        s.parse::<f64>()
            .ok()
            .filter(|t| t.is_finite())
            .map(Cut::At)
            .ok_or_else(|| Error::PolicySyntax(format!("bad threshold {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    pub orientation: Orientation,
    pub cut: Cut,
}

impl ThresholdPolicy {
    pub fn new(orientation: Orientation, cut: Cut) -> Self {
        ThresholdPolicy { orientation, cut }
    }

    /// Process 0 everywhere.
    pub fn all0() -> Self {
        Self::new(Orientation::ZeroLeft, Cut::RightEmpty)
    }

    /// Process 1 everywhere.
    pub fn all1() -> Self {
        Self::new(Orientation::OneLeft, Cut::RightEmpty)
    }

    /// `[A₁)[A₀]` with the threshold midway between the fixed points.
    pub fn region5(model: &SpecialModel) -> Result<Self> {
        let fp = model.fixed_points()?;
        Ok(Self::new(Orientation::OneLeft, Cut::At(0.5 * (fp.eta0 + fp.eta1))))
    }

    #[inline]
    pub fn decide(&self, z: f64) -> usize {
        if self.cut.is_left(z) {
            self.orientation.left()
        } else {
            self.orientation.right()
        }
    }
}

impl fmt::Display for ThresholdPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "threshold:{}:{}", self.orientation, self.cut)
    }
}

/// Policy given by its value on the first `N+1` points of each orbit; the
/// tail of each orbit uses the bit at `k = N`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruncatedPolicy {
    bits: [Vec<u8>; 2],
}

impl TruncatedPolicy {
    /// Number of orbit points per orbit in the 64-bit encoding (N = 63).
    pub const WIDTH: usize = 64;

    pub fn new(g0: Vec<u8>, g1: Vec<u8>) -> Result<Self> {
        if g0.is_empty() || g0.len() != g1.len() || g0.iter().chain(&g1).any(|&b| b > 1) {
            return Err(Error::InvalidArgument(
                "truncated policy needs two equal-length nonempty 0/1 sequences".into(),
            ));
        }
        Ok(TruncatedPolicy { bits: [g0, g1] })
    }

    /// Bit k of `words[i]` is `g(z_k⁽ⁱ⁾)`.
    pub fn from_words(words: [u64; 2]) -> Self {
        let unpack = |w: u64| (0..Self::WIDTH).map(|k| ((w >> k) & 1) as u8).collect();
        TruncatedPolicy {
            bits: [unpack(words[0]), unpack(words[1])],
        }
    }

    /// Packs back into two words; `None` unless N = 63.
    pub fn to_words(&self) -> Option<[u64; 2]> {
        if self.bits[0].len() != Self::WIDTH {
            return None;
        }
        let pack = |v: &[u8]| v.iter().enumerate().fold(0u64, |w, (k, &b)| w | (u64::from(b) << k));
        Some([pack(&self.bits[0]), pack(&self.bits[1])])
    }

    /// Truncation `N`: the last explicitly stored orbit index.
    pub fn depth(&self) -> usize {
        self.bits[0].len() - 1
    }

    pub fn bits(&self, orbit: usize) -> &[u8] {
        &self.bits[orbit]
    }

    pub fn flip(&mut self, orbit: usize, k: usize) {
        self.bits[orbit][k] ^= 1;
    }

    #[inline]
    pub fn on_orbit(&self, orbit: usize, k: usize) -> usize {
        let g = &self.bits[orbit];
        usize::from(g[k.min(g.len() - 1)])
    }

    /// Every orbit point stays in its own region (reducible chain).
    pub fn is_split(&self) -> bool {
        self.bits[0].iter().all(|&b| b == 0) && self.bits[1].iter().all(|&b| b == 1)
    }

    /// Truncation of a pointwise policy: evaluates it along its own orbits.
    pub fn truncate(model: &SpecialModel, policy: &Policy, depth: usize) -> Result<Self> {
        let mut bits = [Vec::with_capacity(depth + 1), Vec::with_capacity(depth + 1)];
        for (orbit, g) in bits.iter_mut().enumerate() {
            let mut z = orbit as f64;
            for _ in 0..=depth {
                let i = policy.at(z)?;
                g.push(i as u8);
                z = model.r(i, z);
            }
        }
        Ok(TruncatedPolicy { bits })
    }

    /// Pointwise version: orbit locations paired with their bits, followed
    /// until the orbit settles (or `max_len` points).
    pub fn tabulate(&self, model: &SpecialModel, max_len: usize, fallback: usize) -> TabularPolicy {
        let mut points = Vec::new();
        for orbit in 0..2 {
            let mut z = orbit as f64;
            for k in 0..max_len {
                let i = self.on_orbit(orbit, k);
                points.push((z, i));
                let next = model.r(i, z);
                if k > self.depth() && (next - z).abs() <= POINT_TOL {
                    break;
                }
                z = next;
            }
        }
        TabularPolicy::new(points, fallback)
    }
}

impl fmt::Display for TruncatedPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.to_words() {
            Some([w0, w1]) => write!(f, "bits:{w0:016x}:{w1:016x}"),
            None => {
                let s = |v: &[u8]| v.iter().map(|b| char::from(b'0' + b)).collect::<String>();
                write!(f, "bitstring:{}:{}", s(&self.bits[0]), s(&self.bits[1]))
            }
        }
    }
}

/// Explicit map from a finite point set to processes; any other point uses
/// `fallback`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularPolicy {
    points: Vec<(f64, usize)>,
    fallback: usize,
}

impl TabularPolicy {
    pub fn new(mut points: Vec<(f64, usize)>, fallback: usize) -> Self {
        points.sort_by(|x, y| x.0.total_cmp(&y.0));
        points.dedup_by(|later, earlier| (later.0 - earlier.0).abs() <= POINT_TOL);
        TabularPolicy { points, fallback }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn decide(&self, z: f64) -> usize {
        let idx = self.points.partition_point(|(x, _)| *x < z - POINT_TOL);
        match self.points.get(idx) {
            Some(&(x, i)) if (x - z).abs() <= POINT_TOL => i,
            _ => self.fallback,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Policy {
    Threshold(ThresholdPolicy),
    Truncated(TruncatedPolicy),
    Tabular(TabularPolicy),
}

impl Policy {
    /// Process used at the k-th point `z` of the orbit of `orbit`.
    #[inline]
    pub fn on_orbit(&self, orbit: usize, k: usize, z: f64) -> usize {
        match self {
            Policy::Threshold(t) => t.decide(z),
            Policy::Truncated(t) => t.on_orbit(orbit, k),
            Policy::Tabular(t) => t.decide(z),
        }
    }

    /// True when the choice on an orbit from index `k` on depends on the
    /// point alone.
    #[inline]
    pub fn depends_on_point_after(&self, k: usize) -> bool {
        match self {
            Policy::Truncated(t) => k >= t.depth(),
            _ => true,
        }
    }

    /// Process used at an arbitrary information state.
    #[inline]
    pub fn at(&self, z: f64) -> Result<usize> {
        match self {
            Policy::Threshold(t) => Ok(t.decide(z)),
            Policy::Truncated(_) => Err(Error::NotPointwise),
            Policy::Tabular(t) => Ok(t.decide(z)),
        }
    }

    /// A pointwise equivalent: truncated policies are tabulated along their
    /// orbits, others are returned as is.
    pub fn pointwise(&self, model: &SpecialModel) -> Policy {
        match self {
            Policy::Truncated(t) => Policy::Tabular(t.tabulate(model, 100_000, t.on_orbit(1, usize::MAX))),
            other => other.clone(),
        }
    }

    pub fn as_threshold(&self) -> Option<&ThresholdPolicy> {
        match self {
            Policy::Threshold(t) => Some(t),
            _ => None,
        }
    }
}

impl From<ThresholdPolicy> for Policy {
    fn from(t: ThresholdPolicy) -> Self {
        Policy::Threshold(t)
    }
}

impl From<TruncatedPolicy> for Policy {
    fn from(t: TruncatedPolicy) -> Self {
        Policy::Truncated(t)
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Policy::Threshold(t) => t.fmt(f),
            Policy::Truncated(t) => t.fmt(f),
            Policy::Tabular(t) => write!(f, "tabular:{}points", t.len()),
        }
    }
}

/// Parsed `--policy` argument. `region5` and `greedy` depend on the model
/// and are resolved with [`PolicySpec::resolve`].
#[derive(Debug, Clone, PartialEq)]
pub enum PolicySpec {
    Threshold(ThresholdPolicy),
    All0,
    All1,
    Region5,
    Greedy,
    Bits([u64; 2]),
}

impl FromStr for PolicySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        match parts.as_slice() {
            ["all0"] => Ok(PolicySpec::All0),
            ["all1"] => Ok(PolicySpec::All1),
            ["region5"] => Ok(PolicySpec::Region5),
            ["greedy"] => Ok(PolicySpec::Greedy),
            ["threshold", orient, t] => Ok(PolicySpec::Threshold(ThresholdPolicy::new(orient.parse()?, t.parse()?))),
            ["bits", w0, w1] => {
                let word = |w: &str| {
                    u64::from_str_radix(w.trim_start_matches("0x"), 16)
                        .map_err(|_| Error::PolicySyntax(format!("bad hex word {w:?}")))
                };
                Ok(PolicySpec::Bits([word(w0)?, word(w1)?]))
            }
            _ => Err(Error::PolicySyntax(format!(
                "expected threshold:ORIENT:T | all0 | all1 | region5 | greedy | bits:HEX:HEX, got {s:?}"
            ))),
        }
    }
}

impl PolicySpec {
    pub fn resolve(&self, model: &SpecialModel) -> Result<Policy> {
        Ok(match self {
            PolicySpec::Threshold(t) => Policy::Threshold(*t),
            PolicySpec::All0 => ThresholdPolicy::all0().into(),
            PolicySpec::All1 => ThresholdPolicy::all1().into(),
            PolicySpec::Region5 => ThresholdPolicy::region5(model)?.into(),
            PolicySpec::Greedy => crate::greedy::greedy_policy(model)?.into(),
            PolicySpec::Bits(w) => TruncatedPolicy::from_words(*w).into(),
        })
    }
}
