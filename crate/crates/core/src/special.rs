//! Two states, two observation processes, each process seeing one state
//! perfectly:
//!
//! ```text
//! T = | a    1-a |   M0 = | 1  0   |   M1 = | 1-q  q |
//!     | 1-b  b   |        | p  1-p |        | 0    1 |
//! ```
//!
//! The information state is the scalar `z ∈ [0,1]`, the mass on state 0.
//! Process 0 either resets `z` to 0 (with probability `1 − α₀(z)`) or moves
//! it to `r₀(z)`; process 1 either resets it to 1 or moves it to `r₁(z)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hmm::GeneralModel;

/// Tolerance for rejecting `a + b = 1`.
pub const DEGENERATE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpecial", into = "RawSpecial")]
pub struct SpecialModel {
    a: f64,
    b: f64,
    p: f64,
    q: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct RawSpecial {
    a: f64,
    b: f64,
    p: f64,
    q: f64,
}

impl TryFrom<RawSpecial> for SpecialModel {
    type Error = Error;

    fn try_from(r: RawSpecial) -> Result<Self> {
        SpecialModel::new(r.a, r.b, r.p, r.q)
    }
}

impl From<SpecialModel> for RawSpecial {
    fn from(s: SpecialModel) -> Self {
        RawSpecial {
            a: s.a,
            b: s.b,
            p: s.p,
            q: s.q,
        }
    }
}

impl SpecialModel {
    pub fn new(a: f64, b: f64, p: f64, q: f64) -> Result<Self> {
        for (name, v) in [("a", a), ("b", b), ("p", p), ("q", q)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidModel(format!("{name}={v} not in (0,1)")));
            }
        }
        if (a + b - 1.0).abs() < DEGENERATE_TOL {
            return Err(Error::InvalidModel(format!("a+b=1 (a={a}, b={b})")));
        }
        Ok(SpecialModel { a, b, p, q })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// `a + b − 1`, the sign of which fixes the direction of r₀ and r₁.
    #[inline]
    pub fn drift(&self) -> f64 {
        self.a + self.b - 1.0
    }

    /// Relabelled model (states swapped, processes swapped).
    pub fn mirrored(&self) -> SpecialModel {
        SpecialModel {
            a: self.b,
            b: self.a,
            p: self.q,
            q: self.p,
        }
    }

    /// Same model in the general representation, 0-based.
    pub fn to_general(&self) -> GeneralModel {
        let (a, b, p, q) = (self.a, self.b, self.p, self.q);
        GeneralModel::new(
            2,
            2,
            2,
            vec![a, 1.0 - a, 1.0 - b, b],
            vec![vec![1.0, 0.0, p, 1.0 - p], vec![1.0 - q, q, 0.0, 1.0]],
        )
        .expect("special-case matrices are stochastic")
    }

    #[inline]
    pub fn alpha0(&self, z: f64) -> f64 {
        (1.0 - self.p) * self.drift() * z + 1.0 - self.b + self.p * self.b
    }

    #[inline]
    pub fn alpha1(&self, z: f64) -> f64 {
        (1.0 - self.q) * (1.0 - self.a - self.b) * z + self.b + self.q - self.b * self.q
    }

    #[inline]
    pub fn r0(&self, z: f64) -> f64 {
        (self.drift() * z + 1.0 - self.b) / self.alpha0(z)
    }

    #[inline]
    pub fn r1(&self, z: f64) -> f64 {
        (self.q * self.drift() * z + self.q - self.q * self.b) / self.alpha1(z)
    }

    /// α of process `proc` (0 or 1).
    #[inline]
    pub fn alpha(&self, proc: usize, z: f64) -> f64 {
        if proc == 0 {
            self.alpha0(z)
        } else {
            self.alpha1(z)
        }
    }

    /// r of process `proc` (0 or 1).
    #[inline]
    pub fn r(&self, proc: usize, z: f64) -> f64 {
        if proc == 0 {
            self.r0(z)
        } else {
            self.r1(z)
        }
    }

    /// `sup_{i,z} α_i(z)`. The α's are linear in z, so the extremes sit at
    /// the endpoints.
    pub fn alpha_sup(&self) -> f64 {
        1.0 - self.reset_probabilities().into_iter().fold(f64::INFINITY, f64::min)
    }

    /// `inf_{i,z} α_i(z)`.
    pub fn alpha_inf(&self) -> f64 {
        1.0 - self.reset_probabilities().into_iter().fold(0.0, f64::max)
    }

    /// `1 − α_i` at the endpoints: b(1−p), (1−a)(1−p), (1−b)(1−q), a(1−q).
    fn reset_probabilities(&self) -> [f64; 4] {
        let (a, b, p, q) = (self.a, self.b, self.p, self.q);
        [
            b * (1.0 - p),
            (1.0 - a) * (1.0 - p),
            (1.0 - b) * (1.0 - q),
            a * (1.0 - q),
        ]
    }

    /// Unique fixed points of r₀ and r₁ in (0,1).
    pub fn fixed_points(&self) -> Result<FixedPoints> {
        let d = self.drift();
        let (b, p, q) = (self.b, self.p, self.q);
        // r0(z) = z  <=>  (1-p)d z² + (1-b+pb-d) z - (1-b) = 0
        let eta0 =
            unit_root((1.0 - p) * d, 1.0 - b + p * b - d, -(1.0 - b)).ok_or(Error::NumericalFailure { proc: 0 })?;
        // r1(z) = z  <=>  -(1-q)d z² + (b+q-bq-qd) z - q(1-b) = 0
        let eta1 = unit_root(-(1.0 - q) * d, b + q - b * q - q * d, -q * (1.0 - b))
            .ok_or(Error::NumericalFailure { proc: 1 })?;
        Ok(FixedPoints { eta0, eta1 })
    }
}

/// Root of `A z² + B z + C` in (0,1), computed without cancellation.
fn unit_root(qa: f64, qb: f64, qc: f64) -> Option<f64> {
    const SLACK: f64 = 1e-9;
    let roots: Vec<f64> = if qa.abs() < 1e-300 {
        vec![-qc / qb]
    } else {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc < 0.0 {
            return None;
        }
        let t = -0.5 * (qb + qb.signum() * disc.sqrt());
        if t == 0.0 {
            vec![0.0]
        } else {
            vec![t / qa, qc / t]
        }
    };
    roots
        .into_iter()
        .filter(|z| *z > -SLACK && *z < 1.0 + SLACK)
        .map(|z| z.clamp(0.0, 1.0))
        .min_by(|x, y| (x - 0.5).abs().total_cmp(&(y - 0.5).abs()))
}

/// Attracting fixed points of r₀ and r₁; always `eta1 < eta0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPoints {
    pub eta0: f64,
    pub eta1: f64,
}

/// Binary entropy in nats, `H(0) = H(1) = 0`.
#[inline]
pub fn entropy(z: f64) -> f64 {
    if z <= 0.0 || z >= 1.0 {
        0.0
    } else {
        -z * z.ln() - (1.0 - z) * (1.0 - z).ln()
    }
}
