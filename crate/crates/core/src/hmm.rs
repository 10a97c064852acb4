//! General finite hidden Markov model with several observation processes.
//!
//! A model has `n` hidden states, `m` observation values and `num_procs`
//! observation processes. Exactly one process is used per step; the
//! information state (posterior over hidden states) is advanced by the
//! r-function of the process used and the value it returned, and the
//! probability of each value is given by the α-functions.
//!
//! Indexing is 0-based throughout: states `0..n`, observations `0..m`,
//! processes `0..num_procs`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on row sums when a stochastic matrix is validated.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Denominators at or below this are treated as zero-probability observations.
pub const ZERO_PROBABILITY: f64 = 1e-300;

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

/// Transition matrix `T` (`n×n`) and observation matrices `M⁽ⁱ⁾` (`n×m`),
/// all stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelFile", into = "ModelFile")]
pub struct GeneralModel {
    n: usize,
    m: usize,
    num_procs: usize,
    transition: Vec<f64>,
    observation: Vec<Vec<f64>>,
}

/// On-disk JSON layout: `{n, m, num_procs, T, M}` with row-major flat arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelFile {
    n: usize,
    m: usize,
    num_procs: usize,
    #[serde(rename = "T")]
    t: Vec<f64>,
    #[serde(rename = "M")]
    m_mats: Vec<Vec<f64>>,
}

impl TryFrom<ModelFile> for GeneralModel {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        GeneralModel::new(f.n, f.m, f.num_procs, f.t, f.m_mats)
    }
}

impl From<GeneralModel> for ModelFile {
    fn from(g: GeneralModel) -> Self {
        ModelFile {
            n: g.n,
            m: g.m,
            num_procs: g.num_procs,
            t: g.transition,
            m_mats: g.observation,
        }
    }
}

fn validate_rows(name: &str, data: &mut [f64], rows: usize, cols: usize) -> Result<()> {
    if data.len() != rows * cols {
        return Err(Error::InvalidModel(format!(
            "{name} has {} entries, expected {rows}x{cols}",
            data.len()
        )));
    }
    for (r, row) in data.chunks_mut(cols).enumerate() {
        if let Some(v) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidModel(format!(
                "{name} row {r} has entry {v} outside [0,1]"
            )));
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::InvalidModel(format!("{name} row {r} sums to {s}, not 1")));
        }
        row.iter_mut().for_each(|v| *v /= s);
    }
    Ok(())
}

impl GeneralModel {
    /// Validates stochasticity (rows sum to 1 within 1e-12, entries in
    /// [0,1]) and renormalizes every row once.
    pub fn new(
        n: usize,
        m: usize,
        num_procs: usize,
        mut transition: Vec<f64>,
        mut observation: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if n < 2 || m < 2 || num_procs < 1 {
            return Err(Error::InvalidModel(format!(
                "need n>=2, m>=2, num_procs>=1 (got n={n}, m={m}, num_procs={num_procs})"
            )));
        }
        if observation.len() != num_procs {
            return Err(Error::InvalidModel(format!(
                "expected {num_procs} observation matrices, got {}",
                observation.len()
            )));
        }
        validate_rows("T", &mut transition, n, n)?;
        for (i, mat) in observation.iter_mut().enumerate() {
            validate_rows(&format!("M[{i}]"), mat, n, m)?;
        }
        Ok(GeneralModel {
            n,
            m,
            num_procs,
            transition,
            observation,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn num_procs(&self) -> usize {
        self.num_procs
    }

    /// `T[from][to]`.
    #[inline]
    pub fn transition(&self, from: usize, to: usize) -> f64 {
        self.transition[from * self.n + to]
    }

    /// `M⁽ᵖʳᵒᶜ⁾[state][obs]`.
    #[inline]
    pub fn observation(&self, proc: usize, state: usize, obs: usize) -> f64 {
        self.observation[proc][state * self.m + obs]
    }

    fn check_indices(&self, proc: usize, obs: usize, z: &InfoState) -> Result<()> {
        if proc >= self.num_procs || obs >= self.m || z.len() != self.n {
            return Err(Error::InvalidArgument(format!(
                "process {proc}, observation {obs} or state length {} out of range",
                z.len()
            )));
        }
        Ok(())
    }

    /// One-step prediction `z·T`.
    pub fn predict(&self, z: &InfoState) -> Vec<f64> {
        (0..self.n)
            .map(|x| (0..self.n).map(|j| self.transition(j, x) * z.0[j]).sum())
            .collect()
    }

    /// The r-function: posterior over the next state given that process
    /// `proc` returned `obs`.
    pub fn r_function(&self, proc: usize, obs: usize, z: &InfoState) -> Result<InfoState> {
        self.check_indices(proc, obs, z)?;
        let pred = self.predict(z);
        let mut post: Vec<f64> = pred
            .iter()
            .enumerate()
            .map(|(x, &px)| self.observation(proc, x, obs) * px)
            .collect();
        let denominator: f64 = post.iter().sum();
        if denominator <= ZERO_PROBABILITY {
            return Err(Error::ZeroProbabilityObservation { proc, obs, denominator });
        }
        post.iter_mut().for_each(|v| *v /= denominator);
        Ok(InfoState(post))
    }

    /// The α-function `(z·T·M⁽ᵖʳᵒᶜ⁾)_obs`: probability that process `proc`
    /// returns `obs` at the next step.
    pub fn alpha_function(&self, proc: usize, obs: usize, z: &InfoState) -> f64 {
        let pred = self.predict(z);
        pred.iter()
            .enumerate()
            .map(|(x, &px)| px * self.observation(proc, x, obs))
            .sum()
    }

    /// Every `(process, state, observation)` whose observation column has a
    /// single nonzero entry, at `state`.
    pub fn find_anchor_pairs(&self) -> Vec<AnchorPair> {
        let mut pairs = Vec::new();
        for proc in 0..self.num_procs {
            for obs in 0..self.m {
                let nonzero: Vec<usize> = (0..self.n).filter(|&x| self.observation(proc, x, obs) > 0.0).collect();
                if let [state] = nonzero[..] {
                    pairs.push(AnchorPair { proc, state, obs });
                }
            }
        }
        pairs
    }

    /// Primitive transition matrix: some power `T^k`, `k ≤ n²`, is entrywise
    /// positive.
    pub fn is_ergodic(&self) -> bool {
        let n = self.n;
        let base: Vec<bool> = self.transition.iter().map(|&v| v > 0.0).collect();
        let mut power = base.clone();
        for _ in 0..n * n {
            if power.iter().all(|&b| b) {
                return true;
            }
            let mut next = vec![false; n * n];
            for i in 0..n {
                for j in 0..n {
                    next[i * n + j] = (0..n).any(|k| power[i * n + k] && base[k * n + j]);
                }
            }
            power = next;
        }
        power.iter().all(|&b| b)
    }

    /// Ergodic chain and at least one anchor pair for every process.
    pub fn is_anchored(&self) -> bool {
        let pairs = self.find_anchor_pairs();
        self.is_ergodic() && (0..self.num_procs).all(|i| pairs.iter().any(|p| p.proc == i))
    }
}

// ---------------------------------------------------------------------------
// Information state
// ---------------------------------------------------------------------------

/// Posterior distribution over the hidden states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoState(Vec<f64>);

impl InfoState {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::InvalidArgument("negative or NaN probability".into()));
        }
        let s: f64 = probs.iter().sum();
        if (s - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::InvalidArgument(format!("information state sums to {s}")));
        }
        Ok(InfoState(probs))
    }

    /// Point mass at `state`.
    pub fn dirac(n: usize, state: usize) -> Self {
        let mut v = vec![0.0; n];
        v[state] = 1.0;
        InfoState(v)
    }

    /// Two-state form: mass `z` on state 0.
    pub fn binary(z: f64) -> Self {
        InfoState(vec![z, 1.0 - z])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Natural-log entropy with `0 log 0 = 0`.
    pub fn entropy(&self) -> f64 {
        self.0.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum()
    }
}

impl std::ops::Index<usize> for InfoState {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Observation `obs` of process `proc` identifies `state` with certainty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorPair {
    pub proc: usize,
    pub state: usize,
    pub obs: usize,
}
