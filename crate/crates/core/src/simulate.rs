//! Monte Carlo simulation of the hidden chain, the chosen observation
//! processes and the information-state filter.

use std::io::Write;

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hmm::{GeneralModel, InfoState};
use crate::policy::Policy;

/// Anything that picks an observation process from an information state.
pub trait InfoPolicy {
    fn choose(&self, z: &InfoState) -> Result<usize>;
}

/// Two-state policies act on the mass at state 0.
impl InfoPolicy for Policy {
    fn choose(&self, z: &InfoState) -> Result<usize> {
        if z.len() != 2 {
            return Err(Error::InvalidArgument("scalar policy needs a two-state model".into()));
        }
        self.at(z[0])
    }
}

impl<F: Fn(&InfoState) -> usize> InfoPolicy for F {
    fn choose(&self, z: &InfoState) -> Result<usize> {
        Ok(self(z))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub steps: usize,
    pub seed: u64,
    pub x0: usize,
    /// Fraction of the trace discarded before averaging.
    pub burn_in: f64,
    /// Number of batches for the standard error.
    pub batches: usize,
}

impl SimOptions {
    pub fn new(steps: usize, seed: u64, x0: usize) -> Self {
        SimOptions {
            steps,
            seed,
            x0,
            burn_in: 0.5,
            batches: 50,
        }
    }
}

/// Index `t` of each vector holds time `t + 1`; time 0 is `x0` and
/// `initial`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationTrace {
    pub x0: usize,
    pub initial: InfoState,
    pub states: Vec<usize>,
    pub obs: Vec<usize>,
    pub proc_indices: Vec<usize>,
    pub info_states: Vec<InfoState>,
    pub empirical_entropy_mean: f64,
    /// Batch-means standard error of `empirical_entropy_mean`.
    pub entropy_std_error: f64,
    /// Fraction of post-burn-in time spent in each hidden state.
    pub empirical_state_hist: Vec<f64>,
    pub seed: u64,
}

impl SimulationTrace {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// CSV with columns `t,x,i,y,z0..z{n-1}`; the t = 0 row has empty `i`, `y`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let n = self.initial.len();
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string(), "x".into(), "i".into(), "y".into()];
        header.extend((0..n).map(|j| format!("z{j}")));
        w.write_record(&header)?;
        let row = |t: usize, x: usize, iy: Option<(usize, usize)>, z: &InfoState| {
            let mut r = vec![t.to_string(), x.to_string()];
            match iy {
                Some((i, y)) => r.extend([i.to_string(), y.to_string()]),
                None => r.extend([String::new(), String::new()]),
            }
            r.extend(z.as_slice().iter().map(|v| v.to_string()));
            r
        };
        w.write_record(row(0, self.x0, None, &self.initial))?;
        for t in 0..self.len() {
            w.write_record(row(
                t + 1,
                self.states[t],
                Some((self.proc_indices[t], self.obs[t])),
                &self.info_states[t],
            ))?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn simulate<P: InfoPolicy + ?Sized>(
    model: &GeneralModel,
    policy: &P,
    steps: usize,
    seed: u64,
    x0: usize,
) -> Result<SimulationTrace> {
    simulate_with(model, policy, &SimOptions::new(steps, seed, x0))
}

pub fn simulate_with<P: InfoPolicy + ?Sized>(
    model: &GeneralModel,
    policy: &P,
    opts: &SimOptions,
) -> Result<SimulationTrace> {
    let n = model.n();
    if opts.steps < 1 {
        return Err(Error::InvalidArgument("steps must be at least 1".into()));
    }
    if opts.x0 >= n {
        return Err(Error::InvalidArgument(format!("x0={} out of range", opts.x0)));
    }
    if !(0.0..1.0).contains(&opts.burn_in) {
        return Err(Error::InvalidArgument(format!(
            "burn-in fraction {} not in [0,1)",
            opts.burn_in
        )));
    }
    let weighted = |w: Vec<f64>| WeightedIndex::new(w).map_err(|e| Error::InvalidModel(e.to_string()));
    let rows: Vec<WeightedIndex<f64>> = (0..n)
        .map(|x| weighted((0..n).map(|j| model.transition(x, j)).collect()))
        .collect::<Result<_>>()?;
    let emissions: Vec<Vec<WeightedIndex<f64>>> = (0..model.num_procs())
        .map(|i| {
            (0..n)
                .map(|x| weighted((0..model.m()).map(|y| model.observation(i, x, y)).collect()))
                .collect::<Result<_>>()
        })
        .collect::<Result<_>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let initial = InfoState::dirac(n, opts.x0);
    let mut trace = SimulationTrace {
        x0: opts.x0,
        initial: initial.clone(),
        states: Vec::with_capacity(opts.steps),
        obs: Vec::with_capacity(opts.steps),
        proc_indices: Vec::with_capacity(opts.steps),
        info_states: Vec::with_capacity(opts.steps),
        empirical_entropy_mean: 0.0,
        entropy_std_error: 0.0,
        empirical_state_hist: vec![0.0; n],
        seed: opts.seed,
    };
    let (mut x, mut z) = (opts.x0, initial);
    for _ in 0..opts.steps {
        let i = policy.choose(&z)?;
        if i >= model.num_procs() {
            return Err(Error::InvalidArgument(format!("policy chose process {i}")));
        }
        x = rows[x].sample(&mut rng);
        let y = emissions[i][x].sample(&mut rng);
        z = model.r_function(i, y, &z)?;
        trace.states.push(x);
        trace.obs.push(y);
        trace.proc_indices.push(i);
        trace.info_states.push(z.clone());
    }

    let start = ((opts.steps as f64 * opts.burn_in) as usize).min(opts.steps - 1);
    let window: Vec<f64> = trace.info_states[start..].iter().map(InfoState::entropy).collect();
    trace.empirical_entropy_mean = window.iter().sum::<f64>() / window.len() as f64;
    trace.entropy_std_error = batch_std_error(&window, opts.batches);
    for &s in &trace.states[start..] {
        trace.empirical_state_hist[s] += 1.0 / window.len() as f64;
    }
    Ok(trace)
}

/// Standard error of the mean from non-overlapping batch means.
fn batch_std_error(xs: &[f64], batches: usize) -> f64 {
    let size = xs.len() / batches.max(1);
    if batches < 2 || size == 0 {
        return f64::NAN;
    }
    let means: Vec<f64> = xs
        .chunks_exact(size)
        .take(batches)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    let mean = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (var / batches as f64).sqrt()
}

/// Reruns the filter over a recorded sequence of process choices and
/// observations.
pub fn filter(model: &GeneralModel, initial: &InfoState, procs: &[usize], obs: &[usize]) -> Result<Vec<InfoState>> {
    if procs.len() != obs.len() {
        return Err(Error::InvalidArgument("procs and obs differ in length".into()));
    }
    let mut z = initial.clone();
    let mut out = Vec::with_capacity(obs.len());
    for (&i, &y) in procs.iter().zip(obs) {
        z = model.r_function(i, y, &z)?;
        out.push(z.clone());
    }
    Ok(out)
}
