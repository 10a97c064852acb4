//! Discrete distributions of the information state.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::entropy::estimate_entropy;
use crate::error::{Error, Result};
use crate::orbit::orbit_table;
use crate::policy::Policy;
use crate::special::{entropy, SpecialModel};

/// Atoms closer than this are merged.
pub const MERGE_TOL: f64 = 1e-12;

/// Finitely many atoms `(location, mass)`, sorted by location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    atoms: Vec<(f64, f64)>,
}

impl DiscreteMeasure {
    /// Sorts and merges; zero-mass atoms are dropped.
    pub fn new(mut atoms: Vec<(f64, f64)>) -> Self {
        atoms.retain(|&(_, w)| w > 0.0);
        atoms.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (z, w) in atoms {
            match merged.last_mut() {
                Some(last) if z - last.0 <= MERGE_TOL => last.1 += w,
                _ => merged.push((z, w)),
            }
        }
        DiscreteMeasure { atoms: merged }
    }

    pub fn dirac(z: f64) -> Self {
        DiscreteMeasure { atoms: vec![(z, 1.0)] }
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    /// Scaled to total mass 1.
    pub fn normalized(mut self) -> Self {
        let total = self.total_mass();
        for a in &mut self.atoms {
            a.1 /= total;
        }
        self
    }

    /// `∫ H dμ`.
    pub fn expected_entropy(&self) -> f64 {
        self.atoms.iter().map(|&(z, w)| w * entropy(z)).sum()
    }

    /// Total mass on atoms within `tol` of any point in `points`.
    pub fn mass_near(&self, points: &[f64], tol: f64) -> f64 {
        self.atoms
            .iter()
            .filter(|(z, _)| points.iter().any(|p| (p - z).abs() <= tol))
            .map(|a| a.1)
            .sum()
    }

    /// CSV with columns `location,mass`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["location", "mass"])?;
        for (z, m) in &self.atoms {
            w.write_record([z.to_string(), m.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Invariant measure of the information chain, truncated to the first N+1
/// points of each orbit and renormalised.
pub fn invariant_measure(model: &SpecialModel, policy: &Policy, depth: usize) -> Result<DiscreteMeasure> {
    let est = estimate_entropy(model, policy, depth)?;
    let b = [est.c_hat[1] / est.q, est.c_hat[0] / est.q];
    let table = orbit_table(model, policy, depth);
    let atoms = (0..2)
        .flat_map(|i| table.z[i].iter().zip(&table.c[i]).map(move |(&z, &c)| (z, b[i] * c)))
        .collect();
    Ok(DiscreteMeasure::new(atoms).normalized())
}

/// One step of the information chain applied to a measure. Process 0
/// sends the rest of the mass to 0, process 1 sends it to 1.
pub fn evolve_measure(measure: &DiscreteMeasure, model: &SpecialModel, policy: &Policy) -> Result<DiscreteMeasure> {
    let mut atoms = Vec::with_capacity(measure.len() + 2);
    let mut reset = [0.0; 2];
    for &(z, w) in measure.atoms() {
        let g = policy.at(z)?;
        let alpha = model.alpha(g, z);
        atoms.push((model.r(g, z), w * alpha));
        reset[g] += w * (1.0 - alpha);
    }
    atoms.push((0.0, reset[0]));
    atoms.push((1.0, reset[1]));
    Ok(DiscreteMeasure::new(atoms))
}

/// Expected entropy after `steps` steps from `start`, averaged over the
/// last two steps so that period-2 chains report the mean of their limit
/// points.
pub fn power_iteration(model: &SpecialModel, policy: &Policy, start: DiscreteMeasure, steps: usize) -> Result<f64> {
    if steps < 2 {
        return Err(Error::InvalidArgument("power iteration needs at least 2 steps".into()));
    }
    let mut mu = start;
    let mut prev = 0.0;
    for _ in 0..steps {
        prev = mu.expected_entropy();
        mu = evolve_measure(&mu, model, policy)?;
    }
    Ok(0.5 * (prev + mu.expected_entropy()))
}
