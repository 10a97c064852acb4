//! Orbits of the two anchor points under a policy.
//!
//! `z_0⁽ⁱ⁾ = i`, `z_{k+1}⁽ⁱ⁾ = r(z_k⁽ⁱ⁾)` and `c_0⁽ⁱ⁾ = 1`,
//! `c_{k+1}⁽ⁱ⁾ = α(z_k⁽ⁱ⁾) c_k⁽ⁱ⁾`, where `r` and `α` are the combined
//! functions of the policy. Up to normalisation the `c`'s are the masses
//! the invariant measure puts on the orbit points.

use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::policy::Policy;
use crate::special::SpecialModel;

/// `r₀(z)` or `r₁(z)` depending on the policy's choice at `z`.
pub fn combined_r(model: &SpecialModel, policy: &Policy, z: f64) -> Result<f64> {
    Ok(model.r(policy.at(z)?, z))
}

pub fn combined_alpha(model: &SpecialModel, policy: &Policy, z: f64) -> Result<f64> {
    Ok(model.alpha(policy.at(z)?, z))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrbitTable {
    /// `z[i][k]` for k = 0..=N.
    pub z: [Vec<f64>; 2],
    pub c: [Vec<f64>; 2],
    /// Process chosen at each orbit point.
    pub choice: [Vec<usize>; 2],
}

impl OrbitTable {
    pub fn depth(&self) -> usize {
        self.z[0].len() - 1
    }

    /// Mass that has left orbit `i` within the first N+1 steps,
    /// `Σ_k c_k (1 − α(z_k))`.
    pub fn escaped_mass(&self, model: &SpecialModel, orbit: usize) -> f64 {
        (0..self.z[orbit].len())
            .map(|k| self.c[orbit][k] * (1.0 - model.alpha(self.choice[orbit][k], self.z[orbit][k])))
            .sum()
    }

    /// CSV with columns `i,k,z,c`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["i", "k", "z", "c"])?;
        for i in 0..2 {
            for k in 0..self.z[i].len() {
                w.write_record([
                    i.to_string(),
                    k.to_string(),
                    self.z[i][k].to_string(),
                    self.c[i][k].to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// First N+1 points of both orbits.
pub fn orbit_table(model: &SpecialModel, policy: &Policy, depth: usize) -> OrbitTable {
    let mut table = OrbitTable {
        z: [Vec::with_capacity(depth + 1), Vec::with_capacity(depth + 1)],
        c: [Vec::with_capacity(depth + 1), Vec::with_capacity(depth + 1)],
        choice: [Vec::with_capacity(depth + 1), Vec::with_capacity(depth + 1)],
    };
    for orbit in 0..2 {
        let (mut z, mut c) = (orbit as f64, 1.0);
        for k in 0..=depth {
            let g = policy.on_orbit(orbit, k, z);
            table.z[orbit].push(z);
            table.c[orbit].push(c);
            table.choice[orbit].push(g);
            c *= model.alpha(g, z);
            z = model.r(g, z);
        }
    }
    table
}
