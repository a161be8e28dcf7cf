use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Discrete distribution over collision times (or their reciprocals) with
/// an explicit mass for "no collision within the horizon".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TtcDistribution {
    /// `(value, probability)`, sorted by value, values distinct.
    pub atoms: Vec<(f64, f64)>,
    pub no_event_mass: f64,
}

impl TtcDistribution {
    /// Sorts atoms, merges exactly equal values and computes the
    /// no-event mass from the remaining probability.
    pub fn from_atoms(mut atoms: Vec<(f64, f64)>, no_event_mass: f64) -> Result<Self> {
        if atoms.iter().any(|(v, p)| !v.is_finite() || !(*p > 0.0)) || !(no_event_mass >= 0.0) {
            return Err(Error::Domain(
                "atoms need finite values and positive probabilities".into(),
            ));
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (v, p) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += p,
                _ => merged.push((v, p)),
            }
        }
        Ok(Self {
            atoms: merged,
            no_event_mass,
        })
    }

    /// Everything in the no-event mass.
    pub fn no_event() -> Self {
        Self {
            atoms: Vec::new(),
            no_event_mass: 1.0,
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum::<f64>() + self.no_event_mass
    }

    /// `F(t) = sum of p over atoms with value <= t`.
    pub fn cdf(&self, t: f64) -> f64 {
        self.atoms.iter().take_while(|a| a.0 <= t).map(|a| a.1).sum()
    }

    /// Probability mass at exactly `t`.
    pub fn pmf(&self, t: f64) -> f64 {
        self.atoms.iter().filter(|a| a.0 == t).map(|a| a.1).sum()
    }

    /// Reciprocal distribution; the no-event mass carries over unchanged
    /// (its reciprocal value is 0).
    pub fn reciprocal(&self) -> Self {
        let mut atoms: Vec<(f64, f64)> = self.atoms.iter().map(|&(v, p)| (1.0 / v, p)).collect();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self {
            atoms,
            no_event_mass: self.no_event_mass,
        }
    }

    /// `(t, F(t))` at `t = k * dt` for `k = 0..=steps`.
    pub fn cdf_grid(&self, dt: f64, steps: usize) -> Vec<(f64, f64)> {
        (0..=steps)
            .map(|k| {
                let t = k as f64 * dt;
                // atoms sit on the same grid; absorb rounding in k * dt
                (t, self.cdf(t + 1e-9 * dt))
            })
            .collect()
    }
}
