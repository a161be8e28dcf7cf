use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Frames at which RMSE is tabulated.
pub const DEFAULT_HORIZONS: [usize; 5] = [10, 20, 30, 40, 50];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizonRmse {
    /// 1-based frame after the last observation.
    pub frame: usize,
    /// m
    pub rmse: f64,
}

/// Displacement errors of best-mode predictions (m).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub ade: f64,
    pub fde: f64,
    pub mae: f64,
    pub rmse: f64,
    pub rmse_by_horizon: Vec<HorizonRmse>,
    pub vehicles: usize,
}

/// ADE, FDE, MAE (ℓ1), RMSE over `N` trajectories of `T_f` frames, plus
/// RMSE at each listed horizon frame that fits inside `T_f`.
pub fn compute_metrics(truth: &[Vec<[f64; 2]>], preds: &[Vec<[f64; 2]>], horizons: &[usize]) -> Result<MetricsReport> {
    if truth.is_empty() {
        return Err(Error::Contract("metrics need at least one trajectory".into()));
    }
    if truth.len() != preds.len() {
        return Err(Error::Contract(format!(
            "{} ground-truth trajectories but {} predictions",
            truth.len(),
            preds.len()
        )));
    }
    let tf = truth[0].len();
    if tf == 0 || truth.iter().chain(preds).any(|t| t.len() != tf) {
        return Err(Error::Contract(
            "all trajectories must share one non-zero length".into(),
        ));
    }
    let n = truth.len() as f64;
    let cells = n * tf as f64;
    let (mut l2, mut l1, mut sq, mut fin) = (0.0, 0.0, 0.0, 0.0);
    let mut at = vec![0.0; tf];
    for (y, p) in truth.iter().zip(preds) {
        for (t, (a, b)) in y.iter().zip(p).enumerate() {
            let (dx, dy) = (a[0] - b[0], a[1] - b[1]);
            let s = dx * dx + dy * dy;
            l2 += s.sqrt();
            l1 += dx.abs() + dy.abs();
            sq += s;
            at[t] += s;
            if t + 1 == tf {
                fin += s.sqrt();
            }
        }
    }
    Ok(MetricsReport {
        ade: l2 / cells,
        fde: fin / n,
        mae: l1 / cells,
        rmse: (sq / cells).sqrt(),
        rmse_by_horizon: horizons
            .iter()
            .filter(|&&h| h >= 1 && h <= tf)
            .map(|&h| HorizonRmse {
                frame: h,
                rmse: (at[h - 1] / n).sqrt(),
            })
            .collect(),
        vehicles: truth.len(),
    })
}
