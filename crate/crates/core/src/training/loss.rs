use crate::error::{Error, Result};
use crate::model::Forward;
use crate::numerics::{Graph, NodeId, Tensor};

/// Value of the multi-hypothesis loss and its two parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerms {
    pub total: f64,
    /// Smallest summed squared error over modes.
    pub best_of_m: f64,
    /// Mean summed squared error over modes.
    pub average: f64,
}

fn summed_squared_error(y: &[[f64; 2]], pred: &[[f64; 2]]) -> f64 {
    y.iter()
        .zip(pred)
        .map(|(a, b)| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2))
        .sum()
}

fn check(y: &[[f64; 2]], modes: &[Vec<[f64; 2]>]) -> Result<()> {
    if modes.is_empty() {
        return Err(Error::Contract("loss needs at least one mode".into()));
    }
    if let Some(m) = modes.iter().position(|m| m.len() != y.len()) {
        return Err(Error::Contract(format!(
            "mode {m} has {} frames, ground truth has {}",
            modes[m].len(),
            y.len()
        )));
    }
    Ok(())
}

/// First index of the minimum; NaN never wins.
fn argmin(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, v) in values.enumerate() {
        if v < best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// `min_m SSE_m + lambda * mean_m SSE_m` for one vehicle.
pub fn loss(y: &[[f64; 2]], modes: &[Vec<[f64; 2]>], lambda: f64) -> Result<LossTerms> {
    check(y, modes)?;
    let sse: Vec<f64> = modes.iter().map(|m| summed_squared_error(y, m)).collect();
    let best = sse[argmin(sse.iter().copied())];
    let average = sse.iter().sum::<f64>() / sse.len() as f64;
    Ok(LossTerms {
        total: best + lambda * average,
        best_of_m: best,
        average,
    })
}

/// Mode with the smallest summed Euclidean error; ties go to the lowest
/// index.
pub fn select_best_mode(y: &[[f64; 2]], modes: &[Vec<[f64; 2]>]) -> Result<usize> {
    check(y, modes)?;
    Ok(argmin(modes.iter().map(|m| {
        y.iter()
            .zip(m)
            .map(|(a, b)| (a[0] - b[0]).hypot(a[1] - b[1]))
            .sum::<f64>()
    })))
}

/// Differentiable scene loss, summed over ambient vehicles.
#[derive(Debug, Clone, Copy)]
pub struct SceneLoss {
    pub node: NodeId,
    pub best_of_m: f64,
    pub average: f64,
    pub vehicles: usize,
}

/// Builds the loss of a forward pass against the scene's ambient futures.
/// Only the arg-min mode of each vehicle receives best-of-M gradient; with
/// `ce_weight > 0` a cross-entropy term pushes the logits towards that mode.
pub fn scene_loss(
    g: &mut Graph,
    fwd: &Forward,
    future: &[Vec<[f64; 2]>],
    lambda: f64,
    ce_weight: f64,
) -> Result<Option<SceneLoss>> {
    let a = future.len().saturating_sub(1);
    if a == 0 || fwd.trajectories.is_empty() {
        return Ok(None);
    }
    let m = fwd.trajectories.len();
    let y = Tensor::from_rows(
        &future[1..]
            .iter()
            .map(|row| row.iter().flat_map(|p| [p[0], p[1]]).collect())
            .collect::<Vec<Vec<f64>>>(),
    );
    let y = g.constant(y);
    let mut cols = Vec::with_capacity(m);
    for &t in &fwd.trajectories {
        let d = g.sub(t, y)?;
        let sq = g.mul(d, d)?;
        cols.push(g.sum_rows(sq));
    }
    let errors = g.concat_cols(&cols)?;
    let ev = g.value(errors).clone();
    let mut onehot = vec![0.0; a * m];
    let mut best_sum = 0.0;
    for r in 0..a {
        let k = argmin(ev.row(r).iter().copied());
        onehot[r * m + k] = 1.0;
        best_sum += ev.get(r, k);
    }
    let average = ev.data().iter().sum::<f64>() / m as f64;
    let mask = g.constant(Tensor::matrix(a, m, onehot)?);
    let picked = g.mul(errors, mask)?;
    let best = g.sum(picked);
    let all = g.sum(errors);
    let avg = g.scale(all, lambda / m as f64);
    let mut total = g.add(best, avg)?;
    if ce_weight > 0.0 {
        let logits = fwd
            .logits
            .ok_or_else(|| Error::Contract("forward pass has no logits".into()))?;
        let logp = g.log_softmax_rows(logits);
        let chosen = g.mul(logp, mask)?;
        let nll = g.sum(chosen);
        let nll = g.scale(nll, -ce_weight);
        total = g.add(total, nll)?;
    }
    Ok(Some(SceneLoss {
        node: total,
        best_of_m: best_sum,
        average,
        vehicles: a,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(offset: f64, n: usize) -> Vec<[f64; 2]> {
        (0..n).map(|k| [k as f64, offset]).collect()
    }

    #[test]
    fn perfect_modes_give_zero() {
        let y = line(0.0, 5);
        assert_eq!(loss(&y, &[y.clone(), y.clone()], 1.0).unwrap().total, 0.0);
    }

    #[test]
    fn two_mode_example() {
        // summed squared errors 1 and 4
        let y = vec![[0.0, 0.0]];
        let modes = vec![vec![[1.0, 0.0]], vec![[0.0, 2.0]]];
        let l = loss(&y, &modes, 1.0).unwrap();
        assert!((l.total - 3.5).abs() < 1e-12);
        assert!(loss(&y, &modes, 0.0).unwrap().total <= l.total);
    }

    #[test]
    fn no_modes_is_contract_error() {
        assert!(matches!(loss(&[[0.0, 0.0]], &[], 1.0), Err(Error::Contract(_))));
    }

    #[test]
    fn best_mode_examples() {
        let y = line(0.0, 4);
        assert_eq!(
            select_best_mode(&y, &[line(1.0, 4), y.clone(), line(0.5, 4)]).unwrap(),
            1
        );
        assert_eq!(select_best_mode(&y, &[line(1.0, 4), line(1.0, 4)]).unwrap(), 0);
        // per-frame errors chosen so the sums are 2.0, 1.9, 2.1
        let y1 = vec![[0.0, 0.0]];
        let modes = vec![vec![[2.0, 0.0]], vec![[1.9, 0.0]], vec![[0.0, 2.1]]];
        assert_eq!(select_best_mode(&y1, &modes).unwrap(), 1);
    }
}
