//! Forward kernels for the differentiable primitives.
//!
//! These are plain functions over [`Tensor`] values. The tape in
//! [`super::graph`] calls them for the forward pass and pairs each with a
//! hand-written adjoint.

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Layer-normalization epsilon used by the network.
pub const LAYER_NORM_EPS: f64 = 1e-5;

fn dim_err(op: &'static str, a: &Tensor, b: &Tensor) -> Error {
    Error::Dimension {
        op,
        left: a.shape().to_vec(),
        right: b.shape().to_vec(),
    }
}

/// `a (n x p) * b (p x q)`.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (n, p) = (a.rows(), a.cols());
    let (p2, q) = (b.rows(), b.cols());
    if p != p2 {
        return Err(dim_err("matmul", a, b));
    }
    let (ad, bd) = (a.data(), b.data());
    let mut out = vec![0.0; n * q];
    for i in 0..n {
        let orow = &mut out[i * q..(i + 1) * q];
        for k in 0..p {
            let aik = ad[i * p + k];
            if aik == 0.0 {
                continue;
            }
            let brow = &bd[k * q..(k + 1) * q];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += aik * bv;
            }
        }
    }
    Ok(Tensor::from_raw(vec![n, q], out))
}

/// `a (n x p) * b^T` where `b` is `q x p`.
pub fn matmul_t(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (n, p) = (a.rows(), a.cols());
    let (q, p2) = (b.rows(), b.cols());
    if p != p2 {
        return Err(dim_err("matmul_t", a, b));
    }
    let mut out = vec![0.0; n * q];
    for i in 0..n {
        let ar = a.row(i);
        for j in 0..q {
            out[i * q + j] = ar.iter().zip(b.row(j)).map(|(x, y)| x * y).sum();
        }
    }
    Ok(Tensor::from_raw(vec![n, q], out))
}

/// `a^T (p x n) * b` where `a` is `n x p` and `b` is `n x q`.
pub fn t_matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (n, p) = (a.rows(), a.cols());
    let (n2, q) = (b.rows(), b.cols());
    if n != n2 {
        return Err(dim_err("t_matmul", a, b));
    }
    let mut out = vec![0.0; p * q];
    for r in 0..n {
        let ar = a.row(r);
        let br = b.row(r);
        for (k, &av) in ar.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let orow = &mut out[k * q..(k + 1) * q];
            for (o, &bv) in orow.iter_mut().zip(br) {
                *o += av * bv;
            }
        }
    }
    Ok(Tensor::from_raw(vec![p, q], out))
}

/// `y = x W (+ b)` with `b` broadcast over rows.
pub fn linear(x: &Tensor, w: &Tensor, b: Option<&Tensor>) -> Result<Tensor> {
    let mut y = matmul(x, w)?;
    if let Some(b) = b {
        y = add_row(&y, b)?;
    }
    Ok(y)
}

/// Adds a row vector to every row of `x`.
pub fn add_row(x: &Tensor, b: &Tensor) -> Result<Tensor> {
    let c = x.cols();
    if b.len() != c {
        return Err(dim_err("add_row", x, b));
    }
    let mut out = x.data().to_vec();
    for row in out.chunks_mut(c) {
        for (o, bv) in row.iter_mut().zip(b.data()) {
            *o += bv;
        }
    }
    Ok(Tensor::from_raw(vec![x.rows(), c], out))
}

fn zip_same(op: &'static str, a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
    if a.len() != b.len() || a.rows() != b.rows() {
        return Err(dim_err(op, a, b));
    }
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Ok(Tensor::from_raw(a.shape().to_vec(), data))
}

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    zip_same("add", a, b, |x, y| x + y)
}

pub fn sub(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    zip_same("sub", a, b, |x, y| x - y)
}

pub fn mul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    zip_same("mul", a, b, |x, y| x * y)
}

pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| v.max(0.0))
}

fn softmax_slice(z: &[f64], out: &mut [f64]) {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for (o, &v) in out.iter_mut().zip(z) {
        *o = (v - m).exp();
        s += *o;
    }
    for o in out.iter_mut() {
        *o /= s;
    }
}

/// Softmax of a vector, computed with max subtraction.
pub fn softmax(z: &[f64]) -> Result<Vec<f64>> {
    if z.is_empty() {
        return Err(Error::Domain("softmax of an empty vector".into()));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("softmax of non-finite input".into()));
    }
    let mut out = vec![0.0; z.len()];
    softmax_slice(z, &mut out);
    Ok(out)
}

/// Row-wise softmax of a matrix.
pub fn softmax_rows(x: &Tensor) -> Tensor {
    let c = x.cols();
    let mut out = vec![0.0; x.len()];
    for (o, z) in out.chunks_mut(c).zip(x.data().chunks(c)) {
        softmax_slice(z, o);
    }
    Tensor::from_raw(x.shape().to_vec(), out)
}

/// Row-wise `log(softmax(x))`, via the log-sum-exp of each row.
pub fn log_softmax_rows(x: &Tensor) -> Tensor {
    let c = x.cols();
    let mut out = Vec::with_capacity(x.len());
    for z in x.data().chunks(c) {
        let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        out.extend(z.iter().map(|v| v - lse));
    }
    Tensor::from_raw(x.shape().to_vec(), out)
}

/// Per-row normalization statistics: `(mean, 1/sqrt(var + eps))`.
pub(crate) fn row_stats(x: &[f64], eps: f64) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, 1.0 / (var + eps).sqrt())
}

/// `gamma * (x - mean) / sqrt(var + eps) + beta` with biased variance.
pub fn layer_norm(x: &[f64], gamma: &[f64], beta: &[f64], eps: f64) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::Domain("layer_norm of an empty vector".into()));
    }
    if gamma.len() != x.len() || beta.len() != x.len() {
        return Err(Error::Dimension {
            op: "layer_norm",
            left: vec![x.len()],
            right: vec![gamma.len(), beta.len()],
        });
    }
    let (mean, inv) = row_stats(x, eps);
    Ok(x.iter()
        .zip(gamma.iter().zip(beta))
        .map(|(&v, (&g, &b))| g * (v - mean) * inv + b)
        .collect())
}

/// Row-wise layer normalization of a matrix.
pub fn layer_norm_rows(x: &Tensor, gamma: &Tensor, beta: &Tensor, eps: f64) -> Result<Tensor> {
    let c = x.cols();
    if gamma.len() != c || beta.len() != c {
        return Err(dim_err("layer_norm_rows", x, gamma));
    }
    let mut out = Vec::with_capacity(x.len());
    for row in x.data().chunks(c) {
        out.extend(layer_norm(row, gamma.data(), beta.data(), eps)?);
    }
    Ok(Tensor::from_raw(x.shape().to_vec(), out))
}

/// Column-wise concatenation of matrices with equal row counts.
pub fn concat_cols(parts: &[&Tensor]) -> Result<Tensor> {
    let first = parts.first().ok_or_else(|| Error::Domain("concat of nothing".into()))?;
    let r = first.rows();
    if let Some(bad) = parts.iter().find(|p| p.rows() != r) {
        return Err(dim_err("concat_cols", first, bad));
    }
    let total: usize = parts.iter().map(|p| p.cols()).sum();
    let mut out = Vec::with_capacity(r * total);
    for i in 0..r {
        for p in parts {
            out.extend_from_slice(p.row(i));
        }
    }
    Ok(Tensor::from_raw(vec![r, total], out))
}

/// Sum over each row, giving an `n x 1` column.
pub fn sum_rows(x: &Tensor) -> Tensor {
    let c = x.cols();
    let data = x.data().chunks(c).map(|r| r.iter().sum()).collect();
    Tensor::from_raw(vec![x.rows(), 1], data)
}

pub fn l2_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Cosine similarity; zero when either vector has zero norm.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (l2_norm(a), l2_norm(b));
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    (dot / (na * nb)).clamp(-1.0, 1.0)
}
