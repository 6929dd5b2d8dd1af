//! Scaled-dot-product attention with and without a precision gate, and the
//! precision-weighted belief updates.
//!
//! The gated variant adds `ln π_ij` to the logits before the softmax, so each
//! key's unnormalised attention mass is multiplied by its precision. Precision
//! therefore acts before the competition between keys rather than on its
//! result. A row of constant precision is a constant logit shift, which the
//! softmax ignores: gated and baseline outputs coincide exactly.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::numerics::{ensure_finite, softmax_row, Mat};
use crate::precision::PrecisionMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionInputs {
    pub q: Mat,
    pub k: Mat,
    pub v: Mat,
}

impl AttentionInputs {
    pub fn new(q: Mat, k: Mat, v: Mat) -> Result<Self> {
        let a = Self { q, k, v };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        check_len("attention Q/K width", self.q.cols(), self.k.cols())?;
        check_len("attention K/V rows", self.k.rows(), self.v.rows())?;
        if self.q.cols() == 0 {
            return Err(Error::dim("attention key width", 1, 0));
        }
        Ok(())
    }

    /// (n queries, m keys, d key width, d_v value width)
    pub fn dims(&self) -> (usize, usize, usize, usize) {
        (self.q.rows(), self.k.rows(), self.q.cols(), self.v.cols())
    }
}

fn logits(inputs: &AttentionInputs, pi: Option<&PrecisionMatrix>) -> Result<Mat> {
    inputs.validate()?;
    let (n, m, d, _) = inputs.dims();
    let mut s = inputs.q.matmul_t(&inputs.k)?;
    let scale = 1.0 / (d as f64).sqrt();
    if let Some(pi) = pi {
        if pi.shape() != (n, m) {
            return Err(Error::dim(
                "gated_attention precision rows",
                n * m,
                pi.shape().0 * pi.shape().1,
            ));
        }
        if !pi.within_bounds() {
            return Err(Error::domain("precision matrix violates [pi_min, 1]"));
        }
    }
    for i in 0..n {
        for j in 0..m {
            let mut x = s.get(i, j) * scale;
            if let Some(pi) = pi {
                x += pi.get(i, j).ln();
            }
            s.set(i, j, x);
        }
    }
    Ok(s)
}

fn row_softmax(s: &Mat) -> Result<Mat> {
    let mut out = Vec::with_capacity(s.values().len());
    for row in s.iter_rows() {
        out.extend(softmax_row(row)?);
    }
    Ok(Mat::from_raw(s.rows(), s.cols(), out))
}

/// Row-stochastic attention weights, optionally gated by precision.
pub fn attention_weights(inputs: &AttentionInputs, pi: Option<&PrecisionMatrix>) -> Result<Mat> {
    row_softmax(&logits(inputs, pi)?)
}

pub fn baseline_attention(inputs: &AttentionInputs) -> Result<Mat> {
    attention_weights(inputs, None)?.matmul(&inputs.v)
}

/// `softmax(Q Kᵀ / √d + ln π) V`
pub fn gated_attention(inputs: &AttentionInputs, pi: &PrecisionMatrix) -> Result<Mat> {
    attention_weights(inputs, Some(pi))?.matmul(&inputs.v)
}

/// Gradients of `Σ upstream ⊙ gated_attention(Q, K, V, π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionGrads {
    pub dq: Mat,
    pub dk: Mat,
    pub dv: Mat,
    /// With respect to the precision entries themselves.
    pub dpi: Mat,
}

pub fn gated_attention_grad(
    inputs: &AttentionInputs,
    pi: &PrecisionMatrix,
    upstream: &Mat,
) -> Result<AttentionGrads> {
    let (n, m, d, dv_width) = inputs.dims();
    if upstream.shape() != (n, dv_width) {
        return Err(Error::dim(
            "gated_attention_grad upstream",
            n * dv_width,
            upstream.values().len(),
        ));
    }
    let a = attention_weights(inputs, Some(pi))?;
    let scale = 1.0 / (d as f64).sqrt();

    // dV = Aᵀ G
    let dv = a.transpose().matmul(upstream)?;
    // dA = G Vᵀ, then through the row softmax:
    // dS_ij = A_ij (dA_ij - Σ_k A_ik dA_ik)
    let da = upstream.matmul_t(&inputs.v)?;
    let mut ds = Mat::zeros(n, m);
    for i in 0..n {
        let centre: f64 = (0..m).map(|k| a.get(i, k) * da.get(i, k)).sum();
        for j in 0..m {
            ds.set(i, j, a.get(i, j) * (da.get(i, j) - centre));
        }
    }
    let mut dq = ds.matmul(&inputs.k)?;
    let mut dk = ds.transpose().matmul(&inputs.q)?;
    for x in [&mut dq, &mut dk] {
        let (r, c) = x.shape();
        for i in 0..r {
            for j in 0..c {
                x.set(i, j, x.get(i, j) * scale);
            }
        }
    }
    let mut dpi = ds;
    for i in 0..n {
        for j in 0..m {
            dpi.set(i, j, dpi.get(i, j) / pi.get(i, j));
        }
    }
    Ok(AttentionGrads { dq, dk, dv, dpi })
}

/// Internal state and the step size of its precision-weighted updates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefState {
    pub mu: Vec<f64>,
    pub learning_rate: f64,
}

impl BeliefState {
    pub fn new(mu: Vec<f64>, learning_rate: f64) -> Result<Self> {
        ensure_finite("BeliefState mu", &mu)?;
        if !(learning_rate > 0.0 && learning_rate.is_finite()) {
            return Err(Error::domain(format!(
                "learning_rate must be positive, got {learning_rate}"
            )));
        }
        Ok(Self { mu, learning_rate })
    }
}

/// `Δμ_i = lr · Σ_j π_ij e_ij`, one update per evidence row.
pub fn update_belief_active(
    b: &BeliefState,
    errors: &Mat,
    pi: &PrecisionMatrix,
) -> Result<BeliefState> {
    if errors.shape() != pi.shape() {
        return Err(Error::dim(
            "update_belief_active errors/precision",
            pi.shape().0 * pi.shape().1,
            errors.values().len(),
        ));
    }
    check_len("update_belief_active mu", b.mu.len(), errors.rows())?;
    let mu =
        b.mu.iter()
            .enumerate()
            .map(|(i, &mu_i)| {
                let drive: f64 = errors
                    .row(i)
                    .iter()
                    .zip(pi.values().row(i))
                    .map(|(e, p)| p * e)
                    .sum();
                mu_i + b.learning_rate * drive
            })
            .collect();
    Ok(BeliefState {
        mu,
        learning_rate: b.learning_rate,
    })
}

/// Single-state update `Δμ = lr · Σ_i π_i ε_i`, where `i` ranges over error
/// sources. The same scalar step is applied to every entry of `mu`.
pub fn update_belief_baseline(b: &BeliefState, errors: &[f64], pi: &[f64]) -> Result<BeliefState> {
    check_len("update_belief_baseline", errors.len(), pi.len())?;
    if let Some(p) = pi.iter().find(|&&p| p.is_nan() || p <= 0.0) {
        return Err(Error::domain(format!(
            "precision must be positive, got {p}"
        )));
    }
    let delta = b.learning_rate * errors.iter().zip(pi).map(|(e, p)| p * e).sum::<f64>();
    Ok(BeliefState {
        mu: b.mu.iter().map(|m| m + delta).collect(),
        learning_rate: b.learning_rate,
    })
}
