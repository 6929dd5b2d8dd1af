//! Active precision.
//!
//! Context sources are assembled as `C_j = C_j^internal + λ·F_j`, then every
//! (evidence, context) pair receives
//!
//! ```text
//! π_ij = min(1, max(pi_min, MOD(R_i, C_j)))
//! ```
//!
//! `pi_min` is the precision floor, not called ε because ε already denotes
//! prediction error. Rows index evidence, columns index context sources. The
//! floor guarantees no pair is ever fully silenced, and keeps `ln π` finite
//! for the attention gate.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::numerics::{ensure_finite, Mat};
use crate::tpn::{mod_transfer, RegimeParams, TransferConfig};

pub const DEFAULT_PI_MIN: f64 = 0.05;
/// Feedback is wired but inert by default.
pub const DEFAULT_LAMBDA: f64 = 0.0;

/// Internal context plus scaled feedback.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextAssembly {
    pub c_internal: Vec<f64>,
    pub feedback: Vec<f64>,
    pub lambda: f64,
}

impl ContextAssembly {
    pub fn new(c_internal: Vec<f64>, feedback: Vec<f64>, lambda: f64) -> Result<Self> {
        let a = Self {
            c_internal,
            feedback,
            lambda,
        };
        a.validate()?;
        Ok(a)
    }

    /// Context without a feedback channel.
    pub fn internal_only(c_internal: Vec<f64>) -> Self {
        let feedback = vec![0.0; c_internal.len()];
        Self {
            c_internal,
            feedback,
            lambda: DEFAULT_LAMBDA,
        }
    }

    fn validate(&self) -> Result<()> {
        check_len(
            "ContextAssembly feedback",
            self.c_internal.len(),
            self.feedback.len(),
        )?;
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::domain(format!(
                "lambda must be finite and nonnegative, got {}",
                self.lambda
            )));
        }
        ensure_finite("ContextAssembly c_internal", &self.c_internal)?;
        ensure_finite("ContextAssembly feedback", &self.feedback)
    }
}

pub fn assemble_context(a: &ContextAssembly) -> Result<Vec<f64>> {
    a.validate()?;
    Ok(a.c_internal
        .iter()
        .zip(&a.feedback)
        .map(|(c, f)| c + a.lambda * f)
        .collect())
}

/// Pairwise precisions, every entry in `[pi_min, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrecisionMatrix {
    values: Mat,
    pi_min: f64,
}

fn check_pi_min(pi_min: f64) -> Result<()> {
    if pi_min > 0.0 && pi_min < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "pi_min must lie in (0, 1), got {pi_min}"
        )))
    }
}

#[inline]
pub fn clamp_precision(raw: f64, pi_min: f64) -> f64 {
    raw.max(pi_min).min(1.0)
}

impl PrecisionMatrix {
    /// Wraps precomputed precisions, rejecting any entry outside `[pi_min, 1]`.
    pub fn new(values: Mat, pi_min: f64) -> Result<Self> {
        check_pi_min(pi_min)?;
        if let Some(bad) = values
            .values()
            .iter()
            .find(|&&v| !(pi_min..=1.0).contains(&v))
        {
            return Err(Error::domain(format!(
                "precision {bad} outside [{pi_min}, 1]"
            )));
        }
        Ok(Self { values, pi_min })
    }

    pub fn constant(rows: usize, cols: usize, value: f64, pi_min: f64) -> Result<Self> {
        Self::new(Mat::filled(rows, cols, value), pi_min)
    }

    /// Bypasses the bound check. Used by the verification harness to inject
    /// faults; never by the library itself.
    #[doc(hidden)]
    pub fn new_unchecked(values: Mat, pi_min: f64) -> Self {
        Self { values, pi_min }
    }

    pub fn values(&self) -> &Mat {
        &self.values
    }

    pub fn pi_min(&self) -> f64 {
        self.pi_min
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.shape()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values.get(i, j)
    }

    /// Largest precision in each evidence row.
    pub fn row_max(&self) -> Vec<f64> {
        self.values
            .iter_rows()
            .map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect()
    }

    /// Whether every entry respects `[pi_min, 1]`.
    pub fn within_bounds(&self) -> bool {
        self.values
            .values()
            .iter()
            .all(|&v| v >= self.pi_min && v <= 1.0)
    }

    /// Sub-matrix of the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> PrecisionMatrix {
        let cols = self.values.cols();
        let mut out = Vec::with_capacity(rows.len() * cols);
        for &i in rows {
            out.extend_from_slice(self.values.row(i));
        }
        PrecisionMatrix {
            values: Mat::from_raw(rows.len(), cols, out),
            pi_min: self.pi_min,
        }
    }
}

/// `π_ij = min(1, max(pi_min, MOD(R_i, C_j)))` for every evidence/context pair.
pub fn active_precision<R, C>(
    evidence: &[R],
    contexts: &[C],
    cfg: &TransferConfig,
    regime: &RegimeParams,
    pi_min: f64,
) -> Result<PrecisionMatrix>
where
    R: AsRef<[f64]>,
    C: AsRef<[f64]>,
{
    check_pi_min(pi_min)?;
    let d = cfg.dim();
    let mut values = Vec::with_capacity(evidence.len() * contexts.len());
    for r in evidence {
        check_len("active_precision evidence", d, r.as_ref().len())?;
        for c in contexts {
            check_len("active_precision context", d, c.as_ref().len())?;
            let m = mod_transfer(r.as_ref(), c.as_ref(), cfg, regime)?;
            if !m.is_finite() {
                return Err(Error::NonFinite("active_precision"));
            }
            values.push(clamp_precision(m, pi_min));
        }
    }
    Ok(PrecisionMatrix {
        values: Mat::from_raw(evidence.len(), contexts.len(), values),
        pi_min,
    })
}

/// Inverse-variance precision.
pub fn baseline_precision(variances: &[f64]) -> Result<Vec<f64>> {
    variances
        .iter()
        .map(|&v| {
            if v > 0.0 && v.is_finite() {
                Ok(1.0 / v)
            } else {
                Err(Error::domain(format!("variance must be positive, got {v}")))
            }
        })
        .collect()
}

/// Raw rate scaled by the fraction of evidence rows whose best precision
/// clears `retain_threshold`.
pub fn effective_rate(pi: &PrecisionMatrix, retain_threshold: f64, s_r_raw: f64) -> Result<f64> {
    if !(pi.pi_min..=1.0).contains(&retain_threshold) {
        return Err(Error::domain(format!(
            "retain_threshold {retain_threshold} outside [{}, 1]",
            pi.pi_min
        )));
    }
    let n = pi.shape().0;
    if n == 0 {
        return Ok(0.0);
    }
    let kept = pi
        .row_max()
        .into_iter()
        .filter(|&m| m >= retain_threshold)
        .count();
    Ok(s_r_raw * kept as f64 / n as f64)
}
