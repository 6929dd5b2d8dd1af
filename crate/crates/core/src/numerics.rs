//! Small dense linear algebra, stable softmax, seeded randomness and a
//! finite-difference gradient oracle.
//!
//! Everything is `f64`. Vectors are plain slices; [`Mat`] is a row-major
//! matrix that refuses non-finite entries at construction.

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Row-major dense matrix with finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl Mat {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        check_len("Mat::new", rows * cols, values.len())?;
        ensure_finite("Mat::new", &values)?;
        Ok(Self { rows, cols, values })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            values: vec![value; rows * cols],
        }
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            check_len("Mat::from_rows", cols, r.as_ref().len())?;
            values.extend_from_slice(r.as_ref());
        }
        Self::new(rows.len(), cols, values)
    }

    pub fn from_fn(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                values.push(f(i, j));
            }
        }
        Self::new(rows, cols, values)
    }

    /// Wraps values without the finiteness check. Only for internal results
    /// whose inputs were already validated.
    pub(crate) fn from_raw(rows: usize, cols: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(rows * cols, values.len());
        Self { rows, cols, values }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    #[inline]
    pub(crate) fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact panics on a zero chunk size
        let cols = self.cols.max(1);
        self.values.chunks_exact(cols).take(self.rows)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Mat {
        let mut out = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Mat) -> Result<Mat> {
        check_len("Mat::matmul", self.cols, other.rows)?;
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.values[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        Ok(out)
    }

    /// `self · otherᵀ`, i.e. all pairwise row dot products.
    pub fn matmul_t(&self, other: &Mat) -> Result<Mat> {
        check_len("Mat::matmul_t", self.cols, other.cols)?;
        let mut out = Mat::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            for j in 0..other.rows {
                out.set(i, j, dot(self.row(i), other.row(j)));
            }
        }
        Ok(out)
    }

    pub fn max_abs_diff(&self, other: &Mat) -> f64 {
        if self.shape() != other.shape() {
            return f64::INFINITY;
        }
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub fn ensure_finite(context: &'static str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(context))
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn checked_dot(context: &'static str, a: &[f64], b: &[f64]) -> Result<f64> {
    check_len(context, a.len(), b.len())?;
    Ok(dot(a, b))
}

/// Softmax with max-subtraction.
pub fn softmax_row(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::dim("softmax_row", 1, 0));
    }
    ensure_finite("softmax_row", v)?;
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = out.iter().sum();
    for x in &mut out {
        *x /= total;
    }
    Ok(out)
}

/// Root-mean-square difference between two equal-length vectors.
pub fn rms(a: &[f64], b: &[f64]) -> Result<f64> {
    check_len("rms", a.len(), b.len())?;
    if a.is_empty() {
        return Ok(0.0);
    }
    let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((sq / a.len() as f64).sqrt())
}

/// Central-difference gradient `(f(x + h e_k) - f(x - h e_k)) / 2h`.
pub fn fd_gradient<F>(f: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::domain(format!(
            "fd_gradient step must be positive, got {h}"
        )));
    }
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for k in 0..x.len() {
        let orig = probe[k];
        probe[k] = orig + h;
        let plus = f(&probe);
        probe[k] = orig - h;
        let minus = f(&probe);
        probe[k] = orig;
        if !(plus.is_finite() && minus.is_finite()) {
            return Err(Error::NonFinite("fd_gradient"));
        }
        grad.push((plus - minus) / (2.0 * h));
    }
    Ok(grad)
}

/// Seeded ChaCha8 stream. Equal seeds (and stream ids) give equal draws on
/// every platform.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    /// An independent stream under the same seed.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { seed, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of 32-bit words consumed so far.
    pub fn word_pos(&self) -> u128 {
        self.inner.get_word_pos()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.random()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random()
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Uniform integer in `0..n`. `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    /// Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    macro_rules! assert_close {
        ($a:expr, $b:expr, $tol:expr) => {{
            let (a, b): (f64, f64) = ($a, $b);
            assert!((a - b).abs() <= $tol, "{a} vs {b} (tol {})", $tol);
        }};
    }

    #[test]
    fn softmax_examples() {
        let s = softmax_row(&[0.0, 0.0, 0.0]).unwrap();
        for x in s {
            assert_close!(x, 1.0 / 3.0, 1e-15);
        }
        assert_eq!(softmax_row(&[1000.0, 1000.0]).unwrap(), vec![0.5, 0.5]);
        let s = softmax_row(&[0.0, 3f64.ln()]).unwrap();
        assert_close!(s[0], 0.25, 1e-15);
        assert_close!(s[1], 0.75, 1e-15);
    }

    #[test]
    fn softmax_rejects_empty_and_nan() {
        assert!(matches!(softmax_row(&[]), Err(Error::Dimension { .. })));
        assert!(matches!(softmax_row(&[f64::NAN]), Err(Error::NonFinite(_))));
    }

    #[test]
    fn fd_gradient_examples() {
        let g = fd_gradient(|x| x[0] * x[0], &[3.0], 1e-5).unwrap();
        assert_close!(g[0], 6.0, 1e-6);
        let g = fd_gradient(|_| 4.2, &[1.0, -2.0, 0.5], 1e-5).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
        let g = fd_gradient(|x| x.iter().sum(), &[0.3, 7.0, -1.0], 1e-5).unwrap();
        for v in g {
            assert_close!(v, 1.0, 1e-9);
        }
    }

    #[test]
    fn fd_gradient_propagates_non_finite() {
        let r = fd_gradient(|x| 1.0 / x[0], &[0.0], 1e-5);
        assert!(r.is_ok(), "1/x at 0 is finite on both sides");
        let r = fd_gradient(|x| (x[0] - 1e-5).ln(), &[0.0], 1e-5);
        assert!(matches!(r, Err(Error::NonFinite(_))));
        assert!(fd_gradient(|x| x[0], &[0.0], 0.0).is_err());
    }

    #[test]
    fn rms_examples() {
        assert_eq!(rms(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_close!(rms(&[2.0, 3.0, 4.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0, 1e-15);
        assert_close!(
            rms(&[0.0, 0.0], &[3.0, 4.0]).unwrap(),
            12.5f64.sqrt(),
            1e-15
        );
        assert!(rms(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn mat_rejects_bad_construction() {
        assert!(Mat::new(2, 2, vec![1.0; 3]).is_err());
        assert!(Mat::new(1, 2, vec![1.0, f64::INFINITY]).is_err());
        assert!(Mat::from_rows(&[vec![1.0, 2.0], vec![3.0]]).is_err());
    }

    #[test]
    fn matmul_matches_hand_product() {
        let a = Mat::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let b = Mat::from_rows(&[[5.0, 6.0], [7.0, 8.0]]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.values(), &[19.0, 22.0, 43.0, 50.0]);
        assert_eq!(a.matmul_t(&b).unwrap(), a.matmul(&b.transpose()).unwrap());
    }

    #[test]
    fn rng_streams_are_reproducible() {
        let mut a = Rng::new(7);
        let mut b = Rng::new(7);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        let mut c = Rng::with_stream(7, 1);
        let mut d = Rng::new(7);
        assert_ne!(c.next_u64(), d.next_u64());
    }

    #[test]
    fn shuffle_is_a_permutation() {
        let mut rng = Rng::new(3);
        let mut v: Vec<usize> = (0..50).collect();
        rng.shuffle(&mut v);
        let mut sorted = v.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..50).collect::<Vec<_>>());
        assert_ne!(v, sorted);
    }
}
