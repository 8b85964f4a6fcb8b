//! Truncated multivariate power series with real coefficients.
//!
//! Coefficients are stored densely over the box `0 ≤ k_d ≤ n_d`, row-major
//! (last variable fastest). Products and transcendental functions are
//! truncated to the same box.

use crate::error::{invalid, Error, Result};

/// Upper limit on the number of stored coefficients.
pub const MAX_TERMS: usize = 1 << 24;

#[derive(Clone, Debug, PartialEq)]
pub struct PowerSeries {
    cutoffs: Vec<usize>,
    strides: Vec<usize>,
    coeffs: Vec<f64>,
}

impl PowerSeries {
    /// The zero series in `cutoffs.len()` variables truncated at degree `cutoffs[d]`.
    pub fn zeros(cutoffs: &[usize]) -> Result<Self> {
        if cutoffs.is_empty() {
            return Err(invalid("a power series needs at least one variable"));
        }
        let mut len: usize = 1;
        for &n in cutoffs {
            len = len
                .checked_mul(n + 1)
                .filter(|&l| l <= MAX_TERMS)
                .ok_or_else(|| Error::CutoffTooLarge(format!("{cutoffs:?} exceeds {MAX_TERMS} terms")))?;
        }
        let mut strides = vec![1; cutoffs.len()];
        for d in (0..cutoffs.len() - 1).rev() {
            strides[d] = strides[d + 1] * (cutoffs[d + 1] + 1);
        }
        Ok(Self {
            cutoffs: cutoffs.to_vec(),
            strides,
            coeffs: vec![0.0; len],
        })
    }

    pub fn constant(cutoffs: &[usize], c: f64) -> Result<Self> {
        let mut s = Self::zeros(cutoffs)?;
        s.coeffs[0] = c;
        Ok(s)
    }

    /// `c + s·x_d`.
    pub fn affine(cutoffs: &[usize], d: usize, c: f64, s: f64) -> Result<Self> {
        let mut out = Self::constant(cutoffs, c)?;
        if d >= cutoffs.len() {
            return Err(invalid(format!("variable {d} out of range")));
        }
        if cutoffs[d] >= 1 {
            out.coeffs[out.strides[d]] = s;
        }
        Ok(out)
    }

    pub fn cutoffs(&self) -> &[usize] {
        &self.cutoffs
    }

    pub fn vars(&self) -> usize {
        self.cutoffs.len()
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn get(&self, k: &[usize]) -> f64 {
        match self.flat(k) {
            Some(i) => self.coeffs[i],
            None => 0.0,
        }
    }

    pub fn set(&mut self, k: &[usize], v: f64) {
        if let Some(i) = self.flat(k) {
            self.coeffs[i] = v;
        }
    }

    fn flat(&self, k: &[usize]) -> Option<usize> {
        if k.len() != self.cutoffs.len() || k.iter().zip(&self.cutoffs).any(|(a, n)| a > n) {
            return None;
        }
        Some(k.iter().zip(&self.strides).map(|(a, s)| a * s).sum())
    }

    /// Multi-index of a flat position.
    pub fn index(&self, mut i: usize) -> Vec<usize> {
        self.strides
            .iter()
            .map(|s| {
                let k = i / s;
                i %= s;
                k
            })
            .collect()
    }

    fn total_degrees(&self) -> Vec<usize> {
        (0..self.coeffs.len()).map(|i| self.index(i).iter().sum()).collect()
    }

    fn check(&self, other: &Self) -> Result<()> {
        if self.cutoffs != other.cutoffs {
            return Err(Error::ShapeMismatch("power series with different truncations".into()));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let mut out = self.clone();
        for (a, b) in out.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let mut out = self.clone();
        for (a, b) in out.coeffs.iter_mut().zip(&other.coeffs) {
            *a -= b;
        }
        Ok(out)
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= s);
        out
    }

    pub fn add_constant(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.coeffs[0] += c;
        out
    }

    /// Nonzero coefficients as (multi-index, value).
    fn support(&self) -> Vec<(Vec<usize>, f64)> {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(i, c)| (self.index(i), *c))
            .collect()
    }

    /// Flat offset of `k − e`, if `e ≤ k` componentwise.
    fn minus(&self, k: &[usize], e: &[usize]) -> Option<usize> {
        let mut off = 0;
        for d in 0..k.len() {
            if e[d] > k[d] {
                return None;
            }
            off += (k[d] - e[d]) * self.strides[d];
        }
        Some(off)
    }

    /// Truncated product.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let mut out = Self::zeros(&self.cutoffs)?;
        let sparse = other.support();
        for i in 0..self.coeffs.len() {
            let a = self.coeffs[i];
            if a == 0.0 {
                continue;
            }
            let ki = self.index(i);
            'terms: for (e, b) in &sparse {
                let mut off = 0;
                for d in 0..ki.len() {
                    let s = ki[d] + e[d];
                    if s > self.cutoffs[d] {
                        continue 'terms;
                    }
                    off += s * self.strides[d];
                }
                out.coeffs[off] += a * b;
            }
        }
        Ok(out)
    }

    /// `exp(self)`, via `|k| h_k = ∑_{0<j≤k} |j| g_j h_{k−j}`.
    pub fn exp(&self) -> Result<Self> {
        let mut out = Self::zeros(&self.cutoffs)?;
        let g0 = self.coeffs[0];
        out.coeffs[0] = g0.exp();
        if !out.coeffs[0].is_finite() {
            return Err(Error::Domain(format!("exp of constant term {g0} overflows")));
        }
        let support: Vec<(Vec<usize>, f64)> = self
            .support()
            .into_iter()
            .filter(|(e, _)| e.iter().any(|&x| x > 0))
            .map(|(e, c)| {
                let deg = e.iter().sum::<usize>() as f64;
                (e, c * deg)
            })
            .collect();
        let degrees = self.total_degrees();
        for i in 1..out.coeffs.len() {
            let k = self.index(i);
            let mut acc = 0.0;
            for (e, jg) in &support {
                if let Some(off) = out.minus(&k, e) {
                    acc += jg * out.coeffs[off];
                }
            }
            out.coeffs[i] = acc / degrees[i] as f64;
        }
        Ok(out)
    }

    /// `log(self)`; the constant term must be positive.
    pub fn ln(&self) -> Result<Self> {
        let f0 = self.coeffs[0];
        if !(f0 > 0.0) {
            return Err(Error::Domain(format!("logarithm of a series with constant term {f0}")));
        }
        let mut out = Self::zeros(&self.cutoffs)?;
        out.coeffs[0] = f0.ln();
        let support: Vec<(Vec<usize>, f64)> = self
            .support()
            .into_iter()
            .filter(|(e, _)| e.iter().any(|&x| x > 0))
            .collect();
        let degrees = self.total_degrees();
        for i in 1..out.coeffs.len() {
            let k = self.index(i);
            let mut acc = degrees[i] as f64 * self.coeffs[i];
            for (e, fe) in &support {
                if let Some(off) = out.minus(&k, e) {
                    if off != 0 {
                        acc -= fe * degrees[off] as f64 * out.coeffs[off];
                    }
                }
            }
            out.coeffs[i] = acc / (f0 * degrees[i] as f64);
        }
        Ok(out)
    }

    /// `∑_j c_j ln(α_j + β_j·self)` for many `(α_j, β_j, c_j)` at once.
    pub fn sum_ln_affine(&self, terms: &[(f64, f64, f64)]) -> Result<Self> {
        let mut out = Self::zeros(&self.cutoffs)?;
        let support: Vec<(usize, Vec<usize>, f64)> = self
            .support()
            .into_iter()
            .filter(|(e, _)| e.iter().any(|&x| x > 0))
            .map(|(e, c)| {
                let d = e.iter().sum::<usize>();
                (d, e, c)
            })
            .collect();
        let degrees = self.total_degrees();
        // offsets[i][t] = flat index of k_i − e_t, if defined
        let offsets: Vec<Vec<Option<usize>>> = (0..self.coeffs.len())
            .map(|i| {
                let k = self.index(i);
                support.iter().map(|(_, e, _)| out.minus(&k, e)).collect()
            })
            .collect();
        let mut l = vec![0.0; self.coeffs.len()];
        let mut constant = Vec::with_capacity(terms.len());
        for &(alpha, beta, c) in terms {
            let f0 = alpha + beta * self.coeffs[0];
            if !(f0 > 0.0) {
                return Err(Error::Domain(format!("logarithm of a series with constant term {f0}")));
            }
            constant.push(c * f0.ln());
            l[0] = f0.ln();
            for i in 1..l.len() {
                let mut acc = degrees[i] as f64 * beta * self.coeffs[i];
                for (t, (_, _, fe)) in support.iter().enumerate() {
                    if let Some(off) = offsets[i][t] {
                        if off != 0 {
                            acc -= beta * fe * degrees[off] as f64 * l[off];
                        }
                    }
                }
                l[i] = acc / (f0 * degrees[i] as f64);
            }
            for (o, v) in out.coeffs.iter_mut().zip(&l).skip(1) {
                *o += c * v;
            }
        }
        out.coeffs[0] = neumaier_sum(&constant);
        Ok(out)
    }

    /// `self^p` for real `p`, as `exp(p ln self)`.
    pub fn powf(&self, p: f64) -> Result<Self> {
        self.ln()?.scale(p).exp()
    }

    /// Sum of all stored coefficients.
    pub fn sum(&self) -> f64 {
        self.coeffs.iter().sum()
    }
}

/// Compensated (Neumaier) summation.
pub fn neumaier_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
