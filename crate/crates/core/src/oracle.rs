//! Dense brute-force references for tests and acceptance checks.
//!
//! These routines work on flattened dense matrices and call nalgebra
//! directly; they share no kernels with the block-operator path.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::covariance::GeneratorZ;
use crate::error::{Error, Result};

/// Largest flattened dimension the dense oracle accepts.
pub const DIMENSION_CAP: usize = 4000;

type M = DMatrix<Complex64>;

/// A dense Hermitian matrix over the flattened (sector × grid) index space.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseState {
    pub matrix: M,
    /// Quadrature weight of every flattened index.
    pub weights: Vec<f64>,
}

impl DenseState {
    pub fn new(matrix: M, weights: Vec<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n || weights.len() != n {
            return Err(Error::ShapeMismatch("dense state must be square with one weight per index".into()));
        }
        check_cap(n)?;
        let scale = matrix.iter().map(|z| z.norm()).fold(1.0, f64::max);
        let defect = (&matrix - matrix.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if defect > 1e-12 * scale {
            return Err(Error::InvalidInput(format!("dense state is not Hermitian (defect {defect:.3e})")));
        }
        Ok(Self { matrix, weights })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

fn check_cap(dim: usize) -> Result<()> {
    if dim > DIMENSION_CAP {
        return Err(Error::DimensionCap { dim, cap: DIMENSION_CAP });
    }
    Ok(())
}

fn eigen(m: &M) -> Result<SymmetricEigen<Complex64, nalgebra::Dyn>> {
    SymmetricEigen::try_new(m.clone(), 1e-15, 10_000).ok_or_else(|| Error::Convergence("dense eigensolver".into()))
}

/// `Γ = (e^{2Z} − 𝟙)/2` by Hermitian eigendecomposition of `Z`.
pub fn dense_covariance_exp(z: &GeneratorZ) -> Result<DenseState> {
    let dense = z.op().to_dense();
    let n = dense.nrows();
    check_cap(n)?;
    let weights = z
        .layout()
        .dofs()
        .iter()
        .chain(z.layout().dofs())
        .flat_map(|d| d.grid.weights().to_vec())
        .collect();
    let eig = eigen(&dense)?;
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= Complex64::new((2.0 * eig.eigenvalues[j]).exp_m1() / 2.0, 0.0);
    }
    let mut gamma = scaled * v.adjoint();
    // Symmetrize away rounding.
    gamma = (&gamma + gamma.adjoint()) * Complex64::new(0.5, 0.0);
    DenseState::new(gamma, weights)
}

/// `ln |det(𝟙 + K)|` by LU factorization.
pub fn dense_log_det(k: &M) -> Result<f64> {
    let n = k.nrows();
    if k.ncols() != n {
        return Err(Error::ShapeMismatch("operand must be square".into()));
    }
    check_cap(n)?;
    let a = M::identity(n, n) + k;
    let lu = a.lu();
    let mut acc = 0.0;
    for i in 0..n {
        let d = lu.u()[(i, i)].norm();
        if d == 0.0 {
            return Err(Error::Singular);
        }
        acc += d.ln();
    }
    Ok(acc)
}

/// Eigenvalues (descending) of the principal submatrix on `mask`.
pub fn dense_projection_eigs(state: &DenseState, mask: &[usize]) -> Result<Vec<f64>> {
    if mask.is_empty() {
        return Ok(Vec::new());
    }
    if let Some(&bad) = mask.iter().find(|&&i| i >= state.dim()) {
        return Err(Error::ShapeMismatch(format!("mask index {bad} out of range")));
    }
    let sub = M::from_fn(mask.len(), mask.len(), |i, j| state.matrix[(mask[i], mask[j])]);
    let mut vals: Vec<f64> = eigen(&sub)?.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| b.total_cmp(a));
    Ok(vals)
}

/// Eigenvalues (descending) of a dense Hermitian matrix.
pub fn dense_eigenvalues(m: &M) -> Result<Vec<f64>> {
    check_cap(m.nrows())?;
    let mut vals: Vec<f64> = eigen(m)?.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| b.total_cmp(a));
    Ok(vals)
}

/// Joint photon-number distribution of a two-mode squeezed vacuum with
/// squeezing `σ` (so `⟨n⟩ = sinh²(σ/2)` per arm) after field transmittivity
/// `η` on both arms; entry `[a][b]` for `a, b ≤ n_max`.
pub fn tmsv_statistics(sigma: f64, eta: f64, n_max: usize) -> Vec<Vec<f64>> {
    let t2 = (sigma / 2.0).tanh().powi(2);
    let surv = eta * eta;
    let mut out = vec![vec![0.0; n_max + 1]; n_max + 1];
    // Pair-number distribution, summed until negligible.
    let mut n = 0usize;
    let mut pn = 1.0 - t2;
    loop {
        let thin = binomial_row(n, surv);
        for a in 0..=n.min(n_max) {
            for b in 0..=n.min(n_max) {
                out[a][b] += pn * thin[a] * thin[b];
            }
        }
        n += 1;
        pn *= t2;
        if pn < 1e-300 || (n > n_max && pn < 1e-18) {
            break;
        }
    }
    out
}

/// `C(n, k) pᵏ (1 − p)^{n−k}` for `k = 0..=n`.
fn binomial_row(n: usize, p: f64) -> Vec<f64> {
    let mut row = vec![0.0; n + 1];
    row[0] = 1.0;
    for _ in 0..n {
        for k in (0..row.len()).rev() {
            let keep = row[k] * (1.0 - p);
            let gain = if k > 0 { row[k - 1] * p } else { 0.0 };
            row[k] = keep + gain;
        }
    }
    row
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_det_of_diagonal() {
        let k = M::from_diagonal(&nalgebra::DVector::from_vec(vec![Complex64::new(0.5, 0.0), Complex64::new(-0.25, 0.0)]));
        assert!((dense_log_det(&k).unwrap() - (1.5f64.ln() + 0.75f64.ln())).abs() < 1e-15);
        assert_eq!(dense_log_det(&M::zeros(3, 3)).unwrap(), 0.0);
        let neg = M::from_diagonal_element(1, 1, Complex64::new(-1.0, 0.0));
        assert!(matches!(dense_log_det(&neg), Err(Error::Singular)));
    }

    #[test]
    fn tmsv_oracle_basics() {
        let vac = tmsv_statistics(0.0, 0.7, 3);
        assert_eq!(vac[0][0], 1.0);
        let lossless = tmsv_statistics(0.8, 1.0, 5);
        for a in 0..=5 {
            for b in 0..=5 {
                if a != b {
                    assert!(lossless[a][b].abs() < 1e-16);
                }
            }
        }
        let lossy = tmsv_statistics(0.4, 0.7, 30);
        let total: f64 = lossy.iter().flatten().sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn projection_eigs_on_full_and_empty_masks() {
        let m = M::from_fn(3, 3, |i, j| Complex64::new(if i == j { i as f64 } else { 0.1 }, 0.0));
        let s = DenseState::new(m.clone(), vec![1.0; 3]).unwrap();
        assert!(dense_projection_eigs(&s, &[]).unwrap().is_empty());
        let full = dense_projection_eigs(&s, &[0, 1, 2]).unwrap();
        let direct = dense_eigenvalues(&m).unwrap();
        for (a, b) in full.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(DenseState::new(M::zeros(5000, 1), vec![]).is_err());
    }
}
