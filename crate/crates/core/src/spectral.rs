//! Joint spectral amplitudes: discretization, marginals and Schmidt analysis.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, SVD};
use statrs::function::erf::erfc;

use crate::error::{invalid, Error, Result};
use crate::linalg::{CMatrix, C64, ZERO};

/// Normalization tolerance of a discretized amplitude.
pub const NORMALIZATION_TOL: f64 = 1e-10;

/// Schmidt coefficients with `λ_j` below this are folded into the truncation tail.
pub const LAMBDA_FLOOR: f64 = 1e-16;

/// Quadrature grid over one continuous variable (angular frequency or time).
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyGrid {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl FrequencyGrid {
    pub fn new(points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(invalid("a grid needs at least two points"));
        }
        if points.len() != weights.len() {
            return Err(invalid("points and weights differ in length"));
        }
        if points.iter().any(|p| !p.is_finite()) || points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("grid points must be finite and strictly increasing"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(invalid("quadrature weights must be strictly positive"));
        }
        Ok(Self { points, weights })
    }

    /// Uniform grid on `[lo, hi]` with trapezoidal weights.
    pub fn uniform(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 2 || !(hi > lo) {
            return Err(invalid(format!("cannot build a uniform grid on [{lo}, {hi}] with {n} points")));
        }
        let h = (hi - lo) / (n - 1) as f64;
        let points = (0..n).map(|k| lo + h * k as f64).collect();
        let mut weights = vec![h; n];
        weights[0] = h / 2.0;
        weights[n - 1] = h / 2.0;
        Self::new(points, weights)
    }

    /// Trapezoidal weights for arbitrary increasing points.
    pub fn trapezoidal(points: Vec<f64>) -> Result<Self> {
        let n = points.len();
        if n < 2 {
            return Err(invalid("a grid needs at least two points"));
        }
        let weights = (0..n)
            .map(|k| {
                let left = if k > 0 { points[k] - points[k - 1] } else { 0.0 };
                let right = if k + 1 < n { points[k + 1] - points[k] } else { 0.0 };
                (left + right) / 2.0
            })
            .collect();
        Self::new(points, weights)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn sqrt_weights(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w.sqrt()).collect()
    }

    pub fn lo(&self) -> f64 {
        self.points[0]
    }

    pub fn hi(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    /// Point spacing if the grid is uniform.
    pub fn spacing(&self) -> Option<f64> {
        let h = (self.hi() - self.lo()) / (self.len() - 1) as f64;
        let uniform = self
            .points
            .windows(2)
            .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.abs().max(1e-300));
        uniform.then_some(h)
    }
}

/// Two-dimensional Gaussian amplitude rotated by 45 degrees.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianJsaModel {
    /// Standard deviation of the density along the diagonal `ω_s + ω_i`.
    pub delta_plus: f64,
    /// Standard deviation of the density along the anti-diagonal `ω_s − ω_i`.
    pub delta_minus: f64,
    pub center_signal: f64,
    pub center_idler: f64,
}

impl GaussianJsaModel {
    pub fn new(delta_plus: f64, delta_minus: f64) -> Result<Self> {
        let m = Self {
            delta_plus,
            delta_minus,
            center_signal: 0.0,
            center_idler: 0.0,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_plus > 0.0 && self.delta_minus > 0.0) {
            return Err(invalid("Gaussian widths must be positive"));
        }
        if !(self.delta_plus.is_finite()
            && self.delta_minus.is_finite()
            && self.center_signal.is_finite()
            && self.center_idler.is_finite())
        {
            return Err(invalid("Gaussian parameters must be finite"));
        }
        Ok(())
    }

    pub fn aspect_ratio(&self) -> f64 {
        self.delta_minus / self.delta_plus
    }

    /// Standard deviation of either marginal density.
    pub fn marginal_std(&self) -> f64 {
        ((self.delta_plus.powi(2) + self.delta_minus.powi(2)) / 2.0).sqrt()
    }

    /// Square grids spanning `extent` marginal standard deviations around the
    /// centers, with `points_per_width` samples per narrowest width.
    pub fn default_grids(&self, extent: f64, points_per_width: f64) -> Result<(FrequencyGrid, FrequencyGrid)> {
        self.validate()?;
        let half = extent * self.marginal_std();
        let h = self.delta_plus.min(self.delta_minus) / points_per_width;
        let n = ((2.0 * half / h).ceil() as usize + 1).max(2);
        Ok((
            FrequencyGrid::uniform(self.center_signal - half, self.center_signal + half, n)?,
            FrequencyGrid::uniform(self.center_idler - half, self.center_idler + half, n)?,
        ))
    }

    /// Unnormalized amplitude.
    pub fn amplitude(&self, omega_s: f64, omega_i: f64) -> f64 {
        let (ds, di) = (omega_s - self.center_signal, omega_i - self.center_idler);
        let plus = (ds + di) / std::f64::consts::SQRT_2;
        let minus = (ds - di) / std::f64::consts::SQRT_2;
        (-plus * plus / (4.0 * self.delta_plus.powi(2)) - minus * minus / (4.0 * self.delta_minus.powi(2))).exp()
    }
}

/// Sampled joint spectral amplitude `ψ(ω_s, ω_i)`; rows index signal frequencies.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscretizedJsa {
    grid_signal: FrequencyGrid,
    grid_idler: FrequencyGrid,
    values: CMatrix,
}

impl DiscretizedJsa {
    /// Wraps samples that are already normalized.
    pub fn new(grid_signal: FrequencyGrid, grid_idler: FrequencyGrid, values: CMatrix) -> Result<Self> {
        let jsa = Self::unchecked(grid_signal, grid_idler, values)?;
        let norm = jsa.norm_sq();
        if (norm - 1.0).abs() > NORMALIZATION_TOL {
            return Err(invalid(format!("amplitude is not normalized (norm² = {norm})")));
        }
        Ok(jsa)
    }

    /// Rescales the samples so the quadrature-weighted norm is one.
    pub fn normalized(grid_signal: FrequencyGrid, grid_idler: FrequencyGrid, values: CMatrix) -> Result<Self> {
        let mut jsa = Self::unchecked(grid_signal, grid_idler, values)?;
        let norm = jsa.norm_sq();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(invalid("amplitude has zero or non-finite norm"));
        }
        jsa.values /= C64::new(norm.sqrt(), 0.0);
        Ok(jsa)
    }

    fn unchecked(grid_signal: FrequencyGrid, grid_idler: FrequencyGrid, values: CMatrix) -> Result<Self> {
        if values.nrows() != grid_signal.len() || values.ncols() != grid_idler.len() {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} samples on a {}x{} grid",
                values.nrows(),
                values.ncols(),
                grid_signal.len(),
                grid_idler.len()
            )));
        }
        if values.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(invalid("amplitude samples must be finite"));
        }
        Ok(Self {
            grid_signal,
            grid_idler,
            values,
        })
    }

    pub fn grid_signal(&self) -> &FrequencyGrid {
        &self.grid_signal
    }

    pub fn grid_idler(&self) -> &FrequencyGrid {
        &self.grid_idler
    }

    pub fn values(&self) -> &CMatrix {
        &self.values
    }

    /// `∑ w_m w_n |ψ_mn|²`.
    pub fn norm_sq(&self) -> f64 {
        let (ws, wi) = (self.grid_signal.weights(), self.grid_idler.weights());
        let mut acc = 0.0;
        for (m, w_m) in ws.iter().enumerate() {
            for (n, w_n) in wi.iter().enumerate() {
                acc += w_m * w_n * self.values[(m, n)].norm_sqr();
            }
        }
        acc
    }

    /// Weight-symmetrized matrix `√w_m ψ_mn √w_n`.
    pub fn weighted_matrix(&self) -> CMatrix {
        let (rs, ri) = (self.grid_signal.sqrt_weights(), self.grid_idler.sqrt_weights());
        CMatrix::from_fn(self.values.nrows(), self.values.ncols(), |m, n| {
            self.values[(m, n)] * (rs[m] * ri[n])
        })
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().all(|z| z.im == 0.0)
    }

    /// True when both axes share a grid and `ψ(ω, ω') = ψ(ω', ω)` within `tol`.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.grid_signal == self.grid_idler
            && (&self.values - self.values.transpose()).iter().all(|z| z.norm() <= tol)
    }
}

/// Samples the normalized Gaussian amplitude on the given grids.
///
/// Fails if more than `1e-8` of the density lies outside the grid rectangle
/// (union bound over the four marginal tails).
pub fn build_gaussian_jsa(
    model: &GaussianJsaModel,
    grid_signal: &FrequencyGrid,
    grid_idler: &FrequencyGrid,
) -> Result<DiscretizedJsa> {
    model.validate()?;
    let std = model.marginal_std();
    let tail = |x: f64| 0.5 * erfc(x / (std * std::f64::consts::SQRT_2));
    let outside = tail(model.center_signal - grid_signal.lo())
        + tail(grid_signal.hi() - model.center_signal)
        + tail(model.center_idler - grid_idler.lo())
        + tail(grid_idler.hi() - model.center_idler);
    if outside > 1e-8 {
        return Err(Error::GridCoverage { mass: outside });
    }
    let (ps, pi) = (grid_signal.points(), grid_idler.points());
    let values = DMatrix::from_fn(ps.len(), pi.len(), |m, n| C64::new(model.amplitude(ps[m], pi[n]), 0.0));
    DiscretizedJsa::normalized(grid_signal.clone(), grid_idler.clone(), values)
}

/// Discretized Schmidt modes (columns), sampled as functions, not weight-scaled.
#[derive(Clone, Debug, PartialEq)]
pub struct SchmidtModes {
    pub grid_signal: FrequencyGrid,
    pub grid_idler: FrequencyGrid,
    /// `u_j(ω_m)` in column `j`.
    pub signal: CMatrix,
    /// `v_j(ω_n)` in column `j`, with `ψ = ∑ √λ_j u_j v_j*`.
    pub idler: CMatrix,
}

impl SchmidtModes {
    /// Modes scaled by `√w`, i.e. orthonormal columns in the plain inner product.
    pub fn weighted(&self) -> (CMatrix, CMatrix) {
        let scale = |m: &CMatrix, g: &FrequencyGrid| {
            let r = g.sqrt_weights();
            CMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * r[i])
        };
        (scale(&self.signal, &self.grid_signal), scale(&self.idler, &self.grid_idler))
    }
}

/// Schmidt coefficients `√λ_j` in descending order.
#[derive(Clone, Debug, PartialEq)]
pub struct SchmidtSpectrum {
    coefficients: Vec<f64>,
    modes: Option<SchmidtModes>,
    truncation_tail: f64,
}

impl SchmidtSpectrum {
    pub fn new(coefficients: Vec<f64>, truncation_tail: f64) -> Result<Self> {
        if coefficients.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(invalid("Schmidt coefficients must be finite and non-negative"));
        }
        if coefficients.windows(2).any(|w| w[1] > w[0]) {
            return Err(invalid("Schmidt coefficients must be sorted descending"));
        }
        if !(truncation_tail >= 0.0) {
            return Err(invalid("truncation tail must be non-negative"));
        }
        Ok(Self {
            coefficients,
            modes: None,
            truncation_tail,
        })
    }

    pub fn with_modes(mut self, modes: SchmidtModes) -> Result<Self> {
        if modes.signal.ncols() != self.coefficients.len() || modes.idler.ncols() != self.coefficients.len() {
            return Err(Error::ShapeMismatch("mode count differs from coefficient count".into()));
        }
        self.modes = Some(modes);
        Ok(self)
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.coefficients.iter().map(|c| c * c).collect()
    }

    pub fn modes(&self) -> Option<&SchmidtModes> {
        self.modes.as_ref()
    }

    pub fn truncation_tail(&self) -> f64 {
        self.truncation_tail
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }
}

/// Closed-form Schmidt spectrum of the Gaussian amplitude with aspect ratio
/// `Δ₋/Δ₊`: `λ_j = (1 − ζ²) ζ^{2(j−1)}`, `ζ = (r − 1)/(r + 1)`.
pub fn analytic_gaussian_schmidt(aspect_ratio: f64, j_max: usize) -> Result<SchmidtSpectrum> {
    if !(aspect_ratio > 0.0 && aspect_ratio.is_finite()) {
        return Err(invalid("aspect ratio must be positive and finite"));
    }
    if j_max == 0 {
        return Err(invalid("need at least one Schmidt coefficient"));
    }
    let z2 = zeta_squared(aspect_ratio);
    let mut coefficients = Vec::with_capacity(j_max);
    let mut pow = 1.0;
    for _ in 0..j_max {
        coefficients.push(((1.0 - z2) * pow).sqrt());
        pow *= z2;
    }
    SchmidtSpectrum::new(coefficients, pow)
}

/// Analytic Gaussian spectrum truncated where `λ_j < floor · λ₁`.
pub fn analytic_gaussian_schmidt_to(aspect_ratio: f64, floor: f64) -> Result<SchmidtSpectrum> {
    let z2 = zeta_squared(aspect_ratio);
    let j_max = if z2 <= 0.0 {
        1
    } else {
        (floor.ln() / z2.ln()).ceil().max(0.0) as usize + 1
    };
    analytic_gaussian_schmidt(aspect_ratio, j_max)
}

/// `ζ²` for the Gaussian amplitude; invariant under `r → 1/r`.
pub fn zeta_squared(aspect_ratio: f64) -> f64 {
    let z = (aspect_ratio - 1.0) / (aspect_ratio + 1.0);
    z * z
}

/// Schmidt number of the Gaussian amplitude, `(1 + ζ²)/(1 − ζ²)`.
pub fn analytic_gaussian_schmidt_number(aspect_ratio: f64) -> f64 {
    let z2 = zeta_squared(aspect_ratio);
    (1.0 + z2) / (1.0 - z2)
}

/// Singular values (descending) and vectors of a complex matrix.
fn sorted_svd(m: &CMatrix) -> Result<(CMatrix, Vec<f64>, CMatrix)> {
    let is_real = m.iter().all(|z| z.im == 0.0);
    let (u, s, v) = if is_real {
        let re = m.map(|z| z.re);
        let svd = SVD::try_new(re, true, true, f64::EPSILON, 0)
            .ok_or_else(|| Error::Convergence("singular value decomposition".into()))?;
        let u = svd.u.unwrap().map(|x| C64::new(x, 0.0));
        let v = svd.v_t.unwrap().transpose().map(|x| C64::new(x, 0.0));
        (u, svd.singular_values.iter().copied().collect::<Vec<_>>(), v)
    } else {
        let svd = SVD::try_new(m.clone(), true, true, f64::EPSILON, 0)
            .ok_or_else(|| Error::Convergence("singular value decomposition".into()))?;
        let u = svd.u.unwrap();
        let v = svd.v_t.unwrap().adjoint();
        (u, svd.singular_values.iter().copied().collect::<Vec<_>>(), v)
    };
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let us = CMatrix::from_fn(u.nrows(), order.len(), |i, j| u[(i, order[j])]);
    let vs = CMatrix::from_fn(v.nrows(), order.len(), |i, j| v[(i, order[j])]);
    Ok((us, order.iter().map(|&k| s[k]).collect(), vs))
}

/// Schmidt decomposition by SVD of the weight-symmetrized amplitude matrix.
///
/// With `rank = Some(k)` the `k` leading modes are returned and the rest of
/// the norm is recorded as the truncation tail; otherwise every mode with
/// `λ_j ≥ 1e-16` is kept.
pub fn schmidt_decompose(jsa: &DiscretizedJsa, rank: Option<usize>) -> Result<SchmidtSpectrum> {
    if rank == Some(0) {
        return Err(invalid("rank must be at least one"));
    }
    let (u, s, v) = sorted_svd(&jsa.weighted_matrix())?;
    let keep = match rank {
        Some(k) => k.min(s.len()),
        None => s.iter().take_while(|x| *x * *x >= LAMBDA_FLOOR).count().max(1),
    };
    let kept: f64 = s[..keep].iter().map(|x| x * x).sum();
    let tail = (1.0 - kept).max(0.0);
    let unweight = |m: &CMatrix, g: &FrequencyGrid| {
        let r = g.sqrt_weights();
        CMatrix::from_fn(m.nrows(), keep, |i, j| m[(i, j)] / r[i])
    };
    let modes = SchmidtModes {
        signal: unweight(&u, jsa.grid_signal()),
        idler: unweight(&v, jsa.grid_idler()),
        grid_signal: jsa.grid_signal().clone(),
        grid_idler: jsa.grid_idler().clone(),
    };
    SchmidtSpectrum::new(s[..keep].to_vec(), tail)?.with_modes(modes)
}

/// Marginal densities `Ψ_s(ω_s)` and `Ψ_i(ω_i)` on their grids.
pub fn marginals(jsa: &DiscretizedJsa) -> (Vec<f64>, Vec<f64>) {
    let (ws, wi) = (jsa.grid_signal().weights(), jsa.grid_idler().weights());
    let v = jsa.values();
    let signal = (0..v.nrows())
        .map(|m| (0..v.ncols()).map(|n| wi[n] * v[(m, n)].norm_sqr()).sum())
        .collect();
    let idler = (0..v.ncols())
        .map(|n| (0..v.nrows()).map(|m| ws[m] * v[(m, n)].norm_sqr()).sum())
        .collect();
    (signal, idler)
}

/// Schmidt number `K = 1/∑ λ_j²`.
pub fn schmidt_number(spectrum: &SchmidtSpectrum) -> Result<f64> {
    let lambdas = spectrum.lambdas();
    let total: f64 = lambdas.iter().sum();
    if total > 1.0 + 1e-8 {
        return Err(invalid(format!("Schmidt weights sum to {total} > 1")));
    }
    let sq: f64 = lambdas.iter().map(|l| l * l).sum();
    if sq == 0.0 {
        return Err(invalid("Schmidt number of an all-zero spectrum"));
    }
    Ok(1.0 / sq)
}

/// Writes the amplitude as CSV with header `omega_s,omega_i,re_psi,im_psi`.
pub fn write_jsa_csv<W: Write>(jsa: &DiscretizedJsa, mut out: W) -> std::io::Result<()> {
    writeln!(out, "omega_s,omega_i,re_psi,im_psi")?;
    for (m, ws) in jsa.grid_signal().points().iter().enumerate() {
        for (n, wi) in jsa.grid_idler().points().iter().enumerate() {
            let z = jsa.values()[(m, n)];
            writeln!(out, "{ws:.16e},{wi:.16e},{:.16e},{:.16e}", z.re, z.im)?;
        }
    }
    Ok(())
}

/// Reads an amplitude written by [`write_jsa_csv`] (or any rectangular table
/// with that header). Grids are the sorted unique coordinates with
/// trapezoidal weights; the samples are renormalized.
pub fn read_jsa_csv<R: BufRead>(input: R) -> Result<DiscretizedJsa> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| invalid("empty amplitude file"))?
        .map_err(|e| invalid(e.to_string()))?;
    let cols: Vec<&str> = header.trim().split(',').map(str::trim).collect();
    if cols != ["omega_s", "omega_i", "re_psi", "im_psi"] {
        return Err(invalid(format!("unexpected header '{}'", header.trim())));
    }
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line.map_err(|e| invalid(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| invalid(format!("line {}: {e}", k + 2)))?;
        if fields.len() != 4 {
            return Err(invalid(format!("line {}: expected 4 fields", k + 2)));
        }
        rows.push([fields[0], fields[1], fields[2], fields[3]]);
    }
    let unique = |idx: usize| {
        let mut v: Vec<f64> = rows.iter().map(|r| r[idx]).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let (ps, pi) = (unique(0), unique(1));
    if ps.len() * pi.len() != rows.len() {
        return Err(invalid("amplitude table is not rectangular"));
    }
    let mut values = CMatrix::from_element(ps.len(), pi.len(), ZERO);
    let mut seen = vec![false; rows.len()];
    for r in &rows {
        let m = ps.binary_search_by(|p| p.total_cmp(&r[0])).unwrap();
        let n = pi.binary_search_by(|p| p.total_cmp(&r[1])).unwrap();
        if std::mem::replace(&mut seen[m * pi.len() + n], true) {
            return Err(invalid(format!("duplicate sample at ({}, {})", r[0], r[1])));
        }
        values[(m, n)] = C64::new(r[2], r[3]);
    }
    DiscretizedJsa::normalized(FrequencyGrid::trapezoidal(ps)?, FrequencyGrid::trapezoidal(pi)?, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn symmetric_grids(model: &GaussianJsaModel) -> (FrequencyGrid, FrequencyGrid) {
        model.default_grids(6.0, 4.0).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(FrequencyGrid::new(vec![0.0], vec![1.0]).is_err());
        assert!(FrequencyGrid::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(FrequencyGrid::new(vec![0.0, 1.0], vec![1.0, 0.0]).is_err());
        let g = FrequencyGrid::uniform(-1.0, 1.0, 5).unwrap();
        assert_eq!(g.weights(), &[0.25, 0.5, 0.5, 0.5, 0.25]);
        assert_eq!(g.spacing(), Some(0.5));
        let t = FrequencyGrid::trapezoidal(vec![0.0, 1.0, 3.0]).unwrap();
        assert_eq!(t.weights(), &[0.5, 1.5, 1.0]);
        assert_eq!(t.spacing(), None);
    }

    #[test]
    fn gaussian_is_normalized() {
        for (dp, dm) in [(1.0, 1.0), (1.0, 3.0), (2.0, 0.5)] {
            let model = GaussianJsaModel::new(dp, dm).unwrap();
            let (gs, gi) = symmetric_grids(&model);
            let jsa = build_gaussian_jsa(&model, &gs, &gi).unwrap();
            assert!((jsa.norm_sq() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn aspect_one_is_separable() {
        let model = GaussianJsaModel::new(1.0, 1.0).unwrap();
        let (gs, gi) = symmetric_grids(&model);
        let jsa = build_gaussian_jsa(&model, &gs, &gi).unwrap();
        let (ps, pi) = marginals(&jsa);
        for m in 0..gs.len() {
            for n in 0..gi.len() {
                let joint = jsa.values()[(m, n)].norm_sqr();
                assert!((joint - ps[m] * pi[n]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn narrow_grid_is_rejected() {
        let model = GaussianJsaModel::new(1.0, 3.0).unwrap();
        let g = FrequencyGrid::uniform(-4.0, 4.0, 65).unwrap();
        assert!(matches!(build_gaussian_jsa(&model, &g, &g), Err(Error::GridCoverage { .. })));
        assert!(GaussianJsaModel::new(0.0, 1.0).is_err());
    }

    #[test]
    fn analytic_spectrum_values() {
        let s = analytic_gaussian_schmidt(1.0, 4).unwrap();
        assert_eq!(s.lambdas(), vec![1.0, 0.0, 0.0, 0.0]);
        assert!((schmidt_number(&s).unwrap() - 1.0).abs() < 1e-15);

        let s = analytic_gaussian_schmidt(3.0, 5).unwrap();
        let l = s.lambdas();
        assert!((l[0] - 0.75).abs() < 1e-15);
        assert!((l[1] - 0.1875).abs() < 1e-15);
        assert!((s.truncation_tail() - 0.25f64.powi(5)).abs() < 1e-15);

        let inv = analytic_gaussian_schmidt(1.0 / 3.0, 5).unwrap();
        for (a, b) in l.iter().zip(inv.lambdas()) {
            assert!((a - b).abs() < 1e-15);
        }

        let long = analytic_gaussian_schmidt(3.0, 200).unwrap();
        assert!((schmidt_number(&long).unwrap() - 5.0 / 3.0).abs() < 1e-10);
        assert!(analytic_gaussian_schmidt(0.0, 3).is_err());
        assert!(analytic_gaussian_schmidt(2.0, 0).is_err());
    }

    #[test]
    fn schmidt_number_examples() {
        let one = SchmidtSpectrum::new(vec![1.0], 0.0).unwrap();
        assert_eq!(schmidt_number(&one).unwrap(), 1.0);
        let four = SchmidtSpectrum::new(vec![0.5; 4], 0.0).unwrap();
        assert!((schmidt_number(&four).unwrap() - 4.0).abs() < 1e-14);
        let zero = SchmidtSpectrum::new(vec![0.0], 0.0).unwrap();
        assert!(schmidt_number(&zero).is_err());
        assert!(SchmidtSpectrum::new(vec![0.1, 0.2], 0.0).is_err());
    }

    #[test]
    fn separable_amplitude_has_rank_one() {
        let g = FrequencyGrid::uniform(-6.0, 6.0, 41).unwrap();
        let values = CMatrix::from_fn(41, 41, |m, n| {
            let (x, y) = (g.points()[m], g.points()[n]);
            C64::new((-x * x / 2.0).exp(), 0.0) * C64::new(0.0, y).exp() * (-(y - 0.5).powi(2)).exp()
        });
        let jsa = DiscretizedJsa::normalized(g.clone(), g, values).unwrap();
        let s = schmidt_decompose(&jsa, None).unwrap();
        assert!((s.coefficients()[0] - 1.0).abs() < 1e-8);
        assert!(s.coefficients().iter().skip(1).all(|c| c * c < 1e-8));
    }

    #[test]
    fn svd_matches_analytic_aspect_three() {
        let model = GaussianJsaModel::new(1.0, 3.0).unwrap();
        let (gs, gi) = symmetric_grids(&model);
        let jsa = build_gaussian_jsa(&model, &gs, &gi).unwrap();
        let numeric = schmidt_decompose(&jsa, None).unwrap().lambdas();
        let exact = analytic_gaussian_schmidt(3.0, 10).unwrap().lambdas();
        for j in 0..10 {
            assert!((numeric[j] - exact[j]).abs() < 1e-6, "j={j}: {} vs {}", numeric[j], exact[j]);
        }
        let top = schmidt_decompose(&jsa, Some(1)).unwrap();
        assert_eq!(top.len(), 1);
        assert!((top.truncation_tail() - 0.25).abs() < 1e-6);
    }

    #[test]
    fn schmidt_modes_are_orthonormal() {
        let model = GaussianJsaModel::new(1.0, 2.0).unwrap();
        let (gs, gi) = symmetric_grids(&model);
        let jsa = build_gaussian_jsa(&model, &gs, &gi).unwrap();
        let s = schmidt_decompose(&jsa, Some(8)).unwrap();
        let (u, v) = s.modes().unwrap().weighted();
        for m in [u, v] {
            let gram = m.adjoint() * &m;
            let err = (gram - CMatrix::identity(8, 8)).iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(err < 1e-8);
        }
    }

    #[test]
    fn marginals_of_symmetric_gaussian() {
        let model = GaussianJsaModel::new(1.0, 3.0).unwrap();
        let (gs, gi) = symmetric_grids(&model);
        let jsa = build_gaussian_jsa(&model, &gs, &gi).unwrap();
        let (ps, pi) = marginals(&jsa);
        let var = (1.0f64 + 9.0) / 2.0;
        for (k, w) in gs.points().iter().enumerate() {
            assert!((ps[k] - pi[k]).abs() < 1e-12);
            let gauss = (-w * w / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt();
            assert!((ps[k] - gauss).abs() < 1e-9);
        }
        let total: f64 = ps.iter().zip(gs.weights()).map(|(p, w)| p * w).sum();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn csv_round_trip() {
        let model = GaussianJsaModel {
            delta_plus: 1.0,
            delta_minus: 2.0,
            center_signal: 0.5,
            center_idler: -0.5,
        };
        let (gs, gi) = model.default_grids(6.0, 1.5).unwrap();
        let jsa = build_gaussian_jsa(&model, &gs, &gi).unwrap();
        let mut buf = Vec::new();
        write_jsa_csv(&jsa, &mut buf).unwrap();
        let back = read_jsa_csv(buf.as_slice()).unwrap();
        assert!((back.values() - jsa.values()).norm() < 1e-12);
        assert!(read_jsa_csv("omega_s,omega_i,re_psi,im_psi\n0,0,1,0\n0,1,1,0\n1,0,1,0\n".as_bytes()).is_err());
        assert!(read_jsa_csv("a,b,c,d\n".as_bytes()).is_err());
    }
}
