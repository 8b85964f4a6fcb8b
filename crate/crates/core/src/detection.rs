//! Generating functions, Fredholm determinants and photon-number statistics.
//!
//! Convention: `G(w) = det(𝟙 + WΓ)^{-1/2}` with `W = ∑_d w_d s†P_d s`, so
//! `G(0) = 1` and `G(1, …, 1)` is the vacuum (no-click) probability. The
//! photon-number distribution is read off `G(1 − x) = ∑_n P(n) xⁿ`.

use std::io::Write;

use crate::covariance::{cosh_minus_one, ProcessType, RenormalizedCovariance, SqueezingSpectrum};
use crate::error::{invalid, Error, Result};
use crate::layout::Domain;
use crate::linalg::{log_det, BlockOperator, CMatrix, CVector, C64};
use crate::series::{neumaier_sum, PowerSeries};
use crate::spectral::{DiscretizedJsa, FrequencyGrid};
use crate::transforms::{fourier_matrix, time_grid, DetectionProjection, LossProfile, SymplecticTransform, Window};

/// Parameters of the bivariate Poisson approximation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoissonParams {
    pub mu: f64,
    pub p_s: f64,
    pub p_i: f64,
    pub p_si: f64,
}

impl PoissonParams {
    pub fn new(mu: f64, p_s: f64, p_i: f64, p_si: f64) -> Result<Self> {
        const TOL: f64 = 1e-12;
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(invalid(format!("mean pair number {mu} must be finite and non-negative")));
        }
        if !(p_si >= -TOL && p_si <= p_s.min(p_i) + TOL) {
            return Err(invalid(format!("need 0 ≤ p_si ≤ min(p_s, p_i), got p_si = {p_si}")));
        }
        if !(p_s >= -TOL && p_i >= -TOL && p_s + p_i - p_si <= 1.0 + TOL) {
            return Err(invalid(format!("need p_s + p_i − p_si ≤ 1, got {}", p_s + p_i - p_si)));
        }
        Ok(Self { mu, p_s, p_i, p_si })
    }

    /// `e^{−μ(p_s + p_i − p_si)}`.
    pub fn vacuum(&self) -> f64 {
        gf_poisson(self, 1.0, 1.0)
    }
}

/// Parameters of the bivariate Hermite approximation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HermiteParams {
    pub mu: f64,
    pub eps2: f64,
    pub eta_s2: f64,
    pub eta_i2: f64,
}

impl HermiteParams {
    pub fn new(mu: f64, eps2: f64, eta_s2: f64, eta_i2: f64) -> Result<Self> {
        if !(eps2 >= 0.0 && eps2.is_finite() && mu.is_finite()) {
            return Err(invalid("Hermite parameters must be finite with ε² ≥ 0"));
        }
        if mu < eps2 {
            return Err(Error::InvalidDistribution(format!("Hermite model needs μ ≥ ε², got μ = {mu}, ε² = {eps2}")));
        }
        for e in [eta_s2, eta_i2] {
            if !(0.0..=1.0).contains(&e) {
                return Err(invalid(format!("transmission {e} outside [0, 1]")));
            }
        }
        Ok(Self { mu, eps2, eta_s2, eta_i2 })
    }

    /// Fourth-order gain expansion: `μ = C²/2 + C⁴/(6K)`, `ε² = C⁴/(2K)`
    /// (type-0/I) or `μ = C²/4 + C⁴/(48K)`, `ε² = C⁴/(16K)` (type-II).
    pub fn from_gain(gain: f64, schmidt_number: f64, process: ProcessType, eta_s: f64, eta_i: f64) -> Result<Self> {
        let (c2, c4) = (gain * gain, gain.powi(4));
        let k = schmidt_number;
        let (mu, eps2) = match process {
            ProcessType::Type0I => (c2 / 2.0 + c4 / (6.0 * k), c4 / (2.0 * k)),
            ProcessType::TypeII => (c2 / 4.0 + c4 / (48.0 * k), c4 / (16.0 * k)),
        };
        Self::new(mu, eps2, eta_s * eta_s, eta_i * eta_i)
    }
}

/// `exp[−μ(w_s p_s + w_i p_i − w_s w_i p_si)]`.
pub fn gf_poisson(p: &PoissonParams, w_s: f64, w_i: f64) -> f64 {
    (-p.mu * (w_s * p.p_s + w_i * p.p_i - w_s * w_i * p.p_si)).exp()
}

/// `exp[−ε²/2 (1 − u_s² u_i²) − (μ − ε²)(1 − u_s u_i)]` with `u = 1 − η² w`.
pub fn gf_hermite(p: &HermiteParams, w_s: f64, w_i: f64) -> f64 {
    let (us, ui) = (1.0 - p.eta_s2 * w_s, 1.0 - p.eta_i2 * w_i);
    let q = us * ui;
    (-p.eps2 / 2.0 * (1.0 - q * q) - (p.mu - p.eps2) * (1.0 - q)).exp()
}

/// Representations of `G(w)` that support exact derivative extraction.
#[derive(Clone, Debug, PartialEq)]
pub enum GeneratingFunction {
    /// Product over Schmidt modes with uniform per-detector loss `η_d²`.
    /// One detector for type-0/I, two (signal, idler) for type-II.
    ExactProduct {
        sigmas: Vec<f64>,
        process: ProcessType,
        eta2: [f64; 2],
    },
    /// Truncated log-determinant series, `ln G = ∑_k c_k w^k`.
    LogSeries { detectors: usize, terms: Vec<(Vec<usize>, f64)> },
    Poisson(PoissonParams),
    Hermite(HermiteParams),
}

impl GeneratingFunction {
    pub fn exact(spectrum: &SqueezingSpectrum, eta_s: f64, eta_i: f64) -> Result<Self> {
        for e in [eta_s, eta_i] {
            if !(0.0..=1.0).contains(&e) {
                return Err(invalid(format!("transmittivity {e} outside [0, 1]")));
            }
        }
        if spectrum.process() == ProcessType::Type0I && eta_s != eta_i {
            return Err(invalid("type-0/I photons share one DOF and one transmittivity"));
        }
        Ok(Self::ExactProduct {
            sigmas: spectrum.sigmas().to_vec(),
            process: spectrum.process(),
            eta2: [eta_s * eta_s, eta_i * eta_i],
        })
    }

    pub fn detectors(&self) -> usize {
        match self {
            Self::ExactProduct { process: ProcessType::Type0I, .. } => 1,
            Self::ExactProduct { .. } => 2,
            Self::LogSeries { detectors, .. } => *detectors,
            Self::Poisson(_) | Self::Hermite(_) => 2,
        }
    }

    fn check_arity(&self, n: usize) -> Result<()> {
        if n != self.detectors() {
            return Err(Error::ShapeMismatch(format!("{n} arguments for {} detectors", self.detectors())));
        }
        Ok(())
    }

    /// `G(w)`.
    pub fn eval(&self, w: &[f64]) -> Result<f64> {
        self.check_arity(w.len())?;
        Ok(match self {
            Self::ExactProduct { sigmas, process, eta2 } => {
                let q = match process {
                    ProcessType::Type0I => (1.0 - eta2[0] * w[0]).powi(2),
                    ProcessType::TypeII => (1.0 - eta2[0] * w[0]) * (1.0 - eta2[1] * w[1]),
                };
                let p = 1.0 - q;
                let c = exponent(*process);
                let mut logs = Vec::with_capacity(sigmas.len());
                for s in sigmas {
                    let m = cosh_minus_one(*s) / 2.0;
                    let arg = 1.0 + p * m;
                    if !(arg > 0.0) {
                        return Err(Error::Domain(format!("1 + p·sinh²(σ/2) = {arg} ≤ 0 at σ = {s}")));
                    }
                    logs.push(c * (p * m).ln_1p());
                }
                neumaier_sum(&logs).exp()
            }
            Self::LogSeries { terms, .. } => {
                let vals: Vec<f64> = terms
                    .iter()
                    .map(|(k, c)| c * k.iter().zip(w).map(|(e, x)| x.powi(*e as i32)).product::<f64>())
                    .collect();
                neumaier_sum(&vals).exp()
            }
            Self::Poisson(p) => gf_poisson(p, w[0], w[1]),
            Self::Hermite(p) => gf_hermite(p, w[0], w[1]),
        })
    }

    /// Vacuum probability `G(1, …, 1)`.
    pub fn vacuum(&self) -> Result<f64> {
        self.eval(&vec![1.0; self.detectors()])
    }

    /// `ln G` composed with the series `w_d = ws[d]`.
    pub fn log_series(&self, ws: &[PowerSeries]) -> Result<PowerSeries> {
        self.check_arity(ws.len())?;
        let cut = ws[0].cutoffs().to_vec();
        let one = PowerSeries::constant(&cut, 1.0)?;
        // u_d = 1 − η_d² w_d
        let u = |d: usize, eta2: f64| one.sub(&ws[d].scale(eta2));
        match self {
            Self::ExactProduct { sigmas, process, eta2 } => {
                let q = match process {
                    ProcessType::Type0I => {
                        let u0 = u(0, eta2[0])?;
                        u0.mul(&u0)?
                    }
                    ProcessType::TypeII => u(0, eta2[0])?.mul(&u(1, eta2[1])?)?,
                };
                let c = exponent(*process);
                let terms: Vec<(f64, f64, f64)> = sigmas
                    .iter()
                    .map(|s| cosh_minus_one(*s) / 2.0)
                    .filter(|m| *m > 0.0)
                    .map(|m| (1.0 + m, -m, c))
                    .collect();
                q.sum_ln_affine(&terms)
            }
            Self::LogSeries { terms, .. } => {
                let mut acc = PowerSeries::zeros(&cut)?;
                for (k, c) in terms {
                    let mut t = PowerSeries::constant(&cut, *c)?;
                    for (d, e) in k.iter().enumerate() {
                        for _ in 0..*e {
                            t = t.mul(&ws[d])?;
                        }
                    }
                    acc = acc.add(&t)?;
                }
                Ok(acc)
            }
            Self::Poisson(p) => {
                let lin = ws[0].scale(p.p_s).add(&ws[1].scale(p.p_i))?;
                let cross = ws[0].mul(&ws[1])?.scale(p.p_si);
                Ok(lin.sub(&cross)?.scale(-p.mu))
            }
            Self::Hermite(p) => {
                let q = u(0, p.eta_s2)?.mul(&u(1, p.eta_i2)?)?;
                let q2 = q.mul(&q)?;
                let a = one.sub(&q2)?.scale(-p.eps2 / 2.0);
                let b = one.sub(&q)?.scale(-(p.mu - p.eps2));
                a.add(&b)
            }
        }
    }

    /// Second-order correlation of detector `d`, `⟨n(n−1)⟩/⟨n⟩²`, from the
    /// factorial-moment expansion of `G` around `w = 0`.
    pub fn g2(&self, d: usize) -> Result<f64> {
        let n = self.detectors();
        if d >= n {
            return Err(invalid(format!("detector {d} out of range")));
        }
        let ws: Vec<PowerSeries> = (0..n)
            .map(|e| {
                if e == d {
                    PowerSeries::affine(&[2], 0, 0.0, 1.0)
                } else {
                    PowerSeries::constant(&[2], 0.0)
                }
            })
            .collect::<Result<_>>()?;
        let g = self.log_series(&ws)?.exp()?;
        let (c1, c2) = (g.get(&[1]), g.get(&[2]));
        if c1 == 0.0 {
            return Err(Error::Domain("g² undefined for zero mean".into()));
        }
        Ok(2.0 * c2 / (c1 * c1))
    }

    /// Cross-correlation `⟨n_s n_i⟩/(⟨n_s⟩⟨n_i⟩)` of two detectors.
    pub fn cross_g2(&self, d1: usize, d2: usize) -> Result<f64> {
        let n = self.detectors();
        if d1 >= n || d2 >= n || d1 == d2 {
            return Err(invalid("need two distinct detectors"));
        }
        let ws: Vec<PowerSeries> = (0..n)
            .map(|e| match e {
                e if e == d1 => PowerSeries::affine(&[1, 1], 0, 0.0, 1.0),
                e if e == d2 => PowerSeries::affine(&[1, 1], 1, 0.0, 1.0),
                _ => PowerSeries::constant(&[1, 1], 0.0),
            })
            .collect::<Result<_>>()?;
        let g = self.log_series(&ws)?.exp()?;
        let (a, b, ab) = (g.get(&[1, 0]), g.get(&[0, 1]), g.get(&[1, 1]));
        if a == 0.0 || b == 0.0 {
            return Err(Error::Domain("cross g² undefined for zero mean".into()));
        }
        Ok(ab / (a * b))
    }
}

fn exponent(process: ProcessType) -> f64 {
    match process {
        ProcessType::Type0I => -0.5,
        ProcessType::TypeII => -1.0,
    }
}

/// Joint photon-number probabilities up to per-detector cutoffs.
#[derive(Clone, Debug, PartialEq)]
pub struct PhotonStatistics {
    cutoffs: Vec<usize>,
    probabilities: Vec<f64>,
    normalization_deficit: f64,
}

impl PhotonStatistics {
    /// Validates raw coefficients (row-major over `0..=cutoffs[d]`).
    pub fn from_raw(cutoffs: Vec<usize>, mut probabilities: Vec<f64>) -> Result<Self> {
        let len: usize = cutoffs.iter().map(|n| n + 1).product();
        if probabilities.len() != len {
            return Err(Error::ShapeMismatch("probability table size".into()));
        }
        if let Some(p) = probabilities.iter().find(|p| !(**p >= -1e-12)) {
            return Err(Error::InvalidDistribution(format!("probability {p} below −1e-12")));
        }
        probabilities.iter_mut().for_each(|p| *p = p.max(0.0));
        let total = neumaier_sum(&probabilities);
        if total > 1.0 + 1e-10 {
            return Err(Error::InvalidDistribution(format!("probabilities sum to {total}")));
        }
        Ok(Self {
            cutoffs,
            probabilities,
            normalization_deficit: 1.0 - total,
        })
    }

    pub fn cutoffs(&self) -> &[usize] {
        &self.cutoffs
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn normalization_deficit(&self) -> f64 {
        self.normalization_deficit
    }

    pub fn get(&self, n: &[usize]) -> f64 {
        if n.len() != self.cutoffs.len() || n.iter().zip(&self.cutoffs).any(|(a, c)| a > c) {
            return 0.0;
        }
        let mut idx = 0;
        for (a, c) in n.iter().zip(&self.cutoffs) {
            idx = idx * (c + 1) + a;
        }
        self.probabilities[idx]
    }

    /// Every multi-index in storage order.
    pub fn indices(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::with_capacity(self.probabilities.len());
        let mut k = vec![0; self.cutoffs.len()];
        for _ in 0..self.probabilities.len() {
            out.push(k.clone());
            for d in (0..k.len()).rev() {
                if k[d] < self.cutoffs[d] {
                    k[d] += 1;
                    break;
                }
                k[d] = 0;
            }
        }
        out
    }

    /// Marginal distribution of detector `d`.
    pub fn marginal(&self, d: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.cutoffs[d] + 1];
        for (k, p) in self.indices().iter().zip(&self.probabilities) {
            out[k[d]] += p;
        }
        out
    }

    /// CSV with header `n1,…,nD,probability`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let header: Vec<String> = (1..=self.cutoffs.len()).map(|d| format!("n{d}")).collect();
        writeln!(out, "{},probability", header.join(","))?;
        for (k, p) in self.indices().iter().zip(&self.probabilities) {
            let ks: Vec<String> = k.iter().map(|x| x.to_string()).collect();
            writeln!(out, "{},{p:.16e}", ks.join(","))?;
        }
        Ok(())
    }
}

/// Photon-number distribution by power-series expansion of `G(1 − x)`.
pub fn pnd(gf: &GeneratingFunction, cutoffs: &[usize]) -> Result<PhotonStatistics> {
    gf.check_arity(cutoffs.len())?;
    let ws: Vec<PowerSeries> = (0..cutoffs.len())
        .map(|d| PowerSeries::affine(cutoffs, d, 1.0, -1.0))
        .collect::<Result<_>>()?;
    let probs = gf.log_series(&ws)?.exp()?;
    PhotonStatistics::from_raw(cutoffs.to_vec(), probs.into_coeffs())
}

/// Estimate of the spectral radius of `k` by 20 power-iteration steps.
pub fn spectral_radius_estimate(k: &CMatrix) -> f64 {
    let n = k.nrows();
    if n == 0 {
        return 0.0;
    }
    let mut x = CVector::from_fn(n, |i, _| C64::new(1.0 + (i as f64 * 0.618).fract(), 0.0));
    x /= C64::new(x.norm(), 0.0);
    let mut est = 0.0;
    for _ in 0..20 {
        let y = k * &x;
        est = y.norm();
        if est == 0.0 {
            return 0.0;
        }
        x = y / C64::new(est, 0.0);
    }
    est
}

/// `ln det(𝟙 + K) ≈ ∑_{n=1}^N (−1)^{n+1} Tr(Kⁿ)/n` (real part).
pub fn log_det_series(k: &CMatrix, order: usize) -> Result<f64> {
    if k.nrows() != k.ncols() {
        return Err(Error::ShapeMismatch("operand must be square".into()));
    }
    if order == 0 {
        return Err(invalid("series order must be at least 1"));
    }
    let radius = spectral_radius_estimate(k);
    if radius > 0.95 {
        log::warn!("log-determinant series operand has spectral radius ≈ {radius:.3}; the series may diverge");
    }
    let mut power = k.clone();
    let mut terms = Vec::with_capacity(order);
    for n in 1..=order {
        if n > 1 {
            power = &power * k;
        }
        let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
        terms.push(sign * power.trace().re / n as f64);
    }
    Ok(neumaier_sum(&terms))
}

/// Block-operator convenience for [`log_det_series`].
pub fn log_det_series_op(k: &BlockOperator, order: usize) -> Result<f64> {
    log_det_series(&k.to_dense(), order)
}

/// `ln det(𝟙 + K)` (real part) by LU factorization.
pub fn fredholm_log_det(k: &CMatrix) -> Result<f64> {
    let n = k.nrows();
    let m = CMatrix::identity(n, n) + k;
    Ok(log_det(&m)?.re)
}

/// `P_vac = det(𝟙 + K)^{-1/2}` for `K = s†PsΓ`.
pub fn vacuum_from_operand(k: &BlockOperator) -> Result<f64> {
    Ok((-0.5 * fredholm_log_det(&k.to_dense())?).exp())
}

/// Operands `K_d = s†P_d s Γ`, one per detector.
pub fn detector_operands(
    s: &SymplecticTransform,
    detectors: &[DetectionProjection],
    gamma: &RenormalizedCovariance,
) -> Result<Vec<CMatrix>> {
    detectors
        .iter()
        .map(|p| crate::transforms::compressed_determinant_operand(s, p, gamma).map(|k| k.to_dense()))
        .collect()
}

/// Upper limit on the number of trace words in [`log_series_gf`].
pub const MAX_TRACE_WORDS: usize = 1 << 16;

/// `ln G(w) = −½ ∑_{n≤N} (−1)^{n+1}/n Tr[(∑_d w_d K_d)ⁿ]` as a polynomial in `w`.
pub fn log_series_gf(operands: &[CMatrix], order: usize) -> Result<GeneratingFunction> {
    let d = operands.len();
    if d == 0 || order == 0 {
        return Err(invalid("need at least one operand and order ≥ 1"));
    }
    let words: usize = (1..=order).map(|n| d.saturating_pow(n as u32)).fold(0usize, |a, b| a.saturating_add(b));
    if words > MAX_TRACE_WORDS {
        return Err(Error::CutoffTooLarge(format!("{words} trace words for {d} detectors at order {order}")));
    }
    let n = operands[0].nrows();
    if operands.iter().any(|k| k.nrows() != n || k.ncols() != n) {
        return Err(Error::ShapeMismatch("operands must share one square shape".into()));
    }
    let mut coeffs: std::collections::BTreeMap<Vec<usize>, f64> = Default::default();
    // Depth-first over words with running prefix products.
    let mut stack: Vec<(CMatrix, Vec<usize>)> = (0..d).map(|j| (operands[j].clone(), unit(d, j))).collect();
    while let Some((prefix, counts)) = stack.pop() {
        let len: usize = counts.iter().sum();
        let sign = if len % 2 == 1 { 1.0 } else { -1.0 };
        *coeffs.entry(counts.clone()).or_insert(0.0) += -0.5 * sign * prefix.trace().re / len as f64;
        if len < order {
            for j in 0..d {
                let mut c = counts.clone();
                c[j] += 1;
                stack.push((&prefix * &operands[j], c));
            }
        }
    }
    Ok(GeneratingFunction::LogSeries {
        detectors: d,
        terms: coeffs.into_iter().collect(),
    })
}

fn unit(d: usize, j: usize) -> Vec<usize> {
    let mut v = vec![0; d];
    v[j] = 1;
    v
}

/// Weighted amplitude transformed to the window domain along one axis.
fn to_domain(psi: &CMatrix, grid: &FrequencyGrid, window: &Window, axis: usize) -> Result<(CMatrix, FrequencyGrid)> {
    match window.domain {
        Domain::Frequency => Ok((psi.clone(), grid.clone())),
        Domain::Time => {
            let t = time_grid(grid)?;
            let f = fourier_matrix(grid, &t);
            let out = if axis == 0 { &f * psi } else { psi * f.transpose() };
            Ok((out, t))
        }
    }
}

/// Bivariate Poisson parameters of a pair source observed through
/// per-DOF loss and detection windows.
///
/// `μ = C²/4` (type-II) or `C²/2` (type-0/I). For type-0/I both photons
/// share the single DOF, its loss and its window.
pub fn poisson_params(
    jsa: &DiscretizedJsa,
    eta: &LossProfile,
    windows: &DetectionProjection,
    gain: f64,
    process: ProcessType,
) -> Result<PoissonParams> {
    let dofs = match process {
        ProcessType::Type0I => 1,
        ProcessType::TypeII => 2,
    };
    if eta.etas().len() != dofs || windows.windows().len() != dofs {
        return Err(Error::ShapeMismatch(format!("expected loss and windows for {dofs} DOFs")));
    }
    let (es, ei) = (&eta.etas()[0], &eta.etas()[dofs - 1]);
    let (ws, wi) = (&windows.windows()[0], &windows.windows()[dofs - 1]);
    if es.len() != jsa.grid_signal().len() || ei.len() != jsa.grid_idler().len() {
        return Err(Error::ShapeMismatch("loss profile does not match the amplitude grids".into()));
    }
    if process == ProcessType::Type0I && jsa.grid_signal() != jsa.grid_idler() {
        return Err(invalid("a type-0/I amplitude needs identical signal and idler grids"));
    }
    let psi = jsa.weighted_matrix();
    let scale_rows = |m: &CMatrix, e: &[f64]| CMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * e[i]);
    let scale_cols = |m: &CMatrix, e: &[f64]| CMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * e[j]);

    let signal_only = scale_rows(&psi, es);
    let (sig, gs) = to_domain(&signal_only, jsa.grid_signal(), ws, 0)?;
    let mask_s = ws.mask(&gs)?;
    let p_s: f64 = mask_s.iter().map(|&m| sig.row(m).iter().map(|z| z.norm_sqr()).sum::<f64>()).sum();

    let idler_only = scale_cols(&psi, ei);
    let (idl, gi) = to_domain(&idler_only, jsa.grid_idler(), wi, 1)?;
    let mask_i = wi.mask(&gi)?;
    let p_i: f64 = mask_i.iter().map(|&n| idl.column(n).iter().map(|z| z.norm_sqr()).sum::<f64>()).sum();

    let both = scale_cols(&scale_rows(&psi, es), ei);
    let (both, _) = to_domain(&both, jsa.grid_signal(), ws, 0)?;
    let (both, _) = to_domain(&both, jsa.grid_idler(), wi, 1)?;
    let p_si: f64 = mask_s
        .iter()
        .flat_map(|&m| mask_i.iter().map(move |&n| (m, n)))
        .map(|(m, n)| both[(m, n)].norm_sqr())
        .sum();

    let mu = match process {
        ProcessType::Type0I => gain * gain / 2.0,
        ProcessType::TypeII => gain * gain / 4.0,
    };
    PoissonParams::new(mu, p_s.min(1.0), p_i.min(1.0), p_si.min(p_s).min(p_i))
}

/// A pair source described by its Schmidt weights, gain and uniform losses.
#[derive(Clone, Debug, PartialEq)]
pub struct PairSource {
    lambdas: Vec<f64>,
    gain: f64,
    process: ProcessType,
    eta_s: f64,
    eta_i: f64,
}

impl PairSource {
    pub fn new(lambdas: Vec<f64>, gain: f64, process: ProcessType, eta_s: f64, eta_i: f64) -> Result<Self> {
        if lambdas.is_empty() || lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(invalid("Schmidt weights must be non-empty, finite and non-negative"));
        }
        if lambdas.iter().sum::<f64>() > 1.0 + 1e-8 {
            return Err(invalid("Schmidt weights sum above one"));
        }
        if !(gain.is_finite() && gain >= 0.0) {
            return Err(invalid("gain must be finite and non-negative"));
        }
        for e in [eta_s, eta_i] {
            if !(0.0..=1.0).contains(&e) {
                return Err(invalid(format!("transmittivity {e} outside [0, 1]")));
            }
        }
        if process == ProcessType::Type0I && eta_s != eta_i {
            return Err(invalid("type-0/I photons share one transmittivity"));
        }
        let mut lambdas = lambdas;
        lambdas.sort_by(|a, b| b.total_cmp(a));
        Ok(Self {
            lambdas,
            gain,
            process,
            eta_s,
            eta_i,
        })
    }

    /// Source whose exact mean pair number equals `mu` (gain found by bisection).
    pub fn from_mean_pairs(lambdas: Vec<f64>, mu: f64, process: ProcessType, eta_s: f64, eta_i: f64) -> Result<Self> {
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(invalid(format!("mean pair number {mu} must be finite and non-negative")));
        }
        let probe = Self::new(lambdas, 0.0, process, eta_s, eta_i)?;
        let gain = solve_gain(&probe.lambdas, mu, process)?;
        Ok(Self { gain, ..probe })
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn process(&self) -> ProcessType {
        self.process
    }

    pub fn etas(&self) -> (f64, f64) {
        (self.eta_s, self.eta_i)
    }

    pub fn squeezing(&self) -> SqueezingSpectrum {
        let f = self.process.sigma_factor() * self.gain;
        SqueezingSpectrum::new(self.lambdas.iter().map(|l| f * l.sqrt()).collect(), self.process, self.gain)
            .expect("sorted non-negative weights")
    }

    /// Exact mean pair number.
    pub fn mean_pairs(&self) -> f64 {
        mean_pairs(&self.lambdas, self.gain, self.process)
    }

    pub fn schmidt_number(&self) -> f64 {
        1.0 / self.lambdas.iter().map(|l| l * l).sum::<f64>()
    }

    /// Probability that a given pair leaves at least one click.
    pub fn click_probability(&self) -> f64 {
        1.0 - (1.0 - self.eta_s * self.eta_s) * (1.0 - self.eta_i * self.eta_i)
    }

    pub fn exact_gf(&self) -> GeneratingFunction {
        GeneratingFunction::ExactProduct {
            sigmas: self.squeezing().sigmas().to_vec(),
            process: self.process,
            eta2: [self.eta_s * self.eta_s, self.eta_i * self.eta_i],
        }
    }

    pub fn hermite_params(&self) -> Result<HermiteParams> {
        HermiteParams::from_gain(self.gain, self.schmidt_number(), self.process, self.eta_s, self.eta_i)
    }
}

fn mean_pairs(lambdas: &[f64], gain: f64, process: ProcessType) -> f64 {
    let f = process.sigma_factor() * gain;
    let per: Vec<f64> = lambdas.iter().map(|l| (f * l.sqrt() / 2.0).sinh().powi(2)).collect();
    let total = neumaier_sum(&per);
    match process {
        ProcessType::Type0I => total / 2.0,
        ProcessType::TypeII => total,
    }
}

fn solve_gain(lambdas: &[f64], mu: f64, process: ProcessType) -> Result<f64> {
    if mu == 0.0 {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while mean_pairs(lambdas, hi, process) < mu {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Convergence(format!("no gain reaches μ = {mu}")));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if mean_pairs(lambdas, mid, process) < mu {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Vacuum-probability methods.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VacuumMethod {
    Exact,
    LogSeries(usize),
    Poisson,
    Hermite,
    Linear,
    Quadratic,
}

/// Vacuum (no-click) probability of a pair source with uniform loss and
/// unbounded windows.
///
/// `Poisson` and `Linear` use the exact mean pair number; `Linear` may be
/// negative for large `μ` and is returned as is.
pub fn vacuum_probability(source: &PairSource, method: VacuumMethod) -> Result<f64> {
    let p = source.click_probability();
    match method {
        VacuumMethod::Exact => source.exact_gf().vacuum(),
        VacuumMethod::LogSeries(order) => {
            if order == 0 {
                return Err(invalid("series order must be at least 1"));
            }
            let (a_s, a_i) = (source.eta_s.powi(2), source.eta_i.powi(2));
            let mult = match source.process {
                ProcessType::Type0I => 1.0,
                ProcessType::TypeII => 2.0,
            };
            let mut logs = Vec::new();
            for s in source.squeezing().sigmas() {
                // Eigenvalues of [[a_s c, a_s h], [a_i h, a_i c]] on one mode pair.
                let c = cosh_minus_one(*s) / 2.0;
                let tr = (a_s + a_i) * c;
                let det = -a_s * a_i * c;
                let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
                for lam in [tr / 2.0 + disc, tr / 2.0 - disc] {
                    let mut pow = 1.0;
                    for n in 1..=order {
                        pow *= -lam;
                        logs.push(0.5 * mult * pow / n as f64);
                    }
                }
            }
            Ok(neumaier_sum(&logs).exp())
        }
        VacuumMethod::Poisson => Ok((-source.mean_pairs() * p).exp()),
        VacuumMethod::Linear => Ok(1.0 - source.mean_pairs() * p),
        VacuumMethod::Hermite => {
            let h = source.hermite_params()?;
            Ok(gf_hermite(&h, 1.0, 1.0))
        }
        VacuumMethod::Quadratic => Ok(quadratic_vacuum(
            source.schmidt_number(),
            source.gain,
            source.eta_s,
            source.eta_i,
            source.process,
        )),
    }
}

/// Vacuum probability of the renormalized state truncated after two pair
/// creations, with uniform loss and unbounded windows.
///
/// Type-II weights: `p₀ = (1 − C²/8)²`, `p₁ = C²/4`, `p₂ = C⁴(1 + 1/K)/32`;
/// type-0/I: `p₀ = (1 − C²/4)²`, `p₁ = C²/2`, `p₂ = C⁴(1 + 2/K)/8`. A pair
/// leaves no click with probability `q = (1 − η_s²)(1 − η_i²)`.
pub fn quadratic_vacuum(schmidt_number: f64, gain: f64, eta_s: f64, eta_i: f64, process: ProcessType) -> f64 {
    let (c2, c4) = (gain * gain, gain.powi(4));
    let k = schmidt_number;
    let (p0, p1, p2) = match process {
        ProcessType::Type0I => ((1.0 - c2 / 4.0).powi(2), c2 / 2.0, c4 * (1.0 + 2.0 / k) / 8.0),
        ProcessType::TypeII => ((1.0 - c2 / 8.0).powi(2), c2 / 4.0, c4 * (1.0 + 1.0 / k) / 32.0),
    };
    let q = (1.0 - eta_s * eta_s) * (1.0 - eta_i * eta_i);
    (p0 + p1 * q + p2 * q * q) / (p0 + p1 + p2)
}

/// Exact vacuum probability for a general pipeline: `det(𝟙 + s†PsΓ)^{-1/2}`
/// with `P` the union of the detector windows.
pub fn pipeline_vacuum(s: &SymplecticTransform, p: &DetectionProjection, gamma: &RenormalizedCovariance) -> Result<f64> {
    vacuum_from_operand(&crate::transforms::compressed_determinant_operand(s, p, gamma)?)
}
