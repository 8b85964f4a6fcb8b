//! Closed-form error bounds for the covariance series, the log-determinant
//! series and the Poisson approximation, plus the vacuum-probability range.

use std::fmt;

use crate::covariance::ProcessType;
use crate::error::{invalid, Error, Result};
use crate::linalg::hermitian_eigenvalues;
use crate::transforms::{pulled_back_projection, DetectionProjection, SymplecticTransform};

/// Which bound a [`BoundReport`] carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundKind {
    CovarianceTrunc,
    DetTruncEigen,
    DetTruncHs,
    PoissonVsN2,
    VacuumRange,
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundKind::CovarianceTrunc => "COVARIANCE_TRUNC",
            BoundKind::DetTruncEigen => "DET_TRUNC_EIGEN",
            BoundKind::DetTruncHs => "DET_TRUNC_HS",
            BoundKind::PoissonVsN2 => "POISSON_VS_N2",
            BoundKind::VacuumRange => "VACUUM_RANGE",
        })
    }
}

/// A bound value with the inputs it was computed from.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub value: f64,
    pub inputs: Vec<(String, f64)>,
}

impl BoundReport {
    fn new(kind: BoundKind, value: f64, inputs: &[(&str, f64)]) -> Self {
        Self {
            kind,
            value,
            inputs: inputs.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }

    pub fn input(&self, key: &str) -> Option<f64> {
        self.inputs.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }
}

/// Even and odd partial sums of `e^x` up to total order `N`.
pub fn truncated_cosh_sinh(x: f64, order: usize) -> (f64, f64) {
    let (mut c, mut s, mut term) = (0.0, 0.0, 1.0);
    for n in 0..=order {
        if n > 0 {
            term *= x / n as f64;
        }
        if n % 2 == 0 {
            c += term;
        } else {
            s += term;
        }
    }
    (c, s)
}

/// `cosh x − 𝔠_N(x)` and `sinh x − 𝔰_N(x)`, summed as tails for moderate `x`.
pub fn cosh_sinh_tails(x: f64, order: usize) -> (f64, f64) {
    if x.abs() > 30.0 {
        let (c, s) = truncated_cosh_sinh(x, order);
        return (x.cosh() - c, x.sinh() - s);
    }
    let mut term = 1.0;
    for n in 1..=order {
        term *= x / n as f64;
    }
    let (mut c, mut s) = (0.0, 0.0);
    let mut n = order;
    loop {
        n += 1;
        term *= x / n as f64;
        if n % 2 == 0 {
            c += term;
        } else {
            s += term;
        }
        if term.abs() <= f64::EPSILON * 1e-3 * (c.abs() + s.abs()) || term == 0.0 {
            break;
        }
    }
    (c, s)
}

/// `f_N(σ) = [sinh σ − 𝔰_N(σ)]/sinh σ`.
pub fn f_n(sigma: f64, order: usize) -> f64 {
    if sigma == 0.0 {
        return if order == 0 { 1.0 } else { 0.0 };
    }
    cosh_sinh_tails(sigma, order).1 / sigma.sinh()
}

/// `h_N(σ) = [cosh σ − 𝔠_N(σ)]/sinh σ`.
pub fn h_n(sigma: f64, order: usize) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    cosh_sinh_tails(sigma, order).0 / sigma.sinh()
}

/// Relative trace-norm error of `Γ_N` bounded by the `M` largest squeezing
/// parameters; exact when all parameters are supplied.
pub fn covariance_truncation_bound(sigmas: &[f64], order: usize) -> Result<BoundReport> {
    if sigmas.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(invalid("squeezing parameters must be finite and non-negative"));
    }
    if sigmas.windows(2).any(|w| w[1] > w[0]) {
        return Err(invalid("squeezing parameters must be sorted descending"));
    }
    if sigmas.iter().all(|s| *s == 0.0) {
        return Err(Error::Domain("covariance bound of an all-zero spectrum".into()));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for &s in sigmas {
        let (ct, st) = cosh_sinh_tails(s, order);
        num += if order % 2 == 0 { st } else { ct };
        den += s.sinh();
    }
    Ok(BoundReport::new(
        BoundKind::CovarianceTrunc,
        num / den,
        &[("N", order as f64), ("M", sigmas.len() as f64), ("sigma_1", sigmas[0])],
    ))
}

/// `Err_N(Λ) = ln(1 + Λ) + ∑_{n=1}^N (−Λ)ⁿ/n`.
pub fn err_n(lambda: f64, order: usize) -> f64 {
    if lambda.abs() <= 0.5 {
        // Alternating tail ∑_{n>N} (−1)^{n+1} Λⁿ/n.
        let mut pow = lambda.powi(order as i32);
        let mut acc = 0.0;
        let mut n = order;
        loop {
            n += 1;
            pow *= lambda;
            let t = if n % 2 == 1 { pow } else { -pow } / n as f64;
            acc += t;
            if t.abs() <= f64::EPSILON * 1e-3 * acc.abs() || t == 0.0 {
                break;
            }
        }
        acc
    } else {
        let mut poly = 0.0;
        let mut pow = 1.0;
        for n in 1..=order {
            pow *= -lambda;
            poly += pow / n as f64;
        }
        lambda.ln_1p() + poly
    }
}

/// Determinant-truncation bound from eigenvalues: `exp(½ ∑ |Err_N(η²Λ_j)|) − 1`.
pub fn det_truncation_bound_eigen(lambdas: &[f64], eta2: f64, order: usize) -> Result<BoundReport> {
    if let Some(l) = lambdas.iter().find(|l| !((eta2 * **l).abs() < 1.0)) {
        return Err(Error::Domain(format!("|η²Λ| = {} ≥ 1", (eta2 * l).abs())));
    }
    let sum: f64 = lambdas.iter().map(|l| err_n(eta2 * l, order).abs()).sum();
    Ok(BoundReport::new(
        BoundKind::DetTruncEigen,
        (0.5 * sum).exp_m1(),
        &[("N", order as f64), ("eta2", eta2), ("modes", lambdas.len() as f64)],
    ))
}

/// Determinant-truncation bound from `|Λ₁|` and `‖Γ‖²_HS`:
/// `(exp(−∑_{n≤N} xⁿ/n)/(1 − x))^{‖Γ‖²_HS/(2Λ₁²)} − 1`, `x = η²|Λ₁|`.
pub fn det_truncation_bound_hs(lambda1: f64, hs_norm2: f64, eta2: f64, order: usize) -> Result<BoundReport> {
    let l1 = lambda1.abs();
    let x = eta2 * l1;
    if !(x < 1.0) {
        return Err(Error::Domain(format!("η²|Λ₁| = {x} ≥ 1")));
    }
    let inputs = [("N", order as f64), ("eta2", eta2), ("lambda_1", l1), ("hs_norm2", hs_norm2)];
    if l1 == 0.0 || x == 0.0 {
        return Ok(BoundReport::new(BoundKind::DetTruncHs, 0.0, &inputs));
    }
    // ∑_{n>N} xⁿ/n
    let tail = if x <= 0.5 {
        let mut pow = x.powi(order as i32);
        let mut acc = 0.0;
        let mut n = order;
        loop {
            n += 1;
            pow *= x;
            let t = pow / n as f64;
            acc += t;
            if t <= f64::EPSILON * 1e-3 * acc || t == 0.0 {
                break;
            }
        }
        acc
    } else {
        let head: f64 = (1..=order).map(|n| x.powi(n as i32) / n as f64).sum();
        -(-x).ln_1p() - head
    };
    let exponent = hs_norm2 / (2.0 * l1 * l1) * tail;
    Ok(BoundReport::new(BoundKind::DetTruncHs, exponent.exp_m1(), &inputs))
}

/// Relative error added by dropping the fourth-order term:
/// `1 − exp(−η⁴C⁴/(2K))` (type-0/I), `1 − exp(−(η_s⁴ + η_i⁴)C⁴/(32K))` (type-II).
pub fn poisson_vs_n2_bound(gain: f64, schmidt_number: f64, eta_s: f64, eta_i: f64, process: ProcessType) -> Result<BoundReport> {
    if !(gain >= 0.0 && schmidt_number >= 1.0 - 1e-12 && eta_s >= 0.0 && eta_i >= 0.0) {
        return Err(invalid("bound inputs must be non-negative with K ≥ 1"));
    }
    let c4 = gain.powi(4);
    let x = match process {
        ProcessType::Type0I => eta_s.powi(4) * c4 / (2.0 * schmidt_number),
        ProcessType::TypeII => (eta_s.powi(4) + eta_i.powi(4)) * c4 / (32.0 * schmidt_number),
    };
    Ok(BoundReport::new(
        BoundKind::PoissonVsN2,
        -(-x).exp_m1(),
        &[("C", gain), ("K", schmidt_number), ("eta_s", eta_s), ("eta_i", eta_i)],
    ))
}

/// `(upper, lower)` vacuum probability over all spectra with mean pair number `μ`.
pub fn vacuum_range(mu: f64, process: ProcessType) -> Result<(f64, f64)> {
    if !(mu >= 0.0 && mu.is_finite()) {
        return Err(invalid(format!("mean pair number {mu} must be finite and non-negative")));
    }
    let upper = match process {
        ProcessType::Type0I => 1.0 / (1.0 + 2.0 * mu).sqrt(),
        ProcessType::TypeII => 1.0 / (1.0 + mu),
    };
    Ok((upper, (-mu).exp()))
}

/// Width of the vacuum range as a report.
pub fn vacuum_range_report(mu: f64, process: ProcessType) -> Result<BoundReport> {
    let (hi, lo) = vacuum_range(mu, process)?;
    Ok(BoundReport::new(
        BoundKind::VacuumRange,
        hi - lo,
        &[("mu", mu), ("upper", hi), ("lower", lo)],
    ))
}

/// Largest eigenvalue of `s†Ps`, the effective `η²` of a pipeline.
pub fn pipeline_eta2(s: &SymplecticTransform, p: &DetectionProjection) -> Result<f64> {
    let w = pulled_back_projection(s, p)?.to_dense();
    Ok(hermitian_eigenvalues(&w)?.first().copied().unwrap_or(0.0).max(0.0))
}
