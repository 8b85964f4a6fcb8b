//! Data sets for the four standard figures.

use std::fmt;
use std::str::FromStr;

use biphoton_core::bounds::{covariance_truncation_bound, det_truncation_bound_hs};
use biphoton_core::covariance::Norms;
use biphoton_core::detection::{vacuum_probability, PairSource, VacuumMethod};
use biphoton_core::spectral::analytic_gaussian_schmidt_to;
use biphoton_core::ProcessType;
use rayon::prelude::*;

use crate::error::{CliError, Result};
use crate::output::Dataset;

/// `(η², μ)` pairs of the determinant-bound figure.
pub const FIG1_SETS: [(f64, f64); 4] = [(0.1, 0.01), (0.1, 0.1), (1.0, 0.01), (1.0, 0.1)];
pub const FIG1_ORDER: usize = 2;
pub const FIG2_ORDERS: [usize; 3] = [2, 4, 6];
pub const FIG2_MUS: [f64; 3] = [0.01, 0.1, 1.0];
pub const FIG4_ASPECTS: [f64; 3] = [1.0, 10.0, 100.0];
pub const ASPECT_RANGE: (f64, f64) = (1.0, 1e3);
pub const FIG3_RANGE: (f64, f64) = (0.0, 3.0);
pub const FIG4_RANGE: (f64, f64) = (1e-3, 1.0);
/// Schmidt weights below this are dropped from analytic spectra.
pub const LAMBDA_FLOOR: f64 = 1e-16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Figure {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
}

impl FromStr for Figure {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig1" => Ok(Self::Fig1),
            "fig2" => Ok(Self::Fig2),
            "fig3" => Ok(Self::Fig3),
            "fig4" => Ok(Self::Fig4),
            other => Err(CliError::config("figure", format!("unknown figure `{other}` (fig1, fig2, fig3, fig4)"))),
        }
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = match self {
            Self::Fig1 => 1,
            Self::Fig2 => 2,
            Self::Fig3 => 3,
            Self::Fig4 => 4,
        };
        write!(f, "fig{n}")
    }
}

impl Figure {
    pub fn default_points(self) -> usize {
        match self {
            Self::Fig1 | Self::Fig2 => 121,
            Self::Fig3 => 301,
            Self::Fig4 => 101,
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Self::Fig1 => "Determinant truncation bound, N = 2 (type-II, Gaussian JSA)",
            Self::Fig2 => "Covariance truncation bound, M = 1 (type-II, Gaussian JSA)",
            Self::Fig3 => "Vacuum detection probability",
            Self::Fig4 => "Relative error of the vacuum probability (type-II, Gaussian JSA)",
        }
    }

    /// `(log_x, log_y)` for the SVG plot.
    pub fn log_axes(self) -> (bool, bool) {
        match self {
            Self::Fig3 => (false, false),
            _ => (true, true),
        }
    }
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    linspace(lo.log10(), hi.log10(), n).into_iter().map(|e| 10f64.powf(e)).collect()
}

/// Type-II source with the analytic Gaussian spectrum at `aspect` and exact mean pair number `mu`.
pub fn gaussian_source(aspect: f64, mu: f64) -> Result<PairSource> {
    let lambdas = analytic_gaussian_schmidt_to(aspect, LAMBDA_FLOOR)?.lambdas();
    Ok(PairSource::from_mean_pairs(lambdas, mu, ProcessType::TypeII, 1.0, 1.0)?)
}

/// Determinant-truncation bound from the analytic spectrum.
pub fn fig1_value(aspect: f64, eta2: f64, mu: f64) -> Result<f64> {
    let src = gaussian_source(aspect, mu)?;
    let n = Norms::from_spectrum(&src.squeezing());
    Ok(det_truncation_bound_hs(n.lambda_max, n.hs_norm * n.hs_norm, eta2, FIG1_ORDER)?.value)
}

/// Covariance-truncation bound from the largest squeezing parameter only.
pub fn fig2_value(aspect: f64, order: usize, mu: f64) -> Result<f64> {
    let src = gaussian_source(aspect, mu)?;
    let sigma1 = src.squeezing().sigmas()[0];
    Ok(covariance_truncation_bound(&[sigma1], order)?.value)
}

/// Rows evaluated in parallel, assembled in index order.
fn sweep<F>(xs: &[f64], width: usize, f: F) -> Result<Vec<Vec<f64>>>
where
    F: Fn(f64) -> Result<Vec<f64>> + Sync,
{
    let rows: Vec<Vec<f64>> = xs.par_iter().map(|x| f(*x)).collect::<Result<_>>()?;
    debug_assert!(rows.iter().all(|r| r.len() == width));
    Ok(rows)
}

fn assemble(x_name: &str, xs: Vec<f64>, names: Vec<String>, rows: Vec<Vec<f64>>, metadata: Vec<(String, String)>) -> Dataset {
    let columns = names
        .into_iter()
        .enumerate()
        .map(|(j, n)| (n, rows.iter().map(|r| r[j]).collect()))
        .collect();
    Dataset {
        metadata,
        x_name: x_name.into(),
        x: xs,
        columns,
    }
}

fn meta(fig: Figure, points: usize) -> Vec<(String, String)> {
    vec![
        ("figure".into(), fig.to_string()),
        ("points".into(), points.to_string()),
    ]
}

/// Computes a figure's data set with `points` sweep samples.
pub fn figure(fig: Figure, points: Option<usize>) -> Result<Dataset> {
    let n = points.unwrap_or(fig.default_points());
    if n < 2 {
        return Err(CliError::config("--points", "need at least 2 points"));
    }
    let mut m = meta(fig, n);
    match fig {
        Figure::Fig1 => {
            let xs = logspace(ASPECT_RANGE.0, ASPECT_RANGE.1, n);
            let names = FIG1_SETS.iter().map(|(e, mu)| format!("eta2={e},mu={mu}")).collect();
            let rows = sweep(&xs, FIG1_SETS.len(), |a| {
                FIG1_SETS.iter().map(|(e, mu)| fig1_value(a, *e, *mu)).collect()
            })?;
            m.push(("process".into(), "TypeII".into()));
            m.push(("order".into(), FIG1_ORDER.to_string()));
            m.push(("bound".into(), "DET_TRUNC_HS from the analytic Gaussian spectrum".into()));
            m.push(("mu_to_gain".into(), "exact bisection on sum sinh^2(sigma_j/2)".into()));
            m.push(("lambda_floor".into(), format!("{LAMBDA_FLOOR:e}")));
            Ok(assemble("aspect_ratio", xs, names, rows, m))
        }
        Figure::Fig2 => {
            let xs = logspace(ASPECT_RANGE.0, ASPECT_RANGE.1, n);
            let sets: Vec<(usize, f64)> = FIG2_ORDERS
                .iter()
                .flat_map(|o| FIG2_MUS.iter().map(move |mu| (*o, *mu)))
                .collect();
            let names = sets.iter().map(|(o, mu)| format!("N={o},mu={mu}")).collect();
            let rows = sweep(&xs, sets.len(), |a| sets.iter().map(|(o, mu)| fig2_value(a, *o, *mu)).collect())?;
            m.push(("process".into(), "TypeII".into()));
            m.push(("modes_used".into(), "1".into()));
            m.push(("bound".into(), "COVARIANCE_TRUNC from sigma_1".into()));
            m.push(("mu_to_gain".into(), "exact bisection on sum sinh^2(sigma_j/2)".into()));
            Ok(assemble("aspect_ratio", xs, names, rows, m))
        }
        Figure::Fig3 => {
            let xs = linspace(FIG3_RANGE.0, FIG3_RANGE.1, n);
            let names = ["poisson", "single_mode_type_0i", "single_mode_type_ii", "linear"]
                .map(String::from)
                .to_vec();
            let rows = sweep(&xs, 4, |mu| {
                let s2 = PairSource::from_mean_pairs(vec![1.0], mu, ProcessType::TypeII, 1.0, 1.0)?;
                let s1 = PairSource::from_mean_pairs(vec![1.0], mu, ProcessType::Type0I, 1.0, 1.0)?;
                Ok(vec![
                    vacuum_probability(&s2, VacuumMethod::Poisson)?,
                    vacuum_probability(&s1, VacuumMethod::Exact)?,
                    vacuum_probability(&s2, VacuumMethod::Exact)?,
                    vacuum_probability(&s2, VacuumMethod::Linear)?,
                ])
            })?;
            m.push(("eta".into(), "1".into()));
            m.push(("windows".into(), "unbounded".into()));
            Ok(assemble("mu", xs, names, rows, m))
        }
        Figure::Fig4 => {
            let xs = logspace(FIG4_RANGE.0, FIG4_RANGE.1, n);
            let methods = [
                ("poisson", VacuumMethod::Poisson),
                ("hermite", VacuumMethod::Hermite),
                ("quadratic", VacuumMethod::Quadratic),
            ];
            let names = FIG4_ASPECTS
                .iter()
                .flat_map(|a| methods.iter().map(move |(name, _)| format!("{name},aspect={a}")))
                .collect();
            let rows = sweep(&xs, FIG4_ASPECTS.len() * methods.len(), |mu| {
                let mut row = Vec::new();
                for a in FIG4_ASPECTS {
                    let src = gaussian_source(a, mu)?;
                    let exact = vacuum_probability(&src, VacuumMethod::Exact)?;
                    for (_, method) in methods {
                        row.push((vacuum_probability(&src, method)? - exact).abs() / exact);
                    }
                }
                Ok(row)
            })?;
            m.push(("process".into(), "TypeII".into()));
            m.push(("quantity".into(), "|P_method - P_exact| / P_exact".into()));
            m.push(("eta".into(), "1".into()));
            m.push(("windows".into(), "unbounded".into()));
            m.push(("aspect_ratios".into(), FIG4_ASPECTS.map(|a| a.to_string()).join(";")));
            m.push(("mu_to_gain".into(), "exact bisection on sum sinh^2(sigma_j/2)".into()));
            Ok(assemble("mu", xs, names, rows, m))
        }
    }
}
