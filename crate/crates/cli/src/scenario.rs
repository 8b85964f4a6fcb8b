//! Source → transforms → detection pipeline driven by a [`ScenarioConfig`].

use std::fs::File;
use std::io::{BufReader, Write};

use biphoton_core::bounds::{
    det_truncation_bound_eigen, det_truncation_bound_hs, pipeline_eta2, poisson_vs_n2_bound, BoundReport,
};
use biphoton_core::covariance::{build_covariance_exact, covariance_eigenvalues, Norms};
use biphoton_core::detection::{
    detector_operands, log_series_gf, pipeline_vacuum, pnd, poisson_params, vacuum_probability, GeneratingFunction,
    PairSource, PhotonStatistics, VacuumMethod,
};
use biphoton_core::oracle::DIMENSION_CAP;
use biphoton_core::spectral::{build_gaussian_jsa, read_jsa_csv, schmidt_decompose, schmidt_number};
use biphoton_core::transforms::{compress, DetectionProjection, LossProfile, Pipeline, SymplecticTransform, Window};
use biphoton_core::{
    DiscretizedJsa, Dof, FrequencyGrid, GaussianJsaModel, ModeLayout, ProcessType, SchmidtSpectrum, SqueezingSpectrum,
};

use crate::config::{JsaConfig, Method, ScenarioConfig, StepConfig};
use crate::error::{CliError, Result};
use crate::output::{fmt_float, write_metadata};

/// One output line.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub quantity: String,
    pub method: String,
    /// Photon numbers joined by `;` for PND rows, empty otherwise.
    pub index: String,
    pub value: f64,
    pub bound: Option<(String, f64)>,
}

impl Row {
    fn new(quantity: &str, method: &str, value: f64) -> Self {
        Self {
            quantity: quantity.into(),
            method: method.into(),
            index: String::new(),
            value,
            bound: None,
        }
    }

    fn with_bound(mut self, b: Option<&BoundReport>) -> Self {
        self.bound = b.map(|b| (b.kind.to_string(), b.value));
        self
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResultTable {
    pub metadata: Vec<(String, String)>,
    pub rows: Vec<Row>,
}

impl ResultTable {
    pub fn find(&self, quantity: &str, method: &str) -> Option<&Row> {
        self.rows.iter().find(|r| r.quantity == quantity && r.method == method)
    }

    pub fn write_csv<W: Write>(&self, mut out: W, precision: usize) -> std::io::Result<()> {
        write_metadata(&mut out, &self.metadata)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["quantity", "method", "index", "value", "bound_kind", "bound_value"])?;
        for r in &self.rows {
            let (kind, value) = match &r.bound {
                Some((k, v)) => (k.clone(), fmt_float(*v, precision)),
                None => (String::new(), String::new()),
            };
            w.write_record([
                r.quantity.as_str(),
                r.method.as_str(),
                r.index.as_str(),
                &fmt_float(r.value, precision),
                &kind,
                &value,
            ])?;
        }
        w.flush()
    }
}

fn build_jsa(cfg: &ScenarioConfig) -> Result<DiscretizedJsa> {
    match &cfg.source.jsa {
        JsaConfig::Gaussian {
            delta_plus_rad_s,
            delta_minus_rad_s,
        } => {
            let model = GaussianJsaModel::new(*delta_plus_rad_s, *delta_minus_rad_s)?;
            let (gs, gi) = match cfg.grid.points {
                Some(n) => {
                    let half = cfg.grid.extent_multiplier * model.marginal_std();
                    let g = FrequencyGrid::uniform(-half, half, n)?;
                    (g.clone(), g)
                }
                None => model.default_grids(cfg.grid.extent_multiplier, cfg.grid.points_per_width)?,
            };
            Ok(build_gaussian_jsa(&model, &gs, &gi)?)
        }
        JsaConfig::Csv { path } => {
            let f = File::open(path).map_err(|e| CliError::io(path, e))?;
            Ok(read_jsa_csv(BufReader::new(f))?)
        }
    }
}

/// The pipeline restricted to per-DOF constant loss followed by detection
/// windows, as needed by the closed-form methods.
struct SimpleChannel {
    etas: Vec<f64>,
    unbounded: bool,
}

fn simple_channel(cfg: &ScenarioConfig, windows: &DetectionProjection) -> Result<SimpleChannel> {
    let method = cfg.detection.method.name();
    if cfg.source.vacuum_dofs > 0 {
        return Err(CliError::config(
            "source.vacuum_dofs",
            format!("method `{method}` supports only the source DOFs"),
        ));
    }
    let mut etas = vec![1.0; cfg.total_dofs()];
    for (k, step) in cfg.pipeline.iter().enumerate() {
        match step {
            StepConfig::Loss { eta } => etas.iter_mut().zip(eta).for_each(|(a, b)| *a *= b),
            StepConfig::Fourier { .. } => {}
            _ => {
                return Err(CliError::config(
                    format!("pipeline[{k}]"),
                    format!("method `{method}` supports only loss and fourier steps"),
                ))
            }
        }
    }
    let unbounded = windows
        .windows()
        .iter()
        .all(|w| w.interval == Window::unbounded(w.domain).interval);
    Ok(SimpleChannel { etas, unbounded })
}

fn per_detector(p: &DetectionProjection) -> Vec<DetectionProjection> {
    let ws = p.windows();
    (0..ws.len())
        .filter(|&d| ws[d].interval.is_some())
        .map(|d| {
            DetectionProjection::new(
                ws.iter()
                    .enumerate()
                    .map(|(e, w)| if e == d { *w } else { Window::empty(w.domain) })
                    .collect(),
            )
        })
        .collect()
}

fn push_pnd(rows: &mut Vec<Row>, method: &str, stats: &PhotonStatistics) {
    for (k, n) in stats.indices().into_iter().enumerate() {
        let mut r = Row::new("pnd", method, stats.probabilities()[k]);
        r.index = n.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";");
        rows.push(r);
    }
    rows.push(Row::new("pnd_deficit", method, stats.normalization_deficit()));
}

fn pnd_cutoffs(cfg: &ScenarioConfig, detectors: usize) -> Result<Option<Vec<usize>>> {
    match &cfg.detection.pnd_cutoffs {
        None => Ok(None),
        Some(c) if c.len() == detectors => Ok(Some(c.clone())),
        Some(c) => Err(CliError::config(
            "detection.pnd_cutoffs",
            format!("{} cutoffs given for {detectors} detectors", c.len()),
        )),
    }
}

fn require_type_ii_pnd(cfg: &ScenarioConfig, process: ProcessType) -> Result<()> {
    if cfg.detection.pnd_cutoffs.is_some() && process == ProcessType::Type0I {
        return Err(CliError::config(
            "detection.pnd_cutoffs",
            format!("method `{}` gives photon statistics only for type-II sources", cfg.detection.method.name()),
        ));
    }
    Ok(())
}

/// Eigenvalue and Hilbert-Schmidt determinant bounds at `order` for the
/// pipeline's effective `η²`.
fn det_bounds(
    s: &SymplecticTransform,
    projection: &DetectionProjection,
    squeezing: &SqueezingSpectrum,
    order: usize,
) -> Result<(biphoton_core::Result<BoundReport>, biphoton_core::Result<BoundReport>)> {
    let eta2 = pipeline_eta2(s, projection)?;
    let eigs = covariance_eigenvalues(squeezing);
    let norms = Norms::from_eigenvalues(&eigs);
    let eigen = det_truncation_bound_eigen(&eigs, eta2, order);
    if eigen.is_err() {
        log::warn!("no determinant bound: η²|Λ₁| ≥ 1");
    }
    let hs = det_truncation_bound_hs(norms.lambda_max, norms.hs_norm.powi(2), eta2, order);
    Ok((eigen, hs))
}

/// Runs one scenario and returns its result table.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ResultTable> {
    cfg.validate()?;
    let process: ProcessType = cfg.source.process.into();
    let jsa = build_jsa(cfg)?;
    let spectrum: SchmidtSpectrum = schmidt_decompose(&jsa, None)?;
    let lambdas = spectrum.lambdas();
    let gain = match (cfg.source.gain, cfg.source.mean_pairs) {
        (Some(c), _) => c,
        (None, Some(mu)) => PairSource::from_mean_pairs(lambdas.clone(), mu, process, 1.0, 1.0)?.gain(),
        (None, None) => unreachable!("validated"),
    };
    let squeezing = SqueezingSpectrum::from_schmidt(&spectrum, gain, process)?;
    let k = schmidt_number(&spectrum)?;
    let gamma = build_covariance_exact(&spectrum, gain, process)?;

    let source_layout = gamma.layout().clone();
    let m_prime = source_layout.len();
    let layout = if cfg.source.vacuum_dofs > 0 {
        let g = source_layout.dofs()[0].grid.clone();
        let vac = ModeLayout::new(
            (0..cfg.source.vacuum_dofs)
                .map(|i| Dof::frequency(format!("vacuum{i}"), g.clone()))
                .collect(),
        )?;
        source_layout.extend(&vac)
    } else {
        source_layout.clone()
    };
    let full = Pipeline::new(cfg.steps()?).compose(&layout)?;
    let s = compress(&full, m_prime)?;
    let projection = cfg.detection_projection()?;

    let method = cfg.detection.method;
    let name = method.name();
    let mut table = ResultTable::default();
    let meta = &mut table.metadata;
    meta.push(("process".into(), format!("{process:?}")));
    meta.push(("gain".into(), format!("{gain:.16e}")));
    meta.push(("mean_pairs".into(), format!("{:.16e}", squeezing.mean_pair_number())));
    meta.push(("schmidt_number".into(), format!("{k:.16e}")));
    meta.push(("schmidt_modes".into(), lambdas.len().to_string()));
    meta.push(("grid_points".into(), format!("{}x{}", jsa.grid_signal().len(), jsa.grid_idler().len())));
    meta.push(("dofs".into(), layout.labels().join(";")));
    meta.push(("method".into(), name.into()));
    if method == Method::LogSeries {
        meta.push(("series_order".into(), cfg.detection.series_order.to_string()));
    }

    let rows = &mut table.rows;
    rows.push(Row::new("mean_pairs", "exact", squeezing.mean_pair_number()));
    rows.push(Row::new("schmidt_number", "svd", k));

    let dense_dim = 2 * source_layout.dofs().iter().map(|d| d.grid.len()).sum::<usize>();
    let exact = if dense_dim <= DIMENSION_CAP {
        Some(pipeline_vacuum(&s, &projection, &gamma)?)
    } else {
        log::warn!("skipping the exact determinant: dimension {dense_dim} exceeds {DIMENSION_CAP}");
        None
    };
    if let Some(p) = exact {
        rows.push(Row::new("p_vac", "exact", p));
    }

    match method {
        Method::Exact => {
            if exact.is_none() {
                return Err(CliError::config("detection.method", "exact determinant exceeds the dimension cap"));
            }
            if cfg.detection.pnd_cutoffs.is_some() {
                let ch = simple_channel(cfg, &projection)?;
                if !ch.unbounded {
                    return Err(CliError::config(
                        "detection.pnd_cutoffs",
                        "exact photon statistics need unbounded windows; use `log_series`",
                    ));
                }
                let (es, ei) = (ch.etas[0], ch.etas[m_prime - 1]);
                let gf = GeneratingFunction::exact(&squeezing, es, ei)?;
                if let Some(c) = pnd_cutoffs(cfg, gf.detectors())? {
                    push_pnd(rows, name, &pnd(&gf, &c)?);
                }
            }
        }
        Method::LogSeries => {
            let order = cfg.detection.series_order;
            let detectors = per_detector(&projection);
            let gf = if detectors.is_empty() {
                None
            } else {
                let ops = detector_operands(&s, &detectors, &gamma)?;
                Some(log_series_gf(&ops, order)?)
            };
            let p = match &gf {
                Some(g) => g.vacuum()?,
                None => 1.0,
            };
            let (eigen, hs) = det_bounds(&s, &projection, &squeezing, order)?;
            rows.push(Row::new("p_vac", name, p).with_bound(eigen.as_ref().ok()));
            for b in [eigen, hs].into_iter().flatten() {
                rows.push(Row::new("bound", &b.kind.to_string(), b.value));
            }
            if let (Some(g), Some(c)) = (&gf, pnd_cutoffs(cfg, detectors.len())?) {
                push_pnd(rows, name, &pnd(g, &c)?);
            }
        }
        Method::Poisson | Method::Linear => {
            let ch = simple_channel(cfg, &projection)?;
            let loss = LossProfile::per_dof(&source_layout, &ch.etas)?;
            let params = poisson_params(&jsa, &loss, &projection, gain, process)?;
            let es = ch.etas[0];
            let ei = ch.etas[m_prime - 1];
            if method == Method::Poisson {
                let b = poisson_vs_n2_bound(gain, k, es, ei, process)?;
                let (eigen, _) = det_bounds(&s, &projection, &squeezing, 2)?;
                let mut row = Row::new("p_vac", name, params.vacuum());
                row.bound = eigen
                    .as_ref()
                    .ok()
                    .map(|d| (format!("{}+{}", b.kind, d.kind), (1.0 + b.value) * (1.0 + d.value) - 1.0));
                rows.push(row);
                for r in [Ok(b), eigen].into_iter().flatten() {
                    rows.push(Row::new("bound", &r.kind.to_string(), r.value));
                }
                require_type_ii_pnd(cfg, process)?;
                if let Some(c) = pnd_cutoffs(cfg, 2)? {
                    push_pnd(rows, name, &pnd(&GeneratingFunction::Poisson(params), &c)?);
                }
            } else {
                let p = 1.0 - params.mu * (params.p_s + params.p_i - params.p_si);
                rows.push(Row::new("p_vac", name, p));
            }
            let m = &mut table.metadata;
            m.push(("poisson_mu".into(), format!("{:.16e}", params.mu)));
            m.push(("p_s".into(), format!("{:.16e}", params.p_s)));
            m.push(("p_i".into(), format!("{:.16e}", params.p_i)));
            m.push(("p_si".into(), format!("{:.16e}", params.p_si)));
        }
        Method::Hermite | Method::Quadratic => {
            let ch = simple_channel(cfg, &projection)?;
            if !ch.unbounded {
                return Err(CliError::config(
                    "detection.windows",
                    format!("method `{name}` needs unbounded windows"),
                ));
            }
            let (es, ei) = (ch.etas[0], ch.etas[m_prime - 1]);
            let src = PairSource::new(lambdas.clone(), gain, process, es, ei)?;
            if method == Method::Hermite {
                let h = src.hermite_params()?;
                rows.push(Row::new("p_vac", name, vacuum_probability(&src, VacuumMethod::Hermite)?));
                require_type_ii_pnd(cfg, process)?;
                if let Some(c) = pnd_cutoffs(cfg, 2)? {
                    push_pnd(rows, name, &pnd(&GeneratingFunction::Hermite(h), &c)?);
                }
                let m = &mut table.metadata;
                m.push(("hermite_mu".into(), format!("{:.16e}", h.mu)));
                m.push(("hermite_eps2".into(), format!("{:.16e}", h.eps2)));
            } else {
                rows.push(Row::new("p_vac", name, vacuum_probability(&src, VacuumMethod::Quadratic)?));
            }
        }
    }
    Ok(table)
}
