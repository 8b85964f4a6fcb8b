//! End-to-end acceptance checks, one PASS/FAIL line per criterion.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use biphoton_core::bounds::{
    covariance_truncation_bound, det_truncation_bound_eigen, det_truncation_bound_hs, f_n, h_n,
};
use biphoton_core::covariance::{build_covariance_exact, build_generator, covariance_series};
use biphoton_core::detection::{
    log_det_series, pnd, vacuum_probability, GeneratingFunction, HermiteParams, PairSource, PoissonParams,
    VacuumMethod,
};
use biphoton_core::linalg::{hermitian_eigenvalues, BlockOperator, CMatrix, C64};
use biphoton_core::oracle::{dense_eigenvalues, dense_log_det, dense_projection_eigs, tmsv_statistics, DenseState};
use biphoton_core::spectral::{build_gaussian_jsa, schmidt_decompose, schmidt_number};
use biphoton_core::transforms::{
    compress, compressed_determinant_operand, DetectionProjection, Pipeline, Step, SymplecticTransform, Window,
};
use biphoton_core::{
    DiscretizedJsa, Dof, Domain, FrequencyGrid, GaussianJsaModel, ModeLayout, ProcessType, RenormalizedCovariance,
    SqueezingSpectrum,
};
use biphoton_sim::figures::{figure, Figure, FIG1_ORDER, FIG1_SETS, FIG2_MUS, FIG2_ORDERS, FIG4_ASPECTS, LAMBDA_FLOOR};
use biphoton_sim::output::Dataset;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($arg:tt)*) => {
        if !$cond {
            return Err(format!($($arg)*));
        }
    };
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_complex(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| C64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)))
}

fn random_hermitian(r: &mut ChaCha8Rng, n: usize, radius: f64) -> CMatrix {
    let a = random_complex(r, n, n);
    let h = (&a + a.adjoint()) * C64::new(0.5, 0.0);
    let rho = hermitian_eigenvalues(&h).unwrap().iter().map(|x| x.abs()).fold(0.0, f64::max);
    h * C64::new(radius / rho, 0.0)
}

fn random_jsa(r: &mut ChaCha8Rng, n: usize, symmetric: bool) -> DiscretizedJsa {
    let g = FrequencyGrid::uniform(-2.0, 2.0, n).unwrap();
    let mut v = random_complex(r, n, n);
    if symmetric {
        v = (&v + v.transpose()) * C64::new(0.5, 0.0);
    }
    DiscretizedJsa::normalized(g.clone(), g, v).unwrap()
}

fn layout(m: usize, n: usize) -> ModeLayout {
    let g = FrequencyGrid::uniform(-3.0, 3.0, n).unwrap();
    ModeLayout::new((0..m).map(|k| Dof::frequency(format!("d{k}"), g.clone())).collect()).unwrap()
}

fn random_covariance(r: &mut ChaCha8Rng, layout: &ModeLayout, radius: f64) -> RenormalizedCovariance {
    let dims = layout.sector_dims();
    let n: usize = dims.iter().sum();
    let op = BlockOperator::from_dense(&random_hermitian(r, n, radius), dims.clone(), dims).unwrap();
    RenormalizedCovariance::new(op, layout.clone()).unwrap()
}

fn trace_norm(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m).unwrap().iter().map(|x| x.abs()).sum()
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `λ_j = (1 − ζ²)ζ^{2(j−1)}` down to `floor`.
fn gaussian_lambdas(aspect: f64, floor: f64) -> Vec<f64> {
    let z2 = ((aspect - 1.0) / (aspect + 1.0)).powi(2);
    let mut out = vec![1.0 - z2];
    if z2 == 0.0 {
        return out;
    }
    loop {
        let next = out[out.len() - 1] * z2;
        if next < floor {
            return out;
        }
        out.push(next);
    }
}

/// Type-II gain with `∑ sinh²(C√λ_j/2) = μ`, by bisection.
fn type_ii_gain(lambdas: &[f64], mu: f64) -> f64 {
    let pairs = |c: f64| lambdas.iter().map(|l| (c * l.sqrt() / 2.0).sinh().powi(2)).sum::<f64>();
    let (mut lo, mut hi) = (0.0, 1.0);
    while pairs(hi) < mu {
        hi *= 2.0;
    }
    while hi - lo > f64::EPSILON * hi {
        let mid = 0.5 * (lo + hi);
        if pairs(mid) < mu {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn rel_diff(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn fig3_curves() -> Check {
    let start = Instant::now();
    let d = figure(Figure::Fig3, None).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure!(d.x.len() == 301, "{} sample points", d.x.len());
    ensure!(d.x[0] == 0.0 && d.x[300] == 3.0, "range [{}, {}]", d.x[0], d.x[300]);
    let forms: [(&str, fn(f64) -> f64); 4] = [
        ("poisson", |m| (-m).exp()),
        ("single_mode_type_0i", |m| 1.0 / (1.0 + 2.0 * m).sqrt()),
        ("single_mode_type_ii", |m| 1.0 / (1.0 + m)),
        ("linear", |m| 1.0 - m),
    ];
    let mut worst = 0.0f64;
    for (name, f) in forms {
        let col = d.column(name).ok_or(format!("missing column {name}"))?;
        for (x, y) in d.x.iter().zip(col) {
            let err = (y - f(*x)).abs();
            worst = worst.max(err);
            ensure!(err <= 1e-12, "{name} at μ = {x}: {y} vs {}", f(*x));
        }
    }
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    Ok(format!("max error {worst:.1e}, {elapsed:.2?}"))
}

fn analytic_schmidt() -> Check {
    let start = Instant::now();
    let (mut worst_l, mut worst_k) = (0.0f64, 0.0f64);
    for aspect in [1.0, 2.0, 3.0, 5.0, 10.0, 20.0] {
        let model = GaussianJsaModel::new(1.0, aspect).unwrap();
        let (gs, gi) = model.default_grids(6.0, 6.0).unwrap();
        let jsa = build_gaussian_jsa(&model, &gs, &gi).unwrap();
        let s = schmidt_decompose(&jsa, None).map_err(|e| e.to_string())?;
        let want = gaussian_lambdas(aspect, 1e-8);
        let got = s.lambdas();
        ensure!(got.len() >= want.len(), "aspect {aspect}: {} modes resolved, {} expected", got.len(), want.len());
        for (j, (a, b)) in got.iter().zip(&want).enumerate() {
            worst_l = worst_l.max((a - b).abs());
            ensure!((a - b).abs() <= 1e-6, "aspect {aspect}, j = {}: {a} vs {b}", j + 1);
        }
        let z2 = ((aspect - 1.0) / (aspect + 1.0)).powi(2);
        let k_want = (1.0 + z2) / (1.0 - z2);
        let k = schmidt_number(&s).map_err(|e| e.to_string())?;
        worst_k = worst_k.max((k - k_want).abs());
        ensure!((k - k_want).abs() <= 1e-6, "aspect {aspect}: K = {k} vs {k_want}");
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    Ok(format!("max |Δλ| {worst_l:.1e}, max |ΔK| {worst_k:.1e}, {elapsed:.2?}"))
}

fn eigenvalue_law() -> Check {
    let mut r = rng(301);
    let mut worst = 0.0f64;
    for case in 0..20 {
        let process = if case % 2 == 0 { ProcessType::TypeII } else { ProcessType::Type0I };
        let n = r.gen_range(3..8);
        let jsa = random_jsa(&mut r, n, process == ProcessType::Type0I);
        let gain = r.gen_range(0.1..1.5);
        let spectrum = schmidt_decompose(&jsa, Some(usize::MAX)).unwrap();
        let gamma = build_covariance_exact(&spectrum, gain, process).map_err(|e| e.to_string())?;
        let dense = dense_eigenvalues(&gamma.to_dense()).unwrap();
        let (factor, copies) = match process {
            ProcessType::Type0I => (2.0, 1),
            ProcessType::TypeII => (1.0, 2),
        };
        let mut law = Vec::new();
        for l in spectrum.lambdas() {
            let s = factor * gain * l.sqrt();
            for _ in 0..copies {
                law.push(s.exp_m1() / 2.0);
                law.push((-s).exp_m1() / 2.0);
            }
        }
        law.resize(dense.len(), 0.0);
        law.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in dense.iter().zip(&law) {
            worst = worst.max((a - b).abs());
            ensure!((a - b).abs() <= 1e-9, "case {case} ({process:?}): {a} vs {b}");
        }
    }
    Ok(format!("20 instances, max deviation {worst:.1e}"))
}

fn covariance_truncation_equality() -> Check {
    let mut r = rng(401);
    let mut worst = 0.0f64;
    for case in 0..6 {
        let process = if case % 2 == 0 { ProcessType::TypeII } else { ProcessType::Type0I };
        let jsa = random_jsa(&mut r, 6, process == ProcessType::Type0I);
        let spectrum = schmidt_decompose(&jsa, Some(usize::MAX)).unwrap();
        let gain = r.gen_range(0.3..1.5);
        let exact = build_covariance_exact(&spectrum, gain, process).unwrap().to_dense();
        let z = build_generator(&jsa, gain, process).unwrap();
        let sig = SqueezingSpectrum::from_schmidt(&spectrum, gain, process).unwrap();
        for order in 1..=6 {
            let approx = covariance_series(&z, order).unwrap().to_dense();
            let rel = trace_norm(&(&exact - approx)) / trace_norm(&exact);
            let bound = covariance_truncation_bound(sig.sigmas(), order).unwrap().value;
            worst = worst.max((rel - bound).abs());
            ensure!((rel - bound).abs() <= 1e-9, "case {case} N = {order}: {rel} vs {bound}");
        }
    }
    for order in 1..=8 {
        let mut prev = (f_n(0.0, order), h_n(0.0, order));
        for i in 1..=1000 {
            let s = 10.0 * i as f64 / 1000.0;
            let cur = (f_n(s, order), h_n(s, order));
            ensure!(cur.0 >= prev.0 && cur.1 >= prev.1, "f/h not monotone at N = {order}, σ = {s}");
            prev = cur;
        }
    }
    Ok(format!("max |bound − dense| {worst:.1e}; f_N, h_N monotone for N ≤ 8"))
}

fn determinant_bounds_sound() -> Check {
    let mut r = rng(501);
    let mut tightest = f64::INFINITY;
    for case in 0..100 {
        let n = r.gen_range(3..12);
        let radius = r.gen_range(0.05..0.5);
        let gamma = random_hermitian(&mut r, n, radius);
        let eta2: f64 = [0.1, 0.5, 1.0][case % 3];
        let mask: Vec<bool> = (0..n).map(|_| r.gen_bool(0.7)).collect();
        let p = CMatrix::from_fn(n, n, |i, j| C64::new(if i == j && mask[i] { eta2.sqrt() } else { 0.0 }, 0.0));
        let k = &p * &gamma * &p;
        let eigs = hermitian_eigenvalues(&gamma).unwrap();
        let l1 = eigs.iter().map(|x| x.abs()).fold(0.0, f64::max);
        let hs2: f64 = eigs.iter().map(|x| x * x).sum();
        let exact = dense_log_det(&k).unwrap();
        for order in 1..=4 {
            let approx = log_det_series(&k, order).unwrap();
            let actual = (-0.5 * (approx - exact)).exp_m1().abs();
            let eig = det_truncation_bound_eigen(&eigs, eta2, order).unwrap().value;
            let hs = det_truncation_bound_hs(l1, hs2, eta2, order).unwrap().value;
            // The dense reference log-determinant is accurate to ~1e-16 absolute.
            ensure!(eig + 1e-14 >= actual, "case {case} N = {order}: eigen {eig} < {actual}");
            ensure!(hs + 1e-14 >= actual, "case {case} N = {order}: HS {hs} < {actual}");
            ensure!(eig <= hs * (1.0 + 1e-12), "case {case} N = {order}: eigen {eig} > HS {hs}");
            if actual > 1e-12 {
                tightest = tightest.min(eig / actual);
            }
        }
    }
    Ok(format!("100 instances, N = 1..4, min eigen bound / error {tightest:.3}"))
}

/// `(e^{x} − 1)/2`.
fn half_expm1(x: f64) -> f64 {
    x.exp_m1() / 2.0
}

fn fig1_reference(aspect: f64, eta2: f64, mu: f64) -> f64 {
    let lambdas = gaussian_lambdas(aspect, LAMBDA_FLOOR);
    let c = type_ii_gain(&lambdas, mu);
    let mut hs2 = 0.0;
    for l in &lambdas {
        let s = c * l.sqrt();
        hs2 += 2.0 * (half_expm1(s).powi(2) + half_expm1(-s).powi(2));
    }
    let l1 = half_expm1(c * lambdas[0].sqrt());
    let x = eta2 * l1;
    let mut tail = 0.0;
    let mut n = FIG1_ORDER + 1;
    loop {
        let t = x.powi(n as i32) / n as f64;
        tail += t;
        if t < 1e-20 * tail {
            break;
        }
        n += 1;
    }
    (hs2 / (2.0 * l1 * l1) * tail).exp_m1()
}

fn fig2_reference(aspect: f64, order: usize, mu: f64) -> f64 {
    let lambdas = gaussian_lambdas(aspect, LAMBDA_FLOOR);
    let s = type_ii_gain(&lambdas, mu) * lambdas[0].sqrt();
    // Terms of the cosh (odd N) or sinh (even N) series beyond order N.
    let mut term: f64 = (1..=order + 1).map(|k| s / k as f64).product();
    let mut tail = 0.0;
    let mut n = order + 1;
    loop {
        tail += term;
        if term < 1e-20 * tail {
            break;
        }
        term *= s * s / ((n + 1) * (n + 2)) as f64;
        n += 2;
    }
    tail / s.sinh()
}

fn check_bound_figure(d: &Dataset, reference: impl Fn(usize, f64) -> f64) -> Result<f64, String> {
    ensure!(d.x[0] == 1.0 && (d.x[d.x.len() - 1] - 1e3).abs() < 1e-9, "aspect range [{}, {}]", d.x[0], d.x[d.x.len() - 1]);
    let mut worst = 0.0f64;
    for (c, (name, col)) in d.columns.iter().enumerate() {
        for i in 0..col.len() {
            if i > 0 {
                ensure!(col[i] <= col[i - 1], "{name} rises at aspect {}: {} > {}", d.x[i], col[i], col[i - 1]);
            }
            let want = reference(c, d.x[i]);
            worst = worst.max(rel_diff(col[i], want));
            ensure!(rel_diff(col[i], want) <= 1e-12, "{name} at aspect {}: {} vs {want}", d.x[i], col[i]);
        }
        ensure!(col[col.len() - 1] < col[0], "{name} does not shrink");
    }
    Ok(worst)
}

fn bound_figures() -> Check {
    let d1 = figure(Figure::Fig1, None).map_err(|e| e.to_string())?;
    ensure!(d1.columns.len() == FIG1_SETS.len(), "fig1 has {} curves", d1.columns.len());
    let w1 = check_bound_figure(&d1, |c, a| {
        let (eta2, mu) = FIG1_SETS[c];
        fig1_reference(a, eta2, mu)
    })?;
    let sets: Vec<(usize, f64)> = FIG2_ORDERS.iter().flat_map(|o| FIG2_MUS.iter().map(move |m| (*o, *m))).collect();
    let d2 = figure(Figure::Fig2, None).map_err(|e| e.to_string())?;
    ensure!(d2.columns.len() == sets.len(), "fig2 has {} curves", d2.columns.len());
    let w2 = check_bound_figure(&d2, |c, a| fig2_reference(a, sets[c].0, sets[c].1))?;
    Ok(format!(
        "{} + {} monotone curves, max relative deviation {:.1e} / {:.1e}",
        d1.columns.len(),
        d2.columns.len(),
        w1,
        w2
    ))
}

fn approximation_ordering() -> Check {
    let grid: Vec<f64> = (1..=300).map(|i| 3.0 * i as f64 / 300.0).collect();
    let spectra = [
        (ProcessType::TypeII, vec![1.0]),
        (ProcessType::TypeII, gaussian_lambdas(10.0, 1e-16)),
        (ProcessType::TypeII, gaussian_lambdas(100.0, 1e-16)),
        (ProcessType::Type0I, vec![1.0]),
        (ProcessType::Type0I, gaussian_lambdas(5.0, 1e-16)),
    ];
    let mut points = 0;
    for (process, lambdas) in &spectra {
        for eta in [1.0, 0.8] {
            let probe = PairSource::new(lambdas.clone(), 0.0, *process, eta, eta).unwrap();
            let p = probe.click_probability();
            for mu_p in &grid {
                let src = PairSource::from_mean_pairs(lambdas.clone(), mu_p / p, *process, eta, eta).unwrap();
                let exact = vacuum_probability(&src, VacuumMethod::Exact).unwrap();
                let poisson = vacuum_probability(&src, VacuumMethod::Poisson).unwrap();
                let linear = vacuum_probability(&src, VacuumMethod::Linear).unwrap();
                ensure!(
                    (exact - poisson).abs() <= (exact - linear).abs(),
                    "{process:?} η = {eta}, μp = {mu_p}: Poisson {poisson}, linear {linear}, exact {exact}"
                );
                points += 1;
            }
        }
    }
    let d = figure(Figure::Fig4, None).map_err(|e| e.to_string())?;
    let mut examined = 0;
    for a in FIG4_ASPECTS {
        let h = d.column(&format!("hermite,aspect={a}")).ok_or("missing hermite column")?;
        let q = d.column(&format!("quadratic,aspect={a}")).ok_or("missing quadratic column")?;
        for (i, (eh, eq)) in h.iter().zip(q).enumerate() {
            ensure!(eh <= eq, "aspect {a}, μ = {}: Hermite {eh} > quadratic {eq}", d.x[i]);
            examined += 1;
        }
    }
    Ok(format!("{points} Poisson/linear points, {examined} Hermite/quadratic points"))
}

fn bivariate_poisson_pmf(p: &PoissonParams, a: usize, b: usize) -> f64 {
    let l1 = p.mu * (p.p_s - p.p_si);
    let l2 = p.mu * (p.p_i - p.p_si);
    let l12 = p.mu * p.p_si;
    let sum: f64 = (0..=a.min(b))
        .map(|k| {
            l1.powi((a - k) as i32) * l2.powi((b - k) as i32) * l12.powi(k as i32)
                / (factorial(a - k) * factorial(b - k) * factorial(k))
        })
        .sum();
    (-(l1 + l2 + l12)).exp() * sum
}

fn pnd_correctness() -> Check {
    let mut worst = [0.0f64; 3];
    for p in [
        PoissonParams::new(1.0, 1.0, 1.0, 1.0).unwrap(),
        PoissonParams::new(0.7, 0.8, 0.6, 0.4).unwrap(),
        PoissonParams::new(2.0, 0.5, 0.9, 0.45).unwrap(),
    ] {
        let stats = pnd(&GeneratingFunction::Poisson(p), &[10, 10]).map_err(|e| e.to_string())?;
        for a in 0..=10 {
            for b in 0..=10 {
                let err = (stats.get(&[a, b]) - bivariate_poisson_pmf(&p, a, b)).abs();
                worst[0] = worst[0].max(err);
                ensure!(err <= 1e-12, "Poisson {p:?} at ({a}, {b}): error {err}");
            }
        }
    }
    for (mu, eps2) in [(0.8, 0.3), (0.2, 0.04), (1.5, 1.2)] {
        let h = HermiteParams::new(mu, eps2, 1.0, 1.0).unwrap();
        let marg = pnd(&GeneratingFunction::Hermite(h), &[8, 8]).map_err(|e| e.to_string())?.marginal(0);
        let eps = f64::sqrt(eps2);
        let y = (mu - eps2) / (2f64.sqrt() * eps);
        let mut hn = vec![1.0, 2.0 * y];
        for n in 1..8 {
            hn.push(2.0 * y * hn[n] + 2.0 * n as f64 * hn[n - 1]);
        }
        for (n, got) in marg.iter().enumerate() {
            let want = (eps / 2f64.sqrt()).powi(n as i32) / factorial(n) * (-(mu - eps2 / 2.0)).exp() * hn[n];
            worst[1] = worst[1].max((got - want).abs());
            ensure!((got - want).abs() <= 1e-10, "Hermite (μ = {mu}, ε² = {eps2}) n = {n}: {got} vs {want}");
        }
    }
    let (sigma, eta) = (0.4, 0.7);
    let spec = SqueezingSpectrum::new(vec![sigma], ProcessType::TypeII, sigma).unwrap();
    let stats = pnd(&GeneratingFunction::exact(&spec, eta, eta).unwrap(), &[6, 6]).map_err(|e| e.to_string())?;
    let oracle = tmsv_statistics(sigma, eta, 6);
    for a in 0..=6 {
        for b in 0..=6 {
            let err = (stats.get(&[a, b]) - oracle[a][b]).abs();
            worst[2] = worst[2].max(err);
            ensure!(err <= 1e-10, "TMSV at ({a}, {b}): error {err}");
        }
    }

    let cut = |mean: f64| (10.0 * mean).ceil() as usize + 20;
    let mut deficits = Vec::new();
    let p = PoissonParams::new(1.2, 0.8, 0.7, 0.5).unwrap();
    let c = cut(p.mu * p.p_s.max(p.p_i));
    deficits.push(("poisson", pnd(&GeneratingFunction::Poisson(p), &[c, c]).unwrap().normalization_deficit()));
    let h = HermiteParams::new(0.9, 0.3, 0.8, 0.6).unwrap();
    let c = cut(h.mu);
    deficits.push(("hermite", pnd(&GeneratingFunction::Hermite(h), &[c, c]).unwrap().normalization_deficit()));
    let c = cut((sigma / 2.0).sinh().powi(2) * eta * eta);
    deficits.push(("tmsv", pnd(&GeneratingFunction::exact(&spec, eta, eta).unwrap(), &[c, c]).unwrap().normalization_deficit()));
    let src = PairSource::from_mean_pairs(vec![0.6, 0.3, 0.1], 0.8, ProcessType::TypeII, 0.9, 0.8).unwrap();
    let c = cut(src.mean_pairs() * 0.81);
    deficits.push(("exact type-II", pnd(&src.exact_gf(), &[c, c]).unwrap().normalization_deficit()));
    for (name, d) in &deficits {
        ensure!(*d < 1e-8, "{name} normalization deficit {d}");
    }
    let max_def = deficits.iter().map(|(_, d)| *d).fold(0.0, f64::max);
    Ok(format!(
        "Poisson {:.1e}, Hermite {:.1e}, TMSV {:.1e}, max deficit {max_def:.1e}",
        worst[0], worst[1], worst[2]
    ))
}

fn random_window(r: &mut ChaCha8Rng, grid: &FrequencyGrid, domain: Domain) -> Window {
    match r.gen_range(0..6) {
        0 => Window::unbounded(domain),
        1 => Window::empty(domain),
        _ => {
            let a = r.gen_range(grid.lo()..grid.hi());
            let b = r.gen_range(grid.lo()..grid.hi());
            Window::new(a.min(b), a.max(b), domain).unwrap()
        }
    }
}

fn random_projection(r: &mut ChaCha8Rng, layout: &ModeLayout) -> DetectionProjection {
    DetectionProjection::new(layout.dofs().iter().map(|d| random_window(r, &d.grid, d.domain)).collect())
}

fn random_pipeline(r: &mut ChaCha8Rng, input: &ModeLayout) -> SymplecticTransform {
    let m = input.len();
    let mut steps = Vec::new();
    let mut domains = vec![Domain::Frequency; m];
    for _ in 0..r.gen_range(3..7) {
        let dof = r.gen_range(0..m);
        match r.gen_range(0..4) {
            0 if domains[dof] == Domain::Frequency => steps.push(Step::Phase {
                phi0: r.gen_range(-3.0..3.0),
                tau: r.gen_range(-1.0..1.0),
                beta_l: r.gen_range(-0.5..0.5),
                dof,
            }),
            1 if domains[dof] == Domain::Frequency => {
                steps.push(Step::Fourier { dof: Some(dof) });
                domains[dof] = Domain::Time;
            }
            2 => {
                let other = (dof + r.gen_range(1..m)) % m;
                if domains[other] == domains[dof] {
                    steps.push(Step::BeamSplitter {
                        t: r.gen_range(-1.0..1.0),
                        dofs: (dof, other),
                    });
                }
            }
            _ => steps.push(Step::Loss {
                etas: (0..m).map(|_| r.gen_range(0.0..=1.0)).collect(),
            }),
        }
    }
    Pipeline::new(steps).compose(input).unwrap()
}

/// `ln det(𝟙 + PSΓS†P)` on the full, vacuum-padded space.
fn uncompressed_log_det(s: &SymplecticTransform, p: &DetectionProjection, padded: &RenormalizedCovariance) -> f64 {
    let sd = s.op().to_dense();
    let pd = p.to_transform(s.output()).unwrap().op().to_dense();
    let big = &pd * &sd * padded.to_dense() * sd.adjoint() * &pd;
    dense_log_det(&big).unwrap()
}

fn compressed_log_det(s: &SymplecticTransform, p: &DetectionProjection, gamma: &RenormalizedCovariance) -> f64 {
    dense_log_det(&compressed_determinant_operand(s, p, gamma).unwrap().to_dense()).unwrap()
}

fn pad(gamma: &RenormalizedCovariance, full: &ModeLayout, m_prime: usize) -> RenormalizedCovariance {
    match ModeLayout::new(full.dofs()[m_prime..].to_vec()) {
        Ok(vacuum) => gamma.with_vacuum(&vacuum).unwrap(),
        Err(_) => gamma.clone(),
    }
}

fn best_of<F: FnMut() -> f64>(runs: usize, mut f: F) -> (Duration, f64) {
    let mut best = Duration::MAX;
    let mut value = 0.0;
    for _ in 0..runs {
        let t = Instant::now();
        value = std::hint::black_box(f());
        best = best.min(t.elapsed());
    }
    (best, value)
}

fn compression_identity() -> Check {
    let mut r = rng(901);
    let mut worst = 0.0f64;
    for case in 0..50 {
        let m_prime = r.gen_range(1..=2);
        let m = r.gen_range(m_prime.max(2)..=4);
        let full = layout(m, 6);
        let gamma = random_covariance(&mut r, &full.prefix(m_prime).unwrap(), 0.45);
        let big_s = random_pipeline(&mut r, &full);
        let p = random_projection(&mut r, big_s.output());
        let s = compress(&big_s, m_prime).unwrap();
        let lhs = uncompressed_log_det(&big_s, &p, &pad(&gamma, &full, m_prime));
        let rhs = compressed_log_det(&s, &p, &gamma);
        let rel = (lhs - rhs).exp_m1().abs();
        worst = worst.max(rel);
        ensure!(rel <= 1e-10, "case {case}: det ratio − 1 = {rel}");
    }

    // Type-II source (M' = 2) routed through a network of 8 DOFs on a 64-point grid.
    let model = GaussianJsaModel::new(1.0, 2.0).unwrap();
    let half = 6.0 * model.marginal_std();
    let g = FrequencyGrid::uniform(-half, half, 64).unwrap();
    let jsa = build_gaussian_jsa(&model, &g, &g).unwrap();
    let gamma = build_covariance_exact(&schmidt_decompose(&jsa, None).unwrap(), 0.8, ProcessType::TypeII).unwrap();
    let (m_prime, m) = (2, 8);
    let vac = ModeLayout::new((m_prime..m).map(|k| Dof::frequency(format!("v{k}"), g.clone())).collect()).unwrap();
    let full = gamma.layout().extend(&vac);
    let mut steps: Vec<Step> = [(0, 2), (1, 3), (0, 4), (1, 5), (2, 6), (3, 7)]
        .into_iter()
        .map(|dofs| Step::BeamSplitter { t: 0.8, dofs })
        .collect();
    steps.push(Step::Loss {
        etas: (0..m).map(|k| 1.0 - 0.05 * k as f64).collect(),
    });
    let big_s = Pipeline::new(steps).compose(&full).unwrap();
    let p = DetectionProjection::new(
        (0..m)
            .map(|k| if k % 2 == 0 { Window::new(-1.0, 2.0, Domain::Frequency).unwrap() } else { Window::unbounded(Domain::Frequency) })
            .collect(),
    );
    let padded = pad(&gamma, &full, m_prime);
    let (t_full, lhs) = best_of(3, || uncompressed_log_det(&big_s, &p, &padded));
    let (t_small, rhs) = best_of(3, || compressed_log_det(&compress(&big_s, m_prime).unwrap(), &p, &gamma));
    let rel = (lhs - rhs).exp_m1().abs();
    ensure!(rel <= 1e-10, "timed pipeline: det ratio − 1 = {rel}");
    let speedup = t_full.as_secs_f64() / t_small.as_secs_f64();
    ensure!(speedup >= 5.0, "compressed path only {speedup:.1}× faster ({t_small:?} vs {t_full:?})");
    Ok(format!("50 pipelines, max deviation {worst:.1e}; M/M' = 4 speedup {speedup:.0}×"))
}

fn interlacing() -> Check {
    let mut r = rng(1001);
    for case in 0..100 {
        let m = r.gen_range(1..=3);
        let l = layout(m, r.gen_range(3..8));
        let radius = r.gen_range(0.1..2.0);
        let gamma = random_covariance(&mut r, &l, radius);
        let p = random_projection(&mut r, &l);
        let dense = gamma.to_dense();
        let state = DenseState::new(dense.clone(), vec![1.0; dense.nrows()]).unwrap();
        let pd = p.to_transform(&l).unwrap().op().to_dense();
        let mask: Vec<usize> = (0..pd.nrows()).filter(|&i| pd[(i, i)].re == 1.0).collect();
        let full = dense_projection_eigs(&state, &(0..state.dim()).collect::<Vec<_>>()).unwrap();
        let sub = dense_projection_eigs(&state, &mask).unwrap();
        let parts = |v: &[f64], sign: f64| {
            let mut x: Vec<f64> = v.iter().map(|e| (sign * e).max(0.0)).collect();
            x.sort_by(|a, b| b.total_cmp(a));
            x
        };
        for sign in [1.0, -1.0] {
            let (a, b) = (parts(&full, sign), parts(&sub, sign));
            for (j, y) in b.iter().enumerate() {
                ensure!(*y <= a[j] + 1e-9, "case {case}, index {j}: {} exceeds {}", sign * y, sign * a[j]);
            }
        }
    }
    Ok("100 random (Γ, projection) pairs".into())
}

#[test]
fn acceptance_criteria() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("vacuum probability closed forms (fig3)", fig3_curves),
        ("analytic vs numerical Schmidt spectrum", analytic_schmidt),
        ("covariance eigenvalue law", eigenvalue_law),
        ("covariance truncation bound is exact for M = J", covariance_truncation_equality),
        ("determinant truncation bounds are sound", determinant_bounds_sound),
        ("bound curves over aspect ratio (fig1, fig2)", bound_figures),
        ("approximation ordering (fig3, fig4)", approximation_ordering),
        ("photon-number distributions", pnd_correctness),
        ("compression identity and speedup", compression_identity),
        ("projection interlacing", interlacing),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                println!("FAIL {:>2} {name}: {detail}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
