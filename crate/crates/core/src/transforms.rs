//! Linear optics on covariances: phase and dispersion, Fourier transform,
//! beam splitters, loss and detection windows.
//!
//! Every map is a block operator `s` from an input to an output layout, and
//! acts as `Γ → sΓs†`.

use std::f64::consts::PI;

use crate::covariance::RenormalizedCovariance;
use crate::error::{invalid, Error, Result};
use crate::layout::{Dof, Domain, ModeLayout};
use crate::linalg::{Block, BlockOperator, CMatrix, CVector, C64, ONE, ZERO};
use crate::spectral::FrequencyGrid;

/// A block operator between two mode layouts.
#[derive(Clone, Debug, PartialEq)]
pub struct SymplecticTransform {
    op: BlockOperator,
    input: ModeLayout,
    output: ModeLayout,
}

impl SymplecticTransform {
    pub fn new(op: BlockOperator, input: ModeLayout, output: ModeLayout) -> Result<Self> {
        if op.col_dims() != input.sector_dims().as_slice() || op.row_dims() != output.sector_dims().as_slice() {
            return Err(Error::ShapeMismatch("operator does not match its layouts".into()));
        }
        Ok(Self { op, input, output })
    }

    pub fn identity(layout: &ModeLayout) -> Self {
        Self {
            op: BlockOperator::identity(layout.sector_dims()),
            input: layout.clone(),
            output: layout.clone(),
        }
    }

    pub fn op(&self) -> &BlockOperator {
        &self.op
    }

    pub fn input(&self) -> &ModeLayout {
        &self.input
    }

    pub fn output(&self) -> &ModeLayout {
        &self.output
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn after(&self, first: &SymplecticTransform) -> Result<Self> {
        if !same_shape(&first.output, &self.input) {
            return Err(Error::ShapeMismatch("transform layouts do not chain".into()));
        }
        Self::new(self.op.mul(&first.op)?, first.input.clone(), self.output.clone())
    }

    /// Largest entry of `S K S† − K` with `K = diag(𝟙, −𝟙)` (square transforms).
    pub fn symplectic_defect(&self) -> f64 {
        let m = self.output.len();
        let k = |dims: Vec<usize>, m: usize| {
            let diag = (0..2 * m)
                .map(|i| {
                    if i < m {
                        Block::Identity
                    } else {
                        Block::Diagonal(CVector::from_element(dims[i], -ONE))
                    }
                })
                .collect();
            BlockOperator::block_diagonal(dims, diag).expect("square layout")
        };
        if self.input.len() != m {
            return f64::INFINITY;
        }
        let kin = k(self.input.sector_dims(), m);
        let kout = k(self.output.sector_dims(), m);
        let lhs = self.op.mul(&kin).and_then(|x| x.mul(&self.op.adjoint()));
        match lhs.and_then(|l| l.sub(&kout)) {
            Ok(d) => d.to_dense().iter().map(|z| z.norm()).fold(0.0, f64::max),
            Err(_) => f64::INFINITY,
        }
    }

    /// Largest entry of `S S† − 𝟙`.
    pub fn unitarity_defect(&self) -> f64 {
        let id = BlockOperator::identity(self.output.sector_dims());
        match self.op.mul(&self.op.adjoint()).and_then(|p| p.sub(&id)) {
            Ok(d) => d.to_dense().iter().map(|z| z.norm()).fold(0.0, f64::max),
            Err(_) => f64::INFINITY,
        }
    }
}

fn same_shape(a: &ModeLayout, b: &ModeLayout) -> bool {
    a.len() == b.len()
        && a.dofs()
            .iter()
            .zip(b.dofs())
            .all(|(x, y)| x.grid == y.grid && x.domain == y.domain)
}

/// Block-diagonal map with `ann[m]` on `a_m` and `cre[m]` on `a_m†`.
fn diagonal_map(layout: &ModeLayout, ann: Vec<Block>, cre: Vec<Block>) -> Result<SymplecticTransform> {
    let diag = ann.into_iter().chain(cre).collect();
    let op = BlockOperator::block_diagonal(layout.sector_dims(), diag)?;
    SymplecticTransform::new(op, layout.clone(), layout.clone())
}

/// Phase `φ(ω) = φ₀ + τω + (βL/2)ω²` on DOF `dof`: `a(ω) → e^{iφ(ω)} a(ω)`.
///
/// Grid points are taken as detunings from the carrier.
pub fn phase_shift(phi0: f64, tau: f64, beta_l: f64, layout: &ModeLayout, dof: usize) -> Result<SymplecticTransform> {
    let d = layout.dof(dof)?;
    if d.domain != Domain::Frequency {
        return Err(invalid("phase shifts act on frequency-domain DOFs"));
    }
    let m = layout.len();
    let mut ann = vec![Block::Identity; m];
    let mut cre = vec![Block::Identity; m];
    if phi0 != 0.0 || tau != 0.0 || beta_l != 0.0 {
        let phase: Vec<f64> = d.grid.points().iter().map(|w| phi0 + tau * w + 0.5 * beta_l * w * w).collect();
        ann[dof] = Block::Diagonal(CVector::from_iterator(phase.len(), phase.iter().map(|p| C64::from_polar(1.0, *p))));
        cre[dof] = Block::Diagonal(CVector::from_iterator(phase.len(), phase.iter().map(|p| C64::from_polar(1.0, -*p))));
    }
    diagonal_map(layout, ann, cre)
}

/// Time grid conjugate to a uniform frequency grid: spacing `2π/(NΔω)`,
/// `t_k = (k − ⌊N/2⌋)Δt`, equal weights `Δt`.
pub fn time_grid(freq: &FrequencyGrid) -> Result<FrequencyGrid> {
    let dw = freq
        .spacing()
        .ok_or_else(|| invalid("the Fourier transform needs a uniform frequency grid"))?;
    let n = freq.len();
    let dt = 2.0 * PI / (n as f64 * dw);
    let points = (0..n).map(|k| (k as f64 - (n / 2) as f64) * dt).collect();
    FrequencyGrid::new(points, vec![dt; n])
}

/// Unitary DFT block `F_{km} = e^{−iω_m t_k}/√N`.
pub fn fourier_matrix(freq: &FrequencyGrid, time: &FrequencyGrid) -> CMatrix {
    let n = freq.len();
    let norm = 1.0 / (n as f64).sqrt();
    CMatrix::from_fn(time.len(), n, |k, m| {
        C64::from_polar(norm, -freq.points()[m] * time.points()[k])
    })
}

/// Fourier transform of DOF `dof` into the time domain.
///
/// The output layout carries the conjugate time grid. The transform is the
/// periodic (equal-weight) DFT, hence exactly unitary.
pub fn fourier(layout: &ModeLayout, dof: usize) -> Result<SymplecticTransform> {
    let d = layout.dof(dof)?;
    if d.domain != Domain::Frequency {
        return Err(invalid(format!("DOF {dof} is already in the time domain")));
    }
    let t = time_grid(&d.grid)?;
    let f = fourier_matrix(&d.grid, &t);
    let m = layout.len();
    let output = layout.with_dof(
        dof,
        Dof {
            label: d.label.clone(),
            grid: t,
            domain: Domain::Time,
        },
    )?;
    let mut op = BlockOperator::zeros(output.sector_dims(), layout.sector_dims());
    for k in 0..m {
        if k == dof {
            op.set(k, k, Block::Dense(f.clone()))?;
            op.set(m + k, m + k, Block::Dense(f.map(|z| z.conj())))?;
        } else {
            op.set(k, k, Block::Identity)?;
            op.set(m + k, m + k, Block::Identity)?;
        }
    }
    SymplecticTransform::new(op, layout.clone(), output)
}

/// Fourier transform of every frequency-domain DOF.
pub fn fourier_all(layout: &ModeLayout) -> Result<SymplecticTransform> {
    let mut total = SymplecticTransform::identity(layout);
    for m in 0..layout.len() {
        if layout.dofs()[m].domain == Domain::Frequency {
            let step = fourier(total.output(), m)?;
            total = step.after(&total)?;
        }
    }
    Ok(total)
}

/// Beam splitter mixing DOFs `(i, j)`: `a_i → T a_i + R a_j`, `a_j → −R a_i + T a_j`.
pub fn beam_splitter(t: &[f64], r: &[f64], dofs: (usize, usize), layout: &ModeLayout) -> Result<SymplecticTransform> {
    let (i, j) = dofs;
    if i == j {
        return Err(invalid("a beam splitter needs two distinct DOFs"));
    }
    let (di, dj) = (layout.dof(i)?, layout.dof(j)?);
    if di.grid != dj.grid || di.domain != dj.domain {
        return Err(invalid("beam-splitter ports need identical grids"));
    }
    let n = di.grid.len();
    if t.len() != n || r.len() != n {
        return Err(Error::ShapeMismatch(format!("T/R have {}/{} samples on a {n}-point grid", t.len(), r.len())));
    }
    for (k, (tt, rr)) in t.iter().zip(r).enumerate() {
        if !((tt * tt + rr * rr - 1.0).abs() <= 1e-12) {
            return Err(invalid(format!("T² + R² = {} at sample {k}", tt * tt + rr * rr)));
        }
    }
    let diag = |v: &[f64], s: f64| -> Block {
        if v.iter().all(|x| *x == 0.0) {
            Block::Zero
        } else if s == 1.0 && v.iter().all(|x| *x == 1.0) {
            Block::Identity
        } else {
            Block::Diagonal(CVector::from_iterator(v.len(), v.iter().map(|x| C64::new(s * x, 0.0))))
        }
    };
    let m = layout.len();
    let dims = layout.sector_dims();
    let mut op = BlockOperator::identity(dims);
    for off in [0, m] {
        op.set(off + i, off + i, diag(t, 1.0))?;
        op.set(off + j, off + j, diag(t, 1.0))?;
        op.set(off + i, off + j, diag(r, 1.0))?;
        op.set(off + j, off + i, diag(r, -1.0))?;
    }
    SymplecticTransform::new(op, layout.clone(), layout.clone())
}

/// Constant-ratio beam splitter.
pub fn beam_splitter_constant(t: f64, dofs: (usize, usize), layout: &ModeLayout) -> Result<SymplecticTransform> {
    if !(0.0..=1.0).contains(&t.abs()) {
        return Err(invalid("transmission amplitude must lie in [−1, 1]"));
    }
    let n = layout.dof(dofs.0)?.grid.len();
    let r = (1.0 - t * t).sqrt();
    beam_splitter(&vec![t; n], &vec![r; n], dofs, layout)
}

/// Sampled field transmittivity per DOF.
#[derive(Clone, Debug, PartialEq)]
pub struct LossProfile {
    etas: Vec<Vec<f64>>,
}

impl LossProfile {
    pub fn new(etas: Vec<Vec<f64>>) -> Result<Self> {
        for (m, e) in etas.iter().enumerate() {
            if let Some(bad) = e.iter().find(|x| !(0.0..=1.0).contains(*x)) {
                return Err(invalid(format!("transmittivity {bad} of DOF {m} outside [0, 1]")));
            }
        }
        Ok(Self { etas })
    }

    /// The same constant transmittivity on every DOF of `layout`.
    pub fn uniform(layout: &ModeLayout, eta: f64) -> Result<Self> {
        Self::new(layout.dofs().iter().map(|d| vec![eta; d.grid.len()]).collect())
    }

    /// One constant per DOF.
    pub fn per_dof(layout: &ModeLayout, etas: &[f64]) -> Result<Self> {
        if etas.len() != layout.len() {
            return Err(Error::ShapeMismatch("one transmittivity per DOF expected".into()));
        }
        Self::new(layout.dofs().iter().zip(etas).map(|(d, e)| vec![*e; d.grid.len()]).collect())
    }

    pub fn etas(&self) -> &[Vec<f64>] {
        &self.etas
    }

    /// Largest `η²` over all DOFs and samples.
    pub fn max_eta2(&self) -> f64 {
        self.etas.iter().flatten().map(|e| e * e).fold(0.0, f64::max)
    }

    /// The loss as a (non-symplectic) diagonal contraction on `layout`.
    pub fn to_transform(&self, layout: &ModeLayout) -> Result<SymplecticTransform> {
        if self.etas.len() != layout.len() || self.etas.iter().zip(layout.dofs()).any(|(e, d)| e.len() != d.grid.len()) {
            return Err(Error::ShapeMismatch("loss profile does not match the covariance grids".into()));
        }
        let blocks: Vec<Block> = self
            .etas
            .iter()
            .map(|e| {
                if e.iter().all(|x| *x == 1.0) {
                    Block::Identity
                } else if e.iter().all(|x| *x == 0.0) {
                    Block::Zero
                } else {
                    Block::Diagonal(CVector::from_iterator(e.len(), e.iter().map(|x| C64::new(*x, 0.0))))
                }
            })
            .collect();
        diagonal_map(layout, blocks.clone(), blocks)
    }
}

/// `Γ → ηΓη`.
pub fn apply_loss(gamma: &RenormalizedCovariance, eta: &LossProfile) -> Result<RenormalizedCovariance> {
    apply_transform(&eta.to_transform(gamma.layout())?, gamma)
}

/// Detection interval for one DOF; `None` is the empty window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Window {
    pub interval: Option<(f64, f64)>,
    pub domain: Domain,
}

impl Window {
    pub fn unbounded(domain: Domain) -> Self {
        Self {
            interval: Some((f64::NEG_INFINITY, f64::INFINITY)),
            domain,
        }
    }

    pub fn empty(domain: Domain) -> Self {
        Self { interval: None, domain }
    }

    pub fn new(lo: f64, hi: f64, domain: Domain) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(invalid(format!("window [{lo}, {hi}] is not well ordered")));
        }
        Ok(Self {
            interval: Some((lo, hi)),
            domain,
        })
    }

    /// Grid indices inside the window; endpoints round outward to the
    /// nearest enclosing grid points.
    pub fn mask(&self, grid: &FrequencyGrid) -> Result<Vec<usize>> {
        let Some((lo, hi)) = self.interval else {
            return Ok(Vec::new());
        };
        let p = grid.points();
        if hi < grid.lo() || lo > grid.hi() {
            return Err(invalid(format!("window [{lo}, {hi}] lies outside the grid [{}, {}]", grid.lo(), grid.hi())));
        }
        let first = p.iter().rposition(|x| *x <= lo).unwrap_or(0);
        let last = p.iter().position(|x| *x >= hi).unwrap_or(p.len() - 1);
        Ok((first..=last).collect())
    }
}

/// Per-DOF detection windows.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectionProjection {
    windows: Vec<Window>,
}

impl DetectionProjection {
    pub fn new(windows: Vec<Window>) -> Self {
        Self { windows }
    }

    pub fn unbounded(layout: &ModeLayout) -> Self {
        Self::new(layout.dofs().iter().map(|d| Window::unbounded(d.domain)).collect())
    }

    pub fn windows(&self) -> &[Window] {
        &self.windows
    }

    /// The projection as a diagonal 0/1 map on `layout`.
    pub fn to_transform(&self, layout: &ModeLayout) -> Result<SymplecticTransform> {
        if self.windows.len() != layout.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} windows for {} DOFs",
                self.windows.len(),
                layout.len()
            )));
        }
        let mut blocks = Vec::with_capacity(layout.len());
        for (w, d) in self.windows.iter().zip(layout.dofs()) {
            if w.domain != d.domain {
                return Err(invalid(format!(
                    "window for DOF '{}' is in the {:?} domain but the covariance is in the {:?} domain",
                    d.label, w.domain, d.domain
                )));
            }
            let mask = w.mask(&d.grid)?;
            let n = d.grid.len();
            blocks.push(if mask.is_empty() {
                Block::Zero
            } else if mask.len() == n {
                Block::Identity
            } else {
                let mut v = CVector::from_element(n, ZERO);
                for k in mask {
                    v[k] = ONE;
                }
                Block::Diagonal(v)
            });
        }
        diagonal_map(layout, blocks.clone(), blocks)
    }
}

/// `sΓs†`.
pub fn apply_transform(s: &SymplecticTransform, gamma: &RenormalizedCovariance) -> Result<RenormalizedCovariance> {
    if !same_shape(s.input(), gamma.layout()) {
        return Err(Error::ShapeMismatch("transform input does not match the covariance layout".into()));
    }
    let op = s.op.mul(gamma.op())?.mul(&s.op.adjoint())?;
    RenormalizedCovariance::new(op, s.output.clone())
}

/// `PΓP`.
pub fn apply_projection(p: &DetectionProjection, gamma: &RenormalizedCovariance) -> Result<RenormalizedCovariance> {
    apply_transform(&p.to_transform(gamma.layout())?, gamma)
}

/// Keeps the columns acting on the first `m_prime` DOFs (the non-vacuum
/// inputs), so that `S(Γ ⊕ 0)S† = sΓs†`.
pub fn compress(full: &SymplecticTransform, m_prime: usize) -> Result<SymplecticTransform> {
    let m = full.input.len();
    if m_prime == 0 || m_prime > m {
        return Err(invalid(format!("cannot keep {m_prime} of {m} input DOFs")));
    }
    let cols: Vec<usize> = (0..m_prime).chain(m..m + m_prime).collect();
    SymplecticTransform::new(full.op.select_columns(&cols)?, full.input.prefix(m_prime)?, full.output.clone())
}

/// `s†Ps · Γ`, whose Fredholm determinant `det(𝟙 + s†PsΓ)` equals
/// `det(𝟙 + PsΓs†P)`.
pub fn compressed_determinant_operand(
    s: &SymplecticTransform,
    p: &DetectionProjection,
    gamma: &RenormalizedCovariance,
) -> Result<BlockOperator> {
    if !same_shape(s.input(), gamma.layout()) {
        return Err(Error::ShapeMismatch("transform input does not match the covariance layout".into()));
    }
    let pt = p.to_transform(s.output())?;
    let ps = pt.op.mul(&s.op)?;
    s.op.adjoint().mul(&ps)?.mul(gamma.op())
}

/// `s†Ps`, the detection weight pulled back to the source layout.
pub fn pulled_back_projection(s: &SymplecticTransform, p: &DetectionProjection) -> Result<BlockOperator> {
    let pt = p.to_transform(s.output())?;
    s.op.adjoint().mul(&pt.op.mul(&s.op)?)
}

/// A sequence of maps applied in order.
#[derive(Clone, Debug, Default)]
pub struct Pipeline {
    steps: Vec<Step>,
}

/// One pipeline stage.
#[derive(Clone, Debug)]
pub enum Step {
    Phase { phi0: f64, tau: f64, beta_l: f64, dof: usize },
    Fourier { dof: Option<usize> },
    BeamSplitter { t: f64, dofs: (usize, usize) },
    Loss { etas: Vec<f64> },
    Projection(DetectionProjection),
}

impl Pipeline {
    pub fn new(steps: Vec<Step>) -> Self {
        Self { steps }
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    /// Composes all steps symbolically, starting from `input`.
    pub fn compose(&self, input: &ModeLayout) -> Result<SymplecticTransform> {
        let mut total = SymplecticTransform::identity(input);
        for step in &self.steps {
            let layout = total.output().clone();
            let next = match step {
                Step::Phase { phi0, tau, beta_l, dof } => phase_shift(*phi0, *tau, *beta_l, &layout, *dof)?,
                Step::Fourier { dof: Some(d) } => fourier(&layout, *d)?,
                Step::Fourier { dof: None } => fourier_all(&layout)?,
                Step::BeamSplitter { t, dofs } => beam_splitter_constant(*t, *dofs, &layout)?,
                Step::Loss { etas } => LossProfile::per_dof(&layout, etas)?.to_transform(&layout)?,
                Step::Projection(p) => p.to_transform(&layout)?,
            };
            total = next.after(&total)?;
        }
        Ok(total)
    }
}
