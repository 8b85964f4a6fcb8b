//! Renormalized covariance `Γ = (γ − 𝟙)/2` of pair sources, its generator and
//! series truncation.

use std::io::Write;

use crate::error::{invalid, Error, Result};
use crate::layout::{Dof, ModeLayout};
use crate::linalg::{hermitian_eigenvalues, Block, BlockOperator, CMatrix, C64};
use crate::spectral::{DiscretizedJsa, SchmidtSpectrum};

/// Pair-generation process.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ProcessType {
    /// Signal and idler share polarization (one discrete DOF, symmetric amplitude).
    Type0I,
    /// Orthogonally polarized signal and idler (two discrete DOFs).
    TypeII,
}

impl ProcessType {
    /// `σ_j / (C √λ_j)`.
    pub fn sigma_factor(self) -> f64 {
        match self {
            ProcessType::Type0I => 2.0,
            ProcessType::TypeII => 1.0,
        }
    }
}

/// Per-Schmidt-mode squeezing parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct SqueezingSpectrum {
    sigmas: Vec<f64>,
    process: ProcessType,
    gain: f64,
}

impl SqueezingSpectrum {
    pub fn new(sigmas: Vec<f64>, process: ProcessType, gain: f64) -> Result<Self> {
        if sigmas.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(invalid("squeezing parameters must be finite and non-negative"));
        }
        if sigmas.windows(2).any(|w| w[1] > w[0]) {
            return Err(invalid("squeezing parameters must be sorted descending"));
        }
        Ok(Self { sigmas, process, gain })
    }

    /// `σ_j = 2C√λ_j` (type-0/I) or `C√λ_j` (type-II).
    pub fn from_schmidt(spectrum: &SchmidtSpectrum, gain: f64, process: ProcessType) -> Result<Self> {
        check_gain(gain)?;
        let k = process.sigma_factor() * gain;
        Self::new(spectrum.coefficients().iter().map(|c| k * c).collect(), process, gain)
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn process(&self) -> ProcessType {
        self.process
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    /// Mean number of photons, `Tr Γ / 2`.
    pub fn mean_photon_number(&self) -> f64 {
        let per_mode: f64 = self.sigmas.iter().map(|s| cosh_minus_one(*s)).sum();
        match self.process {
            ProcessType::Type0I => per_mode / 2.0,
            ProcessType::TypeII => per_mode,
        }
    }

    /// Mean number of pairs, `∑ sinh²(σ_j/2)` (halved for type-0/I).
    pub fn mean_pair_number(&self) -> f64 {
        self.mean_photon_number() / 2.0
    }
}

fn check_gain(gain: f64) -> Result<()> {
    if !(gain.is_finite() && gain >= 0.0) {
        return Err(invalid(format!("gain must be finite and non-negative, got {gain}")));
    }
    Ok(())
}

/// `cosh x − 1 = 2 sinh²(x/2)`, accurate for small `x`.
pub fn cosh_minus_one(x: f64) -> f64 {
    2.0 * (x / 2.0).sinh().powi(2)
}

/// Generator `Z` of the pair source, so that `γ = exp(2Z)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorZ {
    op: BlockOperator,
    layout: ModeLayout,
    process: ProcessType,
}

impl GeneratorZ {
    pub fn op(&self) -> &BlockOperator {
        &self.op
    }

    pub fn layout(&self) -> &ModeLayout {
        &self.layout
    }

    pub fn process(&self) -> ProcessType {
        self.process
    }
}

/// Renormalized covariance on a [`ModeLayout`].
#[derive(Clone, Debug, PartialEq)]
pub struct RenormalizedCovariance {
    op: BlockOperator,
    layout: ModeLayout,
}

impl RenormalizedCovariance {
    pub fn new(op: BlockOperator, layout: ModeLayout) -> Result<Self> {
        let dims = layout.sector_dims();
        if op.row_dims() != dims.as_slice() || op.col_dims() != dims.as_slice() {
            return Err(Error::ShapeMismatch("operator does not match the mode layout".into()));
        }
        Ok(Self { op, layout })
    }

    pub fn zeros(layout: ModeLayout) -> Self {
        let dims = layout.sector_dims();
        Self {
            op: BlockOperator::zeros(dims.clone(), dims),
            layout,
        }
    }

    pub fn op(&self) -> &BlockOperator {
        &self.op
    }

    pub fn layout(&self) -> &ModeLayout {
        &self.layout
    }

    pub fn into_parts(self) -> (BlockOperator, ModeLayout) {
        (self.op, self.layout)
    }

    pub fn to_dense(&self) -> CMatrix {
        self.op.to_dense()
    }

    /// `Γ ⊕ 0`: appends vacuum DOFs after the existing ones.
    pub fn with_vacuum(&self, extra: &ModeLayout) -> Result<Self> {
        let (m, e) = (self.layout.len(), extra.len());
        let layout = self.layout.extend(extra);
        let dims = layout.sector_dims();
        let mut op = BlockOperator::zeros(dims.clone(), dims);
        let place = |k: usize| if k < m { k } else { k + e };
        for i in 0..2 * m {
            for j in 0..2 * m {
                op.set(place(i), place(j), self.op.get(i, j).clone())?;
            }
        }
        Self::new(op, layout)
    }

    /// Writes every nonzero block as rows `block_row,block_col,i,j,re,im`.
    pub fn write_blocks_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "block_row,block_col,i,j,re,im")?;
        let n = self.op.block_rows();
        for bi in 0..n {
            for bj in 0..n {
                let block = self.op.get(bi, bj);
                if block.is_zero() {
                    continue;
                }
                let m = block.to_dense(self.op.row_dims()[bi], self.op.col_dims()[bj]);
                for i in 0..m.nrows() {
                    for j in 0..m.ncols() {
                        let z = m[(i, j)];
                        if z.re != 0.0 || z.im != 0.0 {
                            writeln!(out, "{bi},{bj},{i},{j},{:.16e},{:.16e}", z.re, z.im)?;
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn source_layout(jsa: &DiscretizedJsa, process: ProcessType) -> Result<ModeLayout> {
    match process {
        ProcessType::Type0I => {
            if jsa.grid_signal() != jsa.grid_idler() {
                return Err(invalid("a type-0/I amplitude needs identical signal and idler grids"));
            }
            let tol = 1e-10 * jsa.values().iter().map(|z| z.norm()).fold(0.0, f64::max);
            if !jsa.is_symmetric(tol) {
                return Err(invalid("a type-0/I amplitude must be symmetric"));
            }
            ModeLayout::new(vec![Dof::frequency("a", jsa.grid_signal().clone())])
        }
        ProcessType::TypeII => ModeLayout::new(vec![
            Dof::frequency("signal", jsa.grid_signal().clone()),
            Dof::frequency("idler", jsa.grid_idler().clone()),
        ]),
    }
}

/// Builds `Z` from the weight-symmetrized amplitude `ψ̃`.
///
/// Type-0/I: sectors `(a, a†)` with `Z_{a,a†} = Cψ̃`. Type-II: sectors
/// `(a, b, a†, b†)` with `Z_{a,b†} = (C/2)ψ̃`, `Z_{b,a†} = (C/2)ψ̃ᵀ` and
/// their adjoints.
pub fn build_generator(jsa: &DiscretizedJsa, gain: f64, process: ProcessType) -> Result<GeneratorZ> {
    check_gain(gain)?;
    let layout = source_layout(jsa, process)?;
    let dims = layout.sector_dims();
    let mut op = BlockOperator::zeros(dims.clone(), dims);
    if gain > 0.0 {
        let psi = jsa.weighted_matrix();
        match process {
            ProcessType::Type0I => {
                let a = &psi * C64::new(gain, 0.0);
                op.set(1, 0, Block::Dense(a.adjoint()))?;
                op.set(0, 1, Block::Dense(a))?;
            }
            ProcessType::TypeII => {
                let a = &psi * C64::new(gain / 2.0, 0.0);
                op.set(0, 3, Block::Dense(a.clone()))?;
                op.set(3, 0, Block::Dense(a.adjoint()))?;
                op.set(1, 2, Block::Dense(a.transpose()))?;
                op.set(2, 1, Block::Dense(a.map(|z| z.conj())))?;
            }
        }
    }
    Ok(GeneratorZ { op, layout, process })
}

/// Exact covariance assembled from Schmidt modes.
///
/// With `ψ̃ = U diag(√λ) V†`, the `(x, y†)` coupling gives blocks
/// `U (cosh σ − 1)/2 U†`, `U sinh σ/2 V†`, `V (cosh σ − 1)/2 V†`; type-II adds
/// the conjugate pair on `(b, a†)`.
pub fn build_covariance_exact(
    spectrum: &SchmidtSpectrum,
    gain: f64,
    process: ProcessType,
) -> Result<RenormalizedCovariance> {
    check_gain(gain)?;
    let modes = spectrum.modes().ok_or(Error::MissingModes)?;
    let (u, v) = modes.weighted();
    let sig = SqueezingSpectrum::from_schmidt(spectrum, gain, process)?;
    let ch: Vec<f64> = sig.sigmas().iter().map(|s| cosh_minus_one(*s) / 2.0).collect();
    let sh: Vec<f64> = sig.sigmas().iter().map(|s| s.sinh() / 2.0).collect();

    // x diag(d) y†
    let sandwich = |x: &CMatrix, d: &[f64], y: &CMatrix| -> Block {
        if d.iter().all(|v| *v == 0.0) {
            return Block::Zero;
        }
        let mut xd = x.clone();
        for (j, mut col) in xd.column_iter_mut().enumerate() {
            col *= C64::new(d[j], 0.0);
        }
        Block::Dense(xd * y.adjoint())
    };
    let conj = |m: &CMatrix| m.map(|z| z.conj());

    let layout = match process {
        ProcessType::Type0I => {
            if modes.grid_signal != modes.grid_idler {
                return Err(invalid("type-0/I modes need identical signal and idler grids"));
            }
            ModeLayout::new(vec![Dof::frequency("a", modes.grid_signal.clone())])?
        }
        ProcessType::TypeII => ModeLayout::new(vec![
            Dof::frequency("signal", modes.grid_signal.clone()),
            Dof::frequency("idler", modes.grid_idler.clone()),
        ])?,
    };
    let dims = layout.sector_dims();
    let mut op = BlockOperator::zeros(dims.clone(), dims);
    match process {
        ProcessType::Type0I => {
            op.set(0, 0, sandwich(&u, &ch, &u))?;
            op.set(0, 1, sandwich(&u, &sh, &v))?;
            op.set(1, 0, sandwich(&v, &sh, &u))?;
            op.set(1, 1, sandwich(&v, &ch, &v))?;
        }
        ProcessType::TypeII => {
            let (uc, vc) = (conj(&u), conj(&v));
            op.set(0, 0, sandwich(&u, &ch, &u))?;
            op.set(0, 3, sandwich(&u, &sh, &v))?;
            op.set(3, 0, sandwich(&v, &sh, &u))?;
            op.set(3, 3, sandwich(&v, &ch, &v))?;
            op.set(1, 1, sandwich(&vc, &ch, &vc))?;
            op.set(1, 2, sandwich(&vc, &sh, &uc))?;
            op.set(2, 1, sandwich(&uc, &sh, &vc))?;
            op.set(2, 2, sandwich(&uc, &ch, &uc))?;
        }
    }
    RenormalizedCovariance::new(op, layout)
}

/// Truncated series `Γ_N = ∑_{n=1}^N (2Z)ⁿ / (2·n!)`.
pub fn covariance_series(z: &GeneratorZ, order: usize) -> Result<RenormalizedCovariance> {
    if order == 0 {
        return Err(invalid("series order must be at least 1"));
    }
    let two_z = z.op.scale(C64::new(2.0, 0.0));
    let mut term = z.op.clone();
    let mut acc = term.clone();
    for n in 2..=order {
        term = term.mul(&two_z)?.scale(C64::new(1.0 / n as f64, 0.0));
        acc = acc.add(&term)?;
    }
    RenormalizedCovariance::new(acc, z.layout.clone())
}

/// `Λ±j = (e^{±σ_j} − 1)/2`, descending; each value twice for type-II.
pub fn covariance_eigenvalues(spectrum: &SqueezingSpectrum) -> Vec<f64> {
    let copies = match spectrum.process() {
        ProcessType::Type0I => 1,
        ProcessType::TypeII => 2,
    };
    let mut out = Vec::with_capacity(2 * copies * spectrum.sigmas().len());
    for s in spectrum.sigmas() {
        for _ in 0..copies {
            out.push(s.exp_m1() / 2.0);
            out.push((-s).exp_m1() / 2.0);
        }
    }
    out.sort_by(|a, b| b.total_cmp(a));
    out
}

/// Mean photon number `Tr Γ / 2`.
pub fn mean_photon_number(gamma: &RenormalizedCovariance) -> Result<f64> {
    Ok(gamma.op.trace()?.re / 2.0)
}

/// Trace norm, Hilbert-Schmidt norm and largest absolute eigenvalue.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Norms {
    pub trace_norm: f64,
    pub hs_norm: f64,
    pub lambda_max: f64,
}

impl Norms {
    pub fn from_eigenvalues(eigs: &[f64]) -> Self {
        Self {
            trace_norm: eigs.iter().map(|l| l.abs()).sum(),
            hs_norm: eigs.iter().map(|l| l * l).sum::<f64>().sqrt(),
            lambda_max: eigs.iter().map(|l| l.abs()).fold(0.0, f64::max),
        }
    }

    /// Closed form from squeezing parameters.
    pub fn from_spectrum(spectrum: &SqueezingSpectrum) -> Self {
        Self::from_eigenvalues(&covariance_eigenvalues(spectrum))
    }
}

/// Norms of `Γ` by dense Hermitian eigendecomposition.
pub fn norms(gamma: &RenormalizedCovariance) -> Result<Norms> {
    Ok(Norms::from_eigenvalues(&hermitian_eigenvalues(&gamma.to_dense())?))
}
