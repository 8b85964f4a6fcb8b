//! Block operators over discrete degrees of freedom.
//!
//! Every operator in this crate is a grid of blocks indexed by normal-mode
//! sectors (annihilation sectors of all discrete modes first, then the
//! creation sectors). A block is an integral operator over one discretized
//! continuous variable, stored weight-symmetrized: the kernel `K(ω, ω')` is
//! kept as `√w K(ω_m, ω_n) √w'`, so operator products, traces and norms are
//! ordinary matrix products, traces and norms.
//!
//! Blocks that are zero, the identity or multiplication operators are kept
//! symbolic, which makes composing transforms on the block level cheap.

use nalgebra::{DMatrix, DVector, SymmetricEigen, LU};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// One block of a [`BlockOperator`].
#[derive(Clone, Debug, PartialEq)]
pub enum Block {
    Zero,
    /// Identity; only valid on square blocks.
    Identity,
    /// Multiplication by a sampled function; only valid on square blocks.
    Diagonal(CVector),
    Dense(CMatrix),
}

impl Block {
    pub fn is_zero(&self) -> bool {
        matches!(self, Block::Zero)
    }

    pub fn to_dense(&self, rows: usize, cols: usize) -> CMatrix {
        match self {
            Block::Zero => CMatrix::zeros(rows, cols),
            Block::Identity => CMatrix::identity(rows, cols),
            Block::Diagonal(d) => CMatrix::from_diagonal(d),
            Block::Dense(m) => m.clone(),
        }
    }

    pub fn adjoint(&self) -> Block {
        match self {
            Block::Zero => Block::Zero,
            Block::Identity => Block::Identity,
            Block::Diagonal(d) => Block::Diagonal(d.map(|z| z.conj())),
            Block::Dense(m) => Block::Dense(m.adjoint()),
        }
    }

    /// Transpose (no conjugation).
    pub fn transpose(&self) -> Block {
        match self {
            Block::Dense(m) => Block::Dense(m.transpose()),
            other => other.clone(),
        }
    }

    pub fn conjugate(&self) -> Block {
        match self {
            Block::Zero => Block::Zero,
            Block::Identity => Block::Identity,
            Block::Diagonal(d) => Block::Diagonal(d.map(|z| z.conj())),
            Block::Dense(m) => Block::Dense(m.map(|z| z.conj())),
        }
    }

    pub fn scale(&self, s: C64, dim: usize) -> Block {
        if s == ZERO {
            return Block::Zero;
        }
        match self {
            Block::Zero => Block::Zero,
            Block::Identity if s == ONE => Block::Identity,
            Block::Identity => Block::Diagonal(CVector::from_element(dim, s)),
            Block::Diagonal(d) => Block::Diagonal(d * s),
            Block::Dense(m) => Block::Dense(m * s),
        }
    }

    /// Product of an `r × k` block with a `k × c` block.
    pub fn mul(&self, other: &Block, r: usize, c: usize) -> Block {
        match (self, other) {
            (Block::Zero, _) | (_, Block::Zero) => Block::Zero,
            (Block::Identity, b) => b.clone(),
            (a, Block::Identity) => a.clone(),
            (Block::Diagonal(a), Block::Diagonal(b)) => Block::Diagonal(a.component_mul(b)),
            (Block::Diagonal(d), Block::Dense(m)) => {
                let mut out = m.clone();
                for (i, mut row) in out.row_iter_mut().enumerate() {
                    row *= d[i];
                }
                Block::Dense(out)
            }
            (Block::Dense(m), Block::Diagonal(d)) => {
                let mut out = m.clone();
                for (j, mut col) in out.column_iter_mut().enumerate() {
                    col *= d[j];
                }
                Block::Dense(out)
            }
            (Block::Dense(a), Block::Dense(b)) => {
                debug_assert_eq!((a.nrows(), b.ncols()), (r, c));
                Block::Dense(a * b)
            }
        }
    }

    pub fn add(&self, other: &Block, rows: usize, cols: usize) -> Block {
        match (self, other) {
            (Block::Zero, b) => b.clone(),
            (a, Block::Zero) => a.clone(),
            (Block::Identity, Block::Identity) => {
                Block::Diagonal(CVector::from_element(rows, C64::new(2.0, 0.0)))
            }
            (Block::Identity, Block::Diagonal(d)) | (Block::Diagonal(d), Block::Identity) => {
                Block::Diagonal(d.map(|z| z + ONE))
            }
            (Block::Diagonal(a), Block::Diagonal(b)) => Block::Diagonal(a + b),
            (a, b) => Block::Dense(a.to_dense(rows, cols) + b.to_dense(rows, cols)),
        }
    }

    pub fn trace(&self, dim: usize) -> C64 {
        match self {
            Block::Zero => ZERO,
            Block::Identity => C64::new(dim as f64, 0.0),
            Block::Diagonal(d) => d.sum(),
            Block::Dense(m) => m.trace(),
        }
    }

    /// Squared Frobenius (Hilbert-Schmidt) norm.
    pub fn frobenius_sq(&self, dim: usize) -> f64 {
        match self {
            Block::Zero => 0.0,
            Block::Identity => dim as f64,
            Block::Diagonal(d) => d.iter().map(|z| z.norm_sqr()).sum(),
            Block::Dense(m) => m.iter().map(|z| z.norm_sqr()).sum(),
        }
    }

    fn check_shape(&self, rows: usize, cols: usize) -> Result<()> {
        let ok = match self {
            Block::Zero => true,
            Block::Identity => rows == cols,
            Block::Diagonal(d) => rows == cols && d.len() == rows,
            Block::Dense(m) => m.nrows() == rows && m.ncols() == cols,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "block does not fit a {rows}x{cols} slot"
            )))
        }
    }
}

/// A `rows × cols` grid of [`Block`]s.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockOperator {
    row_dims: Vec<usize>,
    col_dims: Vec<usize>,
    blocks: Vec<Block>,
}

impl BlockOperator {
    pub fn zeros(row_dims: Vec<usize>, col_dims: Vec<usize>) -> Self {
        let blocks = vec![Block::Zero; row_dims.len() * col_dims.len()];
        Self {
            row_dims,
            col_dims,
            blocks,
        }
    }

    pub fn identity(dims: Vec<usize>) -> Self {
        let mut op = Self::zeros(dims.clone(), dims);
        for k in 0..op.row_dims.len() {
            op.blocks[k * op.col_dims.len() + k] = Block::Identity;
        }
        op
    }

    /// Block-diagonal operator from per-sector blocks.
    pub fn block_diagonal(dims: Vec<usize>, diag: Vec<Block>) -> Result<Self> {
        if diag.len() != dims.len() {
            return Err(Error::ShapeMismatch("diagonal block count".into()));
        }
        let mut op = Self::zeros(dims.clone(), dims);
        for (k, b) in diag.into_iter().enumerate() {
            op.set(k, k, b)?;
        }
        Ok(op)
    }

    /// Wrap a dense matrix, splitting it along the given sector dimensions.
    pub fn from_dense(m: &CMatrix, row_dims: Vec<usize>, col_dims: Vec<usize>) -> Result<Self> {
        let (nr, nc) = (row_dims.iter().sum::<usize>(), col_dims.iter().sum::<usize>());
        if m.nrows() != nr || m.ncols() != nc {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} matrix vs {nr}x{nc} block layout",
                m.nrows(),
                m.ncols()
            )));
        }
        let mut op = Self::zeros(row_dims, col_dims);
        let mut r0 = 0;
        for i in 0..op.row_dims.len() {
            let mut c0 = 0;
            for j in 0..op.col_dims.len() {
                let (r, c) = (op.row_dims[i], op.col_dims[j]);
                let sub = m.view((r0, c0), (r, c)).into_owned();
                if sub.iter().any(|z| *z != ZERO) {
                    op.blocks[i * op.col_dims.len() + j] = Block::Dense(sub);
                }
                c0 += c;
            }
            r0 += op.row_dims[i];
        }
        Ok(op)
    }

    pub fn row_dims(&self) -> &[usize] {
        &self.row_dims
    }

    pub fn col_dims(&self) -> &[usize] {
        &self.col_dims
    }

    pub fn block_rows(&self) -> usize {
        self.row_dims.len()
    }

    pub fn block_cols(&self) -> usize {
        self.col_dims.len()
    }

    pub fn nrows(&self) -> usize {
        self.row_dims.iter().sum()
    }

    pub fn ncols(&self) -> usize {
        self.col_dims.iter().sum()
    }

    pub fn is_square(&self) -> bool {
        self.row_dims == self.col_dims
    }

    pub fn get(&self, i: usize, j: usize) -> &Block {
        &self.blocks[i * self.col_dims.len() + j]
    }

    pub fn set(&mut self, i: usize, j: usize, block: Block) -> Result<()> {
        if i >= self.row_dims.len() || j >= self.col_dims.len() {
            return Err(Error::ShapeMismatch(format!("block index ({i}, {j}) out of range")));
        }
        block.check_shape(self.row_dims[i], self.col_dims[j])?;
        let nc = self.col_dims.len();
        self.blocks[i * nc + j] = block;
        Ok(())
    }

    pub fn mul(&self, other: &BlockOperator) -> Result<BlockOperator> {
        if self.col_dims != other.row_dims {
            return Err(Error::ShapeMismatch(format!(
                "cannot multiply {:?} columns with {:?} rows",
                self.col_dims, other.row_dims
            )));
        }
        let mut out = Self::zeros(self.row_dims.clone(), other.col_dims.clone());
        for i in 0..self.row_dims.len() {
            for j in 0..other.col_dims.len() {
                let (r, c) = (self.row_dims[i], other.col_dims[j]);
                let mut acc = Block::Zero;
                for k in 0..self.col_dims.len() {
                    let p = self.get(i, k).mul(other.get(k, j), r, c);
                    if !p.is_zero() {
                        acc = acc.add(&p, r, c);
                    }
                }
                out.blocks[i * other.col_dims.len() + j] = acc;
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &BlockOperator) -> Result<BlockOperator> {
        self.check_same_shape(other)?;
        let nc = self.col_dims.len();
        let mut out = self.clone();
        for i in 0..self.row_dims.len() {
            for j in 0..nc {
                out.blocks[i * nc + j] =
                    self.get(i, j)
                        .add(other.get(i, j), self.row_dims[i], self.col_dims[j]);
            }
        }
        Ok(out)
    }

    pub fn sub(&self, other: &BlockOperator) -> Result<BlockOperator> {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: C64) -> BlockOperator {
        let nc = self.col_dims.len();
        let mut out = self.clone();
        for i in 0..self.row_dims.len() {
            for j in 0..nc {
                out.blocks[i * nc + j] = self.get(i, j).scale(s, self.row_dims[i]);
            }
        }
        out
    }

    pub fn adjoint(&self) -> BlockOperator {
        let mut out = Self::zeros(self.col_dims.clone(), self.row_dims.clone());
        let nc = out.col_dims.len();
        for i in 0..self.row_dims.len() {
            for j in 0..self.col_dims.len() {
                out.blocks[j * nc + i] = self.get(i, j).adjoint();
            }
        }
        out
    }

    /// Keep only the listed block columns, in order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<BlockOperator> {
        if let Some(&bad) = cols.iter().find(|&&c| c >= self.col_dims.len()) {
            return Err(Error::ShapeMismatch(format!("column sector {bad} out of range")));
        }
        let col_dims: Vec<usize> = cols.iter().map(|&c| self.col_dims[c]).collect();
        let mut out = Self::zeros(self.row_dims.clone(), col_dims);
        let nc = cols.len();
        for i in 0..self.row_dims.len() {
            for (jj, &j) in cols.iter().enumerate() {
                out.blocks[i * nc + jj] = self.get(i, j).clone();
            }
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.nrows(), self.ncols());
        let mut r0 = 0;
        for i in 0..self.row_dims.len() {
            let mut c0 = 0;
            for j in 0..self.col_dims.len() {
                let (r, c) = (self.row_dims[i], self.col_dims[j]);
                match self.get(i, j) {
                    Block::Zero => {}
                    Block::Identity => {
                        for k in 0..r {
                            m[(r0 + k, c0 + k)] = ONE;
                        }
                    }
                    Block::Diagonal(d) => {
                        for k in 0..r {
                            m[(r0 + k, c0 + k)] = d[k];
                        }
                    }
                    Block::Dense(b) => m.view_mut((r0, c0), (r, c)).copy_from(b),
                }
                c0 += c;
            }
            r0 += self.row_dims[i];
        }
        m
    }

    pub fn trace(&self) -> Result<C64> {
        if !self.is_square() {
            return Err(Error::ShapeMismatch("trace of a non-square operator".into()));
        }
        Ok((0..self.row_dims.len())
            .map(|k| self.get(k, k).trace(self.row_dims[k]))
            .sum())
    }

    /// Squared Hilbert-Schmidt norm.
    pub fn hs_norm_sq(&self) -> f64 {
        let nc = self.col_dims.len();
        (0..self.row_dims.len())
            .flat_map(|i| (0..nc).map(move |j| (i, j)))
            .map(|(i, j)| self.get(i, j).frobenius_sq(self.row_dims[i]))
            .sum()
    }

    /// Largest entrywise deviation from Hermiticity.
    pub fn hermiticity_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let d = self.to_dense();
        let a = d.adjoint();
        (d - a).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn check_same_shape(&self, other: &BlockOperator) -> Result<()> {
        if self.row_dims != other.row_dims || self.col_dims != other.col_dims {
            return Err(Error::ShapeMismatch("operands have different block layouts".into()));
        }
        Ok(())
    }
}

/// Eigenvalues of a Hermitian matrix, sorted descending.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Result<Vec<f64>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::Convergence("Hermitian eigensolver".into()))?;
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| b.total_cmp(a));
    Ok(vals)
}

/// Hermitian eigendecomposition `m = V diag(λ) V†`.
pub fn hermitian_eigen(m: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::Convergence("Hermitian eigensolver".into()))?;
    Ok((eig.eigenvalues.iter().copied().collect(), eig.eigenvectors))
}

/// Complex logarithm of `det(m)` via LU factorization.
pub fn log_det(m: &CMatrix) -> Result<C64> {
    if m.nrows() != m.ncols() {
        return Err(Error::ShapeMismatch("determinant of a non-square matrix".into()));
    }
    if m.nrows() == 0 {
        return Ok(ZERO);
    }
    let lu = LU::new(m.clone());
    let u = lu.u();
    let mut acc = ZERO;
    for k in 0..u.nrows() {
        let d = u[(k, k)];
        if d == ZERO {
            return Err(Error::Singular);
        }
        acc += d.ln();
    }
    // Each row swap flips the sign.
    if lu.p().determinant::<f64>() < 0.0 {
        acc += C64::new(0.0, std::f64::consts::PI);
    }
    Ok(acc)
}
