//! Discrete degrees of freedom and their sampling grids.

use crate::error::{invalid, Result};
use crate::spectral::FrequencyGrid;

/// Whether a grid samples frequency or time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Domain {
    Frequency,
    Time,
}

/// One discrete degree of freedom (a polarization or spatial path).
#[derive(Clone, Debug, PartialEq)]
pub struct Dof {
    pub label: String,
    pub grid: FrequencyGrid,
    pub domain: Domain,
}

impl Dof {
    pub fn frequency(label: impl Into<String>, grid: FrequencyGrid) -> Self {
        Self {
            label: label.into(),
            grid,
            domain: Domain::Frequency,
        }
    }
}

/// Ordered discrete DOFs; operators on this layout have `2M` sectors
/// `(a_1, …, a_M, a_1†, …, a_M†)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeLayout {
    dofs: Vec<Dof>,
}

impl ModeLayout {
    pub fn new(dofs: Vec<Dof>) -> Result<Self> {
        if dofs.is_empty() {
            return Err(invalid("a layout needs at least one degree of freedom"));
        }
        Ok(Self { dofs })
    }

    pub fn dofs(&self) -> &[Dof] {
        &self.dofs
    }

    pub fn dof(&self, m: usize) -> Result<&Dof> {
        self.dofs
            .get(m)
            .ok_or_else(|| invalid(format!("DOF index {m} out of range (M = {})", self.dofs.len())))
    }

    /// Number of discrete DOFs `M`.
    pub fn len(&self) -> usize {
        self.dofs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dofs.is_empty()
    }

    /// Sector dimensions `[n_1, …, n_M, n_1, …, n_M]`.
    pub fn sector_dims(&self) -> Vec<usize> {
        let n: Vec<usize> = self.dofs.iter().map(|d| d.grid.len()).collect();
        n.iter().chain(n.iter()).copied().collect()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.dofs.iter().map(|d| d.label.as_str()).collect()
    }

    /// Copy with DOF `m` replaced.
    pub fn with_dof(&self, m: usize, dof: Dof) -> Result<Self> {
        self.dof(m)?;
        let mut dofs = self.dofs.clone();
        dofs[m] = dof;
        Ok(Self { dofs })
    }

    /// The first `m` DOFs.
    pub fn prefix(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.dofs.len() {
            return Err(invalid(format!("cannot keep {m} of {} DOFs", self.dofs.len())));
        }
        Ok(Self {
            dofs: self.dofs[..m].to_vec(),
        })
    }

    /// Appends the DOFs of `other`.
    pub fn extend(&self, other: &ModeLayout) -> Self {
        let mut dofs = self.dofs.clone();
        dofs.extend(other.dofs.iter().cloned());
        Self { dofs }
    }
}
