#![allow(dead_code)]

use biphoton_core::linalg::{hermitian_eigenvalues, BlockOperator, CMatrix, C64};
use biphoton_core::spectral::{build_gaussian_jsa, schmidt_decompose};
use biphoton_core::{DiscretizedJsa, Dof, FrequencyGrid, GaussianJsaModel, ModeLayout, RenormalizedCovariance};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn layout(m: usize, n: usize) -> ModeLayout {
    let g = FrequencyGrid::uniform(-3.0, 3.0, n).unwrap();
    ModeLayout::new((0..m).map(|k| Dof::frequency(format!("d{k}"), g.clone())).collect()).unwrap()
}

pub fn gaussian(dp: f64, dm: f64, ppw: f64) -> DiscretizedJsa {
    let model = GaussianJsaModel::new(dp, dm).unwrap();
    let (gs, gi) = model.default_grids(6.0, ppw).unwrap();
    build_gaussian_jsa(&model, &gs, &gi).unwrap()
}

pub fn random_complex(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| C64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)))
}

/// Random Hermitian matrix with spectral radius `radius`.
pub fn random_hermitian(r: &mut ChaCha8Rng, n: usize, radius: f64) -> CMatrix {
    let a = random_complex(r, n, n);
    let h = (&a + a.adjoint()) * C64::new(0.5, 0.0);
    let eigs = hermitian_eigenvalues(&h).unwrap();
    let rho = eigs.iter().map(|x| x.abs()).fold(0.0, f64::max);
    h * C64::new(radius / rho, 0.0)
}

pub fn random_covariance(r: &mut ChaCha8Rng, layout: &ModeLayout, radius: f64) -> RenormalizedCovariance {
    let dims = layout.sector_dims();
    let n: usize = dims.iter().sum();
    let op = BlockOperator::from_dense(&random_hermitian(r, n, radius), dims.clone(), dims).unwrap();
    RenormalizedCovariance::new(op, layout.clone()).unwrap()
}

/// Random complex amplitude on an `n × n` grid, normalized; symmetric if asked.
pub fn random_jsa(r: &mut ChaCha8Rng, n: usize, symmetric: bool) -> DiscretizedJsa {
    let g = FrequencyGrid::uniform(-2.0, 2.0, n).unwrap();
    let mut v = random_complex(r, n, n);
    if symmetric {
        v = (&v + v.transpose()) * C64::new(0.5, 0.0);
    }
    DiscretizedJsa::normalized(g.clone(), g, v).unwrap()
}

pub fn full_rank(jsa: &DiscretizedJsa) -> biphoton_core::SchmidtSpectrum {
    schmidt_decompose(jsa, Some(usize::MAX)).unwrap()
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn trace_norm(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m).unwrap().iter().map(|x| x.abs()).sum()
}
