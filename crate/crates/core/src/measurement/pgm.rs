//! Haar-random projective measurements built by the pretty-good-measurement
//! orthonormalization `γ_t = Γ^{-1/2} g_t`, `Γ = Σ_t g_t g_t†`.
//!
//! Construction is `O(d³)`, so this path is an oracle for small `d` only.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::{Error, Result, C64};

/// Largest dimension accepted for PGM construction.
pub const PGM_MAX_DIM: usize = 1024;

const EIGEN_FLOOR: f64 = 1e-12;
const MAX_RETRIES: usize = 3;

/// Orthonormal basis (columns) plus the random grouping into `k` projectors.
#[derive(Clone, Debug)]
pub struct PgmBasis {
    pub basis: DMatrix<C64>,
    /// `groups[j]` lists the basis columns summed into projector `Π_j`.
    pub groups: Vec<Vec<usize>>,
}

impl PgmBasis {
    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Dense `Π_j = Σ_{t∈group j} γ_t γ_t†`.
    pub fn projector(&self, j: usize) -> DMatrix<C64> {
        let d = self.dim();
        let mut p = DMatrix::<C64>::zeros(d, d);
        for &t in &self.groups[j] {
            let col = self.basis.column(t);
            p += col * col.adjoint();
        }
        p
    }

    /// `⟨φ|Π_j|φ⟩` for every `j`.
    pub fn outcome_distribution(&self, amps: &[C64]) -> Vec<f64> {
        let d = self.dim();
        // overlaps[t] = γ_t† φ
        let overlaps: Vec<f64> = (0..d)
            .map(|t| {
                let col = self.basis.column(t);
                col.iter().zip(amps).map(|(g, a)| g.conj() * a).sum::<C64>().norm_sqr()
            })
            .collect();
        self.groups.iter().map(|g| g.iter().map(|&t| overlaps[t]).sum()).collect()
    }
}

/// Inverse square root of a Hermitian positive-definite matrix; `None` when
/// an eigenvalue falls below the floor.
pub(crate) fn inverse_sqrt_hermitian(m: DMatrix<C64>) -> Option<DMatrix<C64>> {
    let eig = m.symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| l < EIGEN_FLOOR) {
        return None;
    }
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (c, &l) in eig.eigenvalues.iter().enumerate() {
        scaled.column_mut(c).scale_mut(1.0 / l.sqrt());
    }
    Some(scaled * v.adjoint())
}

/// Haar-distributed orthonormal basis of `C^d` as matrix columns.
pub fn haar_basis<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<DMatrix<C64>> {
    let normal = Normal::new(0.0, (1.0 / (2.0 * d as f64)).sqrt()).expect("valid sigma");
    for _ in 0..=MAX_RETRIES {
        let g = DMatrix::<C64>::from_fn(d, d, |_, _| C64::new(normal.sample(rng), normal.sample(rng)));
        let gamma = &g * g.adjoint();
        if let Some(inv_sqrt) = inverse_sqrt_hermitian(gamma) {
            return Ok(inv_sqrt * g);
        }
    }
    Err(Error::Internal(format!(
        "Gram matrix numerically singular after {MAX_RETRIES} retries (d = {d})"
    )))
}

/// Random `k`-outcome PGM measurement on `C^d`.
pub fn build_pgm<R: Rng + ?Sized>(d: usize, k: usize, rng: &mut R) -> Result<PgmBasis> {
    if k == 0 || !d.is_multiple_of(k) {
        return Err(Error::arg(format!("k = {k} must divide d = {d}")));
    }
    if d > PGM_MAX_DIM {
        return Err(Error::Resource(format!(
            "PGM measurements are limited to d <= {PGM_MAX_DIM} (requested {d})"
        )));
    }
    let basis = haar_basis(d, rng)?;
    let mut perm: Vec<usize> = (0..d).collect();
    perm.shuffle(rng);
    let size = d / k;
    let groups = perm.chunks(size).map(|c| c.to_vec()).collect();
    Ok(PgmBasis { basis, groups })
}
