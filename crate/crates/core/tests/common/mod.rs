#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// `A Aᵀ / n + shift·1`: symmetric, positive definite, well conditioned.
pub fn random_spd<R: Rng>(dim: usize, shift: f64, rng: &mut R) -> DMatrix<f64> {
    let a = gaussian_matrix(dim, dim, rng);
    &a * a.transpose() / dim as f64 + DMatrix::identity(dim, dim) * shift
}

pub fn sigma(n: usize) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        s[(2 * k, 2 * k + 1)] = 1.0;
        s[(2 * k + 1, 2 * k)] = -1.0;
    }
    s
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.amax()
}

/// Symmetric square root through the spectral theorem.
pub fn sym_sqrt(c: &DMatrix<f64>) -> DMatrix<f64> {
    let e = c.clone().symmetric_eigen();
    &e.eigenvectors * DMatrix::from_diagonal(&e.eigenvalues.map(f64::sqrt)) * e.eigenvectors.transpose()
}

/// Symplectic eigenvalues as the singular values of `C^{1/2} σ C^{1/2}`,
/// which come in equal pairs; largest first.
pub fn symplectic_eigenvalues_via_svd(c: &DMatrix<f64>) -> Vec<f64> {
    let n = c.nrows() / 2;
    let r = sym_sqrt(c);
    let k = &r * sigma(n) * &r;
    let mut sv: Vec<f64> = k.singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv.chunks(2).map(|p| 0.5 * (p[0] + p[1])).collect()
}

/// 2×2 Cholesky draws from `N(0, Σ)`.
pub struct Bivariate {
    l00: f64,
    l10: f64,
    l11: f64,
}

impl Bivariate {
    pub fn new(s: [[f64; 2]; 2]) -> Self {
        let l00 = s[0][0].sqrt();
        let l10 = s[1][0] / l00;
        let l11 = (s[1][1] - l10 * l10).sqrt();
        Self { l00, l10, l11 }
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> (f64, f64) {
        let z0: f64 = StandardNormal.sample(rng);
        let z1: f64 = StandardNormal.sample(rng);
        (self.l00 * z0, self.l10 * z0 + self.l11 * z1)
    }
}

pub fn vec2(a: f64, b: f64) -> DVector<f64> {
    DVector::from_vec(vec![a, b])
}
