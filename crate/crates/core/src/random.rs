//! Random symplectic matrices and random physical states, for property tests
//! and certification suites.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{sigma, spectrum_diagonal};
use crate::scalar::Real;
use crate::state::{GaussianState, SymmetricStateParams};

/// `exp(σH)` for a random symmetric `H` with entries of size `scale`.
pub fn random_symplectic<T: Real, R: Rng + ?Sized>(n_modes: usize, scale: f64, rng: &mut R) -> DMatrix<T> {
    let dim = 2 * n_modes;
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for i in 0..dim {
        for j in i..dim {
            let x: f64 = StandardNormal.sample(rng);
            h[(i, j)] = x * scale;
            h[(j, i)] = x * scale;
        }
    }
    (sigma::<f64>(n_modes) * h).exp().map(T::lit)
}

/// Knobs for [`random_state`].
#[derive(Clone, Copy, Debug)]
pub struct StateSampler {
    /// Symplectic eigenvalues are drawn uniformly from `[1, nu_max]`.
    pub nu_max: f64,
    /// Entry scale of the generator of the symplectic part.
    pub squeeze: f64,
    /// Each displacement entry is uniform in `[−disp_max, disp_max]`.
    pub disp_max: f64,
}

impl Default for StateSampler {
    fn default() -> Self {
        Self { nu_max: 3.0, squeeze: 0.4, disp_max: 0.0 }
    }
}

/// `S (⊕ νᵢ 1₂) Sᵀ` with random `S` and spectrum.
pub fn random_state<T: Real, R: Rng + ?Sized>(n_modes: usize, sampler: StateSampler, rng: &mut R) -> GaussianState<T> {
    let spectrum: Vec<f64> = (0..n_modes).map(|_| rng.random_range(1.0..=sampler.nu_max)).collect();
    let s = random_symplectic::<f64, _>(n_modes, sampler.squeeze, rng);
    let cov = &s * spectrum_diagonal(&spectrum) * s.transpose();
    let cov = (&cov + cov.transpose()) * 0.5;
    let disp = DVector::from_fn(2 * n_modes, |_, _| {
        if sampler.disp_max > 0.0 {
            rng.random_range(-sampler.disp_max..=sampler.disp_max)
        } else {
            0.0
        }
    });
    let state = GaussianState::new(cov, disp).expect("symmetric by construction");
    GaussianState::from_f64(&state)
}

/// A physical member of the symmetric family with `1 < λ ≤ lambda_max` and
/// `c_x ≥ c_p ≥ 0`.
pub fn random_symmetric_params<R: Rng + ?Sized>(lambda_max: f64, rng: &mut R) -> SymmetricStateParams<f64> {
    let lambda: f64 = rng.random_range(1.0..lambda_max);
    let c_p: f64 = rng.random_range(0.0..(lambda * lambda - 1.0).sqrt());
    // Physicality: c_x ≤ (λ² − 1 + λ c_p) / (λ + c_p).
    let c_max = (lambda * lambda - 1.0 + lambda * c_p) / (lambda + c_p);
    let c_x = rng.random_range(c_p..=c_max.max(c_p));
    SymmetricStateParams::new(lambda, c_x, c_p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_matrices_are_symplectic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..4 {
            let s = random_symplectic::<f64, _>(n, 0.5, &mut rng);
            let form = sigma::<f64>(n);
            assert!(max_abs(&(&s * &form * s.transpose() - &form)) < 1e-10);
        }
    }

    #[test]
    fn generated_states_are_physical() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let s = random_state::<f64, _>(2, StateSampler { disp_max: 1.0, ..Default::default() }, &mut rng);
            assert!(s.is_physical());
            assert!(s.disp().amax() <= 1.0);
            let p = random_symmetric_params(4.0, &mut rng);
            assert!(p.physicality_margin() >= -1e-12 && p.c_x >= p.c_p);
        }
    }
}
