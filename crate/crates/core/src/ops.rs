//! Transformations of Gaussian states: symplectic unitaries, general Gaussian
//! CP maps given by their associated state `(Γ, Δ)`, homodyne conditioning,
//! tensor products and mode reordering.

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{self, direct_sum, max_abs, momentum_flip, pseudo_inverse, sigma, submatrix, subvector};
use crate::scalar::Real;
use crate::state::GaussianState;

/// A Gaussian CP map, represented by the covariance matrix `Γ` and
/// displacement `Δ` of its associated Gaussian state on output ⊕ input modes.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianChannel<T: Real> {
    gamma: DMatrix<T>,
    delta: DVector<T>,
    n_out: usize,
    n_in: usize,
}

impl<T: Real> GaussianChannel<T> {
    pub fn new(gamma: DMatrix<T>, delta: DVector<T>, n_out: usize, n_in: usize) -> Result<Self> {
        let dim = 2 * (n_out + n_in);
        if n_out == 0 || n_in == 0 {
            return Err(Error::InvalidParameter("channel needs input and output modes".into()));
        }
        if gamma.shape() != (dim, dim) || delta.len() != dim {
            return Err(Error::DimensionMismatch(format!(
                "channel with {n_out} output and {n_in} input modes needs a {dim}x{dim} Γ and length-{dim} Δ"
            )));
        }
        let carrier = GaussianState::new(gamma, delta)?;
        carrier.require_physical()?;
        let (gamma, delta) = (carrier.cov().clone(), carrier.disp().clone());
        Ok(Self { gamma, delta, n_out, n_in })
    }

    /// Identity map approached through a two-mode squeezed carrier of
    /// squeezing `r`; exact on the vacuum and converging as `r → ∞`.
    pub fn identity_limit(r: T) -> Self {
        let carrier = GaussianState::<T>::two_mode_squeezed(r);
        Self { gamma: carrier.cov().clone(), delta: DVector::zeros(4), n_out: 1, n_in: 1 }
    }

    /// Pure-loss channel of transmissivity `eta` on one mode, through a
    /// carrier of squeezing `r`. Exact on the vacuum for every `r`.
    pub fn attenuator(eta: T, r: T) -> Result<Self> {
        if eta < T::zero() || eta > T::one() {
            return Err(Error::InvalidParameter(format!("transmissivity {eta} outside [0, 1]")));
        }
        let two_r = r + r;
        let (c, s) = (two_r.cosh(), two_r.sinh());
        let out = eta * c + T::one() - eta;
        let cross = eta.sqrt() * s;
        let z = T::zero();
        #[rustfmt::skip]
        let gamma = DMatrix::from_row_slice(4, 4, &[
            out,   z,      cross,  z,
            z,     out,    z,      -cross,
            cross, z,      c,      z,
            z,     -cross, z,      c,
        ]);
        Self::new(gamma, DVector::zeros(4), 1, 1)
    }

    pub fn gamma(&self) -> &DMatrix<T> {
        &self.gamma
    }

    pub fn delta(&self) -> &DVector<T> {
        &self.delta
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }
}

/// `γ' = Γ̃₁ − Γ̃₁₂(Γ̃₂+γ)⁻¹Γ̃₁₂ᵀ`, `d' = Δ₁ + Γ̃₁₂(Γ̃₂+γ)⁻¹(Δ₂+d)` with
/// `Γ̃ = (1 ⊕ θ)Γ(1 ⊕ θ)`.
pub fn apply_channel<T: Real>(ch: &GaussianChannel<T>, s: &GaussianState<T>) -> Result<GaussianState<T>> {
    if s.n_modes() != ch.n_in {
        return Err(Error::DimensionMismatch(format!(
            "channel takes {} modes, state has {}",
            ch.n_in,
            s.n_modes()
        )));
    }
    let (o, i) = (2 * ch.n_out, 2 * ch.n_in);
    let flip = direct_sum(&DMatrix::identity(o, o), &momentum_flip::<T>(ch.n_in));
    let g = &flip * &ch.gamma * &flip;
    let g1 = g.view((0, 0), (o, o)).into_owned();
    let g12 = g.view((0, o), (o, i)).into_owned();
    let g2 = g.view((o, o), (i, i)).into_owned();
    let d1 = ch.delta.rows(0, o).into_owned();
    let d2 = ch.delta.rows(o, i).into_owned();

    let kernel = g2 + s.cov();
    let k_inv = linalg::checked_inverse(&kernel, "kernel").map_err(|_| Error::SingularKernel)?;
    let cov = &g1 - &g12 * &k_inv * g12.transpose();
    let cov = (&cov + cov.transpose()) * T::lit(0.5);
    let disp = d1 + &g12 * &k_inv * (d2 + s.disp());
    GaussianState::new(cov, disp)
}

/// `R → S R + T`: `γ' = SγSᵀ`, `d' = Sd + T`.
pub fn apply_symplectic<T: Real>(
    symplectic: &DMatrix<T>,
    translation: &DVector<T>,
    s: &GaussianState<T>,
) -> Result<GaussianState<T>> {
    let dim = 2 * s.n_modes();
    if symplectic.shape() != (dim, dim) || translation.len() != dim {
        return Err(Error::DimensionMismatch(format!(
            "transform must be {dim}x{dim} with a length-{dim} translation"
        )));
    }
    let form = sigma::<T>(s.n_modes());
    let resid = max_abs(&(symplectic * &form * symplectic.transpose() - &form));
    if resid > T::TAU_LIN * (T::one() + max_abs(symplectic).powi(2)) {
        return Err(Error::NotSymplectic(resid.as_f64()));
    }
    let cov = symplectic * s.cov() * symplectic.transpose();
    let cov = (&cov + cov.transpose()) * T::lit(0.5);
    GaussianState::new(cov, symplectic * s.disp() + translation)
}

/// Where the homodyne results come from.
pub enum Readout<'a, T> {
    /// Given `X` outcomes, one per measured mode.
    Values(&'a [T]),
    /// Draw the outcomes from the measured quadratures' density.
    Sample(&'a mut dyn RngCore),
}

#[derive(Clone, Debug, PartialEq)]
pub struct HomodyneOutcome<T: Real> {
    pub measured_values: Vec<T>,
    pub post_state: GaussianState<T>,
}

/// Measures `X` on `measured_modes` and conditions the remaining modes:
/// `B' = B − Cᵀ(XAX)⁺C`, `d_B' = d_B + Cᵀ(XAX)⁺(x − d_A)`.
///
/// For a zero-mean input this is exactly the textbook update with
/// `d_A = (X₁, 0, X₂, 0, …)`; nonzero means are handled by conditioning on the
/// deviation of each outcome from its mean.
pub fn homodyne_x<T: Real>(
    s: &GaussianState<T>,
    measured_modes: &[usize],
    readout: Readout<'_, T>,
) -> Result<HomodyneOutcome<T>> {
    let n = s.n_modes();
    if measured_modes.is_empty() {
        return Err(Error::InvalidParameter("no modes to measure".into()));
    }
    for (k, &m) in measured_modes.iter().enumerate() {
        if m >= n || measured_modes[..k].contains(&m) {
            return Err(Error::InvalidParameter(format!("invalid measured mode {m} for a {n}-mode state")));
        }
    }
    let remaining: Vec<usize> = (0..n).filter(|m| !measured_modes.contains(m)).collect();
    if remaining.is_empty() {
        return Err(Error::InvalidParameter("homodyne measurement leaves no modes".into()));
    }
    let idx_a: Vec<usize> = measured_modes.iter().flat_map(|&m| [2 * m, 2 * m + 1]).collect();
    let idx_b: Vec<usize> = remaining.iter().flat_map(|&m| [2 * m, 2 * m + 1]).collect();
    let x_idx: Vec<usize> = measured_modes.iter().map(|&m| 2 * m).collect();

    let measured_values: Vec<T> = match readout {
        Readout::Values(v) => {
            if v.len() != measured_modes.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{} outcomes for {} measured modes",
                    v.len(),
                    measured_modes.len()
                )));
            }
            v.to_vec()
        }
        Readout::Sample(rng) => sample_quadratures(s, &x_idx, rng)?,
    };

    let a = submatrix(s.cov(), &idx_a, &idx_a);
    let c = submatrix(s.cov(), &idx_a, &idx_b);
    let b = submatrix(s.cov(), &idx_b, &idx_b);
    let proj = DMatrix::from_fn(idx_a.len(), idx_a.len(), |i, j| {
        if i == j && i % 2 == 0 {
            T::one()
        } else {
            T::zero()
        }
    });
    let kernel = pseudo_inverse(&(&proj * a * &proj));
    let ct_k = c.transpose() * kernel;
    let cov_b = b - &ct_k * &c;
    let cov_b = (&cov_b + cov_b.transpose()) * T::lit(0.5);

    let d_a = subvector(s.disp(), &idx_a);
    let mut shift = DVector::zeros(idx_a.len());
    for (k, &x) in measured_values.iter().enumerate() {
        shift[2 * k] = x - d_a[2 * k];
    }
    let disp_b = subvector(s.disp(), &idx_b) + ct_k * shift;
    Ok(HomodyneOutcome { measured_values, post_state: GaussianState::new(cov_b, disp_b)? })
}

fn sample_quadratures<T: Real>(s: &GaussianState<T>, x_idx: &[usize], rng: &mut dyn RngCore) -> Result<Vec<T>> {
    let density = crate::state::quadrature_density(s, x_idx)?;
    let chol = density
        .cov
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NumericalFailure("measured quadratures have a singular density".into()))?;
    let z = DVector::from_fn(x_idx.len(), |_, _| {
        let draw: f64 = StandardNormal.sample(rng);
        T::lit(draw)
    });
    let x = density.mean + chol.l() * z;
    Ok(x.iter().copied().collect())
}

/// `γ₁ ⊕ γ₂`, `d₁ ⊕ d₂`.
pub fn tensor<T: Real>(s1: &GaussianState<T>, s2: &GaussianState<T>) -> GaussianState<T> {
    let cov = direct_sum(s1.cov(), s2.cov());
    let disp = DVector::from_iterator(cov.nrows(), s1.disp().iter().chain(s2.disp().iter()).copied());
    GaussianState::new(cov, disp).expect("direct sum of valid states is valid")
}

/// Reorders modes so that new mode `i` is old mode `permutation[i]`.
pub fn reorder_modes<T: Real>(s: &GaussianState<T>, permutation: &[usize]) -> Result<GaussianState<T>> {
    let n = s.n_modes();
    let mut seen = vec![false; n];
    if permutation.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "permutation of length {} for {n} modes",
            permutation.len()
        )));
    }
    for &p in permutation {
        if p >= n || seen[p] {
            return Err(Error::DimensionMismatch(format!("{permutation:?} is not a permutation of 0..{n}")));
        }
        seen[p] = true;
    }
    let idx: Vec<usize> = permutation.iter().flat_map(|&m| [2 * m, 2 * m + 1]).collect();
    GaussianState::new(submatrix(s.cov(), &idx, &idx), subvector(s.disp(), &idx))
}

/// The permutation undoing `permutation`.
pub fn inverse_permutation(permutation: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; permutation.len()];
    for (i, &p) in permutation.iter().enumerate() {
        inv[p] = i;
    }
    inv
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{make_symmetric_state, purity, SymmetricStateParams};

    fn sym(l: f64, c: f64) -> GaussianState<f64> {
        make_symmetric_state(&SymmetricStateParams::isotropic(l, c)).unwrap()
    }

    #[test]
    fn identity_channel_on_vacuum() {
        let vac = GaussianState::<f64>::vacuum(1);
        let out = apply_channel(&GaussianChannel::identity_limit(1.5), &vac).unwrap();
        let via_symplectic = apply_symplectic(&DMatrix::identity(2, 2), &DVector::zeros(2), &vac).unwrap();
        assert!(max_abs(&(out.cov() - via_symplectic.cov())) < 1e-9);
        assert!(out.disp().norm() < 1e-12);
    }

    #[test]
    fn identity_limit_converges() {
        let s = GaussianState::centered(DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.5])).unwrap();
        let s = s.with_disp(DVector::from_vec(vec![0.4, -0.2])).unwrap();
        let out = apply_channel(&GaussianChannel::identity_limit(8.0), &s).unwrap();
        assert!(max_abs(&(out.cov() - s.cov())) < 1e-6);
        assert!((out.disp() - s.disp()).norm() < 1e-6);
    }

    #[test]
    fn attenuator_keeps_vacuum() {
        let vac = GaussianState::<f64>::vacuum(1);
        let ch = GaussianChannel::attenuator(0.3, 1.0).unwrap();
        let out = apply_channel(&ch, &vac).unwrap();
        assert!(max_abs(&(out.cov() - DMatrix::identity(2, 2))) < 1e-12);
    }

    #[test]
    fn attenuator_limit_mixes_with_vacuum() {
        let s = GaussianState::thermal(3.0f64);
        let out = apply_channel(&GaussianChannel::attenuator(0.25, 9.0).unwrap(), &s).unwrap();
        // η γ + (1 − η) 1
        assert!((out.cov()[(0, 0)] - 1.5).abs() < 1e-6);
    }

    #[test]
    fn channel_dimension_checked() {
        let ch = GaussianChannel::<f64>::identity_limit(1.0);
        assert!(matches!(
            apply_channel(&ch, &GaussianState::vacuum(2)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn unphysical_channel_rejected() {
        let gamma = DMatrix::<f64>::identity(4, 4) * 0.5;
        assert!(GaussianChannel::new(gamma, DVector::zeros(4), 1, 1).is_err());
    }

    #[test]
    fn symplectic_identity_and_sign_flip() {
        let s = sym(2.0, 1.2);
        let same = apply_symplectic(&DMatrix::identity(4, 4), &DVector::zeros(4), &s).unwrap();
        assert_eq!(same, s);
        let flipped = apply_symplectic(&-DMatrix::<f64>::identity(4, 4), &DVector::zeros(4), &s).unwrap();
        assert_eq!(flipped.cov(), s.cov());
        assert_eq!(flipped.disp().norm(), 0.0);
    }

    #[test]
    fn squeezer_on_vacuum() {
        let sq = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0f64, 0.5]));
        let out = apply_symplectic(&sq, &DVector::zeros(2), &GaussianState::vacuum(1)).unwrap();
        assert_eq!(out.cov(), &DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 0.25])));
        assert!((purity(&out).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_symplectic_rejected() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 2.0]));
        let err = apply_symplectic(&m, &DVector::zeros(2), &GaussianState::vacuum(1)).unwrap_err();
        assert!(matches!(err, Error::NotSymplectic(_)));
    }

    #[test]
    fn homodyne_on_product_leaves_partner() {
        let s = tensor(&GaussianState::thermal(2.0), &GaussianState::thermal(3.0));
        let out = homodyne_x(&s, &[0], Readout::Values(&[0.7])).unwrap();
        assert_eq!(out.post_state.cov(), &(DMatrix::identity(2, 2) * 3.0));
        assert_eq!(out.post_state.disp().norm(), 0.0);
    }

    #[test]
    fn homodyne_on_symmetric_state() {
        let (l, c, x) = (2.0, 1.2, 0.8);
        let out = homodyne_x(&sym(l, c), &[0], Readout::Values(&[x])).unwrap();
        let post = &out.post_state;
        assert!((post.cov()[(0, 0)] - (l - c * c / l)).abs() < 1e-12);
        assert!((post.cov()[(1, 1)] - l).abs() < 1e-12);
        assert!(post.cov()[(0, 1)].abs() < 1e-12);
        assert!((post.disp()[0] - c * x / l).abs() < 1e-12);
        assert!(post.disp()[1].abs() < 1e-12);
    }

    #[test]
    fn homodyne_with_offset_mean() {
        // Shifting the input mean and the outcome together changes nothing
        // but the partner's mean.
        let s = sym(2.0, 1.2).with_disp(DVector::from_vec(vec![1.0, 0.0, 0.5, 0.0])).unwrap();
        let out = homodyne_x(&s, &[0], Readout::Values(&[1.0])).unwrap();
        assert!((out.post_state.disp()[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn homodyne_sampled_is_seeded() {
        use rand::SeedableRng;
        let s = sym(2.0, 1.2);
        let mut r1 = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut r2 = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let a = homodyne_x(&s, &[0], Readout::Sample(&mut r1)).unwrap();
        let b = homodyne_x(&s, &[0], Readout::Sample(&mut r2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn homodyne_rejects_measuring_everything() {
        assert!(homodyne_x(&sym(2.0, 1.2), &[0, 1], Readout::Values(&[0.0, 0.0])).is_err());
        assert!(homodyne_x(&sym(2.0, 1.2), &[], Readout::Values(&[])).is_err());
    }

    #[test]
    fn tensor_and_reorder() {
        let v = tensor(&GaussianState::<f64>::vacuum(1), &GaussianState::vacuum(1));
        assert_eq!(v, GaussianState::vacuum(2));
        let s = tensor(&sym(2.0, 1.2), &GaussianState::thermal(3.0));
        assert_eq!(reorder_modes(&s, &[0, 1, 2]).unwrap(), s);
        let perm = [2, 0, 1];
        let moved = reorder_modes(&s, &perm).unwrap();
        assert_eq!(moved.cov()[(0, 0)], 3.0);
        assert_eq!(reorder_modes(&moved, &inverse_permutation(&perm)).unwrap(), s);
        assert!(reorder_modes(&s, &[0, 0, 1]).is_err());
    }
}
