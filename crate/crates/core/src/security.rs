//! Secret-key security of the post-selection protocol against an
//! eavesdropper holding the purification of Alice and Bob's state.
//!
//! Alice and Bob measure one `X` quadrature each and keep the outcomes near
//! `±X₀`. Every quantity that decides security is quadratic in `X₀`, so the
//! verdicts below compare *exponents*: coefficients of `X₀²` in the logarithm
//! of the relevant ratio or overlap. The exponentials themselves are only
//! formed when a report asks for them at a concrete `X₀`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, max_abs, momentum_flip, partial_momentum_flip, psd_sqrt_of_similar, sigma, submatrix};
use crate::scalar::Real;
use crate::state::{self, BipartiteSplit, GaussianState, SymmetricStateParams};

/// A pure state on `(A, B, E)` whose `AB` marginal is the input state.
#[derive(Clone, Debug)]
pub struct Purification<T: Real> {
    pub joint: GaussianState<T>,
    /// Cross block between the `AB` and `E` coordinates.
    pub f: DMatrix<T>,
    /// Eve's reduced covariance matrix, `θ γ θ`.
    pub gamma_e: DMatrix<T>,
}

impl<T: Real> Purification<T> {
    /// Modes held by Alice and Bob together (Eve holds as many).
    pub fn n_system_modes(&self) -> usize {
        self.gamma_e.nrows() / 2
    }

    pub fn gamma_ab(&self) -> DMatrix<T> {
        let dim = self.gamma_e.nrows();
        self.joint.cov().view((0, 0), (dim, dim)).into_owned()
    }
}

/// `F = σ [−(σγ)² − 1]^{1/2} θ`, `γ_E = θγθ`.
///
/// The square root is taken of a matrix similar to a positive semidefinite
/// one, so it is computed by eigendecomposition rather than Cholesky.
pub fn purify<T: Real>(s: &GaussianState<T>) -> Result<Purification<T>> {
    s.require_physical()?;
    let n = s.n_modes();
    let dim = 2 * n;
    let gamma = s.cov();
    let form = sigma::<T>(n);
    let theta = momentum_flip::<T>(n);
    let sg = &form * gamma;
    let m = -(&sg * &sg) - DMatrix::identity(dim, dim);
    let root = psd_sqrt_of_similar(&m)?;
    let f = &form * root * &theta;
    let gamma_e = &theta * gamma * &theta;

    let mut cov = DMatrix::zeros(2 * dim, 2 * dim);
    cov.view_mut((0, 0), (dim, dim)).copy_from(gamma);
    cov.view_mut((0, dim), (dim, dim)).copy_from(&f);
    cov.view_mut((dim, 0), (dim, dim)).copy_from(&f.transpose());
    cov.view_mut((dim, dim), (dim, dim)).copy_from(&gamma_e);
    let mut disp = DVector::zeros(2 * dim);
    disp.rows_mut(0, dim).copy_from(s.disp());
    let joint = GaussianState::new(cov, disp)?;
    Ok(Purification { joint, f, gamma_e })
}

/// Residual of `γ − F γ_E⁻¹ Fᵀ = σ γ⁻¹ σᵀ`, the identity that turns Eve's
/// conditional state into a closed form.
pub fn purification_residual<T: Real>(p: &Purification<T>) -> Result<T> {
    let gamma = p.gamma_ab();
    let n = p.n_system_modes();
    let form = sigma::<T>(n);
    let ge_inv = linalg::checked_inverse(&p.gamma_e, "gamma_E")?;
    let g_inv = linalg::checked_inverse(&gamma, "gamma_AB")?;
    let lhs = &gamma - &p.f * ge_inv * p.f.transpose();
    let rhs = &form * g_inv * form.transpose();
    Ok(max_abs(&(lhs - rhs)))
}

/// Eve's state after Alice and Bob both obtained `+X₀`. The `−X₀` branch has
/// the same covariance matrix and the opposite displacement.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalEveState<T: Real> {
    pub gamma_e_prime: DMatrix<T>,
    pub d_e_prime: DVector<T>,
}

impl<T: Real> ConditionalEveState<T> {
    pub fn plus(&self) -> GaussianState<T> {
        GaussianState::new(self.gamma_e_prime.clone(), self.d_e_prime.clone()).expect("symmetric by construction")
    }

    pub fn minus(&self) -> GaussianState<T> {
        GaussianState::new(self.gamma_e_prime.clone(), -&self.d_e_prime).expect("symmetric by construction")
    }
}

/// `γ'_E = γ_E − Fᵀ β F`, `d'_E = Fᵀ β (X₀ at the measured coordinates)`,
/// where `β` embeds `γ_x⁻¹` on the measured coordinates and is zero elsewhere.
pub fn eve_conditional_state<T: Real>(
    p: &Purification<T>,
    x0: T,
    measured_coords: [usize; 2],
) -> Result<ConditionalEveState<T>> {
    if !(x0 > T::zero()) {
        return Err(Error::InvalidParameter(format!("X0 must be positive, got {x0}")));
    }
    let dim = p.gamma_e.nrows();
    check_measured(dim / 2, measured_coords)?;
    let gamma = p.gamma_ab();
    let c = &measured_coords[..];
    let gx_inv = linalg::checked_inverse(&submatrix(&gamma, c, c), "gamma_x")?;
    let mut beta = DMatrix::zeros(dim, dim);
    for (i, &ci) in c.iter().enumerate() {
        for (j, &cj) in c.iter().enumerate() {
            beta[(ci, cj)] = gx_inv[(i, j)];
        }
    }
    let mut outcome = DVector::zeros(dim);
    for &ci in c {
        outcome[ci] = x0;
    }
    let ft = p.f.transpose();
    let gamma_e_prime = &p.gamma_e - &ft * &beta * &p.f;
    let gamma_e_prime = (&gamma_e_prime + gamma_e_prime.transpose()) * T::lit(0.5);
    let d_e_prime = &ft * &beta * outcome;
    Ok(ConditionalEveState { gamma_e_prime, d_e_prime })
}

/// Uhlmann fidelity `tr√(√ρ₋ ρ₊ √ρ₋)` of two Gaussian states sharing the
/// covariance matrix `γ`: `exp(−¼ Δᵀ γ⁻¹ Δ)` with `Δ = d₊ − d₋`, which is
/// `exp(−dᵀγ⁻¹d)` for the symmetric pair `d₊ = −d₋ = d`.
pub fn gaussian_fidelity_equal_cov<T: Real>(gamma: &DMatrix<T>, d_plus: &DVector<T>, d_minus: &DVector<T>) -> Result<T> {
    let s = GaussianState::new(gamma.clone(), d_plus.clone())?;
    s.require_physical()?;
    if d_minus.len() != d_plus.len() {
        return Err(Error::DimensionMismatch("displacements differ in length".into()));
    }
    let inv = linalg::checked_inverse(gamma, "gamma")?;
    let delta = d_plus - d_minus;
    let q = delta.dot(&(&inv * &delta));
    Ok((-q * T::lit(0.25)).exp())
}

fn check_measured(n_modes: usize, coords: [usize; 2]) -> Result<()> {
    let dim = 2 * n_modes;
    for &c in &coords {
        if c >= dim {
            return Err(Error::DimensionMismatch(format!("coordinate {c} outside a {n_modes}-mode state")));
        }
        if c % 2 != 0 {
            return Err(Error::InvalidParameter(format!("coordinate {c} is a momentum, expected an X quadrature")));
        }
    }
    if coords[0] == coords[1] {
        return Err(Error::InvalidParameter("the two measured coordinates coincide".into()));
    }
    Ok(())
}

/// Protocol step 2 measures the first mode of each party.
pub fn default_coords(split: BipartiteSplit) -> [usize; 2] {
    [0, 2 * split.n_a]
}

/// `(a, b, c)` of a symmetric 2×2 matrix.
fn entries<T: Real>(m: &DMatrix<T>) -> (T, T, T) {
    (m[(0, 0)], m[(0, 1)], m[(1, 1)])
}

fn quadratic_form<T: Real>(m: &DMatrix<T>, u: (T, T)) -> Result<T> {
    let (a, b, c) = entries(m);
    let det = a * c - b * b;
    if !(det > T::zero()) {
        return Err(Error::NotPositiveDefinite(det.as_f64()));
    }
    // uᵀ M⁻¹ u with M⁻¹ = [[c, −b], [−b, a]] / det
    Ok((c * u.0 * u.0 - (b + b) * u.0 * u.1 + a * u.1 * u.1) / det)
}

fn gamma_x<T: Real>(s: &GaussianState<T>, coords: [usize; 2]) -> Result<DMatrix<T>> {
    s.require_physical()?;
    check_measured(s.n_modes(), coords)?;
    Ok(submatrix(s.cov(), &coords, &coords))
}

/// `(σ̄ γ⁻¹ σ̄ᵀ)_x` for a given antisymmetric form `σ̄`.
fn inverse_form_x<T: Real>(s: &GaussianState<T>, form: &DMatrix<T>, coords: [usize; 2]) -> Result<DMatrix<T>> {
    let inv = linalg::checked_inverse(s.cov(), "covariance matrix")?;
    let m = form * inv * form.transpose();
    Ok(submatrix(&m, &coords, &coords))
}

/// `log(ε_B / (1 − ε_B))` per unit `X₀²`: `−4b / (ac − b²)`.
pub fn eps_ratio_exponent<T: Real>(s: &GaussianState<T>, coords: [usize; 2]) -> Result<T> {
    let gx = gamma_x(s, coords)?;
    let (a, b, c) = entries(&gx);
    let det = a * c - b * b;
    if !(det > T::zero()) {
        return Err(Error::NotPositiveDefinite(det.as_f64()));
    }
    Ok(-T::lit(4.0) * b / det)
}

/// `ε_B / (1 − ε_B)`; `ε_B = r / (1 + r)`.
pub fn eps_ratio<T: Real>(s: &GaussianState<T>, x0: T, coords: [usize; 2]) -> Result<T> {
    Ok((eps_ratio_exponent(s, coords)? * x0 * x0).exp())
}

/// Bob's single-symbol error probability from the ratio exponent.
pub fn eps_b<T: Real>(s: &GaussianState<T>, x0: T, coords: [usize; 2]) -> Result<T> {
    let r = eps_ratio(s, x0, coords)?;
    Ok(r / (T::one() + r))
}

/// `log` of Eve's overlap per unit `X₀²`:
/// `−(1,1) [(σγ⁻¹σᵀ)_x⁻¹ − γ_x⁻¹] (1,1)ᵀ`. Never positive for physical states.
pub fn fidelity_exponent<T: Real>(s: &GaussianState<T>, coords: [usize; 2]) -> Result<T> {
    let gx = gamma_x(s, coords)?;
    let mx = inverse_form_x(s, &sigma::<T>(s.n_modes()), coords)?;
    let one = (T::one(), T::one());
    Ok(-(quadratic_form(&mx, one)? - quadratic_form(&gx, one)?))
}

/// Uhlmann fidelity between Eve's two conditional states.
pub fn eve_fidelity<T: Real>(s: &GaussianState<T>, x0: T, coords: [usize; 2]) -> Result<T> {
    Ok((fidelity_exponent(s, coords)? * x0 * x0).exp())
}

/// Strict comparison of two exponents with a fail-safe band: equality, or a
/// difference lost in rounding, counts as not secure.
fn strictly_below<T: Real>(lhs: T, rhs: T) -> bool {
    let scale = T::one() + lhs.abs() + rhs.abs();
    lhs - rhs < -T::TAU_PSD * scale
}

/// Secure against individual attacks: `ε_B/(1−ε_B) < F`.
pub fn individual_condition<T: Real>(s: &GaussianState<T>, coords: [usize; 2]) -> Result<bool> {
    Ok(strictly_below(eps_ratio_exponent(s, coords)?, fidelity_exponent(s, coords)?))
}

/// Secure against collective attacks: `ε_B/(1−ε_B) < F²`.
pub fn collective_condition<T: Real>(s: &GaussianState<T>, coords: [usize; 2]) -> Result<bool> {
    let f = fidelity_exponent(s, coords)?;
    Ok(strictly_below(eps_ratio_exponent(s, coords)?, f + f))
}

/// `eps_ratio_exponent − 2·fidelity_exponent`; negative means collective-secure.
pub fn collective_margin<T: Real>(s: &GaussianState<T>, coords: [usize; 2]) -> Result<T> {
    let f = fidelity_exponent(s, coords)?;
    Ok(eps_ratio_exponent(s, coords)? - (f + f))
}

/// `(1,−1) [(σ̃γ⁻¹σ̃ᵀ)_x⁻¹ − γ_x⁻¹] (1,−1)ᵀ` with `σ̃ = (1_A ⊕ θ_B) σ (1_A ⊕ θ_B)`,
/// one coordinate measured on each side of `split`. Negative means a key
/// can be distilled.
pub fn general_key_margin<T: Real>(s: &GaussianState<T>, split: BipartiteSplit, coords: [usize; 2]) -> Result<T> {
    split.check(s)?;
    let gx = gamma_x(s, coords)?;
    let boundary = 2 * split.n_a;
    if !(coords[0] < boundary && coords[1] >= boundary) {
        return Err(Error::InvalidParameter(format!(
            "need one coordinate on Alice's side and one on Bob's, got {coords:?}"
        )));
    }
    let flip = partial_momentum_flip::<T>(split.n_a, split.n_b);
    let form = &flip * sigma::<T>(s.n_modes()) * &flip;
    let mx = inverse_form_x(s, &form, coords)?;
    let u = (T::one(), -T::one());
    Ok(quadratic_form(&mx, u)? - quadratic_form(&gx, u)?)
}

/// Key distillable with this protocol for an arbitrary `n × m` split.
pub fn general_key_condition<T: Real>(s: &GaussianState<T>, split: BipartiteSplit, coords: [usize; 2]) -> Result<bool> {
    let gx = gamma_x(s, coords)?;
    let scale = T::one() + max_abs(&gx);
    Ok(general_key_margin(s, split, coords)? < -T::TAU_PSD * scale)
}

/// Error exponents after advantage distillation over blocks of `N`, per
/// unit `X₀²`: Bob's `N·log r`, Eve's `N·log F` against individual attacks
/// and `N·log F²` against collective ones.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AdExponents<T> {
    pub bob: T,
    pub eve_individual: T,
    pub eve_collective: T,
}

pub fn advantage_distillation_exponents<T: Real>(s: &GaussianState<T>, coords: [usize; 2], n: usize) -> Result<AdExponents<T>> {
    if n == 0 {
        return Err(Error::InvalidParameter("block length must be at least 1".into()));
    }
    let k = T::from_usize(n).unwrap();
    let e = eps_ratio_exponent(s, coords)?;
    let f = fidelity_exponent(s, coords)?;
    Ok(AdExponents { bob: k * e, eve_individual: k * f, eve_collective: k * (f + f) })
}

/// Binary entropy in bits; `h₂(0) = h₂(1) = 0`.
pub fn binary_entropy<T: Real>(p: T) -> T {
    let term = |q: T| if q > T::zero() { -q * q.log2() } else { T::zero() };
    term(p) + term(T::one() - p)
}

/// Heuristic key rate per distilled bit after blocks of `N`, at a concrete
/// `X₀`: `[1 − h₂(ε_BN)] − h₂((1 + F^N)/2)`.
///
/// Bob's term uses `ε_BN = r^N / (1 + r^N)`. Eve's term is the Holevo
/// information she would have if her two conditional states were pure with
/// overlap `F^N`. The result is an ESTIMATE, not a bound.
pub fn key_rate_estimate<T: Real>(s: &GaussianState<T>, coords: [usize; 2], x0: T, n: usize) -> Result<T> {
    let ex = advantage_distillation_exponents(s, coords, n)?;
    let x2 = x0 * x0;
    // ε_BN = 1 / (1 + r^{−N}), evaluated from the log to avoid overflow.
    let eps_bn = T::one() / (T::one() + (-ex.bob * x2).exp());
    let overlap = (ex.eve_individual * x2).exp();
    let half = T::lit(0.5);
    Ok(T::one() - binary_entropy(eps_bn) - binary_entropy((T::one() + overlap) * half))
}

pub const KEY_RATE_PROVENANCE: &str =
    "ESTIMATE: [1 - h2(eps_BN)] - h2((1 + F^N)/2); Eve's term treats her conditional states as pure with overlap F^N";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KeyRateEstimate {
    pub value: f64,
    pub block_length: usize,
    pub provenance: &'static str,
}

/// Everything the analysis says about one state.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SecurityReport {
    pub n_a: usize,
    pub n_b: usize,
    pub measured_coords: [usize; 2],
    pub x0: f64,
    /// `log(ε_B / (1 − ε_B))` per unit `X₀²`.
    pub eps_ratio_exponent: f64,
    /// `log F` per unit `X₀²`.
    pub fidelity_exponent: f64,
    pub eps_b: f64,
    pub eve_fidelity: f64,
    pub ppt: bool,
    pub nppt: bool,
    pub individual_secure: bool,
    pub collective_secure: bool,
    pub general_key_condition: bool,
    pub key_rate_estimate: Option<KeyRateEstimate>,
}

impl SecurityReport {
    /// The implications every report must satisfy.
    pub fn is_consistent(&self) -> bool {
        (!self.individual_secure || self.nppt) && (!self.collective_secure || self.individual_secure) && self.ppt != self.nppt
    }
}

/// Builds the full report. `block_length` enables the key-rate estimate.
pub fn analyze<T: Real>(
    s: &GaussianState<T>,
    split: BipartiteSplit,
    coords: Option<[usize; 2]>,
    x0: T,
    block_length: Option<usize>,
) -> Result<SecurityReport> {
    split.check(s)?;
    s.require_physical()?;
    if !(x0 > T::zero()) {
        return Err(Error::InvalidParameter(format!("X0 must be positive, got {x0}")));
    }
    let coords = coords.unwrap_or_else(|| default_coords(split));
    let e = eps_ratio_exponent(s, coords)?;
    let f = fidelity_exponent(s, coords)?;
    let nppt = state::is_nppt(s, split)?;
    let x2 = x0 * x0;
    let r = (e * x2).exp();
    let key_rate_estimate = match block_length {
        Some(n) => Some(KeyRateEstimate {
            value: key_rate_estimate(s, coords, x0, n)?.as_f64(),
            block_length: n,
            provenance: KEY_RATE_PROVENANCE,
        }),
        None => None,
    };
    let general = if split.n_a >= 1 && coords[0] < 2 * split.n_a && coords[1] >= 2 * split.n_a {
        general_key_condition(s, split, coords)?
    } else {
        false
    };
    Ok(SecurityReport {
        n_a: split.n_a,
        n_b: split.n_b,
        measured_coords: coords,
        x0: x0.as_f64(),
        eps_ratio_exponent: e.as_f64(),
        fidelity_exponent: f.as_f64(),
        eps_b: (r / (T::one() + r)).as_f64(),
        eve_fidelity: (f * x2).exp().as_f64(),
        ppt: !nppt,
        nppt,
        individual_secure: strictly_below(e, f),
        collective_secure: strictly_below(e, f + f),
        general_key_condition: general,
        key_rate_estimate,
    })
}

/// `c / (λ − c) − (λ² − c² − 1)`: the collective condition on the isotropic
/// symmetric family, positive on the secure side.
pub fn symmetric_collective_cubic<T: Real>(lambda: T, c: T) -> T {
    c / (lambda - c) - (lambda * lambda - c * c - T::one())
}

/// Smallest `c` at which the isotropic symmetric state with parameter
/// `lambda` becomes secure against collective attacks.
///
/// Bisects the matrix-level margin `eps_ratio_exponent − 2·fidelity_exponent`
/// on `[lo, hi]`, by default between the entanglement boundary `λ − 1` and
/// the physicality boundary `√(λ² − 1)`.
pub fn collective_boundary<T: Real>(lambda: T, bracket: Option<(T, T)>) -> Result<T> {
    if !(lambda > T::one()) {
        return Err(Error::InvalidParameter(format!("need λ > 1, got {lambda}")));
    }
    let (mut lo, mut hi) = bracket.unwrap_or((lambda - T::one(), (lambda * lambda - T::one()).sqrt()));
    let margin = |c: T| -> Result<T> {
        let s = state::make_symmetric_state(&SymmetricStateParams::isotropic(lambda, c))?;
        collective_margin(&s, [0, 2])
    };
    let (m_lo, m_hi) = (margin(lo)?, margin(hi)?);
    if !(m_lo > T::zero() && m_hi < T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "bracket [{lo}, {hi}] does not straddle the collective boundary (margins {m_lo}, {m_hi})"
        )));
    }
    for _ in 0..200 {
        let mid = (lo + hi) * T::lit(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        if margin(mid)? > T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) * T::lit(0.5))
}
