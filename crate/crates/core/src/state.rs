//! Gaussian states: covariance matrix `γ` plus displacement `d`.
//!
//! Convention: `γ_kl = tr{ρ {R_k − d_k, R_l − d_l}₊}`, so the vacuum has
//! `γ = 1` and a quadrature measured on it has variance `1/2`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::linalg::{self, max_abs, partial_momentum_flip, sigma, submatrix, subvector};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianState<T: Real> {
    n_modes: usize,
    cov: DMatrix<T>,
    disp: DVector<T>,
}

impl<T: Real> GaussianState<T> {
    /// Wraps a covariance matrix and displacement. The state is not required
    /// to be physical (partial transposes generally are not).
    pub fn new(cov: DMatrix<T>, disp: DVector<T>) -> Result<Self> {
        let dim = cov.nrows();
        if cov.ncols() != dim || dim == 0 || dim % 2 != 0 {
            return Err(Error::DimensionMismatch(format!(
                "covariance matrix must be 2n x 2n, got {}x{}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        if disp.len() != dim {
            return Err(Error::DimensionMismatch(format!(
                "displacement has length {}, expected {dim}",
                disp.len()
            )));
        }
        let asym = max_abs(&(&cov - cov.transpose()));
        if asym > T::TAU_LIN * (T::one() + max_abs(&cov)) {
            return Err(Error::InvalidParameter(format!(
                "covariance matrix is not symmetric (max asymmetry {:e})",
                asym.as_f64()
            )));
        }
        Ok(Self { n_modes: dim / 2, cov, disp })
    }

    pub fn centered(cov: DMatrix<T>) -> Result<Self> {
        let dim = cov.nrows();
        Self::new(cov, DVector::zeros(dim))
    }

    pub fn vacuum(n_modes: usize) -> Self {
        let dim = 2 * n_modes;
        Self { n_modes, cov: DMatrix::identity(dim, dim), disp: DVector::zeros(dim) }
    }

    /// Single-mode thermal state with symplectic eigenvalue `nu = 2n̄ + 1`.
    pub fn thermal(nu: T) -> Self {
        Self { n_modes: 1, cov: DMatrix::identity(2, 2) * nu, disp: DVector::zeros(2) }
    }

    /// Two-mode squeezed vacuum: the symmetric family at `λ = cosh 2r`, `c = sinh 2r`.
    pub fn two_mode_squeezed(r: T) -> Self {
        let two_r = r + r;
        let p = SymmetricStateParams { lambda: two_r.cosh(), c_x: two_r.sinh(), c_p: two_r.sinh() };
        symmetric_covariance(&p)
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn cov(&self) -> &DMatrix<T> {
        &self.cov
    }

    pub fn disp(&self) -> &DVector<T> {
        &self.disp
    }

    pub fn with_disp(mut self, disp: DVector<T>) -> Result<Self> {
        if disp.len() != self.disp.len() {
            return Err(Error::DimensionMismatch(format!(
                "displacement has length {}, expected {}",
                disp.len(),
                self.disp.len()
            )));
        }
        self.disp = disp;
        Ok(self)
    }

    pub fn symplectic_spectrum(&self) -> Result<Vec<T>> {
        linalg::symplectic_eigenvalues(&self.cov)
    }

    /// Smallest symplectic eigenvalue, or `None` if `γ` is not positive definite.
    pub fn min_symplectic_eigenvalue(&self) -> Option<T> {
        self.symplectic_spectrum().ok().and_then(|s| s.last().copied())
    }

    pub fn is_physical(&self) -> bool {
        is_physical(self)
    }

    /// `Err(Unphysical)` unless every symplectic eigenvalue is at least one.
    pub fn require_physical(&self) -> Result<()> {
        match self.min_symplectic_eigenvalue() {
            Some(nu) if nu >= T::one() - self.physicality_tolerance() => Ok(()),
            Some(nu) => Err(Error::Unphysical(format!("smallest symplectic eigenvalue {nu}"))),
            None => Err(Error::Unphysical("covariance matrix is not positive definite".into())),
        }
    }

    /// `τ_psd`, widened for strongly squeezed states where the symplectic
    /// spectrum is only resolved to a few ulps of `‖γ‖`.
    pub fn physicality_tolerance(&self) -> T {
        T::TAU_PSD.max(T::default_epsilon() * T::lit(100.0) * max_abs(&self.cov))
    }

    pub fn to_f64(&self) -> GaussianState<f64> {
        GaussianState {
            n_modes: self.n_modes,
            cov: self.cov.map(|x| x.as_f64()),
            disp: self.disp.map(|x| x.as_f64()),
        }
    }

    pub fn from_f64(state: &GaussianState<f64>) -> Self {
        GaussianState {
            n_modes: state.n_modes,
            cov: state.cov.map(T::lit),
            disp: state.disp.map(T::lit),
        }
    }

    pub fn to_file(&self) -> StateFile {
        StateFile {
            n_modes: self.n_modes,
            cov: self.cov.row_iter().map(|r| r.iter().map(|x| x.as_f64()).collect()).collect(),
            disp: self.disp.iter().map(|x| x.as_f64()).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("state serializes")
    }

    /// Parses the interchange format, reporting the exact position of any
    /// schema violation.
    pub fn from_json(text: &str) -> Result<Self> {
        let file = StateFile::parse(text)?;
        Self::try_from(file)
    }
}

/// Serialized form: `{"n_modes": int, "cov": [[...]], "disp": [...]}`, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateFile {
    pub n_modes: usize,
    pub cov: Vec<Vec<f64>>,
    pub disp: Vec<f64>,
}

impl StateFile {
    pub fn parse(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Schema("top level must be an object".into()))?;
        for key in obj.keys() {
            if !matches!(key.as_str(), "n_modes" | "cov" | "disp") {
                return Err(Error::Schema(format!("unknown field `{key}`")));
            }
        }
        let n_modes = obj
            .get("n_modes")
            .ok_or_else(|| Error::Schema("missing field `n_modes`".into()))?
            .as_u64()
            .filter(|&n| n >= 1)
            .ok_or_else(|| Error::Schema("`n_modes` must be a positive integer".into()))?
            as usize;
        let dim = 2 * n_modes;

        let rows = obj
            .get("cov")
            .ok_or_else(|| Error::Schema("missing field `cov`".into()))?
            .as_array()
            .ok_or_else(|| Error::Schema("`cov` must be an array of rows".into()))?;
        if rows.len() != dim {
            return Err(Error::Schema(format!("`cov` has {} rows, expected {dim}", rows.len())));
        }
        let mut cov = Vec::with_capacity(dim);
        for (i, row) in rows.iter().enumerate() {
            let row = row
                .as_array()
                .ok_or_else(|| Error::Schema(format!("cov[{i}] must be an array")))?;
            if row.len() != dim {
                return Err(Error::Schema(format!("cov[{i}] has {} entries, expected {dim}", row.len())));
            }
            let mut parsed = Vec::with_capacity(dim);
            for (j, x) in row.iter().enumerate() {
                let x = x
                    .as_f64()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| Error::Schema(format!("cov[{i}][{j}] is not a finite number")))?;
                parsed.push(x);
            }
            cov.push(parsed);
        }

        let disp = match obj.get("disp") {
            None => vec![0.0; dim],
            Some(v) => {
                let arr = v
                    .as_array()
                    .ok_or_else(|| Error::Schema("`disp` must be an array".into()))?;
                if arr.len() != dim {
                    return Err(Error::Schema(format!("`disp` has {} entries, expected {dim}", arr.len())));
                }
                arr.iter()
                    .enumerate()
                    .map(|(k, x)| {
                        x.as_f64()
                            .filter(|x| x.is_finite())
                            .ok_or_else(|| Error::Schema(format!("disp[{k}] is not a finite number")))
                    })
                    .collect::<Result<Vec<_>>>()?
            }
        };
        Ok(Self { n_modes, cov, disp })
    }
}

impl<T: Real> TryFrom<StateFile> for GaussianState<T> {
    type Error = Error;

    fn try_from(file: StateFile) -> Result<Self> {
        let dim = 2 * file.n_modes;
        for i in 0..dim {
            for j in (i + 1)..dim {
                let (a, b) = (file.cov[i][j], file.cov[j][i]);
                if (a - b).abs() > 1e-9 * (1.0 + a.abs().max(b.abs())) {
                    return Err(Error::Schema(format!("cov[{i}][{j}] = {a} but cov[{j}][{i}] = {b}; matrix must be symmetric")));
                }
            }
        }
        let cov = DMatrix::from_fn(dim, dim, |i, j| T::lit(file.cov[i][j]));
        let disp = DVector::from_iterator(dim, file.disp.iter().map(|&x| T::lit(x)));
        GaussianState::new(cov, disp)
    }
}

/// `n_a` modes for Alice followed by `n_b` for Bob.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BipartiteSplit {
    pub n_a: usize,
    pub n_b: usize,
}

impl BipartiteSplit {
    pub fn new(n_a: usize, n_b: usize) -> Self {
        Self { n_a, n_b }
    }

    pub fn one_by_one() -> Self {
        Self { n_a: 1, n_b: 1 }
    }

    pub fn n_modes(&self) -> usize {
        self.n_a + self.n_b
    }

    pub fn check<T: Real>(&self, state: &GaussianState<T>) -> Result<()> {
        if self.n_a == 0 || self.n_b == 0 {
            return Err(Error::InvalidParameter(format!(
                "both parties need at least one mode, got {}x{}",
                self.n_a, self.n_b
            )));
        }
        if self.n_modes() != state.n_modes() {
            return Err(Error::DimensionMismatch(format!(
                "split {}x{} does not match a {}-mode state",
                self.n_a,
                self.n_b,
                state.n_modes()
            )));
        }
        Ok(())
    }
}

/// `(λ, c_x, c_p)` of the symmetric two-mode family with
/// `A = B = λ·1₂` and `C = diag(c_x, −c_p)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetricStateParams<T> {
    pub lambda: T,
    pub c_x: T,
    pub c_p: T,
}

impl<T: Real> SymmetricStateParams<T> {
    pub fn new(lambda: T, c_x: T, c_p: T) -> Self {
        Self { lambda, c_x, c_p }
    }

    /// Isotropic member `c_x = c_p = c`.
    pub fn isotropic(lambda: T, c: T) -> Self {
        Self { lambda, c_x: c, c_p: c }
    }

    /// `λ² − c_x c_p − 1 − λ(c_x − c_p)`; physical iff non-negative.
    pub fn physicality_margin(&self) -> T {
        let Self { lambda, c_x, c_p } = *self;
        lambda * lambda - c_x * c_p - T::one() - lambda * (c_x - c_p)
    }

    /// `λ(c_x + c_p) − (λ² + c_x c_p − 1)`; entangled iff positive.
    pub fn entanglement_margin(&self) -> T {
        let Self { lambda, c_x, c_p } = *self;
        lambda * (c_x + c_p) - (lambda * lambda + c_x * c_p - T::one())
    }
}

fn symmetric_covariance<T: Real>(p: &SymmetricStateParams<T>) -> GaussianState<T> {
    let z = T::zero();
    let (l, cx, cp) = (p.lambda, p.c_x, p.c_p);
    #[rustfmt::skip]
    let cov = DMatrix::from_row_slice(4, 4, &[
        l,  z,   cx,  z,
        z,  l,   z,   -cp,
        cx, z,   l,   z,
        z,  -cp, z,   l,
    ]);
    GaussianState { n_modes: 2, cov, disp: DVector::zeros(4) }
}

/// Builds the symmetric two-mode state, rejecting unphysical parameters.
pub fn make_symmetric_state<T: Real>(p: &SymmetricStateParams<T>) -> Result<GaussianState<T>> {
    if p.lambda < T::zero() || p.c_p < T::zero() || p.c_x < p.c_p {
        return Err(Error::InvalidParameter(format!(
            "need λ ≥ 0 and c_x ≥ c_p ≥ 0, got λ={}, c_x={}, c_p={}",
            p.lambda, p.c_x, p.c_p
        )));
    }
    let margin = p.physicality_margin();
    if margin < -T::TAU_PSD {
        return Err(Error::Unphysical(format!(
            "λ² − c_x c_p − 1 < λ(c_x − c_p) (margin {margin})"
        )));
    }
    Ok(symmetric_covariance(p))
}

/// The symmetric family's covariance matrix without the physicality check.
pub fn symmetric_state_unchecked<T: Real>(p: &SymmetricStateParams<T>) -> GaussianState<T> {
    symmetric_covariance(p)
}

/// `γ ≥ iσ`, decided on the smallest symplectic eigenvalue.
pub fn is_physical<T: Real>(s: &GaussianState<T>) -> bool {
    s.require_physical().is_ok()
}

/// `tr ρ² = det(γ)^{−1/2}`.
pub fn purity<T: Real>(s: &GaussianState<T>) -> Result<T> {
    s.require_physical()?;
    let det = s.cov.determinant();
    Ok(T::one() / det.sqrt())
}

/// Flips the sign of Bob's momenta: `γ → θ_B γ θ_B`, `d → θ_B d`.
pub fn partial_transpose<T: Real>(s: &GaussianState<T>, split: BipartiteSplit) -> Result<GaussianState<T>> {
    split.check(s)?;
    let theta = partial_momentum_flip::<T>(split.n_a, split.n_b);
    Ok(GaussianState {
        n_modes: s.n_modes,
        cov: &theta * &s.cov * &theta,
        disp: &theta * &s.disp,
    })
}

/// Non-positive partial transpose: the partially transposed covariance matrix
/// violates the uncertainty relation. States within `TAU_PSD` of the
/// boundary count as PPT.
pub fn is_nppt<T: Real>(s: &GaussianState<T>, split: BipartiteSplit) -> Result<bool> {
    Ok(pt_margin(s, split)? < -T::TAU_PSD)
}

/// `ν̃_min − 1` for the partial transpose; negative means NPPT.
pub fn pt_margin<T: Real>(s: &GaussianState<T>, split: BipartiteSplit) -> Result<T> {
    s.require_physical()?;
    let pt = partial_transpose(s, split)?;
    let nu = pt
        .min_symplectic_eigenvalue()
        .ok_or_else(|| Error::NumericalFailure("partial transpose lost positive definiteness".into()))?;
    Ok(nu - T::one())
}

/// NPPT through the inverse form: `γ − σ̃ γ⁻¹ σ̃ᵀ` has a negative eigenvalue,
/// with `σ̃ = (1_A ⊕ θ_B) σ (1_A ⊕ θ_B)`.
pub fn is_nppt_inverse_form<T: Real>(s: &GaussianState<T>, split: BipartiteSplit) -> Result<bool> {
    Ok(inverse_form_min_eigenvalue(s, split)? < -T::TAU_PSD)
}

pub fn inverse_form_min_eigenvalue<T: Real>(s: &GaussianState<T>, split: BipartiteSplit) -> Result<T> {
    s.require_physical()?;
    split.check(s)?;
    let theta = partial_momentum_flip::<T>(split.n_a, split.n_b);
    let sigma_t = &theta * sigma::<T>(s.n_modes) * &theta;
    let inv = linalg::checked_inverse(&s.cov, "covariance matrix")?;
    let diff = &s.cov - &sigma_t * inv * sigma_t.transpose();
    let diff = (&diff + diff.transpose()) * T::lit(0.5);
    Ok(diff.symmetric_eigenvalues().iter().copied().fold(T::max_value().unwrap(), |a, b| a.min(b)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Separability {
    Separable,
    Entangled,
    /// The PPT test is only necessary beyond `1×N` splits.
    Undecided,
}

pub fn is_separable<T: Real>(s: &GaussianState<T>, split: BipartiteSplit) -> Result<Separability> {
    let nppt = is_nppt(s, split)?;
    if nppt {
        return Ok(Separability::Entangled);
    }
    if split.n_a == 1 || split.n_b == 1 {
        Ok(Separability::Separable)
    } else {
        Ok(Separability::Undecided)
    }
}

/// Gaussian states are distillable exactly when they are NPPT.
pub fn is_distillable<T: Real>(s: &GaussianState<T>, split: BipartiteSplit) -> Result<bool> {
    is_nppt(s, split)
}

/// Classical probability density of a subset of quadratures.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianDensity<T: Real> {
    pub mean: DVector<T>,
    /// Probability covariance, `γ_sub / 2`.
    pub cov: DMatrix<T>,
}

impl<T: Real> GaussianDensity<T> {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn pdf(&self, x: &DVector<T>) -> Result<T> {
        let inv = linalg::checked_inverse(&self.cov, "density covariance")?;
        let dx = x - &self.mean;
        let q = dx.dot(&(&inv * &dx));
        let k = T::from_usize(self.dim()).unwrap();
        let norm = (T::two_pi().powf(k) * self.cov.determinant()).sqrt();
        Ok((-q * T::lit(0.5)).exp() / norm)
    }
}

pub fn quadrature_density<T: Real>(s: &GaussianState<T>, coords: &[usize]) -> Result<GaussianDensity<T>> {
    check_coords(s, coords)?;
    s.require_physical()?;
    Ok(GaussianDensity {
        mean: subvector(&s.disp, coords),
        cov: submatrix(&s.cov, coords, coords) * T::lit(0.5),
    })
}

pub(crate) fn check_coords<T: Real>(s: &GaussianState<T>, coords: &[usize]) -> Result<()> {
    let dim = 2 * s.n_modes;
    if coords.is_empty() {
        return Err(Error::InvalidParameter("coordinate list is empty".into()));
    }
    for (k, &c) in coords.iter().enumerate() {
        if c >= dim {
            return Err(Error::InvalidParameter(format!("coordinate {c} out of range for {dim} quadratures")));
        }
        if coords[..k].contains(&c) {
            return Err(Error::InvalidParameter(format!("coordinate {c} listed twice")));
        }
    }
    Ok(())
}
