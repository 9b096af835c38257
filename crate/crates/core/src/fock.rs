//! Truncated Fock-space representation of one- and two-mode Gaussian states,
//! used as an independent check of the phase-space formulas.
//!
//! Quadratures are `X = (a + a†)/√2`, `P = i(a† − a)/√2`, so the vacuum has
//! `⟨X²⟩ = 1/2` and covariance matrix `γ = 1`. Everything here is `f64`.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::williamson;
use crate::scalar::Real;
use crate::state::GaussianState;

type C64 = Complex<f64>;
type CMatrix = DMatrix<C64>;

/// Largest probability mass the truncation may discard.
pub const TAU_TAIL: f64 = 1e-8;
pub const DEFAULT_CUTOFF_ONE_MODE: usize = 40;
pub const DEFAULT_CUTOFF_PER_MODE_TWO_MODES: usize = 20;
/// Inverse temperature used for (numerically) pure symplectic modes.
const BETA_CAP: f64 = 60.0;

#[derive(Clone, Debug, PartialEq)]
pub struct FockState {
    pub cutoff: usize,
    pub n_modes: usize,
    pub rho: CMatrix,
    /// Mass outside the kept block, before renormalization.
    pub tail_mass: f64,
}

impl FockState {
    /// Wraps a density matrix, normalizing its trace.
    pub fn from_matrix(rho: CMatrix, cutoff: usize, n_modes: usize) -> Result<Self> {
        let dim = cutoff.pow(n_modes as u32);
        if rho.shape() != (dim, dim) {
            return Err(Error::DimensionMismatch(format!(
                "density matrix is {}x{}, expected {dim}x{dim}",
                rho.nrows(),
                rho.ncols()
            )));
        }
        let herm = max_abs_c(&(&rho - rho.adjoint()));
        if herm > 1e-10 {
            return Err(Error::NumericalFailure(format!("density matrix is not Hermitian ({herm:e})")));
        }
        let tr = rho.trace().re;
        if !(tr > 0.0) {
            return Err(Error::NumericalFailure("density matrix has non-positive trace".into()));
        }
        let rho = hermitize(&(rho / C64::new(tr, 0.0)));
        Ok(Self { cutoff, n_modes, rho, tail_mass: 0.0 })
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    /// Keeps the lowest `cutoff` levels per mode and renormalizes; the
    /// discarded mass is added to `tail_mass`.
    pub fn project(&self, cutoff: usize) -> Result<Self> {
        if cutoff == 0 || cutoff > self.cutoff {
            return Err(Error::InvalidParameter(format!("cannot project a cutoff-{} state to {cutoff}", self.cutoff)));
        }
        let keep = kept_indices(self.cutoff, cutoff, self.n_modes);
        let block = CMatrix::from_fn(keep.len(), keep.len(), |i, j| self.rho[(keep[i], keep[j])]);
        let tr = block.trace().re;
        let mut out = Self::from_matrix(block, cutoff, self.n_modes)?;
        out.tail_mass = 1.0 - (1.0 - self.tail_mass) * tr;
        Ok(out)
    }

    /// Photon-number distribution of a single-mode state.
    pub fn photon_distribution(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.rho[(i, i)].re).collect()
    }

    /// `⟨a†a⟩` summed over modes.
    pub fn mean_photon_number(&self) -> f64 {
        let ops = Ops::new(self.cutoff, self.n_modes);
        (0..self.n_modes).map(|m| expect(&self.rho, &ops.number(m))).sum()
    }

    /// First and second moments in the phase-space convention.
    pub fn moments(&self) -> (DMatrix<f64>, DVector<f64>) {
        let ops = Ops::new(self.cutoff, self.n_modes);
        let dim = 2 * self.n_modes;
        let disp = DVector::from_fn(dim, |k, _| expect(&self.rho, &ops.quad(k)));
        let cov = DMatrix::from_fn(dim, dim, |k, l| 2.0 * expect(&self.rho, &ops.sym_product(k, l)) - 2.0 * disp[k] * disp[l]);
        (cov, disp)
    }
}

fn max_abs_c(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// `Re tr(ρ A)` without forming the product.
fn expect(rho: &CMatrix, op: &CMatrix) -> f64 {
    rho.iter().zip(op.transpose().iter()).map(|(r, o)| (r * o).re).sum()
}

/// Flat indices of the basis states whose every mode is below `keep`.
fn kept_indices(cutoff: usize, keep: usize, n_modes: usize) -> Vec<usize> {
    let dim = cutoff.pow(n_modes as u32);
    (0..dim)
        .filter(|&i| {
            let mut r = i;
            (0..n_modes).all(|_| {
                let level = r % cutoff;
                r /= cutoff;
                level < keep
            })
        })
        .collect()
}

/// Exact matrix elements of quadrature operators, truncated to `cutoff`
/// levels per mode. Mode 0 is the most significant tensor factor.
struct Ops {
    cutoff: usize,
    n_modes: usize,
}

impl Ops {
    fn new(cutoff: usize, n_modes: usize) -> Self {
        Self { cutoff, n_modes }
    }

    /// Single-mode `⟨m|a^p|n⟩`-style ladder matrices.
    fn lower(&self, power: usize) -> CMatrix {
        let d = self.cutoff;
        CMatrix::from_fn(d, d, |m, n| {
            if n >= power && m == n - power {
                let v: f64 = (m + 1..=n).map(|k| k as f64).product();
                C64::new(v.sqrt(), 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }

    fn embed(&self, mode: usize, op: &CMatrix) -> CMatrix {
        let id = CMatrix::identity(self.cutoff, self.cutoff);
        let mut out = CMatrix::identity(1, 1);
        for m in 0..self.n_modes {
            out = out.kronecker(if m == mode { op } else { &id });
        }
        out
    }

    /// `A` on mode 0 tensored with `B` on mode 1.
    fn pair(&self, a: &CMatrix, b: &CMatrix) -> CMatrix {
        a.kronecker(b)
    }

    fn single_quad(&self, which: usize) -> CMatrix {
        let a = self.lower(1);
        let ad = a.adjoint();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        if which == 0 {
            (&a + &ad) * C64::new(s, 0.0)
        } else {
            (&ad - &a) * C64::new(0.0, s)
        }
    }

    fn quad(&self, k: usize) -> CMatrix {
        self.embed(k / 2, &self.single_quad(k % 2))
    }

    fn number(&self, mode: usize) -> CMatrix {
        let a = self.lower(1);
        self.embed(mode, &(a.adjoint() * a))
    }

    /// `(R_k R_l + R_l R_k) / 2` with exact matrix elements.
    fn sym_product(&self, k: usize, l: usize) -> CMatrix {
        if k / 2 != l / 2 {
            let (qk, ql) = (self.single_quad(k % 2), self.single_quad(l % 2));
            return if k < l { self.pair(&qk, &ql) } else { self.pair(&ql, &qk) };
        }
        let a = self.lower(1);
        let a2 = self.lower(2);
        let (ad, ad2) = (a.adjoint(), a2.adjoint());
        let n = &ad * &a;
        let id = CMatrix::identity(self.cutoff, self.cutoff);
        let half = C64::new(0.5, 0.0);
        let single = match (k % 2, l % 2) {
            // X² = (a² + a†² + 2a†a + 1)/2
            (0, 0) => (&a2 + &ad2 + &n * C64::new(2.0, 0.0) + &id) * half,
            // P² = (−a² − a†² + 2a†a + 1)/2
            (1, 1) => (-&a2 - &ad2 + &n * C64::new(2.0, 0.0) + &id) * half,
            // (XP + PX)/2 = i(a†² − a²)/2
            _ => (&ad2 - &a2) * C64::new(0.0, 0.5),
        };
        self.embed(k / 2, &single)
    }
}

/// Density matrix of a one- or two-mode Gaussian state at `cutoff` levels
/// per mode.
///
/// The state is `exp(−½ (R − d)ᵀ G (R − d))` normalized, with
/// `G = Sᵀ diag(βᵢ) S`, `S γ Sᵀ = ⊕ νᵢ 1₂` and `βᵢ = ln((νᵢ+1)/(νᵢ−1))`. The
/// exponential is evaluated in a padded space and then truncated.
pub fn gaussian_to_fock<T: Real>(s: &GaussianState<T>, cutoff: usize) -> Result<FockState> {
    let s = s.to_f64();
    let n_modes = s.n_modes();
    if !(1..=2).contains(&n_modes) {
        return Err(Error::InvalidParameter(format!("Fock conversion supports 1 or 2 modes, got {n_modes}")));
    }
    if cutoff < 1 {
        return Err(Error::InvalidParameter("cutoff must be positive".into()));
    }
    s.require_physical()?;
    let w = williamson(s.cov())?;
    let beta: Vec<f64> = w
        .spectrum
        .iter()
        .map(|&nu| if nu - 1.0 < 1e-12 { BETA_CAP } else { ((nu + 1.0) / (nu - 1.0)).ln().min(BETA_CAP) })
        .collect();
    let dim = 2 * n_modes;
    let b = DMatrix::from_fn(dim, dim, |i, j| if i == j { beta[i / 2] } else { 0.0 });
    let g = w.symplectic.transpose() * b * &w.symplectic;
    // Round-off in the Williamson factor leaves tiny X–P couplings that
    // would force the (much slower) complex eigensolver.
    let g_scale = g.amax();
    let g = g.map(|x| if x.abs() < 1e-14 * g_scale { 0.0 } else { x });

    let pad = if n_modes == 1 { (cutoff / 2).max(20) } else { (cutoff / 2).max(8) };
    let big = cutoff + pad;
    let ops = Ops::new(big, n_modes);
    let fdim = big.pow(n_modes as u32);
    let d = s.disp();
    let gd = &g * d;
    // H = ½ Σ G_kl R_k R_l − Σ (G d)_k R_k + const
    let mut h = CMatrix::zeros(fdim, fdim);
    for k in 0..dim {
        for l in 0..dim {
            if g[(k, l)] != 0.0 {
                h += ops.sym_product(k, l) * C64::new(0.5 * g[(k, l)], 0.0);
            }
        }
        if gd[k] != 0.0 {
            h -= ops.quad(k) * C64::new(gd[k], 0.0);
        }
    }
    let (values, vectors) = hermitian_eigen(&h);
    let e_min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = values.iter().map(|e| (-(e - e_min)).exp()).collect();
    let total: f64 = weights.iter().sum();
    // Only the kept rows of the eigenvectors are needed for the block.
    let keep = kept_indices(big, cutoff, n_modes);
    let rows = CMatrix::from_fn(keep.len(), fdim, |i, j| vectors[(keep[i], j)]);
    let scaled = CMatrix::from_fn(keep.len(), fdim, |i, j| rows[(i, j)] * weights[j] / total);
    let block = cmul(&scaled, &rows.adjoint());
    let kept_mass = block.trace().re;
    let mut out = FockState::from_matrix(block, cutoff, n_modes)?;
    out.tail_mass = (1.0 - kept_mass).max(0.0);
    if out.tail_mass >= TAU_TAIL {
        return Err(Error::TailTooHeavy(out.tail_mass));
    }
    Ok(out)
}

/// Complex product through four real products, which are much faster.
fn cmul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ai) = (a.map(|z| z.re), a.map(|z| z.im));
    let (br, bi) = (b.map(|z| z.re), b.map(|z| z.im));
    let re = &ar * &br - &ai * &bi;
    let im = &ar * &bi + &ai * &br;
    CMatrix::from_fn(a.nrows(), b.ncols(), |i, j| C64::new(re[(i, j)], im[(i, j)]))
}

/// Eigen-decomposition of a Hermitian matrix, taking the real symmetric
/// route when the imaginary part vanishes.
fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let m = hermitize(m);
    if m.iter().all(|z| z.im == 0.0) {
        let eig = m.map(|z| z.re).symmetric_eigen();
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors.map(|x| C64::new(x, 0.0)))
    } else {
        let eig = m.symmetric_eigen();
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
    }
}

/// Converts at the default cutoff for the mode count.
pub fn gaussian_to_fock_default<T: Real>(s: &GaussianState<T>) -> Result<FockState> {
    let cutoff = if s.n_modes() == 1 { DEFAULT_CUTOFF_ONE_MODE } else { DEFAULT_CUTOFF_PER_MODE_TWO_MODES };
    gaussian_to_fock(s, cutoff)
}

/// Hermitian square root; fails on eigenvalues below `−1e−10`.
fn psd_sqrt(m: &CMatrix) -> Result<CMatrix> {
    let (values, v) = hermitian_eigen(m);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -1e-10 {
        return Err(Error::NumericalFailure(format!("negative eigenvalue {min:e}")));
    }
    let scaled = CMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] * values[j].max(0.0).sqrt());
    Ok(cmul(&scaled, &v.adjoint()))
}

fn check_compatible(r0: &FockState, r1: &FockState) -> Result<()> {
    if r0.cutoff != r1.cutoff || r0.n_modes != r1.n_modes {
        return Err(Error::DimensionMismatch(format!(
            "states at cutoff {}/{} modes and {}/{} modes",
            r0.cutoff, r0.n_modes, r1.cutoff, r1.n_modes
        )));
    }
    Ok(())
}

/// `tr √(√ρ₁ ρ₀ √ρ₁)`.
pub fn uhlmann_fidelity(r0: &FockState, r1: &FockState) -> Result<f64> {
    check_compatible(r0, r1)?;
    let s1 = psd_sqrt(&r1.rho)?;
    let inner = cmul(&cmul(&s1, &r0.rho), &s1);
    let (values, _) = hermitian_eigen(&inner);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -1e-10 {
        return Err(Error::NumericalFailure(format!("negative eigenvalue {min:e}")));
    }
    Ok(values.iter().map(|e| e.max(0.0).sqrt()).sum::<f64>().min(1.0))
}

/// A POVM given by its effects.
pub type Measurement = Vec<CMatrix>;

/// `min_M Σᵢ √(tr(ρ₀Mᵢ) tr(ρ₁Mᵢ))` over the supplied measurements.
pub fn minimal_discrimination_overlap(r0: &FockState, r1: &FockState, measurements: &[Measurement]) -> Result<f64> {
    check_compatible(r0, r1)?;
    if r0.dim() > 16 {
        return Err(Error::InvalidParameter(format!(
            "measurement search is limited to dimension 16, got {}",
            r0.dim()
        )));
    }
    let mut best = f64::INFINITY;
    for m in measurements {
        let mut total = 0.0;
        for effect in m {
            if effect.shape() != r0.rho.shape() {
                return Err(Error::DimensionMismatch("measurement effect has the wrong size".into()));
            }
            let p0 = expect(&r0.rho, effect).max(0.0);
            let p1 = expect(&r1.rho, effect).max(0.0);
            total += (p0 * p1).sqrt();
        }
        best = best.min(total);
    }
    Ok(best)
}

/// Projective qubit measurements along Bloch directions on a
/// `polar_steps × azimuth_steps` grid.
pub fn qubit_projective_grid(polar_steps: usize, azimuth_steps: usize) -> Vec<Measurement> {
    let mut out = Vec::with_capacity(polar_steps * azimuth_steps);
    for i in 0..polar_steps {
        let theta = std::f64::consts::PI * i as f64 / (polar_steps.max(2) - 1) as f64;
        for j in 0..azimuth_steps {
            let phi = 2.0 * std::f64::consts::PI * j as f64 / azimuth_steps as f64;
            let up = DVector::from_vec(vec![
                C64::new((theta / 2.0).cos(), 0.0),
                C64::from_polar((theta / 2.0).sin(), phi),
            ]);
            let down = DVector::from_vec(vec![
                C64::new((theta / 2.0).sin(), 0.0),
                -C64::from_polar((theta / 2.0).cos(), phi),
            ]);
            out.push(vec![&up * up.adjoint(), &down * down.adjoint()]);
        }
    }
    out
}

/// Fock basis state `|n⟩` as a single-mode density matrix.
pub fn number_state(n: usize, cutoff: usize) -> Result<FockState> {
    if n >= cutoff {
        return Err(Error::InvalidParameter(format!("|{n}⟩ does not fit in cutoff {cutoff}")));
    }
    let mut rho = CMatrix::zeros(cutoff, cutoff);
    rho[(n, n)] = C64::new(1.0, 0.0);
    FockState::from_matrix(rho, cutoff, 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn displaced(cov: DMatrix<f64>, d: [f64; 2]) -> GaussianState<f64> {
        GaussianState::new(cov, DVector::from_vec(d.to_vec())).unwrap()
    }

    #[test]
    fn vacuum_is_ground_state() {
        let f = gaussian_to_fock(&GaussianState::<f64>::vacuum(1), 40).unwrap();
        assert!((f.rho[(0, 0)].re - 1.0).abs() < 1e-12);
        assert!(f.tail_mass < 1e-12);
    }

    #[test]
    fn coherent_state_photon_number() {
        let alpha = 0.8f64;
        let s = displaced(DMatrix::identity(2, 2), [2f64.sqrt() * alpha, 0.0]);
        let f = gaussian_to_fock(&s, 40).unwrap();
        assert!((f.mean_photon_number() - alpha * alpha).abs() < 1e-9);
        let p = f.photon_distribution();
        let poisson1 = (-alpha * alpha).exp() * alpha * alpha;
        assert!((p[1] - poisson1).abs() < 1e-9);
    }

    #[test]
    fn thermal_state_is_geometric() {
        let f = gaussian_to_fock(&GaussianState::thermal(2.0f64), 40).unwrap();
        assert!((f.mean_photon_number() - 0.5).abs() < 1e-8);
        let p = f.photon_distribution();
        for n in 0..10 {
            let geometric = (1.0 / 1.5) * (0.5f64 / 1.5).powi(n as i32);
            assert!((p[n] - geometric).abs() < 1e-9, "n={n}");
        }
    }

    #[test]
    fn moments_round_trip_on_squeezed_displaced_state() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.8, 0.4, 0.4, 0.9]);
        let s = displaced(cov.clone(), [0.5, -0.3]);
        let f = gaussian_to_fock(&s, 40).unwrap();
        let (g, d) = f.moments();
        assert!((g - cov).amax() < 1e-6);
        assert!((d - s.disp()).amax() < 1e-6);
    }

    #[test]
    fn two_mode_moments_round_trip() {
        let s = crate::state::make_symmetric_state(&crate::state::SymmetricStateParams::isotropic(1.3f64, 0.5)).unwrap();
        let f = gaussian_to_fock(&s, 20).unwrap();
        let (g, _) = f.moments();
        assert!((g - s.cov()).amax() < 1e-6);
    }

    #[test]
    fn heavy_tails_are_rejected() {
        let s = displaced(DMatrix::identity(2, 2), [8.0, 0.0]);
        assert!(matches!(gaussian_to_fock(&s, 10), Err(Error::TailTooHeavy(_))));
    }

    #[test]
    fn fidelity_basic_cases() {
        let t = gaussian_to_fock(&GaussianState::thermal(1.7f64), 30).unwrap();
        assert!((uhlmann_fidelity(&t, &t).unwrap() - 1.0).abs() < 1e-8);
        let (zero, one) = (number_state(0, 5).unwrap(), number_state(1, 5).unwrap());
        assert!(uhlmann_fidelity(&zero, &one).unwrap() < 1e-12);
        assert!(uhlmann_fidelity(&zero, &t).is_err());
    }

    #[test]
    fn displaced_thermal_pair_fidelity() {
        let cov = DMatrix::identity(2, 2) * 2.0;
        let p = gaussian_to_fock(&displaced(cov.clone(), [1.0, 0.0]), 40).unwrap();
        let m = gaussian_to_fock(&displaced(cov, [-1.0, 0.0]), 40).unwrap();
        let f = uhlmann_fidelity(&p, &m).unwrap();
        assert!((f - (-0.5f64).exp()).abs() < 1e-3, "{f}");
        assert!((f - uhlmann_fidelity(&m, &p).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn qubit_measurement_search_reaches_fidelity() {
        let alpha = 0.3f64;
        let make = |sign: f64| {
            let s = displaced(DMatrix::identity(2, 2), [sign * 2f64.sqrt() * alpha, 0.0]);
            gaussian_to_fock(&s, 40).unwrap().project(2).unwrap()
        };
        let (p, m) = (make(1.0), make(-1.0));
        let f = uhlmann_fidelity(&p, &m).unwrap();
        let best = minimal_discrimination_overlap(&p, &m, &qubit_projective_grid(61, 24)).unwrap();
        assert!(best >= f - 1e-9 && best - f < 1e-2, "{best} vs {f}");
        assert!((minimal_discrimination_overlap(&p, &p, &qubit_projective_grid(5, 4)).unwrap() - 1.0).abs() < 1e-9);
        let (zero, one) = (number_state(0, 2).unwrap(), number_state(1, 2).unwrap());
        assert!(minimal_discrimination_overlap(&zero, &one, &qubit_projective_grid(5, 4)).unwrap() < 1e-12);
    }

    #[test]
    fn projection_accumulates_tail() {
        let s = displaced(DMatrix::identity(2, 2), [1.0, 0.0]);
        let f = gaussian_to_fock(&s, 40).unwrap();
        let q = f.project(3).unwrap();
        assert!(q.tail_mass > 0.0 && q.tail_mass < 1.0);
        assert!((q.rho.trace().re - 1.0).abs() < 1e-12);
        assert!(f.project(41).is_err());
    }
}
