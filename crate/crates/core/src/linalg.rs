//! Real-matrix kernels for the symplectic formalism.
//!
//! Canonical coordinates are always ordered `(X₁, P₁, …, Xₙ, Pₙ)`, so the
//! symplectic form is block diagonal and the `X` projector is
//! `D(1, 0, 1, 0, …)`.

use nalgebra::{Complex, DMatrix, DVector, Schur, SymmetricEigen};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// The antisymmetric form `σ = ⊕ [[0, 1], [−1, 0]]` on `n_modes` modes.
#[derive(Clone, Debug, PartialEq)]
pub struct SymplecticForm<T: Real> {
    n_modes: usize,
    matrix: DMatrix<T>,
}

impl<T: Real> SymplecticForm<T> {
    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<T> {
        self.matrix
    }
}

/// Builds the symplectic form for `n_modes ≥ 1` modes.
///
/// # Panics
/// If `n_modes` is zero.
pub fn symplectic_form<T: Real>(n_modes: usize) -> SymplecticForm<T> {
    assert!(n_modes >= 1, "symplectic form needs at least one mode");
    let mut matrix = DMatrix::zeros(2 * n_modes, 2 * n_modes);
    for k in 0..n_modes {
        matrix[(2 * k, 2 * k + 1)] = T::one();
        matrix[(2 * k + 1, 2 * k)] = -T::one();
    }
    SymplecticForm { n_modes, matrix }
}

/// Shorthand for the raw matrix of [`symplectic_form`].
pub fn sigma<T: Real>(n_modes: usize) -> DMatrix<T> {
    symplectic_form(n_modes).into_matrix()
}

/// `θ = D(1, −1, 1, −1, …)`: flips the sign of every momentum.
pub fn momentum_flip<T: Real>(n_modes: usize) -> DMatrix<T> {
    DMatrix::from_fn(2 * n_modes, 2 * n_modes, |i, j| {
        if i != j {
            T::zero()
        } else if i % 2 == 0 {
            T::one()
        } else {
            -T::one()
        }
    })
}

/// `1_A ⊕ θ_B`: flips the momenta of the last `n_b` modes only.
pub fn partial_momentum_flip<T: Real>(n_a: usize, n_b: usize) -> DMatrix<T> {
    let n = n_a + n_b;
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        if i != j {
            T::zero()
        } else if i % 2 == 1 && i >= 2 * n_a {
            -T::one()
        } else {
            T::one()
        }
    })
}

/// Diagonal projector onto the listed canonical coordinates.
pub fn coordinate_projector<T: Real>(dim: usize, coords: &[usize]) -> DMatrix<T> {
    let mut p = DMatrix::zeros(dim, dim);
    for &c in coords {
        p[(c, c)] = T::one();
    }
    p
}

/// Rows and columns `idx` of `m`, in the order given.
pub fn submatrix<T: Real>(m: &DMatrix<T>, rows: &[usize], cols: &[usize]) -> DMatrix<T> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

pub fn subvector<T: Real>(v: &DVector<T>, idx: &[usize]) -> DVector<T> {
    DVector::from_fn(idx.len(), |i, _| v[idx[i]])
}

pub fn direct_sum<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    let mut out = DMatrix::zeros(ra + rb, ca + cb);
    out.view_mut((0, 0), (ra, ca)).copy_from(a);
    out.view_mut((ra, ca), (rb, cb)).copy_from(b);
    out
}

/// `⊕ λᵢ·I₂` for a symplectic spectrum.
pub fn spectrum_diagonal<T: Real>(spectrum: &[T]) -> DMatrix<T> {
    let n = spectrum.len();
    DMatrix::from_fn(2 * n, 2 * n, |i, j| if i == j { spectrum[i / 2] } else { T::zero() })
}

/// Largest absolute entry; the scale used for relative tolerances.
pub fn max_abs<T: Real>(m: &DMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, x| acc.max(x.abs()))
}

pub(crate) fn check_square<T: Real>(m: &DMatrix<T>, what: &str) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(m.nrows())
}

fn check_phase_space(m: &DMatrix<impl Real>) -> Result<usize> {
    let dim = check_square(m, "phase-space matrix")?;
    if dim == 0 || dim % 2 != 0 {
        return Err(Error::DimensionMismatch(format!(
            "phase-space matrix must have even positive dimension, got {dim}"
        )));
    }
    Ok(dim / 2)
}

fn check_symmetric<T: Real>(m: &DMatrix<T>) -> Result<()> {
    let asym = max_abs(&(m - m.transpose()));
    if asym > T::TAU_LIN * (T::one() + max_abs(m)) {
        return Err(Error::InvalidParameter(format!(
            "matrix is not symmetric (max asymmetry {:e})",
            asym.as_f64()
        )));
    }
    Ok(())
}

/// Symmetric eigendecomposition that refuses non-positive-definite input.
fn positive_eigen<T: Real>(c: &DMatrix<T>) -> Result<SymmetricEigen<T, nalgebra::Dyn>> {
    let sym = (c + c.transpose()) * T::lit(0.5);
    let eig = sym.symmetric_eigen();
    let min = eig.eigenvalues.iter().copied().fold(T::max_value().unwrap(), |a, b| a.min(b));
    if min < T::TAU_PSD {
        return Err(Error::NotPositiveDefinite(min.as_f64()));
    }
    Ok(eig)
}

/// Symplectic eigenvalues of a symmetric positive-definite `C`, largest first.
///
/// They are the moduli of the eigenvalues of `iσC`, which come in `±λ` pairs.
pub fn symplectic_eigenvalues<T: Real>(c: &DMatrix<T>) -> Result<Vec<T>> {
    let n = check_phase_space(c)?;
    check_symmetric(c)?;
    let eig = positive_eigen(c)?;
    // iσC is similar to the Hermitian i C^{1/2} σ C^{1/2}, whose eigensolver
    // always converges; unshifted Schur iterations on σC can stall on
    // near-degenerate spectra.
    let root = &eig.eigenvectors * DMatrix::from_diagonal(&eig.eigenvalues.map(|x| x.sqrt())) * eig.eigenvectors.transpose();
    let k = &root * sigma::<T>(n) * &root;
    let herm = k.map(|x| Complex::new(T::zero(), x));
    let mut moduli: Vec<T> = herm.symmetric_eigenvalues().iter().map(|x| x.abs()).collect();
    moduli.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    Ok(moduli
        .chunks(2)
        .map(|pair| (pair[0] + pair[1]) * T::lit(0.5))
        .collect())
}

/// A symplectic `S` with `S C Sᵀ = ⊕ λᵢ I₂`.
#[derive(Clone, Debug)]
pub struct WilliamsonDecomposition<T: Real> {
    pub symplectic: DMatrix<T>,
    /// Symplectic spectrum, non-increasing.
    pub spectrum: Vec<T>,
}

impl<T: Real> WilliamsonDecomposition<T> {
    pub fn n_modes(&self) -> usize {
        self.spectrum.len()
    }

    pub fn diagonal(&self) -> DMatrix<T> {
        spectrum_diagonal(&self.spectrum)
    }

    /// Rebuilds `C = S⁻¹ (⊕λᵢI₂) S⁻ᵀ`.
    pub fn reconstruct(&self) -> Result<DMatrix<T>> {
        let inv = self
            .symplectic
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::NumericalFailure("symplectic factor not invertible".into()))?;
        Ok(&inv * self.diagonal() * inv.transpose())
    }
}

/// Williamson normal form of a symmetric positive-definite matrix.
///
/// With `K = C^{-1/2} σ C^{-1/2}` (antisymmetric), an orthogonal `O` brings
/// `K` to `⊕ μᵢ J`; then `S = D^{1/2} Oᵀ C^{-1/2}` with `D = ⊕ μᵢ⁻¹ I₂`.
pub fn williamson<T: Real>(c: &DMatrix<T>) -> Result<WilliamsonDecomposition<T>> {
    let n = check_phase_space(c)?;
    check_symmetric(c)?;
    let eig = positive_eigen(c)?;
    let dim = 2 * n;

    let inv_sqrt_diag = DMatrix::from_diagonal(&eig.eigenvalues.map(|e| T::one() / e.sqrt()));
    let c_inv_sqrt = &eig.eigenvectors * inv_sqrt_diag * eig.eigenvectors.transpose();
    let k = &c_inv_sqrt * sigma::<T>(n) * &c_inv_sqrt;
    let q = {
        let q = k.transpose() * &k;
        (&q + q.transpose()) * T::lit(0.5)
    };
    let q_eig = q.clone().symmetric_eigen();

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| {
        q_eig.eigenvalues[a]
            .partial_cmp(&q_eig.eigenvalues[b])
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let mut basis: Vec<DVector<T>> = Vec::with_capacity(dim);
    let mut used = vec![false; dim];
    let mut mus = Vec::with_capacity(n);
    let cluster_tol = T::default_epsilon().sqrt() * T::lit(100.0);

    for _ in 0..n {
        // Residual of every unused eigenvector after removing the chosen span.
        let residuals: Vec<(usize, DVector<T>, T)> = order
            .iter()
            .copied()
            .filter(|&i| !used[i])
            .map(|i| {
                let mut r = q_eig.eigenvectors.column(i).into_owned();
                for b in &basis {
                    let proj = b.dot(&r);
                    r.axpy(-proj, b, T::one());
                }
                let norm = r.norm();
                (i, r, norm)
            })
            .collect();
        let live: Vec<&(usize, DVector<T>, T)> =
            residuals.iter().filter(|(_, _, nr)| *nr > T::lit(1e-3)).collect();
        let lowest = live
            .iter()
            .map(|(i, _, _)| q_eig.eigenvalues[*i])
            .fold(T::max_value().unwrap(), |a, b| a.min(b));
        let cutoff = lowest + cluster_tol * (T::one() + lowest.abs());
        let (pick, resid, _) = live
            .iter()
            .filter(|(i, _, _)| q_eig.eigenvalues[*i] <= cutoff)
            .max_by(|a, b| a.2.partial_cmp(&b.2).unwrap_or(std::cmp::Ordering::Equal))
            .copied()
            .ok_or_else(|| Error::NumericalFailure("Williamson basis construction stalled".into()))?;
        used[*pick] = true;

        let a = resid.normalize();
        let mu = (a.dot(&(&q * &a))).max(T::zero()).sqrt();
        let mut b = -(&k * &a) / mu;
        for v in &basis {
            let proj = v.dot(&b);
            b.axpy(-proj, v, T::one());
        }
        let b = b.normalize();
        basis.push(a);
        basis.push(b);
        mus.push(mu);
    }

    let o = DMatrix::from_columns(&basis);
    let spectrum: Vec<T> = mus.iter().map(|&mu| T::one() / mu).collect();
    let d_sqrt = DMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            spectrum[i / 2].sqrt()
        } else {
            T::zero()
        }
    });
    let symplectic = d_sqrt * o.transpose() * c_inv_sqrt;
    Ok(WilliamsonDecomposition { symplectic, spectrum })
}

/// The four blocks of `[[A, C], [Cᵀ, B]]⁻¹`.
#[derive(Clone, Debug)]
pub struct BlockInverse<T: Real> {
    pub top_left: DMatrix<T>,
    pub top_right: DMatrix<T>,
    pub bottom_left: DMatrix<T>,
    pub bottom_right: DMatrix<T>,
}

impl<T: Real> BlockInverse<T> {
    pub fn assemble(&self) -> DMatrix<T> {
        let (ra, ca) = self.top_left.shape();
        let (rb, cb) = self.bottom_right.shape();
        let mut out = DMatrix::zeros(ra + rb, ca + cb);
        out.view_mut((0, 0), (ra, ca)).copy_from(&self.top_left);
        out.view_mut((0, ca), (ra, cb)).copy_from(&self.top_right);
        out.view_mut((ra, 0), (rb, ca)).copy_from(&self.bottom_left);
        out.view_mut((ra, ca), (rb, cb)).copy_from(&self.bottom_right);
        out
    }
}

/// Inverse with a residual check, so near-singular blocks are reported
/// instead of silently producing garbage.
pub(crate) fn checked_inverse<T: Real>(m: &DMatrix<T>, name: &'static str) -> Result<DMatrix<T>> {
    let n = check_square(m, name)?;
    let inv = m.clone().try_inverse().ok_or(Error::SingularBlock(name))?;
    let resid = max_abs(&(m * &inv - DMatrix::identity(n, n)));
    if !resid.is_finite() || resid > T::TAU_LIN.sqrt() {
        return Err(Error::SingularBlock(name));
    }
    Ok(inv)
}

/// Partitioned inverse through Schur complements.
pub fn block_inverse<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>, c: &DMatrix<T>) -> Result<BlockInverse<T>> {
    check_square(a, "A")?;
    check_square(b, "B")?;
    if c.nrows() != a.nrows() || c.ncols() != b.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "off-diagonal block is {}x{}, expected {}x{}",
            c.nrows(),
            c.ncols(),
            a.nrows(),
            b.nrows()
        )));
    }
    let a_inv = checked_inverse(a, "A")?;
    let b_inv = checked_inverse(b, "B")?;
    let ct = c.transpose();
    let top_left = checked_inverse(&(a - c * &b_inv * &ct), "A - C B^-1 C^T")?;
    let bottom_right = checked_inverse(&(b - &ct * &a_inv * c), "B - C^T A^-1 C")?;
    // (CᵀA⁻¹C − B)⁻¹ = −(B − CᵀA⁻¹C)⁻¹
    let neg_schur = -&bottom_right;
    let top_right = &a_inv * c * &neg_schur;
    let bottom_left = &neg_schur * &ct * &a_inv;
    Ok(BlockInverse { top_left, top_right, bottom_left, bottom_right })
}

/// Moore–Penrose inverse of a symmetric matrix (inverse on the range).
///
/// Eigenvalues below `TAU_RANK` relative to the largest are treated as zero.
pub fn pseudo_inverse<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    let sym = (m + m.transpose()) * T::lit(0.5);
    let eig = sym.symmetric_eigen();
    let scale = eig.eigenvalues.iter().fold(T::zero(), |acc, e| acc.max(e.abs()));
    let cut = T::TAU_RANK * scale;
    let inv_diag = eig.eigenvalues.map(|e| if e.abs() > cut && e != T::zero() { T::one() / e } else { T::zero() });
    &eig.eigenvectors * DMatrix::from_diagonal(&inv_diag) * eig.eigenvectors.transpose()
}

/// Square root `R` (with `R² = M`) of a diagonalizable matrix whose spectrum
/// is real and non-negative.
///
/// The eigenvalues are clustered, each eigenspace is recovered as the
/// numerical null space of `M − μ̄I`, and `R = V diag(√μ̄) V⁻¹`. Eigenvalues
/// within `TAU_PSD` of zero (relative to the spectrum scale) are clamped to
/// zero, which makes the pure-state input `M = 0` map to exactly `0`.
pub fn psd_sqrt_of_similar<T: Real>(m: &DMatrix<T>) -> Result<DMatrix<T>> {
    let dim = check_square(m, "matrix")?;
    if dim == 0 {
        return Ok(m.clone());
    }
    let eigs = Schur::try_new(m.clone(), T::default_epsilon(), 1000 * dim)
        .ok_or_else(|| Error::NumericalFailure("Schur iteration did not converge".into()))?
        .complex_eigenvalues();
    let scale = eigs.iter().fold(T::one(), |acc, z| acc.max((z.re * z.re + z.im * z.im).sqrt()));
    let max_imag = eigs.iter().fold(T::zero(), |acc, z| acc.max(z.im.abs()));
    if max_imag > T::TAU_PSD * scale {
        return Err(Error::ComplexSpectrum(max_imag.as_f64()));
    }
    let mut reals: Vec<T> = eigs.iter().map(|z| z.re).collect();
    let min = reals.iter().copied().fold(T::max_value().unwrap(), |a, b| a.min(b));
    if min < -T::TAU_PSD * scale {
        return Err(Error::NotPositiveDefinite(min.as_f64()));
    }
    reals.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));

    let cluster_tol = T::default_epsilon().sqrt() * T::lit(100.0) * scale;
    let mut clusters: Vec<Vec<T>> = Vec::new();
    for e in reals {
        match clusters.last_mut() {
            Some(cl) if (e - *cl.last().unwrap()).abs() <= cluster_tol => cl.push(e),
            _ => clusters.push(vec![e]),
        }
    }

    let mut columns: Vec<DVector<T>> = Vec::with_capacity(dim);
    let mut roots: Vec<T> = Vec::with_capacity(dim);
    for cl in &clusters {
        let mean = cl.iter().copied().fold(T::zero(), |a, b| a + b) / T::from_usize(cl.len()).unwrap();
        let mean = if mean.abs() <= T::TAU_PSD * scale { T::zero() } else { mean.max(T::zero()) };
        let shifted = m - DMatrix::identity(dim, dim) * mean;
        let svd = shifted.svd(false, true);
        let v_t = svd.v_t.ok_or_else(|| Error::NumericalFailure("SVD without right vectors".into()))?;
        let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
        idx.sort_by(|&a, &b| {
            svd.singular_values[a]
                .partial_cmp(&svd.singular_values[b])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        for &i in idx.iter().take(cl.len()) {
            columns.push(v_t.row(i).transpose());
            roots.push(mean.sqrt());
        }
    }

    let v = DMatrix::from_columns(&columns);
    let v_inv = v
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::NumericalFailure("matrix is not diagonalizable".into()))?;
    let root = &v * DMatrix::from_diagonal(&DVector::from_vec(roots)) * v_inv;
    let resid = max_abs(&(&root * &root - m));
    if !resid.is_finite() || resid > T::TAU_LIN.sqrt() * scale {
        return Err(Error::NumericalFailure(format!(
            "square root residual {:e} (matrix may not be diagonalizable)",
            resid.as_f64()
        )));
    }
    Ok(root)
}
