//! Special functions and Hermitian linear algebra.
//!
//! Everything here is a pure function of its arguments. Matrices are dense
//! `nalgebra` complex matrices wrapped in [`HermitianMatrix`], which checks
//! conjugate symmetry once at construction.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::{Error, Result};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Largest tolerated `|m[j][k] - conj(m[k][j])|` for a user-supplied matrix.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Eigenvalues above `-PSD_TOL` (scaled by the spectral radius when it
/// exceeds one) count as zero and are clamped.
pub const PSD_TOL: f64 = 1e-10;

/// Exponential integral `E1(x) = ∫ₓ^∞ e^{-t}/t dt` for `x > 0`.
pub fn exp_integral_e1(x: f64) -> Result<f64> {
    check_e1_domain(x)?;
    if x <= 1.0 {
        Ok(e1_series(x))
    } else {
        Ok(e1_scaled_continued_fraction(x) * (-x).exp())
    }
}

/// `e^x · E1(x)` for `x > 0`, evaluated without forming `e^x` for large `x`.
///
/// This is the combination that shows up in every ergodic-rate closed form,
/// where the argument is an inverse SNR and may be arbitrarily large.
pub fn scaled_exp_integral_e1(x: f64) -> Result<f64> {
    check_e1_domain(x)?;
    if x <= 1.0 {
        Ok(x.exp() * e1_series(x))
    } else {
        Ok(e1_scaled_continued_fraction(x))
    }
}

fn check_e1_domain(x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else if x == f64::INFINITY {
        Err(Error::Domain(format!("E1 argument must be finite, got {x}")))
    } else {
        Err(Error::Domain(format!("E1 requires x > 0, got {x}")))
    }
}

// E1(x) = -γ - ln x - Σ_{k≥1} (-x)^k / (k·k!)
fn e1_series(x: f64) -> f64 {
    let mut sum = 0.0;
    let mut power_over_fact = 1.0;
    for k in 1..200 {
        let kf = k as f64;
        power_over_fact *= -x / kf;
        let term = power_over_fact / kf;
        sum += term;
        if term.abs() <= 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    -EULER_GAMMA - x.ln() - sum
}

// Modified Lentz evaluation of e^x E1(x) = 1/(x+1- 1/(x+3- 4/(x+5- ...))).
fn e1_scaled_continued_fraction(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..1000 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let delta = c * d;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// Dense complex Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    inner: DMatrix<Complex64>,
}

impl HermitianMatrix {
    /// Wraps `m` after checking it is square and Hermitian within
    /// [`HERMITIAN_TOL`]. The stored matrix is the exact Hermitian part.
    pub fn new(m: DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::Invalid("empty matrix".into()));
        }
        let n = m.nrows();
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for k in j..n {
                let d = (m[(j, k)] - m[(k, j)].conj()).norm();
                if !d.is_finite() {
                    return Err(Error::Invalid("matrix has non-finite entries".into()));
                }
                worst = worst.max(d);
            }
        }
        if worst > HERMITIAN_TOL {
            return Err(Error::NotHermitian(worst));
        }
        Ok(Self::symmetrized(m))
    }

    /// Hermitian part `(m + m^H)/2`, used for products that are Hermitian in
    /// exact arithmetic.
    pub(crate) fn symmetrized(m: DMatrix<Complex64>) -> Self {
        let sym = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
        Self { inner: sym }
    }

    pub fn from_real(n: usize, entries: impl Fn(usize, usize) -> f64) -> Result<Self> {
        Self::new(DMatrix::from_fn(n, n, |j, k| Complex64::new(entries(j, k), 0.0)))
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        Self::from_real(n, |j, k| if j == k { diag[j] } else { 0.0 })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            inner: DMatrix::identity(n, n),
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            inner: DMatrix::zeros(n, n),
        }
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<Complex64> {
        &self.inner
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.inner
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|j| self.inner[(j, j)].re).sum()
    }

    /// `v^H M v`, real for Hermitian `M`.
    pub fn quadratic_form(&self, v: &DVector<Complex64>) -> f64 {
        let mv = &self.inner * v;
        v.dotc(&mv).re
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            inner: &self.inner * Complex64::new(c, 0.0),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_same_dim(self, other)?;
        Ok(Self {
            inner: &self.inner + &other.inner,
        })
    }

    /// `S M S` for Hermitian `S`, which is again Hermitian.
    pub fn congruence(&self, s: &Self) -> Result<Self> {
        check_same_dim(self, s)?;
        Ok(Self::symmetrized(&s.inner * &self.inner * &s.inner))
    }

    /// Frobenius norm of `self - other`.
    pub fn frobenius_distance(&self, other: &Self) -> f64 {
        (&self.inner - &other.inner).norm()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner.norm()
    }
}

pub(crate) fn check_same_dim(a: &HermitianMatrix, b: &HermitianMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(())
}

/// Eigenvalues in ascending order with matching unitary eigenvectors (columns).
///
/// Each eigenvector has its largest-magnitude entry made real and positive,
/// so the decomposition is reproducible for matrices with distinct spectra.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<Complex64>,
}

impl EigenSystem {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvector(&self, j: usize) -> DVector<Complex64> {
        self.eigenvectors.column(j).into_owned()
    }

    /// `U f(Λ) U^H`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> HermitianMatrix {
        let n = self.dim();
        let scaled = DMatrix::from_fn(n, n, |j, k| self.eigenvectors[(j, k)] * f(self.eigenvalues[k]));
        HermitianMatrix::symmetrized(scaled * self.eigenvectors.adjoint())
    }

    pub fn reconstruct(&self) -> HermitianMatrix {
        self.reconstruct_with(|l| l)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues[self.dim() - 1]
    }
}

/// Hermitian eigendecomposition.
pub fn eigh(m: &HermitianMatrix) -> EigenSystem {
    let n = m.dim();
    let eig = SymmetricEigen::new(m.as_matrix().clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let eigenvalues: Vec<f64> = order.iter().map(|&j| eig.eigenvalues[j]).collect();
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = canonical_phase(eig.eigenvectors.column(src).into_owned());
        eigenvectors.set_column(dst, &col);
    }
    EigenSystem {
        eigenvalues,
        eigenvectors,
    }
}

/// Rotates `v` so its largest-magnitude entry (first one on ties) is real
/// and positive.
pub fn canonical_phase(v: DVector<Complex64>) -> DVector<Complex64> {
    let mut pivot = 0;
    let mut best = -1.0;
    for (j, z) in v.iter().enumerate() {
        let mag = z.norm();
        if mag > best * (1.0 + 1e-12) {
            best = mag;
            pivot = j;
        }
    }
    if best <= 0.0 {
        return v;
    }
    let phase = v[pivot].conj() / best;
    v * phase
}

fn psd_threshold(eigs: &EigenSystem) -> f64 {
    let radius = eigs.eigenvalues.iter().fold(0.0_f64, |acc, l| acc.max(l.abs()));
    PSD_TOL * radius.max(1.0)
}

fn check_psd(eigs: &EigenSystem) -> Result<()> {
    let min = eigs.min_eigenvalue();
    if min < -psd_threshold(eigs) {
        return Err(Error::NotPsd(min));
    }
    Ok(())
}

/// Eigendecomposition of a PSD matrix with small negative eigenvalues
/// clamped to zero.
pub fn eigh_psd(m: &HermitianMatrix) -> Result<EigenSystem> {
    let mut eigs = eigh(m);
    check_psd(&eigs)?;
    for l in &mut eigs.eigenvalues {
        *l = l.max(0.0);
    }
    Ok(eigs)
}

/// Principal square root of a PSD matrix.
pub fn psd_sqrt(m: &HermitianMatrix) -> Result<HermitianMatrix> {
    Ok(eigh_psd(m)?.reconstruct_with(f64::sqrt))
}

/// `(m + ridge·I)^{-1/2}` for PSD `m`, evaluated on the eigenvalues.
pub fn psd_inv_sqrt(m: &HermitianMatrix, ridge: f64) -> Result<HermitianMatrix> {
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::Invalid(format!("ridge must be finite and >= 0, got {ridge}")));
    }
    let eigs = eigh_psd(m)?;
    if eigs.eigenvalues.iter().any(|&l| l + ridge <= 0.0) {
        return Err(Error::Singular);
    }
    Ok(eigs.reconstruct_with(|l| 1.0 / (l + ridge).sqrt()))
}

/// Ridge that keeps [`psd_inv_sqrt`] well conditioned: `1e-9·trace/n` when
/// the smallest eigenvalue is below `1e-12` of the largest, else zero.
pub fn default_ridge(m: &HermitianMatrix) -> f64 {
    let eigs = eigh(m);
    let max = eigs.max_eigenvalue();
    if eigs.min_eigenvalue() < 1e-12 * max {
        1e-9 * m.trace() / m.dim() as f64
    } else {
        0.0
    }
}
