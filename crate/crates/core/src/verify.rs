//! Monte Carlo cross-checks of the closed-form expectations on random
//! inputs. Used by the `verify-lemmas` command and the test suites.

use std::f64::consts::{FRAC_1_SQRT_2, LN_2};
use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::mc::{estimate, McEstimate};
use crate::numerics::{psd_sqrt, HermitianMatrix};
use crate::rate::{ergodic_rate_norm, ergodic_rate_projection, quadratic_ratio_expectation};
use crate::{Error, Result};

/// Largest dimension the fast samplers handle.
pub const MAX_DIM: usize = 8;

/// Haar-distributed unitary from the QR factorization of a complex Gaussian
/// matrix, with the phases of `R`'s diagonal moved into `Q`.
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<Complex64> {
    let g = DMatrix::from_fn(n, n, |_, _| cscg(rng));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// `n` eigenvalues in `[0.2, 4]` whose pairwise relative gaps exceed 5 %.
pub fn random_spectrum<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..4.0)).collect();
        v.sort_by(f64::total_cmp);
        if v.windows(2).all(|w| (w[1] - w[0]) / w[1] > 0.05) {
            return v;
        }
    }
}

/// `U diag(eigenvalues) U^H` with a Haar-random `U`.
pub fn random_psd<R: Rng + ?Sized>(eigenvalues: &[f64], rng: &mut R) -> Result<HermitianMatrix> {
    let n = eigenvalues.len();
    let u = random_unitary(n, rng);
    let d = DMatrix::from_diagonal(&DVector::from_iterator(
        n,
        eigenvalues.iter().map(|&x| Complex64::new(x, 0.0)),
    ));
    HermitianMatrix::new(&u * d * u.adjoint())
}

pub fn random_unit_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<Complex64> {
    let v = DVector::from_fn(n, |_, _| cscg(rng));
    let norm = v.norm();
    v.unscale(norm)
}

fn cscg<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
}

/// Row-major copy of a Hermitian matrix for allocation-free quadratic forms.
struct Dense {
    n: usize,
    data: Vec<Complex64>,
}

impl Dense {
    fn new(m: &HermitianMatrix) -> Result<Self> {
        let n = m.dim();
        if n == 0 || n > MAX_DIM {
            return Err(Error::Invalid(format!("dimension {n} outside 1..={MAX_DIM}")));
        }
        let mm = m.as_matrix();
        Ok(Self {
            n,
            data: (0..n * n).map(|k| mm[(k / n, k % n)]).collect(),
        })
    }

    /// `x^H M x`, using only the upper triangle.
    fn quad(&self, x: &[Complex64]) -> f64 {
        let n = self.n;
        let mut diag = 0.0;
        let mut off = Complex64::new(0.0, 0.0);
        for i in 0..n {
            let row = &self.data[i * n..(i + 1) * n];
            diag += row[i].re * x[i].norm_sqr();
            let mut acc = Complex64::new(0.0, 0.0);
            for j in i + 1..n {
                acc += row[j] * x[j];
            }
            off += x[i].conj() * acc;
        }
        diag + 2.0 * off.re
    }
}

fn fill_cscg(rng: &mut ChaCha8Rng, x: &mut [Complex64]) {
    for v in x.iter_mut() {
        *v = cscg(rng);
    }
}

/// Estimate of `E[log2(1 + gamma ‖h‖²)]` with `h ~ CN(0, R)`, computed as
/// `‖h‖² = z^H R z` for white `z`.
pub fn mc_rate_norm(
    gamma: f64,
    r: &HermitianMatrix,
    samples: usize,
    seed: u64,
    stream: u64,
    workers: usize,
) -> Result<McEstimate> {
    let dense = Dense::new(r)?;
    let n = dense.n;
    let est = estimate(samples, 1, seed, stream, workers, |rng, out| {
        let mut z = [Complex64::new(0.0, 0.0); MAX_DIM];
        fill_cscg(rng, &mut z[..n]);
        out[0] = (gamma * dense.quad(&z[..n])).ln_1p() / LN_2;
    })?;
    Ok(est[0])
}

/// Estimate of `E[log2(1 + gamma |h^H w|²)]` with `h = R^{1/2} z`.
pub fn mc_rate_projection(
    gamma: f64,
    r: &HermitianMatrix,
    w: &DVector<Complex64>,
    samples: usize,
    seed: u64,
    stream: u64,
    workers: usize,
) -> Result<McEstimate> {
    let root = psd_sqrt(r)?;
    let n = root.dim();
    if n > MAX_DIM || w.len() != n {
        return Err(Error::Dimension {
            expected: n,
            found: w.len(),
        });
    }
    // h^H w = z^H (R^{1/2} w)
    let v: Vec<Complex64> = (root.as_matrix() * w).iter().copied().collect();
    let est = estimate(samples, 1, seed, stream, workers, |rng, out| {
        let mut acc = Complex64::new(0.0, 0.0);
        for vi in &v {
            acc += cscg(rng).conj() * vi;
        }
        out[0] = (gamma * acc.norm_sqr()).ln_1p() / LN_2;
    })?;
    Ok(est[0])
}

/// Estimate of `E[x^H B x / x^H A x]` for white CSCG `x`.
pub fn mc_ratio(
    a: &HermitianMatrix,
    b: &HermitianMatrix,
    samples: usize,
    seed: u64,
    stream: u64,
    workers: usize,
) -> Result<McEstimate> {
    let da = Dense::new(a)?;
    let db = Dense::new(b)?;
    if da.n != db.n {
        return Err(Error::Dimension {
            expected: da.n,
            found: db.n,
        });
    }
    let n = da.n;
    let est = estimate(samples, 1, seed, stream, workers, |rng, out| {
        let mut x = [Complex64::new(0.0, 0.0); MAX_DIM];
        fill_cscg(rng, &mut x[..n]);
        out[0] = db.quad(&x[..n]) / da.quad(&x[..n]);
    })?;
    Ok(est[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lemma {
    /// Rate with the full-norm gain.
    RateNorm,
    /// Rate with a fixed-beam projection gain.
    RateProjection,
    /// Expectation of a ratio of quadratic forms.
    Ratio,
}

impl fmt::Display for Lemma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Lemma::RateNorm => "rate-norm",
            Lemma::RateProjection => "rate-projection",
            Lemma::Ratio => "ratio",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaCheck {
    pub lemma: Lemma,
    pub case: usize,
    pub dim: usize,
    pub closed_form: f64,
    pub estimate: McEstimate,
}

impl LemmaCheck {
    pub fn z_score(&self) -> f64 {
        self.estimate.z_score(self.closed_form)
    }

    pub fn passed(&self, max_z: f64) -> bool {
        self.z_score() <= max_z
    }
}

impl fmt::Display for LemmaCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<16} case {:>2} n={} closed={:.6} mc={:.6} se={:.2e} z={:.2}",
            self.lemma,
            self.case,
            self.dim,
            self.closed_form,
            self.estimate.mean,
            self.estimate.std_error,
            self.z_score()
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    /// Random inputs per lemma; dimensions cycle through 2..=6.
    pub cases: usize,
    pub rate_samples: usize,
    pub ratio_samples: usize,
    pub seed: u64,
    pub workers: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            cases: 20,
            rate_samples: 1_000_000,
            ratio_samples: 10_000_000,
            seed: 2024,
            workers: 0,
        }
    }
}

/// Evaluates every closed form against its sampler on `cases` random inputs
/// per lemma. Inputs depend only on `seed`.
pub fn run_lemma_suite(cfg: &SuiteConfig) -> Result<Vec<LemmaCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(3 * cfg.cases);
    for case in 0..cfg.cases {
        let dim = 2 + case % 5;
        let stream = case as u64;

        let r = random_psd(&random_spectrum(dim, &mut rng), &mut rng)?;
        let gamma = rng.random_range(0.5..10.0);
        let eigs = crate::numerics::eigh(&r).eigenvalues;
        out.push(LemmaCheck {
            lemma: Lemma::RateNorm,
            case,
            dim,
            closed_form: ergodic_rate_norm(gamma, &eigs)?,
            estimate: mc_rate_norm(gamma, &r, cfg.rate_samples, cfg.seed, stream, cfg.workers)?,
        });

        let r = random_psd(&random_spectrum(dim, &mut rng), &mut rng)?;
        let w = random_unit_vector(dim, &mut rng);
        let gamma = rng.random_range(0.5..10.0);
        out.push(LemmaCheck {
            lemma: Lemma::RateProjection,
            case,
            dim,
            closed_form: ergodic_rate_projection(gamma, &r, &w)?,
            estimate: mc_rate_projection(gamma, &r, &w, cfg.rate_samples, cfg.seed, 1000 + stream, cfg.workers)?,
        });

        let a = random_psd(&random_spectrum(dim, &mut rng), &mut rng)?;
        let b_eigs: Vec<f64> = (0..dim).map(|_| rng.random_range(0.0..3.0)).collect();
        let b = random_psd(&b_eigs, &mut rng)?;
        out.push(LemmaCheck {
            lemma: Lemma::Ratio,
            case,
            dim,
            closed_form: quadratic_ratio_expectation(&a, &b)?,
            estimate: mc_ratio(&a, &b, cfg.ratio_samples, cfg.seed, 2000 + stream, cfg.workers)?,
        });
    }
    Ok(out)
}
