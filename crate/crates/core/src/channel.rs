//! Scenario configuration, the exponential correlation model and correlated
//! Rayleigh channel sampling.
//!
//! Link `(i, j)` is the channel from TX `j` to RX `i`; it has `m_j` entries and
//! covariance `r[i][j]`. Index 0 is the incumbent pair, index 1 the licensee.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::numerics::{eigh_psd, HermitianMatrix};
use crate::{Error, Result};

/// One of the two TX-RX pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    /// Spectrum owner, TX 1 / RX 1.
    Incumbent,
    /// Spectrum sharer, TX 2 / RX 2.
    Licensee,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Incumbent, Side::Licensee];

    pub fn index(self) -> usize {
        match self {
            Side::Incumbent => 0,
            Side::Licensee => 1,
        }
    }

    pub fn other(self) -> Side {
        match self {
            Side::Incumbent => Side::Licensee,
            Side::Licensee => Side::Incumbent,
        }
    }

    /// 1-based label used in tables and reports.
    pub fn number(self) -> usize {
        self.index() + 1
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// Static parameters of one operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    /// Antennas at TX 1.
    pub m1: usize,
    /// Antennas at TX 2.
    pub m2: usize,
    /// Maximum average power of TX 1, linear.
    pub p1_max: f64,
    /// Maximum average power of TX 2, linear.
    pub p2_max: f64,
    /// Noise power, linear.
    pub n0: f64,
    /// Incumbent average-rate threshold in bits/s/Hz.
    pub tau1: f64,
    /// Antenna correlation factor of the exponential model.
    pub rho: f64,
    /// Pathloss `beta[i][j]` of the link from TX `j` to RX `i`.
    pub beta: [[f64; 2]; 2],
    pub seed: u64,
    pub n_samples: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            m1: 4,
            m2: 4,
            p1_max: 10.0,
            p2_max: 10.0,
            n0: 1.0,
            tau1: 1.0,
            rho: 0.5,
            beta: [[1.0, 0.3], [0.3, 1.0]],
            seed: 1,
            n_samples: 20_000,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.m1 == 0 || self.m2 == 0 {
            return bad(format!(
                "antenna counts must be positive, got m1={} m2={}",
                self.m1, self.m2
            ));
        }
        for (name, p) in [("p1_max", self.p1_max), ("p2_max", self.p2_max), ("n0", self.n0)] {
            if !(p > 0.0 && p.is_finite()) {
                return bad(format!("{name} must be positive and finite, got {p}"));
            }
        }
        if !(self.tau1 > 0.0 && self.tau1.is_finite()) {
            return bad(format!("tau1 must be positive, got {}", self.tau1));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return bad(format!("rho must lie in [0, 1), got {}", self.rho));
        }
        if self.beta.iter().flatten().any(|b| !(*b > 0.0 && b.is_finite())) {
            return bad(format!("all beta entries must be positive, got {:?}", self.beta));
        }
        Ok(())
    }

    pub fn antennas(&self, tx: Side) -> usize {
        match tx {
            Side::Incumbent => self.m1,
            Side::Licensee => self.m2,
        }
    }

    pub fn p_max(&self, tx: Side) -> f64 {
        match tx {
            Side::Incumbent => self.p1_max,
            Side::Licensee => self.p2_max,
        }
    }

    /// Sets both power budgets to `n0 · 10^(snr_db/10)`.
    pub fn with_snr_db(mut self, snr_db: f64) -> Self {
        let p = self.n0 * 10f64.powf(snr_db / 10.0);
        self.p1_max = p;
        self.p2_max = p;
        self
    }

    pub fn with_tau1(mut self, tau1: f64) -> Self {
        self.tau1 = tau1;
        self
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }
}

/// Covariances of the four links plus the noise power.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSet {
    /// `r[i][j]`: covariance of the link from TX `j` to RX `i`.
    pub r: [[HermitianMatrix; 2]; 2],
    pub n0: f64,
}

impl CovarianceSet {
    /// Checks dimensions (`r[i][j]` is `m_j × m_j`), PSD-ness and `n0 > 0`.
    pub fn new(r: [[HermitianMatrix; 2]; 2], n0: f64) -> Result<Self> {
        if !(n0 > 0.0 && n0.is_finite()) {
            return Err(Error::Invalid(format!("noise power must be positive, got {n0}")));
        }
        for (a, b) in r[0].iter().zip(&r[1]) {
            if a.dim() != b.dim() {
                return Err(Error::Dimension {
                    expected: a.dim(),
                    found: b.dim(),
                });
            }
        }
        for m in r.iter().flatten() {
            eigh_psd(m)?;
        }
        Ok(Self { r, n0 })
    }

    /// Covariance of the link from `tx` to `rx`.
    pub fn link(&self, rx: Side, tx: Side) -> &HermitianMatrix {
        &self.r[rx.index()][tx.index()]
    }

    pub fn direct(&self, side: Side) -> &HermitianMatrix {
        self.link(side, side)
    }

    /// Covariance of the link from TX `tx` to the other pair's receiver.
    pub fn cross_out(&self, tx: Side) -> &HermitianMatrix {
        self.link(tx.other(), tx)
    }

    pub fn antennas(&self, tx: Side) -> usize {
        self.r[tx.index()][tx.index()].dim()
    }

    /// The same system with the pair labels exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            r: [
                [self.r[1][1].clone(), self.r[1][0].clone()],
                [self.r[0][1].clone(), self.r[0][0].clone()],
            ],
            n0: self.n0,
        }
    }
}

/// Exponential correlation model: `[R_ij]_{m,n} = beta_ij · rho^|m-n|`.
pub fn build_covariances(cfg: &ScenarioConfig) -> Result<CovarianceSet> {
    cfg.validate()?;
    let model = |beta: f64, m: usize| HermitianMatrix::from_real(m, |a, b| beta * cfg.rho.powi(a.abs_diff(b) as i32));
    let mut rows = Vec::with_capacity(2);
    for rx in Side::BOTH {
        let mut row = Vec::with_capacity(2);
        for tx in Side::BOTH {
            row.push(model(cfg.beta[rx.index()][tx.index()], cfg.antennas(tx))?);
        }
        rows.push(row);
    }
    let [r0, r1]: [Vec<HermitianMatrix>; 2] = rows.try_into().expect("two rows");
    let to_pair = |v: Vec<HermitianMatrix>| -> [HermitianMatrix; 2] { v.try_into().expect("two links") };
    CovarianceSet::new([to_pair(r0), to_pair(r1)], cfg.n0)
}

/// One joint realization of the four links.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDraw {
    /// `h[i][j]`: channel from TX `j` to RX `i`.
    pub h: [[DVector<Complex64>; 2]; 2],
}

impl ChannelDraw {
    pub fn link(&self, rx: Side, tx: Side) -> &DVector<Complex64> {
        &self.h[rx.index()][tx.index()]
    }
}

/// Precomputed square roots of a [`CovarianceSet`] for repeated sampling.
#[derive(Debug, Clone)]
pub struct ChannelSampler {
    roots: [[DMatrix<Complex64>; 2]; 2],
}

impl ChannelSampler {
    pub fn new(cov: &CovarianceSet) -> Result<Self> {
        let root = |i: usize, j: usize| -> Result<DMatrix<Complex64>> {
            Ok(crate::numerics::psd_sqrt(&cov.r[i][j])?.into_matrix())
        };
        Ok(Self {
            roots: [[root(0, 0)?, root(0, 1)?], [root(1, 0)?, root(1, 1)?]],
        })
    }

    /// Draws `h_ij = R_ij^{1/2} z` with `z` standard CSCG, links independent.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ChannelDraw {
        let mut draw = |i: usize, j: usize| {
            let z = standard_cscg(self.roots[i][j].ncols(), rng);
            &self.roots[i][j] * z
        };
        let h00 = draw(0, 0);
        let h01 = draw(0, 1);
        let h10 = draw(1, 0);
        let h11 = draw(1, 1);
        ChannelDraw {
            h: [[h00, h01], [h10, h11]],
        }
    }
}

/// Single draw from `cov`; use [`ChannelSampler`] for repeated draws.
pub fn sample_channels<R: Rng + ?Sized>(cov: &CovarianceSet, rng: &mut R) -> Result<ChannelDraw> {
    Ok(ChannelSampler::new(cov)?.sample(rng))
}

/// `n` i.i.d. `CN(0, 1)` entries: real and imaginary parts each `N(0, 1/2)`.
pub fn standard_cscg<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<Complex64> {
    DVector::from_fn(n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2)
    })
}

/// Independent generator for one block of draws, keyed by
/// `(seed, stream, block)`. The key fully determines the sequence, so the
/// assignment of blocks to workers cannot change results.
pub fn substream(seed: u64, stream: u64, block: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&stream.to_le_bytes());
    key[16..24].copy_from_slice(&block.to_le_bytes());
    key[24..].copy_from_slice(b"lsa-chan");
    ChaCha8Rng::from_seed(key)
}
