//! Closed-form ergodic rates and the per-receiver lower bounds.
//!
//! Three expectations over a CSCG vector `h ~ CN(0, R)` are available in
//! closed form:
//!
//! - [`ergodic_rate_norm`]: `E[log2(1 + g·‖h‖²)]` from the eigenvalues of `R`
//!   (hypoexponential mixture, requires distinct eigenvalues);
//! - [`ergodic_rate_projection`]: `E[log2(1 + g·|h^H w|²)]` for a fixed unit
//!   `w`, which only depends on `w^H R w`;
//! - [`quadratic_ratio_expectation`]: `E[x^H B x / x^H A x]` for `x ~ CN(0, I)`,
//!   obtained by differentiating `E[ln(x^H A x)]` with respect to the
//!   eigenvalues of `A`.
//!
//! [`bound_rate`] combines them: the expectation over the interfering link
//! is moved inside `log2(1 + 1/x)` (a convex function), which replaces the
//! instantaneous interference by its mean and yields a lower bound on the
//! ergodic rate of either receiver.

use std::f64::consts::LN_2;
use std::fmt;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::channel::{CovarianceSet, Side};
use crate::mc::CompensatedSum;
use crate::numerics::{check_same_dim, eigh, eigh_psd, scaled_exp_integral_e1, HermitianMatrix, EULER_GAMMA};
use crate::{Error, Result};

/// Minimum pairwise relative gap for eigenvalues to count as distinct.
pub const DISTINCT_REL_TOL: f64 = 1e-9;

/// Below this value of `g·λ` a rate term is taken as exactly zero.
const NEGLIGIBLE_SNR: f64 = 1e-12;

const UNIT_NORM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BeamformerKind {
    /// Matched filter on the instantaneous direct channel.
    Mf,
    /// Statistical zero-forcing, built from covariances only.
    Szf,
}

impl BeamformerKind {
    pub const ALL: [BeamformerKind; 2] = [BeamformerKind::Mf, BeamformerKind::Szf];

    pub fn as_str(self) -> &'static str {
        match self {
            BeamformerKind::Mf => "MF",
            BeamformerKind::Szf => "SZF",
        }
    }
}

impl fmt::Display for BeamformerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ergodic rate (or lower bound on it) at one receiver, in bits/s/Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateBound {
    pub value: f64,
    pub receiver: Side,
    /// Set when the interference expectation was moved inside the logarithm.
    pub is_lower_bound: bool,
}

/// How [`ergodic_rate_norm_with`] treats coincident eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Degeneracy {
    /// Fail with [`Error::Degenerate`].
    #[default]
    Reject,
    /// Spread the sorted eigenvalues by multiples of `1e-7·trace/n` first.
    /// Accurate to roughly `1e-16·(1e7)^(k-1)` for a k-fold eigenvalue, so
    /// only usable for double eigenvalues.
    Jitter,
}

/// `(1/ln 2)·e^{1/x}·E1(1/x)`: the ergodic rate `E[log2(1 + x·|z|²)]` of a
/// single exponential branch with mean SNR `x`.
pub fn single_branch_rate(x: f64) -> f64 {
    if !(x > NEGLIGIBLE_SNR) {
        return 0.0;
    }
    scaled_exp_integral_e1(1.0 / x).expect("positive finite argument") / LN_2
}

fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

/// Fails unless every pair of eigenvalues differs by at least
/// [`DISTINCT_REL_TOL`] relative to the larger one.
pub fn check_distinct(eigenvalues: &[f64]) -> Result<()> {
    let mut sorted = eigenvalues.to_vec();
    sorted.sort_by(f64::total_cmp);
    for w in sorted.windows(2) {
        let gap = relative_gap(w[0], w[1]);
        if !(gap >= DISTINCT_REL_TOL) {
            return Err(Error::Degenerate { a: w[0], b: w[1], gap });
        }
    }
    Ok(())
}

/// Sorted eigenvalues with the `k`-th shifted by `k·1e-7·trace/n`.
pub fn jitter_eigenvalues(eigenvalues: &[f64]) -> Vec<f64> {
    let n = eigenvalues.len() as f64;
    let step = 1e-7 * eigenvalues.iter().sum::<f64>() / n;
    let mut sorted = eigenvalues.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.iter().enumerate().map(|(k, l)| l + k as f64 * step).collect()
}

/// `E[log2(1 + g·‖h‖²)]` for `h ~ CN(0, R)` where `R` has the given
/// (strictly positive, pairwise distinct) eigenvalues.
pub fn ergodic_rate_norm(gamma_bar: f64, eigenvalues: &[f64]) -> Result<f64> {
    ergodic_rate_norm_with(gamma_bar, eigenvalues, Degeneracy::Reject)
}

pub fn ergodic_rate_norm_with(gamma_bar: f64, eigenvalues: &[f64], degeneracy: Degeneracy) -> Result<f64> {
    if !(gamma_bar > 0.0 && gamma_bar.is_finite()) {
        return Err(Error::Domain(format!("SNR scale must be positive, got {gamma_bar}")));
    }
    if eigenvalues.is_empty() {
        return Err(Error::Invalid("no eigenvalues".into()));
    }
    if let Some(l) = eigenvalues.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
        return Err(Error::Domain(format!("eigenvalues must be positive, got {l}")));
    }
    // Fixed evaluation order: the alternating sum cancels strongly for
    // clustered eigenvalues, and sorting makes the result exactly invariant
    // under permutations of the input.
    let eigs = match (check_distinct(eigenvalues), degeneracy) {
        (Ok(()), _) => {
            let mut sorted = eigenvalues.to_vec();
            sorted.sort_by(f64::total_cmp);
            sorted
        }
        (Err(_), Degeneracy::Jitter) => {
            let jittered = jitter_eigenvalues(eigenvalues);
            check_distinct(&jittered)?;
            jittered
        }
        (Err(e), Degeneracy::Reject) => return Err(e),
    };

    // Weight of branch j is prod_{m != j} λ_j / (λ_j - λ_m); the products are
    // accumulated as log-magnitude plus sign.
    let mut total = CompensatedSum::default();
    for (j, &lj) in eigs.iter().enumerate() {
        let branch = single_branch_rate(gamma_bar * lj);
        if branch == 0.0 {
            continue;
        }
        let mut log_mag = branch.ln();
        let mut negative = false;
        for (m, &lm) in eigs.iter().enumerate() {
            if m == j {
                continue;
            }
            let diff = lj - lm;
            log_mag += lj.ln() - diff.abs().ln();
            negative ^= diff < 0.0;
        }
        let term = log_mag.exp();
        total.add(if negative { -term } else { term });
    }
    Ok(total.value().max(0.0))
}

/// `E[log2(1 + g·|h^H w|²)]` for `h ~ CN(0, R_h)` and a fixed unit vector `w`.
///
/// `|h^H w|²` is exponential with mean `w^H R_h w`, the only non-zero
/// eigenvalue of `R_h^{1/2} w w^H R_h^{1/2}`.
pub fn ergodic_rate_projection(gamma_bar: f64, r_h: &HermitianMatrix, w: &DVector<Complex64>) -> Result<f64> {
    if w.len() != r_h.dim() {
        return Err(Error::Dimension {
            expected: r_h.dim(),
            found: w.len(),
        });
    }
    check_unit(w)?;
    if !(gamma_bar >= 0.0 && gamma_bar.is_finite()) {
        return Err(Error::Domain(format!(
            "SNR scale must be non-negative, got {gamma_bar}"
        )));
    }
    let lambda = r_h.quadratic_form(w);
    if lambda <= 1e-14 {
        return Ok(0.0);
    }
    Ok(single_branch_rate(gamma_bar * lambda))
}

pub(crate) fn check_unit(w: &DVector<Complex64>) -> Result<()> {
    let norm = w.norm();
    if (norm - 1.0).abs() > UNIT_NORM_TOL {
        return Err(Error::Invalid(format!("beamformer must have unit norm, got {norm}")));
    }
    Ok(())
}

/// `E[x^H B x / x^H A x]` for `x ~ CN(0, I)`, `A` positive definite with
/// distinct eigenvalues and `B` PSD.
///
/// Only the diagonal of `B` in the eigenbasis of `A` contributes, because the
/// phases of `x` in that basis are independent and uniform.
pub fn quadratic_ratio_expectation(a: &HermitianMatrix, b: &HermitianMatrix) -> Result<f64> {
    check_same_dim(a, b)?;
    eigh_psd(b)?;
    let ea = eigh(a);
    if let Some(l) = ea.eigenvalues.iter().find(|l| !(**l > 0.0)) {
        return Err(Error::Domain(format!(
            "A must be positive definite, found eigenvalue {l}"
        )));
    }
    check_distinct(&ea.eigenvalues)?;
    let ua = &ea.eigenvectors;
    let b_rot = ua.adjoint() * b.as_matrix() * ua;
    let diag: Vec<f64> = (0..a.dim()).map(|i| b_rot[(i, i)].re).collect();
    ratio_expectation_diagonal(&ea.eigenvalues, &diag)
}

/// Weights `E[|x_i|² / Σ_j λ_j |x_j|²]` for distinct positive `λ`, equal
/// to `∂/∂λ_i E[ln Σ_j λ_j |x_j|²]`.
///
/// With `D_k = Π_{j≠k}(λ_k - λ_j)` and `L_k = ln λ_k - γ`,
/// `E[ln X] = Σ_k λ_k^{n-1} L_k / D_k`; the derivative splits into the
/// `k = i` term and the `k ≠ i` terms through `D_k`.
pub fn ratio_weights(eigs: &[f64]) -> Result<Vec<f64>> {
    let n = eigs.len();
    if n == 0 {
        return Err(Error::Invalid("no eigenvalues".into()));
    }
    if let Some(l) = eigs.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
        return Err(Error::Domain(format!("eigenvalues must be positive, got {l}")));
    }
    check_distinct(eigs)?;
    let nf = n as f64;
    let log_term: Vec<f64> = eigs.iter().map(|l| l.ln() - EULER_GAMMA).collect();
    let prod_except = |k: usize, skip: Option<usize>| -> f64 {
        (0..n)
            .filter(|&j| j != k && Some(j) != skip)
            .map(|j| eigs[k] - eigs[j])
            .product()
    };
    let denom: Vec<f64> = (0..n).map(|k| prod_except(k, None)).collect();

    let weights = (0..n)
        .map(|i| {
            let li = eigs[i];
            let own = li.powi(n as i32 - 2) * ((nf - 1.0) * log_term[i] + 1.0) / denom[i];
            let d_denom: f64 = (0..n).filter(|&r| r != i).map(|r| prod_except(i, Some(r))).sum();
            let own_denom = li.powi(n as i32 - 1) * log_term[i] * d_denom / (denom[i] * denom[i]);
            let others: f64 = (0..n)
                .filter(|&k| k != i)
                .map(|k| eigs[k].powi(n as i32 - 1) * log_term[k] * prod_except(k, Some(i)) / (denom[k] * denom[k]))
                .sum();
            own - own_denom + others
        })
        .collect();
    Ok(weights)
}

/// `Σ_i b_i · E[|x_i|² / Σ_j λ_j |x_j|²]`.
pub fn ratio_expectation_diagonal(eigs: &[f64], b_diag: &[f64]) -> Result<f64> {
    if eigs.len() != b_diag.len() {
        return Err(Error::Dimension {
            expected: eigs.len(),
            found: b_diag.len(),
        });
    }
    let w = ratio_weights(eigs)?;
    Ok(w.iter().zip(b_diag).map(|(w, b)| w * b).sum::<f64>().max(0.0))
}

/// Mean leakage `E[h^H R_cross h / ‖h‖²]` of a matched filter on
/// `h ~ CN(0, R_direct)` into a link with covariance `R_cross`.
pub fn mf_leakage_gain(r_direct: &HermitianMatrix, r_cross: &HermitianMatrix) -> Result<f64> {
    check_same_dim(r_direct, r_cross)?;
    let root = crate::numerics::psd_sqrt(r_direct)?;
    let b = r_cross.congruence(&root)?;
    quadratic_ratio_expectation(r_direct, &b)
}

fn check_powers(powers: [f64; 2]) -> Result<()> {
    if powers.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
        return Err(Error::Invalid(format!(
            "powers must be finite and >= 0, got {powers:?}"
        )));
    }
    Ok(())
}

/// Lower bound on the ergodic rate of `receiver` when TX `i` uses beamformer
/// `kinds[i]` with average power `powers[i]`.
///
/// `szf` holds the statistical ZF beamformers of both TXs and is required as
/// soon as one of the kinds is [`BeamformerKind::Szf`].
pub fn bound_rate(
    receiver: Side,
    kinds: [BeamformerKind; 2],
    powers: [f64; 2],
    cov: &CovarianceSet,
    szf: Option<&[DVector<Complex64>; 2]>,
) -> Result<RateBound> {
    check_powers(powers)?;
    let own = receiver;
    let other = receiver.other();
    let szf_vec = |tx: Side| -> Result<&DVector<Complex64>> {
        let v = szf
            .map(|pair| &pair[tx.index()])
            .ok_or_else(|| Error::Invalid("sZF beamformers required".into()))?;
        check_unit(v)?;
        Ok(v)
    };

    let p_other = powers[other.index()];
    let leakage = if p_other == 0.0 {
        0.0
    } else {
        match kinds[other.index()] {
            BeamformerKind::Mf => mf_leakage_gain(cov.direct(other), cov.link(own, other))?,
            BeamformerKind::Szf => cov.link(own, other).quadratic_form(szf_vec(other)?),
        }
    };
    let gamma = powers[own.index()] / (cov.n0 + p_other * leakage);

    let value = if gamma == 0.0 {
        0.0
    } else {
        match kinds[own.index()] {
            BeamformerKind::Mf => ergodic_rate_norm(gamma, &eigh(cov.direct(own)).eigenvalues)?,
            BeamformerKind::Szf => ergodic_rate_projection(gamma, cov.direct(own), szf_vec(own)?)?,
        }
    };
    Ok(RateBound {
        value,
        receiver,
        is_lower_bound: p_other > 0.0,
    })
}

/// Everything [`bound_rate`] needs, computed once per covariance set so that
/// bisection only re-evaluates the scalar closed forms.
#[derive(Debug, Clone)]
pub struct LinkStatistics {
    n0: f64,
    direct_eigs: [Vec<f64>; 2],
    /// Mean MF leakage of TX i into the other receiver.
    mf_leakage: [Option<f64>; 2],
    /// `u^H R_cross u` for the sZF beam of TX i.
    szf_leakage: [f64; 2],
    /// `u^H R_direct u` for the sZF beam of TX i.
    szf_gain: [f64; 2],
}

impl LinkStatistics {
    /// MF quantities that cannot be evaluated (degenerate direct covariance)
    /// are left empty and surface as errors only when an MF strategy asks
    /// for them.
    pub fn new(cov: &CovarianceSet, szf: &[DVector<Complex64>; 2]) -> Result<Self> {
        let mut direct_eigs: [Vec<f64>; 2] = Default::default();
        let mut mf_leakage = [None; 2];
        let mut szf_leakage = [0.0; 2];
        let mut szf_gain = [0.0; 2];
        for tx in Side::BOTH {
            let i = tx.index();
            check_unit(&szf[i])?;
            direct_eigs[i] = eigh(cov.direct(tx)).eigenvalues;
            mf_leakage[i] = mf_leakage_gain(cov.direct(tx), cov.cross_out(tx)).ok();
            szf_leakage[i] = cov.cross_out(tx).quadratic_form(&szf[i]);
            szf_gain[i] = cov.direct(tx).quadratic_form(&szf[i]);
        }
        Ok(Self {
            n0: cov.n0,
            direct_eigs,
            mf_leakage,
            szf_leakage,
            szf_gain,
        })
    }

    /// Mean interference gain (per unit power) that TX `tx` with beamformer
    /// `kind` causes at the other receiver.
    pub fn leakage(&self, tx: Side, kind: BeamformerKind) -> Result<f64> {
        match kind {
            BeamformerKind::Mf => self.mf_leakage[tx.index()].ok_or_else(|| {
                let e = &self.direct_eigs[tx.index()];
                check_distinct(e)
                    .err()
                    .unwrap_or_else(|| Error::Domain("direct covariance is not positive definite".into()))
            }),
            BeamformerKind::Szf => Ok(self.szf_leakage[tx.index()]),
        }
    }

    pub fn direct_eigenvalues(&self, tx: Side) -> &[f64] {
        &self.direct_eigs[tx.index()]
    }

    pub fn bound(&self, receiver: Side, kinds: [BeamformerKind; 2], powers: [f64; 2]) -> Result<RateBound> {
        check_powers(powers)?;
        let own = receiver;
        let other = receiver.other();
        let p_other = powers[other.index()];
        let leakage = if p_other == 0.0 {
            0.0
        } else {
            self.leakage(other, kinds[other.index()])?
        };
        let gamma = powers[own.index()] / (self.n0 + p_other * leakage);
        let value = if gamma == 0.0 {
            0.0
        } else {
            match kinds[own.index()] {
                BeamformerKind::Mf => ergodic_rate_norm(gamma, &self.direct_eigs[own.index()])?,
                BeamformerKind::Szf => {
                    let g = self.szf_gain[own.index()];
                    if g <= 1e-14 {
                        0.0
                    } else {
                        single_branch_rate(gamma * g)
                    }
                }
            }
        };
        Ok(RateBound {
            value,
            receiver,
            is_lower_bound: p_other > 0.0,
        })
    }
}
