//! Statistically coordinated strategy selection.
//!
//! Each TX picks MF or statistical ZF beamforming and one of the two TXs
//! transmits at full power while the other bisects its average power so that
//! the incumbent rate bound meets the threshold. The eight resulting
//! strategies are ranked by the licensee rate bound. Only covariances enter
//! the decision, so both TXs reach the same choice independently.

use std::fmt;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::channel::{CovarianceSet, ScenarioConfig, Side};
use crate::numerics::{canonical_phase, default_ridge, eigh, psd_inv_sqrt, HermitianMatrix};
use crate::rate::{ergodic_rate_norm, BeamformerKind, LinkStatistics, RateBound};
use crate::{Error, Result};

/// Bisection stops once the rate residual drops below this (bits/s/Hz).
pub const BISECTION_RATE_TOL: f64 = 1e-8;
pub const BISECTION_MAX_ITER: usize = 200;

/// Eigenvalues within this relative distance of the largest one are treated
/// as a single degenerate top eigenspace when building the sZF beam.
const TOP_CLUSTER_REL_TOL: f64 = 1e-9;

/// A unit-norm transmit direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Beamformer {
    pub vector: DVector<Complex64>,
    pub kind: BeamformerKind,
    pub owner: Side,
}

/// Matched filter `h / ‖h‖` on the instantaneous direct channel.
pub fn mf_beamformer(owner: Side, h_direct: &DVector<Complex64>) -> Result<Beamformer> {
    let norm = h_direct.norm();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::DegenerateChannel(format!(
            "direct channel of TX {owner} has norm {norm}"
        )));
    }
    Ok(Beamformer {
        vector: h_direct.unscale(norm),
        kind: BeamformerKind::Mf,
        owner,
    })
}

/// Statistical ZF: the unit `u` maximizing
/// `u^H R_cross^{-1/2} R_direct R_cross^{-1/2} u`.
///
/// When the top eigenvalue is repeated (e.g. proportional direct and cross
/// covariances) every vector of the top eigenspace is a maximizer; the one
/// with the least leakage `u^H R_cross u` is returned.
pub fn szf_beamformer(
    owner: Side,
    r_direct: &HermitianMatrix,
    r_cross_out: &HermitianMatrix,
    ridge: f64,
) -> Result<Beamformer> {
    let whiten = psd_inv_sqrt(r_cross_out, ridge)?;
    let target = r_direct.congruence(&whiten)?;
    let eig = eigh(&target);
    let n = eig.dim();
    let top = eig.max_eigenvalue();
    let cluster: Vec<usize> = (0..n)
        .filter(|&j| top - eig.eigenvalues[j] <= TOP_CLUSTER_REL_TOL * top.abs())
        .collect();

    let vector = if cluster.len() == 1 {
        eig.eigenvector(n - 1)
    } else {
        let basis = eig.eigenvectors.select_columns(&cluster);
        let projected = HermitianMatrix::symmetrized(basis.adjoint() * r_cross_out.as_matrix() * &basis);
        let inner = eigh(&projected).eigenvector(0);
        let v = basis * inner;
        let norm = v.norm();
        canonical_phase(v.unscale(norm))
    };
    Ok(Beamformer {
        vector,
        kind: BeamformerKind::Szf,
        owner,
    })
}

/// Ridge used for the cross covariance when building sZF beams. A zero
/// cross covariance gets a unit ridge; the beam is invariant to the scale.
pub fn szf_ridge(r_cross_out: &HermitianMatrix) -> f64 {
    if r_cross_out.trace() <= 0.0 {
        1.0
    } else {
        default_ridge(r_cross_out)
    }
}

/// sZF beams of both TXs.
pub fn szf_pair(cov: &CovarianceSet) -> Result<[Beamformer; 2]> {
    let make = |tx: Side| {
        let cross = cov.cross_out(tx);
        szf_beamformer(tx, cov.direct(tx), cross, szf_ridge(cross))
    };
    Ok([make(Side::Incumbent)?, make(Side::Licensee)?])
}

/// Ergodic incumbent rate with full-power MF and no licensee interference.
pub fn interference_free_rate(cfg: &ScenarioConfig, cov: &CovarianceSet) -> Result<f64> {
    let eigs = eigh(cov.direct(Side::Incumbent)).eigenvalues;
    ergodic_rate_norm(cfg.p1_max / cov.n0, &eigs)
}

/// Whether the incumbent threshold is reachable at all.
pub fn check_feasibility(cfg: &ScenarioConfig, cov: &CovarianceSet) -> Result<bool> {
    Ok(interference_free_rate(cfg, cov)? >= cfg.tau1)
}

/// Which TX transmits at its maximum average power.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Policy {
    /// TX 1 at full power, TX 2 power-controlled.
    IncumbentFull,
    /// TX 2 at full power, TX 1 power-controlled.
    LicenseeFull,
}

impl Policy {
    pub const ALL: [Policy; 2] = [Policy::IncumbentFull, Policy::LicenseeFull];

    pub fn full_power_tx(self) -> Side {
        match self {
            Policy::IncumbentFull => Side::Incumbent,
            Policy::LicenseeFull => Side::Licensee,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Policy::IncumbentFull => "P1",
            Policy::LicenseeFull => "P2",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One entry of the strategy table with its resolved powers and bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct Strategy {
    pub kinds: [BeamformerKind; 2],
    pub policy: Policy,
    /// Resolved average powers `[p1, p2]`.
    pub powers: [f64; 2],
    pub feasible: bool,
    pub incumbent_bound: RateBound,
    pub licensee_bound: RateBound,
}

impl Strategy {
    /// e.g. `MF-SZF-P1`.
    pub fn name(&self) -> String {
        format!("{}-{}-{}", self.kinds[0], self.kinds[1], self.policy)
    }
}

/// The eight `(policy, kind1, kind2)` combinations in tie-break order.
pub fn strategy_space() -> Vec<([BeamformerKind; 2], Policy)> {
    let mut out = Vec::with_capacity(8);
    for policy in Policy::ALL {
        for k1 in BeamformerKind::ALL {
            for k2 in BeamformerKind::ALL {
                out.push(([k1, k2], policy));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerResolution {
    pub powers: [f64; 2],
    pub feasible: bool,
    pub iterations: usize,
}

/// Powers for one strategy. The full-power TX sits at its budget; the other
/// TX gets the power that puts the incumbent bound at `tau1`.
///
/// Under [`Policy::IncumbentFull`] the bound decreases in `p2` and the largest
/// admissible `p2` is returned. Under [`Policy::LicenseeFull`] it increases in
/// `p1` and the smallest admissible `p1` is returned. Infeasible strategies
/// come back with `feasible = false` and the last boundary power tried.
pub fn resolve_power(
    kinds: [BeamformerKind; 2],
    policy: Policy,
    stats: &LinkStatistics,
    cfg: &ScenarioConfig,
) -> Result<PowerResolution> {
    let tau = cfg.tau1;
    let incumbent = |powers: [f64; 2]| -> Result<f64> { Ok(stats.bound(Side::Incumbent, kinds, powers)?.value) };

    match policy {
        Policy::IncumbentFull => {
            let p1 = cfg.p1_max;
            if incumbent([p1, cfg.p2_max])? >= tau {
                return Ok(PowerResolution {
                    powers: [p1, cfg.p2_max],
                    feasible: true,
                    iterations: 0,
                });
            }
            if incumbent([p1, 0.0])? < tau {
                return Ok(PowerResolution {
                    powers: [p1, 0.0],
                    feasible: false,
                    iterations: 0,
                });
            }
            // bound(lo) >= tau > bound(hi)
            let (p2, iterations) = bisect(0.0, cfg.p2_max, |p2| Ok(incumbent([p1, p2])? - tau), Keep::Lower)?;
            Ok(PowerResolution {
                powers: [p1, p2],
                feasible: true,
                iterations,
            })
        }
        Policy::LicenseeFull => {
            let p2 = cfg.p2_max;
            if incumbent([cfg.p1_max, p2])? < tau {
                return Ok(PowerResolution {
                    powers: [cfg.p1_max, p2],
                    feasible: false,
                    iterations: 0,
                });
            }
            // bound(0) = 0 < tau <= bound(p1_max)
            let (p1, iterations) = bisect(0.0, cfg.p1_max, |p1| Ok(incumbent([p1, p2])? - tau), Keep::Upper)?;
            Ok(PowerResolution {
                powers: [p1, p2],
                feasible: true,
                iterations,
            })
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum Keep {
    /// `f(lo) >= 0 > f(hi)`; return the largest point seen with `f >= 0`.
    Lower,
    /// `f(lo) < 0 <= f(hi)`; return the smallest point seen with `f >= 0`.
    Upper,
}

/// Bisection on a monotone residual, always returning a point where the
/// residual is non-negative.
pub(crate) fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> Result<f64>, keep: Keep) -> Result<(f64, usize)> {
    for it in 1..=BISECTION_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Ok((keep_point(lo, hi, keep), it));
        }
        let r = f(mid)?;
        let satisfied = r >= 0.0;
        match (keep, satisfied) {
            (Keep::Lower, true) => lo = mid,
            (Keep::Lower, false) => hi = mid,
            (Keep::Upper, true) => hi = mid,
            (Keep::Upper, false) => lo = mid,
        }
        if satisfied && r <= BISECTION_RATE_TOL {
            return Ok((mid, it));
        }
    }
    Ok((keep_point(lo, hi, keep), BISECTION_MAX_ITER))
}

fn keep_point(lo: f64, hi: f64, keep: Keep) -> f64 {
    match keep {
        Keep::Lower => lo,
        Keep::Upper => hi,
    }
}

/// Resolved strategy table plus the selected entry.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// All eight strategies in `(policy, kind1, kind2)` order.
    pub table: Vec<Strategy>,
    pub selected: usize,
    pub szf: [Beamformer; 2],
}

impl Selection {
    pub fn best(&self) -> &Strategy {
        &self.table[self.selected]
    }
}

/// Resolves all eight strategies from statistics alone and picks the
/// feasible one with the largest licensee bound. Ties go to the earlier
/// entry in `(policy, kind1, kind2)` order.
pub fn select_strategy(cfg: &ScenarioConfig, cov: &CovarianceSet) -> Result<Selection> {
    let max_rate = interference_free_rate(cfg, cov)?;
    if max_rate < cfg.tau1 {
        return Err(Error::Infeasible {
            tau1: cfg.tau1,
            max_rate,
        });
    }
    let szf = szf_pair(cov)?;
    let stats = LinkStatistics::new(cov, &[szf[0].vector.clone(), szf[1].vector.clone()])?;

    let mut table = Vec::with_capacity(8);
    for (kinds, policy) in strategy_space() {
        table.push(resolve_strategy(kinds, policy, &stats, cfg)?);
    }

    let mut selected: Option<usize> = None;
    for (i, s) in table.iter().enumerate() {
        if !s.feasible {
            continue;
        }
        match selected {
            Some(j) if table[j].licensee_bound.value >= s.licensee_bound.value => {}
            _ => selected = Some(i),
        }
    }
    // MF-MF-P1 always contains the feasible limit p2 -> 0
    let selected = selected.ok_or(Error::Infeasible {
        tau1: cfg.tau1,
        max_rate,
    })?;
    Ok(Selection { table, selected, szf })
}

pub fn resolve_strategy(
    kinds: [BeamformerKind; 2],
    policy: Policy,
    stats: &LinkStatistics,
    cfg: &ScenarioConfig,
) -> Result<Strategy> {
    let res = resolve_power(kinds, policy, stats, cfg)?;
    Ok(Strategy {
        kinds,
        policy,
        powers: res.powers,
        feasible: res.feasible,
        incumbent_bound: stats.bound(Side::Incumbent, kinds, res.powers)?,
        licensee_bound: stats.bound(Side::Licensee, kinds, res.powers)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::build_covariances;
    use rand::{Rng, SeedableRng};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn mf_normalizes() {
        let h = DVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert_eq!(mf_beamformer(Side::Incumbent, &h).unwrap().vector, h);
        let h = DVector::from_vec(vec![c(3.0, 0.0), c(0.0, 4.0)]);
        let u = mf_beamformer(Side::Licensee, &h).unwrap();
        assert!((u.vector[0] - c(0.6, 0.0)).norm() < 1e-15);
        assert!((u.vector[1] - c(0.0, 0.8)).norm() < 1e-15);
        assert_eq!(u.kind, BeamformerKind::Mf);
        let zero = DVector::from_element(3, c(0.0, 0.0));
        assert!(matches!(
            mf_beamformer(Side::Incumbent, &zero),
            Err(Error::DegenerateChannel(_))
        ));
    }

    #[test]
    fn mf_aligns_with_channel() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let h = DVector::from_fn(4, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let u = mf_beamformer(Side::Incumbent, &h).unwrap().vector;
            assert!((u.norm() - 1.0).abs() < 1e-12);
            let ip = u.dotc(&h);
            assert!((ip.re - h.norm()).abs() < 1e-12 && ip.im.abs() < 1e-12);
        }
    }

    #[test]
    fn szf_principal_axis_and_scale_invariance() {
        let rd = HermitianMatrix::from_diagonal(&[2.0, 1.0]).unwrap();
        let u = szf_beamformer(Side::Incumbent, &rd, &HermitianMatrix::identity(2), 0.0).unwrap();
        assert!((u.vector[0] - c(1.0, 0.0)).norm() < 1e-12);
        assert!(u.vector[1].norm() < 1e-12);

        let cov = build_covariances(&ScenarioConfig {
            rho: 0.3,
            ..Default::default()
        })
        .unwrap();
        let rd = cov.direct(Side::Licensee);
        let a = szf_beamformer(Side::Licensee, rd, &HermitianMatrix::identity(4).scaled(0.2), 0.0).unwrap();
        let b = szf_beamformer(Side::Licensee, rd, &HermitianMatrix::identity(4).scaled(5.0), 0.0).unwrap();
        assert!((&a.vector - &b.vector).norm() < 1e-10);
    }

    #[test]
    fn szf_maximizes_rayleigh_quotient() {
        // distinct-spectrum variant of the default scenario
        let cfg = ScenarioConfig {
            m1: 4,
            m2: 4,
            ..Default::default()
        };
        let cov = build_covariances(&cfg).unwrap();
        let cross = HermitianMatrix::from_real(4, |a, b| 0.3 * 0.8f64.powi(a.abs_diff(b) as i32)).unwrap();
        let rd = cov.direct(Side::Licensee);
        for (r_direct, r_cross) in [(rd, cov.cross_out(Side::Licensee)), (rd, &cross)] {
            let u = szf_beamformer(Side::Licensee, r_direct, r_cross, 0.0).unwrap().vector;
            let w = psd_inv_sqrt(r_cross, 0.0).unwrap();
            let m = r_direct.congruence(&w).unwrap();
            let achieved = m.quadratic_form(&u);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
            for _ in 0..10_000 {
                let v = DVector::from_fn(4, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
                let v = v.unscale(v.norm());
                assert!(m.quadratic_form(&v) <= achieved + 1e-9);
            }
        }
    }

    #[test]
    fn szf_tie_break_minimizes_leakage() {
        // proportional covariances: every direction maximizes the quotient
        let cov = build_covariances(&ScenarioConfig::default()).unwrap();
        let cross = cov.cross_out(Side::Licensee);
        let u = szf_beamformer(Side::Licensee, cov.direct(Side::Licensee), cross, 0.0).unwrap();
        let leak = cross.quadratic_form(&u.vector);
        let lmin = eigh(cross).min_eigenvalue();
        assert!((leak - lmin).abs() < 1e-10);
        assert!((u.vector.norm() - 1.0).abs() < 1e-12);
        // deterministic across calls
        let again = szf_beamformer(Side::Licensee, cov.direct(Side::Licensee), cross, 0.0).unwrap();
        assert_eq!(u, again);
    }

    #[test]
    fn szf_singular_cross_needs_ridge() {
        let rd = HermitianMatrix::identity(2);
        let zero = HermitianMatrix::zeros(2);
        assert!(matches!(
            szf_beamformer(Side::Incumbent, &rd, &zero, 0.0),
            Err(Error::Singular)
        ));
        assert!(szf_beamformer(Side::Incumbent, &rd, &zero, szf_ridge(&zero)).is_ok());
    }

    #[test]
    fn feasibility_gate_around_free_rate() {
        let cfg = ScenarioConfig::default();
        let cov = build_covariances(&cfg).unwrap();
        let free = interference_free_rate(&cfg, &cov).unwrap();
        assert!(check_feasibility(&cfg.clone().with_tau1(0.999 * free), &cov).unwrap());
        assert!(!check_feasibility(&cfg.clone().with_tau1(1.001 * free), &cov).unwrap());
        assert!(check_feasibility(&cfg, &cov).unwrap());
    }

    fn zero_cross(cfg: &ScenarioConfig) -> CovarianceSet {
        let cov = build_covariances(cfg).unwrap();
        let z = HermitianMatrix::zeros(4);
        CovarianceSet::new([[cov.r[0][0].clone(), z.clone()], [z, cov.r[1][1].clone()]], cov.n0).unwrap()
    }

    #[test]
    fn zero_cross_leaves_licensee_at_full_power() {
        let cfg = ScenarioConfig::default();
        let cov = zero_cross(&cfg);
        let szf = szf_pair(&cov).unwrap();
        let stats = LinkStatistics::new(&cov, &[szf[0].vector.clone(), szf[1].vector.clone()]).unwrap();
        let res = resolve_power(
            [BeamformerKind::Mf, BeamformerKind::Mf],
            Policy::IncumbentFull,
            &stats,
            &cfg,
        )
        .unwrap();
        assert!(res.feasible);
        assert_eq!(res.powers, [cfg.p1_max, cfg.p2_max]);

        let sel = select_strategy(&cfg, &cov).unwrap();
        let best = sel.best();
        assert_eq!(best.powers, [cfg.p1_max, cfg.p2_max]);
        let free2 = ergodic_rate_norm(cfg.p2_max / cfg.n0, &eigh(cov.direct(Side::Licensee)).eigenvalues).unwrap();
        assert!((best.licensee_bound.value - free2).abs() < 1e-12);
    }

    #[test]
    fn licensee_full_boundary_fixed_point() {
        let cfg = ScenarioConfig::default();
        let cov = build_covariances(&cfg).unwrap();
        let szf = szf_pair(&cov).unwrap();
        let stats = LinkStatistics::new(&cov, &[szf[0].vector.clone(), szf[1].vector.clone()]).unwrap();
        let kinds = [BeamformerKind::Mf, BeamformerKind::Mf];
        let tau = stats
            .bound(Side::Incumbent, kinds, [cfg.p1_max, cfg.p2_max])
            .unwrap()
            .value;
        let res = resolve_power(kinds, Policy::LicenseeFull, &stats, &cfg.clone().with_tau1(tau)).unwrap();
        assert!(res.feasible);
        assert!((res.powers[0] - cfg.p1_max).abs() < 1e-6 * cfg.p1_max);
    }

    #[test]
    fn interior_solution_meets_threshold() {
        let cfg = ScenarioConfig::default();
        let cov = build_covariances(&cfg).unwrap();
        let sel = select_strategy(&cfg, &cov).unwrap();
        let s = &sel.table[0];
        assert_eq!(s.name(), "MF-MF-P1");
        assert!(s.feasible);
        if s.powers[1] < cfg.p2_max {
            assert!((s.incumbent_bound.value - cfg.tau1).abs() <= 1e-6);
            assert!(s.incumbent_bound.value >= cfg.tau1);
        }
        for s in &sel.table {
            let full = (s.powers[0] / cfg.p1_max).max(s.powers[1] / cfg.p2_max);
            assert_eq!(full, 1.0);
            if s.feasible {
                assert!(s.incumbent_bound.value >= cfg.tau1 - 1e-6);
            }
        }
    }

    #[test]
    fn infeasible_scenario_is_an_error() {
        let cfg = ScenarioConfig::default().with_tau1(50.0);
        let cov = build_covariances(&cfg).unwrap();
        assert!(matches!(select_strategy(&cfg, &cov), Err(Error::Infeasible { .. })));
    }

    #[test]
    fn bisection_keeps_the_feasible_side() {
        let f = |x: f64| Ok(0.3 - x);
        let (x, _) = bisect(0.0, 1.0, f, Keep::Lower).unwrap();
        assert!(x <= 0.3 && 0.3 - x <= BISECTION_RATE_TOL);
        let g = |x: f64| Ok(x * x - 0.5);
        let (x, _) = bisect(0.0, 1.0, g, Keep::Upper).unwrap();
        assert!(x * x >= 0.5 && x * x - 0.5 <= BISECTION_RATE_TOL);
    }
}
