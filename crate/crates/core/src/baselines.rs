//! Reference schemes: interference-temperature underlay precoding and the
//! idealized coordination benchmark.

use std::fmt;

use crate::channel::{CovarianceSet, ScenarioConfig, Side};
use crate::coordination::{bisect, interference_free_rate, szf_pair, Keep, Policy, BISECTION_RATE_TOL};
use crate::numerics::eigh;
use crate::rate::{ergodic_rate_norm, BeamformerKind, LinkStatistics, RateBound};
use crate::{Error, Result};

/// Doublings allowed when growing the interference-threshold bracket.
const MAX_BRACKET_DOUBLINGS: usize = 1100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaselineScheme {
    InterferenceTemperature,
    Benchmark,
}

impl fmt::Display for BaselineScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BaselineScheme::InterferenceTemperature => "inttemp",
            BaselineScheme::Benchmark => "benchmark",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineResult {
    pub scheme: BaselineScheme,
    /// Average powers `[p1, p2]`.
    pub powers: [f64; 2],
    /// Interference threshold at the incumbent receiver; interference
    /// temperature scheme only.
    pub interference_threshold: Option<f64>,
    pub incumbent_rate: RateBound,
    pub licensee_rate: RateBound,
    /// Which TX ended up at full power. The interference temperature scheme
    /// always keeps TX 1 at full power.
    pub policy: Policy,
}

/// Underlay scheme: TX 1 transmits at full power with MF; the largest
/// average interference `I` that still lets RX 1 reach `tau1` is found by
/// bisection, and TX 2 (sZF) scales its power so that its mean leakage into
/// RX 1 equals `I`.
pub fn interference_temperature_scheme(cfg: &ScenarioConfig, cov: &CovarianceSet) -> Result<BaselineResult> {
    let eigs = eigh(cov.direct(Side::Incumbent)).eigenvalues;
    let n0 = cov.n0;
    let p1 = cfg.p1_max;
    let residual =
        |interference: f64| -> Result<f64> { Ok(ergodic_rate_norm(p1 / (n0 + interference), &eigs)? - cfg.tau1) };

    let free = residual(0.0)?;
    if free < 0.0 {
        return Err(Error::Infeasible {
            tau1: cfg.tau1,
            max_rate: free + cfg.tau1,
        });
    }
    let mut hi = n0;
    let mut doublings = 0;
    while residual(hi)? >= 0.0 {
        hi *= 2.0;
        doublings += 1;
        if doublings > MAX_BRACKET_DOUBLINGS || !hi.is_finite() {
            return Err(Error::Domain(format!(
                "no interference level pushes the incumbent rate below {}",
                cfg.tau1
            )));
        }
    }
    let threshold = if free <= BISECTION_RATE_TOL {
        0.0
    } else {
        bisect(0.0, hi, residual, Keep::Lower)?.0
    };

    let szf = szf_pair(cov)?;
    let leak = cov.cross_out(Side::Licensee).quadratic_form(&szf[1].vector);
    let p2 = if leak > 0.0 {
        (threshold / leak).min(cfg.p2_max)
    } else {
        cfg.p2_max
    };
    let powers = [p1, p2];

    let stats = LinkStatistics::new(cov, &[szf[0].vector.clone(), szf[1].vector.clone()])?;
    let kinds = [BeamformerKind::Mf, BeamformerKind::Szf];
    Ok(BaselineResult {
        scheme: BaselineScheme::InterferenceTemperature,
        powers,
        interference_threshold: Some(threshold),
        incumbent_rate: stats.bound(Side::Incumbent, kinds, powers)?,
        licensee_rate: stats.bound(Side::Licensee, kinds, powers)?,
        policy: Policy::IncumbentFull,
    })
}

/// Closed forms of the idealized benchmark: each receiver enjoys the full
/// MF gain of its direct link while the interference it sees is attenuated
/// by the smallest eigenvalue of the cross covariance.
#[derive(Debug, Clone)]
pub struct BenchmarkModel {
    n0: f64,
    direct_eigs: [Vec<f64>; 2],
    /// `lambda_min` of the covariance from the other TX into RX i.
    min_cross: [f64; 2],
}

impl BenchmarkModel {
    pub fn new(cov: &CovarianceSet) -> Self {
        let pick = |rx: Side| eigh(cov.link(rx, rx.other())).min_eigenvalue().max(0.0);
        Self {
            n0: cov.n0,
            direct_eigs: [
                eigh(cov.direct(Side::Incumbent)).eigenvalues,
                eigh(cov.direct(Side::Licensee)).eigenvalues,
            ],
            min_cross: [pick(Side::Incumbent), pick(Side::Licensee)],
        }
    }

    /// Smallest eigenvalue of the cross covariance seen by `rx`.
    pub fn min_cross_gain(&self, rx: Side) -> f64 {
        self.min_cross[rx.index()]
    }

    pub fn rate(&self, rx: Side, powers: [f64; 2]) -> Result<f64> {
        let i = rx.index();
        let other = rx.other().index();
        let gamma = powers[i] / (self.n0 + powers[other] * self.min_cross[i]);
        if gamma == 0.0 {
            return Ok(0.0);
        }
        ergodic_rate_norm(gamma, &self.direct_eigs[i])
    }
}

/// Idealized upper benchmark. The optimum has one TX at full power, so both
/// candidates (TX 1 full with the largest admissible `p2`, TX 2 full with the
/// smallest admissible `p1`) are solved by bisection and the one with the
/// larger licensee rate is kept; ties go to TX 1 at full power.
pub fn coordination_benchmark(cfg: &ScenarioConfig, cov: &CovarianceSet) -> Result<BaselineResult> {
    let model = BenchmarkModel::new(cov);
    let tau = cfg.tau1;
    let constraint = |powers: [f64; 2]| -> Result<f64> { Ok(model.rate(Side::Incumbent, powers)? - tau) };

    let incumbent_full = {
        let p1 = cfg.p1_max;
        if constraint([p1, cfg.p2_max])? >= 0.0 {
            Some([p1, cfg.p2_max])
        } else if constraint([p1, 0.0])? < 0.0 {
            None
        } else {
            let (p2, _) = bisect(0.0, cfg.p2_max, |p2| constraint([p1, p2]), Keep::Lower)?;
            Some([p1, p2])
        }
    };
    let licensee_full = {
        let p2 = cfg.p2_max;
        if constraint([cfg.p1_max, p2])? < 0.0 {
            None
        } else {
            let (p1, _) = bisect(0.0, cfg.p1_max, |p1| constraint([p1, p2]), Keep::Upper)?;
            Some([p1, p2])
        }
    };

    let mut best: Option<([f64; 2], Policy, f64)> = None;
    for (candidate, policy) in [
        (incumbent_full, Policy::IncumbentFull),
        (licensee_full, Policy::LicenseeFull),
    ] {
        let Some(powers) = candidate else { continue };
        let objective = model.rate(Side::Licensee, powers)?;
        if best.is_none_or(|(_, _, b)| objective > b) {
            best = Some((powers, policy, objective));
        }
    }
    let Some((powers, policy, objective)) = best else {
        return Err(Error::Infeasible {
            tau1: tau,
            max_rate: interference_free_rate(cfg, cov)?,
        });
    };

    Ok(BaselineResult {
        scheme: BaselineScheme::Benchmark,
        powers,
        interference_threshold: None,
        incumbent_rate: RateBound {
            value: model.rate(Side::Incumbent, powers)?,
            receiver: Side::Incumbent,
            is_lower_bound: false,
        },
        licensee_rate: RateBound {
            value: objective,
            receiver: Side::Licensee,
            is_lower_bound: false,
        },
        policy,
    })
}
