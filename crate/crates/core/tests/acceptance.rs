//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line per
//! criterion and exits non-zero if any criterion fails.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use lsa_precoding::baselines::{coordination_benchmark, BenchmarkModel};
use lsa_precoding::channel::{build_covariances, sample_channels, substream, ScenarioConfig, Side};
use lsa_precoding::coordination::{check_feasibility, interference_free_rate, select_strategy};
use lsa_precoding::numerics::HermitianMatrix;
use lsa_precoding::rate::{ergodic_rate_norm, ergodic_rate_projection, quadratic_ratio_expectation};
use lsa_precoding::sim::{run_point, run_sweep, Scheme, SweepAxis, SweepSpec};
use lsa_precoding::verify::{random_psd, random_spectrum, run_lemma_suite, SuiteConfig};

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn snr_points() -> Vec<f64> {
    SweepAxis::SnrDb.default_points()
}

fn lemma_oracles() -> Outcome {
    let start = Instant::now();
    let checks = run_lemma_suite(&SuiteConfig::default()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let failed: Vec<String> = checks
        .iter()
        .filter(|c| !c.passed(3.0))
        .map(|c| c.to_string())
        .collect();
    let worst = checks.iter().map(|c| c.z_score()).fold(0.0, f64::max);
    ensure!(checks.len() >= 60, "only {} checks", checks.len());
    ensure!(
        failed.is_empty(),
        "{} of {} outside 3 se: {}",
        failed.len(),
        checks.len(),
        failed.join("; ")
    );
    ensure!(elapsed <= Duration::from_secs(120), "took {elapsed:.1?}");
    Ok(format!("{} checks, max |z| = {worst:.2}, {elapsed:.1?}", checks.len()))
}

fn exact_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst = 0.0f64;
    for case in 0..40 {
        let n = 2 + case % 5;
        let a = random_psd(&random_spectrum(n, &mut rng), &mut rng).map_err(|e| e.to_string())?;
        let one = quadratic_ratio_expectation(&a, &a).map_err(|e| e.to_string())?;
        ensure!((one - 1.0).abs() <= 1e-10, "ratio(A, A) = {one}");
        let c = rng.random_range(0.1..10.0);
        let scaled = quadratic_ratio_expectation(&a, &a.scaled(c)).map_err(|e| e.to_string())?;
        ensure!((scaled - c).abs() <= 1e-10 * c.max(1.0), "ratio(A, {c}A) = {scaled}");
        worst = worst.max((one - 1.0).abs());

        let eigs = random_spectrum(n, &mut rng);
        let gamma = rng.random_range(0.5..20.0);
        let base = ergodic_rate_norm(gamma, &eigs).map_err(|e| e.to_string())?;
        let mut rev = eigs.clone();
        rev.reverse();
        rev.rotate_left(case % n);
        let permuted = ergodic_rate_norm(gamma, &rev).map_err(|e| e.to_string())?;
        ensure!(
            (base - permuted).abs() <= 1e-10,
            "permutation changed {base} to {permuted}"
        );
        let s = rng.random_range(0.2..5.0);
        let moved: Vec<f64> = eigs.iter().map(|l| l / s).collect();
        let rescaled = ergodic_rate_norm(gamma * s, &moved).map_err(|e| e.to_string())?;
        ensure!(
            (base - rescaled).abs() <= 1e-10 * base.max(1.0),
            "scaling changed {base} to {rescaled}"
        );

        let lambda = rng.random_range(0.1..5.0);
        let r = HermitianMatrix::from_diagonal(&[lambda]).map_err(|e| e.to_string())?;
        let w = DVector::from_element(1, Complex64::from_polar(1.0, rng.random_range(0.0..6.0)));
        let proj = ergodic_rate_projection(gamma, &r, &w).map_err(|e| e.to_string())?;
        let norm = ergodic_rate_norm(gamma, &[lambda]).map_err(|e| e.to_string())?;
        ensure!((proj - norm).abs() <= 1e-10, "scalar reduction {proj} vs {norm}");
    }
    Ok(format!("40 random cases, max |ratio(A,A) - 1| = {worst:.1e}"))
}

fn jensen_direction() -> Outcome {
    let mut checked = 0;
    let mut tightest = f64::INFINITY;
    for (i, snr) in [0.0, 5.0, 10.0, 15.0, 20.0].into_iter().enumerate() {
        let cfg = ScenarioConfig::default().with_snr_db(snr);
        let point = run_point(&cfg, snr, i as u64, &[Scheme::Coordinated], 0).map_err(|e| e.to_string())?;
        ensure!(point.rows.len() == 8, "expected 8 strategies at {snr} dB");
        for row in &point.rows {
            for rx in Side::BOTH {
                let bound = row.bound(rx).unwrap();
                let mc = row.mc(rx).unwrap();
                if mc.std_error > 0.0 {
                    tightest = tightest.min((mc.mean - bound) / mc.std_error);
                }
                ensure!(
                    bound <= mc.mean + 3.0 * mc.std_error,
                    "{snr} dB {} RX {}: bound {bound} > mc {} + 3*{}",
                    row.strategy,
                    rx.number(),
                    mc.mean,
                    mc.std_error
                );
                checked += 1;
            }
        }
    }
    Ok(format!(
        "{checked} bound/MC pairs at 2e4 draws, min (mc - bound)/se = {tightest:.2}"
    ))
}

fn incumbent_guarantee() -> Outcome {
    let spec = SweepSpec {
        schemes: vec![Scheme::Coordinated],
        ..SweepSpec::new(SweepAxis::SnrDb, snr_points(), ScenarioConfig::default())
    };
    let report = run_sweep(&spec).map_err(|e| e.to_string())?;
    let mut worst_residual = 0.0f64;
    let mut min_rate = f64::INFINITY;
    for p in &report.points {
        ensure!(p.feasible, "infeasible at {} dB", p.axis_value);
        let row = p.headline(Scheme::Coordinated).unwrap();
        let mc = row.mc(Side::Incumbent).unwrap();
        min_rate = min_rate.min(mc.mean);
        ensure!(
            mc.mean + 3.0 * mc.std_error >= p.config.tau1,
            "{} dB: {} incumbent MC {} (se {}) below tau1",
            p.axis_value,
            row.strategy,
            mc.mean,
            mc.std_error
        );
        let sel = p.selection.as_ref().unwrap();
        for s in sel.table.iter().filter(|s| s.feasible) {
            let interior = s.powers[0] < p.config.p1_max || s.powers[1] < p.config.p2_max;
            if interior {
                let r = (s.incumbent_bound.value - p.config.tau1).abs();
                worst_residual = worst_residual.max(r);
                ensure!(r <= 1e-6, "{} dB {}: residual {r}", p.axis_value, s.name());
            }
        }
    }
    Ok(format!(
        "{} SNR points, min incumbent MC rate {min_rate:.3}, max interior residual {worst_residual:.1e}",
        report.points.len()
    ))
}

fn scheme_ordering() -> Outcome {
    let taus = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0];
    let spec = SweepSpec::new(
        SweepAxis::Tau1,
        taus.to_vec(),
        ScenarioConfig::default().with_snr_db(10.0),
    );
    let report = run_sweep(&spec).map_err(|e| e.to_string())?;
    let mut min_gain = f64::INFINITY;
    for p in &report.points {
        let get = |s: Scheme| p.headline(s).and_then(|r| r.mc(Side::Licensee)).unwrap();
        let (bench, coord, it) = (
            get(Scheme::Benchmark),
            get(Scheme::Coordinated),
            get(Scheme::InterferenceTemperature),
        );
        let tau = p.axis_value;
        let se_bc = bench.std_error.hypot(coord.std_error);
        let se_ci = coord.std_error.hypot(it.std_error);
        ensure!(
            bench.mean + 3.0 * se_bc >= coord.mean,
            "tau1 {tau}: benchmark {} < coordinated {}",
            bench.mean,
            coord.mean
        );
        ensure!(
            coord.mean + 3.0 * se_ci >= it.mean,
            "tau1 {tau}: coordinated {} < inttemp {}",
            coord.mean,
            it.mean
        );
        if tau <= 1.0 {
            let gain = coord.mean - it.mean;
            min_gain = min_gain.min(gain);
            ensure!(
                gain > 3.0 * se_ci,
                "tau1 {tau}: coordinated gain {gain} not significant"
            );
        }
    }
    Ok(format!(
        "6 thresholds at 10 dB, coordinated beats inttemp by >= {min_gain:.3} bits/s/Hz for tau1 <= 1"
    ))
}

fn full_power_invariants() -> Outcome {
    let mut strategies = 0;
    let mut worst = 0.0f64;
    for snr in [0.0, 5.0, 10.0, 15.0, 20.0] {
        for tau in SweepAxis::Tau1.default_points() {
            let cfg = ScenarioConfig::default().with_snr_db(snr).with_tau1(tau);
            let cov = build_covariances(&cfg).map_err(|e| e.to_string())?;
            if !check_feasibility(&cfg, &cov).map_err(|e| e.to_string())? {
                continue;
            }
            let sel = select_strategy(&cfg, &cov).map_err(|e| e.to_string())?;
            for s in &sel.table {
                let full = (s.powers[0] / cfg.p1_max).max(s.powers[1] / cfg.p2_max);
                ensure!(full == 1.0, "{snr} dB tau {tau} {}: powers {:?}", s.name(), s.powers);
                strategies += 1;
            }
            let b = coordination_benchmark(&cfg, &cov).map_err(|e| e.to_string())?;
            ensure!(
                b.powers[0] == cfg.p1_max || b.powers[1] == cfg.p2_max,
                "benchmark at {snr} dB tau {tau}: {:?}",
                b.powers
            );
            if b.powers[0] < cfg.p1_max || b.powers[1] < cfg.p2_max {
                let r = (b.incumbent_rate.value - tau).abs();
                worst = worst.max(r);
                ensure!(r <= 1e-6, "benchmark residual {r} at {snr} dB tau {tau}");
                let model = BenchmarkModel::new(&cov);
                let again = model.rate(Side::Incumbent, b.powers).map_err(|e| e.to_string())?;
                ensure!((again - tau).abs() <= 1e-6, "re-evaluated residual {}", again - tau);
            }
        }
    }
    Ok(format!(
        "{strategies} strategies full-power checked, benchmark residual <= {worst:.1e}"
    ))
}

fn statistical_coordination() -> Outcome {
    let base = ScenarioConfig::default();
    let cov = build_covariances(&base).map_err(|e| e.to_string())?;
    let reference = select_strategy(&base, &cov).map_err(|e| e.to_string())?;
    for seed in [3u64, 17, 99, 1234, 98765] {
        let cfg = ScenarioConfig { seed, ..base.clone() };
        // consume channel draws from an unrelated generator first
        let mut rng = substream(seed, 0, 0);
        for _ in 0..seed % 13 + 1 {
            sample_channels(&cov, &mut rng).map_err(|e| e.to_string())?;
        }
        let sel = select_strategy(&cfg, &cov).map_err(|e| e.to_string())?;
        ensure!(sel == reference, "table changed for seed {seed}");
        ensure!(
            format!("{sel:?}") == format!("{reference:?}"),
            "debug form changed for seed {seed}"
        );
        for (a, b) in sel.table.iter().zip(&reference.table) {
            let bits = |s: &lsa_precoding::Strategy| {
                [
                    s.powers[0],
                    s.powers[1],
                    s.incumbent_bound.value,
                    s.licensee_bound.value,
                ]
                .map(f64::to_bits)
            };
            ensure!(bits(a) == bits(b), "bit pattern differs for {}", a.name());
        }
    }
    Ok(format!(
        "5 seeds, identical table, selected {}",
        reference.best().name()
    ))
}

fn feasibility_gate() -> Outcome {
    let cfg = ScenarioConfig::default();
    let cov = build_covariances(&cfg).map_err(|e| e.to_string())?;
    let free = interference_free_rate(&cfg, &cov).map_err(|e| e.to_string())?;
    let taus: Vec<f64> = (-20..=20).map(|k| free * (1.0 + 1e-3 * k as f64)).collect();
    let gate: Vec<bool> = taus
        .iter()
        .map(|&t| check_feasibility(&cfg.clone().with_tau1(t), &cov))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let flips = gate.windows(2).filter(|w| w[0] != w[1]).count();
    ensure!(flips == 1, "gate flips {flips} times");
    ensure!(gate[0] && !gate[gate.len() - 1], "wrong orientation");
    let last_true = gate.iter().rposition(|&g| g).unwrap();
    ensure!(
        taus[last_true] <= free && taus[last_true + 1] > free,
        "flip not at the interference-free rate"
    );
    ensure!(
        check_feasibility(&cfg.clone().with_tau1(free), &cov).map_err(|e| e.to_string())?,
        "tau1 = free rejected"
    );
    Ok(format!("41 thresholds around {free:.4}, single flip"))
}

fn reproducibility() -> Outcome {
    let base = ScenarioConfig::default();
    let mut csv = Vec::new();
    let mut timings = Vec::new();
    for workers in [1usize, 4, 8, 1] {
        let start = Instant::now();
        let mut bytes = Vec::new();
        for axis in [SweepAxis::SnrDb, SweepAxis::Tau1] {
            let spec = SweepSpec {
                workers,
                ..SweepSpec::new(axis, axis.default_points(), base.clone())
            };
            bytes.extend(
                run_sweep(&spec)
                    .map_err(|e| e.to_string())?
                    .to_csv_bytes()
                    .map_err(|e| e.to_string())?,
            );
        }
        timings.push(start.elapsed());
        csv.push(bytes);
    }
    for (i, c) in csv.iter().enumerate().skip(1) {
        ensure!(*c == csv[0], "run {i} differs from run 0");
    }
    let slowest = timings.iter().max().unwrap();
    ensure!(*slowest <= Duration::from_secs(600), "full sweep took {slowest:.1?}");
    Ok(format!(
        "{} CSV bytes identical for 1/4/8/1 workers, slowest full sweep {slowest:.1?}",
        csv[0].len()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("lemma oracle equivalence", lemma_oracles),
        ("exact identities", exact_identities),
        ("Jensen direction", jensen_direction),
        ("incumbent guarantee", incumbent_guarantee),
        ("scheme ordering", scheme_ordering),
        ("full-power invariants", full_power_invariants),
        ("statistical coordination", statistical_coordination),
        ("feasibility gate", feasibility_gate),
        ("reproducibility", reproducibility),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(detail) => println!("criterion {}: PASS {name} ({detail})", i + 1),
            Err(detail) => {
                failures += 1;
                println!("criterion {}: FAIL {name} ({detail})", i + 1);
            }
        }
    }
    println!("acceptance: {} of 9 criteria passed", 9 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
