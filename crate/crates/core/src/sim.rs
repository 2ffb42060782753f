//! Monte Carlo evaluation of the schemes and parameter sweeps.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::Serialize;

use crate::baselines::{coordination_benchmark, interference_temperature_scheme, BaselineResult, BenchmarkModel};
use crate::channel::{build_covariances, ChannelDraw, ChannelSampler, CovarianceSet, ScenarioConfig, Side};
use crate::coordination::{check_feasibility, select_strategy, Selection};
use crate::mc::{estimate, McEstimate};
use crate::rate::BeamformerKind;
use crate::{Error, Result};

pub const MIN_SAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Scheme {
    #[serde(rename = "coordinated")]
    Coordinated,
    #[serde(rename = "inttemp")]
    InterferenceTemperature,
    #[serde(rename = "benchmark")]
    Benchmark,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Coordinated, Scheme::InterferenceTemperature, Scheme::Benchmark];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Coordinated => "coordinated",
            Scheme::InterferenceTemperature => "inttemp",
            Scheme::Benchmark => "benchmark",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL.into_iter().find(|x| x.as_str() == s.trim()).ok_or_else(|| {
            Error::Invalid(format!(
                "unknown scheme `{s}` (expected coordinated, inttemp or benchmark)"
            ))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    /// Transmit SNR in dB; both TXs get `n0 · 10^(snr/10)`.
    SnrDb,
    Tau1,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::SnrDb => "snr",
            SweepAxis::Tau1 => "tau1",
        }
    }

    pub fn apply(self, cfg: &ScenarioConfig, value: f64) -> ScenarioConfig {
        match self {
            SweepAxis::SnrDb => cfg.clone().with_snr_db(value),
            SweepAxis::Tau1 => cfg.clone().with_tau1(value),
        }
    }

    /// 0, 2, ..., 20 dB for SNR; 0.25, 0.5, ..., 3 for the threshold.
    pub fn default_points(self) -> Vec<f64> {
        match self {
            SweepAxis::SnrDb => (0..=10).map(|k| 2.0 * k as f64).collect(),
            SweepAxis::Tau1 => (1..=12).map(|k| 0.25 * k as f64).collect(),
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "snr" => Ok(SweepAxis::SnrDb),
            "tau1" => Ok(SweepAxis::Tau1),
            other => Err(Error::Invalid(format!(
                "unknown sweep axis `{other}` (expected snr or tau1)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub points: Vec<f64>,
    /// Scenario the axis values are applied to. Its `seed` and `n_samples`
    /// drive the Monte Carlo runs.
    pub base: ScenarioConfig,
    pub schemes: Vec<Scheme>,
    /// Worker threads for the Monte Carlo blocks; 0 means rayon's default.
    pub workers: usize,
}

impl SweepSpec {
    pub fn new(axis: SweepAxis, points: Vec<f64>, base: ScenarioConfig) -> Self {
        Self {
            axis,
            points,
            base,
            schemes: Scheme::ALL.to_vec(),
            workers: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::Invalid("sweep needs at least one point".into()));
        }
        if self.points.iter().any(|p| !p.is_finite()) {
            return Err(Error::Invalid("sweep points must be finite".into()));
        }
        if self.points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Invalid("sweep points must be strictly increasing".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::Invalid("no schemes selected".into()));
        }
        for (i, s) in self.schemes.iter().enumerate() {
            if self.schemes[..i].contains(s) {
                return Err(Error::Invalid(format!("scheme `{s}` listed twice")));
            }
        }
        if self.base.n_samples < MIN_SAMPLES {
            return Err(Error::Invalid(format!("n_samples must be at least {MIN_SAMPLES}")));
        }
        self.base.validate()
    }
}

/// How a TX picks its instantaneous beam.
#[derive(Debug, Clone, PartialEq)]
pub enum Beam {
    /// Matched filter on the drawn direct channel.
    Mf,
    /// Fixed unit vector, e.g. the statistical ZF beam.
    Fixed(DVector<Complex64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum RateModel {
    /// Instantaneous SINR with the actual beams of both TXs.
    Physical([Beam; 2]),
    /// Benchmark idealization: full MF gain on the direct link and the
    /// interference gain replaced by `min_cross[rx]`.
    Idealized { min_cross: [f64; 2] },
}

/// One scheme evaluated on the common channel draws.
#[derive(Debug, Clone, PartialEq)]
pub struct McJob {
    pub powers: [f64; 2],
    pub model: RateModel,
}

impl McJob {
    fn rates(&self, draw: &ChannelDraw, n0: f64) -> [f64; 2] {
        let direct_norm = |s: Side| draw.link(s, s).norm_squared();
        match &self.model {
            RateModel::Idealized { min_cross } => Side::BOTH.map(|rx| {
                let (i, j) = (rx.index(), rx.other().index());
                let sinr = self.powers[i] * direct_norm(rx) / (n0 + self.powers[j] * min_cross[i]);
                sinr.ln_1p() / std::f64::consts::LN_2
            }),
            RateModel::Physical(beams) => {
                // gain[rx][tx] = |h_{rx,tx}^H u_tx|^2
                let mut gain = [[0.0; 2]; 2];
                for tx in Side::BOTH {
                    let h_direct = draw.link(tx, tx);
                    let h_cross = draw.link(tx.other(), tx);
                    let (g_direct, g_cross) = match &beams[tx.index()] {
                        Beam::Mf => {
                            let norm_sq = h_direct.norm_squared();
                            let cross = if norm_sq > 0.0 {
                                h_cross.dotc(h_direct).norm_sqr() / norm_sq
                            } else {
                                0.0
                            };
                            (norm_sq, cross)
                        }
                        Beam::Fixed(u) => (h_direct.dotc(u).norm_sqr(), h_cross.dotc(u).norm_sqr()),
                    };
                    gain[tx.index()][tx.index()] = g_direct;
                    gain[tx.other().index()][tx.index()] = g_cross;
                }
                Side::BOTH.map(|rx| {
                    let (i, j) = (rx.index(), rx.other().index());
                    let sinr = self.powers[i] * gain[i][i] / (n0 + self.powers[j] * gain[i][j]);
                    sinr.ln_1p() / std::f64::consts::LN_2
                })
            }
        }
    }
}

/// Mean ergodic rates `[RX 1, RX 2]` of every job over one shared set of
/// `n_samples` channel draws taken from `substream(seed, stream, ·)`.
pub fn mc_ergodic_rates(
    cov: &CovarianceSet,
    jobs: &[McJob],
    n_samples: usize,
    seed: u64,
    stream: u64,
    workers: usize,
) -> Result<Vec<[McEstimate; 2]>> {
    if n_samples < MIN_SAMPLES {
        return Err(Error::Invalid(format!("n_samples must be at least {MIN_SAMPLES}")));
    }
    if jobs.is_empty() {
        return Ok(Vec::new());
    }
    let sampler = ChannelSampler::new(cov)?;
    let n0 = cov.n0;
    let flat = estimate(n_samples, 2 * jobs.len(), seed, stream, workers, |rng, out| {
        let draw = sampler.sample(rng);
        for (k, job) in jobs.iter().enumerate() {
            let r = job.rates(&draw, n0);
            out[2 * k] = r[0];
            out[2 * k + 1] = r[1];
        }
    })?;
    Ok(flat.chunks_exact(2).map(|c| [c[0], c[1]]).collect())
}

/// One CSV line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub axis_value: f64,
    pub scheme: Scheme,
    pub strategy: String,
    pub kind1: String,
    pub kind2: String,
    pub policy: String,
    pub p1: Option<f64>,
    pub p2: Option<f64>,
    pub bound_rx1: Option<f64>,
    pub bound_rx2: Option<f64>,
    pub mc_rx1: Option<f64>,
    pub mc_se_rx1: Option<f64>,
    pub mc_rx2: Option<f64>,
    pub mc_se_rx2: Option<f64>,
    pub feasible: bool,
    pub selected: bool,
}

impl ReportRow {
    fn infeasible(axis_value: f64, scheme: Scheme) -> Self {
        Self {
            axis_value,
            scheme,
            strategy: String::new(),
            kind1: String::new(),
            kind2: String::new(),
            policy: String::new(),
            p1: None,
            p2: None,
            bound_rx1: None,
            bound_rx2: None,
            mc_rx1: None,
            mc_se_rx1: None,
            mc_rx2: None,
            mc_se_rx2: None,
            feasible: false,
            selected: false,
        }
    }

    /// Monte Carlo mean and standard error at `rx`.
    pub fn mc(&self, rx: Side) -> Option<McEstimate> {
        let (mean, se) = match rx {
            Side::Incumbent => (self.mc_rx1?, self.mc_se_rx1?),
            Side::Licensee => (self.mc_rx2?, self.mc_se_rx2?),
        };
        Some(McEstimate {
            mean,
            std_error: se,
            samples: 0,
        })
    }

    pub fn bound(&self, rx: Side) -> Option<f64> {
        match rx {
            Side::Incumbent => self.bound_rx1,
            Side::Licensee => self.bound_rx2,
        }
    }
}

/// Everything computed at one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointReport {
    pub axis_value: f64,
    pub config: ScenarioConfig,
    pub feasible: bool,
    pub selection: Option<Selection>,
    pub inttemp: Option<BaselineResult>,
    pub benchmark: Option<BaselineResult>,
    pub rows: Vec<ReportRow>,
}

impl PointReport {
    /// The representative row of a scheme: the selected strategy for the
    /// coordinated scheme, the single row otherwise.
    pub fn headline(&self, scheme: Scheme) -> Option<&ReportRow> {
        self.rows
            .iter()
            .filter(|r| r.scheme == scheme)
            .find(|r| scheme != Scheme::Coordinated || r.selected)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub axis: SweepAxis,
    pub points: Vec<PointReport>,
}

pub const CSV_HEADER: &str =
    "axis_value,scheme,strategy,kind1,kind2,policy,p1,p2,bound_rx1,bound_rx2,mc_rx1,mc_se_rx1,mc_rx2,mc_se_rx2,feasible,selected";

impl SweepReport {
    pub fn rows(&self) -> impl Iterator<Item = &ReportRow> {
        self.points.iter().flat_map(|p| p.rows.iter())
    }

    pub fn any_feasible(&self) -> bool {
        self.points.iter().any(|p| p.feasible)
    }

    pub fn write_csv_to<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in self.rows() {
            w.serialize(row)?;
        }
        if self.points.iter().all(|p| p.rows.is_empty()) {
            w.write_record(CSV_HEADER.split(','))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_csv_to(&mut buf)?;
        Ok(buf)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv_to(std::io::BufWriter::new(file))
    }
}

fn physical_job(kinds: [BeamformerKind; 2], powers: [f64; 2], selection: &Selection) -> McJob {
    let beams = Side::BOTH.map(|tx| match kinds[tx.index()] {
        BeamformerKind::Mf => Beam::Mf,
        BeamformerKind::Szf => Beam::Fixed(selection.szf[tx.index()].vector.clone()),
    });
    McJob {
        powers,
        model: RateModel::Physical(beams),
    }
}

/// Full pipeline at one operating point: feasibility gate, strategy
/// selection, baselines, and Monte Carlo rates for every requested scheme on
/// common channel draws keyed by `(cfg.seed, point_index)`.
pub fn run_point(
    cfg: &ScenarioConfig,
    axis_value: f64,
    point_index: u64,
    schemes: &[Scheme],
    workers: usize,
) -> Result<PointReport> {
    let cov = build_covariances(cfg)?;
    let mut report = PointReport {
        axis_value,
        config: cfg.clone(),
        feasible: check_feasibility(cfg, &cov)?,
        selection: None,
        inttemp: None,
        benchmark: None,
        rows: Vec::new(),
    };
    if !report.feasible {
        report.rows = schemes.iter().map(|&s| ReportRow::infeasible(axis_value, s)).collect();
        return Ok(report);
    }

    // the sZF beams are shared by every scheme that uses them
    let selection = select_strategy(cfg, &cov)?;
    let mut jobs = Vec::new();
    let mut rows = Vec::new();
    for &scheme in schemes {
        match scheme {
            Scheme::Coordinated => {
                for (i, s) in selection.table.iter().enumerate() {
                    jobs.push(physical_job(s.kinds, s.powers, &selection));
                    rows.push(ReportRow {
                        axis_value,
                        scheme,
                        strategy: s.name(),
                        kind1: s.kinds[0].to_string(),
                        kind2: s.kinds[1].to_string(),
                        policy: s.policy.to_string(),
                        p1: Some(s.powers[0]),
                        p2: Some(s.powers[1]),
                        bound_rx1: Some(s.incumbent_bound.value),
                        bound_rx2: Some(s.licensee_bound.value),
                        mc_rx1: None,
                        mc_se_rx1: None,
                        mc_rx2: None,
                        mc_se_rx2: None,
                        feasible: s.feasible,
                        selected: i == selection.selected,
                    });
                }
            }
            Scheme::InterferenceTemperature => {
                let it = interference_temperature_scheme(cfg, &cov)?;
                let kinds = [BeamformerKind::Mf, BeamformerKind::Szf];
                jobs.push(physical_job(kinds, it.powers, &selection));
                rows.push(baseline_row(
                    axis_value,
                    scheme,
                    "IT",
                    kinds.map(|k| k.to_string()),
                    &it,
                ));
                report.inttemp = Some(it);
            }
            Scheme::Benchmark => {
                let b = coordination_benchmark(cfg, &cov)?;
                let model = BenchmarkModel::new(&cov);
                jobs.push(McJob {
                    powers: b.powers,
                    model: RateModel::Idealized {
                        min_cross: Side::BOTH.map(|rx| model.min_cross_gain(rx)),
                    },
                });
                rows.push(baseline_row(
                    axis_value,
                    scheme,
                    "BENCH",
                    ["IDEAL".into(), "IDEAL".into()],
                    &b,
                ));
                report.benchmark = Some(b);
            }
        }
    }

    let estimates = mc_ergodic_rates(&cov, &jobs, cfg.n_samples, cfg.seed, point_index, workers)?;
    for (row, est) in rows.iter_mut().zip(&estimates) {
        row.mc_rx1 = Some(est[0].mean);
        row.mc_se_rx1 = Some(est[0].std_error);
        row.mc_rx2 = Some(est[1].mean);
        row.mc_se_rx2 = Some(est[1].std_error);
    }
    report.selection = Some(selection);
    report.rows = rows;
    Ok(report)
}

fn baseline_row(axis_value: f64, scheme: Scheme, strategy: &str, kinds: [String; 2], b: &BaselineResult) -> ReportRow {
    let [kind1, kind2] = kinds;
    ReportRow {
        axis_value,
        scheme,
        strategy: strategy.into(),
        kind1,
        kind2,
        policy: b.policy.to_string(),
        p1: Some(b.powers[0]),
        p2: Some(b.powers[1]),
        bound_rx1: Some(b.incumbent_rate.value),
        bound_rx2: Some(b.licensee_rate.value),
        mc_rx1: None,
        mc_se_rx1: None,
        mc_rx2: None,
        mc_se_rx2: None,
        feasible: true,
        selected: true,
    }
}

/// Runs every point of `spec` in order. Infeasible points are reported with
/// empty rows rather than failing the sweep.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepReport> {
    spec.validate()?;
    let points = spec
        .points
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            run_point(
                &spec.axis.apply(&spec.base, v),
                v,
                i as u64,
                &spec.schemes,
                spec.workers,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport {
        axis: spec.axis,
        points,
    })
}
