//! Statistically coordinated precoding for a two-pair MISO shared-spectrum
//! downlink.
//!
//! An incumbent TX-RX pair (index 1) shares its band with a licensee pair
//! (index 2). Each transmitter knows its own direct channel instantaneously
//! and every link only through its covariance. Both transmitters evaluate
//! the same closed-form ergodic-rate lower bounds over a finite strategy set
//! (MF or statistical ZF beamforming at each TX, one TX at full power, the
//! other power-controlled by bisection) and therefore agree on the strategy
//! without exchanging any instantaneous channel state.
//!
//! Module map:
//! - [`numerics`]: exponential integral and Hermitian eigen-machinery.
//! - [`channel`]: scenario configuration, covariance model, channel sampling.
//! - [`rate`]: closed-form ergodic rates and the per-receiver lower bounds.
//! - [`coordination`]: beamformers, power resolution, strategy selection.
//! - [`baselines`]: interference-temperature underlay scheme and the
//!   coordination benchmark.
//! - [`mc`]: deterministic parallel Monte Carlo averaging.
//! - [`sim`]: scheme evaluation, parameter sweeps and CSV output.
//! - [`plot`]: SVG charts of a sweep.
//! - [`verify`]: Monte Carlo cross-checks of the closed forms.

// `!(x > t)` is used on purpose so that NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod channel;
pub mod coordination;
mod error;
pub mod mc;
pub mod numerics;
pub mod plot;
pub mod rate;
pub mod sim;
pub mod verify;

pub use error::{Error, Result};

pub use baselines::{coordination_benchmark, interference_temperature_scheme, BaselineResult};
pub use channel::{build_covariances, sample_channels, ChannelDraw, CovarianceSet, ScenarioConfig, Side};
pub use coordination::{check_feasibility, select_strategy, Policy, Selection, Strategy};
pub use numerics::{EigenSystem, HermitianMatrix};
pub use rate::{bound_rate, BeamformerKind, RateBound};
pub use sim::{run_point, run_sweep, Scheme, SweepAxis, SweepReport, SweepSpec};
