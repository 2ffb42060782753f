//! Deterministic parallel Monte Carlo averaging.
//!
//! Samples are grouped into fixed-size blocks. Block `b` of stream `s`
//! always draws from [`substream`]`(seed, s, b)`, and block partial sums are
//! merged in block order with compensated summation, so the estimate is the
//! same bit pattern whatever the number of worker threads.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::substream;
use crate::{Error, Result};

pub const BLOCK_SIZE: usize = 1024;

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl McEstimate {
    /// `|value - mean|` in units of standard errors. A zero standard error
    /// gives 0 for an exact match and infinity otherwise.
    pub fn z_score(&self, value: f64) -> f64 {
        let d = (value - self.mean).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.std_error
        }
    }
}

/// Neumaier compensated sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

#[derive(Debug, Clone, Default)]
struct Moments {
    sum: Vec<CompensatedSum>,
    sum_sq: Vec<CompensatedSum>,
}

impl Moments {
    fn new(width: usize) -> Self {
        Self {
            sum: vec![CompensatedSum::default(); width],
            sum_sq: vec![CompensatedSum::default(); width],
        }
    }
}

/// Runs `n_samples` draws of `draw`, which writes `width` outputs per
/// sample, and returns one estimate per output.
///
/// `workers = 0` uses the global rayon pool; any other value runs on a
/// dedicated pool of that size.
pub fn estimate<F>(
    n_samples: usize,
    width: usize,
    seed: u64,
    stream: u64,
    workers: usize,
    draw: F,
) -> Result<Vec<McEstimate>>
where
    F: Fn(&mut ChaCha8Rng, &mut [f64]) + Sync,
{
    if n_samples < 2 {
        return Err(Error::Invalid(format!("need at least 2 samples, got {n_samples}")));
    }
    let blocks = n_samples.div_ceil(BLOCK_SIZE);
    let run_block = |b: usize| {
        let mut rng = substream(seed, stream, b as u64);
        let mut m = Moments::new(width);
        let mut out = vec![0.0; width];
        let len = BLOCK_SIZE.min(n_samples - b * BLOCK_SIZE);
        for _ in 0..len {
            draw(&mut rng, &mut out);
            for (k, &x) in out.iter().enumerate() {
                m.sum[k].add(x);
                m.sum_sq[k].add(x * x);
            }
        }
        m
    };
    let partials: Vec<Moments> = if workers == 0 {
        (0..blocks).into_par_iter().map(run_block).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Invalid(format!("cannot start {workers} workers: {e}")))?;
        pool.install(|| (0..blocks).into_par_iter().map(run_block).collect())
    };

    let mut total = Moments::new(width);
    for p in &partials {
        for k in 0..width {
            total.sum[k].add(p.sum[k].value());
            total.sum_sq[k].add(p.sum_sq[k].value());
        }
    }
    let n = n_samples as f64;
    Ok((0..width)
        .map(|k| {
            let mean = total.sum[k].value() / n;
            let var = ((total.sum_sq[k].value() - n * mean * mean) / (n - 1.0)).max(0.0);
            McEstimate {
                mean,
                std_error: (var / n).sqrt(),
                samples: n_samples,
            }
        })
        .collect())
}
