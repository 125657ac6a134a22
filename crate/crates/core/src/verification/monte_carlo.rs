use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function_class::F3Function;

use super::spec::DistributionSpec;

pub const MIN_SAMPLES: u64 = 100;

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub samples: u64,
}

/// Welford accumulator.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let mean = self.mean + d * other.n as f64 / n as f64;
        let m2 = self.m2 + other.m2 + d * d * (self.n as f64 * other.n as f64 / n as f64);
        Moments { n, mean, m2 }
    }
}

/// Per-variable cumulative tables for inverse-CDF sampling.
struct Sampler {
    tables: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Sampler {
    fn new(spec: &DistributionSpec) -> Self {
        let tables = spec
            .variables()
            .iter()
            .map(|v| {
                let mut acc = 0.0;
                let mut cdf = Vec::with_capacity(v.atoms().len());
                let mut vals = Vec::with_capacity(v.atoms().len());
                for a in v.atoms() {
                    acc += a.prob;
                    cdf.push(acc);
                    vals.push(a.value);
                }
                (cdf, vals)
            })
            .collect();
        Sampler { tables }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        let mut s = 0.0;
        for (cdf, vals) in &self.tables {
            let u: f64 = rng.random::<f64>() * cdf[cdf.len() - 1];
            let i = cdf.partition_point(|&c| c <= u).min(vals.len() - 1);
            s += vals[i];
        }
        s
    }
}

fn run_worker(sampler: &Sampler, f: &F3Function, n: u64, seed: u64, stream: u64) -> Moments {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut m = Moments::default();
    for _ in 0..n {
        m.push(f.value(sampler.draw(&mut rng)));
    }
    m
}

/// Single-worker Monte Carlo estimate of `E f(S)`.
pub fn monte_carlo_expectation(
    spec: &DistributionSpec,
    f: &F3Function,
    n_samples: u64,
    seed: u64,
) -> Result<McEstimate> {
    monte_carlo_expectation_workers(spec, f, n_samples, seed, 1)
}

/// Splits the samples over `workers` threads, each on its own ChaCha stream
/// of the master seed, and merges the partial moments in worker order. The
/// result depends on `(seed, n_samples, workers)` only.
pub fn monte_carlo_expectation_workers(
    spec: &DistributionSpec,
    f: &F3Function,
    n_samples: u64,
    seed: u64,
    workers: usize,
) -> Result<McEstimate> {
    if n_samples < MIN_SAMPLES {
        return Err(Error::OutOfRange {
            what: "n_samples",
            detail: format!("need at least {MIN_SAMPLES}, got {n_samples}"),
        });
    }
    if workers == 0 {
        return Err(Error::OutOfRange {
            what: "workers",
            detail: "need at least one worker".into(),
        });
    }
    let sampler = Sampler::new(spec);
    let w = workers as u64;
    let share = |i: u64| n_samples / w + u64::from(i < n_samples % w);
    let parts: Vec<Moments> = if workers == 1 {
        vec![run_worker(&sampler, f, n_samples, seed, 0)]
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..w)
                .map(|i| {
                    let sampler = &sampler;
                    scope.spawn(move || run_worker(sampler, f, share(i), seed, i))
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
        })
    };
    let m = parts.into_iter().fold(Moments::default(), Moments::merge);
    let var = if m.n > 1 { m.m2 / (m.n - 1) as f64 } else { 0.0 };
    Ok(McEstimate {
        estimate: m.mean,
        stderr: (var / m.n as f64).sqrt(),
        samples: m.n,
    })
}
