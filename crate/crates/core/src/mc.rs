//! Replication driver and order-independent moment accumulation.

use rayon::prelude::*;

use crate::rng::RandomStream;

/// Runs independent replications; replication `k` uses stream
/// `(seed, stream_offset + k)`.
#[derive(Debug, Clone, Copy)]
pub struct Replicator {
    pub seed: u64,
    pub workers: usize,
    pub stream_offset: u64,
}

impl Replicator {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            workers: 0,
            stream_offset: 0,
        }
    }

    /// `0` means "use the global rayon pool".
    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn with_stream_offset(mut self, offset: u64) -> Self {
        self.stream_offset = offset;
        self
    }

    /// Results in replication order.
    pub fn run<R, F>(&self, reps: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(&mut RandomStream, usize) -> R + Sync + Send,
    {
        let seed = self.seed;
        let off = self.stream_offset;
        let job = || {
            (0..reps)
                .into_par_iter()
                .map(|k| {
                    let mut s = RandomStream::new(seed, off + k as u64);
                    f(&mut s, k)
                })
                .collect::<Vec<R>>()
        };
        if self.workers == 0 {
            job()
        } else {
            rayon::ThreadPoolBuilder::new()
                .num_threads(self.workers)
                .build()
                .expect("thread pool")
                .install(job)
        }
    }
}

/// Welford running mean / variance with an associative merge.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&self, other: &Moments) -> Moments {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let n = self.count + other.count;
        let d = other.mean - self.mean;
        let mean = self.mean + d * other.count as f64 / n as f64;
        let m2 = self.m2 + other.m2 + d * d * (self.count as f64 * other.count as f64) / n as f64;
        Moments { count: n, mean, m2 }
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_err(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

impl FromIterator<f64> for Moments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Moments::default();
        for x in iter {
            m.push(x);
        }
        m
    }
}

/// Probability estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Estimate {
    pub p: f64,
    pub std_err: f64,
    pub reps: u64,
}

impl Estimate {
    pub fn from_moments(m: &Moments) -> Self {
        Estimate {
            p: m.mean,
            std_err: m.std_err(),
            reps: m.count,
        }
    }

    /// |p₁ − p₂| / √(se₁² + se₂²).
    pub fn z_distance(&self, other: &Estimate) -> f64 {
        let se = (self.std_err.powi(2) + other.std_err.powi(2)).sqrt();
        if se == 0.0 {
            if self.p == other.p {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.p - other.p).abs() / se
        }
    }
}
