//! Discrete-event simulation of the offered work Γₙ and the workload Wₙ.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mc::{Estimate, Moments, Replicator};
use crate::path::{GridPath, GridSpec};
use crate::rng::RandomStream;
use crate::scalar::Real;
use crate::scatter::ScatterModel;
use crate::service::ServiceModel;

/// Arrival epochs with their service requirements.
#[derive(Debug, Clone, PartialEq)]
pub struct OfferedWork {
    pub arrivals: Vec<f64>,
    pub works: Vec<f64>,
    pub total: f64,
    /// Customers whose epoch fell at +∞.
    pub never_arrived: usize,
}

impl OfferedWork {
    pub fn new(arrivals: Vec<f64>, works: Vec<f64>) -> Result<Self> {
        if arrivals.len() != works.len() {
            return Err(Error::argument("arrivals and works differ in length"));
        }
        if arrivals.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::argument("arrival epochs must be sorted"));
        }
        if works.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::argument("works must be non-negative"));
        }
        let total = works.iter().sum();
        Ok(Self {
            arrivals,
            works,
            total,
            never_arrived: 0,
        })
    }

    /// n customers: sorted epochs from `scatter`, then one service draw per
    /// finite epoch, in time order.
    pub fn simulate(service: &ServiceModel<f64>, scatter: &ScatterModel<f64>, n: usize, rng: &mut RandomStream) -> Self {
        let (arrivals, never_arrived) = sorted_arrivals(scatter, n, rng);
        let works: Vec<f64> = arrivals.iter().map(|_| service.sample(rng)).collect();
        let total = works.iter().sum();
        Self {
            arrivals,
            works,
            total,
            never_arrived,
        }
    }

    pub fn len(&self) -> usize {
        self.arrivals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arrivals.is_empty()
    }

    /// Γ(s, t], left-open and right-closed.
    pub fn interval(&self, s: f64, t: f64) -> Result<f64> {
        offered_work(&self.arrivals, &self.works, s, t)
    }
}

/// Sorted i.i.d. epochs from `scatter` without a sort: uniform order
/// statistics come from normalized exponential spacings and are pushed
/// through the (monotone) quantile function.
pub fn sorted_arrivals(scatter: &ScatterModel<f64>, n: usize, rng: &mut RandomStream) -> (Vec<f64>, usize) {
    let (base, finite) = match scatter {
        ScatterModel::SubProbability { base, deficit } => {
            let finite = (0..n).filter(|_| rng.uniform() >= *deficit).count();
            (base.as_ref(), finite)
        }
        other => (other, n),
    };
    let mut acc = Vec::with_capacity(finite);
    let mut s = 0.0;
    for _ in 0..finite {
        s += rng.exp1();
        acc.push(s);
    }
    let total = s + rng.exp1();
    for a in acc.iter_mut() {
        *a = base.quantile(*a / total);
    }
    (acc, n - finite)
}

/// Γₙ(s, t] = Σ Vᵢ·1{Tᵢ ∈ (s, t]} for sorted `arrivals`.
pub fn offered_work(arrivals: &[f64], works: &[f64], s: f64, t: f64) -> Result<f64> {
    if !(s < t) {
        return Err(Error::argument(format!("offered work needs s < t, got ({s}, {t}]")));
    }
    let lo = arrivals.partition_point(|&a| a <= s);
    let hi = arrivals.partition_point(|&a| a <= t);
    Ok(works[lo..hi].iter().sum())
}

/// Cov(Γₙ(I₁), Γₙ(I₂)) = n(EV₁²·P(T₁ ∈ I₁∩I₂) − (EV₁)²·P(T₁ ∈ I₁)P(T₁ ∈ I₂)).
pub fn offered_cov<T: Real>(
    service: &ServiceModel<T>,
    scatter: &ScatterModel<T>,
    n: u64,
    i1: (T, T),
    i2: (T, T),
) -> T {
    let overlap = scatter.mass(i1.0.max(i2.0), i1.1.min(i2.1));
    let p1 = scatter.mass(i1.0, i1.1);
    let p2 = scatter.mass(i2.0, i2.1);
    let m = service.mean();
    T::from_u64(n).unwrap() * (service.second_moment() * overlap - m * m * p1 * p2)
}

/// Workload at the sorted query times `times` for an initially empty
/// server of rate `c`; arrivals at or before time 0 cancel out of the
/// reflection and are ignored.
pub fn workload_at(offered: &OfferedWork, c: f64, times: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(times.len());
    let mut w = 0.0;
    let mut clock = 0.0;
    let start = offered.arrivals.partition_point(|&a| a <= 0.0);
    let mut k = start;
    for &t in times {
        while k < offered.arrivals.len() && offered.arrivals[k] <= t {
            let a = offered.arrivals[k];
            w = (w - c * (a - clock)).max(0.0) + offered.works[k];
            clock = a;
            k += 1;
        }
        if t <= 0.0 {
            out.push(0.0);
        } else {
            out.push((w - c * (t - clock)).max(0.0));
        }
    }
    out
}

/// Single-time workload; cheaper than a grid when only Wₙ(t) matters.
pub fn workload_at_time(offered: &OfferedWork, c: f64, t: f64) -> f64 {
    workload_at(offered, c, &[t])[0]
}

/// Largest workload on `[0, t1]`, attained just after an arrival.
pub fn workload_sup(offered: &OfferedWork, c: f64, t1: f64) -> f64 {
    let mut w: f64 = 0.0;
    let mut clock = 0.0;
    let mut best: f64 = 0.0;
    for (&a, &v) in offered.arrivals.iter().zip(&offered.works) {
        if a <= 0.0 {
            continue;
        }
        if a > t1 {
            break;
        }
        w = (w - c * (a - clock)).max(0.0) + v;
        clock = a;
        best = best.max(w);
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    Raw,
    /// Wₙ/n
    Fluid,
    /// Wₙ/√n
    Diffusion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadRealization {
    pub path: GridPath<f64>,
    pub n: usize,
    pub c: f64,
    pub scaling: Scaling,
}

impl WorkloadRealization {
    pub fn rescaled(&self, scaling: Scaling) -> Self {
        let factor = |s: Scaling| match s {
            Scaling::Raw => 1.0,
            Scaling::Fluid => self.n as f64,
            Scaling::Diffusion => (self.n as f64).sqrt(),
        };
        let k = factor(self.scaling) / factor(scaling);
        Self {
            path: self.path.map(|_, v| v * k),
            n: self.n,
            c: self.c,
            scaling,
        }
    }
}

/// Event-exact workload sampled on `grid` (raw scale).
pub fn workload_path(offered: &OfferedWork, c: f64, grid: GridSpec<f64>) -> Result<WorkloadRealization> {
    if !(c > 0.0) {
        return Err(Error::argument("service rate must be positive"));
    }
    let values = workload_at(offered, c, &grid.times());
    Ok(WorkloadRealization {
        path: GridPath { grid, values },
        n: offered.len() + offered.never_arrived,
        c,
        scaling: Scaling::Raw,
    })
}

/// How arrival epochs relate across periods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArrivalPattern {
    /// The same n epochs recur in every period (customer i arrives at
    /// (l−1)T + T·τᵢ in slot l); services are fresh in each slot.
    #[default]
    Recurring,
    /// Fresh epochs and services in every slot.
    Fresh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicConfig {
    #[serde(default = "one")]
    pub period: f64,
    pub num_periods: usize,
    pub n: usize,
    pub scatter: ScatterModel<f64>,
    #[serde(default)]
    pub pattern: ArrivalPattern,
}

fn one() -> f64 {
    1.0
}

impl PeriodicConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.period > 0.0) || self.num_periods == 0 {
            return Err(Error::argument("periodic model needs T > 0 and at least one period"));
        }
        self.scatter.validate()
    }

    pub fn horizon(&self) -> f64 {
        self.period * self.num_periods as f64
    }

    /// Offered work of all slots: slot l has n customers at epochs
    /// (l−1)T + T·τ with τ ~ F (recurring or fresh, see [`ArrivalPattern`])
    /// and fresh services.
    pub fn simulate(&self, service: &ServiceModel<f64>, rng: &mut RandomStream) -> OfferedWork {
        let mut arrivals = Vec::with_capacity(self.n * self.num_periods);
        let mut works = Vec::with_capacity(self.n * self.num_periods);
        let mut never = 0;
        let mut sorted = true;
        let mut epochs: Option<Vec<f64>> = None;
        for l in 0..self.num_periods {
            let slot = match (self.pattern, &epochs) {
                (ArrivalPattern::Recurring, Some(e)) => OfferedWork {
                    arrivals: e.clone(),
                    works: e.iter().map(|_| service.sample(rng)).collect(),
                    total: 0.0,
                    never_arrived: self.n - e.len(),
                },
                _ => {
                    let slot = OfferedWork::simulate(service, &self.scatter, self.n, rng);
                    if self.pattern == ArrivalPattern::Recurring {
                        epochs = Some(slot.arrivals.clone());
                    }
                    slot
                }
            };
            let shift = self.period * l as f64;
            for (a, v) in slot.arrivals.into_iter().zip(slot.works) {
                let a = shift + self.period * a;
                sorted &= arrivals.last().is_none_or(|&p| p <= a);
                arrivals.push(a);
                works.push(v);
            }
            never += slot.never_arrived;
        }
        if !sorted {
            let mut idx: Vec<usize> = (0..arrivals.len()).collect();
            idx.sort_by(|&i, &j| arrivals[i].total_cmp(&arrivals[j]).then(i.cmp(&j)));
            arrivals = idx.iter().map(|&i| arrivals[i]).collect();
            works = idx.iter().map(|&i| works[i]).collect();
        }
        let total = works.iter().sum();
        OfferedWork {
            arrivals,
            works,
            total,
            never_arrived: never,
        }
    }
}

/// Workload of the periodic model on `grid`.
pub fn periodic_workload_path(
    cfg: &PeriodicConfig,
    service: &ServiceModel<f64>,
    c: f64,
    grid: GridSpec<f64>,
    rng: &mut RandomStream,
) -> Result<WorkloadRealization> {
    cfg.validate()?;
    let offered = cfg.simulate(service, rng);
    let mut w = workload_path(&offered, c, grid)?;
    w.n = cfg.n;
    Ok(w)
}

/// Plain Monte Carlo for P(Wₙ(t) > n·x) with c = n·c′.
#[allow(clippy::too_many_arguments)]
pub fn crude_tail_estimate(
    service: &ServiceModel<f64>,
    scatter: &ScatterModel<f64>,
    t: f64,
    c_prime: f64,
    x: f64,
    n: usize,
    reps: usize,
    replicator: &Replicator,
) -> Result<Estimate> {
    if reps == 0 {
        return Err(Error::argument("need at least one replication"));
    }
    let c = n as f64 * c_prime;
    let level = n as f64 * x;
    let hits = replicator.run(reps, |rng, _| {
        let offered = OfferedWork::simulate(service, scatter, n, rng);
        if workload_at_time(&offered, c, t) > level {
            1.0
        } else {
            0.0
        }
    });
    let m: Moments = hits.into_iter().collect();
    Ok(Estimate::from_moments(&m))
}
