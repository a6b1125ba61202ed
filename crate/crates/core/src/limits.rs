//! Fluid and diffusion limits of the workload.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mc::Replicator;
use crate::optimize::grid_then_golden;
use crate::path::{reflected_terminal_continuous, z_process_path, EmpiricalCdf, GridPath, GridSpec};
use crate::queue::{workload_at_time, OfferedWork};
use crate::rng::RandomStream;
use crate::scalar::Real;
use crate::scatter::{Perturbation, ScatterModel};
use crate::service::{ServiceModel, ServiceMoments};
use crate::transient::{reflected_diffusion_cdf_closed, reflected_diffusion_cdf_quadrature, ReflectedLawParams};

/// Ψ(x)(t) = x(t) − min_{t0≤s≤t} x(s).
pub fn reflection_map<T: Real>(x: &GridPath<T>) -> GridPath<T> {
    let mut lo = T::infinity();
    let values = x
        .values
        .iter()
        .map(|&v| {
            lo = lo.min(v);
            v - lo
        })
        .collect();
    GridPath { grid: x.grid, values }
}

const FLUID_GRID: usize = 10_000;

/// sup_{0≤s≤t}(EV₁(F(t) − F(s)) − ρ(t − s)).
pub fn fluid_workload<T: Real>(t: T, service: &ServiceModel<T>, scatter: &ScatterModel<T>, rho: T) -> Result<T> {
    if t <= T::zero() {
        return Ok(T::zero());
    }
    let m = service.mean();
    let ft = scatter.cdf(t);
    let netput = |s: T| m * (ft - scatter.cdf(s)) - rho * (t - s);
    let (_, v) = grid_then_golden(|s| -netput(s), T::zero(), t, FLUID_GRID, T::lit(1e-8))?;
    Ok((-v).max(T::zero()))
}

/// Near-balanced regime: service rate `c = n·EV₁ + a·EV₁·√n`, scattering
/// `F(t) = b·(t + q(t)/√n)` with `b = F(∞)` the finite mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regime<T> {
    pub a: T,
    pub q: Perturbation<T>,
    /// Finite mass of the scattering law (1 for a proper law).
    pub b: T,
    pub moments: ServiceMoments<T>,
}

impl<T: Real> Regime<T> {
    pub fn balanced(a: T, moments: ServiceMoments<T>) -> Self {
        Self {
            a,
            q: Perturbation::Zero,
            b: T::one(),
            moments,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b > T::zero() && self.b <= T::one()) {
            return Err(Error::argument("finite mass b must lie in (0, 1]"));
        }
        if self.q.value(T::zero()) != T::zero() {
            return Err(Error::argument("perturbation must vanish at 0"));
        }
        Ok(())
    }

    /// EV₁(q(t) − a·t).
    pub fn drift(&self, t: T) -> T {
        self.moments.mean * (self.q.value(t) - self.a * t)
    }

    /// F(t) = b·t on [0, 1] as a scattering law.
    pub fn limit_scatter(&self) -> ScatterModel<T> {
        if self.b == T::one() {
            ScatterModel::unit_uniform()
        } else {
            ScatterModel::SubProbability {
                base: Box::new(ScatterModel::unit_uniform()),
                deficit: T::one() - self.b,
            }
        }
    }
}

/// Netput Z + EV₁(q − a·e) on the grid.
fn netput_path(regime: &Regime<f64>, grid: GridSpec<f64>, rng: &mut RandomStream) -> GridPath<f64> {
    let z = z_process_path(&regime.moments, &regime.limit_scatter(), grid, rng);
    z.map(|t, v| v + regime.drift(t))
}

/// One path of Ψ(Z + EV₁(q − a·e)).
pub fn diffusion_workload_path(regime: &Regime<f64>, grid: GridSpec<f64>, rng: &mut RandomStream) -> Result<GridPath<f64>> {
    regime.validate()?;
    Ok(reflection_map(&netput_path(regime, grid, rng)))
}

/// Ψ(Z + EV₁(q − a·e))(t) with the minimum taken over continuous time:
/// within each of the `cells` cells the netput is a Brownian bridge of
/// variance `EV₁²·b·Δ` around its (linearised) drift, and its minimum is
/// drawn exactly. Exact in law when q is linear.
pub fn diffusion_workload_at(regime: &Regime<f64>, t: f64, cells: usize, rng: &mut RandomStream) -> Result<f64> {
    regime.validate()?;
    let grid = GridSpec::new(0.0, t, cells)?;
    let x = netput_path(regime, grid, rng);
    let var = regime.moments.second_moment() * regime.b * grid.step();
    Ok(reflected_terminal_continuous(&x.values, |_| var, rng))
}

/// Law of Ψ(Z − a·EV₁·e)(t) under F(t) = b·t: the clock change u = b·t maps
/// it to the unit-mass law at time b·t with drift a·EV₁/b.
pub fn sub_probability_cdf<T: Real>(lambda: T, t: T, regime: &Regime<T>) -> Result<T> {
    regime.validate()?;
    if regime.q != Perturbation::Zero {
        return Err(Error::Unsupported("closed form needs q ≡ 0".into()));
    }
    let m = &regime.moments;
    let p = ReflectedLawParams::new(regime.b * t, lambda, regime.a * m.mean / regime.b, m.std_dev(), m.second_moment())?;
    reflected_diffusion_cdf_closed(&p)
}

/// KS distance between the law of Wₙ(t)/√n, simulated with
/// `c = n·EV₁ + a·EV₁·√n` under unit-uniform scattering, and the diffusion
/// limit at `t` (quadrature evaluator).
pub fn fclt_gap(
    n: usize,
    service: &ServiceModel<f64>,
    scatter: &ScatterModel<f64>,
    a: f64,
    reps: usize,
    t_query: f64,
    replicator: &Replicator,
) -> Result<f64> {
    let samples = fclt_samples(n, service, scatter, a, reps, t_query, replicator)?;
    fclt_ks(&samples, service, a, t_query)
}

/// KS distance of scaled workload draws from the diffusion limit at `t`.
pub fn fclt_ks(samples: &[f64], service: &ServiceModel<f64>, a: f64, t: f64) -> Result<f64> {
    let base = ReflectedLawParams::from_moments(t, 0.0, a, &service.moments())?;
    let ecdf = EmpiricalCdf::new(samples.to_vec());
    Ok(ecdf.ks_distance(|x| reflected_diffusion_cdf_quadrature(&base.with_lambda(x)).unwrap_or(f64::NAN)))
}

/// Draws of Wₙ(t)/√n for [`fclt_gap`].
pub fn fclt_samples(
    n: usize,
    service: &ServiceModel<f64>,
    scatter: &ScatterModel<f64>,
    a: f64,
    reps: usize,
    t_query: f64,
    replicator: &Replicator,
) -> Result<Vec<f64>> {
    if *scatter != ScatterModel::unit_uniform() {
        return Err(Error::Unsupported("the diffusion-limit law is available for uniform scattering on [0, 1]".into()));
    }
    if reps < 2 {
        return Err(Error::argument("need at least two replications"));
    }
    let moments = service.moments();
    let rn = (n as f64).sqrt();
    let c = n as f64 * moments.mean + a * moments.mean * rn;
    Ok(replicator.run(reps, |rng, _| {
        let ow = OfferedWork::simulate(service, scatter, n, rng);
        workload_at_time(&ow, c, t_query) / rn
    }))
}
