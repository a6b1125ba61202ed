//! Periodic high-intensity limits (period T = 1): every slot brings n
//! customers scattered by F with fresh services, the fluid limit counts
//! whole slots, and the diffusion limit Z̃ chains one Gaussian Z per slot.
//! With recurring epochs the bridge part of Z is the same in every slot.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::path::{bridge_min, brownian_at_clock, GridPath, GridSpec};
use crate::quadrature::{integrate, QuadratureOptions};
pub use crate::queue::ArrivalPattern;
use crate::rng::RandomStream;
use crate::scalar::Real;
use crate::scatter::ScatterModel;
use crate::service::{ServiceModel, ServiceMoments};
use crate::special::normal_cdf;

/// p_t = ⌈t⌉, the slot containing t (slot 0 is {0}).
pub fn slot_index<T: Real>(t: T) -> usize {
    t.ceil().max(T::zero()).to_usize().unwrap_or(usize::MAX)
}

/// (p_t − p_s)EV₁ + EV₁(F_{p_t}(t) − F_{p_s}(s)) with F_m(u) = F(u − (m−1)).
pub fn periodic_fluid<T: Real>(s: T, t: T, service: &ServiceModel<T>, scatter: &ScatterModel<T>) -> Result<T> {
    if !(s >= T::zero() && s < t) {
        return Err(Error::domain(format!("need 0 ≤ s < t, got s = {s}, t = {t}")));
    }
    let local = |u: T| {
        let p = slot_index(u);
        let shift = T::from_usize(p).unwrap() - T::one();
        (p, scatter.cdf(u - shift))
    };
    let (ps, fs) = local(s);
    let (pt, ft) = local(t);
    let slots = T::from_usize(pt - ps).unwrap();
    Ok(service.mean() * (slots + ft - fs))
}

/// Which version of φ(λ′, a) enters the transient integrand for λ′ < 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhiBranch {
    /// φ := 0 for λ′ < 0: a mixture of distribution functions, hence a
    /// distribution function itself.
    #[default]
    Clamped,
    /// The closed-form expression also for negative λ′. Not monotone in λ
    /// at finite t, but it is the branch that tends to the steady law.
    Analytic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodicGaussParams<T> {
    pub a: T,
    pub moments: ServiceMoments<T>,
    pub t: T,
    #[serde(default)]
    pub branch: PhiBranch,
    #[serde(default)]
    pub pattern: ArrivalPattern,
}

impl<T: Real> PeriodicGaussParams<T> {
    pub fn new(a: T, moments: ServiceMoments<T>, t: T) -> Result<Self> {
        let p = Self {
            a,
            moments,
            t,
            branch: PhiBranch::Clamped,
            pattern: ArrivalPattern::Recurring,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_branch(mut self, branch: PhiBranch) -> Self {
        self.branch = branch;
        self
    }

    pub fn with_pattern(mut self, pattern: ArrivalPattern) -> Self {
        self.pattern = pattern;
        self
    }

    pub fn with_t(mut self, t: T) -> Self {
        self.t = t;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t >= T::one()) || !self.t.is_finite() {
            return Err(Error::domain(format!("periodic laws need t ≥ 1, got {}", self.t)));
        }
        if !self.a.is_finite() || !(self.moments.second_moment() > T::zero()) {
            return Err(Error::argument("need finite a and EV₁² > 0"));
        }
        Ok(())
    }

    pub fn slot(&self) -> usize {
        slot_index(self.t)
    }

    /// σ_V² < EV₁², the condition for a steady state.
    pub fn steady_state_exists(&self) -> bool {
        self.moments.variance < self.moments.second_moment()
            && self.moments.variance * T::lit(1.0 + 1e-12) < self.moments.second_moment()
    }

    fn require_steady(&self) -> Result<()> {
        if self.steady_state_exists() {
            Ok(())
        } else {
            Err(Error::precondition(
                "steady state needs σ_V² < EV₁²",
                Some(self.moments.second_moment().f64()),
            ))
        }
    }
}

/// Exponent −2λ(λ+a)/EV₁² + 2λ²σ_V²/(EV₁²)² shared by the steady laws.
fn steady_exponent<T: Real>(lambda: T, a: T, m: &ServiceMoments<T>) -> T {
    let ev2 = m.second_moment();
    let two = T::lit(2.0);
    -two * lambda * (lambda + a) / ev2 + two * lambda * lambda * m.variance / (ev2 * ev2)
}

/// φ(λ, a) = 1 − exp(−2λ(λ+a)/EV₁² + 2λ²σ_V²/(EV₁²)²), clamped to [0, 1]
/// (and 0 for λ < 0).
pub fn phi_steady<T: Real>(lambda: T, a: T, moments: &ServiceMoments<T>) -> T {
    if lambda <= T::zero() {
        return T::zero();
    }
    phi_analytic(lambda, a, moments).max(T::zero()).min(T::one())
}

/// The unclamped expression.
pub fn phi_analytic<T: Real>(lambda: T, a: T, moments: &ServiceMoments<T>) -> T {
    -steady_exponent(lambda, a, moments).exp_m1()
}

/// 1 − exp(−2x(1+x)): deterministic unit service, drift 1.
pub fn det_service_steady<T: Real>(x: T) -> T {
    if x <= T::zero() {
        return T::zero();
    }
    -(T::lit(-2.0) * x * (T::one() + x)).exp_m1()
}

/// φ(λ,a)Φ(a) + (2π)^{−1/2}∫_a^∞ φ(λ − σ_V(p_t−1)x, a)e^{−x²/2}dx.
///
/// Evaluated for any σ_V; only the steady-state claims need σ_V² < EV₁².
pub fn periodic_transient_cdf<T: Real>(lambda: T, params: &PeriodicGaussParams<T>) -> Result<T> {
    params.validate()?;
    let m = &params.moments;
    let a = params.a;
    let head = phi_steady(lambda, a, m);
    let p = params.slot();
    if p <= 1 || m.variance == T::zero() {
        return Ok(head);
    }
    let scale = m.std_dev() * T::from_usize(p - 1).unwrap();
    let branch = params.branch;
    let inner = |x: T| {
        let l = lambda - scale * x;
        let phi = match branch {
            PhiBranch::Analytic if l < T::zero() => phi_analytic(l, a, m),
            _ => phi_steady(l, a, m),
        };
        phi * (T::lit(-0.5) * x * x).exp()
    };
    let q = integrate(inner, a, a + T::lit(40.0), QuadratureOptions::with_abs_tol(1e-11))?;
    let tail = q.value / T::lit(2.0 * std::f64::consts::PI).sqrt();
    Ok((head * normal_cdf(a) + tail).max(T::zero()).min(T::one()))
}

/// 1 − Φ(a)·exp(−2λ(λ+a)/EV₁² + 2λ²σ_V²/(EV₁²)²).
pub fn periodic_steady_cdf<T: Real>(lambda: T, params: &PeriodicGaussParams<T>) -> Result<T> {
    params.require_steady()?;
    if lambda < T::zero() {
        return Ok(T::zero());
    }
    let e = steady_exponent(lambda, params.a, &params.moments).exp();
    Ok(T::one() - normal_cdf(params.a) * e)
}

/// Sorted, deduplicated clock points in [0, 1].
fn clock_union(points: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut u: Vec<f64> = points.into_iter().collect();
    u.sort_by(f64::total_cmp);
    u.dedup_by(|x, y| (*x - *y).abs() <= 1e-14);
    u
}

/// B⁰ at the clock points `u` of one slot: fresh for [`ArrivalPattern::Fresh`],
/// read off the shared bridge for recurring epochs.
fn slot_bridge(u: &[f64], shared: Option<&(Vec<f64>, Vec<f64>)>, rng: &mut RandomStream) -> Vec<f64> {
    match shared {
        Some((clock, b0)) => u
            .iter()
            .map(|&x| {
                let j = clock.partition_point(|&c| c < x - 1e-14);
                b0[j.min(b0.len() - 1)]
            })
            .collect(),
        None => {
            let (w, w1) = brownian_at_clock(u, rng);
            w.iter().zip(u).map(|(w, u)| w - u * w1).collect()
        }
    }
}

fn shared_bridge(pattern: ArrivalPattern, clock: Vec<f64>, rng: &mut RandomStream) -> Option<(Vec<f64>, Vec<f64>)> {
    (pattern == ArrivalPattern::Recurring).then(|| {
        let (w, w1) = brownian_at_clock(&clock, rng);
        let b0 = w.iter().zip(&clock).map(|(w, u)| w - u * w1).collect();
        (clock, b0)
    })
}

/// Z̃ on a grid over [0, K] (uniform F): slot k contributes
/// σ_V·B_k(u) + EV₁·B⁰(u) on top of σ_V·Σ_{l<k} B_l(1), with B⁰ shared by
/// all slots (recurring epochs) or fresh per slot.
pub fn periodic_z_path(
    moments: &ServiceMoments<f64>,
    pattern: ArrivalPattern,
    grid: GridSpec<f64>,
    rng: &mut RandomStream,
) -> Result<GridPath<f64>> {
    if grid.t0 != 0.0 {
        return Err(Error::argument("periodic grid must start at 0"));
    }
    let times = grid.times();
    let local = |t: f64| (t - (slot_index(t).max(1) - 1) as f64).clamp(0.0, 1.0);
    let shared = shared_bridge(pattern, clock_union(times.iter().map(|&t| local(t))), rng);
    let mut values = vec![0.0; times.len()];
    let sd = moments.std_dev();
    let mut offset = 0.0;
    let mut i = 1;
    let mut k = 1;
    while i < times.len() {
        let start = i;
        let base = (k - 1) as f64;
        while i < times.len() && slot_index(times[i]) <= k {
            i += 1;
        }
        let u: Vec<f64> = times[start..i].iter().map(|&t| (t - base).clamp(0.0, 1.0)).collect();
        let b0 = slot_bridge(&u, shared.as_ref(), rng);
        let (b, b1) = brownian_at_clock(&u, rng);
        for j in 0..u.len() {
            values[start + j] = offset + moments.mean * b0[j] + sd * b[j];
        }
        offset += sd * b1;
        k += 1;
    }
    Ok(GridPath { grid, values })
}

/// One draw of Ŵ(t) = sup_{s≤t}(Z̃(t) − Z̃(s) − a(t − s)) with
/// `cells_per_period` cells per slot. Each cell is a Brownian bridge of
/// variance EV₁²·Δ and its minimum is drawn from that law: exact for fresh
/// epochs, while for recurring epochs it ignores that the B⁰ excursion inside
/// a cell is the same in every slot, so use finer cells there.
pub fn periodic_workload_at(params: &PeriodicGaussParams<f64>, cells_per_period: usize, rng: &mut RandomStream) -> Result<f64> {
    params.validate()?;
    if cells_per_period == 0 {
        return Err(Error::argument("need at least one cell per period"));
    }
    let m = &params.moments;
    let (sd, ev2) = (m.std_dev(), m.second_moment());
    let h = 1.0 / cells_per_period as f64;
    let p = params.slot();
    let mut offset = 0.0;
    let mut prev = 0.0;
    let mut lo: f64 = 0.0;
    let last = params.t - (p - 1) as f64;
    let cells = (1..=cells_per_period).map(|j| j as f64 * h);
    let shared = shared_bridge(params.pattern, clock_union(cells.chain([last])), rng);
    for k in 1..=p {
        let end = if k == p { last } else { 1.0 };
        let mut u: Vec<f64> = (1..=cells_per_period).map(|j| j as f64 * h).filter(|&x| x < end).collect();
        u.push(end);
        let b0 = slot_bridge(&u, shared.as_ref(), rng);
        let (b, b1) = brownian_at_clock(&u, rng);
        let mut prev_u = 0.0;
        for j in 0..u.len() {
            let x = offset + m.mean * b0[j] + sd * b[j] - params.a * ((k - 1) as f64 + u[j]);
            lo = lo.min(bridge_min(prev, x, ev2 * (u[j] - prev_u), rng.uniform_pos()));
            prev = x;
            prev_u = u[j];
        }
        offset += sd * b1;
    }
    Ok(prev - lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::Replicator;
    use crate::path::{bridge_max, EmpiricalCdf};
    use approx::assert_relative_eq;

    /// EV₁² = 1, σ_V² = 0.25.
    fn moments() -> ServiceMoments<f64> {
        ServiceMoments::new(0.75f64.sqrt(), 0.25).unwrap()
    }

    #[test]
    fn fluid_values() {
        let svc = ServiceModel::Exponential { mean: 2.0 };
        let f = ScatterModel::unit_uniform();
        assert_relative_eq!(periodic_fluid(2.1, 2.6, &svc, &f).unwrap(), 1.0, epsilon = 1e-12);
        for &s in &[0.0, 0.3, 1.7] {
            assert_relative_eq!(periodic_fluid(s, s + 1.0, &svc, &f).unwrap(), 2.0, epsilon = 1e-12);
        }
        assert_relative_eq!(periodic_fluid(0.5, 3.25, &svc, &f).unwrap(), 5.5, epsilon = 1e-12);
        assert!(periodic_fluid(1.0, 1.0, &svc, &f).is_err());
    }

    #[test]
    fn phi_values() {
        let m = moments();
        assert_eq!(phi_steady(0.0, 0.5, &m), 0.0);
        assert_relative_eq!(phi_steady(1.0, 0.5, &m), 1.0 - (-2.5f64).exp(), epsilon = 1e-14);
        let doob = ServiceMoments::new(1.0, 0.0).unwrap();
        assert_relative_eq!(phi_steady(0.7, 0.3, &doob), 1.0 - (-2.0 * 0.7 * 1.0f64).exp(), epsilon = 1e-14);
        assert_eq!(det_service_steady(0.0), 0.0);
        assert_relative_eq!(det_service_steady(1.0), 1.0 - (-4.0f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn phi_matches_one_period_supremum() {
        // P(sup_{u≤1}(σ_V B(u) + EV₁ B⁰(u) − a u) ≤ λ), exact cell maxima
        let m = moments();
        let cells = 32;
        let h = 1.0 / cells as f64;
        let u: Vec<f64> = (1..=cells).map(|j| j as f64 * h).collect();
        let hits = Replicator::new(61).run(100_000, |rng, _| {
            let (w, w1) = brownian_at_clock(&u, rng);
            let (b, _) = brownian_at_clock(&u, rng);
            let (mut prev, mut hi) = (0.0, 0.0f64);
            for j in 0..cells {
                let x = m.mean * (w[j] - u[j] * w1) + m.std_dev() * b[j] - 0.5 * u[j];
                hi = hi.max(bridge_max(prev, x, h, rng.uniform_pos()));
                prev = x;
            }
            (hi <= 1.0) as u8 as f64
        });
        let p = hits.iter().sum::<f64>() / hits.len() as f64;
        assert!((p - phi_steady(1.0, 0.5, &m)).abs() <= 0.01, "{p}");
    }

    #[test]
    fn transient_reduces_to_phi_in_first_period() {
        let m = moments();
        for &t in &[1.0, 1.0] {
            let p = PeriodicGaussParams::new(0.5, m, t).unwrap();
            for &l in &[0.0, 0.3, 1.0, 2.5] {
                assert_eq!(periodic_transient_cdf(l, &p).unwrap(), phi_steady(l, 0.5, &m));
            }
        }
    }

    #[test]
    fn transient_converges_to_steady() {
        let p = PeriodicGaussParams::new(0.5, moments(), 1000.0)
            .unwrap()
            .with_branch(PhiBranch::Analytic);
        for &l in &[0.0, 0.2, 0.5, 1.0, 2.0, 4.0] {
            let a = periodic_transient_cdf(l, &p).unwrap();
            let b = periodic_steady_cdf(l, &p).unwrap();
            assert!((a - b).abs() <= 1e-6, "λ={l}: {a} vs {b}");
        }
    }

    #[test]
    fn clamped_branch_limits_to_atom_mixture() {
        let p = PeriodicGaussParams::new(0.5, moments(), 1000.0).unwrap();
        let v = periodic_transient_cdf(1.0, &p).unwrap();
        assert!((v - phi_steady(1.0, 0.5, &moments()) * normal_cdf(0.5)).abs() < 1e-9);
    }

    #[test]
    fn steady_values() {
        let p = PeriodicGaussParams::new(0.5, moments(), 1.0).unwrap();
        assert_relative_eq!(periodic_steady_cdf(0.0, &p).unwrap(), 1.0 - normal_cdf(0.5), epsilon = 1e-15);
        assert_relative_eq!(periodic_steady_cdf(1.0, &p).unwrap(), 0.943241, epsilon = 1e-5);
        assert!(periodic_steady_cdf(50.0, &p).unwrap() > 1.0 - 1e-12);
        // σ_V² = EV₁² means EV₁ = 0
        let bad = PeriodicGaussParams::new(0.5, ServiceMoments::new(0.0, 1.0).unwrap(), 1.0).unwrap();
        assert!(!bad.steady_state_exists());
        assert!(matches!(periodic_steady_cdf(1.0, &bad), Err(Error::Precondition { .. })));
    }

    #[test]
    fn cdfs_bounded_and_monotone_in_lambda() {
        let m = moments();
        for &t in &[1.0, 2.0, 5.5, 25.0] {
            let p = PeriodicGaussParams::new(0.5, m, t).unwrap();
            let mut prev = -1.0;
            for i in 0..=200 {
                let v = periodic_transient_cdf(i as f64 * 0.03, &p).unwrap();
                assert!((0.0..=1.0).contains(&v) && v >= prev - 1e-12);
                prev = v;
            }
        }
    }

    #[test]
    fn clamped_cdf_non_increasing_in_t() {
        let p = PeriodicGaussParams::new(0.5, moments(), 1.0).unwrap();
        for &l in &[0.1, 0.5, 1.0, 2.0] {
            let v: Vec<f64> = (1..=30).map(|k| periodic_transient_cdf(l, &p.with_t(k as f64)).unwrap()).collect();
            assert!(v.windows(2).all(|w| w[1] <= w[0] + 1e-12), "λ={l}: {v:?}");
        }
    }

    #[test]
    fn analytic_branch_is_not_a_distribution_function() {
        let p = PeriodicGaussParams::new(0.5, moments(), 25.0)
            .unwrap()
            .with_branch(PhiBranch::Analytic);
        let v: Vec<f64> = (0..=200).map(|i| periodic_transient_cdf(i as f64 * 0.03, &p).unwrap()).collect();
        let drop = v.windows(2).map(|w| w[0] - w[1]).fold(0.0f64, f64::max);
        assert!(drop > 1e-4);
    }

    #[test]
    fn z_path_variance_at_integers() {
        let m = moments();
        let grid = GridSpec::new(0.0, 3.0, 12).unwrap();
        let paths = Replicator::new(62).run(100_000, |rng, _| periodic_z_path(&m, ArrivalPattern::Fresh, grid, rng).unwrap().values);
        for k in 1..=3 {
            let idx = 4 * k;
            let var = paths.iter().map(|v| v[idx] * v[idx]).sum::<f64>() / paths.len() as f64;
            assert!((var - 0.25 * k as f64).abs() <= 0.01 * k as f64, "k={k}: {var}");
        }
        // within the first slot the law is that of Z: Var Z(u) = EV₁²u − (EV₁)²u²
        let var = paths.iter().map(|v| v[2] * v[2]).sum::<f64>() / paths.len() as f64;
        assert!((var - (0.5 - 0.75 * 0.25)).abs() < 0.01);
    }

    #[test]
    fn recurring_bridge_correlates_slots() {
        let m = moments();
        let grid = GridSpec::new(0.0, 2.0, 4).unwrap();
        for (pattern, want) in [(ArrivalPattern::Recurring, 0.125 + 0.75 * 0.25), (ArrivalPattern::Fresh, 0.125)] {
            let paths = Replicator::new(64).run(100_000, |rng, _| periodic_z_path(&m, pattern, grid, rng).unwrap().values);
            let cov = paths.iter().map(|v| v[1] * v[3]).sum::<f64>() / paths.len() as f64;
            assert!((cov - want).abs() < 0.01, "{pattern:?}: {cov}");
        }
    }

    #[test]
    fn workload_in_first_slot_matches_single_period_law() {
        // on [0,1] Ŵ is Ψ(Z − a·e); compare against the closed form
        let m = moments();
        let p = PeriodicGaussParams::new(0.5, m, 1.0).unwrap();
        let draws = Replicator::new(63).run(20_000, |rng, _| periodic_workload_at(&p, 8, rng).unwrap());
        let ecdf = EmpiricalCdf::new(draws);
        // at t = 1 the terminal workload equals the one-period supremum law
        let ks = ecdf.ks_distance(|l| phi_steady(l, 0.5, &m));
        assert!(ks <= 0.02, "{ks}");
    }
}
