//! Large deviations of P(Wₙ(t) > n·x) and importance sampling.
//!
//! For each s the work arriving in (s, t] has per-customer log-MGF
//! `v(s, θ) = log((φ(θ) − 1)(F(t) − F(s)) + 1)`; the rate attributable to s
//! is the Legendre transform `I′(s) = θ(s)x − v(s, θ(s)) + θ(s)c′(t − s)`
//! and the decay rate is `min_s I′(s)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limits::fluid_workload;
use crate::mc::{Estimate, Moments, Replicator};
use crate::optimize::{bisect_increasing, golden_section_min};
use crate::queue::{workload_at_time, OfferedWork};
use crate::rng::RandomStream;
use crate::scalar::Real;
use crate::scatter::ScatterModel;
use crate::service::ServiceModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdpProblem<T> {
    pub t: T,
    pub x: T,
    pub c_prime: T,
    pub service: ServiceModel<T>,
    pub scatter: ScatterModel<T>,
}

impl<T: Real> LdpProblem<T> {
    /// Checks that `x` exceeds the fluid workload at t (otherwise the event
    /// is not rare) and that F has a positive density on [0, t].
    pub fn new(t: T, x: T, c_prime: T, service: ServiceModel<T>, scatter: ScatterModel<T>) -> Result<Self> {
        let p = Self {
            t,
            x,
            c_prime,
            service,
            scatter,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t > T::zero()) || !(self.c_prime > T::zero()) {
            return Err(Error::argument("need t > 0 and c' > 0"));
        }
        self.service.validate()?;
        self.scatter.validate()?;
        for i in 0..=64 {
            let s = self.t * T::from_usize(i).unwrap() / T::lit(64.0);
            if !(self.scatter.density(s) > T::zero()) {
                return Err(Error::precondition(
                    format!("scattering density vanishes at s = {s} inside [0, t]"),
                    None,
                ));
            }
        }
        let threshold = self.x_threshold()?;
        if !(self.x > threshold) {
            return Err(Error::precondition(
                format!("x = {} must exceed the fluid workload {threshold} at t", self.x),
                Some(threshold.f64()),
            ));
        }
        Ok(())
    }

    /// sup_{0≤s≤t}(EV₁(F(t) − F(s)) − c′(t − s)).
    pub fn x_threshold(&self) -> Result<T> {
        fluid_workload(self.t, &self.service, &self.scatter, self.c_prime)
    }

    fn mass(&self, s: T) -> T {
        self.scatter.mass(s, self.t)
    }

    fn target(&self, s: T) -> T {
        self.x + self.c_prime * (self.t - s)
    }
}

/// v(s, θ).
pub fn log_mgf_v<T: Real>(s: T, theta: T, p: &LdpProblem<T>) -> Result<T> {
    check_s(s, p)?;
    let phi = p.service.mgf(theta)?;
    Ok(((phi - T::one()) * p.mass(s)).ln_1p())
}

/// ∂v/∂θ(s, θ) = φ′(θ)ΔF / ((φ(θ) − 1)ΔF + 1).
pub fn log_mgf_v_slope<T: Real>(s: T, theta: T, p: &LdpProblem<T>) -> Result<T> {
    check_s(s, p)?;
    let df = p.mass(s);
    let phi = p.service.mgf(theta)?;
    let dphi = p.service.tilted_mean_weight(theta)?;
    Ok(dphi * df / ((phi - T::one()) * df + T::one()))
}

/// ∂v/∂θ at θ = θ_max − `gap` (see [`ServiceModel::mgf_pair_below_max`]).
pub fn log_mgf_v_slope_below_max<T: Real>(s: T, gap: T, p: &LdpProblem<T>) -> Result<T> {
    check_s(s, p)?;
    if !(gap > T::zero()) {
        return Err(Error::domain("gap to θ_max must be positive"));
    }
    let (phi, dphi) = p
        .service
        .mgf_pair_below_max(gap)
        .ok_or_else(|| Error::Unsupported("service law has no finite θ_max".into()))?;
    let df = p.mass(s);
    Ok(dphi * df / ((phi - T::one()) * df + T::one()))
}

fn check_s<T: Real>(s: T, p: &LdpProblem<T>) -> Result<()> {
    if s >= T::zero() && s <= p.t {
        Ok(())
    } else {
        Err(Error::domain(format!("s = {s} outside [0, {}]", p.t)))
    }
}

/// The θ > 0 solving ∂v/∂θ(s, θ) = x + c′(t − s).
pub fn theta_root<T: Real>(s: T, p: &LdpProblem<T>) -> Result<T> {
    check_s(s, p)?;
    let tm = p.service.theta_max();
    if tm.is_finite() {
        return Ok(tm - theta_gap(s, p)?);
    }
    let target = p.target(s);
    let g = |th: T| log_mgf_v_slope(s, th, p).map(|v| v - target);
    if g(T::zero())? >= T::zero() {
        return Err(not_rare());
    }
    let mut hi = T::one();
    let hi = loop {
        match g(hi) {
            Ok(v) if v >= T::zero() => break hi,
            Ok(v) if v.is_finite() && hi < T::lit(1e6) => hi = hi + hi,
            _ => {
                return Err(Error::RootNotFound {
                    target: target.f64(),
                    supremum: p.service.sup_support().f64(),
                })
            }
        }
    };
    Ok(bisect_increasing(|th| g(th).unwrap_or(T::infinity()), T::zero(), hi, 200))
}

fn not_rare() -> Error {
    Error::precondition("slope target below the nominal mean; event not rare", None)
}

/// θ_max − θ(s) for laws with a finite θ_max, solved on u = ln(θ_max/gap)
/// so that roots within a few ulps of θ_max are still resolved.
pub fn theta_gap<T: Real>(s: T, p: &LdpProblem<T>) -> Result<T> {
    check_s(s, p)?;
    let tm = p.service.theta_max();
    if !tm.is_finite() {
        return Err(Error::Unsupported("service law has no finite θ_max".into()));
    }
    let target = p.target(s);
    if log_mgf_v_slope(s, T::zero(), p)? >= target {
        return Err(not_rare());
    }
    let gap = |u: T| tm * (-u).exp();
    let g = |u: T| log_mgf_v_slope_below_max(s, gap(u), p).map_or(T::infinity(), |v| v - target);
    let mut hi = T::one();
    while !(g(hi) >= T::zero()) {
        if hi > T::lit(600.0) {
            return Err(Error::RootNotFound {
                target: target.f64(),
                supremum: log_mgf_v_slope_below_max(s, gap(hi), p)?.f64(),
            });
        }
        hi = hi + hi;
    }
    // g(0) is the slope at θ = 0 minus the target: negative
    let u = bisect_increasing(g, T::zero(), hi, 400);
    Ok(gap(u))
}

/// I′(s) = θ(s)x − v(s, θ(s)) + θ(s)c′(t − s); `+∞` at s = t.
pub fn rate_value<T: Real>(s: T, p: &LdpProblem<T>) -> Result<T> {
    if s >= p.t {
        return Ok(T::infinity());
    }
    let th = theta_root(s, p)?;
    Ok(th * p.target(s) - log_mgf_v(s, th, p)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateProfile<T> {
    pub s: Vec<T>,
    pub theta: Vec<T>,
    /// θ_max − θ(s) (infinite when θ_max is).
    pub gap: Vec<T>,
    pub rate: Vec<T>,
    pub t_star: T,
    pub rate_min: T,
}

/// θ(s) and I′(s) on `points` equally spaced s in [0, t − 10⁻⁶].
pub fn rate_profile<T: Real>(p: &LdpProblem<T>, points: usize) -> Result<RateProfile<T>> {
    let (t_star, rate_min) = rate_minimize(p)?;
    let right = p.t - T::lit(1e-6);
    let mut s = Vec::with_capacity(points);
    let mut theta = Vec::with_capacity(points);
    let mut gap = Vec::with_capacity(points);
    let mut rate = Vec::with_capacity(points);
    for i in 0..points {
        let si = right * T::from_usize(i).unwrap() / T::from_usize(points.max(2) - 1).unwrap();
        let th = theta_root(si, p)?;
        s.push(si);
        theta.push(th);
        gap.push(if p.service.theta_max().is_finite() {
            theta_gap(si, p)?
        } else {
            T::infinity()
        });
        rate.push(th * p.target(si) - log_mgf_v(si, th, p)?);
    }
    Ok(RateProfile {
        s,
        theta,
        gap,
        rate,
        t_star,
        rate_min,
    })
}

/// (t*, I′(t*)): 10³-point scan of [0, t − 10⁻⁶] plus golden-section refinement.
pub fn rate_minimize<T: Real>(p: &LdpProblem<T>) -> Result<(T, T)> {
    rate_minimize_with(p, 1000, T::zero())
}

/// As [`rate_minimize`] with the scan grid shifted by `phase` cells.
pub fn rate_minimize_with<T: Real>(p: &LdpProblem<T>, points: usize, phase: T) -> Result<(T, T)> {
    p.validate()?;
    let right = p.t - T::lit(1e-6);
    let step = right / T::from_usize(points - 1).unwrap();
    let mut grid: Vec<T> = (0..points)
        .map(|i| (step * (T::from_usize(i).unwrap() + phase)).min(right))
        .collect();
    grid.insert(0, T::zero());
    grid.dedup();
    let mut best = (T::zero(), T::infinity(), 0usize);
    for (i, &s) in grid.iter().enumerate() {
        let r = rate_value(s, p)?;
        if r < best.1 {
            best = (s, r, i);
        }
    }
    let lo = if best.2 == 0 { grid[0] } else { grid[best.2 - 1] };
    let hi = if best.2 + 1 >= grid.len() { right } else { grid[best.2 + 1] };
    let (s, r) = golden_section_min(|s| rate_value(s, p).unwrap_or(T::infinity()), lo, hi, T::lit(1e-10));
    Ok(if r <= best.1 { (s, r) } else { (best.0, best.1) })
}

/// Exponentially twisted joint law of (T, V) fixed by (t*, θ*).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwistedLaw<T> {
    pub t_star: T,
    pub theta_star: T,
    /// v* = v(t*, θ*).
    pub v_star: T,
    pub t: T,
}

impl<T: Real> TwistedLaw<T> {
    /// Twist at the rate minimizer.
    pub fn at_minimizer(p: &LdpProblem<T>) -> Result<Self> {
        let (t_star, _) = rate_minimize(p)?;
        Self::at(p, t_star)
    }

    pub fn at(p: &LdpProblem<T>, t_star: T) -> Result<Self> {
        let theta_star = theta_root(t_star, p)?;
        Ok(Self {
            t_star,
            theta_star,
            v_star: log_mgf_v(t_star, theta_star, p)?,
            t: p.t,
        })
    }

    /// The untwisted law (θ* = 0).
    pub fn nominal(p: &LdpProblem<T>) -> Self {
        Self {
            t_star: T::zero(),
            theta_star: T::zero(),
            v_star: T::zero(),
            t: p.t,
        }
    }

    fn inside(&self, s: T) -> bool {
        s > self.t_star && s <= self.t
    }

    /// Density of T under the twist: f(s)e^{−v*}, times φ(θ*) on (t*, t].
    pub fn arrival_density(&self, s: T, p: &LdpProblem<T>) -> Result<T> {
        let base = p.scatter.density(s) * (-self.v_star).exp();
        Ok(if self.inside(s) {
            base * p.service.mgf(self.theta_star)?
        } else {
            base
        })
    }

    /// Twisted mass that never arrives, b·e^{−v*}.
    pub fn mass_at_infinity(&self, p: &LdpProblem<T>) -> T {
        p.scatter.deficit() * (-self.v_star).exp()
    }

    /// P*(T ∈ (t*, t]) = φ(θ*)·ΔF·e^{−v*}.
    pub fn inside_probability(&self, p: &LdpProblem<T>) -> Result<T> {
        Ok(p.service.mgf(self.theta_star)? * p.scatter.mass(self.t_star, self.t) * (-self.v_star).exp())
    }
}

/// Expected cumulative work by time s under the twist.
pub fn rare_event_path<T: Real>(s: T, tw: &TwistedLaw<T>, p: &LdpProblem<T>) -> Result<T> {
    let m = p.service.mean();
    let scale = (-tw.v_star).exp();
    let f = |u: T| p.scatter.cdf(u);
    if s <= tw.t_star {
        return Ok(m * f(s) * scale);
    }
    let s = s.min(tw.t);
    let tilted = p.service.tilted_mean_weight(tw.theta_star)?;
    Ok((m * f(tw.t_star) + tilted * (f(s) - f(tw.t_star))) * scale)
}

/// One customer under the twist; `None` epoch means it never arrives.
pub fn twisted_sample(tw: &TwistedLaw<f64>, p: &LdpProblem<f64>, rng: &mut RandomStream) -> Result<(Option<f64>, f64)> {
    let f = &p.scatter;
    let (f_lo, f_hi) = (f.cdf(tw.t_star), f.cdf(tw.t));
    let p_in = tw.inside_probability(p)?;
    if rng.uniform() < p_in {
        let u = f_lo + (f_hi - f_lo) * rng.uniform();
        let s = f.quantile(u).clamp(tw.t_star, tw.t);
        let s = if s <= tw.t_star { next_up(tw.t_star) } else { s };
        return Ok((Some(s), p.service.sample_tilted(tw.theta_star, rng)));
    }
    // outside (t*, t]: F restricted to [0, t*] ∪ (t, ∞], atom at ∞ included
    let u = (1.0 - (f_hi - f_lo)) * rng.uniform();
    let epoch = if u < f_lo {
        Some(f.quantile(u))
    } else {
        let u = u - f_lo + f_hi;
        if u < f.total_mass() {
            Some(f.quantile(u).max(next_up(tw.t)))
        } else {
            None
        }
    };
    Ok((epoch, p.service.sample(rng)))
}

fn next_up(x: f64) -> f64 {
    if x == 0.0 {
        f64::from_bits(1)
    } else {
        f64::from_bits(x.to_bits() + 1)
    }
}

/// IS output: the estimate plus the mean likelihood ratio (≈ 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IsResult {
    pub estimate: Estimate,
    pub lr_mean: Estimate,
}

/// Importance-sampling estimate of P(Wₙ(t) > n·x), c = n·c′, each
/// replication weighted by exp(n·v* − θ*·Γₙ(t*, t]).
pub fn is_estimate(p: &LdpProblem<f64>, tw: &TwistedLaw<f64>, n: usize, reps: usize, replicator: &Replicator) -> Result<IsResult> {
    if reps == 0 {
        return Err(Error::argument("need at least one replication"));
    }
    tw.inside_probability(p)?;
    let c = n as f64 * p.c_prime;
    let level = n as f64 * p.x;
    let rows = replicator.run(reps, |rng, _| {
        let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(n);
        let mut inside_work = 0.0;
        for _ in 0..n {
            let (epoch, v) = twisted_sample(tw, p, rng).expect("validated twist");
            if let Some(s) = epoch {
                if s > tw.t_star && s <= tw.t {
                    inside_work += v;
                }
                pairs.push((s, v));
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (arrivals, works): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let ow = OfferedWork::new(arrivals, works).expect("sorted pairs");
        let lr = (n as f64 * tw.v_star - tw.theta_star * inside_work).exp();
        let hit = workload_at_time(&ow, c, p.t) > level;
        (if hit { lr } else { 0.0 }, lr)
    });
    let est: Moments = rows.iter().map(|r| r.0).collect();
    let lr: Moments = rows.iter().map(|r| r.1).collect();
    Ok(IsResult {
        estimate: Estimate::from_moments(&est),
        lr_mean: Estimate::from_moments(&lr),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::EmpiricalCdf;
    use crate::quadrature::{integrate_piecewise, QuadratureOptions};
    use approx::assert_relative_eq;

    fn example1() -> LdpProblem<f64> {
        LdpProblem::new(
            0.5,
            0.5,
            1.03,
            ServiceModel::Exponential { mean: 1.0 },
            ScatterModel::unit_uniform(),
        )
        .unwrap()
    }

    fn example2() -> LdpProblem<f64> {
        LdpProblem::new(
            0.5,
            1000.0,
            5.6,
            ServiceModel::Exponential { mean: 1.0 },
            ScatterModel::Exponential { rate: 1.0 },
        )
        .unwrap()
    }

    #[test]
    fn v_values() {
        let p = example1();
        for &s in &[0.0, 0.2, 0.49] {
            assert_eq!(log_mgf_v(s, 0.0, &p).unwrap(), 0.0);
        }
        for &th in &[0.1, 0.5, 0.9] {
            assert_eq!(log_mgf_v(0.5, th, &p).unwrap(), 0.0);
        }
        assert_relative_eq!(log_mgf_v(0.2, 0.5, &p).unwrap(), 1.3f64.ln(), epsilon = 1e-14);
        assert!(log_mgf_v(0.2, 1.0, &p).is_err());
    }

    #[test]
    fn v_matches_simulated_single_customer_mgf() {
        // per-customer MGF E exp(θ V 1{T ∈ (s, t]}) = e^{v(s, θ)}
        let p = example1();
        let (s, th) = (0.2, 0.25);
        let n = 1_000_000;
        let mut rng = RandomStream::new(51, 0);
        let m: Moments = (0..n)
            .map(|_| {
                let t = rng.uniform();
                let v = rng.exp1();
                if t > s && t <= p.t {
                    (th * v).exp()
                } else {
                    1.0
                }
            })
            .collect();
        let want = log_mgf_v(s, th, &p).unwrap().exp();
        assert!((m.mean - want).abs() < 3.0 * m.std_err(), "{} vs {want}", m.mean);
    }

    #[test]
    fn slope_is_derivative_of_v() {
        let p = example2();
        for &s in &[0.0, 0.25, 0.45] {
            for &th in &[0.1, 0.5, 0.9] {
                let h = 1e-6;
                let fd = (log_mgf_v(s, th + h, &p).unwrap() - log_mgf_v(s, th - h, &p).unwrap()) / (2.0 * h);
                assert_relative_eq!(log_mgf_v_slope(s, th, &p).unwrap(), fd, max_relative = 1e-6);
            }
        }
    }

    /// Root of y(1−a)θ² − y(2−a)θ + (y − a) = 0, y = x + c′a, the
    /// quadratic that ∂v/∂θ = y reduces to for exp(1) service and uniform F.
    fn example1_theta(a: f64, x: f64, c: f64) -> f64 {
        let y = x + c * a;
        let (qa, qb, qc) = (y * (1.0 - a), -y * (2.0 - a), y - a);
        (-qb - (qb * qb - 4.0 * qa * qc).sqrt()) / (2.0 * qa)
    }

    /// A commonly quoted closed form for this case.
    fn example1_theta_printed(a: f64, x: f64, c: f64) -> f64 {
        let y = x + c * a;
        ((1.0 + a) * y - ((1.0 + a).powi(2) * y * y - 4.0 * a * y * (x + a * (c - 1.0))).sqrt()) / (2.0 * a * y)
    }

    #[test]
    fn theta_root_example1() {
        let p = example1();
        for &s in &[0.0, 0.1, 0.25, 0.4, 0.49] {
            let th = theta_root(s, &p).unwrap();
            assert!(th > 0.0 && th < 1.0);
            assert!((th - example1_theta(p.t - s, p.x, p.c_prime)).abs() < 1e-8);
            let resid = log_mgf_v_slope(s, th, &p).unwrap() - p.c_prime * (p.t - s) - p.x;
            assert!(resid.abs() <= 1e-9);
        }
        // the quoted closed form does not solve the root equation
        let printed = example1_theta_printed(0.1, 0.5, 1.03);
        let resid = log_mgf_v_slope(0.4, printed, &p).unwrap() - 1.03 * 0.1 - 0.5;
        assert!(resid.abs() > 0.1);
    }

    #[test]
    fn unreachable_slope_for_bounded_service() {
        let p = LdpProblem::new(
            1.0,
            10.0,
            1.0,
            ServiceModel::Deterministic { value: 1.0 },
            ScatterModel::unit_uniform(),
        )
        .unwrap();
        match theta_root(0.9, &p) {
            Err(Error::RootNotFound { supremum, .. }) => assert_eq!(supremum, 1.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn x_condition_enforced() {
        let r = LdpProblem::new(
            1.0,
            0.5,
            0.2,
            ServiceModel::Exponential { mean: 1.0 },
            ScatterModel::unit_uniform(),
        );
        match r {
            Err(Error::Precondition { threshold: Some(th), .. }) => assert!((th - 0.8).abs() < 1e-6),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rate_is_legendre_transform() {
        for p in [example1(), example2()] {
            for &s in &[0.0, 0.2, 0.45] {
                let r = rate_value(s, &p).unwrap();
                assert!(r > 0.0);
                let y = p.x + p.c_prime * (p.t - s);
                let tm = p.service.theta_max();
                let sup = (0..10_000)
                    .map(|i| tm * i as f64 / 10_000.0)
                    .map(|th| th * y - log_mgf_v(s, th, &p).unwrap())
                    .fold(f64::NEG_INFINITY, f64::max);
                // the θ-grid sup approaches from below
                assert!(r >= sup - 1e-9 && r - sup <= 1e-6 * r.max(1.0).max(y * 1e-4 * 10.0), "s={s}: {r} vs {sup}");
            }
        }
    }

    #[test]
    fn example1_profile_convex_and_positive() {
        let p = example1();
        let prof = rate_profile(&p, 1000).unwrap();
        assert!(prof.rate.iter().all(|&r| r > 0.0));
        for w in prof.rate.windows(3) {
            assert!(w[2] - 2.0 * w[1] + w[0] >= -1e-12);
        }
    }

    #[test]
    fn example2_minimizer() {
        let (ts, _) = rate_minimize(&example2()).unwrap();
        assert!((ts - 0.3).abs() <= 0.02, "{ts}");
    }

    #[test]
    fn minimizer_independent_of_grid_phase() {
        for p in [example1(), example2()] {
            let (a, _) = rate_minimize_with(&p, 1000, 0.0).unwrap();
            let (b, _) = rate_minimize_with(&p, 997, 0.37).unwrap();
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn twisted_law_normalized() {
        for p in [example1(), example2()] {
            let tw = TwistedLaw::at(&p, 0.2).unwrap();
            let opts = QuadratureOptions {
                abs_tol: 1e-13,
                ..QuadratureOptions::default()
            };
            let end = if p.scatter.support_end().is_finite() { p.scatter.support_end() } else { 60.0 };
            let q = integrate_piecewise(|s| tw.arrival_density(s, &p).unwrap(), &[0.0, tw.t_star, tw.t, end], opts).unwrap();
            let total = q.value + tw.mass_at_infinity(&p);
            assert!((total - 1.0).abs() < 1e-10, "{total}");
        }
    }

    #[test]
    fn rare_path_properties() {
        let p = example1();
        let tw = TwistedLaw::at(&p, 0.1).unwrap();
        assert_eq!(rare_event_path(0.0, &tw, &p).unwrap(), 0.0);
        let left = rare_event_path(0.1, &tw, &p).unwrap();
        let right = rare_event_path(0.1 + 1e-12, &tw, &p).unwrap();
        assert!((left - right).abs() < 1e-9);
        let mut prev = 0.0;
        for i in 0..=100 {
            let v = rare_event_path(i as f64 * 0.005, &tw, &p).unwrap();
            assert!(v >= prev);
            prev = v;
        }
        let nominal = TwistedLaw::nominal(&p);
        for &s in &[0.1, 0.3, 0.5] {
            assert_relative_eq!(rare_event_path(s, &nominal, &p).unwrap(), s, epsilon = 1e-15);
        }
    }

    #[test]
    fn rare_path_matches_twisted_sampler() {
        let p = example1();
        let tw = TwistedLaw::at(&p, 0.1).unwrap();
        let grid: Vec<f64> = (1..=50).map(|i| p.t * i as f64 / 50.0).collect();
        let reps = 100_000;
        let sums = Replicator::new(52).run(reps, |rng, _| {
            let (s, v) = twisted_sample(&tw, &p, rng).unwrap();
            grid.iter().map(|&g| if s.is_some_and(|s| s <= g) { v } else { 0.0 }).collect::<Vec<f64>>()
        });
        for (j, &g) in grid.iter().enumerate() {
            let mc = sums.iter().map(|r| r[j]).sum::<f64>() / reps as f64;
            assert!((mc - rare_event_path(g, &tw, &p).unwrap()).abs() < 0.01, "s={g}");
        }
    }

    #[test]
    fn nominal_twist_reproduces_nominal_law() {
        let p = example1();
        let tw = TwistedLaw::nominal(&p);
        let draws = Replicator::new(53).run(100_000, |rng, _| twisted_sample(&tw, &p, rng).unwrap());
        let ts = EmpiricalCdf::new(draws.iter().map(|d| d.0.unwrap()).collect());
        let vs = EmpiricalCdf::new(draws.iter().map(|d| d.1).collect());
        assert!(ts.ks_distance(|t| t.clamp(0.0, 1.0)) <= 0.01);
        assert!(vs.ks_distance(|v| if v > 0.0 { 1.0 - (-v).exp() } else { 0.0 }) <= 0.01);
    }

    #[test]
    fn tilted_exponential_service_mean() {
        let p = example1();
        let tw = TwistedLaw {
            t_star: 0.1,
            theta_star: 0.5,
            v_star: log_mgf_v(0.1, 0.5, &p).unwrap(),
            t: 0.5,
        };
        let draws = Replicator::new(54).run(200_000, |rng, _| twisted_sample(&tw, &p, rng).unwrap());
        let inside: Moments = draws
            .iter()
            .filter(|d| d.0.is_some_and(|s| s > 0.1 && s <= 0.5))
            .map(|d| d.1)
            .collect();
        // the tilted law of V is exponential with mean 1/(1 − θ) = 2
        assert!((inside.mean - 2.0).abs() < 3.0 * inside.std_err());
        // and E[V e^{θV}] = 1/(1 − θ)² = 4
        assert_relative_eq!(p.service.tilted_mean_weight(0.5).unwrap(), 4.0, epsilon = 1e-14);
    }

    #[test]
    fn nominal_is_equals_crude() {
        let p = example1();
        let tw = TwistedLaw::nominal(&p);
        let r = is_estimate(&p, &tw, 10, 2_000, &Replicator::new(55)).unwrap();
        assert_eq!(r.lr_mean.p, 1.0);
        assert_eq!(r.lr_mean.std_err, 0.0);
    }

    #[test]
    fn likelihood_ratio_has_unit_mean() {
        let p = example1();
        let tw = TwistedLaw::at_minimizer(&p).unwrap();
        let r = is_estimate(&p, &tw, 20, 20_000, &Replicator::new(56)).unwrap();
        assert!((r.lr_mean.p - 1.0).abs() < 3.0 * r.lr_mean.std_err, "{:?}", r.lr_mean);
    }
}
