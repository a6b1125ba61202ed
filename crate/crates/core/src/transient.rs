//! Transient laws of reflected Gaussian processes on [0, 1].
//!
//! Everything here is expressed through the reflected Brownian bridge with
//! drift, `Y = Ψ(B⁰ − d·e)`. The law of `Ψ(Z − d·e)` follows by conditioning
//! on `B₁(1)`; [`reflected_diffusion_cdf_quadrature`] does that numerically
//! and [`reflected_diffusion_cdf_closed`] in closed form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::path::{bridge_min, brownian_at_clock};
use crate::quadrature::{integrate, QuadratureOptions};
use crate::rng::RandomStream;
use crate::scalar::Real;
use crate::service::ServiceMoments;
use crate::special::{exp_times_normal_cdf, normal_cdf, normal_pdf};

fn check_time<T: Real>(t: T) -> Result<()> {
    if t > T::zero() && t <= T::one() {
        Ok(())
    } else {
        Err(Error::domain(format!("time must lie in (0, 1], got {t}")))
    }
}

/// P(Ψ(B⁰ − d·e)(t) ≤ λ).
///
/// With `s = √(t(1−t))`:
/// `Φ((λ+dt)/s) − e^{−2λ(λ+d)}·Φ((λ(2t−1)+dt)/s)`; at `t = 1` this is
/// Doob's `1 − e^{−2λ(λ+d)}` (zero when `λ + d ≤ 0`).
pub fn reflected_bridge_cdf<T: Real>(lambda: T, t: T, d: T) -> Result<T> {
    check_time(t)?;
    if lambda <= T::zero() {
        return Ok(T::zero());
    }
    let (l, t, d) = (lambda.f64(), t.f64(), d.f64());
    let log_k = -2.0 * l * (l + d);
    if t == 1.0 {
        let p = if l + d <= 0.0 { 0.0 } else { -log_k.exp_m1() };
        return Ok(T::lit(p));
    }
    let s = (t * (1.0 - t)).sqrt();
    let p = normal_cdf((l + d * t) / s) - exp_times_normal_cdf(log_k, (l * (2.0 * t - 1.0) + d * t) / s);
    Ok(T::lit(p.clamp(0.0, 1.0)))
}

/// ∫ e^{−aξ²}·Φ(bξ + c) dξ = √(π/a)·Φ(c·√(2a/(2a + b²))).
pub fn gauss_phi_integral<T: Real>(a: T, b: T, c: T) -> Result<T> {
    if !(a > T::zero()) {
        return Err(Error::domain("gauss_phi_integral needs a > 0"));
    }
    let two_a = a + a;
    Ok((T::PI() / a).sqrt() * normal_cdf(c * (two_a / (two_a + b * b)).sqrt()))
}

/// Parameters of `P(Ψ(Z − d·e)(t) ≤ λ)` in natural units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReflectedLawParams<T> {
    pub t: T,
    pub lambda: T,
    /// Drift rate, `d = a·EV₁`.
    pub d: T,
    pub sigma_v: T,
    /// EV₁² (second moment).
    pub second_moment: T,
}

impl<T: Real> ReflectedLawParams<T> {
    pub fn new(t: T, lambda: T, d: T, sigma_v: T, second_moment: T) -> Result<Self> {
        let p = Self {
            t,
            lambda,
            d,
            sigma_v,
            second_moment,
        };
        p.validate()?;
        Ok(p)
    }

    /// From service moments and the service-rate coefficient `a` (d = a·EV₁).
    pub fn from_moments(t: T, lambda: T, a: T, moments: &ServiceMoments<T>) -> Result<Self> {
        Self::new(t, lambda, a * moments.mean, moments.std_dev(), moments.second_moment())
    }

    pub fn validate(&self) -> Result<()> {
        check_time(self.t)?;
        if !(self.second_moment > T::zero()) {
            return Err(Error::domain("EV₁² must be positive"));
        }
        if !(self.sigma_v >= T::zero()) || self.sigma_v * self.sigma_v > self.second_moment * (T::one() + T::lit(1e-12)) {
            return Err(Error::domain("σ_V must satisfy 0 <= σ_V² <= EV₁²"));
        }
        Ok(())
    }

    pub fn scale(&self) -> T {
        self.second_moment.sqrt()
    }

    pub fn with_lambda(mut self, lambda: T) -> Self {
        self.lambda = lambda;
        self
    }

    /// (λ′, d′, σ′) after dividing by √EV₁².
    pub fn normalized(&self) -> (T, T, T) {
        let s = self.scale();
        (self.lambda / s, self.d / s, self.sigma_v / s)
    }
}

/// ∫ P(Ψ(√EV₁²·B⁰ − (d − σ_V x)e)(t) ≤ λ)·φ(x) dx over x ∈ (−10, 10).
pub fn reflected_diffusion_cdf_quadrature<T: Real>(params: &ReflectedLawParams<T>) -> Result<T> {
    params.validate()?;
    if params.lambda <= T::zero() {
        return Ok(T::zero());
    }
    let (l, d, sg) = params.normalized();
    let (l, d, sg, t) = (l.f64(), d.f64(), sg.f64(), params.t.f64());
    if sg == 0.0 {
        return reflected_bridge_cdf(params.lambda / params.scale(), params.t, params.d / params.scale());
    }
    let f = |x: f64| reflected_bridge_cdf(l, t, d - sg * x).unwrap_or(0.0) * normal_pdf(x);
    let mut q = integrate(f, -10.0, 10.0, QuadratureOptions::default())?;
    if t == 1.0 {
        // Doob's kink at x = (λ + d)/σ: integrate the two smooth pieces.
        let k = ((l + d) / sg).clamp(-10.0, 10.0);
        let a = integrate(f, -10.0, k, QuadratureOptions::default())?;
        let b = integrate(f, k, 10.0, QuadratureOptions::default())?;
        q.value = a.value + b.value;
    }
    Ok(T::lit(q.value.clamp(0.0, 1.0)))
}

/// Closed form of the same law. With primes denoting division by √EV₁²
/// and `s_t = √(t(1−t) + σ′²t²)`:
/// `Φ((λ′+d′t)/s_t) − exp(−2λ′(λ′+d′) + 2λ′²σ′²)·Φ((λ′(2t−1−2σ′²t)+d′t)/s_t)`.
pub fn reflected_diffusion_cdf_closed<T: Real>(params: &ReflectedLawParams<T>) -> Result<T> {
    params.validate()?;
    if params.lambda <= T::zero() {
        return Ok(T::zero());
    }
    let (l, d, sg) = params.normalized();
    if sg == T::zero() {
        return reflected_bridge_cdf(l, params.t, d);
    }
    let (l, d, sg, t) = (l.f64(), d.f64(), sg.f64(), params.t.f64());
    let s2 = sg * sg;
    let st = (t * (1.0 - t) + s2 * t * t).sqrt();
    let log_k = -2.0 * l * (l + d) + 2.0 * l * l * s2;
    let p = normal_cdf((l + d * t) / st) - exp_times_normal_cdf(log_k, (l * (2.0 * t - 1.0 - 2.0 * s2 * t) + d * t) / st);
    Ok(T::lit(p.clamp(0.0, 1.0)))
}

/// Limit law of `Ψ(Z + EV₁(q₀ − a)e)` for a slowly varying residue with
/// slope `q0`: the reflected law with drift `d = EV₁(a − q₀)`.
pub fn slowly_varying_limit_cdf<T: Real>(lambda: T, t: T, q0: T, a: T, moments: &ServiceMoments<T>) -> Result<T> {
    let d = moments.mean * (a - q0);
    let p = ReflectedLawParams::new(t, lambda, d, moments.std_dev(), moments.second_moment())?;
    reflected_diffusion_cdf_closed(&p)
}

/// Commonly quoted variants of the closed forms above, kept for comparison
/// only; the module tests show how they miss their own limiting cases.
pub mod reference_forms {
    use crate::special::normal_cdf;

    /// Printed reflected-bridge law:
    /// `Φ((λ(1−2t)+dt)/s) − e^{2λ(λ−d)}·Φ((−λ+dt)/s)`.
    pub fn reflected_bridge_cdf_printed(lambda: f64, t: f64, d: f64) -> f64 {
        let s = (t * (1.0 - t)).sqrt();
        normal_cdf((lambda * (1.0 - 2.0 * t) + d * t) / s)
            - (2.0 * lambda * (lambda - d)).exp() * normal_cdf((-lambda + d * t) / s)
    }

    /// Printed Gaussian–Φ integral: `√(2π/a)·Φ(c·√(a/(a+b²)))`.
    pub fn gauss_phi_integral_printed(a: f64, b: f64, c: f64) -> f64 {
        (2.0 * std::f64::consts::PI / a).sqrt() * normal_cdf(c * (a / (a + b * b)).sqrt())
    }

    /// Printed transient law of Ψ(Z − c·e) (α = 1/2, EV₁² = 1).
    pub fn reflected_diffusion_cdf_printed(lambda: f64, t: f64, c: f64, sigma_v: f64) -> f64 {
        let alpha: f64 = 0.5;
        let s = (t * (1.0 - t)).sqrt();
        let beta = -sigma_v * t / s;
        let gamma = (lambda * (1.0 - 2.0 * t) + c * t) / s;
        let first = normal_cdf(gamma * (alpha / (alpha + beta * beta)).sqrt()) / alpha.sqrt();
        let k = (2.0 * lambda * lambda * (1.0 + sigma_v * sigma_v) - 2.0 * lambda * c).exp();
        let arg = (gamma - 2.0 * lambda * (t / (1.0 - t)).sqrt() + 2.0 * beta * lambda * sigma_v)
            * (2.0 * alpha * alpha / (2.0 * alpha * alpha + beta * beta)).sqrt();
        first + k * normal_cdf(arg)
    }
}

/// One exact-in-law draw of Ψ(Z − d·e)(t) with uniform scattering: Z is
/// sampled at `cells` points and each cell's minimum is drawn from the
/// Brownian-bridge law of variance EV₁²·Δ.
pub fn sample_reflected_diffusion(p: &ReflectedLawParams<f64>, cells: usize, rng: &mut RandomStream) -> f64 {
    let h = p.t / cells as f64;
    let u: Vec<f64> = (1..=cells).map(|j| j as f64 * h).collect();
    let mean = (p.second_moment - p.sigma_v * p.sigma_v).max(0.0).sqrt();
    let (w, w1) = brownian_at_clock(&u, rng);
    let (b, _) = brownian_at_clock(&u, rng);
    let var = p.second_moment * h;
    let mut prev = 0.0;
    let mut lo: f64 = 0.0;
    for j in 0..cells {
        let x = mean * (w[j] - u[j] * w1) + p.sigma_v * b[j] - p.d * u[j];
        lo = lo.min(bridge_min(prev, x, var, rng.uniform_pos()));
        prev = x;
    }
    prev - lo
}
