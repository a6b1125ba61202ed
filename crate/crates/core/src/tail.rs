//! Exact tail asymptotics of the Gaussian workload approximation.
//!
//! The normalized netput is `Ŵ(t) = c_s·B₁(t) + B⁰(t) − c·t` on [0, 1]
//! with standard deviation `σ(t) = √(t(K − t))`, `K = c_s² + 1`. Exceeding
//! `x` at time t is a `m_x(t) = (ct + x)/σ(t)` standard-deviation event, and
//! the tail is governed by the minimum of `m_x` and its curvature there.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimize::golden_section_min;
use crate::quadrature::{integrate_piecewise, QuadratureOptions};
use crate::rng::RandomStream;
use crate::scalar::Real;
use crate::special::{gamma_fn, normal_pdf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailRegime {
    /// t* < 1: two-sided maximum inside the horizon.
    Interior,
    /// The minimizer of m_x sits at the horizon t = 1.
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailProblem<T> {
    pub c: T,
    pub x: T,
    pub cs2: T,
}

impl<T: Real> TailProblem<T> {
    pub fn new(c: T, x: T, cs2: T) -> Result<Self> {
        if !(x > T::zero()) || !(c >= T::zero()) || !(cs2 >= T::zero()) {
            return Err(Error::argument("tail problem needs x > 0, c >= 0, c_s² >= 0"));
        }
        Ok(Self { c, x, cs2 })
    }

    pub fn k(&self) -> T {
        self.cs2 + T::one()
    }

    /// x·K/(cK + 2x) before clipping to the horizon.
    pub fn t_star_unclipped(&self) -> T {
        let k = self.k();
        self.x * k / (self.c * k + self.x + self.x)
    }

    pub fn regime(&self) -> TailRegime {
        if self.t_star_unclipped() >= T::one() {
            TailRegime::Boundary
        } else {
            TailRegime::Interior
        }
    }

    /// Regime as x → ∞, where t* → K/2: boundary iff c_s² >= 1.
    pub fn asymptotic_regime(&self) -> TailRegime {
        if self.cs2 >= T::one() {
            TailRegime::Boundary
        } else {
            TailRegime::Interior
        }
    }

    pub fn with_x(mut self, x: T) -> Self {
        self.x = x;
        self
    }
}

/// σ(t) = √(t(c_s² + 1 − t)).
pub fn variance_time_curve<T: Real>(t: T, cs2: T) -> Result<T> {
    if !(t >= T::zero() && t <= T::one()) {
        return Err(Error::domain(format!("variance-time curve is defined on [0, 1], got {t}")));
    }
    Ok((t * (cs2 + T::one() - t)).max(T::zero()).sqrt())
}

/// m_x(t) = (ct + x)/σ(t); `+∞` at t = 0.
pub fn m_curve<T: Real>(t: T, p: &TailProblem<T>) -> T {
    if t <= T::zero() {
        return T::infinity();
    }
    (p.c * t + p.x) / (t * (p.k() - t)).sqrt()
}

/// First and second derivatives of m_x at `t`.
pub fn m_curve_derivatives<T: Real>(t: T, p: &TailProblem<T>) -> (T, T) {
    let g = p.c * t + p.x;
    let s = t * (p.k() - t);
    let ds = p.k() - t - t;
    let h = T::half();
    let r = s.sqrt();
    let d1 = p.c / r - h * g * ds / (s * r);
    let d2 = -p.c * ds / (s * r) + T::lit(0.75) * g * ds * ds / (s * s * r) + g / (s * r);
    (d1, d2)
}

/// Minimizer of m_x on (0, 1].
pub fn t_star<T: Real>(p: &TailProblem<T>) -> T {
    p.t_star_unclipped().min(T::one())
}

/// Golden-section minimizer of m_x, the numeric counterpart of [`t_star`].
pub fn t_star_numeric<T: Real>(p: &TailProblem<T>) -> T {
    golden_section_min(|t| m_curve(t, p), T::lit(1e-12), T::one(), T::lit(1e-12)).0
}

/// Curvature of the standardized deviation σ̃(t) = m_x(t*)/m_x(t) at its
/// peak, σ̃(t) ≈ 1 − A(t − t*)²:
/// `A = m″(t*)/(2m(t*)) = (cK + 2x)⁴ / (8K²x²(cK + x)²)`.
pub fn curvature_a<T: Real>(p: &TailProblem<T>) -> Result<T> {
    if p.regime() == TailRegime::Boundary {
        return Err(Error::precondition(
            "t* sits at the horizon; use curvature_a_one_sided",
            Some(p.t_star_unclipped().f64()),
        ));
    }
    let k = p.k();
    let u = p.c * k + p.x + p.x;
    let w = p.c * k + p.x;
    Ok(u.powi(4) / (T::lit(8.0) * k * k * p.x * p.x * w * w))
}

/// The commonly quoted closed form
/// `x(c_s²+1)³(c(c_s²+1)+x)/(4(c(c_s²+1)+2x)²)`; it is not the curvature
/// of σ̃ and is kept for reference only.
pub fn curvature_a_display<T: Real>(p: &TailProblem<T>) -> T {
    let k = p.k();
    let u = p.c * k + p.x + p.x;
    p.x * k.powi(3) * (p.c * k + p.x) / (T::lit(4.0) * u * u)
}

/// Boundary counterpart: m″(1)/(2m(1)).
pub fn curvature_a_one_sided<T: Real>(p: &TailProblem<T>) -> T {
    let (_, d2) = m_curve_derivatives(T::one(), p);
    d2 / (T::two() * m_curve(T::one(), p))
}

/// Local correlation constant of the standardized field at t*:
/// `1 − r(s, t) ≈ D|s − t|` with `D = K/(2σ²(t*))`.
pub fn correlation_d<T: Real>(p: &TailProblem<T>) -> T {
    let ts = t_star(p);
    p.k() / (T::two() * ts * (p.k() - ts))
}

/// The same constant for the unstandardized netput, (c_s² + 1)/2.
pub fn correlation_d_unstandardized<T: Real>(p: &TailProblem<T>) -> T {
    p.k() * T::half()
}

/// Pickands constants H₁ = 1 and H₂ = 1/√π.
pub fn pickands_h<T: Real>(alpha: T) -> Result<T> {
    if alpha == T::one() {
        Ok(T::one())
    } else if alpha == T::two() {
        Ok(T::PI().sqrt().recip())
    } else {
        Err(Error::Unsupported(format!("Pickands constant for α = {alpha}")))
    }
}

/// H(α, β) = Γ(1/β)·D^{1/α}·σ^{1/β}·H_α / (√(2π)·β·A^{1/β}).
pub fn piterbarg_prefactor<T: Real>(alpha: T, beta: T, d: T, sigma: T, a: T) -> Result<T> {
    if !(beta > alpha) || !(alpha > T::zero()) {
        return Err(Error::precondition("Piterbarg prefactor needs β > α > 0", Some(beta.f64())));
    }
    if !(d > T::zero() && sigma > T::zero() && a > T::zero()) {
        return Err(Error::argument("D, σ and A must be positive"));
    }
    let h = pickands_h(alpha)?;
    let ib = beta.recip();
    Ok(gamma_fn(ib) * d.powf(alpha.recip()) * sigma.powf(ib) * h / ((T::two() * T::PI()).sqrt() * beta * a.powf(ib)))
}

/// Prefactor H(1, 2) of the problem (σ = 1 for the standardized field).
pub fn problem_prefactor<T: Real>(p: &TailProblem<T>) -> Result<T> {
    let a = match p.regime() {
        TailRegime::Interior => curvature_a(p)?,
        TailRegime::Boundary => curvature_a_one_sided(p),
    };
    piterbarg_prefactor(T::one(), T::two(), correlation_d(p), T::one(), a)
}

/// Asymptotic P(max Ŵ > ·) at the standardized level `u`:
/// `2·H·e^{−u²/2}` in the interior regime, `H·e^{−u²/2}` at the boundary
/// (the polynomial factor has exponent 2/β − 2/α + 1 = 0).
pub fn tail_prob_asymptotic<T: Real>(u: T, p: &TailProblem<T>) -> Result<T> {
    if !(u > T::zero()) {
        return Err(Error::argument("level must be positive"));
    }
    let h = problem_prefactor(p)?;
    let mult = match p.regime() {
        TailRegime::Interior => T::two(),
        TailRegime::Boundary => T::one(),
    };
    Ok(mult * h * (-u * u * T::half()).exp())
}

/// [`tail_prob_asymptotic`] at the raw level `p.x`, mapped through m_x(t*).
pub fn tail_prob_raw<T: Real>(p: &TailProblem<T>) -> Result<T> {
    tail_prob_asymptotic(m_curve(t_star(p), p), p)
}

/// Exact P(max_{s≤1} Ŵ(s) > x). Given ξ = B₁(1) the netput is
/// `√K·B⁰(s) − (c − c_s ξ)s`, whose maximum has Doob's tail
/// `exp(−2x(x + b)/K)` (one when x + b ≤ 0).
pub fn exact_tail_probability(p: &TailProblem<f64>) -> Result<f64> {
    let k = p.k();
    let cs = p.cs2.sqrt();
    let (c, x) = (p.c, p.x);
    let g = move |xi: f64| {
        let b = c - cs * xi;
        let v = if x + b <= 0.0 { 1.0 } else { (-2.0 * x * (x + b) / k).exp() };
        v * normal_pdf(xi)
    };
    let mut cuts = vec![-40.0, 40.0];
    if cs > 0.0 {
        let kink = (c + x) / cs;
        if kink.abs() < 40.0 {
            cuts.insert(1, kink);
        }
    }
    let opts = QuadratureOptions {
        abs_tol: 0.0,
        rel_tol: 1e-12,
        ..QuadratureOptions::default()
    };
    Ok(integrate_piecewise(g, &cuts, opts)?.value)
}

/// One draw of max_{s≤1} Ŵ(s), sampled exactly.
pub fn sample_max(p: &TailProblem<f64>, rng: &mut RandomStream) -> f64 {
    let k = p.k();
    let b = p.c - p.cs2.sqrt() * rng.normal();
    0.5 * (-b + (b * b - 2.0 * k * rng.uniform_pos().ln()).sqrt())
}
