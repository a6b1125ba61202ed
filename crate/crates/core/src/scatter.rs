//! Arrival-scattering laws F.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimize::bisect_increasing;
use crate::rng::RandomStream;
use crate::scalar::Real;

/// Residue q(t) of a near-uniform scattering law, `F(t) = t + q(t)/√n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Perturbation<T> {
    Zero,
    /// q(t) = slope·t
    Linear { slope: T },
    /// q(t) = amplitude·sin(πt); vanishes at both ends.
    Sine { amplitude: T },
    /// q(t) = 1 − e^{−γt}
    Saturating { gamma: T },
}

impl<T: Real> Perturbation<T> {
    pub fn value(&self, t: T) -> T {
        match *self {
            Perturbation::Zero => T::zero(),
            Perturbation::Linear { slope } => slope * t,
            Perturbation::Sine { amplitude } => amplitude * (T::PI() * t).sin(),
            Perturbation::Saturating { gamma } => -(-gamma * t).exp_m1(),
        }
    }

    pub fn derivative(&self, t: T) -> T {
        match *self {
            Perturbation::Zero => T::zero(),
            Perturbation::Linear { slope } => slope,
            Perturbation::Sine { amplitude } => amplitude * T::PI() * (T::PI() * t).cos(),
            Perturbation::Saturating { gamma } => gamma * (-gamma * t).exp(),
        }
    }

    /// q₀ with q(εt)/ε → q₀t as ε → 0.
    pub fn slope_at_zero(&self) -> T {
        self.derivative(T::zero())
    }

    /// q(εt)/ε, the small-time rescaling whose limit is q₀t.
    pub fn rescaled(&self, eps: T, t: T) -> T {
        self.value(eps * t) / eps
    }
}

/// Law of an arrival epoch T₁. Sub-probability laws put the missing mass at
/// `+∞` (customers that never arrive).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScatterModel<T> {
    Uniform { lo: T, hi: T },
    Exponential { rate: T },
    SubProbability { base: Box<ScatterModel<T>>, deficit: T },
    /// `F(t) = min(max(t + q(t)/√n, 0), 1)` on `[0, 1]`.
    PerturbedUniform { q: Perturbation<T>, population: u64 },
}

impl<T: Real> ScatterModel<T> {
    pub fn unit_uniform() -> Self {
        ScatterModel::Uniform {
            lo: T::zero(),
            hi: T::one(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ScatterModel::Uniform { lo, hi } => {
                if !(*lo >= T::zero() && hi > lo && hi.is_finite()) {
                    return Err(Error::argument("uniform scattering needs 0 <= lo < hi < ∞"));
                }
            }
            ScatterModel::Exponential { rate } => {
                if !(*rate > T::zero() && rate.is_finite()) {
                    return Err(Error::argument("exponential scattering needs a positive rate"));
                }
            }
            ScatterModel::SubProbability { base, deficit } => {
                if matches!(**base, ScatterModel::SubProbability { .. }) {
                    return Err(Error::argument("nested sub-probability laws are not supported"));
                }
                base.validate()?;
                if !(*deficit >= T::zero() && *deficit < T::one()) {
                    return Err(Error::argument("mass deficit must lie in [0, 1)"));
                }
            }
            ScatterModel::PerturbedUniform { q, population } => {
                if *population == 0 {
                    return Err(Error::argument("perturbed uniform law needs population >= 1"));
                }
                let rn = T::from_u64(*population).unwrap().sqrt();
                // non-decreasing: 1 + q'(t)/√n >= 0 on [0,1]
                for i in 0..=200 {
                    let t = T::from_usize(i).unwrap() / T::lit(200.0);
                    if T::one() + q.derivative(t) / rn < -T::tiny() {
                        return Err(Error::argument("perturbation makes F decreasing"));
                    }
                }
            }
        }
        Ok(())
    }

    /// F(t).
    pub fn cdf(&self, t: T) -> T {
        match self {
            ScatterModel::Uniform { lo, hi } => ((t - *lo) / (*hi - *lo)).max(T::zero()).min(T::one()),
            ScatterModel::Exponential { rate } => {
                if t <= T::zero() {
                    T::zero()
                } else {
                    -(-*rate * t).exp_m1()
                }
            }
            ScatterModel::SubProbability { base, deficit } => (T::one() - *deficit) * base.cdf(t),
            ScatterModel::PerturbedUniform { q, population } => {
                if t <= T::zero() {
                    T::zero()
                } else if t >= T::one() {
                    T::one()
                } else {
                    let rn = T::from_u64(*population).unwrap().sqrt();
                    (t + q.value(t) / rn).max(T::zero()).min(T::one())
                }
            }
        }
    }

    /// Density f(t) (zero where F is flat).
    pub fn density(&self, t: T) -> T {
        match self {
            ScatterModel::Uniform { lo, hi } => {
                if t >= *lo && t <= *hi {
                    (*hi - *lo).recip()
                } else {
                    T::zero()
                }
            }
            ScatterModel::Exponential { rate } => {
                if t < T::zero() {
                    T::zero()
                } else {
                    *rate * (-*rate * t).exp()
                }
            }
            ScatterModel::SubProbability { base, deficit } => (T::one() - *deficit) * base.density(t),
            ScatterModel::PerturbedUniform { q, population } => {
                if t < T::zero() || t > T::one() {
                    return T::zero();
                }
                let rn = T::from_u64(*population).unwrap().sqrt();
                let raw = t + q.value(t) / rn;
                if raw <= T::zero() || raw >= T::one() {
                    T::zero()
                } else {
                    T::one() + q.derivative(t) / rn
                }
            }
        }
    }

    /// lim_{t→∞} F(t).
    pub fn total_mass(&self) -> T {
        match self {
            ScatterModel::SubProbability { deficit, .. } => T::one() - *deficit,
            _ => T::one(),
        }
    }

    /// Mass at infinity b = 1 − F(∞).
    pub fn deficit(&self) -> T {
        T::one() - self.total_mass()
    }

    /// Left end of the support.
    pub fn support_start(&self) -> T {
        match self {
            ScatterModel::Uniform { lo, .. } => *lo,
            ScatterModel::SubProbability { base, .. } => base.support_start(),
            _ => T::zero(),
        }
    }

    /// Right end of the finite part of the support, `+∞` if unbounded.
    pub fn support_end(&self) -> T {
        match self {
            ScatterModel::Uniform { hi, .. } => *hi,
            ScatterModel::Exponential { .. } => T::infinity(),
            ScatterModel::SubProbability { base, .. } => base.support_end(),
            ScatterModel::PerturbedUniform { .. } => T::one(),
        }
    }

    /// Inverse of F on the finite part: smallest t with F(t) >= u, for
    /// `0 <= u < F(∞)`.
    pub fn quantile(&self, u: T) -> T {
        match self {
            ScatterModel::Uniform { lo, hi } => *lo + (*hi - *lo) * u,
            ScatterModel::Exponential { rate } => -(-u).ln_1p() / *rate,
            ScatterModel::SubProbability { base, deficit } => base.quantile(u / (T::one() - *deficit)),
            ScatterModel::PerturbedUniform { .. } => {
                bisect_increasing(|t| self.cdf(t) - u, T::zero(), T::one(), 200)
            }
        }
    }

    /// Stochastic minimum of F on the interval (s, t]: P(T₁ ∈ (s, t]).
    pub fn mass(&self, s: T, t: T) -> T {
        if t <= s {
            T::zero()
        } else {
            self.cdf(t) - self.cdf(s)
        }
    }
}

impl ScatterModel<f64> {
    /// One arrival epoch; `None` means the customer never arrives.
    pub fn sample(&self, rng: &mut RandomStream) -> Option<f64> {
        match self {
            ScatterModel::SubProbability { base, deficit } => {
                if rng.uniform() < *deficit {
                    None
                } else {
                    base.sample(rng)
                }
            }
            ScatterModel::Exponential { rate } => Some(rng.exp1() / rate),
            _ => Some(self.quantile(rng.uniform())),
        }
    }

    /// `n` epochs sorted ascending plus the number that landed at infinity.
    pub fn sample_arrivals(&self, n: usize, rng: &mut RandomStream) -> (Vec<f64>, usize) {
        let mut times = Vec::with_capacity(n);
        let mut at_infinity = 0;
        for _ in 0..n {
            match self.sample(rng) {
                Some(t) => times.push(t),
                None => at_infinity += 1,
            }
        }
        times.sort_by(f64::total_cmp);
        (times, at_infinity)
    }
}
