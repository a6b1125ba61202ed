//! Service-time laws.

use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RandomStream;
use crate::scalar::Real;

/// Law of a single service requirement V₁ (work units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ServiceModel<T> {
    Deterministic { value: T },
    Exponential { mean: T },
    /// Uniform on `[lo, hi]`, `0 <= lo < hi`.
    Uniform { lo: T, hi: T },
    Gamma { shape: T, scale: T },
}

/// First two moments of V₁; enough for the Gaussian limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServiceMoments<T> {
    pub mean: T,
    pub variance: T,
}

impl<T: Real> ServiceMoments<T> {
    pub fn new(mean: T, variance: T) -> Result<Self> {
        if !(mean >= T::zero()) || !(variance >= T::zero()) {
            return Err(Error::argument("service mean and variance must be non-negative"));
        }
        Ok(Self { mean, variance })
    }

    pub fn second_moment(&self) -> T {
        self.variance + self.mean * self.mean
    }

    pub fn std_dev(&self) -> T {
        self.variance.sqrt()
    }
}

impl<T: Real> ServiceModel<T> {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ServiceModel::Deterministic { value } => value >= T::zero() && value.is_finite(),
            ServiceModel::Exponential { mean } => mean > T::zero() && mean.is_finite(),
            ServiceModel::Uniform { lo, hi } => lo >= T::zero() && hi > lo && hi.is_finite(),
            ServiceModel::Gamma { shape, scale } => {
                shape > T::zero() && scale > T::zero() && shape.is_finite() && scale.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::argument(format!("invalid service model {self:?}")))
        }
    }

    pub fn mean(&self) -> T {
        match *self {
            ServiceModel::Deterministic { value } => value,
            ServiceModel::Exponential { mean } => mean,
            ServiceModel::Uniform { lo, hi } => (lo + hi) * T::half(),
            ServiceModel::Gamma { shape, scale } => shape * scale,
        }
    }

    pub fn variance(&self) -> T {
        match *self {
            ServiceModel::Deterministic { .. } => T::zero(),
            ServiceModel::Exponential { mean } => mean * mean,
            ServiceModel::Uniform { lo, hi } => (hi - lo) * (hi - lo) / T::lit(12.0),
            ServiceModel::Gamma { shape, scale } => shape * scale * scale,
        }
    }

    pub fn second_moment(&self) -> T {
        let m = self.mean();
        self.variance() + m * m
    }

    /// Squared coefficient of variation σ²/(EV)².
    pub fn scv(&self) -> T {
        let m = self.mean();
        self.variance() / (m * m)
    }

    pub fn moments(&self) -> ServiceMoments<T> {
        ServiceMoments {
            mean: self.mean(),
            variance: self.variance(),
        }
    }

    /// Upper end of the MGF domain (`+∞` for bounded laws).
    pub fn theta_max(&self) -> T {
        match *self {
            ServiceModel::Deterministic { .. } | ServiceModel::Uniform { .. } => T::infinity(),
            ServiceModel::Exponential { mean } => mean.recip(),
            ServiceModel::Gamma { scale, .. } => scale.recip(),
        }
    }

    /// Largest value V₁ can take (`+∞` if unbounded).
    pub fn sup_support(&self) -> T {
        match *self {
            ServiceModel::Deterministic { value } => value,
            ServiceModel::Uniform { hi, .. } => hi,
            _ => T::infinity(),
        }
    }

    fn check_theta(&self, theta: T) -> Result<()> {
        let tm = self.theta_max();
        if theta < tm && !theta.is_nan() {
            Ok(())
        } else {
            Err(Error::MgfDomain {
                theta: theta.f64(),
                theta_max: tm.f64(),
            })
        }
    }

    /// φ(θ) = E e^{θV₁}.
    pub fn mgf(&self, theta: T) -> Result<T> {
        self.check_theta(theta)?;
        Ok(match *self {
            ServiceModel::Deterministic { value } => (theta * value).exp(),
            ServiceModel::Exponential { mean } => (T::one() - theta * mean).recip(),
            ServiceModel::Gamma { shape, scale } => (T::one() - theta * scale).powf(-shape),
            ServiceModel::Uniform { lo, hi } => {
                let w = hi - lo;
                if (theta * w).abs() < T::lit(1e-4) && (theta * hi).abs() < T::lit(1e-4) {
                    let (m1, m2, m3) = uniform_raw_moments(lo, hi);
                    T::one() + theta * m1 + theta * theta * m2 * T::half() + theta.powi(3) * m3 / T::lit(6.0)
                } else {
                    (theta * lo).exp() * (theta * w).exp_m1() / (theta * w)
                }
            }
        })
    }

    /// E[V₁ e^{θV₁}] = φ'(θ).
    pub fn tilted_mean_weight(&self, theta: T) -> Result<T> {
        self.check_theta(theta)?;
        Ok(match *self {
            ServiceModel::Deterministic { value } => value * (theta * value).exp(),
            ServiceModel::Exponential { mean } => {
                let r = T::one() - theta * mean;
                mean / (r * r)
            }
            ServiceModel::Gamma { shape, scale } => {
                shape * scale * (T::one() - theta * scale).powf(-shape - T::one())
            }
            ServiceModel::Uniform { lo, hi } => {
                let w = hi - lo;
                if (theta * w).abs() < T::lit(1e-4) && (theta * hi).abs() < T::lit(1e-4) {
                    let (m1, m2, m3) = uniform_raw_moments(lo, hi);
                    let m4 = uniform_raw_moment(lo, hi, 4);
                    m1 + theta * m2 + theta * theta * m3 * T::half() + theta.powi(3) * m4 / T::lit(6.0)
                } else {
                    // d/dθ of e^{θlo}(e^{θw}−1)/(θw)
                    let e_lo = (theta * lo).exp();
                    let e_hi = (theta * hi).exp();
                    ((hi * e_hi - lo * e_lo) / theta - (e_hi - e_lo) / (theta * theta)) / w
                }
            }
        })
    }

    /// (φ, φ′) at θ = θ_max − `gap`, evaluated from the gap itself so that
    /// roots close to θ_max keep full relative precision. `None` for laws
    /// with θ_max = ∞.
    pub fn mgf_pair_below_max(&self, gap: T) -> Option<(T, T)> {
        match *self {
            ServiceModel::Exponential { mean } => {
                let r = gap * mean;
                Some((r.recip(), mean / (r * r)))
            }
            ServiceModel::Gamma { shape, scale } => {
                let r = gap * scale;
                Some((r.powf(-shape), shape * scale * r.powf(-shape - T::one())))
            }
            _ => None,
        }
    }

    /// Mean of the exponentially tilted law e^{θv}P(V∈dv)/φ(θ).
    pub fn tilted_mean(&self, theta: T) -> Result<T> {
        Ok(self.tilted_mean_weight(theta)? / self.mgf(theta)?)
    }
}

fn uniform_raw_moment<T: Real>(lo: T, hi: T, k: i32) -> T {
    (hi.powi(k + 1) - lo.powi(k + 1)) / (T::from_i32(k + 1).unwrap() * (hi - lo))
}

fn uniform_raw_moments<T: Real>(lo: T, hi: T) -> (T, T, T) {
    (
        uniform_raw_moment(lo, hi, 1),
        uniform_raw_moment(lo, hi, 2),
        uniform_raw_moment(lo, hi, 3),
    )
}

impl ServiceModel<f64> {
    pub fn sample(&self, rng: &mut RandomStream) -> f64 {
        match *self {
            ServiceModel::Deterministic { value } => value,
            ServiceModel::Exponential { mean } => mean * rng.exp1(),
            ServiceModel::Uniform { lo, hi } => lo + (hi - lo) * rng.uniform(),
            ServiceModel::Gamma { shape, scale } => Gamma::new(shape, scale).expect("validated gamma").sample(rng),
        }
    }

    /// Draws from e^{θv}P(V∈dv)/φ(θ). Exponential and gamma laws stay in
    /// their family with scale s/(1 − θs); the uniform law is inverted
    /// exactly; deterministic service is unaffected.
    pub fn sample_tilted(&self, theta: f64, rng: &mut RandomStream) -> f64 {
        if theta == 0.0 {
            return self.sample(rng);
        }
        match *self {
            ServiceModel::Deterministic { value } => value,
            ServiceModel::Exponential { mean } => mean / (1.0 - theta * mean) * rng.exp1(),
            ServiceModel::Gamma { shape, scale } => Gamma::new(shape, scale / (1.0 - theta * scale))
                .expect("tilted gamma")
                .sample(rng),
            ServiceModel::Uniform { lo, hi } => {
                let w = hi - lo;
                let u = rng.uniform();
                // v = lo + ln(1 + u(e^{θw} − 1))/θ
                let v = lo + (u * (theta * w).exp_m1()).ln_1p() / theta;
                v.clamp(lo, hi)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn models() -> Vec<ServiceModel<f64>> {
        vec![
            ServiceModel::Deterministic { value: 1.0 },
            ServiceModel::Exponential { mean: 1.0 },
            ServiceModel::Uniform { lo: 0.5, hi: 1.5 },
            ServiceModel::Gamma { shape: 2.0, scale: 0.5 },
            ServiceModel::Gamma { shape: 0.5, scale: 2.0 },
        ]
    }

    #[test]
    fn mgf_at_zero_is_one() {
        for m in models() {
            assert_relative_eq!(m.mgf(0.0).unwrap(), 1.0, epsilon = 1e-15);
            assert_relative_eq!(m.tilted_mean_weight(0.0).unwrap(), m.mean(), epsilon = 1e-12);
        }
    }

    #[test]
    fn deterministic_mgf_is_exponential() {
        let m = ServiceModel::Deterministic { value: 1.0 };
        assert_relative_eq!(m.mgf(0.7).unwrap(), 0.7f64.exp(), epsilon = 1e-15);
        assert_relative_eq!(m.mgf(0.7).unwrap(), 2.01375, epsilon = 1e-5);
    }

    #[test]
    fn mgf_domain_error_names_theta_max() {
        let m = ServiceModel::Exponential { mean: 2.0 };
        match m.mgf(0.5) {
            Err(Error::MgfDomain { theta_max, .. }) => assert_eq!(theta_max, 0.5),
            other => panic!("unexpected {other:?}"),
        }
        assert!(m.mgf(0.49).is_ok());
    }

    #[test]
    fn mgf_derivative_matches_central_difference() {
        let h = 1e-5;
        for m in models() {
            let tm = m.theta_max().min(4.0);
            for &frac in &[-0.5, 0.0, 0.2, 0.5, 0.8] {
                let th = frac * tm;
                let fd = (m.mgf(th + h).unwrap() - m.mgf(th - h).unwrap()) / (2.0 * h);
                let exact = m.tilted_mean_weight(th).unwrap();
                assert_relative_eq!(fd, exact, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn mgf_convex_increasing_on_domain() {
        for m in models() {
            let tm = m.theta_max().min(3.0);
            let grid: Vec<f64> = (0..50).map(|i| 0.98 * tm * i as f64 / 49.0).collect();
            let vals: Vec<f64> = grid.iter().map(|&t| m.mgf(t).unwrap()).collect();
            for w in vals.windows(3) {
                assert!(w[1] >= w[0]);
                assert!(w[2] - 2.0 * w[1] + w[0] >= -1e-12);
            }
        }
    }

    #[test]
    fn exponential_mgf_half_by_monte_carlo() {
        // φ(0.5) = 2 for a unit-mean exponential; E e^{θV} has finite variance
        // only for θ < 1/2 so this is a heavy-tailed average — compare within
        // 3 standard errors.
        let m = ServiceModel::Exponential { mean: 1.0 };
        assert_relative_eq!(m.mgf(0.5).unwrap(), 2.0, epsilon = 1e-15);
        let mut rng = RandomStream::new(2024, 0);
        let n = 1_000_000;
        let mut s = 0.0;
        let mut s2 = 0.0;
        for _ in 0..n {
            let y = (0.5 * m.sample(&mut rng)).exp();
            s += y;
            s2 += y * y;
        }
        let mean = s / n as f64;
        let se = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((mean - 2.0).abs() < 3.0 * se.max(1e-3), "mean {mean} se {se}");
    }

    #[test]
    fn moment_identities() {
        for m in models() {
            assert!(m.variance() >= 0.0);
            assert_relative_eq!(m.second_moment(), m.variance() + m.mean().powi(2), epsilon = 1e-14);
        }
        let g = ServiceModel::Gamma { shape: 0.5, scale: 2.0 };
        assert_relative_eq!(g.scv(), 2.0, epsilon = 1e-14);
        let g = ServiceModel::Gamma { shape: 2.0, scale: 0.5 };
        assert_relative_eq!(g.scv(), 0.5, epsilon = 1e-14);
    }

    #[test]
    fn tilted_exponential_mean() {
        let m = ServiceModel::Exponential { mean: 1.0 };
        assert_relative_eq!(m.tilted_mean(0.5).unwrap(), 2.0, epsilon = 1e-14);
        let mut rng = RandomStream::new(3, 0);
        let n = 200_000;
        let avg: f64 = (0..n).map(|_| m.sample_tilted(0.5, &mut rng)).sum::<f64>() / n as f64;
        assert!((avg - 2.0).abs() < 0.02, "{avg}");
    }

    #[test]
    fn tilted_uniform_mean_matches_closed_form() {
        let m = ServiceModel::Uniform { lo: 0.0, hi: 2.0 };
        let mut rng = RandomStream::new(4, 0);
        let n = 200_000;
        for &th in &[-1.0, 0.7, 2.0] {
            let avg: f64 = (0..n).map(|_| m.sample_tilted(th, &mut rng)).sum::<f64>() / n as f64;
            let exact = m.tilted_mean(th).unwrap();
            assert!((avg - exact).abs() < 0.01, "θ={th}: {avg} vs {exact}");
        }
    }

    #[test]
    fn samples_are_non_negative() {
        let mut rng = RandomStream::new(9, 9);
        for m in models() {
            for _ in 0..10_000 {
                assert!(m.sample(&mut rng) >= 0.0);
            }
        }
    }

    #[test]
    fn single_precision_mgf() {
        let m = ServiceModel::<f32>::Exponential { mean: 1.0 };
        assert!((m.mgf(0.5).unwrap() - 2.0).abs() < 1e-6);
    }
}
