//! Uniform time grids, sampled paths and empirical-distribution helpers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RandomStream;
use crate::scalar::Real;
use crate::scatter::ScatterModel;
use crate::service::ServiceMoments;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec<T> {
    pub t0: T,
    pub t1: T,
    /// Number of cells; the grid has `m + 1` points.
    pub m: usize,
}

impl<T: Real> GridSpec<T> {
    pub fn new(t0: T, t1: T, m: usize) -> Result<Self> {
        if m == 0 || !(t1 > t0) {
            return Err(Error::argument("grid needs t1 > t0 and at least one cell"));
        }
        Ok(Self { t0, t1, m })
    }

    pub fn unit(m: usize) -> Self {
        Self {
            t0: T::zero(),
            t1: T::one(),
            m: m.max(1),
        }
    }

    pub fn step(&self) -> T {
        (self.t1 - self.t0) / T::from_usize(self.m).unwrap()
    }

    /// i-th grid point; the last one is exactly `t1`.
    pub fn time(&self, i: usize) -> T {
        if i >= self.m {
            self.t1
        } else {
            self.t0 + self.step() * T::from_usize(i).unwrap()
        }
    }

    pub fn times(&self) -> Vec<T> {
        (0..=self.m).map(|i| self.time(i)).collect()
    }

    /// Index of the last grid point `<= t` (clamped to the grid).
    pub fn floor_index(&self, t: T) -> usize {
        if t <= self.t0 {
            return 0;
        }
        let k = ((t - self.t0) / self.step()).floor().to_usize().unwrap_or(self.m);
        k.min(self.m)
    }
}

/// A function sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPath<T> {
    pub grid: GridSpec<T>,
    pub values: Vec<T>,
}

impl<T: Real> GridPath<T> {
    pub fn new(grid: GridSpec<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.m + 1 {
            return Err(Error::argument(format!(
                "path has {} values for a grid of {} points",
                values.len(),
                grid.m + 1
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: GridSpec<T>, mut f: impl FnMut(T) -> T) -> Self {
        let values = grid.times().into_iter().map(&mut f).collect();
        Self { grid, values }
    }

    pub fn zeros(grid: GridSpec<T>) -> Self {
        Self {
            grid,
            values: vec![T::zero(); grid.m + 1],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn last(&self) -> T {
        *self.values.last().unwrap()
    }

    /// Linear interpolation between grid points (constant outside).
    pub fn value_at(&self, t: T) -> T {
        let g = &self.grid;
        if t <= g.t0 {
            return self.values[0];
        }
        if t >= g.t1 {
            return self.last();
        }
        let i = g.floor_index(t).min(g.m - 1);
        let w = (t - g.time(i)) / g.step();
        self.values[i] + (self.values[i + 1] - self.values[i]) * w
    }

    pub fn map(&self, f: impl Fn(T, T) -> T) -> Self {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| f(self.grid.time(i), v))
            .collect();
        Self { grid: self.grid, values }
    }

    pub fn sup_abs_diff(&self, other: &Self) -> T {
        self.values
            .iter()
            .zip(&other.values)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }
}

/// Standard Brownian motion on the grid points, started at 0 at `t0`.
pub fn brownian_path(grid: GridSpec<f64>, rng: &mut RandomStream) -> GridPath<f64> {
    let sd = grid.step().sqrt();
    let mut values = Vec::with_capacity(grid.m + 1);
    let mut w = 0.0;
    values.push(w);
    for _ in 0..grid.m {
        w += sd * rng.normal();
        values.push(w);
    }
    GridPath { grid, values }
}

/// Brownian bridge on a grid over `[0, 1]`, built as `B(t) − t·B(1)`.
pub fn brownian_bridge_path(grid: GridSpec<f64>, rng: &mut RandomStream) -> GridPath<f64> {
    let mut p = brownian_path(grid, rng);
    let span = grid.t1 - grid.t0;
    let end = p.last();
    for (i, v) in p.values.iter_mut().enumerate() {
        *v -= (grid.time(i) - grid.t0) / span * end;
    }
    p.values[grid.m] = 0.0;
    p
}

/// Brownian motion observed at the non-decreasing clock values `u`
/// (all in `[0, 1]`), together with its value at clock time 1.
pub(crate) fn brownian_at_clock(u: &[f64], rng: &mut RandomStream) -> (Vec<f64>, f64) {
    let mut out = Vec::with_capacity(u.len());
    let mut prev_u = 0.0;
    let mut w = 0.0;
    for &ui in u {
        let du = (ui - prev_u).max(0.0);
        if du > 0.0 {
            w += du.sqrt() * rng.normal();
        }
        out.push(w);
        prev_u = prev_u.max(ui);
    }
    let tail = (1.0 - prev_u).max(0.0);
    let w1 = if tail > 0.0 { w + tail.sqrt() * rng.normal() } else { w };
    (out, w1)
}

/// Z(t) = σ_V·B₁(F(t)) + EV₁·B₂⁰(F(t)) on the grid, with B₁ ⟂ B₂⁰.
///
/// The bridge is drawn first; when σ_V = 0 no further variates are used.
pub fn z_process_path(
    service: &ServiceMoments<f64>,
    scatter: &ScatterModel<f64>,
    grid: GridSpec<f64>,
    rng: &mut RandomStream,
) -> GridPath<f64> {
    let u: Vec<f64> = grid.times().into_iter().map(|t| scatter.cdf(t)).collect();
    let (w, w1) = brownian_at_clock(&u, rng);
    let mut values: Vec<f64> = u
        .iter()
        .zip(&w)
        .map(|(&ui, &wi)| service.mean * (wi - ui * w1))
        .collect();
    let sd = service.std_dev();
    if sd > 0.0 {
        let (b1, _) = brownian_at_clock(&u, rng);
        for (v, b) in values.iter_mut().zip(b1) {
            *v += sd * b;
        }
    }
    GridPath { grid, values }
}

/// Minimum over a cell of a Brownian bridge from `a` to `b` with total
/// variance `var`, sampled exactly by inversion with `u ∈ (0, 1]`.
#[inline]
pub fn bridge_min(a: f64, b: f64, var: f64, u: f64) -> f64 {
    if var <= 0.0 {
        return a.min(b);
    }
    let d = a - b;
    0.5 * (a + b - (d * d - 2.0 * var * u.ln()).sqrt())
}

/// Maximum counterpart of [`bridge_min`].
#[inline]
pub fn bridge_max(a: f64, b: f64, var: f64, u: f64) -> f64 {
    -bridge_min(-a, -b, var, u)
}

/// `x(end) − min_{[t0, end]} x` for a path whose within-cell fluctuations
/// are Brownian bridges of variance `cell_var[i]` on cell `i`.
pub fn reflected_terminal_continuous(values: &[f64], cell_var: impl Fn(usize) -> f64, rng: &mut RandomStream) -> f64 {
    let mut lo = values[0];
    for i in 0..values.len() - 1 {
        let m = bridge_min(values[i], values[i + 1], cell_var(i), rng.uniform_pos());
        lo = lo.min(m);
    }
    values[values.len() - 1] - lo
}

/// Right-continuous empirical distribution function.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(mut samples: Vec<f64>) -> Self {
        samples.sort_by(f64::total_cmp);
        Self { sorted: samples }
    }

    /// Assumes the input is already sorted.
    pub fn from_sorted(sorted: Vec<f64>) -> Self {
        debug_assert!(sorted.windows(2).all(|w| w[0] <= w[1]));
        Self { sorted }
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.sorted
    }

    /// Fₙ(t) = #{i : Tᵢ ≤ t}/n; an empty sample gives 0.
    pub fn eval(&self, t: f64) -> f64 {
        if self.sorted.is_empty() {
            return 0.0;
        }
        self.sorted.partition_point(|&x| x <= t) as f64 / self.sorted.len() as f64
    }

    /// sup_t |Fₙ(t) − F(t)| for a continuous F, evaluated at the jumps.
    /// An atom of F at a sample value is handled by comparing both one-sided
    /// limits of Fₙ with F at that point.
    pub fn ks_distance(&self, cdf: impl Fn(f64) -> f64) -> f64 {
        let n = self.sorted.len() as f64;
        let mut d: f64 = 0.0;
        let mut i = 0;
        while i < self.sorted.len() {
            let x = self.sorted[i];
            let mut j = i;
            while j < self.sorted.len() && self.sorted[j] == x {
                j += 1;
            }
            let f = cdf(x);
            d = d.max((j as f64 / n - f).abs()).max((f - i as f64 / n).abs());
            i = j;
        }
        d
    }

    /// Two-sample Kolmogorov–Smirnov statistic.
    pub fn ks_two_sample(&self, other: &EmpiricalCdf) -> f64 {
        let (a, b) = (&self.sorted, &other.sorted);
        let (na, nb) = (a.len() as f64, b.len() as f64);
        let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
        while i < a.len() && j < b.len() {
            let x = a[i].min(b[j]);
            while i < a.len() && a[i] <= x {
                i += 1;
            }
            while j < b.len() && b[j] <= x {
                j += 1;
            }
            d = d.max((i as f64 / na - j as f64 / nb).abs());
        }
        d
    }
}

/// Evaluator for the empirical CDF of already-sorted times.
pub fn empirical_cdf(times: &[f64]) -> EmpiricalCdf {
    EmpiricalCdf::from_sorted(times.to_vec())
}

/// Jarque–Bera statistic; asymptotically χ²₂ under normality.
pub fn jarque_bera(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in xs {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let skew = m3 / m2.powf(1.5);
    let kurt = m4 / (m2 * m2) - 3.0;
    n / 6.0 * (skew * skew + kurt * kurt / 4.0)
}

/// Sample variance and covariance helpers used by the path tests.
pub fn sample_cov(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / (n - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::Replicator;
    use crate::special::normal_cdf;

    #[test]
    fn grid_endpoints_exact() {
        let g = GridSpec::new(0.0, 1.0, 3).unwrap();
        assert_eq!(g.time(3), 1.0);
        assert_eq!(g.times().len(), 4);
        assert_eq!(g.floor_index(0.5), 1);
        assert!(GridSpec::new(1.0, 1.0, 3).is_err());
    }

    #[test]
    fn interpolation() {
        let g = GridSpec::<f64>::unit(4);
        let p = GridPath::from_fn(g, |t| 2.0 * t);
        assert!((p.value_at(0.3) - 0.6).abs() < 1e-15);
        assert!(GridPath::new(g, vec![0.0; 3]).is_err());
    }

    #[test]
    fn bridge_is_pinned() {
        let mut rng = RandomStream::new(3, 0);
        let p = brownian_bridge_path(GridSpec::unit(64), &mut rng);
        assert_eq!(p.values[0], 0.0);
        assert_eq!(p.last(), 0.0);
    }

    #[test]
    fn bridge_moments_and_normality() {
        let reps = 100_000;
        let rows = Replicator::new(11).run(reps, |rng, _| {
            let p = brownian_bridge_path(GridSpec::unit(8), rng);
            (p.values[2], p.values[4], p.values[6])
        });
        let a: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let b: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let c: Vec<f64> = rows.iter().map(|r| r.2).collect();
        assert!((sample_cov(&b, &b) - 0.25).abs() < 0.005);
        assert!((sample_cov(&a, &c) - 0.0625).abs() < 0.005);
        // χ²₂ 1% critical value
        for xs in [&a, &b, &c] {
            assert!(jarque_bera(xs) < 9.21);
        }
    }

    #[test]
    fn z_without_service_noise_is_scaled_bridge() {
        let mom = ServiceMoments::new(2.0, 0.0).unwrap();
        let grid = GridSpec::unit(16);
        let z = z_process_path(&mom, &ScatterModel::unit_uniform(), grid, &mut RandomStream::new(5, 1));
        let b = brownian_bridge_path(grid, &mut RandomStream::new(5, 1));
        for (zi, bi) in z.values.iter().zip(&b.values) {
            assert!((zi - 2.0 * bi).abs() < 1e-12);
        }
    }

    #[test]
    fn z_variance() {
        let mom = ServiceMoments::new(1.0, 0.25).unwrap();
        let rows = Replicator::new(12).run(100_000, |rng, _| {
            let z = z_process_path(&mom, &ScatterModel::unit_uniform(), GridSpec::unit(4), rng);
            (z.values[1], z.values[2], z.values[4])
        });
        let col = |k: usize| -> Vec<f64> {
            rows.iter()
                .map(|r| match k {
                    0 => r.0,
                    1 => r.1,
                    _ => r.2,
                })
                .collect()
        };
        for (k, t) in [(0, 0.25), (1, 0.5), (2, 1.0)] {
            let v = col(k);
            let want = 0.25 * t + t * (1.0 - t);
            assert!((sample_cov(&v, &v) - want).abs() < 0.01, "t={t}");
        }
    }

    #[test]
    fn empirical_cdf_counts() {
        let f = empirical_cdf(&[1.0, 2.0, 3.0]);
        assert!((f.eval(2.0) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(f.eval(0.5), 0.0);
        assert_eq!(EmpiricalCdf::new(vec![]).eval(1.0), 0.0);
    }

    #[test]
    fn dkw_band() {
        let mut means = Vec::new();
        for (j, &n) in [1_000usize, 10_000, 100_000].iter().enumerate() {
            let ds = Replicator::new(13).with_stream_offset(1000 * j as u64).run(100, |rng, _| {
                let xs: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
                EmpiricalCdf::new(xs).ks_distance(|t| t.clamp(0.0, 1.0))
            });
            let inside = ds.iter().filter(|&&d| d < 3.0 * 1.36 / (n as f64).sqrt()).count();
            assert!(inside >= 95);
            means.push(ds.iter().sum::<f64>() / 100.0);
        }
        assert!(means[0] > means[1] && means[1] > means[2]);
    }

    #[test]
    fn bridge_min_matches_reflection_principle() {
        // min of a standard bridge from 0 to 0 over unit time: P(min <= -m) = e^{-2m²}
        let mut rng = RandomStream::new(21, 0);
        let n = 200_000;
        let hits = (0..n)
            .filter(|_| bridge_min(0.0, 0.0, 1.0, rng.uniform_pos()) <= -0.5)
            .count();
        let p = hits as f64 / n as f64;
        assert!((p - (-0.5f64).exp()).abs() < 0.005, "{p}");
        assert!(bridge_max(0.0, 1.0, 0.0, 0.5) == 1.0);
    }

    #[test]
    fn continuous_reflection_of_brownian_motion() {
        // Ψ(B)(1) = B(1) − min B has the law of |N|·… : P(Ψ(B)(1) <= y) = 2Φ(y) − 1
        let reps = 100_000;
        let ys = Replicator::new(22).run(reps, |rng, _| {
            let p = brownian_path(GridSpec::unit(4), rng);
            reflected_terminal_continuous(&p.values, |_| 0.25, rng)
        });
        let ks = EmpiricalCdf::new(ys).ks_distance(|y| 2.0 * normal_cdf(y.max(0.0)) - 1.0);
        assert!(ks < 0.01, "{ks}");
    }

    #[test]
    fn two_sample_ks_of_identical_samples_is_zero() {
        let a = EmpiricalCdf::new(vec![0.3, 0.1, 0.2]);
        assert_eq!(a.ks_two_sample(&a.clone()), 0.0);
        let b = EmpiricalCdf::new(vec![1.1, 1.2]);
        assert_eq!(a.ks_two_sample(&b), 1.0);
    }
}
