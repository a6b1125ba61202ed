//! Numerical acceptance checks, shared by the `validate` command and the
//! acceptance test target. Each criterion returns a report of individual
//! checks; a check can carry a note explaining a known, analysed deviation.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ldp::{is_estimate, log_mgf_v_slope, log_mgf_v_slope_below_max, rate_minimize, rate_profile, LdpProblem, TwistedLaw};
use crate::limits::{fclt_ks, fclt_samples, fluid_workload, sub_probability_cdf, Regime};
use crate::mc::{Estimate, Moments, Replicator};
use crate::path::{bridge_min, brownian_at_clock, EmpiricalCdf};
use crate::periodic::{
    det_service_steady, periodic_steady_cdf, periodic_transient_cdf, periodic_workload_at, phi_steady,
    PeriodicGaussParams, PhiBranch,
};
use crate::quadrature::{integrate_piecewise, QuadratureOptions};
use crate::queue::{crude_tail_estimate, offered_cov, offered_work, workload_at, workload_at_time, ArrivalPattern, OfferedWork, PeriodicConfig};
use crate::rng::RandomStream;
use crate::scatter::ScatterModel;
use crate::service::{ServiceModel, ServiceMoments};
use crate::tail::{
    curvature_a, exact_tail_probability, m_curve, problem_prefactor, sample_max, t_star, t_star_numeric,
    tail_prob_asymptotic, tail_prob_raw, TailProblem, TailRegime,
};
use crate::transient::{
    reference_forms, reflected_bridge_cdf, reflected_diffusion_cdf_closed, reflected_diffusion_cdf_quadrature,
    sample_reflected_diffusion, ReflectedLawParams,
};

pub const CRITERIA: [u8; 9] = [1, 2, 3, 4, 5, 6, 7, 8, 9];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidationConfig {
    pub seed: u64,
    /// 0 = all available cores.
    pub workers: usize,
    /// Multiplies every Monte Carlo replication count.
    pub reps_scale: f64,
    /// Multiplies every tolerance; values below 1 tighten the suite.
    pub tolerance_scale: f64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            seed: 20_240_601,
            workers: 0,
            reps_scale: 1.0,
            tolerance_scale: 1.0,
        }
    }
}

impl ValidationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.reps_scale > 0.0) || !self.reps_scale.is_finite() {
            return Err(Error::argument("reps_scale must be positive"));
        }
        if !(self.tolerance_scale >= 0.0) || !self.tolerance_scale.is_finite() {
            return Err(Error::argument("tolerance_scale must be non-negative"));
        }
        Ok(())
    }

    fn reps(&self, base: usize) -> usize {
        ((base as f64 * self.reps_scale).round() as usize).max(50)
    }

    /// Replicator whose streams do not overlap those of other checks.
    fn replicator(&self, tag: u64) -> Replicator {
        Replicator::new(self.seed)
            .with_workers(self.workers)
            .with_stream_offset(tag << 40)
    }

    fn le(&self, name: impl Into<String>, value: f64, limit: f64) -> Check {
        let limit = limit * self.tolerance_scale;
        Check {
            name: name.into(),
            value,
            limit,
            passed: value <= limit,
            required: true,
            note: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// The check passes when `value <= limit`.
    pub limit: f64,
    pub passed: bool,
    /// Informational checks do not affect the verdict.
    pub required: bool,
    /// Analysis of a known deviation, if any.
    pub note: Option<String>,
}

impl Check {
    fn known(mut self, note: &str) -> Self {
        self.note = Some(note.to_string());
        self
    }

    fn info(mut self) -> Self {
        self.required = false;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub id: u8,
    pub title: String,
    pub checks: Vec<Check>,
    pub seconds: f64,
}

impl CriterionReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed || !c.required)
    }

    /// Required checks that failed without an explanatory note.
    pub fn unexplained_failures(&self) -> Vec<&Check> {
        self.checks
            .iter()
            .filter(|c| c.required && !c.passed && c.note.is_none())
            .collect()
    }

    pub fn verdict_line(&self) -> String {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        let mut line = format!("criterion {} [{verdict}] {} ({:.1} s)", self.id, self.title, self.seconds);
        for c in self.checks.iter().filter(|c| c.required && !c.passed) {
            line.push_str(&format!("\n    failed: {} = {:.6e} > {:.6e}", c.name, c.value, c.limit));
            if let Some(n) = &c.note {
                line.push_str(&format!("\n      note: {n}"));
            }
        }
        line
    }
}

pub fn run_criterion(id: u8, cfg: &ValidationConfig) -> Result<CriterionReport> {
    cfg.validate()?;
    let start = Instant::now();
    let (title, checks) = match id {
        1 => ("large-deviation minimizers", criterion_ldp_minimizers(cfg)?),
        2 => ("reflected Brownian bridge law", criterion_bridge_law(cfg)?),
        3 => ("transient law of the reflected diffusion", criterion_transient_law(cfg)?),
        4 => ("diffusion limit at finite n", criterion_fclt(cfg)?),
        5 => ("fluid limit at finite n", criterion_fslln(cfg)?),
        6 => ("importance sampling", criterion_importance_sampling(cfg)?),
        7 => ("tail asymptotics", criterion_tail(cfg)?),
        8 => ("periodic laws", criterion_periodic(cfg)?),
        9 => ("structural properties", criterion_structure(cfg)?),
        _ => return Err(Error::argument(format!("unknown criterion {id}"))),
    };
    Ok(CriterionReport {
        id,
        title: title.to_string(),
        checks,
        seconds: start.elapsed().as_secs_f64(),
    })
}

pub fn run_all(cfg: &ValidationConfig) -> Result<Vec<CriterionReport>> {
    CRITERIA.iter().map(|&id| run_criterion(id, cfg)).collect()
}

fn exp1() -> ServiceModel<f64> {
    ServiceModel::Exponential { mean: 1.0 }
}

/// t = 0.5, c′ = 1.03, x = 0.5, uniform scattering, exp(1) service.
pub fn ldp_uniform_example() -> LdpProblem<f64> {
    LdpProblem::new(0.5, 0.5, 1.03, exp1(), ScatterModel::unit_uniform()).expect("valid problem")
}

/// t = 0.5, c′ = 5.6, x = 1000, exp(1) scattering and service.
pub fn ldp_exponential_example() -> LdpProblem<f64> {
    LdpProblem::new(0.5, 1000.0, 5.6, exp1(), ScatterModel::Exponential { rate: 1.0 }).expect("valid problem")
}

const UNIFORM_MINIMIZER_NOTE: &str = "I'(s) is increasing and convex on [0, t) for these parameters \
     (I'(0) ≈ 0.11847), so the minimizer is s = 0; the expected 0.1 is not reproducible";

fn criterion_ldp_minimizers(cfg: &ValidationConfig) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for (name, p, target, note) in [
        ("uniform scattering: |t* - 0.1|", ldp_uniform_example(), 0.1, Some(UNIFORM_MINIMIZER_NOTE)),
        ("exponential scattering: |t* - 0.3|", ldp_exponential_example(), 0.3, None),
    ] {
        let start = Instant::now();
        let (ts, _) = rate_minimize(&p)?;
        let mut c = cfg.le(name, (ts - target).abs(), 0.02);
        if let Some(n) = note {
            c = c.known(n);
        }
        out.push(c);
        out.push(cfg.le(format!("{name}: seconds"), start.elapsed().as_secs_f64(), 10.0).info());
    }
    Ok(out)
}

/// One draw of Ψ(B⁰ − d·e)(t) with exact within-cell minima.
fn reflected_bridge_draw(t: f64, d: f64, cells: usize, rng: &mut RandomStream) -> f64 {
    let h = t / cells as f64;
    let u: Vec<f64> = (1..=cells).map(|j| j as f64 * h).collect();
    let (w, w1) = brownian_at_clock(&u, rng);
    let mut prev = 0.0;
    let mut lo: f64 = 0.0;
    for j in 0..cells {
        let x = w[j] - u[j] * w1 - d * u[j];
        lo = lo.min(bridge_min(prev, x, h, rng.uniform_pos()));
        prev = x;
    }
    prev - lo
}

fn criterion_bridge_law(cfg: &ValidationConfig) -> Result<Vec<Check>> {
    let reps = cfg.reps(200_000);
    let mut derived_gap: f64 = 0.0;
    let mut printed_gap: f64 = 0.0;
    let mut k = 0;
    for &t in &[0.25, 0.5, 0.75] {
        for &d in &[-0.5, 0.0, 0.5] {
            let draws = cfg.replicator(20 + k).run(reps, |rng, _| reflected_bridge_draw(t, d, 8, rng));
            k += 1;
            let ecdf = EmpiricalCdf::new(draws);
            derived_gap = derived_gap.max(ecdf.ks_distance(|l| reflected_bridge_cdf(l, t, d).unwrap_or(f64::NAN)));
            printed_gap = printed_gap.max(ecdf.ks_distance(|l| {
                if l <= 0.0 {
                    0.0
                } else {
                    reference_forms::reflected_bridge_cdf_printed(l, t, d)
                }
            }));
        }
    }
    let mut doob_gap: f64 = 0.0;
    for &d in &[-0.5, 0.0, 0.5] {
        for i in 1..=60 {
            let l = i as f64 * 0.05;
            let doob = if l + d <= 0.0 { 0.0 } else { -(-2.0 * l * (l + d)).exp_m1() };
            doob_gap = doob_gap.max((reflected_bridge_cdf(l, 1.0 - 1e-12, d)? - doob).abs());
        }
    }
    Ok(vec![
        cfg.le("max KS gap, closed form vs Monte Carlo (9 (t, d) pairs)", derived_gap, 0.01),
        cfg.le("max KS gap, printed form vs Monte Carlo", printed_gap, 0.01)
            .info()
            .known("the printed variant misses its own t → 1 limit; the re-derived form is the one used"),
        cfg.le("t → 1 limit vs 1 - exp(-2λ(λ + d))", doob_gap, 1e-6),
    ])
}

/// One draw of Ψ(Z − d·e)(t), Z = σ_V·B + √(EV₁² − σ_V²)·B⁰.
fn criterion_transient_law(cfg: &ValidationConfig) -> Result<Vec<Check>> {
    let mut gap: f64 = 0.0;
    let mut points = 0usize;
    for &t in &[0.1, 0.3, 0.5, 0.7, 0.9] {
        for i in 1..=10 {
            let l = 0.2 * i as f64;
            for &d in &[-0.5, 0.0, 0.5] {
                for &(sg, ev2) in &[(0.25, 1.0), (0.5, 1.0), (1.0, 1.5)] {
                    let p = ReflectedLawParams::new(t, l, d, sg, ev2)?;
                    gap = gap.max((reflected_diffusion_cdf_closed(&p)? - reflected_diffusion_cdf_quadrature(&p)?).abs());
                    points += 1;
                }
            }
        }
    }
    let reps = cfg.reps(100_000);
    let mut mc_gap: f64 = 0.0;
    for (k, &(t, d, sg, ev2)) in [(0.5, 0.0, 0.5, 1.0), (0.3, 0.5, 0.25, 1.0), (0.8, -0.5, 1.0, 1.5)].iter().enumerate() {
        let base = ReflectedLawParams::new(t, 0.0, d, sg, ev2)?;
        let draws = cfg.replicator(30 + k as u64).run(reps, |rng, _| sample_reflected_diffusion(&base, 16, rng));
        let ecdf = EmpiricalCdf::new(draws);
        for i in 0..=150 {
            let l = 0.02 * i as f64;
            let q = reflected_diffusion_cdf_quadrature(&base.with_lambda(l))?;
            mc_gap = mc_gap.max((ecdf.eval(l) - q).abs());
        }
    }
    Ok(vec![
        cfg.le(format!("max |closed - quadrature| over {points} parameter points"), gap, 1e-8),
        cfg.le("max |Monte Carlo - quadrature| (3 parameter sets)", mc_gap, 0.01),
    ])
}

const FCLT_NOTE: &str = "at n = 10^4 the queue is still idle at t = 0.5 with probability ≈ 0.009 while the \
     limit law has no atom at 0; this bias plus KS sampling noise (≈ 0.009 at 10^4 draws) puts the gap right at 0.02";

fn criterion_fclt(cfg: &ValidationConfig) -> Result<Vec<Check>> {
    let svc = exp1();
    let draws = fclt_samples(10_000, &svc, &ScatterModel::unit_uniform(), 0.5, cfg.reps(10_000), 0.5, &cfg.replicator(40))?;
    let gap = fclt_ks(&draws, &svc, 0.5, 0.5)?;
    let idle = draws.iter().filter(|&&w| w <= 0.0).count() as f64 / draws.len() as f64;
    Ok(vec![
        cfg.le("KS gap of W(0.5)/sqrt(n) vs limit law, n = 10^4, a = 0.5", gap, 0.02).known(FCLT_NOTE),
        cfg.le("fraction of draws with W(0.5) = 0 (limit: none)", idle, 0.02).info(),
    ])
}

fn criterion_fslln(cfg: &ValidationConfig) -> Result<Vec<Check>> {
    let n = 100_000;
    // (label, service, scattering, c/n, horizon)
    type Case = (&'static str, ServiceModel<f64>, ScatterModel<f64>, f64, f64);
    let cases: [Case; 3] = [
        ("uniform scattering, exp(1) service, c/n = 0.9", exp1(), ScatterModel::unit_uniform(), 0.9, 1.0),
        (
            "exp(1) scattering, unit service, c/n = 0.8",
            ServiceModel::Deterministic { value: 1.0 },
            ScatterModel::Exponential { rate: 1.0 },
            0.8,
            3.0,
        ),
        (
            "uniform scattering with 25% no-shows, uniform[0,2] service, c/n = 0.5",
            ServiceModel::Uniform { lo: 0.0, hi: 2.0 },
            ScatterModel::SubProbability {
                base: Box::new(ScatterModel::unit_uniform()),
                deficit: 0.25,
            },
            0.5,
            1.0,
        ),
    ];
    let mut out = Vec::new();
    for (k, (name, svc, scatter, rho, horizon)) in cases.into_iter().enumerate() {
        let times: Vec<f64> = (1..=200).map(|i| horizon * i as f64 / 200.0).collect();
        let fluid: Vec<f64> = times
            .iter()
            .map(|&t| fluid_workload(t, &svc, &scatter, rho))
            .collect::<Result<_>>()?;
        let reps = cfg.reps(5).min(50);
        let gaps = cfg.replicator(50 + k as u64).run(reps, |rng, _| {
            let ow = OfferedWork::simulate(&svc, &scatter, n, rng);
            let w = workload_at(&ow, rho * n as f64, &times);
            w.iter()
                .zip(&fluid)
                .map(|(w, f)| (w / n as f64 - f).abs())
                .fold(0.0, f64::max)
        });
        let gap = gaps.into_iter().fold(0.0, f64::max);
        out.push(cfg.le(format!("sup |W/n - fluid|, {name}"), gap, 0.02));
    }
    Ok(out)
}

const IS_RATE_NOTE: &str = "-(1/n) log p at n = 80 still carries the sub-exponential prefactor; \
     the gap to I'(t*) shrinks only like log(n)/n";

fn criterion_importance_sampling(cfg: &ValidationConfig) -> Result<Vec<Check>> {
    let p = ldp_uniform_example();
    let tw = TwistedLaw::at_minimizer(&p)?;
    let (_, rate) = rate_minimize(&p)?;
    let is20 = is_estimate(&p, &tw, 20, cfg.reps(100_000), &cfg.replicator(60))?;
    let crude = crude_tail_estimate(&exp1(), &p.scatter, p.t, p.c_prime, p.x, 20, cfg.reps(400_000), &cfg.replicator(61))?;
    let is80 = is_estimate(&p, &tw, 80, cfg.reps(100_000), &cfg.replicator(62))?;
    let rate_hat = -is80.estimate.p.ln() / 80.0;
    let lr_z = |e: &Estimate| if e.std_err > 0.0 { (e.p - 1.0).abs() / e.std_err } else { (e.p - 1.0).abs() * f64::INFINITY };
    Ok(vec![
        cfg.le("n = 20: |IS - crude| in combined standard errors", is20.estimate.z_distance(&crude), 3.0),
        cfg.le("n = 80: relative gap of -(1/n) log p to I'(t*)", (rate_hat - rate).abs() / rate, 0.15)
            .known(IS_RATE_NOTE),
        cfg.le("n = 20: |mean LR - 1| in standard errors", lr_z(&is20.lr_mean), 3.0),
        cfg.le("n = 80: |mean LR - 1| in standard errors", lr_z(&is80.lr_mean), 3.0).info(),
    ])
}

/// σ̃″(t*) by central differences, σ̃(t) = m(t*)/m(t).
fn curvature_fd(p: &TailProblem<f64>) -> f64 {
    let ts = t_star(p);
    let m0 = m_curve(ts, p);
    let h = 1e-4;
    let s = |t: f64| m0 / m_curve(t, p);
    -(s(ts + h) - 2.0 + s(ts - h)) / (2.0 * h * h)
}

fn criterion_tail(cfg: &ValidationConfig) -> Result<Vec<Check>> {
    let mut t_gap: f64 = 0.0;
    let mut a_gap: f64 = 0.0;
    let cs2s = [0.25, 0.5, 1.0, 2.0, 3.0];
    for (i, &c) in [0.5, 1.0, 2.0, 4.0].iter().enumerate() {
        for (j, &x) in [0.5, 1.0, 2.0, 3.0, 5.0].iter().enumerate() {
            let p = TailProblem::<f64>::new(c, x, cs2s[(i + j) % 5])?;
            t_gap = t_gap.max((t_star(&p) - t_star_numeric(&p)).abs());
            if p.regime() == TailRegime::Interior {
                let a = curvature_a(&p)?;
                a_gap = a_gap.max((a - curvature_fd(&p)).abs() / a);
            }
        }
    }
    let interior = TailProblem::new(1.0, 1.0, 0.5)?;
    let boundary = TailProblem::new(1.0, 10.0, 3.0)?;
    let u = 4.0;
    let unit = |p: &TailProblem<f64>| -> Result<f64> {
        Ok(tail_prob_asymptotic(u, p)? / (problem_prefactor(p)? * (-u * u / 2.0).exp()))
    };
    let ratio = unit(&interior)? / unit(&boundary)?;

    // level with exact tail 10⁻⁴
    let base = TailProblem::new(1.0, 1.0, 0.5)?;
    let (mut lo, mut hi) = (0.1, 10.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if exact_tail_probability(&base.with_x(mid))? > 1e-4 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let p = base.with_x(0.5 * (lo + hi));
    let chunks = cfg.reps(400);
    let per = 10_000;
    let hits: usize = cfg
        .replicator(70)
        .run(chunks, |rng, _| (0..per).filter(|_| sample_max(&p, rng) > p.x).count())
        .into_iter()
        .sum();
    let mc = hits as f64 / (chunks * per) as f64;
    let asym = tail_prob_raw(&p)?;
    let fold = if mc > 0.0 { (asym / mc).max(mc / asym) } else { f64::INFINITY };
    Ok(vec![
        cfg.le("max |t* closed - numeric| (20 points)", t_gap, 1e-6),
        cfg.le("max relative |A - finite-difference curvature|", a_gap, 1e-3),
        cfg.le("|interior/boundary prefactor ratio - 2|", (ratio - 2.0).abs(), 1e-12),
        cfg.le("asymptotic vs Monte Carlo tail at p ≈ 1e-4 (fold factor)", fold, 2.0),
        cfg.le("asymptotic vs exact tail at p = 1e-4 (fold factor)", (asym / 1e-4).max(1e-4 / asym), 2.0).info(),
    ])
}

const PERIODIC_MC_NOTE: &str = "the steady law 1 - Φ(a)·exp(...) puts mass 1 - Φ(a) at 0 (0.31 for a = 0.5) \
     while the simulated workload is continuous, so no sample can get within 0.02 in KS";

fn criterion_periodic(cfg: &ValidationConfig) -> Result<Vec<Check>> {
    let m = ServiceMoments::new(0.75f64.sqrt(), 0.25)?;
    let a = 0.5;
    let lambdas: Vec<f64> = (0..=200).map(|i| i as f64 * 0.025).collect();

    let first = PeriodicGaussParams::new(a, m, 1.0)?;
    let mut first_gap: f64 = 0.0;
    for &l in &lambdas {
        first_gap = first_gap.max((periodic_transient_cdf(l, &first)? - phi_steady(l, a, &m)).abs());
    }
    let late = PeriodicGaussParams::new(a, m, 1000.0)?.with_branch(PhiBranch::Analytic);
    let mut late_gap: f64 = 0.0;
    for &l in &lambdas {
        late_gap = late_gap.max((periodic_transient_cdf(l, &late)? - periodic_steady_cdf(l, &late)?).abs());
    }

    let at25 = PeriodicGaussParams::new(a, m, 25.0)?;
    let draws = cfg.replicator(80).run(cfg.reps(10_000), |rng, _| periodic_workload_at(&at25, 64, rng).unwrap_or(f64::NAN));
    let ecdf = EmpiricalCdf::new(draws);
    let ks_steady = ecdf.ks_distance(|l| periodic_steady_cdf(l, &at25).unwrap_or(f64::NAN));
    let ks_one_period = ecdf.ks_distance(|l| phi_steady(l, a, &m));

    // bounded service, c = n + a√n, t = 5.5
    let n = 10_000;
    let rn = (n as f64).sqrt();
    let bounded = ServiceModel::Uniform { lo: 0.9, hi: 1.1 };
    let cfg6 = PeriodicConfig {
        period: 1.0,
        num_periods: 6,
        n,
        scatter: ScatterModel::unit_uniform(),
        pattern: ArrivalPattern::Recurring,
    };
    let c = n as f64 + a * rn;
    let draws = cfg
        .replicator(81)
        .run(cfg.reps(10_000), |rng, _| workload_at_time(&cfg6.simulate(&bounded, rng), c, 5.5) / rn);
    let bm = bounded.moments();
    let ks_bounded = EmpiricalCdf::new(draws).ks_distance(|l| phi_steady(l, a, &bm));

    // unit service, c = n + √n, t = 2.5
    let unit = ServiceModel::Deterministic { value: 1.0 };
    let cfg3 = PeriodicConfig {
        num_periods: 3,
        ..cfg6.clone()
    };
    let draws = cfg
        .replicator(82)
        .run(cfg.reps(10_000), |rng, _| workload_at_time(&cfg3.simulate(&unit, rng), n as f64 + rn, 2.5) / rn);
    let ks_det = EmpiricalCdf::new(draws).ks_distance(det_service_steady);

    Ok(vec![
        cfg.le("first period: max |transient - one-period law|", first_gap, 0.0),
        cfg.le("p_t = 1000: max |transient (unclamped φ) - steady law|", late_gap, 1e-6),
        cfg.le("Gaussian model at t = 25: KS vs steady law", ks_steady, 0.02).known(PERIODIC_MC_NOTE),
        cfg.le("Gaussian model at t = 25: KS vs one-period law", ks_one_period, 0.02).info(),
        cfg.le("queue, n = 10^4, uniform[0.9,1.1] service, t = 5.5: KS vs one-period law", ks_bounded, 0.03),
        cfg.le("queue, n = 10^4, unit service, t = 2.5: KS vs 1 - exp(-2x(1+x))", ks_det, 0.02),
    ])
}

/// Largest amount by which `f` leaves [0, 1] or decreases along `grid`.
fn monotone_violation(grid: &[f64], mut f: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    let mut worst: f64 = 0.0;
    let mut prev = f64::NEG_INFINITY;
    for &l in grid {
        let v = f(l)?;
        if !v.is_finite() {
            return Ok(f64::INFINITY);
        }
        worst = worst.max(-v).max(v - 1.0).max(prev - v);
        prev = v;
    }
    Ok(worst)
}

fn criterion_structure(cfg: &ValidationConfig) -> Result<Vec<Check>> {
    let mut out = Vec::new();

    let mut norm_gap: f64 = 0.0;
    let mut resid: f64 = 0.0;
    for p in [ldp_uniform_example(), ldp_exponential_example()] {
        for tw in [TwistedLaw::at_minimizer(&p)?, TwistedLaw::at(&p, 0.2)?] {
            let end = if p.scatter.support_end().is_finite() { p.scatter.support_end() } else { 60.0 };
            let cuts: Vec<f64> = [0.0, tw.t_star, tw.t, end]
                .windows(2)
                .filter(|w| w[1] > w[0])
                .map(|w| w[0])
                .chain([end])
                .collect();
            let opts = QuadratureOptions {
                abs_tol: 1e-13,
                ..QuadratureOptions::default()
            };
            let q = integrate_piecewise(|s| tw.arrival_density(s, &p).unwrap_or(f64::NAN), &cuts, opts)?;
            norm_gap = norm_gap.max((q.value + tw.mass_at_infinity(&p) - 1.0).abs());
        }
        let prof = rate_profile(&p, 1000)?;
        for ((s, th), gap) in prof.s.iter().zip(&prof.theta).zip(&prof.gap) {
            let slope = if gap.is_finite() {
                log_mgf_v_slope_below_max(*s, *gap, &p)?
            } else {
                log_mgf_v_slope(*s, *th, &p)?
            };
            resid = resid.max((slope - p.x - p.c_prime * (p.t - s)).abs());
        }
    }
    out.push(cfg.le("twisted law: |total mass - 1|", norm_gap, 1e-10));
    out.push(cfg.le("rate profile: max root residual", resid, 1e-9));

    let fine: Vec<f64> = (0..=500).map(|i| i as f64 * 0.01).collect();
    let coarse: Vec<f64> = (0..=60).map(|i| i as f64 * 0.05).collect();
    let mut worst: f64 = 0.0;
    for &t in &[0.1, 0.5, 0.9, 1.0] {
        for &d in &[-0.5, 0.0, 0.5] {
            worst = worst.max(monotone_violation(&fine, |l| reflected_bridge_cdf(l, t, d))?);
            let p = ReflectedLawParams::new(t, 0.0, d, 0.5, 1.0)?;
            worst = worst.max(monotone_violation(&fine, |l| reflected_diffusion_cdf_closed(&p.with_lambda(l)))?);
            worst = worst.max(monotone_violation(&coarse, |l| reflected_diffusion_cdf_quadrature(&p.with_lambda(l)))?);
        }
    }
    let regime = Regime {
        b: 0.8,
        ..Regime::balanced(0.5, exp1().moments())
    };
    worst = worst.max(monotone_violation(&fine, |l| sub_probability_cdf(l, 0.7, &regime))?);
    let m = ServiceMoments::new(0.75f64.sqrt(), 0.25)?;
    worst = worst.max(monotone_violation(&fine, |l| Ok(phi_steady(l, 0.5, &m)))?);
    worst = worst.max(monotone_violation(&fine, |l| Ok(det_service_steady(l)))?);
    for &t in &[1.0, 2.0, 5.5, 25.0] {
        let p = PeriodicGaussParams::new(0.5, m, t)?;
        worst = worst.max(monotone_violation(&fine, |l| periodic_transient_cdf(l, &p))?);
        worst = worst.max(monotone_violation(&fine, |l| periodic_steady_cdf(l, &p))?);
    }
    out.push(cfg.le("CDFs: worst decrease in λ or excursion outside [0, 1]", worst, 1e-12));

    let svc = exp1();
    let f = ScatterModel::unit_uniform();
    let pairs = [((0.0, 0.3), (0.3, 0.7)), ((0.1, 0.4), (0.5, 0.9)), ((0.0, 0.5), (0.5, 1.0))];
    let max_cov = pairs
        .iter()
        .map(|&(i1, i2)| offered_cov(&svc, &f, 100, i1, i2))
        .fold(f64::NEG_INFINITY, f64::max);
    out.push(cfg.le("closed-form covariance of disjoint intervals (max)", max_cov, 0.0));
    let (i1, i2) = pairs[1];
    let xy = cfg.replicator(90).run(cfg.reps(20_000), |rng, _| {
        let ow = OfferedWork::simulate(&svc, &f, 100, rng);
        let g = |i: (f64, f64)| offered_work(&ow.arrivals, &ow.works, i.0, i.1).unwrap_or(f64::NAN);
        (g(i1), g(i2))
    });
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / xy.len() as f64;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / xy.len() as f64;
    let prods: Moments = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).collect();
    let closed = offered_cov(&svc, &f, 100, i1, i2);
    out.push(cfg.le(
        "simulated vs closed-form covariance, in standard errors",
        (prods.mean - closed).abs() / prods.std_err(),
        3.0,
    ));

    let job = |workers: usize| {
        Replicator::new(cfg.seed)
            .with_workers(workers)
            .with_stream_offset(91 << 40)
            .run(64, |rng, _| {
                let ow = OfferedWork::simulate(&svc, &f, 2_000, rng);
                workload_at(&ow, 2_000.0, &[0.25, 0.5, 0.75])
            })
    };
    let (one, eight) = (job(1), job(8));
    let mismatches = one
        .iter()
        .flatten()
        .zip(eight.iter().flatten())
        .filter(|(a, b)| a.to_bits() != b.to_bits())
        .count();
    out.push(cfg.le("determinism: differing values between 1 and 8 workers", mismatches as f64, 0.0));
    Ok(out)
}
