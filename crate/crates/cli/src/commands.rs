//! One function per subcommand: parse the record, compute, return tables.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use transitory_core::ldp::{is_estimate, rare_event_path, rate_profile, TwistedLaw};
use transitory_core::limits::fluid_workload;
use transitory_core::periodic::{periodic_steady_cdf, periodic_transient_cdf, periodic_workload_at, phi_steady, ArrivalPattern, PhiBranch};
use transitory_core::queue::{crude_tail_estimate, periodic_workload_path, workload_path, OfferedWork, PeriodicConfig};
use transitory_core::tail::{curvature_a, exact_tail_probability, m_curve, problem_prefactor, sample_max, t_star, t_star_numeric, tail_prob_raw, TailRegime};
use transitory_core::transient::{reflected_bridge_cdf, reflected_diffusion_cdf_closed, reflected_diffusion_cdf_quadrature, sample_reflected_diffusion};
use transitory_core::validation::{run_criterion, ValidationConfig, CRITERIA};
use transitory_core::{
    EmpiricalCdf, GridSpec, LdpProblem, PeriodicGaussParams, ReflectedLawParams, Replicator, ScatterModel, ServiceModel,
    ServiceMoments, TailProblem,
};

use crate::table::Table;
use crate::CliError;

pub const DEFAULT_SEED: u64 = 1;

/// What a command produced.
#[derive(Debug, Default)]
pub struct Output {
    pub tables: Vec<(String, Table)>,
    pub documents: Vec<(String, Value)>,
    pub lines: Vec<String>,
    /// Set by `validate` when a criterion fails.
    pub failed: bool,
}

impl Output {
    fn table(&mut self, name: &str, t: Table) {
        self.tables.push((name.to_string(), t));
    }
}

pub struct Ctx {
    pub seed: u64,
    pub workers: usize,
    pub config_hash: String,
}

impl Ctx {
    fn replicator(&self, stream: u64) -> Replicator {
        Replicator::new(self.seed).with_workers(self.workers).with_stream_offset(stream << 40)
    }
}

fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn exp1() -> ServiceModel<f64> {
    ServiceModel::Exponential { mean: 1.0 }
}
fn unit_uniform() -> ScatterModel<f64> {
    ScatterModel::unit_uniform()
}
fn unit_moments() -> ServiceMoments<f64> {
    ServiceMoments { mean: 1.0, variance: 1.0 }
}

fn grid_values(max: f64, points: usize) -> Result<Vec<f64>, CliError> {
    if points < 2 || !(max > 0.0) {
        return Err(CliError::Config("need points >= 2 and a positive grid end".into()));
    }
    Ok((0..points).map(|i| max * i as f64 / (points - 1) as f64).collect())
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodsSpec {
    pub num_periods: usize,
    #[serde(default = "one")]
    pub period: f64,
    #[serde(default)]
    pub pattern: ArrivalPattern,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub n: usize,
    pub service: ServiceModel<f64>,
    pub scatter: ScatterModel<f64>,
    /// Service rate per customer: c = rho·n.
    pub rho: f64,
    /// Defaults to 1, or to the last period end for periodic runs.
    #[serde(default)]
    pub horizon: Option<f64>,
    #[serde(default = "SimulateConfig::grid_points")]
    pub grid_points: usize,
    #[serde(default = "SimulateConfig::reps")]
    pub reps: usize,
    #[serde(default)]
    pub periods: Option<PeriodsSpec>,
}

impl SimulateConfig {
    fn grid_points() -> usize {
        200
    }
    fn reps() -> usize {
        1
    }
}

pub fn simulate(cfg: &SimulateConfig, ctx: &Ctx) -> Result<Output, CliError> {
    if cfg.n == 0 || cfg.reps == 0 || cfg.grid_points == 0 || !(cfg.rho > 0.0) {
        return Err(CliError::Config("need n >= 1, reps >= 1, grid_points >= 1 and rho > 0".into()));
    }
    cfg.service.validate()?;
    cfg.scatter.validate()?;
    let periodic = cfg.periods.as_ref().map(|p| PeriodicConfig {
        period: p.period,
        num_periods: p.num_periods,
        n: cfg.n,
        scatter: cfg.scatter.clone(),
        pattern: p.pattern,
    });
    if let Some(p) = &periodic {
        p.validate()?;
    }
    let horizon = cfg.horizon.unwrap_or_else(|| periodic.as_ref().map_or(1.0, |p| p.horizon()));
    let grid = GridSpec::new(0.0, horizon, cfg.grid_points)?;
    let n = cfg.n as f64;
    let c = cfg.rho * n;
    let fluid: Option<Vec<f64>> = match periodic {
        Some(_) => None,
        None => Some(
            grid.times()
                .iter()
                .map(|&t| fluid_workload(t, &cfg.service, &cfg.scatter, cfg.rho))
                .collect::<Result<_, _>>()?,
        ),
    };
    let paths = ctx.replicator(0).run(cfg.reps, |rng, _| match &periodic {
        Some(p) => periodic_workload_path(p, &cfg.service, c, grid, rng).map(|w| (w.path.values, 0)),
        None => {
            let ow = OfferedWork::simulate(&cfg.service, &cfg.scatter, cfg.n, rng);
            workload_path(&ow, c, grid).map(|w| (w.path.values, ow.never_arrived))
        }
    });

    let mut cols = vec!["replicate", "t", "workload", "scaled_workload"];
    let mut scols = vec!["replicate", "max_scaled_workload", "final_scaled_workload", "never_arrived"];
    if fluid.is_some() {
        cols.push("fluid");
        scols.push("sup_abs_fluid_gap");
    }
    let mut work = Table::new(&cols);
    let mut summary = Table::new(&scols);
    let times = grid.times();
    let mut worst: f64 = 0.0;
    for (k, path) in paths.into_iter().enumerate() {
        let (values, never) = path?;
        let mut gap: f64 = 0.0;
        for (i, (&t, &w)) in times.iter().zip(&values).enumerate() {
            let mut row = vec![k as f64, t, w, w / n];
            if let Some(f) = &fluid {
                row.push(f[i]);
                gap = gap.max((w / n - f[i]).abs());
            }
            work.push(row);
        }
        let max = values.iter().fold(0.0f64, |m, &v| m.max(v)) / n;
        let mut row = vec![k as f64, max, values.last().copied().unwrap_or(0.0) / n, never as f64];
        if fluid.is_some() {
            row.push(gap);
            worst = worst.max(gap);
        }
        summary.push(row);
    }
    let mut out = Output::default();
    if fluid.is_some() {
        out.lines.push(format!("sup_t |W/n - fluid| over {} replication(s): {worst:.6e}", cfg.reps));
    }
    out.table("workload.csv", work);
    out.table("summary.csv", summary);
    Ok(out)
}

// ---------------------------------------------------------------- fluid

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluidConfig {
    #[serde(default = "exp1")]
    pub service: ServiceModel<f64>,
    #[serde(default = "unit_uniform")]
    pub scatter: ScatterModel<f64>,
    #[serde(default = "FluidConfig::rho")]
    pub rho: f64,
    #[serde(default = "one")]
    pub horizon: f64,
    #[serde(default = "SimulateConfig::grid_points")]
    pub grid_points: usize,
}

impl FluidConfig {
    fn rho() -> f64 {
        0.9
    }
}

pub fn fluid(cfg: &FluidConfig, _ctx: &Ctx) -> Result<Output, CliError> {
    let grid = GridSpec::new(0.0, cfg.horizon, cfg.grid_points.max(1))?;
    let mut t = Table::new(&["t", "fluid_workload"]);
    for s in grid.times() {
        t.push(vec![s, fluid_workload(s, &cfg.service, &cfg.scatter, cfg.rho)?]);
    }
    let mut out = Output::default();
    out.table("fluid.csv", t);
    Ok(out)
}

// ---------------------------------------------------------------- transient

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransientConfig {
    #[serde(default = "half")]
    pub t: f64,
    /// Service-rate coefficient; the drift is d = a·EV₁.
    #[serde(default = "half")]
    pub a: f64,
    #[serde(default = "unit_moments")]
    pub moments: ServiceMoments<f64>,
    #[serde(default = "TransientConfig::lambda_max")]
    pub lambda_max: f64,
    #[serde(default = "TransientConfig::points")]
    pub points: usize,
    #[serde(default = "TransientConfig::reps")]
    pub reps: usize,
    #[serde(default = "TransientConfig::cells")]
    pub cells: usize,
}

impl TransientConfig {
    fn lambda_max() -> f64 {
        3.0
    }
    fn points() -> usize {
        61
    }
    fn reps() -> usize {
        100_000
    }
    fn cells() -> usize {
        16
    }
}

pub fn transient(cfg: &TransientConfig, ctx: &Ctx) -> Result<Output, CliError> {
    let base = ReflectedLawParams::from_moments(cfg.t, 0.0, cfg.a, &cfg.moments)?;
    let lambdas = grid_values(cfg.lambda_max, cfg.points)?;
    let ecdf = (cfg.reps > 0).then(|| {
        let cells = cfg.cells.max(1);
        EmpiricalCdf::new(ctx.replicator(0).run(cfg.reps, |rng, _| sample_reflected_diffusion(&base, cells, rng)))
    });
    let mut t = Table::new(&["lambda", "closed", "quadrature", "mc", "abs_closed_minus_quadrature", "bridge"]);
    let mut worst: f64 = 0.0;
    for l in lambdas {
        let p = base.with_lambda(l);
        let closed = reflected_diffusion_cdf_closed(&p)?;
        let quad = reflected_diffusion_cdf_quadrature(&p)?;
        let (ln, dn, _) = p.normalized();
        let bridge = if l > 0.0 { reflected_bridge_cdf(ln, p.t, dn)? } else { 0.0 };
        let mc = ecdf.as_ref().map_or(f64::NAN, |e| e.eval(l));
        worst = worst.max((closed - quad).abs());
        t.push(vec![l, closed, quad, mc, (closed - quad).abs(), bridge]);
    }
    let mut out = Output::default();
    out.lines.push(format!("max |closed - quadrature|: {worst:.3e}"));
    out.table("transient.csv", t);
    Ok(out)
}

// ---------------------------------------------------------------- tail

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailConfig {
    #[serde(default = "one")]
    pub c: f64,
    #[serde(default = "half")]
    pub cs2: f64,
    #[serde(default = "TailConfig::levels")]
    pub x: Vec<f64>,
    #[serde(default)]
    pub reps: usize,
}

impl TailConfig {
    fn levels() -> Vec<f64> {
        vec![0.5, 1.0, 2.0, 3.0, 4.0]
    }
}

pub fn tail(cfg: &TailConfig, ctx: &Ctx) -> Result<Output, CliError> {
    let base = TailProblem::new(cfg.c, cfg.x.first().copied().unwrap_or(1.0), cfg.cs2)?;
    let maxima = (cfg.reps > 0).then(|| EmpiricalCdf::new(ctx.replicator(0).run(cfg.reps, |rng, _| sample_max(&base, rng))));
    let mut t = Table::new(&[
        "x",
        "t_star",
        "t_star_numeric",
        "boundary",
        "level",
        "curvature_a",
        "prefactor",
        "asymptotic",
        "exact",
        "mc",
        "mc_std_err",
    ]);
    for &x in &cfg.x {
        let p = TailProblem::new(cfg.c, x, cfg.cs2)?;
        let ts = t_star(&p);
        let (mc, se) = match &maxima {
            Some(e) => {
                let q = 1.0 - e.eval(x);
                (q, (q * (1.0 - q) / e.len() as f64).sqrt())
            }
            None => (f64::NAN, f64::NAN),
        };
        t.push(vec![
            x,
            ts,
            t_star_numeric(&p),
            if p.regime() == TailRegime::Boundary { 1.0 } else { 0.0 },
            m_curve(ts, &p),
            curvature_a(&p).unwrap_or(f64::NAN),
            problem_prefactor(&p)?,
            tail_prob_raw(&p)?,
            exact_tail_probability(&p)?,
            mc,
            se,
        ]);
    }
    let mut out = Output::default();
    out.table("tail.csv", t);
    Ok(out)
}

// ---------------------------------------------------------------- ldp family

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    #[serde(default = "half")]
    pub t: f64,
    #[serde(default = "half")]
    pub x: f64,
    #[serde(default = "ProblemSpec::c_prime")]
    pub c_prime: f64,
    #[serde(default = "exp1")]
    pub service: ServiceModel<f64>,
    #[serde(default = "unit_uniform")]
    pub scatter: ScatterModel<f64>,
}

impl ProblemSpec {
    fn c_prime() -> f64 {
        1.03
    }

    fn build(&self) -> Result<LdpProblem<f64>, CliError> {
        Ok(LdpProblem::new(self.t, self.x, self.c_prime, self.service, self.scatter.clone())?)
    }
}

impl Default for ProblemSpec {
    fn default() -> Self {
        serde_json::from_value(json!({})).expect("all fields default")
    }
}

fn twist(p: &LdpProblem<f64>, t_star: Option<f64>) -> Result<TwistedLaw<f64>, CliError> {
    Ok(match t_star {
        Some(s) => TwistedLaw::at(p, s)?,
        None => TwistedLaw::at_minimizer(p)?,
    })
}

fn path_table(p: &LdpProblem<f64>, tw: &TwistedLaw<f64>, points: usize) -> Result<Table, CliError> {
    let mut t = Table::new(&["s", "path"]);
    for s in grid_values(p.t, points)? {
        t.push(vec![s, rare_event_path(s, tw, p)?]);
    }
    Ok(t)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LdpConfig {
    #[serde(default)]
    pub problem: ProblemSpec,
    #[serde(default = "LdpConfig::points")]
    pub points: usize,
    #[serde(default = "LdpConfig::path_points")]
    pub path_points: usize,
    /// Twist at this s instead of the minimizer.
    #[serde(default)]
    pub t_star: Option<f64>,
}

impl LdpConfig {
    fn points() -> usize {
        400
    }
    fn path_points() -> usize {
        201
    }
}

pub fn ldp(cfg: &LdpConfig, _ctx: &Ctx) -> Result<Output, CliError> {
    let p = cfg.problem.build()?;
    let prof = rate_profile(&p, cfg.points.max(2))?;
    let mut rate = Table::new(&["s", "rate"]);
    for (s, r) in prof.s.iter().zip(&prof.rate) {
        rate.push(vec![*s, *r]);
    }
    let tw = twist(&p, cfg.t_star)?;
    let mut min = Table::new(&["t_star", "rate_min", "theta_star", "v_star", "x_threshold", "inside_probability"]);
    min.push(vec![prof.t_star, prof.rate_min, tw.theta_star, tw.v_star, p.x_threshold()?, tw.inside_probability(&p)?]);
    let mut out = Output::default();
    out.lines.push(format!("minimizer t* = {:.6}, I'(t*) = {:.6e}", prof.t_star, prof.rate_min));
    out.table("rate_function.csv", rate);
    out.table("rare_path.csv", path_table(&p, &tw, cfg.path_points)?);
    out.table("minimizer.csv", min);
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RarePathConfig {
    #[serde(default)]
    pub problem: ProblemSpec,
    #[serde(default = "LdpConfig::path_points")]
    pub path_points: usize,
    #[serde(default)]
    pub t_star: Option<f64>,
}

pub fn rare_path(cfg: &RarePathConfig, _ctx: &Ctx) -> Result<Output, CliError> {
    let p = cfg.problem.build()?;
    let tw = twist(&p, cfg.t_star)?;
    let mut out = Output::default();
    out.table("rare_path.csv", path_table(&p, &tw, cfg.path_points)?);
    let mut tt = Table::new(&["t_star", "theta_star", "v_star"]);
    tt.push(vec![tw.t_star, tw.theta_star, tw.v_star]);
    out.table("twist.csv", tt);
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsConfig {
    #[serde(default)]
    pub problem: ProblemSpec,
    #[serde(default = "IsConfig::n")]
    pub n: usize,
    #[serde(default = "IsConfig::reps")]
    pub reps: usize,
    /// Plain Monte Carlo replications for comparison (0 skips it).
    #[serde(default)]
    pub crude_reps: usize,
    #[serde(default)]
    pub t_star: Option<f64>,
}

impl IsConfig {
    fn n() -> usize {
        20
    }
    fn reps() -> usize {
        100_000
    }
}

pub fn is(cfg: &IsConfig, ctx: &Ctx) -> Result<Output, CliError> {
    if cfg.n == 0 || cfg.reps == 0 {
        return Err(CliError::Config("need n >= 1 and reps >= 1".into()));
    }
    let p = cfg.problem.build()?;
    let tw = twist(&p, cfg.t_star)?;
    let (_, rate_min) = transitory_core::ldp::rate_minimize(&p)?;
    let r = is_estimate(&p, &tw, cfg.n, cfg.reps, &ctx.replicator(0))?;
    let crude = if cfg.crude_reps > 0 {
        Some(crude_tail_estimate(&p.service, &p.scatter, p.t, p.c_prime, p.x, cfg.n, cfg.crude_reps, &ctx.replicator(1))?)
    } else {
        None
    };
    let nan = f64::NAN;
    let mut t = Table::new(&[
        "n",
        "t_star",
        "theta_star",
        "estimate",
        "std_err",
        "lr_mean",
        "lr_std_err",
        "crude",
        "crude_std_err",
        "z_is_vs_crude",
        "rate_estimate",
        "rate_min",
    ]);
    t.push(vec![
        cfg.n as f64,
        tw.t_star,
        tw.theta_star,
        r.estimate.p,
        r.estimate.std_err,
        r.lr_mean.p,
        r.lr_mean.std_err,
        crude.map_or(nan, |c| c.p),
        crude.map_or(nan, |c| c.std_err),
        crude.map_or(nan, |c| c.z_distance(&r.estimate)),
        -r.estimate.p.ln() / cfg.n as f64,
        rate_min,
    ]);
    let mut out = Output::default();
    out.lines.push(format!("IS estimate {:.6e} ± {:.2e}", r.estimate.p, r.estimate.std_err));
    out.table("is_estimate.csv", t);
    Ok(out)
}

// ---------------------------------------------------------------- periodic

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodicCmdConfig {
    #[serde(default = "half")]
    pub a: f64,
    #[serde(default = "PeriodicCmdConfig::moments")]
    pub moments: ServiceMoments<f64>,
    #[serde(default = "PeriodicCmdConfig::t")]
    pub t: f64,
    #[serde(default = "TransientConfig::lambda_max")]
    pub lambda_max: f64,
    #[serde(default = "TransientConfig::points")]
    pub points: usize,
    #[serde(default)]
    pub branch: PhiBranch,
    #[serde(default)]
    pub pattern: ArrivalPattern,
    #[serde(default)]
    pub reps: usize,
    #[serde(default = "PeriodicCmdConfig::cells")]
    pub cells: usize,
}

impl PeriodicCmdConfig {
    /// EV₁² = 1, σ_V² = 0.25.
    fn moments() -> ServiceMoments<f64> {
        ServiceMoments {
            mean: 0.75f64.sqrt(),
            variance: 0.25,
        }
    }
    fn t() -> f64 {
        25.0
    }
    fn cells() -> usize {
        64
    }
}

pub fn periodic(cfg: &PeriodicCmdConfig, ctx: &Ctx) -> Result<Output, CliError> {
    let params = PeriodicGaussParams::new(cfg.a, cfg.moments, cfg.t)?
        .with_branch(cfg.branch)
        .with_pattern(cfg.pattern);
    let ecdf = (cfg.reps > 0).then(|| {
        let cells = cfg.cells.max(1);
        ctx.replicator(0).run(cfg.reps, |rng, _| periodic_workload_at(&params, cells, rng))
    });
    let ecdf = match ecdf {
        Some(d) => Some(EmpiricalCdf::new(d.into_iter().collect::<Result<_, _>>()?)),
        None => None,
    };
    let steady = params.steady_state_exists();
    let mut t = Table::new(&["lambda", "transient", "steady", "one_period", "mc"]);
    for l in grid_values(cfg.lambda_max, cfg.points)? {
        t.push(vec![
            l,
            periodic_transient_cdf(l, &params)?,
            if steady { periodic_steady_cdf(l, &params)? } else { f64::NAN },
            phi_steady(l, cfg.a, &cfg.moments),
            ecdf.as_ref().map_or(f64::NAN, |e| e.eval(l)),
        ]);
    }
    let mut out = Output::default();
    if !steady {
        out.lines.push("σ_V² ≥ EV₁²: no steady state, the steady column is nan".into());
    }
    out.table("periodic.csv", t);
    Ok(out)
}

// ---------------------------------------------------------------- validate

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateConfig {
    #[serde(default = "one")]
    pub reps_scale: f64,
    /// Multiplies every tolerance; 0 forces failures.
    #[serde(default = "one")]
    pub tolerance_scale: f64,
    #[serde(default = "ValidateConfig::criteria")]
    pub criteria: Vec<u8>,
}

impl ValidateConfig {
    fn criteria() -> Vec<u8> {
        CRITERIA.to_vec()
    }
}

pub fn validate(cfg: &ValidateConfig, ctx: &Ctx) -> Result<Output, CliError> {
    let vc = ValidationConfig {
        seed: ctx.seed,
        workers: ctx.workers,
        reps_scale: cfg.reps_scale,
        tolerance_scale: cfg.tolerance_scale,
    };
    vc.validate()?;
    if let Some(bad) = cfg.criteria.iter().find(|c| !CRITERIA.contains(c)) {
        return Err(CliError::Config(format!("unknown criterion {bad}")));
    }
    let mut out = Output::default();
    let mut table = Table::new(&["criterion", "passed", "failed_checks"]);
    let mut reports = Vec::new();
    for &id in &cfg.criteria {
        let r = run_criterion(id, &vc)?;
        out.lines.push(r.verdict_line());
        out.failed |= !r.passed();
        let failed = r.checks.iter().filter(|c| c.required && !c.passed).count();
        table.push(vec![id as f64, if r.passed() { 1.0 } else { 0.0 }, failed as f64]);
        reports.push(json!({
            "id": r.id,
            "title": r.title,
            "passed": r.passed(),
            "checks": r.checks,
        }));
    }
    out.documents.push((
        "verdict.json".into(),
        json!({
            "version": crate::table::VERSION,
            "seed": ctx.seed,
            "config_hash": ctx.config_hash,
            "passed": !out.failed,
            "criteria": reports,
        }),
    ));
    out.table("validation.csv", table);
    Ok(out)
}
