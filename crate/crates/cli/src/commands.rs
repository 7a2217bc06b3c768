//! Subcommand implementations. Each returns human-readable summary lines;
//! the tables themselves go to the output directory.

use std::path::{Path, PathBuf};

use log::{debug, info};
use onc_core::lp::InfeasibilityCertificate;
use onc_core::{
    analytic_metrics, assemble_lp, evaluate_policy, power_profile, recover_policy, simulate,
    snr_targets, solve_lp, validate_policy, verify_solution, AnalyticMetrics, LpStatus, Mode,
    Policy, PowerProfile, Scheme, SimConfig, SimReport, StateSpace, StationaryDistribution,
    SystemParams,
};
use rayon::prelude::*;

use crate::args::{Cli, Command};
use crate::config::{ConfigError, Format, ScenarioConfig, SweepVariable};
use crate::error::CliError;
use crate::plot::{line_chart, Series};
use crate::policy_file::{read_policy, write_policy};
use crate::report::{
    write_csv, Metrics, Row, POWER_HEADER, SIMULATE_HEADER, SOLVE_HEADER, SWEEP_HEADER,
    THRESHOLD_HEADER,
};

pub struct Context {
    pub config: ScenarioConfig,
    pub out: PathBuf,
}

impl Context {
    pub fn new(config: ScenarioConfig, out: PathBuf) -> Result<Self, CliError> {
        std::fs::create_dir_all(&out).map_err(CliError::io(&out))?;
        Ok(Context { config, out })
    }

    pub fn from_cli(cli: &Cli) -> Result<Self, CliError> {
        let config = match &cli.config {
            Some(path) => ScenarioConfig::load(path)?,
            None => ScenarioConfig::default(),
        };
        let out = cli
            .out
            .clone()
            .unwrap_or_else(|| config.output.directory.clone());
        Self::new(config, out)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write_table(&self, name: &str, header: &[&str], rows: &[Row]) -> Result<Option<PathBuf>, CliError> {
        if !self.config.emits(Format::Csv) {
            return Ok(None);
        }
        let path = self.path(name);
        write_csv(&path, header, rows)?;
        info!("wrote {}", path.display());
        Ok(Some(path))
    }

    fn sim_config(&self, params: SystemParams, scheme: Scheme, mode: Mode, seed: u64) -> SimConfig {
        let sim = &self.config.sim;
        let mut c = SimConfig::new(params, scheme, sim.horizon, seed).with_mode(mode);
        c.warmup = sim.warmup();
        c.power_cap = sim.power_cap;
        c.relay_buffer = sim.relay_buffer;
        c
    }

    fn seeds(&self, flag: &Option<Vec<u64>>) -> Result<Vec<u64>, CliError> {
        match flag {
            Some(s) if s.is_empty() => Err(CliError::Usage("--seeds must not be empty".into())),
            Some(s) => Ok(s.clone()),
            None => Ok(self.config.sim.seeds.clone()),
        }
    }
}

pub fn run(cli: &Cli) -> Result<Vec<String>, CliError> {
    let ctx = Context::from_cli(cli)?;
    match &cli.command {
        Command::Solve => solve(&ctx),
        Command::Power { policy } => power(&ctx, policy),
        Command::Simulate {
            policy,
            scheme,
            mode,
            seeds,
        } => {
            let seeds = ctx.seeds(seeds)?;
            simulate_cmd(&ctx, policy.as_deref(), *scheme, *mode, &seeds)
        }
        Command::Sweep {
            mode,
            seeds,
            emit_plots,
        } => {
            let seeds = ctx.seeds(seeds)?;
            sweep(&ctx, *mode, &seeds, *emit_plots)
        }
    }
}

fn numerical(e: impl std::fmt::Display) -> CliError {
    CliError::Numerical(e.to_string())
}

/// Optimal policy with everything derived from it.
struct Optimum {
    policy: Policy,
    pi: StationaryDistribution,
    metrics: AnalyticMetrics,
    profile: PowerProfile,
}

fn infeasible(cert: Option<&InfeasibilityCertificate>, d_max: f64) -> CliError {
    CliError::Infeasible(cert.map_or_else(
        || "no policy satisfies the constraints".to_string(),
        |c| c.summary(d_max),
    ))
}

fn optimum(params: &SystemParams) -> Result<Optimum, CliError> {
    let problem = assemble_lp(params).map_err(ConfigError::from)?;
    let solution = solve_lp(&problem);
    match solution.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(infeasible(solution.certificate.as_ref(), params.d_max)),
        status => return Err(numerical(format!("solver status {status:?}"))),
    }
    let (policy, pi) = recover_policy(&solution, params).map_err(numerical)?;
    let metrics = analytic_metrics(&pi, &policy, params);
    let profile = power_profile(
        &policy,
        &pi,
        &snr_targets(params.rate_r),
        params.scale_a,
        params.scale_b,
    );
    Ok(Optimum {
        policy,
        pi,
        metrics,
        profile,
    })
}

pub fn solve(ctx: &Context) -> Result<Vec<String>, CliError> {
    let params = ctx.config.params();
    let problem = assemble_lp(&params).map_err(ConfigError::from)?;
    let solution = solve_lp(&problem);
    match solution.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Err(infeasible(solution.certificate.as_ref(), params.d_max)),
        status => {
            let detail = solution.diagnostics.as_deref().unwrap_or("no diagnostics");
            return Err(numerical(format!("solver status {status:?}: {detail}")));
        }
    }
    let (policy, pi) = recover_policy(&solution, &params).map_err(numerical)?;
    let report = verify_solution(&solution, &params).map_err(numerical)?;
    let m = &report.metrics;

    let policy_path = ctx.path("policy.txt");
    std::fs::write(&policy_path, write_policy(&policy, Some(&pi)))
        .map_err(CliError::io(&policy_path))?;
    let row = Row::new()
        .num(params.lambda_a)
        .num(params.lambda_b)
        .int(params.n_a as u64)
        .int(params.n_b as u64)
        .num(params.d_max)
        .text("optimal")
        .num(m.mu1)
        .num(m.mu2)
        .num(m.mu_tot)
        .num(m.mean_queue)
        .opt(report.mean_delay)
        .num(solution.objective)
        .num(solution.duality_gap)
        .num(report.max_balance_residual)
        .num(report.normalization_residual)
        .num(report.pi_consistency)
        .int(report.unvisited.len() as u64)
        .text(if report.passed { "true" } else { "false" })
        .text(solution.diagnostics.as_deref().unwrap_or(""));
    ctx.write_table("solve.csv", SOLVE_HEADER, &[row])?;

    let mut lines = vec![
        format!("wrote {}", policy_path.display()),
        format!(
            "mu1 = {:.6}  mu2 = {:.6}  mean delay = {}",
            m.mu1,
            m.mu2,
            report.mean_delay.map_or("undefined".into(), |d| format!("{d:.6}"))
        ),
    ];
    if let Some(d) = &solution.diagnostics {
        lines.push(format!("note: {d}"));
    }
    if !report.passed {
        return Err(numerical(format!(
            "verification failed (balance {:.3e}, normalization {:.3e}, pi consistency {:.3e}, flow {:.3e})",
            report.max_balance_residual,
            report.normalization_residual,
            report.pi_consistency,
            report.flow_residual
        )));
    }
    Ok(lines)
}

/// Read a policy file and check it against the configured grid.
pub fn load_policy(path: &Path, space: StateSpace) -> Result<Policy, CliError> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    let table = read_policy(&text).map_err(|source| CliError::PolicyFile {
        path: path.to_path_buf(),
        source,
    })?;
    let invalid = |message: String| CliError::InvalidPolicy {
        path: path.to_path_buf(),
        message,
    };
    let report = validate_policy(&table.policy, &space).map_err(|e| {
        invalid(format!(
            "grid {}x{} does not match the configured {}x{}",
            e.got.n_a, e.got.n_b, e.expected.n_a, e.expected.n_b
        ))
    })?;
    if let Some(v) = report.violations.first() {
        return Err(invalid(format!(
            "{v} ({} violations in total)",
            report.violations.len()
        )));
    }
    Ok(table.policy)
}

pub fn power(ctx: &Context, policy_path: &Path) -> Result<Vec<String>, CliError> {
    let params = ctx.config.params();
    let space = StateSpace::from(&params);
    let policy = load_policy(policy_path, space)?;
    let (pi, metrics) = evaluate_policy(&params, &policy).map_err(numerical)?;
    let profile = power_profile(
        &policy,
        &pi,
        &snr_targets(params.rate_r),
        params.scale_a,
        params.scale_b,
    );

    let thresholds: Vec<Row> = space
        .states()
        .enumerate()
        .map(|(k, s)| {
            let t = profile.thresholds.get(k);
            let (pa, pb) = profile.per_state[k];
            Row::new()
                .int(s.i as u64)
                .int(s.j as u64)
                .num(pi.get(k))
                .text(if profile.thresholds.reachable[k] { "true" } else { "false" })
                .num(t.p)
                .num(t.q)
                .num(t.h_th_a)
                .num(t.h_th_b)
                .num(pa)
                .num(pb)
                .num(t.factorization_residual)
        })
        .collect();
    ctx.write_table("thresholds.csv", THRESHOLD_HEADER, &thresholds)?;

    let row = Row::new()
        .num(params.lambda_a)
        .num(params.lambda_b)
        .int(params.n_a as u64)
        .int(params.n_b as u64)
        .num(params.rate_r)
        .num(params.scale_a)
        .num(params.scale_b)
        .num(metrics.mu1)
        .num(metrics.mu2)
        .opt(metrics.mean_delay)
        .num(profile.avg_power_a)
        .num(profile.avg_power_b)
        .num(profile.total())
        .num(profile.thresholds.max_residual());
    ctx.write_table("power.csv", POWER_HEADER, &[row])?;

    Ok(vec![format!(
        "avg power A = {:.6}  B = {:.6}  total = {:.6}  (max factorization residual {:.2e})",
        profile.avg_power_a,
        profile.avg_power_b,
        profile.total(),
        profile.thresholds.max_residual()
    )])
}

fn sim_metrics(r: &SimReport) -> Metrics {
    let finite = |v: f64| v.is_finite().then_some(v);
    Metrics {
        mu1: Some(r.mu1_hat),
        mu1_se: finite(r.mu1_se),
        mu2: Some(r.mu2_hat),
        mu2_se: finite(r.mu2_se),
        mu_tot: Some(r.mu_tot_hat),
        mu_tot_se: finite(r.mu_tot_se),
        mean_delay: r.mean_delay_hat,
        mean_delay_se: r.mean_delay_hat.and(finite(r.mean_delay_se)),
        mean_queue: Some(r.mean_queue_hat),
        mean_queue_se: finite(r.mean_queue_se),
        avg_power_a: Some(r.avg_power_a_hat),
        avg_power_a_se: finite(r.avg_power_a_se),
        avg_power_b: Some(r.avg_power_b_hat),
        avg_power_b_se: finite(r.avg_power_b_se),
        avg_power_total: Some(r.avg_power_total()),
        clipped_fraction: Some(r.clipped_fraction),
    }
}

/// Mean over seeds; each standard error pools the per-run batch errors,
/// `sqrt(sum se_k^2) / K`.
pub fn aggregate(reports: &[SimReport]) -> Metrics {
    let runs: Vec<Metrics> = reports.iter().map(sim_metrics).collect();
    let k = runs.len() as f64;
    let mean = |f: fn(&Metrics) -> Option<f64>| -> Option<f64> {
        let vals: Option<Vec<f64>> = runs.iter().map(f).collect();
        vals.filter(|v| !v.is_empty()).map(|v| v.iter().sum::<f64>() / k)
    };
    let pooled = |f: fn(&Metrics) -> Option<f64>| -> Option<f64> {
        let vals: Option<Vec<f64>> = runs.iter().map(f).collect();
        vals.filter(|v| !v.is_empty())
            .map(|v| v.iter().map(|s| s * s).sum::<f64>().sqrt() / k)
    };
    Metrics {
        mu1: mean(|m| m.mu1),
        mu1_se: pooled(|m| m.mu1_se),
        mu2: mean(|m| m.mu2),
        mu2_se: pooled(|m| m.mu2_se),
        mu_tot: mean(|m| m.mu_tot),
        mu_tot_se: pooled(|m| m.mu_tot_se),
        mean_delay: mean(|m| m.mean_delay),
        mean_delay_se: pooled(|m| m.mean_delay_se),
        mean_queue: mean(|m| m.mean_queue),
        mean_queue_se: pooled(|m| m.mean_queue_se),
        avg_power_a: mean(|m| m.avg_power_a),
        avg_power_a_se: pooled(|m| m.avg_power_a_se),
        avg_power_b: mean(|m| m.avg_power_b),
        avg_power_b_se: pooled(|m| m.avg_power_b_se),
        avg_power_total: mean(|m| m.avg_power_total),
        clipped_fraction: mean(|m| m.clipped_fraction),
    }
}

/// Runs every seed; results keep the seed order.
fn run_seeds(
    ctx: &Context,
    params: SystemParams,
    scheme: Scheme,
    mode: Mode,
    seeds: &[u64],
    optimal: Option<(&Policy, &PowerProfile)>,
) -> Result<Vec<SimReport>, CliError> {
    seeds
        .par_iter()
        .map(|&seed| {
            let cfg = ctx.sim_config(params, scheme, mode, seed);
            debug!("simulating {scheme} seed {seed}");
            let report = simulate(
                &cfg,
                optimal.map(|o| o.0),
                optimal.map(|o| &o.1.thresholds),
            )?;
            Ok(report)
        })
        .collect()
}

pub fn simulate_cmd(
    ctx: &Context,
    policy_path: Option<&Path>,
    scheme: Scheme,
    mode: Mode,
    seeds: &[u64],
) -> Result<Vec<String>, CliError> {
    let params = ctx.config.params();
    let loaded = match (scheme, policy_path) {
        (Scheme::OptimalPolicy, None) => {
            return Err(CliError::Usage(
                "scheme optimal-policy needs --policy (write one with `onc solve`)".into(),
            ))
        }
        (Scheme::OptimalPolicy, Some(path)) => {
            let policy = load_policy(path, StateSpace::from(&params))?;
            let (pi, _) = evaluate_policy(&params, &policy).map_err(numerical)?;
            let profile = power_profile(
                &policy,
                &pi,
                &snr_targets(params.rate_r),
                params.scale_a,
                params.scale_b,
            );
            Some((policy, profile))
        }
        (_, Some(_)) => {
            return Err(CliError::Usage(format!(
                "scheme {scheme} takes no policy file"
            )))
        }
        (_, None) => None,
    };
    let reports = run_seeds(
        ctx,
        params,
        scheme,
        mode,
        seeds,
        loaded.as_ref().map(|(p, prof)| (p, prof)),
    )?;

    let prefix = |seed: String, slots: u64| {
        Row::new()
            .text(seed)
            .text(scheme.name())
            .text(mode.name())
            .num(params.lambda_a)
            .num(params.lambda_b)
            .int(params.n_a as u64)
            .int(params.n_b as u64)
            .num(params.d_max)
            .int(slots)
    };
    let mut rows: Vec<Row> = reports
        .iter()
        .map(|r| prefix(r.seed.to_string(), r.measured_slots).metrics(&sim_metrics(r)))
        .collect();
    let agg = aggregate(&reports);
    rows.push(prefix("mean".into(), reports[0].measured_slots).metrics(&agg));
    ctx.write_table("simulate.csv", SIMULATE_HEADER, &rows)?;

    let fmt = |v: Option<f64>, se: Option<f64>| match (v, se) {
        (Some(v), Some(se)) => format!("{v:.5} ± {se:.5}"),
        (Some(v), None) => format!("{v:.5}"),
        _ => "undefined".into(),
    };
    Ok(vec![format!(
        "{scheme} over {} seed(s): mu_tot = {}  mu2 = {}  delay = {}  power = {}",
        seeds.len(),
        fmt(agg.mu_tot, agg.mu_tot_se),
        fmt(agg.mu2, agg.mu2_se),
        fmt(agg.mean_delay, agg.mean_delay_se),
        fmt(agg.avg_power_total, None),
    )])
}

/// One row of the sweep table before formatting.
#[derive(Debug, Clone)]
pub struct SweepRecord {
    pub value: f64,
    pub params: SystemParams,
    pub scheme: Scheme,
    /// `analytic` or `sim`.
    pub source: &'static str,
    pub metrics: Metrics,
    pub error: Option<String>,
}

fn analytic_metrics_row(o: &Optimum) -> Metrics {
    let m = &o.metrics;
    Metrics {
        mu1: Some(m.mu1),
        mu2: Some(m.mu2),
        mu_tot: Some(m.mu_tot),
        mean_delay: m.mean_delay,
        mean_queue: Some(m.mean_queue),
        avg_power_a: Some(o.profile.avg_power_a),
        avg_power_b: Some(o.profile.avg_power_b),
        avg_power_total: Some(o.profile.total()),
        ..Metrics::default()
    }
}

fn sweep_point(
    ctx: &Context,
    variable: SweepVariable,
    value: f64,
    mode: Mode,
    seeds: &[u64],
) -> Vec<SweepRecord> {
    let params = variable.apply(&ctx.config.params(), value);
    let record = |scheme, source, result: Result<Metrics, String>| {
        let (metrics, error) = match result {
            Ok(m) => (m, None),
            Err(e) => (Metrics::default(), Some(e)),
        };
        SweepRecord {
            value,
            params,
            scheme,
            source,
            metrics,
            error,
        }
    };
    let optimum = optimum(&params).map_err(|e| e.to_string());
    let mut out = vec![record(
        Scheme::OptimalPolicy,
        "analytic",
        optimum.as_ref().map(analytic_metrics_row).map_err(Clone::clone),
    )];
    let sims: Vec<SweepRecord> = Scheme::ALL
        .par_iter()
        .map(|&scheme| {
            let reports = match (scheme, &optimum) {
                (Scheme::OptimalPolicy, Err(e)) => Err(format!("no optimal policy: {e}")),
                (Scheme::OptimalPolicy, Ok(o)) => {
                    run_seeds(ctx, params, scheme, mode, seeds, Some((&o.policy, &o.profile)))
                        .map_err(|e| e.to_string())
                }
                _ => run_seeds(ctx, params, scheme, mode, seeds, None).map_err(|e| e.to_string()),
            };
            let result = reports.map(|r| aggregate(&r));
            record(scheme, "sim", result)
        })
        .collect();
    out.extend(sims);
    if let Ok(o) = &optimum {
        debug!(
            "{} = {value}: mu2 = {:.6}, pi mass {:.3}",
            variable.name(),
            o.metrics.mu2,
            o.pi.total()
        );
    }
    out
}

pub fn sweep_records(ctx: &Context, mode: Mode, seeds: &[u64]) -> Vec<SweepRecord> {
    let sweep = &ctx.config.sweep;
    sweep
        .grid()
        .par_iter()
        .flat_map_iter(|&v| {
            info!("sweep point {} = {v}", sweep.variable.name());
            sweep_point(ctx, sweep.variable, v, mode, seeds)
        })
        .collect()
}

pub fn sweep(ctx: &Context, mode: Mode, seeds: &[u64], emit_plots: bool) -> Result<Vec<String>, CliError> {
    let variable = ctx.config.sweep.variable;
    let records = sweep_records(ctx, mode, seeds);
    let rows: Vec<Row> = records
        .iter()
        .map(|r| {
            Row::new()
                .text(variable.name())
                .num(r.value)
                .text(r.scheme.name())
                .text(r.source)
                .num(r.params.lambda_a)
                .num(r.params.lambda_b)
                .int(r.params.n_a as u64)
                .int(r.params.n_b as u64)
                .num(r.params.d_max)
                .int(if r.source == "sim" { seeds.len() as u64 } else { 0 })
                .metrics(&r.metrics)
                .text(r.error.as_deref().unwrap_or(""))
        })
        .collect();
    ctx.write_table("sweep.csv", SWEEP_HEADER, &rows)?;

    let errors = records.iter().filter(|r| r.error.is_some()).count();
    let mut lines = vec![format!(
        "{} grid points, {} rows, {errors} with errors",
        ctx.config.sweep.grid().len(),
        rows.len()
    )];
    if emit_plots || ctx.config.emits(Format::Svg) {
        for path in write_plots(ctx, variable, &records)? {
            lines.push(format!("wrote {}", path.display()));
        }
    }
    Ok(lines)
}

fn write_plots(
    ctx: &Context,
    variable: SweepVariable,
    records: &[SweepRecord],
) -> Result<Vec<PathBuf>, CliError> {
    let charts: [(&str, &str, &str, fn(&Metrics) -> Option<f64>); 3] = [
        ("throughput.svg", "Total throughput", "mu_tot", |m| m.mu_tot),
        ("delay.svg", "Mean delay", "slots", |m| m.mean_delay),
        ("power.svg", "Average power, A + B", "power", |m| m.avg_power_total),
    ];
    let mut written = Vec::new();
    for (file, title, y_label, field) in charts {
        let mut series: Vec<Series> = Vec::new();
        for r in records {
            let label = format!("{} ({})", r.scheme.name(), r.source);
            let y = field(&r.metrics).unwrap_or(f64::NAN);
            match series.iter_mut().find(|s| s.label == label) {
                Some(s) => s.points.push((r.value, y)),
                None => series.push(Series {
                    label,
                    points: vec![(r.value, y)],
                }),
            }
        }
        let path = ctx.path(file);
        std::fs::write(&path, line_chart(title, variable.name(), y_label, &series))
            .map_err(CliError::io(&path))?;
        written.push(path);
    }
    Ok(written)
}
