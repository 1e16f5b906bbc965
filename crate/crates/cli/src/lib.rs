//! `wpc` command-line front end: single-point evaluation, parameter sweeps,
//! Monte Carlo runs, optimal rate and time split, EH transfer curves and
//! sigmoid fitting. Every command writes CSV preceded by `#` comment lines
//! holding the tool version and the fully resolved scenario.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use wpc_core::analysis::{
    optimal_rate_asymptotic, optimal_tau_asymptotic, outage_asymptotic, outage_quadrature,
    outage_series, rate_alpha, tau_beta, throughput, throughput_asymptotic, OutageEstimate,
    SystemParams, QUAD_REL_TOL,
};
use wpc_core::channel::EffectiveChannel;
use wpc_core::ehmodel::{fit_sigmoid, load_samples_uw, EhModel, Tabulated};
use wpc_core::mcsim::{simulate, SimConfig, DEFAULT_BATCH};
use wpc_core::numerics::{maximize_quasiconcave, DEFAULT_MAX_TOL};
use wpc_core::scenario::{dbm_to_watts, parse_power, EhChoice, Scenario};
use wpc_core::Error;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Exit status for bad arguments, scenario files or data files.
pub const EXIT_CONFIG: i32 = 1;
/// Exit status when a numerical method fails to converge.
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "wpc",
    version,
    about = "Outage and throughput of a wireless-powered uplink with a non-linear energy harvester"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Scenario file with `key = value unit` lines.
    #[arg(long, global = true)]
    pub scenario: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "WPC_THREADS")]
    pub threads: Option<std::num::NonZeroUsize>,
    /// Write the CSV here instead of stdout.
    #[arg(short, long, global = true)]
    pub output: Option<PathBuf>,
    /// Transmit power, e.g. `27dBm` or `0.5W`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub pt: Option<String>,
    #[arg(long, global = true)]
    pub tau: Option<String>,
    #[arg(long, global = true)]
    pub rate: Option<String>,
    #[arg(long, global = true)]
    pub m1: Option<String>,
    #[arg(long, global = true)]
    pub n1: Option<String>,
    #[arg(long, global = true)]
    pub m2: Option<String>,
    #[arg(long, global = true)]
    pub n2: Option<String>,
    /// EH model: sigmoid, linear, piecewise or tabulated.
    #[arg(long, global = true)]
    pub eh: Option<String>,
    /// Any scenario key, as `key=value`; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Args, Clone, Copy)]
pub struct McArgs {
    /// Monte Carlo samples per point.
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Samples per parallel work unit.
    #[arg(long, default_value_t = DEFAULT_BATCH)]
    pub batch: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Outage and throughput of one configuration by each requested method.
    Eval {
        #[arg(long, default_value = "quadrature,series,asymptotic,upper_bound")]
        methods: String,
        #[command(flatten)]
        mc: McArgs,
    },
    /// Sweep one parameter and tabulate the requested methods.
    Sweep {
        #[arg(long, value_enum)]
        axis: Axis,
        #[arg(long, allow_hyphen_values = true)]
        start: f64,
        #[arg(long, allow_hyphen_values = true)]
        stop: f64,
        #[arg(long)]
        points: usize,
        #[arg(long, value_enum, default_value_t = Scale::Linear)]
        scale: Scale,
        #[arg(long, default_value = "quadrature,asymptotic")]
        methods: String,
        #[arg(long, value_enum, default_value_t = Metric::Outage)]
        metric: Metric,
        #[command(flatten)]
        mc: McArgs,
    },
    /// Monte Carlo estimate of outage, throughput and harvested power.
    Mc {
        #[command(flatten)]
        mc: McArgs,
    },
    /// Rate maximizing the high-power throughput.
    OptRate {
        /// Override α = λ₂σ²(1−τ)/(θMτ) by rescaling the uplink rate λ₂.
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// EH time factor maximizing the high-power throughput.
    OptTau {
        /// Override β = λ₂σ²(2^R−1)/(θM) by rescaling the uplink rate λ₂.
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Harvested power against input power for each EH model.
    EhCurve {
        #[arg(long, default_value = "0uW")]
        start: String,
        #[arg(long, default_value = "300uW")]
        stop: String,
        #[arg(long, default_value_t = 61)]
        points: usize,
        #[arg(long, value_enum, default_value_t = Scale::Linear)]
        scale: Scale,
        /// Measured samples (µW, two columns) to add as a tabulated model.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Fit the sigmoid model to measured samples (µW, two columns).
    Fit {
        #[arg(long)]
        data: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Axis {
    PtDbm,
    Rate,
    Tau,
    N1,
    N2,
    M1,
    M2,
}

impl Axis {
    fn name(self) -> &'static str {
        match self {
            Axis::PtDbm => "pt_dbm",
            Axis::Rate => "rate",
            Axis::Tau => "tau",
            Axis::N1 => "n1",
            Axis::N2 => "n2",
            Axis::M1 => "m1",
            Axis::M2 => "m2",
        }
    }

    fn is_integer(self) -> bool {
        matches!(self, Axis::N1 | Axis::N2 | Axis::M1 | Axis::M2)
    }

    fn apply(self, s: &mut Scenario, v: f64) {
        match self {
            Axis::PtDbm => s.pt_w = dbm_to_watts(v),
            Axis::Rate => s.rate = v,
            Axis::Tau => s.tau = v,
            Axis::N1 => s.n1 = v as u32,
            Axis::N2 => s.n2 = v as u32,
            Axis::M1 => s.m1 = v as u32,
            Axis::M2 => s.m2 = v as u32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scale {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    Outage,
    Throughput,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    Quadrature,
    Series,
    Asymptotic,
    MonteCarlo,
    UpperBound,
}

impl Column {
    fn name(self) -> &'static str {
        match self {
            Column::Quadrature => "quadrature",
            Column::Series => "series",
            Column::Asymptotic => "asymptotic",
            Column::MonteCarlo => "montecarlo",
            Column::UpperBound => "upper_bound",
        }
    }
}

pub fn parse_methods(list: &str) -> anyhow::Result<Vec<Column>> {
    let mut out = Vec::new();
    for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let c = match item {
            "quadrature" | "quad" => Column::Quadrature,
            "series" => Column::Series,
            "asymptotic" | "asym" => Column::Asymptotic,
            "montecarlo" | "mc" => Column::MonteCarlo,
            "upper_bound" => Column::UpperBound,
            other => bail!("unknown method '{other}'"),
        };
        if !out.contains(&c) {
            out.push(c);
        }
    }
    if out.is_empty() {
        bail!("no methods given");
    }
    Ok(out)
}

/// Failure that should leave a partial CSV behind.
#[derive(Debug)]
struct Numerical {
    partial: String,
    error: Error,
}

impl std::fmt::Display for Numerical {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.error)
    }
}

impl std::error::Error for Numerical {}

fn numerical_or_config(partial: &str, e: Error) -> anyhow::Error {
    if e.is_numerical() {
        anyhow::Error::new(Numerical {
            partial: partial.to_string(),
            error: e,
        })
    } else {
        anyhow::Error::new(e)
    }
}

pub fn fmt_real(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.8e}")
    }
}

fn resolve_scenario(g: &Global) -> anyhow::Result<Scenario> {
    let mut s = match &g.scenario {
        Some(path) => Scenario::load(path)?,
        None => Scenario::default(),
    };
    let flags = [
        ("pt", &g.pt),
        ("tau", &g.tau),
        ("rate", &g.rate),
        ("m1", &g.m1),
        ("n1", &g.n1),
        ("m2", &g.m2),
        ("n2", &g.n2),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            s.set(key, v, None).map_err(|m| anyhow!("--{key}: {m}"))?;
        }
    }
    for kv in &g.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| anyhow!("--set expects key=value, got '{kv}'"))?;
        s.set(k, v, None).map_err(|m| anyhow!("--set {kv}: {m}"))?;
    }
    // The model choice goes last so `--set eh_data=...` can precede `--eh tabulated`.
    if let Some(v) = &g.eh {
        s.set("eh", v, None).map_err(|m| anyhow!("--eh: {m}"))?;
    }
    Ok(s)
}

fn header(command: &str, s: &Scenario, extra: &[String]) -> String {
    let mut h = format!("# wpc {VERSION}\n# command = {command}\n");
    for line in s.describe() {
        let _ = writeln!(h, "# {line}");
    }
    for line in extra {
        let _ = writeln!(h, "# {line}");
    }
    h
}

/// Grid of `points` values from `start` to `stop`.
pub fn grid(start: f64, stop: f64, points: usize, scale: Scale) -> anyhow::Result<Vec<f64>> {
    if points < 2 {
        bail!("need at least two points");
    }
    if !(start < stop) || !start.is_finite() || !stop.is_finite() {
        bail!("need finite start < stop");
    }
    let last = (points - 1) as f64;
    let v = match scale {
        Scale::Linear => (0..points)
            .map(|i| {
                if i == points - 1 {
                    stop
                } else {
                    start + (stop - start) * i as f64 / last
                }
            })
            .collect(),
        Scale::Log => {
            if start <= 0.0 {
                bail!("log scale needs start > 0");
            }
            let (l0, l1) = (start.ln(), stop.ln());
            (0..points)
                .map(|i| {
                    if i == points - 1 {
                        stop
                    } else {
                        (l0 + (l1 - l0) * i as f64 / last).exp()
                    }
                })
                .collect()
        }
    };
    Ok(v)
}

/// Series result, or NaN where its cancellation guard or order limit trips.
fn series_or_nan(p: &SystemParams) -> Result<f64, Error> {
    match outage_series(p) {
        Ok(o) => Ok(o.value),
        Err(Error::Precision { .. } | Error::Unstable { .. } | Error::Domain(_)) => Ok(f64::NAN),
        Err(e) => Err(e),
    }
}

/// Outage per column; Monte Carlo also yields its CI half-width.
fn outage_columns(
    p: &SystemParams,
    cols: &[Column],
    mc: McArgs,
) -> Result<Vec<(f64, Option<f64>)>, Error> {
    cols.iter()
        .map(|c| match c {
            Column::Quadrature => Ok((outage_quadrature(p, QUAD_REL_TOL)?.value, None)),
            Column::Series => Ok((series_or_nan(p)?, None)),
            Column::Asymptotic => Ok((outage_asymptotic(p)?.value, None)),
            Column::UpperBound => Ok((0.0, None)),
            Column::MonteCarlo => {
                let r = simulate(p, SimConfig::new(mc.samples, mc.seed).with_batch(mc.batch))?;
                Ok((r.outage, Some(r.ci95_halfwidth)))
            }
        })
        .collect()
}

fn to_throughput(p: &SystemParams, outage: f64) -> f64 {
    if outage.is_nan() {
        return f64::NAN;
    }
    let est = OutageEstimate {
        value: outage,
        method: wpc_core::analysis::Method::Quadrature,
        abs_err: 0.0,
    };
    throughput(p, &est)
}

fn column_names(prefix: &str, cols: &[Column]) -> Vec<String> {
    let mut names = Vec::new();
    for c in cols {
        names.push(format!("{prefix}{}", c.name()));
        if *c == Column::MonteCarlo {
            names.push(format!("{prefix}montecarlo_ci95"));
        }
    }
    names
}

fn push_values(
    row: &mut Vec<String>,
    vals: &[(f64, Option<f64>)],
    map: impl Fn(f64) -> f64,
    ci_scale: f64,
) {
    for (v, ci) in vals {
        row.push(fmt_real(map(*v)));
        if let Some(ci) = ci {
            row.push(fmt_real(ci * ci_scale));
        }
    }
}

fn cmd_eval(s: &Scenario, methods: &str, mc: McArgs) -> anyhow::Result<String> {
    let cols = parse_methods(methods)?;
    let mut extra = vec![format!("methods = {methods}")];
    if cols.contains(&Column::MonteCarlo) {
        extra.push(format!(
            "samples = {}, seed = {}, batch = {}",
            mc.samples, mc.seed, mc.batch
        ));
    }
    let mut out = header("eval", s, &extra);
    let p = s.system_params()?;
    let mut names = vec!["pt_w".to_string()];
    names.extend(column_names("outage_", &cols));
    names.extend(column_names("throughput_", &cols));
    let _ = writeln!(out, "{}", names.join(","));
    let vals = outage_columns(&p, &cols, mc).map_err(|e| numerical_or_config(&out, e))?;
    let mut row = vec![fmt_real(p.p_t)];
    push_values(&mut row, &vals, |v| v, 1.0);
    push_values(
        &mut row,
        &vals,
        |v| to_throughput(&p, v),
        p.rate * (1.0 - p.tau),
    );
    let _ = writeln!(out, "{}", row.join(","));
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    s: &Scenario,
    axis: Axis,
    start: f64,
    stop: f64,
    points: usize,
    scale: Scale,
    methods: &str,
    metric: Metric,
    mc: McArgs,
) -> anyhow::Result<String> {
    let cols = parse_methods(methods)?;
    let xs = grid(start, stop, points, scale)?;
    if axis.is_integer() {
        for x in &xs {
            if (x - x.round()).abs() > 1e-9 || *x < 1.0 {
                bail!(
                    "axis {} needs positive integer grid points, got {x}",
                    axis.name()
                );
            }
        }
    }
    let metric_name = match metric {
        Metric::Outage => "outage",
        Metric::Throughput => "throughput",
    };
    let mut extra = vec![
        format!(
            "sweep axis = {}, start = {start}, stop = {stop}, points = {points}, scale = {scale:?}",
            axis.name()
        ),
        format!("methods = {methods}, metric = {metric_name}"),
    ];
    if cols.contains(&Column::MonteCarlo) {
        extra.push(format!(
            "samples = {}, seed = {}, batch = {}",
            mc.samples, mc.seed, mc.batch
        ));
    }
    let mut out = header("sweep", s, &extra);
    let mut names = vec![axis.name().to_string()];
    names.extend(column_names("", &cols));
    let _ = writeln!(out, "{}", names.join(","));

    // Validate every point's configuration before computing anything.
    let params: Vec<SystemParams> = xs
        .iter()
        .map(|&x| {
            let mut sc = s.clone();
            axis.apply(&mut sc, if axis.is_integer() { x.round() } else { x });
            sc.system_params()
                .with_context(|| format!("{} = {x}", axis.name()))
        })
        .collect::<anyhow::Result<_>>()?;

    let rows: Vec<Result<String, Error>> = params
        .par_iter()
        .zip(xs.par_iter())
        .map(|(p, &x)| {
            let vals = outage_columns(p, &cols, mc)?;
            let mut row = vec![if axis.is_integer() {
                format!("{}", x.round() as u64)
            } else {
                fmt_real(x)
            }];
            match metric {
                Metric::Outage => push_values(&mut row, &vals, |v| v, 1.0),
                Metric::Throughput => push_values(
                    &mut row,
                    &vals,
                    |v| to_throughput(p, v),
                    p.rate * (1.0 - p.tau),
                ),
            }
            Ok(row.join(","))
        })
        .collect();

    for (row, x) in rows.into_iter().zip(&xs) {
        match row {
            Ok(line) => {
                let _ = writeln!(out, "{line}");
            }
            Err(e) => {
                let _ = writeln!(out, "# at {} = {x}", axis.name());
                return Err(numerical_or_config(&out, e));
            }
        }
    }
    Ok(out)
}

fn cmd_mc(s: &Scenario, mc: McArgs) -> anyhow::Result<String> {
    let extra = vec![format!(
        "samples = {}, seed = {}, batch = {}",
        mc.samples, mc.seed, mc.batch
    )];
    let mut out = header("mc", s, &extra);
    let p = s.system_params()?;
    let r = simulate(&p, SimConfig::new(mc.samples, mc.seed).with_batch(mc.batch))
        .map_err(|e| numerical_or_config(&out, e))?;
    let _ = writeln!(
        out,
        "n_samples,seed,outage,ci95_halfwidth,mean_harvested_w,mean_snr_db,throughput,ci_warning"
    );
    let _ = writeln!(
        out,
        "{},{},{},{},{},{},{},{}",
        r.n_samples,
        mc.seed,
        fmt_real(r.outage),
        fmt_real(r.ci95_halfwidth),
        fmt_real(r.mean_harvested),
        fmt_real(r.mean_snr_db),
        fmt_real(r.throughput),
        r.ci_warning
    );
    Ok(out)
}

fn with_ul_rate(p: &SystemParams, rate: f64) -> anyhow::Result<SystemParams> {
    Ok(SystemParams {
        ul: EffectiveChannel::new(p.ul.shape, rate)?,
        ..p.clone()
    })
}

fn cmd_opt_rate(s: &Scenario, alpha: Option<f64>) -> anyhow::Result<String> {
    let mut p = s.system_params()?;
    if let Some(a) = alpha {
        if !(a > 0.0 && a.is_finite()) {
            bail!("--alpha must be positive");
        }
        let unit = rate_alpha(&with_ul_rate(&p, 1.0)?)?;
        p = with_ul_rate(&p, a / unit)?;
    }
    let alpha = rate_alpha(&p)?;
    let mut out = header("opt-rate", s, &[format!("alpha = {alpha:e}")]);
    let (r, th) = optimal_rate_asymptotic(&p).map_err(|e| numerical_or_config(&out, e))?;
    let hi = 4.0 * r + 1.0;
    let g = maximize_quasiconcave(
        |x| throughput_asymptotic(&p.with_rate(x)).unwrap_or(f64::NAN),
        1e-6,
        hi,
        DEFAULT_MAX_TOL,
    )
    .map_err(|e| numerical_or_config(&out, e))?;
    let _ = writeln!(
        out,
        "ul_shape,alpha,rate_opt,throughput_opt,rate_golden,throughput_golden"
    );
    let _ = writeln!(
        out,
        "{},{},{},{},{},{}",
        p.ul.shape,
        fmt_real(alpha),
        fmt_real(r),
        fmt_real(th),
        fmt_real(g.arg),
        fmt_real(g.value)
    );
    Ok(out)
}

fn cmd_opt_tau(s: &Scenario, beta: Option<f64>) -> anyhow::Result<String> {
    let mut p = s.system_params()?;
    if let Some(b) = beta {
        if !(b > 0.0 && b.is_finite()) {
            bail!("--beta must be positive");
        }
        let unit = tau_beta(&with_ul_rate(&p, 1.0)?)?;
        p = with_ul_rate(&p, b / unit)?;
    }
    let beta = tau_beta(&p)?;
    let mut out = header("opt-tau", s, &[format!("beta = {beta:e}")]);
    let (tau, th) = optimal_tau_asymptotic(&p).map_err(|e| numerical_or_config(&out, e))?;
    let g = maximize_quasiconcave(
        |t| throughput_asymptotic(&p.with_tau(t)).unwrap_or(f64::NAN),
        1e-9,
        1.0 - 1e-9,
        DEFAULT_MAX_TOL,
    )
    .map_err(|e| numerical_or_config(&out, e))?;
    let _ = writeln!(
        out,
        "ul_shape,beta,tau_opt,throughput_opt,tau_golden,throughput_golden"
    );
    let _ = writeln!(
        out,
        "{},{},{},{},{},{}",
        p.ul.shape,
        fmt_real(beta),
        fmt_real(tau),
        fmt_real(th),
        fmt_real(g.arg),
        fmt_real(g.value)
    );
    Ok(out)
}

fn cmd_eh_curve(
    s: &Scenario,
    start: &str,
    stop: &str,
    points: usize,
    scale: Scale,
    data: Option<&PathBuf>,
) -> anyhow::Result<String> {
    let lo = parse_power(start).map_err(|m| anyhow!("--start: {m}"))?;
    let hi = parse_power(stop).map_err(|m| anyhow!("--stop: {m}"))?;
    let xs = grid(lo, hi, points, scale)?;
    let eta = s.eta();
    let mut models: Vec<(&str, EhModel)> = vec![
        ("sigmoid", EhModel::NonLinearSigmoid(s.sigmoid)),
        ("linear", EhModel::linear(eta)?),
        (
            "piecewise",
            EhModel::piecewise_linear(eta, s.sigmoid.max_power)?,
        ),
    ];
    let table = match (data, &s.eh) {
        (Some(path), _) => Some(path.clone()),
        (None, EhChoice::Tabulated(path)) => Some(path.clone()),
        _ => None,
    };
    let mut extra = vec![format!("eta = {eta}")];
    if let Some(path) = &table {
        models.push((
            "tabulated",
            EhModel::Tabulated(Tabulated::new(&load_samples_uw(path)?)?),
        ));
        extra.push(format!("tabulated = {}", path.display()));
    }
    let mut out = header("eh-curve", s, &extra);
    let names: Vec<String> = std::iter::once("p_in_w".to_string())
        .chain(models.iter().map(|(n, _)| format!("{n}_w")))
        .collect();
    let _ = writeln!(out, "{}", names.join(","));
    for x in xs {
        let mut row = vec![fmt_real(x)];
        for (_, m) in &models {
            row.push(fmt_real(m.harvested_power(x)?));
        }
        let _ = writeln!(out, "{}", row.join(","));
    }
    Ok(out)
}

fn cmd_fit(s: &Scenario, data: &PathBuf) -> anyhow::Result<String> {
    let samples = load_samples_uw(data)?;
    let mut out = header(
        "fit",
        s,
        &[format!(
            "data = {} ({} samples)",
            data.display(),
            samples.len()
        )],
    );
    let r = fit_sigmoid(&samples).map_err(|e| numerical_or_config(&out, e))?;
    let _ = writeln!(out, "max_power_w,a_per_w,b_w,rmse_w,iterations,converged");
    let _ = writeln!(
        out,
        "{},{},{},{},{},{}",
        fmt_real(r.params.max_power),
        fmt_real(r.params.a),
        fmt_real(r.params.b),
        fmt_real(r.rmse),
        r.iterations,
        r.converged
    );
    if !r.converged {
        return Err(anyhow::Error::new(Numerical {
            partial: out,
            error: Error::Fit("iteration budget exhausted before the simplex collapsed".into()),
        }));
    }
    Ok(out)
}

fn execute(cli: &Cli) -> anyhow::Result<String> {
    let s = resolve_scenario(&cli.global)?;
    match &cli.command {
        Command::Eval { methods, mc } => cmd_eval(&s, methods, *mc),
        Command::Sweep {
            axis,
            start,
            stop,
            points,
            scale,
            methods,
            metric,
            mc,
        } => cmd_sweep(
            &s, *axis, *start, *stop, *points, *scale, methods, *metric, *mc,
        ),
        Command::Mc { mc } => cmd_mc(&s, *mc),
        Command::OptRate { alpha } => cmd_opt_rate(&s, *alpha),
        Command::OptTau { beta } => cmd_opt_tau(&s, *beta),
        Command::EhCurve {
            start,
            stop,
            points,
            scale,
            data,
        } => cmd_eh_curve(&s, start, stop, *points, *scale, data.as_ref()),
        Command::Fit { data } => cmd_fit(&s, data),
    }
}

fn emit(path: Option<&PathBuf>, text: &str, stdout: &mut dyn Write) -> std::io::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text),
        None => stdout.write_all(text.as_bytes()),
    }
}

/// Runs the tool on `args` (program name first) and returns the exit status.
/// CSV goes to `--output` or `stdout`; diagnostics go to `stderr`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{}", e.render());
                    0
                }
                _ => {
                    let first = e.to_string();
                    let line = first.lines().next().unwrap_or("invalid arguments");
                    let _ = writeln!(stderr, "{line}");
                    EXIT_CONFIG
                }
            };
        }
    };

    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.global.threads.map_or(0, |n| n.get()))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(stderr, "error: cannot start worker threads: {e}");
            return EXIT_CONFIG;
        }
    };

    match pool.install(|| execute(&cli)) {
        Ok(text) => match emit(cli.global.output.as_ref(), &text, stdout) {
            Ok(()) => 0,
            Err(e) => {
                let _ = writeln!(stderr, "error: {e}");
                EXIT_CONFIG
            }
        },
        Err(err) => {
            if let Some(n) = err.downcast_ref::<Numerical>() {
                let text = format!("{}# FAILED: {}\n", n.partial, n.error);
                let _ = emit(cli.global.output.as_ref(), &text, stdout);
                let _ = writeln!(stderr, "error: {}", n.error);
                EXIT_NUMERICAL
            } else {
                let msg = format!("{err:#}").replace('\n', " ");
                let _ = writeln!(stderr, "error: {msg}");
                EXIT_CONFIG
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(
            grid(0.0, 1.0, 3, Scale::Linear).unwrap(),
            vec![0.0, 0.5, 1.0]
        );
        let g = grid(1.0, 100.0, 3, Scale::Log).unwrap();
        assert!((g[1] - 10.0).abs() < 1e-12 && g[2] == 100.0);
        assert!(grid(1.0, 1.0, 3, Scale::Linear).is_err());
        assert!(grid(0.0, 1.0, 3, Scale::Log).is_err());
        assert!(grid(0.0, 1.0, 1, Scale::Linear).is_err());
    }

    #[test]
    fn method_lists() {
        assert_eq!(
            parse_methods("quadrature, asymptotic,quadrature").unwrap(),
            vec![Column::Quadrature, Column::Asymptotic]
        );
        assert!(parse_methods("magic").is_err());
        assert!(parse_methods("").is_err());
    }

    #[test]
    fn csv_number_format() {
        assert_eq!(fmt_real(0.5), "5.00000000e-1");
        assert_eq!(fmt_real(f64::NAN), "nan");
        assert_eq!(fmt_real(1234.5678901), "1.23456789e3");
    }
}
