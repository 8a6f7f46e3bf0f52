//! Command-line front end: regime classification, supercritical solves,
//! nonexistence verification, the integral existence criterion, eigenvalue
//! conditions, and parameter sweeps, all with deterministic JSON/CSV output.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use exlem::criterion::{criterion_planar, criterion_power, criterion_quadrature, Nonlinearity};
use exlem::error::Error;
use exlem::ode::IntegratorConfig;
use exlem::params::{classify, derive, Classification, ProblemParams};
use exlem::report::{
    fmt_f64, write_eigenfunction_csv, write_profile_csv, Document, SCHEMA_VERSION,
};
use exlem::solver::{solve_supercritical, verify_nonexistence, SolveReport};
use exlem::spectral::{eigen_condition, linearized_annulus_eigenvalue, root_coefficient};

const RANGE_HELP: &str = "Numeric axes accept single values (2.5), comma lists (0.1,1,10) and \
ranges start:stop:step (1.5:7:0.5). Range stops are included when they land within 1e-12 of a \
grid point.";

#[derive(Parser)]
#[command(
    name = "exlem",
    version,
    about = "Existence theory of the weighted exterior Lane-Emden problem, numerically",
    long_about = None,
    after_help = RANGE_HELP
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify the existence regime of one parameter point.
    Classify(ClassifyArgs),
    /// Construct the unique supercritical radial solution.
    Solve(SolveArgs),
    /// Run nonexistence witnesses for a set of boundary slopes.
    Verify(VerifyArgs),
    /// Evaluate the integral existence criterion for a power nonlinearity.
    Criterion(CriterionArgs),
    /// Principal-eigenvalue condition for the linear case tau < -2, p = 1.
    Eigen(EigenArgs),
    /// Sweep classify or verify over parameter axes.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct ParamArgs {
    /// Ambient integer dimension N >= 1.
    #[arg(long, default_value_t = 3)]
    n: u32,
    /// Diffusion weight exponent theta.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    theta: f64,
    /// Source weight exponent ell.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "tau")]
    ell: Option<f64>,
    /// Weight gap tau = ell - theta, as an alternative to --ell.
    #[arg(long, allow_hyphen_values = true)]
    tau: Option<f64>,
    /// Nonlinearity power p > 0.
    #[arg(long)]
    p: f64,
}

impl ParamArgs {
    fn params(&self) -> Result<ProblemParams, Error> {
        let ell = match (self.ell, self.tau) {
            (Some(ell), _) => ell,
            (None, Some(tau)) => tau + self.theta,
            (None, None) => 0.0,
        };
        ProblemParams::new(self.n, self.theta, ell, self.p)
    }
}

#[derive(Args)]
struct IntegratorArgs {
    /// Relative local error tolerance.
    #[arg(long)]
    rtol: Option<f64>,
    /// Absolute local error tolerance.
    #[arg(long)]
    atol: Option<f64>,
    /// Radius horizon for trajectories.
    #[arg(long)]
    rmax: Option<f64>,
    /// Series-start radius for interior shots.
    #[arg(long)]
    r0: Option<f64>,
    /// Cap on the log-radius step (controls output grid density).
    #[arg(long)]
    max_dt: Option<f64>,
    /// Event-detection tolerance on function values.
    #[arg(long)]
    zero_tol: Option<f64>,
    /// Step budget per trajectory.
    #[arg(long)]
    max_steps: Option<usize>,
}

impl IntegratorArgs {
    fn config(&self) -> IntegratorConfig {
        let mut c = IntegratorConfig::default();
        if let Some(v) = self.rtol {
            c.rtol = v;
        }
        if let Some(v) = self.atol {
            c.atol = v;
        }
        if let Some(v) = self.rmax {
            c.r_max = v;
        }
        if let Some(v) = self.r0 {
            c.r0 = v;
        }
        if let Some(v) = self.max_dt {
            c.max_dt = v;
        }
        if let Some(v) = self.zero_tol {
            c.zero_tol = v;
        }
        if let Some(v) = self.max_steps {
            c.max_steps = v;
        }
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct OutputArgs {
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format; json unless sweeping to a .csv path.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

impl OutputArgs {
    fn write(&self, text: &str) -> Result<(), Error> {
        match &self.out {
            Some(path) => {
                let mut f = BufWriter::new(File::create(path)?);
                f.write_all(text.as_bytes())?;
                if !text.ends_with('\n') {
                    f.write_all(b"\n")?;
                }
                Ok(())
            }
            None => {
                println!("{text}");
                Ok(())
            }
        }
    }
}

#[derive(Args)]
struct ClassifyArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    integrator: IntegratorArgs,
    #[command(flatten)]
    output: OutputArgs,
    /// Write the exterior profile as CSV to this path.
    #[arg(long)]
    profile: Option<PathBuf>,
    /// Keep every k-th profile row in the CSV.
    #[arg(long, default_value_t = 1)]
    stride: usize,
    /// Also compute the linearized principal eigenvalue on the annulus a:b.
    #[arg(long, value_parser = parse_pair)]
    annulus: Option<(f64, f64)>,
    /// Mesh size for the annulus eigenvalue.
    #[arg(long, default_value_t = 256)]
    mesh: usize,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    integrator: IntegratorArgs,
    #[command(flatten)]
    output: OutputArgs,
    /// Boundary slopes to shoot with (list or range).
    #[arg(long, default_value = "0.01,0.1,1,10,100")]
    betas: String,
}

#[derive(Args)]
struct CriterionArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    output: OutputArgs,
    /// Upper limit of the criterion integral.
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    /// Exponential weights to test in the planar case N' = 2.
    #[arg(long, default_value = "0.25,0.5,1,2,4")]
    a_grid: String,
}

#[derive(Args)]
struct EigenArgs {
    #[command(flatten)]
    params: ParamArgs,
    #[command(flatten)]
    output: OutputArgs,
    /// Base mesh size (the solver refines twice beyond it).
    #[arg(long, default_value_t = 256)]
    mesh: usize,
    /// Write the principal eigenfunction as CSV to this path.
    #[arg(long)]
    eigenfunction: Option<PathBuf>,
    /// Also locate the potential coefficient with vanishing eigenvalue.
    #[arg(long)]
    find_root: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SweepCommand {
    Classify,
    Verify,
}

#[derive(Args)]
struct SweepArgs {
    /// Ambient integer dimension N >= 1.
    #[arg(long, default_value_t = 3)]
    n: u32,
    /// Axis for theta.
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    theta: String,
    /// Axis for ell (conflicts with --tau).
    #[arg(long, allow_hyphen_values = true, conflicts_with = "tau")]
    ell: Option<String>,
    /// Axis for tau = ell - theta.
    #[arg(long, allow_hyphen_values = true)]
    tau: Option<String>,
    /// Axis for p.
    #[arg(long)]
    p: String,
    /// Axis for beta (verify sweeps only).
    #[arg(long, default_value = "1")]
    betas: String,
    /// What to run at each grid point.
    #[arg(long, value_enum, default_value_t = SweepCommand::Classify)]
    command: SweepCommand,
    /// Worker threads for sweep rows; output order is input order.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    integrator: IntegratorArgs,
    #[command(flatten)]
    output: OutputArgs,
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 2 {
        return Err("expected a:b".into());
    }
    let a = parts[0].parse::<f64>().map_err(|e| e.to_string())?;
    let b = parts[1].parse::<f64>().map_err(|e| e.to_string())?;
    Ok((a, b))
}

/// Expands an axis expression: comma-separated items, each a number or a
/// start:stop:step range (stop included within 1e-12 of a grid point).
fn parse_axis(s: &str) -> Result<Vec<f64>, Error> {
    let mut out = Vec::new();
    for item in s.split(',') {
        let item = item.trim();
        if item.is_empty() {
            continue;
        }
        let bad = |d: &str| Error::InvalidParameter(format!("bad axis item `{item}`: {d}"));
        if item.contains(':') {
            let parts: Vec<&str> = item.split(':').collect();
            if parts.len() != 3 {
                return Err(bad("ranges are start:stop:step"));
            }
            let start: f64 = parts[0].parse().map_err(|_| bad("bad start"))?;
            let stop: f64 = parts[1].parse().map_err(|_| bad("bad stop"))?;
            let step: f64 = parts[2].parse().map_err(|_| bad("bad step"))?;
            if step == 0.0 || (stop - start) * step < 0.0 {
                return Err(bad("step must move start toward stop"));
            }
            let span = (stop - start) / step;
            let count = (span + 1e-12).floor() as usize;
            for k in 0..=count {
                out.push(start + step * k as f64);
            }
        } else {
            out.push(item.parse().map_err(|_| bad("not a number"))?);
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidParameter(format!("axis `{s}` is empty")));
    }
    Ok(out)
}

#[derive(Serialize)]
struct CriterionDoc {
    closed_form: exlem::criterion::CriterionVerdict,
    quadrature: exlem::criterion::CriterionVerdict,
}

#[derive(Serialize)]
struct SolveDoc {
    #[serde(flatten)]
    report: SolveReport,
    profile_points: usize,
    r_max: f64,
    annulus_eigenvalue: Option<AnnulusEigen>,
}

#[derive(Serialize)]
struct AnnulusEigen {
    a: f64,
    b: f64,
    lambda1: f64,
    mesh_size: usize,
}

#[derive(Serialize)]
struct EigenDoc {
    lambda1: f64,
    verdict: exlem::spectral::EigenVerdict,
    convergence: exlem::spectral::ConvergenceReport,
    root_coefficient: Option<f64>,
}

fn run() -> Result<i32, (i32, Error)> {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            // Malformed invocation: diagnostic on stderr, exit 1.
            eprint!("{e}");
            return Ok(1);
        }
        Err(e) => {
            // Help or version output.
            print!("{e}");
            return Ok(0);
        }
    };
    match cli.command {
        Command::Classify(args) => {
            let params = args.params.params().map_err(|e| (1, e))?;
            let derived = derive(&params).map_err(|e| (1, e))?;
            let class = classify(&params).map_err(|e| (1, e))?;
            let doc = Document::new("classify", params, derived, class);
            emit_json(&args.output, &doc)?;
            Ok(0)
        }
        Command::Solve(args) => {
            let params = args.params.params().map_err(|e| (1, e))?;
            let derived = derive(&params).map_err(|e| (1, e))?;
            let config = args.integrator.config();
            let report = solve_supercritical(&params, &config).map_err(fail)?;
            let annulus_eigenvalue = match args.annulus {
                Some((a, b)) => {
                    let eig = linearized_annulus_eigenvalue(&report.profile, a, b, args.mesh)
                        .map_err(fail)?;
                    Some(AnnulusEigen { a, b, lambda1: eig.lambda1, mesh_size: eig.mesh_size })
                }
                None => None,
            };
            if let Some(path) = &args.profile {
                let mut f = BufWriter::new(File::create(path).map_err(|e| (1, e.into()))?);
                write_profile_csv(&report.profile, &mut f, args.stride).map_err(|e| (1, e))?;
            }
            let doc = Document::new(
                "solve",
                params,
                derived,
                SolveDoc {
                    profile_points: report.profile.len(),
                    r_max: report.profile.r_max(),
                    annulus_eigenvalue,
                    report,
                },
            );
            emit_json(&args.output, &doc)?;
            Ok(0)
        }
        Command::Verify(args) => {
            let params = args.params.params().map_err(|e| (1, e))?;
            let derived = derive(&params).map_err(|e| (1, e))?;
            let betas = parse_axis(&args.betas).map_err(|e| (1, e))?;
            let config = args.integrator.config();
            let report = verify_nonexistence(&params, &betas, &config).map_err(fail)?;
            let all_crossed = report.all_crossed;
            let doc = Document::new("verify", params, derived, report);
            emit_json(&args.output, &doc)?;
            Ok(if all_crossed { 0 } else { 3 })
        }
        Command::Criterion(args) => {
            let params = args.params.params().map_err(|e| (1, e))?;
            let derived = derive(&params).map_err(|e| (1, e))?;
            if (derived.n_prime - 2.0).abs() <= 1e-12 {
                let a_grid = parse_axis(&args.a_grid).map_err(|e| (1, e))?;
                let verdict = criterion_planar(&Nonlinearity::Power(params.p), &a_grid, 1.0)
                    .map_err(fail)?;
                let doc = Document::new("criterion", params, derived, verdict);
                emit_json(&args.output, &doc)?;
                return Ok(0);
            }
            let closed_form = criterion_power(params.p, &derived, args.delta).map_err(fail)?;
            let quadrature =
                criterion_quadrature(&Nonlinearity::Power(params.p), &derived, args.delta, None)
                    .map_err(fail)?;
            let doc =
                Document::new("criterion", params, derived, CriterionDoc { closed_form, quadrature });
            emit_json(&args.output, &doc)?;
            Ok(0)
        }
        Command::Eigen(args) => {
            let params = args.params.params().map_err(|e| (1, e))?;
            let derived = derive(&params).map_err(|e| (1, e))?;
            let cond = eigen_condition(&params, args.mesh).map_err(fail)?;
            if let Some(path) = &args.eigenfunction {
                let mut f = BufWriter::new(File::create(path).map_err(|e| (1, e.into()))?);
                write_eigenfunction_csv(&cond.result.grid, &cond.result.eigenfunction, &mut f)
                    .map_err(|e| (1, e))?;
            }
            let root = if args.find_root {
                Some(root_coefficient(&params, args.mesh).map_err(fail)?)
            } else {
                None
            };
            let doc = Document::new(
                "eigen",
                params,
                derived,
                EigenDoc {
                    lambda1: cond.lambda1,
                    verdict: cond.verdict,
                    convergence: cond.result.convergence.clone().unwrap(),
                    root_coefficient: root,
                },
            );
            emit_json(&args.output, &doc)?;
            Ok(0)
        }
        Command::Sweep(args) => run_sweep(args),
    }
}

fn fail(e: Error) -> (i32, Error) {
    let code = match &e {
        Error::Regime { .. } | Error::NoCrossing { .. } => 2,
        Error::VerificationFailed(_) => 3,
        _ => 1,
    };
    (code, e)
}

fn emit_json<T: Serialize>(out: &OutputArgs, doc: &Document<T>) -> Result<(), (i32, Error)> {
    if out.format == Some(Format::Csv) {
        return Err((
            1,
            Error::InvalidParameter("this command emits JSON; csv applies to sweeps".into()),
        ));
    }
    let text = doc.to_json().map_err(|e| (1, e))?;
    out.write(&text).map_err(|e| (1, e))
}

#[derive(Serialize, Clone)]
struct SweepRow {
    n_prime: f64,
    theta: f64,
    ell: f64,
    tau: f64,
    p: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
    regime: String,
    reason: String,
    p_s: Option<f64>,
    p_star: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    crossed: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    first_zero: Option<f64>,
}

#[derive(Serialize)]
struct SweepDoc {
    schema_version: u32,
    command: String,
    n: u32,
    rows: Vec<SweepRow>,
}

fn run_sweep(args: SweepArgs) -> Result<i32, (i32, Error)> {
    use rayon::prelude::*;

    let thetas = parse_axis(&args.theta).map_err(|e| (1, e))?;
    let ps = parse_axis(&args.p).map_err(|e| (1, e))?;
    let gaps: Vec<(bool, f64)> = match (&args.ell, &args.tau) {
        (Some(ell), _) => parse_axis(ell).map_err(|e| (1, e))?.into_iter().map(|v| (true, v)).collect(),
        (None, Some(tau)) => parse_axis(tau).map_err(|e| (1, e))?.into_iter().map(|v| (false, v)).collect(),
        (None, None) => vec![(false, 0.0)],
    };
    let betas = parse_axis(&args.betas).map_err(|e| (1, e))?;
    let config = args.integrator.config();

    let mut points = Vec::new();
    for &theta in &thetas {
        for &(is_ell, g) in &gaps {
            let ell = if is_ell { g } else { g + theta };
            for &p in &ps {
                points.push((theta, ell, p));
            }
        }
    }

    let classify_point = |&(theta, ell, p): &(f64, f64, f64)| -> Vec<SweepRow> {
        let base = SweepRow {
            n_prime: args.n as f64 + theta,
            theta,
            ell,
            tau: ell - theta,
            p,
            beta: None,
            regime: String::new(),
            reason: String::new(),
            p_s: None,
            p_star: None,
            crossed: None,
            first_zero: None,
        };
        let params = match ProblemParams::new(args.n, theta, ell, p) {
            Ok(p) => p,
            Err(e) => {
                return vec![SweepRow { regime: "error".into(), reason: e.to_string(), ..base }]
            }
        };
        let (class, derived) = match (classify(&params), derive(&params)) {
            (Ok(c), Ok(d)) => (c, d),
            (Err(e), _) | (_, Err(e)) => {
                return vec![SweepRow { regime: "error".into(), reason: e.to_string(), ..base }]
            }
        };
        let classified = SweepRow {
            regime: format!("{:?}", class.regime),
            reason: serde_variant_name(&class),
            p_s: derived.p_s,
            p_star: Some(derived.p_star),
            ..base
        };
        match args.command {
            SweepCommand::Classify => vec![classified],
            SweepCommand::Verify => match verify_nonexistence(&params, &betas, &config) {
                Ok(report) => report
                    .outcomes
                    .iter()
                    .map(|o| SweepRow {
                        beta: Some(o.beta),
                        crossed: Some(o.crossed),
                        first_zero: o.first_zero_radius,
                        ..classified.clone()
                    })
                    .collect(),
                Err(e) => vec![SweepRow {
                    reason: format!("verify inapplicable: {e}"),
                    ..classified
                }],
            },
        }
    };

    let rows: Vec<SweepRow> = if args.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(args.jobs)
            .build()
            .map_err(|e| (1, Error::InvalidParameter(e.to_string())))?;
        pool.install(|| points.par_iter().flat_map_iter(classify_point).collect())
    } else {
        points.iter().flat_map(classify_point).collect()
    };

    let failed_witness =
        rows.iter().any(|r| r.crossed == Some(false));

    let format = args.output.format.unwrap_or_else(|| {
        match &args.output.out {
            Some(p) if p.extension().is_some_and(|e| e == "json") => Format::Json,
            Some(_) => Format::Csv,
            None => Format::Csv,
        }
    });
    let text = match format {
        Format::Csv => {
            let mut s = String::from("n_prime,theta,ell,tau,p,beta,regime,reason,p_s,p_star,crossed,first_zero\n");
            let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
            for r in &rows {
                s.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                    fmt_f64(r.n_prime),
                    fmt_f64(r.theta),
                    fmt_f64(r.ell),
                    fmt_f64(r.tau),
                    fmt_f64(r.p),
                    opt(r.beta),
                    r.regime,
                    r.reason,
                    opt(r.p_s),
                    opt(r.p_star),
                    r.crossed.map(|b| b.to_string()).unwrap_or_default(),
                    opt(r.first_zero),
                ));
            }
            s
        }
        Format::Json => {
            let doc = SweepDoc {
                schema_version: SCHEMA_VERSION,
                command: "sweep".into(),
                n: args.n,
                rows,
            };
            serde_json::to_string_pretty(&doc).map_err(|e| (1, e.into()))?
        }
    };
    args.output.write(&text).map_err(|e| (1, e))?;
    Ok(if failed_witness { 3 } else { 0 })
}

fn serde_variant_name(class: &Classification) -> String {
    serde_json::to_value(class.reason)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_else(|| format!("{:?}", class.reason))
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code as u8),
        Err((code, e)) => {
            eprintln!("error: {e}");
            ExitCode::from(code as u8)
        }
    }
}
