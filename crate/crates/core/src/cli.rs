//! The `cayley` experiment harness.
//!
//! Every subcommand produces a table that is written as CSV (default) or as a
//! JSON array of row objects. Exit codes: 0 success, 1 numerical failure,
//! 2 usage error.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::integrators::{
    fit_order, propagate_final, propagate_with, usable_points, verify_coefficient_system, CfctCoefficients,
    ConvergencePoint, IntegratorError, Method, PropagateOptions, State, DEFAULT_OMEGA_SUBSTEPS,
};
use crate::lie::{bch_defect_study, BchFormula};
use crate::matrix::{ComplexDenseMatrix, ComplexVector};
use crate::models::{
    transition_probability, two_level_exact, ModelError, SchrodingerModel, SchrodingerParams, TwoLevelModel,
    TwoLevelParams,
};

pub const COEFFICIENT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Numerical(#[from] IntegratorError),
    #[error("{0}")]
    Failed(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "cayley", version, about = "Cayley-transform integrators: experiments and checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Driven two-level system against its closed-form propagator.
    TwoLevel(TwoLevelArgs),
    /// 1-D Schrödinger equation with quartic potential and sinusoidal drive.
    Schrodinger(SchrodingerArgs),
    /// Global error against a reference for a list of step counts.
    Convergence(ConvergenceArgs),
    /// Defect of the Cayley composition formulas under ε-scaling.
    BchCheck(BchArgs),
    /// Residuals of the order conditions for the three-factor coefficients.
    VerifyCoeffs(CoeffArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Cfct,
    Cmt,
    Cf4,
    Magnus4,
    Rk45,
    OmegaOde,
}

impl MethodArg {
    fn to_method(self, substeps: usize) -> Method {
        match self {
            MethodArg::Cfct => Method::Cfct,
            MethodArg::Cmt => Method::Cmt,
            MethodArg::Cf4 => Method::Cf4,
            MethodArg::Magnus4 => Method::Magnus4,
            MethodArg::Rk45 => Method::Rk45,
            MethodArg::OmegaOde => Method::OmegaOde { substeps },
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output file; standard output when omitted.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct MethodArgs {
    #[arg(long, value_enum, default_value_t = MethodArg::Cfct)]
    pub method: MethodArg,
    /// RK4 substeps per step for omega-ode.
    #[arg(long, default_value_t = DEFAULT_OMEGA_SUBSTEPS, value_parser = parse_substeps)]
    pub substeps: usize,
}

impl MethodArgs {
    fn method(&self) -> Method {
        self.method.to_method(self.substeps)
    }
}

#[derive(Debug, Clone, Args)]
pub struct TwoLevelModelArgs {
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub delta: f64,
    #[arg(long = "V", default_value_t = 0.5, allow_negative_numbers = true)]
    pub v: f64,
}

impl TwoLevelModelArgs {
    fn params(&self, omega: f64) -> TwoLevelParams {
        TwoLevelParams {
            delta: self.delta,
            v: self.v,
            omega,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SchrodingerModelArgs {
    #[arg(long = "L", default_value_t = 10.0)]
    pub l: f64,
    #[arg(long = "N", default_value_t = 256)]
    pub n: usize,
    #[arg(long, default_value_t = -100.0, allow_negative_numbers = true)]
    pub c: f64,
    #[arg(long, default_value_t = 0.5)]
    pub sigma: f64,
    #[arg(long, default_value_t = -2.0, allow_negative_numbers = true)]
    pub x0: f64,
    /// Sign of the second-derivative term (+1 or -1).
    #[arg(long, default_value_t = 1, allow_negative_numbers = true, value_parser = parse_sign)]
    pub kinetic_sign: i8,
}

fn parse_sign(s: &str) -> Result<i8, String> {
    match s.trim() {
        "1" | "+1" => Ok(1),
        "-1" => Ok(-1),
        other => Err(format!("expected +1 or -1, got '{other}'")),
    }
}

impl SchrodingerModelArgs {
    fn params(&self, omega: f64) -> SchrodingerParams {
        SchrodingerParams {
            l: self.l,
            n: self.n,
            c: self.c,
            omega,
            sigma: self.sigma,
            x0: self.x0,
            kinetic_sign: f64::from(self.kinetic_sign),
        }
    }
}

fn parse_at_least(s: &str, min: usize) -> Result<usize, String> {
    let v: usize = s.trim().parse().map_err(|e| format!("{e}"))?;
    if v < min {
        Err(format!("must be at least {min}"))
    } else {
        Ok(v)
    }
}

fn parse_steps(s: &str) -> Result<usize, String> {
    parse_at_least(s, 1)
}

fn parse_substeps(s: &str) -> Result<usize, String> {
    parse_at_least(s, DEFAULT_OMEGA_SUBSTEPS)
}

#[derive(Debug, Clone, Args)]
pub struct TwoLevelArgs {
    #[command(flatten)]
    pub model: TwoLevelModelArgs,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub omega: f64,
    #[command(flatten)]
    pub method: MethodArgs,
    #[arg(long, default_value_t = 2000, value_parser = parse_steps)]
    pub steps: usize,
    /// Final time; defaults to 20π/ω.
    #[arg(long)]
    pub tf: Option<f64>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SchrodingerArgs {
    #[command(flatten)]
    pub model: SchrodingerModelArgs,
    /// Drive frequency.
    #[arg(long, default_value_t = 5.0 * PI, allow_negative_numbers = true)]
    pub omega: f64,
    #[command(flatten)]
    pub method: MethodArgs,
    #[arg(long, default_value_t = 2000, value_parser = parse_steps)]
    pub steps: usize,
    #[arg(long, default_value_t = 2.0)]
    pub tf: f64,
    /// Reference uses magnus4 with this many times more steps; 0 disables it.
    #[arg(long, default_value_t = 10)]
    pub reference_factor: usize,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    TwoLevel,
    Schrodinger,
}

#[derive(Debug, Clone, Args)]
pub struct ConvergenceArgs {
    #[arg(long, value_enum, default_value_t = ModelArg::TwoLevel)]
    pub model: ModelArg,
    #[command(flatten)]
    pub method: MethodArgs,
    /// Comma-separated step counts.
    #[arg(long, value_delimiter = ',', default_values_t = [250usize, 500, 1000, 2000])]
    pub steps_list: Vec<usize>,
    /// Final time; defaults to 20π/ω (two-level) or 2 (Schrödinger).
    #[arg(long)]
    pub tf: Option<f64>,
    #[arg(long, default_value_t = 10)]
    pub reference_factor: usize,
    /// Drive frequency; defaults to 1 (two-level) or 5π (Schrödinger).
    #[arg(long, allow_negative_numbers = true)]
    pub omega: Option<f64>,
    #[command(flatten)]
    pub two_level: TwoLevelModelArgs,
    #[command(flatten)]
    pub schrodinger: SchrodingerModelArgs,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormulaArg {
    Three,
    Two,
    Symmetric,
}

#[derive(Debug, Clone, Args)]
pub struct BchArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub samples: usize,
    #[arg(long, default_value_t = 4)]
    pub dim: usize,
    #[arg(long, value_enum, default_value_t = FormulaArg::Three)]
    pub formula: FormulaArg,
    /// Comma-separated scale factors; a zero entry is allowed and excluded from the fit.
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.2, 0.1, 0.05, 0.025])]
    pub eps: Vec<f64>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CoeffArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub alpha11: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha12: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha21: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha22: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha31: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha32: Option<f64>,
}

/// Rows of optional numbers under a fixed header; `None` becomes an empty
/// CSV field or a JSON `null`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Option<f64>>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let idx = self.header.iter().position(|h| *h == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), CliError> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(&self.header)?;
        for row in &self.rows {
            wr.write_record(row.iter().map(|v| v.map(format_number).unwrap_or_default()))?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, mut w: W) -> Result<(), CliError> {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> = self
                    .header
                    .iter()
                    .zip(row)
                    .map(|(h, v)| {
                        let val = v.and_then(serde_json::Number::from_f64).map(Value::Number).unwrap_or(Value::Null);
                        (h.to_string(), val)
                    })
                    .collect();
                Value::Object(obj)
            })
            .collect();
        serde_json::to_writer_pretty(&mut w, &rows)?;
        writeln!(w)?;
        Ok(())
    }

    fn emit(&self, out: &OutputArgs) -> Result<(), CliError> {
        match &out.output {
            Some(path) => {
                let file = File::create(path)?;
                self.write(out.format, io::BufWriter::new(file))
            }
            None => self.write(out.format, io::stdout().lock()),
        }
    }

    fn write<W: Write>(&self, format: Format, w: W) -> Result<(), CliError> {
        match format {
            Format::Csv => self.write_csv(w),
            Format::Json => self.write_json(w),
        }
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else {
        format!("{x:.16e}")
    }
}

/// Trajectory of a two-level run.
///
/// `norm_defect` tracks the propagated spin-up state `|‖Y e₁‖ − 1|`; `P` is
/// its spin-down population `|Y₂₁|²`.
pub fn run_two_level(
    params: TwoLevelParams,
    method: Method,
    steps: usize,
    tf: Option<f64>,
) -> Result<Table, CliError> {
    let model = TwoLevelModel::new(params)?;
    let tf = tf.unwrap_or(20.0 * params.period());
    check_tf(tf)?;
    let traj = propagate_with(
        method,
        &model,
        0.0,
        tf,
        steps,
        &ComplexDenseMatrix::identity(2),
        &PropagateOptions::default(),
    )?;
    let mut table = Table::new(vec!["t", "err", "norm_defect", "unitarity_defect", "P", "P_exact"]);
    for rec in &traj.records {
        let y = &rec.state;
        let exact = two_level_exact(&params, rec.t);
        let col_norm = (y[(0, 0)].norm_sqr() + y[(1, 0)].norm_sqr()).sqrt();
        table.push(vec![
            Some(rec.t),
            Some(y.distance(&exact)),
            Some((col_norm - 1.0).abs()),
            rec.unitarity_defect,
            Some(y[(1, 0)].norm_sqr()),
            Some(transition_probability(&params, rec.t)),
        ]);
    }
    Ok(table)
}

/// Trajectory of a Schrödinger run with grid-weighted norm, energy and the
/// distance to a magnus4 reference with `reference_factor` times the steps.
pub fn run_schrodinger(
    params: SchrodingerParams,
    method: Method,
    steps: usize,
    tf: f64,
    reference_factor: usize,
) -> Result<Table, CliError> {
    check_tf(tf)?;
    let model = SchrodingerModel::new(params)?;
    let phi0 = model.gaussian_packet();
    let energy = |t: f64, phi: &ComplexVector| model.energy(t, phi);
    let opts = PropagateOptions {
        record_every: 1,
        norm_scale: params.spacing().sqrt(),
        energy: Some(&energy),
    };
    let traj = propagate_with(method, &model, 0.0, tf, steps, &phi0, &opts)?;

    let reference = if reference_factor > 0 && method != Method::Magnus4 {
        let ref_opts = PropagateOptions {
            record_every: reference_factor,
            ..PropagateOptions::default()
        };
        let r = propagate_with(Method::Magnus4, &model, 0.0, tf, steps * reference_factor, &phi0, &ref_opts)?;
        Some(r.records)
    } else {
        None
    };

    let mut table = Table::new(vec!["t", "norm", "energy", "ref_err"]);
    for (i, rec) in traj.records.iter().enumerate() {
        let ref_err = reference.as_ref().map(|r| rec.state.distance(&r[i].state) * params.spacing().sqrt());
        table.push(vec![Some(rec.t), Some(rec.norm), rec.energy, ref_err]);
    }
    Ok(table)
}

/// Global errors for each step count and the fitted order.
pub fn run_convergence(args: &ConvergenceArgs) -> Result<(Table, f64), CliError> {
    if args.steps_list.len() < 3 {
        return Err(CliError::Usage("need at least three step counts".into()));
    }
    if args.steps_list.contains(&0) {
        return Err(CliError::Usage("step counts must be positive".into()));
    }
    let method = args.method.method();
    let points = match args.model {
        ModelArg::TwoLevel => {
            let params = args.two_level.params(args.omega.unwrap_or(1.0));
            let model = TwoLevelModel::new(params)?;
            let tf = args.tf.unwrap_or(20.0 * params.period());
            check_tf(tf)?;
            let exact = two_level_exact(&params, tf);
            sweep(method, &model, tf, &ComplexDenseMatrix::identity(2), &args.steps_list, &exact, |d| d)?
        }
        ModelArg::Schrodinger => {
            let params = args.schrodinger.params(args.omega.unwrap_or(5.0 * PI));
            let model = SchrodingerModel::new(params)?;
            let tf = args.tf.unwrap_or(2.0);
            check_tf(tf)?;
            if args.reference_factor == 0 {
                return Err(CliError::Usage("reference factor must be positive".into()));
            }
            let phi0 = model.gaussian_packet();
            let finest = *args.steps_list.iter().max().expect("non-empty");
            let reference = propagate_final(Method::Magnus4, &model, 0.0, tf, finest * args.reference_factor, &phi0)?;
            let w = params.spacing().sqrt();
            sweep(method, &model, tf, &phi0, &args.steps_list, &reference, |d| d * w)?
        }
    };
    if usable_points(&points) < 3 {
        return Err(CliError::Failed(
            "fewer than three errors above the rounding floor; cannot fit an order".into(),
        ));
    }
    let slope = fit_order(&points).expect("three usable points");
    let mut table = Table::new(vec!["dt", "err"]);
    for p in &points {
        table.push(vec![Some(p.dt), Some(p.error)]);
    }
    Ok((table, slope))
}

fn sweep<G: crate::quadrature::GeneratorSampler, S: State>(
    method: Method,
    model: &G,
    tf: f64,
    y0: &S,
    steps_list: &[usize],
    reference: &S,
    weight: impl Fn(f64) -> f64,
) -> Result<Vec<ConvergencePoint>, CliError> {
    steps_list
        .iter()
        .map(|&steps| {
            let y = propagate_final(method, model, 0.0, tf, steps, y0)?;
            Ok(ConvergencePoint {
                dt: tf / steps as f64,
                error: weight(y.distance(reference)),
            })
        })
        .collect()
}

/// Per-sample defects and the smallest per-sample fitted slope.
pub fn run_bch_check(args: &BchArgs) -> Result<(Table, f64), CliError> {
    if args.samples == 0 || args.dim == 0 {
        return Err(CliError::Usage("samples and dim must be positive".into()));
    }
    if args.eps.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
        return Err(CliError::Usage("scale factors must be finite and non-negative".into()));
    }
    let formula = match args.formula {
        FormulaArg::Three => BchFormula::Three,
        FormulaArg::Two => BchFormula::Two,
        FormulaArg::Symmetric => BchFormula::Symmetric,
    };
    let rows = bch_defect_study(formula, args.seed, args.samples, args.dim, &args.eps)
        .map_err(|e| CliError::Failed(e.to_string()))?;
    let mut table = Table::new(vec!["sample", "eps", "defect"]);
    for r in &rows {
        table.push(vec![Some(r.sample as f64), Some(r.eps), Some(r.defect)]);
    }
    let mut min_slope = f64::INFINITY;
    for s in 0..args.samples {
        let pts: Vec<ConvergencePoint> = rows
            .iter()
            .filter(|r| r.sample == s && r.eps > 0.0)
            .map(|r| ConvergencePoint { dt: r.eps, error: r.defect })
            .collect();
        let slope = fit_order(&pts)
            .ok_or_else(|| CliError::Failed(format!("sample {s}: not enough defects above the rounding floor")))?;
        min_slope = min_slope.min(slope);
    }
    Ok((table, min_slope))
}

/// Coefficients with any per-flag overrides applied.
pub fn coefficients_from(args: &CoeffArgs) -> CfctCoefficients {
    let mut c = CfctCoefficients::fourth_order();
    let overrides = [
        (&mut c.a11, args.alpha11),
        (&mut c.a12, args.alpha12),
        (&mut c.a21, args.alpha21),
        (&mut c.a22, args.alpha22),
        (&mut c.a31, args.alpha31),
        (&mut c.a32, args.alpha32),
    ];
    for (slot, value) in overrides {
        if let Some(v) = value {
            *slot = v;
        }
    }
    c
}

fn check_tf(tf: f64) -> Result<(), CliError> {
    if tf > 0.0 && tf.is_finite() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("tf must be positive, got {tf}")))
    }
}

fn slope_line(out: &OutputArgs, slope: f64) {
    // keep stdout a clean table when the table itself goes there
    if out.output.is_some() {
        println!("slope={slope:.6}");
    } else {
        eprintln!("slope={slope:.6}");
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::TwoLevel(a) => {
            let table = run_two_level(a.model.params(a.omega), a.method.method(), a.steps, a.tf)?;
            table.emit(&a.out)
        }
        Command::Schrodinger(a) => {
            let table = run_schrodinger(a.model.params(a.omega), a.method.method(), a.steps, a.tf, a.reference_factor)?;
            table.emit(&a.out)
        }
        Command::Convergence(a) => {
            let (table, slope) = run_convergence(&a)?;
            table.emit(&a.out)?;
            slope_line(&a.out, slope);
            Ok(())
        }
        Command::BchCheck(a) => {
            let (table, slope) = run_bch_check(&a)?;
            table.emit(&a.out)?;
            slope_line(&a.out, slope);
            Ok(())
        }
        Command::VerifyCoeffs(a) => {
            let c = coefficients_from(&a);
            let residuals = verify_coefficient_system(&c);
            let mut stdout = io::stdout().lock();
            for (i, r) in residuals.iter().enumerate() {
                writeln!(stdout, "equation {}: residual = {}", i + 1, format_number(*r))?;
            }
            if residuals.iter().all(|r| r.abs() <= COEFFICIENT_TOLERANCE) {
                Ok(())
            } else {
                Err(CliError::Failed(format!(
                    "order conditions violated (tolerance {COEFFICIENT_TOLERANCE:e})"
                )))
            }
        }
    }
}

/// Parses `args`, runs, and maps the outcome to a process exit code.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Numerical(IntegratorError::StepFailed { step, .. }) = &e {
                eprintln!("failing step index: {step}");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
