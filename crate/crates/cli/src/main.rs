//! `dispersion-lab` command-line front end.
//!
//! Exit status: 0 on success, 2 when a module refuses a spec that violates
//! one of its structural assumptions, 1 on every other failure. Errors are
//! reported as one `error[code]: message` line on stderr.

use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;

use dispersion_lab::decay::{
    energy_trace_with, predicted_exponent, DecayError, EnergyTrace, InitialDataProfile, QuadratureOptions,
};
use dispersion_lab::dispersion::{
    asymptotic_coefficients, band_structure, trace_branches_with, verify_asymptotics, DispersionError,
    DispersionSolver, TraceOptions,
};
use dispersion_lab::fit::logspace;
use dispersion_lab::herglotz::measure_of;
use dispersion_lab::material::{herglotz_sample, log_polar_grid, validate_assumptions, Channel, MaterialSpec};
use dispersion_lab::modal::{build_modal, eigenvalues, rk4_reference, spectrum_consistency_with, ModalError};
use dispersion_lab::spec_file::{parse_spec, SpecFileError};

#[derive(Parser, Debug)]
#[command(name = "dispersion-lab", version, about = "Dispersion, passivity and energy decay of Lorentz media")]
struct Cli {
    /// worker threads for parallel sections (DISPERSION_LAB_THREADS wins)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// write the primary output here instead of stdout
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Structural assumptions, dissipativity class and passivity sampling (JSON)
    Check(SpecArg),
    /// Herglotz sampling of ωε and ωμ on a log-polar grid (JSON)
    Herglotz(HerglotzArgs),
    /// Nevanlinna measure of one channel: density samples (CSV) or description (JSON)
    Measure(MeasureArgs),
    /// Dispersion branches
    #[command(subcommand)]
    Dispersion(DispersionCommand),
    /// Band structure of a non-dissipative medium (JSON)
    Bands(BandsArgs),
    /// Asymptotic damping laws and their verification (JSON)
    Asymptotics(AsymptoticsArgs),
    /// Modal matrix at fixed wavenumber
    #[command(subcommand)]
    Modal(ModalCommand),
    /// Energy decay of a plane-wave superposition (CSV + JSON summary)
    Decay(DecayArgs),
}

#[derive(Args, Debug)]
struct SpecArg {
    /// material file (JSON)
    #[arg(long)]
    spec: PathBuf,
}

#[derive(Args, Debug)]
struct HerglotzArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long, default_value_t = 100)]
    radial: usize,
    #[arg(long, default_value_t = 100)]
    angular: usize,
    #[arg(long, default_value_t = 1e-3)]
    rmin: f64,
    #[arg(long, default_value_t = 1e3)]
    rmax: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ChannelArg {
    Electric,
    Magnetic,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct MeasureArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long, value_enum, default_value_t = ChannelArg::Electric)]
    channel: ChannelArg,
    /// density samples on [0, xi_max]; defaults to 4·ω_max
    #[arg(long)]
    xi_max: Option<f64>,
    #[arg(long, default_value_t = 401)]
    points: usize,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Subcommand, Debug)]
enum DispersionCommand {
    /// Branches on k = 0 plus a log grid over [kmin, kmax] (CSV: k, n, re_omega, im_omega)
    Trace(TraceArgs),
}

#[derive(Args, Debug)]
struct TraceArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long, default_value_t = 1e-3)]
    kmin: f64,
    #[arg(long, default_value_t = 1e3)]
    kmax: f64,
    #[arg(long, default_value_t = 200)]
    points: usize,
    /// fail instead of recording unresolved branch crossings
    #[arg(long)]
    strict: bool,
}

#[derive(Args, Debug)]
struct BandsArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long, default_value_t = 400)]
    points: usize,
}

#[derive(Args, Debug)]
struct AsymptoticsArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long, default_value_t = 400)]
    points: usize,
}

#[derive(Subcommand, Debug)]
enum ModalCommand {
    /// Eigenvalues and their distance to the dispersion roots (JSON)
    Spectrum(SpectrumArgs),
    /// RK4 energy ledger from E = H = 1 (CSV: t, energy, dissipation, balance_defect)
    Evolve(EvolveArgs),
}

#[derive(Args, Debug)]
struct SpectrumArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    k: f64,
    /// polarization sign, +1 or -1
    #[arg(long, default_value_t = 1, allow_hyphen_values = true)]
    sign: i8,
}

#[derive(Args, Debug)]
struct EvolveArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    k: f64,
    #[arg(long)]
    t: f64,
    #[arg(long)]
    dt: f64,
    #[arg(long, default_value_t = 1, allow_hyphen_values = true)]
    sign: i8,
}

#[derive(Args, Debug)]
struct DecayArgs {
    #[arg(long)]
    spec: PathBuf,
    /// Sobolev index of the initial profile
    #[arg(long)]
    s: f64,
    /// low-frequency order of the initial profile
    #[arg(long)]
    p: f64,
    #[arg(long, default_value_t = 1.0)]
    tmin: f64,
    #[arg(long, default_value_t = 1e6)]
    tmax: f64,
    #[arg(long, default_value_t = 25)]
    points: usize,
    /// tail margin δ of the profile
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// relative quadrature tolerance
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    /// base wavenumber nodes per decade (refined adaptively)
    #[arg(long, default_value_t = 24)]
    k_per_decade: usize,
    /// JSON summary path; defaults to stdout when --output holds the CSV
    #[arg(long)]
    summary: Option<PathBuf>,
}

struct Failure {
    code: String,
    message: String,
    status: u8,
}

impl Failure {
    fn new(code: &str, message: impl Into<String>) -> Self {
        Failure { code: code.into(), message: message.into(), status: 1 }
    }
}

impl From<DispersionError> for Failure {
    fn from(e: DispersionError) -> Self {
        let status = if matches!(e, DispersionError::AssumptionViolated { .. }) { 2 } else { 1 };
        Failure { code: e.code().into(), message: e.to_string(), status }
    }
}

impl From<ModalError> for Failure {
    fn from(e: ModalError) -> Self {
        match e {
            ModalError::Dispersion(d) => d.into(),
            e => Failure::new(e.code(), e.to_string()),
        }
    }
}

impl From<DecayError> for Failure {
    fn from(e: DecayError) -> Self {
        match e {
            DecayError::Dispersion(d) => d.into(),
            DecayError::Modal(m) => m.into(),
            e => Failure::new(e.code(), e.to_string()),
        }
    }
}

impl From<SpecFileError> for Failure {
    fn from(e: SpecFileError) -> Self {
        Failure::new(e.code(), e.to_string())
    }
}

impl From<dispersion_lab::material::MaterialError> for Failure {
    fn from(e: dispersion_lab::material::MaterialError) -> Self {
        Failure::new(e.code(), e.to_string())
    }
}

fn read_spec(path: &PathBuf) -> Result<MaterialSpec, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::new("io.read", format!("{}: {e}", path.display())))?;
    Ok(parse_spec(&text)?.spec)
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn complex_json(z: Complex64) -> serde_json::Value {
    json!({"re": z.re, "im": z.im})
}

fn positive(name: &str, v: f64) -> Result<(), Failure> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Failure::new("cli.invalid_option", format!("--{name} must be positive and finite")))
    }
}

fn at_least_two(name: &str, n: usize) -> Result<(), Failure> {
    if n >= 2 {
        Ok(())
    } else {
        Err(Failure::new("cli.invalid_option", format!("--{name} must be at least 2")))
    }
}

/// Output of one command: the primary document plus an optional second
/// document (the decay summary).
struct Outputs {
    primary: String,
    summary: Option<String>,
}

fn check(args: &SpecArg) -> Result<Outputs, Failure> {
    let spec = read_spec(&args.spec)?;
    let report = validate_assumptions(&spec)?;
    let grid = log_polar_grid(100, 100, 1e-3, 1e3);
    let herglotz = herglotz_sample(&spec, &grid)?;
    let doc = json!({
        "structure": report,
        "herglotz": herglotz,
        "light_speed": spec.light_speed(),
        "omega_min": spec.omega_min(),
        "omega_max": spec.omega_max(),
    });
    Ok(Outputs { primary: to_json(&doc), summary: None })
}

fn herglotz(args: &HerglotzArgs) -> Result<Outputs, Failure> {
    positive("rmin", args.rmin)?;
    positive("rmax", args.rmax)?;
    if args.rmin >= args.rmax || args.radial == 0 || args.angular == 0 {
        return Err(Failure::new("cli.invalid_option", "need rmin < rmax and nonempty grid"));
    }
    let spec = read_spec(&args.spec)?;
    let grid = log_polar_grid(args.radial, args.angular, args.rmin, args.rmax);
    Ok(Outputs { primary: to_json(&herglotz_sample(&spec, &grid)?), summary: None })
}

fn measure(args: &MeasureArgs) -> Result<Outputs, Failure> {
    at_least_two("points", args.points)?;
    let spec = read_spec(&args.spec)?;
    let channel = match args.channel {
        ChannelArg::Electric => Channel::Electric,
        ChannelArg::Magnetic => Channel::Magnetic,
    };
    let m = measure_of(&spec, channel);
    if args.format == Format::Json {
        return Ok(Outputs { primary: to_json(&m), summary: None });
    }
    let xi_max = args.xi_max.unwrap_or(4.0 * spec.omega_max());
    positive("xi-max", xi_max)?;
    let mut out = String::from("xi,density\n");
    for i in 0..args.points {
        let xi = xi_max * i as f64 / (args.points - 1) as f64;
        writeln!(out, "{},{}", num(xi), num(m.density(xi))).unwrap();
    }
    Ok(Outputs { primary: out, summary: None })
}

fn trace(args: &TraceArgs) -> Result<Outputs, Failure> {
    at_least_two("points", args.points)?;
    if !(args.kmin >= 0.0) || !(args.kmax > args.kmin) || !args.kmax.is_finite() {
        return Err(Failure::new("cli.invalid_option", "need 0 ≤ kmin < kmax"));
    }
    let spec = read_spec(&args.spec)?;
    let solver = DispersionSolver::new(&spec)?;
    let (grid, skip) = if args.kmin == 0.0 {
        ((0..args.points).map(|i| args.kmax * i as f64 / (args.points - 1) as f64).collect::<Vec<_>>(), 0)
    } else {
        let mut g = vec![0.0];
        g.extend(logspace(args.kmin, args.kmax, args.points));
        (g, 1)
    };
    let opts = TraceOptions { strict: args.strict, ..TraceOptions::default() };
    let set = trace_branches_with(&solver, &grid, opts)?;
    let mut out = String::from("k,n,re_omega,im_omega\n");
    for (j, &k) in set.k_grid.iter().enumerate().skip(skip) {
        for b in &set.branches {
            let w = b.values[j];
            writeln!(out, "{},{},{},{}", num(k), b.index, num(w.re), num(w.im)).unwrap();
        }
    }
    Ok(Outputs { primary: out, summary: None })
}

fn bands(args: &BandsArgs) -> Result<Outputs, Failure> {
    at_least_two("points", args.points)?;
    let spec = read_spec(&args.spec)?;
    if spec.is_dissipative() {
        return Err(DispersionError::AssumptionViolated { flag: "non_dissipative" }.into());
    }
    let solver = DispersionSolver::new(&spec)?;
    let set = trace_branches_with(&solver, &dispersion_lab::dispersion::default_k_grid(&spec, args.points), TraceOptions::default())?;
    Ok(Outputs { primary: to_json(&band_structure(&spec, &set)?), summary: None })
}

fn asymptotics(args: &AsymptoticsArgs) -> Result<Outputs, Failure> {
    at_least_two("points", args.points)?;
    let spec = read_spec(&args.spec)?;
    let coefficients = asymptotic_coefficients(&spec)?;
    let solver = DispersionSolver::new(&spec)?;
    let set = trace_branches_with(&solver, &dispersion_lab::dispersion::default_k_grid(&spec, args.points), TraceOptions::default())?;
    let reports = verify_asymptotics(&set, &coefficients)?;
    let doc = json!({"coefficients": coefficients, "reports": reports, "suspected_swaps": set.suspected_swaps});
    Ok(Outputs { primary: to_json(&doc), summary: None })
}

fn spectrum(args: &SpectrumArgs) -> Result<Outputs, Failure> {
    let spec = read_spec(&args.spec)?;
    let sys = build_modal(&spec, args.k, args.sign)?;
    let eig = eigenvalues(&sys.matrix)?;
    let solver = DispersionSolver::new(&spec)?;
    let matched = spectrum_consistency_with(&solver, args.k)?;
    let doc = json!({
        "k": args.k,
        "polarization_sign": args.sign,
        "eigenvalues": eig.iter().map(|&z| complex_json(z)).collect::<Vec<_>>(),
        "roots": matched.roots.iter().map(|&z| complex_json(z)).collect::<Vec<_>>(),
        "max_distance": matched.max_distance,
        "max_scaled_distance": matched.max_scaled_distance,
        "self_adjoint_defect": sys.self_adjoint_defect(),
    });
    Ok(Outputs { primary: to_json(&doc), summary: None })
}

fn evolve(args: &EvolveArgs) -> Result<Outputs, Failure> {
    positive("dt", args.dt)?;
    if !(args.t >= 0.0) || !args.t.is_finite() {
        return Err(Failure::new("cli.invalid_option", "--t must be finite and nonnegative"));
    }
    let spec = read_spec(&args.spec)?;
    let sys = build_modal(&spec, args.k, args.sign)?;
    let u0 = sys.field_state(Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0));
    let rk = rk4_reference(&sys, &u0, args.t, args.dt)?;
    let mut out = String::from("t,energy,dissipation,balance_defect\n");
    for r in &rk.ledger {
        writeln!(out, "{},{},{},{}", num(r.t), num(r.energy), num(r.dissipation), num(r.balance_defect)).unwrap();
    }
    Ok(Outputs { primary: out, summary: None })
}

fn decay(args: &DecayArgs) -> Result<(Outputs, Option<Failure>), Failure> {
    at_least_two("points", args.points)?;
    positive("tmin", args.tmin)?;
    positive("tol", args.tol)?;
    if !(args.tmax > args.tmin) || !args.tmax.is_finite() {
        return Err(Failure::new("cli.invalid_option", "need tmin < tmax"));
    }
    let spec = read_spec(&args.spec)?;
    let profile = InitialDataProfile { tail_margin: args.delta, ..InitialDataProfile::new(args.p, args.s) };
    at_least_two("k-per-decade", args.k_per_decade)?;
    let opts = QuadratureOptions { rel_tol: args.tol, points_per_decade: args.k_per_decade, ..QuadratureOptions::default() };
    let trace: EnergyTrace = energy_trace_with(&spec, &profile, &logspace(args.tmin, args.tmax, args.points), opts)?;
    let mut csv = String::from("t,energy,energy_total,lf,mf,hf\n");
    for s in &trace.samples {
        writeln!(csv, "{},{},{},{},{},{}", num(s.t), num(s.energy), num(s.energy_total), num(s.lf), num(s.mf), num(s.hf))
            .unwrap();
    }
    let window = trace.last_decade();
    let fit = dispersion_lab::decay::fit_decay_exponent(&trace, window);
    let (fitted, r2, failure) = match &fit {
        Ok(f) => (Some(f.exponent), Some(f.r_squared), None),
        Err(DecayError::RegressionUnstable { r_squared }) => (None, Some(*r_squared), Some(fit.clone().unwrap_err().into())),
        Err(e) => (None, None, Some(e.clone().into())),
    };
    let summary = json!({
        "fitted_exponent": fitted,
        "predicted_exponent": predicted_exponent(&spec, &profile),
        "r2": r2,
        "window": [window.0, window.1],
    });
    Ok((Outputs { primary: csv, summary: Some(to_json(&summary)) }, failure))
}

fn write_out(path: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::new("io.write", format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Failure::new("io.write", format!("stdout: {e}"))),
                _ => Ok(()),
            }
        }
    }
}

fn threads(cli_value: Option<usize>) -> Result<Option<usize>, Failure> {
    match std::env::var("DISPERSION_LAB_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| Failure::new("cli.invalid_option", "DISPERSION_LAB_THREADS must be a positive integer")),
        Err(_) => Ok(cli_value),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = threads(cli.threads)? {
        if n == 0 {
            return Err(Failure::new("cli.invalid_option", "--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::new("cli.threads", e.to_string()))?;
    }
    let (outputs, deferred, summary_path) = match &cli.command {
        Command::Check(a) => (check(a)?, None, None),
        Command::Herglotz(a) => (herglotz(a)?, None, None),
        Command::Measure(a) => (measure(a)?, None, None),
        Command::Dispersion(DispersionCommand::Trace(a)) => (trace(a)?, None, None),
        Command::Bands(a) => (bands(a)?, None, None),
        Command::Asymptotics(a) => (asymptotics(a)?, None, None),
        Command::Modal(ModalCommand::Spectrum(a)) => (spectrum(a)?, None, None),
        Command::Modal(ModalCommand::Evolve(a)) => (evolve(a)?, None, None),
        Command::Decay(a) => {
            let (o, f) = decay(a)?;
            (o, f, a.summary.clone())
        }
    };
    write_out(&cli.output, &outputs.primary)?;
    if let Some(summary) = &outputs.summary {
        match (&summary_path, &cli.output) {
            (Some(p), _) => write_out(&Some(p.clone()), summary)?,
            (None, Some(_)) => write_out(&None, summary)?,
            (None, None) => {}
        }
    }
    match deferred {
        Some(f) => Err(f),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let body = text.split("\n\nUsage:").next().unwrap_or_default();
            let line = body.split_whitespace().collect::<Vec<_>>().join(" ");
            eprintln!("error[cli.usage]: {}", line.trim_start_matches("error: "));
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error[{}]: {}", f.code, f.message.replace('\n', " "));
            ExitCode::from(f.status)
        }
    }
}
