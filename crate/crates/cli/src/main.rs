mod config;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use warped_disk::asymptotics::{classify, BiharmonicRegime, ClassifyOptions, HarmonicRegime};
use warped_disk::bvp::{analyze_trace, solve_disk_biharmonic, verify_disk_solution, DEFAULT_ORDER};
use warped_disk::geometry::{builtin_profile, BuiltinParams, BuiltinProfile, BUILTIN_NAMES};
use warped_disk::grid::RadialGrid;
use warped_disk::io::{self as wio, fmt_num};
use warped_disk::modes::{verify_mode_residuals, ModeTable};
use warped_disk::verify::{self, Fault, Suite, VerifyStatus};
use warped_disk::Error;

use config::{FileConfig, Overrides, UsageError};

const EXIT_UNDETERMINED: u8 = 2;
const EXIT_USAGE: u8 = 64;
const EXIT_SOFTWARE: u8 = 70;
const THREADS_VAR: &str = "WARPED_DISK_THREADS";
const BOUNDARY_TOLERANCE: f64 = 1e-8;

/// Harmonic and biharmonic regimes of rotationally symmetric surfaces.
#[derive(Parser, Debug)]
#[command(name = "warped-disk", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Built-in profile name or a profile definition file.
    #[arg(long, global = true)]
    profile: Option<String>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    eps: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    eta: Option<f64>,
    /// Radius where a blended profile reaches its tail.
    #[arg(long, global = true)]
    r0: Option<f64>,
    /// Outer radius of the profile integration.
    #[arg(long, global = true)]
    rmax: Option<f64>,
    #[arg(long, global = true)]
    horizon: Option<f64>,
    #[arg(long = "mmax", global = true, allow_negative_numbers = true)]
    mmax: Option<i64>,
    /// Radial grid, kind:start:end:count (uniform, geometric, doubling).
    #[arg(long, global = true)]
    grid: Option<String>,
    /// Relative tolerance (profile integration, or the checks under `verify`).
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Harmonic and biharmonic regime of a profile.
    Classify,
    /// Tabulate the separated modes on a radial grid.
    Modes,
    /// Solve the biharmonic problem on a disk from a boundary trace.
    Bvp(BvpArgs),
    /// Run the verification suites.
    Verify(VerifyArgs),
    /// List the built-in profiles.
    Profiles,
}

#[derive(Args, Debug)]
struct BvpArgs {
    /// CSV with columns theta,u,lap_u at equispaced angles.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Disk radius.
    #[arg(long)]
    radius: Option<f64>,
    /// Highest Fourier mode kept.
    #[arg(long)]
    order: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FaultArg {
    PhiSecond,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Restrict to these suites.
    #[arg(long = "suite", value_enum)]
    suites: Vec<SuiteArg>,
    #[arg(long)]
    seed: Option<u64>,
    /// Corrupt the profile to check that the suites notice.
    #[arg(long, value_enum)]
    inject_fault: Option<FaultArg>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SuiteArg {
    Stencil,
    Residuals,
    Comparison,
    RoundTrip,
    Regimes,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Self {
        match s {
            SuiteArg::Stencil => Suite::Stencil,
            SuiteArg::Residuals => Suite::Residuals,
            SuiteArg::Comparison => Suite::Comparison,
            SuiteArg::RoundTrip => Suite::RoundTrip,
            SuiteArg::Regimes => Suite::Regimes,
        }
    }
}

enum Failure {
    Usage(String),
    Numeric(String),
}

impl From<UsageError> for Failure {
    fn from(e: UsageError) -> Self {
        Failure::Usage(e.0)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_) | Error::UnknownProfile(_) | Error::Parse(_) | Error::Grid(_) => {
                Failure::Usage(e.to_string())
            }
            _ => Failure::Numeric(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Numeric(e.to_string())
    }
}

type Outcome = Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let code = match init_threads().and_then(|_| run(cli)) {
        Ok(c) => c,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Numeric(msg)) => {
            eprintln!("numerical failure: {msg}");
            EXIT_SOFTWARE
        }
    };
    ExitCode::from(code)
}

fn init_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var(THREADS_VAR) else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Failure::Usage(format!("{THREADS_VAR} must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure::Numeric(e.to_string()))
}

fn run(cli: Cli) -> Outcome {
    let c = &cli.common;
    let (file, base_dir) = match &c.config {
        Some(p) => {
            let dir = p.parent().map(Path::to_path_buf).unwrap_or_default();
            (FileConfig::load(p)?, dir)
        }
        None => (FileConfig::default(), PathBuf::new()),
    };
    let flags = Overrides {
        profile: c.profile.clone(),
        eps: c.eps,
        eta: c.eta,
        r0: c.r0,
        rmax: c.rmax,
        horizon: c.horizon,
        mmax: c.mmax,
        grid: c.grid.clone(),
        tol: c.tol,
        out: c.out.clone(),
    };
    match cli.command {
        Command::Classify => run_classify(&file, &flags, &base_dir),
        Command::Modes => run_modes(&file, &flags, &base_dir),
        Command::Bvp(args) => run_bvp(&file, &flags, &base_dir, &args),
        Command::Verify(args) => run_verify(&file, &flags, &base_dir, &args),
        Command::Profiles => run_profiles(),
    }
}

fn output_dir(out: &Option<PathBuf>) -> Result<Option<&Path>, Failure> {
    match out {
        Some(d) => {
            fs::create_dir_all(d).map_err(|e| Failure::Usage(format!("cannot create {}: {e}", d.display())))?;
            Ok(Some(d.as_path()))
        }
        None => Ok(None),
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, Failure> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn run_classify(file: &FileConfig, flags: &Overrides, base: &Path) -> Outcome {
    let run = config::resolve_run(file, &file.classify, flags, base, false)?;
    if run.m_max < 1 {
        return Err(Failure::Usage("classification needs m-max of at least 1".into()));
    }
    let surface = run.profile.build()?;
    let opts = ClassifyOptions { horizon: run.horizon, m_max: run.m_max, ..ClassifyOptions::default() };
    let report = classify(&surface, &opts)?;
    let text = wio::report_text(&report)?;
    print!("{text}");
    if let Some(dir) = output_dir(&run.out)? {
        fs::write(dir.join("report.toml"), &text)?;
        wio::write_evidence_csv(create(dir, "evidence.csv")?, &report)?;
    }
    let undetermined = report.harmonic_regime == HarmonicRegime::Undetermined
        || report.biharmonic_regime == BiharmonicRegime::Undetermined;
    Ok(if undetermined { EXIT_UNDETERMINED } else { 0 })
}

fn run_modes(file: &FileConfig, flags: &Overrides, base: &Path) -> Outcome {
    let run = config::resolve_run(file, &file.modes, flags, base, false)?;
    let surface = run.profile.build()?;
    let grid = match &run.grid {
        Some(g) => g.build()?,
        None => RadialGrid::doubling(run.horizon / 2f64.powi(14), run.horizon, 8)?,
    };
    if grid.last() > surface.metric.r_max() * (1.0 + 1e-12) {
        return Err(Failure::Usage(format!("grid ends at {} beyond R_max {}", grid.last(), surface.metric.r_max())));
    }
    let table = ModeTable::new(&surface.metric, &grid)?;
    let ms: Vec<i64> = (0..=run.m_max).collect();
    let modes = table.biharmonic_modes(&ms)?;
    let out = output_dir(&run.out)?;
    if let Some(dir) = out {
        wio::write_profile_csv(create(dir, "profile.csv")?, &surface, &grid)?;
    }
    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "m,max_residual,rms_residual,lambda_end,z_end")?;
    for mode in &modes {
        let res = verify_mode_residuals(&surface.metric, mode)?;
        let last = mode.lambda.len() - 1;
        writeln!(
            stdout,
            "{},{},{},{},{}",
            mode.m,
            fmt_num(res.max),
            fmt_num(res.rms),
            fmt_num(mode.lambda[last]),
            fmt_num(mode.z[last])
        )?;
        if let Some(dir) = out {
            // φ_{-m} = φ_m, so both signs share one table
            let signs: &[i64] = if mode.m == 0 { &[1] } else { &[1, -1] };
            for &s in signs {
                let mut m = mode.clone();
                m.m = s * mode.m;
                wio::write_mode_csv(create(dir, &format!("mode_{}.csv", m.m))?, &m)?;
                let mut r = res.clone();
                r.m = m.m;
                wio::write_residual_csv(create(dir, &format!("residual_{}.csv", m.m))?, &r)?;
            }
        }
    }
    Ok(0)
}

fn run_bvp(file: &FileConfig, flags: &Overrides, base: &Path, args: &BvpArgs) -> Outcome {
    let sec = &file.bvp;
    let trace_path = match (&args.trace, &sec.trace) {
        (Some(p), _) => p.clone(),
        (None, Some(p)) => base.join(p),
        (None, None) => return Err(Failure::Usage("bvp needs --trace".into())),
    };
    let radius = args.radius.or(sec.radius).ok_or_else(|| Failure::Usage("bvp needs --radius".into()))?;
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Failure::Usage(format!("radius must be positive, got {radius}")));
    }
    let tolerance = sec.tolerance.unwrap_or(BOUNDARY_TOLERANCE);
    // the disk only needs the profile up to its radius
    let mut local = flags.clone();
    local.horizon = Some(radius.max(1.0));
    let section = config::RunSection::default();
    let run = config::resolve_run(file, &section, &local, base, false)?;
    let reader =
        File::open(&trace_path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", trace_path.display())))?;
    let trace = wio::read_trace_csv(BufReader::new(reader), radius)?;
    let order = args.order.or(sec.order).unwrap_or(DEFAULT_ORDER.min(trace.len() / 2 - 1));
    let surface = run.profile.build()?;
    let spectrum = analyze_trace(&trace, order)?;
    let (modes, coeffs) = solve_disk_biharmonic(&surface.metric, radius, &spectrum)?;
    let grid = RadialGrid::doubling(radius / 2f64.powi(6), radius, 4)?;
    let rep = verify_disk_solution(&modes, &coeffs, &grid, Some(&spectrum), Some(&trace))?;
    let trace_error = rep.trace_error.unwrap_or(rep.boundary_error);
    let reproduced = trace_error <= tolerance && rep.boundary_error <= tolerance;

    let mut text = String::new();
    text.push_str(&format!("profile = \"{}\"\n", surface.name));
    text.push_str(&format!("radius = {}\n", fmt_num(radius)));
    text.push_str(&format!("order = {order}\n"));
    text.push_str(&format!("samples = {}\n", trace.len()));
    text.push_str(&format!("truncation_u = {}\n", fmt_num(spectrum.truncation_u)));
    text.push_str(&format!("truncation_lap_u = {}\n", fmt_num(spectrum.truncation_lap_u)));
    text.push_str(&format!("aliasing_warning = {}\n", spectrum.aliasing_warning));
    text.push_str(&format!("underflow = {}\n", coeffs.any_underflow()));
    let worst_feed = coeffs.entries.iter().fold(0.0f64, |a, e| a.max(e.psi_over_phi));
    text.push_str(&format!("max_psi_over_phi = {}\n", fmt_num(worst_feed)));
    text.push_str(&format!("max_mode_residual = {}\n", fmt_num(rep.max_residual)));
    text.push_str(&format!("boundary_error = {}\n", fmt_num(rep.boundary_error)));
    text.push_str(&format!("trace_error = {}\n", fmt_num(trace_error)));
    text.push_str(&format!("tolerance = {}\n", fmt_num(tolerance)));
    text.push_str(&format!("reproduced = {reproduced}\n"));
    print!("{text}");
    match output_dir(&run.out)? {
        Some(dir) => {
            wio::write_coefficients_csv(create(dir, "coefficients.csv")?, &coeffs)?;
            fs::write(dir.join("bvp_report.toml"), &text)?;
        }
        None => wio::write_coefficients_csv(std::io::stdout().lock(), &coeffs)?,
    }
    if spectrum.aliasing_warning {
        eprintln!("warning: trace content near the Nyquist mode; coefficients may be aliased");
    }
    Ok(if reproduced { 0 } else { 1 })
}

fn run_verify(file: &FileConfig, flags: &Overrides, base: &Path, args: &VerifyArgs) -> Outcome {
    let mut cfg = config::resolve_verify(file, flags)?;
    if !args.suites.is_empty() {
        cfg.suites = args.suites.iter().map(|&s| s.into()).collect();
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(FaultArg::PhiSecond) = args.inject_fault {
        cfg.fault = Some(Fault::PhiSecondMismatch);
    }
    let report = verify::run(&cfg)?;
    let summary = report.summary(&cfg);
    print!("{summary}");
    let out = flags.out.clone().or_else(|| file.output.dir.as_ref().map(|d| base.join(d)));
    if let Some(dir) = output_dir(&out)? {
        fs::write(dir.join("verify_summary.txt"), &summary)?;
        report.write_checks_csv(create(dir, "verify_checks.csv")?)?;
    }
    Ok(match report.status {
        VerifyStatus::Passed => 0,
        VerifyStatus::Failed => 1,
        VerifyStatus::ToleranceInfeasible => 2,
    })
}

fn run_profiles() -> Outcome {
    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "name,kind,tail,tail_from")?;
    for name in BUILTIN_NAMES {
        let (kind, curvature) = match builtin_profile(name, &BuiltinParams::default())? {
            BuiltinProfile::Analytic { curvature, .. } => ("analytic", curvature),
            BuiltinProfile::Curvature(c) => ("curvature", c),
        };
        let (tail, from) = match &curvature.tail {
            Some(t) => (t.class.label(), fmt_num(t.from_radius)),
            None => ("none".to_string(), String::new()),
        };
        writeln!(stdout, "{name},{kind},\"{tail}\",{from}")?;
    }
    Ok(0)
}
