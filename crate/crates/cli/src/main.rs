//! `agdcert` command-line driver.
//!
//! Exit codes: 0 pass, 1 property violation, 2 configuration or parse
//! error, 3 numerical or solver failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use agdcert::agd::{fmt_num, write_trajectory_csv, BOUND_RTOL};
use agdcert::pep::{write_sweep_csv, PEP_SOLVER_TOL};
use agdcert::problems::{GeometryTag, ProblemSpec};
use agdcert::{
    all_bounds, compute_delta, finite_diff_check, lipschitz, make_schedule, reference_optimum,
    run_agd, solve_conic, solve_pep, sweep, table1, Error, FixedConvention, PepCertificate,
    PepInstance, PepMode, PepOptions, Problem, ReferencePoint, ScheduleName, SdpInstance,
    SdpSettings, SdpStatus,
};

/// Relative slack floor for the `Δ(x)` inequality.
const DELTA_RTOL: f64 = 1e-8;
/// Largest accepted finite-difference relative error.
const GRADCHECK_TOL: f64 = 1e-6;
/// Overrides the directory that relative output paths resolve against.
const OUT_DIR_ENV: &str = "AGDCERT_OUT_DIR";

#[derive(Parser, Debug)]
#[command(
    name = "agdcert",
    version,
    about = "AGD bound certification and PEP certificates"
)]
struct Cli {
    /// Output file (stdout when absent)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for sweeps (0 = all cores)
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Accelerated gradient runs and bound reports
    #[command(subcommand)]
    Agd(AgdCommand),
    /// Finite-difference gradient check at seeded feasible points
    Gradcheck(GradcheckArgs),
    /// Performance-estimation certificates
    #[command(subcommand)]
    Pep(PepCommand),
    /// Standalone conic solver
    #[command(subcommand)]
    Sdp(SdpCommand),
}

#[derive(Subcommand, Debug)]
enum AgdCommand {
    /// Trajectory CSV with every applicable bound
    Run(RunArgs),
    /// Bound summary plus the Δ(x) inequality at seeded reference points
    Certify(CertifyArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long)]
    problem: PathBuf,
    #[arg(long, default_value = "s1")]
    schedule: String,
    #[arg(long)]
    iters: usize,
    #[arg(long, value_enum)]
    geometry: Option<GeometryArg>,
}

#[derive(Args, Debug)]
struct CertifyArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Number of seeded reference points for the Δ(x) check
    #[arg(long, default_value_t = 8)]
    points: usize,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum GeometryArg {
    Euclidean,
    Entropy,
}

#[derive(Args, Debug)]
struct GradcheckArgs {
    #[arg(long)]
    problem: PathBuf,
    #[arg(long, default_value_t = 8)]
    points: usize,
    /// Central-difference step
    #[arg(long, default_value_t = 1e-5)]
    step: f64,
}

#[derive(Subcommand, Debug)]
enum PepCommand {
    /// Solve every (N, mode) pair for s1 with L = R = 1
    Sweep(SweepArgs),
    /// Solve one instance and print its certificate
    Solve(SolveArgs),
    /// Re-verify a certificate file
    Verify(VerifyArgs),
    /// Fixed-mode c_{k,x*}·N(N+1) table
    Table1(Table1Args),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ConventionArg {
    ProofAligned,
    AsPrinted,
}

impl From<ConventionArg> for FixedConvention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::ProofAligned => FixedConvention::ProofAligned,
            ConventionArg::AsPrinted => FixedConvention::AsPrinted,
        }
    }
}

#[derive(Args, Debug)]
struct PepCommon {
    #[arg(long, value_enum, default_value_t = ConventionArg::ProofAligned)]
    convention: ConventionArg,
    #[arg(long, default_value_t = PEP_SOLVER_TOL)]
    tol: f64,
    #[arg(long, default_value_t = 200_000)]
    max_iter: usize,
    /// Record wall-clock solve times (makes output nondeterministic)
    #[arg(long)]
    timings: bool,
}

impl PepCommon {
    fn options(&self) -> PepOptions {
        PepOptions {
            sdp: SdpSettings {
                tolerance: self.tol,
                max_iter: self.max_iter,
                ..SdpSettings::default()
            },
            convention: self.convention.into(),
        }
    }
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long, default_value_t = 3)]
    n_min: usize,
    #[arg(long)]
    n_max: usize,
    #[arg(long, value_delimiter = ',', default_value = "general")]
    modes: Vec<String>,
    /// Directory for per-row certificate JSON files
    #[arg(long)]
    cert_dir: Option<PathBuf>,
    #[command(flatten)]
    common: PepCommon,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value = "general")]
    mode: String,
    #[arg(long, default_value = "s1")]
    schedule: String,
    #[arg(long, default_value_t = 1.0)]
    lipschitz: f64,
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    #[command(flatten)]
    common: PepCommon,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[arg(long)]
    certificate: PathBuf,
}

#[derive(Args, Debug)]
struct Table1Args {
    #[arg(long, default_value_t = 3)]
    n_min: usize,
    #[arg(long)]
    n_max: usize,
    #[command(flatten)]
    common: PepCommon,
}

#[derive(Subcommand, Debug)]
enum SdpCommand {
    /// Solve an instance JSON file
    Solve(SdpSolveArgs),
}

#[derive(Args, Debug)]
struct SdpSolveArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
    #[arg(long, default_value_t = 200_000)]
    max_iter: usize,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Numerical { .. }
            | Error::Solver { .. }
            | Error::EigNoConvergence { .. }
            | Error::NotPositiveDefinite { .. } => 3,
            _ => 2,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult = Result<u8, Failure>;

struct Output {
    path: Option<PathBuf>,
    format: Format,
}

impl Output {
    fn resolve(path: &Path) -> PathBuf {
        match std::env::var_os(OUT_DIR_ENV) {
            Some(dir) if path.is_relative() => Path::new(&dir).join(path),
            _ => path.to_path_buf(),
        }
    }

    fn write(&self, content: &[u8]) -> Result<(), Failure> {
        match &self.path {
            Some(p) => {
                let p = Self::resolve(p);
                if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                    fs::create_dir_all(parent)
                        .map_err(|e| Failure::config(format!("{}: {e}", parent.display())))?;
                }
                fs::write(&p, content).map_err(|e| Failure::config(format!("{}: {e}", p.display())))
            }
            None => std::io::stdout()
                .write_all(content)
                .map_err(|e| Failure::config(format!("stdout: {e}"))),
        }
    }

    fn json(&self, value: &serde_json::Value) -> Result<(), Failure> {
        let mut s = serde_json::to_string_pretty(value).expect("json value serializes");
        s.push('\n');
        self.write(s.as_bytes())
    }
}

fn load_problem(path: &Path, geometry: Option<GeometryArg>) -> Result<Problem, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    let mut spec: ProblemSpec = serde_json::from_str(&text).map_err(Error::from)?;
    if let Some(g) = geometry {
        spec.geometry = match g {
            GeometryArg::Euclidean => GeometryTag::Euclidean,
            GeometryArg::Entropy => GeometryTag::Entropy,
        };
    }
    Ok(spec.build()?)
}

struct RunOutcome {
    problem: Problem,
    schedule: agdcert::Schedule,
    traj: agdcert::Trajectory,
    reference: ReferencePoint,
    reports: Vec<agdcert::BoundReport>,
    scale: f64,
}

fn execute_run(args: &RunArgs) -> Result<RunOutcome, Failure> {
    if args.iters == 0 {
        return Err(Failure::config("--iters must be at least 1"));
    }
    let problem = load_problem(&args.problem, args.geometry)?;
    let name = ScheduleName::parse(&args.schedule)?;
    let l = lipschitz(&problem.objective, problem.geometry.norm)?.value;
    let schedule = make_schedule(name, l, args.iters)?;
    let traj = run_agd(
        &problem.objective,
        &problem.geometry,
        &schedule,
        &problem.x0,
        args.iters,
    )?;
    let reference = ReferencePoint::from(reference_optimum(&problem.objective, &problem.geometry)?);
    let reports = all_bounds(&schedule, &traj, &problem.geometry, &reference)?;
    let scale = 1.0 + traj.f_bar_at(0).abs();
    Ok(RunOutcome {
        problem,
        schedule,
        traj,
        reference,
        reports,
        scale,
    })
}

fn cmd_agd_run(args: &RunArgs, out: &Output) -> CliResult {
    let r = execute_run(args)?;
    let ok = r
        .reports
        .iter()
        .filter(|b| b.is_applicable())
        .all(|b| b.holds(BOUND_RTOL, r.scale));
    match out.format {
        Format::Csv => {
            let mut buf = Vec::new();
            write_trajectory_csv(&mut buf, &r.traj, &r.reports, &r.reference)
                .expect("in-memory write");
            out.write(&buf)?;
        }
        Format::Json => out.json(&json!({
            "schedule": r.schedule,
            "reference_value": r.reference.value,
            "reference_is_optimum": r.reference.is_optimum,
            "trajectory": r.traj,
            "bounds": r.reports,
        }))?,
    }
    Ok(u8::from(!ok))
}

fn cmd_agd_certify(args: &CertifyArgs, seed: u64, out: &Output) -> CliResult {
    let r = execute_run(&args.run)?;
    let mut rows: Vec<(String, String, bool, Option<f64>, f64, bool)> = Vec::new();
    for b in &r.reports {
        let applicable = b.is_applicable();
        let floor = -(BOUND_RTOL * r.scale + b.enclosure);
        rows.push((
            "bound".into(),
            b.id.to_string(),
            applicable,
            b.min_slack(),
            floor,
            !applicable || b.holds(BOUND_RTOL, r.scale),
        ));
    }
    let points = r.problem.geometry.set.sample_seeded(args.points, seed);
    let floor = -DELTA_RTOL * r.scale;
    for (i, x) in points.iter().enumerate() {
        let d = compute_delta(
            &r.problem.objective,
            &r.schedule,
            &r.traj,
            &r.problem.geometry,
            x,
        )?;
        rows.push((
            "delta".into(),
            format!("point_{i}"),
            true,
            Some(d.slack()),
            floor,
            d.slack() >= floor,
        ));
    }
    let ok = rows.iter().all(|row| row.5);
    match out.format {
        Format::Csv => {
            let mut s = String::from("check,id,applicable,min_slack,floor,holds\n");
            for (check, id, app, slack, floor, holds) in &rows {
                s += &format!(
                    "{check},{id},{app},{},{},{holds}\n",
                    fmt_num(*slack),
                    fmt_num(Some(*floor))
                );
            }
            out.write(s.as_bytes())?;
        }
        Format::Json => {
            let items: Vec<_> = rows
                .iter()
                .map(|(check, id, app, slack, floor, holds)| {
                    json!({"check": check, "id": id, "applicable": app, "min_slack": slack, "floor": floor, "holds": holds})
                })
                .collect();
            out.json(&json!({ "n_iter": r.traj.len(), "schedule": r.schedule.name, "checks": items, "pass": ok }))?;
        }
    }
    Ok(u8::from(!ok))
}

fn cmd_gradcheck(args: &GradcheckArgs, seed: u64, out: &Output) -> CliResult {
    if !(args.step > 0.0) || !args.step.is_finite() {
        return Err(Failure::config("--step must be positive"));
    }
    let problem = load_problem(&args.problem, None)?;
    let points = problem.geometry.set.sample_seeded(args.points, seed);
    let mut errs = Vec::with_capacity(points.len() + 1);
    errs.push(finite_diff_check(
        &problem.objective,
        &problem.x0,
        args.step,
    )?);
    for x in &points {
        errs.push(finite_diff_check(&problem.objective, x, args.step)?);
    }
    let worst = errs.iter().copied().fold(0.0, f64::max);
    match out.format {
        Format::Csv => {
            let mut s = String::from("point,max_rel_error\n");
            s += &format!("x0,{}\n", fmt_num(Some(errs[0])));
            for (i, e) in errs[1..].iter().enumerate() {
                s += &format!("point_{i},{}\n", fmt_num(Some(*e)));
            }
            out.write(s.as_bytes())?;
        }
        Format::Json => out
            .json(&json!({ "errors": errs, "max_rel_error": worst, "tolerance": GRADCHECK_TOL }))?,
    }
    Ok(u8::from(worst > GRADCHECK_TOL))
}

fn parse_modes(modes: &[String]) -> Result<Vec<PepMode>, Failure> {
    let mut out = Vec::new();
    for m in modes {
        let mode = PepMode::parse(m.trim())?;
        if !out.contains(&mode) {
            out.push(mode);
        }
    }
    if out.is_empty() {
        return Err(Failure::config("no PEP modes given"));
    }
    Ok(out)
}

fn check_range(n_min: usize, n_max: usize) -> Result<(), Failure> {
    if !(3..=25).contains(&n_min) || !(n_min..=25).contains(&n_max) {
        return Err(Failure::config(format!(
            "need 3 ≤ n_min ≤ n_max ≤ 25, got {n_min}..{n_max}"
        )));
    }
    Ok(())
}

fn strip_timing(cert: &mut PepCertificate, keep: bool) {
    if !keep {
        cert.diagnostics.solve_seconds = 0.0;
    }
}

fn cmd_pep_sweep(args: &SweepArgs, threads: usize, out: &Output) -> CliResult {
    check_range(args.n_min, args.n_max)?;
    let modes = parse_modes(&args.modes)?;
    let results = sweep(
        args.n_min,
        args.n_max,
        &modes,
        &args.common.options(),
        threads,
    )?;
    if let Some(dir) = &args.cert_dir {
        let dir = Output::resolve(dir);
        fs::create_dir_all(&dir).map_err(|e| Failure::config(format!("{}: {e}", dir.display())))?;
        for (row, cert) in &results {
            if let Some(cert) = cert {
                let mut cert = cert.clone();
                strip_timing(&mut cert, args.common.timings);
                let p = dir.join(format!("cert_N{}_{}.json", row.n_iter, row.mode));
                fs::write(&p, cert.to_json() + "\n")
                    .map_err(|e| Failure::config(format!("{}: {e}", p.display())))?;
            }
        }
    }
    let mut rows: Vec<_> = results.into_iter().map(|(r, _)| r).collect();
    if !args.common.timings {
        rows.iter_mut().for_each(|r| r.solve_seconds = 0.0);
    }
    match out.format {
        Format::Csv => {
            let mut buf = Vec::new();
            write_sweep_csv(&mut buf, &rows, false).expect("in-memory write");
            out.write(&buf)?;
        }
        Format::Json => out.json(&serde_json::to_value(&rows).expect("rows serialize"))?,
    }
    for r in &rows {
        if let Some(e) = &r.error {
            eprintln!("N = {} {}: {e}", r.n_iter, r.mode);
        }
    }
    if rows.iter().any(|r| r.error.is_some()) {
        Ok(3)
    } else {
        Ok(u8::from(rows.iter().any(|r| !r.verified)))
    }
}

fn cmd_pep_solve(args: &SolveArgs, out: &Output) -> CliResult {
    if args.n == 0 {
        return Err(Failure::config("--n must be at least 1"));
    }
    let mode = PepMode::parse(&args.mode)?;
    let sched = make_schedule(ScheduleName::parse(&args.schedule)?, args.lipschitz, args.n)?;
    let inst = PepInstance::new(&sched, args.n, args.lipschitz, args.radius)?;
    let mut cert = solve_pep(&inst, mode, &args.common.options())?;
    strip_timing(&mut cert, args.common.timings);
    match out.format {
        Format::Json => out.write((cert.to_json() + "\n").as_bytes())?,
        Format::Csv => {
            let mut s = String::from("label,weight\n");
            for w in &cert.weights {
                s += &format!("{},{}\n", w.label, fmt_num(Some(w.weight)));
            }
            s += &format!("radius,{}\n", fmt_num(Some(cert.d)));
            out.write(s.as_bytes())?;
        }
    }
    Ok(u8::from(!cert.diagnostics.verified))
}

fn cmd_pep_verify(args: &VerifyArgs, out: &Output) -> CliResult {
    let text = fs::read_to_string(&args.certificate)
        .map_err(|e| Failure::config(format!("{}: {e}", args.certificate.display())))?;
    let cert = PepCertificate::from_json_str(&text)?;
    let v = cert.verify()?;
    match out.format {
        Format::Csv => {
            let s = format!(
                "N,mode,d,linear_residual,min_eig,min_weight,verified\n{},{},{},{},{},{},{}\n",
                cert.n_iter,
                cert.mode,
                fmt_num(Some(cert.d)),
                fmt_num(Some(v.linear_residual)),
                fmt_num(Some(v.min_eig)),
                fmt_num(Some(v.min_weight)),
                v.verified
            );
            out.write(s.as_bytes())?;
        }
        Format::Json => out.json(
            &json!({ "n_iter": cert.n_iter, "mode": cert.mode, "d": cert.d, "verification": v }),
        )?,
    }
    Ok(u8::from(!v.verified))
}

fn cmd_pep_table1(args: &Table1Args, threads: usize, out: &Output) -> CliResult {
    check_range(args.n_min, args.n_max)?;
    let rows = table1(args.n_min, args.n_max, &args.common.options(), threads)?;
    match out.format {
        Format::Csv => {
            let mut s = String::from("N,k,scaled_weight,conjectured\n");
            for r in &rows {
                s += &format!(
                    "{},{},{},{}\n",
                    r.n_iter,
                    r.k,
                    fmt_num(Some(r.scaled_weight)),
                    fmt_num(Some(r.conjectured))
                );
            }
            out.write(s.as_bytes())?;
        }
        Format::Json => out.json(&serde_json::to_value(&rows).expect("rows serialize"))?,
    }
    Ok(0)
}

fn cmd_sdp_solve(args: &SdpSolveArgs, out: &Output) -> CliResult {
    if !(1e-9..=1e-4).contains(&args.tol) || args.max_iter == 0 {
        return Err(Failure::config(
            "need tolerance in [1e-9, 1e-4] and max_iter ≥ 1",
        ));
    }
    let inst = SdpInstance::load(&args.instance)?;
    let sol = solve_conic(
        &inst,
        &SdpSettings {
            tolerance: args.tol,
            max_iter: args.max_iter,
            ..SdpSettings::default()
        },
    )?;
    match out.format {
        Format::Json => out.json(&serde_json::to_value(&sol).expect("solution serializes"))?,
        Format::Csv => {
            let s = format!(
                "objective,primal_residual,dual_residual,gap,iterations,status\n{},{},{},{},{},{:?}\n",
                fmt_num(Some(sol.objective)),
                fmt_num(Some(sol.residuals.primal)),
                fmt_num(Some(sol.residuals.dual)),
                fmt_num(Some(sol.residuals.gap)),
                sol.iterations,
                sol.status
            );
            out.write(s.as_bytes())?;
        }
    }
    Ok(if sol.status == SdpStatus::Solved {
        0
    } else {
        3
    })
}

fn run(cli: &Cli) -> CliResult {
    let out = Output {
        path: cli.out.clone(),
        format: cli.format,
    };
    match &cli.command {
        Command::Agd(AgdCommand::Run(a)) => cmd_agd_run(a, &out),
        Command::Agd(AgdCommand::Certify(a)) => cmd_agd_certify(a, cli.seed, &out),
        Command::Gradcheck(a) => cmd_gradcheck(a, cli.seed, &out),
        Command::Pep(PepCommand::Sweep(a)) => cmd_pep_sweep(a, cli.threads, &out),
        Command::Pep(PepCommand::Solve(a)) => cmd_pep_solve(a, &out),
        Command::Pep(PepCommand::Verify(a)) => cmd_pep_verify(a, &out),
        Command::Pep(PepCommand::Table1(a)) => cmd_pep_table1(a, cli.threads, &out),
        Command::Sdp(SdpCommand::Solve(a)) => cmd_sdp_solve(a, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
