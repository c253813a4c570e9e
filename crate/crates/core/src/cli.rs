//! Command-line front end.
//!
//! Exit codes: 0 when every requested check passes, 1 when a check fails,
//! 2 on usage errors, 3 on numerical non-convergence or i/o failures.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::acceptance::{run_all_with, write_artifacts};
use crate::analysis::{
    check_bernstein, check_closure_identities, check_cm, check_lcm, check_stieltjes_geometric,
    default_cm_grid, default_degree_grid, estimate_cm_degree, half_plane_grid, Base, GridSpec,
    HalfPlaneFn, Target, IDENTITY_TOL,
};
use crate::densities::{fmt_num, write_density_csv};
use crate::error::{Error, Result};
use crate::eval::{evaluate, CutPlanePoint, FunctionId};
use crate::opmon::{check_operator_monotone, write_trial_csv, MatrixFn, DEFAULT_SPECTRUM, DEFAULT_TOL};
use crate::quadrature::QuadStatus;
use crate::representations::{default_points, verify_representation, RepresentationId, ResidualReport};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "logratio", version, about = "Evaluate and check the logarithm-ratio function h(z) and its relatives")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the real and imaginary parts of a function value.
    Eval {
        #[arg(long = "fn")]
        function: FunctionId,
        #[arg(long, allow_hyphen_values = true)]
        x: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        im: f64,
    },
    /// Tabulate the boundary densities as CSV.
    Density {
        #[arg(long, default_value = "log:0.001:1000:200")]
        grid: GridSpec,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare integral representations with direct evaluation.
    Verify {
        /// Representation tag or `all`.
        #[arg(long, default_value = "all")]
        rep: String,
        /// File with one point per line, `re,im` or `re`.
        #[arg(long)]
        points: Option<PathBuf>,
        /// Relative tolerance; defaults to each representation's own.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a property check.
    #[command(subcommand)]
    Check(CheckCommand),
    /// Bracket the completely monotonic degree of a function.
    Degree {
        #[arg(long = "fn")]
        function: Base,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        candidates: Vec<f64>,
        #[arg(long)]
        grid: Option<GridSpec>,
        #[arg(long, default_value_t = 10)]
        order: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the whole acceptance suite.
    Report {
        #[arg(value_parser = ["all"])]
        what: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct PropertyArgs {
    /// Function id, optionally weighted as `x^ALPHA*ID`.
    #[arg(long = "fn")]
    pub function: Target,
    #[arg(long, default_value_t = 10)]
    pub order: usize,
    #[arg(long)]
    pub grid: Option<GridSpec>,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum CheckCommand {
    Cm(PropertyArgs),
    Lcm(PropertyArgs),
    Bernstein(PropertyArgs),
    /// Half-plane criterion; `--fn` also accepts `DAMPED_G:<eps>`.
    Stieltjes {
        #[arg(long = "fn")]
        function: HalfPlaneFn,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Randomized Loewner-order trials; `--fn SQUARE` runs the control.
    Opmon {
        #[arg(long = "fn")]
        function: MatrixFn,
        #[arg(long, default_value_t = 4)]
        dim: usize,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        /// Report path; the trial log goes next to it with a `.csv` extension
        /// unless `--csv` is given.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// `H(1/x) H(x) = 1` and two algebraic identities.
    Identities {
        #[arg(long, default_value = "log:0.001:1000:200")]
        grid: GridSpec,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Invalid(_) | Error::Domain(_) | Error::Gating(_) => EXIT_USAGE,
        Error::NonConvergence(_) | Error::Divergent(_) | Error::Calibration(_) | Error::Io(_) => {
            EXIT_NUMERICAL
        }
    }
}

fn check_tol(tol: f64) -> Result<f64> {
    if tol > 0.0 && tol <= 1e-2 {
        Ok(tol)
    } else {
        Err(Error::Invalid(format!("tolerance {tol} outside (0, 1e-2]")))
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(path, text)?;
        }
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    emit(out, &(text + "\n"))
}

/// Parses a points file: one point per line as `re,im`, `re im` or `re`;
/// blank lines and `#` comments are skipped.
pub fn parse_points(text: &str) -> Result<Vec<CutPlanePoint>> {
    let mut points = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .collect();
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::Invalid(format!("line {}: bad number '{s}'", n + 1)))
        };
        let (re, im) = match fields.as_slice() {
            [re] => (parse(re)?, 0.0),
            [re, im] => (parse(re)?, parse(im)?),
            _ => return Err(Error::Invalid(format!("line {}: expected re[,im]", n + 1))),
        };
        points.push(CutPlanePoint::new(re, im)?);
    }
    if points.is_empty() {
        return Err(Error::Invalid("points file has no points".into()));
    }
    Ok(points)
}

fn verdict(pass: bool) -> i32 {
    if pass {
        EXIT_PASS
    } else {
        EXIT_CHECK_FAILED
    }
}

fn run_verify(rep: &str, points: Option<&Path>, tol: Option<f64>, out: Option<&Path>) -> Result<i32> {
    let reps: Vec<RepresentationId> = if rep == "all" {
        RepresentationId::ALL.to_vec()
    } else {
        vec![rep.parse()?]
    };
    let points = match points {
        Some(p) => parse_points(&fs::read_to_string(p)?)?,
        None => default_points(),
    };
    let tol = tol.map(check_tol).transpose()?;
    let reports = reps
        .iter()
        .map(|&r| verify_representation(r, &points, tol.unwrap_or_else(|| r.default_tolerance())))
        .collect::<Result<Vec<ResidualReport>>>()?;
    if reports.len() == 1 {
        emit_json(out, &reports[0])?;
    } else {
        emit_json(out, &reports)?;
    }
    let unconverged = reports
        .iter()
        .flat_map(|r| &r.points)
        .any(|p| p.status != QuadStatus::Converged);
    Ok(if unconverged {
        EXIT_NUMERICAL
    } else {
        verdict(reports.iter().all(|r| r.pass))
    })
}

fn run_check(cmd: CheckCommand) -> Result<i32> {
    match cmd {
        CheckCommand::Cm(a) => {
            let r = check_cm(&a.function, &a.grid.unwrap_or_else(default_cm_grid), a.order, check_tol(a.tol)?)?;
            emit_json(a.out.as_deref(), &r)?;
            Ok(verdict(r.pass))
        }
        CheckCommand::Lcm(a) => {
            let r = check_lcm(&a.function, &a.grid.unwrap_or_else(default_cm_grid), a.order, check_tol(a.tol)?)?;
            emit_json(a.out.as_deref(), &r)?;
            Ok(verdict(r.pass))
        }
        CheckCommand::Bernstein(a) => {
            let r = check_bernstein(&a.function, &a.grid.unwrap_or_else(default_cm_grid), a.order, check_tol(a.tol)?)?;
            emit_json(a.out.as_deref(), &r)?;
            Ok(verdict(r.pass))
        }
        CheckCommand::Stieltjes { function, tol, out } => {
            let r = check_stieltjes_geometric(&function, &half_plane_grid(), check_tol(tol)?)?;
            emit_json(out.as_deref(), &r)?;
            Ok(verdict(r.pass))
        }
        CheckCommand::Opmon { function, dim, trials, seed, tol, out, csv } => {
            let r = check_operator_monotone(function, dim, trials, seed, check_tol(tol)?, DEFAULT_SPECTRUM)?;
            emit_json(out.as_deref(), &r.report)?;
            let csv_path = csv.or_else(|| out.as_ref().map(|p| p.with_extension("csv")));
            let mut buf = Vec::new();
            write_trial_csv(&mut buf, &r.trials)?;
            match csv_path {
                Some(p) => fs::write(p, buf)?,
                None => io::stdout().write_all(&buf)?,
            }
            Ok(verdict(r.report.pass))
        }
        CheckCommand::Identities { grid, out } => {
            let r = check_closure_identities(&grid, IDENTITY_TOL)?;
            emit_json(out.as_deref(), &r)?;
            Ok(verdict(r.pass))
        }
    }
}

fn execute(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Eval { function, x, im } => {
            let v = evaluate(function, CutPlanePoint::new(x, im)?)?;
            println!("{} {}", fmt_num(v.re), fmt_num(v.im));
            Ok(EXIT_PASS)
        }
        Command::Density { grid, out } => {
            let mut buf = Vec::new();
            write_density_csv(&mut buf, &grid.points())?;
            emit(out.as_deref(), std::str::from_utf8(&buf).expect("csv is utf-8"))?;
            Ok(EXIT_PASS)
        }
        Command::Verify { rep, points, tol, out } => run_verify(&rep, points.as_deref(), tol, out.as_deref()),
        Command::Check(cmd) => run_check(cmd),
        Command::Degree { function, candidates, grid, order, tol, out } => {
            let grid = grid.unwrap_or_else(default_degree_grid);
            let d = estimate_cm_degree(function, &candidates, &grid, order, check_tol(tol)?)?;
            emit_json(out.as_deref(), &d)?;
            Ok(verdict(d.consistent))
        }
        Command::Report { out, .. } => {
            let summary = run_all_with(|c| println!("{}", c.line()));
            println!("{}/{} criteria passed", summary.passed, summary.total);
            write_artifacts(&summary, &out)?;
            Ok(verdict(summary.passed == summary.total))
        }
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
