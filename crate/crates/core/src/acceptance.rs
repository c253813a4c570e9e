//! The end-to-end acceptance suite behind `report all`.
//!
//! Each criterion returns a verdict, a one-line detail and the reports it
//! produced, which [`write_artifacts`] stores as files.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::time::Instant;

use num_complex::Complex64;
use serde::Serialize;

use crate::analysis::{
    check_bernstein, check_closure_identities, check_cm, check_lcm, check_stieltjes_geometric,
    default_cm_grid, degree_ratio, half_plane_grid, Base, GridSpec, HalfPlaneFn, PropertyReport,
    Target, IDENTITY_TOL,
};
use crate::densities::{
    calibration_grid, default_sigma_selection, g2, nudge_off_breakpoints, rho, varrho_paper,
    SigmaCandidate,
};
use crate::error::{Error, Result};
use crate::eval::{
    boundary_limit, eval_g, eval_h, evaluate, BoundaryQuantity, CutPlanePoint, FunctionId,
    GATE_MAX_ARG,
};
use crate::opmon::{check_operator_monotone, write_trial_csv, MatrixFn, DEFAULT_SPECTRUM, DEFAULT_TOL};
use crate::quadrature::QuadStatus;
use crate::representations::{
    arc_diagnostic, default_points, verify_representation, verify_with_sigma, ArcCheck,
    RepresentationId,
};

pub const REPORT_BUDGET_SECONDS: f64 = 600.0;
pub const OPMON_SEED: u64 = 20240601;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Artifact {
    pub name: String,
    #[serde(skip)]
    pub contents: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionOutcome {
    pub id: u32,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    #[serde(skip)]
    pub seconds: f64,
    pub artifacts: Vec<Artifact>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcceptanceSummary {
    pub criteria: Vec<CriterionOutcome>,
    pub passed: usize,
    pub total: usize,
    #[serde(skip)]
    pub seconds: f64,
}

impl CriterionOutcome {
    pub fn line(&self) -> String {
        format!(
            "[{}] criterion {:>2} {}: {} ({:.1}s)",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.seconds
        )
    }
}

struct Verdict {
    pass: bool,
    detail: String,
    artifacts: Vec<Artifact>,
}

fn json<T: Serialize>(name: &str, value: &T) -> Artifact {
    Artifact {
        name: name.to_string(),
        contents: serde_json::to_string_pretty(value).expect("reports serialize"),
    }
}

fn special_values() -> Result<Verdict> {
    let one = CutPlanePoint::real(1.0)?;
    let checks = [
        ("H(1)", evaluate(FunctionId::H, one)?.re, 1.0f64),
        ("h(1)", eval_h(one)?.re, 2.0),
        ("rho(1)", rho(1.0)?, 0.0),
        ("varrho(1)", varrho_paper(1.0)?, 1.0),
        ("g2(1)", g2(1.0)?, 1.0),
    ];
    let mut bad = Vec::new();
    for (name, got, want) in checks {
        let ulp = if want == 0.0 { f64::MIN_POSITIVE } else { want.abs() * f64::EPSILON };
        if !((got - want).abs() <= ulp) {
            bad.push(format!("{name}={got}"));
        }
    }
    Ok(Verdict {
        pass: bad.is_empty(),
        detail: if bad.is_empty() {
            "H(1)=1, h(1)=2, rho(1)=0, varrho(1)=1, g2(1)=1".into()
        } else {
            format!("mismatch: {}", bad.join(", "))
        },
        artifacts: Vec::new(),
    })
}

#[derive(Serialize)]
struct OracleRow {
    t: f64,
    rho: f64,
    rho_oracle: f64,
    g2: f64,
    g2_oracle: f64,
}

fn density_oracle() -> Result<Verdict> {
    let grid: Vec<f64> = calibration_grid(1e-3, 1e3, 40).into_iter().map(nudge_off_breakpoints).collect();
    let mut rows = Vec::new();
    let (mut worst_rho, mut worst_g2) = (0.0f64, 0.0f64);
    for &t in &grid {
        let im = boundary_limit(t, BoundaryQuantity::ImG, 1e-10)?;
        let re = boundary_limit(t, BoundaryQuantity::ReG, 1e-10)?;
        let rho_oracle = -im.value / PI;
        let g2_oracle = re.value * re.value + im.value * im.value;
        let (r, g) = (rho(t)?, g2(t)?);
        worst_rho = worst_rho.max((r - rho_oracle).abs());
        worst_g2 = worst_g2.max((g - g2_oracle).abs() / g2_oracle.abs());
        rows.push(OracleRow { t, rho: r, rho_oracle, g2: g, g2_oracle });
    }
    Ok(Verdict {
        pass: worst_rho <= 1e-7 && worst_g2 <= 1e-6,
        detail: format!("max |rho - oracle| = {worst_rho:.2e} (<= 1e-7), max g2 rel dev = {worst_g2:.2e} (<= 1e-6)"),
        artifacts: vec![json("density_oracle.json", &rows)],
    })
}

fn representations() -> Result<Verdict> {
    let points = default_points();
    let mut reports = Vec::new();
    let mut parts = Vec::new();
    let mut pass = true;
    let mut arcs = Vec::new();
    let mut worst_corrected = 0.0f64;
    for rep in RepresentationId::ALL {
        let usable: Vec<CutPlanePoint> = points
            .iter()
            .copied()
            .filter(|p| !rep.needs_right_half_plane() || p.re > 0.0)
            .collect();
        let r = verify_representation(rep, &usable, rep.default_tolerance())?;
        pass &= r.pass;
        parts.push(format!("{} {:.1e}", rep.name(), r.max_rel_res));
        reports.push(r);
        let arc = arc_diagnostic(rep, &usable, rep.default_tolerance())?;
        worst_corrected = arc.iter().map(|a| a.corrected_rel_res).fold(worst_corrected, f64::max);
        arcs.push(ArcReport { rep, points: arc });
    }
    Ok(Verdict {
        pass,
        detail: format!(
            "max rel residuals: {}; with the arc-jump term added: {worst_corrected:.1e}",
            parts.join(", ")
        ),
        artifacts: vec![
            json("representations.json", &reports),
            json("representations_arc_jump.json", &arcs),
        ],
    })
}

#[derive(Serialize)]
struct ArcReport {
    rep: RepresentationId,
    points: Vec<ArcCheck>,
}

fn sigma_selection() -> Result<Verdict> {
    let selection = default_sigma_selection().as_ref().map_err(Clone::clone)?;
    let matching = selection.deviations.iter().filter(|d| d.matches).count();
    let Some(chosen) = selection.selected else {
        return Ok(Verdict {
            pass: false,
            detail: format!("{matching} candidates match the oracle"),
            artifacts: vec![json("sigma_discrepancy.json", selection)],
        });
    };
    let other = match chosen {
        SigmaCandidate::A => SigmaCandidate::B,
        SigmaCandidate::B => SigmaCandidate::A,
    };
    let rejected = verify_with_sigma(
        RepresentationId::StieltjesInvZ2H,
        &default_points(),
        RepresentationId::StieltjesInvZ2H.default_tolerance(),
        other,
    )?;
    let divergent = rejected
        .points
        .iter()
        .filter(|p| p.status == QuadStatus::Divergent)
        .count();
    #[derive(Serialize)]
    struct Discrepancy<'a> {
        selection: &'a crate::densities::SigmaSelection,
        rejected_candidate: SigmaCandidate,
        rejected_divergent_points: usize,
        rejected_report: &'a crate::representations::ResidualReport,
    }
    let report = Discrepancy {
        selection,
        rejected_candidate: other,
        rejected_divergent_points: divergent,
        rejected_report: &rejected,
    };
    Ok(Verdict {
        pass: matching == 1 && divergent > 0,
        detail: format!(
            "selected {chosen:?}; {other:?} gives DIVERGENT at {divergent}/{} points",
            rejected.points.len()
        ),
        artifacts: vec![json("sigma_discrepancy.json", &report)],
    })
}

fn summarize(r: &PropertyReport) -> String {
    format!(
        "{} {} {}",
        serde_json::to_value(r.property).expect("enum serializes").as_str().unwrap_or("?"),
        r.function,
        if r.pass { "pass" } else { "FAIL" }
    )
}

fn complete_monotonicity() -> Result<Verdict> {
    let grid = default_cm_grid();
    let tol = 1e-9;
    let f = Target::function;
    let reports = vec![
        check_cm(&f(FunctionId::H), &grid, 10, tol)?,
        check_cm(&f(FunctionId::LowerH), &grid, 10, tol)?,
        check_lcm(&f(FunctionId::H), &grid, 10, tol)?,
        check_lcm(&f(FunctionId::XH), &grid, 10, tol)?,
        check_lcm(&f(FunctionId::InvX2H), &grid, 10, tol)?,
        check_bernstein(&f(FunctionId::InvH), &grid, 10, tol)?,
    ];
    Ok(Verdict {
        pass: reports.iter().all(|r| r.pass),
        detail: reports.iter().map(summarize).collect::<Vec<_>>().join(", "),
        artifacts: vec![json("complete_monotonicity.json", &reports)],
    })
}

#[derive(Serialize)]
struct DegreeEvidence {
    ratio_h_at_1e_6: f64,
    xh_cm_order_8: PropertyReport,
    x15h_cm_order_2: PropertyReport,
    levy_inv_zh_ratio_at_1e_3: f64,
    levy_z2h_ratio_at_1e_3: f64,
}

fn degrees() -> Result<Verdict> {
    let h = Target::function(FunctionId::H);
    let grid = default_cm_grid();
    let ratio = degree_ratio(&h, 1e-6)?;
    let xh = check_cm(&h.with_power(1.0), &grid, 8, 1e-9)?;
    let x15h = check_cm(&h.with_power(1.5), &grid, 2, 1e-9)?;
    let inv = degree_ratio(&Target::new(Base::LevyInvZH), 1e-3)?;
    let z2h = degree_ratio(&Target::new(Base::LevyZ2H), 1e-3)?;
    let parts = [
        (ratio - 1.0).abs() <= 1e-3,
        xh.pass,
        !x15h.pass && x15h.witness.is_some(),
        inv.abs() <= 0.05,
        z2h.abs() <= 0.05,
    ];
    let detail = format!(
        "ratio(H,1e-6)={ratio:.6} [{}], x*H CM8 {}, x^1.5*H fails {}, Levy ratios at 1e-3: invzH {inv:.4} [{}], z2H {z2h:.4} [{}]",
        ok(parts[0]),
        ok(parts[1]),
        ok(parts[2]),
        ok(parts[3]),
        ok(parts[4])
    );
    let evidence = DegreeEvidence {
        ratio_h_at_1e_6: ratio,
        xh_cm_order_8: xh,
        x15h_cm_order_2: x15h,
        levy_inv_zh_ratio_at_1e_3: inv,
        levy_z2h_ratio_at_1e_3: z2h,
    };
    Ok(Verdict {
        pass: parts.iter().all(|&p| p),
        detail,
        artifacts: vec![json("degrees.json", &evidence)],
    })
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "FAIL"
    }
}

fn geometric() -> Result<Verdict> {
    let points = half_plane_grid();
    let fns = [
        HalfPlaneFn::Function(FunctionId::G),
        HalfPlaneFn::Function(FunctionId::InvZ2H),
        HalfPlaneFn::DampedG(0.1),
        HalfPlaneFn::DampedG(1.0),
        HalfPlaneFn::DampedG(10.0),
    ];
    let reports = fns
        .iter()
        .map(|f| check_stieltjes_geometric(f, &points, 1e-12))
        .collect::<Result<Vec<_>>>()?;
    let worst = reports.iter().map(|r| r.worst_violation).fold(0.0, f64::max);
    Ok(Verdict {
        pass: reports.iter().all(|r| r.pass),
        detail: format!("{} points, 5 functions, worst normalized Im z Im f = {worst:.2e}", points.len()),
        artifacts: vec![json("stieltjes_geometric.json", &reports)],
    })
}

/// `k`-th of `count` angles spread evenly over `[-max, max]`.
fn theta(k: usize, count: usize, max: f64) -> f64 {
    -max + 2.0 * max * k as f64 / (count - 1) as f64
}

fn decay_limits() -> Result<Verdict> {
    let mut worst_g = 0.0f64;
    let mut worst_z2h = 0.0f64;
    for k in 0..37 {
        let z = Complex64::from_polar(1e8, theta(k, 37, GATE_MAX_ARG));
        worst_g = worst_g.max(eval_g(CutPlanePoint::from_complex(z)?)?.norm());
        let w = Complex64::from_polar(1e-6, theta(k, 37, PI / 2.0));
        let p = CutPlanePoint::from_complex(w)?;
        worst_z2h = worst_z2h.max((w * eval_g(p)?).norm());
    }
    Ok(Verdict {
        pass: worst_g <= 0.06 && worst_z2h <= 1e-4,
        detail: format!("max |G| at r=1e8: {worst_g:.4} (<= 0.06), max |z^2 H| at r=1e-6: {worst_z2h:.2e} (<= 1e-4)"),
        artifacts: Vec::new(),
    })
}

fn tail_law() -> Result<Verdict> {
    let t: f64 = 1e8;
    let v = rho(t)? * t.ln().powi(2);
    Ok(Verdict {
        pass: (0.9..=1.05).contains(&v),
        detail: format!("rho(1e8) ln^2(1e8) = {v:.6} (in [0.9, 1.05])"),
        artifacts: Vec::new(),
    })
}

fn operator_monotone() -> Result<Verdict> {
    let mut artifacts = Vec::new();
    let mut parts = Vec::new();
    let mut pass = true;
    for f in [MatrixFn::Function(FunctionId::InvXH), MatrixFn::Function(FunctionId::X2H)] {
        let mut failed_dims = Vec::new();
        for n in 2..=6 {
            let r = check_operator_monotone(f, n, 200, OPMON_SEED, DEFAULT_TOL, DEFAULT_SPECTRUM)?;
            if !r.report.pass {
                failed_dims.push(format!("n={n} ({:.1e})", r.report.worst_violation));
            }
            let mut csv = Vec::new();
            write_trial_csv(&mut csv, &r.trials)?;
            artifacts.push(Artifact {
                name: format!("opmon_{}_n{n}.csv", f.name()),
                contents: String::from_utf8(csv).expect("csv is utf-8"),
            });
            artifacts.push(json(&format!("opmon_{}_n{n}.json", f.name()), &r.report));
        }
        pass &= failed_dims.is_empty();
        parts.push(if failed_dims.is_empty() {
            format!("{} pass n=2..6", f.name())
        } else {
            format!("{} fails at {}", f.name(), failed_dims.join(" "))
        });
    }
    let mut control = check_operator_monotone(MatrixFn::Square, 2, 200, OPMON_SEED, DEFAULT_TOL, DEFAULT_SPECTRUM)?;
    if control.report.pass {
        control = check_operator_monotone(MatrixFn::Square, 2, 2000, OPMON_SEED, DEFAULT_TOL, DEFAULT_SPECTRUM)?;
    }
    let rejected = control.trials.iter().filter(|t| !t.pass).count();
    pass &= !control.report.pass;
    parts.push(format!("x^2 control rejected in {rejected}/{} trials", control.trials.len()));
    artifacts.push(json("opmon_control.json", &control.report));
    Ok(Verdict {
        pass,
        detail: parts.join("; "),
        artifacts,
    })
}

fn closure(elapsed_before: f64) -> Result<Verdict> {
    let r = check_closure_identities(&GridSpec::log(1e-3, 1e3, 200), IDENTITY_TOL)?;
    let within_budget = elapsed_before <= REPORT_BUDGET_SECONDS;
    Ok(Verdict {
        pass: r.pass && within_budget,
        detail: format!(
            "identities worst defect {:.2e} (<= 1e-10); suite {} the {REPORT_BUDGET_SECONDS}s budget",
            r.worst_violation,
            if within_budget { "within" } else { "over" }
        ),
        artifacts: vec![json("closure_identities.json", &r)],
    })
}

fn outcome(id: u32, name: &'static str, started: Instant, verdict: Result<Verdict>) -> CriterionOutcome {
    let seconds = started.elapsed().as_secs_f64();
    match verdict {
        Ok(v) => CriterionOutcome {
            id,
            name,
            pass: v.pass,
            detail: v.detail,
            seconds,
            artifacts: v.artifacts,
        },
        Err(e) => CriterionOutcome {
            id,
            name,
            pass: false,
            detail: format!("error: {e}"),
            seconds,
            artifacts: Vec::new(),
        },
    }
}

/// Runs every criterion in order, calling `progress` as each finishes.
pub fn run_all_with(mut progress: impl FnMut(&CriterionOutcome)) -> AcceptanceSummary {
    let start = Instant::now();
    let steps: [(u32, &'static str, fn() -> Result<Verdict>); 10] = [
        (1, "special values", special_values),
        (2, "density oracle agreement", density_oracle),
        (3, "representation residuals", representations),
        (4, "sigma selection", sigma_selection),
        (5, "complete monotonicity", complete_monotonicity),
        (6, "degree of H and Levy densities", degrees),
        (7, "Stieltjes geometric criterion", geometric),
        (8, "decay limits", decay_limits),
        (9, "tail law", tail_law),
        (10, "operator monotonicity", operator_monotone),
    ];
    let mut criteria = Vec::new();
    for (id, name, run) in steps {
        let t = Instant::now();
        let o = outcome(id, name, t, run());
        progress(&o);
        criteria.push(o);
    }
    let t = Instant::now();
    let o = outcome(11, "closure identities and run time", t, closure(start.elapsed().as_secs_f64()));
    progress(&o);
    criteria.push(o);
    let passed = criteria.iter().filter(|c| c.pass).count();
    AcceptanceSummary {
        total: criteria.len(),
        passed,
        criteria,
        seconds: start.elapsed().as_secs_f64(),
    }
}

pub fn run_all() -> AcceptanceSummary {
    run_all_with(|_| {})
}

/// Writes `summary.json` and every criterion's reports into `dir`.
pub fn write_artifacts(summary: &AcceptanceSummary, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    for c in &summary.criteria {
        for a in &c.artifacts {
            fs::write(dir.join(&a.name), &a.contents)?;
        }
    }
    let text = serde_json::to_string_pretty(summary).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(dir.join("summary.json"), text + "\n")?;
    Ok(())
}
