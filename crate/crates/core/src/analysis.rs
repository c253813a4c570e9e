//! Property checks on the positive half-line and in the upper half-plane:
//! complete monotonicity, its logarithmic variant, the Bernstein property,
//! completely monotonic degrees, the Stieltjes half-plane criterion and a
//! few algebraic identities.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::densities::{selected_sigma, DensityFn, LaplaceDensity};
use crate::error::{Error, Result};
use crate::eval::{eval_g, evaluate, evaluate_real, gate, CutPlanePoint, FunctionId};
use crate::jet::{factorial, TaylorJet};
use crate::quadrature::Tol;

pub const MAX_JET_ORDER: usize = 12;
/// `|c_k| x^k` beyond this multiple of `|c_0|` marks the order as unusable.
pub const AMPLIFICATION_LIMIT: f64 = 1e12;
// Inside this distance from 1 the two vanishing logarithms are deflated.
const DEFLATE_RADIUS: f64 = 0.25;
const DEFLATE_EXTRA_ORDER: usize = 48;
const LEVY_MOMENT_TOL: f64 = 1e-10;

/// A function of one positive variable that the checks accept.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Base {
    Function(FunctionId),
    /// Levy density of `1/(xH(x))`, built from the selected `sigma`.
    LevyInvZH,
    /// Levy density of `x^2 H(x)`, built from `rho`.
    LevyZ2H,
}

impl Base {
    pub fn name(&self) -> String {
        match self {
            Base::Function(id) => id.name().to_string(),
            Base::LevyInvZH => "LEVY_INV_ZH".into(),
            Base::LevyZ2H => "LEVY_Z2H".into(),
        }
    }

    /// `f(inf)`, where it is finite.
    pub fn at_infinity(&self) -> Option<f64> {
        match self {
            Base::Function(FunctionId::LowerH) => Some(1.0),
            Base::Function(FunctionId::H | FunctionId::G | FunctionId::XH)
            | Base::Function(FunctionId::InvZ2H | FunctionId::InvX2H)
            | Base::LevyInvZH
            | Base::LevyZ2H => Some(0.0),
            Base::Function(_) => None,
        }
    }
}

/// `x^alpha (f(x) - shift)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Target {
    pub base: Base,
    pub alpha: f64,
    pub shift: f64,
}

impl Target {
    pub fn new(base: Base) -> Self {
        Self { base, alpha: 0.0, shift: 0.0 }
    }

    pub fn function(id: FunctionId) -> Self {
        Self::new(Base::Function(id))
    }

    pub fn with_power(self, alpha: f64) -> Self {
        Self { alpha, ..self }
    }

    /// `x^alpha (f - f(inf))`, the function whose complete monotonicity
    /// defines the degree.
    pub fn for_degree(base: Base, alpha: f64) -> Result<Self> {
        let shift = base
            .at_infinity()
            .ok_or_else(|| Error::Invalid(format!("{} has no finite limit at infinity", base.name())))?;
        Ok(Self { base, alpha, shift })
    }

    pub fn name(&self) -> String {
        let inner = if self.shift == 0.0 {
            self.base.name()
        } else {
            format!("({}-{})", self.base.name(), self.shift)
        };
        if self.alpha == 0.0 {
            inner
        } else {
            format!("x^{}*{}", self.alpha, inner)
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Base {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "LEVY_INV_ZH" => Ok(Base::LevyInvZH),
            "LEVY_Z2H" => Ok(Base::LevyZ2H),
            _ => s.parse().map(Base::Function),
        }
    }
}

/// Accepts `ID` or `x^ALPHA*ID`.
impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(rest) = s.strip_prefix("x^") {
            let (alpha, id) = rest
                .split_once('*')
                .ok_or_else(|| Error::Invalid(format!("expected x^ALPHA*ID, got '{s}'")))?;
            let alpha: f64 = alpha
                .parse()
                .map_err(|_| Error::Invalid(format!("bad exponent in '{s}'")))?;
            Ok(Target::new(id.parse()?).with_power(alpha))
        } else {
            Ok(Target::new(s.parse()?))
        }
    }
}

/// Grid of positive reals, written `log:lo:hi:count` or `lin:lo:hi:count`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridSpec {
    Log { lo: f64, hi: f64, count: usize },
    Lin { lo: f64, hi: f64, count: usize },
}

impl GridSpec {
    pub fn log(lo: f64, hi: f64, count: usize) -> Self {
        GridSpec::Log { lo, hi, count }
    }

    pub fn points(&self) -> Vec<f64> {
        match *self {
            GridSpec::Log { lo, hi, count } => {
                let ratio = hi / lo;
                (0..count)
                    .map(|i| match i {
                        0 => lo,
                        i if i == count - 1 => hi,
                        i => lo * ratio.powf(i as f64 / (count - 1) as f64),
                    })
                    .collect()
            }
            GridSpec::Lin { lo, hi, count } => (0..count)
                .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
                .collect(),
        }
    }

    fn validate(self) -> Result<Self> {
        let (lo, hi, count) = match self {
            GridSpec::Log { lo, hi, count } | GridSpec::Lin { lo, hi, count } => (lo, hi, count),
        };
        if !(lo > 0.0 && hi > lo && hi.is_finite()) || count < 2 {
            return Err(Error::Invalid(format!("bad grid {self}")));
        }
        Ok(self)
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridSpec::Log { lo, hi, count } => write!(f, "log:{lo}:{hi}:{count}"),
            GridSpec::Lin { lo, hi, count } => write!(f, "lin:{lo}:{hi}:{count}"),
        }
    }
}

impl FromStr for GridSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::Invalid(format!("grid must look like log:LO:HI:COUNT, got '{s}'"));
        if parts.len() != 4 {
            return Err(bad());
        }
        let lo: f64 = parts[1].parse().map_err(|_| bad())?;
        let hi: f64 = parts[2].parse().map_err(|_| bad())?;
        let count: usize = parts[3].parse().map_err(|_| bad())?;
        match parts[0] {
            "log" => GridSpec::Log { lo, hi, count }.validate(),
            "lin" => GridSpec::Lin { lo, hi, count }.validate(),
            _ => Err(bad()),
        }
    }
}

pub fn default_cm_grid() -> GridSpec {
    GridSpec::log(1e-2, 1e2, 50)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Property {
    #[serde(rename = "CM")]
    Cm,
    #[serde(rename = "LCM")]
    Lcm,
    #[serde(rename = "BERNSTEIN")]
    Bernstein,
    #[serde(rename = "STIELTJES_GEOMETRIC")]
    StieltjesGeometric,
    #[serde(rename = "IDENTITY")]
    Identity,
    #[serde(rename = "OPERATOR_MONOTONE")]
    OperatorMonotone,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Witness {
    pub x: f64,
    pub k: usize,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub im: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyReport {
    pub property: Property,
    #[serde(rename = "fn")]
    pub function: String,
    pub grid: String,
    pub max_order: usize,
    pub pass: bool,
    pub worst_violation: f64,
    pub witness: Option<Witness>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

fn variable_jets(x: f64, order: usize) -> TaylorJet {
    TaylorJet::variable(x, order)
}

// Jet of H = ln(1 + (x-1)/(1+x^2)) / ln(1 + x(x-1)/(1+x)). Both logs vanish
// at x = 1, so near it the common root is divided out before the quotient.
fn big_h_jet(x: f64, order: usize) -> Result<TaylorJet> {
    let near_one = (x - 1.0).abs() < DEFLATE_RADIUS;
    let work = if near_one { order + DEFLATE_EXTRA_ORDER } else { order };
    let z = variable_jets(x, work);
    let one_plus_z2 = (&z * &z).add_scalar(1.0);
    let zm1 = z.add_scalar(-1.0);
    let num = zm1.checked_div(&one_plus_z2)?.ln_1p()?;
    let den = (&z * &zm1).checked_div(&z.add_scalar(1.0))?.ln_1p()?;
    if near_one {
        let delta = x - 1.0;
        let n = num.deflate_root(delta).truncate(order);
        let d = den.deflate_root(delta).truncate(order);
        n.checked_div(&d)
    } else {
        num.checked_div(&den)
    }
}

fn function_jet(id: FunctionId, x: f64, order: usize) -> Result<TaylorJet> {
    let h = big_h_jet(x, order)?;
    let z = variable_jets(x, order);
    Ok(match id {
        FunctionId::H => h,
        FunctionId::LowerH => h.add_scalar(1.0),
        FunctionId::G | FunctionId::XH => &z * &h,
        FunctionId::InvZ2H | FunctionId::InvX2H => (&(&z * &z) * &h).recip()?,
        FunctionId::InvH => h.recip()?,
        FunctionId::InvXH => (&z * &h).recip()?,
        FunctionId::X2H => &(&z * &z) * &h,
    })
}

fn levy_parts(base: Base) -> Result<DensityFn> {
    Ok(match base {
        Base::LevyInvZH => DensityFn::Sigma(selected_sigma()?),
        Base::LevyZ2H => DensityFn::Rho,
        Base::Function(_) => unreachable!("closed forms do not go through moments"),
    })
}

// m^(k)(t) = (-1)^k int u^{k+1} d(u) e^{-ut} du.
fn levy_jet(base: Base, t: f64, order: usize) -> Result<TaylorJet> {
    let density = levy_parts(base)?;
    let tol = Tol::rel(LEVY_MOMENT_TOL);
    let coeffs = (0..=order)
        .map(|k| {
            let moment = LaplaceDensity::new(density, (k + 1) as f64, tol).value(t)?;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            Ok(sign * moment / factorial(k))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(TaylorJet::from_coeffs(t, coeffs))
}

fn base_jet(base: Base, x: f64, order: usize) -> Result<TaylorJet> {
    match base {
        Base::Function(id) => function_jet(id, x, order),
        _ => levy_jet(base, x, order),
    }
}

/// Taylor jet of the target at `x`; `c_k = f^(k)(x) / k!`.
pub fn taylor_jet(target: &Target, x: f64, order: usize) -> Result<TaylorJet> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::Domain(format!("jets need x > 0, got {x}")));
    }
    if order > MAX_JET_ORDER {
        return Err(Error::Invalid(format!(
            "jet order {order} exceeds the cap {MAX_JET_ORDER}"
        )));
    }
    let mut jet = base_jet(target.base, x, order)?;
    if target.shift != 0.0 {
        jet = jet.add_scalar(-target.shift);
    }
    if target.alpha != 0.0 {
        jet = &variable_jets(x, order).powf(target.alpha)? * &jet;
    }
    Ok(jet)
}

/// Highest order `k` with `|c_j| x^j <= 1e12 |c_0|` for every `j <= k`.
pub fn usable_order(jet: &TaylorJet) -> usize {
    let c0 = jet.coeffs[0].abs();
    let mut xk = 1.0;
    for (k, c) in jet.coeffs.iter().enumerate() {
        if !(c.abs() * xk <= AMPLIFICATION_LIMIT * c0) {
            return k.saturating_sub(1);
        }
        xk *= jet.center;
    }
    jet.order()
}

/// True when the jet's top coefficient is amplified past the limit.
pub fn loses_significance(jet: &TaylorJet) -> bool {
    usable_order(jet) < jet.order()
}

struct SignScan {
    worst: f64,
    witness: Option<Witness>,
    downgraded: Option<(f64, usize)>,
    failed: bool,
}

// (-1)^k f^(k) >= -tol (|f^(k)| + k! |c_0|) for k in `first..=usable`.
fn scan_signs(jet: &TaylorJet, first: usize, max_order: usize, tol: f64, report_x: f64) -> SignScan {
    let usable = usable_order(jet).min(max_order);
    let c0 = jet.coeffs[0].abs();
    let mut scan = SignScan {
        worst: 0.0,
        witness: None,
        downgraded: (usable < max_order).then_some((report_x, usable)),
        failed: false,
    };
    for k in first..=usable {
        let d = jet.derivative_at(k);
        let signed = if k % 2 == 0 { d } else { -d };
        let scale = d.abs() + factorial(k) * c0;
        let violation = if signed >= 0.0 || scale == 0.0 {
            0.0
        } else {
            -signed / scale
        };
        if !violation.is_finite() || !d.is_finite() {
            scan.failed = true;
            scan.worst = f64::INFINITY;
            scan.witness = Some(Witness { x: report_x, k, value: d, im: None });
            break;
        }
        if violation > scan.worst {
            scan.worst = violation;
            scan.witness = Some(Witness { x: report_x, k, value: signed, im: None });
        }
        if violation > tol {
            scan.failed = true;
        }
    }
    scan
}

fn assemble(
    property: Property,
    function: String,
    grid: String,
    max_order: usize,
    scans: Vec<Result<SignScan>>,
    tol: f64,
) -> PropertyReport {
    let mut report = PropertyReport {
        property,
        function,
        grid,
        max_order,
        pass: true,
        worst_violation: 0.0,
        witness: None,
        notes: Vec::new(),
    };
    for scan in scans {
        match scan {
            Ok(s) => {
                if let Some((x, k)) = s.downgraded {
                    report.notes.push(format!("order reduced to {k} at x={x}"));
                }
                if s.worst > report.worst_violation {
                    report.worst_violation = s.worst;
                    report.witness = s.witness;
                }
                report.pass &= !s.failed;
            }
            Err(e) => {
                report.pass = false;
                report.notes.push(e.to_string());
            }
        }
    }
    report.pass &= report.worst_violation <= tol;
    report
}

fn check_order(max_order: usize) -> Result<()> {
    if max_order > MAX_JET_ORDER {
        return Err(Error::Invalid(format!(
            "order {max_order} exceeds the cap {MAX_JET_ORDER}"
        )));
    }
    Ok(())
}

/// `(-1)^k f^(k)(x) >= 0` for `k <= max_order` on the grid.
pub fn check_cm(target: &Target, grid: &GridSpec, max_order: usize, tol: f64) -> Result<PropertyReport> {
    check_order(max_order)?;
    let scans = grid
        .points()
        .par_iter()
        .map(|&x| Ok(scan_signs(&taylor_jet(target, x, max_order)?, 0, max_order, tol, x)))
        .collect();
    Ok(assemble(Property::Cm, target.name(), grid.to_string(), max_order, scans, tol))
}

/// `(-1)^k [ln f]^(k)(x) >= 0` for `1 <= k <= max_order`.
pub fn check_lcm(target: &Target, grid: &GridSpec, max_order: usize, tol: f64) -> Result<PropertyReport> {
    check_order(max_order)?;
    let scans = grid
        .points()
        .par_iter()
        .map(|&x| {
            let jet = taylor_jet(target, x, max_order)?;
            if !(jet.value() > 0.0) {
                return Ok(SignScan {
                    worst: f64::INFINITY,
                    witness: Some(Witness { x, k: 0, value: jet.value(), im: None }),
                    downgraded: None,
                    failed: true,
                });
            }
            let usable = usable_order(&jet);
            let log = jet.truncate(usable).ln()?;
            let mut scan = scan_signs(&log, 1, usable.min(max_order), tol, x);
            if usable < max_order {
                scan.downgraded = Some((x, usable));
            }
            Ok(scan)
        })
        .collect();
    Ok(assemble(Property::Lcm, target.name(), grid.to_string(), max_order, scans, tol))
}

/// `f >= 0` and `f'` completely monotonic to order `max_order`.
pub fn check_bernstein(
    target: &Target,
    grid: &GridSpec,
    max_order: usize,
    tol: f64,
) -> Result<PropertyReport> {
    check_order(max_order)?;
    let scans = grid
        .points()
        .par_iter()
        .map(|&x| {
            let jet = taylor_jet(target, x, max_order + 1)?;
            if jet.value() < 0.0 {
                return Ok(SignScan {
                    worst: f64::INFINITY,
                    witness: Some(Witness { x, k: 0, value: jet.value(), im: None }),
                    downgraded: None,
                    failed: true,
                });
            }
            let usable = usable_order(&jet).saturating_sub(1);
            let mut scan = scan_signs(&jet.derivative(), 0, usable.min(max_order), tol, x);
            if usable < max_order {
                scan.downgraded = Some((x, usable));
            }
            Ok(scan)
        })
        .collect();
    Ok(assemble(
        Property::Bernstein,
        target.name(),
        grid.to_string(),
        max_order,
        scans,
        tol,
    ))
}

/// `-x f'(x) / f(x)`.
pub fn degree_ratio(target: &Target, x: f64) -> Result<f64> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::Domain(format!("degree ratio needs x > 0, got {x}")));
    }
    match target.base {
        Base::LevyInvZH | Base::LevyZ2H if target.shift == 0.0 => {
            // t m2(t) / m1(t) = (t^3 m2) / (t^2 m1), both kept scaled.
            let density = levy_parts(target.base)?;
            let tol = Tol::rel(LEVY_MOMENT_TOL);
            let u = x.ln();
            let m1 = LaplaceDensity::new(density, 1.0, tol).scaled_value(u)?;
            let m2 = LaplaceDensity::new(density, 2.0, tol).scaled_value(u)?;
            Ok(m2 / m1 - target.alpha)
        }
        _ => {
            let jet = taylor_jet(target, x, 1)?;
            Ok(-x * jet.coeffs[1] / jet.coeffs[0])
        }
    }
}

/// The explicit expression for `-x H'(x) / H(x)`, independent of jets.
pub fn degree_ratio_h_closed_form(x: f64) -> Result<f64> {
    if !(x > 0.0 && x.is_finite()) || x == 1.0 {
        return Err(Error::Domain(format!(
            "closed-form ratio needs x > 0, x != 1, got {x}"
        )));
    }
    // ln(x(x+1)/(x^2+1)) and ln((x^2+1)/(x+1)), both through ln_1p.
    let a = ((x - 1.0) / (x * x + 1.0)).ln_1p();
    let b = (x * (x - 1.0) / (x + 1.0)).ln_1p();
    let num = x * (x * x + 2.0 * x - 1.0) * a + (x * x - 2.0 * x - 1.0) * b;
    let den = (x + 1.0) * (x * x + 1.0) * a * b;
    Ok(num / den)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateResult {
    pub alpha: f64,
    pub pass: bool,
    pub worst_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeEstimate {
    #[serde(rename = "fn")]
    pub function: String,
    pub grid: String,
    pub max_order: usize,
    pub upper_bound: f64,
    pub upper_bound_at: f64,
    pub largest_passing_candidate: Option<f64>,
    pub largest_passing: Option<f64>,
    pub smallest_failing: Option<f64>,
    pub bracket: [f64; 2],
    pub consistent: bool,
    pub candidates: Vec<CandidateResult>,
    pub refinements: Vec<CandidateResult>,
}

pub const DEGREE_BISECTION_WIDTH: f64 = 0.01;

/// Default grid for degree estimates; the ratio approaches its infimum
/// only logarithmically, so the grid reaches far toward 0.
pub fn default_degree_grid() -> GridSpec {
    GridSpec::log(1e-8, 1e2, 81)
}

/// Brackets the completely monotonic degree of `base` between the largest
/// candidate `alpha` with `x^alpha (f - f(inf))` passing and the infimum of
/// the degree ratio.
pub fn estimate_cm_degree(
    base: Base,
    candidates: &[f64],
    grid: &GridSpec,
    max_order: usize,
    tol: f64,
) -> Result<DegreeEstimate> {
    if candidates.is_empty() {
        return Err(Error::Invalid("no degree candidates".into()));
    }
    let plain = Target::for_degree(base, 0.0)?;
    let ratios = grid
        .points()
        .par_iter()
        .map(|&x| degree_ratio(&plain, x).map(|r| (x, r)))
        .collect::<Result<Vec<_>>>()?;
    let (upper_bound_at, upper_bound) = ratios
        .iter()
        .copied()
        .fold((f64::NAN, f64::INFINITY), |acc, (x, r)| if r < acc.1 { (x, r) } else { acc });

    let run = |alpha: f64| -> Result<CandidateResult> {
        let r = check_cm(&Target::for_degree(base, alpha)?, grid, max_order, tol)?;
        Ok(CandidateResult { alpha, pass: r.pass, worst_violation: r.worst_violation })
    };
    let mut sorted = candidates.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let results = sorted.iter().map(|&a| run(a)).collect::<Result<Vec<_>>>()?;
    let mut largest_passing = results.iter().filter(|c| c.pass).map(|c| c.alpha).fold(None, |m: Option<f64>, a| Some(m.map_or(a, |m| m.max(a))));
    let mut smallest_failing = results
        .iter()
        .filter(|c| !c.pass && largest_passing.is_none_or(|p| c.alpha > p))
        .map(|c| c.alpha)
        .fold(None, |m: Option<f64>, a| Some(m.map_or(a, |m| m.min(a))));

    let largest_passing_candidate = largest_passing;
    let mut refinements = Vec::new();
    if let (Some(mut lo), Some(mut hi)) = (largest_passing, smallest_failing) {
        while hi - lo > DEGREE_BISECTION_WIDTH {
            let mid = 0.5 * (lo + hi);
            let r = run(mid)?;
            if r.pass {
                lo = mid;
            } else {
                hi = mid;
            }
            refinements.push(r);
        }
        largest_passing = Some(lo);
        smallest_failing = Some(hi);
    }
    let lower = largest_passing.unwrap_or(f64::NEG_INFINITY);
    let consistent = lower <= upper_bound + tol.max(1e-6);
    Ok(DegreeEstimate {
        function: base.name(),
        grid: grid.to_string(),
        max_order,
        upper_bound,
        upper_bound_at,
        largest_passing_candidate,
        largest_passing,
        smallest_failing,
        bracket: [lower, upper_bound],
        consistent,
        candidates: results,
        refinements,
    })
}

/// Functions for the half-plane test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HalfPlaneFn {
    Function(FunctionId),
    /// `G / (eps G + 1)`
    DampedG(f64),
}

impl HalfPlaneFn {
    pub fn name(&self) -> String {
        match self {
            HalfPlaneFn::Function(id) => id.name().to_string(),
            HalfPlaneFn::DampedG(eps) => format!("DAMPED_G:{eps}"),
        }
    }

    pub fn eval(&self, z: CutPlanePoint) -> Result<Complex64> {
        match self {
            HalfPlaneFn::Function(id) => evaluate(*id, z),
            HalfPlaneFn::DampedG(eps) => {
                let g = eval_g(z)?;
                Ok(g / (*eps * g + 1.0))
            }
        }
    }
}

impl FromStr for HalfPlaneFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.strip_prefix("DAMPED_G:") {
            Some(eps) => eps
                .parse()
                .ok()
                .filter(|e: &f64| *e > 0.0 && e.is_finite())
                .map(HalfPlaneFn::DampedG)
                .ok_or_else(|| Error::Invalid(format!("bad damping in '{s}'"))),
            None => s.parse().map(HalfPlaneFn::Function),
        }
    }
}

pub const HALF_PLANE_RADII: usize = 40;
pub const HALF_PLANE_ANGLES: usize = 50;
// Sub-steps between adjacent angles in the continuity scan.
const CONTINUITY_SUBSTEPS: usize = 8;
// Largest jump |f(z_j) - f(z_j+1)| / (1 + |f|) tolerated between sub-steps.
const CONTINUITY_JUMP: f64 = 0.25;

/// Polar grid in the gated upper half-plane: radii log-spaced in
/// `[1e-3, 1e3]`, angles in `(0, 3 pi / 4]`. Points rejected by the gate are
/// dropped.
pub fn half_plane_grid() -> Vec<CutPlanePoint> {
    let radii = GridSpec::log(1e-3, 1e3, HALF_PLANE_RADII).points();
    let mut points = Vec::with_capacity(HALF_PLANE_RADII * HALF_PLANE_ANGLES);
    for &r in &radii {
        for j in 1..=HALF_PLANE_ANGLES {
            let theta = 0.75 * PI * j as f64 / HALF_PLANE_ANGLES as f64;
            let z = Complex64::from_polar(r, theta);
            if let Ok(p) = CutPlanePoint::new(z.re, z.im) {
                if gate(p).is_ok() {
                    points.push(p);
                }
            }
        }
    }
    points
}

// Walks the arc of radius r from angle a to b and reports whether f moves
// continuously along it.
fn continuous_along_arc(f: &HalfPlaneFn, r: f64, a: f64, b: f64) -> bool {
    let mut prev: Option<Complex64> = None;
    for s in 0..=CONTINUITY_SUBSTEPS {
        let theta = a + (b - a) * s as f64 / CONTINUITY_SUBSTEPS as f64;
        let z = Complex64::from_polar(r, theta);
        let Ok(p) = CutPlanePoint::new(z.re, z.im) else {
            return false;
        };
        let Ok(v) = f.eval(p) else {
            return false;
        };
        if let Some(u) = prev {
            if (v - u).norm() > CONTINUITY_JUMP * (1.0 + v.norm().max(u.norm())) {
                return false;
            }
        }
        prev = Some(v);
    }
    true
}

/// `Im z * Im f(z) <= tol (1 + |f(z)|)` on the gated grid.
pub fn check_stieltjes_geometric(
    f: &HalfPlaneFn,
    points: &[CutPlanePoint],
    tol: f64,
) -> Result<PropertyReport> {
    if points.is_empty() {
        return Err(Error::Invalid("empty half-plane grid".into()));
    }
    for p in points {
        if !(p.im > 0.0) {
            return Err(Error::Invalid(format!(
                "half-plane grid point ({}, {}) is not in the upper half-plane",
                p.re, p.im
            )));
        }
        gate(*p)?;
    }
    let results: Vec<Result<(f64, Complex64, bool)>> = points
        .par_iter()
        .map(|&p| {
            let v = f.eval(p)?;
            let z = p.z();
            let theta = z.arg();
            let step = 0.75 * PI / HALF_PLANE_ANGLES as f64;
            let continuous = continuous_along_arc(f, z.norm(), (theta - step).max(1e-3), theta);
            Ok((p.im * v.im / (1.0 + v.norm()), v, continuous))
        })
        .collect();
    let mut report = PropertyReport {
        property: Property::StieltjesGeometric,
        function: f.name(),
        grid: format!("polar:1e-3:1e3:{HALF_PLANE_RADII}x{HALF_PLANE_ANGLES}:gated"),
        max_order: 0,
        pass: true,
        worst_violation: 0.0,
        witness: None,
        notes: Vec::new(),
    };
    let mut discontinuities = 0;
    for (p, r) in points.iter().zip(results) {
        match r {
            Ok((normalized, _, continuous)) => {
                if !continuous {
                    discontinuities += 1;
                }
                if normalized > report.worst_violation {
                    report.worst_violation = normalized;
                    report.witness = Some(Witness { x: p.re, k: 0, value: normalized, im: Some(p.im) });
                }
            }
            Err(e) => {
                report.pass = false;
                report.notes.push(e.to_string());
            }
        }
    }
    if discontinuities > 0 {
        report.notes.push(format!("{discontinuities} points failed the continuity scan"));
    }
    report.pass &= report.worst_violation <= tol;
    Ok(report)
}

pub const IDENTITY_TOL: f64 = 1e-10;
pub const IDENTITY_NAMES: [&str; 3] = ["H(1/x)*H(x)=1", "X2H(x)=x*G(x)", "INV_XH(x)*G(x)=1"];

/// Relative defects of the three identities at `x`.
pub fn identity_defects(x: f64) -> Result<[f64; 3]> {
    let h = evaluate_real(FunctionId::H, x)?;
    let h_inv = evaluate_real(FunctionId::H, 1.0 / x)?;
    let g = evaluate_real(FunctionId::G, x)?;
    let x2h = evaluate_real(FunctionId::X2H, x)?;
    let inv_xh = evaluate_real(FunctionId::InvXH, x)?;
    Ok([
        (h_inv * h - 1.0).abs(),
        (x2h - x * g).abs() / x2h.abs(),
        (inv_xh * g - 1.0).abs(),
    ])
}

/// Checks the identities on the grid, each to `tol` relative; the witness
/// `k` indexes [`IDENTITY_NAMES`].
pub fn check_closure_identities(grid: &GridSpec, tol: f64) -> Result<PropertyReport> {
    let xs = grid.points();
    let defects = xs.par_iter().map(|&x| identity_defects(x)).collect::<Result<Vec<_>>>()?;
    let mut report = PropertyReport {
        property: Property::Identity,
        function: IDENTITY_NAMES.join(";"),
        grid: grid.to_string(),
        max_order: 0,
        pass: true,
        worst_violation: 0.0,
        witness: None,
        notes: Vec::new(),
    };
    for (x, d) in xs.iter().zip(defects) {
        for (k, &v) in d.iter().enumerate() {
            if !(v <= report.worst_violation) {
                report.worst_violation = v;
                report.witness = Some(Witness { x: *x, k, value: v, im: None });
            }
        }
    }
    report.pass = report.worst_violation <= tol;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn h() -> Target {
        Target::function(FunctionId::H)
    }

    #[test]
    fn jet_values_match_direct_evaluation() {
        for id in FunctionId::ALL {
            for x in [0.01, 0.3, 0.9, 1.0, 1.1, 2.0, 50.0] {
                let jet = taylor_jet(&Target::function(id), x, 4).unwrap();
                let direct = evaluate_real(id, x).unwrap();
                assert_relative_eq!(jet.value(), direct, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn jet_at_one_is_exact() {
        let jet = taylor_jet(&h(), 1.0, 6).unwrap();
        assert_relative_eq!(jet.value(), 1.0, max_relative = 1e-15);
        let g = taylor_jet(&Target::function(FunctionId::G), 1.0, 0).unwrap();
        assert_relative_eq!(g.value(), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn first_derivative_matches_finite_difference() {
        let jet = taylor_jet(&h(), 2.0, 1).unwrap();
        let step = 1e-5;
        let fd = (evaluate_real(FunctionId::H, 2.0 + step).unwrap()
            - evaluate_real(FunctionId::H, 2.0 - step).unwrap())
            / (2.0 * step);
        assert!(jet.coeffs[1] < 0.0);
        assert_relative_eq!(jet.coeffs[1], fd, max_relative = 1e-6);
    }

    #[test]
    fn deflated_and_direct_jets_agree_across_the_switch() {
        for x in [1.0 - DEFLATE_RADIUS, 1.0 + DEFLATE_RADIUS] {
            let a = taylor_jet(&h(), x - 1e-9, 6).unwrap();
            let b = taylor_jet(&h(), x + 1e-9, 6).unwrap();
            for k in 0..=6 {
                assert_relative_eq!(a.coeffs[k], b.coeffs[k], max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn order_cap_is_enforced() {
        assert!(taylor_jet(&h(), 2.0, 13).is_err());
        assert!(check_cm(&h(), &default_cm_grid(), 13, 1e-9).is_err());
    }

    #[test]
    fn grid_spec_round_trips() {
        let g: GridSpec = "log:0.01:100:50".parse().unwrap();
        assert_eq!(g, GridSpec::log(0.01, 100.0, 50));
        assert_eq!(g.to_string().parse::<GridSpec>().unwrap(), g);
        let pts = g.points();
        assert_eq!(pts.len(), 50);
        assert_relative_eq!(pts[0], 0.01);
        assert_relative_eq!(pts[49], 100.0, max_relative = 1e-14);
        assert!("lin:0:1:5".parse::<GridSpec>().is_err());
        assert!("log:1:2:1".parse::<GridSpec>().is_err());
        assert!("cube:1:2:3".parse::<GridSpec>().is_err());
    }

    #[test]
    fn target_names_parse() {
        let t: Target = "x^1.5*H".parse().unwrap();
        assert_eq!(t, h().with_power(1.5));
        assert_eq!(t.name(), "x^1.5*H");
        assert_eq!("LEVY_Z2H".parse::<Target>().unwrap().base, Base::LevyZ2H);
        assert!("x^a*H".parse::<Target>().is_err());
    }

    #[test]
    fn closed_form_ratio_matches_jets() {
        for x in [0.05, 0.5, 2.0, 30.0] {
            let a = degree_ratio(&h(), x).unwrap();
            let b = degree_ratio_h_closed_form(x).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-9);
        }
    }

    #[test]
    fn ratio_of_xh_is_shifted_by_one() {
        let x = 1e-3;
        let a = degree_ratio(&h(), x).unwrap();
        let b = degree_ratio(&Target::function(FunctionId::XH), x).unwrap();
        assert_relative_eq!(b, a - 1.0, max_relative = 1e-9);
    }

    #[test]
    fn power_weighted_cm_fails_past_degree() {
        let r = check_cm(&h().with_power(1.5), &default_cm_grid(), 2, 1e-9).unwrap();
        assert!(!r.pass);
        assert!(r.witness.is_some());
    }

    #[test]
    fn damped_g_parses() {
        assert_eq!("DAMPED_G:0.1".parse::<HalfPlaneFn>().unwrap(), HalfPlaneFn::DampedG(0.1));
        assert!("DAMPED_G:-1".parse::<HalfPlaneFn>().is_err());
        assert_eq!("G".parse::<HalfPlaneFn>().unwrap(), HalfPlaneFn::Function(FunctionId::G));
    }

    #[test]
    fn half_plane_grid_is_gated() {
        let pts = half_plane_grid();
        assert!(pts.len() > 1900 && pts.len() <= 2000);
        assert!(pts.iter().all(|p| p.im > 0.0 && gate(*p).is_ok()));
    }

    #[test]
    fn lower_half_plane_points_are_rejected() {
        let p = CutPlanePoint::new(1.0, -1.0).unwrap();
        assert!(check_stieltjes_geometric(&HalfPlaneFn::Function(FunctionId::G), &[p], 1e-12).is_err());
    }

    #[test]
    fn identities_hold_at_sample_points() {
        let d = identity_defects(2.0).unwrap();
        assert!(d.iter().all(|&v| v <= 1e-12), "{d:?}");
        let h2 = evaluate_real(FunctionId::H, 2.0).unwrap();
        let h_half = evaluate_real(FunctionId::H, 0.5).unwrap();
        assert_relative_eq!(h2 * h_half, 1.0, max_relative = 1e-12);
    }
}
