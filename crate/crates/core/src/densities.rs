//! Boundary densities on `(0, inf)` recovered from `G(z) = zH(z)` just above
//! the cut, and the Laplace-type kernels built from them.
//!
//! Shorthand used below, for `t > 1`:
//! `L = ln((1+t^2)/(t-1))`, `N = ln((1+t^2)/(t(t-1)))`, `M = ln(t(1+t^2)/(t-1))`,
//! and for `t < 1`: `D = ln((1+t^2)/(1-t))`.

use std::f64::consts::{PI, SQRT_2};
use std::io::Write;
use std::sync::OnceLock;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::eval::{boundary_limit, BoundaryQuantity};
use crate::quadrature::{
    laplace_transform, levy_integral, Density, PowerWeighted, Scaled, Stretched, Tol,
};

/// `1 + sqrt 2`, the positive root of `t^2 - 2t - 1`.
pub const SILVER: f64 = 1.0 + SQRT_2;
pub const BREAKPOINTS: [f64; 2] = [1.0, SILVER];
const PI2: f64 = PI * PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// `0 < t < 1`
    Below,
    /// `t = 1`
    One,
    /// `1 < t < 1 + sqrt 2`
    Middle,
    /// `t >= 1 + sqrt 2`
    Upper,
}

pub fn branch_of(t: f64) -> Branch {
    if t < 1.0 {
        Branch::Below
    } else if t == 1.0 {
        Branch::One
    } else if t < SILVER {
        Branch::Middle
    } else {
        Branch::Upper
    }
}

fn check_positive(t: f64) -> Result<()> {
    if t > 0.0 && !t.is_nan() {
        Ok(())
    } else {
        Err(Error::Domain(format!("density argument must be positive, got {t}")))
    }
}

/// `(ln rho, ln g2)` at `t = e^u`; either argument may have under- or
/// overflowed, the branch is read from `t`.
fn log_parts(u: f64, t: f64) -> (f64, f64) {
    match branch_of(t) {
        Branch::One => (f64::NEG_INFINITY, 0.0),
        Branch::Below => {
            let d = (t * t).ln_1p() - (-t).ln_1p();
            // t/D -> 1 as t -> 0
            let ratio = if t < 1e-300 { 1.0 } else { t / d };
            let ln_ratio = ratio.ln();
            (ln_ratio, 2.0 * ln_ratio + ((d - u).powi(2) + PI2).ln())
        }
        Branch::Middle => {
            let l = (t * t).ln_1p() - (t - 1.0).ln();
            let n = l - u;
            let m = l + u;
            let den = l * l + PI2;
            let rho = t * m / den;
            let g2 = t * t * ((l * n + 2.0 * PI2).powi(2) + PI2 * m * m) / (den * den);
            (rho.ln(), g2.ln())
        }
        Branch::Upper => {
            // With r = 1/t: N = ln((1+r^2)/(1-r)) and L = u + N.
            let r = (-u).exp();
            let n = (r * r).ln_1p() - (-r).ln_1p();
            let tn = if r == 0.0 { 1.0 } else { n / r };
            let l = u + n;
            let ln_den = (l * l + PI2).ln();
            let ln_tn = tn.ln();
            (ln_tn - ln_den, 2.0 * ln_tn - ln_den)
        }
    }
}

/// `rho(t) = -(1/pi) lim Im G(-t + i eps)`.
pub fn rho(t: f64) -> Result<f64> {
    check_positive(t)?;
    Ok(log_parts(t.ln(), t).0.exp())
}

/// `lim |G(-t + i eps)|^2` as `eps -> 0+`.
pub fn g2(t: f64) -> Result<f64> {
    check_positive(t)?;
    Ok(log_parts(t.ln(), t).1.exp())
}

/// The second density of the `1/(z^2 H)` representation, written exactly as
/// displayed; it equals `g2(t) / t`.
pub fn varrho_paper(t: f64) -> Result<f64> {
    check_positive(t)?;
    let q = 1.0 + t * t;
    Ok(match branch_of(t) {
        Branch::Below => {
            let a = (q / (t * (1.0 - t))).ln();
            let b = (q / (1.0 - t)).ln();
            t * (a * a + PI2) / (b * b)
        }
        Branch::One => t,
        Branch::Middle => {
            let l = (q / (t - 1.0)).ln();
            let n = (q / (t * (t - 1.0))).ln();
            let m = (t * q / (t - 1.0)).ln();
            let den = l * l + PI2;
            t * ((l * n + 2.0 * PI2).powi(2) + (PI * m).powi(2)) / (den * den)
        }
        Branch::Upper => {
            let l = (q / (t - 1.0)).ln();
            let n = (q / (t * (t - 1.0))).ln();
            t * n * n / (l * l + PI2)
        }
    })
}

/// Candidate densities for the Stieltjes representation of `1/(z^2 H(z))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SigmaCandidate {
    /// `rho / varrho_paper`
    A,
    /// `rho / (t g2)`
    B,
}

pub fn sigma_candidate(candidate: SigmaCandidate, t: f64) -> Result<f64> {
    check_positive(t)?;
    match candidate {
        SigmaCandidate::A => {
            let r = rho(t)?;
            if r == 0.0 {
                return Ok(0.0);
            }
            Ok(r / varrho_paper(t)?)
        }
        SigmaCandidate::B => Ok(ln_sigma(SigmaCandidate::B, t.ln(), t).exp()),
    }
}

fn ln_sigma(candidate: SigmaCandidate, u: f64, t: f64) -> f64 {
    let (lr, lg) = log_parts(u, t);
    match candidate {
        SigmaCandidate::A => lr - lg + u,
        SigmaCandidate::B => lr - lg - u,
    }
}

/// The oracle-selected density of `1/(z^2 H(z))`.
pub fn sigma(t: f64) -> Result<f64> {
    sigma_candidate(selected_sigma()?, t)
}

/// Which density a [`DensityFn`] evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DensityFn {
    Rho,
    G2,
    VarrhoPaper,
    Sigma(SigmaCandidate),
}

impl DensityFn {
    pub fn name(&self) -> &'static str {
        match self {
            DensityFn::Rho => "rho",
            DensityFn::G2 => "g2",
            DensityFn::VarrhoPaper => "varrho_paper",
            DensityFn::Sigma(SigmaCandidate::A) => "sigma_A",
            DensityFn::Sigma(SigmaCandidate::B) => "sigma_B",
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        match self {
            DensityFn::Rho => rho(t),
            DensityFn::G2 => g2(t),
            DensityFn::VarrhoPaper => varrho_paper(t),
            DensityFn::Sigma(c) => sigma_candidate(*c, t),
        }
    }

    fn ln_at_log(&self, u: f64) -> f64 {
        let t = u.exp();
        let (lr, lg) = log_parts(u, t);
        match self {
            DensityFn::Rho => lr,
            DensityFn::G2 => lg,
            DensityFn::VarrhoPaper => lg - u,
            DensityFn::Sigma(c) => ln_sigma(*c, u, t),
        }
    }

    /// Analytic one-sided limits at `t = 1` and the literal branch values at
    /// `t = 1 + sqrt 2`.
    pub fn describe(&self) -> PiecewiseDensity {
        let at_one = match self {
            DensityFn::Rho | DensityFn::Sigma(_) => (0.0, 0.0),
            DensityFn::G2 | DensityFn::VarrhoPaper => (1.0, 1.0),
        };
        let left = self.ln_branch_at_silver(Branch::Middle).exp();
        let right = self.ln_branch_at_silver(Branch::Upper).exp();
        let (zero, infinity) = match self {
            DensityFn::Rho => (TailLaw::new(0.0, 0.0), TailLaw::new(0.0, -2.0)),
            DensityFn::G2 => (TailLaw::new(0.0, 2.0), TailLaw::new(0.0, -2.0)),
            DensityFn::VarrhoPaper => (TailLaw::new(-1.0, 2.0), TailLaw::new(-1.0, -2.0)),
            DensityFn::Sigma(SigmaCandidate::A) => (TailLaw::new(1.0, -2.0), TailLaw::new(1.0, 0.0)),
            DensityFn::Sigma(SigmaCandidate::B) => (TailLaw::new(-1.0, -2.0), TailLaw::new(-1.0, 0.0)),
        };
        PiecewiseDensity {
            density: *self,
            branch_bounds: BREAKPOINTS,
            limits: [at_one, (left, right)],
            near_zero: zero,
            near_infinity: infinity,
        }
    }

    fn ln_branch_at_silver(&self, branch: Branch) -> f64 {
        // Evaluate the requested branch formula at t = 1 + sqrt 2 itself.
        let t = SILVER;
        let u = t.ln();
        let probe = match branch {
            Branch::Middle => t.next_down(),
            _ => t,
        };
        let (lr, lg) = log_parts(u, probe);
        match self {
            DensityFn::Rho => lr,
            DensityFn::G2 => lg,
            DensityFn::VarrhoPaper => lg - u,
            DensityFn::Sigma(SigmaCandidate::A) => lr - lg + u,
            DensityFn::Sigma(SigmaCandidate::B) => lr - lg - u,
        }
    }
}

impl Density for DensityFn {
    fn at(&self, t: f64) -> f64 {
        self.eval(t).unwrap_or(f64::NAN)
    }

    fn scaled_at_log(&self, u: f64, log_scale: f64) -> f64 {
        (self.ln_at_log(u) + log_scale).exp()
    }

    fn breakpoints(&self) -> Vec<f64> {
        BREAKPOINTS.to_vec()
    }
}

/// Leading behaviour `t^power |ln t|^log_power` at an end of `(0, inf)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailLaw {
    pub power: f64,
    pub log_power: f64,
}

impl TailLaw {
    pub fn new(power: f64, log_power: f64) -> Self {
        Self { power, log_power }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PiecewiseDensity {
    pub density: DensityFn,
    pub branch_bounds: [f64; 2],
    /// `(left, right)` limits at each breakpoint.
    pub limits: [(f64, f64); 2],
    pub near_zero: TailLaw,
    pub near_infinity: TailLaw,
}

/// Log-spaced points of `[lo, hi]`, nudged `1e-9` off the breakpoints.
pub fn calibration_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|k| {
            let t = (a + (b - a) * k as f64 / (count - 1) as f64).exp();
            nudge_off_breakpoints(t)
        })
        .collect()
}

pub fn nudge_off_breakpoints(t: f64) -> f64 {
    for bp in BREAKPOINTS {
        if (t - bp).abs() < 1e-9 {
            return if t < bp { bp - 1e-9 } else { bp + 1e-9 };
        }
    }
    t
}

/// `-(1/pi)` times the extrapolated boundary value of `Im 1/(z^2 H(z))`.
pub fn sigma_oracle(t: f64, tol: f64) -> Result<f64> {
    let lim = boundary_limit(t, BoundaryQuantity::ImInvZ2H, tol)?;
    if !lim.converged {
        return Err(Error::NonConvergence(format!(
            "boundary limit of Im 1/(z^2 H) at t = {t}: gap {:.3e}",
            lim.error_estimate
        )));
    }
    Ok(-lim.value / PI)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateDeviation {
    pub candidate: SigmaCandidate,
    pub max_abs_deviation: f64,
    pub worst_t: f64,
    pub matches: bool,
}

/// Outcome of matching both candidates against the boundary oracle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SigmaSelection {
    pub selected: Option<SigmaCandidate>,
    pub tolerance: f64,
    pub grid: Vec<f64>,
    pub deviations: Vec<CandidateDeviation>,
}

pub const SIGMA_CALIBRATION_TOL: f64 = 1e-6;

pub fn select_sigma(grid: &[f64], tol: f64) -> Result<SigmaSelection> {
    let oracle: Vec<f64> = grid
        .iter()
        .map(|&t| sigma_oracle(t, 1e-11 * (1.0 + 1.0 / t)))
        .collect::<Result<_>>()?;
    let mut deviations = Vec::new();
    for candidate in [SigmaCandidate::A, SigmaCandidate::B] {
        let mut worst = (0.0f64, grid[0]);
        for (&t, &o) in grid.iter().zip(&oracle) {
            let dev = (sigma_candidate(candidate, t)? - o).abs();
            if !(dev <= worst.0) {
                worst = (dev, t);
            }
        }
        deviations.push(CandidateDeviation {
            candidate,
            max_abs_deviation: worst.0,
            worst_t: worst.1,
            matches: worst.0 <= tol,
        });
    }
    let matching: Vec<SigmaCandidate> = deviations
        .iter()
        .filter(|d| d.matches)
        .map(|d| d.candidate)
        .collect();
    Ok(SigmaSelection {
        selected: (matching.len() == 1).then(|| matching[0]),
        tolerance: tol,
        grid: grid.to_vec(),
        deviations,
    })
}

pub fn default_sigma_selection() -> &'static Result<SigmaSelection> {
    static SELECTION: OnceLock<Result<SigmaSelection>> = OnceLock::new();
    SELECTION.get_or_init(|| select_sigma(&calibration_grid(1e-3, 1e3, 40), SIGMA_CALIBRATION_TOL))
}

/// The candidate chosen by the oracle on the default calibration grid.
pub fn selected_sigma() -> Result<SigmaCandidate> {
    match default_sigma_selection() {
        Ok(sel) => sel.selected.ok_or_else(|| {
            Error::Calibration(format!(
                "no unique candidate matches the boundary oracle: {:?}",
                sel.deviations
            ))
        }),
        Err(e) => Err(e.clone()),
    }
}

/// `m(t) = int_0^inf u^p d(u) e^{-t u} du`.
///
/// Evaluated after the substitution `y = t u`, so that
/// `t^{p+1} m(t) = int_0^inf y^p d(y/t) e^{-y} dy` stays of moderate size
/// for extreme `t`.
pub struct LaplaceDensity {
    pub base: DensityFn,
    pub power: f64,
    pub tol: Tol,
}

impl LaplaceDensity {
    pub fn new(base: DensityFn, power: f64, tol: Tol) -> Self {
        Self { base, power, tol }
    }

    /// `t^{p+1} m(t)` at `t = e^u`.
    pub fn scaled_value(&self, u: f64) -> Result<f64> {
        self.scaled_by(u, 0.0)
    }

    // `e^log_factor t^{p+1} m(t)`; the factor goes inside the integral so
    // that large intermediate values never materialise.
    fn scaled_by(&self, u: f64, log_factor: f64) -> Result<f64> {
        let stretched = Stretched { base: &self.base, shift: u };
        let weighted = PowerWeighted { base: &stretched, power: self.power };
        let scaled = Scaled { base: &weighted, log_factor };
        let r = laplace_transform(&scaled, 1.0, self.tol)?;
        Ok(r.into_result("inner Laplace integral")?.value)
    }

    pub fn value(&self, t: f64) -> Result<f64> {
        check_positive(t)?;
        let u = t.ln();
        self.scaled_by(u, -(self.power + 1.0) * u)
    }
}

impl Density for LaplaceDensity {
    fn at(&self, t: f64) -> f64 {
        self.value(t).unwrap_or(f64::NAN)
    }

    fn scaled_at_log(&self, u: f64, log_scale: f64) -> f64 {
        self.scaled_by(u, log_scale - (self.power + 1.0) * u)
            .unwrap_or(f64::NAN)
    }
}

/// `int_0^inf u rho(u) e^{-t u} du`.
pub fn levy_density_z2h(t: f64, tol: Tol) -> Result<f64> {
    LaplaceDensity::new(DensityFn::Rho, 1.0, tol).value(t)
}

/// `int_0^inf u sigma(u) e^{-t u} du` with the selected `sigma`.
pub fn levy_density_invzh(t: f64, tol: Tol) -> Result<f64> {
    LaplaceDensity::new(DensityFn::Sigma(selected_sigma()?), 1.0, tol).value(t)
}

/// `int_0^inf (rho(u)/u)(1 - e^{-t u}) du`.
pub fn h_rep_kernel(t: f64, tol: Tol) -> Result<f64> {
    check_positive(t)?;
    let weighted = PowerWeighted { base: &DensityFn::Rho, power: -1.0 };
    let z = crate::eval::CutPlanePoint::real(t)?;
    let r = levy_integral(&weighted, z, tol)?;
    Ok(r.into_result("h representation kernel")?.value.re)
}

/// The kernel `t -> h_rep_kernel(t)` as a density, for the outer Laplace
/// transform of the `H(z)` representation.
pub struct HRepKernel {
    pub tol: Tol,
}

impl Density for HRepKernel {
    fn at(&self, t: f64) -> f64 {
        h_rep_kernel(t, self.tol).unwrap_or(f64::NAN)
    }

    fn scaled_at_log(&self, u: f64, log_scale: f64) -> f64 {
        // The kernel vanishes linearly at 0; below e^-600 its share of any
        // Laplace integral is far under double precision.
        if u < -600.0 {
            return 0.0;
        }
        let v = self.at(u.exp());
        if v == 0.0 {
            0.0
        } else {
            (v.ln() + log_scale).exp()
        }
    }
}

/// Shortest round-trip text for a double, switching to exponent notation
/// outside `[1e-5, 1e16)`.
pub fn fmt_num(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    let a = x.abs();
    if x == 0.0 || (1e-5..1e16).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Writes `t,rho,varrho_paper,g2,sigma` rows; `sigma` is the selected candidate.
pub fn write_density_csv<W: Write>(out: &mut W, ts: &[f64]) -> Result<()> {
    let candidate = selected_sigma()?;
    writeln!(out, "t,rho,varrho_paper,g2,sigma")?;
    for &t in ts {
        writeln!(
            out,
            "{},{},{},{},{}",
            fmt_num(t),
            fmt_num(rho(t)?),
            fmt_num(varrho_paper(t)?),
            fmt_num(g2(t)?),
            fmt_num(sigma_candidate(candidate, t)?)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn special_values() {
        assert_eq!(rho(1.0).unwrap(), 0.0);
        assert_eq!(g2(1.0).unwrap(), 1.0);
        assert_eq!(varrho_paper(1.0).unwrap(), 1.0);
        assert_eq!(sigma_candidate(SigmaCandidate::A, 1.0).unwrap(), 0.0);
        assert_eq!(sigma_candidate(SigmaCandidate::B, 1.0).unwrap(), 0.0);
        assert!(rho(0.0).is_err());
        assert!(g2(-1.0).is_err());
    }

    #[test]
    fn rho_at_half() {
        assert_relative_eq!(rho(0.5).unwrap(), 0.5 / 2.5f64.ln(), max_relative = 1e-14);
    }

    #[test]
    fn rho_tends_to_one_at_zero() {
        assert!((rho(1e-8).unwrap() - 1.0).abs() < 1e-7);
        assert!((rho(1e-300).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn g2_grows_like_log_squared_at_zero() {
        let t: f64 = 1e-8;
        let ratio = g2(t).unwrap() / t.ln().powi(2);
        assert!((ratio - 1.0).abs() < 0.05, "{ratio}");
    }

    #[test]
    fn branch_membership_at_silver() {
        assert_eq!(branch_of(SILVER), Branch::Upper);
        assert_eq!(branch_of(SILVER.next_down()), Branch::Middle);
        let p = DensityFn::Rho.describe();
        let (left, right) = p.limits[1];
        assert!(left > 0.0 && right > 0.0 && left != right);
        // At 1 + sqrt 2: N = ln 2 and M = ln(sqrt 2 t (t + 1)).
        let t = SILVER;
        let l = (t * t).ln_1p() - (t - 1.0).ln();
        assert_relative_eq!(right, t * 2f64.ln() / (l * l + PI2), max_relative = 1e-12);
        assert_relative_eq!(left, t * (SQRT_2 * t * (t + 1.0)).ln() / (l * l + PI2), max_relative = 1e-12);
    }

    #[test]
    fn varrho_times_t_is_g2() {
        for t in calibration_grid(1e-3, 1e3, 100) {
            let lhs = varrho_paper(t).unwrap() * t;
            let rhs = g2(t).unwrap();
            assert_relative_eq!(lhs, rhs, max_relative = 1e-10);
        }
    }

    #[test]
    fn log_form_matches_direct_form() {
        for t in calibration_grid(1e-6, 1e6, 57) {
            for d in [DensityFn::Rho, DensityFn::G2, DensityFn::Sigma(SigmaCandidate::B)] {
                let direct = d.eval(t).unwrap();
                let via_log = d.scaled_at_log(t.ln(), 0.0);
                assert_relative_eq!(direct, via_log, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn large_t_sigma_law() {
        for t in [1e4, 1e6] {
            let b = t * sigma_candidate(SigmaCandidate::B, t).unwrap();
            assert!((b - 1.0).abs() < 0.2, "t sigma_B({t}) = {b}");
            let a = sigma_candidate(SigmaCandidate::A, t).unwrap() / t;
            assert!((a - 1.0).abs() < 0.2, "sigma_A({t})/t = {a}");
        }
    }

    #[test]
    fn extreme_log_arguments_stay_finite() {
        for u in [-800.0, -50.0, 50.0, 800.0] {
            for d in [DensityFn::Rho, DensityFn::G2, DensityFn::Sigma(SigmaCandidate::B)] {
                // t sigma_B stays bounded, sigma_B alone overflows as t -> 0
                let v = d.scaled_at_log(u, u.min(0.0));
                assert!(v.is_finite() && v >= 0.0, "{} at u = {u}: {v}", d.name());
            }
        }
        // rho ~ 1/u^2 for large u
        let r = DensityFn::Rho.scaled_at_log(800.0, 0.0) * 800f64.powi(2);
        assert!((r - 1.0).abs() < 1e-4);
    }

    #[test]
    fn fmt_num_forms() {
        assert_eq!(fmt_num(1.0), "1");
        assert_eq!(fmt_num(-0.0), "0");
        assert_eq!(fmt_num(0.25), "0.25");
        assert_eq!(fmt_num(1e-7), "1e-7");
        assert_eq!(fmt_num(2.5e20), "2.5e20");
    }
}
