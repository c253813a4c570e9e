//! Principal-branch evaluation of the logarithm-ratio functions on the cut
//! plane `C \ (-inf, 0]`.
//!
//! With `w(z) = (1 + z^2) / (1 + z)`:
//!
//! * `h(z) = ln z / ln w(z)`, with `h(1) = 2`,
//! * `H(z) = h(z) - 1`, with `H(1) = 1`,
//! * `G(z) = z H(z)` and `1 / (z^2 H(z))`.
//!
//! Both logarithms vanish at `z = 1`; inside a small disk around it the ratio
//! is taken between the two Taylor series with the common factor removed.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::TaylorJet;

/// Radius of the disk around `z = 1` where the series ratio is used.
pub const SERIES_RADIUS: f64 = 1e-3;
/// Truncation order of the series ratio.
pub const SERIES_ORDER: usize = 8;
/// `|1 + z^2|` below this is reported as an accuracy loss.
pub const BRANCH_POINT_WARN: f64 = 1e-6;

/// A point of the cut plane: off the closed negative half-line, finite, nonzero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutPlanePoint {
    pub re: f64,
    pub im: f64,
}

impl CutPlanePoint {
    pub fn new(re: f64, im: f64) -> Result<Self> {
        if !re.is_finite() || !im.is_finite() {
            return Err(Error::Domain(format!("non-finite point ({re}, {im})")));
        }
        if im == 0.0 && re <= 0.0 {
            return Err(Error::Domain(format!(
                "point ({re}, {im}) lies on the cut (-inf, 0]"
            )));
        }
        Ok(Self { re, im })
    }

    pub fn real(x: f64) -> Result<Self> {
        Self::new(x, 0.0)
    }

    pub fn from_complex(z: Complex64) -> Result<Self> {
        Self::new(z.re, z.im)
    }

    pub fn z(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    pub fn conj(&self) -> Self {
        Self {
            re: self.re,
            im: -self.im,
        }
    }
}

/// Names of the functions the toolkit evaluates and checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FunctionId {
    /// `H(x) = h(x) - 1`
    #[serde(rename = "H")]
    H,
    /// `h(x)`
    #[serde(rename = "h")]
    LowerH,
    /// `zH(z)`
    #[serde(rename = "G")]
    G,
    /// `1 / (z^2 H(z))`
    #[serde(rename = "INV_Z2H")]
    InvZ2H,
    #[serde(rename = "INV_H")]
    InvH,
    #[serde(rename = "INV_XH")]
    InvXH,
    #[serde(rename = "X2H")]
    X2H,
    #[serde(rename = "XH")]
    XH,
    #[serde(rename = "INV_X2H")]
    InvX2H,
}

impl FunctionId {
    pub const ALL: [FunctionId; 9] = [
        FunctionId::H,
        FunctionId::LowerH,
        FunctionId::G,
        FunctionId::InvZ2H,
        FunctionId::InvH,
        FunctionId::InvXH,
        FunctionId::X2H,
        FunctionId::XH,
        FunctionId::InvX2H,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            FunctionId::H => "H",
            FunctionId::LowerH => "h",
            FunctionId::G => "G",
            FunctionId::InvZ2H => "INV_Z2H",
            FunctionId::InvH => "INV_H",
            FunctionId::InvXH => "INV_XH",
            FunctionId::X2H => "X2H",
            FunctionId::XH => "XH",
            FunctionId::InvX2H => "INV_X2H",
        }
    }
}

impl fmt::Display for FunctionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FunctionId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FunctionId::ALL
            .iter()
            .copied()
            .find(|id| id.name() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown function id '{s}'")))
    }
}

/// `ln z = ln|z| + i arg z` with `arg z` in `(-pi, pi)`.
pub fn principal_log(z: CutPlanePoint) -> Complex64 {
    z.z().ln()
}

/// `ln(1 + u)` on the principal branch, accurate for small `|u|`.
pub fn complex_ln_1p(u: Complex64) -> Complex64 {
    if u.norm() < 0.5 {
        let modulus_m1 = u.re * (2.0 + u.re) + u.im * u.im;
        Complex64::new(0.5 * modulus_m1.ln_1p(), u.im.atan2(1.0 + u.re))
    } else {
        (Complex64::new(1.0, 0.0) + u).ln()
    }
}

/// `(1 - e^{-x}) / x`, accurate near `x = 0`.
pub fn complex_phi1(x: Complex64) -> Complex64 {
    if x.norm() < 0.5 {
        // sum_{k>=0} (-x)^k / (k+1)!
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = term;
        for k in 1..30 {
            term = term * (-x) / (k as f64 + 1.0);
            sum += term;
            if term.norm() < 1e-18 * sum.norm() {
                break;
            }
        }
        sum
    } else {
        (Complex64::new(1.0, 0.0) - (-x).exp()) / x
    }
}

/// True when `z` is within the accuracy-loss radius of the branch points `±i`.
pub fn near_branch_point(z: CutPlanePoint) -> bool {
    let z = z.z();
    (Complex64::new(1.0, 0.0) + z * z).norm() < BRANCH_POINT_WARN
}

/// Largest `|arg z|` admitted on verification grids.
pub const GATE_MAX_ARG: f64 = 3.0 * PI / 4.0;
/// Radius of the disks around `±i` excluded from verification grids.
pub const GATE_BRANCH_RADIUS: f64 = 1e-2;

/// Rejects points outside the sector `|arg z| <= 3 pi / 4` or close to `±i`.
pub fn gate(z: CutPlanePoint) -> Result<()> {
    let zc = z.z();
    if zc.arg().abs() > GATE_MAX_ARG {
        return Err(Error::Gating(format!("{zc} lies outside |arg z| <= 3pi/4")));
    }
    let i = Complex64::new(0.0, 1.0);
    if (zc - i).norm() < GATE_BRANCH_RADIUS || (zc + i).norm() < GATE_BRANCH_RADIUS {
        return Err(Error::Gating(format!("{zc} lies within 1e-2 of a branch point")));
    }
    Ok(())
}

struct Logs {
    ln_z: Complex64,
    ln_w: Complex64,
    /// `ln z - ln w`, computed without cancellation.
    numerator: Complex64,
}

/// Above this modulus `w` is factored as `z (1 + 1/z^2) / (1 + 1/z)`.
const LARGE_MODULUS: f64 = 1e8;

fn direct_logs(z: Complex64) -> Logs {
    let one = Complex64::new(1.0, 0.0);
    let ln_z = z.ln();
    if z.norm() > LARGE_MODULUS {
        let r = one / z;
        let numerator = complex_ln_1p(r) - complex_ln_1p(r * r);
        return Logs {
            ln_z,
            ln_w: ln_z - numerator,
            numerator,
        };
    }
    // w = 1 + z(z-1)/(1+z)
    let ln_w = complex_ln_1p(z * (z - one) / (one + z));
    // z/w = 1 + (z-1)/(1+z^2); its principal log can differ from ln z - ln w
    // by a multiple of 2 pi i, which is restored here.
    let quotient = complex_ln_1p((z - one) / (one + z * z));
    let naive = ln_z - ln_w;
    let turns = ((naive.im - quotient.im) / (2.0 * PI)).round();
    let numerator = quotient + Complex64::new(0.0, 2.0 * PI * turns);
    Logs {
        ln_z,
        ln_w,
        numerator,
    }
}

/// Coefficients of `ln(1+s)/s` and of `ln w(1+s)/s`, in powers of `s = z - 1`.
fn series_coefficients() -> &'static (Vec<f64>, Vec<f64>) {
    static COEFFS: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    COEFFS.get_or_init(|| {
        let n = SERIES_ORDER + 1;
        let ln_z: Vec<f64> = (0..=SERIES_ORDER)
            .map(|k| (-1f64).powi(k as i32) / (k as f64 + 1.0))
            .collect();
        let x = TaylorJet::variable(1.0, n);
        let ln_w = &(&x * &x).add_scalar(1.0).ln().expect("positive at 1")
            - &x.add_scalar(1.0).ln().expect("positive at 1");
        let ln_w: Vec<f64> = ln_w.coeffs[1..=n].to_vec();
        (ln_z, ln_w)
    })
}

fn horner(coeffs: &[f64], s: Complex64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
}

/// `(h(z), H(z))` from the series ratio around `z = 1`.
fn series_pair(z: Complex64) -> (Complex64, Complex64) {
    let (a, b) = series_coefficients();
    let s = z - Complex64::new(1.0, 0.0);
    let num = horner(a, s);
    let den = horner(b, s);
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    (num / den, horner(&diff, s) / den)
}

fn checked(value: Complex64, z: Complex64) -> Result<Complex64> {
    if value.re.is_finite() && value.im.is_finite() {
        Ok(value)
    } else {
        Err(Error::Domain(format!(
            "evaluation at {z} is not finite (branch point of ln w)"
        )))
    }
}

fn pair(z: CutPlanePoint) -> Result<(Complex64, Complex64)> {
    let zc = z.z();
    if zc == Complex64::new(1.0, 0.0) {
        return Ok((Complex64::new(2.0, 0.0), Complex64::new(1.0, 0.0)));
    }
    if (zc - 1.0).norm() < SERIES_RADIUS {
        return Ok(series_pair(zc));
    }
    let logs = direct_logs(zc);
    Ok((
        checked(logs.ln_z / logs.ln_w, zc)?,
        checked(logs.numerator / logs.ln_w, zc)?,
    ))
}

/// `h(z) = ln z / ln((1+z^2)/(1+z))`.
pub fn eval_h(z: CutPlanePoint) -> Result<Complex64> {
    pair(z).map(|p| p.0)
}

/// `H(z) = h(z) - 1`.
pub fn eval_big_h(z: CutPlanePoint) -> Result<Complex64> {
    pair(z).map(|p| p.1)
}

/// `G(z) = z H(z)`.
pub fn eval_g(z: CutPlanePoint) -> Result<Complex64> {
    eval_big_h(z).map(|h| z.z() * h)
}

/// `1 / (z^2 H(z))`.
pub fn eval_inv_z2h(z: CutPlanePoint) -> Result<Complex64> {
    let g = eval_g(z)?;
    checked(Complex64::new(1.0, 0.0) / (z.z() * g), z.z())
}

pub fn evaluate(id: FunctionId, z: CutPlanePoint) -> Result<Complex64> {
    let one = Complex64::new(1.0, 0.0);
    let zc = z.z();
    let value = match id {
        FunctionId::H => eval_big_h(z)?,
        FunctionId::LowerH => eval_h(z)?,
        FunctionId::G | FunctionId::XH => eval_g(z)?,
        FunctionId::InvZ2H | FunctionId::InvX2H => eval_inv_z2h(z)?,
        FunctionId::InvH => one / eval_big_h(z)?,
        FunctionId::InvXH => one / eval_g(z)?,
        FunctionId::X2H => zc * eval_g(z)?,
    };
    checked(value, zc)
}

/// Real-axis evaluation for `x > 0`.
pub fn evaluate_real(id: FunctionId, x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("{id} needs a positive argument, got {x}")));
    }
    evaluate(id, CutPlanePoint::real(x)?).map(|v| v.re)
}

/// `G(-t + i eps)`, just above the cut.
pub fn boundary_g(t: f64, eps: f64) -> Result<Complex64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("boundary point needs t > 0, got {t}")));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::Domain(format!("boundary offset needs 0 < eps <= 1, got {eps}")));
    }
    eval_g(CutPlanePoint::new(-t, eps)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryQuantity {
    /// `Re G(-t + i0)`
    ReG,
    /// `Im G(-t + i0)`
    ImG,
    /// `Im 1/(z^2 H(z))` at `z = -t + i0`
    ImInvZ2H,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryLimit {
    pub value: f64,
    pub error_estimate: f64,
    pub converged: bool,
}

/// Offsets `eps_k = 2^-k` used by [`boundary_limit`].
pub const EPS_EXPONENTS: std::ops::RangeInclusive<i32> = 10..=26;
const MAX_EXTRAPOLATION_COLUMNS: usize = 6;

/// Richardson-extrapolated limit of a boundary quantity as `eps -> 0+`.
///
/// The offsets halve at each step and the expansion is assumed to run in
/// integer powers of `eps`. The first diagonal entry that agrees with its
/// predecessor to `tol` is returned; otherwise the closest pair is, flagged
/// as non-converged when its gap exceeds `10 tol`.
pub fn boundary_limit(t: f64, which: BoundaryQuantity, tol: f64) -> Result<BoundaryLimit> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("boundary limit needs t > 0, got {t}")));
    }
    for bp in crate::densities::BREAKPOINTS {
        if (t - bp).abs() <= 1e-12 {
            return Err(Error::Domain(format!(
                "boundary limit requested at breakpoint {bp}; offset the point"
            )));
        }
    }
    let sample = |eps: f64| -> Result<f64> {
        let z = CutPlanePoint::new(-t, eps)?;
        Ok(match which {
            BoundaryQuantity::ReG => eval_g(z)?.re,
            BoundaryQuantity::ImG => eval_g(z)?.im,
            BoundaryQuantity::ImInvZ2H => eval_inv_z2h(z)?.im,
        })
    };

    let mut table: Vec<Vec<f64>> = Vec::new();
    let mut best: Option<(f64, f64)> = None;
    let mut previous: Option<f64> = None;
    for k in EPS_EXPONENTS {
        let eps = 2f64.powi(-k);
        let mut row = vec![sample(eps)?];
        if let Some(prev_row) = table.last() {
            let cols = (prev_row.len() + 1).min(MAX_EXTRAPOLATION_COLUMNS);
            for j in 1..cols {
                let factor = 2f64.powi(j as i32) - 1.0;
                let value = row[j - 1] + (row[j - 1] - prev_row[j - 1]) / factor;
                row.push(value);
            }
        }
        let estimate = *row.last().unwrap();
        table.push(row);
        if let Some(p) = previous {
            let gap = (estimate - p).abs();
            if best.map_or(true, |(_, g)| gap < g) {
                best = Some((estimate, gap));
            }
            if gap <= tol {
                return Ok(BoundaryLimit {
                    value: estimate,
                    error_estimate: gap,
                    converged: true,
                });
            }
        }
        previous = Some(estimate);
    }
    let (value, gap) = best.expect("at least two offsets are sampled");
    Ok(BoundaryLimit {
        value,
        error_estimate: gap,
        converged: gap <= 10.0 * tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pt(re: f64, im: f64) -> CutPlanePoint {
        CutPlanePoint::new(re, im).unwrap()
    }

    #[test]
    fn principal_log_examples() {
        let l = principal_log(pt(1.0, 0.0));
        assert_eq!(l, Complex64::new(0.0, 0.0));
        let l = principal_log(pt(-1.0, 1e-9));
        assert!((l.re).abs() < 1e-17);
        assert_relative_eq!(l.im, PI - 1e-9, epsilon = 1e-15);
        let l = principal_log(pt(0.0, 1.0));
        assert_relative_eq!(l.im, PI / 2.0);
        assert_eq!(l.re, 0.0);
    }

    #[test]
    fn cut_and_origin_are_rejected() {
        assert!(CutPlanePoint::new(-1.0, 0.0).is_err());
        assert!(CutPlanePoint::new(0.0, 0.0).is_err());
        assert!(CutPlanePoint::new(f64::NAN, 1.0).is_err());
        assert!(CutPlanePoint::new(-1.0, -1e-300).is_ok());
    }

    #[test]
    fn special_values_are_exact() {
        assert_eq!(eval_h(pt(1.0, 0.0)).unwrap(), Complex64::new(2.0, 0.0));
        assert_eq!(eval_big_h(pt(1.0, 0.0)).unwrap(), Complex64::new(1.0, 0.0));
        assert_eq!(eval_g(pt(1.0, 0.0)).unwrap(), Complex64::new(1.0, 0.0));
        assert_eq!(eval_inv_z2h(pt(1.0, 0.0)).unwrap(), Complex64::new(1.0, 0.0));
    }

    #[test]
    fn values_at_two() {
        let h = eval_h(pt(2.0, 0.0)).unwrap();
        assert_relative_eq!(h.re, 2f64.ln() / (5f64 / 3.0).ln(), max_relative = 1e-15);
        assert_eq!(h.im, 0.0);
        let big = eval_big_h(pt(2.0, 0.0)).unwrap();
        assert_relative_eq!(big.re, (6f64 / 5.0).ln() / (5f64 / 3.0).ln(), max_relative = 1e-14);
        assert_relative_eq!(big.re, h.re - 1.0, max_relative = 1e-14);
    }

    #[test]
    fn h_tends_to_one_at_infinity() {
        let h = eval_h(pt(1e12, 0.0)).unwrap().re;
        assert!((h - 1.0).abs() < 0.04, "h(1e12) = {h}");
        let h2 = eval_h(pt(1e200, 0.0)).unwrap().re;
        assert!((h2 - 1.0).abs() < (h - 1.0).abs());
    }

    #[test]
    fn big_h_equals_h_minus_one() {
        for &(re, im) in &[(0.3, 0.0), (2.0, 3.0), (5.0, -0.2), (0.01, 0.5), (-0.4, 0.9), (1.0005, 0.0)] {
            let z = pt(re, im);
            let h = eval_h(z).unwrap();
            let big = eval_big_h(z).unwrap();
            let diff = (big - (h - 1.0)).norm();
            assert!(diff <= 8.0 * f64::EPSILON * (1.0 + h.norm()), "z = {re}+{im}i: {diff}");
        }
    }

    #[test]
    fn conjugate_symmetry_at_sample_point() {
        let z = pt(2.0, 3.0);
        let g = eval_g(z).unwrap();
        let gc = eval_g(z.conj()).unwrap();
        assert!((gc - g.conj()).norm() <= 1e-15 * (1.0 + g.norm()));
    }

    #[test]
    fn reciprocal_identity() {
        let a = eval_big_h(pt(0.5, 0.0)).unwrap().re;
        let b = eval_big_h(pt(2.0, 0.0)).unwrap().re;
        assert_relative_eq!(a * b, 1.0, max_relative = 1e-14);
    }

    #[test]
    fn series_and_direct_paths_agree_on_annulus() {
        for k in 0..64 {
            let theta = k as f64 * PI / 32.0;
            for radius in [0.5 * SERIES_RADIUS, SERIES_RADIUS, 2.0 * SERIES_RADIUS] {
                let z = Complex64::new(1.0, 0.0) + Complex64::from_polar(radius, theta);
                let (hs, bigs) = series_pair(z);
                let logs = direct_logs(z);
                let hd = logs.ln_z / logs.ln_w;
                let bigd = logs.numerator / logs.ln_w;
                assert!((hs - hd).norm() <= 1e-10 * hd.norm(), "h at {z}");
                assert!((bigs - bigd).norm() <= 1e-10 * bigd.norm(), "H at {z}");
            }
        }
    }

    #[test]
    fn branch_point_flag_and_domain_error() {
        let i = pt(0.0, 1.0);
        assert!(near_branch_point(i));
        assert!(eval_h(i).is_err() || eval_h(i).unwrap().norm() < 1e-12);
        assert!(!near_branch_point(pt(0.0, 1.01)));
        assert!(near_branch_point(pt(1e-7, 1.0)));
    }

    #[test]
    fn phi1_series_matches_closed_form() {
        for &x in &[Complex64::new(0.4, 0.2), Complex64::new(-0.3, 0.1), Complex64::new(1e-9, 0.0)] {
            let closed = (Complex64::new(1.0, 0.0) - (-x).exp()) / x;
            assert!((complex_phi1(x) - closed).norm() < 1e-7 * closed.norm().max(1.0));
        }
        assert!((complex_phi1(Complex64::new(1e-12, 0.0)).re - 1.0).abs() < 1e-11);
    }

    #[test]
    fn function_ids_round_trip() {
        for id in FunctionId::ALL {
            assert_eq!(id.name().parse::<FunctionId>().unwrap(), id);
        }
        assert!("hh".parse::<FunctionId>().is_err());
    }

    #[test]
    fn boundary_limit_matches_closed_form_at_half() {
        let lim = boundary_limit(0.5, BoundaryQuantity::ImG, 1e-10).unwrap();
        assert!(lim.converged);
        let expect = -PI * 0.5 / 2.5f64.ln();
        assert!((lim.value - expect).abs() < 1e-9, "{} vs {expect}", lim.value);
    }

    #[test]
    fn boundary_at_one() {
        // Both parts approach their limits only like 1/ln(1/eps).
        let g = boundary_g(1.0, 1e-150).unwrap();
        assert!(g.im.abs() < 0.02, "{g}");
        assert!((g.re - 1.0).abs() < 0.02, "{g}");
        assert!(boundary_limit(1.0, BoundaryQuantity::ImG, 1e-8).is_err());
    }
}
