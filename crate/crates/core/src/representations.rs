//! Quadrature-versus-direct checks of the integral representations.
//!
//! Each representation pairs a directly evaluated left side with an integral
//! right side. Two displays are rearrangements of individually divergent
//! integrals; they are checked through their combined integrands and through
//! finite-cutoff splits.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::densities::{selected_sigma, DensityFn, HRepKernel, LaplaceDensity, SigmaCandidate};
use crate::error::{Error, Result};
use crate::eval::{eval_big_h, eval_g, eval_inv_z2h, gate, CutPlanePoint};
use crate::quadrature::{
    integrate_between, integrate_panel, integrate_semi_infinite, laplace_transform_complex,
    levy_integral, stieltjes_transform, IntegrandSpec, Kernel, PowerWeighted, QuadStatus,
    QuadratureResult, TailHint, Tol,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum RepresentationId {
    #[serde(rename = "STIELTJES_G")]
    StieltjesG,
    #[serde(rename = "STIELTJES_INV_Z2H")]
    StieltjesInvZ2H,
    #[serde(rename = "LAPLACE_H")]
    LaplaceH,
    #[serde(rename = "BERNSTEIN_INV_H")]
    BernsteinInvH,
    #[serde(rename = "LK_INV_ZH")]
    LkInvZH,
    #[serde(rename = "LK_Z2H")]
    LkZ2H,
    #[serde(rename = "STIELTJES_H_SPLIT")]
    StieltjesHSplit,
}

impl RepresentationId {
    pub const ALL: [RepresentationId; 7] = [
        RepresentationId::StieltjesG,
        RepresentationId::StieltjesInvZ2H,
        RepresentationId::LaplaceH,
        RepresentationId::BernsteinInvH,
        RepresentationId::LkInvZH,
        RepresentationId::LkZ2H,
        RepresentationId::StieltjesHSplit,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            RepresentationId::StieltjesG => "STIELTJES_G",
            RepresentationId::StieltjesInvZ2H => "STIELTJES_INV_Z2H",
            RepresentationId::LaplaceH => "LAPLACE_H",
            RepresentationId::BernsteinInvH => "BERNSTEIN_INV_H",
            RepresentationId::LkInvZH => "LK_INV_ZH",
            RepresentationId::LkZ2H => "LK_Z2H",
            RepresentationId::StieltjesHSplit => "STIELTJES_H_SPLIT",
        }
    }

    /// Relative tolerance used when none is given.
    pub fn default_tolerance(&self) -> f64 {
        match self {
            RepresentationId::StieltjesInvZ2H
            | RepresentationId::BernsteinInvH
            | RepresentationId::LkInvZH
            | RepresentationId::LkZ2H => 1e-5,
            _ => 1e-6,
        }
    }

    pub fn needs_right_half_plane(&self) -> bool {
        matches!(
            self,
            RepresentationId::LkInvZH | RepresentationId::LkZ2H | RepresentationId::LaplaceH
        )
    }

    pub fn lhs(&self, z: CutPlanePoint) -> Result<Complex64> {
        let zc = z.z();
        Ok(match self {
            RepresentationId::StieltjesG => eval_g(z)?,
            RepresentationId::StieltjesInvZ2H => eval_inv_z2h(z)?,
            RepresentationId::LaplaceH | RepresentationId::StieltjesHSplit => eval_big_h(z)?,
            RepresentationId::BernsteinInvH => 1.0 / eval_big_h(z)?,
            RepresentationId::LkInvZH => 1.0 / eval_g(z)?,
            RepresentationId::LkZ2H => zc * eval_g(z)?,
        })
    }

    /// The integral side, using `sigma` wherever the `1/(z^2 H)` density enters.
    pub fn rhs(
        &self,
        z: CutPlanePoint,
        tol: Tol,
        sigma: SigmaCandidate,
    ) -> Result<QuadratureResult<Complex64>> {
        let zc = z.z();
        let sigma = DensityFn::Sigma(sigma);
        let inner = tol.scaled(0.1);
        Ok(match self {
            RepresentationId::StieltjesG => stieltjes_transform(&DensityFn::Rho, z, tol)?,
            RepresentationId::StieltjesInvZ2H => stieltjes_transform(&sigma, z, tol)?,
            RepresentationId::LaplaceH => {
                laplace_transform_complex(&HRepKernel { tol: inner }, zc, tol)?
            }
            RepresentationId::BernsteinInvH => {
                stieltjes_transform(&sigma, z, tol)?.map(|v| zc * zc * v)
            }
            RepresentationId::LkInvZH => {
                levy_integral(&LaplaceDensity::new(sigma, 1.0, inner), z, tol)?
            }
            RepresentationId::LkZ2H => {
                levy_integral(&LaplaceDensity::new(DensityFn::Rho, 1.0, inner), z, tol)?
            }
            RepresentationId::StieltjesHSplit => {
                stieltjes_transform(&DensityFn::Rho, z, tol)?.map(|v| v / zc)
            }
        })
    }

    /// The amount by which the jump of the closed form across the arc
    /// `|z + 1| = sqrt 2, Re z < 0` shifts the left side away from the
    /// integral side.
    pub fn arc_correction(&self, z: CutPlanePoint) -> Result<Complex64> {
        let zc = z.z();
        Ok(match self {
            RepresentationId::StieltjesG => arc_jump_correction(ArcTarget::G, zc)?,
            RepresentationId::StieltjesInvZ2H => arc_jump_correction(ArcTarget::InvZ2H, zc)?,
            RepresentationId::LaplaceH | RepresentationId::StieltjesHSplit => {
                arc_jump_correction(ArcTarget::G, zc)? / zc
            }
            RepresentationId::BernsteinInvH => {
                zc * zc * arc_jump_correction(ArcTarget::InvZ2H, zc)?
            }
            RepresentationId::LkInvZH => zc * arc_jump_correction(ArcTarget::InvZ2H, zc)?,
            RepresentationId::LkZ2H => zc * arc_jump_correction(ArcTarget::G, zc)?,
        })
    }
}

impl fmt::Display for RepresentationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RepresentationId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        RepresentationId::ALL
            .iter()
            .copied()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown representation '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualPoint {
    pub z_re: f64,
    pub z_im: f64,
    pub lhs_re: f64,
    pub lhs_im: f64,
    pub rhs_re: f64,
    pub rhs_im: f64,
    pub abs_res: f64,
    pub rel_res: f64,
    /// Quadrature error estimate relative to `|lhs|`.
    pub quad_err: f64,
    pub status: QuadStatus,
}

impl ResidualPoint {
    pub fn passes(&self, tol: f64) -> bool {
        self.status == QuadStatus::Converged && self.rel_res <= tol.max(10.0 * self.quad_err)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub rep: RepresentationId,
    pub points: Vec<ResidualPoint>,
    pub max_rel_res: f64,
    pub pass: bool,
}

/// Quadrature accuracy requested for a residual at tolerance `tol`.
fn quadrature_tol(tol: f64) -> Tol {
    Tol::new(1e-15, tol * 1e-2)
}

pub fn residual(rep: RepresentationId, z: CutPlanePoint, tol: f64) -> Result<ResidualPoint> {
    residual_with(rep, z, tol, selected_sigma()?)
}

pub fn residual_with(
    rep: RepresentationId,
    z: CutPlanePoint,
    tol: f64,
    sigma: SigmaCandidate,
) -> Result<ResidualPoint> {
    gate(z)?;
    if rep.needs_right_half_plane() && !(z.re > 0.0) {
        return Err(Error::Gating(format!("{rep} needs Re z > 0, got {}", z.z())));
    }
    let lhs = rep.lhs(z)?;
    let rhs = rep.rhs(z, quadrature_tol(tol), sigma)?;
    let scale = lhs.norm();
    let abs_res = (lhs - rhs.value).norm();
    Ok(ResidualPoint {
        z_re: z.re,
        z_im: z.im,
        lhs_re: lhs.re,
        lhs_im: lhs.im,
        rhs_re: rhs.value.re,
        rhs_im: rhs.value.im,
        abs_res,
        rel_res: abs_res / scale,
        quad_err: rhs.abs_error / scale,
        status: rhs.status,
    })
}

/// `{0.1, 0.5, 1, 2, 10, 100, 1+i, 3-2i, 0.5+2i}`.
pub fn default_points() -> Vec<CutPlanePoint> {
    [
        (0.1, 0.0),
        (0.5, 0.0),
        (1.0, 0.0),
        (2.0, 0.0),
        (10.0, 0.0),
        (100.0, 0.0),
        (1.0, 1.0),
        (3.0, -2.0),
        (0.5, 2.0),
    ]
    .into_iter()
    .map(|(re, im)| CutPlanePoint::new(re, im).expect("default points are off the cut"))
    .collect()
}

pub fn verify_representation(
    rep: RepresentationId,
    points: &[CutPlanePoint],
    tol: f64,
) -> Result<ResidualReport> {
    verify_with_sigma(rep, points, tol, selected_sigma()?)
}

pub fn verify_with_sigma(
    rep: RepresentationId,
    points: &[CutPlanePoint],
    tol: f64,
    sigma: SigmaCandidate,
) -> Result<ResidualReport> {
    if points.is_empty() {
        return Err(Error::Invalid("empty point list".into()));
    }
    let results: Vec<ResidualPoint> = points
        .par_iter()
        .map(|&z| residual_with(rep, z, tol, sigma))
        .collect::<Result<_>>()?;
    let max_rel_res = results.iter().map(|p| p.rel_res).fold(0.0, f64::max);
    let pass = results.iter().all(|p| p.passes(tol));
    Ok(ResidualReport {
        rep,
        points: results,
        max_rel_res,
        pass,
    })
}

/// Functions whose jump across the arc is integrated by [`arc_jump_correction`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArcTarget {
    /// `zH(z)`
    G,
    /// `1/(z^2 H(z))`
    InvZ2H,
}

/// `f(z)` minus the Stieltjes transform of its boundary density, computed as
/// the Cauchy integral of the jump of `f` across the arcs
/// `w = -1 + sqrt 2 e^{±i phi}`, `pi/4 < phi < pi`.
///
/// On the arcs `(1+w^2)/(1+w)` is a negative real number `-q`, so the two
/// sides differ only in the sign of `i pi` in `ln(-q)`.
pub fn arc_jump_correction(target: ArcTarget, z: Complex64) -> Result<Complex64> {
    let upper = arc_integral(target, z)?;
    let lower = arc_integral(target, z.conj())?.conj();
    Ok(upper + lower)
}

fn arc_integral(target: ArcTarget, z: Complex64) -> Result<Complex64> {
    let i = Complex64::new(0.0, 1.0);
    let integrand = |phi: f64| -> Complex64 {
        let e = Complex64::from_polar(1.0, phi);
        let w = -1.0 + std::f64::consts::SQRT_2 * e;
        let dw = i * std::f64::consts::SQRT_2 * e;
        let q = ((1.0 + w * w) / (1.0 + w)).norm().ln();
        let ln_w = w.ln();
        let g_in = w * (ln_w / Complex64::new(q, -PI) - 1.0);
        let g_out = w * (ln_w / Complex64::new(q, PI) - 1.0);
        let jump = match target {
            ArcTarget::G => g_in - g_out,
            ArcTarget::InvZ2H => 1.0 / (w * g_in) - 1.0 / (w * g_out),
        };
        jump / (w - z) * dw / (2.0 * PI * i)
    };
    let r = integrate_panel(integrand, PI / 4.0, PI, Tol::new(1e-14, 1e-12))?;
    Ok(r.into_result("arc jump integral")?.value)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArcCheck {
    pub z_re: f64,
    pub z_im: f64,
    pub rel_res: f64,
    pub corrected_rel_res: f64,
}

/// Residuals of `rep` before and after adding the arc correction to the
/// integral side.
pub fn arc_diagnostic(
    rep: RepresentationId,
    points: &[CutPlanePoint],
    tol: f64,
) -> Result<Vec<ArcCheck>> {
    let sigma = selected_sigma()?;
    points
        .par_iter()
        .map(|&z| {
            let p = residual_with(rep, z, tol, sigma)?;
            let lhs = Complex64::new(p.lhs_re, p.lhs_im);
            let rhs = Complex64::new(p.rhs_re, p.rhs_im) + rep.arc_correction(z)?;
            Ok(ArcCheck {
                z_re: z.re,
                z_im: z.im,
                rel_res: p.rel_res,
                corrected_rel_res: (lhs - rhs).norm() / lhs.norm(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitStep {
    pub cutoff: f64,
    pub first_re: f64,
    pub first_im: f64,
    pub second_re: f64,
    pub second_im: f64,
    pub sum_re: f64,
    pub sum_im: f64,
    /// `|sum - combined|`
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitReport {
    pub rep: RepresentationId,
    pub z_re: f64,
    pub z_im: f64,
    pub combined_re: f64,
    pub combined_im: f64,
    /// Status of the first displayed term integrated over all of `(0, inf)`.
    pub first_term_status: QuadStatus,
    pub steps: Vec<SplitStep>,
    pub converging: bool,
}

/// Finite-cutoff evaluation of the two-term displays.
///
/// * `STIELTJES_H_SPLIT`: `(1/z) int rho/t - int rho/(t(t+z))` over `[1/T, T]`.
/// * `BERNSTEIN_INV_H`: `z int sigma - int t sigma z/(t+z)` over `(0, T]`.
pub fn truncated_split(
    rep: RepresentationId,
    z: CutPlanePoint,
    cutoffs: &[f64],
    tol: f64,
) -> Result<SplitReport> {
    let zc = z.z();
    let qtol = quadrature_tol(tol);
    let sigma = DensityFn::Sigma(selected_sigma()?);
    let combined = rep.rhs(z, qtol, selected_sigma()?)?.into_result("combined form")?.value;
    let (base, first_power, lower): (DensityFn, f64, fn(f64) -> f64) = match rep {
        RepresentationId::StieltjesHSplit => (DensityFn::Rho, -1.0, |t| 1.0 / t),
        RepresentationId::BernsteinInvH => (sigma, 0.0, |_| 0.0),
        other => {
            return Err(Error::Invalid(format!("{other} has no split display")));
        }
    };
    let first_density = PowerWeighted { base: &base, power: first_power };
    let second_density = PowerWeighted { base: &base, power: first_power + 1.0 };
    let first_spec = IntegrandSpec::new(&first_density, Kernel::Raw, TailHint::LogSlow);
    let second_spec =
        IntegrandSpec::new(&second_density, Kernel::Stieltjes(zc), TailHint::LogSlow);
    let first_term_status = integrate_semi_infinite(&first_spec, qtol)?.status;

    let mut steps = Vec::new();
    for &cutoff in cutoffs {
        let lo = lower(cutoff);
        let a = integrate_between(&first_spec, lo, cutoff, qtol)?
            .into_result("first split term")?
            .value;
        let b = integrate_between(&second_spec, lo, cutoff, qtol)?
            .into_result("second split term")?
            .value;
        let (first, second) = match rep {
            RepresentationId::StieltjesHSplit => (a / zc, b / zc),
            _ => (zc * a, zc * b),
        };
        let sum = first - second;
        steps.push(SplitStep {
            cutoff,
            first_re: first.re,
            first_im: first.im,
            second_re: second.re,
            second_im: second.im,
            sum_re: sum.re,
            sum_im: sum.im,
            distance: (sum - combined).norm(),
        });
    }
    let converging = steps.windows(2).all(|w| w[1].distance < w[0].distance);
    Ok(SplitReport {
        rep,
        z_re: z.re,
        z_im: z.im,
        combined_re: combined.re,
        combined_im: combined.im,
        first_term_status,
        steps,
        converging,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(re: f64, im: f64) -> CutPlanePoint {
        CutPlanePoint::new(re, im).unwrap()
    }

    #[test]
    fn names_round_trip() {
        for r in RepresentationId::ALL {
            assert_eq!(r.name().parse::<RepresentationId>().unwrap(), r);
        }
    }

    #[test]
    fn gating_rejects_points() {
        assert!(matches!(
            residual(RepresentationId::StieltjesG, pt(-3.0, 0.1), 1e-6),
            Err(Error::Gating(_))
        ));
        assert!(matches!(
            residual(RepresentationId::LkZ2H, pt(-0.5, 1.0), 1e-5),
            Err(Error::Gating(_))
        ));
        assert!(matches!(
            residual(RepresentationId::StieltjesG, pt(0.0, 1.005), 1e-6),
            Err(Error::Gating(_))
        ));
    }

    #[test]
    fn stieltjes_rhs_at_one_matches_reference_quadrature() {
        // 30-digit reference value of int rho(t)/(t+1) dt.
        let r = RepresentationId::StieltjesG
            .rhs(pt(1.0, 0.0), Tol::rel(1e-11), SigmaCandidate::B)
            .unwrap();
        assert!((r.value.re - 0.993_558_796_462_553_5).abs() < 1e-10, "{}", r.value);
    }

    #[test]
    fn arc_correction_closes_the_gap() {
        for z in [pt(2.0, 0.0), pt(1.0, 1.0)] {
            let checks = arc_diagnostic(RepresentationId::StieltjesG, &[z], 1e-8).unwrap();
            assert!(checks[0].rel_res > 1e-3);
            assert!(checks[0].corrected_rel_res < 1e-8, "{checks:?}");
        }
    }

    #[test]
    fn rhs_is_conjugate_symmetric() {
        let z = pt(3.0, -2.0);
        let a = RepresentationId::StieltjesG.rhs(z, Tol::rel(1e-10), SigmaCandidate::B).unwrap();
        let b = RepresentationId::StieltjesG
            .rhs(z.conj(), Tol::rel(1e-10), SigmaCandidate::B)
            .unwrap();
        assert!((a.value - b.value.conj()).norm() < 1e-12);
    }
}
