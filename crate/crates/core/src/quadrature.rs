//! Adaptive Gauss-Kronrod integration on finite panels and on `(0, inf)`.
//!
//! Semi-infinite integrals are taken in the logarithmic variable `u = ln t`.
//! The middle range is split at the density breakpoints and at the kernel
//! scale; both infinite ends are mapped onto `(0, 1]` by `u = u0 -+ (1/v - 1)`,
//! which turns `1/(t ln^2 t)`-type tails into bounded integrands.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::LN_2;
use std::fmt;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::eval::{complex_phi1, CutPlanePoint};

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

pub const NODES_PER_PANEL: usize = 15;
pub const MAX_DEPTH: u32 = 50;
pub const MAX_PANELS: usize = 4000;
/// Number of cutoff doublings examined by the divergence probe.
pub const DIVERGENCE_STEPS: usize = 10;

/// Values the integrator can accumulate.
pub trait QuadValue:
    Copy + Send + Sync + fmt::Debug + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
    fn finite(&self) -> bool;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
    fn finite(&self) -> bool {
        self.is_finite()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
    fn finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// Requested accuracy: the result is accepted once the error estimate is
/// below `max(abs, rel * |value|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tol {
    pub abs: f64,
    pub rel: f64,
}

impl Tol {
    pub fn new(abs: f64, rel: f64) -> Self {
        Self { abs, rel }
    }
    pub fn abs(abs: f64) -> Self {
        Self { abs, rel: 0.0 }
    }
    pub fn rel(rel: f64) -> Self {
        Self { abs: 0.0, rel }
    }
    pub fn bound(&self, magnitude: f64) -> f64 {
        self.abs.max(self.rel * magnitude)
    }
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            abs: self.abs * factor,
            rel: self.rel * factor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum QuadStatus {
    Converged,
    NotConverged,
    Divergent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureResult<V> {
    pub value: V,
    pub abs_error: f64,
    pub panels: usize,
    pub evals: usize,
    pub status: QuadStatus,
}

impl<V: QuadValue> QuadratureResult<V> {
    pub fn converged(&self) -> bool {
        self.status == QuadStatus::Converged
    }

    pub fn map<W>(self, f: impl FnOnce(V) -> W) -> QuadratureResult<W> {
        QuadratureResult {
            value: f(self.value),
            abs_error: self.abs_error,
            panels: self.panels,
            evals: self.evals,
            status: self.status,
        }
    }

    /// Converts a non-converged or divergent result into an error.
    pub fn into_result(self, what: &str) -> Result<Self> {
        match self.status {
            QuadStatus::Converged => Ok(self),
            QuadStatus::NotConverged => Err(Error::NonConvergence(format!(
                "{what}: error estimate {:.3e} after {} panels",
                self.abs_error, self.panels
            ))),
            QuadStatus::Divergent => Err(Error::Divergent(what.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Panel<V> {
    a: f64,
    b: f64,
    value: V,
    error: f64,
    depth: u32,
}

impl<V> PartialEq for Panel<V> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<V> Eq for Panel<V> {}
impl<V> PartialOrd for Panel<V> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<V> Ord for Panel<V> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

fn kronrod<V: QuadValue, F: Fn(f64) -> V>(f: &F, a: f64, b: f64, depth: u32) -> Panel<V> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut resk = fc * WGK[7];
    let mut resg = fc * WG[3];
    let mut resabs = fc.magnitude() * WGK[7];
    let mut finite = fc.finite();
    for j in 0..7 {
        let x = half * XGK[j];
        let f1 = f(center - x);
        let f2 = f(center + x);
        finite &= f1.finite() && f2.finite();
        resk = resk + (f1 + f2) * WGK[j];
        resabs += WGK[j] * (f1.magnitude() + f2.magnitude());
        if j % 2 == 1 {
            resg = resg + (f1 + f2) * WG[j / 2];
        }
    }
    let value = resk * half;
    let error = if finite {
        ((resk - resg) * half)
            .magnitude()
            .max(50.0 * f64::EPSILON * resabs * half.abs())
    } else {
        f64::INFINITY
    };
    Panel {
        a,
        b,
        value,
        error,
        depth,
    }
}

/// Globally adaptive 7/15-point Gauss-Kronrod integration of `f` over `[a, b]`.
///
/// The panel with the largest error is bisected until the summed estimate
/// drops below the tolerance. Panels that reach depth 50 are frozen; the
/// result is then reported as not converged if the budget is not met.
pub fn integrate_panel<V, F>(f: F, a: f64, b: f64, tol: Tol) -> Result<QuadratureResult<V>>
where
    V: QuadValue,
    F: Fn(f64) -> V,
{
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::Invalid(format!("integration bounds [{a}, {b}]")));
    }
    let mut heap = BinaryHeap::new();
    let mut frozen: Vec<Panel<V>> = Vec::new();
    let first = kronrod(&f, a, b, 0);
    let mut total_value = first.value;
    let mut total_error = first.error;
    heap.push(first);
    let mut evals = NODES_PER_PANEL;
    let mut status = QuadStatus::NotConverged;
    loop {
        if total_error.is_finite()
            && total_value.finite()
            && total_error <= tol.bound(total_value.magnitude())
        {
            status = QuadStatus::Converged;
            break;
        }
        if heap.len() + frozen.len() >= MAX_PANELS {
            break;
        }
        let Some(worst) = heap.pop() else { break };
        if worst.depth >= MAX_DEPTH {
            frozen.push(worst);
            continue;
        }
        let mid = 0.5 * (worst.a + worst.b);
        let left = kronrod(&f, worst.a, mid, worst.depth + 1);
        let right = kronrod(&f, mid, worst.b, worst.depth + 1);
        evals += 2 * NODES_PER_PANEL;
        let clean = worst.error.is_finite() && worst.value.finite();
        heap.push(left);
        heap.push(right);
        // Running sums are rebuilt when a non-finite panel leaves the set.
        if clean {
            total_value = total_value - worst.value + left.value + right.value;
            total_error += left.error + right.error - worst.error;
        } else {
            total_value = heap
                .iter()
                .chain(frozen.iter())
                .fold(V::zero(), |acc, p| acc + p.value);
            total_error = heap.iter().chain(frozen.iter()).map(|p| p.error).sum();
        }
    }
    let mut panels: Vec<Panel<V>> = heap.into_vec();
    panels.extend(frozen);
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    let value = panels.iter().fold(V::zero(), |acc, p| acc + p.value);
    let error: f64 = panels.iter().map(|p| p.error).sum();
    if !error.is_finite() || !value.finite() || !(error <= tol.bound(value.magnitude())) {
        status = QuadStatus::NotConverged;
    }
    Ok(QuadratureResult {
        value,
        abs_error: error,
        panels: panels.len(),
        evals,
        status,
    })
}

/// A non-negative weight on `(0, inf)`.
///
/// `scaled_at_log(u, s)` returns `d(e^u) * e^s`; implementations override it
/// when the density or the scale factor alone would overflow or underflow.
pub trait Density: Sync {
    fn at(&self, t: f64) -> f64;

    fn scaled_at_log(&self, u: f64, log_scale: f64) -> f64 {
        let v = self.at(u.exp());
        if v == 0.0 {
            0.0
        } else {
            v.signum() * (v.abs().ln() + log_scale).exp()
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// Adapts a closure to [`Density`].
pub struct FnDensity<F> {
    pub f: F,
    pub breakpoints: Vec<f64>,
}

impl<F: Fn(f64) -> f64 + Sync> FnDensity<F> {
    pub fn new(f: F) -> Self {
        Self {
            f,
            breakpoints: Vec::new(),
        }
    }
    pub fn with_breakpoints(f: F, breakpoints: Vec<f64>) -> Self {
        Self { f, breakpoints }
    }
}

impl<F: Fn(f64) -> f64 + Sync> Density for FnDensity<F> {
    fn at(&self, t: f64) -> f64 {
        (self.f)(t)
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.breakpoints.clone()
    }
}

/// `t^p d(t)`.
pub struct PowerWeighted<'a> {
    pub base: &'a dyn Density,
    pub power: f64,
}

impl Density for PowerWeighted<'_> {
    fn at(&self, t: f64) -> f64 {
        self.scaled_at_log(t.ln(), 0.0)
    }
    fn scaled_at_log(&self, u: f64, log_scale: f64) -> f64 {
        self.base.scaled_at_log(u, log_scale + self.power * u)
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.base.breakpoints()
    }
}

/// `e^log_factor d(t)`.
pub struct Scaled<'a> {
    pub base: &'a dyn Density,
    pub log_factor: f64,
}

impl Density for Scaled<'_> {
    fn at(&self, t: f64) -> f64 {
        self.scaled_at_log(t.ln(), 0.0)
    }
    fn scaled_at_log(&self, u: f64, log_scale: f64) -> f64 {
        self.base.scaled_at_log(u, log_scale + self.log_factor)
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.base.breakpoints()
    }
}

/// `d(t / c)`, the density stretched by `c = e^shift`.
pub struct Stretched<'a> {
    pub base: &'a dyn Density,
    pub shift: f64,
}

impl Density for Stretched<'_> {
    fn at(&self, t: f64) -> f64 {
        self.scaled_at_log(t.ln(), 0.0)
    }
    fn scaled_at_log(&self, u: f64, log_scale: f64) -> f64 {
        self.base.scaled_at_log(u - self.shift, log_scale)
    }
    fn breakpoints(&self) -> Vec<f64> {
        let c = self.shift.exp();
        self.base.breakpoints().into_iter().map(|b| b * c).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    /// `1 / (t + z)`
    Stieltjes(Complex64),
    /// `e^{-s t}`, `Re s > 0`
    Laplace(Complex64),
    /// `1 - e^{-z t}`
    Levy(Complex64),
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailHint {
    LogSlow,
    Exponential,
    Power(f64),
}

pub struct IntegrandSpec<'a> {
    pub density: &'a dyn Density,
    pub kernel: Kernel,
    pub breakpoints: Vec<f64>,
    pub tail: TailHint,
}

impl<'a> IntegrandSpec<'a> {
    pub fn new(density: &'a dyn Density, kernel: Kernel, tail: TailHint) -> Self {
        Self {
            breakpoints: density.breakpoints(),
            density,
            kernel,
            tail,
        }
    }

    /// `t d(t) K(t)` at `t = e^u`, i.e. the integrand in the variable `u`.
    fn log_integrand(&self, u: f64) -> Complex64 {
        let d = self.density;
        match self.kernel {
            Kernel::Raw => Complex64::new(d.scaled_at_log(u, u), 0.0),
            Kernel::Stieltjes(z) => {
                if u > 0.0 {
                    d.scaled_at_log(u, 0.0) / (1.0 + z * (-u).exp())
                } else {
                    d.scaled_at_log(u, u) / (u.exp() + z)
                }
            }
            Kernel::Laplace(s) => {
                let t = u.exp();
                let w = d.scaled_at_log(u, u - s.re * t);
                if w == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::from_polar(w, -s.im * t)
                }
            }
            Kernel::Levy(z) => {
                if u < 0.0 {
                    let t = u.exp();
                    z * complex_phi1(z * t) * d.scaled_at_log(u, 2.0 * u)
                } else {
                    let t = u.exp();
                    (1.0 - (-z * t).exp()) * d.scaled_at_log(u, u)
                }
            }
        }
    }

    fn kernel_scale(&self) -> f64 {
        match self.kernel {
            Kernel::Raw => 1.0,
            Kernel::Stieltjes(z) => z.norm(),
            Kernel::Laplace(s) | Kernel::Levy(s) => 1.0 / s.norm(),
        }
    }

    /// Upper cutoff for exponentially damped kernels.
    fn truncation(&self) -> Option<f64> {
        match (self.kernel, self.tail) {
            (Kernel::Laplace(s), _) => Some((50.0 / s.re).max(1e3)),
            _ => None,
        }
    }
}

const MIN_LOG_T: f64 = -708.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum End {
    Head,
    Tail,
}

fn compactified(spec: &IntegrandSpec, end: End, u0: f64, v: f64) -> Complex64 {
    let stretch = 1.0 / v - 1.0;
    let u = match end {
        End::Head => u0 - stretch,
        End::Tail => u0 + stretch,
    };
    let direct = spec.log_integrand(u);
    // a density evaluated at an underflowed t = 0 may blow up; continue the
    // integrand geometrically from its last two representable samples
    let f = if u < MIN_LOG_T && !direct.finite() {
        let a = spec.log_integrand(MIN_LOG_T);
        let b = spec.log_integrand(MIN_LOG_T + 1.0);
        if a == Complex64::new(0.0, 0.0) || b == Complex64::new(0.0, 0.0) {
            return Complex64::new(0.0, 0.0);
        }
        let rate = (a / b).ln();
        if rate.re >= 0.0 {
            return Complex64::new(f64::INFINITY, 0.0);
        }
        let x = MIN_LOG_T - u;
        let log_f = a.ln() + rate * x;
        if !(log_f.re > -745.0) {
            return Complex64::new(0.0, 0.0);
        }
        log_f.exp()
    } else {
        direct
    };
    if f == Complex64::new(0.0, 0.0) {
        f
    } else {
        f / (v * v)
    }
}

/// Increments of the integral over successive doublings of the cutoff at
/// one end. Diverges when no increment is small and they do not decrease.
fn probe_divergence(spec: &IntegrandSpec, end: End, u0: f64, tol_abs: f64) -> bool {
    let mut increments = Vec::with_capacity(DIVERGENCE_STEPS);
    for k in 0..DIVERGENCE_STEPS {
        let (lo, hi) = match end {
            End::Tail => (u0 + k as f64 * LN_2, u0 + (k + 1) as f64 * LN_2),
            End::Head => (u0 - (k + 1) as f64 * LN_2, u0 - k as f64 * LN_2),
        };
        let Ok(r) = integrate_panel(|u| spec.log_integrand(u), lo, hi, Tol::new(0.0, 1e-6)) else {
            return false;
        };
        if !r.value.finite() {
            return true;
        }
        increments.push(r.value.norm());
    }
    let first = increments[0];
    let last = increments[DIVERGENCE_STEPS - 1];
    let floor = 10.0 * tol_abs;
    increments.iter().all(|&d| d > floor) && last >= first
}

fn accumulate(
    parts: &[QuadratureResult<Complex64>],
) -> (Complex64, f64, usize, usize, bool) {
    let mut value = Complex64::new(0.0, 0.0);
    let mut error = 0.0;
    let mut panels = 0;
    let mut evals = 0;
    let mut ok = true;
    for p in parts {
        value += p.value;
        error += p.abs_error;
        panels += p.panels;
        evals += p.evals;
        ok &= p.converged();
    }
    (value, error, panels, evals, ok)
}

/// Integrates `d(t) K(t)` over `(0, inf)`.
pub fn integrate_semi_infinite(spec: &IntegrandSpec, tol: Tol) -> Result<QuadratureResult<Complex64>> {
    let mut points: Vec<f64> = spec
        .breakpoints
        .iter()
        .copied()
        .filter(|b| *b > 0.0 && b.is_finite())
        .collect();
    points.push(spec.kernel_scale());
    points.sort_by(f64::total_cmp);
    points.dedup();
    let mut cuts: Vec<f64> = points.iter().map(|p| p.ln()).collect();
    let u_head = cuts[0] - 1.0;
    let mut u_tail = cuts[cuts.len() - 1] + 1.0;
    let cutoff = spec.truncation().map(f64::ln);
    if let Some(uc) = cutoff {
        cuts.retain(|&c| c < uc);
        u_tail = u_tail.min(uc);
    }
    let mut edges = vec![u_head];
    edges.extend(cuts.iter().copied().filter(|&c| c > u_head && c < u_tail));
    edges.push(u_tail);

    let n_pieces = edges.len() + 1;
    let run = |tol: Tol| -> Result<Vec<QuadratureResult<Complex64>>> {
        let piece_tol = Tol::new(tol.abs / n_pieces as f64, tol.rel);
        let mut parts = Vec::with_capacity(n_pieces);
        parts.push(integrate_panel(
            |v| compactified(spec, End::Head, u_head, v),
            0.0,
            1.0,
            piece_tol,
        )?);
        for w in edges.windows(2) {
            if w[1] > w[0] {
                parts.push(integrate_panel(|u| spec.log_integrand(u), w[0], w[1], piece_tol)?);
            }
        }
        match cutoff {
            Some(uc) if uc > u_tail => {
                parts.push(integrate_panel(|u| spec.log_integrand(u), u_tail, uc, piece_tol)?)
            }
            Some(_) => {}
            None => parts.push(integrate_panel(
                |v| compactified(spec, End::Tail, u_tail, v),
                0.0,
                1.0,
                piece_tol,
            )?),
        }
        Ok(parts)
    };

    let mut parts = run(tol)?;
    let (mut value, mut error, mut panels, mut evals, mut ok) = accumulate(&parts);
    // Relative targets are met piece by piece; cancellation between pieces
    // can leave the sum short, so retry once with an absolute target.
    if ok && error > tol.bound(value.norm()) {
        let target = tol.bound(value.norm());
        let retry = run(Tol::abs(target))?;
        let (v, e, p, n, o) = accumulate(&retry);
        evals += n;
        value = v;
        error = e;
        panels = p;
        ok = o;
        parts = retry;
    }
    let mut status = if ok && value.finite() && error.is_finite() && error <= tol.bound(value.norm()) {
        QuadStatus::Converged
    } else {
        QuadStatus::NotConverged
    };
    if status != QuadStatus::Converged {
        let head_failed = !parts[0].converged();
        let tail_failed = cutoff.is_none() && !parts[parts.len() - 1].converged();
        let probe_tol = if value.finite() {
            tol.bound(value.norm())
        } else {
            tol.abs
        };
        if (head_failed && probe_divergence(spec, End::Head, u_head, probe_tol))
            || (tail_failed && probe_divergence(spec, End::Tail, u_tail, probe_tol))
        {
            status = QuadStatus::Divergent;
        }
    }
    Ok(QuadratureResult {
        value,
        abs_error: error,
        panels,
        evals,
        status,
    })
}

/// Integrates `d(t) K(t)` over `[lo, hi]` with `0 <= lo < hi < inf`,
/// splitting at the breakpoints inside the range.
pub fn integrate_between(
    spec: &IntegrandSpec,
    lo: f64,
    hi: f64,
    tol: Tol,
) -> Result<QuadratureResult<Complex64>> {
    if !(lo >= 0.0 && lo < hi && hi.is_finite()) {
        return Err(Error::Invalid(format!("integration range [{lo}, {hi}]")));
    }
    let u_hi = hi.ln();
    let mut cuts: Vec<f64> = spec
        .breakpoints
        .iter()
        .copied()
        .chain(std::iter::once(spec.kernel_scale()))
        .filter(|&b| b > lo && b < hi)
        .map(f64::ln)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let u_lo = if lo > 0.0 {
        lo.ln()
    } else {
        cuts.first().copied().unwrap_or(u_hi).min(u_hi) - 1.0
    };
    let mut edges = vec![u_lo];
    edges.extend(cuts.into_iter().filter(|&c| c > u_lo));
    edges.push(u_hi);
    let pieces = edges.len() + usize::from(lo == 0.0);
    let piece_tol = Tol::new(tol.abs / pieces as f64, tol.rel);
    let mut parts = Vec::new();
    if lo == 0.0 {
        parts.push(integrate_panel(
            |v| compactified(spec, End::Head, u_lo, v),
            0.0,
            1.0,
            piece_tol,
        )?);
    }
    for w in edges.windows(2) {
        if w[1] > w[0] {
            parts.push(integrate_panel(|u| spec.log_integrand(u), w[0], w[1], piece_tol)?);
        }
    }
    let (value, error, panels, evals, ok) = accumulate(&parts);
    let status = if ok && value.finite() && error <= tol.bound(value.norm()).max(tol.abs) {
        QuadStatus::Converged
    } else {
        QuadStatus::NotConverged
    };
    Ok(QuadratureResult {
        value,
        abs_error: error,
        panels,
        evals,
        status,
    })
}

/// `int_0^inf d(t) / (t + z) dt`.
pub fn stieltjes_transform(
    density: &dyn Density,
    z: CutPlanePoint,
    tol: Tol,
) -> Result<QuadratureResult<Complex64>> {
    let spec = IntegrandSpec::new(density, Kernel::Stieltjes(z.z()), TailHint::LogSlow);
    integrate_semi_infinite(&spec, tol)
}

/// `int_0^inf d(t) e^{-s t} dt` for real `s > 0`.
pub fn laplace_transform(density: &dyn Density, s: f64, tol: Tol) -> Result<QuadratureResult<f64>> {
    if !(s > 0.0) {
        return Err(Error::Domain(format!("Laplace transform needs s > 0, got {s}")));
    }
    laplace_transform_complex(density, Complex64::new(s, 0.0), tol).map(|r| r.map(|v| v.re))
}

/// `int_0^inf d(t) e^{-s t} dt` for `Re s > 0`.
pub fn laplace_transform_complex(
    density: &dyn Density,
    s: Complex64,
    tol: Tol,
) -> Result<QuadratureResult<Complex64>> {
    if !(s.re > 0.0) {
        return Err(Error::Domain(format!("Laplace transform needs Re s > 0, got {s}")));
    }
    let spec = IntegrandSpec::new(density, Kernel::Laplace(s), TailHint::Exponential);
    integrate_semi_infinite(&spec, tol)
}

/// `int_0^inf (1 - e^{-z t}) m(t) dt`.
pub fn levy_integral(
    levy_density: &dyn Density,
    z: CutPlanePoint,
    tol: Tol,
) -> Result<QuadratureResult<Complex64>> {
    if !(z.re > 0.0) {
        return Err(Error::Domain(format!(
            "Levy integral needs Re z > 0, got {}",
            z.z()
        )));
    }
    let spec = IntegrandSpec::new(levy_density, Kernel::Levy(z.z()), TailHint::LogSlow);
    integrate_semi_infinite(&spec, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{E, PI};

    #[test]
    fn constant_on_unit_interval() {
        let r = integrate_panel(|_| 1.0, 0.0, 1.0, Tol::abs(1e-13)).unwrap();
        assert!(r.converged());
        assert!((r.value - 1.0).abs() <= 1e-14);
        assert!(r.evals >= r.panels * NODES_PER_PANEL);
    }

    #[test]
    fn log_squared_antiderivative() {
        let f = |t: f64| 1.0 / (t * t.ln().powi(2));
        let r = integrate_panel(f, E, 10f64.exp(), Tol::abs(1e-12)).unwrap();
        assert!(r.converged());
        assert!((r.value - 0.9).abs() < 1e-12, "{}", r.value);
    }

    #[test]
    fn bad_bounds_are_rejected() {
        assert!(integrate_panel(|_| 1.0, 1.0, 1.0, Tol::abs(1e-8)).is_err());
        assert!(integrate_panel(|_| 1.0, 0.0, f64::INFINITY, Tol::abs(1e-8)).is_err());
    }

    #[test]
    fn complex_values_share_panels() {
        let r = integrate_panel(
            |t| Complex64::new(t.cos(), t.sin()),
            0.0,
            PI,
            Tol::abs(1e-13),
        )
        .unwrap();
        assert!((r.value - Complex64::new(0.0, 2.0)).norm() < 1e-13);
    }

    #[test]
    fn exponential_on_half_line() {
        let d = FnDensity::new(|t: f64| (-t).exp());
        let spec = IntegrandSpec::new(&d, Kernel::Raw, TailHint::Exponential);
        let r = integrate_semi_infinite(&spec, Tol::abs(1e-13)).unwrap();
        assert!(r.converged());
        assert!((r.value.re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn laplace_of_one() {
        let d = FnDensity::new(|_| 1.0);
        let r = laplace_transform(&d, 2.0, Tol::rel(1e-12)).unwrap();
        assert_relative_eq!(r.value, 0.5, max_relative = 1e-11);
    }

    #[test]
    fn log_slow_tail_via_substitution() {
        let d = FnDensity::new(|t: f64| if t > E { 1.0 / (t * t.ln().powi(2)) } else { 0.0 });
        let spec = IntegrandSpec {
            density: &d,
            kernel: Kernel::Raw,
            breakpoints: vec![E],
            tail: TailHint::LogSlow,
        };
        let r = integrate_semi_infinite(&spec, Tol::abs(1e-11)).unwrap();
        assert!(r.converged(), "{r:?}");
        assert!((r.value.re - 1.0).abs() < 1e-9, "{}", r.value);
    }

    #[test]
    fn stieltjes_of_exponential() {
        // int e^{-t}/(t+1) dt = e E_1(1)
        let d = FnDensity::new(|t: f64| (-t).exp());
        let z = CutPlanePoint::real(1.0).unwrap();
        let r = stieltjes_transform(&d, z, Tol::rel(1e-12)).unwrap();
        assert_relative_eq!(r.value.re, 0.596_347_362_323_194_1, max_relative = 1e-11);
        assert!(r.value.im.abs() < 1e-15);
    }

    #[test]
    fn log_divergence_at_zero_is_detected() {
        let d = FnDensity::new(|t: f64| if t < 1.0 { 1.0 / t } else { 0.0 });
        let spec = IntegrandSpec {
            density: &d,
            kernel: Kernel::Raw,
            breakpoints: vec![1.0],
            tail: TailHint::LogSlow,
        };
        let r = integrate_semi_infinite(&spec, Tol::abs(1e-8)).unwrap();
        assert_eq!(r.status, QuadStatus::Divergent);
    }

    #[test]
    fn power_divergence_at_infinity_is_detected() {
        let d = FnDensity::new(|t: f64| t);
        let z = CutPlanePoint::real(1.0).unwrap();
        let r = stieltjes_transform(&d, z, Tol::rel(1e-6)).unwrap();
        assert_eq!(r.status, QuadStatus::Divergent, "{r:?}");
    }

    #[test]
    fn levy_kernel_of_exponential_density() {
        // int (1 - e^{-zt}) e^{-t} dt = z / (1 + z)
        let d = FnDensity::new(|t: f64| (-t).exp());
        for &(re, im) in &[(1.0, 0.0), (0.5, 2.0), (1e-3, 0.0)] {
            let z = CutPlanePoint::new(re, im).unwrap();
            let r = levy_integral(&d, z, Tol::rel(1e-11)).unwrap();
            let expect = z.z() / (1.0 + z.z());
            assert!((r.value - expect).norm() < 1e-10 * expect.norm(), "{re}+{im}i");
        }
    }

    #[test]
    fn stretched_and_weighted_densities() {
        let base = FnDensity::with_breakpoints(|t: f64| (-t).exp(), vec![2.0]);
        let w = PowerWeighted { base: &base, power: 2.0 };
        assert_relative_eq!(w.at(3.0), 9.0 * (-3f64).exp(), max_relative = 1e-14);
        let s = Stretched { base: &base, shift: 2f64.ln() };
        assert_relative_eq!(s.at(4.0), (-2f64).exp(), max_relative = 1e-14);
        assert_relative_eq!(s.breakpoints()[0], 4.0, max_relative = 1e-15);
    }
}
