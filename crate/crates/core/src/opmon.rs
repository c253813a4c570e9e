//! Randomized Loewner-order trials for matrix monotonicity of finite order.
//!
//! A trial draws `A <= B` (so `B - A` is positive semi-definite), applies the
//! function through the spectral decomposition and records the smallest
//! eigenvalue of `f(B) - f(A)`.

use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{Property, PropertyReport, Witness};
use crate::densities::fmt_num;
use crate::error::{Error, Result};
use crate::eval::{evaluate_real, FunctionId};

pub const MAX_DIM: usize = 8;
pub const MAX_SWEEPS: usize = 30;
pub const DEFAULT_SPECTRUM: (f64, f64) = (0.05, 20.0);
pub const DEFAULT_TOL: f64 = 1e-8;
/// Share of trials whose spectrum contains a near-degenerate pair.
pub const CLUSTER_FRACTION: f64 = 0.05;
pub const CLUSTER_GAP: f64 = 1e-6;

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// Dense square complex matrix, row-major. Hermitian where the type says so.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub n: usize,
    pub data: Vec<Complex64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![zero(); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.n + j] = v;
    }

    pub fn adjoint(&self) -> Self {
        let n = self.n;
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, self.get(j, i).conj());
            }
        }
        m
    }

    pub fn matmul(&self, other: &Self) -> Self {
        let n = self.n;
        let mut m = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == zero() {
                    continue;
                }
                for j in 0..n {
                    m.data[i * n + j] += a * other.get(k, j);
                }
            }
        }
        m
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `U diag(d) U^H`.
    pub fn from_spectrum(u: &Self, d: &[f64]) -> Self {
        let n = u.n;
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = zero();
                for k in 0..n {
                    acc += u.get(i, k) * d[k] * u.get(j, k).conj();
                }
                m.set(i, j, acc);
            }
        }
        m
    }
}

/// A Hermitian matrix of dimension at most [`MAX_DIM`].
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(Matrix);

impl HermitianMatrix {
    /// Symmetrizes `(M + M^H) / 2` so the result is exactly Hermitian.
    pub fn hermitize(m: &Matrix) -> Result<Self> {
        if m.n == 0 || m.n > MAX_DIM || m.data.len() != m.n * m.n {
            return Err(Error::Invalid(format!("dimension {} outside 1..={MAX_DIM}", m.n)));
        }
        let adj = m.adjoint();
        let mut out = Matrix::zeros(m.n);
        for i in 0..m.n {
            for j in 0..m.n {
                let v = 0.5 * (m.get(i, j) + adj.get(i, j));
                out.set(i, j, if i == j { Complex64::new(v.re, 0.0) } else { v });
            }
        }
        Ok(Self(out))
    }

    pub fn diagonal(d: &[f64]) -> Result<Self> {
        let mut m = Matrix::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m.set(i, i, Complex64::new(v, 0.0));
        }
        Self::hermitize(&m)
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Invalid("matrix rows must form a square".into()));
        }
        let m = Matrix { n, data: rows.concat() };
        let h = Self::hermitize(&m)?;
        if h.0.sub(&m).frobenius() > 1e-12 * m.frobenius().max(1.0) {
            return Err(Error::Invalid("matrix is not Hermitian".into()));
        }
        Ok(h)
    }

    pub fn dim(&self) -> usize {
        self.0.n
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        Self::hermitize(&self.0.sub(&other.0))
    }

    /// `W A W^H` for unitary `W`.
    pub fn conjugate_by(&self, w: &Matrix) -> Result<Self> {
        Self::hermitize(&w.matmul(&self.0).matmul(&w.adjoint()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Eigen {
    /// Descending.
    pub values: Vec<f64>,
    /// Columns are the eigenvectors.
    pub vectors: Matrix,
}

fn off_diagonal(a: &Matrix) -> f64 {
    let mut s = 0.0;
    for i in 0..a.n {
        for j in 0..a.n {
            if i != j {
                s += a.get(i, j).norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// Cyclic Jacobi eigendecomposition `A = U diag(lambda) U^H`.
pub fn hermitian_eig(a: &HermitianMatrix) -> Result<Eigen> {
    let n = a.dim();
    let mut m = a.0.clone();
    let mut u = Matrix::identity(n);
    let scale = m.frobenius();
    let mut converged = off_diagonal(&m) <= f64::EPSILON * scale;
    let mut sweep = 0;
    while !converged && sweep < MAX_SWEEPS {
        for p in 0..n {
            for q in p + 1..n {
                let apq = m.get(p, q);
                let r = apq.norm();
                if r == 0.0 {
                    continue;
                }
                // Phase-rotate q so the pivot is real, then a real rotation.
                let phase = apq / r;
                let app = m.get(p, p).re;
                let aqq = m.get(q, q).re;
                let tau = (aqq - app) / (2.0 * r);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // J = [[c, s], [-s conj(phase), c conj(phase)]] on (p, q).
                let jpp = Complex64::new(c, 0.0);
                let jpq = Complex64::new(s, 0.0);
                let jqp = -s * phase.conj();
                let jqq = c * phase.conj();
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, mkp * jpp + mkq * jqp);
                    m.set(k, q, mkp * jpq + mkq * jqq);
                    let ukp = u.get(k, p);
                    let ukq = u.get(k, q);
                    u.set(k, p, ukp * jpp + ukq * jqp);
                    u.set(k, q, ukp * jpq + ukq * jqq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, jpp.conj() * mpk + jqp.conj() * mqk);
                    m.set(q, k, jpq.conj() * mpk + jqq.conj() * mqk);
                }
                m.set(p, q, zero());
                m.set(q, p, zero());
                m.set(p, p, Complex64::new(m.get(p, p).re, 0.0));
                m.set(q, q, Complex64::new(m.get(q, q).re, 0.0));
            }
        }
        sweep += 1;
        converged = off_diagonal(&m) <= f64::EPSILON * scale;
    }
    if !converged {
        return Err(Error::NonConvergence(format!(
            "Jacobi iteration after {MAX_SWEEPS} sweeps"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.get(j, j).re.total_cmp(&m.get(i, i).re));
    let values = order.iter().map(|&i| m.get(i, i).re).collect();
    let mut vectors = Matrix::zeros(n);
    for (col, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors.set(k, col, u.get(k, src));
        }
    }
    Ok(Eigen { values, vectors })
}

/// Scalar functions that can be lifted to matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MatrixFn {
    Function(FunctionId),
    /// `x^2`, the control that is not operator monotone.
    Square,
}

impl MatrixFn {
    pub fn name(&self) -> String {
        match self {
            MatrixFn::Function(id) => id.name().to_string(),
            MatrixFn::Square => "SQUARE".into(),
        }
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        match self {
            MatrixFn::Function(id) => evaluate_real(*id, x),
            MatrixFn::Square => Ok(x * x),
        }
    }
}

impl std::str::FromStr for MatrixFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "SQUARE" => Ok(MatrixFn::Square),
            _ => s.parse().map(MatrixFn::Function),
        }
    }
}

/// `U f(D) U^H`, re-Hermitized.
pub fn matrix_apply(f: MatrixFn, a: &HermitianMatrix) -> Result<HermitianMatrix> {
    let eig = hermitian_eig(a)?;
    if let Some(bad) = eig.values.iter().find(|&&v| !(v > 0.0)) {
        return Err(Error::Domain(format!(
            "eigenvalue {bad} outside (0, inf) for {}",
            f.name()
        )));
    }
    let fd = eig.values.iter().map(|&v| f.eval(v)).collect::<Result<Vec<_>>>()?;
    HermitianMatrix::hermitize(&Matrix::from_spectrum(&eig.vectors, &fd))
}

/// Random generator for trial `trial` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Haar-distributed unitary from Gram-Schmidt on a complex Gaussian matrix.
pub fn random_unitary<R: Rng>(n: usize, rng: &mut R) -> Matrix {
    loop {
        let mut cols: Vec<Vec<Complex64>> = (0..n)
            .map(|_| {
                (0..n)
                    .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                    .collect()
            })
            .collect();
        let mut ok = true;
        for j in 0..n {
            for _ in 0..2 {
                for i in 0..j {
                    let proj: Complex64 = (0..n).map(|k| cols[i][k].conj() * cols[j][k]).sum();
                    for k in 0..n {
                        let v = cols[i][k];
                        cols[j][k] -= proj * v;
                    }
                }
            }
            let norm = cols[j].iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            if norm < 1e-8 {
                ok = false;
                break;
            }
            for v in cols[j].iter_mut() {
                *v /= norm;
            }
        }
        if ok {
            let mut m = Matrix::zeros(n);
            for (j, col) in cols.iter().enumerate() {
                for (i, v) in col.iter().enumerate() {
                    m.set(i, j, *v);
                }
            }
            return m;
        }
    }
}

/// Draws `A <= B` with the spectrum of `A` in `[lo, hi]` and that of `B`
/// in `(0, 2 hi]`.
pub fn sample_ordered_pair<R: Rng>(
    n: usize,
    rng: &mut R,
    spectrum: (f64, f64),
) -> Result<(HermitianMatrix, HermitianMatrix)> {
    let (lo, hi) = spectrum;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::Invalid(format!("spectrum range [{lo}, {hi}]")));
    }
    if n == 0 || n > MAX_DIM {
        return Err(Error::Invalid(format!("dimension {n} outside 1..={MAX_DIM}")));
    }
    let (llo, lhi) = (lo.ln(), hi.ln());
    let mut eigs: Vec<f64> = (0..n).map(|_| rng.random_range(llo..=lhi).exp()).collect();
    if n >= 2 && rng.random_bool(CLUSTER_FRACTION) {
        let gap = CLUSTER_GAP * rng.random::<f64>();
        eigs[1] = (eigs[0] * (1.0 + gap)).min(hi);
    }
    let u = random_unitary(n, rng);
    let a = HermitianMatrix::hermitize(&Matrix::from_spectrum(&u, &eigs))?;
    let d: Vec<f64> = (0..n)
        .map(|_| {
            if rng.random_bool(0.3) {
                0.0
            } else {
                hi * rng.random::<f64>()
            }
        })
        .collect();
    let v = random_unitary(n, rng);
    let c = Matrix::from_spectrum(&v, &d);
    let b = HermitianMatrix::hermitize(&a.0.add(&c))?;
    Ok((a, b))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoewnerTrial {
    pub trial: usize,
    pub dim: usize,
    pub seed: u64,
    pub min_eig: f64,
    #[serde(rename = "norm_fB")]
    pub norm_fb: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Smallest eigenvalue of `f(B) - f(A)` and the spectral norm of `f(B)`.
pub fn loewner_gap(f: MatrixFn, a: &HermitianMatrix, b: &HermitianMatrix) -> Result<(f64, f64)> {
    let fa = matrix_apply(f, a)?;
    let fb = matrix_apply(f, b)?;
    let diff = hermitian_eig(&fb.sub(&fa)?)?;
    let norm = hermitian_eig(&fb)?
        .values
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    Ok((*diff.values.last().expect("dimension >= 1"), norm))
}

pub fn run_trial(f: MatrixFn, n: usize, seed: u64, trial: usize, spectrum: (f64, f64), tol: f64) -> LoewnerTrial {
    let mut rng = trial_rng(seed, trial as u64);
    let outcome = sample_ordered_pair(n, &mut rng, spectrum).and_then(|(a, b)| loewner_gap(f, &a, &b));
    match outcome {
        Ok((min_eig, norm_fb)) => LoewnerTrial {
            trial,
            dim: n,
            seed,
            min_eig,
            norm_fb,
            pass: min_eig >= -tol * norm_fb,
            error: None,
        },
        Err(e) => LoewnerTrial {
            trial,
            dim: n,
            seed,
            min_eig: f64::NAN,
            norm_fb: f64::NAN,
            pass: false,
            error: Some(e.to_string()),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OpmonReport {
    pub report: PropertyReport,
    pub trials: Vec<LoewnerTrial>,
}

/// Runs `trials` Loewner trials at dimension `n`.
pub fn check_operator_monotone(
    f: MatrixFn,
    n: usize,
    trials: usize,
    seed: u64,
    tol: f64,
    spectrum: (f64, f64),
) -> Result<OpmonReport> {
    if n == 0 || n > MAX_DIM {
        return Err(Error::Invalid(format!("dimension {n} outside 1..={MAX_DIM}")));
    }
    if trials == 0 {
        return Err(Error::Invalid("at least one trial is required".into()));
    }
    let results: Vec<LoewnerTrial> = (0..trials)
        .into_par_iter()
        .map(|i| run_trial(f, n, seed, i, spectrum, tol))
        .collect();
    let mut report = PropertyReport {
        property: Property::OperatorMonotone,
        function: f.name(),
        grid: format!("loewner:dim={n}:trials={trials}:seed={seed}:spectrum={}:{}", spectrum.0, spectrum.1),
        max_order: n,
        pass: results.iter().all(|t| t.pass),
        worst_violation: 0.0,
        witness: None,
        notes: Vec::new(),
    };
    for t in &results {
        if let Some(e) = &t.error {
            report.notes.push(format!("trial {} (seed {}): {e}", t.trial, t.seed));
            continue;
        }
        let violation = (-t.min_eig / t.norm_fb).max(0.0);
        if violation > report.worst_violation || (!t.pass && report.witness.is_none()) {
            report.worst_violation = violation;
            report.witness = Some(Witness {
                x: t.trial as f64,
                k: n,
                value: t.min_eig,
                im: None,
            });
        }
    }
    if !report.pass {
        let failing = results.iter().filter(|t| !t.pass).count();
        report.notes.push(format!(
            "{failing} failing trials; rerun trial i with stream i of seed {seed}"
        ));
    }
    Ok(OpmonReport { report, trials: results })
}

pub fn write_trial_csv<W: Write>(out: &mut W, trials: &[LoewnerTrial]) -> Result<()> {
    writeln!(out, "trial,dim,seed,min_eig,norm_fB,pass")?;
    for t in trials {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            t.trial,
            t.dim,
            t.seed,
            fmt_num(t.min_eig),
            fmt_num(t.norm_fb),
            t.pass
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn diagonal_eigenvalues() {
        let a = HermitianMatrix::diagonal(&[1.0, 3.0]).unwrap();
        let e = hermitian_eig(&a).unwrap();
        assert_eq!(e.values, vec![3.0, 1.0]);
        assert_relative_eq!(e.vectors.get(1, 0).norm(), 1.0);
        assert_relative_eq!(e.vectors.get(0, 1).norm(), 1.0);
    }

    #[test]
    fn classic_two_by_two() {
        let a = HermitianMatrix::from_rows(&[vec![c(2.0, 0.0), c(1.0, 0.0)], vec![c(1.0, 0.0), c(2.0, 0.0)]])
            .unwrap();
        let e = hermitian_eig(&a).unwrap();
        assert_relative_eq!(e.values[0], 3.0, max_relative = 1e-15);
        assert_relative_eq!(e.values[1], 1.0, max_relative = 1e-15);
    }

    #[test]
    fn complex_pivot_is_handled() {
        let a = HermitianMatrix::from_rows(&[vec![c(1.0, 0.0), c(0.0, 2.0)], vec![c(0.0, -2.0), c(1.0, 0.0)]])
            .unwrap();
        let e = hermitian_eig(&a).unwrap();
        assert_relative_eq!(e.values[0], 3.0, max_relative = 1e-14);
        assert_relative_eq!(e.values[1], -1.0, max_relative = 1e-14);
    }

    #[test]
    fn non_hermitian_rows_are_rejected() {
        let rows = [vec![c(1.0, 0.0), c(1.0, 0.0)], vec![c(0.0, 0.0), c(1.0, 0.0)]];
        assert!(HermitianMatrix::from_rows(&rows).is_err());
        assert!(HermitianMatrix::diagonal(&[1.0; 9]).is_err());
    }

    #[test]
    fn identity_maps_through_x2h() {
        let a = HermitianMatrix::diagonal(&[1.0, 1.0]).unwrap();
        let f = matrix_apply(MatrixFn::Function(FunctionId::X2H), &a).unwrap();
        assert_eq!(f.matrix(), &Matrix::identity(2));
        let one = HermitianMatrix::diagonal(&[1.0]).unwrap();
        let g = matrix_apply(MatrixFn::Function(FunctionId::InvXH), &one).unwrap();
        assert_eq!(g.matrix().get(0, 0), c(1.0, 0.0));
    }

    #[test]
    fn spectrum_outside_domain_is_rejected() {
        let a = HermitianMatrix::diagonal(&[1.0, -0.5]).unwrap();
        assert!(matches!(
            matrix_apply(MatrixFn::Function(FunctionId::X2H), &a),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn pairs_are_reproducible_and_ordered() {
        let (a1, b1) = sample_ordered_pair(4, &mut trial_rng(42, 0), DEFAULT_SPECTRUM).unwrap();
        let (a2, b2) = sample_ordered_pair(4, &mut trial_rng(42, 0), DEFAULT_SPECTRUM).unwrap();
        assert_eq!(a1, a2);
        assert_eq!(b1, b2);
        let gap = hermitian_eig(&b1.sub(&a1).unwrap()).unwrap();
        assert!(*gap.values.last().unwrap() >= -1e-14 * b1.matrix().frobenius());
        let (a3, _) = sample_ordered_pair(4, &mut trial_rng(42, 1), DEFAULT_SPECTRUM).unwrap();
        assert_ne!(a1, a3);
    }

    #[test]
    fn trial_csv_has_header_and_rows() {
        let r = check_operator_monotone(MatrixFn::Function(FunctionId::X2H), 2, 3, 7, DEFAULT_TOL, DEFAULT_SPECTRUM)
            .unwrap();
        let mut buf = Vec::new();
        write_trial_csv(&mut buf, &r.trials).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "trial,dim,seed,min_eig,norm_fB,pass");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0,2,7,"));
    }
}
