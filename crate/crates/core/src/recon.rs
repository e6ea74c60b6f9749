//! Sparse spectrum recovery from compressive samples.
//!
//! Synthesis form: `min ||f||_1` subject to `||y - A f||_2 <= eps` (equality
//! when `eps = 0`), solved with scaled ADMM where the `f`-step is an exact
//! projection onto the constraint set.
//!
//! Analysis form: `min ||B f||_1` under the same constraint, with `B` the
//! banded smoothing operator. Solved with linearized ADMM so `B` is only ever
//! applied, never inverted.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::npt::{raise_power, NptOrder};
use crate::scalar::{dist2, norm1, norm2, soft_threshold, zeros, Real};
use crate::sensing::{forward_operator, measure, ForwardOperator, LinearOperator, MeasurementModel, MeasurementVector, SensingKind};
use crate::sigsyn::BasebandRecord;
use crate::spectrum::{SolverReport, SpectrumEstimate};

/// `(B f)_i = f_i - w_i * sum_{0 < |i-j| <= l} f_j`, truncated at the edges.
///
/// `w_i = 1/(2l)` on every row unless `renormalize` is set, in which case
/// truncated rows use `1 / (number of in-range neighbours)` so they also sum
/// to zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmoothingOperator {
    pub l_half: usize,
    pub size: usize,
    pub renormalize: bool,
}

pub fn build_smoothing(size: usize, l_half: usize) -> Result<SmoothingOperator> {
    SmoothingOperator::new(size, l_half, false)
}

impl SmoothingOperator {
    pub fn new(size: usize, l_half: usize, renormalize: bool) -> Result<Self> {
        if l_half < 1 || 4 * l_half > size {
            return Err(param(format!("smoothing half-width {l_half} outside [1, {}]", size / 4)));
        }
        Ok(Self {
            l_half,
            size,
            renormalize,
        })
    }

    fn neighbours(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.l_half)..(i + self.l_half + 1).min(self.size)
    }

    fn weight(&self, i: usize) -> f64 {
        if self.renormalize {
            1.0 / (self.neighbours(i).len() - 1) as f64
        } else {
            1.0 / (2 * self.l_half) as f64
        }
    }

    pub fn is_interior(&self, i: usize) -> bool {
        i >= self.l_half && i + self.l_half < self.size
    }

    pub fn apply<T: Real>(&self, f: &[Complex<T>]) -> Vec<Complex<T>> {
        assert_eq!(f.len(), self.size, "smoothing operator size mismatch");
        (0..self.size)
            .map(|i| {
                let sum = self
                    .neighbours(i)
                    .filter(|&j| j != i)
                    .fold(Complex::new(T::zero(), T::zero()), |acc, j| acc + f[j]);
                f[i] - sum * T::lit(self.weight(i))
            })
            .collect()
    }

    /// `B^T g` (`B` is real, so this is also the adjoint).
    pub fn apply_transpose<T: Real>(&self, g: &[Complex<T>]) -> Vec<Complex<T>> {
        assert_eq!(g.len(), self.size, "smoothing operator size mismatch");
        let mut out = g.to_vec();
        for (i, &gi) in g.iter().enumerate() {
            let w = gi * T::lit(self.weight(i));
            for j in self.neighbours(i).filter(|&j| j != i) {
                out[j] = out[j] - w;
            }
        }
        out
    }

    /// Upper bound on the squared spectral norm.
    pub fn norm_bound_sq(&self) -> f64 {
        4.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Constraint {
    Equality,
    Residual { epsilon: f64 },
}

impl Constraint {
    fn epsilon(self) -> f64 {
        match self {
            Constraint::Equality => 0.0,
            Constraint::Residual { epsilon } => epsilon,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    pub max_iter: usize,
    /// Relative primal/dual stopping tolerance.
    pub tol: f64,
    /// Initial penalty; derived from the data when absent.
    pub rho: Option<f64>,
    /// Residual balancing of the penalty.
    pub adaptive_rho: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            max_iter: 20_000,
            tol: 1e-9,
            rho: None,
            adaptive_rho: true,
        }
    }
}

#[derive(Debug)]
pub enum ReconError<T: Real> {
    /// Iteration budget exhausted; carries the last feasible iterate.
    NotConverged(Box<SpectrumEstimate<T>>),
    Invalid(Error),
}

impl<T: Real> std::fmt::Display for ReconError<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ReconError::NotConverged(best) => {
                let r = best.report.as_ref().expect("solver estimates carry a report");
                write!(
                    f,
                    "solver did not converge in {} iterations (primal {:.3e}, dual {:.3e})",
                    r.iterations, r.primal_residual, r.dual_residual
                )
            }
            ReconError::Invalid(e) => write!(f, "{e}"),
        }
    }
}

impl<T: Real> std::error::Error for ReconError<T> {}

impl<T: Real> From<Error> for ReconError<T> {
    fn from(e: Error) -> Self {
        ReconError::Invalid(e)
    }
}

impl<T: Real> ReconError<T> {
    /// The best available iterate, if the failure produced one.
    pub fn best(&self) -> Option<&SpectrumEstimate<T>> {
        match self {
            ReconError::NotConverged(best) => Some(best),
            ReconError::Invalid(_) => None,
        }
    }
}

pub fn solve_bp<T: Real>(
    op: &ForwardOperator<'_, T>,
    y: &MeasurementVector<T>,
    constraint: Constraint,
    analysis: Option<&SmoothingOperator>,
    settings: &SolverSettings,
) -> std::result::Result<SpectrumEstimate<T>, ReconError<T>> {
    if y.y.len() != op.rows() {
        return Err(Error::Dimension {
            expected: op.rows(),
            got: y.y.len(),
        }
        .into());
    }
    let eps = constraint.epsilon();
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(param("residual bound must be finite and non-negative").into());
    }
    if let Some(b) = analysis {
        if b.size != op.cols() {
            return Err(Error::Dimension {
                expected: op.cols(),
                got: b.size,
            }
            .into());
        }
    }
    if settings.max_iter == 0 || settings.tol.is_nan() || settings.tol <= 0.0 {
        return Err(param("solver needs max_iter > 0 and tol > 0").into());
    }
    match analysis {
        None => admm_synthesis(op, y, eps, settings),
        Some(b) => admm_analysis(op, y, eps, b, settings),
    }
}

struct Iterate<T: Real> {
    coeffs: Vec<Complex<T>>,
    iterations: usize,
    converged: bool,
    primal: f64,
    dual: f64,
    rho: f64,
}

fn initial_rho<T: Real>(x0: &[Complex<T>], settings: &SolverSettings) -> f64 {
    settings.rho.unwrap_or_else(|| {
        let peak = x0.iter().map(|z| z.norm().to_f64_lossy()).fold(0.0, f64::max);
        if peak > 0.0 {
            1.0 / (0.1 * peak)
        } else {
            1.0
        }
    })
}

fn admm_synthesis<T: Real>(
    op: &ForwardOperator<'_, T>,
    y: &MeasurementVector<T>,
    eps: f64,
    settings: &SolverSettings,
) -> std::result::Result<SpectrumEstimate<T>, ReconError<T>> {
    let n = op.cols();
    let x0 = op.project(&zeros(n), &y.y, eps);
    let mut rho = initial_rho(&x0, settings);
    let mut z = x0.clone();
    let mut x = x0;
    let mut u = zeros::<T>(n);
    let mut v = zeros::<T>(n);
    let mut it = Iterate {
        coeffs: Vec::new(),
        iterations: 0,
        converged: false,
        primal: f64::INFINITY,
        dual: f64::INFINITY,
        rho,
    };
    if norm2(&x).to_f64_lossy() == 0.0 {
        it.converged = true;
        it.primal = 0.0;
        it.dual = 0.0;
        it.coeffs = x;
        return finish(op, y, it, None);
    }

    for k in 1..=settings.max_iter {
        for i in 0..n {
            v[i] = z[i] - u[i];
        }
        x = op.project(&v, &y.y, eps);
        let kappa = T::lit(1.0 / rho);
        let mut dz2 = 0.0;
        let mut r2 = 0.0;
        for i in 0..n {
            let zn = soft_threshold(x[i] + u[i], kappa);
            dz2 += (zn - z[i]).norm_sqr().to_f64_lossy();
            z[i] = zn;
            let d = x[i] - zn;
            r2 += d.norm_sqr().to_f64_lossy();
            u[i] = u[i] + d;
        }
        let primal = r2.sqrt();
        let dual = rho * dz2.sqrt();
        let scale_p = norm2(&x).to_f64_lossy().max(norm2(&z).to_f64_lossy());
        let scale_d = rho * norm2(&u).to_f64_lossy();
        it.iterations = k;
        it.primal = primal / scale_p.max(f64::MIN_POSITIVE);
        it.dual = dual / scale_d.max(f64::MIN_POSITIVE);
        if it.primal <= settings.tol && it.dual <= settings.tol {
            it.converged = true;
            break;
        }
        if settings.adaptive_rho && k % 10 == 0 {
            rebalance(&mut rho, &mut u, it.primal, it.dual);
        }
    }
    it.rho = rho;
    it.coeffs = x;
    finish(op, y, it, None)
}

fn admm_analysis<T: Real>(
    op: &ForwardOperator<'_, T>,
    y: &MeasurementVector<T>,
    eps: f64,
    b: &SmoothingOperator,
    settings: &SolverSettings,
) -> std::result::Result<SpectrumEstimate<T>, ReconError<T>> {
    let n = op.cols();
    let mut f = op.project(&zeros(n), &y.y, eps);
    let mut w = b.apply(&f);
    let mut rho = initial_rho(&w, settings);
    let mut u = zeros::<T>(n);
    let step = T::lit(1.0 / b.norm_bound_sq());
    let mut it = Iterate {
        coeffs: Vec::new(),
        iterations: 0,
        converged: false,
        primal: f64::INFINITY,
        dual: f64::INFINITY,
        rho,
    };
    if norm2(&f).to_f64_lossy() == 0.0 {
        it.converged = true;
        it.primal = 0.0;
        it.dual = 0.0;
        it.coeffs = f;
        return finish(op, y, it, Some(b));
    }

    let mut bf = w.clone();
    for k in 1..=settings.max_iter {
        let g: Vec<Complex<T>> = (0..n).map(|i| bf[i] - w[i] + u[i]).collect();
        let grad = b.apply_transpose(&g);
        let v: Vec<Complex<T>> = f.iter().zip(&grad).map(|(a, d)| a - d * step).collect();
        f = op.project(&v, &y.y, eps);
        bf = b.apply(&f);
        let kappa = T::lit(1.0 / rho);
        let w_old = w.clone();
        let mut r2 = 0.0;
        for i in 0..n {
            w[i] = soft_threshold(bf[i] + u[i], kappa);
            let d = bf[i] - w[i];
            r2 += d.norm_sqr().to_f64_lossy();
            u[i] = u[i] + d;
        }
        let dw: Vec<Complex<T>> = w.iter().zip(&w_old).map(|(a, c)| a - c).collect();
        let primal = r2.sqrt();
        let dual = rho * norm2(&b.apply_transpose(&dw)).to_f64_lossy();
        let scale_p = norm2(&bf).to_f64_lossy().max(norm2(&w).to_f64_lossy());
        let scale_d = rho * norm2(&b.apply_transpose(&u)).to_f64_lossy();
        it.iterations = k;
        it.primal = primal / scale_p.max(f64::MIN_POSITIVE);
        it.dual = dual / scale_d.max(f64::MIN_POSITIVE);
        if it.primal <= settings.tol && it.dual <= settings.tol {
            it.converged = true;
            break;
        }
        if settings.adaptive_rho && k % 10 == 0 {
            rebalance(&mut rho, &mut u, it.primal, it.dual);
        }
    }
    it.rho = rho;
    it.coeffs = f;
    finish(op, y, it, Some(b))
}

fn rebalance<T: Real>(rho: &mut f64, u: &mut [Complex<T>], primal: f64, dual: f64) {
    let factor = if primal > 10.0 * dual {
        2.0
    } else if dual > 10.0 * primal {
        0.5
    } else {
        return;
    };
    *rho *= factor;
    let s = T::lit(1.0 / factor);
    u.iter_mut().for_each(|v| *v = *v * s);
}

fn finish<T: Real>(
    op: &ForwardOperator<'_, T>,
    y: &MeasurementVector<T>,
    it: Iterate<T>,
    analysis: Option<&SmoothingOperator>,
) -> std::result::Result<SpectrumEstimate<T>, ReconError<T>> {
    let residual = dist2(&op.apply(&it.coeffs), &y.y).to_f64_lossy();
    let smoothed_view = analysis.map(|b| b.apply(&it.coeffs));
    let objective = match &smoothed_view {
        Some(bf) => norm1(bf),
        None => norm1(&it.coeffs),
    }
    .to_f64_lossy();
    let report = SolverReport {
        iterations: it.iterations,
        converged: it.converged,
        residual,
        objective,
        primal_residual: it.primal,
        dual_residual: it.dual,
        rho: it.rho,
    };
    let estimate = SpectrumEstimate {
        coeffs: it.coeffs,
        order: y.order,
        fs: y.fs,
        smoothed: analysis.is_some(),
        smoothed_view,
        report: Some(report),
    };
    if it.converged {
        Ok(estimate)
    } else {
        Err(ReconError::NotConverged(Box::new(estimate)))
    }
}

/// How the residual bound is chosen by [`reconstruct_order`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ConstraintMode {
    Equality,
    Residual { epsilon: f64 },
    /// `eps = factor * sqrt(M) * sigma`, with `sigma` estimated from the
    /// acquired samples.
    ResidualAuto { factor: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReconConfig {
    pub constraint: ConstraintMode,
    pub solver: SolverSettings,
    /// Smoothing half-width for the analysis prior; `None` solves in synthesis form.
    pub l_half: Option<usize>,
    pub renormalize: bool,
}

impl Default for ReconConfig {
    fn default() -> Self {
        Self {
            constraint: ConstraintMode::Equality,
            solver: SolverSettings::default(),
            l_half: None,
            renormalize: false,
        }
    }
}

/// Per-measurement noise standard deviation after the Nth-power transform.
///
/// Signal power `S` and noise variance `s2` of the raw samples come from the
/// second/fourth-moment estimator for a constant-envelope signal in circular
/// Gaussian noise. The deviation `(s + n)^N - s^N` then has power
/// `sum_k C(N,k)^2 S^(N-k) k! s2^k`.
pub fn estimate_npt_noise_sigma<T: Real>(raw: &[Complex<T>], order: NptOrder, kind: SensingKind, m_rows: usize, l_cols: usize) -> f64 {
    if raw.is_empty() {
        return 0.0;
    }
    let n = raw.len() as f64;
    let m2 = raw.iter().map(|z| z.norm_sqr().to_f64_lossy()).sum::<f64>() / n;
    let m4 = raw.iter().map(|z| z.norm_sqr().to_f64_lossy().powi(2)).sum::<f64>() / n;
    let s = (2.0 * m2 * m2 - m4).max(0.0).sqrt().min(m2);
    let s2 = (m2 - s).max(0.0);
    let big_n = order.get() as u64;
    let mut var = 0.0;
    for k in 1..=big_n {
        let c = binomial(big_n, k);
        var += c * c * s.powi((big_n - k) as i32) * factorial(k) * s2.powi(k as i32);
    }
    match kind {
        SensingKind::RowSelection => var.sqrt(),
        SensingKind::DenseGaussian => (var * l_cols as f64 / m_rows as f64).sqrt(),
    }
}

fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn factorial(k: u64) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * i as f64)
}

/// raise_power -> measure -> solve for one record and order.
pub fn reconstruct_order<T: Real>(
    record: &BasebandRecord<T>,
    order: NptOrder,
    model: &MeasurementModel<T>,
    config: &ReconConfig,
) -> std::result::Result<SpectrumEstimate<T>, ReconError<T>> {
    let op = forward_operator(model, model.l_cols)?;
    let smoothing = config
        .l_half
        .map(|l| SmoothingOperator::new(model.l_cols, l, config.renormalize))
        .transpose()?;
    reconstruct_with(record, order, &op, smoothing.as_ref(), config)
}

/// Like [`reconstruct_order`], reusing a prepared operator and smoothing matrix.
pub fn reconstruct_with<T: Real>(
    record: &BasebandRecord<T>,
    order: NptOrder,
    op: &ForwardOperator<'_, T>,
    smoothing: Option<&SmoothingOperator>,
    config: &ReconConfig,
) -> std::result::Result<SpectrumEstimate<T>, ReconError<T>> {
    let model = op.model();
    if record.len() != model.l_cols {
        return Err(Error::Dimension {
            expected: model.l_cols,
            got: record.len(),
        }
        .into());
    }
    let z_n = raise_power(&record.samples, order);
    let y = measure(model, &z_n, order, record.params.fs)?;
    let constraint = match config.constraint {
        ConstraintMode::Equality => Constraint::Equality,
        ConstraintMode::Residual { epsilon } => Constraint::Residual { epsilon },
        ConstraintMode::ResidualAuto { factor } => {
            let raw: Vec<Complex<T>> = match model.indices() {
                Some(idx) => idx.iter().map(|&i| record.samples[i]).collect(),
                None => record.samples.clone(),
            };
            let sigma = estimate_npt_noise_sigma(&raw, order, model.kind, model.m_rows, model.l_cols);
            Constraint::Residual {
                epsilon: factor * (model.m_rows as f64).sqrt() * sigma,
            }
        }
    };
    solve_bp(op, &y, constraint, smoothing, &config.solver)
}

/// Solves for an existing measurement vector.
pub fn reconstruct_measurements<T: Real>(
    y: &MeasurementVector<T>,
    model: &MeasurementModel<T>,
    constraint: Constraint,
    config: &ReconConfig,
) -> std::result::Result<SpectrumEstimate<T>, ReconError<T>> {
    let op = forward_operator(model, model.l_cols)?;
    let smoothing = config
        .l_half
        .map(|l| SmoothingOperator::new(model.l_cols, l, config.renormalize))
        .transpose()?;
    solve_bp(&op, y, constraint, smoothing.as_ref(), &config.solver)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::make_model;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(len: usize, seed: u64) -> Vec<Complex<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len)
            .map(|_| Complex::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect()
    }

    /// Direct evaluation of the smoothing sum, one output at a time.
    fn smooth_by_definition(f: &[Complex<f64>], l: usize) -> Vec<Complex<f64>> {
        let n = f.len() as isize;
        (0..n)
            .map(|i| {
                let mut acc = Complex::new(0.0, 0.0);
                for j in 1..=l as isize {
                    if i + j < n {
                        acc += f[(i + j) as usize];
                    }
                    if i - j >= 0 {
                        acc += f[(i - j) as usize];
                    }
                }
                f[i as usize] - acc / (2 * l) as f64
            })
            .collect()
    }

    #[test]
    fn smoothing_matches_definition() {
        let b = build_smoothing(64, 4).unwrap();
        for seed in 0..10 {
            let f = random_vec(64, seed);
            for (a, c) in b.apply(&f).iter().zip(smooth_by_definition(&f, 4)) {
                assert!((a - c).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn smoothing_annihilates_constants_inside() {
        let b = build_smoothing(64, 4).unwrap();
        let f = vec![Complex::new(2.5, -1.0); 64];
        let out = b.apply(&f);
        for (i, v) in out.iter().enumerate() {
            if b.is_interior(i) {
                assert_eq!(*v, Complex::new(0.0, 0.0));
            } else {
                assert!(v.norm() > 0.0);
            }
        }
        let r = SmoothingOperator::new(64, 4, true).unwrap();
        assert!(r.apply(&f).iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn smoothing_impulse_row_pattern() {
        let b = build_smoothing(32, 3).unwrap();
        let mut e = zeros::<f64>(32);
        e[10] = Complex::new(1.0, 0.0);
        let out = b.apply(&e);
        for (i, v) in out.iter().enumerate() {
            let want = match i.abs_diff(10) {
                0 => 1.0,
                1..=3 => -1.0 / 6.0,
                _ => 0.0,
            };
            assert!((v.re - want).abs() < 1e-15 && v.im == 0.0);
        }
    }

    #[test]
    fn smoothing_transpose_is_adjoint() {
        for renormalize in [false, true] {
            let b = SmoothingOperator::new(48, 5, renormalize).unwrap();
            let f = random_vec(48, 1);
            let g = random_vec(48, 2);
            let lhs = crate::scalar::inner(&b.apply(&f), &g);
            let rhs = crate::scalar::inner(&f, &b.apply_transpose(&g));
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn smoothing_range_checked() {
        assert!(build_smoothing(64, 0).is_err());
        assert!(build_smoothing(64, 17).is_err());
        assert!(build_smoothing(64, 16).is_ok());
    }

    fn planted(l: usize, k: usize, seed: u64) -> Vec<Complex<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = zeros::<f64>(l);
        let support = rand::seq::index::sample(&mut rng, l, k);
        for i in support {
            f[i] = Complex::from_polar(1.0 + rng.random::<f64>(), rng.random::<f64>() * std::f64::consts::TAU);
        }
        f
    }

    #[test]
    fn recovers_planted_sparse_spectrum() {
        let l = 512;
        let model = make_model::<f64>(SensingKind::RowSelection, l, 0.3, 4).unwrap();
        let op = forward_operator(&model, l).unwrap();
        let truth = planted(l, 8, 17);
        let y = MeasurementVector {
            y: op.apply(&truth),
            model_id: model.id(),
            order: NptOrder::SQUARE,
            fs: 1.0,
        };
        let est = solve_bp(&op, &y, Constraint::Equality, None, &SolverSettings::default()).unwrap();
        let err = dist2(&est.coeffs, &truth) / norm2(&truth);
        assert!(err < 1e-4, "{err}");
        let report = est.report.unwrap();
        assert!(report.residual <= 1e-6 * norm2(&y.y));
        assert!(report.objective <= norm1(&truth) + 1e-6);
    }

    #[test]
    fn zero_measurements_give_zero_spectrum() {
        let model = make_model::<f64>(SensingKind::RowSelection, 256, 0.3, 4).unwrap();
        let op = forward_operator(&model, 256).unwrap();
        let y = MeasurementVector {
            y: zeros(model.m_rows),
            model_id: model.id(),
            order: NptOrder::SQUARE,
            fs: 1.0,
        };
        let est = solve_bp(&op, &y, Constraint::Equality, None, &SolverSettings::default()).unwrap();
        assert!(est.coeffs.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn full_selection_returns_the_dft() {
        let l = 256;
        let model = MeasurementModel::<f64>::identity_selection(l);
        let op = forward_operator(&model, l).unwrap();
        let z = random_vec(l, 8);
        let y = measure(&model, &z, NptOrder::NONE, 1.0).unwrap();
        let est = solve_bp(&op, &y, Constraint::Equality, None, &SolverSettings::default()).unwrap();
        let dft = op.dft().forward(&z);
        assert!(dist2(&est.coeffs, &dft) < 1e-9 * norm2(&dft));
    }

    #[test]
    fn iteration_budget_exhaustion_is_reported() {
        let l = 256;
        let model = make_model::<f64>(SensingKind::RowSelection, l, 0.3, 4).unwrap();
        let op = forward_operator(&model, l).unwrap();
        let y = MeasurementVector {
            y: random_vec(model.m_rows, 5),
            model_id: model.id(),
            order: NptOrder::SQUARE,
            fs: 1.0,
        };
        let settings = SolverSettings {
            max_iter: 3,
            ..SolverSettings::default()
        };
        match solve_bp(&op, &y, Constraint::Equality, None, &settings) {
            Err(ReconError::NotConverged(best)) => {
                let r = best.report.unwrap();
                assert_eq!(r.iterations, 3);
                assert!(!r.converged);
                assert!(r.residual < 1e-9);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn residual_mode_respects_the_bound() {
        let l = 256;
        let model = make_model::<f64>(SensingKind::DenseGaussian, l, 0.4, 4).unwrap();
        let op = forward_operator(&model, l).unwrap();
        let truth = planted(l, 5, 3);
        let mut y = op.apply(&truth);
        let noise = random_vec(y.len(), 44);
        y.iter_mut().zip(&noise).for_each(|(a, b)| *a += b * 0.01);
        let eps = 1.1 * norm2(&noise) * 0.01;
        let y = MeasurementVector {
            y,
            model_id: model.id(),
            order: NptOrder::SQUARE,
            fs: 1.0,
        };
        let settings = SolverSettings {
            tol: 1e-6,
            ..SolverSettings::default()
        };
        let est = solve_bp(&op, &y, Constraint::Residual { epsilon: eps }, None, &settings).unwrap();
        assert!(est.report.as_ref().unwrap().residual <= eps * (1.0 + 1e-9));
        assert!(dist2(&est.coeffs, &truth) / norm2(&truth) < 0.1);
    }

    #[test]
    fn analysis_mode_keeps_feasibility() {
        let l = 256;
        let model = make_model::<f64>(SensingKind::RowSelection, l, 0.3, 4).unwrap();
        let op = forward_operator(&model, l).unwrap();
        let truth = planted(l, 4, 8);
        let y = MeasurementVector {
            y: op.apply(&truth),
            model_id: model.id(),
            order: NptOrder::SQUARE,
            fs: 1.0,
        };
        let b = build_smoothing(l, 3).unwrap();
        let settings = SolverSettings {
            tol: 1e-5,
            ..SolverSettings::default()
        };
        let est = solve_bp(&op, &y, Constraint::Equality, Some(&b), &settings).unwrap();
        assert!(est.smoothed);
        let report = est.report.as_ref().unwrap();
        assert!(report.residual <= 1e-6 * norm2(&y.y));
        let truth_objective = norm1(&b.apply(&truth)).to_f64_lossy();
        assert!(report.objective <= truth_objective * (1.0 + 1e-3));
    }

    #[test]
    fn noise_sigma_of_clean_constant_envelope_is_zero() {
        let raw: Vec<Complex<f64>> = (0..1000).map(|k| Complex::from_polar(1.0, k as f64 * 0.37)).collect();
        let s = estimate_npt_noise_sigma(&raw, NptOrder::FOURTH, SensingKind::RowSelection, 300, 1000);
        assert!(s < 1e-6);
    }
}
