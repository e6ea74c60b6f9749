//! Kernel SVM (SMO solver, one-vs-one voting) over feature vectors.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::features::{FeatureVector, Normalization};
use crate::npt::NptOrder;
use crate::scalar::Real;
use crate::sigsyn::ModulationType;

pub const DEFAULT_C: f64 = 10.0;
pub const KKT_TOLERANCE: f64 = 1e-3;
/// Kernel-width multipliers tried by the grid search, relative to the median heuristic.
pub const SIGMA_SCALES: [f64; 3] = [0.5, 1.0, 2.0];
pub const C_GRID: [f64; 3] = [1.0, 10.0, 100.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum KernelSpec {
    Linear,
    /// `(gamma <x, z> + r)^d`
    Polynomial { gamma: f64, r: f64, d: u32 },
    /// `exp(-|x - z|^2 / (2 sigma^2))`
    Rbf { sigma: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Polynomial { gamma, d, .. } if gamma > 0.0 && d >= 1 => Ok(()),
            KernelSpec::Rbf { sigma } if sigma > 0.0 && sigma.is_finite() => Ok(()),
            k => Err(param(format!("invalid kernel {k:?}"))),
        }
    }
}

pub fn kernel_eval<T: Real>(kernel: &KernelSpec, x: &[T], z: &[T]) -> f64 {
    match *kernel {
        KernelSpec::Linear => dot(x, z),
        KernelSpec::Polynomial { gamma, r, d } => (gamma * dot(x, z) + r).powi(d as i32),
        KernelSpec::Rbf { sigma } => (-sq_dist(x, z) / (2.0 * sigma * sigma)).exp(),
    }
}

fn dot<T: Real>(x: &[T], z: &[T]) -> f64 {
    x.iter().zip(z).map(|(a, b)| (*a * *b).to_f64_lossy()).sum()
}

fn sq_dist<T: Real>(x: &[T], z: &[T]) -> f64 {
    x.iter()
        .zip(z)
        .map(|(a, b)| {
            let d = (*a - *b).to_f64_lossy();
            d * d
        })
        .sum()
}

/// Training parameters shared by every pairwise machine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub kernel: KernelSpec,
    pub c: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl SvmParams {
    pub fn new(kernel: KernelSpec, c: f64) -> Self {
        SvmParams {
            kernel,
            c,
            tol: KKT_TOLERANCE,
            max_iter: 1_000_000,
        }
    }
}

/// Dual solution of one binary problem over a precomputed Gram matrix.
#[derive(Debug, Clone)]
pub struct BinarySolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Solves `min 1/2 a'Qa - 1'a` s.t. `y'a = 0`, `0 <= a <= c` with
/// second-order working-set selection. `gram` is row-major `n x n`,
/// `y` holds +-1.
pub fn smo_solve(gram: &[f64], y: &[f64], c: f64, tol: f64, max_iter: usize) -> BinarySolution {
    const TAU: f64 = 1e-12;
    let n = y.len();
    let k = |i: usize, j: usize| gram[i * n + j];
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let up = |a: f64, yi: f64| (yi > 0.0 && a < c) || (yi < 0.0 && a > 0.0);
    let low = |a: f64, yi: f64| (yi > 0.0 && a > 0.0) || (yi < 0.0 && a < c);

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let mut i = usize::MAX;
        let mut g_max = f64::NEG_INFINITY;
        for t in 0..n {
            if up(alpha[t], y[t]) && -y[t] * grad[t] >= g_max {
                g_max = -y[t] * grad[t];
                i = t;
            }
        }
        let mut j = usize::MAX;
        let mut g_min = f64::INFINITY;
        let mut best = f64::INFINITY;
        for t in 0..n {
            if !low(alpha[t], y[t]) {
                continue;
            }
            let v = -y[t] * grad[t];
            g_min = g_min.min(v);
            if i != usize::MAX && v < g_max {
                let b = g_max - v;
                let mut a = k(i, i) + k(t, t) - 2.0 * k(i, t);
                if a <= 0.0 {
                    a = TAU;
                }
                if -b * b / a < best {
                    best = -b * b / a;
                    j = t;
                }
            }
        }
        if i == usize::MAX || j == usize::MAX || g_max - g_min < tol {
            converged = true;
            break;
        }
        iterations += 1;

        let (ai, aj) = (alpha[i], alpha[j]);
        let mut quad = k(i, i) + k(j, j) - 2.0 * k(i, j);
        if quad <= 0.0 {
            quad = TAU;
        }
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = ai - aj;
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = ai + aj;
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - ai, alpha[j] - aj);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * k(t, i) * di + y[j] * k(t, j) * dj);
        }
    }

    // Offset from the free multipliers, else the midpoint of the feasible interval.
    let (mut sum, mut count) = (0.0, 0usize);
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] > 0.0 && alpha[t] < c {
            sum += yg;
            count += 1;
        } else if (alpha[t] <= 0.0) == (y[t] > 0.0) {
            ub = ub.min(yg);
        } else {
            lb = lb.max(yg);
        }
    }
    let rho = if count > 0 { sum / count as f64 } else { 0.5 * (ub + lb) };
    BinarySolution {
        alpha,
        bias: -rho,
        iterations,
        converged,
    }
}

/// Largest KKT violation of a binary solution on its own training set.
pub fn max_kkt_violation(gram: &[f64], y: &[f64], sol: &BinarySolution, c: f64) -> f64 {
    let n = y.len();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let f: f64 = (0..n).map(|j| sol.alpha[j] * y[j] * gram[i * n + j]).sum::<f64>() + sol.bias;
        let m = y[i] * f;
        let a = sol.alpha[i];
        let v = if a <= 0.0 {
            (1.0 - m).max(0.0)
        } else if a >= c {
            (m - 1.0).max(0.0)
        } else {
            (m - 1.0).abs()
        };
        worst = worst.max(v);
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryMachine {
    /// Decision value > 0 votes for `positive`.
    pub positive: ModulationType,
    pub negative: ModulationType,
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` per support vector.
    pub coef: Vec<f64>,
    pub bias: f64,
}

impl BinaryMachine {
    pub fn decision<T: Real>(&self, kernel: &KernelSpec, x: &[T]) -> f64 {
        let xs: Vec<f64> = x.iter().map(|v| v.to_f64_lossy()).collect();
        self.support_vectors
            .iter()
            .zip(&self.coef)
            .map(|(sv, c)| c * kernel_eval(kernel, sv, &xs))
            .sum::<f64>()
            + self.bias
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub classes: Vec<ModulationType>,
    pub machines: Vec<BinaryMachine>,
    pub kernel: KernelSpec,
    pub c: f64,
    pub m: usize,
    pub normalization: Normalization,
    /// Training SNR range in dB, if known.
    pub snr_range_db: Option<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: SvmModel,
    pub warnings: Vec<String>,
    /// Largest KKT violation over all pairwise machines.
    pub max_kkt_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub class: ModulationType,
    pub votes: Vec<(ModulationType, usize)>,
    pub margins: Vec<(ModulationType, f64)>,
}

/// Trains one machine per class pair. Classes are ordered as in
/// [`ModulationType::ALL`].
pub fn train<T: Real>(data: &[FeatureVector<T>], params: &SvmParams) -> Result<TrainOutcome> {
    params.kernel.validate()?;
    if params.c.is_nan() || params.c <= 0.0 {
        return Err(param(format!("C must be positive, got {}", params.c)));
    }
    let first = data.first().ok_or_else(|| param("empty training set"))?;
    let (m, normalization) = (first.m, first.normalization);
    let mut labels = Vec::with_capacity(data.len());
    for fv in data {
        if fv.m != m || fv.len() != 3 * m || fv.normalization != normalization {
            return Err(Error::ConfigMismatch("training vectors disagree on block size or normalization".into()));
        }
        labels.push(fv.label.ok_or_else(|| param("training vector without label"))?);
    }
    let present: BTreeSet<usize> = labels.iter().map(|l| l.index()).collect();
    let classes: Vec<ModulationType> = present.iter().map(|&i| ModulationType::ALL[i]).collect();
    if classes.len() < 2 {
        return Err(param("training needs at least two classes"));
    }

    let xs: Vec<Vec<f64>> = data
        .iter()
        .map(|fv| fv.values.iter().map(|v| v.to_f64_lossy()).collect())
        .collect();
    let n = xs.len();
    let mut gram = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = kernel_eval(&params.kernel, &xs[i], &xs[j]);
            gram[i * n + j] = v;
            gram[j * n + i] = v;
        }
    }

    let mut machines = Vec::new();
    let mut warnings = Vec::new();
    let mut worst: f64 = 0.0;
    for (a, &pos) in classes.iter().enumerate() {
        for &neg in &classes[a + 1..] {
            let idx: Vec<usize> = (0..n).filter(|&i| labels[i] == pos || labels[i] == neg).collect();
            let y: Vec<f64> = idx.iter().map(|&i| if labels[i] == pos { 1.0 } else { -1.0 }).collect();
            if idx.iter().all(|&i| xs[i] == xs[idx[0]]) {
                warnings.push(format!("{pos} and {neg} have identical features"));
            }
            let sub: Vec<f64> = idx
                .iter()
                .flat_map(|&i| idx.iter().map(move |&j| (i, j)))
                .map(|(i, j)| gram[i * n + j])
                .collect();
            let sol = smo_solve(&sub, &y, params.c, params.tol, params.max_iter);
            if !sol.converged {
                warnings.push(format!("{pos} vs {neg}: SMO stopped after {} iterations", sol.iterations));
            }
            worst = worst.max(max_kkt_violation(&sub, &y, &sol, params.c));
            let mut support_vectors = Vec::new();
            let mut coef = Vec::new();
            for (k, &i) in idx.iter().enumerate() {
                if sol.alpha[k] > 0.0 {
                    support_vectors.push(xs[i].clone());
                    coef.push(sol.alpha[k] * y[k]);
                }
            }
            machines.push(BinaryMachine {
                positive: pos,
                negative: neg,
                support_vectors,
                coef,
                bias: sol.bias,
            });
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(TrainOutcome {
        model: SvmModel {
            classes,
            machines,
            kernel: params.kernel,
            c: params.c,
            m,
            normalization,
            snr_range_db: None,
        },
        warnings,
        max_kkt_violation: worst,
    })
}

impl SvmModel {
    pub fn check_compatible<T: Real>(&self, x: &FeatureVector<T>) -> Result<()> {
        if x.m != self.m || x.len() != 3 * self.m {
            return Err(Error::ConfigMismatch(format!(
                "feature block size {} does not match model block size {}",
                x.m, self.m
            )));
        }
        if x.normalization != self.normalization {
            return Err(Error::ConfigMismatch("feature normalization differs from training".into()));
        }
        Ok(())
    }

    /// Majority vote; ties go to the class with the larger summed margin.
    pub fn predict<T: Real>(&self, x: &FeatureVector<T>) -> Result<Prediction> {
        self.check_compatible(x)?;
        let k = self.classes.len();
        let mut votes = vec![0usize; k];
        let mut margins = vec![0.0f64; k];
        let pos_of = |c: ModulationType| self.classes.iter().position(|&x| x == c).expect("class in model");
        for mach in &self.machines {
            let d = mach.decision(&self.kernel, &x.values);
            let (p, q) = (pos_of(mach.positive), pos_of(mach.negative));
            if d > 0.0 {
                votes[p] += 1;
            } else {
                votes[q] += 1;
            }
            margins[p] += d;
            margins[q] -= d;
        }
        let best = (0..k)
            .max_by(|&a, &b| votes[a].cmp(&votes[b]).then(margins[a].total_cmp(&margins[b])))
            .expect("at least two classes");
        Ok(Prediction {
            class: self.classes[best],
            votes: self.classes.iter().copied().zip(votes).collect(),
            margins: self.classes.iter().copied().zip(margins).collect(),
        })
    }
}

/// Median pairwise Euclidean distance, over at most `max_points` evenly strided vectors.
pub fn median_heuristic_sigma<T: Real>(data: &[FeatureVector<T>], max_points: usize) -> f64 {
    let stride = data.len().div_ceil(max_points.max(2)).max(1);
    let pts: Vec<&[T]> = data.iter().step_by(stride).map(|f| f.values.as_slice()).collect();
    let mut d: Vec<f64> = Vec::new();
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            d.push(sq_dist(pts[i], pts[j]).sqrt());
        }
    }
    d.retain(|v| *v > 0.0);
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    d[d.len() / 2]
}

/// Fraction of vectors whose predicted class matches their label.
pub fn accuracy<T: Real>(model: &SvmModel, data: &[FeatureVector<T>]) -> Result<f64> {
    if data.is_empty() {
        return Err(param("empty evaluation set"));
    }
    let mut hits = 0;
    for fv in data {
        if Some(model.predict(fv)?.class) == fv.label {
            hits += 1;
        }
    }
    Ok(hits as f64 / data.len() as f64)
}

/// Mean held-out accuracy over `folds` shuffled folds.
pub fn cross_validate<T: Real>(data: &[FeatureVector<T>], params: &SvmParams, folds: usize, seed: u64) -> Result<f64> {
    if folds < 2 || folds > data.len() {
        return Err(param(format!("cannot split {} vectors into {folds} folds", data.len())));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut total = 0.0;
    for f in 0..folds {
        let (test, train_set): (Vec<_>, Vec<_>) = order.iter().enumerate().partition(|(k, _)| k % folds == f);
        let pick = |v: Vec<(usize, &usize)>| v.into_iter().map(|(_, &i)| data[i].clone()).collect::<Vec<_>>();
        let model = train(&pick(train_set), params)?.model;
        total += accuracy(&model, &pick(test))?;
    }
    Ok(total / folds as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridChoice {
    pub c: f64,
    pub sigma: f64,
    pub cv_accuracy: f64,
}

/// Picks `C` and the RBF width by cross-validated accuracy; the first best
/// point in grid order wins ties.
pub fn grid_search<T: Real>(data: &[FeatureVector<T>], folds: usize, seed: u64) -> Result<GridChoice> {
    let base = median_heuristic_sigma(data, 300);
    let mut best: Option<GridChoice> = None;
    for &c in &C_GRID {
        for &s in &SIGMA_SCALES {
            let sigma = base * s;
            let acc = cross_validate(data, &SvmParams::new(KernelSpec::Rbf { sigma }, c), folds, seed)?;
            if best.is_none_or(|b| acc > b.cv_accuracy) {
                best = Some(GridChoice { c, sigma, cv_accuracy: acc });
            }
        }
    }
    Ok(best.expect("grid is non-empty"))
}

/// Stage of the coarse-to-fine decision and the NPT orders it needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CandidateStage {
    BpskVsRest,
    QuadratureFamily,
    WithEightPsk,
}

impl CandidateStage {
    pub fn for_candidates(candidates: &[ModulationType]) -> Self {
        if candidates.contains(&ModulationType::Psk8) {
            CandidateStage::WithEightPsk
        } else if candidates.iter().all(|&c| c == ModulationType::Bpsk) || candidates.is_empty() {
            CandidateStage::BpskVsRest
        } else if candidates
            .iter()
            .any(|c| matches!(c, ModulationType::Qpsk | ModulationType::Oqpsk | ModulationType::Msk))
        {
            CandidateStage::QuadratureFamily
        } else {
            CandidateStage::BpskVsRest
        }
    }

    pub fn orders(self) -> Vec<NptOrder> {
        match self {
            CandidateStage::BpskVsRest => vec![NptOrder::SQUARE],
            CandidateStage::QuadratureFamily => vec![NptOrder::SQUARE, NptOrder::FOURTH],
            CandidateStage::WithEightPsk => NptOrder::FEATURE_ORDERS.to_vec(),
        }
    }
}

/// Smallest set of orders that separates the candidate classes.
pub fn hierarchical_orders(candidates: &[ModulationType]) -> Vec<NptOrder> {
    CandidateStage::for_candidates(candidates).orders()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn blob(center: &[f64], n: usize, spread: f64, label: ModulationType, rng: &mut ChaCha8Rng) -> Vec<FeatureVector<f64>> {
        (0..n)
            .map(|_| FeatureVector {
                values: center
                    .iter()
                    .map(|c| c + spread * rng.sample::<f64, _>(StandardNormal))
                    .collect(),
                m: center.len() / 3,
                normalization: Normalization::PerRecordEnergy,
                label: Some(label),
            })
            .collect()
    }

    fn centers() -> Vec<(ModulationType, Vec<f64>)> {
        ModulationType::ALL
            .iter()
            .enumerate()
            .map(|(k, &m)| {
                let mut c = vec![0.0; 15];
                c[k * 3] = 1.0;
                (m, c)
            })
            .collect()
    }

    #[test]
    fn kernels() {
        let x = [1.0, 2.0];
        let z = [3.0, -1.0];
        assert_eq!(kernel_eval(&KernelSpec::Linear, &x, &z), 1.0);
        let p = KernelSpec::Polynomial { gamma: 0.5, r: 1.0, d: 2 };
        assert!((kernel_eval(&p, &x, &z) - 2.25).abs() < 1e-12);
        let r = KernelSpec::Rbf { sigma: 2.0 };
        assert!((kernel_eval(&r, &x, &z) - (-13.0f64 / 8.0).exp()).abs() < 1e-12);
        assert_eq!(kernel_eval(&r, &x, &x), 1.0);
        assert!(KernelSpec::Rbf { sigma: 0.0 }.validate().is_err());
    }

    #[test]
    fn separable_blobs_are_learned() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut train_set = Vec::new();
        let mut test_set = Vec::new();
        for (m, c) in centers() {
            train_set.extend(blob(&c, 30, 0.05, m, &mut rng));
            test_set.extend(blob(&c, 20, 0.05, m, &mut rng));
        }
        let sigma = median_heuristic_sigma(&train_set, 300);
        let out = train(&train_set, &SvmParams::new(KernelSpec::Rbf { sigma }, DEFAULT_C)).unwrap();
        assert_eq!(out.model.machines.len(), 10);
        assert!(out.max_kkt_violation <= KKT_TOLERANCE, "{}", out.max_kkt_violation);
        assert!(out.warnings.is_empty());
        assert_eq!(accuracy(&out.model, &test_set).unwrap(), 1.0);
    }

    #[test]
    fn xor_needs_a_nonlinear_kernel() {
        let pts = [([0.0, 0.0], 1.0), ([1.0, 1.0], 1.0), ([0.0, 1.0], -1.0), ([1.0, 0.0], -1.0)];
        let kernel = KernelSpec::Rbf { sigma: 0.5 };
        let gram: Vec<f64> = pts
            .iter()
            .flat_map(|a| pts.iter().map(move |b| kernel_eval(&kernel, &a.0, &b.0)))
            .collect();
        let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
        let sol = smo_solve(&gram, &y, 100.0, 1e-6, 10_000);
        assert!(sol.converged);
        for (i, p) in pts.iter().enumerate() {
            let f: f64 = (0..4).map(|j| sol.alpha[j] * y[j] * gram[i * 4 + j]).sum::<f64>() + sol.bias;
            assert!(f * p.1 > 0.0);
        }
        let dual: f64 = sol.alpha.iter().zip(&y).map(|(a, y)| a * y).sum();
        assert!(dual.abs() < 1e-9);
    }

    #[test]
    fn kkt_holds_on_overlapping_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut data = blob(&[0.0; 15], 40, 1.0, ModulationType::Bpsk, &mut rng);
        data.extend(blob(&[0.3; 15], 40, 1.0, ModulationType::Qpsk, &mut rng));
        let out = train(&data, &SvmParams::new(KernelSpec::Rbf { sigma: 3.0 }, 1.0)).unwrap();
        assert!(out.max_kkt_violation <= KKT_TOLERANCE);
        let coef_sum: f64 = out.model.machines[0].coef.iter().sum();
        assert!(coef_sum.abs() < 1e-9);
    }

    #[test]
    fn identical_classes_warn() {
        let mk = |label| FeatureVector {
            values: vec![0.5; 15],
            m: 5,
            normalization: Normalization::PerRecordEnergy,
            label: Some(label),
        };
        let data = vec![mk(ModulationType::Bpsk), mk(ModulationType::Qpsk), mk(ModulationType::Bpsk)];
        let out = train(&data, &SvmParams::new(KernelSpec::Rbf { sigma: 1.0 }, 10.0)).unwrap();
        assert_eq!(out.warnings.len(), 1);
    }

    #[test]
    fn mismatched_block_size_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = centers();
        let mut data = blob(&c[0].1, 5, 0.1, c[0].0, &mut rng);
        data.extend(blob(&c[1].1, 5, 0.1, c[1].0, &mut rng));
        let model = train(&data, &SvmParams::new(KernelSpec::Linear, 1.0)).unwrap().model;
        let bad = FeatureVector::<f64> {
            values: vec![0.0; 18],
            m: 6,
            normalization: Normalization::PerRecordEnergy,
            label: None,
        };
        assert!(matches!(model.predict(&bad), Err(Error::ConfigMismatch(_))));
    }

    #[test]
    fn tie_breaks_by_margin() {
        // Three classes, each machine votes once for a different class.
        let mk = |p, n, bias| BinaryMachine {
            positive: p,
            negative: n,
            support_vectors: vec![],
            coef: vec![],
            bias,
        };
        use ModulationType::*;
        let model = SvmModel {
            classes: vec![Bpsk, Qpsk, Psk8],
            machines: vec![mk(Bpsk, Qpsk, 1.0), mk(Bpsk, Psk8, -0.5), mk(Qpsk, Psk8, 0.2)],
            kernel: KernelSpec::Linear,
            c: 1.0,
            m: 5,
            normalization: Normalization::PerRecordEnergy,
            snr_range_db: None,
        };
        let x = FeatureVector::<f64> {
            values: vec![0.0; 15],
            m: 5,
            normalization: Normalization::PerRecordEnergy,
            label: None,
        };
        // margins: BPSK 0.5, QPSK -0.8, 8PSK 0.3
        assert_eq!(model.predict(&x).unwrap().class, Bpsk);
    }

    #[test]
    fn model_round_trips_through_json() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let c = centers();
        let mut data = blob(&c[0].1, 6, 0.1, c[0].0, &mut rng);
        data.extend(blob(&c[3].1, 6, 0.1, c[3].0, &mut rng));
        let model = train(&data, &SvmParams::new(KernelSpec::Rbf { sigma: 1.0 }, 10.0)).unwrap().model;
        let back: SvmModel = serde_json::from_str(&serde_json::to_string(&model).unwrap()).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn grid_search_prefers_a_working_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let c = centers();
        let mut data = blob(&c[0].1, 12, 0.1, c[0].0, &mut rng);
        data.extend(blob(&c[1].1, 12, 0.1, c[1].0, &mut rng));
        let g = grid_search(&data, 3, 0).unwrap();
        assert_eq!(g.cv_accuracy, 1.0);
        assert!(C_GRID.contains(&g.c));
    }

    #[test]
    fn hierarchy() {
        use ModulationType::*;
        assert_eq!(hierarchical_orders(&[Bpsk]), vec![NptOrder::SQUARE]);
        assert_eq!(hierarchical_orders(&[Qpsk, Msk]), vec![NptOrder::SQUARE, NptOrder::FOURTH]);
        assert_eq!(hierarchical_orders(&[Bpsk, Psk8]).len(), 3);
        assert_eq!(hierarchical_orders(&ModulationType::ALL).len(), 3);
    }
}
