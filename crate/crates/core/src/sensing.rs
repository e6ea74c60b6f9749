//! Compressive measurement models and the composed forward operator
//! `A = Phi * Psi`, where `Psi` is the unitary inverse DFT.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dft::UnitaryDft;
use crate::error::{param, Error, Result};
use crate::npt::NptOrder;
use crate::scalar::{norm2, zeros, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SensingKind {
    DenseGaussian,
    RowSelection,
}

impl fmt::Display for SensingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SensingKind::DenseGaussian => "dense-gaussian",
            SensingKind::RowSelection => "row-selection",
        })
    }
}

impl FromStr for SensingKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense-gaussian" | "gaussian" => Ok(SensingKind::DenseGaussian),
            "row-selection" | "selection" => Ok(SensingKind::RowSelection),
            _ => Err(param(format!("unknown sensing kind {s:?}"))),
        }
    }
}

/// Persisted form of a model. The payload is regenerated from the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub kind: SensingKind,
    pub m_rows: usize,
    pub l_cols: usize,
    pub beta: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
enum Payload<T> {
    /// Row-major `M x L`.
    Dense(Vec<T>),
    /// Sorted distinct sample indices.
    Indices(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementModel<T: Real> {
    pub kind: SensingKind,
    pub m_rows: usize,
    pub l_cols: usize,
    /// Exactly `m_rows / l_cols`.
    pub beta: f64,
    pub seed: u64,
    payload: Payload<T>,
}

/// `M = round(beta * L)` measurements, deterministic in `seed`.
pub fn make_model<T: Real>(kind: SensingKind, l_cols: usize, beta: f64, seed: u64) -> Result<MeasurementModel<T>> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(param(format!("compression ratio {beta} outside (0, 1)")));
    }
    if (beta * l_cols as f64).floor() < 1.0 {
        return Err(param("compression ratio leaves no measurements"));
    }
    let m = ((beta * l_cols as f64).round() as usize).min(l_cols - 1);
    MeasurementModel::with_rows(kind, l_cols, m, seed)
}

impl<T: Real> MeasurementModel<T> {
    pub fn with_rows(kind: SensingKind, l_cols: usize, m_rows: usize, seed: u64) -> Result<Self> {
        if m_rows == 0 || m_rows > l_cols || (m_rows == l_cols && kind == SensingKind::DenseGaussian) {
            return Err(param(format!("need 0 < M < L, got M = {m_rows}, L = {l_cols}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let payload = match kind {
            SensingKind::DenseGaussian => {
                let normal = Normal::new(0.0, 1.0 / (m_rows as f64).sqrt()).expect("positive variance");
                Payload::Dense((0..m_rows * l_cols).map(|_| T::lit(normal.sample(&mut rng))).collect())
            }
            SensingKind::RowSelection => {
                let mut idx = rand::seq::index::sample(&mut rng, l_cols, m_rows).into_vec();
                idx.sort_unstable();
                Payload::Indices(idx)
            }
        };
        Ok(Self {
            kind,
            m_rows,
            l_cols,
            beta: m_rows as f64 / l_cols as f64,
            seed,
            payload,
        })
    }

    /// Row selection keeping every sample (`M = L`).
    pub fn identity_selection(l_cols: usize) -> Self {
        Self {
            kind: SensingKind::RowSelection,
            m_rows: l_cols,
            l_cols,
            beta: 1.0,
            seed: 0,
            payload: Payload::Indices((0..l_cols).collect()),
        }
    }

    pub fn header(&self) -> ModelHeader {
        ModelHeader {
            kind: self.kind,
            m_rows: self.m_rows,
            l_cols: self.l_cols,
            beta: self.beta,
            seed: self.seed,
        }
    }

    pub fn from_header(h: &ModelHeader) -> Result<Self> {
        if h.kind == SensingKind::RowSelection && h.m_rows == h.l_cols {
            return Ok(Self::identity_selection(h.l_cols));
        }
        Self::with_rows(h.kind, h.l_cols, h.m_rows, h.seed)
    }

    pub fn id(&self) -> String {
        format!("{}:{}x{}:{}", self.kind, self.m_rows, self.l_cols, self.seed)
    }

    /// Selected sample indices for a row-selection model.
    pub fn indices(&self) -> Option<&[usize]> {
        match &self.payload {
            Payload::Indices(idx) => Some(idx),
            Payload::Dense(_) => None,
        }
    }

    /// `Phi[i, j]`.
    pub fn entry(&self, i: usize, j: usize) -> T {
        match &self.payload {
            Payload::Dense(phi) => phi[i * self.l_cols + j],
            Payload::Indices(idx) => {
                if idx[i] == j {
                    T::one()
                } else {
                    T::zero()
                }
            }
        }
    }

    /// `Phi * x` for a length-L vector.
    pub fn phi(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        match &self.payload {
            Payload::Indices(idx) => idx.iter().map(|&i| x[i]).collect(),
            Payload::Dense(phi) => phi
                .chunks_exact(self.l_cols)
                .map(|row| {
                    row.iter()
                        .zip(x)
                        .fold(Complex::new(T::zero(), T::zero()), |acc, (&p, &v)| acc + v * p)
                })
                .collect(),
        }
    }

    /// `Phi^T * y` for a length-M vector.
    pub fn phi_t(&self, y: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut out = zeros(self.l_cols);
        match &self.payload {
            Payload::Indices(idx) => {
                for (&i, &v) in idx.iter().zip(y) {
                    out[i] = v;
                }
            }
            Payload::Dense(phi) => {
                for (row, &v) in phi.chunks_exact(self.l_cols).zip(y) {
                    for (o, &p) in out.iter_mut().zip(row) {
                        *o = *o + v * p;
                    }
                }
            }
        }
        out
    }

    /// `Phi * Phi^T` in `f64`.
    fn gram(&self) -> DMatrix<f64> {
        let m = self.m_rows;
        match &self.payload {
            Payload::Indices(_) => DMatrix::identity(m, m),
            Payload::Dense(phi) => {
                let rows = DMatrix::from_row_iterator(m, self.l_cols, phi.iter().map(|v| v.to_f64_lossy()));
                &rows * rows.transpose()
            }
        }
    }
}

/// Compressive samples of one transformed record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MeasurementVector<T: Real> {
    pub y: Vec<Complex<T>>,
    pub model_id: String,
    pub order: NptOrder,
    /// Uniform rate of the underlying record, carried for the bin-to-frequency map.
    pub fs: f64,
}

pub fn measure<T: Real>(
    model: &MeasurementModel<T>,
    z_n: &[Complex<T>],
    order: NptOrder,
    fs: f64,
) -> Result<MeasurementVector<T>> {
    if z_n.len() != model.l_cols {
        return Err(Error::Dimension {
            expected: model.l_cols,
            got: z_n.len(),
        });
    }
    Ok(MeasurementVector {
        y: model.phi(z_n),
        model_id: model.id(),
        order,
        fs,
    })
}

/// Matrix-free linear map with an adjoint.
pub trait LinearOperator<T: Real> {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn apply(&self, x: &[Complex<T>]) -> Vec<Complex<T>>;
    fn adjoint(&self, y: &[Complex<T>]) -> Vec<Complex<T>>;
}

/// Normalized adjoint mismatch `|<Ax, y> - <x, A*y>| / (||x|| ||y||)`.
pub fn adjoint_mismatch<T: Real, Op: LinearOperator<T>>(op: &Op, x: &[Complex<T>], y: &[Complex<T>]) -> f64 {
    let lhs = crate::scalar::inner(&op.apply(x), y);
    let rhs = crate::scalar::inner(x, &op.adjoint(y));
    let scale = (norm2(x) * norm2(y)).to_f64_lossy();
    (lhs - rhs).norm().to_f64_lossy() / scale
}

#[derive(Debug, Clone)]
enum GramFactor {
    Identity,
    Eigen { values: DVector<f64>, vectors: DMatrix<f64> },
}

/// `A f = Phi * IDFT(f)`, `A* y = DFT(Phi^T y)`.
#[derive(Debug, Clone)]
pub struct ForwardOperator<'a, T: Real> {
    model: &'a MeasurementModel<T>,
    dft: UnitaryDft<T>,
    gram: GramFactor,
}

pub fn forward_operator<T: Real>(model: &MeasurementModel<T>, dft_size: usize) -> Result<ForwardOperator<'_, T>> {
    if model.l_cols != dft_size {
        return Err(Error::Dimension {
            expected: model.l_cols,
            got: dft_size,
        });
    }
    let gram = match model.kind {
        SensingKind::RowSelection => GramFactor::Identity,
        SensingKind::DenseGaussian => {
            let eig = SymmetricEigen::new(model.gram());
            GramFactor::Eigen {
                values: eig.eigenvalues,
                vectors: eig.eigenvectors,
            }
        }
    };
    Ok(ForwardOperator {
        model,
        dft: UnitaryDft::new(dft_size),
        gram,
    })
}

impl<T: Real> LinearOperator<T> for ForwardOperator<'_, T> {
    fn rows(&self) -> usize {
        self.model.m_rows
    }

    fn cols(&self) -> usize {
        self.model.l_cols
    }

    fn apply(&self, f: &[Complex<T>]) -> Vec<Complex<T>> {
        let z = self.dft.inverse(f);
        self.model.phi(&z)
    }

    fn adjoint(&self, y: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut z = self.model.phi_t(y);
        self.dft.forward_in_place(&mut z);
        z
    }
}

impl<'a, T: Real> ForwardOperator<'a, T> {
    pub fn model(&self) -> &'a MeasurementModel<T> {
        self.model
    }

    pub fn dft(&self) -> &UnitaryDft<T> {
        &self.dft
    }

    /// Euclidean projection of `v` onto `{f : ||A f - y||_2 <= eps}`
    /// (the affine set `A f = y` when `eps = 0`).
    pub fn project(&self, v: &[Complex<T>], y: &[Complex<T>], eps: f64) -> Vec<Complex<T>> {
        let mut r = self.apply(v);
        for (ri, &yi) in r.iter_mut().zip(y) {
            *ri = *ri - yi;
        }
        let rnorm = norm2(&r).to_f64_lossy();
        if rnorm <= eps {
            return v.to_vec();
        }
        let w: Vec<Complex<T>> = match &self.gram {
            GramFactor::Identity => {
                let s = T::lit(1.0 - eps / rnorm);
                r.iter().map(|z| z * s).collect()
            }
            GramFactor::Eigen { values, vectors } => eigen_step(values, vectors, &r, eps),
        };
        let correction = self.adjoint(&w);
        v.iter().zip(&correction).map(|(a, b)| a - b).collect()
    }
}

/// `lambda (I + lambda G)^{-1} r` with `lambda` chosen so the new residual has
/// norm `eps`; `G^{-1} r` when `eps = 0`.
fn eigen_step<T: Real>(values: &DVector<f64>, vectors: &DMatrix<f64>, r: &[Complex<T>], eps: f64) -> Vec<Complex<T>> {
    let re = DVector::from_iterator(r.len(), r.iter().map(|z| z.re.to_f64_lossy()));
    let im = DVector::from_iterator(r.len(), r.iter().map(|z| z.im.to_f64_lossy()));
    let (tr, ti) = (vectors.tr_mul(&re), vectors.tr_mul(&im));
    let floor = values.max() * 1e-14;
    let gains: Vec<f64> = if eps <= 0.0 {
        values.iter().map(|&l| 1.0 / l.max(floor)).collect()
    } else {
        let mag2: Vec<f64> = tr.iter().zip(ti.iter()).map(|(a, b)| a * a + b * b).collect();
        let resid2 = |lambda: f64| -> f64 {
            mag2.iter()
                .zip(values.iter())
                .map(|(m, &l)| m / (1.0 + lambda * l.max(0.0)).powi(2))
                .sum()
        };
        let target = eps * eps;
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        while resid2(hi) > target && hi < 1e300 {
            lo = hi;
            hi *= 4.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if resid2(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        let lambda = hi;
        values.iter().map(|&l| lambda / (1.0 + lambda * l.max(0.0))).collect()
    };
    let gains = DVector::from_vec(gains);
    let wr = vectors * tr.component_mul(&gains);
    let wi = vectors * ti.component_mul(&gains);
    wr.iter()
        .zip(wi.iter())
        .map(|(&a, &b)| Complex::new(T::lit(a), T::lit(b)))
        .collect()
}
