use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::npt::NptOrder;
use crate::scalar::Real;

/// Diagnostics attached to a reconstructed spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub iterations: usize,
    pub converged: bool,
    /// `||y - A f||_2` of the returned coefficients.
    pub residual: f64,
    /// `||f||_1`, or `||B f||_1` in analysis mode.
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub rho: f64,
}

/// Length-L DFT coefficients of an NPT-transformed record.
///
/// Bin `k` sits at `k * f_s / L` on `[0, f_s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SpectrumEstimate<T: Real> {
    pub coeffs: Vec<Complex<T>>,
    pub order: NptOrder,
    pub fs: f64,
    /// True when the solve used the smoothing analysis prior.
    pub smoothed: bool,
    /// `B * coeffs`, kept when the analysis prior was used.
    pub smoothed_view: Option<Vec<Complex<T>>>,
    pub report: Option<SolverReport>,
}

impl<T: Real> SpectrumEstimate<T> {
    pub fn new(coeffs: Vec<Complex<T>>, order: NptOrder, fs: f64) -> Self {
        Self {
            coeffs,
            order,
            fs,
            smoothed: false,
            smoothed_view: None,
            report: None,
        }
    }

    pub fn zeros(len: usize, order: NptOrder, fs: f64) -> Self {
        Self::new(crate::scalar::zeros(len), order, fs)
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn bin_hz(&self) -> f64 {
        self.fs / self.coeffs.len() as f64
    }

    pub fn freq_of_bin(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_hz()
    }

    /// Nearest bin to `freq_hz`, wrapped onto `[0, L)`.
    pub fn bin_of_freq(&self, freq_hz: f64) -> usize {
        let l = self.coeffs.len() as i64;
        ((freq_hz / self.bin_hz()).round() as i64).rem_euclid(l) as usize
    }

    pub fn magnitudes(&self) -> Vec<T> {
        self.coeffs.iter().map(|z| z.norm()).collect()
    }

    /// The view used for features: the smoothed spectrum when available.
    pub fn feature_view(&self) -> &[Complex<T>] {
        self.smoothed_view.as_deref().unwrap_or(&self.coeffs)
    }

    pub fn energy(&self) -> T {
        crate::scalar::energy(&self.coeffs)
    }
}
