//! Fixed-length spectral features and the line energy ratio.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::npt::NptOrder;
use crate::scalar::Real;
use crate::sigsyn::ModulationType;
use crate::spectrum::SpectrumEstimate;

/// Block size used throughout the classification pipeline.
pub const DEFAULT_BLOCK: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Magnitudes divided by `sqrt(sum |f_k|^2)` of their own order.
    PerRecordEnergy,
}

/// Top-`m` normalized magnitudes of the order-2, -4 and -8 spectra, each
/// block sorted in descending order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct FeatureVector<T: Real> {
    pub values: Vec<T>,
    pub m: usize,
    pub normalization: Normalization,
    pub label: Option<ModulationType>,
}

impl<T: Real> FeatureVector<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn block(&self, order: NptOrder) -> &[T] {
        let i = NptOrder::FEATURE_ORDERS
            .iter()
            .position(|&o| o == order)
            .expect("feature blocks exist for orders 2, 4 and 8");
        &self.values[i * self.m..(i + 1) * self.m]
    }

    pub fn with_label(mut self, label: ModulationType) -> Self {
        self.label = Some(label);
        self
    }
}

/// Orders missing from `spectra` contribute an all-zero block.
pub fn extract_features<T: Real>(spectra: &BTreeMap<NptOrder, SpectrumEstimate<T>>, m: usize) -> Result<FeatureVector<T>> {
    if spectra.is_empty() {
        return Err(param("no spectra to extract features from"));
    }
    if m < 5 {
        return Err(param(format!("feature block size {m} below 5")));
    }
    let mut values = Vec::with_capacity(3 * m);
    for order in NptOrder::FEATURE_ORDERS {
        match spectra.get(&order) {
            Some(s) => values.extend(top_block(s.feature_view(), m)),
            None => values.extend(std::iter::repeat_n(T::zero(), m)),
        }
    }
    Ok(FeatureVector {
        values,
        m,
        normalization: Normalization::PerRecordEnergy,
        label: None,
    })
}

fn top_block<T: Real>(view: &[num_complex::Complex<T>], m: usize) -> Vec<T> {
    let total = crate::scalar::energy(view).sqrt();
    let mut mags: Vec<T> = if total > T::zero() {
        view.iter().map(|z| z.norm() / total).collect()
    } else {
        vec![T::zero(); view.len()]
    };
    mags.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    mags.resize(m, T::zero());
    mags
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyRatio {
    pub r_p: f64,
    pub peak_freq: f64,
    pub order: NptOrder,
}

/// Fraction of the spectral energy within `radius_bins` of the bin nearest `peak_freq`.
pub fn energy_ratio<T: Real>(spectrum: &SpectrumEstimate<T>, peak_freq: f64, radius_bins: usize) -> Result<EnergyRatio> {
    if !(0.0..spectrum.fs).contains(&peak_freq) {
        return Err(param(format!("peak frequency {peak_freq} outside [0, {})", spectrum.fs)));
    }
    let l = spectrum.len();
    let e_s: f64 = spectrum.coeffs.iter().map(|z| z.norm_sqr().to_f64_lossy()).sum();
    if e_s <= 0.0 {
        return Err(Error::ZeroEnergy);
    }
    let center = spectrum.bin_of_freq(peak_freq);
    let radius = radius_bins.min((l - 1) / 2);
    let e_p: f64 = (0..=2 * radius)
        .map(|i| spectrum.coeffs[(center + l + i - radius) % l].norm_sqr().to_f64_lossy())
        .sum();
    Ok(EnergyRatio {
        r_p: (e_p / e_s).clamp(0.0, 1.0),
        peak_freq,
        order: spectrum.order,
    })
}
