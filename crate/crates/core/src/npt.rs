//! Nth-power nonlinear transform, full-rate reference spectra and discrete
//! line detection.
//!
//! Raising a PSK record to the power N collapses the phase modulation into
//! discrete spectral lines whenever N is a multiple of the constellation
//! order. The line layout per class is summarised by [`expected_peak_count`]
//! and used downstream by the estimator.

use std::collections::BTreeSet;
use std::fmt;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::dft::UnitaryDft;
use crate::error::{param, Error, Result};
use crate::scalar::Real;
use crate::sigsyn::{BasebandRecord, ModulationType};
use crate::spectrum::SpectrumEstimate;

/// Nonlinearity exponent; 1 is the identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct NptOrder(u32);

impl NptOrder {
    pub const NONE: NptOrder = NptOrder(1);
    pub const SQUARE: NptOrder = NptOrder(2);
    pub const FOURTH: NptOrder = NptOrder(4);
    pub const EIGHTH: NptOrder = NptOrder(8);

    /// The orders used for features, in block order.
    pub const FEATURE_ORDERS: [NptOrder; 3] = [NptOrder::SQUARE, NptOrder::FOURTH, NptOrder::EIGHTH];

    pub fn new(n: u32) -> Result<Self> {
        match n {
            1 | 2 | 4 | 8 => Ok(NptOrder(n)),
            _ => Err(param(format!("NPT order {n} not in {{1, 2, 4, 8}}"))),
        }
    }

    pub fn get(self) -> u32 {
        self.0
    }
}

impl TryFrom<u32> for NptOrder {
    type Error = Error;
    fn try_from(n: u32) -> Result<Self> {
        NptOrder::new(n)
    }
}

impl From<NptOrder> for u32 {
    fn from(o: NptOrder) -> u32 {
        o.0
    }
}

impl fmt::Display for NptOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Element-wise `z^N`.
pub fn raise_power<T: Real>(samples: &[Complex<T>], order: NptOrder) -> Vec<Complex<T>> {
    samples
        .iter()
        .map(|&z| {
            let mut w = z;
            let mut n = order.get();
            while n > 1 {
                w = w * w;
                n /= 2;
            }
            w
        })
        .collect()
}

/// Full-rate unitary DFT of the transformed record.
pub fn nyquist_spectrum<T: Real>(record: &BasebandRecord<T>, order: NptOrder) -> Result<SpectrumEstimate<T>> {
    if record.len() < 256 {
        return Err(param(format!("record length {} below 256", record.len())));
    }
    let z = raise_power(&record.samples, order);
    let coeffs = UnitaryDft::new(z.len()).forward(&z);
    Ok(SpectrumEstimate::new(coeffs, order, record.params.fs))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub freq_hz: f64,
    pub bin: usize,
    pub magnitude: f64,
}

/// Detected lines, strongest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakSet {
    pub peaks: Vec<Peak>,
    /// Global level `eta * max |X|`; every peak is at or above it.
    pub threshold: f64,
    pub eta: f64,
    pub order: NptOrder,
    pub fs: f64,
    pub bin_hz: f64,
    pub len: usize,
}

impl PeakSet {
    pub fn len(&self) -> usize {
        self.peaks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.peaks.iter().map(|p| p.freq_hz).collect()
    }

    /// Builds a set from bare frequencies with descending synthetic magnitudes.
    pub fn from_frequencies(freqs: &[f64], order: NptOrder, fs: f64, len: usize) -> Self {
        let bin_hz = fs / len as f64;
        let peaks = freqs
            .iter()
            .enumerate()
            .map(|(i, &f)| Peak {
                freq_hz: f,
                bin: ((f / bin_hz).round() as i64).rem_euclid(len as i64) as usize,
                magnitude: 1.0 / (i + 1) as f64,
            })
            .collect();
        Self {
            peaks,
            threshold: 0.0,
            eta: 0.0,
            order,
            fs,
            bin_hz,
            len,
        }
    }
}

/// Line detector settings.
///
/// A bin is a line when it is a local maximum, reaches `eta * max |X|`, and
/// stands `prominence` times above the median magnitude of the surrounding
/// `+-floor_half_window` bins. Maxima closer than `merge_radius` bins are
/// merged into the stronger one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakDetector {
    pub eta: f64,
    pub prominence: f64,
    pub floor_half_window: usize,
    pub merge_radius: usize,
}

impl Default for PeakDetector {
    fn default() -> Self {
        Self {
            eta: 0.05,
            prominence: 5.0,
            floor_half_window: 64,
            merge_radius: 3,
        }
    }
}

impl PeakDetector {
    pub fn with_eta(eta: f64) -> Self {
        Self {
            eta,
            ..Self::default()
        }
    }

    pub fn detect<T: Real>(&self, spectrum: &SpectrumEstimate<T>) -> Result<PeakSet> {
        detect_peaks(spectrum, self)
    }
}

pub fn detect_peaks<T: Real>(spectrum: &SpectrumEstimate<T>, detector: &PeakDetector) -> Result<PeakSet> {
    if !(detector.eta > 0.0 && detector.eta < 1.0) {
        return Err(param(format!("eta {} outside (0, 1)", detector.eta)));
    }
    let l = spectrum.len();
    let mag: Vec<f64> = spectrum.coeffs.iter().map(|z| z.norm().to_f64_lossy()).collect();
    let max = mag.iter().cloned().fold(0.0, f64::max);
    let mut set = PeakSet {
        peaks: Vec::new(),
        threshold: detector.eta * max,
        eta: detector.eta,
        order: spectrum.order,
        fs: spectrum.fs,
        bin_hz: spectrum.bin_hz(),
        len: l,
    };
    if max <= 0.0 || l < 3 {
        return Ok(set);
    }

    let mut candidates: Vec<usize> = (0..l)
        .filter(|&k| {
            let a = mag[k];
            a >= set.threshold && a > mag[(k + l - 1) % l] && a >= mag[(k + 1) % l]
        })
        .filter(|&k| mag[k] >= detector.prominence * local_median(&mag, k, detector.floor_half_window))
        .collect();
    candidates.sort_by(|&a, &b| mag[b].total_cmp(&mag[a]).then(a.cmp(&b)));

    let mut kept: Vec<usize> = Vec::new();
    for k in candidates {
        if kept.iter().all(|&j| circular_distance(j, k, l) > detector.merge_radius) {
            kept.push(k);
        }
    }
    set.peaks = kept
        .into_iter()
        .map(|k| Peak {
            freq_hz: spectrum.freq_of_bin(k),
            bin: k,
            magnitude: mag[k],
        })
        .collect();
    Ok(set)
}

pub(crate) fn circular_distance(a: usize, b: usize, len: usize) -> usize {
    let d = a.abs_diff(b);
    d.min(len - d)
}

fn local_median(mag: &[f64], center: usize, half: usize) -> f64 {
    let l = mag.len();
    let half = half.min((l - 1) / 2);
    let mut window: Vec<f64> = (0..=2 * half)
        .map(|i| mag[(center + l + i - half) % l])
        .collect();
    let mid = window.len() / 2;
    *window.select_nth_unstable_by(mid, |a, b| a.total_cmp(b)).1
}

/// Admissible number of discrete lines for a class under a nonlinearity.
///
/// OQPSK and MSK at order 8 have no tabulated count.
pub fn expected_peak_count(modulation: ModulationType, order: NptOrder) -> Result<BTreeSet<usize>> {
    use ModulationType::*;
    let counts: &[usize] = match (order.get(), modulation) {
        (1, _) => &[0],
        (2, Bpsk) => &[3],
        (2, Qpsk) | (2, Psk8) => &[0],
        (2, Oqpsk) | (2, Msk) => &[2],
        (4, Bpsk) | (4, Qpsk) | (4, Oqpsk) => &[3, 5],
        (4, Psk8) => &[0],
        (4, Msk) => &[2],
        (8, Bpsk) | (8, Qpsk) | (8, Psk8) => &[3, 5],
        _ => return Err(Error::UndefinedCell { modulation, order }),
    };
    Ok(counts.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::energy;
    use crate::sigsyn::{synthesize, SignalParams};

    fn tone(len: usize, bin: f64) -> Vec<Complex<f64>> {
        (0..len)
            .map(|k| Complex::from_polar(1.0, 2.0 * std::f64::consts::PI * bin * k as f64 / len as f64))
            .collect()
    }

    #[test]
    fn order_validation() {
        assert!(NptOrder::new(3).is_err());
        assert!(NptOrder::new(16).is_err());
        assert_eq!(NptOrder::new(4).unwrap(), NptOrder::FOURTH);
        let o: NptOrder = serde_json::from_str("8").unwrap();
        assert_eq!(o, NptOrder::EIGHTH);
        assert!(serde_json::from_str::<NptOrder>("6").is_err());
    }

    #[test]
    fn identity_and_ones() {
        let x = tone(32, 3.0);
        assert_eq!(raise_power(&x, NptOrder::NONE), x);
        let ones = vec![Complex::new(1.0, 0.0); 16];
        assert_eq!(raise_power(&ones, NptOrder::EIGHTH), ones);
    }

    #[test]
    fn squaring_doubles_tone_frequency() {
        let len = 1024;
        let sq = raise_power(&tone(len, 37.0), NptOrder::SQUARE);
        let spec = UnitaryDft::new(len).forward(&sq);
        let peak = spec
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .unwrap()
            .0;
        assert_eq!(peak, 74);
    }

    #[test]
    fn parseval_on_oracle_spectrum() {
        let rec = synthesize::<f64>(ModulationType::Qpsk, &SignalParams::desk_profile()).unwrap();
        for order in [NptOrder::NONE, NptOrder::FOURTH] {
            let s = nyquist_spectrum(&rec, order).unwrap();
            let z = raise_power(&rec.samples, order);
            let (a, b) = (energy(&s.coeffs), energy(&z));
            assert!((a - b).abs() / b < 1e-9);
        }
    }

    #[test]
    fn short_record_rejected() {
        let mut rec = synthesize::<f64>(ModulationType::Qpsk, &SignalParams::desk_profile()).unwrap();
        rec.samples.truncate(128);
        assert!(nyquist_spectrum(&rec, NptOrder::SQUARE).is_err());
    }

    #[test]
    fn zero_spectrum_has_no_peaks() {
        let s = SpectrumEstimate::<f64>::zeros(512, NptOrder::SQUARE, 6400.0);
        assert!(detect_peaks(&s, &PeakDetector::default()).unwrap().is_empty());
    }

    #[test]
    fn eta_must_be_a_fraction() {
        let s = SpectrumEstimate::<f64>::zeros(512, NptOrder::SQUARE, 6400.0);
        assert!(detect_peaks(&s, &PeakDetector::with_eta(1.0)).is_err());
        assert!(detect_peaks(&s, &PeakDetector::with_eta(0.0)).is_err());
    }

    #[test]
    fn close_maxima_merge_into_the_stronger() {
        let mut coeffs = crate::scalar::zeros::<f64>(512);
        coeffs[100] = Complex::new(1.0, 0.0);
        coeffs[102] = Complex::new(0.8, 0.0);
        coeffs[300] = Complex::new(0.5, 0.0);
        let s = SpectrumEstimate::new(coeffs, NptOrder::SQUARE, 512.0);
        let peaks = detect_peaks(&s, &PeakDetector::default()).unwrap();
        assert_eq!(peaks.peaks.iter().map(|p| p.bin).collect::<Vec<_>>(), vec![100, 300]);
        assert!(peaks.peaks.iter().all(|p| p.magnitude >= peaks.threshold));
    }

    #[test]
    fn bpsk_square_lines_and_msk_half_offsets() {
        let p = SignalParams::paper_profile();
        let det = PeakDetector::default();
        let bpsk = synthesize::<f64>(ModulationType::Bpsk, &p).unwrap();
        let peaks = det.detect(&nyquist_spectrum(&bpsk, NptOrder::SQUARE).unwrap()).unwrap();
        let mut f = peaks.frequencies();
        f.sort_by(f64::total_cmp);
        assert_eq!(f.len(), 3);
        for (got, want) in f.iter().zip([200.0, 1000.0, 1800.0]) {
            assert!((got - want).abs() <= peaks.bin_hz);
        }

        let msk = synthesize::<f64>(ModulationType::Msk, &p).unwrap();
        let peaks = det.detect(&nyquist_spectrum(&msk, NptOrder::SQUARE).unwrap()).unwrap();
        let mut f = peaks.frequencies();
        f.sort_by(f64::total_cmp);
        assert_eq!(f.len(), 2);
        for (got, want) in f.iter().zip([600.0, 1400.0]) {
            assert!((got - want).abs() <= peaks.bin_hz);
        }
    }

    #[test]
    fn qpsk_square_stays_below_bpsk_reference() {
        let p = SignalParams::paper_profile();
        let peak = |m| {
            let rec = synthesize::<f64>(m, &p).unwrap();
            let s = nyquist_spectrum(&rec, NptOrder::SQUARE).unwrap();
            let e = energy(&s.coeffs).sqrt();
            s.coeffs.iter().map(|z| z.norm() / e).fold(0.0, f64::max)
        };
        assert!(peak(ModulationType::Qpsk) < 0.1 * peak(ModulationType::Bpsk));
    }

    #[test]
    fn admissible_counts_lookup() {
        use ModulationType::*;
        assert_eq!(expected_peak_count(Bpsk, NptOrder::SQUARE).unwrap(), [3].into());
        assert_eq!(expected_peak_count(Psk8, NptOrder::FOURTH).unwrap(), [0].into());
        assert_eq!(expected_peak_count(Qpsk, NptOrder::FOURTH).unwrap(), [3, 5].into());
        assert!(matches!(
            expected_peak_count(Oqpsk, NptOrder::EIGHTH),
            Err(Error::UndefinedCell { .. })
        ));
        assert!(expected_peak_count(Msk, NptOrder::EIGHTH).is_err());
    }
}
