//! Complex baseband-at-carrier synthesis of PSK-family signals and the AWGN
//! channel.
//!
//! Signals are generated at a uniform rate `f_s` as analytic (complex)
//! passband records `A * s(t) * exp(j 2 pi f_c t)`. MPSK and OQPSK use a
//! unit-energy square-root raised cosine pulse; MSK uses half-sinusoid
//! weighted rectangular pulses on offset branches.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::scalar::{energy, Real};

/// Pulse span used by [`synthesize`], in symbols.
pub const SRRC_SPAN_SYMBOLS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModulationType {
    #[serde(rename = "BPSK")]
    Bpsk,
    #[serde(rename = "QPSK")]
    Qpsk,
    #[serde(rename = "8PSK")]
    Psk8,
    #[serde(rename = "OQPSK")]
    Oqpsk,
    #[serde(rename = "MSK")]
    Msk,
}

impl ModulationType {
    pub const ALL: [ModulationType; 5] = [
        ModulationType::Bpsk,
        ModulationType::Qpsk,
        ModulationType::Psk8,
        ModulationType::Oqpsk,
        ModulationType::Msk,
    ];

    /// Number of constellation phases for the MPSK variants.
    pub fn phase_order(self) -> Option<usize> {
        match self {
            ModulationType::Bpsk => Some(2),
            ModulationType::Qpsk => Some(4),
            ModulationType::Psk8 => Some(8),
            ModulationType::Oqpsk | ModulationType::Msk => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModulationType::Bpsk => "BPSK",
            ModulationType::Qpsk => "QPSK",
            ModulationType::Psk8 => "8PSK",
            ModulationType::Oqpsk => "OQPSK",
            ModulationType::Msk => "MSK",
        }
    }

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&m| m == self).unwrap()
    }
}

impl fmt::Display for ModulationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModulationType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "BPSK" => Ok(ModulationType::Bpsk),
            "QPSK" => Ok(ModulationType::Qpsk),
            "8PSK" | "PSK8" => Ok(ModulationType::Psk8),
            "OQPSK" => Ok(ModulationType::Oqpsk),
            "MSK" => Ok(ModulationType::Msk),
            other => Err(param(format!("unknown modulation {other:?}"))),
        }
    }
}

/// Generation parameters. Frequencies in Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalParams {
    pub fc: f64,
    pub rs: f64,
    pub fs: f64,
    pub alpha: f64,
    pub n_symbols: usize,
    pub amplitude: f64,
    /// `None` means noiseless.
    pub snr_db: Option<f64>,
    pub seed: u64,
}

impl SignalParams {
    /// 1024 symbols at f_c = 0.5 kHz, R_s = 0.8 kHz, f_s = 6.4 kHz, alpha = 0.5.
    pub fn paper_profile() -> Self {
        Self {
            fc: 500.0,
            rs: 800.0,
            fs: 6400.0,
            alpha: 0.5,
            n_symbols: 1024,
            amplitude: 1.0,
            snr_db: None,
            seed: 0,
        }
    }

    /// Same rates with 256 symbols (L = 2048).
    pub fn desk_profile() -> Self {
        Self {
            n_symbols: 256,
            ..Self::paper_profile()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Integer samples per symbol, or an error when `f_s / R_s` is fractional.
    pub fn samples_per_symbol(&self) -> Result<usize> {
        if !(self.rs > 0.0 && self.fs > 0.0) {
            return Err(param("rates must be positive"));
        }
        let ratio = self.fs / self.rs;
        let sps = ratio.round();
        if (ratio - sps).abs() > 1e-9 * ratio.max(1.0) || sps < 2.0 {
            return Err(param(format!(
                "f_s / R_s = {ratio} must be an integer of at least 2"
            )));
        }
        Ok(sps as usize)
    }

    pub fn record_len(&self) -> Result<usize> {
        Ok(self.n_symbols * self.samples_per_symbol()?)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.fc, self.rs, self.fs, self.alpha, self.amplitude]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(param("signal parameters must be finite"));
        }
        if self.fc <= 0.0 {
            return Err(param("carrier frequency must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(param(format!("roll-off {} outside (0, 1)", self.alpha)));
        }
        if self.amplitude <= 0.0 {
            return Err(param("amplitude must be positive"));
        }
        if self.n_symbols < 2 {
            return Err(param("need at least two symbols"));
        }
        self.samples_per_symbol()?;
        let occupied = 2.0 * (self.fc + (1.0 + self.alpha) * self.rs / 2.0);
        if self.fs <= occupied {
            return Err(param(format!(
                "f_s = {} does not exceed 2 (f_c + (1 + alpha) R_s / 2) = {occupied}",
                self.fs
            )));
        }
        // Order-8 lines out to +-2 R_s must stay inside [0, f_s).
        if 8.0 * self.fc + 2.0 * self.rs >= self.fs {
            return Err(param(format!(
                "8 f_c + 2 R_s = {} wraps past f_s = {}",
                8.0 * self.fc + 2.0 * self.rs,
                self.fs
            )));
        }
        Ok(())
    }
}

/// Uniform-rate complex record with its generation metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct BasebandRecord<T: Real> {
    pub samples: Vec<Complex<T>>,
    pub params: SignalParams,
    pub modulation: ModulationType,
    /// Empirical SNR of the added noise, when noise was added.
    pub achieved_snr_db: Option<f64>,
}

impl<T: Real> BasebandRecord<T> {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        energy(&self.samples).to_f64_lossy() / self.samples.len() as f64
    }

    /// Multiplies every sample by a positive real factor.
    pub fn scaled(&self, factor: f64) -> Self {
        let c = T::lit(factor);
        Self {
            samples: self.samples.iter().map(|z| z * c).collect(),
            ..self.clone()
        }
    }
}

/// Unit-energy square-root raised cosine taps of length `span_symbols * sps + 1`.
pub fn srrc_pulse<T: Real>(alpha: f64, sps: usize, span_symbols: usize) -> Result<Vec<T>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(param(format!("roll-off {alpha} outside (0, 1)")));
    }
    if sps < 2 {
        return Err(param("samples per symbol must be at least 2"));
    }
    if span_symbols < 6 || !span_symbols.is_multiple_of(2) {
        return Err(param("pulse span must be even and at least 6 symbols"));
    }
    let half = (span_symbols * sps / 2) as isize;
    let pi = std::f64::consts::PI;
    let taps: Vec<f64> = (-half..=half)
        .map(|k| {
            let t = k as f64 / sps as f64;
            if k == 0 {
                1.0 - alpha + 4.0 * alpha / pi
            } else if (4.0 * alpha * t.abs() - 1.0).abs() < 1e-9 {
                let a = pi / (4.0 * alpha);
                alpha / 2f64.sqrt() * ((1.0 + 2.0 / pi) * a.sin() + (1.0 - 2.0 / pi) * a.cos())
            } else {
                let num = (pi * t * (1.0 - alpha)).sin() + 4.0 * alpha * t * (pi * t * (1.0 + alpha)).cos();
                let den = pi * t * (1.0 - (4.0 * alpha * t).powi(2));
                num / den
            }
        })
        .collect();
    let norm = taps.iter().map(|h| h * h).sum::<f64>().sqrt();
    Ok(taps.into_iter().map(|h| T::lit(h / norm)).collect())
}

/// Synthesizes a noiseless record with i.i.d. uniform symbols drawn from `params.seed`.
pub fn synthesize<T: Real>(modulation: ModulationType, params: &SignalParams) -> Result<BasebandRecord<T>> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = params.n_symbols;
    match modulation {
        ModulationType::Bpsk | ModulationType::Qpsk | ModulationType::Psk8 => {
            let order = modulation.phase_order().unwrap();
            let indices: Vec<usize> = (0..n).map(|_| rng.random_range(0..order)).collect();
            synthesize_mpsk(modulation, params, &indices)
        }
        ModulationType::Oqpsk => {
            let a: Vec<i8> = (0..n).map(|_| random_sign(&mut rng)).collect();
            let b: Vec<i8> = (0..n).map(|_| random_sign(&mut rng)).collect();
            synthesize_oqpsk(params, &a, &b)
        }
        ModulationType::Msk => {
            // Branch symbols span two bits; one extra on each branch covers the edges.
            let branch = n / 2 + 2;
            let a: Vec<i8> = (0..branch).map(|_| random_sign(&mut rng)).collect();
            let b: Vec<i8> = (0..branch).map(|_| random_sign(&mut rng)).collect();
            synthesize_msk(params, &a, &b)
        }
    }
}

fn random_sign(rng: &mut ChaCha8Rng) -> i8 {
    if rng.random::<bool>() {
        1
    } else {
        -1
    }
}

/// MPSK from explicit symbol indices `m_n - 1` in `0..M`.
pub fn synthesize_mpsk<T: Real>(
    modulation: ModulationType,
    params: &SignalParams,
    indices: &[usize],
) -> Result<BasebandRecord<T>> {
    params.validate()?;
    let order = modulation
        .phase_order()
        .ok_or_else(|| param(format!("{modulation} is not an MPSK variant")))?;
    if indices.len() != params.n_symbols {
        return Err(Error::Dimension {
            expected: params.n_symbols,
            got: indices.len(),
        });
    }
    if let Some(&bad) = indices.iter().find(|&&i| i >= order) {
        return Err(param(format!("symbol index {bad} out of range for {modulation}")));
    }
    let symbols: Vec<Complex<f64>> = indices
        .iter()
        .map(|&i| Complex::from_polar(1.0, 2.0 * std::f64::consts::PI * i as f64 / order as f64))
        .collect();
    let sps = params.samples_per_symbol()?;
    let shaped = shape_symbols(&symbols, params.alpha, sps, 0, params.n_symbols * sps)?;
    Ok(finish(modulation, params, shaped))
}

/// OQPSK from explicit +-1 branch sequences; the quadrature branch lags by half a symbol.
pub fn synthesize_oqpsk<T: Real>(params: &SignalParams, a: &[i8], b: &[i8]) -> Result<BasebandRecord<T>> {
    params.validate()?;
    let sps = params.samples_per_symbol()?;
    if sps % 2 != 0 {
        return Err(param("OQPSK needs an even number of samples per symbol"));
    }
    if a.len() != params.n_symbols || b.len() != params.n_symbols {
        return Err(Error::Dimension {
            expected: params.n_symbols,
            got: a.len().min(b.len()),
        });
    }
    check_signs(a)?;
    check_signs(b)?;
    let len = params.n_symbols * sps;
    let ia: Vec<Complex<f64>> = a.iter().map(|&v| Complex::new(v as f64, 0.0)).collect();
    let qb: Vec<Complex<f64>> = b.iter().map(|&v| Complex::new(0.0, v as f64)).collect();
    let i = shape_symbols(&ia, params.alpha, sps, 0, len)?;
    let q = shape_symbols(&qb, params.alpha, sps, sps / 2, len)?;
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let z = i.iter().zip(&q).map(|(x, y)| (x + y) * scale).collect();
    Ok(finish(ModulationType::Oqpsk, params, z))
}

/// MSK with bit period `1 / R_s`. Branch symbol `a[n]` covers bits
/// `[2n - 1, 2n + 1)` under a cosine weight and `b[n]` covers `[2n, 2n + 2)`
/// under a sine weight, so the envelope is constant.
pub fn synthesize_msk<T: Real>(params: &SignalParams, a: &[i8], b: &[i8]) -> Result<BasebandRecord<T>> {
    params.validate()?;
    let sps = params.samples_per_symbol()?;
    let needed = params.n_symbols / 2 + 1;
    if a.len() < needed || b.len() < needed {
        return Err(Error::Dimension {
            expected: needed,
            got: a.len().min(b.len()),
        });
    }
    check_signs(a)?;
    check_signs(b)?;
    let len = params.n_symbols * sps;
    let half_pi = std::f64::consts::FRAC_PI_2;
    let z = (0..len)
        .map(|k| {
            let u = k as f64 / sps as f64;
            let ai = a[(k + sps) / (2 * sps)] as f64;
            let bi = b[k / (2 * sps)] as f64;
            Complex::new(ai * (half_pi * u).cos(), bi * (half_pi * u).sin())
        })
        .collect();
    Ok(finish(ModulationType::Msk, params, z))
}

fn check_signs(v: &[i8]) -> Result<()> {
    if v.iter().all(|&x| x == 1 || x == -1) {
        Ok(())
    } else {
        Err(param("branch sequences must contain only +1 / -1"))
    }
}

/// Pulse-shapes an impulse train (symbol n at sample `n * sps + offset`) with
/// the SRRC filter, compensating the filter group delay. Output power is 1 for
/// unit-modulus symbols.
fn shape_symbols(
    symbols: &[Complex<f64>],
    alpha: f64,
    sps: usize,
    offset: usize,
    len: usize,
) -> Result<Vec<Complex<f64>>> {
    let taps = srrc_pulse::<f64>(alpha, sps, SRRC_SPAN_SYMBOLS)?;
    let delay = (taps.len() - 1) / 2;
    let gain = (sps as f64).sqrt();
    let mut out = vec![Complex::new(0.0, 0.0); len];
    for (n, &c) in symbols.iter().enumerate() {
        let center = n * sps + offset;
        for (j, &h) in taps.iter().enumerate() {
            let k = center + j;
            if k < delay {
                continue;
            }
            let k = k - delay;
            if k >= len {
                break;
            }
            out[k] += c * (h * gain);
        }
    }
    Ok(out)
}

fn finish<T: Real>(modulation: ModulationType, params: &SignalParams, baseband: Vec<Complex<f64>>) -> BasebandRecord<T> {
    let step = params.fc / params.fs;
    let samples = baseband
        .into_iter()
        .enumerate()
        .map(|(k, s)| {
            let cycles = (step * k as f64).fract();
            let carrier = Complex::from_polar(params.amplitude, 2.0 * std::f64::consts::PI * cycles);
            let v = s * carrier;
            Complex::new(T::lit(v.re), T::lit(v.im))
        })
        .collect();
    BasebandRecord {
        samples,
        params: SignalParams {
            snr_db: None,
            ..params.clone()
        },
        modulation,
        achieved_snr_db: None,
    }
}

/// Adds circular complex Gaussian noise at `snr_db` relative to the record's
/// mean power. `f64::INFINITY` returns the record unchanged.
pub fn add_awgn<T: Real>(record: &BasebandRecord<T>, snr_db: f64, seed: u64) -> BasebandRecord<T> {
    if snr_db == f64::INFINITY {
        return record.clone();
    }
    let signal_power = record.mean_power();
    let noise_var = signal_power / 10f64.powf(snr_db / 10.0);
    let sd = (noise_var / 2.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise_energy = 0.0;
    let samples: Vec<Complex<T>> = record
        .samples
        .iter()
        .map(|z| {
            let nr: f64 = rng.sample::<f64, _>(StandardNormal) * sd;
            let ni: f64 = rng.sample::<f64, _>(StandardNormal) * sd;
            noise_energy += nr * nr + ni * ni;
            Complex::new(z.re + T::lit(nr), z.im + T::lit(ni))
        })
        .collect();
    let noise_power = noise_energy / record.samples.len().max(1) as f64;
    let achieved = if noise_power > 0.0 {
        Some(10.0 * (signal_power / noise_power).log10())
    } else {
        None
    };
    BasebandRecord {
        samples,
        params: SignalParams {
            snr_db: Some(snr_db),
            ..record.params.clone()
        },
        modulation: record.modulation,
        achieved_snr_db: achieved,
    }
}
