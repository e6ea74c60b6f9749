//! Full-rate spectra against closed-form line predictions.

use nptcs::estimate::{estimate_params, estimation_order};
use nptcs::features::energy_ratio;
use nptcs::npt::{expected_peak_count, nyquist_spectrum, NptOrder, PeakDetector};
use nptcs::sigsyn::{synthesize, ModulationType, SignalParams};
use nptcs::Spectrum;
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const SEEDS: u64 = 10;

fn spectrum(m: ModulationType, order: NptOrder, seed: u64) -> Spectrum {
    let p = SignalParams::paper_profile().with_seed(seed);
    nyquist_spectrum(&synthesize::<f64>(m, &p).unwrap(), order).unwrap()
}

fn defined_cells() -> Vec<(ModulationType, NptOrder)> {
    ModulationType::ALL
        .iter()
        .flat_map(|&m| [1, 2, 4, 8].map(|o| (m, NptOrder::new(o).unwrap())))
        .filter(|&(m, o)| expected_peak_count(m, o).is_ok())
        .collect()
}

#[test]
fn line_counts_hold_across_seeds() {
    let det = PeakDetector::default();
    for seed in 0..SEEDS {
        for (m, o) in defined_cells() {
            let count = det.detect(&spectrum(m, o, seed)).unwrap().len();
            let admissible = expected_peak_count(m, o).unwrap();
            assert!(admissible.contains(&count), "{m}/{o} seed {seed}: {count} lines, expected {admissible:?}");
        }
    }
}

#[test]
fn lineless_cells_stay_below_a_tenth_of_the_bpsk_square_reference() {
    let max = |s: &Spectrum| s.magnitudes().into_iter().fold(0.0, f64::max);
    let reference = max(&spectrum(ModulationType::Bpsk, NptOrder::SQUARE, 0));
    let over: Vec<String> = defined_cells()
        .into_iter()
        .filter(|&(m, o)| expected_peak_count(m, o).unwrap().contains(&0))
        .map(|(m, o)| (m, o, max(&spectrum(m, o, 0)) / reference))
        .filter(|&(_, _, r)| r >= 0.1)
        .map(|(m, o, r)| format!("{m}/{o}: {r:.3}"))
        .collect();
    assert!(over.is_empty(), "{over:?}");
}

#[test]
fn bpsk_square_center_line_carries_the_mean_power() {
    // E[z^2] over a symbol period equals E|z|^2 = 1 for real symbols, so the
    // unitary DFT bin at 2 fc holds sqrt(L).
    let p = SignalParams::paper_profile();
    let s = spectrum(ModulationType::Bpsk, NptOrder::SQUARE, 0);
    let center = s.coeffs[s.bin_of_freq(2.0 * p.fc)].norm();
    let expected = (s.len() as f64).sqrt();
    assert!((center / expected - 1.0).abs() < 0.02, "{center} vs {expected}");
}

#[test]
fn estimates_from_oracle_spectra_are_bin_accurate() {
    let p = SignalParams::paper_profile();
    let l = p.record_len().unwrap() as f64;
    let det = PeakDetector::default();
    for seed in 0..SEEDS {
        for m in ModulationType::ALL {
            let order = estimation_order(m);
            let est = estimate_params(&det.detect(&spectrum(m, order, seed)).unwrap(), m).unwrap();
            let n = order.get() as f64;
            assert!((est.fc_hat - p.fc).abs() <= p.fs / (n * l), "{m} seed {seed}: fc {}", est.fc_hat);
            let rs = est.rs_hat.expect("side lines present");
            assert!((rs - p.rs).abs() <= 2.0 * p.fs / l, "{m} seed {seed}: rs {rs}");
            if let Some(cross) = est.fc_cross_check {
                assert!((cross - est.fc_hat).abs() <= p.fs / (n * l), "{m} seed {seed}: {cross} vs {}", est.fc_hat);
            }
        }
    }
}

#[test]
fn qpsk_fourth_power_lines_give_the_closed_form_estimates() {
    let p = SignalParams::paper_profile();
    let det = PeakDetector::default();
    let peaks = det.detect(&spectrum(ModulationType::Qpsk, NptOrder::FOURTH, 0)).unwrap();
    let mut f: Vec<f64> = peaks.frequencies().into_iter().take(3).collect();
    f.sort_by(f64::total_cmp);
    let (a2, a1, a3) = (f[0], f[1], f[2]);
    let fc = a1 / 4.0;
    let rs = (a3 - a2) / 2.0;
    let est = estimate_params(&peaks, ModulationType::Qpsk).unwrap();
    assert!((est.fc_hat - fc).abs() < 1e-9);
    assert!((est.rs_hat.unwrap() - rs).abs() < 1e-9);
    assert!((fc - p.fc).abs() < 1e-9 && (rs - p.rs).abs() < 1e-9);
}

#[test]
fn energy_ratio_of_tone_and_noise() {
    let len = 8192;
    let fs = 6400.0;
    let bin = 1000;
    let mut tone = vec![Complex::new(0.0, 0.0); len];
    tone[bin] = Complex::new(3.0, -1.0);
    let s = Spectrum::new(tone, NptOrder::NONE, fs);
    assert!(energy_ratio(&s, s.freq_of_bin(bin), 3).unwrap().r_p >= 0.99);

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let noise: Vec<Complex<f64>> = (0..len)
        .map(|_| Complex::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let s = Spectrum::new(noise, NptOrder::NONE, fs);
    assert!(energy_ratio(&s, 1800.0, 3).unwrap().r_p < 0.01);
}
