//! Rough carrier frequency and symbol rate from detected line positions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::npt::{NptOrder, Peak, PeakSet};
use crate::sigsyn::ModulationType;

/// Peak-to-line matching tolerance, in DFT bins.
pub const LINE_TOLERANCE_BINS: f64 = 2.0;

/// Where the lines of a class sit under a given nonlinearity:
/// an optional centre line at `N f_c` and a symmetric pair at
/// `N f_c +- inner_offset * R_s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineLayout {
    pub center: bool,
    pub inner_offset: f64,
}

/// `None` when the class has no lines at this order.
pub fn line_layout(modulation: ModulationType, order: NptOrder) -> Option<LineLayout> {
    use ModulationType::*;
    let (center, inner_offset) = match (modulation, order.get()) {
        (Bpsk, 2 | 4 | 8) | (Qpsk, 4 | 8) | (Psk8, 8) => (true, 1.0),
        (Oqpsk, 2) => (false, 1.0),
        (Oqpsk, 4 | 8) => (true, 2.0),
        (Msk, 2) => (false, 0.5),
        (Msk, 4) => (false, 1.0),
        (Msk, 8) => (false, 2.0),
        _ => return None,
    };
    Some(LineLayout { center, inner_offset })
}

/// Order whose lines the estimator reads for each class.
pub fn estimation_order(modulation: ModulationType) -> NptOrder {
    match modulation {
        ModulationType::Bpsk | ModulationType::Msk => NptOrder::SQUARE,
        ModulationType::Qpsk | ModulationType::Oqpsk => NptOrder::FOURTH,
        ModulationType::Psk8 => NptOrder::EIGHTH,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "line")]
pub enum LineLabel {
    Center,
    /// Offset from the centre position in units of `R_s`; `+-0.5` is the
    /// half-offset pair.
    Side { offset: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssignedLine {
    pub peak: Peak,
    pub label: LineLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateMethod {
    /// Centre line only.
    Center,
    /// Mean of a symmetric pair.
    SideAverage,
    /// Centre line, confirmed by the side pair.
    CrossCheck,
}

/// Symbol-rate formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateFormula {
    /// Half the spread of the side pair, scaled by the pair's offset.
    #[default]
    SidePairSpread,
    /// `|A1 - A2| / 2` with `A1` the centre line and `A2` the nearer side line.
    CenterToSide,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEstimate {
    pub fc_hat: f64,
    pub rs_hat: Option<f64>,
    /// Side-pair carrier estimate when a centre line was also used.
    pub fc_cross_check: Option<f64>,
    pub order_used: NptOrder,
    pub peaks_used: PeakSet,
    pub method: EstimateMethod,
    /// Set when the side lines needed for `rs_hat` are missing.
    pub partial: bool,
}

/// Labels detected peaks with their line positions.
pub fn line_assignment(peaks: &PeakSet, modulation: ModulationType, order: NptOrder) -> Result<Vec<AssignedLine>> {
    let layout = line_layout(modulation, order).ok_or_else(|| Error::InsufficientPeaks {
        modulation,
        reason: format!("no discrete lines at order {order}"),
        partial: None,
    })?;
    let tol = LINE_TOLERANCE_BINS * peaks.bin_hz;
    let p = &peaks.peaks;
    if p.is_empty() {
        return Err(Error::InsufficientPeaks {
            modulation,
            reason: "no peaks".into(),
            partial: None,
        });
    }

    if !layout.center {
        if p.len() < 2 {
            return Err(Error::InsufficientPeaks {
                modulation,
                reason: "a symmetric pair needs two peaks".into(),
                partial: None,
            });
        }
        let (lo, hi) = ordered(p[0], p[1]);
        return Ok(vec![
            AssignedLine {
                peak: lo,
                label: LineLabel::Side {
                    offset: -layout.inner_offset,
                },
            },
            AssignedLine {
                peak: hi,
                label: LineLabel::Side {
                    offset: layout.inner_offset,
                },
            },
        ]);
    }

    let center = p[0];
    let mut lines = vec![AssignedLine {
        peak: center,
        label: LineLabel::Center,
    }];
    let rest = &p[1..];
    if rest.is_empty() {
        return Ok(lines);
    }
    let pairs = symmetric_pairs(center.freq_hz, rest, tol);
    // Strongest pair by its weaker member.
    let Some(&(best, spread)) = pairs.iter().max_by(|a, b| {
        let wa = a.0 .0.magnitude.min(a.0 .1.magnitude);
        let wb = b.0 .0.magnitude.min(b.0 .1.magnitude);
        wa.total_cmp(&wb)
    }) else {
        return Err(Error::Assignment(format!(
            "no pair of peaks symmetric about {:.3} Hz within {:.3} Hz",
            center.freq_hz, tol
        )));
    };
    let outer = pairs
        .iter()
        .find(|(_, s)| (s - 2.0 * spread).abs() <= tol)
        .map(|&(pair, _)| pair);
    let inner_pair = best;
    let k = layout.inner_offset;
    lines.push(AssignedLine {
        peak: inner_pair.0,
        label: LineLabel::Side { offset: -k },
    });
    lines.push(AssignedLine {
        peak: inner_pair.1,
        label: LineLabel::Side { offset: k },
    });
    if let Some((lo, hi)) = outer {
        lines.push(AssignedLine {
            peak: lo,
            label: LineLabel::Side { offset: -2.0 * k },
        });
        lines.push(AssignedLine {
            peak: hi,
            label: LineLabel::Side { offset: 2.0 * k },
        });
    }
    Ok(lines)
}

fn ordered(a: Peak, b: Peak) -> (Peak, Peak) {
    if a.freq_hz <= b.freq_hz {
        (a, b)
    } else {
        (b, a)
    }
}

/// Pairs `(below, above)` whose distances to `center` agree within `tol`,
/// with the pair's half-spread.
fn symmetric_pairs(center: f64, peaks: &[Peak], tol: f64) -> Vec<((Peak, Peak), f64)> {
    let mut out = Vec::new();
    for (i, a) in peaks.iter().enumerate() {
        for b in &peaks[i + 1..] {
            let (lo, hi) = ordered(*a, *b);
            let below = center - lo.freq_hz;
            let above = hi.freq_hz - center;
            if below > tol && above > tol && (below - above).abs() <= tol {
                out.push(((lo, hi), 0.5 * (below + above)));
            }
        }
    }
    out
}

pub fn estimate_params(peaks: &PeakSet, modulation: ModulationType) -> Result<ParamEstimate> {
    estimate_params_with(peaks, modulation, RateFormula::default())
}

pub fn estimate_params_with(peaks: &PeakSet, modulation: ModulationType, formula: RateFormula) -> Result<ParamEstimate> {
    let order = peaks.order;
    let n = order.get() as f64;
    let lines = line_assignment(peaks, modulation, order)?;
    let layout = line_layout(modulation, order).expect("assignment succeeded");
    let center = lines.iter().find(|l| l.label == LineLabel::Center).map(|l| l.peak.freq_hz);
    let side = |offset: f64| {
        lines
            .iter()
            .find(|l| l.label == LineLabel::Side { offset })
            .map(|l| l.peak.freq_hz)
    };
    let pair = side(-layout.inner_offset).zip(side(layout.inner_offset));

    let wrap = |f: f64| f.rem_euclid(peaks.fs / n);
    let side_fc = pair.map(|(lo, hi)| wrap((lo + hi) / (2.0 * n)));
    let rs_hat = pair.map(|(lo, hi)| match (formula, center) {
        (RateFormula::CenterToSide, Some(c)) => {
            let nearer = if (c - lo).abs() <= (hi - c).abs() { lo } else { hi };
            (c - nearer).abs() / 2.0
        }
        _ => (hi - lo).abs() / (2.0 * layout.inner_offset),
    });

    let (fc_hat, fc_cross_check, method) = match (center, side_fc) {
        (Some(c), Some(s)) => (wrap(c / n), Some(s), EstimateMethod::CrossCheck),
        (Some(c), None) => (wrap(c / n), None, EstimateMethod::Center),
        (None, Some(s)) => (s, None, EstimateMethod::SideAverage),
        (None, None) => unreachable!("assignment returns at least one line"),
    };
    Ok(ParamEstimate {
        fc_hat,
        rs_hat,
        fc_cross_check,
        order_used: order,
        peaks_used: peaks.clone(),
        method,
        partial: rs_hat.is_none(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const FS: f64 = 6400.0;
    const L: usize = 8192;

    fn set(freqs: &[f64], order: NptOrder) -> PeakSet {
        PeakSet::from_frequencies(freqs, order, FS, L)
    }

    #[test]
    fn qpsk_fourth_power_lines() {
        let est = estimate_params(&set(&[2000.0, 1200.0, 2800.0], NptOrder::FOURTH), ModulationType::Qpsk).unwrap();
        assert!((est.fc_hat - 500.0).abs() < 1e-9);
        assert!((est.rs_hat.unwrap() - 800.0).abs() < 1e-9);
        assert!((est.fc_cross_check.unwrap() - 500.0).abs() < 1e-9);
        assert_eq!(est.method, EstimateMethod::CrossCheck);
        assert!(!est.partial);
    }

    #[test]
    fn strict_rate_formula_halves_the_rate() {
        let est = estimate_params_with(
            &set(&[2000.0, 1200.0, 2800.0], NptOrder::FOURTH),
            ModulationType::Qpsk,
            RateFormula::CenterToSide,
        )
        .unwrap();
        assert!((est.rs_hat.unwrap() - 400.0).abs() < 1e-9);
    }

    #[test]
    fn bpsk_square_lines() {
        let est = estimate_params(&set(&[1000.0, 200.0, 1800.0], NptOrder::SQUARE), ModulationType::Bpsk).unwrap();
        assert!((est.fc_hat - 500.0).abs() < 1e-9);
        assert!((est.rs_hat.unwrap() - 800.0).abs() < 1e-9);
    }

    #[test]
    fn centre_only_is_partial() {
        let est = estimate_params(&set(&[2000.0], NptOrder::FOURTH), ModulationType::Qpsk).unwrap();
        assert!((est.fc_hat - 500.0).abs() < 1e-9);
        assert!(est.rs_hat.is_none());
        assert!(est.partial);
        assert_eq!(est.method, EstimateMethod::Center);
    }

    #[test]
    fn msk_half_offset_pair() {
        let est = estimate_params(&set(&[1400.0, 600.0], NptOrder::SQUARE), ModulationType::Msk).unwrap();
        assert!((est.fc_hat - 500.0).abs() < 1e-9);
        assert!((est.rs_hat.unwrap() - 800.0).abs() < 1e-9);
        assert_eq!(est.method, EstimateMethod::SideAverage);
        let lines = line_assignment(&set(&[1400.0, 600.0], NptOrder::SQUARE), ModulationType::Msk, NptOrder::SQUARE).unwrap();
        assert_eq!(lines[0].label, LineLabel::Side { offset: -0.5 });
    }

    #[test]
    fn five_lines_add_the_outer_pair() {
        let s = set(&[2000.0, 1200.0, 2800.0, 400.0, 3600.0], NptOrder::FOURTH);
        let lines = line_assignment(&s, ModulationType::Bpsk, NptOrder::FOURTH).unwrap();
        let labels: Vec<_> = lines.iter().map(|l| l.label).collect();
        assert_eq!(labels.len(), 5);
        assert!(labels.contains(&LineLabel::Side { offset: -2.0 }));
        assert!(labels.contains(&LineLabel::Side { offset: 2.0 }));
    }

    #[test]
    fn weak_pair_at_half_the_spread_is_ignored() {
        let s = set(&[2000.0, 1200.0, 2800.0, 1600.0, 2400.0], NptOrder::FOURTH);
        let est = estimate_params(&s, ModulationType::Qpsk).unwrap();
        assert!((est.rs_hat.unwrap() - 800.0).abs() < 1e-9);
    }

    #[test]
    fn asymmetric_set_fails() {
        let s = set(&[1000.0, 1300.0, 1900.0], NptOrder::SQUARE);
        assert!(matches!(
            line_assignment(&s, ModulationType::Bpsk, NptOrder::SQUARE),
            Err(Error::Assignment(_))
        ));
    }

    #[test]
    fn insufficient_peaks() {
        assert!(matches!(
            estimate_params(&set(&[], NptOrder::SQUARE), ModulationType::Bpsk),
            Err(Error::InsufficientPeaks { .. })
        ));
        assert!(matches!(
            estimate_params(&set(&[1400.0], NptOrder::SQUARE), ModulationType::Msk),
            Err(Error::InsufficientPeaks { .. })
        ));
        assert!(estimate_params(&set(&[2000.0], NptOrder::FOURTH), ModulationType::Psk8).is_err());
    }

    #[test]
    fn location_only() {
        let mut a = set(&[2000.0, 1200.0, 2800.0], NptOrder::FOURTH);
        let b = estimate_params(&a, ModulationType::Qpsk).unwrap();
        a.peaks.iter_mut().for_each(|p| p.magnitude *= 42.0);
        let c = estimate_params(&a, ModulationType::Qpsk).unwrap();
        assert_eq!(b.fc_hat, c.fc_hat);
        assert_eq!(b.rs_hat, c.rs_hat);
    }
}
