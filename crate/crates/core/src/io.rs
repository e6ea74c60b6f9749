//! On-disk formats: records, spectra, peaks, datasets and sweep results.
//!
//! A record file is one JSON header line followed by the samples as
//! interleaved little-endian `f64` (re, im) pairs.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureVector, Normalization};
use crate::harness::{DatasetRow, SweepRow};
use crate::npt::NptOrder;
use crate::scalar::Real;
use crate::sigsyn::{BasebandRecord, ModulationType, SignalParams};
use crate::spectrum::SpectrumEstimate;

const SAMPLE_FORMAT: &str = "f64le-interleaved";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordHeader {
    pub modulation: ModulationType,
    pub params: SignalParams,
    pub achieved_snr_db: Option<f64>,
    pub len: usize,
    pub format: String,
}

pub fn write_record<T: Real>(path: &Path, record: &BasebandRecord<T>) -> Result<()> {
    let header = RecordHeader {
        modulation: record.modulation,
        params: record.params.clone(),
        achieved_snr_db: record.achieved_snr_db,
        len: record.len(),
        format: SAMPLE_FORMAT.into(),
    };
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for z in &record.samples {
        w.write_all(&z.re.to_f64_lossy().to_le_bytes())?;
        w.write_all(&z.im.to_f64_lossy().to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_record<T: Real>(path: &Path) -> Result<BasebandRecord<T>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header: RecordHeader = serde_json::from_str(line.trim_end())?;
    if header.format != SAMPLE_FORMAT {
        return Err(Error::Format(format!("unsupported sample format {:?}", header.format)));
    }
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != header.len * 16 {
        return Err(Error::Format(format!(
            "expected {} sample bytes, found {}",
            header.len * 16,
            bytes.len()
        )));
    }
    let samples = bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            Complex::new(T::lit(re), T::lit(im))
        })
        .collect();
    Ok(BasebandRecord {
        samples,
        params: header.params,
        modulation: header.modulation,
        achieved_snr_db: header.achieved_snr_db,
    })
}

pub fn write_json<V: Serialize + ?Sized>(path: &Path, value: &V) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<V: DeserializeOwned>(path: &Path) -> Result<V> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

#[derive(Debug, Serialize, Deserialize)]
struct SpectrumLine {
    bin: usize,
    freq_hz: f64,
    re: f64,
    im: f64,
    mag: f64,
}

/// Columns `bin,freq_hz,re,im,mag`.
pub fn write_spectrum_csv<T: Real>(path: &Path, spectrum: &SpectrumEstimate<T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for (k, z) in spectrum.coeffs.iter().enumerate() {
        w.serialize(SpectrumLine {
            bin: k,
            freq_hz: spectrum.freq_of_bin(k),
            re: z.re.to_f64_lossy(),
            im: z.im.to_f64_lossy(),
            mag: z.norm().to_f64_lossy(),
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a spectrum CSV; the sampling rate is recovered from the bin spacing.
pub fn read_spectrum_csv<T: Real>(path: &Path, order: NptOrder) -> Result<SpectrumEstimate<T>> {
    let mut r = csv::Reader::from_path(path)?;
    let lines: Vec<SpectrumLine> = r.deserialize().collect::<std::result::Result<_, _>>()?;
    if lines.len() < 2 {
        return Err(Error::Format("spectrum needs at least two bins".into()));
    }
    for (k, l) in lines.iter().enumerate() {
        if l.bin != k {
            return Err(Error::Format(format!("bin {} found at row {k}", l.bin)));
        }
    }
    let fs = lines[1].freq_hz * lines.len() as f64;
    let coeffs = lines.iter().map(|l| Complex::new(T::lit(l.re), T::lit(l.im))).collect();
    Ok(SpectrumEstimate::new(coeffs, order, fs))
}

/// Columns `class,snr,mode,r_alpha,n,fc_mae,rs_mae`.
pub fn write_results_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["class", "snr", "mode", "r_alpha", "n", "fc_mae", "rs_mae"])?;
    for r in rows {
        w.write_record([
            r.class.to_string(),
            r.snr_db.to_string(),
            r.mode.to_string(),
            r.r_alpha.to_string(),
            r.n.to_string(),
            r.fc_mae.to_string(),
            r.rs_mae.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `label,snr_db,seed_index,f0..f{3m-1}`.
pub fn write_dataset_csv(path: &Path, rows: &[DatasetRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let width = rows.first().map_or(0, |r| r.features.len());
    let mut header = vec!["label".to_string(), "snr_db".into(), "seed_index".into()];
    header.extend((0..width).map(|i| format!("f{i}")));
    w.write_record(&header)?;
    for r in rows {
        if r.features.len() != width {
            return Err(Error::Dimension {
                expected: width,
                got: r.features.len(),
            });
        }
        let mut rec = vec![r.label.to_string(), r.snr_db.to_string(), r.seed_index.to_string()];
        rec.extend(r.features.values.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset_csv(path: &Path) -> Result<Vec<DatasetRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let width = r.headers()?.len();
    if width < 3 || (width - 3) % 3 != 0 {
        return Err(Error::Format(format!("dataset has {width} columns, expected 3m + 3")));
    }
    let m = (width - 3) / 3;
    let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Format(format!("{s:?}: {e}")));
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let label: ModulationType = rec[0].parse()?;
        let values = rec.iter().skip(3).map(num).collect::<Result<Vec<f64>>>()?;
        rows.push(DatasetRow {
            label,
            snr_db: num(&rec[1])?,
            seed_index: rec[2].parse().map_err(|e| Error::Format(format!("seed index: {e}")))?,
            features: FeatureVector {
                values,
                m,
                normalization: Normalization::PerRecordEnergy,
                label: Some(label),
            },
        });
    }
    Ok(rows)
}
