//! Modulation recognition of PSK-family signals from compressive samples.
//!
//! The pipeline raises a complex record to the N-th power, which turns the
//! symbol modulation into discrete spectral lines whose count and position
//! depend on the class. Those line spectra are sparse, so they can be
//! recovered from a fraction of the samples by l1 minimization. Sorted
//! spectral magnitudes feed an SVM, and line positions give rough carrier
//! frequency and symbol rate estimates.
//!
//! Numeric code is generic over [`scalar::Real`] (`f32` or `f64`); the
//! aliases below fix it to `f64`.

pub mod classify;
pub mod dft;
pub mod error;
pub mod estimate;
pub mod features;
pub mod harness;
pub mod io;
pub mod npt;
pub mod recon;
pub mod scalar;
pub mod sensing;
pub mod sigsyn;
pub mod spectrum;

pub use classify::{KernelSpec, Prediction, SvmModel, SvmParams};
pub use error::{Error, Result};
pub use estimate::{estimate_params, ParamEstimate};
pub use features::extract_features;
pub use harness::{run_sweep, ExperimentConfig, SamplingMode, SweepResult};
pub use npt::{detect_peaks, raise_power, NptOrder, Peak, PeakDetector, PeakSet};
pub use recon::{reconstruct_order, ConstraintMode, ReconConfig};
pub use scalar::Real;
pub use sensing::{make_model, SensingKind};
pub use sigsyn::{add_awgn, synthesize, ModulationType, SignalParams};

pub type Record = sigsyn::BasebandRecord<f64>;
pub type Spectrum = spectrum::SpectrumEstimate<f64>;
pub type Model = sensing::MeasurementModel<f64>;
pub type Measurements = sensing::MeasurementVector<f64>;
pub type Features = features::FeatureVector<f64>;
pub type Dft = dft::UnitaryDft<f64>;

pub type RecordF32 = sigsyn::BasebandRecord<f32>;
pub type SpectrumF32 = spectrum::SpectrumEstimate<f32>;
pub type ModelF32 = sensing::MeasurementModel<f32>;
