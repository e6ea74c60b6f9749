//! Monte Carlo experiments: datasets, training, SNR sweeps and their artifacts.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{self, KernelSpec, SvmModel, SvmParams};
use crate::error::{param, Error, Result};
use crate::estimate::{estimate_params, estimation_order, ParamEstimate};
use crate::features::{extract_features, FeatureVector, DEFAULT_BLOCK};
use crate::npt::{nyquist_spectrum, NptOrder, PeakDetector};
use crate::recon::{reconstruct_with, ReconConfig, ReconError, SmoothingOperator};
use crate::sensing::{forward_operator, make_model, ForwardOperator, MeasurementModel, SensingKind};
use crate::sigsyn::{add_awgn, synthesize, BasebandRecord, ModulationType, SignalParams};
use crate::spectrum::SpectrumEstimate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingMode {
    /// Full-rate FFT of the transformed record.
    Nyquist,
    /// Compressive measurements followed by sparse reconstruction.
    SubNyquist,
}

impl SamplingMode {
    pub fn name(self) -> &'static str {
        match self {
            SamplingMode::Nyquist => "nyquist",
            SamplingMode::SubNyquist => "sub-nyquist",
        }
    }
}

impl fmt::Display for SamplingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SamplingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nyquist" => Ok(SamplingMode::Nyquist),
            "sub-nyquist" => Ok(SamplingMode::SubNyquist),
            other => Err(param(format!("unknown sampling mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub snr_db: Vec<f64>,
    pub trials_per_point: usize,
    pub c: f64,
    /// RBF width as a multiple of the median pairwise feature distance.
    pub sigma_scale: f64,
    /// Replace `c` and `sigma_scale` by a cross-validated grid search.
    pub grid_search: bool,
    pub folds: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            snr_db: vec![5.0, 10.0, 15.0, 20.0],
            trials_per_point: 40,
            c: classify::DEFAULT_C,
            sigma_scale: 1.0,
            grid_search: false,
            folds: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub classes: Vec<ModulationType>,
    pub snr_grid: Vec<f64>,
    pub beta: f64,
    pub n_symbols: usize,
    pub fc: f64,
    pub rs: f64,
    pub fs: f64,
    pub alpha: f64,
    pub trials_per_point: usize,
    /// Feature block size.
    pub m: usize,
    pub base_seed: u64,
    pub sampling_modes: Vec<SamplingMode>,
    pub sensing: SensingKind,
    pub recon: ReconConfig,
    pub detector: PeakDetector,
    pub training: TrainingConfig,
    /// Restrict the NPT orders to those the candidate classes need.
    pub hierarchical: bool,
    /// Count failed reconstructions as misclassifications rather than dropping them.
    pub strict: bool,
    pub estimate: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl ExperimentConfig {
    /// 256 symbols, L = 2048.
    pub fn desk() -> Self {
        let p = SignalParams::desk_profile();
        Self {
            classes: ModulationType::ALL.to_vec(),
            snr_grid: (-5..=20).step_by(5).map(f64::from).collect(),
            beta: 0.3,
            n_symbols: p.n_symbols,
            fc: p.fc,
            rs: p.rs,
            fs: p.fs,
            alpha: p.alpha,
            trials_per_point: 20,
            m: DEFAULT_BLOCK,
            base_seed: 1,
            sampling_modes: vec![SamplingMode::Nyquist, SamplingMode::SubNyquist],
            sensing: SensingKind::RowSelection,
            recon: default_recon(),
            detector: PeakDetector::default(),
            training: TrainingConfig::default(),
            hierarchical: true,
            strict: true,
            estimate: true,
        }
    }

    /// 1024 symbols, L = 8192.
    pub fn paper() -> Self {
        Self {
            n_symbols: SignalParams::paper_profile().n_symbols,
            ..Self::desk()
        }
    }

    pub fn signal_params(&self) -> SignalParams {
        SignalParams {
            fc: self.fc,
            rs: self.rs,
            fs: self.fs,
            alpha: self.alpha,
            n_symbols: self.n_symbols,
            amplitude: 1.0,
            snr_db: None,
            seed: 0,
        }
    }

    pub fn record_len(&self) -> Result<usize> {
        self.signal_params().record_len()
    }

    pub fn validate(&self) -> Result<()> {
        self.signal_params().validate()?;
        if self.classes.is_empty() {
            return Err(param("no classes"));
        }
        if self.trials_per_point < 1 || self.training.trials_per_point < 1 {
            return Err(param("trials_per_point must be at least 1"));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(param(format!("beta {} outside (0, 1)", self.beta)));
        }
        if self.m < 5 {
            return Err(param(format!("feature block size {} below 5", self.m)));
        }
        if self.sampling_modes.is_empty() {
            return Err(param("no sampling modes"));
        }
        if self.snr_grid.iter().chain(&self.training.snr_db).any(|s| s.is_nan()) {
            return Err(param("SNR values must not be NaN"));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// NPT orders computed for every trial.
    pub fn orders(&self) -> Vec<NptOrder> {
        if self.hierarchical {
            classify::hierarchical_orders(&self.classes)
        } else {
            NptOrder::FEATURE_ORDERS.to_vec()
        }
    }
}

/// Reconstruction settings used by the experiment defaults.
pub fn default_recon() -> ReconConfig {
    let mut r = ReconConfig::default();
    r.solver.tol = 1e-4;
    r.solver.max_iter = 5000;
    r
}

/// Independent random streams of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    TestSignal = 1,
    TestNoise = 2,
    TrainSignal = 3,
    TrainNoise = 4,
    Sensing = 5,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed derived from its coordinates only, never from scheduling order.
pub fn trial_seed(base: u64, stream: Stream, class: ModulationType, snr_db: f64, trial: usize) -> u64 {
    [stream as u64, class.index() as u64, snr_db.to_bits(), trial as u64]
        .into_iter()
        .fold(splitmix64(base), |acc, v| splitmix64(acc ^ v))
}

/// Sensing model of an experiment.
pub fn experiment_model(config: &ExperimentConfig) -> Result<MeasurementModel<f64>> {
    let seed = splitmix64(splitmix64(config.base_seed) ^ Stream::Sensing as u64);
    make_model(config.sensing, config.record_len()?, config.beta, seed)
}

/// Noisy record for one trial.
pub fn trial_record(
    config: &ExperimentConfig,
    class: ModulationType,
    snr_db: f64,
    trial: usize,
    training: bool,
) -> Result<BasebandRecord<f64>> {
    let (sig, noise) = if training {
        (Stream::TrainSignal, Stream::TrainNoise)
    } else {
        (Stream::TestSignal, Stream::TestNoise)
    };
    let params = config
        .signal_params()
        .with_seed(trial_seed(config.base_seed, sig, class, snr_db, trial));
    let clean = synthesize::<f64>(class, &params)?;
    Ok(add_awgn(&clean, snr_db, trial_seed(config.base_seed, noise, class, snr_db, trial)))
}

/// Turns records into spectra for one sampling mode.
pub struct Frontend<'a> {
    config: &'a ExperimentConfig,
    mode: SamplingMode,
    op: Option<ForwardOperator<'a, f64>>,
    smoothing: Option<SmoothingOperator>,
}

/// Outcome of a spectrum computation that may fail in the solver.
#[derive(Debug)]
pub enum SpectrumFailure {
    NotConverged { order: NptOrder, iterations: usize },
    Error(Error),
}

impl fmt::Display for SpectrumFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpectrumFailure::NotConverged { order, iterations } => {
                write!(f, "order {order} reconstruction stopped after {iterations} iterations")
            }
            SpectrumFailure::Error(e) => write!(f, "{e}"),
        }
    }
}

impl<'a> Frontend<'a> {
    pub fn new(config: &'a ExperimentConfig, mode: SamplingMode, model: Option<&'a MeasurementModel<f64>>) -> Result<Self> {
        let (op, smoothing) = match mode {
            SamplingMode::Nyquist => (None, None),
            SamplingMode::SubNyquist => {
                let model = model.ok_or_else(|| param("sub-Nyquist mode needs a sensing model"))?;
                let smoothing = config
                    .recon
                    .l_half
                    .map(|l| SmoothingOperator::new(model.l_cols, l, config.recon.renormalize))
                    .transpose()?;
                (Some(forward_operator(model, model.l_cols)?), smoothing)
            }
        };
        Ok(Self {
            config,
            mode,
            op,
            smoothing,
        })
    }

    pub fn mode(&self) -> SamplingMode {
        self.mode
    }

    pub fn spectrum(&self, record: &BasebandRecord<f64>, order: NptOrder) -> std::result::Result<SpectrumEstimate<f64>, SpectrumFailure> {
        match &self.op {
            None => nyquist_spectrum(record, order).map_err(SpectrumFailure::Error),
            Some(op) => reconstruct_with(record, order, op, self.smoothing.as_ref(), &self.config.recon).map_err(|e| match e {
                ReconError::NotConverged(best) => SpectrumFailure::NotConverged {
                    order,
                    iterations: best.report.map(|r| r.iterations).unwrap_or(0),
                },
                ReconError::Invalid(e) => SpectrumFailure::Error(e),
            }),
        }
    }

    pub fn spectra(
        &self,
        record: &BasebandRecord<f64>,
        orders: &[NptOrder],
    ) -> std::result::Result<BTreeMap<NptOrder, SpectrumEstimate<f64>>, SpectrumFailure> {
        orders.iter().map(|&o| Ok((o, self.spectrum(record, o)?))).collect()
    }
}

/// One labelled training or test vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub label: ModulationType,
    pub snr_db: f64,
    pub seed_index: usize,
    pub features: FeatureVector<f64>,
}

/// Labelled feature vectors for every (class, SNR, trial) of the training
/// grid. Records whose reconstruction fails are skipped.
pub fn build_dataset(config: &ExperimentConfig, frontend: &Frontend<'_>) -> Result<Vec<DatasetRow>> {
    let orders = config.orders();
    let jobs: Vec<(ModulationType, f64, usize)> = config
        .classes
        .iter()
        .flat_map(|&c| {
            config
                .training
                .snr_db
                .iter()
                .flat_map(move |&s| (0..config.training.trials_per_point).map(move |t| (c, s, t)))
        })
        .collect();
    let rows: Vec<Result<Option<DatasetRow>>> = jobs
        .par_iter()
        .map(|&(class, snr, trial)| {
            let record = trial_record(config, class, snr, trial, true)?;
            match frontend.spectra(&record, &orders) {
                Ok(spectra) => Ok(Some(DatasetRow {
                    label: class,
                    snr_db: snr,
                    seed_index: trial,
                    features: extract_features(&spectra, config.m)?.with_label(class),
                })),
                Err(SpectrumFailure::Error(e)) => Err(e),
                Err(f) => {
                    log::warn!("dropping training record {class} {snr} dB #{trial}: {f}");
                    Ok(None)
                }
            }
        })
        .collect();
    rows.into_iter().filter_map(|r| r.transpose()).collect()
}

/// Trains the classifier on a dataset with the configured kernel policy.
pub fn train_model(config: &ExperimentConfig, dataset: &[DatasetRow]) -> Result<classify::TrainOutcome> {
    let data: Vec<FeatureVector<f64>> = dataset.iter().map(|r| r.features.clone()).collect();
    let (c, sigma) = if config.training.grid_search {
        let g = classify::grid_search(&data, config.training.folds, config.base_seed)?;
        (g.c, g.sigma)
    } else {
        let base = classify::median_heuristic_sigma(&data, 300);
        (config.training.c, base * config.training.sigma_scale)
    };
    let mut outcome = classify::train(&data, &SvmParams::new(KernelSpec::Rbf { sigma }, c))?;
    let lo = config.training.snr_db.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = config.training.snr_db.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    outcome.model.snr_range_db = Some((lo, hi));
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub class: ModulationType,
    pub snr_db: f64,
    pub trial: usize,
    pub mode: SamplingMode,
    pub predicted: Option<ModulationType>,
    /// Set when a reconstruction did not converge.
    pub failed: bool,
    pub estimate: Option<ParamEstimate>,
    pub fc_error: Option<f64>,
    pub rs_error: Option<f64>,
}

impl TrialOutcome {
    pub fn correct(&self) -> bool {
        self.predicted == Some(self.class)
    }
}

/// synth -> AWGN -> NPT -> spectrum -> features -> predict -> estimate.
pub fn run_trial(
    config: &ExperimentConfig,
    frontend: &Frontend<'_>,
    model: &SvmModel,
    class: ModulationType,
    snr_db: f64,
    trial: usize,
) -> Result<TrialOutcome> {
    let record = trial_record(config, class, snr_db, trial, false)?;
    let mut outcome = TrialOutcome {
        class,
        snr_db,
        trial,
        mode: frontend.mode(),
        predicted: None,
        failed: false,
        estimate: None,
        fc_error: None,
        rs_error: None,
    };
    let mut spectra = match frontend.spectra(&record, &config.orders()) {
        Ok(s) => s,
        Err(SpectrumFailure::Error(e)) => return Err(e),
        Err(f) => {
            log::debug!("{class} {snr_db} dB #{trial}: {f}");
            outcome.failed = true;
            return Ok(outcome);
        }
    };
    let predicted = model.predict(&extract_features(&spectra, config.m)?)?.class;
    outcome.predicted = Some(predicted);

    if config.estimate {
        let order = estimation_order(predicted);
        if let Entry::Vacant(slot) = spectra.entry(order) {
            match frontend.spectrum(&record, order) {
                Ok(s) => {
                    slot.insert(s);
                }
                Err(SpectrumFailure::Error(e)) => return Err(e),
                Err(_) => return Ok(outcome),
            }
        }
        let peaks = config.detector.detect(&spectra[&order])?;
        if let Ok(est) = estimate_params(&peaks, predicted) {
            outcome.fc_error = Some((est.fc_hat - config.fc).abs());
            outcome.rs_error = est.rs_hat.map(|r| (r - config.rs).abs());
            outcome.estimate = Some(est);
        }
    }
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub class: ModulationType,
    pub snr_db: f64,
    pub mode: SamplingMode,
    /// Trials run at this point.
    pub n: usize,
    pub correct: usize,
    pub failed: usize,
    /// Denominator of `r_alpha`: all trials in strict mode, converged ones otherwise.
    pub scored: usize,
    pub r_alpha: f64,
    /// Mean absolute carrier error over trials with an estimate; NaN if none.
    pub fc_mae: f64,
    pub rs_mae: f64,
}

impl SweepRow {
    /// Binomial standard error of `r_alpha`.
    pub fn std_error(&self) -> f64 {
        if self.scored == 0 {
            return f64::NAN;
        }
        (self.r_alpha * (1.0 - self.r_alpha) / self.scored as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeStats {
    pub total_seconds: f64,
    pub training_seconds: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub runtime: RuntimeStats,
}

impl SweepResult {
    /// Rows of one class and mode, in ascending SNR.
    pub fn curve(&self, class: ModulationType, mode: SamplingMode) -> Vec<&SweepRow> {
        let mut v: Vec<&SweepRow> = self.rows.iter().filter(|r| r.class == class && r.mode == mode).collect();
        v.sort_by(|a, b| a.snr_db.total_cmp(&b.snr_db));
        v
    }

    /// First grid SNR at which `r_alpha >= level`.
    pub fn crossing(&self, class: ModulationType, mode: SamplingMode, level: f64) -> Option<f64> {
        self.curve(class, mode).into_iter().find(|r| r.r_alpha >= level).map(|r| r.snr_db)
    }
}

/// Per-mode training artifacts.
#[derive(Debug, Clone)]
pub struct ModeArtifacts {
    pub mode: SamplingMode,
    pub dataset: Vec<DatasetRow>,
    pub model: SvmModel,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub result: SweepResult,
    pub modes: Vec<ModeArtifacts>,
    pub outcomes: Vec<TrialOutcome>,
}

/// Trains one classifier per sampling mode, then runs every test trial.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepOutput> {
    config.validate()?;
    let start = Instant::now();
    let sensing = if config.sampling_modes.contains(&SamplingMode::SubNyquist) {
        Some(experiment_model(config)?)
    } else {
        None
    };
    let mut modes = Vec::new();
    let mut outcomes = Vec::new();
    let mut training_seconds = 0.0;
    for &mode in &config.sampling_modes {
        let frontend = Frontend::new(config, mode, sensing.as_ref())?;
        let t = Instant::now();
        let dataset = build_dataset(config, &frontend)?;
        let trained = train_model(config, &dataset)?;
        training_seconds += t.elapsed().as_secs_f64();

        let jobs: Vec<(ModulationType, f64, usize)> = config
            .classes
            .iter()
            .flat_map(|&c| {
                config
                    .snr_grid
                    .iter()
                    .flat_map(move |&s| (0..config.trials_per_point).map(move |t| (c, s, t)))
            })
            .collect();
        let results: Result<Vec<TrialOutcome>> = jobs
            .par_iter()
            .map(|&(c, s, t)| run_trial(config, &frontend, &trained.model, c, s, t))
            .collect();
        outcomes.extend(results?);
        modes.push(ModeArtifacts {
            mode,
            dataset,
            model: trained.model,
            warnings: trained.warnings,
        });
    }
    let rows = aggregate(config, &outcomes);
    Ok(SweepOutput {
        result: SweepResult {
            rows,
            runtime: RuntimeStats {
                total_seconds: start.elapsed().as_secs_f64(),
                training_seconds,
                trials: outcomes.len(),
            },
        },
        modes,
        outcomes,
    })
}

/// Reduces trial outcomes to one row per (mode, class, SNR), in config order.
pub fn aggregate(config: &ExperimentConfig, outcomes: &[TrialOutcome]) -> Vec<SweepRow> {
    let mut rows = Vec::new();
    for &mode in &config.sampling_modes {
        for &class in &config.classes {
            for &snr in &config.snr_grid {
                let sel: Vec<&TrialOutcome> = outcomes
                    .iter()
                    .filter(|o| o.mode == mode && o.class == class && o.snr_db.to_bits() == snr.to_bits())
                    .collect();
                let n = sel.len();
                let correct = sel.iter().filter(|o| o.correct()).count();
                let failed = sel.iter().filter(|o| o.failed).count();
                let scored = if config.strict { n } else { n - failed };
                let r_alpha = if scored == 0 { f64::NAN } else { correct as f64 / scored as f64 };
                rows.push(SweepRow {
                    class,
                    snr_db: snr,
                    mode,
                    n,
                    correct,
                    failed,
                    scored,
                    r_alpha,
                    fc_mae: mean(sel.iter().filter_map(|o| o.fc_error)),
                    rs_mae: mean(sel.iter().filter_map(|o| o.rs_error)),
                });
            }
        }
    }
    rows
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Rank correlation with average ranks for ties; `None` if either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let mx = rx.iter().sum::<f64>() / rx.len() as f64;
    let my = ry.iter().sum::<f64>() / ry.len() as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub base_seed: u64,
    pub git_revision: Option<String>,
    pub crate_version: String,
    pub runtime: RuntimeStats,
    pub training_warnings: BTreeMap<SamplingMode, Vec<String>>,
}

fn git_revision() -> Option<String> {
    let out = std::process::Command::new("git").args(["rev-parse", "HEAD"]).output().ok()?;
    out.status
        .success()
        .then(|| String::from_utf8_lossy(&out.stdout).trim().to_string())
}

/// File stem suffix for a mode's dataset and model. The sub-Nyquist mode (or
/// the only mode) gets the plain names.
fn artifact_suffix(config: &ExperimentConfig, mode: SamplingMode) -> &'static str {
    let primary = if config.sampling_modes.contains(&SamplingMode::SubNyquist) {
        SamplingMode::SubNyquist
    } else {
        config.sampling_modes[0]
    };
    if mode == primary {
        ""
    } else {
        match mode {
            SamplingMode::Nyquist => "-nyquist",
            SamplingMode::SubNyquist => "-sub-nyquist",
        }
    }
}

/// Writes `results.csv`, `dataset.csv`, `model.json` and `run_manifest.json`.
pub fn write_outputs(config: &ExperimentConfig, output: &SweepOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    crate::io::write_results_csv(&dir.join("results.csv"), &output.result.rows)?;
    for m in &output.modes {
        let suffix = artifact_suffix(config, m.mode);
        crate::io::write_dataset_csv(&dir.join(format!("dataset{suffix}.csv")), &m.dataset)?;
        crate::io::write_json(&dir.join(format!("model{suffix}.json")), &m.model)?;
    }
    let manifest = RunManifest {
        config: config.clone(),
        base_seed: config.base_seed,
        git_revision: git_revision(),
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        runtime: output.result.runtime.clone(),
        training_warnings: output.modes.iter().map(|m| (m.mode, m.warnings.clone())).collect(),
    };
    crate::io::write_json(&dir.join("run_manifest.json"), &manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_depend_on_every_coordinate() {
        let s = trial_seed(1, Stream::TestSignal, ModulationType::Bpsk, 10.0, 3);
        assert_eq!(s, trial_seed(1, Stream::TestSignal, ModulationType::Bpsk, 10.0, 3));
        assert_ne!(s, trial_seed(2, Stream::TestSignal, ModulationType::Bpsk, 10.0, 3));
        assert_ne!(s, trial_seed(1, Stream::TestNoise, ModulationType::Bpsk, 10.0, 3));
        assert_ne!(s, trial_seed(1, Stream::TestSignal, ModulationType::Qpsk, 10.0, 3));
        assert_ne!(s, trial_seed(1, Stream::TestSignal, ModulationType::Bpsk, 11.0, 3));
        assert_ne!(s, trial_seed(1, Stream::TestSignal, ModulationType::Bpsk, 10.0, 4));
    }

    #[test]
    fn spearman_values() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]), Some(1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0]), None);
        // Ties share the average rank: ranks (1, 2.5, 2.5, 4) against (1, 2, 3, 4).
        let r = spearman(&[1.0, 2.0, 3.0, 4.0], &[0.1, 0.5, 0.5, 0.9]).unwrap();
        assert!((r - 4.5 / 4.5f64.sqrt() / 5.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn config_toml_round_trip() {
        let c = ExperimentConfig::desk();
        let back = ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
        let partial = ExperimentConfig::from_toml("trials_per_point = 3\nsnr_grid = [30.0]\n").unwrap();
        assert_eq!(partial.trials_per_point, 3);
        assert_eq!(partial.n_symbols, 256);
        assert!(ExperimentConfig::from_toml("trials_per_point = 0").is_err());
        assert!(ExperimentConfig::from_toml("no_such_key = 1").is_err());
    }

    #[test]
    fn paper_profile_sizes() {
        assert_eq!(ExperimentConfig::paper().record_len().unwrap(), 8192);
        assert_eq!(ExperimentConfig::desk().record_len().unwrap(), 2048);
    }

    #[test]
    fn aggregation_counts() {
        let mut c = ExperimentConfig::desk();
        c.classes = vec![ModulationType::Bpsk];
        c.snr_grid = vec![0.0];
        c.sampling_modes = vec![SamplingMode::SubNyquist];
        let mk = |predicted, failed, fc| TrialOutcome {
            class: ModulationType::Bpsk,
            snr_db: 0.0,
            trial: 0,
            mode: SamplingMode::SubNyquist,
            predicted,
            failed,
            estimate: None,
            fc_error: fc,
            rs_error: None,
        };
        let outs = vec![
            mk(Some(ModulationType::Bpsk), false, Some(1.0)),
            mk(Some(ModulationType::Qpsk), false, Some(3.0)),
            mk(None, true, None),
            mk(Some(ModulationType::Bpsk), false, None),
        ];
        let rows = aggregate(&c, &outs);
        assert_eq!(rows.len(), 1);
        assert_eq!((rows[0].n, rows[0].correct, rows[0].failed), (4, 2, 1));
        assert_eq!(rows[0].r_alpha, 0.5);
        assert_eq!(rows[0].fc_mae, 2.0);
        assert!(rows[0].rs_mae.is_nan());
        c.strict = false;
        assert!((aggregate(&c, &outs)[0].r_alpha - 2.0 / 3.0).abs() < 1e-12);
    }
}
