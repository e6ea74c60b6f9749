use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use nptcs::classify::{self, KernelSpec, SvmParams};
use nptcs::harness::{self, ExperimentConfig};
use nptcs::io;
use nptcs::npt::nyquist_spectrum;
use nptcs::recon::{reconstruct_measurements, reconstruct_order, Constraint, ReconConfig};
use nptcs::sensing::{measure, ModelHeader};
use nptcs::{
    add_awgn, estimate_params, extract_features, make_model, raise_power, synthesize, Model, ModulationType, NptOrder,
    PeakDetector, Record, SensingKind, SignalParams, Spectrum, SvmModel,
};

#[derive(Parser)]
#[command(name = "nptcs", version, about = "PSK modulation recognition from compressive samples")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a modulated record.
    Synth(SynthArgs),
    /// Print a record's header and summary statistics.
    Inspect {
        record: PathBuf,
    },
    /// Full-rate spectrum of the N-th power of a record, with detected peaks.
    Npt(NptArgs),
    /// Draw a sensing model and take compressive measurements of a record.
    Sense(SenseArgs),
    /// Recover a spectrum from measurements.
    Reconstruct(ReconstructArgs),
    /// Train a classifier from a dataset CSV.
    Train(TrainArgs),
    /// Classify a record.
    Classify(ClassifyArgs),
    /// Estimate carrier frequency and symbol rate.
    Estimate(EstimateArgs),
    /// Run a Monte Carlo SNR sweep.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print a default experiment configuration.
    Config {
        #[arg(long, value_enum, default_value = "desk")]
        profile: Profile,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Profile {
    Desk,
    Paper,
}

impl Profile {
    fn params(self) -> SignalParams {
        match self {
            Profile::Desk => SignalParams::desk_profile(),
            Profile::Paper => SignalParams::paper_profile(),
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    modulation: ModulationType,
    #[arg(long, value_enum, default_value = "desk")]
    profile: Profile,
    #[arg(long)]
    fc: Option<f64>,
    #[arg(long)]
    rs: Option<f64>,
    #[arg(long)]
    fs: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    symbols: Option<usize>,
    /// Omit for a noiseless record.
    #[arg(long)]
    snr_db: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct NptArgs {
    #[arg(long)]
    record: PathBuf,
    #[arg(long)]
    order: u32,
    /// Spectrum CSV output.
    #[arg(long)]
    out: PathBuf,
    /// Detected peaks as JSON.
    #[arg(long)]
    peaks: Option<PathBuf>,
    #[arg(long)]
    eta: Option<f64>,
}

#[derive(Args)]
struct SenseArgs {
    #[arg(long)]
    record: PathBuf,
    #[arg(long)]
    order: u32,
    #[arg(long, default_value_t = 0.3)]
    beta: f64,
    #[arg(long, default_value = "row-selection")]
    kind: SensingKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Model header JSON; the matrix is regenerated from it.
    #[arg(long)]
    model_out: PathBuf,
    /// Measurement JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReconstructArgs {
    #[arg(long)]
    measurements: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Residual bound; equality constraint when absent.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Smoothing half-width for the analysis prior.
    #[arg(long)]
    l_half: Option<usize>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value_t = classify::DEFAULT_C)]
    c: f64,
    /// RBF width; median pairwise distance when absent.
    #[arg(long)]
    sigma: Option<f64>,
    /// Pick C and sigma by cross-validation.
    #[arg(long)]
    grid_search: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    record: PathBuf,
    /// Classify from compressive samples drawn with this model header
    /// instead of the full-rate record.
    #[arg(long)]
    sensing: Option<PathBuf>,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    modulation: ModulationType,
    /// Record input; the full-rate spectrum is used.
    #[arg(long, conflicts_with = "spectrum")]
    record: Option<PathBuf>,
    /// Spectrum CSV input.
    #[arg(long, requires = "order")]
    spectrum: Option<PathBuf>,
    /// Order of the spectrum; defaults to the class's usual order.
    #[arg(long)]
    order: Option<u32>,
    /// Half the distance between the centre line and a side line.
    #[arg(long)]
    strict_rate: bool,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Synth(a) => synth(a),
        Command::Inspect { record } => inspect(&record),
        Command::Npt(a) => npt(a),
        Command::Sense(a) => sense(a),
        Command::Reconstruct(a) => reconstruct(a),
        Command::Train(a) => train(a),
        Command::Classify(a) => classify_record(a),
        Command::Estimate(a) => estimate(a),
        Command::Sweep { config, out } => sweep(&config, &out),
        Command::Config { profile } => {
            let c = match profile {
                Profile::Desk => ExperimentConfig::desk(),
                Profile::Paper => ExperimentConfig::paper(),
            };
            print!("{}", c.to_toml()?);
            Ok(())
        }
    }
}

fn print_json<V: serde::Serialize>(v: &V) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let base = a.profile.params();
    let params = SignalParams {
        fc: a.fc.unwrap_or(base.fc),
        rs: a.rs.unwrap_or(base.rs),
        fs: a.fs.unwrap_or(base.fs),
        alpha: a.alpha.unwrap_or(base.alpha),
        n_symbols: a.symbols.unwrap_or(base.n_symbols),
        snr_db: a.snr_db,
        seed: a.seed,
        ..base
    };
    let mut record: Record = synthesize(a.modulation, &params)?;
    if let Some(snr) = a.snr_db {
        record = add_awgn(&record, snr, a.seed.wrapping_add(1));
    }
    io::write_record(&a.out, &record)?;
    Ok(())
}

fn inspect(path: &Path) -> Result<()> {
    let r: Record = io::read_record(path)?;
    print_json(&serde_json::json!({
        "modulation": r.modulation,
        "params": r.params,
        "len": r.len(),
        "mean_power": r.mean_power(),
        "achieved_snr_db": r.achieved_snr_db,
    }))
}

fn order(n: u32) -> Result<NptOrder> {
    Ok(NptOrder::new(n)?)
}

fn npt(a: NptArgs) -> Result<()> {
    let r: Record = io::read_record(&a.record)?;
    let s = nyquist_spectrum(&r, order(a.order)?)?;
    io::write_spectrum_csv(&a.out, &s)?;
    if let Some(p) = a.peaks {
        let det = a.eta.map(PeakDetector::with_eta).unwrap_or_default();
        io::write_json(&p, &det.detect(&s)?)?;
    }
    Ok(())
}

fn sense(a: SenseArgs) -> Result<()> {
    let r: Record = io::read_record(&a.record)?;
    let model: Model = make_model(a.kind, r.len(), a.beta, a.seed)?;
    let o = order(a.order)?;
    let y = measure(&model, &raise_power(&r.samples, o), o, r.params.fs)?;
    io::write_json(&a.model_out, &model.header())?;
    io::write_json(&a.out, &y)?;
    Ok(())
}

fn reconstruct(a: ReconstructArgs) -> Result<()> {
    let header: ModelHeader = io::read_json(&a.model)?;
    let model = Model::from_header(&header)?;
    let y: nptcs::Measurements = io::read_json(&a.measurements)?;
    if y.model_id != model.id() {
        bail!("measurements were taken with model {} but {} was given", y.model_id, model.id());
    }
    let mut config = ReconConfig {
        l_half: a.l_half,
        ..ReconConfig::default()
    };
    if let Some(m) = a.max_iter {
        config.solver.max_iter = m;
    }
    if let Some(t) = a.tol {
        config.solver.tol = t;
    }
    let constraint = match a.epsilon {
        Some(epsilon) => Constraint::Residual { epsilon },
        None => Constraint::Equality,
    };
    let s = match reconstruct_measurements(&y, &model, constraint, &config) {
        Ok(s) => s,
        Err(e) => {
            let best = e.best().cloned().ok_or_else(|| anyhow::anyhow!("{e}"))?;
            log::warn!("{e}; writing the last iterate");
            best
        }
    };
    if let Some(r) = &s.report {
        eprintln!("{}", serde_json::to_string(r)?);
    }
    io::write_spectrum_csv(&a.out, &s)?;
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let rows = io::read_dataset_csv(&a.dataset)?;
    let data: Vec<nptcs::Features> = rows.iter().map(|r| r.features.clone()).collect();
    let (c, sigma) = if a.grid_search {
        let g = classify::grid_search(&data, 5, a.seed)?;
        eprintln!("grid search: C = {}, sigma = {}, cv accuracy = {:.3}", g.c, g.sigma, g.cv_accuracy);
        (g.c, g.sigma)
    } else {
        (a.c, a.sigma.unwrap_or_else(|| classify::median_heuristic_sigma(&data, 300)))
    };
    let out = classify::train(&data, &SvmParams::new(KernelSpec::Rbf { sigma }, c))?;
    let mut model = out.model;
    let snrs = rows.iter().map(|r| r.snr_db);
    model.snr_range_db = Some((
        snrs.clone().fold(f64::INFINITY, f64::min),
        snrs.fold(f64::NEG_INFINITY, f64::max),
    ));
    for w in out.warnings {
        eprintln!("warning: {w}");
    }
    io::write_json(&a.out, &model)?;
    Ok(())
}

fn classify_record(a: ClassifyArgs) -> Result<()> {
    let model: SvmModel = io::read_json(&a.model)?;
    let r: Record = io::read_record(&a.record)?;
    let sensing = a
        .sensing
        .map(|p| -> Result<Model> { Ok(Model::from_header(&io::read_json(&p)?)?) })
        .transpose()?;
    let config = harness::default_recon();
    let mut spectra = BTreeMap::new();
    for o in classify::hierarchical_orders(&model.classes) {
        let s: Spectrum = match &sensing {
            None => nyquist_spectrum(&r, o)?,
            Some(m) => reconstruct_order(&r, o, m, &config).or_else(|e| e.best().cloned().context(e.to_string()))?,
        };
        spectra.insert(o, s);
    }
    let x = extract_features(&spectra, model.m)?;
    print_json(&model.predict(&x)?)
}

fn estimate(a: EstimateArgs) -> Result<()> {
    let o = match a.order {
        Some(n) => order(n)?,
        None => nptcs::estimate::estimation_order(a.modulation),
    };
    let s: Spectrum = match (&a.record, &a.spectrum) {
        (Some(p), None) => nyquist_spectrum(&io::read_record(p)?, o)?,
        (None, Some(p)) => io::read_spectrum_csv(p, o)?,
        _ => bail!("give exactly one of --record or --spectrum"),
    };
    let peaks = PeakDetector::default().detect(&s)?;
    let est = if a.strict_rate {
        nptcs::estimate::estimate_params_with(&peaks, a.modulation, nptcs::estimate::RateFormula::CenterToSide)?
    } else {
        estimate_params(&peaks, a.modulation)?
    };
    print_json(&est)
}

fn sweep(config: &Path, out: &Path) -> Result<()> {
    let text = std::fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let config = ExperimentConfig::from_toml(&text)?;
    let output = harness::run_sweep(&config)?;
    harness::write_outputs(&config, &output, out)?;
    for r in &output.result.rows {
        println!(
            "{:12} {:6} {:6.1} dB  r_alpha {:.3} (n = {})",
            r.mode, r.class, r.snr_db, r.r_alpha, r.n
        );
    }
    Ok(())
}
