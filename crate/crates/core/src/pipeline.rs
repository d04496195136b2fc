//! End-to-end workflow: simulate, ingest, build datasets, train, evaluate,
//! export modes and explain. The `cmd_*` functions work on files; the
//! in-memory stages underneath are reused by [`run_experiment`].

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, StageExt};
use crate::interpret::{class_mean_report, interpret_sample, report_csv, InterpretationRecord};
use crate::io;
use crate::label::ClassLabel;
use crate::rla::{EigenBasis, FeatureMatrix, PcaMethod, RsvdConfig};
use crate::seed::derive_seed;
use crate::signal_sim::{
    add_awgn_with_reference, simulate_fault_signal, BearingSpec, FaultSimParams, FaultType,
    Signal, SnrReference,
};
use crate::spectrogram::{assemble_dataset, signal_to_images, DatasetMatrix, SpectrogramImage, StftConfig};
use crate::svm::{cross_validate, ecoc_predict, ecoc_train, EcocSvmModel, SvmConfig};

/// Fault simulation settings shared by all classes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    pub bearing: BearingSpec,
    pub amplitude_levels: Vec<f64>,
    pub amplitude_jitter_frac: f64,
    pub decay_beta: f64,
    pub resonance_fn: f64,
    pub shaft_speed: f64,
    pub sample_rate: f64,
    pub layout: RecordLayout,
    /// Seconds per record; `None` gives one chunk more than the image cap
    /// needs for a single record, or exactly one chunk per realization.
    pub duration: Option<f64>,
}

/// How the chunks of a class are generated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordLayout {
    /// One long record per class, cut into consecutive chunks.
    SingleRecord,
    /// An independent realization per chunk, each starting its impulse
    /// train at `t = T`; realizations are concatenated into the class file.
    #[default]
    PerChunk,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        let p = FaultSimParams::numerical(FaultType::InnerRace, 1.0, 0);
        SimulationConfig {
            bearing: BearingSpec::skf_22240(),
            amplitude_levels: vec![1.0, 2.0, 3.0, 4.0],
            amplitude_jitter_frac: p.amplitude_jitter_frac,
            decay_beta: p.decay_beta,
            resonance_fn: p.resonance_fn,
            shaft_speed: p.shaft_speed,
            sample_rate: p.sample_rate,
            layout: RecordLayout::default(),
            duration: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub simulation: SimulationConfig,
    pub snr_db: f64,
    pub snr_reference: SnrReference,
    pub stft: StftConfig,
    pub max_chunks_per_class: Option<usize>,
    pub split_frac: f64,
    pub rsvd: RsvdConfig,
    pub pca_method: PcaMethod,
    pub svm: SvmConfig,
    pub cv_folds: usize,
    pub explain_samples: usize,
    pub seed: u64,
    /// Classes that must survive dataset construction.
    pub expected_classes: Option<Vec<ClassLabel>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            simulation: SimulationConfig::default(),
            snr_db: 10.0,
            snr_reference: SnrReference::default(),
            stft: StftConfig::default(),
            max_chunks_per_class: Some(150),
            split_frac: 0.8,
            rsvd: RsvdConfig::default(),
            pca_method: PcaMethod::default(),
            svm: SvmConfig::default(),
            cv_folds: 5,
            explain_samples: 300,
            seed: 0,
            expected_classes: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Checks everything that does not depend on the data.
    pub fn validate(&self) -> Result<()> {
        let cfg = |e: Error| Error::Config(e.to_string());
        self.stft.validate().map_err(cfg)?;
        self.svm.validate().map_err(cfg)?;
        self.simulation.bearing.validate().map_err(cfg)?;
        for p in self.class_params() {
            p.validate().map_err(cfg)?;
        }
        if self.simulation.amplitude_levels.is_empty() {
            return Err(Error::Config("at least one amplitude level is required".into()));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::Config(format!("SNR must be finite, got {}", self.snr_db)));
        }
        if !(self.split_frac > 0.0 && self.split_frac < 1.0) {
            return Err(Error::Config(format!("split fraction must lie in (0, 1), got {}", self.split_frac)));
        }
        if self.cv_folds < 2 {
            return Err(Error::Config(format!("need at least 2 CV folds, got {}", self.cv_folds)));
        }
        if self.max_chunks_per_class == Some(0) {
            return Err(Error::Config("max_chunks_per_class must be positive".into()));
        }
        let r = &self.rsvd;
        if r.target_rank == 0 || r.retained_components == 0 || r.retained_components > r.target_rank {
            return Err(Error::Config(format!(
                "need 0 < components ({}) <= rank ({})",
                r.retained_components, r.target_rank
            )));
        }
        Ok(())
    }

    /// Per-class simulation parameters in output order: for each fault type
    /// (B, IR, OR) every amplitude level. Seeds derive from the master seed.
    /// Under [`RecordLayout::PerChunk`] these describe one realization.
    pub fn class_params(&self) -> Vec<FaultSimParams> {
        let s = &self.simulation;
        let chunks = self.max_chunks_per_class.unwrap_or(150);
        let chunk_secs = self.stft.chunk_len as f64 / s.sample_rate;
        let duration = s.duration.unwrap_or(match s.layout {
            RecordLayout::SingleRecord => (chunks + 1) as f64 * chunk_secs,
            RecordLayout::PerChunk => chunk_secs,
        });
        let mut faults = FaultType::ALL.to_vec();
        faults.sort_by_key(|f| f.code());
        let mut out = Vec::new();
        for fault in faults {
            for &amp in &s.amplitude_levels {
                let index = out.len() as u64;
                out.push(FaultSimParams {
                    fault_type: fault,
                    amplitude_mean: amp,
                    amplitude_jitter_frac: s.amplitude_jitter_frac,
                    decay_beta: s.decay_beta,
                    resonance_fn: s.resonance_fn,
                    shaft_speed: s.shaft_speed,
                    sample_rate: s.sample_rate,
                    duration,
                    rng_seed: derive_seed(self.seed, "simulate", index),
                });
            }
        }
        out
    }

    pub fn rsvd_config(&self) -> RsvdConfig {
        RsvdConfig {
            rng_seed: derive_seed(self.seed, "rsvd", 0),
            ..self.rsvd.clone()
        }
    }
}

/// Accuracy and confusion matrix (rows: true class, columns: predicted).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub classes: Vec<ClassLabel>,
    pub samples: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub confusion_matrix: Vec<Vec<usize>>,
}

/// Result of a training run. Wall-clock timings live in [`StageTimings`]
/// so that reports from identical runs compare byte for byte.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub classes: Vec<ClassLabel>,
    pub train_samples: usize,
    pub singular_values: Vec<f64>,
    pub train: EvaluationReport,
    pub cv_fold_accuracies: Vec<f64>,
    pub cv_mean_accuracy: f64,
    pub test: Option<EvaluationReport>,
    pub config: RunConfig,
}

/// Milliseconds per stage, in execution order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub stages: Vec<StageTime>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageTime {
    pub stage: String,
    pub ms: f64,
}

impl StageTimings {
    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.stages.push(StageTime {
            stage: stage.to_string(),
            ms: start.elapsed().as_secs_f64() * 1e3,
        });
        out
    }

    pub fn get(&self, stage: &str) -> Option<f64> {
        self.stages.iter().find(|t| t.stage == stage).map(|t| t.ms)
    }
}

/// Noisy signals for every configured class.
pub fn simulate_signals(cfg: &RunConfig) -> Result<Vec<Signal>> {
    cfg.validate()?;
    let realizations = match cfg.simulation.layout {
        RecordLayout::SingleRecord => 1,
        RecordLayout::PerChunk => cfg.max_chunks_per_class.unwrap_or(150),
    };
    cfg.class_params()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut record: Option<Signal> = None;
            for r in 0..realizations {
                let (sim_seed, noise_seed) = if realizations == 1 {
                    (p.rng_seed, derive_seed(cfg.seed, "noise", i as u64))
                } else {
                    (derive_seed(p.rng_seed, "realization", r as u64), derive_seed(derive_seed(cfg.seed, "noise", i as u64), "realization", r as u64))
                };
                let params = FaultSimParams { rng_seed: sim_seed, ..p.clone() };
                let clean = simulate_fault_signal(&params, &cfg.simulation.bearing)?;
                if clean.label.is_none() {
                    return Err(Error::Config(format!(
                        "amplitude level {} does not give an integer class label",
                        p.amplitude_mean
                    )));
                }
                let noisy = add_awgn_with_reference(&clean, cfg.snr_db, cfg.snr_reference, noise_seed)?;
                match &mut record {
                    None => record = Some(noisy),
                    Some(rec) => rec.samples.extend_from_slice(&noisy.samples),
                }
            }
            Ok(record.expect("at least one realization"))
        })
        .collect::<Result<_>>()
        .stage("simulate")
}

pub fn signals_to_images(signals: &[Signal], cfg: &RunConfig) -> Result<Vec<SpectrogramImage>> {
    let mut images = Vec::new();
    for sig in signals {
        images.extend(signal_to_images(sig, &cfg.stft, cfg.max_chunks_per_class)?);
    }
    Ok(images)
}

pub fn split_images(images: Vec<SpectrogramImage>, cfg: &RunConfig) -> Result<(DatasetMatrix, DatasetMatrix)> {
    assemble_dataset(images, cfg.split_frac, derive_seed(cfg.seed, "split", 0))
}

/// Trained basis and classifier with their training report.
pub struct TrainedPipeline {
    pub basis: EigenBasis,
    pub model: EcocSvmModel,
    pub report: RunReport,
}

/// Mean-centre, factorize, project, fit the ECOC model and cross-validate.
/// Consumes the training matrix, whose buffer is reused for centring.
pub fn train(train: DatasetMatrix, cfg: &RunConfig, timings: &mut StageTimings) -> Result<TrainedPipeline> {
    cfg.validate()?;
    let DatasetMatrix { data, labels, .. } = train;
    let m = labels.len();
    let (basis, features) = timings
        .time("feature_extraction", || EigenBasis::fit(data, &cfg.rsvd_config(), cfg.pca_method))
        .stage("feature extraction")?;
    let rows = FeatureMatrix::new(features, labels.clone())?.rows();
    let model = timings
        .time("svm_training", || {
            ecoc_train(&rows, &labels, &cfg.svm, cfg.svm.coding, cfg.svm.standardize)
        })
        .stage("svm training")?;
    let train_eval = evaluate_rows(&model, &rows, &labels);
    let cv = timings
        .time("cross_validation", || {
            cross_validate(&rows, &labels, cfg.cv_folds, derive_seed(cfg.seed, "cv", 0), &cfg.svm)
        })
        .stage("cross validation")?;
    let report = RunReport {
        seed: cfg.seed,
        classes: model.classes.clone(),
        train_samples: m,
        singular_values: basis.singular_values.clone(),
        train: train_eval,
        cv_fold_accuracies: cv.fold_accuracies,
        cv_mean_accuracy: cv.mean_accuracy,
        test: None,
        config: cfg.clone(),
    };
    Ok(TrainedPipeline { basis, model, report })
}

fn evaluate_rows(model: &EcocSvmModel, rows: &[Vec<f64>], labels: &[ClassLabel]) -> EvaluationReport {
    let mut classes = model.classes.clone();
    for l in labels {
        if !classes.contains(l) {
            classes.push(l.clone());
        }
    }
    let k = classes.len();
    let mut confusion = vec![vec![0usize; k]; k];
    for (x, y) in rows.iter().zip(labels) {
        let (pred, _) = ecoc_predict(model, x);
        let t = classes.iter().position(|c| c == y).expect("true label is listed");
        let p = classes.iter().position(|c| *c == pred).expect("prediction is a model class");
        confusion[t][p] += 1;
    }
    let correct = (0..k).map(|i| confusion[i][i]).sum();
    EvaluationReport {
        classes,
        samples: rows.len(),
        correct,
        accuracy: if rows.is_empty() { 0.0 } else { correct as f64 / rows.len() as f64 },
        confusion_matrix: confusion,
    }
}

/// Projects raw images with the training mean and basis, then predicts.
/// Labels not known to the model count as errors and get their own row.
pub fn evaluate(basis: &EigenBasis, model: &EcocSvmModel, ds: &DatasetMatrix) -> Result<EvaluationReport> {
    let features = basis.project_raw(&ds.data)?;
    check_feature_dim(model, features.ncols())?;
    let rows = FeatureMatrix::new(features, ds.labels.clone())?.rows();
    Ok(evaluate_rows(model, &rows, &ds.labels))
}

fn check_feature_dim(model: &EcocSvmModel, k: usize) -> Result<()> {
    match model.feature_dim() {
        Some(d) if d != k => Err(Error::Shape {
            expected: format!("{d} features for this model"),
            actual: format!("{k} from the basis"),
        }),
        _ => Ok(()),
    }
}

pub struct ExperimentOutput {
    pub pipeline: TrainedPipeline,
    pub timings: StageTimings,
}

/// Simulate, image, split, train and test, all in memory.
pub fn run_experiment(cfg: &RunConfig) -> Result<ExperimentOutput> {
    let mut timings = StageTimings::default();
    let signals = timings.time("simulate", || simulate_signals(cfg))?;
    let images = timings
        .time("spectrograms", || signals_to_images(&signals, cfg))
        .stage("spectrograms")?;
    drop(signals);
    let (train_ds, test_ds) = timings.time("split", || split_images(images, cfg)).stage("dataset")?;
    let mut pipeline = train(train_ds, cfg, &mut timings)?;
    let test = timings
        .time("evaluate", || evaluate(&pipeline.basis, &pipeline.model, &test_ds))
        .stage("evaluate")?;
    pipeline.report.test = Some(test);
    Ok(ExperimentOutput { pipeline, timings })
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn signal_file_name(label: &ClassLabel, format: io::SignalFormat) -> String {
    match format {
        io::SignalFormat::Csv => format!("{label}.csv"),
        io::SignalFormat::F32 => format!("{label}.f32"),
    }
}

fn write_signal(path: &Path, sig: &Signal, format: io::SignalFormat) -> Result<()> {
    match format {
        io::SignalFormat::Csv => io::write_signal_csv(path, sig),
        io::SignalFormat::F32 => io::write_signal_f32(path, sig),
    }
}

/// Writes one labelled signal file per class; returns the paths.
pub fn cmd_simulate(cfg: &RunConfig, out: &Path, format: io::SignalFormat) -> Result<Vec<PathBuf>> {
    ensure_dir(out)?;
    let signals = simulate_signals(cfg)?;
    let mut paths = Vec::new();
    for sig in &signals {
        let label = sig.label.as_ref().expect("simulated signals are labelled");
        let path = out.join(signal_file_name(label, format));
        write_signal(&path, sig, format)?;
        paths.push(path);
    }
    info!("wrote {} signal files to {}", paths.len(), out.display());
    Ok(paths)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestedFile {
    pub source: PathBuf,
    pub output: PathBuf,
    pub label: ClassLabel,
    pub sample_rate: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RejectedFile {
    pub source: PathBuf,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub accepted: Vec<IngestedFile>,
    pub rejected: Vec<RejectedFile>,
}

/// Validates external signal files and rewrites them as CSV under `out`,
/// named after the source file. Writes `ingest_report.json`.
pub fn cmd_ingest(paths: &[PathBuf], format: Option<io::SignalFormat>, out: &Path) -> Result<IngestReport> {
    ensure_dir(out)?;
    let mut report = IngestReport::default();
    for path in paths {
        let parsed = format
            .or_else(|| io::SignalFormat::from_path(path))
            .ok_or_else(|| Error::format(path, "unknown signal format; pass --format"))
            .and_then(|f| io::read_signal(path, f));
        let sig = match parsed {
            Ok(sig) => sig,
            Err(e) => {
                warn!("rejected {}: {e}", path.display());
                report.rejected.push(RejectedFile {
                    source: path.clone(),
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let label = sig.label.clone().expect("reader requires a label");
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("signal");
        let output = out.join(format!("{stem}.csv"));
        io::write_signal_csv(&output, &sig)?;
        report.accepted.push(IngestedFile {
            source: path.clone(),
            output,
            label,
            sample_rate: sig.sample_rate,
            samples: sig.len(),
        });
    }
    io::write_json(&out.join("ingest_report.json"), &report)?;
    if report.accepted.is_empty() {
        return Err(Error::EmptyDataset("no signal file was accepted".into()));
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub seed: u64,
    pub split_frac: f64,
    pub image_side: usize,
    pub train_counts: BTreeMap<ClassLabel, usize>,
    pub test_counts: BTreeMap<ClassLabel, usize>,
    pub sources: Vec<PathBuf>,
    pub rejected: Vec<RejectedFile>,
}

/// Signal files in `dir`, sorted by name.
fn signal_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && io::SignalFormat::from_path(p).is_some())
        .collect();
    files.sort();
    Ok(files)
}

/// Images every signal file in `signal_dir`, splits per class and writes
/// `train.espc`, `test.espc` and `manifest.json`. Unreadable or short files
/// are skipped and listed; a missing expected class aborts.
pub fn cmd_build_dataset(signal_dir: &Path, cfg: &RunConfig, out: &Path) -> Result<DatasetManifest> {
    cfg.validate()?;
    let files = signal_files(signal_dir)?;
    if files.is_empty() {
        return Err(Error::EmptyDataset(format!("no signal files in {}", signal_dir.display())));
    }
    let mut images = Vec::new();
    let mut sources = Vec::new();
    let mut rejected = Vec::new();
    for path in files {
        let format = io::SignalFormat::from_path(&path).expect("filtered by extension");
        let result = io::read_signal(&path, format).and_then(|sig| signal_to_images(&sig, &cfg.stft, cfg.max_chunks_per_class));
        match result {
            Ok(imgs) => {
                images.extend(imgs);
                sources.push(path);
            }
            Err(e) => {
                warn!("skipping {}: {e}", path.display());
                rejected.push(RejectedFile {
                    source: path,
                    reason: e.to_string(),
                });
            }
        }
    }
    if images.is_empty() {
        return Err(Error::EmptyDataset("no signal file produced an image".into()));
    }
    if let Some(expected) = &cfg.expected_classes {
        let missing: Vec<String> = expected
            .iter()
            .filter(|c| !images.iter().any(|img| img.label.as_ref() == Some(*c)))
            .map(ToString::to_string)
            .collect();
        if !missing.is_empty() {
            return Err(Error::InvalidDataset(format!("missing classes: {}", missing.join(", "))));
        }
    }
    let (train_ds, test_ds) = split_images(images, cfg).stage("dataset")?;
    ensure_dir(out)?;
    io::write_dataset(&out.join("train.espc"), &train_ds)?;
    io::write_dataset(&out.join("test.espc"), &test_ds)?;
    let manifest = DatasetManifest {
        seed: cfg.seed,
        split_frac: cfg.split_frac,
        image_side: crate::spectrogram::IMAGE_SIDE,
        train_counts: train_ds.class_counts(),
        test_counts: test_ds.class_counts(),
        sources,
        rejected,
    };
    io::write_json(&out.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// A dataset argument may name the file or the directory holding it.
pub fn resolve_dataset(path: &Path, default_name: &str) -> PathBuf {
    if path.is_dir() {
        path.join(default_name)
    } else {
        path.to_path_buf()
    }
}

/// Trains on a persisted dataset and writes `basis.espb`, `model.espm`,
/// `report.json` and `timings.json`; also scores `test` when given.
pub fn cmd_train(dataset: &Path, test: Option<&Path>, cfg: &RunConfig, out: &Path) -> Result<RunReport> {
    cfg.validate()?;
    let train_ds = io::read_dataset(&resolve_dataset(dataset, "train.espc")).stage("load dataset")?;
    let mut timings = StageTimings::default();
    let mut trained = train(train_ds, cfg, &mut timings)?;
    if let Some(test) = test {
        let test_ds = io::read_dataset(&resolve_dataset(test, "test.espc")).stage("load dataset")?;
        let eval = timings
            .time("evaluate", || evaluate(&trained.basis, &trained.model, &test_ds))
            .stage("evaluate")?;
        trained.report.test = Some(eval);
    }
    ensure_dir(out)?;
    io::write_basis(&out.join("basis.espb"), &trained.basis)?;
    io::write_model(&out.join("model.espm"), &trained.model)?;
    io::write_json(&out.join("report.json"), &trained.report)?;
    io::write_json(&out.join("timings.json"), &timings)?;
    Ok(trained.report)
}

pub fn load_trained(model_dir: &Path) -> Result<(EigenBasis, EcocSvmModel)> {
    let basis = io::read_basis(&model_dir.join("basis.espb"))?;
    let model = io::read_model(&model_dir.join("model.espm"))?;
    Ok((basis, model))
}

/// Scores a dataset with a trained model; writes `evaluation.json`.
pub fn cmd_evaluate(model_dir: &Path, dataset: &Path, out: &Path) -> Result<EvaluationReport> {
    let (basis, model) = load_trained(model_dir)?;
    let ds = io::read_dataset(&resolve_dataset(dataset, "test.espc"))?;
    let report = evaluate(&basis, &model, &ds).stage("evaluate")?;
    ensure_dir(out)?;
    io::write_json(&out.join("evaluation.json"), &report)?;
    Ok(report)
}

/// `mode_<j>.pgm` per retained mode plus `singular_values.csv`.
pub fn cmd_export_modes(basis_path: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let basis = io::read_basis(&resolve_dataset(basis_path, "basis.espb"))?;
    ensure_dir(out)?;
    let mut paths = Vec::new();
    let mut csv = String::from("mode,singular_value\n");
    for j in 0..basis.k() {
        let path = out.join(format!("mode_{}.pgm", j + 1));
        io::write_pgm(&path, &basis.mode_image(j)?)?;
        paths.push(path);
        csv.push_str(&format!("{},{}\n", j + 1, basis.singular_values[j]));
    }
    let csv_path = out.join("singular_values.csv");
    std::fs::write(&csv_path, csv).map_err(|e| Error::io(&csv_path, e))?;
    Ok(paths)
}

/// Interpretation records grouped by true class. Samples orthogonal to
/// every mode are skipped with a warning.
pub fn interpret_dataset(basis: &EigenBasis, ds: &DatasetMatrix) -> Result<BTreeMap<ClassLabel, Vec<InterpretationRecord>>> {
    let features: DMatrix<f64> = basis.project_raw(&ds.data)?;
    let mut groups: BTreeMap<ClassLabel, Vec<InterpretationRecord>> = BTreeMap::new();
    for (i, label) in ds.labels.iter().enumerate() {
        let b = basis.center(ds.data.column(i).as_slice())?;
        let f: Vec<f64> = features.row(i).iter().copied().collect();
        match interpret_sample(i, b.as_slice(), &f) {
            Ok(rec) => groups.entry(label.clone()).or_default().push(rec),
            Err(Error::UndefinedInterpretation(why)) => warn!("sample {i} ({label}): {why}"),
            Err(e) => return Err(e),
        }
    }
    Ok(groups)
}

/// Per-class mean interpretation coefficients; writes `interpretation.csv`.
pub fn cmd_explain(model_dir: &Path, dataset: &Path, cfg: &RunConfig, out: &Path) -> Result<String> {
    let (basis, model) = load_trained(model_dir)?;
    check_feature_dim(&model, basis.k())?;
    let ds = io::read_dataset(&resolve_dataset(dataset, "test.espc"))?;
    let groups = interpret_dataset(&basis, &ds).stage("explain")?;
    let rows = class_mean_report(&groups, cfg.explain_samples, derive_seed(cfg.seed, "explain", 0));
    let csv = report_csv(&rows);
    ensure_dir(out)?;
    let path = out.join("interpretation.csv");
    std::fs::write(&path, &csv).map_err(|e| Error::io(&path, e))?;
    Ok(csv)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Three classes, few chunks: fast enough for unit tests.
    pub(crate) fn small_config() -> RunConfig {
        RunConfig {
            simulation: SimulationConfig {
                amplitude_levels: vec![1.0],
                ..SimulationConfig::default()
            },
            max_chunks_per_class: Some(10),
            rsvd: RsvdConfig {
                target_rank: 8,
                ..RsvdConfig::default()
            },
            seed: 5,
            ..RunConfig::default()
        }
    }

    #[test]
    fn default_config_has_twelve_classes() {
        let cfg = RunConfig::default();
        let params = cfg.class_params();
        assert_eq!(params.len(), 12);
        let sim = cfg.simulation.clone();
        let labels: Vec<String> = params
            .iter()
            .map(|p| simulate_fault_signal(&FaultSimParams { duration: 0.01, ..p.clone() }, &sim.bearing).unwrap().label.unwrap().to_string())
            .collect();
        assert_eq!(labels, ["B1", "B2", "B3", "B4", "IR1", "IR2", "IR3", "IR4", "OR1", "OR2", "OR3", "OR4"]);
        // one chunk per realization by default
        assert_eq!(params[0].sample_count(), 2048);
        let mut single = cfg.clone();
        single.simulation.layout = RecordLayout::SingleRecord;
        assert_eq!(single.class_params()[0].sample_count(), 151 * 2048);
        let seeds: std::collections::BTreeSet<u64> = params.iter().map(|p| p.rng_seed).collect();
        assert_eq!(seeds.len(), 12);
    }

    #[test]
    fn per_chunk_layout_concatenates_independent_realizations() {
        let mut cfg = small_config();
        cfg.max_chunks_per_class = Some(3);
        let signals = simulate_signals(&cfg).unwrap();
        assert_eq!(signals.len(), 3);
        for s in &signals {
            assert_eq!(s.samples.len(), 3 * 2048);
            let chunks: Vec<&[f64]> = s.samples.chunks(2048).collect();
            assert_ne!(chunks[0], chunks[1]);
        }
        let images = signals_to_images(&signals, &cfg).unwrap();
        assert_eq!(images.len(), 9);

        cfg.simulation.layout = RecordLayout::SingleRecord;
        let signals = simulate_signals(&cfg).unwrap();
        assert_eq!(signals[0].samples.len(), 4 * 2048);
        assert_eq!(signals_to_images(&signals, &cfg).unwrap().len(), 9);
    }

    #[test]
    fn config_json_round_trip_and_validation() {
        let cfg = RunConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        let partial: RunConfig = serde_json::from_str(r#"{"snr_db": 1.0, "svm": {"coding": "one-vs-all"}}"#).unwrap();
        assert_eq!(partial.snr_db, 1.0);
        assert_eq!(partial.cv_folds, 5);
        assert!(serde_json::from_str::<RunConfig>(r#"{"snr": 1.0}"#).is_err());

        let bad = RunConfig { split_frac: 1.0, ..RunConfig::default() };
        assert_eq!(bad.validate().unwrap_err().exit_code(), 2);
        let bad = RunConfig { rsvd: RsvdConfig { retained_components: 200, ..RsvdConfig::default() }, ..RunConfig::default() };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn small_experiment_is_deterministic() {
        let cfg = small_config();
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        let ja = serde_json::to_string(&a.pipeline.report).unwrap();
        let jb = serde_json::to_string(&b.pipeline.report).unwrap();
        assert_eq!(ja, jb);
        let report = &a.pipeline.report;
        assert_eq!(report.classes.len(), 3);
        assert_eq!(report.train_samples, 24);
        let test = report.test.as_ref().unwrap();
        assert_eq!(test.samples, 6);
        let total: usize = test.confusion_matrix.iter().flatten().sum();
        assert_eq!(total, 6);
        let trace: usize = (0..3).map(|i| test.confusion_matrix[i][i]).sum();
        assert_eq!(trace as f64 / 6.0, test.accuracy);
        assert!(a.timings.get("feature_extraction").is_some());
    }

    #[test]
    fn evaluating_training_set_reproduces_train_accuracy() {
        let cfg = small_config();
        let signals = simulate_signals(&cfg).unwrap();
        let images = signals_to_images(&signals, &cfg).unwrap();
        let (train_ds, _) = split_images(images, &cfg).unwrap();
        let copy = train_ds.clone();
        let trained = train(train_ds, &cfg, &mut StageTimings::default()).unwrap();
        let eval = evaluate(&trained.basis, &trained.model, &copy).unwrap();
        assert_eq!(eval, trained.report.train);
    }
}
